"""Error metrics against exact solutions, integral tables, contour slices."""

import csv
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .util import make_rng


@dataclass
class ThresholdRow:
    threshold: float
    count: int
    rel_error: Optional[float]  # None when no test point clears the threshold


@dataclass
class EvalReport:
    rows: list
    l2_difference: float
    integral_table: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)


def _uniform_box(lo, hi, n, rng):
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    return lo + rng.random((n, lo.size)) * (hi - lo)


def relative_error(exact_fn, model_fn, box_lo, box_hi, total_samples, thresholds, seed):
    """Mean relative deviation |p* - p_N| / p* on each high-density subset.

    One shared uniform sample over the test box serves every threshold; for
    each threshold eps the sample is filtered to points with p* > eps.
    Rows with an empty subset report count 0 and an undefined error.
    """
    rng = make_rng(seed, "relative-error")
    x = _uniform_box(box_lo, box_hi, total_samples, rng)
    exact = np.asarray(exact_fn(x), dtype=float)
    approx = np.asarray(model_fn(x), dtype=float)
    rows = []
    for eps in thresholds:
        mask = exact > eps
        count = int(mask.sum())
        if count == 0:
            rows.append(ThresholdRow(float(eps), 0, None))
            continue
        err = float(np.mean(np.abs(exact[mask] - approx[mask]) / exact[mask]))
        rows.append(ThresholdRow(float(eps), count, err))
    return rows


def l2_difference(exact_fn, model_fn, box_lo, box_hi, total_samples, seed):
    """Root-mean-square of (p* - p_N) over a uniform sample of the test box.

    The reference tables report an undefined "L2 error"; this RMS Monte
    Carlo estimate is our reading of it and is labeled as such in reports.
    """
    rng = make_rng(seed, "l2-difference")
    x = _uniform_box(box_lo, box_hi, total_samples, rng)
    diff = np.asarray(exact_fn(x), dtype=float) - np.asarray(model_fn(x), dtype=float)
    return float(np.sqrt(np.mean(diff * diff)))


def integral_table(model, center, radii):
    """Integrals of the model over centered boxes of growing half-edge."""
    center = np.asarray(center, dtype=float)
    out = []
    for r in radii:
        r = float(r)
        out.append((r, model.integral_over_box(center - r, center + r)))
    return out


def slice_grid(model, fixed, free_pair, resolution, box_lo=None, box_hi=None):
    """Density on a regular 2-D grid over one coordinate pair.

    ``fixed`` supplies the value of every coordinate; the two in
    ``free_pair`` sweep a grid over [box_lo, box_hi] (the model domain by
    default).  Resolution 1 evaluates the box midpoint only.  Returns
    (xa, xb, values) with values shaped (resolution, resolution).
    """
    a, b = free_pair
    if a == b:
        raise ValueError("free pair indices must be distinct")
    fixed = np.asarray(fixed, dtype=float)
    if box_lo is None:
        box_lo = model.domain.lo
    if box_hi is None:
        box_hi = model.domain.hi
    box_lo = np.asarray(box_lo, dtype=float)
    box_hi = np.asarray(box_hi, dtype=float)

    def axis(lo, hi):
        if resolution == 1:
            return np.array([0.5 * (lo + hi)])
        return np.linspace(lo, hi, resolution)

    xa = axis(box_lo[a], box_hi[a])
    xb = axis(box_lo[b], box_hi[b])
    ga, gb = np.meshgrid(xa, xb, indexing="ij")
    pts = np.broadcast_to(fixed, (ga.size, fixed.size)).copy()
    pts[:, a] = ga.ravel()
    pts[:, b] = gb.ravel()
    vals = np.asarray(model.eval_batch(pts), dtype=float).reshape(resolution, resolution)
    return xa, xb, vals


def write_report_csv(path, report, model_label, n_params):
    """Reference-table-shaped CSV: one model row with per-threshold error
    columns plus the RMS difference, then a row of subset point counts."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        header = ["model", "n_params"]
        header += [f"err_eps_{row.threshold:g}" for row in report.rows]
        header += ["l2_rms"]
        w.writerow(header)
        vals = [model_label, n_params]
        vals += [
            "undefined" if row.rel_error is None else repr(row.rel_error)
            for row in report.rows
        ]
        vals += [repr(report.l2_difference)]
        w.writerow(vals)
        counts = ["counts", report.metadata.get("total_samples", "")]
        counts += [row.count for row in report.rows]
        counts += [""]
        w.writerow(counts)


def write_slice_csv(path, xa, xb, vals, pair):
    a, b = pair
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"x{a + 1}", f"x{b + 1}", "value"])
        for i, va in enumerate(xa):
            for j, vb in enumerate(xb):
                w.writerow([repr(float(va)), repr(float(vb)), repr(float(vals[i, j]))])


def write_integral_csv(path, table):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["r", "integral"])
        for r, val in table:
            w.writerow([repr(float(r)), repr(float(val))])
