"""Run configuration: INI-style files with per-benchmark defaults.

The file has five sections -- [sde], [domain], [model], [train], [eval] --
and every key defaults to the benchmark's reference value, so a minimal
config only names the benchmark and the keys it overrides.  Unknown
sections or keys are rejected outright.
"""

import configparser
import io
from dataclasses import dataclass

import numpy as np

from .benchmarks import get_benchmark
from .errors import ConfigError
from .geometry import Domain

_SECTIONS = ("sde", "domain", "model", "train", "eval")

_SCHEMA = {
    "sde": {
        "step_size": float,
        "burnin_steps": int,
        "terminal_steps": int,
        "num_trajectories": int,
        "margin_factor": float,
        "anisotropic": bool,
    },
    "domain": {
        "file": str,
        "refined_file": str,
        "refine_log": str,
        "candidates": "floats",
        "threshold": float,
    },
    "model": {
        "benchmark": str,
        "family": str,
        "rank": int,
        "num_basis": int,
        "kinds": "strs",
        "widths": "ints",
        "quad_panels": int,
        "quad_points": int,
        "precision": str,
        "checkpoint": str,
    },
    "train": {
        "epochs": int,
        "batch_size": int,
        "optimizer": str,
        "lr_start": float,
        "lr_end": float,
        "lr_power": float,
        "beta1": "optfloat",
        "beta2": "optfloat",
        "weight_decay": float,
        "w1": float,
        "w2": float,
        "phase_epochs": int,
        "history": str,
        "checkpoint_every": int,
        "resume": str,
    },
    "eval": {
        "box_lo": "floats",
        "box_hi": "floats",
        "samples": int,
        "thresholds": "floats",
        "report": str,
        "slice_fixed": "floats",
        "slice_pair": "ints",
        "slice_resolution": int,
        "slice_out": str,
        "integral_radii": "floats",
        "integral_out": str,
    },
}


def default_config(benchmark_name="ring2d", family="trbfn"):
    """The full configuration dictionary for a named benchmark.

    Every value is the reference default for that benchmark (SDE settings,
    batch sizes, penalty weights, refinement grids, evaluation boxes).
    """
    b = get_benchmark(benchmark_name)
    is_trbfn = family == "trbfn"
    cfg = {
        "sde": {
            "step_size": 0.001,
            "burnin_steps": 1_000_000,
            "terminal_steps": 1_500_000,
            "num_trajectories": 10,
            "margin_factor": 1.1,
            "anisotropic": b.name == "multimode10d",
        },
        "domain": {
            "file": "domain.txt",
            "refined_file": "domain_refined.txt",
            "refine_log": "refine_log.csv",
            "candidates": list(b.refine_candidates or ()),
            "threshold": b.refine_threshold if b.refine_threshold is not None else 0.97,
        },
        "model": {
            "benchmark": b.name,
            "family": family,
            "rank": 1000 if is_trbfn else 64,
            "num_basis": 3,
            "kinds": ["wendland"],
            "widths": [1, 8, 8, 1],
            "quad_panels": 16,
            "quad_points": 16,
            "precision": "single" if is_trbfn else "double",
            "checkpoint": "model.npz",
        },
        "train": {
            "epochs": 100_000,
            "batch_size": b.batch_trbfn if is_trbfn else b.batch_tffn,
            "optimizer": "lion",
            "lr_start": 9e-4 if is_trbfn else 1e-3,
            "lr_end": 8e-6,
            "lr_power": 1.0,
            "beta1": None,
            "beta2": None,
            "weight_decay": 0.0,
            "w1": b.w1,
            "w2": b.w2,
            "phase_epochs": 100,
            "history": "history.csv",
            "checkpoint_every": 0,
            "resume": "",
        },
        "eval": {
            "box_lo": [b.eval_box[0]] * b.d,
            "box_hi": [b.eval_box[1]] * b.d,
            "samples": b.eval_samples,
            "thresholds": list(b.eval_thresholds),
            "report": "eval.csv",
            "slice_fixed": [0.0] * b.d,
            "slice_pair": [0, 1],
            "slice_resolution": 201,
            "slice_out": "slice.csv",
            "integral_radii": list(b.refine_candidates or ()),
            "integral_out": "integrals.csv",
        },
    }
    return cfg


def _parse_value(section, key, raw):
    kind = _SCHEMA[section][key]
    raw = raw.strip()
    try:
        if kind is float:
            return float(raw)
        if kind is int:
            return int(raw)
        if kind is bool:
            low = raw.lower()
            if low in ("true", "yes", "1", "on"):
                return True
            if low in ("false", "no", "0", "off"):
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        if kind is str:
            return raw
        if kind == "floats":
            return [float(v) for v in raw.split(",") if v.strip()] if raw else []
        if kind == "ints":
            return [int(v) for v in raw.split(",") if v.strip()] if raw else []
        if kind == "strs":
            return [v.strip() for v in raw.split(",") if v.strip()] if raw else []
        if kind == "optfloat":
            return float(raw) if raw else None
    except ValueError as exc:
        raise ConfigError(f"bad value for [{section}] {key}: {raw!r} ({exc})") from exc
    raise AssertionError(kind)


def _format_value(value):
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (list, tuple)):
        return ",".join(_format_value(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def load_config(path=None, text=None):
    """Parse a config file on top of the benchmark defaults.

    The [model] section's ``benchmark`` and ``family`` keys select the
    default set; all other keys override it.  Unknown sections or keys are
    configuration errors.
    """
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    if text is not None:
        parser.read_string(text)
    else:
        read = parser.read(path)
        if not read:
            raise ConfigError(f"cannot read config file {path}")
    for section in parser.sections():
        if section not in _SECTIONS:
            raise ConfigError(f"unknown config section [{section}]")
        for key in parser[section]:
            if key not in _SCHEMA[section]:
                raise ConfigError(f"unknown key {key!r} in section [{section}]")

    benchmark = parser.get("model", "benchmark", fallback="ring2d")
    family = parser.get("model", "family", fallback="trbfn")
    if family not in ("trbfn", "tffn"):
        raise ConfigError(f"unknown model family {family!r}")
    cfg = default_config(benchmark, family)
    for section in parser.sections():
        for key, raw in parser[section].items():
            cfg[section][key] = _parse_value(section, key, raw)
    return cfg


def dump_config(cfg):
    """Serialize a configuration dict to canonical INI text."""
    out = io.StringIO()
    for section in _SECTIONS:
        out.write(f"[{section}]\n")
        for key in _SCHEMA[section]:
            out.write(f"{key} = {_format_value(cfg[section][key])}\n")
        out.write("\n")
    return out.getvalue()


# -- domain files ------------------------------------------------------------


def write_domain_file(path, domain, provenance=None):
    lines = ["[domain]"]
    lines.append(f"dimension = {domain.d}")
    lines.append("center = " + ",".join(repr(float(v)) for v in domain.center))
    lines.append("r = " + ",".join(repr(float(v)) for v in domain.r))
    if provenance:
        lines.append("")
        lines.append("[provenance]")
        for key in sorted(provenance):
            lines.append(f"{key} = {_format_value(provenance[key])}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_domain_file(path):
    parser = configparser.ConfigParser(interpolation=None)
    if not parser.read(path):
        raise ConfigError(f"cannot read domain file {path}")
    sec = parser["domain"]
    center = np.array([float(v) for v in sec["center"].split(",")])
    r = np.array([float(v) for v in sec["r"].split(",")])
    if len(center) != int(sec["dimension"]) or len(r) != len(center):
        raise ConfigError(f"inconsistent domain file {path}")
    return Domain(center, r)
