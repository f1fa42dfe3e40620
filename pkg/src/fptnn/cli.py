"""Command-line pipeline: estimate-domain -> train -> refine -> retrain -> eval."""

import argparse
import csv
import sys

import numpy as np

from . import evaluation
from .benchmarks import exact_density, full_space_normalizer, get_benchmark
from .checkpoint import load_checkpoint, save_checkpoint
from .config import load_config, read_domain_file, write_domain_file
from .errors import FptnnError
from .geometry import (
    SdeSimConfig,
    estimate_domain,
    estimate_domain_anisotropic,
    euler_maruyama,
    refine_domain,
)
from .tffn import TffnModel
from .training import TrainConfig, train
from .trbfn import TrbfnModel
from .util import make_rng

_PRECISIONS = {"single": np.float32, "double": np.float64}


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="fptnn",
        description="Steady-state Fokker-Planck solver with tensor neural networks",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in _COMMANDS.items():
        p = sub.add_parser(name, help=fn.__doc__)
        p.add_argument("--config", required=True, help="path to the INI config file")
        p.add_argument("--out", default=None, help="override the command's output path")
        p.add_argument("--seed", type=int, default=0, help="base seed for all randomness")
        p.add_argument("--threads", type=int, default=1, help="worker threads for batch evaluation")
        p.add_argument(
            "--precision", choices=sorted(_PRECISIONS), default=None,
            help="override the model precision",
        )
        p.set_defaults(fn=fn)
    return parser


def _dtype(cfg, args):
    name = args.precision or cfg["model"]["precision"]
    if name not in _PRECISIONS:
        raise FptnnError(f"unknown precision {name!r}")
    return _PRECISIONS[name]


def _build_model(cfg, domain, args):
    model_cfg = cfg["model"]
    dtype = _dtype(cfg, args)
    if model_cfg["family"] == "trbfn":
        kinds = model_cfg["kinds"]
        if len(kinds) == 1 and model_cfg["num_basis"] > 1:
            kinds = kinds * model_cfg["num_basis"]
        return TrbfnModel.initialize(
            domain,
            rank=model_cfg["rank"],
            kinds=kinds,
            rng=make_rng(args.seed, "model-init"),
            dtype=dtype,
        )
    return TffnModel.initialize(
        domain,
        rank=model_cfg["rank"],
        widths=model_cfg["widths"],
        rng=make_rng(args.seed, "model-init"),
        dtype=dtype,
        quad_panels=model_cfg["quad_panels"],
        quad_points=model_cfg["quad_points"],
    )


def cmd_estimate_domain(cfg, args):
    """Simulate SDE trajectories and write the estimated numerical support."""
    bench = get_benchmark(cfg["model"]["benchmark"])
    problem = bench.problem()
    sde = cfg["sde"]
    sim = SdeSimConfig(
        step_size=sde["step_size"],
        burnin_steps=sde["burnin_steps"],
        terminal_steps=sde["terminal_steps"],
        num_trajectories=sde["num_trajectories"],
        margin_factor=sde["margin_factor"],
        rng_seed=args.seed,
    )
    z0 = np.zeros((sim.num_trajectories, bench.d))
    xi = euler_maruyama(problem, bench.sigma, z0, sim)
    if sde["anisotropic"]:
        domain = estimate_domain_anisotropic(xi)
    else:
        _, _, domain = estimate_domain(xi, sim.margin_factor)
    out = args.out or cfg["domain"]["file"]
    write_domain_file(
        out,
        domain,
        provenance={
            "seed": args.seed,
            "trajectories": sim.num_trajectories,
            "burnin_steps": sim.burnin_steps,
            "terminal_steps": sim.terminal_steps,
            "step_size": sim.step_size,
            "margin_factor": sim.margin_factor,
            "anisotropic": sde["anisotropic"],
        },
    )
    print(f"wrote domain to {out} (r = {np.array2string(domain.r, precision=4)})")
    return 0


def cmd_train(cfg, args):
    """Train a model on the stored domain; write checkpoint and loss history."""
    bench = get_benchmark(cfg["model"]["benchmark"])
    problem = bench.problem()
    domain = read_domain_file(cfg["domain"]["file"])
    tr = cfg["train"]
    start_epoch = 0
    optimizer_states = None
    if tr["resume"]:
        model, start_epoch, optimizer_states = load_checkpoint(tr["resume"])
    else:
        model = _build_model(cfg, domain, args)
    out = args.out or cfg["model"]["checkpoint"]
    train_config = TrainConfig(
        epochs=tr["epochs"],
        batch_size=tr["batch_size"],
        seed=args.seed,
        optimizer=tr["optimizer"],
        lr_start=tr["lr_start"],
        lr_end=tr["lr_end"],
        lr_power=tr["lr_power"],
        beta1=tr["beta1"],
        beta2=tr["beta2"],
        weight_decay=tr["weight_decay"],
        w1=tr["w1"],
        w2=tr["w2"],
        phase_epochs=tr["phase_epochs"],
        n_threads=args.threads,
        checkpoint_every=tr["checkpoint_every"],
        history_path=tr["history"],
    )

    def saver(m, epoch, states):
        save_checkpoint(out, m, epoch=epoch, optimizer_states=states)

    result = train(
        model, problem, domain, train_config,
        start_epoch=start_epoch, optimizer_states=optimizer_states,
        checkpoint_saver=saver,
    )
    if len(result.history):
        final = result.history[-1]
        print(f"trained {int(final[0]) + 1} epochs; final loss {final[1]:.6g}")
    else:
        save_checkpoint(out, model, epoch=0, optimizer_states={})
        print("no epochs requested; wrote the initialized model")
    print(f"wrote checkpoint to {out}, history to {tr['history']}")
    return 0


def cmd_refine(cfg, args):
    """Shrink the support to the smallest candidate holding the mass threshold."""
    domain = read_domain_file(cfg["domain"]["file"])
    model, _, _ = load_checkpoint(cfg["model"]["checkpoint"])
    candidates = cfg["domain"]["candidates"]
    threshold = cfg["domain"]["threshold"]
    if not candidates:
        print("empty candidate set; keeping the initial half-edge", file=sys.stderr)

    center = domain.center
    rows = []

    def box_integral(r):
        val = model.integral_over_box(center - r, center + r)
        rows.append((r, val))
        return val

    b = float(domain.r.max())
    r_star = refine_domain(box_integral, b, candidates, threshold)
    refined = domain if not candidates else _refined_domain(domain, r_star)
    out = args.out or cfg["domain"]["refined_file"]
    write_domain_file(out, refined, provenance={"threshold": threshold, "r_star": r_star})
    log = cfg["domain"]["refine_log"]
    with open(log, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["r", "integral"])
        for r, val in rows:
            w.writerow([repr(float(r)), repr(float(val))])
    print(f"refined half-edge r* = {r_star}; wrote {out} and {log}")
    return 0


def _refined_domain(domain, r_star):
    from .geometry import Domain

    return Domain(domain.center, np.full(domain.d, r_star))


def _load_model_checked(cfg):
    model, _, _ = load_checkpoint(cfg["model"]["checkpoint"])
    family = cfg["model"]["family"]
    actual = "trbfn" if isinstance(model, TrbfnModel) else "tffn"
    if family != actual:
        raise FptnnError(
            f"checkpoint holds a {actual} model but the config says {family}"
        )
    return model


def cmd_eval(cfg, args):
    """Relative errors against the exact solution plus the RMS difference."""
    bench = get_benchmark(cfg["model"]["benchmark"])
    model = _load_model_checked(cfg)
    ev = cfg["eval"]
    normalizer = full_space_normalizer(bench)

    def exact_fn(x):
        return exact_density(bench, x, normalizer)

    rows = evaluation.relative_error(
        exact_fn, model.eval_batch, ev["box_lo"], ev["box_hi"],
        ev["samples"], ev["thresholds"], args.seed,
    )
    l2 = evaluation.l2_difference(
        exact_fn, model.eval_batch, ev["box_lo"], ev["box_hi"], ev["samples"], args.seed
    )
    report = evaluation.EvalReport(
        rows=rows, l2_difference=l2,
        metadata={"seed": args.seed, "total_samples": ev["samples"]},
    )
    out = args.out or ev["report"]
    evaluation.write_report_csv(out, report, model.describe(), model.n_params)
    for row in rows:
        err = "undefined" if row.rel_error is None else f"{row.rel_error:.6g}"
        print(f"eps={row.threshold:g}: n={row.count}, rel_error={err}")
    print(f"l2_rms={l2:.6g}; wrote {out}")
    return 0


def cmd_export_slice(cfg, args):
    """Write a density grid over one coordinate pair with the rest held fixed."""
    model = _load_model_checked(cfg)
    ev = cfg["eval"]
    pair = tuple(ev["slice_pair"])
    xa, xb, vals = evaluation.slice_grid(
        model, ev["slice_fixed"], pair, ev["slice_resolution"]
    )
    out = args.out or ev["slice_out"]
    evaluation.write_slice_csv(out, xa, xb, vals, pair)
    print(f"wrote {vals.size}-point slice to {out}")
    return 0


def cmd_integrate_table(cfg, args):
    """Tabulate model mass over centered boxes of growing half-edge."""
    model = _load_model_checked(cfg)
    radii = cfg["eval"]["integral_radii"]
    table = evaluation.integral_table(model, model.domain.center, radii)
    out = args.out or cfg["eval"]["integral_out"]
    evaluation.write_integral_csv(out, table)
    for r, val in table:
        print(f"r={r:g}: integral={val:.6g}")
    print(f"wrote {out}")
    return 0


_COMMANDS = {
    "estimate-domain": cmd_estimate_domain,
    "train": cmd_train,
    "refine": cmd_refine,
    "eval": cmd_eval,
    "export-slice": cmd_export_slice,
    "integrate-table": cmd_integrate_table,
}


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
        return args.fn(cfg, args)
    except FptnnError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
