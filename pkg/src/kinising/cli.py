"""Command-line entry point: ``kinising <verb> [flags]``.

Configuration is layered: built-in defaults, then ``--config FILE``, then any
explicit flag.
"""
from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path

from . import evaluate as ev
from .config import ExperimentConfig, from_dict, load_config, save_config
from .glauber import load_history, save_history, simulate
from .inference import fit_l1, fit_l1_smooth, fit_unregularized, load_estimate, save_estimate
from .netgen import generate_network, load_network, save_network
from .pipeline import (Bundle, export_figure_data, method_kwargs, run_pipeline,
                       run_replicates, sweep_g)
from .regpath import METHODS, default_threshold_grid, load_path, run_method, save_path
from .tables import write_table

# flag -> (section, field, type)
CONFIG_FLAGS = {
    "--n-spins": ("network", "n_spins", int),
    "--avg-degree": ("network", "avg_degree", float),
    "--coupling-scale": ("network", "coupling_scale", float),
    "--field-value": ("network", "field_value", float),
    "--seed-network": ("network", "seed", int),
    "--updates-per-spin": ("simulation", "updates_per_spin", float),
    "--n-steps": ("simulation", "n_steps", int),
    "--burn-in": ("simulation", "burn_in", int),
    "--seed-dynamics": ("simulation", "seed", int),
    "--rate": ("inference", "rate", float),
    "--tolerance": ("inference", "tolerance", float),
    "--max-iters": ("inference", "max_iters", int),
    "--smoothing": ("inference", "smoothing", float),
    "--lambda-max": ("path", "lambda_max", float),
    "--lambda-step": ("path", "lambda_step", float),
    "--threshold-points": ("path", "threshold_points", int),
    "--fisher-refresh": ("path", "fisher_refresh", str),
    "--averaging": ("path", "averaging", str),
    "--seed-resimulate": ("path", "resimulate_seed", int),
    "--zero-tolerance": ("evaluation", "zero_tolerance", float),
    "--include-diagonal": ("evaluation", "include_diagonal", "flag"),
    "--replicates": (None, "replicates", int),
}


def _add_config_flags(p):
    p.add_argument("--config", type=Path, help="JSON or YAML config file")
    p.add_argument("--out", type=Path, default=None, help="output directory")
    for flag, (_, _, typ) in CONFIG_FLAGS.items():
        dest = flag[2:].replace("-", "_")
        if typ == "flag":
            p.add_argument(flag, dest=dest, action="store_const", const=True, default=None)
        else:
            p.add_argument(flag, dest=dest, type=typ, default=None)
    p.add_argument("--methods", nargs="*", choices=METHODS, default=None)


def resolve_config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if getattr(args, "config", None) else ExperimentConfig()
    data = cfg.to_dict()
    for flag, (section, name, _) in CONFIG_FLAGS.items():
        value = getattr(args, flag[2:].replace("-", "_"), None)
        if value is None:
            continue
        if section is None:
            data[name] = value
        else:
            data[section][name] = value
    if getattr(args, "methods", None) is not None:
        data["path"]["methods"] = list(args.methods)
    if getattr(args, "out", None) is not None:
        data["output"]["directory"] = str(args.out)
    return from_dict(data)


def _out(cfg):
    out = Path(cfg.output.directory)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_generate(args):
    cfg = resolve_config(args)
    net = cfg.network
    params = generate_network(net.n_spins, net.avg_degree, net.coupling_scale, net.field_value, net.seed)
    path, _ = save_network(params, _out(cfg) / "network.txt")
    print(f"wrote {path} ({params.n_bonds} bonds)")


def cmd_simulate(args):
    cfg = resolve_config(args)
    params = load_network(args.network)
    L = cfg.simulation.n_steps or int(round(params.n_spins * cfg.simulation.updates_per_spin))
    history = simulate(params, n_steps=L, burn_in_steps=cfg.simulation.burn_in, seed=cfg.simulation.seed)
    path = save_history(history, _out(cfg) / "history.txt", compact=args.compact)
    print(f"wrote {path} (L={history.n_steps})")


def cmd_fit(args):
    cfg = resolve_config(args)
    history = load_history(args.history)
    inf = cfg.inference
    common = dict(rate=inf.rate, tolerance=inf.tolerance,
                  include_diagonal=cfg.evaluation.include_diagonal)
    if args.penalty is None:
        est = fit_unregularized(history, max_iters=inf.max_iters, **common)
    elif inf.smoothing is not None:
        est = fit_l1_smooth(history, args.penalty, inf.smoothing, **common)
    else:
        est = fit_l1(history, args.penalty, max_iters=inf.max_iters, **common)
    name = "estimate_j0.txt" if args.penalty is None else f"estimate_l1_{args.penalty:g}.txt"
    path = save_estimate(est, _out(cfg) / name)
    print(f"wrote {path} (iterations={est.iterations}, converged={est.converged})")


def cmd_path(args):
    cfg = resolve_config(args)
    history = load_history(args.history)
    start = load_estimate(args.start)
    out = _out(cfg)
    for method in cfg.path.methods:
        grid = default_threshold_grid(start, cfg.path.threshold_points)
        path = run_method(method, history, start, cfg.path.lambda_grid(), grid,
                          **method_kwargs(cfg, method))
        written = save_path(path, out / f"path_{method}.tsv", (f"config_hash: {cfg.digest()}",))
        print(f"wrote {written}")


def cmd_evaluate(args):
    cfg = resolve_config(args)
    params = load_network(args.network)
    truth = ev.BondTruth.from_params(params, cfg.evaluation.include_diagonal)
    out = _out(cfg)
    for file in args.paths:
        path = load_path(file, params.n_spins)
        tol = cfg.evaluation.zero_tolerance
        roc = ev.roc_from_path(truth, path, tol)
        hdr = (f"config_hash: {cfg.digest()}", f"method: {path.method_tag}")
        write_table(out / f"errors_{path.method_tag}.tsv", ev.ERROR_COLUMNS,
                    ev.error_table(truth, path, tol), hdr)
        write_table(out / f"roc_{path.method_tag}.tsv", ("label", "fpr", "tpr"), roc.rows(),
                    (*hdr, f"epsilon: {roc.epsilon!r}"))
        print(f"{path.method_tag}: epsilon = {roc.epsilon:.4f}")


def _parse_g(values):
    out = []
    for v in values:
        v = v.strip()
        if v.startswith("1/sqrt"):
            out.append(1.0 / math.sqrt(float(v[len("1/sqrt"):].strip("()"))))
        elif "/" in v:
            a, b = v.split("/")
            out.append(float(a) / float(b))
        else:
            out.append(float(v))
    return out


def cmd_sweep(args):
    cfg = resolve_config(args)
    result = sweep_g(cfg, _parse_g(args.g_values), matching=args.matching)
    bundle = Bundle(cfg, sweep=result)
    for p in export_figure_data(bundle, "g_sweep", _out(cfg)):
        print(f"wrote {p}")


REFERENCE_SWEEP_LENGTH = 8862


def cmd_reproduce(args):
    cfg = resolve_config(args)
    out = _out(cfg) / args.preset
    out.mkdir(parents=True, exist_ok=True)
    save_config(cfg, out / "config.json")
    if args.preset == "fig1":
        for T in (2000.0, 50.0, 200.0):
            sub = cfg.replace(simulation={"updates_per_spin": T, "n_steps": None},
                              path={"methods": []}, output={"formats": ["tables"]})
            run_pipeline(sub, out / f"T{int(T)}")
    elif args.preset in ("fig2", "fig3", "fig4"):
        bundle = run_pipeline(cfg, out / "realization")
        figure = {"fig2": "path_trajectories", "fig3": "errors_vs_lambda", "fig4": "roc_overlay"}[args.preset]
        export_figure_data(bundle, figure, out)
        if args.preset in ("fig3", "fig4"):
            res = run_replicates(cfg)
            # J0-cut optima are grid positions, not penalties, so they are left out
            rows = [(m, res.mean_epsilon(m), res.stderr_epsilon(m),
                     res.optimal_lambda(m) if m != "j0cut" else float("nan"))
                    for m in cfg.path.methods]
            write_table(out / "replicates_summary.tsv",
                        ("method", "epsilon_mean", "epsilon_stderr", "lambda_opt"), rows,
                        (f"config_hash: {cfg.digest()}", f"replicates: {cfg.replicates}"))
    elif args.preset == "fig5":
        if cfg.simulation.n_steps is None and args.n_steps is None:
            cfg = cfg.replace(simulation={"n_steps": REFERENCE_SWEEP_LENGTH})
        result = sweep_g(cfg, [0.5, 1 / math.sqrt(2), 1.0], "matched_j0cut_area")
        export_figure_data(Bundle(cfg, sweep=result), "g_sweep", out)
    print(f"wrote {out}")


def build_parser():
    parser = argparse.ArgumentParser(prog="kinising", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("generate", help="draw a network")
    _add_config_flags(p)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("simulate", help="run Glauber dynamics on a saved network")
    _add_config_flags(p)
    p.add_argument("--network", type=Path, required=True)
    p.add_argument("--compact", action="store_true", help="store schedule and outcomes only")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="unregularised or L1 fit of a saved history")
    _add_config_flags(p)
    p.add_argument("--history", type=Path, required=True)
    p.add_argument("--penalty", type=float, default=None, help="L1 coefficient on the summed likelihood")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("path", help="regularisation paths from a saved fit")
    _add_config_flags(p)
    p.add_argument("--history", type=Path, required=True)
    p.add_argument("--start", type=Path, required=True, help="unregularised estimate file")
    p.set_defaults(func=cmd_path)

    p = sub.add_parser("evaluate", help="ROC and error tables for saved paths")
    _add_config_flags(p)
    p.add_argument("--network", type=Path, required=True)
    p.add_argument("paths", nargs="+", type=Path)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep-g", help="compare methods across coupling strengths")
    _add_config_flags(p)
    p.add_argument("--g-values", nargs="+", default=["1/2", "1/sqrt2", "1"])
    p.add_argument("--matching", choices=("fixed_T", "matched_j0cut_area"), default="matched_j0cut_area")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("reproduce", help="named presets for the figure tables")
    _add_config_flags(p)
    p.add_argument("preset", choices=("fig1", "fig2", "fig3", "fig4", "fig5"))
    p.set_defaults(func=cmd_reproduce)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    args.func(args)
    return 0


if __name__ == "__main__":
    sys.exit(main())
