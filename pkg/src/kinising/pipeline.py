"""End-to-end experiments: generate, simulate, fit, prune, evaluate.

All randomness comes from three configured seeds (network, dynamics,
resimulation), so a configuration fully determines every table written.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import evaluate as ev
from .config import ExperimentConfig, replicate_seed, save_config
from .errors import ParameterError, StageError
from .glauber import save_history, simulate
from .inference import fit_unregularized, save_estimate
from .netgen import generate_network, save_network
from .regpath import default_threshold_grid, run_method, save_path
from .tables import write_table

log = logging.getLogger(__name__)

FIGURES = ("hist_J0", "path_trajectories", "errors_vs_lambda", "roc_overlay", "g_sweep")


class MissingStageError(LookupError):
    """A figure was requested from a bundle lacking one of its inputs."""


@dataclass(eq=False)
class Bundle:
    config: ExperimentConfig
    network: object = None
    history: object = None
    truth: object = None
    start: object = None
    paths: dict = field(default_factory=dict)
    rocs: dict = field(default_factory=dict)
    errors: dict = field(default_factory=dict)
    sweep: object = None


def _stage(name, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except StageError:
        raise
    except Exception as exc:
        raise StageError(name, exc) from exc


def _header(config, *extra):
    return (f"config_hash: {config.digest()}", *extra)


def method_kwargs(config, method):
    inf, path = config.inference, config.path
    if method == "full_l1":
        return {"rate": inf.rate, "tolerance": inf.tolerance, "max_iters": inf.max_iters}
    if method in ("approx1", "approx2"):
        return {"fisher_refresh": path.fisher_refresh, "averaging": path.averaging,
                "resimulate_seed": path.resimulate_seed, "burn_in_steps": config.simulation.burn_in}
    if method == "approx3":
        return {"averaging": path.averaging}
    return {}


def realize(config, replicate=0):
    """Network, history and unregularised fit for one replicate."""
    net, sim, inf = config.network, config.simulation, config.inference
    params = _stage("generate", generate_network, net.n_spins, net.avg_degree, net.coupling_scale,
                    net.field_value, replicate_seed(net.seed, replicate))
    history = _stage("simulate", simulate, params, n_steps=config.n_steps(),
                     burn_in_steps=sim.burn_in, seed=replicate_seed(sim.seed, replicate))
    start = _stage("fit", fit_unregularized, history, rate=inf.rate, tolerance=inf.tolerance,
                   max_iters=inf.max_iters, include_diagonal=config.evaluation.include_diagonal)
    if not start.converged:
        log.warning("unregularised fit did not converge in %d iterations", start.iterations)
    return params, history, start


def _evaluate_method(config, truth, history, start, method):
    threshold_grid = default_threshold_grid(start, config.path.threshold_points)
    path = _stage(f"path:{method}", run_method, method, history, start,
                  config.path.lambda_grid(), threshold_grid, **method_kwargs(config, method))
    tol = config.evaluation.zero_tolerance
    roc = _stage(f"evaluate:{method}", ev.roc_from_path, truth, path, tol)
    errors = ev.error_table(truth, path, tol)
    return path, roc, errors


def run_pipeline(config, out_dir=None, replicate=0):
    """Run every stage for one realisation and optionally write all artifacts.

    Artifacts are written as soon as each stage finishes, so a failure leaves
    the outputs of the completed stages in place.
    """
    config.validate()
    out = Path(out_dir) if out_dir is not None else None
    fmt = set(config.output.formats)
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        save_config(config, out / "config.json")
    params, history, start = realize(config, replicate)
    truth = ev.BondTruth.from_params(params, config.evaluation.include_diagonal)
    bundle = Bundle(config, params, history, truth, start)
    if out is not None:
        save_network(params, out / "network.txt")
        save_history(history, out / "history.txt", compact=config.output.compact_history)
        save_estimate(start, out / "estimate_j0.txt")
    for method in config.path.methods:
        path, roc, errors = _evaluate_method(config, truth, history, start, method)
        bundle.paths[method], bundle.rocs[method], bundle.errors[method] = path, roc, errors
        if out is not None:
            hdr = _header(config, f"method: {method}")
            if "paths" in fmt:
                save_path(path, out / f"path_{method}.tsv", _header(config))
            write_table(out / f"errors_{method}.tsv", ev.ERROR_COLUMNS, errors, hdr)
            write_table(out / f"roc_{method}.tsv", ("label", "fpr", "tpr"), roc.rows(),
                        (*hdr, f"epsilon: {roc.epsilon!r}"))
    if out is not None:
        write_table(out / "summary.tsv", ("method", "epsilon", "lambda_opt"),
                    summary_rows(bundle), _header(config))
        if "tables" in fmt:
            export_figure_data(bundle, "hist_J0", out)
    return bundle


def summary_rows(bundle):
    rows = []
    for method, roc in bundle.rocs.items():
        err = np.array(bundle.errors[method], dtype=float)
        rows.append((method, roc.epsilon, ev.optimal_lambda(err[:, 0], err[:, 5])))
    return rows


@dataclass
class ReplicateResult:
    """Per-method epsilon values and total-error curves over replicates."""

    epsilons: dict
    total_errors: dict
    grids: dict
    n_present: list

    def mean_epsilon(self, method):
        return float(np.mean(self.epsilons[method]))

    def stderr_epsilon(self, method):
        e = np.asarray(self.epsilons[method])
        return float(e.std(ddof=1) / math.sqrt(e.size)) if e.size > 1 else 0.0

    def optimal_lambda(self, method):
        curve = np.mean(self.total_errors[method], axis=0)
        return ev.optimal_lambda(self.grids[method], curve)


def run_replicates(config, methods=None, replicates=None):
    """Repeat the pipeline (in memory) over independent network and dynamics seeds."""
    methods = list(config.path.methods if methods is None else methods)
    replicates = config.replicates if replicates is None else replicates
    eps = {m: [] for m in methods}
    tot = {m: [] for m in methods}
    grids, n_present = {}, []
    for r in range(replicates):
        params, history, start = realize(config, r)
        truth = ev.BondTruth.from_params(params, config.evaluation.include_diagonal)
        n_present.append(truth.n_present)
        for m in methods:
            path, roc, errors = _evaluate_method(config, truth, history, start, m)
            eps[m].append(roc.epsilon)
            err = np.array(errors, dtype=float)
            tot[m].append(err[:, 5])
            # J0-cut thresholds depend on the realisation; index by position
            grids[m] = err[:, 0] if m != "j0cut" else np.arange(err.shape[0], dtype=float)
        log.info("replicate %d: %s", r, {m: round(eps[m][-1], 4) for m in methods})
    return ReplicateResult(eps, tot, grids, n_present)


# -- coupling-strength sweep --------------------------------------------------

@dataclass
class SweepResult:
    rows: list
    columns: tuple
    reference_epsilon: float | None = None


def _with(config, coupling_scale=None, n_steps=None):
    net, sim = {}, {}
    if coupling_scale is not None:
        net["coupling_scale"] = float(coupling_scale)
    if n_steps is not None:
        sim["n_steps"] = int(n_steps)
    return config.replace(network=net, simulation=sim)


def j0cut_epsilon(config, replicates):
    result = run_replicates(config, ["j0cut"], replicates)
    return result.mean_epsilon("j0cut")


def match_length(config, target, replicates, bounds, tolerance=0.002, max_steps=16):
    """Bisect the data length so that the seed-mean J0-cut epsilon hits ``target``.

    Returns ``(n_steps, epsilon, status)``; ``status`` is ``"ok"``,
    ``"not_bracketed"`` or ``"max_steps"``.
    """
    lo, hi = int(bounds[0]), int(bounds[1])
    e_lo = j0cut_epsilon(_with(config, n_steps=lo), replicates)
    e_hi = j0cut_epsilon(_with(config, n_steps=hi), replicates)
    if not e_lo >= target >= e_hi:
        best = lo if abs(e_lo - target) < abs(e_hi - target) else hi
        return best, e_lo if best == lo else e_hi, "not_bracketed"
    best = (lo, e_lo) if abs(e_lo - target) < abs(e_hi - target) else (hi, e_hi)
    for _ in range(max_steps):
        mid = (lo + hi) // 2
        if mid in (lo, hi):
            break
        e_mid = j0cut_epsilon(_with(config, n_steps=mid), replicates)
        if abs(e_mid - target) < abs(best[1] - target):
            best = (mid, e_mid)
        if abs(e_mid - target) <= tolerance:
            return mid, e_mid, "ok"
        if e_mid > target:
            lo = mid
        else:
            hi = mid
    status = "ok" if abs(best[1] - target) <= tolerance else "max_steps"
    return best[0], best[1], status


def sweep_g(config, g_values, matching="matched_j0cut_area", replicates=None,
            methods=("full_l1", "approx1"), tolerance=0.002, length_bounds=None):
    """Compare methods across coupling strengths.

    ``matching='fixed_T'`` uses the configured data length for every g.
    ``'matched_j0cut_area'`` takes the configured coupling scale and length as
    the reference and, for every other g, bisects the length until the mean
    J0-cut epsilon matches the reference value within ``tolerance``.
    """
    g_values = list(g_values)
    if not g_values:
        raise ParameterError("g_values must be non-empty")
    if matching not in ("fixed_T", "matched_j0cut_area"):
        raise ParameterError(f"unknown matching {matching!r}")
    replicates = config.replicates if replicates is None else replicates
    L_ref = config.n_steps()
    target = None
    if matching == "matched_j0cut_area":
        target = j0cut_epsilon(config, replicates)
        bounds = length_bounds or (max(L_ref // 4, config.network.n_spins), 4 * L_ref)
    rows = []
    for g in g_values:
        L, status, eps_j0 = L_ref, "fixed", None
        if matching == "matched_j0cut_area":
            if math.isclose(g, config.network.coupling_scale):
                L, eps_j0, status = L_ref, target, "reference"
            else:
                L, eps_j0, status = match_length(_with(config, g), target, replicates, bounds, tolerance)
        cfg = _with(config, g, L)
        res = run_replicates(cfg, ["j0cut", *methods], replicates)
        row = [float(g), int(L), L / config.network.n_spins, res.mean_epsilon("j0cut")]
        for m in methods:
            row.extend([res.mean_epsilon(m), res.stderr_epsilon(m)])
        row.append(status)
        rows.append(tuple(row))
        log.info("g=%s L=%d status=%s", g, L, status)
    columns = ("g", "n_steps", "updates_per_spin", "j0cut_epsilon",
               *[f"{m}_{s}" for m in methods for s in ("epsilon", "stderr")], "status")
    return SweepResult(rows, columns, target)


# -- figure tables ------------------------------------------------------------

def _require(bundle, attr, figure):
    value = getattr(bundle, attr)
    if value is None or (isinstance(value, dict) and not value):
        raise MissingStageError(f"figure {figure!r} needs stage '{attr}', which the bundle lacks")
    return value


def export_figure_data(bundle, figure, out_dir):
    """Write the table(s) behind one figure; returns the written paths."""
    if figure not in FIGURES:
        raise ParameterError(f"unknown figure {figure!r}; choose from {FIGURES}")
    out = Path(out_dir)
    hdr = _header(bundle.config, f"figure: {figure}")
    written = []
    if figure == "hist_J0":
        start = _require(bundle, "start", figure)
        truth = _require(bundle, "truth", figure)
        ii, jj = np.nonzero(truth.candidates)
        rows = [(int(i), int(j), float(start.couplings[i, j]),
                 "present" if truth.classes[i, j] else "absent") for i, j in zip(ii, jj)]
        written.append(write_table(out / "fig_hist_J0.tsv", ("i", "j", "J", "truth"), rows, hdr))
    elif figure == "path_trajectories":
        paths = _require(bundle, "paths", figure)
        truth = _require(bundle, "truth", figure)
        for method, path in paths.items():
            J0 = path.trajectories[0] if len(path) else np.zeros_like(truth.classes, dtype=float)
            # bonds with positive starting value; negative ones mirror them
            sel = np.argwhere((J0 > 0) & truth.candidates)
            rows = [(float(lam), int(i), int(j), float(path.trajectories[k, i, j]),
                     "present" if truth.classes[i, j] else "absent")
                    for k, lam in enumerate(path.lambda_grid) for i, j in sel]
            written.append(write_table(out / f"fig_path_{method}.tsv",
                                       ("lambda", "i", "j", "J", "truth"), rows, hdr))
    elif figure == "errors_vs_lambda":
        errors = _require(bundle, "errors", figure)
        for method, rows in errors.items():
            written.append(write_table(out / f"fig_errors_{method}.tsv", ev.ERROR_COLUMNS, rows, hdr))
    elif figure == "roc_overlay":
        rocs = _require(bundle, "rocs", figure)
        rows = [(m, *r) for m, roc in rocs.items() for r in roc.rows()]
        eps = [f"epsilon[{m}]: {roc.epsilon!r}" for m, roc in rocs.items()]
        written.append(write_table(out / "fig_roc_overlay.tsv", ("method", "label", "fpr", "tpr"),
                                   rows, (*hdr, *eps)))
    elif figure == "g_sweep":
        sweep = _require(bundle, "sweep", figure)
        extra = () if sweep.reference_epsilon is None else (f"reference_j0cut_epsilon: {sweep.reference_epsilon!r}",)
        written.append(write_table(out / "fig_g_sweep.tsv", sweep.columns, sweep.rows, (*hdr, *extra)))
    return written
