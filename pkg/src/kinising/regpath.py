"""Fisher matrices and approximate regularisation paths.

Path coordinate
---------------
Every path here is indexed by ``lambda``, the coefficient of ``sum |J_ij|``
added to the *summed* negative log-likelihood.  The per-update penalty that
enters the quadratic expansion is ``lambda / T``, so the path equation reads

    dJ_ij/dlambda = -(1/T) sum_k [C^(i)]^-1_jk sgn(J_ik)

with ``C^(i)`` normalised per update.  :func:`first_order_shift` takes the
per-update penalty directly.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg

from .errors import EmptyAverageError, NumericalError, ParameterError
from .glauber import simulate
from .inference import CouplingEstimate, build_design, fit_l1, refit_fields
from .netgen import ModelParams

METHODS = ("full_l1", "approx1", "approx2", "approx3", "j0cut")


def sources(n, i, include_diagonal=False):
    """Indices of the spins whose couplings onto ``i`` are free parameters."""
    if include_diagonal:
        return np.arange(n)
    return np.delete(np.arange(n), i)


@dataclass(frozen=True, eq=False)
class FisherSet:
    per_spin: list
    spin_means: np.ndarray
    evaluated_at: CouplingEstimate
    updates_per_spin: float
    include_diagonal: bool = False

    @property
    def n_spins(self) -> int:
        return len(self.per_spin)


@dataclass(eq=False)
class RegPath:
    """Coupling trajectories over a grid of ``lambda`` (or J0-cut thresholds).

    ``trajectories[k]`` is the ``N x N`` coupling matrix at ``lambda_grid[k]``.
    ``prune_events`` holds ``(i, j, lambda)`` for every bond that reached zero.
    """

    lambda_grid: np.ndarray
    trajectories: np.ndarray
    prune_events: list
    method_tag: str
    fields: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.method_tag not in METHODS:
            raise ParameterError(f"unknown method tag {self.method_tag!r}")

    def __len__(self):
        return len(self.lambda_grid)

    def active(self, k):
        return self.trajectories[k] != 0

    def prune_lambdas(self):
        """``N x N`` matrix of first pruning ``lambda`` (``inf`` if never pruned)."""
        n = self.trajectories.shape[1]
        out = np.full((n, n), np.inf)
        for i, j, lam in self.prune_events:
            if not np.isfinite(out[i, j]):
                out[i, j] = lam
        return out


# -- Fisher matrices ----------------------------------------------------------

def _state_matrix(history):
    return history.states.astype(np.float64)


def fisher_matrix(history, estimate, i, averaging="all_times", centering="mean",
                  include_diagonal=False, return_stderr=False):
    """Fisher information matrix of spin ``i`` over its source spins.

    ``averaging='update_times'`` sums ``(1 - tanh^2 H_i) ds_j ds_k`` over the
    updates of spin ``i`` and divides by ``T``; ``'all_times'`` averages the
    same quantity over every recorded step.  ``centering='mean'`` uses
    ``ds_j = s_j - <s_j>`` with the mean taken over the same set of times,
    ``'raw'`` uses the spins themselves.  ``'weighted'`` centres on the mean
    weighted by ``1 - tanh^2 H_i``; with update times this is exactly the
    coupling block of the likelihood Hessian after eliminating the field.

    With ``return_stderr`` the entrywise standard error of the estimate is
    returned as well.  For update times it treats the estimator as
    ``(1/T) sum_t 1[spin i updated at t] f_t`` so that the fluctuation in the
    number of updates is included.
    """
    n = history.n_spins
    if not 0 <= i < n:
        raise ParameterError(f"spin index {i} out of range for N={n}")
    if estimate.n_spins != n:
        raise ParameterError("estimate and history dimensions differ")
    if averaging not in ("update_times", "all_times"):
        raise ParameterError(f"unknown averaging {averaging!r}")
    src = sources(n, i, include_diagonal)
    S = _state_matrix(history)
    if averaging == "update_times":
        rows = np.flatnonzero(history.schedule == i)
        if rows.size == 0:
            raise EmptyAverageError(f"spin {i} is never updated")
        S = S[rows]
    H = estimate.fields[i] + S @ estimate.couplings[i]
    w = 1.0 - np.tanh(H) ** 2
    X = S[:, src]
    if centering == "mean":
        X = X - X.mean(axis=0)
    elif centering == "weighted":
        X = X - (w @ X) / max(w.sum(), 1e-300)
    elif centering != "raw":
        raise ParameterError(f"unknown centering {centering!r}")
    T = history.updates_per_spin
    norm = T if averaging == "update_times" else X.shape[0]
    C = (X * w[:, None]).T @ X / norm
    C = 0.5 * (C + C.T)
    if not return_stderr:
        return C
    terms = w[:, None, None] * X[:, :, None] * X[:, None, :]
    if averaging == "update_times":
        L = history.n_steps
        # sum over all L steps of 1[update] f_t; non-update steps contribute zero
        second = np.einsum("tjk,tjk->jk", terms, terms) / L
        first = terms.sum(axis=0) / L
        se = (L / T) * np.sqrt(np.maximum(second - first ** 2, 0.0) / L)
    else:
        se = terms.std(axis=0) / np.sqrt(terms.shape[0])
    return C, se


def fisher_set(history, estimate, averaging="all_times", centering="mean", include_diagonal=False):
    """Fisher matrices of every spin at ``estimate``."""
    n = history.n_spins
    S = _state_matrix(history)
    means = S.mean(axis=0)
    if averaging == "all_times" and centering in ("mean", "raw"):
        # one pass over the data for all spins
        Hs = S @ estimate.couplings.T + estimate.fields
        W = 1.0 - np.tanh(Hs) ** 2
        X = S - means if centering == "mean" else S
        per_spin = []
        for i in range(n):
            src = sources(n, i, include_diagonal)
            Xi = X[:, src]
            C = (Xi * W[:, i:i + 1]).T @ Xi / S.shape[0]
            per_spin.append(0.5 * (C + C.T))
    else:
        per_spin = [fisher_matrix(history, estimate, i, averaging, centering, include_diagonal)
                    for i in range(n)]
    return FisherSet(per_spin, means, estimate, history.updates_per_spin, include_diagonal)


class _AllTimesFisher:
    """All-times Fisher matrices of every spin from one matrix product.

    The pairwise products ``ds_j ds_k`` do not depend on the couplings, so
    they are formed once and re-weighted at each new estimate.
    """

    def __init__(self, history, centering="mean", include_diagonal=False):
        self.S = _state_matrix(history)
        self.means = self.S.mean(axis=0)
        X = self.S - self.means if centering == "mean" else self.S
        L, n = X.shape
        self.pairs = (X[:, :, None] * X[:, None, :]).reshape(L, n * n)
        self.history = history
        self.include_diagonal = include_diagonal

    def __call__(self, estimate):
        n = self.S.shape[1]
        W = 1.0 - np.tanh(self.S @ estimate.couplings.T + estimate.fields) ** 2
        full = (W.T @ self.pairs / self.S.shape[0]).reshape(n, n, n)
        per_spin = []
        for i in range(n):
            src = sources(n, i, self.include_diagonal)
            C = full[i][np.ix_(src, src)]
            per_spin.append(0.5 * (C + C.T))
        return FisherSet(per_spin, self.means, estimate, self.history.updates_per_spin,
                         self.include_diagonal)


def _spd_solve(C, rhs, spin):
    """Solve ``C x = rhs`` for symmetric PSD ``C``, adding jitter if needed."""
    dim = C.shape[0]
    if dim == 0:
        return np.zeros_like(rhs)
    scale = max(np.trace(C) / dim, 1e-300)
    for jitter in (0.0, 1e-8, 1e-6, 1e-4):
        try:
            factor = scipy.linalg.cho_factor(C + jitter * scale * np.eye(dim), lower=True,
                                             check_finite=True)
            return scipy.linalg.cho_solve(factor, rhs)
        except (np.linalg.LinAlgError, ValueError):
            continue
    raise NumericalError(f"Fisher matrix of spin {spin} is singular beyond repair", spin=spin)


def _spd_inverse(C, spin):
    return _spd_solve(C, np.eye(C.shape[0]), spin)


def _sources_list(fisher):
    return [sources(fisher.n_spins, i, fisher.include_diagonal) for i in range(fisher.n_spins)]


def first_order_shift(fisher, reference, lam):
    """Shifts ``v_i = -lam * C^(i)^-1 sgn(J0_i)`` for a per-update penalty ``lam``.

    Returns an ``N x n_src`` matrix whose row ``i`` is ordered like
    :func:`sources`.
    """
    if lam < 0:
        raise ParameterError(f"lambda must be non-negative, got {lam}")
    rows = []
    for i, src in enumerate(_sources_list(fisher)):
        sg = np.sign(reference.couplings[i, src])
        rows.append(-lam * _spd_solve(fisher.per_spin[i], sg, i))
    return np.array(rows)


# -- paths --------------------------------------------------------------------

def _check_grid(grid):
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise ParameterError("lambda grid must be a non-empty 1-d sequence")
    if np.any(np.diff(grid) <= 0):
        raise ParameterError("lambda grid must be strictly increasing")
    return grid


def _clamp_crossings(J_old, J_new, lam0, dlam, events):
    """Zero bonds that crossed (or reached) zero during a step and log them."""
    sg = np.sign(J_old)
    crossed = (sg != 0) & (np.sign(J_new) != sg)
    for i, j in zip(*np.nonzero(crossed)):
        rate = abs(J_new[i, j] - J_old[i, j])
        frac = abs(J_old[i, j]) / rate if rate > 0 else 1.0
        events.append((int(i), int(j), float(lam0 + min(frac, 1.0) * dlam)))
    J_new[crossed] = 0.0
    return J_new


def _velocity(fisher, J, inverse_mode, restrict_active):
    n = J.shape[0]
    T = fisher.updates_per_spin
    V = np.zeros_like(J)
    for i, src in enumerate(_sources_list(fisher)):
        sg = np.sign(J[i, src])
        C = fisher.per_spin[i]
        if restrict_active:
            act = np.flatnonzero(sg)
            if act.size == 0:
                continue
            Cinv = np.zeros_like(C)
            Cinv[np.ix_(act, act)] = _spd_inverse(C[np.ix_(act, act)], i)
        else:
            Cinv = _spd_inverse(C, i)
        if inverse_mode == "full":
            v = -(Cinv @ sg)
        elif inverse_mode == "diagonal":
            v = -np.diag(Cinv) * sg
        else:
            raise ParameterError(f"unknown inverse_mode {inverse_mode!r}")
        v[sg == 0] = 0.0
        V[i, src] = v / T
    return V


def integrate_path(history, start, lambda_grid, inverse_mode="full",
                   fisher_refresh="reestimate_on_data", averaging="all_times",
                   centering="mean", restrict_active=False, resimulate_seed=0,
                   burn_in_steps=None, include_diagonal=False):
    """Forward-Euler integration of the quadratic-expansion path equation.

    Starts from the unregularised optimum ``start`` at ``lambda_grid[0] == 0``.
    At every grid point the Fisher matrices are re-estimated at the current
    couplings (fields re-fitted by one-dimensional ML) either on the original
    data or on a fresh simulation of the current estimate.  Pruned bonds have
    zero velocity.  ``inverse_mode='diagonal'`` keeps only the diagonal of the
    inverse Fisher matrix.  ``restrict_active`` inverts the Fisher block of
    the surviving bonds instead of taking the full inverse.
    """
    grid = _check_grid(lambda_grid)
    if grid[0] != 0:
        raise ParameterError("lambda grid must start at 0")
    if fisher_refresh not in ("reestimate_on_data", "resimulate"):
        raise ParameterError(f"unknown fisher_refresh {fisher_refresh!r}")
    design = build_design(history, include_diagonal)
    J = start.couplings.copy()
    h = start.fields.copy()
    traj = np.empty((grid.size,) + J.shape)
    fields = np.empty((grid.size, J.shape[0]))
    traj[0], fields[0] = J, h
    events = []
    rng = np.random.default_rng(resimulate_seed)
    cached = None
    if fisher_refresh == "reestimate_on_data" and averaging == "all_times" \
            and centering in ("mean", "raw"):
        cached = _AllTimesFisher(history, centering, include_diagonal)
    for k in range(1, grid.size):
        est = CouplingEstimate.from_params(J, h, include_diagonal=include_diagonal)
        if cached is not None:
            fisher = cached(est)
        else:
            data = history
            if fisher_refresh == "resimulate":
                model = ModelParams(history.n_spins, 0.0, 1.0, J, h, 0)
                data = simulate(model, n_steps=history.n_steps, burn_in_steps=burn_in_steps,
                                seed=int(rng.integers(2**63 - 1)))
            fisher = fisher_set(data, est, averaging, centering, include_diagonal)
        dlam = grid[k] - grid[k - 1]
        J_new = J + dlam * _velocity(fisher, J, inverse_mode, restrict_active)
        J = _clamp_crossings(J, J_new, grid[k - 1], dlam, events)
        h = refit_fields(design, J, h)
        traj[k], fields[k] = J, h
    tag = "approx1" if inverse_mode == "full" else "approx2"
    meta = {"inverse_mode": inverse_mode, "fisher_refresh": fisher_refresh,
            "averaging": averaging, "centering": centering, "restrict_active": restrict_active}
    return RegPath(grid, traj, events, tag, fields, meta)


def linear_extrapolation(start, fisher, lambda_grid):
    """Straight-line continuation of the diagonal-inverse slopes at ``lambda = 0``.

    Each bond moves along ``J0_ij - lambda * [C^(i)^-1]_jj sgn(J0_ij) / T``
    and stays at zero once it gets there, at
    ``lambda = T |J0_ij| / [C^(i)^-1]_jj``.
    """
    grid = _check_grid(lambda_grid)
    n = start.n_spins
    T = fisher.updates_per_spin
    J0 = start.couplings
    slope = np.zeros_like(J0)
    for i, src in enumerate(_sources_list(fisher)):
        slope[i, src] = np.diag(_spd_inverse(fisher.per_spin[i], i)) / T
    with np.errstate(divide="ignore", invalid="ignore"):
        prune_at = np.where(J0 != 0, np.abs(J0) / slope, 0.0)
    prune_at[~np.isfinite(prune_at)] = np.inf
    mag = np.maximum(np.abs(J0)[None] - grid[:, None, None] * slope[None], 0.0)
    traj = np.sign(J0)[None] * mag
    # a bond reaching zero exactly on a grid point stays there
    traj[grid[:, None, None] >= prune_at[None]] = 0.0
    events = [(int(i), int(j), float(prune_at[i, j]))
              for i, j in zip(*np.nonzero((J0 != 0) & (prune_at <= grid[-1])))]
    events.sort(key=lambda e: e[2])
    fields = np.tile(start.fields, (grid.size, 1))
    return RegPath(grid, traj, events, "approx3", fields, {"n_spins": n})


def j0_cut(start, threshold_grid):
    """Keep bonds with ``|J0| > threshold``; values are left untouched."""
    grid = np.asarray(threshold_grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise ParameterError("threshold grid must be a non-empty 1-d sequence")
    if np.any(grid < 0) or np.any(np.diff(grid) < 0):
        raise ParameterError("thresholds must be non-negative and increasing")
    J0 = start.couplings
    keep = np.abs(J0)[None] > grid[:, None, None]
    traj = np.where(keep, J0[None], 0.0)
    events = [(int(i), int(j), float(abs(J0[i, j])))
              for i, j in zip(*np.nonzero((J0 != 0) & (np.abs(J0) <= grid[-1])))]
    events.sort(key=lambda e: e[2])
    return RegPath(grid, traj, events, "j0cut", np.tile(start.fields, (grid.size, 1)))


def default_threshold_grid(start, n_points=200):
    return np.linspace(0.0, float(np.max(np.abs(start.couplings), initial=0.0)), n_points)


def full_l1_path(history, lambda_grid, start=None, rate=None, tolerance=1e-5, max_iters=20000,
                 include_diagonal=False):
    """Exact L1 fits along the grid, each warm-started from the previous one."""
    grid = _check_grid(lambda_grid)
    design = build_design(history, include_diagonal)
    est = start
    n = history.n_spins
    traj = np.empty((grid.size, n, n))
    fields = np.empty((grid.size, n))
    events = []
    iters, all_conv = [], True
    for k, lam in enumerate(grid):
        est = fit_l1(history, lam, rate=rate, tolerance=tolerance, max_iters=max_iters,
                     warm_start=est, include_diagonal=include_diagonal, design=design)
        traj[k], fields[k] = est.couplings, est.fields
        iters.append(est.iterations)
        all_conv &= est.converged
        if k > 0:
            pruned = (traj[k - 1] != 0) & (traj[k] == 0)
            events.extend((int(i), int(j), float(lam)) for i, j in zip(*np.nonzero(pruned)))
    meta = {"iterations": iters, "converged": all_conv, "tolerance": tolerance}
    return RegPath(grid, traj, events, "full_l1", fields, meta)


def run_method(method, history, start, lambda_grid, threshold_grid=None, **kw):
    """Dispatch one of :data:`METHODS` from the unregularised fit ``start``."""
    if method == "full_l1":
        return full_l1_path(history, lambda_grid, start=start,
                            include_diagonal=start.include_diagonal, **kw)
    if method == "approx1":
        return integrate_path(history, start, lambda_grid, inverse_mode="full",
                              include_diagonal=start.include_diagonal, **kw)
    if method == "approx2":
        return integrate_path(history, start, lambda_grid, inverse_mode="diagonal",
                              include_diagonal=start.include_diagonal, **kw)
    if method == "approx3":
        fisher = fisher_set(history, start, include_diagonal=start.include_diagonal, **kw)
        return linear_extrapolation(start, fisher, lambda_grid)
    if method == "j0cut":
        grid = default_threshold_grid(start) if threshold_grid is None else threshold_grid
        return j0_cut(start, grid)
    raise ParameterError(f"unknown method {method!r}")


# -- serialisation ------------------------------------------------------------

def path_rows(path):
    n = path.trajectories.shape[1]
    ii, jj = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    for k, lam in enumerate(path.lambda_grid):
        Jk = path.trajectories[k]
        for i, j in zip(ii.ravel(), jj.ravel()):
            yield (float(lam), int(i), int(j), float(Jk[i, j]), int(Jk[i, j] != 0))


def save_path(path, filename, header_extra=()):
    """Write ``lambda i j J active`` rows and a ``.prune`` table of events."""
    from .tables import write_table

    filename = Path(filename)
    write_table(filename, ("lambda", "i", "j", "J", "active"), path_rows(path),
                [f"method: {path.method_tag}", *header_extra])
    write_table(filename.with_suffix(filename.suffix + ".prune"), ("i", "j", "lambda_prune"),
                path.prune_events, [f"method: {path.method_tag}", *header_extra])
    return filename


def load_path(filename, n_spins=None):
    from .tables import read_table

    filename = Path(filename)
    meta, cols, rows = read_table(filename)
    method = meta.get("method", "full_l1")
    data = np.array(rows, dtype=float).reshape(-1, 5) if rows else np.zeros((0, 5))
    grid = np.unique(data[:, 0])
    n = n_spins if n_spins is not None else int(data[:, 1].max()) + 1 if len(data) else 0
    traj = np.zeros((grid.size, n, n))
    k = np.searchsorted(grid, data[:, 0])
    traj[k, data[:, 1].astype(int), data[:, 2].astype(int)] = data[:, 3]
    _, _, prows = read_table(filename.with_suffix(filename.suffix + ".prune"))
    events = [(int(float(i)), int(float(j)), float(lam)) for i, j, lam in prows]
    return RegPath(grid, traj, events, method)
