"""Exact and L1-regularised maximum-likelihood learning from a spin history.

The likelihood factorises over spins: the outcome of every update of spin
``i`` is a logistic observation with log-odds ``2 H_i`` evaluated at the
pre-update configuration.  Each spin's parameters ``(h_i, J_i1, ..., J_iN)``
are therefore fitted independently, and all spins are advanced together on a
zero-padded design tensor.

Parameters are laid out as an ``N x (N+1)`` matrix ``W`` whose column 0 holds
the fields (the ``s_0 = 1`` convention) and column ``1 + j`` holds ``J_ij``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ParameterError


@dataclass(frozen=True, eq=False)
class CouplingEstimate:
    couplings: np.ndarray
    fields: np.ndarray
    active_mask: np.ndarray
    lambda_used: float = 0.0
    iterations: int = 0
    converged: bool = True
    tolerance: float = 0.0
    include_diagonal: bool = False

    @property
    def n_spins(self) -> int:
        return self.fields.shape[0]

    @classmethod
    def zeros(cls, n_spins, include_diagonal=False):
        return cls(
            couplings=np.zeros((n_spins, n_spins)),
            fields=np.zeros(n_spins),
            active_mask=np.zeros((n_spins, n_spins), dtype=bool),
            include_diagonal=include_diagonal,
        )

    @classmethod
    def from_params(cls, couplings, fields, **kw):
        couplings = np.asarray(couplings, dtype=float).copy()
        return cls(couplings=couplings, fields=np.asarray(fields, dtype=float).copy(),
                   active_mask=couplings != 0, **kw)

    def as_weights(self) -> np.ndarray:
        return np.column_stack([self.fields, self.couplings])


def _log2cosh(x):
    a = np.abs(x)
    return a + np.log1p(np.exp(-2.0 * a))


@dataclass(eq=False)
class Design:
    """Per-spin regression data built from a history.

    ``X[i, r]`` is ``(1, s_1, ..., s_N)`` at the ``r``-th update of spin ``i``
    and ``y[i, r]`` the outcome; rows past ``counts[i]`` are zero padding.
    """

    X: np.ndarray
    y: np.ndarray
    row_mask: np.ndarray
    counts: np.ndarray
    coef_mask: np.ndarray
    updates_per_spin: float
    _lipschitz: np.ndarray | None = field(default=None, repr=False)

    @property
    def n_spins(self) -> int:
        return self.X.shape[0]

    def lipschitz(self) -> np.ndarray:
        """Per-spin bound ``||X_i||_2^2`` on the curvature of the likelihood."""
        if self._lipschitz is None:
            Xm = self.X * self.coef_mask[:, None, :]
            self._lipschitz = np.linalg.norm(Xm, ord=2, axis=(1, 2)) ** 2
        return self._lipschitz

    def subset(self, rows):
        """Design restricted to the spins ``rows``."""
        lip = None if self._lipschitz is None else self._lipschitz[rows]
        return Design(self.X[rows], self.y[rows], self.row_mask[rows], self.counts[rows],
                      self.coef_mask[rows], self.updates_per_spin, lip)

    def local_fields(self, W):
        return np.matmul(self.X, W[:, :, None])[..., 0]

    def nll(self, W, H=None):
        """Per-spin negative log-likelihood, shape ``(N,)``."""
        if H is None:
            H = self.local_fields(W)
        return -np.sum(self.row_mask * (self.y * H - _log2cosh(H)), axis=1)

    def grad(self, W, H=None):
        """Gradient of the log-likelihood (ascent direction), shape ``(N, N+1)``."""
        if H is None:
            H = self.local_fields(W)
        resid = self.row_mask * (self.y - np.tanh(H))
        return np.matmul(resid[:, None, :], self.X)[:, 0, :]


def build_design(history, include_diagonal=False) -> Design:
    n = history.n_spins
    counts = history.update_counts()
    n_max = max(int(counts.max()), 1)
    X = np.zeros((n, n_max, n + 1))
    y = np.zeros((n, n_max))
    row_mask = np.zeros((n, n_max))
    order = np.argsort(history.schedule, kind="stable")
    starts = np.concatenate([[0], np.cumsum(counts)])
    for i in range(n):
        rows = order[starts[i]:starts[i + 1]]
        k = rows.shape[0]
        X[i, :k, 0] = 1.0
        X[i, :k, 1:] = history.states[rows]
        y[i, :k] = history.outcomes[rows]
        row_mask[i, :k] = 1.0
    coef_mask = np.ones((n, n + 1), dtype=bool)
    if not include_diagonal:
        coef_mask[np.arange(n), np.arange(n) + 1] = False
    return Design(X, y, row_mask, counts, coef_mask, history.updates_per_spin)


def _check_dims(history, estimate):
    if estimate.n_spins != history.n_spins:
        raise ParameterError(
            f"estimate has N={estimate.n_spins} but history has N={history.n_spins}")


def neg_log_likelihood(history, estimate) -> float:
    """Minus the log-likelihood of all recorded updates under ``estimate``."""
    _check_dims(history, estimate)
    design = build_design(history, include_diagonal=True)
    return float(design.nll(estimate.as_weights()).sum())


def gradient(history, estimate) -> np.ndarray:
    """``dL/dW``: entry ``(i, 0)`` is the field derivative, ``(i, 1+j)`` the coupling one."""
    _check_dims(history, estimate)
    design = build_design(history, include_diagonal=True)
    return design.grad(estimate.as_weights())


def _as_estimate(design, W, penalty, iterations, converged, tolerance, include_diagonal):
    couplings = W[:, 1:].copy()
    return CouplingEstimate(
        couplings=couplings,
        fields=W[:, 0].copy(),
        active_mask=couplings != 0,
        lambda_used=float(penalty),
        iterations=int(iterations),
        converged=bool(converged),
        tolerance=float(tolerance),
        include_diagonal=include_diagonal,
    )


def _initial_rates(design, rate, extra_curvature=0.0):
    if rate is None:
        return 1.0 / np.maximum(design.lipschitz() + extra_curvature, 1e-12)
    if not rate > 0:
        raise ParameterError(f"rate must be positive, got {rate}")
    return np.full(design.n_spins, float(rate))


def _descend(design, W, make_parts, eta, max_iters):
    """Gradient descent shared by all fits.

    ``make_parts(design)`` returns ``(propose, objective, converged)`` for a
    design.  Each spin keeps its own step size; a step that increases that
    spin's objective is rejected and the step halved.  Converged spins are
    dropped from the working set, so badly conditioned spins do not slow
    down the rest.
    """
    W = W.copy()
    eta = eta.copy()
    rows = np.arange(design.n_spins)
    sub = design
    propose, objective, converged = make_parts(sub)
    Ws = W
    H = sub.local_fields(Ws)
    G = sub.grad(Ws, H)
    f = objective(Ws, H)
    done = converged(Ws, G)
    it = 0
    while it < max_iters and not done.all():
        if done.any():
            W[rows] = Ws
            keep = ~done
            rows, Ws, H, G, f, eta = rows[keep], Ws[keep], H[keep], G[keep], f[keep], eta[keep]
            sub = design.subset(rows)
            propose, objective, converged = make_parts(sub)
        it += 1
        W_new = propose(Ws, G, eta)
        H_new = sub.local_fields(W_new)
        f_new = objective(W_new, H_new)
        worse = f_new > f + 1e-12 * np.maximum(1.0, np.abs(f))
        if worse.any():
            eta[worse] *= 0.5
            W_new[worse] = Ws[worse]
            H_new[worse] = H[worse]
            f_new[worse] = f[worse]
        Ws, H, f = W_new, H_new, f_new
        G = sub.grad(Ws, H)
        done = converged(Ws, G)
    W[rows] = Ws
    return W, it, bool(done.all())


def _l1_parts(design, penalty, tolerance):
    T = design.updates_per_spin
    cmask = design.coef_mask[:, 1:]

    def objective(W, H):
        return design.nll(W, H) + penalty * np.abs(W[:, 1:]).sum(axis=1)

    def propose(W, G, eta):
        J, GJ = W[:, 1:], G[:, 1:]
        sgn = np.sign(J)
        step = J + eta[:, None] * (GJ - penalty * sgn)
        crossed = (sgn != 0) & (np.sign(step) != sgn)
        step[crossed] = 0.0
        masked = sgn == 0
        enter = masked & (np.abs(GJ) > penalty)
        reentry = eta[:, None] * (GJ - penalty * np.sign(GJ))
        step[masked] = np.where(enter, reentry, 0.0)[masked]
        step[~cmask] = 0.0
        W_new = np.empty_like(W)
        W_new[:, 0] = W[:, 0] + eta * G[:, 0]
        W_new[:, 1:] = step
        return W_new

    def converged(W, G):
        J, GJ = W[:, 1:], G[:, 1:]
        active = (J != 0) & cmask
        masked = (J == 0) & cmask
        ok_field = np.abs(G[:, 0]) < tolerance * T
        ok_active = np.where(active, np.abs(GJ - penalty * np.sign(J)) < tolerance * T, True)
        ok_masked = np.where(masked, np.abs(GJ) <= penalty + tolerance * T, True)
        return ok_field & ok_active.all(axis=1) & ok_masked.all(axis=1)

    return propose, objective, converged


def fit_unregularized(history, rate=None, tolerance=1e-5, max_iters=20000,
                      include_diagonal=False, design=None):
    """Maximum-likelihood couplings and fields by plain gradient descent.

    Starts from zero and stops when ``max |gradient| / T < tolerance``.  With
    ``rate=None`` each spin uses the step ``1/||X_i||_2^2``, which guarantees
    descent; an explicit rate is shared by all spins and halved on any
    increase.  Non-convergence is reported through ``converged``.
    """
    if design is None:
        design = build_design(history, include_diagonal)
    T = design.updates_per_spin

    def parts(d):
        cmask = d.coef_mask

        def objective(W, H):
            return d.nll(W, H)

        def propose(W, G, eta):
            return W + eta[:, None] * G * cmask

        def converged(W, G):
            return (np.abs(G * cmask) < tolerance * T).all(axis=1)

        return propose, objective, converged

    W0 = np.zeros((design.n_spins, design.n_spins + 1))
    eta = _initial_rates(design, rate)
    W, it, conv = _descend(design, W0, parts, eta, max_iters)
    return _as_estimate(design, W, 0.0, it, conv, tolerance, include_diagonal)


def fit_l1(history, penalty, rate=None, tolerance=1e-5, max_iters=20000, warm_start=None,
           include_diagonal=False, design=None):
    """Minimise ``-L + penalty * sum |J_ij|`` by sign-clipped gradient descent.

    A coupling whose step would change its sign is set to exactly zero.  A
    zero coupling (with ``sgn(0) = 0``) re-enters, shrunk by the penalty, as
    soon as its data gradient exceeds ``penalty`` in magnitude; otherwise it
    stays at zero.  Fields are never penalised.

    Convergence requires, per spin, ``|grad - penalty*sgn(J)| < tolerance*T``
    on active couplings and fields and ``|grad| <= penalty + tolerance*T`` on
    zero couplings.
    """
    if penalty < 0:
        raise ParameterError(f"penalty must be non-negative, got {penalty}")
    if design is None:
        design = build_design(history, include_diagonal)
    if warm_start is not None:
        _check_dims(history, warm_start)
        W0 = warm_start.as_weights().copy()
        W0[:, 1:][~design.coef_mask[:, 1:]] = 0.0
    else:
        W0 = np.zeros((design.n_spins, design.n_spins + 1))
    eta = _initial_rates(design, rate)
    W, it, conv = _descend(design, W0, lambda d: _l1_parts(d, penalty, tolerance), eta, max_iters)
    return _as_estimate(design, W, penalty, it, conv, tolerance, include_diagonal)


def fit_l1_smooth(history, penalty, smoothing, rate=None, tolerance=1e-5, max_iters=200000,
                  include_diagonal=False, design=None):
    """Gradient descent with the smooth penalty ``penalty * mu * sum log cosh(J/mu)``.

    The penalty gradient is ``penalty * tanh(J/mu)``; small ``mu`` approaches
    the L1 cost.  Couplings are never exactly zero, so ``active_mask`` marks
    all candidate bonds; use :func:`round_small` with ``2*mu`` to classify.
    """
    if not smoothing > 0:
        raise ParameterError(f"smoothing must be positive, got {smoothing}")
    if penalty < 0:
        raise ParameterError(f"penalty must be non-negative, got {penalty}")
    if design is None:
        design = build_design(history, include_diagonal)
    T = design.updates_per_spin
    mu = float(smoothing)

    def parts(d):
        cmask = d.coef_mask[:, 1:]

        def objective(W, H):
            return d.nll(W, H) + penalty * mu * _log2cosh(W[:, 1:] / mu).sum(axis=1)

        def penalized(W, G):
            out = G.copy()
            out[:, 1:] = (G[:, 1:] - penalty * np.tanh(W[:, 1:] / mu)) * cmask
            return out

        def propose(W, G, eta):
            return W + eta[:, None] * penalized(W, G)

        def converged(W, G):
            return (np.abs(penalized(W, G)) < tolerance * T).all(axis=1)

        return propose, objective, converged

    W0 = np.zeros((design.n_spins, design.n_spins + 1))
    # the smooth penalty has curvature penalty/mu at zero
    eta = _initial_rates(design, rate, extra_curvature=penalty / mu)
    W, it, conv = _descend(design, W0, parts, eta, max_iters)
    return _as_estimate(design, W, penalty, it, conv, tolerance, include_diagonal)


def round_small(estimate, threshold):
    """Zero every coupling with ``|J| <= threshold`` and refresh the mask."""
    J = np.where(np.abs(estimate.couplings) <= threshold, 0.0, estimate.couplings)
    return CouplingEstimate(
        couplings=J, fields=estimate.fields.copy(), active_mask=J != 0,
        lambda_used=estimate.lambda_used, iterations=estimate.iterations,
        converged=estimate.converged, tolerance=estimate.tolerance,
        include_diagonal=estimate.include_diagonal,
    )


def refit_fields(design, couplings, fields=None, n_newton=30):
    """One-dimensional ML fields for fixed couplings, by Newton's method."""
    n = design.n_spins
    h = np.zeros(n) if fields is None else np.asarray(fields, dtype=float).copy()
    offset = np.matmul(design.X[:, :, 1:], couplings[:, :, None])[..., 0]
    counts = np.maximum(design.counts, 1)
    for _ in range(n_newton):
        th = np.tanh(h[:, None] + offset)
        g = np.sum(design.row_mask * (design.y - th), axis=1)
        curv = np.sum(design.row_mask * (1.0 - th * th), axis=1)
        step = g / np.maximum(curv, 1e-12)
        h = h + np.clip(step, -2.0, 2.0)
        if np.max(np.abs(g)) < 1e-12 * counts.max():
            break
    return h


def save_estimate(estimate, path):
    """Coupling matrix, a ``.mask`` matrix and a JSON sidecar."""
    path = Path(path)
    np.savetxt(path, estimate.couplings, fmt="%.17g")
    np.savetxt(path.with_suffix(path.suffix + ".mask"), estimate.active_mask.astype(int), fmt="%d")
    meta = {
        "n_spins": estimate.n_spins,
        "lambda": estimate.lambda_used,
        "iterations": estimate.iterations,
        "converged": estimate.converged,
        "tolerance": estimate.tolerance,
        "include_diagonal": estimate.include_diagonal,
        "fields": estimate.fields.tolist(),
    }
    path.with_suffix(path.suffix + ".json").write_text(json.dumps(meta, indent=2) + "\n")
    return path


def load_estimate(path) -> CouplingEstimate:
    path = Path(path)
    meta = json.loads(path.with_suffix(path.suffix + ".json").read_text())
    couplings = np.loadtxt(path, ndmin=2)
    mask = np.loadtxt(path.with_suffix(path.suffix + ".mask"), dtype=int, ndmin=2).astype(bool)
    return CouplingEstimate(
        couplings=couplings,
        fields=np.asarray(meta["fields"], dtype=float),
        active_mask=mask,
        lambda_used=float(meta["lambda"]),
        iterations=int(meta["iterations"]),
        converged=bool(meta["converged"]),
        tolerance=float(meta["tolerance"]),
        include_diagonal=bool(meta["include_diagonal"]),
    )
