"""Asynchronous Glauber dynamics with a recorded update schedule.

Time is discretised so that exactly one spin, chosen uniformly at random, is
updated per step.  The new value is +1 with probability ``(1 + tanh H_i)/2``
where ``H_i = h_i + sum_j J_ij s_j`` is the local field; an update need not be
a flip.  Time units are such that the base rate is one update per spin per
unit time, so ``T = L/N`` is the number of updates per spin.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numba
import numpy as np

from .errors import ParameterError


@dataclass(frozen=True, eq=False)
class SpinHistory:
    """Recorded trajectory.

    ``states[t]`` is the configuration *before* the update at step ``t``,
    ``schedule[t]`` the spin chosen at that step and ``outcomes[t]`` its new
    value.
    """

    states: np.ndarray
    schedule: np.ndarray
    outcomes: np.ndarray
    seed: int = 0

    @property
    def n_spins(self) -> int:
        return self.states.shape[1]

    @property
    def n_steps(self) -> int:
        return self.states.shape[0]

    @property
    def updates_per_spin(self) -> float:
        return self.n_steps / self.n_spins

    @property
    def final_state(self) -> np.ndarray:
        s = self.states[-1].copy()
        s[self.schedule[-1]] = self.outcomes[-1]
        return s

    def update_counts(self) -> np.ndarray:
        return np.bincount(self.schedule, minlength=self.n_spins)


def local_field(params, state, i):
    """``h_i + sum_j J_ij s_j`` for spin ``i``.

    ``params`` is anything with ``couplings`` and ``fields`` attributes
    (ground truth or an estimate).  Self-couplings are zero unless an
    estimate was fitted with the diagonal included.
    """
    n = params.fields.shape[0]
    if not 0 <= i < n:
        raise ParameterError(f"spin index {i} out of range for N={n}")
    state = np.asarray(state)
    if state.shape != (n,):
        raise ParameterError(f"state has shape {state.shape}, expected ({n},)")
    return float(params.fields[i] + params.couplings[i] @ state)


@numba.njit(cache=True)
def _run_chain(couplings, fields, state, schedule, uniforms, n_burn, states_out, outcomes_out):
    field = fields + couplings @ state
    for t in range(schedule.shape[0]):
        i = schedule[t]
        if t >= n_burn:
            states_out[t - n_burn] = state
        new = 1.0 if uniforms[t] < 0.5 * (1.0 + np.tanh(field[i])) else -1.0
        if t >= n_burn:
            outcomes_out[t - n_burn] = new
        if new != state[i]:
            field += (new - state[i]) * couplings[:, i]
            state[i] = new


def simulate(params, updates_per_spin=None, burn_in_steps=None, seed=0, n_steps=None):
    """Run the chain and record ``L = round(N*T)`` steps after burn-in.

    Either ``updates_per_spin`` (T) or ``n_steps`` (L) must be given; ``n_steps``
    wins when both are.  ``burn_in_steps`` defaults to ``100*N``.
    """
    n = params.fields.shape[0]
    if n_steps is None:
        if updates_per_spin is None or not updates_per_spin > 0:
            raise ParameterError(f"updates_per_spin must be positive, got {updates_per_spin}")
        n_steps = int(round(n * updates_per_spin))
    n_steps = int(n_steps)
    if n_steps < 1:
        raise ParameterError(f"need at least one recorded step, got {n_steps}")
    if burn_in_steps is None:
        burn_in_steps = 100 * n
    if burn_in_steps < 0:
        raise ParameterError("burn_in_steps must be non-negative")

    rng = np.random.default_rng(seed)
    total = burn_in_steps + n_steps
    state = rng.choice(np.array([-1.0, 1.0]), size=n)
    schedule = rng.integers(0, n, size=total)
    uniforms = rng.random(total)

    states = np.empty((n_steps, n))
    outcomes = np.empty(n_steps)
    _run_chain(
        np.ascontiguousarray(params.couplings, dtype=np.float64),
        np.asarray(params.fields, dtype=np.float64),
        state, schedule, uniforms, burn_in_steps, states, outcomes,
    )
    return SpinHistory(
        states=states.astype(np.int8),
        schedule=schedule[burn_in_steps:].astype(np.int64),
        outcomes=outcomes.astype(np.int8),
        seed=int(seed),
    )


def replay(initial_state, schedule, outcomes):
    """Rebuild the states matrix from the initial state, schedule and outcomes."""
    s = np.array(initial_state, dtype=np.int8)
    states = np.empty((len(schedule), s.shape[0]), dtype=np.int8)
    for t, (i, v) in enumerate(zip(schedule, outcomes)):
        states[t] = s
        s[i] = v
    return states


def save_history(history: SpinHistory, path, compact=False):
    """Write a history file.

    The first line is a ``#`` header with N, L, T and the seed.  Full mode
    writes one record ``step spin outcome s_1 ... s_N`` per step; compact mode
    writes the initial state in the header and only ``step spin outcome``.
    """
    path = Path(path)
    n, L = history.n_spins, history.n_steps
    mode = "compact" if compact else "full"
    header = [f"kinising-history N={n} L={L} T={history.updates_per_spin!r} seed={history.seed} mode={mode}"]
    cols = [np.arange(L), history.schedule, history.outcomes.astype(np.int64)]
    if compact:
        header.append("initial " + " ".join(str(int(v)) for v in history.states[0]))
        header.append("step spin outcome")
    else:
        cols.extend(history.states.T.astype(np.int64))
        header.append("step spin outcome " + " ".join(f"s{j}" for j in range(n)))
    table = np.column_stack(cols)
    np.savetxt(path, table, fmt="%d", header="\n".join(header), comments="# ")
    return path


def load_history(path) -> SpinHistory:
    path = Path(path)
    meta, initial = {}, None
    with open(path) as fh:
        for line in fh:
            if not line.startswith("#"):
                break
            body = line[1:].strip()
            if body.startswith("kinising-history"):
                meta = dict(tok.split("=", 1) for tok in body.split()[1:])
            elif body.startswith("initial"):
                initial = np.array(body.split()[1:], dtype=np.int8)
    if not meta:
        raise ParameterError(f"{path} is not a history file")
    n, L = int(meta["N"]), int(meta["L"])
    table = np.loadtxt(path, dtype=np.int64, ndmin=2)
    if table.shape[0] != L:
        raise ParameterError(f"expected {L} records, found {table.shape[0]}")
    schedule = table[:, 1]
    outcomes = table[:, 2].astype(np.int8)
    if meta["mode"] == "compact":
        states = replay(initial, schedule, outcomes)
    else:
        states = table[:, 3:3 + n].astype(np.int8)
    return SpinHistory(states=states, schedule=schedule, outcomes=outcomes, seed=int(meta["seed"]))
