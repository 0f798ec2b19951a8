import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kinising.errors import ParameterError
from kinising.glauber import load_history, local_field, replay, save_history, simulate
from kinising.netgen import ModelParams, generate_network

from conftest import random_params


def _params(J, h):
    J = np.asarray(J, dtype=float)
    return ModelParams(J.shape[0], 1.0, 1.0, J, np.asarray(h, dtype=float), 0)


def test_local_field_constant_field():
    p = _params(np.zeros((3, 3)), [0.3, 0.3, 0.3])
    for state in ([1, 1, 1], [-1, 1, -1]):
        assert local_field(p, np.array(state), 0) == pytest.approx(0.3)


def test_local_field_single_bond():
    J = np.zeros((2, 2))
    J[0, 1] = 0.5
    p = _params(J, [0.0, 0.0])
    assert local_field(p, np.array([1, -1]), 0) == -0.5


def test_local_field_matches_loop():
    rng = np.random.default_rng(0)
    p = random_params(7, rng)
    s = rng.choice([-1, 1], 7)
    for i in range(7):
        ref = p.fields[i] + sum(p.couplings[i, j] * s[j] for j in range(7) if j != i)
        assert local_field(p, s, i) == pytest.approx(ref, rel=1e-15, abs=1e-15)


def test_local_field_bad_index():
    p = _params(np.zeros((3, 3)), np.zeros(3))
    with pytest.raises(ParameterError):
        local_field(p, np.ones(3), 3)


def test_free_spins_are_fair_coins():
    p = _params(np.zeros((40, 40)), np.zeros(40))
    h = simulate(p, 500, seed=1)
    for i in range(40):
        out = h.outcomes[h.schedule == i]
        assert abs(out.mean()) < 4 / math.sqrt(out.size)


def test_field_sets_outcome_mean():
    p = _params(np.zeros((3, 3)), [0.8, 0.0, 0.0])
    h = simulate(p, 4000, seed=2)
    out = h.outcomes[h.schedule == 0].astype(float)
    m = math.tanh(0.8)
    assert abs(m - 0.6640) < 1e-4
    assert abs(out.mean() - m) < 4 * math.sqrt((1 - m * m) / out.size)


def test_non_round_length():
    p = generate_network(40, 5.0, 1 / math.sqrt(2), seed=0)
    h = simulate(p, 200, seed=0)
    assert h.n_steps == 8000 and h.schedule.shape == (8000,)
    assert h.updates_per_spin == 200


def test_arbitrary_length():
    p = generate_network(40, 5.0, 1.0, seed=0)
    h = simulate(p, n_steps=8862, seed=0)
    assert h.n_steps == 8862
    assert h.updates_per_spin == pytest.approx(221.55)


def test_schedule_uniformity():
    p = generate_network(20, 3.0, 1.0, seed=1)
    h = simulate(p, 2000, seed=3)
    L, n = h.n_steps, h.n_spins
    sd = math.sqrt(L * (1 / n) * (1 - 1 / n))
    assert np.all(np.abs(h.update_counts() - L / n) < 4 * sd)


def test_non_flip_updates_occur():
    p = generate_network(10, 3.0, 1.0, seed=1)
    h = simulate(p, 10, seed=3)
    prior = h.states[np.arange(h.n_steps), h.schedule]
    assert np.sum(prior == h.outcomes) > 0


def test_burn_in_changes_start_only():
    p = generate_network(10, 3.0, 1.0, seed=1)
    a = simulate(p, 5, burn_in_steps=0, seed=3)
    b = simulate(p, 5, burn_in_steps=0, seed=3)
    assert np.array_equal(a.states, b.states)
    c = simulate(p, 5, burn_in_steps=50, seed=3)
    assert not np.array_equal(a.schedule, c.schedule)


@pytest.mark.parametrize("bad", [dict(updates_per_spin=0), dict(updates_per_spin=-1.0),
                                 dict(updates_per_spin=1, burn_in_steps=-1)])
def test_invalid_simulation(bad):
    p = generate_network(5, 1.0, 1.0, seed=0)
    with pytest.raises(ParameterError):
        simulate(p, **bad)


@pytest.mark.parametrize("compact", [False, True])
def test_history_round_trip(tmp_path, compact):
    p = generate_network(8, 2.0, 1.0, seed=0)
    h = simulate(p, 30, seed=5)
    path = save_history(h, tmp_path / "h.txt", compact=compact)
    g = load_history(path)
    assert np.array_equal(h.states, g.states)
    assert np.array_equal(h.schedule, g.schedule)
    assert np.array_equal(h.outcomes, g.outcomes)
    assert g.seed == 5


def test_load_rejects_foreign_file(tmp_path):
    f = tmp_path / "x.txt"
    f.write_text("1 2 3\n")
    with pytest.raises(ParameterError):
        load_history(f)


@settings(max_examples=40, deadline=None)
@given(n=st.integers(1, 12), L=st.integers(2, 300), seed=st.integers(0, 2**31), scale=st.floats(0.0, 2.0))
def test_history_invariants(n, L, seed, scale):
    rng = np.random.default_rng(seed)
    p = random_params(n, rng, scale=scale)
    h = simulate(p, n_steps=L, burn_in_steps=int(rng.integers(0, 50)), seed=seed)
    assert set(np.unique(h.states)) <= {-1, 1}
    assert set(np.unique(h.outcomes)) <= {-1, 1}
    # rows differ only at the scheduled spin and carry its outcome forward
    diff = h.states[1:] != h.states[:-1]
    assert np.all(diff.sum(axis=1) <= 1)
    changed = np.flatnonzero(diff.any(axis=1))
    assert np.all(np.argmax(diff[changed], axis=1) == h.schedule[changed])
    assert np.array_equal(h.states[np.arange(1, L), h.schedule[:-1]], h.outcomes[:-1])
    assert np.array_equal(replay(h.states[0], h.schedule, h.outcomes), h.states)
    again = simulate(p, n_steps=L, burn_in_steps=0, seed=seed)
    assert np.array_equal(again.states, simulate(p, n_steps=L, burn_in_steps=0, seed=seed).states)
