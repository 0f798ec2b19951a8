import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kinising.errors import ParameterError
from kinising.evaluate import (BondTruth, classify, confusion, error_table, midgap_threshold,
                               optimal_lambda, rates, roc_auc, roc_from_path)
from kinising.netgen import generate_network
from kinising.regpath import RegPath


def truth_for(n=40, c=5.0, seed=0, include_diagonal=False):
    return BondTruth.from_params(generate_network(n, c, 1.0, seed=seed), include_diagonal)


def pruning_path(truth, order, values, tag="approx3"):
    """Path that removes the candidate bonds one at a time in ``order``."""
    ii, jj = np.nonzero(truth.candidates)
    J = np.zeros(truth.classes.shape)
    J[ii, jj] = values
    traj = [J.copy()]
    for k in order:
        J[ii[k], jj[k]] = 0.0
        traj.append(J.copy())
    grid = np.arange(len(traj), dtype=float)
    return RegPath(grid, np.array(traj), [], tag)


def brute_confusion(truth, classes):
    c = dict(fn_minus=0, fn_plus=0, fp_zero=0, sign_swaps=0, tp=0, tn=0)
    n = truth.classes.shape[0]
    for i in range(n):
        for j in range(n):
            if not truth.candidates[i, j]:
                continue
            t, e = truth.classes[i, j], classes[i, j]
            if t == 0:
                c["fp_zero" if e != 0 else "tn"] += 1
            elif e == 0:
                c["fn_minus" if t < 0 else "fn_plus"] += 1
            elif e != t:
                c["sign_swaps"] += 1
            else:
                c["tp"] += 1
    return c


def test_truth_counts():
    p = generate_network(40, 5.0, 1.0, seed=1)
    t = BondTruth.from_params(p)
    assert t.n_present == p.n_bonds
    assert t.n_present + t.n_absent == 40 * 39
    t2 = BondTruth.from_params(p, include_diagonal=True)
    assert t2.n_present + t2.n_absent == 40 * 40


def test_classify_truth_and_zero():
    p = generate_network(20, 4.0, 1.0, seed=2)
    t = BondTruth.from_params(p)
    assert np.array_equal(classify(p.couplings), t.classes)
    assert not classify(np.zeros((4, 4))).any()
    assert classify(np.array([[0.1, -0.3]]), 0.1).tolist() == [[0, -1]]
    with pytest.raises(ParameterError):
        classify(np.zeros(2), -1.0)


def test_limit_counts():
    t = truth_for()
    dense = np.where(t.candidates, 0.01, 0.0)
    cm = confusion(t, classify(dense))
    assert cm.false_negatives == 0 and cm.fp_zero == t.n_absent
    cm = confusion(t, classify(np.zeros_like(dense)))
    assert cm.false_negatives == t.n_present and cm.fp_zero == 0


def test_confusion_brute_force():
    rng = np.random.default_rng(0)
    t = truth_for(6, 2.0, seed=4)
    for _ in range(20):
        classes = rng.integers(-1, 2, (6, 6))
        cm, ref = confusion(t, classes), brute_confusion(t, classes)
        assert (cm.fn_minus, cm.fn_plus, cm.fp_zero, cm.sign_swaps) == \
            (ref["fn_minus"], ref["fn_plus"], ref["fp_zero"], ref["sign_swaps"])
        assert (cm.true_positives, cm.true_negatives) == (ref["tp"], ref["tn"])


def test_perfect_path_has_zero_epsilon():
    t = truth_for()
    ii, jj = np.nonzero(t.candidates)
    present = t.classes[ii, jj] != 0
    values = np.where(present, t.classes[ii, jj], 0.5)
    # false bonds go first
    order = np.r_[np.flatnonzero(~present), np.flatnonzero(present)]
    roc = roc_from_path(t, pruning_path(t, order, values))
    assert roc.epsilon == 0.0
    assert roc.auc == 1.0


def test_random_order_gives_chance():
    rng = np.random.default_rng(5)
    t = truth_for(60, 5.0, seed=3)
    n = int(t.candidates.sum())
    n1, n0 = t.n_present, t.n_absent
    sd = math.sqrt((n0 + n1 + 1) / (12.0 * n0 * n1))
    eps = []
    for _ in range(5):
        ii, jj = np.nonzero(t.candidates)
        path = pruning_path(t, rng.permutation(n), np.where(t.classes[ii, jj] != 0, t.classes[ii, jj], 1.0))
        eps.append(roc_from_path(t, path).epsilon)
    assert abs(np.mean(eps) - 0.5) < 3 * sd / math.sqrt(5)


def test_roc_endpoints_and_order():
    t = truth_for()
    ii, jj = np.nonzero(t.candidates)
    path = pruning_path(t, np.random.default_rng(1).permutation(ii.size)[:300], 1.0)
    roc = roc_from_path(t, path)
    assert (roc.fpr[0], roc.tpr[0]) == (0.0, 0.0) and (roc.fpr[-1], roc.tpr[-1]) == (1.0, 1.0)
    assert np.all(np.diff(roc.fpr) >= 0)
    assert roc.labels[0] == np.inf and roc.labels[-1] == -np.inf
    assert 0.0 <= roc.epsilon <= 1.0


def test_degenerate_truth_and_empty_path():
    t = BondTruth(np.zeros((3, 3), dtype=np.int8), ~np.eye(3, dtype=bool))
    with pytest.raises(ParameterError):
        rates(t, np.zeros((3, 3)))
    good = truth_for(5, 2.0, seed=1)
    with pytest.raises(ParameterError):
        roc_from_path(good, RegPath(np.zeros(0), np.zeros((0, 5, 5)), [], "j0cut"))


def test_auc_handles_ties_and_duplicates():
    # vertical run at fpr = 0.5
    assert roc_auc([0.5, 0.5], [0.2, 0.8]) == pytest.approx(0.5 * 0.2 / 2 + 0.5 * (0.8 + 1) / 2)
    assert roc_auc([0.3, 0.3, 0.6], [0.4, 0.4, 0.9]) == roc_auc([0.3, 0.6], [0.4, 0.9])
    assert roc_auc([], []) == pytest.approx(0.5)


def test_error_table_and_optimum():
    t = truth_for(10, 3.0, seed=2)
    ii, jj = np.nonzero(t.candidates)
    path = pruning_path(t, np.arange(ii.size), 1.0)
    rows = error_table(t, path)
    assert len(rows) == len(path)
    assert rows[0][3] == t.n_absent and rows[-1][1] + rows[-1][2] == t.n_present
    for r in rows:
        assert r[5] == r[1] + r[2] + r[3] + r[4]
    assert optimal_lambda([0, 1, 2, 3], [5, 2, 2, 4]) == 1.5


def test_midgap_threshold():
    J = np.array([[0.0, 0.01, -0.02], [0.3, 0.0, -0.31], [0.015, 0.29, 0.0]])
    off = ~np.eye(3, dtype=bool)
    thr = midgap_threshold(J, off)
    assert 0.02 < thr < 0.29


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**31), n=st.integers(3, 10))
def test_confusion_and_rate_properties(seed, n):
    rng = np.random.default_rng(seed)
    t = truth_for(n, min(3.0, n - 1.0), seed=seed % 1000)
    if t.n_present == 0 or t.n_absent == 0:
        return
    classes = rng.integers(-1, 2, (n, n))
    cm = confusion(t, classes)
    assert cm.fn_minus + cm.fn_plus + cm.sign_swaps + cm.true_positives == t.n_present
    assert cm.fp_zero + cm.true_negatives == t.n_absent
    fpr, tpr = rates(t, classes)
    assert tpr == pytest.approx(1 - cm.false_negatives / t.n_present)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**31), n=st.integers(4, 10), dup=st.integers(0, 30))
def test_nested_paths_monotone_and_duplicate_invariant(seed, n, dup):
    rng = np.random.default_rng(seed)
    t = truth_for(n, 2.0, seed=seed % 1000)
    if t.n_present == 0 or t.n_absent == 0:
        return
    m = int(t.candidates.sum())
    path = pruning_path(t, rng.permutation(m), rng.choice([-1.0, 1.0], m), tag="j0cut")
    pts = np.array([rates(t, classify(path.trajectories[k])) for k in range(len(path))])
    assert np.all(np.diff(pts[:, 0]) <= 0) and np.all(np.diff(pts[:, 1]) <= 0)
    eps = roc_from_path(t, path).epsilon
    k = dup % len(path)
    doubled = RegPath(np.r_[path.lambda_grid, path.lambda_grid[-1] + 1.0],
                      np.concatenate([path.trajectories, path.trajectories[k:k + 1]]), [], "j0cut")
    assert roc_from_path(t, doubled).epsilon == pytest.approx(eps, abs=1e-15)
