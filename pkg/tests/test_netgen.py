import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kinising.errors import ParameterError
from kinising.netgen import generate_network, load_network, save_network


def test_magnitude_and_expected_count():
    p = generate_network(40, 5.0, 1 / math.sqrt(2), seed=0)
    nz = p.couplings[p.couplings != 0]
    assert np.allclose(np.abs(nz), 1 / math.sqrt(10), rtol=0, atol=1e-15)
    assert abs(1 / math.sqrt(10) - 0.3162) < 1e-4
    # cN = 200 expected bonds; binomial sd ~ 13.3
    assert abs(p.n_bonds - 200) < 5 * math.sqrt(200 * (1 - 5 / 40))


def test_zero_degree_is_empty():
    p = generate_network(12, 0.0, 1.0, seed=5)
    assert not p.couplings.any()


def test_frequencies_over_many_seeds():
    n, c, seeds = 40, 5.0, 1000
    pos = neg = 0
    for s in range(seeds):
        J = generate_network(n, c, 1.0, seed=s).couplings
        pos += int((J > 0).sum())
        neg += int((J < 0).sum())
    pairs = seeds * n * (n - 1)
    frac = (pos + neg) / pairs
    p = c / n
    assert abs(frac - p) < 3 * math.sqrt(p * (1 - p) / pairs)
    k = pos + neg
    assert abs(pos - k / 2) < 3 * math.sqrt(k / 4)


def test_degree_means():
    n, c = 40, 5.0
    indeg, outdeg = [], []
    for s in range(300):
        A = generate_network(n, c, 1.0, seed=s).couplings != 0
        indeg.append(A.sum(axis=1))
        outdeg.append(A.sum(axis=0))
    indeg, outdeg = np.concatenate(indeg), np.concatenate(outdeg)
    mean = c * (n - 1) / n
    sd = math.sqrt((n - 1) * (c / n) * (1 - c / n))
    for d in (indeg, outdeg):
        assert abs(d.mean() - mean) < 3 * sd / math.sqrt(d.size)
        assert abs(d.var() - sd ** 2) < 0.15 * sd ** 2


def test_asymmetric_draws_and_fields():
    p = generate_network(40, 5.0, 1.0, field_value=0.25, seed=9)
    assert np.all(p.fields == 0.25)
    both = (p.couplings != 0) & (p.couplings.T != 0)
    # independent draws: reciprocated pairs are rare, not forced
    assert both.sum() < (p.couplings != 0).sum()


@pytest.mark.parametrize("args", [(0, 1.0, 1.0), (10, -1.0, 1.0), (10, 11.0, 1.0), (10, 2.0, 0.0)])
def test_invalid_parameters(args):
    with pytest.raises(ParameterError):
        generate_network(*args)


def test_round_trip(tmp_path):
    p = generate_network(15, 4.0, 0.7, field_value=-0.1, seed=2)
    path, meta = save_network(p, tmp_path / "net.txt")
    assert meta.exists()
    q = load_network(path)
    assert np.array_equal(p.couplings, q.couplings)
    assert np.array_equal(p.fields, q.fields)
    assert (q.n_spins, q.avg_degree, q.coupling_scale, q.seed) == (15, 4.0, 0.7, 2)


@settings(max_examples=50, deadline=None)
@given(n=st.integers(1, 30), c=st.floats(0.0, 1.0), g=st.floats(0.01, 3.0), seed=st.integers(0, 2**32))
def test_structure_properties(n, c, g, seed):
    c = c * n
    p = generate_network(n, c, g, seed=seed)
    q = generate_network(n, c, g, seed=seed)
    assert np.array_equal(p.couplings, q.couplings)
    assert not np.diag(p.couplings).any()
    vals = np.unique(np.abs(p.couplings))
    allowed = {0.0} if c == 0 else {0.0, g / math.sqrt(c)}
    assert set(vals.tolist()) <= allowed
