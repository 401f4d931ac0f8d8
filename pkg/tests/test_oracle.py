import numpy as np
import pytest

import laplace_learn as ll
from helpers import assert_close, precise, random_mask, random_statistic


def test_empty_mask_is_diagonal():
    s = np.array([[2.0, 0.3, 0.0], [0.3, 0.5, 0.1], [0.0, 0.1, 4.0]])
    for kind in ("ggl", "ddgl"):
        result = ll.oracle_solve(kind, s, ll.ConnectivityMask.empty(3))
        assert np.allclose(result.theta, np.diag(1 / np.diag(s)), atol=1e-8)
        assert result.converged


def test_two_vertex_cgl():
    s = np.array([[2.0, 0.5], [0.5, 1.0]])
    w = 1 / (s[0, 0] + s[1, 1] - 2 * s[0, 1])
    result = ll.oracle_solve("cgl", s, ll.ConnectivityMask.full(2))
    assert np.allclose(result.theta, w * np.array([[1.0, -1.0], [-1.0, 1.0]]), atol=1e-8)


def test_size_limit():
    with pytest.raises(ll.StructureError, match="n <= 10"):
        ll.oracle_solve("cgl", np.eye(11), ll.ConnectivityMask.full(11))


def test_unbounded_cgl():
    with pytest.raises(ll.StructureError, match="unbounded"):
        ll.oracle_solve("cgl", np.zeros((3, 3)), ll.ConnectivityMask.full(3))


@pytest.mark.parametrize("kind", ["ggl", "ddgl", "cgl"])
@pytest.mark.parametrize("seed", range(3))
def test_kkt(kind, seed):
    rng = np.random.default_rng(seed)
    n = 4
    s = random_statistic(rng, n)
    a = random_mask(rng, n, 0.6, connected=True)
    h = ll.regularization(n, 0.1)
    result = ll.oracle_solve(kind, s, a, h)
    assert result.converged
    assert ll.kkt_report(result.theta, ll.build_k(s, h), a, kind).passed(1e-5)


def test_deterministic():
    rng = np.random.default_rng(4)
    s = random_statistic(rng, 5)
    a = random_mask(rng, 5, 0.5)
    first = ll.oracle_solve("ddgl", s, a)
    second = ll.oracle_solve("ddgl", s, a)
    assert np.array_equal(first.theta, second.theta)
    assert first.objective == second.objective


def test_iteration_budget():
    s = np.array([[1.0, 0.3, 0.1], [0.3, 1.0, 0.3], [0.1, 0.3, 1.0]])
    a = ll.ConnectivityMask.full(3)
    short = ll.oracle_solve("ddgl", s, a, max_iterations=1)
    full = ll.oracle_solve("ddgl", s, a)
    assert not short.converged
    assert short.iterations == 1
    assert full.converged
    assert full.objective <= short.objective


def test_badly_scaled_weights():
    rng = np.random.default_rng(5)
    n = 5
    scale = np.diag(np.logspace(-1, 1, n))
    s = ll.StatisticMatrix(scale @ random_statistic(rng, n).s @ scale)
    a = ll.ConnectivityMask.full(n)
    h = ll.regularization(n, 0.01)
    result = ll.oracle_solve("ggl", s, a, h)
    assert result.converged
    estimate = ll.estimate_ggl(s, a, h, precise("ggl"))
    assert_close(result.objective, estimate.objective, 1e-6)
