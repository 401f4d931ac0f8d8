import itertools

import numpy as np
import pytest

import laplace_learn as ll
from helpers import random_spd


def _value(q, p, beta):
    return 0.5 * beta @ q @ beta - beta @ p


def _enumerate(q: np.ndarray, p: np.ndarray) -> np.ndarray:
    """Tries every free set and keeps the one satisfying the optimality conditions."""
    m = p.shape[0]
    for free in itertools.product([False, True], repeat=m):
        free = np.array(free)
        beta = np.zeros(m)
        if free.any():
            beta[free] = np.linalg.solve(q[np.ix_(free, free)], p[free])
        gradient = q @ beta - p
        if np.all(beta >= -1e-12) and np.all(gradient[~free] >= -1e-12):
            return np.maximum(beta, 0)
    raise AssertionError("no free set satisfies the optimality conditions")


def _random_problem(seed: int, m: int) -> tuple[np.ndarray, np.ndarray]:
    rng = np.random.default_rng(seed)
    return random_spd(rng, m) / m, rng.standard_normal(m)


def test_unconstrained_optimum():
    beta = ll.solve_nnqp(ll.NnqpProblem(np.eye(3), np.array([1.0, 2.0, 3.0])))
    assert np.allclose(beta, [1.0, 2.0, 3.0])


def test_origin_optimum():
    beta = ll.solve_nnqp(ll.NnqpProblem(np.eye(2), np.array([-1.0, -2.0])))
    assert np.array_equal(beta, [0.0, 0.0])


def test_empty():
    assert ll.solve_nnqp(ll.NnqpProblem(np.zeros((0, 0)), np.zeros(0))).shape == (0,)


@pytest.mark.parametrize("seed", range(20))
def test_matches_enumeration(seed):
    q, p = _random_problem(seed, 5)
    beta = ll.solve_nnqp(ll.NnqpProblem(q, p))
    expected = _enumerate(q, p)
    assert np.allclose(beta, expected, atol=1e-9)


@pytest.mark.parametrize("seed", range(20))
def test_optimality_conditions(seed):
    m = 2 + seed % 9
    q, p = _random_problem(seed, m)
    tol = 1e-10
    beta = ll.solve_nnqp(ll.NnqpProblem(q, p), tol=tol)
    residual = q @ beta - p
    assert np.all(beta >= 0)
    assert np.all(residual >= -1e-9)
    assert np.max(np.abs(beta * residual)) <= 1e-9
    assert _value(q, p, beta) <= _value(q, p, _enumerate(q, p)) + 1e-9


@pytest.mark.parametrize("seed", range(10))
def test_support_hint(seed):
    q, p = _random_problem(seed, 7)
    cold = ll.solve_nnqp(ll.NnqpProblem(q, p))
    rng = np.random.default_rng(seed)
    hint = frozenset(np.flatnonzero(rng.random(7) < 0.5).tolist())
    warm = ll.solve_nnqp(ll.NnqpProblem(q, p, support_hint=hint))
    assert np.allclose(warm, cold, atol=1e-9)


@pytest.mark.parametrize("scale", [1e-3, 2.0, 1e3])
def test_scale_equivariance(scale):
    q, p = _random_problem(0, 6)
    assert np.allclose(ll.solve_nnqp(ll.NnqpProblem(scale * q, scale * p)), ll.solve_nnqp(ll.NnqpProblem(q, p)))


def test_not_positive_definite():
    prob = ll.NnqpProblem(np.array([[1.0, 2.0], [2.0, 1.0]]), np.array([1.0, 1.0]))
    with pytest.raises(ll.PositiveDefinitenessError, match="not positive definite"):
        ll.solve_nnqp(prob)


def test_pivot_budget():
    with pytest.raises(ll.PivotingError, match="did not terminate"):
        ll.solve_nnqp(ll.NnqpProblem(np.eye(2), np.array([1.0, 2.0])), max_pivots=0)


@pytest.mark.parametrize(
    "q, p, hint, error",
    [
        (np.eye(2), np.ones(3), None, ll.StructureError),
        (np.array([[1.0, 0.5], [0.0, 1.0]]), np.ones(2), None, ll.StructureError),
        (np.diag([1.0, 0.0]), np.ones(2), None, ll.PositiveDefinitenessError),
        (np.eye(2), np.ones(2), frozenset({2}), ll.StructureError),
    ],
)
def test_malformed(q, p, hint, error):
    with pytest.raises(error):
        ll.NnqpProblem(q, p, hint)
