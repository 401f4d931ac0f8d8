import numpy as np
import pytest

import laplace_learn as ll
from helpers import assert_close, precise, random_laplacian, random_mask, random_spd, random_statistic


def _two_vertex(w: float) -> np.ndarray:
    return w * np.array([[1.0, -1.0], [-1.0, 1.0]])


@pytest.mark.parametrize("s", [[[2.0, 0.5], [0.5, 1.0]], [[1.0, 0.0], [0.0, 1.0]], [[3.0, -1.0], [-1.0, 2.0]]])
def test_two_vertex_closed_form(s):
    s = np.array(s)
    w = 1 / (s[0, 0] + s[1, 1] - 2 * s[0, 1])
    result = ll.estimate_cgl(s, ll.ConnectivityMask.full(2), cfg=precise("cgl"))
    assert np.allclose(result.theta.theta, _two_vertex(w), atol=1e-8)
    assert result.theta.kind is ll.LaplacianClass.CGL


def test_empty_mask():
    with pytest.warns(ll.DisconnectedGraphWarning, match="2 connected components"):
        result = ll.estimate_cgl(np.eye(2), ll.ConnectivityMask.empty(2))
    assert np.array_equal(result.theta.theta, np.zeros((2, 2)))


@pytest.mark.parametrize("alpha", [0.0, 0.1])
@pytest.mark.parametrize("seed", range(6))
def test_matches_oracle(alpha, seed):
    rng = np.random.default_rng(seed)
    n = 3 + seed % 4
    s = random_statistic(rng, n)
    a = random_mask(rng, n, 0.4, connected=True)
    h = ll.regularization(n, alpha)
    result = ll.estimate_cgl(s, a, h, precise("cgl", check_descent=True))
    oracle = ll.oracle_solve("cgl", s, a, h)
    assert_close(result.objective, oracle.objective, 1e-6)
    assert ll.kkt_report(result.theta, ll.build_k(s, h), a, "cgl").passed(1e-5)


@pytest.mark.parametrize("seed", range(3))
def test_output_contract(seed):
    rng = np.random.default_rng(seed)
    n = 8
    s = random_statistic(rng, n)
    a = random_mask(rng, n, 0.3, connected=True)
    h = ll.regularization(n, 0.05)
    result = ll.estimate_cgl(s, a, h)
    theta = result.theta.theta
    j = np.full((n, n), 1 / n)
    forbidden = (a.entries == 0) & ~np.eye(n, dtype=bool)
    assert np.all(theta[forbidden] == 0)
    assert np.max(np.abs(theta.sum(axis=1))) <= 1e-9
    assert ll.validate_class(theta).kind is ll.LaplacianClass.CGL
    assert np.linalg.norm((theta + j) @ (result.c + j) - np.eye(n)) <= 1e-6 * n
    assert np.linalg.norm(result.c @ theta - (np.eye(n) - j)) <= 1e-6 * n
    # Hadamard's inequality on the shifted matrix.
    shifted = theta + j
    assert np.linalg.slogdet(shifted)[1] <= np.sum(np.log(np.diag(shifted))) + 1e-12
    k_mat = ll.build_k(s, h)
    assert_close(result.objective, ll.pseudo_objective(theta, k_mat), 1e-9)
    assert_close(result.objective, ll.objective(theta, k_mat, "cgl"), 1e-12)


def test_disconnected_mask():
    entries = np.zeros((4, 4))
    entries[0, 1] = entries[1, 0] = entries[2, 3] = entries[3, 2] = 1
    rng = np.random.default_rng(0)
    s = random_statistic(rng, 4)
    with pytest.warns(ll.DisconnectedGraphWarning):
        result = ll.estimate_cgl(s, ll.ConnectivityMask(entries), cfg=precise("cgl"))
    theta = result.theta.theta
    assert np.max(np.abs(theta.sum(axis=1))) <= 1e-9
    for i, j in [(0, 1), (2, 3)]:
        w = 1 / (s.s[i, i] + s.s[j, j] - 2 * s.s[i, j])
        assert theta[i, j] == pytest.approx(-w, rel=1e-8)


def test_weight_sweep_two_vertices():
    # Row sweeps with projection stall here; the weight sweep reaches the optimum.
    result = ll.estimate_cgl(np.eye(2), ll.ConnectivityMask.full(2), cfg=precise("cgl"))
    assert np.allclose(result.theta.theta, _two_vertex(0.5), atol=1e-8)
    assert result.row_sweeps_accepted == 0
    assert result.row_sweeps_rejected >= 1


def test_row_sweeps_retried_on_grid():
    laplacian, mask = ll.generate_graph(ll.GraphSpec("grid", 36, vertex_weights="zero"), seed=0)
    s = ll.build_statistic(ll.sample_gmrf(laplacian, 360, seed=1))
    result = ll.estimate_cgl(s, mask, cfg=precise("cgl"))
    assert result.cycles >= 3
    # Attempted in cycle 1 and again by cycle 3, whether or not the first attempt was kept.
    assert result.row_sweeps_accepted + result.row_sweeps_rejected >= 2
    assert ll.kkt_report(result.theta, ll.build_k(s), mask, "cgl").passed(1e-5)


def test_row_sweeps_accepted_at_optimum():
    rng = np.random.default_rng(4)
    n = 8
    l = random_laplacian(rng, n, "cgl")
    j = np.full((n, n), 1 / n)
    s = ll.StatisticMatrix(np.linalg.inv(l.theta + j) - j)
    a = ll.ConnectivityMask(((l.theta != 0) & ~np.eye(n, dtype=bool)).astype(np.float64))
    cold = ll.estimate_cgl(s, a, cfg=precise("cgl"))
    assert np.allclose(cold.theta.theta, l.theta, atol=1e-6)
    warm = ll.estimate_cgl(s, a, cfg=precise("cgl"), initial=cold)
    assert warm.row_sweeps_accepted >= 1
    assert warm.row_sweeps_rejected == 0
    assert warm.summary()["row_sweeps_accepted"] == warm.row_sweeps_accepted


def test_non_convergence():
    rng = np.random.default_rng(1)
    s = random_statistic(rng, 6)
    cfg = ll.EstimatorConfig(target_class="cgl", epsilon=1e-14, max_cycles=2)
    with pytest.warns(ll.NonConvergenceWarning, match="CGL estimation stopped after 2 cycles"):
        result = ll.estimate_cgl(s, ll.ConnectivityMask.full(6), cfg=cfg)
    assert not result.converged
    assert result.theta.kind is ll.LaplacianClass.CGL


def test_warm_start():
    rng = np.random.default_rng(2)
    s = random_statistic(rng, 5)
    a = random_mask(rng, 5, 0.5, connected=True)
    cold = ll.estimate_cgl(s, a, ll.regularization(5, 0.1), precise("cgl"))
    first = ll.estimate_cgl(s, a, ll.regularization(5, 0.02), precise("cgl"))
    warm = ll.estimate_cgl(s, a, ll.regularization(5, 0.1), precise("cgl"), initial=first)
    assert_close(cold.objective, warm.objective, 1e-8)


def test_cgl_projection_feasible_unchanged():
    theta = np.array([[0.7, 0.3], [0.3, 0.7]])
    projected = ll.cgl_projection(ll.ShiftedState(theta, np.linalg.inv(theta)))
    assert np.array_equal(projected.theta_tilde, theta)
    assert np.allclose(projected.j, 0.5)


def test_cgl_projection_direct_formula():
    theta = np.array([[0.5, 0.3], [0.3, 1.0]])
    projected = ll.cgl_projection(ll.ShiftedState(theta, np.linalg.inv(theta)))
    assert np.allclose(np.diag(projected.theta_tilde) - np.diag(theta), [0.2, -0.3])
    assert np.allclose(projected.theta_tilde.sum(axis=1), 1.0, atol=1e-12)
    assert np.allclose(projected.c_tilde, np.linalg.inv(projected.theta_tilde))


def test_cgl_projection_loses_definiteness():
    theta = np.array([[1.0, 0.9], [0.9, 1.0]])
    with pytest.raises(ll.PositiveDefinitenessError):
        ll.cgl_projection(ll.ShiftedState(theta, np.linalg.inv(theta)))


def test_pseudo_objective_direct():
    assert ll.pseudo_objective(_two_vertex(1.0), np.eye(2)) == pytest.approx(2 - np.log(2))


def test_pseudo_objective_disconnected():
    with pytest.raises(ll.DisconnectedGraphError, match="more than one component"):
        ll.pseudo_objective(np.zeros((2, 2)), np.eye(2))


def test_pseudo_determinant_identity():
    rng = np.random.default_rng(0)
    for _ in range(100):
        n = int(rng.integers(2, 9))
        l = random_laplacian(rng, n, "cgl")
        k_mat = random_spd(rng, n) / n
        pseudo = ll.pseudo_objective(l, k_mat)
        shifted = ll.objective(l, k_mat, "cgl")
        assert abs(pseudo - shifted) <= 1e-9 * (1 + abs(shifted))
