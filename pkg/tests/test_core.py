import numpy as np
import pytest

import laplace_learn as ll
from helpers import random_laplacian


def test_validate_class_identity():
    verdict = ll.validate_class(np.eye(3))
    assert verdict.kind is ll.LaplacianClass.DDGL
    assert verdict.satisfies(ll.LaplacianClass.GGL)
    assert not verdict.satisfies(ll.LaplacianClass.CGL)


def test_validate_class_combinatorial():
    verdict = ll.validate_class(np.array([[1.0, -1.0], [-1.0, 1.0]]))
    assert verdict.kind is ll.LaplacianClass.CGL
    for kind in ll.LaplacianClass:
        assert verdict.satisfies(kind)


def test_validate_class_positive_off_diagonal():
    verdict = ll.validate_class(np.array([[1.0, 0.5], [0.5, 1.0]]))
    assert verdict.kind is None
    assert verdict.violations["off_diagonal"] == 0.5
    assert not verdict.satisfies(ll.LaplacianClass.GGL)


def test_validate_class_generalized():
    theta = np.array([[1.0, -1.5], [-1.5, 3.0]])
    verdict = ll.validate_class(theta)
    assert verdict.kind is ll.LaplacianClass.GGL
    assert verdict.violations["row_sum_nonnegative"] == pytest.approx(0.5)


def test_validate_class_not_symmetric():
    with pytest.raises(ll.StructureError, match="not symmetric"):
        ll.validate_class(np.array([[1.0, -1.0], [0.0, 1.0]]))


@pytest.mark.parametrize("seed", range(5))
def test_validate_class_monotone(seed):
    rng = np.random.default_rng(seed)
    l = random_laplacian(rng, 6, "cgl")
    verdict = ll.validate_class(l)
    assert verdict.kind is ll.LaplacianClass.CGL
    assert ll.LaplacianMatrix(l.theta, "ddgl").kind is ll.LaplacianClass.DDGL
    assert ll.LaplacianMatrix(l.theta, "ggl").kind is ll.LaplacianClass.GGL


def test_laplacian_matrix_views():
    theta = np.array([[3.0, -1.0, 0.0], [-1.0, 2.0, -0.5], [0.0, -0.5, 1.0]])
    l = ll.LaplacianMatrix(theta, "ddgl")
    assert np.array_equal(l.weights, [[0, 1, 0], [1, 0, 0.5], [0, 0.5, 0]])
    assert np.array_equal(np.diag(l.degrees), [1.0, 1.5, 0.5])
    assert np.allclose(l.vertex_weights, [2.0, 0.5, 0.5])
    assert np.array_equal(l.mask.entries, [[0, 1, 0], [1, 0, 1], [0, 1, 0]])
    with pytest.raises(ValueError):
        l.theta[0, 0] = 1.0


def test_laplacian_matrix_wrong_class():
    with pytest.raises(ll.StructureError, match="not a CGL"):
        ll.LaplacianMatrix(np.eye(2), "cgl")


def test_connectivity_mask():
    mask = ll.ConnectivityMask.full(3)
    assert mask.edge_count == 3
    assert mask.edges().tolist() == [[0, 1], [0, 2], [1, 2]]
    assert mask.neighbours(1).tolist() == [0, 2]
    assert ll.ConnectivityMask.empty(4).edge_count == 0


@pytest.mark.parametrize(
    "entries, match",
    [
        ([[0, 2], [2, 0]], "0 or 1"),
        ([[1, 0], [0, 0]], "zero diagonal"),
        ([[0, 1], [0, 0]], "symmetric"),
        ([[0, 1, 0]], "square"),
    ],
)
def test_connectivity_mask_malformed(entries, match):
    with pytest.raises(ll.StructureError, match=match):
        ll.ConnectivityMask(np.array(entries, dtype=float))


def test_statistic_not_psd():
    with pytest.raises(ll.StructureError, match="positive semidefinite"):
        ll.StatisticMatrix(np.array([[1.0, 2.0], [2.0, 1.0]]))


def test_build_k_zero_regularization():
    s = np.array([[2.0, 0.3], [0.3, 1.0]])
    assert np.array_equal(ll.build_k(s), s)
    assert np.array_equal(ll.build_k(s, np.zeros((2, 2))), s)


def test_build_k_standard_forms():
    s = ll.StatisticMatrix(np.eye(2))
    assert np.allclose(ll.build_k(s, ll.regularization(2, 0.1, "l1")), [[1.1, -0.1], [-0.1, 1.1]])
    assert np.allclose(ll.build_k(s, ll.regularization(2, 0.1, "l1-off")), [[1.0, -0.1], [-0.1, 1.0]])


def test_build_k_dimension_mismatch():
    with pytest.raises(ll.StructureError, match="shape"):
        ll.build_k(np.eye(2), ll.regularization(3, 0.1))


def test_regularization_negative_alpha():
    with pytest.raises(ll.StructureError, match="nonnegative"):
        ll.regularization(3, -1.0)


@pytest.mark.parametrize("seed", range(5))
def test_regularization_traces(seed):
    rng = np.random.default_rng(seed)
    theta = random_laplacian(rng, 7, "ddgl").theta
    alpha = 0.3
    l1 = ll.regularization(7, alpha, "l1").h
    l1_off = ll.regularization(7, alpha, "l1-off").h
    off = np.abs(theta).sum() - np.abs(np.diag(theta)).sum()
    assert np.sum(theta * l1) == pytest.approx(alpha * np.abs(theta).sum())
    assert np.sum(theta * l1_off) == pytest.approx(alpha * off)


def test_build_statistic_constant_rows():
    s = ll.build_statistic(np.ones((5, 3)))
    assert np.array_equal(s.s, np.zeros((3, 3)))
    assert s.sample_count == 5


def test_build_statistic_direct_formula():
    s = ll.build_statistic(np.array([[1.0], [-1.0]]))
    assert np.array_equal(s.s, [[1.0]])


def test_build_statistic_binary_zeros():
    s = ll.build_statistic(np.zeros((4, 6)), mode="binary")
    assert np.allclose(s.s, np.eye(4) / 3)
    assert s.sample_count == 6


def test_build_statistic_binary_centres_rows():
    x = np.array([[1.0, 0.0, 1.0, 0.0], [1.0, 1.0, 1.0, 1.0]])
    s = ll.build_statistic(x, mode="binary")
    assert np.allclose(s.s, [[0.25 + 1 / 3, 0.0], [0.0, 1 / 3]])


def test_build_statistic_rbf():
    x = np.array([[0.0, 0.0, 3.0], [1.0, 1.0, 3.0]])
    s = ll.build_statistic(x, mode="rbf", bandwidth=1.0)
    assert np.allclose(np.diag(s.s), 1.0)
    assert s.s[0, 1] == pytest.approx(1.0)
    assert s.s[0, 2] == pytest.approx(np.exp(-(9 + 4) / 2))


@pytest.mark.parametrize(
    "x, mode, match",
    [
        (np.zeros((0, 3)), "gaussian", "at least one sample"),
        (np.array([[np.nan, 1.0]]), "gaussian", "non-finite"),
        (np.ones((2, 2)), "poisson", "Unknown statistic mode"),
    ],
)
def test_build_statistic_errors(x, mode, match):
    with pytest.raises(ll.StructureError, match=match):
        ll.build_statistic(x, mode)


def test_laplacian_class_parse():
    assert ll.LaplacianClass.parse("DDGL") is ll.LaplacianClass.DDGL
    assert str(ll.LaplacianClass.CGL) == "CGL"
    with pytest.raises(ll.StructureError, match="Unknown Laplacian class"):
        ll.LaplacianClass.parse("sgl")
