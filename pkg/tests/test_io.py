import numpy as np
import pytest

import laplace_learn as ll
from helpers import random_laplacian


def test_matrix_exact(tmp_path):
    rng = np.random.default_rng(0)
    m = rng.standard_normal((4, 3)) * 10.0 ** rng.integers(-8, 8, size=(4, 3))
    ll.write_matrix(tmp_path / "m.csv", m)
    assert np.array_equal(ll.read_matrix(tmp_path / "m.csv"), m)


def test_single_row(tmp_path):
    (tmp_path / "row.csv").write_text("1,2,3\n")
    assert ll.read_matrix(tmp_path / "row.csv").shape == (1, 3)


def test_malformed_matrix(tmp_path):
    (tmp_path / "bad.csv").write_text("1,2\n3,x\n")
    with pytest.raises(ll.StructureError, match="Could not parse"):
        ll.read_matrix(tmp_path / "bad.csv")


def test_read_mask(tmp_path):
    (tmp_path / "mask.csv").write_text("0,1,0\n1,0,1\n0,1,0\n")
    mask = ll.read_mask(tmp_path / "mask.csv")
    assert mask.edge_count == 2
    (tmp_path / "bad.csv").write_text("0,2\n2,0\n")
    with pytest.raises(ll.StructureError, match="0 or 1"):
        ll.read_mask(tmp_path / "bad.csv")


def test_edge_list_one_based():
    theta = np.array([[1.0, -1.0, 0.0], [-1.0, 3.0, -2.0], [0.0, -2.0, 2.0]])
    l = ll.LaplacianMatrix(theta, "cgl")
    assert ll.edge_list(l) == [(1, 2, 1.0), (2, 3, 2.0)]


def test_edge_list_rebuild(tmp_path):
    rng = np.random.default_rng(1)
    l = random_laplacian(rng, 7, "ddgl")
    ll.write_edge_list(tmp_path / "edges.csv", l)
    theta = ll.read_edge_list(tmp_path / "edges.csv", 7, l.vertex_weights)
    assert np.allclose(theta, l.theta, rtol=0, atol=1e-12)


@pytest.mark.parametrize("content, match", [("1,2\n", "expected"), ("1,4,0.5\n", "invalid edge"), ("2,2,1\n", "invalid")])
def test_malformed_edge_list(tmp_path, content, match):
    (tmp_path / "edges.csv").write_text(content)
    with pytest.raises(ll.StructureError, match=match):
        ll.read_edge_list(tmp_path / "edges.csv", 3)
