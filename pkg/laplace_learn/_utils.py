import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.csgraph


SYMMETRY_TOL = 1e-12
FEASIBILITY_TOL = 1e-9
KKT_TOL = 1e-6


def symmetrize(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + m.T)


def symmetry_defect(m: np.ndarray) -> float:
    """Largest asymmetry of `m`, relative to its largest entry (or absolute, for entries below one)."""
    if m.size == 0:
        return 0.0
    scale = max(1.0, float(np.max(np.abs(m))))
    return float(np.max(np.abs(m - m.T))) / scale


def extreme_eigenvalues(m: np.ndarray) -> tuple[float, float]:
    """Smallest and largest eigenvalue of the symmetric matrix `m`."""
    eigenvalues = scipy.linalg.eigh(m, eigvals_only=True)
    return float(eigenvalues[0]), float(eigenvalues[-1])


def logdet_or_none(m: np.ndarray) -> None | float:
    """`log det m` via Cholesky, or `None` if `m` is not positive definite."""
    try:
        factor = scipy.linalg.cholesky(m, lower=True, check_finite=False)
    except np.linalg.LinAlgError:
        return None
    diagonal = np.diag(factor)
    if np.any(diagonal <= 0) or not np.all(np.isfinite(diagonal)):
        return None
    return 2.0 * float(np.sum(np.log(diagonal)))


def inverse_or_none(m: np.ndarray) -> None | np.ndarray:
    """Inverse of the symmetric positive definite `m`, or `None` if it is not positive definite."""
    try:
        factor = scipy.linalg.cho_factor(m, lower=True, check_finite=False)
    except np.linalg.LinAlgError:
        return None
    return symmetrize(scipy.linalg.cho_solve(factor, np.eye(m.shape[0]), check_finite=False))


def component_labels(adjacency: np.ndarray) -> tuple[int, np.ndarray]:
    """Connected components of the undirected graph whose nonzero off-diagonal entries are `adjacency`'s edges."""
    graph = scipy.sparse.csr_matrix(adjacency != 0)
    count, labels = scipy.sparse.csgraph.connected_components(graph, directed=False)
    return int(count), labels


def connected_components(adjacency: np.ndarray) -> int:
    """Number of connected components of the graph with the given adjacency (or connectivity) matrix."""
    count, _ = component_labels(np.asarray(adjacency))
    return count


def component_averaging(adjacency: np.ndarray) -> np.ndarray:
    """The matrix `Σ_c 1_c 1_cᵀ / |c|` over connected components `c`.

    For a connected graph this is `11ᵀ/n`. It is the orthogonal projector onto the null space shared by every
    combinatorial Laplacian supported on `adjacency`.
    """
    _, labels = component_labels(adjacency)
    same = labels[:, None] == labels[None, :]
    sizes = np.bincount(labels)
    return same / sizes[labels][:, None]
