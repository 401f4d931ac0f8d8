import dataclasses

import numpy as np

from ._core import (
    ClassLike,
    ConnectivityMask,
    LaplacianClass,
    RegularizationMatrix,
    StatisticMatrix,
    StructureError,
    build_k,
)
from ._ggl import as_statistic, check_dimensions
from ._utils import component_averaging, component_labels, inverse_or_none, logdet_or_none


_MAX_N = 10
_ARMIJO = 1e-4
_BACKTRACK = 0.5


@dataclasses.dataclass(frozen=True, eq=False)
class OracleResult:
    theta: np.ndarray
    objective: float
    iterations: int
    converged: bool


def _basis(problem: LaplacianClass, a: ConnectivityMask) -> tuple[np.ndarray, np.ndarray]:
    """Matrices `Bₖ` with `Θ = Σₖ xₖBₖ`, and the lower bound of each coordinate."""
    n = a.n
    blocks = []
    lower = []
    for i in range(n):
        if problem is not LaplacianClass.CGL:
            b = np.zeros((n, n))
            b[i, i] = 1.0
            blocks.append(b)
            lower.append(-np.inf if problem is LaplacianClass.GGL else 0.0)
    for i, j in a.edges():
        b = np.zeros((n, n))
        if problem is LaplacianClass.GGL:
            b[i, j] = b[j, i] = -1.0
        else:
            b[i, i] = b[j, j] = 1.0
            b[i, j] = b[j, i] = -1.0
        blocks.append(b)
        lower.append(0.0)
    if not blocks:
        return np.zeros((0, n, n)), np.zeros(0)
    return np.stack(blocks), np.array(lower)


def _start(problem: LaplacianClass, k_mat: np.ndarray, a: ConnectivityMask) -> np.ndarray:
    n = a.n
    m = a.edge_count
    if problem is not LaplacianClass.CGL:
        return np.concatenate([1.0 / np.diag(k_mat), np.zeros(m)])
    if m == 0:
        return np.zeros(0)
    laplacian = np.diag(a.entries.sum(axis=1)) - a.entries
    components, _ = component_labels(a.entries)
    trace = float(np.sum(laplacian * k_mat))
    if not trace > 0:
        raise StructureError("The objective is unbounded below on this mask; use alpha > 0.")
    return np.full(m, (n - components) / trace)


def oracle_solve(
    problem: ClassLike,
    s: "StatisticMatrix | np.ndarray",
    a: ConnectivityMask,
    h: None | RegularizationMatrix = None,
    tol: float = 1e-9,
    max_iterations: int = 10**6,
) -> OracleResult:
    """Reference solver for small instances, independent of the block-coordinate descent.

    Minimises the same objective as the estimators by projected gradient descent over the weights: the diagonal and
    the permitted edge magnitudes for GGL, vertex and edge weights for DDGL, edge weights for CGL. In these coordinates
    the feasible set is a box, so projection is clamping. The first trial step has length 1. Later searches start from
    the Barzilai–Borwein length `ΔxᵀΔx / ΔxᵀΔg` of the previous step, or 1 when that curvature is not positive. Each
    search backtracks by halving until the Armijo condition holds, and steps leaving the positive definite cone are
    rejected, so every accepted step decreases the objective just as with a unit start. Restarting each search at 1
    reaches the same stationary point but takes far more iterations on badly scaled weights.

    **Arguments:**

    - `problem`: the Laplacian class.
    - `s`: the data statistic.
    - `a`: the connectivity mask.
    - `h`: the regularization matrix.
    - `tol`: stop once the (unit-step) projected gradient has max-norm at most `tol`.
    - `max_iterations`: the iteration budget.

    **Returns:**

    An `OracleResult`. For CGL, `objective` is `Tr(Θ(K + J)) − logdet(Θ + J)`.
    """
    problem = LaplacianClass.parse(problem)
    s = as_statistic(s)
    check_dimensions(s, a, h)
    if s.n > _MAX_N:
        raise StructureError(f"The reference oracle is limited to n <= {_MAX_N}, got n={s.n}.")
    k_mat = build_k(s, h)
    if problem is not LaplacianClass.CGL and np.any(np.diag(k_mat) <= 0):
        raise StructureError("K = S + H has nonpositive diagonal entries; use alpha > 0.")
    shift = component_averaging(a.entries) if problem is LaplacianClass.CGL else np.zeros_like(k_mat)
    basis, lower = _basis(problem, a)

    def assemble(x: np.ndarray) -> np.ndarray:
        return np.tensordot(x, basis, axes=1) if x.size else np.zeros_like(k_mat)

    def value(x: np.ndarray) -> float:
        theta = assemble(x)
        logdet = logdet_or_none(theta + shift)
        if logdet is None:
            return np.inf
        return float(np.sum(theta * (k_mat + shift))) - logdet

    def gradient(x: np.ndarray) -> np.ndarray:
        inverse = inverse_or_none(assemble(x) + shift)
        assert inverse is not None
        return np.tensordot(basis, k_mat + shift - inverse, axes=([1, 2], [0, 1]))

    x = _start(problem, k_mat, a)
    f = value(x)
    if not np.isfinite(f):
        raise StructureError("Could not find a feasible starting point for the reference oracle.")
    if x.size == 0:
        return OracleResult(theta=assemble(x), objective=f, iterations=0, converged=True)
    g = gradient(x)
    step = 1.0
    converged = False
    iteration = 0
    for iteration in range(1, max_iterations + 1):
        mapping = np.maximum(x - g, lower) - x
        if np.max(np.abs(mapping)) <= tol:
            converged = True
            break
        t = step
        while True:
            x_new = np.maximum(x - t * g, lower)
            f_new = value(x_new)
            if f_new <= f + _ARMIJO * float(g @ (x_new - x)):
                break
            t *= _BACKTRACK
            if t < 1e-30:
                break
        if not f_new <= f:
            break
        g_new = gradient(x_new)
        dx = x_new - x
        dg = g_new - g
        curvature = float(dx @ dg)
        step = float(dx @ dx) / curvature if curvature > 0 else 1.0
        step = min(max(step, 1e-12), 1e12)
        x, f, g = x_new, f_new, g_new
    return OracleResult(theta=assemble(x), objective=f, iterations=iteration, converged=converged)
