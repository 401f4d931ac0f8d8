import dataclasses
import time
import warnings

import numpy as np
import scipy.linalg

from ._core import (
    ConnectivityMask,
    LaplacianClass,
    LaplacianMatrix,
    PositiveDefinitenessError,
    RegularizationMatrix,
    StatisticMatrix,
    StructureError,
    as_symmetric,
    build_k,
)
from ._descent import (
    EstimateState,
    EstimationResult,
    EstimatorConfig,
    NonConvergenceWarning,
    descend,
    project_row_sums,
)
from ._ggl import as_statistic, check_dimensions, check_k_diagonal
from ._utils import component_averaging, component_labels, inverse_or_none, logdet_or_none


class DisconnectedGraphWarning(RuntimeWarning):
    """Emitted when a combinatorial Laplacian is estimated on a disconnected connectivity mask."""


class DisconnectedGraphError(ValueError):
    """Raised when a connected graph is required but the graph has more than one component."""


DisconnectedGraphWarning.__module__ = "laplace_learn"
DisconnectedGraphError.__module__ = "laplace_learn"


@dataclasses.dataclass
class ShiftedState:
    """Working pair `(Θ̃, C̃ = Θ̃⁻¹)` for the shifted combinatorial problem, where `Θ̃ = Θ + J`.

    `j` defaults to `11ᵀ/n`.
    """

    theta_tilde: np.ndarray
    c_tilde: np.ndarray
    j: None | np.ndarray = None

    def __post_init__(self):
        if self.j is None:
            n = self.theta_tilde.shape[0]
            self.j = np.full((n, n), 1.0 / n)


def cgl_projection(state: ShiftedState) -> ShiftedState:
    """Sets every row sum of `Θ̃` to one by moving its diagonal, updating `C̃` by one rank-one update per changed
    row. Returns a new state.

    Raises `PositiveDefinitenessError` if a decrease of the diagonal would make `Θ̃` singular or indefinite.
    """
    theta = np.array(state.theta_tilde, dtype=np.float64)
    c = np.array(state.c_tilde, dtype=np.float64)
    project_row_sums(theta, c, 1.0)
    return ShiftedState(theta_tilde=theta, c_tilde=c, j=state.j)


def pseudo_objective(theta: "LaplacianMatrix | np.ndarray", k_mat: np.ndarray) -> float:
    """`Tr(ΘK) − log pdet Θ` for a connected combinatorial Laplacian `Θ`.

    The spectrum is taken on the orthogonal complement of the constant vector, so no threshold is needed to find the
    zero eigenvalue. Raises `DisconnectedGraphError` if another eigenvalue is (numerically) zero.
    """
    theta = theta.theta if isinstance(theta, LaplacianMatrix) else as_symmetric(theta, "theta")
    k_mat = as_symmetric(k_mat, "k_mat")
    n = theta.shape[0]
    if k_mat.shape != theta.shape:
        raise StructureError(f"`theta` has shape {theta.shape} but `k_mat` has shape {k_mat.shape}.")
    basis = scipy.linalg.null_space(np.ones((1, n)))
    eigenvalues = scipy.linalg.eigh(basis.T @ theta @ basis, eigvals_only=True)
    largest = float(eigenvalues.max(initial=0.0))
    if eigenvalues.size == 0 or eigenvalues[0] <= 1e-9 * largest:
        raise DisconnectedGraphError(
            "Pseudo-determinant requires exactly one zero eigenvalue, but the graph has more than one component."
        )
    return float(np.sum(theta * k_mat)) - float(np.sum(np.log(eigenvalues)))


def _uniform_start(k_mat: np.ndarray, a: ConnectivityMask, shift: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """A feasible shifted starting point: every permitted edge with the same weight, chosen optimally."""
    laplacian = np.diag(a.entries.sum(axis=1)) - a.entries
    n = a.n
    components, _ = component_labels(a.entries)
    if a.edge_count == 0:
        weight = 0.0
    else:
        trace = float(np.sum(laplacian * k_mat))
        if not trace > 0:
            raise PositiveDefinitenessError("The objective is unbounded below on this mask; use alpha > 0.")
        weight = (n - components) / trace
    theta = weight * laplacian + shift
    c = inverse_or_none(theta)
    if c is None:
        raise PositiveDefinitenessError("Could not build a positive definite starting point.")
    return theta, c


def estimate_cgl(
    s: "StatisticMatrix | np.ndarray",
    a: ConnectivityMask,
    h: None | RegularizationMatrix = None,
    cfg: EstimatorConfig = EstimatorConfig(target_class=LaplacianClass.CGL),
    *,
    initial: None | EstimationResult = None,
    warn: bool = True,
) -> EstimationResult:
    """Estimates a combinatorial graph Laplacian.

    Solves `min Tr(Θ(K + J)) − logdet(Θ + J)` over combinatorial Laplacians `Θ` supported on `a`, with `K = S + H`
    and `J = 11ᵀ/n`, by block-coordinate descent on the shifted matrix `Θ + J`. The zero row-sum constraint becomes
    `(Θ + J)1 = 1`, enforced by a diagonal projection after each cycle.

    If `a` is disconnected a `DisconnectedGraphWarning` is emitted and `J` is replaced by the average over each
    connected component of `a`; the returned matrix then has more than one zero eigenvalue.

    **Arguments:**

    - `s`: the data statistic.
    - `a`: the connectivity mask.
    - `h`: the regularization matrix. `None` means no regularization.
    - `cfg`: the estimator configuration. Its `target_class` is ignored.
    - `initial`: a previous CGL result on the same mask to start from (a warm start).
    - `warn`: emit the `DisconnectedGraphWarning` above and, when the cycle budget runs out, a
        `NonConvergenceWarning`. With `False` neither is emitted.

    **Returns:**

    An `EstimationResult` whose `theta` is a CGL and whose `c` satisfies `(Θ + J)(C + J) = I`.
    """
    s = as_statistic(s)
    check_dimensions(s, a, h)
    k_mat = build_k(s, h)
    components, _ = component_labels(a.entries)
    if warn and components > 1:
        warnings.warn(
            f"Connectivity mask has {components} connected components; the estimated CGL will be disconnected.",
            DisconnectedGraphWarning,
            stacklevel=2,
        )
    shift = component_averaging(a.entries)
    k_tilde = k_mat + shift
    check_k_diagonal(k_tilde)
    if initial is None:
        fallback = _uniform_start(k_mat, a, shift)
        diagonal = np.diag(k_tilde)
        state = EstimateState(theta_hat=np.diag(1.0 / diagonal), c_hat=np.diag(diagonal))
    else:
        theta0 = np.array(initial.theta.theta) + shift
        c0 = np.array(initial.c) + shift
        fallback = (theta0.copy(), c0.copy())
        state = EstimateState(theta_hat=theta0, c_hat=c0)

    start = time.perf_counter()
    outcome = descend(state, k_tilde, a, cfg, LaplacianClass.CGL, shift=shift, fallback=fallback)
    seconds = time.perf_counter() - start
    if warn and not outcome.converged:
        warnings.warn(
            f"CGL estimation stopped after {outcome.cycles} cycles with relative change {outcome.criterion:.3g} "
            f"> epsilon={cfg.epsilon}.",
            NonConvergenceWarning,
            stacklevel=2,
        )

    theta = state.theta_hat - shift
    np.fill_diagonal(theta, 0.0)
    np.fill_diagonal(theta, -theta.sum(axis=1))
    laplacian = LaplacianMatrix(theta, LaplacianClass.CGL)
    logdet = logdet_or_none(laplacian.theta + shift)
    if logdet is None:
        raise PositiveDefinitenessError("Estimated `Θ + J` is not positive definite.")
    value = float(np.sum(laplacian.theta * k_tilde)) - logdet
    return EstimationResult(
        theta=laplacian,
        c=state.c_hat - shift,
        cycles=outcome.cycles,
        criterion=outcome.criterion,
        converged=outcome.converged,
        objective=value,
        objective_trace=outcome.objective_trace,
        seconds=seconds,
        row_sweeps_accepted=outcome.row_sweeps_accepted,
        row_sweeps_rejected=outcome.row_sweeps_rejected,
    )
