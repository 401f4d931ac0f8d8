import time
import warnings

import numpy as np

from ._core import (
    ConnectivityMask,
    LaplacianClass,
    LaplacianMatrix,
    RegularizationMatrix,
    StatisticMatrix,
    StructureError,
    build_k,
)
from ._descent import (
    EstimateState,
    EstimationResult,
    EstimatorConfig,
    NonConvergenceWarning,
    descend,
    objective,
    project_row_sums,
)


def as_statistic(s: "StatisticMatrix | np.ndarray") -> StatisticMatrix:
    return s if isinstance(s, StatisticMatrix) else StatisticMatrix(s)


def check_dimensions(s: StatisticMatrix, a: ConnectivityMask, h: None | RegularizationMatrix):
    if a.n != s.n:
        raise StructureError(f"Statistic is {s.n}×{s.n} but the mask is {a.n}×{a.n}.")
    if h is not None and h.n != s.n:
        raise StructureError(f"Statistic is {s.n}×{s.n} but the regularization is {h.n}×{h.n}.")


def check_k_diagonal(k_mat: np.ndarray):
    bad = np.flatnonzero(np.diag(k_mat) <= 0)
    if bad.size > 0:
        raise StructureError(
            f"K = S + H has nonpositive diagonal entries at {bad.tolist()}; the objective is unbounded there. "
            "Use alpha > 0."
        )


def estimate_ggl(
    s: "StatisticMatrix | np.ndarray",
    a: ConnectivityMask,
    h: None | RegularizationMatrix = None,
    cfg: EstimatorConfig = EstimatorConfig(),
    *,
    initial: None | EstimationResult = None,
    warn: bool = True,
) -> EstimationResult:
    """Estimates a generalized (or diagonally dominant) graph Laplacian.

    Solves `min Tr(Θ(S + H)) − logdet Θ` over positive definite `Θ` with nonpositive off-diagonal entries that are
    zero wherever `a` is zero; with `cfg.target_class="ddgl"` additionally subject to `Θ1 ≥ 0`.

    Starting from `Θ = diag(1/Kᵢᵢ)`, each cycle replaces every row/column in turn by its exact minimiser, found from
    a nonnegative quadratic program, while tracking `C = Θ⁻¹` through block inverse formulae.

    **Arguments:**

    - `s`: the data statistic.
    - `a`: the connectivity mask.
    - `h`: the regularization matrix. `None` means no regularization.
    - `cfg`: the estimator configuration.
    - `initial`: a previous result to start from instead (a warm start). Must be feasible for `a`.
    - `warn`: emit a `NonConvergenceWarning` when the cycle budget runs out. With `False` only `converged` reports
        it, for callers that run estimators concurrently.

    **Returns:**

    An `EstimationResult`. If the cycle budget runs out, a `NonConvergenceWarning` is emitted and the result has
    `converged=False`.
    """
    kind = cfg.target_class
    if kind is LaplacianClass.CGL:
        raise StructureError("`estimate_ggl` estimates GGL and DDGL matrices; use `estimate_cgl` for CGL.")
    s = as_statistic(s)
    check_dimensions(s, a, h)
    k_mat = build_k(s, h)
    check_k_diagonal(k_mat)
    if initial is None:
        diagonal = np.diag(k_mat)
        state = EstimateState(theta_hat=np.diag(1.0 / diagonal), c_hat=np.diag(diagonal))
    else:
        state = EstimateState(theta_hat=np.array(initial.theta.theta), c_hat=np.array(initial.c))

    start = time.perf_counter()
    outcome = descend(state, k_mat, a, cfg, kind)
    seconds = time.perf_counter() - start
    if warn and not outcome.converged:
        warnings.warn(
            f"{kind} estimation stopped after {outcome.cycles} cycles with relative change {outcome.criterion:.3g} "
            f"> epsilon={cfg.epsilon}.",
            NonConvergenceWarning,
            stacklevel=2,
        )
    theta = LaplacianMatrix(state.theta_hat, kind)
    return EstimationResult(
        theta=theta,
        c=state.c_hat,
        cycles=outcome.cycles,
        criterion=outcome.criterion,
        converged=outcome.converged,
        objective=objective(theta, k_mat, kind),
        objective_trace=outcome.objective_trace,
        seconds=seconds,
        row_sweeps_accepted=outcome.row_sweeps_accepted,
        row_sweeps_rejected=outcome.row_sweeps_rejected,
    )


def ddgl_projection(state: EstimateState) -> EstimateState:
    """Raises every negative row sum of `state.theta_hat` to zero by increasing the diagonal, updating the tracked
    inverse accordingly. Returns a new state.
    """
    theta = np.array(state.theta_hat, dtype=np.float64)
    c = np.array(state.c_hat, dtype=np.float64)
    project_row_sums(theta, c, None)
    return EstimateState(theta_hat=theta, c_hat=c, cycle_count=state.cycle_count, last_criterion=state.last_criterion)
