import dataclasses
import logging
from collections.abc import Iterable
from typing import Literal

import numpy as np
import scipy.linalg

from ._core import (
    ClassLike,
    ConnectivityMask,
    LaplacianClass,
    LaplacianMatrix,
    PositiveDefinitenessError,
    StructureError,
    as_symmetric,
)
from ._nnqp import NnqpProblem, solve_nnqp
from ._partition import (
    assign,
    block_inverse,
    diagonal_rank_one_update,
    extract_theta_u_inverse,
    low_rank_update,
    others,
    partition,
)
from ._utils import inverse_or_none, logdet_or_none, symmetrize


logger = logging.getLogger(__name__)


class NonConvergenceWarning(RuntimeWarning):
    """Emitted when an estimator stops at `max_cycles` before meeting its convergence tolerance."""


NonConvergenceWarning.__module__ = "laplace_learn"


@dataclasses.dataclass(frozen=True)
class EstimatorConfig:
    """Configuration for the block-coordinate descent estimators.

    **Arguments:**

    - `target_class`: `"ggl"` or `"ddgl"` for [`laplace_learn.estimate_ggl`][]; `"cgl"` selects
        [`laplace_learn.estimate_cgl`][] in [`laplace_learn.estimate`][].
    - `epsilon`: stop once `‖Θ̂ − Θ̂_pre‖_F / ‖Θ̂_pre‖_F ≤ epsilon` over a full cycle.
    - `max_cycles`: the cycle budget. Hitting it returns a partial result with `converged=False`.
    - `inverse_refresh_period`: recompute the tracked inverse from scratch every this many cycles. `0` disables.
    - `update_order`: `"cyclic"` visits rows `0, …, n−1`; `"random"` draws a fresh permutation every cycle.
    - `seed`: seed for `update_order="random"`.
    - `check_descent`: assert after every update that the objective did not increase. Slow; for debugging.
    - `nnqp_tolerance`: feasibility tolerance of the per-row nonnegative quadratic programs.
    - `coordinate_polish`: for DDGL and CGL targets, follow each cycle with a weight sweep: an exact minimisation
        over the edge (and vertex) weights at each vertex in turn. Row sweeps that do not decrease the objective are
        rolled back and retried in a later cycle. With this off the estimator runs the plain row sweep + diagonal
        projection iteration, which is not guaranteed to reach the optimum when row-sum constraints are active; see
        `devdocs/cycle_projection.md`.
    """

    target_class: LaplacianClass = LaplacianClass.GGL
    epsilon: float = 1e-4
    max_cycles: int = 1000
    inverse_refresh_period: int = 50
    update_order: Literal["cyclic", "random"] = "cyclic"
    seed: None | int = None
    check_descent: bool = False
    nnqp_tolerance: float = 1e-10
    coordinate_polish: bool = True

    def __post_init__(self):
        object.__setattr__(self, "target_class", LaplacianClass.parse(self.target_class))
        if not self.epsilon > 0:
            raise StructureError(f"`epsilon` must be positive, got {self.epsilon}.")
        if self.max_cycles < 1:
            raise StructureError(f"`max_cycles` must be at least 1, got {self.max_cycles}.")
        if self.inverse_refresh_period < 0:
            raise StructureError(f"`inverse_refresh_period` must be nonnegative, got {self.inverse_refresh_period}.")
        if self.update_order not in ("cyclic", "random"):
            raise StructureError(f"`update_order` must be 'cyclic' or 'random', got {self.update_order!r}.")
        if not self.nnqp_tolerance > 0:
            raise StructureError(f"`nnqp_tolerance` must be positive, got {self.nnqp_tolerance}.")

    def replace(self, **changes) -> "EstimatorConfig":
        return dataclasses.replace(self, **changes)

    def as_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["target_class"] = self.target_class.value
        return out


@dataclasses.dataclass
class EstimateState:
    """The working pair `(Θ̂, Ĉ = Θ̂⁻¹)` of the block-coordinate descent, plus bookkeeping."""

    theta_hat: np.ndarray
    c_hat: np.ndarray
    cycle_count: int = 0
    last_criterion: float = np.inf


@dataclasses.dataclass(frozen=True, eq=False)
class EstimationResult:
    """Output of the estimators.

    - `theta`: the estimated Laplacian.
    - `c`: its tracked inverse. For CGL, the inverse of `Θ` on the subspace orthogonal to the constant vectors.
    - `cycles`: the number of cycles run.
    - `criterion`: the relative change over the last cycle.
    - `converged`: whether `criterion <= epsilon`.
    - `objective`: the final objective value.
    - `objective_trace`: the working objective after every cycle.
    - `seconds`: wall-clock time of the descent.
    - `row_sweeps_accepted`: the number of cycles whose row sweep (plus projection) was kept. Equal to `cycles` for
        GGL.
    - `row_sweeps_rejected`: the number of row sweeps rolled back because they raised the objective.
    """

    theta: LaplacianMatrix
    c: np.ndarray
    cycles: int
    criterion: float
    converged: bool
    objective: float
    objective_trace: tuple[float, ...]
    seconds: float
    row_sweeps_accepted: int = 0
    row_sweeps_rejected: int = 0

    def summary(self) -> dict:
        return {
            "class": self.theta.kind.value,
            "cycles": self.cycles,
            "criterion": self.criterion,
            "converged": self.converged,
            "objective": self.objective,
            "objective_trace": list(self.objective_trace),
            "seconds": self.seconds,
            "row_sweeps_accepted": self.row_sweeps_accepted,
            "row_sweeps_rejected": self.row_sweeps_rejected,
        }


def working_objective(theta: np.ndarray, k_mat: np.ndarray) -> float:
    """`Tr(ΘK) − logdet Θ`, or `+inf` outside the positive definite cone."""
    logdet = logdet_or_none(theta)
    if logdet is None:
        return np.inf
    return float(np.sum(theta * k_mat)) - logdet


def objective(theta: "LaplacianMatrix | np.ndarray", k_mat: np.ndarray, problem: ClassLike = "ggl") -> float:
    """The penalised negative log-likelihood being minimised.

    For GGL and DDGL this is `Tr(ΘK) − logdet Θ`. For CGL, whose `Θ` is singular, it is
    `Tr(Θ(K + J)) − logdet(Θ + J)` with `J = 11ᵀ/n`, which equals `Tr(ΘK) − log pdet Θ` on connected graphs.

    Raises `PositiveDefinitenessError` if the log-determinant is undefined.
    """
    problem = LaplacianClass.parse(problem)
    theta = theta.theta if isinstance(theta, LaplacianMatrix) else as_symmetric(theta, "theta")
    k_mat = as_symmetric(k_mat, "k_mat")
    if k_mat.shape != theta.shape:
        raise StructureError(f"`theta` has shape {theta.shape} but `k_mat` has shape {k_mat.shape}.")
    if problem is LaplacianClass.CGL:
        n = theta.shape[0]
        j = np.full((n, n), 1.0 / n)
        logdet = logdet_or_none(theta + j)
        value = np.inf if logdet is None else float(np.sum(theta * (k_mat + j))) - logdet
    else:
        value = working_objective(theta, k_mat)
    if not np.isfinite(value):
        raise PositiveDefinitenessError("Objective is undefined: the matrix is not positive definite.")
    return value


def criterion(theta: np.ndarray, theta_pre: np.ndarray) -> float:
    """Relative change `‖Θ − Θ_pre‖_F / ‖Θ_pre‖_F`."""
    denominator = np.linalg.norm(theta_pre)
    if denominator == 0:
        raise StructureError("Relative change is undefined for a zero previous iterate.")
    return float(np.linalg.norm(theta - theta_pre) / denominator)


#
# The descent engine, shared by all three classes.
#
# Everything below works on the "working" matrices: `Θ` and `K` themselves for GGL/DDGL, and `Θ + J`, `K + J` for
# CGL, where `shift` holds `J`. All updates are in place on `theta` and `c`.
#


class _DescentChecker:
    def __init__(self, k_mat: np.ndarray, enabled: bool):
        self.k_mat = k_mat
        self.enabled = enabled
        self.last = np.inf

    def reset(self, theta: np.ndarray):
        if self.enabled:
            self.last = working_objective(theta, self.k_mat)

    def step(self, theta: np.ndarray, where: str):
        if not self.enabled:
            return
        value = working_objective(theta, self.k_mat)
        if np.isfinite(self.last) and value > self.last + 1e-10 * max(1.0, abs(self.last)):
            raise AssertionError(f"Objective increased from {self.last!r} to {value!r} at {where}.")
        self.last = value


def row_sweep(
    theta: np.ndarray,
    c: np.ndarray,
    k_mat: np.ndarray,
    permitted: np.ndarray,
    shift: None | np.ndarray,
    order: Iterable[int],
    hints: list,
    tol: float,
    checker: None | _DescentChecker = None,
):
    """One pass of exact row/column minimisations.

    Row `u` is replaced by the minimiser of the objective over row/column `u` with the remaining block fixed and
    entries restricted to `shift` (zero if `None`) outside the mask and to at most `shift` inside it.
    """
    n = theta.shape[0]
    for u in order:
        idx = others(n, u)
        block_inv = extract_theta_u_inverse(partition(c, u))
        k_uu = k_mat[u, u]
        support = permitted[idx, u]
        p = k_mat[idx, u][support] / k_uu
        if shift is None:
            vector = np.zeros(n - 1)
        else:
            vector = shift[idx, u].copy()
            p = p + (block_inv @ vector)[support]
        q = block_inv[np.ix_(support, support)]
        beta = solve_nnqp(NnqpProblem(q, p, hints[u]), tol=tol)
        vector[support] = vector[support] - beta
        scalar = 1.0 / k_uu + float(vector @ block_inv @ vector)
        assign(c, block_inverse(block_inv, vector, scalar, u))
        theta[idx, u] = vector
        theta[u, idx] = vector
        theta[u, u] = scalar
        hints[u] = frozenset(np.flatnonzero(beta > 0).tolist())
        if checker is not None:
            checker.step(theta, f"row {u}")


def project_row_sums(theta: np.ndarray, c: np.ndarray, target: None | float):
    """Moves the diagonal so that every row sum is at least zero (`target=None`) or equal to `target`.

    Each change is a rank-one diagonal update of `c`.
    """
    row_sums = theta.sum(axis=1)
    for i in range(theta.shape[0]):
        if target is None:
            nu = -row_sums[i] if row_sums[i] < 0 else 0.0
        else:
            nu = target - row_sums[i]
        if nu == 0:
            continue
        c[...] = diagonal_rank_one_update(c, i, nu)
        theta[i, i] += nu


def minimise_weights(
    curvature: np.ndarray,
    m: np.ndarray,
    lower: np.ndarray,
    hint: None | frozenset[int],
    tol: float,
    max_steps: int = 50,
) -> tuple[np.ndarray, np.ndarray, frozenset[int]]:
    """Minimises `f(x) = κᵀx − logdet(I + MX)` over `x ≥ lower`, where `X = diag(x)` and `M` is positive definite.

    Along `Θ + BXBᵀ` the objective is `f` up to a constant, for `κ = diag(BᵀKB)` and `M = BᵀCB`. Each Newton step
    minimises the quadratic model of `f` over the box, as a nonnegative quadratic program in `x − lower`, and then
    backtracks until the Armijo condition holds.

    **Returns:**

    A 3-tuple of the minimiser `x`, the matrix `W = X − X(M⁻¹ + X)⁻¹X` that updates `C` (see
    [`laplace_learn.low_rank_update`][]), and the coordinates strictly above their bound.
    """
    d = curvature.shape[0]
    try:
        factor = scipy.linalg.cholesky(m, lower=True, check_finite=False)
    except np.linalg.LinAlgError:
        raise PositiveDefinitenessError("`BᵀCB` is not positive definite.") from None
    eye = np.eye(d)

    def evaluate(x: np.ndarray) -> None | tuple[float, np.ndarray]:
        # `(M⁻¹ + X)⁻¹ = L(I + LᵀXL)⁻¹Lᵀ` for `M = LLᵀ`.
        try:
            inner = scipy.linalg.cho_factor(eye + factor.T @ (x[:, None] * factor), lower=True, check_finite=False)
        except np.linalg.LinAlgError:
            return None
        logdet = 2.0 * float(np.sum(np.log(np.diag(inner[0]))))
        p_mat = symmetrize(factor @ scipy.linalg.cho_solve(inner, factor.T, check_finite=False))
        return float(curvature @ x) - logdet, p_mat

    x = np.zeros(d)
    start = evaluate(x)
    assert start is not None
    value, p_mat = start
    for _ in range(max_steps):
        gradient = curvature - np.diag(p_mat)
        hessian = symmetrize(p_mat * p_mat)
        offset = x - lower
        y = solve_nnqp(NnqpProblem(hessian, hessian @ offset - gradient, hint), tol=tol)
        hint = frozenset(np.flatnonzero(y > 0).tolist())
        step = y - offset
        slope = float(gradient @ step)
        if not slope < 0:
            break
        t = 1.0
        for _ in range(60):
            # At full length, land exactly on the bounds the quadratic program chose.
            candidate = lower + y if t == 1.0 else x + t * step
            trial = evaluate(candidate)
            if trial is not None and trial[0] <= value + 1e-4 * t * slope:
                break
            t *= 0.5
        else:
            break
        assert trial is not None
        x = candidate
        value, p_mat = trial
        if np.max(np.abs(t * step)) <= 1e-13 * (1.0 + np.max(np.abs(offset))):
            break
    w = np.diag(x) - x[:, None] * p_mat * x[None, :]
    return x, symmetrize(w), frozenset() if hint is None else hint


def weight_sweep(
    theta: np.ndarray,
    c: np.ndarray,
    k_mat: np.ndarray,
    neighbours: list[np.ndarray],
    shift: None | np.ndarray,
    vertices: bool,
    order: Iterable[int],
    hints: list,
    tol: float,
    checker: None | _DescentChecker = None,
):
    """One pass of exact minimisations over the weights at each vertex.

    At vertex `u` these are the weights of its permitted edges and, if `vertices`, its own vertex weight. Moving them
    changes `Θ` to `Θ + BXBᵀ`, where `B` has a column `δᵤ − δᵥ` per neighbour `v` (and `δᵤ` for the vertex weight),
    so row sums other than those the vertex weight controls are unchanged and the sign pattern is kept. `C` follows
    by one low-rank update per vertex.
    """
    for u in order:
        nbrs = neighbours[u]
        if nbrs.size == 0 and not vertices:
            continue
        base = np.zeros(nbrs.size) if shift is None else shift[u, nbrs]
        cb = c[:, [u]] - c[:, nbrs]
        curvature = k_mat[u, u] + k_mat[nbrs, nbrs] - 2 * k_mat[u, nbrs]
        weights = base - theta[u, nbrs]
        bad = np.flatnonzero(~(curvature > 0))
        if bad.size > 0:
            raise PositiveDefinitenessError(
                f"The objective is unbounded along edge ({u}, {nbrs[bad[0]]}) since the statistic has no variance "
                "across it; use alpha > 0."
            )
        if vertices:
            cb = np.concatenate([cb, c[:, [u]]], axis=1)
            curvature = np.append(curvature, k_mat[u, u])
            weights = np.append(weights, theta[u].sum())
        # Rows of `BᵀCB`: `δᵤ − δᵥ` against `CB`, then `δᵤ`.
        m = cb[u][None, :] - cb[nbrs]
        if vertices:
            m = np.concatenate([m, cb[[u]]], axis=0)
        lower = -np.maximum(weights, 0.0)
        x, w, hints[u] = minimise_weights(curvature, symmetrize(m), lower, hints[u], tol)
        if not np.any(x):
            continue
        c[...] = low_rank_update(c, cb, w)
        edge_x = x[: nbrs.size]
        theta[u, u] += edge_x.sum() + (x[-1] if vertices else 0.0)
        theta[nbrs, nbrs] += edge_x
        row = theta[u, nbrs] - edge_x
        cleared = edge_x == lower[: nbrs.size]
        row[cleared] = base[cleared]
        theta[u, nbrs] = row
        theta[nbrs, u] = row
        if checker is not None:
            checker.step(theta, f"vertex {u}")


@dataclasses.dataclass(frozen=True)
class _Outcome:
    cycles: int
    criterion: float
    converged: bool
    objective_trace: tuple[float, ...]
    row_sweeps_accepted: int
    row_sweeps_rejected: int


_MAX_SWEEP_BACKOFF = 32


def descend(
    state: EstimateState,
    k_mat: np.ndarray,
    mask: ConnectivityMask,
    cfg: EstimatorConfig,
    kind: LaplacianClass,
    shift: None | np.ndarray = None,
    fallback: None | tuple[np.ndarray, np.ndarray] = None,
) -> _Outcome:
    """Runs block-coordinate descent on `state` in place.

    For DDGL and CGL (with `cfg.coordinate_polish`), a cycle is a row sweep followed by the diagonal projection,
    kept only if it does not increase the objective relative to the last feasible iterate (initially `fallback`),
    followed by a weight sweep. A rejected row sweep is rolled back and retried after a number of cycles that doubles
    with every consecutive rejection, up to 32; an accepted one is attempted again next cycle.
    """
    theta, c = state.theta_hat, state.c_hat
    n = theta.shape[0]
    permitted = mask.entries.astype(bool)
    np.fill_diagonal(permitted, False)
    neighbours = [np.flatnonzero(permitted[u]) for u in range(n)]
    hints: list = [None] * n
    weight_hints: list = [None] * n
    rng = np.random.default_rng(cfg.seed) if cfg.update_order == "random" else None
    constrained = kind is not LaplacianClass.GGL
    polish = constrained and cfg.coordinate_polish
    target = {LaplacianClass.GGL: None, LaplacianClass.DDGL: None, LaplacianClass.CGL: 1.0}[kind]
    checker = _DescentChecker(k_mat, cfg.check_descent) if cfg.check_descent else None

    if fallback is None:
        fallback = (theta.copy(), c.copy())
    fallback_theta, fallback_c = fallback
    fallback_objective = working_objective(fallback_theta, k_mat)

    accepted = rejected = 0
    next_sweep = 1
    backoff = 1
    trace = []
    converged = False
    change = np.inf
    cycle = 0
    for cycle in range(1, cfg.max_cycles + 1):
        theta_pre = theta.copy()
        order = range(n) if rng is None else rng.permutation(n).tolist()
        if not polish or cycle >= next_sweep:
            ok = True
            try:
                # The shifted starting point is not feasible, so the first sweep need not descend from it.
                row_checker = checker if shift is None or cycle > 1 else None
                if row_checker is not None:
                    row_checker.reset(theta)
                row_sweep(theta, c, k_mat, permitted, shift, order, hints, cfg.nnqp_tolerance, row_checker)
                if constrained:
                    project_row_sums(theta, c, target)
            except PositiveDefinitenessError:
                if not polish:
                    raise
                ok = False
            if polish and ok:
                value = working_objective(theta, k_mat)
                ok = value <= fallback_objective + 1e-10 * max(1.0, abs(fallback_objective))
            if ok:
                accepted += 1
                backoff = 1
                next_sweep = cycle + 1
            else:
                rejected += 1
                next_sweep = cycle + 1 + backoff
                logger.debug("cycle %d: row sweep rejected, next attempt in cycle %d", cycle, next_sweep)
                backoff = min(2 * backoff, _MAX_SWEEP_BACKOFF)
                theta[...] = fallback_theta
                c[...] = fallback_c
        if polish:
            if checker is not None:
                checker.reset(theta)
            weight_sweep(
                theta,
                c,
                k_mat,
                neighbours,
                shift,
                kind is LaplacianClass.DDGL,
                order,
                weight_hints,
                cfg.nnqp_tolerance,
                checker,
            )
        c[...] = symmetrize(c)
        if cfg.inverse_refresh_period and cycle % cfg.inverse_refresh_period == 0:
            refreshed = inverse_or_none(theta)
            if refreshed is None:
                raise PositiveDefinitenessError(f"Iterate lost positive definiteness by cycle {cycle}.")
            c[...] = refreshed
        value = working_objective(theta, k_mat)
        monotone = polish or not constrained
        if cfg.check_descent and monotone and trace and value > trace[-1] + 1e-10 * max(1.0, abs(trace[-1])):
            raise AssertionError(f"Objective increased from {trace[-1]!r} to {value!r} over cycle {cycle}.")
        if constrained:
            fallback_theta, fallback_c, fallback_objective = theta.copy(), c.copy(), value
        trace.append(value)
        change = criterion(theta, theta_pre)
        state.cycle_count = cycle
        state.last_criterion = change
        logger.debug("cycle %d: criterion=%.3e objective=%.12g", cycle, change, value)
        if change <= cfg.epsilon:
            converged = True
            break
    return _Outcome(
        cycles=cycle,
        criterion=change,
        converged=converged,
        objective_trace=tuple(trace),
        row_sweeps_accepted=accepted,
        row_sweeps_rejected=rejected,
    )
