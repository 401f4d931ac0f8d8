import dataclasses

import numpy as np
import scipy.linalg

from ._core import PositiveDefinitenessError, StructureError
from ._utils import symmetry_defect


class PivotingError(ArithmeticError):
    """Raised when block principal pivoting fails to terminate within its pivot budget."""


PivotingError.__module__ = "laplace_learn"


@dataclasses.dataclass(frozen=True, eq=False)
class NnqpProblem:
    """`minimize ½βᵀQβ − βᵀp subject to β ≥ 0`.

    - `q`: symmetric positive definite `m × m` matrix.
    - `p`: length-`m` vector.
    - `support_hint`: indices expected to be strictly positive at the solution, e.g. the support of the previous
        solve of the same row. Only affects the starting point, never the answer.
    """

    q: np.ndarray
    p: np.ndarray
    support_hint: None | frozenset[int] = None

    def __post_init__(self):
        q = np.asarray(self.q, dtype=np.float64)
        p = np.asarray(self.p, dtype=np.float64)
        if q.ndim != 2 or q.shape[0] != q.shape[1]:
            raise StructureError(f"`q` must be a square matrix, got shape {q.shape}.")
        if p.shape != (q.shape[0],):
            raise StructureError(f"`p` must have shape ({q.shape[0]},), got {p.shape}.")
        if symmetry_defect(q) > 1e-12:
            raise StructureError("`q` is not symmetric.")
        if np.any(np.diag(q) <= 0):
            raise PositiveDefinitenessError("`q` has a nonpositive diagonal entry.")
        if self.support_hint is not None and any(not 0 <= i < q.shape[0] for i in self.support_hint):
            raise StructureError("`support_hint` has out-of-range indices.")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "p", p)

    @property
    def m(self) -> int:
        return self.p.shape[0]


def _solve_free(q: np.ndarray, p: np.ndarray, free: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    beta = np.zeros_like(p)
    if free.any():
        try:
            factor = scipy.linalg.cho_factor(q[np.ix_(free, free)], lower=True, check_finite=False)
        except np.linalg.LinAlgError:
            raise PositiveDefinitenessError("NNQP matrix `q` is not positive definite.") from None
        beta[free] = scipy.linalg.cho_solve(factor, p[free], check_finite=False)
    gradient = q @ beta - p
    gradient[free] = 0.0
    return beta, gradient


def solve_nnqp(prob: NnqpProblem, tol: float = 1e-10, max_pivots: None | int = None) -> np.ndarray:
    """Solves a nonnegative quadratic program by block principal pivoting.

    The variables are split into a free set `F` (solved for exactly, via a Cholesky factorisation of `Q_FF`) and a
    clamped set (held at zero). Every infeasible variable (negative on `F`, or with a negative gradient off `F`) is
    exchanged at once. If three consecutive exchanges fail to reduce the number of infeasible variables, only
    the infeasible variable with the largest index is exchanged until they do; this single-exchange rule cannot cycle.

    **Arguments:**

    - `prob`: the problem.
    - `tol`: feasibility tolerance on `β` and on the gradient `Qβ − p`.
    - `max_pivots`: the pivot budget, by default `max(m², 100)`.

    **Returns:**

    The minimiser `β ≥ 0`.
    """
    q, p, m = prob.q, prob.p, prob.m
    if m == 0:
        return np.zeros(0)
    if max_pivots is None:
        max_pivots = max(m * m, 100)
    free = np.zeros(m, dtype=bool)
    if prob.support_hint:
        free[list(prob.support_hint)] = True
    fewest_infeasible = m + 1
    full_exchanges_left = 3
    for _ in range(max_pivots + 1):
        beta, gradient = _solve_free(q, p, free)
        infeasible = (free & (beta < -tol)) | (~free & (gradient < -tol))
        count = int(infeasible.sum())
        if count == 0:
            return np.maximum(beta, 0.0)
        if count < fewest_infeasible:
            fewest_infeasible = count
            full_exchanges_left = 3
            free ^= infeasible
        elif full_exchanges_left > 0:
            full_exchanges_left -= 1
            free ^= infeasible
        else:
            free[np.flatnonzero(infeasible)[-1]] ^= True
    raise PivotingError(f"NNQP block principal pivoting did not terminate within {max_pivots} pivots (m={m}).")
