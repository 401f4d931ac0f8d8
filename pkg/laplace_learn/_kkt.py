import dataclasses

import numpy as np

from ._core import (
    ClassLike,
    ConnectivityMask,
    LaplacianClass,
    LaplacianMatrix,
    PositiveDefinitenessError,
    StructureError,
    as_symmetric,
)
from ._utils import KKT_TOL, component_averaging, extreme_eigenvalues, inverse_or_none


@dataclasses.dataclass(frozen=True, eq=False)
class KktReport:
    """Optimality residuals of a candidate solution.

    All residuals are nonnegative.

    - `max_stationarity_residual`: the largest violation of `Θ⁻¹ = K + M` for a multiplier matrix `M` of the right
        structure. Multiplier sign violations (an edge that should be present but is not) are included here.
    - `max_complementarity_residual`: the largest `|μᵢⱼ Θᵢⱼ|` over permitted edges, and for DDGL also `|ρᵢ (Θ1)ᵢ|`.
    - `max_feasibility_residual`: the largest violation of the constraint set.
    - `edge_multipliers`: the implied multipliers `μᵢⱼ` of the sign constraints on permitted edges (zero elsewhere).
    - `vertex_multipliers`: the implied multipliers `ρᵢ` of the row-sum constraints (zero for GGL).
    """

    max_stationarity_residual: float
    max_complementarity_residual: float
    max_feasibility_residual: float
    edge_multipliers: np.ndarray
    vertex_multipliers: np.ndarray

    def passed(self, tol: float = KKT_TOL) -> bool:
        residuals = (self.max_stationarity_residual, self.max_complementarity_residual, self.max_feasibility_residual)
        return max(residuals) <= tol

    def as_dict(self) -> dict[str, float]:
        return {
            "max_stationarity_residual": self.max_stationarity_residual,
            "max_complementarity_residual": self.max_complementarity_residual,
            "max_feasibility_residual": self.max_feasibility_residual,
        }


def _max(x: np.ndarray) -> float:
    return float(np.max(x, initial=0.0))


def kkt_report(
    theta: "LaplacianMatrix | np.ndarray", k_mat: np.ndarray, a: ConnectivityMask, problem: ClassLike
) -> KktReport:
    """Checks the optimality conditions of `min Tr(ΘK) − logdet Θ` over the Laplacians of class `problem` supported
    on `a`.

    With `G = K − Θ⁻¹` the gradient of the objective, the conditions read, in terms of the implied multipliers
    `ρᵢ = Gᵢᵢ` and `μᵢⱼ = −Gᵢⱼ + (ρᵢ + ρⱼ)/2`:

    - GGL: `ρ = 0`; `μᵢⱼ ≥ 0` and `μᵢⱼ Θᵢⱼ = 0` on permitted edges.
    - DDGL: additionally `ρᵢ ≥ 0` and `ρᵢ (Θ1)ᵢ = 0`.
    - CGL: `ρ` is free. Here `Θ` and `K` are replaced by `Θ + J` and `K + J`, with `J = 11ᵀ/n` (or, if `a` is
        disconnected, the average over each connected component of `a`).

    Entries outside the mask have free multipliers and contribute only to feasibility.

    **Arguments:**

    - `theta`: the candidate solution.
    - `k_mat`: `K = S + H`.
    - `a`: the connectivity mask.
    - `problem`: the Laplacian class optimised over.

    **Returns:**

    A `KktReport`.
    """
    problem = LaplacianClass.parse(problem)
    theta = theta.theta if isinstance(theta, LaplacianMatrix) else as_symmetric(theta, "theta")
    k_mat = as_symmetric(k_mat, "k_mat")
    n = theta.shape[0]
    if k_mat.shape[0] != n or a.n != n:
        raise StructureError(f"Dimension mismatch: theta is {n}×{n}, K is {k_mat.shape}, mask is {a.n}×{a.n}.")

    if problem is LaplacianClass.CGL:
        shift = component_averaging(a.entries)
        c = inverse_or_none(theta + shift)
        if c is None:
            raise PositiveDefinitenessError("`Θ + J` is singular; the candidate is not a connected CGL on this mask.")
        g = k_mat + shift - c
    else:
        c = inverse_or_none(theta)
        if c is None:
            raise PositiveDefinitenessError("`Θ` is singular or indefinite.")
        g = k_mat - c

    permitted = a.entries.astype(bool)
    forbidden = ~permitted
    np.fill_diagonal(forbidden, False)
    row_sums = theta.sum(axis=1)

    if problem is LaplacianClass.GGL:
        rho = np.zeros(n)
        stationarity = [np.abs(np.diag(g))]
    elif problem is LaplacianClass.DDGL:
        rho = np.diag(g).copy()
        stationarity = [np.maximum(0.0, -rho)]
    else:
        rho = np.diag(g).copy()
        stationarity = []
    mu = np.where(permitted, -g + 0.5 * (rho[:, None] + rho[None, :]), 0.0)
    stationarity.append(np.maximum(0.0, -mu[permitted]))

    complementarity = [np.abs(mu[permitted] * theta[permitted])]
    if problem is LaplacianClass.DDGL:
        complementarity.append(np.abs(rho * row_sums))

    feasibility = [np.maximum(0.0, theta[permitted]), np.abs(theta[forbidden])]
    if problem is LaplacianClass.DDGL:
        feasibility.append(np.maximum(0.0, -row_sums))
    elif problem is LaplacianClass.CGL:
        feasibility.append(np.abs(row_sums))
    smallest, _ = extreme_eigenvalues(theta)
    feasibility.append(np.array([max(0.0, -smallest)]))

    return KktReport(
        max_stationarity_residual=max(_max(x) for x in stationarity),
        max_complementarity_residual=max(_max(x) for x in complementarity),
        max_feasibility_residual=max(_max(x) for x in feasibility),
        edge_multipliers=mu,
        vertex_multipliers=rho,
    )
