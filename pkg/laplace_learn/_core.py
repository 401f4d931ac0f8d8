import dataclasses
import enum
from typing import Literal, TypeAlias

import numpy as np

from ._utils import (
    FEASIBILITY_TOL,
    SYMMETRY_TOL,
    extreme_eigenvalues,
    symmetrize,
    symmetry_defect,
)


#
# Errors
#


class StructureError(ValueError):
    """Raised on malformed input: non-symmetric or non-square matrices, mismatched dimensions, bad indices."""


class PositiveDefinitenessError(ArithmeticError):
    """Raised when an update would leave (or has left) the cone of positive definite matrices."""


StructureError.__module__ = "laplace_learn"
PositiveDefinitenessError.__module__ = "laplace_learn"


#
# Laplacian classes
#


class LaplacianClass(enum.Enum):
    """The three nested classes of graph Laplacians: `CGL ⊂ DDGL ⊂ GGL`."""

    GGL = "ggl"
    DDGL = "ddgl"
    CGL = "cgl"

    @classmethod
    def parse(cls, value: "str | LaplacianClass") -> "LaplacianClass":
        if isinstance(value, LaplacianClass):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise StructureError(f"Unknown Laplacian class {value!r}; expected one of 'ggl', 'ddgl', 'cgl'.") from None

    def __str__(self) -> str:
        return self.name


ClassLike: TypeAlias = LaplacianClass | Literal["ggl", "ddgl", "cgl", "GGL", "DDGL", "CGL"]


def as_square(m, name: str) -> np.ndarray:
    """Converts `m` to a float64 square matrix, raising `StructureError` otherwise."""
    out = np.array(m, dtype=np.float64)
    if out.ndim != 2 or out.shape[0] != out.shape[1]:
        raise StructureError(f"`{name}` must be a square matrix, got shape {out.shape}.")
    if not np.all(np.isfinite(out)):
        raise StructureError(f"`{name}` has non-finite entries.")
    return out


def as_symmetric(m, name: str, tol: float = SYMMETRY_TOL) -> np.ndarray:
    out = as_square(m, name)
    defect = symmetry_defect(out)
    if defect > tol:
        raise StructureError(f"`{name}` is not symmetric (max relative asymmetry {defect:.3g} > {tol:.3g}).")
    return out


def _frozen(m: np.ndarray) -> np.ndarray:
    m.setflags(write=False)
    return m


def _check_dimension(n: int, m: np.ndarray, name: str):
    if m.shape[0] != n:
        raise StructureError(f"`{name}` has dimension {m.shape[0]}, expected {n}.")


#
# Domain types
#


@dataclasses.dataclass(frozen=True, eq=False)
class ConnectivityMask:
    """Symmetric binary matrix `A` with zero diagonal; `A[i, j] = 1` permits an edge between `i` and `j`."""

    entries: np.ndarray

    def __post_init__(self):
        entries = as_square(self.entries, "mask")
        if not np.all((entries == 0) | (entries == 1)):
            raise StructureError("Connectivity mask entries must be 0 or 1.")
        if np.any(np.diag(entries) != 0):
            raise StructureError("Connectivity mask must have a zero diagonal.")
        if np.any(entries != entries.T):
            raise StructureError("Connectivity mask must be symmetric.")
        object.__setattr__(self, "entries", _frozen(entries))

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    @classmethod
    def full(cls, n: int) -> "ConnectivityMask":
        """`A_full = 11ᵀ − I`: every pair may be connected."""
        return cls(np.ones((n, n)) - np.eye(n))

    @classmethod
    def empty(cls, n: int) -> "ConnectivityMask":
        return cls(np.zeros((n, n)))

    @classmethod
    def from_matrix(cls, theta: np.ndarray, edge_tol: float = 0.0) -> "ConnectivityMask":
        """The support of the off-diagonal entries of `theta` below `-edge_tol`."""
        theta = np.asarray(theta)
        entries = (theta < -edge_tol).astype(np.float64)
        np.fill_diagonal(entries, 0)
        return cls(np.maximum(entries, entries.T))

    def neighbours(self, u: int) -> np.ndarray:
        return np.flatnonzero(self.entries[u])

    def edges(self) -> np.ndarray:
        """Upper-triangular edges as an `(m, 2)` integer array, in row-major order."""
        rows, cols = np.nonzero(np.triu(self.entries, k=1))
        return np.stack([rows, cols], axis=1)

    @property
    def edge_count(self) -> int:
        return int(np.count_nonzero(np.triu(self.entries, k=1)))


@dataclasses.dataclass(frozen=True, eq=False)
class LaplacianMatrix:
    """A dense symmetric matrix `Θ` tagged with the Laplacian class it belongs to.

    `Θ = D − W + V`, with edge weights `W[i, j] = −Θ[i, j]`, degrees `D = diag(W1)` and vertex weights
    `V = diag(Θ1)`. Construction checks membership of `kind` at tolerance `1e-9` and raises `StructureError`
    otherwise.
    """

    theta: np.ndarray
    kind: LaplacianClass

    def __post_init__(self):
        theta = as_symmetric(self.theta, "theta")
        kind = LaplacianClass.parse(self.kind)
        verdict = validate_class(theta)
        if not verdict.satisfies(kind):
            raise StructureError(f"Matrix is not a {kind} (violations: {verdict.describe()}).")
        object.__setattr__(self, "theta", _frozen(theta))
        object.__setattr__(self, "kind", kind)

    @property
    def n(self) -> int:
        return self.theta.shape[0]

    @property
    def weights(self) -> np.ndarray:
        w = -self.theta.copy()
        np.fill_diagonal(w, 0)
        return w

    @property
    def degrees(self) -> np.ndarray:
        return np.diag(self.weights.sum(axis=1))

    @property
    def vertex_weights(self) -> np.ndarray:
        return self.theta.sum(axis=1)

    @property
    def mask(self) -> ConnectivityMask:
        return ConnectivityMask.from_matrix(self.theta)


@dataclasses.dataclass(frozen=True, eq=False)
class StatisticMatrix:
    """The data statistic `S`: a sample covariance or kernel matrix, symmetric positive semidefinite."""

    s: np.ndarray
    sample_count: None | int = None

    def __post_init__(self):
        s = as_symmetric(self.s, "statistic")
        if s.shape[0] > 0:
            smallest, largest = extreme_eigenvalues(s)
            if smallest < -FEASIBILITY_TOL * max(largest, 0.0):
                raise StructureError(f"Statistic is not positive semidefinite (smallest eigenvalue {smallest:.3g}).")
        if self.sample_count is not None and self.sample_count < 1:
            raise StructureError("`sample_count` must be at least 1.")
        object.__setattr__(self, "s", _frozen(s))

    @property
    def n(self) -> int:
        return self.s.shape[0]

    @property
    def max_off_diagonal(self) -> float:
        off = np.abs(self.s).copy()
        np.fill_diagonal(off, 0)
        return float(off.max(initial=0.0))


RegularizationForm: TypeAlias = Literal["l1", "l1-off", "custom"]


@dataclasses.dataclass(frozen=True, eq=False)
class RegularizationMatrix:
    """The regularization matrix `H`; the objective is `Tr(Θ(S + H)) − logdet Θ`.

    Use [`laplace_learn.regularization`][] to build the standard forms.
    """

    h: np.ndarray
    alpha: None | float = None
    form: RegularizationForm = "custom"

    def __post_init__(self):
        h = as_symmetric(self.h, "regularization")
        if self.form not in ("l1", "l1-off", "custom"):
            raise StructureError(f"Unknown regularization form {self.form!r}.")
        if self.alpha is not None and self.alpha < 0:
            raise StructureError(f"Regularization parameter must be nonnegative, got alpha={self.alpha}.")
        object.__setattr__(self, "h", _frozen(h))

    @property
    def n(self) -> int:
        return self.h.shape[0]


def regularization(n: int, alpha: float, form: RegularizationForm = "l1") -> RegularizationMatrix:
    """Standard ℓ1 regularization matrices.

    **Arguments:**

    - `n`: the dimension.
    - `alpha`: the regularization parameter, `alpha >= 0`.
    - `form`: either
        - `"l1"`: `H = α(2I − 11ᵀ)`, so that `Tr(ΘH) = α‖Θ‖₁` for any Laplacian `Θ`; or
        - `"l1-off"`: `H = α(I − 11ᵀ)`, so that `Tr(ΘH) = α‖Θ‖₁,off`, penalising only the off-diagonal entries.

    **Returns:**

    A `RegularizationMatrix`.
    """
    if alpha < 0:
        raise StructureError(f"Regularization parameter must be nonnegative, got alpha={alpha}.")
    ones = np.ones((n, n))
    if form == "l1":
        h = alpha * (2 * np.eye(n) - ones)
    elif form == "l1-off":
        h = alpha * (np.eye(n) - ones)
    else:
        raise StructureError(f"`regularization` builds the 'l1' and 'l1-off' forms, got {form!r}.")
    return RegularizationMatrix(h, alpha=float(alpha), form=form)


#
# Validation
#


@dataclasses.dataclass(frozen=True)
class ClassVerdict:
    """Result of [`laplace_learn.validate_class`][].

    - `kind`: the strictest class satisfied, or `None`.
    - `violations`: the largest violation of each condition (zero when satisfied exactly):
        - `"psd"`: `max(0, −λ_min)`;
        - `"off_diagonal"`: the largest positive off-diagonal entry;
        - `"row_sum_nonnegative"`: the most negative row sum, negated;
        - `"row_sum_zero"`: the largest absolute row sum.
    """

    kind: None | LaplacianClass
    violations: dict[str, float]

    def satisfies(self, kind: LaplacianClass) -> bool:
        order = [LaplacianClass.CGL, LaplacianClass.DDGL, LaplacianClass.GGL]
        return self.kind is not None and order.index(self.kind) <= order.index(kind)

    def describe(self) -> str:
        return ", ".join(f"{key}={value:.3g}" for key, value in self.violations.items())


def validate_class(m: "LaplacianMatrix | np.ndarray", tol: float = FEASIBILITY_TOL) -> ClassVerdict:
    """Finds the strictest Laplacian class that `m` belongs to, within `tol`.

    **Arguments:**

    - `m`: a symmetric matrix (or a `LaplacianMatrix`, in which case its tag is ignored).
    - `tol`: the tolerance. The positive semidefiniteness check is relative to the largest eigenvalue.

    **Returns:**

    A `ClassVerdict`.
    """
    theta = m.theta if isinstance(m, LaplacianMatrix) else as_symmetric(m, "theta")
    theta = symmetrize(theta)
    n = theta.shape[0]
    smallest, largest = extreme_eigenvalues(theta) if n > 0 else (0.0, 0.0)
    off = theta.copy()
    np.fill_diagonal(off, -np.inf)
    row_sums = theta.sum(axis=1)
    violations = {
        "psd": max(0.0, -smallest),
        "off_diagonal": max(0.0, float(off.max(initial=-np.inf))) if n > 1 else 0.0,
        "row_sum_nonnegative": max(0.0, float(-row_sums.min(initial=0.0))),
        "row_sum_zero": float(np.abs(row_sums).max(initial=0.0)),
    }
    if violations["psd"] > tol * max(1.0, abs(largest)) or violations["off_diagonal"] > tol:
        kind = None
    elif violations["row_sum_zero"] <= tol:
        kind = LaplacianClass.CGL
    elif violations["row_sum_nonnegative"] <= tol:
        kind = LaplacianClass.DDGL
    else:
        kind = LaplacianClass.GGL
    return ClassVerdict(kind, violations)


#
# Objective inputs
#


def build_k(s: "StatisticMatrix | np.ndarray", h: "None | RegularizationMatrix | np.ndarray" = None) -> np.ndarray:
    """`K = S + H`. With `h=None` this is `S` itself."""
    s_mat = s.s if isinstance(s, StatisticMatrix) else as_symmetric(s, "statistic")
    if h is None:
        return np.array(s_mat, dtype=np.float64)
    h_mat = h.h if isinstance(h, RegularizationMatrix) else as_symmetric(h, "regularization")
    if h_mat.shape != s_mat.shape:
        raise StructureError(f"Statistic has shape {s_mat.shape} but regularization has shape {h_mat.shape}.")
    return s_mat + h_mat


StatisticMode: TypeAlias = Literal["gaussian", "binary", "rbf"]


def build_statistic(x, mode: StatisticMode = "gaussian", bandwidth: None | float = None) -> StatisticMatrix:
    """Builds a data statistic from a data matrix.

    **Arguments:**

    - `x`: the data matrix. For `"gaussian"` and `"rbf"` this is `k × n`: one row per sample, one column per vertex.
        For `"binary"` this is `n × d`: one row per vertex, one column per binary feature.
    - `mode`:
        - `"gaussian"`: the sample covariance `(1/k) XᵀX` of the column-centred data.
        - `"binary"`: `(1/d) XXᵀ + I/3` of the row-centred data; the `I/3` term is the variance of a uniform
            prior on `[0, 1]`, keeping the statistic well conditioned.
        - `"rbf"`: the Gaussian kernel `exp(−‖xᵢ − xⱼ‖² / 2σ²)` between the vertex signals (columns of `x`).
    - `bandwidth`: `σ` for `"rbf"`; defaults to the median pairwise distance between vertex signals.

    **Returns:**

    A `StatisticMatrix` with `sample_count` set to the number of samples (or features).
    """
    data = np.array(x, dtype=np.float64)
    if data.ndim != 2:
        raise StructureError(f"Data must be a matrix, got shape {data.shape}.")
    if data.shape[0] == 0 or data.shape[1] == 0:
        raise StructureError(f"Data must have at least one sample and one vertex, got shape {data.shape}.")
    if not np.all(np.isfinite(data)):
        raise StructureError("Data has non-finite entries.")
    if mode == "gaussian":
        k = data.shape[0]
        centred = data - data.mean(axis=0, keepdims=True)
        s = centred.T @ centred / k
        return StatisticMatrix(symmetrize(s), sample_count=k)
    elif mode == "binary":
        n, d = data.shape
        centred = data - data.mean(axis=1, keepdims=True)
        s = centred @ centred.T / d + np.eye(n) / 3
        return StatisticMatrix(symmetrize(s), sample_count=d)
    elif mode == "rbf":
        signals = data.T
        squared = np.sum((signals[:, None, :] - signals[None, :, :]) ** 2, axis=-1)
        if bandwidth is None:
            distances = np.sqrt(squared[np.triu_indices_from(squared, k=1)])
            bandwidth = float(np.median(distances)) if distances.size > 0 else 1.0
            if bandwidth == 0:
                bandwidth = 1.0
        if bandwidth <= 0:
            raise StructureError(f"RBF bandwidth must be positive, got {bandwidth}.")
        s = np.exp(-squared / (2 * bandwidth**2))
        return StatisticMatrix(symmetrize(s), sample_count=data.shape[0])
    else:
        raise StructureError(f"Unknown statistic mode {mode!r}; expected 'gaussian', 'binary' or 'rbf'.")
