import dataclasses
import math
from typing import Literal, TypeAlias

import numpy as np
import scipy.linalg

from ._cgl import DisconnectedGraphError
from ._core import (
    ConnectivityMask,
    LaplacianClass,
    LaplacianMatrix,
    StructureError,
    as_symmetric,
)
from ._utils import FEASIBILITY_TOL, connected_components, extreme_eigenvalues


Topology: TypeAlias = Literal["grid", "er", "modular"]
SeedLike: TypeAlias = None | int | np.random.Generator

_MAX_REDRAWS = 100


def substream(seed: int, *key: int) -> np.random.Generator:
    """The random stream for `key` (e.g. `(trial,)` or `(trial, sample_size_index)`) under a root `seed`.

    Streams are PCG64 generators seeded by `SeedSequence(seed, spawn_key=key)`: independent of each other, of the
    order in which they are created, and of the machine.
    """
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=tuple(key))))


def as_generator(seed: SeedLike) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.PCG64(seed))


@dataclasses.dataclass(frozen=True)
class GraphSpec:
    """A random ground-truth graph model.

    - `topology`: `"grid"` (a `√n × √n` lattice, four-nearest-neighbour connectivity), `"er"` (Erdős–Rényi with edge
        probability `p`) or `"modular"` (`modules` equal-size modules, edge probability `p2` within a module and `p1`
        across modules).
    - `n`: the number of vertices.
    - `edge_weights`: edge weights are drawn uniformly from this interval.
    - `vertex_weights`: `"uniform"` draws vertex weights from `edge_weights` as well, giving a DDGL ground truth;
        `"zero"` gives a CGL ground truth.
    - `seed`: the seed used when no generator is passed to [`laplace_learn.generate_graph`][].
    """

    topology: Topology
    n: int
    p: None | float = None
    p1: None | float = None
    p2: None | float = None
    modules: int = 4
    edge_weights: tuple[float, float] = (0.1, 3.0)
    vertex_weights: Literal["uniform", "zero"] = "uniform"
    seed: int = 0

    def __post_init__(self):
        if self.n < 2:
            raise StructureError(f"A graph needs at least two vertices, got n={self.n}.")
        if self.topology == "grid":
            if math.isqrt(self.n) ** 2 != self.n:
                raise StructureError(f"Grid graphs need a perfect square number of vertices, got n={self.n}.")
        elif self.topology == "er":
            if self.p is None:
                raise StructureError("Erdős–Rényi graphs need an edge probability `p`.")
        elif self.topology == "modular":
            if self.p1 is None or self.p2 is None:
                raise StructureError("Modular graphs need edge probabilities `p1` (across) and `p2` (within).")
            if not 1 <= self.modules <= self.n:
                raise StructureError(f"Cannot split {self.n} vertices into {self.modules} modules.")
        else:
            raise StructureError(f"Unknown topology {self.topology!r}; expected 'grid', 'er' or 'modular'.")
        for name in ("p", "p1", "p2"):
            value = getattr(self, name)
            if value is not None and not 0 <= value <= 1:
                raise StructureError(f"`{name}` must be a probability, got {value}.")
        low, high = self.edge_weights
        if not 0 < low <= high:
            raise StructureError(f"Edge weight interval must satisfy 0 < low <= high, got {self.edge_weights}.")
        if self.vertex_weights not in ("uniform", "zero"):
            raise StructureError(f"`vertex_weights` must be 'uniform' or 'zero', got {self.vertex_weights!r}.")

    @property
    def kind(self) -> LaplacianClass:
        return LaplacianClass.DDGL if self.vertex_weights == "uniform" else LaplacianClass.CGL

    @property
    def label(self) -> str:
        if self.topology == "grid":
            return f"grid({self.n})"
        elif self.topology == "er":
            return f"er({self.n},{self.p})"
        else:
            return f"modular({self.n},{self.p1},{self.p2})"

    def as_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["edge_weights"] = list(self.edge_weights)
        out["class"] = self.kind.value
        return out


def _grid_connectivity(n: int) -> np.ndarray:
    side = math.isqrt(n)
    entries = np.zeros((n, n))
    for row in range(side):
        for col in range(side):
            v = row * side + col
            if col + 1 < side:
                entries[v, v + 1] = entries[v + 1, v] = 1
            if row + 1 < side:
                entries[v, v + side] = entries[v + side, v] = 1
    return entries


def _random_connectivity(probabilities: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    draws = rng.random(probabilities.shape) < probabilities
    upper = np.triu(draws, k=1).astype(np.float64)
    return upper + upper.T


def _edge_probabilities(spec: GraphSpec) -> np.ndarray:
    if spec.topology == "er":
        assert spec.p is not None
        return np.full((spec.n, spec.n), spec.p)
    assert spec.p1 is not None and spec.p2 is not None
    labels = np.concatenate(
        [np.full(len(module), index) for index, module in enumerate(np.array_split(np.arange(spec.n), spec.modules))]
    )
    return np.where(labels[:, None] == labels[None, :], spec.p2, spec.p1)


def generate_graph(spec: GraphSpec, seed: SeedLike = None) -> tuple[LaplacianMatrix, ConnectivityMask]:
    """Draws a ground-truth Laplacian and its connectivity mask.

    **Arguments:**

    - `spec`: the graph model.
    - `seed`: an integer seed or a `numpy.random.Generator`; defaults to `spec.seed`.

    **Returns:**

    A `(LaplacianMatrix, ConnectivityMask)` pair. The Laplacian is a DDGL or a CGL, per `spec.vertex_weights`.

    Random CGL draws that come out disconnected are redrawn, up to 100 times, after which `DisconnectedGraphError` is
    raised.
    """
    rng = as_generator(spec.seed if seed is None else seed)
    if spec.topology == "grid":
        entries = _grid_connectivity(spec.n)
    else:
        probabilities = _edge_probabilities(spec)
        for _ in range(_MAX_REDRAWS):
            entries = _random_connectivity(probabilities, rng)
            if spec.kind is LaplacianClass.DDGL or connected_components(entries) == 1:
                break
        else:
            raise DisconnectedGraphError(
                f"Could not draw a connected {spec.label} graph in {_MAX_REDRAWS} attempts; increase the edge "
                "probability."
            )
    mask = ConnectivityMask(entries)
    low, high = spec.edge_weights
    rows, cols = np.nonzero(np.triu(entries, k=1))
    weights = np.zeros((spec.n, spec.n))
    weights[rows, cols] = rng.uniform(low, high, size=rows.size)
    weights = weights + weights.T
    theta = np.diag(weights.sum(axis=1)) - weights
    if spec.vertex_weights == "uniform":
        theta += np.diag(rng.uniform(low, high, size=spec.n))
    return LaplacianMatrix(theta, spec.kind), mask


def sample_gmrf(l: "LaplacianMatrix | np.ndarray", k: int, seed: SeedLike = None) -> np.ndarray:
    """Draws `k` samples from the zero-mean Gaussian with precision `l`, i.e. covariance `l⁺`.

    Uses the symmetric eigendecomposition `l = UΛUᵀ`: samples are `U Λ^(†/2) z` with `z ~ N(0, I)`, where eigenvalues
    below `1e-10` times the largest are treated as zero. For a connected CGL this removes exactly the constant
    direction, so every sample sums to zero.

    **Returns:**

    A `k × n` data matrix, one sample per row.
    """
    theta = l.theta if isinstance(l, LaplacianMatrix) else as_symmetric(l, "l")
    if k < 1:
        raise StructureError(f"Need at least one sample, got k={k}.")
    eigenvalues, eigenvectors = scipy.linalg.eigh(theta)
    largest = float(eigenvalues[-1])
    if eigenvalues[0] < -FEASIBILITY_TOL * max(1.0, abs(largest)):
        raise StructureError(f"Precision matrix is indefinite (smallest eigenvalue {eigenvalues[0]:.3g}).")
    keep = eigenvalues > 1e-10 * largest
    scales = np.zeros_like(eigenvalues)
    scales[keep] = 1.0 / np.sqrt(eigenvalues[keep])
    root = eigenvectors * scales
    z = as_generator(seed).standard_normal((k, theta.shape[0]))
    return z @ root.T


def laplacian_quadratic_form(l: "LaplacianMatrix | np.ndarray", x: np.ndarray) -> float:
    """`xᵀLx`."""
    theta = l.theta if isinstance(l, LaplacianMatrix) else np.asarray(l)
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (theta.shape[0],):
        raise StructureError(f"Vector has shape {x.shape}, expected ({theta.shape[0]},).")
    return float(x @ theta @ x)


def edge_quadratic_form(l: LaplacianMatrix, x: np.ndarray) -> float:
    """`xᵀLx` evaluated as `Σᵢ vᵢxᵢ² + Σ_{i<j} wᵢⱼ(xᵢ − xⱼ)²`."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (l.n,):
        raise StructureError(f"Vector has shape {x.shape}, expected ({l.n},).")
    rows, cols = np.triu_indices(l.n, k=1)
    edge_terms = l.weights[rows, cols] * (x[rows] - x[cols]) ** 2
    return float(np.sum(l.vertex_weights * x**2) + np.sum(edge_terms))


def perturb_connectivity(a: ConnectivityMask, fraction: float, seed: SeedLike = None) -> ConnectivityMask:
    """Moves a `fraction` of the edges of `a` to randomly chosen non-edges.

    `round(fraction · #edges)` edges are removed and the same number of non-adjacent pairs are connected, so the
    edge count is preserved.
    """
    if not 0 <= fraction <= 1:
        raise StructureError(f"`fraction` must lie in [0, 1], got {fraction}.")
    rows, cols = np.triu_indices(a.n, k=1)
    present = a.entries[rows, cols] == 1
    ones = np.flatnonzero(present)
    zeros = np.flatnonzero(~present)
    swaps = int(round(fraction * ones.size))
    if swaps > ones.size or swaps > zeros.size:
        raise StructureError(
            f"Cannot exchange {swaps} edges: the mask has {ones.size} edges and {zeros.size} non-edges."
        )
    rng = as_generator(seed)
    removed = rng.choice(ones, size=swaps, replace=False)
    added = rng.choice(zeros, size=swaps, replace=False)
    upper = present.astype(np.float64)
    upper[removed] = 0
    upper[added] = 1
    entries = np.zeros((a.n, a.n))
    entries[rows, cols] = upper
    return ConnectivityMask(entries + entries.T)


def mismatched_precision(l: LaplacianMatrix, fraction: float, seed: SeedLike = None) -> np.ndarray:
    """A precision matrix that is *not* a graph Laplacian, for model-mismatch experiments.

    A `fraction` of the edges of `l` have their sign flipped (positive partial correlations), then the diagonal is
    raised just enough for the smallest eigenvalue to return to that of `l` (or to `1%` of the largest, for singular
    `l`).
    """
    if not 0 <= fraction <= 1:
        raise StructureError(f"`fraction` must lie in [0, 1], got {fraction}.")
    theta = np.array(l.theta)
    rows, cols = np.nonzero(np.triu(theta < 0, k=1))
    flips = int(round(fraction * rows.size))
    chosen = as_generator(seed).choice(rows.size, size=flips, replace=False)
    theta[rows[chosen], cols[chosen]] *= -1
    theta[cols[chosen], rows[chosen]] *= -1
    smallest, largest = extreme_eigenvalues(l.theta)
    floor = max(smallest, 1e-2 * largest)
    new_smallest, _ = extreme_eigenvalues(theta)
    if new_smallest < floor:
        theta += (floor - new_smallest) * np.eye(l.n)
    return theta
