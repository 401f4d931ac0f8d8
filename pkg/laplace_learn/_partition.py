import dataclasses

import numpy as np

from ._core import PositiveDefinitenessError, StructureError


#
# Row/column partitions of a symmetric matrix.
#
# For a pivot `u`, a symmetric `M` is viewed as
#
#     [ block   vector ]
#     [ vectorᵀ scalar ]
#
# after moving row/column `u` last. We never form the permutation: `others(n, u)` lists the remaining indices in
# their original order and everything is done with fancy indexing.
#


@dataclasses.dataclass(frozen=True, eq=False)
class RowPartition:
    """The partition of a symmetric `n × n` matrix around pivot `u`.

    - `u`: the pivot index (zero-based).
    - `block`: the `(n−1) × (n−1)` submatrix with row and column `u` removed.
    - `vector`: column `u` with entry `u` removed.
    - `scalar`: the diagonal entry at `u`.
    """

    u: int
    block: np.ndarray
    vector: np.ndarray
    scalar: float

    @property
    def n(self) -> int:
        return self.vector.shape[0] + 1


def others(n: int, u: int) -> np.ndarray:
    return np.concatenate([np.arange(u), np.arange(u + 1, n)])


def partition(m: np.ndarray, u: int) -> RowPartition:
    """Partitions the symmetric `m` around the zero-based pivot `u`. Returns copies."""
    n = m.shape[0]
    if not 0 <= u < n:
        raise StructureError(f"Pivot index {u} is out of range for a {n}×{n} matrix.")
    idx = others(n, u)
    return RowPartition(u=u, block=m[np.ix_(idx, idx)], vector=m[idx, u].copy(), scalar=float(m[u, u]))


def assign(m: np.ndarray, p: RowPartition):
    """Writes the partition `p` into `m` in place."""
    idx = others(m.shape[0], p.u)
    m[np.ix_(idx, idx)] = p.block
    m[idx, p.u] = p.vector
    m[p.u, idx] = p.vector
    m[p.u, p.u] = p.scalar


def reassemble(p: RowPartition) -> np.ndarray:
    """Inverse of [`laplace_learn.partition`][]."""
    m = np.empty((p.n, p.n))
    assign(m, p)
    return m


def extract_theta_u_inverse(c: RowPartition) -> np.ndarray:
    """Given the partition of `C = Θ⁻¹` around `u`, returns the inverse of the corresponding block of `Θ`:
    `Cᵤ − cᵤcᵤᵀ/cᵤᵤ`. No inversion is performed.
    """
    if c.scalar <= 0:
        raise PositiveDefinitenessError(f"Diagonal entry {c.u} of the tracked inverse is not positive ({c.scalar}).")
    return c.block - np.outer(c.vector, c.vector) / c.scalar


def block_inverse(theta_block_inverse: np.ndarray, vector: np.ndarray, scalar: float, u: int) -> RowPartition:
    """Computes the partition of `C = Θ⁻¹` around `u` after row/column `u` of `Θ` has been replaced.

    **Arguments:**

    - `theta_block_inverse`: `Θᵤ⁻¹`, the inverse of the unchanged block.
    - `vector`: the new off-diagonal column `θᵤ`.
    - `scalar`: the new diagonal entry `θᵤᵤ`.
    - `u`: the pivot index.

    **Returns:**

    The `RowPartition` of the new `C`.

    Raises `PositiveDefinitenessError` if the Schur complement `θᵤᵤ − θᵤᵀΘᵤ⁻¹θᵤ` is not positive: the new `Θ` would
    not be positive definite.
    """
    projected = theta_block_inverse @ vector
    schur = scalar - float(vector @ projected)
    if not schur > 0:
        raise PositiveDefinitenessError(f"Schur complement at row {u} is not positive ({schur:.3g}).")
    c_scalar = 1.0 / schur
    c_vector = -projected * c_scalar
    c_block = theta_block_inverse + np.outer(c_vector, c_vector) / c_scalar
    return RowPartition(u=u, block=c_block, vector=c_vector, scalar=c_scalar)


def rank_one_update(c: np.ndarray, b: np.ndarray, nu: float) -> np.ndarray:
    """Sherman–Morrison: given symmetric `C = Θ⁻¹`, returns `(Θ + ν bbᵀ)⁻¹ = C − ν Cb bᵀC / (1 + ν bᵀCb)`."""
    cb = c @ b
    denominator = 1.0 + nu * float(b @ cb)
    if not denominator > 0:
        raise PositiveDefinitenessError(f"Rank-one update has nonpositive denominator {denominator:.3g}.")
    return c - (nu / denominator) * np.outer(cb, cb)


def diagonal_rank_one_update(c: np.ndarray, i: int, nu: float) -> np.ndarray:
    """`(Θ + ν δᵢδᵢᵀ)⁻¹` from `C = Θ⁻¹`."""
    n = c.shape[0]
    if not 0 <= i < n:
        raise StructureError(f"Index {i} is out of range for a {n}×{n} matrix.")
    if nu == 0:
        return c.copy()
    column = c[:, i]
    denominator = 1.0 + nu * float(c[i, i])
    if not denominator > 0:
        raise PositiveDefinitenessError(f"Rank-one update at {i} has nonpositive denominator {denominator:.3g}.")
    return c - (nu / denominator) * np.outer(column, column)


def low_rank_update(c: np.ndarray, cb: np.ndarray, w: np.ndarray) -> np.ndarray:
    """`(Θ + B X Bᵀ)⁻¹ = C − CB W BᵀC` from `C = Θ⁻¹`, given `CB` and `W = (X⁻¹ + BᵀCB)⁻¹`.

    `W` is passed as `X − X(M⁻¹ + X)⁻¹X` with `M = BᵀCB`, which stays defined when some entries of `X` are zero.
    """
    if cb.shape != (c.shape[0], w.shape[0]) or w.shape[0] != w.shape[1]:
        raise StructureError(f"Incompatible shapes: C {c.shape}, CB {cb.shape}, W {w.shape}.")
    return c - cb @ w @ cb.T
