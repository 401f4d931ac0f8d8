import csv
import importlib.metadata
import json
import math
import pathlib
from collections.abc import Iterable, Mapping, Sequence

import numpy as np

from ._core import ConnectivityMask, LaplacianMatrix, StructureError


def version() -> str:
    try:
        return importlib.metadata.version("laplace-learn")
    except importlib.metadata.PackageNotFoundError:
        return "unknown"


def read_matrix(path: "str | pathlib.Path") -> np.ndarray:
    """Reads a matrix from headerless comma-separated text, one row per line."""
    try:
        out = np.loadtxt(path, delimiter=",", ndmin=2, dtype=np.float64)
    except ValueError as e:
        raise StructureError(f"Could not parse matrix file {str(path)!r}: {e}") from None
    return out


def write_matrix(path: "str | pathlib.Path", m: np.ndarray):
    """Writes a matrix as headerless comma-separated text. Values round-trip exactly."""
    np.savetxt(path, np.atleast_2d(np.asarray(m, dtype=np.float64)), delimiter=",", fmt="%.17g")


def read_mask(path: "str | pathlib.Path") -> ConnectivityMask:
    return ConnectivityMask(read_matrix(path))


def edge_list(l: LaplacianMatrix) -> list[tuple[int, int, float]]:
    """The edges of `l` as `(i, j, weight)` triples with `i < j`, one-based."""
    rows, cols = np.nonzero(np.triu(l.weights, k=1) > 0)
    return [(int(i) + 1, int(j) + 1, float(l.weights[i, j])) for i, j in zip(rows, cols)]


def write_edge_list(path: "str | pathlib.Path", l: LaplacianMatrix):
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        for i, j, weight in edge_list(l):
            writer.writerow([i, j, repr(weight)])


def read_edge_list(path: "str | pathlib.Path", n: int, vertex_weights: None | np.ndarray = None) -> np.ndarray:
    """Rebuilds `Θ = D − W + V` from an edge list written by [`laplace_learn.write_edge_list`][]."""
    weights = np.zeros((n, n))
    with open(path, newline="") as f:
        for line, row in enumerate(csv.reader(f), start=1):
            if not row:
                continue
            try:
                i, j, weight = int(row[0]) - 1, int(row[1]) - 1, float(row[2])
            except (IndexError, ValueError):
                raise StructureError(f"{str(path)!r}, line {line}: expected 'i,j,weight', got {row!r}.") from None
            if not (0 <= i < n and 0 <= j < n) or i == j:
                raise StructureError(f"{str(path)!r}, line {line}: invalid edge ({i + 1}, {j + 1}) for n={n}.")
            weights[i, j] = weights[j, i] = weight
    theta = np.diag(weights.sum(axis=1)) - weights
    if vertex_weights is not None:
        theta += np.diag(vertex_weights)
    return theta


def _jsonable(value):
    if isinstance(value, Mapping):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, np.generic):
        return _jsonable(value.item())
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def write_json(path: "str | pathlib.Path", payload: Mapping):
    with open(path, "w") as f:
        json.dump(_jsonable(payload), f, indent=2, sort_keys=True)
        f.write("\n")


def write_rows(path: "str | pathlib.Path", rows: Iterable[Mapping], fieldnames: Sequence[str]):
    with open(path, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=list(fieldnames))
        writer.writeheader()
        for row in rows:
            writer.writerow({key: _jsonable(row[key]) for key in fieldnames})
