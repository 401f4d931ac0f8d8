import numpy as np

import laplace_learn as ll


def random_spd(rng: np.random.Generator, n: int) -> np.ndarray:
    a = rng.standard_normal((n, n))
    return a @ a.T + n * np.eye(n)


def random_statistic(rng: np.random.Generator, n: int, k: None | int = None) -> ll.StatisticMatrix:
    return ll.build_statistic(rng.standard_normal((3 * n if k is None else k, n)))


def random_mask(rng: np.random.Generator, n: int, p: float = 0.5, connected: bool = False) -> ll.ConnectivityMask:
    upper = np.triu(rng.random((n, n)) < p, k=1).astype(np.float64)
    if connected:
        for i in range(n - 1):
            upper[i, i + 1] = 1
    return ll.ConnectivityMask(upper + upper.T)


def random_laplacian(rng: np.random.Generator, n: int, kind: str = "ddgl", p: float = 0.5) -> ll.LaplacianMatrix:
    mask = random_mask(rng, n, p, connected=True)
    weights = np.triu(rng.uniform(0.1, 3.0, size=(n, n)) * mask.entries, k=1)
    weights = weights + weights.T
    theta = np.diag(weights.sum(axis=1)) - weights
    if kind != "cgl":
        theta += np.diag(rng.uniform(0.1, 3.0, size=n))
    return ll.LaplacianMatrix(theta, kind)  # pyright: ignore[reportArgumentType]


def precise(kind: str, **kwargs) -> ll.EstimatorConfig:
    return ll.EstimatorConfig(target_class=kind, epsilon=1e-10, max_cycles=100_000, **kwargs)  # pyright: ignore


def assert_close(a: float, b: float, rtol: float):
    assert abs(a - b) <= rtol * max(1.0, abs(a), abs(b)), (a, b)
