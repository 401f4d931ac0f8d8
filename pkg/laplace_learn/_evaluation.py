import dataclasses
import logging
import math
import time
from collections.abc import Sequence

import numpy as np
import tinyio

from ._cgl import estimate_cgl
from ._core import (
    ClassLike,
    ConnectivityMask,
    LaplacianClass,
    RegularizationForm,
    RegularizationMatrix,
    StatisticMatrix,
    StructureError,
    build_statistic,
    regularization,
)
from ._descent import EstimationResult, EstimatorConfig
from ._ggl import as_statistic, estimate_ggl
from ._synthetic import GraphSpec, generate_graph, perturb_connectivity, sample_gmrf, substream


logger = logging.getLogger(__name__)

DEFAULT_K_OVER_N = (0.5, 1, 2, 5, 10, 30, 100, 250, 1000)


#
# Metrics
#


def relative_error(theta_hat: np.ndarray, theta_star: np.ndarray) -> float:
    """`‖Θ̂ − Θ*‖_F / ‖Θ*‖_F`."""
    theta_hat = np.asarray(theta_hat, dtype=np.float64)
    theta_star = np.asarray(theta_star, dtype=np.float64)
    if theta_hat.shape != theta_star.shape:
        raise StructureError(f"Shapes differ: {theta_hat.shape} vs {theta_star.shape}.")
    denominator = np.linalg.norm(theta_star)
    if denominator == 0:
        raise StructureError("Relative error is undefined for a zero ground truth.")
    return float(np.linalg.norm(theta_hat - theta_star) / denominator)


def f_score(theta_hat: np.ndarray, theta_star: np.ndarray, edge_tol: float = 1e-8) -> float:
    """F-score of edge recovery: `2tp / (2tp + fp + fn)`, where an edge is an off-diagonal entry below `−edge_tol`.

    Returns `1` when neither matrix has any edge.
    """
    theta_hat = np.asarray(theta_hat, dtype=np.float64)
    theta_star = np.asarray(theta_star, dtype=np.float64)
    if theta_hat.shape != theta_star.shape:
        raise StructureError(f"Shapes differ: {theta_hat.shape} vs {theta_star.shape}.")
    rows, cols = np.triu_indices(theta_hat.shape[0], k=1)
    found = theta_hat[rows, cols] < -edge_tol
    true = theta_star[rows, cols] < -edge_tol
    tp = int(np.sum(found & true))
    fp = int(np.sum(found & ~true))
    fn = int(np.sum(~found & true))
    if tp + fp + fn == 0:
        return 1.0
    return 2 * tp / (2 * tp + fp + fn)


def alpha_grid(s: "StatisticMatrix | np.ndarray", k: int) -> list[float]:
    """The regularization sweep `{0} ∪ {0.75ʳ · s_max · √(ln n / k) : r = 1, …, 14}`, ascending, without duplicates.

    `s_max` is the largest absolute off-diagonal entry of `s`.
    """
    s = as_statistic(s)
    if k < 1:
        raise StructureError(f"Sample count must be at least 1, got k={k}.")
    if s.n < 2:
        raise StructureError("The regularization grid needs at least two vertices.")
    scale = s.max_off_diagonal * math.sqrt(math.log(s.n) / k)
    return sorted({0.0} | {0.75**r * scale for r in range(1, 15)})


#
# Estimation entry points
#


def estimate(
    problem: ClassLike,
    s: "StatisticMatrix | np.ndarray",
    a: ConnectivityMask,
    h: None | RegularizationMatrix = None,
    cfg: None | EstimatorConfig = None,
    *,
    initial: None | EstimationResult = None,
    warn: bool = True,
) -> EstimationResult:
    """Estimates a Laplacian of class `problem` (`"ggl"`, `"ddgl"` or `"cgl"`).

    Dispatches to [`laplace_learn.estimate_ggl`][] or [`laplace_learn.estimate_cgl`][], with `cfg.target_class` set
    to `problem`. `initial` and `warn` are passed through.
    """
    problem = LaplacianClass.parse(problem)
    cfg = EstimatorConfig(target_class=problem) if cfg is None else cfg.replace(target_class=problem)
    if problem is LaplacianClass.CGL:
        return estimate_cgl(s, a, h, cfg, initial=initial, warn=warn)
    return estimate_ggl(s, a, h, cfg, initial=initial, warn=warn)


def alpha_sweep(
    problem: ClassLike,
    s: "StatisticMatrix | np.ndarray",
    a: ConnectivityMask,
    alphas: Sequence[float],
    cfg: None | EstimatorConfig = None,
    form: RegularizationForm = "l1",
    warm_start: bool = False,
) -> list[EstimationResult]:
    """Estimates once per regularization parameter in `alphas`, in order.

    With `warm_start=True` every estimate after the first starts from the previous one.
    """
    s = as_statistic(s)
    results = []
    previous = None
    for alpha in alphas:
        h = regularization(s.n, alpha, form)
        result = estimate(problem, s, a, h, cfg, initial=previous if warm_start else None)
        results.append(result)
        previous = result
    return results


#
# Benchmark
#


@dataclasses.dataclass(frozen=True)
class Method:
    """An estimator configuration in a benchmark.

    - `kind`: the Laplacian class estimated.
    - `masked`: whether the true connectivity is imposed; otherwise every pair is permitted.
    - `mismatch`: fraction of the true edges moved elsewhere before imposing the mask.
    - `regularized`: sweep the regularization grid (and keep the best estimate) rather than use `alpha = 0`.
    """

    kind: LaplacianClass
    masked: bool = True
    mismatch: float = 0.0
    regularized: bool = True

    def __post_init__(self):
        object.__setattr__(self, "kind", LaplacianClass.parse(self.kind))
        if not 0 <= self.mismatch <= 1:
            raise StructureError(f"`mismatch` must lie in [0, 1], got {self.mismatch}.")
        if self.mismatch and not self.masked:
            raise StructureError("A connectivity mismatch needs `masked=True`.")

    @property
    def label(self) -> str:
        parts = []
        if self.masked:
            parts.append(f"A_{round(100 * self.mismatch)}%" if self.mismatch else "A")
        if self.regularized:
            parts.append("α")
        return f"{self.kind}({','.join(parts)})" if parts else str(self.kind)


@dataclasses.dataclass(frozen=True)
class TrialRecord:
    """One (spec, trial, k/n, method) cell of a benchmark. `stopped_early` counts the estimates along the
    regularization grid that hit `max_cycles`; `error` is set, and the metrics are `None`, when estimation failed.
    """

    spec: str
    spec_index: int
    trial: int
    k_over_n: float
    k: int
    method: str
    seed: int
    alpha: None | float
    relative_error: None | float
    f_score: None | float
    cycles: None | int
    converged: None | bool
    seconds: float
    stopped_early: int = 0
    error: None | str = None

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclasses.dataclass(frozen=True)
class CellSummary:
    spec: str
    k_over_n: float
    method: str
    trials: int
    failures: int
    mean_relative_error: float
    std_relative_error: float
    mean_f_score: float
    std_f_score: float

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


def _mean_std(values: list[float]) -> tuple[float, float]:
    if not values:
        return math.nan, math.nan
    array = np.array(values)
    return float(array.mean()), float(array.std(ddof=1)) if array.size > 1 else 0.0


@dataclasses.dataclass(frozen=True)
class ExperimentReport:
    """Results of [`laplace_learn.run_benchmark`][]: one `TrialRecord` per (spec, trial, k/n, method), in that
    order, plus the configuration that produced them.
    """

    records: tuple[TrialRecord, ...]
    config: dict

    def cells(self) -> list[CellSummary]:
        """Mean and standard deviation of the metrics over trials, per (spec, k/n, method) cell."""
        groups: dict[tuple[str, float, str], list[TrialRecord]] = {}
        for record in self.records:
            groups.setdefault((record.spec, record.k_over_n, record.method), []).append(record)
        out = []
        for (spec, k_over_n, method), records in groups.items():
            records = sorted(records, key=lambda r: r.trial)
            ok = [r for r in records if r.error is None]
            mean_re, std_re = _mean_std([r.relative_error for r in ok if r.relative_error is not None])
            mean_fs, std_fs = _mean_std([r.f_score for r in ok if r.f_score is not None])
            out.append(
                CellSummary(
                    spec=spec,
                    k_over_n=k_over_n,
                    method=method,
                    trials=len(records),
                    failures=len(records) - len(ok),
                    mean_relative_error=mean_re,
                    std_relative_error=std_re,
                    mean_f_score=mean_fs,
                    std_f_score=std_fs,
                )
            )
        return out

    def cell(self, spec: str, k_over_n: float, method: str) -> CellSummary:
        for summary in self.cells():
            if (summary.spec, summary.k_over_n, summary.method) == (spec, k_over_n, method):
                return summary
        raise KeyError((spec, k_over_n, method))

    def as_dict(self) -> dict:
        return {
            "config": self.config,
            "trials": [record.as_dict() for record in self.records],
            "aggregate": [summary.as_dict() for summary in self.cells()],
        }


@dataclasses.dataclass(frozen=True)
class _Unit:
    spec_index: int
    trial: int
    k_index: int


def _k_for(k_over_n: float, n: int) -> int:
    return max(1, int(round(k_over_n * n)))


def _best_estimate(
    method: Method,
    statistic: StatisticMatrix,
    mask: ConnectivityMask,
    truth: np.ndarray,
    cfg: EstimatorConfig,
    form: RegularizationForm,
    warm_start: bool,
) -> tuple[float, EstimationResult, float, int]:
    alphas = alpha_grid(statistic, statistic.sample_count or 1) if method.regularized else [0.0]
    best = None
    previous = None
    last_error = None
    stopped_early = 0
    for alpha in alphas:
        h = regularization(statistic.n, alpha, form)
        try:
            result = estimate(
                method.kind, statistic, mask, h, cfg, initial=previous if warm_start else None, warn=False
            )
        except (ArithmeticError, ValueError) as e:
            last_error = e
            previous = None
            continue
        previous = result
        if not result.converged:
            stopped_early += 1
        error = relative_error(result.theta.theta, truth)
        if best is None or error < best[2]:
            best = (alpha, result, error)
    if best is None:
        assert last_error is not None
        raise last_error
    return (*best, stopped_early)


def run_benchmark(
    specs: "GraphSpec | Sequence[GraphSpec]",
    k_over_n: Sequence[float] = DEFAULT_K_OVER_N,
    methods: Sequence[Method] = (Method(LaplacianClass.GGL),),
    trials: int = 10,
    seed: int = 0,
    jobs: int = 1,
    cfg: None | EstimatorConfig = None,
    form: RegularizationForm = "l1",
    warm_start: bool = False,
) -> ExperimentReport:
    """Monte-Carlo evaluation of estimators on synthetic graphs.

    For every spec, trial and sample ratio `k/n`: draw a ground-truth graph, draw `k = round(k/n · n)` samples from the
    corresponding Gaussian and form their sample covariance. Then for every method: estimate over the regularization
    grid, keep the estimate with the smallest relative error, and record its F-score.

    Graphs depend only on `(seed, spec index, trial)` and samples additionally on the `k/n` index, each through their
    own [`laplace_learn.substream`][], so results do not depend on `jobs` or scheduling. All methods of a trial see
    the same data. Failures are recorded per trial rather than raised. Estimates that run out of cycles emit no
    `NonConvergenceWarning` here; `TrialRecord.stopped_early` counts them instead.

    **Arguments:**

    - `specs`: one or more graph models.
    - `k_over_n`: sample ratios.
    - `methods`: estimators to compare.
    - `trials`: number of Monte-Carlo trials per cell.
    - `seed`: the root seed.
    - `jobs`: number of worker threads.
    - `cfg`: estimator configuration (its `target_class` is overridden per method).
    - `form`: the regularization form.
    - `warm_start`: warm-start along the regularization grid.

    **Returns:**

    An `ExperimentReport`.
    """
    if isinstance(specs, GraphSpec):
        specs = [specs]
    specs = list(specs)
    k_over_n = [float(x) for x in k_over_n]
    methods = list(methods)
    if trials < 1:
        raise StructureError(f"`trials` must be at least 1, got {trials}.")
    if jobs < 1:
        raise StructureError(f"`jobs` must be at least 1, got {jobs}.")
    if not specs or not k_over_n or not methods:
        raise StructureError("Need at least one graph spec, one sample ratio and one method.")
    if any(x <= 0 for x in k_over_n):
        raise StructureError(f"Sample ratios must be positive, got {k_over_n}.")
    cfg = EstimatorConfig() if cfg is None else cfg

    def run_unit(unit: _Unit) -> list[TrialRecord]:
        spec = specs[unit.spec_index]
        ratio = k_over_n[unit.k_index]
        k = _k_for(ratio, spec.n)
        laplacian, true_mask = generate_graph(spec, substream(seed, unit.spec_index, unit.trial, 0))
        data = sample_gmrf(laplacian, k, substream(seed, unit.spec_index, unit.trial, 1, unit.k_index))
        statistic = build_statistic(data)
        records = []
        for method_index, method in enumerate(methods):
            if not method.masked:
                mask = ConnectivityMask.full(spec.n)
            elif method.mismatch:
                key = (unit.spec_index, unit.trial, 2, unit.k_index, method_index)
                mask = perturb_connectivity(true_mask, method.mismatch, substream(seed, *key))
            else:
                mask = true_mask
            start = time.perf_counter()
            common = dict(
                spec=spec.label,
                spec_index=unit.spec_index,
                trial=unit.trial,
                k_over_n=ratio,
                k=k,
                method=method.label,
                seed=seed,
            )
            try:
                alpha, result, error, stopped_early = _best_estimate(
                    method, statistic, mask, laplacian.theta, cfg, form, warm_start
                )
            except (ArithmeticError, ValueError) as e:
                records.append(
                    TrialRecord(
                        **common,
                        alpha=None,
                        relative_error=None,
                        f_score=None,
                        cycles=None,
                        converged=None,
                        seconds=time.perf_counter() - start,
                        error=f"{type(e).__name__}: {e}",
                    )
                )
                continue
            records.append(
                TrialRecord(
                    **common,
                    alpha=alpha,
                    relative_error=error,
                    f_score=f_score(result.theta.theta, laplacian.theta),
                    cycles=result.cycles,
                    converged=result.converged,
                    seconds=time.perf_counter() - start,
                    stopped_early=stopped_early,
                )
            )
        logger.info(
            "%s trial %d k/n=%g: %s",
            spec.label,
            unit.trial,
            ratio,
            ", ".join(f"{r.method} RE={r.relative_error}" for r in records),
        )
        return records

    units = [
        _Unit(spec_index, trial, k_index)
        for spec_index in range(len(specs))
        for trial in range(trials)
        for k_index in range(len(k_over_n))
    ]
    pool = tinyio.ThreadPool(jobs)
    results = tinyio.Loop().run(pool.map(run_unit, units))
    records = tuple(record for unit_records in results for record in unit_records)
    config = {
        "specs": [spec.as_dict() for spec in specs],
        "k_over_n": k_over_n,
        "methods": [method.label for method in methods],
        "trials": trials,
        "seed": seed,
        "estimator": cfg.as_dict(),
        "regularization": form,
        "warm_start": warm_start,
    }
    return ExperimentReport(records=records, config=config)
