"""Slow end-to-end checks on the synthetic benchmarks. Enable with `LAPLACE_LEARN_SLOW_TESTS=1`."""

import os
import time

import numpy as np
import pytest

import laplace_learn as ll
from helpers import assert_close, precise, random_mask, random_statistic


pytestmark = pytest.mark.skipif(os.environ.get("LAPLACE_LEARN_SLOW_TESTS") != "1", reason="slow")


@pytest.mark.parametrize("kind", ["ggl", "ddgl", "cgl"])
def test_oracle_equivalence(kind):
    rng = np.random.default_rng(2024)
    for instance in range(200):
        n = int(rng.integers(3, 9))
        alpha = (0.0, 0.1)[instance % 2]
        s = random_statistic(rng, n)
        a = random_mask(rng, n, float(rng.uniform(0.2, 0.8)), connected=kind == "cgl")
        h = ll.regularization(n, alpha)
        result = ll.estimate(kind, s, a, h, precise(kind, check_descent=True))
        oracle = ll.oracle_solve(kind, s, a, h)
        assert_close(result.objective, oracle.objective, 1e-6)
        assert ll.kkt_report(result.theta, ll.build_k(s, h), a, kind).passed(1e-5)
        assert ll.validate_class(result.theta.theta, 1e-9).satisfies(ll.LaplacianClass.parse(kind))


def _mean_error(report: ll.ExperimentReport, spec: str, ratio: float, method: str) -> float:
    cell = report.cell(spec, ratio, method)
    assert cell.failures == 0
    return cell.mean_relative_error


def test_fixed_ratio_table():
    specs = [ll.GraphSpec("grid", 64), ll.GraphSpec("er", 64, p=0.1), ll.GraphSpec("modular", 64, p1=0.1, p2=0.3)]
    report = ll.run_benchmark(
        specs, k_over_n=(30,), methods=(ll.Method("ggl"), ll.Method("ggl", masked=False)), trials=10, seed=0, jobs=4
    )
    assert 0.02 <= _mean_error(report, "grid(64)", 30, "GGL(A,α)") <= 0.06
    assert 0.035 <= _mean_error(report, "grid(64)", 30, "GGL(α)") <= 0.075
    assert abs(_mean_error(report, specs[1].label, 30, "GGL(A,α)") - 0.053) <= 0.02
    assert abs(_mean_error(report, specs[2].label, 30, "GGL(A,α)") - 0.075) <= 0.02


def test_combinatorial_grid():
    report = ll.run_benchmark(
        [ll.GraphSpec("grid", 36, vertex_weights="zero")],
        k_over_n=(30,),
        methods=(ll.Method("cgl"),),
        trials=10,
        seed=1,
        jobs=4,
    )
    assert _mean_error(report, "grid(36)", 30, "CGL(A,α)") <= 0.1


def test_sample_size_trends():
    methods = (ll.Method("ggl"), ll.Method("ggl", masked=False))
    report = ll.run_benchmark([ll.GraphSpec("grid", 64)], k_over_n=(5, 100), methods=methods, trials=10, seed=2, jobs=4)
    for method in ("GGL(A,α)", "GGL(α)"):
        few = report.cell("grid(64)", 5, method)
        many = report.cell("grid(64)", 100, method)
        assert many.mean_relative_error < few.mean_relative_error
        assert many.mean_f_score > few.mean_f_score
    for ratio in (5, 100):
        assert _mean_error(report, "grid(64)", ratio, "GGL(A,α)") < _mean_error(report, "grid(64)", ratio, "GGL(α)")


def test_connectivity_mismatch_trends():
    methods = (
        ll.Method("ggl", regularized=False),
        ll.Method("ggl", mismatch=0.25, regularized=False),
        ll.Method("ggl", masked=False, regularized=False),
    )
    report = ll.run_benchmark(
        [ll.GraphSpec("grid", 64)], k_over_n=(5, 1000), methods=methods, trials=10, seed=3, jobs=4
    )
    assert _mean_error(report, "grid(64)", 1000, "GGL(A)") < _mean_error(report, "grid(64)", 1000, "GGL(A_25%)")
    assert _mean_error(report, "grid(64)", 5, "GGL(A_25%)") <= 1.1 * _mean_error(report, "grid(64)", 5, "GGL")


def test_large_dense_run():
    l, _ = ll.generate_graph(ll.GraphSpec("er", 256, p=0.1), seed=0)
    s = ll.build_statistic(ll.sample_gmrf(l, 30 * 256, 1))
    start = time.perf_counter()
    result = ll.estimate_ggl(s, ll.ConnectivityMask.full(256), ll.regularization(256, 0.02))
    assert time.perf_counter() - start <= 60
    assert result.converged


@pytest.mark.parametrize("kind", ["ddgl", "cgl"])
def test_dense_constrained_run(kind):
    spec = ll.GraphSpec("grid", 64, vertex_weights="zero" if kind == "cgl" else "uniform")
    l, _ = ll.generate_graph(spec, seed=0)
    k = 5 * 64
    s = ll.build_statistic(ll.sample_gmrf(l, k, 1))
    h = ll.regularization(64, ll.alpha_grid(s, k)[7])
    start = time.perf_counter()
    result = ll.estimate(kind, s, ll.ConnectivityMask.full(64), h)
    assert time.perf_counter() - start <= 60
    assert result.converged
    assert ll.validate_class(result.theta.theta, 1e-9).satisfies(ll.LaplacianClass.parse(kind))
