import argparse
import dataclasses
import json
import logging
import os
import pathlib
import sys
import tomllib
from collections.abc import Callable, Sequence
from typing import Any

from ._cgl import DisconnectedGraphError
from ._core import (
    ConnectivityMask,
    LaplacianClass,
    LaplacianMatrix,
    RegularizationMatrix,
    StatisticMatrix,
    StructureError,
    build_k,
    build_statistic,
    regularization,
    validate_class,
)
from ._descent import EstimatorConfig
from ._evaluation import DEFAULT_K_OVER_N, Method, alpha_grid, estimate, f_score, relative_error, run_benchmark
from ._io import read_mask, read_matrix, version, write_edge_list, write_json, write_matrix, write_rows
from ._kkt import kkt_report
from ._synthetic import GraphSpec, generate_graph, sample_gmrf, substream


logger = logging.getLogger(__name__)

SEED_ENV = "LAPLACE_LEARN_SEED"

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_NUMERICAL = 2
EXIT_NONCONVERGENCE = 3


#
# Configuration: built-in defaults, overridden by the `[command]` table of a TOML file, overridden by flags.
#


_DEFAULTS: dict[str, dict[str, Any]] = {
    "generate": {
        "topology": "grid",
        "n": 64,
        "p": None,
        "p1": None,
        "p2": None,
        "modules": 4,
        "class": "ddgl",
        "k": None,
        "seed": 0,
        "out": ".",
    },
    "estimate": {
        "class": "ggl",
        "statistic": None,
        "data": None,
        "statistic_mode": "gaussian",
        "bandwidth": None,
        "k": None,
        "mask": "full",
        "regularization": "l1",
        "h_file": None,
        "alpha": 0.0,
        "alpha_grid": False,
        "warm_start": False,
        "epsilon": 1e-4,
        "max_cycles": 1000,
        "inverse_refresh_period": 50,
        "update_order": "cyclic",
        "coordinate_polish": True,
        "check_descent": False,
        "seed": 0,
        "ground_truth": None,
        "out": ".",
    },
    "benchmark": {
        "topology": "grid",
        "n": 64,
        "p": 0.1,
        "p1": 0.1,
        "p2": 0.3,
        "modules": 4,
        "class": "ddgl",
        "k_over_n": list(DEFAULT_K_OVER_N),
        "methods": ["ggl:mask"],
        "mask_mismatch": [],
        "alpha_grid": True,
        "regularization": "l1",
        "warm_start": False,
        "trials": 10,
        "seed": 0,
        "jobs": 1,
        "epsilon": 1e-4,
        "max_cycles": 1000,
        "out": ".",
    },
    "validate": {
        "theta": None,
        "class": None,
        "statistic": None,
        "data": None,
        "statistic_mode": "gaussian",
        "mask": "full",
        "regularization": "l1",
        "h_file": None,
        "alpha": 0.0,
        "tol": 1e-9,
        "kkt_tol": 1e-6,
        "out": None,
    },
}


@dataclasses.dataclass(frozen=True)
class RunConfig:
    """The resolved configuration of one CLI run, and where each value came from."""

    command: str
    values: dict[str, Any]
    sources: dict[str, str]
    config_file: None | str = None

    def __getitem__(self, key: str) -> Any:
        return self.values[key]

    def as_dict(self) -> dict:
        return {"command": self.command, "values": self.values, "config_file": self.config_file}


def _normalise(key: str) -> str:
    return key.replace("-", "_")


def load_config(command: str, flags: dict[str, Any], config_file: None | str = None) -> RunConfig:
    """Merges built-in defaults, the `[command]` table of `config_file`, flags and the seed environment variable."""
    defaults = _DEFAULTS[command]
    from_file: dict[str, Any] = {}
    if config_file is not None:
        with open(config_file, "rb") as f:
            table = tomllib.load(f).get(command, {})
        if not isinstance(table, dict):
            raise StructureError(f"`[{command}]` in {config_file!r} must be a table.")
        from_file = {_normalise(key): value for key, value in table.items()}
        unknown = sorted(set(from_file) - set(defaults))
        if unknown:
            raise StructureError(f"Unknown keys in `[{command}]` of {config_file!r}: {', '.join(unknown)}.")
    values = {}
    sources = {}
    for key, default in defaults.items():
        flag = flags.get(key)
        if flag is not None:
            if key in from_file and from_file[key] != flag:
                logger.info("%s: flag value %r overrides config file value %r", key, flag, from_file[key])
            values[key], sources[key] = flag, "flag"
        elif key in from_file:
            values[key], sources[key] = from_file[key], "file"
        else:
            values[key], sources[key] = default, "default"
    seed = os.environ.get(SEED_ENV)
    if seed is not None and "seed" in values:
        try:
            values["seed"] = int(seed)
        except ValueError:
            raise StructureError(f"{SEED_ENV} must be an integer, got {seed!r}.") from None
        logger.info("seed %s taken from %s", seed, SEED_ENV)
        sources["seed"] = "env"
    return RunConfig(command=command, values=values, sources=sources, config_file=config_file)


def _as_list(value, kind: Callable = str) -> list:
    if value is None:
        return []
    if isinstance(value, str):
        return [kind(item.strip()) for item in value.split(",") if item.strip()]
    if isinstance(value, (list, tuple)):
        return [kind(item) for item in value]
    return [kind(value)]


def _out_dir(config: RunConfig) -> pathlib.Path:
    out = pathlib.Path(config["out"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _graph_spec(config: RunConfig, topology: str) -> GraphSpec:
    kind = LaplacianClass.parse(config["class"])
    if kind is LaplacianClass.GGL:
        raise StructureError("Ground-truth graphs are DDGL (positive vertex weights) or CGL (zero vertex weights).")
    return GraphSpec(
        topology=topology,  # pyright: ignore[reportArgumentType]
        n=int(config["n"]),
        p=None if config["p"] is None else float(config["p"]),
        p1=None if config["p1"] is None else float(config["p1"]),
        p2=None if config["p2"] is None else float(config["p2"]),
        modules=int(config["modules"]),
        vertex_weights="uniform" if kind is LaplacianClass.DDGL else "zero",
        seed=int(config["seed"]),
    )


def _load_statistic(config: RunConfig) -> StatisticMatrix:
    if config["statistic"] is not None:
        k = config.values.get("k")
        return StatisticMatrix(read_matrix(config["statistic"]), sample_count=None if k is None else int(k))
    if config["data"] is not None:
        bandwidth = config.values.get("bandwidth")
        return build_statistic(
            read_matrix(config["data"]), config["statistic_mode"], None if bandwidth is None else float(bandwidth)
        )
    raise StructureError("Need either `--statistic` or `--data`.")


def _load_mask(config: RunConfig, n: int) -> ConnectivityMask:
    mask = config["mask"]
    if mask == "full":
        return ConnectivityMask.full(n)
    if mask == "empty":
        return ConnectivityMask.empty(n)
    out = read_mask(mask)
    if out.n != n:
        raise StructureError(f"Mask is {out.n}×{out.n} but the statistic is {n}×{n}.")
    return out


def _regularizations(config: RunConfig, statistic: StatisticMatrix) -> list[RegularizationMatrix]:
    form = config["regularization"]
    if form == "custom":
        if config["h_file"] is None:
            raise StructureError("`--regularization custom` needs `--h-file`.")
        if config.values.get("alpha_grid"):
            raise StructureError("`--alpha-grid` applies to the 'l1' and 'l1-off' forms only.")
        return [RegularizationMatrix(read_matrix(config["h_file"]), form="custom")]
    if config.values.get("alpha_grid"):
        if statistic.sample_count is None:
            raise StructureError("`--alpha-grid` needs the sample count: pass `--data`, or `--k` with `--statistic`.")
        alphas = alpha_grid(statistic, statistic.sample_count)
    else:
        alphas = [float(config["alpha"])]
    return [regularization(statistic.n, alpha, form) for alpha in alphas]


#
# Commands
#


def cmd_generate(config: RunConfig) -> int:
    spec = _graph_spec(config, config["topology"])
    k = int(config["k"]) if config["k"] is not None else 30 * spec.n
    laplacian, mask = generate_graph(spec, substream(spec.seed, 0))
    data = sample_gmrf(laplacian, k, substream(spec.seed, 1))
    out = _out_dir(config)
    write_matrix(out / "laplacian.csv", laplacian.theta)
    write_matrix(out / "mask.csv", mask.entries)
    write_matrix(out / "data.csv", data)
    write_edge_list(out / "edges.csv", laplacian)
    write_json(
        out / "meta.json",
        {"version": version(), "seed": spec.seed, "spec": spec.as_dict(), "class": spec.kind.value, "k": k},
    )
    return EXIT_OK


def cmd_estimate(config: RunConfig) -> int:
    problem = LaplacianClass.parse(config["class"])
    statistic = _load_statistic(config)
    mask = _load_mask(config, statistic.n)
    cfg = EstimatorConfig(
        target_class=problem,
        epsilon=float(config["epsilon"]),
        max_cycles=int(config["max_cycles"]),
        inverse_refresh_period=int(config["inverse_refresh_period"]),
        update_order=config["update_order"],
        seed=int(config["seed"]),
        check_descent=bool(config["check_descent"]),
        coordinate_polish=bool(config["coordinate_polish"]),
    )
    truth = None if config["ground_truth"] is None else read_matrix(config["ground_truth"])
    if truth is not None and truth.shape != (statistic.n, statistic.n):
        raise StructureError(f"Ground truth has shape {truth.shape}, expected {(statistic.n, statistic.n)}.")
    out = _out_dir(config)
    regularizations = _regularizations(config, statistic)
    entries = []
    results = []
    previous = None
    for index, h in enumerate(regularizations):
        result = estimate(problem, statistic, mask, h, cfg, initial=previous if config["warm_start"] else None)
        previous = result
        k_mat = build_k(statistic, h)
        try:
            kkt = kkt_report(result.theta, k_mat, mask, problem).as_dict()
        except ArithmeticError as e:
            kkt = {"error": str(e)}
        entry = {"alpha": h.alpha, "regularization": h.form, **result.summary(), "kkt": kkt}
        if truth is not None:
            entry["relative_error"] = relative_error(result.theta.theta, truth)
            entry["f_score"] = f_score(result.theta.theta, truth)
        if len(regularizations) > 1:
            write_matrix(out / f"theta_alpha{index:02d}.csv", result.theta.theta)
        entries.append(entry)
        results.append(result)
    if truth is not None:
        selected = min(range(len(entries)), key=lambda i: entries[i]["relative_error"])
    else:
        selected = 0
    write_matrix(out / "theta.csv", results[selected].theta.theta)
    write_matrix(out / "c.csv", results[selected].c)
    write_json(
        out / "report.json",
        {
            "version": version(),
            "seed": config["seed"],
            "config": config.as_dict(),
            "class": problem.value,
            "n": statistic.n,
            "entries": entries,
            "selected": selected,
            "seconds": sum(result.seconds for result in results),
        },
    )
    if not all(result.converged for result in results):
        return EXIT_NONCONVERGENCE
    return EXIT_OK


def _methods(config: RunConfig) -> list[Method]:
    regularized = bool(config["alpha_grid"])
    methods = []
    for item in _as_list(config["methods"]):
        kind, _, masking = item.partition(":")
        if masking not in ("", "mask", "full"):
            raise StructureError(f"Method {item!r} must look like 'ggl:mask' or 'cgl:full'.")
        methods.append(Method(LaplacianClass.parse(kind), masked=masking != "full", regularized=regularized))
    for fraction in _as_list(config["mask_mismatch"], float):
        for method in [m for m in methods if m.masked and not m.mismatch]:
            methods.append(dataclasses.replace(method, mismatch=fraction))
    return methods


def cmd_benchmark(config: RunConfig) -> int:
    trials = int(config["trials"])
    if trials < 1:
        raise StructureError(f"`trials` must be at least 1, got {trials}.")
    specs = [_graph_spec(config, topology) for topology in _as_list(config["topology"])]
    cfg = EstimatorConfig(epsilon=float(config["epsilon"]), max_cycles=int(config["max_cycles"]))
    report = run_benchmark(
        specs,
        k_over_n=_as_list(config["k_over_n"], float),
        methods=_methods(config),
        trials=trials,
        seed=int(config["seed"]),
        jobs=int(config["jobs"]),
        cfg=cfg,
        form=config["regularization"],
        warm_start=bool(config["warm_start"]),
    )
    out = _out_dir(config)
    records = [record.as_dict() for record in report.records]
    fieldnames = list(records[0]) if records else []
    write_rows(out / "trials.csv", records, fieldnames)
    cells = report.cells()
    write_json(
        out / "aggregate.json",
        {"version": version(), "run": config.as_dict(), **report.as_dict()},
    )
    write_rows(
        out / "curve.csv",
        [cell.as_dict() for cell in cells],
        ["spec", "method", "k_over_n", "mean_relative_error", "mean_f_score", "trials", "failures"],
    )
    return EXIT_OK


def cmd_validate(config: RunConfig) -> int:
    if config["theta"] is None:
        raise StructureError("`validate` needs `--theta`.")
    theta = read_matrix(config["theta"])
    tol = float(config["tol"])
    verdict = validate_class(theta, tol)
    result: dict[str, Any] = {
        "version": version(),
        "class": None if verdict.kind is None else verdict.kind.value,
        "violations": verdict.violations,
    }
    ok = True
    if config["class"] is not None:
        requested = LaplacianClass.parse(config["class"])
        result["requested"] = requested.value
        ok = verdict.satisfies(requested)
        if ok and (config["statistic"] is not None or config["data"] is not None):
            statistic = _load_statistic(config)
            mask = _load_mask(config, statistic.n)
            (h,) = _regularizations(config, statistic)
            report = kkt_report(LaplacianMatrix(theta, requested), build_k(statistic, h), mask, requested)
            result["kkt"] = report.as_dict()
            ok = report.passed(float(config["kkt_tol"]))
    result["passed"] = ok
    print(json.dumps(result, indent=2, sort_keys=True))
    if config["out"] is not None:
        write_json(config["out"], result)
    return EXIT_OK if ok else EXIT_VALIDATION


_COMMANDS: dict[str, Callable[[RunConfig], int]] = {
    "generate": cmd_generate,
    "estimate": cmd_estimate,
    "benchmark": cmd_benchmark,
    "validate": cmd_validate,
}


#
# Argument parsing
#


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="laplace-learn", description="Learn graph Laplacians from data by block-coordinate descent."
    )
    parser.add_argument("--config", help="TOML file with one table per subcommand.")
    parser.add_argument("--log-level", default="WARNING", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    subparsers = parser.add_subparsers(dest="command", required=True)
    flag = argparse.BooleanOptionalAction

    generate = subparsers.add_parser("generate", help="Draw a ground-truth graph and Gaussian samples.")
    generate.add_argument("--topology", choices=["grid", "er", "modular"])
    generate.add_argument("--n", type=int)
    generate.add_argument("--p", type=float)
    generate.add_argument("--p1", type=float)
    generate.add_argument("--p2", type=float)
    generate.add_argument("--modules", type=int)
    generate.add_argument("--class", dest="class_", choices=["ddgl", "cgl"])
    generate.add_argument("--k", type=int, help="Number of samples (default 30n).")
    generate.add_argument("--seed", type=int)
    generate.add_argument("--out")

    est = subparsers.add_parser("estimate", help="Estimate a Laplacian from a statistic or data.")
    est.add_argument("--class", dest="class_", choices=["ggl", "ddgl", "cgl"])
    est.add_argument("--statistic", help="CSV file with the statistic S.")
    est.add_argument("--data", help="CSV file with the data matrix X.")
    est.add_argument("--statistic-mode", choices=["gaussian", "binary", "rbf"])
    est.add_argument("--bandwidth", type=float)
    est.add_argument("--k", type=int, help="Sample count behind `--statistic`, for `--alpha-grid`.")
    est.add_argument("--mask", help="CSV mask file, 'full' or 'empty'.")
    est.add_argument("--regularization", choices=["l1", "l1-off", "custom"])
    est.add_argument("--h-file", help="CSV file with H, for `--regularization custom`.")
    est.add_argument("--alpha", type=float)
    est.add_argument("--alpha-grid", action=flag, default=None)
    est.add_argument("--warm-start", action=flag, default=None)
    est.add_argument("--epsilon", type=float)
    est.add_argument("--max-cycles", type=int)
    est.add_argument("--inverse-refresh-period", type=int)
    est.add_argument("--update-order", choices=["cyclic", "random"])
    est.add_argument("--coordinate-polish", action=flag, default=None)
    est.add_argument("--check-descent", action=flag, default=None)
    est.add_argument("--seed", type=int)
    est.add_argument("--ground-truth", help="CSV file with the true Laplacian, to select α by relative error.")
    est.add_argument("--out")

    bench = subparsers.add_parser("benchmark", help="Monte-Carlo benchmark on synthetic graphs.")
    bench.add_argument("--topology", help="Comma-separated list of 'grid', 'er', 'modular'.")
    bench.add_argument("--n", type=int)
    bench.add_argument("--p", type=float)
    bench.add_argument("--p1", type=float)
    bench.add_argument("--p2", type=float)
    bench.add_argument("--modules", type=int)
    bench.add_argument("--class", dest="class_", choices=["ddgl", "cgl"], help="Ground-truth class.")
    bench.add_argument("--k-over-n", help="Comma-separated sample ratios.")
    bench.add_argument("--methods", help="Comma-separated list such as 'ggl:mask,ggl:full,cgl:mask'.")
    bench.add_argument("--mask-mismatch", help="Comma-separated fractions of edges to move.")
    bench.add_argument("--alpha-grid", action=flag, default=None)
    bench.add_argument("--regularization", choices=["l1", "l1-off"])
    bench.add_argument("--warm-start", action=flag, default=None)
    bench.add_argument("--trials", type=int)
    bench.add_argument("--seed", type=int)
    bench.add_argument("--jobs", type=int)
    bench.add_argument("--epsilon", type=float)
    bench.add_argument("--max-cycles", type=int)
    bench.add_argument("--out")

    val = subparsers.add_parser("validate", help="Check class membership and optimality of a Laplacian.")
    val.add_argument("--theta", help="CSV file with the matrix to check.")
    val.add_argument("--class", dest="class_", choices=["ggl", "ddgl", "cgl"])
    val.add_argument("--statistic")
    val.add_argument("--data")
    val.add_argument("--statistic-mode", choices=["gaussian", "binary", "rbf"])
    val.add_argument("--mask")
    val.add_argument("--regularization", choices=["l1", "l1-off", "custom"])
    val.add_argument("--h-file")
    val.add_argument("--alpha", type=float)
    val.add_argument("--tol", type=float)
    val.add_argument("--kkt-tol", type=float)
    val.add_argument("--out", help="Also write the result to this JSON file.")
    return parser


def _flags(args: argparse.Namespace) -> dict[str, Any]:
    out = {key.rstrip("_"): value for key, value in vars(args).items() if key not in ("command", "config", "log_level")}
    return out


def _error(e: BaseException, code: int) -> int:
    payload = {"error": {"type": type(e).__name__, "message": str(e), "exit_code": code}}
    print(json.dumps(payload), file=sys.stderr)
    return code


def main(argv: None | Sequence[str] = None) -> int:
    """Entry point of the `laplace-learn` command. Returns the exit code."""
    args = _parser().parse_args(argv)
    logging.basicConfig(level=args.log_level, format="%(levelname)s %(name)s: %(message)s")
    try:
        config = load_config(args.command, _flags(args), args.config)
        return _COMMANDS[args.command](config)
    except (StructureError, DisconnectedGraphError, ValueError, OSError, tomllib.TOMLDecodeError) as e:
        return _error(e, EXIT_VALIDATION)
    except ArithmeticError as e:
        return _error(e, EXIT_NUMERICAL)
