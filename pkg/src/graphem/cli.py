"""Command-line interface.

Exit codes: 0 success, 1 I/O failure, 2 usage error, 3 bad input data,
4 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import secrets
import sys
from pathlib import Path

import numpy as np
import yaml

from graphem import baselines
from graphem._linalg import NumericalError
from graphem.bench import (DATASETS, DEFAULT_GAMMA_GRID, METHODS, ExperimentSpec, render_table,
                           run_experiment, tune_gamma)
from graphem.estimation import GraphEMConfig, default_initial_A, graphem_fit, mlem_fit
from graphem.io import (DataFormatError, atomic_write_text, read_matrix_csv, read_series_csv,
                        to_dot, write_matrix_csv, write_series_csv)
from graphem.metrics import binarize, score
from graphem.ssm import BlockSpec, generate_block_transition, simulate

EXIT_IO, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 1, 2, 3, 4


class UsageError(Exception):
    pass


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="YAML/JSON file; its values override flags")


def _add_model_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--dataset", choices=sorted(DATASETS), help="take block layout / noise scales from a preset")
    p.add_argument("--blocks", type=_int_list, help="custom block sizes, e.g. 3,5,5,3")
    p.add_argument("--sigma-q", type=float, help="state noise std (default 0.1)")
    p.add_argument("--sigma-r", type=float, help="observation noise std (default 0.1)")
    p.add_argument("--sigma-p", type=float, help="prior std (default 1e-4)")


def _add_graphem_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--gamma", type=float, default=None, help="l1 weight")
    p.add_argument("--theta", type=float, default=1.0)
    p.add_argument("--dr-tol", type=float, default=1e-3)
    p.add_argument("--em-tol", type=float, default=1e-3)
    p.add_argument("--max-iters", type=int, default=50)


def _add_gc_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--lag", type=int, default=1, help="VAR lag order for PGC/CGC")
    p.add_argument("--alpha", type=float, default=0.05, help="significance level for PGC/CGC")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="graphem", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate a synthetic trajectory")
    _add_common(p)
    _add_model_flags(p)
    p.add_argument("--K", type=int, default=1000, help="number of time steps")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", type=Path, required=True, help="observations CSV")
    p.add_argument("--states-out", type=Path, help="optional true-states CSV")
    p.add_argument("--truth-out", type=Path, help="optional true transition matrix CSV")

    p = sub.add_parser("fit", help="estimate a graph from an observations CSV")
    _add_common(p)
    p.add_argument("--method", choices=METHODS, required=True)
    p.add_argument("--input", type=Path, required=True)
    p.add_argument("--out-dir", type=Path, required=True)
    p.add_argument("--truth", type=Path, help="true matrix CSV; adds report.json")
    _add_model_flags(p)
    _add_graphem_flags(p)
    _add_gc_flags(p)
    p.add_argument("--threshold", type=float, default=1e-10)
    p.add_argument("--seed", type=int, help="seed of the random EM initialisation")

    p = sub.add_parser("benchmark", help="run the synthetic benchmark")
    _add_common(p)
    p.add_argument("--dataset", default="all", help="'all' or comma-separated subset of A,B,C,D")
    p.add_argument("--methods", default=",".join(METHODS))
    p.add_argument("--realizations", type=int, default=50)
    p.add_argument("--K", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    _add_graphem_flags(p)
    p.add_argument("--gamma-grid", type=_float_list, default=list(DEFAULT_GAMMA_GRID),
                   help="grid used to tune gamma when --gamma is not given")
    _add_gc_flags(p)
    p.add_argument("--threshold", type=float, default=1e-10)
    p.add_argument("--workers", type=int, help="worker processes (default: $GRAPHEM_WORKERS or 1)")
    p.add_argument("--out-dir", type=Path, default=Path("."))

    p = sub.add_parser("tune-gamma", help="grid-search gamma on one held-out realization")
    _add_common(p)
    p.add_argument("--dataset", choices=sorted(DATASETS), required=True)
    p.add_argument("--gamma-grid", type=_float_list, default=list(DEFAULT_GAMMA_GRID))
    p.add_argument("--K", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--theta", type=float, default=1.0)
    p.add_argument("--dr-tol", type=float, default=1e-3)
    p.add_argument("--em-tol", type=float, default=1e-3)
    p.add_argument("--max-iters", type=int, default=50)
    p.add_argument("--threshold", type=float, default=1e-10)
    p.add_argument("--workers", type=int)
    p.add_argument("--out-dir", type=Path)

    p = sub.add_parser("export-graph", help="write a DOT file from a matrix CSV")
    _add_common(p)
    p.add_argument("--matrix", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--threshold", type=float, default=1e-10)
    p.add_argument("--binary", action="store_true", help="omit weight labels")
    return parser


def apply_config(parser: argparse.ArgumentParser, args: argparse.Namespace) -> argparse.Namespace:
    """Overlay a config file onto parsed flags, rejecting unknown keys."""
    if getattr(args, "config", None) is None:
        return args
    try:
        text = Path(args.config).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read config file: {exc}")
    try:
        data = yaml.safe_load(text) or {}
    except yaml.YAMLError as exc:
        raise DataFormatError(f"invalid config file ({exc})", args.config)
    if not isinstance(data, dict):
        raise DataFormatError("config file must hold a mapping", args.config)
    valid = sorted(k for k in vars(args) if k not in ("command", "config"))
    normalized = {str(k).replace("-", "_"): v for k, v in data.items()}
    unknown = sorted(set(normalized) - set(valid))
    if unknown:
        raise UsageError(f"unknown config key(s) {unknown}; valid keys: {valid}")
    for key, value in normalized.items():
        if key in ("gamma_grid",) and isinstance(value, str):
            value = _float_list(value)
        if key in ("blocks",) and isinstance(value, str):
            value = _int_list(value)
        if isinstance(getattr(args, key), Path) and value is not None:
            value = Path(value)
        setattr(args, key, value)
    return args


def _block_spec(args) -> BlockSpec:
    if args.dataset:
        preset = DATASETS[args.dataset]
        blocks, (sq, sr, sp) = preset.block_sizes, preset.noise_scales
    else:
        blocks, (sq, sr, sp) = (3, 3, 3), (0.1, 0.1, 1e-4)
    if args.blocks:
        blocks = tuple(args.blocks)
    sq = args.sigma_q if args.sigma_q is not None else sq
    sr = args.sigma_r if args.sigma_r is not None else sr
    sp = args.sigma_p if args.sigma_p is not None else sp
    try:
        return BlockSpec(tuple(blocks), (sq, sr, sp))
    except ValueError as exc:
        raise UsageError(str(exc))


def _seed(value) -> int:
    return int(value) if value is not None else secrets.randbits(32)


def cmd_simulate(args) -> int:
    spec = _block_spec(args)
    seed = _seed(args.seed)
    print(f"seed: {seed}")
    ss = np.random.SeedSequence(seed)
    s_matrix, s_sim = ss.spawn(2)
    A = generate_block_transition(spec, np.random.default_rng(s_matrix))
    traj = simulate(spec.model(A), args.K, np.random.default_rng(s_sim))
    write_series_csv(args.out, traj.observations, "y")
    if args.states_out:
        write_series_csv(args.states_out, traj.states, "x")
    if args.truth_out:
        write_matrix_csv(args.truth_out, A)
    print(f"wrote {traj.K} steps x {traj.observations.shape[1]} series to {args.out}")
    return 0


def cmd_fit(args) -> int:
    Y = read_series_csv(args.input)
    n = Y.shape[1]
    spec = _block_spec(args)
    if sum(spec.block_sizes) != n:
        spec = BlockSpec((n,), spec.noise_scales)
    model = spec.model(np.zeros((n, n)))
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    summary: dict = {"method": args.method, "input": str(args.input), "K": len(Y), "n": n}

    weights = None
    if args.method in ("graphem", "mlem"):
        seed = _seed(args.seed)
        print(f"seed: {seed}")
        A0 = default_initial_A(n, seed)
        if args.method == "graphem":
            gamma = args.gamma if args.gamma is not None else 50.0
            config = GraphEMConfig(gamma=gamma, theta=args.theta, dr_tol=args.dr_tol,
                                   em_tol=args.em_tol, max_em_iters=args.max_iters)
            fit = graphem_fit(model, Y, config, A0=A0)
            summary["gamma"] = gamma
        else:
            fit = mlem_fit(model, Y, args.em_tol, args.max_iters, A0=A0)
        weights = fit.final_A
        adjacency = binarize(weights, args.threshold)
        write_matrix_csv(out / "A_hat.csv", weights)
        summary.update(seed=seed, objective_values=fit.objective_values,
                       iterations=fit.iterations, converged=fit.converged)
        estimate = weights
    else:
        detector = baselines.pairwise_gc if args.method == "pgc" else baselines.conditional_gc
        graph = detector(Y, args.lag, args.alpha)
        adjacency = graph.adjacency
        summary.update(lag=args.lag, alpha=args.alpha)
        estimate = graph

    write_matrix_csv(out / "adjacency.csv", adjacency.astype(int), integer=True)
    atomic_write_text(out / "graph.dot", to_dot(adjacency, weights))
    summary["n_edges"] = int(adjacency.sum())
    atomic_write_text(out / "summary.json", json.dumps(summary, indent=2))
    if args.truth:
        truth = read_matrix_csv(args.truth)
        report = score(estimate, truth, args.threshold)
        atomic_write_text(out / "report.json", json.dumps(report.to_dict(), indent=2))
        print(json.dumps(report.to_dict()))
    print(f"{args.method}: {summary['n_edges']} edges written to {out}")
    return 0


def _parse_methods(text) -> tuple[str, ...]:
    methods = text if isinstance(text, (list, tuple)) else [m.strip() for m in str(text).split(",") if m.strip()]
    bad = [m for m in methods if m not in METHODS]
    if bad or not methods:
        raise UsageError(f"invalid method(s) {bad}; valid methods: {', '.join(METHODS)}")
    return tuple(methods)


def _parse_datasets(text) -> list[str]:
    if text in (None, "all"):
        return sorted(DATASETS)
    names = text if isinstance(text, (list, tuple)) else [d.strip() for d in str(text).split(",") if d.strip()]
    bad = [d for d in names if d not in DATASETS]
    if bad or not names:
        raise UsageError(f"invalid dataset(s) {bad}; valid: all, {', '.join(sorted(DATASETS))}")
    return list(names)


def cmd_benchmark(args) -> int:
    methods = _parse_methods(args.methods)
    datasets = _parse_datasets(args.dataset)
    print(f"seed: {args.seed}")
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    reports, payload = {}, {}
    for name in datasets:
        config = GraphEMConfig(gamma=args.gamma or 0.0, theta=args.theta, dr_tol=args.dr_tol,
                               em_tol=args.em_tol, max_em_iters=args.max_iters)
        spec = ExperimentSpec(dataset=name, K=args.K, n_realizations=args.realizations,
                              methods=methods, graphem=config, lag=args.lag, alpha=args.alpha,
                              threshold=args.threshold, base_seed=args.seed)
        tuning = None
        if "graphem" in methods and args.gamma is None:
            tuning = tune_gamma(spec, args.gamma_grid, workers=args.workers)
            spec.graphem = GraphEMConfig(gamma=tuning.gamma, theta=args.theta, dr_tol=args.dr_tol,
                                         em_tol=args.em_tol, max_em_iters=args.max_iters)
            print(f"dataset {name}: tuned gamma = {tuning.gamma:g}")
        report = run_experiment(spec, workers=args.workers)
        reports[name] = report
        payload[name] = report.to_dict()
        if tuning is not None:
            payload[name]["gamma_tuning"] = tuning.to_dict()
        violations = report.descent_violations()
        if violations:
            print(f"warning: EM energy increased in {len(violations)} iteration(s) on dataset {name}")
    table = render_table(reports)
    atomic_write_text(out / "benchmark.json", json.dumps(payload, indent=2))
    atomic_write_text(out / "benchmark.txt", table + "\n")
    print(table)
    return 0


def cmd_tune_gamma(args) -> int:
    print(f"seed: {args.seed}")
    config = GraphEMConfig(theta=args.theta, dr_tol=args.dr_tol, em_tol=args.em_tol,
                           max_em_iters=args.max_iters)
    spec = ExperimentSpec(dataset=args.dataset, K=args.K, n_realizations=1, methods=("graphem",),
                          graphem=config, threshold=args.threshold, base_seed=args.seed)
    tuning = tune_gamma(spec, args.gamma_grid, workers=args.workers)
    print(f"{'gamma':>8} {'accur.':>8} {'F1':>8} {'RMSE':>8}")
    for g, row in tuning.table.items():
        mark = " *" if g == tuning.gamma else ""
        print(f"{g:8g} {row['accuracy']:8.4f} {row['f1']:8.4f} {row['rmse']:8.4f}{mark}")
    print(f"chosen gamma: {tuning.gamma:g}")
    if args.out_dir:
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        atomic_write_text(out / "tune_gamma.json", json.dumps(tuning.to_dict(), indent=2))
    return 0


def cmd_export_graph(args) -> int:
    M = read_matrix_csv(args.matrix)
    adjacency = binarize(M, args.threshold)
    atomic_write_text(args.out, to_dot(adjacency, None if args.binary else M))
    print(f"{int(adjacency.sum())} edges written to {args.out}")
    return 0


COMMANDS = {
    "simulate": cmd_simulate,
    "fit": cmd_fit,
    "benchmark": cmd_benchmark,
    "tune-gamma": cmd_tune_gamma,
    "export-graph": cmd_export_graph,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args = apply_config(parser, args)
        return COMMANDS[args.command](args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"{parser.prog}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataFormatError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NumericalError, np.linalg.LinAlgError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
