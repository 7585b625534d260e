"""Command-line entry points.

Five subcommands cover the workflow end to end::

    topotrack generate     synthesize a graph, filter, and stationary signals
    topotrack infer-batch  solve the sparse-topology program on fixed data
    topotrack infer-online track the topology over a signal stream
    topotrack analyze      identifiability and conditioning diagnostics
    topotrack eval         score an estimate against a reference graph

Every run writes its outputs plus a ``manifest.json`` into ``--out``.
Errors print one machine-parsable line ``error <CODE>: <message>`` to stderr
and exit nonzero (E_CONFIG: 2, E_NUMERIC: 3, E_IO: 4).
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import figures
from .analysis import eigenvector_squares, feasibility, response_diagnostics, strong_convexity
from .config import (
    ExperimentConfig,
    load_with_overrides,
    parse_changes,
    parse_checkpoints,
    parse_cov,
    parse_known_edges,
    parse_threshold,
)
from .covariance import sample_covariance
from .diffusion import FilterSpec, SignalBatch, generate, load_signals_csv, save_signals_csv
from .graphs import EdgeConstraints, GroundTruth, load_edge_list, save_edge_list
from .metrics import f_measure, threshold_sweep
from .online import ChangeEvent, DriftingStream, TraceCsvWriter, load_trace_csv, run_stream
from .reporting import load_matrix_csv, save_matrix_csv, write_json_atomic, write_manifest
from .solver import batch_solve

EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_IO = 4


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON config file; flags override it")
    parser.add_argument("--seed", type=int, help="base random seed")
    parser.add_argument("--mu", type=float, help="fit weight of the commutator penalty")
    parser.add_argument("--out", help="output directory (default runs/latest)")
    parser.add_argument("--threshold", help="edge threshold, rel:F or abs:F")
    parser.add_argument("--index-base", type=int, choices=(0, 1), dest="index_base",
                        help="vertex numbering in edge-list files")
    parser.add_argument("--known-edges", dest="known_edges",
                        help="fixed entries: an edge-list path or random:K")
    parser.add_argument("--no-figures", dest="figures", action="store_const", const=False,
                        help="skip figure rendering")


def _common_overrides(args) -> dict:
    overrides = {key: getattr(args, key, None)
                 for key in ("seed", "mu", "out", "index_base", "known_edges", "figures")}
    if getattr(args, "threshold", None):
        kind, value = parse_threshold(args.threshold)
        overrides["threshold_kind"] = kind
        overrides["threshold_value"] = value
    return overrides


def _resolve_constraints(cfg: ExperimentConfig,
                         truth: GroundTruth | None) -> EdgeConstraints | None:
    if cfg.known_edges is None:
        return None
    kind, value = parse_known_edges(cfg.known_edges)
    if kind == "file":
        return EdgeConstraints.from_file(value, index_base=cfg.index_base)
    if truth is None:
        raise ValueError(
            "configuration error: known-edges random:K needs a reference graph (--graph)")
    return EdgeConstraints.random_edges(truth, value, seed=cfg.seed)


def _prepare_out(cfg: ExperimentConfig) -> str:
    os.makedirs(cfg.out, exist_ok=True)
    return cfg.out


def _load_truth(path, cfg: ExperimentConfig) -> GroundTruth:
    return GroundTruth.from_edge_list(path, index_base=cfg.index_base)


def cmd_generate(args) -> int:
    overrides = _common_overrides(args)
    for key in ("n", "t_count", "filter_order"):
        overrides[key] = getattr(args, key)
    overrides["graph_density"] = args.density
    if args.filter_coeffs:
        overrides["filter_coeffs"] = [float(c) for c in args.filter_coeffs.split(",")]
    if args.changes:
        overrides["changes"] = parse_changes(args.changes)
    if args.signals_per_step is not None:
        overrides["minibatch"] = args.signals_per_step
    cfg = load_with_overrides(args.config, overrides)
    out = _prepare_out(cfg)

    from .graphs import init_sparse_random

    if args.graph:
        truth = _load_truth(args.graph, cfg)
    else:
        truth = GroundTruth(adjacency=init_sparse_random(cfg.n, cfg.graph_density,
                                                         seed=cfg.seed))
    spec = (FilterSpec(tuple(cfg.filter_coeffs)) if cfg.filter_coeffs
            else FilterSpec.random(cfg.filter_order, seed=cfg.seed))

    graph_path = os.path.join(out, "graph.edges")
    filter_path = os.path.join(out, "filter.json")
    signals_path = os.path.join(out, "signals.csv")
    outputs = [graph_path, filter_path, signals_path]
    if cfg.changes:
        events = [ChangeEvent(step=int(row[0]), fraction=float(row[1]),
                              seed=None if len(row) < 3 or row[2] is None else int(row[2]))
                  for row in cfg.changes]
        stream = DriftingStream(truth, spec, seed=cfg.seed, changes=events,
                                signals_per_step=cfg.minibatch)
        rows = np.empty((cfg.t_count, truth.n))
        seen = {}
        for k in range(cfg.t_count):
            rows[k] = next(stream)
            version = stream.ground_truth.version
            if version not in seen:
                seen[version] = stream.ground_truth.adjacency.copy()
        batch = SignalBatch(signals=rows, seed=cfg.seed)
        for version, adjacency in sorted(seen.items()):
            if version == truth.version:
                continue
            vpath = os.path.join(out, f"graph_v{version}.edges")
            save_edge_list(vpath, adjacency, index_base=cfg.index_base,
                           header=f"rewired graph, version {version}")
            outputs.append(vpath)
    else:
        batch = generate(truth.adjacency, spec, cfg.t_count, seed=cfg.seed)

    save_edge_list(graph_path, truth.adjacency, index_base=cfg.index_base,
                   header=f"generated graph, n={truth.n}, seed={cfg.seed}")
    write_json_atomic(filter_path, {"coeffs": list(spec.coeffs), "order": spec.order})
    save_signals_csv(signals_path, batch)
    if cfg.figures:
        outputs.append(figures.save_adjacency_heatmaps(
            os.path.join(out, "adjacency.png"), truth.adjacency))
    write_manifest(os.path.join(out, "manifest.json"), "generate", cfg.to_dict(),
                   seeds={"graph": cfg.seed, "filter": cfg.seed, "signals": cfg.seed},
                   outputs=outputs)
    print(f"generated n={truth.n} graph with {len(truth.edges)} edges, "
          f"{cfg.t_count} signals -> {out}")
    return 0


def cmd_infer_batch(args) -> int:
    overrides = _common_overrides(args)
    for key in ("step_policy", "gamma", "sc_constant", "max_iters", "rel_tol",
                "init_seed", "init_density", "accelerated"):
        overrides[key] = getattr(args, key)
    cfg = load_with_overrides(args.config, overrides)
    out = _prepare_out(cfg)

    inputs = {}
    if args.cov:
        cov = load_matrix_csv(args.cov)
        inputs["covariance"] = args.cov
    elif args.signals:
        batch = load_signals_csv(args.signals)
        cov = sample_covariance(batch.signals)
        inputs["signals"] = args.signals
    else:
        raise ValueError("configuration error: infer-batch needs --signals or --cov")
    truth = None
    if args.graph:
        truth = _load_truth(args.graph, cfg)
        inputs["graph"] = args.graph
    constraints = _resolve_constraints(cfg, truth)

    result = batch_solve(cov, cfg.solver_config(), constraints=constraints)

    estimate_path = os.path.join(out, "estimate.csv")
    edges_path = os.path.join(out, "estimate.edges")
    trajectory_path = os.path.join(out, "trajectory.csv")
    report_path = os.path.join(out, "report.json")
    save_matrix_csv(estimate_path, result.estimate)
    from .metrics import resolve_threshold

    cut = resolve_threshold(result.estimate, cfg.threshold)
    save_edge_list(edges_path, result.estimate, threshold=cut,
                   index_base=cfg.index_base, header=f"threshold={cut!r}")
    with open(trajectory_path, "w", encoding="utf-8") as handle:
        handle.write("iteration,objective\n")
        for k, value in enumerate(result.objective_trajectory):
            handle.write(f"{k},{float(value)!r}\n")
    report = result.to_report()
    report["threshold"] = cut
    if truth is not None:
        report["recovery"] = f_measure(result.estimate, truth.adjacency, cfg.threshold).to_dict()
    write_json_atomic(report_path, report)
    outputs = [estimate_path, edges_path, trajectory_path, report_path]
    if cfg.figures:
        outputs.append(figures.save_objective_trajectory(
            os.path.join(out, "objective.png"), result.objective_trajectory))
        outputs.append(figures.save_adjacency_heatmaps(
            os.path.join(out, "heatmap.png"), result.estimate,
            truth.adjacency if truth is not None else None))
    write_manifest(os.path.join(out, "manifest.json"), "infer-batch", cfg.to_dict(),
                   seeds={"init": cfg.init_seed}, inputs=inputs, outputs=outputs)
    print(f"batch solve: {result.iterations} iterations, converged={result.converged}, "
          f"objective={float(result.objective_trajectory[-1])!r} -> {out}")
    return 0


def cmd_infer_online(args) -> int:
    overrides = _common_overrides(args)
    for key in ("iters_per_step", "minibatch", "warmup", "init_scale", "max_steps",
                "accelerated", "measure_shift"):
        overrides[key] = getattr(args, key)
    if args.cov:
        overrides.update(parse_cov(args.cov))
    if args.checkpoints:
        overrides["checkpoints"] = args.checkpoints
    cfg = load_with_overrides(args.config, overrides)
    out = _prepare_out(cfg)

    batch = load_signals_csv(args.signals)
    inputs = {"signals": args.signals}
    truth = None
    if args.graph:
        truth = _load_truth(args.graph, cfg)
        inputs["graph"] = args.graph
    constraints = _resolve_constraints(cfg, truth)
    checkpoints = parse_checkpoints(cfg.checkpoints)

    trace_path = os.path.join(out, "trace.csv")
    with TraceCsvWriter(trace_path, flush_every=100) as writer:
        trace = run_stream(batch, cfg.online_config(), constraints=constraints,
                           ground_truth=truth, checkpoints=checkpoints,
                           measure_shift=cfg.measure_shift, max_steps=cfg.max_steps,
                           on_record=writer.append)

    final = trace.records[-1] if trace.records else None
    estimate_path = os.path.join(out, "estimate.csv")
    edges_path = os.path.join(out, "estimate.edges")
    report_path = os.path.join(out, "report.json")
    outputs = [trace_path, report_path]
    if trace.final_estimate is not None:
        from .metrics import resolve_threshold

        save_matrix_csv(estimate_path, trace.final_estimate)
        cut = resolve_threshold(trace.final_estimate, cfg.threshold)
        save_edge_list(edges_path, trace.final_estimate, threshold=cut,
                       index_base=cfg.index_base, header=f"threshold={cut!r}")
        outputs.extend([estimate_path, edges_path])
    write_json_atomic(report_path, trace.to_report())
    if cfg.figures and trace.records:
        outputs.append(figures.save_online_objective(
            os.path.join(out, "objective.png"), trace))
        if any(rec.tracking_error is not None for rec in trace.records):
            outputs.append(figures.save_tracking(os.path.join(out, "tracking.png"), trace))
        if any(rec.f_measure is not None for rec in trace.records):
            outputs.append(figures.save_f_measure_trajectory(
                os.path.join(out, "f_measure.png"), trace))
    write_manifest(os.path.join(out, "manifest.json"), "infer-online", cfg.to_dict(),
                   seeds={"init": cfg.init_seed}, inputs=inputs, outputs=outputs)
    steps = len(trace.records)
    tail = f"objective={final.post_objective!r}" if final else "no steps"
    print(f"online run: {steps} steps, {tail} -> {out}")
    return 0


def cmd_analyze(args) -> int:
    overrides = _common_overrides(args)
    if args.filter_coeffs:
        overrides["filter_coeffs"] = [float(c) for c in args.filter_coeffs.split(",")]
    cfg = load_with_overrides(args.config, overrides)
    out = _prepare_out(cfg)
    if not (args.graph or args.signals or args.cov):
        raise ValueError("configuration error: analyze needs --graph, --signals, or --cov")

    inputs = {}
    truth = None
    if args.graph:
        truth = _load_truth(args.graph, cfg)
        inputs["graph"] = args.graph

    # Covariance source: explicit matrix > sample covariance of signals >
    # model covariance from graph + filter.  Feasibility uses the covariance
    # eigenvectors when one is available (they share the shift's eigenbasis
    # in the model; a sample covariance gives the estimated basis).
    cov = None
    cov_source = None
    if args.cov:
        cov = load_matrix_csv(args.cov)
        inputs["covariance"] = args.cov
        cov_source = "file"
    elif args.signals:
        batch = load_signals_csv(args.signals)
        cov = sample_covariance(batch.signals)
        inputs["signals"] = args.signals
        cov_source = "sample"
    elif truth is not None and cfg.filter_coeffs:
        from .diffusion import ensemble_covariance

        cov = ensemble_covariance(truth.adjacency, FilterSpec(tuple(cfg.filter_coeffs)))
        cov_source = "model"

    if cov is not None:
        _, eigenvectors = np.linalg.eigh(cov)
        basis = "covariance"
    else:
        _, eigenvectors = np.linalg.eigh(truth.adjacency)
        basis = "adjacency"
    constraints = _resolve_constraints(cfg, truth)
    report = {"n": eigenvectors.shape[0], "eigenvector_basis": basis,
              "covariance_source": cov_source}
    if truth is not None:
        report["edges"] = len(truth.edges)
    rank_tol = args.rank_tol
    feas = feasibility(eigenvectors, constraints=constraints, rank_tol=rank_tol)
    report["feasibility"] = feas.to_dict()
    if truth is not None and cfg.filter_coeffs:
        shift_eigenvalues = np.linalg.eigvalsh(truth.adjacency)
        report["response"] = response_diagnostics(
            shift_eigenvalues, FilterSpec(tuple(cfg.filter_coeffs)))
    if cov is not None:
        cert = strong_convexity(cov, cfg.mu, rank_tol=rank_tol, method=args.sc_method)
        report["convexity"] = cert.to_dict()

    report_path = os.path.join(out, "analysis.json")
    write_json_atomic(report_path, report)
    outputs = [report_path]
    if cfg.figures:
        sv = np.linalg.svd(eigenvector_squares(eigenvectors), compute_uv=False)
        outputs.append(figures.save_spectrum(os.path.join(out, "spectrum.png"),
                                             sv, feas.kernel_dim))
    write_manifest(os.path.join(out, "manifest.json"), "analyze", cfg.to_dict(),
                   inputs=inputs, outputs=outputs)
    verdict = "unique" if feas.singleton else "not unique"
    print(f"analysis: kernel dim {feas.kernel_dim}, solution {verdict} "
          f"under {len(constraints) if constraints else 0} known edges -> {out}")
    return 0


def cmd_eval(args) -> int:
    overrides = _common_overrides(args)
    cfg = load_with_overrides(args.config, overrides)
    out = _prepare_out(cfg)

    truth = _load_truth(args.graph, cfg)
    inputs = {"graph": args.graph, "estimate": args.estimate}
    if args.estimate.endswith(".edges"):
        estimate = load_edge_list(args.estimate, n=truth.n, index_base=cfg.index_base)
    else:
        estimate = load_matrix_csv(args.estimate)
    scores = f_measure(estimate, truth.adjacency, cfg.threshold)
    sweep = threshold_sweep(estimate, truth.adjacency, count=args.sweep_count)
    report = {"recovery": scores.to_dict(), "n": truth.n}

    if args.trace:
        trace = load_trace_csv(args.trace)
        inputs["trace"] = args.trace
        measured = [rec for rec in trace.records if rec.f_measure is not None]
        if measured:
            report["trace_f_measure_final"] = measured[-1].f_measure

    eval_path = os.path.join(out, "eval.json")
    sweep_path = os.path.join(out, "sweep.csv")
    write_json_atomic(eval_path, report)
    with open(sweep_path, "w", encoding="utf-8") as handle:
        handle.write("threshold,precision,recall,f_measure\n")
        for row in sweep:
            handle.write(f"{row['threshold']!r},{row['precision']!r},"
                         f"{row['recall']!r},{row['f_measure']!r}\n")
    outputs = [eval_path, sweep_path]
    if cfg.figures:
        outputs.append(figures.save_pr_sweep(os.path.join(out, "pr_sweep.png"), sweep))
        outputs.append(figures.save_adjacency_heatmaps(
            os.path.join(out, "heatmap.png"), estimate, truth.adjacency))
    write_manifest(os.path.join(out, "manifest.json"), "eval", cfg.to_dict(),
                   inputs=inputs, outputs=outputs)
    print(f"eval: f={scores.f_measure:.4f} precision={scores.precision:.4f} "
          f"recall={scores.recall:.4f} at threshold {scores.threshold!r} -> {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="topotrack",
        description="Sparse network topology identification from diffused signals.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="synthesize graph, filter, and signals")
    _add_common(p)
    p.add_argument("--n", type=int, help="number of vertices")
    p.add_argument("--density", type=float, help="edge probability of the random graph")
    p.add_argument("--t-count", type=int, dest="t_count", help="number of signals")
    p.add_argument("--filter-order", type=int, dest="filter_order",
                   help="order of the random diffusion filter")
    p.add_argument("--filter-coeffs", dest="filter_coeffs",
                   help="explicit comma-separated filter taps, lowest order first")
    p.add_argument("--graph", help="start from this edge list instead of a random graph")
    p.add_argument("--changes", help="rewiring schedule step:fraction[:seed],...")
    p.add_argument("--signals-per-step", type=int, dest="signals_per_step",
                   help="signals per solver step used to place scheduled changes")
    p.set_defaults(handler=cmd_generate)

    p = sub.add_parser("infer-batch", help="solve on a fixed covariance or signal file")
    _add_common(p)
    p.add_argument("--signals", help="signals CSV (one row per sample)")
    p.add_argument("--cov", help="covariance matrix CSV (alternative to --signals)")
    p.add_argument("--graph", help="reference edge list for scoring")
    p.add_argument("--step-policy", dest="step_policy",
                   choices=("lipschitz", "optimal_sc", "fixed"))
    p.add_argument("--gamma", type=float, help="step size for the fixed policy")
    p.add_argument("--sc-constant", type=float, dest="sc_constant",
                   help="strong-convexity modulus for the optimal_sc policy")
    p.add_argument("--max-iters", type=int, dest="max_iters")
    p.add_argument("--rel-tol", type=float, dest="rel_tol")
    p.add_argument("--init-seed", type=int, dest="init_seed")
    p.add_argument("--init-density", type=float, dest="init_density")
    p.add_argument("--accelerated", action="store_const", const=True,
                   help="use the accelerated proximal-gradient variant")
    p.set_defaults(handler=cmd_infer_batch)

    p = sub.add_parser("infer-online", help="track topology over a signal stream")
    _add_common(p)
    p.add_argument("--signals", required=True, help="signals CSV, consumed in order")
    p.add_argument("--graph", help="reference edge list for f-measure checkpoints")
    p.add_argument("--cov", help="covariance memory: infinite, ewma=BETA, or window=W")
    p.add_argument("--iters-per-step", type=int, dest="iters_per_step",
                   help="proximal-gradient steps per arrival")
    p.add_argument("--minibatch", type=int, help="signals folded in per step")
    p.add_argument("--warmup", type=int, help="signals used to initialize the covariance")
    p.add_argument("--init-scale", type=float, dest="init_scale",
                   help="scale of the identity covariance prior")
    p.add_argument("--checkpoints", help="none, all, every:K, or comma list of steps")
    p.add_argument("--max-steps", type=int, dest="max_steps")
    p.add_argument("--measure-shift", dest="measure_shift", action="store_const", const=True,
                   help="also measure per-step objective drift at checkpoints")
    p.add_argument("--accelerated", action="store_const", const=True,
                   help=argparse.SUPPRESS)
    p.set_defaults(handler=cmd_infer_online)

    p = sub.add_parser("analyze", help="identifiability and conditioning diagnostics")
    _add_common(p)
    p.add_argument("--graph", help="edge list of the graph to analyze")
    p.add_argument("--signals", help="signals CSV; analyzed through its sample covariance")
    p.add_argument("--cov", help="covariance matrix CSV for the conditioning certificate")
    p.add_argument("--filter-coeffs", dest="filter_coeffs",
                   help="filter taps to derive the model covariance from the graph")
    p.add_argument("--rank-tol", type=float, dest="rank_tol", default=1e-8,
                   help="relative singular-value cutoff")
    p.add_argument("--sc-method", dest="sc_method", default="auto",
                   choices=("auto", "exact", "spectral"))
    p.set_defaults(handler=cmd_analyze)

    p = sub.add_parser("eval", help="score an estimate against a reference graph")
    _add_common(p)
    p.add_argument("--estimate", required=True, help="estimate matrix CSV or edge list")
    p.add_argument("--graph", required=True, help="reference edge list")
    p.add_argument("--trace", help="trace CSV from infer-online for trajectory stats")
    p.add_argument("--sweep-count", type=int, dest="sweep_count", default=50)
    p.set_defaults(handler=cmd_eval)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except (FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"error E_NUMERIC: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        message = str(exc)
        if message.startswith("data error"):
            print(f"error E_IO: {message}", file=sys.stderr)
            return EXIT_IO
        print(f"error E_CONFIG: {message}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error E_IO: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
