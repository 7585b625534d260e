"""Streaming proximal-gradient topology tracking.

Each arriving minibatch first updates the covariance estimate and then the
iterate takes one or more proximal-gradient steps on the refreshed objective.
A trace record is appended per step; at checkpoint steps the current objective
is additionally solved to optimality so tracking error, optimum drift, and the
tracking bound can be measured.

Time convention shared with the bound analysis: record index tau (0-based)
is "time tau".  ``records[tau].objective`` is the objective of the iterate
that entered step tau + 1, evaluated after that step's covariance update, and
``records[tau].nu_prev`` is the optimum drift between records tau - 1 and tau.
"""

from __future__ import annotations

import dataclasses
import math
import warnings
from collections.abc import Callable, Iterable, Iterator

import numpy as np

from . import metrics as metrics_mod
from .analysis import objective_shift_unit, strong_convexity
from .covariance import CovarianceEstimator, top_eigenpair
from .diffusion import FilterSpec, build_filter
from .graphs import EdgeConstraints, GroundTruth, support
from .solver import (
    SolverConfig,
    batch_solve,
    gradient,
    lipschitz_constant,
    objective,
    prox,
    sanitize_start,
)

TRACE_SCHEMA_VERSION = 1
TRACE_COLUMNS = ("t", "objective", "gamma", "lambda_max",
                 "tracking_error", "bound", "f_measure")


@dataclasses.dataclass
class OnlineConfig(SolverConfig):
    """Streaming-run configuration on top of the batch solver settings.

    The batch fields keep their meaning for the per-step updates
    (``step_policy`` resolves the step size against the current covariance)
    except ``max_iters``/``rel_tol``, which only govern the checkpoint oracle
    solves; the streaming update always takes exactly ``iters_per_step``
    proximal-gradient steps.
    """

    iters_per_step: int = 1
    minibatch: int = 1
    cov_mode: str = "infinite"
    ewma_beta: float = 0.99
    window: int | None = None
    warmup: int = 0
    init_scale: float = 1.0
    threshold: tuple[str, float] = ("rel", 0.1)
    oracle_rel_tol: float = 1e-13
    oracle_max_iters: int = 200_000
    sc_method: str = "auto"

    def __post_init__(self):
        super().__post_init__()
        if self.iters_per_step < 1:
            raise ValueError(
                f"parameter error: iters_per_step must be >= 1, got {self.iters_per_step}")
        if self.minibatch < 1:
            raise ValueError(f"parameter error: minibatch must be >= 1, got {self.minibatch}")
        if self.warmup < 0:
            raise ValueError(f"parameter error: warmup must be >= 0, got {self.warmup}")
        if self.init_scale <= 0:
            raise ValueError(f"parameter error: init_scale must be > 0, got {self.init_scale}")
        if self.oracle_rel_tol <= 0:
            raise ValueError(
                f"parameter error: oracle_rel_tol must be > 0, got {self.oracle_rel_tol}")

    def oracle_config(self) -> SolverConfig:
        """Batch configuration used for checkpoint optimum solves."""
        return SolverConfig(mu=self.mu, step_policy="lipschitz",
                            max_iters=self.oracle_max_iters, rel_tol=self.oracle_rel_tol,
                            accelerated=False, init_seed=self.init_seed,
                            init_density=self.init_density)


@dataclasses.dataclass
class TraceRecord:
    """One streaming step.  Optional fields are filled at checkpoints only."""

    t: int
    objective: float
    post_objective: float
    gamma: float
    lambda_max: float
    lipschitz: float
    iters: int
    iterate_norm: float
    gt_version: int | None = None
    opt_objective: float | None = None
    tracking_error: float | None = None
    m: float | None = None
    sigma_min: float | None = None
    nu_prev: float | None = None
    delta_unit_prev: float | None = None
    f_measure: float | None = None
    bound: float | None = None


def _format_cell(value) -> str:
    if value is None:
        return ""
    return repr(float(value))


def format_trace_row(record: TraceRecord) -> str:
    cells = [str(record.t)]
    for name in TRACE_COLUMNS[1:]:
        cells.append(_format_cell(getattr(record, name)))
    return ",".join(cells)


def trace_header_lines() -> list[str]:
    return [f"# topotrack trace v{TRACE_SCHEMA_VERSION}", ",".join(TRACE_COLUMNS)]


class TraceCsvWriter:
    """Incremental trace writer that flushes every ``flush_every`` rows.

    Produces byte-identical output to :meth:`RunTrace.export_csv` for the same
    records, so a run interrupted mid-stream still leaves a usable file.
    """

    def __init__(self, path, flush_every: int = 100):
        if flush_every < 1:
            raise ValueError(f"parameter error: flush_every must be >= 1, got {flush_every}")
        self._handle = open(path, "w", encoding="utf-8")
        self._flush_every = flush_every
        self._since_flush = 0
        for line in trace_header_lines():
            self._handle.write(line + "\n")
        self._handle.flush()

    def append(self, record: TraceRecord) -> None:
        self._handle.write(format_trace_row(record) + "\n")
        self._since_flush += 1
        if self._since_flush >= self._flush_every:
            self._handle.flush()
            self._since_flush = 0

    def close(self) -> None:
        if not self._handle.closed:
            self._handle.flush()
            self._handle.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
        return False


@dataclasses.dataclass
class RunTrace:
    """Full record of a streaming run."""

    n: int
    records: list[TraceRecord] = dataclasses.field(default_factory=list)
    s0: np.ndarray | None = None
    final_estimate: np.ndarray | None = None
    optima: list[np.ndarray] = dataclasses.field(default_factory=list)
    initial: dict = dataclasses.field(default_factory=dict)

    @property
    def final_objective(self) -> float:
        if not self.records:
            raise ValueError("data error: empty trace")
        return self.records[-1].post_objective

    def checkpoint_records(self) -> list[TraceRecord]:
        return [rec for rec in self.records if rec.opt_objective is not None]

    def export_csv(self, path) -> None:
        """Write the per-step trace as CSV with a schema-version comment."""
        lines = trace_header_lines()
        lines.extend(format_trace_row(rec) for rec in self.records)
        with open(path, "w", encoding="utf-8") as handle:
            handle.write("\n".join(lines) + "\n")

    def to_report(self) -> dict:
        checkpoints = self.checkpoint_records()
        report = {
            "steps": len(self.records),
            "n": self.n,
            "checkpoints": len(checkpoints),
        }
        if self.records:
            report["final_objective"] = self.records[-1].post_objective
        if checkpoints:
            last = checkpoints[-1]
            report["final_tracking_error"] = last.tracking_error
            if last.f_measure is not None:
                report["final_f_measure"] = last.f_measure
        return report


def load_trace_csv(path) -> RunTrace:
    """Read a trace CSV back into a :class:`RunTrace`.

    Only the exported columns are recovered; fields that are not serialized
    (post-objective, Lipschitz constants, drift terms) come back as zero or
    ``None``.  Intended for plotting and trajectory comparison.
    """
    records = []
    with open(path, "r", encoding="utf-8") as handle:
        lines = [ln.strip() for ln in handle if ln.strip()]
    body = [ln for ln in lines if not ln.startswith("#")]
    if not body or body[0].split(",") != list(TRACE_COLUMNS):
        raise ValueError(f"data error: {path} is not a topotrack trace file")
    for line in body[1:]:
        cells = line.split(",")
        if len(cells) != len(TRACE_COLUMNS):
            raise ValueError(f"data error: malformed trace row {line!r}")

        def _opt(cell):
            return float(cell) if cell else None

        records.append(TraceRecord(
            t=int(cells[0]), objective=float(cells[1]), post_objective=float(cells[1]),
            gamma=float(cells[2]), lambda_max=float(cells[3]), lipschitz=0.0,
            iters=0, iterate_norm=0.0, tracking_error=_opt(cells[4]),
            bound=_opt(cells[5]), f_measure=_opt(cells[6]),
        ))
        if records[-1].tracking_error is not None:
            # Exported checkpoints carry the error but not the optimum value;
            # mark them as measured so checkpoint_records() still finds them.
            records[-1].opt_objective = math.nan
    n = 0
    return RunTrace(n=n, records=records)


class OnlineState:
    """Mutable streaming-solver state: covariance estimate plus iterate.

    Splitting ``ingest`` (covariance update, step-size refresh) from
    ``advance`` (proximal-gradient steps) keeps the objective used for the
    record well defined: the pre-step iterate is scored against the
    already-updated covariance.
    """

    def __init__(self, n: int, config: OnlineConfig,
                 constraints: EdgeConstraints | None = None,
                 s0: np.ndarray | None = None,
                 warmup_signals: np.ndarray | None = None):
        self.config = config
        self.constraints = constraints
        if warmup_signals is not None:
            block = np.atleast_2d(np.asarray(warmup_signals, dtype=float))
            self.estimator = CovarianceEstimator(
                n, mode=config.cov_mode, beta=config.ewma_beta,
                window=config.window, warmup=block)
        else:
            self.estimator = CovarianceEstimator(
                n, mode=config.cov_mode, beta=config.ewma_beta,
                window=config.window, scale=config.init_scale)
        if s0 is None:
            rng = np.random.default_rng(config.init_seed)
            s0 = np.zeros((n, n))
            upper = rng.uniform(size=(n, n))
            mask = np.triu(rng.uniform(size=(n, n)) < config.init_density, k=1)
            s0[mask] = upper[mask]
            s0 = s0 + s0.T
        self.iterate = sanitize_start(s0, constraints)
        self.s0 = self.iterate.copy()
        self.t = 0
        self.trace = RunTrace(n=n, s0=self.s0.copy())
        self._eigvec: np.ndarray | None = None
        self._opt_warm: np.ndarray | None = None
        self._last_opt: np.ndarray | None = None
        self._prev_cov: np.ndarray | None = None
        self._pending: dict | None = None
        # Running tracking-bound recursion state (carried values between
        # checkpoints follow the same rule as BoundInputs.from_trace).
        self._bound: float | None = None
        self._m_carry: float | None = None
        self._nu_carry: float = 0.0
        self._last_step_info: dict | None = None

    @property
    def n(self) -> int:
        return self.iterate.shape[0]

    def ingest(self, signals: np.ndarray) -> None:
        """Fold a minibatch into the covariance and refresh the step size."""
        signals = np.atleast_2d(np.asarray(signals, dtype=float))
        if signals.shape[1] != self.n:
            raise ValueError(
                f"dimension error: signals have {signals.shape[1]} entries, expected {self.n}")
        if self._pending is not None:
            raise ValueError("data error: ingest called twice without advance")
        self.estimator.update_many(signals)
        cov = self.estimator.matrix
        if not np.all(np.isfinite(cov)):
            raise FloatingPointError(
                f"numerical error: covariance became non-finite at step {self.t + 1}")
        lam, self._eigvec = top_eigenpair(cov, v0=self._eigvec)
        lipschitz = lipschitz_constant(cov, self.config.mu, lam_max=lam)
        if self.config.step_policy == "fixed":
            gamma = self.config.gamma
            if lipschitz > 0 and not gamma < 2.0 / lipschitz:
                raise ValueError(
                    f"configuration error: fixed step {gamma} violates gamma < 2/M "
                    f"with M={lipschitz}")
        elif self.config.step_policy == "optimal_sc":
            gamma = 2.0 / (lipschitz + self.config.sc_constant)
        else:
            gamma = 1.0 / lipschitz if lipschitz > 0 else self.config.gamma or 1.0
        self._pending = {"cov": cov, "lam": lam, "gamma": gamma,
                         "lipschitz": lipschitz, "batch": signals.shape[0]}

    def measure(self, ground_truth: GroundTruth | None = None,
                measure_shift: bool = False, keep_optimum: bool = False) -> dict:
        """Solve the current objective to optimality and score the iterate.

        Must be called between :meth:`ingest` and :meth:`advance` so the
        measurement refers to the same objective the step will use.
        """
        if self._pending is None:
            raise ValueError("data error: measure requires a pending ingest")
        cov = self._pending["cov"]
        cfg = self.config.oracle_config()
        warm = self._opt_warm if self._opt_warm is not None else self.iterate.copy()
        result = batch_solve(cov, cfg, constraints=self.constraints, s0=warm)
        opt = result.estimate
        self._opt_warm = opt.copy()
        out = {
            "opt_objective": objective(opt, cov, self.config.mu),
            "tracking_error": float(np.linalg.norm(self.iterate - opt)),
        }
        if self._last_opt is not None:
            out["nu_prev"] = float(np.linalg.norm(opt - self._last_opt))
        self._last_opt = opt.copy()
        if keep_optimum:
            self.trace.optima.append(opt.copy())
        if measure_shift and self._prev_cov is not None:
            out["delta_unit_prev"] = objective_shift_unit(
                self._prev_cov, cov, self.config.mu)
        try:
            cert = strong_convexity(cov, self.config.mu, method=self.config.sc_method)
            out["m"] = cert.m
            out["sigma_min"] = cert.sigma_min
        except ValueError:
            pass
        if ground_truth is not None:
            scores = metrics_mod.f_measure(self.iterate, ground_truth.adjacency,
                                           self.config.threshold)
            out["f_measure"] = scores.f_measure
        return out

    def advance(self, gt_version: int | None = None,
                measurement: dict | None = None) -> TraceRecord:
        """Take the per-step proximal-gradient updates and append a record."""
        if self._pending is None:
            raise ValueError("data error: advance requires a pending ingest")
        pend = self._pending
        self._pending = None
        cov, lam, gamma = pend["cov"], pend["lam"], pend["gamma"]
        pre_objective = objective(self.iterate, cov, self.config.mu)
        pre_norm = float(np.linalg.norm(self.iterate))
        current = self.iterate
        for _ in range(self.config.iters_per_step):
            step = current - gamma * gradient(current, cov, self.config.mu)
            if not np.all(np.isfinite(step)):
                raise FloatingPointError(
                    f"numerical error: non-finite iterate at step {self.t + 1}")
            current = prox(step, gamma, self.constraints)
        self.iterate = current
        post_objective = objective(current, cov, self.config.mu)
        self.t += 1
        record = TraceRecord(
            t=self.t, objective=pre_objective, post_objective=post_objective,
            gamma=gamma, lambda_max=lam, lipschitz=pend["lipschitz"],
            iters=self.config.iters_per_step, iterate_norm=pre_norm,
            gt_version=gt_version,
        )
        if measurement:
            for key, value in measurement.items():
                setattr(record, key, value)
        self._update_bound(record)
        self.trace.records.append(record)
        self._prev_cov = cov
        self._last_step_info = {"gamma": gamma, "lipschitz": pend["lipschitz"],
                                "iters": self.config.iters_per_step}
        return record

    def _update_bound(self, record: TraceRecord) -> None:
        """Advance the contraction recursion b_{tau+1} = L^i b_tau + nu_tau.

        Seeded by the first measured tracking error; between checkpoints the
        last certified modulus and the largest seen drift are carried, which
        matches the offline bound computed from the same trace.
        """
        if self._bound is None:
            if record.tracking_error is not None:
                self._bound = record.tracking_error
                record.bound = record.tracking_error
        else:
            prev = self._last_step_info
            if prev is not None and self._m_carry is not None:
                # The steps between this record and the last ran on the
                # previous covariance, so the factor pairs the previous
                # gamma and Lipschitz constant with the modulus certified
                # at (or carried to) that record, never this record's own.
                rate = max(abs(1.0 - prev["gamma"] * self._m_carry),
                           abs(1.0 - prev["gamma"] * prev["lipschitz"]))
                nu = record.nu_prev if record.nu_prev is not None else self._nu_carry
                self._bound = rate ** prev["iters"] * self._bound + nu
                record.bound = self._bound
        if record.m is not None:
            self._m_carry = record.m
        if record.nu_prev is not None:
            self._nu_carry = max(self._nu_carry, record.nu_prev)


def online_step(state: OnlineState, signals: np.ndarray, checkpoint: bool = False,
                ground_truth: GroundTruth | None = None,
                measure_shift: bool = False, keep_optimum: bool = False) -> TraceRecord:
    """One streaming step: covariance update, optional measurement, pg steps."""
    state.ingest(signals)
    measurement = None
    if checkpoint:
        measurement = state.measure(ground_truth=ground_truth,
                                    measure_shift=measure_shift,
                                    keep_optimum=keep_optimum)
    version = ground_truth.version if ground_truth is not None else None
    return state.advance(gt_version=version, measurement=measurement)


def _signal_iterator(source) -> Iterator[np.ndarray]:
    if hasattr(source, "signals"):
        source = source.signals
    if isinstance(source, np.ndarray):
        if source.ndim != 2:
            raise ValueError(f"dimension error: signal array must be 2-d, got {source.ndim}-d")
        return iter(source)
    return iter(source)


def _resolve_checkpoints(checkpoints) -> Callable[[int], bool]:
    if checkpoints == "all":
        return lambda t: True
    if callable(checkpoints):
        return checkpoints
    wanted = set(int(t) for t in checkpoints)
    return lambda t: t in wanted


def run_stream(source, config: OnlineConfig,
               constraints: EdgeConstraints | None = None,
               ground_truth: GroundTruth | Callable[[], GroundTruth] | None = None,
               checkpoints: Iterable[int] | str = (),
               measure_shift: bool = False, keep_optima: bool = False,
               max_steps: int | None = None, s0: np.ndarray | None = None,
               on_record: Callable[[TraceRecord], None] | None = None) -> RunTrace:
    """Drive the online solver over a signal source and collect the trace.

    Parameters
    ----------
    source : array, SignalBatch, iterable of 1-d arrays, or DriftingStream
        Signal supply.  The first ``config.warmup`` signals initialize the
        covariance without taking solver steps; afterwards every
        ``config.minibatch`` signals form one step (a short final chunk still
        counts as a step).
    ground_truth : GroundTruth or zero-argument callable, optional
        Reference graph for f-measure scoring, re-read every step so drifting
        sources are followed.  A DriftingStream source supplies its own.
    checkpoints : iterable of step indices, "all", or predicate
        Steps at which the optimum oracle runs.
    measure_shift : bool
        Also measure the unit objective-shift bound at checkpoints (needed
        for regret analysis; adds one eigenvalue problem per checkpoint).
    max_steps : int, optional
        Stop after this many steps (required for endless sources).

    Returns
    -------
    RunTrace
    """
    if ground_truth is None and isinstance(source, DriftingStream):
        ground_truth = lambda: source.ground_truth  # noqa: E731
    provider: Callable[[], GroundTruth | None]
    if ground_truth is None:
        provider = lambda: None  # noqa: E731
    elif isinstance(ground_truth, GroundTruth):
        provider = lambda: ground_truth  # noqa: E731
    else:
        provider = ground_truth

    signals = _signal_iterator(source)
    head: list[np.ndarray] = []
    for _ in range(config.warmup if config.warmup > 0 else 1):
        try:
            head.append(np.asarray(next(signals), dtype=float))
        except StopIteration:
            break
    if head:
        n = head[0].shape[0]
    elif s0 is not None:
        n = np.asarray(s0).shape[0]
    else:
        raise ValueError(
            "data error: empty signal source and no initial iterate to size the state")
    if 0 < len(head) < config.warmup:
        warnings.warn(
            f"source exhausted during warmup ({len(head)} of {config.warmup} signals)")

    warm_block = np.asarray(head) if (config.warmup > 0 and head) else None
    state = OnlineState(n, config, constraints=constraints, s0=s0,
                        warmup_signals=warm_block)
    is_checkpoint = _resolve_checkpoints(checkpoints)
    leftover = head[0] if (config.warmup == 0 and head) else None

    def _chunks() -> Iterator[np.ndarray]:
        buffer = [] if leftover is None else [leftover]
        for sig in signals:
            buffer.append(np.asarray(sig, dtype=float))
            if len(buffer) == config.minibatch:
                yield np.asarray(buffer)
                buffer = []
        if buffer:
            yield np.asarray(buffer)

    for chunk in _chunks():
        step_index = state.t + 1
        truth = provider()
        record = online_step(
            state, chunk, checkpoint=is_checkpoint(step_index),
            ground_truth=truth, measure_shift=measure_shift,
            keep_optimum=keep_optima)
        if on_record is not None:
            on_record(record)
        if max_steps is not None and state.t >= max_steps:
            break
    state.trace.initial = {
        "warmup": config.warmup,
        "init_scale": None if config.warmup else config.init_scale,
        "cov_mode": config.cov_mode,
    }
    state.trace.final_estimate = state.iterate.copy()
    return state.trace


def rewire(truth: GroundTruth, fraction: float, seed: int = 0,
           constraints: EdgeConstraints | None = None,
           weight: float = 1.0) -> GroundTruth:
    """Replace ``ceil(fraction * |E|)`` edges with fresh non-edges.

    Edges pinned by ``constraints`` are never removed.  New edges are drawn
    uniformly from the original graph's non-edges with the given weight, so
    the edge count is preserved.  Returns a new graph with ``version + 1``.

    Raises
    ------
    ValueError
        If not enough unpinned edges or non-edges exist.
    """
    if not 0.0 < fraction <= 1.0:
        raise ValueError(f"parameter error: rewire fraction must be in (0, 1], got {fraction}")
    adjacency = truth.adjacency.copy()
    n = truth.n
    edges = sorted(support(adjacency, 0.0))
    pinned = set(constraints.pairs) if constraints is not None else set()
    removable = [e for e in edges if e not in pinned]
    count = math.ceil(fraction * len(edges))
    if count > len(removable):
        raise ValueError(
            f"data error: cannot remove {count} edges, only {len(removable)} are unpinned")
    all_pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    non_edges = [p for p in all_pairs if p not in set(edges)]
    if count > len(non_edges):
        raise ValueError(
            f"data error: cannot add {count} edges, only {len(non_edges)} non-edges exist")
    rng = np.random.default_rng(seed)
    removed_idx = rng.choice(len(removable), size=count, replace=False)
    added_idx = rng.choice(len(non_edges), size=count, replace=False)
    for k in removed_idx:
        i, j = removable[k]
        adjacency[i, j] = adjacency[j, i] = 0.0
    for k in added_idx:
        i, j = non_edges[k]
        adjacency[i, j] = adjacency[j, i] = weight
    return GroundTruth(adjacency=adjacency, version=truth.version + 1)


@dataclasses.dataclass(frozen=True)
class ChangeEvent:
    """Topology change scheduled at the start of ``step`` (1-based)."""

    step: int
    fraction: float
    seed: int | None = None


class DriftingStream:
    """Endless signal generator over a graph that rewires on schedule.

    Signals are stationary diffusions of white noise through the current
    graph's filter.  A change scheduled at step ``t0`` takes effect before
    the first signal of step ``t0`` is drawn, where steps consume
    ``signals_per_step`` signals each.  Iterate it with ``run_stream`` and a
    ``max_steps`` cap.
    """

    def __init__(self, truth: GroundTruth, spec: FilterSpec, seed: int = 0,
                 changes: Iterable[ChangeEvent] = (), signals_per_step: int = 1,
                 constraints: EdgeConstraints | None = None,
                 change_weight: float = 1.0):
        if signals_per_step < 1:
            raise ValueError(
                f"parameter error: signals_per_step must be >= 1, got {signals_per_step}")
        self._truth = truth
        self._spec = spec
        self._rng = np.random.default_rng(seed)
        self._seed = seed
        self._constraints = constraints
        self._change_weight = change_weight
        self._changes = sorted(changes, key=lambda c: c.step)
        for change in self._changes:
            if change.step < 1:
                raise ValueError(
                    f"parameter error: change step must be >= 1, got {change.step}")
        self._per_step = signals_per_step
        self._count = 0
        self._filter = build_filter(truth.adjacency, spec)

    @property
    def ground_truth(self) -> GroundTruth:
        return self._truth

    def _apply_due_changes(self) -> None:
        step = self._count // self._per_step + 1
        while self._changes and self._changes[0].step <= step:
            change = self._changes.pop(0)
            seed = change.seed if change.seed is not None else self._seed + 7919 * change.step
            self._truth = rewire(self._truth, change.fraction, seed=seed,
                                 constraints=self._constraints,
                                 weight=self._change_weight)
            self._filter = build_filter(self._truth.adjacency, self._spec)

    def __iter__(self) -> Iterator[np.ndarray]:
        return self

    def __next__(self) -> np.ndarray:
        if self._count % self._per_step == 0:
            self._apply_due_changes()
        white = self._rng.standard_normal(self._truth.n)
        self._count += 1
        return self._filter @ white
