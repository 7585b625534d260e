"""Support-recovery scoring and objective-trajectory comparison.

Edges are read off an estimate by thresholding; the default threshold is
relative, 0.1 times the largest off-diagonal entry, with an absolute floor of
1e-4 so an all-noise estimate cannot certify itself by rescaling.
"""

from __future__ import annotations

import dataclasses

import numpy as np

from .graphs import support

REL_THRESHOLD_FLOOR = 1e-4


def resolve_threshold(estimate: np.ndarray, threshold: tuple[str, float] = ("rel", 0.1)) -> float:
    """Turn a ('rel', f) or ('abs', v) threshold into an absolute cut.

    Relative thresholds scale with the largest off-diagonal entry and are
    floored at 1e-4; absolute thresholds are used verbatim.
    """
    kind, value = threshold
    if kind == "abs":
        if value < 0:
            raise ValueError(f"parameter error: negative absolute threshold {value}")
        return float(value)
    if kind != "rel":
        raise ValueError(f"parameter error: threshold kind must be 'rel' or 'abs', got {kind!r}")
    if value < 0:
        raise ValueError(f"parameter error: negative relative threshold {value}")
    estimate = np.asarray(estimate, dtype=float)
    off = estimate - np.diag(np.diag(estimate))
    peak = float(off.max(initial=0.0))
    return max(value * peak, REL_THRESHOLD_FLOOR)


@dataclasses.dataclass(frozen=True)
class RecoveryMetrics:
    precision: float
    recall: float
    f_measure: float
    true_positives: int
    false_positives: int
    false_negatives: int
    threshold: float

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def f_measure(estimate: np.ndarray, truth: np.ndarray,
              threshold: tuple[str, float] | float = ("rel", 0.1)) -> RecoveryMetrics:
    """Edge precision, recall, and their harmonic mean against a reference graph.

    ``threshold`` is a ('rel'|'abs', value) pair or a plain absolute value.
    The reference's edges are its strictly positive off-diagonal entries; a
    reference without edges cannot be scored.

    Raises
    ------
    ValueError
        On shape mismatch or an edgeless reference.
    """
    estimate = np.asarray(estimate, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if estimate.shape != truth.shape:
        raise ValueError(
            f"dimension error: estimate shape {estimate.shape} != reference shape {truth.shape}")
    if not isinstance(threshold, tuple):
        threshold = ("abs", float(threshold))
    cut = resolve_threshold(estimate, threshold)
    found = support(estimate, cut)
    actual = support(truth, 0.0)
    if not actual:
        raise ValueError("parameter error: reference graph has no edges to score against")
    tp = len(found & actual)
    fp = len(found - actual)
    fn = len(actual - found)
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn)
    f = 2.0 * precision * recall / (precision + recall) if precision + recall else 0.0
    return RecoveryMetrics(precision, recall, f, tp, fp, fn, cut)


def threshold_sweep(estimate: np.ndarray, truth: np.ndarray,
                    count: int = 50) -> list[dict]:
    """Precision/recall table over a geometric grid of absolute thresholds."""
    estimate = np.asarray(estimate, dtype=float)
    off = estimate - np.diag(np.diag(estimate))
    peak = float(off.max(initial=0.0))
    if peak <= 0.0:
        grid = np.array([0.0])
    else:
        grid = np.geomspace(max(peak * 1e-6, 1e-12), peak, count)
    rows = []
    for cut in grid:
        scores = f_measure(estimate, truth, ("abs", float(cut)))
        rows.append({"threshold": float(cut), "precision": scores.precision,
                     "recall": scores.recall, "f_measure": scores.f_measure})
    return rows


@dataclasses.dataclass(frozen=True)
class ChangeSummary:
    change_step: int
    pre_change_mean: float
    spike: float
    spike_step: int
    recovery_step: int | None
    recovered: bool


@dataclasses.dataclass(frozen=True)
class TrajectorySummary:
    """Objective-gap statistics of an online run at its measured checkpoints."""

    steps: np.ndarray
    gaps: np.ndarray
    mean_gap: float
    max_gap: float
    changes: list[ChangeSummary]

    def to_dict(self) -> dict:
        return {
            "steps": [int(s) for s in self.steps],
            "gaps": [float(g) for g in self.gaps],
            "mean_gap": self.mean_gap,
            "max_gap": self.max_gap,
            "changes": [dataclasses.asdict(c) for c in self.changes],
        }


def trajectory_compare(trace, window: int = 5, recovery_factor: float = 1.5) -> TrajectorySummary:
    """Compare the online objective against the per-step optimum along a trace.

    Uses the checkpoints where the optimum was measured.  For every topology
    change seen in the trace, reports the pre-change windowed mean gap (last
    ``window`` measured checkpoints before the change), the post-change spike
    (largest gap), and the first step at or after the spike at which the gap
    returns within ``recovery_factor`` times the pre-change mean.  Recovery is
    only counted from the spike onward: when the gap lags the change (a slow
    covariance estimator has not absorbed the new topology yet), a low gap at
    the change step itself does not certify anything.

    Raises
    ------
    ValueError
        If the trace has no measured checkpoints.
    """
    measured = [rec for rec in trace.records if rec.opt_objective is not None]
    if not measured:
        raise ValueError("parameter error: trace has no checkpoints with a measured optimum")
    steps = np.array([rec.t for rec in measured], dtype=int)
    gaps = np.array([rec.objective - rec.opt_objective for rec in measured], dtype=float)

    change_steps = []
    last_version = trace.records[0].gt_version
    for rec in trace.records:
        if rec.gt_version is not None and last_version is not None and rec.gt_version != last_version:
            change_steps.append(rec.t)
        last_version = rec.gt_version

    changes = []
    for change in change_steps:
        before = gaps[steps < change]
        after_mask = steps >= change
        if before.size == 0 or not after_mask.any():
            continue
        base = float(np.mean(before[-window:]))
        after_gaps = gaps[after_mask]
        after_steps = steps[after_mask]
        peak = int(np.argmax(after_gaps))
        spike = float(after_gaps[peak])
        spike_step = int(after_steps[peak])
        level = recovery_factor * base
        recovered = peak + np.nonzero(after_gaps[peak:] <= level)[0]
        recovery_step = int(after_steps[recovered[0]]) if recovered.size else None
        changes.append(ChangeSummary(change, base, spike, spike_step,
                                     recovery_step, recovered.size > 0))
    return TrajectorySummary(steps, gaps, float(gaps.mean()), float(gaps.max()), changes)
