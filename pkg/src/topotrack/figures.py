"""Matplotlib renderings of runs: trajectories, heatmaps, spectra.

All helpers draw from in-memory results, save to a path, close the figure,
and return the path.  The Agg backend is forced so they work headless.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def _finish(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def save_objective_trajectory(path, trajectory, log_scale: bool = True):
    """Objective value per iteration of a batch solve."""
    values = np.asarray(trajectory, dtype=float)
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.plot(np.arange(values.size), values, lw=1.2)
    if log_scale and values.size and values.min() > 0:
        ax.set_yscale("log")
    ax.set_xlabel("iteration")
    ax.set_ylabel("objective")
    ax.set_title("batch objective trajectory")
    ax.grid(True, alpha=0.3)
    return _finish(fig, path)


def save_online_objective(path, trace):
    """Per-step objective of a streaming run, with optimum where measured."""
    steps = [rec.t for rec in trace.records]
    values = [rec.objective for rec in trace.records]
    fig, ax = plt.subplots(figsize=(6.5, 4.0))
    ax.plot(steps, values, lw=1.0, label="iterate objective")
    measured = [(rec.t, rec.opt_objective) for rec in trace.records
                if rec.opt_objective is not None]
    if measured:
        ax.plot([t for t, _ in measured], [v for _, v in measured],
                "o--", ms=3, lw=0.8, label="optimum")
    ax.set_xlabel("step")
    ax.set_ylabel("objective")
    ax.set_title("online objective")
    ax.legend(loc="best", fontsize=8)
    ax.grid(True, alpha=0.3)
    return _finish(fig, path)


def save_tracking(path, trace):
    """Measured tracking error with the contraction bound overlaid."""
    err = [(rec.t, rec.tracking_error) for rec in trace.records
           if rec.tracking_error is not None]
    bnd = [(rec.t, rec.bound) for rec in trace.records if rec.bound is not None]
    fig, ax = plt.subplots(figsize=(6.5, 4.0))
    if err:
        ax.plot([t for t, _ in err], [v for _, v in err], "o-", ms=3, lw=1.0,
                label="tracking error")
    if bnd:
        ax.plot([t for t, _ in bnd], [v for _, v in bnd], "s--", ms=3, lw=1.0,
                label="bound")
    positive = [v for _, v in err + bnd if v is not None and v > 0]
    if positive and min(positive) > 0:
        ax.set_yscale("log")
    ax.set_xlabel("step")
    ax.set_ylabel("distance to optimum")
    ax.set_title("tracking error vs. bound")
    ax.legend(loc="best", fontsize=8)
    ax.grid(True, alpha=0.3)
    return _finish(fig, path)


def save_f_measure_trajectory(path, trace):
    """Edge-recovery f-measure at the measured checkpoints."""
    pts = [(rec.t, rec.f_measure) for rec in trace.records if rec.f_measure is not None]
    fig, ax = plt.subplots(figsize=(6.5, 4.0))
    if pts:
        ax.plot([t for t, _ in pts], [v for _, v in pts], "o-", ms=3, lw=1.0)
    ax.set_xlabel("step")
    ax.set_ylabel("f-measure")
    ax.set_ylim(-0.02, 1.02)
    ax.set_title("support recovery over time")
    ax.grid(True, alpha=0.3)
    return _finish(fig, path)


def save_adjacency_heatmaps(path, estimate, truth=None):
    """Heatmap of the estimate, side by side with the reference if given."""
    estimate = np.asarray(estimate, dtype=float)
    panels = 1 if truth is None else 2
    fig, axes = plt.subplots(1, panels, figsize=(4.2 * panels, 3.8))
    axes = np.atleast_1d(axes)
    im = axes[0].imshow(estimate, cmap="viridis")
    axes[0].set_title("estimate")
    fig.colorbar(im, ax=axes[0], fraction=0.046)
    if truth is not None:
        truth = np.asarray(truth, dtype=float)
        im = axes[1].imshow(truth, cmap="viridis")
        axes[1].set_title("reference")
        fig.colorbar(im, ax=axes[1], fraction=0.046)
    return _finish(fig, path)


def save_spectrum(path, singular_values, kernel_dim: int | None = None):
    """Singular values of the squared-eigenvector matrix on a log scale."""
    sv = np.asarray(singular_values, dtype=float)
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.semilogy(np.arange(1, sv.size + 1), np.maximum(sv, 1e-300), "o", ms=4)
    if kernel_dim:
        ax.axvline(sv.size - kernel_dim + 0.5, color="crimson", lw=1.0, ls="--",
                   label=f"kernel dim {kernel_dim}")
        ax.legend(loc="best", fontsize=8)
    ax.set_xlabel("index")
    ax.set_ylabel("singular value")
    ax.set_title("identifiability spectrum")
    ax.grid(True, alpha=0.3)
    return _finish(fig, path)


def save_pr_sweep(path, rows):
    """Precision, recall, and f-measure against the threshold grid."""
    thresholds = [row["threshold"] for row in rows]
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for key in ("precision", "recall", "f_measure"):
        ax.plot(thresholds, [row[key] for row in rows], lw=1.2, label=key)
    if thresholds and min(thresholds) > 0:
        ax.set_xscale("log")
    ax.set_xlabel("threshold")
    ax.set_ylabel("score")
    ax.set_ylim(-0.02, 1.02)
    ax.set_title("threshold sweep")
    ax.legend(loc="best", fontsize=8)
    ax.grid(True, alpha=0.3)
    return _finish(fig, path)
