"""Streaming second-moment estimation with three memory models.

The estimator maintains C_t from rank-one signal updates:

* ``infinite``: running sample average, C_t = ((t-1) C_{t-1} + y y') / t
* ``ewma``: exponential forgetting, C_t = beta C_{t-1} + (1 - beta) y y'
* ``window``: average over the last W signals, with a periodic full recompute
  from the buffer to stop rank-one add/evict drift

Signals are treated as zero mean; no mean subtraction is performed.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse.linalg

MODES = ("infinite", "ewma", "window")


class CovarianceEstimator:
    """Single-writer streaming covariance state machine.

    Parameters
    ----------
    n : int
        Signal dimension.
    mode : {"infinite", "ewma", "window"}
        Memory model, see module docstring.
    beta : float
        Forgetting factor for ``ewma`` mode, in (0, 1).  Default 0.99.
    window : int
        Buffer length for ``window`` mode.
    warmup : ndarray, optional
        Signals (rows) averaged into the initial state.  Mutually exclusive
        with ``scale``.
    scale : float, optional
        Initialize with ``scale * I`` instead of warmup data.  In ``infinite``
        and ``window`` modes this prior carries no sample weight and is
        replaced as data arrives; in ``ewma`` mode it decays geometrically.
    """

    def __init__(self, n: int, mode: str = "infinite", beta: float = 0.99,
                 window: int | None = None, warmup: np.ndarray | None = None,
                 scale: float | None = None):
        if n < 1:
            raise ValueError(f"parameter error: n must be >= 1, got {n}")
        if mode not in MODES:
            raise ValueError(f"parameter error: unknown covariance mode {mode!r}")
        if mode == "ewma" and not 0.0 < beta < 1.0:
            raise ValueError(f"parameter error: ewma beta must be in (0, 1), got {beta}")
        if mode == "window":
            if window is None or window < 1:
                raise ValueError(f"parameter error: window mode needs window >= 1, got {window}")
        if warmup is not None and scale is not None:
            raise ValueError("parameter error: pass warmup signals or a scale, not both")
        self.n = int(n)
        self.mode = mode
        self.beta = float(beta)
        self.window = int(window) if window is not None else None
        self.count = 0
        self._buffer: list[np.ndarray] = []
        self._updates_since_rebuild = 0
        if warmup is not None:
            warmup = np.asarray(warmup, dtype=float)
            if warmup.ndim != 2 or warmup.shape[1] != n:
                raise ValueError(f"dimension error: warmup must be T x {n}, got {warmup.shape}")
            if warmup.shape[0] < 1:
                raise ValueError("parameter error: empty warmup block")
            if mode == "window":
                kept = warmup[-self.window:]
                self._buffer = [row.copy() for row in kept]
                self._current = _mean_outer(kept)
            else:
                self._current = _mean_outer(warmup)
            self.count = warmup.shape[0]
        else:
            if scale is None:
                scale = 1.0
            if scale <= 0:
                raise ValueError(f"parameter error: scale must be positive, got {scale}")
            self._current = float(scale) * np.eye(n)

    @property
    def matrix(self) -> np.ndarray:
        """Current estimate.  A live view; treat as read-only."""
        return self._current

    def update(self, signal: np.ndarray) -> None:
        """Fold one signal into the state (rank-one update per the active mode)."""
        y = np.asarray(signal, dtype=float).reshape(-1)
        if y.shape[0] != self.n:
            raise ValueError(f"dimension error: signal length {y.shape[0]}, expected {self.n}")
        if not np.all(np.isfinite(y)):
            raise ValueError("data error: non-finite signal entry")
        outer = np.outer(y, y)
        if self.mode == "infinite":
            t = self.count + 1
            self._current = ((t - 1) * self._current + outer) / t
        elif self.mode == "ewma":
            self._current = self.beta * self._current + (1.0 - self.beta) * outer
        else:
            self._buffer.append(y.copy())
            evicted = self._buffer.pop(0) if len(self._buffer) > self.window else None
            k = len(self._buffer)
            if evicted is None:
                # growing phase: plain running average
                self._current = ((k - 1) * self._current + outer) / k if k > 1 else outer
            else:
                self._current = self._current + (outer - np.outer(evicted, evicted)) / self.window
            self._updates_since_rebuild += 1
            if self._updates_since_rebuild >= self.window:
                self._current = _mean_outer(np.asarray(self._buffer))
                self._updates_since_rebuild = 0
        self.count += 1

    def update_many(self, signals: np.ndarray) -> None:
        """Fold a block of signals (rows) in order."""
        block = np.atleast_2d(np.asarray(signals, dtype=float))
        for row in block:
            self.update(row)

    def lambda_max(self, v0: np.ndarray | None = None) -> float:
        """Largest eigenvalue of the current estimate, relative accuracy 1e-8."""
        value, _ = top_eigenpair(self._current, v0=v0)
        return value


def _mean_outer(block: np.ndarray) -> np.ndarray:
    out = block.T @ block / block.shape[0]
    return 0.5 * (out + out.T)


def sample_covariance(signals: np.ndarray) -> np.ndarray:
    """Plain second-moment estimate (1/T) sum_t y_t y_t' from signal rows."""
    block = np.asarray(signals, dtype=float)
    if block.ndim != 2:
        raise ValueError(f"dimension error: signals must be a T x n array, got shape {block.shape}")
    if block.shape[0] < 1:
        raise ValueError("data error: empty signal block")
    if not np.all(np.isfinite(block)):
        raise ValueError("data error: non-finite signal entry")
    return _mean_outer(block)


def power_iteration(matrix: np.ndarray, v0: np.ndarray | None = None,
                    rtol: float = 1e-9, max_iters: int = 500) -> tuple[float, np.ndarray, bool]:
    """Dominant eigenpair of a symmetric PSD matrix by power iteration.

    Convergence is declared on the residual test ||A v - rho v|| <= rtol * rho,
    which certifies |rho - lambda_max| <= rtol * rho for symmetric input and
    needs no deflation.  Returns ``(rho, v, converged)``.
    """
    matrix = np.asarray(matrix, dtype=float)
    n = matrix.shape[0]
    if v0 is not None:
        v = np.asarray(v0, dtype=float).reshape(-1).copy()
        if v.shape[0] != n or not np.isfinite(v).all() or np.linalg.norm(v) == 0.0:
            v = None
        else:
            v /= np.linalg.norm(v)
    else:
        v = None
    if v is None:
        v = np.random.default_rng(0).standard_normal(n)
        v /= np.linalg.norm(v)
    rho = 0.0
    for _ in range(max_iters):
        w = matrix @ v
        norm = np.linalg.norm(w)
        if norm == 0.0:
            return 0.0, v, True
        rho = float(v @ w)
        if np.linalg.norm(w - rho * v) <= rtol * max(abs(rho), np.finfo(float).tiny):
            return rho, w / norm, True
        v = w / norm
    return rho, v, False


def top_eigenpair(matrix: np.ndarray, v0: np.ndarray | None = None) -> tuple[float, np.ndarray]:
    """Largest eigenvalue and eigenvector of a symmetric matrix.

    Power iteration first; on stall, falls back to a full symmetric
    eigendecomposition for n <= 512 and to a Lanczos solve beyond that.
    """
    matrix = np.asarray(matrix, dtype=float)
    n = matrix.shape[0]
    if matrix.shape != (n, n):
        raise ValueError(f"dimension error: expected square matrix, got {matrix.shape}")
    value, vector, converged = power_iteration(matrix, v0=v0)
    if converged:
        return value, vector
    if n <= 512:
        values, vectors = np.linalg.eigh(matrix)
        return float(values[-1]), vectors[:, -1]
    values, vectors = scipy.sparse.linalg.eigsh(matrix, k=1, which="LA", v0=vector)
    return float(values[0]), vectors[:, 0]
