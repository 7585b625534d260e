"""Stationary signal generation through polynomial network filters.

Signals are modeled as y = H x with H a low-order matrix polynomial of the
adjacency matrix and x white unit-variance Gaussian excitation, so that the
ensemble covariance is C = H @ H.  The observed-data side of every experiment
comes from here.
"""

from __future__ import annotations

import dataclasses
import warnings

import numpy as np

from .graphs import validate


@dataclasses.dataclass(frozen=True)
class FilterSpec:
    """Coefficients h_0 .. h_{L-1} of the polynomial H = sum_l h_l S^l."""

    coeffs: tuple[float, ...]

    def __post_init__(self):
        coeffs = tuple(float(c) for c in np.atleast_1d(np.asarray(self.coeffs, dtype=float)))
        if len(coeffs) < 1:
            raise ValueError("parameter error: filter needs at least one coefficient")
        if not all(np.isfinite(coeffs)):
            raise ValueError("parameter error: non-finite filter coefficient")
        if not any(c != 0.0 for c in coeffs):
            raise ValueError("parameter error: all-zero filter")
        object.__setattr__(self, "coeffs", coeffs)

    @property
    def order(self) -> int:
        """Polynomial degree, one less than the number of taps."""
        return len(self.coeffs) - 1

    @classmethod
    def random(cls, order: int = 2, seed: int = 0, low: float = 0.0, high: float = 1.0) -> "FilterSpec":
        """Degree-``order`` filter with taps drawn uniformly from [low, high).

        Redraws the rare all-zero sample.
        """
        if order < 0:
            raise ValueError(f"parameter error: order must be >= 0, got {order}")
        rng = np.random.default_rng(seed)
        coeffs = rng.uniform(low, high, order + 1)
        while not np.any(coeffs):
            coeffs = rng.uniform(low, high, order + 1)
        return cls(tuple(coeffs))


@dataclasses.dataclass(frozen=True)
class SignalBatch:
    """A block of T signals (rows) on n nodes, with the seed that produced it."""

    signals: np.ndarray
    seed: int | None = None

    def __post_init__(self):
        arr = np.asarray(self.signals, dtype=float)
        if arr.ndim != 2:
            raise ValueError(f"dimension error: signals must be T x n, got shape {arr.shape}")
        object.__setattr__(self, "signals", arr)

    @property
    def t_count(self) -> int:
        return self.signals.shape[0]

    @property
    def n(self) -> int:
        return self.signals.shape[1]


def build_filter(shift: np.ndarray, spec: FilterSpec) -> np.ndarray:
    """Evaluate H = sum_l h_l S^l by Horner recursion (order - 1 matrix products)."""
    problems = validate(shift)
    if problems:
        raise ValueError("parameter error: invalid shift operator: " + "; ".join(problems))
    shift = np.asarray(shift, dtype=float)
    n = shift.shape[0]
    if len(spec.coeffs) > n:
        warnings.warn(
            f"filter has {len(spec.coeffs)} taps on {n} nodes; by Cayley-Hamilton "
            "the extra powers are redundant")
    out = spec.coeffs[-1] * np.eye(n)
    for coeff in reversed(spec.coeffs[:-1]):
        out = out @ shift
        out[np.diag_indices(n)] += coeff
    return out


def frequency_response(eigenvalues: np.ndarray, spec: FilterSpec) -> np.ndarray:
    """Scalar response sum_l h_l lambda^l at each eigenvalue."""
    lam = np.asarray(eigenvalues, dtype=float)
    out = np.zeros_like(lam)
    for coeff in reversed(spec.coeffs):
        out = out * lam + coeff
    return out


def ensemble_covariance(shift: np.ndarray, spec: FilterSpec) -> np.ndarray:
    """Exact covariance C = H @ H of unit-variance white input diffused by H."""
    filt = build_filter(shift, spec)
    cov = filt @ filt
    return 0.5 * (cov + cov.T)


def generate(shift: np.ndarray, spec: FilterSpec, t_count: int, seed: int = 0) -> SignalBatch:
    """Draw ``t_count`` stationary signals y = H x, x ~ N(0, I).

    Raises
    ------
    ValueError
        If ``t_count < 1`` or the shift operator is invalid.
    """
    if t_count < 1:
        raise ValueError(f"parameter error: t_count must be >= 1, got {t_count}")
    filt = build_filter(shift, spec)
    rng = np.random.default_rng(seed)
    white = rng.standard_normal((t_count, shift.shape[0]))
    return SignalBatch(white @ filt.T, seed=seed)


def save_signals_csv(path, batch: SignalBatch, header: bool = True) -> None:
    """Write one signal per row, ``y0,...,y{n-1}`` header optional, full precision."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        if header:
            fh.write(",".join(f"y{k}" for k in range(batch.n)) + "\n")
        for row in batch.signals:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def load_signals_csv(path) -> SignalBatch:
    """Read a signal CSV produced by :func:`save_signals_csv` (header optional)."""
    rows = []
    width = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if lineno == 1 and line.split(",")[0].strip().startswith("y"):
                continue
            parts = line.split(",")
            if width is None:
                width = len(parts)
            elif len(parts) != width:
                raise ValueError(f"data error: {path} line {lineno}: ragged row")
            try:
                rows.append([float(p) for p in parts])
            except ValueError:
                raise ValueError(f"data error: {path} line {lineno}: non-numeric value") from None
    if not rows:
        raise ValueError(f"data error: {path} contains no signals")
    return SignalBatch(np.asarray(rows, dtype=float))
