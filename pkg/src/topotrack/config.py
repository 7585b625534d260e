"""Experiment configuration: one dataclass, JSON round-trip, flag merging.

Precedence is lowest to highest: dataclass defaults, then a ``--config`` JSON
file, then explicitly passed command-line flags.
"""

from __future__ import annotations

import dataclasses

from .online import OnlineConfig
from .reporting import read_json, write_json_atomic
from .solver import SolverConfig


def parse_threshold(text: str) -> tuple[str, float]:
    """Parse 'rel:F' or 'abs:F' into a (kind, value) pair."""
    kind, sep, raw = text.partition(":")
    if not sep or kind not in ("rel", "abs"):
        raise ValueError(
            f"configuration error: threshold must look like rel:0.1 or abs:0.05, got {text!r}")
    try:
        value = float(raw)
    except ValueError:
        raise ValueError(f"configuration error: bad threshold value {raw!r}") from None
    if value < 0:
        raise ValueError(f"configuration error: negative threshold {value}")
    return kind, value


def parse_cov(text: str) -> dict:
    """Parse 'infinite', 'ewma=BETA', or 'window=W' into covariance settings.

    Both '=' and ':' work as the separator.
    """
    sep_char = "=" if "=" in text else ":"
    kind, sep, raw = text.partition(sep_char)
    if kind == "infinite" and not sep:
        return {"cov_mode": "infinite"}
    if kind == "ewma" and sep:
        try:
            beta = float(raw)
        except ValueError:
            raise ValueError(f"configuration error: bad ewma factor {raw!r}") from None
        return {"cov_mode": "ewma", "ewma_beta": beta}
    if kind == "window" and sep:
        try:
            window = int(raw)
        except ValueError:
            raise ValueError(f"configuration error: bad window length {raw!r}") from None
        return {"cov_mode": "window", "window": window}
    raise ValueError(
        f"configuration error: covariance spec must be infinite, ewma=BETA, or window=W, "
        f"got {text!r}")


def parse_known_edges(text: str) -> tuple[str, object]:
    """Parse a known-edges source: a file path or 'random:K'."""
    if text.startswith("random:"):
        raw = text.split(":", 1)[1]
        try:
            count = int(raw)
        except ValueError:
            raise ValueError(f"configuration error: bad known-edge count {raw!r}") from None
        if count < 0:
            raise ValueError(f"configuration error: negative known-edge count {count}")
        return ("random", count)
    return ("file", text)


def parse_changes(text: str) -> list[list[float]]:
    """Parse a rewire schedule 'step:fraction[:seed],...' into [step, fraction, seed] rows."""
    rows = []
    for part in text.split(","):
        pieces = part.split(":")
        if len(pieces) not in (2, 3):
            raise ValueError(
                f"configuration error: change entries look like step:fraction[:seed], "
                f"got {part!r}")
        try:
            step = int(pieces[0])
            fraction = float(pieces[1])
            seed = int(pieces[2]) if len(pieces) == 3 else None
        except ValueError:
            raise ValueError(f"configuration error: bad change entry {part!r}") from None
        rows.append([step, fraction, seed])
    return rows


def parse_checkpoints(text: str) -> object:
    """Parse 'none', 'all', 'every:K', or a comma list of step indices.

    Returns something :func:`topotrack.online.run_stream` accepts as its
    ``checkpoints`` argument.
    """
    if text == "none":
        return ()
    if text == "all":
        return "all"
    if text.startswith("every:"):
        raw = text.split(":", 1)[1]
        try:
            period = int(raw)
        except ValueError:
            raise ValueError(f"configuration error: bad checkpoint period {raw!r}") from None
        if period < 1:
            raise ValueError(f"configuration error: checkpoint period must be >= 1, got {period}")
        return lambda t: t % period == 0 or t == 1
    try:
        return tuple(int(part) for part in text.split(","))
    except ValueError:
        raise ValueError(
            f"configuration error: checkpoints must be none, all, every:K, "
            f"or a comma list, got {text!r}") from None


@dataclasses.dataclass
class ExperimentConfig:
    """Everything a CLI run needs, mirroring the command-line flags."""

    # shared
    seed: int = 0
    mu: float = 1.0
    out: str = "runs/latest"
    figures: bool = True
    index_base: int = 0
    threshold_kind: str = "rel"
    threshold_value: float = 0.1
    known_edges: str | None = None
    # generation
    n: int = 20
    graph_density: float = 0.2
    filter_coeffs: list[float] | None = None
    filter_order: int = 2
    t_count: int = 1000
    changes: list[list[float]] | None = None
    # batch solver
    step_policy: str = "lipschitz"
    gamma: float | None = None
    sc_constant: float = 0.0
    max_iters: int = 20000
    rel_tol: float = 1e-8
    accelerated: bool = False
    init_seed: int = 0
    init_density: float = 0.1
    # online solver
    cov_mode: str = "infinite"
    ewma_beta: float = 0.99
    window: int | None = None
    warmup: int = 0
    init_scale: float = 1.0
    iters_per_step: int = 1
    minibatch: int = 1
    checkpoints: str = "none"
    max_steps: int | None = None
    measure_shift: bool = False

    @property
    def threshold(self) -> tuple[str, float]:
        return (self.threshold_kind, self.threshold_value)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"configuration error: unknown config keys {sorted(unknown)}")
        return cls(**data)

    def apply_overrides(self, overrides: dict) -> "ExperimentConfig":
        """Return a copy with every non-None override applied."""
        known = {f.name for f in dataclasses.fields(self)}
        unknown = {k for k, v in overrides.items() if v is not None} - known
        if unknown:
            raise ValueError(f"configuration error: unknown config keys {sorted(unknown)}")
        updates = {k: v for k, v in overrides.items() if v is not None and k in known}
        return dataclasses.replace(self, **updates)

    def save(self, path) -> None:
        write_json_atomic(path, self.to_dict())

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        return cls.from_dict(read_json(path))

    def solver_config(self) -> SolverConfig:
        return SolverConfig(
            mu=self.mu, step_policy=self.step_policy, gamma=self.gamma,
            sc_constant=self.sc_constant, max_iters=self.max_iters,
            rel_tol=self.rel_tol, accelerated=self.accelerated,
            init_seed=self.init_seed, init_density=self.init_density)

    def online_config(self) -> OnlineConfig:
        return OnlineConfig(
            mu=self.mu, step_policy=self.step_policy, gamma=self.gamma,
            sc_constant=self.sc_constant, max_iters=self.max_iters,
            rel_tol=self.rel_tol, accelerated=self.accelerated,
            init_seed=self.init_seed, init_density=self.init_density,
            iters_per_step=self.iters_per_step, minibatch=self.minibatch,
            cov_mode=self.cov_mode, ewma_beta=self.ewma_beta,
            window=self.window, warmup=self.warmup, init_scale=self.init_scale,
            threshold=self.threshold)


def load_with_overrides(config_path: str | None, overrides: dict) -> ExperimentConfig:
    """Defaults, then the config file (if any), then explicit flags."""
    base = ExperimentConfig.load(config_path) if config_path else ExperimentConfig()
    return base.apply_overrides(overrides)
