"""Run configuration: ``key = value`` files plus flag overrides."""

from __future__ import annotations

import configparser
import dataclasses
import os
from dataclasses import dataclass, fields

from .diffsched import DiffConfig
from .errors import HybridSchedError
from .warmstart import THRESHOLD_PRESETS, ThresholdPolicy


class ConfigError(HybridSchedError, ValueError):
    """Invalid configuration file or flag value."""


@dataclass(frozen=True)
class RunConfig:
    """Every knob of a run; ``to_text`` output reproduces the run when read back.

    ``threshold`` is ``p<q>`` (nearest-rank percentile), a number in [0, 1]
    (fixed), or a preset name (``rw``, ``mapped``, ``epfl``). ``lanes``
    picks the iterations used as warm starts: ``all``, ``best:k`` (lowest
    sampled objective) or ``last:k``. ``threads = 0`` runs one worker per
    lane. ``cold_budget`` defaults to ``cold_ratio * budget``.
    """

    latency: int = 10
    lam: float = 10.0
    alpha: float = 1.0
    iterations: int = 30
    learning_rate: float = 0.05
    temperature: float = 1.0
    temperature_end: float | None = None
    entropy_sign: str = "balance"
    threshold: str = "p70"
    lanes: str = "all"
    budget: float = 60.0
    cold_budget: float | None = None
    cold_ratio: float = 2.0
    cold_lanes: int | None = None
    threads: int = 0
    seed: int = 0
    node_limit: int | None = None
    backend: str = "internal"
    solver_cmd: str | None = None
    keep_artifacts: str | None = None
    out: str | None = None

    def __post_init__(self):
        if self.latency < 1:
            raise ConfigError("latency must be >= 1")
        if self.budget <= 0 or (self.cold_budget is not None and self.cold_budget <= 0):
            raise ConfigError("budgets must be > 0")
        if self.cold_ratio <= 0:
            raise ConfigError("cold_ratio must be > 0")
        if self.threads < 0:
            raise ConfigError("threads must be >= 0")
        if self.cold_lanes is not None and self.cold_lanes < 0:
            raise ConfigError("cold_lanes must be >= 0")
        if self.node_limit is not None and self.node_limit < 1:
            raise ConfigError("node_limit must be >= 1")
        if self.backend not in ("internal", "external"):
            raise ConfigError(f"backend must be 'internal' or 'external', got {self.backend!r}")
        if self.alpha < 0:
            raise ConfigError("alpha must be >= 0")
        try:
            self.diff_config()
            self.threshold_policy()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        self.lane_selection()

    def diff_config(self):
        return DiffConfig(
            lam=self.lam,
            temperature=self.temperature,
            temperature_end=self.temperature_end,
            learning_rate=self.learning_rate,
            iterations=self.iterations,
            seed=self.seed,
            entropy_sign=self.entropy_sign,
        )

    def threshold_policy(self):
        t = str(self.threshold).strip().lower()
        if t in THRESHOLD_PRESETS:
            return ThresholdPolicy.fixed(THRESHOLD_PRESETS[t])
        if t.startswith("p"):
            return ThresholdPolicy.percentile(float(t[1:]))
        return ThresholdPolicy.fixed(float(t))

    def lane_selection(self):
        """``(mode, k)`` with ``mode`` in ``all``/``best``/``last``."""
        mode, _, k = self.lanes.partition(":")
        if mode == "all" and not k:
            return "all", None
        if mode in ("best", "last") and k.isdigit() and int(k) >= 1:
            return mode, int(k)
        raise ConfigError(f"lanes must be 'all', 'best:k' or 'last:k', got {self.lanes!r}")

    @property
    def resolved_cold_budget(self):
        return self.cold_budget if self.cold_budget is not None else self.cold_ratio * self.budget

    def solver_backend(self):
        from .solvers import ExternalBackend
        from .solvers.external import COMMAND_ENV

        if self.backend == "internal":
            return "internal"
        cmd = self.solver_cmd or os.environ.get(COMMAND_ENV)
        if not cmd:
            raise ConfigError(f"external backend needs solver_cmd or ${COMMAND_ENV}")
        return ExternalBackend(cmd, keep_artifacts=self.keep_artifacts)

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def to_text(self):
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            lines.append(f"{f.name} = {'none' if v is None else v}")
        return "\n".join(lines) + "\n"


_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _coerce(key, raw):
    kind = _TYPES[key]
    raw = raw.strip()
    if "None" in kind and raw.lower() in ("none", ""):
        return None
    try:
        if kind.startswith("int"):
            return int(raw)
        if kind.startswith("float"):
            return float(raw)
    except ValueError:
        raise ConfigError(f"{key}: expected {kind.split()[0]}, got {raw!r}") from None
    return raw


def parse_config(text, base=None):
    """Apply ``key = value`` lines (``#`` comments) on top of ``base``."""
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    try:
        cp.read_string("[run]\n" + text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    changes = {}
    for key, raw in cp["run"].items():
        key = key.replace("-", "_")
        if key not in _TYPES:
            raise ConfigError(f"unknown config key {key!r}")
        changes[key] = _coerce(key, raw)
    return (base or RunConfig()).replace(**changes)


def load_config(path=None, overrides=None):
    """Config file (optional) with non-``None`` ``overrides`` applied last."""
    cfg = RunConfig()
    if path:
        try:
            with open(path) as fh:
                cfg = parse_config(fh.read(), cfg)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
    changes = {k: v for k, v in (overrides or {}).items() if v is not None}
    unknown = set(changes) - set(_TYPES)
    if unknown:
        raise ConfigError(f"unknown config keys {sorted(unknown)}")
    return cfg.replace(**changes)
