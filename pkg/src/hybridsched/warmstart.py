"""Confidence-thresholded partial solutions used as non-binding solver hints."""

from __future__ import annotations

import json
import logging
import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

logger = logging.getLogger(__name__)

#: Fixed thresholds reported for random workloads / mapped designs and for plain designs.
THRESHOLD_PRESETS = {"rw": 0.2, "mapped": 0.2, "epfl": 0.127}
COVERAGE_BAND = (0.05, 0.15)


class EmptyPartialWarning(UserWarning):
    """No node met the confidence threshold; the solver will start cold."""


@dataclass(frozen=True)
class ThresholdPolicy:
    """``mode="fixed"`` uses ``value`` as the threshold; ``"percentile"`` its nearest-rank percentile."""

    mode: str = "percentile"
    value: float = 70.0

    def __post_init__(self):
        if self.mode == "fixed" and not 0.0 <= self.value <= 1.0:
            raise ValueError("fixed threshold must lie in [0, 1]")
        if self.mode == "percentile" and not 0.0 < self.value < 100.0:
            raise ValueError("percentile must lie in (0, 100)")
        if self.mode not in ("fixed", "percentile"):
            raise ValueError(f"unknown threshold mode {self.mode!r}")

    @classmethod
    def fixed(cls, tau):
        return cls("fixed", float(tau))

    @classmethod
    def percentile(cls, q=70.0):
        return cls("percentile", float(q))


@dataclass
class PartialSolution:
    assignments: dict
    confidences: dict
    source_iteration: int
    node_count: int
    threshold: float = 0.0
    meta: dict = field(default_factory=dict)

    @property
    def coverage(self):
        return len(self.assignments) / self.node_count

    def __len__(self):
        return len(self.assignments)

    def to_dict(self):
        return {
            "source_iteration": self.source_iteration,
            "node_count": self.node_count,
            "threshold": self.threshold,
            "coverage": self.coverage,
            "assignments": {str(k): int(v) for k, v in sorted(self.assignments.items())},
            "confidences": {str(k): float(v) for k, v in sorted(self.confidences.items())},
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def from_dict(cls, d):
        return cls(
            assignments={int(k): int(v) for k, v in d["assignments"].items()},
            confidences={int(k): float(v) for k, v in d.get("confidences", {}).items()},
            source_iteration=int(d.get("source_iteration", 0)),
            node_count=int(d["node_count"]),
            threshold=float(d.get("threshold", 0.0)),
        )

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def nearest_rank(values, q):
    """Nearest-rank ``q``-th percentile: the smallest value with at least q% of the pool at or below it."""
    v = np.sort(np.asarray(values, dtype=float).ravel())
    if v.size == 0:
        raise ValueError("empty confidence pool")
    k = math.ceil(Fraction(repr(float(q))) * v.size / 100)
    return float(v[min(max(k, 1), v.size) - 1])


def auto_threshold(records, q=70.0):
    """Threshold from the pooled confidences of every record."""
    records = list(records)
    if not records:
        raise ValueError("auto_threshold needs at least one record")
    return nearest_rank(np.concatenate([np.ravel(r.confidence) for r in records]), q)


def threshold_analysis(records, q=70.0, bins=20):
    """Pooled confidence histogram, the auto threshold, and per-iteration top-(100-q)% means."""
    records = list(records)
    pooled = np.concatenate([np.ravel(r.confidence) for r in records])
    tau = nearest_rank(pooled, q)
    counts, edges = np.histogram(pooled, bins=bins, range=(0.0, 1.0))
    per_iter = []
    for r in records:
        c = np.ravel(r.confidence)
        cut = nearest_rank(c, q)
        per_iter.append((r.iteration, float(c[c >= cut].mean())))
    return {"threshold": tau, "counts": counts, "edges": edges, "top_mean": per_iter, "q": q}


def _resolve_threshold(record, policy):
    if isinstance(policy, ThresholdPolicy):
        if policy.mode == "fixed":
            return policy.value
        return nearest_rank(record.confidence, policy.value)
    return float(policy)


def extract_partial(record, policy=ThresholdPolicy()):
    """Sampled stages of every node whose confidence reaches the threshold.

    ``policy`` is a :class:`ThresholdPolicy` or a fixed threshold value.
    """
    tau = _resolve_threshold(record, policy)
    conf = np.asarray(record.confidence, dtype=float)
    picked = np.nonzero(conf >= tau)[0]
    if len(picked) == 0:
        warnings.warn(
            f"no confidence reaches {tau:.4g} in iteration {record.iteration}; hint is empty",
            EmptyPartialWarning,
            stacklevel=2,
        )
    return PartialSolution(
        assignments={int(v): int(record.schedule[v]) for v in picked},
        confidences={int(v): float(conf[v]) for v in picked},
        source_iteration=int(record.iteration),
        node_count=len(conf),
        threshold=tau,
    )


def consistency_filter(partial, sdc):
    """Drop hinted nodes until no pair of hints violates a difference constraint.

    For each violated edge the endpoint with lower confidence goes (ties:
    the higher node id). Hints outside ``[0, L-1]`` are dropped first.
    """
    lo, hi = sdc.bounds
    kept = {v: a for v, a in partial.assignments.items() if lo <= a <= hi}
    conf = partial.confidences
    while True:
        bad = next(
            ((i, j) for i, j, c in sdc.constraints if i in kept and j in kept and kept[i] - kept[j] > c),
            None,
        )
        if bad is None:
            break
        i, j = bad
        victim = min((i, j), key=lambda v: (conf.get(v, 0.0), -v))
        del kept[victim]
    if len(kept) == len(partial.assignments):
        return partial
    return PartialSolution(
        assignments=kept,
        confidences={v: conf[v] for v in kept if v in conf},
        source_iteration=partial.source_iteration,
        node_count=partial.node_count,
        threshold=partial.threshold,
        meta=dict(partial.meta, dropped=len(partial.assignments) - len(kept)),
    )


def hinted_variable_fraction(partial, model):
    """Share of all ILP variables a hint assigns (one-hot over ``L`` stages per node)."""
    pb = model._require_problem()
    return len(partial.assignments) * pb.latency / model.num_vars


def check_coverage(partial, model, band=COVERAGE_BAND):
    """Log a warning when the hinted variable share leaves the recommended band."""
    frac = hinted_variable_fraction(partial, model)
    if not band[0] <= frac <= band[1]:
        logger.warning(
            "hint from iteration %d assigns %.1f%% of variables (recommended %.0f-%.0f%%)",
            partial.source_iteration,
            100 * frac,
            100 * band[0],
            100 * band[1],
        )
    return frac
