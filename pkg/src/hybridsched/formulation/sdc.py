"""System of difference constraints for a DAG under a latency bound."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..graph import window_bounds


@dataclass(frozen=True)
class SdcSystem:
    """Constraints ``s_i - s_j <= c`` (one per edge) plus ``0 <= s_i <= L-1``."""

    constraints: tuple
    latency: int
    var_count: int

    def __post_init__(self):
        for i, j, _ in self.constraints:
            if not (0 <= i < self.var_count and 0 <= j < self.var_count):
                raise ValueError(f"constraint ({i}, {j}) references an unknown variable")

    @property
    def bounds(self):
        return 0, self.latency - 1

    def violations(self, schedule):
        """All violated constraints as ``(i, j, c)``; bound violations as ``(i, None, None)``."""
        s = np.asarray(schedule)
        out = [(int(i), None, None) for i in np.nonzero((s < 0) | (s > self.latency - 1))[0]]
        out += [(i, j, c) for i, j, c in self.constraints if s[i] - s[j] > c]
        return out


def build_sdc(dag, latency):
    """Difference-constraint system of ``dag``; raises if the latency is infeasible."""
    window_bounds(dag, latency)
    cons = tuple((e.src, e.dst, int(e.diff_const)) for e in dag.edges)
    return SdcSystem(cons, int(latency), dag.node_count)


def feasible(schedule, sdc):
    s = np.asarray(schedule)
    if s.shape != (sdc.var_count,):
        raise ValueError(f"schedule length {s.shape} does not match {sdc.var_count} variables")
    if np.any(s < 0) or np.any(s > sdc.latency - 1):
        return False
    return all(s[i] - s[j] <= c for i, j, c in sdc.constraints)
