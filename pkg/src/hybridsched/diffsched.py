"""Differentiable stage assignment with constrained Gumbel-Softmax sampling.

Every node owns a row of logits over the ``L`` stages. One iteration

1. visits nodes level by level in topological order and, for each node,
   builds the suffix mask allowed by its already-sampled predecessors
   (``a >= s_p - c`` for every incoming edge),
2. draws a Gumbel-perturbed, temperature-scaled softmax restricted to the
   mask (``y'``), takes its argmax as the hard one-hot stage, and records
   the noise-free masked probabilities ``P'`` and confidence ``max P'``,
3. scores the soft occupancy with ``lam * L_r + L_c`` and back-propagates
   through the restricted softmaxes; the hard one-hots feeding child masks
   pass gradients straight through to the parents' soft rows.

Samples are feasible by construction: masks only ever remove stages that
would violate a difference constraint, and stage windows guarantee the
intersection is never empty.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import NonFiniteGradientError
from .graph import topological_levels, window_bounds

logger = logging.getLogger(__name__)

_TINY = 1e-300
_ADAM_BETAS = (0.9, 0.999)
_ADAM_EPS = 1e-8


@dataclass(frozen=True)
class DiffConfig:
    """Hyper-parameters of the relaxation.

    ``temperature_end`` enables a linear anneal from ``temperature`` over
    ``iterations``. ``entropy_sign="balance"`` minimizes ``-H`` (spreads
    nodes over stages); ``"paper_literal"`` minimizes ``+H``.
    """

    lam: float = 10.0
    temperature: float = 1.0
    temperature_end: float | None = None
    learning_rate: float = 0.05
    iterations: int = 30
    seed: int = 0
    entropy_sign: str = "balance"

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lam must be >= 0")
        if self.temperature <= 0 or (self.temperature_end is not None and self.temperature_end <= 0):
            raise ValueError("temperature must be > 0")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.entropy_sign not in ("balance", "paper_literal"):
            raise ValueError(f"unknown entropy_sign {self.entropy_sign!r}")

    def temperature_at(self, k):
        """Temperature of 0-based iteration ``k``."""
        if self.temperature_end is None or self.iterations == 1:
            return self.temperature
        f = k / (self.iterations - 1)
        return self.temperature + f * (self.temperature_end - self.temperature)


@dataclass
class OptimizerState:
    dag: object
    latency: int
    config: DiffConfig
    logits: np.ndarray
    window: np.ndarray
    rng: np.random.Generator
    adam_m: np.ndarray
    adam_v: np.ndarray
    steps: int = 0
    levels: list = field(default_factory=list, repr=False)
    level_edges: list = field(default_factory=list, repr=False)

    def probabilities(self):
        """Row-wise softmax of the logits restricted to the stage windows."""
        return _masked_softmax(self.logits, self.window)

    def copy(self):
        return replace(
            self,
            logits=self.logits.copy(),
            adam_m=self.adam_m.copy(),
            adam_v=self.adam_v.copy(),
            rng=_clone_rng(self.rng),
        )


@dataclass
class IterationRecord:
    iteration: int
    schedule: np.ndarray
    probs: np.ndarray
    confidence: np.ndarray
    loss_r: float
    loss_c: float
    loss: float
    temperature: float
    wall_time: float = 0.0
    cache: dict | None = field(default=None, repr=False, compare=False)

    def to_dict(self):
        return {
            "iteration": self.iteration,
            "schedule": self.schedule.tolist(),
            "confidence": self.confidence.tolist(),
            "probs": self.probs.tolist(),
            "loss_r": self.loss_r,
            "loss_c": self.loss_c,
            "loss": self.loss,
            "temperature": self.temperature,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            iteration=int(d["iteration"]),
            schedule=np.asarray(d["schedule"], dtype=np.int64),
            probs=np.asarray(d["probs"], dtype=float),
            confidence=np.asarray(d["confidence"], dtype=float),
            loss_r=float(d["loss_r"]),
            loss_c=float(d["loss_c"]),
            loss=float(d["loss"]),
            temperature=float(d["temperature"]),
        )


def _clone_rng(rng):
    out = np.random.default_rng()
    out.bit_generator.state = rng.bit_generator.state
    return out


def _masked_softmax(x, allowed):
    z = np.where(allowed, x, -np.inf)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def gumbel_noise(rng, shape):
    u = rng.random(shape)
    return -np.log(-np.log(np.clip(u, _TINY, 1.0)))


# ---------------------------------------------------------------------------
# Masks and sampling
# ---------------------------------------------------------------------------


def mask_leq(parent_onehot, c):
    """Stages a child may take given its parent's one-hot stage and ``s_p - s_c <= c``.

    ``T[a] = sum_{b <= a + c} parent[b]``: a cumulative sum of the parent
    one-hot shifted right by ``-c`` (left by ``c`` when ``c > 0``). The
    result is a 0/1 suffix indicator; an all-zero vector means the parent
    leaves no room within the latency.
    """
    h = np.asarray(parent_onehot)
    L = h.shape[-1]
    cs = np.concatenate([np.zeros(h.shape[:-1] + (1,), dtype=h.dtype), np.cumsum(h, axis=-1)], axis=-1)
    idx = np.clip(np.arange(L) + int(c) + 1, 0, L)
    return np.minimum(cs[..., idx], 1)


def _mask_leq_transpose(grad_mask, c):
    """Adjoint of :func:`mask_leq` (ignoring the clamp, inactive on one-hots)."""
    g = np.asarray(grad_mask, dtype=float)
    L = g.shape[-1]
    tail = np.concatenate([np.cumsum(g[..., ::-1], axis=-1)[..., ::-1], np.zeros(g.shape[:-1] + (1,))], axis=-1)
    c = np.asarray(c)[..., None] if np.ndim(c) else int(c)
    idx = np.clip(np.arange(L) - c, 0, L)
    if np.ndim(idx) == 1:
        return tail[..., idx]
    return np.take_along_axis(tail, idx, axis=-1)


def constrained_sample(state, node, combined_mask, tau, rng, noise=None):
    """Hard stage one-hot and noise-free masked probabilities for one node.

    ``combined_mask`` is the product of :func:`mask_leq` over the node's
    sampled predecessors. Returns ``(onehot, P')`` where ``P'`` is the
    window softmax multiplied by the mask (not renormalized), so
    ``max(P')`` drops when the constraint cuts probability mass.
    """
    mask = np.asarray(combined_mask, dtype=bool)
    allowed = mask & state.window[node]
    if not allowed.any():
        raise FloatingPointError(f"node {node}: constraint mask excludes every stage")
    if noise is None:
        noise = gumbel_noise(rng, state.latency)
    r = (state.logits[node] + noise) / tau
    y = _masked_softmax(r, allowed)
    onehot = np.zeros(state.latency)
    onehot[int(np.argmax(np.where(allowed, y, -1.0)))] = 1.0
    p_conf = state.probabilities()[node] * mask
    return onehot, p_conf


# ---------------------------------------------------------------------------
# Losses
# ---------------------------------------------------------------------------


def _entropy(occupancy, node_count):
    p = np.asarray(occupancy, dtype=float) / node_count
    nz = p > 0
    return float(-(p[nz] * np.log(p[nz])).sum())


def stage_entropy(counts, node_count=None):
    """Entropy of a stage-occupancy vector, ``0 log 0 = 0``."""
    counts = np.asarray(counts, dtype=float)
    return _entropy(counts, counts.sum() if node_count is None else node_count)


def loss_resource(soft, entropy_sign="balance"):
    """Entropy resource loss of a ``|V| x L`` soft assignment matrix."""
    soft = np.asarray(soft, dtype=float)
    h = _entropy(soft.sum(axis=0), soft.shape[0])
    return -h if entropy_sign == "balance" else h


def loss_comm(soft, dag):
    """Expected boundary crossings, normalized by total edge weight.

    ``m_a = sum_e w_e F_i(a) (1 - F_j(a))`` with ``F`` the per-node
    cumulative stage distribution; on one-hot rows this counts exactly
    the boundaries each edge spans.
    """
    wsum = dag.total_weight
    if wsum == 0:
        return 0.0
    F = np.cumsum(np.asarray(soft, dtype=float), axis=1)[:, :-1]
    m = dag.weight @ (F[dag.src] * (1.0 - F[dag.dst]))
    return float(m.sum() / wsum)


def _loss_grad(soft, dag, lam, entropy_sign):
    """Gradient of ``lam * L_r + L_c`` with respect to the soft matrix."""
    n, L = soft.shape
    N = soft.sum(axis=0)
    p = np.maximum(N / n, _TINY)
    dH = -(np.log(p) + 1.0) / n
    sign = -1.0 if entropy_sign == "balance" else 1.0
    G = np.broadcast_to(lam * sign * dH, (n, L)).copy()
    wsum = dag.total_weight
    if wsum > 0 and L > 1:
        F = np.cumsum(soft, axis=1)[:, :-1]
        w = dag.weight[:, None] / wsum
        dF = np.zeros((n, L - 1))
        np.add.at(dF, dag.src, w * (1.0 - F[dag.dst]))
        np.add.at(dF, dag.dst, -w * F[dag.src])
        # F[:, a] = sum_{b <= a} soft[:, b]  =>  dsoft[:, b] = sum_{a >= b} dF[:, a]
        G[:, :-1] += np.cumsum(dF[:, ::-1], axis=1)[:, ::-1]
    return G


# ---------------------------------------------------------------------------
# Optimizer
# ---------------------------------------------------------------------------


def init(dag, latency, config=None):
    """Fresh optimizer state with near-uniform logits inside the stage windows."""
    config = config or DiffConfig()
    earliest, latest = window_bounds(dag, latency)
    stages = np.arange(latency)
    window = (stages[None, :] >= earliest[:, None]) & (stages[None, :] <= latest[:, None])
    rng = np.random.default_rng(config.seed)
    logits = 1e-3 * rng.standard_normal((dag.node_count, latency))
    levels = topological_levels(dag)
    level_of = np.empty(dag.node_count, dtype=np.int64)
    for k, lv in enumerate(levels):
        level_of[lv] = k
    level_edges = [np.nonzero(level_of[dag.dst] == k)[0] if dag.edges else np.zeros(0, dtype=np.int64) for k in range(len(levels))]
    return OptimizerState(
        dag=dag,
        latency=int(latency),
        config=config,
        logits=logits,
        window=window,
        rng=rng,
        adam_m=np.zeros_like(logits),
        adam_v=np.zeros_like(logits),
        levels=levels,
        level_edges=level_edges,
    )


def forward_pass(state, rng=None, tau=None, noise=None):
    """One constrained sampling sweep; returns an :class:`IterationRecord`.

    ``noise`` (a ``|V| x L`` Gumbel matrix) may be supplied to replay a
    draw; otherwise it is taken from ``rng`` (default: the state's RNG).
    """
    t0 = time.perf_counter()
    dag, L = state.dag, state.latency
    n = dag.node_count
    rng = state.rng if rng is None else rng
    tau = state.config.temperature_at(state.steps) if tau is None else tau
    if noise is None:
        noise = gumbel_noise(rng, (n, L))
    src, dst, c = dag.src, dag.dst, dag.diff_const
    stages = np.arange(L)

    schedule = np.zeros(n, dtype=np.int64)
    lower = np.full(n, np.iinfo(np.int64).min // 2, dtype=np.int64)
    for nodes, eidx in zip(state.levels, state.level_edges):
        if len(eidx):
            np.maximum.at(lower, dst[eidx], schedule[src[eidx]] - c[eidx])
        masked_in = stages[None, :] >= lower[nodes][:, None]
        allowed = masked_in & state.window[nodes]
        if not allowed.any(axis=1).all():
            bad = nodes[~allowed.any(axis=1)][0]
            raise FloatingPointError(f"node {bad}: constraint mask excludes every stage")
        r = np.where(allowed, state.logits[nodes] + noise[nodes], -np.inf)
        schedule[nodes] = np.argmax(r, axis=1)

    mask = stages[None, :] >= lower[:, None]
    allowed = mask & state.window
    r = (state.logits + noise) / tau
    soft = _masked_softmax(r, allowed)
    probs = state.probabilities() * mask
    conf = probs.max(axis=1)
    loss_r = loss_resource(soft, state.config.entropy_sign)
    loss_c = loss_comm(soft, dag)
    record = IterationRecord(
        iteration=state.steps + 1,
        schedule=schedule,
        probs=probs,
        confidence=conf,
        loss_r=loss_r,
        loss_c=loss_c,
        loss=state.config.lam * loss_r + loss_c,
        temperature=float(tau),
        cache={"noise": noise, "mask": mask, "allowed": allowed, "soft": soft, "r": r, "tau": tau},
    )
    record.wall_time = time.perf_counter() - t0
    return record


def relaxed_loss(state, logits, record):
    """Composite loss as a function of ``logits`` with the record's noise and masks frozen."""
    ch = record.cache
    soft = _masked_softmax((logits + ch["noise"]) / ch["tau"], ch["allowed"])
    cfg = state.config
    return cfg.lam * loss_resource(soft, cfg.entropy_sign) + loss_comm(soft, state.dag)


def gradient(state, record, through_masks=True):
    """Analytic gradient of the composite loss with respect to the logits.

    With ``through_masks=False`` only the soft path (restricted softmaxes
    with frozen masks) contributes; this is exactly the derivative of
    :func:`relaxed_loss`. The full gradient additionally routes each
    child's mask sensitivity back into the parent's soft row
    (straight-through estimator for the hard one-hot).
    """
    ch = record.cache
    if ch is None:
        raise ValueError("record carries no forward cache (replayed records cannot be stepped)")
    dag, L = state.dag, state.latency
    cfg = state.config
    soft, r, tau = ch["soft"], ch["r"], ch["tau"]
    G = _loss_grad(soft, dag, cfg.lam, cfg.entropy_sign)
    dz = np.zeros_like(soft)
    if not through_masks or not dag.edges:
        dz = soft * (G - (soft * G).sum(axis=1, keepdims=True)) / tau
        return dz

    src, dst, c = dag.src, dag.dst, dag.diff_const
    # Parent-edge masks as used in the forward sweep.
    tmask = np.arange(L)[None, :] >= (record.schedule[src] - c)[:, None]
    zeros_in = np.zeros((dag.node_count, L))
    np.add.at(zeros_in, dst, (~tmask).astype(float))
    others_on = (zeros_in[dst] - (~tmask)) == 0
    # Mask sensitivity is taken on the product softmax * T before renormalization;
    # the exact renormalized derivative scales by 1/(kept mass) and is unbounded.
    q = _masked_softmax(r, state.window)

    dmask = np.zeros_like(soft)
    for nodes, eidx in zip(reversed(state.levels), reversed(state.level_edges)):
        g = G[nodes]
        y = soft[nodes]
        centered = g - (y * g).sum(axis=1, keepdims=True)
        dz[nodes] = y * centered / tau
        if len(eidx):
            # Children sit in later levels, so G rows of this level are final here.
            dmask[nodes] = q[nodes] * centered
            dT = dmask[dst[eidx]] * others_on[eidx]
            np.add.at(G, src[eidx], _mask_leq_transpose(dT, c[eidx]))
    return dz


def step(state, record, config=None):
    """Adam update of the logits from one iteration record (in place)."""
    cfg = config or state.config
    grad = gradient(state, record)
    if not np.all(np.isfinite(grad)):
        raise NonFiniteGradientError(
            "non-finite gradient",
            dump={"iteration": record.iteration, "logits": state.logits.copy(), "grad": grad, "loss": record.loss},
        )
    b1, b2 = _ADAM_BETAS
    state.steps += 1
    state.adam_m = b1 * state.adam_m + (1 - b1) * grad
    state.adam_v = b2 * state.adam_v + (1 - b2) * grad * grad
    mhat = state.adam_m / (1 - b1**state.steps)
    vhat = state.adam_v / (1 - b2**state.steps)
    state.logits = state.logits - cfg.learning_rate * mhat / (np.sqrt(vhat) + _ADAM_EPS)
    return state


def run(dag, latency, config=None):
    """``config.iterations`` sample-and-update rounds; one record per round."""
    config = config or DiffConfig()
    state = init(dag, latency, config)
    records = []
    for _ in range(config.iterations):
        t0 = time.perf_counter()
        rec = forward_pass(state)
        step(state, rec)
        rec.wall_time = time.perf_counter() - t0
        logger.debug("iteration %d loss %.6f (%.3fs)", rec.iteration, rec.loss, rec.wall_time)
        records.append(rec)
    return records


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def records_to_jsonl(records):
    return "".join(json.dumps(r.to_dict(), separators=(",", ":")) + "\n" for r in records)


def records_from_jsonl(text):
    return [IterationRecord.from_dict(json.loads(line)) for line in text.splitlines() if line.strip()]


def loss_trace_csv(records):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["iteration", "loss_r", "loss_c", "loss", "temperature"])
    for r in records:
        w.writerow([r.iteration, repr(r.loss_r), repr(r.loss_c), repr(r.loss), repr(r.temperature)])
    return buf.getvalue()
