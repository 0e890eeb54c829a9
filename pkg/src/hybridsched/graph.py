"""DAG data model, graph ingestion and structural precomputation.

A :class:`Dag` carries, per edge ``(i, j)``, a nonnegative communication
weight and an integer difference constant ``c`` encoding ``s_i - s_j <= c``.
``c = 0`` allows chaining (child in the same stage as its parent),
``c = -1`` forces the child at least one stage later.
"""

from __future__ import annotations

import heapq
import json
import math
import re
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import GraphFormatError, InfeasibleError

__all__ = [
    "Dag",
    "Edge",
    "StageWindow",
    "parse_graph",
    "generate_random_workload",
    "topological_order",
    "stage_windows",
    "window_bounds",
    "topological_levels",
]


@dataclass(frozen=True)
class Edge:
    src: int
    dst: int
    weight: float = 1.0
    diff_const: int = 0


@dataclass(frozen=True)
class StageWindow:
    node: int
    earliest: int
    latest: int


@dataclass(frozen=True)
class Dag:
    """Immutable directed acyclic graph with dense integer node ids.

    Construction validates every invariant (ids in range, no self-loops,
    no duplicate edges, nonnegative weights, acyclicity) and raises
    :class:`GraphFormatError` otherwise.
    """

    node_count: int
    edges: tuple = ()
    labels: tuple | None = None

    def __post_init__(self):
        edges = tuple(e if isinstance(e, Edge) else Edge(*e) for e in self.edges)
        object.__setattr__(self, "edges", edges)
        if self.labels is not None:
            object.__setattr__(self, "labels", tuple(str(x) for x in self.labels))
        self._validate()

    def _validate(self):
        n = self.node_count
        if not isinstance(n, (int, np.integer)) or n < 1:
            raise GraphFormatError(f"node count must be a positive integer, got {n!r}")
        if self.labels is not None and len(self.labels) != n:
            raise GraphFormatError(
                f"{len(self.labels)} labels given for {n} nodes"
            )
        seen = set()
        for k, e in enumerate(self.edges):
            loc = f"edge {k}"
            if not (0 <= e.src < n and 0 <= e.dst < n):
                raise GraphFormatError(
                    f"dangling node reference ({e.src}, {e.dst}) with {n} nodes", loc
                )
            if e.src == e.dst:
                raise GraphFormatError(f"self-loop on node {e.src}", loc)
            if (e.src, e.dst) in seen:
                raise GraphFormatError(f"duplicate edge ({e.src}, {e.dst})", loc)
            if not math.isfinite(e.weight) or e.weight < 0:
                raise GraphFormatError(f"negative or non-finite weight {e.weight}", loc)
            if int(e.diff_const) != e.diff_const:
                raise GraphFormatError(f"non-integer difference constant {e.diff_const}", loc)
            seen.add((e.src, e.dst))
        if len(self.topo_order) != n:
            cyc = sorted(set(range(n)) - set(self.topo_order))
            raise GraphFormatError(f"cycle detected among nodes {cyc[:10]}")

    @property
    def edge_count(self):
        return len(self.edges)

    @cached_property
    def src(self):
        return np.array([e.src for e in self.edges], dtype=np.int64)

    @cached_property
    def dst(self):
        return np.array([e.dst for e in self.edges], dtype=np.int64)

    @cached_property
    def weight(self):
        return np.array([e.weight for e in self.edges], dtype=float)

    @cached_property
    def diff_const(self):
        return np.array([e.diff_const for e in self.edges], dtype=np.int64)

    @cached_property
    def in_edges(self):
        """Per node, the indices of its incoming edges."""
        out = [[] for _ in range(self.node_count)]
        for k, e in enumerate(self.edges):
            out[e.dst].append(k)
        return tuple(tuple(x) for x in out)

    @cached_property
    def out_edges(self):
        out = [[] for _ in range(self.node_count)]
        for k, e in enumerate(self.edges):
            out[e.src].append(k)
        return tuple(tuple(x) for x in out)

    @cached_property
    def topo_order(self):
        # Kahn's algorithm, smallest ready id first; a short result means a cycle.
        indeg = [0] * self.node_count
        succ = [[] for _ in range(self.node_count)]
        for e in self.edges:
            indeg[e.dst] += 1
            succ[e.src].append(e.dst)
        ready = [v for v in range(self.node_count) if indeg[v] == 0]
        heapq.heapify(ready)
        order = []
        while ready:
            v = heapq.heappop(ready)
            order.append(v)
            for w in succ[v]:
                indeg[w] -= 1
                if indeg[w] == 0:
                    heapq.heappush(ready, w)
        return tuple(order)

    @property
    def total_weight(self):
        return float(self.weight.sum()) if self.edges else 0.0

    def to_dict(self):
        d = {
            "nodes": int(self.node_count),
            "edges": [[e.src, e.dst, float(e.weight), int(e.diff_const)] for e in self.edges],
        }
        if self.labels is not None:
            d["labels"] = list(self.labels)
        return d

    def to_json(self):
        return json.dumps(self.to_dict(), separators=(",", ":"))

    def to_edgelist(self):
        lines = [f"# nodes {self.node_count}"]
        covered = {e.src for e in self.edges} | {e.dst for e in self.edges}
        lines += [str(v) for v in range(self.node_count) if v not in covered]
        lines += [f"{e.src} {e.dst} {e.weight!r} {e.diff_const}" for e in self.edges]
        return "\n".join(lines) + "\n"

    def to_dot(self):
        name = (lambda v: f'"{self.labels[v]}"') if self.labels else str
        body = [f"  {name(v)};" for v in range(self.node_count)]
        body += [
            f"  {name(e.src)} -> {name(e.dst)} [weight={e.weight!r}, c={e.diff_const}];"
            for e in self.edges
        ]
        return "digraph {\n" + "\n".join(body) + "\n}\n"


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------


def parse_graph(data, format="json"):
    """Parse ``data`` (bytes or str) in one of ``json``, ``dot``, ``edgelist``."""
    if isinstance(data, (bytes, bytearray)):
        try:
            data = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise GraphFormatError(f"input is not UTF-8: {exc}") from None
    parsers = {"json": _parse_json, "dot": _parse_dot, "edgelist": _parse_edgelist}
    try:
        parser = parsers[format]
    except KeyError:
        raise ValueError(f"unknown graph format {format!r}") from None
    return parser(data)


def _parse_json(text):
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise GraphFormatError(exc.msg, f"line {exc.lineno} col {exc.colno}") from None
    if not isinstance(doc, dict) or "nodes" not in doc:
        raise GraphFormatError('expected an object with a "nodes" field')
    n = doc["nodes"]
    if not isinstance(n, int) or isinstance(n, bool):
        raise GraphFormatError(f'"nodes" must be an integer, got {n!r}')
    edges = []
    for k, item in enumerate(doc.get("edges", [])):
        loc = f"edges[{k}]"
        if not isinstance(item, list) or not 2 <= len(item) <= 4:
            raise GraphFormatError("edge must be [src, dst, weight?, diff_const?]", loc)
        src, dst = item[0], item[1]
        if not all(isinstance(v, int) and not isinstance(v, bool) for v in (src, dst)):
            raise GraphFormatError("edge endpoints must be integers", loc)
        weight = item[2] if len(item) > 2 else 1.0
        c = item[3] if len(item) > 3 else 0
        if not isinstance(weight, (int, float)) or isinstance(weight, bool):
            raise GraphFormatError(f"weight must be numeric, got {weight!r}", loc)
        if not isinstance(c, int) or isinstance(c, bool):
            raise GraphFormatError(f"diff_const must be an integer, got {c!r}", loc)
        _check_edge(src, dst, weight, loc)
        edges.append(Edge(src, dst, float(weight), c))
    return _build(n, edges, doc.get("labels"))


def _check_edge(src, dst, weight, loc):
    # Checked eagerly so errors carry the input location.
    if src == dst:
        raise GraphFormatError(f"self-loop on node {src}", loc)
    if weight < 0:
        raise GraphFormatError(f"negative weight {weight}", loc)
    if src < 0 or dst < 0:
        raise GraphFormatError(f"negative node id in ({src}, {dst})", loc)


def _build(n, edges, labels=None):
    seen = {}
    for k, e in enumerate(edges):
        if e.src >= n or e.dst >= n:
            raise GraphFormatError(f"dangling node reference ({e.src}, {e.dst}) with {n} nodes", f"edge {k}")
        if (e.src, e.dst) in seen:
            raise GraphFormatError(f"duplicate edge ({e.src}, {e.dst})", f"edge {k}")
        seen[(e.src, e.dst)] = k
    return Dag(n, tuple(edges), tuple(labels) if labels is not None else None)


def _parse_edgelist(text):
    edges = []
    n = 0
    declared = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        loc = f"line {lineno}"
        m = re.match(r"\s*#\s*nodes\s+(\d+)\s*$", raw)
        if m:
            declared = int(m.group(1))
            continue
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        try:
            if len(tok) == 1:
                v = int(tok[0])
                if v < 0:
                    raise GraphFormatError(f"negative node id {v}", loc)
                n = max(n, v + 1)
                continue
            if len(tok) > 4:
                raise GraphFormatError("expected 'src dst weight [diff_const]'", loc)
            src, dst = int(tok[0]), int(tok[1])
            weight = float(tok[2]) if len(tok) > 2 else 1.0
            c = int(tok[3]) if len(tok) > 3 else 0
        except ValueError:
            raise GraphFormatError(f"malformed line {raw.strip()!r}", loc) from None
        _check_edge(src, dst, weight, loc)
        edges.append(Edge(src, dst, weight, c))
        n = max(n, src + 1, dst + 1)
    if declared is not None:
        if declared < n:
            raise GraphFormatError(f"declared {declared} nodes but ids reach {n - 1}")
        n = declared
    if n == 0:
        raise GraphFormatError("empty edge list declares no nodes")
    return _build(n, edges)


_DOT_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>//[^\n]*|\#[^\n]*|/\*.*?\*/)
  | (?P<arrow>->)
  | (?P<punct>[{}\[\];,=])
  | (?P<string>"(?:[^"\\]|\\.)*")
  | (?P<id>[A-Za-z_0-9.\-+]+)
    """,
    re.VERBOSE | re.DOTALL,
)


def _tokenize_dot(text):
    tokens = []
    line = 1
    pos = 0
    while pos < len(text):
        m = _DOT_TOKEN.match(text, pos)
        if m is None:
            raise GraphFormatError(f"unexpected character {text[pos]!r}", f"line {line}")
        kind = m.lastgroup
        val = m.group()
        if kind in ("id", "string", "arrow", "punct"):
            if kind == "string":
                val = bytes(val[1:-1], "utf-8").decode("unicode_escape")
                kind = "id"
            tokens.append((kind, val, line))
        line += val.count("\n") if kind in ("nl", "comment") else 0
        pos = m.end()
    return tokens


def _parse_dot(text):
    toks = _tokenize_dot(text)
    i = 0

    def peek():
        return toks[i] if i < len(toks) else (None, None, toks[-1][2] if toks else 1)

    def expect(val):
        nonlocal i
        kind, v, line = peek()
        if v != val:
            raise GraphFormatError(f"expected {val!r}, found {v!r}", f"line {line}")
        i += 1

    kind, v, line = peek()
    if v == "strict":
        i += 1
        kind, v, line = peek()
    if v != "digraph":
        raise GraphFormatError("expected 'digraph'", f"line {line}")
    i += 1
    if peek()[0] == "id":
        i += 1
    expect("{")

    names = {}
    edges = []

    def node_id(name):
        if name not in names:
            names[name] = len(names)
        return names[name]

    def parse_attrs():
        nonlocal i
        attrs = {}
        if peek()[1] != "[":
            return attrs
        i += 1
        while peek()[1] != "]":
            kind, key, line = peek()
            if kind != "id":
                raise GraphFormatError(f"bad attribute name {key!r}", f"line {line}")
            i += 1
            expect("=")
            kind, val, line = peek()
            if kind != "id":
                raise GraphFormatError(f"bad attribute value {val!r}", f"line {line}")
            i += 1
            attrs[key] = (val, line)
            if peek()[1] in (",", ";"):
                i += 1
        i += 1
        return attrs

    while True:
        kind, v, line = peek()
        if v is None:
            raise GraphFormatError("unterminated digraph body", f"line {line}")
        if v == "}":
            i += 1
            break
        if v == ";":
            i += 1
            continue
        if kind != "id":
            raise GraphFormatError(f"unexpected token {v!r}", f"line {line}")
        if v in ("graph", "node", "edge") and _peek_next_is_attr(toks, i):
            i += 1
            parse_attrs()
            continue
        chain = [v]
        i += 1
        while peek()[1] == "->":
            i += 1
            kind, w, line2 = peek()
            if kind != "id":
                raise GraphFormatError(f"expected node after '->', found {w!r}", f"line {line2}")
            chain.append(w)
            i += 1
        attrs = parse_attrs()
        ids = [node_id(x) for x in chain]
        if len(ids) > 1:
            try:
                weight = float(attrs["weight"][0]) if "weight" in attrs else 1.0
                cval = attrs.get("c", attrs.get("diff_const", ("0", line)))[0]
                c = int(cval)
            except ValueError:
                raise GraphFormatError("non-numeric weight or c attribute", f"line {line}") from None
            for a, b in zip(ids, ids[1:]):
                _check_edge(a, b, weight, f"line {line}")
                if any(e.src == a and e.dst == b for e in edges):
                    raise GraphFormatError(f"duplicate edge {chain[0]} -> {chain[-1]}", f"line {line}")
                edges.append(Edge(a, b, weight, c))
    if i != len(toks):
        raise GraphFormatError("trailing content after digraph", f"line {toks[i][2]}")
    if not names:
        raise GraphFormatError("digraph declares no nodes")
    labels = sorted(names, key=names.get)
    return _build(len(names), edges, labels)


def _peek_next_is_attr(toks, i):
    return i + 1 < len(toks) and toks[i + 1][1] == "["


# ---------------------------------------------------------------------------
# Synthetic workloads
# ---------------------------------------------------------------------------


def _weight_sampler(weight_dist):
    if isinstance(weight_dist, str):
        m = re.fullmatch(r"\s*(uniform|constant)\s*\(([^)]*)\)\s*", weight_dist)
        if not m:
            raise ValueError(f"bad weight distribution {weight_dist!r}")
        args = [float(x) for x in m.group(2).split(",") if x.strip()]
        weight_dist = (m.group(1), *args)
    kind, *args = weight_dist
    if kind == "constant" and len(args) == 1 and args[0] >= 0:
        w = args[0]
        return lambda rng, k: np.full(k, w)
    if kind == "uniform" and len(args) == 2 and 0 <= args[0] <= args[1]:
        a, b = args
        return lambda rng, k: rng.uniform(a, b, size=k)
    raise ValueError(f"bad weight distribution {weight_dist!r}")


def generate_random_workload(n, p, weight_dist="constant(1)", seed=0, strict_prob=0.0):
    """Random DAG with edges only from lower to higher ids.

    Each pair ``i < j`` is connected with probability ``p``. Edge weights
    follow ``weight_dist`` (``"uniform(a,b)"`` or ``"constant(w)"``, or the
    equivalent tuples). A fraction ``strict_prob`` of edges gets ``c = -1``
    (strict precedence); the rest allow chaining.
    """
    if n < 1 or not 0.0 <= p <= 1.0 or not 0.0 <= strict_prob <= 1.0:
        raise ValueError("need n >= 1 and probabilities in [0, 1]")
    sample_w = _weight_sampler(weight_dist)
    rng = np.random.default_rng(seed)
    coin = rng.random((n, n))
    src, dst = np.nonzero(np.triu(coin < p, k=1))
    weights = sample_w(rng, len(src))
    strict = rng.random(len(src)) < strict_prob
    edges = tuple(
        Edge(int(i), int(j), float(w), -1 if s else 0)
        for i, j, w, s in zip(src, dst, weights, strict)
    )
    return Dag(int(n), edges)


# ---------------------------------------------------------------------------
# Structure
# ---------------------------------------------------------------------------


def topological_order(dag):
    """Node ids in topological order, ties broken by ascending id."""
    return list(dag.topo_order)


def topological_levels(dag):
    """Group nodes by longest-path depth; nodes within a level share no edge."""
    depth = np.zeros(dag.node_count, dtype=np.int64)
    for v in dag.topo_order:
        for k in dag.in_edges[v]:
            depth[v] = max(depth[v], depth[dag.edges[k].src] + 1)
    levels = [[] for _ in range(int(depth.max()) + 1)]
    for v in dag.topo_order:
        levels[depth[v]].append(v)
    return [np.array(lv, dtype=np.int64) for lv in levels]


def window_bounds(dag, latency, check=True):
    """ASAP/ALAP stage bounds as two integer arrays ``(earliest, latest)``.

    Raises :class:`InfeasibleError` if some node has an empty window, unless
    ``check`` is false.
    """
    if latency < 1:
        raise ValueError(f"latency must be >= 1, got {latency}")
    n = dag.node_count
    earliest = np.zeros(n, dtype=np.int64)
    latest = np.full(n, latency - 1, dtype=np.int64)
    order = dag.topo_order
    for v in order:
        for k in dag.in_edges[v]:
            e = dag.edges[k]
            earliest[v] = max(earliest[v], earliest[e.src] - e.diff_const)
    for v in reversed(order):
        for k in dag.out_edges[v]:
            e = dag.edges[k]
            latest[v] = min(latest[v], latest[e.dst] + e.diff_const)
    bad = np.nonzero(earliest > latest)[0]
    if check and len(bad):
        v = int(bad[0])
        raise InfeasibleError(
            f"latency {latency} infeasible: node {v} needs stage >= {earliest[v]} "
            f"but must be <= {latest[v]}"
        )
    return earliest, latest


def stage_windows(dag, latency):
    earliest, latest = window_bounds(dag, latency)
    return [StageWindow(v, int(a), int(b)) for v, (a, b) in enumerate(zip(earliest, latest))]
