"""Data-flow graph model, ingestion, and structural validation.

A graph is a set of operation nodes plus directed data edges.  Every edge
carries an inter-iteration ``distance``: distance 0 is an ordinary data
dependency inside one loop iteration, distance d >= 1 means the consumer
reads the value the producer computed d iterations earlier.  Any cycle in a
well-formed graph contains at least one edge with distance >= 1, so the
distance-0 subgraph is a DAG.

Document format (JSON):

    {
      "nodes": [{"id": 0, "op": "input", "stream": 0},
                {"id": 1, "op": "const", "imm": 7},
                {"id": 2, "op": "add"},
                {"id": 3, "op": "output", "stream": 0}],
      "edges": [{"src": 0, "dst": 2, "operand": 0, "distance": 0},
                {"src": 1, "dst": 2, "operand": 1, "distance": 0},
                {"src": 2, "dst": 3, "operand": 0, "distance": 0}],
      "init":  [{"edge": [2, 2, 0], "values": [0]}]
    }

``distance`` defaults to 0.  A loop-carried edge of distance d should list d
initial values: ``values[i]`` is what the consumer reads at iteration i < d.
Values are 32-bit two's-complement integers; immediates and initial values
are wrapped into that range on load.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable

from .errors import FormatError

# Operation tags and their data-operand arity.
OP_ARITY = {
    "const": 0,
    "input": 0,
    "output": 1,
    "add": 2,
    "sub": 2,
    "mul": 2,
    "and": 2,
    "or": 2,
    "xor": 2,
    "shl": 2,
    "shr": 2,
}

_U32 = 0xFFFFFFFF


def wrap32(x: int) -> int:
    """Reduce an integer to signed 32-bit two's complement."""
    x &= _U32
    return x - 0x100000000 if x & 0x80000000 else x


def apply_op(op: str, a: int, b: int) -> int:
    """Evaluate a two-operand ALU operation with wrapping 32-bit semantics.

    Shift amounts are taken mod 32; shr is a logical shift of the 32-bit
    pattern (the sign bit is not replicated).
    """
    if op == "add":
        return wrap32(a + b)
    if op == "sub":
        return wrap32(a - b)
    if op == "mul":
        return wrap32(a * b)
    if op == "and":
        return wrap32((a & _U32) & (b & _U32))
    if op == "or":
        return wrap32((a & _U32) | (b & _U32))
    if op == "xor":
        return wrap32((a & _U32) ^ (b & _U32))
    if op == "shl":
        return wrap32((a & _U32) << ((b & _U32) % 32))
    if op == "shr":
        return wrap32((a & _U32) >> ((b & _U32) % 32))
    raise ValueError(f"not a two-operand op: {op!r}")


@dataclass(frozen=True)
class DfgNode:
    """One loop-body instruction.

    ``immediate`` is set only for const nodes; ``stream`` only for
    input/output nodes (it names the external data stream they touch).
    """

    id: int
    op: str
    immediate: int | None = None
    stream: int | None = None

    @property
    def arity(self) -> int:
        return OP_ARITY[self.op]

    @property
    def produces_value(self) -> bool:
        return self.op != "output"


@dataclass(frozen=True)
class DfgEdge:
    """A data dependency from ``src`` to operand ``operand_index`` of ``dst``.

    ``distance`` counts loop iterations between producer and consumer.
    """

    src: int
    dst: int
    operand_index: int
    distance: int = 0

    @property
    def key(self) -> tuple[int, int, int]:
        return (self.src, self.dst, self.operand_index)


@dataclass(frozen=True)
class Violation:
    """One broken structural invariant, identified by kind and offender ids."""

    kind: str
    message: str
    nodes: tuple[int, ...] = ()
    edge: tuple[int, int, int] | None = None

    def __str__(self) -> str:
        return f"{self.kind}: {self.message}"


@dataclass(frozen=True)
class DataFlowGraph:
    """Immutable loop body: nodes (ids dense 0..N-1) and data edges.

    ``init_values`` maps a loop-carried edge key (src, dst, operand_index)
    to the tuple of values consumed before the producer's first firing.
    """

    nodes: tuple[DfgNode, ...]
    edges: tuple[DfgEdge, ...]
    init_values: dict[tuple[int, int, int], tuple[int, ...]] = field(default_factory=dict)

    @property
    def node_count(self) -> int:
        return len(self.nodes)

    def node(self, node_id: int) -> DfgNode:
        return self.nodes[node_id]

    def in_edges(self, node_id: int) -> list[DfgEdge]:
        return [e for e in self.edges if e.dst == node_id]

    def out_edges(self, node_id: int) -> list[DfgEdge]:
        return [e for e in self.edges if e.src == node_id]

    def zero_distance_edges(self) -> list[DfgEdge]:
        return [e for e in self.edges if e.distance == 0]

    def max_distance(self) -> int:
        return max((e.distance for e in self.edges), default=0)

    def input_streams(self) -> list[int]:
        return sorted({n.stream for n in self.nodes if n.op == "input"})

    def output_streams(self) -> list[int]:
        return sorted({n.stream for n in self.nodes if n.op == "output"})


def _zero_distance_cycle(g: DataFlowGraph) -> list[int] | None:
    """Return one cycle (as a node id list) in the distance-0 subgraph, or None."""
    succs: dict[int, list[int]] = {n.id: [] for n in g.nodes}
    for e in g.zero_distance_edges():
        if e.src in succs and e.dst in succs:
            succs[e.src].append(e.dst)
    WHITE, GREY, BLACK = 0, 1, 2
    color = {n.id: WHITE for n in g.nodes}
    stack_path: list[int] = []

    def dfs(v: int) -> list[int] | None:
        color[v] = GREY
        stack_path.append(v)
        for w in succs[v]:
            if color[w] == GREY:
                return stack_path[stack_path.index(w):]
            if color[w] == WHITE:
                found = dfs(w)
                if found is not None:
                    return found
        stack_path.pop()
        color[v] = BLACK
        return None

    for n in g.nodes:
        if color[n.id] == WHITE:
            cycle = dfs(n.id)
            if cycle is not None:
                return cycle
    return None


def validate_dfg(g: DataFlowGraph) -> list[Violation]:
    """Check every structural invariant; return violations in id order.

    An empty list means the graph is valid.  Violations are data, not
    exceptions, so callers can report all of them at once.
    """
    out: list[Violation] = []
    known = {n.id for n in g.nodes}

    for i, n in enumerate(g.nodes):
        if n.id != i:
            out.append(Violation("non-dense-id", f"node at position {i} has id {n.id}", (n.id,)))
        if n.op not in OP_ARITY:
            out.append(Violation("unknown-op", f"node {n.id} has unknown op {n.op!r}", (n.id,)))
            continue
        if n.op == "const" and n.immediate is None:
            out.append(Violation("missing-immediate", f"const node {n.id} has no immediate", (n.id,)))
        if n.op != "const" and n.immediate is not None:
            out.append(Violation("stray-immediate", f"node {n.id} ({n.op}) carries an immediate", (n.id,)))
        if n.op in ("input", "output"):
            if n.stream is None or n.stream < 0:
                out.append(Violation("missing-stream", f"{n.op} node {n.id} needs a stream id >= 0", (n.id,)))
        elif n.stream is not None:
            out.append(Violation("stray-stream", f"node {n.id} ({n.op}) carries a stream id", (n.id,)))

    fed: dict[tuple[int, int], list[DfgEdge]] = {}
    for e in g.edges:
        if e.src not in known or e.dst not in known:
            out.append(Violation("dangling-edge", f"edge {e.key} references an unknown node", edge=e.key))
            continue
        if e.distance < 0:
            out.append(Violation("negative-distance", f"edge {e.key} has distance {e.distance}", edge=e.key))
        dst = g.node(e.dst)
        if dst.op in OP_ARITY and (dst.arity == 0 or not 0 <= e.operand_index < dst.arity):
            out.append(Violation(
                "bad-operand-slot",
                f"edge {e.key} feeds operand {e.operand_index} of {dst.op} node {e.dst} (arity {dst.arity})",
                edge=e.key))
            continue
        if not g.node(e.src).produces_value:
            out.append(Violation("source-produces-no-value",
                                 f"edge {e.key} reads from output node {e.src}", edge=e.key))
        fed.setdefault((e.dst, e.operand_index), []).append(e)

    for (dst, slot), feeders in sorted(fed.items()):
        if len(feeders) > 1:
            out.append(Violation("operand-fed-twice",
                                 f"operand {slot} of node {dst} is fed by {len(feeders)} edges",
                                 (dst,)))
    for n in g.nodes:
        if n.op not in OP_ARITY:
            continue
        for slot in range(n.arity):
            if (n.id, slot) not in fed:
                out.append(Violation("missing-operand",
                                     f"operand {slot} of {n.op} node {n.id} is unfed", (n.id,)))

    edge_keys = {e.key: e for e in g.edges}
    for key, values in sorted(g.init_values.items()):
        e = edge_keys.get(key)
        if e is None:
            out.append(Violation("init-unknown-edge", f"init values for nonexistent edge {key}", edge=key))
        elif e.distance == 0:
            out.append(Violation("init-on-zero-distance", f"init values on distance-0 edge {key}", edge=key))
        elif len(values) != e.distance:
            out.append(Violation("init-length",
                                 f"edge {key} has distance {e.distance} but {len(values)} init values",
                                 edge=key))
    for e in g.edges:
        if e.distance > 0 and e.key not in g.init_values:
            out.append(Violation("init-length",
                                 f"edge {e.key} has distance {e.distance} but no init values",
                                 edge=e.key))

    cycle = _zero_distance_cycle(g)
    if cycle is not None:
        out.append(Violation("zero-distance-cycle",
                             f"distance-0 cycle through nodes {cycle}", tuple(cycle)))
    return out


def _require(cond: bool, message: str):
    if not cond:
        raise FormatError(message)


def _int_field(obj: dict, key: str, what: str) -> int:
    _require(key in obj, f"{what} is missing required key {key!r}")
    v = obj[key]
    _require(isinstance(v, int) and not isinstance(v, bool), f"{what} key {key!r} must be an integer")
    return v


def parse_dfg(text: str) -> DataFlowGraph:
    """Parse a DFG document, normalize ids to 0..N-1, and validate.

    Raises FormatError for syntax problems (with position), duplicate node
    ids, references to unknown nodes, and any structural-invariant
    violation (reported all at once).
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"DFG syntax error: {exc.msg}", exc.lineno, exc.colno) from exc
    _require(isinstance(doc, dict), "DFG document must be a JSON object")
    unknown = set(doc) - {"nodes", "edges", "init"}
    _require(not unknown, f"DFG document has unknown top-level keys: {sorted(unknown)}")
    raw_nodes = doc.get("nodes", [])
    raw_edges = doc.get("edges", [])
    raw_init = doc.get("init", [])
    _require(isinstance(raw_nodes, list), "'nodes' must be a list")
    _require(isinstance(raw_edges, list), "'edges' must be a list")
    _require(isinstance(raw_init, list), "'init' must be a list")

    nodes: list[DfgNode] = []
    by_original: dict[int, DfgNode] = {}
    for raw in raw_nodes:
        _require(isinstance(raw, dict), "each node must be an object")
        unknown = set(raw) - {"id", "op", "imm", "stream"}
        _require(not unknown, f"node has unknown keys: {sorted(unknown)}")
        nid = _int_field(raw, "id", "node")
        _require(nid >= 0, f"node id {nid} is negative")
        _require("op" in raw and isinstance(raw["op"], str), "node needs a string 'op'")
        op = raw["op"]
        _require(op in OP_ARITY, f"node {nid} has unknown op {op!r}")
        if nid in by_original:
            raise FormatError(f"duplicate node id {nid}")
        imm = raw.get("imm")
        if imm is not None:
            _require(isinstance(imm, int) and not isinstance(imm, bool), f"node {nid}: 'imm' must be an integer")
            imm = wrap32(imm)
        stream = raw.get("stream")
        if stream is not None:
            _require(isinstance(stream, int) and not isinstance(stream, bool),
                     f"node {nid}: 'stream' must be an integer")
        node = DfgNode(id=nid, op=op, immediate=imm, stream=stream)
        by_original[nid] = node
        nodes.append(node)

    # Normalize ids to 0..N-1, keeping the original id ordering.
    order = sorted(by_original)
    remap = {orig: dense for dense, orig in enumerate(order)}
    dense_nodes = tuple(
        DfgNode(id=remap[n.id], op=n.op, immediate=n.immediate, stream=n.stream)
        for n in sorted(nodes, key=lambda n: n.id)
    )

    edges: list[DfgEdge] = []
    for raw in raw_edges:
        _require(isinstance(raw, dict), "each edge must be an object")
        unknown = set(raw) - {"src", "dst", "operand", "distance"}
        _require(not unknown, f"edge has unknown keys: {sorted(unknown)}")
        src = _int_field(raw, "src", "edge")
        dst = _int_field(raw, "dst", "edge")
        operand = _int_field(raw, "operand", "edge")
        distance = raw.get("distance", 0)
        _require(isinstance(distance, int) and not isinstance(distance, bool),
                 "edge 'distance' must be an integer")
        _require(src in remap, f"edge references unknown node {src}")
        _require(dst in remap, f"edge references unknown node {dst}")
        edges.append(DfgEdge(src=remap[src], dst=remap[dst],
                             operand_index=operand, distance=distance))

    init_values: dict[tuple[int, int, int], tuple[int, ...]] = {}
    for raw in raw_init:
        _require(isinstance(raw, dict), "each init entry must be an object")
        unknown = set(raw) - {"edge", "values"}
        _require(not unknown, f"init entry has unknown keys: {sorted(unknown)}")
        ref = raw.get("edge")
        _require(isinstance(ref, list) and len(ref) == 3 and all(isinstance(x, int) for x in ref),
                 "init 'edge' must be [src, dst, operand]")
        values = raw.get("values")
        _require(isinstance(values, list) and all(isinstance(v, int) for v in values),
                 "init 'values' must be a list of integers")
        src, dst, operand = ref
        _require(src in remap and dst in remap, f"init entry references unknown node in {ref}")
        key = (remap[src], remap[dst], operand)
        _require(key not in init_values, f"duplicate init entry for edge {ref}")
        init_values[key] = tuple(wrap32(v) for v in values)

    g = DataFlowGraph(nodes=dense_nodes, edges=tuple(edges), init_values=init_values)
    violations = validate_dfg(g)
    if violations:
        raise FormatError("invalid DFG: " + "; ".join(str(v) for v in violations))
    return g


def dfg_to_document(g: DataFlowGraph) -> dict:
    """Serialize back to the document structure accepted by parse_dfg."""
    nodes = []
    for n in g.nodes:
        d: dict = {"id": n.id, "op": n.op}
        if n.immediate is not None:
            d["imm"] = n.immediate
        if n.stream is not None:
            d["stream"] = n.stream
        nodes.append(d)
    edges = [{"src": e.src, "dst": e.dst, "operand": e.operand_index, "distance": e.distance}
             for e in g.edges]
    init = [{"edge": list(key), "values": list(vals)}
            for key, vals in sorted(g.init_values.items())]
    doc = {"nodes": nodes, "edges": edges}
    if init:
        doc["init"] = init
    return doc


def serialize_dfg(g: DataFlowGraph) -> str:
    return json.dumps(dfg_to_document(g), indent=2) + "\n"


def format_graph_listing(g: DataFlowGraph) -> str:
    """Plain-text export for visualization: one node per line, one edge per line."""
    lines = []
    for n in g.nodes:
        extra = ""
        if n.immediate is not None:
            extra = f" imm={n.immediate}"
        if n.stream is not None:
            extra = f" stream={n.stream}"
        lines.append(f"node {n.id} {n.op}{extra}")
    for e in g.edges:
        lines.append(f"edge {e.src} -> {e.dst} operand={e.operand_index} distance={e.distance}")
    return "\n".join(lines) + "\n"


def load_dfg(path: str) -> DataFlowGraph:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_dfg(fh.read())


def topological_order(g: DataFlowGraph, edges: Iterable[DfgEdge] | None = None) -> list[int]:
    """Kahn topological order over the given edges (default: distance-0 only).

    Raises ValueError if the restricted subgraph has a cycle.
    """
    if edges is None:
        edges = g.zero_distance_edges()
    indeg = {n.id: 0 for n in g.nodes}
    succs: dict[int, list[int]] = {n.id: [] for n in g.nodes}
    for e in edges:
        indeg[e.dst] += 1
        succs[e.src].append(e.dst)
    ready = sorted(v for v, d in indeg.items() if d == 0)
    order: list[int] = []
    while ready:
        v = ready.pop(0)
        order.append(v)
        inserted = False
        for w in succs[v]:
            indeg[w] -= 1
            if indeg[w] == 0:
                ready.append(w)
                inserted = True
        if inserted:
            ready.sort()
    if len(order) != g.node_count:
        raise ValueError("graph restricted to the given edges has a cycle")
    return order
