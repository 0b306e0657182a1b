"""Cross-checks for space-time mappings: independent rule checker,
cycle-accurate simulator, reference interpreter, and an exhaustive
minimum-II search for small graphs.

Nothing here consults the CNF machinery.  The checker restates the
placement rules from first principles; the simulator executes the
schedule in absolute-cycle order while the interpreter executes the graph
in iteration order, so agreement between the two exercises the mapping's
timing, not just the arithmetic.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from itertools import product
from pathlib import Path

from .arch import (CgraArchitecture, arch_to_document, closed_neighborhood,
                   symmetry_orbit_representatives)
from .dfg import DataFlowGraph, Violation, apply_op, dfg_to_document, topological_order, wrap32
from .errors import FormatError, IntegrityError, OracleCapError
from .regalloc import PressureReport, register_report_document
from .schedule import build_kms, build_mobility, compute_mii


@dataclass(frozen=True)
class Placement:
    pe: int
    slot: int
    label: int


@dataclass(frozen=True)
class Mapping:
    """A modulo schedule: per node a PE, a kernel slot, and an iteration label.

    Node n's iteration i fires at absolute cycle (label + i) * ii + slot.
    The fingerprints tie a mapping to the graph and architecture it was
    produced for; they are advisory and may be empty on hand-built
    mappings.
    """

    ii: int
    assignment: dict[int, Placement] = field(default_factory=dict)
    dfg_sha256: str = ""
    arch_sha256: str = ""

    def time_of(self, node_id: int) -> int:
        p = self.assignment[node_id]
        return p.label * self.ii + p.slot


def dfg_fingerprint(g: DataFlowGraph) -> str:
    blob = json.dumps(dfg_to_document(g), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("ascii")).hexdigest()


def arch_fingerprint(a: CgraArchitecture) -> str:
    blob = json.dumps(arch_to_document(a), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("ascii")).hexdigest()


def make_mapping(g: DataFlowGraph, a: CgraArchitecture, ii: int,
                 assignment: dict[int, Placement]) -> Mapping:
    return Mapping(ii=ii, assignment=dict(assignment),
                   dfg_sha256=dfg_fingerprint(g), arch_sha256=arch_fingerprint(a))


# -- document round trip ------------------------------------------------------


def mapping_to_document(m: Mapping, report: PressureReport | None = None) -> dict:
    doc: dict = {
        "ii": m.ii,
        "assignment": [
            {"node": n, "pe": p.pe, "slot": p.slot, "label": p.label}
            for n, p in sorted(m.assignment.items())
        ],
    }
    if report is not None:
        doc["register_report"] = register_report_document(report)
    if m.dfg_sha256 or m.arch_sha256:
        doc["fingerprints"] = {"dfg": m.dfg_sha256, "arch": m.arch_sha256}
    return doc


def parse_mapping(doc: dict) -> Mapping:
    if not isinstance(doc, dict):
        raise FormatError("mapping document must be a JSON object")
    known = {"ii", "assignment", "register_report", "fingerprints"}
    for key in doc:
        if key not in known:
            raise FormatError(f"unknown mapping key {key!r}")
    ii = doc.get("ii")
    if not isinstance(ii, int) or isinstance(ii, bool) or ii < 1:
        raise FormatError("mapping ii must be a positive integer")
    rows = doc.get("assignment")
    if not isinstance(rows, list):
        raise FormatError("mapping assignment must be a list")
    assignment: dict[int, Placement] = {}
    for i, row in enumerate(rows):
        if not isinstance(row, dict) or set(row) != {"node", "pe", "slot", "label"}:
            raise FormatError(f"assignment entry {i} must have node/pe/slot/label")
        vals = {}
        for key in ("node", "pe", "slot", "label"):
            v = row[key]
            if not isinstance(v, int) or isinstance(v, bool) or v < 0:
                raise FormatError(f"assignment entry {i}: {key} must be a non-negative integer")
            vals[key] = v
        if vals["node"] in assignment:
            raise FormatError(f"node {vals['node']} assigned twice")
        assignment[vals["node"]] = Placement(pe=vals["pe"], slot=vals["slot"], label=vals["label"])
    fp = doc.get("fingerprints", {})
    if not isinstance(fp, dict):
        raise FormatError("fingerprints must be an object")
    return Mapping(ii=ii, assignment=assignment,
                   dfg_sha256=str(fp.get("dfg", "")), arch_sha256=str(fp.get("arch", "")))


def load_mapping(path: str | Path) -> Mapping:
    text = Path(path).read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"invalid JSON: {exc.msg}", exc.lineno, exc.colno) from exc
    return parse_mapping(doc)


def save_mapping(m: Mapping, path: str | Path, report: PressureReport | None = None):
    Path(path).write_text(json.dumps(mapping_to_document(m, report), indent=2) + "\n",
                          encoding="utf-8")


# -- independent rule checker -------------------------------------------------


def check_mapping(g: DataFlowGraph, a: CgraArchitecture, m: Mapping) -> list[Violation]:
    """Re-derive every placement rule and report all breaches.

    Kinds: unassigned, unknown-node, range, duplicate-cell, adjacency,
    timing.  An empty list means the mapping is valid.
    """
    out: list[Violation] = []
    ids = {n.id for n in g.nodes}
    for node in g.nodes:
        if node.id not in m.assignment:
            out.append(Violation("unassigned", f"node {node.id} has no placement", (node.id,)))
    for n in sorted(m.assignment):
        if n not in ids:
            out.append(Violation("unknown-node", f"assignment names node {n} not in the graph", (n,)))
    placed = {n: p for n, p in m.assignment.items() if n in ids}
    for n in sorted(placed):
        p = placed[n]
        if not (0 <= p.pe < a.pe_count) or not (0 <= p.slot < m.ii) or p.label < 0:
            out.append(Violation(
                "range",
                f"node {n} placement (pe={p.pe}, slot={p.slot}, label={p.label}) "
                f"outside pe<{a.pe_count}, slot<{m.ii}, label>=0",
                (n,)))
            del placed[n]
    by_cell: dict[tuple[int, int], list[int]] = {}
    for n in sorted(placed):
        by_cell.setdefault((placed[n].pe, placed[n].slot), []).append(n)
    for cell in sorted(by_cell):
        nodes = by_cell[cell]
        if len(nodes) > 1:
            out.append(Violation(
                "duplicate-cell",
                f"nodes {nodes} all occupy pe={cell[0]} slot={cell[1]}",
                tuple(nodes)))
    for e in g.edges:
        if e.src not in placed or e.dst not in placed:
            continue
        pu, pv = placed[e.src], placed[e.dst]
        if pv.pe not in closed_neighborhood(a, pu.pe):
            out.append(Violation(
                "adjacency",
                f"edge {e.src}->{e.dst}: pe {pv.pe} is not pe {pu.pe} or a neighbor",
                (e.src, e.dst), e.key))
        tu = pu.label * m.ii + pu.slot
        tv = pv.label * m.ii + pv.slot
        if tv + e.distance * m.ii <= tu:
            out.append(Violation(
                "timing",
                f"edge {e.src}->{e.dst}: consumer time {tv} + {e.distance}*{m.ii} "
                f"does not follow producer time {tu}",
                (e.src, e.dst), e.key))
    return out


# -- cycle-accurate simulation ------------------------------------------------


@dataclass(frozen=True)
class SimTrace:
    """What a schedule run produced: streams, cycle count, per-cycle activity."""

    outputs: dict[int, tuple[int, ...]]
    cycles: int
    activity: tuple[tuple[tuple[int | None, ...], ...], ...]   # [cycle][row][col]


def _check_streams(g: DataFlowGraph, input_streams: dict[int, list[int]], iterations: int):
    for sid in g.input_streams():
        if sid not in input_streams:
            raise ValueError(f"no data for input stream {sid}")
        if len(input_streams[sid]) < iterations:
            raise ValueError(
                f"input stream {sid} has {len(input_streams[sid])} values, need {iterations}")


def _operand_value(g: DataFlowGraph, values, node_id: int, iteration: int,
                   edges_in) -> list[int]:
    args = [0, 0]
    for e in edges_in:
        j = iteration - e.distance
        if j >= 0:
            args[e.operand_index] = values(e.src, j)
        else:
            args[e.operand_index] = g.init_values[e.key][iteration]
    return args


def simulate(g: DataFlowGraph, a: CgraArchitecture, m: Mapping, iterations: int,
             input_streams: dict[int, list[int]]) -> SimTrace:
    """Execute the mapping cycle by cycle for ``iterations`` loop iterations.

    Instance (n, i) fires at cycle time_of(n) + i * ii, reading operands
    from producer instance (i - d) for a distance-d edge, or from the
    edge's initial values while i < d.  A read of a value the schedule has
    not produced yet is an integrity failure: it means the mapping's
    timing is wrong, which check_mapping should have caught.
    """
    if iterations < 1:
        raise ValueError("iterations must be positive")
    bad = check_mapping(g, a, m)
    if bad:
        raise IntegrityError(f"refusing to simulate an invalid mapping: {bad[0].message}")
    _check_streams(g, input_streams, iterations)

    fire_at: dict[int, list[tuple[int, int]]] = {}
    for node in g.nodes:
        t0 = m.time_of(node.id)
        for i in range(iterations):
            fire_at.setdefault(t0 + i * m.ii, []).append((node.id, i))
    total_cycles = max(fire_at) + 1

    produced: dict[tuple[int, int], int] = {}
    out_streams: dict[int, list[int]] = {sid: [] for sid in g.output_streams()}
    in_edges = {n.id: g.in_edges(n.id) for n in g.nodes}

    def read(src: int, j: int) -> int:
        key = (src, j)
        if key not in produced:
            raise IntegrityError(f"instance ({src}, {j}) read before it was produced")
        return produced[key]

    activity = []
    for cycle in range(total_cycles):
        grid = [[None] * a.cols for _ in range(a.rows)]
        for node_id, i in sorted(fire_at.get(cycle, ())):
            node = g.node(node_id)
            args = _operand_value(g, read, node_id, i, in_edges[node_id])
            if node.op == "input":
                result = wrap32(input_streams[node.stream][i])
            elif node.op == "const":
                result = node.immediate
            elif node.op == "output":
                out_streams[node.stream].append(args[0])
                result = None
            else:
                result = apply_op(node.op, args[0], args[1])
            if result is not None:
                produced[(node_id, i)] = result
            r, c = a.coords(m.assignment[node_id].pe)
            if grid[r][c] is not None:
                raise IntegrityError(f"PE ({r},{c}) double-booked at cycle {cycle}")
            grid[r][c] = node_id
        activity.append(tuple(tuple(row) for row in grid))

    return SimTrace(outputs={sid: tuple(vals) for sid, vals in out_streams.items()},
                    cycles=total_cycles,
                    activity=tuple(activity))


def format_trace(trace: SimTrace, a: CgraArchitecture) -> str:
    """Textual activity dump: one PE grid block per cycle, earliest first."""
    lines = [f"trace: one {a.rows}x{a.cols} PE grid per cycle, cycle 0 first; "
             "cell = firing node id or '.'"]
    width = max((len(str(n)) for grid in trace.activity for row in grid
                 for n in row if n is not None), default=1)
    for cycle, grid in enumerate(trace.activity):
        lines.append(f"cycle {cycle}")
        for row in grid:
            lines.append(" ".join("." .rjust(width) if n is None else str(n).rjust(width)
                                  for n in row))
    return "\n".join(lines) + "\n"


def interpret(g: DataFlowGraph, iterations: int,
              input_streams: dict[int, list[int]]) -> dict[int, tuple[int, ...]]:
    """Reference executor: run the graph iteration by iteration, no schedule.

    Keeps a rotating window of each node's last max-distance+1 values so
    loop-carried reads stay O(1) in memory.
    """
    if iterations < 1:
        raise ValueError("iterations must be positive")
    _check_streams(g, input_streams, iterations)
    order = topological_order(g)
    window = g.max_distance() + 1
    history: dict[int, list[int | None]] = {n.id: [None] * window for n in g.nodes}
    in_edges = {n.id: g.in_edges(n.id) for n in g.nodes}
    outputs: dict[int, list[int]] = {sid: [] for sid in g.output_streams()}

    def read(src: int, j: int) -> int:
        val = history[src][j % window]
        assert val is not None
        return val

    for i in range(iterations):
        for node_id in order:
            node = g.node(node_id)
            args = _operand_value(g, read, node_id, i, in_edges[node_id])
            if node.op == "input":
                value = wrap32(input_streams[node.stream][i])
            elif node.op == "const":
                value = node.immediate
            elif node.op == "output":
                outputs[node.stream].append(args[0])
                continue
            else:
                value = apply_op(node.op, args[0], args[1])
            history[node_id][i % window] = value
    return {sid: tuple(vals) for sid, vals in outputs.items()}


# -- exhaustive minimum-II search ---------------------------------------------

ORACLE_NODE_CAP = 8


def _feasible_assignment(g: DataFlowGraph, a: CgraArchitecture, kms,
                         start_pes: list[int]) -> dict[int, Placement] | None:
    """Depth-first search over placements under the same rules as the checker."""
    ii = kms.ii
    try:
        order = topological_order(g)
    except ValueError:
        order = [n.id for n in g.nodes]
    edges_by_node: dict[int, list] = {n.id: [] for n in g.nodes}
    for e in g.edges:
        edges_by_node[e.src].append(e)
        edges_by_node[e.dst].append(e)

    chosen: dict[int, Placement] = {}
    used_cells: set[tuple[int, int]] = set()

    def ok_with(node_id: int, p: Placement) -> bool:
        t_new = p.label * ii + p.slot
        for e in edges_by_node[node_id]:
            other = e.dst if e.src == node_id else e.src
            if other == node_id:
                q = p
            elif other in chosen:
                q = chosen[other]
            else:
                continue
            if e.src == node_id:
                pu, pv, tu = p, q, t_new
                tv = q.label * ii + q.slot
            else:
                pu, pv, tv = q, p, t_new
                tu = q.label * ii + q.slot
            if pv.pe not in closed_neighborhood(a, pu.pe):
                return False
            if tv + e.distance * ii <= tu:
                return False
        return True

    def place(depth: int) -> bool:
        if depth == len(order):
            return True
        node_id = order[depth]
        pes = start_pes if depth == 0 else range(a.pe_count)
        for slot, label in kms.candidates[node_id]:
            for pe in pes:
                if (pe, slot) in used_cells:
                    continue
                p = Placement(pe=pe, slot=slot, label=label)
                if not ok_with(node_id, p):
                    continue
                chosen[node_id] = p
                used_cells.add((pe, slot))
                if place(depth + 1):
                    return True
                del chosen[node_id]
                used_cells.discard((pe, slot))
        return False

    return dict(chosen) if place(0) else None


def brute_force_min_ii(g: DataFlowGraph, a: CgraArchitecture, ii_max: int = 50,
                       node_cap: int = ORACLE_NODE_CAP,
                       extra_slack=None) -> tuple[int, Mapping] | None:
    """Exhaustively find the smallest feasible II and one witness mapping.

    Searches the same candidate space as the encoder (same slack policy,
    same placement rules), so its answer is the ground truth the solver
    pipeline is measured against.  Capped at ``node_cap`` nodes; the
    search prunes by fixing the first node's PE to one representative per
    grid-symmetry orbit, which cannot change feasibility.
    """
    if len(g.nodes) > node_cap:
        raise OracleCapError(f"{len(g.nodes)} nodes exceed the oracle cap of {node_cap}")
    if not g.nodes:
        raise ValueError("empty graph")
    slack_of = (lambda ii: ii - 1) if extra_slack is None else (
        extra_slack if callable(extra_slack) else (lambda ii: extra_slack))
    start = compute_mii(g, a).m_ii
    reps = list(symmetry_orbit_representatives(a))
    for ii in range(start, ii_max + 1):
        ms = build_mobility(g, slack_of(ii))
        kms = build_kms(ms, ii)
        found = _feasible_assignment(g, a, kms, reps)
        if found is not None:
            mapping = make_mapping(g, a, ii, found)
            bad = check_mapping(g, a, mapping)
            if bad:
                raise IntegrityError(f"oracle produced an invalid mapping: {bad[0].message}")
            return ii, mapping
    return None
