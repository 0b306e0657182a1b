"""ASAP/ALAP schedules, mobility windows, the folded kernel schedule, and II bounds.

Times are whole cycles with unit operation latency.  Only distance-0 edges
constrain ASAP/ALAP (they are what makes the precedence graph acyclic);
loop-carried timing is enforced later, relative to a concrete II.

For a candidate II the mobility window of each node is folded modulo II:
a candidate time t becomes the pair (slot, label) = (t mod II, t div II),
i.e. a position inside the repeating kernel plus the count of folds needed
to reach it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .arch import CgraArchitecture
from .dfg import DataFlowGraph, topological_order


@dataclass(frozen=True)
class MobilitySchedule:
    """Per-node inclusive legal-time interval [asap, alap] within horizon cycles 0..horizon-1."""

    horizon: int
    windows: dict[int, tuple[int, int]]

    def window(self, node_id: int) -> tuple[int, int]:
        return self.windows[node_id]


@dataclass(frozen=True)
class KernelMobilitySchedule:
    """Mobility schedule folded modulo ``ii``.

    ``candidates[n]`` holds every (slot, iteration label) pair reachable by
    folding n's window, ordered by (label, slot).  ``max_label`` is the
    number of folds minus one.
    """

    ii: int
    candidates: dict[int, tuple[tuple[int, int], ...]]
    max_label: int


@dataclass(frozen=True)
class IiBounds:
    res_ii: int
    rec_ii: int
    m_ii: int


def compute_asap(g: DataFlowGraph) -> dict[int, int]:
    """Earliest start per node: 0 at sources, else 1 + max over distance-0 predecessors."""
    order = topological_order(g)
    preds: dict[int, list[int]] = {n.id: [] for n in g.nodes}
    for e in g.zero_distance_edges():
        preds[e.dst].append(e.src)
    asap: dict[int, int] = {}
    for v in order:
        asap[v] = 1 + max((asap[u] for u in preds[v]), default=-1)
    return asap


def critical_path_length(g: DataFlowGraph) -> int:
    """Cycles needed to run one iteration with unlimited resources (0 for an empty graph)."""
    if g.node_count == 0:
        return 0
    return 1 + max(compute_asap(g).values())


def compute_alap(g: DataFlowGraph, horizon: int) -> dict[int, int]:
    """Latest start per node: horizon-1 at sinks, else min over distance-0 successors - 1.

    Raises ValueError when the horizon is too small to fit the critical
    path (some node would get alap < asap).
    """
    order = topological_order(g)
    succs: dict[int, list[int]] = {n.id: [] for n in g.nodes}
    for e in g.zero_distance_edges():
        succs[e.src].append(e.dst)
    alap: dict[int, int] = {}
    for v in reversed(order):
        alap[v] = min((alap[w] for w in succs[v]), default=horizon) - 1
    asap = compute_asap(g)
    cramped = sorted(v for v in alap if alap[v] < asap[v])
    if cramped:
        raise ValueError(f"horizon {horizon} too small: nodes {cramped} have alap < asap")
    return alap


def build_mobility(g: DataFlowGraph, extra_slack: int = 0) -> MobilitySchedule:
    """Mobility windows over a horizon of critical path length plus ``extra_slack``."""
    if extra_slack < 0:
        raise ValueError("extra_slack must be non-negative")
    horizon = max(1, critical_path_length(g) + extra_slack)
    asap = compute_asap(g)
    alap = compute_alap(g, horizon)
    return MobilitySchedule(horizon=horizon,
                            windows={v: (asap[v], alap[v]) for v in asap})


def build_kms(ms: MobilitySchedule, ii: int) -> KernelMobilitySchedule:
    """Fold the mobility schedule modulo ``ii``.

    Candidate times map bijectively: t -> (t mod ii, t div ii), so a window
    of width w yields exactly w (slot, label) pairs.
    """
    if ii < 1:
        raise ValueError("ii must be positive")
    candidates: dict[int, tuple[tuple[int, int], ...]] = {}
    for node_id, (lo, hi) in sorted(ms.windows.items()):
        # Ascending t enumerates (label, slot) in lexicographic order already.
        candidates[node_id] = tuple((t % ii, t // ii) for t in range(lo, hi + 1))
    max_label = math.ceil(ms.horizon / ii) - 1
    return KernelMobilitySchedule(ii=ii, candidates=candidates, max_label=max_label)


def compute_res_ii(g: DataFlowGraph, a: CgraArchitecture) -> int:
    """Resource bound: ceil(node count / PE count), at least 1."""
    return max(1, math.ceil(g.node_count / a.pe_count))


def compute_rec_ii(g: DataFlowGraph) -> int:
    """Recurrence bound: max over cycles of ceil(cycle length / cycle distance).

    Computed as the smallest II for which the graph with edge weights
    (1 - II * distance) has no positive-weight cycle, searching upward from
    1 (equivalent to the explicit cycle-ratio maximum, but polynomial).
    Acyclic graphs yield 1.  Raises ValueError on a zero-distance cycle.
    """
    # A cycle in the distance-0 subgraph has positive weight at every II.
    topological_order(g)
    n = g.node_count
    if n == 0:
        return 1
    edges = [(e.src, e.dst, e.distance) for e in g.edges]
    # Elementary cycles have <= n edges and distance >= 1, so II = n always works.
    for ii in range(1, n + 1):
        if not _has_positive_cycle(n, edges, ii):
            return ii
    raise AssertionError("unreachable: II = node count admits every legal cycle")


def _has_positive_cycle(n: int, edges: list[tuple[int, int, int]], ii: int) -> bool:
    # Longest-path relaxation from an implicit source at distance 0 to all
    # nodes; a relaxation still possible after n passes proves a positive cycle.
    dist = [0] * n
    for _ in range(n):
        changed = False
        for u, v, d in edges:
            w = 1 - ii * d
            if dist[u] + w > dist[v]:
                dist[v] = dist[u] + w
                changed = True
        if not changed:
            return False
    for u, v, d in edges:
        if dist[u] + (1 - ii * d) > dist[v]:
            return True
    return False


def compute_mii(g: DataFlowGraph, a: CgraArchitecture) -> IiBounds:
    res = compute_res_ii(g, a)
    rec = compute_rec_ii(g)
    return IiBounds(res_ii=res, rec_ii=rec, m_ii=max(res, rec))


def format_kms_table(kms: KernelMobilitySchedule) -> str:
    """Debug dump: one line per node listing its (slot, label) candidates."""
    lines = [f"ii={kms.ii} max_label={kms.max_label}"]
    for node_id, pairs in sorted(kms.candidates.items()):
        cells = " ".join(f"(s{s},l{l})" for s, l in pairs)
        lines.append(f"node {node_id}: {cells}")
    return "\n".join(lines) + "\n"
