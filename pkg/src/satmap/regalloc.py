"""Register-pressure validation of a decoded modulo schedule.

The placement formula is register agnostic, so an accepted model still
needs its register demand checked.  Each produced value lives in its
producer PE's register file from the cycle it is written (birth) to its
last read (death); consumers on neighboring PEs read it in place at no
local cost.  Because the kernel repeats every II cycles, a value whose
span exceeds II coexists with copies of itself from neighboring
iterations, so per-slot pressure counts live iteration instances rather
than distinct values.  Failure is reported, never repaired; raising II is
the caller's move.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

from .arch import CgraArchitecture
from .dfg import DataFlowGraph
from .errors import IntegrityError

if TYPE_CHECKING:
    from .verify import Mapping


@dataclass(frozen=True)
class ValueLifetime:
    """Lifetime of one node's value in absolute schedule time."""

    producer: int
    pe: int
    birth: int
    death: int

    @property
    def span(self) -> int:
        return self.death - self.birth


@dataclass(frozen=True)
class PressureViolation:
    pe: int
    slot: int
    pressure: int
    capacity: int


@dataclass(frozen=True)
class PressureReport:
    """Per-(PE, slot) live-value counts against register capacity."""

    per_slot_pressure: tuple[tuple[int, ...], ...]   # [pe][slot]
    violations: tuple[PressureViolation, ...]
    capacity: int

    @property
    def ok(self) -> bool:
        return not self.violations

    @property
    def max_pressure(self) -> int:
        return max((p for row in self.per_slot_pressure for p in row), default=0)


def compute_lifetimes(g: DataFlowGraph, m: Mapping) -> list[ValueLifetime]:
    """One lifetime per node with at least one consumer.

    birth is the producer's absolute time label * ii + slot; death is the
    latest consumption time, where a distance-d consumer at absolute time
    t reads the value at t + d * ii in producer-iteration coordinates.
    Nodes nothing consumes hold no register and are omitted.
    """
    ii = m.ii
    times: dict[int, int] = {}
    for node in g.nodes:
        placed = m.assignment.get(node.id)
        if placed is None:
            raise IntegrityError(f"mapping has no placement for node {node.id}")
        times[node.id] = placed.label * ii + placed.slot
    lifetimes = []
    for node in g.nodes:
        outs = g.out_edges(node.id)
        if not outs:
            continue
        birth = times[node.id]
        death = max(times[e.dst] + e.distance * ii for e in outs)
        lifetimes.append(ValueLifetime(producer=node.id, pe=m.assignment[node.id].pe,
                                       birth=birth, death=death))
    return lifetimes


def _instances_live_at(lifetime: ValueLifetime, slot: int, ii: int) -> int:
    """How many iteration instances of this value are live at a kernel slot.

    Instance k of the value occupies absolute cycles
    [birth + k*ii, death + k*ii); in steady state the count of instances
    covering a cycle congruent to ``slot`` collapses to a closed form over
    the offset r = (slot - birth) mod ii.
    """
    span = lifetime.span
    r = (slot - lifetime.birth) % ii
    if span <= r:
        return 0
    return (span - 1 - r) // ii + 1


def check_register_pressure(lifetimes: list[ValueLifetime], a: CgraArchitecture,
                            ii: int) -> PressureReport:
    """MaxLive check: flag every (PE, slot) whose pressure exceeds capacity."""
    if ii < 1:
        raise ValueError(f"ii must be positive, got {ii}")
    table = [[0] * ii for _ in range(a.pe_count)]
    for lt in lifetimes:
        row = table[lt.pe]
        for slot in range(ii):
            row[slot] += _instances_live_at(lt, slot, ii)
    violations = tuple(PressureViolation(pe, slot, table[pe][slot], a.registers_per_pe)
                       for pe in range(a.pe_count)
                       for slot in range(ii)
                       if table[pe][slot] > a.registers_per_pe)
    return PressureReport(per_slot_pressure=tuple(tuple(row) for row in table),
                          violations=violations,
                          capacity=a.registers_per_pe)


def register_report_document(report: PressureReport) -> dict:
    """JSON-ready form, stored under "register_report" in mapping documents."""
    return {
        "ok": report.ok,
        "capacity": report.capacity,
        "max_pressure": report.max_pressure,
        "per_slot_pressure": [list(row) for row in report.per_slot_pressure],
        "violations": [
            {"pe": v.pe, "slot": v.slot, "pressure": v.pressure, "capacity": v.capacity}
            for v in report.violations
        ],
    }
