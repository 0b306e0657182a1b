"""Translate (DFG, architecture, kernel schedule) into a CNF placement formula.

One Boolean variable per legal placement: node n on PE p at kernel slot s
with iteration label l.  Three clause families constrain a model to be a
valid space-time mapping:

* exactly-one      -- each node takes exactly one placement;
* PE exclusivity   -- a PE issues at most one kernel instruction per slot,
                      whatever the labels (the steady-state kernel repeats
                      every II cycles, so two instructions at the same slot
                      would contend every repetition);
* neighbor routing -- per edge, a consumer must sit on its producer's PE
                      or a neighbor of it, and must fire strictly later
                      in absolute time, where absolute time is
                      label * II + slot and a distance-d edge grants d
                      extra kernel periods.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import BinaryIO

from .arch import CgraArchitecture, closed_neighborhood
from .dfg import DataFlowGraph
from .errors import DeadlineExceeded, FormatError
from .schedule import KernelMobilitySchedule


@dataclass(frozen=True)
class VarKey:
    """Placement literal identity: node, PE, kernel slot, iteration label."""

    node: int
    pe: int
    slot: int
    label: int


@dataclass
class CnfFormula:
    """A CNF instance: clauses over variables 1..var_count.

    Positive literal v asserts variable v, negative -v negates it.
    ``var_keys[i]`` is the placement meaning of variable i+1; it is empty
    for formulas that are not placement encodings (hand-built tests,
    parsed DIMACS).  Auxiliary variables introduced by structured
    at-most-one encodings have no key and are excluded from decoding.
    """

    var_count: int
    clauses: list[list[int]] = field(default_factory=list)
    var_keys: tuple[VarKey, ...] = ()

    def __post_init__(self):
        self._index: dict[VarKey, int] = {k: i + 1 for i, k in enumerate(self.var_keys)}
        self.validate()

    def validate(self):
        if self.var_count < 0:
            raise FormatError("var_count must be non-negative")
        if len(self.var_keys) > self.var_count:
            raise FormatError("more variable keys than variables")
        for clause in self.clauses:
            if not clause:
                raise FormatError("empty clause at construction")
            for lit in clause:
                if lit == 0 or abs(lit) > self.var_count:
                    raise FormatError(f"clause literal {lit} out of range (var_count={self.var_count})")

    def key_of(self, index: int) -> VarKey:
        return self.var_keys[index - 1]

    def index_of(self, key: VarKey) -> int:
        return self._index[key]

    @property
    def mapping_var_count(self) -> int:
        return len(self.var_keys)


@dataclass
class _Shell:
    """Mutable encoder state; frozen into a CnfFormula by encode_all."""

    g: DataFlowGraph
    arch: CgraArchitecture
    kms: KernelMobilitySchedule
    keys: list[VarKey] = field(default_factory=list)
    clauses: list[list[int]] = field(default_factory=list)
    node_vars: dict[int, list[int]] = field(default_factory=dict)
    aux_count: int = 0
    deadline: float | None = None

    def new_aux(self) -> int:
        self.aux_count += 1
        return len(self.keys) + self.aux_count

    def check_deadline(self):
        if self.deadline is not None and time.monotonic() > self.deadline:
            raise DeadlineExceeded("encoding ran past its wall-clock budget")


def enumerate_variables(g: DataFlowGraph, arch: CgraArchitecture,
                        kms: KernelMobilitySchedule, deadline: float | None = None) -> _Shell:
    """Assign variable indices: node-major, then (label, slot), then PE.

    Every node must have at least one kernel candidate; an empty candidate
    set would make the formula trivially unsatisfiable in a confusing way,
    so it is rejected outright.
    """
    if set(kms.candidates) != {n.id for n in g.nodes}:
        raise ValueError("kernel schedule and DFG disagree on the node set")
    shell = _Shell(g=g, arch=arch, kms=kms, deadline=deadline)
    for node in g.nodes:
        pairs = kms.candidates[node.id]
        if not pairs:
            raise ValueError(f"node {node.id} has no kernel placement candidates")
        indices = []
        for slot, label in sorted(pairs, key=lambda sl: (sl[1], sl[0])):
            for pe in range(arch.pe_count):
                shell.keys.append(VarKey(node=node.id, pe=pe, slot=slot, label=label))
                indices.append(len(shell.keys))
        shell.node_vars[node.id] = indices
    return shell


def _at_most_one(shell: _Shell, literals: list[int], mode: str, threshold: int):
    """Append an at-most-one constraint over ``literals``.

    Pairwise by default; the sequential (order-chain) encoding with
    auxiliary variables takes over only in "sequential" mode and only for
    sets larger than ``threshold`` literals.
    """
    k = len(literals)
    if k < 2:
        return
    if mode == "sequential" and k > threshold:
        # Chain s_i == "some literal at or before position i is true".
        chain = [shell.new_aux() for _ in range(k - 1)]
        shell.clauses.append([-literals[0], chain[0]])
        for i in range(1, k - 1):
            shell.clauses.append([-literals[i], chain[i]])
            shell.clauses.append([-chain[i - 1], chain[i]])
            shell.clauses.append([-literals[i], -chain[i - 1]])
        shell.clauses.append([-literals[k - 1], -chain[k - 2]])
        return
    for i in range(k):
        for j in range(i + 1, k):
            shell.clauses.append([-literals[i], -literals[j]])


def encode_c1(shell: _Shell, mode: str = "pairwise", threshold: int = 16):
    """Exactly-one placement per node: one all-literals clause plus at-most-one."""
    for node in shell.g.nodes:
        shell.check_deadline()
        literals = shell.node_vars[node.id]
        shell.clauses.append(list(literals))
        _at_most_one(shell, literals, mode, threshold)


def encode_c2(shell: _Shell, mode: str = "pairwise", threshold: int = 16):
    """PE exclusivity: distinct nodes may not share (PE, slot), labels notwithstanding."""
    by_cell: dict[tuple[int, int], list[int]] = {}
    for idx, key in enumerate(shell.keys, start=1):
        by_cell.setdefault((key.pe, key.slot), []).append(idx)
    for cell in sorted(by_cell):
        shell.check_deadline()
        literals = by_cell[cell]
        if mode == "sequential" and len(literals) > threshold:
            # The chain encoding forbids same-node label pairs too, which
            # C1 already excludes, so it stays sound; it is only used when
            # the caller asked for compact encodings.
            _at_most_one(shell, literals, mode, threshold)
            continue
        for i in range(len(literals)):
            for j in range(i + 1, len(literals)):
                a, b = literals[i], literals[j]
                if shell.keys[a - 1].node != shell.keys[b - 1].node:
                    shell.clauses.append([-a, -b])


def encode_c3(shell: _Shell):
    """Neighbor routing: forbid placements that break adjacency or ordering.

    For every edge (u, v, d) and every producer/consumer placement pair,
    emit a conflict when the consumer's PE is outside the producer's
    closed neighborhood, or when absolute times violate
    t_v + d * II > t_u (unit latency).  Clauses are normalized to
    ascending variable order and deduplicated within this family.
    """
    ii = shell.kms.ii
    nbhd = {p: closed_neighborhood(shell.arch, p) for p in range(shell.arch.pe_count)}
    keys = shell.keys
    seen: set[tuple[int, int]] = set()
    for e in shell.g.edges:
        shell.check_deadline()
        slack = e.distance * ii
        for xu in shell.node_vars[e.src]:
            ku = keys[xu - 1]
            tu = ku.label * ii + ku.slot
            allowed = nbhd[ku.pe]
            for xv in shell.node_vars[e.dst]:
                kv = keys[xv - 1]
                if kv.pe in allowed and kv.label * ii + kv.slot + slack > tu:
                    continue
                pair = (xu, xv) if xu <= xv else (xv, xu)
                if pair in seen:
                    continue
                seen.add(pair)
                shell.clauses.append([-pair[0]] if xu == xv else [-pair[0], -pair[1]])


def encode_all(g: DataFlowGraph, arch: CgraArchitecture, kms: KernelMobilitySchedule,
               amo_mode: str = "pairwise", amo_threshold: int = 16,
               deadline: float | None = None) -> CnfFormula:
    """Build the full placement formula: variables, then C1, C2, C3 in order."""
    if amo_mode not in ("pairwise", "sequential"):
        raise ValueError(f"unknown at-most-one mode {amo_mode!r}")
    shell = enumerate_variables(g, arch, kms, deadline=deadline)
    encode_c1(shell, amo_mode, amo_threshold)
    encode_c2(shell, amo_mode, amo_threshold)
    encode_c3(shell)
    return CnfFormula(var_count=len(shell.keys) + shell.aux_count,
                      clauses=shell.clauses,
                      var_keys=tuple(shell.keys))


def emit_dimacs(f: CnfFormula, sink: BinaryIO):
    """Write standard DIMACS CNF; byte-identical for identical formulas.

    A comment block maps placement variables to their meaning when the
    formula carries a variable table.
    """
    lines = []
    for i, key in enumerate(f.var_keys, start=1):
        lines.append(f"c var {i} = n{key.node} p{key.pe} s{key.slot} l{key.label}")
    lines.append(f"p cnf {f.var_count} {len(f.clauses)}")
    for clause in f.clauses:
        lines.append(" ".join(str(lit) for lit in clause) + " 0")
    sink.write(("\n".join(lines) + "\n").encode("ascii"))


def dimacs_text(f: CnfFormula) -> str:
    import io

    buf = io.BytesIO()
    emit_dimacs(f, buf)
    return buf.getvalue().decode("ascii")


def parse_dimacs(text: str) -> CnfFormula:
    """Parse DIMACS CNF (comments ignored, clauses may span lines)."""
    header: tuple[int, int] | None = None
    clauses: list[list[int]] = []
    pending: list[int] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("c"):
            continue
        if line.startswith("p"):
            parts = line.split()
            try:
                if len(parts) != 4 or parts[1] != "cnf":
                    raise ValueError
                header = (int(parts[2]), int(parts[3]))
            except ValueError:
                raise FormatError("malformed DIMACS header", lineno) from None
            continue
        if header is None:
            raise FormatError("clause before DIMACS header", lineno)
        try:
            for lit in (int(tok) for tok in line.split()):
                if lit == 0:
                    clauses.append(pending)
                    pending = []
                else:
                    pending.append(lit)
        except ValueError as exc:
            raise FormatError(f"bad DIMACS literal: {exc}", lineno) from exc
    if header is None:
        raise FormatError("missing DIMACS header")
    if pending:
        raise FormatError("last clause is not 0-terminated")
    var_count, clause_count = header
    if len(clauses) != clause_count:
        raise FormatError(f"header promises {clause_count} clauses, found {len(clauses)}")
    return CnfFormula(var_count=var_count, clauses=clauses)
