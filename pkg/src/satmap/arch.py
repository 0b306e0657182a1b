"""CGRA architecture description: PE grid, topology, and register files.

PEs are numbered row-major: pe = row * cols + col.  Every PE can execute
any operation, including loads/stores for input/output nodes; the model
has no memory-port contention.

Document format (JSON):

    {"rows": 2, "cols": 2, "topology": "mesh2d", "registers_per_pe": 4}

``topology`` defaults to "mesh2d", ``registers_per_pe`` to 4.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass

from .errors import FormatError

TOPOLOGIES = ("mesh2d", "torus2d")


@dataclass(frozen=True)
class CgraArchitecture:
    rows: int
    cols: int
    topology: str = "mesh2d"
    registers_per_pe: int = 4

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ValueError(f"grid dimensions must be positive, got {self.rows}x{self.cols}")
        if self.topology not in TOPOLOGIES:
            raise ValueError(f"unknown topology {self.topology!r}")
        if self.registers_per_pe < 1:
            raise ValueError("registers_per_pe must be positive")

    @property
    def pe_count(self) -> int:
        return self.rows * self.cols

    def coords(self, pe: int) -> tuple[int, int]:
        self._check_pe(pe)
        return divmod(pe, self.cols)

    def pe_at(self, row: int, col: int) -> int:
        return row * self.cols + col

    def _check_pe(self, pe: int):
        if not 0 <= pe < self.pe_count:
            raise ValueError(f"PE id {pe} out of range for {self.rows}x{self.cols} grid")


def neighbors(a: CgraArchitecture, pe: int) -> list[int]:
    """PEs adjacent to ``pe`` under the topology, excluding ``pe``, ascending.

    mesh2d connects N/S/E/W within grid bounds; torus2d adds row/column
    wraparound.  Wraparound neighbors that coincide (2-wide dimensions) or
    equal ``pe`` itself (1-wide dimensions) collapse away.
    """
    r, c = a.coords(pe)
    out: set[int] = set()
    for dr, dc in ((-1, 0), (1, 0), (0, -1), (0, 1)):
        nr, nc = r + dr, c + dc
        if a.topology == "torus2d":
            nr %= a.rows
            nc %= a.cols
        elif not (0 <= nr < a.rows and 0 <= nc < a.cols):
            continue
        out.add(a.pe_at(nr, nc))
    out.discard(pe)
    return sorted(out)


def closed_neighborhood(a: CgraArchitecture, pe: int) -> frozenset[int]:
    """neighbors(pe) plus pe itself: the legal consumer PEs for a producer on pe."""
    return frozenset(neighbors(a, pe)) | {pe}


def reachable_set(a: CgraArchitecture, pe: int, hops: int) -> set[int]:
    """All PEs within ``hops`` network hops of ``pe``, inclusive of ``pe``."""
    a._check_pe(pe)
    if hops < 0:
        raise ValueError("hops must be non-negative")
    seen = {pe}
    frontier = deque([(pe, 0)])
    while frontier:
        p, d = frontier.popleft()
        if d == hops:
            continue
        for q in neighbors(a, p):
            if q not in seen:
                seen.add(q)
                frontier.append((q, d + 1))
    return seen


def symmetry_orbit_representatives(a: CgraArchitecture) -> list[int]:
    """One PE per orbit of the grid's automorphism group, ascending.

    Used by exhaustive search to fix the first placed node: any placement
    maps under a grid automorphism to one whose first node sits on a
    representative.  torus2d is vertex-transitive (translations), so a
    single representative suffices; mesh2d uses the rectangle's reflection
    group (plus transposition when square).
    """
    if a.topology == "torus2d":
        return [0]
    transforms = [
        lambda r, c: (r, c),
        lambda r, c: (r, a.cols - 1 - c),
        lambda r, c: (a.rows - 1 - r, c),
        lambda r, c: (a.rows - 1 - r, a.cols - 1 - c),
    ]
    if a.rows == a.cols:
        transforms += [
            lambda r, c: (c, r),
            lambda r, c: (c, a.rows - 1 - r),
            lambda r, c: (a.cols - 1 - c, r),
            lambda r, c: (a.cols - 1 - c, a.rows - 1 - r),
        ]
    reps = []
    seen: set[int] = set()
    for pe in range(a.pe_count):
        if pe in seen:
            continue
        r, c = a.coords(pe)
        orbit = {a.pe_at(*t(r, c)) for t in transforms}
        seen |= orbit
        reps.append(min(orbit))
    return sorted(reps)


def parse_arch(text: str) -> CgraArchitecture:
    """Parse an architecture document, applying defaults and validating."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"architecture syntax error: {exc.msg}", exc.lineno, exc.colno) from exc
    if not isinstance(doc, dict):
        raise FormatError("architecture document must be a JSON object")
    unknown = set(doc) - {"rows", "cols", "topology", "registers_per_pe"}
    if unknown:
        raise FormatError(f"architecture document has unknown keys: {sorted(unknown)}")
    for key in ("rows", "cols"):
        if key not in doc:
            raise FormatError(f"architecture document is missing {key!r}")
        if not isinstance(doc[key], int) or isinstance(doc[key], bool):
            raise FormatError(f"{key!r} must be an integer")
    topology = doc.get("topology", "mesh2d")
    registers = doc.get("registers_per_pe", 4)
    if not isinstance(registers, int) or isinstance(registers, bool):
        raise FormatError("'registers_per_pe' must be an integer")
    try:
        return CgraArchitecture(rows=doc["rows"], cols=doc["cols"],
                                topology=topology, registers_per_pe=registers)
    except ValueError as exc:
        raise FormatError(str(exc)) from exc


def arch_to_document(a: CgraArchitecture) -> dict:
    return {"rows": a.rows, "cols": a.cols, "topology": a.topology,
            "registers_per_pe": a.registers_per_pe}


def load_arch(path: str) -> CgraArchitecture:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_arch(fh.read())
