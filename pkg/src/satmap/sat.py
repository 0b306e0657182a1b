"""CDCL satisfiability solver plus an adapter for external DIMACS solvers.

The embedded solver is a classic conflict-driven clause learner: two
watched literals per clause, first-UIP conflict analysis, activity-driven
branching with multiplicative decay, saved-phase decisions, and Luby
restarts.  It is deterministic unless a seed is supplied, in which case a
small fraction of decisions pick a random variable.  Every satisfying
assignment is re-checked against the original clauses before it is
returned, so a solver bug surfaces as an integrity error rather than a
wrong mapping.
"""

from __future__ import annotations

import heapq
import random
import shlex
import subprocess
import time
from dataclasses import dataclass, field
from pathlib import Path

from .encoder import CnfFormula, parse_dimacs
from .errors import IntegrityError

VAR_DECAY = 0.95
RESTART_BASE = 64
RANDOM_DECISION_FREQ = 0.02
_DEADLINE_STRIDE = 2048


@dataclass
class SolveStats:
    decisions: int = 0
    conflicts: int = 0
    propagations: int = 0
    restarts: int = 0
    learned: int = 0
    wall_seconds: float = 0.0


@dataclass
class SolveOutcome:
    """Result of a solve call.

    status is "sat", "unsat", or "timeout".  For "sat", model[v] is the
    value of variable v (index 0 is unused padding).
    """

    status: str
    model: list[bool] | None = None
    stats: SolveStats = field(default_factory=SolveStats)


def _luby(x: int) -> int:
    """Luby restart sequence, 0-based: 1 1 2 1 1 2 4 1 1 2 1 1 2 4 8 ..."""
    size, seq = 1, 0
    while size < x + 1:
        seq += 1
        size = 2 * size + 1
    while size - 1 != x:
        size = (size - 1) >> 1
        seq -= 1
        x %= size
    return 1 << seq


class _Cdcl:
    def __init__(self, var_count: int, clauses: list[list[int]],
                 seed: int | None, deadline: float | None):
        self.n = var_count
        self.deadline = deadline
        self.rng = random.Random(seed) if seed is not None else None
        self.stats = SolveStats()
        self.assigns = [0] * (var_count + 1)   # 0 free, 1 true, -1 false
        self.level = [0] * (var_count + 1)
        self.reason: list[list[int] | None] = [None] * (var_count + 1)
        self.polarity = [False] * (var_count + 1)
        self.activity = [0.0] * (var_count + 1)
        self.var_inc = 1.0
        self.order: list[tuple[float, int]] = [(0.0, v) for v in range(1, var_count + 1)]
        self.watches: list[list[list[int]]] = [[] for _ in range(2 * var_count + 2)]
        self.trail: list[int] = []
        self.trail_lim: list[int] = []
        self.qhead = 0
        self.props_since_check = 0
        self.ok = True
        for clause in clauses:
            if not self._add_clause(clause):
                self.ok = False
                return

    # -- literal plumbing ------------------------------------------------

    @staticmethod
    def _widx(lit: int) -> int:
        return 2 * lit if lit > 0 else -2 * lit + 1

    def _value(self, lit: int) -> int:
        v = self.assigns[abs(lit)]
        if v == 0:
            return 0
        return v if lit > 0 else -v

    def _decision_level(self) -> int:
        return len(self.trail_lim)

    def _enqueue(self, lit: int, reason: list[int] | None) -> bool:
        val = self._value(lit)
        if val != 0:
            return val > 0
        v = abs(lit)
        self.assigns[v] = 1 if lit > 0 else -1
        self.level[v] = self._decision_level()
        self.reason[v] = reason
        self.trail.append(lit)
        return True

    def _add_clause(self, lits: list[int]) -> bool:
        """Install an input clause at level 0; False means immediate conflict."""
        out: list[int] = []
        seen: set[int] = set()
        for lit in sorted(lits, key=abs):
            if -lit in seen:
                return True             # tautology, never falsifiable
            if lit not in seen:
                seen.add(lit)
                out.append(lit)
        if len(out) == 1:
            return self._enqueue(out[0], None)
        self.watches[self._widx(out[0])].append(out)
        self.watches[self._widx(out[1])].append(out)
        return True

    # -- propagation -----------------------------------------------------

    def _propagate(self) -> list[int] | None:
        while self.qhead < len(self.trail):
            lit = self.trail[self.qhead]
            self.qhead += 1
            self.stats.propagations += 1
            self.props_since_check += 1
            if self.props_since_check >= _DEADLINE_STRIDE:
                self.props_since_check = 0
                if self._out_of_time():
                    return None
            fal = -lit
            watchers = self.watches[self._widx(fal)]
            i = j = 0
            while i < len(watchers):
                c = watchers[i]
                i += 1
                if c[0] == fal:
                    c[0], c[1] = c[1], c[0]
                if self._value(c[0]) > 0:
                    watchers[j] = c
                    j += 1
                    continue
                moved = False
                for k in range(2, len(c)):
                    if self._value(c[k]) >= 0:
                        c[1], c[k] = c[k], c[1]
                        self.watches[self._widx(c[1])].append(c)
                        moved = True
                        break
                if moved:
                    continue
                watchers[j] = c
                j += 1
                if not self._enqueue(c[0], c):
                    while i < len(watchers):
                        watchers[j] = watchers[i]
                        i += 1
                        j += 1
                    del watchers[j:]
                    self.qhead = len(self.trail)
                    return c
            del watchers[j:]
        return None

    # -- branching heuristics ---------------------------------------------

    def _bump(self, v: int):
        self.activity[v] += self.var_inc
        if self.activity[v] > 1e100:
            for u in range(1, self.n + 1):
                self.activity[u] *= 1e-100
            self.var_inc *= 1e-100
        heapq.heappush(self.order, (-self.activity[v], v))

    def _pick_var(self) -> int | None:
        if self.rng is not None and self.rng.random() < RANDOM_DECISION_FREQ:
            v = self.rng.randint(1, self.n)
            if self.assigns[v] == 0:
                return v
        while self.order:
            _, v = heapq.heappop(self.order)
            if self.assigns[v] == 0:
                return v
        for v in range(1, self.n + 1):
            if self.assigns[v] == 0:
                return v
        return None

    # -- conflict analysis -------------------------------------------------

    def _analyze(self, confl: list[int]) -> tuple[list[int], int]:
        cur = self._decision_level()
        learnt = [0]
        seen = bytearray(self.n + 1)
        counter = 0
        p: int | None = None
        idx = len(self.trail) - 1
        c = confl
        while True:
            for q in (c if p is None else c[1:]):
                v = abs(q)
                if not seen[v] and self.level[v] > 0:
                    seen[v] = 1
                    self._bump(v)
                    if self.level[v] >= cur:
                        counter += 1
                    else:
                        learnt.append(q)
            while not seen[abs(self.trail[idx])]:
                idx -= 1
            p = self.trail[idx]
            idx -= 1
            seen[abs(p)] = 0
            counter -= 1
            if counter == 0:
                break
            c = self.reason[abs(p)]
        learnt[0] = -p
        if len(learnt) == 1:
            return learnt, 0
        hi = max(range(1, len(learnt)), key=lambda i: self.level[abs(learnt[i])])
        learnt[1], learnt[hi] = learnt[hi], learnt[1]
        return learnt, self.level[abs(learnt[1])]

    def _cancel_until(self, target: int):
        if self._decision_level() <= target:
            return
        limit = self.trail_lim[target]
        for lit in reversed(self.trail[limit:]):
            v = abs(lit)
            self.polarity[v] = lit > 0
            self.assigns[v] = 0
            self.reason[v] = None
            heapq.heappush(self.order, (-self.activity[v], v))
        del self.trail[limit:]
        del self.trail_lim[target:]
        self.qhead = len(self.trail)

    def _attach_learnt(self, learnt: list[int]):
        self.stats.learned += 1
        if len(learnt) == 1:
            self._enqueue(learnt[0], None)
            return
        self.watches[self._widx(learnt[0])].append(learnt)
        self.watches[self._widx(learnt[1])].append(learnt)
        self._enqueue(learnt[0], learnt)

    # -- top level ----------------------------------------------------------

    def _out_of_time(self) -> bool:
        return self.deadline is not None and time.monotonic() > self.deadline

    def search(self) -> tuple[str, list[bool] | None]:
        if not self.ok:
            return "unsat", None
        restart_idx = 0
        budget = RESTART_BASE * _luby(0)
        since_restart = 0
        while True:
            if self._out_of_time():
                return "timeout", None
            confl = self._propagate()
            if confl is not None:
                self.stats.conflicts += 1
                if self._decision_level() == 0:
                    return "unsat", None
                learnt, back = self._analyze(confl)
                self._cancel_until(back)
                self._attach_learnt(learnt)
                self.var_inc /= VAR_DECAY
                since_restart += 1
                if since_restart >= budget:
                    since_restart = 0
                    restart_idx += 1
                    budget = RESTART_BASE * _luby(restart_idx)
                    self.stats.restarts += 1
                    self._cancel_until(0)
                continue
            if self._out_of_time():
                return "timeout", None
            v = self._pick_var()
            if v is None:
                model = [False] + [self.assigns[u] > 0 for u in range(1, self.n + 1)]
                return "sat", model
            self.stats.decisions += 1
            self.trail_lim.append(len(self.trail))
            self._enqueue(v if self.polarity[v] else -v, None)


def verify_model(formula: CnfFormula, model: list[bool]):
    """Check every clause has a satisfied literal; raise IntegrityError otherwise."""
    if len(model) != formula.var_count + 1:
        raise IntegrityError(f"model covers {len(model) - 1} variables, formula has {formula.var_count}")
    for clause in formula.clauses:
        if not any((lit > 0) == model[abs(lit)] for lit in clause):
            raise IntegrityError(f"model leaves a clause unsatisfied: {clause}")


def solve(formula: CnfFormula, deadline: float | None = None,
          seed: int | None = None) -> SolveOutcome:
    """Solve a CNF formula with the embedded CDCL engine.

    ``deadline`` is a time.monotonic() instant; past it the solver gives
    up with status "timeout".  Runs are deterministic for a fixed formula
    unless ``seed`` enables randomized decision sprinkling.
    """
    start = time.monotonic()
    engine = _Cdcl(formula.var_count, formula.clauses, seed=seed, deadline=deadline)
    status, model = engine.search()
    engine.stats.wall_seconds = time.monotonic() - start
    if status == "sat":
        assert model is not None
        verify_model(formula, model)
    return SolveOutcome(status=status, model=model, stats=engine.stats)


def blocking_clause(formula: CnfFormula, model: list[bool]) -> list[int]:
    """Clause forbidding the model's placement choices.

    Only placement variables are negated; auxiliary encoding variables are
    left free so the block excludes exactly one mapping, not one internal
    assignment.
    """
    clause = [-v for v in range(1, formula.mapping_var_count + 1) if model[v]]
    if not clause:
        raise IntegrityError("model sets no placement variable, nothing to block")
    return clause


def solve_external(dimacs_path: str | Path, command: str,
                   deadline: float | None = None) -> SolveOutcome:
    """Run an external DIMACS solver and re-verify whatever it claims.

    ``command`` is a shell-style template; every "{cnf}" is replaced by
    the DIMACS path (the path is appended when the placeholder is
    absent).  Output must carry an "s SATISFIABLE"/"s UNSATISFIABLE"
    status line, with "v " model lines for the satisfiable case.  A
    reported model is checked against the formula parsed back from the
    file, so a lying or garbled solver raises IntegrityError instead of
    corrupting a mapping.
    """
    argv = shlex.split(command)
    if not argv:
        raise IntegrityError("external solver command is empty")
    if any("{cnf}" in part for part in argv):
        argv = [part.replace("{cnf}", str(dimacs_path)) for part in argv]
    else:
        argv.append(str(dimacs_path))
    budget = None if deadline is None else max(0.01, deadline - time.monotonic())
    start = time.monotonic()
    try:
        proc = subprocess.run(argv, capture_output=True, text=True, timeout=budget)
    except subprocess.TimeoutExpired:
        return SolveOutcome(status="timeout", model=None,
                            stats=SolveStats(wall_seconds=time.monotonic() - start))
    except OSError as exc:
        raise IntegrityError(f"external solver failed to launch: {exc}") from exc
    stats = SolveStats(wall_seconds=time.monotonic() - start)
    status: str | None = None
    raw_lits: list[int] = []
    for line in proc.stdout.splitlines():
        if line.startswith("s "):
            word = line.split(None, 1)[1].strip()
            status = {"SATISFIABLE": "sat", "UNSATISFIABLE": "unsat"}.get(word, "timeout")
        elif line.startswith("v "):
            try:
                raw_lits.extend(int(tok) for tok in line.split()[1:])
            except ValueError as exc:
                raise IntegrityError(f"external solver wrote a malformed model line: {line!r}") from exc
    if status is None:
        raise IntegrityError(f"external solver wrote no status line (exit code {proc.returncode})")
    if status != "sat":
        return SolveOutcome(status=status, model=None, stats=stats)
    formula = parse_dimacs(Path(dimacs_path).read_text(encoding="ascii"))
    model = [False] * (formula.var_count + 1)
    for lit in raw_lits:
        if lit == 0:
            continue
        if abs(lit) > formula.var_count:
            raise IntegrityError(f"external model names unknown variable {abs(lit)}")
        model[abs(lit)] = lit > 0
    verify_model(formula, model)
    return SolveOutcome(status="sat", model=model, stats=stats)
