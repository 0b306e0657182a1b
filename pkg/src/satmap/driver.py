"""The compile loop: try ascending IIs until a mapping survives every phase.

For each candidate II starting at the arithmetic lower bound, the driver
builds a mobility schedule, folds it into kernel candidates, encodes the
placement formula, and runs the solver.  A satisfying model is decoded
and must pass the independent rule checker (a discrepancy is a bug, not a
retry), then the register-pressure check.  Pressure failures optionally
trigger block-and-resolve retries before the II is raised.  The first II
to clear all phases is minimal by construction of the ascending scan.
"""

from __future__ import annotations

import logging
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path

from .arch import CgraArchitecture
from .dfg import DataFlowGraph
from .encoder import CnfFormula, emit_dimacs, encode_all
from .errors import DeadlineExceeded, IntegrityError
from .regalloc import PressureReport, check_register_pressure, compute_lifetimes
from .sat import SolveOutcome, blocking_clause, solve, solve_external
from .schedule import IiBounds, KernelMobilitySchedule, build_kms, build_mobility, compute_mii
from .verify import Mapping, Placement, check_mapping, make_mapping

log = logging.getLogger("satmap.driver")

DEFAULT_II_MAX = 50
DEFAULT_TIMEOUT = 4000.0


@dataclass(frozen=True)
class DriverConfig:
    """Knobs for the compile loop; defaults favor exact, reproducible runs."""

    ii_start: int | None = None           # None means start at the mII bound
    ii_max: int = DEFAULT_II_MAX
    timeout_total: float = DEFAULT_TIMEOUT
    extra_slack: int | None = None        # None means ii - 1 per candidate II
    regalloc_retries: int = 0
    solver: str = "embedded"              # "embedded" or "cmd:<template with {cnf}>"
    seed: int | None = None
    emit_cnf_dir: str | None = None
    amo_mode: str = "pairwise"
    amo_threshold: int = 16

    def __post_init__(self):
        if self.ii_start is not None and self.ii_start < 1:
            raise ValueError("ii_start must be positive")
        if self.ii_max < 1 or (self.ii_start is not None and self.ii_max < self.ii_start):
            raise ValueError("ii_max must be at least ii_start")
        if self.timeout_total <= 0:
            raise ValueError("timeout_total must be positive")
        if self.regalloc_retries < 0:
            raise ValueError("regalloc_retries must be non-negative")
        if self.extra_slack is not None and self.extra_slack < 0:
            raise ValueError("extra_slack must be non-negative")
        if self.solver != "embedded" and not self.solver.startswith("cmd:"):
            raise ValueError("solver must be 'embedded' or 'cmd:<template>'")

    def slack_for(self, ii: int) -> int:
        return ii - 1 if self.extra_slack is None else self.extra_slack


@dataclass(frozen=True)
class Attempt:
    """One solver invocation in the search: what happened at this II."""

    ii: int
    status: str                        # sat | unsat | timeout
    regalloc_ok: bool | None           # None when no model was decoded
    wall_seconds: float
    var_count: int
    clause_count: int


@dataclass(frozen=True)
class CompileResult:
    outcome: str                       # mapped | no_mapping_up_to_ii_max | timed_out
    bounds: IiBounds
    mapping: Mapping | None = None
    report: PressureReport | None = None
    attempts: tuple[Attempt, ...] = ()


def decode_mapping(f: CnfFormula, outcome: SolveOutcome, kms: KernelMobilitySchedule,
                   g: DataFlowGraph, a: CgraArchitecture) -> Mapping:
    """Read one placement per node out of a satisfying model.

    The exactly-one clauses guarantee uniqueness; anything else in the
    model is a solver or encoder defect and raises rather than guessing.
    """
    if outcome.status != "sat" or outcome.model is None:
        raise IntegrityError(f"cannot decode a model from status {outcome.status!r}")
    chosen: dict[int, Placement] = {}
    for idx in range(1, f.mapping_var_count + 1):
        if not outcome.model[idx]:
            continue
        key = f.key_of(idx)
        if key.node in chosen:
            raise IntegrityError(f"node {key.node} has multiple true placement literals")
        chosen[key.node] = Placement(pe=key.pe, slot=key.slot, label=key.label)
    for node in g.nodes:
        if node.id not in chosen:
            raise IntegrityError(f"node {node.id} has no true placement literal")
    return make_mapping(g, a, kms.ii, chosen)


def _write_cnf(f: CnfFormula, cfg: DriverConfig, ii: int, attempt: int) -> Path:
    if cfg.emit_cnf_dir is not None:
        directory = Path(cfg.emit_cnf_dir)
        directory.mkdir(parents=True, exist_ok=True)
        suffix = "" if attempt == 0 else f"_retry{attempt}"
        path = directory / f"ii_{ii}{suffix}.cnf"
    else:
        handle = tempfile.NamedTemporaryFile(mode="wb", suffix=".cnf", delete=False)
        handle.close()
        path = Path(handle.name)
    with open(path, "wb") as sink:
        emit_dimacs(f, sink)
    return path


def _solve(f: CnfFormula, cfg: DriverConfig, deadline: float, ii: int,
           attempt: int) -> SolveOutcome:
    if cfg.solver == "embedded":
        if cfg.emit_cnf_dir is not None:
            _write_cnf(f, cfg, ii, attempt)
        return solve(f, deadline=deadline, seed=cfg.seed)
    path = _write_cnf(f, cfg, ii, attempt)
    try:
        return solve_external(path, cfg.solver[len("cmd:"):], deadline=deadline)
    finally:
        if cfg.emit_cnf_dir is None:
            path.unlink(missing_ok=True)


def run_toolchain(g: DataFlowGraph, a: CgraArchitecture,
                  cfg: DriverConfig | None = None) -> CompileResult:
    """Search for the lowest-II mapping of ``g`` onto ``a`` under ``cfg``.

    The timeout budget is shared across all II attempts.  Returns a
    CompileResult; raises IntegrityError when a solver model fails the
    independent checker, since that can only mean the toolchain is wrong.
    """
    cfg = cfg or DriverConfig()
    start = time.monotonic()
    deadline = start + cfg.timeout_total
    bounds = compute_mii(g, a)
    first = max(cfg.ii_start or 1, bounds.m_ii)
    log.info("event=start nodes=%d pes=%d res_ii=%d rec_ii=%d m_ii=%d ii_max=%d",
             g.node_count, a.pe_count, bounds.res_ii, bounds.rec_ii, bounds.m_ii, cfg.ii_max)
    attempts: list[Attempt] = []

    def timed_out() -> CompileResult:
        log.info("event=stop outcome=timed_out wall=%.3f", time.monotonic() - start)
        return CompileResult(outcome="timed_out", bounds=bounds, attempts=tuple(attempts))

    for ii in range(first, cfg.ii_max + 1):
        if time.monotonic() > deadline:
            return timed_out()
        ms = build_mobility(g, cfg.slack_for(ii))
        kms = build_kms(ms, ii)
        try:
            f = encode_all(g, a, kms, amo_mode=cfg.amo_mode,
                           amo_threshold=cfg.amo_threshold, deadline=deadline)
        except DeadlineExceeded:
            return timed_out()

        for retry in range(cfg.regalloc_retries + 1):
            t0 = time.monotonic()
            outcome = _solve(f, cfg, deadline, ii, retry)
            wall = time.monotonic() - t0
            if outcome.status == "timeout":
                attempts.append(Attempt(ii, "timeout", None, wall, f.var_count, len(f.clauses)))
                return timed_out()
            if outcome.status == "unsat":
                attempts.append(Attempt(ii, "unsat", None, wall, f.var_count, len(f.clauses)))
                log.info("event=attempt ii=%d status=unsat vars=%d clauses=%d wall=%.3f",
                         ii, f.var_count, len(f.clauses), wall)
                break
            mapping = decode_mapping(f, outcome, kms, g, a)
            broken = check_mapping(g, a, mapping)
            if broken:
                raise IntegrityError(
                    f"solver model violates placement rules at ii={ii}: {broken[0].message}")
            report = check_register_pressure(compute_lifetimes(g, mapping), a, ii)
            attempts.append(Attempt(ii, "sat", report.ok, wall, f.var_count, len(f.clauses)))
            log.info("event=attempt ii=%d status=sat regalloc=%s vars=%d clauses=%d wall=%.3f",
                     ii, "ok" if report.ok else "fail", f.var_count, len(f.clauses), wall)
            if report.ok:
                log.info("event=stop outcome=mapped ii=%d wall=%.3f",
                         ii, time.monotonic() - start)
                return CompileResult(outcome="mapped", bounds=bounds, mapping=mapping,
                                     report=report, attempts=tuple(attempts))
            if retry < cfg.regalloc_retries:
                f.clauses.append(blocking_clause(f, outcome.model))

    log.info("event=stop outcome=no_mapping_up_to_ii_max wall=%.3f", time.monotonic() - start)
    return CompileResult(outcome="no_mapping_up_to_ii_max", bounds=bounds,
                         attempts=tuple(attempts))
