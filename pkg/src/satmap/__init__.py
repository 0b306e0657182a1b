"""satmap: lowest-II modulo-scheduled mapping of loop DFGs onto CGRA grids.

The pipeline folds per-node mobility windows into kernel-slot candidates,
encodes placement as CNF, and searches ascending iteration intervals
until the SAT solver and the register-pressure check both accept.
"""

from .arch import CgraArchitecture, closed_neighborhood, load_arch, neighbors, parse_arch
from .dfg import DataFlowGraph, DfgEdge, DfgNode, load_dfg, parse_dfg, serialize_dfg, validate_dfg
from .driver import Attempt, CompileResult, DriverConfig, decode_mapping, run_toolchain
from .encoder import CnfFormula, VarKey, emit_dimacs, encode_all, parse_dimacs
from .errors import (DeadlineExceeded, FormatError, IntegrityError, OracleCapError,
                     SatmapError)
from .regalloc import (PressureReport, ValueLifetime, check_register_pressure,
                       compute_lifetimes)
from .sat import SolveOutcome, SolveStats, solve, solve_external
from .schedule import (IiBounds, KernelMobilitySchedule, MobilitySchedule, build_kms,
                       build_mobility, compute_mii, compute_rec_ii, compute_res_ii)
from .verify import (Mapping, Placement, SimTrace, brute_force_min_ii, check_mapping,
                     interpret, load_mapping, save_mapping, simulate)

__version__ = "0.1.0"

__all__ = [
    "Attempt",
    "CgraArchitecture",
    "CnfFormula",
    "CompileResult",
    "DataFlowGraph",
    "DeadlineExceeded",
    "DfgEdge",
    "DfgNode",
    "DriverConfig",
    "FormatError",
    "IiBounds",
    "IntegrityError",
    "KernelMobilitySchedule",
    "Mapping",
    "MobilitySchedule",
    "OracleCapError",
    "Placement",
    "PressureReport",
    "SatmapError",
    "SimTrace",
    "SolveOutcome",
    "SolveStats",
    "ValueLifetime",
    "VarKey",
    "brute_force_min_ii",
    "build_kms",
    "build_mobility",
    "check_mapping",
    "check_register_pressure",
    "closed_neighborhood",
    "compute_lifetimes",
    "compute_mii",
    "compute_rec_ii",
    "compute_res_ii",
    "decode_mapping",
    "emit_dimacs",
    "encode_all",
    "interpret",
    "load_arch",
    "load_dfg",
    "load_mapping",
    "neighbors",
    "parse_arch",
    "parse_dfg",
    "parse_dimacs",
    "run_toolchain",
    "save_mapping",
    "serialize_dfg",
    "simulate",
    "solve",
    "solve_external",
    "validate_dfg",
    "__version__",
]
