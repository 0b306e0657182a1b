from __future__ import annotations

import json
import random

import pytest

from _gen import random_dfg
from _oracles import enumerate_sat, feasible_at_ii
from satmap.arch import CgraArchitecture
from satmap.dfg import parse_dfg
from satmap.encoder import (CnfFormula, VarKey, dimacs_text, encode_all,
                            parse_dimacs)
from satmap.errors import DeadlineExceeded, FormatError
from satmap.sat import solve
from satmap.schedule import build_kms, build_mobility


def graph(nodes, edges, init=None):
    doc = {"nodes": nodes, "edges": edges}
    if init:
        doc["init"] = init
    return parse_dfg(json.dumps(doc))


@pytest.fixture
def pair():
    # const -> output, a two-node chain
    return graph(
        [{"id": 0, "op": "const", "imm": 5},
         {"id": 1, "op": "output", "stream": 0}],
        [{"src": 0, "dst": 1, "operand": 0, "distance": 0}])


def encode(g, arch, ii, slack=None, **kw):
    ms = build_mobility(g, extra_slack=ii - 1 if slack is None else slack)
    return encode_all(g, arch, build_kms(ms, ii), **kw)


def test_variable_order_is_node_then_label_slot_then_pe(pair):
    arch = CgraArchitecture(1, 2)
    f = encode(pair, arch, 2, slack=1)
    # Node 0 window [0,1], node 1 window [1,2]; ii=2 folds these to
    # (slot,label) = (0,0),(1,0) and (1,0),(0,1).
    assert f.var_keys == (
        VarKey(node=0, pe=0, slot=0, label=0), VarKey(node=0, pe=1, slot=0, label=0),
        VarKey(node=0, pe=0, slot=1, label=0), VarKey(node=0, pe=1, slot=1, label=0),
        VarKey(node=1, pe=0, slot=1, label=0), VarKey(node=1, pe=1, slot=1, label=0),
        VarKey(node=1, pe=0, slot=0, label=1), VarKey(node=1, pe=1, slot=0, label=1),
    )
    assert f.index_of(VarKey(node=1, pe=1, slot=1, label=0)) == 6
    assert f.key_of(6).node == 1


def test_exactly_one_clause_counts(pair):
    arch = CgraArchitecture(1, 2)
    f = encode(pair, arch, 2, slack=1)
    lits = [f.index_of(k) for k in f.var_keys if k.node == 0]
    assert sorted(lits) == [1, 2, 3, 4]
    assert lits in f.clauses
    # Pairwise at-most-one adds k*(k-1)/2 binary clauses per node.
    amo = [c for c in f.clauses if len(c) == 2 and all(l < 0 for l in c)
           and all(f.key_of(-l).node == 0 for l in c)]
    assert len(amo) == 6


def test_pe_exclusivity_skips_same_node_pairs(pair):
    arch = CgraArchitecture(1, 2)
    f = encode(pair, arch, 2, slack=1)
    # Node 0 can take (pe0,s1) and node 1 can take (pe0,s1); that cell
    # must carry a cross-node conflict clause.
    a = f.index_of(VarKey(node=0, pe=0, slot=1, label=0))
    b = f.index_of(VarKey(node=1, pe=0, slot=1, label=0))
    assert sorted([-a, -b], reverse=True) in [sorted(c, reverse=True) for c in f.clauses]
    # But no clause may pit a variable against itself or pair two
    # placements of one node outside the at-most-one family's own cell.
    for c in f.clauses:
        assert len(set(abs(l) for l in c)) == len(c)


def test_routing_clauses_on_a_chain():
    g = graph(
        [{"id": 0, "op": "const", "imm": 1},
         {"id": 1, "op": "output", "stream": 0}],
        [{"src": 0, "dst": 1, "operand": 0, "distance": 0}])
    arch = CgraArchitecture(1, 3)  # PEs 0-1-2 in a row; 0 and 2 not adjacent
    f = encode(g, arch, 1, slack=1)
    # Horizon 3, ii 1: node 0 window [0,1], node 1 window [1,2], slot 0 always.
    def var(n, pe, label):
        return f.index_of(VarKey(node=n, pe=pe, slot=0, label=label))

    conflicts = {tuple(sorted(c)) for c in f.clauses if all(l < 0 for l in c)}
    # Non-adjacent PEs conflict even at legal times.
    assert tuple(sorted([-var(0, 0, 0), -var(1, 2, 1)])) in conflicts
    # Same absolute time violates strict ordering on a distance-0 edge.
    assert tuple(sorted([-var(0, 0, 1), -var(1, 0, 1)])) in conflicts
    # Adjacent PE one cycle later is allowed.
    assert tuple(sorted([-var(0, 0, 0), -var(1, 1, 1)])) not in conflicts


def test_carried_distance_relaxes_ordering():
    g = graph(
        [{"id": 0, "op": "input", "stream": 0},
         {"id": 1, "op": "add"},
         {"id": 2, "op": "output", "stream": 0}],
        [{"src": 0, "dst": 1, "operand": 0, "distance": 0},
         {"src": 1, "dst": 1, "operand": 1, "distance": 1},
         {"src": 1, "dst": 2, "operand": 0, "distance": 0}],
        [{"edge": [1, 1, 1], "values": [0]}])
    arch = CgraArchitecture(1, 1)
    f = encode(g, arch, 3, slack=0)
    # The self-edge at distance 1 must not forbid node 1's placement:
    # t + 1*ii > t always holds, so no unit clause names node 1 alone.
    units = [c for c in f.clauses if len(c) == 1]
    assert all(f.key_of(-c[0]).node != 1 for c in units if c[0] < 0)
    outcome = solve(f)
    assert outcome.status == "sat"


def test_self_conflicts_become_unit_clauses():
    # A 2-cycle at distance 1 on one PE with ii=1: u at t, v at t+? with
    # both directions constrained; some single placements are impossible
    # and must surface as unit clauses, not tautologies.
    g = graph(
        [{"id": 0, "op": "input", "stream": 0},
         {"id": 1, "op": "add"},
         {"id": 2, "op": "add"},
         {"id": 3, "op": "output", "stream": 0}],
        [{"src": 0, "dst": 1, "operand": 0, "distance": 0},
         {"src": 2, "dst": 1, "operand": 1, "distance": 1},
         {"src": 1, "dst": 2, "operand": 0, "distance": 0},
         {"src": 1, "dst": 2, "operand": 1, "distance": 0},
         {"src": 2, "dst": 3, "operand": 0, "distance": 0}],
        [{"edge": [2, 1, 1], "values": [0]}])
    f = encode(g, CgraArchitecture(2, 2), 1)
    # RecII is 2, so at ii=1 the formula must be unsatisfiable.
    assert solve(f).status == "unsat"


def test_routing_clauses_are_deduplicated(pair):
    # Exclusivity and routing may each emit the same pair once, but the
    # routing family itself must never repeat a conflict.
    from collections import Counter
    f = encode(pair, CgraArchitecture(2, 2), 2)
    counts = Counter(tuple(sorted(c)) for c in f.clauses)
    assert all(v <= 2 for v in counts.values())


def test_dimacs_bytes_pinned():
    assert dimacs_text(CnfFormula(1, [[1]])) == "p cnf 1 1\n1 0\n"


def test_dimacs_comment_block_names_placements(pair):
    f = encode(pair, CgraArchitecture(1, 2), 2, slack=1)
    text = dimacs_text(f)
    assert text.splitlines()[0] == "c var 1 = n0 p0 s0 l0"
    assert f"p cnf {f.var_count} {len(f.clauses)}" in text


def test_encoding_is_deterministic(pair):
    a = dimacs_text(encode(pair, CgraArchitecture(2, 2), 2))
    b = dimacs_text(encode(pair, CgraArchitecture(2, 2), 2))
    assert a == b


def test_dimacs_round_trip(pair):
    f = encode(pair, CgraArchitecture(1, 2), 2)
    g = parse_dimacs(dimacs_text(f))
    assert g.var_count == f.var_count
    assert g.clauses == f.clauses


def test_parse_dimacs_accepts_multiline_clauses():
    f = parse_dimacs("c hi\np cnf 3 2\n1 2\n3 0 -1\n-2 -3 0\n")
    assert f.clauses == [[1, 2, 3], [-1, -2, -3]]


@pytest.mark.parametrize("text,fragment", [
    ("p cnf x 1\n1 0\n", "header"),
    ("1 0\np cnf 1 1\n", "before"),
    ("p cnf 1 1\n1 zero\n", "literal"),
    ("c only comments\n", "missing"),
    ("p cnf 1 1\n1\n", "terminated"),
    ("p cnf 1 2\n1 0\n", "promises"),
])
def test_parse_dimacs_rejects_garbage(text, fragment):
    with pytest.raises(FormatError, match=fragment):
        parse_dimacs(text)


def test_sequential_amo_is_equisatisfiable():
    g = graph(
        [{"id": 0, "op": "input", "stream": 0},
         {"id": 1, "op": "add"},
         {"id": 2, "op": "output", "stream": 0}],
        [{"src": 0, "dst": 1, "operand": 0, "distance": 0},
         {"src": 0, "dst": 1, "operand": 1, "distance": 0},
         {"src": 1, "dst": 2, "operand": 0, "distance": 0}])
    arch = CgraArchitecture(2, 2)
    plain = encode(g, arch, 2)
    compact = encode(g, arch, 2, amo_mode="sequential", amo_threshold=4)
    assert compact.var_count > compact.mapping_var_count  # chain aux vars exist
    for f in (plain, compact):
        outcome = solve(f)
        assert outcome.status == "sat"
        true_per_node: dict[int, int] = {}
        for i in range(1, f.mapping_var_count + 1):
            if outcome.model[i]:
                true_per_node[f.key_of(i).node] = true_per_node.get(f.key_of(i).node, 0) + 1
        assert true_per_node == {0: 1, 1: 1, 2: 1}


def test_encode_deadline_already_passed(pair):
    import time
    g = random_dfg(random.Random(5), min_nodes=6, max_nodes=7)
    ms = build_mobility(g, extra_slack=3)
    with pytest.raises(DeadlineExceeded):
        encode_all(g, CgraArchitecture(2, 2), build_kms(ms, 4),
                   deadline=time.monotonic() - 1.0)


def test_formula_validation_rejects_bad_literals():
    with pytest.raises(FormatError):
        CnfFormula(2, [[3]])
    with pytest.raises(FormatError):
        CnfFormula(2, [[0]])
    with pytest.raises(FormatError):
        CnfFormula(2, [[]])


@pytest.mark.parametrize("seed", range(12))
def test_satisfiability_matches_placement_search(seed):
    rng = random.Random(400 + seed)
    g = random_dfg(rng, min_nodes=3, max_nodes=5)
    arch = CgraArchitecture(1, 3) if seed % 2 else CgraArchitecture(2, 2)
    ii = rng.randint(1, 3)
    ms = build_mobility(g, extra_slack=ii - 1)
    kms = build_kms(ms, ii)
    f = encode_all(g, arch, kms)
    outcome = solve(f)
    witness = feasible_at_ii(g, arch, kms)
    assert (outcome.status == "sat") == (witness is not None)


@pytest.mark.parametrize("seed", range(10))
def test_checker_and_formula_agree_on_forced_assignments(seed):
    # Pinning a full assignment with unit clauses must be satisfiable
    # exactly when the independent rule checker accepts that mapping.
    from satmap.driver import run_toolchain
    from satmap.encoder import VarKey
    from satmap.verify import Mapping, Placement, check_mapping

    rng = random.Random(8800 + seed)
    g = random_dfg(rng, min_nodes=3, max_nodes=5)
    arch = CgraArchitecture(2, 2, registers_per_pe=64)   # pressure is out of scope here
    result = run_toolchain(g, arch)
    assert result.outcome == "mapped"
    m = result.mapping
    f = encode(g, arch, m.ii)

    def forced(mapping):
        units = [[f.index_of(VarKey(node=n, pe=p.pe, slot=p.slot, label=p.label))]
                 for n, p in mapping.assignment.items()]
        return CnfFormula(f.var_count, f.clauses + units, f.var_keys)

    assert solve(forced(m)).status == "sat"

    ids = sorted(m.assignment)
    for other in ids[1:]:
        swapped = dict(m.assignment)
        a, b = swapped[ids[0]], swapped[other]
        swapped[ids[0]] = Placement(b.pe, a.slot, a.label)
        swapped[other] = Placement(a.pe, b.slot, b.label)
        corrupted = Mapping(ii=m.ii, assignment=swapped)
        want = "sat" if not check_mapping(g, arch, corrupted) else "unsat"
        assert solve(forced(corrupted)).status == want


def test_enumeration_agrees_on_tiny_formulas():
    g = graph(
        [{"id": 0, "op": "const", "imm": 2},
         {"id": 1, "op": "output", "stream": 0}],
        [{"src": 0, "dst": 1, "operand": 0, "distance": 0}])
    f = encode(g, CgraArchitecture(1, 2), 1, slack=0)
    status, _ = enumerate_sat(f)
    assert solve(f).status == status == "sat"
