from __future__ import annotations

import json
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from _oracles import unrolled_pressure
from satmap.arch import CgraArchitecture
from satmap.dfg import parse_dfg
from satmap.errors import IntegrityError
from satmap.regalloc import (PressureViolation, ValueLifetime,
                             check_register_pressure, compute_lifetimes,
                             register_report_document)
from satmap.verify import Mapping, Placement


def graph(nodes, edges, init=None):
    doc = {"nodes": nodes, "edges": edges}
    if init:
        doc["init"] = init
    return parse_dfg(json.dumps(doc))


def lifetime(pe=0, birth=0, death=1):
    return ValueLifetime(producer=0, pe=pe, birth=birth, death=death)


def test_short_value_occupies_only_its_birth_slot():
    report = check_register_pressure([lifetime(birth=1, death=2)],
                                     CgraArchitecture(1, 1), 3)
    assert report.per_slot_pressure == ((0, 1, 0),)
    assert report.ok


def test_long_value_stacks_iteration_instances():
    # span 5 at ii 2: slots congruent to birth hold ceil(5/2)=3 instances,
    # the other slot holds 2.
    report = check_register_pressure([lifetime(birth=0, death=5)],
                                     CgraArchitecture(1, 1), 2)
    assert report.per_slot_pressure == ((3, 2),)


def test_span_equal_to_ii_means_one_instance_everywhere():
    report = check_register_pressure([lifetime(birth=1, death=4)],
                                     CgraArchitecture(1, 1), 3)
    assert report.per_slot_pressure == ((1, 1, 1),)


def test_capacity_overflow_is_reported_per_cell():
    arch = CgraArchitecture(1, 2, registers_per_pe=1)
    lts = [ValueLifetime(producer=0, pe=0, birth=0, death=1),
           ValueLifetime(producer=1, pe=0, birth=0, death=1),
           ValueLifetime(producer=2, pe=1, birth=1, death=2)]
    report = check_register_pressure(lts, arch, 2)
    assert not report.ok
    assert report.violations == (PressureViolation(pe=0, slot=0, pressure=2, capacity=1),)
    assert report.max_pressure == 2


def test_rejects_nonpositive_ii():
    with pytest.raises(ValueError):
        check_register_pressure([], CgraArchitecture(1, 1), 0)


def test_lifetimes_of_a_chain():
    g = graph(
        [{"id": 0, "op": "const", "imm": 3},
         {"id": 1, "op": "output", "stream": 0}],
        [{"src": 0, "dst": 1, "operand": 0, "distance": 0}])
    m = Mapping(ii=2, assignment={0: Placement(pe=0, slot=0, label=0),
                                  1: Placement(pe=1, slot=1, label=0)})
    lts = compute_lifetimes(g, m)
    assert lts == [ValueLifetime(producer=0, pe=0, birth=0, death=1)]


def test_carried_consumer_extends_death_by_distance():
    g = graph(
        [{"id": 0, "op": "input", "stream": 0},
         {"id": 1, "op": "add"},
         {"id": 2, "op": "output", "stream": 0}],
        [{"src": 0, "dst": 1, "operand": 0, "distance": 0},
         {"src": 1, "dst": 1, "operand": 1, "distance": 1},
         {"src": 1, "dst": 2, "operand": 0, "distance": 0}],
        [{"edge": [1, 1, 1], "values": [0]}])
    m = Mapping(ii=2, assignment={0: Placement(pe=0, slot=0, label=0),
                                  1: Placement(pe=0, slot=1, label=0),
                                  2: Placement(pe=1, slot=0, label=1)})
    lts = {lt.producer: lt for lt in compute_lifetimes(g, m)}
    # Node 1 fires at t=1; its self-consumer reads at 1 + 1*2 = 3 and the
    # output reads at 2, so death is 3 and span 2.
    assert lts[1] == ValueLifetime(producer=1, pe=0, birth=1, death=3)
    # The output produces nothing anyone reads.
    assert 2 not in lts


def test_lifetimes_need_a_total_assignment():
    g = graph(
        [{"id": 0, "op": "const", "imm": 3},
         {"id": 1, "op": "output", "stream": 0}],
        [{"src": 0, "dst": 1, "operand": 0, "distance": 0}])
    with pytest.raises(IntegrityError, match="node 1"):
        compute_lifetimes(g, Mapping(ii=2, assignment={0: Placement(0, 0, 0)}))


lifetime_sets = st.lists(
    st.builds(ValueLifetime,
              producer=st.integers(0, 9),
              pe=st.integers(0, 3),
              birth=st.integers(0, 12),
              death=st.integers(0, 12)).filter(lambda lt: lt.death > lt.birth),
    min_size=0, max_size=8)


@settings(max_examples=200, deadline=None)
@given(lifetime_sets, st.integers(min_value=1, max_value=5))
def test_closed_form_matches_unrolled_counting(lts, ii):
    arch = CgraArchitecture(2, 2, registers_per_pe=4)
    report = check_register_pressure(lts, arch, ii)
    assert [list(row) for row in report.per_slot_pressure] == unrolled_pressure(lts, arch, ii)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10), st.integers(1, 15), st.integers(1, 6), st.integers(0, 5))
def test_total_instances_never_increase_with_ii(birth, span, ii, slot_offset):
    # A fixed lifetime's worst-slot instance count shrinks or holds as the
    # kernel grows, which is what makes raising II a valid repair.
    lt = ValueLifetime(producer=0, pe=0, birth=birth, death=birth + span)
    arch = CgraArchitecture(1, 1, registers_per_pe=99)
    worst = [max(check_register_pressure([lt], arch, i).per_slot_pressure[0])
             for i in (ii, ii + 1)]
    assert worst[0] >= worst[1]


def test_report_document_shape():
    arch = CgraArchitecture(1, 1, registers_per_pe=1)
    report = check_register_pressure(
        [lifetime(birth=0, death=3), lifetime(birth=1, death=2)], arch, 2)
    doc = register_report_document(report)
    assert doc["ok"] is False
    assert doc["capacity"] == 1
    assert doc["max_pressure"] == max(max(r) for r in doc["per_slot_pressure"])
    assert all(set(v) == {"pe", "slot", "pressure", "capacity"} for v in doc["violations"])
    assert json.loads(json.dumps(doc)) == doc
