from __future__ import annotations

import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from satmap.arch import (CgraArchitecture, arch_to_document, closed_neighborhood,
                         neighbors, parse_arch, reachable_set,
                         symmetry_orbit_representatives)
from satmap.errors import FormatError

dims = st.integers(min_value=1, max_value=5)
topologies = st.sampled_from(["mesh2d", "torus2d"])


def test_pe_numbering_is_row_major():
    a = CgraArchitecture(2, 3)
    assert a.pe_count == 6
    assert a.coords(0) == (0, 0)
    assert a.coords(5) == (1, 2)
    assert a.pe_at(1, 0) == 3


def test_mesh_neighbors_2x2():
    a = CgraArchitecture(2, 2)
    assert neighbors(a, 0) == [1, 2]
    assert neighbors(a, 3) == [1, 2]
    assert closed_neighborhood(a, 0) == {0, 1, 2}


def test_mesh_neighbors_interior_and_corner_3x3():
    a = CgraArchitecture(3, 3)
    assert neighbors(a, 4) == [1, 3, 5, 7]
    assert neighbors(a, 0) == [1, 3]
    assert neighbors(a, 8) == [5, 7]


def test_torus_2x2_wraparound_duplicates_collapse():
    a = CgraArchitecture(2, 2, topology="torus2d")
    assert neighbors(a, 0) == [1, 2]


def test_torus_degree_is_four_when_both_dims_at_least_three():
    a = CgraArchitecture(3, 4, topology="torus2d")
    for pe in range(a.pe_count):
        assert len(neighbors(a, pe)) == 4


def test_torus_1xn_collapses_to_ring():
    a = CgraArchitecture(1, 4, topology="torus2d")
    assert neighbors(a, 0) == [1, 3]


def test_reachable_set_two_hops_3x3():
    a = CgraArchitecture(3, 3)
    assert reachable_set(a, 0, 2) == {0, 1, 2, 3, 4, 6}
    assert reachable_set(a, 0, 0) == {0}


@given(dims, dims, topologies)
def test_neighbors_are_symmetric_sorted_and_self_free(rows, cols, topology):
    a = CgraArchitecture(rows, cols, topology=topology)
    for pe in range(a.pe_count):
        ns = neighbors(a, pe)
        assert ns == sorted(set(ns))
        assert pe not in ns
        for q in ns:
            assert pe in neighbors(a, q)


@given(dims, dims, topologies)
def test_reachable_set_eventually_covers_the_grid(rows, cols, topology):
    a = CgraArchitecture(rows, cols, topology=topology)
    assert reachable_set(a, 0, rows + cols) == set(range(a.pe_count))


def test_symmetry_representatives():
    assert symmetry_orbit_representatives(CgraArchitecture(2, 2)) == [0]
    assert symmetry_orbit_representatives(CgraArchitecture(2, 2, topology="torus2d")) == [0]
    assert symmetry_orbit_representatives(CgraArchitecture(2, 3)) == [0, 1]
    assert symmetry_orbit_representatives(CgraArchitecture(3, 3)) == [0, 1, 4]


@given(dims, dims, topologies)
def test_symmetry_representatives_are_valid_pes(rows, cols, topology):
    a = CgraArchitecture(rows, cols, topology=topology)
    reps = symmetry_orbit_representatives(a)
    assert reps == sorted(set(reps))
    assert all(0 <= pe < a.pe_count for pe in reps)
    assert 0 in reps


def test_constructor_validation():
    with pytest.raises(ValueError):
        CgraArchitecture(0, 2)
    with pytest.raises(ValueError):
        CgraArchitecture(2, 2, topology="hypercube")
    with pytest.raises(ValueError):
        CgraArchitecture(2, 2, registers_per_pe=0)


def test_parse_defaults_and_round_trip():
    a = parse_arch('{"rows": 2, "cols": 2}')
    assert a.topology == "mesh2d"
    assert a.registers_per_pe == 4
    assert parse_arch(json.dumps(arch_to_document(a))) == a


def test_parse_rejects_unknown_keys_and_bad_values():
    with pytest.raises(FormatError, match="unknown"):
        parse_arch('{"rows": 2, "cols": 2, "speed": 9}')
    with pytest.raises(FormatError):
        parse_arch('{"rows": 2}')
    with pytest.raises(FormatError):
        parse_arch('{"rows": 2, "cols": 0}')
    with pytest.raises(FormatError, match="line"):
        parse_arch('{"rows": }')
