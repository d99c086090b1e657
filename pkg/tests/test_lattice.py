import numpy as np
import pytest

from defectperc.lattice import (
    LatticeSpec,
    boundary_mask,
    build_edge_table,
    face_bits,
    face_vertices,
    neighbor_tables,
    origin_index,
    vertex_coords,
    vertex_index,
)


def test_small_box_counts():
    table = build_edge_table(LatticeSpec(3, 2, 1))
    assert table.spec.num_vertices == 27
    assert table.num_edges == 54
    assert table.num_defect == 12
    assert table.num_bulk == 42


@pytest.mark.parametrize("d,s,L", [(3, 2, 1), (3, 2, 2), (4, 2, 2), (4, 3, 2), (2, 2, 3)])
def test_defect_count_formula_free(d, s, L):
    table = build_edge_table(LatticeSpec(d, s, L))
    assert table.num_defect == s * (2 * L) * (2 * L + 1) ** (s - 1)
    assert table.num_edges == d * (2 * L) * (2 * L + 1) ** (d - 1)


def test_defect_count_independent_of_d():
    t3 = build_edge_table(LatticeSpec(3, 2, 3))
    t4 = build_edge_table(LatticeSpec(4, 2, 3))
    assert t3.num_defect == t4.num_defect


@pytest.mark.parametrize("d,s,L", [(3, 2, 2), (2, 2, 2)])
def test_periodic_counts(d, s, L):
    table = build_edge_table(LatticeSpec(d, s, L, "periodic"))
    n = (2 * L) ** d
    assert table.spec.num_vertices == n
    assert table.num_edges == d * n
    assert table.num_defect == s * (2 * L) ** s


def test_edges_unique_and_in_range():
    spec = LatticeSpec(3, 2, 2)
    table = build_edge_table(spec)
    pairs = set()
    for u, v in zip(table.u, table.v):
        assert 0 <= u < spec.num_vertices and 0 <= v < spec.num_vertices
        key = (min(u, v), max(u, v))
        assert key not in pairs
        pairs.add(key)


def test_canonical_edge_order_lexicographic():
    table = build_edge_table(LatticeSpec(3, 2, 2))
    keys = list(zip(table.u.tolist(), table.axis.tolist()))
    assert keys == sorted(keys)


def test_defect_edges_lie_in_plane():
    # coordinates are stored shifted to 0..2L, so the plane sits at L
    spec = LatticeSpec(3, 2, 2)
    table = build_edge_table(spec)
    for u, v in zip(table.defect_u, table.defect_v):
        assert vertex_coords(spec, int(u))[spec.s:].tolist() == [spec.L]
        assert vertex_coords(spec, int(v))[spec.s:].tolist() == [spec.L]


def test_vertex_index_roundtrip():
    spec = LatticeSpec(3, 2, 2)
    for idx in range(spec.num_vertices):
        coords = vertex_coords(spec, idx)
        assert vertex_index(spec, coords) == idx
        assert np.all(coords >= 0) and np.all(coords <= 2 * spec.L)


def test_origin_index_is_center():
    spec = LatticeSpec(4, 2, 2)
    assert vertex_coords(spec, origin_index(spec)).tolist() == [2, 2, 2, 2]


@pytest.mark.parametrize(
    "d,s,L,size",
    [(3, 2, 1, 9), (3, 2, 2, 25), (4, 2, 1, 27)],
)
def test_face_sizes(d, s, L, size):
    spec = LatticeSpec(d, s, L)
    for axis in range(1, s + 1):
        plus = face_vertices(spec, axis, +1)
        minus = face_vertices(spec, axis, -1)
        assert plus.shape[0] == size and minus.shape[0] == size
        assert not set(plus.tolist()) & set(minus.tolist())
        for v in plus:
            assert vertex_coords(spec, int(v))[axis - 1] == 2 * L
        for v in minus:
            assert vertex_coords(spec, int(v))[axis - 1] == 0


def test_face_bits_layout():
    spec = LatticeSpec(3, 2, 1)
    bits = face_bits(spec, [1, 2])
    for axis, (b_plus, b_minus) in [(1, (1, 2)), (2, (4, 8))]:
        plus = face_vertices(spec, axis, +1)
        minus = face_vertices(spec, axis, -1)
        assert np.all(bits[plus] & b_plus)
        assert np.all(bits[minus] & b_minus)
    # interior vertex carries no face bit
    assert bits[origin_index(spec)] == 0


def test_boundary_mask_count():
    for d, L in [(2, 3), (3, 2)]:
        spec = LatticeSpec(d, 2, L)
        mask = boundary_mask(spec)
        assert int(mask.sum()) == (2 * L + 1) ** d - (2 * L - 1) ** d
        assert not mask[origin_index(spec)]


def test_neighbor_tables_slots():
    spec = LatticeSpec(3, 2, 1)
    table, nbr, eid = neighbor_tables(spec)
    o = origin_index(spec)
    for axis in range(1, spec.d + 1):
        for sign, slot in [(+1, 2 * (axis - 1)), (-1, 2 * (axis - 1) + 1)]:
            w = int(nbr[o, slot])
            assert w >= 0
            coords = vertex_coords(spec, w)
            expect = [spec.L] * spec.d
            expect[axis - 1] += sign
            assert coords.tolist() == expect
            e = int(eid[o, slot])
            assert {int(table.u[e]), int(table.v[e])} == {o, w}
    # corner vertex has missing (-1) slots on the free boundary
    corner = vertex_index(spec, [0, 0, 0])
    assert int((nbr[corner] < 0).sum()) == spec.d


def test_edge_table_deterministic():
    a = build_edge_table(LatticeSpec(3, 2, 2))
    b = build_edge_table(LatticeSpec(3, 2, 2))
    assert np.array_equal(a.u, b.u)
    assert np.array_equal(a.v, b.v)
    assert np.array_equal(a.axis, b.axis)
    assert np.array_equal(a.cls, b.cls)


def test_spec_validation():
    with pytest.raises(ValueError):
        LatticeSpec(3, 1, 2)  # s must be >= 2
    with pytest.raises(ValueError):
        LatticeSpec(3, 4, 2)  # s > d
    with pytest.raises(ValueError):
        LatticeSpec(3, 2, 0)  # L >= 1
    with pytest.raises(ValueError):
        LatticeSpec(3, 2, 2, "helical")


def test_face_errors():
    spec = LatticeSpec(3, 2, 2)
    with pytest.raises(ValueError):
        face_vertices(spec, 3, +1)  # horizontal axis is not a crossing target
    with pytest.raises(ValueError):
        face_vertices(LatticeSpec(3, 2, 2, "periodic"), 1, +1)
