"""Finite boxes of the hypercubic lattice with a distinguished defect plane.

The box B(L) = [-L, L]^d carries nearest-neighbour bonds.  Bonds whose
endpoints both lie in the plane spanned by the first `s` coordinate axes
(all remaining coordinates zero) form the defect class; every other bond is
bulk.  Vertices are indexed row-major over coordinates shifted to 0..2L
(free boundary) or 0..2L-1 (periodic), and edges are listed in canonical
lexicographic order by (vertex index, axis), which fixes the meaning of
"edge i" everywhere else in the package.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

BULK = 0
DEFECT = 1


@dataclass(frozen=True)
class LatticeSpec:
    """Geometry of one simulation box.

    d : lattice dimension (>= 2)
    s : defect-plane dimension, 2 <= s <= d.  s == d means every bond is in
        the defect class, i.e. the homogeneous lattice; that mode exists for
        homogeneous baselines only and the defect-sweep driver refuses it.
    L : box half-length (>= 1)
    boundary : "free" or "periodic".  Crossing experiments require free
        boundaries; periodic boxes exist for homogeneous baselines.
    """

    d: int
    s: int
    L: int
    boundary: str = "free"

    def __post_init__(self):
        if not (isinstance(self.d, int) and self.d >= 2):
            raise ValueError(f"d must be an integer >= 2, got {self.d!r}")
        if not (isinstance(self.s, int) and 2 <= self.s <= self.d):
            raise ValueError(
                f"s must satisfy 2 <= s <= d, got s={self.s!r} for d={self.d}"
            )
        if not (isinstance(self.L, int) and self.L >= 1):
            raise ValueError(f"L must be an integer >= 1, got {self.L!r}")
        if self.boundary not in ("free", "periodic"):
            raise ValueError(f"boundary must be 'free' or 'periodic', got {self.boundary!r}")

    @property
    def n_side(self) -> int:
        return 2 * self.L + 1 if self.boundary == "free" else 2 * self.L

    @property
    def num_vertices(self) -> int:
        return self.n_side**self.d

    @property
    def homogeneous(self) -> bool:
        return self.s == self.d

    def as_dict(self) -> dict:
        return {"d": self.d, "s": self.s, "L": self.L, "boundary": self.boundary}


class EdgeTable:
    """Canonically ordered bond list of one box.

    Arrays (all length E_tot, canonical order):
      u, v   : int32 endpoint indices, u < v except periodic wrap pairs
      axis   : uint8, 1-based axis of each bond
      cls    : uint8, BULK or DEFECT

    `defect_u/defect_v` keep the defect bonds in canonical sub-order; the
    microcanonical sweep permutes positions into that sub-list, so "defect
    edge j" is well defined across runs and implementations.
    """

    def __init__(self, spec: LatticeSpec, u, v, axis, cls):
        self.spec = spec
        self.u = u
        self.v = v
        self.axis = axis
        self.cls = cls
        dmask = cls == DEFECT
        self.defect_u = u[dmask].copy()
        self.defect_v = v[dmask].copy()
        self.bulk_u = u[~dmask].copy()
        self.bulk_v = v[~dmask].copy()

    @property
    def num_edges(self) -> int:
        return int(self.u.shape[0])

    @property
    def num_defect(self) -> int:
        return int(self.defect_u.shape[0])

    @property
    def num_bulk(self) -> int:
        return int(self.bulk_u.shape[0])

    def edges(self):
        """Iterate (u, v, cls) tuples in canonical order (test convenience)."""
        for i in range(self.num_edges):
            yield int(self.u[i]), int(self.v[i]), int(self.cls[i])


def _strides(spec: LatticeSpec) -> np.ndarray:
    # row-major: last axis fastest
    n = spec.n_side
    return np.array([n ** (spec.d - a) for a in range(1, spec.d + 1)], dtype=np.int64)


def vertex_coords(spec: LatticeSpec, idx) -> np.ndarray:
    """Shifted coordinates (0-based) of vertex indices; shape (..., d)."""
    idx = np.asarray(idx, dtype=np.int64)
    n = spec.n_side
    out = np.empty(idx.shape + (spec.d,), dtype=np.int64)
    rem = idx
    for a in range(spec.d - 1, -1, -1):
        out[..., a] = rem % n
        rem = rem // n
    return out


def vertex_index(spec: LatticeSpec, coords) -> int:
    coords = np.asarray(coords, dtype=np.int64)
    return int((coords * _strides(spec)).sum(axis=-1))


def origin_index(spec: LatticeSpec) -> int:
    """Index of the lattice origin (shifted coordinate L along every axis)."""
    return vertex_index(spec, np.full(spec.d, spec.L, dtype=np.int64))


def build_edge_table(spec: LatticeSpec) -> EdgeTable:
    """Construct the canonical bond list of B(L).

    Free boundary: along each axis there are (2L)(2L+1)^(d-1) bonds.  The
    defect class has S = s(2L)(2L+1)^(s-1) bonds, independent of d.
    Periodic: (2L)^d bonds per axis; L = 1 gives the standard 2-site torus
    with doubled bonds, kept as-is.
    """
    d, n = spec.d, spec.n_side
    nv = spec.num_vertices
    strides = _strides(spec)
    idx = np.arange(nv, dtype=np.int64)
    coords = vertex_coords(spec, idx)  # (nv, d)

    # plane membership of the "frozen" axes s+1..d (shifted coordinate == L)
    if spec.s == d:
        in_plane = np.ones(nv, dtype=bool)
    else:
        in_plane = (coords[:, spec.s:] == spec.L).all(axis=1)

    per_axis_u = []
    per_axis_v = []
    per_axis_cls = []
    for a in range(1, d + 1):
        c = coords[:, a - 1]
        if spec.boundary == "free":
            mask = c < n - 1
            uu = idx[mask]
            vv = uu + strides[a - 1]
        else:
            uu = idx
            vv = uu - c * strides[a - 1] + ((c + 1) % n) * strides[a - 1]
        cc = np.zeros(uu.shape[0], dtype=np.uint8)
        if a <= spec.s:
            cc[in_plane[uu]] = DEFECT
        per_axis_u.append(uu)
        per_axis_v.append(vv)
        per_axis_cls.append(cc)

    # interleave per-axis lists into (vertex, axis)-lexicographic order
    all_u = np.concatenate(per_axis_u)
    all_v = np.concatenate(per_axis_v)
    all_cls = np.concatenate(per_axis_cls)
    all_axis = np.concatenate(
        [np.full(per_axis_u[a].shape[0], a + 1, dtype=np.uint8) for a in range(d)]
    )
    order = np.lexsort((all_axis, all_u))
    return EdgeTable(
        spec,
        all_u[order].astype(np.int32),
        all_v[order].astype(np.int32),
        all_axis[order],
        all_cls[order],
    )


def face_vertices(spec: LatticeSpec, axis: int, sign: int) -> np.ndarray:
    """Vertices of the box face at coordinate +L (sign=+1) or -L (sign=-1).

    Only defined for free boundaries and for "vertical" axes 1..s (faces that
    the defect plane meets).  Each face has (2L+1)^(d-1) vertices.
    """
    if spec.boundary != "free":
        raise ValueError("faces are only defined for free boundaries")
    if not 1 <= axis <= spec.s:
        raise ValueError(f"face axis must be in 1..s={spec.s}, got {axis}")
    if sign not in (-1, 1):
        raise ValueError(f"sign must be +1 or -1, got {sign}")
    target = spec.n_side - 1 if sign > 0 else 0
    coords = vertex_coords(spec, np.arange(spec.num_vertices, dtype=np.int64))
    return np.flatnonzero(coords[:, axis - 1] == target).astype(np.int32)


def face_bits(spec: LatticeSpec, axes) -> np.ndarray:
    """uint8 per-vertex flag mask: bit 2i set on face A_{+axes[i]}, bit 2i+1
    on A_{-axes[i]}.  Up to four axes fit in the mask."""
    axes = list(axes)
    if len(axes) > 4:
        raise ValueError("at most 4 face-pair axes fit the flag mask")
    bits = np.zeros(spec.num_vertices, dtype=np.uint8)
    for i, a in enumerate(axes):
        bits[face_vertices(spec, a, +1)] |= np.uint8(1 << (2 * i))
        bits[face_vertices(spec, a, -1)] |= np.uint8(1 << (2 * i + 1))
    return bits


@lru_cache(maxsize=32)
def _neighbor_tables_cached(spec: LatticeSpec):
    table = build_edge_table(spec)
    nv, d = spec.num_vertices, spec.d
    nbr = np.full((nv, 2 * d), -1, dtype=np.int32)
    eid = np.full((nv, 2 * d), -1, dtype=np.int32)
    ax = table.axis.astype(np.int64)
    kpos = 2 * (ax - 1)       # slot for +axis direction at u
    kneg = 2 * (ax - 1) + 1   # slot for -axis direction at v
    edge_ids = np.arange(table.num_edges, dtype=np.int32)
    nbr[table.u, kpos] = table.v
    eid[table.u, kpos] = edge_ids
    nbr[table.v, kneg] = table.u
    eid[table.v, kneg] = edge_ids
    return table, nbr, eid


def neighbor_tables(spec: LatticeSpec):
    """(EdgeTable, nbr, eid): per-vertex neighbour and edge-id arrays.

    nbr[v, 2(a-1)] is the +axis-a neighbour (-1 if absent), nbr[v, 2(a-1)+1]
    the -axis-a neighbour; eid holds the canonical edge index of that bond.
    Periodic L=1 boxes have doubled bonds; the slot then keeps the last one,
    which is why cluster growth (the only consumer) requires free boundaries.
    """
    if spec.boundary != "free":
        raise ValueError("neighbor tables are built for free boundaries only")
    return _neighbor_tables_cached(spec)


def boundary_mask(spec: LatticeSpec) -> np.ndarray:
    """Boolean mask of vertices on the topological boundary of the free box."""
    if spec.boundary != "free":
        raise ValueError("boundary mask is only defined for free boundaries")
    coords = vertex_coords(spec, np.arange(spec.num_vertices, dtype=np.int64))
    return ((coords == 0) | (coords == spec.n_side - 1)).any(axis=1)
