"""numba kernels for the Monte Carlo hot loops.

These mirror the readable pure-Python implementations in `sampler` and
`observables`; the tests assert exact agreement between the two routes.
All randomness comes from `_rng` streams keyed by (seed, realization index),
so results are bit-identical regardless of chunking or thread count.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from ._rng import next_u64, next_uniform, stream_state

_U1 = np.uint64(1)


@njit(cache=True, nogil=True)
def _find(parent, x):
    # path halving
    while parent[x] != x:
        parent[x] = parent[parent[x]]
        x = parent[x]
    return x


@njit(cache=True, nogil=True)
def _union_mark(parent, size, flags, a, b, out, row, thresh, n_pairs, remaining):
    """Union a,b; on each newly crossed face pair record `thresh`.

    flags holds one 2-bit group per tracked face pair at each root; a pair is
    crossed when its group becomes 0b11.  Returns the updated count of pairs
    still uncrossed.
    """
    ra = _find(parent, a)
    rb = _find(parent, b)
    if ra == rb:
        return remaining
    if size[ra] < size[rb]:
        ra, rb = rb, ra
    parent[rb] = ra
    size[ra] += size[rb]
    old = flags[ra]
    new = old | flags[rb]
    flags[ra] = new
    if new != old:
        # a pair can only newly cross when the merge changed the root's mask
        for j in range(n_pairs):
            if out[row, j] > thresh:  # sentinel: not crossed yet
                mask = np.uint8(3 << (2 * j))
                if new & mask == mask:
                    out[row, j] = thresh
                    remaining -= 1
    return remaining


@njit(cache=True, nogil=True)
def sweep_chunk(
    bulk_u, bulk_v, def_u, def_v, vertex_bits, n_pairs, n_vertices,
    p, seed, r_lo, r_hi, out,
):
    """Microcanonical sweep for realizations r_lo..r_hi-1.

    Per realization: open each bulk bond independently with probability p
    (always drawing one uniform per bulk bond, so runs at different p with
    the same seed are monotonically coupled), then insert the defect bonds
    in Fisher-Yates random order.  out[r - r_lo, j] receives the number of
    defect insertions after which face pair j first crossed; 0 means the
    bulk bonds alone crossed it, and len(defect)+1 means it never crossed.
    """
    nb = bulk_u.shape[0]
    nd = def_u.shape[0]
    sentinel = nd + 1
    parent = np.empty(n_vertices, np.int32)
    size = np.empty(n_vertices, np.int32)
    flags = np.empty(n_vertices, np.uint8)
    perm = np.empty(nd, np.int64)
    for r in range(r_lo, r_hi):
        row = r - r_lo
        state = stream_state(seed, np.uint64(r))
        for i in range(n_vertices):
            parent[i] = i
            size[i] = 1
            flags[i] = vertex_bits[i]
        remaining = n_pairs
        for j in range(n_pairs):
            out[row, j] = sentinel
        for e in range(nb):
            state, u = next_uniform(state)
            if u < p:
                remaining = _union_mark(
                    parent, size, flags, bulk_u[e], bulk_v[e],
                    out, row, 0, n_pairs, remaining,
                )
        if remaining > 0:
            for i in range(nd):
                perm[i] = i
            for i in range(nd - 1, 0, -1):
                state, z = next_u64(state)
                j = np.int64(z % np.uint64(i + 1))
                tmp = perm[i]
                perm[i] = perm[j]
                perm[j] = tmp
            for k in range(nd):
                e = perm[k]
                remaining = _union_mark(
                    parent, size, flags, def_u[e], def_v[e],
                    out, row, k + 1, n_pairs, remaining,
                )
                if remaining == 0:
                    break


@njit(cache=True, nogil=True)
def cluster_chunk(
    nbr, eid, cls, bmask, origin, p, sigma, seed, i_lo, i_hi,
    out_v, out_e, out_b,
):
    """Grow the open cluster of the origin for samples i_lo..i_hi-1.

    Bond states are sampled lazily on first touch (defect bonds at sigma,
    bulk at p).  Growth stops when the cluster exhausts or reaches a
    boundary vertex (out_b = 1); sizes are as of the stop.
    """
    nv = nbr.shape[0]
    deg = nbr.shape[1]
    ne = cls.shape[0]
    vmark = np.zeros(nv, np.int64)
    emark = np.zeros(ne, np.int64)
    stack = np.empty(nv, np.int32)
    epoch = np.int64(0)
    for i in range(i_lo, i_hi):
        epoch += 1
        state = stream_state(seed, np.uint64(i))
        nverts = np.int64(1)
        nedges = np.int64(0)
        touched = np.uint8(0)
        vmark[origin] = epoch
        stack[0] = origin
        sp = 1
        while sp > 0 and touched == 0:
            sp -= 1
            x = stack[sp]
            for k in range(deg):
                y = nbr[x, k]
                if y < 0:
                    continue
                e = eid[x, k]
                if emark[e] == epoch:
                    continue
                emark[e] = epoch
                state, u = next_uniform(state)
                if cls[e] == 1:
                    isopen = u < sigma
                else:
                    isopen = u < p
                if isopen:
                    nedges += 1
                    if vmark[y] != epoch:
                        vmark[y] = epoch
                        nverts += 1
                        if bmask[y]:
                            touched = np.uint8(1)
                            break
                        stack[sp] = y
                        sp += 1
        row = i - i_lo
        out_v[row] = nverts
        out_e[row] = nedges
        out_b[row] = touched


@njit(cache=True, nogil=True)
def stencil_chunk(
    nbr, eid, cls, bmask, origin, p_list, s_list, seed, i_lo, i_hi,
    out_v, out_b,
):
    """Coupled cluster growth at several (p, sigma) points per sample.

    One uniform per (sample, bond), shared by every run of that sample
    (common random numbers), so differences between runs estimate parameter
    derivatives with coupled noise and the per-sample indicators are
    monotone in (p, sigma).
    """
    nv = nbr.shape[0]
    deg = nbr.shape[1]
    ne = cls.shape[0]
    nruns = p_list.shape[0]
    vmark = np.zeros(nv, np.int64)
    edmark = np.zeros(ne, np.int64)
    umark = np.zeros(ne, np.int64)
    ucache = np.zeros(ne, np.float64)
    stack = np.empty(nv, np.int32)
    for i in range(i_lo, i_hi):
        base = np.int64(i - i_lo + 1)
        state = stream_state(seed, np.uint64(i))
        for run in range(nruns):
            p = p_list[run]
            sg = s_list[run]
            runep = base * nruns + run
            nverts = np.int64(1)
            touched = np.uint8(0)
            vmark[origin] = runep
            stack[0] = origin
            sp = 1
            while sp > 0 and touched == 0:
                sp -= 1
                x = stack[sp]
                for k in range(deg):
                    y = nbr[x, k]
                    if y < 0:
                        continue
                    e = eid[x, k]
                    if edmark[e] == runep:
                        continue
                    edmark[e] = runep
                    if umark[e] != base:
                        umark[e] = base
                        state, u = next_uniform(state)
                        ucache[e] = u
                    if cls[e] == 1:
                        isopen = ucache[e] < sg
                    else:
                        isopen = ucache[e] < p
                    if isopen and vmark[y] != runep:
                        vmark[y] = runep
                        nverts += 1
                        if bmask[y]:
                            touched = np.uint8(1)
                            break
                        stack[sp] = y
                        sp += 1
            row = i - i_lo
            out_v[row, run] = nverts
            out_b[row, run] = touched
