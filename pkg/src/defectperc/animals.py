"""Exact census of rooted edge animals with defect-plane refinement.

An edge animal is a finite connected edge set in Z^d whose vertex set
contains the origin; the bare origin is the 0-edge animal.  Each animal is
classified by

    v : vertices        n : edges        m : edges in the defect plane
    t : bulk perimeter  r : plane perimeter

where the perimeter is every lattice edge incident with the animal but not
in it.  Contact edges (perimeter edges with both endpoints in the animal)
are included in t and r and tracked separately as k for the incidence
identities.  Exact integer counts per class give closed-form small-cluster
probabilities, used as an independent oracle for the Monte Carlo samplers,
and the generating polynomials entering the concatenation bound.

Counts grow like (2d)^n: the d=3 default cap of 8 edges is a few million
animals and takes on the order of a minute.  The enumerator refuses caps
past a per-dimension guard unless forced.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

from . import runmeta
from .lattice import LatticeSpec, neighbor_tables, origin_index

DEFAULT_CAP = {2: 10, 3: 8, 4: 6}
GUARD_CAP = {2: 14, 3: 9, 4: 7}


class CapExceededError(ValueError):
    pass


class CoverageError(ValueError):
    pass


@dataclass
class AnimalCensus:
    """Exact animal counts keyed by class.

    entries maps (v, n, m, t, r) to the number of rooted animals in that
    class.  Enumerated censuses additionally carry entries_full keyed
    (v, n, m, t, r, k) with the contact count k, which the identity audit
    and the cycle census need; censuses loaded from CSV have only the
    marginal but keep the precomputed vertex-coverage bound.
    """

    d: int
    s: int
    max_edges: int
    entries: dict
    covered_v: int
    entries_full: dict | None = None
    meta: dict = field(default_factory=dict)

    def total_animals(self) -> int:
        return sum(self.entries.values())

    def edge_count_totals(self) -> dict:
        out = {}
        for (v, n, m, t, r), c in self.entries.items():
            out[n] = out.get(n, 0) + c
        return out

    def homogeneous_marginal(self) -> dict:
        """(n, total perimeter) -> count, forgetting the defect split."""
        out = {}
        for (v, n, m, t, r), c in self.entries.items():
            key = (n, t + r)
            out[key] = out.get(key, 0) + c
        return out

    def cycle_contact_census(self) -> dict:
        """(n, cycles, contacts) -> count; needs an enumerated census."""
        self._require_full("cycle-contact census")
        out = {}
        for (v, n, m, t, r, k), c in self.entries_full.items():
            key = (n, n - v + 1, k)
            out[key] = out.get(key, 0) + c
        return out

    def _require_full(self, what: str) -> None:
        if self.entries_full is None:
            raise ValueError(
                f"{what} needs contact counts, which the CSV format does not "
                "carry; use a census enumerated in this process"
            )

    def save_csv(self, path: str) -> None:
        parent = os.path.dirname(os.path.abspath(path))
        os.makedirs(parent, exist_ok=True)
        with open(path, "w") as fh:
            fh.write(f"# {runmeta.FORMAT_CENSUS}\n")
            fh.write(
                f"# d={self.d} s={self.s} max_edges={self.max_edges} "
                f"covered_v={self.covered_v}\n"
            )
            fh.write("v,n,m,t,r,count\n")
            for key in sorted(self.entries):
                v, n, m, t, r = key
                fh.write(f"{v},{n},{m},{t},{r},{self.entries[key]}\n")

    @classmethod
    def load_csv(cls, path: str) -> "AnimalCensus":
        header = {}
        entries = {}
        with open(path) as fh:
            first = fh.readline().strip()
            if first != f"# {runmeta.FORMAT_CENSUS}":
                raise ValueError(f"{path}: not a {runmeta.FORMAT_CENSUS} file")
            for token in fh.readline().lstrip("#").split():
                key, _, val = token.partition("=")
                header[key] = int(val)
            cols = fh.readline().strip()
            if cols != "v,n,m,t,r,count":
                raise ValueError(f"{path}: unexpected column header {cols!r}")
            for line in fh:
                v, n, m, t, r, c = (int(x) for x in line.split(","))
                entries[(v, n, m, t, r)] = c
        return cls(
            d=header["d"],
            s=header["s"],
            max_edges=header["max_edges"],
            covered_v=header["covered_v"],
            entries=entries,
            entries_full=None,
        )


def _estimated_nodes(d: int, cap: int) -> float:
    # coarse growth estimate, for the refusal message only
    return (2.0 * d) ** (cap + 1)


def enumerate_census(d: int, s: int, max_edges: int | None = None,
                     force: bool = False) -> AnimalCensus:
    """Enumerate every rooted edge animal with at most max_edges edges.

    Exactly-once enumeration by ordered growth: starting from the bare
    origin, each recursion level extends the animal only by candidate
    perimeter edges at or after the position where the parent level
    stopped, so every animal is reached through exactly one addition
    order.  Perimeter and contact counters update incrementally as edges
    and vertices join.
    """
    if max_edges is None:
        max_edges = DEFAULT_CAP.get(d, 6)
    guard = GUARD_CAP.get(d, 6)
    if max_edges < 0:
        raise ValueError("max_edges must be >= 0")
    if max_edges > guard and not force:
        raise CapExceededError(
            f"cap {max_edges} exceeds the d={d} guard ({guard}); roughly "
            f"{_estimated_nodes(d, max_edges):.1e} animals, pass force=True "
            "if you really want this"
        )

    # a box of half-width cap+1 contains every animal plus its perimeter
    spec = LatticeSpec(d=d, s=s, L=max_edges + 1, boundary="free")
    table, nbr, eid = neighbor_tables(spec)
    nv = spec.num_vertices
    deg = 2 * d
    eu = table.u.tolist()
    ev = table.v.tolist()
    edef = [int(c) for c in table.cls]
    nbr_l = nbr.tolist()
    eid_l = eid.tolist()
    # incident (edge, other endpoint, is-defect) triples per vertex
    inc = []
    for x in range(nv):
        row = []
        for slot in range(deg):
            e = eid_l[x][slot]
            if e >= 0:
                row.append((e, nbr_l[x][slot], edef[e]))
        inc.append(tuple(row))

    origin = origin_index(spec)
    vertex_in = bytearray(nv)
    edge_in = bytearray(table.num_edges)
    census = {}
    census_get = census.get

    vertex_in[origin] = 1
    t0 = r0 = 0
    root_cands = []
    for e, y, fd in inc[origin]:
        if fd:
            r0 += 1
        else:
            t0 += 1
        root_cands.append(e)
    census[(1, 0, 0, t0, r0, 0)] = 1

    def rec(cands, v, n, m, t, r, k):
        n2 = n + 1
        deeper = n2 < max_edges
        for idx in range(len(cands)):
            e = cands[idx]
            a = eu[e]
            b = ev[e]
            ed = edef[e]
            if vertex_in[a]:
                newv = -1 if vertex_in[b] else b
            else:
                newv = a
            m2 = m + ed
            if ed:
                t2, r2 = t, r - 1
            else:
                t2, r2 = t - 1, r
            edge_in[e] = 1
            if newv >= 0:
                vertex_in[newv] = 1
                k2 = k
                fresh = []
                for f, y, fd in inc[newv]:
                    if f == e:
                        continue
                    if vertex_in[y]:
                        k2 += 1
                    elif fd:
                        r2 += 1
                        fresh.append(f)
                    else:
                        t2 += 1
                        fresh.append(f)
                key = (v + 1, n2, m2, t2, r2, k2)
                census[key] = census_get(key, 0) + 1
                if deeper:
                    rec(cands[idx + 1:] + fresh, v + 1, n2, m2, t2, r2, k2)
                vertex_in[newv] = 0
            else:
                key = (v, n2, m2, t2, r2, k - 1)
                census[key] = census_get(key, 0) + 1
                if deeper:
                    rec(cands[idx + 1:], v, n2, m2, t2, r2, k - 1)
            edge_in[e] = 0

    if max_edges >= 1:
        rec(root_cands, 1, 0, 0, t0, r0, 0)

    marginal = {}
    for (v, n, m, t, r, k), c in census.items():
        key = (v, n, m, t, r)
        marginal[key] = marginal.get(key, 0) + c
    covered = _coverage_bound(census, max_edges)
    meta = {
        "kind": "animal-census",
        "d": d,
        "s": s,
        "max_edges": max_edges,
        "created": runmeta.created_iso(),
    }
    meta["config_hash"] = runmeta.config_hash(meta)
    return AnimalCensus(
        d=d, s=s, max_edges=max_edges, entries=marginal,
        covered_v=covered, entries_full=census, meta=meta,
    )


def _coverage_bound(full: dict, cap: int) -> int:
    """Largest v whose animals all fit within the edge cap.

    A class with v vertices, exactly cap edges, and a contact witnesses a
    (v, cap+1)-edge animal missing from the census, so that v and (by
    monotonicity of the maximal edge count in v) everything above it is
    uncovered.  Independently no v above cap+1 fits, connectivity needing
    v-1 edges.
    """
    uncovered = [v for (v, n, m, t, r, k) in full if n == cap and k >= 1]
    limit = min(uncovered) - 1 if uncovered else cap + 1
    return min(limit, cap + 1)


# -- naive reference enumeration ---------------------------------------------


def enumerate_naive(d: int, s: int, max_edges: int) -> AnimalCensus:
    """Breadth-first reference enumeration with set-based deduplication.

    Grows animals one perimeter edge at a time and dedupes on the frozen
    edge set, then classifies each animal from scratch.  Exponentially
    slower than enumerate_census (every animal is found n! ways) so it is
    capped at 5 edges; its only job is to validate the fast enumerator on
    small caps.
    """
    if max_edges > 5:
        raise CapExceededError("naive reference enumeration is capped at 5 edges")
    spec = LatticeSpec(d=d, s=s, L=max_edges + 1, boundary="free")
    table, nbr, eid = neighbor_tables(spec)
    nv = spec.num_vertices
    deg = 2 * d
    eu = table.u.tolist()
    ev = table.v.tolist()
    edef = [int(c) for c in table.cls]
    inc = []
    for x in range(nv):
        row = []
        for slot in range(deg):
            e = int(eid[x, slot])
            if e >= 0:
                row.append(e)
        inc.append(tuple(row))
    origin = origin_index(spec)

    def vertices_of(edges):
        vs = {origin}
        for e in edges:
            vs.add(eu[e])
            vs.add(ev[e])
        return vs

    def classify(edges):
        vs = vertices_of(edges)
        perim = set()
        for x in vs:
            for f in inc[x]:
                if f not in edges:
                    perim.add(f)
        t = r = k = m = 0
        for f in perim:
            if edef[f]:
                r += 1
            else:
                t += 1
            if eu[f] in vs and ev[f] in vs:
                k += 1
        for e in edges:
            m += edef[e]
        return (len(vs), len(edges), m, t, r, k)

    census = {}
    level = {frozenset()}
    empty_key = classify(frozenset())
    census[empty_key] = 1
    for n in range(1, max_edges + 1):
        nxt = set()
        for animal in level:
            vs = vertices_of(animal)
            for x in vs:
                for f in inc[x]:
                    if f not in animal:
                        nxt.add(animal | {f})
        for animal in nxt:
            key = classify(animal)
            census[key] = census.get(key, 0) + 1
        level = nxt

    marginal = {}
    for (v, n, m, t, r, k), c in census.items():
        key = (v, n, m, t, r)
        marginal[key] = marginal.get(key, 0) + c
    return AnimalCensus(
        d=d, s=s, max_edges=max_edges, entries=marginal,
        covered_v=_coverage_bound(census, max_edges), entries_full=census,
        meta={"kind": "animal-census-naive", "d": d, "s": s,
              "max_edges": max_edges},
    )


# -- exact probabilities and polynomials --------------------------------------


def _check_params(p: float, sigma: float) -> None:
    if not (0.0 <= p <= 1.0 and 0.0 <= sigma <= 1.0):
        raise ValueError("p and sigma must lie in [0, 1]")


def exact_edge_pmf(census: AnimalCensus, p: float, sigma: float, n: int) -> float:
    """P(origin cluster has exactly n edges), exact from the census.

    Sums count * p^(n-m) sigma^m (1-p)^t (1-sigma)^r over the n-edge
    classes with exact summation of the monomials.
    """
    _check_params(p, sigma)
    if n < 0 or n > census.max_edges:
        raise ValueError(
            f"edge count {n} outside the census cap {census.max_edges}"
        )
    q = 1.0 - p
    tau = 1.0 - sigma
    terms = []
    for (v, nn, m, t, r), c in census.entries.items():
        if nn != n:
            continue
        terms.append(c * p ** (n - m) * sigma ** m * q ** t * tau ** r)
    return math.fsum(terms)


def exact_vertex_pmf(census: AnimalCensus, p: float, sigma: float, v: int) -> float:
    """P(origin cluster has exactly v vertices), exact from the census.

    Only valid for v up to census.covered_v: larger clusters have
    realizations with more edges than the cap, so the sum would silently
    miss mass.
    """
    _check_params(p, sigma)
    if v < 1:
        raise ValueError("vertex count must be >= 1")
    if v > census.covered_v:
        raise CoverageError(
            f"vertex count {v} not covered: census cap {census.max_edges} "
            f"only covers v <= {census.covered_v}"
        )
    q = 1.0 - p
    tau = 1.0 - sigma
    terms = []
    for (vv, n, m, t, r), c in census.entries.items():
        if vv != v:
            continue
        terms.append(c * p ** (n - m) * sigma ** m * q ** t * tau ** r)
    return math.fsum(terms)


def partition_function_edges(census: AnimalCensus, n: int,
                             x: float, y: float, z: float) -> float:
    """Z_n(x, y, z) = sum over n-edge animals of x^t y^r z^m."""
    if n < 0 or n > census.max_edges:
        raise ValueError(
            f"edge count {n} outside the census cap {census.max_edges}"
        )
    terms = []
    for (v, nn, m, t, r), c in census.entries.items():
        if nn != n:
            continue
        terms.append(c * x ** t * y ** r * z ** m)
    return math.fsum(terms)


def partition_function_vertices(census: AnimalCensus, v: int,
                                a: float, x: float, y: float, z: float) -> float:
    """Y_v(a, x, y, z) = sum over v-vertex animals of a^n x^t y^r z^m."""
    if v < 1:
        raise ValueError("vertex count must be >= 1")
    if v > census.covered_v:
        raise CoverageError(
            f"vertex count {v} not covered: census cap {census.max_edges} "
            f"only covers v <= {census.covered_v}"
        )
    terms = []
    for (vv, n, m, t, r), c in census.entries.items():
        if vv != v:
            continue
        terms.append(c * a ** n * x ** t * y ** r * z ** m)
    return math.fsum(terms)


def pmf_from_partition(census: AnimalCensus, p: float, sigma: float,
                       n: int) -> float:
    """Edge pmf factored through Z_n, for cross-checking the direct sum."""
    _check_params(p, sigma)
    if p in (0.0, 1.0) or sigma in (0.0, 1.0):
        # the factored form divides by p and sigma; fall back
        return exact_edge_pmf(census, p, sigma, n)
    z = (sigma / p) if p > 0 else 0.0
    val = partition_function_edges(census, n, 1.0 - p, 1.0 - sigma, z)
    return p ** n * val


def identity_audit(census: AnimalCensus) -> dict:
    """Check the incidence identities on every enumerated class.

    For each (v, n, m, t, r, k): the cyclomatic number c = n - v + 1 is
    a nonnegative integer, the total incidence satisfies
    2 d v = 2 n + (t + r) + k, and the perimeter total equals
    2 d + 2 (d - 1) n - k - 2 d c.  Returns counts and the offending
    classes, empty when everything passes.
    """
    census._require_full("identity audit")
    d = census.d
    checked = 0
    bad = []
    for (v, n, m, t, r, k), c in census.entries_full.items():
        checked += 1
        cyc = n - v + 1
        ok = (
            cyc >= 0
            and m <= n
            and 2 * d * v == 2 * n + (t + r) + k
            and (t + r) == 2 * d + 2 * (d - 1) * n - k - 2 * d * cyc
        )
        if not ok:
            bad.append((v, n, m, t, r, k))
    return {
        "classes_checked": checked,
        "violations": len(bad),
        "bad_classes": bad,
        "passed": not bad,
    }


def concatenation_factor(d: int, s: int, x: float, y: float, z: float) -> float:
    """Geometric prefactor lambda(x, y, z) in the concatenation bound.

    phi(x, y) = sum_{i=0}^{2d-2} sum_{j=0}^{2s} x^-i y^-j accounts for the
    perimeter edges lost at the welded face, and the trailing factor for
    the class of the two bridge edges.
    """
    if min(x, y, z) <= 0:
        raise ValueError("weights must be positive")
    phi = math.fsum(
        x ** (-i) * y ** (-j)
        for i in range(2 * d - 1)
        for j in range(2 * s + 1)
    )
    return phi * (x * x + x * y / z + (y * y) / (z * z))


def supermult_audit(census: AnimalCensus, n1: int, n2: int,
                    x: float, y: float, z: float) -> dict:
    """Check Z_n1 Z_n2 <= (n1+n2+1)^2 (n1+n2+3) lambda Z_{n1+n2+2}.

    Concatenating an n1-animal, a two-edge bridge through the defect
    direction, and a translated n2-animal produces an (n1+n2+2)-animal;
    the combinatorial prefactor bounds the multiplicity of the map and
    lambda the perimeter weight lost at the weld.
    """
    if n1 < 0 or n2 < 0:
        raise ValueError("edge counts must be >= 0")
    ntot = n1 + n2 + 2
    if ntot > census.max_edges:
        raise ValueError(
            f"n1 + n2 + 2 = {ntot} exceeds the census cap {census.max_edges}"
        )
    lam = concatenation_factor(census.d, census.s, x, y, z)
    z1 = partition_function_edges(census, n1, x, y, z)
    z2 = partition_function_edges(census, n2, x, y, z)
    ztot = partition_function_edges(census, ntot, x, y, z)
    lhs = z1 * z2
    pref = (n1 + n2 + 1) ** 2 * (n1 + n2 + 3)
    rhs = pref * lam * ztot
    return {
        "n1": n1,
        "n2": n2,
        "weights": (x, y, z),
        "lhs": lhs,
        "rhs": rhs,
        "lambda": lam,
        "prefactor": pref,
        "holds": lhs <= rhs * (1 + 1e-12),
    }
