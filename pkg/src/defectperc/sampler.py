"""Microcanonical crossing sweeps and the binomial convolution to canonical
crossing curves.

The estimator pipeline is the standard two-stage one: per realization, open
bulk bonds at density p, then insert the defect bonds one at a time in
random order, recording after how many insertions the cluster first joins
the two opposite "vertical" box faces.  Averaging the indicator over
realizations gives the microcanonical curve Q_p(s), and a binomial
convolution in s turns it into the canonical crossing probability
Q_L(p, sigma) for every sigma at once.

The homogeneous baseline is the same machinery with every bond treated as
sweepable and the convolution taken over the total bond count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _kernels, runmeta
from ._rng import RNG_FAMILY, PyStream
from .lattice import LatticeSpec, EdgeTable, build_edge_table, face_bits

TRUNCATION_MIN_S = 10_000
TRUNCATION_HALF_WIDTH_SD = 8.0


class DisjointSetForest:
    """Union-find with size balancing, path compression, and face flags.

    Reference implementation of the sweep's merge step: `flags` carries one
    2-bit group per tracked face pair, OR-combined on union; a face pair is
    crossed once some root's group reads 0b11.  The numba kernels replicate
    this logic; tests assert exact agreement.
    """

    def __init__(self, n: int, vertex_bits=None):
        self.parent = np.arange(n, dtype=np.int64)
        self.size = np.ones(n, dtype=np.int64)
        if vertex_bits is None:
            vertex_bits = np.zeros(n, dtype=np.uint8)
        self.flags = np.asarray(vertex_bits, dtype=np.uint8).copy()

    def find(self, x: int) -> int:
        parent = self.parent
        root = x
        while parent[root] != root:
            root = parent[root]
        while parent[x] != root:  # compress
            parent[x], x = root, parent[x]
        return int(root)

    def union(self, a: int, b: int) -> int:
        """Merge the sets of a and b; returns the surviving root."""
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return ra
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]
        self.flags[ra] |= self.flags[rb]
        return ra

    def crossed(self, pair: int = 0) -> bool:
        mask = 3 << (2 * pair)
        roots = self.parent == np.arange(self.parent.shape[0])
        return bool(((self.flags[roots] & mask) == mask).any())

    def root_sizes_consistent(self) -> bool:
        roots = self.parent == np.arange(self.parent.shape[0])
        return int(self.size[roots].sum()) == self.parent.shape[0]


# ---------------------------------------------------------------------------
# curve containers
# ---------------------------------------------------------------------------


@dataclass
class MicrocanonicalCurve:
    """counts[s] = number of (realization, face pair) samples whose crossing
    threshold is <= s defect insertions; q = counts / total samples."""

    counts: np.ndarray  # int64, length S+1
    realizations: int
    face_pairs: int
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if self.counts.ndim != 1 or self.counts.shape[0] < 1:
            raise ValueError("counts must be a 1-d array of length S+1")
        if np.any(np.diff(self.counts) < 0):
            raise ValueError("counts must be non-decreasing in s")
        total = self.realizations * self.face_pairs
        if self.counts[-1] > total:
            raise ValueError("counts exceed the number of samples")

    @property
    def S(self) -> int:
        return int(self.counts.shape[0] - 1)

    @property
    def q(self) -> np.ndarray:
        """Microcanonical crossing estimates Q_hat(s), s = 0..S."""
        return self.counts / float(self.realizations * self.face_pairs)

    def to_payload(self) -> dict:
        return {
            "format": runmeta.FORMAT_MICRO,
            "meta": dict(self.meta),
            "counts": self.counts.tolist(),
        }

    def save(self, path: str) -> None:
        runmeta.write_json(path, self.to_payload())

    @classmethod
    def from_payload(cls, payload: dict) -> "MicrocanonicalCurve":
        meta = payload["meta"]
        return cls(
            counts=np.asarray(payload["counts"], dtype=np.int64),
            realizations=int(meta["realizations"]),
            face_pairs=int(meta.get("face_pairs", 1)),
            meta=meta,
        )

    @classmethod
    def load(cls, path: str) -> "MicrocanonicalCurve":
        return cls.from_payload(runmeta.read_json(path, runmeta.FORMAT_MICRO))


@dataclass
class CanonicalCurve:
    """Crossing probability on a density grid, with binomial-proportion
    standard errors.  For defect sweeps the grid is sigma at fixed p; for
    homogeneous sweeps it is the bond density p itself."""

    sigma_grid: np.ndarray
    values: np.ndarray
    stderr: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.sigma_grid = np.asarray(self.sigma_grid, dtype=np.float64)
        self.values = np.asarray(self.values, dtype=np.float64)
        self.stderr = np.asarray(self.stderr, dtype=np.float64)
        if not (self.sigma_grid.shape == self.values.shape == self.stderr.shape):
            raise ValueError("grid, values, and stderr must have equal shapes")
        if np.any(np.diff(self.sigma_grid) <= 0):
            raise ValueError("density grid must be strictly increasing")

    def validate_monotone(self, tol: float = 1e-12) -> None:
        """The convolution of a non-decreasing Q_hat is non-decreasing; any
        violation beyond float round-off means corrupted input."""
        drop = np.diff(self.values).min(initial=0.0)
        if drop < -tol:
            raise ValueError(f"canonical curve decreases by {-drop:g} (> {tol:g})")

    def to_payload(self) -> dict:
        return {
            "format": runmeta.FORMAT_CANONICAL,
            "meta": dict(self.meta),
            "sigma_grid": self.sigma_grid.tolist(),
            "values": self.values.tolist(),
            "stderr": self.stderr.tolist(),
        }

    def save(self, path: str) -> None:
        runmeta.write_json(path, self.to_payload())

    @classmethod
    def from_payload(cls, payload: dict) -> "CanonicalCurve":
        return cls(
            sigma_grid=np.asarray(payload["sigma_grid"], dtype=np.float64),
            values=np.asarray(payload["values"], dtype=np.float64),
            stderr=np.asarray(payload["stderr"], dtype=np.float64),
            meta=payload["meta"],
        )

    @classmethod
    def load(cls, path: str) -> "CanonicalCurve":
        return cls.from_payload(runmeta.read_json(path, runmeta.FORMAT_CANONICAL))


class MicrocanonicalAccumulator:
    """Threshold histogram; `finalize` produces the prefix-summed curve."""

    def __init__(self, S: int, realizations_expected: int | None = None, meta=None):
        if S < 0:
            raise ValueError("S must be >= 0")
        self.S = S
        self.hist = np.zeros(S + 2, dtype=np.int64)  # slot S+1 = never crossed
        self.n_added = 0
        self.meta = dict(meta or {})
        self.realizations_expected = realizations_expected

    def add(self, s_cross) -> None:
        if s_cross is None:
            self.hist[self.S + 1] += 1
        else:
            s = int(s_cross)
            if not 0 <= s <= self.S:
                raise ValueError(f"threshold {s} outside 0..S={self.S}")
            self.hist[s] += 1
        self.n_added += 1

    def finalize(self, face_pairs: int = 1) -> MicrocanonicalCurve:
        if self.n_added == 0:
            raise ValueError("no realizations accumulated")
        counts = np.cumsum(self.hist[: self.S + 1])
        meta = dict(self.meta)
        meta.setdefault("realizations", self.n_added // face_pairs)
        return MicrocanonicalCurve(
            counts=counts,
            realizations=meta["realizations"],
            face_pairs=face_pairs,
            meta=meta,
        )


def accumulate(acc: MicrocanonicalAccumulator, s_cross) -> MicrocanonicalAccumulator:
    """Record one realization's crossing threshold (None = never crossed)."""
    acc.add(s_cross)
    return acc


# ---------------------------------------------------------------------------
# single-realization reference path (pure Python)
# ---------------------------------------------------------------------------


def _faces_to_bits(table: EdgeTable, faces) -> np.ndarray:
    if isinstance(faces, np.ndarray) and faces.dtype == np.uint8:
        return faces
    plus, minus = faces
    bits = np.zeros(table.spec.num_vertices, dtype=np.uint8)
    bits[np.asarray(plus)] |= 1
    bits[np.asarray(minus)] |= 2
    return bits


def sweep_thresholds(table: EdgeTable, faces, bulk_open, defect_order):
    """Replay a fully specified realization through the union-find.

    bulk_open: iterable of bulk-edge positions (into table.bulk_*) to open
    before the sweep; defect_order: permutation of 0..S-1 giving insertion
    order.  Returns the crossing threshold (int) or None.  This is the
    auditable core of `run_realization`; tests drive it with hand-built
    configurations.
    """
    bits = _faces_to_bits(table, faces)
    forest = DisjointSetForest(table.spec.num_vertices, bits)

    def crossed_after(a, b):
        root = forest.union(a, b)
        return forest.flags[root] & 3 == 3

    hit = False
    for e in bulk_open:
        if crossed_after(int(table.bulk_u[e]), int(table.bulk_v[e])):
            hit = True
    if hit:
        return 0
    for k, e in enumerate(defect_order):
        if crossed_after(int(table.defect_u[e]), int(table.defect_v[e])):
            return k + 1
    return None


def run_realization(table: EdgeTable, faces, p: float, rng: PyStream):
    """One microcanonical realization (readable reference path).

    Draws exactly one uniform per bulk bond in canonical order (so runs at
    different p from the same stream are monotonically coupled), then a
    Fisher-Yates shuffle of the defect bonds.  Returns the number of defect
    insertions at which the tracked face pair first crossed, or None.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must be in [0, 1], got {p}")
    nb = table.num_bulk
    bulk_open = [e for e in range(nb) if rng.uniform() < p]
    order = list(range(table.num_defect))
    rng.shuffle(order)
    return sweep_thresholds(table, faces, bulk_open, order)


def homogeneous_sweep(table: EdgeTable, faces, rng: PyStream):
    """One homogeneous realization: all bonds in one random insertion order.

    Returns the number of bond insertions at which the face pair first
    crossed (or None); the convolution over the total bond count then gives
    the homogeneous crossing curve R_L(p).
    """
    bits = _faces_to_bits(table, faces)
    forest = DisjointSetForest(table.spec.num_vertices, bits)
    order = list(range(table.num_edges))
    rng.shuffle(order)
    for k, e in enumerate(order):
        root = forest.union(int(table.u[e]), int(table.v[e]))
        if forest.flags[root] & 3 == 3:
            return k + 1
    return None


# ---------------------------------------------------------------------------
# batch drivers (numba kernels, thread parallel, deterministic)
# ---------------------------------------------------------------------------


def _run_threshold_chunks(bulk_u, bulk_v, def_u, def_v, bits, n_pairs, nv, p,
                          seed, realizations, workers):
    out = np.empty((realizations, n_pairs), dtype=np.int64)
    useed = np.uint64(seed & (2**64 - 1))
    if workers is None or workers <= 1 or realizations < 2:
        _kernels.sweep_chunk(bulk_u, bulk_v, def_u, def_v, bits, n_pairs, nv,
                             float(p), useed, 0, realizations, out)
        return out
    workers = min(workers, realizations)
    edges = np.linspace(0, realizations, workers + 1, dtype=np.int64)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futs = [
            pool.submit(
                _kernels.sweep_chunk, bulk_u, bulk_v, def_u, def_v, bits,
                n_pairs, nv, float(p), useed, int(lo), int(hi), out[lo:hi],
            )
            for lo, hi in zip(edges[:-1], edges[1:])
            if hi > lo
        ]
        for f in futs:
            f.result()
    return out


def _thresholds_to_curve(out, S, realizations, face_pairs, meta):
    flat = out.ravel()
    hist = np.bincount(flat, minlength=S + 2)
    counts = np.cumsum(hist[: S + 1])
    return MicrocanonicalCurve(
        counts=counts, realizations=realizations, face_pairs=face_pairs, meta=meta
    )


def run_sweep(
    spec: LatticeSpec,
    p: float,
    realizations: int,
    seed: int,
    workers: int | None = 1,
    all_faces: bool = False,
) -> MicrocanonicalCurve:
    """Microcanonical defect sweep: `realizations` independent realizations.

    Parameters
    ----------
    spec : free-boundary box with s < d (use `run_homogeneous` for s == d).
    p : bulk bond density in [0, 1].
    realizations : number of realizations (>= 1).
    seed : 64-bit run seed; realization i uses stream (seed, i).
    workers : thread count; never affects the result.
    all_faces : track all s vertical face pairs in one sweep and average the
        crossing indicator over them (variance reduction; off by default).
    """
    if spec.boundary != "free":
        raise ValueError("crossing sweeps require a free-boundary box")
    if spec.homogeneous:
        raise ValueError("s == d is the homogeneous lattice; use run_homogeneous")
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must be in [0, 1], got {p}")
    if realizations < 1:
        raise ValueError("realizations must be >= 1")
    table = build_edge_table(spec)
    axes = list(range(1, spec.s + 1)) if all_faces else [1]
    bits = face_bits(spec, axes)
    out = _run_threshold_chunks(
        table.bulk_u, table.bulk_v, table.defect_u, table.defect_v, bits,
        len(axes), spec.num_vertices, p, seed, realizations, workers,
    )
    S = table.num_defect
    meta = {
        "kind": "defect-sweep",
        **spec.as_dict(),
        "p": float(p),
        "seed": int(seed),
        "rng": RNG_FAMILY,
        "realizations": int(realizations),
        "workers": int(workers) if workers else 1,
        "face_pairs": len(axes),
        "face_axes": axes,
        "defect_edges": S,
        "created": runmeta.created_iso(),
    }
    meta["config_hash"] = runmeta.config_hash(meta)
    return _thresholds_to_curve(out, S, realizations, len(axes), meta)


def run_homogeneous(
    spec: LatticeSpec,
    realizations: int,
    seed: int,
    workers: int | None = 1,
) -> MicrocanonicalCurve:
    """Homogeneous baseline sweep: every bond in one random insertion order.

    Valid for any s (the defect split is ignored); crossing is tracked on
    the axis-1 face pair.  The resulting curve convolves against the bond
    density p over the total bond count.
    """
    if spec.boundary != "free":
        raise ValueError("crossing sweeps require a free-boundary box")
    if realizations < 1:
        raise ValueError("realizations must be >= 1")
    table = build_edge_table(spec)
    bits = face_bits(spec, [1])
    empty = np.empty(0, dtype=np.int32)
    out = _run_threshold_chunks(
        empty, empty, table.u, table.v, bits, 1, spec.num_vertices,
        0.0, seed, realizations, workers,
    )
    E = table.num_edges
    meta = {
        "kind": "homogeneous-sweep",
        **spec.as_dict(),
        "p": None,
        "seed": int(seed),
        "rng": RNG_FAMILY,
        "realizations": int(realizations),
        "workers": int(workers) if workers else 1,
        "face_pairs": 1,
        "face_axes": [1],
        "defect_edges": E,
        "created": runmeta.created_iso(),
    }
    meta["config_hash"] = runmeta.config_hash(meta)
    return _thresholds_to_curve(out, E, realizations, 1, meta)


# ---------------------------------------------------------------------------
# binomial convolution
# ---------------------------------------------------------------------------


def binomial_weights(S: int, sigma: float):
    """Binomial(S, sigma) pmf over a support window.

    Computed by the multiplicative recurrence outward from the modal term,
    then renormalized; for S > 10^4 the support is truncated at eight
    standard deviations around the mean.  Returns (lo, hi, weights) with
    weights summing to 1 over s = lo..hi.
    """
    if not 0.0 <= sigma <= 1.0:
        raise ValueError(f"density must be in [0, 1], got {sigma}")
    if sigma == 0.0:
        return 0, 0, np.ones(1)
    if sigma == 1.0:
        return S, S, np.ones(1)
    if S > TRUNCATION_MIN_S:
        half = TRUNCATION_HALF_WIDTH_SD * math.sqrt(S * sigma * (1.0 - sigma))
        lo = max(0, int(math.floor(S * sigma - half)))
        hi = min(S, int(math.ceil(S * sigma + half)))
    else:
        lo, hi = 0, S
    mode = min(max(int(math.floor((S + 1) * sigma)), lo), hi)
    w = np.empty(hi - lo + 1, dtype=np.float64)
    w[mode - lo] = 1.0
    ratio = sigma / (1.0 - sigma)
    if mode < hi:
        s_up = np.arange(mode, hi, dtype=np.float64)
        w[mode - lo + 1 :] = np.cumprod((S - s_up) / (s_up + 1.0) * ratio)
    if mode > lo:
        s_dn = np.arange(mode, lo, -1, dtype=np.float64)
        w[: mode - lo] = np.cumprod(s_dn / ((S - s_dn + 1.0) * ratio))[::-1]
    w /= w.sum()
    return lo, hi, w


def convolve(curve: MicrocanonicalCurve, sigma: float):
    """Canonical crossing probability at one density.

    Q_L(sigma) = sum_s Binom(S, s; sigma) Q_hat(s); the standard error is
    the conservative binomial-proportion form sqrt(Q(1-Q)/R).
    """
    lo, hi, w = binomial_weights(curve.S, sigma)
    qhat = curve.q
    q = float(np.dot(w, qhat[lo : hi + 1]))
    q = min(max(q, 0.0), 1.0)
    stderr = math.sqrt(q * (1.0 - q) / curve.realizations)
    return q, stderr


def convolve_grid(curve: MicrocanonicalCurve, sigma_grid) -> CanonicalCurve:
    """Convolve onto a full density grid, returning a CanonicalCurve."""
    sigma_grid = np.asarray(sigma_grid, dtype=np.float64)
    values = np.empty_like(sigma_grid)
    stderr = np.empty_like(sigma_grid)
    for i, sg in enumerate(sigma_grid):
        values[i], stderr[i] = convolve(curve, float(sg))
    meta = dict(curve.meta)
    meta["source_hash"] = curve.meta.get("config_hash")
    meta["sigma_grid"] = {
        "start": float(sigma_grid[0]),
        "stop": float(sigma_grid[-1]),
        "points": int(sigma_grid.shape[0]),
    }
    meta["config_hash"] = runmeta.config_hash(meta)
    out = CanonicalCurve(sigma_grid=sigma_grid, values=values, stderr=stderr, meta=meta)
    out.validate_monotone()
    return out
