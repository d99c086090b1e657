"""Origin-cluster observables: size distributions, ghost-field functions,
tail-decay fits, and the differential-inequality audit.

Clusters are grown lazily from the origin inside a free box B(N): each bond
is sampled on first touch (defect bonds at sigma, bulk at p) and growth
stops on exhaustion or on reaching the box boundary.  Boundary-touching
samples are the finite-volume proxy for the infinite cluster: they count
toward the ghost-field connection probability and are excluded from all
finite-size sums.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _kernels, runmeta
from ._rng import RNG_FAMILY, PyStream
from .lattice import LatticeSpec, boundary_mask, neighbor_tables, origin_index


@dataclass(frozen=True)
class ClusterSample:
    """One grown cluster: |C| vertices, ||C|| open bonds, boundary flag."""

    vertices: int
    edges: int
    touched_boundary: bool

    def __post_init__(self):
        # ||C||/d <= |C| <= ||C|| + 1 on Z^d for every connected cluster
        if self.vertices > self.edges + 1:
            raise AssertionError("cluster has more vertices than a tree allows")


@dataclass
class ClusterDistribution:
    """Histogram of finite origin-cluster sizes plus the boundary count.

    hist_v[n] counts samples with |C| = n (finite, n >= 1); hist_e likewise
    for ||C||; boundary_count many samples reached the box boundary and are
    kept out of both histograms.
    """

    hist_v: np.ndarray
    hist_e: np.ndarray
    boundary_count: int
    samples: int
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.hist_v = np.asarray(self.hist_v, dtype=np.int64)
        self.hist_e = np.asarray(self.hist_e, dtype=np.int64)
        if int(self.hist_v.sum()) + self.boundary_count != self.samples:
            raise ValueError("histogram mass plus boundary count must equal samples")

    def pmf_v(self) -> np.ndarray:
        """P_hat(|C| = n) over n = 0..len-1 (finite clusters only)."""
        return self.hist_v / float(self.samples)

    def survival_v(self) -> np.ndarray:
        """P_hat(infty > |C| >= n): finite-cluster tail, boundary excluded."""
        return self.hist_v[::-1].cumsum()[::-1] / float(self.samples)

    def to_payload(self) -> dict:
        return {
            "format": runmeta.FORMAT_CLUSTERDIST,
            "meta": dict(self.meta),
            "samples": int(self.samples),
            "boundary_count": int(self.boundary_count),
            "hist_v": [[int(n), int(c)] for n, c in enumerate(self.hist_v) if c],
            "hist_e": [[int(n), int(c)] for n, c in enumerate(self.hist_e) if c],
        }

    def save(self, path: str) -> None:
        runmeta.write_json(path, self.to_payload())

    @classmethod
    def from_payload(cls, payload: dict) -> "ClusterDistribution":
        def unpack(pairs):
            if not pairs:
                return np.zeros(1, dtype=np.int64)
            top = max(n for n, _ in pairs)
            arr = np.zeros(top + 1, dtype=np.int64)
            for n, c in pairs:
                arr[n] = c
            return arr

        return cls(
            hist_v=unpack(payload["hist_v"]),
            hist_e=unpack(payload["hist_e"]),
            boundary_count=int(payload["boundary_count"]),
            samples=int(payload["samples"]),
            meta=payload["meta"],
        )

    @classmethod
    def load(cls, path: str) -> "ClusterDistribution":
        return cls.from_payload(runmeta.read_json(path, runmeta.FORMAT_CLUSTERDIST))


def sample_origin_cluster(spec: LatticeSpec, p: float, sigma: float,
                          rng: PyStream) -> ClusterSample:
    """Grow one origin cluster (readable reference path).

    Depth-first growth with lazy bond sampling, consuming uniforms in
    exactly the order the batch kernel does, so the two routes are
    bit-identical for the same stream.
    """
    if not (0.0 <= p <= 1.0 and 0.0 <= sigma <= 1.0):
        raise ValueError("p and sigma must lie in [0, 1]")
    table, nbr, eid = neighbor_tables(spec)
    bmask = boundary_mask(spec)
    origin = origin_index(spec)
    cls = table.cls
    deg = 2 * spec.d

    visited = {origin}
    decided = {}
    stack = [origin]
    nverts, nedges = 1, 0
    touched = False
    while stack and not touched:
        x = stack.pop()
        for k in range(deg):
            y = int(nbr[x, k])
            if y < 0:
                continue
            e = int(eid[x, k])
            if e in decided:
                continue
            u = rng.uniform()
            isopen = u < (sigma if cls[e] == 1 else p)
            decided[e] = isopen
            if isopen:
                nedges += 1
                if y not in visited:
                    visited.add(y)
                    nverts += 1
                    if bmask[y]:
                        touched = True
                        break
                    stack.append(y)
    return ClusterSample(nverts, nedges, touched)


def _chunked(fn, samples, workers, submit_args):
    if workers is None or workers <= 1 or samples < 2:
        fn(0, samples, *submit_args(0, samples))
        return
    workers = min(workers, samples)
    edges = np.linspace(0, samples, workers + 1, dtype=np.int64)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futs = []
        for lo, hi in zip(edges[:-1], edges[1:]):
            if hi > lo:
                futs.append(pool.submit(fn, int(lo), int(hi), *submit_args(int(lo), int(hi))))
        for f in futs:
            f.result()


def sample_cluster_distribution(
    spec: LatticeSpec,
    p: float,
    sigma: float,
    samples: int,
    seed: int,
    workers: int | None = 1,
) -> ClusterDistribution:
    """Histogram `samples` independent origin clusters.

    Sample i draws from stream (seed, i); results are independent of the
    worker count.  spec must be a free box; its L plays the role of N.
    """
    if not (0.0 <= p <= 1.0 and 0.0 <= sigma <= 1.0):
        raise ValueError("p and sigma must lie in [0, 1]")
    if samples < 1:
        raise ValueError("samples must be >= 1")
    table, nbr, eid = neighbor_tables(spec)
    bmask = boundary_mask(spec)
    origin = origin_index(spec)
    out_v = np.empty(samples, dtype=np.int64)
    out_e = np.empty(samples, dtype=np.int64)
    out_b = np.empty(samples, dtype=np.uint8)
    useed = np.uint64(seed & (2**64 - 1))

    def worker(lo, hi, ov, oe, ob):
        _kernels.cluster_chunk(nbr, eid, table.cls, bmask, origin,
                               float(p), float(sigma), useed, lo, hi, ov, oe, ob)

    _chunked(worker, samples, workers,
             lambda lo, hi: (out_v[lo:hi], out_e[lo:hi], out_b[lo:hi]))

    fin = out_b == 0
    # per-sample cluster bounds on Z^d, checked on every batch
    if np.any(out_v > out_e + 1) or np.any(out_e > spec.d * out_v):
        raise AssertionError("cluster size bounds violated; sampler is broken")
    hist_v = np.bincount(out_v[fin])
    hist_e = np.bincount(out_e[fin])
    meta = {
        "kind": "cluster-distribution",
        **spec.as_dict(),
        "p": float(p),
        "sigma": float(sigma),
        "seed": int(seed),
        "rng": RNG_FAMILY,
        "samples": int(samples),
        "workers": int(workers) if workers else 1,
        "created": runmeta.created_iso(),
    }
    meta["config_hash"] = runmeta.config_hash(meta)
    return ClusterDistribution(
        hist_v=hist_v,
        hist_e=hist_e,
        boundary_count=int(samples - fin.sum()),
        samples=samples,
        meta=meta,
    )


# ---------------------------------------------------------------------------
# ghost-field functions
# ---------------------------------------------------------------------------


def ghost_theta(dist: ClusterDistribution, gamma: float) -> float:
    """Ghost-field connection probability 1 - sum_n (1-gamma)^n P_hat(n).

    Boundary-touching samples contribute 1 (the n = infinity term).
    """
    if not 0.0 < gamma < 1.0:
        raise ValueError(f"gamma must be in (0, 1), got {gamma}")
    ns = np.flatnonzero(dist.hist_v)
    finite = float(np.dot(dist.hist_v[ns], (1.0 - gamma) ** ns))
    return 1.0 - finite / dist.samples


def ghost_chi(dist: ClusterDistribution, gamma: float) -> float:
    """Ghost-field susceptibility sum_n n (1-gamma)^n P_hat(n).

    Equals (1-gamma) d(theta)/d(gamma); gamma = 0 gives the finite-cluster
    susceptibility (boundary-touching samples excluded).
    """
    if not 0.0 <= gamma < 1.0:
        raise ValueError(f"gamma must be in [0, 1), got {gamma}")
    ns = np.flatnonzero(dist.hist_v)
    return float(np.dot(dist.hist_v[ns] * ns, (1.0 - gamma) ** ns)) / dist.samples


# ---------------------------------------------------------------------------
# tail-decay fits
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DecayFitCandidate:
    alpha: float
    rate: float
    intercept: float
    rss: float


@dataclass
class DecayFitResult:
    candidates: list
    window: tuple
    regime_alpha: float | None
    inconclusive: bool
    meta: dict = field(default_factory=dict)

    def to_payload(self) -> dict:
        return {
            "format": runmeta.FORMAT_AUDIT,
            "meta": dict(self.meta),
            "kind": "decay-fit",
            "window": list(self.window),
            "inconclusive": self.inconclusive,
            "regime_alpha": self.regime_alpha,
            "candidates": [
                {"alpha": c.alpha, "rate": c.rate, "intercept": c.intercept, "rss": c.rss}
                for c in self.candidates
            ],
        }


def regime_exponents(d: int, s: int) -> list:
    """Candidate decay exponents: exponential, bulk-surface, plane-surface."""
    return [1.0, (d - 1) / d, (s - 1) / s]


MIN_TAIL_BINS = 10


def decay_fit(dist: ClusterDistribution, exponents=None) -> DecayFitResult:
    """Least-squares fit of log P_hat(|C| >= n) against b - c n^alpha.

    The fit window runs from the 90th percentile of the sampled finite-size
    distribution (dropping small-n transients) to the last bin with at
    least 10 samples (dropping noise-dominated bins).  Fewer than 10
    populated bins in the window yields an explicit inconclusive result,
    not an exception.  The regime call is the exponent with the smallest
    residual sum of squares among fits with positive decay rate.
    """
    if exponents is None:
        if "d" not in dist.meta:
            raise ValueError("no exponents given and distribution lacks d, s metadata")
        exponents = regime_exponents(int(dist.meta["d"]), int(dist.meta["s"]))
    exponents = sorted(set(float(a) for a in exponents), reverse=True)

    hist = dist.hist_v
    total_fin = int(hist.sum())
    meta = dict(dist.meta)
    if total_fin == 0:
        return DecayFitResult([], (0, 0), None, True, meta)

    cdf = np.cumsum(hist)
    n_start = int(np.searchsorted(cdf, 0.9 * total_fin))  # top decile of mass
    n_start = max(n_start, 1)
    heavy = np.flatnonzero(hist >= MIN_TAIL_BINS)
    n_end = int(heavy[-1]) if heavy.size else 0

    ns = np.flatnonzero(hist)
    ns = ns[(ns >= n_start) & (ns <= n_end)]
    window = (n_start, n_end)
    if ns.size < MIN_TAIL_BINS:
        return DecayFitResult([], window, None, True, meta)

    surv = dist.survival_v()
    y = np.log(surv[ns])
    candidates = []
    for alpha in exponents:
        x = ns.astype(np.float64) ** alpha
        design = np.column_stack([np.ones_like(x), -x])
        coef, *_ = np.linalg.lstsq(design, y, rcond=None)
        resid = y - design @ coef
        candidates.append(
            DecayFitCandidate(alpha=alpha, rate=float(coef[1]),
                              intercept=float(coef[0]), rss=float(resid @ resid))
        )
    decaying = [c for c in candidates if c.rate > 0]
    if not decaying:
        return DecayFitResult(candidates, window, None, True, meta)
    best = min(decaying, key=lambda c: c.rss)
    return DecayFitResult(candidates, window, best.alpha, False, meta)


# ---------------------------------------------------------------------------
# differential-inequality audit
# ---------------------------------------------------------------------------


@dataclass
class InequalityAuditResult:
    point: dict
    inequalities: list  # two dicts: lhs, rhs, slack, stderr, passed
    passed: bool
    meta: dict = field(default_factory=dict)

    def to_payload(self) -> dict:
        return {
            "format": runmeta.FORMAT_AUDIT,
            "kind": "inequality-audit",
            "meta": dict(self.meta),
            "point": dict(self.point),
            "inequalities": [dict(q) for q in self.inequalities],
            "passed": self.passed,
        }

    def save(self, path: str) -> None:
        runmeta.write_json(path, self.to_payload())


def _theta_batch(sizes, boundary, gamma):
    # mean over one batch of 1 - (1-gamma)^|C|, boundary samples counting 1
    contrib = 1.0 - (1.0 - gamma) ** sizes
    contrib = np.where(boundary == 1, 1.0, contrib)
    return float(contrib.mean())


def inequality_audit(
    spec: LatticeSpec,
    p: float,
    sigma: float,
    gamma: float,
    samples: int,
    seed: int,
    h: float = 0.02,
    batches: int = 50,
    workers: int | None = 1,
) -> InequalityAuditResult:
    """Monte Carlo audit of the two ghost-field differential inequalities.

    At (p, sigma, gamma) with p <= sigma, estimates theta at the 7-point
    stencil (p+-h, sigma+-h, gamma+-h) with common random numbers (one
    uniform per bond per sample, shared across stencil runs), forms central
    finite differences, and checks

        (1-p) dth/dp + (1-sigma) dth/dsigma
            <= 2 d (1-gamma) chiH theta dth/dgamma
        theta <= gamma dth/dgamma + theta^2
            + chiH theta (p dth/dp + sigma dth/dsigma)

    where chiH is the homogeneous mean cluster size at density p, estimated
    from a coupled run with both bond classes at p.  Slack (rhs - lhs) and
    its standard error come from `batches` independent sample blocks; an
    inequality passes when slack >= -3 stderr.
    """
    if not p <= sigma:
        raise ValueError(f"audit hypothesis requires p <= sigma, got p={p} > sigma={sigma}")
    if not (0.0 < p < 1.0 and 0.0 < sigma < 1.0 and 0.0 < gamma < 1.0):
        raise ValueError("p, sigma, gamma must lie in (0, 1)")
    if h <= 0 or p - h <= 0 or sigma + h >= 1 or gamma - h <= 0 or gamma + h >= 1:
        raise ValueError(f"stencil step h={h} leaves the open parameter domain")
    if samples < batches:
        raise ValueError("need at least one sample per batch")

    table, nbr, eid = neighbor_tables(spec)
    bmask = boundary_mask(spec)
    origin = origin_index(spec)
    # runs: center, p+h, p-h, sigma+h, sigma-h, homogeneous-at-p
    p_list = np.array([p, p + h, p - h, p, p, p], dtype=np.float64)
    s_list = np.array([sigma, sigma, sigma, sigma + h, sigma - h, p], dtype=np.float64)
    nruns = p_list.shape[0]
    out_v = np.empty((samples, nruns), dtype=np.int64)
    out_b = np.empty((samples, nruns), dtype=np.uint8)
    useed = np.uint64(seed & (2**64 - 1))

    def worker(lo, hi, ov, ob):
        _kernels.stencil_chunk(nbr, eid, table.cls, bmask, origin,
                               p_list, s_list, useed, lo, hi, ov, ob)

    _chunked(worker, samples, workers, lambda lo, hi: (out_v[lo:hi], out_b[lo:hi]))

    bounds = np.linspace(0, samples, batches + 1, dtype=np.int64)
    slack = np.empty((2, batches), dtype=np.float64)
    sides = np.empty((2, 2, batches), dtype=np.float64)  # (ineq, lhs/rhs, batch)
    comps = {"theta": [], "dth_dp": [], "dth_dsigma": [], "dth_dgamma": [], "chi_h": []}
    for b in range(batches):
        lo, hi = int(bounds[b]), int(bounds[b + 1])
        v = out_v[lo:hi]
        tb = out_b[lo:hi]
        th_c = _theta_batch(v[:, 0], tb[:, 0], gamma)
        th_pp = _theta_batch(v[:, 1], tb[:, 1], gamma)
        th_pm = _theta_batch(v[:, 2], tb[:, 2], gamma)
        th_sp = _theta_batch(v[:, 3], tb[:, 3], gamma)
        th_sm = _theta_batch(v[:, 4], tb[:, 4], gamma)
        th_gp = _theta_batch(v[:, 0], tb[:, 0], gamma + h)
        th_gm = _theta_batch(v[:, 0], tb[:, 0], gamma - h)
        # homogeneous mean cluster size; boundary-stopped sizes enter as-is
        # (negligible at the subcritical densities this audit targets)
        chi_h = float(v[:, 5].mean())
        dpd = (th_pp - th_pm) / (2.0 * h)
        dsd = (th_sp - th_sm) / (2.0 * h)
        dgd = (th_gp - th_gm) / (2.0 * h)
        lhs1 = (1.0 - p) * dpd + (1.0 - sigma) * dsd
        rhs1 = 2.0 * spec.d * (1.0 - gamma) * chi_h * th_c * dgd
        lhs2 = th_c
        rhs2 = gamma * dgd + th_c * th_c + chi_h * th_c * (p * dpd + sigma * dsd)
        slack[0, b] = rhs1 - lhs1
        slack[1, b] = rhs2 - lhs2
        sides[0, 0, b], sides[0, 1, b] = lhs1, rhs1
        sides[1, 0, b], sides[1, 1, b] = lhs2, rhs2
        comps["theta"].append(th_c)
        comps["dth_dp"].append(dpd)
        comps["dth_dsigma"].append(dsd)
        comps["dth_dgamma"].append(dgd)
        comps["chi_h"].append(chi_h)

    names = ["gradient-vs-ghost", "magnetization-bound"]
    inequalities = []
    all_pass = True
    for k in range(2):
        mean = float(slack[k].mean())
        stderr = float(slack[k].std(ddof=1) / math.sqrt(batches))
        ok = mean >= -3.0 * stderr
        all_pass &= ok
        inequalities.append(
            {
                "name": names[k],
                "lhs": float(sides[k, 0].mean()),
                "rhs": float(sides[k, 1].mean()),
                "slack": mean,
                "stderr": stderr,
                "passed": bool(ok),
            }
        )
    point = {"p": p, "sigma": sigma, "gamma": gamma, "h": h}
    meta = {
        "kind": "inequality-audit",
        **spec.as_dict(),
        **point,
        "seed": int(seed),
        "rng": RNG_FAMILY,
        "samples": int(samples),
        "batches": int(batches),
        "workers": int(workers) if workers else 1,
        "means": {k: float(np.mean(vals)) for k, vals in comps.items()},
        "created": runmeta.created_iso(),
    }
    meta["config_hash"] = runmeta.config_hash(meta)
    return InequalityAuditResult(
        point=point, inequalities=inequalities, passed=bool(all_pass), meta=meta
    )
