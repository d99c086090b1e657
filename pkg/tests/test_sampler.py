import json

import numpy as np
import pytest
from scipy import stats

from defectperc._rng import PyStream
from defectperc.lattice import LatticeSpec, build_edge_table, face_bits, vertex_index
from defectperc.sampler import (
    CanonicalCurve,
    DisjointSetForest,
    MicrocanonicalAccumulator,
    MicrocanonicalCurve,
    binomial_weights,
    convolve,
    convolve_grid,
    homogeneous_sweep,
    run_homogeneous,
    run_realization,
    run_sweep,
    sweep_thresholds,
)

# ---------------------------------------------------------------------------
# union-find
# ---------------------------------------------------------------------------


def test_forest_invariants_under_random_unions():
    rng = PyStream(3, 0)
    n = 60
    bits = np.zeros(n, dtype=np.uint8)
    bits[0] = 1
    bits[n - 1] = 2
    forest = DisjointSetForest(n, bits)
    assert not forest.crossed()
    for _ in range(200):
        a, b = rng.randbelow(n), rng.randbelow(n)
        ra = forest.union(a, b)
        assert forest.find(a) == forest.find(b) == ra
        assert forest.root_sizes_consistent()
    # everything merged by now: the face pair must read crossed
    assert forest.find(0) == forest.find(n - 1)
    assert forest.crossed()


def test_forest_flag_or_on_union():
    bits = np.array([1, 0, 2], dtype=np.uint8)
    forest = DisjointSetForest(3, bits)
    forest.union(0, 1)
    assert not forest.crossed()
    root = forest.union(1, 2)
    assert forest.flags[root] == 3
    assert forest.crossed()


# ---------------------------------------------------------------------------
# hand-checkable sweeps (d=2, s=2: every edge is a defect edge)
# ---------------------------------------------------------------------------

GRID3_EDGES = [
    (0, 3), (0, 1), (1, 4), (1, 2), (2, 5), (3, 6),
    (3, 4), (4, 7), (4, 5), (5, 8), (6, 7), (7, 8),
]


@pytest.fixture(scope="module")
def grid3():
    spec = LatticeSpec(2, 2, 1)
    table = build_edge_table(spec)
    faces = face_bits(spec, [1])
    return table, faces


def test_grid3_canonical_edge_list(grid3):
    table, _ = grid3
    assert table.num_bulk == 0 and table.num_defect == 12
    got = list(zip(table.defect_u.tolist(), table.defect_v.tolist()))
    assert got == GRID3_EDGES


def test_grid3_identity_order_crosses_at_six(grid3):
    table, faces = grid3
    # inserting edges in canonical order, the first x=-1 -> x=+1 connection
    # appears when edge 5 = (3,6) joins {0,1,2,3,4,5} to 6
    assert sweep_thresholds(table, faces, [], list(range(12))) == 6


def test_grid3_two_edge_crossing(grid3):
    table, faces = grid3
    order = [0, 5] + [e for e in range(12) if e not in (0, 5)]
    # (0,3) then (3,6) bridges the faces with the second insertion
    assert sweep_thresholds(table, faces, [], order) == 2


def test_grid3_no_defects_never_crosses(grid3):
    table, faces = grid3
    assert sweep_thresholds(table, faces, [], []) is None


def test_faces_as_vertex_pair(grid3):
    table, _ = grid3
    spec = table.spec
    # coordinates shifted to 0..2L: the x = +-L faces sit at 2L and 0
    plus = [vertex_index(spec, [2, y]) for y in (0, 1, 2)]
    minus = [vertex_index(spec, [0, y]) for y in (0, 1, 2)]
    assert sweep_thresholds(table, (plus, minus), [], list(range(12))) == 6


# ---------------------------------------------------------------------------
# hand-checkable sweeps in d=3
# ---------------------------------------------------------------------------


@pytest.fixture(scope="module")
def box321():
    spec = LatticeSpec(3, 2, 1)
    table = build_edge_table(spec)
    faces = face_bits(spec, [1])
    return spec, table, faces


def _defect_pos(table, a, b):
    for k, (u, v) in enumerate(zip(table.defect_u, table.defect_v)):
        if {int(u), int(v)} == {a, b}:
            return k
    raise AssertionError("defect edge not found")


def _bulk_pos(table, a, b):
    for k, (u, v) in enumerate(zip(table.bulk_u, table.bulk_v)):
        if {int(u), int(v)} == {a, b}:
            return k
    raise AssertionError("bulk edge not found")


def test_straight_defect_path_crosses_at_two(box321):
    # open the in-plane path x=-1 -> 0 -> +1 (shifted: 0 -> 1 -> 2) first
    spec, table, faces = box321
    va = vertex_index(spec, [0, 1, 1])
    vb = vertex_index(spec, [1, 1, 1])
    vc = vertex_index(spec, [2, 1, 1])
    e1 = _defect_pos(table, va, vb)
    e2 = _defect_pos(table, vb, vc)
    order = [e1, e2] + [e for e in range(table.num_defect) if e not in (e1, e2)]
    assert sweep_thresholds(table, faces, [], order) == 2


def test_preopened_bulk_path_gives_zero(box321):
    # a bulk path along the box edge connects the faces before any defect
    spec, table, faces = box321
    va = vertex_index(spec, [0, 0, 0])
    vb = vertex_index(spec, [1, 0, 0])
    vc = vertex_index(spec, [2, 0, 0])
    bulk = [_bulk_pos(table, va, vb), _bulk_pos(table, vb, vc)]
    assert sweep_thresholds(table, faces, bulk, list(range(table.num_defect))) == 0


def test_p_one_always_crosses_at_zero(box321):
    _, table, faces = box321
    for i in range(5):
        assert run_realization(table, faces, 1.0, PyStream(9, i)) == 0


def test_p_zero_reduces_to_plane_percolation():
    # with no bulk edges open, the sweep sees exactly the (2L+1)^2 plane
    # grid; defect edges enumerate in the same canonical order as the edges
    # of the d=2 lattice, so thresholds agree permutation by permutation
    spec3 = LatticeSpec(3, 2, 2)
    spec2 = LatticeSpec(2, 2, 2)
    t3 = build_edge_table(spec3)
    t2 = build_edge_table(spec2)
    assert t3.num_defect == t2.num_defect
    f3 = face_bits(spec3, [1])
    f2 = face_bits(spec2, [1])
    rng = PyStream(17, 0)
    for _ in range(10):
        order = list(range(t3.num_defect))
        rng.shuffle(order)
        assert (sweep_thresholds(t3, f3, [], order)
                == sweep_thresholds(t2, f2, [], order))


def test_run_realization_p_domain(box321):
    _, table, faces = box321
    with pytest.raises(ValueError):
        run_realization(table, faces, 1.5, PyStream(0, 0))


# ---------------------------------------------------------------------------
# accumulation
# ---------------------------------------------------------------------------


def test_accumulate_single_zero_threshold():
    acc = MicrocanonicalAccumulator(3)
    acc.add(0)
    curve = acc.finalize()
    assert curve.counts.tolist() == [1, 1, 1, 1]
    assert curve.q.tolist() == [1.0, 1.0, 1.0, 1.0]


def test_accumulate_single_never_crossed():
    acc = MicrocanonicalAccumulator(3)
    acc.add(None)
    curve = acc.finalize()
    assert curve.counts.tolist() == [0, 0, 0, 0]


def test_accumulate_mixed_thresholds():
    acc = MicrocanonicalAccumulator(3)
    acc.add(2)
    acc.add(None)
    curve = acc.finalize()
    assert curve.counts.tolist() == [0, 0, 1, 1]
    assert curve.q.tolist() == [0.0, 0.0, 0.5, 0.5]


def test_curve_validation_rejects_bad_counts():
    with pytest.raises(ValueError):
        MicrocanonicalCurve(np.array([2, 1, 3]), realizations=3, face_pairs=1)
    with pytest.raises(ValueError):
        MicrocanonicalCurve(np.array([0, 1, 5]), realizations=3, face_pairs=1)


# ---------------------------------------------------------------------------
# binomial convolution
# ---------------------------------------------------------------------------


def test_convolve_endpoints_exact():
    counts = np.array([3, 10, 40, 70])
    curve = MicrocanonicalCurve(counts, realizations=100, face_pairs=1)
    q0, _ = convolve(curve, 0.0)
    q1, _ = convolve(curve, 1.0)
    assert q0 == 0.03
    assert q1 == 0.70


def test_convolve_hand_value():
    # S=2, q_hat = [0, 1/2, 1]; at sigma=1/2 the weights are (1/4, 1/2, 1/4)
    curve = MicrocanonicalCurve(np.array([0, 1, 2]), realizations=2, face_pairs=1)
    q, stderr = convolve(curve, 0.5)
    assert q == pytest.approx(0.5, abs=1e-15)
    assert stderr == pytest.approx(np.sqrt(0.25 / 2), abs=1e-15)


@pytest.mark.parametrize("sigma", [0.1, 0.37, 0.5, 0.93])
def test_weights_match_scipy(sigma):
    S = 40
    lo, hi, w = binomial_weights(S, sigma)
    ref = stats.binom.pmf(np.arange(lo, hi + 1), S, sigma)
    assert np.max(np.abs(w - ref)) < 1e-12
    assert abs(w.sum() - stats.binom.cdf(hi, S, sigma)
               + stats.binom.cdf(lo - 1, S, sigma)) < 1e-12


def test_convolution_matches_scipy_dot():
    S = 60
    rng = np.random.default_rng(5)
    qhat = np.sort(rng.uniform(size=S + 1))
    counts = np.round(qhat * 1000).astype(np.int64)
    counts = np.maximum.accumulate(counts)
    curve = MicrocanonicalCurve(counts, realizations=1000, face_pairs=1)
    for sigma in (0.2, 0.55, 0.81):
        q, _ = convolve(curve, sigma)
        full = float(stats.binom.pmf(np.arange(S + 1), S, sigma) @ curve.q)
        assert q == pytest.approx(full, abs=1e-12)


def test_convolution_truncated_tail_large_s():
    # S above the truncation cutoff exercises the windowed path
    S = 20_000
    rng = np.random.default_rng(11)
    counts = np.maximum.accumulate(
        np.round(np.sort(rng.uniform(size=S + 1)) * 500).astype(np.int64))
    curve = MicrocanonicalCurve(counts, realizations=500, face_pairs=1)
    sigma = 0.3
    lo, hi, w = binomial_weights(S, sigma)
    assert hi - lo < S  # actually truncated
    q, _ = convolve(curve, sigma)
    full = float(stats.binom.pmf(np.arange(S + 1), S, sigma) @ curve.q)
    assert q == pytest.approx(full, abs=1e-9)


def test_convolve_grid_monotone_and_meta():
    curve = run_sweep(LatticeSpec(3, 2, 2), 0.1, 300, seed=21)
    grid = np.linspace(0.0, 1.0, 41)
    canon = convolve_grid(curve, grid)
    canon.validate_monotone()
    assert np.all(np.diff(canon.values) >= -1e-12)
    assert canon.values[0] == curve.q[0]
    assert canon.values[-1] == curve.q[-1]
    assert canon.meta["source_hash"] == curve.meta["config_hash"]


# ---------------------------------------------------------------------------
# batch drivers
# ---------------------------------------------------------------------------


def test_run_sweep_matches_replay():
    spec = LatticeSpec(3, 2, 2)
    seed, R, p = 99, 25, 0.15
    curve = run_sweep(spec, p, R, seed=seed)
    table = build_edge_table(spec)
    faces = face_bits(spec, [1])
    acc = MicrocanonicalAccumulator(table.num_defect)
    for i in range(R):
        acc.add(run_realization(table, faces, p, PyStream(seed, i)))
    replay = acc.finalize()
    assert np.array_equal(curve.counts, replay.counts)


def test_run_sweep_worker_count_invariance():
    spec = LatticeSpec(3, 2, 2)
    base = run_sweep(spec, 0.12, 200, seed=31, workers=1)
    for w in (4, 8):
        other = run_sweep(spec, 0.12, 200, seed=31, workers=w)
        assert np.array_equal(base.counts, other.counts)
        assert other.meta["workers"] == w
    assert base.meta["workers"] == 1


def test_run_sweep_all_faces():
    spec = LatticeSpec(3, 2, 2)
    curve = run_sweep(spec, 0.1, 100, seed=13, all_faces=True)
    assert curve.face_pairs == spec.s
    assert curve.counts[-1] <= 100 * spec.s


def test_coupled_p_dominance_exact():
    # same seed: the bulk configuration at p' >= p is a superset, so every
    # realization crosses no later and the counts dominate pointwise
    spec = LatticeSpec(3, 2, 2)
    table = build_edge_table(spec)
    faces = face_bits(spec, [1])
    seed = 7
    for i in range(60):
        t_lo = run_realization(table, faces, 0.15, PyStream(seed, i))
        t_hi = run_realization(table, faces, 0.35, PyStream(seed, i))
        lo = np.inf if t_lo is None else t_lo
        hi = np.inf if t_hi is None else t_hi
        assert hi <= lo
    c_lo = run_sweep(spec, 0.15, 150, seed=seed)
    c_hi = run_sweep(spec, 0.35, 150, seed=seed)
    assert np.all(c_hi.counts >= c_lo.counts)


def test_run_sweep_rejects_bad_args():
    with pytest.raises(ValueError):
        run_sweep(LatticeSpec(3, 2, 1), 0.1, 0, seed=1)
    with pytest.raises(ValueError):
        run_sweep(LatticeSpec(3, 2, 1), -0.2, 10, seed=1)


# ---------------------------------------------------------------------------
# homogeneous baseline
# ---------------------------------------------------------------------------


def test_homogeneous_sweep_replay_determinism():
    spec = LatticeSpec(2, 2, 2)
    table = build_edge_table(spec)
    faces = face_bits(spec, [1])
    a = homogeneous_sweep(table, faces, PyStream(4, 2))
    b = homogeneous_sweep(table, faces, PyStream(4, 2))
    assert a == b
    assert 1 <= a <= table.num_edges


def test_run_homogeneous_endpoints():
    curve = run_homogeneous(LatticeSpec(2, 2, 2), 200, seed=8)
    assert curve.S == build_edge_table(LatticeSpec(2, 2, 2)).num_edges
    q0, _ = convolve(curve, 0.0)
    q1, _ = convolve(curve, 1.0)
    assert q0 == 0.0
    assert q1 == 1.0


def test_homogeneous_2d_curves_cross_near_half():
    # finite-size crossing curves at L=4 and L=8 intersect near p_c(2)=1/2:
    # their difference changes sign inside [0.48, 0.52]
    grid = np.linspace(0.40, 0.60, 101)
    qs = {}
    for L in (4, 8):
        curve = run_homogeneous(LatticeSpec(2, 2, L), 2000, seed=40 + L)
        qs[L] = convolve_grid(curve, grid).values
    diff = qs[4] - qs[8]
    lo = np.searchsorted(grid, 0.48)
    hi = np.searchsorted(grid, 0.52)
    assert diff[lo] * diff[hi] < 0
    assert abs(diff[0]) > 0.02 and abs(diff[-1]) > 0.02


def test_run_homogeneous_worker_invariance():
    base = run_homogeneous(LatticeSpec(2, 2, 3), 100, seed=5, workers=1)
    par = run_homogeneous(LatticeSpec(2, 2, 3), 100, seed=5, workers=4)
    assert np.array_equal(base.counts, par.counts)


# ---------------------------------------------------------------------------
# persistence
# ---------------------------------------------------------------------------


def test_micro_curve_json_roundtrip(tmp_path):
    curve = run_sweep(LatticeSpec(3, 2, 1), 0.2, 50, seed=3)
    path = tmp_path / "c.json"
    curve.save(path)
    back = MicrocanonicalCurve.load(path)
    assert np.array_equal(back.counts, curve.counts)
    assert back.realizations == curve.realizations
    assert back.face_pairs == curve.face_pairs
    assert back.meta["config_hash"] == curve.meta["config_hash"]
    payload = json.loads(path.read_text())
    assert payload["format"].startswith("defectperc.")


def test_canonical_curve_json_roundtrip(tmp_path):
    curve = run_sweep(LatticeSpec(3, 2, 1), 0.2, 50, seed=3)
    canon = convolve_grid(curve, np.linspace(0, 1, 11))
    path = tmp_path / "canon.json"
    canon.save(path)
    back = CanonicalCurve.load(path)
    assert np.array_equal(back.sigma_grid, canon.sigma_grid)
    assert np.array_equal(back.values, canon.values)
    assert np.array_equal(back.stderr, canon.stderr)
