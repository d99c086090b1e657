"""Critical-point estimation from families of canonical crossing curves.

For a family of box sizes, the curves Q_L(sigma) pinch together at the
critical density.  The estimator minimizes the squared spread

    E^2(sigma) = sum_L sum_K (Q_L(sigma) - Q_K(sigma))^2

over a density grid (ordered pairs, i.e. twice the unordered sum), refines
the grid argmin with a quadratic interpolation, and reports a statistical
error (half-width of the region where E^2 stays below twice its minimum)
plus a systematic error (twice the shift from dropping the smallest box).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import runmeta
from .sampler import CanonicalCurve


class GridNarrowError(ValueError):
    """The E^2 minimum sits on the grid boundary: grid too narrow."""


# standard bond-percolation thresholds on Z^d used for sanity bounds:
# d=2 exact, d=3 and d=4 well-established numerical values
BOND_THRESHOLD = {2: 0.5, 3: 0.24881182, 4: 0.160130}


@dataclass
class CrossingFamily:
    """Canonical curves of one experiment at several box sizes L.

    All member curves must share the density grid and the experiment
    parameters (d, s, boundary, p, kind); box sizes must be distinct.
    Differences in soft provenance (realizations, rng family) are refused
    unless `force` is passed.
    """

    L_list: list
    sigma_grid: np.ndarray
    values: np.ndarray  # shape (len(L_list), len(grid)), sorted by L
    stderr: np.ndarray
    meta: dict = field(default_factory=dict)

    @classmethod
    def from_curves(cls, curves, force: bool = False) -> "CrossingFamily":
        if len(curves) < 2:
            raise ValueError("a crossing family needs at least two curves")
        curves = sorted(curves, key=lambda c: c.meta["L"])
        Ls = [int(c.meta["L"]) for c in curves]
        if len(set(Ls)) != len(Ls):
            raise ValueError(f"box sizes must be distinct, got {Ls}")
        first = curves[0]
        hard_keys = ("kind", "d", "s", "boundary", "p")
        soft_keys = ("realizations", "rng", "face_axes")
        for c in curves[1:]:
            if not np.array_equal(c.sigma_grid, first.sigma_grid):
                raise ValueError("curves use different density grids")
            for k in hard_keys:
                if c.meta.get(k) != first.meta.get(k):
                    raise ValueError(
                        f"mixed families: {k}={c.meta.get(k)!r} vs {first.meta.get(k)!r}"
                    )
            if not force:
                for k in soft_keys:
                    if c.meta.get(k) != first.meta.get(k):
                        raise ValueError(
                            f"mixed provenance ({k}={c.meta.get(k)!r} vs "
                            f"{first.meta.get(k)!r}); pass force=True to accept"
                        )
        meta = {
            k: first.meta.get(k)
            for k in ("kind", "d", "s", "boundary", "p", "realizations", "rng")
        }
        meta["L_list"] = Ls
        return cls(
            L_list=Ls,
            sigma_grid=first.sigma_grid.copy(),
            values=np.stack([c.values for c in curves]),
            stderr=np.stack([c.stderr for c in curves]),
            meta=meta,
        )

    def __len__(self):
        return len(self.L_list)


def e_squared_profile(values: np.ndarray) -> np.ndarray:
    """E^2 at every grid point for a (n_curves, n_grid) value matrix."""
    n = values.shape[0]
    s1 = values.sum(axis=0)
    s2 = (values**2).sum(axis=0)
    # sum over ordered pairs (j, k) of (v_j - v_k)^2 = 2 n sum v^2 - 2 (sum v)^2
    return 2.0 * n * s2 - 2.0 * s1**2


def e_squared(family: CrossingFamily, sigma: float) -> float:
    """Squared curve spread at one grid density (ordered double sum)."""
    i = int(np.argmin(np.abs(family.sigma_grid - sigma)))
    if abs(family.sigma_grid[i] - sigma) > 1e-9:
        raise ValueError(f"sigma={sigma} is not a grid point")
    return float(e_squared_profile(family.values)[i])


@dataclass
class CriticalEstimate:
    sigma_star: float
    stat_err: float
    sys_err: float
    combined_err: float
    e2_min: float
    diagnostics: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def to_payload(self) -> dict:
        return {
            "format": runmeta.FORMAT_ESTIMATE,
            "meta": dict(self.meta),
            "sigma_star": self.sigma_star,
            "stat_err": self.stat_err,
            "sys_err": self.sys_err,
            "combined_err": self.combined_err,
            "e2_min": self.e2_min,
            "diagnostics": dict(self.diagnostics),
        }

    def save(self, path: str) -> None:
        runmeta.write_json(path, self.to_payload())


def _argmin_refined(grid: np.ndarray, prof: np.ndarray):
    """Grid argmin plus quadratic refinement through the three points
    around it.  Returns (sigma_star, e2_min, flags)."""
    flags = []
    imin = int(np.argmin(prof))
    ties = np.flatnonzero(prof == prof[imin])
    if ties.size > 1:
        flags.append("multiple-minima")
        imin = int(ties[0])
    if imin == 0 or imin == prof.shape[0] - 1:
        raise GridNarrowError(
            f"grid too narrow: E^2 minimum at grid boundary sigma={grid[imin]:.6g}"
        )
    x0, x1, x2 = grid[imin - 1], grid[imin], grid[imin + 1]
    y0, y1, y2 = prof[imin - 1], prof[imin], prof[imin + 1]
    # parabola vertex through three (generally non-uniform) points
    denom = (x0 - x1) * (x0 - x2) * (x1 - x2)
    a = (x2 * (y1 - y0) + x1 * (y0 - y2) + x0 * (y2 - y1)) / denom
    b = (x2**2 * (y0 - y1) + x1**2 * (y2 - y0) + x0**2 * (y1 - y2)) / denom
    if a <= 0:
        flags.append("degenerate-curvature")
        return float(x1), float(y1), flags
    xv = -b / (2.0 * a)
    if not x0 <= xv <= x2:
        flags.append("refinement-outside-bracket")
        return float(x1), float(y1), flags
    c = y1 - a * x1**2 - b * x1
    yv = a * xv**2 + b * xv + c
    return float(xv), float(max(yv, 0.0)), flags


def _threshold_width(grid, prof, imin, threshold):
    """Grid-interpolated extent of {sigma : E^2 <= threshold} around imin.
    Returns (lo, hi, clipped)."""
    clipped = False
    j = imin
    while j > 0 and prof[j - 1] <= threshold:
        j -= 1
    if j == 0:
        lo, clipped = float(grid[0]), True
    else:
        frac = (threshold - prof[j]) / (prof[j - 1] - prof[j])
        lo = float(grid[j] + frac * (grid[j - 1] - grid[j]))
    j = imin
    n = prof.shape[0]
    while j < n - 1 and prof[j + 1] <= threshold:
        j += 1
    if j == n - 1:
        hi, clipped = float(grid[-1]), True
    else:
        frac = (threshold - prof[j]) / (prof[j + 1] - prof[j])
        hi = float(grid[j] + frac * (grid[j + 1] - grid[j]))
    return lo, hi, clipped


def estimate_sigma_star(family: CrossingFamily) -> CriticalEstimate:
    """Estimate the critical density from a crossing family.

    Requires at least three box sizes.  sigma_star is the refined E^2
    argmin; stat_err is the half-width of the region where E^2 <= 2 e2_min
    (grid-interpolated); sys_err is twice the absolute shift of the
    estimate when the smallest box is dropped; combined_err is their sum.
    Diagnostics carry the 4x-minimum width, the per-drop estimates, and
    any degeneracy flags.
    """
    if len(family) < 3:
        raise ValueError(
            f"estimation needs >= 3 box sizes, got L_list={family.L_list}"
        )
    grid = family.sigma_grid
    prof = e_squared_profile(family.values)
    sigma_star, refined_e2, flags = _argmin_refined(grid, prof)
    imin = int(np.argmin(prof))
    # widths are measured against the grid minimum: the refined parabola
    # value can undercut every grid point, emptying the interpolated set
    e2_min = float(prof[imin])

    lo2, hi2, clip2 = _threshold_width(grid, prof, imin, 2.0 * e2_min)
    lo4, hi4, clip4 = _threshold_width(grid, prof, imin, 4.0 * e2_min)
    if clip2 or clip4:
        flags.append("stat-window-clipped")
    stat_err = 0.5 * (hi2 - lo2)

    drop1 = e_squared_profile(family.values[1:])
    sigma_drop1, _, drop_flags = _argmin_refined(grid, drop1)
    flags.extend(f"drop-smallest:{f}" for f in drop_flags)
    sys_err = 2.0 * abs(sigma_star - sigma_drop1)

    diagnostics = {
        "flags": flags,
        "grid_argmin": float(grid[imin]),
        "refined_e2": float(refined_e2),
        "width_2x": [lo2, hi2],
        "width_4x": [lo4, hi4],
        "drop_smallest_sigma_star": sigma_drop1,
    }
    if len(family) >= 4:
        try:
            sigma_drop2, _, _ = _argmin_refined(grid, e_squared_profile(family.values[2:]))
            diagnostics["drop_two_smallest_sigma_star"] = sigma_drop2
        except GridNarrowError:
            diagnostics["drop_two_smallest_sigma_star"] = None

    meta = dict(family.meta)
    meta["created"] = runmeta.created_iso()
    meta["config_hash"] = runmeta.config_hash(meta)
    return CriticalEstimate(
        sigma_star=sigma_star,
        stat_err=float(stat_err),
        sys_err=float(sys_err),
        combined_err=float(stat_err + sys_err),
        e2_min=float(e2_min),
        diagnostics=diagnostics,
        meta=meta,
    )


TABLE_COLUMNS = ("p", "sigma_star", "stat_err", "sys_err", "combined_err",
                 "L_list", "realizations")


def curve_table(estimates, bond_thresholds=None):
    """Assemble estimates at several p into table rows with sanity flags.

    Rows are sorted by p.  Flags (non-fatal): the critical density should
    decrease in p, stay above the d-dimensional bond threshold, and stay
    below the s-dimensional one, all within combined error bars.
    """
    thresholds = dict(BOND_THRESHOLD)
    if bond_thresholds:
        thresholds.update(bond_thresholds)
    ests = sorted(estimates, key=lambda e: e.meta["p"])
    rows = []
    prev = None
    for est in ests:
        p = float(est.meta["p"])
        d, s = est.meta.get("d"), est.meta.get("s")
        flags = []
        if prev is not None:
            p0, e0 = prev
            if est.sigma_star > e0.sigma_star + e0.combined_err + est.combined_err:
                flags.append(f"not-decreasing-vs-p={p0:g}")
        pc_d = thresholds.get(d)
        pc_s = thresholds.get(s)
        if pc_d is not None and p < pc_d:
            if est.sigma_star + est.combined_err < pc_d:
                flags.append("below-bulk-threshold")
            if pc_s is not None and est.sigma_star - est.combined_err > pc_s:
                flags.append("above-plane-threshold")
        rows.append(
            {
                "p": p,
                "sigma_star": est.sigma_star,
                "stat_err": est.stat_err,
                "sys_err": est.sys_err,
                "combined_err": est.combined_err,
                "L_list": list(est.meta.get("L_list", [])),
                "realizations": est.meta.get("realizations"),
                "flags": flags,
            }
        )
        prev = (p, est)
    return rows


def render_table_csv(rows) -> str:
    """CSV text for `curve_table` rows (flags join with ';')."""
    lines = ["# " + runmeta.FORMAT_TABLE,
             ",".join(TABLE_COLUMNS + ("flags",))]
    for r in rows:
        lines.append(
            ",".join(
                [
                    f"{r['p']:.6g}",
                    f"{r['sigma_star']:.8g}",
                    f"{r['stat_err']:.6g}",
                    f"{r['sys_err']:.6g}",
                    f"{r['combined_err']:.6g}",
                    ";".join(str(L) for L in r["L_list"]),
                    str(r["realizations"]),
                    ";".join(r["flags"]),
                ]
            )
        )
    return "\n".join(lines) + "\n"
