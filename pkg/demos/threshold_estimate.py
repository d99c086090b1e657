"""
Critical plane density from finite-size curve collapse
======================================================

At fixed bulk density p below the bulk threshold, the plane-assisted
crossing curves Q_L(p, sigma) for different box sizes L cross near the
critical plane density sigma*(p).  The estimator locates the crossing as
the minimizer of the pairwise curve spread E^2(sigma) and reports a
statistical width plus a drop-one-box systematic.
"""

import numpy as np

from defectperc import (
    LatticeSpec,
    CrossingFamily,
    run_sweep,
    convolve_grid,
    e_squared_profile,
    estimate_sigma_star,
    curve_table,
    render_table_csv,
)


def family_at(p, Ls, realizations, grid, seed0):
    curves = []
    for L in Ls:
        micro = run_sweep(LatticeSpec(3, 2, L), p, realizations, seed=seed0 + L)
        curves.append(convolve_grid(micro, grid))
    return CrossingFamily.from_curves(curves)


def main():
    grid = np.arange(0.40, 0.60 + 1e-12, 0.002)
    Ls = (4, 6, 8)
    realizations = 2000

    estimates = []
    for p, seed0 in ((0.0, 300), (0.1, 400)):
        fam = family_at(p, Ls, realizations, grid, seed0)
        est = estimate_sigma_star(fam)
        estimates.append(est)
        print(f"p = {p:.2f}: sigma* = {est.sigma_star:.4f} "
              f"+- {est.stat_err:.4f} (stat) +- {est.sys_err:.4f} (sys)")
        print(f"  boxes L = {Ls}, drop-smallest check: "
              f"{est.diagnostics['drop_smallest_sigma_star']:.4f}")

    # the E^2 profile behind the p = 0.1 estimate
    fam = family_at(0.1, Ls, realizations, grid, 400)
    prof = e_squared_profile(fam.values)
    imin = int(np.argmin(prof))
    lo, hi = max(imin - 3, 0), min(imin + 4, len(grid))
    print("\nE^2 profile near the minimum (p = 0.1):")
    for i in range(lo, hi):
        marker = "  <- min" if i == imin else ""
        print(f"  sigma = {grid[i]:.3f}   E^2 = {prof[i]:.5f}{marker}")

    # the flags column marks sanity checks that fail beyond the combined
    # error; small boxes sit above the isolated-plane threshold, so the
    # p = 0 row picks up an above-plane-threshold flag until L grows
    print("\ntable (CSV):")
    print(render_table_csv(curve_table(estimates)))


if __name__ == "__main__":
    main()
