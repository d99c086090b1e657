"""
Mean-field critical plane density
=================================

The tree-graph (mean-field) approximation gives a closed form for the
critical plane density sigma*(p): a defect bond is effectively open if the
bond itself is open or a short bulk detour around it is, which renormalizes
the plane density and depresses the threshold below the isolated-plane
value sigma_c.  The form is valid while the renormalization stays within
[0, 1]; past that the predicted threshold hits zero (bulk paths alone
percolate the plane region).
"""

import numpy as np

from defectperc import sigma_star_mf, sigma_star_mf_cubic, meanfield_table

d, s = 3, 2

print("p      full        cubic       beyond_validity")
for row in meanfield_table(np.arange(0.0, 0.65, 0.05), d, s):
    cubic = sigma_star_mf_cubic(row["p"], d, s)
    print(f"{row['p']:.2f}   {row['sigma_star_mf']:.6f}   {cubic:.6f}   "
          f"{row['beyond_validity']}")

# the cubic form sigma_c - (1 - sigma_c) * 2(d-s) p^3 is the small-p
# expansion; the gap to the full form is O(p^6)
print("\nsmall-p gap |full - cubic|:")
for p in (0.05, 0.10, 0.20):
    full = sigma_star_mf(p, d, s).value
    print(f"  p = {p:.2f}: {abs(full - sigma_star_mf_cubic(p, d, s)):.2e} "
          f"(3 p^6 = {3 * p ** 6:.2e})")

# codimension matters: more bulk detours around a defect bond in (4,2)
# than in (3,2), so the depression is stronger
p = 0.2
v32 = sigma_star_mf(p, 3, 2).value
v42 = sigma_star_mf(p, 4, 2).value
print(f"\nat p = {p}: sigma*_mf(3,2) = {v32:.5f}, sigma*_mf(4,2) = {v42:.5f}")

# locate the validity edge for (3,2): smallest p with a zero threshold
lo, hi = 0.5, 1.0
for _ in range(60):
    mid = 0.5 * (lo + hi)
    if sigma_star_mf(mid, 3, 2).beyond_validity:
        hi = mid
    else:
        lo = mid
print(f"validity edge for (3,2): p = {hi:.6f} "
      f"(exact (1 - 0.5^(1/2))^(1/3) = {(1 - 0.5 ** 0.5) ** (1 / 3):.6f})")
