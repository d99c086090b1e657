"""Closed-form mean-field approximation of the critical defect density.

Valid deep in the small-p regime: the defect plane with its first
off-plane bond layers integrated out behaves like the plane alone with an
effective bond density, giving

    sigma*(p) ~ (sigma_c + (1 - p^3)^(2(d-s)) - 1) / (1 - p^3)^(2(d-s))
             =  sigma_c - 2 (d-s)(1 - sigma_c) p^3 + O(p^6)

where sigma_c is the critical density of the homogeneous s-dimensional
plane (1/2 for s = 2).  The closed form is meaningful only while
(1 - p^3)^(2(d-s)) exceeds 1 - sigma_c; beyond that it returns 0 with the
`beyond_validity` flag set.
"""

from __future__ import annotations

from typing import NamedTuple

PLANE_SIGMA_C = {2: 0.5}  # exact for the square lattice


class MeanFieldSigma(NamedTuple):
    value: float
    beyond_validity: bool


def _resolve_sigma_c(s: int, sigma_c):
    if sigma_c is None:
        if s in PLANE_SIGMA_C:
            return PLANE_SIGMA_C[s]
        raise ValueError(f"no default plane threshold for s={s}; pass sigma_c")
    if not 0.0 < sigma_c < 1.0:
        raise ValueError(f"sigma_c must be in (0, 1), got {sigma_c}")
    return float(sigma_c)


def _validate(p: float, d: int, s: int):
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must be in [0, 1], got {p}")
    if not 2 <= s <= d:
        raise ValueError(f"need 2 <= s <= d, got s={s}, d={d}")


def sigma_star_mf(p: float, d: int, s: int, sigma_c: float | None = None) -> MeanFieldSigma:
    """Mean-field critical defect density at bulk density p.

    Returns (value, beyond_validity); beyond the validity region the value
    is 0 and the flag is set.
    """
    _validate(p, d, s)
    sc = _resolve_sigma_c(s, sigma_c)
    factor = (1.0 - p**3) ** (2 * (d - s))
    if factor <= 1.0 - sc:
        return MeanFieldSigma(0.0, True)
    return MeanFieldSigma((sc + factor - 1.0) / factor, False)


def sigma_star_mf_cubic(p: float, d: int, s: int, sigma_c: float | None = None) -> float:
    """Leading small-p behaviour sigma_c - 2 (d-s)(1-sigma_c) p^3."""
    _validate(p, d, s)
    sc = _resolve_sigma_c(s, sigma_c)
    return sc - 2.0 * (d - s) * (1.0 - sc) * p**3


def meanfield_table(p_grid, d: int, s: int, sigma_c: float | None = None):
    """Rows (p, sigma_star_mf, beyond_validity, sigma_star_cubic)."""
    rows = []
    for p in p_grid:
        full = sigma_star_mf(float(p), d, s, sigma_c)
        rows.append(
            {
                "p": float(p),
                "sigma_star_mf": full.value,
                "beyond_validity": full.beyond_validity,
                "sigma_star_cubic": sigma_star_mf_cubic(float(p), d, s, sigma_c),
            }
        )
    return rows
