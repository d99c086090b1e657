"""Bond percolation on Z^d with a higher-density defect plane.

Simulation and analysis toolkit for inhomogeneous bond percolation where
bulk bonds open with probability p and the bonds of an s-dimensional
coordinate plane through the origin open with probability sigma.  The
package measures plane-assisted crossing curves with a microcanonical
sweep, locates the critical plane density by finite-size curve collapse,
and cross-checks the samplers against exact small-animal enumeration,
mean-field theory, and ghost-field differential inequalities.
"""

from ._rng import RNG_FAMILY, PyStream
from .lattice import (
    LatticeSpec,
    EdgeTable,
    build_edge_table,
    face_vertices,
    neighbor_tables,
    boundary_mask,
    origin_index,
    vertex_coords,
    vertex_index,
)
from .sampler import (
    MicrocanonicalCurve,
    CanonicalCurve,
    MicrocanonicalAccumulator,
    DisjointSetForest,
    run_sweep,
    run_homogeneous,
    run_realization,
    sweep_thresholds,
    binomial_weights,
    convolve,
    convolve_grid,
)
from .observables import (
    ClusterSample,
    ClusterDistribution,
    DecayFitResult,
    InequalityAuditResult,
    sample_origin_cluster,
    sample_cluster_distribution,
    ghost_theta,
    ghost_chi,
    regime_exponents,
    decay_fit,
    inequality_audit,
)
from .estimator import (
    CrossingFamily,
    CriticalEstimate,
    GridNarrowError,
    e_squared,
    e_squared_profile,
    estimate_sigma_star,
    curve_table,
    render_table_csv,
    BOND_THRESHOLD,
)
from .meanfield import (
    MeanFieldSigma,
    sigma_star_mf,
    sigma_star_mf_cubic,
    meanfield_table,
    PLANE_SIGMA_C,
)
from .animals import (
    AnimalCensus,
    CapExceededError,
    CoverageError,
    enumerate_census,
    enumerate_naive,
    exact_edge_pmf,
    exact_vertex_pmf,
    pmf_from_partition,
    partition_function_edges,
    partition_function_vertices,
    identity_audit,
    supermult_audit,
    concatenation_factor,
)

__version__ = "0.1.0"

__all__ = [
    "RNG_FAMILY",
    "PyStream",
    "LatticeSpec",
    "EdgeTable",
    "build_edge_table",
    "face_vertices",
    "neighbor_tables",
    "boundary_mask",
    "origin_index",
    "vertex_coords",
    "vertex_index",
    "MicrocanonicalCurve",
    "CanonicalCurve",
    "MicrocanonicalAccumulator",
    "DisjointSetForest",
    "run_sweep",
    "run_homogeneous",
    "run_realization",
    "sweep_thresholds",
    "binomial_weights",
    "convolve",
    "convolve_grid",
    "ClusterSample",
    "ClusterDistribution",
    "DecayFitResult",
    "InequalityAuditResult",
    "sample_origin_cluster",
    "sample_cluster_distribution",
    "ghost_theta",
    "ghost_chi",
    "regime_exponents",
    "decay_fit",
    "inequality_audit",
    "CrossingFamily",
    "CriticalEstimate",
    "GridNarrowError",
    "e_squared",
    "e_squared_profile",
    "estimate_sigma_star",
    "curve_table",
    "render_table_csv",
    "BOND_THRESHOLD",
    "MeanFieldSigma",
    "sigma_star_mf",
    "sigma_star_mf_cubic",
    "meanfield_table",
    "PLANE_SIGMA_C",
    "AnimalCensus",
    "CapExceededError",
    "CoverageError",
    "enumerate_census",
    "enumerate_naive",
    "exact_edge_pmf",
    "exact_vertex_pmf",
    "pmf_from_partition",
    "partition_function_edges",
    "partition_function_vertices",
    "identity_audit",
    "supermult_audit",
    "concatenation_factor",
    "__version__",
]
