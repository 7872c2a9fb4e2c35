"""Upper-tail rate functions for planted-network directed metrics.

Submodules:
  geometry    points, pairs, polyline paths, Dirichlet metric, symmetries
  measures    planted network measures, entropy, measure rates
  metric      DP grid evaluation of e_mu, metric axioms, path lengths
  rates       Theta functionals, weight functions, partition/path/network rates
  jrate       the geodesic-rate convex program J(f) and its closed forms
  multipoint  constrained rate minimization over network topologies
  geodesics   rightmost geodesic extraction and the wander bound
  gradient    metric gradient profiles D_q e and the energy Q
  verify      the built-in verification suite (also: landscape-rate verify)
"""

__version__ = "0.1.0"

import os as _os

# Cap BLAS/OpenMP worker pools before numpy is first imported; numeric work
# here is elementwise or small-matrix, so honoring the cap costs nothing.
_threads = _os.environ.get("LANDSCAPE_RATE_THREADS")
if _threads:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                 "MKL_NUM_THREADS", "NUMEXPR_NUM_THREADS"):
        _os.environ.setdefault(_var, _threads)

from .geometry import (
    Partition,
    PolylinePath,
    SpaceTimePoint,
    SymmetryMap,
    TemporalPair,
    apply_symmetry,
    dirichlet_distance,
    dirichlet_energy,
    pair,
    polyline,
)
from .measures import (
    PlantedMeasure,
    SegmentNetwork,
    WeightedSegment,
    kruzhkov_entropy,
    measure_of_path_graph,
    planted,
    rate_of_measure,
    restrict,
    validate_network,
)
from .metric import (
    GridMetric,
    GridSpec,
    check_metric_axioms,
    evaluate_emu,
    evaluate_emu_grid,
    path_length_exact,
    path_length_partition,
)
from .rates import (
    RateReport,
    network_rate,
    partition_rate,
    path_rate,
    theta_point,
    theta_total,
    theta_total_from_measure,
    weight_function,
)
from .jrate import (
    JSolution,
    ProfileFunction,
    iota_eval,
    jrate_bounds,
    jrate_scaling_check,
    jrate_solve,
    jrate_superadditivity_check,
    jrate_two_piece,
    profile_from_breaks,
    profile_from_values,
    two_piece_profile,
    window_map,
)
from .multipoint import (
    MultipointSolution,
    PointConstraint,
    one_point_rate,
    point_constraint,
    solve_multipoint,
    two_point_rate,
    verify_optimizer_structure,
)
from .geodesics import (
    WanderReport,
    rightmost_geodesic,
    wander_check,
)
from .gradient import (
    GradientProfile,
    density_from_gradient,
    fd_density,
    fd_gradient_profile,
    gradient_profile,
    q_energy,
)

__all__ = [
    "Partition",
    "PolylinePath",
    "SpaceTimePoint",
    "SymmetryMap",
    "TemporalPair",
    "apply_symmetry",
    "dirichlet_distance",
    "dirichlet_energy",
    "pair",
    "polyline",
    "PlantedMeasure",
    "SegmentNetwork",
    "WeightedSegment",
    "kruzhkov_entropy",
    "measure_of_path_graph",
    "planted",
    "rate_of_measure",
    "restrict",
    "validate_network",
    "GridMetric",
    "GridSpec",
    "check_metric_axioms",
    "evaluate_emu",
    "evaluate_emu_grid",
    "path_length_exact",
    "path_length_partition",
    "RateReport",
    "network_rate",
    "partition_rate",
    "path_rate",
    "theta_point",
    "theta_total",
    "theta_total_from_measure",
    "weight_function",
    "JSolution",
    "ProfileFunction",
    "iota_eval",
    "jrate_bounds",
    "jrate_scaling_check",
    "jrate_solve",
    "jrate_superadditivity_check",
    "jrate_two_piece",
    "profile_from_breaks",
    "profile_from_values",
    "two_piece_profile",
    "window_map",
    "MultipointSolution",
    "PointConstraint",
    "one_point_rate",
    "point_constraint",
    "solve_multipoint",
    "two_point_rate",
    "verify_optimizer_structure",
    "WanderReport",
    "rightmost_geodesic",
    "wander_check",
    "GradientProfile",
    "density_from_gradient",
    "fd_density",
    "fd_gradient_profile",
    "gradient_profile",
    "q_energy",
    "__version__",
]
