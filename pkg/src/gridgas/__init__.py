"""Exact grid algebra and Monte Carlo statistics for the Boltzmann-Grad
limit of Lorentz gases whose scatterers sit on finite unions of grids.

Layers, bottom up:

- exactfield, intlinalg: exact arithmetic in a real number field
  Q(alpha) and integer/rational linear algebra (HNF, kernels,
  saturation).
- gridalg: grids c(Z^d + w)M, commensurability classes, canonical and
  admissible presentations, rational subspace invariants, torus
  component enumeration.
- latticescan, streams: float lattice point enumeration in band
  intersections and deterministic counter-based rng streams.
- homspace: Haar sampling of random configurations, free path tail
  estimation, the per-class product formula, mean count checks.
- flight: the limiting random flight process (first collision,
  Markov transition kernel, class merging, trajectories).
- scene: the finite-radius gas (ray tracing, billiard trajectories,
  rescaled free path sampling).
- labcli: the ``gridgas`` command line tool and statistics utilities.
"""

from .exactfield import AlgebraicNumber, FieldError, NumberField
from .gridalg import (
    Grid,
    GridError,
    OrbitCapError,
    Presentation,
    RationalSubspace,
    canonical_presentation,
    enumerate_window,
    generic_subspace,
    grid_point_index,
    is_admissible,
    make_admissible,
    mark_subspace,
    merge_class,
    smallest_rational_subspace,
    torus_components,
)
from .latticescan import NumericalError
from .homspace import (
    RandomConfiguration,
    TailEstimate,
    count_in_cylinder,
    first_passage,
    haar_sl2,
    phi_from_tail,
    product_tail,
    random_configuration,
    sample_torus,
    siegel_check,
    tail_estimate,
)
from .flight import (
    FlightEvent,
    exit_parameter,
    merged_transition,
    run_flight,
    run_trajectories,
    sample_initial,
    sample_transition,
    scatter,
)
from .scene import Hit, ScattererScene, Trajectory, reflect, sample_path_lengths
from .labcli import ConfigError, ecdf, ks_two_sample, loglog_slope, main

__version__ = "0.1.0"

__all__ = [
    "AlgebraicNumber",
    "ConfigError",
    "FieldError",
    "FlightEvent",
    "Grid",
    "GridError",
    "Hit",
    "NumberField",
    "NumericalError",
    "OrbitCapError",
    "Presentation",
    "RandomConfiguration",
    "RationalSubspace",
    "ScattererScene",
    "TailEstimate",
    "Trajectory",
    "canonical_presentation",
    "count_in_cylinder",
    "ecdf",
    "enumerate_window",
    "exit_parameter",
    "first_passage",
    "generic_subspace",
    "grid_point_index",
    "haar_sl2",
    "is_admissible",
    "ks_two_sample",
    "loglog_slope",
    "main",
    "make_admissible",
    "mark_subspace",
    "merge_class",
    "merged_transition",
    "phi_from_tail",
    "product_tail",
    "random_configuration",
    "reflect",
    "run_flight",
    "run_trajectories",
    "sample_initial",
    "sample_path_lengths",
    "sample_torus",
    "sample_transition",
    "scatter",
    "siegel_check",
    "smallest_rational_subspace",
    "tail_estimate",
    "torus_components",
    "__version__",
]
