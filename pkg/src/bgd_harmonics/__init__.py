"""Harmonic analysis on graph-directed domains of p.c.f. self-similar sets.

Typical use::

    from bgd_harmonics import get_example, domain_trace_fixed_point, flux_transfer_matrices

    spec = get_example("sg-cut").spec()
    traces = domain_trace_fixed_point(spec, tol=1e-10)
    flux = flux_transfer_matrices(spec, traces)
"""

from .bgd import (
    BD,
    AdmissibleWord,
    BgdEdge,
    BgdSpec,
    Domain,
    DomainTrace,
    DomainTraceSet,
    FluxTransferSet,
    assemble_domain_network,
    domain_trace_fixed_point,
    enumerate_words,
    flux_transfer_matrices,
    validate_bgd,
)
from .estimator import HarmonicMeasureEstimator
from .exceptions import *  # noqa: F401,F403
from .measure import (
    CylinderMeasureContext,
    SimpleBoundaryFunction,
    boundary_mean,
    cylinder_measure,
    energy_functional,
    harmonic_energy,
    harmonic_space_diagnostics,
    measure_equivalence_ratio,
    measure_vector,
    poisson_value,
    poisson_value_extended,
    selfsimilar_decomposition_residual,
)
from .network import ElectricNetwork, dirichlet_solve, effective_resistance, neumann_derivative, trace
from .oracle import WalkConfig, build_approx_network, direct_hitting, random_walk_hitting, richardson_report
from .pcf import (
    CanonicalVertex,
    HarmonicStructure,
    PcfStructure,
    Symmetry,
    apply_symmetry,
    build_level_network,
    canonicalize,
    validate_structure,
)
from .registry import get_example

__version__ = "0.1.0"
