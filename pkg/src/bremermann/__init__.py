"""Plurisubharmonic envelopes and maximal solutions of the Bremermann-Dirichlet problem in C and C^2."""
from .analysis import SandwichReport, discrete_levi_spectrum, pluriharmonic_sandwich, q_bremermann_check
from .envelope import (
    circle_mean,
    harmonic_solution,
    lipschitz_certificate,
    max_glue,
    pb_properties_suite,
    psh_envelope,
    psh_test,
    psuperh_envelope,
    q_psh_envelope,
    slice_max_check,
)
from .errors import *  # noqa: F401,F403
from .expr import parse_trace_expr
from .fields import BoundaryTrace, EnvelopeConfig, ScalarField, read_field_csv
from .geometry import (
    BoxRegion,
    DomainSpec,
    ExhaustionPlan,
    Grid,
    build_exhaustion,
    build_grid,
    classify_point,
    lupacciolu_check,
    normalize_domain,
    recession_direction,
    veronese_dimension,
)
from .manifest import RunManifest
from .unbounded import (
    BarrierCertificate,
    GrowthProfile,
    boundary_family,
    continuity_certificate,
    continuous_solution,
    defining_function,
    envelope_sup_over_extensions,
    exhaustion_grid,
    growth_profile,
    maximal_solution,
)

__version__ = "0.1.0"
