"""Spectral flow of elliptic operators on Morse sublevel-set deformations."""
__version__ = "0.1.0"

from .assembly import AssembledSystem, AssemblyError, assemble, bilinear_form, jacobi_residual
from .eigen import EigenError, EigenResult, minmax_verify, rayleigh_quotient, smallest_eigenpairs
from .flow import (
    FlowError,
    GridPolicy,
    SpectralSample,
    SweepReport,
    Tolerances,
    check_monotonicity,
    continuity_report,
    morse_index_direct,
    morse_index_summed,
    nullity_of_sample,
    run_sweep,
)
from .kernels import BACKEND
from .operators import OperatorError, OperatorSpec, check_ellipticity, cmc_cylinder_stability, make_operator
from .surface import (
    CriticalCatalog,
    CriticalPoint,
    Identification,
    ScalarField,
    SublevelDomain,
    SurfaceError,
    TriangulatedSurface,
    build_surface,
    euler_characteristic,
    geodesic_distance,
    morse_function,
    read_off,
    stretch_metric,
    sublevel_domain,
    write_off,
)
from .trace_lab import (
    LipschitzTriple,
    TubularField,
    build_cutoff,
    decay_experiment,
    lipschitz_bound_check,
    make_triple,
    mollify_boundary,
)
