"""Convolution products of lattice probability measures, their Fourier-side
certificates, and the weighted ergodic averaging experiments they drive."""

from .measures import (
    DEFAULT_SUPPORT_CAP,
    CosetMass,
    Decomposition,
    LatticeMeasure,
    SequenceSpec,
    SupportCapError,
    convolve,
    convolve_prefixes,
    coset_mass_sup,
    delta,
    expectation,
    from_pairs,
    is_strictly_aperiodic,
    l1_distance,
    moment,
    prune,
    tv_shift_distance,
    variance,
)
from .spectral import (
    FourierProfile,
    PreconditionError,
    QuadratureError,
    decay_constant,
    doubling_defect,
    fourier_at,
    fourier_eval,
    holder_smoothness_check,
    offzero_modulus_bound,
    prefix_fourier_profiles,
    quadratic_minorant_check,
    two_atom_bound,
    uniform_grid,
    weighted_d2_integral,
    wrap_to_fundamental,
)
from .hypotheses import (
    Condition,
    HypothesisReport,
    check_convergence_hypotheses,
    check_sweepout_hypotheses,
    second_derivative_majorant_ratio,
    second_moment_floor,
)
from .dynamics import (
    DEFAULT_ALPHA,
    ConvergenceTrace,
    DynSystem,
    TestFunction,
    Weak11Row,
    coboundary_bound_check,
    convergence_trace,
    maximal_function,
    maximal_function_all,
    weak11_table,
    weighted_average,
    weighted_average_all,
)
from .sweepout import (
    FloorScanResult,
    SweepoutFamily,
    SweepoutSimulation,
    dissipativity_trace,
    example_decomposition,
    example_measure,
    fourier_floor_scan,
    geometric_family,
    inverse_square_family,
    scan_points,
    sweepout_simulation,
)

__version__ = "0.1.0"
