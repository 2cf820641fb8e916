"""Coherent-state families, expectation-valued Hamiltonians, and label-space dynamics."""

__version__ = "0.1.0"

from .errors import CapacityError, DomainError, InvalidTransformError, NumericalFailure
from .hilbert import (
    HalfLineRep,
    LineRep,
    SpinRep,
    StateVector,
    apply_unitary,
    build_fock_rep,
    build_halfline_rep,
    build_spin_rep,
    commutator_defect,
    expectation,
    variance,
)
from .coherent import (
    CoherentFamily,
    MetricTensor2,
    affine_cs,
    affine_family,
    affine_fiducial,
    angles_to_pq,
    canonical_cs,
    canonical_family,
    extended_cs,
    extended_family,
    fiducial_moments,
    fiducial_p2_closed,
    fiducial_q_moment_closed,
    fs_metric_analytic,
    fs_metric_numeric,
    overlap,
    pq_to_angles,
    required_fock_dim,
    scalar_curvature,
    spin_cs,
    spin_family,
)
from .correspondence import (
    EnhancedHamiltonian,
    LimitFit,
    OperatorPolynomial,
    classical_limit,
    classical_value,
    enhance,
    parse_polynomial,
    poly_expectation,
    shift_identity_check,
)
from .dynamics import (
    CanonicalTransform,
    PhasePoint,
    Trajectory,
    TrajectoryEvent,
    apply_transform,
    hamiltonian_flow,
    line_integral_p_dq,
    restricted_action_value,
    rotation_transform,
    scaling_transform,
    transform_hamiltonian,
    verify_transform_action,
)
from .models import (
    HydrogenParams,
    default_hydrogen_rep,
    hydrogen_classical,
    hydrogen_enhanced,
    min_radius,
    spin_precession,
)
