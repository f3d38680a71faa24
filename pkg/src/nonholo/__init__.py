"""Mechanics on general algebroids and nonholonomic reduction."""
from .algebroid import (
    Algebroid,
    FiberFunction,
    Section,
    bracket_sections,
    check_lie,
    check_skew,
    complete_lift_apply,
    eval_structure,
    jacobiator,
    lift_function,
)
from .errors import (
    BlowUpError,
    DegenerateConstraintError,
    DimensionError,
    InvalidParameterError,
    NonFiniteStateError,
    NonholoError,
    NotQuasiLieError,
    SingularMetricError,
)
from .integrator import Trajectory, drift_report, integrate, rk4_step
from .mechanics import (
    MechanicalLagrangian,
    PhasePoint,
    State,
    el_vector_field,
    energy,
    legendre,
    tulczyjew_differential,
)
from .nonholonomic import (
    Projector,
    ReducedAlgebroid,
    Subbundle,
    complete_frame,
    nilpotent_double,
    nonholonomic_el_vector_field,
    oblique_projector,
    orthogonal_projector,
    reduce_algebroid,
    restricted_lagrangian,
    verify_theorem_5_1,
)
from .smooth import SmoothMap
from .symmetry import (
    SymmetryCandidate,
    is_symmetry,
    momentum_rate_check,
    noether_charge,
    search_symmetries,
    symmetry_defect,
)
from .systems import REGISTRY, get_system

__version__ = "0.1.0"
