"""Multi-line KP solitons, the finite Toda lattice and their spectral divisors."""

__version__ = "0.1.0"

from .errors import (
    AnchorUnavailableError,
    DegenerateFlowError,
    DivisorConsistencyError,
    DualityViolationError,
    InvalidDivisorError,
    KernelViolationError,
    OrderingError,
    OrderRangeError,
    PoleError,
    PositivityError,
    SizeError,
    SolitonDataError,
    SpectrumMismatchError,
    TodaKPError,
)
from .soliton_data import (
    AlphaVector,
    GrassmannRep,
    SolitonData,
    alpha_coordinates,
    from_alpha,
    make_soliton_data,
    maximal_minors,
    reciprocal_weights,
    representative_matrix,
    rref_coefficients,
    rref_matrix,
)
from .tau_engine import TauValue, TimeVector, heat_basis, kp_field, log_tau_all, tau
from .toda_core import (
    TodaState,
    ba_vectors,
    bruhat_flow,
    flow_invariant_residuals,
    jacobi_matrix,
    minor_polynomials,
    principal_spectrum,
    spectral_residues,
)
from .darboux import CurvePoint, DarbouxOperator, WaveValue, darboux_operator, gluing_residual, wavefunction
from .divisor_lab import (
    Divisor,
    compatible_divisor,
    divisor_identity_residuals,
    invert_divisor,
    make_divisor,
    toda_from_divisor_flow,
    vacuum_divisor,
)
from .duality import DualPair, const_ratios, dual_data, dual_divisor, dual_pair, duality_residuals

__all__ = [
    "AlphaVector",
    "AnchorUnavailableError",
    "CurvePoint",
    "DarbouxOperator",
    "DegenerateFlowError",
    "Divisor",
    "DivisorConsistencyError",
    "DualPair",
    "DualityViolationError",
    "GrassmannRep",
    "InvalidDivisorError",
    "KernelViolationError",
    "OrderRangeError",
    "OrderingError",
    "PoleError",
    "PositivityError",
    "SizeError",
    "SolitonData",
    "SolitonDataError",
    "SpectrumMismatchError",
    "TauValue",
    "TimeVector",
    "TodaKPError",
    "TodaState",
    "WaveValue",
    "alpha_coordinates",
    "ba_vectors",
    "bruhat_flow",
    "compatible_divisor",
    "const_ratios",
    "darboux_operator",
    "divisor_identity_residuals",
    "dual_data",
    "dual_divisor",
    "dual_pair",
    "duality_residuals",
    "flow_invariant_residuals",
    "from_alpha",
    "gluing_residual",
    "heat_basis",
    "invert_divisor",
    "jacobi_matrix",
    "kp_field",
    "log_tau_all",
    "make_divisor",
    "make_soliton_data",
    "maximal_minors",
    "minor_polynomials",
    "principal_spectrum",
    "reciprocal_weights",
    "representative_matrix",
    "rref_coefficients",
    "rref_matrix",
    "spectral_residues",
    "tau",
    "toda_from_divisor_flow",
    "vacuum_divisor",
    "wavefunction",
]
