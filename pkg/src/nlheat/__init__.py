"""Desk-scale laboratory for finite-time blowup of u_t = lap(u) + u**b:
oscillatory data on the torus, dyadic-block Besov norms, Fourier-side
blowup certificates, and pseudo-spectral simulation."""

from .errors import NumericalAbort, ValidationError
from .spectral import (
    RealField,
    SpectralField,
    TorusGrid,
    convolve,
    dyadic_rescale,
    heat_multiply,
    l1_spectrum,
    load_field,
    lp_norm,
    save_field,
    spectral_power,
    transform_forward,
    transform_inverse,
)
from .littlewood_paley import (
    BesovReport,
    FilterBank,
    besov_norm,
    build_filter_bank,
    dyadic_block,
)
from .data_builder import (
    BumpSpec,
    Schedule,
    build_bump,
    build_u0n,
    fujita_check,
    modulated_term,
    schedule_values,
)
from .certificate import (
    BlowupSearch,
    CertificateParams,
    CertificateSequence,
    ThresholdConstant,
    build_sequence,
    c_delta,
    certified_blowup_n,
    divergence_report,
    growth_sum,
    lemma2_threshold,
    lower_bound_field,
    theorem_constant,
)
from .solver import (
    LowerBoundReport,
    PicardRun,
    SolverConfig,
    Trajectory,
    admissible_window,
    picard_iterate,
    simulate,
    theorem1_diagnostics,
    verify_lower_bound,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "ValidationError",
    "NumericalAbort",
    "TorusGrid",
    "RealField",
    "SpectralField",
    "transform_forward",
    "transform_inverse",
    "convolve",
    "spectral_power",
    "heat_multiply",
    "lp_norm",
    "l1_spectrum",
    "dyadic_rescale",
    "save_field",
    "load_field",
    "FilterBank",
    "BesovReport",
    "build_filter_bank",
    "dyadic_block",
    "besov_norm",
    "BumpSpec",
    "Schedule",
    "build_bump",
    "build_u0n",
    "modulated_term",
    "schedule_values",
    "fujita_check",
    "CertificateParams",
    "CertificateSequence",
    "ThresholdConstant",
    "BlowupSearch",
    "c_delta",
    "build_sequence",
    "divergence_report",
    "lemma2_threshold",
    "lower_bound_field",
    "theorem_constant",
    "growth_sum",
    "certified_blowup_n",
    "SolverConfig",
    "Trajectory",
    "PicardRun",
    "LowerBoundReport",
    "simulate",
    "picard_iterate",
    "verify_lower_bound",
    "theorem1_diagnostics",
    "admissible_window",
]
