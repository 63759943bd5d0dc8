"""Young conjugates of weight functions and numerical checks of weighted spaces of entire functions."""
from .conjugate import (
    GridFunction,
    biconjugate_check,
    conjugate_at,
    corollary1_series,
    eq21_identity_check,
    lemma1_check,
    lemma2_forward_check,
    lemma2_reverse_check,
    lemma4_slope_check,
    young_conjugate,
)
from .config import RunConfig, parse_config
from .entire import EntireFunction, cauchy_derivative, derivative_table, growth_profile, parse_function, taylor_extend
from .errors import (
    DivergenceSuspected,
    InsufficientDataError,
    InvalidParameterError,
    PreconditionError,
    RegularizationError,
    WeightSpaceError,
    WindowTooSmallError,
)
from .fourier import QuadratureSpec, fourier_transform, inverse_transform, theorem3_check
from .grids import GridSpec
from .norms import (
    PsiStar,
    SpaceParams,
    VerificationReport,
    g_norm,
    lemma3_check,
    norm_report,
    p_norm,
    s_norm,
    theorem1_check,
    theorem2_check,
    theorem4_equivalence_check,
)
from .weights import WeightFunction, check_admissibility, compose_exp, make_weight, parse_weight, regularize_at_zero

__version__ = "0.1.0"
