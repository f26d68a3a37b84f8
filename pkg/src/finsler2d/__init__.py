"""Numerical engine for two-dimensional (alpha,beta)-Finsler metrics."""

__version__ = "0.1.0"

from .exprlang import (  # noqa: F401
    Expr,
    ExprError,
    MetricDef,
    format_metric_def,
    parse_expr,
    parse_metric_def,
    pretty,
)
from .jets import Jet, JetDomainError, eval_jet, finite_diff_oracle  # noqa: F401
from .phi import (  # noqa: F401
    PhiDomainError,
    PhiEval,
    PhiSpec,
    phi_eval,
    phi_identity_residual,
    phi_integral_j4,
    regularity_check,
)
from .geometry import (  # noqa: F401
    CovariantData,
    MetricAt,
    PositiveDefiniteError,
    christoffel,
    covariant_data,
    gauss_curvature,
    metric_at,
    riemann_spray,
    riemann_spray_direct,
)
from .finsler import (  # noqa: F401
    FinslerDomainError,
    SprayEval,
    direct_spray_oracle,
    finsler_norm,
    finsler_spray,
    hamel_residual,
    projective_factor,
)
from .criteria import (  # noqa: F401
    ConditionReport,
    DouglasFit,
    classify,
    douglas_fit,
    projective_factor_formula,
    prop34_residual,
    prop35_residual,
    quadratic_spray_fit,
    rij_condition_check,
    special_frame,
    spray_form_fit,
)
from .curvature import (  # noqa: F401
    CurvatureEval,
    curvature_eval,
    flag_curvature_2d,
    h_tensors,
    k_curvature,
    matsumoto_pflat_test,
    riemann_curvature,
)
from .deform import (  # noqa: F401
    DeformedMetric,
    HarmonicPair,
    bar_alpha,
    construct_rem61,
    construct_thm12_ii,
    kropina_deform,
    m3_deform,
)
