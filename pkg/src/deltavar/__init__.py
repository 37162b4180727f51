"""Delta calculus on affine-jump time scales and higher-order variational problems."""

from .deltacalc import (
    GridFunction,
    check_by_parts,
    check_commutation,
    check_product_rule,
    check_transfor,
    compose_delta_sigma,
    compose_sigma_delta,
    delta_derivative,
    delta_derivative_n,
    delta_integral,
    shift_sigma,
)
from .errors import (
    DeltaVarError,
    EvalDomainError,
    ExprSyntaxError,
    HypothesisViolation,
    ProblemSizeError,
    SolverDivergenceError,
    ValidationError,
)
from .lagrangian import LagrangianExpr, evaluate, parse, partials
from .timescale import TimeScale, make_explicit, make_qscale, make_uniform
from .variational import (
    SolveReport,
    VariationalProblem,
    admissible_variation_basis,
    boundary_pin,
    el_residual,
    first_variation,
    functional_value,
    fundamental_lemma_probe,
    solve,
    trajectory,
    weak_norm,
)

__version__ = "0.1.0"
