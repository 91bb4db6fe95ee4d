"""Symbolic/numeric toolkit for systems of two second-order ODEs that
correspond to a scalar complex ODE: correspondence tests, canonical-form
reductions, symmetry-dimension classification and worked-example
verification."""

from .expr import (
    Expr, VarContext, parse, to_string, simplify, differentiate, substitute,
    eval_expr, free_symbols, coefficients_in, collect, zero_verdict,
)
from .cubic import OdeSystem2, CubicForm, extract_cubic, reassemble, \
    check_theorem2
from .csa import ComplexOde, check_cr, complexify, realify
from .canon import (
    CoefficientFn, LinearForm, PointTransformation, attempt_linear_equivalence,
    reduce_24_to_25, reduce_25_to_28, reduce_optimal, transform_system,
)
from .symmetry import (
    Classification, VectorField, check_symmetry, classify_beta,
    constant_beta_witnesses, determining_system_reduced,
    free_particle_algebra, generator_rank, prolong2_residuals,
)
from .verify import (
    CaseReport, Trajectory, integrate, residual_on_trajectory, run_example,
)

__all__ = [
    "Expr", "VarContext", "parse", "to_string", "simplify", "differentiate",
    "substitute", "eval_expr", "free_symbols", "coefficients_in", "collect",
    "zero_verdict",
    "OdeSystem2", "CubicForm", "extract_cubic", "reassemble",
    "check_theorem2",
    "ComplexOde", "check_cr", "complexify", "realify",
    "CoefficientFn", "LinearForm", "PointTransformation",
    "attempt_linear_equivalence", "reduce_24_to_25", "reduce_25_to_28",
    "reduce_optimal", "transform_system",
    "Classification", "VectorField", "check_symmetry", "classify_beta",
    "constant_beta_witnesses", "determining_system_reduced",
    "free_particle_algebra", "generator_rank", "prolong2_residuals",
    "CaseReport", "Trajectory", "integrate", "residual_on_trajectory",
    "run_example",
]
