"""Correspondence between real systems of two second-order ODEs and scalar
complex ODEs: Cauchy-Riemann checks and the conversions in both directions.

Complex quantities are carried as (real, imaginary) Expr pairs throughout;
there is no complex scalar type in the kernel.
"""

from __future__ import annotations

from dataclasses import dataclass

from .expr import (
    Expr, VarContext, ExprError, add, differentiate, mul, neg, simplify,
    to_string, zero_verdict, C, Symbol, Pow,
)
from .cubic import OdeSystem2
from .reports import ConditionCheck, ConditionReport


class CrViolated(ExprError):
    def __init__(self, condition: str):
        super().__init__(f"Cauchy-Riemann condition failed: {condition}")
        self.condition = condition


@dataclass(frozen=True)
class ComplexOde:
    """u'' = omega(x, u, u') with u = y + i z, represented by the real and
    imaginary parts of omega expressed in (x, y, z, y', z').

    Constructed through `complexify`, which enforces the CR conditions.
    """

    ctx: VarContext
    re_omega: Expr
    im_omega: Expr


def check_cr(sys: OdeSystem2, seed: int = 0) -> ConditionReport:
    """Verdicts for the four Cauchy-Riemann conditions pairing the system
    with a scalar complex equation."""
    ctx = sys.ctx
    y, z = ctx.dependents
    yp, zp = ctx.first_derivatives
    w1, w2 = sys.omega1, sys.omega2
    pairs = [
        (f"d(omega1)/d{y} = d(omega2)/d{z}",
         differentiate(w1, y), differentiate(w2, z), 1),
        (f"d(omega1)/d{z} = -d(omega2)/d{y}",
         differentiate(w1, z), differentiate(w2, y), -1),
        (f"d(omega1)/d{yp} = d(omega2)/d{zp}",
         differentiate(w1, yp), differentiate(w2, zp), 1),
        (f"d(omega1)/d{zp} = -d(omega2)/d{yp}",
         differentiate(w1, zp), differentiate(w2, yp), -1),
    ]
    checks = []
    for label, lhs, rhs, sign in pairs:
        diff = simplify(lhs - mul(C(sign), rhs))
        v = zero_verdict(diff, seed=seed)
        detail = "" if v.is_zero else f"difference = {to_string(diff)}"
        checks.append(ConditionCheck(label, v.is_zero, v.method, detail))
    return ConditionReport(title="Cauchy-Riemann conditions",
                           checks=tuple(checks))


def complexify(sys: OdeSystem2, seed: int = 0) -> ComplexOde:
    """View a CR-satisfying system as a single scalar complex equation."""
    report = check_cr(sys, seed=seed)
    if not report.overall:
        raise CrViolated(report.failing()[0].name)
    return ComplexOde(sys.ctx, sys.omega1, sys.omega2)


def _check_pair_cr(name: str, re_part: Expr, im_part: Expr,
                   ctx: VarContext, seed: int) -> None:
    y, z = ctx.dependents
    c1 = simplify(differentiate(re_part, y) - differentiate(im_part, z))
    c2 = simplify(differentiate(re_part, z) + differentiate(im_part, y))
    if not zero_verdict(c1, seed=seed).is_zero:
        raise CrViolated(f"d(Re {name})/d{y} = d(Im {name})/d{z}")
    if not zero_verdict(c2, seed=seed).is_zero:
        raise CrViolated(f"d(Re {name})/d{z} = -d(Im {name})/d{y}")


def realify(E3, E2, E1, E0, ctx: VarContext | None = None,
            seed: int = 0) -> OdeSystem2:
    """Split the complex cubic equation with coefficients E3..E0 (given as
    (real, imaginary) Expr pairs in (x, y, z)) into its real system.

    Each coefficient pair must be analytic in y + i z, i.e. satisfy the
    two-variable CR conditions; otherwise CrViolated is raised.
    """
    if ctx is None:
        ctx = VarContext()
    for name, pair in (("E3", E3), ("E2", E2), ("E1", E1), ("E0", E0)):
        _check_pair_cr(name, pair[0], pair[1], ctx, seed)
    a11, a12 = E3
    b11, b12 = E2
    g11, g12 = E1
    d11, d12 = E0
    yp, zp = (Symbol(n) for n in ctx.first_derivatives)

    def p(base, n):
        return Pow(base, n) if n != 1 else base

    lhs1 = add(
        mul(a11, p(yp, 3)), mul(C(-3), a12, p(yp, 2), zp),
        mul(C(-3), a11, yp, p(zp, 2)), mul(a12, p(zp, 3)),
        mul(b11, p(yp, 2)), mul(C(-2), b12, yp, zp), neg(mul(b11, p(zp, 2))),
        mul(g11, yp), neg(mul(g12, zp)), d11,
    )
    lhs2 = add(
        mul(a12, p(yp, 3)), mul(C(3), a11, p(yp, 2), zp),
        mul(C(-3), a12, yp, p(zp, 2)), neg(mul(a11, p(zp, 3))),
        mul(b12, p(yp, 2)), mul(C(2), b11, yp, zp), neg(mul(b12, p(zp, 2))),
        mul(g12, yp), mul(g11, zp), d12,
    )
    return OdeSystem2(ctx, simplify(neg(lhs1)), simplify(neg(lhs2)))
