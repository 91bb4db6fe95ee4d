"""Numeric trajectory engine and the worked-example corpus.

Integrates systems, pushes trajectories through point transformations,
measures how well the transformed trajectory satisfies a target system,
and reproduces the four nonlinear geodesic-type applications end to end.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.interpolate import make_interp_spline

from .canon import (
    CoefficientFn, LinearForm, PointTransformation, reduce_24_to_25,
    reduce_25_to_28, total_derivative, transform_system,
)
from .csa import check_cr
from .cubic import OdeSystem2, extract_cubic, check_theorem2
from .expr import (
    C, Expr, ExprError, EvalDomainError, VarContext, ZERO, div, eval_expr,
    mul, parse, simplify, substitute, sym, to_string, zero_verdict,
)
from .reports import ConditionCheck
from .symmetry import classify_beta


class Blowup(ExprError):
    """The integrated state left the trusted range."""


class DomainError(ExprError):
    """A right-hand side hit a pole or other undefined point."""


class NonMonotone(ExprError):
    """The transformed independent variable is not monotone."""


class InaccurateIntegration(ExprError):
    """Step-halving disagreement exceeded the sanity tolerance."""


@dataclass(eq=False)
class Trajectory:
    """A sampled numeric solution of a system of two second-order ODEs."""

    xs: np.ndarray
    states: np.ndarray  # columns: y, z, y', z'
    generator: OdeSystem2
    step: float


def _numeric_rhs(sys: OdeSystem2, params: dict | None = None):
    ctx = sys.ctx
    names = (ctx.independent, *ctx.dependents, *ctx.first_derivatives)
    extra = dict(params or {})

    def f(t, s):
        b = dict(zip(names, (t, s[0], s[1], s[2], s[3])))
        b.update(extra)
        w1 = eval_expr(sys.omega1, b)
        w2 = eval_expr(sys.omega2, b)
        return np.array([s[2], s[3], w1, w2])

    return f


def _rk4_traj(f, x0, s0, x_end, h):
    span = x_end - x0
    n = max(1, int(np.ceil(abs(span) / h)))
    step = span / n
    xs = x0 + step * np.arange(n + 1)
    states = np.empty((n + 1, 4))
    states[0] = s0
    s = np.asarray(s0, dtype=float)
    for i in range(n):
        t = xs[i]
        try:
            k1 = f(t, s)
            k2 = f(t + step / 2, s + step / 2 * k1)
            k3 = f(t + step / 2, s + step / 2 * k2)
            k4 = f(t + step, s + step * k3)
        except EvalDomainError as exc:
            raise DomainError(
                f"right-hand side undefined near x = {t:.6g}: {exc}") from exc
        s = s + step / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(s)) or np.max(np.abs(s)) > 1e8:
            raise Blowup(f"state escaped near x = {xs[i + 1]:.6g}")
        states[i + 1] = s
    return xs, states


def integrate(sys: OdeSystem2, init, x_end: float, h: float = 1e-3,
              params: dict | None = None, sanity: bool = True) -> Trajectory:
    """RK4 trajectory from init = (x0, y0, z0, y0', z0') to x_end.

    A re-integration at half step must agree to 1e-7 in max norm.
    """
    x0, *state0 = init
    f = _numeric_rhs(sys, params)
    xs, states = _rk4_traj(f, float(x0), np.array(state0, dtype=float),
                           float(x_end), h)
    if sanity:
        _, fine = _rk4_traj(f, float(x0), np.array(state0, dtype=float),
                            float(x_end), h / 2)
        err = float(np.max(np.abs(states - fine[::2])))
        if err > 1e-7:
            raise InaccurateIntegration(
                f"step-halving disagreement {err:.3e} exceeds 1e-7")
    return Trajectory(xs, states, sys, h)


def map_trajectory(traj: Trajectory, T: PointTransformation,
                   params: dict | None = None):
    """Push trajectory samples through T, including first derivatives.

    Returns (X, Y, Z, Y', Z') arrays in the new variables.
    """
    sys = traj.generator
    ctx = sys.ctx
    names = (ctx.independent, *ctx.dependents, *ctx.first_derivatives)
    DX = total_derivative(T.X, sys)
    FY = simplify(div(total_derivative(T.Y, sys), DX))
    FZ = simplify(div(total_derivative(T.Z, sys), DX))
    extra = dict(params or {})
    cols = {k: [] for k in ("X", "Y", "Z", "Yp", "Zp")}
    for x, s in zip(traj.xs, traj.states):
        b = dict(zip(names, (x, *s)))
        b.update(extra)
        try:
            cols["X"].append(eval_expr(T.X, b))
            cols["Y"].append(eval_expr(T.Y, b))
            cols["Z"].append(eval_expr(T.Z, b))
            cols["Yp"].append(eval_expr(FY, b))
            cols["Zp"].append(eval_expr(FZ, b))
        except EvalDomainError as exc:
            raise DomainError(
                f"transformation undefined near x = {x:.6g}: {exc}") from exc
    return tuple(np.array(cols[k]) for k in ("X", "Y", "Z", "Yp", "Zp"))


def residual_on_trajectory(traj: Trajectory, target: OdeSystem2,
                           T: PointTransformation,
                           params: dict | None = None,
                           trim: int = 3) -> float:
    """Max defect of the mapped trajectory against the target system.

    Second derivatives come from a quintic spline in the new independent
    variable; a few end points are trimmed to suppress spline edge
    effects.
    """
    X, Y, Z, Yp, Zp = map_trajectory(traj, T, params)
    d = np.diff(X)
    if np.all(d < 0):
        X, Y, Z, Yp, Zp = X[::-1], Y[::-1], Z[::-1], Yp[::-1], Zp[::-1]
    elif not np.all(d > 0):
        raise NonMonotone("transformed independent variable is not "
                          "strictly monotone along the trajectory")
    sy = make_interp_spline(X, Y, k=5)
    sz = make_interp_spline(X, Z, k=5)
    ypp = sy.derivative(2)(X)
    zpp = sz.derivative(2)(X)
    nctx = target.ctx
    names = (nctx.independent, *nctx.dependents, *nctx.first_derivatives)
    extra = dict(params or {})
    worst = 0.0
    sl = slice(trim, len(X) - trim if trim else None)
    for xi, yi, zi, ypi, zpi, y2, z2 in zip(
            X[sl], Y[sl], Z[sl], Yp[sl], Zp[sl], ypp[sl], zpp[sl]):
        b = dict(zip(names, (xi, yi, zi, ypi, zpi)))
        b.update(extra)
        w1 = eval_expr(target.omega1, b)
        w2 = eval_expr(target.omega2, b)
        worst = max(worst, abs(y2 - w1) + abs(z2 - w2))
    return worst


# ---------------------------------------------------------------------------
# the worked-example corpus


@dataclass(eq=False)
class ExampleCase:
    id: int
    system: OdeSystem2
    transformation: PointTransformation
    expected_target: OdeSystem2
    expected_dimension: int | None
    interval: tuple
    init: tuple
    param_values: dict


def _geodesic_system(ctx: VarContext, om1: str, om2: str) -> OdeSystem2:
    base1 = parse("-dy^2 + dz^2", ctx)
    base2 = parse("-2*dy*dz", ctx)
    return OdeSystem2(ctx, simplify(base1 + parse(om1, ctx)),
                      simplify(base2 + parse(om2, ctx)))


def example_case(case_id: int) -> ExampleCase:
    """The four geodesic-type applications, with symbolic constants."""
    params = frozenset({"c1", "c2"})
    values = {"c1": 1.0, "c2": 1.0}
    if case_id == 1:
        ctx = VarContext()
        sysx = _geodesic_system(ctx, "-(2/x)*dy", "-(2/x)*dz")
        T = PointTransformation(ctx, parse("1/x", ctx),
                                parse("exp(y)*cos(z)", ctx),
                                parse("exp(y)*sin(z)", ctx))
        target = OdeSystem2(T.new_ctx, ZERO, ZERO)
        return ExampleCase(1, sysx, T, target, 15, (1.0, 2.0),
                           (1.0, 0.0, 0.0, 0.1, 0.1), {})
    ctx = VarContext(parameters=params)
    if case_id == 2:
        sysx = _geodesic_system(ctx, "c1*dy - c2*dz", "c2*dy + c1*dz")
    elif case_id == 3:
        sysx = _geodesic_system(ctx, "(1+x)*(c1*dy - c2*dz)",
                                "(1+x)*(c2*dy + c1*dz)")
    elif case_id == 4:
        sysx = _geodesic_system(ctx, "c1", "c2")
    else:
        raise ValueError(f"unknown example id {case_id}")
    T = PointTransformation(ctx, parse("x", ctx),
                            parse("exp(y)*cos(z)", ctx),
                            parse("exp(y)*sin(z)", ctx))
    nctx = T.new_ctx
    if case_id == 2:
        t1 = parse("c1*Y' - c2*Z'", nctx)
        t2 = parse("c2*Y' + c1*Z'", nctx)
        dim = 7
    elif case_id == 3:
        t1 = parse("(1+X)*(c1*Y' - c2*Z')", nctx)
        t2 = parse("(1+X)*(c2*Y' + c1*Z')", nctx)
        dim = 6
    else:
        t1 = parse("c1*Y - c2*Z", nctx)
        t2 = parse("c2*Y + c1*Z", nctx)
        dim = None  # recorded, not asserted
    target = OdeSystem2(nctx, simplify(t1), simplify(t2))
    return ExampleCase(case_id, sysx, T, target, dim, (0.0, 1.0),
                       (0.0, 0.0, 0.0, 0.1, 0.1), values)


@dataclass(eq=False)
class CaseReport:
    example_id: int
    checks: tuple
    dimension: int | None
    expected_dimension: int | None
    residual: float
    notes: tuple = ()

    @property
    def passed(self) -> bool:
        if not all(c.holds for c in self.checks):
            return False
        if self.expected_dimension is not None:
            return self.dimension == self.expected_dimension
        return True

    def to_dict(self) -> dict:
        return {
            "example": self.example_id,
            "passed": bool(self.passed),
            "checks": [c.to_dict() for c in self.checks],
            "dimension": self.dimension,
            "expected_dimension": self.expected_dimension,
            "trajectory_residual": self.residual,
            "notes": list(self.notes),
        }

    def render(self) -> str:
        head = "PASS" if self.passed else "FAIL"
        lines = [f"example {self.example_id}: {head}"]
        for c in self.checks:
            mark = "ok " if c.holds else "FAIL"
            line = f"  [{mark}] {c.name} ({c.method})"
            if c.detail:
                line += f": {c.detail}"
            lines.append(line)
        want = "" if self.expected_dimension is None \
            else f" (expected {self.expected_dimension})"
        lines.append(f"  symmetry dimension: {self.dimension}{want}")
        for n in self.notes:
            lines.append(f"  note: {n}")
        return "\n".join(lines)


def _example_dimension(case: ExampleCase, seed: int):
    """Carry the example's linear target down to the reduced form and
    classify.  Returns (dimension, notes)."""
    notes = []
    if case.id == 1:
        cls = classify_beta("0", seed=seed)
        return cls.dimension, notes
    c1, c2 = case.param_values["c1"], case.param_values["c2"]
    if case.id in (2, 3):
        scale = "1" if case.id == 2 else "1+x"
        lf = LinearForm("first_order", {
            "a1": CoefficientFn.symbolic(f"({scale})*{c1:g}"),
            "a2": CoefficientFn.symbolic(f"({scale})*{c2:g}"),
        })
        zo = reduce_24_to_25(lf, (0.0, 2.0)).form
    else:
        zo = LinearForm("zero_order", {"a3": C(Fraction(c1)),
                                       "a4": C(Fraction(c2))})
    red = reduce_25_to_28(zo, (0.0, 2.0))
    beta = red.form["beta"]
    if beta.kind == "tabulated":
        lo, hi = beta.domain
        pad = 0.02 * (hi - lo)
        cls = classify_beta(beta, (lo + pad, hi - pad), seed=seed)
    else:
        cls = classify_beta(beta, (0.5, 3.0), seed=seed)
    notes.append(f"reduced-form coefficient classified as: {cls.case_label}")
    return cls.dimension, notes


def run_example(case_id: int, seed: int = 0) -> CaseReport:
    """End-to-end reproduction of one worked example.

    Checks the complex-correspondence conditions, the symbolic
    transformation target, the numeric trajectory residual, and the
    symmetry dimension of the reduced form.
    """
    case = example_case(case_id)
    checks = []
    notes = []

    cr = check_cr(case.system, seed=seed)
    checks.append(ConditionCheck(
        "complex-correspondence (Cauchy-Riemann) conditions", cr.overall,
        "symbolic", "" if cr.overall else cr.failing()[0].name))

    t2 = check_theorem2(extract_cubic(case.system), seed=seed)
    checks.append(ConditionCheck(
        "cubic coefficient conditions", t2.overall, "symbolic",
        "" if t2.overall else t2.failing()[0].name))

    out = transform_system(case.system, case.transformation, seed=seed)
    d1 = simplify(out.omega1 - case.expected_target.omega1)
    d2 = simplify(out.omega2 - case.expected_target.omega2)
    match = zero_verdict(d1, seed=seed).is_zero and \
        zero_verdict(d2, seed=seed).is_zero
    detail = "" if match else (
        f"got ({to_string(out.omega1)}, {to_string(out.omega2)})")
    checks.append(ConditionCheck("symbolic target match", bool(match),
                                 "symbolic", detail))

    traj = integrate(case.system, case.init, case.interval[1],
                     params=case.param_values)
    res = residual_on_trajectory(traj, case.expected_target,
                                 case.transformation,
                                 params=case.param_values)
    checks.append(ConditionCheck("trajectory residual <= 1e-5",
                                 res <= 1e-5, "numeric",
                                 f"residual = {res:.3e}"))

    dim, dim_notes = _example_dimension(case, seed)
    notes.extend(dim_notes)
    if case.expected_dimension is None:
        notes.append("no dimension value is stated for this case; the "
                     "classifier output is recorded without assertion")
    return CaseReport(case_id, tuple(checks), dim, case.expected_dimension,
                      res, tuple(notes))
