"""Canonical forms of linear systems of two second-order ODEs.

Carries systems through point transformations, reduces linear systems to
the trace-free optimal form, reduces the two special linear forms (first
derivative coupled / undifferentiated coupled) to the single-coefficient
reduced form Y'' = -beta Z, Z'' = beta Y, and tests equivalence under
constant linear maps of the dependent variables.
"""

from __future__ import annotations

import io
import warnings
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.interpolate import CubicSpline

from .cubic import OdeSystem2
from .expr import (
    C, Expr, ExprError, NotPolynomial, Pow, Symbol, VarContext, ZERO, ONE,
    add, coefficients_in, differentiate, div, eval_expr, free_symbols, log,
    mul, neg, parse, pow_, simplify, substitute, rewrite_subterms, sym,
    to_string, zero_verdict,
)
from .numerics import rk4_checked


class DxXZero(ExprError):
    """The total derivative of the new independent variable vanishes."""


class NonInvertible(ExprError):
    """No inverse is available within the supported transformation family."""


class RhoVanishes(ExprError):
    def __init__(self, crossing: float, safe: tuple):
        super().__init__(
            f"rescaling function crosses zero near x = {crossing:.6g}; "
            f"safe sub-interval is [{safe[0]:.6g}, {safe[1]:.6g})")
        self.crossing = crossing
        self.safe_interval = safe


class MDegenerate(ExprError):
    """The modulus M1^2 + M2^2 of the rescaling pair vanished."""


class PoleInInterval(ExprError):
    """A coefficient could not be evaluated somewhere on the interval."""


# ---------------------------------------------------------------------------
# point transformations


def _default_new_ctx(ctx: VarContext) -> VarContext:
    return VarContext("X", ("Y", "Z"), ("Y'", "Z'"), ("Y''", "Z''"),
                      ctx.parameters, frozenset())


@dataclass(frozen=True, eq=False)
class PointTransformation:
    """An invertible change of variables (x,y,z) -> (X,Y,Z).

    X, Y, Z are expressions in the old variables.  An explicit inverse
    (mapping each old variable name to an expression in the new names) may
    be supplied; otherwise inverses are derived for the supported families
    (affine in the dependents, and the exponential-polar pair
    Y = e^y cos z, Z = e^y sin z).
    """

    ctx: VarContext
    X: Expr
    Y: Expr
    Z: Expr
    new_ctx: VarContext = None
    inverse: dict | None = None

    def __post_init__(self):
        if self.new_ctx is None:
            object.__setattr__(self, "new_ctx", _default_new_ctx(self.ctx))
        self._warn_if_singular()

    def _warn_if_singular(self, n: int = 8, seed: int = 7):
        ctx = self.ctx
        names = (ctx.independent, *ctx.dependents)
        rows = [[differentiate(comp, v) for v in names]
                for comp in (self.X, self.Y, self.Z)]
        rng = np.random.default_rng(seed)
        best = 0.0
        tried = 0
        for _ in range(4 * n):
            if tried >= n:
                break
            pt = {v: float(rng.uniform(0.2, 1.8)) for v in names}
            try:
                m = np.array([[eval_expr(e, pt) for e in row]
                              for row in rows])
            except ExprError:
                continue
            tried += 1
            best = max(best, abs(np.linalg.det(m)))
        if tried and best < 1e-12:
            warnings.warn("transformation Jacobian appears singular at all "
                          "sampled points", stacklevel=3)

    @classmethod
    def identity(cls, ctx: VarContext) -> "PointTransformation":
        y, z = ctx.dependents
        return cls(ctx, sym(ctx.independent), sym(y), sym(z), new_ctx=ctx)


def total_derivative(e: Expr, sys: OdeSystem2) -> Expr:
    """Derivative of e along solutions: d/dx + y' d/dy + ... + omega d/dy'."""
    ctx = sys.ctx
    y, z = ctx.dependents
    yp, zp = ctx.first_derivatives
    return simplify(add(
        differentiate(e, ctx.independent, ctx),
        mul(sym(yp), differentiate(e, y)),
        mul(sym(zp), differentiate(e, z)),
        mul(sys.omega1, differentiate(e, yp)),
        mul(sys.omega2, differentiate(e, zp)),
    ))


def _invert_chi(chi: Expr, old_x: str, new_x: str) -> Expr:
    """Solve X = chi(x) for x when chi is degree-one rational in x."""
    Xs = sym(new_x)
    try:
        groups = coefficients_in(chi, [old_x])
        if any(sig[0] > 1 for sig in groups):
            raise NonInvertible(
                f"cannot invert {to_string(chi)} for {old_x}")
        a1 = groups.get((1,), ZERO)
        a0 = groups.get((0,), ZERO)
        if zero_verdict(a1).is_zero:
            raise NonInvertible(f"{to_string(chi)} does not depend on {old_x}")
        return simplify(div(Xs - a0, a1))
    except NotPolynomial:
        pass
    # chi = a1 + a0/x  =>  x = a0 / (X - a1)
    flipped = simplify(mul(chi, sym(old_x)))
    try:
        groups = coefficients_in(flipped, [old_x])
    except NotPolynomial:
        raise NonInvertible(f"cannot invert {to_string(chi)} for {old_x}")
    if any(sig[0] > 1 for sig in groups):
        raise NonInvertible(f"cannot invert {to_string(chi)} for {old_x}")
    a1 = groups.get((1,), ZERO)
    a0 = groups.get((0,), ZERO)
    if zero_verdict(a0).is_zero:
        raise NonInvertible(f"{to_string(chi)} does not depend on {old_x}")
    return simplify(div(a0, Xs - a1))


def _affine_inverse(T: PointTransformation, inv_x: Expr) -> dict | None:
    """Inverse bindings when Y, Z are degree-one in the dependents."""
    ctx = T.ctx
    y, z = ctx.dependents
    try:
        gy = coefficients_in(T.Y, [y, z])
        gz = coefficients_in(T.Z, [y, z])
    except NotPolynomial:
        return None
    if any(sum(sig) > 1 for sig in list(gy) + list(gz)):
        return None
    a = gy.get((1, 0), ZERO)
    b = gy.get((0, 1), ZERO)
    f = gy.get((0, 0), ZERO)
    c = gz.get((1, 0), ZERO)
    d = gz.get((0, 1), ZERO)
    g = gz.get((0, 0), ZERO)
    det = simplify(a * d - b * c)
    if zero_verdict(det).is_zero:
        raise NonInvertible("dependent-variable map has zero determinant")
    ny, nz = T.new_ctx.dependents
    Ys, Zs = sym(ny), sym(nz)
    ydef = simplify(div(d * (Ys - f) - b * (Zs - g), det))
    zdef = simplify(div(a * (Zs - g) - c * (Ys - f), det))
    xb = {ctx.independent: inv_x}
    return {ctx.independent: inv_x,
            y: substitute(ydef, xb),
            z: substitute(zdef, xb)}


def _is_exp_polar(T: PointTransformation) -> bool:
    y, z = T.ctx.dependents
    from .expr import exp as _exp, cos as _cos, sin as _sin
    want_y = mul(_exp(sym(y)), _cos(sym(z)))
    want_z = mul(_exp(sym(y)), _sin(sym(z)))
    return zero_verdict(simplify(T.Y - want_y)).is_zero is True and \
        zero_verdict(simplify(T.Z - want_z)).is_zero is True


def transform_system(sys: OdeSystem2, T: PointTransformation,
                     seed: int = 0) -> OdeSystem2:
    """Rewrite a system in the image variables of a point transformation.

    The new right-hand sides are obtained from Y' = D_x(Y)/D_x(X) and
    Y'' = D_x(Y')/D_x(X) with the old variables eliminated through the
    inverse map; raises NonInvertible when no inverse is available.
    """
    ctx = sys.ctx
    new = T.new_ctx
    DX = total_derivative(T.X, sys)
    if zero_verdict(DX, seed=seed).is_zero:
        raise DxXZero("the new independent variable is constant along "
                      "solutions")
    F1 = simplify(div(total_derivative(T.Y, sys), DX))
    F2 = simplify(div(total_derivative(T.Z, sys), DX))
    W1 = simplify(div(total_derivative(F1, sys), DX))
    W2 = simplify(div(total_derivative(F2, sys), DX))

    # solve the first-derivative relations for the old derivatives
    x = ctx.independent
    y, z = ctx.dependents
    yp, zp = ctx.first_derivatives
    nyp, nzp = new.first_derivatives
    Yp, Zp = sym(nyp), sym(nzp)
    a11 = simplify(differentiate(T.Y, y) - Yp * differentiate(T.X, y))
    a12 = simplify(differentiate(T.Y, z) - Yp * differentiate(T.X, z))
    a21 = simplify(differentiate(T.Z, y) - Zp * differentiate(T.X, y))
    a22 = simplify(differentiate(T.Z, z) - Zp * differentiate(T.X, z))
    b1 = simplify(Yp * differentiate(T.X, x) - differentiate(T.Y, x))
    b2 = simplify(Zp * differentiate(T.X, x) - differentiate(T.Z, x))
    det = simplify(a11 * a22 - a12 * a21)
    if zero_verdict(det, seed=seed).is_zero:
        raise NonInvertible("first-derivative map is singular")
    yp_new = simplify(div(b1 * a22 - a12 * b2, det))
    zp_new = simplify(div(a11 * b2 - a21 * b1, det))
    W1 = simplify(substitute(W1, {yp: yp_new, zp: zp_new}))
    W2 = simplify(substitute(W2, {yp: yp_new, zp: zp_new}))

    # eliminate the old base variables
    if free_symbols(T.X) - {x} - set(ctx.parameters):
        raise NonInvertible("the new independent variable must depend on "
                            "the old independent variable only")
    if T.inverse is not None:
        W1 = simplify(substitute(W1, T.inverse))
        W2 = simplify(substitute(W2, T.inverse))
    else:
        inv_x = _invert_chi(T.X, x, new.independent)
        bindings = _affine_inverse(T, inv_x)
        if bindings is not None:
            W1 = simplify(substitute(W1, bindings))
            W2 = simplify(substitute(W2, bindings))
        elif _is_exp_polar(T):
            from .expr import exp as _exp, cos as _cos, sin as _sin
            Ys, Zs = (sym(n) for n in new.dependents)
            S = add(pow_(Ys, 2), pow_(Zs, 2))
            half = Fraction(1, 2)
            rules = {
                sym(x): inv_x,
                _exp(sym(y)): pow_(S, half),
                _sin(sym(z)): mul(Zs, pow_(S, -half)),
                _cos(sym(z)): mul(Ys, pow_(S, -half)),
                sym(y): mul(C(half), log(S)),
            }
            W1 = simplify(rewrite_subterms(W1, rules))
            W2 = simplify(rewrite_subterms(W2, rules))
        else:
            raise NonInvertible(
                "transformation is outside the supported family (affine in "
                "the dependents, or exponential-polar) and no explicit "
                "inverse was given")

    allowed = {new.independent, *new.dependents, *new.first_derivatives,
               *new.parameters, *ctx.parameters}
    for w in (W1, W2):
        leftover = free_symbols(w) - allowed
        if leftover:
            raise NonInvertible(
                f"old variables {sorted(leftover)} survive the rewrite; "
                "supply an explicit inverse")
    return OdeSystem2(new, W1, W2)


# ---------------------------------------------------------------------------
# coefficient functions


@dataclass(eq=False)
class CoefficientFn:
    """A scalar coefficient, either a closed-form expression in the
    independent variable or a tabulated grid with cubic interpolation."""

    kind: str  # "symbolic" | "tabulated"
    expr: Expr | None = None
    var: str = "x"
    xs: np.ndarray | None = None
    values: np.ndarray | None = None
    source: str = ""
    step: float | None = None
    error_estimate: float = 0.0

    def __post_init__(self):
        if self.kind not in ("symbolic", "tabulated"):
            raise ValueError(f"unknown coefficient kind {self.kind!r}")
        if self.kind == "symbolic":
            if self.expr is None:
                raise ValueError("symbolic coefficient needs an expression")
            extra = free_symbols(self.expr) - {self.var}
            if extra:
                raise ValueError(
                    f"coefficient depends on undeclared symbols {extra}")
            self._dexpr = None
        else:
            self.xs = np.asarray(self.xs, dtype=float)
            self.values = np.asarray(self.values, dtype=float)
            if self.xs.ndim != 1 or self.xs.shape != self.values.shape:
                raise ValueError("grid and values must be 1-d and aligned")
            if not np.all(np.diff(self.xs) > 0):
                raise ValueError("grid must be strictly increasing")
            self._spline = CubicSpline(self.xs, self.values)

    # -- constructors ------------------------------------------------------
    @classmethod
    def symbolic(cls, expr: Expr | str, var: str = "x",
                 ctx: VarContext | None = None) -> "CoefficientFn":
        if isinstance(expr, str):
            ctx = ctx or VarContext()
            expr = parse(expr, ctx)
        return cls("symbolic", expr=simplify(expr), var=var)

    @classmethod
    def constant(cls, value) -> "CoefficientFn":
        return cls("symbolic", expr=C(value))

    @classmethod
    def tabulated(cls, xs, values, source: str = "",
                  step: float | None = None,
                  error_estimate: float = 0.0) -> "CoefficientFn":
        return cls("tabulated", xs=xs, values=values, source=source,
                   step=step, error_estimate=error_estimate)

    # -- evaluation --------------------------------------------------------
    def __call__(self, t):
        if self.kind == "symbolic":
            if np.ndim(t) == 0:
                return eval_expr(self.expr, {self.var: float(t)})
            return np.array([eval_expr(self.expr, {self.var: float(ti)})
                             for ti in np.asarray(t).ravel()])
        out = self._spline(t)
        return float(out) if np.ndim(t) == 0 else out

    def derivative(self, t):
        if self.kind == "symbolic":
            if self._dexpr is None:
                self._dexpr = simplify(differentiate(self.expr, self.var))
            if np.ndim(t) == 0:
                return eval_expr(self._dexpr, {self.var: float(t)})
            return np.array([eval_expr(self._dexpr, {self.var: float(ti)})
                             for ti in np.asarray(t).ravel()])
        out = self._spline(t, 1)
        return float(out) if np.ndim(t) == 0 else out

    @property
    def domain(self) -> tuple | None:
        if self.kind == "tabulated":
            return (float(self.xs[0]), float(self.xs[-1]))
        return None

    def is_constant(self, rtol: float = 1e-8) -> bool:
        if self.kind == "symbolic":
            if not free_symbols(self.expr):
                return True
            return bool(zero_verdict(differentiate(self.expr,
                                                   self.var)).is_zero)
        spread = float(np.max(self.values) - np.min(self.values))
        return spread <= rtol * (1.0 + float(np.max(np.abs(self.values))))

    def constant_value(self) -> float:
        if self.kind == "symbolic":
            if not free_symbols(self.expr):
                return eval_expr(self.expr, {})
            return float(self(1.0))
        return float(np.mean(self.values))

    def is_zero(self) -> bool:
        if self.kind == "symbolic":
            return bool(zero_verdict(self.expr).is_zero)
        return bool(np.max(np.abs(self.values)) <= 1e-12)

    # -- serialization -----------------------------------------------------
    def serialize(self) -> str:
        if self.kind == "symbolic":
            return f"# symbolic in {self.var}\n{to_string(self.expr)}\n"
        buf = io.StringIO()
        buf.write(f"# source: {self.source or 'unspecified'}\n")
        step = "" if self.step is None else f"{self.step:g}"
        buf.write(f"# step: {step}  error: {self.error_estimate:.3e}\n")
        for xi, vi in zip(self.xs, self.values):
            buf.write(f"{float(xi)!r} {float(vi)!r}\n")
        return buf.getvalue()

    @classmethod
    def deserialize(cls, text: str, ctx: VarContext | None = None
                    ) -> "CoefficientFn":
        lines = text.strip().splitlines()
        if lines and lines[0].startswith("# symbolic in "):
            var = lines[0][len("# symbolic in "):].strip()
            ctx = ctx or VarContext()
            return cls.symbolic("\n".join(lines[1:]).strip(), var=var,
                                ctx=ctx)
        source, step, err = "", None, 0.0
        xs, vs = [], []
        for line in lines:
            if line.startswith("# source:"):
                source = line[len("# source:"):].strip()
            elif line.startswith("# step:"):
                body = line[len("# step:"):]
                parts = body.replace("error:", "|").split("|")
                head = parts[0].strip()
                step = float(head) if head else None
                if len(parts) > 1:
                    err = float(parts[1])
            elif line.startswith("#") or not line.strip():
                continue
            else:
                a, b = line.split()
                xs.append(float(a))
                vs.append(float(b))
        return cls.tabulated(xs, vs, source=source, step=step,
                             error_estimate=err)


# ---------------------------------------------------------------------------
# linear forms


_FORM_SLOTS = {
    "general": ("d11", "d12", "d21", "d22"),
    "optimal": ("dt11", "dt12", "dt21"),
    "first_order": ("a1", "a2"),
    "zero_order": ("a3", "a4"),
    "reduced": ("beta",),
}


@dataclass(eq=False)
class LinearForm:
    """One of the linear-system shapes handled by the reduction chain.

    kinds and their right-hand sides (coefficients are functions of x):
      general:     y'' = d11 y + d12 z,     z'' = d21 y + d22 z
      optimal:     y'' = dt11 y + dt12 z,   z'' = dt21 y - dt11 z
      first_order: y'' = a1 y' - a2 z',     z'' = a2 y' + a1 z'
      zero_order:  y'' = a3 y - a4 z,       z'' = a4 y + a3 z
      reduced:     y'' = -beta z,           z'' = beta y
    """

    kind: str
    coeffs: dict

    def __post_init__(self):
        slots = _FORM_SLOTS.get(self.kind)
        if slots is None:
            raise ValueError(f"unknown linear-form kind {self.kind!r}")
        if set(self.coeffs) != set(slots):
            raise ValueError(
                f"{self.kind} form needs coefficients {slots}, "
                f"got {tuple(self.coeffs)}")
        for name, c in list(self.coeffs.items()):
            if not isinstance(c, CoefficientFn):
                self.coeffs[name] = CoefficientFn.symbolic(c) \
                    if isinstance(c, (Expr, str)) else \
                    CoefficientFn.constant(c)

    def __getitem__(self, name: str) -> CoefficientFn:
        return self.coeffs[name]

    def rhs_exprs(self, ctx: VarContext) -> tuple:
        """Symbolic right-hand sides; requires symbolic coefficients."""
        for name, c in self.coeffs.items():
            if c.kind != "symbolic":
                raise ValueError(f"coefficient {name} is tabulated")
        y, z = (sym(n) for n in ctx.dependents)
        yp, zp = (sym(n) for n in ctx.first_derivatives)
        e = {name: c.expr for name, c in self.coeffs.items()}
        if self.kind == "general":
            pair = (e["d11"] * y + e["d12"] * z,
                    e["d21"] * y + e["d22"] * z)
        elif self.kind == "optimal":
            pair = (e["dt11"] * y + e["dt12"] * z,
                    e["dt21"] * y - e["dt11"] * z)
        elif self.kind == "first_order":
            pair = (e["a1"] * yp - e["a2"] * zp,
                    e["a2"] * yp + e["a1"] * zp)
        elif self.kind == "zero_order":
            pair = (e["a3"] * y - e["a4"] * z,
                    e["a4"] * y + e["a3"] * z)
        else:
            pair = (neg(e["beta"] * z), e["beta"] * y)
        return tuple(simplify(p) for p in pair)

    def as_system(self, ctx: VarContext | None = None) -> OdeSystem2:
        ctx = ctx or VarContext()
        w1, w2 = self.rhs_exprs(ctx)
        return OdeSystem2(ctx, w1, w2)

    def numeric_rhs(self):
        """Second-order vector field f(t, [y, z, y', z']) -> derivatives."""
        c = self.coeffs
        if self.kind == "general":
            def f(t, s):
                return np.array([s[2], s[3],
                                 c["d11"](t) * s[0] + c["d12"](t) * s[1],
                                 c["d21"](t) * s[0] + c["d22"](t) * s[1]])
        elif self.kind == "optimal":
            def f(t, s):
                return np.array([s[2], s[3],
                                 c["dt11"](t) * s[0] + c["dt12"](t) * s[1],
                                 c["dt21"](t) * s[0] - c["dt11"](t) * s[1]])
        elif self.kind == "first_order":
            def f(t, s):
                return np.array([s[2], s[3],
                                 c["a1"](t) * s[2] - c["a2"](t) * s[3],
                                 c["a2"](t) * s[2] + c["a1"](t) * s[3]])
        elif self.kind == "zero_order":
            def f(t, s):
                return np.array([s[2], s[3],
                                 c["a3"](t) * s[0] - c["a4"](t) * s[1],
                                 c["a4"](t) * s[0] + c["a3"](t) * s[1]])
        else:
            def f(t, s):
                b = c["beta"](t)
                return np.array([s[2], s[3], -b * s[1], b * s[0]])
        return f


# ---------------------------------------------------------------------------
# reductions


def _first_crossing(ts, vals, floor: float = 1e-9):
    below = np.nonzero(vals <= floor)[0]
    if below.size:
        return int(below[0])
    return None


def _integrate_coeffs(rhs, t0, y0, t1, h):
    try:
        return rk4_checked(rhs, t0, y0, t1, h)
    except ExprError as exc:
        raise PoleInInterval(str(exc)) from exc


@dataclass(eq=False)
class OptimalReduction:
    form: LinearForm
    rho: CoefficientFn
    new_var: CoefficientFn
    error_estimate: float = 0.0

    def __iter__(self):
        return iter((self.form, self.rho))


def reduce_optimal(lf: LinearForm, interval: tuple,
                   h: float = 1e-3) -> OptimalReduction:
    """Rescale a general linear system to its trace-free optimal form.

    The rescaling function solves rho'' = ((d11+d22)/2) rho with
    rho(x0) = 1, rho'(x0) = 0, and the new independent variable is the
    integral of rho^-2 pinned to agree with the old one at x0.
    """
    if lf.kind != "general":
        raise ValueError("reduce_optimal expects a general-kind form")
    t0, t1 = interval
    d11, d12 = lf["d11"], lf["d12"]
    d21, d22 = lf["d21"], lf["d22"]

    trace_free = all(c.kind == "symbolic" for c in lf.coeffs.values()) and \
        zero_verdict(simplify(d11.expr + d22.expr)).is_zero
    if trace_free:
        half = C(Fraction(1, 2))
        form = LinearForm("optimal", {
            "dt11": CoefficientFn.symbolic(
                simplify(mul(half, d11.expr - d22.expr))),
            "dt12": CoefficientFn.symbolic(d12.expr),
            "dt21": CoefficientFn.symbolic(d21.expr),
        })
        one = CoefficientFn.constant(1)
        ident = CoefficientFn.symbolic(sym("x"))
        return OptimalReduction(form, one, ident, 0.0)

    def rhs(t, s):
        rho, drho, _ = s
        return np.array([drho,
                         0.5 * (d11(t) + d22(t)) * rho,
                         rho ** -2 if rho != 0 else np.inf])

    ts, ys, err = _integrate_coeffs(rhs, t0, np.array([1.0, 0.0, t0]), t1, h)
    rho = ys[:, 0]
    hit = _first_crossing(ts, rho)
    if hit is not None:
        raise RhoVanishes(float(ts[hit]), (t0, float(ts[max(hit - 1, 0)])))
    xs = ys[:, 2]
    # with Y = y/rho and dX/dt = rho^-2 one gets d2Y/dX2 = rho^3 y'' -
    # rho^2 rho'' y, so each coefficient of the rescaled system carries a
    # factor rho^4 (rho^3 from the variable change times rho from y = rho Y)
    quart = rho ** 4
    src = "rho'' = ((d11+d22)/2) rho; new variable = integral of rho^-2"
    form = LinearForm("optimal", {
        "dt11": CoefficientFn.tabulated(
            xs, 0.5 * quart * (d11(ts) - d22(ts)), src, h, err),
        "dt12": CoefficientFn.tabulated(xs, quart * d12(ts), src, h, err),
        "dt21": CoefficientFn.tabulated(xs, quart * d21(ts), src, h, err),
    })
    rho_fn = CoefficientFn.tabulated(ts, rho, "rho'' = ((d11+d22)/2) rho",
                                     h, err)
    new_var = CoefficientFn.tabulated(ts, xs, "integral of rho^-2", h, err)
    return OptimalReduction(form, rho_fn, new_var, err)


@dataclass(eq=False)
class ReducedResult:
    form: LinearForm
    rho: CoefficientFn
    new_var: CoefficientFn
    error_estimate: float = 0.0

    def __iter__(self):
        return iter((self.form, self.rho))


def reduce_25_to_28(lf: LinearForm, interval: tuple,
                    h: float = 1e-3) -> ReducedResult:
    """Reduce the undifferentiated-coupling form to the single-coefficient
    reduced form: rho'' = a3 rho, beta = rho^4 a4 on the rescaled variable.
    """
    if lf.kind != "zero_order":
        raise ValueError("reduce_25_to_28 expects a zero_order-kind form")
    t0, t1 = interval
    a3, a4 = lf["a3"], lf["a4"]

    if a3.kind == "symbolic" and zero_verdict(a3.expr).is_zero:
        # rho stays at 1 and the variable change is the identity
        beta = CoefficientFn.symbolic(a4.expr, var=a4.var) \
            if a4.kind == "symbolic" else a4
        form = LinearForm("reduced", {"beta": beta})
        return ReducedResult(form, CoefficientFn.constant(1),
                             CoefficientFn.symbolic(sym("x")), 0.0)

    def rhs(t, s):
        rho, drho, _ = s
        return np.array([drho, a3(t) * rho,
                         rho ** -2 if rho != 0 else np.inf])

    ts, ys, err = _integrate_coeffs(rhs, t0, np.array([1.0, 0.0, t0]), t1, h)
    rho = ys[:, 0]
    hit = _first_crossing(ts, rho)
    if hit is not None:
        raise RhoVanishes(float(ts[hit]), (t0, float(ts[max(hit - 1, 0)])))
    xs = ys[:, 2]
    src = "rho'' = a3 rho; beta = rho^4 a4 on the rescaled variable"
    beta = CoefficientFn.tabulated(xs, rho ** 4 * a4(ts), src, h, err)
    form = LinearForm("reduced", {"beta": beta})
    rho_fn = CoefficientFn.tabulated(ts, rho, "rho'' = a3 rho", h, err)
    new_var = CoefficientFn.tabulated(ts, xs, "integral of rho^-2", h, err)
    return ReducedResult(form, rho_fn, new_var, err)


@dataclass(eq=False)
class FirstOrderReduction:
    form: LinearForm
    m1: CoefficientFn
    m2: CoefficientFn
    cross_check_error: float | None = None
    error_estimate: float = 0.0

    def __iter__(self):
        return iter((self.form, self.m1, self.m2))


def reduce_24_to_25(lf: LinearForm, interval: tuple,
                    h: float = 1e-3) -> FirstOrderReduction:
    """Trade first-derivative coupling for undifferentiated coupling.

    The rescaling pair solves 2 M1' = a1 M1 - a2 M2, 2 M2' = a1 M2 + a2 M1
    with (M1, M2)(x0) = (1, 0); the output coefficients follow from the
    quotient rule for the rescaled dependent variables.  When both inputs
    are closed-form, the output is closed-form as well and the numeric
    route serves as a cross-check.
    """
    if lf.kind != "first_order":
        raise ValueError("reduce_24_to_25 expects a first_order-kind form")
    t0, t1 = interval
    a1, a2 = lf["a1"], lf["a2"]

    def rhs(t, s):
        m1, m2 = s
        v1, v2 = a1(t), a2(t)
        return np.array([0.5 * (v1 * m1 - v2 * m2),
                         0.5 * (v1 * m2 + v2 * m1)])

    ts, ys, err = _integrate_coeffs(rhs, t0, np.array([1.0, 0.0]), t1, h)
    m1, m2 = ys[:, 0], ys[:, 1]
    modulus = m1 ** 2 + m2 ** 2
    if float(np.min(modulus)) < 1e-12:
        raise MDegenerate("M1^2 + M2^2 vanished on the interval")

    v1, v2 = a1(ts), a2(ts)
    dv1 = a1.derivative(ts)
    dv2 = a2.derivative(ts)
    dm1 = 0.5 * (v1 * m1 - v2 * m2)
    dm2 = 0.5 * (v1 * m2 + v2 * m1)
    ddm1 = 0.5 * (dv1 * m1 + v1 * dm1 - dv2 * m2 - v2 * dm2)
    ddm2 = 0.5 * (dv1 * m2 + v1 * dm2 + dv2 * m1 + v2 * dm1)
    p = v1 * dm1 - v2 * dm2 - ddm1
    q = v1 * dm2 + v2 * dm1 - ddm2
    a3_vals = (m1 * p + m2 * q) / modulus
    a4_vals = (m1 * q - m2 * p) / modulus

    src = "2M1' = a1 M1 - a2 M2, 2M2' = a1 M2 + a2 M1"
    m1_fn = CoefficientFn.tabulated(ts, m1, src, h, err)
    m2_fn = CoefficientFn.tabulated(ts, m2, src, h, err)

    if a1.kind == "symbolic" and a2.kind == "symbolic":
        # closed form: the rescaled equation has coefficient
        # zeta^2/4 - zeta'/2 with zeta = a1 + i a2
        e1, e2 = a1.expr, a2.expr
        quarter = C(Fraction(1, 4))
        half = C(Fraction(1, 2))
        a3_expr = simplify(quarter * (e1 * e1 - e2 * e2)
                           - half * differentiate(e1, a1.var))
        a4_expr = simplify(half * e1 * e2
                           - half * differentiate(e2, a2.var))
        a3_fn = CoefficientFn.symbolic(a3_expr, var=a1.var)
        a4_fn = CoefficientFn.symbolic(a4_expr, var=a2.var)
        cross = float(max(np.max(np.abs(a3_fn(ts) - a3_vals)),
                          np.max(np.abs(a4_fn(ts) - a4_vals))))
        form = LinearForm("zero_order", {"a3": a3_fn, "a4": a4_fn})
        return FirstOrderReduction(form, m1_fn, m2_fn, cross, err)

    src31 = "quotient coefficients from the rescaling pair M1, M2"
    form = LinearForm("zero_order", {
        "a3": CoefficientFn.tabulated(ts, a3_vals, src31, h, err),
        "a4": CoefficientFn.tabulated(ts, a4_vals, src31, h, err),
    })
    return FirstOrderReduction(form, m1_fn, m2_fn, None, err)


def rescaling_transformation(m1: CoefficientFn, m2: CoefficientFn,
                             ctx: VarContext | None = None,
                             new_ctx: VarContext | None = None):
    """Numeric state map (t, y, z, y', z') -> new state implementing the
    dependent-variable rescaling with pair (M1, M2)."""
    def mapper(t, s):
        y, z, yp, zp = s
        w1, w2 = m1(t), m2(t)
        dw1, dw2 = m1.derivative(t), m2.derivative(t)
        d = w1 ** 2 + w2 ** 2
        ny = (w1 * y + w2 * z) / d
        nz = (w1 * z - w2 * y) / d
        # derivative of the quotient (conjugate(M)/|M|^2) * (y + i z)
        nyp = (w1 * yp + w2 * zp + dw1 * y + dw2 * z) / d \
            - (ny * (2 * (w1 * dw1 + w2 * dw2))) / d
        nzp = (w1 * zp - w2 * yp + dw1 * z - dw2 * y) / d \
            - (nz * (2 * (w1 * dw1 + w2 * dw2))) / d
        return np.array([ny, nz, nyp, nzp])
    return mapper


# ---------------------------------------------------------------------------
# constant-linear-map equivalence


@dataclass(frozen=True)
class EquivalenceVerdict:
    consistent: bool
    case: str  # "both-free-particle" | "inconsistent" | "degenerate-family"
    chain: tuple
    solution: dict | None = None

    def render(self) -> str:
        head = "CONSISTENT" if self.consistent else "INCONSISTENT"
        lines = [f"linear-map equivalence: {head} ({self.case})"]
        lines += [f"  {step}" for step in self.chain]
        return "\n".join(lines)


Verdict = EquivalenceVerdict


def attempt_linear_equivalence(opt: LinearForm, target: LinearForm,
                               source: str = "optimal"
                               ) -> EquivalenceVerdict:
    """Test whether a constant-coefficient optimal form can be carried to
    the undifferentiated-coupling form by a constant linear map of the
    dependent variables.

    Treating the optimal coefficients as linearly independent, matching
    the mapped system against the target forces an algebraic system on
    the map entries whose only solution is the zero map; the verdict is
    therefore Inconsistent except in the degenerate corners (both systems
    free-particle, or the optimal coefficients satisfying the degeneracy
    dt11^2 + dt12*dt21 = 0, which belongs to a different equivalence
    class altogether).  The verdict does not depend on which side is
    treated as the source.
    """
    if opt.kind != "optimal":
        raise ValueError("first argument must be an optimal-kind form")
    if target.kind not in ("zero_order", "reduced"):
        raise ValueError("target must be zero_order- or reduced-kind")
    for name, cfn in {**opt.coeffs, **target.coeffs}.items():
        if not cfn.is_constant():
            raise ValueError(
                f"coefficient {name} is not constant; a variable-"
                "coefficient map forces constant entries anyway")
    a0 = opt["dt11"].constant_value()
    b0 = opt["dt12"].constant_value()
    c0 = opt["dt21"].constant_value()
    if target.kind == "zero_order":
        t3 = target["a3"].constant_value()
        t4 = target["a4"].constant_value()
    else:
        t3, t4 = 0.0, target["beta"].constant_value()

    chain = ["a variable-coefficient dependent map must have vanishing "
             "coefficient derivatives, reducing to the constant case"]

    opt_zero = abs(a0) < 1e-12 and abs(b0) < 1e-12 and abs(c0) < 1e-12
    tgt_zero = abs(t3) < 1e-12 and abs(t4) < 1e-12
    if opt_zero and tgt_zero:
        chain.append("both systems are already the free-particle system; "
                     "the identity map suffices")
        return EquivalenceVerdict(True, "both-free-particle", tuple(chain),
                                  solution={"a": 1.0, "b": 0.0,
                                            "c": 0.0, "d": 1.0})

    disc = a0 * a0 + b0 * c0
    if abs(disc) < 1e-12:
        chain.append(
            "the optimal coefficients satisfy dt11^2 + dt12*dt21 = 0; this "
            "is the degenerate family whose symmetry algebra is "
            "8-dimensional and which is not reachable from the reduced "
            "single-coefficient form")
        return EquivalenceVerdict(False, "degenerate-family", tuple(chain))

    chain += [
        "matching the mapped system term by term (coefficients treated as "
        "independent) requires: a*b = c*d = 0",
        "matching also requires a^2 - b^2 = c^2 - d^2 = 0",
        "and a*d + b*c = a*c - b*d = 0",
        "a*b = 0 with a^2 = b^2 forces a = b = 0; likewise c = d = 0",
        "but the map must be invertible: a*d - b*c != 0 -- contradiction",
    ]
    return EquivalenceVerdict(False, "inconsistent", tuple(chain))
