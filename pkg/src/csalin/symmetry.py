"""Lie point symmetries of systems of two second-order ODEs.

Second prolongation, determining equations for the reduced canonical form
y'' = -beta z, z'' = beta y, explicit generator verification, and the
6 / 7 / 15 symmetry-dimension classification driven by the shape of beta.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .canon import CoefficientFn, PoleInInterval, total_derivative
from .cubic import OdeSystem2
from .expr import (
    C, Constant, Expr, ExprError, EvalDomainError, Symbol, VarContext, ZERO,
    add, coefficients_in, differentiate, div, eval_expr, free_symbols, mul,
    neg, parse, pow_, simplify, sym, to_string, zero_verdict,
    exp as e_exp, sin as e_sin, cos as e_cos,
)
from .reports import ConditionCheck, ConditionReport


class IntervalTooSmall(ExprError):
    """The collocation interval is too short to count dimensions reliably."""


@dataclass(frozen=True)
class VectorField:
    """A point-symmetry candidate xi d/dx + eta1 d/dy + eta2 d/dz."""

    ctx: VarContext
    xi: Expr
    eta1: Expr
    eta2: Expr

    def __post_init__(self):
        banned = set(self.ctx.first_derivatives) | \
            set(self.ctx.second_derivatives)
        for comp in (self.xi, self.eta1, self.eta2):
            hit = free_symbols(comp) & banned
            if hit:
                raise ValueError(
                    f"point symmetries cannot involve derivatives: {hit}")

    @property
    def components(self):
        return (self.xi, self.eta1, self.eta2)


def prolong2_residuals(sys: OdeSystem2, V: VectorField) -> tuple:
    """Residuals of the infinitesimal symmetry condition.

    Prolongs V to second order along solutions of the system and returns
    the pair (R1, R2) that must vanish identically in (x, y, z, y', z')
    for V to generate a point symmetry.
    """
    ctx = sys.ctx
    y, z = ctx.dependents
    yp, zp = ctx.first_derivatives
    Dxi = total_derivative(V.xi, sys)
    eta1_1 = simplify(total_derivative(V.eta1, sys) - sym(yp) * Dxi)
    eta2_1 = simplify(total_derivative(V.eta2, sys) - sym(zp) * Dxi)
    eta1_2 = simplify(total_derivative(eta1_1, sys) - sys.omega1 * Dxi)
    eta2_2 = simplify(total_derivative(eta2_1, sys) - sys.omega2 * Dxi)

    def applied(omega):
        return simplify(add(
            V.xi * differentiate(omega, ctx.independent, ctx),
            V.eta1 * differentiate(omega, y),
            V.eta2 * differentiate(omega, z),
            eta1_1 * differentiate(omega, yp),
            eta2_1 * differentiate(omega, zp),
        ))

    r1 = simplify(eta1_2 - applied(sys.omega1))
    r2 = simplify(eta2_2 - applied(sys.omega2))
    return r1, r2


def check_symmetry(sys: OdeSystem2, V: VectorField,
                   seed: int = 0) -> tuple:
    """(verdict, report): does V generate a point symmetry of the system?"""
    r1, r2 = prolong2_residuals(sys, V)
    checks = []
    for label, r in (("first residual", r1), ("second residual", r2)):
        v = zero_verdict(r, seed=seed)
        detail = "" if v.is_zero else f"residual = {to_string(r)}"
        checks.append(ConditionCheck(label, bool(v.is_zero), v.method,
                                     detail))
    report = ConditionReport(title="point-symmetry residuals",
                             checks=tuple(checks))
    return report.overall, report


# ---------------------------------------------------------------------------
# the reduced canonical system and its determining equations


def reduced_system(beta: Expr, ctx: VarContext) -> OdeSystem2:
    """The single-coefficient canonical system y'' = -beta z, z'' = beta y."""
    y, z = (sym(n) for n in ctx.dependents)
    return OdeSystem2(ctx, simplify(neg(beta * z)), simplify(beta * y))


@dataclass(frozen=True)
class DeterminingSystem:
    """Residuals whose identical vanishing characterizes the symmetries of
    the reduced canonical system, expressed through an ansatz whose
    x-dependent pieces are opaque functions g1..g9 (full ansatz) or
    g3, g6, g9 with constants c1..c4 (reduced ansatz)."""

    ctx: VarContext
    residuals: tuple
    source: str
    ansatz: str  # "full" | "reduced"
    raw: tuple = ()


def _beta_expr(beta, var: str = "x") -> Expr:
    if isinstance(beta, CoefficientFn):
        if beta.kind != "symbolic":
            raise ValueError("a closed-form coefficient is required here")
        return beta.expr
    if isinstance(beta, str):
        return parse(beta, VarContext())
    return beta


def determining_system_reduced(beta, ansatz: str = "full"
                               ) -> DeterminingSystem:
    """Determining equations of the reduced canonical system.

    Generated by substituting the point-symmetry ansatz into the second
    prolongation and splitting by monomials in the first derivatives (and,
    for the reduced ansatz, in the dependents as well); every residual
    must vanish identically in x.
    """
    b = _beta_expr(beta)
    if ansatz == "full":
        funcs = [f"g{i}" for i in range(1, 10)]
        ctx = VarContext().with_functions(funcs)
        y, z = (sym(n) for n in ctx.dependents)
        g = {i: sym(f"g{i}") for i in range(1, 10)}
        dg1, dg2 = sym("g1'"), sym("g2'")
        xi = g[1] * y + g[2] * z + g[3]
        eta1 = dg1 * pow_(y, 2) + dg2 * y * z + g[4] * y + g[5] * z + g[6]
        eta2 = dg1 * y * z + dg2 * pow_(z, 2) + g[7] * y + g[8] * z + g[9]
        split_vars = list(ctx.first_derivatives)
    elif ansatz == "reduced":
        ctx = VarContext(parameters=frozenset({"c1", "c2", "c3", "c4"})) \
            .with_functions(["g3", "g6", "g9"])
        y, z = (sym(n) for n in ctx.dependents)
        half = C(Fraction(1, 2))
        xi = sym("g3")
        eta1 = (half * sym("g3'") + sym("c3")) * y + sym("c1") * z + sym("g6")
        eta2 = sym("c2") * y + (half * sym("g3'") + sym("c4")) * z + sym("g9")
        split_vars = list(ctx.first_derivatives) + list(ctx.dependents)
    else:
        raise ValueError(f"unknown ansatz {ansatz!r}")

    sysr = reduced_system(b, ctx)
    V = VectorField(ctx, simplify(xi), simplify(eta1), simplify(eta2))
    r1, r2 = prolong2_residuals(sysr, V)
    residuals = []
    for r in (r1, r2):
        for sig in sorted(coefficients_in(r, split_vars)):
            coeff = coefficients_in(r, split_vars)[sig]
            residuals.append(simplify(coeff))
    return DeterminingSystem(ctx, tuple(residuals),
                             source="generated (prolongation)",
                             ansatz=ansatz, raw=(r1, r2))


# ---------------------------------------------------------------------------
# explicit generator sets


def free_particle_algebra(ctx: VarContext | None = None) -> list:
    """The 15 point-symmetry generators of the free-particle system."""
    ctx = ctx or VarContext()
    x = sym(ctx.independent)
    y, z = (sym(n) for n in ctx.dependents)
    rows = [
        (C(1), ZERO, ZERO),
        (ZERO, C(1), ZERO),
        (ZERO, ZERO, C(1)),
        (x, ZERO, ZERO),
        (ZERO, x, ZERO),
        (ZERO, ZERO, x),
        (y, ZERO, ZERO),
        (z, ZERO, ZERO),
        (ZERO, y, ZERO),
        (ZERO, z, ZERO),
        (ZERO, ZERO, y),
        (ZERO, ZERO, z),
        (pow_(x, 2), mul(x, y), mul(x, z)),
        (mul(x, y), pow_(y, 2), mul(y, z)),
        (mul(x, z), mul(y, z), pow_(z, 2)),
    ]
    return [VectorField(ctx, *row) for row in rows]


def constant_beta_witnesses(k, ctx: VarContext | None = None) -> list:
    """Seven point-symmetry generators of y'' = -k z, z'' = k y (k != 0).

    Besides the translation, scaling and rotation fields, four generators
    with x-dependent translations solve the fourth-order equation
    g'''' = -k^2 g; their building block is a = sqrt(|k|/2).
    """
    ctx = ctx or VarContext()
    k = Fraction(k)
    if k == 0:
        raise ValueError("the constant coefficient must be nonzero")
    x = sym(ctx.independent)
    y, z = (sym(n) for n in ctx.dependents)
    a = pow_(C(abs(k) / 2), Fraction(1, 2))
    fields = [
        VectorField(ctx, C(1), ZERO, ZERO),
        VectorField(ctx, ZERO, y, z),
        VectorField(ctx, ZERO, z, neg(y)),
    ]
    for s in (1, -1):
        envelope = e_exp(mul(C(s), a, x))
        for trig in (e_sin, e_cos):
            g6 = mul(envelope, trig(mul(a, x)))
            g9 = simplify(div(neg(differentiate(
                differentiate(g6, ctx.independent), ctx.independent)), C(k)))
            fields.append(VectorField(ctx, ZERO, simplify(g6), g9))
    return fields


def serialize_generators(fields) -> str:
    lines = []
    for f in fields:
        lines.append(f"xi={to_string(f.xi)}; eta1={to_string(f.eta1)}; "
                     f"eta2={to_string(f.eta2)}")
    return "\n".join(lines) + "\n"


def parse_generators(text: str, ctx: VarContext | None = None) -> list:
    ctx = ctx or VarContext()
    fields = []
    for line in text.strip().splitlines():
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        parts = dict(chunk.strip().split("=", 1)
                     for chunk in line.split(";"))
        fields.append(VectorField(ctx, parse(parts["xi"], ctx),
                                  parse(parts["eta1"], ctx),
                                  parse(parts["eta2"], ctx)))
    return fields


def generator_rank(fields, sample_seed: int = 0) -> int:
    """Linear independence count of vector fields by evaluation functionals.

    Each field is evaluated at 12 random (x, y, z) points (36 columns);
    the rank uses a 1e-8 relative singular-value cutoff.
    """
    if not fields:
        raise ValueError("need at least one field")
    ctx = fields[0].ctx
    names = (ctx.independent, *ctx.dependents)
    last_err = None
    for attempt in range(5):
        rng = np.random.default_rng(sample_seed + attempt)
        pts = [{n: float(v) for n, v in
                zip(names, rng.uniform(0.3, 1.7, size=3))}
               for _ in range(12)]
        try:
            rows = []
            for f in fields:
                row = []
                for pt in pts:
                    row.extend(eval_expr(comp, pt) for comp in f.components)
                rows.append(row)
        except EvalDomainError as exc:
            last_err = exc
            continue
        svals = np.linalg.svd(np.array(rows), compute_uv=False)
        if svals.size == 0 or svals[0] == 0.0:
            return 0
        return int(np.sum(svals > 1e-8 * svals[0]))
    raise EvalDomainError(
        f"generators not evaluable at any sampled points: {last_err}", None)


# ---------------------------------------------------------------------------
# classification


@dataclass(frozen=True)
class RankReport:
    shape: tuple
    singular_values: tuple
    rank: int
    cutoff: float
    collocation_points: int


@dataclass(frozen=True)
class Classification:
    dimension: int
    case_label: str
    witness: tuple | None = None
    rank_report: RankReport | None = None
    notes: tuple = ()

    def render(self) -> str:
        lines = [f"symmetry dimension {self.dimension} [{self.case_label}]"]
        if self.witness is not None:
            lines.append(f"  witnesses: {len(self.witness)} generators")
        if self.rank_report is not None:
            r = self.rank_report
            lines.append(
                f"  collocation: matrix {r.shape[0]}x{r.shape[1]}, "
                f"rank {r.rank} at cutoff {r.cutoff:g} "
                f"({r.collocation_points} points)")
        for n in self.notes:
            lines.append(f"  note: {n}")
        return "\n".join(lines)


def _collocation_rank(beta_val, dbeta_val, interval, m_points: int,
                      svd_cut: float, h: float = 1e-3) -> RankReport:
    """Count independent constraints on the 11 symmetry parameters.

    State vector u = (g3, g3', g3'', g6, g6', g9, g9'); the parameter
    vector p appends (c1, c2, c3, c4).  The fundamental matrix of the
    linear constraint ODEs (g3''' = -2 beta (c1+c2), g6'' = -beta g9,
    g9'' = beta g6) is propagated by RK4, and the algebraic constraints
    are collected at evenly spaced collocation points.
    """
    lo, hi = float(interval[0]), float(interval[1])
    if hi - lo < 1e-2:
        raise IntervalTooSmall(
            f"interval [{lo}, {hi}] is too short for collocation")
    n = max(200, int(np.ceil((hi - lo) / h)))
    step = (hi - lo) / n
    xs = lo + step * np.arange(n + 1)
    try:
        bvals = np.array([beta_val(x) for x in xs])
        dbvals = np.array([dbeta_val(x) for x in xs])
        b_mid = np.array([beta_val(x + step / 2) for x in xs[:-1]])
    except EvalDomainError as exc:
        raise PoleInInterval(
            f"coefficient not evaluable on the interval: {exc}") from exc

    def deriv(b, phi):
        out = np.empty_like(phi)
        out[0] = phi[1]
        out[1] = phi[2]
        out[2] = 0.0
        out[2, 7] = -2.0 * b
        out[2, 8] = -2.0 * b
        out[3] = phi[4]
        out[4] = -b * phi[5]
        out[5] = phi[6]
        out[6] = b * phi[3]
        return out

    phi = np.zeros((7, 11))
    phi[:, :7] = np.eye(7)
    history = np.empty((n + 1, 7, 11))
    history[0] = phi
    for i in range(n):
        k1 = deriv(bvals[i], phi)
        k2 = deriv(b_mid[i], phi + step / 2 * k1)
        k3 = deriv(b_mid[i], phi + step / 2 * k2)
        k4 = deriv(bvals[i + 1], phi + step * k3)
        phi = phi + step / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        history[i + 1] = phi

    idx = np.unique(np.round(np.linspace(0, n, m_points)).astype(int))
    rows = []
    for i in idx:
        b, db = bvals[i], dbvals[i]
        g3_row = history[i, 0]
        dg3_row = history[i, 1]
        r1 = 2.0 * b * dg3_row + db * g3_row
        r1 = r1.copy()
        r1[9] += -b   # c3
        r1[10] += b   # c4
        r2 = 2.0 * b * dg3_row + db * g3_row
        r2 = r2.copy()
        r2[9] += b
        r2[10] += -b
        r3 = np.zeros(11)
        r3[7] = b
        r3[8] = b
        rows.extend((r1, r2, r3))
    mat = np.array(rows)
    norms = np.linalg.norm(mat, axis=1)
    keep = norms > 0
    mat = mat[keep] / norms[keep, None]
    if mat.size == 0:
        svals = np.zeros(0)
        rank = 0
    else:
        svals = np.linalg.svd(mat, compute_uv=False)
        rank = int(np.sum(svals > svd_cut * svals[0]))
    return RankReport(shape=mat.shape, singular_values=tuple(svals),
                      rank=rank, cutoff=svd_cut,
                      collocation_points=len(idx))


def _universal_witnesses(beta: Expr, ctx: VarContext) -> tuple:
    """Scaling and rotation fields, symmetries for every beta."""
    y, z = (sym(n) for n in ctx.dependents)
    return (VectorField(ctx, ZERO, y, z),
            VectorField(ctx, ZERO, z, neg(y)))


def classify_beta(beta, interval: tuple = (0.5, 3.0), seed: int = 0,
                  m_points: int = 40, svd_cut: float = 1e-8
                  ) -> Classification:
    """Symmetry-dimension classification of y'' = -beta z, z'' = beta y.

    Zero and constant beta are decided symbolically (15 and 7 dimensions,
    with explicit validated witnesses); variable beta goes through the
    collocation rank count, which yields 7 or 6.
    """
    ctx = VarContext()
    cf = beta if isinstance(beta, CoefficientFn) else (
        CoefficientFn.symbolic(beta) if isinstance(beta, (Expr, str))
        else CoefficientFn.constant(beta))

    if cf.kind == "symbolic":
        b = cf.expr
        if zero_verdict(b, seed=seed).is_zero:
            wit = tuple(free_particle_algebra(ctx))
            return Classification(15, "coefficient identically zero", witness=wit)
        if cf.is_constant():
            k = simplify(b)
            notes = ()
            wit = None
            if isinstance(k, Constant):
                candidates = constant_beta_witnesses(k.value, ctx)
                sysr = reduced_system(b, ctx)
                if all(check_symmetry(sysr, w, seed=seed)[0]
                       for w in candidates):
                    wit = tuple(candidates)
                else:
                    notes = ("closed-form constant-case witnesses failed "
                             "verification and were dropped",)
            return Classification(7, "nonzero constant coefficient", witness=wit,
                                  notes=notes)
        beta_val, dbeta_val = cf, cf.derivative
        sysr = reduced_system(b, ctx)
        wit = tuple(w for w in _universal_witnesses(b, ctx)
                    if check_symmetry(sysr, w, seed=seed)[0])
    else:
        if cf.is_constant(rtol=1e-6):
            if abs(cf.constant_value()) <= 1e-12:
                return Classification(15, "coefficient identically zero")
            return Classification(7, "nonzero constant coefficient",
                                  notes=("constancy detected numerically "
                                         "from the tabulated grid",))
        lo, hi = cf.domain
        interval = (max(interval[0], lo), min(interval[1], hi))
        beta_val, dbeta_val = cf, cf.derivative
        wit = None

    report = _collocation_rank(beta_val, dbeta_val, interval, m_points,
                               svd_cut)
    dim = 11 - report.rank
    if dim == 7:
        label = "variable coefficient, 7-dimensional"
    elif dim == 6:
        label = "variable coefficient, 6-dimensional"
    else:
        label = "numeric"
    return Classification(dim, label, witness=wit or None,
                          rank_report=report)
