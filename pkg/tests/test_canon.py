"""Canonical-form machinery: transformations, reductions, equivalence."""

from __future__ import annotations

import numpy as np
import pytest

from csalin.canon import (
    CoefficientFn, DxXZero, EquivalenceVerdict, LinearForm, MDegenerate,
    NonInvertible, PointTransformation, RhoVanishes,
    attempt_linear_equivalence, reduce_24_to_25, reduce_25_to_28,
    reduce_optimal, rescaling_transformation, transform_system,
)
from csalin.cubic import OdeSystem2
from csalin.expr import (
    C, VarContext, ZERO, parse, simplify, sym, to_string, zero_verdict,
)
from csalin.numerics import rk4, rk4_checked
from csalin.verify import integrate, residual_on_trajectory

CTX = VarContext()


def _sys(o1: str, o2: str, ctx=CTX) -> OdeSystem2:
    return OdeSystem2(ctx, parse(o1, ctx), parse(o2, ctx))


def _exp_polar(ctx, chi: str) -> PointTransformation:
    return PointTransformation(ctx, parse(chi, ctx),
                               parse("exp(y)*cos(z)", ctx),
                               parse("exp(y)*sin(z)", ctx))


# ---------------------------------------------------------------------------
# transform_system


def test_transform_worked_system_to_free_particle():
    s = _sys("-dy^2 + dz^2 - (2/x)*dy", "-2*dy*dz - (2/x)*dz")
    out = transform_system(s, _exp_polar(CTX, "1/x"))
    assert out.omega1 == ZERO and out.omega2 == ZERO


def test_transform_constant_coefficient_case():
    ctx = VarContext(parameters=frozenset({"c1", "c2"}))
    s = _sys("-dy^2 + dz^2 + c1*dy - c2*dz", "-2*dy*dz + c2*dy + c1*dz", ctx)
    out = transform_system(s, _exp_polar(ctx, "x"))
    nctx = out.ctx
    w1 = parse("c1*Y' - c2*Z'", nctx)
    w2 = parse("c2*Y' + c1*Z'", nctx)
    assert zero_verdict(simplify(out.omega1 - w1)).is_zero
    assert zero_verdict(simplify(out.omega2 - w2)).is_zero


def test_transform_identity():
    s = _sys("x*dy + y", "z^2")
    out = transform_system(s, PointTransformation.identity(CTX))
    assert zero_verdict(simplify(out.omega1 - s.omega1)).is_zero
    assert zero_verdict(simplify(out.omega2 - s.omega2)).is_zero


def test_transform_affine_rescaling():
    # y = e^x Y  <->  Y = e^-x y turns the free particle into a damped form
    ctx = VarContext()
    s = _sys("0", "0", ctx)
    T = PointTransformation(ctx, parse("x", ctx),
                            parse("exp(-x)*y", ctx), parse("exp(-x)*z", ctx))
    out = transform_system(s, T)
    nctx = out.ctx
    w1 = parse("2*Y' + Y", nctx)
    assert zero_verdict(simplify(out.omega1 + w1)).is_zero


def test_transform_dxx_zero():
    s = _sys("0", "0")
    with pytest.warns(UserWarning, match="singular"):
        T = PointTransformation(CTX, C(3), sym("y"), sym("z"))
    with pytest.raises(DxXZero):
        transform_system(s, T)


def test_transform_unsupported_family():
    s = _sys("0", "0")
    T = PointTransformation(CTX, sym("x"), parse("sin(y)", CTX),
                            parse("cos(z)", CTX))
    with pytest.raises(NonInvertible):
        transform_system(s, T)


def test_transform_explicit_inverse_escape_hatch():
    ctx = VarContext()
    T = PointTransformation(
        ctx, parse("x", ctx), parse("y^3", ctx), parse("z", ctx),
        inverse={"x": sym("X"), "y": parse("Y^(1/3)", _new()),
                 "z": sym("Z")})
    out = transform_system(_sys("0", "0"), T)
    # Y = y^3 with y'' = 0 gives Y'' = 6 y y'^2 = (2/3) Y'^2 / Y
    w1 = parse("(2/3)*Y'^2/Y", _new())
    assert zero_verdict(simplify(out.omega1 - w1)).is_zero


def _new() -> VarContext:
    return VarContext("X", ("Y", "Z"), ("Y'", "Z'"), ("Y''", "Z''"))


def test_transform_roundtrip_on_trajectory():
    ctx = VarContext()
    s = _sys("-dy^2 + dz^2 - (2/x)*dy", "-2*dy*dz - (2/x)*dz", ctx)
    T = _exp_polar(ctx, "1/x")
    target = transform_system(s, T)
    traj = integrate(s, (1.0, 0.0, 0.0, 0.1, 0.1), 2.0)
    assert residual_on_trajectory(traj, target, T) <= 1e-6


# ---------------------------------------------------------------------------
# coefficient functions


def test_coefficient_grid_must_increase():
    with pytest.raises(ValueError):
        CoefficientFn.tabulated([0.0, 0.0, 1.0], [1.0, 2.0, 3.0])


def test_coefficient_symbolic_must_close_over_var():
    with pytest.raises(ValueError):
        CoefficientFn.symbolic("x + y")


def test_coefficient_interpolation_accuracy():
    xs = np.linspace(0.0, 2.0, 2001)
    c = CoefficientFn.tabulated(xs, np.sin(xs))
    probe = np.linspace(0.05, 1.95, 57)
    assert np.max(np.abs(c(probe) - np.sin(probe))) < 1e-10
    assert np.max(np.abs(c.derivative(probe) - np.cos(probe))) < 1e-7


def test_coefficient_serialization_roundtrip():
    xs = np.linspace(1.0, 2.0, 11)
    c = CoefficientFn.tabulated(xs, 1.0 / xs, source="inverse law",
                                step=0.1, error_estimate=1e-9)
    back = CoefficientFn.deserialize(c.serialize())
    assert np.array_equal(back.xs, c.xs)
    assert np.array_equal(back.values, c.values)
    assert back.source == "inverse law"
    assert back.step == 0.1 and back.error_estimate == 1e-9
    s = CoefficientFn.symbolic("2/x^2")
    back2 = CoefficientFn.deserialize(s.serialize())
    assert back2(2.0) == pytest.approx(0.5)


# ---------------------------------------------------------------------------
# reductions


def test_reduce_optimal_zero_trace_is_symbolic_identity():
    lf = LinearForm("general", {"d11": 0, "d22": 0, "d12": 2, "d21": 2})
    res = reduce_optimal(lf, (0.0, 1.0))
    assert to_string(res.form["dt11"].expr) == "0"
    assert to_string(res.form["dt12"].expr) == "2"
    assert to_string(res.rho.expr) == "1"


def test_reduce_optimal_traceless_nondiagonal_unchanged():
    lf = LinearForm("general", {"d11": 1, "d22": -1, "d12": 0, "d21": 0})
    res = reduce_optimal(lf, (0.0, 1.0))
    assert to_string(res.form["dt11"].expr) == "1"
    assert to_string(res.rho.expr) == "1"


def test_reduce_optimal_cosh_oracle():
    lf = LinearForm("general", {"d11": 1, "d22": 1, "d12": 0, "d21": 0})
    res = reduce_optimal(lf, (0.0, 1.0))
    assert np.max(np.abs(res.rho.values - np.cosh(res.rho.xs))) < 1e-8
    for slot in ("dt11", "dt12", "dt21"):
        assert np.max(np.abs(res.form[slot].values)) == 0.0
    # the new variable is tanh(t), pinned to agree at t0 = 0
    assert np.max(np.abs(res.new_var.values - np.tanh(res.new_var.xs))) < 1e-8


def test_reduce_optimal_requires_general_kind():
    with pytest.raises(ValueError):
        reduce_optimal(LinearForm("reduced", {"beta": 1}), (0, 1))


def test_reduce_25_to_28_trivial_and_symbolic():
    res = reduce_25_to_28(LinearForm("zero_order", {"a3": 0, "a4": 1}),
                          (0.0, 1.0))
    assert to_string(res.form["beta"].expr) == "1"
    res2 = reduce_25_to_28(LinearForm("zero_order", {"a3": 0, "a4": "1/x"}),
                           (1.0, 2.0))
    assert zero_verdict(simplify(
        res2.form["beta"].expr - parse("1/x", CTX))).is_zero


def test_reduce_25_to_28_rho_analytic_oracle():
    # rho'' = (2/x^2) rho with rho(1)=1, rho'(1)=0 solves to (x^3 + 2)/(3x)
    lf = LinearForm("zero_order", {"a3": "2/x^2", "a4": 1})
    res = reduce_25_to_28(lf, (1.0, 2.0))
    ts = res.rho.xs
    want = (ts ** 3 + 2) / (3 * ts)
    assert np.max(np.abs(res.rho.values - want)) < 1e-8
    assert res.error_estimate <= 1e-8
    beta_want = want ** 4  # a4 = 1
    assert np.max(np.abs(res.form["beta"].values - beta_want)) < 1e-7


def test_reduce_25_to_28_rho_vanishes():
    # rho'' = -4 rho gives rho = cos(2(t - t0)), crossing zero at pi/4
    lf = LinearForm("zero_order", {"a3": -4, "a4": 1})
    with pytest.raises(RhoVanishes) as err:
        reduce_25_to_28(lf, (0.0, 2.0))
    assert abs(err.value.crossing - np.pi / 4) < 1e-2


def test_reduce_25_to_28_roundtrip_residual():
    # map Reduced solutions back through the rescaling and check they solve
    # the original undifferentiated-coupling system
    lf = LinearForm("zero_order", {"a3": "2/x^2", "a4": 1})
    res = reduce_25_to_28(lf, (1.0, 2.0))
    beta = res.form["beta"]
    rho_of_t = res.rho
    x_of_t = res.new_var

    def reduced_rhs(x, s):
        b = beta(x)
        return np.array([s[2], s[3], -b * s[1], b * s[0]])

    lo, hi = beta.domain
    xs, ys = rk4(reduced_rhs, lo + 1e-6, np.array([0.3, -0.2, 0.1, 0.4]),
                 hi - 1e-6, 1e-3)
    # back-map: y(t) = rho(t) * Y(x(t)); check the original system on a grid
    from scipy.interpolate import make_interp_spline
    sy = make_interp_spline(xs, ys[:, 0], k=5)
    sz = make_interp_spline(xs, ys[:, 1], k=5)
    ts = np.linspace(1.05, 1.95, 300)
    rr = rho_of_t(ts)
    xx = x_of_t(ts)
    yv = rr * sy(xx)
    zv = rr * sz(xx)
    spl_y = make_interp_spline(ts, yv, k=5)
    spl_z = make_interp_spline(ts, zv, k=5)
    a3 = 2.0 / ts ** 2
    res1 = spl_y.derivative(2)(ts) - (a3 * yv - 1.0 * zv)
    res2 = spl_z.derivative(2)(ts) - (1.0 * yv + a3 * zv)
    inner = slice(3, -3)
    assert np.max(np.abs(res1[inner]) + np.abs(res2[inner])) <= 1e-6


def test_reduce_24_to_25_trivial():
    res = reduce_24_to_25(LinearForm("first_order", {"a1": 0, "a2": 0}),
                          (0.0, 1.0))
    assert to_string(res.form["a3"].expr) == "0"
    assert to_string(res.form["a4"].expr) == "0"
    assert np.max(np.abs(res.m1.values - 1.0)) < 1e-12
    assert np.max(np.abs(res.m2.values)) < 1e-12


def test_reduce_24_to_25_constant_damping():
    # a1 = c: the rescaling is exp(cx/2) and the output coefficient is
    # +c^2/4 (transforming y'' = c y' by y = e^{cx/2} Y gives
    # Y'' = (c^2/4) Y after the first-derivative term cancels)
    res = reduce_24_to_25(LinearForm("first_order", {"a1": 3, "a2": 0}),
                          (0.0, 1.0))
    assert to_string(res.form["a3"].expr) == "9/4"
    assert to_string(res.form["a4"].expr) == "0"
    assert np.max(np.abs(res.m1.values - np.exp(1.5 * res.m1.xs))) < 1e-10
    assert res.cross_check_error < 1e-9


def test_reduce_24_to_25_constant_damping_trajectory_oracle():
    # independent check of the +c^2/4 sign: integrate y'' = c y', rescale
    # the trajectory with (M1, M2), and verify it solves y'' = (c^2/4) y
    c = 3.0
    res = reduce_24_to_25(LinearForm("first_order", {"a1": 3, "a2": 0}),
                          (0.0, 1.0))
    mapper = rescaling_transformation(res.m1, res.m2)

    def rhs(t, s):
        return np.array([s[2], s[3], c * s[2], c * s[3]])

    ts, ys = rk4(rhs, 0.0, np.array([0.5, -0.3, 0.2, 0.7]), 1.0, 1e-3)
    mapped = np.array([mapper(t, s) for t, s in zip(ts, ys)])
    from scipy.interpolate import make_interp_spline
    sy = make_interp_spline(ts, mapped[:, 0], k=5)
    resid = sy.derivative(2)(ts) - (c * c / 4.0) * mapped[:, 0]
    assert np.max(np.abs(resid[3:-3])) <= 1e-6
    # and with the opposite sign the residual is far from zero
    bad = sy.derivative(2)(ts) + (c * c / 4.0) * mapped[:, 0]
    assert np.max(np.abs(bad[3:-3])) > 1e-2


def test_reduce_24_to_25_rotation():
    # a2 = c: the rescaling pair is (cos(cx/2), sin(cx/2)) and the output
    # has a3 = -c^2/4
    res = reduce_24_to_25(LinearForm("first_order", {"a1": 0, "a2": 2}),
                          (0.0, 1.0))
    assert to_string(res.form["a3"].expr) == "-1"
    assert to_string(res.form["a4"].expr) == "0"
    assert np.max(np.abs(res.m1.values - np.cos(res.m1.xs))) < 1e-10
    assert np.max(np.abs(res.m2.values - np.sin(res.m2.xs))) < 1e-10


def test_reduce_24_to_25_symbolic_closed_form():
    res = reduce_24_to_25(
        LinearForm("first_order", {"a1": "1+x", "a2": "2"}), (0.0, 1.0))
    want3 = parse("(1+x)^2/4 - 1 - 1/2", CTX)
    want4 = parse("(1+x)", CTX)
    assert zero_verdict(simplify(res.form["a3"].expr - want3)).is_zero
    assert zero_verdict(simplify(res.form["a4"].expr - want4)).is_zero
    assert res.cross_check_error < 1e-8


def test_richardson_validation_helper():
    _, _, err = rk4_checked(lambda t, y: np.array([y[1], -y[0]]),
                            0.0, np.array([1.0, 0.0]), 3.0, 1e-3)
    assert err < 1e-11


# ---------------------------------------------------------------------------
# constant-linear-map equivalence


def _opt(a, b, c) -> LinearForm:
    return LinearForm("optimal", {"dt11": a, "dt12": b, "dt21": c})


def _zero_order(a3, a4) -> LinearForm:
    return LinearForm("zero_order", {"a3": a3, "a4": a4})


def test_equivalence_generic_constant_case_inconsistent():
    for target in (_zero_order(0, 1), _zero_order(2, 3), _zero_order(1, 0)):
        v = attempt_linear_equivalence(_opt(1, 2, 3), target)
        assert isinstance(v, EquivalenceVerdict)
        assert not v.consistent
        assert v.case == "inconsistent"
        assert any("contradiction" in step for step in v.chain)


def test_equivalence_free_particle_corner():
    v = attempt_linear_equivalence(_opt(0, 0, 0), _zero_order(0, 0))
    assert v.consistent and v.case == "both-free-particle"
    assert v.solution is not None


def test_equivalence_degenerate_family_flagged():
    v = attempt_linear_equivalence(_opt(1, 1, -1), _zero_order(0, 1))
    assert not v.consistent
    assert v.case == "degenerate-family"
    assert any("8-dimensional" in step for step in v.chain)


def test_equivalence_verdict_symmetric_under_swap():
    # the verdict must not depend on which side is treated as the source
    a = attempt_linear_equivalence(_opt(1, 2, 3), _zero_order(0, 1),
                                   source="optimal")
    b = attempt_linear_equivalence(_opt(1, 2, 3), _zero_order(0, 1),
                                   source="target")
    assert (a.consistent, a.case) == (b.consistent, b.case)


def test_equivalence_accepts_reduced_targets():
    v = attempt_linear_equivalence(_opt(1, 2, 3),
                                   LinearForm("reduced", {"beta": 1}))
    assert not v.consistent


def test_equivalence_rejects_nonconstant_coefficients():
    with pytest.raises(ValueError):
        attempt_linear_equivalence(
            LinearForm("optimal", {"dt11": "x", "dt12": 0, "dt21": 0}),
            _zero_order(0, 1))
