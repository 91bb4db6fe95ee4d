"""Cubic-form extraction, reassembly and the coefficient conditions."""

from __future__ import annotations

import random
from fractions import Fraction

import pytest

from csalin.cubic import (
    CubicForm, DegreeTooHigh, OdeSystem2, check_theorem2, extract_cubic,
    reassemble,
)
from csalin.csa import realify
from csalin.expr import (
    C, VarContext, ZERO, mul, parse, simplify, sym, to_string, zero_verdict,
)


CTX = VarContext()


def _sys(o1: str, o2: str, ctx=CTX) -> OdeSystem2:
    return OdeSystem2(ctx, parse(o1, ctx), parse(o2, ctx))


def test_extract_worked_system():
    s = _sys("-dy^2 + dz^2 - (2/x)*dy", "-2*dy*dz - (2/x)*dz")
    cf = extract_cubic(s)
    assert to_string(cf.beta[(1, 1)]) == "1"
    assert to_string(cf.beta[(1, 3)]) == "-1"
    assert to_string(cf.beta[(2, 2)]) == "2"
    want = parse("2/x", CTX)
    assert zero_verdict(simplify(cf.gamma[(1, 1)] - want)).is_zero
    assert zero_verdict(simplify(cf.gamma[(2, 2)] - want)).is_zero
    assert cf.alpha[(1, 1)] == ZERO


def test_extract_rejects_quartic():
    with pytest.raises(DegreeTooHigh):
        extract_cubic(_sys("dy^4", "0"))


def test_extract_rejects_nonpolynomial():
    from csalin.expr import NotPolynomial
    with pytest.raises(NotPolynomial):
        extract_cubic(_sys("sin(dy)", "0"))


def test_rhs_cannot_contain_second_derivatives():
    with pytest.raises(ValueError):
        _sys("y''", "0")


def _random_cubic(rng: random.Random) -> CubicForm:
    pool = ["x", "y", "z", "x*y", "1/x", "y+z", "x^2"]

    def coeff():
        if rng.random() < 0.4:
            return C(rng.randint(-3, 3))
        return parse(rng.choice(pool), CTX)

    alpha = {(i, j): coeff() for i in (1, 2) for j in (1, 2, 3, 4)}
    beta = {(i, j): coeff() for i in (1, 2) for j in (1, 2, 3)}
    gamma = {(i, j): coeff() for i in (1, 2) for j in (1, 2)}
    delta = {i: coeff() for i in (1, 2)}
    return CubicForm(CTX, alpha, beta, gamma, delta)


def test_roundtrip_random_cubics():
    rng = random.Random(42)
    for _ in range(30):
        cf = _random_cubic(rng)
        back = extract_cubic(reassemble(cf))
        for fam in ("alpha", "beta", "gamma"):
            d1, d2 = getattr(cf, fam), getattr(back, fam)
            for key in d1:
                diff = simplify(d1[key] - d2[key])
                assert zero_verdict(diff).is_zero, (fam, key)
        for row in (1, 2):
            diff = simplify(cf.delta[row] - back.delta[row])
            assert zero_verdict(diff).is_zero


def test_coefficients_must_be_derivative_free():
    with pytest.raises(ValueError):
        CubicForm(CTX, {}, {(1, 1): parse("dy", CTX)}, {}, {})


def test_conditions_pass_on_worked_system():
    rep = check_theorem2(extract_cubic(
        _sys("-dy^2 + dz^2 - (2/x)*dy", "-2*dy*dz - (2/x)*dz")))
    assert rep.overall
    cc = rep.complex_coefficients
    assert to_string(cc["E2"][0]) == "1"
    assert zero_verdict(simplify(cc["E1"][0] - parse("2/x", CTX))).is_zero
    assert cc["E3"] == (ZERO, ZERO)
    assert cc["E0"] == (ZERO, ZERO)


def test_conditions_fail_names_culprit():
    rep = check_theorem2(extract_cubic(_sys("dy^2", "0")))
    assert not rep.overall
    names = {c.name for c in rep.failing()}
    assert "beta11 = beta22/2" in names
    assert rep.complex_coefficients is None


def test_realified_equation_always_passes_conditions():
    rng = random.Random(7)
    pool = ["x", "y", "2*y - z", "x*z", "y + x^2"]
    for _ in range(10):
        def pair():
            # analytic pair: (f(x)*y - g... ) keep it simple: a(x) + b(x)*(y,z)
            a = parse(rng.choice(["x", "1/x", "2", "x^2"]), CTX)
            b = C(rng.randint(-2, 2))
            re_part = simplify(a + mul(b, sym("y")))
            im_part = simplify(mul(b, sym("z")))
            return (re_part, im_part)

        s = realify(pair(), pair(), pair(), pair(), CTX)
        rep = check_theorem2(extract_cubic(s))
        assert rep.overall
