"""Minimal symbolic expression kernel.

Immutable expression trees over a declared variable set, with parsing,
differentiation, substitution, canonical simplification, numeric evaluation
and polynomial coefficient collection.  Constants are exact rationals during
symbolic work; floats appear only at the eval boundary.

The simplifier expands products and integer powers and collects like
monomials, which is enough to decide zero for expressions that are
polynomial in the dependent variables and their derivatives with
rational-function coefficients.  Transcendental mixtures fall back to the
sampled zero test (`is_zero_sampled`).
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable, Mapping

import numpy as np

__all__ = [
    "Expr", "Constant", "Symbol", "Add", "Mul", "Pow", "Neg", "Div", "Func",
    "VarContext", "ExprError", "ParseError", "UndeclaredSymbol",
    "ArityMismatch", "NonRationalExponent", "EvalDomainError", "UnboundSymbol",
    "NotPolynomial", "AllSamplesFailed", "ZeroVerdict",
    "C", "sym", "add", "mul", "pow_", "neg", "div", "exp", "log", "sin",
    "cos", "sqrt",
    "parse", "to_string", "normalize", "simplify", "differentiate",
    "substitute", "rewrite_subterms", "eval_expr", "free_symbols",
    "zero_verdict", "is_zero_sampled", "collect", "coefficients_in",
    "poly_degree",
]

FUNC_NAMES = ("exp", "log", "sin", "cos", "sqrt")


# ---------------------------------------------------------------------------
# errors

class ExprError(Exception):
    pass


class ParseError(ExprError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class UndeclaredSymbol(ExprError):
    pass


class ArityMismatch(ExprError):
    pass


class NonRationalExponent(ExprError):
    pass


class EvalDomainError(ExprError):
    def __init__(self, message: str, subterm: "Expr"):
        super().__init__(f"{message} in subterm '{to_string(subterm)}'")
        self.subterm = subterm


class UnboundSymbol(ExprError):
    pass


class NotPolynomial(ExprError):
    pass


class AllSamplesFailed(ExprError):
    pass


# ---------------------------------------------------------------------------
# expression nodes

class Expr:
    """Base class for immutable expression nodes."""

    __slots__ = ()

    def __add__(self, other):
        return add(self, _as_expr(other))

    def __radd__(self, other):
        return add(_as_expr(other), self)

    def __sub__(self, other):
        return add(self, neg(_as_expr(other)))

    def __rsub__(self, other):
        return add(_as_expr(other), neg(self))

    def __mul__(self, other):
        return mul(self, _as_expr(other))

    def __rmul__(self, other):
        return mul(_as_expr(other), self)

    def __truediv__(self, other):
        return div(self, _as_expr(other))

    def __rtruediv__(self, other):
        return div(_as_expr(other), self)

    def __pow__(self, other):
        return pow_(self, other)

    def __neg__(self):
        return neg(self)

    def __str__(self):
        return to_string(self)


@dataclass(frozen=True)
class Constant(Expr):
    value: Fraction

    def __str__(self):
        return to_string(self)


@dataclass(frozen=True)
class Symbol(Expr):
    name: str

    def __str__(self):
        return to_string(self)


@dataclass(frozen=True)
class Add(Expr):
    terms: tuple

    def __str__(self):
        return to_string(self)


@dataclass(frozen=True)
class Mul(Expr):
    factors: tuple

    def __str__(self):
        return to_string(self)


@dataclass(frozen=True)
class Pow(Expr):
    base: Expr
    exponent: Fraction

    def __str__(self):
        return to_string(self)


@dataclass(frozen=True)
class Neg(Expr):
    arg: Expr

    def __str__(self):
        return to_string(self)


@dataclass(frozen=True)
class Div(Expr):
    num: Expr
    den: Expr

    def __str__(self):
        return to_string(self)


@dataclass(frozen=True)
class Func(Expr):
    kind: str  # one of FUNC_NAMES
    arg: Expr

    def __str__(self):
        return to_string(self)


def _as_expr(v) -> Expr:
    if isinstance(v, Expr):
        return v
    if isinstance(v, (int, Fraction)):
        return Constant(Fraction(v))
    raise TypeError(f"cannot coerce {v!r} to Expr")


def C(v) -> Constant:
    return Constant(Fraction(v))


def sym(name: str) -> Symbol:
    return Symbol(name)


def add(*terms) -> Expr:
    ts = tuple(_as_expr(t) for t in terms)
    if len(ts) == 1:
        return ts[0]
    return Add(ts)


def mul(*factors) -> Expr:
    fs = tuple(_as_expr(f) for f in factors)
    if len(fs) == 1:
        return fs[0]
    return Mul(fs)


def pow_(base, exponent) -> Expr:
    return Pow(_as_expr(base), Fraction(exponent))


def neg(arg) -> Expr:
    return Neg(_as_expr(arg))


def div(num, den) -> Expr:
    return Div(_as_expr(num), _as_expr(den))


def exp(arg) -> Expr:
    return Func("exp", _as_expr(arg))


def log(arg) -> Expr:
    return Func("log", _as_expr(arg))


def sin(arg) -> Expr:
    return Func("sin", _as_expr(arg))


def cos(arg) -> Expr:
    return Func("cos", _as_expr(arg))


def sqrt(arg) -> Expr:
    return Func("sqrt", _as_expr(arg))


ZERO = Constant(Fraction(0))
ONE = Constant(Fraction(1))


# ---------------------------------------------------------------------------
# variable context

@dataclass(frozen=True)
class VarContext:
    """Declared alphabet: one independent variable, two dependents, their
    derivative symbols, free parameters and (optionally) opaque functions of
    the independent variable used when generating determining equations."""

    independent: str = "x"
    dependents: tuple = ("y", "z")
    first_derivatives: tuple = ("y'", "z'")
    second_derivatives: tuple = ("y''", "z''")
    parameters: frozenset = frozenset()
    functions_of_x: frozenset = frozenset()

    def __post_init__(self):
        names = [self.independent, *self.dependents, *self.first_derivatives,
                 *self.second_derivatives, *self.parameters,
                 *self.functions_of_x]
        if len(set(names)) != len(names):
            raise ValueError(f"variable names must be distinct: {names}")

    @property
    def aliases(self) -> dict:
        # dy, dz are aliases for the first-derivative symbols
        return {f"d{dep}": d1
                for dep, d1 in zip(self.dependents, self.first_derivatives)}

    def is_declared(self, name: str) -> bool:
        if name == self.independent or name in self.dependents \
                or name in self.first_derivatives \
                or name in self.second_derivatives \
                or name in self.parameters:
            return True
        base = name.rstrip("'")
        return base in self.functions_of_x

    def function_derivative(self, name: str) -> str | None:
        """If `name` is an opaque function of x (possibly primed), the symbol
        naming its next derivative; otherwise None."""
        base = name.rstrip("'")
        if base in self.functions_of_x:
            return name + "'"
        return None

    def with_functions(self, names: Iterable[str]) -> "VarContext":
        return VarContext(self.independent, self.dependents,
                          self.first_derivatives, self.second_derivatives,
                          self.parameters,
                          self.functions_of_x | frozenset(names))

    def with_parameters(self, names: Iterable[str]) -> "VarContext":
        return VarContext(self.independent, self.dependents,
                          self.first_derivatives, self.second_derivatives,
                          self.parameters | frozenset(names),
                          self.functions_of_x)


# ---------------------------------------------------------------------------
# parsing

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>\d+(?:\.\d+)?)|(?P<name>[A-Za-z_][A-Za-z0-9_]*'*)"
    r"|(?P<op>[-+*/^()]))"
)


def _tokenize(text: str):
    tokens = []
    pos = 0
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None or m.end() == pos:
            raise ParseError(f"unexpected character {text[pos]!r}", pos)
        if m.lastgroup == "num":
            tokens.append(("num", m.group("num"), m.start("num")))
        elif m.lastgroup == "name":
            tokens.append(("name", m.group("name"), m.start("name")))
        else:
            tokens.append(("op", m.group("op"), m.start("op")))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    """Pratt parser for the infix expression grammar."""

    _INFIX_BP = {"+": 10, "-": 10, "*": 20, "/": 20, "^": 30}

    def __init__(self, tokens, ctx: VarContext):
        self.tokens = tokens
        self.pos = 0
        self.ctx = ctx

    def peek(self):
        return self.tokens[self.pos]

    def advance(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect_op(self, op: str):
        kind, val, at = self.advance()
        if kind != "op" or val != op:
            raise ParseError(f"expected {op!r}, found {val!r}", at)

    def parse(self) -> Expr:
        e = self.expression(0)
        kind, val, at = self.peek()
        if kind != "end":
            raise ParseError(f"unexpected trailing input {val!r}", at)
        return e

    def expression(self, min_bp: int) -> Expr:
        e = self.prefix()
        while True:
            kind, val, _ = self.peek()
            if kind != "op" or val not in self._INFIX_BP:
                break
            bp = self._INFIX_BP[val]
            if bp < min_bp:
                break
            self.advance()
            # ^ is right-associative
            rhs = self.expression(bp if val == "^" else bp + 1)
            if val == "+":
                e = Add((e, rhs)) if not isinstance(e, Add) \
                    else Add(e.terms + (rhs,))
            elif val == "-":
                r = Neg(rhs)
                e = Add((e, r)) if not isinstance(e, Add) \
                    else Add(e.terms + (r,))
            elif val == "*":
                e = Mul((e, rhs)) if not isinstance(e, Mul) \
                    else Mul(e.factors + (rhs,))
            elif val == "/":
                e = Div(e, rhs)
            else:
                e = _make_pow(e, rhs)
        return e

    def prefix(self) -> Expr:
        kind, val, at = self.advance()
        if kind == "num":
            return Constant(Fraction(val))
        if kind == "op" and val == "(":
            e = self.expression(0)
            self.expect_op(")")
            return e
        if kind == "op" and val == "-":
            return Neg(self.expression(25))
        if kind == "op" and val == "+":
            return self.expression(25)
        if kind == "name":
            if val in FUNC_NAMES:
                k, v, a = self.peek()
                if k != "op" or v != "(":
                    raise ArityMismatch(
                        f"function {val!r} requires parenthesized argument")
                self.advance()
                arg = self.expression(0)
                k, v, a = self.peek()
                if k == "op" and v == ",":  # pragma: no cover - grammar has no commas
                    raise ArityMismatch(f"function {val!r} takes one argument")
                self.expect_op(")")
                return Func(val, arg)
            name = self.ctx.aliases.get(val, val)
            if not self.ctx.is_declared(name):
                raise UndeclaredSymbol(f"symbol {val!r} is not declared")
            return Symbol(name)
        raise ParseError(f"unexpected token {val!r}", at)


def _make_pow(base: Expr, exponent: Expr) -> Expr:
    q = _rational_value(exponent)
    if q is None:
        raise NonRationalExponent(
            f"exponent {to_string(exponent)!r} is not a rational constant")
    return Pow(base, q)


def _rational_value(e: Expr) -> Fraction | None:
    """Exact rational value of a constant subtree, else None."""
    if isinstance(e, Constant):
        return e.value
    if isinstance(e, Neg):
        v = _rational_value(e.arg)
        return None if v is None else -v
    if isinstance(e, Add):
        vals = [_rational_value(t) for t in e.terms]
        if any(v is None for v in vals):
            return None
        return sum(vals, Fraction(0))
    if isinstance(e, Mul):
        vals = [_rational_value(f) for f in e.factors]
        if any(v is None for v in vals):
            return None
        out = Fraction(1)
        for v in vals:
            out *= v
        return out
    if isinstance(e, Div):
        a, b = _rational_value(e.num), _rational_value(e.den)
        if a is None or b is None or b == 0:
            return None
        return a / b
    if isinstance(e, Pow):
        b = _rational_value(e.base)
        if b is None:
            return None
        q = e.exponent
        if q.denominator == 1:
            if b == 0 and q < 0:
                return None
            return b ** q.numerator if q >= 0 else 1 / (b ** (-q.numerator))
        return None
    return None


def parse(text: str, ctx: VarContext) -> Expr:
    """Parse an infix expression over the declared variables.

    Derivative symbols are written y', z' (dy, dz are accepted aliases).
    The result is lightly normalized: nested sums/products are flattened and
    constant subtrees are folded to exact rationals.
    """
    tokens = _tokenize(text)
    tree = _Parser(tokens, ctx).parse()
    return normalize(tree)


# ---------------------------------------------------------------------------
# light normalization (flatten + constant folding, no reordering)

def normalize(e: Expr) -> Expr:
    if isinstance(e, (Constant, Symbol)):
        return e
    if isinstance(e, Add):
        terms = []
        for t in e.terms:
            t = normalize(t)
            if isinstance(t, Add):
                terms.extend(t.terms)
            else:
                terms.append(t)
        consts = [t for t in terms if isinstance(t, Constant)]
        if len(consts) == len(terms):
            return Constant(sum((c.value for c in consts), Fraction(0)))
        terms = [t for t in terms if not (isinstance(t, Constant)
                                          and t.value == 0)] or [ZERO]
        if len(terms) == 1:
            return terms[0]
        return Add(tuple(terms))
    if isinstance(e, Mul):
        factors = []
        for f in e.factors:
            f = normalize(f)
            if isinstance(f, Mul):
                factors.extend(f.factors)
            else:
                factors.append(f)
        consts = [f for f in factors if isinstance(f, Constant)]
        if len(consts) == len(factors):
            out = Fraction(1)
            for c in consts:
                out *= c.value
            return Constant(out)
        if any(isinstance(f, Constant) and f.value == 0 for f in factors):
            return ZERO
        factors = [f for f in factors if not (isinstance(f, Constant)
                                              and f.value == 1)] or [ONE]
        if len(factors) == 1:
            return factors[0]
        return Mul(tuple(factors))
    if isinstance(e, Neg):
        a = normalize(e.arg)
        if isinstance(a, Constant):
            return Constant(-a.value)
        return Neg(a)
    if isinstance(e, Div):
        a, b = normalize(e.num), normalize(e.den)
        if isinstance(a, Constant) and isinstance(b, Constant) \
                and b.value != 0:
            return Constant(a.value / b.value)
        return Div(a, b)
    if isinstance(e, Pow):
        b = normalize(e.base)
        q = e.exponent
        if q == 1:
            return b
        if isinstance(b, Constant) and q.denominator == 1 and \
                not (b.value == 0 and q < 0):
            n = q.numerator
            return Constant(b.value ** n if n >= 0
                            else 1 / (b.value ** (-n)))
        return Pow(b, q)
    if isinstance(e, Func):
        return Func(e.kind, normalize(e.arg))
    raise TypeError(f"unknown node {e!r}")


# ---------------------------------------------------------------------------
# printing

_PREC_ADD, _PREC_MUL, _PREC_NEG, _PREC_POW, _PREC_ATOM = 1, 2, 2, 3, 4


def _print(e: Expr) -> tuple:
    """Return (text, precedence)."""
    if isinstance(e, Constant):
        v = e.value
        if v.denominator == 1:
            if v >= 0:
                return str(v.numerator), _PREC_ATOM
            return f"-{-v.numerator}", _PREC_NEG
        text = f"{v.numerator}/{v.denominator}"
        if v < 0:
            return text, _PREC_NEG
        return text, _PREC_MUL
    if isinstance(e, Symbol):
        return e.name, _PREC_ATOM
    if isinstance(e, Add):
        parts = []
        for i, t in enumerate(e.terms):
            if isinstance(t, Neg):
                inner, p = _print(t.arg)
                if p < _PREC_ADD or (i > 0 and p <= _PREC_ADD):
                    inner = f"({inner})"
                parts.append(f"-{inner}" if i == 0 else f"- {inner}")
            else:
                inner, p = _print(t)
                if p <= _PREC_ADD and i > 0:
                    inner = f"({inner})"
                elif p < _PREC_ADD:
                    inner = f"({inner})"
                parts.append(inner)
        return " + ".join(parts).replace("+ - ", "- "), _PREC_ADD
    if isinstance(e, Mul):
        parts = []
        for f in e.factors:
            inner, p = _print(f)
            if p < _PREC_MUL:
                inner = f"({inner})"
            parts.append(inner)
        return "*".join(parts), _PREC_MUL
    if isinstance(e, Div):
        ntext, np_ = _print(e.num)
        dtext, dp = _print(e.den)
        if np_ < _PREC_MUL:
            ntext = f"({ntext})"
        if dp <= _PREC_MUL:
            dtext = f"({dtext})"
        return f"{ntext}/{dtext}", _PREC_MUL
    if isinstance(e, Neg):
        inner, p = _print(e.arg)
        if p <= _PREC_ADD:
            inner = f"({inner})"
        return f"-{inner}", _PREC_NEG
    if isinstance(e, Pow):
        btext, bp = _print(e.base)
        if bp < _PREC_ATOM:
            btext = f"({btext})"
        q = e.exponent
        if q.denominator == 1 and q >= 0:
            return f"{btext}^{q.numerator}", _PREC_POW
        if q.denominator == 1:
            return f"{btext}^(-{-q.numerator})", _PREC_POW
        sign = "-" if q < 0 else ""
        return (f"{btext}^({sign}{abs(q.numerator)}/{q.denominator})",
                _PREC_POW)
    if isinstance(e, Func):
        return f"{e.kind}({_print(e.arg)[0]})", _PREC_ATOM
    raise TypeError(f"unknown node {e!r}")


def to_string(e: Expr) -> str:
    text, prec = _print(e)
    return text


# ---------------------------------------------------------------------------
# canonical polynomial form
#
# An expression is flattened to a sum of monomials: {monomial: Fraction}.
# A monomial is a sorted tuple of (base key, exponent) pairs.  Base kinds:
#   "sym"    a symbol
#   "func"   exp/log/sin/cos applied to a canonical argument
#   "cpow"   a prime integer raised to a fractional exponent in (0, 1)
#   "sumpow" a canonical multi-term sum with negative-integer or fractional
#            exponent (positive integer powers of sums are expanded)

@dataclass(frozen=True)
class _SymBase:
    name: str


@dataclass(frozen=True)
class _FuncBase:
    kind: str
    arg: Expr  # canonical


@dataclass(frozen=True)
class _CpowBase:
    prime: int


@dataclass(frozen=True)
class _SumBase:
    expr: Expr  # canonical


class _Canon:
    def __init__(self):
        self.bases: dict = {}

    def key_for(self, base) -> str:
        if isinstance(base, _SymBase):
            key = base.name
        elif isinstance(base, _FuncBase):
            key = f"{base.kind}({to_string(base.arg)})"
        elif isinstance(base, _CpowBase):
            key = f"#{base.prime}"
        else:
            key = f"({to_string(base.expr)})"
        self.bases[key] = base
        return key


def _prime_factors(n: int) -> dict:
    out = {}
    d = 2
    while d * d <= n:
        while n % d == 0:
            out[d] = out.get(d, 0) + 1
            n //= d
        d += 1 if d == 2 else 2
    if n > 1:
        out[n] = out.get(n, 0) + 1
    return out


def _poly_const(c: Fraction) -> dict:
    return {(): c} if c != 0 else {}


def _poly_add(a: dict, b: dict) -> dict:
    out = dict(a)
    for m, c in b.items():
        s = out.get(m, Fraction(0)) + c
        if s == 0:
            out.pop(m, None)
        else:
            out[m] = s
    return out


def _poly_scale(a: dict, c: Fraction) -> dict:
    if c == 0:
        return {}
    return {m: v * c for m, v in a.items()}


def _normalize_factors(factors: dict, coeff: Fraction, st: _Canon) -> dict:
    """Turn a raw factor->exponent map into a canonical polynomial,
    folding constant powers and expanding positive integer sum powers."""
    clean = {}
    expansions = []
    for key, q in factors.items():
        if q == 0:
            continue
        base = st.bases[key]
        if isinstance(base, _CpowBase):
            n, f = divmod(q, 1)
            coeff *= Fraction(base.prime) ** int(n)
            if f != 0:
                clean[key] = clean.get(key, Fraction(0)) + f
        elif isinstance(base, _SumBase):
            if q.denominator == 1 and q > 0:
                expansions.append((key, int(q)))
            else:
                clean[key] = q
        else:
            clean[key] = q
    clean = {k: v for k, v in clean.items() if v != 0}
    mono = tuple(sorted(clean.items()))
    out = {mono: coeff} if coeff != 0 else {}
    for key, n in expansions:
        base_poly = _canon(st.bases[key].expr, st)
        for _ in range(n):
            out = _poly_mul(out, base_poly, st)
    return out


def _poly_mul(a: dict, b: dict, st: _Canon) -> dict:
    out = {}
    for m1, c1 in a.items():
        for m2, c2 in b.items():
            factors = dict(m1)
            for k, q in m2:
                factors[k] = factors.get(k, Fraction(0)) + q
            piece = _normalize_factors(factors, c1 * c2, st)
            out = _poly_add(out, piece)
    return out


def _mono_ordkey(m: tuple):
    return (sum(q for _, q in m), m)


def _sum_content(p: dict) -> tuple:
    """Split p = c * g * p0 where c is a rational content (sign fixed by the
    leading monomial), g a monomial of per-key minimum exponents, and p0 a
    primitive canonical sum."""
    keys = set()
    for m in p:
        keys.update(k for k, _ in m)
    gmin = {}
    for k in keys:
        exps = [dict(m).get(k, Fraction(0)) for m in p]
        gmin[k] = min(exps)
    g = tuple(sorted((k, q) for k, q in gmin.items() if q != 0))
    coeffs = list(p.values())
    num_gcd = math.gcd(*(abs(c.numerator) for c in coeffs))
    den_lcm = math.lcm(*(c.denominator for c in coeffs))
    content = Fraction(num_gcd, den_lcm)
    lead = max(p, key=_mono_ordkey)
    if p[lead] < 0:
        content = -content
    p0 = {}
    for m, c in p.items():
        fac = dict(m)
        for k, q in g:
            fac[k] = fac.get(k, Fraction(0)) - q
        mono = tuple(sorted((k, q) for k, q in fac.items() if q != 0))
        p0[mono] = c / content
    return content, g, p0


def _poly_pow(p: dict, q: Fraction, st: _Canon) -> dict:
    if not p:
        if q <= 0:
            raise EvalDomainError("zero raised to a non-positive power", ZERO)
        return {}
    if q == 0:
        return _poly_const(Fraction(1))
    if q.denominator == 1 and q > 0:
        n = q.numerator
        out = _poly_const(Fraction(1))
        base = p
        while n:
            if n & 1:
                out = _poly_mul(out, base, st)
            n >>= 1
            if n:
                base = _poly_mul(base, base, st)
        return out
    if len(p) == 1:
        (mono, coeff), = p.items()
        factors = {k: e * q for k, e in mono}
        out_coeff = Fraction(1)
        if q.denominator == 1:
            out_coeff = coeff ** q.numerator if q > 0 \
                else 1 / (coeff ** (-q.numerator))
        else:
            if coeff < 0:
                raise EvalDomainError(
                    "fractional power of a negative constant",
                    Constant(coeff))
            for prime, n in _prime_factors(coeff.numerator).items():
                k = st.key_for(_CpowBase(prime))
                factors[k] = factors.get(k, Fraction(0)) + n * q
            for prime, n in _prime_factors(coeff.denominator).items():
                k = st.key_for(_CpowBase(prime))
                factors[k] = factors.get(k, Fraction(0)) - n * q
        return _normalize_factors(factors, out_coeff, st)
    # multi-term base with negative-integer or fractional exponent
    content, g, p0 = _sum_content(p)
    # the min-exponent shift can expose positive integer sum powers inside
    # the residual polynomial; expand them so the base is in normal form
    expanded = {}
    for m, c in p0.items():
        expanded = _poly_add(expanded, _normalize_factors(dict(m), c, st))
    if expanded != p0:
        c2, g2, p0 = _sum_content(expanded)
        content *= c2
        gd = dict(g)
        for k, qq in g2:
            gd[k] = gd.get(k, Fraction(0)) + qq
        g = tuple(sorted((k, v) for k, v in gd.items() if v != 0))
    base_expr = _poly_to_expr(p0, st)
    key = st.key_for(_SumBase(base_expr))
    factors = {key: q}
    for k, e in g:
        factors[k] = factors.get(k, Fraction(0)) + e * q
    inner = _poly_pow(_poly_const(content), q, st)
    return _poly_mul(inner, _normalize_factors(factors, Fraction(1), st), st)


def _canon(e: Expr, st: _Canon) -> dict:
    if isinstance(e, Constant):
        return _poly_const(Fraction(e.value))
    if isinstance(e, Symbol):
        key = st.key_for(_SymBase(e.name))
        return {((key, Fraction(1)),): Fraction(1)}
    if isinstance(e, Add):
        out = {}
        for t in e.terms:
            out = _poly_add(out, _canon(t, st))
        return out
    if isinstance(e, Mul):
        out = _poly_const(Fraction(1))
        for f in e.factors:
            out = _poly_mul(out, _canon(f, st), st)
        return out
    if isinstance(e, Neg):
        return _poly_scale(_canon(e.arg, st), Fraction(-1))
    if isinstance(e, Div):
        num = _canon(e.num, st)
        den = _canon(e.den, st)
        return _poly_mul(num, _poly_pow(den, Fraction(-1), st), st)
    if isinstance(e, Pow):
        return _poly_pow(_canon(e.base, st), e.exponent, st)
    if isinstance(e, Func):
        argp = _canon(e.arg, st)
        if e.kind == "sqrt":
            return _poly_pow(argp, Fraction(1, 2), st)
        arg_expr = _poly_to_expr(argp, st)
        if arg_expr == ZERO:
            if e.kind == "exp":
                return _poly_const(Fraction(1))
            if e.kind == "sin":
                return {}
            if e.kind == "cos":
                return _poly_const(Fraction(1))
            if e.kind == "log":
                raise EvalDomainError("log of zero", e)
        if e.kind == "log" and arg_expr == ONE:
            return {}
        key = st.key_for(_FuncBase(e.kind, arg_expr))
        return {((key, Fraction(1)),): Fraction(1)}
    raise TypeError(f"unknown node {e!r}")


def _base_to_expr(base, exponent: Fraction, st: _Canon) -> Expr:
    if isinstance(base, _SymBase):
        b = Symbol(base.name)
    elif isinstance(base, _FuncBase):
        b = Func(base.kind, base.arg)
    elif isinstance(base, _CpowBase):
        b = Constant(Fraction(base.prime))
    else:
        b = base.expr
    if exponent == 1:
        return b
    return Pow(b, exponent)


def _poly_to_expr(p: dict, st: _Canon) -> Expr:
    if not p:
        return ZERO
    terms = []
    for mono in sorted(p, key=_mono_ordkey, reverse=True):
        coeff = p[mono]
        factors = [_base_to_expr(st.bases[k], q, st) for k, q in mono]
        negate = coeff < 0
        coeff = abs(coeff)
        if not factors:
            term = Constant(coeff)
        elif coeff == 1:
            term = factors[0] if len(factors) == 1 else Mul(tuple(factors))
        else:
            term = Mul((Constant(coeff), *factors))
        terms.append(Neg(term) if negate else term)
    if len(terms) == 1:
        return terms[0]
    return Add(tuple(terms))


# ---------------------------------------------------------------------------
# fraction reduction (cosmetic cancellation of sum denominators)

def _try_divide(n_poly: dict, b_poly: dict):
    """Exact multivariate division n/b over factor keys; None on failure."""
    if not n_poly:
        return {}
    cn, gn, n0 = _sum_content(n_poly)
    cb, gb, b0 = _sum_content(b_poly)
    keys = set()
    for m in list(n0) + list(b0):
        keys.update(k for k, _ in m)
    keys = sorted(keys)
    scale = {k: 1 for k in keys}
    for m in list(n0) + list(b0):
        for k, q in m:
            scale[k] = math.lcm(scale[k], q.denominator)

    def vec(m):
        d = dict(m)
        return tuple(int(d.get(k, Fraction(0)) * scale[k]) for k in keys)

    def ordkey(v):
        return (sum(v), v)

    nn = {vec(m): c for m, c in n0.items()}
    bb = {vec(m): c for m, c in b0.items()}
    if any(min(v) < 0 for v in list(nn) + list(bb) if v):
        return None
    blead = max(bb, key=ordkey)
    quot = {}
    steps = 0
    while nn:
        steps += 1
        if steps > 2000:
            return None
        nlead = max(nn, key=ordkey)
        diff = tuple(a - b for a, b in zip(nlead, blead))
        if any(d < 0 for d in diff):
            return None
        qc = nn[nlead] / bb[blead]
        quot[diff] = quot.get(diff, Fraction(0)) + qc
        for v, c in bb.items():
            prod = tuple(a + b for a, b in zip(diff, v))
            s = nn.get(prod, Fraction(0)) - qc * c
            if s == 0:
                nn.pop(prod, None)
            else:
                nn[prod] = s
    out = {}
    gdiff = {}
    for k, q in gn:
        gdiff[k] = gdiff.get(k, Fraction(0)) + q
    for k, q in gb:
        gdiff[k] = gdiff.get(k, Fraction(0)) - q
    for v, c in quot.items():
        fac = dict(gdiff)
        for k, n in zip(keys, v):
            if n:
                fac[k] = fac.get(k, Fraction(0)) + Fraction(n, scale[k])
        mono = tuple(sorted((k, q) for k, q in fac.items() if q != 0))
        out[mono] = out.get(mono, Fraction(0)) + c * cn / cb
    return out


def _reduce_fractions(p: dict, st: _Canon) -> dict:
    sum_keys = sorted({k for m in p for k, q in m
                       if isinstance(st.bases.get(k), _SumBase) and q < 0})
    for key in sum_keys:
        base_poly = _canon(st.bases[key].expr, st)
        classes: dict = {}
        for m, c in p.items():
            e = dict(m).get(key, Fraction(0))
            f = e - math.floor(e) if e.denominator != 1 else Fraction(0)
            k_int = f - e
            rest = tuple(sorted((kk, qq) for kk, qq in m if kk != key))
            classes.setdefault(f, []).append((k_int, rest, c))
        newp = {}
        for f, items in classes.items():
            k_max = max(k for k, _, _ in items)
            if k_max <= 0:
                for k, rest, c in items:
                    e = f - k
                    fac = dict(rest)
                    if e != 0:
                        fac[key] = e
                    newp = _poly_add(newp, _normalize_factors(fac, c, st))
                continue
            numer = {}
            for k, rest, c in items:
                piece = {rest: c}
                extra = int(k_max - k)
                for _ in range(extra):
                    piece = _poly_mul(piece, base_poly, st)
                numer = _poly_add(numer, piece)
            while k_max > 0:
                q = _try_divide(numer, base_poly)
                if q is None:
                    break
                numer = q
                k_max -= 1
            shift = f - k_max
            for m, c in numer.items():
                fac = dict(m)
                if shift != 0:
                    fac[key] = fac.get(key, Fraction(0)) + shift
                newp = _poly_add(newp, _normalize_factors(fac, c, st))
        p = newp
    return p


def simplify(e: Expr) -> Expr:
    """Canonical normal form: expand, collect like monomials, cancel.

    A projection: simplify(simplify(e)) is structurally simplify(e).
    """
    st = _Canon()
    p = _canon(e, st)
    p = _reduce_fractions(p, st)
    return _poly_to_expr(p, st)


# ---------------------------------------------------------------------------
# zero decision

@dataclass(frozen=True)
class ZeroVerdict:
    is_zero: bool
    method: str  # "symbolic" or "numeric"

    def __bool__(self):
        return self.is_zero


def _clear_denominators(p: dict, st: _Canon) -> dict:
    for _ in range(16):
        mins = {}
        for m in p:
            for k, q in m:
                base = st.bases[k]
                if isinstance(base, (_SumBase, _SymBase)) \
                        and q.denominator == 1 and q < 0:
                    mins[k] = min(mins.get(k, Fraction(0)), q)
        if not mins:
            return p
        # shift exponents monomial-wise so inverse factors cancel exactly;
        # _normalize_factors then expands any resulting positive sum powers
        newp = {}
        for m, c in p.items():
            fac = dict(m)
            for k, q in mins.items():
                fac[k] = fac.get(k, Fraction(0)) - q
            newp = _poly_add(newp, _normalize_factors(fac, c, st))
        p = newp
    return p


def _exact_zero(e: Expr) -> bool | None:
    """True/False when decidable symbolically, None when inconclusive."""
    st = _Canon()
    p = _canon(e, st)
    if not p:
        return True
    p = _clear_denominators(p, st)
    if not p:
        return True
    for m in p:
        for k, q in m:
            base = st.bases[k]
            if isinstance(base, _FuncBase):
                return None
            if isinstance(base, _SumBase) and q.denominator != 1:
                return None
            if q.denominator != 1 and not isinstance(base, _CpowBase):
                return None
    # a nonzero sum of distinct rational/radical monomials cannot vanish
    return False


def is_zero_sampled(e: Expr, free: Iterable[str], n: int = 40,
                    seed: int = 0) -> bool:
    """Sampled zero test at n pseudo-random points per symbol drawn from
    [-2,-0.1] U [0.1,2]; deterministic given the seed."""
    if n < 20:
        raise ValueError("n must be at least 20")
    free = list(free)
    e = simplify(e)
    terms = list(e.terms) if isinstance(e, Add) else [e]
    rng = np.random.default_rng(seed)
    usable = 0
    for _ in range(n):
        mags = rng.uniform(0.1, 2.0, size=len(free))
        signs = rng.choice([-1.0, 1.0], size=len(free))
        binding = {name: float(m * s)
                   for name, m, s in zip(free, mags, signs)}
        try:
            vals = [eval_expr(t, binding) for t in terms]
        except EvalDomainError:
            continue
        if any(not math.isfinite(v) for v in vals):
            continue
        usable += 1
        total = sum(vals)
        scale = max((abs(v) for v in vals), default=0.0)
        if abs(total) > 1e-9 * (1.0 + scale):
            return False
    if usable == 0:
        raise AllSamplesFailed(
            f"all {n} sample points hit domain errors for "
            f"'{to_string(e)}'")
    return True


def zero_verdict(e: Expr, free: Iterable[str] | None = None, n: int = 40,
                 seed: int = 0) -> ZeroVerdict:
    """Symbolic-first zero test with sampled fallback."""
    exact = _exact_zero(e)
    if exact is not None:
        return ZeroVerdict(exact, "symbolic")
    if free is None:
        free = sorted(free_symbols(e))
    return ZeroVerdict(is_zero_sampled(e, free, n=n, seed=seed), "numeric")


# ---------------------------------------------------------------------------
# differentiation / substitution / evaluation

def differentiate(e: Expr, v: str, ctx: VarContext | None = None) -> Expr:
    """Exact partial derivative with respect to the symbol named v.

    Distinct symbols are independent.  When ctx declares opaque functions of
    the independent variable and v is that variable, f differentiates to f',
    f' to f'' and so on.
    """
    d = _diff(e, v, ctx)
    return normalize(d)


def _diff(e: Expr, v: str, ctx: VarContext | None) -> Expr:
    if isinstance(e, Constant):
        return ZERO
    if isinstance(e, Symbol):
        if e.name == v:
            return ONE
        if ctx is not None and v == ctx.independent:
            der = ctx.function_derivative(e.name)
            if der is not None:
                return Symbol(der)
        return ZERO
    if isinstance(e, Add):
        return Add(tuple(_diff(t, v, ctx) for t in e.terms))
    if isinstance(e, Mul):
        terms = []
        for i in range(len(e.factors)):
            parts = list(e.factors)
            parts[i] = _diff(parts[i], v, ctx)
            terms.append(Mul(tuple(parts)))
        return Add(tuple(terms))
    if isinstance(e, Neg):
        return Neg(_diff(e.arg, v, ctx))
    if isinstance(e, Div):
        da, db = _diff(e.num, v, ctx), _diff(e.den, v, ctx)
        return Div(Add((Mul((da, e.den)), Neg(Mul((e.num, db))))),
                   Pow(e.den, Fraction(2)))
    if isinstance(e, Pow):
        db = _diff(e.base, v, ctx)
        return Mul((Constant(e.exponent), Pow(e.base, e.exponent - 1), db))
    if isinstance(e, Func):
        da = _diff(e.arg, v, ctx)
        if e.kind == "exp":
            return Mul((e, da))
        if e.kind == "log":
            return Div(da, e.arg)
        if e.kind == "sin":
            return Mul((Func("cos", e.arg), da))
        if e.kind == "cos":
            return Neg(Mul((Func("sin", e.arg), da)))
        if e.kind == "sqrt":
            return Div(da, Mul((Constant(Fraction(2)), e)))
    raise TypeError(f"unknown node {e!r}")


def substitute(e: Expr, bindings: Mapping[str, Expr]) -> Expr:
    """Replace symbols by expressions (capture-free, single pass)."""
    if isinstance(e, Constant):
        return e
    if isinstance(e, Symbol):
        return bindings.get(e.name, e)
    if isinstance(e, Add):
        return Add(tuple(substitute(t, bindings) for t in e.terms))
    if isinstance(e, Mul):
        return Mul(tuple(substitute(f, bindings) for f in e.factors))
    if isinstance(e, Neg):
        return Neg(substitute(e.arg, bindings))
    if isinstance(e, Div):
        return Div(substitute(e.num, bindings), substitute(e.den, bindings))
    if isinstance(e, Pow):
        return Pow(substitute(e.base, bindings), e.exponent)
    if isinstance(e, Func):
        return Func(e.kind, substitute(e.arg, bindings))
    raise TypeError(f"unknown node {e!r}")


def rewrite_subterms(e: Expr, rules: Mapping[Expr, Expr]) -> Expr:
    """Rewrite canonical factor bases (symbols, function applications or sum
    powers) by replacement expressions, e.g. {exp(y): sqrt(Y^2+Z^2)}.

    Matching is up to canonical form; rules are applied once, outermost
    factors first, then inside function arguments.
    """
    table = {to_string(simplify(k)): v for k, v in rules.items()}
    st = _Canon()
    p = _canon(simplify(e), st)
    out = {}
    for mono, coeff in p.items():
        piece = _poly_const(coeff)
        for key, q in mono:
            base = st.bases[key]
            if key in table:
                rep = _canon(table[key], st)
            elif isinstance(base, _FuncBase):
                new_arg = rewrite_subterms(base.arg, rules)
                rep = _canon(Func(base.kind, new_arg), st)
            elif isinstance(base, _SumBase):
                rep = _canon(rewrite_subterms(base.expr, rules), st)
            else:
                rep = {((key, Fraction(1)),): Fraction(1)}
            piece = _poly_mul(piece, _poly_pow(rep, q, st), st)
        out = _poly_add(out, piece)
    out = _reduce_fractions(out, st)
    return _poly_to_expr(out, st)


def eval_expr(e: Expr, bindings: Mapping[str, float]) -> float:
    """IEEE double evaluation; domain errors report the offending subterm."""
    if isinstance(e, Constant):
        return float(e.value)
    if isinstance(e, Symbol):
        if e.name not in bindings:
            raise UnboundSymbol(f"symbol {e.name!r} is not bound")
        return float(bindings[e.name])
    if isinstance(e, Add):
        return sum(eval_expr(t, bindings) for t in e.terms)
    if isinstance(e, Mul):
        out = 1.0
        for f in e.factors:
            out *= eval_expr(f, bindings)
        return out
    if isinstance(e, Neg):
        return -eval_expr(e.arg, bindings)
    if isinstance(e, Div):
        den = eval_expr(e.den, bindings)
        if den == 0.0:
            raise EvalDomainError("division by zero", e)
        return eval_expr(e.num, bindings) / den
    if isinstance(e, Pow):
        base = eval_expr(e.base, bindings)
        q = e.exponent
        if base == 0.0 and q < 0:
            raise EvalDomainError("division by zero", e)
        if base < 0.0 and q.denominator != 1:
            raise EvalDomainError("fractional power of negative base", e)
        try:
            return base ** float(q)
        except (OverflowError, ZeroDivisionError):
            raise EvalDomainError("power overflow", e)
    if isinstance(e, Func):
        a = eval_expr(e.arg, bindings)
        if e.kind == "exp":
            try:
                return math.exp(a)
            except OverflowError:
                return math.inf
        if e.kind == "log":
            if a <= 0.0:
                raise EvalDomainError("log of non-positive value", e)
            return math.log(a)
        if e.kind == "sin":
            return math.sin(a)
        if e.kind == "cos":
            return math.cos(a)
        if e.kind == "sqrt":
            if a < 0.0:
                raise EvalDomainError("sqrt of negative value", e)
            return math.sqrt(a)
    raise TypeError(f"unknown node {e!r}")


def free_symbols(e: Expr) -> set:
    if isinstance(e, Constant):
        return set()
    if isinstance(e, Symbol):
        return {e.name}
    if isinstance(e, Add):
        return set().union(*(free_symbols(t) for t in e.terms))
    if isinstance(e, Mul):
        return set().union(*(free_symbols(f) for f in e.factors))
    if isinstance(e, Neg):
        return free_symbols(e.arg)
    if isinstance(e, Div):
        return free_symbols(e.num) | free_symbols(e.den)
    if isinstance(e, Pow):
        return free_symbols(e.base)
    if isinstance(e, Func):
        return free_symbols(e.arg)
    raise TypeError(f"unknown node {e!r}")


# ---------------------------------------------------------------------------
# coefficient collection

def coefficients_in(e: Expr, vars: Iterable[str]) -> dict:
    """Coefficients of e as a polynomial in the given symbols.

    Returns {exponent tuple: coefficient Expr}, exponents ordered like vars.
    Raises NotPolynomial if any var occurs inside a function argument, a sum
    denominator, or with a negative/fractional exponent.
    """
    vars = list(vars)
    vset = set(vars)
    st = _Canon()
    p = _canon(simplify(e), st)
    p = _reduce_fractions(p, st)
    groups: dict = {}
    for mono, coeff in p.items():
        sig = [0] * len(vars)
        rest = {}
        for key, q in mono:
            base = st.bases[key]
            if isinstance(base, _SymBase) and base.name in vset:
                if q.denominator != 1 or q < 0:
                    raise NotPolynomial(
                        f"{base.name} occurs with exponent {q}")
                sig[vars.index(base.name)] = int(q)
                continue
            if isinstance(base, _FuncBase) and \
                    free_symbols(base.arg) & vset:
                raise NotPolynomial(
                    f"variable inside {base.kind}({to_string(base.arg)})")
            if isinstance(base, _SumBase) and free_symbols(base.expr) & vset:
                raise NotPolynomial(
                    f"variable inside ({to_string(base.expr)})^{q}")
            rest[key] = q
        sig = tuple(sig)
        piece = _normalize_factors(rest, coeff, st)
        groups[sig] = _poly_add(groups.get(sig, {}), piece)
    return {sig: _poly_to_expr(poly, st) for sig, poly in groups.items()
            if poly}


def poly_degree(e: Expr, vars: Iterable[str]) -> int:
    coeffs = coefficients_in(e, vars)
    if not coeffs:
        return 0
    return max(sum(sig) for sig in coeffs)


def collect(e: Expr, monomials: Iterable[Expr], vars: Iterable[str]):
    """Split e = sum coeff*monomial + remainder over the given monomials.

    Coefficients are free of vars; monomials of e that are not in the list
    end up in the remainder.
    """
    vars = list(vars)
    groups = coefficients_in(e, vars)
    out = {}
    seen = set()
    for mono in monomials:
        mc = coefficients_in(simplify(mono), vars)
        if len(mc) != 1:
            raise ValueError(f"not a monomial: {to_string(mono)}")
        (sig, lead), = mc.items()
        if lead != ONE:
            raise ValueError(f"monomial must be monic: {to_string(mono)}")
        out[mono] = groups.get(sig, ZERO)
        seen.add(sig)
    rem_terms = []
    for sig, coeff in groups.items():
        if sig in seen:
            continue
        factors = [Pow(Symbol(v), Fraction(n)) if n != 1 else Symbol(v)
                   for v, n in zip(vars, sig) if n != 0]
        rem_terms.append(mul(coeff, *factors) if factors else coeff)
    remainder = simplify(add(*rem_terms)) if rem_terms else ZERO
    return out, remainder
