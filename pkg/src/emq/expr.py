"""Symbolic expression core and text front end.

Expressions are immutable trees over exact rational constants, named symbols,
n-ary sums and products, integer/rational powers, quotients and a small set of
functions (sin, cos, sqrt, atan2).  The text grammar is

    expr   := term (('+' | '-') term)*
    term   := factor (('*' | '/') factor)*
    factor := atom ('^' integer)?
    atom   := number | identifier | fun '(' expr (',' expr)* ')'
            | '(' expr ')' | '-' atom

Decimal literals are converted to exact fractions; floats only appear if a
caller constructs them directly.  normalize() flattens sums/products, merges
constants and collects identical terms/factors, and is idempotent.  There is
deliberately no trig or polynomial canonicalizer: semantic equality is decided
by sampled numeric comparison (numeric_equal), structural equality by ==.

Evaluation never returns NaN/inf silently; division by zero, even roots of
negative values and unbound symbols raise distinct exceptions so that chart
violations surface as errors instead of poisoning downstream numerics.
"""

from __future__ import annotations

import math
import random
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable, Mapping, Optional, Sequence, Union

__all__ = [
    "Expr", "Const", "Sym", "Add", "Mul", "Pow", "Div", "Fun",
    "ExprError", "ParseError", "UnknownIdentifierError", "EvalError",
    "UnboundSymbolError", "DivisionByZeroError", "NegativeSqrtError",
    "DomainError",
    "SymbolTable", "SampleDomain",
    "parse", "normalize", "expand", "differentiate", "substitute", "evaluate",
    "numeric_equal", "numeric_compare", "ComparisonResult",
    "ZERO", "ONE",
]

FUNCTIONS = {"sin": 1, "cos": 1, "sqrt": 1, "atan2": 2}

Rational = Union[int, Fraction]
Number = Union[int, float, Fraction]


class ExprError(Exception):
    """Base class for expression-layer failures."""


class ParseError(ExprError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte {offset})")
        self.offset = offset


class UnknownIdentifierError(ParseError):
    pass


class EvalError(ExprError):
    pass


class UnboundSymbolError(EvalError):
    pass


class DivisionByZeroError(EvalError):
    pass


class NegativeSqrtError(EvalError):
    pass


class DomainError(ExprError):
    """Sampling domain is malformed or overlaps a singular set."""


# ---------------------------------------------------------------------------
# expression nodes
# ---------------------------------------------------------------------------

class Expr:
    __slots__ = ()

    def __add__(self, other):
        return Add((self, _coerce(other)))

    def __radd__(self, other):
        return Add((_coerce(other), self))

    def __sub__(self, other):
        return Add((self, Mul((Const(-1), _coerce(other)))))

    def __rsub__(self, other):
        return Add((_coerce(other), Mul((Const(-1), self))))

    def __mul__(self, other):
        return Mul((self, _coerce(other)))

    def __rmul__(self, other):
        return Mul((_coerce(other), self))

    def __truediv__(self, other):
        return Div(self, _coerce(other))

    def __rtruediv__(self, other):
        return Div(_coerce(other), self)

    def __pow__(self, exponent):
        return Pow(self, exponent)

    def __neg__(self):
        return Mul((Const(-1), self))

    def __str__(self):
        return _render(self, 0)

    def __repr__(self):
        return f"<{type(self).__name__} {self}>"

    def free_symbols(self) -> frozenset:
        out = set()
        _collect_symbols(self, out)
        return frozenset(out)

    def normalized(self) -> "Expr":
        return normalize(self)

    def diff(self, sym) -> "Expr":
        return differentiate(self, sym)

    def subs(self, mapping) -> "Expr":
        return substitute(self, mapping)


def _coerce(value) -> Expr:
    if isinstance(value, Expr):
        return value
    if isinstance(value, (int, Fraction)):
        return Const(Fraction(value))
    if isinstance(value, float):
        return Const(value)
    raise TypeError(f"cannot build an expression from {value!r}")


class Const(Expr):
    __slots__ = ("value",)

    def __init__(self, value: Number):
        if isinstance(value, bool):
            raise TypeError("boolean is not a constant")
        if isinstance(value, int):
            value = Fraction(value)
        elif not isinstance(value, (Fraction, float)):
            raise TypeError(f"bad constant {value!r}")
        object.__setattr__(self, "value", value)

    def __setattr__(self, *a):
        raise AttributeError("Expr nodes are immutable")

    def __eq__(self, other):
        return (isinstance(other, Const) and type(self.value) is type(other.value)
                and self.value == other.value)

    def __hash__(self):
        return hash(("Const", type(self.value).__name__, self.value))

    @property
    def is_exact(self) -> bool:
        return isinstance(self.value, Fraction)


class Sym(Expr):
    __slots__ = ("name",)

    def __init__(self, name: str):
        if not _IDENT_RE.fullmatch(name):
            raise ValueError(f"bad symbol name {name!r}")
        if name in FUNCTIONS:
            raise ValueError(f"{name!r} is a reserved function name")
        object.__setattr__(self, "name", name)

    def __setattr__(self, *a):
        raise AttributeError("Expr nodes are immutable")

    def __eq__(self, other):
        return isinstance(other, Sym) and self.name == other.name

    def __hash__(self):
        return hash(("Sym", self.name))


class Add(Expr):
    __slots__ = ("terms",)

    def __init__(self, terms: Iterable[Expr]):
        terms = tuple(terms)
        if len(terms) < 2:
            raise ValueError("Add needs at least two terms")
        object.__setattr__(self, "terms", terms)

    def __setattr__(self, *a):
        raise AttributeError("Expr nodes are immutable")

    def __eq__(self, other):
        return isinstance(other, Add) and self.terms == other.terms

    def __hash__(self):
        return hash(("Add", self.terms))


class Mul(Expr):
    __slots__ = ("factors",)

    def __init__(self, factors: Iterable[Expr]):
        factors = tuple(factors)
        if len(factors) < 2:
            raise ValueError("Mul needs at least two factors")
        object.__setattr__(self, "factors", factors)

    def __setattr__(self, *a):
        raise AttributeError("Expr nodes are immutable")

    def __eq__(self, other):
        return isinstance(other, Mul) and self.factors == other.factors

    def __hash__(self):
        return hash(("Mul", self.factors))


class Pow(Expr):
    __slots__ = ("base", "exponent")

    def __init__(self, base: Expr, exponent: Rational):
        if isinstance(exponent, Fraction) and exponent.denominator == 1:
            exponent = int(exponent)
        if not isinstance(exponent, (int, Fraction)):
            raise TypeError("exponent must be an integer or Fraction")
        object.__setattr__(self, "base", base)
        object.__setattr__(self, "exponent", exponent)

    def __setattr__(self, *a):
        raise AttributeError("Expr nodes are immutable")

    def __eq__(self, other):
        return (isinstance(other, Pow) and self.base == other.base
                and self.exponent == other.exponent)

    def __hash__(self):
        return hash(("Pow", self.base, self.exponent))


class Div(Expr):
    __slots__ = ("num", "den")

    def __init__(self, num: Expr, den: Expr):
        object.__setattr__(self, "num", num)
        object.__setattr__(self, "den", den)

    def __setattr__(self, *a):
        raise AttributeError("Expr nodes are immutable")

    def __eq__(self, other):
        return isinstance(other, Div) and self.num == other.num and self.den == other.den

    def __hash__(self):
        return hash(("Div", self.num, self.den))


class Fun(Expr):
    __slots__ = ("name", "args")

    def __init__(self, name: str, args: Iterable[Expr]):
        args = tuple(args)
        if name not in FUNCTIONS:
            raise ValueError(f"unknown function {name!r}")
        if len(args) != FUNCTIONS[name]:
            raise ValueError(f"{name} expects {FUNCTIONS[name]} argument(s)")
        object.__setattr__(self, "name", name)
        object.__setattr__(self, "args", args)

    def __setattr__(self, *a):
        raise AttributeError("Expr nodes are immutable")

    def __eq__(self, other):
        return isinstance(other, Fun) and self.name == other.name and self.args == other.args

    def __hash__(self):
        return hash(("Fun", self.name, self.args))


ZERO = Const(0)
ONE = Const(1)


def _collect_symbols(e: Expr, out: set) -> None:
    if isinstance(e, Sym):
        out.add(e.name)
    elif isinstance(e, Add):
        for t in e.terms:
            _collect_symbols(t, out)
    elif isinstance(e, Mul):
        for f in e.factors:
            _collect_symbols(f, out)
    elif isinstance(e, Pow):
        _collect_symbols(e.base, out)
    elif isinstance(e, Div):
        _collect_symbols(e.num, out)
        _collect_symbols(e.den, out)
    elif isinstance(e, Fun):
        for a in e.args:
            _collect_symbols(a, out)


# ---------------------------------------------------------------------------
# canonical ordering
# ---------------------------------------------------------------------------

def sort_key(e: Expr):
    """Total order on expressions; used for deterministic argument ordering."""
    if isinstance(e, Const):
        return (0, float(e.value), str(e.value))
    if isinstance(e, Sym):
        return (1, e.name)
    if isinstance(e, Fun):
        return (2, e.name, tuple(sort_key(a) for a in e.args))
    if isinstance(e, Pow):
        return (3, sort_key(e.base), float(e.exponent), str(e.exponent))
    if isinstance(e, Div):
        return (4, sort_key(e.num), sort_key(e.den))
    if isinstance(e, Mul):
        return (5, tuple(sort_key(f) for f in e.factors))
    if isinstance(e, Add):
        return (6, tuple(sort_key(t) for t in e.terms))
    raise TypeError(f"not an Expr: {e!r}")


# ---------------------------------------------------------------------------
# normalization
# ---------------------------------------------------------------------------

def _is_zero(e: Expr) -> bool:
    return isinstance(e, Const) and e.value == 0


def _is_one(e: Expr) -> bool:
    return isinstance(e, Const) and e.value == 1


def _const_mul(a: Number, b: Number) -> Number:
    if isinstance(a, Fraction) and isinstance(b, Fraction):
        return a * b
    return float(a) * float(b)


def _const_add(a: Number, b: Number) -> Number:
    if isinstance(a, Fraction) and isinstance(b, Fraction):
        return a + b
    return float(a) + float(b)


def _split_coefficient(term: Expr):
    """term -> (constant coefficient, tuple of non-constant factors)."""
    if isinstance(term, Const):
        return term.value, ()
    if isinstance(term, Mul):
        coeff: Number = Fraction(1)
        rest = []
        for f in term.factors:
            if isinstance(f, Const):
                coeff = _const_mul(coeff, f.value)
            else:
                rest.append(f)
        return coeff, tuple(rest)
    return Fraction(1), (term,)


def _rebuild_product(coeff: Number, factors: Sequence[Expr]) -> Expr:
    if coeff == 0:
        return Const(coeff if isinstance(coeff, Fraction) else 0.0)
    parts = list(factors)
    if not parts:
        return Const(coeff)
    if coeff != 1 or (isinstance(coeff, float)):
        parts = [Const(coeff)] + parts
    if len(parts) == 1:
        return parts[0]
    return Mul(tuple(parts))


def _combine_fractions(flat):
    """Merge Div terms sharing a denominator; folds like a/c - b/c -> (a-b)/c."""
    groups = {}
    order = []
    for i, t in enumerate(flat):
        if isinstance(t, Div):
            key = sort_key(t.den)
            groups.setdefault(key, []).append(i)
    out = list(flat)
    drop = set()
    for key, idxs in groups.items():
        if len(idxs) < 2:
            continue
        den = out[idxs[0]].den
        num = _normalize_add([out[i].num for i in idxs])
        combined = normalize(Div(num, den))
        out[idxs[0]] = combined
        drop.update(idxs[1:])
    return [t for i, t in enumerate(out) if i not in drop]


def _normalize_add(terms) -> Expr:
    flat = []
    for t in terms:
        if isinstance(t, Add):
            flat.extend(t.terms)
        else:
            flat.append(t)
    if sum(1 for t in flat if isinstance(t, Div)) > 1:
        flat = _combine_fractions(flat)
        reflat = []
        for t in flat:
            if isinstance(t, Add):
                reflat.extend(t.terms)
            else:
                reflat.append(t)
        flat = reflat
    const_sum: Number = Fraction(0)
    by_key = {}
    for t in flat:
        coeff, rest = _split_coefficient(t)
        if not rest:
            const_sum = _const_add(const_sum, coeff)
            continue
        key = tuple(sort_key(f) for f in rest)
        if key in by_key:
            prev_coeff, _ = by_key[key]
            by_key[key] = (_const_add(prev_coeff, coeff), rest)
        else:
            by_key[key] = (coeff, rest)
    out = []
    pending = []
    for key in sorted(by_key):
        coeff, rest = by_key[key]
        if coeff == 0:
            continue
        if len(rest) == 1 and isinstance(rest[0], Add) and coeff != 1:
            # collection built a constant multiple of a sum; distribute and
            # remerge so the pieces can combine with sibling terms
            for sub in rest[0].terms:
                sc, sf = _split_coefficient(sub)
                pending.append(_normalize_mul(
                    [Const(_const_mul(coeff, sc))] + list(sf)))
        else:
            out.append(_rebuild_product(coeff, rest))
    if pending:
        extra = [Const(const_sum)] if const_sum != 0 else []
        return _normalize_add(out + pending + extra)
    if const_sum != 0 or not out:
        out.insert(0, Const(const_sum))
    if len(out) == 1:
        return out[0]
    return Add(tuple(out))


def _as_base_exp(f: Expr):
    if isinstance(f, Pow):
        return f.base, f.exponent
    return f, 1


def _div_split(f: Expr):
    """(numerator piece, denominator piece) when f carries a quotient."""
    if isinstance(f, Div):
        return f.num, f.den
    if isinstance(f, Pow) and isinstance(f.base, Div) and isinstance(f.exponent, int):
        if f.exponent > 0:
            return Pow(f.base.num, f.exponent), Pow(f.base.den, f.exponent)
        return Pow(f.base.den, -f.exponent), Pow(f.base.num, -f.exponent)
    return None


def _raw_product(factors) -> Expr:
    if not factors:
        return ONE
    if len(factors) == 1:
        return factors[0]
    return Mul(tuple(factors))


def _normalize_mul(factors) -> Expr:
    flat = []
    for f in factors:
        if isinstance(f, Mul):
            flat.extend(f.factors)
        else:
            flat.append(f)
    if any(_div_split(f) is not None for f in flat):
        nums, dens = [], []
        for f in flat:
            piece = _div_split(f)
            if piece is None:
                nums.append(f)
            else:
                nums.append(piece[0])
                dens.append(piece[1])
        return normalize(Div(_raw_product(nums), _raw_product(dens)))
    coeff: Number = Fraction(1)
    by_key = {}
    for f in flat:
        if isinstance(f, Const):
            coeff = _const_mul(coeff, f.value)
            continue
        base, exp = _as_base_exp(f)
        key = sort_key(base)
        if key in by_key:
            prev_base, prev_exp = by_key[key]
            by_key[key] = (prev_base, _add_exponents(prev_exp, exp))
        else:
            by_key[key] = (base, exp)
    if coeff == 0:
        return Const(coeff if isinstance(coeff, Fraction) else 0.0)
    out = []
    rerun = []
    for key in sorted(by_key):
        base, exp = by_key[key]
        piece = _normalize_pow(base, exp)
        if _is_one(piece):
            continue
        if isinstance(piece, Const):
            coeff = _const_mul(coeff, piece.value)
        elif isinstance(piece, Mul) or sort_key(_as_base_exp(piece)[0]) != key:
            # a power fold expanded or changed its base; remerge from scratch
            rerun.append(piece)
        else:
            out.append(piece)
    if rerun:
        return _normalize_mul([Const(coeff)] + out + rerun)
    # a merged constant can be 0 (e.g. sin(0) folded inside a product)
    if coeff == 0:
        return Const(coeff if isinstance(coeff, Fraction) else 0.0)
    if len(out) == 1 and isinstance(out[0], Add) and coeff != 1:
        # distribute plain constants over a lone sum so that -(a+b) can
        # cancel against a and b; genuine products of sums stay factored
        scaled = []
        for t in out[0].terms:
            tc, tf = _split_coefficient(t)
            scaled.append(_normalize_mul([Const(_const_mul(coeff, tc))] + list(tf)))
        return _normalize_add(scaled)
    return _rebuild_product(coeff, out)


def _add_exponents(a: Rational, b: Rational) -> Rational:
    total = Fraction(a) + Fraction(b)
    return int(total) if total.denominator == 1 else total


def _exact_rational_power(value: Fraction, exp: Fraction) -> Optional[Fraction]:
    """value**exp as an exact Fraction, or None when that is not exact."""
    if value == 0:
        return Fraction(0) if exp > 0 else None
    if value < 0:
        return None
    num, den = value.numerator, value.denominator
    p, q = exp.numerator, exp.denominator
    rn = _iroot(num, q)
    rd = _iroot(den, q)
    if rn is None or rd is None:
        return None
    return Fraction(rn, rd) ** p


def _iroot(n: int, q: int) -> Optional[int]:
    if n < 0:
        return None
    r = round(n ** (1.0 / q))
    for cand in (r - 1, r, r + 1):
        if cand >= 0 and cand ** q == n:
            return cand
    return None


def _rationalize(num: Expr, den: Expr) -> Optional[Expr]:
    """sqrt factors moved out of the denominator, or None for no change."""
    d_coeff, d_factors = _split_coefficient(den)
    moved = []
    new_den = []
    for f in d_factors:
        if isinstance(f, Fun) and f.name == "sqrt":
            moved.append(f)
            new_den.append(f.args[0])
        else:
            new_den.append(f)
    if not moved:
        return None
    return normalize(Div(_raw_product([num] + moved),
                         _raw_product([Const(d_coeff)] + new_den)))


def _cancel_quotient(num: Expr, den: Expr) -> Optional[Expr]:
    """Shared product factors of num/den cancelled, or None for no change.

    Product-level only (Add numerators are left alone); cancellation is the
    usual off-the-zero-set identification, which the sampling charts
    respect by construction.
    """
    if isinstance(num, Add) or isinstance(den, Add):
        return None
    n_coeff, n_factors = _split_coefficient(num)
    d_coeff, d_factors = _split_coefficient(den)
    d_map = {}
    for f in d_factors:
        base, exp = _as_base_exp(f)
        d_map[sort_key(base)] = [base, Fraction(exp)]
    changed = d_coeff != 1 or isinstance(d_coeff, float)
    new_num = []
    for f in n_factors:
        base, exp = _as_base_exp(f)
        key = sort_key(base)
        exp = Fraction(exp)
        if key in d_map and d_map[key][1] != 0:
            m = min(exp, d_map[key][1])
            exp -= m
            d_map[key][1] -= m
            changed = True
        if exp != 0:
            new_num.append(_normalize_pow(
                base, int(exp) if exp.denominator == 1 else exp))
    if not changed:
        return None
    if isinstance(n_coeff, Fraction) and isinstance(d_coeff, Fraction):
        coeff = n_coeff / d_coeff
    else:
        coeff = float(n_coeff) / float(d_coeff)
    num_expr = _normalize_mul([Const(coeff)] + new_num)
    den_parts = []
    for key in sorted(d_map):
        base, exp = d_map[key]
        if exp != 0:
            den_parts.append(_normalize_pow(
                base, int(exp) if exp.denominator == 1 else exp))
    if not den_parts:
        return num_expr
    return normalize(Div(num_expr, _raw_product(den_parts)))


def _normalize_pow(base: Expr, exp: Rational) -> Expr:
    if exp == 0:
        return ONE
    if exp == 1:
        return base
    # sqrt(u)^n collapses on the u >= 0 domain where sqrt is defined at all
    if isinstance(base, Fun) and base.name == "sqrt" and isinstance(exp, int):
        (u,) = base.args
        if exp % 2 == 0:
            return _normalize_pow(u, exp // 2)
        return _normalize_mul([_normalize_pow(u, (exp - 1) // 2), base])
    if isinstance(base, Const):
        v = base.value
        if isinstance(v, Fraction):
            if isinstance(exp, int):
                if v == 0 and exp < 0:
                    raise DivisionByZeroError("0 raised to a negative power")
                return Const(v ** exp)
            exact = _exact_rational_power(v, Fraction(exp))
            if exact is not None:
                return Const(exact)
        else:
            if isinstance(exp, int):
                if v == 0.0 and exp < 0:
                    raise DivisionByZeroError("0.0 raised to a negative power")
                return Const(v ** exp)
    if isinstance(base, Pow):
        merged = Fraction(base.exponent) * Fraction(exp)
        return _normalize_pow(base.base, int(merged) if merged.denominator == 1 else merged)
    if isinstance(base, Mul) and isinstance(exp, int):
        return _normalize_mul(tuple(Pow(f, exp) for f in base.factors))
    if isinstance(base, Div) and isinstance(exp, int):
        if exp > 0:
            return normalize(Div(Pow(base.num, exp), Pow(base.den, exp)))
        return normalize(Div(Pow(base.den, -exp), Pow(base.num, -exp)))
    if exp < 0:
        # negative exponents take the quotient normal form, same as a/b/x does
        return normalize(Div(ONE, Pow(base, -exp)))
    return Pow(base, exp)


_EXACT_FUN_VALUES = {
    ("sin", Fraction(0)): Fraction(0),
    ("cos", Fraction(0)): Fraction(1),
}


def _normalize_fun(name: str, args) -> Expr:
    if name == "sqrt":
        (a,) = args
        if isinstance(a, Const) and isinstance(a.value, Fraction):
            if a.value < 0:
                raise NegativeSqrtError(f"sqrt of negative constant {a.value}")
            exact = _exact_rational_power(a.value, Fraction(1, 2))
            if exact is not None:
                return Const(exact)
        return Fun("sqrt", (a,))
    if name in ("sin", "cos"):
        (a,) = args
        if isinstance(a, Const) and isinstance(a.value, Fraction):
            hit = _EXACT_FUN_VALUES.get((name, a.value))
            if hit is not None:
                return Const(hit)
        return Fun(name, (a,))
    if name == "atan2":
        u, v = args
        if (isinstance(u, Const) and isinstance(u.value, Fraction) and u.value == 0
                and isinstance(v, Const) and isinstance(v.value, Fraction) and v.value > 0):
            return ZERO
        return Fun("atan2", (u, v))
    return Fun(name, tuple(args))


def normalize(e: Expr) -> Expr:
    """Canonical form: flattened, constant-merged, deterministically ordered."""
    if isinstance(e, (Const, Sym)):
        return e
    if isinstance(e, Add):
        return _normalize_add([normalize(t) for t in e.terms])
    if isinstance(e, Mul):
        return _normalize_mul([normalize(f) for f in e.factors])
    if isinstance(e, Pow):
        return _normalize_pow(normalize(e.base), e.exponent)
    if isinstance(e, Div):
        num = normalize(e.num)
        den = normalize(e.den)
        if isinstance(den, Const):
            if den.value == 0:
                raise DivisionByZeroError("division by a zero constant")
            if isinstance(den.value, Fraction):
                return _normalize_mul([num, Const(Fraction(1) / den.value)])
            return _normalize_mul([num, Const(1.0 / den.value)])
        if _is_zero(num):
            return num
        if num == den:
            # valid off the zero set of den; charts exclude it anyway
            return ONE
        if isinstance(num, Div):
            return normalize(Div(num.num, Mul((num.den, den))))
        if isinstance(den, Div):
            return normalize(Div(Mul((num, den.den)), den.num))
        rationalized = _rationalize(num, den)
        if rationalized is not None:
            return rationalized
        reduced = _cancel_quotient(num, den)
        if reduced is not None:
            return reduced
        return Div(num, den)
    if isinstance(e, Fun):
        return _normalize_fun(e.name, [normalize(a) for a in e.args])
    raise TypeError(f"not an Expr: {e!r}")


def _expand_node(e: Expr) -> Expr:
    if isinstance(e, (Const, Sym)):
        return e
    if isinstance(e, Add):
        return _normalize_add([_expand_node(t) for t in e.terms])
    if isinstance(e, Mul):
        factors = [_expand_node(f) for f in e.factors]
        for i, f in enumerate(factors):
            if isinstance(f, Add):
                rest = factors[:i] + factors[i + 1:]
                return _normalize_add(
                    [_expand_node(_raw_product(rest + [t])) for t in f.terms])
        return _normalize_mul(factors)
    if isinstance(e, Pow):
        base = _expand_node(e.base)
        exp = e.exponent
        if isinstance(base, Add) and isinstance(exp, int) and 2 <= exp <= 16:
            out = base
            for _ in range(exp - 1):
                out = _expand_node(_raw_product([out, base]))
            return out
        return _normalize_pow(base, exp)
    if isinstance(e, Div):
        num = _expand_node(e.num)
        den = _expand_node(e.den)
        if isinstance(num, Add):
            return _normalize_add(
                [_expand_node(normalize(Div(t, den))) for t in num.terms])
        return normalize(Div(num, den))
    if isinstance(e, Fun):
        return _normalize_fun(e.name, [_expand_node(a) for a in e.args])
    raise TypeError(f"not an Expr: {e!r}")


def expand(e: Expr) -> Expr:
    """Distribute products and small integer powers over sums; normalized.

    Normalization alone keeps products of sums factored (cheap, and usually
    what symbolic intermediates want); expansion is the opt-in step that
    collapses cross-term cancellations down to closed forms.
    """
    return _expand_node(normalize(e))


# ---------------------------------------------------------------------------
# calculus and substitution
# ---------------------------------------------------------------------------

def _diff(e: Expr, name: str) -> Expr:
    if isinstance(e, Const):
        return ZERO
    if isinstance(e, Sym):
        return ONE if e.name == name else ZERO
    if isinstance(e, Add):
        return Add(tuple(_diff(t, name) for t in e.terms))
    if isinstance(e, Mul):
        terms = []
        fs = e.factors
        for i in range(len(fs)):
            terms.append(Mul(tuple(fs[:i]) + (_diff(fs[i], name),) + tuple(fs[i + 1:])))
        return Add(tuple(terms)) if len(terms) > 1 else terms[0]
    if isinstance(e, Pow):
        n = e.exponent
        db = _diff(e.base, name)
        return Mul((Const(Fraction(n)), Pow(e.base, _add_exponents(n, -1)), db))
    if isinstance(e, Div):
        du = _diff(e.num, name)
        dv = _diff(e.den, name)
        return Div(Add((Mul((du, e.den)), Mul((Const(-1), e.num, dv)))), Pow(e.den, 2))
    if isinstance(e, Fun):
        if e.name == "sin":
            (u,) = e.args
            return Mul((Fun("cos", (u,)), _diff(u, name)))
        if e.name == "cos":
            (u,) = e.args
            return Mul((Const(-1), Fun("sin", (u,)), _diff(u, name)))
        if e.name == "sqrt":
            (u,) = e.args
            return Div(_diff(u, name), Mul((Const(2), Fun("sqrt", (u,)))))
        if e.name == "atan2":
            u, v = e.args
            num = Add((Mul((v, _diff(u, name))), Mul((Const(-1), u, _diff(v, name)))))
            den = Add((Pow(u, 2), Pow(v, 2)))
            return Div(num, den)
    raise TypeError(f"not an Expr: {e!r}")


def differentiate(e: Expr, sym: Union[str, Sym]) -> Expr:
    name = sym.name if isinstance(sym, Sym) else sym
    # normalize first: the raw power rule would build base^-1 from literal
    # constructions like 0^0 that normalization folds away
    return normalize(_diff(normalize(e), name))


def substitute(e: Expr, mapping: Mapping) -> Expr:
    """Simultaneous substitution of symbols, then normalization."""
    table = {}
    for k, v in mapping.items():
        key = k.name if isinstance(k, Sym) else k
        table[key] = _coerce(v)

    def walk(node: Expr) -> Expr:
        if isinstance(node, Const):
            return node
        if isinstance(node, Sym):
            return table.get(node.name, node)
        if isinstance(node, Add):
            return Add(tuple(walk(t) for t in node.terms))
        if isinstance(node, Mul):
            return Mul(tuple(walk(f) for f in node.factors))
        if isinstance(node, Pow):
            return Pow(walk(node.base), node.exponent)
        if isinstance(node, Div):
            return Div(walk(node.num), walk(node.den))
        if isinstance(node, Fun):
            return Fun(node.name, tuple(walk(a) for a in node.args))
        raise TypeError(f"not an Expr: {node!r}")

    return normalize(walk(e))


def evaluate(e: Expr, bindings: Mapping[str, float]) -> float:
    """Float evaluation with singularity guards instead of NaN propagation."""
    if isinstance(e, Const):
        return float(e.value)
    if isinstance(e, Sym):
        try:
            return float(bindings[e.name])
        except KeyError:
            raise UnboundSymbolError(f"symbol {e.name!r} is unbound") from None
    if isinstance(e, Add):
        return math.fsum(evaluate(t, bindings) for t in e.terms)
    if isinstance(e, Mul):
        out = 1.0
        for f in e.factors:
            out *= evaluate(f, bindings)
        return out
    if isinstance(e, Pow):
        base = evaluate(e.base, bindings)
        n = e.exponent
        if isinstance(n, int):
            if base == 0.0 and n < 0:
                raise DivisionByZeroError("zero base with negative exponent")
            return base ** n
        if base < 0.0:
            raise NegativeSqrtError("fractional power of a negative value")
        if base == 0.0 and n < 0:
            raise DivisionByZeroError("zero base with negative exponent")
        return base ** float(n)
    if isinstance(e, Div):
        den = evaluate(e.den, bindings)
        if den == 0.0:
            raise DivisionByZeroError(f"division by zero in {e}")
        return evaluate(e.num, bindings) / den
    if isinstance(e, Fun):
        vals = [evaluate(a, bindings) for a in e.args]
        if e.name == "sin":
            return math.sin(vals[0])
        if e.name == "cos":
            return math.cos(vals[0])
        if e.name == "sqrt":
            if vals[0] < 0.0:
                raise NegativeSqrtError(f"sqrt of negative value in {e}")
            return math.sqrt(vals[0])
        if e.name == "atan2":
            return math.atan2(vals[0], vals[1])
    raise TypeError(f"not an Expr: {e!r}")


# ---------------------------------------------------------------------------
# symbol table
# ---------------------------------------------------------------------------

ROLES = ("coordinate", "momentum", "parameter")


class SymbolTable:
    """Ordered symbol registry with role tags."""

    def __init__(self):
        self._roles = {}

    def add(self, name: str, role: str) -> Sym:
        if role not in ROLES:
            raise ValueError(f"unknown role {role!r}")
        if name in FUNCTIONS:
            raise ValueError(f"{name!r} is a reserved function name")
        if name in self._roles and self._roles[name] != role:
            raise ValueError(f"symbol {name!r} already registered as {self._roles[name]}")
        self._roles[name] = role
        return Sym(name)

    def role(self, name: str) -> str:
        return self._roles[name]

    def names(self, role: Optional[str] = None):
        if role is None:
            return tuple(self._roles)
        return tuple(n for n, r in self._roles.items() if r == role)

    def __contains__(self, name: str) -> bool:
        return name in self._roles

    def __iter__(self):
        return iter(self._roles)

    def __len__(self):
        return len(self._roles)


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_NUMBER_RE = re.compile(r"[0-9]+(\.[0-9]+)?([eE][+-]?[0-9]+)?")
_INT_RE = re.compile(r"[0-9]+")


@dataclass(frozen=True)
class _Token:
    kind: str
    text: str
    offset: int


def _tokenize(text: str):
    tokens = []
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch in " \t\r\n":
            i += 1
            continue
        if ch in "+-*/^(),":
            tokens.append(_Token(ch, ch, i))
            i += 1
            continue
        m = _NUMBER_RE.match(text, i)
        if m and ch.isdigit():
            tokens.append(_Token("number", m.group(0), i))
            i = m.end()
            continue
        m = _IDENT_RE.match(text, i)
        if m:
            tokens.append(_Token("ident", m.group(0), i))
            i = m.end()
            continue
        raise ParseError(f"unexpected character {ch!r}", i)
    tokens.append(_Token("end", "", n))
    return tokens


def _number_value(text: str) -> Fraction:
    # decimal literals become exact fractions; 1.5e-3 -> 3/2000
    if "e" in text or "E" in text:
        mantissa, exp = re.split(r"[eE]", text)
        return Fraction(mantissa) * Fraction(10) ** int(exp)
    return Fraction(text)


class _Parser:
    def __init__(self, tokens, table: Optional[SymbolTable]):
        self.tokens = tokens
        self.pos = 0
        self.table = table

    def peek(self) -> _Token:
        return self.tokens[self.pos]

    def advance(self) -> _Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, kind: str) -> _Token:
        tok = self.peek()
        if tok.kind != kind:
            what = tok.text or "end of input"
            raise ParseError(f"expected {kind!r}, found {what!r}", tok.offset)
        return self.advance()

    def parse_expr(self) -> Expr:
        node = self.parse_term()
        while self.peek().kind in ("+", "-"):
            op = self.advance()
            rhs = self.parse_term()
            if op.kind == "+":
                node = Add((node, rhs))
            else:
                node = Add((node, Mul((Const(-1), rhs))))
        return node

    def parse_term(self) -> Expr:
        node = self.parse_factor()
        while self.peek().kind in ("*", "/"):
            op = self.advance()
            rhs = self.parse_factor()
            if op.kind == "*":
                node = Mul((node, rhs))
            else:
                node = Div(node, rhs)
        return node

    def parse_factor(self) -> Expr:
        node = self.parse_atom()
        if self.peek().kind == "^":
            self.advance()
            tok = self.peek()
            if tok.kind != "number" or not _INT_RE.fullmatch(tok.text):
                what = tok.text or "end of input"
                raise ParseError(f"exponent must be an integer literal, found {what!r}",
                                 tok.offset)
            self.advance()
            node = Pow(node, int(tok.text))
        return node

    def parse_atom(self) -> Expr:
        tok = self.peek()
        if tok.kind == "number":
            self.advance()
            return Const(_number_value(tok.text))
        if tok.kind == "-":
            self.advance()
            return Mul((Const(-1), self.parse_atom()))
        if tok.kind == "(":
            self.advance()
            node = self.parse_expr()
            self.expect(")")
            return node
        if tok.kind == "ident":
            self.advance()
            if tok.text in FUNCTIONS:
                self.expect("(")
                args = [self.parse_expr()]
                while self.peek().kind == ",":
                    self.advance()
                    args.append(self.parse_expr())
                closing = self.expect(")")
                if len(args) != FUNCTIONS[tok.text]:
                    raise ParseError(
                        f"{tok.text} expects {FUNCTIONS[tok.text]} argument(s), got {len(args)}",
                        closing.offset)
                return Fun(tok.text, tuple(args))
            if self.table is not None and tok.text not in self.table:
                raise UnknownIdentifierError(f"unknown identifier {tok.text!r}", tok.offset)
            return Sym(tok.text)
        what = tok.text or "end of input"
        raise ParseError(f"unexpected {what!r}", tok.offset)


def parse(text: str, table: Optional[SymbolTable] = None) -> Expr:
    """Parse the DSL into a normalized expression tree."""
    parser = _Parser(_tokenize(text), table)
    node = parser.parse_expr()
    tail = parser.peek()
    if tail.kind != "end":
        raise ParseError(f"trailing input {tail.text!r}", tail.offset)
    return normalize(node)


# ---------------------------------------------------------------------------
# printing (precedence-aware; output reparses to an equal tree)
# ---------------------------------------------------------------------------

_PREC_ADD, _PREC_MUL, _PREC_POW, _PREC_ATOM = 1, 2, 3, 4


def _render_const(value: Number) -> str:
    if isinstance(value, Fraction):
        if value.denominator == 1:
            return str(value.numerator)
        return f"{value.numerator}/{value.denominator}"
    return repr(value)


def _render(e: Expr, parent_prec: int) -> str:
    if isinstance(e, Const):
        text = _render_const(e.value)
        if text.startswith("-"):
            prec = _PREC_ADD   # leading unary minus binds loosely
        elif "/" in text:
            prec = _PREC_MUL
        else:
            prec = _PREC_ATOM
        return _wrap(text, prec, parent_prec)
    if isinstance(e, Sym):
        return e.name
    if isinstance(e, Add):
        parts = [_render(e.terms[0], _PREC_ADD)]
        for t in e.terms[1:]:
            coeff, rest = _split_coefficient(t)
            if _negative_number(coeff):
                flipped = _rebuild_product(_negate_number(coeff), rest)
                parts.append(" - " + _render(flipped, _PREC_ADD + 1))
            else:
                parts.append(" + " + _render(t, _PREC_ADD + 1))
        return _wrap("".join(parts), _PREC_ADD, parent_prec)
    if isinstance(e, Mul):
        coeff, rest = _split_coefficient(e)
        if _negative_number(coeff) and rest:
            inner = _rebuild_product(_negate_number(coeff), rest)
            return _wrap("-" + _render(inner, _PREC_MUL), _PREC_ADD, parent_prec)
        parts = [_render(f, _PREC_MUL + 0 if i == 0 else _PREC_MUL + 1)
                 for i, f in enumerate(e.factors)]
        return _wrap("*".join(parts), _PREC_MUL, parent_prec)
    if isinstance(e, Div):
        num = _render(e.num, _PREC_MUL)
        den = _render(e.den, _PREC_MUL + 1)
        return _wrap(f"{num}/{den}", _PREC_MUL, parent_prec)
    if isinstance(e, Pow):
        n = e.exponent
        if isinstance(n, int):
            base = _render(e.base, _PREC_ATOM)
            if n < 0:
                return _wrap(f"1/{base}^{-n}", _PREC_MUL, parent_prec)
            return _wrap(f"{base}^{n}", _PREC_POW, parent_prec)
        frac = Fraction(n)
        if frac.denominator == 2:
            inner = _normalize_pow(e.base, frac.numerator) if frac.numerator != 1 else e.base
            if frac.numerator < 0:
                body = _render(Div(ONE, Fun("sqrt", (_normalize_pow(e.base, -frac.numerator),))),
                               parent_prec)
                return body
            return _render(Fun("sqrt", (inner,)), parent_prec)
        raise ExprError(f"cannot render exponent {n} in the grammar")
    if isinstance(e, Fun):
        args = ", ".join(_render(a, 0) for a in e.args)
        return f"{e.name}({args})"
    raise TypeError(f"not an Expr: {e!r}")


def _wrap(text: str, prec: int, parent_prec: int) -> str:
    if prec < parent_prec:
        return f"({text})"
    return text


def _negative_number(value: Number) -> bool:
    return value < 0


def _negate_number(value: Number) -> Number:
    return -value


def render(e: Expr) -> str:
    return _render(e, 0)


# ---------------------------------------------------------------------------
# sampled numeric comparison
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SampleDomain:
    """Box constraints plus guard bands; sampling rejects guard violations.

    ranges: (symbol, lo, hi) triples; guards: (expr, lo, hi) with the guard
    accepted when lo <= value <= hi.  Guards keep samples clear of declared
    singular sets (denominators, branch cuts, degenerate parameters).
    """

    ranges: tuple
    guards: tuple = ()

    def symbols(self):
        return tuple(name for name, _, _ in self.ranges)

    def sample(self, n: int, seed: int = 0, rng: Optional[random.Random] = None):
        if rng is None:
            rng = random.Random(seed)
        points = []
        attempts = 0
        limit = max(1000, 200 * n)
        while len(points) < n:
            attempts += 1
            if attempts > limit:
                raise DomainError(
                    f"guard rejection too high: {len(points)} of {n} points "
                    f"after {attempts} attempts")
            pt = {name: rng.uniform(lo, hi) for name, lo, hi in self.ranges}
            ok = True
            for guard, lo, hi in self.guards:
                try:
                    val = evaluate(guard, pt)
                except EvalError as exc:
                    raise DomainError(f"guard {guard} failed at {pt}: {exc}") from exc
                if not (lo <= val <= hi):
                    ok = False
                    break
            if ok:
                points.append(pt)
        return points

    def extended(self, extra_ranges=(), extra_guards=()):
        names = {name for name, _, _ in self.ranges}
        added = tuple(r for r in extra_ranges if r[0] not in names)
        return SampleDomain(self.ranges + added, self.guards + tuple(extra_guards))


@dataclass(frozen=True)
class ComparisonResult:
    equal: bool
    max_abs_err: float
    worst_point: Optional[dict]
    n_points: int

    def __bool__(self):
        return self.equal


def numeric_compare(a: Expr, b: Expr, domain: SampleDomain, n: int = 64,
                    tol: float = 1e-9, seed: int = 0) -> ComparisonResult:
    """Sampled comparison: |a-b| <= tol*(1+|a|) at every sampled point."""
    points = domain.sample(n, seed=seed)
    worst = None
    worst_err = -1.0
    equal = True
    for pt in points:
        try:
            va = evaluate(a, pt)
            vb = evaluate(b, pt)
        except EvalError as exc:
            raise DomainError(f"sampling hit a singular point {pt}: {exc}") from exc
        err = abs(va - vb)
        scaled = err / (1.0 + abs(va))
        if scaled > worst_err:
            worst_err = scaled
            worst = dict(pt)
        if err > tol * (1.0 + abs(va)):
            equal = False
    return ComparisonResult(equal, worst_err, worst, len(points))


def numeric_equal(a: Expr, b: Expr, domain: SampleDomain, n: int = 64,
                  tol: float = 1e-9, seed: int = 0) -> bool:
    return numeric_compare(a, b, domain, n=n, tol=tol, seed=seed).equal
