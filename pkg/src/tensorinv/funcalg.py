"""Exact arithmetic in the phase-space function ring.

Elements are finite sums of terms

    c * q1^a1 q2^a2 p1^b1 p2^b2 * r^e * rho^m * exp(l1*q1 + l2*q2)

with ``r = sqrt(q1^2 + q2^2)``, ``rho = r^2``, ``e`` in {0, 1}, ``m`` a signed
integer and ``c, l1, l2`` exact elements of Q(sqrt(d)).  Coordinates are
ordered ``x = (q1, q2, p1, p2)`` and axes are 0-based throughout the package.

Canonical form
--------------
Terms are grouped by *class* ``(p-exponents, radical parity, exponential)``.
Inside a class the q-dependence is a rational function ``N(q) / rho^M``; it is
stored with ``M >= 0`` minimal, i.e. ``rho`` does not divide ``N`` whenever
``M > 0``.  Two canonical functions are equal iff their term tables are equal,
under the (asserted, not proven) independence of polynomials, ``r`` and
distinct exponentials over the coefficient field.
"""

from __future__ import annotations

import ast
import math
from fractions import Fraction
from math import comb
from typing import Callable, Iterable, Mapping, NamedTuple, Sequence, Union


class ConfigurationError(ValueError):
    """Incompatible field extensions, out-of-ring parameters or menus."""


class SingularityError(ArithmeticError):
    """Evaluation at a point where ``rho = 0`` and a negative power of rho occurs."""


# ---------------------------------------------------------------------------
# Field scalars

def _exact_sqrt(x: Fraction) -> Fraction | None:
    if x < 0:
        return None
    n, d = x.numerator, x.denominator
    rn, rd = math.isqrt(n), math.isqrt(d)
    if rn * rn == n and rd * rd == d:
        return Fraction(rn, rd)
    return None


class FieldScalar:
    """An element ``rat + surd*sqrt(d)`` of Q(sqrt(d)) with ``surd != 0``.

    Exact rationals are represented by :class:`fractions.Fraction`; use
    :func:`field_scalar` to build either kind.  Arithmetic between scalars with
    different non-trivial ``d`` raises :class:`ConfigurationError`.
    """

    __slots__ = ("rat", "surd", "d")

    def __init__(self, rat: Fraction, surd: Fraction, d: Fraction):
        self.rat = rat
        self.surd = surd
        self.d = d

    # helpers -----------------------------------------------------------
    @staticmethod
    def _parts(x) -> tuple[Fraction, Fraction, Fraction | None]:
        if isinstance(x, FieldScalar):
            return x.rat, x.surd, x.d
        return Fraction(x), Fraction(0), None

    @staticmethod
    def _joint_d(d1, d2):
        if d1 is None:
            return d2
        if d2 is None or d1 == d2:
            return d1
        raise ConfigurationError(f"mixing scalars from Q(sqrt({d1})) and Q(sqrt({d2}))")

    # arithmetic --------------------------------------------------------
    def __add__(self, other):
        if not isinstance(other, (FieldScalar, Fraction, int)):
            return NotImplemented
        a, b, d = self._parts(other)
        d = self._joint_d(self.d, d)
        return field_scalar(self.rat + a, self.surd + b, d)

    __radd__ = __add__

    def __neg__(self):
        return FieldScalar(-self.rat, -self.surd, self.d)

    def __sub__(self, other):
        if not isinstance(other, (FieldScalar, Fraction, int)):
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (Fraction, int)):
            if other == 0:
                return Fraction(0)
            return FieldScalar(self.rat * other, self.surd * other, self.d)
        if not isinstance(other, FieldScalar):
            return NotImplemented
        d = self._joint_d(self.d, other.d)
        return field_scalar(self.rat * other.rat + d * self.surd * other.surd,
                            self.rat * other.surd + self.surd * other.rat, d)

    __rmul__ = __mul__

    def conjugate(self) -> "FieldScalar":
        return FieldScalar(self.rat, -self.surd, self.d)

    def norm(self) -> Fraction:
        return self.rat * self.rat - self.d * self.surd * self.surd

    def inverse(self):
        n = self.norm()
        return field_scalar(self.rat / n, -self.surd / n, self.d)

    def __truediv__(self, other):
        if isinstance(other, (Fraction, int)):
            return FieldScalar(self.rat / other, self.surd / other, self.d)
        if not isinstance(other, FieldScalar):
            return NotImplemented
        return self * other.inverse()

    def __rtruediv__(self, other):
        return self.inverse() * other

    # comparison --------------------------------------------------------
    def __eq__(self, other):
        if isinstance(other, FieldScalar):
            return (self.rat, self.surd, self.d) == (other.rat, other.surd, other.d)
        return False

    def __hash__(self):
        return hash((self.rat, self.surd, self.d))

    def __bool__(self):
        return True

    def __complex__(self):
        return complex(float(self.rat)) + float(self.surd) * _sqrt_value(self.d)

    def __float__(self):
        if self.d < 0:
            raise TypeError("scalar is not real")
        return float(self.rat) + float(self.surd) * math.sqrt(self.d)

    def __repr__(self):
        return f"FieldScalar({self.rat}, {self.surd}, d={self.d})"


Scalar = Union[Fraction, FieldScalar]


def _sqrt_value(d: Fraction) -> complex | float:
    if d < 0:
        return 1j * math.sqrt(-d)
    return math.sqrt(d)


def field_scalar(rat=0, surd=0, d=None) -> Scalar:
    """Build ``rat + surd*sqrt(d)``; returns a Fraction when the surd part vanishes."""
    rat, surd = Fraction(rat), Fraction(surd)
    if surd == 0:
        return rat
    if d is None:
        raise ConfigurationError("a surd part needs a discriminant")
    square, core = _squarefree(Fraction(d))
    if core == 1:
        return rat + surd * square
    return FieldScalar(rat, surd * square, Fraction(core))


def _squarefree(d: Fraction) -> tuple[Fraction, int]:
    """Write d = s^2 * core with core a squarefree integer."""
    n = d.numerator * d.denominator
    s = Fraction(1, d.denominator)
    sign = -1 if n < 0 else 1
    n = abs(n)
    if n == 0:
        raise ConfigurationError("sqrt(0) is not a field generator")
    core = 1
    f = 2
    while f * f <= n:
        while n % (f * f) == 0:
            n //= f * f
            s *= f
        if n % f == 0:
            n //= f
            core *= f
        f += 1
    return s, sign * core * n


def sqrt_of(d) -> Scalar:
    """``sqrt(d)`` as a field element."""
    return field_scalar(0, 1, d)


I_UNIT = field_scalar(0, 1, -1)


def as_scalar(x) -> Scalar:
    if isinstance(x, FieldScalar):
        return x
    if isinstance(x, float):
        raise ConfigurationError(f"floating value {x!r} is not an exact scalar")
    return Fraction(x)


def scalar_d(c) -> Fraction | None:
    return c.d if isinstance(c, FieldScalar) else None


def scalar_sort_key(c) -> tuple:
    if isinstance(c, FieldScalar):
        return (c.rat, c.surd, c.d)
    return (c, Fraction(0), Fraction(0))


def scalar_value(c) -> float | complex:
    if isinstance(c, FieldScalar):
        return complex(c) if c.d < 0 else float(c)
    return float(c)


def scalar_text(c) -> str:
    if isinstance(c, FieldScalar):
        mag = abs(c.surd)
        surd = f"sqrt({_frac_text(c.d)})" if mag == 1 else f"{_frac_text(mag)}*sqrt({_frac_text(c.d)})"
        if c.rat == 0:
            return f"({'' if c.surd > 0 else '-'}{surd})"
        return f"({_frac_text(c.rat)}{'+' if c.surd > 0 else '-'}{surd})"
    return _frac_text(c)


def _frac_text(x: Fraction) -> str:
    x = Fraction(x)
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


# ---------------------------------------------------------------------------
# Monomial keys

ZERO_EXP = (Fraction(0), Fraction(0))


class MonomialKey(NamedTuple):
    """Exponent data of one basis term; see the module docstring."""

    q1: int
    q2: int
    p1: int
    p2: int
    radical: int = 0
    rho: int = 0
    exp: tuple = ZERO_EXP

    @property
    def momentum(self) -> tuple[int, int]:
        return (self.p1, self.p2)

    @property
    def momentum_degree(self) -> int:
        return self.p1 + self.p2

    def sort_key(self) -> tuple:
        return (self.p1 + self.p2, self.p1, self.p2, self.radical, self.rho,
                scalar_sort_key(self.exp[0]), scalar_sort_key(self.exp[1]), self.q1, self.q2)

    def text(self) -> str:
        parts = []
        for name, e in (("q1", self.q1), ("q2", self.q2), ("p1", self.p1), ("p2", self.p2)):
            if e == 1:
                parts.append(name)
            elif e:
                parts.append(f"{name}^{e}")
        if self.radical:
            parts.append("r")
        if self.rho:
            parts.append(f"rho^{self.rho}" if self.rho != 1 else "rho")
        if self.exp != ZERO_EXP:
            parts.append("exp(" + _linear_text(self.exp) + ")")
        return "*".join(parts)


def _linear_text(lam) -> str:
    out = []
    for c, name in zip(lam, ("q1", "q2")):
        if c == 0:
            continue
        s = scalar_text(c)
        if out and not s.startswith("-"):
            s = "+" + s
        if s in ("1", "+1", "-1"):
            out.append(f"{s[:-1]}{name}")
        else:
            out.append(f"{s}*{name}")
    return "".join(out)


def _add_exp(e1, e2):
    if e1 is ZERO_EXP or e1 == ZERO_EXP:
        return e2
    if e2 is ZERO_EXP or e2 == ZERO_EXP:
        return e1
    s = (e1[0] + e2[0], e1[1] + e2[1])
    return ZERO_EXP if s == ZERO_EXP else s


# ---------------------------------------------------------------------------
# Normalization helpers

def _rho_power_poly(k: int) -> dict:
    """(q1^2 + q2^2)^k as {(a1, a2): coeff}."""
    return {(2 * j, 2 * (k - j)): Fraction(comb(k, j)) for j in range(k + 1)}


def _divide_by_rho(poly: dict) -> dict | None:
    """Exact quotient poly / (q1^2+q2^2), or None if not divisible."""
    work = {m: c for m, c in poly.items() if c != 0}
    quotient: dict = {}
    if not work:
        return {}
    top = max(a for a, _ in work)
    for a1 in range(top, 1, -1):
        for (b1, b2) in [m for m in work if m[0] == a1]:
            c = work.pop((b1, b2))
            if c == 0:
                continue
            quotient[(b1 - 2, b2)] = quotient.get((b1 - 2, b2), 0) + c
            key = (b1 - 2, b2 + 2)
            v = work.get(key, 0) - c
            if v == 0:
                work.pop(key, None)
            else:
                work[key] = v
    if any(c != 0 for c in work.values()):
        return None
    return {m: c for m, c in quotient.items() if c != 0}


def _normalize(raw: Mapping) -> dict:
    terms = {k: c for k, c in raw.items() if c != 0}
    if all(k.rho == 0 for k in terms):
        return terms
    groups: dict = {}
    for k, c in terms.items():
        cls = (k.p1, k.p2, k.radical, k.exp)
        groups.setdefault(cls, []).append((k.q1, k.q2, k.rho, c))
    out: dict = {}
    for (b1, b2, rad, ex), items in groups.items():
        big_m = max(0, -min(m for _, _, m, _ in items))
        num: dict = {}
        for a1, a2, m, c in items:
            for (e1, e2), bc in _rho_power_poly(m + big_m).items():
                key = (a1 + e1, a2 + e2)
                num[key] = num.get(key, 0) + c * bc
        num = {m: c for m, c in num.items() if c != 0}
        while big_m > 0 and num:
            quo = _divide_by_rho(num)
            if quo is None:
                break
            num = quo
            big_m -= 1
        if not num:
            continue
        for (a1, a2), c in num.items():
            out[MonomialKey(a1, a2, b1, b2, rad, -big_m, ex)] = c
    return out


# ---------------------------------------------------------------------------
# Generalized functions

class GeneralizedFunction:
    """Immutable canonical element of the function ring.

    Build elements from the coordinate constructors (:func:`q1`, :func:`r`,
    :func:`exp_linear`, ...) and ring operations, or with :func:`parse`.
    """

    __slots__ = ("terms", "_hash")

    def __init__(self, terms: Mapping | None = None, *, _canonical: bool = False):
        if terms is None:
            terms = {}
        normalized = dict(terms) if _canonical else _normalize(
            {k if isinstance(k, MonomialKey) else MonomialKey(*k): as_scalar(c) for k, c in terms.items()})
        self.terms = normalized
        self._hash = None

    # construction ------------------------------------------------------
    @classmethod
    def constant(cls, c) -> "GeneralizedFunction":
        c = as_scalar(c)
        return cls({MonomialKey(0, 0, 0, 0): c}, _canonical=True) if c != 0 else ZERO

    @staticmethod
    def coerce(x) -> "GeneralizedFunction":
        if isinstance(x, GeneralizedFunction):
            return x
        return GeneralizedFunction.constant(x)

    # predicates ----------------------------------------------------------
    def is_zero(self) -> bool:
        return not self.terms

    def __bool__(self):
        return bool(self.terms)

    def __len__(self):
        return len(self.terms)

    def __eq__(self, other):
        if not isinstance(other, GeneralizedFunction):
            try:
                other = GeneralizedFunction.coerce(other)
            except (TypeError, ValueError):
                return NotImplemented
        return self.terms == other.terms

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(frozenset(self.terms.items()))
        return self._hash

    @property
    def discriminant(self) -> Fraction | None:
        """The common d of all surd coefficients and exponents, None if rational."""
        d = None
        for k, c in self.terms.items():
            for s in (c, *k.exp):
                sd = scalar_d(s)
                if sd is not None:
                    d = FieldScalar._joint_d(d, sd)
        return d

    @property
    def has_radical(self) -> bool:
        return any(k.radical for k in self.terms)

    def max_momentum_degree(self) -> int:
        return max((k.momentum_degree for k in self.terms), default=0)

    # ring operations -----------------------------------------------------
    def __add__(self, other):
        if not isinstance(other, GeneralizedFunction):
            other = GeneralizedFunction.constant(other)
        if not other.terms:
            return self
        if not self.terms:
            return other
        out = dict(self.terms)
        for k, c in other.terms.items():
            v = out.get(k)
            out[k] = c if v is None else v + c
        needs_norm = any(k.rho for k in out)
        if not needs_norm:
            return GeneralizedFunction({k: c for k, c in out.items() if c != 0}, _canonical=True)
        return GeneralizedFunction(_normalize(out), _canonical=True)

    __radd__ = __add__

    def __neg__(self):
        return GeneralizedFunction({k: -c for k, c in self.terms.items()}, _canonical=True)

    def __sub__(self, other):
        if not isinstance(other, GeneralizedFunction):
            other = GeneralizedFunction.constant(other)
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def scale(self, c) -> "GeneralizedFunction":
        c = as_scalar(c)
        if c == 0:
            return ZERO
        return GeneralizedFunction({k: v * c for k, v in self.terms.items()}, _canonical=True)

    def __mul__(self, other):
        if not isinstance(other, GeneralizedFunction):
            return self.scale(other)
        if not self.terms or not other.terms:
            return ZERO
        out: dict = {}
        for k1, c1 in self.terms.items():
            for k2, c2 in other.terms.items():
                rad = k1.radical + k2.radical
                rho = k1.rho + k2.rho
                if rad == 2:
                    rad, rho = 0, rho + 1
                k = MonomialKey(k1.q1 + k2.q1, k1.q2 + k2.q2, k1.p1 + k2.p1, k1.p2 + k2.p2,
                                rad, rho, _add_exp(k1.exp, k2.exp))
                v = out.get(k)
                c = c1 * c2
                out[k] = c if v is None else v + c
        return GeneralizedFunction(_normalize(out), _canonical=True)

    def __rmul__(self, other):
        return self.scale(other)

    def __truediv__(self, other):
        if isinstance(other, GeneralizedFunction):
            if len(other.terms) != 1:
                # a positive power of rho is stored expanded; peel it off first
                for m in range(1, 9):
                    peeled = other * rho_power(-m)
                    if len(peeled.terms) == 1:
                        return (self * rho_power(-m)) / peeled
                raise ConfigurationError("division only by single terms in r, rho and exp")
            (k, c), = other.terms.items()
            if k.q1 or k.q2 or k.p1 or k.p2:
                raise ConfigurationError("division by a monomial in q or p leaves the ring")
            inv_exp = ZERO_EXP if k.exp == ZERO_EXP else (-k.exp[0], -k.exp[1])
            inv = GeneralizedFunction({MonomialKey(0, 0, 0, 0, k.radical, -k.rho - k.radical, inv_exp):
                                       Fraction(1)})
            return (self * inv) / c
        c = as_scalar(other)
        return self.scale(c.inverse() if isinstance(c, FieldScalar) else Fraction(1) / c)

    def __pow__(self, n: int):
        if not isinstance(n, int) or n < 0:
            raise ValueError("only non-negative integer powers")
        result = ONE
        base = self
        while n:
            if n & 1:
                result = result * base
            base = base * base
            n >>= 1
        return result

    # calculus --------------------------------------------------------------
    def derive(self, s: int) -> "GeneralizedFunction":
        """Exact partial derivative along axis ``s`` in 0..3 (q1, q2, p1, p2)."""
        if s not in (0, 1, 2, 3):
            raise ValueError(f"axis index {s} outside 0..3")
        out: dict = {}

        def acc(k, c):
            v = out.get(k)
            out[k] = c if v is None else v + c

        for k, c in self.terms.items():
            if s >= 2:
                e = k.p1 if s == 2 else k.p2
                if e:
                    acc(k._replace(p1=k.p1 - 1) if s == 2 else k._replace(p2=k.p2 - 1), c * e)
                continue
            a = k.q1 if s == 0 else k.q2
            if a:
                acc(k._replace(q1=k.q1 - 1) if s == 0 else k._replace(q2=k.q2 - 1), c * a)
            power = k.radical + 2 * k.rho
            if power:
                acc(k._replace(q1=k.q1 + 1, rho=k.rho - 1) if s == 0
                    else k._replace(q2=k.q2 + 1, rho=k.rho - 1), c * power)
            lam = k.exp[s]
            if lam != 0:
                acc(k, c * lam)
        return GeneralizedFunction(_normalize(out), _canonical=True)

    def gradient(self) -> list["GeneralizedFunction"]:
        return [self.derive(s) for s in range(4)]

    # numerics ---------------------------------------------------------------
    def evaluate(self, x: Sequence[float]):
        """Floating value at ``x = (q1, q2, p1, p2)`` (complex only when d < 0)."""
        return compile_functions([self])(*x)[0]

    # serialization -------------------------------------------------------
    def sorted_terms(self) -> list:
        return sorted(self.terms.items(), key=lambda kc: (kc[0].sort_key(), scalar_sort_key(kc[1])))

    def to_text(self) -> str:
        if not self.terms:
            return "0"
        pieces = []
        for k, c in self.sorted_terms():
            mono = k.text()
            if isinstance(c, FieldScalar):
                body = scalar_text(c) + ("*" + mono if mono else "")
                sign = "+"
            else:
                sign = "-" if c < 0 else "+"
                mag = abs(c)
                if not mono:
                    body = _frac_text(mag)
                elif mag == 1:
                    body = mono
                else:
                    body = f"{_frac_text(mag)}*{mono}"
            pieces.append((sign, body))
        first_sign, first = pieces[0]
        text = ("-" if first_sign == "-" else "") + first
        for sign, body in pieces[1:]:
            text += f" {sign} {body}"
        return text

    def __str__(self):
        return self.to_text()

    def __repr__(self):
        return f"GeneralizedFunction({self.to_text()!r})"


ZERO = GeneralizedFunction({}, _canonical=True)
ONE = GeneralizedFunction({MonomialKey(0, 0, 0, 0): Fraction(1)}, _canonical=True)


def coordinate(s: int) -> GeneralizedFunction:
    exps = [0, 0, 0, 0]
    exps[s] = 1
    return GeneralizedFunction({MonomialKey(*exps): Fraction(1)}, _canonical=True)


def q1() -> GeneralizedFunction:
    return coordinate(0)


def q2() -> GeneralizedFunction:
    return coordinate(1)


def p1() -> GeneralizedFunction:
    return coordinate(2)


def p2() -> GeneralizedFunction:
    return coordinate(3)


def r() -> GeneralizedFunction:
    """sqrt(q1^2 + q2^2)."""
    return GeneralizedFunction({MonomialKey(0, 0, 0, 0, 1, 0): Fraction(1)}, _canonical=True)


def rho_power(m: int) -> GeneralizedFunction:
    """(q1^2 + q2^2)^m for any integer m."""
    return GeneralizedFunction({MonomialKey(0, 0, 0, 0, 0, m): Fraction(1)})


def exp_linear(l1, l2) -> GeneralizedFunction:
    """exp(l1*q1 + l2*q2) with exact l1, l2."""
    lam = (as_scalar(l1), as_scalar(l2))
    if lam == ZERO_EXP:
        return ONE
    return GeneralizedFunction({MonomialKey(0, 0, 0, 0, 0, 0, lam): Fraction(1)}, _canonical=True)


def monomial(key: MonomialKey, c=1) -> GeneralizedFunction:
    return GeneralizedFunction({key: as_scalar(c)})


# ---------------------------------------------------------------------------
# Parametric linear combinations

def rho_depth(funcs: Iterable[GeneralizedFunction]) -> int:
    """Largest power of ``rho`` occurring in a denominator."""
    return max((-k.rho for f in funcs for k in f.terms), default=0) if funcs else 0


def lift_terms(f: GeneralizedFunction, depth: int) -> dict:
    """Terms of ``rho^depth * f`` expanded into polynomial numerators.

    Canonical forms of different functions may use different powers of
    ``rho``; after multiplying by a common ``rho^depth`` every term has
    ``rho`` exponent zero, so coefficients of linear combinations can be
    compared term by term.
    """
    if depth == 0:
        return dict(f.terms)
    out: dict = {}
    for k, c in f.terms.items():
        m = k.rho + depth
        if m < 0:
            raise ValueError("depth smaller than the denominators of f")
        for (e1, e2), bc in _rho_power_poly(m).items():
            key = k._replace(q1=k.q1 + e1, q2=k.q2 + e2, rho=0)
            v = out.get(key)
            out[key] = c * bc if v is None else v + c * bc
    return {key: c for key, c in out.items() if c != 0}


def coefficient_split(combo: Mapping[str, GeneralizedFunction]) -> dict:
    """Collect ``sum_j u_j * f_j`` by basis key.

    ``combo`` maps a parameter name (or ``None`` for the affine constant) to
    its function.  Denominators in ``rho`` are first cleared to a common
    power (see :func:`lift_terms`), so the combination vanishes identically
    iff every returned linear form vanishes.  Returns
    ``{MonomialKey: {param: coeff}}``.
    """
    depth = rho_depth(list(combo.values()))
    out: dict = {}
    for param, f in combo.items():
        for k, c in lift_terms(f, depth).items():
            out.setdefault(k, {})[param] = c
    return out


# ---------------------------------------------------------------------------
# Numeric bridge

def _num_literal(c) -> str:
    v = scalar_value(c)
    return repr(v)


def compile_functions(funcs: Sequence[GeneralizedFunction]) -> Callable:
    """Compile several functions into one callable ``(q1, q2, p1, p2) -> tuple``.

    Raises :class:`SingularityError` at ``rho = 0`` when any negative power of
    rho is present.
    """
    funcs = [GeneralizedFunction.coerce(f) for f in funcs]
    need_r = any(k.radical for f in funcs for k in f.terms)
    need_rho = any(k.rho for f in funcs for k in f.terms)
    singular = any(k.rho < 0 for f in funcs for k in f.terms)
    exps: dict = {}
    for f in funcs:
        for k in f.terms:
            if k.exp != ZERO_EXP and k.exp not in exps:
                exps[k.exp] = f"_e{len(exps)}"
    lines = ["def _f(q1, q2, p1, p2):"]
    if need_r or need_rho:
        lines.append("    rho = q1*q1 + q2*q2")
    if singular:
        lines.append("    if rho == 0.0:")
        lines.append("        raise SingularityError('evaluation at rho = 0')")
    if need_r:
        lines.append("    r = _sqrt(rho)")
    for lam, name in exps.items():
        lines.append(f"    {name} = _exp({_num_literal(lam[0])}*q1 + {_num_literal(lam[1])}*q2)")
    exprs = []
    for f in funcs:
        if not f.terms:
            exprs.append("0.0")
            continue
        tparts = []
        for k, c in f.sorted_terms():
            factors = [f"({_num_literal(c)})"]
            for name, e in (("q1", k.q1), ("q2", k.q2), ("p1", k.p1), ("p2", k.p2)):
                if e == 1:
                    factors.append(name)
                elif e:
                    factors.append(f"{name}**{e}")
            if k.radical:
                factors.append("r")
            if k.rho:
                factors.append(f"rho**({k.rho})")
            if k.exp != ZERO_EXP:
                factors.append(exps[k.exp])
            tparts.append("*".join(factors))
        exprs.append(" + ".join(tparts))
    lines.append("    return (" + ", ".join(exprs) + ",)")
    namespace = {"_sqrt": math.sqrt, "_exp": _cexp if _any_complex(exps) else math.exp,
                 "SingularityError": SingularityError}
    exec("\n".join(lines), namespace)
    return namespace["_f"]


def _any_complex(exps) -> bool:
    return any(isinstance(s, FieldScalar) and s.d < 0 for lam in exps for s in lam)


def _cexp(z):
    import cmath
    return cmath.exp(z)


# ---------------------------------------------------------------------------
# Text parsing

_NAMES = {"q1": q1, "q2": q2, "p1": p1, "p2": p2, "r": r}


def parse(text: str, d=None, symbols: Mapping | None = None) -> GeneralizedFunction:
    """Parse an expression such as ``"2*(q2*p1-q1*p2)"`` or ``"-kappa*r/rho"``.

    Supported: integers and rationals, ``+ - * /``, ``**`` / ``^`` with integer
    exponents, names ``q1 q2 p1 p2 r rho``, ``I`` (needs d = -1),
    ``sqrt(n)`` and ``exp(l1*q1 + l2*q2)``.  ``d`` restricts ``sqrt``;
    ``symbols`` maps extra names (e.g. ``kappa``) to exact constants.
    """
    tree = ast.parse(text.replace("^", "**"), mode="eval")
    return _Parser(d, symbols or {}).visit(tree.body)


class _Parser(ast.NodeVisitor):
    def __init__(self, d, symbols):
        self.d = None if d is None else Fraction(d)
        self.symbols = symbols

    def generic_visit(self, node):
        raise ConfigurationError(f"unsupported syntax in expression: {ast.dump(node)}")

    def visit_Constant(self, node):
        if isinstance(node.value, bool) or not isinstance(node.value, int):
            raise ConfigurationError(f"only integer literals allowed, got {node.value!r}")
        return GeneralizedFunction.constant(node.value)

    def visit_Name(self, node):
        if node.id in _NAMES:
            return _NAMES[node.id]()
        if node.id == "rho":
            return rho_power(1)
        if node.id == "I":
            self._check_d(-1)
            return GeneralizedFunction.constant(I_UNIT)
        if node.id in self.symbols:
            return GeneralizedFunction.coerce(self.symbols[node.id])
        raise ConfigurationError(f"unknown name {node.id!r}")

    def _check_d(self, d):
        if self.d is not None and _exact_sqrt(Fraction(d) / self.d) is None and _exact_sqrt(Fraction(d)) is None:
            raise ConfigurationError(f"sqrt({d}) is outside Q(sqrt({self.d}))")

    def visit_UnaryOp(self, node):
        v = self.visit(node.operand)
        if isinstance(node.op, ast.USub):
            return -v
        if isinstance(node.op, ast.UAdd):
            return v
        return self.generic_visit(node)

    def visit_BinOp(self, node):
        left, right = self.visit(node.left), self.visit(node.right)
        if isinstance(node.op, ast.Add):
            return left + right
        if isinstance(node.op, ast.Sub):
            return left - right
        if isinstance(node.op, ast.Mult):
            return left * right
        if isinstance(node.op, ast.Div):
            return left / right
        if isinstance(node.op, ast.Pow):
            n = _as_int(right)
            if n >= 0:
                return left ** n
            return ONE / (left ** (-n))
        return self.generic_visit(node)

    def visit_Call(self, node):
        if not isinstance(node.func, ast.Name) or len(node.args) != 1:
            return self.generic_visit(node)
        arg = self.visit(node.args[0])
        if node.func.id == "sqrt":
            n = _as_scalar_value(arg)
            if isinstance(n, FieldScalar):
                raise ConfigurationError("nested radicals are outside the ring")
            self._check_d(n)
            return GeneralizedFunction.constant(sqrt_of(n))
        if node.func.id == "exp":
            lam = [Fraction(0), Fraction(0)]
            for k, c in arg.terms.items():
                if k == MonomialKey(1, 0, 0, 0):
                    lam[0] = c
                elif k == MonomialKey(0, 1, 0, 0):
                    lam[1] = c
                else:
                    raise ConfigurationError("exp() argument must be l1*q1 + l2*q2")
            return exp_linear(*lam)
        return self.generic_visit(node)


def _as_scalar_value(f: GeneralizedFunction):
    if not f.terms:
        return Fraction(0)
    if len(f.terms) != 1 or MonomialKey(0, 0, 0, 0) not in f.terms:
        raise ConfigurationError("expected a constant")
    return f.terms[MonomialKey(0, 0, 0, 0)]


def _as_int(f: GeneralizedFunction) -> int:
    v = _as_scalar_value(f)
    if isinstance(v, FieldScalar) or v.denominator != 1:
        raise ConfigurationError("exponent must be an integer")
    return int(v)


def linear_span_rank(funcs: Iterable[GeneralizedFunction]) -> int:
    """Dimension of the span of ``funcs`` over the coefficient field."""
    from .linalg import rank_of_vectors
    funcs = list(funcs)
    depth = rho_depth(funcs)
    return rank_of_vectors([lift_terms(f, depth) for f in funcs])
