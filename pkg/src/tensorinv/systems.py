"""Registry of benchmark Hamiltonian systems and their known tensor invariants.

Every system has the form ``H = (p1^2 + p2^2)/2 + V(q1, q2)`` except where
noted, and its vector field is ``X = P dH`` with the canonical bivector.

Each :class:`SystemDef` carries the invariant tensors known for it together
with executable exact checks (:func:`known_checks`).  Where a printed formula
contains an evident misprint the registry stores the corrected object; the
literal variants are exposed separately (``printed_*`` helpers) so that
callers can reproduce the discrepancy.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Mapping, Sequence

from .funcalg import (
    I_UNIT,
    ONE,
    ZERO,
    ConfigurationError,
    GeneralizedFunction,
    as_scalar,
    exp_linear,
    field_scalar,
    p1 as _p1,
    p2 as _p2,
    q1 as _q1,
    q2 as _q2,
    r as _r,
    rho_power,
    scalar_d,
    sqrt_of,
)
from .tensor import (
    CANONICAL,
    TensorField,
    bivector,
    bivector_apply,
    compose,
    compose_trace,
    exterior_derivative,
    first_nonzero,
    hamiltonian_vector_field,
    identity_operator,
    interior_product,
    lie_derivative,
    pfaffian,
    pfaffian_rank,
    schouten_bracket,
    two_form,
    wedge,
)

GF = GeneralizedFunction

SYSTEM_NAMES = (
    "henon_heiles",
    "cubic_nonhomogeneous",
    "free_motion",
    "weight_homogeneous",
    "kepler",
    "toda_family",
    "g2_toda",
)


@dataclass(frozen=True)
class Extension:
    """Ring features a system needs: radicals, an exponential lattice, a surd field."""

    radical: bool = False
    exponentials: tuple = ()
    discriminant: Fraction | None = None

    def describe(self) -> dict:
        return {
            "radical": self.radical,
            "exponentials": [[str(c) for c in lam] for lam in self.exponentials],
            "discriminant": None if self.discriminant is None else str(self.discriminant),
        }


@dataclass
class KnownInvariant:
    label: str
    tensor: TensorField
    relation: str


@dataclass
class KeplerIntegrals:
    """Laplace-Runge-Lenz components ``K1, K2`` and angular momentum ``K3``."""

    K1: GF
    K2: GF
    K3: GF


@dataclass
class SystemDef:
    name: str
    parameters: dict
    hamiltonian: GF
    vector_field: TensorField
    extension: Extension
    known_invariants: list = field(default_factory=list)
    first_integrals: dict = field(default_factory=dict)
    invariant_forms: dict = field(default_factory=dict)
    expected_span: dict = field(default_factory=dict)
    expected_nullity: int | None = None
    potential: GF | None = None
    extras: dict = field(default_factory=dict)

    def invariant(self, label: str) -> TensorField:
        for inv in self.known_invariants:
            if inv.label == label:
                return inv.tensor
        raise KeyError(label)

    @property
    def discriminant(self) -> Fraction | None:
        return self.extension.discriminant


@dataclass
class CheckResult:
    name: str
    passed: bool
    witness: str | None = None

    def as_dict(self) -> dict:
        return {"name": self.name, "status": "pass" if self.passed else "fail", "witness": self.witness}


@dataclass
class Check:
    """A named exact identity; ``run()`` evaluates it."""

    name: str
    procedure: Callable[[], CheckResult]

    def run(self) -> CheckResult:
        return self.procedure()


# ---------------------------------------------------------------------------
# Helpers

def _rat(x, name: str) -> Fraction | object:
    try:
        return as_scalar(x)
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(f"parameter {name}={x!r} is not an exact ring scalar") from exc


def kinetic() -> GF:
    return (_p1() ** 2 + _p2() ** 2) * Fraction(1, 2)


def _finish(name, params, V, extension, **kw) -> SystemDef:
    H = kinetic() + V
    X = hamiltonian_vector_field(H)
    return SystemDef(name=name, parameters=params, hamiltonian=H, vector_field=X,
                     extension=extension, potential=V, **kw)


def _canonical_span(H: GF) -> dict:
    P = CANONICAL.P
    return {"P": P, "H*P": P * H}


def _zero_witness(T) -> str | None:
    if isinstance(T, GF):
        return None if T.is_zero() else T.to_text()
    nz = first_nonzero(T)
    if nz is None:
        return None
    idx, v = nz
    return f"component {''.join(str(i + 1) for i in idx)}: {v.to_text()}"


def zero_check(name: str, thunk: Callable[[], object]) -> Check:
    def run():
        w = _zero_witness(thunk())
        return CheckResult(name, w is None, w)
    return Check(name, run)


def nonzero_check(name: str, thunk: Callable[[], object]) -> Check:
    def run():
        w = _zero_witness(thunk())
        return CheckResult(name, w is not None, w if w is not None else "identically zero")
    return Check(name, run)


def rank_check(name: str, thunk: Callable[[], TensorField], expected: int) -> Check:
    def run():
        pf, rank = pfaffian_rank(thunk())
        return CheckResult(name, rank == expected, f"rank {rank}, Pf = {pf.to_text()}")
    return Check(name, run)


# ---------------------------------------------------------------------------
# Systems

def henon_heiles(a=1, b=1, harmonic=0) -> SystemDef:
    """``V = q1 (a q2^2 + b q1^2) + (harmonic/2)(q1^2 + q2^2)``.

    The cubic case (``harmonic = 0``) is weight-homogeneous and carries the
    supplemental bivector and the 2-form below.  A nonzero harmonic term gives
    the classical bounded Henon-Heiles orbit used for long integrations; it
    breaks homogeneity, so no supplemental invariant is registered then.
    """
    a, b, w = _rat(a, "a"), _rat(b, "b"), _rat(harmonic, "harmonic")
    Q1, Q2, P1, P2 = _q1(), _q2(), _p1(), _p2()
    V = Q1 * (Q2 ** 2 * a + Q1 ** 2 * b) + (Q1 ** 2 + Q2 ** 2) * (w / 2)
    s = _finish("henon_heiles", {"a": a, "b": b, "harmonic": w}, V, Extension())
    if w != 0:
        s.expected_span = _canonical_span(s.hamiltonian)
        return s
    t = Fraction(1, 3)
    Pt = bivector({
        (0, 1): (Q2 * P1 - Q1 * P2) * (4 * t),
        (0, 2): P1 ** 2 - P2 ** 2 - Q1 * Q2 ** 2 * (2 * t * a) + Q1 ** 3 * (2 * b),
        (0, 3): P1 * P2 * 2 + Q1 ** 2 * Q2 * (8 * t * a),
        (1, 2): P1 * P2 * 2 + Q2 ** 3 * (4 * t * a) + Q1 ** 2 * Q2 * (4 * b),
        (1, 3): P2 ** 2 - P1 ** 2 + Q1 * Q2 ** 2 * (2 * t * a) - Q1 ** 3 * (2 * b),
        (2, 3): Q1 * Q2 * P1 * (4 * a) - (Q2 ** 2 * (2 * a) + Q1 ** 2 * (6 * b)) * P2,
    })
    half, quarter, sixth = Fraction(1, 2), Fraction(1, 4), Fraction(1, 6)
    Wt = two_form({
        (0, 1): (Q2 ** 2 * a + Q1 ** 2 * (3 * b)) * P2 * half - Q1 * Q2 * P1 * a,
        (0, 2): Q1 * Q2 ** 2 * (a * sixth) - Q1 ** 3 * (b * half) - (P1 ** 2 - P2 ** 2) * quarter,
        (0, 3): -(Q2 ** 3 * (a * t) + Q1 ** 2 * Q2 * b + P1 * P2 * half),
        (1, 2): -(Q1 ** 2 * Q2 * (2 * a * t) + P1 * P2 * half),
        (1, 3): -Q1 * Q2 ** 2 * (a * sixth) + Q1 ** 3 * (b * half) + (P1 ** 2 - P2 ** 2) * quarter,
        (2, 3): (Q1 * P2 - Q2 * P1) * t,
    })
    s.known_invariants = [
        KnownInvariant("P_tilde", Pt, "L_X P_tilde = 0"),
        KnownInvariant("omega_tilde", Wt, "L_X omega_tilde = 0"),
    ]
    s.invariant_forms = {"omega_tilde": Wt}
    s.expected_span = {**_canonical_span(s.hamiltonian), "P_tilde": Pt}
    s.expected_nullity = 3
    s.extras["alpha"] = Fraction(4, 3)
    # H^(2/3) P_tilde is Poisson and compatible with H^(10/3) P
    s.extras["scaled_poisson"] = (Fraction(2, 3), Fraction(10, 3))
    return s


def cubic_nonhomogeneous(a=1, b=1) -> SystemDef:
    """``V = a q1^3 + b q1 q2``: no invariant bivector beyond ``(a1 H + a2) P``."""
    a, b = _rat(a, "a"), _rat(b, "b")
    Q1, Q2 = _q1(), _q2()
    s = _finish("cubic_nonhomogeneous", {"a": a, "b": b}, Q1 ** 3 * a + Q1 * Q2 * b, Extension())
    s.expected_span = _canonical_span(s.hamiltonian)
    s.expected_nullity = 2
    return s


def free_motion(alpha=2) -> SystemDef:
    """``V = 0`` with the geodesic bivector ``P'_h`` and its 2-form."""
    al = _rat(alpha, "alpha")
    Q1, Q2, P1, P2 = _q1(), _q2(), _p1(), _p2()
    s = _finish("free_motion", {"alpha": al}, ZERO, Extension())
    L = P1 * Q2 - P2 * Q1
    Ph = bivector({
        (0, 1): L * al,
        (0, 2): P1 ** 2 - P2 ** 2,
        (0, 3): P1 * P2 * 2,
        (1, 2): P1 * P2 * 2,
        (1, 3): P2 ** 2 - P1 ** 2,
    })
    Wh = two_form({
        (0, 2): P1 ** 2 - P2 ** 2,
        (1, 3): P2 ** 2 - P1 ** 2,
        (0, 3): P1 * P2 * 2,
        (1, 2): P1 * P2 * 2,
        (2, 3): -(L * al),
    })
    s.known_invariants = [
        KnownInvariant("P_h", Ph, "L_X P_h = 0"),
        KnownInvariant("omega_h", Wh, "L_X omega_h = 0"),
    ]
    s.invariant_forms = {"omega_h": Wh}
    s.expected_span = {**_canonical_span(s.hamiltonian), "P_h": Ph}
    s.extras["pin12"] = L * al
    return s


def _prop2_bivector(V: GF, alpha) -> TensorField:
    Q1, Q2, P1, P2 = _q1(), _q2(), _p1(), _p2()
    d1, d2 = V.derive(0), V.derive(1)
    return bivector({
        (0, 1): (P1 * Q2 - P2 * Q1) * alpha,
        (0, 2): P1 ** 2 - P2 ** 2 - Q2 * d2 * alpha + V * 2,
        (0, 3): P1 * P2 * 2 + Q1 * d2 * alpha,
        (1, 2): P1 * P2 * 2 + Q2 * d1 * alpha,
        (1, 3): P2 ** 2 - P1 ** 2 + Q2 * d2 * alpha - V * 2,
        (2, 3): P1 * d2 * 2 - P2 * d1 * 2,
    })


def weight_homogeneous(alpha=Fraction(4, 3), f_coeffs: Sequence = (1, 0, 1)) -> SystemDef:
    """``V = q1^(4/alpha) f(q2/q1)`` with ``f(w) = sum_k f_k w^k`` a polynomial.

    ``4/alpha`` must be a positive integer ``n`` and ``f`` of degree at most ``n``
    so that ``V`` is a polynomial.
    """
    al = _rat(alpha, "alpha")
    if scalar_d(al) is not None or al == 0:
        raise ConfigurationError("alpha must be a nonzero rational")
    n = Fraction(4) / al
    if n.denominator != 1 or n <= 0:
        raise ConfigurationError("4/alpha must be a positive integer")
    n = int(n)
    coeffs = [_rat(c, "f") for c in f_coeffs]
    if len(coeffs) > n + 1:
        raise ConfigurationError(f"f must have degree <= {n} for a polynomial potential")
    Q1, Q2 = _q1(), _q2()
    V = ZERO
    for k, c in enumerate(coeffs):
        if c != 0:
            V = V + Q1 ** (n - k) * Q2 ** k * c
    s = _finish("weight_homogeneous", {"alpha": al, "f_coeffs": coeffs}, V, Extension())
    Pt = _prop2_bivector(V, al)
    s.known_invariants = [KnownInvariant("P_tilde", Pt, "L_X P_tilde = 0")]
    s.expected_span = {**_canonical_span(s.hamiltonian), "P_tilde": Pt}
    s.extras["alpha"] = al
    return s


def kepler(kappa=1) -> SystemDef:
    """``H = |p|^2/2 - kappa/r`` with ``K1, K2, K3`` and the nine-parameter family."""
    k = _rat(kappa, "kappa")
    Q1, Q2, P1, P2 = _q1(), _q2(), _p1(), _p2()
    inv_r = _r() * rho_power(-1)
    inv_r3 = _r() * rho_power(-2)
    V = -(inv_r * k)
    s = _finish("kepler", {"kappa": k}, V, Extension(radical=True))
    L = P1 * Q2 - P2 * Q1
    K1 = P1 * L - Q2 * inv_r * k
    K2 = P2 * L + Q1 * inv_r * k
    K3 = Q1 * P2 - Q2 * P1
    s.first_integrals = {"K1": K1, "K2": K2, "K3": K3}
    s.extras["integrals"] = KeplerIntegrals(K1, K2, K3)
    half = Fraction(1, 2)
    Pt = bivector({
        (0, 1): Q1 * P2 - P1 * Q2,
        (0, 2): -(P2 ** 2) * half + Q2 ** 2 * inv_r3 * k,
        (0, 3): P1 * P2 * half - Q1 * Q2 * inv_r3 * k,
        (1, 2): P1 * P2 * half - Q1 * Q2 * inv_r3 * k,
        (1, 3): -(P1 ** 2) * half + Q1 ** 2 * inv_r3 * k,
        (2, 3): L * inv_r3 * (k * half),
    })
    P = CANONICAL.P
    X1, X2, X3 = (hamiltonian_vector_field(K) for K in (K1, K2, K3))
    s.extras.update({"X1": X1, "X2": X2, "X3": X3, "P_tilde": Pt})
    H = s.hamiltonian
    s.known_invariants = [
        KnownInvariant("P_tilde", Pt, "L_X P_tilde = 0"),
        KnownInvariant("X1^X3", wedge(X1, X3), "L_X (X1^X3) = 0"),
        KnownInvariant("X2^X3", wedge(X2, X3), "L_X (X2^X3) = 0"),
    ]
    s.expected_span = {
        "X1^X3": wedge(X1, X3), "X2^X3": wedge(X2, X3),
        "H*P": P * H, "K3^2*P": P * (K3 * K3), "K1*P": P * K1, "K2*P": P * K2,
        "K3*P": P * K3, "P": P, "P_tilde": Pt,
    }
    s.expected_nullity = 9
    return s


def printed_kepler_p_tilde(s: SystemDef) -> TensorField:
    """The supplemental Kepler bivector with the 24 entry exactly as printed (``+p1^2/2``)."""
    Pt = s.extras["P_tilde"]
    k = s.parameters["kappa"]
    Q1, P1 = _q1(), _p1()
    entries = {(i, j): Pt[i, j] for i in range(4) for j in range(i + 1, 4)}
    entries[(1, 3)] = P1 ** 2 * Fraction(1, 2) + Q1 ** 2 * _r() * rho_power(-2) * k
    return bivector(entries)


def kepler_family(s: SystemDef, a: Sequence) -> TensorField:
    """``(a1 X1 + a2 X2)^X3 + (a3 H + a4 K3^2 + a5 K1 + a6 K2 + a7 K3 + a8) P + a9 P_tilde``."""
    a = [as_scalar(c) for c in a]
    if len(a) != 9:
        raise ValueError("nine parameters expected")
    X1, X2, X3 = s.extras["X1"], s.extras["X2"], s.extras["X3"]
    K1, K2, K3 = (s.first_integrals[n] for n in ("K1", "K2", "K3"))
    H = s.hamiltonian
    P = CANONICAL.P
    U = X1 * a[0] + X2 * a[1]
    f = H * a[2] + K3 * K3 * a[3] + K1 * a[4] + K2 * a[5] + K3 * a[6] + GF.constant(a[7])
    return wedge(U, X3) + P * f + s.extras["P_tilde"] * a[8]


def kepler_poisson_bivectors(s: SystemDef, a=1, b=1) -> dict:
    """The four Poisson bivectors of the family.

    ``P'_3`` and ``P'_4`` carry the sign of the ``K P`` term that makes them
    Poisson and of rank two; :func:`printed_kepler_poisson_bivectors` gives the
    literal signs.
    """
    a, b = as_scalar(a), as_scalar(b)
    X1, X2, X3 = s.extras["X1"], s.extras["X2"], s.extras["X3"]
    K1, K2 = s.first_integrals["K1"], s.first_integrals["K2"]
    H, P, Pt = s.hamiltonian, CANONICAL.P, s.extras["P_tilde"]
    HPt = P * H + Pt
    return {
        "P1": wedge(X1 + X2 * I_UNIT, X3) * a + P * b,
        "P2": (P * H - Pt * 2) * a,
        "P3": (wedge(X1, X3) + P * K2) * a + HPt * b,
        "P4": (wedge(X2, X3) - P * K1) * a + HPt * b,
    }


def printed_kepler_poisson_bivectors(s: SystemDef, a=1, b=1) -> dict:
    out = kepler_poisson_bivectors(s, a, b)
    a, b = as_scalar(a), as_scalar(b)
    X1, X2, X3 = s.extras["X1"], s.extras["X2"], s.extras["X3"]
    K1, K2 = s.first_integrals["K1"], s.first_integrals["K2"]
    HPt = CANONICAL.P * s.hamiltonian + s.extras["P_tilde"]
    out["P3"] = (wedge(X1, X3) - CANONICAL.P * K2) * a + HPt * b
    out["P4"] = (wedge(X2, X3) + CANONICAL.P * K1) * a + HPt * b
    return out


def kepler_relations(s: SystemDef, a=1, b=1) -> dict:
    """Exact relations satisfied by the four Poisson bivectors (each entry must vanish)."""
    a, b = as_scalar(a), as_scalar(b)
    Ps = kepler_poisson_bivectors(s, a, b)
    H = s.hamiltonian
    K1, K2, K3 = (s.first_integrals[n] for n in ("K1", "K2", "K3"))
    P = CANONICAL.P
    dH, dK3 = exterior_derivative(H), exterior_derivative(K3)
    X, X3 = bivector_apply(P, dH), bivector_apply(P, dK3)
    return {
        "P1 dK3 - (b - a(K2 - i K1)) P dK3 = 0":
            bivector_apply(Ps["P1"], dK3) - X3 * (GF.constant(b) - (K2 - K1 * I_UNIT) * a),
        "P2 dK3 - a K3 P dH - 3 a H P dK3 = 0":
            bivector_apply(Ps["P2"], dK3) - X * (K3 * a) - X3 * (H * (3 * a)),
        "2 P3 dK3 + b K3 P dH = 0": bivector_apply(Ps["P3"], dK3) * 2 + X * (K3 * b),
        "2 P4 dK3 + b K3 P dH = 0": bivector_apply(Ps["P4"], dK3) * 2 + X * (K3 * b),
    }


def printed_kepler_relations(s: SystemDef, a=1, b=1) -> dict:
    """The four relations exactly as printed, evaluated on the Poisson bivectors."""
    a, b = as_scalar(a), as_scalar(b)
    Ps = kepler_poisson_bivectors(s, a, b)
    H = s.hamiltonian
    K1, K2, K3 = (s.first_integrals[n] for n in ("K1", "K2", "K3"))
    P = CANONICAL.P
    dH, dK3 = exterior_derivative(H), exterior_derivative(K3)
    X, X3 = bivector_apply(P, dH), bivector_apply(P, dK3)
    return {
        "P1 dH - (b - a(K1 - i K2)) P dK3 = 0":
            bivector_apply(Ps["P1"], dH) - X3 * (GF.constant(b) - (K1 - K2 * I_UNIT) * a),
        "P2 dH - K3 P dH - 3 H P dK3 = 0": bivector_apply(Ps["P2"], dH) - X * K3 - X3 * (H * 3),
        "2 P3 dH - b K3 P dH = 0": bivector_apply(Ps["P3"], dH) * 2 - X * (K3 * b),
        "2 P4 dH - b K3 P dH = 0": bivector_apply(Ps["P4"], dH) * 2 - X * (K3 * b),
    }


def kepler_trace_derived(s: SystemDef, a: Sequence) -> GF:
    """Trace of ``N = P' omega`` for the nine-parameter family in this package's conventions."""
    a = [as_scalar(c) for c in a]
    H = s.hamiltonian
    K1, K2, K3 = (s.first_integrals[n] for n in ("K1", "K2", "K3"))
    return (H * (4 * a[2] - 2 * a[8]) + K1 * (2 * a[1] + 4 * a[4]) + K2 * (4 * a[5] - 2 * a[0])
            + K3 * K3 * (4 * a[3]) + K3 * (4 * a[6]) + GF.constant(4 * a[7]))


def kepler_trace_printed(s: SystemDef, a: Sequence) -> GF:
    """The printed trace formula ``2(a9-2a6)H + 2(a2-2a3)K1 - 2(a1+a4)K2 - 4a5 K3^2 - 4a7 K3 - 4a8``."""
    a = [as_scalar(c) for c in a]
    H = s.hamiltonian
    K1, K2, K3 = (s.first_integrals[n] for n in ("K1", "K2", "K3"))
    return (H * (2 * (a[8] - 2 * a[5])) + K1 * (2 * (a[1] - 2 * a[2])) - K2 * (2 * (a[0] + a[3]))
            - K3 * K3 * (4 * a[4]) - K3 * (4 * a[6]) - GF.constant(4 * a[7]))


def toda_family(alpha=4, beta=4, c1=1, c2=1) -> SystemDef:
    """``V = c1 exp(-4 q1/beta) + c2 exp(4 q2/alpha)`` with its supplemental bivector."""
    al, be = _rat(alpha, "alpha"), _rat(beta, "beta")
    c1, c2 = _rat(c1, "c1"), _rat(c2, "c2")
    if al == 0 or be == 0:
        raise ConfigurationError("alpha and beta must be nonzero")
    l1 = (-4 / be, Fraction(0))
    l2 = (Fraction(0), 4 / al)
    E1, E2 = exp_linear(*l1), exp_linear(*l2)
    V = E1 * c1 + E2 * c2
    d = None
    for c in (al, be, c1, c2):
        if scalar_d(c) is not None:
            d = scalar_d(c)
    s = _finish("toda_family", {"alpha": al, "beta": be, "c1": c1, "c2": c2}, V,
                Extension(exponentials=(l1, l2), discriminant=d))
    Q1, Q2, P1, P2 = _q1(), _q2(), _p1(), _p2()
    d1, d2 = V.derive(0), V.derive(1)
    Pt = bivector({
        (0, 1): P1 * al + P2 * be,
        (0, 2): P1 ** 2 - P2 ** 2 - d2 * al + V * 2,
        (0, 3): P1 * P2 * 2 - d2 * be,
        (1, 2): P1 * P2 * 2 + d1 * al,
        (1, 3): P2 ** 2 - P1 ** 2 + d2 * al - V * 2,
        (2, 3): P1 * d2 * 2 - P2 * d1 * 2,
    })
    s.known_invariants = [KnownInvariant("P_tilde", Pt, "L_X P_tilde = 0")]
    s.expected_span = {**_canonical_span(s.hamiltonian), "P_tilde": Pt}
    s.extras["pin12"] = P1 * al + P2 * be
    return s


def g2_toda(periodic: bool = False) -> SystemDef:
    """G2 Toda lattice: ``exp(q1/sqrt3) + exp(-sqrt3/2 q1 + q2/2) [+ exp(-q2)]``."""
    s3 = sqrt_of(3)
    l1 = (s3 / 3, Fraction(0))
    l2 = (-s3 / 2, Fraction(1, 2))
    l3 = (Fraction(0), Fraction(-1))
    E1, E2, E3 = exp_linear(*l1), exp_linear(*l2), exp_linear(*l3)
    V = E1 + E2 + (E3 if periodic else ZERO)
    lattice = (l1, l2, l3) if periodic else (l1, l2)
    s = _finish("g2_toda", {"periodic": bool(periodic)}, V,
                Extension(exponentials=lattice, discriminant=Fraction(3)))
    s.expected_span = _canonical_span(s.hamiltonian)
    s.expected_nullity = 2
    if periodic:
        return s
    P1, P2 = _p1(), _p2()
    h = Fraction(1, 2)
    Pt = bivector({
        (0, 1): P2 * s3 - P1 * 5,
        (0, 2): P2 ** 2 * h + E2 * Fraction(5, 2),
        (0, 3): -(P1 * P2) * h - E2 * (s3 / 2),
        (1, 2): -(P1 * P2) * h - E1 * (s3 * Fraction(5, 3)) + E2 * (s3 * Fraction(5, 2)),
        (1, 3): P1 ** 2 * h - E2 * Fraction(3, 2) + E1,
        (2, 3): -(E2 * P1) * Fraction(1, 4) + (E1 * 2 - E2 * 3) * P2 * (s3 / 12),
    })
    s.known_invariants = [KnownInvariant("P_tilde", Pt, "L_X P_tilde = 0")]
    s.expected_span["P_tilde"] = Pt
    s.expected_nullity = 3
    return s


_BUILDERS = {
    "henon_heiles": henon_heiles,
    "cubic_nonhomogeneous": cubic_nonhomogeneous,
    "free_motion": free_motion,
    "weight_homogeneous": weight_homogeneous,
    "kepler": kepler,
    "toda_family": toda_family,
    "g2_toda": g2_toda,
}


def build_system(name: str, params: Mapping | None = None) -> SystemDef:
    """Construct a registered system by name; ``params`` are keyword parameters."""
    if name not in _BUILDERS:
        raise ConfigurationError(f"unknown system {name!r}; known: {', '.join(SYSTEM_NAMES)}")
    try:
        return _BUILDERS[name](**dict(params or {}))
    except TypeError as exc:
        raise ConfigurationError(f"bad parameters for {name}: {exc}") from exc


# ---------------------------------------------------------------------------
# Check suites

def _common_checks(s: SystemDef) -> list[Check]:
    X, H, P = s.vector_field, s.hamiltonian, CANONICAL.P
    checks = [
        zero_check("L_X H = 0", lambda: lie_derivative(X, H)),
        zero_check("L_X P = 0", lambda: lie_derivative(X, P)),
        zero_check("X = P dH", lambda: X - bivector_apply(P, exterior_derivative(H))),
    ]
    for inv in s.known_invariants:
        checks.append(zero_check(inv.relation, lambda T=inv.tensor: lie_derivative(X, T)))
    for name, F in s.first_integrals.items():
        checks.append(zero_check(f"L_X {name} = 0", lambda F=F: lie_derivative(X, F)))
    return checks


def _jacobi_branch_checks(s: SystemDef, Pt: TensorField, alpha) -> list[Check]:
    """Poisson branches ``A H P + P_tilde`` (A = 2 and A = alpha) and their relations."""
    H, P = s.hamiltonian, CANONICAL.P
    dH = exterior_derivative(H)
    out = []
    for A, label in ((Fraction(2), "2"), (alpha, "alpha")):
        Pp = P * (H * A) + Pt
        out.append(zero_check(f"[[{label} H P + P_tilde, same]] = 0", lambda Pp=Pp: schouten_bracket(Pp, Pp)))
        out.append(nonzero_check(f"[[P, {label} H P + P_tilde]] != 0", lambda Pp=Pp: schouten_bracket(P, Pp)))
    P_a = P * (H * 2) + Pt
    P_b = P * (H * alpha) + Pt
    out.append(zero_check("(P' - 4 H P) dH = 0 on the A = 2 branch",
                          lambda: bivector_apply(P_a - P * (H * 4), dH)))
    out.append(zero_check("(P' - (alpha + 2) H P) dH = 0 on the A = alpha branch",
                          lambda: bivector_apply(P_b - P * (H * (alpha + 2)), dH)))
    return out


def known_checks(s: SystemDef) -> list[Check]:
    """Exact identities registered for ``s``; each returns pass or a nonzero witness."""
    checks = _common_checks(s)
    X, H, P, J = s.vector_field, s.hamiltonian, CANONICAL.P, CANONICAL.J_omega
    dH = exterior_derivative(H)
    if s.name == "henon_heiles" and s.known_invariants:
        Pt, Wt = s.invariant("P_tilde"), s.invariant("omega_tilde")
        checks += [
            zero_check("P_tilde dH - 2 H X = 0", lambda: bivector_apply(Pt, dH) - X * (H * 2)),
            zero_check("(P_tilde - 2 H P) dH = 0", lambda: bivector_apply(Pt - P * (H * 2), dH)),
            zero_check("P_tilde omega_tilde = H^2 Id",
                       lambda: compose(Pt, Wt) - identity_operator() * (H * H)),
            zero_check("omega_tilde ^ omega_tilde + (H^2/4) omega ^ omega = 0",
                       lambda: wedge(Wt, Wt) + wedge(J, J) * (H * H * Fraction(1, 4))),
            zero_check("i_X omega_tilde + (H/2) dH = 0",
                       lambda: interior_product(X, Wt) + dH * (H * Fraction(1, 2))),
            zero_check("Pf(P_tilde) = 4 H^2", lambda: pfaffian(Pt) - H * H * 4),
        ]
        checks += _jacobi_branch_checks(s, Pt, s.extras["alpha"])
    elif s.name == "weight_homogeneous":
        Pt = s.invariant("P_tilde")
        checks.append(zero_check("P_tilde dH - 2 H X = 0", lambda: bivector_apply(Pt, dH) - X * (H * 2)))
        checks += _jacobi_branch_checks(s, Pt, s.extras["alpha"])
    elif s.name == "free_motion":
        Ph, Wh = s.invariant("P_h"), s.invariant("omega_h")
        checks.append(rank_check("rank P_h = 4", lambda: Ph, 4))
    elif s.name == "toda_family":
        Pt = s.invariant("P_tilde")
        Pp = P * (H * 2) + Pt
        checks += [
            zero_check("(P_tilde - 2 H P) dH = 0", lambda: bivector_apply(Pt - P * (H * 2), dH)),
            zero_check("[[2 H P + P_tilde, same]] = 0", lambda: schouten_bracket(Pp, Pp)),
            zero_check("(P' - 4 H P) dH = 0", lambda: bivector_apply(Pp - P * (H * 4), dH)),
            nonzero_check("[[P, P']] != 0", lambda: schouten_bracket(P, Pp)),
            rank_check("rank P_tilde = 4", lambda: Pt, 4),
        ]
    elif s.name == "g2_toda" and s.known_invariants:
        Pt = s.invariant("P_tilde")
        # measured, no claim to compare with: the Pfaffian vanishes identically
        checks.append(rank_check("rank P_tilde = 2", lambda: Pt, 2))
    elif s.name == "kepler":
        checks += _kepler_checks(s)
    return checks


def _kepler_checks(s: SystemDef) -> list[Check]:
    H, P = s.hamiltonian, CANONICAL.P
    K1, K2, K3 = (s.first_integrals[n] for n in ("K1", "K2", "K3"))
    k = s.parameters["kappa"]
    dH = exterior_derivative(H)
    Pt = s.extras["P_tilde"]
    a, b = Fraction(2), Fraction(5, 3)
    Ps = kepler_poisson_bivectors(s, a, b)
    out = [
        zero_check("K1^2 + K2^2 - 2 H K3^2 - kappa^2 = 0",
                   lambda: K1 * K1 + K2 * K2 - H * K3 * K3 * 2 - GF.constant(k * k)),
        zero_check("P_tilde dH = 0", lambda: bivector_apply(Pt, dH)),
    ]
    for name, M in Ps.items():
        out.append(zero_check(f"[[{name}', {name}']] = 0", lambda M=M: schouten_bracket(M, M)))
    out.append(zero_check("[[P, P1']] = 0", lambda: schouten_bracket(P, Ps["P1"])))
    for name in ("P2", "P3", "P4"):
        out.append(nonzero_check(f"[[P, {name}']] != 0", lambda M=Ps[name]: schouten_bracket(P, M)))
    for name, expected in zip(("P1", "P2", "P3", "P4"), (4, 4, 2, 2)):
        out.append(rank_check(f"rank {name}' = {expected}", lambda M=Ps[name]: M, expected))
    for name, T in kepler_relations(s, a, b).items():
        out.append(zero_check(name, lambda T=T: T))
    coeffs = [Fraction(c) for c in (3, -2, 5, 7, -11, 13, 17, -19, 23)]

    def trace_residual():
        _, tr = compose_trace(kepler_family(s, coeffs), CANONICAL.J_omega)
        return tr - kepler_trace_derived(s, coeffs)

    out.append(zero_check("tr N of the nine-parameter family (derived form)", trace_residual))
    return out


def run_checks(s: SystemDef) -> list[CheckResult]:
    return [c.run() for c in known_checks(s)]
