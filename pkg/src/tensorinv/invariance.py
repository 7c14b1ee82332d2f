"""Search for invariant bivectors by solving ``L_X P' = 0`` over a finite ansatz.

The workflow is

1. :class:`AnsatzSpec` lists, for every skew component ``(i, j)``, the basis
   functions allowed to appear (momentum monomials of degree at most two times
   a menu of coordinate functions).
2. :func:`build_ansatz` turns it into a :class:`ParametricBivector` with one
   formal parameter per basis function.
3. :func:`assemble` applies the Lie derivative column by column and splits the
   result over basis terms, producing an exact sparse linear system.
4. :func:`nullspace` reduces that system and returns concrete bivectors, each
   re-verified against ``L_X B = 0``.
5. :func:`jacobi_analysis` tabulates the polarized Schouten brackets of the
   basis and checks candidate parameter points.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

import numpy as np

from .funcalg import (
    ZERO,
    ZERO_EXP,
    ConfigurationError,
    GeneralizedFunction,
    MonomialKey,
    _add_exp,
    coefficient_split,
    lift_terms,
    rho_depth,
    compile_functions,
    monomial,
    scalar_text,
)
from .linalg import independent_subset, reduce_rows, solve_combination
from .systems import SystemDef
from .tensor import (
    CANONICAL,
    DIM,
    TensorField,
    bivector,
    components_text,
    first_nonzero,
    lie_derivative,
    pretty,
    schouten_bracket,
)

log = logging.getLogger(__name__)

GF = GeneralizedFunction
PAIRS = tuple(itertools.combinations(range(DIM), 2))
TRIPLES = tuple(itertools.combinations(range(DIM), 3))


# ---------------------------------------------------------------------------
# Menus and specs

def momentum_monomials(max_degree: int) -> list[tuple[int, int]]:
    """``(b1, b2)`` with ``b1 + b2 <= max_degree``, ordered by degree then ``-b1``."""
    return [(deg - b2, b2) for deg in range(max_degree + 1) for b2 in range(deg + 1)]


def exponential_lattice(generators: Sequence, height: int) -> list[tuple]:
    """Distinct exponent pairs ``sum n_i g_i`` with ``sum |n_i| <= height``."""
    seen: dict = {ZERO_EXP: None}
    ranges = [range(-height, height + 1)] * len(generators)
    combos = sorted((n for n in itertools.product(*ranges) if sum(map(abs, n)) <= height),
                    key=lambda n: (sum(map(abs, n)), [-v for v in n]))
    for n in combos:
        lam = ZERO_EXP
        for c, g in zip(n, generators):
            if c:
                lam = _add_exp(lam, (g[0] * c, g[1] * c))
        lam = (lam[0], lam[1])
        if lam not in seen:
            seen[lam] = None
    return list(seen)


def coordinate_menu(qdeg: int, radical: bool = False, exponentials: Sequence = (ZERO_EXP,)) -> list[MonomialKey]:
    """Keys of the coordinate-function menu, reduced to an independent family.

    Monomials are ``q^a * exp`` for ``|a| <= qdeg`` and each exponential; with
    ``radical`` the functions ``q^a r rho^-1`` and ``q^a r rho^-2`` are added.
    Dependent entries are dropped greedily (e.g. ``q1^2 r rho^-2 + q2^2 r rho^-2
    = r rho^-1``).
    """
    qmons = [(d - k, k) for d in range(qdeg + 1) for k in range(d + 1)]
    keys = []
    for lam in exponentials:
        for a1, a2 in qmons:
            keys.append(MonomialKey(a1, a2, 0, 0, 0, 0, lam))
    if radical:
        for m in (-1, -2):
            for a1, a2 in qmons:
                keys.append(MonomialKey(a1, a2, 0, 0, 1, m))
    funcs = [monomial(k) for k in keys]
    depth = rho_depth(funcs)
    keep = independent_subset([lift_terms(f, depth) for f in funcs])
    return [keys[i] for i in keep]


@dataclass
class AnsatzSpec:
    """Allowed basis keys per skew component (0-based ``i < j``).

    ``components[(i, j)]`` lists keys whose momentum part is already applied.
    ``pins`` fixes components to ``s_ij * g`` with a single scale parameter.
    ``menu`` records how the keys were generated (for reports and digests).
    """

    components: dict
    momentum_degree: int = 2
    pins: dict = field(default_factory=dict)
    scale: Fraction = Fraction(1)
    menu: dict = field(default_factory=dict)

    @classmethod
    def from_menu(cls, qdeg: int, momentum_degree: int = 2, radical: bool = False,
                  exp_generators: Sequence = (), exp_height: int = 0,
                  pins: Mapping | None = None, scale=1) -> "AnsatzSpec":
        if qdeg < 0 or momentum_degree < 0:
            raise ConfigurationError("degrees must be non-negative")
        lattice = exponential_lattice(list(exp_generators), exp_height) if exp_generators else [ZERO_EXP]
        coord = coordinate_menu(qdeg, radical, lattice)
        pins = dict(pins or {})
        comps = {}
        for pair in PAIRS:
            if pair in pins:
                continue
            keys = []
            for b1, b2 in momentum_monomials(momentum_degree):
                for k in coord:
                    keys.append(k._replace(p1=b1, p2=b2))
            comps[pair] = keys
        menu = {"qdeg": qdeg, "momentum_degree": momentum_degree, "radical": radical,
                "exp_generators": [[scalar_text(c) for c in g] for g in exp_generators],
                "exp_height": exp_height, "coordinate_functions": len(coord)}
        return cls(comps, momentum_degree, pins, Fraction(scale), menu)

    def unknown_count(self) -> int:
        return sum(len(v) for v in self.components.values())

    def digest(self) -> str:
        payload = {
            "components": {f"{i}{j}": [k.text() for k in keys] for (i, j), keys in sorted(self.components.items())},
            "pins": {f"{i}{j}": g.to_text() for (i, j), g in sorted(self.pins.items())},
            "scale": str(self.scale),
        }
        return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()[:16]


def default_ansatz(s: SystemDef, qdeg: int | None = None, pins: Mapping | None = None) -> AnsatzSpec:
    """Documented default menu for each registered system."""
    ext = s.extension
    if ext.exponentials:
        return AnsatzSpec.from_menu(0 if qdeg is None else qdeg, exp_generators=ext.exponentials,
                                    exp_height=2, pins=pins)
    if ext.radical:
        return AnsatzSpec.from_menu(2 if qdeg is None else qdeg, radical=True, pins=pins)
    return AnsatzSpec.from_menu(3 if qdeg is None else qdeg, pins=pins)


# ---------------------------------------------------------------------------
# Parametric bivectors

@dataclass(frozen=True)
class Unknown:
    name: str
    component: tuple[int, int]
    key: MonomialKey | None
    function: GF


@dataclass
class ParametricBivector:
    """Skew bivector linear in formal parameters ``u0 .. u_{N-1}`` (plus pin scales)."""

    unknowns: list
    spec: AnsatzSpec

    @property
    def parameters(self) -> list[str]:
        return [u.name for u in self.unknowns]

    @property
    def unknown_count(self) -> int:
        return sum(1 for u in self.unknowns if u.key is not None)

    def function_count(self) -> int:
        """Unknown coefficient functions: distinct (component, momentum monomial)."""
        return len({(u.component, u.key.momentum) for u in self.unknowns if u.key is not None})

    def column_tensor(self, idx: int) -> TensorField:
        u = self.unknowns[idx]
        return bivector({u.component: u.function})

    def instantiate(self, values: Mapping[int, object] | Sequence) -> TensorField:
        if not isinstance(values, Mapping):
            values = dict(enumerate(values))
        entries = {pair: ZERO for pair in PAIRS}
        for j, c in values.items():
            if c != 0:
                u = self.unknowns[j]
                entries[u.component] = entries[u.component] + u.function * c
        return bivector(entries)


def build_ansatz(spec: AnsatzSpec) -> ParametricBivector:
    if not spec.components and not spec.pins:
        raise ConfigurationError("empty ansatz")
    unknowns = []
    for pair in PAIRS:
        if pair in spec.pins:
            g = GF.coerce(spec.pins[pair]) * spec.scale
            unknowns.append(Unknown(f"s{pair[0] + 1}{pair[1] + 1}", pair, None, g))
            continue
        for key in spec.components.get(pair, []):
            unknowns.append(Unknown(f"u{len(unknowns)}", pair, key, monomial(key, spec.scale)))
    log.info("ansatz: %d unknowns, %d pinned components", sum(u.key is not None for u in unknowns),
             len(spec.pins))
    return ParametricBivector(unknowns, spec)


# ---------------------------------------------------------------------------
# Assembly and solving

@dataclass
class LinearSystem:
    rows: list            # list of {column: scalar}
    row_labels: list      # (component, MonomialKey)
    ncols: int
    ansatz: ParametricBivector

    @property
    def shape(self) -> tuple[int, int]:
        return (len(self.rows), self.ncols)

    def equation_families(self) -> set:
        """Distinct (component, momentum monomial) among the rows."""
        return {(comp, key.momentum) for comp, key in self.row_labels}

    def max_momentum_degree(self) -> int:
        return max((key.momentum_degree for _, key in self.row_labels), default=0)


def assemble(X: TensorField, Pb: ParametricBivector) -> LinearSystem:
    """Exact linear system whose kernel is the invariant part of ``Pb``."""
    per_component: dict = {pair: {} for pair in PAIRS}
    for j in range(len(Pb.unknowns)):
        L = lie_derivative(X, Pb.column_tensor(j))
        for pair in PAIRS:
            v = L[pair]
            if not v.is_zero():
                per_component[pair][j] = v
    rows, labels = [], []
    for pair in PAIRS:
        split = coefficient_split(per_component[pair])
        for key in sorted(split, key=MonomialKey.sort_key):
            rows.append(split[key])
            labels.append((pair, key))
    system = LinearSystem(rows, labels, len(Pb.unknowns), Pb)
    log.info("assembled system: %d rows x %d columns", *system.shape)
    return system


@dataclass
class NullspaceBasis:
    basis: list                 # concrete bivectors
    vectors: list               # {column: scalar}
    rows: int
    cols: int
    rank: int
    blocks: int
    ansatz: ParametricBivector
    verified: bool = False

    @property
    def dimension(self) -> int:
        return len(self.basis)

    def stats(self) -> dict:
        return {"rows": self.rows, "cols": self.cols, "rank": self.rank, "nullity": self.dimension,
                "blocks": self.blocks}


def verify_basis(X: TensorField, basis: Iterable[TensorField]) -> bool:
    return all(lie_derivative(X, B).is_zero() for B in basis)


def nullspace(system: LinearSystem, X: TensorField | None = None) -> NullspaceBasis:
    """Fraction-free reduction, primitive basis vectors, optional re-verification."""
    res = reduce_rows(system.rows, system.ncols)
    vecs = res.nullspace()
    basis = [system.ansatz.instantiate(v) for v in vecs]
    nb = NullspaceBasis(basis, vecs, len(system.rows), system.ncols, res.rank, res.blocks, system.ansatz)
    if X is not None:
        nb.verified = verify_basis(X, basis)
        if not nb.verified:
            raise ArithmeticError("a nullspace vector fails the invariance equation")
    return nb


def flatten_many(tensors: Sequence[TensorField]) -> list[dict]:
    """Upper-triangle components split over basis terms, ``{(idx, key): coeff}``,
    with ``rho`` denominators cleared to a power common to all tensors."""
    depth = rho_depth([v for T in tensors for _, v in T.nonzero()])
    out = []
    for T in tensors:
        flat = {}
        for idx, v in T.nonzero():
            if T.skew and list(idx) != sorted(set(idx)):
                continue
            for key, c in lift_terms(v, depth).items():
                flat[(idx, key)] = c
        out.append(flat)
    return out


def span_contains(basis: Sequence[TensorField], T: TensorField) -> list | None:
    """Exact coefficients expressing ``T`` in ``basis``, or None when outside the span."""
    flats = flatten_many(list(basis) + [T])
    return solve_combination(flats[:-1], flats[-1])


@dataclass
class SolveResult:
    system: SystemDef
    spec: AnsatzSpec
    linear: LinearSystem
    basis: NullspaceBasis
    escalations: list = field(default_factory=list)
    function_count: int = 0


def solve(s: SystemDef, spec: AnsatzSpec | None = None, escalate: bool = True,
          max_qdeg: int = 3) -> SolveResult:
    """Assemble and solve; with ``escalate`` raise the q-degree while the paper's
    expected dimension is not reached (only for default menus)."""
    auto = spec is None
    spec = spec or default_ansatz(s)
    history = []
    while True:
        Pb = build_ansatz(spec)
        lin = assemble(s.vector_field, Pb)
        nb = nullspace(lin, s.vector_field)
        if (auto and escalate and s.expected_nullity is not None and nb.dimension < s.expected_nullity
                and spec.menu.get("qdeg", max_qdeg) < max_qdeg):
            history.append({"qdeg": spec.menu["qdeg"], "nullity": nb.dimension})
            spec = default_ansatz(s, qdeg=spec.menu["qdeg"] + 1)
            continue
        return SolveResult(s, spec, lin, nb, history, Pb.function_count())


# ---------------------------------------------------------------------------
# Jacobi analysis

@dataclass
class JacobiSystem:
    basis: list
    table: dict                  # (j, k) with j <= k -> trivector
    equations: dict              # (component, key) -> {(j, k): coeff}

    def bracket(self, u: Sequence) -> TensorField:
        """``[[sum u_j B_j, same]] = sum_{j,k} u_j u_k Q_jk`` from the table."""
        n = len(self.basis)
        out = None
        for j in range(n):
            for k in range(j, n):
                w = u[j] * u[k] * (1 if j == k else 2)
                if w == 0:
                    continue
                term = self.table[(j, k)] * w
                out = term if out is None else out + term
        if out is None:
            out = schouten_bracket(CANONICAL.P * 0, CANONICAL.P * 0)
        return out

    def verify_point(self, u: Sequence) -> bool:
        """Exact check that the combination ``sum u_j B_j`` satisfies the Jacobi identity."""
        if len(u) != len(self.basis):
            raise ValueError("parameter vector has the wrong length")
        for coeffs in self.equations.values():
            total = 0
            for (j, k), c in coeffs.items():
                if u[j] != 0 and u[k] != 0:
                    total = total + c * u[j] * u[k]
            if total != 0:
                return False
        return True

    def verify_bivector(self, T: TensorField) -> bool:
        u = span_contains(self.basis, T)
        if u is None:
            raise ValueError("bivector is outside the analysed span")
        return self.verify_point(u)

    def enumerate_grid(self, candidates: Sequence[Sequence]) -> list[tuple]:
        """All nonzero points of the finite grid ``prod candidates[j]`` satisfying Jacobi."""
        if len(candidates) != len(self.basis):
            raise ValueError("one candidate list per basis element")
        return [pt for pt in itertools.product(*candidates)
                if any(c != 0 for c in pt) and self.verify_point(pt)]

    def findings(self) -> dict:
        n = len(self.basis)
        return {
            "equations": len(self.equations),
            "poisson_basis_elements": [j for j in range(n) if self.table[(j, j)].is_zero()],
            "compatible_pairs": [[j, k] for (j, k), Q in sorted(self.table.items()) if j < k and Q.is_zero()],
        }


def jacobi_analysis(basis: NullspaceBasis | Sequence[TensorField]) -> JacobiSystem:
    B = basis.basis if isinstance(basis, NullspaceBasis) else list(basis)
    if not B:
        raise ValueError("empty basis")
    table = {}
    for j in range(len(B)):
        for k in range(j, len(B)):
            table[(j, k)] = schouten_bracket(B[j], B[k])
    equations: dict = {}
    for comp in TRIPLES:
        combo = {}
        for (j, k), Q in table.items():
            v = Q[comp]
            if not v.is_zero():
                combo[(j, k)] = v if j == k else v * 2
        for key, coeffs in coefficient_split(combo).items():
            equations[(comp, key)] = coeffs
    return JacobiSystem(B, table, equations)


# ---------------------------------------------------------------------------
# Verification reports

@dataclass
class InvariantReport:
    passed: bool
    component: tuple | None = None
    value: str | None = None

    def as_dict(self) -> dict:
        comp = None if self.component is None else "".join(str(i + 1) for i in self.component)
        return {"passed": self.passed, "component": comp, "value": self.value}


def verify_invariant(X: TensorField, T) -> InvariantReport:
    """Zero witness, or the first nonzero component of ``L_X T``."""
    L = lie_derivative(X, T)
    if isinstance(L, GF):
        return InvariantReport(L.is_zero(), None if L.is_zero() else (), None if L.is_zero() else L.to_text())
    nz = first_nonzero(L)
    if nz is None:
        return InvariantReport(True)
    return InvariantReport(False, nz[0], nz[1].to_text())


@dataclass
class NumericJacobiReport:
    max_residual: float
    compatibility_residual: float | None
    points: int
    resampled: int
    tol: float

    @property
    def passed(self) -> bool:
        ok = self.max_residual < self.tol
        if self.compatibility_residual is not None:
            ok = ok and self.compatibility_residual < self.tol
        return ok

    def as_dict(self) -> dict:
        comp = None if self.compatibility_residual is None else float(self.compatibility_residual)
        return {"max_residual": float(self.max_residual), "compatibility_residual": comp,
                "points": self.points, "resampled": self.resampled, "tol": self.tol, "passed": bool(self.passed)}


class _ScaledBivector:
    """Numeric evaluator for ``H^s * T`` and its gradient with the chain rule."""

    def __init__(self, T: TensorField, H: GF, exponent):
        self.s = float(exponent)
        ent = [T[i, j] for i, j in PAIRS]
        dent = [f.derive(l) for f in ent for l in range(DIM)]
        self._f = compile_functions(ent + dent + [H] + H.gradient())

    def __call__(self, x):
        vals = self._f(*x)
        n = len(PAIRS)
        ent = vals[:n]
        dent = vals[n:n + n * DIM]
        H = vals[n + n * DIM]
        dH = vals[n + n * DIM + 1:]
        if H <= 0:
            raise ValueError("H must be positive")
        Hs = H ** self.s
        Hs1 = self.s * H ** (self.s - 1) if self.s else 0.0
        A = np.zeros((DIM, DIM))
        dA = np.zeros((DIM, DIM, DIM))
        for m, (i, j) in enumerate(PAIRS):
            A[i, j], A[j, i] = Hs * ent[m], -Hs * ent[m]
            for l in range(DIM):
                g = Hs1 * dH[l] * ent[m] + Hs * dent[m * DIM + l]
                dA[i, j, l], dA[j, i, l] = g, -g
        return A, dA


def numeric_bracket(A, dA, B, dB) -> float:
    """Max over ``i < j < k`` of the polarized Schouten bracket at one point."""
    worst = 0.0
    for i, j, k in TRIPLES:
        v = 0.0
        for a, b, c in ((i, j, k), (j, k, i), (k, i, j)):
            v += A[a] @ dB[b, c] + B[a] @ dA[b, c]
        worst = max(worst, abs(v))
    return worst


def sample_positive_energy(H: GF, n: int, rng: np.random.Generator, box: float = 1.0,
                           max_draws: int = 100000) -> tuple[list, int]:
    """Uniform points in ``[-box, box]^4`` with ``H > 0``; returns points and rejects."""
    f = compile_functions([H])
    pts, rejected = [], 0
    while len(pts) < n:
        if rejected > max_draws:
            raise RuntimeError("could not sample enough points with H > 0")
        x = rng.uniform(-box, box, DIM)
        if f(*x)[0] > 0:
            pts.append(x)
        else:
            rejected += 1
    return pts, rejected


def verify_jacobi_scaled_numeric(Pt: TensorField, exponent, H: GF, points: Sequence | None = None,
                                 tol: float = 1e-9, compatible_with: tuple | None = None,
                                 n_points: int = 100, seed: int = 0) -> NumericJacobiReport:
    """Jacobi residual of ``H^exponent * Pt``; optionally the residual of its
    bracket with ``H^t * Q`` for ``compatible_with = (Q, t)``."""
    rng = np.random.default_rng(seed)
    resampled = 0
    f = compile_functions([H])
    good = []
    for x in points or []:
        if f(*x)[0] > 0:
            good.append(np.asarray(x, float))
        else:
            resampled += 1
    if len(good) < (n_points if points is None else len(points)):
        extra, rej = sample_positive_energy(H, (n_points if points is None else len(points)) - len(good), rng)
        good += extra
        resampled += rej
    A_eval = _ScaledBivector(Pt, H, exponent)
    B_eval = _ScaledBivector(compatible_with[0], H, compatible_with[1]) if compatible_with else None
    jac = comp = 0.0
    for x in good:
        A, dA = A_eval(x)
        jac = max(jac, numeric_bracket(A, dA, A, dA))
        if B_eval is not None:
            B, dB = B_eval(x)
            comp = max(comp, numeric_bracket(A, dA, B, dB))
    return NumericJacobiReport(jac, comp if B_eval else None, len(good), resampled, tol)


# ---------------------------------------------------------------------------
# Reports

def expected_span_check(result: SolveResult) -> dict:
    out = {}
    for label, T in result.system.expected_span.items():
        coeffs = span_contains(result.basis.basis, T)
        out[label] = coeffs is not None
    return out


def solver_report(result: SolveResult, jacobi: JacobiSystem | None = None) -> dict:
    nb = result.basis
    rep = {
        "system": result.system.name,
        "parameters": {k: _param_text(v) for k, v in result.system.parameters.items()},
        "spec_digest": result.spec.digest(),
        "menu": result.spec.menu,
        "unknowns": result.linear.ansatz.unknown_count,
        "unknown_functions": result.function_count,
        "equation_families": len(result.linear.equation_families()),
        **nb.stats(),
        "verified": nb.verified,
        "escalations": result.escalations,
        "basis": [components_text(B) for B in nb.basis],
    }
    if result.system.expected_nullity is not None:
        rep["expected_nullity"] = result.system.expected_nullity
    if result.system.expected_span:
        rep["expected_span"] = expected_span_check(result)
    if jacobi is not None:
        rep["jacobi"] = jacobi.findings()
    return rep


def _param_text(v):
    if isinstance(v, (list, tuple)):
        return [_param_text(x) for x in v]
    if isinstance(v, bool):
        return v
    return scalar_text(v) if not isinstance(v, GF) else v.to_text()


def basis_text(nb: NullspaceBasis) -> str:
    return "\n\n".join(pretty(B, f"B{j}") for j, B in enumerate(nb.basis))
