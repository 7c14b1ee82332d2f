"""Tensor calculus on the four-dimensional phase space.

Conventions
-----------
Coordinates are ``x = (q1, q2, p1, p2)`` with 0-based axes.  A tensor of type
``(p, q)`` stores all ``4**(p+q)`` components in a numpy object array whose
first ``p`` axes are contravariant.

* Canonical bivector ``P = [[0, I], [-I, 0]]`` and canonical 2-form matrix
  ``J_omega = [[0, -I], [I, 0]]``, so ``P @ J_omega`` is the identity.
* A 2-form ``w`` has components ``w_ij`` and the coefficient of
  ``dx^i ^ dx^j`` (``i < j``) is ``w_ij``.
* Wedge products use the shuffle normalization,
  ``(U ^ V)^{ij} = U^i V^j - U^j V^i``.  For a 2-form, ``(w ^ w)_{0123}``
  is twice its Pfaffian.
* The interior product contracts the first slot:
  ``(i_X w)_j = X^i w_ij``.  With these choices ``i_X omega = -dH`` for
  ``X = P dH``.
* ``(dw)_{i0..ik} = sum_a (-1)^a d_{i_a} w_{i0..(no i_a)..ik}``.
* Schouten bracket of bivectors, polarized and symmetric in its arguments:
  ``[[A, B]]^{ijk} = sum_l cyc_{ijk}(A^{il} d_l B^{jk} + B^{il} d_l A^{jk})``,
  so that ``[[P, P]]`` is twice the cyclic Jacobiator of ``P``.
* Pfaffian of a 4x4 skew array: ``A01 A23 - A02 A13 + A03 A12``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Iterator, Sequence

import numpy as np

from .funcalg import ONE, ZERO, GeneralizedFunction, as_scalar

DIM = 4
LABELS = ("q1", "q2", "p1", "p2")


class ContractViolation(ValueError):
    """An operation's precondition on tensor type or symmetry is not met."""


def _perm_sign(perm: Sequence[int]) -> int:
    sign = 1
    perm = list(perm)
    for i in range(len(perm)):
        while perm[i] != i:
            j = perm[i]
            perm[i], perm[j] = perm[j], perm[i]
            sign = -sign
    return sign


def _empty(order: int) -> np.ndarray:
    arr = np.empty((DIM,) * order, dtype=object)
    arr.fill(ZERO)
    return arr


def _coerce_array(components, order: int) -> np.ndarray:
    arr = np.empty((DIM,) * order, dtype=object)
    src = np.asarray(components, dtype=object)
    if src.shape != (DIM,) * order:
        raise ContractViolation(f"components must have shape {(DIM,) * order}, got {src.shape}")
    for idx in np.ndindex(*arr.shape) if order else [()]:
        arr[idx] = GeneralizedFunction.coerce(src[idx])
    return arr


class TensorField:
    """A ``(p, q)`` tensor field with components in the function ring."""

    __slots__ = ("contravariant_order", "covariant_order", "components", "skew")

    def __init__(self, components, contravariant_order: int, covariant_order: int = 0,
                 skew: bool = False, *, _trusted: bool = False):
        order = contravariant_order + covariant_order
        self.contravariant_order = contravariant_order
        self.covariant_order = covariant_order
        self.components = components if _trusted else _coerce_array(components, order)
        self.skew = skew
        if skew and contravariant_order and covariant_order:
            raise ContractViolation("mixed tensors cannot be declared alternating")
        if skew and not self.is_antisymmetric():
            raise ContractViolation("components are not antisymmetric")

    # ------------------------------------------------------------------
    @property
    def order(self) -> int:
        return self.contravariant_order + self.covariant_order

    @property
    def type(self) -> tuple[int, int]:
        return (self.contravariant_order, self.covariant_order)

    def __getitem__(self, idx):
        return self.components[idx]

    def indices(self) -> Iterator[tuple]:
        return np.ndindex(*self.components.shape) if self.order else iter([()])

    def nonzero(self) -> Iterator[tuple[tuple, GeneralizedFunction]]:
        for idx in self.indices():
            v = self.components[idx]
            if not v.is_zero():
                yield idx, v

    def is_zero(self) -> bool:
        return all(False for _ in self.nonzero())

    def is_antisymmetric(self) -> bool:
        n = self.order
        for idx in self.indices():
            for a in range(n - 1):
                swapped = idx[:a] + (idx[a + 1], idx[a]) + idx[a + 2:]
                if self.components[idx] != -self.components[swapped]:
                    return False
        return True

    def map(self, fn: Callable[[GeneralizedFunction], GeneralizedFunction]) -> "TensorField":
        arr = _empty(self.order)
        for idx in self.indices():
            arr[idx] = fn(self.components[idx])
        return TensorField(arr, *self.type, skew=self.skew, _trusted=True)

    def _same_type(self, other: "TensorField") -> None:
        if not isinstance(other, TensorField) or other.type != self.type:
            raise ContractViolation("tensor types differ")

    def __add__(self, other: "TensorField") -> "TensorField":
        self._same_type(other)
        return TensorField(self.components + other.components, *self.type,
                           skew=self.skew and other.skew, _trusted=True)

    def __sub__(self, other: "TensorField") -> "TensorField":
        self._same_type(other)
        return TensorField(self.components - other.components, *self.type,
                           skew=self.skew and other.skew, _trusted=True)

    def __neg__(self) -> "TensorField":
        return self.map(lambda v: -v)

    def __mul__(self, f) -> "TensorField":
        """Multiply every component by a function or exact scalar."""
        f = GeneralizedFunction.coerce(f)
        return self.map(lambda v: v * f)

    __rmul__ = __mul__

    def __eq__(self, other) -> bool:
        if not isinstance(other, TensorField) or other.type != self.type:
            return NotImplemented
        return all(self.components[i] == other.components[i] for i in self.indices())

    __hash__ = None

    def matrix(self) -> list[list[GeneralizedFunction]]:
        if self.order != 2:
            raise ContractViolation("matrix view needs a tensor of total order 2")
        return [[self.components[i, j] for j in range(DIM)] for i in range(DIM)]

    def evaluate(self, x: Sequence[float]) -> np.ndarray:
        """Numeric components at ``x`` (complex dtype when any value is complex)."""
        from .funcalg import compile_functions

        idxs = list(self.indices())
        vals = compile_functions([self.components[i] for i in idxs])(*x)
        dtype = complex if any(isinstance(v, complex) for v in vals) else float
        out = np.zeros((DIM,) * self.order, dtype=dtype)
        for i, v in zip(idxs, vals):
            out[i] = v
        return out

    def pretty(self, name: str = "T") -> str:
        return pretty(self, name)

    def __repr__(self) -> str:
        return f"TensorField(type={self.type}, skew={self.skew}, nonzero={sum(1 for _ in self.nonzero())})"


# ---------------------------------------------------------------------------
# Constructors

def vector(components: Sequence) -> TensorField:
    return TensorField(list(components), 1, 0)


def one_form(components: Sequence) -> TensorField:
    return TensorField(list(components), 0, 1)


def _skew_from_upper(entries: dict, order: int) -> np.ndarray:
    arr = _empty(order)
    for idx, v in entries.items():
        v = GeneralizedFunction.coerce(v)
        if len(set(idx)) != len(idx):
            if not v.is_zero():
                raise ContractViolation("alternating tensor with a repeated index")
            continue
        for perm in itertools.permutations(range(order)):
            arr[tuple(idx[p] for p in perm)] = v if _perm_sign(perm) > 0 else -v
    return arr


def bivector(entries: dict) -> TensorField:
    """Skew (2,0) field from ``{(i, j): value}`` with ``i < j`` (0-based)."""
    return TensorField(_skew_from_upper(entries, 2), 2, 0, skew=True, _trusted=True)


def two_form(entries: dict) -> TensorField:
    """Skew (0,2) field from ``{(i, j): value}`` with ``i < j`` (0-based)."""
    return TensorField(_skew_from_upper(entries, 2), 0, 2, skew=True, _trusted=True)


def skew_from_matrix(rows: Sequence[Sequence], covariant: bool = False) -> TensorField:
    t = (0, 2) if covariant else (2, 0)
    return TensorField([list(r) for r in rows], *t, skew=True)


def scalar_field(f) -> TensorField:
    arr = np.empty((), dtype=object)
    arr[()] = GeneralizedFunction.coerce(f)
    return TensorField(arr, 0, 0, _trusted=True)


@dataclass(frozen=True)
class NamedFrame:
    """Coordinate ordering together with the canonical structures.

    ``P`` is the canonical Poisson bivector and ``J_omega`` the matrix of the
    canonical symplectic form, with ``P @ J_omega = Id`` exactly.
    """

    ordering: tuple[str, ...]
    P: TensorField
    J_omega: TensorField

    def identity(self) -> TensorField:
        return identity_operator()


def identity_operator() -> TensorField:
    arr = _empty(2)
    for i in range(DIM):
        arr[i, i] = ONE
    return TensorField(arr, 1, 1, _trusted=True)


def _canonical() -> NamedFrame:
    P = bivector({(0, 2): 1, (1, 3): 1})
    J = two_form({(0, 2): -1, (1, 3): -1})
    return NamedFrame(LABELS, P, J)


CANONICAL = _canonical()


def canonical_bivector() -> TensorField:
    return CANONICAL.P


def canonical_form() -> TensorField:
    return CANONICAL.J_omega


# ---------------------------------------------------------------------------
# Differential operators

def _jacobian(X: TensorField) -> list[list[GeneralizedFunction]]:
    """``DX[a][l] = d_l X^a``."""
    return [[X.components[a].derive(l) for l in range(DIM)] for a in range(DIM)]


def _require_vector(X: TensorField) -> None:
    if not isinstance(X, TensorField) or X.type != (1, 0):
        raise ContractViolation("expected a vector field")


def directional(X: TensorField, f: GeneralizedFunction) -> GeneralizedFunction:
    """``X(f) = X^k d_k f``."""
    _require_vector(X)
    out = ZERO
    for k in range(DIM):
        if not X.components[k].is_zero():
            df = f.derive(k)
            if not df.is_zero():
                out = out + X.components[k] * df
    return out


def lie_derivative(X: TensorField, T):
    """Lie derivative of a ``(p, q)`` tensor (or a scalar function) along ``X``.

    Component formula::

        (L_X T)^{a..}_{b..} = X^k d_k T^{a..}_{b..}
                              - sum over upper slots  d_l X^a  T^{..l..}_{b..}
                              + sum over lower slots  d_b X^l  T^{a..}_{..l..}
    """
    _require_vector(X)
    if isinstance(T, GeneralizedFunction):
        return directional(X, T)
    if T.order == 0:
        return scalar_field(directional(X, T.components[()]))
    DX = _jacobian(X)
    p, q = T.type
    acc: dict = {}

    def add(idx, v):
        cur = acc.get(idx)
        acc[idx] = v if cur is None else cur + v

    for idx, t in T.nonzero():
        add(idx, directional(X, t))
        for s in range(p):
            l = idx[s]
            for a in range(DIM):
                g = DX[a][l]
                if not g.is_zero():
                    add(idx[:s] + (a,) + idx[s + 1:], -(g * t))
        for s in range(p, p + q):
            l = idx[s]
            for b in range(DIM):
                g = DX[l][b]
                if not g.is_zero():
                    add(idx[:s] + (b,) + idx[s + 1:], g * t)
    arr = _empty(T.order)
    for idx, v in acc.items():
        arr[idx] = v
    return TensorField(arr, p, q, skew=T.skew, _trusted=True)


def _require_skew(T: TensorField, t: tuple[int, int]) -> None:
    if not isinstance(T, TensorField) or T.type != t:
        raise ContractViolation(f"expected a tensor of type {t}")
    if not T.skew and not T.is_antisymmetric():
        raise ContractViolation("argument is not alternating")


def schouten_bracket(A: TensorField, B: TensorField) -> TensorField:
    """Schouten bracket of two bivectors; see the module docstring for the convention."""
    _require_skew(A, (2, 0))
    _require_skew(B, (2, 0))
    dA = [[[A.components[i, j].derive(l) for l in range(DIM)] for j in range(DIM)] for i in range(DIM)]
    dB = [[[B.components[i, j].derive(l) for l in range(DIM)] for j in range(DIM)] for i in range(DIM)]

    def term(i, j, k):
        out = ZERO
        for l in range(DIM):
            a, b = A.components[i, l], B.components[i, l]
            if not a.is_zero():
                g = dB[j][k][l]
                if not g.is_zero():
                    out = out + a * g
            if not b.is_zero():
                g = dA[j][k][l]
                if not g.is_zero():
                    out = out + b * g
        return out

    entries = {}
    for i, j, k in itertools.combinations(range(DIM), 3):
        entries[(i, j, k)] = term(i, j, k) + term(j, k, i) + term(k, i, j)
    return TensorField(_skew_from_upper(entries, 3), 3, 0, skew=True, _trusted=True)


def wedge(U: TensorField, V: TensorField) -> TensorField:
    """Alternating product with the shuffle normalization.

    Both arguments must be alternating and of the same variance (vectors and
    1-forms count as alternating).
    """
    for T in (U, V):
        if T.contravariant_order and T.covariant_order:
            raise ContractViolation("wedge needs purely contravariant or covariant fields")
        if T.order >= 2 and not (T.skew or T.is_antisymmetric()):
            raise ContractViolation("wedge needs alternating arguments")
    upper = U.contravariant_order > 0 or V.contravariant_order > 0
    if upper and (U.covariant_order or V.covariant_order):
        raise ContractViolation("cannot wedge a multivector with a form")
    k, l = U.order, V.order
    n = k + l
    if n > DIM:
        return TensorField(_empty(n), *((n, 0) if upper else (0, n)), skew=True, _trusted=True)
    shuffles = []
    for S in itertools.combinations(range(n), k):
        rest = tuple(i for i in range(n) if i not in S)
        shuffles.append((S, rest, _perm_sign(S + rest)))
    entries = {}
    for idx in itertools.combinations(range(DIM), n):
        out = ZERO
        for S, rest, sign in shuffles:
            a = U.components[tuple(idx[s] for s in S)]
            b = V.components[tuple(idx[s] for s in rest)]
            if a.is_zero() or b.is_zero():
                continue
            out = out + a * b if sign > 0 else out - a * b
        entries[idx] = out
    arr = _skew_from_upper(entries, n)
    t = (n, 0) if upper else (0, n)
    return TensorField(arr, *t, skew=True, _trusted=True)


def interior_product(X: TensorField, w: TensorField) -> TensorField:
    """Contract the vector ``X`` into the first slot of the form ``w``."""
    _require_vector(X)
    if w.contravariant_order or w.covariant_order < 1:
        raise ContractViolation("interior product needs a form of degree >= 1")
    q = w.covariant_order
    arr = _empty(q - 1)
    for rest in (np.ndindex(*(DIM,) * (q - 1)) if q > 1 else [()]):
        out = ZERO
        for i in range(DIM):
            xi, c = X.components[i], w.components[(i,) + rest]
            if not xi.is_zero() and not c.is_zero():
                out = out + xi * c
        arr[rest] = out
    return TensorField(arr, 0, q - 1, skew=w.skew and q - 1 >= 2, _trusted=True)


def exterior_derivative(w) -> TensorField:
    """Exterior derivative of a function or a k-form, k <= 3."""
    if isinstance(w, GeneralizedFunction):
        w = scalar_field(w)
    if w.contravariant_order:
        raise ContractViolation("exterior derivative acts on forms")
    k = w.covariant_order
    if k > 3:
        raise ContractViolation("degree must be at most 3")
    if k >= 2 and not (w.skew or w.is_antisymmetric()):
        raise ContractViolation("form is not alternating")
    if k == 0:
        f = w.components[()]
        return one_form([f.derive(s) for s in range(DIM)])
    entries = {}
    for idx in itertools.combinations(range(DIM), k + 1):
        out = ZERO
        for a in range(k + 1):
            rest = idx[:a] + idx[a + 1:]
            g = w.components[rest].derive(idx[a])
            out = out + g if a % 2 == 0 else out - g
        entries[idx] = out
    return TensorField(_skew_from_upper(entries, k + 1), 0, k + 1, skew=True, _trusted=True)


def differential(f: GeneralizedFunction) -> TensorField:
    return exterior_derivative(f)


def bivector_apply(A: TensorField, df: TensorField) -> TensorField:
    """``(A df)^i = sum_j A^{ij} df_j``."""
    if A.type != (2, 0) or df.type != (0, 1):
        raise ContractViolation("expected a bivector and a 1-form")
    comps = []
    for i in range(DIM):
        out = ZERO
        for j in range(DIM):
            a, c = A.components[i, j], df.components[j]
            if not a.is_zero() and not c.is_zero():
                out = out + a * c
        comps.append(out)
    return vector(comps)


def hamiltonian_vector_field(H: GeneralizedFunction, P: TensorField | None = None) -> TensorField:
    return bivector_apply(CANONICAL.P if P is None else P, exterior_derivative(H))


def compose(A: TensorField, w: TensorField) -> TensorField:
    """``N^i_j = sum_k A^{ik} w_kj`` as a (1,1) tensor."""
    if A.type != (2, 0) or w.type != (0, 2):
        raise ContractViolation("expected a bivector and a 2-form")
    arr = _empty(2)
    for i in range(DIM):
        for j in range(DIM):
            out = ZERO
            for k in range(DIM):
                a, c = A.components[i, k], w.components[k, j]
                if not a.is_zero() and not c.is_zero():
                    out = out + a * c
            arr[i, j] = out
    return TensorField(arr, 1, 1, _trusted=True)


def trace(N: TensorField) -> GeneralizedFunction:
    if N.type != (1, 1):
        raise ContractViolation("trace needs a (1,1) tensor")
    out = ZERO
    for i in range(DIM):
        out = out + N.components[i, i]
    return out


def compose_trace(A: TensorField, w: TensorField) -> tuple[TensorField, GeneralizedFunction]:
    N = compose(A, w)
    return N, trace(N)


def pfaffian(A: TensorField) -> GeneralizedFunction:
    if A.order != 2 or A.contravariant_order == 1:
        raise ContractViolation("Pfaffian needs a skew 4x4 tensor")
    c = A.components
    return c[0, 1] * c[2, 3] - c[0, 2] * c[1, 3] + c[0, 3] * c[1, 2]


def pfaffian_rank(A: TensorField) -> tuple[GeneralizedFunction, int]:
    """Pfaffian and generic rank (0, 2 or 4) of a skew 4x4 bivector or 2-form."""
    _require_skew(A, A.type)
    pf = pfaffian(A)
    if not pf.is_zero():
        return pf, 4
    return pf, 0 if A.is_zero() else 2


def cofactor_form(A: TensorField) -> TensorField:
    """The 2-form ``C`` with ``A C = Pf(A) Id`` for a skew 4x4 bivector ``A``.

    ``C_ij = -(1/2) eps_{ijkl} A^{kl}`` (Levi-Civita symbol on 0-based axes).
    """
    _require_skew(A, (2, 0))
    entries = {}
    for i, j in itertools.combinations(range(DIM), 2):
        k, l = (m for m in range(DIM) if m not in (i, j))
        eps = _perm_sign((i, j, k, l))
        entries[(i, j)] = -A.components[k, l] if eps > 0 else A.components[k, l]
    return two_form(entries)


def nijenhuis_torsion(N: TensorField) -> TensorField:
    """Torsion ``T^i_{jk}`` of a (1,1) tensor, stored as a (1,2) field.

    ``T^i_{jk} = N^l_j d_l N^i_k - N^l_k d_l N^i_j - N^i_l (d_j N^l_k - d_k N^l_j)``.
    """
    if N.type != (1, 1):
        raise ContractViolation("Nijenhuis torsion needs a (1,1) tensor")
    c = N.components
    dN = [[[c[i, j].derive(l) for l in range(DIM)] for j in range(DIM)] for i in range(DIM)]
    arr = _empty(3)
    for i in range(DIM):
        for j in range(DIM):
            for k in range(j + 1, DIM):
                out = ZERO
                for l in range(DIM):
                    out = out + c[l, j] * dN[i][k][l] - c[l, k] * dN[i][j][l]
                    out = out - c[i, l] * (dN[l][k][j] - dN[l][j][k])
                arr[i, j, k] = out
                arr[i, k, j] = -out
    return TensorField(arr, 1, 2, _trusted=True)


# ---------------------------------------------------------------------------
# Printing

def _index_text(idx, p) -> str:
    up = "".join(str(i + 1) for i in idx[:p])
    down = "".join(str(i + 1) for i in idx[p:])
    return (f"^{{{up}}}" if up else "") + (f"_{{{down}}}" if down else "")


def pretty(T: TensorField, name: str = "T") -> str:
    """Deterministic component listing with 1-based index labels.

    Alternating tensors list only strictly increasing index tuples.
    """
    lines = []
    for idx, v in T.nonzero():
        if T.skew and list(idx) != sorted(set(idx)):
            continue
        lines.append(f"{name}{_index_text(idx, T.contravariant_order)} = {v.to_text()}")
    if not lines:
        lines.append(f"{name} = 0")
    return "\n".join(lines)


def components_text(T: TensorField) -> dict:
    """Mapping from 1-based index label to component text (for JSON reports)."""
    out = {}
    for idx, v in T.nonzero():
        if T.skew and list(idx) != sorted(set(idx)):
            continue
        out["".join(str(i + 1) for i in idx)] = v.to_text()
    return out


def first_nonzero(T: TensorField):
    """First nonzero component in index order, as ``(index, value)`` or None."""
    for idx, v in T.nonzero():
        return idx, v
    return None


def scalar(c) -> GeneralizedFunction:
    return GeneralizedFunction.constant(as_scalar(c))
