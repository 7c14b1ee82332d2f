from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tensorinv.funcalg import ONE, ZERO, GeneralizedFunction, MonomialKey, p1, p2, q1, q2, r, rho_power
from tensorinv.tensor import (
    CANONICAL,
    ContractViolation,
    TensorField,
    bivector,
    bivector_apply,
    canonical_bivector,
    canonical_form,
    cofactor_form,
    components_text,
    compose,
    compose_trace,
    exterior_derivative,
    hamiltonian_vector_field,
    identity_operator,
    interior_product,
    lie_derivative,
    nijenhuis_torsion,
    one_form,
    pfaffian_rank,
    pretty,
    schouten_bracket,
    skew_from_matrix,
    trace,
    two_form,
    vector,
    wedge,
)

GF = GeneralizedFunction
PAIRS = [(i, j) for i in range(4) for j in range(i + 1, 4)]


@st.composite
def polys(draw, max_terms=3):
    keys = st.tuples(st.integers(0, 2), st.integers(0, 2), st.integers(0, 1), st.integers(0, 1)).map(
        lambda e: MonomialKey(*e))
    terms = draw(st.dictionaries(keys, st.integers(-3, 3), max_size=max_terms))
    return GF(terms)


vectors = st.lists(polys(), min_size=4, max_size=4).map(vector)
bivectors = st.lists(polys(2), min_size=6, max_size=6).map(lambda c: bivector(dict(zip(PAIRS, c))))
two_forms = st.lists(polys(2), min_size=6, max_size=6).map(lambda c: two_form(dict(zip(PAIRS, c))))


def henon_heiles_field(a=1, b=1):
    V = q1() * (q2() ** 2 * a + q1() ** 2 * b)
    H = (p1() ** 2 + p2() ** 2) / 2 + V
    return H, hamiltonian_vector_field(H)


# ---------------------------------------------------------------------------
# Construction and contracts

def test_skew_flag_is_verified():
    with pytest.raises(ContractViolation):
        skew_from_matrix([[0, 1, 0, 0], [1, 0, 0, 0], [0, 0, 0, 0], [0, 0, 0, 0]])


def test_schouten_rejects_non_skew():
    M = TensorField([[q1() if i == j else ZERO for j in range(4)] for i in range(4)], 2, 0)
    with pytest.raises(ContractViolation):
        schouten_bracket(M, CANONICAL.P)


def test_component_count():
    assert sum(1 for _ in canonical_bivector().indices()) == 16
    assert sum(1 for _ in schouten_bracket(CANONICAL.P, CANONICAL.P).indices()) == 64


def test_frame_duality():
    # P J_omega = Id in the pinned frame
    assert compose(CANONICAL.P, CANONICAL.J_omega) == identity_operator()
    N, tr = compose_trace(CANONICAL.P, CANONICAL.J_omega)
    assert tr == GF.constant(4)


# ---------------------------------------------------------------------------
# Lie derivative

def test_canonical_bivector_invariant():
    H, X = henon_heiles_field()
    assert lie_derivative(X, CANONICAL.P).is_zero()
    assert lie_derivative(X, H).is_zero()


def test_lie_derivative_of_function_is_directional():
    _, X = henon_heiles_field()
    f = q1() * p2()
    assert lie_derivative(X, f) == sum((X[i] * f.derive(i) for i in range(4)), ZERO)


@settings(max_examples=25, deadline=None)
@given(vectors, polys(), bivectors)
def test_leibniz_rule(X, f, T):
    assert lie_derivative(X, T * f) == T * lie_derivative(X, f) + lie_derivative(X, T) * f


@settings(max_examples=25, deadline=None)
@given(vectors, st.lists(polys(), min_size=4, max_size=4))
def test_naturality_one_forms(X, comps):
    w = one_form(comps)
    assert lie_derivative(X, exterior_derivative(w)) == exterior_derivative(lie_derivative(X, w))


@settings(max_examples=25, deadline=None)
@given(vectors, polys())
def test_naturality_functions(X, f):
    assert lie_derivative(X, exterior_derivative(f)) == exterior_derivative(lie_derivative(X, f))


@settings(max_examples=15, deadline=None)
@given(vectors, two_forms)
def test_lie_derivative_preserves_skew(X, w):
    assert lie_derivative(X, w).is_antisymmetric()


# ---------------------------------------------------------------------------
# Schouten bracket

def test_canonical_jacobi():
    assert schouten_bracket(CANONICAL.P, CANONICAL.P).is_zero()


def test_schouten_normalization():
    # [[A, A]]^{ijk} = 2 sum over cyclic (i,j,k) of A^{il} d_l A^{jk}
    A = bivector({(0, 1): q1() * q2(), (0, 2): p1() ** 2, (2, 3): q2()})
    S = schouten_bracket(A, A)
    for i, j, k in [(0, 1, 2), (0, 1, 3), (0, 2, 3), (1, 2, 3)]:
        expected = ZERO
        for a, b, c in ((i, j, k), (j, k, i), (k, i, j)):
            for l in range(4):
                expected = expected + A[a, l] * A[b, c].derive(l)
        assert S[i, j, k] == expected * 2


@settings(max_examples=20, deadline=None)
@given(bivectors, bivectors, st.fractions(-3, 3, max_denominator=3))
def test_schouten_symmetric_and_bilinear(A, B, c):
    assert schouten_bracket(A, B) == schouten_bracket(B, A)
    assert schouten_bracket(A * c + CANONICAL.P, B) == schouten_bracket(A, B) * c + schouten_bracket(CANONICAL.P, B)


def test_schouten_result_alternating():
    A = bivector({(0, 1): q1() * p2(), (1, 3): q2() ** 2})
    assert schouten_bracket(A, A).is_antisymmetric()


# ---------------------------------------------------------------------------
# Forms

def test_wedge_self_vanishes():
    X3 = vector([q1(), p2(), ONE, r()])
    assert wedge(X3, X3).is_zero()


def test_wedge_vectors_components():
    U = vector([q1(), ZERO, ONE, ZERO])
    V = vector([ZERO, p1(), ZERO, q2()])
    W = wedge(U, V)
    for i in range(4):
        for j in range(4):
            assert W[i, j] == U[i] * V[j] - U[j] * V[i]


def test_canonical_volume():
    vol = wedge(CANONICAL.J_omega, CANONICAL.J_omega)
    assert vol[0, 1, 2, 3] == GF.constant(-2)
    assert vol.is_antisymmetric()


def test_exterior_derivative_of_hamiltonian():
    H, _ = henon_heiles_field()
    dH = exterior_derivative(H)
    V = H - (p1() ** 2 + p2() ** 2) / 2
    assert [dH[i] for i in range(4)] == [V.derive(0), V.derive(1), p1(), p2()]
    assert exterior_derivative(canonical_form()).is_zero()


@settings(max_examples=30, deadline=None)
@given(polys(4))
def test_dd_vanishes_on_functions(f):
    assert exterior_derivative(exterior_derivative(f)).is_zero()


@settings(max_examples=20, deadline=None)
@given(two_forms)
def test_dd_vanishes_on_two_forms(w):
    assert exterior_derivative(exterior_derivative(w)).is_zero()


def test_interior_product_of_hamiltonian_field():
    # with J_omega = [[0,-I],[I,0]] and contraction on the first slot
    H, X = henon_heiles_field()
    assert interior_product(X, CANONICAL.J_omega) == exterior_derivative(H) * -1


@settings(max_examples=20, deadline=None)
@given(vectors, vectors)
def test_interior_product_antiderivation(X, Y):
    a = one_form([Y[i] for i in range(4)])
    b = one_form([X[i] * 2 - Y[i] for i in range(4)])
    lhs = interior_product(X, wedge(a, b))
    ia = sum((X[i] * a[i] for i in range(4)), ZERO)
    ib = sum((X[i] * b[i] for i in range(4)), ZERO)
    assert lhs == b * ia - a * ib


def test_bivector_apply_gives_hamiltonian_field():
    H, X = henon_heiles_field(2, 3)
    assert bivector_apply(CANONICAL.P, exterior_derivative(H)) == X
    assert X[0] == p1() and X[1] == p2()


# ---------------------------------------------------------------------------
# Pfaffian and cofactor

def test_pfaffian_of_canonical():
    # Pf = A12 A34 - A13 A24 + A14 A23 gives -1 for P = [[0, I], [-I, 0]]
    pf, rank = pfaffian_rank(CANONICAL.P)
    assert pf == GF.constant(-1) and rank == 4


def test_rank_two_and_zero():
    X = vector([q1(), ONE, ZERO, p1()])
    Y = vector([ZERO, q2(), ONE, ONE])
    pf, rank = pfaffian_rank(wedge(X, Y))
    assert pf.is_zero() and rank == 2
    assert pfaffian_rank(CANONICAL.P * 0)[1] == 0


@settings(max_examples=25, deadline=None)
@given(bivectors)
def test_cofactor_identity(A):
    pf, _ = pfaffian_rank(A)
    assert compose(A, cofactor_form(A)) == identity_operator() * pf


def test_trace_of_identity():
    assert trace(identity_operator()) == GF.constant(4)


def test_nijenhuis_torsion_of_constant_operator_vanishes():
    assert nijenhuis_torsion(identity_operator() * 3).is_zero()


def test_nijenhuis_torsion_detects_nonintegrable_operator():
    N = TensorField([[q2() if (i, j) == (0, 1) else (ONE if i == j else ZERO) for j in range(4)]
                     for i in range(4)], 1, 1)
    N2 = N * q1()
    assert not nijenhuis_torsion(N2 + compose(bivector({(0, 2): q2()}), canonical_form())).is_zero()


def test_kepler_radical_entries():
    f = r() * rho_power(-1)
    A = bivector({(0, 1): f, (2, 3): ONE})
    assert pfaffian_rank(A)[0] == f


# ---------------------------------------------------------------------------
# Printing

def test_pretty_is_deterministic_and_one_based():
    A = bivector({(0, 1): q1() * Fraction(1, 2), (2, 3): p2()})
    text = pretty(A, "A")
    assert text == pretty(A, "A")
    assert "A^{12} = 1/2*q1" in text
    assert "A^{34} = p2" in text
    assert components_text(A) == {"12": "1/2*q1", "34": "p2"}
