from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from mapgenus import CapExceeded, GaussianRational, Polynomial, Potential, SDSolver
from mapgenus.ncpoly import (TensorPolynomial, apply_Xi, canonical_rotation, cyclic_derivative,
                             degree_division, format_word, involution, is_cyclically_selfadjoint,
                             multiply, nc_derivative, neumann_inverse_apply, norm_M, parse_word,
                             xi0, xi0_inverse, xi1, xi2)

M = 2


def words(m=M, max_len=4):
    return st.lists(st.integers(1, m), max_size=max_len).map(tuple)


coeffs = st.builds(GaussianRational, st.fractions(-3, 3, max_denominator=4), st.fractions(-3, 3, max_denominator=4))
polys = st.dictionaries(words(), coeffs, max_size=4).map(lambda d: Polynomial(M, d))
real_polys = st.dictionaries(words(), st.fractions(-3, 3, max_denominator=4), max_size=4).map(
    lambda d: Polynomial(M, d))


def X(*letters, m=M, c=1):
    return Polynomial.monomial(letters, m, c)


def tensor(a, b, m=M, c=1):
    return TensorPolynomial(m, {(tuple(a), tuple(b)): c})


# -- words -------------------------------------------------------------

@pytest.mark.parametrize("text,word", [("X1*X2*X1", (1, 2, 1)), ("121", (1, 2, 1)), ("", ()), ("X2", (2,))])
def test_parse_word(text, word):
    assert parse_word(text, 2) == word


@pytest.mark.parametrize("bad", ["X3", "13", "X1**X2", "a1"])
def test_parse_word_rejects(bad):
    with pytest.raises(ValueError):
        parse_word(bad, 2)


@given(words(m=3, max_len=6))
def test_format_parse_roundtrip(w):
    assert parse_word(format_word(w), 3) == w
    assert parse_word(format_word(w, compact=False), 3) == w


@given(words(max_len=6))
def test_canonical_rotation_is_minimal_rotation(w):
    rots = [w[k:] + w[:k] for k in range(len(w))] or [()]
    assert canonical_rotation(w) == min(rots)


# -- algebra -----------------------------------------------------------

def test_multiply_examples():
    assert multiply(X(1), X(2)) == X(1, 2)
    P = X(1) + X(2, 1, c=3)
    assert multiply(Polynomial.one(M), P) == P
    assert multiply(X(1) + X(2), X(1)) == X(1, 1) + X(2, 1)
    with pytest.raises(ValueError):
        multiply(X(1), Polynomial.letter(1, 3))


def test_involution_examples():
    P = X(1, 2, c=GaussianRational(2, 1))
    assert involution(P) == X(2, 1, c=GaussianRational(2, -1))
    S = X(1, 2) + X(2, 1)
    assert involution(S) == S
    assert involution(Polynomial.one(M)) == Polynomial.one(M)


@given(polys, polys)
def test_involution_anti_automorphism(P, Q):
    assert involution(involution(P)) == P
    assert involution(P * Q) == involution(Q) * involution(P)


@given(polys, polys, polys)
def test_algebra_axioms(P, Q, R):
    assert (P * Q) * R == P * (Q * R)
    assert P * (Q + R) == P * Q + P * R
    assert P - P == Polynomial.zero(M)


def test_no_zero_coefficients_stored():
    P = X(1) + X(1, c=-1)
    assert P.terms == {}


# -- norm --------------------------------------------------------------

def test_norm_examples():
    assert norm_M(X(1, 2) + X(1, c=2), 3) == 15
    assert norm_M(Polynomial.one(M), Fraction(7, 3)) == 1
    with pytest.raises(ValueError):
        norm_M(X(1), 0)


@given(polys, polys, st.fractions(Fraction(1, 3), 4, max_denominator=5))
def test_norm_submultiplicative(P, Q, Mv):
    assert norm_M(P * Q, Mv) <= norm_M(P, Mv) * norm_M(Q, Mv)
    # |a|+|b| is only submultiplicative on complex numbers
    assert norm_M(TensorPolynomial.tensor(P, Q), Mv) <= norm_M(P, Mv) * norm_M(Q, Mv)


@given(real_polys, real_polys, st.fractions(Fraction(1, 3), 4, max_denominator=5))
def test_norm_tensor_multiplicative_real(P, Q, Mv):
    assert norm_M(TensorPolynomial.tensor(P, Q), Mv) == norm_M(P, Mv) * norm_M(Q, Mv)


def test_norm_tensor_complex_example():
    P = Polynomial.one(M) * GaussianRational(1, 1)
    assert norm_M(TensorPolynomial.tensor(P, P), 1) == 2 < norm_M(P, 1) ** 2


@given(words(max_len=7).filter(len), st.fractions(Fraction(1, 2), 3, max_denominator=4),
       st.fractions(Fraction(1, 4), 2, max_denominator=4))
def test_cyclic_derivative_continuity(w, Mv, gap):
    """Summed over colors, ``||D_i q||_M`` equals ``deg q · M^{deg q - 1}``, so
    the ratio against ``||q||_{M'}`` is ``deg q · M^{deg q-1} / M'^{deg q}``."""
    Mp = Mv + gap
    q = X(*w)
    total = sum(norm_M(cyclic_derivative(i, q), Mv) for i in range(1, M + 1))
    assert total / norm_M(q, Mp) == len(w) * Mv ** (len(w) - 1) / Mp ** len(w)


# -- derivatives -------------------------------------------------------

def test_nc_derivative_examples():
    assert nc_derivative(1, X(1, 2, 1)) == tensor((), (2, 1)) + tensor((1, 2), ())
    for i in (1, 2):
        for j in (1, 2):
            expected = tensor((), ()) if i == j else TensorPolynomial(M)
            assert nc_derivative(i, X(j)) == expected
    assert nc_derivative(1, Polynomial.one(M)) == TensorPolynomial(M)
    with pytest.raises(ValueError):
        nc_derivative(3, X(1))


def test_cyclic_derivative_examples():
    assert cyclic_derivative(1, X(1, 2, 1, 2)) == X(2, 1, 2, c=2)
    assert cyclic_derivative(2, X(2)) == Polynomial.one(M)
    assert cyclic_derivative(1, X(2)) == Polynomial.zero(M)


@given(polys, polys, st.integers(1, M))
def test_leibniz_rule(P, Q, i):
    lhs = nc_derivative(i, P * Q)
    rhs = nc_derivative(i, P).right_multiply(Q) + nc_derivative(i, Q).left_multiply(P)
    assert lhs == rhs


@given(st.lists(st.integers(1, M), max_size=8).map(tuple), st.integers(1, M))
def test_cyclic_is_flip_of_noncommutative(w, i):
    assert cyclic_derivative(i, X(*w)) == nc_derivative(i, X(*w)).flip_multiply()


def test_degree_division_examples():
    assert degree_division(X(1, 2, 1)) == X(1, 2, 1, c=Fraction(1, 3))
    assert degree_division(Polynomial.one(M)) == Polynomial.zero(M)
    assert degree_division(Polynomial.one(M) * 5 + X(1, c=2)) == X(1, c=2)


def test_selfadjoint_up_to_rotation():
    assert is_cyclically_selfadjoint(X(1, 1, 2))
    assert is_cyclically_selfadjoint(X(1, 2, 1, 2))
    assert not is_cyclically_selfadjoint(X(1, 2, c=GaussianRational(0, 1)))


# -- the operators Ξ ---------------------------------------------------

QUARTIC = Potential(1, ((1, 1, 1, 1),))
EMPTY = Potential(1, ())


def gaussian_mu(order, nvars=0):
    solver = SDSolver(EMPTY, order, max_degree=12)
    return solver.mu


def test_xi_on_square_at_zero_potential():
    mu = gaussian_mu(0)
    P = Polynomial.monomial((1, 1), 1)
    # D X² = 2X, ∂(2X) = 2·1⊗1, contracted: 2(μ(1) + μ(1)), divided by deg 2
    assert xi2(P, mu, 0) == Polynomial.one(1) * 2
    assert xi1(P, EMPTY, 0) == Polynomial.zero(1)
    assert apply_Xi(P, EMPTY, mu, 0) == P - Polynomial.one(1) * 2


def test_xi_on_letter_quartic():
    K = 2
    solver = SDSolver(QUARTIC, K, max_degree=8)
    P = Polynomial.letter(1, 1)
    out = apply_Xi(P, QUARTIC, solver.mu, K)
    assert set(out.terms) == {(1,), (1, 1, 1)}
    assert out.terms[(1,)] == 1
    assert out.terms[(1, 1, 1)] == 4 * QUARTIC.formal_polynomial(K).terms[(1, 1, 1, 1)]


@given(st.lists(st.integers(1, 2), min_size=1, max_size=6).map(tuple))
def test_xi0_inverse_is_exact(w):
    V = Potential(2, ((1, 2, 1, 2),))
    solver = SDSolver(V, 2, max_degree=8)
    P = Polynomial.monomial(w, 2) + Polynomial.monomial(w[::-1], 2, 3)
    assert xi0(xi0_inverse(P, solver.mu, 2), solver.mu, 2) == P


def test_xi2_lowers_degree_by_two():
    solver = SDSolver(QUARTIC, 2, max_degree=10)
    for d in range(1, 9):
        out = xi2(Polynomial.monomial((1,) * d, 1), solver.mu, 2)
        assert out.degree() <= d - 2


def test_neumann_trivial_cases():
    mu = gaussian_mu(0)
    P = Polynomial.monomial((1, 1, 1, 1), 1)
    Q, R, _ = neumann_inverse_apply(P, EMPTY, mu, 0, 1)
    assert Q == xi0_inverse(P, mu, 0) and R == Polynomial.zero(1)
    Q, R, _ = neumann_inverse_apply(P, EMPTY, mu, 0, 0)
    assert Q == Polynomial.zero(1) and R == P


def test_neumann_remainder_identity():
    K = 4
    solver = SDSolver(QUARTIC, K, max_degree=14)
    mu = solver.mu
    P = Polynomial.monomial((1, 1), 1)
    Q, R, norm = neumann_inverse_apply(P, QUARTIC, mu, K, 3, M=2, t=(Fraction(1, 100),))
    expected = P
    for _ in range(3):
        expected = -xi1(xi0_inverse(expected, mu, K), QUARTIC, K)
    assert R == expected
    assert P == apply_Xi(Q, QUARTIC, mu, K) + R
    assert norm > 0


def test_caps_are_enforced():
    solver = SDSolver(QUARTIC, 2, max_degree=8)
    P = Polynomial.monomial((1,) * 6, 1)
    with pytest.raises(CapExceeded):
        xi2(P, solver.mu, 2, D_cap=4)
    with pytest.raises(CapExceeded):
        xi1(Polynomial.monomial((1,) * 4, 1), QUARTIC, 2, D_cap=5)


def test_potential_validation():
    with pytest.raises(ValueError):
        Potential(1, ((),))
    with pytest.raises(ValueError):
        Potential(1, ((2, 2),))
    V = Potential.parse(2, [("1/20", "1212"), ("1/10", "X1*X1")])
    assert V.exact_values() == (Fraction(1, 20), Fraction(1, 10))
    assert V.max_degree == 4 and V.n == 2
    with pytest.raises(ValueError):
        Potential.parse(1, [("1/2", "11"), "1111"])
