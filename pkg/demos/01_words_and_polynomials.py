# # Words, polynomials and the derivatives used by the loop equations
#
# A word in m colors is a tuple of color indices; X1*X2*X1*X2 is (1, 2, 1, 2).
# Polynomials are exact linear combinations of words with rational or
# Gaussian-rational coefficients.

from fractions import Fraction

from mapgenus import (Polynomial, Potential, cyclic_derivative, degree_division, format_word, involution,
                      nc_derivative, norm_M, parse_word)

m = 2
X1, X2 = Polynomial.letter(1, m), Polynomial.letter(2, m)
P = X1 * X2 * X1 * X2 + Fraction(1, 3) * X1 * X1
print("P =", P)

# Words round-trip through both text forms.
w = parse_word("X1*X2*X2", m)
print(w, format_word(w), format_word(w, compact=False))

# ## Derivatives
#
# The cyclic derivative D_i P collects, for every occurrence of X_i, the word
# read cyclically after it. The non-commutative derivative splits P at each
# occurrence and returns an element of the tensor product.

print("D_1 P       =", cyclic_derivative(1, P))
print("partial_1 P =", nc_derivative(1, X1 * X2 * X1))

# Dividing each monomial by its degree undoes sum_i X_i D_i up to cyclic
# rotation, which is invisible under the trace.
Pbar = degree_division(P)
back = sum((Polynomial.letter(i, m) * cyclic_derivative(i, Pbar) for i in (1, 2)), Polynomial.zero(m))
print("Pbar =", Pbar)
print("sum_i X_i D_i Pbar =", back)

# ## Involution and the weighted 1-norm
print("P* =", involution(X1 * X2 * X2))
print("||P||_M at M = 2:", norm_M(P, 2))

# ## Potentials
V = Potential.parse(2, [("1/20", "1212"), ("1/10", "1111")])
print(V.monomials, V.exact_values())
