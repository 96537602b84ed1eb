"""Exact non-commutative polynomials in m self-adjoint letters X_1, ..., X_m.

Words are tuples of color indices in ``1..m``; the empty tuple is the unit.
Coefficients are exact: :class:`fractions.Fraction`, :class:`GaussianRational`
or :class:`~mapgenus.series.TruncatedSeries` (the last one appears when an
operator injects the formal couplings ``t_j``).

Besides the algebra this module provides the derivatives ``∂_i`` and ``D_i``,
the division by the degree, and the operators ``Ξ_0, Ξ_1, Ξ_2, Ξ`` of the
first-correction equation together with the truncated Neumann inversion of
``Ξ``.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Rational

from .errors import CapExceeded
from .series import TruncatedSeries


# --------------------------------------------------------------------------
# words
# --------------------------------------------------------------------------

def parse_word(text, m=None):
    """Parse ``"X1*X2*X1"``, ``"121"`` or ``""`` (the unit) into a word tuple."""
    text = text.strip()
    if text in ("", "1*", "I"):
        return ()
    if "X" in text or "x" in text:
        letters = []
        for tok in text.replace("x", "X").split("*"):
            tok = tok.strip()
            if not tok.startswith("X") or not tok[1:].isdigit():
                raise ValueError(f"malformed letter {tok!r} in word {text!r}")
            letters.append(int(tok[1:]))
        word = tuple(letters)
    else:
        if not text.isdigit():
            raise ValueError(f"malformed compact word {text!r}")
        word = tuple(int(ch) for ch in text)
    if any(i < 1 for i in word) or (m is not None and any(i > m for i in word)):
        raise ValueError(f"word {text!r} uses a color outside 1..{m}")
    return word


def format_word(word, compact=True):
    if not word:
        return "I" if not compact else ""
    if compact and max(word) < 10:
        return "".join(str(i) for i in word)
    return "*".join(f"X{i}" for i in word)


def canonical_rotation(word):
    """Lexicographically smallest cyclic rotation of ``word``."""
    n = len(word)
    if n < 2:
        return tuple(word)
    word = tuple(word)
    return min(word[i:] + word[:i] for i in range(n))


def words_up_to(m, degree):
    """All words over ``m`` colors of length ``<= degree`` in graded-lex order."""
    out = []
    for d in range(degree + 1):
        out.extend(itertools.product(range(1, m + 1), repeat=d))
    return out


# --------------------------------------------------------------------------
# Gaussian rationals
# --------------------------------------------------------------------------

class GaussianRational:
    """Exact complex number ``re + i*im`` with rational parts."""

    __slots__ = ("re", "im")

    def __init__(self, re=0, im=0):
        self.re = Fraction(re)
        self.im = Fraction(im)

    @staticmethod
    def _lift(x):
        if isinstance(x, GaussianRational):
            return x
        if isinstance(x, (int, Rational)):
            return GaussianRational(x, 0)
        if isinstance(x, complex):
            return GaussianRational(Fraction(x.real), Fraction(x.imag))
        return NotImplemented

    def __add__(self, other):
        o = self._lift(other)
        if o is NotImplemented:
            return o
        return GaussianRational(self.re + o.re, self.im + o.im)

    __radd__ = __add__

    def __neg__(self):
        return GaussianRational(-self.re, -self.im)

    def __sub__(self, other):
        o = self._lift(other)
        if o is NotImplemented:
            return o
        return GaussianRational(self.re - o.re, self.im - o.im)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, TruncatedSeries):
            if self.im:
                raise TypeError("series coefficients are real; cannot scale by a complex number")
            return other * self.re
        o = self._lift(other)
        if o is NotImplemented:
            return o
        return GaussianRational(self.re * o.re - self.im * o.im, self.re * o.im + self.im * o.re)

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = self._lift(other)
        if o is NotImplemented:
            return o
        den = o.re * o.re + o.im * o.im
        if not den:
            raise ZeroDivisionError("division by zero")
        return self * GaussianRational(o.re / den, -o.im / den)

    def conjugate(self):
        return GaussianRational(self.re, -self.im)

    def abs1(self):
        """``|re| + |im|``, the modulus surrogate used by the weighted norms."""
        return abs(self.re) + abs(self.im)

    def __bool__(self):
        return bool(self.re) or bool(self.im)

    def __eq__(self, other):
        o = self._lift(other)
        if o is NotImplemented:
            return NotImplemented
        return self.re == o.re and self.im == o.im

    def __hash__(self):
        if not self.im:
            return hash(self.re)
        return hash((self.re, self.im))

    def __repr__(self):
        if not self.im:
            return f"{self.re}"
        return f"({self.re}{'+' if self.im >= 0 else '-'}{abs(self.im)}i)"


def _coerce_coeff(c):
    if isinstance(c, (GaussianRational, TruncatedSeries, Fraction)):
        return c
    if isinstance(c, (int, Rational)):
        return Fraction(c)
    if isinstance(c, str):
        return Fraction(c)
    if isinstance(c, complex):
        return GaussianRational(Fraction(c.real), Fraction(c.imag))
    raise TypeError(f"unsupported coefficient type {type(c).__name__}")


def _modulus(c, t=None):
    """Modulus surrogate of an exact coefficient (|re|+|im| for complex ones)."""
    if isinstance(c, GaussianRational):
        return c.abs1()
    if isinstance(c, TruncatedSeries):
        if t is None:
            return sum((abs(v) for _, v in c.items()), Fraction(0))
        total = 0
        for k, v in c.items():
            term = abs(v)
            for x, e in zip(t, k):
                term = term * abs(x) ** e
            total += term
        return total
    return abs(c)


# --------------------------------------------------------------------------
# polynomials
# --------------------------------------------------------------------------

class Polynomial:
    """Finite linear combination of words over ``m`` colors.

    >>> X1, X2 = Polynomial.letter(1, 2), Polynomial.letter(2, 2)
    >>> (X1 + X2) * X1
    Polynomial(m=2, {X1*X1: 1, X2*X1: 1})
    """

    __slots__ = ("m", "terms")

    def __init__(self, m, terms=None):
        if m < 1:
            raise ValueError("need at least one color")
        self.m = m
        acc = {}
        if terms:
            for w, c in dict(terms).items():
                w = tuple(w)
                if any(i < 1 or i > m for i in w):
                    raise ValueError(f"word {w} uses a color outside 1..{m}")
                c = _coerce_coeff(c)
                if w in acc:
                    c = acc[w] + c
                if c:
                    acc[w] = c
                else:
                    acc.pop(w, None)
        self.terms = acc

    @classmethod
    def _raw(cls, m, terms):
        p = cls.__new__(cls)
        p.m = m
        p.terms = terms
        return p

    @classmethod
    def monomial(cls, word, m, coefficient=1):
        return cls(m, {tuple(word): coefficient})

    @classmethod
    def letter(cls, i, m):
        return cls(m, {(i,): 1})

    @classmethod
    def one(cls, m):
        return cls(m, {(): 1})

    @classmethod
    def zero(cls, m):
        return cls(m)

    @classmethod
    def from_records(cls, records, m):
        """Build from ``[(coefficient, word), ...]`` with words as text or tuples."""
        terms = {}
        for coeff, word in records:
            w = parse_word(word, m) if isinstance(word, str) else tuple(word)
            c = _coerce_coeff(coeff)
            terms[w] = terms[w] + c if w in terms else c
        return cls(m, terms)

    # -- inspection ----------------------------------------------------
    def degree(self):
        return max((len(w) for w in self.terms), default=-1)

    def coefficient(self, word):
        return self.terms.get(tuple(word), Fraction(0))

    def items(self):
        return sorted(self.terms.items(), key=lambda kv: (len(kv[0]), kv[0]))

    def __bool__(self):
        return bool(self.terms)

    def __eq__(self, other):
        if isinstance(other, Polynomial):
            return self.m == other.m and self.terms == other.terms
        if isinstance(other, (int, Rational)):
            return self == Polynomial(self.m, {(): other})
        return NotImplemented

    def __hash__(self):
        return hash((self.m, frozenset(self.terms.items())))

    def __repr__(self):
        body = ", ".join(f"{format_word(w, compact=False)}: {c}" for w, c in self.items())
        return f"Polynomial(m={self.m}, {{{body}}})"

    # -- algebra -------------------------------------------------------
    def _check(self, other):
        if not isinstance(other, Polynomial):
            raise TypeError(f"expected a Polynomial, got {type(other).__name__}")
        if other.m != self.m:
            raise ValueError(f"color counts differ: {self.m} vs {other.m}")

    def __add__(self, other):
        if isinstance(other, (int, Rational)):
            other = Polynomial(self.m, {(): other})
        self._check(other)
        acc = dict(self.terms)
        for w, c in other.terms.items():
            c = acc[w] + c if w in acc else c
            if c:
                acc[w] = c
            else:
                acc.pop(w, None)
        return Polynomial._raw(self.m, acc)

    __radd__ = __add__

    def __neg__(self):
        return Polynomial._raw(self.m, {w: -c for w, c in self.terms.items()})

    def __sub__(self, other):
        if isinstance(other, (int, Rational)):
            other = Polynomial(self.m, {(): other})
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def scale(self, c):
        c = _coerce_coeff(c)
        acc = {}
        for w, a in self.terms.items():
            v = c * a
            if v:
                acc[w] = v
        return Polynomial._raw(self.m, acc)

    def __mul__(self, other):
        if not isinstance(other, Polynomial):
            return self.scale(other)
        return multiply(self, other)

    def __rmul__(self, other):
        return self.scale(other)

    def map_coefficients(self, f):
        acc = {}
        for w, c in self.terms.items():
            v = f(c)
            if v:
                acc[w] = v
        return Polynomial._raw(self.m, acc)


def multiply(P, Q):
    """Exact product: concatenation of words extended bilinearly."""
    P._check(Q)
    acc = {}
    for w1, c1 in P.terms.items():
        for w2, c2 in Q.terms.items():
            w = w1 + w2
            v = c1 * c2
            v = acc[w] + v if w in acc else v
            if v:
                acc[w] = v
            else:
                acc.pop(w, None)
    return Polynomial._raw(P.m, acc)


def involution(P):
    """The antilinear anti-automorphism ``(z w)^* = conj(z) reversed(w)``."""
    acc = {}
    for w, c in P.terms.items():
        acc[w[::-1]] = c.conjugate()
    return Polynomial._raw(P.m, acc)


def norm_M(P, M, t=None):
    """Weighted l1 norm ``sum_q |λ_q(P)| M^deg q`` (exact for rational ``M``).

    Complex coefficients use ``|re| + |im|``. Series coefficients are measured
    at ``|t|`` when numeric couplings are given, else by the sum of their
    coefficient moduli.
    """
    if isinstance(M, (int, Rational)):
        M = Fraction(M)
    if M <= 0:
        raise ValueError("M must be positive")
    if isinstance(P, TensorPolynomial):
        return sum((_modulus(c, t) * M ** (len(a) + len(b)) for (a, b), c in P.terms.items()),
                   Fraction(0))
    return sum((_modulus(c, t) * M ** len(w) for w, c in P.terms.items()), Fraction(0))


# --------------------------------------------------------------------------
# tensor square
# --------------------------------------------------------------------------

class TensorPolynomial:
    """Element of the algebraic tensor square, stored as ``{(w1, w2): c}``."""

    __slots__ = ("m", "terms")

    def __init__(self, m, terms=None):
        self.m = m
        acc = {}
        for (a, b), c in (terms or {}).items():
            c = _coerce_coeff(c)
            key = (tuple(a), tuple(b))
            c = acc[key] + c if key in acc else c
            if c:
                acc[key] = c
            else:
                acc.pop(key, None)
        self.terms = acc

    @classmethod
    def _raw(cls, m, terms):
        t = cls.__new__(cls)
        t.m = m
        t.terms = terms
        return t

    @classmethod
    def tensor(cls, P, Q):
        P._check(Q)
        acc = {}
        for a, c1 in P.terms.items():
            for b, c2 in Q.terms.items():
                acc[(a, b)] = c1 * c2
        return cls._raw(P.m, acc)

    def __add__(self, other):
        acc = dict(self.terms)
        for k, c in other.terms.items():
            c = acc[k] + c if k in acc else c
            if c:
                acc[k] = c
            else:
                acc.pop(k, None)
        return TensorPolynomial._raw(self.m, acc)

    def __sub__(self, other):
        return self + TensorPolynomial._raw(other.m, {k: -c for k, c in other.terms.items()})

    def __eq__(self, other):
        if not isinstance(other, TensorPolynomial):
            return NotImplemented
        return self.m == other.m and self.terms == other.terms

    def __bool__(self):
        return bool(self.terms)

    def __repr__(self):
        body = ", ".join(f"{format_word(a, compact=False)}⊗{format_word(b, compact=False)}: {c}"
                         for (a, b), c in sorted(self.terms.items()))
        return f"TensorPolynomial(m={self.m}, {{{body}}})"

    def left_multiply(self, P):
        """``(P ⊗ 1) · self``."""
        acc = {}
        for w, c1 in P.terms.items():
            for (a, b), c2 in self.terms.items():
                key = (w + a, b)
                v = c1 * c2
                v = acc[key] + v if key in acc else v
                if v:
                    acc[key] = v
                else:
                    acc.pop(key, None)
        return TensorPolynomial._raw(self.m, acc)

    def right_multiply(self, Q):
        """``self · (1 ⊗ Q)``."""
        acc = {}
        for (a, b), c1 in self.terms.items():
            for w, c2 in Q.terms.items():
                key = (a, b + w)
                v = c1 * c2
                v = acc[key] + v if key in acc else v
                if v:
                    acc[key] = v
                else:
                    acc.pop(key, None)
        return TensorPolynomial._raw(self.m, acc)

    def flip_multiply(self):
        """The map ``A ⊗ B -> B A``."""
        acc = {}
        for (a, b), c in self.terms.items():
            w = b + a
            v = acc[w] + c if w in acc else c
            if v:
                acc[w] = v
            else:
                acc.pop(w, None)
        return Polynomial._raw(self.m, acc)


# --------------------------------------------------------------------------
# derivatives
# --------------------------------------------------------------------------

def _check_color(i, m):
    if not 1 <= i <= m:
        raise ValueError(f"color {i} outside 1..{m}")


def nc_derivative(i, P):
    """``∂_i P = sum over P = R X_i S of R ⊗ S``."""
    _check_color(i, P.m)
    acc = {}
    for w, c in P.terms.items():
        for pos, letter in enumerate(w):
            if letter != i:
                continue
            key = (w[:pos], w[pos + 1:])
            v = acc[key] + c if key in acc else c
            if v:
                acc[key] = v
            else:
                acc.pop(key, None)
    return TensorPolynomial._raw(P.m, acc)


def cyclic_derivative(i, P):
    """``D_i P = sum over P = R X_i S of S R``."""
    _check_color(i, P.m)
    acc = {}
    for w, c in P.terms.items():
        for pos, letter in enumerate(w):
            if letter != i:
                continue
            key = w[pos + 1:] + w[:pos]
            v = acc[key] + c if key in acc else c
            if v:
                acc[key] = v
            else:
                acc.pop(key, None)
    return Polynomial._raw(P.m, acc)


def cyclic_derivative_word(i, word):
    """Words ``S R`` for every split ``word = R X_i S`` (with repetition)."""
    return [word[pos + 1:] + word[:pos] for pos, letter in enumerate(word) if letter == i]


def degree_division(P):
    """Scale each word of degree ``p > 0`` by ``1/p``; constants are sent to 0."""
    acc = {}
    for w, c in P.terms.items():
        if w:
            acc[w] = c * Fraction(1, len(w))
    return Polynomial._raw(P.m, acc)


# --------------------------------------------------------------------------
# potentials
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Potential:
    """``V_t = sum_j t_j q_j`` with formal couplings and optional numeric values.

    ``monomials`` holds the words ``q_j``; ``values`` (if given) are numeric
    couplings used by the finite-N code and by numeric series evaluation.
    """

    m: int
    monomials: tuple
    values: tuple | None = None
    names: tuple | None = field(default=None, compare=False)

    def __post_init__(self):
        mons = tuple(tuple(q) for q in self.monomials)
        object.__setattr__(self, "monomials", mons)
        if self.m < 1:
            raise ValueError("need at least one color")
        for q in mons:
            if len(q) < 1:
                raise ValueError("every monomial of the potential must have degree >= 1")
            if any(i < 1 or i > self.m for i in q):
                raise ValueError(f"monomial {q} uses a color outside 1..{self.m}")
        if self.values is not None:
            vals = tuple(self.values)
            if len(vals) != len(mons):
                raise ValueError("one value per monomial is required")
            object.__setattr__(self, "values", vals)

    @classmethod
    def empty(cls, m=1):
        return cls(m, ())

    @classmethod
    def parse(cls, m, terms):
        """``terms`` is a list of words or ``(value, word)`` pairs."""
        mons, vals = [], []
        for term in terms:
            if isinstance(term, (list, tuple)) and len(term) == 2 and isinstance(term[1], (str, tuple, list)):
                val, word = term
                vals.append(val)
            else:
                word, val = term, None
                vals.append(None)
            mons.append(parse_word(word, m) if isinstance(word, str) else tuple(word))
        values = None if all(v is None for v in vals) else tuple(vals)
        if values is not None and any(v is None for v in values):
            raise ValueError("either all or none of the terms carry a value")
        return cls(m, tuple(mons), values)

    @property
    def n(self):
        return len(self.monomials)

    @property
    def max_degree(self):
        return max((len(q) for q in self.monomials), default=0)

    def with_values(self, values):
        return Potential(self.m, self.monomials, tuple(values), self.names)

    def numeric_values(self):
        if self.values is None:
            raise ValueError("the potential has no numeric coupling values")
        return tuple(float(Fraction(v)) if isinstance(v, str) else float(v) for v in self.values)

    def exact_values(self):
        if self.values is None:
            raise ValueError("the potential has no numeric coupling values")
        return tuple(Fraction(v) if isinstance(v, (str, int, Rational)) else Fraction(v).limit_denominator(10**12)
                     for v in self.values)

    def formal_polynomial(self, order):
        """``V_t`` as a polynomial with series coefficients ``t_j``."""
        n = self.n
        acc = Polynomial.zero(self.m)
        for j, q in enumerate(self.monomials):
            acc = acc + Polynomial(self.m, {q: TruncatedSeries.variable(j, n, order)})
        return acc

    def numeric_polynomial(self):
        vals = self.exact_values()
        return Polynomial(self.m, {q: v for q, v in zip(self.monomials, vals)} if len(set(self.monomials)) == self.n
                          else _sum_terms(self.monomials, vals))

    def cyclic_derivative_formal(self, i, order):
        """``D_i V`` with coefficients ``t_j`` as truncated series."""
        n = self.n
        acc = {}
        for j, q in enumerate(self.monomials):
            tj = TruncatedSeries.variable(j, n, order)
            for w in cyclic_derivative_word(i, q):
                acc[w] = acc[w] + tj if w in acc else tj
        return Polynomial(self.m, {w: c for w, c in acc.items() if c})


def _sum_terms(words, vals):
    acc = {}
    for w, v in zip(words, vals):
        acc[w] = acc.get(w, 0) + v
    return acc


# --------------------------------------------------------------------------
# the Ξ operators
# --------------------------------------------------------------------------

def _check_caps(P, D_cap):
    if D_cap is not None and P.degree() > D_cap:
        raise CapExceeded(f"polynomial of degree {P.degree()} exceeds the degree cap {D_cap}",
                          cap=D_cap, value=P.degree())


def _contract(T, mu, order):
    """``(I⊗μ + μ⊗I)`` applied to a tensor; ``mu(word)`` returns a series."""
    acc = Polynomial.zero(T.m)
    for (a, b), c in T.terms.items():
        acc = acc + Polynomial(T.m, {a: c * mu(b)}) + Polynomial(T.m, {b: c * mu(a)})
    return acc


def xi2(P, mu, order, D_cap=None):
    """``Ξ_2 P = sum_i (I⊗μ + μ⊗I) ∂_i D_i P̄``."""
    _check_caps(P, D_cap)
    Pbar = degree_division(P)
    acc = Polynomial.zero(P.m)
    for i in range(1, P.m + 1):
        acc = acc + _contract(nc_derivative(i, cyclic_derivative(i, Pbar)), mu, order)
    return acc


def xi1(P, V, order, D_cap=None):
    """``Ξ_1 P = sum_i D_i V · D_i P̄`` with the couplings kept formal."""
    _check_caps(P, D_cap)
    Pbar = degree_division(P)
    acc = Polynomial.zero(P.m)
    for i in range(1, P.m + 1):
        DV = V.cyclic_derivative_formal(i, order)
        if DV:
            acc = acc + multiply(DV, cyclic_derivative(i, Pbar))
    _check_caps(acc, D_cap)
    return acc


def xi0(P, mu, order, D_cap=None):
    """``Ξ_0 = I - Ξ_2``."""
    return P - xi2(P, mu, order, D_cap)


def apply_Xi(P, V, mu, order, D_cap=None):
    """``Ξ P = P - Ξ_2 P + Ξ_1 P``; ``mu(word)`` supplies planar moments as series."""
    return xi0(P, mu, order, D_cap) + xi1(P, V, order, D_cap)


def xi0_inverse(P, mu, order, D_cap=None):
    """Exact inverse of ``Ξ_0``: ``Ξ_2`` lowers the degree by two, so the
    geometric series ``sum_k Ξ_2^k`` stops after ``deg P / 2 + 1`` terms."""
    _check_caps(P, D_cap)
    out = P
    term = P
    while True:
        term = xi2(term, mu, order, D_cap)
        if not term:
            return out
        out = out + term


def neumann_inverse_apply(P, V, mu, order, n_terms, D_cap=None, M=None, t=None):
    """Approximate ``Ξ^{-1} P`` by ``Q_n = sum_{k<n} (-Ξ_0^{-1} Ξ_1)^k Ξ_0^{-1} P``.

    Returns ``(Q_n, R_n, norm)`` with ``R_n = P - Ξ Q_n = (-Ξ_1 Ξ_0^{-1})^n P``;
    ``norm`` is ``||R_n||_M`` when ``M`` is given, else ``None``.
    """
    if n_terms < 0:
        raise ValueError("n_terms must be nonnegative")
    Q = Polynomial.zero(P.m)
    term = xi0_inverse(P, mu, order, D_cap) if n_terms else None
    for _ in range(n_terms):
        Q = Q + term
        term = -xi0_inverse(xi1(term, V, order, D_cap), mu, order, D_cap)
    R = P - apply_Xi(Q, V, mu, order, D_cap)
    norm = norm_M(R, M, t) if M is not None else None
    return Q, R, norm


def is_cyclically_selfadjoint(P):
    """True when ``P*`` equals ``P`` up to cyclic rotation of each word,
    i.e. ``tr P(A)`` is real for Hermitian ``A``."""
    def canon(Q):
        acc = {}
        for w, c in Q.terms.items():
            k = canonical_rotation(w)
            acc[k] = acc[k] + c if k in acc else c
        return {k: v for k, v in acc.items() if v}
    return canon(P) == canon(involution(P))
