"""Multivariate formal power series truncated at a total order, exact coefficients.

A series in ``t = (t_1, ..., t_n)`` is stored as a sparse mapping from
exponent tuples ``k`` with ``|k| <= order`` to :class:`fractions.Fraction`.
Products drop every term of total degree above the cap; nothing else is
ever discarded.
"""
from __future__ import annotations

import math
from fractions import Fraction
from numbers import Number, Rational

from .errors import CapExceeded


def _as_fraction(c):
    if isinstance(c, Fraction):
        return c
    if isinstance(c, (int, Rational)):
        return Fraction(c)
    if isinstance(c, str):
        return Fraction(c)
    raise TypeError(f"cannot use {type(c).__name__} as an exact coefficient")


def _add_exp(a, b):
    return tuple(x + y for x, y in zip(a, b))


class TruncatedSeries:
    """Sparse exact power series in ``nvars`` variables, truncated at ``order``."""

    __slots__ = ("nvars", "order", "_c")

    def __init__(self, nvars, order, coeffs=None):
        if nvars < 0 or order < 0:
            raise ValueError("nvars and order must be nonnegative")
        self.nvars = nvars
        self.order = order
        c = {}
        if coeffs:
            for k, v in coeffs.items():
                k = tuple(k)
                if len(k) != nvars:
                    raise ValueError(f"exponent {k} has wrong length for {nvars} variables")
                if sum(k) > order:
                    continue
                v = _as_fraction(v)
                if v:
                    c[k] = c.get(k, 0) + v
                    if not c[k]:
                        del c[k]
        self._c = c

    @classmethod
    def _raw(cls, nvars, order, c):
        s = cls.__new__(cls)
        s.nvars = nvars
        s.order = order
        s._c = c
        return s

    @classmethod
    def constant(cls, value, nvars, order):
        v = _as_fraction(value)
        return cls._raw(nvars, order, {(0,) * nvars: v} if v else {})

    @classmethod
    def zero(cls, nvars, order):
        return cls._raw(nvars, order, {})

    @classmethod
    def variable(cls, j, nvars, order, coefficient=1):
        """The series ``coefficient * t_j`` (``j`` is 0-based)."""
        k = [0] * nvars
        k[j] = 1
        v = _as_fraction(coefficient)
        if order < 1 or not v:
            return cls.zero(nvars, order)
        return cls._raw(nvars, order, {tuple(k): v})

    # -- access --------------------------------------------------------
    def __getitem__(self, k):
        k = tuple(k)
        if sum(k) > self.order:
            raise CapExceeded(f"coefficient {k} is beyond the truncation order {self.order}",
                              cap=self.order, value=sum(k))
        return self._c.get(k, Fraction(0))

    def items(self):
        """Nonzero ``(exponent, coefficient)`` pairs in graded-lexicographic order."""
        return sorted(self._c.items(), key=lambda kv: (sum(kv[0]), kv[0]))

    def coefficient_dict(self):
        return dict(self._c)

    def homogeneous(self, d):
        return {k: v for k, v in self._c.items() if sum(k) == d}

    def constant_term(self):
        return self._c.get((0,) * self.nvars, Fraction(0))

    def __bool__(self):
        return bool(self._c)

    def __len__(self):
        return len(self._c)

    def __hash__(self):
        return hash((self.nvars, self.order, frozenset(self._c.items())))

    # -- arithmetic ----------------------------------------------------
    def _coerce(self, other):
        if isinstance(other, TruncatedSeries):
            if other.nvars != self.nvars:
                raise ValueError("series in different numbers of variables")
            return other
        if isinstance(other, (int, Rational)):
            return TruncatedSeries.constant(other, self.nvars, self.order)
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        order = min(self.order, other.order)
        c = {k: v for k, v in self._c.items() if sum(k) <= order}
        for k, v in other._c.items():
            if sum(k) > order:
                continue
            w = c.get(k, 0) + v
            if w:
                c[k] = w
            else:
                c.pop(k, None)
        return TruncatedSeries._raw(self.nvars, order, c)

    __radd__ = __add__

    def __neg__(self):
        return TruncatedSeries._raw(self.nvars, self.order, {k: -v for k, v in self._c.items()})

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, Rational)):
            v = _as_fraction(other)
            if not v:
                return TruncatedSeries.zero(self.nvars, self.order)
            return TruncatedSeries._raw(self.nvars, self.order, {k: v * c for k, c in self._c.items()})
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        order = min(self.order, other.order)
        c = {}
        for k1, v1 in self._c.items():
            d1 = sum(k1)
            if d1 > order:
                continue
            for k2, v2 in other._c.items():
                if d1 + sum(k2) > order:
                    continue
                k = _add_exp(k1, k2)
                w = c.get(k, 0) + v1 * v2
                if w:
                    c[k] = w
                else:
                    c.pop(k, None)
        return TruncatedSeries._raw(self.nvars, order, c)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, (int, Rational)):
            return self * (1 / _as_fraction(other))
        return NotImplemented

    def __pow__(self, p):
        if not isinstance(p, int) or p < 0:
            raise ValueError("only nonnegative integer powers")
        out = TruncatedSeries.constant(1, self.nvars, self.order)
        for _ in range(p):
            out = out * self
        return out

    def __eq__(self, other):
        if isinstance(other, TruncatedSeries):
            if other.nvars != self.nvars:
                return False
            order = min(self.order, other.order)
            a = {k: v for k, v in self._c.items() if sum(k) <= order}
            b = {k: v for k, v in other._c.items() if sum(k) <= order}
            return a == b
        if isinstance(other, (int, Rational)):
            v = _as_fraction(other)
            expected = {(0,) * self.nvars: v} if v else {}
            return self._c == expected
        return NotImplemented

    def conjugate(self):
        return self

    # -- calculus ------------------------------------------------------
    def truncate(self, order):
        if order > self.order:
            raise CapExceeded(f"cannot extend a series known to order {self.order} up to {order}",
                              cap=self.order, value=order)
        return TruncatedSeries._raw(self.nvars, order,
                                    {k: v for k, v in self._c.items() if sum(k) <= order})

    def mul_variable(self, j, power=1):
        """Multiply by ``t_j**power``; the order cap is kept."""
        c = {}
        for k, v in self._c.items():
            if sum(k) + power <= self.order:
                k2 = list(k)
                k2[j] += power
                c[tuple(k2)] = v
        return TruncatedSeries._raw(self.nvars, self.order, c)

    def derivative(self, j):
        """Formal derivative by the multi-index ``j``; the order drops by ``|j|``."""
        j = tuple(j)
        if len(j) != self.nvars or any(x < 0 for x in j):
            raise ValueError(f"bad derivative multi-index {j}")
        dj = sum(j)
        if dj > self.order:
            raise CapExceeded(f"derivative of total order {dj} exceeds the truncation order {self.order}",
                              cap=self.order, value=dj)
        c = {}
        for k, v in self._c.items():
            if any(a < b for a, b in zip(k, j)):
                continue
            factor = 1
            for a, b in zip(k, j):
                factor *= math.perm(a, b)
            c[tuple(a - b for a, b in zip(k, j))] = v * factor
        return TruncatedSeries._raw(self.nvars, self.order - dj, c)

    def scale_variables(self, alpha):
        """Substitute ``t -> alpha t`` (``alpha`` exact)."""
        alpha = _as_fraction(alpha)
        return TruncatedSeries(self.nvars, self.order,
                               {k: v * alpha ** sum(k) for k, v in self._c.items()})

    def evaluate(self, t):
        """Sum the truncated series at numeric ``t`` (exact if ``t`` is rational)."""
        t = list(t) if self.nvars else []
        if len(t) != self.nvars:
            raise ValueError(f"expected {self.nvars} values, got {len(t)}")
        exact = all(isinstance(x, (int, Rational)) for x in t)
        total = Fraction(0) if exact else 0.0
        for k, v in self._c.items():
            term = v if exact else float(v)
            for x, e in zip(t, k):
                if e:
                    term = term * x ** e
            total += term
        return total

    def __repr__(self):
        if not self._c:
            return f"TruncatedSeries(0, order={self.order})"
        parts = []
        for k, v in self.items():
            mono = "*".join(f"t{j + 1}" + (f"^{e}" if e > 1 else "") for j, e in enumerate(k) if e)
            parts.append(f"{v}" + (f"*{mono}" if mono else ""))
        return "TruncatedSeries(" + " + ".join(parts) + f", order={self.order})"
