from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from mapgenus import CapExceeded, TruncatedSeries

NV, ORDER = 2, 4


def exps(nvars=NV, order=ORDER):
    return st.tuples(*[st.integers(0, order)] * nvars).filter(lambda k: sum(k) <= order)


fracs = st.fractions(min_value=-5, max_value=5, max_denominator=7)
series = st.dictionaries(exps(), fracs, max_size=6).map(lambda d: TruncatedSeries(NV, ORDER, d))


def naive_product(a, b):
    """Schoolbook product by coefficient convolution, truncated."""
    out = {}
    for ka, va in a.items():
        for kb, vb in b.items():
            k = tuple(x + y for x, y in zip(ka, kb))
            if sum(k) <= ORDER:
                out[k] = out.get(k, 0) + va * vb
    return TruncatedSeries(NV, ORDER, out)


@given(series, series, series)
def test_ring_axioms(a, b, c):
    assert a + b == b + a
    assert a * b == b * a
    assert (a * b) * c == a * (b * c)
    assert a * (b + c) == a * b + a * c
    assert a - a == 0
    assert a * 1 == a


@given(series, series)
def test_product_matches_convolution(a, b):
    assert a * b == naive_product(a, b)


@given(series, series, st.sampled_from([(1, 0), (0, 1)]))
def test_derivative_leibniz(a, b, j):
    lhs = (a * b).derivative(j)
    rhs = a.derivative(j) * b.truncate(ORDER - 1) + a.truncate(ORDER - 1) * b.derivative(j)
    assert lhs == rhs


@given(series, st.fractions(min_value=-3, max_value=3, max_denominator=5),
       st.fractions(min_value=-3, max_value=3, max_denominator=5))
def test_evaluate_is_exact_and_homomorphic(a, x, y):
    b = a * a
    assert b.evaluate((x, y)) == naive_product(a, a).evaluate((x, y))
    assert (a + b).evaluate((x, y)) == a.evaluate((x, y)) + b.evaluate((x, y))


@given(series, st.fractions(min_value=-2, max_value=2, max_denominator=5))
def test_scale_variables(a, alpha):
    scaled = a.scale_variables(alpha)
    for k, v in a.items():
        assert scaled[k] == v * alpha ** sum(k)


def test_variable_and_powers():
    t = TruncatedSeries.variable(0, 1, 3)
    assert (1 + t) ** 4 == TruncatedSeries(1, 3, {(0,): 1, (1,): 4, (2,): 6, (3,): 4})
    assert t ** 4 == 0


def test_truncation_drops_high_orders():
    s = TruncatedSeries(1, 2, {(0,): 1, (3,): 5})
    assert s == 1
    with pytest.raises(CapExceeded):
        s[(3,)]
    with pytest.raises(CapExceeded):
        s.truncate(3)


def test_derivative_lowers_order_and_checks_cap():
    t = TruncatedSeries.variable(0, 1, 3)
    d = (t ** 3).derivative((2,))
    assert d.order == 1 and d == 6 * TruncatedSeries.variable(0, 1, 1)
    assert t.derivative((0,)) == t
    with pytest.raises(CapExceeded):
        t.derivative((4,))


def test_mixed_nvars_rejected():
    with pytest.raises(ValueError):
        TruncatedSeries.zero(1, 2) + TruncatedSeries.zero(2, 2)
    with pytest.raises(ValueError):
        TruncatedSeries(2, 2, {(1,): 1})


def test_repr_and_items_order():
    s = TruncatedSeries(1, 3, {(2,): Fraction(1, 2), (0,): 1, (1,): -8})
    assert [k for k, _ in s.items()] == [(0,), (1,), (2,)]
    assert "t1" in repr(s)
