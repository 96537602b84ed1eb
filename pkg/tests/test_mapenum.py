from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mapgenus import BudgetExceeded, Potential
from mapgenus.mapenum import (GluingDiagram, Star, closed_series, count_closed, count_rooted,
                              enumerate_gluings, genus_of_gluing, gue_joint_moment, gue_moment_exact,
                              iter_gluings, pairing_count, planar_series, rooted_count_table, tally)

from oracles import (brute_counts, brute_gluings, catalan, double_factorial, gue_sample, harer_zagier,
                     normalized_trace)

QUARTIC = Potential(1, ((1, 1, 1, 1),))
TWO_COLOR = Potential(2, ((1, 2, 1, 2),))
ABAB = (1, 2, 1, 2)

star_words = st.lists(st.integers(1, 2), min_size=1, max_size=4).map(tuple)
star_lists = st.lists(star_words, min_size=1, max_size=3).filter(lambda ws: sum(map(len, ws)) <= 10)


def stars(*types):
    return [Star(tuple(t), n) for n, t in enumerate(types)]


# -- genus of a single gluing -------------------------------------------

def test_genus_single_edge():
    d = GluingDiagram(stars((1, 1)), (1, 0))
    sd = genus_of_gluing(d)
    assert (sd.V, sd.E, sd.F, sd.genus) == (1, 1, 2, 0)


def test_genus_crossing_quartic():
    d = GluingDiagram(stars((1, 1, 1, 1)), (2, 3, 0, 1))
    sd = genus_of_gluing(d)
    assert (sd.F, sd.V - sd.E + sd.F, sd.genus) == (1, 0, 1)


def test_genus_two_abab_stars_torus():
    # colors 1,2,1,2 | 1,2,1,2; glue each half-edge to its twin on the other star
    d = GluingDiagram(stars(ABAB, ABAB), (4, 5, 6, 7, 0, 1, 2, 3))
    sd = genus_of_gluing(d)
    assert sd.connected and sd.genus == 1


@pytest.mark.parametrize("pairing,msg", [((2, None, 0, None), "unpaired"), ((2, 1, 0, 3), "unpaired"),
                                         ((1, 0, 3, 2), "different colors"), ((2, 3, 1, 1), "involution"),
                                         ((2, 3, 0), "entries")])
def test_genus_rejects_bad_pairings(pairing, msg):
    with pytest.raises(ValueError, match=msg):
        genus_of_gluing(GluingDiagram(stars((1, 2, 1, 2)), pairing))


@given(star_lists)
@settings(max_examples=40)
def test_genus_matches_brute_force_face_walk(types):
    ours = sorted((len(sd.components), sd.genus) for sd in
                  (genus_of_gluing(d) for d in iter_gluings(stars(*types))))
    ref = sorted((n, g) for n, g, _ in brute_gluings(types))
    assert ours == ref


# -- counting -----------------------------------------------------------

def test_enumerate_single_quartic_star():
    table = enumerate_gluings(stars((1, 1, 1, 1)))
    assert table.get(0) == 2 and table.get(1) == 1 and table.total() == 3


def test_odd_star_has_no_gluings():
    assert enumerate_gluings(stars((1, 1, 1))).total() == 0
    assert pairing_count([(1, 2, 1)]) == 0


def test_two_abab_stars_connected_genus_one():
    # cross-checked by brute force; the labeled count is 6
    table = enumerate_gluings(stars(ABAB, ABAB))
    assert table.get(1) == brute_counts([ABAB, ABAB])[1] == 6


def test_two_abab_diagrams_are_distinct():
    _, diagrams = enumerate_gluings(stars(ABAB, ABAB), filter=lambda g, nc: nc == 1 and g == 1, stream=True)
    assert len(diagrams) == 6
    assert len({d.pairing for d in diagrams}) == len(diagrams)
    assert [d.pairing for d in diagrams] == sorted(d.pairing for d in diagrams)


def test_two_abab_monte_carlo_agrees_with_labeled_count():
    """E[(1/N tr ABAB)^2] = 2/N^2 + 7/N^4: the 7 is the 6 connected genus-1
    gluings plus the pair of separate tori. A count of 4 would give 5/N^4,
    which the sample mean at N = 2 rules out."""
    poly = gue_joint_moment([ABAB, ABAB])
    assert poly == (0, 2, 7)
    rng = np.random.default_rng(11)
    N, n = 2, 40_000
    vals = normalized_trace(gue_sample(rng, n, 2, N), ABAB) ** 2
    exact = sum(Fraction(c, N ** (2 * h)) for h, c in enumerate(poly))
    assert abs(vals.mean() - float(exact)) < 4 * vals.std() / np.sqrt(n)


@given(star_lists)
@settings(max_examples=40)
def test_partition_identity(types):
    out = tally(types)
    per_color = 1
    for c in (1, 2):
        h = sum(w.count(c) for w in types)
        per_color *= 0 if h % 2 else double_factorial(h - 1)
    assert int(out.sum()) == per_color == pairing_count(types)


@given(star_lists)
@settings(max_examples=40)
def test_kernel_matches_brute_force(types):
    out = tally(types)
    ref = {}
    for n, g, _ in brute_gluings(types):
        ref[(n, g)] = ref.get((n, g), 0) + 1
    ours = {(int(n), int(g)): int(out[n, g]) for n, g in zip(*np.nonzero(out))}
    assert ours == ref


@given(star_lists, st.randoms())
@settings(max_examples=30)
def test_relabeling_invariance(types, rnd):
    perm = list(types)
    rnd.shuffle(perm)
    assert np.array_equal(tally(types), tally(perm))


@given(star_lists)
@settings(max_examples=30)
def test_genus_bound(types):
    out = tally(types)
    E = sum(map(len, types)) // 2
    for n, g in zip(*np.nonzero(out)):
        # summed over components, g_c <= (E_c - V_c + 1)/2
        assert g <= (E - len(types) + n) // 2


def test_parallel_partition_is_exact():
    from mapgenus.mapenum import _tally
    types = [(1, 1, 1, 1)] * 3 + [(1, 1)]
    assert np.array_equal(_tally(types, workers=1), _tally(types, workers=2))


def test_budget_exceeded():
    with pytest.raises(BudgetExceeded):
        enumerate_gluings(stars((1,) * 8, (1,) * 8), budget=1000)


# -- rooted and closed counts ------------------------------------------

def test_count_rooted_examples():
    assert count_rooted((1,) * 6, (0,), 0, QUARTIC) == 5
    assert count_rooted((1, 1), (0,), 1, QUARTIC) == 0
    assert count_rooted(ABAB, (1,), 1, TWO_COLOR) == 6


def test_count_closed_examples():
    assert count_closed((1,), 0, QUARTIC) == 2
    assert count_closed((1,), 1, QUARTIC) == 1
    assert count_closed((0,), 0, QUARTIC) == 0
    assert count_closed((1,), 0, Potential(1, ((1, 1, 1),))) == 0


@pytest.mark.parametrize("P,V,K,g", [((1, 1), QUARTIC, 2, 0), ((1, 1), QUARTIC, 2, 1), (ABAB, TWO_COLOR, 2, 1),
                                     ((1, 1, 2, 2), TWO_COLOR, 2, 0), ((1,), QUARTIC, 2, 0)])
def test_rooted_series_matches_brute_force(P, V, K, g):
    from mapgenus.mapenum import rooted_series
    from oracles import brute_rooted_series
    assert rooted_series(P, V, K, g).coefficient_dict() == brute_rooted_series(P, V.monomials, K, g)


def test_planar_series_examples():
    s = planar_series((1, 1), QUARTIC, 2)
    assert s[(0,)] == 1
    assert s[(1,)] == -count_rooted((1, 1), (1,), 0, QUARTIC) == -8
    assert planar_series((), TWO_COLOR, 3) == 1


def test_closed_series_vanishes_at_zero():
    assert closed_series(QUARTIC, 3, 0).constant_term() == 0
    assert closed_series(QUARTIC, 2, 1)[(1,)] == -1


def test_count_table_rows():
    table = rooted_count_table((1, 1), QUARTIC, 1, 2)
    assert table.get(0, (1,)) == 8
    assert all(c > 0 for _, c in table.rows())


# -- exact Gaussian moments ---------------------------------------------

def test_gue_moment_examples():
    assert gue_moment_exact((1, 1)) == (1,)
    assert gue_moment_exact((1, 1), 7) == 1
    assert gue_moment_exact((1, 1, 1, 1)) == (2, 1)
    assert gue_moment_exact((1, 1, 1, 1), 3) == Fraction(19, 9)
    assert gue_moment_exact((1, 2)) == ()
    assert gue_moment_exact((1, 2), 4) == 0
    with pytest.raises(ValueError):
        gue_moment_exact(())


@pytest.mark.parametrize("p", range(1, 8))
def test_gue_moment_harer_zagier(p):
    poly = gue_moment_exact((1,) * (2 * p))
    assert poly[0] == catalan(p)
    assert list(poly) == [harer_zagier(p, g) for g in range(len(poly))]
    assert all(isinstance(c, int) and c >= 0 for c in poly)


@pytest.mark.parametrize("word", [(1, 2, 1, 2), (1, 1, 2, 2), (1, 2, 2, 1, 1, 2), (1, 1, 1, 2, 2, 2, 1, 2)])
def test_gue_mixed_moments_n1_are_scalar_gaussian(word):
    # at N = 1 the matrices are independent standard normals
    expected = 1
    for c in (1, 2):
        k = word.count(c)
        expected *= 0 if k % 2 else double_factorial(k - 1)
    assert gue_moment_exact(word, 1) == expected


def test_gue_moment_monte_carlo():
    rng = np.random.default_rng(5)
    N, n = 3, 60_000
    A = gue_sample(rng, n, 2, N)
    for word in [(1, 1, 1, 1), (1, 2, 1, 2), (1, 1, 2, 2)]:
        vals = normalized_trace(A, word)
        exact = float(gue_moment_exact(word, N))
        assert abs(vals.mean() - exact) < 4 * vals.std() / np.sqrt(n)
