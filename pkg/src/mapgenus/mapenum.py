"""Exact enumeration of maps obtained by gluing colored stars.

A star of type ``X_{i_1}...X_{i_p}`` is a vertex with ``p`` half-edges read
clockwise from a distinguished one, the ``r``-th carrying color ``i_r``.
Half-edges are numbered consecutively, star after star. A gluing is a
fixed-point-free involution ``alpha`` on half-edges pairing equal colors;
with the rotation ``sigma`` (next half-edge around the same star) the faces
are the cycles of ``sigma ∘ alpha`` and every component satisfies
``V_c - E_c + F_c = 2 - 2 g_c``.

Counting is over labeled stars with marked first half-edges; the ``1/k!``
of the generating functions is applied by :func:`rooted_series` and
:func:`closed_series`.

Counting runs in a compiled backtracking kernel that tallies every gluing by
``(number of components, total genus)``; a pure-Python generator yields the
diagrams themselves for small instances.
"""
from __future__ import annotations

import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np
from numba import njit

from .errors import BudgetExceeded
from .ncpoly import Potential
from .series import TruncatedSeries

DEFAULT_BUDGET = 50_000_000


# --------------------------------------------------------------------------
# data types
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Star:
    """Vertex of type ``star_type``; half-edge ``r`` carries color ``star_type[r]``."""

    star_type: tuple
    label: int = 0

    def __post_init__(self):
        object.__setattr__(self, "star_type", tuple(self.star_type))
        if any(c < 1 for c in self.star_type):
            raise ValueError("colors are positive integers")

    @property
    def half_edges(self):
        return list(self.star_type)

    @property
    def degree(self):
        return len(self.star_type)


@dataclass(frozen=True)
class SurfaceData:
    V: int
    E: int
    F: int
    components: tuple
    genus_per_component: tuple

    @property
    def genus(self):
        return sum(self.genus_per_component)

    @property
    def connected(self):
        return len(self.components) == 1


@dataclass
class GluingDiagram:
    """Stars plus a pairing given as ``partner[h]`` for every half-edge ``h``."""

    stars: list
    pairing: tuple

    def pairs(self):
        return [(h, p) for h, p in enumerate(self.pairing) if h < p]


@dataclass
class CountTable:
    """Exact counts keyed by ``(genus, k)``.

    ``components`` keeps the full tally ``{(n_components, total_genus): count}``
    of the enumeration the table was built from, when there is a single one.
    """

    counts: dict = field(default_factory=dict)
    connected_only: bool = True
    root: tuple | None = None
    components: dict = field(default_factory=dict)

    def get(self, g, k=()):
        return self.counts.get((g, tuple(k)), 0)

    def total(self):
        return sum(self.counts.values())

    def rows(self):
        return sorted(self.counts.items())


# --------------------------------------------------------------------------
# layout helpers
# --------------------------------------------------------------------------

def _layout(star_types):
    colors, sigma, star_of = [], [], []
    base = 0
    for s, word in enumerate(star_types):
        p = len(word)
        for r, c in enumerate(word):
            colors.append(c)
            sigma.append(base + (r + 1) % p)
            star_of.append(s)
        base += p
    return (np.asarray(colors, dtype=np.int64), np.asarray(sigma, dtype=np.int64),
            np.asarray(star_of, dtype=np.int64))


def _double_factorial_odd(n):
    """(2n-1)!! for n >= 0."""
    return math.prod(range(1, 2 * n, 2))


def pairing_count(star_types):
    """Number of color-respecting perfect matchings, 0 if some color is odd."""
    tally = {}
    for word in star_types:
        for c in word:
            tally[c] = tally.get(c, 0) + 1
    if any(v % 2 for v in tally.values()):
        return 0
    return math.prod(_double_factorial_odd(v // 2) for v in tally.values())


def _check_budget(star_types, budget):
    size = pairing_count(star_types)
    if budget is not None and size > budget:
        raise BudgetExceeded(f"{size} pairings exceed the enumeration budget {budget}",
                             budget=budget, size=size)
    return size


# --------------------------------------------------------------------------
# genus of one gluing
# --------------------------------------------------------------------------

def genus_of_gluing(d):
    """Euler data of a gluing diagram, per connected component."""
    types = [s.star_type for s in d.stars]
    colors, sigma, star_of = _layout(types)
    H = len(colors)
    alpha = list(d.pairing)
    if len(alpha) != H:
        raise ValueError(f"pairing has {len(alpha)} entries for {H} half-edges")
    for h, p in enumerate(alpha):
        if p is None or p < 0 or p >= H or p == h:
            raise ValueError(f"half-edge {h} is unpaired")
        if alpha[p] != h:
            raise ValueError(f"pairing is not an involution at half-edge {h}")
        if colors[h] != colors[p]:
            raise ValueError(f"half-edges {h} and {p} have different colors")
    nstars = len(types)
    parent = list(range(nstars))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for h, p in enumerate(alpha):
        a, b = find(star_of[h]), find(star_of[p])
        if a != b:
            parent[max(a, b)] = min(a, b)
    comp_of_star = [find(s) for s in range(nstars)]
    roots = sorted(set(comp_of_star))
    V_c = {r: 0 for r in roots}
    E_c = {r: 0 for r in roots}
    F_c = {r: 0 for r in roots}
    for s in range(nstars):
        V_c[comp_of_star[s]] += 1
        if not types[s]:
            F_c[comp_of_star[s]] += 1
    for h in range(H):
        if h < alpha[h]:
            E_c[comp_of_star[star_of[h]]] += 1
    seen = [False] * H
    for h in range(H):
        if seen[h]:
            continue
        F_c[comp_of_star[star_of[h]]] += 1
        x = h
        while not seen[x]:
            seen[x] = True
            x = int(sigma[alpha[x]])
    comps, genera = [], []
    for r in roots:
        chi = V_c[r] - E_c[r] + F_c[r]
        g2 = 2 - chi
        if g2 < 0 or g2 % 2:
            raise AssertionError("Euler characteristic inconsistent with an orientable surface")
        comps.append(tuple(s for s in range(nstars) if comp_of_star[s] == r))
        genera.append(g2 // 2)
    return SurfaceData(V=nstars, E=sum(E_c.values()), F=sum(F_c.values()),
                       components=tuple(comps), genus_per_component=tuple(genera))


# --------------------------------------------------------------------------
# compiled counting kernel
# --------------------------------------------------------------------------

@njit(cache=True)
def _count_kernel(colors, sigma, star_of, nstars, n_empty, n_roots, first_partner, out):
    H = colors.shape[0]
    half = H // 2
    partner = -np.ones(H, dtype=np.int64)
    seen = np.zeros(H, dtype=np.bool_)
    parent = np.empty(nstars, dtype=np.int64)
    if H == 0:
        if n_roots == 0 or n_roots == nstars:
            out[nstars, 0] += 1
        return
    stack_h = np.empty(half, dtype=np.int64)
    stack_c = np.empty(half, dtype=np.int64)
    depth = 0
    stack_h[0] = 0
    stack_c[0] = 1
    while depth >= 0:
        h = stack_h[depth]
        if partner[h] >= 0:
            p = partner[h]
            partner[h] = -1
            partner[p] = -1
        c = stack_c[depth]
        found = -1
        while c < H:
            if partner[c] < 0 and colors[c] == colors[h]:
                if depth > 0 or first_partner < 0 or c == first_partner:
                    found = c
                    break
            c += 1
        if found < 0:
            depth -= 1
            continue
        partner[h] = found
        partner[found] = h
        stack_c[depth] = found + 1
        if depth + 1 == half:
            # faces of sigma∘alpha
            for x in range(H):
                seen[x] = False
            F = n_empty
            for x in range(H):
                if not seen[x]:
                    F += 1
                    y = x
                    while not seen[y]:
                        seen[y] = True
                        y = sigma[partner[y]]
            # components
            for s in range(nstars):
                parent[s] = s
            ncomp = nstars
            for x in range(H):
                a = star_of[x]
                while parent[a] != a:
                    a = parent[a]
                b = star_of[partner[x]]
                while parent[b] != b:
                    b = parent[b]
                if a != b:
                    if a < b:
                        parent[b] = a
                    else:
                        parent[a] = b
                    ncomp -= 1
            if n_roots > 0:
                # every component must contain one of the first n_roots stars
                rooted = 0
                for s in range(n_roots):
                    if parent[s] == s:
                        rooted += 1
                if rooted != ncomp:
                    continue
            g2 = 2 * ncomp - nstars + half - F
            out[ncomp, g2 // 2] += 1
            continue
        nxt = h + 1
        while partner[nxt] >= 0:
            nxt += 1
        depth += 1
        stack_h[depth] = nxt
        stack_c[depth] = nxt + 1


def _kernel_call(args):
    colors, sigma, star_of, nstars, n_empty, n_roots, first_partner, shape = args
    out = np.zeros(shape, dtype=np.int64)
    _count_kernel(colors, sigma, star_of, nstars, n_empty, n_roots, first_partner, out)
    return out


def _tally(star_types, budget=DEFAULT_BUDGET, workers=1, n_roots=0):
    """Array ``out[n_components, total_genus]`` over all gluings of the stars.

    With ``n_roots > 0`` only gluings in which every component contains one of
    the first ``n_roots`` stars are tallied.
    """
    star_types = tuple(tuple(w) for w in star_types)
    size = _check_budget(star_types, budget)
    nstars = len(star_types)
    H = sum(len(w) for w in star_types)
    shape = (nstars + 1, H // 4 + 2)
    if size == 0:
        return np.zeros(shape, dtype=np.int64)
    colors, sigma, star_of = _layout(star_types)
    n_empty = sum(1 for w in star_types if not w)
    if workers <= 1 or H < 4:
        return _kernel_call((colors, sigma, star_of, nstars, n_empty, n_roots, -1, shape))
    partners = [c for c in range(1, H) if colors[c] == colors[0]]
    jobs = [(colors, sigma, star_of, nstars, n_empty, n_roots, c, shape) for c in partners]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(_kernel_call, jobs))
    return sum(parts, np.zeros(shape, dtype=np.int64))


@lru_cache(maxsize=4096)
def _tally_cached(roots, others, budget):
    return _tally(roots + others, budget, n_roots=len(roots))


def tally(star_types, budget=DEFAULT_BUDGET, n_roots=0):
    """Cached :func:`_tally`; counts depend only on the multisets of root and
    non-root star types."""
    types = [tuple(w) for w in star_types]
    roots = tuple(sorted(types[:n_roots]))
    others = tuple(sorted(types[n_roots:]))
    out = _tally_cached(roots, others, budget)
    out.setflags(write=False)
    return out


# --------------------------------------------------------------------------
# public enumeration API
# --------------------------------------------------------------------------

def iter_gluings(stars, budget=DEFAULT_BUDGET):
    """Yield every gluing as a :class:`GluingDiagram`, lexicographically by
    pairing (smallest free half-edge paired first)."""
    stars = list(stars)
    types = [s.star_type for s in stars]
    if _check_budget(types, budget) == 0:
        return
    colors = [c for w in types for c in w]
    H = len(colors)
    partner = [-1] * H

    def rec(h):
        while h < H and partner[h] >= 0:
            h += 1
        if h == H:
            yield GluingDiagram(stars, tuple(partner))
            return
        for c in range(h + 1, H):
            if partner[c] < 0 and colors[c] == colors[h]:
                partner[h], partner[c] = c, h
                yield from rec(h + 1)
                partner[h] = partner[c] = -1

    yield from rec(0)


def enumerate_gluings(stars, filter=None, k=(), budget=DEFAULT_BUDGET, stream=False, workers=1):
    """Count the gluings of ``stars`` by total genus.

    ``filter(genus, n_components)`` selects gluings (default: connected ones).
    With ``stream=True`` returns ``(table, diagrams)`` where ``diagrams`` lists
    the accepted gluings in lexicographic order.
    """
    if filter is None:
        filter = lambda g, ncomp: ncomp == 1
    stars = list(stars)
    types = [s.star_type for s in stars]
    out = _tally(types, budget, workers)
    table = CountTable(connected_only=False, root=types[0] if types else None)
    for ncomp, g in zip(*np.nonzero(out)):
        table.components[(int(ncomp), int(g))] = int(out[ncomp, g])
        if filter(int(g), int(ncomp)):
            key = (int(g), tuple(k))
            table.counts[key] = table.counts.get(key, 0) + int(out[ncomp, g])
    if not stream:
        return table
    diagrams = []
    for d in iter_gluings(stars, budget):
        sd = genus_of_gluing(d)
        if filter(sd.genus, len(sd.components)):
            diagrams.append(d)
    return table, diagrams


def _stars_for(root, k, V):
    k = tuple(k)
    if len(k) != V.n:
        raise ValueError(f"multi-index {k} has wrong length for {V.n} monomials")
    if any(x < 0 for x in k):
        raise ValueError("multi-index entries must be nonnegative")
    types = [] if root is None else [tuple(root)]
    for q, kj in zip(V.monomials, k):
        types.extend([q] * kj)
    return types


def count_rooted(P, k, g, V, budget=DEFAULT_BUDGET):
    """Connected genus-``g`` gluings of one ``P``-star and ``k_j`` labeled ``q_j``-stars."""
    out = tally(_stars_for(P, k, V), budget)
    return int(out[1, g]) if 0 <= g < out.shape[1] else 0


def count_closed(k, g, V, budget=DEFAULT_BUDGET):
    """Connected genus-``g`` gluings of ``k_j`` labeled ``q_j``-stars; 0 for ``k = 0``."""
    types = _stars_for(None, k, V)
    if not types:
        return 0
    out = tally(types, budget)
    return int(out[1, g]) if 0 <= g < out.shape[1] else 0


# --------------------------------------------------------------------------
# exact Gaussian moments
# --------------------------------------------------------------------------

def gue_joint_moment(words, N=None, budget=DEFAULT_BUDGET):
    """``E[prod_s (1/N) tr w_s(A)]`` for independent GUE matrices.

    Every gluing contributes ``N^{F-E-V} = N^{-2h}`` with
    ``h = V - n_components + total_genus``. With ``N=None`` the result is the
    coefficient tuple ``(c_0, c_1, ...)`` of powers of ``N^{-2}``; with an
    integer ``N`` it is the exact rational value.
    """
    types = [tuple(w) for w in words]
    out = tally(types, budget)
    V = len(types)
    coeffs = {}
    for ncomp, g in zip(*np.nonzero(out)):
        h = V - int(ncomp) + int(g)
        coeffs[h] = coeffs.get(h, 0) + int(out[ncomp, g])
    top = max(coeffs, default=-1)
    poly = tuple(coeffs.get(h, 0) for h in range(top + 1))
    if N is None:
        return poly
    N = Fraction(N)
    if N <= 0:
        raise ValueError("N must be positive")
    return sum((c * N ** (-2 * h) for h, c in enumerate(poly)), Fraction(0))


def gue_moment_exact(word, N=None, budget=DEFAULT_BUDGET):
    """``E[(1/N) tr word(A)]`` under the GUE: ``sum_g N^{-2g}`` over one-star gluings."""
    word = tuple(word)
    if not word:
        raise ValueError("word must be nonempty")
    return gue_joint_moment([word], N, budget)


# --------------------------------------------------------------------------
# generating functions
# --------------------------------------------------------------------------

def _multi_indices(n, K):
    for total in range(K + 1):
        for k in itertools.product(range(total + 1), repeat=n):
            if sum(k) == total:
                yield k


def _kfact(k):
    return math.prod(math.factorial(x) for x in k)


def rooted_series(P, V, K, g=0, budget=DEFAULT_BUDGET):
    """``sum_{|k|<=K} (-t)^k / k! * count_rooted(P, k, g, V)`` as a series."""
    coeffs = {}
    for k in _multi_indices(V.n, K):
        c = count_rooted(P, k, g, V, budget)
        if c:
            coeffs[k] = Fraction((-1) ** sum(k) * c, _kfact(k))
    return TruncatedSeries(V.n, K, coeffs)


def planar_series(P, V, K, budget=DEFAULT_BUDGET):
    """Generating function of planar maps rooted at a ``P``-star."""
    return rooted_series(P, V, K, 0, budget)


def closed_series(V, K, g, budget=DEFAULT_BUDGET):
    """``sum_k (-t)^k / k! * C_g^k``; the constant term is 0."""
    coeffs = {}
    for k in _multi_indices(V.n, K):
        if not any(k):
            continue
        c = count_closed(k, g, V, budget)
        if c:
            coeffs[k] = Fraction((-1) ** sum(k) * c, _kfact(k))
    return TruncatedSeries(V.n, K, coeffs)


def rooted_count_table(P, V, g_max, k_max, budget=DEFAULT_BUDGET):
    """:class:`CountTable` of ``count_rooted`` for ``g <= g_max`` and ``|k| <= k_max``."""
    table = CountTable(connected_only=True, root=None if P is None else tuple(P))
    for k in _multi_indices(V.n, k_max):
        for g in range(g_max + 1):
            c = count_closed(k, g, V, budget) if P is None else count_rooted(P, k, g, V, budget)
            if c:
                table.counts[(g, k)] = c
    return table


def joint_moment_series(words, V, K, budget=DEFAULT_BUDGET):
    """Formal ``E_V[prod_r (1/N) tr P_r]`` for the perturbed model.

    Returns ``[S_0, S_1, ...]`` with ``S_h`` the series multiplying ``N^{-2h}``.
    Gluings of the root stars with ``k_j`` labeled ``q_j``-stars contribute
    ``(-t)^k/k! N^{2 n_components - 2 genus - 2 ell}``; components without a
    root cancel against the partition function and are excluded.
    """
    roots = [tuple(w) for w in words]
    ell = len(roots)
    by_h = {}
    for k in _multi_indices(V.n, K):
        out = tally(roots + _stars_for(None, k, V), budget, n_roots=ell)
        weight = Fraction((-1) ** sum(k), _kfact(k))
        for ncomp, g in zip(*np.nonzero(out)):
            h = ell - int(ncomp) + int(g)
            by_h.setdefault(h, {})
            by_h[h][k] = by_h[h].get(k, 0) + weight * int(out[ncomp, g])
    top = max(by_h, default=-1)
    return [TruncatedSeries(V.n, K, by_h.get(h, {})) for h in range(top + 1)]


def pairings_json(diagrams):
    """Pairings as lists of ``[h, partner]`` with ``h < partner``."""
    return [[list(p) for p in d.pairs()] for d in diagrams]
