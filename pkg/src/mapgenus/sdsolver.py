"""Order-by-order solution of the Schwinger-Dyson hierarchy.

The planar moments ``μ(P)`` and the corrections ``I_g(P_1 ⊗ ... ⊗ P_ℓ)`` are
exact truncated power series in the couplings. They are computed by peeling
the first letter ``X_i`` of the first slot:

    μ(X_i P) = -Σ_j t_j μ(D_i q_j · P) + Σ_{P = R X_i S} μ(R) μ(S)

    I_g(X_i P_1 ⊗ rest) = -Σ_j t_j I_g(D_i q_j · P_1 ⊗ rest)
        + Σ_{P_1 = R X_i S} [I_g(R ⊗ S ⊗ rest) + μ(R) I_g(S ⊗ rest) + I_g(R ⊗ rest) μ(S)]
        + Σ_{r ≥ 2} Σ_{P_r = R X_i S} [μ(SR · P_1) I_{g-1}(rest ∖ P_r) + I_{g-1}(SR · P_1 ⊗ rest ∖ P_r)]

Each ``t_j`` raises the t-degree, each split lowers the word degree and the
handle terms lower the genus, so memoizing homogeneous components by
``(g, slots, t-degree)`` makes the recursion finite and exact.

Conventions: ``I_g ≡ 0`` for ``g < 0``; with no slot ``I_g = 1`` iff ``g = 0``;
``I_g(1 ⊗ ...) = 0``; and ``I_g = 0`` whenever ``g < ⌊(ℓ+1)/2⌋``.
"""
from __future__ import annotations

import itertools
import math
import sys
import threading
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction

from .errors import CapExceeded
from .ncpoly import (Polynomial, Potential, TensorPolynomial, apply_Xi, canonical_rotation,
                     cyclic_derivative, cyclic_derivative_word, degree_division, nc_derivative,
                     words_up_to)
from .series import TruncatedSeries


def min_genus(ell):
    """Smallest genus with a possibly nonzero ``I_g`` at arity ``ell >= 1``."""
    return (ell + 1) // 2


def _run_deep(fn, *args, **kwargs):
    """Run ``fn`` on a thread with a large stack; the recursion can be deep."""
    if threading.current_thread().name == "mapgenus-deep":
        return fn(*args, **kwargs)
    box = {}

    def target():
        try:
            box["value"] = fn(*args, **kwargs)
        except BaseException as exc:  # re-raised on the caller's thread
            box["error"] = exc

    old_limit = sys.getrecursionlimit()
    old_stack = threading.stack_size()
    sys.setrecursionlimit(max(old_limit, 200_000))
    threading.stack_size(512 * 1024 * 1024)
    try:
        th = threading.Thread(target=target, name="mapgenus-deep")
        th.start()
        th.join()
    finally:
        threading.stack_size(old_stack)
        sys.setrecursionlimit(old_limit)
    if "error" in box:
        raise box["error"]
    return box["value"]


# homogeneous components: dict exponent-tuple -> Fraction

def _hadd(acc, part, scale=1, shift=None):
    for k, v in part.items():
        if shift is not None:
            k = tuple(a + b for a, b in zip(k, shift))
        v = v * scale
        nv = acc.get(k, 0) + v
        if nv:
            acc[k] = nv
        else:
            acc.pop(k, None)


def _hmul(a, b):
    if not a or not b:
        return {}
    out = {}
    for k1, v1 in a.items():
        for k2, v2 in b.items():
            k = tuple(x + y for x, y in zip(k1, k2))
            out[k] = out.get(k, 0) + v1 * v2
    return {k: v for k, v in out.items() if v}


def _word_of(P, m):
    if isinstance(P, str):
        from .ncpoly import parse_word
        return parse_word(P, m)
    return tuple(P)


class SDSolver:
    """Memoized solver for one potential, truncated at total t-order ``K``.

    ``D_cap`` bounds the degree of every word the recursion may touch; the
    default leaves room for requests of degree ``max_degree`` (each coupling
    ``t_j`` grows a word by ``deg q_j - 2``).
    """

    def __init__(self, V, K, D_cap=None, max_degree=8, use_vanishing_shortcut=True,
                 canonical=True):
        if K < 0:
            raise ValueError("K must be nonnegative")
        self.V = V
        self.K = K
        self.n = V.n
        self.m = V.m
        self.growth = max(V.max_degree - 2, 0)
        if D_cap is None:
            D_cap = max_degree + K * self.growth
        self.D_cap = D_cap
        self.use_vanishing_shortcut = use_vanishing_shortcut
        self.canonical = canonical
        self._memo = {}
        self._zero_exp = (0,) * self.n
        self._unit = [tuple(1 if a == j else 0 for a in range(self.n)) for j in range(self.n)]
        # cyclic derivatives of the potential, per color: list of (j, word)
        self._dv = {i: [(j, w) for j, q in enumerate(V.monomials) for w in cyclic_derivative_word(i, q)]
                    for i in range(1, self.m + 1)}
        # GF(2) parity reduction against the span of the potential's color-parity vectors
        self._basis = self._parity_basis([self._parity(q) for q in V.monomials])

    # -- bookkeeping ----------------------------------------------------
    @staticmethod
    def _parity(word):
        v = 0
        for c in word:
            v ^= 1 << (c - 1)
        return v

    @staticmethod
    def _parity_basis(vectors):
        basis = []
        for v in vectors:
            for b in basis:
                v = min(v, v ^ b)
            if v:
                basis.append(v)
                basis.sort(reverse=True)
        return basis

    def _parity_reachable(self, slots):
        v = 0
        for w in slots:
            v ^= self._parity(w)
        for b in self._basis:
            v = min(v, v ^ b)
        return v == 0

    def _key(self, slots):
        if self.canonical:
            return tuple(sorted(canonical_rotation(w) for w in slots))
        return tuple(slots)

    def check_request(self, slots):
        total = sum(len(w) for w in slots)
        need = total + self.K * self.growth
        if need > self.D_cap:
            raise CapExceeded(f"words of total degree {total} at order {self.K} need degree cap "
                              f"{need} > {self.D_cap}", cap=self.D_cap, value=need)

    def _series(self, homs):
        coeffs = {}
        for part in homs:
            coeffs.update(part)
        return TruncatedSeries(self.n, self.K, coeffs)

    @property
    def memo_size(self):
        return len(self._memo)

    # -- core recursion -------------------------------------------------
    def _mu(self, word, d):
        """Degree-``d`` component of ``μ(word)``."""
        key = (0, None, self._key((word,))[0] if self.canonical else word, d)
        hit = self._memo.get(key)
        if hit is not None:
            return hit
        word = key[2]
        if len(word) > self.D_cap:
            raise CapExceeded(f"word of degree {len(word)} exceeds the degree cap {self.D_cap}",
                              cap=self.D_cap, value=len(word))
        if not word:
            res = {self._zero_exp: Fraction(1)} if d == 0 else {}
        elif not self._parity_reachable((word,)):
            res = {}
        else:
            i, P = word[0], word[1:]
            res = {}
            if d > 0:
                terms = Counter()
                for j, w in self._dv[i]:
                    terms[(j, w + P)] += 1
                for (j, W), c in terms.items():
                    _hadd(res, self._mu(W, d - 1), -c, self._unit[j])
            splits = Counter()
            for pos, letter in enumerate(P):
                if letter == i:
                    R, S = P[:pos], P[pos + 1:]
                    if self.canonical:
                        R, S = canonical_rotation(R), canonical_rotation(S)
                        if S < R:
                            R, S = S, R
                    splits[(R, S)] += 1
            for (R, S), c in splits.items():
                for a in range(d + 1):
                    _hadd(res, _hmul(self._mu(R, a), self._mu(S, d - a)), c)
        self._memo[key] = res
        return res

    def _I(self, g, slots, d):
        """Degree-``d`` component of ``I_g(slots)``."""
        if g < 0:
            return {}
        ell = len(slots)
        if ell == 0:
            return {self._zero_exp: Fraction(1)} if (g == 0 and d == 0) else {}
        key = (g, self._key(slots), d)
        hit = self._memo.get(key)
        if hit is not None:
            return hit
        slots = key[1]
        res = {}
        if any(not w for w in slots):
            pass
        elif self.use_vanishing_shortcut and g < min_genus(ell):
            pass
        elif not self._parity_reachable(slots):
            pass
        else:
            for w in slots:
                if len(w) > self.D_cap:
                    raise CapExceeded(f"word of degree {len(w)} exceeds the degree cap {self.D_cap}",
                                      cap=self.D_cap, value=len(w))
            first, rest = slots[0], slots[1:]
            i, P1 = first[0], first[1:]
            if d > 0:
                terms = Counter()
                for j, w in self._dv[i]:
                    terms[(j, w + P1)] += 1
                for (j, W), c in terms.items():
                    _hadd(res, self._I(g, (W,) + rest, d - 1), -c, self._unit[j])
            splits = Counter()
            for pos, letter in enumerate(P1):
                if letter == i:
                    splits[(P1[:pos], P1[pos + 1:])] += 1
            for (R, S), c in splits.items():
                _hadd(res, self._I(g, (R, S) + rest, d), c)
                for a in range(d + 1):
                    _hadd(res, _hmul(self._mu(R, a), self._I(g, (S,) + rest, d - a)), c)
                    _hadd(res, _hmul(self._I(g, (R,) + rest, a), self._mu(S, d - a)), c)
            if g >= 1:
                handles = Counter()
                for r, Pr in enumerate(rest):
                    others = rest[:r] + rest[r + 1:]
                    for w in cyclic_derivative_word(i, Pr):
                        handles[(w + P1, others)] += 1
                for (W, others), c in handles.items():
                    for a in range(d + 1):
                        _hadd(res, _hmul(self._mu(W, a), self._I(g - 1, others, d - a)), c)
                    _hadd(res, self._I(g - 1, (W,) + others, d), c)
        self._memo[key] = res
        return res

    # -- public queries -------------------------------------------------
    def mu(self, P):
        """Planar moment ``μ(P)`` as a series; ``P`` is a word, text or polynomial."""
        if isinstance(P, Polynomial):
            return self._linear(P, lambda w: self.mu(w))
        word = _word_of(P, self.m)
        self.check_request((word,))
        return _run_deep(lambda: self._series([self._mu(word, d) for d in range(self.K + 1)]))

    def I(self, g, *slots):
        """``I_g(P_1 ⊗ ... ⊗ P_ℓ)``; slots are words, text or polynomials."""
        if any(isinstance(s, Polynomial) for s in slots):
            return self._multilinear(g, slots)
        words = tuple(_word_of(s, self.m) for s in slots)
        if len(words) == 0:
            return TruncatedSeries.constant(1 if g == 0 else 0, self.n, self.K)
        self.check_request(words)
        return _run_deep(lambda: self._series([self._I(g, words, d) for d in range(self.K + 1)]))

    def term(self, g, P):
        """Coefficient of ``N^{-2g}`` in the ``P``-moment: ``μ`` for ``g = 0``, else ``I_g``."""
        return self.mu(P) if g == 0 else self.I(g, P)

    def _linear(self, P, f):
        acc = TruncatedSeries.zero(self.n, self.K)
        for w, c in P.terms.items():
            acc = acc + f(w) * c
        return acc

    def _multilinear(self, g, slots):
        polys = [s if isinstance(s, Polynomial) else Polynomial.monomial(_word_of(s, self.m), self.m)
                 for s in slots]
        acc = TruncatedSeries.zero(self.n, self.K)
        for combo in itertools.product(*[list(p.terms.items()) for p in polys]):
            coeff = 1
            for _, c in combo:
                coeff = c * coeff
            acc = acc + self.I(g, *[w for w, _ in combo]) * coeff
        return acc

    def moment_series_numeric(self, g, P, t=None):
        """Float value of the ``N^{-2g}`` coefficient at numeric couplings."""
        t = self.V.numeric_values() if t is None else t
        return float(self.term(g, P).evaluate(t))


# --------------------------------------------------------------------------
# tables
# --------------------------------------------------------------------------

@dataclass
class MomentTable:
    """Exact series for one ``(g, ℓ)``, keyed by canonical slot tuples."""

    g: int
    ell: int
    D_cap: int
    entries: dict = field(default_factory=dict)
    planar: bool = False

    def __getitem__(self, slots):
        if self.ell == 1 and (not slots or not isinstance(slots[0], tuple)):
            slots = (tuple(slots),)
        key = tuple(sorted(canonical_rotation(tuple(w)) for w in slots))
        return self.entries[key]

    def __len__(self):
        return len(self.entries)

    def items(self):
        return sorted(self.entries.items(), key=lambda kv: (sum(map(len, kv[0])), kv[0]))


def canonical_words(m, degree):
    """One representative per cyclic class of words of length ``<= degree``."""
    return sorted({canonical_rotation(w) for w in words_up_to(m, degree)}, key=lambda w: (len(w), w))


def solve_planar(V, K, D_cap=None, max_degree=None, solver=None):
    """``μ(P)`` for every cyclic class of words up to the requested degree."""
    growth = max(V.max_degree - 2, 0)
    if max_degree is None:
        if D_cap is None:
            raise ValueError("give D_cap or max_degree")
        max_degree = D_cap - K * growth
    if max_degree < 0:
        raise CapExceeded(f"degree cap {D_cap} leaves no room at order {K}", cap=D_cap, value=K * growth)
    solver = solver or SDSolver(V, K, D_cap=D_cap, max_degree=max_degree)
    table = MomentTable(0, 1, solver.D_cap, planar=True)
    for w in canonical_words(V.m, max_degree):
        table.entries[(w,)] = solver.mu(w)
    return table


def solve_genus(V, g, ell_max, K, D_cap=None, max_degree=4, solver=None):
    """Tables ``I_{g'}`` at arity ``ℓ`` for ``g' <= g``, ``ℓ <= ell_max``, over
    multisets of cyclic classes with total degree ``<= max_degree``."""
    if ell_max < 0:
        raise ValueError("arity must be nonnegative")
    solver = solver or SDSolver(V, K, D_cap=D_cap, max_degree=max_degree)
    words = [w for w in canonical_words(V.m, max_degree) if w]
    out = {}
    for gg in range(0, g + 1):
        for ell in range(1, ell_max + 1):
            table = MomentTable(gg, ell, solver.D_cap)
            for combo in itertools.combinations_with_replacement(words, ell):
                if sum(map(len, combo)) > max_degree:
                    continue
                table.entries[combo] = solver.I(gg, *combo)
            out[(gg, ell)] = table
    return out


# --------------------------------------------------------------------------
# identities and derived quantities
# --------------------------------------------------------------------------

def _tensor_I(solver, g, T, rest):
    """``I_g`` applied to ``T ⊗ rest`` for ``T`` in the tensor square."""
    acc = TruncatedSeries.zero(solver.n, solver.K)
    for (a, b), c in T.terms.items():
        acc = acc + solver.I(g, a, b, *rest) * c
    return acc


def _poly_I(solver, g, P, rest):
    acc = TruncatedSeries.zero(solver.n, solver.K)
    for w, c in P.terms.items():
        acc = acc + solver.I(g, w, *rest) * c
    return acc


def limit_equation_residual(solver, P, rest, g):
    """Left minus right side of the limit equation at genus ``g``:

        I_g(ΞP ⊗ rest) = Σ_i I_g(∂_i D_i P̄ ⊗ rest)
            + Σ_{r,i} [μ(D_i P_r · D_i P̄) I_{g-1}(rest ∖ P_r) + I_{g-1}(D_i P_r · D_i P̄ ⊗ rest ∖ P_r)]

    ``P`` is a word or polynomial, ``rest`` a tuple of words.
    """
    m, K = solver.m, solver.K
    if not isinstance(P, Polynomial):
        P = Polynomial.monomial(_word_of(P, m), m)
    rest = tuple(_word_of(w, m) for w in rest)
    mu = lambda w: solver.mu(w)
    XiP = apply_Xi(P, solver.V, mu, K)
    lhs = _poly_I(solver, g, XiP, rest)
    Pbar = degree_division(P)
    rhs = TruncatedSeries.zero(solver.n, K)
    for i in range(1, m + 1):
        DP = cyclic_derivative(i, Pbar)
        rhs = rhs + _tensor_I(solver, g, nc_derivative(i, DP), rest)
        for r, Pr in enumerate(rest):
            others = rest[:r] + rest[r + 1:]
            prod = cyclic_derivative(i, Polynomial.monomial(Pr, m)) * DP
            for w, c in prod.terms.items():
                rhs = rhs + solver.mu(w) * solver.I(g - 1, *others) * c
                rhs = rhs + solver.I(g - 1, w, *others) * c
    return lhs - rhs


def moment_expansion(P, g_max, V=None, K=None, solver=None):
    """``[μ(P), I_1(P), ..., I_{g_max}(P)]``."""
    if solver is None:
        if V is None or K is None:
            raise ValueError("give a solver or both V and K")
        solver = SDSolver(V, K, max_degree=len(_word_of(P, V.m)) if not isinstance(P, Polynomial)
                          else max(P.degree(), 0))
    return [solver.term(g, P) for g in range(g_max + 1)]


def free_energy(V, g_max, K, solver=None):
    """``[F^0, ..., F^{g_max}]`` by α-integration of ``-E[μ̂(V_t)]`` term by term.

    The coefficient of ``t^k`` (``|k| >= 1``) in ``F^g`` is
    ``-(1/|k|) Σ_j [t^{k-e_j}] E_g(q_j)``, with ``E_0 = μ`` and ``E_g = I_g``.
    """
    if K < 1:
        return [TruncatedSeries.zero(V.n, max(K, 0)) for _ in range(g_max + 1)]
    solver = solver or SDSolver(V, K - 1, max_degree=V.max_degree)
    if solver.K < K - 1:
        raise CapExceeded(f"solver order {solver.K} is below the needed {K - 1}", cap=solver.K, value=K - 1)
    out = []
    for g in range(g_max + 1):
        coeffs = {}
        for j, q in enumerate(V.monomials):
            s = solver.term(g, q)
            for k, v in s.items():
                if sum(k) > K - 1:
                    continue
                kk = tuple(a + (1 if b == j else 0) for b, a in enumerate(k))
                coeffs[kk] = coeffs.get(kk, 0) - Fraction(v, sum(kk))
        out.append(TruncatedSeries(V.n, K, coeffs))
    return out


def derivative_expansion(j, series):
    """Formal ``∂^j/∂t^j`` of a series or of every member of a list of series."""
    if isinstance(series, (list, tuple)):
        return [s.derivative(j) for s in series]
    return series.derivative(j)


def two_vertex_identity_check(P, j, V=None, K=None, solver=None, extra=()):
    """Residuals tying ``I_1(P ⊗ q_j)`` to planar quantities.

    Returns a dict with

    * ``derivative``: ``I_1(P ⊗ q_j) + ∂μ(P)/∂t_j`` (truncated one order lower),
    * ``factorization``: for odd ``ℓ = 1 + len(extra)``,
      ``I_{(ℓ+1)/2}(P ⊗ extra ⊗ q_j) - Σ_r I_1(P_r ⊗ q_j) I_{(ℓ-1)/2}(others)``,
    * ``value``: ``I_1(P ⊗ q_j)`` itself.
    """
    if solver is None:
        solver = SDSolver(V, K, max_degree=len(P) + sum(len(w) for w in extra) + V.max_degree)
    V = solver.V
    q = V.monomials[j]
    P = _word_of(P, V.m)
    extra = tuple(_word_of(w, V.m) for w in extra)
    value = solver.I(1, P, q)
    e = tuple(1 if a == j else 0 for a in range(V.n))
    dmu = solver.mu(P).derivative(e)
    derivative = value.truncate(dmu.order) + dmu
    out = {"value": value, "derivative": derivative}
    slots = (P,) + extra
    ell = len(slots)
    if ell % 2 == 1:
        lhs = solver.I((ell + 1) // 2, *slots, q)
        rhs = TruncatedSeries.zero(V.n, solver.K)
        for r, Pr in enumerate(slots):
            others = slots[:r] + slots[r + 1:]
            rhs = rhs + solver.I(1, Pr, q) * solver.I((ell - 1) // 2, *others)
        out["factorization"] = lhs - rhs
    return out


def growth_diagnostic(table):
    """``max |coefficient|^{1/deg}`` over the non-constant words of a table."""
    best = 0.0
    for slots, s in table.items():
        deg = sum(len(w) for w in slots)
        if deg == 0:
            continue
        for _, v in s.items():
            if v:
                best = max(best, math.exp(math.log(abs(float(v))) / deg))
    return best


# --------------------------------------------------------------------------
# numeric evaluation beyond the disc of convergence
# --------------------------------------------------------------------------

def ray_coefficients(series, t):
    """Coefficients ``a_d`` of ``s -> f(s t)`` as exact rationals (or floats)."""
    exact = all(isinstance(x, (int, Fraction)) for x in t)
    a = [Fraction(0) if exact else 0.0 for _ in range(series.order + 1)]
    for k, v in series.items():
        term = v if exact else float(v)
        for x, e in zip(t, k):
            term = term * x ** e
        a[sum(k)] += term
    return a


def singularity_estimate(coeffs, tail=8):
    """Distance to the nearest singularity of ``sum a_d s^d`` and whether it
    sits on the negative axis, from a Domb-Sykes fit of ``a_d/a_{d-1}``
    against ``1/d`` over the last ``tail`` ratios."""
    ratios = [(d, float(coeffs[d]) / float(coeffs[d - 1]))
              for d in range(1, len(coeffs)) if coeffs[d - 1] and coeffs[d]]
    if len(ratios) < 3:
        return math.inf, True
    ratios = ratios[-tail:]
    negative = all(r < 0 for _, r in ratios)
    xs = [1.0 / d for d, _ in ratios]
    ys = [abs(r) for _, r in ratios]
    n = len(xs)
    mx, my = sum(xs) / n, sum(ys) / n
    sxx = sum((x - mx) ** 2 for x in xs)
    slope = sum((x - mx) * (y - my) for x, y in zip(xs, ys)) / sxx if sxx else 0.0
    inv_radius = my - slope * mx
    if inv_radius <= 0:
        return math.inf, negative
    return 1.0 / inv_radius, negative


def conformal_coefficients(coeffs, rho):
    """Re-expand ``f(s)`` in ``w`` where ``s = 4 rho w / (1 - w)^2``.

    The map sends the unit disc onto the plane cut along ``(-inf, -rho]``,
    so the ``w``-series converges wherever ``f`` is analytic off that cut.
    Exact when ``coeffs`` and ``rho`` are rationals.
    """
    K = len(coeffs) - 1
    out = [0 * coeffs[0] for _ in range(K + 1)]
    for k, c in enumerate(coeffs):
        if not c:
            continue
        scale = c * (4 * rho) ** k
        # w^k (1 - w)^(-2k) = sum_n binom(2k + n - 1, n) w^(k + n)
        for n in range(K - k + 1):
            b = math.comb(2 * k + n - 1, n) if k else (1 if n == 0 else 0)
            if b:
                out[k + n] += scale * b
    return out


def evaluate_series(series, t, rho=None, method="auto"):
    """Numeric value of a truncated series at couplings ``t``.

    ``method="direct"`` sums the coefficients. ``"conformal"`` continues the
    ray function ``s -> f(s t)`` through the conformal map of the plane cut
    along the negative axis (singularity at ``-rho`` in ``s``, estimated from
    the coefficients when not given). ``"auto"`` sums directly well inside the
    estimated disc of convergence and maps otherwise.

    ``rho`` is measured along the ray: the singularity sits at ``s = -rho``,
    i.e. at couplings ``-rho * t``.

    Returns ``(value, tail)`` where ``tail`` is the magnitude of the last
    summed term, a truncation diagnostic.
    """
    coeffs = ray_coefficients(series, tuple(Fraction(x).limit_denominator(10**12)
                                            if isinstance(x, float) else x for x in t))
    est, negative = singularity_estimate(coeffs)
    if method == "auto":
        method = "direct" if est >= 3.0 else "conformal"
    if method == "direct":
        value = sum(float(c) for c in coeffs)
        return value, abs(float(coeffs[-1]))
    if method != "conformal":
        raise ValueError(f"unknown method {method!r}")
    if rho is None:
        if not negative:
            raise ValueError("nearest singularity is not on the negative axis; give rho explicitly")
        rho = est
    rho = Fraction(rho).limit_denominator(10**9) if not isinstance(rho, Fraction) else rho
    wc = conformal_coefficients(coeffs, rho)
    r = math.sqrt(1.0 + 1.0 / float(rho))
    w = (r - 1.0) / (r + 1.0)
    terms = [float(c) * w ** k for k, c in enumerate(wc)]
    return math.fsum(terms), abs(terms[-1])
