"""Finite-N matrix models ``exp(-N tr(V(A) + ½ Σ A_i²)) dA``.

Sampling uses a Metropolis-adjusted Langevin chain on Hermitian m-tuples:

    A' = A - (h/2) G(A) + √h Z,     G_i(A) = A_i + Herm(D_i V(A)),

with ``Z`` a GUE tuple (``E|Z_kl|² = 1/N``). Because ``∂ tr P / ∂A_i`` is
``D_i P`` in the trace pairing, the drift is the exact gradient of the
log-density divided by ``N``. The Metropolis test uses the exact energy and
proposal densities, so the chain targets the model without discretisation
bias.

The potential and observables are compiled into a small word program (a
table of matrix products, each built from two earlier entries), which a
numba kernel evaluates per chain. Randomness comes from one Philox stream per
chain keyed by ``(seed, chain)``; noise is drawn in fixed-size blocks so the
stream position is a function of the step index.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from numba import njit
from scipy import integrate

from .ncpoly import (Polynomial, Potential, cyclic_derivative_word, is_cyclically_selfadjoint,
                     nc_derivative, parse_word)


# --------------------------------------------------------------------------
# configuration and convexity
# --------------------------------------------------------------------------

@dataclass
class EnsembleConfig:
    """Finite-N model: ``m`` Hermitian ``N x N`` matrices, potential with
    numeric real couplings, claimed convexity margin ``c`` and a seed."""

    m: int
    N: int
    V: Potential
    c: float = 0.0
    seed: int = 0
    override: bool = False

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("N must be positive")
        if self.V.m != self.m:
            raise ValueError(f"potential has {self.V.m} colors, config has {self.m}")
        if self.V.n and self.V.values is None:
            raise ValueError("sampling needs numeric coupling values")
        for v in (self.V.values or ()):
            if isinstance(v, complex):
                raise ValueError("couplings must be real for sampling")


@dataclass
class ConvexityReport:
    passed: bool
    method: str
    witness: object = None
    details: dict = field(default_factory=dict)

    def __bool__(self):
        return self.passed


def _structured_parts(V):
    """Split ``V`` into one-variable polynomials ``P_j(X_j)`` and a quadratic
    form ``β``; ``None`` if some monomial fits neither."""
    vals = V.numeric_values()
    powers = {}
    beta = np.zeros((V.m, V.m))
    for q, t in zip(V.monomials, vals):
        if len(q) == 2:
            beta[q[0] - 1, q[1] - 1] += t
        elif len(set(q)) == 1:
            powers.setdefault(q[0], {})
            powers[q[0]][len(q)] = powers[q[0]].get(len(q), 0.0) + t
        else:
            return None
    return powers, beta


def _convex_1d(coeffs):
    """``p'' >= 0`` on the real line for ``p(x) = Σ coeffs[d] x^d``."""
    deg = max(coeffs, default=0)
    p = np.zeros(deg + 1)
    for d, c in coeffs.items():
        p[deg - d] += c
    p2 = np.polyder(np.poly1d(p), 2)
    if p2.order <= 0:
        return bool(p2(0) >= -1e-14), None
    if p2.order % 2 == 1 or p2.coeffs[0] < 0:
        return False, None
    crit = np.polyder(p2).roots
    crit = crit[np.abs(crit.imag) < 1e-9].real
    grid = np.concatenate([crit, np.linspace(-10, 10, 401)])
    vals = p2(grid)
    k = int(np.argmin(vals))
    return bool(vals[k] >= -1e-12), float(grid[k])


def _phi(V, mats, c):
    """``Re tr(V(A) + (1-c)/2 Σ A_i²)`` at a tuple of Hermitian matrices."""
    vals = V.numeric_values()
    total = 0.0
    for q, t in zip(V.monomials, vals):
        M = mats[q[0] - 1]
        for i in q[1:]:
            M = M @ mats[i - 1]
        total += t * np.trace(M).real
    total += 0.5 * (1.0 - c) * sum(np.vdot(A, A).real for A in mats)
    return total


def _random_hermitian(rng, N, scale):
    X = rng.standard_normal((N, N)) + 1j * rng.standard_normal((N, N))
    return scale * (X + X.conj().T) / 2


def validate_convexity(V, c=0.0, form="auto", trials=400, seed=0):
    """Screen ``V`` for ``c``-convexity.

    Structured form (every monomial a pure power ``X_j^d`` or of degree 2):
    each one-variable part must be convex and ``sym(β) + (1-c)/2 I`` must be
    positive semidefinite, which is exactly convexity of the quadratic part.
    The row-sum bound ``Σ_k |β_kl| < 1-c`` is reported alongside.

    Raw form: random search for a midpoint-convexity violation of
    ``tr(V + (1-c)/2 Σ X²)`` at ``N`` in {1, 2, 4}. Passing is only a
    necessary-condition screen.
    """
    if not 0 <= c <= 1:
        raise ValueError("c must lie in [0, 1]")
    if V.n == 0:
        return ConvexityReport(True, "structured", details={"empty": True})
    parts = _structured_parts(V)
    if form == "structured" and parts is None:
        raise ValueError("potential is not of the structured form (pure powers plus quadratic terms)")
    if form in ("auto", "structured") and parts is not None:
        powers, beta = parts
        details = {}
        for j, coeffs in sorted(powers.items()):
            ok, x = _convex_1d(coeffs)
            details[f"P{j}_convex"] = ok
            if not ok:
                return ConvexityReport(False, "structured", witness={"color": j, "x": x}, details=details)
        sym = 0.5 * (beta + beta.T)
        lam = float(np.linalg.eigvalsh(sym + 0.5 * (1 - c) * np.eye(V.m)).min())
        rows = np.abs(beta).sum(axis=0)
        details.update(min_eigenvalue=lam, row_sums=rows.tolist(), row_sum_condition=bool(np.all(rows < 1 - c)))
        passed = lam >= -1e-12
        witness = None
        if not passed:
            w, vecs = np.linalg.eigh(sym)
            witness = {"direction": vecs[:, 0].tolist()}
        return ConvexityReport(passed, "structured", witness=witness, details=details)
    if form not in ("auto", "raw"):
        raise ValueError(f"unknown form {form!r}")
    if not all(is_cyclically_selfadjoint(Polynomial.monomial(q, V.m)) for q in V.monomials):
        warnings.warn("some monomials are not self-adjoint up to rotation; using real parts of traces")
    rng = np.random.default_rng(seed)
    worst = (0.0, None)
    for trial in range(trials):
        N = (1, 2, 4)[trial % 3]
        scale = 10.0 ** rng.uniform(-1, 1)
        A = [_random_hermitian(rng, N, scale) for _ in range(V.m)]
        B = [_random_hermitian(rng, N, scale) for _ in range(V.m)]
        mid = [(a + b) / 2 for a, b in zip(A, B)]
        gap = 0.5 * (_phi(V, A, c) + _phi(V, B, c)) - _phi(V, mid, c)
        tol = 1e-9 * (1 + abs(_phi(V, A, c)) + abs(_phi(V, B, c)))
        if gap < -tol and gap < worst[0]:
            worst = (gap, {"N": N, "A": [a.tolist() for a in A], "B": [b.tolist() for b in B], "gap": gap})
    if worst[1] is not None:
        return ConvexityReport(False, "raw", witness=worst[1], details={"trials": trials})
    return ConvexityReport(True, "raw", details={"trials": trials})


# --------------------------------------------------------------------------
# word programs
# --------------------------------------------------------------------------

class WordProgram:
    """Products and traces needed for the dynamics and for observables.

    Ids ``0..m-1`` are the matrices themselves, ``-1`` is the identity and
    ``m + k`` is entry ``k`` of the product table. Dynamics products come
    first; observable-only products are evaluated on recording steps only.
    """

    def __init__(self, m):
        self.m = m
        self.ids = {}
        self.left, self.right = [], []
        self.n_dynamic = None

    def word_id(self, word):
        word = tuple(word)
        if not word:
            return -1
        if len(word) == 1:
            return word[0] - 1
        if word in self.ids:
            return self.ids[word]
        h = len(word) // 2
        a, b = self.word_id(word[:h]), self.word_id(word[h:])
        self.left.append(a)
        self.right.append(b)
        self.ids[word] = self.m + len(self.left) - 1
        return self.ids[word]

    def trace_pair(self, word):
        word = tuple(word)
        if len(word) <= 1:
            return self.word_id(word), -1
        h = len(word) // 2
        return self.word_id(word[:h]), self.word_id(word[h:])

    def freeze_dynamics(self):
        self.n_dynamic = len(self.left)

    def arrays(self):
        return np.asarray(self.left, dtype=np.int64), np.asarray(self.right, dtype=np.int64)


def _compile_potential(V, prog):
    vals = V.numeric_values() if V.n else ()
    # energy: Σ_j t_j Re tr q_j
    e_l, e_r, e_c = [], [], []
    for q, t in zip(V.monomials, vals):
        a, b = prog.trace_pair(q)
        e_l.append(a)
        e_r.append(b)
        e_c.append(t)
    # gradient: D_i V as (color, id, coefficient)
    g_ptr = [0]
    g_id, g_c = [], []
    g_const = np.zeros(V.m)
    for i in range(1, V.m + 1):
        acc = {}
        for q, t in zip(V.monomials, vals):
            for w in cyclic_derivative_word(i, q):
                acc[w] = acc.get(w, 0.0) + t
        for w, c in sorted(acc.items()):
            if not w:
                g_const[i - 1] += c
            else:
                g_id.append(prog.word_id(w))
                g_c.append(c)
        g_ptr.append(len(g_id))
    return (np.asarray(e_l, dtype=np.int64), np.asarray(e_r, dtype=np.int64), np.asarray(e_c, dtype=np.float64),
            np.asarray(g_ptr, dtype=np.int64), np.asarray(g_id, dtype=np.int64),
            np.asarray(g_c, dtype=np.float64), g_const)


# --------------------------------------------------------------------------
# numba kernel
# --------------------------------------------------------------------------

@njit(cache=True)
def _mat(A, T, m, idx):
    if idx < m:
        return A[idx]
    return T[idx - m]


@njit(cache=True)
def _eval_products(A, T, m, pl, pr, start, stop):
    for k in range(start, stop):
        a = pl[k]
        b = pr[k]
        if a < m:
            L = A[a]
        else:
            L = T[a - m]
        if b < m:
            R = A[b]
        else:
            R = T[b - m]
        np.dot(L, R, T[k])


@njit(cache=True)
def _trace_pair(A, T, m, a, b):
    N = A.shape[1]
    if a < 0:
        return complex(N)
    if a < m:
        L = A[a]
    else:
        L = T[a - m]
    s = 0j
    if b < 0:
        for i in range(N):
            s += L[i, i]
        return s
    if b < m:
        R = A[b]
    else:
        R = T[b - m]
    for i in range(N):
        for j in range(N):
            s += L[i, j] * R[j, i]
    return s


@njit(cache=True)
def _sq_norm(A, m):
    N = A.shape[1]
    quad = 0.0
    for i in range(m):
        for a in range(N):
            quad += A[i, a, a].real * A[i, a, a].real
            for b in range(a + 1, N):
                z = A[i, a, b]
                quad += 2.0 * (z.real * z.real + z.imag * z.imag)
    return quad


@njit(cache=True)
def _energy(A, T, m, e_l, e_r, e_c, quad):
    N = A.shape[1]
    pot = 0.0
    for e in range(e_l.shape[0]):
        pot += e_c[e] * _trace_pair(A, T, m, e_l[e], e_r[e]).real
    return N * (0.5 * quad + pot)


@njit(cache=True)
def _gradient(A, T, m, g_ptr, g_id, g_c, g_const, G):
    N = A.shape[1]
    for i in range(m):
        for a in range(N):
            for b in range(N):
                G[i, a, b] = 0j
        for k in range(g_ptr[i], g_ptr[i + 1]):
            idx = g_id[k]
            c = g_c[k]
            if idx < m:
                M = A[idx]
            else:
                M = T[idx - m]
            for a in range(N):
                for b in range(N):
                    G[i, a, b] += c * M[a, b]
        # Hermitian part, plus the Gaussian term and constants
        for a in range(N):
            G[i, a, a] = A[i, a, a] + G[i, a, a].real + g_const[i]
            for b in range(a + 1, N):
                h = 0.5 * (G[i, a, b] + G[i, b, a].conjugate())
                G[i, a, b] = A[i, a, b] + h
                G[i, b, a] = A[i, b, a] + h.conjugate()


@njit(cache=True)
def _run_block(X, TX, GX, UX, OBS_X, noise, logu, h, m, pl, pr, n_dyn,
               e_l, e_r, e_c, g_ptr, g_id, g_c, g_const,
               o_l, o_r, record_every, step0, out_obs, out_pos, accepted, bad):
    """Advance every chain by ``noise.shape[1]`` steps.

    ``X, TX, GX, UX`` hold the current state, its product table, drift and
    energy; ``OBS_X`` the current normalized traces. Records land in
    ``out_obs[chain, out_pos + r]``; returns the number of records written.
    A non-finite proposal energy sets ``bad[chain]`` and stops that chain.
    """
    B = X.shape[0]
    N = X.shape[2]
    steps = noise.shape[1]
    n_prod = pl.shape[0]
    n_obs = o_l.shape[0]
    sq = math.sqrt(h)
    inv_sqrt_n = 1.0 / math.sqrt(N)
    inv_sqrt_2n = 1.0 / math.sqrt(2.0 * N)
    Y = np.empty_like(X[0])
    TY = np.empty_like(TX[0])
    GY = np.empty_like(GX[0])
    nrec = 0
    for c in range(B):
        r = 0
        for s in range(steps):
            # proposal
            zz = 0.0
            quad = 0.0
            for i in range(m):
                for a in range(N):
                    d = noise[c, s, i, a, a] * inv_sqrt_n
                    zz += d * d
                    yd = X[c, i, a, a].real - 0.5 * h * GX[c, i, a, a].real + sq * d
                    quad += yd * yd
                    Y[i, a, a] = yd
                    for b in range(a + 1, N):
                        z = complex(noise[c, s, i, a, b], noise[c, s, i, b, a]) * inv_sqrt_2n
                        zz += 2.0 * (z.real * z.real + z.imag * z.imag)
                        y = X[c, i, a, b] - 0.5 * h * GX[c, i, a, b] + sq * z
                        quad += 2.0 * (y.real * y.real + y.imag * y.imag)
                        Y[i, a, b] = y
                        Y[i, b, a] = y.conjugate()
            _eval_products(Y, TY, m, pl, pr, 0, n_dyn)
            uy = _energy(Y, TY, m, e_l, e_r, e_c, quad)
            _gradient(Y, TY, m, g_ptr, g_id, g_c, g_const, GY)
            back = 0.0
            for i in range(m):
                for a in range(N):
                    w = X[c, i, a, a].real - Y[i, a, a].real + 0.5 * h * GY[i, a, a].real
                    back += w * w
                    for b in range(a + 1, N):
                        w = X[c, i, a, b] - Y[i, a, b] + 0.5 * h * GY[i, a, b]
                        back += 2.0 * (w.real * w.real + w.imag * w.imag)
            if not math.isfinite(uy) or not math.isfinite(back):
                bad[c] = 1
                break
            log_alpha = UX[c] - uy - 0.5 * N * back / h + 0.5 * N * zz
            if logu[c, s] < log_alpha:
                X[c] = Y
                GX[c] = GY
                for k in range(n_dyn):
                    TX[c, k] = TY[k]
                UX[c] = uy
                accepted[c] += 1
                if n_obs > 0:
                    _eval_products(X[c], TX[c], m, pl, pr, n_dyn, n_prod)
                    for o in range(n_obs):
                        OBS_X[c, o] = _trace_pair(X[c], TX[c], m, o_l[o], o_r[o]) / N
            if (step0 + s + 1) % record_every == 0 and out_pos >= 0:
                for o in range(n_obs):
                    out_obs[c, out_pos + r, o] = OBS_X[c, o]
                r += 1
        nrec = r
    return nrec


# --------------------------------------------------------------------------
# statistics
# --------------------------------------------------------------------------

def integrated_autocorr_time(x, c=5.0):
    """Sokal's windowed estimate of the integrated autocorrelation time of a
    1-D series (or the mean over the rows of a 2-D array of chains)."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    n = x.shape[1]
    if n < 4:
        return 1.0
    size = 1 << (2 * n - 1).bit_length()
    acf = np.zeros(n)
    for row in x:
        f = np.fft.rfft(row - row.mean(), size)
        ac = np.fft.irfft(f * np.conj(f), size)[:n]
        if ac[0] > 0:
            acf += ac / ac[0]
    acf /= len(x)
    taus = 2.0 * np.cumsum(acf) - 1.0
    window = np.arange(n) >= c * taus
    M = int(np.argmax(window)) if window.any() else n - 1
    return float(max(taus[M], 1.0))


def batch_means(series, batches=20):
    """Mean and batch-means standard error, pooling ``batches`` per chain."""
    x = np.atleast_2d(np.asarray(series, dtype=float))
    T = x.shape[1]
    if T == 0:
        raise ValueError("empty sample set")
    b = min(batches, T)
    size = T // b
    means = x[:, : b * size].reshape(x.shape[0], b, size).mean(axis=2).ravel()
    se = float(means.std(ddof=1) / math.sqrt(means.size)) if means.size > 1 else math.inf
    return float(x.mean()), se, means.size


@dataclass
class ObservableStats:
    mean: float
    stderr: float
    tau: float
    n_samples: int
    n_batches: int


@dataclass
class ChainStats:
    observables: dict
    acceptance_rate: float
    step_size: float
    chains: int
    steps: int

    def __getitem__(self, name):
        return self.observables[name]


@dataclass
class Samples:
    """Recorded normalized traces ``(1/N) tr w(A)`` per chain and record."""

    N: int
    words: list
    traces: np.ndarray          # (chains, records, n_words) complex
    acceptance_rate: float
    step_size: float
    steps: int
    record_every: int
    first_states: list = field(default_factory=list)

    def series(self, word):
        word = tuple(word)
        if not word:
            return np.ones(self.traces.shape[:2])
        if word not in self.words:
            raise KeyError(f"word {word} was not recorded; pass it in observables")
        return self.traces[:, :, self.words.index(word)].real

    def combination(self, terms):
        """Series of ``Σ coeff * Π_s (1/N) tr w_s`` for ``terms = [(coeff, (w_1, ...)), ...]``."""
        out = np.zeros(self.traces.shape[:2])
        for coeff, words in terms:
            prod = np.ones(self.traces.shape[:2], dtype=complex)
            for w in words:
                w = tuple(w)
                if w:
                    prod = prod * self.traces[:, :, self.words.index(w)]
            out += (complex(coeff) * prod).real
        return out

    def stats(self, batches=20):
        obs = {}
        for w in self.words:
            s = self.series(w)
            mean, se, nb = batch_means(s, batches)
            obs[w] = ObservableStats(mean, se, integrated_autocorr_time(s), s.size, nb)
        return ChainStats(obs, self.acceptance_rate, self.step_size, self.traces.shape[0], self.steps)


# --------------------------------------------------------------------------
# sampler
# --------------------------------------------------------------------------

def _chain_rng(seed, chain):
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed) & (2**64 - 1), chain])))


def sample_chain(cfg, steps, step_size=None, burn_in=None, chains=4, observables=(), record_every=None,
                 block=32, target_accept=0.574, adapt=True, keep_first=0):
    """Run ``chains`` independent MALA chains for ``steps`` post-burn-in steps.

    ``observables`` are words whose normalized traces are recorded every
    ``record_every`` steps. The step size adapts towards ``target_accept``
    during burn-in (Robbins-Monro on ``log h``) and is frozen afterwards.
    ``keep_first`` stores the first accepted states of every chain.
    """
    V, N, m = cfg.V, cfg.N, cfg.m
    if steps < 1:
        raise ValueError("steps must be positive")
    if not cfg.override:
        report = validate_convexity(V, cfg.c)
        if not report.passed:
            raise ValueError(f"potential fails the convexity screen ({report.method}); set override=True to sample anyway")
    prog = WordProgram(m)
    energy_and_grad = _compile_potential(V, prog)
    prog.freeze_dynamics()
    words = [tuple(parse_word(w, m) if isinstance(w, str) else w) for w in observables]
    words = list(dict.fromkeys(w for w in words if w))
    o_pairs = [prog.trace_pair(w) for w in words]
    pl, pr = prog.arrays()
    o_l = np.asarray([a for a, _ in o_pairs], dtype=np.int64)
    o_r = np.asarray([b for _, b in o_pairs], dtype=np.int64)
    n_prod = len(pl)
    if burn_in is None:
        burn_in = max(1000, steps // 20)
    if record_every is None:
        record_every = max(1, steps // 250_000)
    h = step_size if step_size is not None else min(0.5, 1.6 * (m * N * N) ** (-1.0 / 3.0))
    rngs = [_chain_rng(cfg.seed, c) for c in range(chains)]
    X = np.zeros((chains, m, N, N), dtype=np.complex128)
    for c in range(chains):
        z = rngs[c].standard_normal((m, N, N))
        for i in range(m):
            X[c, i] = (np.triu(z[i], 1) + np.triu(z[i], 1).T + np.diag(np.diag(z[i])) * math.sqrt(2)) / math.sqrt(2 * N)
    TX = np.zeros((chains, max(n_prod, 1), N, N), dtype=np.complex128)
    GX = np.zeros_like(X)
    UX = np.zeros(chains)
    OBS = np.zeros((chains, len(words)), dtype=np.complex128)
    e_l, e_r, e_c, g_ptr, g_id, g_c, g_const = energy_and_grad
    for c in range(chains):
        _eval_products(X[c], TX[c], m, pl, pr, 0, n_prod)
        UX[c] = _energy(X[c], TX[c], m, e_l, e_r, e_c, _sq_norm(X[c], m))
        _gradient(X[c], TX[c], m, g_ptr, g_id, g_c, g_const, GX[c])
        for o in range(len(words)):
            OBS[c, o] = _trace_pair(X[c], TX[c], m, o_l[o], o_r[o]) / N
    n_rec = steps // record_every
    out = np.zeros((chains, n_rec + 1, len(words)), dtype=np.complex128)
    accepted = np.zeros(chains, dtype=np.int64)
    bad = np.zeros(chains, dtype=np.int64)
    first_states = [[] for _ in range(chains)]
    total = burn_in + steps
    done = 0
    pos = 0
    k = 0
    while done < total:
        n = min(block, total - done)
        if done < burn_in:
            n = min(n, burn_in - done)
        noise = np.empty((chains, n, m, N, N), dtype=np.float32)
        logu = np.empty((chains, n))
        for c in range(chains):
            noise[c] = rngs[c].standard_normal((n, m, N, N), dtype=np.float32)
            logu[c] = np.log(rngs[c].random(n))
        before = accepted.copy()
        recording = done >= burn_in
        if keep_first and any(len(f) < keep_first for f in first_states):
            # single steps so that each accepted state can be captured
            for s in range(n):
                prev = accepted.copy()
                _run_block(X, TX, GX, UX, OBS, noise[:, s:s + 1], logu[:, s:s + 1], h, m, pl, pr,
                           prog.n_dynamic, e_l, e_r, e_c, g_ptr, g_id, g_c, g_const, o_l, o_r,
                           record_every, done + s - (burn_in if recording else 0),
                           out, pos if recording else -1, accepted, bad)
                if recording and (done + s - burn_in + 1) % record_every == 0:
                    pos += 1
                for c in range(chains):
                    if accepted[c] > prev[c] and len(first_states[c]) < keep_first:
                        first_states[c].append(X[c].copy())
            wrote = 0
        else:
            wrote = _run_block(X, TX, GX, UX, OBS, noise, logu, h, m, pl, pr, prog.n_dynamic,
                               e_l, e_r, e_c, g_ptr, g_id, g_c, g_const, o_l, o_r, record_every,
                               done - burn_in if recording else 0, out, pos if recording else -1, accepted, bad)
        if bad.any() or not np.all(np.isfinite(UX)):
            raise FloatingPointError(f"non-finite energy at step size {h:.3g}; reduce the step size")
        if recording:
            pos += wrote
        elif adapt and step_size is None:
            rate = float((accepted - before).sum()) / (n * chains)
            k += 1
            h *= math.exp((rate - target_accept) / (k ** 0.6))
        if done + n == burn_in:
            accepted[:] = 0
        done += n
    rate = float(accepted.sum()) / (steps * chains)
    return Samples(N=N, words=words, traces=out[:, :pos], acceptance_rate=rate, step_size=h,
                   steps=steps, record_every=record_every, first_states=first_states)


def estimate_moment(samples, P, batches=20):
    """``(mean, stderr)`` of ``E[(1/N) tr P(A)]`` from recorded samples.

    ``samples`` is a :class:`Samples` or a sequence of state tuples (arrays of
    shape ``(m, N, N)``) treated as one chain.
    """
    P = tuple(P)
    if isinstance(samples, Samples):
        if not P:
            return 1.0, 0.0
        N = samples.N
        if len(P) > math.sqrt(N):
            warnings.warn(f"degree {len(P)} exceeds sqrt(N) = {math.sqrt(N):.1f}")
        mean, se, _ = batch_means(samples.series(P), batches)
        return mean, se
    states = list(samples)
    if not states:
        raise ValueError("empty sample set")
    if not P:
        return 1.0, 0.0
    vals = []
    for A in states:
        M = A[P[0] - 1]
        for i in P[1:]:
            M = M @ A[i - 1]
        vals.append(np.trace(M).real / A.shape[-1])
    mean, se, _ = batch_means(np.asarray(vals)[None, :], min(batches, len(vals)))
    return mean, se


# --------------------------------------------------------------------------
# Schwinger-Dyson identity at finite N
# --------------------------------------------------------------------------

def sd_identity_terms(V, P, i):
    """Terms of ``μ̂((X_i + D_i V) P) - (μ̂ ⊗ μ̂)(∂_i P)`` as ``[(coeff, words)]``."""
    P = tuple(P)
    vals = V.numeric_values() if V.n else ()
    terms = [(1.0, ((i,) + P,))]
    for q, t in zip(V.monomials, vals):
        for w in cyclic_derivative_word(i, q):
            terms.append((t, (w + P,)))
    for (a, b), c in nc_derivative(i, Polynomial.monomial(P, V.m)).terms.items():
        terms.append((-float(c), (a, b)))
    return terms


@dataclass
class SDResidual:
    mean: float
    stderr: float
    n: int


def check_sd_finite_N(cfg, P, i, steps=20_000, chains=4, samples=None, **kwargs):
    """Monte Carlo residual of ``E[μ̂((X_i + D_iV)P)] = E[(μ̂⊗μ̂)(∂_i P)]``."""
    P = tuple(parse_word(P, cfg.m) if isinstance(P, str) else P)
    terms = sd_identity_terms(cfg.V, P, i)
    words = [w for _, ws in terms for w in ws if w]
    if samples is None:
        samples = sample_chain(cfg, steps, chains=chains, observables=words, **kwargs)
    series = samples.combination(terms)
    mean, se, nb = batch_means(series)
    return SDResidual(mean, se, series.size)


# --------------------------------------------------------------------------
# N = 1 quadrature
# --------------------------------------------------------------------------

def _scalar_potential(V):
    vals = V.numeric_values() if V.n else ()

    def pot(x):
        total = 0.0
        for q, t in zip(V.monomials, vals):
            term = t
            for c in q:
                term = term * x[c - 1]
            total += term
        return total + 0.5 * sum(xi * xi for xi in x)
    return pot


def _observable_fn(obs, m):
    if callable(obs):
        return obs
    if isinstance(obs, Polynomial):
        terms = [(complex(c).real if not hasattr(c, "re") else float(c.re), w) for w, c in obs.terms.items()]
    else:
        w = tuple(parse_word(obs, m) if isinstance(obs, str) else obs)
        terms = [(1.0, w)]

    def f(x):
        total = 0.0
        for c, w in terms:
            term = c
            for k in w:
                term = term * x[k - 1]
            total += term
        return total
    return f


def _radius(pot, m, rng):
    """Radius beyond which the weight is below ``e^{-200}`` of its peak."""
    dirs = [np.eye(m)[k] for k in range(m)] + [-np.eye(m)[k] for k in range(m)]
    dirs += list(rng.standard_normal((16, m)))
    base = pot(np.zeros(m))
    R = 1.0
    while R < 1e4:
        vals = [pot(R * d / np.linalg.norm(d)) for d in dirs]
        if min(vals) > base + 200:
            return R
        R *= 1.5
    raise ValueError("non-integrable tail: the weight does not decay along some direction")


def quadrature_exact_smallN(cfg, observable, epsrel=1e-12):
    """``E[obs]`` at ``N = 1`` for ``m <= 2`` by adaptive quadrature of
    ``obs(x) exp(-(V(x) + ½|x|²))``; matrices are then real scalars."""
    if cfg.N != 1:
        raise ValueError("quadrature oracle needs N = 1")
    m = cfg.m
    if m > 2:
        raise ValueError("quadrature oracle supports m <= 2")
    pot = _scalar_potential(cfg.V)
    f = _observable_fn(observable, m)
    R = _radius(pot, m, np.random.default_rng(0))
    opts = {"epsabs": 0.0, "epsrel": epsrel, "limit": 400}
    if m == 1:
        w = lambda x: math.exp(-pot((x,)))
        Z = integrate.quad(w, -R, R, points=[0.0], **opts)[0]
        # absolute floor so that vanishing (odd) numerators converge
        num = integrate.quad(lambda x: f((x,)) * w(x), -R, R, points=[0.0],
                             **dict(opts, epsabs=1e-15 * Z))[0]
    else:
        w = lambda x, y: math.exp(-pot((x, y)))
        nopts = [{"epsabs": 0.0, "epsrel": epsrel, "limit": 200}] * 2
        Z = integrate.nquad(w, [[-R, R], [-R, R]], opts=nopts)[0]
        nopts = [dict(o, epsabs=1e-13 * Z) for o in nopts]
        num = integrate.nquad(lambda x, y: f((x, y)) * w(x, y), [[-R, R], [-R, R]], opts=nopts)[0]
    return num / Z


def sd_residual_quadrature(cfg, P, i):
    """Quadrature value of the finite-N identity residual at ``N = 1``."""
    P = tuple(parse_word(P, cfg.m) if isinstance(P, str) else P)
    total = 0.0
    for coeff, words in sd_identity_terms(cfg.V, P, i):
        # at N = 1 a product of normalized traces is the product of scalars
        word = tuple(c for w in words for c in w)
        total += coeff * (quadrature_exact_smallN(cfg, word) if word else 1.0)
    return total


# --------------------------------------------------------------------------
# 1/N² fit
# --------------------------------------------------------------------------

@dataclass
class GenusFit:
    coefficients: np.ndarray
    stderr: np.ndarray
    covariance: np.ndarray
    chi2: float
    dof: int


def fit_genus_coefficients(estimates, n_terms=2):
    """Weighted least squares of ``mean ~ Σ_g C^g N^{-2g}``.

    ``estimates`` is a list of ``(N, mean, stderr)``; at least three distinct
    ``N`` are required. Standard errors come from ``(X^T W X)^{-1}``.
    """
    est = sorted(estimates)
    Ns = np.asarray([e[0] for e in est], dtype=float)
    if len(set(Ns)) < max(3, n_terms):
        raise ValueError("need at least three distinct N values")
    y = np.asarray([e[1] for e in est], dtype=float)
    se = np.asarray([e[2] for e in est], dtype=float)
    if np.any(se <= 0):
        raise ValueError("standard errors must be positive")
    x = Ns ** -2.0
    if (x.max() - x.min()) / x.max() < 0.05:
        raise ValueError("ill-conditioned design: the N-grid is too narrow")
    X = np.vander(x, n_terms, increasing=True)
    W = 1.0 / se ** 2
    XtWX = X.T @ (X * W[:, None])
    if np.linalg.cond(XtWX) > 1e12:
        raise ValueError("ill-conditioned design: the N-grid is too narrow")
    cov = np.linalg.inv(XtWX)
    beta = cov @ (X.T @ (W * y))
    resid = y - X @ beta
    chi2 = float(np.sum(W * resid ** 2))
    return GenusFit(beta, np.sqrt(np.diag(cov)), cov, chi2, len(y) - n_terms)
