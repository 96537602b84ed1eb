"""Command-line front end.

Subcommands: ``enumerate``, ``solve``, ``free-energy``, ``simulate``,
``quadrature`` and ``check``. Configuration is JSON; words are strings of
color digits (``"1212"``) or ``"X1*X2"``, and exact coefficients are ``"p/q"``
strings. Exit codes: 0 success, 1 invalid input or exceeded cap/budget,
2 a failed check.
"""
from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import sys
from dataclasses import dataclass, field
from fractions import Fraction

from .errors import BudgetExceeded, CapExceeded


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    subcommand: str
    potential: object = None
    K: int | None = None
    D_cap: int | None = None
    g_max: int = 0
    ell_max: int = 1
    ensemble: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)
    format: str = "csv"

    def __post_init__(self):
        for name in ("K", "D_cap"):
            v = getattr(self, name)
            if v is not None and v < 0:
                raise ConfigError(f"field '{name}' must be nonnegative, got {v}")
        if self.g_max < 0:
            raise ConfigError(f"field 'g_max' must be nonnegative, got {self.g_max}")
        if self.ell_max < 1:
            raise ConfigError(f"field 'ell_max' must be positive, got {self.ell_max}")
        if self.format not in ("csv", "json"):
            raise ConfigError(f"unknown format {self.format!r}")


# --------------------------------------------------------------------------
# config parsing
# --------------------------------------------------------------------------

def load_json(path):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None


def parse_value(raw, where):
    """``"p/q"`` strings, integers and JSON floats."""
    if isinstance(raw, bool) or raw is None:
        raise ConfigError(f"{where}: expected a number or 'p/q' string, got {raw!r}")
    if isinstance(raw, (int, float)):
        return raw
    if isinstance(raw, str):
        try:
            return Fraction(raw.strip())
        except (ValueError, ZeroDivisionError):
            raise ConfigError(f"{where}: cannot read {raw!r} as a rational") from None
    raise ConfigError(f"{where}: expected a number or 'p/q' string, got {raw!r}")


def _word(raw, m, where):
    from .ncpoly import parse_word
    if not isinstance(raw, str):
        raise ConfigError(f"{where}: words are strings, got {raw!r}")
    try:
        return parse_word(raw, m)
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from None


def potential_from_json(doc, where="potential"):
    """``{"m": 2, "terms": [["1/20", "1212"], ...]}``; a bare word list gives
    formal couplings without numeric values."""
    from .ncpoly import Potential
    if not isinstance(doc, dict):
        raise ConfigError(f"{where}: expected an object with fields 'm' and 'terms'")
    m = doc.get("m")
    if not isinstance(m, int) or m < 1:
        raise ConfigError(f"{where}.m: expected a positive integer, got {m!r}")
    terms = doc.get("terms", [])
    if not isinstance(terms, list):
        raise ConfigError(f"{where}.terms: expected a list")
    mons, vals = [], []
    for n, term in enumerate(terms):
        at = f"{where}.terms[{n}]"
        if isinstance(term, str):
            mons.append(_word(term, m, at))
            vals.append(None)
        elif isinstance(term, list) and len(term) == 2:
            vals.append(parse_value(term[0], at))
            mons.append(_word(term[1], m, at))
        else:
            raise ConfigError(f"{at}: expected a word or a [value, word] pair")
    if any(v is None for v in vals) and not all(v is None for v in vals):
        raise ConfigError(f"{where}.terms: either all or none of the terms carry a value")
    values = None if not vals or vals[0] is None else tuple(vals)
    try:
        return Potential(m, tuple(mons), values)
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from None


def _load_potential(path):
    doc = load_json(path)
    if isinstance(doc, dict) and "potential" in doc and isinstance(doc["potential"], dict):
        doc = doc["potential"]
    return potential_from_json(doc)


def _fmt_k(k):
    return "(" + ",".join(str(x) for x in k) + ")"


def _fmt_q(v):
    v = Fraction(v)
    return str(v.numerator) if v.denominator == 1 else f"{v.numerator}/{v.denominator}"


def _fmt_word(w):
    from .ncpoly import format_word
    return format_word(w, compact=True) if w else ""


class _Output:
    def __init__(self, path):
        self.path = path
        self.buf = io.StringIO(newline="")

    def csv(self, header, rows):
        writer = csv.writer(self.buf, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
        return self

    def json(self, obj):
        self.buf.write(json.dumps(obj, indent=2, sort_keys=True))
        self.buf.write("\n")
        return self

    def close(self):
        text = self.buf.getvalue()
        if self.path in (None, "-"):
            sys.stdout.write(text)
        else:
            with open(self.path, "w", newline="") as fh:
                fh.write(text)


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------

def cmd_enumerate(args):
    from .mapenum import (Star, _multi_indices, _stars_for, enumerate_gluings, pairing_count,
                          pairings_json, tally)
    V = _load_potential(args.potential)
    root = _word(args.root, V.m, "--root") if args.root is not None else None
    if root == ():
        raise ConfigError("--root: the root word must be nonempty")
    cfg = RunConfig("enumerate", V, K=args.kmax, g_max=args.gmax)
    rows, pairings = [], []
    for k in _multi_indices(V.n, cfg.K):
        types = _stars_for(root, k, V)
        if not types:
            continue
        out = tally(types, args.budget, n_roots=1 if root is not None else 0)
        for g in range(cfg.g_max + 1):
            c = int(out[1, g]) if g < out.shape[1] else 0
            rows.append((g, _fmt_k(k), c))
        if args.pairings:
            if pairing_count(types) > args.pairings_limit:
                raise ConfigError(f"--pairings: {pairing_count(types)} gluings at k={_fmt_k(k)} exceed "
                                  f"--pairings-limit {args.pairings_limit}")
            stars = [Star(t, n) for n, t in enumerate(types)]
            _, diagrams = enumerate_gluings(stars, filter=lambda g, nc: nc == 1 and g <= cfg.g_max,
                                            budget=args.budget, stream=True)
            from .mapenum import genus_of_gluing
            for d, pairs in zip(diagrams, pairings_json(diagrams)):
                pairings.append({"k": list(k), "genus": genus_of_gluing(d).genus, "pairs": pairs})
    _Output(args.out).csv(["genus", "k", "count"], rows).close()
    if args.pairings:
        _Output(args.pairings).json(pairings).close()
    return 0


def _solver_for(V, K, D_cap, max_degree):
    from .sdsolver import SDSolver
    return SDSolver(V, K, D_cap=D_cap, max_degree=max_degree)


def _series_records(s):
    return [{"k": list(k), "value": _fmt_q(v)} for k, v in s.items()]


def cmd_solve(args):
    from .sdsolver import canonical_words, min_genus
    V = _load_potential(args.potential)
    cfg = RunConfig("solve", V, K=args.K, D_cap=args.dcap, g_max=args.gmax, ell_max=args.lmax,
                    format=args.format)
    if args.word is not None:
        word = _word(args.word, V.m, "--word")
        solver = _solver_for(V, cfg.K, cfg.D_cap, max(len(word), 1))
        rows = []
        for g in range(cfg.g_max + 1):
            for k, v in solver.term(g, word).items():
                rows.append((g, _fmt_k(k), _fmt_q(v)))
        if cfg.format == "csv":
            _Output(args.out).csv(["genus", "k", "coefficient"], rows).close()
        else:
            _Output(args.out).json({"word": _fmt_word(word), "rows": [list(r) for r in rows]}).close()
        return 0
    solver = _solver_for(V, cfg.K, cfg.D_cap, args.max_degree)
    words = canonical_words(V.m, args.max_degree)
    entries = []
    for g in range(cfg.g_max + 1):
        for ell in range(1, cfg.ell_max + 1):
            if ell > 1 and g < min_genus(ell):
                continue
            pool = words if ell == 1 else [w for w in words if w]
            for combo in itertools.combinations_with_replacement(pool, ell):
                if sum(map(len, combo)) > args.max_degree:
                    continue
                s = solver.term(g, combo[0]) if ell == 1 else solver.I(g, *combo)
                recs = _series_records(s)
                if recs or ell == 1:
                    entries.append({"genus": g, "ell": ell, "words": [_fmt_word(w) for w in combo],
                                    "coefficients": recs})
    doc = {"m": V.m, "monomials": [_fmt_word(q) for q in V.monomials], "K": cfg.K,
           "D_cap": solver.D_cap, "entries": entries}
    if cfg.format == "csv":
        out = _Output(args.out)
        writer = csv.writer(out.buf, lineterminator="\n")
        writer.writerow(["genus", "k", "coefficient", "word"])
        for e in entries:
            if e["ell"] == 1:
                for r in e["coefficients"]:
                    writer.writerow([e["genus"], _fmt_k(r["k"]), r["value"], e["words"][0]])
        out.close()
    else:
        _Output(args.out).json(doc).close()
    return 0


def cmd_free_energy(args):
    from .sdsolver import free_energy
    V = _load_potential(args.potential)
    cfg = RunConfig("free-energy", V, K=args.K, g_max=args.gmax)
    F = free_energy(V, cfg.g_max, cfg.K)
    rows = [(g, _fmt_k(k), _fmt_q(v)) for g, s in enumerate(F) for k, v in s.items()]
    _Output(args.out).csv(["genus", "k", "coefficient"], rows).close()
    return 0


def _ensemble(doc, where):
    if not isinstance(doc, dict):
        raise ConfigError(f"{where}: expected a JSON object")
    if "seed" not in doc:
        raise ConfigError(f"{where}.seed: a seed is required")
    seed = doc["seed"]
    if not isinstance(seed, int) or not 0 <= seed < 2 ** 64:
        raise ConfigError(f"{where}.seed: expected a 64-bit nonnegative integer, got {seed!r}")
    m = doc.get("m")
    pot = potential_from_json({"m": m, "terms": doc.get("potential", [])}, f"{where}.potential")
    if pot.n and pot.values is None:
        raise ConfigError(f"{where}.potential: sampling needs numeric [value, word] terms")
    Ns = doc.get("N", [8, 16, 32, 64])
    Ns = [Ns] if isinstance(Ns, int) else Ns
    if not isinstance(Ns, list) or not Ns or not all(isinstance(n, int) and n >= 1 for n in Ns):
        raise ConfigError(f"{where}.N: expected a positive integer or a list of them")
    obs = doc.get("observables", [])
    if not isinstance(obs, list):
        raise ConfigError(f"{where}.observables: expected a list of words")
    words = [_word(w, m, f"{where}.observables[{n}]") for n, w in enumerate(obs)]
    c = doc.get("c", 0.0)
    if not isinstance(c, (int, float)) or not 0 <= c <= 1:
        raise ConfigError(f"{where}.c: expected a number in [0, 1]")
    ints = {}
    for name, default in (("steps", 100_000), ("burn_in", None), ("chains", 4), ("record_every", None)):
        v = doc.get(name, default)
        if v is not None and (not isinstance(v, int) or v < 1):
            raise ConfigError(f"{where}.{name}: expected a positive integer, got {v!r}")
        ints[name] = v
    step = doc.get("step_size")
    if step is not None and (not isinstance(step, (int, float)) or step <= 0):
        raise ConfigError(f"{where}.step_size: expected a positive number")
    return dict(m=m, V=pot, Ns=Ns, words=words, c=float(c), seed=seed, step_size=step,
                override=bool(doc.get("override", False)), **ints)


def cmd_simulate(args):
    from .matmodel import EnsembleConfig, estimate_moment, fit_genus_coefficients, sample_chain
    ens = _ensemble(load_json(args.config), "config")
    if not ens["words"]:
        raise ConfigError("config.observables: at least one observable word is required")
    rows, per_word = [], {w: [] for w in ens["words"]}
    for N in ens["Ns"]:
        cfg = EnsembleConfig(ens["m"], N, ens["V"], c=ens["c"], seed=ens["seed"], override=ens["override"])
        samples = sample_chain(cfg, ens["steps"], step_size=ens["step_size"], burn_in=ens["burn_in"],
                               chains=ens["chains"], observables=ens["words"], record_every=ens["record_every"])
        for w in ens["words"]:
            mean, se = estimate_moment(samples, w)
            rows.append((N, _fmt_word(w), repr(mean), repr(se)))
            per_word[w].append((N, mean, se))
    _Output(args.out).csv(["N", "observable", "mean", "stderr"], rows).close()
    if args.report:
        from .sdsolver import SDSolver, evaluate_series
        V = ens["V"]
        solver = SDSolver(V, args.solve_K, max_degree=max(len(w) for w in ens["words"])) if V.n else None
        report = []
        for w, est in per_word.items():
            entry = {"observable": _fmt_word(w)}
            preds = []
            for g in (0, 1):
                if solver is None:
                    from .mapenum import gue_moment_exact
                    c = gue_moment_exact(w)
                    preds.append(float(c[g]) if g < len(c) else 0.0)
                else:
                    preds.append(evaluate_series(solver.term(g, w), V.exact_values())[0])
            entry["prediction"] = preds
            if len({n for n, _, _ in est}) >= 3:
                fit = fit_genus_coefficients(est)
                entry["fit"] = fit.coefficients.tolist()
                entry["fit_stderr"] = fit.stderr.tolist()
                entry["agree_3se"] = bool(all(abs(f - p) <= 3 * s for f, p, s
                                              in zip(fit.coefficients, preds, fit.stderr)))
            report.append(entry)
        _Output(args.report).json(report).close()
    return 0


def cmd_quadrature(args):
    from .matmodel import EnsembleConfig, quadrature_exact_smallN
    doc = load_json(args.config)
    if isinstance(doc, dict):
        doc = dict(doc, N=1)
        doc.setdefault("seed", 0)
    ens = _ensemble(doc, "config")
    cfg = EnsembleConfig(ens["m"], 1, ens["V"], c=ens["c"], seed=ens["seed"], override=ens["override"])
    rows = [(_fmt_word(w), repr(quadrature_exact_smallN(cfg, w))) for w in ens["words"]]
    _Output(args.out).csv(["observable", "value"], rows).close()
    return 0


# --------------------------------------------------------------------------
# check suites
# --------------------------------------------------------------------------

def _suite_oracle(order):
    from .mapenum import rooted_series
    from .ncpoly import Potential
    from .sdsolver import SDSolver, canonical_words
    for label, V in (("tX^4", Potential(1, ((1, 1, 1, 1),))), ("tX1X2X1X2", Potential(2, ((1, 2, 1, 2),)))):
        solver = SDSolver(V, order, max_degree=4)
        for w in canonical_words(V.m, 4):
            if not w:
                continue
            for g in (0, 1):
                ok = solver.term(g, w) == rooted_series(w, V, order, g)
                yield f"oracle V={label} P={_fmt_word(w)} g={g}", ok


def _suite_limit(order):
    from .ncpoly import Potential
    from .sdsolver import SDSolver, limit_equation_residual
    V = Potential(1, ((1, 1, 1, 1),))
    solver = SDSolver(V, order, max_degree=10)
    for P, rest, g in (((1, 1), (), 0), ((1,), ((1,),), 1), ((1, 1), ((1, 1),), 1), ((1, 1, 1, 1), (), 1)):
        r = limit_equation_residual(solver, P, rest, g)
        yield f"limit P={_fmt_word(P)} rest={[_fmt_word(w) for w in rest]} g={g}", r == r * 0


def _suite_vanishing(order):
    from .ncpoly import Potential
    from .sdsolver import SDSolver, min_genus
    V = Potential(1, ((1, 1, 1, 1),))
    solver = SDSolver(V, order, max_degree=8, use_vanishing_shortcut=False)
    for slots in (((1, 1), (1, 1)), ((1,), (1,), (1, 1)), ((1, 1), (1, 1), (1, 1))):
        for g in range(min_genus(len(slots))):
            s = solver.I(g, *slots)
            yield f"vanishing g={g} slots={[_fmt_word(w) for w in slots]}", s == s * 0


def _suite_quadrature(order):
    from .matmodel import EnsembleConfig, sd_residual_quadrature
    from .ncpoly import Potential
    cfg = EnsembleConfig(1, 1, Potential(1, ((1, 1, 1, 1),), (0.1,)))
    for p in range(order + 1):
        r = sd_residual_quadrature(cfg, (1,) * p, 1)
        yield f"finite-N identity N=1 deg P={p} residual={r:.2e}", abs(r) < 1e-8


SUITES = {"oracle": _suite_oracle, "limit": _suite_limit, "vanishing": _suite_vanishing,
          "quadrature": _suite_quadrature}


def cmd_check(args):
    names = list(SUITES) if args.suite == "all" else [args.suite]
    failed = 0
    for name in names:
        for label, ok in SUITES[name](args.order):
            print(f"{'PASS' if ok else 'FAIL'} {label}")
            failed += not ok
    print(f"{'FAIL' if failed else 'PASS'}: {failed} failed")
    return 2 if failed else 0


# --------------------------------------------------------------------------
# entry point
# --------------------------------------------------------------------------

def build_parser():
    from .mapenum import DEFAULT_BUDGET
    p = argparse.ArgumentParser(prog="mapgenus", description="Genus expansions of perturbed GUE models.")
    sub = p.add_subparsers(dest="command", required=True)

    e = sub.add_parser("enumerate", help="count gluings by genus and star multiplicities")
    e.add_argument("--potential", required=True)
    e.add_argument("--root", help="root word; omit for closed maps")
    e.add_argument("--gmax", type=int, default=1)
    e.add_argument("--kmax", type=int, default=2)
    e.add_argument("--budget", type=int, default=DEFAULT_BUDGET)
    e.add_argument("--pairings", help="write connected gluings as JSON to this path")
    e.add_argument("--pairings-limit", type=int, default=100_000)
    e.add_argument("--out")
    e.set_defaults(func=cmd_enumerate)

    s = sub.add_parser("solve", help="series coefficients from the loop equations")
    s.add_argument("--potential", required=True)
    s.add_argument("--K", type=int, required=True)
    s.add_argument("--dcap", type=int)
    s.add_argument("--gmax", type=int, default=0)
    s.add_argument("--lmax", type=int, default=1)
    s.add_argument("--max-degree", type=int, default=4)
    s.add_argument("--word", help="single word; CSV rows genus,k,coefficient")
    s.add_argument("--format", choices=("csv", "json"), default="json")
    s.add_argument("--out")
    s.set_defaults(func=cmd_solve)

    f = sub.add_parser("free-energy", help="free-energy coefficients per genus")
    f.add_argument("--potential", required=True)
    f.add_argument("--K", type=int, required=True)
    f.add_argument("--gmax", type=int, default=1)
    f.add_argument("--out")
    f.set_defaults(func=cmd_free_energy)

    m = sub.add_parser("simulate", help="finite-N Monte Carlo estimates")
    m.add_argument("--config", required=True)
    m.add_argument("--out")
    m.add_argument("--report", help="JSON comparison against solver predictions")
    m.add_argument("--solve-K", type=int, default=20)
    m.set_defaults(func=cmd_simulate)

    q = sub.add_parser("quadrature", help="N = 1 expectations by quadrature")
    q.add_argument("--config", required=True)
    q.add_argument("--out")
    q.set_defaults(func=cmd_quadrature)

    c = sub.add_parser("check", help="run residual and oracle suites")
    c.add_argument("--suite", choices=sorted(SUITES) + ["all"], default="all")
    c.add_argument("--order", type=int, default=3)
    c.set_defaults(func=cmd_check)
    return p


def run(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (CapExceeded, BudgetExceeded) as exc:
        cap = getattr(exc, "cap", None)
        if cap is None:
            cap = getattr(exc, "budget", None)
        print(f"error: {exc} (cap {cap})", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
