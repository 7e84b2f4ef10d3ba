"""Command-line front end.

Exit codes: 0 success, 1 verification failure (or non-convergence with
--strict), 2 usage error, 3 sampler/runtime error.

Defaults can come from a plain-text config file (``--config FILE``, one
``key=value`` per line, keys named like the long flags with dashes or
underscores).  Flags given on the command line override the file.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import platform
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import scipy

from . import __version__, baseline, lightcone, multifractal, rng, stats, tree
from .errors import DomainError, FracLatticeError
from .fbm_cov import path_cov, truncation_error
from .grid import make_grid
from .series import IncrementSeries, write_samples_csv

METHODS = ("lightcone", "cholesky", "circulant", "tree", "multifractal")
SUITES = ("identities", "covariance", "scaling", "multifractal")


class UsageError(Exception):
    pass


def _threads(args) -> int:
    if args.threads is not None:
        return max(1, args.threads)
    return max(1, int(os.environ.get("FRACLATTICE_THREADS", "1")))


def _read_config(path: str) -> dict:
    out = {}
    with open(path) as fh:
        for raw in fh:
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"config line without '=': {raw.strip()!r}")
            key, val = (s.strip() for s in line.split("=", 1))
            out[key.replace("-", "_")] = val
    return out


def _versions() -> dict:
    return {
        "fraclattice": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "python": platform.python_version(),
    }


# ---------------------------------------------------------------------------
# sample
# ---------------------------------------------------------------------------

def _validate_sample(a) -> None:
    if not (0.0 < a.hurst < 1.0):
        raise UsageError(f"--hurst must lie in the open interval (0, 1), got {a.hurst}")
    if a.method == "lightcone" and not (0.5 < a.hurst < 1.0):
        raise UsageError(
            f"--method lightcone needs --hurst in the open interval (1/2, 1), got {a.hurst}; "
            "use cholesky or circulant for H <= 1/2"
        )
    if a.n < 1 or a.count < 1:
        raise UsageError("--n and --count must be positive")
    if a.eps <= 0 or a.sigma <= 0:
        raise UsageError("--eps and --sigma must be positive")
    if a.depth is not None and a.depth < a.n:
        raise UsageError(f"--depth ({a.depth}) must be >= --n ({a.n})")
    if a.method == "tree" and not a.params:
        raise UsageError("--method tree needs --params PARAMS.json (see the calibrate command)")
    if a.method == "multifractal":
        if a.multiplier == "lognormal" and a.lam < 0:
            raise UsageError("--lambda must be >= 0")
        if a.multiplier == "cascade" and not 0.0 < a.m0 < 1.0:
            raise UsageError("--m0 must lie in (0, 1)")


def _sample_fn(a):
    """Return (fn(seed) -> IncrementSeries, extra metadata)."""
    depth = a.depth if a.depth is not None else a.n
    grid = make_grid(a.n, a.eps, depth, a.hurst, a.sigma)
    extra: dict = {}
    if a.method == "lightcone":
        table = lightcone.coeff_table(grid)
        extra["rescale"] = table.rescale
        return (lambda s: IncrementSeries(
            lightcone.sample_increment_batch(grid, s, 1, table=table)[0], grid.eps)), extra
    if a.method == "cholesky":
        return (lambda s: baseline.cholesky_sample(grid, s)), extra
    if a.method == "circulant":
        return (lambda s: baseline.circulant_sample(grid, s)), extra
    if a.method == "tree":
        with open(a.params) as fh:
            params, hurst, n_leaves, err = tree.params_from_json(fh.read())
        if a.n > n_leaves:
            raise UsageError(f"--n {a.n} exceeds the calibrated n_leaves {n_leaves}")
        extra.update(calibrated_hurst=hurst, frobenius_rel_error=err)
        return (lambda s: tree.tree_sample(params, a.n, s, eps=a.eps)), extra
    if a.multiplier == "lognormal":
        proc = multifractal.lognormal(a.lam)
    else:
        proc = multifractal.binomial_cascade(a.m0, a.levels)
    return (lambda s: multifractal.sample_multifractal_increments(
        grid, proc, s, decay_exponent=a.virtual_decay_exponent)), extra


SAMPLE_KEYS = ("method", "n", "eps", "hurst", "sigma", "depth", "seed", "count",
               "multiplier", "lam", "m0", "levels", "params", "virtual_decay_exponent")


def cmd_sample(a) -> int:
    if a.from_meta:
        with open(a.from_meta) as fh:
            saved = json.load(fh)["args"]
        for key in SAMPLE_KEYS:
            if key in saved:
                setattr(a, key, saved[key])
    _validate_sample(a)
    fn, extra = _sample_fn(a)
    seeds = [rng.derive_seed(a.seed, i) for i in range(a.count)]
    with ThreadPoolExecutor(_threads(a)) as pool:
        samples = list(pool.map(fn, seeds))
    header = [f"multiplier_seed={a.seed}"] if a.method == "multifractal" else []
    out_path = a.out
    if out_path == "-":
        rows = write_samples_csv(sys.stdout, samples, header)
    else:
        with open(out_path, "w") as fh:
            rows = write_samples_csv(fh, samples, header)
        meta = {
            "command": "sample",
            "args": {k: getattr(a, k) for k in SAMPLE_KEYS},
            "rows": rows,
            "versions": _versions(),
            **extra,
        }
        with open(out_path + ".meta.json", "w") as fh:
            json.dump(meta, fh, indent=2, sort_keys=True)
    print(f"wrote {rows} rows", file=sys.stderr)
    return 0


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------

def _suite_identities(a):
    rows = []
    bad = [(q, n) for q in range(61) for n in range(q + 1)
           if len(set(lightcone.verify_vandermonde(q, n))) != 1]
    rows.append(("vandermonde", "0<=n<=q<=60", len(bad), 0.0, not bad))
    exact, approx = lightcone.verify_stirling_ratio(1000, 5)
    rel = abs(exact - approx) / exact
    rows.append(("stirling_ratio", "q=1000,n=5", rel, 0.02, rel <= 0.02))
    n = 1000
    depth = a.gamma_depth if a.gamma_depth else n**3
    for h in (0.25, 0.7):
        v = lightcone.verify_gamma_limit(n, depth, h)
        rel = abs(v - math.gamma(1 - h)) / math.gamma(1 - h)
        rows.append(("gamma_limit", f"n={n},depth={depth},H={h}", rel, 0.01, rel <= 0.01))
    return rows


def _suite_covariance(a):
    n, h = a.n, a.hurst
    depth = a.depth if a.depth is not None else n * n
    rows = []
    scale = path_cov(n * a.eps, n * a.eps, h, a.sigma)
    grid = make_grid(n, a.eps, depth, h, a.sigma)
    delta = truncation_error(lightcone.model_cov(grid), grid) / scale
    rows.append(("truncation_error", f"N={n},H={h},depth={depth}", delta, 0.05, delta <= 0.05))
    curve = []
    for d in (n, n * n, 4 * n * n):
        g = grid.with_depth(d)
        curve.append(truncation_error(lightcone.model_cov(g), g) / scale)
        rows.append(("truncation_error", f"depth={d}", curve[-1], None, True))
    mono = all(x > y for x, y in zip(curve, curve[1:]))
    rows.append(("truncation_monotone", "depths N,N^2,4N^2", float(mono), None, mono))
    return rows


def _suite_scaling(a):
    n, h = 256, a.hurst
    grid = make_grid(n, 1.0, n, h)
    x = baseline.circulant_batch(grid, a.seed, a.samples)
    paths = np.cumsum(x, axis=1)
    slope, se = stats.variance_growth_fit(paths, grid.times, 1.0, float(n))
    rows = [("variance_growth", f"H={h}", slope, 2 * h, abs(slope - 2 * h) <= 0.05)]
    lags = stats.dyadic_lags(n)
    z, _ = stats.zeta_fit(paths, [1, 2, 3], lags)
    for q, zq in zip((1, 2, 3), z):
        rows.append(("zeta", f"q={q}", zq, q * h, abs(zq - q * h) <= 0.05))
    return rows


def _suite_multifractal(a):
    rows = []
    masses = multifractal.binomial_cascade_measure(0.6, 2)
    ok = np.array_equal(masses, np.array([0.36, 0.24, 0.24, 0.16])) or np.allclose(
        masses, [0.36, 0.24, 0.24, 0.16], rtol=0, atol=1e-15)
    rows.append(("cascade_masses", "m0=0.6,levels=2", float(masses.sum()), 1.0, bool(ok)))
    proc = multifractal.lognormal(0.3)
    m = multifractal.sample_multiplier_values(
        proc, np.array([math.e]), rng.stream(a.seed, rng.MULTIPLIER, 9), a.samples)[:, 0]
    se = m.std(ddof=1) / math.sqrt(m.size)
    rows.append(("lognormal_mean", "lambda=0.3", m.mean(), 1.0, abs(m.mean() - 1) <= 4 * se))
    grid = make_grid(64, 1 / 64, 64, 0.5)
    lhs, rhs, se = multifractal.moment_scaling_check(grid, proc, 0.5, 2, a.samples, a.seed)
    rows.append(("moment_scaling", "lambda=0.3,c=1/2,q=2", lhs - rhs, 4 * se, abs(lhs - rhs) <= 4 * se))
    return rows


def cmd_verify(a) -> int:
    suite = {"identities": _suite_identities, "covariance": _suite_covariance,
             "scaling": _suite_scaling, "multifractal": _suite_multifractal}[a.suite]
    rows = suite(a)
    print("check,param,value,bound,result")
    for name, param, value, bound, ok in rows:
        b = "" if bound is None else f"{bound:.6g}"
        print(f"{name},{param},{value:.6g},{b},{'PASS' if ok else 'FAIL'}")
    return 0 if all(r[-1] for r in rows) else 1


# ---------------------------------------------------------------------------
# calibrate
# ---------------------------------------------------------------------------

def cmd_calibrate(a) -> int:
    if a.n < 1 or a.n & (a.n - 1):
        raise UsageError(f"--n must be a power of two, got {a.n}")
    if not 0.0 < a.hurst < 1.0:
        raise UsageError(f"--hurst must lie in the open interval (0, 1), got {a.hurst}")
    grid = make_grid(a.n, a.eps, a.n, a.hurst, a.sigma)
    params, report = tree.calibrate(grid, a.max_iter, a.tol)
    with open(a.out, "w") as fh:
        fh.write(tree.params_to_json(params, a.hurst, a.n, report.frobenius_rel_error))
    print(json.dumps({
        "frobenius_rel_error": report.frobenius_rel_error,
        "iterations": report.iterations,
        "converged": report.converged,
    }))
    if a.strict and not report.converged:
        return 1
    return 0


# ---------------------------------------------------------------------------
# bench
# ---------------------------------------------------------------------------

def _int_list(text: str) -> list[int]:
    try:
        return [int(tok) for tok in text.replace(",", " ").split()]
    except ValueError as exc:
        raise UsageError(f"--sizes expects integers: {exc}") from exc


def cmd_bench(a) -> int:
    from .bench import run_bench

    methods = [m for m in a.methods.replace(",", " ").split()]
    for m in methods:
        if m not in ("cholesky", "circulant", "tree", "lightcone"):
            raise UsageError(f"unknown benchmark method {m!r}")
    rows, slopes = run_bench(methods, _int_list(a.sizes), a.reps, a.hurst)
    fh = sys.stdout if a.out == "-" else open(a.out, "w")
    try:
        fh.write("method,n,median_seconds\n")
        for method, n, sec in rows:
            fh.write(f"{method},{n},{sec!r}\n")
    finally:
        if fh is not sys.stdout:
            fh.close()
    print("method,slope", file=sys.stderr if a.out == "-" else sys.stdout)
    for method, s in slopes.items():
        print(f"{method},{'' if s is None else f'{s:.4f}'}",
              file=sys.stderr if a.out == "-" else sys.stdout)
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="fraclattice",
        description=__doc__,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    p.add_argument("--config", help="key=value defaults file; explicit flags take precedence")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, n=64, hurst=0.7):
        sp.add_argument("--n", type=int, default=n)
        sp.add_argument("--eps", type=float, default=1.0)
        sp.add_argument("--hurst", type=float, default=hurst)
        sp.add_argument("--sigma", type=float, default=1.0)
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--threads", type=int, default=None,
                        help="worker threads (default: $FRACLATTICE_THREADS or 1)")

    s = sub.add_parser("sample", help="write sampled paths to CSV")
    common(s)
    s.add_argument("--method", choices=METHODS, default="circulant")
    s.add_argument("--depth", type=int, default=None)
    s.add_argument("--count", type=int, default=1)
    s.add_argument("--out", default="-")
    s.add_argument("--multiplier", choices=("lognormal", "cascade"), default="lognormal")
    s.add_argument("--lambda", dest="lam", type=float, default=0.3)
    s.add_argument("--m0", type=float, default=0.6)
    s.add_argument("--levels", type=int, default=20)
    s.add_argument("--virtual-decay-exponent", type=float,
                   default=multifractal.VIRTUAL_DECAY_EXPONENT)
    s.add_argument("--params", help="calibrated tree parameters (JSON)")
    s.add_argument("--from-meta", help="replay the invocation recorded in a .meta.json sidecar")
    s.set_defaults(func=cmd_sample)

    v = sub.add_parser("verify", help="run a verification suite")
    common(v, n=16)
    v.add_argument("--suite", choices=SUITES, required=True)
    v.add_argument("--depth", type=int, default=None)
    v.add_argument("--samples", type=int, default=20_000)
    v.add_argument("--gamma-depth", type=int, default=None,
                   help="virtual depth for the Gamma-limit sum (default n^3)")
    v.set_defaults(func=cmd_verify)

    c = sub.add_parser("calibrate", help="fit the tree sampler to the fGn covariance")
    common(c)
    c.add_argument("--tol", type=float, default=0.05)
    c.add_argument("--max-iter", type=int, default=500)
    c.add_argument("--out", default="params.json")
    c.add_argument("--strict", action="store_true", help="exit 1 if the tolerance is not reached")
    c.set_defaults(func=cmd_calibrate)

    b = sub.add_parser("bench", help="time samplers across sizes")
    b.add_argument("--methods", default="cholesky,circulant,tree")
    b.add_argument("--sizes", default="512,1024,2048,4096")
    b.add_argument("--reps", type=int, default=3)
    b.add_argument("--hurst", type=float, default=0.7)
    b.add_argument("--out", default="-")
    b.set_defaults(func=cmd_bench)
    return p


def _apply_config(parser: argparse.ArgumentParser, argv) -> None:
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return
    cfg = _read_config(known.config)
    for action in parser._subparsers._group_actions:
        for sp in action.choices.values():
            valid = {act.dest: act for act in sp._actions}
            sp.set_defaults(**{
                k: (valid[k].type(v) if valid[k].type else v)
                for k, v in cfg.items() if k in valid
            })


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        _apply_config(parser, argv)
    except (UsageError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2 if args.command in ("sample", "calibrate") else 3
    except (FracLatticeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
