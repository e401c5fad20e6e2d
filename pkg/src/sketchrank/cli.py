"""``sketchrank`` command-line tool.

Subcommands::

    estimate  numerical rank of a matrix file
    qb        fixed-precision QB factorization of a matrix file
    gen       write a synthetic test matrix plus its true spectrum
    verify    Monte-Carlo and deterministic checks of the sketching bounds
    bench     wall time and accuracy of the estimator over a grid of r1

Exit codes: 0 success, 1 usage or I/O error, 2 the estimator hit its cap,
3 a verify check exceeded its violation budget. Reports go to ``--out`` or,
if omitted, to stdout; diagnostics always go to stderr.
"""
import argparse
import csv
import math
import os
import sys
import time

import numpy as np

from . import theory
from .errors import SketchRankError
from .linalg import singular_values
from .matrixio import read_matrix, write_matrix, write_raw
from .rangefinder import FixedPrecisionConfig, qb_error, re_rangefinder
from .rank import RankEstimateConfig, Status, estimate_rank_adaptive
from .report import write_report
from .sketch import Transform, derive_seed, kind_name, parse_kind
from .synthetic import (FAMILIES, GAP_SPECTRUM, ExpDecay, FactorKind, PolyDecay, make_test_matrix,
                        spectrum)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_HIT_CAP = 2
EXIT_CHECK_FAILED = 3

GEN_FAMILIES = ("sp", "fp", "se", "fe", "gap-coherent", "gap-incoherent")


class UsageError(SketchRankError):
    pass


def _diag(msg):
    print(msg, file=sys.stderr)


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def _int_grid(text):
    text = text.strip()
    if not text:
        return []
    return [int(w) for w in text.split(",") if w.strip()]


def _family(name):
    """Spectrum and factor kind for a ``gen``/``bench`` family name."""
    if name == "gap-coherent":
        return GAP_SPECTRUM, FactorKind.COHERENT_DIAGONAL
    if name == "gap-incoherent":
        return GAP_SPECTRUM, FactorKind.HAAR_INCOHERENT
    if name in FAMILIES:
        return FAMILIES[name], FactorKind.HAAR_INCOHERENT
    raise UsageError(f"unknown family {name!r}; choose from {', '.join(GEN_FAMILIES)}")


def _sketch_config(args):
    return {
        "right_kind": parse_kind(args.sketch),
        "left_kind": parse_kind(args.left_sketch),
        "oversample_frac": args.oversample,
        "r2_factor": args.r2_factor,
        "sv_method": args.sv_method,
        "seed": args.seed,
        "max_doublings": args.max_doublings,
    }


def _config_echo(cfg_kwargs, **extra):
    out = {k: v for k, v in cfg_kwargs.items() if not k.endswith("_kind")}
    out["right_sketch"] = kind_name(cfg_kwargs["right_kind"])
    out["left_sketch"] = kind_name(cfg_kwargs["left_kind"])
    out.update(extra)
    return out


# ------------------------------------------------------------------ commands

def cmd_estimate(args):
    a = read_matrix(args.input)
    kw = _sketch_config(args)
    cfg = RankEstimateConfig(eps=args.eps, r1=args.r1, **kw)
    start = time.perf_counter()
    rep = estimate_rank_adaptive(a, cfg)
    elapsed = (time.perf_counter() - start) * 1e3
    report = {"command": "estimate", "input": str(args.input), "shape": list(a.shape),
              "config": _config_echo(kw, eps=args.eps, r1=args.r1), "wall_time_ms": elapsed}
    report.update(rep.to_dict())
    write_report(report, args.out, sys.stdout)
    if rep.status is Status.HIT_CAP:
        _diag(f"estimate: every estimate exceeded eps at r1={rep.rounds[-1][0]}; "
              "rerun with a larger --r1 or --max-doublings")
        return EXIT_HIT_CAP
    return EXIT_OK


def cmd_qb(args):
    a = read_matrix(args.input)
    kw = _sketch_config(args)
    cfg = FixedPrecisionConfig(eps=args.eps, r1=args.r1, p=args.p, **kw)
    start = time.perf_counter()
    qb, rep = re_rangefinder(a, cfg)
    elapsed = (time.perf_counter() - start) * 1e3
    report = {"command": "qb", "input": str(args.input), "shape": list(a.shape),
              "config": _config_echo(kw, eps=args.eps, r1=args.r1, p=args.p),
              "wall_time_ms": elapsed, "target_rank": int(qb.target_rank),
              "qb_rank": int(qb.rank), "achieved_residual": qb_error(a, qb)}
    report.update(rep.to_dict())
    if args.q_out:
        write_raw(args.q_out, qb.q)
    if args.b_out:
        write_raw(args.b_out, qb.b)
    write_report(report, args.out, sys.stdout)
    if rep.status is Status.HIT_CAP:
        _diag("qb: no rank within the sketch met the error bound; result uses the whole sketch")
        return EXIT_HIT_CAP
    return EXIT_OK


def sidecar_path(out):
    root, _ = os.path.splitext(str(out))
    return root + ".spectrum.csv"


def cmd_gen(args):
    spec, factors = _family(args.family)
    m = args.n if args.m is None else args.m
    a = make_test_matrix(m, args.n, spec, factors, seed=args.seed)
    write_matrix(args.out, a, args.format)
    side = sidecar_path(args.out)
    with open(side, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "sigma"])
        for i, s in enumerate(spectrum(spec, args.n), start=1):
            w.writerow([i, repr(float(s))])
    _diag(f"gen: wrote {m}x{args.n} {args.family} matrix to {args.out}, spectrum to {side}")
    return EXIT_OK


# verify suites: (check name, default trials, noise floor, runner(seed, trials))

def _sandwich(seed, trials):
    return theory.sandwich_trials(pairs=trials, n=100, r=30, seed=seed)


def _gauss_ratio(seed, trials):
    a = make_test_matrix(500, 500, FAMILIES["fp"], seed=derive_seed(seed, "gauss-ratio"))
    return theory.check_gauss_ratio(a, r=50, trials=trials, max_index=45, seed=seed)


def _embedding(seed, trials):
    a = make_test_matrix(256, 256, FAMILIES["fp"], seed=derive_seed(seed, "embedding"))
    return theory.check_embedding_bounds(a, r=60, leading=10, trials=trials, seed=seed)


def _mixing(seed, trials):
    return theory.check_mixing_coherence(np.eye(1024, 1), Transform.DCT, delta=0.01,
                                         trials=trials, seed=seed)


def _srtt_embedding(seed, trials):
    return theory.check_srtt_embedding(np.eye(65536, 2), eps=0.3, delta=0.1,
                                       transform=Transform.HADAMARD, trials=trials, seed=seed)


def _approx_orth(seed, trials):
    b = make_test_matrix(10_000, 500, FAMILIES["fp"], seed=derive_seed(seed, "approx-orth"))
    return theory.check_approx_orthogonalization(b, r2=1000, trials=trials, seed=seed)


_HEAD = 10.0 ** (-0.1 * np.arange(20))
# constant, slow polynomial and exponential tails behind a shared head
_TAILS = (PolyDecay(0.0), PolyDecay(1.0), ExpDecay(0.5))


def _tails(seed, trials):
    prof = theory.tail_effect_profile(_HEAD, list(_TAILS), r=19, trials=trials, n=1000, seed=seed)
    return theory.check_tail_ordering(prof, last=3)


def _tail_gap(seed, trials):
    prof = theory.tail_effect_profile(_HEAD, list(_TAILS), r=25, trials=trials, n=1000,
                                      tail_scale=1e-4, seed=seed)
    return theory.check_tail_gap(prof, gap_index=20)


def _spiked(seed, trials):
    return theory.check_spiked(n=4000, r=2000, spike=4.0, noise=1.0, trials=trials, seed=seed)


_TAIL_FLOOR = math.ceil(1.0 / (2.0 * theory.mp_tail_probability(4.0)))

SUITES = {
    "sandwich": [("sandwich", 200, 1, _sandwich)],
    "mp": [("mp-expectation", 500, 100, lambda s, t: theory.check_mp_expectation(trials=t, seed=s)),
           ("mp-tail", 10_000, _TAIL_FLOOR, lambda s, t: theory.check_mp_tail(trials=t, seed=s))],
    "gauss-ratio": [("gauss-ratio", 500, 100, _gauss_ratio)],
    "srtt": [("embedding", 100, 20, _embedding),
             ("mixing-coherence", 100, 100, _mixing),
             ("srtt-embedding", 100, 30, _srtt_embedding),
             ("approx-orthogonalization", 10, 1, _approx_orth)],
    "tails": [("tail-ordering", 1000, 100, _tails),
              ("tail-gap", 1000, 100, _tail_gap)],
    "spiked": [("spiked", 50, 20, _spiked)],
}
SUITE_NAMES = tuple(SUITES) + ("all",)


def cmd_verify(args):
    names = list(SUITES) if args.suite == "all" else [args.suite]
    results = []
    for suite in names:
        for check, default, floor, run in SUITES[suite]:
            trials = default if args.trials is None else args.trials
            if trials < floor:
                _diag(f"verify: warning: {check} with {trials} trials is below its noise "
                      f"floor of {floor}; the verdict is not meaningful")
            rep = run(args.seed, trials)
            _diag(f"verify: {check}: {rep.violations} violations "
                  f"(allowed {rep.allowed}) {'PASS' if rep.passed else 'FAIL'}")
            d = rep.to_dict()
            d["suite"] = suite
            results.append(d)
    passed = all(r["passed"] for r in results)
    report = {"command": "verify", "suites": results, "passed": passed,
              "config": {"suite": args.suite, "seed": args.seed, "trials": args.trials}}
    write_report(report, args.out, sys.stdout)
    return EXIT_OK if passed else EXIT_CHECK_FAILED


def cmd_bench(args):
    grid = _int_grid(args.r1)
    if not grid:
        raise UsageError("empty --r1 grid")
    if args.input:
        a = read_matrix(args.input)
        sigma = singular_values(a)
    else:
        spec, factors = _family(args.family)
        m = args.n if args.m is None else args.m
        a = make_test_matrix(m, args.n, spec, factors, seed=args.seed)
        sigma = spectrum(spec, args.n)
    kw = _sketch_config(args)
    rows = []
    for r1 in grid:
        cfg = RankEstimateConfig(eps=args.eps, r1=r1, **kw)
        best = math.inf
        for _ in range(args.repeats):
            start = time.perf_counter()
            rep = estimate_rank_adaptive(a, cfg)
            best = min(best, (time.perf_counter() - start) * 1e3)
        nxt = sigma[rep.r_hat] if rep.r_hat < sigma.size else 0.0
        rows.append((r1, best, rep.r_hat, nxt / args.eps))
    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        w = csv.writer(fh)
        w.writerow(["r1", "wall_time_ms", "r_hat", "sigma_ratio"])
        for r1, ms, r_hat, ratio in rows:
            w.writerow([r1, f"{ms:.3f}", r_hat, f"{ratio:.6g}"])
    finally:
        if fh is not sys.stdout:
            fh.close()
    return EXIT_OK


# ------------------------------------------------------------------ parsing

def _add_sketch_args(p, max_doublings):
    p.add_argument("--sketch", default="srtt",
                   help="right sketch: gaussian, srtt[-dct|-hadamard], hrtt[-dct|-hadamard]")
    p.add_argument("--left-sketch", default="srtt", help="left sketch kind (same choices)")
    p.add_argument("--oversample", type=float, default=0.10, help="right oversampling fraction")
    p.add_argument("--r2-factor", type=float, default=2.0, help="left sketch size over right")
    p.add_argument("--sv-method", choices=("full-svd", "qr-diag"), default="full-svd")
    p.add_argument("--max-doublings", type=int, default=max_doublings,
                   help="times r1 may double when every estimate exceeds eps")
    p.add_argument("--seed", type=int, default=0)


def build_parser():
    parser = argparse.ArgumentParser(prog="sketchrank",
                                     description="Numerical rank estimation by sketching.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("estimate", help="estimate the eps-rank of a matrix file")
    p.add_argument("input")
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--r1", type=_positive_int, required=True, help="rank cap")
    _add_sketch_args(p, 0)
    p.add_argument("--out", help="report path (stdout if omitted)")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("qb", help="fixed-precision QB factorization")
    p.add_argument("input")
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--r1", type=_positive_int, required=True)
    p.add_argument("--p", type=int, default=10, help="rangefinder oversampling (>= 2)")
    _add_sketch_args(p, 6)
    p.add_argument("--out", help="report path (stdout if omitted)")
    p.add_argument("--q-out", help="write Q as a raw f64 file")
    p.add_argument("--b-out", help="write B as a raw f64 file")
    p.set_defaults(func=cmd_qb)

    p = sub.add_parser("gen", help="write a synthetic test matrix")
    p.add_argument("family", choices=GEN_FAMILIES)
    p.add_argument("--n", type=_positive_int, default=2000)
    p.add_argument("--m", type=_positive_int, help="rows (defaults to n)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--format", choices=("raw", "mm-array", "mm-coordinate"),
                   help="file format (default from the extension: .mtx or raw)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("verify", help="check the sketching bounds numerically")
    p.add_argument("suite", choices=SUITE_NAMES)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trials", type=_positive_int, help="override every check's trial count")
    p.add_argument("--out", help="report path (stdout if omitted)")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("bench", help="time the estimator over an r1 grid")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--input")
    src.add_argument("--family", choices=GEN_FAMILIES)
    p.add_argument("--n", type=_positive_int, default=2000)
    p.add_argument("--m", type=_positive_int)
    p.add_argument("--r1", required=True, help="comma-separated grid, e.g. 50,100,200")
    p.add_argument("--eps", type=float, default=1e-2)
    p.add_argument("--repeats", type=_positive_int, default=3, help="timing uses the minimum")
    _add_sketch_args(p, 0)
    p.add_argument("--out", help="CSV path (stdout if omitted)")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_ERROR
    try:
        return args.func(args)
    except (SketchRankError, ValueError, OSError, MemoryError) as exc:
        _diag(f"{args.command}: error: {exc}")
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
