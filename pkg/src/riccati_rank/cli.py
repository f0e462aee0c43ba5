"""
Command-line interface.

Exit codes: 0 success, 2 config error, 3 numerical failure, 4 acceptance
failure. ``RICCATI_RANK_THREADS`` caps the number of parallel seeds in a sweep.
"""

import argparse
import json
import os
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import acceptance, experiment
from .config import PRESETS, RunConfig, config_to_dict, load_config, preset
from .errors import InvalidInput, RiccatiRankError
from .gramian import THETA_OBS, uniform_observability_scan
from .lyapunov import qr_exponents
from .spectral import jordan_probe
from .system import operator_stream

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_ACCEPTANCE = 0, 2, 3, 4
THREADS_ENV = "RICCATI_RANK_THREADS"


def _add_common(p, out=True):
    src = p.add_mutually_exclusive_group()
    src.add_argument("--config", metavar="PATH", help="JSON run configuration")
    src.add_argument("--preset", metavar="NAME", choices=PRESETS, help="named experiment")
    p.add_argument("--seed", type=int, help="override system.seed")
    if out:
        p.add_argument("--out", metavar="DIR", help="output directory")


def build_parser():
    parser = argparse.ArgumentParser(prog="riccati-rank", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run an experiment and write CSV, SVG and metadata")
    _add_common(p)
    p.add_argument("--no-svg", action="store_true", help="skip SVG figures")
    p.add_argument("--seeds", metavar="N,N,...",
                   help="sweep: one run per seed, each in <out>/seed_<N>, run in parallel")

    p = sub.add_parser("verify", help="acceptance suite, or the run checks of one config")
    _add_common(p)
    p.add_argument("--criteria", metavar="ID,ID,...", help="subset of acceptance criteria")
    p.add_argument("--eps", type=float, help="override the collapse threshold of the config")

    p = sub.add_parser("lyapunov", help="QR-method Lyapunov exponents of a configured system")
    _add_common(p)
    p.add_argument("--horizon", type=int, help="number of steps (default: the config horizon)")

    p = sub.add_parser("probe-jordan", help="singular values of Jordan block powers")
    p.add_argument("--lam", default="0.5", help="eigenvalue, complex allowed (e.g. 0.3+0.4j)")
    p.add_argument("--k", type=int, default=2, help="block size")
    p.add_argument("--n", default="10,100,1000", help="comma-separated powers")
    p.add_argument("--out", metavar="DIR", help="write jordan_probe.csv here")

    p = sub.add_parser("gramian", help="observability Gramian scan of a configured system")
    _add_common(p)
    return parser


def _int_list(text):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise InvalidInput(f"expected comma-separated integers, got {text!r}") from exc


def config_from_args(args, **extra):
    overrides = {"seed": args.seed}
    out = getattr(args, "out", None)
    if out:
        overrides["output_dir"] = out
    if getattr(args, "no_svg", False):
        overrides["emit_svg"] = False
    if args.config:
        cfg = load_config(args.config, **overrides)
    else:
        cfg = preset(args.preset or "nonaut30", **overrides)
    if extra:
        cfg = RunConfig(**{**cfg.__dict__, **extra})
    return cfg


def _thread_cap():
    raw = os.environ.get(THREADS_ENV)
    if raw is None:
        return os.cpu_count() or 1
    try:
        return max(1, int(raw))
    except ValueError as exc:
        raise InvalidInput(f"{THREADS_ENV} must be an integer, got {raw!r}") from exc


def _summary(meta):
    lines = [f"d0 measured {meta['d0']['measured']} (target {meta['d0']['target']}), "
             f"collapse onset N* = {meta['collapse_onset']}"]
    for name, c in meta["checks"].items():
        lines.append(f"  [{'PASS' if c['passed'] else 'FAIL'}] {name}: {c['value']}")
    return "\n".join(lines)


def _sweep_one(cfg_and_out):
    cfg, out = cfg_and_out
    return experiment.run(cfg, out)


def cmd_run(args):
    cfg = config_from_args(args)
    if not args.seeds:
        meta = experiment.run(cfg)
        print(f"wrote {len(meta['artifacts'])} files to {cfg.output_dir}")
        print(_summary(meta))
        return EXIT_OK
    seeds = _int_list(args.seeds)
    jobs = []
    for s in seeds:
        sys_spec = cfg.system.with_(seed=s)
        jobs.append((RunConfig(**{**cfg.__dict__, "system": sys_spec, "noise_seed": s}),
                     Path(cfg.output_dir) / f"seed_{s}"))
    workers = min(_thread_cap(), len(jobs))
    if workers == 1:
        metas = [_sweep_one(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            metas = list(pool.map(_sweep_one, jobs))
    for s, meta in zip(seeds, metas):
        print(f"seed {s}: d0 = {meta['d0']['measured']}, passed = {meta['passed']}")
    return EXIT_OK


def _criteria_ids(text):
    ids = [v.strip() for v in text.split(",") if v.strip()]
    unknown = [i for i in ids if i not in acceptance.CRITERIA]
    if unknown:
        raise InvalidInput(f"unknown criteria {unknown}; known: {list(acceptance.CRITERIA)}")
    return ids


def _check_line(c):
    head = f"[{'PASS' if c.passed else 'FAIL'}] {c.name}"
    if c.value == c.value:
        head += f": value {c.value:.3g}, threshold {c.threshold:.3g}"
    return f"{head}; {c.detail}" if c.detail else head


def cmd_verify(args):
    if args.config or args.preset:
        extra = {"eps": args.eps} if args.eps is not None else {}
        cfg = config_from_args(args, **extra)
        res = experiment.evaluate(cfg, strict=False)
        for c in res.checks:
            print(_check_line(c))
        doc = {"kind": "config", "config": config_to_dict(cfg), "passed": res.passed,
               "collapse_onset": None if res.error else experiment.collapse_step(res),
               "checks": {c.name: c.as_dict() for c in res.checks}}
        passed = res.passed
    else:
        ids = _criteria_ids(args.criteria) if args.criteria else None
        results = acceptance.run_all(ids)
        for r in results:
            print(r.line(), flush=True)
        passed = all(r.passed for r in results)
        doc = {"kind": "acceptance", "passed": passed,
               "criteria": {r.id: {"title": r.title, "passed": r.passed, "detail": r.detail,
                                   "seconds": r.seconds} for r in results}}
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        Path(args.out, "verify.json").write_text(json.dumps(doc, indent=2) + "\n")
    return EXIT_OK if passed else EXIT_ACCEPTANCE


def cmd_lyapunov(args):
    cfg = config_from_args(args)
    N = args.horizon or cfg.system.horizon
    spec = cfg.system.with_(horizon=N)
    lyap = qr_exponents(operator_stream(spec), N)
    print(f"d0 = {lyap.d0}  (sum check: {lyap.exponents.sum():.6g} vs {lyap.log_det_mean:.6g})")
    for j, (mu, tail) in enumerate(zip(lyap.exponents, lyap.tail_exponents), 1):
        print(f"  mu_{j:<3d} {mu: .10f}   tail-half {tail: .10f}")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        experiment.write_csv(out / "exponents.csv",
                              ["n"] + [f"mu_{j}" for j in range(1, spec.d + 1)],
                              ([n, *row] for n, row in enumerate(lyap.history, 1)))
    return EXIT_OK


def cmd_probe_jordan(args):
    try:
        lam = complex(args.lam.replace(" ", ""))
    except ValueError as exc:
        raise InvalidInput(f"cannot parse eigenvalue {args.lam!r}") from exc
    lam = lam.real if lam.imag == 0 else lam
    ns = _int_list(args.n)
    probe = jordan_probe(lam, args.k, ns)
    rows = []
    for col, n in enumerate(ns):
        for j in range(args.k):
            rows.append([str(args.lam), args.k, j + 1, n, probe.measured[j, col]])
            print(f"n = {n:<7d} j = {j + 1}  sigma^(1/n) = {probe.measured[j, col]:.10f}  "
                  f"|lambda| = {abs(lam):.10f}")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        experiment.write_csv(out / "jordan_probe.csv", ["lambda", "k", "j", "n", "measured"], rows)
    return EXIT_OK


def cmd_gramian(args):
    cfg = config_from_args(args)
    spec = cfg.system
    steps = experiment.scan_steps(spec)
    if not steps:
        raise InvalidInput(f"horizon {spec.horizon} is shorter than the Gramian window d = {spec.d}")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        scan = uniform_observability_scan(operator_stream(spec), steps, spec.d)
    for n, v in zip(scan.steps, scan.min_eigs):
        print(f"n = {n:<6d} min eig = {v:.6e}{'  WARN' if v <= THETA_OBS else ''}")
    print(f"minimum {scan.min_eig:.6e}; {'WARN: below' if scan.warn else 'above'} {THETA_OBS:g}")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        experiment.write_csv(out / "gramian.csv", ["n", "min_eig"],
                              ([n, v] for n, v in zip(scan.steps, scan.min_eigs)))
    return EXIT_OK


COMMANDS = {"run": cmd_run, "verify": cmd_verify, "lyapunov": cmd_lyapunov,
            "probe-jordan": cmd_probe_jordan, "gramian": cmd_gramian}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except InvalidInput as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except RiccatiRankError as exc:
        step = getattr(exc, "step", None)
        where = f" at step {step}" if step is not None else ""
        print(f"numerical failure{where}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
