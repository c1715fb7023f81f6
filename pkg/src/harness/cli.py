import argparse
import logging
import os
import sys
from typing import List, Optional, Tuple

from src.harness.runconfig import from_mapping, load_config, resolve_jobs
from src.harness.runner import CALIBRATION_ORACLES, calibrate, run_trials, summarize
from src.harness.suites import SUITES, run_suites
from src.utils.analyze import format_report
from src.utils.file_handler import emit


def cmd_verify(args: argparse.Namespace) -> int:
    try:
        results = run_suites(args.suite, quick=args.quick)
    except Exception as e:
        print(f"Error: {e}", file=sys.stderr)
        return 1
    for r in results:
        status = "ok" if r.ok else "FAIL"
        detail = f"  {r.detail}" if r.detail else ""
        print(f"[{status}] {r.name:<22} {r.violations} violations / {r.cases} cases ({r.seconds:.1f}s){detail}")
    return 0 if all(r.ok for r in results) else 1


def cmd_calibrate(args: argparse.Namespace) -> int:
    try:
        results = calibrate(args.oracle, replications=args.replications, seed=args.seed, jobs=args.jobs)
    except Exception as e:
        print(f"Error: {e}", file=sys.stderr)
        return 1
    for r in results:
        status = "ok" if r.ok else "FAIL"
        print(
            f"[{status}] {r.oracle} delta={r.delta:.4g} lambda={r.lam:g}: "
            f"{r.failures}/{r.replications} failures, 99% upper {r.upper_99:.4f}, "
            f"mean samples {r.mean_samples:.6g}"
        )
    return 0 if all(r.ok for r in results) else 1


def _run_and_emit(config, out_dir: str, jobs: Optional[int]) -> None:
    records = run_trials(config, jobs=jobs)
    report = summarize(config, records)
    written = emit(records, report, out_dir)
    print(format_report(report))
    for path in written:
        print(f"Saved: {path}")


def cmd_run(args: argparse.Namespace) -> int:
    try:
        config = load_config(args.config)
        overrides = {}
        if args.seed is not None:
            overrides["seed"] = str(args.seed)
        if args.out is not None:
            overrides["out"] = args.out
        config = from_mapping(overrides, config)
        _run_and_emit(config, config.out, resolve_jobs(args.jobs, config))
    except Exception as e:
        print(f"Error: {e}", file=sys.stderr)
        return 1
    return 0


def _parse_vary(spec: str) -> Tuple[str, List[str]]:
    if "=" not in spec:
        raise ValueError(f"--vary expects key=v1,v2,..., got {spec!r}")
    key, raw = spec.split("=", 1)
    values = [v.strip() for v in raw.split(",") if v.strip()]
    if not key.strip() or not values:
        raise ValueError(f"--vary expects key=v1,v2,..., got {spec!r}")
    return key.strip(), values


def cmd_sweep(args: argparse.Namespace) -> int:
    try:
        base = load_config(args.config)
        if args.out is not None:
            base = from_mapping({"out": args.out}, base)
        key, values = _parse_vary(args.vary)
        configs = [(value, from_mapping({key: value}, base)) for value in values]
    except Exception as e:
        print(f"Error: {e}", file=sys.stderr)
        return 1
    for value, config in configs:
        print(f"\n--- {key}={value} ---")
        try:
            _run_and_emit(config, os.path.join(base.out, f"{key}={value}"), resolve_jobs(args.jobs, config))
        except Exception as e:
            print(f"Error: {e}", file=sys.stderr)
            return 1
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="proxboost",
        description="High-probability boosting for stochastic convex optimization: property suites and Monte-Carlo runs.",
    )
    p.add_argument("-v", "--verbose", action="store_true", help="Log progress at INFO level.")

    sub = p.add_subparsers(dest="cmd", required=True)

    vf = sub.add_parser("verify", help="Run the deterministic property suites (exit 1 on any violation).")
    vf.add_argument("--suite", action="append", choices=sorted(SUITES), help="Run only this suite (repeatable).")
    vf.add_argument("--quick", action="store_true", help="Use reduced instance counts.")
    vf.set_defaults(func=cmd_verify)

    cb = sub.add_parser("calibrate", help="Monte-Carlo check of an oracle's 2/3-confidence contract.")
    cb.add_argument("--oracle", required=True, choices=sorted(CALIBRATION_ORACLES), help="Oracle to calibrate")
    cb.add_argument("--replications", type=int, default=1000, help="Replications per (delta, lambda) setting")
    cb.add_argument("--seed", type=int, default=0, help="Base seed")
    cb.add_argument("--jobs", type=int, default=None, help="Worker processes (defaults to env PROXBOOST_JOBS or 1).")
    cb.set_defaults(func=cmd_calibrate)

    rn = sub.add_parser("run", help="Run R macro-replications and write trials.csv and summary.json.")
    rn.add_argument("--config", default=None, help="Config file (defaults to env PROXBOOST_CONFIG).")
    rn.add_argument("--seed", type=int, default=None, help="Base seed (overrides the config).")
    rn.add_argument("--out", default=None, help="Output directory (overrides the config).")
    rn.add_argument("--jobs", type=int, default=None, help="Worker processes (defaults to config, env PROXBOOST_JOBS, 1).")
    rn.set_defaults(func=cmd_run)

    sw = sub.add_parser("sweep", help="Repeat a run for each value of one config key.")
    sw.add_argument("--config", default=None, help="Base config file (defaults to env PROXBOOST_CONFIG).")
    sw.add_argument("--vary", required=True, help="key=v1,v2,... (e.g. p=0.05,0.1,0.2)")
    sw.add_argument("--out", default=None, help="Output root; each value writes to <out>/<key>=<value>/")
    sw.add_argument("--jobs", type=int, default=None, help="Worker processes")
    sw.set_defaults(func=cmd_sweep)

    return p


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(asctime)s %(levelname)s %(message)s",
    )
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
