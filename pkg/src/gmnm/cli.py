"""Command-line entry point.

    gmnm run CONFIG... [--jobs N]
    gmnm gradcheck KIND [--seed S] [--out DIR]
    gmnm report DIR... [--csv PATH]

Exit codes: 0 success, 1 config/usage error, 2 missing data, 3 training
aborted on a non-finite loss, 4 gradient check above threshold.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .checks import FAIL_THRESHOLD, KINDS, UnknownKindError, run_gradcheck
from .experiments import ConfigError, DataMissingError, load_config, run_experiment
from .optim import TrainingAborted

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NAN, EXIT_GRAD = 0, 1, 2, 3, 4


class ReportError(ValueError):
    pass


def _err(msg):
    print(f"error: {msg}", file=sys.stderr)


def run_one(path: str, quiet: bool = False) -> int:
    try:
        cfg = load_config(path)
    except ConfigError as exc:
        _err(f"{path}: {exc}")
        return EXIT_CONFIG

    def log(step, metrics):
        if not quiet:
            text = " ".join(f"{k}={v:.6g}" for k, v in metrics.items())
            print(f"[{cfg.name}] step {step} {text}", flush=True)

    try:
        rec = run_experiment(cfg, log)
    except ConfigError as exc:
        _err(f"{path}: {exc}")
        return EXIT_CONFIG
    except DataMissingError as exc:
        _err(f"{path}: missing data: {exc}")
        return EXIT_DATA
    except TrainingAborted as exc:
        _err(f"{path}: {exc}")
        out = Path(cfg.output)
        out.mkdir(parents=True, exist_ok=True)
        (out / "aborted.json").write_text(json.dumps({"step": exc.step, "reason": str(exc)}))
        return EXIT_NAN
    print(f"[{cfg.name}] done: params={rec.param_count} min_test_loss={rec.min_test_loss:.6g} -> {cfg.output}")
    return EXIT_OK


def cmd_run(args) -> int:
    if args.jobs <= 1 or len(args.configs) == 1:
        codes = [run_one(p, args.quiet) for p in args.configs]
    else:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            codes = list(pool.map(run_one, args.configs, [args.quiet] * len(args.configs)))
    return max(codes)


def cmd_gradcheck(args) -> int:
    try:
        reports = run_gradcheck(args.kind, args.seed)
    except UnknownKindError as exc:
        _err(str(exc))
        return EXIT_CONFIG
    lines = [f"gradcheck {args.kind} seed={args.seed}"] + [r.line() for r in reports]
    print("\n".join(lines))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / f"{args.kind}-seed{args.seed}.txt").write_text("\n".join(lines) + "\n")
    worst = max((r.max_rel for r in reports if not r.frozen), default=0.0)
    return EXIT_GRAD if worst > FAIL_THRESHOLD else EXIT_OK


def read_summary(run_dir) -> dict:
    path = Path(run_dir) / "summary.json"
    if not path.exists():
        raise FileNotFoundError(f"no summary.json in {run_dir}")
    try:
        s = json.loads(path.read_text())
        name = s.get("config", {}).get("name", Path(run_dir).name)
        return {"name": str(name), "params": int(s["param_count"]),
                "min_train": float(s["min_train_loss"]), "min_test": float(s["min_test_loss"]),
                "dir": str(run_dir)}
    except (ValueError, KeyError, TypeError, AttributeError) as exc:
        raise ReportError(f"corrupt summary in {run_dir}: {exc}") from exc


def report_rows(run_dirs) -> list:
    """One row per run, sorted ascending by minimum test loss."""
    return sorted((read_summary(d) for d in run_dirs), key=lambda r: r["min_test"])


def format_table(rows) -> str:
    head = f"{'name':<24} {'params':>8} {'min_train':>13} {'min_test':>13}"
    body = [f"{r['name']:<24} {r['params']:>8d} {r['min_train']:>13.6e} {r['min_test']:>13.6e}" for r in rows]
    return "\n".join([head] + body)


def cmd_report(args) -> int:
    try:
        rows = report_rows(args.dirs)
    except FileNotFoundError as exc:
        _err(str(exc))
        return EXIT_DATA
    except ReportError as exc:
        _err(str(exc))
        return EXIT_CONFIG
    print(format_table(rows))
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["name", "params", "min_train", "min_test"])
            for r in rows:
                w.writerow([r["name"], r["params"], f"{r['min_train']:.17g}", f"{r['min_test']:.17g}"])
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="gmnm", description="GMNM experiment runner")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)
    p = sub.add_parser("run", help="run one or more experiment configs")
    p.add_argument("configs", nargs="+")
    p.add_argument("--jobs", type=int, default=1, help="configs to run concurrently")
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_run)
    p = sub.add_parser("gradcheck", help="finite-difference check of tape gradients")
    p.add_argument("kind", help=", ".join(KINDS))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="gradcheck")
    p.set_defaults(func=cmd_gradcheck)
    p = sub.add_parser("report", help="compare finished runs")
    p.add_argument("dirs", nargs="+")
    p.add_argument("--csv", help="also write the table as CSV")
    p.set_defaults(func=cmd_report)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
