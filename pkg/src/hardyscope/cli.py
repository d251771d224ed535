"""Command-line experiment driver.

``hardyscope run CONFIG [--out DIR] [--workers N]`` runs the probes of a JSON
config and writes ``report.json`` plus one CSV per probe; ``validate`` only
checks the config; ``plotdata REPORT`` writes series CSVs and PNG figures.

Exit status: 0 when every probe passes, 1 when some probe fails, 2 for an
invalid config.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .config import Context, build_grid, build_model, build_profiles, config_hash, load_config
from .errors import ConfigError
from .experiments import ProbeOutcome, run_probe
from .report import env_stamp, write_csv, write_json

OUT_ENV = "HARDYSCOPE_OUT_DIR"


def build_context(cfg: dict) -> Context:
    seed = int(cfg.get("seed", 0))
    model = build_model(cfg["model"], np.random.default_rng([seed, 0]))
    profiles = build_profiles(cfg.get("profiles", {}))
    return Context(cfg, seed, model, profiles, build_grid(cfg.get("grid")))


def run_config(cfg: dict, workers: int = 1, log=None) -> tuple[dict, list[ProbeOutcome]]:
    """Execute every probe and assemble the report (without writing files)."""
    ctx = build_context(cfg)
    probes = cfg["probes"]

    def one(item):
        i, probe = item
        t0 = time.perf_counter()
        out = run_probe(ctx, probe, i)
        if log is not None:
            log(f"{probe['id']}: {'PASS' if out.passed else 'FAIL'} ({time.perf_counter() - t0:.2f} s)")
        return out

    if workers > 1 and len(probes) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(one, enumerate(probes)))
    else:
        outcomes = [one(item) for item in enumerate(probes)]
    report = {
        "config": cfg["name"],
        "configHash": config_hash(cfg),
        "seed": ctx.seed,
        "env": env_stamp(),
        "passed": all(o.passed for o in outcomes),
        "probes": [o.report_entry() for o in outcomes],
    }
    return report, outcomes


def write_outputs(report: dict, outcomes: list[ProbeOutcome], out_dir) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = []
    for o in outcomes:
        if o.header:
            f = write_csv(out / f"{o.id}.csv", o.header, o.rows)
            files.append(f)
    files.append(write_json(out / "report.json", report))
    return files


def _out_dir(cfg: dict, override: str | None) -> Path:
    if override:
        return Path(override)
    if os.environ.get(OUT_ENV):
        return Path(os.environ[OUT_ENV]) / cfg["name"]
    return Path(cfg.get("output", {}).get("dir", Path("hardyscope-out") / cfg["name"]))


def _config_error(exc: ConfigError) -> int:
    print(f"config error at {exc.pointer}: {exc}", file=sys.stderr)
    return 2


def cmd_run(args) -> int:
    try:
        cfg = load_config(args.config)
        workers = args.workers if args.workers else (os.cpu_count() or 1)
        log = (lambda msg: print(msg, file=sys.stderr)) if not args.quiet else None
        report, outcomes = run_config(cfg, workers, log)
    except ConfigError as exc:
        return _config_error(exc)
    out = _out_dir(cfg, args.out)
    write_outputs(report, outcomes, out)
    print(f"report: {out / 'report.json'}")
    if report["passed"]:
        return 0
    for o in outcomes:
        for line in o.failing:
            print(f"FAIL {o.id}: {line}", file=sys.stderr)
    return 1


def cmd_validate(args) -> int:
    try:
        cfg = load_config(args.config)
        build_context(cfg)
    except ConfigError as exc:
        return _config_error(exc)
    print(f"{cfg['name']}: valid ({len(cfg['probes'])} probes)")
    return 0


def cmd_plotdata(args) -> int:
    from .plotting import emit_plotdata

    try:
        files = emit_plotdata(args.report, args.out)
    except (OSError, ValueError) as exc:
        print(f"cannot read report: {exc}", file=sys.stderr)
        return 2
    for f in files:
        print(f)
    return 0


def make_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hardyscope", description="Run operator-theoretic probe suites.")
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run a config and write reports")
    r.add_argument("config")
    r.add_argument("--out", help="output directory")
    r.add_argument("--workers", type=int, default=0, help="probe-level threads (default: CPU count)")
    r.add_argument("--quiet", action="store_true", help="no per-probe progress on stderr")
    r.set_defaults(func=cmd_run)
    v = sub.add_parser("validate", help="check a config without running it")
    v.add_argument("config")
    v.set_defaults(func=cmd_validate)
    p = sub.add_parser("plotdata", help="write series CSVs and figures from a report")
    p.add_argument("report")
    p.add_argument("--out", help="output directory (default: <report dir>/plotdata)")
    p.set_defaults(func=cmd_plotdata)
    return ap


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
