"""
Command-line front end.

    cch run <config.yaml> [--strict] [--output-dir DIR]
    cch sweep <manifest.yaml> [--jobs K] [--output-root DIR]
    cch verify <config.yaml> [--strict] [--output-dir DIR]
    cch export <run_dir> --format {csv,txt}

Exit codes: 0 ok, 1 unexpected failure, 2 parse error, 3 invalid
configuration or parameters, 4 blow-up, 5 invariant violation.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import settings
from config import load_config
from debug import cli_try, get_logger
from diagnostics import energy_increase_violations, mass_drift_violations
from errors import InvariantViolation
from experiments import execute_run, run_manifest
from persist import EXPORT_FORMATS, export_run, run_dir_for
from version import __version__

log = logging.getLogger("cli")

EXIT_OK = 0
EXIT_INVALID = 3
EXIT_BLOWUP = 4
EXIT_INVARIANT = 5

# first match wins when a sweep has several failing runs
STATUS_EXIT = (("blow-up", EXIT_BLOWUP), ("invariant-violation", EXIT_INVARIANT), ("failed", EXIT_INVALID))


@cli_try
def cmd_run(config: str, *, strict: bool = False, output_dir: Optional[str] = None) -> int:
    cfg = load_config(config)
    if output_dir is not None:
        rd = Path(output_dir)
    elif cfg.run.output_dir is not None:
        rd = Path(cfg.run.output_dir)
    else:
        rd = run_dir_for(settings.output_root(), "runs", cfg)
    outcome = execute_run(cfg, rd, strict=strict or None)
    for ev in outcome.events:
        log.warning("event: %s", ev)
    print(outcome.run_dir)
    return EXIT_OK


def sweep_exit_code(report: Dict[str, Any]) -> int:
    """Exit code of the worst run status across every study of a sweep report."""
    if report["ok"]:
        return EXIT_OK
    statuses = {st for s in report["studies"] for st in s.get("statuses", [])}
    for status, code in STATUS_EXIT:
        if status in statuses:
            return code
    # every run finished but a study check (monotonicity, envelope) failed
    return EXIT_INVARIANT


@cli_try
def cmd_sweep(manifest: str, *, jobs: int = 1, output_root: Optional[str] = None) -> int:
    report = run_manifest(manifest, jobs=jobs, output_root=output_root)
    for s in report["studies"]:
        log.info("study %s (%s): %s", s["name"], s["kind"], "ok" if s.get("ok") else "FAILED")
    return sweep_exit_code(report)


@cli_try
def cmd_verify(config: str, *, strict: bool = False, output_dir: Optional[str] = None) -> int:
    """Run with diagnostics and check mass, β=0 energy decay and the per-step inequality."""
    cfg = load_config(config)
    strict = strict or cfg.diagnostics.strict_inequality
    outcome = execute_run(cfg, output_dir, strict=strict)
    violations: List[str] = list(outcome.events)
    violations += mass_drift_violations(outcome.records)
    if cfg.model.beta_norm2 == 0.0:
        violations += energy_increase_violations(outcome.records)
    for v in violations:
        log.warning("verify: %s", v)
    if violations and strict:
        raise InvariantViolation(violations)
    print(f"verify: {len(outcome.records)} record(s), {len(violations)} violation(s)")
    return EXIT_OK


@cli_try
def cmd_export(run_dir: str, *, fmt: str = "txt") -> int:
    for p in export_run(run_dir, fmt):
        print(p)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cch", description="Convective Cahn-Hilliard Galerkin solver")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="Run one configuration and persist its artifacts.")
    r.add_argument("config")
    r.add_argument("--strict", action="store_true", help="Fail on energy-inequality violations.")
    r.add_argument("--output-dir", default=None)

    s = sub.add_parser("sweep", help="Run every study listed in a manifest.")
    s.add_argument("manifest")
    s.add_argument("--jobs", type=int, default=settings.default_jobs(),
                   help="Number of parallel workers.")
    s.add_argument("--output-root", default=None)

    v = sub.add_parser("verify", help="Run the invariant suite on a configuration.")
    v.add_argument("config")
    v.add_argument("--strict", action="store_true", help="Exit 5 on any violation.")
    v.add_argument("--output-dir", default=None)

    e = sub.add_parser("export", help="Convert a run's snapshots to text or CSV.")
    e.add_argument("run_dir")
    e.add_argument("--format", dest="fmt", choices=EXPORT_FORMATS, default="txt")
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    get_logger("cch").debug("cch %s: %s", __version__, args.command)
    if args.command == "run":
        return cmd_run(args.config, strict=args.strict, output_dir=args.output_dir)
    if args.command == "sweep":
        return cmd_sweep(args.manifest, jobs=max(1, args.jobs), output_root=args.output_root)
    if args.command == "verify":
        return cmd_verify(args.config, strict=args.strict, output_dir=args.output_dir)
    return cmd_export(args.run_dir, fmt=args.fmt)


if __name__ == "__main__":
    sys.exit(main())
