"""Command-line entry point: ``hartree-lab <subcommand> ...``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .experiments import ConfigError, ExperimentConfig, audit_config, report, run_experiment
from .snapshot import atomic_write

SUBCOMMAND_KIND = {
    "sweep-nzero": "nzero-sweep",
    "tails": "tail-study",
    "check-inequalities": "inequality-suite",
    "morawetz-audit": "morawetz-audit",
}


def _load(args, kind: str | None) -> ExperimentConfig:
    data = json.loads(Path(args.config).read_text()) if args.config else {}
    if kind is not None:
        if data.get("kind", kind) != kind:
            raise ConfigError(f"config kind {data['kind']!r} does not match subcommand (expects {kind!r})")
        data["kind"] = kind
    if kind == "morawetz-audit" and not args.config:
        return audit_config()
    return ExperimentConfig.from_dict(data)


def _print_summary(summary: dict):
    agg = summary.get("aggregate")
    print(json.dumps(agg, indent=2, sort_keys=True, default=str))


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hartree-lab", description="Pseudospectral Hartree laboratory")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, need_config: bool):
        sp.add_argument("config", nargs=None if need_config else "?", help="JSON experiment config")
        sp.add_argument("-o", "--out", default="runs/latest", help="output directory")
        sp.add_argument("-j", "--workers", type=int, default=None,
                        help="worker processes (default: HARTREE_WORKERS or 1)")
        sp.add_argument("-q", "--quiet", action="store_true")

    common(sub.add_parser("run", help="single or ensemble run from a config"), True)
    common(sub.add_parser("sweep-nzero", help="almost-conservation drift across N0"), False)
    common(sub.add_parser("tails", help="tail statistics of the randomized Y-norm"), False)
    common(sub.add_parser("check-inequalities", help="inequality battery"), False)
    common(sub.add_parser("morawetz-audit", help="Morawetz identity and sign audit"), False)
    rp = sub.add_parser("report", help="aggregate summaries from run directories")
    rp.add_argument("runs", nargs="+")
    rp.add_argument("-o", "--out", default="report")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "report":
            table, index = report(args.runs)
            out = Path(args.out)
            atomic_write(out / "report.csv", table)
            atomic_write(out / "report.json", json.dumps(index, indent=2, sort_keys=True) + "\n")
            print(f"wrote {out / 'report.csv'} and {out / 'report.json'}")
            return 0
        cfg = _load(args, SUBCOMMAND_KIND.get(args.command))
        if args.command == "run" and cfg.kind not in ("single", "ensemble"):
            raise ConfigError(f"'run' handles single/ensemble configs; use the {cfg.kind} subcommand")
        summary = run_experiment(cfg, args.out, args.workers)
    except (ConfigError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if not args.quiet:
        _print_summary(summary)
    print(f"summary: {Path(args.out) / 'summary.json'}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
