"""Command line entry point: ``recaudit {validate,run,report,attributes,parse}``.

Exit codes: 0 success, 1 validation error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Sequence

from . import __version__
from .artifact import RunArtifact, find_artifacts
from .catalog import DEFAULT_FUZZY_THRESHOLD, load_catalog
from .config import load_config
from .errors import AuditError, ConfigError, UnknownCategory
from .parser import parse_response
from .promptgen import CATEGORIES, builtin_attributes
from .report import emit_report
from .runner import artifact_dir, run

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2


def _cmd_validate(args) -> int:
    cfg = load_config(args.config)
    print(f"ok {cfg.digest} ({len(cfg.attributes)} attributes, {len(cfg.seeds)} seeds, k={cfg.k}, "
          f"catalog {cfg.catalog.domain}:{len(cfg.catalog)} items)")
    return EXIT_OK


def _cmd_run(args) -> int:
    cfg = load_config(args.config)
    art = run(cfg)
    out = artifact_dir(cfg)
    s = art.stats
    print(f"{out}")
    print(f"records={len(art.records)} excluded={len(art.exclusions())} cache_hits={s['cache_hits']} "
          f"backend_calls={s['backend_calls']} digest={art.digest()[:16]}", file=sys.stderr)
    if args.report:
        emit_report([art], out / "report")
    return EXIT_OK


def _cmd_report(args) -> int:
    dirs = [d for root in args.artifact_dirs for d in find_artifacts(root)]
    if not dirs:
        print(f"no artifact.json found under {', '.join(args.artifact_dirs)}", file=sys.stderr)
        return EXIT_RUNTIME
    artifacts = [RunArtifact.load(d) for d in dirs]
    out = Path(args.out) if args.out else Path(args.artifact_dirs[0]) / "report"
    for p in emit_report(artifacts, out):
        print(p)
    return EXIT_OK


def _cmd_attributes(args) -> int:
    for a in builtin_attributes(args.category):
        print(f"{a.id}\t{a.category}\t{a.phrase}")
    return EXIT_OK


def _cmd_parse(args) -> int:
    catalog = load_catalog(args.catalog)
    text = sys.stdin.read()
    ranked = parse_response(text, catalog, args.k, args.threshold)
    doc = {
        "item_ids": list(ranked.item_ids),
        "titles": [catalog.get(i).title for i in ranked.item_ids],
        "k_requested": ranked.k_requested,
        "degraded": ranked.degraded,
        "diagnostics": ranked.diagnostics.as_dict(),
    }
    print(json.dumps(doc, indent=2, ensure_ascii=False))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="recaudit", description="Counterfactual bias audit for LLM recommenders.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("validate", help="check a config file")
    s.add_argument("config")
    s.set_defaults(func=_cmd_validate)

    s = sub.add_parser("run", help="run an experiment")
    s.add_argument("config")
    s.add_argument("--report", action="store_true", help="also write the report next to the artifact")
    s.set_defaults(func=_cmd_run)

    s = sub.add_parser("report", help="emit tables, plots and summary for run artifacts")
    s.add_argument("artifact_dirs", nargs="+")
    s.add_argument("--out", help="output directory (default: <first artifact dir>/report)")
    s.set_defaults(func=_cmd_report)

    s = sub.add_parser("attributes", help="list the built-in sensitive attributes")
    s.add_argument("--category", choices=CATEGORIES)
    s.set_defaults(func=_cmd_attributes)

    s = sub.add_parser("parse", help="parse one response read from stdin")
    s.add_argument("--catalog", required=True)
    s.add_argument("--k", type=int, default=20)
    s.add_argument("--threshold", type=float, default=DEFAULT_FUZZY_THRESHOLD)
    s.set_defaults(func=_cmd_parse)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INVALID
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigError, UnknownCategory) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except AuditError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
