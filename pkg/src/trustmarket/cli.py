"""Command-line entry point: ``trustmarket <subcommand> [options]``.

Exit status: 0 success, 1 usage error, 2 input or parse error, 3 config error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import replace
from typing import Sequence

from . import __version__
from .config import Settings, load_config
from .discovery import ConstraintFilter, IntentPriorities, prefilter, rank_offers, ranking_csv
from .engine import Evidence, Recommendation, TrustState, score_target
from .errors import ConfigError, InputError, StorageError, TrustMarketError
from .ingestion import (
    AssetType,
    LogKind,
    ParseReport,
    derive_catalog_features,
    ingest_sla_events,
    parse_catalog,
    parse_interactions,
    parse_zeek_log,
    to_json_line,
)
from .sim import audit_csv, run_scenario, scenario_from_settings, write_run_outputs
from .storage import PrivateStore, SharedLedger, evidence_from, load_state
from .update import replay

log = logging.getLogger("trustmarket")

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_CONFIG = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", help="global YAML configuration file")
    p.add_argument("--out", help="output directory")
    return p


def _evidence_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--interactions", help="interaction records (JSON lines)")
    p.add_argument("--recommendations", help="recommendations (JSON lines)")
    p.add_argument("--ledger", help="saved shared ledger file")
    p.add_argument("--store", help="saved private store file")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="trustmarket", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    common = _common()

    p = sub.add_parser("ingest", parents=[common], help="parse and validate input files")
    p.add_argument("--catalog")
    p.add_argument("--interactions")
    p.add_argument("--sla")
    for kind in LogKind:
        p.add_argument(f"--{kind.value.lower()}", metavar="PATH", help=f"Zeek {kind.value.lower()} log")
    p.add_argument("--as-of", type=float, help="print catalog features at this time")

    p = sub.add_parser("score", parents=[common], help="one-shot trust score")
    p.add_argument("trustor")
    p.add_argument("target")
    p.add_argument("--asset-type")
    _evidence_args(p)

    p = sub.add_parser("rank", parents=[common], help="filter and rank offers")
    p.add_argument("--catalog", required=True)
    p.add_argument("--trustor", required=True)
    p.add_argument("--asset-type", action="append", dest="asset_types")
    p.add_argument("--location", action="append", dest="locations")
    p.add_argument("--max-price", type=float)
    p.add_argument("--as-of", type=float, default=float("inf"))
    p.add_argument("--w-price", type=float)
    p.add_argument("--w-proximity", type=float)
    p.add_argument("--w-performance", type=float)
    p.add_argument("--reference-location")
    p.add_argument("--workers", type=int, default=1)
    _evidence_args(p)

    p = sub.add_parser("replay-logs", parents=[common], help="replay Zeek logs through updates")
    for kind in LogKind:
        p.add_argument(f"--{kind.value.lower()}", metavar="PATH")
    p.add_argument("--trustor", required=True)
    p.add_argument("--trustee", required=True)
    p.add_argument("--initial-score", type=float)

    p = sub.add_parser("simulate", parents=[common], help="run a seeded scenario")
    p.add_argument("--seed", type=int, help="override scenario.seed")
    p.add_argument("--workers", type=int, default=1)
    return parser


def _check(report: ParseReport, label: str) -> ParseReport:
    for err in report.errors:
        print(f"{label}: {err}", file=sys.stderr)
    return report


def _read_jsonl_recs(path: str) -> list[Recommendation]:
    recs = []
    try:
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if line.strip():
                    try:
                        recs.append(Recommendation.from_dict(json.loads(line)))
                    except (ValueError, KeyError, TypeError, TrustMarketError) as exc:
                        raise InputError(f"{path}:{lineno}: {exc}") from exc
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    return recs


def _load_evidence(args, settings: Settings) -> Evidence:
    ledger = SharedLedger.load(args.ledger) if args.ledger else SharedLedger()
    if args.interactions:
        report = _check(parse_interactions(args.interactions), args.interactions)
        if report.errors:
            raise InputError(f"{len(report.errors)} malformed interaction line(s)")
        for rec in report.records:
            ledger.push_interaction(rec)
    if args.recommendations:
        for rec in _read_jsonl_recs(args.recommendations):
            ledger.push_recommendation(rec)
    store: PrivateStore | None = load_state(args.store) if args.store else None
    return evidence_from(ledger, store, settings.update.window_seconds)


def _emit(args, name: str, text: str) -> None:
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, name), "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_ingest(args, settings: Settings) -> int:
    failed = False
    summary = []
    if args.catalog:
        report = _check(parse_catalog(args.catalog), args.catalog)
        summary.append(("catalog", report))
        if args.as_of is not None:
            for pid, feat in derive_catalog_features(report.records, args.as_of).items():
                print(to_json_line({
                    "provider_id": pid,
                    "offers_total": feat.offers_total,
                    "offers_by_type": {t.value: n for t, n in feat.offers_by_type.items()},
                    "offers_by_location": feat.offers_by_location,
                    "offers_withdrawn": feat.offers_withdrawn,
                    "as_of": feat.as_of,
                }))
    if args.interactions:
        summary.append(("interactions", _check(parse_interactions(args.interactions), args.interactions)))
    if args.sla:
        summary.append(("sla", _check(ingest_sla_events(args.sla), args.sla)))
    for kind in LogKind:
        path = getattr(args, kind.value.lower())
        if path:
            report = parse_zeek_log(path, kind, settings.address_map, settings.notice_severity,
                                    settings.default_notice_severity)
            summary.append((kind.value.lower(), _check(report, path)))
    if not summary:
        raise UsageError("ingest: give at least one input file")
    for label, report in summary:
        print(f"{label}: {len(report.records)} record(s), {len(report.errors)} error(s)", file=sys.stderr)
        failed |= bool(report.errors)
    return EXIT_INPUT if failed else EXIT_OK


def cmd_score(args, settings: Settings) -> int:
    evidence = _load_evidence(args, settings)
    asset = AssetType.parse(args.asset_type) if args.asset_type else None
    state = score_target(args.trustor, args.target, asset, evidence, settings.engine)
    _emit(args, "score.jsonl", to_json_line(state) + "\n")
    return EXIT_OK


def cmd_rank(args, settings: Settings) -> int:
    report = _check(parse_catalog(args.catalog), args.catalog)
    if report.errors:
        raise InputError(f"{len(report.errors)} malformed catalog line(s)")
    evidence = _load_evidence(args, settings)

    base = settings.constraints
    constraints = ConstraintFilter(
        asset_types=frozenset(AssetType.parse(t) for t in args.asset_types) if args.asset_types else base.asset_types,
        locations=frozenset(args.locations) if args.locations else base.locations,
        max_price=args.max_price if args.max_price is not None else base.max_price,
    )
    weights = dict(settings.priorities.weights)
    for crit in ("price", "proximity", "performance"):
        value = getattr(args, f"w_{crit}")
        if value is not None:
            weights[crit] = value
    priorities = IntentPriorities(
        weights=weights,
        reference_location=args.reference_location or settings.priorities.reference_location,
        performance_hint=settings.priorities.performance_hint,
    )
    candidates = prefilter(report.records, constraints, args.as_of)
    ranked = rank_offers(candidates, args.trustor, priorities, evidence, settings.engine,
                         workers=args.workers)
    _emit(args, "ranking.csv", ranking_csv(ranked))
    return EXIT_OK


def cmd_replay(args, settings: Settings) -> int:
    records = []
    for kind in LogKind:
        path = getattr(args, kind.value.lower())
        if path:
            report = _check(
                parse_zeek_log(path, kind, settings.address_map, settings.notice_severity,
                               settings.default_notice_severity),
                path,
            )
            if report.errors:
                raise InputError(f"{path}: {len(report.errors)} malformed line(s)")
            records.extend(report.records)
    if not records:
        raise UsageError("replay-logs: no log records given")
    initial = settings.engine.bootstrap_trust if args.initial_score is None else args.initial_score
    state = TrustState(args.trustor, args.trustee, initial)
    audits = []
    for state, audit in replay(state, records, settings.update):
        audits.append(audit)
    _emit(args, "metrics.csv", audit_csv(audits))
    print(f"final_score={state.score!r}", file=sys.stderr)
    return EXIT_OK


def cmd_simulate(args, settings: Settings) -> int:
    if not args.out:
        raise UsageError("simulate: --out is required")
    overrides = {} if args.seed is None else {"seed": args.seed}
    config = scenario_from_settings(settings, **overrides)
    metrics = run_scenario(config, settings, workers=max(1, args.workers))
    if args.seed is not None:
        settings = replace(settings, scenario={**settings.scenario, "seed": args.seed})
    for name in write_run_outputs(metrics, args.out, settings):
        log.info("wrote %s", name)
    return EXIT_OK


COMMANDS = {
    "ingest": cmd_ingest,
    "score": cmd_score,
    "rank": cmd_rank,
    "replay-logs": cmd_replay,
    "simulate": cmd_simulate,
}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        settings = load_config(args.config)
        return COMMANDS[args.command](args, settings)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (InputError, StorageError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except TrustMarketError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
