"""Command-line entry point: simulate, analyze, report, scenarios list."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from importlib import resources
from pathlib import Path

from ..errors import ConfigInvalid, InsufficientFunding, ScenarioAborted
from ..exchange import ListingState
from ..validation import check_ground_truth, check_view
from .config import config_schema, load_config
from .report import render_table
from .scenario import adversary_for, metrics_by_label, run_scenario

EXIT_OK, EXIT_CONFIG, EXIT_ABORTED = 0, 2, 3

PUBLISHED = {ListingState.LISTED, ListingState.IN_AUCTION, ListingState.AUCTION_ENDED,
             ListingState.AWAITING_PAYMENT, ListingState.SETTLING, ListingState.COMPLETED}


def bundled_scenarios() -> dict[str, Path]:
    root = resources.files("artexsim.harness") / "scenarios"
    return {p.name[:-5]: Path(str(p)) for p in sorted(root.iterdir(), key=lambda p: p.name)
            if p.name.endswith(".json")}


def resolve_config_path(name: str) -> Path:
    if os.path.exists(name):
        return Path(name)
    bundled = bundled_scenarios()
    if name in bundled:
        return bundled[name]
    raise ConfigInvalid(f"no config file or bundled scenario named {name!r}")


def _dump_json(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def cmd_simulate(args) -> int:
    cfg = load_config(resolve_config_path(args.config))
    result = run_scenario(cfg, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "dump.jsonl").write_text(result.dump, encoding="utf-8")
    _dump_json(result.ground_truth, out / "ground_truth.json")
    _dump_json(result.hypotheses, out / "hypotheses.json")
    (out / "report.json").write_text(result.report_json(), encoding="utf-8")
    (out / "report.txt").write_text(render_table(result.report), encoding="utf-8")
    (out / "settlement_audit.json").write_text(result.world.exchange.settlement.audit_export() + "\n",
                                               encoding="utf-8")
    resolved = cfg.model_copy(update={"seed": result.seed})
    (out / "config.json").write_text(resolved.model_dump_json(indent=2) + "\n", encoding="utf-8")
    listings = out / "listings"
    listings.mkdir(exist_ok=True)
    ex = result.world.exchange
    for listing in ex.listings.values():
        if any(ListingState(dst) in PUBLISHED for _, dst, _ in listing.transitions):
            (listings / f"{listing.id}.json").write_text(listing.disclosure.to_json() + "\n", encoding="utf-8")
    r = result.report
    print(f"{r['scenario']}: seed={r['seed']} txs={r['tx_count']} trades={len(r['trades'])} "
          f"dump_sha256={r['dump_sha256']} -> {out}")
    return EXIT_OK


def cmd_analyze(args) -> int:
    cfg = load_config(resolve_config_path(args.config))
    adversary = adversary_for(cfg).fit(check_view(args.dump))
    _dump_json(adversary.to_json(), Path(args.out))
    if args.truth:
        metrics = metrics_by_label(adversary.hypotheses_, check_ground_truth(args.truth))
        text = json.dumps(metrics, indent=2, sort_keys=True)
        if args.metrics:
            Path(args.metrics).write_text(text + "\n", encoding="utf-8")
        print(text)
    else:
        print(f"{adversary.n_tokens_} tokens analysed -> {args.out}")
    return EXIT_OK


def cmd_report(args) -> int:
    path = Path(args.input) / "report.json"
    if not path.exists():
        raise ConfigInvalid(f"{path} not found; run simulate first")
    report = json.loads(path.read_text(encoding="utf-8"))
    if args.format == "json":
        print(json.dumps(report, indent=2, sort_keys=True))
    else:
        print(render_table(report), end="")
    return EXIT_OK


def cmd_scenarios(args) -> int:
    if args.action == "schema":
        print(json.dumps(config_schema(), indent=2, sort_keys=True))
        return EXIT_OK
    for name, path in bundled_scenarios().items():
        desc = json.loads(path.read_text(encoding="utf-8")).get("description", "")
        print(f"{name:28s} {desc}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="artexsim", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run a scenario and write its artifacts")
    s.add_argument("--config", required=True, help="config path or bundled scenario name")
    s.add_argument("--seed", type=int, default=None, help="overrides the config seed")
    s.add_argument("--out", default="out")
    s.set_defaults(func=cmd_simulate)

    a = sub.add_parser("analyze", help="run the adversary on a ledger dump")
    a.add_argument("--dump", required=True)
    a.add_argument("--config", required=True, help="supplies the adversary settings")
    a.add_argument("--out", required=True, help="hypotheses JSON output path")
    a.add_argument("--truth", help="ground truth JSON; prints per-strategy metrics")
    a.add_argument("--metrics", help="write the metrics JSON here as well")
    a.set_defaults(func=cmd_analyze)

    r = sub.add_parser("report", help="print a run report")
    r.add_argument("--in", dest="input", required=True)
    r.add_argument("--format", choices=("table", "json"), default="table")
    r.set_defaults(func=cmd_report)

    sc = sub.add_parser("scenarios", help="bundled scenarios, or the config JSON schema")
    sc.add_argument("action", choices=("list", "schema"))
    sc.set_defaults(func=cmd_scenarios)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigInvalid, FileNotFoundError, json.JSONDecodeError, ValueError) as exc:
        print(f"error: {exc}".splitlines()[0], file=sys.stderr)
        return EXIT_CONFIG
    except (ScenarioAborted, InsufficientFunding) as exc:
        print(f"aborted: {exc}".splitlines()[0], file=sys.stderr)
        return EXIT_ABORTED


if __name__ == "__main__":
    sys.exit(main())
