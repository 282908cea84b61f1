"""Run report: JSON document plus an aligned plain-text rendering."""

from __future__ import annotations

import hashlib
from collections import defaultdict


def build_report(cfg, seed: int, dump: str, truth: list, checks: list, metrics: dict,
                 conservation_ok: bool) -> dict:
    trades = []
    gas_by_label = defaultdict(int)
    for entry, check in zip(truth, checks):
        trades.append({
            "trade_id": entry["trade_id"],
            "strategy": entry["label"],
            "status": entry["status"],
            "price": entry["price"],
            "tx_count": len(entry["txs"]),
            "gas_total": entry["gas_total"],
            "balance_ok": check["balance_ok"],
            "pattern_ok": check["pattern_ok"],
            "problems": check["problems"],
        })
        gas_by_label[entry["label"]] += entry["gas_total"]
    lines = dump.splitlines()
    return {
        "scenario": cfg.name,
        "seed": seed,
        "dump_sha256": hashlib.sha256(dump.encode()).hexdigest(),
        "tx_count": len(lines),
        "gas_fee": cfg.gas_fee,
        "conservation_ok": conservation_ok,
        "trades": trades,
        "gas_by_strategy": dict(sorted(gas_by_label.items())),
        "adversary": metrics,
    }


def _fmt(v) -> str:
    if v is None:
        return "-"
    if isinstance(v, bool):
        return "yes" if v else "no"
    if isinstance(v, float):
        return f"{v:.4f}"
    return str(v)


def _table(headers: list, rows: list) -> list[str]:
    cells = [[_fmt(c) for c in row] for row in rows]
    widths = [max(len(h), *(len(r[i]) for r in cells)) if cells else len(h) for i, h in enumerate(headers)]
    out = ["  ".join(h.ljust(w) for h, w in zip(headers, widths)).rstrip(),
           "  ".join("-" * w for w in widths)]
    out += ["  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip() for row in cells]
    return out


TRADE_COLUMNS = ("trade_id", "strategy", "status", "price", "tx_count", "gas_total", "balance_ok", "pattern_ok")
METRIC_COLUMNS = ("trades", "predicted", "precision_at_1", "recall", "mean_true_rank")


def render_table(report: dict) -> str:
    lines = [
        f"scenario         {report['scenario']}",
        f"seed             {report['seed']}",
        f"dump_sha256      {report['dump_sha256']}",
        f"tx_count         {report['tx_count']}",
        f"gas_fee          {report['gas_fee']}",
        f"conservation_ok  {_fmt(report['conservation_ok'])}",
        "",
    ]
    lines += _table(list(TRADE_COLUMNS), [[t[c] for c in TRADE_COLUMNS] for t in report["trades"]])
    lines.append("")
    lines += _table(["strategy", "gas_total"], sorted(report["gas_by_strategy"].items()))
    lines.append("")
    lines += _table(["strategy", *METRIC_COLUMNS],
                    [[label, *(m[c] for c in METRIC_COLUMNS)] for label, m in sorted(report["adversary"].items())])
    return "\n".join(lines) + "\n"
