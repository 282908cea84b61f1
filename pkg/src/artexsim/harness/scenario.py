"""End-to-end scenario orchestration."""

from __future__ import annotations

import hashlib
import json
import logging
from collections import defaultdict
from dataclasses import dataclass
from typing import Optional

from ..adversary import LinkAdversary, evaluate
from ..adversary.heuristics import HeuristicConfig
from ..ledger import GAS_SINK, GENESIS_ADDRESS, LedgerState, load_dump
from .config import ScenarioConfig, load_config
from .noise import generate_noise
from .report import build_report
from .strategies import final_status, schedule_trade, strategy_label
from .templates import check_trade
from .world import World

logger = logging.getLogger(__name__)


@dataclass
class ScenarioResult:
    config: ScenarioConfig
    seed: int
    world: World
    dump: str
    ground_truth: list
    hypotheses: list
    report: dict

    @property
    def digest(self) -> str:
        return hashlib.sha256(self.dump.encode()).hexdigest()

    def report_json(self) -> str:
        return json.dumps(self.report, indent=2, sort_keys=True) + "\n"


def heuristic_config(cfg: ScenarioConfig) -> HeuristicConfig:
    a = cfg.adversary
    return HeuristicConfig(
        time_window=a.time_window, max_subset_size=a.max_subset_size, amount_tolerance=a.amount_tolerance,
        timing_decay_tau=a.timing_decay_tau, weights=tuple(sorted(a.weights.items())),
        score_floor=a.score_floor, hub_min_fanout=a.hub_min_fanout, search_budget=a.search_budget,
    )


def adversary_for(cfg: ScenarioConfig) -> LinkAdversary:
    return LinkAdversary.from_config(heuristic_config(cfg))


def metrics_by_label(hypotheses: dict, truth: list) -> dict:
    groups = defaultdict(list)
    for entry in truth:
        groups[entry["label"]].append(entry)
    return {label: evaluate(hypotheses, entries) for label, entries in sorted(groups.items())}


def conservation_holds(dump_txs) -> bool:
    """Replay block by block; total native supply incl. the gas sink must equal genesis issuance."""
    state = LedgerState()
    issued = 0
    by_block = defaultdict(list)
    for tx in dump_txs:
        by_block[tx.block_height].append(tx)
    for height in sorted(by_block):
        for tx in by_block[height]:
            if tx.sender == GENESIS_ADDRESS and tx.token_op is None:
                issued += tx.value
            state.apply(tx)
        if sum(state.balances.values()) != issued:
            return False
        if any(v < 0 for a, v in state.balances.items() if a != GAS_SINK):
            return False
    return True


def _ground_truth(world: World) -> list:
    cfg = world.config
    desk = world.exchange.settlement
    ledger_txs = {tx.hash: tx for tx in world.ledger.transactions}
    order = {h: i for i, h in enumerate(ledger_txs)}
    out = []
    for trade in cfg.trades:
        run = world.trades[trade.id]
        hashes = list(dict.fromkeys(run.txs + world.exchange.listing_txs.get(run.listing_id, [])))
        hashes.sort(key=order.__getitem__)
        record = desk.records.get(run.listing_id) if run.listing_id else None
        winner_idx = int(run.winner.split("-")[1]) if run.winner else None
        buyer_party = [w.address for w in run.buyer_wallets.get(winner_idx, [])] if run.winner else []
        seller_party = [run.token_wallet.address] + [w.address for w in run.payout_wallets]
        entry = {
            "trade_id": trade.id,
            "strategy": trade.strategy,
            "label": strategy_label(trade),
            "pattern": trade.pattern,
            "pool_size": (trade.pool_size or cfg.decoy.pool_size) if trade.strategy == "decoy" else None,
            "strict": cfg.strict_routing_fidelity if trade.strategy == "artex" else None,
            "start": trade.start,
            "gas_fee": cfg.gas_fee,
            "token": {"contract": run.contract, "token_id": run.token_id},
            "token_standard": trade.token_standard,
            "amount": trade.token_amount,
            "price": run.price,
            "seller": run.seller.id,
            "buyer": run.winner,
            "seller_wallets": world.wallets_of(run.seller.id),
            "buyer_wallets": world.wallets_of(run.winner) if run.winner else [],
            "parties": {"seller": seller_party, "buyer": buyer_party,
                        "seller_token_wallet": run.token_wallet.address},
            "status": final_status(world, run),
            "listing_id": run.listing_id,
            "txs": hashes,
            "gas_total": sum(ledger_txs[h].gas_fee for h in hashes),
            "settlement": record.to_dict() if record else None,
            "decoy": run.decoy or None,
            "rejected_bids": run.rejected_bids,
        }
        out.append(entry)
    return out


def _balance_ok(entry: dict, world: World) -> Optional[bool]:
    if entry["status"] != "completed":
        return None
    if entry["strategy"] == "artex":
        return world.exchange.settlement.records[entry["listing_id"]].balances()
    txs = {tx.hash: tx for tx in world.ledger.transactions}
    sellers, buyers = set(entry["parties"]["seller"]), set(entry["parties"]["buyer"])
    paid = sum(txs[h].value for h in entry["txs"] if txs[h].sender in buyers and txs[h].token_op is None)
    received = sum(txs[h].value for h in entry["txs"] if txs[h].to in sellers and txs[h].token_op is None)
    return paid == entry["price"] == received


def run_scenario(config, seed: Optional[int] = None) -> ScenarioResult:
    """Run every configured trade and collect the artifacts in a :class:`ScenarioResult`."""
    cfg = load_config(config)
    seed = cfg.resolved_seed(seed)
    world = World(cfg, seed)
    world.setup()
    generate_noise(world)
    for trade in cfg.trades:
        schedule_trade(world, world.trades[trade.id])
    world.scheduler.run()
    if world.ledger.pending:
        world.ledger.seal_block()

    dump = world.ledger.dumps()
    txs = load_dump(dump.splitlines())
    truth = _ground_truth(world)
    adversary = adversary_for(cfg).fit(txs)
    metrics = metrics_by_label(adversary.hypotheses_, truth)
    checks = []
    for entry in truth:
        verdict = check_trade(txs, entry)
        checks.append({"pattern_ok": verdict.ok, "problems": verdict.problems,
                       "balance_ok": _balance_ok(entry, world)})
    report = build_report(cfg, seed, dump, truth, checks, metrics, conservation_holds(txs))
    return ScenarioResult(cfg, seed, world, dump, truth, adversary.to_json(), report)


def decoy_gas_sweep(config, pool_sizes=(2, 5, 10, 20), seed: Optional[int] = None) -> dict:
    """Total trade gas of the decoy trades at each pool size, and of the same trades run through the exchange."""
    cfg = load_config(config)
    decoys = [t for t in cfg.trades if t.strategy == "decoy"]
    out = {"decoy": {}, "artex": None, "trades": len(decoys)}
    for size in pool_sizes:
        variant = cfg.model_copy(deep=True)
        variant.trades = [t.model_copy(update={"pool_size": size}) for t in decoys]
        res = run_scenario(variant, seed)
        out["decoy"][size] = sum(e["gas_total"] for e in res.ground_truth)
    variant = cfg.model_copy(deep=True)
    variant.trades = [t.model_copy(update={"strategy": "artex", "pattern": 2, "pool_size": None})
                      for t in decoys]
    res = run_scenario(variant, seed)
    out["artex"] = sum(e["gas_total"] for e in res.ground_truth)
    return out
