"""Candidate generation and ranking of seller/buyer link hypotheses."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

from ..errors import SearchBudgetExceeded
from ..ledger import GENESIS_ADDRESS
from .heuristics import (
    HeuristicConfig,
    chain_neighborhood,
    heuristic_direct_swap,
    match_amounts,
    service_hubs,
    timing_score,
    trace_token,
)
from .view import PublicView

logger = logging.getLogger(__name__)

HEURISTICS = ("direct_swap", "amount_match", "timing", "not_fresh")


@dataclass
class LinkHypothesis:
    token: tuple
    seller_cluster: tuple
    buyer_cluster: tuple
    score: float
    evidence: list = field(default_factory=list)
    features: dict = field(default_factory=dict)

    def to_dict(self, rank: Optional[int] = None) -> dict:
        d = {
            "token": {"contract": self.token[0], "token_id": self.token[1]},
            "seller_cluster": list(self.seller_cluster),
            "buyer_cluster": list(self.buyer_cluster),
            "score": self.score,
            "evidence": [{"heuristic": h, "txs": list(txs)} for h, txs in self.evidence],
        }
        if rank is not None:
            d["rank"] = rank
        return d


def combine(features: dict, config: HeuristicConfig) -> float:
    """Weighted product of floored heuristic scores, in [0, 1]."""
    eps = config.score_floor
    weights = config.weight_map
    score = 1.0
    for h in HEURISTICS:
        s = min(1.0, max(0.0, features.get(h, 0.0)))
        score *= (eps + (1.0 - eps) * s) ** weights.get(h, 1.0)
    return score


class _Candidates:
    def __init__(self):
        self.features: dict[frozenset, dict] = {}
        self.evidence: dict[frozenset, dict] = {}

    def add(self, cluster, heuristic: str, score: float, txs=()) -> None:
        key = frozenset(cluster)
        feats = self.features.setdefault(key, {})
        feats[heuristic] = max(feats.get(heuristic, 0.0), score)
        if txs:
            self.evidence.setdefault(key, {}).setdefault(heuristic, set()).update(tx.hash for tx in txs)


def analyze_token(view: PublicView, token: tuple, config: HeuristicConfig,
                  hubs: frozenset = frozenset()) -> list[LinkHypothesis]:
    chain = trace_token(view, *token)
    if not chain:
        return []
    seller = chain[0].sender
    t_first, last = chain[0].timestamp, chain[-1]
    tau = config.timing_decay_tau
    cands = _Candidates()
    fresh = {}

    def not_fresh(addr: str) -> float:
        if addr not in fresh:
            fresh[addr] = view.born_fresh(addr)
        return 0.0 if fresh[addr] else 1.0

    # hop receivers, with the direct-swap check on their hop
    for hop in chain:
        if hop.to == seller:
            continue
        swap, pay = heuristic_direct_swap(view, hop, config)
        cands.add({hop.to}, "direct_swap", swap, [hop] + ([pay] if pay else []))
        if pay is not None:
            cands.add({hop.to}, "timing", timing_score(pay.timestamp - hop.timestamp, tau), [pay])
        cands.add({hop.to}, "not_fresh", 0.0 if not view.had_history_before(hop.to, hop) else 1.0)

    # payers into the seller, and amount-matched payers one hop further back
    hood = chain_neighborhood(view, chain, config, hubs)
    for tx in hood.outflows:
        cands.add({tx.sender}, "timing", timing_score(tx.timestamp - last.timestamp, tau), [tx])
        cands.add({tx.sender}, "not_fresh", not_fresh(tx.sender))
    try:
        match = match_amounts(hood.inflows, hood.outflows, config.max_subset_size,
                              config.amount_tolerance, config.search_budget)
    except SearchBudgetExceeded as exc:
        logger.info("amount match skipped for %s: %s", token, exc)
        match = None
    if match is not None:
        cluster = {tx.sender for tx in match.inflows}
        cands.add(cluster, "amount_match", match.score, list(match.inflows) + list(match.outflows))
        cands.add(cluster, "timing", max(timing_score(tx.timestamp - last.timestamp, tau) for tx in match.inflows))
        cands.add(cluster, "not_fresh", min(not_fresh(a) for a in cluster))

    # anyone paying a freshly born address while the token sat in custody
    for tx in view.native_transfers():
        if not t_first <= tx.timestamp < last.timestamp:
            continue
        if tx.sender in hubs or tx.sender == seller or view.born_fresh(tx.to) is False:
            continue
        cands.add({tx.sender}, "timing", timing_score(last.timestamp - tx.timestamp, tau), [tx])
        cands.add({tx.sender}, "not_fresh", not_fresh(tx.sender))

    out = []
    for key, feats in cands.features.items():
        if key & {seller, GENESIS_ADDRESS}:
            continue
        ev = cands.evidence.get(key, {})
        out.append(LinkHypothesis(
            token=tuple(token),
            seller_cluster=(seller,),
            buyer_cluster=tuple(sorted(key)),
            score=combine(feats, config),
            evidence=[(h, tuple(sorted(ev[h]))) for h in HEURISTICS if h in ev],
            features={h: feats.get(h, 0.0) for h in HEURISTICS},
        ))
    out.sort(key=lambda h: (-h.score, h.buyer_cluster))
    return out


def rank_links(view: PublicView, config: HeuristicConfig = HeuristicConfig()) -> dict[tuple, list[LinkHypothesis]]:
    """Ranked hypotheses for every token that moved after minting."""
    hubs = frozenset(service_hubs(view, config))
    return {token: analyze_token(view, token, config, hubs) for token in view.tokens()}


def hypotheses_to_json(hypotheses: dict) -> list[dict]:
    out = []
    for token, hyps in hypotheses.items():
        for rank, h in enumerate(hyps, 1):
            out.append(h.to_dict(rank))
    return out
