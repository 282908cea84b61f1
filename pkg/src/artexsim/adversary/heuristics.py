"""Transaction-graph heuristics over a :class:`PublicView`.

Each heuristic returns a score in [0, 1]. None of them knows anything about
wallet roles or exchange records.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from itertools import combinations
from math import comb
from typing import Optional, Sequence

from ..errors import SearchBudgetExceeded, UnknownToken
from ..ledger import GENESIS_ADDRESS, LedgerTransaction
from .view import PublicView

DAY = 24 * 3600


@dataclass(frozen=True)
class HeuristicConfig:
    time_window: int = 7 * DAY
    max_subset_size: int = 8
    amount_tolerance: int = 0
    timing_decay_tau: int = 2 * DAY
    weights: tuple = (("direct_swap", 1.0), ("amount_match", 1.0), ("timing", 1.0), ("not_fresh", 1.0))
    score_floor: float = 0.05
    hub_min_fanout: int = 4
    search_budget: int = 200_000

    def __post_init__(self):
        if not 1 <= self.max_subset_size <= 8:
            raise ValueError("max_subset_size must be in 1..8")
        if self.time_window < 0 or self.amount_tolerance < 0 or self.timing_decay_tau <= 0:
            raise ValueError("windows and tolerances must be non-negative, tau positive")
        if not 0.0 < self.score_floor < 1.0:
            raise ValueError("score_floor must lie in (0, 1)")

    @property
    def weight_map(self) -> dict:
        return dict(self.weights)


def trace_token(view: PublicView, contract: str, token_id: Optional[int]) -> list[LedgerTransaction]:
    """Custody chain of a token, oldest first, excluding the mint."""
    txs = view.token_txs(contract, token_id)
    if not txs:
        raise UnknownToken(f"{contract}#{token_id}")
    return [tx for tx in txs if not tx.is_mint]


def heuristic_direct_swap(view: PublicView, hop: LedgerTransaction, config: HeuristicConfig = HeuristicConfig(),
                          ) -> tuple[float, Optional[LedgerTransaction]]:
    """1.0 if the token receiver paid the sender back within the window."""
    best = None
    for tx in view.native_out(hop.to):
        if tx.to == hop.sender and abs(tx.timestamp - hop.timestamp) <= config.time_window:
            if best is None or abs(tx.timestamp - hop.timestamp) < abs(best.timestamp - hop.timestamp):
                best = tx
    return (1.0, best) if best is not None else (0.0, None)


def heuristic_timing(hop: LedgerTransaction, payment: LedgerTransaction,
                     config: HeuristicConfig = HeuristicConfig()) -> float:
    return timing_score(abs(hop.timestamp - payment.timestamp), config.timing_decay_tau)


def timing_score(dt: float, tau: float) -> float:
    return math.exp(-abs(dt) / tau)


def heuristic_fresh_wallet(view: PublicView, chain: Sequence[LedgerTransaction]) -> float:
    """1.0 when the chain endpoint had no history before receiving the token."""
    if not chain:
        return 0.0
    last = chain[-1]
    return 0.0 if view.had_history_before(last.to, last) else 1.0


def service_hubs(view: PublicView, config: HeuristicConfig = HeuristicConfig()) -> set:
    """Addresses paying into many freshly born addresses (exchange-like services)."""
    fanout: dict[str, set] = {}
    fresh_cache: dict[str, bool] = {}
    for tx in view.native_transfers():
        if tx.to not in fresh_cache:
            fresh_cache[tx.to] = view.born_fresh(tx.to)
        if fresh_cache[tx.to]:
            fanout.setdefault(tx.sender, set()).add(tx.to)
    return {a for a, dests in fanout.items() if len(dests) >= config.hub_min_fanout}


# -- amount matching -----------------------------------------------------

@dataclass(frozen=True)
class AmountMatch:
    inflows: tuple  # LedgerTransaction
    outflows: tuple
    difference: int
    score: float


@dataclass
class Neighborhood:
    """Flows around a custody chain that amount matching works on."""

    seller_cluster: set
    outflows: list = field(default_factory=list)  # payments into the seller cluster
    inflows: list = field(default_factory=list)  # payments into the outflows' senders


def chain_neighborhood(view: PublicView, chain: Sequence[LedgerTransaction], config: HeuristicConfig,
                       hubs: frozenset = frozenset()) -> Neighborhood:
    seller = {chain[0].sender}
    t_first, t_last = chain[0].timestamp, chain[-1].timestamp
    hood = Neighborhood(seller)
    for a in seller:
        for tx in view.native_in(a):
            if (t_first <= tx.timestamp <= t_last + config.time_window and tx.sender != GENESIS_ADDRESS
                    and tx.sender not in seller and tx.sender not in hubs):
                hood.outflows.append(tx)
    if not hood.outflows:
        return hood
    intermediaries = {tx.sender for tx in hood.outflows}
    out_hashes = {tx.hash for tx in hood.outflows}
    t_end = max(tx.timestamp for tx in hood.outflows)
    for a in sorted(intermediaries):
        for tx in view.native_in(a):
            if (t_first - config.time_window <= tx.timestamp <= t_end and tx.sender != GENESIS_ADDRESS
                    and tx.sender not in seller and tx.sender not in hubs and tx.hash not in out_hashes):
                hood.inflows.append(tx)
    hood.inflows.sort(key=lambda tx: view.index[tx.hash])
    return hood


def _subset_count(n: int, k: int) -> int:
    return sum(comb(n, r) for r in range(1, min(n, k) + 1))


def match_amounts(inflows: Sequence[LedgerTransaction], outflows: Sequence[LedgerTransaction],
                  max_subset_size: int = 8, tolerance: int = 0, budget: int = 200_000) -> Optional[AmountMatch]:
    """Best pair (inflow subset, outflow subset) with sums within ``tolerance``.

    Preference: more outflows explained, smaller difference, fewer inflows,
    then lexicographically smallest hashes. Raises
    :class:`SearchBudgetExceeded` when the enumeration would exceed ``budget``.
    """
    if not inflows or not outflows:
        return None
    n_in = _subset_count(len(inflows), max_subset_size)
    n_out = _subset_count(len(outflows), max_subset_size)
    if n_in + n_out > budget:
        raise SearchBudgetExceeded(f"{n_in + n_out} subsets > budget {budget}")

    table = []
    for r in range(1, min(len(inflows), max_subset_size) + 1):
        for combo in combinations(inflows, r):
            table.append((sum(tx.value for tx in combo), r, tuple(sorted(tx.hash for tx in combo)), combo))
    table.sort(key=lambda e: (e[0], e[1], e[2]))
    sums = [e[0] for e in table]

    best_key, best = None, None
    for r in range(min(len(outflows), max_subset_size), 0, -1):
        if best is not None:
            break  # larger outflow subsets always win
        for combo in combinations(outflows, r):
            target = sum(tx.value for tx in combo)
            lo = bisect.bisect_left(sums, target - tolerance)
            hi = bisect.bisect_right(sums, target + tolerance)
            for s, size, hashes, inc in table[lo:hi]:
                key = (-r, abs(s - target), size, tuple(sorted(tx.hash for tx in combo)), hashes)
                if best_key is None or key < best_key:
                    best_key, best = key, (inc, combo, abs(s - target))
    if best is None:
        return None
    inc, combo, diff = best
    return AmountMatch(tuple(inc), tuple(combo), diff, 1.0 - diff / (tolerance + 1))


def heuristic_amount_match(view: PublicView, chain: Sequence[LedgerTransaction],
                           config: HeuristicConfig = HeuristicConfig(),
                           hubs: frozenset = frozenset()) -> Optional[AmountMatch]:
    if not chain:
        return None
    hood = chain_neighborhood(view, chain, config, hubs)
    return match_amounts(hood.inflows, hood.outflows, config.max_subset_size,
                         config.amount_tolerance, config.search_budget)
