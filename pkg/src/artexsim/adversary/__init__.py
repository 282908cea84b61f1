"""Public-view adversary: re-links sellers and buyers from a ledger dump only."""

from .estimator import LinkAdversary
from .heuristics import (
    AmountMatch,
    HeuristicConfig,
    heuristic_amount_match,
    heuristic_direct_swap,
    heuristic_fresh_wallet,
    heuristic_timing,
    match_amounts,
    trace_token,
)
from .metrics import evaluate
from .rank import LinkHypothesis, hypotheses_to_json, rank_links
from .view import PublicView

__all__ = [
    "AmountMatch",
    "HeuristicConfig",
    "LinkAdversary",
    "LinkHypothesis",
    "PublicView",
    "evaluate",
    "heuristic_amount_match",
    "heuristic_direct_swap",
    "heuristic_fresh_wallet",
    "heuristic_timing",
    "hypotheses_to_json",
    "match_amounts",
    "rank_links",
    "trace_token",
]
