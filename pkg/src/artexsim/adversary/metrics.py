"""Scoring ranked hypotheses against harness ground truth."""

from __future__ import annotations

from typing import Iterable, Mapping, Optional


def _token_key(entry: Mapping) -> tuple:
    tok = entry["token"]
    return (tok["contract"], tok["token_id"])


def is_true_link(hypothesis, truth: Mapping) -> bool:
    """Both clusters touch the respective party's own wallets."""
    sellers = set(truth["seller_wallets"])
    buyers = set(truth["buyer_wallets"])
    return bool(sellers & set(hypothesis.seller_cluster)) and bool(buyers & set(hypothesis.buyer_cluster))


def true_rank(hyps: list, truth: Mapping) -> Optional[int]:
    for i, h in enumerate(hyps, 1):
        if is_true_link(h, truth):
            return i
    return None


def evaluate(hypotheses: Mapping[tuple, list], ground_truth: Iterable[Mapping]) -> dict:
    """Rank-1 precision and recall over completed trades, with the mean true-pair rank.

    precision@1 counts trades whose rank-1 hypothesis is the true pair among
    trades that received any hypothesis; recall counts trades whose true pair
    appears at any rank, over all completed trades.
    """
    n = predicted = top1 = found = 0
    ranks = []
    for truth in ground_truth:
        if truth.get("buyer") is None or truth.get("status") != "completed":
            continue
        n += 1
        hyps = hypotheses.get(_token_key(truth), [])
        if not hyps:
            continue
        predicted += 1
        r = true_rank(hyps, truth)
        if r is not None:
            found += 1
            ranks.append(r)
            top1 += r == 1
    return {
        "trades": n,
        "predicted": predicted,
        "precision_at_1": top1 / predicted if predicted else 0.0,
        "recall": found / n if n else 0.0,
        "mean_true_rank": sum(ranks) / len(ranks) if ranks else None,
    }
