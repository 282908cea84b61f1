"""Estimator-style front end for the link adversary."""

from __future__ import annotations


from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from ..validation import check_ground_truth, check_positive_int, check_view
from .heuristics import DAY, HeuristicConfig
from .metrics import evaluate
from .rank import hypotheses_to_json, rank_links


class LinkAdversary(BaseEstimator):
    """Re-link token sellers to buyers from a public ledger dump.

    ``fit`` indexes a dump and ranks hypotheses for every token that moved;
    ``predict`` returns them; ``score`` is precision@1 against ground truth.
    """

    def __init__(self, time_window: int = 7 * DAY, max_subset_size: int = 8, amount_tolerance: int = 0,
                 timing_decay_tau: int = 2 * DAY, w_direct_swap: float = 1.0, w_amount_match: float = 1.0,
                 w_timing: float = 1.0, w_not_fresh: float = 1.0, score_floor: float = 0.05,
                 hub_min_fanout: int = 4, search_budget: int = 200_000):
        self.time_window = time_window
        self.max_subset_size = max_subset_size
        self.amount_tolerance = amount_tolerance
        self.timing_decay_tau = timing_decay_tau
        self.w_direct_swap = w_direct_swap
        self.w_amount_match = w_amount_match
        self.w_timing = w_timing
        self.w_not_fresh = w_not_fresh
        self.score_floor = score_floor
        self.hub_min_fanout = hub_min_fanout
        self.search_budget = search_budget

    @classmethod
    def from_config(cls, config: HeuristicConfig) -> "LinkAdversary":
        w = config.weight_map
        return cls(config.time_window, config.max_subset_size, config.amount_tolerance, config.timing_decay_tau,
                   w.get("direct_swap", 1.0), w.get("amount_match", 1.0), w.get("timing", 1.0),
                   w.get("not_fresh", 1.0), config.score_floor, config.hub_min_fanout, config.search_budget)

    def _config(self) -> HeuristicConfig:
        return HeuristicConfig(
            time_window=check_positive_int(self.time_window, "time_window"),
            max_subset_size=check_positive_int(self.max_subset_size, "max_subset_size", 1),
            amount_tolerance=check_positive_int(self.amount_tolerance, "amount_tolerance"),
            timing_decay_tau=check_positive_int(self.timing_decay_tau, "timing_decay_tau", 1),
            weights=(("direct_swap", float(self.w_direct_swap)), ("amount_match", float(self.w_amount_match)),
                     ("timing", float(self.w_timing)), ("not_fresh", float(self.w_not_fresh))),
            score_floor=float(self.score_floor),
            hub_min_fanout=check_positive_int(self.hub_min_fanout, "hub_min_fanout", 1),
            search_budget=check_positive_int(self.search_budget, "search_budget", 1),
        )

    def fit(self, X, y=None) -> "LinkAdversary":
        self.config_ = self._config()
        self.view_ = check_view(X)
        self.hypotheses_ = rank_links(self.view_, self.config_)
        self.n_tokens_ = len(self.hypotheses_)
        return self

    def _check_fitted(self) -> None:
        if not hasattr(self, "hypotheses_"):
            raise NotFittedError("call fit() first")

    def predict(self, X=None) -> dict:
        if X is not None:
            self.fit(X)
        self._check_fitted()
        return self.hypotheses_

    def fit_predict(self, X, y=None) -> dict:
        return self.fit(X).hypotheses_

    def to_json(self) -> list[dict]:
        self._check_fitted()
        return hypotheses_to_json(self.hypotheses_)

    def evaluate(self, ground_truth) -> dict:
        self._check_fitted()
        return evaluate(self.hypotheses_, check_ground_truth(ground_truth))

    def score(self, X, y) -> float:
        """precision@1 of the hypotheses for ``X`` against ground truth ``y``."""
        if X is not None:
            self.fit(X)
        return self.evaluate(y)["precision_at_1"]
