"""Scenario configuration schema.

Every field has a default; unknown keys are rejected. Amounts marked
"display units" are multiplied by ``display_scale`` to get base units.
"""

from __future__ import annotations

import json
import os
from decimal import Decimal
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from ..errors import ConfigInvalid

DAY = 24 * 3600
HOUR = 3600

SEED_ENV = "ARTEX_SIM_SEED"

# buyer source wallets, exchange payment wallets, seller payout wallets (0 = token wallet)
PATTERN_SHAPES = {
    1: (1, 1, 0),
    2: (1, 1, 1),
    3: (3, 1, 0),
    4: (3, 1, 1),
    5: (3, 1, 3),
    6: (3, 3, 3),
}


class _Model(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ActorsConfig(_Model):
    funding: float = Field(1000.0, gt=0, description="display units per funded member wallet")


class ExchangeSettings(_Model):
    treasury_funding: float = Field(100_000.0, ge=0)
    review_delay: int = Field(HOUR, ge=0)
    auction_window: int = Field(3 * DAY, ge=0)
    settlement_cycle: int = Field(DAY, gt=0)
    deposit_timeout: int = Field(7 * DAY, gt=0)
    payment_timeout: int = Field(7 * DAY, gt=0)
    gas_dust: Optional[int] = Field(None, ge=0, description="base units; default covers one tx")
    installment_jitter: float = Field(0.10, ge=0, lt=0.5)
    auction_policy: Literal["hidden_ascending", "sealed_bid"] = "hidden_ascending"
    blacklist_trades: list[str] = Field(default_factory=list)
    authority_key: str = "investigator-key"


class DecoyConfig(_Model):
    pool_size: int = Field(5, ge=2)
    float_funding: float = Field(10_000.0, gt=0, description="display units of liquidity per decoy")
    topup_txs: int = Field(2, ge=1, description="gas for this many txs is topped up per decoy per trade")


class NoiseConfig(_Model):
    count: int = Field(0, ge=0)
    wallets: int = Field(12, ge=2)
    min_amount: float = Field(0.05, gt=0)
    max_amount: float = Field(20.0, gt=0)
    horizon: int = Field(6 * DAY, gt=0)
    funding: float = Field(5_000.0, gt=0)

    @model_validator(mode="after")
    def _range(self):
        if self.max_amount < self.min_amount:
            raise ValueError("noise max_amount < min_amount")
        return self


class AdversaryConfig(_Model):
    time_window: int = Field(7 * DAY, ge=0)
    max_subset_size: int = Field(8, ge=1, le=8)
    amount_tolerance: int = Field(0, ge=0, description="base units")
    timing_decay_tau: int = Field(2 * DAY, gt=0)
    weights: dict[str, float] = Field(default_factory=lambda: {
        "direct_swap": 1.0, "amount_match": 1.0, "timing": 1.0, "not_fresh": 1.0})
    score_floor: float = Field(0.05, gt=0, lt=1)
    hub_min_fanout: int = Field(4, ge=1)
    search_budget: int = Field(200_000, ge=1)


class BidSpec(_Model):
    bidder: int = Field(ge=0, description="buyer index")
    amount: float = Field(gt=0)
    at: int = Field(HOUR, ge=0, description="seconds after the auction opens")


class TradeConfig(_Model):
    id: str
    strategy: Literal["naive_p2p", "frontend_hiding", "decoy", "artex"]
    pattern: Optional[int] = Field(None, ge=1, le=6)
    pool_size: Optional[int] = Field(None, ge=2)
    seller: int = Field(0, ge=0)
    buyer: int = Field(0, ge=0)
    token_standard: Literal["fungible", "non_fungible", "rwa3643"] = "rwa3643"
    token_amount: int = Field(1, ge=1)
    price: Optional[float] = Field(None, gt=0)
    bids: Optional[list[BidSpec]] = None
    start: int = Field(0, ge=0)
    buyer_wallets: Optional[int] = Field(None, ge=1)
    payment_dests: Optional[int] = Field(None, ge=1)
    payout_wallets: Optional[int] = Field(None, ge=0)
    buyer_installments: int = Field(1, ge=1)
    seller_installments: int = Field(1, ge=1)
    payment_delay: int = Field(2 * HOUR, ge=0)
    payment_spacing: int = Field(8 * HOUR, gt=0)
    payout_spacing: int = Field(DAY, gt=0)
    short_by: int = Field(0, ge=0, description="base units withheld from the last payment leg")
    overpay_by: int = Field(0, ge=0, description="base units added to the first payment leg")

    @model_validator(mode="after")
    def _strategy_fields(self):
        if self.strategy == "artex":
            if self.pattern is None:
                raise ValueError(f"trade {self.id}: artex trades need a pattern")
            if self.price is None and self.bids is None:
                raise ValueError(f"trade {self.id}: give a price or a bid script (an empty script means no bids)")
            n_src, n_dst, n_pay = self.shape()
            if self.pattern in (1, 2) and (n_src != 1 or self.buyer_installments != 1):
                raise ValueError(f"trade {self.id}: pattern {self.pattern} pays once from one wallet")
            if self.pattern >= 3 and n_src < 2:
                raise ValueError(f"trade {self.id}: pattern {self.pattern} splits the payment")
            if (self.pattern == 6) != (n_dst >= 2):
                raise ValueError(f"trade {self.id}: only pattern 6 uses several exchange wallets")
            if self.pattern in (1, 3) and n_pay != 0:
                raise ValueError(f"trade {self.id}: pattern {self.pattern} pays out to the token wallet")
            if self.pattern in (2, 4) and n_pay != 1:
                raise ValueError(f"trade {self.id}: pattern {self.pattern} pays out to one other wallet")
            if self.pattern in (5, 6) and n_pay < 2:
                raise ValueError(f"trade {self.id}: pattern {self.pattern} splits the payout")
        else:
            if self.price is None:
                raise ValueError(f"trade {self.id}: {self.strategy} trades need a price")
            if self.pattern is not None or self.bids is not None:
                raise ValueError(f"trade {self.id}: pattern/bids only apply to artex trades")
        if self.token_standard != "fungible" and self.token_amount != 1:
            raise ValueError(f"trade {self.id}: non-fungible tokens move one unit")
        return self

    def shape(self) -> tuple[int, int, int]:
        src, dst, pay = PATTERN_SHAPES.get(self.pattern or 1)
        return (self.buyer_wallets or src, self.payment_dests or dst,
                pay if self.payout_wallets is None else self.payout_wallets)

    def bidders(self) -> list[int]:
        if self.bids is not None:
            return sorted({b.bidder for b in self.bids})
        return [self.buyer]


class ScenarioConfig(_Model):
    name: str = "scenario"
    description: str = ""
    seed: Optional[int] = Field(None, ge=0, lt=2**64)
    display_scale: int = Field(10**9, ge=1)
    gas_fee: int = Field(21_000, ge=0, description="base units per transaction")
    fee_bps: int = Field(0, ge=0, le=10_000)
    strict_routing_fidelity: bool = False
    auto_approve_kyc: bool = True
    actors: ActorsConfig = Field(default_factory=ActorsConfig)
    exchange: ExchangeSettings = Field(default_factory=ExchangeSettings)
    decoy: DecoyConfig = Field(default_factory=DecoyConfig)
    trades: list[TradeConfig] = Field(default_factory=list)
    noise_trades: NoiseConfig = Field(default_factory=NoiseConfig)
    adversary: AdversaryConfig = Field(default_factory=AdversaryConfig)

    @model_validator(mode="after")
    def _unique_trades(self):
        ids = [t.id for t in self.trades]
        if len(ids) != len(set(ids)):
            raise ValueError("trade ids must be unique")
        return self

    def units(self, display: float) -> int:
        return int(Decimal(str(display)) * self.display_scale)

    def resolved_seed(self, override: Optional[int] = None) -> int:
        if override is not None:
            return int(override)
        if self.seed is not None:
            return self.seed
        env = os.environ.get(SEED_ENV)
        return int(env) if env else 0


def load_config(source) -> ScenarioConfig:
    """Parse a config given as a file path or as already-loaded data; raises ConfigInvalid."""
    try:
        if isinstance(source, ScenarioConfig):
            return source
        if isinstance(source, dict):
            return ScenarioConfig.model_validate(source)
        if isinstance(source, (str, os.PathLike)) and os.path.exists(source):
            with open(source, encoding="utf-8") as fh:
                return ScenarioConfig.model_validate(json.load(fh))
        if isinstance(source, str):
            return ScenarioConfig.model_validate_json(source)
    except (ValidationError, json.JSONDecodeError) as exc:
        if isinstance(exc, ValidationError):
            detail = "; ".join(f"{'.'.join(str(p) for p in e['loc']) or '<root>'}: {e['msg']}" for e in exc.errors())
        else:
            detail = str(exc)
        raise ConfigInvalid(f"invalid scenario config: {detail}") from exc
    raise ConfigInvalid(f"cannot load config from {source!r}")


def config_schema() -> dict:
    return ScenarioConfig.model_json_schema()
