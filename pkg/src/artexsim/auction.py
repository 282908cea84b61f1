"""Hidden-bid auctions over a fixed window.

The default policy is a hidden ascending auction: a bid must beat the
current maximum, and the bidder learns only whether their own last bid is
leading. ``SealedBid`` accepts one sealed bid per member. Both settle at
first price with the earliest bid winning ties.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .errors import AuctionClosed, BidTooLow, NotYetClosable


class AuctionPolicy(str, enum.Enum):
    HIDDEN_ASCENDING = "hidden_ascending"
    SEALED_BID = "sealed_bid"


@dataclass(frozen=True)
class Bid:
    bidder: str
    amount: int
    at: int
    seq: int = 0


@dataclass(frozen=True)
class Outcome:
    winner: str
    price: int


@dataclass(frozen=True)
class BidResponse:
    accepted: bool
    leading: Optional[bool]


def winning_bid(bids: Sequence[Bid]) -> Optional[Bid]:
    """Highest amount; among equal amounts the earliest (then first submitted)."""
    best = None
    for b in bids:
        if best is None or b.amount > best.amount or (
            b.amount == best.amount and (b.at, b.seq) < (best.at, best.seq)
        ):
            best = b
    return best


@dataclass
class Auction:
    listing_id: str
    opens_at: int
    closes_at: int
    policy: AuctionPolicy = AuctionPolicy.HIDDEN_ASCENDING
    reserve: int = 0
    bids: list = field(default_factory=list)
    outcome: Optional[Outcome] = None
    closed: bool = False

    @classmethod
    def open(cls, listing_id: str, now: int, window: int,
             policy: AuctionPolicy = AuctionPolicy.HIDDEN_ASCENDING, reserve: int = 0) -> "Auction":
        if window < 0:
            raise ValueError("window must be non-negative")
        return cls(listing_id, now, now + window, AuctionPolicy(policy), reserve)

    def _current(self) -> Optional[Bid]:
        return winning_bid(self.bids)

    def place(self, bidder: str, amount: int, at: int) -> BidResponse:
        if self.closed or at >= self.closes_at or at < self.opens_at:
            raise AuctionClosed(self.listing_id)
        if amount <= 0 or amount < self.reserve:
            raise BidTooLow("bid rejected")
        if self.policy is AuctionPolicy.HIDDEN_ASCENDING:
            lead = self._current()
            if lead is not None and amount <= lead.amount:
                raise BidTooLow("bid rejected")
        elif any(b.bidder == bidder for b in self.bids):
            raise BidTooLow("bid rejected")
        self.bids.append(Bid(bidder, int(amount), int(at), len(self.bids)))
        if self.policy is AuctionPolicy.SEALED_BID:
            return BidResponse(True, None)
        return BidResponse(True, True)

    def is_leading(self, bidder: str) -> bool:
        """Whether ``bidder``'s last bid is the current leader."""
        lead = self._current()
        return lead is not None and lead.bidder == bidder

    def close(self, now: int) -> Optional[Outcome]:
        if now < self.closes_at:
            raise NotYetClosable(self.listing_id)
        if not self.closed:
            self.closed = True
            best = self._current()
            if best is not None and best.amount >= self.reserve:
                self.outcome = Outcome(best.bidder, best.amount)
        return self.outcome

    @property
    def bidders(self) -> list[str]:
        seen = []
        for b in self.bids:
            if b.bidder not in seen:
                seen.append(b.bidder)
        return seen
