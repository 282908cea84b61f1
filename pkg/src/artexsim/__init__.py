"""Deterministic simulator for an anonymous RWA-token exchange and a link adversary."""

from .auction import Auction, AuctionPolicy, winning_bid
from .exchange import Disclosure, Exchange, ExchangeConfig, ListingState, WalletRole
from .identity import MemberRegistry
from .ledger import GAS_SINK, GENESIS_ADDRESS, Ledger, LedgerTransaction, TokenStandard, load_dump
from .settlement import SettlementDesk, SettlementRecord

__version__ = "0.1.0"

__all__ = [
    "Auction", "AuctionPolicy", "winning_bid",
    "Disclosure", "Exchange", "ExchangeConfig", "ListingState", "WalletRole",
    "MemberRegistry",
    "GAS_SINK", "GENESIS_ADDRESS", "Ledger", "LedgerTransaction", "TokenStandard", "load_dump",
    "SettlementDesk", "SettlementRecord",
]
