"""Listing lifecycle for the exchange.

A listing moves from draft through deposit intake, compliance review,
publication, auction, and post-auction notification. Each listing gets its
own fresh intake wallet; wallet roles and member mappings stay in the
exchange's private store.
"""

from __future__ import annotations

import enum
import hashlib
import json
import logging
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .auction import Auction, AuctionPolicy, BidResponse, Outcome
from .errors import (
    AuctionClosed,
    DepositMismatch,
    DepositTimeout,
    ExchangeError,
    IllegalTransition,
    InsufficientFunds,
    MissingDisclosure,
    NotAuthorized,
    NoWinner,
    TreasuryInsufficient,
    UnknownContract,
    UnknownListing,
    WrongState,
)
from .identity import MemberId, MemberRegistry, Session
from .ledger import Address, KeyPair, Ledger, LedgerTransaction, TokenStandard

logger = logging.getLogger(__name__)

DAY = 24 * 3600
EXCHANGE_OWNER = "exchange"


class WalletRole(str, enum.Enum):
    SELLER_TOKEN = "seller_token"
    SELLER_PAYOUT = "seller_payout"
    BUYER_PAYMENT = "buyer_payment"
    BUYER_TOKEN = "buyer_token"
    EXCHANGE_INTAKE = "exchange_intake"
    EXCHANGE_PAYMENT = "exchange_payment"
    EXCHANGE_TREASURY = "exchange_treasury"
    FRESH_DELIVERY = "fresh_delivery"
    DECOY_POOL = "decoy_pool"
    NOISE = "noise"
    ISSUER = "issuer"


EXCHANGE_ROLES = frozenset({
    WalletRole.EXCHANGE_INTAKE,
    WalletRole.EXCHANGE_PAYMENT,
    WalletRole.EXCHANGE_TREASURY,
    WalletRole.FRESH_DELIVERY,
})


@dataclass(frozen=True)
class Wallet:
    keys: KeyPair
    role: WalletRole
    owner: str

    @property
    def address(self) -> Address:
        return self.keys.address


class ListingState(str, enum.Enum):
    DRAFT = "draft"
    AWAITING_DEPOSIT = "awaiting_deposit"
    UNDER_REVIEW = "under_review"
    LISTED = "listed"
    IN_AUCTION = "in_auction"
    AUCTION_ENDED = "auction_ended"
    AWAITING_PAYMENT = "awaiting_payment"
    SETTLING = "settling"
    COMPLETED = "completed"
    REJECTED = "rejected"
    DEFAULTED = "defaulted"
    RETURNED = "returned"


S = ListingState
LEGAL_TRANSITIONS: dict[ListingState, frozenset] = {
    S.DRAFT: frozenset({S.AWAITING_DEPOSIT}),
    S.AWAITING_DEPOSIT: frozenset({S.UNDER_REVIEW}),
    S.UNDER_REVIEW: frozenset({S.LISTED, S.REJECTED}),
    S.LISTED: frozenset({S.IN_AUCTION}),
    S.IN_AUCTION: frozenset({S.AUCTION_ENDED}),
    S.AUCTION_ENDED: frozenset({S.AWAITING_PAYMENT, S.RETURNED}),
    S.AWAITING_PAYMENT: frozenset({S.SETTLING, S.DEFAULTED}),
    S.SETTLING: frozenset({S.COMPLETED}),
    S.REJECTED: frozenset({S.RETURNED}),
    S.DEFAULTED: frozenset({S.RETURNED}),
    S.COMPLETED: frozenset(),
    S.RETURNED: frozenset(),
}
CUSTODY_STATES = frozenset({
    S.UNDER_REVIEW, S.LISTED, S.IN_AUCTION, S.AUCTION_ENDED, S.AWAITING_PAYMENT, S.SETTLING,
})


def replay_transitions(log: Iterable[tuple], start: ListingState = S.DRAFT) -> ListingState:
    """Walk a transition log and reject anything outside the legal set."""
    state = start
    for src, dst, *_ in log:
        src, dst = ListingState(src), ListingState(dst)
        if src is not state or dst not in LEGAL_TRANSITIONS[src]:
            raise IllegalTransition(f"{src.value} -> {dst.value} (state was {state.value})")
        state = dst
    return state


class DisclosureLeak(ExchangeError):
    pass


DISCLOSURE_FIELDS = ("token_contract", "token_id", "token_standard", "token_amount",
                     "token_info", "creator", "image_url")


@dataclass
class Disclosure:
    token_contract: Optional[Address] = None
    token_standard: Optional[str] = None
    token_amount: Optional[int] = None
    token_id: Optional[int] = None
    token_info: str = ""
    creator: str = ""
    image_url: str = ""

    def missing(self) -> list[str]:
        out = [f for f in ("token_contract", "token_standard", "token_amount") if getattr(self, f) in (None, "")]
        if self.token_standard not in (None, "", TokenStandard.FUNGIBLE.value) and self.token_id is None:
            out.append("token_id")
        return out

    def to_public(self) -> dict:
        return {f: getattr(self, f) for f in DISCLOSURE_FIELDS}

    def to_json(self) -> str:
        return json.dumps(self.to_public(), separators=(",", ":"))


class NotificationKind(str, enum.Enum):
    AUCTION_ENDED_SELLER = "auction_ended_seller"
    AUCTION_WON_BUYER = "auction_won_buyer"
    AUCTION_ENDED = "auction_ended"
    PAYMENT_ADDRESSES = "payment_addresses"
    SETTLEMENT_COMPLETE = "settlement_complete"
    LISTING_REJECTED = "listing_rejected"
    RETURNED = "returned"


@dataclass(frozen=True)
class Notification:
    recipient: MemberId
    kind: NotificationKind
    payload: dict
    sent_at: int


@dataclass
class Listing:
    id: str
    seller: MemberId
    contract: Address
    token_id: Optional[int]
    amount: int
    disclosure: Disclosure
    intake: Wallet
    created_at: int
    deposit_deadline: int
    state: ListingState = S.DRAFT
    transitions: list = field(default_factory=list)
    seller_token_wallet: Optional[Address] = None
    deposit_tx: Optional[str] = None
    outcome: Optional[Outcome] = None
    payment_wallets: list = field(default_factory=list)
    payment_deadline: Optional[int] = None
    last_check: Optional[int] = None
    reject_reason: str = ""

    @property
    def token_ref(self) -> tuple:
        return (self.contract, self.token_id)


ComplianceRule = Callable[["Exchange", Listing], Optional[str]]


def rule_known_standard(ex: "Exchange", listing: Listing) -> Optional[str]:
    try:
        std = ex.ledger.contract(listing.contract).standard
    except UnknownContract:
        return "unknown contract"
    if listing.disclosure.token_standard != std.value:
        return "standard mismatch"
    return None


def rule_issuer_resolvable(ex: "Exchange", listing: Listing) -> Optional[str]:
    c = ex.ledger.contract(listing.contract)
    if ex.ledger.kind_of(c.issuer) is None:
        return "issuer unresolvable"
    if c.identity_registry is not None and c.issuer not in c.identity_registry:
        return "issuer not registered"
    return None


def rule_not_blacklisted(ex: "Exchange", listing: Listing) -> Optional[str]:
    if listing.contract in ex.config.blacklist:
        return "contract blacklisted"
    return None


DEFAULT_RULESET: tuple = (rule_known_standard, rule_issuer_resolvable, rule_not_blacklisted)


@dataclass
class ExchangeConfig:
    fee_bps: int = 0
    strict_routing_fidelity: bool = False
    deposit_timeout: int = 7 * DAY
    payment_timeout: int = 7 * DAY
    settlement_cycle: int = DAY
    gas_dust: Optional[int] = None
    installment_jitter: float = 0.10
    blacklist: frozenset = frozenset()
    authority_key: str = "investigator-key"
    auction_policy: AuctionPolicy = AuctionPolicy.HIDDEN_ASCENDING
    reserve: int = 0


class Exchange:
    """Single-threaded exchange orchestrator.

    The harness drives it with explicit calls plus :meth:`tick` at the times
    returned by :meth:`next_wakeup`.
    """

    def __init__(self, ledger: Ledger, members: MemberRegistry, config: Optional[ExchangeConfig] = None,
                 rng: Optional[np.random.Generator] = None):
        from .settlement import SettlementDesk

        self.ledger = ledger
        self.members = members
        self.config = config or ExchangeConfig()
        self.rng = rng if rng is not None else np.random.default_rng(0)
        self.wallets: dict[Address, Wallet] = {}
        self.listings: dict[str, Listing] = {}
        self.auctions: dict[str, Auction] = {}
        self.queues: dict[MemberId, list] = defaultdict(list)
        self.listing_txs: dict[str, list[str]] = defaultdict(list)
        self.treasury = self.new_wallet(WalletRole.EXCHANGE_TREASURY)
        self.claim_hash = hashlib.sha256(b"artexsim/exchange-claim" + self.treasury.keys.public).hexdigest()
        self.settlement = SettlementDesk(self)
        self._listing_seq = 0

    # -- private wallet store -------------------------------------------
    def new_wallet(self, role: WalletRole) -> Wallet:
        w = Wallet(self.ledger.create_account(), role, EXCHANGE_OWNER)
        self.wallets[w.address] = w
        return w

    def is_exchange_wallet(self, address: Address) -> bool:
        return address in self.wallets

    @property
    def gas_dust(self) -> int:
        return self.ledger.gas_fee if self.config.gas_dust is None else self.config.gas_dust

    def _record(self, listing_id: str, tx: Optional[LedgerTransaction]) -> Optional[LedgerTransaction]:
        if tx is not None:
            self.listing_txs[listing_id].append(tx.hash)
        return tx

    def fund_gas(self, listing_id: str, wallet: Wallet, n_tx: int = 1, extra: int = 0) -> None:
        """Top up ``wallet`` from the treasury so it can send ``n_tx`` txs moving ``extra``."""
        need = n_tx * self.ledger.gas_fee + extra - self.ledger.balance(wallet.address)
        if need > 0:
            try:
                self._record(listing_id, self.ledger.transfer_native(self.treasury.keys, wallet.address, need))
            except InsufficientFunds as exc:
                raise TreasuryInsufficient(str(exc)) from exc

    def register_on_token(self, listing_id: str, contract: Address, wallet: Wallet) -> None:
        c = self.ledger.contract(contract)
        if c.identity_registry is not None and wallet.address not in c.identity_registry:
            self._record(listing_id, self.ledger.register_identity(
                contract, self.treasury.keys, wallet.address, self.claim_hash))

    def notify(self, recipient: MemberId, kind: NotificationKind, **payload) -> Notification:
        note = Notification(recipient, kind, payload, self.ledger.now)
        self.queues[recipient].append(note)
        return note

    def drain(self, member: MemberId) -> list:
        items, self.queues[member] = self.queues[member], []
        return items

    # -- state machine --------------------------------------------------
    def listing(self, listing_id: str) -> Listing:
        try:
            return self.listings[listing_id]
        except KeyError:
            raise UnknownListing(listing_id) from None

    def _transition(self, listing: Listing, dst: ListingState) -> None:
        if dst not in LEGAL_TRANSITIONS[listing.state]:
            raise IllegalTransition(f"{listing.id}: {listing.state.value} -> {dst.value}")
        listing.transitions.append((listing.state.value, dst.value, self.ledger.now))
        logger.debug("listing %s: %s -> %s", listing.id, listing.state.value, dst.value)
        listing.state = dst

    def create_listing(self, session: Session, contract: Address, token_id: Optional[int], amount: int,
                       disclosure: Disclosure) -> tuple[Listing, Address]:
        seller = self.members.require_full(session)
        missing = disclosure.missing()
        if missing:
            raise MissingDisclosure(", ".join(missing))
        if disclosure.token_contract != contract or disclosure.token_id != token_id:
            raise MissingDisclosure("disclosure does not describe the listed token")
        std = TokenStandard(disclosure.token_standard)
        if std.unique_ids:
            amount = 1
            disclosure.token_amount = 1
        elif disclosure.token_amount != amount:
            raise MissingDisclosure("token_amount does not match listed amount")
        leaks = [w for w in self.members.wallets_of(seller) if w != disclosure.creator and any(
            w in str(v) for k, v in disclosure.to_public().items() if k != "token_contract")]
        if leaks:
            raise DisclosureLeak("disclosure mentions a member wallet")
        self._listing_seq += 1
        listing_id = f"L{self._listing_seq:04d}"
        intake = self.new_wallet(WalletRole.EXCHANGE_INTAKE)
        now = self.ledger.now
        listing = Listing(
            id=listing_id, seller=seller, contract=contract, token_id=token_id, amount=int(amount),
            disclosure=disclosure, intake=intake, created_at=now,
            deposit_deadline=now + self.config.deposit_timeout,
        )
        self.listings[listing_id] = listing
        self._transition(listing, S.AWAITING_DEPOSIT)
        if self.ledger.kind_of(contract) is not None:
            self.register_on_token(listing_id, contract, intake)
        return listing, intake.address

    def confirm_deposit(self, listing_id: str) -> ListingState:
        """Look for the deposit among sealed transactions."""
        listing = self.listing(listing_id)
        if listing.state is not S.AWAITING_DEPOSIT:
            raise WrongState(listing.state.value)
        inbound = [tx for tx in self.ledger.transactions
                   if tx.to == listing.intake.address and tx.token_op is not None]
        for tx in inbound:
            op = tx.token_op
            if op.contract == listing.contract and op.token_id == listing.token_id and op.amount == listing.amount:
                listing.seller_token_wallet = tx.sender
                listing.deposit_tx = tx.hash
                self._record(listing_id, tx)
                self._transition(listing, S.UNDER_REVIEW)
                return listing.state
        if inbound:
            raise DepositMismatch(f"{listing_id}: deposit does not match the listed token")
        if self.ledger.now >= listing.deposit_deadline:
            raise DepositTimeout(listing_id)
        return listing.state

    def review_listing(self, listing_id: str, ruleset: Optional[Sequence[ComplianceRule]] = None) -> ListingState:
        listing = self.listing(listing_id)
        if listing.state is not S.UNDER_REVIEW:
            raise WrongState(listing.state.value)
        for rule in DEFAULT_RULESET if ruleset is None else ruleset:
            reason = rule(self, listing)
            if reason:
                listing.reject_reason = reason
                self._transition(listing, S.REJECTED)
                self.notify(listing.seller, NotificationKind.LISTING_REJECTED, listing=listing_id, reason=reason)
                self.return_token(listing_id)
                return S.REJECTED
        self._transition(listing, S.LISTED)
        return S.LISTED

    def public_listing(self, listing_id: str) -> dict:
        listing = self.listing(listing_id)
        if listing.state in (S.DRAFT, S.AWAITING_DEPOSIT, S.UNDER_REVIEW, S.REJECTED):
            raise WrongState(listing.state.value)
        return listing.disclosure.to_public()

    def export_listing(self, listing_id: str) -> str:
        return json.dumps(self.public_listing(listing_id), separators=(",", ":"))

    def browse(self, session: Session) -> list[dict]:
        """Published listings; open to provisional members."""
        self.members.authenticate(session)
        return [l.disclosure.to_public() for l in self.listings.values()
                if l.state in (S.LISTED, S.IN_AUCTION)]

    # -- auction hand-off -----------------------------------------------
    def open_auction(self, listing_id: str, window: int, policy: Optional[AuctionPolicy] = None,
                     reserve: Optional[int] = None) -> Auction:
        listing = self.listing(listing_id)
        if listing.state is not S.LISTED:
            raise WrongState(listing.state.value)
        auction = Auction.open(listing_id, self.ledger.now, window,
                               policy or self.config.auction_policy,
                               self.config.reserve if reserve is None else reserve)
        self.auctions[listing_id] = auction
        self._transition(listing, S.IN_AUCTION)
        return auction

    def place_bid(self, session: Session, listing_id: str, amount: int) -> BidResponse:
        bidder = self.members.require_full(session)
        listing = self.listing(listing_id)
        if listing.state is not S.IN_AUCTION:
            raise AuctionClosed(listing_id)
        if bidder == listing.seller:
            raise NotAuthorized("sellers cannot bid on their own listing")
        return self.auctions[listing_id].place(bidder, amount, self.ledger.now)

    def is_leading(self, session: Session, listing_id: str) -> bool:
        bidder = self.members.authenticate(session)
        return self.auctions[listing_id].is_leading(bidder)

    def close_auction(self, listing_id: str) -> Optional[Outcome]:
        listing = self.listing(listing_id)
        if listing.state is not S.IN_AUCTION:
            raise WrongState(listing.state.value)
        outcome = self.auctions[listing_id].close(self.ledger.now)
        self._transition(listing, S.AUCTION_ENDED)
        listing.outcome = outcome
        if outcome is None:
            self.return_token(listing_id)
        return outcome

    def notify_results(self, listing_id: str, payment_addresses: int = 1) -> tuple[Notification, Notification]:
        listing = self.listing(listing_id)
        if listing.state is not S.AUCTION_ENDED:
            raise WrongState(listing.state.value)
        if listing.outcome is None:
            raise NoWinner(listing_id)
        if payment_addresses < 1:
            raise ValueError("at least one payment address")
        outcome = listing.outcome
        listing.payment_wallets = [self.new_wallet(WalletRole.EXCHANGE_PAYMENT) for _ in range(payment_addresses)]
        listing.payment_deadline = self.ledger.now + self.config.payment_timeout
        listing.last_check = self.ledger.now
        seller_note = self.notify(listing.seller, NotificationKind.AUCTION_ENDED_SELLER,
                                  listing=listing_id, final_price=outcome.price)
        winner_note = self.notify(
            outcome.winner, NotificationKind.AUCTION_WON_BUYER,
            listing=listing_id, final_price=outcome.price,
            payment_options=["lump_sum", "installments", "split_wallets"],
            payment_addresses=[w.address for w in listing.payment_wallets],
            deadline=listing.payment_deadline,
        )
        for bidder in self.auctions[listing_id].bidders:
            if bidder != outcome.winner:
                self.notify(bidder, NotificationKind.AUCTION_ENDED, listing=listing_id)
        self._transition(listing, S.AWAITING_PAYMENT)
        return seller_note, winner_note

    def return_token(self, listing_id: str) -> ListingState:
        listing = self.listing(listing_id)
        no_bids = listing.state is S.AUCTION_ENDED and listing.outcome is None
        if not (listing.state in (S.REJECTED, S.DEFAULTED) or no_bids):
            raise WrongState(listing.state.value)
        self.fund_gas(listing_id, listing.intake)
        self._record(listing_id, self.ledger.transfer_token(
            listing.intake.keys, listing.contract, listing.token_id, listing.amount, listing.seller_token_wallet))
        self._transition(listing, S.RETURNED)
        self.notify(listing.seller, NotificationKind.RETURNED, listing=listing_id)
        return listing.state

    # -- event loop -----------------------------------------------------
    def _next_boundary(self, t: int) -> int:
        cycle = self.config.settlement_cycle
        return (t // cycle + 1) * cycle

    def next_wakeup(self) -> Optional[int]:
        times = []
        for listing in self.listings.values():
            if listing.state is S.AWAITING_PAYMENT:
                times.append(self._next_boundary(listing.last_check))
        due = self.settlement.next_due()
        if due is not None:
            times.append(due)
        return min(times) if times else None

    def tick(self) -> list[str]:
        """Bring payment monitoring and any due payouts up to ``ledger.now``."""
        now = self.ledger.now
        events = []
        for listing in list(self.listings.values()):
            if listing.state is S.AWAITING_PAYMENT and now >= self._next_boundary(listing.last_check):
                listing.last_check = now
                state = self.settlement.monitor_payments(listing.id)
                if state is S.SETTLING:
                    self.settlement.deliver_token(listing.id)
                    events.append(f"{listing.id}:delivered")
                elif state is S.DEFAULTED:
                    self.return_token(listing.id)
                    events.append(f"{listing.id}:returned")
        for listing in list(self.listings.values()):
            if listing.state is S.SETTLING:
                self.settlement.execute_payout(listing.id)
                if listing.state is S.COMPLETED:
                    events.append(f"{listing.id}:completed")
        return events

    def check_custody(self) -> list[str]:
        """Listings whose token is not held by an exchange wallet while in custody."""
        bad = []
        for listing in self.listings.values():
            if listing.state not in CUSTODY_STATES:
                continue
            c = self.ledger.contract(listing.contract)
            if c.standard.unique_ids:
                held = self.is_exchange_wallet(self.ledger.owner_of(listing.contract, listing.token_id) or "")
            else:
                held = self.ledger.token_balance(listing.contract, listing.intake.address) >= listing.amount
            if not held:
                bad.append(listing.id)
        return bad

    def private_store_blob(self) -> bytes:
        parts = [self.members.private_store_blob()]
        for w in self.wallets.values():
            parts.append(f"{w.address}|{w.role.value}|{w.keys.private.hex()}".encode())
        return b"\n".join(parts)
