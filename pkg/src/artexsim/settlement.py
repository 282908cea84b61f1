"""Value routing after an auction, plus token delivery to a fresh wallet.

Buyers pay the winning price into one or more exchange payment wallets,
possibly from several of their own wallets and in installments. Sellers are
paid from the treasury (or, with ``strict_routing_fidelity``, from the very
wallets that received the payment) into wallets of their choosing, optionally
spread over several installments. The token leaves the intake wallet for a
newly created wallet whose key travels to the buyer over the private queue.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from typing import TYPE_CHECKING, Optional, Sequence

from .errors import (
    DeliveryFailed,
    EmptyWalletSet,
    IdentityNotRegistered,
    InsufficientFunds,
    NoRecord,
    NotAuthorized,
    NotSeller,
    NotWinner,
    SumMismatch,
    TreasuryInsufficient,
    UnknownDestination,
    WrongState,
)
from .exchange import DAY, ListingState, NotificationKind, WalletRole
from .identity import Session

if TYPE_CHECKING:
    from .exchange import Exchange

logger = logging.getLogger(__name__)

S = ListingState


@dataclass(frozen=True)
class PaymentLeg:
    source: str
    dest: str
    amount: int
    at_offset: int = 0


@dataclass
class PaymentPlan:
    listing_id: str
    price: int
    legs: list


@dataclass(frozen=True)
class PayoutLeg:
    source: Optional[str]
    dest: str
    amount: int
    at_offset: int = 0


@dataclass
class PayoutPlan:
    listing_id: str
    total: int
    legs: list


@dataclass(frozen=True)
class SecureChannelMessage:
    recipient: str
    wallet_address: str
    private_key: bytes = field(repr=False)
    sent_at: int = 0


@dataclass
class SettlementRecord:
    listing_id: str
    seller: str
    buyer: str
    contract: str
    token_id: Optional[int]
    amount: int
    price: int
    fee: int
    seller_token_wallet: str
    intake_wallet: str
    fresh_wallet: Optional[str] = None
    payment_wallets: list = field(default_factory=list)
    payment_legs: list = field(default_factory=list)  # (source, dest, value, tx_hash)
    payout_legs: list = field(default_factory=list)  # (source, dest, value, tx_hash)
    refunds: list = field(default_factory=list)  # (source, dest, value, tx_hash)
    deposit_tx: Optional[str] = None
    delivery_tx: Optional[str] = None
    settled_at: Optional[int] = None
    delivered_at: Optional[int] = None
    completed_at: Optional[int] = None

    def to_dict(self) -> dict:
        return asdict(self)

    @property
    def paid(self) -> int:
        return sum(v for _, _, v, _ in self.payment_legs)

    @property
    def paid_out(self) -> int:
        return sum(v for _, _, v, _ in self.payout_legs)

    @property
    def refunded(self) -> int:
        return sum(v for _, _, v, _ in self.refunds)

    def balances(self) -> bool:
        """payments = price + refunds and price = payouts + fee, in exact integers."""
        return self.paid - self.refunded == self.price == self.paid_out + self.fee


def split_amount(total: int, parts: int, rng) -> list[int]:
    """Split ``total`` into ``parts`` positive integers with seeded uneven weights."""
    if parts < 1 or total < parts:
        raise ValueError(f"cannot split {total} into {parts} positive parts")
    weights = rng.uniform(0.5, 1.5, size=parts)
    raw = [int(total * w / weights.sum()) for w in weights]
    raw = [max(1, r) for r in raw]
    raw[0] += total - sum(raw)
    if raw[0] < 1:
        return split_amount(total, parts, rng)
    return raw


def installment_offsets(n: int, spacing: int, jitter: float, rng, base: int = 0) -> list[int]:
    """Offsets ``base + j * spacing`` plus uniform jitter of at most ``jitter * spacing``."""
    out = []
    for j in range(n):
        dj = rng.uniform(-jitter, jitter) * spacing if jitter > 0 else 0.0
        out.append(max(0, int(round(base + j * spacing + dj))))
    return out


@dataclass
class _Schedule:
    legs: list  # PayoutLeg with bound source
    due: list  # absolute times
    done: list  # bool


class SettlementDesk:
    def __init__(self, exchange: "Exchange"):
        self.ex = exchange
        self.plans: dict[str, PaymentPlan] = {}
        self.payouts: dict[str, PayoutPlan] = {}
        self.records: dict[str, SettlementRecord] = {}
        self._schedules: dict[str, _Schedule] = {}
        self._surplus: dict[str, list] = {}

    @property
    def ledger(self):
        return self.ex.ledger

    def plan_for(self, listing_id: str) -> Optional[PaymentPlan]:
        return self.plans.get(listing_id)

    def fee_for(self, price: int) -> int:
        return price * self.ex.config.fee_bps // 10_000

    # -- buyer side -----------------------------------------------------
    def propose_payment_plan(self, session: Session, listing_id: str, legs: Sequence) -> PaymentPlan:
        member = self.ex.members.authenticate(session)
        listing = self.ex.listing(listing_id)
        if listing.state is not S.AWAITING_PAYMENT:
            raise WrongState(listing.state.value)
        if listing.outcome is None or member != listing.outcome.winner:
            raise NotWinner(listing_id)
        legs = [leg if isinstance(leg, PaymentLeg) else PaymentLeg(*leg) for leg in legs]
        allowed = {w.address for w in listing.payment_wallets}
        for leg in legs:
            if leg.dest not in allowed:
                raise UnknownDestination(leg.dest)
            if leg.amount <= 0:
                raise SumMismatch("leg amounts must be positive")
        if sum(leg.amount for leg in legs) != listing.outcome.price:
            raise SumMismatch(f"legs sum to {sum(l.amount for l in legs)}, price is {listing.outcome.price}")
        plan = PaymentPlan(listing_id, listing.outcome.price, legs)
        self.plans[listing_id] = plan
        return plan

    def _inbound_payments(self, listing) -> list:
        dests = {w.address for w in listing.payment_wallets}
        since = next(t for src, dst, t in listing.transitions if dst == S.AWAITING_PAYMENT.value)
        return [tx for tx in self.ledger.transactions
                if tx.to in dests and tx.token_op is None and tx.value > 0
                and tx.timestamp >= since and not self.ex.is_exchange_wallet(tx.sender)]

    def monitor_payments(self, listing_id: str) -> ListingState:
        """Match sealed inbound payments to plan legs, order-free."""
        listing = self.ex.listing(listing_id)
        if listing.state is not S.AWAITING_PAYMENT:
            return listing.state
        plan = self.plans.get(listing_id)
        inbound = self._inbound_payments(listing)
        matched = self._match(plan, inbound) if plan is not None else None
        if matched is not None:
            self._start_settling(listing, plan, matched)
        elif self.ledger.now >= listing.payment_deadline:
            self.ex._transition(listing, S.DEFAULTED)
            self._refund_all(listing, inbound)
        return listing.state

    @staticmethod
    def _match(plan: PaymentPlan, inbound: list) -> Optional[list]:
        used = set()
        pairs = []
        for leg in sorted(plan.legs, key=lambda l: -l.amount):
            best = None
            for tx in inbound:
                if tx.hash in used or tx.sender != leg.source or tx.to != leg.dest or tx.value < leg.amount:
                    continue
                if best is None or tx.value - leg.amount < best.value - leg.amount:
                    best = tx
            if best is None:
                return None
            used.add(best.hash)
            pairs.append((leg, best))
        return pairs

    def _start_settling(self, listing, plan: PaymentPlan, matched: list) -> None:
        self.ex._transition(listing, S.SETTLING)
        outcome = listing.outcome
        record = SettlementRecord(
            listing_id=listing.id, seller=listing.seller, buyer=outcome.winner,
            contract=listing.contract, token_id=listing.token_id, amount=listing.amount,
            price=outcome.price, fee=self.fee_for(outcome.price),
            seller_token_wallet=listing.seller_token_wallet, intake_wallet=listing.intake.address,
            payment_wallets=[w.address for w in listing.payment_wallets],
            deposit_tx=listing.deposit_tx, settled_at=self.ledger.now,
        )
        surplus = []
        for leg, tx in matched:
            record.payment_legs.append((tx.sender, tx.to, tx.value, tx.hash))
            self.ex._record(listing.id, tx)
            if tx.value > leg.amount:
                surplus.append((tx.to, tx.sender, tx.value - leg.amount))
        self._surplus[listing.id] = surplus
        self.records[listing.id] = record

    def _refund_all(self, listing, inbound: list) -> None:
        wallets = {w.address: w for w in listing.payment_wallets}
        for tx in inbound:
            w = wallets[tx.to]
            self.ex.fund_gas(listing.id, w, extra=tx.value)
            self.ex._record(listing.id, self.ledger.transfer_native(w.keys, tx.sender, tx.value))

    # -- seller side ----------------------------------------------------
    def request_settlement(self, session: Session, listing_id: str, payout_wallets: Sequence[str],
                           installments: int = 1, spacing: int = DAY,
                           jitter: Optional[float] = None) -> PayoutPlan:
        member = self.ex.members.authenticate(session)
        listing = self.ex.listing(listing_id)
        if member != listing.seller:
            raise NotSeller(listing_id)
        if listing.outcome is None or listing.state not in (S.AWAITING_PAYMENT, S.SETTLING):
            raise WrongState(listing.state.value)
        if not payout_wallets:
            raise EmptyWalletSet(listing_id)
        if installments < 1:
            raise ValueError("installments must be >= 1")
        jitter = self.ex.config.installment_jitter if jitter is None else jitter
        total = listing.outcome.price - self.fee_for(listing.outcome.price)
        n = len(payout_wallets) * installments
        amounts = split_amount(total, n, self.ex.rng) if n > 1 else [total]
        offsets = installment_offsets(installments, spacing, jitter, self.ex.rng)
        source = None if self.ex.config.strict_routing_fidelity else self.ex.treasury.address
        legs = []
        k = 0
        for j in range(installments):
            for dest in payout_wallets:
                legs.append(PayoutLeg(source, dest, amounts[k], offsets[j]))
                k += 1
        plan = PayoutPlan(listing_id, total, legs)
        self.payouts[listing_id] = plan
        return plan

    def _bind(self, listing_id: str) -> Optional[_Schedule]:
        sched = self._schedules.get(listing_id)
        if sched is not None:
            return sched
        plan = self.payouts.get(listing_id)
        if plan is None:
            return None
        record = self.records[listing_id]
        legs = list(plan.legs)
        if self.ex.config.strict_routing_fidelity:
            legs = self._bind_strict(listing_id, legs)
        sched = _Schedule(legs, [record.settled_at + leg.at_offset for leg in legs], [False] * len(legs))
        self._schedules[listing_id] = sched
        return sched

    def _bind_strict(self, listing_id: str, legs: list) -> list:
        """Draw each payout from the payment wallets that actually received the money."""
        record = self.records[listing_id]
        capacity: dict[str, int] = {}
        for _, dest, value, _ in record.payment_legs:
            capacity[dest] = capacity.get(dest, 0) + value
        for src, _, value in self._surplus[listing_id]:
            capacity[src] -= value
        order = [a for a in record.payment_wallets if capacity.get(a, 0) > 0]
        bound = []
        i = 0
        for leg in legs:
            remaining = leg.amount
            while remaining > 0:
                src = order[i]
                take = min(remaining, capacity[src])
                if take > 0:
                    bound.append(PayoutLeg(src, leg.dest, take, leg.at_offset))
                    capacity[src] -= take
                    remaining -= take
                if capacity[src] == 0 and i < len(order) - 1:
                    i += 1
        return bound

    def next_due(self) -> Optional[int]:
        times = []
        for listing_id, sched in self._schedules.items():
            if self.ex.listings[listing_id].state is S.SETTLING:
                times.extend(t for t, done in zip(sched.due, sched.done) if not done)
        for listing_id, listing in self.ex.listings.items():
            if listing.state is S.SETTLING and listing_id not in self._schedules and listing_id in self.payouts:
                times.append(self.ledger.now)
        return min(times) if times else None

    def execute_payout(self, listing_id: str) -> list:
        listing = self.ex.listing(listing_id)
        if listing.state is not S.SETTLING:
            raise WrongState(listing.state.value)
        sched = self._bind(listing_id)
        if sched is None:
            return []
        record = self.records[listing_id]
        now = self.ledger.now
        out = []
        for i, leg in enumerate(sched.legs):
            if sched.done[i] or sched.due[i] > now:
                continue
            wallet = self.ex.wallets[leg.source]
            if wallet.role is WalletRole.EXCHANGE_TREASURY:
                try:
                    tx = self.ledger.transfer_native(wallet.keys, leg.dest, leg.amount)
                except InsufficientFunds as exc:
                    raise TreasuryInsufficient(str(exc)) from exc
            else:
                self.ex.fund_gas(listing_id, wallet, extra=leg.amount)
                tx = self.ledger.transfer_native(wallet.keys, leg.dest, leg.amount)
            self.ex._record(listing_id, tx)
            record.payout_legs.append((tx.sender, tx.to, tx.value, tx.hash))
            sched.done[i] = True
            out.append(tx)
        if all(sched.done) and record.delivery_tx is not None:
            self._finish(listing, record)
        return out

    def _finish(self, listing, record: SettlementRecord) -> None:
        for src, dest, value in self._surplus.get(listing.id, []):
            w = self.ex.wallets[src]
            self.ex.fund_gas(listing.id, w, extra=value)
            tx = self.ledger.transfer_native(w.keys, dest, value)
            self.ex._record(listing.id, tx)
            record.refunds.append((tx.sender, tx.to, tx.value, tx.hash))
        record.completed_at = self.ledger.now
        self.ex._transition(listing, S.COMPLETED)
        self.ex.notify(record.seller, NotificationKind.SETTLEMENT_COMPLETE, listing=listing.id,
                       amount=record.paid_out)
        self.ex.notify(record.buyer, NotificationKind.SETTLEMENT_COMPLETE, listing=listing.id)

    # -- delivery -------------------------------------------------------
    def deliver_token(self, listing_id: str) -> SecureChannelMessage:
        listing = self.ex.listing(listing_id)
        record = self.records.get(listing_id)
        if listing.state is not S.SETTLING or record is None:
            raise WrongState(listing.state.value)
        if record.delivery_tx is not None:
            raise WrongState("already delivered")
        fresh = self.ex.new_wallet(WalletRole.FRESH_DELIVERY)
        try:
            self.ex.register_on_token(listing_id, listing.contract, fresh)
            self.ex.fund_gas(listing_id, listing.intake)
            tx = self.ledger.transfer_token(listing.intake.keys, listing.contract, listing.token_id,
                                            listing.amount, fresh.address)
        except IdentityNotRegistered as exc:
            raise DeliveryFailed(str(exc)) from exc
        self.ex._record(listing_id, tx)
        if self.ex.gas_dust > 0:
            self.ex._record(listing_id, self.ledger.transfer_native(
                self.ex.treasury.keys, fresh.address, self.ex.gas_dust))
        record.fresh_wallet = fresh.address
        record.delivery_tx = tx.hash
        record.delivered_at = self.ledger.now
        msg = SecureChannelMessage(record.buyer, fresh.address, fresh.keys.private, self.ledger.now)
        self.ex.queues[record.buyer].append(msg)
        return msg

    # -- disclosure -----------------------------------------------------
    def investigator_disclosure(self, credential: str, listing_id: Optional[str] = None,
                                token: Optional[tuple] = None) -> SettlementRecord:
        if credential != self.ex.config.authority_key:
            raise NotAuthorized("investigator credential rejected")
        if listing_id is not None:
            record = self.records.get(listing_id)
        else:
            hits = [r for r in self.records.values() if (r.contract, r.token_id) == tuple(token)]
            record = hits[-1] if hits else None
        if record is None:
            raise NoRecord(listing_id or str(token))
        return record

    def audit_export(self) -> str:
        return json.dumps([r.to_dict() for r in self.records.values()], indent=1)
