"""Runners for the four trade strategies compared in the scenarios.

Runners execute on the world's scheduler at the trade's start time and queue
any later steps on it.
"""

from __future__ import annotations

from ..errors import AuctionClosed, BidTooLow, InsufficientFunding, InsufficientFunds
from ..exchange import Disclosure, ListingState, NotificationKind
from ..settlement import PaymentLeg, installment_offsets, split_amount
from .config import HOUR
from .world import TradeRun, World

STRATEGIES = ("naive_p2p", "frontend_hiding", "decoy", "artex")


def strategy_label(trade) -> str:
    """Grouping key for metrics, e.g. ``artex_p6`` or ``naive_p2p``."""
    if trade.strategy == "artex":
        return f"artex_p{trade.pattern}"
    return trade.strategy


def _send(world: World, run: TradeRun, wallet, to: str, amount: int):
    try:
        tx = world.ledger.transfer_native(wallet.keys, to, amount)
    except InsufficientFunds as exc:
        raise InsufficientFunding(f"trade {run.config.id}: {exc}") from exc
    run.record(tx)
    return tx


def _move_token(world: World, run: TradeRun, wallet, to: str):
    amount = run.config.token_amount
    tx = world.ledger.transfer_token(wallet.keys, run.contract, run.token_id, amount, to)
    run.record(tx)
    return tx


# -- direct swap ------------------------------------------------------------

def run_strategy_naive_p2p(world: World, run: TradeRun) -> None:
    """Seller sends the token straight to the buyer, who pays straight back."""
    buyer = run.buyer_wallets[run.config.buyer][0]
    run.price = world.units(run.config.price)
    _move_token(world, run, run.token_wallet, buyer.address)
    _send(world, run, buyer, run.token_wallet.address, run.price)
    run.winner = f"buyer-{run.config.buyer}"
    run.status = "completed"


def run_strategy_frontend(world: World, run: TradeRun) -> None:
    """A marketplace that hides names in its UI still settles on-ledger peer to peer."""
    run_strategy_naive_p2p(world, run)


# -- decoy accounts ---------------------------------------------------------

def run_strategy_decoy(world: World, run: TradeRun) -> None:
    """Token through marketplace custody, value through two different pool accounts.

    Every pool account is topped up with gas for each trade it might serve.
    """
    trade = run.config
    pool = world.decoy_pools[trade.pool_size or world.config.decoy.pool_size]
    gas = world.ledger.gas_fee
    topup = gas * world.config.decoy.topup_txs
    if topup:
        for w in pool:
            _send(world, run, world.decoy_operator, w.address, topup)
    idx = world.rng.permutation(len(pool))
    pay_in, pay_out = pool[idx[0]], pool[idx[1]]
    custody = pool[idx[2]] if len(pool) > 2 else pay_in
    buyer = run.buyer_wallets[trade.buyer][0]
    run.price = world.units(trade.price)
    run.decoy = {"pool": [w.address for w in pool], "custody": custody.address,
                 "pay_in": pay_in.address, "pay_out": pay_out.address,
                 "operator": world.decoy_operator.address}
    _move_token(world, run, run.token_wallet, custody.address)
    t = world.ledger.now

    def pay():
        _send(world, run, buyer, pay_in.address, run.price)

    def settle():
        _send(world, run, pay_out, run.token_wallet.address, run.price)
        _move_token(world, run, custody, buyer.address)
        run.winner = f"buyer-{trade.buyer}"
        run.status = "completed"

    world.scheduler.at(t + trade.payment_delay, pay, trade=trade.id)
    world.scheduler.at(t + trade.payment_delay + HOUR, settle, trade=trade.id)


# -- exchange flow ----------------------------------------------------------

def run_strategy_artex(world: World, run: TradeRun) -> None:
    """Deposit, review, auction, then hand settlement to the exchange."""
    trade = run.config
    ex = world.exchange
    sched = world.scheduler
    seller = run.seller
    std = world.ledger.contract(run.contract).standard.value
    disclosure = Disclosure(
        token_contract=run.contract, token_standard=std, token_amount=trade.token_amount,
        token_id=run.token_id, token_info=f"tokenized asset, lot {len(ex.listings) + 1}",
        creator=world.issuer.address, image_url=f"https://assets.invalid/{run.contract[2:12]}.png",
    )
    listing, intake = ex.create_listing(world.login(seller), run.contract, run.token_id,
                                        trade.token_amount, disclosure)
    run.listing_id = listing.id
    _move_token(world, run, run.token_wallet, intake)
    window = world.config.exchange.auction_window
    bids = trade.bids or []

    def review():
        ex.confirm_deposit(listing.id)
        if ex.review_listing(listing.id) is not ListingState.LISTED:
            run.status = "rejected"
            return
        ex.open_auction(listing.id, window)
        opened = world.ledger.now
        if trade.bids is None:
            script = [(trade.buyer, world.units(trade.price), HOUR)]
        else:
            script = [(b.bidder, world.units(b.amount), b.at) for b in bids]
        for bidder, amount, at in script:
            sched.at(opened + at, place, bidder, amount, trade=trade.id)
        sched.at(opened + window, close, trade=trade.id)

    def place(bidder: int, amount: int):
        member = world.members_by_id[f"buyer-{bidder}"]
        try:
            ex.place_bid(world.login(member), listing.id, amount)
        except (BidTooLow, AuctionClosed) as exc:
            run.rejected_bids.append({"bidder": bidder, "amount": amount, "reason": type(exc).__name__})

    def close():
        outcome = ex.close_auction(listing.id)
        if outcome is None:
            run.status = "no_bids"
            return
        run.price = outcome.price
        run.winner = outcome.winner
        n_src, n_dst, _ = trade.shape()
        ex.notify_results(listing.id, payment_addresses=n_dst)
        buyer = world.members_by_id[outcome.winner]
        note = next(n for n in ex.drain(buyer.id) if getattr(n, "kind", None) is NotificationKind.AUCTION_WON_BUYER)
        dests = note.payload["payment_addresses"]
        sources = run.buyer_wallets[int(outcome.winner.split("-")[1])]
        n_legs = max(n_src, n_dst) * trade.buyer_installments
        amounts = split_amount(outcome.price, n_legs, world.rng) if n_legs > 1 else [outcome.price]
        offsets = installment_offsets(n_legs, trade.payment_spacing, world.config.exchange.installment_jitter,
                                      world.rng, base=trade.payment_delay)
        legs = [PaymentLeg(sources[i % n_src].address, dests[i % n_dst], amounts[i], offsets[i])
                for i in range(n_legs)]
        ex.settlement.propose_payment_plan(world.login(buyer), listing.id, legs)
        wallets = {w.address: w for w in sources}
        now = world.ledger.now
        for i, leg in enumerate(legs):
            value = leg.amount
            if i == 0:
                value += trade.overpay_by
            if i == n_legs - 1:
                value -= trade.short_by
            if value > 0:
                sched.at(now + leg.at_offset, _send, world, run, wallets[leg.source], leg.dest, value,
                         trade=trade.id)
        payout = [w.address for w in run.payout_wallets] or [run.token_wallet.address]
        ex.drain(seller.id)
        ex.settlement.request_settlement(world.login(seller), listing.id, payout,
                                         installments=trade.seller_installments, spacing=trade.payout_spacing)

    sched.at(world.ledger.now + world.config.exchange.review_delay, review, trade=trade.id)


RUNNERS = {
    "naive_p2p": run_strategy_naive_p2p,
    "frontend_hiding": run_strategy_frontend,
    "decoy": run_strategy_decoy,
    "artex": run_strategy_artex,
}


def schedule_trade(world: World, run: TradeRun) -> None:
    world.scheduler.at(run.config.start, RUNNERS[run.config.strategy], world, run, trade=run.config.id)


def final_status(world: World, run: TradeRun) -> str:
    """Outcome label for ground truth, read from the listing's transition log."""
    if run.config.strategy != "artex":
        return run.status
    if run.listing_id is None:
        return "pending"
    listing = world.exchange.listing(run.listing_id)
    visited = {dst for _, dst, _ in listing.transitions}
    if ListingState.DEFAULTED.value in visited:
        return "defaulted"
    if ListingState.REJECTED.value in visited:
        return "rejected"
    if listing.state is ListingState.RETURNED and listing.outcome is None:
        return "no_bids"
    return listing.state.value
