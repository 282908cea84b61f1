import pytest
from hypothesis import given, strategies as st
import numpy as np

from artexsim.errors import (
    EmptyWalletSet,
    NoRecord,
    NotAuthorized,
    NotSeller,
    NotWinner,
    SumMismatch,
    UnknownDestination,
)
from artexsim.exchange import ListingState
from artexsim.ledger import KeyPair
from artexsim.settlement import PaymentLeg, SecureChannelMessage, installment_offsets, split_amount

from conftest import Desk, funded

S = ListingState


def _buyer_wallets(d, n, name="buyer", amount=10_000):
    out = []
    for _ in range(n):
        k = funded(d.ledger, amount)
        d.members.claim_wallet(d.sessions[name], k.address)
        out.append(k)
    return out


def _settle(d, price=100, k=1, src=1, split=None, payout=None, installments=1, order=None, tweak=None):
    """Sell, pay per plan, request payout, run to idle. Returns (listing, seller keys, buyer wallets, plan)."""
    listing, skeys, c = d.sold(price, k=k)
    wallets = _buyer_wallets(d, src)
    dests = [w.address for w in listing.payment_wallets]
    split = split or [price]
    legs = [PaymentLeg(wallets[i % src].address, dests[i % k], amt) for i, amt in enumerate(split)]
    plan = d.ex.settlement.propose_payment_plan(d.sessions["buyer"], listing.id, legs)
    keys = {w.address: w for w in wallets}
    for i in order or range(len(legs)):
        leg = legs[i]
        amount = leg.amount + (tweak or {}).get(i, 0)
        d.ledger.transfer_native(keys[leg.source], leg.dest, amount)
        d.ledger.seal_block()
    d.ex.settlement.request_settlement(d.sessions["seller"], listing.id, payout or [skeys.address],
                                       installments=installments, spacing=86400, jitter=0)
    d.run_until_idle()
    return listing, skeys, wallets, plan


def test_fifty_thirty_twenty_single_dest(desk):
    listing, _, _, plan = _settle(desk, split=[50, 30, 20])
    assert [l.amount for l in plan.legs] == [50, 30, 20] and len({l.dest for l in plan.legs}) == 1
    assert listing.state is S.COMPLETED


def test_ninety_ten_two_dests(desk):
    listing, _, _, plan = _settle(desk, k=3, src=2, split=[90, 10])
    assert len({l.dest for l in plan.legs}) == 2
    assert listing.state is S.COMPLETED


def test_sum_mismatch_and_gates(desk):
    listing, skeys, _ = desk.sold(100)
    dest = listing.payment_wallets[0].address
    w = _buyer_wallets(desk, 1)[0]
    with pytest.raises(SumMismatch):
        desk.ex.settlement.propose_payment_plan(desk.sessions["buyer"], listing.id, [(w.address, dest, 99)])
    with pytest.raises(UnknownDestination):
        desk.ex.settlement.propose_payment_plan(desk.sessions["buyer"], listing.id, [(w.address, w.address, 100)])
    with pytest.raises(NotWinner):
        desk.ex.settlement.propose_payment_plan(desk.sessions["seller"], listing.id, [(w.address, dest, 100)])
    with pytest.raises(NotSeller):
        desk.ex.settlement.request_settlement(desk.sessions["buyer"], listing.id, [w.address])
    with pytest.raises(EmptyWalletSet):
        desk.ex.settlement.request_settlement(desk.sessions["seller"], listing.id, [])


def test_out_of_order_payments_settle(desk):
    listing, *_ = _settle(desk, k=2, src=3, split=[40, 35, 25], order=[2, 0, 1])
    assert listing.state is S.COMPLETED


def test_short_leg_defaults_and_refunds(desk):
    listing, skeys, wallets, _ = _settle(desk, split=[60, 40], src=2, tweak={1: -1})
    states = [dst for _, dst, _ in listing.transitions]
    assert "defaulted" in states and listing.state is S.RETURNED
    assert [desk.ledger.balance(w.address) for w in wallets] == [10_000, 10_000]


def test_overpay_is_refunded_after_completion(desk):
    listing, skeys, wallets, _ = _settle(desk, tweak={0: 7})
    record = desk.ex.settlement.records[listing.id]
    assert listing.state is S.COMPLETED
    assert record.refunds[0][1:3] == (wallets[0].address, 7)
    assert record.balances()
    assert desk.ledger.balance(wallets[0].address) == 10_000 - 100


def test_three_payout_legs_sum_to_price(desk):
    d = desk
    payout = [funded(d.ledger, 0).address for _ in range(3)]
    listing, *_ = _settle(d, payout=payout)
    txs = [t for t in d.ledger.transactions if t.to in payout and t.sender == d.ex.treasury.address]
    assert len(txs) == 3 and sum(t.value for t in txs) == 100


def test_fee_bps_deducted():
    d = Desk(fee_bps=100)
    listing, skeys, *_ = _settle(d)
    record = d.ex.settlement.records[listing.id]
    assert record.paid_out == 99 and record.fee == 1 and record.balances()


def test_installments_increase_offsets(desk):
    listing, skeys = desk.sold()[:2]
    plan = desk.ex.settlement.request_settlement(desk.sessions["seller"], listing.id, [skeys.address],
                                                 installments=4, spacing=86400, jitter=0)
    assert len(plan.legs) == 4
    assert [l.at_offset for l in plan.legs] == [0, 86400, 2 * 86400, 3 * 86400]
    assert sum(l.amount for l in plan.legs) == 100


def test_strict_routing_pays_from_receiving_wallet():
    d = Desk(strict_routing_fidelity=True)
    listing, skeys, *_ = _settle(d)
    record = d.ex.settlement.records[listing.id]
    pa2 = record.payment_legs[0][1]
    assert [src for src, *_ in record.payout_legs] == [pa2]


def test_non_strict_source_disjoint_from_payment_wallets(desk):
    listing, *_ = _settle(desk, k=2, split=[70, 30])
    record = desk.ex.settlement.records[listing.id]
    assert not {s for s, *_ in record.payout_legs} & set(record.payment_wallets)


def test_fresh_wallet_delivery(desk):
    listing, _, _, _ = _settle(desk)
    record = desk.ex.settlement.records[listing.id]
    fresh = record.fresh_wallet
    history = desk.ledger.view().explorer_address_history(fresh)
    token_in = [t for t in history if t.to == fresh and t.token_op is not None]
    assert len(token_in) == 1 and history[0].hash == record.delivery_tx
    hops = [t for t in desk.ledger.transactions if t.hash in (record.deposit_tx, record.delivery_tx)]
    assert all(t.value == 0 for t in hops)


def test_delivered_key_is_usable():
    d = Desk(gas_fee=5)
    d.ledger.genesis_fund(d.ex.treasury.address, 10**9)
    listing, *_ = _settle(d)
    msg = next(m for m in d.ex.drain("buyer") if isinstance(m, SecureChannelMessage))
    keys = KeyPair.from_private(msg.private_key)
    assert keys.address == msg.wallet_address
    c = d.ledger.contract(listing.contract)
    onward = funded(d.ledger, 0)
    d.ledger.register_identity(c.address, d.issuer, onward.address, "buyer-claim")
    tx = d.ledger.transfer_token(keys, c.address, listing.token_id, 1, onward.address)
    assert tx.sender == msg.wallet_address and d.ledger.balance(keys.address) == 0


def test_key_lives_in_two_places_only(desk):
    listing, *_ = _settle(desk)
    record = desk.ex.settlement.records[listing.id]
    secret = desk.ex.wallets[record.fresh_wallet].keys.private.hex()
    msgs = [m for m in desk.ex.queues["buyer"] if isinstance(m, SecureChannelMessage)]
    assert len(msgs) == 1 and msgs[0].private_key.hex() == secret
    assert secret not in desk.ledger.dumps() and secret not in desk.ex.settlement.audit_export()
    assert secret not in repr(msgs[0])


def test_token_and_value_never_share_a_tx(desk):
    _settle(desk, k=2, src=2, split=[55, 45])
    assert not any(t.token_op is not None and t.value > 0 for t in desk.ledger.transactions)


def test_investigator_disclosure(desk):
    listing, skeys, wallets, _ = _settle(desk)
    with pytest.raises(NotAuthorized):
        desk.ex.settlement.investigator_disclosure("guess", listing.id)
    rec = desk.ex.settlement.investigator_disclosure("investigator-key", token=(listing.contract, 1))
    assert (rec.seller, rec.buyer, rec.price) == ("seller", "buyer", 100)
    seen = {a for t in desk.ledger.transactions for a in (t.sender, t.to)}
    for addr in [rec.seller_token_wallet, rec.intake_wallet, rec.fresh_wallet, *rec.payment_wallets]:
        assert addr in seen
    hashes = {t.hash for t in desk.ledger.transactions}
    assert {h for *_, h in rec.payment_legs + rec.payout_legs} <= hashes
    with pytest.raises(NoRecord):
        desk.ex.settlement.investigator_disclosure("investigator-key", token=("0x" + "9" * 40, 1))


def test_balance_equation_over_completed(desk):
    for i, tw in enumerate([{}, {0: 3}]):
        d = Desk(fee_bps=250)
        listing, *_ = _settle(d, price=1000, k=2, src=2, split=[600, 400], tweak=tw)
        r = d.ex.settlement.records[listing.id]
        assert r.paid == r.price + r.refunded and r.price == r.paid_out + r.fee


@given(st.integers(1, 10**9), st.integers(1, 12), st.integers(0, 2**32 - 1))
def test_split_amount_exact_and_positive(total, parts, seed):
    rng = np.random.default_rng(seed)
    if total < parts:
        with pytest.raises(ValueError):
            split_amount(total, parts, rng)
        return
    out = split_amount(total, parts, rng)
    assert len(out) == parts and sum(out) == total and min(out) >= 1


@given(st.integers(1, 8), st.integers(1, 10**5), st.floats(0, 0.4), st.integers(0, 2**32 - 1))
def test_offsets_stay_within_jitter(n, spacing, jitter, seed):
    offs = installment_offsets(n, spacing, jitter, np.random.default_rng(seed))
    for j, o in enumerate(offs):
        assert abs(o - j * spacing) <= jitter * spacing + 1
