from decimal import Decimal

import pytest
from hypothesis import given, settings, strategies as st

from artexsim.auction import Auction, AuctionPolicy, Bid, winning_bid
from artexsim.errors import AuctionClosed, BidTooLow, NotYetClosable, WrongState

from conftest import Desk
from oracles import all_orders, argmax_bid, ascending_winner

ETH = 10**18


def test_counter_bid_takes_the_lead():
    d = Desk()
    listing, _, _ = d.listed()
    d.ex.open_auction(listing.id, 3600)
    b1, b2 = d.member("b1"), d.member("b2")
    d.ex.place_bid(b1, listing.id, ETH)
    assert d.ex.is_leading(b1, listing.id)
    resp = d.ex.place_bid(b2, listing.id, int(Decimal("1.1") * ETH))
    assert resp.accepted and resp.leading
    assert not d.ex.is_leading(b1, listing.id)


def test_equal_amounts_earlier_keeps_lead():
    a = Auction.open("L", 0, 100)
    a.place("x", 5, 1)
    with pytest.raises(BidTooLow) as err:
        a.place("y", 5, 2)
    assert "5" not in str(err.value)
    assert a.is_leading("x")
    sealed = Auction.open("L", 0, 100, AuctionPolicy.SEALED_BID)
    sealed.place("y", 5, 3)
    sealed.place("x", 5, 2)
    assert sealed.close(100).winner == "x"


def test_bid_after_close_and_early_close():
    a = Auction.open("L", 10, 50)
    assert a.closes_at == 60
    with pytest.raises(NotYetClosable):
        a.close(59)
    with pytest.raises(AuctionClosed):
        a.place("x", 1, 60)
    assert a.close(60) is None


def test_zero_window_closable_immediately():
    a = Auction.open("L", 5, 0)
    with pytest.raises(AuctionClosed):
        a.place("x", 1, 5)
    assert a.close(5) is None


def test_open_on_draft_listing():
    d = Desk()
    s = d.member("seller")
    keys = d.ledger.create_account()
    d.members.claim_wallet(s, keys.address)
    c = d.token(keys)
    listing, _ = d.ex.create_listing(s, c.address, 1, 1, d.disclosure(c))
    with pytest.raises(WrongState):
        d.ex.open_auction(listing.id, 10)


def test_no_bids_returns_token():
    d = Desk()
    listing, keys, c = d.listed()
    d.ex.open_auction(listing.id, 10)
    d.ledger.advance_time(10)
    assert d.ex.close_auction(listing.id) is None
    d.ledger.seal_block()
    assert listing.state.value == "returned"
    assert d.ledger.owner_of(c.address, 1) == keys.address


def test_three_five_four():
    a = Auction.open("L", 0, 100, AuctionPolicy.SEALED_BID)
    for i, (who, amt) in enumerate((("a", 3), ("b", 5), ("c", 4))):
        a.place(who, amt, i)
    out = a.close(100)
    assert (out.winner, out.price) == ("b", 5)
    assert argmax_bid([(b.bidder, b.amount, b.at, b.seq) for b in a.bids])[:2] == ("b", 5)


@pytest.mark.parametrize("amounts", [(3, 5, 4), (1, 2, 3, 4, 5), (9, 2, 7, 1)])
def test_permutations_never_change_winner(amounts):
    winners = set()
    for order in all_orders(list(enumerate(amounts))):
        a = Auction.open("L", 0, 100, AuctionPolicy.SEALED_BID)
        for t, (who, amt) in enumerate(order):
            a.place(f"m{who}", amt, t)
        winners.add(a.close(100))
    assert len(winners) == 1


@settings(max_examples=80)
@given(st.lists(st.tuples(st.integers(0, 4), st.integers(1, 20)), max_size=12))
def test_ascending_winner_matches_oracle(script):
    a = Auction.open("L", 0, 100)
    accepted = []
    for t, (who, amt) in enumerate(script):
        try:
            a.place(f"m{who}", amt, t)
            accepted.append(t)
        except BidTooLow:
            pass
    want = ascending_winner([(f"m{w}", x, t, t) for t, (w, x) in enumerate(script)])
    got = a.close(100)
    assert (got is None) == (want is None)
    if got is not None:
        assert (got.winner, got.price) == want[:2]
        assert (got.winner, got.price) == argmax_bid([(b.bidder, b.amount, b.at, b.seq) for b in a.bids])[:2]


@settings(max_examples=80)
@given(st.lists(st.tuples(st.integers(1, 3), st.integers(1, 30)), min_size=1, max_size=10),
       st.integers(1, 30), st.data())
def test_hiding_transcript_depends_on_own_bids_only(others, mine, data):
    """Perturb rival amounts while keeping their order relative to ours; our transcript must not move."""
    def transcript(rivals):
        a = Auction.open("L", 0, 1000, AuctionPolicy.SEALED_BID)
        out = []
        t = 0
        for who, amt in rivals:
            a.place(f"r{who}-{t}", amt, t)
            t += 1
        out.append(a.place("me", mine, t))
        out.append(a.is_leading("me"))
        return out

    perturbed = []
    for who, amt in others:
        if amt < mine:
            new = data.draw(st.integers(1, mine - 1)) if mine > 1 else amt
        elif amt == mine:
            new = amt
        else:
            new = data.draw(st.integers(mine + 1, 60))
        perturbed.append((who, new))
    assert transcript(others) == transcript(perturbed)


def test_winning_bid_tiebreak_by_time_then_seq():
    bids = [Bid("a", 5, 3, 0), Bid("b", 5, 1, 1), Bid("c", 5, 1, 2), Bid("d", 4, 0, 3)]
    assert winning_bid(bids).bidder == "b"
    assert winning_bid([]) is None


def test_bidding_leaves_no_ledger_footprint():
    d = Desk()
    listing, _, _ = d.listed()
    d.ex.open_auction(listing.id, 3600)
    before = len(d.ledger.transactions) + len(d.ledger.pending)
    for i in range(5):
        d.ex.place_bid(d.member(f"b{i}"), listing.id, 10 + i)
    d.ledger.seal_block()
    assert len(d.ledger.transactions) == before
