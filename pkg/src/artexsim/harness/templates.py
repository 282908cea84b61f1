"""Independent pattern-template checker.

Works only from the public dump plus one ground-truth entry and never looks
at harness or exchange objects, so it can serve as an oracle for whether a
strategy emitted the transaction shape it promises.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping

from ..ledger import GENESIS_ADDRESS, LedgerTransaction


@dataclass
class Verdict:
    ok: bool = True
    problems: list = field(default_factory=list)

    def require(self, cond: bool, message: str) -> None:
        if not cond:
            self.ok = False
            self.problems.append(message)


def _as_txs(txs: Iterable) -> list[LedgerTransaction]:
    return [tx if isinstance(tx, LedgerTransaction) else LedgerTransaction.from_dict(tx) for tx in txs]


def _hops(txs, truth) -> list[LedgerTransaction]:
    tok = truth["token"]
    return [tx for tx in txs if tx.token_op is not None and not tx.is_mint
            and tx.token_op.contract == tok["contract"] and tx.token_op.token_id == tok["token_id"]]


def _native(txs, start) -> list[LedgerTransaction]:
    return [tx for tx in txs if tx.token_op is None and tx.value > 0
            and tx.sender != GENESIS_ADDRESS and tx.timestamp >= start]


def check_trade(txs: Iterable, truth: Mapping) -> Verdict:
    txs = _as_txs(txs)
    strategy = truth["strategy"]
    if strategy in ("naive_p2p", "frontend_hiding"):
        return _check_direct(txs, truth)
    if strategy == "decoy":
        return _check_decoy(txs, truth)
    if strategy == "artex":
        return _check_artex(txs, truth)
    v = Verdict()
    v.require(False, f"unknown strategy {strategy}")
    return v


def _touching(txs, addrs, start):
    return [tx for tx in txs if tx.sender != GENESIS_ADDRESS and tx.timestamp >= start
            and (tx.sender in addrs or tx.to in addrs)]


def _check_direct(txs, truth) -> Verdict:
    v = Verdict()
    sellers, buyers = set(truth["parties"]["seller"]), set(truth["parties"]["buyer"])
    mine = _touching(txs, sellers | buyers, truth["start"])
    v.require(len(mine) == 2, f"expected 2 trade txs, found {len(mine)}")
    hops = _hops(txs, truth)
    v.require(len(hops) == 1 and hops[0].sender in sellers and hops[0].to in buyers, "token must go seller -> buyer")
    pays = [tx for tx in mine if tx.token_op is None]
    v.require(len(pays) == 1 and pays[0].sender in buyers and pays[0].to in sellers
              and pays[0].value == truth["price"], "buyer must pay the seller the price directly")
    return v


def _check_decoy(txs, truth) -> Verdict:
    v = Verdict()
    sellers, buyers = set(truth["parties"]["seller"]), set(truth["parties"]["buyer"])
    parties = sellers | buyers
    pool = set(truth["decoy"]["pool"])
    hops = _hops(txs, truth)
    v.require(len(hops) == 2, f"expected 2 token hops, found {len(hops)}")
    if len(hops) == 2:
        v.require(hops[0].sender in sellers and hops[1].to in buyers, "token must run seller -> custody -> buyer")
        v.require(hops[0].to == hops[1].sender and hops[0].to in pool, "custody must be a pool account")
    mine = _native(txs, truth["start"])
    pay_in = [tx for tx in mine if tx.sender in buyers]
    pay_out = [tx for tx in mine if tx.to in sellers]
    v.require(len(pay_in) == 1 and pay_in[0].to in pool and pay_in[0].value == truth["price"],
              "buyer must pay one pool account the price")
    v.require(len(pay_out) == 1 and pay_out[0].sender in pool and pay_out[0].value == truth["price"],
              "seller must be paid the price by one pool account")
    if pay_in and pay_out:
        v.require(pay_in[0].to != pay_out[0].sender, "payment in and out must use different pool accounts")
    v.require(not any(tx.sender in parties and tx.to in parties for tx in txs),
              "buyer and seller must never share a transaction")
    topped = {tx.to for tx in mine if tx.sender == truth["decoy"]["operator"]}
    if truth.get("gas_fee", 0) > 0:
        v.require(pool <= topped, "every pool account must receive gas")
    return v


def _check_artex(txs, truth) -> Verdict:
    v = Verdict()
    s = truth.get("settlement") or {}
    sellers, buyers = set(truth["parties"]["seller"]), set(truth["parties"]["buyer"])
    t_sell = truth["parties"]["seller_token_wallet"]
    v.require(not any(tx.sender in sellers | buyers and tx.to in sellers | buyers for tx in txs),
              "buyer and seller must never share a transaction")
    hops = _hops(txs, truth)
    status = truth["status"]
    if status != "completed":
        if status in ("returned", "no_bids", "rejected", "defaulted"):
            v.require(len(hops) == 2 and hops[0].sender == t_sell and hops[1].to == t_sell
                      and hops[0].to == hops[1].sender, "returned token must go back to the seller's wallet")
        return v

    intake, fresh = s.get("intake_wallet"), s.get("fresh_wallet")
    v.require(len(hops) == 2, f"expected 2 token hops, found {len(hops)}")
    if len(hops) == 2:
        v.require((hops[0].sender, hops[0].to) == (t_sell, intake), "first hop must be seller -> intake wallet")
        v.require((hops[1].sender, hops[1].to) == (intake, fresh), "second hop must be intake -> fresh wallet")
        v.require(all(h.value == 0 for h in hops), "token hops carry no value")
        first = next(tx for tx in txs if fresh in (tx.sender, tx.to))
        v.require(first.hash == hops[1].hash, "fresh wallet must have no history before delivery")

    pattern = truth["pattern"]
    start = truth["start"]
    native = _native(txs, start)
    pay_wallets = set(s.get("payment_wallets", []))
    payments = [tx for tx in native if tx.sender in buyers]
    refunds = [tx for tx in native if tx.to in buyers and tx.sender in pay_wallets]
    v.require(all(tx.to in pay_wallets for tx in payments), "payments must go to the exchange payment wallets")
    v.require(sum(tx.value for tx in payments) - sum(tx.value for tx in refunds) == truth["price"],
              "payments net of refunds must equal the price")
    sources = {tx.sender for tx in payments}
    dests = {tx.to for tx in payments}
    if pattern in (1, 2):
        v.require(len(payments) == 1, "pattern pays once from a single wallet")
    else:
        v.require(len(sources) >= 2, "pattern splits the payment across buyer wallets")
    if pattern == 6:
        v.require(len(dests) >= 2, "pattern 6 pays into several exchange wallets")
    else:
        v.require(len(dests) == 1, "payment goes to a single exchange wallet")

    payouts = [tx for tx in native if tx.to in sellers]
    out_dests = {tx.to for tx in payouts}
    v.require(sum(tx.value for tx in payouts) == truth["price"] - s.get("fee", 0),
              "payouts must equal the price less the fee")
    if pattern in (1, 3):
        v.require(out_dests == {t_sell}, "payout goes back to the token wallet")
    elif pattern in (2, 4):
        v.require(len(out_dests) == 1 and t_sell not in out_dests, "payout goes to one other seller wallet")
    else:
        v.require(len(out_dests) >= 2 and t_sell not in out_dests, "payout is split across seller wallets")
    out_sources = {tx.sender for tx in payouts}
    if truth.get("strict"):
        v.require(out_sources <= pay_wallets, "strict routing pays out from the receiving wallets")
    else:
        v.require(not out_sources & (pay_wallets | buyers), "payouts must not come from payment wallets")
    return v
