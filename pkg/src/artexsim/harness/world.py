"""Scenario world state and the event scheduler that drives it."""

from __future__ import annotations

import heapq
import itertools
import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from ..auction import AuctionPolicy
from ..errors import ArtexError, ConfigInvalid, InsufficientFunding, ScenarioAborted
from ..exchange import Exchange, ExchangeConfig, Wallet, WalletRole
from ..identity import MemberRegistry, Session, digest
from ..ledger import Ledger, TokenStandard
from .config import ScenarioConfig, TradeConfig

logger = logging.getLogger(__name__)

ADMIN_KEY = "kyc-admin"


@dataclass
class Member:
    id: str
    password: str
    wallets: list = field(default_factory=list)


@dataclass
class TradeRun:
    """Harness-side bookkeeping for one configured trade."""

    config: TradeConfig
    contract: str = ""
    token_id: Optional[int] = None
    seller: Optional[Member] = None
    token_wallet: Optional[Wallet] = None
    payout_wallets: list = field(default_factory=list)
    buyer_wallets: dict = field(default_factory=dict)  # bidder index -> [Wallet]
    price: Optional[int] = None
    winner: Optional[str] = None
    listing_id: Optional[str] = None
    status: str = "pending"
    txs: list = field(default_factory=list)  # hashes submitted by the harness for this trade
    rejected_bids: list = field(default_factory=list)
    decoy: dict = field(default_factory=dict)

    def record(self, tx) -> None:
        if tx is not None:
            self.txs.append(tx.hash)


class Scheduler:
    """Time-ordered callbacks interleaved with exchange wake-ups."""

    def __init__(self, ledger: Ledger, exchange: Optional[Exchange] = None, max_steps: int = 100_000):
        self.ledger = ledger
        self.exchange = exchange
        self.max_steps = max_steps
        self._heap: list = []
        self._seq = itertools.count()

    def at(self, t: int, fn: Callable, *args, trade: Optional[str] = None) -> None:
        t = max(int(t), self.ledger.now)
        heapq.heappush(self._heap, (t, next(self._seq), trade, fn, args))

    def _wakeup(self) -> Optional[int]:
        return self.exchange.next_wakeup() if self.exchange is not None else None

    def run(self) -> None:
        steps = 0
        while True:
            wake = self._wakeup()
            times = [self._heap[0][0]] if self._heap else []
            if wake is not None:
                times.append(max(wake, self.ledger.now))
            if not times:
                break
            t = min(times)
            if t > self.ledger.now:
                self.ledger.advance_time(t - self.ledger.now)
            while self._heap and self._heap[0][0] <= t:
                _, _, trade, fn, args = heapq.heappop(self._heap)
                try:
                    fn(*args)
                except ScenarioAborted:
                    raise
                except ArtexError as exc:
                    raise ScenarioAborted(trade or "-", f"{type(exc).__name__}: {exc}") from exc
            wake = self._wakeup()
            if wake is not None and wake <= t:
                try:
                    self.exchange.tick()
                except ArtexError as exc:
                    raise ScenarioAborted("-", f"{type(exc).__name__}: {exc}") from exc
            if self.ledger.pending:
                self.ledger.seal_block()
            steps += 1
            if steps > self.max_steps:
                raise ScenarioAborted("-", "scheduler did not converge")


class World:
    """Holds the ledger and exchange of one run along with every member wallet."""

    def __init__(self, config: ScenarioConfig, seed: int):
        self.config = config
        self.seed = seed
        streams = np.random.SeedSequence(seed).spawn(6)
        ledger_seed = int(streams[0].generate_state(1, dtype=np.uint64)[0])
        self.ledger = Ledger(seed=ledger_seed, gas_fee=config.gas_fee, display_scale=config.display_scale)
        self.rng = np.random.default_rng(streams[1])
        self.noise_rng = np.random.default_rng(streams[2])
        token_rng = np.random.default_rng(streams[4])
        self.members = MemberRegistry(clock=lambda: self.ledger.now, admin_key=ADMIN_KEY,
                                      token_source=lambda: token_rng.bytes(16).hex())
        ex = config.exchange
        self.exchange = Exchange(self.ledger, self.members, ExchangeConfig(
            fee_bps=config.fee_bps,
            strict_routing_fidelity=config.strict_routing_fidelity,
            deposit_timeout=ex.deposit_timeout,
            payment_timeout=ex.payment_timeout,
            settlement_cycle=ex.settlement_cycle,
            gas_dust=ex.gas_dust,
            installment_jitter=ex.installment_jitter,
            authority_key=ex.authority_key,
            auction_policy=AuctionPolicy(ex.auction_policy),
        ), rng=np.random.default_rng(streams[3]))
        self.scheduler = Scheduler(self.ledger, self.exchange)
        self.roles: dict[str, WalletRole] = {}  # private: address -> role
        self.members_by_id: dict[str, Member] = {}
        self.issuer = self._wallet(WalletRole.ISSUER, "issuer")
        self.trades: dict[str, TradeRun] = {}
        self.noise_wallets: list[Wallet] = []
        self.decoy_operator: Optional[Wallet] = None
        self.decoy_pools: dict[int, list] = {}
        self._doc_rng = np.random.default_rng(streams[5])
        self.kyc_documents: list[bytes] = []  # kept only so tests can scan for leaks

    # -- helpers ----------------------------------------------------------
    def units(self, display: float) -> int:
        return self.config.units(display)

    def _wallet(self, role: WalletRole, owner: str) -> Wallet:
        w = Wallet(self.ledger.create_account(), role, owner)
        self.roles[w.address] = role
        return w

    def member(self, member_id: str) -> Member:
        m = self.members_by_id.get(member_id)
        if m is not None:
            return m
        password = self._doc_rng.bytes(12).hex()
        self.members.register(member_id, digest(password.encode()), f"{member_id}@members.invalid")
        m = Member(member_id, password)
        self.members_by_id[member_id] = m
        session = self.login(m)
        doc = b"passport:" + self._doc_rng.bytes(16).hex().encode()
        self.kyc_documents.append(doc)
        record = self.members.submit_kyc(session, "passport", doc)
        if self.config.auto_approve_kyc:
            self.members.review_kyc(ADMIN_KEY, record, approve=True)
        return m

    def login(self, member: Member) -> Session:
        return self.members.login(member.id, digest(member.password.encode()))

    def member_wallet(self, member: Member, role: WalletRole, funding: int = 0) -> Wallet:
        w = self._wallet(role, member.id)
        member.wallets.append(w)
        self.members.claim_wallet(self.login(member), w.address)
        if funding:
            self.ledger.genesis_fund(w.address, funding)
        return w

    def wallets_of(self, member_id: str) -> list[str]:
        return [w.address for w in self.members_by_id[member_id].wallets]

    # -- setup ------------------------------------------------------------
    def setup(self) -> None:
        cfg = self.config
        funding = self.units(cfg.actors.funding)
        self.ledger.genesis_fund(self.issuer.address, funding)
        self.ledger.genesis_fund(self.exchange.treasury.address, self.units(cfg.exchange.treasury_funding))
        self.roles[self.exchange.treasury.address] = WalletRole.EXCHANGE_TREASURY
        for trade in cfg.trades:
            self._setup_trade(trade, funding)
        if cfg.exchange.blacklist_trades:
            self.exchange.config.blacklist = frozenset(
                self.trades[t].contract for t in cfg.exchange.blacklist_trades if t in self.trades)
        n = cfg.noise_trades
        if n.count:
            for _ in range(n.wallets):
                w = self._wallet(WalletRole.NOISE, "noise")
                self.ledger.genesis_fund(w.address, self.units(n.funding))
                self.noise_wallets.append(w)
        self.ledger.end_setup()
        self.ledger.seal_block()

    def _need(self, trade: TradeConfig, amount: int, wallets: int) -> None:
        if amount > 0 and self.units(self.config.actors.funding) < amount:
            raise InsufficientFunding(
                f"trade {trade.id}: funding {self.config.actors.funding} per wallet cannot cover "
                f"{amount / self.config.display_scale} over {wallets} wallet(s)")

    def _setup_trade(self, trade: TradeConfig, funding: int) -> None:
        window = self.config.exchange.auction_window
        late = [b.at for b in trade.bids or [] if b.at >= window]
        if late:
            raise ConfigInvalid(f"trade {trade.id}: bid at {late[0]}s falls outside the {window}s auction")
        run = TradeRun(trade)
        self.trades[trade.id] = run
        seller = self.member(f"seller-{trade.seller}")
        run.seller = seller
        run.token_wallet = self.member_wallet(seller, WalletRole.SELLER_TOKEN, funding)
        gas = self.config.gas_fee
        if trade.strategy == "artex":
            n_src, n_dst, n_pay = trade.shape()
            run.payout_wallets = [self.member_wallet(seller, WalletRole.SELLER_PAYOUT) for _ in range(n_pay)]
            top = max([self.units(b.amount) for b in trade.bids or []] + [self.units(trade.price or 0)])
            legs_per_wallet = -(-max(n_src, n_dst) * trade.buyer_installments // n_src)
            self._need(trade, top // n_src + trade.overpay_by + legs_per_wallet * (gas + 1), n_src)
            for bidder in trade.bidders():
                m = self.member(f"buyer-{bidder}")
                run.buyer_wallets[bidder] = [self.member_wallet(m, WalletRole.BUYER_PAYMENT, funding)
                                             for _ in range(n_src)]
        else:
            m = self.member(f"buyer-{trade.buyer}")
            self._need(trade, self.units(trade.price) + gas, 1)
            run.buyer_wallets[trade.buyer] = [self.member_wallet(m, WalletRole.BUYER_TOKEN, funding)]
        self._deploy(run)
        if trade.strategy == "decoy":
            self._setup_decoy(run)

    def _deploy(self, run: TradeRun) -> None:
        trade = run.config
        std = TokenStandard(trade.token_standard)
        holder = run.token_wallet.address
        holdings = {holder: [1]} if std.unique_ids else {holder: trade.token_amount}
        claims = {holder: self.members.identity_claim(run.seller.id)}
        agents = [self.exchange.treasury.address] if trade.strategy == "artex" else []
        contract = self.ledger.deploy_token(
            self.issuer.keys, std, holdings, metadata={"name": f"asset {len(self.trades)}"},
            trusted_agents=agents, holder_claims=claims)
        run.contract = contract.address
        run.token_id = 1 if std.unique_ids else None
        if contract.identity_registry is not None and trade.strategy != "artex":
            for bidder, wallets in run.buyer_wallets.items():
                claim = self.members.identity_claim(f"buyer-{bidder}")
                for w in wallets:
                    self.ledger.register_identity(contract.address, self.issuer.keys, w.address, claim)

    def _setup_decoy(self, run: TradeRun) -> None:
        size = run.config.pool_size or self.config.decoy.pool_size
        if self.decoy_operator is None:
            self.decoy_operator = self._wallet(WalletRole.DECOY_POOL, "decoy")
            self.ledger.genesis_fund(self.decoy_operator.address, self.units(self.config.decoy.float_funding))
        if size not in self.decoy_pools:
            pool = [self._wallet(WalletRole.DECOY_POOL, "decoy") for _ in range(size)]
            for w in pool:
                self.ledger.genesis_fund(w.address, self.units(self.config.decoy.float_funding))
            self.decoy_pools[size] = pool
        c = self.ledger.contract(run.contract)
        if c.identity_registry is not None:
            for w in self.decoy_pools[size]:
                self.ledger.register_identity(run.contract, self.issuer.keys, w.address,
                                              digest(w.address.encode(), b"decoy"))
