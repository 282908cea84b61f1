"""Deterministic in-memory account-based ledger.

Native currency, fungible / non-fungible / ERC3643-style permissioned token
contracts, a flat per-transaction gas fee paid into a sink address, explicit
block time, and an explorer-style read-only view over sealed transactions.

Keys are opaque random bytes; "signing" is a possession check of the private
half against the public half registered for an address.
"""

from __future__ import annotations

import enum
import hashlib
import io
import json
from collections import defaultdict
from dataclasses import dataclass, field
from typing import IO, Iterable, Iterator, Mapping, Optional, Sequence, Union

import numpy as np

from .errors import (
    BadSignature,
    CalledAfterSetup,
    IdentityNotRegistered,
    InsufficientFunds,
    InsufficientGas,
    NotAuthorized,
    NotOwner,
    UnknownContract,
    WrongStandard,
)

Address = str

GENESIS_ADDRESS: Address = "0x" + "00" * 20
GAS_SINK: Address = "0x" + "00" * 18 + "dead"

DUMP_FIELDS = ("hash", "from", "to", "value", "token_op", "gas_fee", "block_height", "timestamp")


class AddressKind(str, enum.Enum):
    EXTERNALLY_OWNED = "eoa"
    CONTRACT = "contract"


class TokenStandard(str, enum.Enum):
    FUNGIBLE = "fungible"
    NON_FUNGIBLE = "non_fungible"
    RWA3643 = "rwa3643"

    @property
    def unique_ids(self) -> bool:
        return self is not TokenStandard.FUNGIBLE


def derive_public(private: bytes) -> bytes:
    return hashlib.sha256(b"artexsim/pub" + private).digest()


def derive_address(public: bytes) -> Address:
    return "0x" + hashlib.sha256(public).hexdigest()[:40]


@dataclass(frozen=True)
class KeyPair:
    private: bytes = field(repr=False)
    public: bytes
    address: Address

    @classmethod
    def from_private(cls, private: bytes) -> "KeyPair":
        public = derive_public(private)
        return cls(private=private, public=public, address=derive_address(public))


@dataclass(frozen=True)
class TokenOp:
    contract: Address
    token_id: Optional[int]
    amount: int

    def to_dict(self) -> dict:
        return {"contract": self.contract, "token_id": self.token_id, "amount": self.amount}


@dataclass(frozen=True)
class LedgerTransaction:
    hash: str
    sender: Address
    to: Address
    value: int
    token_op: Optional[TokenOp]
    gas_fee: int
    block_height: int
    timestamp: int

    @property
    def is_genesis(self) -> bool:
        return self.sender == GENESIS_ADDRESS and self.token_op is None

    @property
    def is_mint(self) -> bool:
        return self.sender == GENESIS_ADDRESS and self.token_op is not None

    def to_dict(self) -> dict:
        return {
            "hash": self.hash,
            "from": self.sender,
            "to": self.to,
            "value": self.value,
            "token_op": None if self.token_op is None else self.token_op.to_dict(),
            "gas_fee": self.gas_fee,
            "block_height": self.block_height,
            "timestamp": self.timestamp,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "LedgerTransaction":
        op = d["token_op"]
        return cls(
            hash=d["hash"],
            sender=d["from"],
            to=d["to"],
            value=int(d["value"]),
            token_op=None if op is None else TokenOp(op["contract"], op["token_id"], int(op["amount"])),
            gas_fee=int(d["gas_fee"]),
            block_height=int(d["block_height"]),
            timestamp=int(d["timestamp"]),
        )


@dataclass
class TokenContract:
    address: Address
    standard: TokenStandard
    issuer: Address
    metadata: dict = field(default_factory=dict)
    identity_registry: Optional[dict] = None
    trusted_agents: set = field(default_factory=set)
    total_supply: int = 0

    def is_registered(self, address: Address) -> bool:
        return self.identity_registry is None or address in self.identity_registry


@dataclass
class LedgerState:
    """Balances and token ownership; replayable from a transaction list."""

    balances: dict = field(default_factory=lambda: defaultdict(int))
    owners: dict = field(default_factory=dict)  # (contract, token_id) -> address
    token_balances: dict = field(default_factory=lambda: defaultdict(int))  # (contract, address) -> amount

    def apply(self, tx: LedgerTransaction) -> None:
        if tx.sender == GENESIS_ADDRESS:
            if tx.token_op is None:
                self.balances[tx.to] += tx.value
            else:
                self._credit_token(tx.token_op, tx.to)
            return
        self.balances[tx.sender] -= tx.value + tx.gas_fee
        self.balances[tx.to] += tx.value
        self.balances[GAS_SINK] += tx.gas_fee
        if tx.token_op is not None:
            op = tx.token_op
            if op.token_id is None:
                self.token_balances[(op.contract, tx.sender)] -= op.amount
            self._credit_token(op, tx.to)

    def _credit_token(self, op: TokenOp, to: Address) -> None:
        if op.token_id is None:
            self.token_balances[(op.contract, to)] += op.amount
        else:
            self.owners[(op.contract, op.token_id)] = to

    def snapshot(self) -> tuple:
        return (
            {a: b for a, b in self.balances.items() if b},
            dict(self.owners),
            {k: v for k, v in self.token_balances.items() if v},
        )

    @classmethod
    def replay(cls, txs: Iterable[LedgerTransaction]) -> "LedgerState":
        state = cls()
        for tx in txs:
            state.apply(tx)
        return state


def _tx_hash(seq: int, sender: str, to: str, value: int, op: Optional[TokenOp], gas: int,
             height: int, ts: int) -> str:
    payload = json.dumps(
        [seq, sender, to, value, None if op is None else op.to_dict(), gas, height, ts],
        separators=(",", ":"),
    )
    return "0x" + hashlib.sha256(payload.encode()).hexdigest()


class Ledger:
    """Single-writer ledger instance.

    Mutations apply to the working state immediately and are queued in the
    pending block; :meth:`seal_block` (or :meth:`advance_time`) makes them
    visible through :meth:`view`.
    """

    def __init__(self, seed: int = 0, gas_fee: int = 0, display_scale: int = 10**9):
        if gas_fee < 0:
            raise ValueError("gas_fee must be non-negative")
        self.gas_fee = int(gas_fee)
        self.display_scale = int(display_scale)
        self._rng = np.random.default_rng(np.random.SeedSequence([int(seed) & (2**64 - 1), 0x1ED6E5]))
        self._public: dict[Address, bytes] = {}
        self._kinds: dict[Address, AddressKind] = {}
        self._contracts: dict[Address, TokenContract] = {}
        self._registrations: dict[tuple, LedgerTransaction] = {}
        self._state = LedgerState()
        self._sealed_state = LedgerState()
        self._sealed: list[LedgerTransaction] = []
        self._pending: list[LedgerTransaction] = []
        self._blocks: list[tuple[int, int, tuple[str, ...]]] = []
        self._seq = 0
        self._contract_nonce = 0
        self.height = 0
        self.now = 0
        self.setup_open = True
        self.genesis_total = 0

    # -- accounts -------------------------------------------------------
    def create_account(self) -> KeyPair:
        while True:
            keys = KeyPair.from_private(self._rng.bytes(32))
            if keys.address not in self._kinds and keys.address not in (GENESIS_ADDRESS, GAS_SINK):
                break
        self._public[keys.address] = keys.public
        self._kinds[keys.address] = AddressKind.EXTERNALLY_OWNED
        return keys

    def kind_of(self, address: Address) -> Optional[AddressKind]:
        return self._kinds.get(address)

    def _check_signer(self, signer: KeyPair) -> None:
        if self._public.get(signer.address) != derive_public(signer.private):
            raise BadSignature(f"signer does not control {signer.address}")

    def _charge(self, address: Address, amount: int, gas: bool = False) -> None:
        if self._state.balances[address] < amount + self.gas_fee:
            exc = InsufficientGas if gas else InsufficientFunds
            raise exc(f"{address} cannot cover {amount} + gas {self.gas_fee}")

    # -- phases ---------------------------------------------------------
    def genesis_fund(self, address: Address, amount: int) -> LedgerTransaction:
        if not self.setup_open:
            raise CalledAfterSetup("genesis funding is only allowed during setup")
        if amount < 0:
            raise ValueError("amount must be non-negative")
        self.genesis_total += int(amount)
        return self._submit(GENESIS_ADDRESS, address, int(amount), None, gas=0)

    def end_setup(self) -> None:
        self.setup_open = False

    # -- submission -----------------------------------------------------
    def _submit(self, sender: Address, to: Address, value: int, op: Optional[TokenOp],
                gas: Optional[int] = None) -> LedgerTransaction:
        gas = self.gas_fee if gas is None else gas
        tx = LedgerTransaction(
            hash=_tx_hash(self._seq, sender, to, value, op, gas, self.height + 1, self.now),
            sender=sender,
            to=to,
            value=value,
            token_op=op,
            gas_fee=gas,
            block_height=self.height + 1,
            timestamp=self.now,
        )
        self._seq += 1
        self._state.apply(tx)
        self._pending.append(tx)
        return tx

    def deploy_token(self, issuer: KeyPair, standard: Union[TokenStandard, str],
                     initial_holdings: Mapping[Address, Union[int, Sequence[int]]],
                     metadata: Optional[Mapping] = None,
                     trusted_agents: Iterable[Address] = (),
                     holder_claims: Optional[Mapping[Address, str]] = None,
                     issuer_claim: str = "") -> TokenContract:
        """Create a token contract and mint ``initial_holdings``.

        Holdings map holder -> list of token ids (non-fungible kinds) or an
        amount (fungible). For Rwa3643 the issuer is registered automatically
        and every other initial holder needs an entry in ``holder_claims``.
        """
        standard = TokenStandard(standard)
        self._check_signer(issuer)
        self._charge(issuer.address, 0, gas=True)
        self._contract_nonce += 1
        address = "0x" + hashlib.sha256(
            b"artexsim/contract" + issuer.public + self._contract_nonce.to_bytes(8, "big")
        ).hexdigest()[:40]
        contract = TokenContract(
            address=address,
            standard=standard,
            issuer=issuer.address,
            metadata=dict(metadata or {}),
            identity_registry={} if standard is TokenStandard.RWA3643 else None,
            trusted_agents=set(trusted_agents),
        )
        self._kinds[address] = AddressKind.CONTRACT
        self._contracts[address] = contract
        self._submit(issuer.address, address, 0, None)
        if contract.identity_registry is not None:
            self.register_identity(address, issuer, issuer.address, issuer_claim or _claim_of(issuer.address))
            for holder in initial_holdings:
                if holder == issuer.address:
                    continue
                claims = holder_claims or {}
                if holder not in claims:
                    raise IdentityNotRegistered(f"initial holder {holder} has no identity claim")
                self.register_identity(address, issuer, holder, claims[holder])
        seen_ids = set()
        for holder, held in initial_holdings.items():
            if standard.unique_ids:
                for token_id in held:
                    if token_id in seen_ids:
                        raise ValueError(f"token id {token_id} minted twice")
                    seen_ids.add(token_id)
                    contract.total_supply += 1
                    self._submit(GENESIS_ADDRESS, holder, 0, TokenOp(address, int(token_id), 1), gas=0)
            else:
                contract.total_supply += int(held)
                self._submit(GENESIS_ADDRESS, holder, 0, TokenOp(address, None, int(held)), gas=0)
        return contract

    def register_identity(self, contract: Address, registrar: KeyPair, subject: Address,
                          claim_hash: str) -> LedgerTransaction:
        c = self.contract(contract)
        if c.standard is not TokenStandard.RWA3643:
            raise WrongStandard(f"{contract} has no identity registry")
        self._check_signer(registrar)
        if registrar.address != c.issuer and registrar.address not in c.trusted_agents:
            raise NotAuthorized(f"{registrar.address} may not register identities on {contract}")
        existing = self._registrations.get((contract, subject))
        if existing is not None:
            return existing
        self._charge(registrar.address, 0, gas=True)
        tx = self._submit(registrar.address, contract, 0, None)
        c.identity_registry[subject] = claim_hash
        self._registrations[(contract, subject)] = tx
        return tx

    def transfer_native(self, signer: KeyPair, to: Address, amount: int) -> LedgerTransaction:
        self._check_signer(signer)
        amount = int(amount)
        if amount < 0:
            raise ValueError("amount must be non-negative")
        self._charge(signer.address, amount)
        self._kinds.setdefault(to, AddressKind.EXTERNALLY_OWNED)
        return self._submit(signer.address, to, amount, None)

    def transfer_token(self, signer: KeyPair, contract: Address, token_id: Optional[int],
                       amount: int, to: Address) -> LedgerTransaction:
        c = self.contract(contract)
        self._check_signer(signer)
        if c.standard.unique_ids:
            if token_id is None or amount != 1:
                raise ValueError("non-fungible transfers move exactly one identified token")
            if self._state.owners.get((contract, token_id)) != signer.address:
                raise NotOwner(f"{signer.address} does not own {contract}#{token_id}")
        else:
            if token_id is not None or amount <= 0:
                raise ValueError("fungible transfers carry a positive amount and no id")
            if self._state.token_balances[(contract, signer.address)] < amount:
                raise NotOwner(f"{signer.address} holds fewer than {amount} of {contract}")
        self._charge(signer.address, 0, gas=True)
        if c.identity_registry is not None:
            for party in (signer.address, to):
                if party not in c.identity_registry:
                    raise IdentityNotRegistered(f"{party} not in identity registry of {contract}")
        self._kinds.setdefault(to, AddressKind.EXTERNALLY_OWNED)
        return self._submit(signer.address, to, 0, TokenOp(contract, token_id, int(amount)))

    # -- time -----------------------------------------------------------
    def seal_block(self) -> int:
        self.height += 1
        hashes = tuple(tx.hash for tx in self._pending)
        for tx in self._pending:
            self._sealed_state.apply(tx)
        self._sealed.extend(self._pending)
        self._pending = []
        self._blocks.append((self.height, self.now, hashes))
        return self.height

    def advance_time(self, seconds: int) -> int:
        if seconds < 0:
            raise ValueError("time only moves forward")
        if self._pending:
            self.seal_block()
        self.now += int(seconds)
        return self.height

    # -- queries --------------------------------------------------------
    def contract(self, address: Address) -> TokenContract:
        try:
            return self._contracts[address]
        except KeyError:
            raise UnknownContract(address) from None

    @property
    def contracts(self) -> dict[Address, TokenContract]:
        return dict(self._contracts)

    def balance(self, address: Address) -> int:
        return self._state.balances.get(address, 0)

    def owner_of(self, contract: Address, token_id: int) -> Optional[Address]:
        self.contract(contract)
        return self._state.owners.get((contract, token_id))

    def token_balance(self, contract: Address, address: Address) -> int:
        c = self.contract(contract)
        if c.standard.unique_ids:
            return sum(1 for (ca, _), o in self._state.owners.items() if ca == contract and o == address)
        return self._state.token_balances.get((contract, address), 0)

    @property
    def transactions(self) -> list[LedgerTransaction]:
        """Sealed transactions, oldest first."""
        return list(self._sealed)

    @property
    def pending(self) -> list[LedgerTransaction]:
        return list(self._pending)

    @property
    def blocks(self) -> list[tuple[int, int, tuple[str, ...]]]:
        return list(self._blocks)

    def state(self) -> LedgerState:
        return self._state

    def view(self) -> "PublicLedgerView":
        return PublicLedgerView(self)

    def dump(self, fp: IO[str]) -> None:
        write_dump(self._sealed, fp)

    def dumps(self) -> str:
        buf = io.StringIO()
        self.dump(buf)
        return buf.getvalue()


def _claim_of(address: Address) -> str:
    return hashlib.sha256(b"artexsim/self-claim" + address.encode()).hexdigest()


class PublicLedgerView:
    """Read-only handle over sealed transactions and sealed state."""

    def __init__(self, ledger: Ledger):
        self._ledger = ledger

    @property
    def transactions(self) -> list[LedgerTransaction]:
        return self._ledger.transactions

    def balance(self, address: Address) -> int:
        return self._ledger._sealed_state.balances.get(address, 0)

    def owner_of(self, contract: Address, token_id: int) -> Optional[Address]:
        self._ledger.contract(contract)
        return self._ledger._sealed_state.owners.get((contract, token_id))

    def token_standard(self, contract: Address) -> TokenStandard:
        return self._ledger.contract(contract).standard

    def token_metadata(self, contract: Address) -> dict:
        return dict(self._ledger.contract(contract).metadata)

    def token_issuer(self, contract: Address) -> Address:
        return self._ledger.contract(contract).issuer

    def identity_registry(self, contract: Address) -> dict:
        reg = self._ledger.contract(contract).identity_registry
        if reg is None:
            raise WrongStandard(f"{contract} has no identity registry")
        return dict(reg)

    def has_contract(self, contract: Address) -> bool:
        return contract in self._ledger._contracts

    def explorer_token_history(self, contract: Address, token_id: Optional[int] = None,
                               include_mint: bool = False) -> list[LedgerTransaction]:
        return explorer_token_history(self, contract, token_id, include_mint=include_mint)

    def explorer_address_history(self, address: Address) -> list[LedgerTransaction]:
        return explorer_address_history(self, address)

    def dumps(self) -> str:
        return self._ledger.dumps()


def explorer_token_history(view: PublicLedgerView, contract: Address, token_id: Optional[int] = None,
                           include_mint: bool = False) -> list[LedgerTransaction]:
    if not view.has_contract(contract):
        raise UnknownContract(contract)
    out = []
    for tx in view.transactions:
        op = tx.token_op
        if op is None or op.contract != contract:
            continue
        if token_id is not None and op.token_id != token_id:
            continue
        if tx.is_mint and not include_mint:
            continue
        out.append(tx)
    return out


def explorer_address_history(view: PublicLedgerView, address: Address) -> list[LedgerTransaction]:
    return [tx for tx in view.transactions if tx.sender == address or tx.to == address]


def write_dump(txs: Iterable[LedgerTransaction], fp: IO[str]) -> None:
    for tx in txs:
        fp.write(json.dumps(tx.to_dict(), separators=(",", ":")) + "\n")


def iter_dump(source: Union[str, IO[str], Iterable[str]]) -> Iterator[LedgerTransaction]:
    """Parse newline-delimited JSON from a path or from any iterable of lines."""
    if isinstance(source, str):
        with open(source, encoding="utf-8") as fh:
            yield from iter_dump(fh.readlines())
        return
    for line in source:
        line = line.strip()
        if not line:
            continue
        d = json.loads(line)
        if tuple(d) != DUMP_FIELDS:
            raise ValueError(f"dump line has fields {tuple(d)}, expected {DUMP_FIELDS}")
        yield LedgerTransaction.from_dict(d)


def load_dump(source) -> list[LedgerTransaction]:
    return list(iter_dump(source))
