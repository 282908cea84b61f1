"""Public view built from a ledger dump and nothing else."""

from __future__ import annotations

from collections import defaultdict
from typing import Iterable, Optional

from ..ledger import GENESIS_ADDRESS, LedgerTransaction, load_dump


class PublicView:
    """Indexed, read-only transaction list in ledger order."""

    def __init__(self, transactions: Iterable[LedgerTransaction]):
        self.transactions: list[LedgerTransaction] = list(transactions)
        self.index = {tx.hash: i for i, tx in enumerate(self.transactions)}
        self._touching: dict[str, list[int]] = defaultdict(list)
        self._native_in: dict[str, list[int]] = defaultdict(list)
        self._native_out: dict[str, list[int]] = defaultdict(list)
        self._token: dict[tuple, list[int]] = defaultdict(list)
        for i, tx in enumerate(self.transactions):
            self._touching[tx.sender].append(i)
            if tx.to != tx.sender:
                self._touching[tx.to].append(i)
            if tx.token_op is None:
                if tx.value > 0:
                    self._native_in[tx.to].append(i)
                    self._native_out[tx.sender].append(i)
            else:
                self._token[(tx.token_op.contract, tx.token_op.token_id)].append(i)

    @classmethod
    def from_dump(cls, source) -> "PublicView":
        return cls(load_dump(source))

    def __len__(self) -> int:
        return len(self.transactions)

    def tx(self, i: int) -> LedgerTransaction:
        return self.transactions[i]

    def tokens(self) -> list[tuple]:
        """Token references that moved after minting, in first-transfer order."""
        out = []
        for key, idx in self._token.items():
            if any(not self.transactions[i].is_mint for i in idx):
                out.append((key, min(i for i in idx if not self.transactions[i].is_mint)))
        return [k for k, _ in sorted(out, key=lambda kv: kv[1])]

    def token_txs(self, contract: str, token_id: Optional[int]) -> list[LedgerTransaction]:
        return [self.transactions[i] for i in self._token.get((contract, token_id), [])]

    def history(self, address: str) -> list[LedgerTransaction]:
        return [self.transactions[i] for i in self._touching.get(address, [])]

    def native_in(self, address: str) -> list[LedgerTransaction]:
        return [self.transactions[i] for i in self._native_in.get(address, [])]

    def native_out(self, address: str) -> list[LedgerTransaction]:
        return [self.transactions[i] for i in self._native_out.get(address, [])]

    def native_transfers(self) -> list[LedgerTransaction]:
        """Value-carrying native transfers between accounts (genesis excluded)."""
        return [tx for tx in self.transactions
                if tx.token_op is None and tx.value > 0 and tx.sender != GENESIS_ADDRESS]

    def first_index(self, address: str) -> Optional[int]:
        idx = self._touching.get(address)
        return idx[0] if idx else None

    def had_history_before(self, address: str, tx: LedgerTransaction) -> bool:
        first = self.first_index(address)
        return first is not None and first < self.index[tx.hash]

    def born_fresh(self, address: str) -> bool:
        """The address first appears as the receiver of a non-genesis transfer."""
        first = self.first_index(address)
        if first is None:
            return False
        tx = self.transactions[first]
        return tx.to == address and tx.sender != GENESIS_ADDRESS
