"""In-process block-lattice ledger simulator.

Each account owns its own chain of send / receive / change blocks; a send
creates a receivable on the destination that stays pending until received.
Block hashes are BLAKE2b-256 over a canonical serialization of the block
fields. They are opaque identifiers: real Nano state-block hashing is NOT
replicated, so simulator hashes never match mainnet hashes.

Blocks carry no signatures; the simulator trusts all submissions. The gate
only ever reads the ledger, so signature checking would add nothing.
"""

from __future__ import annotations

import hashlib
import math
import threading
import time
from dataclasses import dataclass, field, replace

from .codec import RawAmount, ZERO_RAW, decode_address


class LedgerError(ValueError):
    code = "ledger_error"


class UnknownAccount(LedgerError):
    code = "unknown_account"


class UnknownBlock(LedgerError):
    code = "unknown_block"


class UnknownReceivable(LedgerError):
    code = "unknown_receivable"


class AlreadyReceived(LedgerError):
    code = "already_received"


class InsufficientBalance(LedgerError):
    code = "insufficient_balance"


class ZeroAmount(LedgerError):
    code = "zero_amount"


@dataclass(frozen=True)
class SimBlock:
    hash: str
    account: str
    height: int
    kind: str  # "send" | "receive" | "change"
    previous: str | None
    balance_after: RawAmount
    representative: str
    link: str | None  # send: destination address; receive: matched send hash; change: None
    amount: RawAmount
    local_timestamp: int
    created_monotonic: float
    confirmed_override: bool | None = None


@dataclass
class _Account:
    chain: list[SimBlock] = field(default_factory=list)

    @property
    def frontier(self) -> SimBlock:
        return self.chain[-1]


def _block_hash(account, height, kind, previous, balance_after, representative, link, amount) -> str:
    canonical = "|".join([
        account, str(height), kind, previous or "-",
        str(balance_after), representative, link or "-", str(amount),
    ])
    return hashlib.blake2b(canonical.encode(), digest_size=32).hexdigest().upper()


class SimLedger:
    """Single-writer ledger: mutations serialize through one lock, queries
    take consistent snapshots under the same lock."""

    def __init__(self, confirmation_delay: float = 0.0, clock=None):
        self._lock = threading.Lock()
        self._accounts: dict[str, _Account] = {}
        self._blocks: dict[str, SimBlock] = {}
        # destination -> {send_hash: amount}
        self._receivables: dict[str, dict[str, RawAmount]] = {}
        self.confirmation_delay = confirmation_delay
        self.total_minted = ZERO_RAW
        self._clock = clock or (lambda: int(time.time()))

    # -- internal helpers (caller holds lock) --

    def _append(self, account: str, kind: str, balance_after: RawAmount,
                representative: str, link: str | None, amount: RawAmount) -> SimBlock:
        acct = self._accounts.setdefault(account, _Account())
        prev = acct.chain[-1] if acct.chain else None
        height = (prev.height + 1) if prev else 1
        h = _block_hash(account, height, kind, prev.hash if prev else None,
                        balance_after, representative, link, amount)
        block = SimBlock(
            hash=h, account=account, height=height, kind=kind,
            previous=prev.hash if prev else None, balance_after=balance_after,
            representative=representative, link=link, amount=amount,
            local_timestamp=self._clock(), created_monotonic=time.monotonic(),
        )
        acct.chain.append(block)
        self._blocks[h] = block
        return block

    def _opened(self, account: str) -> _Account:
        acct = self._accounts.get(account)
        if acct is None or not acct.chain:
            raise UnknownAccount(f"account not opened: {account}")
        return acct

    # -- mutations --

    def mint(self, account: str, amount: RawAmount) -> str:
        """Test-world genesis: open or credit an account out of thin air."""
        decode_address(account)
        if amount == ZERO_RAW:
            raise ZeroAmount("mint amount must be positive")
        with self._lock:
            self.total_minted = self.total_minted + amount
            acct = self._accounts.get(account)
            if acct and acct.chain:
                balance = acct.frontier.balance_after + amount
                rep = acct.frontier.representative
            else:
                balance, rep = amount, account
            return self._append(account, "receive", balance, rep, None, amount).hash

    def send(self, from_account: str, to_account: str, amount: RawAmount) -> str:
        decode_address(to_account)
        if amount == ZERO_RAW:
            raise ZeroAmount("send amount must be positive")
        with self._lock:
            acct = self._opened(from_account)
            frontier = acct.frontier
            if amount > frontier.balance_after:
                raise InsufficientBalance(
                    f"balance {frontier.balance_after} < send amount {amount}")
            block = self._append(from_account, "send",
                                 frontier.balance_after - amount,
                                 frontier.representative, to_account, amount)
            self._receivables.setdefault(to_account, {})[block.hash] = amount
            return block.hash

    def receive(self, account: str, send_hash: str) -> str:
        with self._lock:
            pending = self._receivables.get(account, {})
            if send_hash not in pending:
                source = self._blocks.get(send_hash)
                if source is not None and source.kind == "send" and source.link == account:
                    raise AlreadyReceived(f"send already received: {send_hash}")
                raise UnknownReceivable(f"no receivable {send_hash} for {account}")
            amount = pending.pop(send_hash)
            acct = self._accounts.get(account)
            if acct and acct.chain:
                balance = acct.frontier.balance_after + amount
                rep = acct.frontier.representative
            else:
                balance, rep = amount, account
            return self._append(account, "receive", balance, rep, send_hash, amount).hash

    def change_representative(self, account: str, new_rep: str) -> str:
        decode_address(new_rep)
        with self._lock:
            acct = self._opened(account)
            frontier = acct.frontier
            # Nano permits no-op change blocks; a block is appended even if
            # new_rep already equals the current representative.
            return self._append(account, "change", frontier.balance_after,
                                new_rep, None, ZERO_RAW).hash

    def set_confirmed(self, block_hash: str, confirmed: bool) -> None:
        with self._lock:
            block = self._blocks.get(block_hash)
            if block is None:
                raise UnknownBlock(f"unknown block: {block_hash}")
            updated = replace(block, confirmed_override=confirmed)
            self._blocks[block_hash] = updated
            chain = self._accounts[block.account].chain
            chain[block.height - 1] = updated

    # -- queries --

    def is_confirmed(self, block: SimBlock) -> bool:
        if block.confirmed_override is not None:
            return block.confirmed_override
        if math.isinf(self.confirmation_delay):
            return False
        return time.monotonic() - block.created_monotonic >= self.confirmation_delay

    def account_info(self, account: str) -> dict:
        with self._lock:
            acct = self._opened(account)
            frontier = acct.frontier
            confirmation_height = 0
            for block in acct.chain:
                if not self.is_confirmed(block):
                    break
                confirmation_height = block.height
            return {
                "frontier": frontier.hash,
                "balance": frontier.balance_after,
                "height": frontier.height,
                "representative": frontier.representative,
                "confirmation_height": confirmation_height,
            }

    def history(self, account: str, count: int, head: str | None = None) -> tuple[list[SimBlock], str | None]:
        """Newest-first page of blocks plus the hash to continue from, if any."""
        with self._lock:
            acct = self._opened(account)
            chain = acct.chain
            start = len(chain) - 1
            if head is not None:
                block = self._blocks.get(head)
                if block is None or block.account != account:
                    raise UnknownBlock(f"unknown head block: {head}")
                start = block.height - 1
            entries = [chain[i] for i in range(start, max(start - count, -1), -1)]
            older = start - count
            next_head = chain[older].hash if older >= 0 else None
            return entries, next_head

    def block_info(self, block_hash: str) -> SimBlock:
        with self._lock:
            block = self._blocks.get(block_hash)
            if block is None:
                raise UnknownBlock(f"unknown block: {block_hash}")
            return block

    def receivables(self, account: str) -> dict[str, RawAmount]:
        with self._lock:
            return dict(self._receivables.get(account, {}))

    def conservation_holds(self) -> bool:
        """total_minted equals the sum of frontier balances and pending receivables."""
        with self._lock:
            total = sum(a.frontier.balance_after.value
                        for a in self._accounts.values() if a.chain)
            total += sum(amt.value for pend in self._receivables.values()
                         for amt in pend.values())
            return total == self.total_minted.value
