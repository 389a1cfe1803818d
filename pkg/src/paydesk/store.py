"""Durable persistence: append-only transaction journal plus identity sidecars.

The journal is JSON Lines, one record per line in a fixed key order, each
line carrying a CRC-32 of its own canonical bytes. Lines are flushed (and by
default fsynced) before the ledger acknowledges a mutation, so a record that
was ever acked survives a crash, and a crash before the flush leaves the file
exactly as it was. Replaying the journal — or any prefix of it — rebuilds the
balances deterministically and independently of the wall clock.

Customers, accounts, and cards live in sidecar files next to the journal
(identity.json; card secret keys separately in keystore.json); balances are
never stored there — they are always reconstructed from the journal.
"""

from __future__ import annotations

import hashlib
import json
import os
import zlib
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Iterator, Optional

from .ledger import (
    SYSTEM_ACCOUNTS,
    Account,
    AccountKind,
    CardRecord,
    CardStatus,
    CustomerRecord,
    Ledger,
    LedgerConfig,
    TransactionKind,
    TransactionRecord,
)
from .money import Money

_TS_FORMAT = "%Y-%m-%dT%H:%M:%SZ"


class StoreError(Exception):
    pass


class IoError(StoreError):
    """The journal could not be made durable; the mutation must not apply."""


class StoreNotEmpty(StoreError):
    pass


class ReplayError(StoreError):
    def __init__(self, line_no: int, message: str) -> None:
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


# -- journal line codec --------------------------------------------------------

def _record_body(record: TransactionRecord) -> dict:
    return {
        "txId": record.tx_id,
        "kind": record.kind.value,
        "from": record.from_account,
        "to": record.to_account,
        "amountMinor": record.amount.minor_units,
        "currency": record.amount.currency,
        "timestamp": record.timestamp.strftime(_TS_FORMAT),
        "reversalOf": record.reversal_of,
    }


def encode_journal_line(record: TransactionRecord) -> bytes:
    body = _record_body(record)
    crc = zlib.crc32(json.dumps(body, separators=(",", ":")).encode("utf-8"))
    body["crc32"] = crc
    return (json.dumps(body, separators=(",", ":")) + "\n").encode("utf-8")


def decode_journal_line(line: bytes, line_no: int) -> TransactionRecord:
    try:
        obj = json.loads(line.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ReplayError(line_no, f"unreadable entry: {exc}") from exc
    if not isinstance(obj, dict):
        raise ReplayError(line_no, "entry is not an object")
    try:
        claimed_crc = obj["crc32"]
        body = {key: obj[key] for key in
                ("txId", "kind", "from", "to", "amountMinor", "currency",
                 "timestamp", "reversalOf")}
    except KeyError as exc:
        raise ReplayError(line_no, f"missing field {exc}") from exc
    actual_crc = zlib.crc32(json.dumps(body, separators=(",", ":")).encode("utf-8"))
    if claimed_crc != actual_crc:
        raise ReplayError(line_no, "checksum mismatch")
    if body["txId"] != line_no:
        raise ReplayError(line_no, f"txId {body['txId']} out of order")
    try:
        return TransactionRecord(
            tx_id=body["txId"],
            kind=TransactionKind(body["kind"]),
            from_account=body["from"],
            to_account=body["to"],
            amount=Money(body["amountMinor"], body["currency"]),
            timestamp=datetime.strptime(body["timestamp"], _TS_FORMAT)
            .replace(tzinfo=timezone.utc),
            reversal_of=body["reversalOf"],
        )
    except (ValueError, TypeError) as exc:
        raise ReplayError(line_no, f"bad field value: {exc}") from exc


def read_journal(journal_path, limit: Optional[int] = None) -> Iterator[TransactionRecord]:
    """Yield verified records in order; raises ReplayError on the first bad line."""
    with open(journal_path, "rb") as fh:
        for line_no, raw in enumerate(fh, start=1):
            if limit is not None and line_no > limit:
                return
            if not raw.endswith(b"\n"):
                raise ReplayError(line_no, "unterminated line (torn write?)")
            yield decode_journal_line(raw[:-1], line_no)


class Journal:
    """Single-appender durable journal over one JSON Lines file.

    fault_hook, when set, is called with "pre-flush" before the line is
    written and "post-flush" after it is durable but before the append is
    acknowledged; a hook that raises simulates a crash at that point.
    """

    def __init__(self, path, *, fsync: bool = True,
                 fault_hook: Optional[Callable[[str], None]] = None) -> None:
        self.path = Path(path)
        self._fsync = fsync
        self.fault_hook = fault_hook
        try:
            with open(self.path, "ab") as _:
                pass
            with open(self.path, "rb") as fh:
                self._length = sum(1 for _ in fh)
            self._fh = open(self.path, "ab")
        except OSError as exc:
            raise IoError(f"cannot open journal {self.path}: {exc}") from exc

    def __len__(self) -> int:
        return self._length

    def _hook(self, stage: str) -> None:
        if self.fault_hook is not None:
            self.fault_hook(stage)

    def append(self, record: TransactionRecord) -> int:
        line = encode_journal_line(record)
        self._hook("pre-flush")
        try:
            self._fh.write(line)
            self._fh.flush()
            if self._fsync:
                os.fsync(self._fh.fileno())
        except OSError as exc:
            raise IoError(f"journal append failed: {exc}") from exc
        self._hook("post-flush")
        self._length += 1
        return self._length

    def records(self, limit: Optional[int] = None) -> Iterator[TransactionRecord]:
        self._fh.flush()
        yield from read_journal(self.path, limit)

    def close(self) -> None:
        self._fh.close()


# -- replayed balance state ------------------------------------------------------

@dataclass
class BalanceState:
    """Pure balance view rebuilt from journal records; clock-independent."""

    currency: str = "PKR"
    balances: dict[str, int] = field(default_factory=dict)
    last_tx_id: int = 0

    def __post_init__(self) -> None:
        for account_id in SYSTEM_ACCOUNTS:
            self.balances.setdefault(account_id, 0)

    def apply(self, record: TransactionRecord) -> None:
        if record.tx_id != self.last_tx_id + 1:
            raise ReplayError(record.tx_id, "record applied out of order")
        minor = record.amount.minor_units
        self.balances[record.from_account] = self.balances.get(record.from_account, 0) - minor
        self.balances[record.to_account] = self.balances.get(record.to_account, 0) + minor
        self.last_tx_id = record.tx_id

    def total_minor_units(self) -> int:
        return sum(self.balances.values())

    def hash_view(self) -> tuple[list[tuple[str, int]], int]:
        return sorted(self.balances.items()), self.last_tx_id


def replay(journal_path, limit: Optional[int] = None, *,
           currency: str = "PKR") -> BalanceState:
    """Rebuild balances from the journal (or its first `limit` lines)."""
    state = BalanceState(currency=currency)
    for record in read_journal(journal_path, limit):
        state.apply(record)
    return state


def state_hash(source) -> str:
    """SHA-256 over the sorted (account, balance) pairs plus the last tx id.

    `source` is anything exposing hash_view() — a live Ledger or a replayed
    BalanceState; equal states hash equal regardless of how they were built.
    """
    items, last_tx_id = source.hash_view()
    digest = hashlib.sha256()
    digest.update(b"paydesk-state-v1\n")
    digest.update(f"{last_tx_id}\n".encode("utf-8"))
    for account_id, minor in items:
        digest.update(f"{account_id}={minor}\n".encode("utf-8"))
    return digest.hexdigest()


# -- snapshots -------------------------------------------------------------------

def write_snapshot(path, state: BalanceState) -> None:
    obj = {
        "coveredLineNo": state.last_tx_id,
        "currency": state.currency,
        "balances": dict(sorted(state.balances.items())),
        "stateHash": state_hash(state),
    }
    _atomic_write(Path(path), json.dumps(obj, indent=2) + "\n")


def load_snapshot(path) -> BalanceState:
    obj = json.loads(Path(path).read_text(encoding="utf-8"))
    state = BalanceState(currency=obj["currency"],
                         balances=dict(obj["balances"]),
                         last_tx_id=obj["coveredLineNo"])
    if state_hash(state) != obj["stateHash"]:
        raise StoreError(f"snapshot {path} does not match its own state hash")
    return state


def replay_with_snapshot(snapshot_path, journal_path) -> BalanceState:
    """Snapshot plus journal suffix; equals a full replay of the journal."""
    state = load_snapshot(snapshot_path)
    for record in read_journal(journal_path):
        if record.tx_id <= state.last_tx_id:
            continue
        state.apply(record)
    return state


# -- the on-disk store directory --------------------------------------------------

def _atomic_write(path: Path, text: str) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


class Store:
    """A store directory: journal, identity/keystore sidecars, card files."""

    JOURNAL = "journal.jsonl"
    IDENTITY = "identity.json"
    KEYSTORE = "keystore.json"
    CARDS_DIR = "cards"

    def __init__(self, path) -> None:
        self.path = Path(path)

    @property
    def journal_path(self) -> Path:
        return self.path / self.JOURNAL

    @property
    def identity_path(self) -> Path:
        return self.path / self.IDENTITY

    @property
    def keystore_path(self) -> Path:
        return self.path / self.KEYSTORE

    @property
    def cards_dir(self) -> Path:
        return self.path / self.CARDS_DIR

    def initialize(self) -> None:
        try:
            self.path.mkdir(parents=True, exist_ok=True)
            self.cards_dir.mkdir(exist_ok=True)
        except OSError as exc:
            raise IoError(f"cannot create store at {self.path}: {exc}") from exc

    def is_empty(self) -> bool:
        journal = self.journal_path
        has_journal = journal.exists() and journal.stat().st_size > 0
        return not has_journal and not self.identity_path.exists()

    def wipe(self) -> None:
        for path in (self.journal_path, self.identity_path, self.keystore_path):
            if path.exists():
                path.unlink()
        if self.cards_dir.exists():
            for card_file in self.cards_dir.iterdir():
                card_file.unlink()

    # -- identity sidecars ----------------------------------------------------

    def save_identity(self, ledger: Ledger) -> None:
        customers = [
            {
                "customerId": c.customer_id, "name": c.name, "phone": c.phone,
                "office": c.office, "room": c.room, "email": c.email,
                "department": c.department, "username": c.username,
                "passwordDigest": c.password_digest, "pinDigest": c.pin_digest,
                "accountId": c.account_id, "isAdmin": c.is_admin,
            }
            for c in ledger.customers()
        ]
        accounts = [
            {"accountId": a.account_id, "owner": a.owner, "kind": a.kind.value}
            for a in ledger.accounts()
            if a.kind is not AccountKind.SYSTEM
        ]
        cards = [
            {
                "cardId": card.card_id, "cardNumber": card.card_number,
                "accountId": card.account_id, "ownerName": card.owner_name,
                "status": card.status.value,
                "cachedBalanceMinor": card.cached_balance.minor_units,
                "syncWatermark": card.sync_watermark,
            }
            for card in ledger.cards()
        ]
        identity = {"customers": customers, "accounts": accounts, "cards": cards}
        _atomic_write(self.identity_path, json.dumps(identity, indent=2) + "\n")
        keystore = {card.card_id: card.secret_key.hex() for card in ledger.cards()}
        _atomic_write(self.keystore_path, json.dumps(keystore, indent=2) + "\n")

    def load_keystore(self) -> dict[str, bytes]:
        if not self.keystore_path.exists():
            return {}
        raw = json.loads(self.keystore_path.read_text(encoding="utf-8"))
        return {card_id: bytes.fromhex(key_hex) for card_id, key_hex in raw.items()}

    def open_ledger(self, config: Optional[LedgerConfig] = None,
                    clock: Optional[Callable[[], datetime]] = None, *,
                    fsync: bool = True,
                    fault_hook: Optional[Callable[[str], None]] = None) -> Ledger:
        """Rebuild the ledger: identity from the sidecars, balances from the
        journal, then attach a live appender for new mutations."""
        self.initialize()
        config = config or LedgerConfig()
        ledger = Ledger(config, clock=clock)

        if self.identity_path.exists():
            identity = json.loads(self.identity_path.read_text(encoding="utf-8"))
            keystore = self.load_keystore()
            zero = config.zero()
            customers = [
                CustomerRecord(
                    customer_id=c["customerId"], name=c["name"], phone=c["phone"],
                    office=c["office"], room=c["room"], email=c["email"],
                    department=c["department"], username=c["username"],
                    password_digest=c["passwordDigest"], pin_digest=c["pinDigest"],
                    account_id=c["accountId"], is_admin=c["isAdmin"])
                for c in identity["customers"]
            ]
            accounts = [
                Account(a["accountId"], a["owner"], zero, AccountKind(a["kind"]))
                for a in identity["accounts"]
            ]
            cards = []
            for c in identity["cards"]:
                key = keystore.get(c["cardId"])
                if key is None:
                    raise StoreError(f"keystore has no key for card {c['cardId']}")
                cards.append(CardRecord(
                    card_id=c["cardId"], card_number=c["cardNumber"],
                    account_id=c["accountId"], owner_name=c["ownerName"],
                    status=CardStatus(c["status"]),
                    cached_balance=Money(c["cachedBalanceMinor"], config.currency),
                    secret_key=key, sync_watermark=c["syncWatermark"]))
            ledger.restore_identity(customers, accounts, cards)

        if self.journal_path.exists():
            for record in read_journal(self.journal_path):
                ledger.apply_replayed(record)

        ledger.attach_journal(Journal(self.journal_path, fsync=fsync,
                                      fault_hook=fault_hook))
        return ledger
