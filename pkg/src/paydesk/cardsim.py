"""Software smart card: challenge-response, mutual authentication, offline
balance replica, and card↔server synchronization.

Both sides share a per-card 32-byte secret key. A challenge is a 16-byte
random nonce; the answer is HMAC-SHA-256 over a single direction-tag byte
(0x01 card→server, 0x02 server→card) followed by the nonce. The tag byte
makes the two directions non-interchangeable, so an eavesdropper cannot
reflect the card's own answer back at it. Nonces are single-use and expire.

The card keeps a stale balance replica and may record speculative offline
deltas; the server is authoritative and settles deltas at sync time, dropping
(and reporting) any the ledger refuses. A server-side watermark of the last
settled sequence number makes re-running a sync idempotent.
"""

from __future__ import annotations

import hmac
import json
import secrets
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Callable, Optional

from .ledger import (
    CASH,
    CardRecord,
    CardStatus,
    Ledger,
    LedgerError,
    TransactionKind,
)
from .money import Money

NONCE_BYTES = 16
TAG_CARD_TO_SERVER = b"\x01"
TAG_SERVER_TO_CARD = b"\x02"


class CardError(Exception):
    """Base class for card/auth failures."""


class CardBlocked(CardError):
    pass


class UnknownCard(CardError):
    pass


class NonceReplayed(CardError):
    pass


class NonceExpired(CardError):
    pass


class NotAuthenticated(CardError):
    pass


@dataclass
class OfflineDelta:
    sequence_no: int
    amount: Money  # signed; negative = spend, positive = deposit
    kind: TransactionKind
    recorded_at: datetime


@dataclass
class VirtualCard:
    """Card-side state, as held on the physical token (or its file stand-in)."""

    card_id: str
    card_number: str
    account_id: str
    status: CardStatus
    cached_balance: Money
    secret_key: bytes
    watermark: int = 0
    pending_deltas: list[OfflineDelta] = field(default_factory=list)


@dataclass
class CardSession:
    card_id: str
    card_authenticated: bool = False
    server_authenticated: bool = False
    pin_verified: bool = False
    created_at: datetime = field(default_factory=lambda: datetime.now(timezone.utc))
    nonce_seen: set = field(default_factory=set)

    @property
    def transaction_capable(self) -> bool:
        return self.card_authenticated and self.server_authenticated


def make_virtual_card(record: CardRecord) -> VirtualCard:
    """Cut a fresh card token from the server's card record."""
    return VirtualCard(
        card_id=record.card_id, card_number=record.card_number,
        account_id=record.account_id, status=record.status,
        cached_balance=record.cached_balance, secret_key=record.secret_key,
        watermark=record.sync_watermark)


def _tagged_mac(key: bytes, tag: bytes, nonce: bytes) -> bytes:
    if len(nonce) != NONCE_BYTES:
        raise ValueError(f"nonce must be {NONCE_BYTES} bytes, got {len(nonce)}")
    return hmac.new(key, tag + nonce, "sha256").digest()


def card_respond(card: VirtualCard, nonce: bytes) -> bytes:
    """The card's answer to a server challenge (direction tag 0x01)."""
    if card.status is not CardStatus.ACTIVE:
        raise CardBlocked(card.card_id)
    return _tagged_mac(card.secret_key, TAG_CARD_TO_SERVER, nonce)


def card_verify_server(card: VirtualCard, nonce: bytes, mac: bytes) -> bool:
    """Card-side check of the server's answer to the card's challenge
    (direction tag 0x02). A reflected card answer fails here."""
    if card.status is not CardStatus.ACTIVE:
        raise CardBlocked(card.card_id)
    want = _tagged_mac(card.secret_key, TAG_SERVER_TO_CARD, nonce)
    return hmac.compare_digest(want, mac)


class ChallengeBroker:
    """Server side of challenge-response: issues nonces, verifies answers.

    Nonces are bound to a card, single-use, and expire after a TTL. Safe for
    concurrent sessions on distinct cards; a given physical card is used by
    one session at a time.
    """

    def __init__(self, ledger: Ledger, *, ttl_seconds: int = 120,
                 clock: Optional[Callable[[], datetime]] = None,
                 rng: Optional[Callable[[int], bytes]] = None) -> None:
        self._ledger = ledger
        self._ttl = timedelta(seconds=ttl_seconds)
        self._clock = clock or (lambda: datetime.now(timezone.utc))
        self._rng = rng or secrets.token_bytes
        self._issued: dict[bytes, tuple[str, datetime]] = {}
        self._used: set[bytes] = set()

    def _card_record(self, card_id: str) -> CardRecord:
        record = self._ledger.find_card(card_id)
        if record is None:
            raise UnknownCard(card_id)
        return record

    def issue_nonce(self, card_id: str) -> bytes:
        self._card_record(card_id)
        nonce = self._rng(NONCE_BYTES)
        self._issued[nonce] = (card_id, self._clock())
        return nonce

    def verify_card(self, card_id: str, nonce: bytes, mac: bytes) -> bool:
        """True iff mac is the card's tagged answer to a live nonce we issued
        for this card. The nonce is consumed either way."""
        record = self._card_record(card_id)
        if nonce in self._used:
            raise NonceReplayed(nonce.hex())
        issued = self._issued.pop(nonce, None)
        self._used.add(nonce)
        if issued is None or issued[0] != card_id:
            raise NonceExpired("nonce was never issued for this card")
        if self._clock() - issued[1] > self._ttl:
            raise NonceExpired("nonce past its TTL")
        want = _tagged_mac(record.secret_key, TAG_CARD_TO_SERVER, nonce)
        return hmac.compare_digest(want, mac)

    def answer_card_challenge(self, card_id: str, nonce: bytes) -> bytes:
        """The server's answer to a card-issued challenge (direction tag 0x02)."""
        record = self._card_record(card_id)
        return _tagged_mac(record.secret_key, TAG_SERVER_TO_CARD, nonce)


def mutual_authenticate(card: VirtualCard, broker: ChallengeBroker, *,
                        rng: Optional[Callable[[int], bytes]] = None) -> CardSession:
    """Run both directions of challenge-response and return the session.

    Either direction failing leaves the corresponding flag false; such a
    session cannot start transactions.
    """
    if card.status is not CardStatus.ACTIVE:
        raise CardBlocked(card.card_id)
    rng = rng or secrets.token_bytes
    session = CardSession(card_id=card.card_id)

    # server challenges the card
    server_nonce = broker.issue_nonce(card.card_id)
    session.nonce_seen.add(server_nonce)
    try:
        session.card_authenticated = broker.verify_card(
            card.card_id, server_nonce, card_respond(card, server_nonce))
    except CardError:
        session.card_authenticated = False

    # card challenges the server
    card_nonce = rng(NONCE_BYTES)
    session.nonce_seen.add(card_nonce)
    try:
        answer = broker.answer_card_challenge(card.card_id, card_nonce)
        session.server_authenticated = card_verify_server(card, card_nonce, answer)
    except CardError:
        session.server_authenticated = False

    return session


def record_offline_spend(card: VirtualCard, amount: Money,
                         kind: TransactionKind = TransactionKind.WITHDRAW,
                         recorded_at: Optional[datetime] = None) -> OfflineDelta:
    """Speculatively spend against the card's replica while offline."""
    if amount.minor_units <= 0:
        raise ValueError("amount must be positive")
    last = card.pending_deltas[-1].sequence_no if card.pending_deltas else card.watermark
    delta = OfflineDelta(
        sequence_no=last + 1, amount=-amount, kind=kind,
        recorded_at=recorded_at or datetime.now(timezone.utc))
    card.pending_deltas.append(delta)
    card.cached_balance += delta.amount
    return delta


@dataclass
class SyncReport:
    card: CardRecord
    applied: list[OfflineDelta] = field(default_factory=list)
    rejected: list[tuple[OfflineDelta, str]] = field(default_factory=list)


def sync_card(session: CardSession, card: VirtualCard, ledger: Ledger, *,
              persist: Optional[Callable[[], None]] = None) -> SyncReport:
    """Settle the card's pending deltas and refresh its balance replica.

    Deltas are applied in sequence order as ordinary transfers against CASH.
    The server watermark is advanced (and persisted, when a persist hook is
    given) BEFORE each transfer, so a sync interrupted mid-way never settles
    the same sequence number twice; a delta lost to such a crash is simply
    dropped, which the authoritative recomputation of cached_balance absorbs.
    """
    if not session.transaction_capable or session.card_id != card.card_id:
        raise NotAuthenticated(card.card_id)
    record = ledger.find_card(card.card_id)
    if record is None:
        raise UnknownCard(card.card_id)

    report = SyncReport(card=record)
    for delta in sorted(card.pending_deltas, key=lambda d: d.sequence_no):
        if delta.sequence_no <= record.sync_watermark:
            continue  # already settled by an earlier (possibly crashed) sync
        record.sync_watermark = delta.sequence_no
        if persist is not None:
            persist()
        try:
            if delta.amount.minor_units < 0:
                ledger.transfer(record.account_id, CASH, -delta.amount, delta.kind,
                                timestamp=delta.recorded_at)
            else:
                ledger.transfer(CASH, record.account_id, delta.amount, delta.kind,
                                timestamp=delta.recorded_at)
        except LedgerError as exc:
            report.rejected.append((delta, _wire_error(exc)))
        else:
            report.applied.append(delta)

    card.pending_deltas.clear()
    card.watermark = record.sync_watermark
    balance = ledger.balance(record.account_id)
    record.cached_balance = balance
    card.cached_balance = balance
    if persist is not None:
        persist()
    return report


def _wire_error(exc: LedgerError) -> str:
    from .ledger import AccountNotFound, InsufficientFunds

    if isinstance(exc, InsufficientFunds):
        return "Account Has Not Enough Cash"
    if isinstance(exc, AccountNotFound):
        return "Account Not Found"
    return f"Internal: {exc}"


# -- virtual card files -------------------------------------------------------
# The file carries everything except the secret key, which lives in the
# keystore; the two are joined at load time.

def save_card_file(card: VirtualCard, path) -> None:
    obj = {
        "cardId": card.card_id,
        "cardNumber": card.card_number,
        "accountId": card.account_id,
        "status": card.status.value,
        "cachedBalanceMinor": card.cached_balance.minor_units,
        "currency": card.cached_balance.currency,
        "watermark": card.watermark,
        "pendingDeltas": [
            {
                "sequenceNo": d.sequence_no,
                "amountMinor": d.amount.minor_units,
                "kind": d.kind.value,
                "recordedAt": d.recorded_at.strftime("%Y-%m-%dT%H:%M:%SZ"),
            }
            for d in card.pending_deltas
        ],
    }
    Path(path).write_text(json.dumps(obj, indent=2) + "\n", encoding="utf-8")


def load_card_file(path, secret_key: bytes) -> VirtualCard:
    obj = json.loads(Path(path).read_text(encoding="utf-8"))
    currency = obj["currency"]
    deltas = [
        OfflineDelta(
            sequence_no=d["sequenceNo"],
            amount=Money(d["amountMinor"], currency),
            kind=TransactionKind(d["kind"]),
            recorded_at=datetime.strptime(d["recordedAt"], "%Y-%m-%dT%H:%M:%SZ")
            .replace(tzinfo=timezone.utc),
        )
        for d in obj["pendingDeltas"]
    ]
    return VirtualCard(
        card_id=obj["cardId"], card_number=obj["cardNumber"],
        account_id=obj["accountId"], status=CardStatus(obj["status"]),
        cached_balance=Money(obj["cachedBalanceMinor"], currency),
        secret_key=secret_key, watermark=obj["watermark"],
        pending_deltas=deltas)
