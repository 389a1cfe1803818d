"""Authoritative account ledger with conserved total money.

Every balance change is a transfer between two accounts, so the sum of all
balances — customer accounts plus the GENESIS and CASH system accounts — is
exactly zero at all times. Seeding moves money out of GENESIS; physical cash
crossing the counter moves through CASH. Mutations are linearized under a
single lock and journaled before they are applied, so a journal replay
reconstructs the balances exactly.

Credentials (login password, card PIN) are stored only as salted PBKDF2
digests and verified with constant-time comparison. PINs are verified against
a named customer, never used as a lookup key.
"""

from __future__ import annotations

import hashlib
import hmac
import re
import secrets
import threading
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from enum import Enum
from typing import Callable, Iterator, Optional

from .money import Money, MoneyError

GENESIS = "GENESIS"
CASH = "CASH"
SYSTEM_ACCOUNTS = (GENESIS, CASH)
SYSTEM_OWNER = "SYSTEM"

_PIN_RE = re.compile(r"^\d{4,8}$")
_DIGEST_SCHEME = "pbkdf2-sha256"


class LedgerError(Exception):
    """Base class for domain failures raised by the ledger."""


class DuplicateUsername(LedgerError):
    pass


class DuplicateAccount(LedgerError):
    pass


class InvalidPin(LedgerError):
    pass


class UnknownCustomer(LedgerError):
    pass


class AccountNotFound(LedgerError):
    pass


class InsufficientFunds(LedgerError):
    pass


class SameAccount(LedgerError):
    pass


class NoMatchingTransaction(LedgerError):
    pass


class PinAttemptsExceeded(LedgerError):
    pass


class TransactionKind(str, Enum):
    POTC = "POTC"
    A2A = "A2A"
    WITHDRAW = "Withdraw"
    DEPOSIT = "Deposit"
    SEED = "Seed"
    CANCEL = "Cancel"

    def __str__(self) -> str:
        return self.value


class AccountKind(str, Enum):
    CUSTOMER = "Customer"
    SYSTEM = "System"


class CardStatus(str, Enum):
    ACTIVE = "Active"
    BLOCKED = "Blocked"


@dataclass
class LedgerConfig:
    currency: str = "PKR"
    # PBKDF2-HMAC-SHA256 cost; tests lower this to keep mass runs fast.
    digest_iterations: int = 120_000
    # Consecutive PIN failures allowed before verify_pin refuses; None = unlimited.
    pin_attempt_limit: Optional[int] = None

    def zero(self) -> Money:
        return Money(0, self.currency)


@dataclass
class CustomerRecord:
    customer_id: str
    name: str
    phone: str
    office: str
    room: str
    email: str
    department: str
    username: str
    password_digest: str
    pin_digest: str
    account_id: str
    is_admin: bool = False


@dataclass
class Account:
    account_id: str
    owner: str
    balance: Money
    kind: AccountKind


@dataclass
class CardRecord:
    card_id: str
    card_number: str
    account_id: str
    owner_name: str
    status: CardStatus
    cached_balance: Money
    secret_key: bytes
    # Highest offline-delta sequence number the server has settled; makes
    # re-running a sync after a mid-sync crash idempotent.
    sync_watermark: int = 0


@dataclass(frozen=True)
class TransactionRecord:
    tx_id: int
    kind: TransactionKind
    from_account: str
    to_account: str
    amount: Money
    timestamp: datetime
    reversal_of: Optional[int] = None


def make_digest(secret: str, *, iterations: int) -> str:
    salt = secrets.token_bytes(16)
    dk = hashlib.pbkdf2_hmac("sha256", secret.encode("utf-8"), salt, iterations)
    return f"{_DIGEST_SCHEME}${iterations}${salt.hex()}${dk.hex()}"


def check_digest(secret: str, stored: str) -> bool:
    try:
        scheme, iter_s, salt_hex, digest_hex = stored.split("$")
        iterations = int(iter_s)
        salt = bytes.fromhex(salt_hex)
        want = bytes.fromhex(digest_hex)
    except ValueError:
        return False
    if scheme != _DIGEST_SCHEME:
        return False
    got = hashlib.pbkdf2_hmac("sha256", secret.encode("utf-8"), salt, iterations)
    return hmac.compare_digest(got, want)


def _default_clock() -> datetime:
    return datetime.now(timezone.utc)


class Ledger:
    """Linearizable in-memory ledger, journaled through an optional store.

    All mutating operations take a single re-entrant lock, so the observable
    behavior is a total order of operations. When a journal is attached, each
    record is made durable before balances change; a failed append leaves the
    ledger untouched.
    """

    def __init__(self, config: Optional[LedgerConfig] = None, journal=None,
                 clock: Optional[Callable[[], datetime]] = None) -> None:
        self.config = config or LedgerConfig()
        self._journal = journal
        self._clock = clock or _default_clock
        self._lock = threading.RLock()
        self._accounts: dict[str, Account] = {}
        self._customers: dict[str, CustomerRecord] = {}
        self._customer_by_username: dict[str, str] = {}
        self._cards: dict[str, CardRecord] = {}
        self._card_by_number: dict[str, str] = {}
        self._records: list[TransactionRecord] = []
        self._reversed_ids: set[int] = set()
        self._touched: set[str] = set()
        self._pin_failures: dict[str, int] = {}
        self._next_customer_no = 1
        self._next_card_no = 1
        # Burned whenever a username lookup misses, so login timing does not
        # reveal whether the username exists.
        self._decoy_digest = make_digest(secrets.token_hex(8),
                                         iterations=self.config.digest_iterations)
        for account_id in SYSTEM_ACCOUNTS:
            self._accounts[account_id] = Account(
                account_id, SYSTEM_OWNER, self.config.zero(), AccountKind.SYSTEM)

    # -- customers -----------------------------------------------------------

    def add_customer(self, name: str, username: str, password: str, pin: str,
                     initial_balance: Optional[Money] = None, *,
                     phone: str = "", office: str = "", room: str = "",
                     email: str = "", department: str = "",
                     account_id: Optional[str] = None,
                     is_admin: bool = False) -> tuple[str, str, str]:
        """Create customer, account, and active card atomically.

        Returns (customer_id, account_id, card_id). A positive initial
        balance is funded by a Seed transfer from GENESIS; a zero balance
        writes no record.
        """
        initial = initial_balance if initial_balance is not None else self.config.zero()
        if initial.currency != self.config.currency:
            raise MoneyError(f"currency mismatch: {initial.currency}")
        if initial.minor_units < 0:
            raise ValueError("initial_balance must be >= 0")
        if not _PIN_RE.match(pin):
            raise InvalidPin("PIN must be 4-8 digits")
        with self._lock:
            if username in self._customer_by_username:
                raise DuplicateUsername(username)
            acct_id = account_id if account_id is not None else name
            if acct_id in self._accounts:
                raise DuplicateAccount(acct_id)

            customer_id = str(self._next_customer_no)
            card_number = str(self._next_card_no)
            card_id = f"card-{card_number}"
            iterations = self.config.digest_iterations
            customer = CustomerRecord(
                customer_id=customer_id, name=name, phone=phone, office=office,
                room=room, email=email, department=department, username=username,
                password_digest=make_digest(password, iterations=iterations),
                pin_digest=make_digest(pin, iterations=iterations),
                account_id=acct_id, is_admin=is_admin)
            account = Account(acct_id, customer_id, self.config.zero(),
                              AccountKind.CUSTOMER)
            card = CardRecord(
                card_id=card_id, card_number=card_number, account_id=acct_id,
                owner_name=name, status=CardStatus.ACTIVE,
                cached_balance=self.config.zero(),
                secret_key=secrets.token_bytes(32))

            self._accounts[acct_id] = account
            self._customers[customer_id] = customer
            self._customer_by_username[username] = customer_id
            self._cards[card_id] = card
            self._card_by_number[card_number] = card_id
            self._next_customer_no += 1
            self._next_card_no += 1
            try:
                if initial.minor_units > 0:
                    self.transfer(GENESIS, acct_id, initial, TransactionKind.SEED)
            except BaseException:
                # roll the registration back so the operation stays atomic
                del self._accounts[acct_id]
                del self._customers[customer_id]
                del self._customer_by_username[username]
                del self._cards[card_id]
                del self._card_by_number[card_number]
                self._next_customer_no -= 1
                self._next_card_no -= 1
                raise
            card.cached_balance = account.balance
            return customer_id, acct_id, card_id

    def customer(self, customer_id: str) -> CustomerRecord:
        with self._lock:
            try:
                return self._customers[customer_id]
            except KeyError:
                raise UnknownCustomer(customer_id) from None

    def find_customer_by_username(self, username: str) -> Optional[CustomerRecord]:
        with self._lock:
            customer_id = self._customer_by_username.get(username)
            return self._customers[customer_id] if customer_id else None

    def customer_for_account(self, account_id: str) -> Optional[CustomerRecord]:
        with self._lock:
            account = self._accounts.get(account_id)
            if account is None or account.kind is not AccountKind.CUSTOMER:
                return None
            return self._customers.get(account.owner)

    def verify_password(self, username: str, password: str) -> Optional[CustomerRecord]:
        """Customer record on success, None otherwise (uniform for unknown
        username and wrong password)."""
        customer = self.find_customer_by_username(username)
        if customer is None:
            check_digest(password, self._decoy_digest)
            return None
        return customer if check_digest(password, customer.password_digest) else None

    def verify_pin(self, customer_id: str, pin: str) -> bool:
        with self._lock:
            customer = self.customer(customer_id)
            limit = self.config.pin_attempt_limit
            if limit is not None and self._pin_failures.get(customer_id, 0) >= limit:
                raise PinAttemptsExceeded(customer_id)
            ok = check_digest(pin, customer.pin_digest)
            if ok:
                self._pin_failures.pop(customer_id, None)
            else:
                self._pin_failures[customer_id] = self._pin_failures.get(customer_id, 0) + 1
            return ok

    # -- cards ---------------------------------------------------------------

    def card(self, card_id: str) -> CardRecord:
        with self._lock:
            try:
                return self._cards[card_id]
            except KeyError:
                raise UnknownCustomer(f"card {card_id}") from None

    def find_card(self, card_id: str) -> Optional[CardRecord]:
        with self._lock:
            return self._cards.get(card_id)

    def find_card_by_number(self, card_number: str) -> Optional[CardRecord]:
        with self._lock:
            card_id = self._card_by_number.get(card_number)
            return self._cards[card_id] if card_id else None

    def cards(self) -> list[CardRecord]:
        with self._lock:
            return list(self._cards.values())

    def customers(self) -> list[CustomerRecord]:
        with self._lock:
            return list(self._customers.values())

    # -- accounts ------------------------------------------------------------

    def verify_account(self, account_id: str) -> bool:
        with self._lock:
            return account_id in self._accounts

    def account(self, account_id: str) -> Account:
        with self._lock:
            try:
                return self._accounts[account_id]
            except KeyError:
                raise AccountNotFound(account_id) from None

    def accounts(self) -> list[Account]:
        with self._lock:
            return list(self._accounts.values())

    def balance(self, account_id: str) -> Money:
        return self.account(account_id).balance

    def check_balance(self, account_id: str, amount: Money) -> bool:
        if amount.minor_units <= 0:
            raise ValueError("amount must be positive")
        with self._lock:
            account = self.account(account_id)
            if account.kind is AccountKind.SYSTEM:
                return True
            return account.balance.minor_units >= amount.minor_units

    def total_minor_units(self) -> int:
        """Sum over every account; zero whenever the books are consistent."""
        with self._lock:
            return sum(a.balance.minor_units for a in self._accounts.values())

    # -- transfers -----------------------------------------------------------

    def transfer(self, from_account: str, to_account: str, amount: Money,
                 kind: TransactionKind,
                 timestamp: Optional[datetime] = None) -> TransactionRecord:
        if amount.currency != self.config.currency:
            raise MoneyError(f"currency mismatch: {amount.currency}")
        if amount.minor_units <= 0:
            raise ValueError("amount must be positive")
        if from_account == to_account:
            raise SameAccount(from_account)
        with self._lock:
            src = self.account(from_account)
            dst = self.account(to_account)
            if src.kind is AccountKind.CUSTOMER and src.balance.minor_units < amount.minor_units:
                raise InsufficientFunds(from_account)
            record = TransactionRecord(
                tx_id=len(self._records) + 1, kind=kind,
                from_account=from_account, to_account=to_account,
                amount=amount, timestamp=timestamp or self._clock(),
                reversal_of=None)
            self._commit(record)
            return record

    def cancel(self, originator_account: str, counterparty_account: str,
               amount: Money,
               timestamp: Optional[datetime] = None) -> TransactionRecord:
        """Compensate the most recent matching transfer originator→counterparty.

        The reversal is an ordinary transfer counterparty→originator, so it is
        refused (not forced) when the counterparty has since spent the money.
        """
        if amount.minor_units <= 0:
            raise ValueError("amount must be positive")
        with self._lock:
            match = next(
                (rec for rec in reversed(self._records)
                 if rec.tx_id not in self._reversed_ids
                 and rec.from_account == originator_account
                 and rec.to_account == counterparty_account
                 and rec.amount == amount),
                None)
            if match is None:
                raise NoMatchingTransaction(
                    f"{originator_account}->{counterparty_account} {amount.to_wire()}")
            counterparty = self.account(counterparty_account)
            if (counterparty.kind is AccountKind.CUSTOMER
                    and counterparty.balance.minor_units < amount.minor_units):
                raise InsufficientFunds(counterparty_account)
            record = TransactionRecord(
                tx_id=len(self._records) + 1, kind=TransactionKind.CANCEL,
                from_account=counterparty_account, to_account=originator_account,
                amount=amount, timestamp=timestamp or self._clock(),
                reversal_of=match.tx_id)
            self._commit(record)
            return record

    def _commit(self, record: TransactionRecord) -> None:
        """Durably journal, then apply. Journal failure aborts untouched."""
        if self._journal is not None:
            line_no = self._journal.append(record)
            if line_no != record.tx_id:
                raise RuntimeError(
                    f"journal line {line_no} out of step with tx {record.tx_id}")
        self._apply(record)

    def _apply(self, record: TransactionRecord) -> None:
        self._accounts[record.from_account].balance -= record.amount
        self._accounts[record.to_account].balance += record.amount
        self._records.append(record)
        self._touched.update((record.from_account, record.to_account))
        if record.reversal_of is not None:
            self._reversed_ids.add(record.reversal_of)

    # -- history & hashing ----------------------------------------------------

    def records(self, account_id: Optional[str] = None,
                limit: Optional[int] = None) -> list[TransactionRecord]:
        with self._lock:
            records = self._records
            if account_id is not None:
                records = [r for r in records
                           if account_id in (r.from_account, r.to_account)]
            return records[-limit:] if limit else list(records)

    @property
    def last_tx_id(self) -> int:
        with self._lock:
            return len(self._records)

    def hash_view(self) -> tuple[list[tuple[str, int]], int]:
        """Balances of journal-touched plus system accounts, sorted, and the
        last tx id — the exact input the state hash is computed over."""
        with self._lock:
            ids = self._touched | set(SYSTEM_ACCOUNTS)
            items = sorted((account_id, self._accounts[account_id].balance.minor_units)
                           for account_id in ids)
            return items, len(self._records)

    # -- restore (used by the store when reopening a persisted ledger) --------

    def restore_identity(self, customers: list[CustomerRecord],
                         accounts: list[Account],
                         cards: list[CardRecord]) -> None:
        with self._lock:
            if self._records or len(self._accounts) > len(SYSTEM_ACCOUNTS):
                raise RuntimeError("restore requires a fresh ledger")
            for account in accounts:
                self._accounts[account.account_id] = account
            for customer in customers:
                self._customers[customer.customer_id] = customer
                self._customer_by_username[customer.username] = customer.customer_id
            for card in cards:
                self._cards[card.card_id] = card
                self._card_by_number[card.card_number] = card.card_id
            numeric = [int(c.customer_id) for c in customers if c.customer_id.isdigit()]
            self._next_customer_no = max(numeric, default=0) + 1
            numbers = [int(c.card_number) for c in cards if c.card_number.isdigit()]
            self._next_card_no = max(numbers, default=0) + 1

    def attach_journal(self, journal) -> None:
        with self._lock:
            self._journal = journal

    @property
    def journal(self):
        return self._journal

    def close(self) -> None:
        """Flush and release the journal, if one is attached."""
        with self._lock:
            if self._journal is not None:
                self._journal.close()

    def apply_replayed(self, record: TransactionRecord) -> None:
        """Re-apply a journal record read back from disk (trusted path)."""
        with self._lock:
            if record.tx_id != len(self._records) + 1:
                raise RuntimeError(f"replayed tx {record.tx_id} out of order")
            # The journal can be ahead of the identity sidecar (a crash between
            # the two writes); keep the money correct with placeholder accounts.
            for account_id in (record.from_account, record.to_account):
                if account_id not in self._accounts:
                    self._accounts[account_id] = Account(
                        account_id, "", self.config.zero(), AccountKind.CUSTOMER)
            self._apply(record)
