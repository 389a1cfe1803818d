"""The four transaction workflows as explicit state machines.

Each run walks EnterAmount → EnterPIN → VerifyPIN → Transmit, answering every
request and recording the request/response transcript (PINs redacted). The
engine refuses to exist for a session that has not passed mutual
authentication, verifies the PIN against the card owner's record, and only
touches the ledger at the Transmit step — so a failed run leaves no trace on
the books.

Cash crossing the counter is the CASH system account; on the wire it appears
under the counter-device labels ("currency detector" when money comes in,
"Currency Detector" when it goes out).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from typing import Callable, Optional, Sequence

from .ledger import (
    CASH,
    AccountNotFound,
    InsufficientFunds,
    Ledger,
    SameAccount,
    TransactionKind,
    TransactionRecord,
)
from .money import Money, rupees
from .protocol import (
    ERROR_INSUFFICIENT,
    ERROR_NOT_FOUND,
    ERROR_VERIFICATION,
    RESULT_NOT_ACCEPTED,
    RESULT_NOT_TRANSMITTED,
    RESULT_NOT_VERIFIED,
    RESULT_OK,
    RESULT_PIN,
    RESULT_TRANSMISSION_SUCCESSFUL,
    RESULT_VERIFIED,
    Envelope,
    Method,
)

DEFAULT_DENOMINATIONS = (10, 20, 50, 100, 500, 1000, 5000)

DEPOSIT_CASH_LABEL = "currency detector"
WITHDRAW_CASH_LABEL = "Currency Detector"

PIN_PROMPT_POTC = "Please insert PIN:"
PIN_PROMPT = "Please Enter PIN:"
VERIFYING_NOTE = "Verifying PIN entry"

NOTES_KEY = "Notes"

# The EnterAmount envelope that opens a run names its workflow under this
# extras key, using the operator-menu option names.
WORKFLOW_KEY = "Workflow"
MENU_NAMES = {
    "Pay Over The Counter": TransactionKind.POTC,
    "Transaction Account To Account": TransactionKind.A2A,
    "Cash Withdrawal": TransactionKind.WITHDRAW,
    "Cash Deposit": TransactionKind.DEPOSIT,
}
MENU_NAME_FOR = {kind: name for name, kind in MENU_NAMES.items()}

_SUCCESS_RESULT = {
    TransactionKind.POTC: RESULT_OK,
    TransactionKind.A2A: RESULT_TRANSMISSION_SUCCESSFUL,
    TransactionKind.WITHDRAW: RESULT_OK,
    TransactionKind.DEPOSIT: RESULT_OK,
}


class WorkflowError(Exception):
    pass


class NotAuthorized(WorkflowError):
    """Session lacks card or server authentication; no messages are emitted."""


class UnpayableAmount(WorkflowError):
    pass


class InvalidNotes(WorkflowError):
    pass


class WorkflowStateError(WorkflowError):
    """Request method does not fit the run's current stage."""


class Stage(str, Enum):
    AWAIT_AMOUNT = "AwaitAmount"
    AWAIT_PIN = "AwaitPin"
    PIN_VERIFIED = "PinVerified"
    AWAIT_ACCOUNT = "AwaitAccount"
    DONE = "Done"
    FAILED = "Failed"


@dataclass(frozen=True)
class NoteBundle:
    notes: tuple[int, ...]

    def total(self, currency: str = "PKR") -> Money:
        return rupees(sum(self.notes), currency)

    def validate(self, denominations: Sequence[int]) -> None:
        if not self.notes:
            raise InvalidNotes("no notes presented")
        bad = [n for n in self.notes if n not in denominations]
        if bad:
            raise InvalidNotes(f"unaccepted denominations: {bad}")


def greedy_payout(amount: Money, denominations: Sequence[int] = DEFAULT_DENOMINATIONS) -> NoteBundle:
    """Largest-denomination-first note bundle summing exactly to amount."""
    if amount.minor_units <= 0:
        raise UnpayableAmount("amount must be positive")
    major, minor = divmod(amount.minor_units, 100)
    if minor:
        raise UnpayableAmount(f"{amount.to_wire()} is not a whole-rupee amount")
    notes: list[int] = []
    remaining = major
    for denom in sorted(denominations, reverse=True):
        count, remaining = divmod(remaining, denom)
        notes.extend([denom] * count)
    if remaining:
        raise UnpayableAmount(
            f"{amount.to_wire()} not payable in denominations {sorted(denominations)}")
    return NoteBundle(tuple(notes))


@dataclass
class WorkflowRun:
    kind: TransactionKind
    stage: Stage
    session_ref: object
    transcript: list[Envelope] = field(default_factory=list)
    pending_amount: Optional[Money] = None
    pending_account: Optional[str] = None
    payout: Optional[NoteBundle] = None
    notes: Optional[NoteBundle] = None
    record: Optional[TransactionRecord] = None


def _resolve_account(wire_label: str) -> str:
    """Map the counter-device wire labels onto the CASH system account."""
    return CASH if wire_label.strip().lower() == DEPOSIT_CASH_LABEL else wire_label


class TransactionWorkflow:
    """Server-side engine: feed it request envelopes, get response envelopes.

    Refuses construction unless the session passed both directions of mutual
    authentication, so an unauthenticated attempt leaves no transcript at all.
    """

    def __init__(self, kind: TransactionKind, ledger: Ledger, session, *,
                 clock: Optional[Callable[[], datetime]] = None,
                 denominations: Sequence[int] = DEFAULT_DENOMINATIONS) -> None:
        if kind not in _SUCCESS_RESULT:
            raise ValueError(f"not a transaction kind: {kind}")
        if not (getattr(session, "card_authenticated", False)
                and getattr(session, "server_authenticated", False)):
            raise NotAuthorized("session has not completed mutual authentication")
        card = ledger.find_card(session.card_id)
        if card is None:
            raise NotAuthorized(f"no card record for session {session.card_id}")
        self._ledger = ledger
        self._session = session
        self._card = card
        self._clock = clock or (lambda: datetime.now(timezone.utc))
        self._denominations = tuple(denominations)
        self.run = WorkflowRun(kind=kind, stage=Stage.AWAIT_AMOUNT, session_ref=session)

    # -- stepping --------------------------------------------------------------

    def handle(self, request: Envelope) -> Envelope:
        """Advance the run with one request; returns (and records) the response."""
        if self.run.stage in (Stage.DONE, Stage.FAILED):
            raise WorkflowStateError(f"run already {self.run.stage.value}")
        handlers = {
            (Stage.AWAIT_AMOUNT, Method.ENTER_AMOUNT): self._on_enter_amount,
            (Stage.AWAIT_PIN, Method.ENTER_PIN): self._on_enter_pin,
            (Stage.AWAIT_PIN, Method.VERIFY_PIN): self._on_verify_pin,
            (Stage.PIN_VERIFIED, Method.TRANSMIT): self._on_transmit,
        }
        handler = handlers.get((self.run.stage, request.method))
        if handler is None:
            raise WorkflowStateError(
                f"{request.method.value} not valid in stage {self.run.stage.value}")
        self.run.transcript.append(request.redacted())
        response = handler(request)
        self.run.transcript.append(response)
        return response

    def _respond(self, request: Envelope, *, result: str, error: Optional[str] = None,
                 echo_accounts: bool = True, echo_amount: bool = True) -> Envelope:
        return Envelope(
            method=request.method,
            result=result,
            error=error,
            to_account=request.to_account if echo_accounts else None,
            from_account=request.from_account if echo_accounts else None,
            amount=request.amount if echo_amount else None,
            timestamp=self._clock(),
        )

    def _fail(self, request: Envelope, result: str, error: str) -> Envelope:
        self.run.stage = Stage.FAILED
        return self._respond(request, result=result, error=error)

    def _on_enter_amount(self, request: Envelope) -> Envelope:
        kind = self.run.kind
        if request.amount is None or request.amount.minor_units <= 0:
            return self._fail(request, RESULT_NOT_ACCEPTED, "Internal: missing or bad amount")
        amount = request.amount

        if kind is TransactionKind.DEPOSIT:
            try:
                bundle = _parse_notes(request.extras.get(NOTES_KEY, ""))
                bundle.validate(self._denominations)
            except InvalidNotes as exc:
                return self._fail(request, RESULT_NOT_ACCEPTED, f"Internal: {exc}")
            if bundle.total(amount.currency) != amount:
                return self._fail(request, RESULT_NOT_ACCEPTED,
                                  "Internal: notes do not sum to the stated amount")
            self.run.notes = bundle
            self.run.pending_account = request.to_account
        elif kind is TransactionKind.WITHDRAW:
            try:
                self.run.payout = greedy_payout(amount, self._denominations)
            except UnpayableAmount as exc:
                return self._fail(request, RESULT_NOT_ACCEPTED, f"Internal: {exc}")
            self.run.pending_account = request.to_account
        else:
            if not request.to_account:
                return self._fail(request, RESULT_NOT_ACCEPTED, "Internal: missing recipient")
            self.run.pending_account = request.to_account

        self.run.pending_amount = amount
        self.run.stage = Stage.AWAIT_PIN
        return self._respond(request, result=RESULT_OK, error=None)

    def _on_enter_pin(self, request: Envelope) -> Envelope:
        # Prompt acknowledgement; the PIN itself arrives with VerifyPIN.
        return self._respond(request, result=RESULT_PIN, echo_accounts=False,
                             echo_amount=False)

    def _on_verify_pin(self, request: Envelope) -> Envelope:
        customer = self._ledger.customer_for_account(self._card.account_id)
        pin = request.pin or ""
        if customer is not None and self._ledger.verify_pin(customer.customer_id, pin):
            self._session.pin_verified = True
            self.run.stage = Stage.PIN_VERIFIED
            return self._respond(request, result=RESULT_VERIFIED,
                                 echo_accounts=False, echo_amount=False)
        self.run.stage = Stage.FAILED
        return self._respond(request, result=RESULT_NOT_VERIFIED,
                             error=ERROR_VERIFICATION,
                             echo_accounts=False, echo_amount=False)

    def _on_transmit(self, request: Envelope) -> Envelope:
        kind = self.run.kind
        amount = self.run.pending_amount
        assert amount is not None  # guaranteed by the stage machine
        if kind is TransactionKind.DEPOSIT:
            src, dst = CASH, _resolve_account(self.run.pending_account or "")
        elif kind is TransactionKind.WITHDRAW:
            src, dst = self._card.account_id, CASH
        else:
            src, dst = self._card.account_id, _resolve_account(self.run.pending_account or "")
        try:
            self.run.record = self._ledger.transfer(src, dst, amount, kind)
        except AccountNotFound:
            return self._fail(request, RESULT_NOT_TRANSMITTED, ERROR_NOT_FOUND)
        except InsufficientFunds:
            return self._fail(request, RESULT_NOT_TRANSMITTED, ERROR_INSUFFICIENT)
        except SameAccount:
            return self._fail(request, RESULT_NOT_TRANSMITTED,
                              "Internal: transfer to the same account")
        self.run.stage = Stage.DONE
        return self._respond(request, result=_SUCCESS_RESULT[kind])


def _parse_notes(text: str) -> NoteBundle:
    if not text.strip():
        raise InvalidNotes("no notes presented")
    try:
        values = tuple(int(part) for part in text.split(",") if part.strip())
    except ValueError:
        raise InvalidNotes(f"unreadable note list: {text!r}") from None
    return NoteBundle(values)


# -- request builders (shared by the scripted drivers and the RPC client) -----

def build_enter_amount(kind: TransactionKind, to_label: str, from_label: str,
                       amount: Money, *, notes: Optional[NoteBundle] = None,
                       timestamp: Optional[datetime] = None) -> Envelope:
    extras = {NOTES_KEY: ",".join(str(n) for n in notes.notes)} if notes else {}
    return Envelope(method=Method.ENTER_AMOUNT, to_account=to_label,
                    from_account=from_label, amount=amount,
                    timestamp=timestamp or datetime.now(timezone.utc), extras=extras)


def build_enter_pin(kind: TransactionKind, *,
                    timestamp: Optional[datetime] = None) -> Envelope:
    prompt = PIN_PROMPT_POTC if kind is TransactionKind.POTC else PIN_PROMPT
    return Envelope(method=Method.ENTER_PIN, free_text=prompt,
                    timestamp=timestamp or datetime.now(timezone.utc))


def build_verify_pin(kind: TransactionKind, pin: str, *,
                     timestamp: Optional[datetime] = None) -> Envelope:
    note = None if kind is TransactionKind.POTC else VERIFYING_NOTE
    return Envelope(method=Method.VERIFY_PIN, pin=pin, free_text=note,
                    timestamp=timestamp or datetime.now(timezone.utc))


def build_transmit(kind: TransactionKind, to_label: str, from_label: str,
                   amount: Money, *,
                   timestamp: Optional[datetime] = None) -> Envelope:
    return Envelope(method=Method.TRANSMIT, to_account=to_label,
                    from_account=from_label, amount=amount,
                    timestamp=timestamp or datetime.now(timezone.utc))


def _drive(engine: TransactionWorkflow, requests: list[Envelope]) -> WorkflowRun:
    for request in requests:
        engine.handle(request)
        if engine.run.stage is Stage.FAILED:
            break
    return engine.run


def run_pay_over_counter(ledger: Ledger, session, amount: Money, pin: str,
                         recipient_account: str, *,
                         clock: Optional[Callable[[], datetime]] = None,
                         denominations: Sequence[int] = DEFAULT_DENOMINATIONS) -> WorkflowRun:
    kind = TransactionKind.POTC
    engine = TransactionWorkflow(kind, ledger, session, clock=clock,
                                 denominations=denominations)
    sender = engine._card.account_id
    ts = engine._clock
    return _drive(engine, [
        build_enter_amount(kind, recipient_account, sender, amount, timestamp=ts()),
        build_enter_pin(kind, timestamp=ts()),
        build_verify_pin(kind, pin, timestamp=ts()),
        build_transmit(kind, recipient_account, sender, amount, timestamp=ts()),
    ])


def run_account_to_account(ledger: Ledger, session, amount: Money, pin: str,
                           recipient_account: str, *,
                           clock: Optional[Callable[[], datetime]] = None,
                           denominations: Sequence[int] = DEFAULT_DENOMINATIONS) -> WorkflowRun:
    kind = TransactionKind.A2A
    engine = TransactionWorkflow(kind, ledger, session, clock=clock,
                                 denominations=denominations)
    sender = engine._card.account_id
    ts = engine._clock
    return _drive(engine, [
        build_enter_amount(kind, recipient_account, sender, amount, timestamp=ts()),
        build_enter_pin(kind, timestamp=ts()),
        build_verify_pin(kind, pin, timestamp=ts()),
        build_transmit(kind, recipient_account, sender, amount, timestamp=ts()),
    ])


def run_cash_withdrawal(ledger: Ledger, session, amount: Money, pin: str, *,
                        clock: Optional[Callable[[], datetime]] = None,
                        denominations: Sequence[int] = DEFAULT_DENOMINATIONS) -> WorkflowRun:
    kind = TransactionKind.WITHDRAW
    engine = TransactionWorkflow(kind, ledger, session, clock=clock,
                                 denominations=denominations)
    holder = engine._card.account_id
    ts = engine._clock
    return _drive(engine, [
        build_enter_amount(kind, WITHDRAW_CASH_LABEL, holder, amount, timestamp=ts()),
        build_enter_pin(kind, timestamp=ts()),
        build_verify_pin(kind, pin, timestamp=ts()),
        build_transmit(kind, WITHDRAW_CASH_LABEL, holder, amount, timestamp=ts()),
    ])


def run_cash_deposit(ledger: Ledger, session, notes: NoteBundle, pin: str,
                     target_account: str, *,
                     clock: Optional[Callable[[], datetime]] = None,
                     denominations: Sequence[int] = DEFAULT_DENOMINATIONS) -> WorkflowRun:
    kind = TransactionKind.DEPOSIT
    engine = TransactionWorkflow(kind, ledger, session, clock=clock,
                                 denominations=denominations)
    ts = engine._clock
    currency = ledger.config.currency
    amount = notes.total(currency) if notes.notes else Money(0, currency)
    return _drive(engine, [
        build_enter_amount(kind, target_account, DEPOSIT_CASH_LABEL, amount,
                           notes=notes, timestamp=ts()),
        build_enter_pin(kind, timestamp=ts()),
        build_verify_pin(kind, pin, timestamp=ts()),
        build_transmit(kind, target_account, DEPOSIT_CASH_LABEL, amount, timestamp=ts()),
    ])
