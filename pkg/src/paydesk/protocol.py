"""Wire codec for the PoS message family.

Emit is strict and canonical: capitalized spaced keys, pretty-printed JSON,
fixed key order, legacy "Time"/"Date" fields plus an authoritative RFC 3339
"Timestamp". Decode is lenient: it repairs missing/trailing commas and
word-processor quotes, accepts the historical key and method aliases, strips
currency prefixes from amounts, and keeps unknown keys as extras instead of
failing.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from enum import Enum
from typing import Iterable, Optional

from .money import Money, MoneyError, parse_wire_amount

EPOCH = datetime(1970, 1, 1, tzinfo=timezone.utc)

REDACTED = "****"

# Error strings the system is allowed to put on the wire, besides
# "Internal: ..."-prefixed plumbing errors.
ERROR_NULL = "null"
ERROR_VERIFICATION = "Verification Unsuccessful"
ERROR_NOT_FOUND = "Account Not Found"
ERROR_INSUFFICIENT = "Account Has Not Enough Cash"
WIRE_ERRORS = {ERROR_VERIFICATION, ERROR_NOT_FOUND, ERROR_INSUFFICIENT, ERROR_NULL}

RESULT_OK = "OK"
RESULT_TRANSMISSION_SUCCESSFUL = "Transmission Successful"
RESULT_PIN = "PIN"
RESULT_VERIFIED = "Verified"
RESULT_NOT_VERIFIED = "NotVerified"
RESULT_NOT_TRANSMITTED = "NotTransmitted"
RESULT_NOT_ACCEPTED = "NotAccepted"


class Method(str, Enum):
    ENTER_AMOUNT = "EnterAmount"
    ENTER_PIN = "EnterPIN"
    VERIFY_PIN = "VerifyPIN"
    TRANSMIT = "Transmit"
    CANCEL_TRANSACTION = "CancelTransaction"
    ADD_CUSTOMER = "AddCustomer"
    VERIFY_ACCOUNT = "VerifyAccount"
    LOGIN = "Login"

    def __str__(self) -> str:
        return self.value


# Historical method-name aliases seen on the wire.
_METHOD_ALIASES = {"Amount": Method.ENTER_AMOUNT}


class ProtocolError(Exception):
    """Base for wire-level decode failures."""


class MissingMethod(ProtocolError):
    pass


class UnknownMethod(ProtocolError):
    pass


class BadAmount(ProtocolError):
    pass


class SyntaxProblem(ProtocolError):
    pass


@dataclass
class Envelope:
    """One wire message. ``result`` set means it is a response."""

    method: Method
    to_account: Optional[str] = None
    from_account: Optional[str] = None
    amount: Optional[Money] = None
    pin: Optional[str] = None
    result: Optional[str] = None
    error: Optional[str] = None
    timestamp: datetime = EPOCH
    free_text: Optional[str] = None
    extras: dict[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        ts = self.timestamp
        if ts.tzinfo is None:
            ts = ts.replace(tzinfo=timezone.utc)
        self.timestamp = ts.astimezone(timezone.utc).replace(microsecond=0)

    @property
    def is_response(self) -> bool:
        return self.result is not None

    def redacted(self) -> "Envelope":
        """Copy safe for logs: the PIN and any secret-bearing extras masked."""
        extras = {
            k: (REDACTED if _is_secret_key(k) else v) for k, v in self.extras.items()
        }
        return replace(
            self, pin=REDACTED if self.pin is not None else None, extras=extras
        )

    def __repr__(self) -> str:  # diagnostics must never leak the PIN
        shown = self.redacted()
        fields = [f"method={shown.method.value}"]
        for name in ("to_account", "from_account", "amount", "pin", "result", "error", "free_text"):
            value = getattr(shown, name)
            if value is not None:
                fields.append(f"{name}={value!r}")
        fields.append(f"timestamp={shown.timestamp.isoformat()}")
        if shown.extras:
            fields.append(f"extras={shown.extras!r}")
        return f"Envelope({', '.join(fields)})"


def _is_secret_key(key: str) -> bool:
    low = key.lower()
    return "pin" in low or "password" in low or "token" in low


def _render_time(ts: datetime) -> str:
    return f"{ts:%H%M} hours"


def _render_date(ts: datetime) -> str:
    return f"{ts.day}-{ts.month}-{ts.year}"


def _render_timestamp(ts: datetime) -> str:
    return ts.strftime("%Y-%m-%dT%H:%M:%SZ")


def encode(envelope: Envelope) -> str:
    """Canonical wire text. Total on valid envelopes; round-trips via decode."""
    obj: dict[str, str] = {"Method": envelope.method.value}
    if envelope.result is not None:
        obj["Result"] = envelope.result
    if envelope.free_text is not None:
        obj["Message"] = envelope.free_text
    if envelope.to_account is not None:
        obj["To Account"] = envelope.to_account
    if envelope.from_account is not None:
        obj["From Account"] = envelope.from_account
    if envelope.amount is not None:
        obj["Amount"] = envelope.amount.to_wire()
    if envelope.pin is not None:
        obj["PIN"] = envelope.pin
    obj["Time"] = _render_time(envelope.timestamp)
    obj["Date"] = _render_date(envelope.timestamp)
    if envelope.is_response or envelope.error is not None:
        # Wire fidelity: an unset error on a response is the string "null".
        obj["Error"] = envelope.error if envelope.error is not None else ERROR_NULL
    obj["Timestamp"] = _render_timestamp(envelope.timestamp)
    for key in sorted(envelope.extras):
        obj[key] = envelope.extras[key]
    return json.dumps(obj, indent=2)


_CURLY_QUOTES = str.maketrans({"“": '"', "”": '"', "‘": "'", "’": "'"})


def repair_json(text: str) -> str:
    """Best-effort syntactic repair of near-JSON message text.

    Inserts the commas the source samples drop between members, removes
    trailing commas, and normalizes word-processor curly quotes. Only
    whitespace outside string literals is touched.
    """
    text = text.translate(_CURLY_QUOTES)
    out: list[str] = []
    in_string = False
    escaped = False
    last_sig = ""  # last significant char emitted outside a string
    for ch in text:
        if in_string:
            out.append(ch)
            if escaped:
                escaped = False
            elif ch == "\\":
                escaped = True
            elif ch == '"':
                in_string = False
                last_sig = '"'
            continue
        if ch == '"':
            # A new string right after the end of a value means a dropped comma.
            if last_sig in {'"', "}", "]"} or last_sig.isdigit() or last_sig in {"l", "e"}:
                out.append(",")
            out.append(ch)
            in_string = True
            last_sig = '"'
            continue
        if ch in "}]":
            # drop a trailing comma before a closer
            i = len(out) - 1
            while i >= 0 and out[i].isspace():
                i -= 1
            if i >= 0 and out[i] == ",":
                del out[i]
        out.append(ch)
        if not ch.isspace():
            last_sig = ch
    return "".join(out)


_CANONICAL_KEYS = {
    "method": "method",
    "message type": "method",
    "messagetype": "method",
    "to account": "to_account",
    "from account": "from_account",
    "amount": "amount",
    "pin": "pin",
    "result": "result",
    "error": "error",
    "message": "free_text",
    "time": "time",
    "date": "date",
    "timestamp": "timestamp",
}

_DATE_RE = re.compile(r"^\s*(\d{1,2})-(\d{1,2})-(\d{4})\s*$")
_TIME_RE = re.compile(r"^\s*(\d{3,4})\s*hours?\s*$", re.IGNORECASE)


def _parse_timestamp(value: str) -> datetime:
    raw = value.strip()
    if raw.endswith("Z"):
        raw = raw[:-1] + "+00:00"
    try:
        ts = datetime.fromisoformat(raw)
    except ValueError as exc:
        raise SyntaxProblem(f"bad Timestamp: {value!r}") from exc
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc).replace(microsecond=0)


def _parse_legacy_time_date(time_s: Optional[str], date_s: Optional[str]) -> Optional[datetime]:
    if time_s is None or date_s is None:
        return None
    tm = _TIME_RE.match(time_s)
    dm = _DATE_RE.match(date_s)
    if tm is None or dm is None:
        return None
    hhmm = tm.group(1).zfill(4)
    day, month, year = (int(g) for g in dm.groups())
    try:
        return datetime(year, month, day, int(hhmm[:2]), int(hhmm[2:]), tzinfo=timezone.utc)
    except ValueError:
        return None


def decode(text: str) -> Envelope:
    """Parse wire text into an Envelope, repairing known syntactic defects."""
    try:
        raw = json.loads(repair_json(text))
    except (json.JSONDecodeError, ValueError) as exc:
        raise SyntaxProblem(f"unparseable message: {exc}") from exc
    if not isinstance(raw, dict):
        raise SyntaxProblem("message is not a JSON object")

    fields: dict[str, str] = {}
    extras: dict[str, str] = {}
    for key, value in raw.items():
        canon = _CANONICAL_KEYS.get(str(key).strip().lower())
        text_value = value if isinstance(value, str) else json.dumps(value)
        if canon is None:
            extras[str(key)] = text_value
        elif canon not in fields:  # first spelling wins
            fields[canon] = text_value

    method_raw = fields.get("method")
    if method_raw is None:
        raise MissingMethod("no method key under any accepted alias")
    method_name = method_raw.strip()
    try:
        method = Method(method_name)
    except ValueError:
        method = _METHOD_ALIASES.get(method_name)  # type: ignore[assignment]
        if method is None:
            raise UnknownMethod(f"unknown method: {method_raw!r}") from None

    amount: Optional[Money] = None
    if "amount" in fields:
        try:
            amount = parse_wire_amount(fields["amount"])
        except MoneyError as exc:
            raise BadAmount(str(exc)) from exc

    error = fields.get("error")
    if error is not None:
        error = error.strip()
        if error in {ERROR_NULL, "None", ""}:
            error = None

    if "timestamp" in fields:
        ts = _parse_timestamp(fields["timestamp"])
    else:
        ts = _parse_legacy_time_date(fields.get("time"), fields.get("date")) or EPOCH

    def clean(name: str) -> Optional[str]:
        value = fields.get(name)
        return value.strip() if value is not None else None

    return Envelope(
        method=method,
        to_account=clean("to_account"),
        from_account=clean("from_account"),
        amount=amount,
        pin=fields.get("pin"),
        result=clean("result"),
        error=error,
        timestamp=ts,
        free_text=fields.get("free_text"),
        extras=extras,
    )


def encode_transcript(envelopes: Iterable[Envelope]) -> str:
    """Canonical multi-message text: envelopes concatenated, one per block."""
    return "\n".join(encode(env) for env in envelopes) + "\n"


def decode_transcript(text: str) -> list[Envelope]:
    """Split canonical transcript text back into envelopes.

    Relies on the canonical layout: each envelope closes with a lone "}" line
    (string values are single-line in JSON, so the delimiter is unambiguous).
    """
    envelopes: list[Envelope] = []
    chunk: list[str] = []
    for line in text.splitlines():
        chunk.append(line)
        if line == "}":
            envelopes.append(decode("\n".join(chunk)))
            chunk = []
    if any(line.strip() for line in chunk):
        raise SyntaxProblem("trailing partial message in transcript")
    return envelopes


class ViolationKind(str, Enum):
    OUT_OF_ORDER = "OutOfOrder"
    MISSING_RESPONSE = "MissingResponse"
    UNEXPECTED_RESPONSE = "UnexpectedResponse"
    CONTINUED_AFTER_ERROR = "ContinuedAfterError"
    UNEXPECTED_METHOD = "UnexpectedMethod"


@dataclass(frozen=True)
class Violation:
    kind: ViolationKind
    index: int
    method: Optional[Method] = None

    def __str__(self) -> str:
        tail = f"{{{self.method.value}}}" if self.method else ""
        return f"{self.kind.value}{tail}@{self.index}"


_STAGE_ORDER = [Method.ENTER_AMOUNT, Method.ENTER_PIN, Method.VERIFY_PIN, Method.TRANSMIT]


def validate_sequence(transcript: Iterable[Envelope]) -> list[Violation]:
    """Check a transaction transcript against the required stage order.

    A conforming transcript walks EnterAmount -> EnterPIN -> VerifyPIN ->
    Transmit, each request immediately answered by its response, stopping
    early only on (and immediately after) a response that carries an error.
    Violations are returned as data; an empty list means conforming.
    """
    messages = list(transcript)
    if not messages:
        raise ValueError("transcript must be non-empty")

    violations: list[Violation] = []
    next_stage = 0
    awaiting: Optional[Method] = None
    error_seen_at: Optional[int] = None

    for i, env in enumerate(messages):
        if error_seen_at is not None:
            violations.append(Violation(ViolationKind.CONTINUED_AFTER_ERROR, i, env.method))
            continue
        if env.method not in _STAGE_ORDER:
            violations.append(Violation(ViolationKind.UNEXPECTED_METHOD, i, env.method))
            continue
        if awaiting is not None:
            if env.method != awaiting or not env.is_response:
                violations.append(Violation(ViolationKind.MISSING_RESPONSE, i, awaiting))
                awaiting = None
                # fall through: treat this message on its own merits
            else:
                awaiting = None
                if env.error is not None:
                    error_seen_at = i
                continue
        if env.is_response:
            violations.append(Violation(ViolationKind.UNEXPECTED_RESPONSE, i, env.method))
            if env.error is not None:
                error_seen_at = i
            continue
        stage = _STAGE_ORDER.index(env.method)
        if stage != next_stage:
            violations.append(Violation(ViolationKind.OUT_OF_ORDER, i, env.method))
            next_stage = stage + 1
        else:
            next_stage += 1
        awaiting = env.method

    if awaiting is not None:
        violations.append(Violation(ViolationKind.MISSING_RESPONSE, len(messages), awaiting))
    return violations
