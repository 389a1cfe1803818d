"""Integer money in minor units (paisa). All balance arithmetic is exact."""

from __future__ import annotations

import re
from dataclasses import dataclass

CURRENCY = "PKR"
MINOR_PER_MAJOR = 100

_WIRE_RE = re.compile(r"^\s*(?:Rs\.?\s*)?(-?\d+)(?:\.(\d{1,2}))?\s*$", re.IGNORECASE)


class MoneyError(ValueError):
    pass


@dataclass(frozen=True, order=True)
class Money:
    """A signed amount of a single currency, stored as integer minor units."""

    minor_units: int
    currency: str = CURRENCY

    def __add__(self, other: "Money") -> "Money":
        self._check(other)
        return Money(self.minor_units + other.minor_units, self.currency)

    def __sub__(self, other: "Money") -> "Money":
        self._check(other)
        return Money(self.minor_units - other.minor_units, self.currency)

    def __neg__(self) -> "Money":
        return Money(-self.minor_units, self.currency)

    def _check(self, other: "Money") -> None:
        if self.currency != other.currency:
            raise MoneyError(f"currency mismatch: {self.currency} vs {other.currency}")

    @property
    def is_positive(self) -> bool:
        return self.minor_units > 0

    def to_wire(self) -> str:
        """Whole major units when exact ("100"), else two decimals ("100.50")."""
        major, rem = divmod(abs(self.minor_units), MINOR_PER_MAJOR)
        sign = "-" if self.minor_units < 0 else ""
        if rem == 0:
            return f"{sign}{major}"
        return f"{sign}{major}.{rem:02d}"

    def __str__(self) -> str:
        return f"{self.to_wire()} {self.currency}"


def rupees(amount: int, currency: str = CURRENCY) -> Money:
    return Money(amount * MINOR_PER_MAJOR, currency)


def parse_wire_amount(text: str) -> Money:
    """Parse an amount as it appears on the wire.

    Tolerates surrounding whitespace and a currency prefix ("Rs. 100", " 100").
    Fractions are limited to two digits; anything else is rejected.
    """
    m = _WIRE_RE.match(text)
    if m is None:
        raise MoneyError(f"unparseable amount: {text!r}")
    whole = int(m.group(1))
    frac = m.group(2)
    minor = abs(whole) * MINOR_PER_MAJOR
    if frac is not None:
        minor += int(frac.ljust(2, "0"))
    if whole < 0 or m.group(1).startswith("-"):
        minor = -minor
    return Money(minor)
