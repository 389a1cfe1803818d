"""Shared fixtures: fast credential digests, a fixed clock, and a standard
four-account ledger with authenticated card sessions."""

from __future__ import annotations

from datetime import datetime, timezone

import pytest

from paydesk import cardsim
from paydesk.ledger import Ledger, LedgerConfig
from paydesk.money import rupees

# PBKDF2 cost is cranked down so tests can create thousands of credentialed
# customers; production default stays at LedgerConfig's 120_000.
FAST_ITERATIONS = 64

FIXED_NOW = datetime(2012, 5, 13, 11, 0, tzinfo=timezone.utc)

CORRECT_PIN = "1234"
WRONG_PIN = "9999"

FIXTURE_ROWS = (("User", 120), ("Merchant", 0), ("User No.1", 120), ("User No.2", 120))


def fast_config(**overrides) -> LedgerConfig:
    return LedgerConfig(digest_iterations=FAST_ITERATIONS, **overrides)


def fixed_clock() -> datetime:
    return FIXED_NOW


def make_fixture_ledger(config: LedgerConfig | None = None):
    """Ledger with the standard four accounts plus a mutually-authenticated
    card session per account, keyed by account id."""
    ledger = Ledger(config or fast_config(), clock=fixed_clock)
    broker = cardsim.ChallengeBroker(ledger)
    sessions = {}
    for name, balance in FIXTURE_ROWS:
        _, account_id, card_id = ledger.add_customer(
            name, name.lower().replace(" ", "-").replace(".", ""),
            "pw-" + name, CORRECT_PIN, rupees(balance))
        card = cardsim.make_virtual_card(ledger.card(card_id))
        sessions[account_id] = cardsim.mutual_authenticate(card, broker)
    return ledger, sessions


@pytest.fixture
def ledger():
    return Ledger(fast_config(), clock=fixed_clock)


@pytest.fixture
def fixture_ledger():
    return make_fixture_ledger()


# -- acceptance reporting -------------------------------------------------------------
# test_acceptance.py holds one test per top-level criterion; summarize them as
# explicit PASS/FAIL lines at the end of the run.

ACCEPTANCE_LABELS = {
    "c1": "C1 wire conformance (golden corpus byte-stable, exact strings)",
    "c2": "C2 conservation (10,000 seeded ops, sum always 0)",
    "c3": "C3 oracle equivalence (1,000 sequences vs map oracle)",
    "c4": "C4 cancel identity (restore + single-use, 100 trials)",
    "c5": "C5 replay determinism (full + 20 sampled prefixes)",
    "c6": "C6 crash atomicity (3 injection points x 50 trials)",
    "c7": "C7 two-factor gate (3 missing-factor combos x 4 workflows)",
    "c8": "C8 challenge-response (vector + 10,000 forgeries + reflection)",
    "c9": "C9 demo fidelity (seed, demo potc 100, Rum at 20 PKR)",
}


def _acceptance_key(nodeid: str):
    if "test_acceptance.py::" not in nodeid:
        return None
    name = nodeid.rsplit("::", 1)[-1]
    parts = name.split("_")
    return parts[1] if len(parts) > 1 and parts[1] in ACCEPTANCE_LABELS else None


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    verdicts = {}
    for rep in terminalreporter.stats.get("passed", []):
        key = _acceptance_key(getattr(rep, "nodeid", ""))
        if key:
            verdicts.setdefault(key, "PASS")
    for status in ("failed", "error"):
        for rep in terminalreporter.stats.get(status, []):
            key = _acceptance_key(getattr(rep, "nodeid", ""))
            if key:
                verdicts[key] = "FAIL"
    if not verdicts:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for key in sorted(ACCEPTANCE_LABELS):
        if key in verdicts:
            terminalreporter.write_line(
                f"{ACCEPTANCE_LABELS[key]}: {verdicts[key]}")
