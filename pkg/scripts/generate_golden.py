#!/usr/bin/env python3
"""Regenerate the golden wire corpus and workflow transcripts.

The corpus holds the canonical (strict-syntax) form of every message in the
four transaction families, one file per message. The transcripts are complete
workflow runs — happy path and each error path — produced by the real engine
against a scratch ledger with a fixed clock, so regeneration is byte-stable.

Run from the repository root:  python3 scripts/generate_golden.py
"""

from __future__ import annotations

import sys
from datetime import datetime, timezone
from pathlib import Path

from paydesk import cardsim
from paydesk.ledger import Ledger, LedgerConfig
from paydesk.money import rupees
from paydesk.protocol import Envelope, Method, encode, encode_transcript
from paydesk.workflows import (
    DEPOSIT_CASH_LABEL,
    PIN_PROMPT,
    PIN_PROMPT_POTC,
    VERIFYING_NOTE,
    WITHDRAW_CASH_LABEL,
    NoteBundle,
    run_account_to_account,
    run_cash_deposit,
    run_cash_withdrawal,
    run_pay_over_counter,
)

ROOT = Path(__file__).resolve().parent.parent
CORPUS_DIR = ROOT / "golden" / "corpus"
TRANSCRIPTS_DIR = ROOT / "golden" / "transcripts"

TS = datetime(2012, 5, 13, 11, 0, tzinfo=timezone.utc)
AMOUNT = rupees(100)

PIN = "1234"
WRONG_PIN = "9999"


def _env(method: Method, **kwargs) -> Envelope:
    return Envelope(method=method, timestamp=TS, **kwargs)


def corpus_messages() -> dict[str, Envelope]:
    """Every message family in canonical form, keyed by file stem."""
    m: dict[str, Envelope] = {}

    # Pay over the counter: merchant terminal debits the payer.
    to, frm = "Merchant", "User"
    m["potc-01-enter-amount-request"] = _env(
        Method.ENTER_AMOUNT, to_account=to, from_account=frm, amount=AMOUNT)
    m["potc-02-enter-amount-response"] = _env(
        Method.ENTER_AMOUNT, result="OK", to_account=to, from_account=frm, amount=AMOUNT)
    m["potc-03-enter-pin-request"] = _env(Method.ENTER_PIN, free_text=PIN_PROMPT_POTC)
    m["potc-04-enter-pin-response"] = _env(Method.ENTER_PIN, result="PIN")
    m["potc-05-verify-pin-request"] = _env(Method.VERIFY_PIN)
    m["potc-06-verify-pin-response-verified"] = _env(Method.VERIFY_PIN, result="Verified")
    m["potc-07-verify-pin-response-notverified"] = _env(
        Method.VERIFY_PIN, result="NotVerified", error="Verification Unsuccessful")
    m["potc-08-transmit-request"] = _env(
        Method.TRANSMIT, to_account=to, from_account=frm, amount=AMOUNT)
    m["potc-09-transmit-response-ok"] = _env(
        Method.TRANSMIT, result="OK", to_account=to, from_account=frm, amount=AMOUNT)
    m["potc-10-transmit-response-not-found"] = _env(
        Method.TRANSMIT, result="NotTransmitted", error="Account Not Found",
        to_account=to, from_account=frm, amount=AMOUNT)
    m["potc-11-transmit-response-insufficient"] = _env(
        Method.TRANSMIT, result="NotTransmitted", error="Account Has Not Enough Cash",
        to_account=to, from_account=frm, amount=AMOUNT)

    # Account to account: the sender pushes to another account.
    to, frm = "User No.1", "User No.2"
    m["a2a-01-enter-amount-request"] = _env(
        Method.ENTER_AMOUNT, to_account=to, from_account=frm)
    m["a2a-02-enter-amount-response"] = _env(
        Method.ENTER_AMOUNT, result="OK", to_account=to, from_account=frm)
    m["a2a-03-enter-pin-request"] = _env(Method.ENTER_PIN, free_text=PIN_PROMPT)
    m["a2a-04-enter-pin-response"] = _env(Method.ENTER_PIN, result="PIN")
    m["a2a-05-verify-pin-request"] = _env(Method.VERIFY_PIN, free_text=VERIFYING_NOTE)
    m["a2a-06-verify-pin-response-verified"] = _env(Method.VERIFY_PIN, result="Verified")
    m["a2a-07-verify-pin-response-notverified"] = _env(
        Method.VERIFY_PIN, result="NotVerified", error="Verification Unsuccessful")
    m["a2a-08-transmit-request"] = _env(
        Method.TRANSMIT, to_account=to, from_account=frm, amount=AMOUNT)
    m["a2a-09-transmit-response-success"] = _env(
        Method.TRANSMIT, result="Transmission Successful",
        to_account=to, from_account=frm, amount=AMOUNT)
    m["a2a-10-transmit-response-not-found"] = _env(
        Method.TRANSMIT, result="NotTransmitted", error="Account Not Found",
        to_account=to, from_account=frm, amount=AMOUNT)
    m["a2a-11-transmit-response-insufficient"] = _env(
        Method.TRANSMIT, result="NotTransmitted", error="Account Has Not Enough Cash",
        to_account=to, from_account=frm, amount=AMOUNT)

    # Cash deposit: notes in the counter device credit the target account.
    to, frm = "User No.1", DEPOSIT_CASH_LABEL
    m["deposit-01-enter-amount-request"] = _env(
        Method.ENTER_AMOUNT, to_account=to, from_account=frm)
    m["deposit-02-enter-amount-response"] = _env(
        Method.ENTER_AMOUNT, result="OK", to_account=to, from_account=frm)
    m["deposit-03-enter-pin-request"] = _env(Method.ENTER_PIN, free_text=PIN_PROMPT)
    m["deposit-04-enter-pin-response"] = _env(Method.ENTER_PIN, result="PIN")
    m["deposit-05-verify-pin-request"] = _env(Method.VERIFY_PIN, free_text=VERIFYING_NOTE)
    m["deposit-06-verify-pin-response-verified"] = _env(Method.VERIFY_PIN, result="Verified")
    m["deposit-07-verify-pin-response-notverified"] = _env(
        Method.VERIFY_PIN, result="NotVerified", error="Verification Unsuccessful")
    m["deposit-08-transmit-request"] = _env(
        Method.TRANSMIT, to_account=to, from_account=frm, amount=AMOUNT)
    m["deposit-09-transmit-response-ok"] = _env(
        Method.TRANSMIT, result="OK", to_account=to, from_account=frm, amount=AMOUNT)
    m["deposit-10-transmit-response-not-found"] = _env(
        Method.TRANSMIT, result="NotTransmitted", error="Account Not Found",
        to_account=to, from_account=frm, amount=AMOUNT)

    # Cash withdrawal: the account funds notes paid out by the device.
    # The source texts capitalize the device on the request side only.
    frm = "User No.1"
    m["withdrawal-01-enter-amount-request"] = _env(
        Method.ENTER_AMOUNT, to_account=WITHDRAW_CASH_LABEL, from_account=frm)
    m["withdrawal-02-enter-amount-response"] = _env(
        Method.ENTER_AMOUNT, result="OK", to_account=DEPOSIT_CASH_LABEL, from_account=frm)
    m["withdrawal-03-enter-pin-request"] = _env(Method.ENTER_PIN, free_text=PIN_PROMPT)
    m["withdrawal-04-enter-pin-response"] = _env(Method.ENTER_PIN, result="PIN")
    m["withdrawal-05-verify-pin-request"] = _env(Method.VERIFY_PIN, free_text=VERIFYING_NOTE)
    m["withdrawal-06-verify-pin-response-verified"] = _env(Method.VERIFY_PIN, result="Verified")
    m["withdrawal-07-verify-pin-response-notverified"] = _env(
        Method.VERIFY_PIN, result="NotVerified", error="Verification Unsuccessful")
    m["withdrawal-08-transmit-request"] = _env(
        Method.TRANSMIT, to_account=DEPOSIT_CASH_LABEL, from_account=frm, amount=AMOUNT)
    m["withdrawal-09-transmit-response-ok"] = _env(
        Method.TRANSMIT, result="OK", to_account=DEPOSIT_CASH_LABEL,
        from_account=frm, amount=AMOUNT)
    m["withdrawal-10-transmit-response-insufficient"] = _env(
        Method.TRANSMIT, result="NotTransmitted", error="Account Has Not Enough Cash",
        to_account=DEPOSIT_CASH_LABEL, from_account=frm, amount=AMOUNT)

    return m


def make_fixture():
    """Scratch ledger with the corpus accounts, plus an authenticated session
    per card. Fresh per transcript so runs never see each other's state."""
    ledger = Ledger(LedgerConfig(digest_iterations=1_000), clock=lambda: TS)
    sessions = {}
    for name, balance in (("User", 120), ("Merchant", 0),
                          ("User No.1", 120), ("User No.2", 120)):
        _, account_id, card_id = ledger.add_customer(
            name, name.lower().replace(" ", "-").replace(".", ""),
            "pw-" + name, PIN, rupees(balance))
        card = cardsim.make_virtual_card(ledger.card(card_id))
        sessions[account_id] = cardsim.mutual_authenticate(
            card, cardsim.ChallengeBroker(ledger))
    return ledger, sessions


def transcript_runs() -> dict[str, list[Envelope]]:
    clock = lambda: TS  # noqa: E731
    runs: dict[str, list[Envelope]] = {}

    def potc(name, amount, pin, recipient):
        ledger, sessions = make_fixture()
        run = run_pay_over_counter(ledger, sessions["User"], amount, pin,
                                   recipient, clock=clock)
        runs[name] = run.transcript

    def a2a(name, amount, pin, recipient):
        ledger, sessions = make_fixture()
        run = run_account_to_account(ledger, sessions["User No.2"], amount, pin,
                                     recipient, clock=clock)
        runs[name] = run.transcript

    def withdrawal(name, amount, pin):
        ledger, sessions = make_fixture()
        run = run_cash_withdrawal(ledger, sessions["User No.1"], amount, pin,
                                  clock=clock)
        runs[name] = run.transcript

    def deposit(name, notes, pin, target):
        ledger, sessions = make_fixture()
        run = run_cash_deposit(ledger, sessions["User No.1"], NoteBundle(notes),
                               pin, target, clock=clock)
        runs[name] = run.transcript

    potc("potc-happy", AMOUNT, PIN, "Merchant")
    potc("potc-wrong-pin", AMOUNT, WRONG_PIN, "Merchant")
    potc("potc-unknown-recipient", AMOUNT, PIN, "Ghost")
    potc("potc-insufficient", rupees(500), PIN, "Merchant")

    a2a("a2a-happy", AMOUNT, PIN, "User No.1")
    a2a("a2a-wrong-pin", AMOUNT, WRONG_PIN, "User No.1")
    a2a("a2a-unknown-recipient", AMOUNT, PIN, "Ghost")
    a2a("a2a-insufficient", rupees(500), PIN, "User No.1")

    withdrawal("withdrawal-happy", AMOUNT, PIN)
    withdrawal("withdrawal-wrong-pin", AMOUNT, WRONG_PIN)
    withdrawal("withdrawal-insufficient", rupees(500), PIN)
    withdrawal("withdrawal-unpayable", rupees(125), PIN)

    deposit("deposit-happy", (100,), PIN, "User No.1")
    deposit("deposit-wrong-pin", (100,), WRONG_PIN, "User No.1")
    deposit("deposit-unknown-target", (100,), PIN, "Ghost")
    deposit("deposit-bad-notes", (100, 25), PIN, "User No.1")

    return runs


def main() -> int:
    CORPUS_DIR.mkdir(parents=True, exist_ok=True)
    TRANSCRIPTS_DIR.mkdir(parents=True, exist_ok=True)

    corpus = corpus_messages()
    for stem, envelope in sorted(corpus.items()):
        (CORPUS_DIR / f"{stem}.json").write_text(encode(envelope) + "\n",
                                                 encoding="utf-8")
    print(f"wrote {len(corpus)} corpus messages to {CORPUS_DIR}")

    transcripts = transcript_runs()
    for stem, transcript in sorted(transcripts.items()):
        (TRANSCRIPTS_DIR / f"{stem}.txt").write_text(
            encode_transcript(transcript), encoding="utf-8")
    print(f"wrote {len(transcripts)} transcripts to {TRANSCRIPTS_DIR}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
