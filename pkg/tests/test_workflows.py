"""Transaction state machines: stage order, two-factor gate, ledger coupling."""

import pytest
from hypothesis import given
from hypothesis import strategies as st

from paydesk.cardsim import CardSession
from paydesk.ledger import CASH, TransactionKind
from paydesk.money import Money, rupees
from paydesk.protocol import Method, validate_sequence
from paydesk.workflows import (
    DEFAULT_DENOMINATIONS,
    DEPOSIT_CASH_LABEL,
    MENU_NAMES,
    PIN_PROMPT,
    PIN_PROMPT_POTC,
    WITHDRAW_CASH_LABEL,
    NoteBundle,
    NotAuthorized,
    Stage,
    TransactionWorkflow,
    UnpayableAmount,
    WorkflowStateError,
    build_enter_amount,
    build_enter_pin,
    build_transmit,
    build_verify_pin,
    greedy_payout,
    run_account_to_account,
    run_cash_deposit,
    run_cash_withdrawal,
    run_pay_over_counter,
)

from conftest import CORRECT_PIN, WRONG_PIN, fixed_clock, make_fixture_ledger


@pytest.fixture
def world():
    return make_fixture_ledger()


# -- payouts --------------------------------------------------------------------------

def test_greedy_payout_largest_first():
    assert greedy_payout(rupees(100)).notes == (100,)
    assert greedy_payout(rupees(180)).notes == (100, 50, 20, 10)
    assert greedy_payout(rupees(7000)).notes == (5000, 1000, 1000)


def test_greedy_payout_unrepresentable():
    with pytest.raises(UnpayableAmount):
        greedy_payout(rupees(125))  # no 5-rupee note
    with pytest.raises(UnpayableAmount):
        greedy_payout(Money(10050))  # not a whole rupee
    with pytest.raises(UnpayableAmount):
        greedy_payout(rupees(0))


@given(st.integers(min_value=1, max_value=10**6).map(lambda n: n * 10))
def test_greedy_payout_sums_to_amount(major):
    bundle = greedy_payout(rupees(major))
    assert sum(bundle.notes) == major
    assert all(n in DEFAULT_DENOMINATIONS for n in bundle.notes)


def test_note_bundle_validation():
    NoteBundle((100, 20)).validate(DEFAULT_DENOMINATIONS)
    with pytest.raises(Exception):
        NoteBundle(()).validate(DEFAULT_DENOMINATIONS)
    with pytest.raises(Exception):
        NoteBundle((25,)).validate(DEFAULT_DENOMINATIONS)
    assert NoteBundle((100, 20)).total() == rupees(120)


# -- happy paths ---------------------------------------------------------------------------

def test_potc_happy(world):
    ledger, sessions = world
    run = run_pay_over_counter(ledger, sessions["User"], rupees(100), CORRECT_PIN,
                               "Merchant", clock=fixed_clock)
    assert run.stage is Stage.DONE
    final = run.transcript[-1]
    assert final.result == "OK" and final.error is None
    assert ledger.balance("User") == rupees(20)
    assert ledger.balance("Merchant") == rupees(100)
    assert run.record.kind is TransactionKind.POTC


def test_a2a_happy_distinct_success_string(world):
    ledger, sessions = world
    run = run_account_to_account(ledger, sessions["User No.2"], rupees(100),
                                 CORRECT_PIN, "User No.1", clock=fixed_clock)
    assert run.stage is Stage.DONE
    assert run.transcript[-1].result == "Transmission Successful"
    assert ledger.balance("User No.1") == rupees(220)
    assert ledger.balance("User No.2") == rupees(20)


def test_a2a_full_balance_boundary(world):
    ledger, sessions = world
    run = run_account_to_account(ledger, sessions["User No.2"], rupees(120),
                                 CORRECT_PIN, "User No.1", clock=fixed_clock)
    assert run.stage is Stage.DONE
    assert ledger.balance("User No.2") == rupees(0)


def test_withdrawal_happy_moves_cash_and_attaches_payout(world):
    ledger, sessions = world
    cash_before = ledger.balance(CASH)
    run = run_cash_withdrawal(ledger, sessions["User No.1"], rupees(100),
                              CORRECT_PIN, clock=fixed_clock)
    assert run.stage is Stage.DONE
    assert run.transcript[-1].result == "OK"
    assert ledger.balance("User No.1") == rupees(20)
    assert ledger.balance(CASH) == cash_before + rupees(100)
    assert run.payout.notes == (100,)
    assert run.payout.total() == rupees(100)


def test_deposit_happy_credits_target(world):
    ledger, sessions = world
    run = run_cash_deposit(ledger, sessions["User No.1"], NoteBundle((100, 100)),
                           CORRECT_PIN, "User No.1", clock=fixed_clock)
    assert run.stage is Stage.DONE
    assert run.transcript[-1].result == "OK"
    assert ledger.balance("User No.1") == rupees(320)
    assert ledger.balance(CASH) == rupees(-200)
    assert ledger.total_minor_units() == 0


def test_wire_labels_for_cash(world):
    ledger, sessions = world
    wd = run_cash_withdrawal(ledger, sessions["User No.1"], rupees(10),
                             CORRECT_PIN, clock=fixed_clock)
    assert wd.transcript[0].to_account == WITHDRAW_CASH_LABEL
    dep = run_cash_deposit(ledger, sessions["User No.2"], NoteBundle((10,)),
                           CORRECT_PIN, "User No.2", clock=fixed_clock)
    assert dep.transcript[0].from_account == DEPOSIT_CASH_LABEL
    # on the books both are the CASH system account
    kinds = [r.kind for r in ledger.records()[-2:]]
    assert kinds == [TransactionKind.WITHDRAW, TransactionKind.DEPOSIT]


def test_pin_prompts_differ_by_flow(world):
    ledger, sessions = world
    potc = run_pay_over_counter(ledger, sessions["User"], rupees(1), CORRECT_PIN,
                                "Merchant", clock=fixed_clock)
    assert potc.transcript[2].free_text == PIN_PROMPT_POTC
    a2a = run_account_to_account(ledger, sessions["User No.2"], rupees(1),
                                 CORRECT_PIN, "User No.1", clock=fixed_clock)
    assert a2a.transcript[2].free_text == PIN_PROMPT


# -- failure paths ------------------------------------------------------------------------------

def test_wrong_pin_stops_before_transmit(world):
    ledger, sessions = world
    tx_before = ledger.last_tx_id
    run = run_pay_over_counter(ledger, sessions["User"], rupees(100), WRONG_PIN,
                               "Merchant", clock=fixed_clock)
    assert run.stage is Stage.FAILED
    final = run.transcript[-1]
    assert final.result == "NotVerified"
    assert final.error == "Verification Unsuccessful"
    assert not any(e.method is Method.TRANSMIT for e in run.transcript)
    assert ledger.last_tx_id == tx_before
    assert ledger.balance("User") == rupees(120)


def test_unknown_recipient_not_transmitted(world):
    ledger, sessions = world
    run = run_pay_over_counter(ledger, sessions["User"], rupees(100), CORRECT_PIN,
                               "Ghost", clock=fixed_clock)
    assert run.stage is Stage.FAILED
    final = run.transcript[-1]
    assert final.result == "NotTransmitted"
    assert final.error == "Account Not Found"
    assert ledger.balance("User") == rupees(120)


def test_insufficient_funds_not_transmitted(world):
    ledger, sessions = world
    run = run_account_to_account(ledger, sessions["User No.2"], rupees(500),
                                 CORRECT_PIN, "User No.1", clock=fixed_clock)
    assert run.stage is Stage.FAILED
    assert run.transcript[-1].error == "Account Has Not Enough Cash"
    assert ledger.balance("User No.2") == rupees(120)
    assert ledger.balance("User No.1") == rupees(120)


def test_unpayable_withdrawal_fails_before_any_ledger_change(world):
    ledger, sessions = world
    tx_before = ledger.last_tx_id
    run = run_cash_withdrawal(ledger, sessions["User No.1"], rupees(125),
                              CORRECT_PIN, clock=fixed_clock)
    assert run.stage is Stage.FAILED
    assert run.transcript[-1].result == "NotAccepted"
    assert run.transcript[-1].error.startswith("Internal:")
    assert len(run.transcript) == 2  # rejected at EnterAmount
    assert ledger.last_tx_id == tx_before


def test_deposit_invalid_notes_fails_closed(world):
    ledger, sessions = world
    run = run_cash_deposit(ledger, sessions["User No.1"], NoteBundle((100, 25)),
                           CORRECT_PIN, "User No.1", clock=fixed_clock)
    assert run.stage is Stage.FAILED
    assert run.transcript[-1].result == "NotAccepted"
    assert ledger.balance(CASH) == rupees(0)


def test_deposit_unknown_target(world):
    ledger, sessions = world
    run = run_cash_deposit(ledger, sessions["User No.1"], NoteBundle((100,)),
                           CORRECT_PIN, "Ghost", clock=fixed_clock)
    assert run.stage is Stage.FAILED
    assert run.transcript[-1].error == "Account Not Found"
    assert ledger.balance(CASH) == rupees(0)


def test_insufficient_wrong_pin_etc_leave_zero_new_records(world):
    ledger, sessions = world
    tx_before = ledger.last_tx_id
    for run in (
        run_pay_over_counter(ledger, sessions["User"], rupees(9999), CORRECT_PIN,
                             "Merchant", clock=fixed_clock),
        run_account_to_account(ledger, sessions["User No.2"], rupees(1), WRONG_PIN,
                               "User No.1", clock=fixed_clock),
    ):
        assert run.stage is Stage.FAILED
        assert run.record is None
    assert ledger.last_tx_id == tx_before


# -- two-factor gate ----------------------------------------------------------------------------

_RUNNERS = {
    TransactionKind.POTC: lambda lg, s: run_pay_over_counter(
        lg, s, rupees(10), CORRECT_PIN, "Merchant", clock=fixed_clock),
    TransactionKind.A2A: lambda lg, s: run_account_to_account(
        lg, s, rupees(10), CORRECT_PIN, "User No.1", clock=fixed_clock),
    TransactionKind.WITHDRAW: lambda lg, s: run_cash_withdrawal(
        lg, s, rupees(10), CORRECT_PIN, clock=fixed_clock),
    TransactionKind.DEPOSIT: lambda lg, s: run_cash_deposit(
        lg, s, NoteBundle((10,)), CORRECT_PIN, "User No.1", clock=fixed_clock),
}


@pytest.mark.parametrize("kind", list(_RUNNERS))
@pytest.mark.parametrize("card_ok,server_ok", [(False, True), (True, False),
                                               (False, False)])
def test_unauthenticated_session_rejected_with_no_transcript(world, kind,
                                                             card_ok, server_ok):
    ledger, _ = world
    bad = CardSession(card_id="card-1", card_authenticated=card_ok,
                      server_authenticated=server_ok)
    tx_before = ledger.last_tx_id
    with pytest.raises(NotAuthorized):
        _RUNNERS[kind](ledger, bad)
    assert ledger.last_tx_id == tx_before


def test_session_for_unknown_card_rejected(world):
    ledger, _ = world
    ghost = CardSession(card_id="card-404", card_authenticated=True,
                        server_authenticated=True)
    with pytest.raises(NotAuthorized):
        TransactionWorkflow(TransactionKind.POTC, ledger, ghost)


# -- stage machine ------------------------------------------------------------------------------

def test_out_of_order_request_rejected(world):
    ledger, sessions = world
    engine = TransactionWorkflow(TransactionKind.POTC, ledger, sessions["User"],
                                 clock=fixed_clock)
    with pytest.raises(WorkflowStateError):
        engine.handle(build_transmit(TransactionKind.POTC, "Merchant", "User",
                                     rupees(10), timestamp=fixed_clock()))
    assert engine.run.transcript == []  # the rejected request leaves no trace


def test_finished_run_refuses_more_requests(world):
    ledger, sessions = world
    engine = TransactionWorkflow(TransactionKind.POTC, ledger, sessions["User"],
                                 clock=fixed_clock)
    for request in [
        build_enter_amount(TransactionKind.POTC, "Merchant", "User", rupees(10),
                           timestamp=fixed_clock()),
        build_enter_pin(TransactionKind.POTC, timestamp=fixed_clock()),
        build_verify_pin(TransactionKind.POTC, CORRECT_PIN, timestamp=fixed_clock()),
        build_transmit(TransactionKind.POTC, "Merchant", "User", rupees(10),
                       timestamp=fixed_clock()),
    ]:
        engine.handle(request)
    assert engine.run.stage is Stage.DONE
    with pytest.raises(WorkflowStateError):
        engine.handle(build_enter_pin(TransactionKind.POTC, timestamp=fixed_clock()))


def test_missing_amount_not_accepted(world):
    ledger, sessions = world
    engine = TransactionWorkflow(TransactionKind.POTC, ledger, sessions["User"],
                                 clock=fixed_clock)
    request = build_enter_amount(TransactionKind.POTC, "Merchant", "User",
                                 rupees(10), timestamp=fixed_clock())
    request.amount = None
    response = engine.handle(request)
    assert response.result == "NotAccepted"
    assert engine.run.stage is Stage.FAILED


# -- transcript quality ---------------------------------------------------------------------------

def _all_runs(world):
    ledger, sessions = world
    return [
        run_pay_over_counter(ledger, sessions["User"], rupees(100), CORRECT_PIN,
                             "Merchant", clock=fixed_clock),
        run_pay_over_counter(ledger, sessions["User"], rupees(5), WRONG_PIN,
                             "Merchant", clock=fixed_clock),
        run_account_to_account(ledger, sessions["User No.2"], rupees(9999),
                               CORRECT_PIN, "User No.1", clock=fixed_clock),
        run_cash_withdrawal(ledger, sessions["User No.1"], rupees(20),
                            CORRECT_PIN, clock=fixed_clock),
        run_cash_deposit(ledger, sessions["User No.2"], NoteBundle((50,)),
                         CORRECT_PIN, "User No.2", clock=fixed_clock),
    ]


def test_every_transcript_validates_clean(world):
    for run in _all_runs(world):
        assert validate_sequence(run.transcript) == []


def test_no_transmit_without_verified_response(world):
    for run in _all_runs(world):
        verified_at = None
        for i, envelope in enumerate(run.transcript):
            if envelope.is_response and envelope.result == "Verified":
                verified_at = i
            if envelope.method is Method.TRANSMIT:
                assert verified_at is not None and verified_at < i


def test_ledger_coupling_done_iff_one_record(world):
    ledger, _ = world
    for _ in range(2):  # outcomes shift as balances deplete; coupling must hold anyway
        before = ledger.last_tx_id
        runs = _all_runs(world)
        for run in runs:
            if run.stage is Stage.DONE:
                assert run.record is not None
                assert run.record.kind is run.kind
            else:
                assert run.record is None
        done = sum(1 for r in runs if r.stage is Stage.DONE)
        assert ledger.last_tx_id == before + done


def test_transcripts_store_redacted_pins(world):
    ledger, sessions = world
    run = run_pay_over_counter(ledger, sessions["User"], rupees(10), CORRECT_PIN,
                               "Merchant", clock=fixed_clock)
    verify_req = run.transcript[4]
    assert verify_req.method is Method.VERIFY_PIN
    assert verify_req.pin == "****"
    assert all(CORRECT_PIN != e.pin for e in run.transcript)


def test_menu_names_cover_the_four_kinds():
    assert set(MENU_NAMES.values()) == {TransactionKind.POTC, TransactionKind.A2A,
                                        TransactionKind.WITHDRAW,
                                        TransactionKind.DEPOSIT}
    assert "Pay Over The Counter" in MENU_NAMES
