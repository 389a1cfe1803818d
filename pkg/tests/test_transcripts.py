"""The generator script reproduces every committed golden file byte for byte,
and every committed transcript replays as a conforming message sequence."""

import importlib.util
from pathlib import Path

import pytest

from paydesk.protocol import decode_transcript, encode, encode_transcript, validate_sequence

ROOT = Path(__file__).resolve().parent.parent
TRANSCRIPTS = ROOT / "golden" / "transcripts"
CORPUS = ROOT / "golden" / "corpus"


def _load_generator():
    module_spec = importlib.util.spec_from_file_location(
        "generate_golden", ROOT / "scripts" / "generate_golden.py")
    module = importlib.util.module_from_spec(module_spec)
    module_spec.loader.exec_module(module)
    return module


GEN = _load_generator()


def test_generator_reproduces_the_corpus():
    regenerated = GEN.corpus_messages()
    committed = {p.stem: p.read_text(encoding="utf-8") for p in CORPUS.glob("*.json")}
    assert sorted(regenerated) == sorted(committed)
    for stem, envelope in regenerated.items():
        assert encode(envelope) + "\n" == committed[stem], stem


def test_generator_reproduces_the_transcripts():
    regenerated = GEN.transcript_runs()
    committed = {p.stem: p.read_text(encoding="utf-8")
                 for p in TRANSCRIPTS.glob("*.txt")}
    assert sorted(regenerated) == sorted(committed)
    for stem, transcript in regenerated.items():
        assert encode_transcript(transcript) == committed[stem], stem


FINALS = {
    "potc-happy": ("OK", None),
    "potc-wrong-pin": ("NotVerified", "Verification Unsuccessful"),
    "potc-unknown-recipient": ("NotTransmitted", "Account Not Found"),
    "potc-insufficient": ("NotTransmitted", "Account Has Not Enough Cash"),
    "a2a-happy": ("Transmission Successful", None),
    "a2a-wrong-pin": ("NotVerified", "Verification Unsuccessful"),
    "a2a-unknown-recipient": ("NotTransmitted", "Account Not Found"),
    "a2a-insufficient": ("NotTransmitted", "Account Has Not Enough Cash"),
    "withdrawal-happy": ("OK", None),
    "withdrawal-wrong-pin": ("NotVerified", "Verification Unsuccessful"),
    "withdrawal-insufficient": ("NotTransmitted", "Account Has Not Enough Cash"),
    "withdrawal-unpayable": ("NotAccepted", "internal"),
    "deposit-happy": ("OK", None),
    "deposit-wrong-pin": ("NotVerified", "Verification Unsuccessful"),
    "deposit-unknown-target": ("NotTransmitted", "Account Not Found"),
    "deposit-bad-notes": ("NotAccepted", "internal"),
}


def test_transcript_set_is_complete():
    assert sorted(p.stem for p in TRANSCRIPTS.glob("*.txt")) == sorted(FINALS)


@pytest.mark.parametrize("stem", sorted(FINALS), ids=str)
def test_transcript_replays_clean_and_ends_as_recorded(stem):
    envelopes = decode_transcript((TRANSCRIPTS / f"{stem}.txt")
                                  .read_text(encoding="utf-8"))
    assert validate_sequence(envelopes) == []
    final = envelopes[-1]
    expected_result, expected_error = FINALS[stem]
    assert final.result == expected_result
    if expected_error is None:
        assert final.error is None
    elif expected_error == "internal":
        assert final.error.startswith("Internal:")
    else:
        assert final.error == expected_error


@pytest.mark.parametrize("stem", sorted(FINALS), ids=str)
def test_transcripts_never_store_a_real_pin(stem):
    text = (TRANSCRIPTS / f"{stem}.txt").read_text(encoding="utf-8")
    if '"PIN"' in text:
        assert '"PIN": "****"' in text
    assert '"PIN": "1234"' not in text
    assert '"PIN": "9999"' not in text
