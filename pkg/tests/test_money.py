"""Integer money: exact arithmetic and the wire amount format."""

import pytest
from hypothesis import given
from hypothesis import strategies as st

from paydesk.money import Money, MoneyError, parse_wire_amount, rupees


def test_rupees_are_hundred_paisa():
    assert rupees(120) == Money(12000, "PKR")
    assert rupees(0).minor_units == 0


def test_arithmetic_is_exact_integer():
    assert rupees(1) + rupees(2) == rupees(3)
    assert rupees(5) - rupees(7) == Money(-200)
    assert -rupees(4) == Money(-400)


def test_currency_mismatch_rejected():
    with pytest.raises(MoneyError):
        Money(1, "PKR") + Money(1, "USD")
    with pytest.raises(MoneyError):
        Money(1, "PKR") - Money(1, "USD")


def test_wire_form_whole_and_fractional():
    assert rupees(100).to_wire() == "100"
    assert Money(10050).to_wire() == "100.50"
    assert Money(-10050).to_wire() == "-100.50"
    assert Money(5).to_wire() == "0.05"
    assert str(rupees(20)) == "20 PKR"


@pytest.mark.parametrize(
    "text,minor",
    [
        ("100", 10000),
        (" 100", 10000),          # legacy leading space
        ("Rs. 100", 10000),       # legacy currency prefix
        ("rs.100", 10000),
        ("Rs 100", 10000),
        ("100.50", 10050),
        ("100.5", 10050),
        ("-3", -300),
        ("0", 0),
    ],
)
def test_parse_wire_amount_tolerates_legacy_texture(text, minor):
    assert parse_wire_amount(text) == Money(minor)


@pytest.mark.parametrize("text", ["", "abc", "1.234", "1,000", "Rs.", "--1", "1e3"])
def test_parse_wire_amount_rejects_garbage(text):
    with pytest.raises(MoneyError):
        parse_wire_amount(text)


@given(st.integers(min_value=-(10**12), max_value=10**12))
def test_wire_round_trip(minor):
    m = Money(minor)
    assert parse_wire_amount(m.to_wire()) == m


@given(st.integers(min_value=-(10**9), max_value=10**9),
       st.integers(min_value=-(10**9), max_value=10**9))
def test_addition_matches_integer_oracle(a, b):
    assert (Money(a) + Money(b)).minor_units == a + b
