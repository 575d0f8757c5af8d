from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from gapaudit.features.formula import (
    Composition,
    EmptyFormulaError,
    UnbalancedParenthesisError,
    UnknownElementError,
    parse_formula,
)


def test_simple_formula():
    assert parse_formula("SiO2").amounts == {"Si": 1, "O": 2}


def test_parenthesis_expansion():
    assert parse_formula("Ca(OH)2").amounts == {"Ca": 1, "O": 2, "H": 2}


def test_nested_groups_and_repeats():
    comp = parse_formula("Mg3(Al(OH)2)2O")
    assert comp.amounts == {"Mg": 3, "Al": 2, "O": 5, "H": 4}


def test_fractional_counts():
    comp = parse_formula("Li0.5CoO2")
    assert comp.amounts["Li"] == Fraction(1, 2)
    assert comp.reduced().amounts == {"Li": 1, "Co": 2, "O": 4}


def test_unknown_element_position():
    with pytest.raises(UnknownElementError) as err:
        parse_formula("Xx2")
    assert err.value.position == 0


def test_unknown_element_later_position():
    with pytest.raises(UnknownElementError) as err:
        parse_formula("NaQq")
    assert err.value.position == 2


@pytest.mark.parametrize("text", ["", "   "])
def test_empty(text):
    with pytest.raises(EmptyFormulaError):
        parse_formula(text)


@pytest.mark.parametrize("text", ["Ca(OH2", "CaOH)2", "((O)"])
def test_unbalanced(text):
    with pytest.raises(UnbalancedParenthesisError):
        parse_formula(text)


def test_error_kinds_are_distinct():
    kinds = {EmptyFormulaError, UnknownElementError, UnbalancedParenthesisError}
    assert len(kinds) == 3
    assert not any(issubclass(a, b) for a in kinds for b in kinds if a is not b)


def test_reduced_key_merges_multiples():
    assert parse_formula("SiO2").reduced_key() == parse_formula("Si2O4").reduced_key()
    assert parse_formula("SiO2").reduced_key() != parse_formula("SiO3").reduced_key()


def test_weights_sum_to_one():
    w = parse_formula("Ca(OH)2").weights
    assert sum(w.values()) == pytest.approx(1.0, abs=1e-12)
    assert w["Ca"] == pytest.approx(0.2)


_symbols = st.sampled_from(["H", "Li", "O", "Na", "Cl", "Fe", "Si", "Ba", "Ti", "S"])


@given(st.dictionaries(_symbols, st.integers(1, 12), min_size=1, max_size=5), st.integers(1, 6))
def test_scaling_preserves_reduced_key(amounts, k):
    comp = Composition({e: Fraction(v) for e, v in amounts.items()})
    assert comp.scaled(k).reduced_key() == comp.reduced_key()
    assert comp.scaled(k).weights == pytest.approx(comp.weights)


@given(st.dictionaries(_symbols, st.integers(1, 12), min_size=1, max_size=5))
def test_formula_round_trip(amounts):
    comp = Composition({e: Fraction(v) for e, v in amounts.items()})
    assert parse_formula(comp.formula()).amounts == comp.amounts
