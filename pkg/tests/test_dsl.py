import pytest
from hypothesis import given, settings, strategies as st

from archtrap import corpus, dsl

RING_SRC = open(corpus.resolve("ring"), encoding="utf-8").read()


def test_corpus_parses_clean(systems):
    for name, (spec, _b, _n, _p) in systems.items():
        assert not dsl.validate_spec(spec), name


def test_component_fields():
    spec = dsl.parse_spec(RING_SRC)
    (c,) = spec.components
    assert c.name == "CType"
    assert c.ports == ("out", "in")
    assert c.states == ("q0", "q1")
    assert c.init == "q0"
    assert len(c.transitions) == 2
    assert spec.root == "Ring"
    assert spec.queries == (dsl.DeadlockQuery(),)


def test_pattern_query_parses():
    src = RING_SRC.replace(
        "check deadlock;", "check pattern CType@q1, CType@q1 distinct;"
    )
    spec = dsl.parse_spec(src)
    (q,) = spec.queries
    assert q == dsl.PatternQuery((("CType", "q1"), ("CType", "q1")), True)


def test_duplicate_component_rejected():
    src = "component A { ports p; states s init; }\n" * 2 + "A() <- A(); root A();"
    with pytest.raises(dsl.DuplicateName):
        dsl.parse_spec(src)


def test_syntax_error_has_position():
    with pytest.raises(dsl.SyntaxError):
        dsl.parse_spec("component { }")


def test_unknown_port_flagged():
    src = RING_SRC.replace("-out->", "-bogus->", 1)
    issues = dsl.validate_spec(dsl.parse_spec(src))
    assert any(d.code == "UnknownPort" for d in issues)


def test_pretty_print_roundtrip(systems):
    for name, (spec, _b, _n, _p) in systems.items():
        text = dsl.pretty_print(spec)
        again = dsl.parse_spec(text)
        assert dsl.pretty_print(again) == text, name
        assert again.components == spec.components, name
        assert len(again.rules) == len(spec.rules), name


_tokens = RING_SRC.split()


@settings(max_examples=60, deadline=None)
@given(st.integers(min_value=0, max_value=len(_tokens) - 1))
def test_single_token_deletion_never_crashes(drop):
    """A one-token mutation either parses (possibly with issues) or raises
    one of the declared diagnostics, never an internal error."""
    src = " ".join(_tokens[:drop] + _tokens[drop + 1 :])
    try:
        spec = dsl.parse_spec(src)
    except (dsl.SyntaxError, dsl.DuplicateName, dsl.AssumptionViolation):
        return
    dsl.validate_spec(spec)
