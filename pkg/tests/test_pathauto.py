import pytest

from archtrap.pathauto import (
    NodeAbsent,
    UnknownVariable,
    accepting_endpoints,
    accepts,
    build_path_automaton,
    delta_shape_ok,
    same_identifier_oracle,
    tree_path_directions,
)
from archtrap.rewriting import enumerate_trees
from archtrap.terms import bound_vars, free_vars


def _vars(system, i):
    body = system.rule(i).body
    return sorted(free_vars(body) | frozenset(bound_vars(body)))


def _balanced_tll(norm):
    system = norm("tll")
    for t in enumerate_trees(system, 7):
        if set(t.nodes) == {"", "0", "1", "00", "01", "10", "11"}:
            return system, t
    raise AssertionError("balanced shape missing")


def test_delta_shape_all_corpus(systems):
    for name, (_spec, _base, system, _prof) in systems.items():
        for r1 in range(1, len(system.rules) + 1):
            for z1 in _vars(system, r1):
                for r2 in range(1, len(system.rules) + 1):
                    for z2 in _vars(system, r2):
                        auto = build_path_automaton(system, r1, z1, r2, z2)
                        assert delta_shape_ok(auto), (name, r1, z1, r2, z2)


def test_unknown_variable(norm):
    system = norm("ring")
    with pytest.raises(UnknownVariable):
        build_path_automaton(system, 1, "nope", 1, "nope")
    with pytest.raises(UnknownVariable):
        build_path_automaton(system, 99, "x", 1, "x")


def test_direction_words(norm):
    system, bal = _balanced_tll(norm)
    p = tree_path_directions(bal, "00", "11")
    assert p.source == "00"
    assert p.steps == ((0, "up"), (0, "up"), (1, "down"), (1, "down"))
    assert tree_path_directions(bal, "0", "0").steps == ()
    with pytest.raises(NodeAbsent):
        tree_path_directions(bal, "000", "")


def test_tll_leaf_chain_endpoints(norm):
    system, bal = _balanced_tll(norm)
    # the root link reaches exactly the leftmost leaf's first port variable
    assert accepting_endpoints(system, bal, 1, "l", 3, "a") == [("", "00")]
    assert accepting_endpoints(system, bal, 1, "l", 3, "b") == [("", "11")]
    # successive leaves share one identifier, cyclically via the root
    assert accepting_endpoints(system, bal, 3, "b", 3, "a") == [
        ("00", "01"),
        ("01", "10"),
        ("10", "11"),
        ("11", "00"),
    ]


def test_oracle_matches_endpoints(norm):
    system, bal = _balanced_tll(norm)
    assert same_identifier_oracle(system, bal, ("", "l"), ("00", "a"))
    assert same_identifier_oracle(system, bal, ("", "l"), ("11", "b"))
    assert not same_identifier_oracle(system, bal, ("", "l"), ("11", "a"))
    leaves = ["00", "01", "10", "11"]
    got = sorted(
        (w1, w2)
        for w1 in leaves
        for w2 in leaves
        if same_identifier_oracle(system, bal, (w1, "b"), (w2, "a"))
    )
    assert got == accepting_endpoints(system, bal, 3, "b", 3, "a")


def test_zero_length_acceptance(norm):
    system, bal = _balanced_tll(norm)
    auto = build_path_automaton(system, 3, "a", 3, "a")
    assert accepts(auto, tree_path_directions(bal, "00", "00"), bal)
    other = build_path_automaton(system, 3, "a", 3, "b")
    assert not accepts(other, tree_path_directions(bal, "00", "00"), bal)


def test_word_membership_weaker_than_tree_run(norm):
    system, bal = _balanced_tll(norm)
    auto = build_path_automaton(system, 3, "b", 3, "a")
    for w1 in bal.nodes:
        for w2 in bal.nodes:
            path = tree_path_directions(bal, w1, w2)
            if accepts(auto, path, bal):
                assert accepts(auto, path)


def test_accepts_requires_direction_path_with_tree(norm):
    system, bal = _balanced_tll(norm)
    auto = build_path_automaton(system, 3, "b", 3, "a")
    with pytest.raises(ValueError):
        accepts(auto, ((0, "up"),), bal)
