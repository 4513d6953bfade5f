import pytest

from archtrap import corpus
from archtrap.dsl import parse_spec
from archtrap.normalize import (
    NotNormalizable,
    build_base,
    canonical_signature,
    check_assumption1,
    isolate_instance_atoms,
    normalize,
)

EXPECTED_RULES = {
    "ring": 4,
    "token-ring": 3,
    "star": 3,
    "ring-star": 3,
    "alt-philo-sym": 4,
    "alt-philo-asym": 4,
    "sync-philo": 4,
    "tree-dfs": 3,
    "tree-back-root": 3,
    "tree-linked-leaves": 3,
}

EXPECTED_PROFILES = {
    "ring": {"Chain": {1, 2}},
    "token-ring": {"Seg": {1}},
    "star": {"Slaves": {1}},
    "ring-star": {"Slaves": {1}},
    "tree-dfs": {"Sub": {1}},
    "tree-back-root": {"Sub": {1}},
    "tree-linked-leaves": {"Node": {1}},
}


def test_rule_counts(systems):
    for name, want in EXPECTED_RULES.items():
        _spec, _base, norm, _prof = systems[name]
        assert len(norm.rules) == want, name


def test_instantiation_profiles(systems):
    for name, want in EXPECTED_PROFILES.items():
        _spec, _base, _norm, prof = systems[name]
        for pred, positions in want.items():
            assert set(prof[pred]) == positions, (name, pred)


def test_base_root_is_synthetic(systems):
    for name, (spec, base, _n, _p) in systems.items():
        assert base.rule(1).head.kind == "root", name
        assert base.rule(1).head.base == spec.root, name


def test_each_normalized_body_has_one_instance(systems):
    for name, (_s, _b, norm, _p) in systems.items():
        for i in range(2, len(norm.rules) + 1):
            body = norm.rule(i).body
            from archtrap.terms import instance_atoms

            assert len(instance_atoms(body)) <= 1, (name, i)


def test_isolation_alone_bounds_instance_atoms(systems):
    for name, (_s, base, _n, _p) in systems.items():
        iso = isolate_instance_atoms(base)
        from archtrap.terms import instance_atoms

        for i in range(1, len(iso.rules) + 1):
            assert len(instance_atoms(iso.rule(i).body)) <= 1, (name, i)


def test_normalize_idempotent(systems):
    for name, (_s, _b, norm, _p) in systems.items():
        again, _prof = normalize(norm)
        assert canonical_signature(again) == canonical_signature(norm), name


def test_assumption1_holds_on_corpus(systems):
    for name, (_s, _b, norm, _p) in systems.items():
        report = check_assumption1(norm)
        assert report.ok, (name, report)


def test_not_normalizable():
    # both branches rewrite to an instance of the same variable
    src = """
component C { ports p; states s init; rule s -p-> s; }
A() <- new x . < p(x) > ( B(x), B(x) );
B(x) <- C(x);
root A();
check deadlock;
"""
    with pytest.raises(NotNormalizable):
        normalize(build_base(parse_spec(src)))


def test_dropped_variable_rejected():
    src = """
component C { ports p; states s init; rule s -p-> s; }
A() <- new x . new y . < p(x) > ( C(x) );
root A();
check deadlock;
"""
    with pytest.raises(NotNormalizable):
        normalize(build_base(parse_spec(src)))


def test_normalized_source_reparses(systems):
    for name, (_s, _b, norm, _p) in systems.items():
        text = norm.to_source()
        assert text.strip(), name
        # subscripted heads print as plain identifiers usable in the DSL
        assert "<-" in text
