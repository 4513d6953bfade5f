import pytest
from hypothesis import given, settings, strategies as st

from archtrap import corpus
from archtrap.rewriting import characteristic_term, enumerate_trees, ground_system
from archtrap.terms import (
    Apply,
    Ident,
    Instance,
    NotFlattenable,
    Nu,
    PortAtom,
    Var,
    alpha_canonical,
    apply_substitution,
    arch_semantics,
    flatten,
    flatten_steps,
    free_vars,
    make_arch,
    terms_alpha_equal,
)


def test_make_arch_canonical():
    a = make_arch([[PortAtom("p", Var("x")), PortAtom("q", Var("y"))]])
    b = make_arch([[PortAtom("q", Var("y")), PortAtom("p", Var("x"))]] * 2)
    assert a == b


def test_arch_semantics_ground():
    i1, i2 = Ident("x", ""), Ident("y", "0")
    arch = make_arch([[PortAtom("p", i1), PortAtom("q", i2)], [PortAtom("r", i1)]])
    assert arch_semantics(arch) == frozenset(
        {frozenset({("p", i1), ("q", i2)}), frozenset({("r", i1)})}
    )


# small random predicate-free terms over a fixed alphabet
_vars = st.sampled_from(["x", "y", "z"])


def _terms(depth=3):
    leaf = st.builds(Instance, st.sampled_from(["C", "D"]), _vars.map(Var))
    if depth == 0:
        return leaf

    def arch(args):
        return make_arch([[PortAtom("p", args[0])], [PortAtom("q", a) for a in args]])

    apply_ = st.builds(
        lambda subs, names: Apply(arch([Var(n) for n in names]), tuple(subs)),
        st.lists(_terms(depth - 1), min_size=1, max_size=2),
        st.lists(_vars, min_size=1, max_size=2),
    )
    nu = st.builds(lambda v, t: Nu(v, t), _vars, _terms(depth - 1))
    return st.one_of(leaf, apply_, nu)


@settings(max_examples=80, deadline=None)
@given(_terms(), st.dictionaries(_vars, st.builds(Ident, st.just("a"), st.sampled_from(["", "0"])), max_size=2),
       st.dictionaries(_vars, st.builds(Ident, st.just("b"), st.sampled_from(["", "1"])), max_size=2))
def test_substitution_composes(term, s1, s2):
    merged = dict(s2)
    merged.update(s1)  # s1 positions become idents, untouched by s2
    once = apply_substitution(apply_substitution(term, s1), s2)
    assert once == apply_substitution(term, merged)


@settings(max_examples=80, deadline=None)
@given(_terms())
def test_alpha_canonical_idempotent(term):
    c = alpha_canonical(term)
    assert alpha_canonical(c) == c
    assert terms_alpha_equal(term, c)


def test_alpha_equal_detects_renaming():
    t1 = Nu("u", Instance("C", Var("u")))
    t2 = Nu("w", Instance("C", Var("w")))
    t3 = Nu("w", Instance("D", Var("w")))
    assert terms_alpha_equal(t1, t2)
    assert not terms_alpha_equal(t1, t3)


def test_flatten_rejects_predicates(norm):
    system = norm("ring")
    with pytest.raises(NotFlattenable):
        flatten(system.rule(1).body)


def _ground_terms(name, max_nodes):
    system = corpus.load_normalized(name)
    for tree in enumerate_trees(system, max_nodes):
        yield system, tree, characteristic_term(system, tree)


@pytest.mark.parametrize("name", ["ring", "tll", "sync-philo"])
def test_flatten_matches_ground_architecture(name):
    """Flattening merges every interaction and instance exactly once.

    The ground system keys identifiers by instantiating node, so the two
    sides are compared through identifier-anonymous profiles.
    """
    for system, tree, term in _ground_terms(name, 6):
        flat = flatten(term)
        core = flat
        while isinstance(core, Nu):
            core = core.body
        gs = ground_system(system, tree)
        got = sorted(
            sorted(p for p, _a in inter) for inter in arch_semantics(core.arch)
        )
        want = sorted(
            sorted(p for p, _n in inter) for inter in gs.architecture
        )
        assert got == want
        assert sorted(i.ctype for i in core.subterms) == sorted(
            gs.instances.values()
        )


@pytest.mark.parametrize("name", ["ring", "tll"])
def test_flatten_confluent(name):
    """Any single merge/hoist step preserves the canonical form."""
    for _system, _tree, term in _ground_terms(name, 5):
        canon = flatten(term)
        steps = flatten_steps(term)
        assert steps, "ground terms of nontrivial trees admit a rewrite"
        for stepped in steps:
            assert terms_alpha_equal(flatten(stepped), canon)
        assert terms_alpha_equal(flatten(canon), canon)


def test_free_vars():
    t = Nu("x", Apply(make_arch([[PortAtom("p", Var("x")), PortAtom("q", Var("y"))]]),
                      (Instance("C", Var("x")),)))
    assert free_vars(t) == frozenset({"y"})
