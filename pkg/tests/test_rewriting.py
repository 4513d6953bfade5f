from collections import Counter

import pytest

from archtrap.corpus import load_system
from archtrap.rewriting import (
    DoubleInstantiation,
    RewritingTree,
    characteristic_term,
    check_assumption1_dynamic,
    count_trees,
    enumerate_trees,
    ground_system,
    param_sets_to_tree,
    tree_json,
    tree_to_param_sets,
)


def test_ring_tree_ladder(norm):
    trees = list(enumerate_trees(norm("ring"), 5))
    assert [t.size for t in trees] == [3, 4, 5]
    assert count_trees(norm("ring"), 5) == 3


def test_tll_tree_census(norm):
    sizes = Counter(t.size for t in enumerate_trees(norm("tll"), 7))
    assert dict(sizes) == {3: 1, 5: 2, 7: 5}
    assert count_trees(norm("tll"), 7) == 8


def test_tll_balanced_tree_exists(norm):
    shapes = [
        set(t.nodes) for t in enumerate_trees(norm("tll"), 7) if t.size == 7
    ]
    assert {"", "0", "1", "00", "01", "10", "11"} in shapes


def test_tll_size7_ground_shape(norm):
    system = norm("tll")
    for tree in enumerate_trees(system, 7):
        if tree.size != 7:
            continue
        gs = ground_system(system, tree)
        assert Counter(gs.instances.values()) == {"NType": 3, "LType": 4}
        assert len(gs.architecture) == 7
        # the four leaves form one cycle along lout -> lin
        links = {}
        for inter in gs.architecture:
            ports = dict((p, n) for p, n in inter)
            if set(ports) == {"lout", "lin"}:
                links[ports["lout"]] = ports["lin"]
        assert len(links) == 4
        node = next(iter(links))
        seen = []
        for _ in range(4):
            seen.append(node)
            node = links[node]
        assert node == seen[0] and len(set(seen)) == 4


def test_enumeration_sorted_and_unique(norm):
    for name in ("ring", "tll", "sync-philo"):
        trees = list(enumerate_trees(norm(name), 8))
        assert all(a.size <= b.size for a, b in zip(trees, trees[1:])), name
        assert len({t.entries for t in trees}) == len(trees), name
        assert count_trees(norm(name), 8) == len(trees), name


def test_base_ring_unfoldings_not_node_keyable(systems):
    _spec, base, _norm, _prof = systems["ring"]
    for tree in enumerate_trees(base, 4):
        with pytest.raises(DoubleInstantiation):
            ground_system(base, tree)


def test_characteristic_terms_single_instantiation(norm):
    for name in ("ring", "tll", "tree-dfs"):
        system = norm(name)
        for tree in enumerate_trees(system, 6):
            assert check_assumption1_dynamic(system, tree) == (), name


def test_param_sets_roundtrip(norm):
    system = norm("tll")
    for tree in enumerate_trees(system, 7):
        sets = tree_to_param_sets(system, tree)
        assert param_sets_to_tree(system, sets) == tree


def test_tree_json_stable(norm):
    system = norm("ring")
    tree = next(iter(enumerate_trees(system, 4)))
    import json

    assert json.dumps(tree_json(system, tree), sort_keys=True) == json.dumps(
        tree_json(system, tree), sort_keys=True
    )
    payload = tree_json(system, tree)
    assert set(payload) == {"nodes", "labels", "instances", "interactions"}


def test_invalid_tree_rejected_at_use(norm):
    from archtrap.rewriting import Incompatible

    system = norm("ring")
    rootless = RewritingTree.make({"0": 4})
    with pytest.raises((Incompatible, KeyError)):
        characteristic_term(system, rootless)
    dangling = RewritingTree.make({"": 1})  # occurrence without a child
    with pytest.raises(Incompatible):
        characteristic_term(system, dangling)


def test_characteristic_term_is_predicate_free(norm):
    from archtrap.terms import PredAtom, subterms

    system = norm("token-ring")
    for tree in enumerate_trees(system, 6):
        term = characteristic_term(system, tree)
        assert not any(isinstance(t, PredAtom) for t in subterms(term))
