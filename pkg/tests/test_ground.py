import pytest

from archtrap.corpus import select_tree
from archtrap.dsl import DeadlockQuery, PatternQuery
from archtrap.ground import (
    Inconclusive,
    Overflow,
    SafeProved,
    UnsafeWitness,
    all_state_tokens,
    deadlocked,
    enumerate_traps,
    is_bad,
    is_trap,
    maximal_trap_within,
    minimal_marked_traps,
    reachable,
    trap_invariant_holds,
    verify_ground,
)
from archtrap.rewriting import ground_system


def _gs(norm, name, size):
    system = norm(name)
    return ground_system(system, select_tree(system, size))


def test_ring_initially_deadlocked(norm):
    gs = _gs(norm, "ring", 3)
    assert deadlocked(gs, gs.initial_config)
    v = verify_ground(gs, DeadlockQuery(), method="exact")
    assert isinstance(v, UnsafeWitness)
    assert v.path == ()  # bad before any step fires


def test_token_ring_live(norm):
    for size in (2, 3, 4):
        gs = _gs(norm, "token-ring", size)
        v = verify_ground(gs, DeadlockQuery(), method="exact")
        assert v == SafeProved("exact"), size


def test_reachable_counts_frozen(norm):
    got = {}
    for size in (2, 3, 4, 5, 6):
        gs = _gs(norm, "sync-philo", size)
        got[size] = len(reachable(gs).configs)
    assert got == {2: 3, 3: 4, 4: 7, 5: 11, 6: 18}


def test_reachable_parents_give_paths(norm):
    gs = _gs(norm, "alt-philo-sym", 2)
    res = reachable(gs)
    for key in res.order:
        path = res.path_to(key)
        cfg = dict(gs.initial_config)
        from archtrap.ground import fire

        for inter in path:
            cfg = fire(gs, cfg, inter)
        assert tuple(sorted(cfg.items())) == key


def test_overflow(norm):
    gs = _gs(norm, "alt-philo-sym", 4)
    with pytest.raises(Overflow):
        reachable(gs, limit=3)


def test_trap_definitions_brute_force(norm):
    """is_trap agrees with the firing-rule definition on every subset."""
    import itertools

    gs = _gs(norm, "ring", 2)
    tokens = sorted(all_state_tokens(gs))
    for r in range(len(tokens) + 1):
        for sub in itertools.combinations(tokens, r):
            theta = frozenset(sub)
            want = True
            for inter in gs.architecture:
                pre, post = set(), set()
                from archtrap.ground import _ports

                for node, _port, p, q in _ports(gs, inter):
                    pre.add((node, p))
                    post.add((node, q))
                if pre & theta and not post & theta:
                    want = False
            assert is_trap(gs, theta) == want


def test_maximal_trap_is_union(norm):
    gs = _gs(norm, "sync-philo", 2)
    tokens = frozenset(all_state_tokens(gs))
    traps = enumerate_traps(gs)
    union = frozenset().union(*traps) if traps else frozenset()
    assert maximal_trap_within(gs, tokens) == union
    for theta in traps:
        assert maximal_trap_within(gs, theta) == theta


def test_minimal_marked_traps_sync2(norm):
    gs = _gs(norm, "sync-philo", 2)
    minimal = minimal_marked_traps(gs)
    assert len(minimal) == 10
    marked = set(enumerate_traps(gs, marked_only=True))
    for th in minimal:
        assert th in marked
        for other in minimal:
            assert not (other < th)


def test_trap_invariant_on_reachable(norm):
    for name in ("ring", "token-ring", "alt-philo-sym"):
        gs = _gs(norm, name, 3)
        res = reachable(gs)
        for cfg in res.configs.values():
            assert trap_invariant_holds(gs, cfg), name


def test_trap_method_verdicts(norm):
    for size in (2, 3, 4):
        v = verify_ground(_gs(norm, "sync-philo", size), DeadlockQuery(), method="trap")
        assert v == SafeProved("trap-invariant"), size
    for size in (3, 4):
        v = verify_ground(_gs(norm, "alt-philo-asym", size), DeadlockQuery(), method="trap")
        assert isinstance(v, Inconclusive), size
        assert v.exact_safe is None


def test_both_prefers_witness_then_trap(norm):
    v = verify_ground(_gs(norm, "alt-philo-sym", 3), DeadlockQuery(), method="both")
    assert isinstance(v, UnsafeWitness)
    v = verify_ground(_gs(norm, "sync-philo", 3), DeadlockQuery(), method="both")
    assert v == SafeProved("trap-invariant")


def test_pattern_query(norm):
    gs = _gs(norm, "ring", 2)
    # both components stuck at q0 initially
    q = PatternQuery((("CType", "q0"), ("CType", "q0")), distinct=True)
    assert is_bad(gs, gs.initial_config, q)
    q3 = PatternQuery((("CType", "q0"),) * 3, distinct=True)
    assert not is_bad(gs, gs.initial_config, q3)  # only two instances exist
    q1 = PatternQuery((("CType", "q1"),), distinct=False)
    assert not is_bad(gs, gs.initial_config, q1)
