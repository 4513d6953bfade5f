"""Brute-force semantics on ground systems.

Everything here is desk-scale and exact: explicit configurations,
breadth-first reachability, trap computation by greatest fixpoint, and
safety verdicts that later layers are tested against.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Optional, Union

from .dsl import DeadlockQuery, PatternQuery, Query
from .rewriting import GroundSystem

Config = dict[str, str]
ConfigKey = tuple[tuple[str, str], ...]
# a state token is the pair (instance node, state name)
StateTok = tuple[str, str]
Interaction = frozenset  # of (port, node)


class UnknownInteraction(Exception):
    pass


class Overflow(Exception):
    def __init__(self, limit: int):
        super().__init__(f"exploration limit of {limit} configurations exceeded")
        self.limit = limit


def _key(config: Config) -> ConfigKey:
    return tuple(sorted(config.items()))


def inter_key(inter: Interaction) -> tuple[tuple[str, str], ...]:
    """Canonical (node, port) ordering used everywhere for determinism."""
    return tuple(sorted((node, port) for port, node in inter))


def _ports(sys: GroundSystem, inter: Interaction) -> list[tuple[str, str, str, str]]:
    """(node, port, pre state, post state) for each participant."""
    out = []
    for port, node in inter:
        ctype = sys.spec.component(sys.instances[node])
        t = ctype.transition_for(port)
        out.append((node, port, t.source, t.target))
    return out


def enabled(sys: GroundSystem, config: Config, inter: Interaction) -> bool:
    """An interaction fires only when every participant sits at its pre state."""
    if inter not in sys.architecture:
        raise UnknownInteraction(str(inter_key(inter)))
    return all(config[node] == pre for node, _p, pre, _q in _ports(sys, inter))


def fire(sys: GroundSystem, config: Config, inter: Interaction) -> Config:
    """Participants move to their post states; everyone else idles."""
    if inter not in sys.architecture:
        raise UnknownInteraction(str(inter_key(inter)))
    out = dict(config)
    for node, _p, _pre, post in _ports(sys, inter):
        out[node] = post
    return out


def deadlocked(sys: GroundSystem, config: Config) -> bool:
    return not any(enabled(sys, config, i) for i in sys.architecture)


@dataclass
class ReachResult:
    order: list[ConfigKey]  # BFS discovery order, initial first
    configs: dict[ConfigKey, Config]
    edges: list[tuple[ConfigKey, tuple, ConfigKey]]
    parent: dict[ConfigKey, tuple[ConfigKey, Interaction]]

    def path_to(self, key: ConfigKey) -> list[Interaction]:
        path = []
        while key in self.parent:
            key, inter = self.parent[key]
            path.append(inter)
        return list(reversed(path))


def reachable(sys: GroundSystem, limit: int = 2_000_000) -> ReachResult:
    """BFS closure from the initial configuration; deterministic order."""
    inters = sorted(sys.architecture, key=inter_key)
    init = dict(sys.initial_config)
    k0 = _key(init)
    result = ReachResult([k0], {k0: init}, [], {})
    queue = [k0]
    while queue:
        next_queue = []
        for key in queue:
            config = result.configs[key]
            for inter in inters:
                if not enabled(sys, config, inter):
                    continue
                succ = fire(sys, config, inter)
                sk = _key(succ)
                result.edges.append((key, inter_key(inter), sk))
                if sk not in result.configs:
                    if len(result.configs) >= limit:
                        raise Overflow(limit)
                    result.configs[sk] = succ
                    result.order.append(sk)
                    result.parent[sk] = (key, inter)
                    next_queue.append(sk)
        queue = next_queue
    return result


# ---------------------------------------------------------------------------
# traps


def all_state_tokens(sys: GroundSystem) -> frozenset[StateTok]:
    out = set()
    for node, ct in sys.instances.items():
        for s in sys.spec.component(ct).states:
            out.add((node, s))
    return frozenset(out)


def _pre_set(sys: GroundSystem, inter: Interaction) -> frozenset[StateTok]:
    return frozenset((node, pre) for node, _p, pre, _q in _ports(sys, inter))


def _post_set(sys: GroundSystem, inter: Interaction) -> frozenset[StateTok]:
    return frozenset((node, post) for node, _p, _pre, post in _ports(sys, inter))


def is_trap(sys: GroundSystem, theta: Iterable[StateTok]) -> bool:
    """theta is a trap when every interaction taking from it also feeds it."""
    ts = frozenset(theta)
    for inter in sys.architecture:
        if _pre_set(sys, inter) & ts and not (_post_set(sys, inter) & ts):
            return False
    return True


def is_marked(sys: GroundSystem, theta: Iterable[StateTok]) -> bool:
    """Marked traps contain some initially occupied state."""
    init = {(node, s) for node, s in sys.initial_config.items()}
    return bool(frozenset(theta) & init)


def maximal_trap_within(sys: GroundSystem, allowed: Iterable[StateTok]) -> frozenset[StateTok]:
    """Greatest trap inside `allowed` (traps are closed under union).

    Computed by removing, until fixpoint, the pre states of any
    interaction that takes from the candidate set without feeding it.
    """
    theta = set(allowed)
    pres = [( _pre_set(sys, i), _post_set(sys, i)) for i in sorted(sys.architecture, key=inter_key)]
    changed = True
    while changed and theta:
        changed = False
        for pre, post in pres:
            hit = pre & theta
            if hit and not (post & theta):
                theta -= hit
                changed = True
    return frozenset(theta)


def trap_invariant_holds(sys: GroundSystem, config: Config) -> bool:
    """Does the configuration intersect every marked trap?

    Exactly when the maximal trap avoiding all of the configuration's
    states is unmarked: any avoided marked trap would sit inside that
    complement, and the maximal trap subsumes them all.
    """
    support = {(node, s) for node, s in config.items()}
    complement = all_state_tokens(sys) - support
    return not is_marked(sys, maximal_trap_within(sys, complement))


def enumerate_traps(sys: GroundSystem, marked_only: bool = False) -> list[frozenset[StateTok]]:
    """All nonempty traps by subset enumeration; exponential, small systems only."""
    toks = sorted(all_state_tokens(sys))
    out = []
    for r in range(1, len(toks) + 1):
        for combo in itertools.combinations(toks, r):
            if is_trap(sys, combo) and (not marked_only or is_marked(sys, combo)):
                out.append(frozenset(combo))
    return out


def minimal_marked_traps(sys: GroundSystem) -> list[frozenset[StateTok]]:
    marked = enumerate_traps(sys, marked_only=True)
    out = [t for t in marked if not any(o < t for o in marked)]
    return sorted(out, key=lambda t: (len(t), sorted(t)))


# ---------------------------------------------------------------------------
# safety queries


@dataclass(frozen=True)
class SafeProved:
    method: str  # "trap-invariant" or "exact"


@dataclass(frozen=True)
class UnsafeWitness:
    path: tuple[tuple, ...]  # canonical interaction keys, in firing order
    config: ConfigKey


@dataclass(frozen=True)
class Inconclusive:
    detail: str
    exact_safe: Optional[bool] = None


Verdict = Union[SafeProved, UnsafeWitness, Inconclusive]


def _pattern_matches(sys: GroundSystem, config: Config, query: PatternQuery) -> bool:
    """Is there an assignment of instances to the pattern atoms?

    With `distinct` the assignment must be injective; otherwise each atom
    only needs some instance of the right type in the right state.
    """
    candidates = []
    for ctype, state in query.atoms:
        nodes = [
            n for n, ct in sys.instances.items() if ct == ctype and config[n] == state
        ]
        if not nodes:
            return False
        candidates.append(sorted(nodes))
    if not query.distinct:
        return True

    def assign(i: int, used: set) -> bool:
        if i == len(candidates):
            return True
        for n in candidates[i]:
            if n not in used:
                used.add(n)
                if assign(i + 1, used):
                    return True
                used.remove(n)
        return False

    return assign(0, set())


def is_bad(sys: GroundSystem, config: Config, query: Query) -> bool:
    if isinstance(query, DeadlockQuery):
        return deadlocked(sys, config)
    return _pattern_matches(sys, config, query)


def _all_configs(sys: GroundSystem, limit: int):
    nodes = sorted(sys.instances)
    domains = [sys.spec.component(sys.instances[n]).states for n in nodes]
    total = 1
    for d in domains:
        total *= len(d)
        if total > limit:
            raise Overflow(limit)
    for combo in itertools.product(*domains):
        yield dict(zip(nodes, combo))


def verify_ground(
    sys: GroundSystem,
    query: Query,
    method: str = "both",
    limit: int = 2_000_000,
) -> Verdict:
    """Ground-level safety verdict.

    exact: explore reachable configurations, return a shortest witness
    path to a bad configuration or safety by exhaustion.  trap: show that
    every bad configuration misses some marked trap, scanning the full
    configuration space.  both: a witness wins; otherwise the trap proof
    is preferred and exact exhaustion is reported as the fallback fact.
    """
    if method not in ("exact", "trap", "both"):
        raise ValueError(f"unknown method: {method}")

    exact_safe: Optional[bool] = None
    witness: Optional[UnsafeWitness] = None
    if method in ("exact", "both"):
        reach = reachable(sys, limit)
        for key in reach.order:
            if is_bad(sys, reach.configs[key], query):
                path = tuple(inter_key(i) for i in reach.path_to(key))
                witness = UnsafeWitness(path, key)
                break
        exact_safe = witness is None
        if method == "exact":
            return witness if witness else SafeProved("exact")
        if witness is not None:
            return witness

    trap_ok = True
    trap_detail = ""
    try:
        for config in _all_configs(sys, limit):
            if is_bad(sys, config, query) and trap_invariant_holds(sys, config):
                trap_ok = False
                trap_detail = (
                    "bad configuration not excluded by the trap invariant: "
                    + str(_key(config))
                )
                break
    except Overflow:
        trap_ok = False
        trap_detail = "configuration space too large to scan"

    if trap_ok:
        return SafeProved("trap-invariant")
    if exact_safe:
        return Inconclusive(
            trap_detail + "; exhaustive exploration found no bad configuration",
            True,
        )
    return Inconclusive(trap_detail, exact_safe)
