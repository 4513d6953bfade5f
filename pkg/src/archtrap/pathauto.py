"""Variable-instantiation path automata.

For two (rule, variable) pairs, the automaton accepts exactly the
direction words of tree paths along which the two variables resolve to
the same identifier.  Words are read over letters (occurrence index,
up|down); states track a rule, one of its body variables, and a travel
direction.  Ascent may switch to descent, never the reverse.
"""
from __future__ import annotations

import threading
from dataclasses import dataclass
from typing import Iterable, Optional

from .normalize import RewritingSystem
from .rewriting import RewritingTree
from .terms import Ident, Var, bound_vars, free_vars, pred_occurrences

UP = "up"
DOWN = "down"

State = tuple[str, int, str]  # (direction, 1-based rule index, variable)
Letter = tuple[int, str]  # (occurrence index, direction)


class UnknownVariable(Exception):
    pass


class NodeAbsent(Exception):
    pass


@dataclass(frozen=True)
class DirectionPath:
    source: str
    steps: tuple[Letter, ...]


@dataclass(frozen=True)
class PathAutomaton:
    states: frozenset
    initial: frozenset
    final: frozenset
    transitions: frozenset  # of (state, occurrence index, direction, state)

    def step(self, current: frozenset, letter: Letter) -> frozenset:
        alpha, d = letter
        return frozenset(
            q2 for (q1, a, dd, q2) in self.transitions
            if q1 in current and a == alpha and dd == d
        )


def _body_vars(system: RewritingSystem, index: int) -> frozenset[str]:
    rule = system.rule(index)
    return free_vars(rule.body) | frozenset(bound_vars(rule.body))


def _build_delta(system: RewritingSystem) -> frozenset:
    """Global transition set; only initial and final states vary per query."""
    delta = set()
    for ip, rule in enumerate(system.rules, start=1):
        for alpha, occ in enumerate(pred_occurrences(rule.body)):
            for ic in system.rules_for(occ.pred):
                params = system.rule(ic).params
                for j, arg in enumerate(occ.args):
                    if not isinstance(arg, Var):
                        continue
                    yj = arg.name
                    xj = params[j]
                    delta.add(((DOWN, ip, yj), alpha, DOWN, (DOWN, ic, xj)))
                    delta.add(((UP, ic, xj), alpha, UP, (UP, ip, yj)))
                    delta.add(((UP, ic, xj), alpha, UP, (DOWN, ip, yj)))
    return frozenset(delta)


_lock = threading.Lock()


def _tables(system: RewritingSystem) -> dict:
    with _lock:
        tab = getattr(system, "_pathauto", None)
        if tab is None:
            tab = {"delta": _build_delta(system), "autos": {}}
            system._pathauto = tab
        return tab


def build_path_automaton(
    system: RewritingSystem, r1: int, z1: str, r2: int, z2: str
) -> PathAutomaton:
    """Automaton tracking variable z1 of rule r1 to z2 of rule r2.

    Cached per system and query.  Raises UnknownVariable when zi does not
    occur in the body of rule ri.
    """
    for r, z in ((r1, z1), (r2, z2)):
        if not 1 <= r <= len(system.rules):
            raise UnknownVariable(f"no rule {r}")
        if z not in _body_vars(system, r):
            raise UnknownVariable(f"variable {z} does not occur in rule {r}")
    tab = _tables(system)
    key = (r1, z1, r2, z2)
    with _lock:
        cached = tab["autos"].get(key)
    if cached is not None:
        return cached
    delta = tab["delta"]
    states = set()
    for (q1, _a, _d, q2) in delta:
        states.add(q1)
        states.add(q2)
    initial = frozenset({(UP, r1, z1), (DOWN, r1, z1)})
    final = frozenset({(DOWN, r2, z2)})
    auto = PathAutomaton(frozenset(states) | initial | final, initial, final, delta)
    with _lock:
        tab["autos"][key] = auto
    return auto


def tree_path_directions(tree: RewritingTree, w1: str, w2: str) -> DirectionPath:
    """Direction word of the unique simple path from w1 to w2."""
    for w in (w1, w2):
        if w not in tree:
            raise NodeAbsent(w or "eps")
    k = 0
    while k < min(len(w1), len(w2)) and w1[k] == w2[k]:
        k += 1
    lcp = w1[:k]
    steps: list[Letter] = []
    u = w1
    while u != lcp:
        steps.append((int(u[-1]), UP))
        u = u[:-1]
    for c in w2[len(lcp):]:
        steps.append((int(c), DOWN))
    return DirectionPath(w1, tuple(steps))


def accepts(auto: PathAutomaton, path, tree: Optional[RewritingTree] = None) -> bool:
    """Nondeterministic simulation by stepping the reachable state set.

    A run lives on the nodes of a tree path, so when the tree is given
    each state's rule component is pinned to the label of the node under
    it.  Without a tree this is plain word membership, which can accept
    more: distinct rules of one predicate are then indistinguishable.
    """
    steps = path.steps if isinstance(path, DirectionPath) else tuple(path)
    node: Optional[str] = None
    current = auto.initial
    if tree is not None:
        if not isinstance(path, DirectionPath):
            raise ValueError("tree-constrained acceptance needs a DirectionPath")
        node = path.source
        if node not in tree:
            raise NodeAbsent(node or "eps")
        current = frozenset(q for q in current if q[1] == tree.label(node))
    for letter in steps:
        current = auto.step(current, letter)
        if tree is not None:
            alpha, d = letter
            if d == UP:
                if not node or int(node[-1]) != alpha:
                    raise NodeAbsent(node or "eps")
                node = node[:-1]
            else:
                node = node + str(alpha)
            if node not in tree:
                raise NodeAbsent(node or "eps")
            current = frozenset(q for q in current if q[1] == tree.label(node))
        if not current:
            return False
    return bool(current & auto.final)


def same_identifier_oracle(
    system: RewritingSystem,
    tree: RewritingTree,
    at1: tuple[str, str],
    at2: tuple[str, str],
) -> bool:
    """Do (node, var) occurrences denote one identifier in the ground term?

    Follows the characteristic-term substitution chain upward until the
    variable reaches its binder; independent of the automata.
    """

    def resolve(w: str, z: str) -> tuple[str, str]:
        rule = system.rule(tree.label(w))
        if z in bound_vars(rule.body):
            return (z, w)
        if z in rule.params:
            if not w:
                raise UnknownVariable(f"parameter {z} at the root has no source")
            parent = w[:-1]
            alpha = int(w[-1])
            occ = pred_occurrences(system.rule(tree.label(parent)).body)[alpha]
            arg = occ.args[rule.params.index(z)]
            if isinstance(arg, Ident):
                return (arg.var, arg.node)
            return resolve(parent, arg.name)
        raise UnknownVariable(f"variable {z} does not occur in rule at {w or 'eps'}")

    for w, _z in (at1, at2):
        if w not in tree:
            raise NodeAbsent(w or "eps")
    return resolve(*at1) == resolve(*at2)


def accepting_endpoints(
    system: RewritingSystem,
    tree: RewritingTree,
    r1: int,
    z1: str,
    r2: int,
    z2: str,
) -> list[tuple[str, str]]:
    """All node pairs (w1, w2) labeled (r1, r2) whose path word is accepted."""
    auto = build_path_automaton(system, r1, z1, r2, z2)
    sources = [w for w in tree.nodes if tree.label(w) == r1]
    targets = [w for w in tree.nodes if tree.label(w) == r2]
    out = []
    for w1 in sources:
        for w2 in targets:
            if accepts(auto, tree_path_directions(tree, w1, w2), tree):
                out.append((w1, w2))
    return sorted(out)


def delta_shape_ok(auto: PathAutomaton) -> bool:
    """Descent never turns back up, and finals are descent states."""
    for (q1, _a, d, _q2) in auto.transitions:
        if q1[0] == DOWN and d == UP:
            return False
    return all(q[0] == DOWN for q in auto.final)


def _dfa_reach(auto: PathAutomaton, alphabet: list[Letter]):
    """Subset-construction DFA states reachable from the initial set."""
    start = auto.initial
    seen = {start}
    frontier = [start]
    while frontier:
        s = frontier.pop()
        for letter in alphabet:
            t = auto.step(s, letter)
            if t not in seen:
                seen.add(t)
                frontier.append(t)
    return seen


def language_equal(
    a: PathAutomaton, b: PathAutomaton, alphabet: Iterable[Letter]
) -> bool:
    """Word-for-word equality of the two languages over the alphabet."""
    letters = sorted(set(alphabet))
    seen = {(a.initial, b.initial)}
    frontier = [(a.initial, b.initial)]
    while frontier:
        sa, sb = frontier.pop()
        if bool(sa & a.final) != bool(sb & b.final):
            return False
        for letter in letters:
            nxt = (a.step(sa, letter), b.step(sb, letter))
            if nxt not in seen:
                seen.add(nxt)
                frontier.append(nxt)
    return True
