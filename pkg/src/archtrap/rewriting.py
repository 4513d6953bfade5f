"""Rewriting trees and their ground unfoldings.

A rewriting tree is a finite, prefix-closed set of nodes over the
alphabet [0, kappa) together with a rule label per node: the root is
labeled by rule 1, and a node labeled by a rule with n predicate
occurrences has exactly the children w0 .. w(n-1), the i-th labeled by a
rule of the i-th occurrence's predicate.  The characteristic term of a
tree splices all rule bodies, renaming parameters through the occurrence
arguments and turning each bound variable into the identifier (var, node
of its binder).  Grounding flattens that term into component instances
plus an interaction set, re-keyed so identifiers are instance nodes.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterator, Optional

from .dsl import Spec
from .normalize import PredSym, RewritingSystem
from .terms import (
    Apply,
    Arg,
    Ident,
    Instance,
    Nu,
    PredAtom,
    Term,
    Var,
    apply_substitution,
    arch_semantics,
    arch_substitute,
    instantiation_counts,
    pred_occurrences,
    subterms,
)


class DoubleInstantiation(Exception):
    def __init__(self, what: str):
        super().__init__(what)


class DanglingPort(Exception):
    def __init__(self, port: str, ident: str):
        super().__init__(f"port {port} attached to {ident}, which instantiates no component")
        self.port = port
        self.ident = ident


class Incompatible(Exception):
    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


@dataclass(frozen=True)
class RewritingTree:
    entries: tuple[tuple[str, int], ...]  # (node, 1-based rule index), node-sorted

    def __post_init__(self):
        object.__setattr__(self, "_map", dict(self.entries))

    @staticmethod
    def make(labels: dict[str, int]) -> "RewritingTree":
        return RewritingTree(tuple(sorted(labels.items())))

    @property
    def nodes(self) -> tuple[str, ...]:
        return tuple(n for n, _ in self.entries)

    @property
    def size(self) -> int:
        return len(self.entries)

    def label(self, node: str) -> int:
        return self._map[node]

    def __contains__(self, node: str) -> bool:
        return node in self._map


def branching_degree(system: RewritingSystem) -> int:
    """Max predicate occurrences over rule bodies; at least 1."""
    return max(
        [len(pred_occurrences(r.body)) for r in system.rules] + [1]
    )


def _compositions(total: int, parts: int) -> Iterator[tuple[int, ...]]:
    """total as an ordered sum of `parts` positive integers."""
    if parts == 0:
        if total == 0:
            yield ()
        return
    if parts == 1:
        if total >= 1:
            yield (total,)
        return
    for first in range(1, total - parts + 2):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


# a shape is (rule index, tuple of child shapes)
_Shape = tuple


def _materialize(shape: _Shape, node: str, out: dict[str, int]) -> None:
    idx, children = shape
    out[node] = idx
    for k, child in enumerate(children):
        _materialize(child, node + str(k), out)


def enumerate_trees(
    system: RewritingSystem, max_nodes: int = 12
) -> Iterator[RewritingTree]:
    """Every rewriting tree with at most max_nodes nodes, exactly once.

    Trees come in nondecreasing size; within one size the order is
    lexicographic on the sorted (node, label) list.
    """
    memo: dict[tuple[PredSym, int], tuple[_Shape, ...]] = {}

    def rule_shapes(idx: int, n: int) -> Iterator[_Shape]:
        rule = system.rule(idx)
        occs = pred_occurrences(rule.body)
        k = len(occs)
        if k == 0:
            if n == 1:
                yield (idx, ())
            return
        if n < 1 + k:
            return
        for parts in _compositions(n - 1, k):
            pools = [shapes(occ.pred, p) for occ, p in zip(occs, parts)]
            if any(not pool for pool in pools):
                continue
            for combo in itertools.product(*pools):
                yield (idx, combo)

    def shapes(sym: PredSym, n: int) -> tuple[_Shape, ...]:
        key = (sym, n)
        if key not in memo:
            memo[key] = tuple(
                s for idx in system.rules_for(sym) for s in rule_shapes(idx, n)
            )
        return memo[key]

    for n in range(1, max_nodes + 1):
        batch = []
        for shape in rule_shapes(1, n):
            labels: dict[str, int] = {}
            _materialize(shape, "", labels)
            batch.append(RewritingTree.make(labels))
        batch.sort(key=lambda t: t.entries)
        yield from batch


def count_trees(system: RewritingSystem, max_nodes: int) -> int:
    return sum(1 for _ in enumerate_trees(system, max_nodes))


def _strip_to_idents(term: Term, node: str) -> Term:
    """Drop binders, replacing each bound variable by its identifier."""
    if isinstance(term, Nu):
        body = apply_substitution(term.body, {term.var: Ident(term.var, node)})
        return _strip_to_idents(body, node)
    if isinstance(term, Apply):
        return Apply(term.arch, tuple(_strip_to_idents(t, node) for t in term.subterms))
    return term


def characteristic_term(system: RewritingSystem, tree: RewritingTree) -> Term:
    """Predicate-less term of a tree: rule bodies spliced at occurrences.

    Child parameters are renamed to the occurrence arguments; each bound
    variable becomes the identifier (var, node of the binder).
    """

    def build(node: str) -> Term:
        rule = system.rule(tree.label(node))
        body = _strip_to_idents(rule.body, node)
        occs = pred_occurrences(body)
        filled: dict[int, Term] = {}
        for k, occ in enumerate(occs):
            child = node + str(k)
            if child not in tree:
                raise Incompatible(f"node {node or 'eps'} misses child {k}")
            child_rule = system.rule(tree.label(child))
            sub = dict(zip(child_rule.params, occ.args))
            filled[k] = apply_substitution(build(child), sub)

        state = {"k": 0}

        def splice(t: Term) -> Term:
            if isinstance(t, PredAtom):
                k = state["k"]
                state["k"] += 1
                return filled[k]
            if isinstance(t, Apply):
                return Apply(t.arch, tuple(splice(s) for s in t.subterms))
            return t

        return splice(body)

    return build("")


@dataclass(frozen=True)
class GroundSystem:
    """A finite component system: who exists, how they talk, where they start."""

    spec: Spec
    instances: dict[str, str]  # node -> component type name
    architecture: frozenset  # frozenset of frozenset[(port, node)]
    initial_config: dict[str, str]  # node -> state

    def config_key(self, config: dict[str, str]) -> tuple[tuple[str, str], ...]:
        return tuple(sorted(config.items()))


def ground_system(system: RewritingSystem, tree: RewritingTree) -> GroundSystem:
    """Instances, architecture and initial configuration of a tree.

    Identifiers are re-keyed to the nodes whose bodies instantiate them.
    Raises DoubleInstantiation when a node instantiates twice or two
    nodes share an identifier, and DanglingPort when an interaction
    touches an identifier that no node instantiates.
    """
    spec = system.spec
    if spec is None:
        raise ValueError("system carries no component declarations")
    env: dict[str, dict[str, Arg]] = {"": {}}
    instances: dict[str, str] = {}
    owner: dict[str, str] = {}  # identifier uid -> instance node
    raw_interactions: list[frozenset] = []

    def resolve(a: Arg, sub: dict[str, Arg], node: str) -> Ident:
        if isinstance(a, Ident):
            return a
        r = sub.get(a.name, a)
        if isinstance(r, Var):
            raise ValueError(f"unresolved variable {r.name} at node {node or 'eps'}")
        return r

    for node in sorted(tree.nodes, key=lambda w: (len(w), w)):
        rule = system.rule(tree.label(node))
        sub: dict[str, Arg] = dict(env[node])
        body = rule.body
        for t in subterms(body):
            if isinstance(t, Nu):
                sub[t.var] = Ident(t.var, node)
        for t in subterms(body):
            if isinstance(t, Instance):
                ident = resolve(t.arg, sub, node)
                if node in instances:
                    raise DoubleInstantiation(f"node {node or 'eps'} instantiates twice")
                if ident.uid in owner:
                    raise DoubleInstantiation(f"identifier {ident.uid} instantiated twice")
                instances[node] = t.ctype
                owner[ident.uid] = node
            elif isinstance(t, Apply):
                for inter in arch_semantics(arch_substitute(t.arch, sub)):
                    raw_interactions.append(inter)

        for k, occ in enumerate(pred_occurrences(body)):
            child = node + str(k)
            child_rule = system.rule(tree.label(child))
            env[child] = {
                p: resolve(a, sub, node) for p, a in zip(child_rule.params, occ.args)
            }

    interactions = set()
    for inter in raw_interactions:
        rekeyed = []
        for port, ident in inter:
            if ident.uid not in owner:
                raise DanglingPort(port, ident.uid)
            inode = owner[ident.uid]
            ctype = spec.component(instances[inode])
            if ctype is None or port not in ctype.ports:
                raise DanglingPort(port, ident.uid)
            rekeyed.append((port, inode))
        interactions.add(frozenset(rekeyed))

    initial = {
        node: spec.component(ct).init for node, ct in instances.items()
    }
    return GroundSystem(spec, instances, frozenset(interactions), initial)


def check_assumption1_dynamic(
    system: RewritingSystem, tree: RewritingTree
) -> tuple[str, ...]:
    """Identifiers bound somewhere but not instantiated exactly once."""
    term = characteristic_term(system, tree)
    counts = instantiation_counts(term)
    expected = []
    for node in tree.nodes:
        body = system.rule(tree.label(node)).body
        for t in subterms(body):
            if isinstance(t, Nu):
                expected.append(Ident(t.var, node))
    bad = [i.uid for i in expected if counts[i] != 1]
    return tuple(sorted(set(bad)))


def tree_to_param_sets(
    system: RewritingSystem, tree: RewritingTree
) -> tuple[frozenset[str], ...]:
    """T_i = nodes labeled by rule i, as a tuple over all rule indices."""
    sets: list[set[str]] = [set() for _ in system.rules]
    for node, idx in tree.entries:
        sets[idx - 1].add(node)
    return tuple(frozenset(s) for s in sets)


def param_sets_to_tree(
    system: RewritingSystem, sets: tuple[frozenset[str], ...]
) -> RewritingTree:
    """Inverse of tree_to_param_sets; raises Incompatible on bad tuples."""
    if len(sets) != len(system.rules):
        raise Incompatible(f"expected {len(system.rules)} sets, got {len(sets)}")
    labels: dict[str, int] = {}
    for i, nodes in enumerate(sets, start=1):
        for node in nodes:
            if node in labels:
                raise Incompatible(f"node {node or 'eps'} labeled twice")
            labels[node] = i
    if not labels:
        raise Incompatible("empty node set")
    if labels.get("") != 1:
        raise Incompatible("root must carry rule 1")
    if len(sets[0]) != 1:
        raise Incompatible("rule 1 must label exactly the root")
    for node in labels:
        if node and node[:-1] not in labels:
            raise Incompatible(f"node {node} lacks its parent")
    for node, idx in sorted(labels.items()):
        rule = system.rule(idx)
        occs = pred_occurrences(rule.body)
        for k, occ in enumerate(occs):
            child = node + str(k)
            if child not in labels:
                raise Incompatible(f"node {node or 'eps'} misses child {k}")
            child_head = system.rule(labels[child]).head
            if child_head != occ.pred:
                raise Incompatible(
                    f"child {child} is labeled by a rule of {child_head}, not {occ.pred}"
                )
        for child in labels:
            if len(child) == len(node) + 1 and child.startswith(node):
                if not child[-1].isdigit() or int(child[-1]) >= len(occs):
                    raise Incompatible(
                        f"node {node or 'eps'} has excess child {child[-1]}"
                    )
    return RewritingTree.make(labels)


def tree_json(system: RewritingSystem, tree: RewritingTree) -> dict:
    """One-line JSON payload for a tree and its ground architecture.

    Interaction atoms are sorted by (node, port) and interactions
    lexicographically, so output is stable across runs.
    """
    gs = ground_system(system, tree)
    inters = sorted(
        [[port, node] for node, port in sorted((n, p) for p, n in inter)]
        for inter in gs.architecture
    )
    return {
        "nodes": sorted(tree.nodes),
        "labels": {node: idx for node, idx in tree.entries},
        "instances": dict(sorted(gs.instances.items())),
        "interactions": inters,
    }
