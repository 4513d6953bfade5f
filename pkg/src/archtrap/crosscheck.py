"""Cross-validation suites pitting the symbolic layers against the oracle.

Each check compares two independent computations of the same quantity and
returns a result record with counters; a mismatch count of zero means the
implementations agree everywhere on the swept space.
"""
from __future__ import annotations

import itertools
import time
from dataclasses import dataclass
from typing import Callable, Iterable, Optional

from . import formulas as fml
from .ground import (
    all_state_tokens,
    enumerate_traps,
    maximal_trap_within,
    reachable,
    trap_invariant_holds,
    _ports,
)
from .normalize import RewritingSystem
from .pathauto import (
    _body_vars,
    accepts,
    build_path_automaton,
    same_identifier_oracle,
    tree_path_directions,
)
from .rewriting import (
    RewritingTree,
    characteristic_term,
    enumerate_trees,
    ground_system,
)
from .terms import Apply, Ident, Instance, instance_atoms, pred_occurrences
from .wsks import BoundedEvaluator, StrategyError


@dataclass(frozen=True)
class CheckResult:
    name: str
    ok: bool
    checked: int
    mismatches: int
    elapsed: float
    detail: str = ""
    skipped: int = 0


def _result(
    name: str, checked: int, bad: list, t0: float, skipped: int = 0
) -> CheckResult:
    return CheckResult(
        name=name,
        ok=not bad,
        checked=checked,
        mismatches=len(bad),
        elapsed=time.monotonic() - t0,
        detail="; ".join(str(b) for b in bad[:5]),
        skipped=skipped,
    )


def _queries(system: RewritingSystem) -> list[tuple[int, str, int, str]]:
    out = []
    for r1 in range(1, len(system.rules) + 1):
        for z1 in sorted(_body_vars(system, r1)):
            for r2 in range(1, len(system.rules) + 1):
                for z2 in sorted(_body_vars(system, r2)):
                    out.append((r1, z1, r2, z2))
    return out


def check_flow_contract(system: RewritingSystem, max_nodes: int = 7) -> CheckResult:
    """Bounded models of Flow against the interactions of every ground system."""
    t0 = time.monotonic()
    lay = fml.VariableLayout.for_system(system)
    flow = fml.build_flow(system)
    svars = lay.state_vars("Xs") + lay.state_vars("Ys")
    checked, bad = 0, []
    for tree in enumerate_trees(system, max_nodes):
        gs = ground_system(system, tree)
        val = fml.tree_valuation(system, tree)
        ev = BoundedEvaluator(
            lay.kappa, budget=max_nodes + 2, fo_universe=frozenset(tree.nodes) | {""}
        )
        models = ev.so_models(flow.body, svars, val)
        got = {_freeze(m) for m in models}
        want = set()
        for inter in gs.architecture:
            m = {v: set() for v in svars}
            for node, _port, pre, post in _ports(gs, inter):
                m[lay.state_var("Xs", pre)].add(node)
                m[lay.state_var("Ys", post)].add(node)
            want.add(_freeze(m))
        checked += len(want)
        if got != want:
            bad.append((tree.entries, len(got - want), len(want - got)))
    return _result("flow-contract", checked, bad, t0)


def _freeze(model: dict) -> tuple:
    return tuple(sorted((k, tuple(sorted(v))) for k, v in model.items()))


def check_identifier_lemma(system: RewritingSystem, max_nodes: int = 9) -> CheckResult:
    """Automaton acceptance against the substitution-chain oracle."""
    t0 = time.monotonic()
    checked, bad = 0, []
    for tree in enumerate_trees(system, max_nodes):
        occupied = [
            (w, z) for w in tree.nodes for z in sorted(_body_vars(system, tree.label(w)))
        ]
        for (w1, z1), (w2, z2) in itertools.product(occupied, repeat=2):
            auto = build_path_automaton(
                system, tree.label(w1), z1, tree.label(w2), z2
            )
            got = accepts(auto, tree_path_directions(tree, w1, w2), tree)
            want = same_identifier_oracle(system, tree, (w1, z1), (w2, z2))
            checked += 1
            if got != want:
                bad.append((tree.entries, (w1, z1), (w2, z2), got, want))
    return _result("identifier-lemma", checked, bad, t0)


def check_path_lemma(
    system: RewritingSystem,
    max_nodes: int = 7,
    queries: Optional[list[tuple[int, str, int, str]]] = None,
) -> CheckResult:
    """Bounded satisfaction of the run-label formula against automaton runs."""
    t0 = time.monotonic()
    lay = fml.VariableLayout.for_system(system)
    queries = [
        (q, fml.build_path_formula(system, *q), build_path_automaton(system, *q))
        for q in (queries if queries is not None else _queries(system))
    ]
    checked, bad = 0, []
    for tree in enumerate_trees(system, max_nodes):
        uval = fml.tree_valuation(system, tree)
        ev = BoundedEvaluator(
            lay.kappa, budget=max_nodes + 2, fo_universe=frozenset(tree.nodes) | {""}
        )
        for ((r1, z1, r2, z2), pf, auto) in queries:
            for w1, w2 in itertools.product(tree.nodes, repeat=2):
                got = ev.eval(pf, {**uval, "x": w1, "y": w2})
                want = accepts(auto, tree_path_directions(tree, w1, w2), tree)
                checked += 1
                if got != want:
                    bad.append((tree.entries, (r1, z1, r2, z2), w1, w2, got, want))
    return _result("path-lemma", checked, bad, t0)


def _skeletons(kappa: int, max_nodes: int) -> Iterable[frozenset[str]]:
    """Prefix-closed node sets (tree shapes) up to a size bound."""

    def grow(shape: frozenset[str], frontier: list[str]):
        # branch on the first frontier node: exclude or include it
        if not frontier:
            yield shape
            return
        node, rest = frontier[0], frontier[1:]
        yield from grow(shape, rest)
        if len(shape) < max_nodes:
            children = [node + str(d) for d in range(kappa)]
            yield from grow(shape | {node}, rest + children)

    yield from grow(frozenset({""}), [str(d) for d in range(kappa)])


def check_rtree_characterization(
    system: RewritingSystem, max_nodes: int = 5
) -> CheckResult:
    """RTree satisfaction against tree enumeration, over all labelings."""
    t0 = time.monotonic()
    lay = fml.VariableLayout.for_system(system)
    rt = fml.build_rtree(system)
    valid = {t.entries for t in enumerate_trees(system, max_nodes)}
    n = len(system.rules)
    checked, bad = 0, []
    for shape in _skeletons(lay.kappa, max_nodes):
        nodes = sorted(shape)
        ev = BoundedEvaluator(
            lay.kappa, budget=max_nodes + 2, fo_universe=frozenset(shape)
        )
        for labels in itertools.product(range(1, n + 1), repeat=len(nodes)):
            entries = tuple(sorted(zip(nodes, labels)))
            val = {lay.u(i): frozenset() for i in range(1, n + 1)}
            grouped: dict[int, set] = {}
            for node, lab in entries:
                grouped.setdefault(lab, set()).add(node)
            for lab, ns in grouped.items():
                val[lay.u(lab)] = frozenset(ns)
            got = ev.eval(rt, val)
            want = entries in valid
            checked += 1
            if got != want:
                bad.append((entries, got, want))
    return _result("rtree-characterization", checked, bad, t0)


def check_trap_lemma(
    system: RewritingSystem,
    max_nodes: int = 6,
    compare_formula: bool = True,
    config_cap: int = 4096,
) -> CheckResult:
    """Reachable configurations satisfy the trap invariant; optionally the
    TrapInv formula's accepted set equals the oracle's over all configurations."""
    t0 = time.monotonic()
    lay = fml.VariableLayout.for_system(system)
    tinv = fml.build_trapinv(system) if compare_formula else None
    checked, skipped, bad = 0, 0, []
    for tree in enumerate_trees(system, max_nodes):
        gs = ground_system(system, tree)
        res = reachable(gs)
        for cfg in res.configs.values():
            checked += 1
            if not trap_invariant_holds(gs, cfg):
                bad.append(("reachable-violates-invariant", tree.entries, sorted(cfg.items())))
        if tinv is None:
            continue
        uval = fml.tree_valuation(system, tree)
        sub = fml.state_universes(system, gs, ["Ys1", "Ys2", "Vs1", "Vs2"])
        ev = BoundedEvaluator(
            lay.kappa,
            budget=max_nodes + 2,
            fo_universe=frozenset(tree.nodes) | {""},
            subset_universe=sub,
        )
        nodes = sorted(gs.instances)
        spaces = [sorted(gs.spec.component(gs.instances[n]).states) for n in nodes]
        total = 1
        for s in spaces:
            total *= len(s)
        if total > config_cap:
            skipped += 1
            continue
        for combo in itertools.product(*spaces):
            cfg = dict(zip(nodes, combo))
            val = {**uval, **fml.config_valuation(system, cfg, "Xs")}
            try:
                got = ev.eval(tinv, val)
            except StrategyError:
                # quantifier space beyond the evaluator's cap for this tree
                skipped += 1
                break
            want = trap_invariant_holds(gs, cfg)
            checked += 1
            if got != want:
                bad.append(("formula-vs-oracle", tree.entries, sorted(cfg.items()), got, want))
    return _result("trap-lemma", checked, bad, t0, skipped)


# ---------------------------------------------------------------------------
# normalization preservation


def canonical_ground_term(term) -> tuple:
    """Hashable form of a predicate-less term, identifiers renamed in
    first-occurrence order so that permutation-equivalent terms collide."""
    names: dict[str, str] = {}

    def ident(a: Ident) -> str:
        if a.uid not in names:
            names[a.uid] = f"_i{len(names)}"
        return names[a.uid]

    def walk(t) -> tuple:
        if isinstance(t, Instance):
            return ("inst", t.ctype, ident(t.arg))
        if isinstance(t, Apply):
            arch = tuple(
                tuple((atom.port, ident(atom.arg)) for atom in prod)
                for prod in t.arch.products
            )
            return ("apply", arch, tuple(walk(s) for s in t.subterms))
        raise TypeError(f"unexpected subterm {t!r}")

    return walk(term)


def _canonical_terms(system: RewritingSystem, max_nodes: int) -> dict[int, set]:
    out: dict[int, set] = {}
    for tree in enumerate_trees(system, max_nodes):
        term = characteristic_term(system, tree)
        m = len(instance_atoms(term))
        if m <= max_nodes - 1:
            out.setdefault(m, set()).add(canonical_ground_term(term))
    return out


def check_preservation(
    base: RewritingSystem, norm: RewritingSystem, max_nodes: int = 9
) -> CheckResult:
    """The two systems generate the same ground terms, per instance count.

    Coverage argument: every rule reachable below the root carries at least
    one instance atom (asserted), so a term with m instances comes from a
    tree of at most m+1 nodes on either side.  Comparison is therefore
    exact for all instance counts up to max_nodes - 1.
    """
    t0 = time.monotonic()
    for sys_ in (base, norm):
        inner: set[int] = set()
        for rule in sys_.rules:
            for occ in pred_occurrences(rule.body):
                inner.update(sys_.rules_for(occ.pred))
        for i in sorted(inner):
            if not instance_atoms(sys_.rule(i).body):
                raise ValueError(
                    f"rule {i} has no instance atom; coverage bound does not apply"
                )
    a = _canonical_terms(base, max_nodes)
    b = _canonical_terms(norm, max_nodes)
    checked, bad = 0, []
    for m in sorted(set(a) | set(b)):
        ta, tb = a.get(m, set()), b.get(m, set())
        checked += max(len(ta), len(tb))
        for t in sorted(ta - tb):
            bad.append(("only-in-original", m, t))
        for t in sorted(tb - ta):
            bad.append(("only-in-normalized", m, t))
    return _result("preservation", checked, bad, t0)


def check_trap_fixpoint(
    system: RewritingSystem, max_nodes: int = 9, token_cap: int = 12
) -> CheckResult:
    """Fixpoint maximal traps against exhaustive subset enumeration."""
    t0 = time.monotonic()
    checked, skipped, bad = 0, 0, []
    for tree in enumerate_trees(system, max_nodes):
        gs = ground_system(system, tree)
        toks = sorted(all_state_tokens(gs))
        if len(toks) > token_cap:
            skipped += 1
            continue
        traps = enumerate_traps(gs)
        allowed_sets = [frozenset(toks)]
        allowed_sets += [frozenset(toks) - {t} for t in toks]
        allowed_sets += traps
        for allowed in allowed_sets:
            union: frozenset = frozenset()
            for th in traps:
                if th <= allowed:
                    union |= th
            got = maximal_trap_within(gs, allowed)
            checked += 1
            if got != union:
                bad.append((tree.entries, sorted(allowed), sorted(got), sorted(union)))
    return _result("trap-fixpoint", checked, bad, t0, skipped)


# Registry used by the oracle-check command; (factory, default scope note).
SUITES: dict[str, Callable] = {
    "flow-contract": check_flow_contract,
    "identifier-lemma": check_identifier_lemma,
    "path-lemma": check_path_lemma,
    "rtree-characterization": check_rtree_characterization,
    "trap-lemma": check_trap_lemma,
    "trap-fixpoint": check_trap_fixpoint,
}
