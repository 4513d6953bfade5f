"""Second-order formulas characterizing rewriting trees and their systems.

Naming scheme for the emitted variables: U1..UN carry rule labels, Z1..ZK
instance sets per component type, <prefix>_<state> one node set per state
(prefixes Xs, Ys1, Ys2, Vs1, Vs2 for the quantifier copies), and
R<tag>_up|dn<rule>_<var> the run labels of an embedded path automaton.
All names are deterministic functions of their subject, so two builds of
the same system emit byte-identical text.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional, Union

from .dsl import ComponentType, DeadlockQuery, PatternQuery, Spec
from .normalize import RewritingSystem
from .pathauto import DOWN, build_path_automaton
from .rewriting import (
    GroundSystem,
    RewritingTree,
    branching_degree,
    tree_to_param_sets,
)
from .terms import Apply, Var, instance_atoms, pred_occurrences, subterms
from .wsks import (
    EpsTerm,
    Eq,
    Formula,
    Mem,
    SuccTerm,
    VarTerm,
    WsksFormula,
    conj,
    disj,
    exists_fo,
    exists_so,
    forall_fo,
    forall_so,
    free_fo_vars,
    free_so_vars,
    iff,
    implies,
    neg,
)


class UnsupportedQuery(Exception):
    """A pattern query references a state no component type declares."""


def _var(name: str) -> VarTerm:
    return VarTerm(name)


def _succ(index: int, name: str) -> SuccTerm:
    return SuccTerm(index, VarTerm(name))


@dataclass(frozen=True)
class VariableLayout:
    """Deterministic variable names for one normalized system."""

    n_rules: int
    kappa: int
    components: tuple[ComponentType, ...]

    @staticmethod
    def for_system(system: RewritingSystem) -> "VariableLayout":
        if system.spec is None:
            raise ValueError("system carries no component declarations")
        return VariableLayout(
            n_rules=len(system.rules),
            kappa=branching_degree(system),
            components=tuple(system.spec.components),
        )

    def u(self, index: int) -> str:
        return f"U{index}"

    def u_vars(self) -> list[str]:
        return [self.u(i) for i in range(1, self.n_rules + 1)]

    def z(self, index: int) -> str:
        return f"Z{index}"

    def z_vars(self) -> list[str]:
        return [self.z(j) for j in range(1, len(self.components) + 1)]

    def states(self) -> list[str]:
        return [s for c in self.components for s in c.states]

    def state_var(self, prefix: str, state: str) -> str:
        return f"{prefix}_{state}"

    def state_vars(self, prefix: str) -> list[str]:
        return [self.state_var(prefix, s) for s in self.states()]

    def owner(self, state: str) -> ComponentType:
        for c in self.components:
            if state in c.states:
                return c
        raise UnsupportedQuery(f"unknown state: {state}")

    def run_var(self, tag: str, state: tuple) -> str:
        d, rule, var = state
        arrow = "dn" if d == DOWN else "up"
        return f"R{tag}_{arrow}{rule}_{var}"


# ---------------------------------------------------------------------------
# tree-shape formulas


def _rtree(system: RewritingSystem, lay: VariableLayout) -> Formula:
    n = lay.n_rules
    kappa = lay.kappa
    x = "x"
    occs = [pred_occurrences(r.body) for r in system.rules]

    pairwise = [
        disj([neg(Mem(_var(x), lay.u(i))), neg(Mem(_var(x), lay.u(j)))])
        for i in range(1, n + 1)
        for j in range(i + 1, n + 1)
    ]
    root = iff(Mem(_var(x), lay.u(1)), Eq(_var(x), EpsTerm()))
    labels = forall_fo(x, conj(pairwise + [root]))

    # a labeled child forces a parent labeled by a rule whose occurrence
    # at that position has the child's head
    parent_parts = []
    for i in range(1, n + 1):
        for ell in range(kappa):
            parents = [
                j
                for j in range(1, n + 1)
                if ell < len(occs[j - 1])
                and i in system.rules_for(occs[j - 1][ell].pred)
            ]
            parent_parts.append(
                implies(
                    Mem(_succ(ell, x), lay.u(i)),
                    disj([Mem(_var(x), lay.u(j)) for j in parents]),
                )
            )
    parent_closure = forall_fo(x, conj(parent_parts))

    child_parts = []
    for j in range(1, n + 1):
        for ell, occ in enumerate(occs[j - 1]):
            children = list(system.rules_for(occ.pred))
            child_parts.append(
                implies(
                    Mem(_var(x), lay.u(j)),
                    disj([Mem(_succ(ell, x), lay.u(i)) for i in children]),
                )
            )
    child_closure = forall_fo(x, conj(child_parts))

    return conj([labels, parent_closure, child_closure])


def _inst(system: RewritingSystem, lay: VariableLayout) -> Formula:
    x = "x"
    parts = []
    for idx, comp in enumerate(lay.components, start=1):
        owners = [
            j
            for j, rule in enumerate(system.rules, start=1)
            if any(a.ctype == comp.name for a in instance_atoms(rule.body))
        ]
        parts.append(
            iff(
                Mem(_var(x), lay.z(idx)),
                disj([Mem(_var(x), lay.u(j)) for j in owners]),
            )
        )
    return forall_fo(x, conj(parts))


def _config(lay: VariableLayout, x_prefix: str) -> Formula:
    x = "x"
    states = lay.states()
    pairwise = [
        disj(
            [
                neg(Mem(_var(x), lay.state_var(x_prefix, s))),
                neg(Mem(_var(x), lay.state_var(x_prefix, t))),
            ]
        )
        for i, s in enumerate(states)
        for t in states[i + 1 :]
    ]
    covered = iff(
        disj([Mem(_var(x), lay.state_var(x_prefix, s)) for s in states]),
        disj([Mem(_var(x), z) for z in lay.z_vars()]),
    )
    return forall_fo(x, conj(pairwise + [covered]))


def _init(lay: VariableLayout, prefix: str) -> Formula:
    x = "x"
    parts = []
    inits = set()
    for idx, comp in enumerate(lay.components, start=1):
        inits.add(comp.init)
        parts.append(
            iff(
                Mem(_var(x), lay.z(idx)),
                Mem(_var(x), lay.state_var(prefix, comp.init)),
            )
        )
    for s in lay.states():
        if s not in inits:
            parts.append(neg(Mem(_var(x), lay.state_var(prefix, s))))
    return forall_fo(x, conj(parts))


# ---------------------------------------------------------------------------
# path formulas


def _path_body(
    system: RewritingSystem,
    lay: VariableLayout,
    r1: int,
    z1: str,
    r2: int,
    z2: str,
    x: str,
    y: str,
    tag: str,
) -> Formula:
    """Exists-quantified run labeling: the automaton as a formula."""
    auto = build_path_automaton(system, r1, z1, r2, z2)
    adj: dict = {}
    for (q1, _a, _d, q2) in auto.transitions:
        adj.setdefault(q1, set()).add(q2)
    reach = set(auto.initial)
    stack = list(auto.initial)
    while stack:
        q = stack.pop()
        for q2 in adj.get(q, ()):
            if q2 not in reach:
                reach.add(q2)
                stack.append(q2)
    states = sorted(reach)
    svar = {q: lay.run_var(tag, q) for q in states}
    trans = [t for t in auto.transitions if t[0] in reach and t[3] in reach]

    z = f"z{tag}"
    w = f"w{tag}"
    parts: list[Formula] = []

    pairwise = [
        disj([neg(Mem(_var(z), svar[q1])), neg(Mem(_var(z), svar[q2]))])
        for i, q1 in enumerate(states)
        for q2 in states[i + 1 :]
    ]
    if pairwise:
        parts.append(forall_fo(z, conj(pairwise)))

    parts.append(disj([Mem(_var(x), svar[q]) for q in sorted(auto.initial & reach)]))
    parts.append(disj([Mem(_var(y), svar[q]) for q in sorted(auto.final & reach)]))

    for q in states:
        downs = sorted(
            (a, q2) for (q1, a, d, q2) in trans if q1 == q and d == DOWN
        )
        ups = sorted((a, q2) for (q1, a, d, q2) in trans if q1 == q and d != DOWN)
        options = [Mem(_succ(a, z), svar[q2]) for a, q2 in downs] + [
            exists_fo(
                w, conj([Eq(SuccTerm(a, _var(w)), _var(z)), Mem(_var(w), svar[q2])])
            )
            for a, q2 in ups
        ]
        parts.append(
            forall_fo(
                z,
                implies(
                    conj([neg(Eq(_var(z), _var(y))), Mem(_var(z), svar[q])]),
                    disj(options),
                ),
            )
        )

    for q2 in states:
        downs = sorted(
            (a, q1) for (q1, a, d, qq) in trans if qq == q2 and d == DOWN
        )
        ups = sorted((a, q1) for (q1, a, d, qq) in trans if qq == q2 and d != DOWN)
        options = [
            exists_fo(
                w, conj([Eq(SuccTerm(a, _var(w)), _var(z)), Mem(_var(w), svar[q1])])
            )
            for a, q1 in downs
        ] + [Mem(_succ(a, z), svar[q1]) for a, q1 in ups]
        parts.append(
            forall_fo(
                z,
                implies(
                    conj([neg(Eq(_var(z), _var(x))), Mem(_var(z), svar[q2])]),
                    disj(options),
                ),
            )
        )

    # run labels must sit on nodes the tree labels with the state's rule
    for q in states:
        parts.append(
            forall_fo(
                z, implies(Mem(_var(z), svar[q]), Mem(_var(z), lay.u(q[1])))
            )
        )

    return exists_so([svar[q] for q in states], conj(parts))


# ---------------------------------------------------------------------------
# the interaction formula


def _rule_interactions(body) -> list[tuple]:
    """Port-atom products of every architecture in the body, first-seen order."""
    out: list[tuple] = []
    for t in subterms(body):
        if isinstance(t, Apply):
            for prod in t.arch.products:
                if prod not in out:
                    out.append(prod)
    return out


def _flow(
    system: RewritingSystem,
    lay: VariableLayout,
    x_prefix: str,
    y_prefix: str,
) -> Formula:
    spec = system.spec
    states = lay.states()
    instance_rules: list[tuple[int, str, str]] = []  # (rule idx, ctype, var)
    for j, rule in enumerate(system.rules, start=1):
        for atom in instance_atoms(rule.body):
            if isinstance(atom.arg, Var):
                instance_rules.append((j, atom.ctype, atom.arg.name))

    disjuncts = []
    counter = 0
    for i, rule in enumerate(system.rules, start=1):
        for prod in _rule_interactions(rule.body):
            participants = []
            ok = True
            for atom in prod:
                owner = spec.port_owner(atom.port)
                tr = owner.transition_for(atom.port) if owner else None
                if tr is None or not isinstance(atom.arg, Var):
                    ok = False
                    break
                participants.append((atom.port, atom.arg.name, owner, tr))
            if not ok:
                continue  # a port no transition carries can never fire
            counter += 1
            tag = str(counter)
            ys = [f"y{tag}_{k}" for k in range(len(participants) + 1)]
            parts: list[Formula] = [Mem(_var(ys[0]), lay.u(i))]
            for k, (port, varname, owner, tr) in enumerate(participants, start=1):
                options = [
                    _path_body(
                        system, lay, i, varname, j, zvar,
                        x=ys[0], y=ys[k], tag=f"{tag}_{k}_{j}",
                    )
                    for (j, ctype, zvar) in instance_rules
                    if ctype == owner.name
                ]
                parts.append(disj(options))
            p = f"p{tag}"
            pin_parts = []
            for s in states:
                pre_ks = [k for k, (_, _, _, tr) in enumerate(participants, 1) if tr.source == s]
                post_ks = [k for k, (_, _, _, tr) in enumerate(participants, 1) if tr.target == s]
                pin_parts.append(
                    iff(
                        Mem(_var(p), lay.state_var(x_prefix, s)),
                        disj([Eq(_var(p), _var(ys[k])) for k in pre_ks]),
                    )
                )
                pin_parts.append(
                    iff(
                        Mem(_var(p), lay.state_var(y_prefix, s)),
                        disj([Eq(_var(p), _var(ys[k])) for k in post_ks]),
                    )
                )
            parts.append(forall_fo(p, conj(pin_parts)))
            body: Formula = conj(parts)
            for yv in reversed(ys):
                body = exists_fo(yv, body)
            disjuncts.append(body)
    return disj(disjuncts)


def _inter(lay: VariableLayout, a_prefix: str, b_prefix: str, x: str) -> Formula:
    return exists_fo(
        x,
        disj(
            [
                conj(
                    [
                        Mem(_var(x), lay.state_var(a_prefix, s)),
                        Mem(_var(x), lay.state_var(b_prefix, s)),
                    ]
                )
                for s in lay.states()
            ]
        ),
    )


def _trap(
    system: RewritingSystem,
    lay: VariableLayout,
    subject_prefix: str,
    inner1: str,
    inner2: str,
) -> Formula:
    flow = _flow(system, lay, inner1, inner2)
    body = implies(
        conj([flow, _inter(lay, subject_prefix, inner1, "xt1")]),
        _inter(lay, subject_prefix, inner2, "xt2"),
    )
    return forall_so(lay.state_vars(inner1) + lay.state_vars(inner2), body)


def _trapinv(system: RewritingSystem, lay: VariableLayout, x_prefix: str) -> Formula:
    marked = conj(
        [
            _init(lay, "Ys1"),
            _trap(system, lay, "Ys2", "Vs1", "Vs2"),
            _inter(lay, "Ys1", "Ys2", "xm1"),
        ]
    )
    invariant = forall_so(
        lay.state_vars("Ys1") + lay.state_vars("Ys2"),
        implies(marked, _inter(lay, x_prefix, "Ys2", "xm2")),
    )
    return exists_so(
        lay.z_vars(),
        conj([_inst(system, lay), _config(lay, x_prefix), invariant]),
    )


def _deadlock(system: RewritingSystem, lay: VariableLayout, x_prefix: str) -> Formula:
    flow = _flow(system, lay, "Ys1", "Ys2")
    xd = "xd"
    stuck = exists_fo(
        xd,
        disj(
            [
                conj(
                    [
                        Mem(_var(xd), lay.state_var("Ys1", s)),
                        neg(Mem(_var(xd), lay.state_var(x_prefix, s))),
                    ]
                )
                for s in lay.states()
            ]
        ),
    )
    return forall_so(
        lay.state_vars("Ys1") + lay.state_vars("Ys2"), implies(flow, stuck)
    )


def _pattern(lay: VariableLayout, query: PatternQuery, x_prefix: str) -> Formula:
    for ctype, state in query.atoms:
        owner = lay.owner(state)
        if owner.name != ctype:
            raise UnsupportedQuery(
                f"state {state} does not belong to component type {ctype}"
            )
    names = [f"xq{k}" for k in range(len(query.atoms))]
    parts: list[Formula] = [
        Mem(_var(names[k]), lay.state_var(x_prefix, state))
        for k, (_, state) in enumerate(query.atoms)
    ]
    if query.distinct:
        for a in range(len(names)):
            for b in range(a + 1, len(names)):
                parts.append(neg(Eq(_var(names[a]), _var(names[b]))))
    body: Formula = conj(parts)
    for nm in reversed(names):
        body = exists_fo(nm, body)
    return body


# ---------------------------------------------------------------------------
# public builders


def build_rtree(system: RewritingSystem) -> WsksFormula:
    lay = VariableLayout.for_system(system)
    return WsksFormula(lay.kappa, _rtree(system, lay))


def build_inst(system: RewritingSystem) -> WsksFormula:
    lay = VariableLayout.for_system(system)
    return WsksFormula(lay.kappa, _inst(system, lay))


def build_config(system: RewritingSystem, x_prefix: str = "Xs") -> WsksFormula:
    lay = VariableLayout.for_system(system)
    return WsksFormula(lay.kappa, _config(lay, x_prefix))


def build_init(system: RewritingSystem, prefix: str = "Xs") -> WsksFormula:
    lay = VariableLayout.for_system(system)
    return WsksFormula(lay.kappa, _init(lay, prefix))


def build_flow(
    system: RewritingSystem, x_prefix: str = "Xs", y_prefix: str = "Ys"
) -> WsksFormula:
    lay = VariableLayout.for_system(system)
    return WsksFormula(lay.kappa, _flow(system, lay, x_prefix, y_prefix))


def build_path_formula(
    system: RewritingSystem, r1: int, z1: str, r2: int, z2: str
) -> WsksFormula:
    """Free variables x, y and the rule-label sets."""
    lay = VariableLayout.for_system(system)
    return WsksFormula(
        lay.kappa, _path_body(system, lay, r1, z1, r2, z2, "x", "y", "")
    )


def build_trap(system: RewritingSystem, subject_prefix: str = "Xs") -> WsksFormula:
    lay = VariableLayout.for_system(system)
    return WsksFormula(lay.kappa, _trap(system, lay, subject_prefix, "Ys1", "Ys2"))


def build_trapinv(system: RewritingSystem, x_prefix: str = "Xs") -> WsksFormula:
    lay = VariableLayout.for_system(system)
    return WsksFormula(lay.kappa, _trapinv(system, lay, x_prefix))


def build_deadlock(system: RewritingSystem, x_prefix: str = "Xs") -> WsksFormula:
    lay = VariableLayout.for_system(system)
    return WsksFormula(lay.kappa, _deadlock(system, lay, x_prefix))


def build_pattern(
    system: RewritingSystem, query: PatternQuery, x_prefix: str = "Xs"
) -> WsksFormula:
    lay = VariableLayout.for_system(system)
    return WsksFormula(lay.kappa, _pattern(lay, query, x_prefix))


def build_safe(
    system: RewritingSystem, query: Union[DeadlockQuery, PatternQuery]
) -> WsksFormula:
    lay = VariableLayout.for_system(system)
    if isinstance(query, PatternQuery):
        bad = _pattern(lay, query, "Xs")
    else:
        bad = _deadlock(system, lay, "Xs")
    body = conj(
        [
            _rtree(system, lay),
            exists_so(
                lay.state_vars("Xs"),
                conj([_trapinv(system, lay, "Xs"), bad]),
            ),
        ]
    )
    got_so = free_so_vars(body)
    want_so = set(lay.u_vars())
    assert got_so == want_so, f"free set variables {got_so} != {want_so}"
    assert not free_fo_vars(body), "no free node variables expected"
    return WsksFormula(lay.kappa, body)


# ---------------------------------------------------------------------------
# valuation bridges (tree / ground system -> variable assignments)


def tree_valuation(system: RewritingSystem, tree: RewritingTree) -> dict:
    lay = VariableLayout.for_system(system)
    sets = tree_to_param_sets(system, tree)
    return {lay.u(i): sets[i - 1] for i in range(1, lay.n_rules + 1)}


def instance_valuation(system: RewritingSystem, gs: GroundSystem) -> dict:
    lay = VariableLayout.for_system(system)
    val = {}
    for idx, comp in enumerate(lay.components, start=1):
        val[lay.z(idx)] = frozenset(
            node for node, ct in gs.instances.items() if ct == comp.name
        )
    return val


def config_valuation(
    system: RewritingSystem, config: dict, prefix: str = "Xs"
) -> dict:
    """State sets of one configuration; every state variable is bound."""
    lay = VariableLayout.for_system(system)
    val = {lay.state_var(prefix, s): set() for s in lay.states()}
    for node, state in config.items():
        val[lay.state_var(prefix, state)].add(node)
    return {k: frozenset(v) for k, v in val.items()}


def state_universes(
    system: RewritingSystem, gs: GroundSystem, prefixes: Iterable[str]
) -> dict:
    """Narrow per-variable subset universes: nodes of the owning type."""
    lay = VariableLayout.for_system(system)
    by_type = {c.name: set() for c in lay.components}
    for node, ct in gs.instances.items():
        by_type[ct].add(node)
    out = {}
    for prefix in prefixes:
        for comp in lay.components:
            for s in comp.states:
                out[lay.state_var(prefix, s)] = frozenset(by_type[comp.name])
    return out
