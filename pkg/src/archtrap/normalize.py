"""Rewriting systems and their normalized form.

A rewriting system is the rule list r1..rN, where r1 is a synthetic
nullary rule holding the behavioral term of interest (the root rule's
body, inlined).  Normalization subscripts each predicate with the set of
parameter positions its unfolding instantiates, after first isolating
instance atoms so that each body holds at most one.  The result makes
instantiation statically predictable: every bound variable is
instantiated exactly once in every complete unfolding.
"""
from __future__ import annotations

import itertools
from collections import Counter
from dataclasses import dataclass, field
from typing import Optional

from .dsl import Diagnostic, Spec, validate_spec
from .terms import (
    Apply,
    Instance,
    Nu,
    PredAtom,
    Term,
    Var,
    alpha_canonical,
    bound_vars,
    instance_atoms,
    pred_occurrences,
)


class InvalidSpec(Exception):
    def __init__(self, diagnostics: list[Diagnostic]):
        super().__init__("; ".join(str(d) for d in diagnostics))
        self.diagnostics = tuple(diagnostics)


class NotNormalizable(Exception):
    def __init__(self, rule: str, detail: str):
        super().__init__(f"rule {rule}: {detail}")
        self.rule = rule
        self.detail = detail


@dataclass(frozen=True)
class PredSym:
    """Predicate symbol, possibly subscripted with an instantiation profile.

    kind is one of "user", "root" (the synthetic top rule head), "wrap"
    (instance-atom isolation helper, base names the component type) and
    "alt" (indirection when the top term admits several instantiations).
    """

    base: str
    profile: Optional[frozenset[int]]
    kind: str = "user"

    def __str__(self) -> str:
        if self.kind == "root":
            return f"{self.base}0"
        if self.kind == "wrap":
            name = f"Wrap{self.base}"
        elif self.kind == "alt":
            name = f"{self.base}Alt"
        else:
            name = self.base
        if self.profile is None:
            return name
        return name + "_" + "".join(str(i) for i in sorted(self.profile))


@dataclass(frozen=True)
class NRule:
    head: PredSym
    params: tuple[str, ...]
    body: Term


@dataclass(eq=False)
class RewritingSystem:
    rules: tuple[NRule, ...]
    spec: Optional[Spec] = None
    # achievable instantiation profiles per unsubscripted predicate;
    # populated on normalized systems
    profiles: Optional[dict[PredSym, frozenset[frozenset[int]]]] = None
    _by_head: dict[PredSym, tuple[int, ...]] = field(init=False, repr=False)

    def __post_init__(self):
        by_head: dict[PredSym, list[int]] = {}
        for i, r in enumerate(self.rules, start=1):
            by_head.setdefault(r.head, []).append(i)
        self._by_head = {h: tuple(ix) for h, ix in by_head.items()}

    def rule(self, index: int) -> NRule:
        """1-based rule lookup; index 1 is the synthetic top rule."""
        return self.rules[index - 1]

    def rules_for(self, head: PredSym) -> tuple[int, ...]:
        return self._by_head.get(head, ())

    def to_source(self) -> str:
        from .dsl import format_term

        lines = []
        for r in self.rules:
            params = ", ".join(r.params)
            lines.append(f"{r.head}({params}) <- {format_term(r.body)};")
        return "\n".join(lines) + "\n"


def _map_atoms(term: Term, pred_fn, inst_fn) -> Term:
    """Rebuild a term, transforming each atom; indices count in preorder."""
    state = {"pred": 0, "inst": 0}

    def go(t: Term) -> Term:
        if isinstance(t, PredAtom):
            k = state["pred"]
            state["pred"] += 1
            return pred_fn(k, t)
        if isinstance(t, Instance):
            k = state["inst"]
            state["inst"] += 1
            return inst_fn(k, t)
        if isinstance(t, Apply):
            return Apply(t.arch, tuple(go(s) for s in t.subterms))
        if isinstance(t, Nu):
            return Nu(t.var, go(t.body))
        raise TypeError(f"not a term: {t!r}")

    return go(term)


def _convert_body(body: Term, to_sym) -> Term:
    return _map_atoms(
        body,
        lambda _k, a: PredAtom(to_sym(a.pred), a.args),
        lambda _k, a: a,
    )


def build_base(spec: Spec) -> RewritingSystem:
    """The system r1..rN for a validated spec, r1 holding the root body."""
    diags = validate_spec(spec)
    if diags:
        raise InvalidSpec(diags)

    def to_sym(pred: object) -> PredSym:
        return pred if isinstance(pred, PredSym) else PredSym(str(pred), None, "user")

    user_rules = tuple(
        NRule(PredSym(r.head, None, "user"), r.params, _convert_body(r.body, to_sym))
        for r in spec.rules
    )
    root_sym = PredSym(spec.root, None, "root")
    root_bodies = [r.body for r in user_rules if r.head.base == spec.root]
    extra: tuple[NRule, ...] = ()
    if len(root_bodies) == 1:
        r1 = NRule(root_sym, (), root_bodies[0])
    else:
        alt = PredSym(spec.root, None, "alt")
        r1 = NRule(root_sym, (), PredAtom(alt, ()))
        extra = tuple(NRule(alt, (), b) for b in root_bodies)
    return RewritingSystem((r1,) + user_rules + extra, spec)


def isolate_instance_atoms(system: RewritingSystem) -> RewritingSystem:
    """Leave at most one instance atom per body, wrapping the rest.

    The first instance atom of each body stays; every later one B(z) is
    replaced by the occurrence WrapB(z) of a shared per-type rule
    WrapB(x) <- B(x).  Idempotent.
    """
    wrapped_types: set[str] = set()
    new_rules: list[NRule] = []
    existing_wrap = {r.head.base for r in system.rules if r.head.kind == "wrap"}
    for r in system.rules:
        if len(instance_atoms(r.body)) <= 1:
            new_rules.append(r)
            continue

        def inst_fn(k: int, atom: Instance) -> Term:
            if k == 0:
                return atom
            wrapped_types.add(atom.ctype)
            return PredAtom(PredSym(atom.ctype, None, "wrap"), (atom.arg,))

        body = _map_atoms(r.body, lambda _k, a: a, inst_fn)
        new_rules.append(NRule(r.head, r.params, body))

    order: dict[str, int] = {}
    if system.spec is not None:
        order = {c.name: i for i, c in enumerate(system.spec.components)}
    for ctype in sorted(wrapped_types - existing_wrap, key=lambda c: (order.get(c, 0), c)):
        new_rules.append(
            NRule(PredSym(ctype, None, "wrap"), ("x",), Instance(ctype, Var("x")))
        )
    return RewritingSystem(tuple(new_rules), system.spec)


def _refresh_syms(system: RewritingSystem) -> RewritingSystem:
    """Treat already subscripted heads as opaque so normalize can re-run."""

    def refresh(sym: object) -> PredSym:
        if not isinstance(sym, PredSym):
            return PredSym(str(sym), None, "user")
        if sym.profile is None:
            return sym
        return PredSym(str(sym), None, sym.kind)

    rules = tuple(
        NRule(refresh(r.head), r.params, _convert_body(r.body, refresh))
        for r in system.rules
    )
    return RewritingSystem(rules, system.spec)


def _valid_assignments(
    rule: NRule, achievable: dict[PredSym, set[frozenset[int]]]
) -> list[tuple[tuple[frozenset[int], ...], frozenset[int]]]:
    """All (occurrence profile choice, head profile) pairs passing the counts.

    A choice is valid when every bound variable of the body ends up
    instantiated exactly once and no parameter more than once; the head
    profile is then forced: the set of positions instantiated exactly once.
    """
    occs = pred_occurrences(rule.body)
    bvars = bound_vars(rule.body)
    candidates = []
    for occ in occs:
        opts = sorted(achievable.get(occ.pred, set()), key=lambda q: tuple(sorted(q)))
        if not opts:
            return []
        candidates.append(opts)
    out = []
    for sigma in itertools.product(*candidates):
        counts: Counter = Counter()
        for inst in instance_atoms(rule.body):
            if isinstance(inst.arg, Var):
                counts[inst.arg.name] += 1
        for occ, q in zip(occs, sigma):
            for j in q:
                a = occ.args[j - 1]
                if isinstance(a, Var):
                    counts[a.name] += 1
        if any(counts[v] != 1 for v in bvars):
            continue
        if any(counts[p] > 1 for p in rule.params):
            continue
        head = frozenset(i for i, p in enumerate(rule.params, start=1) if counts[p] == 1)
        out.append((sigma, head))
    return out


def _subscript_body(body: Term, sigma: tuple[frozenset[int], ...]) -> Term:
    return _map_atoms(
        body,
        lambda k, a: PredAtom(PredSym(a.pred.base, sigma[k], a.pred.kind), a.args),
        lambda _k, a: a,
    )


def normalize(
    system: RewritingSystem,
) -> tuple[RewritingSystem, dict[str, frozenset[int]]]:
    """Construct the normalized system and the instantiation profile map.

    The result subscripts every predicate A with a set I of parameter
    positions; rules of A_I instantiate exactly the positions in I, once
    each, and every bound variable exactly once.  Unfolding semantics is
    preserved up to renaming of identifiers.  The returned map gives, per
    input predicate, the positions instantiated once in every unfolding.

    Raises NotNormalizable when some rule admits no valid profile, e.g.
    a bound variable that is never instantiated or a variable that every
    unfolding instantiates twice.
    """
    base = isolate_instance_atoms(_refresh_syms(system))

    achievable: dict[PredSym, set[frozenset[int]]] = {}
    changed = True
    while changed:
        changed = False
        for r in base.rules:
            for _sigma, head in _valid_assignments(r, achievable):
                if head not in achievable.setdefault(r.head, set()):
                    achievable[r.head].add(head)
                    changed = True

    per_rule: list[list[tuple[tuple[frozenset[int], ...], frozenset[int]]]] = []
    for i, r in enumerate(base.rules, start=1):
        options = _valid_assignments(r, achievable)
        if not options:
            raise NotNormalizable(
                f"{i} ({r.head})",
                "no instantiation profile: some variable is never or doubly instantiated",
            )
        per_rule.append(options)

    r1 = base.rules[0]
    emitted: list[NRule] = []
    root_options = per_rule[0]
    if len(root_options) == 1:
        sigma, head = root_options[0]
        emitted.append(
            NRule(PredSym(r1.head.base, head, r1.head.kind), r1.params, _subscript_body(r1.body, sigma))
        )
    else:
        alt = PredSym(r1.head.base, frozenset(), "alt")
        emitted.append(NRule(PredSym(r1.head.base, frozenset(), r1.head.kind), (), PredAtom(alt, ())))
        for sigma, _head in root_options:
            emitted.append(NRule(alt, (), _subscript_body(r1.body, sigma)))

    wrappers: list[NRule] = []
    for r, options in zip(base.rules[1:], per_rule[1:]):
        target = wrappers if r.head.kind == "wrap" else emitted
        for sigma, head in options:
            target.append(
                NRule(PredSym(r.head.base, head, r.head.kind), r.params, _subscript_body(r.body, sigma))
            )
    emitted.extend(wrappers)

    # keep only rules reachable from the top rule
    by_head: dict[PredSym, list[int]] = {}
    for i, r in enumerate(emitted):
        by_head.setdefault(r.head, []).append(i)
    reach: set[PredSym] = {emitted[0].head}
    frontier = [emitted[0].head]
    while frontier:
        sym = frontier.pop()
        for i in by_head.get(sym, ()):
            for occ in pred_occurrences(emitted[i].body):
                if occ.pred not in reach:
                    reach.add(occ.pred)
                    frontier.append(occ.pred)
    kept = tuple(r for r in emitted if r.head in reach)

    profiles = {sym: frozenset(opts) for sym, opts in achievable.items()}
    result = RewritingSystem(kept, base.spec, profiles)

    upsilon: dict[str, frozenset[int]] = {}
    for sym, opts in achievable.items():
        inter = frozenset.intersection(*opts) if opts else frozenset()
        upsilon[str(sym)] = inter
    return result, upsilon


@dataclass(frozen=True)
class Assumption1Report:
    ok: bool
    violations: tuple[tuple[str, int], ...]  # (variable, 1-based rule index)


def check_assumption1(system: RewritingSystem) -> Assumption1Report:
    """Static check that every variable is instantiated per its subscript.

    In a normalized system each bound variable of each body must be
    instantiated exactly once, and head parameter i exactly once when i
    is in the head profile, never otherwise.  The rewriting layer
    cross-checks the same property dynamically on bounded unfoldings.
    """
    violations: list[tuple[str, int]] = []
    for i, r in enumerate(system.rules, start=1):
        counts: Counter = Counter()
        for inst in instance_atoms(r.body):
            if isinstance(inst.arg, Var):
                counts[inst.arg.name] += 1
        for occ in pred_occurrences(r.body):
            q = occ.pred.profile if isinstance(occ.pred, PredSym) else None
            for j in q or ():
                a = occ.args[j - 1]
                if isinstance(a, Var):
                    counts[a.name] += 1
        for v in bound_vars(r.body):
            if counts[v] != 1:
                violations.append((v, i))
        head_profile = r.head.profile if r.head.profile is not None else frozenset()
        for pos, p in enumerate(r.params, start=1):
            want = 1 if pos in head_profile else 0
            if counts[p] != want:
                violations.append((p, i))
    return Assumption1Report(not violations, tuple(violations))


def canonical_signature(system: RewritingSystem) -> str:
    """Serialization invariant under predicate renaming, for comparing
    systems modulo the names chosen by normalization."""
    from .dsl import format_term
    from .terms import apply_substitution

    sym_ids: dict[object, str] = {}

    def sym_id(sym: object) -> str:
        if sym not in sym_ids:
            sym_ids[sym] = f"P{len(sym_ids)}"
        return sym_ids[sym]

    lines = []
    for r in system.rules:
        params = {p: f"x{k}" for k, p in enumerate(r.params, start=1)}
        body = _convert_body(r.body, sym_id)
        body = apply_substitution(body, {p: Var(n) for p, n in params.items()})
        body = alpha_canonical(body)
        lines.append(f"{sym_id(r.head)}({', '.join(params.values())}) <- {format_term(body)};")
    return "\n".join(lines)
