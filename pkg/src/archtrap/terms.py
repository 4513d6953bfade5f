"""Behavioral terms and interaction architectures.

A behavioral term is one of: a component-instance atom B(a), an architecture
application < Gamma >(b1, ..., bn), a binder new x . b, or a predicate atom
A(a1, ..., am).  Architectures are kept in sum-of-products form: a sum of
interactions, each interaction a product of port atoms.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping, Union


class NotFlattenable(Exception):
    """Raised when a term still contains predicate atoms at merge positions."""


class NonGround(Exception):
    """Raised when architecture semantics is requested with free variables."""

    def __init__(self, var: str):
        super().__init__(f"architecture argument is not ground: {var}")
        self.var = var


# ---------------------------------------------------------------------------
# identifier arguments


@dataclass(frozen=True)
class Var:
    """A variable occurrence (rule parameter or new-bound name)."""

    name: str

    def __repr__(self) -> str:
        return self.name


@dataclass(frozen=True)
class Ident:
    """A concrete identifier: variable `var` bound at tree node `node`."""

    var: str
    node: str

    @property
    def uid(self) -> str:
        return f"{self.var}@{self.node or 'ε'}"

    def __repr__(self) -> str:
        return self.uid


Arg = Union[Var, Ident]


def _arg_key(a: Arg) -> tuple:
    if isinstance(a, Var):
        return (0, a.name, "")
    return (1, a.node, a.var)


# ---------------------------------------------------------------------------
# architectures


@dataclass(frozen=True)
class PortAtom:
    port: str
    arg: Arg

    def __repr__(self) -> str:
        return f"{self.port}({self.arg!r})"


def _atom_key(p: PortAtom) -> tuple:
    return (p.port,) + _arg_key(p.arg)


@dataclass(frozen=True)
class ArchSpec:
    """Sum of products over port atoms, canonically ordered and deduplicated."""

    products: tuple[tuple[PortAtom, ...], ...]

    def __repr__(self) -> str:
        return " + ".join(".".join(repr(a) for a in prod) for prod in self.products)


def make_arch(products: Iterable[Iterable[PortAtom]]) -> ArchSpec:
    """Build the canonical SOP form: atoms and products sorted, duplicates dropped."""
    canon = set()
    for prod in products:
        atoms = tuple(sorted(set(prod), key=_atom_key))
        if atoms:
            canon.add(atoms)
    ordered = tuple(sorted(canon, key=lambda prod: tuple(_atom_key(a) for a in prod)))
    return ArchSpec(ordered)


def arch_atom(port: str, arg: Arg) -> ArchSpec:
    return make_arch([[PortAtom(port, arg)]])


def arch_sum(left: ArchSpec, right: ArchSpec) -> ArchSpec:
    return make_arch(list(left.products) + list(right.products))


def arch_product(left: ArchSpec, right: ArchSpec) -> ArchSpec:
    # pairwise union of interactions
    prods = []
    for p in left.products:
        for q in right.products:
            prods.append(tuple(p) + tuple(q))
    return make_arch(prods)


def arch_args(arch: ArchSpec) -> Iterator[Arg]:
    for prod in arch.products:
        for atom in prod:
            yield atom.arg


def arch_substitute(arch: ArchSpec, sub: Mapping[str, Arg]) -> ArchSpec:
    def rep(a: Arg) -> Arg:
        if isinstance(a, Var) and a.name in sub:
            return sub[a.name]
        return a

    return make_arch(
        [[PortAtom(at.port, rep(at.arg)) for at in prod] for prod in arch.products]
    )


Interaction = frozenset  # of (port, Ident)


def arch_semantics(arch: ArchSpec) -> frozenset:
    """Interaction set denoted by a ground architecture.

    Each product denotes one interaction {(port, ident), ...}; the sum is the
    union.  Raises NonGround on the first variable argument.
    """
    out = set()
    for prod in arch.products:
        inter = set()
        for atom in prod:
            if isinstance(atom.arg, Var):
                raise NonGround(atom.arg.name)
            inter.add((atom.port, atom.arg))
        out.add(frozenset(inter))
    return frozenset(out)


# ---------------------------------------------------------------------------
# terms


@dataclass(frozen=True)
class Instance:
    """Component-instance atom B(a)."""

    ctype: str
    arg: Arg

    def __repr__(self) -> str:
        return f"{self.ctype}({self.arg!r})"


@dataclass(frozen=True)
class PredAtom:
    """Predicate atom A(a1, ..., am); `pred` is a name or a system symbol."""

    pred: object
    args: tuple[Arg, ...]

    def __repr__(self) -> str:
        return f"{self.pred}({', '.join(repr(a) for a in self.args)})"


@dataclass(frozen=True)
class Apply:
    """Architecture application < arch >(subterms...)."""

    arch: ArchSpec
    subterms: tuple["Term", ...]

    def __repr__(self) -> str:
        inner = ", ".join(repr(t) for t in self.subterms)
        return f"<{self.arch!r}>({inner})"


@dataclass(frozen=True)
class Nu:
    """Binder new var . body."""

    var: str
    body: "Term"

    def __repr__(self) -> str:
        return f"new {self.var} . {self.body!r}"


Term = Union[Instance, PredAtom, Apply, Nu]


def subterms(term: Term) -> Iterator[Term]:
    """All subterms in preorder, the term itself included."""
    yield term
    if isinstance(term, Apply):
        for t in term.subterms:
            yield from subterms(t)
    elif isinstance(term, Nu):
        yield from subterms(term.body)


def free_vars(term: Term) -> frozenset[str]:
    """Names of variables with a free occurrence (identifier constants ignored)."""
    if isinstance(term, Instance):
        return frozenset([term.arg.name]) if isinstance(term.arg, Var) else frozenset()
    if isinstance(term, PredAtom):
        return frozenset(a.name for a in term.args if isinstance(a, Var))
    if isinstance(term, Apply):
        out = frozenset(a.name for a in arch_args(term.arch) if isinstance(a, Var))
        for t in term.subterms:
            out |= free_vars(t)
        return out
    if isinstance(term, Nu):
        return free_vars(term.body) - {term.var}
    raise TypeError(f"not a term: {term!r}")


def bound_vars(term: Term) -> list[str]:
    """new-bound names in preorder (duplicates preserved)."""
    out: list[str] = []
    for t in subterms(term):
        if isinstance(t, Nu):
            out.append(t.var)
    return out


def instantiation_counts(term: Term) -> Counter:
    """How many instance atoms mention each argument."""
    counts: Counter = Counter()
    for t in subterms(term):
        if isinstance(t, Instance):
            counts[t.arg] += 1
    return counts


def instantiated_symbols(term: Term) -> frozenset:
    """Arguments that occur in some instance atom B(a)."""
    return frozenset(instantiation_counts(term))


def pred_occurrences(term: Term) -> tuple[PredAtom, ...]:
    """Predicate atoms in preorder; position fixes the child index."""
    return tuple(t for t in subterms(term) if isinstance(t, PredAtom))


def instance_atoms(term: Term) -> tuple[Instance, ...]:
    return tuple(t for t in subterms(term) if isinstance(t, Instance))


def _fresh(base: str, taken: set[str]) -> str:
    if base not in taken:
        return base
    k = 1
    while f"{base}_{k}" in taken:
        k += 1
    return f"{base}_{k}"


def apply_substitution(term: Term, sub: Mapping[str, Arg]) -> Term:
    """Substitute free variable occurrences; capture-avoiding."""
    live = {k: v for k, v in sub.items()}
    if not live:
        return term
    if isinstance(term, Instance):
        a = term.arg
        if isinstance(a, Var) and a.name in live:
            return Instance(term.ctype, live[a.name])
        return term
    if isinstance(term, PredAtom):
        args = tuple(
            live[a.name] if isinstance(a, Var) and a.name in live else a
            for a in term.args
        )
        return PredAtom(term.pred, args)
    if isinstance(term, Apply):
        return Apply(
            arch_substitute(term.arch, live),
            tuple(apply_substitution(t, live) for t in term.subterms),
        )
    if isinstance(term, Nu):
        inner = {k: v for k, v in live.items() if k != term.var}
        if not inner:
            return term
        # rename the binder when a substituted value would be captured
        value_names = {v.name for v in inner.values() if isinstance(v, Var)}
        if term.var in value_names:
            taken = set(value_names) | free_vars(term.body) | set(inner)
            nv = _fresh(term.var, taken)
            body = apply_substitution(term.body, {term.var: Var(nv)})
            return Nu(nv, apply_substitution(body, inner))
        return Nu(term.var, apply_substitution(term.body, inner))
    raise TypeError(f"not a term: {term!r}")


# ---------------------------------------------------------------------------
# flattening (merging nested architecture applications into one)


def _flatten_parts(
    term: Term, taken: set[str]
) -> tuple[list[str], ArchSpec, list[Instance]]:
    """Return (binders, merged arch, instance atoms) for a predicate-free term."""
    if isinstance(term, PredAtom):
        raise NotFlattenable(f"predicate atom remains: {term!r}")
    if isinstance(term, Instance):
        return [], make_arch([]), [term]
    if isinstance(term, Nu):
        name = term.var
        body = term.body
        if name in taken:
            nv = _fresh(name, taken)
            body = apply_substitution(body, {name: Var(nv)})
            name = nv
        taken.add(name)
        binders, arch, insts = _flatten_parts(body, taken)
        return [name] + binders, arch, insts
    if isinstance(term, Apply):
        binders: list[str] = []
        arch = term.arch
        insts: list[Instance] = []
        for sub in term.subterms:
            b, a, i = _flatten_parts(sub, taken)
            binders += b
            arch = arch_sum(arch, a)
            insts += i
        return binders, arch, insts
    raise TypeError(f"not a term: {term!r}")


def flatten(term: Term) -> Term:
    """Canonical form: binders hoisted over a single architecture application.

    Nested applications merge by summing their architectures; inner binders
    are hoisted and renamed apart when names collide.  Raises NotFlattenable
    if a predicate atom remains anywhere in the term.
    """
    taken = set(free_vars(term)) | set(bound_vars(term))
    binders, arch, insts = _flatten_parts(term, taken)
    if not arch.products and len(insts) == 1 and not binders:
        return insts[0]
    core: Term = Apply(arch, tuple(insts))
    for name in reversed(binders):
        core = Nu(name, core)
    return core


def flatten_steps(term: Term) -> list[Term]:
    """All single-step merge/hoist rewrites of the term (for confluence tests)."""
    out: list[Term] = []

    def rebuild_apply(t: Apply, idx: int, new_sub: Term) -> Apply:
        subs = list(t.subterms)
        subs[idx] = new_sub
        return Apply(t.arch, tuple(subs))

    if isinstance(term, Apply):
        for i, sub in enumerate(term.subterms):
            if isinstance(sub, Apply):
                # merge one nested application into the parent
                merged = arch_sum(term.arch, sub.arch)
                subs = list(term.subterms[:i]) + list(sub.subterms) + list(term.subterms[i + 1 :])
                out.append(Apply(merged, tuple(subs)))
            if isinstance(sub, Nu):
                # hoist one binder out of the application
                name = sub.var
                clash = set()
                for j, other in enumerate(term.subterms):
                    if j != i:
                        clash |= free_vars(other)
                clash |= {a.name for a in arch_args(term.arch) if isinstance(a, Var)}
                body = sub.body
                if name in clash:
                    nv = _fresh(name, clash | free_vars(body))
                    body = apply_substitution(body, {name: Var(nv)})
                    name = nv
                out.append(Nu(name, rebuild_apply(term, i, body)))
            for rewritten in flatten_steps(sub):
                out.append(rebuild_apply(term, i, rewritten))
    elif isinstance(term, Nu):
        for rewritten in flatten_steps(term.body):
            out.append(Nu(term.var, rewritten))
    return out


def term_height(term: Term) -> int:
    if isinstance(term, (Instance, PredAtom)):
        return 1
    if isinstance(term, Nu):
        return 1 + term_height(term.body)
    if isinstance(term, Apply):
        return 1 + max((term_height(t) for t in term.subterms), default=0)
    raise TypeError(f"not a term: {term!r}")


def strip_binders(term: Term) -> tuple[list[str], Term]:
    binders = []
    while isinstance(term, Nu):
        binders.append(term.var)
        term = term.body
    return binders, term


def alpha_canonical(term: Term) -> Term:
    """Rename bound variables to a canonical scheme for structural comparison."""

    def walk(t: Term, env: Mapping[str, str], counter: list[int]) -> Term:
        if isinstance(t, Instance):
            a = t.arg
            if isinstance(a, Var) and a.name in env:
                return Instance(t.ctype, Var(env[a.name]))
            return t
        if isinstance(t, PredAtom):
            return PredAtom(
                t.pred,
                tuple(
                    Var(env[a.name]) if isinstance(a, Var) and a.name in env else a
                    for a in t.args
                ),
            )
        if isinstance(t, Apply):
            sub = {k: Var(v) for k, v in env.items()}
            return Apply(
                arch_substitute(t.arch, sub),
                tuple(walk(s, env, counter) for s in t.subterms),
            )
        if isinstance(t, Nu):
            counter[0] += 1
            fresh = f"_b{counter[0]}"
            env2 = dict(env)
            env2[t.var] = fresh
            return Nu(fresh, walk(t.body, env2, counter))
        raise TypeError(f"not a term: {t!r}")

    return walk(term, {}, [0])


def terms_alpha_equal(a: Term, b: Term) -> bool:
    return alpha_canonical(a) == alpha_canonical(b)
