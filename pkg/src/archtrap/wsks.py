"""Weak second-order logic over k-ary tree prefixes.

Formulas are interpreted over nodes of the infinite k-ary tree, written
as digit strings over [0, k).  The bounded evaluator truncates the tree
at a depth budget: first-order variables range over a finite prefix-closed
universe, second-order variables over its subsets.  That evaluation is
exact for the membership-guarded formulas produced by the builders in
this package and a documented under-approximation for arbitrary
second-order quantification.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Union


class BudgetExceeded(Exception):
    """A node in the valuation is too deep for the depth budget."""


class StrategyError(Exception):
    """No exact evaluation strategy applies within the configured limits."""


class UnboundVariable(Exception):
    def __init__(self, name: str):
        super().__init__(f"unbound variable: {name}")
        self.name = name


# ---------------------------------------------------------------------------
# terms


@dataclass(frozen=True)
class EpsTerm:
    """The root node."""

    def __repr__(self) -> str:
        return "eps"


@dataclass(frozen=True)
class VarTerm:
    name: str

    def __repr__(self) -> str:
        return self.name


@dataclass(frozen=True)
class SuccTerm:
    index: int
    arg: "TermAst"

    def __repr__(self) -> str:
        return f"{self.arg!r}.{self.index}"


TermAst = Union[EpsTerm, VarTerm, SuccTerm]


# ---------------------------------------------------------------------------
# formulas


@dataclass(frozen=True)
class TrueF:
    def __repr__(self) -> str:
        return "true"


@dataclass(frozen=True)
class FalseF:
    def __repr__(self) -> str:
        return "false"


@dataclass(frozen=True)
class Eq:
    left: TermAst
    right: TermAst


@dataclass(frozen=True)
class Mem:
    term: TermAst
    svar: str


@dataclass(frozen=True)
class Not:
    body: "Formula"


@dataclass(frozen=True)
class And:
    parts: tuple["Formula", ...]


@dataclass(frozen=True)
class Or:
    parts: tuple["Formula", ...]


@dataclass(frozen=True)
class Implies:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Iff:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class ExistsFO:
    var: str
    body: "Formula"


@dataclass(frozen=True)
class ForallFO:
    var: str
    body: "Formula"


@dataclass(frozen=True)
class ExistsSO:
    var: str
    body: "Formula"


@dataclass(frozen=True)
class ForallSO:
    var: str
    body: "Formula"


Formula = Union[
    TrueF, FalseF, Eq, Mem, Not, And, Or, Implies, Iff,
    ExistsFO, ForallFO, ExistsSO, ForallSO,
]


@dataclass(frozen=True)
class WsksFormula:
    """A formula together with the tree arity it is interpreted over."""

    kappa: int
    body: Formula


# ---------------------------------------------------------------------------
# smart constructors (boolean-constant folding only)

TRUE = TrueF()
FALSE = FalseF()


def conj(parts: Iterable[Formula]) -> Formula:
    out: list[Formula] = []
    for p in parts:
        if isinstance(p, FalseF):
            return FALSE
        if isinstance(p, TrueF):
            continue
        if isinstance(p, And):
            out.extend(p.parts)
        else:
            out.append(p)
    if not out:
        return TRUE
    if len(out) == 1:
        return out[0]
    return And(tuple(out))


def disj(parts: Iterable[Formula]) -> Formula:
    out: list[Formula] = []
    for p in parts:
        if isinstance(p, TrueF):
            return TRUE
        if isinstance(p, FalseF):
            continue
        if isinstance(p, Or):
            out.extend(p.parts)
        else:
            out.append(p)
    if not out:
        return FALSE
    if len(out) == 1:
        return out[0]
    return Or(tuple(out))


def neg(p: Formula) -> Formula:
    if isinstance(p, TrueF):
        return FALSE
    if isinstance(p, FalseF):
        return TRUE
    if isinstance(p, Not):
        return p.body
    return Not(p)


def implies(a: Formula, b: Formula) -> Formula:
    if isinstance(a, TrueF):
        return b
    if isinstance(a, FalseF) or isinstance(b, TrueF):
        return TRUE
    if isinstance(b, FalseF):
        return neg(a)
    return Implies(a, b)


def iff(a: Formula, b: Formula) -> Formula:
    if isinstance(a, TrueF):
        return b
    if isinstance(b, TrueF):
        return a
    if isinstance(a, FalseF):
        return neg(b)
    if isinstance(b, FalseF):
        return neg(a)
    return Iff(a, b)


def exists_fo(var: str, body: Formula) -> Formula:
    return body if isinstance(body, (TrueF, FalseF)) else ExistsFO(var, body)


def forall_fo(var: str, body: Formula) -> Formula:
    return body if isinstance(body, (TrueF, FalseF)) else ForallFO(var, body)


def exists_so(names: Iterable[str], body: Formula) -> Formula:
    for name in reversed(list(names)):
        if isinstance(body, (TrueF, FalseF)):
            return body
        body = ExistsSO(name, body)
    return body


def forall_so(names: Iterable[str], body: Formula) -> Formula:
    for name in reversed(list(names)):
        if isinstance(body, (TrueF, FalseF)):
            return body
        body = ForallSO(name, body)
    return body


# ---------------------------------------------------------------------------
# structural queries


def succ_nesting(formula: Formula) -> int:
    """Deepest successor chain applied to any term."""

    def term_depth(t: TermAst) -> int:
        d = 0
        while isinstance(t, SuccTerm):
            d += 1
            t = t.arg
        return d

    def walk(f: Formula) -> int:
        if isinstance(f, Eq):
            return max(term_depth(f.left), term_depth(f.right))
        if isinstance(f, Mem):
            return term_depth(f.term)
        if isinstance(f, Not):
            return walk(f.body)
        if isinstance(f, (And, Or)):
            return max([walk(p) for p in f.parts] + [0])
        if isinstance(f, (Implies, Iff)):
            return max(walk(f.left), walk(f.right))
        if isinstance(f, (ExistsFO, ForallFO, ExistsSO, ForallSO)):
            return walk(f.body)
        return 0

    return walk(formula)


def _term_vars(t: TermAst) -> frozenset[str]:
    while isinstance(t, SuccTerm):
        t = t.arg
    return frozenset([t.name]) if isinstance(t, VarTerm) else frozenset()


_FV_CACHE: dict[int, tuple[Formula, tuple[str, ...], tuple[str, ...]]] = {}


def _free_vars(f: Formula) -> tuple[tuple[str, ...], tuple[str, ...]]:
    """Sorted (first-order, second-order) free variable names."""
    hit = _FV_CACHE.get(id(f))
    if hit is not None and hit[0] is f:
        return hit[1], hit[2]
    if isinstance(f, (TrueF, FalseF)):
        fo, so = frozenset(), frozenset()
    elif isinstance(f, Eq):
        fo, so = _term_vars(f.left) | _term_vars(f.right), frozenset()
    elif isinstance(f, Mem):
        fo, so = _term_vars(f.term), frozenset([f.svar])
    elif isinstance(f, Not):
        a, b = _free_vars(f.body)
        fo, so = frozenset(a), frozenset(b)
    elif isinstance(f, (And, Or)):
        fo, so = frozenset(), frozenset()
        for p in f.parts:
            a, b = _free_vars(p)
            fo |= frozenset(a)
            so |= frozenset(b)
    elif isinstance(f, (Implies, Iff)):
        a1, b1 = _free_vars(f.left)
        a2, b2 = _free_vars(f.right)
        fo, so = frozenset(a1) | frozenset(a2), frozenset(b1) | frozenset(b2)
    elif isinstance(f, (ExistsFO, ForallFO)):
        a, b = _free_vars(f.body)
        fo, so = frozenset(a) - {f.var}, frozenset(b)
    elif isinstance(f, (ExistsSO, ForallSO)):
        a, b = _free_vars(f.body)
        fo, so = frozenset(a), frozenset(b) - {f.var}
    else:
        raise TypeError(f"not a formula: {f!r}")
    out = (tuple(sorted(fo)), tuple(sorted(so)))
    _FV_CACHE[id(f)] = (f, out[0], out[1])
    return out


def free_fo_vars(f: Formula) -> frozenset[str]:
    return frozenset(_free_vars(f)[0])


def free_so_vars(f: Formula) -> frozenset[str]:
    return frozenset(_free_vars(f)[1])


def formula_size(f: Formula) -> int:
    """Number of AST nodes, terms excluded."""
    if isinstance(f, (TrueF, FalseF, Eq, Mem)):
        return 1
    if isinstance(f, Not):
        return 1 + formula_size(f.body)
    if isinstance(f, (And, Or)):
        return 1 + sum(formula_size(p) for p in f.parts)
    if isinstance(f, (Implies, Iff)):
        return 1 + formula_size(f.left) + formula_size(f.right)
    return 1 + formula_size(f.body)


def expand_conjuncts(f: Formula) -> list[Formula]:
    """Flatten conjunctions, distributing universal quantifiers over them."""
    if isinstance(f, And):
        out = []
        for p in f.parts:
            out.extend(expand_conjuncts(p))
        return out
    if isinstance(f, ForallFO) and isinstance(f.body, And):
        out = []
        for p in f.body.parts:
            out.extend(expand_conjuncts(ForallFO(f.var, p)))
        return out
    return [f]


# ---------------------------------------------------------------------------
# valuations


Node = str
Valuation = Mapping[str, Union[Node, frozenset]]


def _check_node(node: str, kappa: int) -> None:
    for ch in node:
        if not ("0" <= ch < chr(ord("0") + kappa)):
            raise ValueError(f"node {node!r} is not over alphabet [0, {kappa})")


def default_universe(kappa: int, depth: int) -> tuple[str, ...]:
    """All nodes of depth <= depth, ordered by (length, string)."""
    if kappa < 1:
        raise ValueError("kappa must be positive")
    count = depth + 1 if kappa == 1 else (kappa ** (depth + 1) - 1) // (kappa - 1)
    if count > 8192:
        raise ValueError(
            "default universe too large; pass an explicit fo_universe"
        )
    digits = [str(i) for i in range(kappa)]
    out = [""]
    frontier = [""]
    for _ in range(depth):
        frontier = [n + d for n in frontier for d in digits]
        out.extend(frontier)
    return tuple(sorted(out, key=lambda n: (len(n), n)))


class BoundedEvaluator:
    """Finite-prefix evaluation of formulas.

    fo_universe: prefix-closed node set first-order quantifiers range over
    (defaults to all nodes of depth <= budget).  subset_universe: node set,
    or map from variable name to node set, restricting the range of
    enumerated second-order quantifiers; quantifiers whose value is forced
    by a pinning conjunct or enumerable guard ignore it.
    """

    def __init__(
        self,
        kappa: int,
        budget: int,
        fo_universe: Optional[Iterable[str]] = None,
        subset_universe: Union[None, Iterable[str], Mapping[str, Iterable[str]]] = None,
        subset_cap: int = 1 << 20,
    ):
        self.kappa = kappa
        self.budget = budget
        if fo_universe is None:
            self.universe = default_universe(kappa, budget)
        else:
            nodes = set(fo_universe)
            for n in nodes:
                _check_node(n, kappa)
                if n and n[:-1] not in nodes:
                    raise ValueError(f"fo_universe is not prefix-closed at {n!r}")
            if not nodes:
                raise ValueError("fo_universe must contain the root")
            self.universe = tuple(sorted(nodes, key=lambda n: (len(n), n)))
        if subset_universe is None or isinstance(subset_universe, Mapping):
            self.subset_map = dict(subset_universe or {})
            self.subset_default = None
        else:
            self.subset_map = {}
            self.subset_default = frozenset(subset_universe)
        self.subset_cap = subset_cap
        self._memo: dict = {}

    # -- plumbing ----------------------------------------------------------

    def _universe_for(self, var: str) -> tuple[str, ...]:
        u = self.subset_map.get(var)
        if u is None:
            u = self.subset_default
        if u is None:
            return self.universe
        return tuple(sorted(u, key=lambda n: (len(n), n)))

    def _guard_budget(self, formula: Formula, valuation: Valuation) -> None:
        allowed = self.budget - succ_nesting(formula)
        for name, value in valuation.items():
            nodes = [value] if isinstance(value, str) else list(value)
            for n in nodes:
                _check_node(n, self.kappa)
                if len(n) > allowed:
                    raise BudgetExceeded(
                        f"{name} holds node {n!r} deeper than budget "
                        f"{self.budget} minus successor nesting"
                    )

    def _term(self, t: TermAst, env: dict) -> str:
        if isinstance(t, EpsTerm):
            return ""
        if isinstance(t, VarTerm):
            try:
                return env[t.name]
            except KeyError:
                raise UnboundVariable(t.name) from None
        return self._term(t.arg, env) + str(t.index)

    def _slice(self, f: Formula, env: dict):
        fo, so = _free_vars(f)
        try:
            return tuple(env[v] for v in fo), tuple(env[v] for v in so)
        except KeyError as e:
            raise UnboundVariable(e.args[0]) from None

    # -- public API --------------------------------------------------------

    def eval(self, formula: Union[WsksFormula, Formula], valuation: Valuation) -> bool:
        if isinstance(formula, WsksFormula):
            if formula.kappa != self.kappa:
                raise ValueError("formula arity differs from evaluator arity")
            formula = formula.body
        self._guard_budget(formula, valuation)
        env = {k: (v if isinstance(v, str) else frozenset(v)) for k, v in valuation.items()}
        return self._ev(formula, env)

    def so_models(
        self,
        formula: Union[WsksFormula, Formula],
        so_vars: Iterable[str],
        valuation: Optional[Valuation] = None,
    ) -> list[dict[str, frozenset]]:
        """All assignments of so_vars satisfying a pin-shaped formula.

        The formula must be a disjunction of existentially quantified
        conjunctions whose conjuncts pin every requested variable.
        Raises StrategyError otherwise.
        """
        if isinstance(formula, WsksFormula):
            formula = formula.body
        valuation = valuation or {}
        self._guard_budget(formula, valuation)
        env = {k: (v if isinstance(v, str) else frozenset(v)) for k, v in valuation.items()}
        want = tuple(sorted(set(so_vars)))
        models = self._so_models(formula, want, env)
        if models is None:
            raise StrategyError("formula shape does not support model enumeration")
        uniq = {tuple(sorted((k, tuple(sorted(v))) for k, v in m.items())): m for m in models}
        return [uniq[k] for k in sorted(uniq)]

    # -- core recursion ----------------------------------------------------

    def _ev(self, f: Formula, env: dict) -> bool:
        if isinstance(f, TrueF):
            return True
        if isinstance(f, FalseF):
            return False
        if isinstance(f, Eq):
            return self._term(f.left, env) == self._term(f.right, env)
        if isinstance(f, Mem):
            try:
                members = env[f.svar]
            except KeyError:
                raise UnboundVariable(f.svar) from None
            return self._term(f.term, env) in members
        if isinstance(f, Not):
            return not self._ev(f.body, env)
        if isinstance(f, And):
            return all(self._ev(p, env) for p in f.parts)
        if isinstance(f, Or):
            return any(self._ev(p, env) for p in f.parts)
        if isinstance(f, Implies):
            return (not self._ev(f.left, env)) or self._ev(f.right, env)
        if isinstance(f, Iff):
            return self._ev(f.left, env) == self._ev(f.right, env)

        key = (id(f), self._slice(f, env))
        hit = self._memo.get(key)
        if hit is not None and hit[0] is f:
            return hit[1]
        if isinstance(f, ExistsFO):
            out = any(self._ev(f.body, {**env, f.var: v}) for v in self.universe)
        elif isinstance(f, ForallFO):
            out = all(self._ev(f.body, {**env, f.var: v}) for v in self.universe)
        elif isinstance(f, ExistsSO):
            out = self._exists_so(f, env)
        else:
            out = self._forall_so(f, env)
        self._memo[key] = (f, out)
        return out

    # -- second-order strategies --------------------------------------------

    @staticmethod
    def _peel(f: Formula, kind) -> tuple[list[str], Formula]:
        names = []
        while isinstance(f, kind):
            names.append(f.var)
            f = f.body
        return names, f

    def _pin_set(self, pin, env: dict) -> frozenset:
        """Value forced on a variable by a pinning conjunct."""
        var, delta = pin
        if delta is None:
            return frozenset()
        return frozenset(
            v for v in self.universe if self._ev(delta, {**env, var: v})
        )

    @staticmethod
    def _match_pin(f: Formula, candidates: set[str]):
        """Recognize `forall x. X(x) <-> delta` / `forall x. ~X(x)`.

        Returns (set var, quantified var, delta-or-None) or None; delta
        must not mention the pinned variable itself.
        """
        if not isinstance(f, ForallFO):
            return None
        body = f.body
        if isinstance(body, Not) and isinstance(body.body, Mem):
            m = body.body
            if (
                isinstance(m.term, VarTerm)
                and m.term.name == f.var
                and m.svar in candidates
            ):
                return (m.svar, f.var, None)
            return None
        if not isinstance(body, Iff):
            return None
        for m, delta in ((body.left, body.right), (body.right, body.left)):
            if (
                isinstance(m, Mem)
                and isinstance(m.term, VarTerm)
                and m.term.name == f.var
                and m.svar in candidates
                and m.svar not in free_so_vars(delta)
            ):
                return (m.svar, f.var, delta)
        return None

    def _extract_pins(
        self, parts: list[Formula], block: list[str], env: dict
    ) -> tuple[dict, list[Formula], list[str]]:
        """Bind block variables forced by pinning conjuncts.

        Iterates to a fixpoint so pins may reference earlier-pinned
        variables.  Returns (bindings, residual conjuncts, unpinned vars).
        """
        remaining = list(block)
        bound: dict = {}
        parts = list(parts)
        progress = True
        while progress and remaining:
            progress = False
            for p in parts:
                hit = self._match_pin(p, set(remaining))
                if hit is None:
                    continue
                svar, qvar, delta = hit
                if delta is not None:
                    unresolved = free_so_vars(delta) & set(remaining)
                    if unresolved:
                        continue
                env2 = {**env, **bound}
                bound[svar] = self._pin_set((qvar, delta), env2)
                remaining.remove(svar)
                parts.remove(p)
                progress = True
                break
        return bound, parts, remaining

    def _exists_so(self, f: ExistsSO, env: dict) -> bool:
        block, body = self._peel(f, ExistsSO)
        parts = expand_conjuncts(body)
        bound, residual, remaining = self._extract_pins(parts, block, env)
        env = {**env, **bound}
        if not remaining:
            return self._ev(conj(residual), env)
        rest = conj(residual)
        sat = self._cnf_sat(rest, remaining, env)
        if sat is not None:
            return sat
        return self._enumerate(remaining, env, rest, exists=True)

    def _forall_so(self, f: ForallSO, env: dict) -> bool:
        block, body = self._peel(f, ForallSO)
        if isinstance(body, Implies):
            ante = expand_conjuncts(body.left)
            bound, residual, remaining = self._extract_pins(ante, block, env)
            env = {**env, **bound}
            reduced = implies(conj(residual), body.right)
            if not remaining:
                return self._ev(reduced, env)
            got = self._forall_by_models(residual, body.right, remaining, env)
            if got is not None:
                return got
            return self._enumerate(remaining, env, reduced, exists=False)
        return self._enumerate(block, env, body, exists=False)

    def _forall_by_models(
        self, ante_parts: list[Formula], consequent: Formula, block: list[str], env: dict
    ) -> Optional[bool]:
        """Check `forall block. (ante -> consequent)` by enumerating the
        models of an antecedent conjunct that pins every block variable."""
        want = set(block)
        for i, cand in enumerate(ante_parts):
            if not want <= free_so_vars(cand):
                continue
            models = self._so_models_memo(cand, tuple(sorted(want)), env)
            if models is None:
                continue
            others = ante_parts[:i] + ante_parts[i + 1 :]
            for m in models:
                env2 = {**env, **m}
                if all(self._ev(p, env2) for p in others):
                    if not self._ev(consequent, env2):
                        return False
            return True
        return None

    def _so_models_memo(self, f: Formula, want: tuple, env: dict):
        fo, so = _free_vars(f)
        try:
            slice_ = (
                tuple(env[v] for v in fo),
                tuple(env[v] for v in so if v not in want),
            )
        except KeyError as e:
            raise UnboundVariable(e.args[0]) from None
        key = (id(f), want, slice_, "models")
        hit = self._memo.get(key)
        if hit is not None and hit[0] is f:
            return hit[1]
        out = self._so_models(f, want, env)
        self._memo[key] = (f, out)
        return out

    def _so_models(self, f: Formula, want: tuple, env: dict):
        """All assignments of `want` satisfying f, or None if unsupported."""
        if isinstance(f, Or):
            out = []
            for p in f.parts:
                sub = self._so_models(p, want, env)
                if sub is None:
                    return None
                out.extend(sub)
            return out
        if isinstance(f, ExistsFO):
            out = []
            for v in self.universe:
                sub = self._so_models(f.body, want, {**env, f.var: v})
                if sub is None:
                    return None
                out.extend(sub)
            return out
        if isinstance(f, FalseF):
            return []
        parts = expand_conjuncts(f)
        bound, residual, remaining = self._extract_pins(parts, list(want), env)
        if remaining:
            return None
        env2 = {**env, **bound}
        for p in residual:
            if free_so_vars(p) & set(want):
                return None
            if not self._ev(p, env2):
                return []
        return [bound]

    # -- grounding to clauses -----------------------------------------------

    def _cnf_sat(self, f: Formula, block: list[str], env: dict) -> Optional[bool]:
        """Satisfiability of f over the block variables via clause grounding.

        Returns None when f does not ground to clauses (and the caller
        falls back to subset enumeration).
        """
        blockset = set(block)
        clauses = self._clauses(f, blockset, env)
        if clauses is None:
            return None
        return _dpll([c for c in clauses if c is not True])

    def _literals(self, f: Formula, blockset: set, env: dict):
        """f as a disjunction of literals over block atoms; None if not."""
        if isinstance(f, Or):
            out = []
            for p in f.parts:
                sub = self._literals(p, blockset, env)
                if sub is None or sub is True:
                    return sub
                out.extend(sub)
            return out
        if isinstance(f, ExistsFO):
            out = []
            for v in self.universe:
                sub = self._literals(f.body, blockset, {**env, f.var: v})
                if sub is None or sub is True:
                    return sub
                out.extend(sub)
            return out
        if not free_so_vars(f) & blockset:
            return True if self._ev(f, env) else []
        if isinstance(f, And):
            # a guard conjunction: at most one conjunct may touch the block
            live = [i for i, p in enumerate(f.parts) if free_so_vars(p) & blockset]
            if len(live) != 1:
                return None
            for i, p in enumerate(f.parts):
                if i != live[0] and not self._ev(p, env):
                    return []
            return self._literals(f.parts[live[0]], blockset, env)
        if isinstance(f, Not):
            sub = self._literals(f.body, blockset, env)
            if sub is None:
                return None
            if sub is True:
                return []
            if not sub:
                return True
            if len(sub) != 1:
                return None
            (atom, sign) = sub[0]
            return [(atom, not sign)]
        if isinstance(f, Mem) and f.svar in blockset:
            node = self._term(f.term, env)
            if node not in self._members_allowed(f.svar):
                return []
            return [((f.svar, node), True)]
        return None

    def _members_allowed(self, var: str) -> frozenset:
        key = ("allowed", var)
        hit = self._memo.get(key)
        if hit is None:
            hit = (var, frozenset(self._universe_for(var)))
            self._memo[key] = hit
        return hit[1]

    def _clauses(self, f: Formula, blockset: set, env: dict):
        if isinstance(f, And):
            out = []
            for p in f.parts:
                sub = self._clauses(p, blockset, env)
                if sub is None:
                    return None
                out.extend(sub)
            return out
        if isinstance(f, ForallFO):
            out = []
            for v in self.universe:
                sub = self._clauses(f.body, blockset, {**env, f.var: v})
                if sub is None:
                    return None
                out.extend(sub)
            return out
        if isinstance(f, (Implies, Iff)):
            halves = [(f.left, f.right)]
            if isinstance(f, Iff):
                halves.append((f.right, f.left))
            out = []
            for left, right in halves:
                pos_lits = self._literals(right, blockset, env)
                if pos_lits is None:
                    return None
                if pos_lits is True:
                    continue
                ante = self._conj_literals(left, blockset, env)
                if ante is None:
                    return None
                if ante is False:
                    continue
                out.append(
                    frozenset([(a, not s) for (a, s) in ante] + list(pos_lits))
                )
            return out
        lits = self._literals(f, blockset, env)
        if lits is None:
            return None
        if lits is True:
            return []
        return [frozenset(lits)]

    def _conj_literals(self, f: Formula, blockset: set, env: dict):
        """f as a conjunction of literals; False if constant-false."""
        parts = expand_conjuncts(f)
        out = []
        for p in parts:
            sub = self._literals(p, blockset, env)
            if sub is True:
                continue
            if sub is None or len(sub) != 1:
                if sub is not None and not sub:
                    return False
                return None
            out.extend(sub)
        return out

    # -- subset enumeration ---------------------------------------------------

    def _enumerate(self, block: list[str], env: dict, body: Formula, exists: bool) -> bool:
        universes = [self._universe_for(v) for v in block]
        total = 1
        for u in universes:
            total <<= len(u)
            if total > self.subset_cap:
                raise StrategyError(
                    "second-order quantifier space exceeds the enumeration cap; "
                    "pass a narrower subset_universe"
                )

        def rec(i: int, env2: dict) -> bool:
            if i == len(block):
                return self._ev(body, env2)
            items = universes[i]
            for bits in range(1 << len(items)):
                value = frozenset(
                    items[k] for k in range(len(items)) if bits >> k & 1
                )
                got = rec(i + 1, {**env2, block[i]: value})
                if exists and got:
                    return True
                if not exists and not got:
                    return False
            return not exists

        return rec(0, env)


def _dpll(clauses: list[frozenset]) -> bool:
    """Clause satisfiability with unit propagation."""
    assignment: dict = {}

    def propagate(cls: list[frozenset]) -> Optional[list[frozenset]]:
        changed = True
        while changed:
            changed = False
            next_cls = []
            for c in cls:
                lits = []
                satisfied = False
                for (atom, sign) in c:
                    val = assignment.get(atom)
                    if val is None:
                        lits.append((atom, sign))
                    elif val == sign:
                        satisfied = True
                        break
                if satisfied:
                    continue
                if not lits:
                    return None
                if len(lits) == 1:
                    atom, sign = lits[0]
                    assignment[atom] = sign
                    changed = True
                    continue
                next_cls.append(frozenset(lits))
            cls = next_cls
        return cls

    def solve(cls: list[frozenset]) -> bool:
        saved = dict(assignment)
        reduced = propagate(cls)
        if reduced is None:
            assignment.clear()
            assignment.update(saved)
            return False
        if not reduced:
            return True
        atom = sorted(min(reduced, key=len))[0][0]
        for choice in (True, False):
            assignment[atom] = choice
            if solve(reduced):
                return True
            assignment.clear()
            assignment.update(saved)
        return False

    return solve(clauses)


def bounded_eval(
    formula: Union[WsksFormula, Formula],
    valuation: Valuation,
    budget: int,
    *,
    kappa: Optional[int] = None,
    fo_universe: Optional[Iterable[str]] = None,
    subset_universe=None,
) -> bool:
    """Evaluate under the finite-prefix semantics; see BoundedEvaluator."""
    if isinstance(formula, WsksFormula):
        kappa = formula.kappa
    if kappa is None:
        raise ValueError("kappa required when formula carries no arity")
    ev = BoundedEvaluator(
        kappa, budget, fo_universe=fo_universe, subset_universe=subset_universe
    )
    return ev.eval(formula, valuation)


def enumerate_so_models(
    formula: Union[WsksFormula, Formula],
    so_vars: Iterable[str],
    valuation: Optional[Valuation] = None,
    *,
    budget: int,
    kappa: Optional[int] = None,
    fo_universe: Optional[Iterable[str]] = None,
) -> list[dict[str, frozenset]]:
    """Models of a pin-shaped formula over so_vars; see BoundedEvaluator."""
    if isinstance(formula, WsksFormula):
        kappa = formula.kappa
    if kappa is None:
        raise ValueError("kappa required when formula carries no arity")
    ev = BoundedEvaluator(kappa, budget, fo_universe=fo_universe)
    return ev.so_models(formula, so_vars, valuation)
