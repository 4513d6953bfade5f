"""Specification language: parser, validator, pretty printer.

A spec file declares component types (finite machines with named ports),
rewriting rules over behavioral terms, one root predicate, and safety
queries.  Line comments start with //.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Optional, Union

from .terms import (
    Apply,
    ArchSpec,
    Instance,
    Nu,
    PortAtom,
    PredAtom,
    Term,
    Var,
    apply_substitution,
    bound_vars,
    free_vars,
    make_arch,
    strip_binders,
    subterms,
)


class SyntaxError(Exception):  # noqa: A001  (spec-mandated error name)
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {message}")
        self.line = line
        self.col = col


class DuplicateName(Exception):
    def __init__(self, name: str, what: str):
        super().__init__(f"duplicate {what}: {name}")
        self.name = name


class AssumptionViolation(Exception):
    """A port labels more than one transition of the same component type."""

    def __init__(self, port: str):
        super().__init__(f"port labels two transitions: {port}")
        self.port = port


# ---------------------------------------------------------------------------
# model


@dataclass(frozen=True)
class Transition:
    source: str
    port: str
    target: str


@dataclass(frozen=True)
class ComponentType:
    name: str
    ports: tuple[str, ...]
    states: tuple[str, ...]
    init: str
    transitions: tuple[Transition, ...]

    def transition_for(self, port: str) -> Optional[Transition]:
        for t in self.transitions:
            if t.port == port:
                return t
        return None


@dataclass(frozen=True)
class Rule:
    head: str
    params: tuple[str, ...]
    body: Term


@dataclass(frozen=True)
class DeadlockQuery:
    pass


@dataclass(frozen=True)
class PatternQuery:
    atoms: tuple[tuple[str, str], ...]  # (component type, state)
    distinct: bool


Query = Union[DeadlockQuery, PatternQuery]


@dataclass(frozen=True)
class Spec:
    components: tuple[ComponentType, ...]
    rules: tuple[Rule, ...]
    root: Optional[str]
    queries: tuple[Query, ...]

    def component(self, name: str) -> Optional[ComponentType]:
        for c in self.components:
            if c.name == name:
                return c
        return None

    def rules_for(self, pred: str) -> tuple[Rule, ...]:
        return tuple(r for r in self.rules if r.head == pred)

    def port_owner(self, port: str) -> Optional[ComponentType]:
        for c in self.components:
            if port in c.ports:
                return c
        return None

    def state_owner(self, state: str) -> Optional[ComponentType]:
        for c in self.components:
            if state in c.states:
                return c
        return None


@dataclass(frozen=True)
class Diagnostic:
    code: str
    subject: str
    message: str

    def __str__(self) -> str:
        return f"{self.code}({self.subject}): {self.message}"


# ---------------------------------------------------------------------------
# lexer

_KEYWORDS = {
    "component",
    "ports",
    "states",
    "init",
    "rule",
    "new",
    "root",
    "check",
    "deadlock",
    "pattern",
    "distinct",
}

_TOKEN_RE = re.compile(
    r"(?P<ws>\s+)"
    r"|(?P<comment>//[^\n]*)"
    r"|(?P<arrow>->)"
    r"|(?P<larrow><-)"
    r"|(?P<id>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<punct>[{}()<>;,.+@-])"
)


@dataclass(frozen=True)
class _Token:
    kind: str  # "id", "kw", "punct", "eof"
    text: str
    line: int
    col: int


def _lex(text: str) -> list[_Token]:
    tokens: list[_Token] = []
    pos = 0
    line = 1
    line_start = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise SyntaxError(
                f"unexpected character {text[pos]!r}", line, pos - line_start + 1
            )
        group = m.lastgroup
        lexeme = m.group()
        col = pos - line_start + 1
        if group == "ws":
            nl = lexeme.count("\n")
            if nl:
                line += nl
                line_start = pos + lexeme.rfind("\n") + 1
        elif group == "comment":
            pass
        elif group == "id":
            kind = "kw" if lexeme in _KEYWORDS else "id"
            tokens.append(_Token(kind, lexeme, line, col))
        else:
            tokens.append(_Token("punct", lexeme, line, col))
        pos = m.end()
    tokens.append(_Token("eof", "", line, len(text) - line_start + 1))
    return tokens


# ---------------------------------------------------------------------------
# parser


class _Parser:
    def __init__(self, text: str):
        self.tokens = _lex(text)
        self.i = 0

    def peek(self, offset: int = 0) -> _Token:
        return self.tokens[min(self.i + offset, len(self.tokens) - 1)]

    def next(self) -> _Token:
        tok = self.tokens[self.i]
        if tok.kind != "eof":
            self.i += 1
        return tok

    def error(self, message: str) -> SyntaxError:
        tok = self.peek()
        return SyntaxError(message + f" (found {tok.text or 'end of input'!r})", tok.line, tok.col)

    def expect(self, text: str) -> _Token:
        tok = self.peek()
        if tok.text != text:
            raise self.error(f"expected {text!r}")
        return self.next()

    def expect_ident(self, what: str = "identifier") -> str:
        tok = self.peek()
        if tok.kind != "id":
            raise self.error(f"expected {what}")
        self.next()
        return tok.text

    def at(self, text: str) -> bool:
        return self.peek().text == text and self.peek().kind != "id"

    # ---- items

    def parse_spec(self) -> Spec:
        components: list[ComponentType] = []
        rules: list[Rule] = []
        root: Optional[str] = None
        queries: list[Query] = []
        seen_components: set[str] = set()
        while self.peek().kind != "eof":
            tok = self.peek()
            if tok.text == "component":
                comp = self.parse_component()
                if comp.name in seen_components:
                    raise DuplicateName(comp.name, "component")
                seen_components.add(comp.name)
                components.append(comp)
            elif tok.text == "root":
                self.next()
                name = self.expect_ident("root predicate")
                self.expect("(")
                self.expect(")")
                self.expect(";")
                if root is not None:
                    raise DuplicateName(name, "root declaration")
                root = name
            elif tok.text == "check":
                queries.append(self.parse_check())
            elif tok.kind == "id":
                rules.append(self.parse_rule())
            else:
                raise self.error("expected a declaration")
        resolved = tuple(
            _resolve_rule(r, seen_components) for r in rules
        )
        return Spec(tuple(components), resolved, root, tuple(queries))

    def parse_component(self) -> ComponentType:
        self.expect("component")
        name = self.expect_ident("component name")
        self.expect("{")
        if not self.peek().text == "ports":
            raise self.error("expected 'ports'")
        self.next()
        ports = self.parse_identlist("port name")
        self.expect(";")
        if not self.peek().text == "states":
            raise self.error("expected 'states'")
        self.next()
        states: list[str] = []
        init: Optional[str] = None
        while True:
            st = self.expect_ident("state name")
            if st in states:
                raise DuplicateName(st, f"state in component {name}")
            states.append(st)
            if self.peek().text == "init":
                if init is not None:
                    raise self.error("a second state is marked init")
                self.next()
                init = st
            if self.at(","):
                self.next()
                continue
            break
        self.expect(";")
        if init is None:
            raise self.error(f"component {name} has no init state")
        seen_ports: set[str] = set()
        for p in ports:
            if p in seen_ports:
                raise DuplicateName(p, f"port in component {name}")
            seen_ports.add(p)
        transitions: list[Transition] = []
        used_ports: set[str] = set()
        while self.peek().text == "rule":
            self.next()
            src = self.expect_ident("state")
            self.expect("-")
            port = self.expect_ident("port")
            self.expect("->")
            dst = self.expect_ident("state")
            self.expect(";")
            if port in used_ports:
                raise AssumptionViolation(port)
            used_ports.add(port)
            transitions.append(Transition(src, port, dst))
        self.expect("}")
        return ComponentType(name, tuple(ports), tuple(states), init, tuple(transitions))

    def parse_identlist(self, what: str) -> tuple[str, ...]:
        names = [self.expect_ident(what)]
        while self.at(","):
            self.next()
            names.append(self.expect_ident(what))
        return tuple(names)

    def parse_rule(self) -> Rule:
        head = self.expect_ident("predicate name")
        self.expect("(")
        params: tuple[str, ...] = ()
        if not self.at(")"):
            params = self.parse_identlist("parameter")
        self.expect(")")
        self.expect("<-")
        body = self.parse_term()
        self.expect(";")
        return Rule(head, params, body)

    def parse_term(self) -> Term:
        if self.peek().text == "new":
            self.next()
            names = self.parse_identlist("bound variable")
            self.expect(".")
            body = self.parse_term()
            for n in reversed(names):
                body = Nu(n, body)
            return body
        if self.at("<"):
            self.next()
            arch = self.parse_arch()
            self.expect(">")
            self.expect("(")
            subterms = [self.parse_term()]
            while self.at(","):
                self.next()
                subterms.append(self.parse_term())
            self.expect(")")
            return Apply(arch, tuple(subterms))
        name = self.expect_ident("atom")
        self.expect("(")
        args: tuple[str, ...] = ()
        if not self.at(")"):
            args = self.parse_identlist("argument")
        self.expect(")")
        return PredAtom(name, tuple(Var(a) for a in args))

    def parse_arch(self) -> ArchSpec:
        products = [self.parse_product()]
        while self.at("+"):
            self.next()
            products.append(self.parse_product())
        return make_arch(products)

    def parse_product(self) -> list[PortAtom]:
        atoms = [self.parse_port_atom()]
        while self.at("."):
            self.next()
            atoms.append(self.parse_port_atom())
        return atoms

    def parse_port_atom(self) -> PortAtom:
        port = self.expect_ident("port")
        self.expect("(")
        arg = self.expect_ident("argument")
        self.expect(")")
        return PortAtom(port, Var(arg))

    def parse_check(self) -> Query:
        self.expect("check")
        if self.peek().text == "deadlock":
            self.next()
            self.expect(";")
            return DeadlockQuery()
        if self.peek().text == "pattern":
            self.next()
            atoms = [self.parse_pattern_atom()]
            while self.at(","):
                self.next()
                atoms.append(self.parse_pattern_atom())
            distinct = False
            if self.peek().text == "distinct":
                self.next()
                distinct = True
            self.expect(";")
            return PatternQuery(tuple(atoms), distinct)
        raise self.error("expected 'deadlock' or 'pattern'")

    def parse_pattern_atom(self) -> tuple[str, str]:
        ctype = self.expect_ident("component type")
        self.expect("@")
        state = self.expect_ident("state")
        return (ctype, state)


def _resolve_atoms(term: Term, component_names: set[str]) -> Term:
    """Rewrite unary predicate atoms over component names into instance atoms."""
    if isinstance(term, PredAtom):
        if term.pred in component_names and len(term.args) == 1:
            return Instance(str(term.pred), term.args[0])
        return term
    if isinstance(term, Apply):
        return Apply(term.arch, tuple(_resolve_atoms(t, component_names) for t in term.subterms))
    if isinstance(term, Nu):
        return Nu(term.var, _resolve_atoms(term.body, component_names))
    return term


def _rename_binders_apart(term: Term, taken: set[str]) -> Term:
    """Alpha-rename so every binder is distinct from params and other binders."""
    if isinstance(term, Nu):
        name = term.var
        body = term.body
        if name in taken:
            k = 1
            while f"{name}_{k}" in taken:
                k += 1
            fresh = f"{name}_{k}"
            body = apply_substitution(body, {name: Var(fresh)})
            name = fresh
        taken.add(name)
        return Nu(name, _rename_binders_apart(body, taken))
    if isinstance(term, Apply):
        return Apply(term.arch, tuple(_rename_binders_apart(t, taken) for t in term.subterms))
    return term


def _resolve_rule(rule: Rule, component_names: set[str]) -> Rule:
    body = _resolve_atoms(rule.body, component_names)
    body = _rename_binders_apart(body, set(rule.params))
    return Rule(rule.head, rule.params, body)


def parse_spec(text: str) -> Spec:
    """Parse a spec file.

    Raises SyntaxError on malformed input, DuplicateName on redeclarations,
    and AssumptionViolation when a port labels two transitions of one type.
    """
    return _Parser(text).parse_spec()


# ---------------------------------------------------------------------------
# validation


def _term_atoms(term: Term) -> Iterable[Term]:
    return subterms(term)


def validate_spec(spec: Spec) -> list[Diagnostic]:
    """Structural diagnostics; an empty list means the spec is well-formed."""
    out: list[Diagnostic] = []

    # global name disjointness across components, ports, states, predicates
    owners: dict[str, str] = {}

    def claim(name: str, what: str) -> None:
        if name in owners and owners[name] != what:
            out.append(Diagnostic("NameClash", name, f"{what} collides with {owners[name]}"))
        elif name in owners:
            out.append(Diagnostic("NameClash", name, f"declared twice as {what}"))
        else:
            owners[name] = what

    for c in spec.components:
        claim(c.name, "component")
    for c in spec.components:
        for p in c.ports:
            claim(p, f"port of {c.name}")
        for s in c.states:
            claim(s, f"state of {c.name}")
    pred_names = sorted({r.head for r in spec.rules})
    for name in pred_names:
        claim(name, "predicate")

    # machine rules use declared local ports and states
    for c in spec.components:
        for t in c.transitions:
            if t.port not in c.ports:
                out.append(Diagnostic("UnknownPort", t.port, f"transition of {c.name}"))
            for s in (t.source, t.target):
                if s not in c.states:
                    out.append(Diagnostic("UnknownState", s, f"transition of {c.name}"))

    arity: dict[str, int] = {}
    for r in spec.rules:
        if r.head in arity and arity[r.head] != len(r.params):
            out.append(
                Diagnostic("ArityMismatch", r.head, "rules define different arities")
            )
        arity.setdefault(r.head, len(r.params))
        if len(set(r.params)) != len(r.params):
            out.append(Diagnostic("DuplicateParam", r.head, "repeated parameter name"))

    all_ports = {p for c in spec.components for p in c.ports}
    for r in spec.rules:
        escaped = sorted(free_vars(r.body) - set(r.params))
        for v in escaped:
            out.append(
                Diagnostic("FreeVariableEscape", v, f"free in body of {r.head}")
            )
        bvars = bound_vars(r.body)
        if len(set(bvars)) != len(bvars) or set(bvars) & set(r.params):
            out.append(Diagnostic("DuplicateBinder", r.head, "bound names not distinct"))
        for t in _term_atoms(r.body):
            if isinstance(t, Instance):
                if spec.component(t.ctype) is None:
                    out.append(Diagnostic("UnknownComponent", t.ctype, f"in {r.head}"))
            elif isinstance(t, PredAtom):
                name = str(t.pred)
                if name not in arity:
                    out.append(Diagnostic("UnknownPredicate", name, f"in {r.head}"))
                elif arity[name] != len(t.args):
                    out.append(Diagnostic("ArityMismatch", name, f"call in {r.head}"))
            elif isinstance(t, Apply):
                for prod in t.arch.products:
                    for atom in prod:
                        if atom.port not in all_ports:
                            out.append(
                                Diagnostic("UnknownPort", atom.port, f"in {r.head}")
                            )

    if spec.root is None:
        out.append(Diagnostic("NoRoot", "", "no root declaration"))
    else:
        if spec.root not in arity:
            out.append(Diagnostic("UnknownPredicate", spec.root, "root declaration"))
        elif arity[spec.root] != 0:
            out.append(Diagnostic("RootArity", spec.root, "root predicate must be nullary"))

    for q in spec.queries:
        if isinstance(q, PatternQuery):
            for ctype, state in q.atoms:
                comp = spec.component(ctype)
                if comp is None:
                    out.append(Diagnostic("UnknownComponent", ctype, "pattern query"))
                elif state not in comp.states:
                    out.append(Diagnostic("UnknownState", state, f"pattern over {ctype}"))

    return out


# ---------------------------------------------------------------------------
# pretty printer


def _format_arg(a) -> str:
    if isinstance(a, Var):
        return a.name
    return a.uid


def format_term(term: Term) -> str:
    binders, core = strip_binders(term)
    prefix = "".join(f"new {b} . " for b in binders)
    if isinstance(core, Instance):
        return f"{prefix}{core.ctype}({_format_arg(core.arg)})"
    if isinstance(core, PredAtom):
        args = ", ".join(_format_arg(a) for a in core.args)
        return f"{prefix}{core.pred}({args})"
    if isinstance(core, Apply):
        arch = " + ".join(
            ".".join(f"{a.port}({_format_arg(a.arg)})" for a in prod)
            for prod in core.arch.products
        )
        inner = ", ".join(format_term(t) for t in core.subterms)
        return f"{prefix}< {arch} > ( {inner} )"
    raise TypeError(f"not a term: {core!r}")


def pretty_print(spec: Spec) -> str:
    """Canonical source rendering; parse(pretty_print(s)) equals s."""
    lines: list[str] = []
    for c in spec.components:
        lines.append(f"component {c.name} {{")
        lines.append(f"  ports {', '.join(c.ports)};")
        states = ", ".join(s + " init" if s == c.init else s for s in c.states)
        lines.append(f"  states {states};")
        for t in c.transitions:
            lines.append(f"  rule {t.source} -{t.port}-> {t.target};")
        lines.append("}")
        lines.append("")
    for r in spec.rules:
        params = ", ".join(r.params)
        lines.append(f"{r.head}({params}) <- {format_term(r.body)};")
    if spec.rules:
        lines.append("")
    if spec.root is not None:
        lines.append(f"root {spec.root}();")
    for q in spec.queries:
        if isinstance(q, DeadlockQuery):
            lines.append("check deadlock;")
        else:
            atoms = ", ".join(f"{t}@{s}" for t, s in q.atoms)
            suffix = " distinct" if q.distinct else ""
            lines.append(f"check pattern {atoms}{suffix};")
    return "\n".join(lines) + "\n"
