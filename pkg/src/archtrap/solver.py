"""Emission to the MONA input format and invocation of the external solver.

The emitted text is a pure function of the formula AST, so repeated runs
are byte-identical.  A small parser for our own output format supports the
round-trip tests; it is not a general MONA parser.
"""
from __future__ import annotations

import os
import re
import shutil
import subprocess
import tempfile
from dataclasses import dataclass
from typing import Optional, Union

from .wsks import (
    And,
    EpsTerm,
    Eq,
    ExistsFO,
    ExistsSO,
    FalseF,
    ForallFO,
    ForallSO,
    Formula,
    Iff,
    Implies,
    Mem,
    Not,
    Or,
    SuccTerm,
    TrueF,
    VarTerm,
    WsksFormula,
    free_fo_vars,
    free_so_vars,
)


class UnsupportedArity(Exception):
    """The formula's tree arity does not fit the requested output mode."""


class SolverNotFound(Exception):
    """No solver binary could be located."""


class ParseError(Exception):
    pass


@dataclass(frozen=True)
class Unsat:
    pass


@dataclass(frozen=True)
class Sat:
    witness: Optional[str] = None


@dataclass(frozen=True)
class SolverError:
    reason: str


SolverResult = Union[Unsat, Sat, SolverError]

_ISROOT = "pred isroot(var1 x) = ~ex1 y: (x = y.0 | x = y.1);"


def _uses_eps(f: Formula) -> bool:
    def base_is_eps(t) -> bool:
        while isinstance(t, SuccTerm):
            t = t.arg
        return isinstance(t, EpsTerm)

    stack = [f]
    while stack:
        g = stack.pop()
        if isinstance(g, Eq):
            if base_is_eps(g.left) or base_is_eps(g.right):
                return True
        elif isinstance(g, Mem):
            if base_is_eps(g.term):
                return True
        elif isinstance(g, Not):
            stack.append(g.body)
        elif isinstance(g, (And, Or)):
            stack.extend(g.parts)
        elif isinstance(g, (Implies, Iff)):
            stack.extend([g.left, g.right])
        elif isinstance(g, (ExistsFO, ForallFO, ExistsSO, ForallSO)):
            stack.append(g.body)
    return False


def _term_ws1s(t) -> str:
    hops = 0
    while isinstance(t, SuccTerm):
        if t.index != 0:
            raise UnsupportedArity(f"successor index {t.index} in ws1s output")
        hops += 1
        t = t.arg
    if isinstance(t, EpsTerm):
        return str(hops)
    if hops:
        return f"{t.name}+{hops}"
    return t.name


def _term_ws2s(t) -> tuple[Optional[str], str]:
    """(base variable or None for the root, successor suffix)."""
    digits = []
    while isinstance(t, SuccTerm):
        if t.index > 1:
            raise UnsupportedArity(f"successor index {t.index} in ws2s output")
        digits.append(str(t.index))
        t = t.arg
    suffix = "".join("." + d for d in reversed(digits))
    if isinstance(t, EpsTerm):
        return None, suffix
    return t.name, suffix


def _render(f: Formula, mode: str, fresh: list[int]) -> str:
    if isinstance(f, TrueF):
        return "true"
    if isinstance(f, FalseF):
        return "false"
    if isinstance(f, Eq):
        return _render_eq(f, mode, fresh)
    if isinstance(f, Mem):
        return _render_mem(f, mode, fresh)
    if isinstance(f, Not):
        return f"~({_render(f.body, mode, fresh)})"
    if isinstance(f, And):
        return "(" + " & ".join(_render(p, mode, fresh) for p in f.parts) + ")"
    if isinstance(f, Or):
        return "(" + " | ".join(_render(p, mode, fresh) for p in f.parts) + ")"
    if isinstance(f, Implies):
        return f"({_render(f.left, mode, fresh)} => {_render(f.right, mode, fresh)})"
    if isinstance(f, Iff):
        return f"({_render(f.left, mode, fresh)} <=> {_render(f.right, mode, fresh)})"
    if isinstance(f, ExistsFO):
        return f"ex1 {f.var}: ({_render(f.body, mode, fresh)})"
    if isinstance(f, ForallFO):
        return f"all1 {f.var}: ({_render(f.body, mode, fresh)})"
    if isinstance(f, ExistsSO):
        return f"ex2 {f.var}: ({_render(f.body, mode, fresh)})"
    if isinstance(f, ForallSO):
        return f"all2 {f.var}: ({_render(f.body, mode, fresh)})"
    raise TypeError(f"unexpected formula node {type(f).__name__}")


def _render_eq(f: Eq, mode: str, fresh: list[int]) -> str:
    if mode == "ws1s":
        return f"{_term_ws1s(f.left)} = {_term_ws1s(f.right)}"
    lb, ls = _term_ws2s(f.left)
    rb, rs = _term_ws2s(f.right)
    if lb is None and rb is None:
        return "true" if ls == rs == "" else "false"
    if lb is None or rb is None:
        base, suffix = (rb, rs) if lb is None else (lb, ls)
        if suffix:
            return "false"  # a successor of anything is never the root
        return f"isroot({base})"
    return f"{lb}{ls} = {rb}{rs}"


def _render_mem(f: Mem, mode: str, fresh: list[int]) -> str:
    if mode == "ws1s":
        return f"{_term_ws1s(f.term)} in {f.svar}"
    base, suffix = _term_ws2s(f.term)
    if base is None:
        fresh[0] += 1
        v = f"_r{fresh[0]}"
        if suffix:
            return f"ex1 {v}: (isroot({v}) & {v}{suffix} in {f.svar})"
        return f"ex1 {v}: (isroot({v}) & {v} in {f.svar})"
    return f"{base}{suffix} in {f.svar}"


def emit_solver(formula: WsksFormula, mode: str) -> str:
    """Render a formula as solver input text.

    ws1s requires arity 1; ws2s accepts arities 1 and 2.  The root in
    ws1s is position 0; in ws2s it is expressed through an isroot macro.
    """
    if mode not in ("ws1s", "ws2s"):
        raise ValueError(f"unknown mode: {mode}")
    if mode == "ws1s" and formula.kappa != 1:
        raise UnsupportedArity(f"ws1s output needs arity 1, got {formula.kappa}")
    if mode == "ws2s" and formula.kappa > 2:
        raise UnsupportedArity(f"ws2s output needs arity <= 2, got {formula.kappa}")
    body = formula.body
    lines = [mode + ";"]
    if mode == "ws2s" and _uses_eps(body):
        lines.append(_ISROOT)
    fo = sorted(free_fo_vars(body))
    so = sorted(free_so_vars(body))
    if fo:
        lines.append("var1 " + ", ".join(fo) + ";")
    if so:
        lines.append("var2 " + ", ".join(so) + ";")
    fresh = [0]
    lines.append(_render(body, mode, fresh) + ";")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# parser for our own emission format

_TOKEN_RE = re.compile(
    r"\s*(<=>|=>|[()~&|:,=;]|[A-Za-z_][A-Za-z0-9_]*(?:\.[01])*|\d+(?:\.[01])*|\+\d+)"
)


def _tokenize(text: str) -> list[str]:
    out = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m:
            if text[pos:].strip() == "":
                break
            raise ParseError(f"cannot tokenize near: {text[pos:pos+30]!r}")
        out.append(m.group(1))
        pos = m.end()
    return out


class _P:
    def __init__(self, tokens: list[str]):
        self.toks = tokens
        self.i = 0

    def peek(self) -> Optional[str]:
        return self.toks[self.i] if self.i < len(self.toks) else None

    def take(self, expected: Optional[str] = None) -> str:
        if self.i >= len(self.toks):
            raise ParseError("unexpected end of input")
        t = self.toks[self.i]
        if expected is not None and t != expected:
            raise ParseError(f"expected {expected!r}, got {t!r}")
        self.i += 1
        return t


def _parse_term_ws1s(tok: str):
    if re.fullmatch(r"\d+", tok):
        t = EpsTerm()
        for _ in range(int(tok)):
            t = SuccTerm(0, t)
        return t
    m = re.fullmatch(r"([A-Za-z_][A-Za-z0-9_]*)", tok)
    if not m:
        raise ParseError(f"bad first-order term: {tok!r}")
    return VarTerm(tok)


def _parse_term_ws2s(tok: str):
    m = re.fullmatch(r"([A-Za-z_][A-Za-z0-9_]*)((?:\.[01])*)", tok)
    if not m:
        raise ParseError(f"bad tree term: {tok!r}")
    t = VarTerm(m.group(1))
    for d in m.group(2).split(".")[1:]:
        t = SuccTerm(int(d), t)
    return t


def _parse_atom(p: _P, mode: str) -> Formula:
    tok = p.take()
    if tok == "isroot":
        p.take("(")
        inner = p.take()
        p.take(")")
        return Eq(_parse_term(inner, mode), EpsTerm())
    left = _parse_term(tok, mode)
    op = p.take()
    if op == "=":
        return Eq(left, _parse_term(p.take(), mode))
    if op == "in":
        return Mem(left, p.take())
    raise ParseError(f"expected '=' or 'in', got {op!r}")


def _parse_term(tok: str, mode: str):
    if mode == "ws1s":
        if "+" in tok:
            raise ParseError(f"unexpected offset inside term: {tok!r}")
        return _parse_term_ws1s(tok)
    return _parse_term_ws2s(tok)


_QUANT = {"ex1": ExistsFO, "all1": ForallFO, "ex2": ExistsSO, "all2": ForallSO}


def _parse_primary(p: _P, mode: str) -> Formula:
    tok = p.peek()
    if tok is None:
        raise ParseError("unexpected end of input")
    if tok == "(":
        p.take()
        f = _parse_formula(p, mode)
        p.take(")")
        return f
    if tok == "~":
        p.take()
        return Not(_parse_primary(p, mode))
    if tok == "true":
        p.take()
        return TrueF()
    if tok == "false":
        p.take()
        return FalseF()
    if tok in _QUANT:
        kind = _QUANT[p.take()]
        var = p.take()
        p.take(":")
        body = _parse_primary(p, mode)
        return kind(var, body)
    # ws1s terms may carry a +k offset split across two tokens
    if mode == "ws1s":
        return _parse_atom_ws1s(p)
    return _parse_atom(p, mode)


def _parse_atom_ws1s(p: _P) -> Formula:
    left = _take_term_ws1s(p)
    op = p.take()
    if op == "=":
        return Eq(left, _take_term_ws1s(p))
    if op == "in":
        return Mem(left, p.take())
    raise ParseError(f"expected '=' or 'in', got {op!r}")


def _take_term_ws1s(p: _P):
    t = _parse_term_ws1s(p.take())
    nxt = p.peek()
    if nxt is not None and nxt.startswith("+"):
        hops = int(p.take()[1:])
        for _ in range(hops):
            t = SuccTerm(0, t)
    return t


def _parse_formula(p: _P, mode: str) -> Formula:
    first = _parse_primary(p, mode)
    op = p.peek()
    if op not in ("&", "|", "=>", "<=>"):
        return first
    if op in ("&", "|"):
        parts = [first]
        while p.peek() == op:
            p.take()
            parts.append(_parse_primary(p, mode))
        return And(tuple(parts)) if op == "&" else Or(tuple(parts))
    p.take()
    right = _parse_primary(p, mode)
    return Implies(first, right) if op == "=>" else Iff(first, right)


def parse_solver(text: str) -> WsksFormula:
    """Parse text produced by emit_solver back into a formula."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ParseError("empty input")
    header = lines[0].strip().rstrip(";")
    if header not in ("ws1s", "ws2s"):
        raise ParseError(f"unknown header: {lines[0]!r}")
    mode = header
    kappa = 1 if mode == "ws1s" else 2
    body_lines = []
    for ln in lines[1:]:
        s = ln.strip()
        if s.startswith("pred isroot") or s.startswith("var1 ") or s.startswith("var2 "):
            continue
        body_lines.append(s)
    src = " ".join(body_lines).rstrip(";")
    p = _P(_tokenize(src))
    f = _parse_formula(p, mode)
    if p.peek() is not None:
        raise ParseError(f"trailing tokens from {p.peek()!r}")
    return WsksFormula(kappa, f)


# ---------------------------------------------------------------------------
# external solver invocation


def find_solver(mona_path: Optional[str] = None) -> str:
    """Locate the solver binary; explicit path wins over MONA_BIN over PATH."""
    for cand in (mona_path, os.environ.get("MONA_BIN"), "mona"):
        if not cand:
            continue
        if os.path.isfile(cand) and os.access(cand, os.X_OK):
            return cand
        hit = shutil.which(cand)
        if hit:
            return hit
    raise SolverNotFound("no solver binary found (set --mona-path or MONA_BIN)")


def run_solver(
    text: str,
    mona_path: Optional[str] = None,
    timeout: float = 60.0,
) -> SolverResult:
    """Run the external solver on emitted text and classify the verdict.

    Returns Unsat, Sat (witness text when an example is printed), or
    SolverError for timeouts and abnormal exits.  Raises SolverNotFound
    when no binary is available and ParseError when the output matches
    no known verdict.
    """
    binary = find_solver(mona_path)
    with tempfile.NamedTemporaryFile(
        "w", suffix=".mona", delete=False, encoding="utf-8"
    ) as fh:
        fh.write(text)
        path = fh.name
    try:
        try:
            proc = subprocess.run(
                [binary, "-q", path],
                capture_output=True,
                text=True,
                timeout=timeout,
            )
        except subprocess.TimeoutExpired:
            return SolverError(f"timeout after {timeout:g}s")
        out = proc.stdout + "\n" + proc.stderr
        if "Formula is unsatisfiable" in out:
            return Unsat()
        if "Formula is valid" in out:
            return Sat(None)
        m = re.search(
            r"A satisfying example.*?(?:\n\n|\Z)", out, flags=re.S
        )
        if m:
            return Sat(m.group(0).strip())
        if proc.returncode != 0:
            tail = out.strip().splitlines()[-1][:200] if out.strip() else "no output"
            return SolverError(f"solver exited with code {proc.returncode}: {tail}")
        raise ParseError(f"unrecognized solver output: {out.strip()[:200]!r}")
    finally:
        try:
            os.unlink(path)
        except OSError:
            pass
