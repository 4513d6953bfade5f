"""Command-line frontend.

Every subcommand produces a run report: a fixed-width summary on stdout, or
one JSON object with --json.  The exit code is a pure function of the
verdict: 0 safe/ok, 1 unsafe, 2 inconclusive, 3 usage or error.
"""
from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import dataclass, field
from typing import Optional

from . import corpus, crosscheck, dsl
from .formulas import UnsupportedQuery, build_safe
from .ground import (
    Inconclusive,
    Overflow,
    SafeProved,
    UnsafeWitness,
    all_state_tokens,
    enumerate_traps,
    minimal_marked_traps,
    reachable,
    verify_ground,
)
from .normalize import InvalidSpec, NotNormalizable, build_base, normalize
from .wsks import formula_size
from .pathauto import UnknownVariable, accepting_endpoints, _body_vars
from .rewriting import (
    Incompatible,
    branching_degree,
    enumerate_trees,
    ground_system,
    tree_json,
)
from .solver import (
    ParseError,
    Sat,
    SolverError,
    SolverNotFound,
    Unsat,
    UnsupportedArity,
    emit_solver,
    find_solver,
    run_solver,
)

EXIT_CODES = {"safe-proved": 0, "unsafe-witness": 1, "inconclusive": 2, "error": 3}

# informational commands have no safety verdict; success maps to the one
# verdict with exit code 0
OK = "safe-proved"


class UsageError(Exception):
    pass


@dataclass
class Report:
    spec: Optional[str]
    command: str
    verdict: str = OK
    trees: Optional[int] = None
    configurations: Optional[int] = None
    formula_size: Optional[int] = None
    solver_time: Optional[float] = None
    diagnostics: list = field(default_factory=list)
    data: object = None
    lines: list = field(default_factory=list)  # human-format body
    started: float = field(default_factory=time.monotonic)

    def to_json(self) -> dict:
        return {
            "spec": self.spec,
            "command": self.command,
            "verdict": self.verdict,
            "statistics": {
                "trees": self.trees,
                "configurations": self.configurations,
                "formula_size": self.formula_size,
                "solver_time": self.solver_time,
                "elapsed": round(time.monotonic() - self.started, 6),
            },
            "diagnostics": list(self.diagnostics),
            "data": self.data,
        }

    def render(self) -> str:
        stats = [
            ("trees", self.trees),
            ("configurations", self.configurations),
            ("formula size", self.formula_size),
            ("solver time", self.solver_time),
        ]
        rows = [("spec", self.spec or "-"), ("command", self.command)]
        rows += [(k, str(v)) for k, v in stats if v is not None]
        rows.append(("verdict", self.verdict))
        width = max(len(k) for k, _ in rows)
        out = [f"{k:<{width}}  {v}" for k, v in rows]
        for d in self.diagnostics:
            out.append(f"{'note':<{width}}  {d}")
        out.extend(self.lines)
        return "\n".join(out)


def _load(path: str):
    resolved = corpus.resolve(path)
    spec = corpus.load_spec(resolved)
    norm, _profiles = normalize(build_base(spec))
    return spec, norm


def _query(spec: dsl.Spec):
    if not spec.queries:
        raise UsageError("spec declares no safety query")
    return spec.queries[0]


def _verdict_data(v) -> tuple[str, dict]:
    if isinstance(v, SafeProved):
        return "safe-proved", {"verdict": "safe", "method": v.method}
    if isinstance(v, UnsafeWitness):
        witness = [{"interaction": [list(p) for p in step]} for step in v.path]
        return "unsafe-witness", {
            "verdict": "unsafe",
            "witness": witness,
            "config": [list(p) for p in v.config],
        }
    assert isinstance(v, Inconclusive)
    return "inconclusive", {"verdict": "inconclusive", "detail": v.detail}


# ---------------------------------------------------------------------------
# subcommands


def cmd_check(args, rep: Report) -> None:
    spec = corpus.load_spec(corpus.resolve(args.spec))
    issues = dsl.validate_spec(spec)
    rep.diagnostics += [str(d) for d in issues]
    rep.verdict = "error" if issues else OK
    rep.data = {
        "components": [c.name for c in spec.components],
        "rules": len(spec.rules),
        "queries": len(spec.queries),
        "issues": len(issues),
    }
    rep.lines.append(
        f"{len(spec.components)} component types, {len(spec.rules)} rules, "
        f"{len(spec.queries)} queries, {len(issues)} issues"
    )


def cmd_normalize(args, rep: Report) -> None:
    _spec, norm = _load(args.spec)
    src = norm.to_source()
    rep.data = {"rules": len(norm.rules), "source": src}
    rep.lines.append(src)


def cmd_unfold(args, rep: Report) -> None:
    _spec, norm = _load(args.spec)
    payloads = []
    for tree in enumerate_trees(norm, args.max_nodes):
        payloads.append(tree_json(norm, tree))
    rep.trees = len(payloads)
    rep.data = {"trees": payloads}
    rep.lines += [json.dumps(p, sort_keys=True) for p in payloads]


def _pick_ground(norm, args):
    tree = corpus.select_tree(norm, args.size)
    return tree, ground_system(norm, tree)


def cmd_verify_ground(args, rep: Report) -> None:
    spec, norm = _load(args.spec)
    _tree, gs = _pick_ground(norm, args)
    rep.trees = 1
    reach = reachable(gs, args.limit)
    rep.configurations = len(reach.configs)
    verdict = verify_ground(gs, _query(spec), method=args.method, limit=args.limit)
    rep.verdict, rep.data = _verdict_data(verdict)
    if isinstance(verdict, UnsafeWitness):
        rep.lines.append(f"witness of {len(verdict.path)} steps:")
        for step in verdict.path:
            rep.lines.append("  " + " ".join(f"{n or 'eps'}.{p}" for n, p in step))
    elif isinstance(verdict, Inconclusive):
        rep.diagnostics.append(verdict.detail)


def cmd_traps(args, rep: Report) -> None:
    _spec, norm = _load(args.spec)
    _tree, gs = _pick_ground(norm, args)
    rep.trees = 1
    tokens = sorted(all_state_tokens(gs))
    if len(tokens) > 16:
        raise UsageError(
            f"{len(tokens)} state tokens; subset enumeration is capped at 16"
        )
    rep.configurations = 2 ** len(tokens)
    marked = enumerate_traps(gs, marked_only=True)
    minimal = minimal_marked_traps(gs)
    fmt = lambda th: sorted(f"{node or 'eps'}:{state}" for node, state in th)
    rep.data = {
        "tokens": len(tokens),
        "marked_traps": len(marked),
        "minimal_marked_traps": [fmt(th) for th in sorted(minimal, key=fmt)],
    }
    rep.lines.append(
        f"{len(tokens)} state tokens, {len(marked)} marked traps, "
        f"{len(minimal)} minimal:"
    )
    for th in sorted(minimal, key=fmt):
        rep.lines.append("  {" + ", ".join(fmt(th)) + "}")


def _emit_text(spec, norm) -> tuple[str, str, int]:
    kappa = branching_degree(norm)
    if kappa < 1 or kappa > 2:
        raise UnsupportedArity(f"branching degree {kappa} has no solver mode")
    mode = "ws1s" if kappa == 1 else "ws2s"
    formula = build_safe(norm, _query(spec))
    return emit_solver(formula, mode), mode, formula_size(formula.body)


def cmd_emit(args, rep: Report) -> None:
    spec, norm = _load(args.spec)
    text, mode, rep.formula_size = _emit_text(spec, norm)
    if args.output and args.output != "-":
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text)
        rep.data = {"mode": mode, "output": args.output, "bytes": len(text)}
        rep.lines.append(f"wrote {len(text)} bytes of {mode} to {args.output}")
    else:
        rep.data = {"mode": mode, "text": text}
        rep.lines.append(text)


def cmd_verify(args, rep: Report) -> None:
    spec, norm = _load(args.spec)
    query = _query(spec)
    text, _mode, rep.formula_size = _emit_text(spec, norm)
    try:
        find_solver(args.mona_path)
    except SolverNotFound:
        rep.diagnostics.append(
            "solver not found: bounded evidence only (ground sizes 2..6)"
        )
        explored = 0
        for size in range(2, 7):
            try:
                gs = ground_system(norm, corpus.select_tree(norm, size))
            except (ValueError, Incompatible):
                continue
            reach = reachable(gs, args.limit)
            explored += len(reach.configs)
            verdict = verify_ground(gs, query, method="both", limit=args.limit)
            kind, data = _verdict_data(verdict)
            rep.lines.append(f"size {size}: {kind} ({len(reach.configs)} configurations)")
            if isinstance(verdict, UnsafeWitness):
                rep.configurations = explored
                rep.verdict, rep.data = kind, data
                rep.data["size"] = size
                return
        rep.configurations = explored
        rep.verdict = "inconclusive"
        rep.data = {"verdict": "inconclusive", "detail": "bounded evidence only"}
        return

    t0 = time.monotonic()
    result = run_solver(text, mona_path=args.mona_path, timeout=args.solver_timeout)
    rep.solver_time = round(time.monotonic() - t0, 6)
    if isinstance(result, Unsat):
        rep.verdict = "safe-proved"
        rep.data = {"verdict": "safe", "method": "solver-unsat"}
    elif isinstance(result, Sat):
        rep.verdict = "inconclusive"
        rep.diagnostics.append(
            "solver found a model; the method proves safety only by unsatisfiability"
        )
        rep.data = {"verdict": "inconclusive", "witness": result.witness}
    else:
        assert isinstance(result, SolverError)
        rep.verdict = "error"
        rep.diagnostics.append(f"solver failed: {result.reason}")
        rep.data = {"verdict": "error"}


def cmd_oracle_check(args, rep: Report) -> None:
    _spec, base, norm, _profiles = corpus.load_system(corpus.resolve(args.spec))
    results = []
    wanted = args.suite or sorted(crosscheck.SUITES) + ["preservation"]
    for name in wanted:
        if name == "preservation":
            results.append(crosscheck.check_preservation(base, norm, args.max_nodes))
        else:
            results.append(crosscheck.SUITES[name](norm, max_nodes=args.max_nodes))
    rep.data = {
        "suites": [
            {
                "name": r.name,
                "ok": r.ok,
                "checked": r.checked,
                "mismatches": r.mismatches,
                "skipped": r.skipped,
                "detail": r.detail,
            }
            for r in results
        ]
    }
    width = max(len(r.name) for r in results)
    rep.lines.append(
        f"{'suite':<{width}}  {'result':<6}  {'checked':>8}  {'bad':>4}  {'skip':>4}"
    )
    for r in results:
        word = "pass" if r.ok else "FAIL"
        rep.lines.append(
            f"{r.name:<{width}}  {word:<6}  {r.checked:>8}  {r.mismatches:>4}  {r.skipped:>4}"
        )
    if not all(r.ok for r in results):
        rep.verdict = "error"
        rep.diagnostics += [f"{r.name}: {r.detail}" for r in results if not r.ok]


def _endpoint(text: str) -> tuple[int, str]:
    rule, dot, var = text.partition(".")
    if not dot or not rule.isdigit() or not var:
        raise UsageError(f"expected RULE.VAR, got {text!r}")
    return int(rule), var


def cmd_paths(args, rep: Report) -> None:
    _spec, norm = _load(args.spec)
    r1, z1 = _endpoint(args.src)
    r2, z2 = _endpoint(args.dst)
    trees = list(enumerate_trees(norm, args.max_nodes))
    if not 1 <= args.tree <= len(trees):
        raise UsageError(
            f"--tree {args.tree} out of range; {len(trees)} trees within "
            f"{args.max_nodes} nodes"
        )
    tree = trees[args.tree - 1]
    rep.trees = 1
    pairs = accepting_endpoints(norm, tree, r1, z1, r2, z2)
    rep.data = {
        "tree": dict(tree.entries),
        "from": f"{r1}.{z1}",
        "to": f"{r2}.{z2}",
        "endpoints": [list(p) for p in pairs],
    }
    rep.lines.append(f"{len(pairs)} accepting endpoint pairs:")
    for w1, w2 in pairs:
        rep.lines.append(f"  {w1 or 'eps'} -> {w2 or 'eps'}")


def cmd_corpus(args, rep: Report) -> None:
    if args.action != "list":
        raise UsageError(f"unknown corpus action: {args.action}")
    rep.data = {"names": list(corpus.NAMES)}
    rep.lines += list(corpus.NAMES)


# ---------------------------------------------------------------------------
# argument parsing


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # exit 3 on usage errors, per the verdict map
        raise UsageError(message)


def _build_parser() -> _Parser:
    top = _Parser(prog="archtrap", description=__doc__)
    sub = top.add_subparsers(dest="command", required=True)

    def add(name, fn, spec_arg=True):
        p = sub.add_parser(name)
        p.set_defaults(fn=fn)
        if spec_arg:
            p.add_argument("spec", help="spec file or corpus name")
        p.add_argument("--json", action="store_true", help="machine-format report")
        return p

    add("check", cmd_check)
    add("normalize", cmd_normalize)

    p = add("unfold", cmd_unfold)
    p.add_argument("--max-nodes", type=int, default=9)

    p = add("verify-ground", cmd_verify_ground)
    p.add_argument("--size", type=int, default=3)
    p.add_argument("--method", choices=["exact", "trap", "both"], default="both")
    p.add_argument("--limit", type=int, default=2_000_000)

    p = add("traps", cmd_traps)
    p.add_argument("--size", type=int, default=3)

    p = add("emit", cmd_emit)
    p.add_argument("--output", "-o", default="-")

    p = add("verify", cmd_verify)
    p.add_argument("--mona-path", default=None)
    p.add_argument("--solver-timeout", type=float, default=60.0)
    p.add_argument("--limit", type=int, default=2_000_000)

    p = add("oracle-check", cmd_oracle_check)
    p.add_argument("--max-nodes", type=int, default=5)
    p.add_argument(
        "--suite",
        action="append",
        choices=sorted(crosscheck.SUITES) + ["preservation"],
        help="run one suite (repeatable); default all",
    )

    p = add("paths", cmd_paths)
    p.add_argument("--tree", type=int, default=1, help="1-based enumeration index")
    p.add_argument("--max-nodes", type=int, default=9)
    p.add_argument("--from", dest="src", required=True, metavar="RULE.VAR")
    p.add_argument("--to", dest="dst", required=True, metavar="RULE.VAR")

    p = add("corpus", cmd_corpus, spec_arg=False)
    p.add_argument("action", choices=["list"])

    return top


_EXPECTED = (
    UsageError,
    FileNotFoundError,
    dsl.SyntaxError,
    dsl.DuplicateName,
    dsl.AssumptionViolation,
    InvalidSpec,
    NotNormalizable,
    Incompatible,
    UnsupportedArity,
    UnsupportedQuery,
    UnknownVariable,
    ParseError,
    Overflow,
    ValueError,
)


def main(argv: Optional[list[str]] = None) -> int:
    try:
        args = _build_parser().parse_args(argv)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CODES["error"]

    rep = Report(spec=getattr(args, "spec", None), command=args.command)
    try:
        args.fn(args, rep)
    except _EXPECTED as e:
        rep.verdict = "error"
        rep.diagnostics.append(f"{type(e).__name__}: {e}")
        rep.data = None
        rep.lines = []

    if args.json:
        print(json.dumps(rep.to_json(), sort_keys=True, indent=2))
    else:
        print(rep.render())
    return EXIT_CODES[rep.verdict]


if __name__ == "__main__":
    sys.exit(main())
