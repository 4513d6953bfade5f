"""Built-in benchmark systems shipped under corpus/."""
from __future__ import annotations

import os
from typing import Optional

from .dsl import Spec, parse_spec
from .normalize import RewritingSystem, build_base, normalize

_ALIASES = {
    "tll": "tree-linked-leaves",
}

NAMES = (
    "ring",
    "token-ring",
    "star",
    "ring-star",
    "alt-philo-sym",
    "alt-philo-asym",
    "sync-philo",
    "tree-dfs",
    "tree-back-root",
    "tree-linked-leaves",
)


def corpus_dir() -> str:
    here = os.path.dirname(os.path.abspath(__file__))
    for cand in (
        os.path.join(os.path.dirname(os.path.dirname(here)), "corpus"),
        os.path.join(here, "corpus"),
    ):
        if os.path.isdir(cand):
            return cand
    raise FileNotFoundError("corpus directory not found")


def resolve(name_or_path: str) -> str:
    """Map a corpus name (or alias) to its spec file; paths pass through."""
    if os.path.isfile(name_or_path):
        return name_or_path
    base = os.path.basename(name_or_path)
    if base.endswith(".pas"):
        base = base[:-4]
    base = _ALIASES.get(base, base)
    cand = os.path.join(corpus_dir(), base + ".pas")
    if os.path.isfile(cand):
        return cand
    raise FileNotFoundError(f"no such spec file or corpus entry: {name_or_path}")


def load_spec(name_or_path: str) -> Spec:
    with open(resolve(name_or_path), "r", encoding="utf-8") as fh:
        return parse_spec(fh.read())


def load_system(
    name_or_path: str,
) -> tuple[Spec, RewritingSystem, RewritingSystem, dict]:
    """(spec, base system, normalized system, instantiation profiles)."""
    spec = load_spec(name_or_path)
    base = build_base(spec)
    norm, profiles = normalize(base)
    return spec, base, norm, profiles


def load_normalized(name_or_path: str) -> RewritingSystem:
    return load_system(name_or_path)[2]


def select_tree(system: RewritingSystem, size: int):
    """Smallest rewriting tree whose most numerous component type has
    `size` instances.  For single-type linear families this is the tree
    with `size` instances; for the table-shaped families it is the tree
    with `size` repeating units.  Raises ValueError when no tree of that
    size exists within a generous node budget.
    """
    from collections import Counter

    from .rewriting import enumerate_trees, ground_system

    if size < 1:
        raise ValueError(f"size must be positive, got {size}")
    budget = 3 * size + 4
    for tree in enumerate_trees(system, budget):
        gs = ground_system(system, tree)
        if max(Counter(gs.instances.values()).values()) == size:
            return tree
    raise ValueError(f"no rewriting tree of size {size} within {budget} nodes")
