"""Term taxonomy: maps broad terms to the concrete leaf terms they cover.

The taxonomy is a forest given as ``{term: [child, ...]}``.  Canonicalizing
a term expands it to the set of leaves reachable from it; a term the
taxonomy has never heard of canonicalizes to itself.  That keeps term
comparison meaningful even with an empty taxonomy.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable, Mapping

from .errors import TaxonomyError
from .model import canonical_term


class Taxonomy:
    def __init__(self, edges: Mapping[str, Iterable[str]] | None = None):
        self._children: dict[str, tuple[str, ...]] = {}
        for parent, kids in (edges or {}).items():
            parent_key = canonical_term(parent)
            kid_keys = tuple(canonical_term(k) for k in kids)
            if any(not k for k in kid_keys) or not parent_key:
                raise TaxonomyError("taxonomy terms must be non-empty strings")
            self._children[parent_key] = kid_keys
        self._leaves: dict[str, frozenset[str]] = {}
        for term in self._children:
            self._leaves[term] = self._expand(term, stack=())

    def _expand(self, term: str, stack: tuple[str, ...]) -> frozenset[str]:
        if term in stack:
            cycle = " -> ".join(stack + (term,))
            raise TaxonomyError(f"taxonomy contains a cycle: {cycle}")
        if term in self._leaves:
            return self._leaves[term]
        kids = self._children.get(term)
        if not kids:
            return frozenset({term})
        leaves: set[str] = set()
        for kid in kids:
            leaves |= self._expand(kid, stack + (term,))
        result = frozenset(leaves)
        self._leaves[term] = result
        return result

    def leaves(self, term: str) -> frozenset[str]:
        """Leaf terms covered by ``term``; unknown terms map to themselves."""
        key = canonical_term(term)
        return self._leaves.get(key, frozenset({key}))

    def canonicalize(self, terms: Iterable[str]) -> frozenset[str]:
        """Union of the leaf sets of all given terms."""
        out: set[str] = set()
        for term in terms:
            out |= self.leaves(term)
        return frozenset(out)

    @classmethod
    def from_file(cls, path: str | Path) -> "Taxonomy":
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise TaxonomyError(f"taxonomy file is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise TaxonomyError("taxonomy file must be a JSON object")
        for parent, kids in data.items():
            if not isinstance(kids, list) or not all(isinstance(k, str) for k in kids):
                raise TaxonomyError(f"children of {parent!r} must be a list of strings")
        return cls(data)


EMPTY_TAXONOMY = Taxonomy()


def canonicalize_terms(terms: Iterable[str], taxonomy: Taxonomy) -> frozenset[str]:
    """Union of the leaf sets of all given terms under the taxonomy."""
    return taxonomy.canonicalize(terms)


def overlaps(a: Iterable[str], b: Iterable[str], taxonomy: Taxonomy) -> bool:
    """True when the canonical leaf sets intersect."""
    return bool(taxonomy.canonicalize(a) & taxonomy.canonicalize(b))


def subsumed(a: Iterable[str], b: Iterable[str], taxonomy: Taxonomy) -> bool:
    """True when every leaf of ``a`` is covered by ``b``."""
    return taxonomy.canonicalize(a) <= taxonomy.canonicalize(b)
