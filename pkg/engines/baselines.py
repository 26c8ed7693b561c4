"""Textual-only reference indexes: ranked inverted list, ordered keyword trie,
and a stand-alone AKI wrapper exposing the same search surface."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence

from engines.aki import AKI, DEFAULT_THETA, FrequenciesMap
from engines.common import ContinuousQuery

logger = logging.getLogger(__name__)


@dataclass
class TextSearch:
    candidates: List[ContinuousQuery] = field(default_factory=list)
    visited: int = 0
    lookups: int = 0

    def verified(self, keywords: Sequence[str]) -> List[ContinuousQuery]:
        words = set(keywords)
        return [q for q in self.candidates if q.keyset <= words]


class RIL:
    """Each query is filed under its least-frequent keyword at insert time.

    Ranking comes from the live frequencies map unless ``static_ranks``
    (keyword -> corpus frequency) is given.
    """

    kind = "ril"

    def __init__(self, static_ranks: Optional[Mapping[str, int]] = None):
        self.static_ranks = dict(static_ranks) if static_ranks is not None else None
        self.fm = FrequenciesMap()
        self.postings: Dict[str, List[ContinuousQuery]] = {}
        self._home: Dict[int, str] = {}

    def __len__(self) -> int:
        return len(self._home)

    def _rank_key(self, k: str):
        if self.static_ranks is not None:
            return (self.static_ranks.get(k, 0), k)
        return (self.fm.count(k), k)

    def insert(self, q: ContinuousQuery) -> None:
        self.fm.add(q.text)
        home = min(q.text, key=self._rank_key)
        self.postings.setdefault(home, []).append(q)
        self._home[id(q)] = home

    def remove(self, q: ContinuousQuery) -> bool:
        home = self._home.pop(id(q), None)
        if home is None:
            return False
        lst = self.postings[home]
        lst.remove(q)
        if not lst:
            del self.postings[home]
        self.fm.remove(q.text)
        return True

    def search(self, keywords: Sequence[str]) -> TextSearch:
        out = TextSearch()
        for s in keywords:
            out.lookups += 1
            lst = self.postings.get(s)
            if lst:
                out.candidates.extend(lst)
                out.visited += len(lst)
        return out

    def posting_lengths(self) -> Dict[str, int]:
        return {k: len(v) for k, v in self.postings.items()}

    def node_count(self) -> int:
        return len(self.postings)


@dataclass(eq=False)
class TrieNode:
    keyword: Optional[str] = None
    depth: int = 0
    children: Dict[str, "TrieNode"] = field(default_factory=dict)
    queries: List[ContinuousQuery] = field(default_factory=list)


class OKT:
    """Ordered keyword trie; queries sit where the root path equals their text."""

    kind = "okt"

    def __init__(self):
        self.root = TrieNode()
        self._size = 0

    def __len__(self) -> int:
        return self._size

    def insert(self, q: ContinuousQuery) -> None:
        node = self.root
        for depth, k in enumerate(q.text, start=1):
            child = node.children.get(k)
            if child is None:
                child = TrieNode(keyword=k, depth=depth)
                node.children[k] = child
            node = child
        node.queries.append(q)
        self._size += 1

    def remove(self, q: ContinuousQuery) -> bool:
        trail = [self.root]
        for k in q.text:
            child = trail[-1].children.get(k)
            if child is None:
                return False
            trail.append(child)
        leaf = trail[-1]
        if q not in leaf.queries:
            return False
        leaf.queries.remove(q)
        self._size -= 1
        # prune empty tail
        for parent, node in zip(reversed(trail[:-1]), reversed(trail[1:])):
            if node.queries or node.children:
                break
            del parent.children[node.keyword]
        return True

    def search(self, keywords: Sequence[str]) -> TextSearch:
        out = TextSearch()
        self._walk(self.root, 0, keywords, out)
        return out

    def _walk(self, node: TrieNode, start: int, keywords: Sequence[str], out: TextSearch) -> None:
        for j in range(start, len(keywords)):
            out.lookups += 1
            child = node.children.get(keywords[j])
            if child is None:
                continue
            out.visited += 1
            out.candidates.extend(child.queries)
            self._walk(child, j + 1, keywords, out)

    def iter_nodes(self):
        stack = list(self.root.children.values())
        while stack:
            node = stack.pop()
            yield node
            stack.extend(node.children.values())

    def node_count(self) -> int:
        return sum(1 for _ in self.iter_nodes())

    def max_depth(self) -> int:
        return max((n.depth for n in self.iter_nodes()), default=0)


class AkiTextIndex:
    """An AKI over the whole space with no pyramid around it."""

    kind = "aki"

    def __init__(self, theta: int = DEFAULT_THETA):
        self.aki = AKI(theta=theta)
        self._size = 0

    def __len__(self) -> int:
        return self._size

    @property
    def fm(self) -> FrequenciesMap:
        return self.aki.fm

    def insert(self, q: ContinuousQuery) -> None:
        self.aki.add(q)
        self._size += 1

    def remove(self, q: ContinuousQuery) -> bool:
        found = self.aki.discard(q)
        if found:
            self._size -= 1
        return found

    def search(self, keywords: Sequence[str]) -> TextSearch:
        res = self.aki.search(keywords)
        words = set(keywords)
        # frequent-path hits are exact; only list-mode candidates need the subset test
        candidates = list(res.exact) + [q for q in res.to_verify if q.keyset <= words]
        return TextSearch(
            candidates=candidates,
            visited=len(res.to_verify) + len(res.exact),
            lookups=res.lookups,
        )

    def node_count(self) -> int:
        return self.aki.node_count()


def build_text_index(kind: str, theta: int = DEFAULT_THETA, static_ranks: Optional[Mapping[str, int]] = None):
    if kind == "ril":
        return RIL(static_ranks=static_ranks)
    if kind == "okt":
        return OKT()
    if kind == "aki":
        return AkiTextIndex(theta=theta)
    raise ValueError(f"unknown text index kind {kind!r}")
