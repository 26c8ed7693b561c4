"""Adaptive keyword index (AKI) and the index-global frequencies map.

Infrequent textual nodes behave like bounded posting lists (at most ``theta``
queries, verified textually at match time). Once a node overflows it is
marked frequent and its queries are split along lexicographic keyword paths,
trie style. A frequent node only holds queries whose text equals its path.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Deque, Dict, Iterable, Iterator, List, Optional, Sequence, Tuple

from engines.common import (
    MBR,
    UNIT_SPACE,
    ContinuousQuery,
    UnderflowViolation,
    mbr_overlaps,
)

logger = logging.getLogger(__name__)

DEFAULT_THETA = 5
DEFAULT_DESCENT_FACTOR = 4


class FrequenciesMap:
    """keyword -> number of live queries containing it (once per query)."""

    def __init__(self) -> None:
        self.counts: Dict[str, int] = {}

    def __len__(self) -> int:
        return len(self.counts)

    def count(self, keyword: str) -> int:
        return self.counts.get(keyword, 0)

    def add(self, text: Iterable[str]) -> None:
        for k in set(text):
            self.counts[k] = self.counts.get(k, 0) + 1

    def remove(self, text: Iterable[str]) -> List[str]:
        """Decrement every keyword; returns the keywords whose count hit zero."""
        words = set(text)
        missing = [k for k in words if self.counts.get(k, 0) <= 0]
        if missing:
            raise UnderflowViolation(f"frequency underflow for {sorted(missing)}")
        zeroed: List[str] = []
        for k in words:
            self.counts[k] -= 1
            if self.counts[k] == 0:
                del self.counts[k]
                zeroed.append(k)
        return zeroed

    def least_frequent_keyword(self, text: Sequence[str]) -> str:
        # ties go to the lexicographically smallest keyword
        return min(text, key=lambda k: (self.count(k), k))

    def snapshot(self) -> Dict[str, int]:
        return dict(self.counts)


@dataclass(eq=False)
class SharedQueryList:
    keyword: str
    level: Optional[int] = None
    queries: List[ContinuousQuery] = field(default_factory=list)
    owners: List["TextualNode"] = field(default_factory=list)

    @property
    def ref_count(self) -> int:
        return len(self.owners)

    @property
    def shared(self) -> bool:
        return len(self.owners) > 1

    def __len__(self) -> int:
        return len(self.queries)

    def __contains__(self, q: ContinuousQuery) -> bool:
        return q in self.queries


@dataclass(eq=False)
class TextualNode:
    path: Tuple[str, ...]
    cell: MBR = UNIT_SPACE
    level: Optional[int] = None
    frequent: bool = False
    children: Dict[str, "TextualNode"] = field(default_factory=dict)
    qlist_ref: Optional[SharedQueryList] = None

    def __post_init__(self) -> None:
        if self.qlist_ref is None:
            self.qlist_ref = SharedQueryList(keyword=self.path[0], level=self.level, owners=[self])

    @property
    def qlist(self) -> List[ContinuousQuery]:
        return self.qlist_ref.queries

    @property
    def shared(self) -> bool:
        return self.qlist_ref.shared

    @property
    def is_top(self) -> bool:
        return len(self.path) == 1

    def adopt(self, lst: SharedQueryList) -> None:
        self.detach()
        lst.owners.append(self)
        self.qlist_ref = lst

    def detach(self) -> None:
        if self.qlist_ref is not None and self in self.qlist_ref.owners:
            self.qlist_ref.owners.remove(self)

    def privatize(self, queries: List[ContinuousQuery]) -> None:
        self.adopt(SharedQueryList(keyword=self.path[0], level=self.level, queries=list(queries)))


@dataclass
class OverflowGroup:
    node: TextualNode
    queries: List[ContinuousQuery]


@dataclass
class InsertOutcome:
    attached_node: Optional[TextualNode]
    overflow: List[OverflowGroup] = field(default_factory=list)


@dataclass
class AkiSearch:
    to_verify: List[ContinuousQuery] = field(default_factory=list)
    exact: List[ContinuousQuery] = field(default_factory=list)
    frequent_keywords: List[str] = field(default_factory=list)
    lookups: int = 0
    visited_nodes: int = 0

    @property
    def candidates(self) -> List[ContinuousQuery]:
        return self.to_verify + self.exact


def below_median(queries: Sequence[ContinuousQuery]) -> List[ContinuousQuery]:
    """Queries whose MBR area is strictly below the (upper) median area."""
    if not queries:
        return []
    ordered = sorted(queries, key=lambda q: q.area)
    median = ordered[len(ordered) // 2].area
    return [q for q in ordered if q.area < median]


class AKI:
    def __init__(
        self,
        theta: int = DEFAULT_THETA,
        fm: Optional[FrequenciesMap] = None,
        cell: MBR = UNIT_SPACE,
        level: Optional[int] = None,
        descent_factor: int = DEFAULT_DESCENT_FACTOR,
    ):
        self.theta = theta
        self.fm = fm if fm is not None else FrequenciesMap()
        self.cell = cell
        self.level = level
        self.descent_factor = descent_factor
        self.top: Dict[str, TextualNode] = {}
        self.pins: Dict[str, int] = {}
        self._touched: List[TextualNode] = []

    # ------------------------------------------------------------------
    # structure helpers
    # ------------------------------------------------------------------

    def is_empty(self) -> bool:
        return not self.top

    def iter_nodes(self) -> Iterator[TextualNode]:
        stack = list(self.top.values())
        while stack:
            node = stack.pop()
            yield node
            stack.extend(node.children.values())

    def node_count(self) -> int:
        return sum(1 for _ in self.iter_nodes())

    def queries(self) -> List[ContinuousQuery]:
        seen: Dict[int, ContinuousQuery] = {}
        for node in self.iter_nodes():
            for q in node.qlist:
                seen.setdefault(id(q), q)
        return list(seen.values())

    def pin(self, keywords: Iterable[str]) -> None:
        for k in keywords:
            self.pins[k] = self.pins.get(k, 0) + 1

    def unpin(self, keywords: Iterable[str]) -> None:
        for k in keywords:
            left = self.pins.get(k, 0) - 1
            if left > 0:
                self.pins[k] = left
            else:
                self.pins.pop(k, None)

    def pinned(self, keyword: str) -> bool:
        return self.pins.get(keyword, 0) > 0

    def _new_node(self, path: Tuple[str, ...]) -> TextualNode:
        return TextualNode(path=path, cell=self.cell, level=self.level)

    def top_or_create(self, keyword: str) -> TextualNode:
        node = self.top.get(keyword)
        if node is None:
            node = self._new_node((keyword,))
            self.top[keyword] = node
        return node

    def _child_or_create(self, node: TextualNode, keyword: str) -> TextualNode:
        child = node.children.get(keyword)
        if child is None:
            child = self._new_node(node.path + (keyword,))
            node.children[keyword] = child
        return child

    def find(self, q: ContinuousQuery) -> Optional[TextualNode]:
        for k in q.text:
            node = self.top.get(k)
            if node is not None and q in node.qlist:
                return node
        node = self.top.get(q.text[0])
        depth = 1
        while node is not None and depth < len(q.text):
            node = node.children.get(q.text[depth])
            depth += 1
            if node is not None and q in node.qlist:
                return node
        return None

    # ------------------------------------------------------------------
    # insertion
    # ------------------------------------------------------------------

    def add(self, q: ContinuousQuery) -> InsertOutcome:
        """Standalone use: count the query, then insert it."""
        self.fm.add(q.text)
        return self.insert(q)

    def insert(self, q: ContinuousQuery, kmin: Optional[str] = None) -> InsertOutcome:
        """Attach ``q``; the frequencies map must already count it."""
        self._touched = []
        pending: Deque[ContinuousQuery] = deque()
        kmin = kmin or self.fm.least_frequent_keyword(q.text)
        node = self.top.get(kmin)
        if node is None or not node.frequent:
            self._attach_infrequent(self.top_or_create(kmin), q, pending)
        else:
            self._place(q, pending)
        while pending:
            self._place(pending.popleft(), pending)
        return InsertOutcome(attached_node=self.find(q), overflow=self._overflow_groups())

    def _attach_infrequent(self, node: TextualNode, q: ContinuousQuery, pending: Deque) -> None:
        if q in node.qlist:
            return
        if node.shared and len(node.qlist) >= self.theta:
            self.separate(node)
        node.qlist.append(q)
        if len(node.qlist) > self.theta:
            self._split(node, pending)

    def _place(self, q: ContinuousQuery, pending: Deque) -> None:
        # another infrequent node with room, scanning keywords lexicographically
        for k in q.text:
            node = self.top.get(k)
            if node is None:
                self.top_or_create(k).qlist.append(q)
                return
            if node.frequent:
                continue
            if q in node.qlist:
                return
            if len(node.qlist) >= self.theta and node.shared:
                self.separate(node)
            if len(node.qlist) < self.theta:
                node.qlist.append(q)
                return
        # no room anywhere: every keyword of q becomes frequent, then walk
        for k in q.text:
            node = self.top[k]
            if not node.frequent:
                self._mark_frequent(node, pending)
        self._walk(self.top[q.text[0]], q, pending)

    def _walk(self, node: TextualNode, q: ContinuousQuery, pending: Deque) -> None:
        depth = len(node.path)
        while node.frequent and depth < len(q.text):
            node = self._child_or_create(node, q.text[depth])
            depth += 1
        node.qlist.append(q)
        if node.frequent:
            self._touched.append(node)
        elif len(node.qlist) > self.theta:
            self._split(node, pending)

    def _mark_frequent(self, node: TextualNode, pending: Deque) -> None:
        if node.shared:
            self.separate(node)
        queries = list(node.qlist)
        node.frequent = True
        node.qlist.clear()
        logger.debug("Textual node %s marked frequent (%d queries)", "/".join(node.path), len(queries))
        if node.is_top:
            pending.extend(queries)
        else:
            for qe in queries:
                self._walk(node, qe, pending)

    def _split(self, node: TextualNode, pending: Deque) -> None:
        if node.shared:
            self.separate(node)
            if len(node.qlist) <= self.theta:
                return
        self._mark_frequent(node, pending)

    def separate(self, node: TextualNode) -> None:
        """Give every owner of a shared list a private copy of its overlapping queries."""
        lst = node.qlist_ref
        if not lst.shared:
            return
        for owner in list(lst.owners):
            owner.privatize([q for q in lst.queries if mbr_overlaps(q.mbr, owner.cell)])
        logger.debug("Shared list for %s separated", lst.keyword)

    def _overflow_groups(self) -> List[OverflowGroup]:
        limit = self.descent_factor * self.theta
        groups: List[OverflowGroup] = []
        seen = set()
        for node in self._touched:
            if id(node) in seen:
                continue
            seen.add(id(node))
            if node.frequent and len(node.qlist) > limit:
                candidates = below_median(node.qlist)
                if candidates:
                    groups.append(OverflowGroup(node=node, queries=candidates))
        self._touched = []
        return groups

    # ------------------------------------------------------------------
    # search
    # ------------------------------------------------------------------

    def search(self, keywords: Sequence[str]) -> AkiSearch:
        out = AkiSearch()
        for i, k in enumerate(keywords):
            out.lookups += 1
            node = self.top.get(k)
            if node is None:
                continue
            out.visited_nodes += 1
            if not node.frequent:
                out.to_verify.extend(node.qlist)
                continue
            out.frequent_keywords.append(k)
            self._search_frequent(node, i, keywords, out)
        return out

    def _search_frequent(self, node: TextualNode, i: int, keywords: Sequence[str], out: AkiSearch) -> None:
        if not node.frequent:
            out.to_verify.extend(node.qlist)
            return
        out.exact.extend(node.qlist)
        for j in range(i + 1, len(keywords)):
            out.lookups += 1
            child = node.children.get(keywords[j])
            if child is not None:
                out.visited_nodes += 1
                self._search_frequent(child, j, keywords, out)

    # ------------------------------------------------------------------
    # removal and maintenance
    # ------------------------------------------------------------------

    def remove(self, q: ContinuousQuery) -> bool:
        found = False
        for k in q.text:
            node = self.top.get(k)
            if node is not None and q in node.qlist:
                node.qlist.remove(q)
                found = True
        node = self.top.get(q.text[0])
        depth = 1
        while node is not None and depth < len(q.text):
            node = node.children.get(q.text[depth])
            depth += 1
            if node is not None and q in node.qlist:
                node.qlist.remove(q)
                found = True
        for k in q.text:
            self._prune_top(k)
        return found

    def discard(self, q: ContinuousQuery) -> bool:
        """Standalone use: remove the query and uncount it."""
        found = self.remove(q)
        if found:
            self.fm.remove(q.text)
        return found

    def sweep(self, now: int) -> List[ContinuousQuery]:
        """Drop expired or deleted queries from every node; returns the ones removed."""
        removed: Dict[int, ContinuousQuery] = {}
        for node in self.iter_nodes():
            lst = node.qlist
            if not lst:
                continue
            kept = []
            for q in lst:
                if q.deleted or q.t_exp <= now:
                    removed.setdefault(id(q), q)
                else:
                    kept.append(q)
            if len(kept) != len(lst):
                lst[:] = kept
        return list(removed.values())

    def demote_if_infrequent(self, node: TextualNode) -> bool:
        if not node.frequent:
            return False
        if node.is_top and self.pinned(node.path[0]):
            return False
        live: Dict[int, ContinuousQuery] = {}
        stack = [node]
        while stack:
            n = stack.pop()
            for q in n.qlist:
                if not q.deleted:
                    live.setdefault(id(q), q)
            if len(live) > self.theta:
                return False
            stack.extend(n.children.values())
        node.frequent = False
        node.children = {}
        node.privatize(list(live.values()))
        logger.debug("Textual node %s demoted to infrequent", "/".join(node.path))
        return True

    def demote_all(self) -> int:
        demoted = 0
        for node in list(self.top.values()):
            demoted += self._demote_subtree(node)
        return demoted

    def _demote_subtree(self, node: TextualNode) -> int:
        demoted = 0
        for child in list(node.children.values()):
            demoted += self._demote_subtree(child)
        if node.frequent and self.demote_if_infrequent(node):
            demoted += 1
        return demoted

    def remove_keyword(self, keyword: str) -> None:
        node = self.top.get(keyword)
        if node is None or self.pinned(keyword):
            return
        for n in [node, *self._descendants(node)]:
            n.detach()
        del self.top[keyword]

    def _descendants(self, node: TextualNode) -> Iterator[TextualNode]:
        stack = list(node.children.values())
        while stack:
            n = stack.pop()
            yield n
            stack.extend(n.children.values())

    def prune(self) -> None:
        for k in list(self.top):
            self._prune_top(k)

    def _prune_top(self, keyword: str) -> None:
        node = self.top.get(keyword)
        if node is None:
            return
        self._prune_children(node)
        if not node.qlist and not node.children and not self.pinned(keyword):
            node.detach()
            del self.top[keyword]

    def _prune_children(self, node: TextualNode) -> None:
        for k, child in list(node.children.items()):
            self._prune_children(child)
            if not child.qlist and not child.children:
                child.detach()
                del node.children[k]
