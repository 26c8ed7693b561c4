"""FAST: spatial pyramid of AKIs with sharing, descent and lazy cleaning."""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import asdict, dataclass, field
from typing import Deque, Dict, List, Optional, Set, Tuple

from pydantic import BaseModel, field_validator

from engines.aki import AKI, FrequenciesMap, SharedQueryList
from engines.common import (
    MBR,
    ContinuousQuery,
    DnfQuery,
    DuplicateQuery,
    Expired,
    MatchResult,
    SpatioTextualObject,
    dnf_expand,
    mbr_contains,
    mbr_overlaps,
)
from engines.pyramid import NodeStore, PyramidConfig, PyramidNode

logger = logging.getLogger(__name__)


class IndexConfig(BaseModel):
    theta: int = 5
    gran_max: int = 512
    clean_interval: int = 1000
    # a frequent node descends its small queries once it holds more than descent_factor * theta
    descent_factor: int = 4

    @field_validator("theta", "clean_interval", "descent_factor")
    def validate_positive(cls, v: int) -> int:  # noqa: D417
        if v < 1:
            raise ValueError("must be >= 1")
        return v

    @field_validator("gran_max")
    def validate_gran_max(cls, v: int) -> int:  # noqa: D417
        if v < 2 or v & (v - 1):
            raise ValueError("gran_max must be a power of two >= 2")
        return v


@dataclass
class MatchStats:
    objects: int = 0
    pyramid_nodes: int = 0
    textual_nodes: int = 0
    queries_visited: int = 0
    lookups: int = 0


@dataclass
class InsertStats:
    queries: int = 0
    replicas: int = 0
    descents: int = 0
    merges: int = 0


@dataclass
class CleanReport:
    removed: int = 0
    demoted: int = 0
    nodes_deleted: int = 0
    address: Optional[int] = None


@dataclass
class MatchTrace:
    """Keyword sets searched per visited level, top to bottom."""

    levels: List[Tuple[int, List[str]]] = field(default_factory=list)


class FastIndex:
    def __init__(self, config: Optional[IndexConfig] = None, **overrides):
        self.config = config or IndexConfig(**overrides)
        self.theta = self.config.theta
        self.clean_interval = self.config.clean_interval
        self.pyramid = PyramidConfig(gran_max=self.config.gran_max)
        self.reset()

    def reset(self) -> None:
        self.fm = FrequenciesMap()
        self.store = NodeStore(self.pyramid, aki_factory=self._new_aki, on_create=self._enqueue)
        self.clean_queue: Deque[int] = deque()
        self.queued: Set[int] = set()
        self.clock = 0
        self.last_clean = 0
        self.live: Dict[str, ContinuousQuery] = {}
        self.dnf: Dict[str, DnfQuery] = {}
        self.dnf_subs: Dict[str, List[ContinuousQuery]] = {}
        self.match_stats = MatchStats()
        self.insert_stats = InsertStats()

    def _new_aki(self, cell: MBR, level: int) -> AKI:
        return AKI(
            theta=self.theta,
            fm=self.fm,
            cell=cell,
            level=level,
            descent_factor=self.config.descent_factor,
        )

    def _enqueue(self, node: PyramidNode) -> None:
        if node.address not in self.queued:
            self.queued.add(node.address)
            self.clean_queue.append(node.address)

    def __len__(self) -> int:
        """Registered queries that have not expired yet."""
        return sum(1 for q in self.live.values() if q.t_exp > self.clock)

    # ------------------------------------------------------------------
    # insertion
    # ------------------------------------------------------------------

    def insert(self, q: ContinuousQuery) -> None:
        if q.t_exp <= self.clock:
            raise Expired(f"query {q.qid} expires at {q.t_exp}, clock is {self.clock}")
        if q.qid in self.live or q.qid in self.dnf:
            raise DuplicateQuery(f"query {q.qid} already indexed")
        self.live[q.qid] = q
        self.fm.add(q.text)
        self.insert_stats.queries += 1
        self._insert_at(q, self.pyramid.top_level)

    def insert_dnf(self, d: DnfQuery) -> List[ContinuousQuery]:
        if d.t_exp <= self.clock:
            raise Expired(f"query {d.qid} expires at {d.t_exp}, clock is {self.clock}")
        if d.qid in self.dnf or d.qid in self.live:
            raise DuplicateQuery(f"query {d.qid} already indexed")
        subs = dnf_expand(d)
        taken = [s.qid for s in subs if s.qid in self.live or s.qid in self.dnf]
        if taken:
            raise DuplicateQuery(f"query {d.qid} expands to ids already indexed: {taken}")
        self.dnf[d.qid] = d
        self.dnf_subs[d.qid] = subs
        for sub in subs:
            self.insert(sub)
        return subs

    def _insert_at(self, q: ContinuousQuery, level: int, parent: Optional[PyramidNode] = None) -> None:
        cells = [
            c
            for c in self.pyramid.cells_overlapping(q.mbr, level)
            if parent is None or (c[0] // 2, c[1] // 2) == parent.coords
        ]
        kmin = self.fm.least_frequent_keyword(q.text)
        shared: Optional[SharedQueryList] = None
        for x_c, y_c in cells:
            pnode = self.store.get_or_create(level, x_c, y_c)
            self.insert_stats.replicas += 1
            if shared is not None and self._merge(pnode.aki, shared):
                self.insert_stats.merges += 1
                continue
            outcome = pnode.aki.insert(q, kmin)
            attached = outcome.attached_node
            if attached is not None and attached.is_top and not attached.frequent:
                shared = attached.qlist_ref
            for group in outcome.overflow:
                if level > 0:
                    self.descend(pnode, group.node, group.queries, level - 1)

    def _merge(self, aki: AKI, shared: SharedQueryList) -> bool:
        """Point this AKI's infrequent node for the shared keyword at ``shared``."""
        if len(shared) > self.theta:
            return False
        node = aki.top.get(shared.keyword)
        if node is None:
            aki.top_or_create(shared.keyword).adopt(shared)
            return True
        if node.qlist_ref is shared:
            return True
        if node.frequent or node.shared:
            return False
        extra = [x for x in node.qlist if x not in shared.queries]
        if len(shared) + len(extra) > self.theta:
            return False
        shared.queries.extend(extra)
        node.adopt(shared)
        return True

    def descend(self, pnode: PyramidNode, tnode, queries: List[ContinuousQuery], to_level: int) -> int:
        """Move eligible ``queries`` from ``tnode`` to the children of ``pnode``."""
        aki = pnode.aki
        moving: List[ContinuousQuery] = []
        for q in queries:
            if q not in tnode.qlist:
                continue
            if self.pyramid.min_level(q) > to_level:
                continue
            # matching only carries keywords that are frequent here
            if not all(k in aki.top and aki.top[k].frequent for k in q.text):
                continue
            moving.append(q)
        for q in moving:
            tnode.qlist.remove(q)
            aki.pin(q.text)
            q.pinned_at.append(pnode.address)
        if moving:
            self.insert_stats.descents += len(moving)
            logger.debug(
                "Descending %d queries from node %s (level %d) to level %d",
                len(moving),
                pnode.address,
                pnode.level,
                to_level,
            )
        for q in moving:
            self._insert_at(q, to_level, parent=pnode)
        return len(moving)

    # ------------------------------------------------------------------
    # matching
    # ------------------------------------------------------------------

    def _alive(self, q: ContinuousQuery) -> bool:
        return not q.deleted and q.t_exp > self.clock

    def _report(self, q: ContinuousQuery, result: MatchResult, flagged: List) -> None:
        if q.result_flag:
            return
        q.result_flag = True
        flagged.append(q)
        if q.parent_qid is not None:
            parent = self.dnf.get(q.parent_qid)
            if parent is not None:
                if parent.result_flag:
                    return
                parent.result_flag = True
                flagged.append(parent)
        result.qids.add(q.reported_qid)

    def _collect(self, res, words: Set[str], spatial, result: MatchResult, flagged: List) -> None:
        self.match_stats.textual_nodes += res.visited_nodes
        self.match_stats.lookups += res.lookups
        self.match_stats.queries_visited += len(res.to_verify) + len(res.exact)
        for q in res.to_verify:
            if self._alive(q) and spatial(q) and q.keyset <= words:
                self._report(q, result, flagged)
        for q in res.exact:
            if self._alive(q) and spatial(q):
                self._report(q, result, flagged)

    def match(self, o: SpatioTextualObject, trace: Optional[MatchTrace] = None) -> MatchResult:
        if o.is_rect:
            return self.match_rect(o)
        return self.match_point(o, trace=trace)

    def match_point(self, o: SpatioTextualObject, trace: Optional[MatchTrace] = None) -> MatchResult:
        self.match_stats.objects += 1
        result = MatchResult()
        flagged: List = []
        words = set(o.text)
        keywords = list(o.text)

        def inside(q: ContinuousQuery) -> bool:
            return mbr_contains(q.mbr, o.loc)

        try:
            for level in range(self.pyramid.top_level, -1, -1):
                if not keywords:
                    break
                x_c, y_c = self.pyramid.cell_coords(o.loc, level)
                node = self.store.get_at(level, x_c, y_c)
                if node is None:
                    continue
                self.match_stats.pyramid_nodes += 1
                if trace is not None:
                    trace.levels.append((level, list(keywords)))
                res = node.aki.search(keywords)
                self._collect(res, words, inside, result, flagged)
                keywords = res.frequent_keywords
        finally:
            for item in flagged:
                item.result_flag = False
        return result

    def match_rect(self, o: SpatioTextualObject) -> MatchResult:
        self.match_stats.objects += 1
        rect = o.rect if o.rect is not None else (o.loc[0], o.loc[1], o.loc[0], o.loc[1])
        result = MatchResult()
        flagged: List = []
        words = set(o.text)
        top = self.pyramid.top_level
        carried: Dict[Tuple[int, int, int], List[str]] = {}

        def carried_into(level: int, x_c: int, y_c: int) -> List[str]:
            # keywords reaching a cell at `level` from its ancestors; absent nodes pass them through
            if level > top:
                return list(o.text)
            key = (level, x_c, y_c)
            if key not in carried:
                carried[key] = carried_into(level + 1, x_c // 2, y_c // 2)
            return carried[key]

        def overlapping(q: ContinuousQuery) -> bool:
            return mbr_overlaps(q.mbr, rect)

        try:
            for level in range(top, -1, -1):
                nodes = self.store.relevant_nodes(rect, level)
                for node in nodes:
                    x_c, y_c = node.coords
                    keywords = carried_into(level + 1, x_c // 2, y_c // 2) if level < top else list(o.text)
                    if not keywords:
                        carried[(level, x_c, y_c)] = []
                        continue
                    self.match_stats.pyramid_nodes += 1
                    res = node.aki.search(keywords)
                    self._collect(res, words, overlapping, result, flagged)
                    carried[(level, x_c, y_c)] = res.frequent_keywords
        finally:
            for item in flagged:
                item.result_flag = False
        return result

    # ------------------------------------------------------------------
    # cleaning and removal
    # ------------------------------------------------------------------

    def _retire(self, q: ContinuousQuery) -> None:
        """First removal of a query: mark it, uncount it, release its pins."""
        q.deleted = True
        # only the registered object owns the keyword counts under its qid
        if self.live.get(q.qid) is not q:
            return
        del self.live[q.qid]
        self.fm.remove(q.text)
        for address in q.pinned_at:
            node = self.store.get_node(address)
            if node is not None:
                node.aki.unpin(q.text)
        q.pinned_at.clear()
        if q.parent_qid is not None:
            subs = self.dnf_subs.get(q.parent_qid, [])
            if all(s.deleted for s in subs):
                self.dnf.pop(q.parent_qid, None)
                self.dnf_subs.pop(q.parent_qid, None)

    def clean_step(self) -> CleanReport:
        report = CleanReport()
        node: Optional[PyramidNode] = None
        while self.clean_queue:
            address = self.clean_queue.popleft()
            self.queued.discard(address)
            node = self.store.get_node(address)
            if node is not None:
                break
        if node is None:
            return report
        report.address = node.address
        aki = node.aki
        for q in aki.sweep(self.clock):
            if not q.deleted:
                self._retire(q)
            report.removed += 1
        for k in list(aki.top):
            if self.fm.count(k) == 0:
                aki.remove_keyword(k)
        report.demoted = aki.demote_all()
        aki.prune()
        if aki.is_empty():
            self.store.delete(node.address)
            report.nodes_deleted = 1
        else:
            self._enqueue(node)
        if report.removed or report.demoted or report.nodes_deleted:
            logger.debug("Clean step %s", asdict(report))
        return report

    def drain(self, max_steps: Optional[int] = None) -> List[CleanReport]:
        """Run clean steps until the queue empties (or ``max_steps`` is hit)."""
        reports = []
        while self.clean_queue and (max_steps is None or len(reports) < max_steps):
            reports.append(self.clean_step())
        return reports

    def clean_round(self) -> List[CleanReport]:
        """Visit every queued node once."""
        return [self.clean_step() for _ in range(len(self.clean_queue))]

    def advance(self, delta: int = 1) -> List[CleanReport]:
        self.clock += delta
        reports = []
        while self.clock - self.last_clean >= self.clean_interval:
            self.last_clean += self.clean_interval
            reports.append(self.clean_step())
        return reports

    def remove(self, qid: str) -> bool:
        """Eagerly remove a live query, or every sub-query of a DNF query."""
        if qid in self.dnf:
            subs = list(self.dnf_subs.get(qid, []))
            removed = False
            for sub in subs:
                if self.live.get(sub.qid) is sub:
                    removed = self._remove_query(sub) or removed
            self.dnf.pop(qid, None)
            self.dnf_subs.pop(qid, None)
            return removed
        q = self.live.get(qid)
        if q is None:
            return False
        return self._remove_query(q)

    def _remove_query(self, q: ContinuousQuery) -> bool:
        pinned = list(q.pinned_at)
        self._retire(q)
        low = self.pyramid.min_level(q)
        for level in range(self.pyramid.top_level, low - 1, -1):
            for node in self.store.relevant_nodes(q.mbr, level):
                node.aki.remove(q)
                if node.aki.is_empty():
                    self.store.delete(node.address)
        for address in pinned:
            node = self.store.get_node(address)
            if node is None:
                continue
            node.aki.prune()
            if node.aki.is_empty():
                self.store.delete(node.address)
        return True

    # ------------------------------------------------------------------
    # introspection
    # ------------------------------------------------------------------

    def iter_textual_nodes(self):
        for pnode in self.store:
            for tnode in pnode.aki.iter_nodes():
                yield pnode, tnode

    def structure_counts(self) -> Dict[str, float]:
        textual = 0
        entries = 0
        seen_lists = set()
        for _, tnode in self.iter_textual_nodes():
            textual += 1
            lst = tnode.qlist_ref
            if id(lst) in seen_lists:
                continue
            seen_lists.add(id(lst))
            entries += len(lst)
        live = len(self.live)
        return {
            "pyramid_nodes": len(self.store),
            "textual_nodes": textual,
            "list_entries": entries,
            "replication": entries / live if live else 0.0,
        }

    def stats(self) -> Dict:
        return {
            "clock": self.clock,
            "live_queries": len(self),
            "awaiting_cleanup": len(self.live) - len(self),
            "dnf_queries": len(self.dnf),
            "clean_queue": len(self.clean_queue),
            "keywords": len(self.fm),
            "config": self.config.model_dump(),
            "structure": self.structure_counts(),
            "match": asdict(self.match_stats),
            "insert": asdict(self.insert_stats),
        }
