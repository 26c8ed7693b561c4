"""Brute-force matcher used as ground truth.

Only the geometry predicates from ``engines.common`` are shared with the
index; no pyramid or AKI code is involved.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Set

from engines.common import (
    ContinuousQuery,
    DnfQuery,
    MatchResult,
    SpatioTextualObject,
    mbr_contains,
    mbr_overlaps,
)


@dataclass
class QueryCorpus:
    queries: List[ContinuousQuery] = field(default_factory=list)
    dnf: List[DnfQuery] = field(default_factory=list)
    removed: Set[str] = field(default_factory=set)

    def add(self, q: ContinuousQuery) -> None:
        self.queries.append(q)

    def add_dnf(self, d: DnfQuery) -> None:
        self.dnf.append(d)

    def discard(self, qid: str) -> None:
        self.removed.add(qid)

    def __len__(self) -> int:
        return len(self.queries) + len(self.dnf)


def _spatial_hit(mbr, o: SpatioTextualObject) -> bool:
    if o.rect is not None:
        return mbr_overlaps(mbr, o.rect)
    return mbr_contains(mbr, o.loc)


def oracle_match(corpus: QueryCorpus, o: SpatioTextualObject, now: int) -> MatchResult:
    words = set(o.text)
    result = MatchResult()
    for q in corpus.queries:
        if q.qid in corpus.removed or q.t_exp <= now:
            continue
        if _spatial_hit(q.mbr, o) and set(q.text) <= words:
            result.qids.add(q.qid)
    for d in corpus.dnf:
        if d.qid in corpus.removed or d.t_exp <= now:
            continue
        if _spatial_hit(d.mbr, o) and any(set(c) <= words for c in d.clauses):
            result.qids.add(d.qid)
    return result


def oracle_text(queries: Iterable[ContinuousQuery], keywords: Iterable[str]) -> List[str]:
    words = set(keywords)
    return sorted(q.qid for q in queries if set(q.text) <= words)


def compare(
    expected: MatchResult, actual: MatchResult, oid: Optional[str] = None
) -> Optional[Dict[str, List[str]]]:
    """None when equal, else the missing/extra qids."""
    if expected.qids == actual.qids:
        return None
    return {
        "oid": oid,
        "missing": sorted(expected.qids - actual.qids),
        "extra": sorted(actual.qids - expected.qids),
    }
