"""Shared domain types, geometry predicates and keyword helpers."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import FrozenSet, Iterable, List, Optional, Sequence, Set, Tuple

Point = Tuple[float, float]
MBR = Tuple[float, float, float, float]  # (x_min, y_min, x_max, y_max)

UNIT_SPACE: MBR = (0.0, 0.0, 1.0, 1.0)


# =========================
# Errors
# =========================


class FastError(ValueError):
    """Base class for every error raised by the index engines."""


class EmptyText(FastError):
    pass


class EmptyClause(FastError):
    pass


class OutOfSpace(FastError):
    pass


class InvalidLevel(FastError):
    pass


class InvalidCoords(FastError):
    pass


class Expired(FastError):
    pass


class UnderflowViolation(FastError):
    pass


class UnknownKeyword(FastError):
    pass


class DuplicateQuery(FastError):
    pass


class DivideByZero(FastError, ZeroDivisionError):
    pass


class OracleMismatch(FastError):
    pass


class ParseError(FastError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


# =========================
# Domain types
# =========================


@dataclass(eq=False)
class ContinuousQuery:
    qid: str
    mbr: MBR
    text: List[str]
    t_exp: int
    parent_qid: Optional[str] = None
    deleted: bool = False
    result_flag: bool = False
    # pyramid addresses this query descended from; their keywords stay frequent
    pinned_at: List[int] = field(default_factory=list)
    keyset: FrozenSet[str] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self.keyset = frozenset(self.text)

    @property
    def area(self) -> float:
        return mbr_area(self.mbr)

    @property
    def reported_qid(self) -> str:
        return self.parent_qid or self.qid


@dataclass(eq=False)
class DnfQuery:
    qid: str
    mbr: MBR
    clauses: List[List[str]]
    t_exp: int
    result_flag: bool = False


@dataclass
class SpatioTextualObject:
    oid: str
    loc: Point
    text: List[str]
    rect: Optional[MBR] = None

    @property
    def is_rect(self) -> bool:
        return self.rect is not None


@dataclass
class MatchResult:
    qids: Set[str] = field(default_factory=set)

    def __contains__(self, qid: str) -> bool:
        return qid in self.qids

    def __len__(self) -> int:
        return len(self.qids)


# =========================
# Text
# =========================


def normalize_text(raw_keywords: Iterable[str]) -> List[str]:
    """Lowercase, strip, deduplicate and sort keywords."""
    cleaned = {k.strip().lower() for k in raw_keywords if k and k.strip()}
    if not cleaned:
        raise EmptyText("no keyword survives normalization")
    return sorted(cleaned)


# =========================
# Geometry (closed on every edge)
# =========================


def point_mbr(p: Point) -> MBR:
    return (p[0], p[1], p[0], p[1])


def mbr_contains(mbr: MBR, p: Point) -> bool:
    return mbr[0] <= p[0] <= mbr[2] and mbr[1] <= p[1] <= mbr[3]


def mbr_overlaps(a: MBR, b: MBR) -> bool:
    return a[0] <= b[2] and b[0] <= a[2] and a[1] <= b[3] and b[1] <= a[3]


def mbr_area(mbr: MBR) -> float:
    return (mbr[2] - mbr[0]) * (mbr[3] - mbr[1])


def mbr_intersection(a: MBR, b: MBR) -> Optional[MBR]:
    if not mbr_overlaps(a, b):
        return None
    return (max(a[0], b[0]), max(a[1], b[1]), min(a[2], b[2]), min(a[3], b[3]))


def query_side_length(q: ContinuousQuery) -> float:
    x_min, y_min, x_max, y_max = q.mbr
    return max(x_max - x_min, y_max - y_min)


def validate_point(p: Point) -> Point:
    x, y = float(p[0]), float(p[1])
    if not (0.0 <= x <= 1.0 and 0.0 <= y <= 1.0):
        raise OutOfSpace(f"point {p} outside the indexed space")
    return (x, y)


def validate_mbr(mbr: Sequence[float]) -> MBR:
    if len(mbr) != 4:
        raise OutOfSpace(f"MBR needs 4 coordinates, got {len(mbr)}")
    x_min, y_min, x_max, y_max = (float(v) for v in mbr)
    if x_min > x_max or y_min > y_max:
        raise OutOfSpace(f"inverted MBR {tuple(mbr)}")
    if x_min < 0.0 or y_min < 0.0 or x_max > 1.0 or y_max > 1.0:
        raise OutOfSpace(f"MBR {tuple(mbr)} outside the indexed space")
    return (x_min, y_min, x_max, y_max)


# =========================
# Builders
# =========================


def make_query(
    qid: str,
    mbr: Sequence[float],
    keywords: Iterable[str],
    t_exp: int,
    parent_qid: Optional[str] = None,
) -> ContinuousQuery:
    return ContinuousQuery(
        qid=str(qid),
        mbr=validate_mbr(mbr),
        text=normalize_text(keywords),
        t_exp=int(t_exp),
        parent_qid=parent_qid,
    )


def make_object(
    oid: str,
    loc: Point,
    keywords: Iterable[str],
    rect: Optional[Sequence[float]] = None,
) -> SpatioTextualObject:
    return SpatioTextualObject(
        oid=str(oid),
        loc=validate_point(loc),
        text=normalize_text(keywords),
        rect=validate_mbr(rect) if rect is not None else None,
    )


def make_dnf(qid: str, mbr: Sequence[float], clauses: Iterable[Iterable[str]], t_exp: int) -> DnfQuery:
    normalized: List[List[str]] = []
    seen = set()
    for clause in clauses:
        try:
            words = normalize_text(clause)
        except EmptyText:
            raise EmptyClause(f"query {qid} has an empty clause") from None
        key = tuple(words)
        if key in seen:
            continue
        seen.add(key)
        normalized.append(words)
    if not normalized:
        raise EmptyClause(f"query {qid} has no clauses")
    return DnfQuery(qid=str(qid), mbr=validate_mbr(mbr), clauses=normalized, t_exp=int(t_exp))


def dnf_expand(d: DnfQuery) -> List[ContinuousQuery]:
    """One sub-query per distinct conjunction, each pointing back at ``d``."""
    subs: List[ContinuousQuery] = []
    seen = set()
    for clause in d.clauses:
        try:
            words = normalize_text(clause)
        except EmptyText:
            raise EmptyClause(f"query {d.qid} has an empty clause") from None
        key = tuple(words)
        if key in seen:
            continue
        seen.add(key)
        subs.append(
            ContinuousQuery(
                qid=f"{d.qid}#{len(subs)}",
                mbr=d.mbr,
                text=words,
                t_exp=d.t_exp,
                parent_qid=d.qid,
            )
        )
    return subs
