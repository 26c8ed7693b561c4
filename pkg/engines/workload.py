"""Synthetic workloads (Zipfian keywords, uniform or skewed locations) and TSV I/O.

TSV layout, UTF-8, LF line endings, one record per line:

    queries:  id  x  y  x2  y2  keywords  t_exp
    objects:  id  x  y  keywords                 (point)
              id  x  y  x2  y2  keywords         (rectangle; location is its center)

Keywords are space separated. A query whose keyword column contains ``|``
is a DNF query; each ``|``-separated group is one conjunction.
"""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Iterable, List, Literal, Optional, Sequence, Union

import numpy as np
from pydantic import BaseModel, field_validator, model_validator

from engines.common import (
    ContinuousQuery,
    DnfQuery,
    FastError,
    ParseError,
    SpatioTextualObject,
    make_dnf,
    make_object,
    make_query,
)

logger = logging.getLogger(__name__)

QueryRecord = Union[ContinuousQuery, DnfQuery]


class WorkloadSpec(BaseModel):
    n_queries: int = 5000
    n_objects: int = 1000
    zipf_exponent: float = 1.0
    vocabulary_size: int = 10000
    keywords_per_query: int = 3
    keywords_per_object: int = 10
    # uniform: everything uniform; gaussian: objects follow the query Gaussian;
    # shifted: objects follow a Gaussian moved away from the queries
    spatial_dist: Literal["uniform", "gaussian", "shifted"] = "uniform"
    gaussian_mu: float = 0.5
    gaussian_sigma: float = 0.1
    shift: float = 0.25
    range_fraction: float = 0.01
    fixed_side: bool = False
    lifetime_min: int = 100_000
    lifetime_max: int = 1_000_000
    rect_fraction: float = 0.0
    dnf_fraction: float = 0.0
    dnf_clauses: int = 2
    rng_seed: int = 42

    @field_validator(
        "n_queries",
        "n_objects",
        "vocabulary_size",
        "keywords_per_query",
        "keywords_per_object",
        "lifetime_min",
        "dnf_clauses",
    )
    def validate_positive(cls, v: int) -> int:  # noqa: D417
        if v < 1:
            raise ValueError("must be positive")
        return v

    @field_validator("range_fraction")
    def validate_range(cls, v: float) -> float:  # noqa: D417
        if not 0.0 < v <= 1.0:
            raise ValueError("range_fraction must be in (0, 1]")
        return v

    @field_validator("rect_fraction", "dnf_fraction")
    def validate_fraction(cls, v: float) -> float:  # noqa: D417
        if not 0.0 <= v <= 1.0:
            raise ValueError("fraction must be in [0, 1]")
        return v

    @field_validator("zipf_exponent")
    def validate_exponent(cls, v: float) -> float:  # noqa: D417
        if v < 0:
            raise ValueError("zipf_exponent must be non-negative")
        return v

    @model_validator(mode="after")
    def validate_lifetimes(self) -> "WorkloadSpec":
        if self.lifetime_max < self.lifetime_min:
            raise ValueError("lifetime_max must be >= lifetime_min")
        if self.keywords_per_query > self.vocabulary_size or self.keywords_per_object > self.vocabulary_size:
            raise ValueError("keywords per record cannot exceed the vocabulary")
        return self


class ZipfKeywords:
    """Draws keyword ranks 1..V with probability proportional to rank^-s."""

    def __init__(self, vocabulary_size: int, exponent: float, rng: np.random.Generator):
        ranks = np.arange(1, vocabulary_size + 1, dtype=float)
        weights = ranks ** (-exponent)
        self.cdf = np.cumsum(weights / weights.sum())
        self.cdf[-1] = 1.0
        self.rng = rng

    def ranks(self, size: int) -> np.ndarray:
        return np.searchsorted(self.cdf, self.rng.random(size), side="right") + 1

    def draw(self, k: int) -> List[str]:
        chosen: set = set()
        while len(chosen) < k:
            for rank in self.ranks(k - len(chosen)):
                chosen.add(f"k{int(rank)}")
        return sorted(chosen)


class _Generator:
    def __init__(self, spec: WorkloadSpec, stream: int):
        self.spec = spec
        self.rng = np.random.default_rng([spec.rng_seed, stream])
        self.words = ZipfKeywords(spec.vocabulary_size, spec.zipf_exponent, self.rng)

    def location(self, mu: Optional[float] = None) -> tuple:
        spec = self.spec
        if mu is None:
            x, y = self.rng.random(2)
        else:
            x, y = self.rng.normal(mu, spec.gaussian_sigma, size=2)
        return float(np.clip(x, 0.0, 1.0)), float(np.clip(y, 0.0, 1.0))

    def box(self, center: tuple) -> tuple:
        f = self.spec.range_fraction
        side = f if self.spec.fixed_side else float(self.rng.uniform(0.0, f)) or f
        half = side / 2.0
        cx, cy = center
        return (max(cx - half, 0.0), max(cy - half, 0.0), min(cx + half, 1.0), min(cy + half, 1.0))


def gen_queries(spec: WorkloadSpec) -> List[QueryRecord]:
    g = _Generator(spec, stream=0)
    mu = None if spec.spatial_dist == "uniform" else spec.gaussian_mu
    out: List[QueryRecord] = []
    for n in range(spec.n_queries):
        mbr = g.box(g.location(mu))
        t_exp = int(g.rng.integers(spec.lifetime_min, spec.lifetime_max + 1))
        qid = f"q{n}"
        if spec.dnf_fraction and g.rng.random() < spec.dnf_fraction:
            clauses = [g.words.draw(spec.keywords_per_query) for _ in range(spec.dnf_clauses)]
            out.append(make_dnf(qid, mbr, clauses, t_exp))
        else:
            out.append(make_query(qid, mbr, g.words.draw(spec.keywords_per_query), t_exp))
    logger.info("Generated %d queries (%s)", len(out), spec.spatial_dist)
    return out


def gen_objects(spec: WorkloadSpec) -> List[SpatioTextualObject]:
    g = _Generator(spec, stream=1)
    if spec.spatial_dist == "uniform":
        mu = None
    elif spec.spatial_dist == "gaussian":
        mu = spec.gaussian_mu
    else:
        mu = spec.gaussian_mu + spec.shift
    out: List[SpatioTextualObject] = []
    for n in range(spec.n_objects):
        loc = g.location(mu)
        rect = None
        if spec.rect_fraction and g.rng.random() < spec.rect_fraction:
            rect = g.box(loc)
            loc = ((rect[0] + rect[2]) / 2.0, (rect[1] + rect[3]) / 2.0)
        out.append(make_object(f"o{n}", loc, g.words.draw(spec.keywords_per_object), rect=rect))
    logger.info("Generated %d objects (%s)", len(out), spec.spatial_dist)
    return out


# =========================
# TSV
# =========================


def _fmt(v: float) -> str:
    return repr(float(v))


def _query_line(q: QueryRecord) -> str:
    if isinstance(q, DnfQuery):
        words = " | ".join(" ".join(c) for c in q.clauses)
    else:
        words = " ".join(q.text)
    return "\t".join([q.qid, *(_fmt(v) for v in q.mbr), words, str(q.t_exp)])


def _object_line(o: SpatioTextualObject) -> str:
    words = " ".join(o.text)
    if o.rect is not None:
        return "\t".join([o.oid, *(_fmt(v) for v in o.rect), words])
    return "\t".join([o.oid, _fmt(o.loc[0]), _fmt(o.loc[1]), words])


def save_tsv(path: Union[str, Path], records: Iterable[Union[QueryRecord, SpatioTextualObject]]) -> int:
    lines = []
    for r in records:
        lines.append(_object_line(r) if isinstance(r, SpatioTextualObject) else _query_line(r))
    Path(path).write_text("".join(line + "\n" for line in lines), encoding="utf-8")
    return len(lines)


def _floats(cols: Sequence[str], lineno: int) -> List[float]:
    try:
        return [float(c) for c in cols]
    except ValueError:
        raise ParseError(lineno, f"bad coordinate in {list(cols)}") from None


def _parse_query(cols: List[str], lineno: int) -> QueryRecord:
    if len(cols) != 7:
        raise ParseError(lineno, f"expected 7 columns, got {len(cols)}")
    qid, coords, words, t_raw = cols[0], _floats(cols[1:5], lineno), cols[5], cols[6]
    try:
        t_exp = int(t_raw)
    except ValueError:
        raise ParseError(lineno, f"bad t_exp {t_raw!r}") from None
    try:
        if "|" in words:
            return make_dnf(qid, coords, [c.split() for c in words.split("|")], t_exp)
        return make_query(qid, coords, words.split(), t_exp)
    except FastError as exc:
        raise ParseError(lineno, str(exc)) from exc


def _parse_object(cols: List[str], lineno: int) -> SpatioTextualObject:
    try:
        if len(cols) == 4:
            x, y = _floats(cols[1:3], lineno)
            return make_object(cols[0], (x, y), cols[3].split())
        if len(cols) == 6:
            rect = _floats(cols[1:5], lineno)
            center = ((rect[0] + rect[2]) / 2.0, (rect[1] + rect[3]) / 2.0)
            return make_object(cols[0], center, cols[5].split(), rect=rect)
    except ParseError:
        raise
    except FastError as exc:
        raise ParseError(lineno, str(exc)) from exc
    raise ParseError(lineno, f"expected 4 or 6 columns, got {len(cols)}")


def load_tsv(path: Union[str, Path], kind: Literal["queries", "objects"]) -> list:
    if kind not in ("queries", "objects"):
        raise ValueError(f"unknown record kind {kind!r}")
    parse = _parse_query if kind == "queries" else _parse_object
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            out.append(parse(line.split("\t"), lineno))
    return out
