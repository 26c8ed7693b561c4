"""Benchmark driver: build an index, stream objects, check against the oracle."""

from __future__ import annotations

import csv
import itertools
import logging
import time
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Union

import numpy as np

from engines.baselines import build_text_index
from engines.common import (
    ContinuousQuery,
    DnfQuery,
    MatchResult,
    OracleMismatch,
    SpatioTextualObject,
    dnf_expand,
    mbr_contains,
    mbr_overlaps,
)
from engines.fast_index import FastIndex, IndexConfig
from engines.oracle import QueryCorpus, compare, oracle_match
from engines.workload import WorkloadSpec, gen_objects, gen_queries

logger = logging.getLogger(__name__)

INDEX_KINDS = ("fast", "ril", "okt", "aki")

BENCH_FIELDS = [
    "index",
    "sweep",
    "value",
    "theta",
    "gran_max",
    "clean_interval",
    "n_queries",
    "n_objects",
    "insert_us_mean",
    "insert_us_p95",
    "match_us_mean",
    "match_us_p95",
    "visited_queries_mean",
    "visited_nodes_mean",
    "matches_total",
    "pyramid_nodes",
    "textual_nodes",
    "list_entries",
    "list_entries_mean",
    "list_entries_peak",
    "replication",
    "clean_steps",
    "clean_us_per_step",
    "oracle_checked",
]


@dataclass
class BenchMetrics:
    index: str
    sweep: str = ""
    value: Union[int, float, str] = ""
    theta: int = 5
    gran_max: int = 512
    clean_interval: int = 1000
    n_queries: int = 0
    n_objects: int = 0
    insert_us_mean: float = 0.0
    insert_us_p95: float = 0.0
    match_us_mean: float = 0.0
    match_us_p95: float = 0.0
    visited_queries_mean: float = 0.0
    visited_nodes_mean: float = 0.0
    matches_total: int = 0
    pyramid_nodes: int = 0
    textual_nodes: int = 0
    list_entries: int = 0
    list_entries_mean: float = 0.0
    list_entries_peak: int = 0
    replication: float = 0.0
    clean_steps: int = 0
    clean_us_per_step: float = 0.0
    oracle_checked: int = 0

    def as_row(self) -> Dict:
        return {k: v for k, v in asdict(self).items() if k in BENCH_FIELDS}


class TextOnlyMatcher:
    """Wraps a textual baseline with spatial and expiry checks so it can be streamed."""

    def __init__(self, kind: str, theta: int):
        self.kind = kind
        self.text = build_text_index(kind, theta=theta)
        self.clock = 0
        self.parents: Dict[str, DnfQuery] = {}
        self.visited = 0
        self.lookups = 0

    def insert(self, record: Union[ContinuousQuery, DnfQuery]) -> None:
        if isinstance(record, DnfQuery):
            self.parents[record.qid] = record
            for sub in dnf_expand(record):
                self.text.insert(sub)
        else:
            self.text.insert(record)

    def insert_dnf(self, record: DnfQuery) -> None:
        self.insert(record)

    def advance(self, delta: int = 1) -> list:
        self.clock += delta
        return []

    def match(self, o: SpatioTextualObject) -> MatchResult:
        res = self.text.search(o.text)
        self.visited += res.visited
        self.lookups += res.lookups
        result = MatchResult()
        for q in res.verified(o.text):
            if q.t_exp <= self.clock:
                continue
            hit = mbr_overlaps(q.mbr, o.rect) if o.rect is not None else mbr_contains(q.mbr, o.loc)
            if hit:
                result.qids.add(q.reported_qid)
        return result

    def structure(self) -> Dict:
        return {
            "pyramid_nodes": 0,
            "textual_nodes": self.text.node_count(),
            "list_entries": len(self.text),
            "replication": 1.0,
        }


def _percentile(values: Sequence[float], pct: float) -> float:
    return float(np.percentile(values, pct)) if len(values) else 0.0


def _mean(values: Sequence[float]) -> float:
    return float(np.mean(values)) if len(values) else 0.0


def _structure(index, index_kind: str) -> Dict:
    return index.structure_counts() if index_kind == "fast" else index.structure()


def _fresh(record):
    # index state lives on the query objects, so every point gets its own copies
    if isinstance(record, DnfQuery):
        return DnfQuery(qid=record.qid, mbr=record.mbr, clauses=[list(c) for c in record.clauses], t_exp=record.t_exp)
    return ContinuousQuery(qid=record.qid, mbr=record.mbr, text=list(record.text), t_exp=record.t_exp)


def run_point(
    spec: WorkloadSpec,
    index_kind: str,
    config: IndexConfig,
    oracle_sample: float = 0.01,
    queries: Optional[list] = None,
    objects: Optional[List[SpatioTextualObject]] = None,
    structure_samples: int = 50,
) -> BenchMetrics:
    """One sweep point. Raises OracleMismatch on the first wrong answer.

    Structure size is sampled ``structure_samples`` times while streaming, so
    queries that expire mid-stream still show up in the mean and peak.
    """
    if index_kind not in INDEX_KINDS:
        raise ValueError(f"index must be one of {INDEX_KINDS}")
    queries = [_fresh(r) for r in (queries if queries is not None else gen_queries(spec))]
    objects = objects if objects is not None else gen_objects(spec)
    rng = np.random.default_rng(spec.rng_seed)

    index = FastIndex(config) if index_kind == "fast" else TextOnlyMatcher(index_kind, config.theta)
    corpus = QueryCorpus()
    insert_us: List[float] = []
    for record in queries:
        start = time.perf_counter()
        if isinstance(record, DnfQuery):
            index.insert_dnf(record)
            corpus.add_dnf(record)
        else:
            index.insert(record)
            corpus.add(record)
        insert_us.append((time.perf_counter() - start) * 1e6)

    match_us: List[float] = []
    visited: List[float] = []
    visited_nodes: List[float] = []
    clean_us = 0.0
    clean_steps = 0
    checked = 0
    matches = 0
    sample_every = max(1, len(objects) // max(1, structure_samples))
    entries: List[int] = []
    for n, o in enumerate(objects):
        start = time.perf_counter()
        reports = index.advance(1)
        clean_us += (time.perf_counter() - start) * 1e6
        clean_steps += len(reports)
        if n % sample_every == 0:
            entries.append(int(_structure(index, index_kind)["list_entries"]))

        if index_kind == "fast":
            before_q = index.match_stats.queries_visited
            before_n = index.match_stats.textual_nodes + index.match_stats.pyramid_nodes
        else:
            before_q, before_n = index.visited, index.lookups
        start = time.perf_counter()
        result = index.match(o)
        match_us.append((time.perf_counter() - start) * 1e6)
        if index_kind == "fast":
            visited.append(index.match_stats.queries_visited - before_q)
            visited_nodes.append(index.match_stats.textual_nodes + index.match_stats.pyramid_nodes - before_n)
        else:
            visited.append(index.visited - before_q)
            visited_nodes.append(index.lookups - before_n)
        matches += len(result)

        if n == 0 or rng.random() < oracle_sample:
            checked += 1
            diff = compare(oracle_match(corpus, o, index.clock), result, o.oid)
            if diff is not None:
                raise OracleMismatch(f"{index_kind} disagrees with the oracle: {diff}")

    structure = _structure(index, index_kind)
    return BenchMetrics(
        index=index_kind,
        theta=config.theta,
        gran_max=config.gran_max,
        clean_interval=config.clean_interval,
        n_queries=len(queries),
        n_objects=len(objects),
        insert_us_mean=_mean(insert_us),
        insert_us_p95=_percentile(insert_us, 95),
        match_us_mean=_mean(match_us),
        match_us_p95=_percentile(match_us, 95),
        visited_queries_mean=_mean(visited),
        visited_nodes_mean=_mean(visited_nodes),
        matches_total=matches,
        pyramid_nodes=int(structure["pyramid_nodes"]),
        textual_nodes=int(structure["textual_nodes"]),
        list_entries=int(structure["list_entries"]),
        list_entries_mean=_mean(entries),
        list_entries_peak=max(entries, default=0),
        replication=float(structure["replication"]),
        clean_steps=clean_steps,
        clean_us_per_step=clean_us / clean_steps if clean_steps else 0.0,
        oracle_checked=checked,
    )


def _expand_sweeps(sweeps: Optional[Mapping[str, Iterable]]) -> List[Dict]:
    if not sweeps:
        return [{}]
    names = list(sweeps)
    return [dict(zip(names, combo)) for combo in itertools.product(*(list(sweeps[n]) for n in names))]


def run_bench(
    spec: WorkloadSpec,
    index_kind: str = "fast",
    sweeps: Optional[Mapping[str, Iterable]] = None,
    base: Optional[IndexConfig] = None,
    oracle_sample: float = 0.01,
    out: Optional[Union[str, Path]] = None,
) -> List[Dict]:
    """Run every sweep point; ``sweeps`` maps an IndexConfig or WorkloadSpec field to values."""
    base = base or IndexConfig()
    cache: Dict[str, tuple] = {}
    rows: List[Dict] = []
    for point in _expand_sweeps(sweeps):
        unknown = [k for k in point if k not in IndexConfig.model_fields and k not in WorkloadSpec.model_fields]
        if unknown:
            raise ValueError(f"cannot sweep unknown parameter(s) {unknown}")
        index_fields = {k: v for k, v in point.items() if k in IndexConfig.model_fields}
        spec_fields = {k: v for k, v in point.items() if k not in index_fields}
        point_spec = WorkloadSpec.model_validate({**spec.model_dump(), **spec_fields}) if spec_fields else spec
        config = base.model_copy(update=index_fields) if index_fields else base
        config = IndexConfig.model_validate(config.model_dump())
        key = point_spec.model_dump_json()
        if key not in cache:
            cache[key] = (gen_queries(point_spec), gen_objects(point_spec))
        queries, objects = cache[key]
        metrics = run_point(point_spec, index_kind, config, oracle_sample, queries=queries, objects=objects)
        metrics.sweep = ",".join(point) if point else ""
        metrics.value = ",".join(str(v) for v in point.values()) if point else ""
        rows.append(metrics.as_row())
        logger.info("Bench point done: %s=%s (%s)", metrics.sweep or "-", metrics.value or "-", index_kind)
    if out is not None:
        write_csv(out, rows)
    return rows


def write_csv(path: Union[str, Path], rows: Iterable[Dict]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=BENCH_FIELDS, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow(row)
