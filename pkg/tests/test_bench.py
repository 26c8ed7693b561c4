import csv

import pytest

from engines import bench
from engines.bench import BENCH_FIELDS, INDEX_KINDS, run_bench, run_point
from engines.common import MatchResult, OracleMismatch
from engines.fast_index import IndexConfig
from engines.workload import WorkloadSpec


def _spec(**kw):
    base = dict(
        n_queries=400,
        n_objects=40,
        vocabulary_size=50,
        keywords_per_query=2,
        keywords_per_object=10,
        range_fraction=0.1,
        rng_seed=9,
    )
    base.update(kw)
    return WorkloadSpec(**base)


@pytest.mark.parametrize("kind", INDEX_KINDS)
def test_every_index_kind_runs_and_checks_oracle(kind):
    metrics = run_point(_spec(dnf_fraction=0.1, rect_fraction=0.1), kind, IndexConfig(gran_max=64), oracle_sample=1.0)
    assert metrics.index == kind
    assert metrics.n_queries == 400
    assert metrics.oracle_checked == 40
    assert metrics.match_us_mean > 0
    row = metrics.as_row()
    assert set(row) == set(BENCH_FIELDS)


def test_all_kinds_report_the_same_matches():
    spec = _spec()
    totals = {kind: run_point(spec, kind, IndexConfig(gran_max=64), oracle_sample=0.0).matches_total for kind in INDEX_KINDS}
    assert len(set(totals.values())) == 1


def test_unknown_index_kind():
    with pytest.raises(ValueError):
        run_point(_spec(), "rtree", IndexConfig())


def test_mismatch_is_raised(monkeypatch):
    monkeypatch.setattr(bench, "oracle_match", lambda corpus, o, now: MatchResult(qids={"ghost"}))
    with pytest.raises(OracleMismatch):
        run_point(_spec(n_objects=3), "fast", IndexConfig(gran_max=64), oracle_sample=0.0)


def test_sweep_writes_csv(tmp_path):
    out = tmp_path / "bench.csv"
    rows = run_bench(
        _spec(n_objects=10),
        "fast",
        sweeps={"theta": [2, 5], "gran_max": [8]},
        base=IndexConfig(clean_interval=5),
        oracle_sample=0.5,
        out=out,
    )
    assert [r["theta"] for r in rows] == [2, 5]
    assert all(r["gran_max"] == 8 and r["clean_interval"] == 5 for r in rows)
    with open(out, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        assert reader.fieldnames == BENCH_FIELDS
        written = list(reader)
    assert [r["value"] for r in written] == ["2,8", "5,8"]
    assert written[0]["sweep"] == "theta,gran_max"


def test_sweep_over_workload_fields():
    rows = run_bench(_spec(n_objects=5), "ril", sweeps={"n_queries": [50, 100]}, oracle_sample=1.0)
    assert [r["n_queries"] for r in rows] == [50, 100]


def test_sweep_rejects_unknown_parameter():
    with pytest.raises(ValueError):
        run_bench(_spec(n_objects=5), "fast", sweeps={"colour": [1]})


def test_theta_trend_between_extremes():
    spec = _spec(n_queries=1500, n_objects=60)
    small = run_point(spec, "fast", IndexConfig(theta=1, gran_max=64), oracle_sample=0.0)
    large = run_point(spec, "fast", IndexConfig(theta=50, gran_max=64), oracle_sample=0.0)
    # a small theta builds more trie nodes; a large one leaves longer lists to verify
    assert small.textual_nodes > large.textual_nodes
    assert large.visited_queries_mean >= small.visited_queries_mean
    assert small.matches_total == large.matches_total


def test_full_theta_sweep_is_monotone():
    rows = run_bench(
        _spec(n_queries=10_000, n_objects=100),
        "fast",
        sweeps={"theta": [1, 2, 5, 10, 20, 50]},
        base=IndexConfig(gran_max=64),
        oracle_sample=0.0,
    )
    visited = [r["visited_queries_mean"] for r in rows]
    nodes = [r["textual_nodes"] for r in rows]
    assert visited == sorted(visited)
    assert nodes == sorted(nodes, reverse=True)
    assert len({r["matches_total"] for r in rows}) == 1


def test_clean_interval_trades_steps_for_structure_size():
    spec = _spec(n_queries=2000, n_objects=2000, lifetime_min=50, lifetime_max=1500)
    points = {
        interval: run_point(spec, "fast", IndexConfig(gran_max=64, clean_interval=interval), oracle_sample=0.0)
        for interval in (1, 10, 100, 1000)
    }
    assert [m.clean_steps for m in points.values()] == [2000, 200, 20, 2]
    sizes = [m.list_entries_mean for m in points.values()]
    assert sizes == sorted(sizes)
    assert sizes[-1] > sizes[0]
    assert all(m.list_entries_peak >= m.list_entries_mean for m in points.values())
