import pytest
from pydantic import ValidationError

from engines.common import DuplicateQuery, Expired, make_dnf, make_object, make_query
from engines.fast_index import FastIndex, IndexConfig, MatchTrace


def _fill(index, queries):
    for q in queries:
        index.insert(q)
    return index


def _where(index, qid):
    """(level, coords, path) of every textual node holding ``qid``."""
    out = set()
    for pnode, tnode in index.iter_textual_nodes():
        if any(q.qid == qid for q in tnode.qlist):
            out.add((pnode.level, pnode.coords, tnode.path))
    return out


def test_index_config_validation():
    with pytest.raises(ValidationError):
        IndexConfig(theta=0)
    with pytest.raises(ValidationError):
        IndexConfig(gran_max=100)
    assert IndexConfig().theta == 5


def test_first_query_creates_top_node_and_one_textual_node():
    index = FastIndex(gran_max=8)
    index.insert(make_query("q1", (0.1, 0.1, 0.2, 0.2), ["a", "b"], 10))
    counts = index.structure_counts()
    assert counts["pyramid_nodes"] == 1
    assert counts["textual_nodes"] == 1
    assert counts["list_entries"] == 1
    assert index.store.get_at(3, 0, 0) is not None


def test_insert_rejects_expired_and_duplicates():
    index = FastIndex(gran_max=8)
    index.clock = 10
    with pytest.raises(Expired):
        index.insert(make_query("q1", (0.1, 0.1, 0.2, 0.2), ["a"], 10))
    index.insert(make_query("q1", (0.1, 0.1, 0.2, 0.2), ["a"], 11))
    with pytest.raises(DuplicateQuery):
        index.insert(make_query("q1", (0.1, 0.1, 0.2, 0.2), ["b"], 11))


def test_example_object_matches_only_q1(example_queries, example_object):
    index = _fill(FastIndex(theta=2, gran_max=8), example_queries)
    assert index.match(example_object).qids == {"q1"}


def test_empty_index_matches_nothing(example_object):
    assert FastIndex().match(example_object).qids == set()


def test_descent_with_relaxed_trigger(example_queries):
    index = _fill(FastIndex(theta=2, gran_max=2, descent_factor=1), example_queries)
    # the largest queries stay on the top level under their full keyword path
    assert _where(index, "q1") == {(1, (0, 0), ("k1", "k2"))}
    # q2 has the median area of the overflowing k1,k2 list, and only strictly smaller queries descend
    assert _where(index, "q2") == {(1, (0, 0), ("k1", "k2"))}
    # the smallest one moves down and is shared by the two cells it overlaps
    assert _where(index, "q3") == {(0, (0, 0), ("k1",)), (0, (1, 0), ("k1",))}
    left = index.store.get_at(0, 0, 0).aki.top["k1"]
    right = index.store.get_at(0, 1, 0).aki.top["k1"]
    assert left.qlist_ref is right.qlist_ref
    assert index.insert_stats.descents == 1
    top = index.store.get_at(1, 0, 0).aki
    assert top.pinned("k1") and top.pinned("k2")


def test_descended_queries_are_still_found(example_queries):
    index = _fill(FastIndex(theta=2, gran_max=2, descent_factor=1), example_queries)
    hit = make_object("o", (0.5, 0.15), ["k1", "k2"])
    assert index.match(hit).qids == {"q1", "q3"}


def test_descent_stops_at_min_level():
    index = FastIndex(theta=1, gran_max=4, descent_factor=1)
    # no query is narrower than a level-1 cell, so none may leave the top
    for n in range(6):
        side = 0.5 + 0.05 * n
        index.insert(make_query(f"q{n}", (0.0, 0.0, side, side), ["a"], 100))
    assert index.insert_stats.descents == 0
    assert {p.level for p, _ in index.iter_textual_nodes()} == {2}


def test_identical_small_queries_spread_below_theta():
    theta = 2
    index = FastIndex(theta=theta, gran_max=16, descent_factor=4)
    n = 4 * theta + 1
    for i in range(n):
        x = (i % 4) * 0.25 + 0.01
        y = (i // 4) * 0.25 + 0.01
        side = 0.01 + 0.001 * i
        index.insert(make_query(f"q{i}", (x, y, x + side, y + side), ["k1", "k2"], 100))
    assert index.insert_stats.descents > 0
    for pnode, tnode in index.iter_textual_nodes():
        if pnode.level < index.pyramid.top_level and not tnode.frequent:
            assert len(tnode.qlist) <= theta
    for i in range(n):
        x = (i % 4) * 0.25 + 0.01
        y = (i // 4) * 0.25 + 0.01
        assert f"q{i}" in index.match(make_object("o", (x, y), ["k1", "k2", "k9"])).qids


def test_rect_match_reports_replicated_query_once(example_queries):
    index = _fill(FastIndex(theta=2, gran_max=2, descent_factor=1), example_queries)
    o = make_object("o", (0.5, 0.5), ["k1", "k2"], rect=(0.0, 0.0, 1.0, 1.0))
    before = index.match_stats.queries_visited
    assert index.match(o).qids == {"q1", "q2", "q3"}
    # q3 is seen through both level-0 cells sharing its list
    assert index.match_stats.queries_visited - before == 4
    assert all(not q.result_flag for q in example_queries)


def test_degenerate_rect_equals_point_match(example_queries, example_object):
    index = _fill(FastIndex(theta=2, gran_max=8, descent_factor=1), example_queries)
    loc = example_object.loc
    rect = make_object("r", loc, example_object.text, rect=(loc[0], loc[1], loc[0], loc[1]))
    assert index.match(rect).qids == index.match(example_object).qids


def test_dnf_results_map_to_parent_once():
    index = FastIndex(theta=2, gran_max=8)
    d = make_dnf("d", (0.0, 0.0, 0.5, 0.5), [["a"], ["b"], ["c", "d"]], 100)
    subs = index.insert_dnf(d)
    assert len(subs) == 3
    assert index.match(make_object("o", (0.2, 0.2), ["a", "b"])).qids == {"d"}
    assert index.match(make_object("o", (0.2, 0.2), ["c"])).qids == set()
    assert d.result_flag is False
    assert all(not s.result_flag for s in subs)


def test_expired_queries_are_filtered_before_cleaning():
    index = FastIndex(theta=2, gran_max=8, clean_interval=1000)
    index.insert(make_query("short", (0.0, 0.0, 0.5, 0.5), ["a"], 5))
    index.insert(make_query("long", (0.0, 0.0, 0.5, 0.5), ["a"], 50))
    o = make_object("o", (0.1, 0.1), ["a"])
    assert index.match(o).qids == {"short", "long"}
    index.advance(5)
    assert index.match(o).qids == {"long"}


def test_keyword_sets_shrink_while_descending():
    index = FastIndex(theta=1, gran_max=8, descent_factor=1)
    for n in range(12):
        x = 0.05 * n
        index.insert(make_query(f"q{n}", (x, 0.1, x + 0.01 * (n + 1), 0.12), ["a", "b"], 100))
    o = make_object("o", (0.07, 0.11), ["a", "b", "z"])
    trace = MatchTrace()
    index.match_point(o, trace=trace)
    sets = [set(words) for _, words in trace.levels]
    assert sets[0] <= set(o.text)
    for upper, lower in zip(sets, sets[1:]):
        assert lower <= upper


def test_remove_drops_query_everywhere(example_queries, example_object):
    index = _fill(FastIndex(theta=2, gran_max=2, descent_factor=1), example_queries)
    assert index.remove("q3")
    assert _where(index, "q3") == set()
    assert "q3" not in index.live
    assert not index.remove("q3")
    assert index.remove("q1")
    assert index.match(example_object).qids == set()


def test_remove_dnf_parent_removes_all_clauses():
    index = FastIndex(theta=2, gran_max=8)
    index.insert_dnf(make_dnf("d", (0.0, 0.0, 0.5, 0.5), [["a"], ["b"]], 100))
    assert index.remove("d")
    assert index.match(make_object("o", (0.2, 0.2), ["a", "b"])).qids == set()
    assert index.fm.count("a") == 0
    assert index.store.nodes == {}


def test_stats_shape(example_queries):
    index = _fill(FastIndex(theta=2, gran_max=8), example_queries)
    stats = index.stats()
    assert stats["live_queries"] == 9
    assert stats["config"]["theta"] == 2
    assert stats["structure"]["replication"] >= 1.0
    assert stats["insert"]["queries"] == 9


def test_rejected_dnf_leaves_no_parent_behind():
    index = FastIndex(theta=2, gran_max=8)
    index.insert(make_query("d#1", (0.0, 0.0, 0.5, 0.5), ["b"], 100))
    with pytest.raises(DuplicateQuery):
        index.insert_dnf(make_dnf("d", (0.0, 0.0, 0.5, 0.5), [["a"], ["b"]], 100))
    assert index.dnf == {}
    assert set(index.live) == {"d#1"}
    assert index.fm.snapshot() == {"b": 1}
    assert index.match(make_object("o", (0.2, 0.2), ["a", "b"])).qids == {"d#1"}


def test_removing_rejected_dnf_keeps_colliding_query():
    index = FastIndex(theta=2, gran_max=8, clean_interval=1)
    index.insert(make_query("d#0", (0.0, 0.0, 0.5, 0.5), ["a"], 100))
    with pytest.raises(DuplicateQuery):
        index.insert_dnf(make_dnf("d", (0.0, 0.0, 0.5, 0.5), [["a"], ["b"]], 100))
    assert not index.remove("d")
    assert index.fm.snapshot() == {"a": 1}
    index.advance(1)
    assert index.match(make_object("o", (0.2, 0.2), ["a"])).qids == {"d#0"}


def test_plain_query_cannot_take_a_dnf_sub_id():
    index = FastIndex(theta=2, gran_max=8)
    index.insert_dnf(make_dnf("d", (0.0, 0.0, 0.5, 0.5), [["a"], ["b"]], 100))
    with pytest.raises(DuplicateQuery):
        index.insert(make_query("d#0", (0.0, 0.0, 0.5, 0.5), ["c"], 100))
    assert index.fm.snapshot() == {"a": 1, "b": 1}
