from engines import matching_service
from engines.common import MatchResult, make_object


def _post_example(client, example_queries):
    for q in example_queries:
        r = client.post(
            "/queries",
            json={"qid": q.qid, "mbr": list(q.mbr), "keywords": q.text, "t_exp": q.t_exp},
        )
        assert r.status_code == 200, r.text


def test_health(client):
    r = client.get("/health")
    assert r.status_code == 200
    assert r.json() == {"status": "ok", "live_queries": 0}


def test_subscribe_and_match_example(client, example_queries, example_object):
    _post_example(client, example_queries)
    r = client.post("/match", json={"oid": "o1", "loc": list(example_object.loc), "keywords": example_object.text})
    assert r.status_code == 200
    assert r.json() == {"oid": "o1", "clock": 1, "qids": ["q1"]}


def test_keywords_are_normalized(client):
    r = client.post("/queries", json={"qid": "a", "mbr": [0, 0, 1, 1], "keywords": ["Pizza ", "pizza", "Vegan"], "t_exp": 50})
    assert r.json()["text"] == ["pizza", "vegan"]


def test_invalid_query_is_rejected(client):
    r = client.post("/queries", json={"qid": "a", "mbr": [0.5, 0, 0.1, 1], "keywords": ["x"], "t_exp": 50})
    assert r.status_code == 400
    r = client.post("/queries", json={"qid": "b", "mbr": [0, 0, 1, 1], "keywords": [" "], "t_exp": 50})
    assert r.status_code == 400
    r = client.post("/queries", json={"qid": "c", "mbr": [0, 0, 1], "keywords": ["x"], "t_exp": 50})
    assert r.status_code == 422


def test_duplicate_and_expired_queries(client):
    body = {"qid": "a", "mbr": [0, 0, 1, 1], "keywords": ["x"], "t_exp": 50}
    assert client.post("/queries", json=body).status_code == 200
    assert client.post("/queries", json=body).status_code == 400
    client.post("/clock/advance", json={"delta": 60})
    r = client.post("/queries", json={**body, "qid": "late"})
    assert r.status_code == 400


def test_dnf_subscription(client):
    r = client.post("/queries/dnf", json={"qid": "d", "mbr": [0, 0, 0.5, 0.5], "clauses": [["a"], ["b", "c"]], "t_exp": 50})
    assert r.status_code == 200
    assert r.json()["sub_queries"] == ["d#0", "d#1"]
    r = client.post("/match", json={"loc": [0.2, 0.2], "keywords": ["a", "b", "c"]})
    assert r.json()["qids"] == ["d"]
    r = client.post("/match", json={"loc": [0.2, 0.2], "keywords": ["b"]})
    assert r.json()["qids"] == []


def test_rect_object(client, example_queries):
    _post_example(client, example_queries)
    r = client.post("/match", json={"loc": [0.5, 0.5], "keywords": ["k1", "k2"], "rect": [0, 0, 1, 1]})
    assert r.json()["qids"] == ["q1", "q2", "q3"]


def test_delete_query(client, example_queries, example_object):
    _post_example(client, example_queries)
    assert client.delete("/queries/q1").status_code == 200
    assert client.delete("/queries/q1").status_code == 404
    r = client.post("/match", json={"loc": list(example_object.loc), "keywords": example_object.text})
    assert r.json()["qids"] == []


def test_expiry_and_clean(client):
    client.post("/queries", json={"qid": "a", "mbr": [0, 0, 1, 1], "keywords": ["x"], "t_exp": 5})
    assert client.post("/clock/advance", json={"delta": 5}).json() == {"clock": 5}
    r = client.post("/match", json={"loc": [0.5, 0.5], "keywords": ["x"]})
    assert r.json()["qids"] == []
    steps = client.post("/clean", json={"steps": 1}).json()["steps"]
    assert steps[0]["removed"] == 1
    assert steps[0]["nodes_deleted"] == 1
    assert client.get("/stats").json()["live_queries"] == 0


def test_cleaner_pass_runs_owed_steps(client):
    client.post("/queries", json={"qid": "a", "mbr": [0, 0, 1, 1], "keywords": ["x"], "t_exp": 5})
    client.post("/clock/advance", json={"delta": 10})
    reports = matching_service.run_cleaner_once()
    assert [r.removed for r in reports] == [1]


def test_stats_and_reset(client, example_queries):
    _post_example(client, example_queries)
    stats = client.get("/stats").json()
    assert stats["live_queries"] == 9
    assert stats["config"]["gran_max"] == 64
    r = client.post("/index/reset", json={"theta": 3, "gran_max": 8, "clean_interval": 100, "descent_factor": 2})
    assert r.status_code == 200
    assert r.json()["config"]["theta"] == 3
    assert r.json()["live_queries"] == 0
    assert client.post("/index/reset", json={"gran_max": 100}).status_code == 422


def test_bench_endpoint(client):
    body = {
        "index": "okt",
        "workload": {"n_queries": 100, "n_objects": 10, "vocabulary_size": 40},
        "config": {"gran_max": 16},
        "sweeps": {"theta": [2, 5]},
        "oracle_sample": 1.0,
    }
    r = client.post("/bench", json=body)
    assert r.status_code == 200, r.text
    rows = r.json()["rows"]
    assert [row["theta"] for row in rows] == [2, 5]
    assert all(row["oracle_checked"] == 10 for row in rows)
    assert client.post("/bench", json={**body, "index": "grid"}).status_code == 400


def test_dnf_colliding_with_live_id_is_rejected_cleanly(client):
    client.post("/queries", json={"qid": "d#1", "mbr": [0, 0, 0.5, 0.5], "keywords": ["b"], "t_exp": 50})
    r = client.post("/queries/dnf", json={"qid": "d", "mbr": [0, 0, 0.5, 0.5], "clauses": [["a"], ["b"]], "t_exp": 50})
    assert r.status_code == 400
    assert client.delete("/queries/d").status_code == 404
    r = client.post("/match", json={"loc": [0.2, 0.2], "keywords": ["a", "b"]})
    assert r.json()["qids"] == ["d#1"]


def test_match_reports_the_clock_it_ran_at(client, monkeypatch):
    o = make_object("o", (0.5, 0.5), ["x"])
    result, clock = matching_service.publish(o)
    assert (result.qids, clock) == (set(), 1)
    monkeypatch.setattr(matching_service, "publish", lambda obj: (MatchResult(qids={"a"}), 41))
    r = client.post("/match", json={"loc": [0.5, 0.5], "keywords": ["x"]})
    assert r.json() == {"oid": "o", "clock": 41, "qids": ["a"]}


def test_expired_queries_are_not_counted_as_live(client):
    client.post("/queries", json={"qid": "a", "mbr": [0, 0, 1, 1], "keywords": ["x"], "t_exp": 5})
    client.post("/queries", json={"qid": "b", "mbr": [0, 0, 1, 1], "keywords": ["x"], "t_exp": 50})
    client.post("/clock/advance", json={"delta": 5})
    assert client.get("/health").json()["live_queries"] == 1
    stats = client.get("/stats").json()
    assert (stats["live_queries"], stats["awaiting_cleanup"]) == (1, 1)
    client.post("/clean", json={"steps": 1})
    assert client.get("/stats").json()["awaiting_cleanup"] == 0
