import json
from decimal import Decimal

import pytest
from fastapi.testclient import TestClient

from cxmine.service import create_app
from cxmine.store import AnnotationStore, Candidate


def cand(cid, verb, prep, text="Kim put the box on the mat."):
    return Candidate(
        candidate_id=cid,
        sentence_id=f"s-{cid}",
        text=text,
        verb=verb,
        dobj="box",
        prep=prep,
        pobj="mat",
        positions={"verb": [2], "dobj": [4], "prep": [5], "pobj": [7]},
        char_spans={"verb": [4, 7], "dobj": [8, 15], "prep": [16, 18], "pobj": [19, 26]},
    )


PUT_PREPS = ["on", "in", "at", "over", "under", "off", "near", "by", "behind", "beside"]


@pytest.fixture
def client(tmp_path):
    cands = [cand(f"c{i:02d}", "put", p) for i, p in enumerate(PUT_PREPS)]
    cands += [cand(f"d{i}", "laugh", "off") for i in range(2)]
    store = AnnotationStore(cands, event_log=tmp_path / "events.jsonl")
    app = create_app(store, c_hr=Decimal("0.2"))
    return TestClient(app)


def test_next_returns_candidate_with_spans(client):
    body = client.get("/api/next").json()
    assert body["exhausted"] is False
    assert body["verb"] == "put"
    assert set(body["spans"]) == {"verb", "dobj", "prep", "pobj"}
    assert body["quota"]["cap"] == 5


def test_label_then_progress(client):
    first = client.get("/api/next").json()
    resp = client.post(
        "/api/label",
        json={"candidate_id": first["candidate_id"], "label": True, "annotator": "t"},
    )
    assert resp.status_code == 200
    prog = client.get("/api/progress").json()
    assert prog["labeled"] == 1 and prog["positives"] == 1
    put_row = next(v for v in prog["verbs"] if v["verb"] == "put")
    assert put_row["positive"] == 1


def test_label_unknown_candidate_404(client):
    resp = client.post("/api/label", json={"candidate_id": "nope", "label": True})
    assert resp.status_code == 404


def test_next_excludes_skipped(client):
    first = client.get("/api/next").json()
    second = client.get("/api/next", params={"exclude": first["candidate_id"]}).json()
    assert second["candidate_id"] != first["candidate_id"]


def test_cost_placeholders_when_no_labels(client):
    body = client.get("/api/cost").json()
    assert body["labeled"] == 0
    assert body["precision"] is None
    assert body["projected_cost_per_tp"] is None


def test_cost_projection_after_labels(client):
    ids = []
    for _ in range(10):
        nxt = client.get("/api/next", params={"exclude": ",".join(ids)}).json()
        ids.append(nxt["candidate_id"])
    for i, cid in enumerate(ids[:10]):
        client.post("/api/label", json={"candidate_id": cid, "label": i < 7})
    body = client.get("/api/cost").json()
    assert body["labeled"] == 10 and body["positives"] == 7
    assert body["precision"] == "0.7000"
    # Eq. 1 with zero tokens: 0.2 * 10 / 7
    assert body["projected_cost_per_tp"] == "0.285714"


def test_conflicts_endpoint(client):
    # Same quad (laugh/box/off/mat) labeled both ways.
    client.post("/api/label", json={"candidate_id": "d0", "label": True})
    client.post("/api/label", json={"candidate_id": "d1", "label": False})
    body = client.get("/api/conflicts").json()
    assert len(body["conflicts"]) == 1
    assert body["conflicts"][0]["quad"] == ["laugh", "box", "off", "mat"]


def test_export_endpoint_filters(client):
    client.post("/api/label", json={"candidate_id": "c00", "label": True})
    client.post("/api/label", json={"candidate_id": "c01", "label": False})
    resp = client.get("/api/export", params={"labels": "true", "sources": "human"})
    lines = [json.loads(l) for l in resp.text.splitlines() if l.strip()]
    assert len(lines) == 1 and lines[0]["candidate_id"] == "c00"
    counts = json.loads(resp.headers["X-Export-Counts"])
    assert counts == {"positive/human": 1}


def test_export_compact_filter_param(client):
    client.post("/api/label", json={"candidate_id": "c00", "label": True})
    client.post("/api/label", json={"candidate_id": "c01", "label": False})
    resp = client.get(
        "/api/export", params={"filter": "labels=true;sources=human"}
    )
    lines = [json.loads(l) for l in resp.text.splitlines() if l.strip()]
    assert len(lines) == 1 and lines[0]["candidate_id"] == "c00"


def test_export_unknown_source_422(client):
    resp = client.get("/api/export", params={"sources": "martian"})
    assert resp.status_code == 422


def test_exhausted_queue(tmp_path):
    store = AnnotationStore([cand("only", "put", "on")], event_log=tmp_path / "e.jsonl")
    client = TestClient(create_app(store))
    cid = client.get("/api/next").json()["candidate_id"]
    client.post("/api/label", json={"candidate_id": cid, "label": True})
    body = client.get("/api/next").json()
    assert body["exhausted"] is True
    assert body["progress"]["labeled"] == 1


def test_auth_token_enforced(tmp_path):
    store = AnnotationStore([cand("a", "put", "on")], event_log=tmp_path / "e.jsonl")
    client = TestClient(create_app(store, api_token="sesame"))
    assert client.get("/api/next").status_code == 401
    ok = client.get("/api/next", headers={"X-Auth-Token": "sesame"})
    assert ok.status_code == 200


def test_labels_survive_restart(tmp_path):
    cands = [cand(f"c{i:02d}", "put", p) for i, p in enumerate(["on", "in", "at"])]
    log = tmp_path / "events.jsonl"
    store = AnnotationStore(cands, event_log=log)
    client = TestClient(create_app(store))
    for cid, label in [("c00", True), ("c01", False)]:
        client.post("/api/label", json={"candidate_id": cid, "label": label})
    reopened = AnnotationStore(cands, event_log=log)
    client2 = TestClient(create_app(reopened))
    prog = client2.get("/api/progress").json()
    assert prog["labeled"] == 2 and prog["positives"] == 1
