"""Review service: API surface, verdict durability, idempotency, concurrency."""

import json
import threading

import pytest
from fastapi.testclient import TestClient

from situgen.pipeline import RunConfig, read_jsonl, run_pipeline
from situgen.refine import ReviewVerdict, apply_verdicts
from situgen.qa import QAPair
from situgen.server import create_app


@pytest.fixture(scope="module")
def served(tmp_path_factory, request):
    scenes = request.getfixturevalue("fixture_pack_dir")
    out = tmp_path_factory.mktemp("serve_out")
    run_pipeline(RunConfig(seed=21, scenes=str(scenes), out_dir=str(out), per_scene=12))
    return scenes, out


@pytest.fixture()
def client(served, tmp_path):
    scenes, out = served
    verdicts = tmp_path / "verdicts.jsonl"
    app = create_app(out / "dataset.jsonl", scenes, verdicts)
    return TestClient(app), verdicts, out, scenes


def _body(verdict="accept", reviewer="alice", fixed=None):
    body = {
        "scores": {"situation": 5, "question": 4, "answer": 5},
        "verdict": verdict,
        "reviewer": reviewer,
    }
    if fixed is not None:
        body["fixed_answer"] = fixed
    return body


def test_scenes_endpoint(client):
    tc, *_ = client
    scenes = tc.get("/api/scenes").json()
    assert len(scenes) == 5
    assert all({"scene_id", "n_objects", "n_items"} <= set(s) for s in scenes)


def test_topdown_payload_with_agent_and_highlights(client):
    tc, _, out, _ = client
    items = tc.get("/api/items", params={"limit": 200}).json()["items"]
    with_slot = next(i for i in items
                     if any(seg["kind"] == "image_slot" for seg in i["question"]))
    payload = tc.get(
        f"/api/scenes/{with_slot['scene_id']}/topdown",
        params={"item": with_slot["qa_id"]},
    ).json()
    assert payload["agent"] is not None
    assert {"x", "y", "rot_deg"} <= set(payload["agent"])
    assert payload["floor"]["polygon"]
    assert payload["objects"]
    referenced = [int(seg["payload"].split("-")[-2]) for seg in with_slot["question"]
                  if seg["kind"] == "image_slot"]
    assert set(referenced) <= set(payload["highlight_ids"])


def test_topdown_unknown_scene_404(client):
    tc, *_ = client
    assert tc.get("/api/scenes/nope/topdown").status_code == 404


def test_items_paging(client):
    tc, *_ = client
    first = tc.get("/api/items", params={"limit": 5}).json()
    assert len(first["items"]) == 5
    second = tc.get("/api/items", params={"limit": 5, "cursor": first["cursor"]}).json()
    assert first["items"][0]["qa_id"] != second["items"][0]["qa_id"]
    assert first["total"] == second["total"]


def test_item_read_your_writes(client):
    tc, verdicts, *_ = client
    qa_id = tc.get("/api/items").json()["items"][0]["qa_id"]
    resp = tc.post(f"/api/items/{qa_id}/verdict", json=_body("accept"))
    assert resp.status_code == 200
    item = tc.get(f"/api/items/{qa_id}").json()
    assert item["verdict"]["verdict"] == "accept"
    assert item["verdict"]["reviewer"] == "alice"
    progress = tc.get("/api/progress").json()
    assert progress["reviewed"] == 1
    assert progress["by_verdict"] == {"accept": 1}


def test_unknown_item_404(client):
    tc, *_ = client
    assert tc.get("/api/items/doesnotexist").status_code == 404
    assert tc.post("/api/items/doesnotexist/verdict", json=_body()).status_code == 404


def test_invalid_verdict_422(client):
    tc, *_ = client
    qa_id = tc.get("/api/items").json()["items"][0]["qa_id"]
    bad = _body()
    bad["scores"]["answer"] = 9
    assert tc.post(f"/api/items/{qa_id}/verdict", json=bad).status_code == 422
    assert tc.post(f"/api/items/{qa_id}/verdict", json=_body("fix")).status_code == 422
    missing = _body()
    del missing["scores"]
    assert tc.post(f"/api/items/{qa_id}/verdict", json=missing).status_code == 422


def test_restart_reloads_verdicts(client):
    tc, verdicts, out, scenes = client
    items = tc.get("/api/items", params={"limit": 3}).json()["items"]
    tc.post(f"/api/items/{items[0]['qa_id']}/verdict", json=_body("reject"))
    tc.post(f"/api/items/{items[1]['qa_id']}/verdict", json=_body("fix", fixed="42"))

    fresh = TestClient(create_app(out / "dataset.jsonl", scenes, verdicts))
    reloaded = fresh.get(f"/api/items/{items[0]['qa_id']}").json()
    assert reloaded["verdict"]["verdict"] == "reject"
    assert fresh.get("/api/progress").json()["reviewed"] == 2


def test_verdicts_feed_refinement(client):
    tc, verdicts, out, scenes = client
    items = tc.get("/api/items", params={"limit": 3}).json()["items"]
    tc.post(f"/api/items/{items[0]['qa_id']}/verdict", json=_body("reject"))
    tc.post(f"/api/items/{items[1]['qa_id']}/verdict", json=_body("fix", fixed="fixed!"))

    _, records = read_jsonl(out / "dataset.jsonl")
    pairs = [QAPair.from_json(r) for r in records]
    _, rows = read_jsonl(verdicts)
    loaded = [ReviewVerdict.from_json(r) for r in rows]
    refined, report = apply_verdicts(pairs, loaded)
    assert len(refined) == len(pairs) - 1
    fixed = next(p for p in refined if p.qa_id == items[1]["qa_id"])
    assert fixed.answer == "fixed!"


def test_resubmission_is_idempotent(client):
    tc, verdicts, *_ = client
    qa_id = tc.get("/api/items").json()["items"][0]["qa_id"]
    first = tc.post(f"/api/items/{qa_id}/verdict", json=_body("accept")).json()
    assert first["appended"] is True
    second = tc.post(f"/api/items/{qa_id}/verdict", json=_body("accept")).json()
    assert second["appended"] is False
    lines = [l for l in verdicts.read_text().splitlines() if l.strip()]
    assert len(lines) == 1


def test_concurrent_verdicts_no_loss(client):
    tc, verdicts, *_ = client
    items = tc.get("/api/items", params={"limit": 16}).json()["items"]
    errors = []

    def submit(item, i):
        try:
            r = tc.post(
                f"/api/items/{item['qa_id']}/verdict",
                json=_body("accept", reviewer=f"rev{i}"),
            )
            assert r.status_code == 200
        except Exception as exc:  # pragma: no cover
            errors.append(exc)

    threads = [threading.Thread(target=submit, args=(item, i))
               for i, item in enumerate(items)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert not errors
    lines = [json.loads(l) for l in verdicts.read_text().splitlines() if l.strip()]
    assert len(lines) == len(items)
    assert {l["qa_id"] for l in lines} == {i["qa_id"] for i in items}


def test_static_ui_mount(served, tmp_path):
    scenes, out = served
    ui = tmp_path / "dist"
    ui.mkdir()
    (ui / "index.html").write_text("<!DOCTYPE html><title>review</title>")
    tc = TestClient(create_app(out / "dataset.jsonl", scenes,
                               tmp_path / "v.jsonl", ui_dir=ui))
    resp = tc.get("/")
    assert resp.status_code == 200
    assert "review" in resp.text
    # the API still wins over the static mount
    assert tc.get("/api/progress").status_code == 200


def test_graph_endpoint_serves_exports(served, tmp_path):
    scenes, out = served
    tc = TestClient(create_app(out / "dataset.jsonl", scenes, tmp_path / "v.jsonl",
                               graphs_dir=out / "graphs"))
    item = tc.get("/api/items").json()["items"][0]
    assert "graph_id" in item
    payload = tc.get(f"/api/graphs/{item['graph_id']}").json()
    assert payload["scene_id"] == item["scene_id"]
    assert {"nodes", "edges", "agent_edges", "situation"} <= set(payload)
    assert tc.get("/api/graphs/unknown").status_code == 404
