import threading

import pytest
from fastapi.testclient import TestClient

from nlbeam.service import create_app


@pytest.fixture()
def client(small_model):
    app = create_app(small_model)
    with TestClient(app) as c:
        yield c


@pytest.fixture()
def modelless_client():
    with TestClient(create_app(None)) as c:
        yield c


def test_fresh_state_and_history(client):
    r = client.get("/state")
    assert r.status_code == 200
    assert r.json()["temperature"] == 25.0
    assert client.get("/history").json()["entries"] == []


def test_interpret_returns_pending_item(client):
    r = client.post("/interpret", json={
        "text": "Set the temperature to 200 degrees at a rate of 20 "
                "degrees per minute"})
    assert r.status_code == 200
    body = r.json()
    assert "set_temperature(target=200.0, ramp=20.0)" in body["rendered"]
    assert body["status"] == "pending"
    assert any(s["entity"] == "TEMPERATURE" for s in body["spans"])


def test_interpret_never_mutates_state(client):
    before = client.get("/state").json()
    client.post("/interpret", json={"text": "Change the humidity to 60"})
    assert client.get("/state").json() == before


def test_empty_text_400(client):
    assert client.post("/interpret", json={"text": " "}).status_code == 400
    assert client.post("/script", json={"text": ""}).status_code == 400


def test_no_model_503_but_state_works(modelless_client):
    r = modelless_client.post("/interpret", json={"text": "hello"})
    assert r.status_code == 503
    assert r.json()["code"] == "no-model"
    assert modelless_client.get("/state").status_code == 200


def test_two_identical_requests_two_ids(client):
    text = {"text": "Change the humidity to 45 percent"}
    a = client.post("/interpret", json=text).json()["id"]
    b = client.post("/interpret", json=text).json()["id"]
    assert a != b


def test_confirm_executes_and_appends_history(client):
    r = client.post("/script", json={
        "text": "set_temperature(target=200.0, ramp=20.0)"})
    pid = r.json()["id"]
    r = client.post("/confirm", json={"id": pid})
    assert r.status_code == 200
    body = r.json()
    assert body["outcome"] == "executed"
    assert body["state"]["temperature"] == 200.0
    assert body["state"]["clock"] == 525.0
    entries = client.get("/history").json()["entries"]
    assert len(entries) == 1 and entries[0]["outcome"] == "executed"


def test_confirm_twice_409(client):
    pid = client.post("/script", json={
        "text": "set_humidity(target=50.0)"}).json()["id"]
    assert client.post("/confirm", json={"id": pid}).status_code == 200
    r = client.post("/confirm", json={"id": pid})
    assert r.status_code == 409
    assert r.json()["detail"]["status"] == "confirmed"


def test_reject_leaves_state_untouched(client):
    before = client.get("/state").json()
    pid = client.post("/script", json={
        "text": "set_humidity(target=90.0)"}).json()["id"]
    r = client.post("/reject", json={"id": pid})
    assert r.status_code == 200 and r.json()["status"] == "rejected"
    assert client.get("/state").json() == before
    entries = client.get("/history").json()["entries"]
    assert entries[0]["outcome"] == "rejected"


def test_reject_then_confirm_409(client):
    pid = client.post("/script", json={
        "text": "set_humidity(target=90.0)"}).json()["id"]
    client.post("/reject", json={"id": pid})
    assert client.post("/confirm", json={"id": pid}).status_code == 409


def test_unknown_id_404(client):
    assert client.post("/confirm", json={"id": "nope"}).status_code == 404
    assert client.post("/reject", json={"id": "nope"}).status_code == 404


def test_script_parse_error_400_with_position(client):
    r = client.post("/script", json={"text": "set_humidity(target=)"})
    assert r.status_code == 400
    assert r.json()["code"] == "parse-error"
    assert r.json()["detail"]["line"] == 1


def test_script_range_error_names_limit(client):
    r = client.post("/script", json={
        "text": "set_temperature(target=900.0, ramp=10.0)"})
    assert r.status_code == 400
    assert "[-200, 600]" in r.json()["message"]


def test_confirm_empty_interpretation_422(client):
    pid = client.post("/interpret", json={
        "text": "blorp zzz quux"}).json()["id"]
    r = client.post("/confirm", json={"id": pid})
    assert r.status_code == 422


def test_expired_id_409(small_model):
    app = create_app(small_model, expiry_seconds=10.0)
    ctx = app.state.ctx
    fake = [0.0]
    ctx.now = lambda: fake[0]
    with TestClient(app) as client:
        pid = client.post("/script", json={
            "text": "set_humidity(target=50.0)"}).json()["id"]
        fake[0] = 11.0
        r = client.post("/confirm", json={"id": pid})
        assert r.status_code == 409
        assert r.json()["detail"]["status"] == "expired"


def test_one_shot_race_exactly_one_wins(client):
    pid = client.post("/script", json={
        "text": "set_humidity(target=55.0)"}).json()["id"]
    results = []

    def hit(path):
        results.append(client.post(path, json={"id": pid}).status_code)

    threads = [threading.Thread(target=hit, args=(p,))
               for p in ("/confirm", "/reject") * 4]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert sorted(results).count(200) == 1


def test_events_sequence_and_resume(client):
    pid = client.post("/script", json={
        "text": "set_temperature(target=30.0, ramp=10.0)"}).json()["id"]
    client.post("/confirm", json={"id": pid})
    r = client.get("/events", params={"since": -1}).json()
    seqs = [e["seq"] for e in r["events"]]
    assert seqs == list(range(len(seqs))) and seqs
    mid = seqs[len(seqs) // 2]
    resumed = client.get("/events", params={"since": mid}).json()
    assert [e["seq"] for e in resumed["events"]] == [
        s for s in seqs if s > mid]
    kinds = [e["kind"] for e in r["events"]]
    assert kinds[0] == "execution-started"
    assert kinds[-1] == "execution-finished"


def test_failed_execution_recorded(client):
    pid = client.post("/script", json={
        "text": "move_motor(axis=\"x\", amount=99.0, mode=\"relative\")\n"
                "move_motor(axis=\"x\", amount=99.0, mode=\"relative\")"
    }).json()["id"]
    r = client.post("/confirm", json={"id": pid})
    assert r.status_code == 200
    assert r.json()["outcome"] == "failed"
    entries = client.get("/history").json()["entries"]
    assert entries[0]["outcome"] == "failed"
    # first move applied, second rolled back
    assert client.get("/state").json()["motor_x"] == 99.0


def test_history_limit(client):
    for i in range(5):
        pid = client.post("/script", json={
            "text": f"set_humidity(target={40 + i}.0)"}).json()["id"]
        client.post("/reject", json={"id": pid})
    entries = client.get("/history", params={"limit": 3}).json()["entries"]
    assert len(entries) == 3
    # newest first
    assert entries[0]["rendered"].endswith("44.0)")
