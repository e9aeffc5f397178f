import json
from pathlib import Path

import pytest
from click.testing import CliRunner
from fastapi.testclient import TestClient

from foodwatch.errors import CorruptLog, StartupError
from foodwatch.pipeline import CredentialStore, SourceCredential
from foodwatch.reference import reference_model
from foodwatch.service.cli import main as cli_main
from foodwatch.service.config import ServiceConfig
from foodwatch.service.journal import JournalWriter, read_journal
from foodwatch.service.node import ServiceNode
from foodwatch.service.runtime import build_runtime
from foodwatch.twin import dump_model

from workload import apply_op, make_workload

DAY = 86400.0
MORNING = DAY + 8 * 3600.0


def write_service_dir(tmp_path: Path, clock="simulated") -> Path:
    (tmp_path / "model.json").write_bytes(dump_model(reference_model()))
    (tmp_path / "creds.json").write_text(
        json.dumps(
            [
                {"source_id": "cv", "api_key": "key-cv", "rate_limit": 5000},
                {"source_id": "slow", "api_key": "key-slow", "rate_limit": 1},
            ]
        )
    )
    (tmp_path / "svc.json").write_text(
        json.dumps(
            {
                "model_path": "model.json",
                "credentials_path": "creds.json",
                "log_dir": "logs",
                "clock": clock,
            }
        )
    )
    return tmp_path / "svc.json"


@pytest.fixture
def service(tmp_path):
    runtime = build_runtime(write_service_dir(tmp_path))
    client = TestClient(runtime.app)
    yield client, runtime
    runtime.close()


def post_event(client, event_id="e1", vtype="handwash", space="cooking", t=MORNING, key="key-cv", **extra):
    body = {
        "event_id": event_id,
        "source_id": "cv",
        "vtype": vtype,
        "space_id": space,
        "timestamp": t,
        "confidence": 0.9,
    }
    body.update(extra)
    return client.post("/events", content=json.dumps(body), headers={"X-Api-Key": key})


# ---------------------------------------------------------------------------
# endpoints


def test_healthz_reports_model_and_hashes(service):
    client, runtime = service
    doc = client.get("/healthz").json()
    assert doc["status"] == "ok"
    assert doc["area_count"] == 16
    import hashlib

    model_path = runtime.config._resolve("model.json")
    assert doc["config_hashes"]["model.json"] == hashlib.sha256(model_path.read_bytes()).hexdigest()
    assert set(doc["config_hashes"]) == {"model.json", "creds.json"}


def test_event_status_codes(service):
    client, _ = service
    assert post_event(client).status_code == 200
    assert post_event(client, key="wrong").status_code == 401
    bad = client.post("/events", content=b"{nope", headers={"X-Api-Key": "key-cv"})
    assert bad.status_code == 422
    missing = post_event(client, event_id="e9", confidence=None)
    assert missing.status_code == 422
    assert any("confidence" in d["field"] for d in missing.json()["details"])
    out_sched = post_event(client, event_id="e10", vtype="face_mask", t=MORNING + 19 * 3600)
    assert out_sched.status_code == 422
    assert out_sched.json()["code"] == "out_of_schedule"


def test_rate_limit_maps_to_429(service):
    client, _ = service
    body = {
        "event_id": "r1",
        "source_id": "slow",
        "vtype": "handwash",
        "space_id": "cooking",
        "timestamp": MORNING,
        "confidence": 0.9,
    }
    assert client.post("/events", content=json.dumps(body), headers={"X-Api-Key": "key-slow"}).status_code == 200
    body["event_id"] = "r2"
    assert client.post("/events", content=json.dumps(body), headers={"X-Api-Key": "key-slow"}).status_code == 429


def test_repost_same_event_id_is_idempotent(service):
    client, runtime = service
    first = post_event(client).json()
    second = post_event(client).json()
    assert second["status"] == "accepted_duplicate"
    assert second["duplicate_of"] == first["violation_id"]
    assert len(runtime.node.pipeline.records()) == 1


def test_snapshot_and_violations_since(service):
    client, _ = service
    post_event(client)
    post_event(client, event_id="e2", vtype="mopping", space="packing", t=MORNING + 40)
    # delay-tolerant mopping publishes at the next tick: drive time forward
    post_event(client, event_id="e3", t=MORNING + 1000)
    snap = client.get("/snapshot", params={"at": MORNING + 1000}).json()
    by_id = {s["space_id"]: s for s in snap["spaces"]}
    assert by_id["cooking"]["count"] == 2
    assert by_id["packing"]["count"] == 1
    violations = client.get("/violations", params={"since": 0}).json()["violations"]
    assert [v["violation_id"] for v in violations] == ["v-000001", "v-000003", "v-000002"]
    recent = client.get("/violations", params={"since": MORNING + 500}).json()["violations"]
    assert [v["violation_id"] for v in recent] == ["v-000003", "v-000002"]


def test_pings_invalid_payloads(service):
    client, _ = service
    assert client.post("/pings", json={"not": "a list"}).status_code == 422
    assert client.post("/pings", json=[{"badge_id": "b000"}]).status_code == 422
    ghost = [{"badge_id": "ghost", "space_id": "cooking", "x": 1, "y": 1, "timestamp": MORNING}]
    assert client.post("/pings", json=ghost).status_code == 404
    outside = [{"badge_id": "b000", "space_id": "cooking", "x": 50, "y": 1, "timestamp": MORNING}]
    assert client.post("/pings", json=outside).status_code == 422


def test_infection_flow_and_sanitize(service):
    client, _ = service
    pings = [
        {"badge_id": "b000", "space_id": "cooking", "x": 2.0, "y": 2.0, "timestamp": MORNING + 2 * i}
        for i in range(40)
    ] + [
        {"badge_id": "b001", "space_id": "cooking", "x": 2.8, "y": 2.0, "timestamp": MORNING + 2 * i}
        for i in range(40)
    ]
    assert client.post("/pings", json=pings).json()["proximity_violations"] >= 1
    result = client.post("/infections", json={"badge_id": "b000", "reported_at": MORNING + 600}).json()
    assert result["report_id"] == "r-000"
    assert [s["space_id"] for s in result["at_risk_spaces"]] == ["cooking"]
    assert result["direct_contacts"] == ["b001"]
    assert client.get("/trace/r-000").json() == result
    assert client.get("/trace/r-404").status_code == 404

    snap = client.get("/snapshot", params={"at": MORNING + 600}).json()
    assert {s["space_id"] for s in snap["spaces"] if s["at_risk"]} == {"cooking"}
    assert client.post("/spaces/cooking/sanitized").status_code == 200
    snap = client.get("/snapshot", params={"at": MORNING + 600}).json()
    assert not any(s["at_risk"] for s in snap["spaces"])
    assert client.post("/spaces/nowhere/sanitized").status_code == 404


def test_reassign_endpoint(service):
    client, runtime = service
    home = runtime.node.model.person("b003").home_space
    target = "seasoning" if home != "seasoning" else "packing"
    assert client.post("/people/b003/reassign", json={"space_id": target}).json()["home_space"] == target
    assert client.post("/people/ghost/reassign", json={"space_id": target}).status_code == 404
    assert client.post("/people/b003/reassign", json={"space_id": "factory"}).status_code == 422


def test_alert_stream_delivers_published_records(service):
    client, _ = service
    post_event(client)
    post_event(client, event_id="e2", space="packing")
    post_event(client, event_id="e3", space="seasoning")
    seen = []
    with client.stream("GET", "/alerts", params={"since": 0, "limit": 3}) as response:
        assert response.headers["content-type"].startswith("text/event-stream")
        for line in response.iter_lines():
            if line.startswith("data: "):
                seen.append(json.loads(line[len("data: "):]))
    assert [v["violation_id"] for v in seen] == ["v-000001", "v-000002", "v-000003"]
    assert all(v["reported_at"] is not None for v in seen)


def test_snapshot_zones_not_listed(service):
    client, _ = service
    ids = {s["space_id"] for s in client.get("/snapshot", params={"at": 0}).json()["spaces"]}
    assert "factory" not in ids and "dispatch" not in ids


def test_snapshot_without_at_uses_clock_time(service):
    client, _ = service
    post_event(client)  # simulated clock advances to the event timestamp
    snap = client.get("/snapshot").json()
    assert snap["as_of"] == MORNING


# ---------------------------------------------------------------------------
# startup & recovery


def test_startup_fails_fast_on_missing_credentials(tmp_path):
    config_path = write_service_dir(tmp_path)
    (tmp_path / "creds.json").unlink()
    with pytest.raises(StartupError) as err:
        ServiceConfig.from_file(config_path)
    assert "creds.json" in str(err.value)


def test_startup_fails_fast_on_unparseable_model(tmp_path):
    config_path = write_service_dir(tmp_path)
    (tmp_path / "model.json").write_text("{broken")
    with pytest.raises(StartupError) as err:
        build_runtime(config_path)
    assert "model.json" in str(err.value)


def node_pair(tmp_path):
    model = reference_model()
    creds = CredentialStore([SourceCredential("cv", "key-cv", 10**6)])
    journal = JournalWriter(tmp_path / "journal.ndjson")
    live = ServiceNode(model, creds, journal=journal)
    return model, creds, live


def test_recovery_reproduces_live_state_from_1000_records(tmp_path):
    model, creds, live = node_pair(tmp_path)
    areas = [a.space_id for a in model.areas()]
    badges = [p.badge_id for p in model.people][:20]
    for op in make_workload(seed=21, count=1000, areas=areas, badges=badges):
        apply_op(live, op)
    live.journal.close()
    recovered, report = ServiceNode.recover(tmp_path / "journal.ndjson", model, creds)
    assert report.corrupt_line is None
    assert recovered.state_digest() == live.state_digest()


def test_recovery_empty_dir_is_fresh_state(tmp_path):
    model = reference_model()
    creds = CredentialStore([])
    node, report = ServiceNode.recover(tmp_path / "journal.ndjson", model, creds)
    assert report.records_applied == 0
    assert node.state_digest()["violations"] == []


def test_truncated_final_line_recovers_previous_record(tmp_path):
    model, creds, live = node_pair(tmp_path)
    areas = [a.space_id for a in model.areas()]
    for op in make_workload(seed=3, count=20, areas=areas, badges=["b000"]):
        apply_op(live, op)
    live.journal.close()
    path = tmp_path / "journal.ndjson"
    lines = path.read_text().splitlines()
    path.write_text("\n".join(lines[:-1]) + "\n" + lines[-1][: len(lines[-1]) // 2])
    recovered, report = ServiceNode.recover(path, model, creds)
    assert report.warning is not None
    assert report.records_applied == len(lines) - 1


def test_writer_repairs_torn_tail_before_appending(tmp_path):
    # crash leaves a half-written final line; a restart must truncate it so
    # the journal it appends to stays readable on the restart after that
    model, creds, live = node_pair(tmp_path)
    areas = [a.space_id for a in model.areas()]
    for op in make_workload(seed=9, count=12, areas=areas, badges=["b000"]):
        apply_op(live, op)
    live.journal.close()
    path = tmp_path / "journal.ndjson"
    lines = path.read_text().splitlines()
    path.write_text("\n".join(lines[:-1]) + "\n" + lines[-1][:10])

    recovered, report = ServiceNode.recover(path, model, creds)
    assert report.warning is not None
    recovered.journal = JournalWriter(path)  # repairs the tail
    for op in make_workload(seed=10, count=5, areas=areas, badges=["b000"]):
        apply_op(recovered, op)
    recovered.journal.close()

    again, report2 = ServiceNode.recover(path, model, creds)
    assert report2.corrupt_line is None
    assert again.state_digest() == recovered.state_digest()
    seqs = [r.seq for r in read_journal(path)[0]]
    assert seqs == sorted(seqs) and len(seqs) == len(set(seqs))


def test_mid_file_corruption_raises_corrupt_log(tmp_path):
    model, creds, live = node_pair(tmp_path)
    areas = [a.space_id for a in model.areas()]
    for op in make_workload(seed=4, count=10, areas=areas, badges=["b000"]):
        apply_op(live, op)
    live.journal.close()
    path = tmp_path / "journal.ndjson"
    lines = path.read_text().splitlines()
    lines[4] = '{"broken'
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(CorruptLog) as err:
        read_journal(path)
    assert err.value.line_no == 5


def test_shutdown_and_resume_equals_uninterrupted_run(tmp_path):
    model = reference_model()
    creds = CredentialStore([SourceCredential("cv", "key-cv", 10**6)])
    areas = [a.space_id for a in model.areas()]
    badges = [p.badge_id for p in model.people][:20]
    ops = make_workload(seed=8, count=300, areas=areas, badges=badges)
    cut = 170

    straight = ServiceNode(model, creds)
    for op in ops:
        apply_op(straight, op)

    journal_path = tmp_path / "journal.ndjson"
    first = ServiceNode(model, creds, journal=JournalWriter(journal_path))
    for op in ops[:cut]:
        apply_op(first, op)
    first.journal.close()  # shutdown mid-replay

    resumed, _report = ServiceNode.recover(journal_path, model, creds)
    resumed.journal = JournalWriter(journal_path)
    for op in ops[cut:]:
        apply_op(resumed, op)
    resumed.journal.close()

    assert resumed.state_digest() == straight.state_digest()


# ---------------------------------------------------------------------------
# CLI


def test_cli_validate_model(tmp_path):
    runner = CliRunner()
    good = tmp_path / "good.json"
    good.write_bytes(dump_model(reference_model()))
    result = runner.invoke(cli_main, ["validate-model", str(good)])
    assert result.exit_code == 0 and "valid" in result.output

    doc = json.loads(good.read_text())
    doc["spaces"][-1]["parent"] = "ghost"
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(doc))
    result = runner.invoke(cli_main, ["validate-model", str(bad)])
    assert result.exit_code == 1
    assert "dangling_parent" in result.output


def test_cli_validate_model_usage_error():
    runner = CliRunner()
    assert runner.invoke(cli_main, ["validate-model"]).exit_code == 2


def test_cli_derive_model(tmp_path):
    runner = CliRunner()
    template = tmp_path / "template.json"
    template.write_bytes(dump_model(reference_model()))
    overlay = tmp_path / "overlay.json"
    overlay.write_text(json.dumps({"meal_plan": "north"}))
    out = tmp_path / "derived.json"
    result = runner.invoke(cli_main, ["derive-model", str(template), str(overlay), "--out", str(out)])
    assert result.exit_code == 0
    assert json.loads(out.read_text())["meal_plan"] == "north"


def test_cli_trace_against_running_service(tmp_path):
    import threading
    import time as time_mod

    import uvicorn

    from foodwatch.tracing import PositionPing

    runtime = build_runtime(write_service_dir(tmp_path))
    pings = [PositionPing("b000", "cooking", 2.0, 2.0, MORNING + 2.0 * i) for i in range(40)]
    pings += [PositionPing("b001", "cooking", 2.7, 2.0, MORNING + 2.0 * i) for i in range(40)]
    runtime.node.add_pings(pings, now=MORNING + 80)

    server = uvicorn.Server(
        uvicorn.Config(runtime.app, host="127.0.0.1", port=8731, log_level="error")
    )
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    try:
        for _ in range(200):
            if server.started:
                break
            time_mod.sleep(0.05)
        assert server.started
        result = CliRunner().invoke(
            cli_main,
            [
                "trace",
                "--badge",
                "b000",
                "--at",
                str(MORNING + 600),
                "--server",
                "http://127.0.0.1:8731",
            ],
        )
    finally:
        server.should_exit = True
        thread.join(timeout=10)
        runtime.close()
    assert result.exit_code == 0, result.output
    assert "1 at-risk space(s)" in result.output
    assert "cooking" in result.output
    assert "b001" in result.output


def test_cli_simulate_accepts_preset_name(tmp_path):
    runner = CliRunner()
    out_dir = tmp_path / "preset-out"
    result = runner.invoke(
        cli_main,
        ["simulate", "--config", "pilot-jigani", "--seed", "20210417", "--out", str(out_dir)],
    )
    assert result.exit_code == 0, result.output
    assert "pilot-jigani" in result.output and "143 violating" in result.output
    unknown = runner.invoke(cli_main, ["simulate", "--config", "no-such", "--out", str(out_dir)])
    assert unknown.exit_code == 1


def test_cli_simulate_replay_and_report(tmp_path):
    runner = CliRunner()
    config = {
        "name": "cli-small",
        "area_count": 4,
        "badge_count": 50,
        "horizon_days": 4,
        "opportunities": {"slot_period_seconds": 5400.0, "violation_probability": 0.2},
        "episode_count": 1,
        "episode": {"direct_contacts": 2, "indirect_contacts": 6, "overcapture_contacts": 3},
    }
    config_path = tmp_path / "scenario.json"
    config_path.write_text(json.dumps(config))
    out_dir = tmp_path / "out"
    result = runner.invoke(
        cli_main,
        ["simulate", "--config", str(config_path), "--seed", "5", "--out", str(out_dir)],
    )
    assert result.exit_code == 0, result.output
    for name in ["events.ndjson", "pings.ndjson", "ground_truth.ndjson", "metrics.json", "snapshot.json"]:
        assert (out_dir / name).exists()

    report = runner.invoke(cli_main, ["report", str(out_dir / "metrics.json")])
    assert report.exit_code == 0
    assert "hygiene_safety" in report.output and "tracking_tracing" in report.output

    model_path = tmp_path / "model.json"
    model_path.write_bytes(dump_model(reference_model(area_count=4, badge_count=50)))
    replay = runner.invoke(
        cli_main,
        ["replay", "--events", str(out_dir / "ingest_log.ndjson"), "--model", str(model_path)],
    )
    assert replay.exit_code == 0, replay.output
    assert "replayed" in replay.output
