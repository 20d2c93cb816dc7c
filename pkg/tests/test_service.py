import json

import pytest
from fastapi.testclient import TestClient

from rearrange_bench.errors import (
    ContestClosed,
    InvalidCounts,
    EvaluationFailed,
    FormatError,
    InvalidTransition,
    PayloadTooLarge,
    TaskSetMismatch,
    UnknownContest,
    UnknownSubmission,
)
from rearrange_bench.geometry import Pose
from rearrange_bench.harness import ActionScript, Pick, Place
from rearrange_bench.io import config_to_doc
from rearrange_bench.model import SceneConfiguration
from rearrange_bench.scoring import UebPolicy, fmt_cm
from rearrange_bench.service import BenchService, ContestConfig, Stage, Status
from rearrange_bench.service.app import create_app
from rearrange_bench.service import contest as contest_mod
from rearrange_bench.service.store import RecordLog, canonical

from conftest import make_task

HOME = Pose.from_translation(0, 0, 0)


def _tasks(prefix, n):
    return tuple(make_task([("a", (4, 4, 4))], {"a": HOME}, {"a": HOME}, task_id=f"{prefix}{i}") for i in range(n))


TRIAL = _tasks("trial-", 2)
CONTEST = _tasks("task-", 5)


def _config(**kw):
    base = dict(
        contest_id="c1",
        trial_tasks=TRIAL,
        contest_tasks=CONTEST,
        policy=UebPolicy.constant(49.75),  # baseline = 49.75 for every task set
    )
    base.update(kw)
    return ContestConfig(**base)


def _solution(err):
    # a pure translation of ``err`` cm gives exactly that vertex-displacement error
    return config_to_doc(SceneConfiguration({"a": Pose.from_translation(err, 0, 0)}))


def config_payload(errors, tasks=CONTEST, times=None, backends=None):
    runs = []
    for i, err in enumerate(errors):
        runs.append({
            "run_id": f"r{i}",
            "backend": backends[i] if backends else None,
            "tasks": {
                t.task_id: {"solution": _solution(err), "execution_time_s": (times or [100.0] * len(errors))[i]}
                for t in tasks
            },
        })
    return {"kind": "configurations", "runs": runs}


@pytest.fixture
def service(tmp_path):
    svc = BenchService(tmp_path / "data", [_config()])
    svc.transition("c1", Stage.CONTEST)
    yield svc
    svc.close()


# ---------------------------------------------------------------- submit


def test_submit_and_evaluate(service):
    sid = service.submit("c1", "alpha", config_payload([40.0, 34.29, 37.0]))
    assert service.get_submission(sid).status is Status.QUEUED
    run = service.evaluate_submission(sid)
    assert fmt_cm(run.average_error) == "34.29"
    assert run.run_id == "r1"
    assert service.get_submission(sid).status is Status.SCORED


def test_two_backends(tmp_path):
    svc = BenchService(tmp_path, [_config(backends=2, runs_per_team=1)])
    svc.transition("c1", "contest")
    sid = svc.submit("c1", "t", config_payload([31.0, 29.21], backends=["pybullet", "sapien"]))
    assert fmt_cm(svc.evaluate_submission(sid).average_error) == "29.21"
    with pytest.raises(FormatError):
        svc.submit("c1", "t", config_payload([1.0, 2.0], backends=["x", "x"]))
    svc.close()


def test_submit_errors(service):
    with pytest.raises(UnknownContest):
        service.submit("nope", "t", config_payload([1.0]))
    with pytest.raises(TaskSetMismatch):
        service.submit("c1", "t", config_payload([1.0], tasks=CONTEST[:2] + CONTEST[3:]))
    with pytest.raises(TaskSetMismatch):
        service.submit("c1", "t", config_payload([1.0], tasks=TRIAL))
    with pytest.raises(FormatError):
        service.submit("c1", "t", config_payload([1.0, 2.0, 3.0, 4.0]))
    with pytest.raises(FormatError):
        service.submit("c1", "", config_payload([1.0]))
    with pytest.raises(UnknownSubmission):
        service.get_submission("sub-999999")


def test_payload_cap(tmp_path):
    svc = BenchService(tmp_path, [_config(max_payload_bytes=200)])
    with pytest.raises(PayloadTooLarge):
        svc.submit("c1", "t", config_payload([1.0], tasks=TRIAL))
    svc.close()


def test_script_payloads_are_executed(service):
    perfect = ActionScript([Pick("a"), Place("a", HOME)]).to_doc()
    off = ActionScript([Pick("a"), Place("a", Pose.from_translation(10, 0, 0))]).to_doc()
    payload = {"kind": "scripts", "runs": [
        {"run_id": "r0", "tasks": {t.task_id: off for t in CONTEST}},
        {"run_id": "r1", "tasks": {t.task_id: perfect for t in CONTEST}},
    ]}
    run = service.evaluate_submission(service.submit("c1", "bot", payload))
    assert run.average_error == 0.0 and run.run_id == "r1"
    assert (run.grasp_successes, run.grasp_attempts) == (5, 5)
    assert run.total_execution_time == 5 * 30.0


def test_failed_evaluation_rejects(service, monkeypatch):
    sid = service.submit("c1", "t", config_payload([1.0]))

    def boom(*a, **k):
        raise InvalidCounts("broken")

    monkeypatch.setattr(contest_mod, "evaluate_payload", boom)
    with pytest.raises(EvaluationFailed):
        service.evaluate_submission(sid)
    assert service.get_submission(sid).status is Status.REJECTED


# ---------------------------------------------------------------- leaderboard


def test_leaderboard_improvements(service):
    for team, err in (("alpha", 34.29), ("beta", 35.02), ("gamma", 49.75)):
        service.evaluate_submission(service.submit("c1", team, config_payload([err])))
    board = service.leaderboard("c1")
    assert board.baseline_error == 49.75
    assert [(e.team_id, round(e.improvement_pct, 1)) for e in board.entries] == [("alpha", 31.1), ("beta", 29.6)]
    assert [e.rank for e in board.entries] == [1, 2]


def test_empty_leaderboard_keeps_baseline(service):
    board = service.leaderboard("c1")
    assert board.entries == () and board.baseline_error == 49.75
    with pytest.raises(UnknownContest):
        service.leaderboard("zzz")


def test_best_versus_latest(tmp_path):
    for mode, expected in (("best", "20.00"), ("latest", "30.00")):
        svc = BenchService(tmp_path / mode, [_config(leaderboard_mode=mode)])
        svc.transition("c1", "contest")
        for err in (20.0, 30.0):
            svc.evaluate_submission(svc.submit("c1", "t", config_payload([err])))
        assert fmt_cm(svc.leaderboard("c1").entries[0].final_error) == expected
        svc.close()


def test_leaderboard_monotonicity(service):
    import random

    rnd = random.Random(4)
    prev = []
    for i in range(12):
        err = rnd.choice([10.0, 20.0, 30.0, 40.0])
        t = rnd.choice([50.0, 60.0])
        service.evaluate_submission(service.submit("c1", f"team{i}", config_payload([err], times=[t])))
        cur = [(e.final_error, e.total_execution_time, e.team_id) for e in service.leaderboard("c1").entries]
        assert [k for k in cur if k in prev] == prev
        prev = cur


# ---------------------------------------------------------------- lifecycle


def test_lifecycle(tmp_path):
    svc = BenchService(tmp_path, [_config()])
    assert svc.stage("c1") is Stage.TRIAL
    assert [t.task_id for t in svc.visible_tasks("c1")] == ["trial-0", "trial-1"]
    trial_sid = svc.submit("c1", "early", config_payload([5.0], tasks=TRIAL))
    svc.evaluate_submission(trial_sid)
    svc.transition("c1", "contest")
    assert svc.leaderboard("c1", "trial").entries[0].team_id == "early"
    assert svc.leaderboard("c1").entries == ()
    svc.transition("c1", "closed")
    with pytest.raises(InvalidTransition):
        svc.transition("c1", "contest")
    with pytest.raises(ContestClosed):
        svc.submit("c1", "late", config_payload([5.0]))
    assert svc.tasks_doc("c1")["tasks"] == []
    svc.close()


def test_invalid_skip_transition(tmp_path):
    svc = BenchService(tmp_path, [_config()])
    with pytest.raises(InvalidTransition):
        svc.transition("c1", "closed")
    svc.close()


# ---------------------------------------------------------------- durability


def test_restart_keeps_acknowledged_submissions(tmp_path):
    svc = BenchService(tmp_path, [_config()])
    svc.transition("c1", "contest")
    sid = svc.submit("c1", "t", config_payload([12.0]))
    # no close(): simulate a crash, the log was fsync'ed at submit time
    again = BenchService(tmp_path, [_config()])
    assert again.stage("c1") is Stage.CONTEST
    assert again.get_submission(sid).status is Status.QUEUED
    first = canonical(again.evaluate_submission(sid).to_doc())
    second = canonical(again.evaluate_submission(sid).to_doc())
    assert first == second
    again.close()
    third = BenchService(tmp_path, [_config()])
    assert canonical(third.get_submission(sid).result) == first
    assert third.submit("c1", "t", config_payload([1.0])) != sid
    third.close()


def test_torn_log_line_is_dropped(tmp_path):
    svc = BenchService(tmp_path, [_config()])
    sid = svc.submit("c1", "t", config_payload([1.0], tasks=TRIAL))
    with open(svc.store.log_path, "ab") as fh:
        fh.write(b'{"type": "submitted", "subm')
    again = BenchService(tmp_path, [_config()])
    assert list(again.submissions) == [sid]
    sid2 = again.submit("c1", "t", config_payload([1.0], tasks=TRIAL))
    assert BenchService(tmp_path, [_config()]).get_submission(sid2).team_id == "t"


def test_snapshot_compaction(tmp_path, monkeypatch):
    monkeypatch.setattr(contest_mod, "SNAPSHOT_EVERY", 3)
    svc = BenchService(tmp_path, [_config()])
    ids = [svc.submit("c1", f"t{i}", config_payload([1.0], tasks=TRIAL)) for i in range(7)]
    assert svc.store.snapshot_path.exists()
    assert len(svc.store.log_path.read_bytes().splitlines()) < 7
    again = BenchService(tmp_path, [_config()])
    assert sorted(again.submissions) == ids


def test_record_log_sequence(tmp_path):
    log = RecordLog(tmp_path)
    log.recover()
    assert [log.append({"x": i})["seq"] for i in range(3)] == [1, 2, 3]
    log.write_snapshot({"n": 3})
    log.append({"x": 3})
    log.close()
    state, recs = RecordLog(tmp_path).recover()
    assert state == {"n": 3} and [r["seq"] for r in recs] == [4]


def test_workers_drain_queue(tmp_path):
    svc = BenchService(tmp_path, [_config()])
    svc.transition("c1", "contest")
    svc.start_workers()
    sids = [svc.submit("c1", f"t{i}", config_payload([10.0 + i])) for i in range(4)]
    assert svc.wait_idle(10)
    assert all(svc.get_submission(s).status is Status.SCORED for s in sids)
    svc.close()


# ---------------------------------------------------------------- HTTP


def test_http_api(tmp_path):
    svc = BenchService(tmp_path, [_config()])
    with TestClient(create_app(svc, run_workers=False)) as client:
        assert client.get("/v1/contests").json() == {"contests": [{"contest_id": "c1", "stage": "trial"}]}
        assert [t["task_id"] for t in client.get("/v1/contests/c1/tasks").json()["tasks"]] == ["trial-0", "trial-1"]
        assert client.post("/v1/contests/c1/stage", json={"stage": "contest"}).json()["stage"] == "contest"
        r = client.post("/v1/contests/c1/submissions", json={"team_id": "a", "payload": config_payload([34.29])})
        assert r.status_code == 201
        sid = r.json()["submission_id"]
        assert client.get(f"/v1/submissions/{sid}").json()["status"] == "queued"
        r = client.post(f"/v1/submissions/{sid}/evaluate")
        assert r.status_code == 200 and r.json()["status"] == "scored"
        board = client.get("/v1/contests/c1/leaderboard").json()
        assert board["baseline_error"] == 49.75 and board["entries"][0]["team_id"] == "a"
        assert client.get("/v1/contests/zzz/leaderboard").status_code == 404
        assert client.get("/v1/submissions/nope").status_code == 404
        bad = config_payload([1.0], tasks=CONTEST[:4])
        assert client.post("/v1/contests/c1/submissions", json={"team_id": "a", "payload": bad}).status_code == 422
        assert client.post("/v1/contests/c1/submissions", content=b"{oops").status_code == 400
        assert client.post("/v1/contests/c1/stage", json={"stage": "trial"}).status_code == 409
        assert client.get("/v1/contests/c1/leaderboard?stage=bogus").status_code == 400
        client.post("/v1/contests/c1/stage", json={"stage": "closed"})
        closed = client.post("/v1/contests/c1/submissions", json={"team_id": "a", "payload": config_payload([1.0])})
        assert closed.status_code == 409


def test_contest_file_loading(tmp_path):
    from rearrange_bench.io import save_task
    from rearrange_bench.model import SetTag, Task

    (tmp_path / "tasks").mkdir()
    for t in TRIAL:
        save_task(t, tmp_path / "tasks" / f"{t.task_id}.json")
    for t in CONTEST:
        save_task(Task(t.task_id, t.objects, t.initial, t.target, SetTag.CONTEST), tmp_path / "tasks" / f"{t.task_id}.json")
    doc = {
        "contest_id": "file",
        "trial_tasks": {"path": "../tasks", "set_tag": "trial"},
        "contest_tasks": {"path": "../tasks", "set_tag": "contest"},
        "policy": {"variant": "constant_2021", "constant_value": 30},
        "runs_per_team": 1,
    }
    (tmp_path / "contests").mkdir()
    (tmp_path / "contests" / "file.json").write_text(json.dumps(doc))
    from rearrange_bench.service import load_contest

    c = load_contest(tmp_path / "contests" / "file.json")
    assert len(c.trial_tasks) == 2 and len(c.contest_tasks) == 5 and c.runs_per_team == 1
    svc = BenchService(tmp_path)
    assert "file" in svc.contests
    svc.close()
