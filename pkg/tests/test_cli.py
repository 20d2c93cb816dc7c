import json
from pathlib import Path

import pytest

from rearrange_bench.cli import EXIT_ERROR, EXIT_EXHAUSTED, EXIT_HAZARD, EXIT_OK, main
from rearrange_bench.geometry import Pose
from rearrange_bench.harness import ActionScript, Pick, Place, save_script, solve_kinematic
from rearrange_bench.io import config_to_doc, load_task, save_task, write_json
from rearrange_bench.scoring import UebPolicy

from conftest import make_task

DATA = Path(__file__).resolve().parents[1] / "data"


def _gen(out, *extra):
    argv = ["gen-tasks", "--db", str(DATA / "objects.json"), "--template", str(DATA / "templates" / "single.json")]
    return main(argv + ["--out", str(out), *extra])


@pytest.fixture
def simple_task(tmp_path):
    task = make_task(
        [("a", (4, 4, 4))],
        {"a": Pose.from_translation(-20, 0, 0)},
        {"a": Pose.from_translation(20, 0, 0)},
        task_id="t-simple",
    )
    path = tmp_path / "task.json"
    save_task(task, path)
    return task, path


def test_gen_tasks_is_deterministic(tmp_path, capsys):
    assert _gen(tmp_path / "a", "--count", "3", "--seed", "7") == EXIT_OK
    assert _gen(tmp_path / "b", "--count", "3", "--seed", "7") == EXIT_OK
    names = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert len(names) == 4 and "manifest.json" in names
    for n in names:
        assert (tmp_path / "a" / n).read_bytes() == (tmp_path / "b" / n).read_bytes()
    assert "wrote 3 task(s)" in capsys.readouterr().out


def test_gen_tasks_count_zero(tmp_path):
    assert _gen(tmp_path / "z", "--count", "0") == EXIT_OK
    manifest = json.loads((tmp_path / "z" / "manifest.json").read_text())
    assert manifest["tasks"] == []


def test_gen_tasks_exhaustion_exit_code(tmp_path, capsys):
    conf = tmp_path / "tiny.json"
    write_json(conf, {"workspace": {"x_min": -3, "x_max": 3, "y_min": -3, "y_max": 3}})
    rc = _gen(tmp_path / "x", "--config", str(conf), "--max-rejections", "5")
    assert rc == EXIT_EXHAUSTED
    assert "error" in capsys.readouterr().err


def test_missing_input_is_an_error(tmp_path, capsys):
    rc = main(["gen-tasks", "--db", str(tmp_path / "nope.json"), "--template", "x.json", "--out", str(tmp_path)])
    assert rc == EXIT_ERROR
    assert capsys.readouterr().err.startswith("error:")


def test_score_target_is_zero(simple_task, tmp_path, capsys):
    task, path = simple_task
    sol = tmp_path / "sol.json"
    write_json(sol, config_to_doc(task.target))
    assert main(["score", "--task", str(path), "--solution", str(sol), "--baseline"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "E = 0.00" in out and "improvement 100.0%" in out


def test_score_error_only(capsys):
    assert main(["score", "--error", "34.29", "--baseline", "49.75"]) == EXIT_OK
    out = capsys.readouterr().out.splitlines()
    assert out == ["E = 34.29", "baseline = 49.75", "improvement 31.1%"]


def test_score_strict_missing_object(simple_task, tmp_path, capsys):
    _, path = simple_task
    sol = tmp_path / "empty.json"
    write_json(sol, config_to_doc({}))
    assert main(["score", "--task", str(path), "--solution", str(sol), "--strict"]) == EXIT_ERROR
    assert "MissingObject" in capsys.readouterr().err
    assert main(["score", "--task", str(path), "--solution", str(sol)]) == EXIT_OK


def test_run_then_score(simple_task, tmp_path, capsys):
    task, path = simple_task
    script, report, out = tmp_path / "s.json", tmp_path / "r.json", tmp_path / "score.json"
    save_script(solve_kinematic(task), script)
    assert main(["run", "--task", str(path), "--script", str(script), "--out", str(report)]) == EXIT_OK
    assert "completed: 30 s, grasps 1/1=100.0%" in capsys.readouterr().out
    argv = ["score", "--task", str(path), "--solution", str(report), "--team", "t", "--out", str(out)]
    assert main(argv) == EXIT_OK
    doc = json.loads(out.read_text())
    assert doc["average_error"] == 0.0 and doc["total_execution_time_s"] == 30.0


def test_run_time_limit(simple_task, tmp_path, capsys):
    task, path = simple_task
    script = tmp_path / "s.json"
    save_script(ActionScript([Pick("a"), Place("a", task.target["a"])] * 30), script)
    assert main(["run", "--task", str(path), "--script", str(script)]) == EXIT_OK
    assert capsys.readouterr().out.startswith("time_limit: 600 s")


def test_run_hazard_exit_code(simple_task, tmp_path):
    _, path = simple_task
    script = tmp_path / "s.json"
    save_script(ActionScript([Pick("a"), Place("a", Pose.from_translation(90, 0, 0))]), script)
    assert main(["run", "--task", str(path), "--script", str(script)]) == EXIT_HAZARD


def _report(path, team, err, t=100.0):
    write_json(path, {"team_id": team, "average_error": err, "total_execution_time_s": t,
                      "grasp": {"successes": 1, "attempts": 2}})
    return str(path)


def test_rank_csv(tmp_path, capsys):
    reps = [_report(tmp_path / f"{n}.json", n, e) for n, e in [("b", 35.02), ("a", 34.29), ("c", 50.0)]]
    csv_path = tmp_path / "lb.csv"
    assert main(["rank", *reps, "--baseline", "49.75", "--csv", str(csv_path), "--format", "csv"]) == EXIT_OK
    text = csv_path.read_text()
    assert capsys.readouterr().out == text
    assert text.splitlines() == [
        "rank,team_id,error_cm,improvement_pct,time_s,grasp_rate",
        "1,a,34.29,31.1,100.0,1/2=50.0%",
        "2,b,35.02,29.6,100.0,1/2=50.0%",
    ]
    assert main(["rank", *reps, "--baseline", "49.75", "--all", "--format", "csv"]) == EXIT_OK
    assert capsys.readouterr().out.count("\n") == 4


def test_validate_task(simple_task, tmp_path, capsys):
    task, path = simple_task
    assert main(["validate-task", str(path)]) == EXIT_OK
    bad = make_task([("a", (4, 4, 4)), ("b", (4, 4, 4))],
                    {"a": Pose.identity(), "b": Pose.from_translation(1, 0, 0)},
                    {"a": Pose.identity(), "b": Pose.from_translation(10, 0, 0)})
    save_task(bad, tmp_path / "bad.json")
    assert main(["validate-task", str(tmp_path / "bad.json")]) == EXIT_ERROR
    assert "interpenetration" in capsys.readouterr().err


def test_global_flags_after_subcommand(capsys):
    assert main(["score", "--error", "34.29", "--baseline", "49.75", "--quiet"]) == EXIT_OK
    assert capsys.readouterr().out == ""


def test_ueb_constant_flag(simple_task, tmp_path, capsys):
    _, path = simple_task
    sol = tmp_path / "sol.json"
    write_json(sol, config_to_doc({"a": Pose.from_translation(-20, 0, 0)}))
    assert main(["score", "--task", str(path), "--solution", str(sol), "--ueb-constant", "30"]) == EXIT_OK
    assert "E = 30.00  (capped 1)" in capsys.readouterr().out
    assert UebPolicy.constant(30).to_doc()["variant"] == "constant_2021"


def test_usage_errors(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["score", "--bogus"])
    assert exc.value.code == EXIT_ERROR
    assert main(["score", "--error", "3"]) == EXIT_ERROR


def test_serve_bind_failure(tmp_path, capsys):
    assert main(["serve", "--bind", "not-a-bind", "--data-dir", str(tmp_path)]) == EXIT_ERROR
