from collections import Counter

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rearrange_bench.errors import MalformedScript, UnknownInstance
from rearrange_bench.geometry import Pose
from rearrange_bench.harness import (
    ActionScript,
    ExecutionConfig,
    ExecutionNoise,
    ExecutionReport,
    Pick,
    Place,
    Termination,
    execute,
    load_script,
    replay_deterministic,
    save_script,
    solve_kinematic,
)
from rearrange_bench.scenegen import GenerationConfig, Workspace, generate_batch
from rearrange_bench.scoring import evaluate_task

from conftest import make_task

A0, A1 = Pose.from_translation(-20, 0, 0), Pose.from_translation(20, 0, 0)
B0, B1 = Pose.from_translation(-20, 20, 0), Pose.from_translation(20, 20, 0)


@pytest.fixture
def task():
    return make_task([("a", (4, 4, 4)), ("b", (6, 6, 3))], {"a": A0, "b": B0}, {"a": A1, "b": B1})


@pytest.fixture
def stacked():
    # cup "c" sits on box "b"; the target puts them side by side
    initial = {"b": Pose.identity(), "c": Pose.from_translation(0, 0, 6)}
    target = {"b": Pose.from_translation(20, 0, 0), "c": Pose.from_translation(30, 0, 0)}
    return make_task([("b", (10, 10, 6)), ("c", (4, 4, 5))], initial, target)


def _perfect(task):
    acts = []
    for iid in task.instance_ids:
        acts += [Pick(iid), Place(iid, task.target[iid])]
    return ActionScript(acts)


def test_empty_script(task):
    rep = execute(task, ActionScript())
    assert rep.final == task.initial
    assert (rep.elapsed_s, rep.terminated, rep.grasp_attempts) == (0.0, Termination.COMPLETED, 0)


def test_perfect_script(task):
    rep = execute(task, _perfect(task))
    assert rep.terminated is Termination.COMPLETED
    assert rep.final == task.target
    assert evaluate_task(task, rep.final).task_error == 0.0
    assert (rep.grasp_attempts, rep.grasp_successes, rep.elapsed_s) == (2, 2, 60.0)


def test_time_limit_after_forty_actions(task):
    acts = []
    for _ in range(25):
        acts += [Pick("a"), Place("a", A1)]
    rep = execute(task, ActionScript(acts))
    assert len(acts) == 50
    assert rep.terminated is Termination.TIME_LIMIT
    assert len(rep.action_log) == 40 and rep.elapsed_s == 600.0


def test_time_limit_mid_hold_restores_object(task):
    rep = execute(task, ActionScript([Pick("a"), Place("a", A1)]), ExecutionConfig(time_limit_s=15))
    assert rep.terminated is Termination.TIME_LIMIT
    assert rep.final["a"] == A0


def test_hazard_stops_execution(task):
    far = Pose.from_translation(80, 0, 0)  # box edge 18 cm past x_max
    script = ActionScript([Pick("a"), Place("a", far), Pick("b"), Place("b", B1)])
    rep = execute(task, script)
    assert rep.terminated is Termination.HAZARD
    assert rep.final["a"] == far and rep.final["b"] == B0
    assert len(rep.action_log) == 2


def test_small_overshoot_is_a_failed_place_not_a_hazard(task):
    near = Pose.from_translation(63, 0, 0)
    rep = execute(task, ActionScript([Pick("a"), Place("a", near)]))
    assert rep.terminated is Termination.COMPLETED
    assert rep.final["a"] == A0
    assert rep.action_log[-1]["reason"] == "invalid_placement"


def test_failed_place_restores_pre_pick_pose(task):
    rep = execute(task, ActionScript([Pick("a"), Place("a", B0)]))
    assert rep.final["a"] == A0
    assert rep.action_log[-1]["violations"] == ["interpenetration"]


def test_pick_blocked_by_stacked_object(stacked):
    rep = execute(stacked, ActionScript([Pick("b"), Place("b", stacked.target["b"])]))
    assert rep.grasp_attempts == 1 and rep.grasp_successes == 0
    assert rep.action_log[0]["reason"] == "blocked" and rep.action_log[0]["blockers"] == ["c"]
    assert rep.final == stacked.initial


def test_solver_handles_stacks(stacked):
    script = solve_kinematic(stacked)
    rep = execute(stacked, script)
    assert rep.final == stacked.target and rep.terminated is Termination.COMPLETED


def test_solver_uses_parking_for_swaps():
    task = make_task([("a", (4, 4, 4)), ("b", (4, 4, 4))], {"a": A0, "b": A1}, {"a": A1, "b": A0})
    rep = execute(task, solve_kinematic(task))
    assert rep.final == task.target
    assert rep.grasp_attempts == 3


def test_malformed_scripts(task):
    with pytest.raises(MalformedScript):
        execute(task, ActionScript([Place("a", A1)]))
    with pytest.raises(MalformedScript):
        execute(task, ActionScript([Pick("a"), Pick("a")]))
    with pytest.raises(UnknownInstance):
        execute(task, ActionScript([Pick("zzz")]))
    with pytest.raises(MalformedScript):
        ActionScript.from_doc({"actions": [{"op": "jump", "id": "a"}]})


def test_script_file_round_trip(task, tmp_path):
    script = _perfect(task)
    save_script(script, tmp_path / "s.json")
    back = load_script(tmp_path / "s.json")
    assert [type(a) for a in back.actions] == [type(a) for a in script.actions]
    assert execute(task, back).final == task.target


def test_report_round_trip(task):
    rep = execute(task, _perfect(task), ExecutionConfig(noise=ExecutionNoise(0.3, 0.5, 4)))
    back = ExecutionReport.from_doc(rep.to_doc())
    assert back.to_doc() == rep.to_doc()


# ---------------------------------------------------------------- noise and determinism


def _noisy(seed, p=0.5, sigma=0.0):
    return ExecutionConfig(noise=ExecutionNoise(p, sigma, seed))


def test_replay_is_identical(task):
    script = _perfect(task)
    cfg = _noisy(3, 0.5, 0.3)
    assert replay_deterministic(task, script, cfg) == replay_deterministic(task, script, cfg)
    with pytest.raises(ValueError):
        replay_deterministic(task, script, ExecutionConfig(wall_clock=True))


def test_different_seeds_draw_differently(task):
    script = _perfect(task)
    draws = lambda rep: [e.get("draw") for e in rep.action_log]
    assert draws(execute(task, script, _noisy(1))) != draws(execute(task, script, _noisy(2)))


def test_noise_off_is_seed_independent(task):
    script = _perfect(task)
    a = execute(task, script, ExecutionConfig(noise=ExecutionNoise(0.0, 0.0, 1)))
    b = execute(task, script, ExecutionConfig(noise=ExecutionNoise(0.0, 0.0, 2)))
    assert a.final == b.final and a.final == task.target
    assert execute(task, script) == execute(task, script)


@settings(max_examples=60, deadline=None)
@given(
    st.lists(st.tuples(st.sampled_from(["a", "b"]), st.integers(-70, 70), st.integers(-50, 50)), max_size=30),
    st.integers(0, 1000),
)
def test_conservation_and_time_properties(moves, seed):
    task = make_task([("a", (4, 4, 4)), ("b", (6, 6, 3))], {"a": A0, "b": B0}, {"a": A1, "b": B1})
    acts = []
    for iid, x, y in moves:
        acts += [Pick(iid), Place(iid, Pose.from_translation(x, y, 0))]
    cfg = ExecutionConfig(noise=ExecutionNoise(0.2, 0.5, seed))
    rep = execute(task, ActionScript(acts), cfg)
    assert Counter(list(rep.final)) == Counter(task.instance_ids)
    processed = len(rep.action_log)
    assert rep.elapsed_s == cfg.per_action_cost_s * processed <= cfg.time_limit_s
    assert rep.grasp_attempts == sum(1 for e in rep.action_log if e["op"] == "pick")
    assert rep.grasp_successes <= rep.grasp_attempts


def test_solver_on_generated_tasks(db, templates):
    batch = generate_batch([(t, 3) for t in templates], db, Workspace(), GenerationConfig(seed=21))
    for g in batch:
        rep = execute(g.task, solve_kinematic(g.task))
        assert rep.terminated is Termination.COMPLETED
        assert evaluate_task(g.task, rep.final).task_error == 0.0
