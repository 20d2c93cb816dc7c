"""Kinematic pick-and-place execution.

Objects teleport: a successful Pick lifts an object out of the world, a
successful Place puts it down at the requested pose. Each processed action
costs ``per_action_cost_s`` of simulated time; an action that would push the
clock past ``time_limit_s`` is not processed and the run stops with
``TimeLimit``. Objects still in the gripper when the run ends go back to their
pre-pick pose, so the final scene always holds every object exactly once.

Optional noise uses its own ``PCG64(noise.seed)`` stream. Draws happen in
action order: one uniform per processed Pick of an unblocked object (grasp
success if ``u >= grasp_fail_prob``), then three normals per processed Place
of a held object (position jitter). Every draw is recorded in the action log.
"""

from __future__ import annotations

import enum
import time
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np

from .errors import FormatError, MalformedScript, UnknownInstance
from .geometry import Pose, box_corners
from .io import config_from_doc, config_to_doc, pose_from_doc, pose_to_doc, read_json, write_json
from .model import SceneConfiguration, Task
from .scenegen.graph import GenerationConfig, Workspace
from .scenegen.validity import SceneGeometry, bounds_excess, resting_on, validate_scene

HAZARD_MARGIN_CM = 10.0


@dataclass(frozen=True)
class Pick:
    instance_id: str


@dataclass(frozen=True)
class Place:
    instance_id: str
    pose: Pose


Action = Pick | Place


@dataclass(frozen=True)
class ActionScript:
    actions: tuple[Action, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "actions", tuple(self.actions))

    def __len__(self):
        return len(self.actions)

    def check_well_formed(self) -> None:
        """Every Place needs an open Pick of the same instance; no double picks."""
        open_picks: set[str] = set()
        for i, a in enumerate(self.actions):
            if isinstance(a, Pick):
                if a.instance_id in open_picks:
                    raise MalformedScript(f"action {i}: {a.instance_id!r} picked twice without a place")
                open_picks.add(a.instance_id)
            elif isinstance(a, Place):
                if a.instance_id not in open_picks:
                    raise MalformedScript(f"action {i}: place of {a.instance_id!r} without a preceding pick")
                open_picks.remove(a.instance_id)
            else:
                raise MalformedScript(f"action {i}: unknown action {a!r}")

    def to_doc(self) -> dict:
        acts = []
        for a in self.actions:
            if isinstance(a, Pick):
                acts.append({"op": "pick", "id": a.instance_id})
            else:
                acts.append({"op": "place", "id": a.instance_id, **pose_to_doc(a.pose)})
        return {"actions": acts}

    @classmethod
    def from_doc(cls, doc: Mapping) -> ActionScript:
        if not isinstance(doc, Mapping) or not isinstance(doc.get("actions"), list):
            raise MalformedScript("action script needs an 'actions' list")
        out: list[Action] = []
        for i, a in enumerate(doc["actions"]):
            op = a.get("op") if isinstance(a, Mapping) else None
            if op == "pick":
                out.append(Pick(str(a["id"])))
            elif op == "place":
                try:
                    out.append(Place(str(a["id"]), pose_from_doc(a, f"actions[{i}]")))
                except FormatError as exc:
                    raise MalformedScript(str(exc)) from exc
            else:
                raise MalformedScript(f"actions[{i}]: unknown op {op!r}")
        return cls(tuple(out))


@dataclass(frozen=True)
class ExecutionNoise:
    grasp_fail_prob: float = 0.0
    place_jitter_sigma_cm: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.grasp_fail_prob <= 1.0:
            raise ValueError("grasp_fail_prob must lie in [0, 1]")
        if self.place_jitter_sigma_cm < 0:
            raise ValueError("place_jitter_sigma_cm must be non-negative")


@dataclass(frozen=True)
class ExecutionConfig:
    time_limit_s: float = 600.0
    per_action_cost_s: float = 15.0
    noise: ExecutionNoise | None = None
    workspace: Workspace = field(default_factory=Workspace)
    validity: GenerationConfig = field(default_factory=GenerationConfig)
    wall_clock: bool = False

    def __post_init__(self):
        if not self.time_limit_s > 0:
            raise ValueError("time_limit_s must be positive")
        if self.per_action_cost_s < 0:
            raise ValueError("per_action_cost_s must be non-negative")


class Termination(str, enum.Enum):
    COMPLETED = "completed"
    TIME_LIMIT = "time_limit"
    HAZARD = "hazard"


@dataclass(frozen=True)
class ExecutionReport:
    final: SceneConfiguration
    elapsed_s: float
    grasp_attempts: int
    grasp_successes: int
    terminated: Termination
    action_log: tuple[dict, ...]

    def to_doc(self) -> dict:
        return {
            "final": config_to_doc(self.final),
            "elapsed_s": self.elapsed_s,
            "grasp_attempts": self.grasp_attempts,
            "grasp_successes": self.grasp_successes,
            "terminated": self.terminated.value,
            "action_log": list(self.action_log),
        }

    @classmethod
    def from_doc(cls, doc: Mapping) -> ExecutionReport:
        return cls(
            final=config_from_doc(doc["final"], "final"),
            elapsed_s=float(doc["elapsed_s"]),
            grasp_attempts=int(doc["grasp_attempts"]),
            grasp_successes=int(doc["grasp_successes"]),
            terminated=Termination(doc["terminated"]),
            action_log=tuple(doc.get("action_log", ())),
        )


def execute(task: Task, script: ActionScript, cfg: ExecutionConfig = ExecutionConfig()) -> ExecutionReport:
    for a in script.actions:
        if a.instance_id not in task.initial:
            raise UnknownInstance(a.instance_id)
    script.check_well_formed()

    models = {o.instance_id: o for o in task.objects}
    world: dict[str, Pose] = dict(task.initial.items())
    held: dict[str, Pose] = {}  # instance -> pre-pick pose
    rng = np.random.Generator(np.random.PCG64(cfg.noise.seed)) if cfg.noise else None
    vcfg = cfg.validity
    ws = cfg.workspace

    elapsed = 0.0
    attempts = successes = 0
    log: list[dict] = []
    status = Termination.COMPLETED
    t0 = time.perf_counter()

    for i, action in enumerate(script.actions):
        if cfg.wall_clock:
            elapsed = time.perf_counter() - t0
            if elapsed > cfg.time_limit_s:
                status = Termination.TIME_LIMIT
                break
        else:
            if elapsed + cfg.per_action_cost_s > cfg.time_limit_s:
                status = Termination.TIME_LIMIT
                break
            elapsed += cfg.per_action_cost_s
        iid = action.instance_id
        entry = {"index": i, "op": "pick" if isinstance(action, Pick) else "place", "id": iid}

        if isinstance(action, Pick):
            attempts += 1
            geo = SceneGeometry.build(world, models)
            blockers = resting_on(geo, iid, ws, vcfg)
            if blockers:
                entry.update(ok=False, reason="blocked", blockers=blockers)
            else:
                ok = True
                if rng is not None:
                    u = float(rng.random())
                    entry["draw"] = u
                    ok = u >= cfg.noise.grasp_fail_prob
                if ok:
                    successes += 1
                    held[iid] = world.pop(iid)
                    entry["ok"] = True
                else:
                    entry.update(ok=False, reason="grasp_failed")
        else:
            if iid not in held:
                entry.update(ok=False, reason="not_held")
                log.append(entry)
                continue
            pose = action.pose
            if rng is not None:
                d = rng.normal(0.0, 1.0, size=3) * cfg.noise.place_jitter_sigma_cm
                entry["draw"] = [float(x) for x in d]
                pose = pose.with_translation(pose.translation + d)
            excess = bounds_excess(box_corners(models[iid].bbox, pose), ws)
            if excess > HAZARD_MARGIN_CM:
                # the object ends up wherever it was dropped
                held.pop(iid)
                world[iid] = pose
                entry.update(ok=False, reason="hazard", excess_cm=excess)
                log.append(entry)
                status = Termination.HAZARD
                break
            trial = dict(world)
            trial[iid] = pose
            check = validate_scene(trial, models, ws, vcfg, only=[iid])
            if not check.valid:
                world[iid] = held.pop(iid)
                entry.update(ok=False, reason="invalid_placement", violations=sorted(check.kinds()))
            else:
                held.pop(iid)
                world[iid] = pose
                entry["ok"] = True
        log.append(entry)

    for iid, pose in held.items():
        world[iid] = pose
    final = SceneConfiguration((iid, world[iid]) for iid in task.initial)
    return ExecutionReport(final, elapsed, attempts, successes, status, tuple(log))


def replay_deterministic(task: Task, script: ActionScript, cfg: ExecutionConfig) -> ExecutionReport:
    """Execute with simulated time only, so the report depends on inputs alone."""
    if cfg.wall_clock:
        raise ValueError("deterministic replay needs wall_clock=False")
    return execute(task, script, cfg)


def load_script(path) -> ActionScript:
    return ActionScript.from_doc(read_json(path))


def save_script(script: ActionScript, path) -> None:
    write_json(path, script.to_doc())


# ---------------------------------------------------------------- reference solver


def _parking_spots(workspace: Workspace, step: float) -> list[np.ndarray]:
    xs = np.arange(workspace.x_min + step / 2, workspace.x_max, step)
    ys = np.arange(workspace.y_min + step / 2, workspace.y_max, step)
    return [np.array([x, y, workspace.surface_z]) for y in ys for x in xs]


def solve_kinematic(
    task: Task, cfg: ExecutionConfig = ExecutionConfig(), max_steps: int | None = None
) -> ActionScript:
    """Build a script that moves every object exactly onto its target pose.

    Greedy: repeatedly move any unstacked object whose target placement is
    valid right now; when stuck, park a free object on a clear table spot.
    Raises ``RuntimeError`` if no progress is possible.
    """
    models = {o.instance_id: o for o in task.objects}
    ws, vcfg = cfg.workspace, cfg.validity
    world: dict[str, Pose] = dict(task.initial.items())
    done = {iid for iid in world if world[iid] == task.target[iid]}
    actions: list[Action] = []
    parked: set[str] = set()
    limit = max_steps if max_steps is not None else 4 * len(world) + 4

    def movable(iid):
        return not resting_on(SceneGeometry.build(world, models), iid, ws, vcfg)

    def fits(iid, pose):
        trial = {k: v for k, v in world.items() if k != iid}
        trial[iid] = pose
        return validate_scene(trial, models, ws, vcfg, only=[iid]).valid

    for _ in range(limit):
        todo = [iid for iid in task.instance_ids if iid not in done]
        if not todo:
            return ActionScript(tuple(actions))
        moved = False
        for iid in todo:
            if movable(iid) and fits(iid, task.target[iid]):
                actions += [Pick(iid), Place(iid, task.target[iid])]
                world[iid] = task.target[iid]
                done.add(iid)
                moved = True
                break
        if moved:
            continue
        # park something that is in the way
        step = max(max(o.bbox.l, o.bbox.w) for o in task.objects) + 2.0
        for iid in todo:
            if iid in parked or not movable(iid):
                continue
            for spot in _parking_spots(ws, step):
                pose = Pose.from_yaw(0.0, spot)
                if fits(iid, pose):
                    actions += [Pick(iid), Place(iid, pose)]
                    world[iid] = pose
                    parked.add(iid)
                    moved = True
                    break
            if moved:
                break
        if not moved:
            break
    raise RuntimeError(f"no kinematic solution found for task {task.task_id!r}")
