"""Seeded task generation from scene-graph templates.

Randomness comes from ``numpy.random.Generator(PCG64(seed))``. Per-task seeds
are derived with splitmix64, so task ``k`` of template ``t`` depends only on
``(seed, t, k)`` and tasks can be generated in any order or in parallel.

Draw order inside one attempt (fixed, so files are reproducible):

1. one ``integers`` draw per slot, in declaration order, to pick a model;
2. for each scene (initial, then target), per slot in topological order:
   three uniform translation offsets, one uniform yaw, and for
   ``adjacent_to`` children one uniform gap.
"""

from __future__ import annotations

from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from ..errors import EmptyCandidateSet, GenerationExhausted
from ..geometry import Pose, box_center, box_corners, rot_z
from ..model import ObjectDatabase, ObjectModel, SceneConfiguration, SetTag, Task
from .graph import GenerationConfig, Jitter, Relation, SceneGraph, Template, Workspace
from .validity import SceneRelation, validate_scene

_MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    z = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def derive_seed(seed: int, *indices: int) -> int:
    """Fold indices into ``seed``: ``s <- splitmix64(s XOR i)`` for each index."""
    s = int(seed) & _MASK64
    for i in indices:
        s = splitmix64(s ^ (int(i) & _MASK64))
    return s


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def sample_objects(graph: SceneGraph, db: ObjectDatabase, rng: np.random.Generator) -> dict[str, ObjectModel]:
    """Bind each slot to one model drawn uniformly from its candidates."""
    pools = {}
    for node in graph.nodes:
        cands = db.candidates(node.select)
        if not cands:
            raise EmptyCandidateSet(node.slot_id)
        pools[node.slot_id] = cands
    return {sid: pool[int(rng.integers(len(pool)))] for sid, pool in pools.items()}


def _jitter_pose(j: Jitter, rng: np.random.Generator) -> Pose:
    d = [rng.uniform(-r, r) for r in j.pos_range]
    yaw = rng.uniform(-j.yaw_range_deg, j.yaw_range_deg)
    return Pose(rot_z(yaw), d)


def _planar_unit(v: np.ndarray, fallback: np.ndarray) -> np.ndarray:
    for cand in (v, fallback, np.array([1.0, 0.0, 0.0])):
        d = np.array([cand[0], cand[1], 0.0])
        n = np.linalg.norm(d)
        if n > 1e-9:
            return d / n
    raise AssertionError("unreachable")


def _support_radius(rot: np.ndarray, halves: np.ndarray, direction: np.ndarray) -> float:
    return float(np.abs(rot.T @ direction) @ halves)


def instantiate_poses(
    graph: SceneGraph,
    assignment: Mapping[str, object],
    rng: np.random.Generator,
    adjacency_gap: tuple[float, float] = (0.0, 2.0),
) -> SceneConfiguration:
    """Place every slot; ``assignment`` maps slot ids to anything with a ``bbox``.

    Roots sit at ``anchor o jitter``. Children start from
    ``parent o offset o jitter``; ``on_top_of`` children then have their height
    set so their lowest corner touches the parent's highest corner, and
    ``adjacent_to`` children are pushed out from the parent along the offset
    direction until the boxes are ``gap`` apart, resting on the parent's
    bottom plane.
    """
    poses: dict[str, Pose] = {}
    for sid in graph.topological_order():
        node = graph.node(sid)
        bbox = assignment[sid].bbox
        edge = graph.parent_edge(sid)
        if edge is None:
            poses[sid] = node.anchor_pose @ _jitter_pose(node.jitter, rng)
            continue
        parent = poses[edge.parent]
        pbox = assignment[edge.parent].bbox
        jit = _jitter_pose(edge.jitter, rng)
        pose = parent @ edge.offset @ jit
        if edge.relation is Relation.ON_TOP_OF:
            lift = box_corners(pbox, parent)[:, 2].max() - box_corners(bbox, pose)[:, 2].min()
            pose = pose.with_translation(pose.translation + [0.0, 0.0, lift])
        else:
            gap = rng.uniform(*adjacency_gap)
            direction = _planar_unit(parent.rotation @ edge.offset.translation, parent.rotation[:, 0])
            reach = (
                _support_radius(parent.rotation, pbox.half_extents, direction)
                + _support_radius(pose.rotation, bbox.half_extents, direction)
                + gap
            )
            # keep only the part of the jitter that slides along the parent's side
            shift = parent.rotation @ edge.offset.rotation @ jit.translation
            shift[2] = 0.0
            shift -= direction * (shift @ direction)
            center = box_center(pbox, parent) + direction * reach + shift
            t = center - pose.rotation @ bbox.center_offset
            pose = pose.with_translation(t)
            drop = box_corners(pbox, parent)[:, 2].min() - box_corners(bbox, pose)[:, 2].min()
            pose = pose.with_translation(pose.translation + [0.0, 0.0, drop])
        poses[sid] = pose
    return SceneConfiguration((sid, poses[sid]) for sid in graph.slot_ids)


def graph_relations(graph: SceneGraph) -> list[SceneRelation]:
    return [SceneRelation(e.parent, e.child, e.relation) for e in graph.edges]


@dataclass(frozen=True)
class GeneratedTask:
    task: Task
    template_id: str
    seed: int
    rejections_used: int

    def manifest_entry(self) -> dict:
        return {
            "task_id": self.task.task_id,
            "template_id": self.template_id,
            "seed": self.seed,
            "rejections_used": self.rejections_used,
            "set_tag": self.task.set_tag.value,
        }


def _generate(
    initial_graph: SceneGraph,
    target_graph: SceneGraph,
    db: ObjectDatabase,
    workspace: Workspace,
    cfg: GenerationConfig,
    rng: np.random.Generator,
    task_id: str,
    template_index: int | None = None,
) -> tuple[Task, int]:
    if sorted(initial_graph.slot_ids) != sorted(target_graph.slot_ids):
        raise ValueError("initial and target graphs must share one slot set")
    rel_i = graph_relations(initial_graph)
    rel_t = graph_relations(target_graph)
    for attempt in range(cfg.max_rejections):
        assignment = sample_objects(initial_graph, db, rng)
        instances = {sid: m.instance(sid) for sid, m in assignment.items()}
        initial = instantiate_poses(initial_graph, instances, rng, cfg.adjacency_gap)
        target = instantiate_poses(target_graph, instances, rng, cfg.adjacency_gap)
        if not validate_scene(initial, instances, workspace, cfg, rel_i):
            continue
        if not validate_scene(target, instances, workspace, cfg, rel_t):
            continue
        target = SceneConfiguration((sid, target[sid]) for sid in initial_graph.slot_ids)
        task = Task(
            task_id=task_id,
            objects=tuple(instances[sid] for sid in initial_graph.slot_ids),
            initial=initial,
            target=target,
            set_tag=cfg.set_tag,
        )
        return task, attempt
    raise GenerationExhausted(cfg.max_rejections, template_index)


def generate_task(
    initial_graph: SceneGraph,
    target_graph: SceneGraph,
    db: ObjectDatabase,
    workspace: Workspace,
    cfg: GenerationConfig,
    task_id: str | None = None,
) -> Task:
    """Rejection-sample one task whose initial and target scenes are both valid.

    A single object assignment is drawn per attempt and shared by both
    scenes; model selectors come from ``initial_graph``.
    """
    tid = task_id if task_id is not None else f"task-{cfg.seed:016x}"
    task, _ = _generate(initial_graph, target_graph, db, workspace, cfg, make_rng(cfg.seed), tid)
    return task


def trial_count(n: int, trial_fraction: Fraction | float) -> int:
    """``round(n * fraction)`` with halves rounded up, computed exactly."""
    frac = Fraction(trial_fraction).limit_denominator(10**9) if isinstance(trial_fraction, float) else Fraction(trial_fraction)
    if not 0 <= frac <= 1:
        raise ValueError("trial fraction must lie in [0, 1]")
    return int((n * frac + Fraction(1, 2)) // 1)


def generate_batch(
    requests: Sequence[tuple[Template, int]],
    db: ObjectDatabase,
    workspace: Workspace,
    cfg: GenerationConfig,
    trial_fraction: Fraction | float | None = None,
) -> list[GeneratedTask]:
    """Generate ``count`` tasks per template.

    Task ``k`` of template ``t`` is seeded with ``derive_seed(seed, t, k)``
    and named ``{template_id}-{k:04d}``. With ``trial_fraction`` the batch is
    split into trial and contest tasks by a seeded permutation; otherwise every
    task carries ``cfg.set_tag``.
    """
    out: list[GeneratedTask] = []
    for t, (template, count) in enumerate(requests):
        if count < 0:
            raise ValueError("counts must be non-negative")
        for k in range(count):
            seed = derive_seed(cfg.seed, t, k)
            task, used = _generate(
                template.initial,
                template.target,
                db,
                workspace,
                cfg,
                make_rng(seed),
                f"{template.template_id}-{k:04d}",
                template_index=t,
            )
            out.append(GeneratedTask(task, template.template_id, seed, used))
    if trial_fraction is not None and out:
        n_trial = trial_count(len(out), trial_fraction)
        perm = make_rng(derive_seed(cfg.seed, _MASK64)).permutation(len(out))
        trial = set(int(i) for i in perm[:n_trial])
        out = [
            GeneratedTask(
                _retag(g.task, SetTag.TRIAL if i in trial else SetTag.CONTEST), g.template_id, g.seed, g.rejections_used
            )
            for i, g in enumerate(out)
        ]
    return out


def _retag(task: Task, tag: SetTag) -> Task:
    return Task(task.task_id, task.objects, task.initial, task.target, tag)
