"""Geometric scene validity: interpenetration, support and containment.

This stands in for a physics-engine settle test. A scene is valid when no two
object boxes interpenetrate deeper than ``clearance_tol`` (15-axis separating
axis test), every object rests within ``support_tol`` on the table or on
another object that covers at least ``footprint_overlap`` of its footprint, and
every box lies inside the workspace.
"""

from __future__ import annotations

from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field

import numpy as np
from shapely.geometry import MultiPoint

from .. import kernels
from ..geometry import Pose, box_center, box_corners
from ..model import SceneConfiguration
from .graph import GenerationConfig, Relation, Workspace

TABLE = "<table>"


@dataclass(frozen=True)
class Violation:
    kind: str  # interpenetration | unsupported | out_of_bounds | relation
    instances: tuple[str, ...]
    detail: str = ""


@dataclass(frozen=True)
class ValidationResult:
    violations: tuple[Violation, ...] = ()

    @property
    def valid(self) -> bool:
        return not self.violations

    def __bool__(self):
        return self.valid

    def kinds(self) -> set[str]:
        return {v.kind for v in self.violations}

    def involving(self, instance_id: str) -> ValidationResult:
        return ValidationResult(tuple(v for v in self.violations if instance_id in v.instances))


@dataclass(frozen=True)
class SceneRelation:
    parent: str
    child: str
    relation: Relation


@dataclass
class SceneGeometry:
    """Per-object box data for one configuration, in a fixed instance order."""

    ids: list[str]
    centers: np.ndarray
    rots: np.ndarray
    halves: np.ndarray
    corners: np.ndarray  # (n, 8, 3)
    _footprints: dict = field(default_factory=dict)

    @classmethod
    def build(cls, config: Mapping[str, Pose], models: Mapping) -> SceneGeometry:
        ids = list(config)
        n = len(ids)
        centers = np.empty((n, 3))
        rots = np.empty((n, 3, 3))
        halves = np.empty((n, 3))
        corners = np.empty((n, 8, 3))
        for k, iid in enumerate(ids):
            bbox = models[iid].bbox
            pose = config[iid]
            centers[k] = box_center(bbox, pose)
            rots[k] = pose.rotation
            halves[k] = bbox.half_extents
            corners[k] = box_corners(bbox, pose)
        return cls(ids, centers, rots, halves, corners)

    def index(self, iid: str) -> int:
        return self.ids.index(iid)

    def bottom(self, k: int) -> float:
        return float(self.corners[k, :, 2].min())

    def top(self, k: int) -> float:
        return float(self.corners[k, :, 2].max())

    def footprint(self, k: int):
        if k not in self._footprints:
            self._footprints[k] = MultiPoint([tuple(p) for p in self.corners[k, :, :2]]).convex_hull
        return self._footprints[k]

    def sat(self) -> np.ndarray:
        """Pairwise SAT overlap: positive = penetration depth, negative = gap."""
        return kernels.sat_matrix(
            np.ascontiguousarray(self.centers), np.ascontiguousarray(self.rots), np.ascontiguousarray(self.halves)
        )


def supporters(geo: SceneGeometry, k: int, workspace: Workspace, cfg: GenerationConfig) -> list[str]:
    """Everything object ``k`` rests on: the table and/or other instances."""
    out = []
    bottom = geo.bottom(k)
    if abs(bottom - workspace.surface_z) <= cfg.support_tol:
        out.append(TABLE)
    fp = geo.footprint(k)
    area = fp.area
    for j in range(len(geo.ids)):
        if j == k or abs(bottom - geo.top(j)) > cfg.support_tol:
            continue
        shared = fp.intersection(geo.footprint(j)).area
        if area > 0 and shared >= cfg.footprint_overlap * area:
            out.append(geo.ids[j])
    return out


def resting_on(geo: SceneGeometry, iid: str, workspace: Workspace, cfg: GenerationConfig) -> list[str]:
    """Instances that are supported by ``iid`` (i.e. stacked directly on it)."""
    return [other for j, other in enumerate(geo.ids) if other != iid and iid in supporters(geo, j, workspace, cfg)]


def bounds_excess(corners: np.ndarray, workspace: Workspace, z_slack: float = 0.0) -> float:
    """Largest distance (cm) by which any corner leaves the workspace box; 0 if inside."""
    lo = workspace.lower - np.array([0.0, 0.0, z_slack])
    hi = workspace.upper
    below = lo - corners
    above = corners - hi
    return float(max(0.0, below.max(), above.max()))


def validate_scene(
    config: SceneConfiguration | Mapping[str, Pose],
    models: Mapping,
    workspace: Workspace,
    cfg: GenerationConfig,
    relations: Iterable[SceneRelation] = (),
    only: Iterable[str] | None = None,
) -> ValidationResult:
    """Check a configuration and list every violated condition.

    ``models`` maps instance id to anything with a ``bbox``. ``only`` limits
    the checks to the listed instances (pairs still consider every object).
    """
    geo = SceneGeometry.build(config, models)
    focus = set(geo.ids if only is None else only)
    out: list[Violation] = []

    sat = geo.sat()
    n = len(geo.ids)
    for a in range(n):
        for b in range(a + 1, n):
            if geo.ids[a] not in focus and geo.ids[b] not in focus:
                continue
            if sat[a, b] > cfg.clearance_tol:
                out.append(
                    Violation("interpenetration", (geo.ids[a], geo.ids[b]), f"depth {sat[a, b]:.4g} cm")
                )

    for k, iid in enumerate(geo.ids):
        if iid not in focus:
            continue
        if not supporters(geo, k, workspace, cfg):
            out.append(Violation("unsupported", (iid,), f"bottom at z={geo.bottom(k):.4g} cm"))
        excess = bounds_excess(geo.corners[k], workspace, cfg.support_tol)
        if excess > 0:
            out.append(Violation("out_of_bounds", (iid,), f"{excess:.4g} cm outside the workspace"))

    for rel in relations:
        if rel.child not in focus and rel.parent not in focus:
            continue
        kc, kp = geo.index(rel.child), geo.index(rel.parent)
        if rel.relation is Relation.ON_TOP_OF:
            if rel.parent not in supporters(geo, kc, workspace, cfg):
                out.append(Violation("relation", (rel.child, rel.parent), "child does not rest on its parent"))
        elif rel.relation is Relation.ADJACENT_TO:
            gap = -sat[kc, kp]
            if gap > cfg.adjacency_max_distance:
                out.append(
                    Violation("relation", (rel.child, rel.parent), f"adjacent objects {gap:.4g} cm apart")
                )
    return ValidationResult(tuple(out))


def sampled_overlap_count(
    bbox_a, pose_a: Pose, bbox_b, pose_b: Pose, n_samples: int, rng: np.random.Generator, shrink: float = 0.0
) -> int:
    """Monte-Carlo overlap oracle for two boxes.

    Draws ``n_samples`` uniform points inside box ``a`` and counts those
    strictly inside box ``b``. Both boxes have every half extent reduced by
    ``shrink`` first, so a pair whose penetration depth is at most
    ``2 * shrink`` can never produce a hit.
    """
    ha = np.maximum(bbox_a.half_extents - shrink, 0.0)
    hb = np.maximum(bbox_b.half_extents - shrink, 0.0)
    if not (np.all(ha > 0) and np.all(hb > 0)):
        return 0
    unit = rng.uniform(-1.0, 1.0, size=(n_samples, 3))
    return int(
        kernels.count_overlap_samples(
            unit,
            box_center(bbox_a, pose_a),
            np.ascontiguousarray(pose_a.rotation),
            ha,
            box_center(bbox_b, pose_b),
            np.ascontiguousarray(pose_b.rotation),
            hb,
        )
    )
