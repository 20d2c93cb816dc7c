"""Scene-graph templates, workspace bounds and generation settings."""

from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from ..errors import FormatError
from ..geometry import Pose
from ..io import pose_from_doc, pose_to_doc
from ..model import SetTag


class Relation(str, enum.Enum):
    ON_TOP_OF = "on_top_of"
    ADJACENT_TO = "adjacent_to"


@dataclass(frozen=True)
class Jitter:
    """Uniform perturbation: each translation axis in ``[-r, r]``, yaw in ``[-y, y]`` degrees."""

    pos_range: tuple[float, float, float] = (0.0, 0.0, 0.0)
    yaw_range_deg: float = 0.0

    def __post_init__(self):
        pr = tuple(float(v) for v in self.pos_range)
        if len(pr) != 3 or any(v < 0 or not np.isfinite(v) for v in pr):
            raise ValueError(f"pos_range must be three non-negative numbers, got {self.pos_range}")
        if self.yaw_range_deg < 0:
            raise ValueError("yaw_range_deg must be non-negative")
        object.__setattr__(self, "pos_range", pr)
        object.__setattr__(self, "yaw_range_deg", float(self.yaw_range_deg))

    def to_doc(self) -> dict:
        return {"pos_range": list(self.pos_range), "yaw_range_deg": self.yaw_range_deg}

    @classmethod
    def from_doc(cls, doc: dict | None) -> Jitter:
        if not doc:
            return cls()
        return cls(tuple(doc.get("pos_range", (0.0, 0.0, 0.0))), doc.get("yaw_range_deg", 0.0))


NO_JITTER = Jitter()


@dataclass(frozen=True)
class SlotNode:
    slot_id: str
    select: tuple[str, ...]  # categories and/or explicit model ids
    anchor_pose: Pose = field(default_factory=Pose.identity)
    jitter: Jitter = NO_JITTER  # used only when the slot is a root


@dataclass(frozen=True)
class RelationEdge:
    parent: str
    child: str
    relation: Relation
    offset: Pose = field(default_factory=Pose.identity)
    jitter: Jitter = NO_JITTER

    def __post_init__(self):
        object.__setattr__(self, "relation", Relation(self.relation))


class SceneGraph:
    """Slots plus parent/child relations; the relations must form a forest."""

    def __init__(self, nodes, edges=()):
        self.nodes: tuple[SlotNode, ...] = tuple(nodes)
        self.edges: tuple[RelationEdge, ...] = tuple(edges)
        self._node = {}
        for n in self.nodes:
            if n.slot_id in self._node:
                raise ValueError(f"duplicate slot {n.slot_id!r}")
            self._node[n.slot_id] = n
        self._parent_edge: dict[str, RelationEdge] = {}
        for e in self.edges:
            for s in (e.parent, e.child):
                if s not in self._node:
                    raise ValueError(f"edge refers to unknown slot {s!r}")
            if e.child in self._parent_edge:
                raise ValueError(f"slot {e.child!r} has more than one parent")
            if e.parent == e.child:
                raise ValueError(f"slot {e.child!r} cannot be its own parent")
            self._parent_edge[e.child] = e
        self._order = self._topological_order()

    def _topological_order(self) -> list[str]:
        children: dict[str, list[str]] = {n.slot_id: [] for n in self.nodes}
        for e in self.edges:
            children[e.parent].append(e.child)
        queue = deque(n.slot_id for n in self.nodes if n.slot_id not in self._parent_edge)
        order = []
        while queue:
            s = queue.popleft()
            order.append(s)
            queue.extend(children[s])
        if len(order) != len(self.nodes):
            raise ValueError("scene graph relations contain a cycle")
        return order

    @property
    def slot_ids(self) -> list[str]:
        return [n.slot_id for n in self.nodes]

    def node(self, slot_id: str) -> SlotNode:
        return self._node[slot_id]

    def parent_edge(self, slot_id: str) -> RelationEdge | None:
        return self._parent_edge.get(slot_id)

    def topological_order(self) -> list[str]:
        """Roots in declaration order, then children breadth-first."""
        return list(self._order)

    def to_doc(self) -> dict:
        return {
            "slots": [
                {
                    "slot_id": n.slot_id,
                    "select": list(n.select),
                    "anchor": pose_to_doc(n.anchor_pose),
                    "jitter": n.jitter.to_doc(),
                }
                for n in self.nodes
            ],
            "edges": [
                {
                    "parent": e.parent,
                    "child": e.child,
                    "relation": e.relation.value,
                    "offset": pose_to_doc(e.offset),
                    "jitter": e.jitter.to_doc(),
                }
                for e in self.edges
            ],
        }

    @classmethod
    def from_doc(cls, doc: dict) -> SceneGraph:
        try:
            nodes = [
                SlotNode(
                    slot_id=s["slot_id"],
                    select=tuple(s["select"]),
                    anchor_pose=pose_from_doc(s["anchor"]) if "anchor" in s else Pose.identity(),
                    jitter=Jitter.from_doc(s.get("jitter")),
                )
                for s in doc["slots"]
            ]
            edges = [
                RelationEdge(
                    parent=e["parent"],
                    child=e["child"],
                    relation=Relation(e["relation"]),
                    offset=pose_from_doc(e["offset"]) if "offset" in e else Pose.identity(),
                    jitter=Jitter.from_doc(e.get("jitter")),
                )
                for e in doc.get("edges", ())
            ]
            return cls(nodes, edges)
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, FormatError):
                raise
            raise FormatError(f"scene graph: {exc!r}") from exc


@dataclass(frozen=True)
class Template:
    """A pair of scene graphs over one slot set: initial and target scene."""

    template_id: str
    initial: SceneGraph
    target: SceneGraph

    def __post_init__(self):
        if sorted(self.initial.slot_ids) != sorted(self.target.slot_ids):
            raise ValueError(f"template {self.template_id!r}: initial and target graphs use different slots")

    @classmethod
    def from_doc(cls, doc: dict, default_id: str = "template") -> Template:
        tid = doc.get("template_id", default_id)
        if "initial" in doc:
            return cls(tid, SceneGraph.from_doc(doc["initial"]), SceneGraph.from_doc(doc["target"]))
        g = SceneGraph.from_doc(doc)
        return cls(tid, g, g)

    def to_doc(self) -> dict:
        return {"template_id": self.template_id, "initial": self.initial.to_doc(), "target": self.target.to_doc()}


@dataclass(frozen=True)
class Workspace:
    """Axis-aligned usable volume above the table; the surface is ``z = surface_z``."""

    x_min: float = -60.0
    x_max: float = 60.0
    y_min: float = -45.0
    y_max: float = 45.0
    surface_z: float = 0.0
    height: float = 60.0

    def __post_init__(self):
        if not (self.x_max > self.x_min and self.y_max > self.y_min and self.height > 0):
            raise ValueError("workspace extents must be positive")

    @property
    def lower(self) -> np.ndarray:
        return np.array([self.x_min, self.y_min, self.surface_z])

    @property
    def upper(self) -> np.ndarray:
        return np.array([self.x_max, self.y_max, self.surface_z + self.height])

    def to_doc(self) -> dict[str, Any]:
        return dict(self.__dict__)

    @classmethod
    def from_doc(cls, doc: dict) -> Workspace:
        return cls(**{k: float(v) for k, v in doc.items()})


@dataclass(frozen=True)
class GenerationConfig:
    seed: int = 0
    max_rejections: int = 200
    clearance_tol: float = 0.1
    support_tol: float = 0.5
    set_tag: SetTag = SetTag.TRIAL
    footprint_overlap: float = 0.25
    adjacency_gap: tuple[float, float] = (0.0, 2.0)
    adjacency_max_distance: float = 5.0

    def __post_init__(self):
        if self.max_rejections < 1:
            raise ValueError("max_rejections must be at least 1")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must fit in 64 unsigned bits")
        object.__setattr__(self, "seed", int(self.seed))
        object.__setattr__(self, "set_tag", SetTag(self.set_tag))
        object.__setattr__(self, "adjacency_gap", tuple(float(g) for g in self.adjacency_gap))
