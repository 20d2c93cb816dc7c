"""Domain records: object models, scene configurations and tasks."""

from __future__ import annotations

import enum
from collections.abc import Iterable, Iterator, Mapping
from dataclasses import dataclass, field

from .geometry import BoundingBox, Pose


class SetTag(str, enum.Enum):
    TRIAL = "trial"
    CONTEST = "contest"


@dataclass(frozen=True)
class ObjectModel:
    model_id: str
    category: str
    bbox: BoundingBox
    set_tag: SetTag = SetTag.TRIAL
    mesh_ref: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "set_tag", SetTag(self.set_tag))

    def instance(self, instance_id: str) -> ObjectInstance:
        return ObjectInstance(instance_id, self.model_id, self.category, self.bbox)


@dataclass(frozen=True)
class ObjectInstance:
    """One physical object in a task, carrying the model data scoring needs."""

    instance_id: str
    model_id: str
    category: str
    bbox: BoundingBox


class ObjectDatabase:
    def __init__(self, models: Iterable[ObjectModel]):
        self.models: tuple[ObjectModel, ...] = tuple(models)
        self._by_id: dict[str, ObjectModel] = {}
        for m in self.models:
            if m.model_id in self._by_id:
                raise ValueError(f"duplicate model_id {m.model_id!r}")
            self._by_id[m.model_id] = m

    def __getitem__(self, model_id: str) -> ObjectModel:
        return self._by_id[model_id]

    def __contains__(self, model_id) -> bool:
        return model_id in self._by_id

    def __len__(self):
        return len(self.models)

    def __iter__(self):
        return iter(self.models)

    def __eq__(self, other):
        return isinstance(other, ObjectDatabase) and self.models == other.models

    def candidates(self, selector: Iterable[str]) -> list[ObjectModel]:
        """Models whose category or model_id appears in ``selector``, sorted by id."""
        keys = set(selector)
        return sorted(
            (m for m in self.models if m.category in keys or m.model_id in keys),
            key=lambda m: m.model_id,
        )

    def subset(self, tag: SetTag) -> ObjectDatabase:
        return ObjectDatabase(m for m in self.models if m.set_tag == SetTag(tag))


class SceneConfiguration(Mapping):
    """Immutable mapping ``instance_id -> Pose``. Keeps insertion order."""

    __slots__ = ("_poses",)

    def __init__(self, poses: Mapping[str, Pose] | Iterable[tuple[str, Pose]] = ()):
        items = poses.items() if isinstance(poses, Mapping) else poses
        d: dict[str, Pose] = {}
        for iid, pose in items:
            if iid in d:
                raise ValueError(f"instance {iid!r} listed twice")
            if not isinstance(pose, Pose):
                raise TypeError(f"pose for {iid!r} is {type(pose).__name__}, not Pose")
            d[iid] = pose
        self._poses = d

    def __getitem__(self, iid: str) -> Pose:
        return self._poses[iid]

    def __iter__(self) -> Iterator[str]:
        return iter(self._poses)

    def __len__(self):
        return len(self._poses)

    def __eq__(self, other):
        if not isinstance(other, SceneConfiguration):
            return NotImplemented
        return list(self._poses) == list(other._poses) and all(
            self._poses[k] == other._poses[k] for k in self._poses
        )

    __hash__ = None

    def replace(self, iid: str, pose: Pose) -> SceneConfiguration:
        d = dict(self._poses)
        d[iid] = pose
        return SceneConfiguration(d)

    def __repr__(self):
        return f"SceneConfiguration({self._poses!r})"


@dataclass(frozen=True)
class Task:
    task_id: str
    objects: tuple[ObjectInstance, ...]
    initial: SceneConfiguration
    target: SceneConfiguration
    set_tag: SetTag = SetTag.TRIAL
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "objects", tuple(self.objects))
        object.__setattr__(self, "set_tag", SetTag(self.set_tag))
        if not self.objects:
            raise ValueError("a task needs at least one object")
        index = {}
        for obj in self.objects:
            if obj.instance_id in index:
                raise ValueError(f"duplicate instance_id {obj.instance_id!r}")
            index[obj.instance_id] = obj
        ids = set(index)
        for name in ("initial", "target"):
            got = set(getattr(self, name))
            if got != ids:
                raise ValueError(
                    f"{name} configuration covers {sorted(got)} but task objects are {sorted(ids)}"
                )
        object.__setattr__(self, "_index", index)

    def __getitem__(self, instance_id: str) -> ObjectInstance:
        return self._index[instance_id]

    @property
    def instance_ids(self) -> list[str]:
        return [o.instance_id for o in self.objects]

    def __len__(self):
        return len(self.objects)
