"""JSON file formats for tasks, object databases and scene configurations.

Floats are written with Python's shortest round-trip ``repr``, so a parse of a
written file reproduces every number exactly.
"""

from __future__ import annotations

import json
import os
from pathlib import Path
from typing import Any

import numpy as np

from .errors import BenchError, FormatError
from .geometry import BoundingBox, Pose
from .model import ObjectDatabase, ObjectInstance, ObjectModel, SceneConfiguration, SetTag, Task

SCHEMA_VERSION = "1"


def dumps(doc: Any) -> str:
    return json.dumps(doc, indent=2, ensure_ascii=False, allow_nan=False) + "\n"


def write_json(path, doc: Any) -> None:
    """Write atomically (temp file + rename) so readers never see a partial file."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(dumps(doc))
    os.replace(tmp, path)


def read_json(path) -> Any:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON ({exc})") from exc


def _require(doc: dict, key: str, where: str):
    if not isinstance(doc, dict) or key not in doc:
        raise FormatError(f"{where}: missing field {key!r}")
    return doc[key]


# -- poses / configurations


def pose_to_doc(pose: Pose) -> dict:
    t, q = pose.to_xyzw()
    return {"position": [float(x) for x in t], "orientation_xyzw": [float(x) for x in q]}


def pose_from_doc(doc: dict, where: str = "pose") -> Pose:
    try:
        return Pose.from_xyzw(_require(doc, "position", where), _require(doc, "orientation_xyzw", where))
    except FormatError:
        raise
    except (BenchError, ValueError, TypeError) as exc:
        raise FormatError(f"{where}: {exc}") from exc


def config_to_doc(config: SceneConfiguration) -> dict:
    return {iid: pose_to_doc(pose) for iid, pose in config.items()}


def config_from_doc(doc: dict, where: str = "configuration") -> SceneConfiguration:
    if not isinstance(doc, dict):
        raise FormatError(f"{where}: expected an object mapping instance ids to poses")
    return SceneConfiguration((iid, pose_from_doc(p, f"{where}.{iid}")) for iid, p in doc.items())


# -- object models


def bbox_to_doc(b: BoundingBox) -> dict:
    return {"l": b.l, "w": b.w, "h": b.h}


def bbox_from_doc(doc: dict, where: str = "bbox") -> BoundingBox:
    try:
        return BoundingBox(_require(doc, "l", where), _require(doc, "w", where), _require(doc, "h", where))
    except (TypeError, ValueError) as exc:
        raise FormatError(f"{where}: {exc}") from exc


def model_to_doc(m: ObjectModel) -> dict:
    doc = {"model_id": m.model_id, "category": m.category, "bbox": bbox_to_doc(m.bbox), "set_tag": m.set_tag.value}
    if m.mesh_ref is not None:
        doc["mesh_ref"] = m.mesh_ref
    return doc


def database_to_doc(db: ObjectDatabase) -> dict:
    return {"models": [model_to_doc(m) for m in db]}


def database_from_doc(doc: dict) -> ObjectDatabase:
    models = []
    for i, m in enumerate(_require(doc, "models", "database")):
        where = f"models[{i}]"
        try:
            models.append(
                ObjectModel(
                    model_id=_require(m, "model_id", where),
                    category=_require(m, "category", where),
                    bbox=bbox_from_doc(_require(m, "bbox", where), where + ".bbox"),
                    set_tag=SetTag(m.get("set_tag", "trial")),
                    mesh_ref=m.get("mesh_ref"),
                )
            )
        except ValueError as exc:
            raise FormatError(f"{where}: {exc}") from exc
    try:
        return ObjectDatabase(models)
    except ValueError as exc:
        raise FormatError(str(exc)) from exc


def load_database(path) -> ObjectDatabase:
    return database_from_doc(read_json(path))


# -- tasks


def task_to_doc(task: Task) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "task_id": task.task_id,
        "set_tag": task.set_tag.value,
        "objects": [
            {"instance_id": o.instance_id, "model_id": o.model_id, "bbox": bbox_to_doc(o.bbox), "category": o.category}
            for o in task.objects
        ],
        "initial": config_to_doc(task.initial),
        "target": config_to_doc(task.target),
    }


def task_from_doc(doc: dict) -> Task:
    version = _require(doc, "schema_version", "task")
    if str(version) != SCHEMA_VERSION:
        raise FormatError(f"unsupported task schema_version {version!r}")
    objects = []
    for i, o in enumerate(_require(doc, "objects", "task")):
        where = f"objects[{i}]"
        objects.append(
            ObjectInstance(
                instance_id=_require(o, "instance_id", where),
                model_id=_require(o, "model_id", where),
                category=o.get("category", ""),
                bbox=bbox_from_doc(_require(o, "bbox", where), where + ".bbox"),
            )
        )
    try:
        return Task(
            task_id=_require(doc, "task_id", "task"),
            objects=tuple(objects),
            initial=config_from_doc(_require(doc, "initial", "task"), "initial"),
            target=config_from_doc(_require(doc, "target", "task"), "target"),
            set_tag=SetTag(doc.get("set_tag", "trial")),
        )
    except ValueError as exc:
        if isinstance(exc, FormatError):
            raise
        raise FormatError(f"task: {exc}") from exc


def dumps_task(task: Task) -> str:
    return dumps(task_to_doc(task))


def loads_task(text: str) -> Task:
    try:
        return task_from_doc(json.loads(text))
    except json.JSONDecodeError as exc:
        raise FormatError(f"invalid JSON ({exc})") from exc


def save_task(task: Task, path) -> None:
    write_json(path, task_to_doc(task))


def load_task(path) -> Task:
    return task_from_doc(read_json(path))


def load_configuration(path) -> SceneConfiguration:
    """Read a solution scene: a bare configuration or any document with a ``final`` field."""
    doc = read_json(path)
    if isinstance(doc, dict) and "final" in doc:
        doc = doc["final"]
    return config_from_doc(doc)


def to_builtin(x):
    """Recursively turn numpy scalars/arrays into JSON-ready Python values."""
    if isinstance(x, dict):
        return {k: to_builtin(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [to_builtin(v) for v in x]
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, np.generic):
        return x.item()
    return x
