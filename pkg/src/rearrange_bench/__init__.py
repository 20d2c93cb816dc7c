"""Tabletop rearrangement benchmark: task generation, kinematic execution,
pose-error scoring and a contest leaderboard."""

from .geometry import BoundingBox, Pose, apply_pose, cube_vertices, validate_rotation
from .model import ObjectDatabase, ObjectInstance, ObjectModel, SceneConfiguration, SetTag, Task

__version__ = "0.1.0"

__all__ = [
    "BoundingBox",
    "ObjectDatabase",
    "ObjectInstance",
    "ObjectModel",
    "Pose",
    "SceneConfiguration",
    "SetTag",
    "Task",
    "apply_pose",
    "cube_vertices",
    "validate_rotation",
]
