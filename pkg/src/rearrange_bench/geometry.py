"""Rigid-body primitives in the table frame. Lengths are centimetres.

Object models put their origin at the centre of the bounding-box bottom face,
so a model box spans ``[-L/2, L/2] x [-W/2, W/2] x [0, H]`` in model
coordinates and an identity pose stands the object on the plane ``z = 0``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.transform import Rotation as _SciRotation

from .errors import ImproperRotation, InvalidQuaternion, NonFinite, NotOrthonormal
from .kernels import SIGNS

ROTATION_TOL = 1e-6
QUATERNION_TOL = 1e-6


def _frozen(a):
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


def as_vec3(p) -> np.ndarray:
    v = np.asarray(p, dtype=np.float64)
    if v.shape != (3,):
        raise ValueError(f"expected 3 components, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise NonFinite(f"non-finite vector {v.tolist()}")
    return v


def validate_rotation(m) -> np.ndarray:
    """Return ``m`` as a read-only rotation matrix or raise.

    Raises NonFinite, NotOrthonormal (``max|R^T R - I| > 1e-6``) or
    ImproperRotation (orthonormal but ``det`` away from +1).
    """
    r = np.asarray(m, dtype=np.float64)
    if r.shape != (3, 3):
        raise NotOrthonormal(f"rotation must be 3x3, got shape {r.shape}")
    if not np.all(np.isfinite(r)):
        raise NonFinite("rotation has non-finite entries")
    dev = np.abs(r.T @ r - np.eye(3)).max()
    if dev > ROTATION_TOL:
        raise NotOrthonormal(f"max |R^T R - I| = {dev:.3g} exceeds {ROTATION_TOL}")
    det = np.linalg.det(r)
    if abs(det - 1.0) > ROTATION_TOL:
        raise ImproperRotation(f"det(R) = {det:.6g}, expected +1")
    return _frozen(r)


def quat_to_matrix(q_xyzw) -> np.ndarray:
    q = np.asarray(q_xyzw, dtype=np.float64)
    if q.shape != (4,):
        raise InvalidQuaternion(f"quaternion needs 4 components, got shape {q.shape}")
    if not np.all(np.isfinite(q)):
        raise NonFinite("quaternion has non-finite entries")
    norm = np.linalg.norm(q)
    if abs(norm - 1.0) > QUATERNION_TOL:
        raise InvalidQuaternion(f"quaternion norm {norm:.9g} is not within {QUATERNION_TOL} of 1")
    return _SciRotation.from_quat(q / norm).as_matrix()


def matrix_to_quat(r) -> np.ndarray:
    q = _SciRotation.from_matrix(np.asarray(r, dtype=np.float64)).as_quat()
    # w >= 0 keeps files canonical
    return -q if q[3] < 0 else q


def rot_z(deg: float) -> np.ndarray:
    t = np.deg2rad(deg)
    c, s = np.cos(t), np.sin(t)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


@dataclass(frozen=True, eq=False)
class Pose:
    """Rotation plus translation; maps model points to ``R @ p + T``."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "rotation", validate_rotation(self.rotation))
        object.__setattr__(self, "translation", _frozen(as_vec3(self.translation)))

    @classmethod
    def identity(cls) -> Pose:
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_translation(cls, x, y, z) -> Pose:
        return cls(np.eye(3), [x, y, z])

    @classmethod
    def from_yaw(cls, yaw_deg, translation=(0.0, 0.0, 0.0)) -> Pose:
        return cls(rot_z(yaw_deg), translation)

    @classmethod
    def from_xyzw(cls, position, orientation_xyzw) -> Pose:
        return cls(quat_to_matrix(orientation_xyzw), position)

    def to_xyzw(self) -> tuple[np.ndarray, np.ndarray]:
        return self.translation.copy(), matrix_to_quat(self.rotation)

    def compose(self, other: Pose) -> Pose:
        """``self o other``: apply ``other`` first, then ``self``."""
        return Pose(self.rotation @ other.rotation, self.rotation @ other.translation + self.translation)

    __matmul__ = compose

    def inverse(self) -> Pose:
        rt = self.rotation.T
        return Pose(rt, -(rt @ self.translation))

    def apply(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=np.float64)
        return pts @ self.rotation.T + self.translation

    def with_translation(self, translation) -> Pose:
        return Pose(self.rotation, translation)

    def __eq__(self, other):
        if not isinstance(other, Pose):
            return NotImplemented
        return np.array_equal(self.rotation, other.rotation) and np.array_equal(
            self.translation, other.translation
        )

    def __hash__(self):
        return hash((self.rotation.tobytes(), self.translation.tobytes()))

    def allclose(self, other: Pose, atol=1e-12) -> bool:
        return bool(
            np.allclose(self.rotation, other.rotation, rtol=0, atol=atol)
            and np.allclose(self.translation, other.translation, rtol=0, atol=atol)
        )

    def __repr__(self):
        q = matrix_to_quat(self.rotation)
        return f"Pose(t={self.translation.tolist()}, q_xyzw={q.round(6).tolist()})"


def apply_pose(pose: Pose, p) -> np.ndarray:
    return pose.rotation @ as_vec3(p) + pose.translation


@dataclass(frozen=True)
class BoundingBox:
    l: float
    w: float
    h: float

    def __post_init__(self):
        for name in ("l", "w", "h"):
            v = float(getattr(self, name))
            if not np.isfinite(v) or v <= 0:
                raise ValueError(f"bounding box {name} must be positive and finite, got {v}")
            object.__setattr__(self, name, v)

    @property
    def cube_edge(self) -> float:
        return (self.l + self.w + self.h) / 3.0

    @property
    def half_extents(self) -> np.ndarray:
        return np.array([self.l / 2.0, self.w / 2.0, self.h / 2.0])

    @property
    def center_offset(self) -> np.ndarray:
        """Box centre in model coordinates."""
        return np.array([0.0, 0.0, self.h / 2.0])


def cube_vertices(bbox: BoundingBox) -> np.ndarray:
    """Eight vertices of the metric cube, shape (8, 3).

    The cube is axis-aligned in the model frame, centred on the model origin,
    with edge ``(L + W + H) / 3``. Rows follow sign triples in lexicographic
    order, ``-`` before ``+``: (-,-,-), (-,-,+), (-,+,-), ..., (+,+,+).
    """
    return SIGNS * (bbox.cube_edge / 2.0)


def box_center(bbox: BoundingBox, pose: Pose) -> np.ndarray:
    return pose.rotation @ bbox.center_offset + pose.translation


def box_corners(bbox: BoundingBox, pose: Pose) -> np.ndarray:
    """World coordinates of the 8 bounding-box corners."""
    local = SIGNS * bbox.half_extents + bbox.center_offset
    return pose.apply(local)
