"""Rigid camera poses and the pose-distance metric.

Poses are world-from-camera: a point ``x_cam`` in camera coordinates maps to
``R @ x_cam + t`` in the world, so ``t`` is the camera center.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import NotARotation

ROTATION_TOL = 1e-9


def validate_rotation(R: np.ndarray, tol: float = ROTATION_TOL) -> None:
    """Raise :class:`NotARotation` unless ``R`` is a proper rotation.

    Checks ``||R^T R - I||_F <= tol`` and ``|det R - 1| <= tol``.
    """
    R = np.asarray(R, dtype=np.float64)
    if R.shape != (3, 3) or not np.all(np.isfinite(R)):
        raise NotARotation(f"expected a finite 3x3 matrix, got shape {R.shape}")
    ortho_err = np.linalg.norm(R.T @ R - np.eye(3))
    if ortho_err > tol:
        raise NotARotation(f"R^T R deviates from identity by {ortho_err:.3e}")
    det = np.linalg.det(R)
    if abs(det - 1.0) > tol:
        raise NotARotation(f"det(R) = {det:.12g}, expected 1")


def orthonormalize(R: np.ndarray) -> np.ndarray:
    """Project a near-rotation onto SO(3) (closest in Frobenius norm)."""
    U, _, Vt = np.linalg.svd(np.asarray(R, dtype=np.float64))
    D = np.diag([1.0, 1.0, np.sign(np.linalg.det(U @ Vt))])
    return U @ D @ Vt


def axis_angle(axis: Sequence[float], angle: float) -> np.ndarray:
    """Rotation matrix for a right-handed rotation of ``angle`` radians about ``axis``."""
    k = np.asarray(axis, dtype=np.float64)
    k = k / np.linalg.norm(k)
    K = np.array([[0.0, -k[2], k[1]], [k[2], 0.0, -k[0]], [-k[1], k[0], 0.0]])
    return np.eye(3) + np.sin(angle) * K + (1.0 - np.cos(angle)) * (K @ K)


def rot_x(angle: float) -> np.ndarray:
    return axis_angle((1.0, 0.0, 0.0), angle)


def rot_y(angle: float) -> np.ndarray:
    return axis_angle((0.0, 1.0, 0.0), angle)


def rot_z(angle: float) -> np.ndarray:
    return axis_angle((0.0, 0.0, 1.0), angle)


def _frozen(a, shape) -> np.ndarray:
    arr = np.array(a, dtype=np.float64).reshape(shape)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Pose:
    """World-from-camera rigid transform; ``t`` is the camera center."""

    R: np.ndarray = field(default_factory=lambda: np.eye(3))
    t: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        object.__setattr__(self, "R", _frozen(self.R, (3, 3)))
        object.__setattr__(self, "t", _frozen(self.t, (3,)))
        validate_rotation(self.R)

    @classmethod
    def identity(cls) -> "Pose":
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_near_rotation(cls, R, t) -> "Pose":
        """Build a pose after explicitly re-orthonormalizing ``R``."""
        return cls(orthonormalize(R), t)

    @property
    def center(self) -> np.ndarray:
        return self.t

    def transform(self, x_cam: np.ndarray) -> np.ndarray:
        """Map camera-frame points (..., 3) to world coordinates."""
        return np.asarray(x_cam) @ self.R.T + self.t

    def inverse_transform(self, x_world: np.ndarray) -> np.ndarray:
        """Map world points (..., 3) to camera coordinates."""
        return (np.asarray(x_world) - self.t) @ self.R

    def to_json(self) -> str:
        return json.dumps({"R": self.R.ravel().tolist(), "t": self.t.tolist()})

    @classmethod
    def from_dict(cls, obj: dict) -> "Pose":
        return cls(np.asarray(obj["R"], dtype=np.float64).reshape(3, 3), obj["t"])

    def __eq__(self, other):
        if not isinstance(other, Pose):
            return NotImplemented
        return np.array_equal(self.R, other.R) and np.array_equal(self.t, other.t)

    def __hash__(self):
        return hash((self.R.tobytes(), self.t.tobytes()))


@dataclass(frozen=True)
class RelativePose:
    """Maps reference-camera coordinates to neighbour-camera coordinates:
    ``x_nbr = R @ x_ref + t``."""

    R: np.ndarray
    t: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "R", _frozen(self.R, (3, 3)))
        object.__setattr__(self, "t", _frozen(self.t, (3,)))
        validate_rotation(self.R)

    def apply(self, x_ref: np.ndarray) -> np.ndarray:
        return np.asarray(x_ref) @ self.R.T + self.t


def _rotation_sq(Ri: np.ndarray, Rj: np.ndarray) -> float:
    # For rotations (2/3) tr(I - Ri^T Rj) == (1/3) ||Ri - Rj||_F^2. The
    # squared-norm form is exactly zero for equal inputs and never negative.
    diff = (Ri - Rj).ravel()
    return float(np.sum(diff * diff)) / 3.0


def pose_distance(Pi: Pose, Pj: Pose) -> float:
    """Distance between two camera poses.

    ``sqrt(||t_i - t_j||^2 + (2/3) tr(I - R_i^T R_j))``. The rotation term
    lies in [0, 8/3].
    """
    dt = Pi.t - Pj.t
    return float(np.sqrt(np.sum(dt * dt) + _rotation_sq(Pi.R, Pj.R)))


def pose_distance_matrix(poses: Sequence[Pose]) -> np.ndarray:
    """Pairwise pose distances, exactly symmetric with a zero diagonal."""
    n = len(poses)
    if n == 0:
        return np.zeros((0, 0))
    Rs = np.stack([p.R.ravel() for p in poses])
    ts = np.stack([p.t for p in poses])
    D = np.zeros((n, n))
    iu, ju = np.triu_indices(n, k=1)
    dR = Rs[iu] - Rs[ju]
    dt = ts[iu] - ts[ju]
    sq = np.sum(dt * dt, axis=1) + np.sum(dR * dR, axis=1) / 3.0
    D[iu, ju] = np.sqrt(sq)
    D[ju, iu] = D[iu, ju]
    return D


def relative_pose(P_ref: Pose, P_nbr: Pose) -> RelativePose:
    """Transform taking reference-camera coordinates into the neighbour camera."""
    R = P_nbr.R.T @ P_ref.R
    t = P_nbr.R.T @ (P_ref.t - P_nbr.t)
    return RelativePose(R, t)


def rotation_angle(Ri: np.ndarray, Rj: np.ndarray) -> float:
    """Geodesic angle (radians, in [0, pi]) between two rotations.

    Equals ``arccos((tr(Ri^T Rj) - 1) / 2)``; the cosine is clamped to
    [-1, 1] and the sine taken from the skew part of ``Ri^T Rj`` so the
    result stays accurate near 0 and pi.
    """
    M = np.asarray(Ri).T @ np.asarray(Rj)
    c = np.clip((np.trace(M) - 1.0) / 2.0, -1.0, 1.0)
    s = 0.5 * np.linalg.norm([M[2, 1] - M[1, 2], M[0, 2] - M[2, 0], M[1, 0] - M[0, 1]])
    return float(np.arctan2(s, c))


def read_poses_jsonl(path) -> list[Pose]:
    poses = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                poses.append(Pose.from_dict(json.loads(line)))
    return poses


def write_poses_jsonl(path, poses: Iterable[Pose]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for p in poses:
            fh.write(p.to_json() + "\n")
