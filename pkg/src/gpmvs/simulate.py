"""Synthetic camera trajectories and textured planar scenes with exact depth."""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .planesweep import Intrinsics
from .poses import Pose, axis_angle, orthonormalize


class TrajectoryKind(str, enum.Enum):
    COLLINEAR = "collinear"
    ARC = "arc"
    RANDOM = "random"


def collinear_trajectory(
    n: int,
    spacing: Union[None, float, Sequence[float]] = None,
    seed: int = 0,
    axis: Sequence[float] = (1.0, 0.0, 0.0),
    R: Optional[np.ndarray] = None,
) -> list[Pose]:
    """Pure translation along ``axis`` with a fixed orientation.

    ``spacing`` may be a scalar, a sequence of ``n - 1`` gaps, or None for
    gaps drawn uniformly from [0.05, 0.3] m. Pose-distances along such a
    track are additive.
    """
    if n < 1:
        raise ValueError("need at least one frame")
    if spacing is None:
        gaps = np.random.default_rng(seed).uniform(0.05, 0.3, size=n - 1)
    else:
        gaps = np.broadcast_to(np.asarray(spacing, dtype=np.float64), (n - 1,))
    offsets = np.concatenate([[0.0], np.cumsum(gaps)])
    u = np.asarray(axis, dtype=np.float64)
    u = u / np.linalg.norm(u)
    R = np.eye(3) if R is None else R
    return [Pose(R, s * u) for s in offsets]


def look_at(center: np.ndarray, target: np.ndarray, up=(0.0, -1.0, 0.0)) -> np.ndarray:
    """World-from-camera rotation whose optical (z) axis points at ``target``.

    Camera y points down in the image, so ``up`` is the world direction that
    should appear upward.
    """
    z = np.asarray(target, dtype=np.float64) - np.asarray(center, dtype=np.float64)
    z /= np.linalg.norm(z)
    y = -np.asarray(up, dtype=np.float64)
    y = y - np.dot(y, z) * z
    y /= np.linalg.norm(y)
    x = np.cross(y, z)
    return np.column_stack([x, y, z])


def arc_trajectory(
    n: int,
    radius: float = 1.0,
    target: Sequence[float] = (0.0, 0.0, 3.0),
    span_deg: float = 60.0,
) -> list[Pose]:
    """Cameras on a horizontal circular arc around ``target``, all looking at it."""
    if n < 1:
        raise ValueError("need at least one frame")
    target = np.asarray(target, dtype=np.float64)
    thetas = np.deg2rad(np.linspace(-span_deg / 2, span_deg / 2, n)) if n > 1 else np.zeros(1)
    poses = []
    for th in thetas:
        c = target + radius * np.array([np.sin(th), 0.0, -np.cos(th)])
        poses.append(Pose(look_at(c, target), c))
    return poses


def random_trajectory(
    n: int,
    seed: int = 0,
    step_std: float = 0.05,
    angle_std_deg: float = 3.0,
    bounds: Sequence[float] = (0.5, 0.5, 0.2),
) -> list[Pose]:
    """Random walk on poses with translations reflected into a box."""
    if n < 1:
        raise ValueError("need at least one frame")
    rng = np.random.default_rng(seed)
    b = np.asarray(bounds, dtype=np.float64)
    t = np.zeros(3)
    R = np.eye(3)
    poses = [Pose(R, t)]
    for _ in range(n - 1):
        t = t + rng.normal(0.0, step_std, 3)
        # reflect back into [-b, b]
        t = np.where(t > b, 2 * b - t, t)
        t = np.where(t < -b, -2 * b - t, t)
        t = np.clip(t, -b, b)
        dR = axis_angle(rng.normal(size=3), np.deg2rad(rng.normal(0.0, angle_std_deg)))
        R = orthonormalize(R @ dR)
        poses.append(Pose(R, t))
    return poses


def simulate_trajectory(n: int, kind: Union[str, TrajectoryKind] = "collinear", seed: int = 0, **kw) -> list[Pose]:
    kind = TrajectoryKind(kind)
    if kind is TrajectoryKind.COLLINEAR:
        return collinear_trajectory(n, seed=seed, **kw)
    if kind is TrajectoryKind.ARC:
        return arc_trajectory(n, **kw)
    return random_trajectory(n, seed=seed, **kw)


@dataclass(frozen=True)
class PlaneTexture:
    """Smooth random RGB texture on the world plane ``Z = depth``.

    Each channel is a sum of plane waves with wavelengths in meters.
    """

    freqs: np.ndarray  # (C, K, 2) cycles per meter
    phases: np.ndarray  # (C, K)
    amps: np.ndarray  # (C, K)

    @classmethod
    def random(cls, seed: int, wavelength=(0.05, 0.2), n_waves: int = 6, channels: int = 3):
        rng = np.random.default_rng(seed)
        lam = rng.uniform(*wavelength, size=(channels, n_waves))
        ang = rng.uniform(0.0, np.pi, size=(channels, n_waves))
        freqs = np.stack([np.cos(ang), np.sin(ang)], axis=-1) / lam[..., None]
        phases = rng.uniform(0.0, 2 * np.pi, size=(channels, n_waves))
        amps = rng.uniform(0.5, 1.0, size=(channels, n_waves))
        amps *= 0.4 / amps.sum(axis=1, keepdims=True)
        return cls(freqs, phases, amps)

    def __call__(self, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
        arg = (
            self.freqs[:, :, 0, None, None] * X[None, None]
            + self.freqs[:, :, 1, None, None] * Y[None, None]
        )
        waves = np.sin(2 * np.pi * arg + self.phases[..., None, None])
        return 0.5 + np.sum(self.amps[..., None, None] * waves, axis=1)


def render_plane(pose: Pose, K: Intrinsics, plane_z: float, texture: PlaneTexture):
    """Render the textured plane ``Z = plane_z`` from ``pose``.

    Returns:
        image: (C, H, W) in [0, 1]; zero where the plane is not visible.
        depth: (H, W) camera-frame depth in meters; 0 where not visible.
    """
    ys, xs = np.mgrid[0 : K.height, 0 : K.width].astype(np.float64)
    rays = np.stack([(xs - K.cx) / K.fx, (ys - K.cy) / K.fy, np.ones_like(xs)], axis=-1)
    dirs = rays @ pose.R.T
    with np.errstate(divide="ignore", invalid="ignore"):
        s = (plane_z - pose.t[2]) / dirs[..., 2]
    visible = np.isfinite(s) & (s > 0)
    s = np.where(visible, s, 0.0)
    X = pose.t[0] + s * dirs[..., 0]
    Y = pose.t[1] + s * dirs[..., 1]
    image = np.where(visible[None], np.clip(texture(X, Y), 0.0, 1.0), 0.0)
    return image, s


@dataclass
class SyntheticScene:
    poses: list
    images: np.ndarray  # (N, C, H, W)
    depths: np.ndarray  # (N, H, W)
    K: Intrinsics
    plane_z: float


def simulate_scene(
    n: int,
    kind: Union[str, TrajectoryKind] = "collinear",
    seed: int = 0,
    K: Optional[Intrinsics] = None,
    plane_z: float = 3.0,
    **traj_kw,
) -> SyntheticScene:
    """A trajectory plus rendered views of a fronto-parallel textured plane.

    Texture wavelengths scale with the plane distance so that they span
    roughly 6 to 24 pixels in the images.
    """
    K = K or Intrinsics(fx=300.0, fy=300.0, cx=159.5, cy=127.5, width=320, height=256)
    kind = TrajectoryKind(kind)
    if kind is TrajectoryKind.ARC:
        traj_kw.setdefault("target", (0.0, 0.0, plane_z))
    poses = simulate_trajectory(n, kind, seed=seed, **traj_kw)
    px = plane_z / K.fx
    texture = PlaneTexture.random(seed + 1, wavelength=(6 * px, 24 * px))
    rendered = [render_plane(p, K, plane_z, texture) for p in poses]
    images = np.stack([r[0] for r in rendered])
    depths = np.stack([r[1] for r in rendered])
    return SyntheticScene(poses, images, depths, K, plane_z)
