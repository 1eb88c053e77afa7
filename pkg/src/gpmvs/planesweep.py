"""Plane-sweep cost volumes from fronto-parallel homographies."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DimensionMismatch, InvalidRange
from .poses import RelativePose


@dataclass(frozen=True)
class Intrinsics:
    """Pinhole intrinsics in pixels; pixel centers sit at integer coordinates."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int = 320
    height: int = 256

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError("focal lengths must be positive")
        if self.width < 1 or self.height < 1:
            raise ValueError("image size must be at least 1x1")

    @property
    def K(self) -> np.ndarray:
        return np.array([[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]])

    @property
    def K_inv(self) -> np.ndarray:
        return np.array(
            [
                [1.0 / self.fx, 0.0, -self.cx / self.fx],
                [0.0, 1.0 / self.fy, -self.cy / self.fy],
                [0.0, 0.0, 1.0],
            ]
        )

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in ("fx", "fy", "cx", "cy", "width", "height")}

    @classmethod
    def from_dict(cls, obj: dict) -> "Intrinsics":
        return cls(
            float(obj["fx"]), float(obj["fy"]), float(obj["cx"]), float(obj["cy"]),
            int(obj.get("width", 320)), int(obj.get("height", 256)),
        )


@dataclass(frozen=True)
class CostVolume:
    cost: np.ndarray  # (D, H, W)
    planes: np.ndarray  # (D,) depths in meters, near to far


def as_image(data) -> np.ndarray:
    """Coerce to a float64 (C, H, W) image clamped to [0, 1]."""
    a = np.asarray(data, dtype=np.float64)
    if a.ndim == 2:
        a = a[None]
    if a.ndim != 3 or a.shape[0] not in (1, 3):
        raise DimensionMismatch(f"images must be (C, H, W) with C in {{1, 3}}, got {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("image contains non-finite values")
    return np.clip(a, 0.0, 1.0)


def depth_planes(d_min: float = 0.5, d_max: float = 50.0, count: int = 64) -> np.ndarray:
    """Depths sampled uniformly in inverse depth; index 0 is ``d_min``."""
    if not (0 < d_min < d_max) or count < 2:
        raise InvalidRange(f"need 0 < d_min < d_max and count >= 2, got ({d_min}, {d_max}, {count})")
    inv = 1.0 / d_min + (np.arange(count) / (count - 1)) * (1.0 / d_max - 1.0 / d_min)
    planes = 1.0 / inv
    planes[0], planes[-1] = d_min, d_max
    return planes


def homography(K: Intrinsics, rel: RelativePose, d: float) -> np.ndarray:
    """``K (R + t [0 0 1/d]) K^-1``: reference pixel -> neighbour pixel for the plane z = d."""
    if not d > 0:
        raise InvalidRange(f"plane depth must be positive, got {d}")
    A = rel.R + np.outer(rel.t, [0.0, 0.0, 1.0 / d])
    return K.K @ A @ K.K_inv


def warp_image(neighbor, H: np.ndarray) -> np.ndarray:
    """Resample ``neighbor`` into the reference view through homography ``H``.

    Each reference pixel ``u`` samples the neighbour bilinearly at the
    dehomogenized ``H u``. Samples that fall outside the image or have a
    nonpositive homogeneous coordinate read as 0.
    """
    img = as_image(neighbor)
    C, Hh, W = img.shape
    ys, xs = np.mgrid[0:Hh, 0:W].astype(np.float64)
    H = np.asarray(H, dtype=np.float64)
    w = H[2, 0] * xs + H[2, 1] * ys + H[2, 2]
    ok = w > 0
    w_safe = np.where(ok, w, 1.0)
    sx = (H[0, 0] * xs + H[0, 1] * ys + H[0, 2]) / w_safe
    sy = (H[1, 0] * xs + H[1, 1] * ys + H[1, 2]) / w_safe
    ok &= (sx >= 0) & (sx <= W - 1) & (sy >= 0) & (sy <= Hh - 1)
    sx = np.where(ok, sx, 0.0)
    sy = np.where(ok, sy, 0.0)
    # The last row/column is reached with weight 1 on the lower-left corner of
    # the final cell, so all four taps stay in bounds.
    x0 = np.clip(np.floor(sx).astype(np.intp), 0, max(W - 2, 0))
    y0 = np.clip(np.floor(sy).astype(np.intp), 0, max(Hh - 2, 0))
    x1 = np.minimum(x0 + 1, W - 1)
    y1 = np.minimum(y0 + 1, Hh - 1)
    ax = sx - x0
    ay = sy - y0
    top = img[:, y0, x0] * (1.0 - ax) + img[:, y0, x1] * ax
    bot = img[:, y1, x0] * (1.0 - ax) + img[:, y1, x1] * ax
    out = top * (1.0 - ay) + bot * ay
    return np.where(ok, out, 0.0)


def cost_volume(
    ref,
    neighbors: Sequence[tuple],
    K: Intrinsics,
    planes: np.ndarray,
) -> CostVolume:
    """Absolute-difference cost volume averaged over neighbour views.

    Args:
        ref: Reference image (C, H, W).
        neighbors: ``(image, RelativePose)`` pairs; each relative pose maps
            reference-camera coordinates into that neighbour's camera.
        K: Intrinsics shared by all views.
        planes: Plane depths in meters.

    Returns:
        Cost of shape (D, H, W): per plane, the channel-summed absolute
        difference between the warped neighbour and the reference.
    """
    ref = as_image(ref)
    if ref.shape[1:] != (K.height, K.width):
        raise DimensionMismatch(f"reference is {ref.shape[1:]}, intrinsics say {(K.height, K.width)}")
    if len(neighbors) < 1:
        raise ValueError("cost_volume needs at least one neighbour")
    planes = np.asarray(planes, dtype=np.float64)
    cost = np.zeros((planes.size, K.height, K.width))
    for img, rel in neighbors:
        img = as_image(img)
        if img.shape != ref.shape:
            raise DimensionMismatch(f"neighbour is {img.shape}, reference is {ref.shape}")
        for i, d in enumerate(planes):
            warped = warp_image(img, homography(K, rel, d))
            cost[i] += np.abs(warped - ref).sum(axis=0)
    cost /= len(neighbors)
    return CostVolume(cost, planes)
