"""Stationary covariance functions over pose-distance and Gram assembly."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .poses import Pose, pose_distance_matrix

SQRT3 = np.sqrt(3.0)


class KernelFamily(str, enum.Enum):
    MATERN32 = "matern32"
    EXPONENTIAL = "exponential"
    # Matern-3/2 evaluated on frame-index differences instead of pose-distance.
    TEMPORAL_DIFFERENCE = "td"


@dataclass(frozen=True)
class KernelSpec:
    """Kernel family plus hyperparameters.

    Attributes:
        family: Covariance function family.
        gamma_sq: Magnitude (prior variance) of every latent process.
        ell: Length-scale in pose-distance units (frames for the TD family).
        sigma_sq: Observation noise variance. ``inf`` is allowed and makes
            measurement updates no-ops.
    """

    family: KernelFamily = KernelFamily.MATERN32
    gamma_sq: float = 1.0
    ell: float = 1.0
    sigma_sq: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "family", KernelFamily(self.family))
        if not (np.isfinite(self.gamma_sq) and self.gamma_sq > 0):
            raise ValueError(f"gamma_sq must be positive, got {self.gamma_sq}")
        if not (np.isfinite(self.ell) and self.ell > 0):
            raise ValueError(f"ell must be positive, got {self.ell}")
        if not self.sigma_sq >= 0:
            raise ValueError(f"sigma_sq must be nonnegative, got {self.sigma_sq}")

    @classmethod
    def trained(cls, family=KernelFamily.MATERN32) -> "KernelSpec":
        """Hyperparameters learned jointly with the depth network."""
        return cls(family, gamma_sq=13.82, ell=1.098, sigma_sq=1.443)

    def to_dict(self) -> dict:
        return {
            "family": self.family.value,
            "gamma_sq": self.gamma_sq,
            "ell": self.ell,
            "sigma_sq": self.sigma_sq,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "KernelSpec":
        return cls(
            KernelFamily(obj.get("family", "matern32")),
            float(obj["gamma_sq"]),
            float(obj["ell"]),
            float(obj["sigma_sq"]),
        )


def matern32(d, spec: KernelSpec):
    """gamma^2 (1 + sqrt(3) d / ell) exp(-sqrt(3) d / ell)."""
    r = SQRT3 * np.asarray(d, dtype=np.float64) / spec.ell
    return spec.gamma_sq * (1.0 + r) * np.exp(-r)


def exponential(d, spec: KernelSpec):
    """gamma^2 exp(-d / ell)."""
    return spec.gamma_sq * np.exp(-np.asarray(d, dtype=np.float64) / spec.ell)


def td_distance(i: int, j: int) -> int:
    """Temporal-difference distance |i - j| between frame indices."""
    return abs(i - j)


def kernel_value(d, spec: KernelSpec):
    """Evaluate the covariance of ``spec`` at distance(s) ``d``."""
    if spec.family is KernelFamily.EXPONENTIAL:
        return exponential(d, spec)
    return matern32(d, spec)


@dataclass(frozen=True)
class GramMatrix:
    """Kernel matrix ``C[i, j] = k(D[P_i, P_j])`` with its inputs kept for provenance."""

    C: np.ndarray
    spec: KernelSpec
    inputs: tuple = field(default=(), repr=False)

    @property
    def n(self) -> int:
        return self.C.shape[0]


def distance_matrix(inputs: Sequence[Union[Pose, int]], spec: KernelSpec) -> np.ndarray:
    if spec.family is KernelFamily.TEMPORAL_DIFFERENCE:
        idx = np.array([int(i) for i in inputs], dtype=np.float64)
        return np.abs(idx[:, None] - idx[None, :])
    return pose_distance_matrix(list(inputs))


def gram_matrix(inputs: Sequence[Union[Pose, int]], spec: KernelSpec) -> GramMatrix:
    """Assemble the Gram matrix over poses (or frame indices for the TD family).

    Only the strict upper triangle is evaluated; it is mirrored and the
    diagonal is set to ``gamma_sq`` so the result is exactly symmetric.
    No jitter is added.
    """
    inputs = tuple(inputs)
    if len(inputs) < 1:
        raise ValueError("gram_matrix needs at least one input")
    D = distance_matrix(inputs, spec)
    n = D.shape[0]
    C = np.empty((n, n))
    iu, ju = np.triu_indices(n, k=1)
    vals = kernel_value(D[iu, ju], spec)
    C[iu, ju] = vals
    C[ju, iu] = vals
    np.fill_diagonal(C, spec.gamma_sq)
    return GramMatrix(C, spec, inputs)
