"""Sequence orchestration: view selection, stand-in encoder/decoder, GP fusion.

The encoder and decoder here are deterministic pooling stand-ins for the
convolutional networks, so the whole chain (cost volume -> latent -> fusion
-> disparity -> metrics) runs without trained weights. Outputs are
illustrative only.
"""
from __future__ import annotations

import collections
import enum
import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Iterator, Optional, Sequence

import numpy as np

from . import online
from .batch import DEFAULT_MAX_FRAMES, batch_posterior
from .errors import DimensionMismatch
from .kernels import KernelFamily, KernelSpec, gram_matrix
from .metrics import DepthMap, MetricsAccumulator, MetricsReport
from .planesweep import CostVolume, Intrinsics, as_image, cost_volume, depth_planes
from .poses import Pose, relative_pose, rotation_angle

logger = logging.getLogger(__name__)


class FusionMode(str, enum.Enum):
    BATCH = "batch"
    ONLINE = "online"


@dataclass(frozen=True)
class PlaneConfig:
    d_min: float = 0.5
    d_max: float = 50.0
    count: int = 64

    def planes(self) -> np.ndarray:
        return depth_planes(self.d_min, self.d_max, self.count)


@dataclass(frozen=True)
class SelectionConfig:
    angle_min_deg: float = 15.0
    trans_min: float = 0.1

    def __post_init__(self):
        if self.angle_min_deg < 0 or self.trans_min < 0:
            raise ValueError("selection thresholds must be nonnegative")


@dataclass(frozen=True)
class PipelineConfig:
    kernel: KernelSpec = field(default_factory=KernelSpec.trained)
    mode: FusionMode = FusionMode.ONLINE
    planes: PlaneConfig = field(default_factory=PlaneConfig)
    selection: SelectionConfig = field(default_factory=SelectionConfig)
    latent_dims: tuple = (512, 8, 10)
    seed: int = 0
    no_gp: bool = False
    max_batch_frames: int = DEFAULT_MAX_FRAMES
    # past frames kept as neighbour candidates
    history_window: int = 30
    input: dict = field(default_factory=dict)
    output_dir: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "mode", FusionMode(self.mode))
        dims = tuple(int(v) for v in self.latent_dims)
        if len(dims) != 3 or min(dims) < 1:
            raise ValueError(f"latent_dims must be three positive integers, got {self.latent_dims}")
        object.__setattr__(self, "latent_dims", dims)
        if self.history_window < 1:
            raise ValueError("history_window must be at least 1")

    @property
    def latent_size(self) -> int:
        c, h, w = self.latent_dims
        return c * h * w

    @classmethod
    def from_dict(cls, obj: dict) -> "PipelineConfig":
        obj = dict(obj)
        kw = {}
        if "kernel" in obj:
            kw["kernel"] = KernelSpec.from_dict(obj.pop("kernel"))
        if "planes" in obj:
            kw["planes"] = PlaneConfig(**obj.pop("planes"))
        if "selection" in obj:
            kw["selection"] = SelectionConfig(**obj.pop("selection"))
        if "latent_dims" in obj:
            kw["latent_dims"] = tuple(obj.pop("latent_dims"))
        known = {"mode", "seed", "no_gp", "max_batch_frames", "history_window", "input", "output_dir"}
        unknown = set(obj) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        kw.update(obj)
        return cls(**kw)

    @classmethod
    def from_json(cls, path) -> "PipelineConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        return {
            "kernel": self.kernel.to_dict(),
            "mode": self.mode.value,
            "planes": vars(self.planes).copy(),
            "selection": vars(self.selection).copy(),
            "latent_dims": list(self.latent_dims),
            "seed": self.seed,
            "no_gp": self.no_gp,
            "max_batch_frames": self.max_batch_frames,
            "history_window": self.history_window,
            "input": self.input,
            "output_dir": self.output_dir,
        }


@dataclass
class Frame:
    """One input frame: a pose plus an image and/or a precomputed latent."""

    pose: Pose
    image: Optional[np.ndarray] = None
    latent: Optional[np.ndarray] = None
    gt_depth: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.image is None and self.latent is None:
            raise ValueError("a frame needs an image or a latent")


@dataclass
class FrameRecord:
    index: int
    pose: Pose
    latent: np.ndarray
    fused_latent: np.ndarray
    neighbor: Optional[int] = None
    disparity: Optional[np.ndarray] = None
    metrics: Optional[MetricsReport] = None


@dataclass
class SequenceResult:
    records: list
    metrics: Optional[MetricsReport] = None


def select_neighbor(
    history: Sequence[Pose],
    current: Pose,
    angle_min_deg: float = 15.0,
    trans_min: float = 0.1,
) -> Optional[int]:
    """Index of the most recent past pose with enough rotation or baseline.

    A frame qualifies when its rotation differs from ``current`` by more than
    ``angle_min_deg`` degrees or its camera center is more than ``trans_min``
    meters away.
    """
    angle_min = np.deg2rad(angle_min_deg)
    for i in range(len(history) - 1, -1, -1):
        p = history[i]
        if np.linalg.norm(p.t - current.t) > trans_min:
            return i
        if rotation_angle(p.R, current.R) > angle_min:
            return i
    return None


def _pool_matrix(n_in: int, n_out: int) -> np.ndarray:
    """Adaptive average pooling weights (n_out x n_in).

    Output cell k averages inputs ``floor(k n_in / n_out)`` up to
    ``ceil((k + 1) n_in / n_out)``; for divisible sizes this is a plain
    block mean, and for ``n_out > n_in`` inputs are replicated.
    """
    A = np.zeros((n_out, n_in))
    for k in range(n_out):
        lo = (k * n_in) // n_out
        hi = -((-(k + 1) * n_in) // n_out)
        A[k, lo:hi] = 1.0 / (hi - lo)
    return A


def adaptive_pool(x: np.ndarray, out_shape: Sequence[int]) -> np.ndarray:
    """Average-pool a 3-D array to ``out_shape``."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 3:
        raise DimensionMismatch(f"expected a 3-D array, got shape {x.shape}")
    for axis, n_out in enumerate(out_shape):
        A = _pool_matrix(x.shape[axis], int(n_out))
        x = np.moveaxis(np.tensordot(A, x, axes=([1], [axis])), 0, axis)
    return x


def toy_encoder(
    vol: Optional[CostVolume],
    ref,
    dims: Sequence[int] = (512, 8, 10),
    seed: int = 0,
    random_signs: bool = False,
) -> np.ndarray:
    """Deterministic stand-in encoder.

    Average-pools the cost volume (or, for a frame without neighbour, the
    reference image) to ``dims`` and flattens row-major. With
    ``random_signs`` the result is multiplied by a seeded +-1 pattern, an
    orthogonal random projection that preserves norms.
    """
    if vol is not None:
        src = np.asarray(vol.cost if isinstance(vol, CostVolume) else vol, dtype=np.float64)
        if ref is not None and np.shape(ref)[-2:] != src.shape[-2:]:
            raise DimensionMismatch(f"cost volume {src.shape} and image {np.shape(ref)} disagree")
    elif ref is not None:
        src = as_image(ref)
    else:
        raise ValueError("toy_encoder needs a cost volume or a reference image")
    z = adaptive_pool(src, dims).ravel()
    if random_signs:
        z = z * np.random.default_rng(seed).choice([-1.0, 1.0], size=z.size)
    return z


def toy_decoder(
    latent,
    out_shape: Sequence[int],
    planes: np.ndarray,
    dims: Sequence[int] = (512, 8, 10),
) -> np.ndarray:
    """Deterministic stand-in decoder producing an (H, W) disparity map.

    The channel mean of the latent is upsampled by nearest neighbour and
    mapped affinely onto the disparity range ``[1/d_max, 1/d_min]`` (zero
    goes to the midpoint, +-1 to the ends), then clipped to that range.
    """
    latent = np.asarray(latent, dtype=np.float64).ravel()
    c, h, w = (int(v) for v in dims)
    if latent.size != c * h * w:
        raise DimensionMismatch(f"latent of size {latent.size} cannot be reshaped to {tuple(dims)}")
    m = latent.reshape(c, h, w).mean(axis=0)
    H, W = (int(v) for v in out_shape)
    rows = (np.arange(H) * h) // H
    cols = (np.arange(W) * w) // W
    up = m[rows[:, None], cols[None, :]]
    planes = np.asarray(planes, dtype=np.float64)
    lo, hi = 1.0 / planes.max(), 1.0 / planes.min()
    mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
    return np.clip(mid + half * up, lo, hi)


def _encode_stream(cfg: PipelineConfig, frames: Iterable[Frame], K: Optional[Intrinsics]):
    """Yield ``(index, frame, latent, neighbour index)`` keeping a bounded history."""
    planes = cfg.planes.planes()
    history = collections.deque(maxlen=cfg.history_window)  # (index, pose, image)
    for idx, frame in enumerate(frames):
        nbr_idx = None
        if frame.latent is not None:
            y = np.asarray(frame.latent, dtype=np.float64).ravel()
            if y.size != cfg.latent_size:
                raise DimensionMismatch(f"frame {idx}: latent size {y.size}, expected {cfg.latent_size}")
        else:
            if K is None:
                raise ValueError("intrinsics are required when frames carry images")
            cands = [h for h in history if h[2] is not None]
            j = select_neighbor(
                [h[1] for h in cands], frame.pose,
                cfg.selection.angle_min_deg, cfg.selection.trans_min,
            )
            if j is None:
                y = toy_encoder(None, frame.image, cfg.latent_dims, cfg.seed)
            else:
                nbr_idx, nbr_pose, nbr_img = cands[j]
                vol = cost_volume(
                    frame.image, [(nbr_img, relative_pose(frame.pose, nbr_pose))], K, planes
                )
                y = toy_encoder(vol, frame.image, cfg.latent_dims, cfg.seed)
        history.append((idx, frame.pose, frame.image))
        yield idx, frame, y, nbr_idx


def _finish(cfg, planes, idx, frame, y, fused, nbr, acc) -> FrameRecord:
    rec = FrameRecord(idx, frame.pose, y, fused, nbr)
    if frame.image is not None or frame.gt_depth is not None:
        shape = np.shape(frame.gt_depth if frame.gt_depth is not None else frame.image)[-2:]
        rec.disparity = toy_decoder(fused, shape, planes, cfg.latent_dims)
    if frame.gt_depth is not None:
        pred = DepthMap.from_array(1.0 / rec.disparity)
        gt = DepthMap.from_array(frame.gt_depth)
        rec.metrics = acc.add(pred, gt)
    return rec


def iter_sequence(
    cfg: PipelineConfig, frames: Iterable[Frame], K: Optional[Intrinsics] = None,
    acc: Optional[MetricsAccumulator] = None,
) -> Iterator[FrameRecord]:
    """Online processing: yields one record per frame with constant memory."""
    planes = cfg.planes.planes()
    acc = acc if acc is not None else MetricsAccumulator()
    state = None
    for idx, frame, y, nbr in _encode_stream(cfg, frames, K):
        if cfg.no_gp:
            fused = y.copy()
        else:
            if state is None:
                state = online.init_state(cfg.kernel, y.size)
            state, fused = online.step(state, frame.pose, y)
        yield _finish(cfg, planes, idx, frame, y, fused, nbr, acc)


def run_sequence(
    cfg: PipelineConfig, frames: Iterable[Frame], K: Optional[Intrinsics] = None
) -> SequenceResult:
    """Process a whole sequence in the configured fusion mode.

    Both modes share the same upstream stages. Batch mode fuses all frames
    jointly once every latent is available; online mode filters frame by
    frame. Metrics pool all valid pixels of frames that carry ground truth.
    """
    acc = MetricsAccumulator()
    if cfg.mode is FusionMode.ONLINE or cfg.no_gp:
        records = list(iter_sequence(cfg, frames, K, acc))
    else:
        planes = cfg.planes.planes()
        encoded = list(_encode_stream(cfg, frames, K))
        Y = np.stack([e[2] for e in encoded])
        if cfg.kernel.family is KernelFamily.TEMPORAL_DIFFERENCE:
            inputs = [e[0] for e in encoded]
        else:
            inputs = [e[1].pose for e in encoded]
        post = batch_posterior(
            gram_matrix(inputs, cfg.kernel), Y, cfg.kernel.sigma_sq, cfg.max_batch_frames
        )
        records = [
            _finish(cfg, planes, idx, frame, y, post.mean[i], nbr, acc)
            for i, (idx, frame, y, nbr) in enumerate(encoded)
        ]
    return SequenceResult(records, acc.report() if acc.n else None)


def with_overrides(cfg: PipelineConfig, **overrides) -> PipelineConfig:
    """Return ``cfg`` with every non-None override applied."""
    kernel_keys = {"gamma_sq", "ell", "sigma_sq", "family"}
    kernel_kw = {k: v for k, v in overrides.items() if k in kernel_keys and v is not None}
    rest = {k: v for k, v in overrides.items() if k not in kernel_keys and v is not None}
    if kernel_kw:
        rest["kernel"] = replace(cfg.kernel, **kernel_kw)
    return replace(cfg, **rest)
