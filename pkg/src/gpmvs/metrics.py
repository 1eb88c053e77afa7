"""Depth-map error metrics: L1, L1-rel, L1-inv and sc-inv."""
from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from .errors import DimensionMismatch, NoValidPixels


@dataclass(frozen=True)
class DepthMap:
    """Depth in meters with a validity mask; invalid pixels are ignored."""

    depth: np.ndarray
    valid: np.ndarray

    @classmethod
    def from_array(cls, depth, mask: Optional[np.ndarray] = None) -> "DepthMap":
        depth = np.asarray(depth, dtype=np.float64)
        valid = np.isfinite(depth) & (depth > 0)
        if mask is not None:
            mask = np.asarray(mask)
            if mask.shape != depth.shape:
                raise DimensionMismatch(f"mask {mask.shape} does not match depth {depth.shape}")
            valid &= mask.astype(bool)
        return cls(depth, valid)


@dataclass(frozen=True)
class MetricsReport:
    l1: float
    l1_rel: float
    l1_inv: float
    sc_inv: float
    n_valid: int
    n_pred_nonpositive: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


def _joint_pixels(pred: DepthMap, gt: DepthMap):
    if pred.depth.shape != gt.depth.shape:
        raise DimensionMismatch(f"prediction {pred.depth.shape} vs ground truth {gt.depth.shape}")
    d_all = np.asarray(pred.depth, dtype=np.float64)
    g_all = np.asarray(gt.depth, dtype=np.float64)
    gt_valid = np.asarray(gt.valid, bool)
    with np.errstate(invalid="ignore"):
        pred_ok = np.isfinite(d_all) & (d_all > 0)
        nonpos = int(np.count_nonzero(gt_valid & np.isfinite(d_all) & ~(d_all > 0)))
    mask = gt_valid & np.asarray(pred.valid, bool) & pred_ok
    return d_all[mask], g_all[mask], nonpos


def evaluate(pred: DepthMap, gt: DepthMap) -> MetricsReport:
    """Compare a predicted depth map against ground truth.

    Pixels count when valid in both maps and the prediction is positive.
    Valid ground-truth pixels whose prediction is not positive are dropped
    and counted in ``n_pred_nonpositive``.
    """
    d, g, nonpos = _joint_pixels(pred, gt)
    n = d.size
    if n == 0:
        raise NoValidPixels("no pixel is valid in both prediction and ground truth")
    err = np.abs(d - g)
    z = np.log(d) - np.log(g)
    # The variance is shift invariant; centring on one sample makes a
    # constant log offset give exactly zero.
    z = z - z[0]
    var = np.mean(z * z) - np.sum(z) ** 2 / n**2
    return MetricsReport(
        l1=float(np.mean(err)),
        l1_rel=float(np.mean(err / g)),
        l1_inv=float(np.mean(np.abs(1.0 / d - 1.0 / g))),
        sc_inv=float(np.sqrt(max(var, 0.0))),
        n_valid=n,
        n_pred_nonpositive=nonpos,
    )


class MetricsAccumulator:
    """Pools pixels over many frames using running sums only."""

    def __init__(self):
        self.n = 0
        self.n_pred_nonpositive = 0
        self._sums = np.zeros(5)  # |e|, |e|/g, |1/d - 1/g|, z, z^2

    def add(self, pred: DepthMap, gt: DepthMap) -> Optional[MetricsReport]:
        """Accumulate one frame; returns that frame's own report (None if empty)."""
        d, g, nonpos = _joint_pixels(pred, gt)
        self.n_pred_nonpositive += nonpos
        if d.size == 0:
            return None
        err = np.abs(d - g)
        z = np.log(d) - np.log(g)
        self._sums += [err.sum(), (err / g).sum(), np.abs(1.0 / d - 1.0 / g).sum(), z.sum(), (z * z).sum()]
        self.n += d.size
        return evaluate(pred, gt)

    def report(self) -> MetricsReport:
        if self.n == 0:
            raise NoValidPixels("no valid pixels accumulated")
        n = self.n
        s_abs, s_rel, s_inv, s_z, s_zz = self._sums
        var = s_zz / n - s_z**2 / n**2
        return MetricsReport(
            l1=float(s_abs / n),
            l1_rel=float(s_rel / n),
            l1_inv=float(s_inv / n),
            sc_inv=float(np.sqrt(max(var, 0.0))),
            n_valid=n,
            n_pred_nonpositive=self.n_pred_nonpositive,
        )
