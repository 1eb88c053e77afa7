"""Constant-cost online fusion with the Matern-3/2 pose kernel.

The Matern-3/2 GP has an exact two-dimensional Markov representation
(value and derivative along the pose-distance axis). All M latent
dimensions share the same poses, so they share one 2x2 covariance and only
the 2 x M mean is dimension specific. Filtering along a trajectory whose
pose-distances are additive reproduces batch GP conditioning on the past
frames exactly.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .errors import DimensionMismatch, NonPositiveInnovation, TensorFormatError, UnsupportedKernel
from .kernels import SQRT3, KernelFamily, KernelSpec
from .poses import Pose, pose_distance


@dataclass(frozen=True)
class OnlineState:
    """Filter state after ``frame_count`` measurement updates.

    Attributes:
        mu: 2 x M mean; row 0 holds latent values, row 1 their derivatives.
        Sigma: 2 x 2 covariance shared by every latent dimension.
        spec: Matern-3/2 kernel hyperparameters.
        frame_count: Number of frames absorbed so far.
        last_pose: Pose of the most recent frame, or None before the first.
    """

    mu: np.ndarray
    Sigma: np.ndarray
    spec: KernelSpec
    frame_count: int = 0
    last_pose: Optional[Pose] = None

    @property
    def m(self) -> int:
        return self.mu.shape[1]


@dataclass(frozen=True)
class Transition:
    Phi: np.ndarray
    Q: np.ndarray


def stationary_cov(spec: KernelSpec) -> np.ndarray:
    return np.diag([spec.gamma_sq, 3.0 * spec.gamma_sq / spec.ell**2])


def feedback_matrix(spec: KernelSpec) -> np.ndarray:
    """Generator of the Matern-3/2 state dynamics (per unit pose-distance)."""
    return np.array([[0.0, 1.0], [-3.0 / spec.ell**2, -2.0 * SQRT3 / spec.ell]])


def _check_family(spec: KernelSpec) -> None:
    if spec.family is not KernelFamily.MATERN32:
        raise UnsupportedKernel(
            f"online fusion needs the Matern-3/2 kernel, got {spec.family.value}"
        )


def init_state(spec: KernelSpec, m: int) -> OnlineState:
    """Steady-state prior: zero mean and the stationary covariance."""
    _check_family(spec)
    if m < 1:
        raise ValueError("latent dimension must be positive")
    return OnlineState(np.zeros((2, m)), stationary_cov(spec), spec)


def transition(delta: float, spec: KernelSpec) -> Transition:
    """Evolution operator over a pose-distance increment ``delta``.

    The generator has the repeated eigenvalue ``lam = -sqrt(3)/ell``, giving
    ``Phi = exp(lam*delta) [[1 - lam*delta, delta], [-lam^2*delta, 1 + lam*delta]]``.
    ``Q = Sigma0 - Phi Sigma0 Phi^T`` keeps the prior stationary.
    """
    if not delta >= 0:
        raise ValueError(f"pose increment must be nonnegative, got {delta}")
    lam = -SQRT3 / spec.ell
    ld = lam * delta
    e = np.exp(ld)
    Phi = e * np.array([[1.0 - ld, delta], [-lam * ld, 1.0 + ld]])
    S0 = stationary_cov(spec)
    Q = S0 - Phi @ S0 @ Phi.T
    Q = 0.5 * (Q + Q.T)
    return Transition(Phi, Q)


def predict(state: OnlineState, delta: float) -> OnlineState:
    """Propagate mean and covariance over a pose-distance increment."""
    if delta == 0:
        return state
    tr = transition(delta, state.spec)
    Phi = tr.Phi
    mu = Phi @ state.mu
    # Phi (Sigma - Sigma0) Phi^T + Sigma0 equals Phi Sigma Phi^T + Q and leaves
    # the stationary covariance exactly invariant.
    S0 = stationary_cov(state.spec)
    Sigma = Phi @ (state.Sigma - S0) @ Phi.T + S0
    Sigma = 0.5 * (Sigma + Sigma.T)
    return replace(state, mu=mu, Sigma=Sigma)


def update(state: OnlineState, y) -> OnlineState:
    """Condition on one encoder output ``y`` (length M) observed through h = (1, 0)."""
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if y.shape[0] != state.m:
        raise DimensionMismatch(f"expected {state.m} latent values, got {y.shape[0]}")
    if not np.all(np.isfinite(y)):
        raise ValueError("observation contains non-finite values")
    P = state.Sigma
    s = P[0, 0] + state.spec.sigma_sq
    if not s > 0:
        raise NonPositiveInnovation(f"innovation variance {s} is not positive")
    k = P[:, 0] / s
    mu = state.mu + np.outer(k, y - state.mu[0])
    Sigma = P - np.outer(k, P[0, :])
    Sigma = 0.5 * (Sigma + Sigma.T)
    return replace(state, mu=mu, Sigma=Sigma, frame_count=state.frame_count + 1)


def extract_latent(state: OnlineState) -> np.ndarray:
    """The fused latent passed downstream (the value row of the mean)."""
    return state.mu[0].copy()


def step(state: OnlineState, pose: Pose, y) -> tuple[OnlineState, np.ndarray]:
    """Predict over the pose increment since the previous frame, then update.

    The first frame is a pure update on the steady-state prior.
    """
    if state.last_pose is not None:
        state = predict(state, pose_distance(pose, state.last_pose))
    state = replace(update(state, y), last_pose=pose)
    return state, extract_latent(state)


def filter_sequence(spec: KernelSpec, poses, Y) -> np.ndarray:
    """Run :func:`step` over a whole sequence; returns the N x M fused latents."""
    Y = np.asarray(Y, dtype=np.float64)
    if Y.ndim != 2 or Y.shape[0] != len(poses):
        raise DimensionMismatch(f"need {len(poses)} x M latents, got {Y.shape}")
    state = init_state(spec, Y.shape[1])
    out = np.empty_like(Y)
    for i, (pose, y) in enumerate(zip(poses, Y)):
        state, out[i] = step(state, pose, y)
    return out


# Snapshot layout (little-endian float64): gamma^2, ell, sigma^2, M,
# frame_count, Sigma (4, row-major), mu (2*M, row-major). An optional trailer
# follows: a has-pose flag and, when set, R (9, row-major) and t (3).

def dumps_state(state: OnlineState) -> bytes:
    spec = state.spec
    head = [spec.gamma_sq, spec.ell, spec.sigma_sq, float(state.m), float(state.frame_count)]
    parts = [
        np.asarray(head, dtype="<f8").tobytes(),
        np.asarray(state.Sigma, dtype="<f8").ravel().tobytes(),
        np.asarray(state.mu, dtype="<f8").ravel().tobytes(),
    ]
    if state.last_pose is None:
        parts.append(struct.pack("<d", 0.0))
    else:
        parts.append(struct.pack("<d", 1.0))
        parts.append(state.last_pose.R.astype("<f8").ravel().tobytes())
        parts.append(state.last_pose.t.astype("<f8").tobytes())
    return b"".join(parts)


def loads_state(buf: bytes) -> OnlineState:
    vals = np.frombuffer(buf, dtype="<f8") if len(buf) % 8 == 0 else None
    if vals is None or vals.size < 9:
        raise TensorFormatError("truncated online-state snapshot")
    gamma_sq, ell, sigma_sq, m, frame_count = vals[:5]
    m = int(m)
    base = 9 + 2 * m
    if vals.size < base:
        raise TensorFormatError("truncated online-state snapshot")
    spec = KernelSpec(KernelFamily.MATERN32, float(gamma_sq), float(ell), float(sigma_sq))
    Sigma = vals[5:9].reshape(2, 2).astype(np.float64)
    mu = vals[9:base].reshape(2, m).astype(np.float64)
    last_pose = None
    if vals.size > base and vals[base] != 0.0:
        if vals.size < base + 13:
            raise TensorFormatError("truncated pose trailer in online-state snapshot")
        last_pose = Pose(vals[base + 1 : base + 10].reshape(3, 3), vals[base + 10 : base + 13])
    return OnlineState(mu, Sigma, spec, int(frame_count), last_pose)


def save_state(path, state: OnlineState) -> None:
    with open(path, "wb") as fh:
        fh.write(dumps_state(state))


def load_state(path) -> OnlineState:
    with open(path, "rb") as fh:
        return loads_state(fh.read())
