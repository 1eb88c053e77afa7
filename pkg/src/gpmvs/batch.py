"""Exact batch GP regression of latent encodings under a shared pose kernel.

Every latent dimension is an independent GP over the same poses, so one
Cholesky factorization of ``C + sigma^2 I`` serves all M output columns.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .errors import BatchTooLarge, DimensionMismatch, FactorizationFailure
from .kernels import GramMatrix

logger = logging.getLogger(__name__)

DEFAULT_MAX_FRAMES = 512
JITTER_START = 1e-10
JITTER_RETRIES = 4


@dataclass(frozen=True)
class BatchPosterior:
    """Posterior mean (N x M) and shared per-frame marginal variance (N,)."""

    mean: np.ndarray
    var: np.ndarray


def _as_matrix(gram: Union[GramMatrix, np.ndarray]) -> np.ndarray:
    C = gram.C if isinstance(gram, GramMatrix) else np.asarray(gram, dtype=np.float64)
    if C.ndim != 2 or C.shape[0] != C.shape[1]:
        raise DimensionMismatch(f"Gram matrix must be square, got {C.shape}")
    return C


def _as_latents(Y, n: int) -> np.ndarray:
    Y = np.asarray(Y, dtype=np.float64)
    if Y.ndim == 1:
        Y = Y[:, None]
    if Y.ndim != 2 or Y.shape[0] != n or Y.shape[1] < 1:
        raise DimensionMismatch(f"latents must be {n} x M, got {Y.shape}")
    if not np.all(np.isfinite(Y)):
        raise ValueError("latent matrix contains non-finite entries")
    return Y


def factorize(C: np.ndarray, sigma_sq: float):
    """Cholesky-factor ``C + sigma_sq I`` with escalating diagonal jitter.

    Tries the plain matrix first, then adds ``1e-10 * scale`` jitter growing
    tenfold per retry (at most four retries), where ``scale`` is the largest
    diagonal entry of ``C``.

    Returns:
        The ``(factor, lower)`` pair accepted by :func:`scipy.linalg.cho_solve`.

    Raises:
        FactorizationFailure: if every attempt fails.
    """
    n = C.shape[0]
    A = C + sigma_sq * np.eye(n)
    if not np.all(np.isfinite(A)):
        raise FactorizationFailure("C + sigma^2 I has non-finite entries")
    scale = float(np.max(np.diag(C))) if n else 1.0
    jitters = [0.0] + [JITTER_START * scale * 10.0**k for k in range(JITTER_RETRIES)]
    for jitter in jitters:
        try:
            factor = cho_factor(A + jitter * np.eye(n), lower=True, check_finite=False)
        except LinAlgError:
            continue
        if not np.all(np.diag(factor[0]) > 0):
            continue
        if jitter:
            logger.debug("Cholesky succeeded with jitter %.3e", jitter)
        return factor
    raise FactorizationFailure(
        f"C + sigma^2 I is not numerically positive definite (n={n}, sigma^2={sigma_sq})"
    )


def batch_posterior(
    gram: Union[GramMatrix, np.ndarray],
    Y,
    sigma_sq: float,
    max_frames: int = DEFAULT_MAX_FRAMES,
) -> BatchPosterior:
    """Posterior of the latent processes at the training poses.

    ``mean = C (C + s I)^-1 Y`` and ``var = diag(C - C (C + s I)^-1 C)``
    with ``s = sigma_sq``.

    Args:
        gram: N x N kernel matrix.
        Y: N x M encoder outputs, one row per frame.
        sigma_sq: Observation noise variance.
        max_frames: Refuse problems with more than this many frames; the
            online filter handles long sequences.
    """
    C = _as_matrix(gram)
    n = C.shape[0]
    if n > max_frames:
        raise BatchTooLarge(
            f"{n} frames exceeds the batch cap of {max_frames}; use the online filter"
        )
    Y = _as_latents(Y, n)
    factor = factorize(C, sigma_sq)
    alpha = cho_solve(factor, Y, check_finite=False)
    mean = C @ alpha
    A = cho_solve(factor, C, check_finite=False)
    var = np.diag(C) - np.einsum("ij,ji->i", C, A)
    return BatchPosterior(mean, np.maximum(var, 0.0))


def log_marginal_likelihood(gram: Union[GramMatrix, np.ndarray], Y, sigma_sq: float) -> float:
    """Sum over the M independent outputs of the Gaussian log evidence."""
    C = _as_matrix(gram)
    n = C.shape[0]
    Y = _as_latents(Y, n)
    m = Y.shape[1]
    L, lower = factorize(C, sigma_sq)
    alpha = cho_solve((L, lower), Y, check_finite=False)
    quad = float(np.sum(Y * alpha))
    logdet = 2.0 * float(np.sum(np.log(np.diag(L))))
    return -0.5 * quad - 0.5 * m * logdet - 0.5 * m * n * np.log(2.0 * np.pi)
