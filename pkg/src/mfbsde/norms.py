"""Sampled estimators of the sup norm and of the BMO-type ``Z^2[0,T]`` norm.

Both quantities are essential suprema in theory; sampling can only
underestimate them, so every value returned here is a lower estimate.
"""

from __future__ import annotations

import numpy as np


def support(backend, steps: int) -> np.ndarray:
    """Points carrying probability at each step; shape ``(P, steps)``."""
    return backend.weights[:, :steps] > 0


def sup_norm(Y: np.ndarray, backend) -> float:
    """Max over supported points and grid times of ``|Y|`` for ``Y`` of shape ``(P, N+1, m)``."""
    mag = np.sqrt((np.asarray(Y) ** 2).sum(axis=-1))
    return float(np.where(support(backend, mag.shape[1]), mag, 0.0).max(initial=0.0))


def remaining_variation(Z: np.ndarray, backend) -> np.ndarray:
    """``E_{t_k}[sum_{j>=k} |Z_j|^2 dt]`` for every point and step; shape ``(P, N+1)``.

    ``Z`` has shape ``(P, N, ...)``; all trailing axes are summed in ``|Z|^2``.
    """
    Z = np.asarray(Z, dtype=float)
    P, N = Z.shape[:2]
    # time-major buffers keep the backward sweep on contiguous rows
    sq = np.ascontiguousarray((Z**2).reshape(P, N, -1).sum(axis=-1).T)
    dt = backend.grid.dt
    Q = np.zeros((N + 1, P))
    for k in range(N - 1, -1, -1):
        Q[k] = sq[k] * dt + backend.cond_expect(Q[k + 1], k)
        Q[k, ~backend.mask(k)] = 0.0
    return Q.T


def z2_profile(Z: np.ndarray, backend) -> np.ndarray:
    """Per-grid-time supremum over points of the remaining quadratic variation."""
    Q = remaining_variation(Z, backend)
    return np.where(support(backend, Q.shape[1]), Q, -np.inf).max(axis=0, initial=-np.inf).clip(min=0.0)


def z2_norm(Z: np.ndarray, backend) -> float:
    # regression noise can push a fitted variation slightly below zero
    return float(np.sqrt(max(z2_profile(Z, backend).max(), 0.0)))
