"""Vector primitives shared by the whole pipeline.

Embeddings are stored as float32; dot products and sums accumulate in
float64 so metric aggregates stay stable over tens of thousands of
instances.
"""

from __future__ import annotations

import numpy as np

NORM_EPS = 1e-12


def _check_same_dim(x: np.ndarray, y: np.ndarray) -> None:
    if x.shape != y.shape:
        raise ValueError(f"dimension mismatch: {x.shape} vs {y.shape}")


def combine(v_word: np.ndarray, v_mask: np.ndarray, alpha: float) -> np.ndarray:
    """Weighted mix (1-alpha) * v_word + alpha * v_mask."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must be in [0, 1], got {alpha}")
    _check_same_dim(v_word, v_mask)
    return (1.0 - alpha) * v_word + alpha * v_mask


def l2_normalize(v: np.ndarray) -> np.ndarray:
    """Scale v to unit length. Raises on (near-)zero vectors."""
    norm = float(np.sqrt(np.dot(v.astype(np.float64), v.astype(np.float64))))
    if norm < NORM_EPS:
        raise ValueError("cannot normalize near-zero vector")
    return (v / norm).astype(v.dtype)


def sq_euclidean(x: np.ndarray, y: np.ndarray) -> float:
    """Squared Euclidean distance."""
    _check_same_dim(x, y)
    d = x.astype(np.float64) - y.astype(np.float64)
    return float(np.dot(d, d))


def cosine(x: np.ndarray, y: np.ndarray) -> float:
    """Cosine similarity, clamped to [-1, 1] to guard downstream acos."""
    _check_same_dim(x, y)
    x64 = x.astype(np.float64)
    y64 = y.astype(np.float64)
    nx = float(np.sqrt(np.dot(x64, x64)))
    ny = float(np.sqrt(np.dot(y64, y64)))
    if nx < NORM_EPS or ny < NORM_EPS:
        raise ValueError("cosine undefined for near-zero vector")
    return float(np.clip(np.dot(x64, y64) / (nx * ny), -1.0, 1.0))
