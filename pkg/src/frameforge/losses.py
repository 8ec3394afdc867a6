"""The five training losses, with analytic gradients.

Distance losses (contrastive, triplet) operate on pairs/triplets of unit
embeddings with the squared Euclidean distance. Classification losses
(softmax, arcface, adacos) score a unit embedding against per-frame weight
rows. All computation is float64; gradient-checking against central finite
differences is part of the acceptance suite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

# Dev-set margin candidates (grid search); arcface scale is fixed.
MARGIN_CANDIDATES = {
    "contrastive": (0.1, 0.2, 0.5, 1.0),
    "triplet": (0.1, 0.2, 0.5, 1.0),
    "arcface": (0.01, 0.02, 0.05, 0.1),
}
ARCFACE_SCALE = 64.0

# "vanilla" is a pseudo-loss: the identity encoder, no optimization.
LOSS_KINDS = ("contrastive", "triplet", "softmax", "arcface", "adacos", "vanilla")

_SIN_FLOOR = 1e-12
_SCALE_FLOOR = 1e-3


@dataclass
class LossConfig:
    kind: str
    margin: float = 0.0
    scale: float = ARCFACE_SCALE
    s_tilde: float | None = None  # adacos adaptive scale, mutated across steps

    def __post_init__(self):
        if self.kind not in LOSS_KINDS:
            raise ValueError(f"unknown loss kind {self.kind!r}")
        if self.margin < 0:
            raise ValueError("margin must be >= 0")
        if self.scale <= 0:
            raise ValueError("scale must be > 0")

    @property
    def needs_classifier(self) -> bool:
        return self.kind in ("softmax", "arcface", "adacos")

    @property
    def needs_margin(self) -> bool:
        return self.kind in ("contrastive", "triplet", "arcface")


@dataclass
class ClassifierParams:
    """Per-class weight rows W (n x d) and biases b (softmax only)."""

    W: np.ndarray
    b: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        self.W = np.asarray(self.W, dtype=np.float64)
        if self.b is None:
            self.b = np.zeros(self.W.shape[0])
        self.b = np.asarray(self.b, dtype=np.float64)
        if self.W.ndim != 2 or self.b.shape != (self.W.shape[0],):
            raise ValueError("classifier shapes inconsistent")

    @property
    def num_classes(self) -> int:
        return self.W.shape[0]


def init_classifier(num_classes: int, dim: int, seed: int) -> ClassifierParams:
    """Rows uniform on the unit sphere, zero biases."""
    rng = np.random.default_rng(seed)
    W = rng.standard_normal((num_classes, dim))
    W /= np.linalg.norm(W, axis=1, keepdims=True)
    return ClassifierParams(W=W, b=np.zeros(num_classes))


def adacos_init_scale(num_classes: int) -> float:
    """Fixed-scale initialization sqrt(2) * ln(n - 1), floored for tiny n."""
    return math.sqrt(2.0) * math.log(max(num_classes - 1, 2))


def _sqdist(x: np.ndarray, y: np.ndarray) -> float:
    d = x - y
    return float(np.dot(d, d))


def contrastive_loss(
    x_i: np.ndarray, x_j: np.ndarray, same_class: bool, m: float
) -> tuple[float, np.ndarray, np.ndarray]:
    """Pull same-class pairs together, push others beyond margin m.

    Returns (loss, grad wrt x_i, grad wrt x_j).
    """
    x_i = np.asarray(x_i, dtype=np.float64)
    x_j = np.asarray(x_j, dtype=np.float64)
    diff = x_i - x_j
    dist = float(np.dot(diff, diff))
    if same_class:
        return dist, 2.0 * diff, -2.0 * diff
    if m - dist > 0.0:
        return m - dist, -2.0 * diff, 2.0 * diff
    return 0.0, np.zeros_like(x_i), np.zeros_like(x_j)


def triplet_loss(
    x_a: np.ndarray, x_p: np.ndarray, x_n: np.ndarray, m: float
) -> tuple[float, np.ndarray, np.ndarray, np.ndarray]:
    """max(D(a,p) - D(a,n) + m, 0). Returns (loss, grads for a, p, n)."""
    x_a = np.asarray(x_a, dtype=np.float64)
    x_p = np.asarray(x_p, dtype=np.float64)
    x_n = np.asarray(x_n, dtype=np.float64)
    val = _sqdist(x_a, x_p) - _sqdist(x_a, x_n) + m
    if val <= 0.0:
        z = np.zeros_like(x_a)
        return 0.0, z, z.copy(), z.copy()
    g_a = 2.0 * (x_n - x_p)
    g_p = 2.0 * (x_p - x_a)
    g_n = 2.0 * (x_a - x_n)
    return val, g_a, g_p, g_n


def _cross_entropy(logits: np.ndarray, label: int) -> tuple[float, np.ndarray]:
    """Stable -log softmax(logits)[label] and gradient wrt logits."""
    shifted = logits - logits.max()
    exp = np.exp(shifted)
    total = exp.sum()
    loss = float(math.log(total) - shifted[label])
    grad = exp / total
    grad[label] -= 1.0
    return loss, grad


def softmax_loss(
    x: np.ndarray, label: int, cls: ClassifierParams
) -> tuple[float, np.ndarray, np.ndarray, np.ndarray]:
    """Cross entropy on logits Wx + b. Returns (loss, gx, gW, gb)."""
    x = np.asarray(x, dtype=np.float64)
    if not 0 <= label < cls.num_classes:
        raise ValueError(f"label {label} out of range")
    logits = cls.W @ x + cls.b
    loss, dlogits = _cross_entropy(logits, label)
    gx = cls.W.T @ dlogits
    gW = np.outer(dlogits, x)
    return loss, gx, gW, dlogits.copy()


def _angular_logits(
    x: np.ndarray, cls: ClassifierParams
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """cos(theta_j) = normalize(w_j) . x, plus pieces for backprop."""
    norms = np.linalg.norm(cls.W, axis=1)
    if np.any(norms < _SIN_FLOOR):
        raise ValueError("classifier row with near-zero norm")
    W_hat = cls.W / norms[:, None]
    cos = np.clip(W_hat @ x, -1.0, 1.0)
    return cos, W_hat, norms


def _angular_backward(
    dcos: np.ndarray, x: np.ndarray, W_hat: np.ndarray, norms: np.ndarray, cos: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Map grad wrt cos(theta) to grads wrt x and the raw rows of W."""
    gx = W_hat.T @ dcos
    # d cos_j / d w_j = (x - cos_j * w_hat_j) / ||w_j||
    gW = (dcos / norms)[:, None] * (x[None, :] - cos[:, None] * W_hat)
    return gx, gW


def arcface_loss(
    x: np.ndarray, label: int, cls: ClassifierParams, m: float, s: float
) -> tuple[float, np.ndarray, np.ndarray]:
    """Additive angular margin loss. Returns (loss, gx, gW).

    cos(theta + m) is computed as cos*cos(m) - sin*sin(m) with
    sin = sqrt(max(1 - cos^2, 0)), avoiding acos near |cos| = 1.
    """
    x = np.asarray(x, dtype=np.float64)
    if not 0 <= label < cls.num_classes:
        raise ValueError(f"label {label} out of range")
    cos, W_hat, norms = _angular_logits(x, cls)
    cos_y = cos[label]
    sin_y = math.sqrt(max(1.0 - cos_y * cos_y, 0.0))
    logits = s * cos
    logits[label] = s * (cos_y * math.cos(m) - sin_y * math.sin(m))
    loss, dlogits = _cross_entropy(logits, label)
    dcos = s * dlogits
    # chain through the margin on the target logit
    dcos[label] = (
        s * dlogits[label] * (math.cos(m) + math.sin(m) * cos_y / max(sin_y, _SIN_FLOOR))
    )
    gx, gW = _angular_backward(dcos, x, W_hat, norms, cos)
    return loss, gx, gW


def adacos_loss(
    xs: np.ndarray,
    labels: np.ndarray,
    cls: ClassifierParams,
    s_tilde: float,
) -> tuple[float, np.ndarray, np.ndarray, float]:
    """Margin-free angular softmax with a dynamically tuned scale.

    Scores the batch with the CURRENT scale, then updates the scale from
    batch statistics: s' = ln(B_avg) / cos(min(pi/4, theta_med)), where
    B_avg is the batch-mean sum of non-target exp(s * cos) and theta_med
    the batch median target angle. Returns (mean loss, grads wrt each x,
    grad wrt W, updated scale).
    """
    xs = np.asarray(xs, dtype=np.float64)
    labels = np.asarray(labels, dtype=int)
    if xs.ndim != 2 or xs.shape[0] == 0:
        raise ValueError("empty batch")
    if s_tilde <= 0:
        raise ValueError("scale must be > 0")
    batch = xs.shape[0]
    losses = np.empty(batch)
    gxs = np.empty_like(xs)
    gW = np.zeros_like(cls.W)
    b_terms = np.empty(batch)
    theta_y = np.empty(batch)
    for i in range(batch):
        cos, W_hat, norms = _angular_logits(xs[i], cls)
        logits = s_tilde * cos
        loss, dlogits = _cross_entropy(logits, int(labels[i]))
        losses[i] = loss
        gx_i, gW_i = _angular_backward(s_tilde * dlogits, xs[i], W_hat, norms, cos)
        gxs[i] = gx_i
        gW += gW_i
        mask = np.ones(cls.num_classes, dtype=bool)
        mask[int(labels[i])] = False
        b_terms[i] = float(np.exp(s_tilde * cos[mask]).sum())
        theta_y[i] = math.acos(float(np.clip(cos[int(labels[i])], -1.0, 1.0)))
    mean_loss = float(losses.mean())
    gxs /= batch
    gW /= batch
    b_avg = float(b_terms.mean())
    theta_med = float(np.median(theta_y))
    new_scale = math.log(max(b_avg, 1.0 + _SCALE_FLOOR)) / math.cos(
        min(math.pi / 4.0, theta_med)
    )
    new_scale = max(new_scale, _SCALE_FLOOR)
    return mean_loss, gxs, gW, new_scale
