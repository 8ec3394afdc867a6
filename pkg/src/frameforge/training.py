"""Trainable encoder head, AdamW, sampling, and the training loop.

The encoder is an affine map followed by l2 normalization; it stands in
for full fine-tuning of the contextual model, initialized to identity so
step 0 reproduces the vanilla embedding space exactly. Training consumes
raw v_word vectors; the word/mask mix is applied at clustering time.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .data import Dataset
from .losses import (
    ClassifierParams,
    LossConfig,
    adacos_init_scale,
    adacos_loss,
    arcface_loss,
    contrastive_loss,
    init_classifier,
    softmax_loss,
    triplet_loss,
)
from .vectors import NORM_EPS

log = logging.getLogger(__name__)


@dataclass
class EncoderParams:
    """Affine map: x = l2_normalize(weight @ v + bias)."""

    weight: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        self.weight = np.asarray(self.weight, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.weight.ndim != 2 or self.bias.shape != (self.weight.shape[0],):
            raise ValueError("encoder shapes inconsistent")
        if not (np.isfinite(self.weight).all() and np.isfinite(self.bias).all()):
            raise ValueError("non-finite encoder parameters")

    @staticmethod
    def identity(dim: int) -> "EncoderParams":
        return EncoderParams(np.eye(dim), np.zeros(dim))


def encode(p: EncoderParams, v: np.ndarray) -> np.ndarray:
    """Unit-norm embedding of an input vector."""
    u = p.weight @ np.asarray(v, dtype=np.float64) + p.bias
    norm = float(np.linalg.norm(u))
    if norm < NORM_EPS:
        raise ValueError("degenerate pre-normalization encoder output")
    return u / norm


def _encode_fwd(p: EncoderParams, v: np.ndarray):
    v = np.asarray(v, dtype=np.float64)
    u = p.weight @ v + p.bias
    norm = float(np.linalg.norm(u))
    if norm < NORM_EPS:
        raise ValueError("degenerate pre-normalization encoder output")
    return u / norm, (v, u / norm, norm)


def _encode_bwd(gy: np.ndarray, cache) -> tuple[np.ndarray, np.ndarray]:
    """Backprop through normalize(weight @ v + bias): grads for weight, bias."""
    v, y, norm = cache
    gu = (gy - np.dot(gy, y) * y) / norm
    return np.outer(gu, v), gu


class AdamW:
    """Decoupled-weight-decay Adam over a dict of named parameter arrays."""

    def __init__(
        self,
        params: dict[str, np.ndarray],
        lr: float,
        betas: tuple[float, float] = (0.9, 0.999),
        eps: float = 1e-8,
        weight_decay: float = 0.01,
        decay_names: set[str] | None = None,
    ):
        self.params = params
        self.lr = lr
        self.b1, self.b2 = betas
        self.eps = eps
        self.weight_decay = weight_decay
        self.decay_names = decay_names if decay_names is not None else set(params)
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        for name, p in self.params.items():
            g = grads[name]
            self.m[name] = self.b1 * self.m[name] + (1 - self.b1) * g
            self.v[name] = self.b2 * self.v[name] + (1 - self.b2) * g * g
            m_hat = self.m[name] / (1 - self.b1**self.t)
            v_hat = self.v[name] / (1 - self.b2**self.t)
            p -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)
            if name in self.decay_names:
                p -= self.lr * self.weight_decay * p


@dataclass
class TrainConfig:
    batch_size: int = 32
    learning_rate: float = 1e-5
    epochs: int = 5
    betas: tuple[float, float] = (0.9, 0.999)
    adam_eps: float = 1e-8
    weight_decay: float = 0.01
    seed: int = 42

    def __post_init__(self):
        if self.batch_size <= 0 or self.epochs < 0:
            raise ValueError("batch_size and epochs must be positive")
        if self.learning_rate < 0:
            raise ValueError("learning rate must be >= 0")


def _by_frame(ds: Dataset) -> dict[str, list[int]]:
    groups: dict[str, list[int]] = {}
    for i, rec in enumerate(ds.records):
        groups.setdefault(rec.gold_frame, []).append(i)
    return groups


def sample_pairs(ds: Dataset, seed: int) -> list[tuple[str, str, bool]]:
    """One positive and one negative partner per anchor instance.

    Anchors whose frame has no second instance are skipped for positives
    (logged) but still paired with a negative.
    """
    groups = _by_frame(ds)
    if len(groups) < 2:
        raise ValueError("need at least 2 frames to sample pairs")
    rng = np.random.default_rng(seed)
    pairs: list[tuple[str, str, bool]] = []
    n = len(ds.records)
    skipped = 0
    for i, rec in enumerate(ds.records):
        same = groups[rec.gold_frame]
        if len(same) >= 2:
            j = i
            while j == i:
                j = same[rng.integers(len(same))]
            pairs.append((rec.id, ds.records[j].id, True))
        else:
            skipped += 1
        j = i
        while j == i or ds.records[j].gold_frame == rec.gold_frame:
            j = int(rng.integers(n))
        pairs.append((rec.id, ds.records[j].id, False))
    if skipped:
        log.info("sample_pairs: %d singleton-frame anchors skipped for positives", skipped)
    return pairs


def sample_triplets(ds: Dataset, seed: int) -> list[tuple[str, str, str]]:
    """(anchor, positive, negative) per anchor with an available positive."""
    groups = _by_frame(ds)
    if len(groups) < 2:
        raise ValueError("need at least 2 frames to sample triplets")
    rng = np.random.default_rng(seed)
    triplets: list[tuple[str, str, str]] = []
    n = len(ds.records)
    skipped = 0
    for i, rec in enumerate(ds.records):
        same = groups[rec.gold_frame]
        if len(same) < 2:
            skipped += 1
            continue
        j = i
        while j == i:
            j = same[rng.integers(len(same))]
        k = i
        while k == i or ds.records[k].gold_frame == rec.gold_frame:
            k = int(rng.integers(n))
        triplets.append((rec.id, ds.records[j].id, ds.records[k].id))
    if skipped:
        log.info("sample_triplets: %d singleton-frame anchors skipped", skipped)
    return triplets


@dataclass
class TrainResult:
    encoder: EncoderParams
    classifier: ClassifierParams | None
    loss_config: LossConfig
    train_config: TrainConfig
    class_index: dict[str, int] | None
    epoch_losses: list[float] = field(default_factory=list)
    s_tilde: float | None = None


def _batched(seq: list, size: int):
    for i in range(0, len(seq), size):
        yield seq[i : i + size]


def train(
    ds_train: Dataset,
    cfg: TrainConfig,
    loss_cfg: LossConfig,
    epoch_callback: Callable[[int, EncoderParams], None] | None = None,
) -> TrainResult:
    """AdamW over shuffled batches; inputs are raw v_word vectors.

    Deterministic for a fixed seed: sampling, shuffling, and batch
    gradient reduction all run in a fixed order.
    """
    dim = ds_train.dim
    enc = EncoderParams.identity(dim)
    if loss_cfg.kind == "vanilla":
        return TrainResult(
            encoder=enc,
            classifier=None,
            loss_config=loss_cfg,
            train_config=cfg,
            class_index=None,
        )
    frames = sorted(ds_train.frames())
    class_index: dict[str, int] | None = None
    cls: ClassifierParams | None = None
    s_tilde: float | None = None
    params = {"A": enc.weight, "bias": enc.bias}
    decay = {"A"}
    if loss_cfg.needs_classifier:
        class_index = {f: i for i, f in enumerate(frames)}
        cls = init_classifier(len(frames), dim, seed=cfg.seed + 1)
        params["W"] = cls.W
        decay.add("W")
        if loss_cfg.kind == "softmax":
            params["b"] = cls.b
        if loss_cfg.kind == "adacos":
            s_tilde = (
                loss_cfg.s_tilde
                if loss_cfg.s_tilde is not None
                else adacos_init_scale(len(frames))
            )
    opt = AdamW(
        params,
        lr=cfg.learning_rate,
        betas=cfg.betas,
        eps=cfg.adam_eps,
        weight_decay=cfg.weight_decay,
        decay_names=decay,
    )
    rng = np.random.default_rng(cfg.seed)
    epoch_losses: list[float] = []
    if epoch_callback is not None:
        epoch_callback(0, enc)
    for epoch in range(1, cfg.epochs + 1):
        if loss_cfg.kind == "contrastive":
            units = sample_pairs(ds_train, seed=cfg.seed * 1000 + epoch)
        elif loss_cfg.kind == "triplet":
            units = sample_triplets(ds_train, seed=cfg.seed * 1000 + epoch)
        else:
            units = [rec.id for rec in ds_train.records]
        order = rng.permutation(len(units))
        units = [units[i] for i in order]
        total, count = 0.0, 0
        for batch in _batched(units, cfg.batch_size):
            loss_val, grads, s_tilde = _batch_step(
                ds_train, enc, cls, class_index, loss_cfg, batch, s_tilde
            )
            opt.step(grads)
            total += loss_val * len(batch)
            count += len(batch)
        epoch_losses.append(total / max(count, 1))
        log.info("epoch %d: mean %s loss %.6f", epoch, loss_cfg.kind, epoch_losses[-1])
        if epoch_callback is not None:
            epoch_callback(epoch, enc)
    return TrainResult(
        encoder=enc,
        classifier=cls if loss_cfg.needs_classifier else None,
        loss_config=loss_cfg,
        train_config=cfg,
        class_index=class_index,
        epoch_losses=epoch_losses,
        s_tilde=s_tilde,
    )


def _batch_step(
    ds: Dataset,
    enc: EncoderParams,
    cls: ClassifierParams | None,
    class_index: dict[str, int] | None,
    loss_cfg: LossConfig,
    batch: list,
    s_tilde: float | None,
) -> tuple[float, dict[str, np.ndarray], float | None]:
    """Mean loss and mean gradients over one batch of training units."""
    grads = {"A": np.zeros_like(enc.weight), "bias": np.zeros_like(enc.bias)}
    if cls is not None:
        grads["W"] = np.zeros_like(cls.W)
        if loss_cfg.kind == "softmax":
            grads["b"] = np.zeros_like(cls.b)
    total = 0.0

    def add_encoder_grad(gy: np.ndarray, cache) -> None:
        gA, gb = _encode_bwd(gy, cache)
        grads["A"] += gA
        grads["bias"] += gb

    if loss_cfg.kind == "contrastive":
        for a_id, o_id, same in batch:
            xa, ca = _encode_fwd(enc, ds.by_id[a_id].v_word)
            xo, co = _encode_fwd(enc, ds.by_id[o_id].v_word)
            loss, ga, go = contrastive_loss(xa, xo, same, loss_cfg.margin)
            total += loss
            add_encoder_grad(ga, ca)
            add_encoder_grad(go, co)
    elif loss_cfg.kind == "triplet":
        for a_id, p_id, n_id in batch:
            xa, ca = _encode_fwd(enc, ds.by_id[a_id].v_word)
            xp, cp = _encode_fwd(enc, ds.by_id[p_id].v_word)
            xn, cn = _encode_fwd(enc, ds.by_id[n_id].v_word)
            loss, ga, gp, gn = triplet_loss(xa, xp, xn, loss_cfg.margin)
            total += loss
            add_encoder_grad(ga, ca)
            add_encoder_grad(gp, cp)
            add_encoder_grad(gn, cn)
    elif loss_cfg.kind in ("softmax", "arcface"):
        assert cls is not None and class_index is not None
        for rec_id in batch:
            rec = ds.by_id[rec_id]
            x, cache = _encode_fwd(enc, rec.v_word)
            label = class_index[rec.gold_frame]
            if loss_cfg.kind == "softmax":
                loss, gx, gW, gb = softmax_loss(x, label, cls)
                grads["b"] += gb
            else:
                loss, gx, gW = arcface_loss(x, label, cls, loss_cfg.margin, loss_cfg.scale)
            total += loss
            grads["W"] += gW
            add_encoder_grad(gx, cache)
    elif loss_cfg.kind == "adacos":
        assert cls is not None and class_index is not None and s_tilde is not None
        xs, caches, labels = [], [], []
        for rec_id in batch:
            rec = ds.by_id[rec_id]
            x, cache = _encode_fwd(enc, rec.v_word)
            xs.append(x)
            caches.append(cache)
            labels.append(class_index[rec.gold_frame])
        mean_loss, gxs, gW, s_tilde = adacos_loss(
            np.asarray(xs), np.asarray(labels), cls, s_tilde
        )
        # adacos grads are already means over the batch
        for gx, cache in zip(gxs, caches):
            add_encoder_grad(gx, cache)
        grads["W"] += gW
        return mean_loss, grads, s_tilde
    else:  # pragma: no cover - guarded by LossConfig
        raise ValueError(f"unknown loss kind {loss_cfg.kind!r}")

    n = max(len(batch), 1)
    for key in grads:
        grads[key] /= n
    return total / n, grads, s_tilde


def save_checkpoint(path: str | Path, result: TrainResult) -> None:
    """JSON checkpoint: shapes, flat parameter arrays, loss/train config."""
    enc = result.encoder
    obj = {
        "loss": result.loss_config.kind,
        "margin": result.loss_config.margin,
        "scale": result.loss_config.scale,
        "s_tilde": result.s_tilde,
        "seed": result.train_config.seed,
        "train_config": {
            "batch_size": result.train_config.batch_size,
            "learning_rate": result.train_config.learning_rate,
            "epochs": result.train_config.epochs,
            "weight_decay": result.train_config.weight_decay,
        },
        "encoder": {
            "shape": list(enc.weight.shape),
            "weight": [float(x) for x in enc.weight.ravel()],
            "bias": [float(x) for x in enc.bias],
        },
        "classifier": None,
        "class_index": result.class_index,
        "epoch_losses": result.epoch_losses,
    }
    if result.classifier is not None:
        obj["classifier"] = {
            "shape": list(result.classifier.W.shape),
            "W": [float(x) for x in result.classifier.W.ravel()],
            "b": [float(x) for x in result.classifier.b],
        }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, separators=(",", ":"))
        fh.write("\n")


def load_checkpoint(path: str | Path) -> TrainResult:
    with open(path, encoding="utf-8") as fh:
        obj = json.load(fh)
    shape = tuple(obj["encoder"]["shape"])
    enc = EncoderParams(
        np.asarray(obj["encoder"]["weight"], dtype=np.float64).reshape(shape),
        np.asarray(obj["encoder"]["bias"], dtype=np.float64),
    )
    cls = None
    if obj.get("classifier"):
        cshape = tuple(obj["classifier"]["shape"])
        cls = ClassifierParams(
            W=np.asarray(obj["classifier"]["W"], dtype=np.float64).reshape(cshape),
            b=np.asarray(obj["classifier"]["b"], dtype=np.float64),
        )
    loss_cfg = LossConfig(
        kind=obj["loss"],
        margin=obj.get("margin", 0.0),
        scale=obj.get("scale", 64.0),
        s_tilde=obj.get("s_tilde"),
    )
    tc = obj.get("train_config", {})
    cfg = TrainConfig(
        batch_size=tc.get("batch_size", 32),
        learning_rate=tc.get("learning_rate", 1e-5),
        epochs=tc.get("epochs", 5),
        weight_decay=tc.get("weight_decay", 0.01),
        seed=obj.get("seed", 42),
    )
    return TrainResult(
        encoder=enc,
        classifier=cls,
        loss_config=loss_cfg,
        train_config=cfg,
        class_index=obj.get("class_index"),
        epoch_losses=obj.get("epoch_losses", []),
        s_tilde=obj.get("s_tilde"),
    )


def checkpoint_hash(path: str | Path) -> str:
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()[:16]
