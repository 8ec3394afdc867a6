"""Domain types, the line-delimited dataset format, and fold splitting."""

from __future__ import annotations

import json
from collections import namedtuple
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np


class DatasetError(ValueError):
    """Malformed or inconsistent dataset input."""


@dataclass(frozen=True)
class InstanceRecord:
    """One frame-annotated verb occurrence."""

    id: str
    lemma: str
    lu_id: str
    gold_frame: str
    v_word: np.ndarray
    v_mask: np.ndarray
    sentence: str | None = None


DatasetStats = namedtuple(
    "DatasetStats", ["num_verbs", "num_lus", "num_frames", "num_instances"]
)


class Dataset:
    """An ordered, validated collection of instance records."""

    def __init__(self, records: Iterable[InstanceRecord]):
        self.records: list[InstanceRecord] = list(records)
        if not self.records:
            raise DatasetError("empty dataset")
        self.dim = int(self.records[0].v_word.shape[0])
        if self.dim <= 0:
            raise DatasetError("embedding dimension must be positive")
        seen_ids: set[str] = set()
        lu_lemma: dict[str, str] = {}
        for i, rec in enumerate(self.records):
            if rec.v_word.shape != (self.dim,) or rec.v_mask.shape != (self.dim,):
                raise DatasetError(f"dimension mismatch at record {i + 1}")
            if not (np.isfinite(rec.v_word).all() and np.isfinite(rec.v_mask).all()):
                raise DatasetError(f"non-finite component at record {i + 1}")
            if rec.id in seen_ids:
                raise DatasetError(f"duplicate id {rec.id!r}")
            seen_ids.add(rec.id)
            prev = lu_lemma.setdefault(rec.lu_id, rec.lemma)
            if prev != rec.lemma:
                raise DatasetError(
                    f"lu_id {rec.lu_id!r} maps to both lemmas {prev!r} and {rec.lemma!r}"
                )
        self.by_id = {rec.id: rec for rec in self.records}

    def __len__(self) -> int:
        return len(self.records)

    def lemmas(self) -> list[str]:
        return sorted({r.lemma for r in self.records})

    def frames(self) -> set[str]:
        return {r.gold_frame for r in self.records}

    def gold_labels(self) -> dict[str, str]:
        return {r.id: r.gold_frame for r in self.records}

    def subset_by_lemmas(self, lemmas: set[str]) -> "Dataset":
        return Dataset(r for r in self.records if r.lemma in lemmas)


_REQUIRED_KEYS = ("id", "lemma", "lu_id", "frame", "v_word", "v_mask")


def _parse_vector(raw: object, key: str, line_no: int) -> np.ndarray:
    if not isinstance(raw, list) or not raw:
        raise DatasetError(f"malformed {key} at line {line_no}")
    try:
        vec = np.asarray(raw, dtype=np.float32)
    except (TypeError, ValueError) as exc:
        raise DatasetError(f"malformed {key} at line {line_no}") from exc
    if vec.ndim != 1:
        raise DatasetError(f"malformed {key} at line {line_no}")
    if not np.isfinite(vec).all():
        raise DatasetError(f"non-finite component at line {line_no}")
    return vec


def load_dataset(path: str | Path) -> Dataset:
    """Parse the line-delimited JSON dataset format into a Dataset."""
    records: list[InstanceRecord] = []
    dim: int | None = None
    seen_ids: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetError(f"malformed JSON at line {line_no}") from exc
            if not isinstance(obj, dict):
                raise DatasetError(f"malformed record at line {line_no}")
            for key in _REQUIRED_KEYS:
                if key not in obj:
                    raise DatasetError(f"missing key {key!r} at line {line_no}")
            v_word = _parse_vector(obj["v_word"], "v_word", line_no)
            v_mask = _parse_vector(obj["v_mask"], "v_mask", line_no)
            if v_word.shape != v_mask.shape:
                raise DatasetError(f"dimension mismatch at line {line_no}")
            if dim is None:
                dim = int(v_word.shape[0])
            elif v_word.shape[0] != dim:
                raise DatasetError(f"dimension mismatch at line {line_no}")
            rec_id = str(obj["id"])
            if rec_id in seen_ids:
                raise DatasetError(f"duplicate id {rec_id!r} at line {line_no}")
            seen_ids.add(rec_id)
            records.append(
                InstanceRecord(
                    id=rec_id,
                    lemma=str(obj["lemma"]),
                    lu_id=str(obj["lu_id"]),
                    gold_frame=str(obj["frame"]),
                    v_word=v_word,
                    v_mask=v_mask,
                    sentence=obj.get("sentence"),
                )
            )
    if not records:
        raise DatasetError("empty dataset")
    return Dataset(records)


def write_dataset(ds: Dataset, path: str | Path) -> None:
    """Write the canonical line-delimited form (round-trip stable)."""
    with open(path, "w", encoding="utf-8") as fh:
        for rec in ds.records:
            obj = {
                "id": rec.id,
                "lemma": rec.lemma,
                "lu_id": rec.lu_id,
                "frame": rec.gold_frame,
                "v_word": [float(x) for x in rec.v_word],
                "v_mask": [float(x) for x in rec.v_mask],
            }
            if rec.sentence is not None:
                obj["sentence"] = rec.sentence
            fh.write(json.dumps(obj, separators=(",", ":"), ensure_ascii=False))
            fh.write("\n")


def dataset_stats(ds: Dataset) -> DatasetStats:
    """Distinct lemma/LU/frame counts plus the instance count."""
    return DatasetStats(
        num_verbs=len({r.lemma for r in ds.records}),
        num_lus=len({r.lu_id for r in ds.records}),
        num_frames=len({r.gold_frame for r in ds.records}),
        num_instances=len(ds.records),
    )


NUM_FOLDS = 3


@dataclass
class SplitSpec:
    """Lemma -> fold (1..3) assignment; folds rotate through roles."""

    folds: dict[str, int] = field(default_factory=dict)

    def lemmas_in_fold(self, fold: int) -> set[str]:
        return {lemma for lemma, f in self.folds.items() if f == fold}

    @staticmethod
    def rotation_roles(rotation: int) -> tuple[int, int, int]:
        """(train, dev, test) fold indices for rotation 0, 1, or 2."""
        if rotation not in (0, 1, 2):
            raise ValueError(f"rotation must be 0, 1, or 2, got {rotation}")
        return (
            rotation % NUM_FOLDS + 1,
            (rotation + 1) % NUM_FOLDS + 1,
            (rotation + 2) % NUM_FOLDS + 1,
        )

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.folds, fh, sort_keys=True, indent=0, separators=(",", ":"))
            fh.write("\n")

    @staticmethod
    def load(path: str | Path) -> "SplitSpec":
        with open(path, encoding="utf-8") as fh:
            folds = json.load(fh)
        spec = SplitSpec({str(k): int(v) for k, v in folds.items()})
        bad = {v for v in spec.folds.values() if v not in (1, 2, 3)}
        if bad:
            raise DatasetError(f"invalid fold indices {sorted(bad)}")
        return spec


def make_splits(ds: Dataset, seed: int) -> SplitSpec:
    """Partition lemmas into 3 folds, balancing polysemous lemmas.

    Greedy round-robin: lemmas are bucketed into polysemous (>= 2 distinct
    lu_ids) and monosemous, each bucket is shuffled with the seed, then
    dealt to folds in turn.
    """
    lemma_lus: dict[str, set[str]] = {}
    for rec in ds.records:
        lemma_lus.setdefault(rec.lemma, set()).add(rec.lu_id)
    if len(lemma_lus) < NUM_FOLDS:
        raise DatasetError(
            f"need at least {NUM_FOLDS} lemmas to split, got {len(lemma_lus)}"
        )
    poly = sorted(l for l, lus in lemma_lus.items() if len(lus) >= 2)
    mono = sorted(l for l, lus in lemma_lus.items() if len(lus) < 2)
    rng = np.random.default_rng(seed)
    rng.shuffle(poly)
    rng.shuffle(mono)
    folds: dict[str, int] = {}
    for bucket in (poly, mono):
        for i, lemma in enumerate(bucket):
            folds[lemma] = i % NUM_FOLDS + 1
    return SplitSpec(folds)
