"""Clustering evaluation: Purity family, B-cubed family, similarity
ranking recall, and the train-frame overlap split."""

from __future__ import annotations

from collections import Counter, defaultdict
from dataclasses import dataclass

import numpy as np

from .clustering import ClusterAssignment
from .data import Dataset


def harmonic_mean(a: float, b: float) -> float:
    if a <= 0.0 or b <= 0.0:
        return 0.0
    return 2.0 * a * b / (a + b)


@dataclass
class MetricsReport:
    pu: float
    ipu: float
    pif: float
    bcp: float
    bcr: float
    bcf: float
    num_clusters: int
    num_plus: int | None = None

    def to_dict(self) -> dict:
        out = {
            "pu": self.pu,
            "ipu": self.ipu,
            "pif": self.pif,
            "bcp": self.bcp,
            "bcr": self.bcr,
            "bcf": self.bcf,
            "num_clusters": self.num_clusters,
        }
        if self.num_plus is not None:
            out["num_plus"] = self.num_plus
        return out

    def table_row(self, label: str = "") -> str:
        """Single table line: Pu / iPu / PiF and BcP / BcR / BcF columns."""
        plu = str(self.num_plus) if self.num_plus is not None else "--"
        return (
            f"{label:<16} {plu:>6} {self.num_clusters:>5}  "
            f"{100 * self.pu:5.1f} / {100 * self.ipu:5.1f} / {100 * self.pif:5.1f}  "
            f"{100 * self.bcp:5.1f} / {100 * self.bcr:5.1f} / {100 * self.bcf:5.1f}"
        )


TABLE_HEADER = (
    f"{'model':<16} {'#pLU':>6} {'#C':>5}  "
    f"{'Pu':>5} / {'iPu':>5} / {'PiF':>5}  {'BcP':>5} / {'BcR':>5} / {'BcF':>5}"
)


def _check_instances(pred: ClusterAssignment, gold: dict) -> None:
    if set(pred.labels) != set(gold):
        raise ValueError("prediction and gold cover different instance sets")


def purity_scores(pred: ClusterAssignment, gold: dict) -> tuple[float, float, float]:
    """(Pu, iPu, PiF): cluster-majority mass, label-concentration mass,
    and their harmonic mean."""
    _check_instances(pred, gold)
    n = len(gold)
    overlap: dict[int, Counter] = defaultdict(Counter)
    for inst, cid in pred.labels.items():
        overlap[cid][gold[inst]] += 1
    pu = sum(c.most_common(1)[0][1] for c in overlap.values()) / n
    by_label: dict[str, Counter] = defaultdict(Counter)
    for cid, counts in overlap.items():
        for label, cnt in counts.items():
            by_label[label][cid] += cnt
    ipu = sum(c.most_common(1)[0][1] for c in by_label.values()) / n
    return pu, ipu, harmonic_mean(pu, ipu)


def bcubed_scores(pred: ClusterAssignment, gold: dict) -> tuple[float, float, float]:
    """(BcP, BcR, BcF): per-instance cluster/class overlap precision and
    recall, averaged over instances."""
    _check_instances(pred, gold)
    cluster_sizes = Counter(pred.labels.values())
    class_sizes = Counter(gold.values())
    overlap: dict[tuple[int, str], int] = Counter()
    for inst, cid in pred.labels.items():
        overlap[(cid, gold[inst])] += 1
    p_sum = r_sum = 0.0
    for inst, cid in pred.labels.items():
        inter = overlap[(cid, gold[inst])]
        p_sum += inter / cluster_sizes[cid]
        r_sum += inter / class_sizes[gold[inst]]
    n = len(gold)
    bcp, bcr = p_sum / n, r_sum / n
    return bcp, bcr, harmonic_mean(bcp, bcr)


def score_assignment(
    pred: ClusterAssignment, gold: dict, num_plus: int | None = None
) -> MetricsReport:
    pu, ipu, pif = purity_scores(pred, gold)
    bcp, bcr, bcf = bcubed_scores(pred, gold)
    return MetricsReport(
        pu=pu,
        ipu=ipu,
        pif=pif,
        bcp=bcp,
        bcr=bcr,
        bcf=bcf,
        num_clusters=pred.num_clusters,
        num_plus=num_plus,
    )


def ranking_recall(
    query_id: str,
    ds: Dataset,
    embeddings: dict[str, np.ndarray],
    space: str = "all",
) -> float:
    """Recall of same-frame instances in the top-t cosine neighbors.

    t is the number of same-frame instances within the chosen search
    space; the query itself is always excluded. space: "all" = every
    other instance, "same" = same-lemma instances, "diff" = other lemmas.
    Cosine ties break toward the smaller instance id.
    """
    if space not in ("all", "same", "diff"):
        raise ValueError(f"unknown search space {space!r}")
    query = ds.by_id[query_id]
    q = np.asarray(embeddings[query_id], dtype=np.float64)
    q = q / np.linalg.norm(q)
    candidates = []
    for rec in ds.records:
        if rec.id == query_id:
            continue
        if space == "same" and rec.lemma != query.lemma:
            continue
        if space == "diff" and rec.lemma == query.lemma:
            continue
        candidates.append(rec)
    t = sum(1 for rec in candidates if rec.gold_frame == query.gold_frame)
    if t == 0:
        raise ValueError(
            f"query {query_id!r} has no same-frame instance in space {space!r}"
        )
    mat = np.stack([np.asarray(embeddings[rec.id], dtype=np.float64) for rec in candidates])
    mat = mat / np.linalg.norm(mat, axis=1, keepdims=True)
    sims = mat @ q
    order = sorted(range(len(candidates)), key=lambda i: (-sims[i], candidates[i].id))
    hits = sum(
        1 for i in order[:t] if candidates[i].gold_frame == query.gold_frame
    )
    return hits / t


def overlap_split_mean(
    tagged_recalls: list[tuple[str, float]], train_frames: set[str]
) -> tuple[float | None, float | None]:
    """Mean recall split by whether the query frame occurred in training.

    Each element is (query gold frame, recall). An empty side is reported
    as None, not zero.
    """
    overlap = [r for f, r in tagged_recalls if f in train_frames]
    non_overlap = [r for f, r in tagged_recalls if f not in train_frames]
    mean = lambda xs: sum(xs) / len(xs) if xs else None
    return mean(overlap), mean(non_overlap)
