"""Cross-validation driver, dev-set grid search, and the training-budget
ablation.

Model selection is by dev BcF. Margins are train-time parameters, so the
margin search retrains per candidate; alpha and threshold reuse one
checkpoint. Test-fold labels are never read before final scoring.
"""

from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass, field

import numpy as np

from .clustering import (
    ClusterAssignment,
    cut_dendrogram,
    embed_instances,
    group_average_cluster,
    two_step_induce,
)
from .data import Dataset, SplitSpec
from .losses import MARGIN_CANDIDATES, LossConfig
from .metrics import MetricsReport, bcubed_scores, score_assignment
from .training import EncoderParams, TrainConfig, TrainResult, train
from .vectors import l2_normalize

log = logging.getLogger(__name__)

MODES = ("one_step", "two_step")


@dataclass
class GridSpec:
    alphas: tuple[float, ...] = tuple(round(0.1 * i, 1) for i in range(11))
    margins: dict[str, tuple[float, ...]] = field(
        default_factory=lambda: {k: v for k, v in MARGIN_CANDIDATES.items()}
    )
    max_threshold_candidates: int = 50
    k_max_per_lemma: int = 10

    def margin_candidates(self, loss_kind: str) -> tuple[float | None, ...]:
        return self.margins.get(loss_kind, (None,))


@dataclass
class BudgetSpec:
    """Per-LU cap on training instances; "all" disables the cap."""

    max_instances_per_lu: int | str = "all"

    def __post_init__(self):
        v = self.max_instances_per_lu
        if v != "all" and (not isinstance(v, int) or v < 1):
            raise ValueError(f"budget must be a positive int or 'all', got {v!r}")

    @property
    def is_all(self) -> bool:
        return self.max_instances_per_lu == "all"


def _lu_seed(seed: int, lu_id: str) -> int:
    digest = hashlib.sha256(lu_id.encode("utf-8")).digest()
    return (seed * 0x10001 + int.from_bytes(digest[:4], "big")) % (2**31)


def subsample_by_lu(train: Dataset, budget: BudgetSpec, seed: int) -> Dataset:
    """Keep at most budget instances per LU (seeded per-LU shuffle + prefix,
    so smaller budgets select subsets of larger ones)."""
    if budget.is_all:
        return train
    cap = int(budget.max_instances_per_lu)
    by_lu: dict[str, list[str]] = {}
    for rec in train.records:
        by_lu.setdefault(rec.lu_id, []).append(rec.id)
    keep: set[str] = set()
    for lu_id in sorted(by_lu):
        ids = sorted(by_lu[lu_id])
        rng = np.random.default_rng(_lu_seed(seed, lu_id))
        rng.shuffle(ids)
        keep.update(ids[:cap])
    return Dataset(rec for rec in train.records if rec.id in keep)


@dataclass
class GridRow:
    margin: float | None
    alpha: float
    threshold: float
    dev_bcf: float


@dataclass
class FoldResult:
    rotation: int
    margin: float | None
    alpha: float
    threshold: float
    dev_bcf: float
    test_report: MetricsReport
    checkpoint: TrainResult
    grid_rows: list[GridRow]


def _threshold_candidates(merge_distances: list[float], max_candidates: int) -> list[float]:
    """Evenly spaced quantiles of the dendrogram merge distances, plus one
    value past the maximum so the single-cluster solution is reachable."""
    if not merge_distances:
        return [0.0]
    dists = sorted(merge_distances)
    if len(dists) <= max_candidates:
        cands = list(dists)
    else:
        qs = np.linspace(0.0, 1.0, max_candidates)
        cands = [float(np.quantile(dists, q)) for q in qs]
    cands.append(dists[-1] * 1.0001 + 1e-9)
    return sorted(set(cands))


def _cluster_and_cut(
    ds: Dataset,
    enc: EncoderParams,
    alpha: float,
    mode: str,
    grid: GridSpec,
    seed: int,
    max_threshold_candidates: int,
    threads: int = 1,
):
    """Embed + cluster once for a given alpha; yield cuts per threshold.

    Returns (candidates, cut function threshold -> (assignment, num_plus)).
    """
    if mode == "one_step":
        emb = embed_instances(ds, enc, alpha)
        dg = group_average_cluster(emb)
        cands = _threshold_candidates(dg.merge_distances(), max_threshold_candidates)

        def cut(threshold: float):
            by_index = cut_dendrogram(dg, threshold)
            labels = {ds.records[i].id: c for i, c in by_index.labels.items()}
            return ClusterAssignment(labels, by_index.num_clusters), None

        return cands, cut
    if mode == "two_step":
        plus, _ = two_step_induce(
            ds, enc, alpha, threshold=0.0, k_max_per_lemma=grid.k_max_per_lemma,
            seed=seed, threads=threads,
        )
        members: list[list[str]] = plus.members()
        emb = embed_instances(ds, enc, alpha)
        row_of = {rec.id: i for i, rec in enumerate(ds.records)}
        reps = np.stack(
            [
                l2_normalize(np.mean([emb[row_of[r]] for r in mem], axis=0))
                for mem in members
            ]
        )
        if len(members) == 1:
            cands = [0.0]

            def cut(threshold: float):
                return ClusterAssignment(dict(plus.labels), 1), plus.num_clusters

            return cands, cut
        dg = group_average_cluster(reps)
        cands = _threshold_candidates(dg.merge_distances(), max_threshold_candidates)

        def cut(threshold: float):
            by_plu = cut_dendrogram(dg, threshold)
            labels = {
                rec_id: by_plu.labels[plu] for rec_id, plu in plus.labels.items()
            }
            return (
                ClusterAssignment(labels, by_plu.num_clusters),
                plus.num_clusters,
            )

        return cands, cut
    raise ValueError(f"unknown clustering mode {mode!r}")


def run_fold(
    ds: Dataset,
    split: SplitSpec,
    rotation: int,
    loss_kind: str,
    mode: str,
    grid: GridSpec,
    train_cfg: TrainConfig,
    budget: BudgetSpec | None = None,
    threads: int = 1,
) -> FoldResult:
    """Train on the train fold, pick (margin, alpha, threshold) maximizing
    dev BcF (ties: smaller alpha, then smaller threshold), score on test."""
    train_fold, dev_fold, test_fold = SplitSpec.rotation_roles(rotation)
    ds_train = ds.subset_by_lemmas(split.lemmas_in_fold(train_fold))
    ds_dev = ds.subset_by_lemmas(split.lemmas_in_fold(dev_fold))
    ds_test = ds.subset_by_lemmas(split.lemmas_in_fold(test_fold))
    if budget is not None:
        ds_train = subsample_by_lu(ds_train, budget, seed=train_cfg.seed)
    dev_gold = ds_dev.gold_labels()

    best: tuple[float, float | None, float, float, TrainResult] | None = None
    grid_rows: list[GridRow] = []
    for margin in grid.margin_candidates(loss_kind):
        loss_cfg = LossConfig(kind=loss_kind, margin=margin if margin is not None else 0.0)
        result = train(ds_train, train_cfg, loss_cfg)
        for alpha in grid.alphas:
            cands, cut = _cluster_and_cut(
                ds_dev, result.encoder, alpha, mode, grid,
                seed=train_cfg.seed, threads=threads,
                max_threshold_candidates=grid.max_threshold_candidates,
            )
            for threshold in cands:
                assignment, _ = cut(threshold)
                _, _, bcf = bcubed_scores(assignment, dev_gold)
                grid_rows.append(GridRow(margin, alpha, threshold, bcf))
                if best is None or bcf > best[0]:
                    best = (bcf, margin, alpha, threshold, result)
    assert best is not None
    dev_bcf, margin, alpha, threshold, result = best
    log.info(
        "fold %d %s/%s: selected margin=%s alpha=%.1f threshold=%.4f (dev BcF %.4f)",
        rotation, loss_kind, mode, margin, alpha, threshold, dev_bcf,
    )
    _, test_cut = _cluster_and_cut(
        ds_test, result.encoder, alpha, mode, grid,
        seed=train_cfg.seed, threads=threads,
        max_threshold_candidates=grid.max_threshold_candidates,
    )
    assignment, num_plus = test_cut(threshold)
    report = score_assignment(assignment, ds_test.gold_labels(), num_plus=num_plus)
    return FoldResult(
        rotation=rotation,
        margin=margin,
        alpha=alpha,
        threshold=threshold,
        dev_bcf=dev_bcf,
        test_report=report,
        checkpoint=result,
        grid_rows=grid_rows,
    )


@dataclass
class CvResult:
    folds: list[FoldResult]
    average: MetricsReport


def average_reports(reports: list[MetricsReport]) -> MetricsReport:
    n = len(reports)
    mean = lambda xs: sum(xs) / n
    num_plus = None
    if all(r.num_plus is not None for r in reports):
        num_plus = round(mean([r.num_plus for r in reports]))
    return MetricsReport(
        pu=mean([r.pu for r in reports]),
        ipu=mean([r.ipu for r in reports]),
        pif=mean([r.pif for r in reports]),
        bcp=mean([r.bcp for r in reports]),
        bcr=mean([r.bcr for r in reports]),
        bcf=mean([r.bcf for r in reports]),
        num_clusters=round(mean([r.num_clusters for r in reports])),
        num_plus=num_plus,
    )


def run_cv(
    ds: Dataset,
    split: SplitSpec,
    loss_kind: str,
    mode: str,
    grid: GridSpec,
    train_cfg: TrainConfig,
    budget: BudgetSpec | None = None,
    threads: int = 1,
) -> CvResult:
    """Three rotations of (train, dev, test); per-rotation reports retained
    and their plain mean returned."""
    folds = [
        run_fold(ds, split, rotation, loss_kind, mode, grid, train_cfg, budget, threads)
        for rotation in range(3)
    ]
    return CvResult(folds=folds, average=average_reports([f.test_report for f in folds]))
