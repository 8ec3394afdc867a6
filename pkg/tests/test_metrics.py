from collections import Counter

import numpy as np
import pytest

from frameforge.clustering import ClusterAssignment
from frameforge.data import Dataset, InstanceRecord
from frameforge.metrics import (
    MetricsReport,
    TABLE_HEADER,
    bcubed_scores,
    harmonic_mean,
    overlap_split_mean,
    purity_scores,
    ranking_recall,
    score_assignment,
)


def brute_purity(pred, gold):
    clusters = {}
    for inst, cid in pred.labels.items():
        clusters.setdefault(cid, []).append(inst)
    n = len(gold)
    pu = sum(
        max(Counter(gold[i] for i in members).values()) for members in clusters.values()
    ) / n
    classes = {}
    for inst, label in gold.items():
        classes.setdefault(label, []).append(inst)
    ipu = sum(
        max(Counter(pred.labels[i] for i in members).values())
        for members in classes.values()
    ) / n
    return pu, ipu


def brute_bcubed(pred, gold):
    """Literal per-definition double loop over instance pairs."""
    insts = list(gold)
    n = len(insts)
    p_sum = r_sum = 0.0
    for e in insts:
        same_cluster = [o for o in insts if pred.labels[o] == pred.labels[e]]
        same_class = [o for o in insts if gold[o] == gold[e]]
        correct = [o for o in same_cluster if gold[o] == gold[e]]
        p_sum += len(correct) / len(same_cluster)
        r_sum += len(correct) / len(same_class)
    return p_sum / n, r_sum / n


def random_partition(rng, items):
    k = int(rng.integers(1, len(items) + 1))
    labels = rng.integers(0, k, size=len(items))
    # reindex to contiguous ids
    remap = {}
    out = {}
    for item, raw in zip(items, labels):
        out[item] = remap.setdefault(int(raw), len(remap))
    return ClusterAssignment(labels=out, num_clusters=len(remap))


class TestHarmonicMean:
    def test_zero_sides(self):
        assert harmonic_mean(0.0, 1.0) == 0.0
        assert harmonic_mean(1.0, 0.0) == 0.0

    def test_symmetric_and_bounded(self):
        assert harmonic_mean(0.5, 0.8) == harmonic_mean(0.8, 0.5)
        assert harmonic_mean(0.5, 0.8) <= 0.65


class TestWorkedExample:
    """gold {a,b},{c} vs pred {a,b,c}."""

    gold = {"a": "X", "b": "X", "c": "Y"}
    pred = ClusterAssignment(labels={"a": 0, "b": 0, "c": 0}, num_clusters=1)

    def test_bcubed(self):
        bcp, bcr, bcf = bcubed_scores(self.pred, self.gold)
        assert bcp == pytest.approx(5.0 / 9.0)
        assert bcr == pytest.approx(1.0)
        assert bcf == pytest.approx(5.0 / 7.0)

    def test_purity(self):
        pu, ipu, pif = purity_scores(self.pred, self.gold)
        assert pu == pytest.approx(2.0 / 3.0)
        assert ipu == pytest.approx(1.0)
        assert pif == pytest.approx(0.8)


class TestOracles:
    def test_match_brute_force(self):
        rng = np.random.default_rng(0)
        labels_pool = ["A", "B", "C", "D"]
        for _ in range(300):
            n = int(rng.integers(1, 13))
            items = [f"i{j}" for j in range(n)]
            gold = {i: labels_pool[int(rng.integers(len(labels_pool)))] for i in items}
            pred = random_partition(rng, items)
            bcp, bcr, _ = bcubed_scores(pred, gold)
            ref_p, ref_r = brute_bcubed(pred, gold)
            assert bcp == pytest.approx(ref_p, abs=1e-12)
            assert bcr == pytest.approx(ref_r, abs=1e-12)
            pu, ipu, _ = purity_scores(pred, gold)
            ref_pu, ref_ipu = brute_purity(pred, gold)
            assert pu == pytest.approx(ref_pu, abs=1e-12)
            assert ipu == pytest.approx(ref_ipu, abs=1e-12)

    def test_perfect_prediction_scores_one(self):
        gold = {"a": "X", "b": "X", "c": "Y"}
        pred = ClusterAssignment(labels={"a": 0, "b": 0, "c": 1}, num_clusters=2)
        assert bcubed_scores(pred, gold) == (1.0, 1.0, 1.0)
        assert purity_scores(pred, gold) == (1.0, 1.0, 1.0)

    def test_singletons_maximize_precision(self):
        gold = {"a": "X", "b": "X", "c": "Y"}
        pred = ClusterAssignment(labels={"a": 0, "b": 1, "c": 2}, num_clusters=3)
        bcp, bcr, _ = bcubed_scores(pred, gold)
        assert bcp == 1.0
        assert bcr < 1.0

    def test_instance_set_mismatch(self):
        pred = ClusterAssignment(labels={"a": 0}, num_clusters=1)
        with pytest.raises(ValueError, match="different instance sets"):
            bcubed_scores(pred, {"a": "X", "b": "Y"})


class TestMergeSplitMonotonicity:
    def test_merging_two_pure_clusters_lowers_precision(self):
        gold = {f"i{j}": ("X" if j < 4 else "Y") for j in range(8)}
        pure = ClusterAssignment(
            labels={f"i{j}": (0 if j < 4 else 1) for j in range(8)}, num_clusters=2
        )
        merged = ClusterAssignment(labels={f"i{j}": 0 for j in range(8)}, num_clusters=1)
        assert bcubed_scores(merged, gold)[0] < bcubed_scores(pure, gold)[0]
        assert bcubed_scores(merged, gold)[1] == bcubed_scores(pure, gold)[1] == 1.0

    def test_splitting_a_class_lowers_recall(self):
        gold = {f"i{j}": "X" for j in range(6)}
        whole = ClusterAssignment(labels={f"i{j}": 0 for j in range(6)}, num_clusters=1)
        halved = ClusterAssignment(
            labels={f"i{j}": (0 if j < 3 else 1) for j in range(6)}, num_clusters=2
        )
        assert bcubed_scores(halved, gold)[1] < bcubed_scores(whole, gold)[1]
        assert bcubed_scores(halved, gold)[0] == bcubed_scores(whole, gold)[0] == 1.0


def _ranking_dataset():
    """Six instances across two lemmas and two frames, 2-d embeddings
    hand-placed so the ranking order is obvious."""
    def rec(rid, lemma, lu, frame):
        return InstanceRecord(
            id=rid, lemma=lemma, lu_id=lu, gold_frame=frame,
            v_word=np.zeros(2, dtype=np.float32) + 1.0,
            v_mask=np.zeros(2, dtype=np.float32) + 1.0,
        )

    ds = Dataset(
        [
            rec("q", "run", "run.1", "Motion"),
            rec("a", "run", "run.1", "Motion"),
            rec("b", "run", "run.2", "Escape"),
            rec("c", "walk", "walk.1", "Motion"),
            rec("d", "walk", "walk.1", "Motion"),
            rec("e", "walk", "walk.2", "Escape"),
        ]
    )
    emb = {
        "q": np.array([1.0, 0.0]),
        "a": np.array([0.95, 0.1]),   # same frame, very close
        "b": np.array([0.0, 1.0]),    # other frame, far
        "c": np.array([0.9, 0.2]),    # same frame, close
        "d": np.array([-1.0, 0.2]),   # same frame, far (missed)
        "e": np.array([0.8, 0.4]),    # other frame, close (distractor)
    }
    return ds, emb


class TestRankingRecall:
    def test_all_space(self):
        ds, emb = _ranking_dataset()
        # t=3 same-frame candidates; top-3 by cosine: a, c, e -> 2 hits
        assert ranking_recall("q", ds, emb, "all") == pytest.approx(2.0 / 3.0)

    def test_same_space(self):
        ds, emb = _ranking_dataset()
        # candidates: a (Motion), b; t=1, top-1 = a
        assert ranking_recall("q", ds, emb, "same") == 1.0

    def test_diff_space(self):
        ds, emb = _ranking_dataset()
        # candidates: c, d (Motion), e; t=2, top-2 = e, c -> 1 hit
        assert ranking_recall("q", ds, emb, "diff") == pytest.approx(0.5)

    def test_tie_breaks_by_id(self):
        ds, emb = _ranking_dataset()
        emb = dict(emb)
        # make a distractor exactly tie a true positive; smaller id wins
        emb["e"] = emb["c"].copy()
        r = ranking_recall("q", ds, emb, "all")
        assert r == pytest.approx(2.0 / 3.0)

    def test_no_same_frame_raises(self):
        ds, emb = _ranking_dataset()
        with pytest.raises(ValueError, match="no same-frame instance"):
            ranking_recall("b", ds, emb, "same")

    def test_unknown_space(self):
        ds, emb = _ranking_dataset()
        with pytest.raises(ValueError, match="unknown search space"):
            ranking_recall("q", ds, emb, "both")


class TestOverlapSplit:
    def test_partition_of_means(self):
        tagged = [("A", 1.0), ("B", 0.0), ("A", 0.5), ("C", 0.25)]
        ov, non = overlap_split_mean(tagged, train_frames={"A"})
        assert ov == pytest.approx(0.75)
        assert non == pytest.approx(0.125)

    def test_empty_sides_are_none(self):
        assert overlap_split_mean([("A", 0.5)], {"A"}) == (0.5, None)
        assert overlap_split_mean([("A", 0.5)], {"B"}) == (None, 0.5)


class TestReport:
    def test_table_row_aligns_with_header(self):
        rep = MetricsReport(
            pu=0.5, ipu=0.6, pif=0.54, bcp=0.4, bcr=0.9, bcf=0.55,
            num_clusters=7, num_plus=12,
        )
        row = rep.table_row("triplet")
        assert "triplet" in row
        assert len(TABLE_HEADER) > 0

    def test_to_dict_omits_missing_plus(self):
        rep = MetricsReport(1, 1, 1, 1, 1, 1, num_clusters=3)
        assert "num_plus" not in rep.to_dict()

    def test_score_assignment_consistent(self):
        gold = {"a": "X", "b": "X", "c": "Y"}
        pred = ClusterAssignment(labels={"a": 0, "b": 0, "c": 0}, num_clusters=1)
        rep = score_assignment(pred, gold, num_plus=2)
        assert rep.bcf == pytest.approx(5.0 / 7.0)
        assert rep.num_plus == 2
