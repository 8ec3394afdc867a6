import numpy as np
import pytest

from frameforge.harness import (
    BudgetSpec,
    GridSpec,
    average_reports,
    run_cv,
    run_fold,
    subsample_by_lu,
    _threshold_candidates,
)
from frameforge.metrics import MetricsReport
from frameforge.training import TrainConfig

from _synthetic import make_corpus


@pytest.fixture(scope="module")
def corpus():
    return make_corpus(
        seed=11, n_lemmas=9, n_frames=4, poly_frac=0.34, dim=8,
        signal_dims=4, inst_per_lu=6,
    )


@pytest.fixture(scope="module")
def split(corpus):
    from frameforge import make_splits

    return make_splits(corpus, seed=1)


SMALL_GRID = GridSpec(
    alphas=(0.0, 0.5, 1.0),
    margins={"triplet": (0.5,), "contrastive": (0.5,), "arcface": (0.05,)},
    max_threshold_candidates=8,
)


class TestBudgetSpec:
    def test_validation(self):
        BudgetSpec(1)
        BudgetSpec("all")
        with pytest.raises(ValueError):
            BudgetSpec(0)
        with pytest.raises(ValueError):
            BudgetSpec("some")

    def test_is_all(self):
        assert BudgetSpec("all").is_all
        assert not BudgetSpec(3).is_all


class TestSubsample:
    def test_cap_respected(self, corpus):
        sub = subsample_by_lu(corpus, BudgetSpec(2), seed=0)
        per_lu = {}
        for rec in sub.records:
            per_lu[rec.lu_id] = per_lu.get(rec.lu_id, 0) + 1
        assert max(per_lu.values()) <= 2

    def test_preserves_lu_and_frame_sets(self, corpus):
        sub = subsample_by_lu(corpus, BudgetSpec(1), seed=0)
        assert {r.lu_id for r in sub.records} == {r.lu_id for r in corpus.records}
        assert sub.frames() == corpus.frames()
        assert sub.lemmas() == corpus.lemmas()

    def test_budgets_are_nested(self, corpus):
        ids = {
            b: {r.id for r in subsample_by_lu(corpus, BudgetSpec(b), seed=3).records}
            for b in (1, 2, 4)
        }
        assert ids[1] <= ids[2] <= ids[4]

    def test_all_is_identity(self, corpus):
        assert subsample_by_lu(corpus, BudgetSpec("all"), seed=0) is corpus

    def test_deterministic_and_order_preserving(self, corpus):
        a = subsample_by_lu(corpus, BudgetSpec(2), seed=5)
        b = subsample_by_lu(corpus, BudgetSpec(2), seed=5)
        assert [r.id for r in a.records] == [r.id for r in b.records]
        original_order = [r.id for r in corpus.records if r.id in {x.id for x in a.records}]
        assert [r.id for r in a.records] == original_order


class TestThresholdCandidates:
    def test_includes_value_past_max(self):
        cands = _threshold_candidates([0.5, 1.0, 2.0], max_candidates=10)
        assert cands[-1] > 2.0
        assert all(b > a for a, b in zip(cands, cands[1:]))

    def test_caps_candidate_count(self):
        dists = list(np.linspace(0.1, 5.0, 200))
        cands = _threshold_candidates(dists, max_candidates=50)
        assert len(cands) <= 51

    def test_empty_input(self):
        assert _threshold_candidates([], max_candidates=10) == [0.0]


class TestGridSpec:
    def test_margin_candidates_fallback(self):
        grid = GridSpec()
        assert grid.margin_candidates("softmax") == (None,)
        assert grid.margin_candidates("triplet") == (0.1, 0.2, 0.5, 1.0)

    def test_alpha_grid(self):
        grid = GridSpec()
        assert grid.alphas[0] == 0.0
        assert grid.alphas[-1] == 1.0
        assert len(grid.alphas) == 11


class TestRunFold:
    @pytest.mark.parametrize("mode", ["one_step", "two_step"])
    def test_selection_is_dev_argmax(self, corpus, split, mode):
        cfg = TrainConfig(learning_rate=0.02, epochs=2, seed=0)
        fr = run_fold(corpus, split, 0, "triplet", mode, SMALL_GRID, cfg)
        best_row = max(fr.grid_rows, key=lambda r: r.dev_bcf)
        assert fr.dev_bcf == pytest.approx(best_row.dev_bcf)
        chosen = (fr.margin, fr.alpha, fr.threshold)
        assert any(
            (r.margin, r.alpha, r.threshold) == chosen
            and r.dev_bcf == pytest.approx(fr.dev_bcf)
            for r in fr.grid_rows
        )

    def test_tie_break_prefers_smaller_alpha_then_threshold(self, corpus, split):
        cfg = TrainConfig(learning_rate=0.0, weight_decay=0.0, epochs=1, seed=0)
        fr = run_fold(corpus, split, 0, "vanilla", "one_step", SMALL_GRID, cfg)
        ties = [
            r for r in fr.grid_rows if r.dev_bcf == pytest.approx(fr.dev_bcf)
        ]
        best = min(ties, key=lambda r: (r.alpha, r.threshold))
        assert (fr.alpha, fr.threshold) == (best.alpha, best.threshold)

    def test_deterministic(self, corpus, split):
        cfg = TrainConfig(learning_rate=0.02, epochs=2, seed=4)
        a = run_fold(corpus, split, 1, "adacos", "two_step", SMALL_GRID, cfg)
        b = run_fold(corpus, split, 1, "adacos", "two_step", SMALL_GRID, cfg)
        assert a.test_report.to_dict() == b.test_report.to_dict()
        assert (a.margin, a.alpha, a.threshold) == (b.margin, b.alpha, b.threshold)
        assert np.array_equal(a.checkpoint.encoder.weight, b.checkpoint.encoder.weight)

    def test_budget_shrinks_training_only(self, corpus, split):
        cfg = TrainConfig(learning_rate=0.02, epochs=1, seed=0)
        fr = run_fold(
            corpus, split, 0, "softmax", "one_step", SMALL_GRID, cfg,
            budget=BudgetSpec(1),
        )
        # test report covers the full test fold regardless of budget
        test_fold_lemmas = split.lemmas_in_fold(3)
        n_test = sum(1 for r in corpus.records if r.lemma in test_fold_lemmas)
        assert fr.test_report.num_clusters >= 1
        assert len(fr.checkpoint.encoder.bias) == corpus.dim
        assert n_test > 0


class TestAverages:
    def test_average_reports(self):
        r1 = MetricsReport(0.2, 0.4, 0.3, 0.2, 0.4, 0.3, num_clusters=4, num_plus=6)
        r2 = MetricsReport(0.4, 0.6, 0.5, 0.4, 0.6, 0.5, num_clusters=7, num_plus=9)
        avg = average_reports([r1, r2])
        assert avg.pu == pytest.approx(0.3)
        assert avg.bcf == pytest.approx(0.4)
        assert avg.num_clusters == round(5.5)
        assert avg.num_plus == round(7.5)

    def test_average_without_plus(self):
        r1 = MetricsReport(1, 1, 1, 1, 1, 1, num_clusters=2)
        r2 = MetricsReport(0, 0, 0, 0, 0, 0, num_clusters=4, num_plus=3)
        assert average_reports([r1, r2]).num_plus is None


class TestRunCv:
    def test_three_folds_and_average(self, corpus, split):
        cfg = TrainConfig(learning_rate=0.02, epochs=1, seed=0)
        cv = run_cv(corpus, split, "vanilla", "one_step", SMALL_GRID, cfg)
        assert len(cv.folds) == 3
        assert cv.average.bcf == pytest.approx(
            sum(f.test_report.bcf for f in cv.folds) / 3
        )
        assert [f.rotation for f in cv.folds] == [0, 1, 2]
