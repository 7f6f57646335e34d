"""Scoring schemes, ranking determinism, and the recall metric."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from xmrbench.embedders import EmbeddingTable
from xmrbench.scoring import (
    ClassifierHead,
    EmbeddingVector,
    ScoreMatrix,
    classifier_score,
    cosine_similarity,
    dump_scores_csv,
    make_cosine_scorer,
    rank_of_true,
    rank_reports,
    ranks_of_true_matrix,
    recall_at_k,
    score_all,
)


def random_head(rng, dim, hidden=5):
    return ClassifierHead(
        w1=rng.normal(size=(hidden, dim)),
        b1=rng.normal(size=hidden),
        w2=rng.normal(size=hidden),
        b2=float(rng.normal()),
    )


class TestCosine:
    def test_parallel(self):
        v = np.array([0.3, -0.2, 0.9])
        assert cosine_similarity(v, v) == pytest.approx(1.0)

    def test_orthogonal(self):
        assert cosine_similarity(np.array([1.0, 0.0]), np.array([0.0, 2.0])) == 0.0

    def test_worked_example(self):
        assert cosine_similarity(np.array([1.0, 2, 2]), np.array([2.0, 1, 2])) == \
            pytest.approx(8 / 9)

    def test_zero_norm_warns_and_scores_zero(self):
        with pytest.warns(RuntimeWarning, match="zero-norm"):
            assert cosine_similarity(np.zeros(3), np.ones(3)) == 0.0

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError, match="mismatch"):
            cosine_similarity(np.ones(3), np.ones(4))

    @given(
        a=arrays(np.float64, 4, elements=st.integers(-1000, 1000).map(lambda i: i / 100)),
        b=arrays(np.float64, 4, elements=st.integers(-1000, 1000).map(lambda i: i / 100)),
        alpha=st.floats(0.01, 50),
        beta=st.floats(0.01, 50),
    )
    def test_symmetric_and_scale_invariant(self, a, b, alpha, beta):
        if np.linalg.norm(a) == 0 or np.linalg.norm(b) == 0:
            return
        assert cosine_similarity(a, b) == pytest.approx(cosine_similarity(b, a))
        assert cosine_similarity(alpha * a, beta * b) == \
            pytest.approx(cosine_similarity(a, b), abs=1e-9)

    def test_accepts_embedding_vectors(self):
        a = EmbeddingVector(id="a", values=np.array([1.0, 0.0]))
        b = EmbeddingVector(id="b", values=np.array([1.0, 0.0]))
        assert cosine_similarity(a, b) == pytest.approx(1.0)


class TestClassifierScore:
    def test_zero_head_gives_half(self):
        head = ClassifierHead(w1=np.zeros((4, 3)), b1=np.zeros(4), w2=np.zeros(4), b2=0.0)
        assert classifier_score(np.ones(3), np.zeros(3), head) == 0.5

    def test_equal_vectors_give_sigmoid_of_output_bias(self):
        rng = np.random.default_rng(0)
        head = ClassifierHead(
            w1=rng.normal(size=(4, 3)), b1=np.zeros(4), w2=rng.normal(size=4), b2=0.7,
        )
        v = rng.normal(size=3)
        expected = 1.0 / (1.0 + np.exp(-0.7))
        assert classifier_score(v, v, head) == pytest.approx(expected)

    def test_matches_hand_rolled_forward_pass(self):
        # independent re-implementation of the two-layer computation
        rng = np.random.default_rng(42)
        for _ in range(25):
            dim, hidden = int(rng.integers(2, 8)), int(rng.integers(1, 6))
            head = random_head(rng, dim, hidden)
            vi, vt = rng.normal(size=(2, dim))
            d = [abs(vi[j] - vt[j]) for j in range(dim)]
            h = [max(sum(head.w1[i][j] * d[j] for j in range(dim)) + head.b1[i], 0.0)
                 for i in range(hidden)]
            z = sum(head.w2[i] * h[i] for i in range(hidden)) + head.b2
            expected = 1.0 / (1.0 + np.exp(-z))
            assert classifier_score(vi, vt, head) == pytest.approx(expected, rel=1e-12)

    def test_symmetric_in_arguments(self):
        rng = np.random.default_rng(5)
        head = random_head(rng, 6)
        vi, vt = rng.normal(size=(2, 6))
        assert classifier_score(vi, vt, head) == classifier_score(vt, vi, head)

    def test_output_in_open_interval(self):
        rng = np.random.default_rng(9)
        head = random_head(rng, 4)
        for _ in range(50):
            s = classifier_score(rng.normal(size=4), rng.normal(size=4), head)
            assert 0.0 < s < 1.0

    def test_dimension_mismatch(self):
        head = random_head(np.random.default_rng(0), 4)
        with pytest.raises(ValueError):
            classifier_score(np.ones(5), np.ones(5), head)


class TestScoreAll:
    def make_tables(self, rng, m, n, d):
        imgs = EmbeddingTable.from_pairs(
            [(f"i{i}", rng.normal(size=d)) for i in range(m)])
        reps = EmbeddingTable.from_pairs(
            [(f"r{j}", rng.normal(size=d)) for j in range(n)])
        return imgs, reps

    def test_identity_pair(self):
        imgs = EmbeddingTable.from_pairs([("i0", np.array([1.0, 2.0]))])
        reps = EmbeddingTable.from_pairs([("r0", np.array([1.0, 2.0]))])
        m = score_all(imgs, reps, make_cosine_scorer())
        assert m.scores.tolist() == [[pytest.approx(1.0)]]

    def test_shape(self):
        rng = np.random.default_rng(1)
        imgs, reps = self.make_tables(rng, 3, 4, 5)
        m = score_all(imgs, reps, make_cosine_scorer())
        assert m.scores.shape == (3, 4)
        assert m.image_ids == ("i0", "i1", "i2")
        assert m.report_ids == ("r0", "r1", "r2", "r3")

    def test_bitwise_equal_to_naive_double_loop(self):
        rng = np.random.default_rng(2)
        imgs, reps = self.make_tables(rng, 6, 7, 9)
        m = score_all(imgs, reps, cosine_similarity)
        for i in range(6):
            for j in range(7):
                expected = cosine_similarity(
                    imgs.vectors[i].astype(np.float64), reps.vectors[j].astype(np.float64)
                )
                assert m.scores[i, j] == expected  # exact, same summation order

    def test_scorer_error_names_pair(self):
        imgs = EmbeddingTable.from_pairs([("img-a", np.zeros(2))])
        reps = EmbeddingTable.from_pairs([("rep-b", np.ones(2))])

        def broken(a, b):
            raise ArithmeticError("boom")

        with pytest.raises(RuntimeError, match="img-a.*rep-b"):
            score_all(imgs, reps, broken)

    def test_empty_tables_rejected(self):
        imgs = EmbeddingTable.from_pairs([], dim=3)
        reps = EmbeddingTable.from_pairs([("r", np.ones(3))])
        with pytest.raises(ValueError, match="non-empty"):
            score_all(imgs, reps, make_cosine_scorer())


class TestRankReports:
    def test_orders_descending(self):
        assert rank_reports(np.array([0.1, 0.9, 0.5]), ["r1", "r2", "r3"]) == \
            ["r2", "r3", "r1"]

    def test_all_equal_keeps_original_order(self):
        assert rank_reports(np.array([0.5, 0.5, 0.5]), ["a", "b", "c"]) == ["a", "b", "c"]

    @given(scores=st.lists(st.sampled_from([0.0, 0.25, 0.5, 0.75, 1.0]), min_size=1, max_size=30))
    def test_matches_reference_stable_sort(self, scores):
        ids = [f"r{i}" for i in range(len(scores))]
        expected = [ids[i] for i in sorted(range(len(scores)),
                                           key=lambda i: (-scores[i], i))]
        assert rank_reports(np.array(scores), ids) == expected

    def test_rejects_nan(self):
        with pytest.raises(ValueError, match="finite"):
            rank_reports(np.array([0.1, np.nan]), ["a", "b"])

    @given(
        scores=st.lists(st.sampled_from([0.0, 0.5, 1.0]) | st.floats(-1, 1),
                        min_size=1, max_size=20),
        true=st.integers(0, 19),
    )
    def test_rank_of_true_agrees_with_full_ranking(self, scores, true):
        if true >= len(scores):
            return
        row = np.array(scores)
        ids = [f"r{i}" for i in range(len(scores))]
        assert rank_of_true(row, true) == rank_reports(row, ids).index(f"r{true}") + 1

    def test_matrix_ranks_agree_with_scalar(self):
        rng = np.random.default_rng(3)
        scores = rng.choice([0.0, 0.25, 0.5], size=(20, 9))
        true = rng.integers(0, 9, size=20)
        mat = ranks_of_true_matrix(scores, true)
        for i in range(20):
            assert mat[i] == rank_of_true(scores[i], true[i])


class TestRecallAtK:
    def ranked(self, order):
        return [f"r{i}" for i in order]

    def test_perfect_retrieval(self):
        rankings = [self.ranked([0, 1, 2]), self.ranked([1, 0, 2])]
        truth = {"q0": "r0", "q1": "r1"}
        for k in (1, 2, 3):
            assert recall_at_k(rankings, truth, k, query_ids=["q0", "q1"]) == 100.0

    def test_ranks_1_3_7_at_k2(self):
        # true reports land at ranks 1, 3, 7 of ten candidates; only the
        # first query scores within k=2, so recall is 1/3.
        order = list(range(10))
        rankings = [
            self.ranked([0] + order[1:]),
            self.ranked([1, 2, 0] + order[3:]),
            self.ranked([1, 2, 3, 4, 5, 6, 0, 7, 8, 9]),
        ]
        truth = {f"q{i}": "r0" for i in range(3)}
        got = recall_at_k(rankings, truth, 2, query_ids=["q0", "q1", "q2"])
        assert got == pytest.approx(100.0 / 3)
        assert f"{got:.2f}" == "33.33"

    def test_k_clamped_with_warning(self):
        rankings = [self.ranked([1, 0])]
        truth = {"q": "r0"}
        with pytest.warns(RuntimeWarning, match="clamp"):
            assert recall_at_k(rankings, truth, 10, query_ids=["q"]) == 100.0

    def test_k_below_one_rejected(self):
        with pytest.raises(ValueError):
            recall_at_k([self.ranked([0])], {"q": "r0"}, 0, query_ids=["q"])

    @given(seed=st.integers(0, 1000))
    @settings(max_examples=25, deadline=None)
    def test_monotone_in_k_and_total_at_n(self, seed):
        rng = np.random.default_rng(seed)
        n = 12
        rankings = [self.ranked(rng.permutation(n)) for _ in range(8)]
        truth = {f"q{i}": f"r{rng.integers(0, n)}" for i in range(8)}
        ids = list(truth)
        values = [recall_at_k(rankings, truth, k, query_ids=ids) for k in range(1, n + 1)]
        assert all(a <= b for a, b in zip(values, values[1:]))
        assert values[-1] == 100.0

    def test_permutation_invariance(self):
        # permuting candidate order does not change recall once ranks are fixed
        rng = np.random.default_rng(4)
        n = 10
        scores = rng.random((6, n))
        truth_idx = rng.integers(0, n, size=6)
        ids = [f"r{j}" for j in range(n)]
        base_rankings = [rank_reports(scores[i], ids) for i in range(6)]
        truth = {f"q{i}": ids[truth_idx[i]] for i in range(6)}
        qids = list(truth)
        base = recall_at_k(base_rankings, truth, 3, query_ids=qids)

        perm = rng.permutation(n)
        perm_ids = [ids[p] for p in perm]
        perm_rankings = [rank_reports(scores[i][perm], perm_ids) for i in range(6)]
        assert recall_at_k(perm_rankings, truth, 3, query_ids=qids) == base


class TestScoreMatrix:
    def test_validates_shape(self):
        with pytest.raises(ValueError, match="shape"):
            ScoreMatrix(image_ids=("a",), report_ids=("r",), scores=np.zeros((2, 1)))

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError, match="finite"):
            ScoreMatrix(image_ids=("a",), report_ids=("r",),
                        scores=np.array([[np.inf]]))

    def test_dump_csv(self, tmp_path):
        m = ScoreMatrix(image_ids=("i0", "i1"), report_ids=("r0",),
                        scores=np.array([[0.5], [0.25]]))
        path = tmp_path / "scores.csv"
        dump_scores_csv(m, path)
        lines = path.read_text().splitlines()
        assert lines[0] == "image_id,report_id,score"
        assert lines[1] == "i0,r0,0.5"
        assert len(lines) == 3
