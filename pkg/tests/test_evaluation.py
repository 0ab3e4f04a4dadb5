import csv

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose, assert_array_equal

from conftest import random_matrix
from oracles import clone_fixture, hit_ratio_oracle
from shillkit import attacks as at
from shillkit import dataset as ds
from shillkit import evaluation as ev
from shillkit.dataset import AttackBudget, RatingMatrix


class FixedScores:
    """Victim stand-in returning a fixed score matrix."""

    def __init__(self, scores):
        self.scores = np.asarray(scores, dtype=float)

    def predict_all_rows(self, users):
        return self.scores[np.asarray(users)]


class TestHitRatio:
    def test_hand_example(self):
        train = RatingMatrix.from_dense(np.array([[5, 0, 0, 0], [0, 0, 3, 0], [0, 4, 0, 0]]))
        scores = np.array([[9, 1, 2, 3], [0, 5, 9, 4], [0, 9, 1, 2]], float)
        # target 3 ranks first for users 0 and 2, second for user 1
        assert ev.hit_ratio(FixedScores(scores), train, 3, k=1) == pytest.approx(2 / 3)
        assert ev.hit_ratio(FixedScores(scores), train, 3, k=2) == 1.0

    def test_tie_goes_to_lower_index(self):
        train = RatingMatrix.from_dense(np.array([[1, 0, 0, 0]]))
        scores = np.array([[0, 2.0, 2.0, 2.0]])
        assert ev.hit_ratio(FixedScores(scores), train, 1, k=1) == 1.0
        assert ev.hit_ratio(FixedScores(scores), train, 3, k=2) == 0.0

    @pytest.mark.parametrize("seed", range(20))
    def test_brute_force(self, seed):
        rng = np.random.default_rng(seed)
        train = RatingMatrix.from_dense(random_matrix(rng, 12, 9, 0.35))
        scores = rng.integers(0, 4, (12, 9)).astype(float)
        target = int(rng.integers(9))
        k = int(rng.integers(1, 5))
        dense = train.to_dense()
        if np.all(dense[:, target] != 0):
            return
        num_real = int(rng.integers(6, 13))
        expect = hit_ratio_oracle(scores, dense, target, k, num_real)
        got = ev.hit_ratio(FixedScores(scores), train, target, k, num_real=num_real)
        assert got == pytest.approx(expect, abs=1e-15)

    def test_no_evaluation_users(self):
        train = RatingMatrix.from_dense(np.array([[5, 1], [4, 0]]))
        with pytest.raises(ev.EvaluationError):
            ev.hit_ratio(FixedScores(np.zeros((2, 2))), train, 0)

    def test_fake_users_excluded(self):
        train = RatingMatrix.from_dense(np.array([[5, 0, 1], [0, 3, 1]]))
        polluted = train.with_rows(np.array([[0, 0, 5]]), ["fake_0"])
        assert_array_equal(ev.evaluation_users(polluted, 1, train.num_users), [0])


class TestDetector:
    @pytest.mark.parametrize("seed", range(5))
    def test_clone_fixture_recall(self, seed):
        dense, truth = clone_fixture(seed)
        flagged = ev.detect(RatingMatrix.from_dense(dense), m=10, k=3)
        precision, recall = ev.precision_recall(flagged, truth)
        assert recall >= 0.8
        assert precision == recall

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**31), st.integers(1, 8))
    def test_precision_equals_recall(self, seed, m):
        rng = np.random.default_rng(seed)
        matrix = RatingMatrix.from_dense(random_matrix(rng, 15, 10, 0.4))
        truth = set(rng.choice(15, m, replace=False).tolist())
        flagged = ev.detect(matrix, m, k=2)
        assert len(flagged) == m
        p, r = ev.precision_recall(flagged, truth)
        assert p == r

    def test_constant_rows_do_not_crash(self):
        matrix = RatingMatrix.from_dense(np.array([[3, 3, 3], [1, 5, 0], [2, 0, 4], [5, 5, 5]]))
        with pytest.warns(RuntimeWarning):
            ev.pca_user_scores(matrix, k=10)

    def test_m_out_of_range(self, small_matrix):
        with pytest.raises(ev.EvaluationError):
            ev.detect(small_matrix, small_matrix.num_users + 1)
        assert ev.detect(small_matrix, 0) == set()

    def test_scores_are_pc_coefficient_norms(self):
        rng = np.random.default_rng(3)
        dense = rng.integers(0, 6, (8, 6)).astype(float)
        dense[:, 0] = 1
        scores = ev.pca_user_scores(RatingMatrix.from_dense(dense), k=2)
        Z = (dense - dense.mean(1, keepdims=True)) / dense.std(1, keepdims=True)
        vals, vecs = np.linalg.eigh(Z @ Z.T)
        top = vecs[:, np.argsort(vals)[::-1][:2]]
        assert_allclose(scores, np.sum(top ** 2, axis=1), atol=1e-10)


class TestProjection:
    def test_export(self, tmp_path, small_matrix):
        out = tmp_path / "proj.csv"
        labels = [u >= 10 for u in range(small_matrix.num_users)]
        coords = ev.export_projection(small_matrix, labels, out)
        with open(out, newline="") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["user_id", "x", "y", "is_fake"]
        assert len(rows) == small_matrix.num_users + 1
        assert [r[3] for r in rows[1:]] == [str(int(x)) for x in labels]
        assert_allclose(coords.mean(axis=0), 0, atol=1e-10)
        assert abs(coords[:, 0] @ coords[:, 1]) <= 1e-8

    def test_too_small(self, tmp_path):
        with pytest.raises(ev.EvaluationError):
            ev.export_projection(RatingMatrix.from_dense(np.array([[1.0, 2.0]])), [0],
                                 tmp_path / "p.csv")


class TestReports:
    def make(self, **kw):
        base = dict(dataset="d", attacker="a", victim="SVD", target=1, hr_before=0.0,
                    hr_after=0.5, precision=0.2, recall=0.2, num_fake=5, attack_seed=1,
                    victim_seed=2)
        base.update(kw)
        return ev.ExperimentReport(**base)

    def test_ratio_bounds(self):
        with pytest.raises(ev.EvaluationError):
            self.make(hr_after=1.5)

    def test_precision_recall_consistency(self):
        with pytest.raises(ev.EvaluationError):
            self.make(precision=0.2, recall=0.4)

    def test_round_trip(self, tmp_path):
        reports = [self.make(target=3, wall_clock=0.123456789), self.make(attacker="b")]
        ev.write_reports(reports, tmp_path / "r.csv", tmp_path / "c.json")
        back = ev.read_reports(tmp_path / "r.csv")
        assert [r.attacker for r in back] == ["a", "b"]
        assert {(r.attacker, r.target, r.wall_clock) for r in back} == {
            ("a", 3, 0.123456789), ("b", 1, 0.0)}


class TestCells:
    def test_null_attack_fixed_point(self, small_matrix):
        split = ds.DatasetSplit(small_matrix, small_matrix, 0)
        budget = AttackBudget(3, 2, (0,))
        null = lambda train, b, seed: at.null_attack(train.num_items, seed)
        r = ev.run_attack_cell(split, null, "SVD", budget, 1, 2, dict(dim=4, epochs=5))
        assert r.hr_before == r.hr_after
        assert (r.precision, r.recall, r.num_fake) == (0.0, 0.0, 0)

    def test_attack_cell(self, small_matrix):
        split = ds.DatasetSplit(small_matrix, small_matrix, 0)
        budget = AttackBudget(3, 2, (0,))
        stats = ds.stats(small_matrix)
        avg = lambda train, b, seed: at.average_attack(stats, b, seed)
        r = ev.run_attack_cell(split, avg, "SlopeOne", budget, 1, 2, attacker_label="avg")
        assert r.num_fake == 3 and r.attacker == "avg"
        assert r.precision == r.recall
