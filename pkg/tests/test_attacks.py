import numpy as np
import pytest
from scipy.stats import chisquare
from numpy.testing import assert_array_equal

from shillkit import attacks as at
from shillkit import dataset as ds
from shillkit.dataset import AttackBudget, RatingMatrix


def const_matrix(value, n=6, m=10):
    return RatingMatrix.from_dense(np.full((n, m), float(value)))


def check_batch(batch, budget, exact_fillers=True, extra=()):
    rows = batch.rows
    assert rows.shape[0] == budget.attack_size
    assert np.all(rows[:, list(budget.targets)] == budget.rating_max)
    nz = rows[rows != 0]
    assert nz.min() >= 1 and nz.max() <= budget.rating_max
    special = list(budget.targets) + list(budget.selected) + list(extra)
    fill = np.count_nonzero(np.delete(rows, special, axis=1), axis=1)
    if exact_fillers is None:
        return
    if exact_fillers:
        assert np.all(fill == budget.profile_size)
    else:
        assert np.all(fill <= budget.profile_size)


class TestRandomAttack:
    def test_degenerate_gaussian(self):
        st = ds.stats(const_matrix(3))
        b = AttackBudget(4, 5, (0,))
        batch = at.random_attack(st, b, seed=0)
        check_batch(batch, b)
        fillers = np.delete(batch.rows, [0], axis=1)
        assert set(fillers[fillers != 0].tolist()) == {3}

    def test_clipping(self):
        assert_array_equal(at._round_ratings(np.array([6.2, -1.0, 2.4]), 5), [5, 1, 2])

    def test_attack_size(self, ml100k_split):
        b = AttackBudget(50, 90, (10,))
        batch = at.random_attack(ds.stats(ml100k_split.train), b, 1)
        assert len(batch) == 50
        check_batch(batch, b)

    def test_positions_uniform(self):
        rng = np.random.default_rng(0)
        dense = rng.integers(1, 6, (5, 21)).astype(float)
        st = ds.stats(RatingMatrix.from_dense(dense))
        b = AttackBudget(2000, 5, (0,))
        batch = at.random_attack(st, b, seed=11)
        counts = np.count_nonzero(batch.rows[:, 1:], axis=0)
        assert counts.sum() == 10_000
        assert chisquare(counts).pvalue > 0.001


class TestAverageAttack:
    def test_item_moments(self):
        dense = np.full((5, 6), 2.0)
        dense[:, 3] = 4.0
        st = ds.stats(RatingMatrix.from_dense(dense))
        batch = at.average_attack(st, AttackBudget(10, 5, (0,)), seed=0)
        assert np.all(batch.rows[:, 3] == 4)
        assert np.all(batch.rows[:, [1, 2, 4, 5]] == 2)

    def test_unrated_items_never_fillers(self):
        dense = np.zeros((4, 8))
        dense[:, :5] = 3.0
        st = ds.stats(RatingMatrix.from_dense(dense))
        b = AttackBudget(20, 3, (0,))
        batch = at.average_attack(st, b, seed=2)
        assert np.all(batch.rows[:, 5:] == 0)
        check_batch(batch, b)

    def test_positions_uniform(self):
        rng = np.random.default_rng(1)
        dense = rng.integers(1, 6, (5, 26)).astype(float)
        st = ds.stats(RatingMatrix.from_dense(dense))
        batch = at.average_attack(st, AttackBudget(1000, 10, (0,)), seed=5)
        counts = np.count_nonzero(batch.rows[:, 1:], axis=0)
        assert chisquare(counts).pvalue > 0.001


class TestSegmentAttack:
    def test_ratings(self):
        b = AttackBudget(6, 4, (0,), selected=(1, 2, 3))
        batch = at.segment_attack(b, 0, num_items=20)
        check_batch(batch, b)
        assert np.all(batch.rows[:, [1, 2, 3]] == 5)
        fill = np.delete(batch.rows, [0, 1, 2, 3], axis=1)
        assert set(fill[fill != 0].tolist()) == {1}

    def test_needs_selected(self):
        with pytest.raises(ValueError):
            at.segment_attack(AttackBudget(2, 2, (0,)), 0, 10)


class TestBandwagonAttack:
    def test_most_popular_selected(self):
        dense = np.zeros((6, 8))
        dense[:, 4] = 3
        dense[:4, 2] = 3
        dense[0, :] = np.where(dense[0] == 0, 2, dense[0])
        st = ds.stats(RatingMatrix.from_dense(dense))
        b = AttackBudget(5, 3, (4,))
        batch = at.bandwagon_attack(st, b, 0, num_selected=1)
        assert np.all(batch.rows[:, 2] == 5)
        assert np.all(np.count_nonzero(batch.rows, axis=1) == 1 + 3 + 1)

    def test_sigma_zero(self):
        st = ds.stats(const_matrix(4))
        batch = at.bandwagon_attack(st, AttackBudget(3, 4, (0,), selected=(1,)), 0)
        fill = np.delete(batch.rows, [0, 1], axis=1)
        assert set(fill[fill != 0].tolist()) == {4}


class TestDeterminism:
    @pytest.mark.parametrize("name", ["random", "average", "segment", "bandwagon"])
    def test_byte_identical(self, name, small_matrix):
        st = ds.stats(small_matrix)
        b = AttackBudget(5, 4, (0,), selected=(1,))
        run = {"random": lambda s: at.random_attack(st, b, s),
               "average": lambda s: at.average_attack(st, b, s),
               "segment": lambda s: at.segment_attack(b, s, st.num_items),
               "bandwagon": lambda s: at.bandwagon_attack(st, b, s)}[name]
        assert run(7).to_bytes() == run(7).to_bytes()
        assert run(7).to_bytes() != run(8).to_bytes()


class TestAIA:
    def test_zero_steps_returns_templates(self, small_matrix):
        b = AttackBudget(4, 3, (0,))
        batch = at.aia_attack(small_matrix, b, at.AIAConfig(steps=0), seed=3)
        dense = small_matrix.to_dense()
        expect = dense[list(batch.template_users)].astype(np.int64)
        expect[:, 0] = 5
        assert_array_equal(batch.rows, expect)

    def test_loss_not_above_initial(self, small_matrix):
        b = AttackBudget(4, 3, (2,))
        cfg = at.AIAConfig(steps=15, inner_lr=0.05, pretrain_steps=200, lr=0.3)
        batch = at.aia_attack(small_matrix, b, cfg, seed=0)
        loss = batch.info["loss"]
        assert len(loss) == 15
        assert min(loss) < loss[0]
        check_batch(batch, b, exact_fillers=None)  # AIA has no profile-size limit

    def test_pattern_is_template_pattern(self, small_matrix):
        b = AttackBudget(3, 2, (1,))
        batch = at.aia_attack(small_matrix, b, at.AIAConfig(steps=3), seed=1)
        dense = small_matrix.to_dense()
        support = dense[list(batch.template_users)] != 0
        support[:, 1] = True
        assert_array_equal(batch.rows != 0, support)

    def test_deterministic(self, small_matrix):
        b = AttackBudget(3, 2, (1,))
        cfg = at.AIAConfig(steps=3)
        assert (at.aia_attack(small_matrix, b, cfg, 4).to_bytes()
                == at.aia_attack(small_matrix, b, cfg, 4).to_bytes())


class TestNull:
    def test_empty(self):
        assert len(at.null_attack(7)) == 0
