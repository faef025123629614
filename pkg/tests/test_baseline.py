import numpy as np
import pytest

from distpac import channel
from distpac.baseline import (ConjunctionElimination, HalvingLearner,
                              eq_mistake_bound, sample_shipping,
                              shipping_sample_size)
from distpac.closed import smallest_consistent
from distpac.core import (Conjunction, ProtocolError, Sample, UniformBoolean,
                          draw_sample, sample_error, stream)

from conftest import threshold_grid


def boolean_sample(n, f, m, seed):
    return draw_sample(UniformBoolean(n), f, m, seed, tags=("bl", n))


class TestHalving:
    def test_mistake_bound_is_log_class_size(self):
        assert HalvingLearner(threshold_grid(128)).mistake_bound() == 8

    def test_counterexample_halves_survivors(self):
        learner = HalvingLearner(threshold_grid())
        before = len(learner.survivors)
        h = learner.hypothesis()
        x = np.array([0.3])
        wrong_label = -int(h.predict(x[None, :])[0])
        learner.update(x, wrong_label)
        assert len(learner.survivors) <= before // 2
        assert all(int(g.predict(x[None, :])[0]) == wrong_label
                   for g in learner.survivors)

    def test_empty_class_raises(self):
        learner = HalvingLearner(threshold_grid(3))
        with pytest.raises(ProtocolError):
            # same point with both labels wipes everything out
            learner.update(np.array([0.5]), 1)
            learner.update(np.array([0.5]), -1)


class TestConjunctionElimination:
    def test_positive_drops_zero_variables(self):
        learner = ConjunctionElimination(4)
        learner.update(np.array([1.0, 0.0, 1.0, 0.0]), 1)
        assert learner.hypothesis().variables == frozenset({0, 2})

    def test_mistake_bound(self):
        assert ConjunctionElimination(9).mistake_bound() == 10

    def test_unrealizable_negative_raises(self):
        learner = ConjunctionElimination(2)
        learner.update(np.array([1.0, 1.0]), 1)  # hypothesis now empty-ish
        with pytest.raises(ProtocolError):
            learner.update(np.array([1.0, 1.0]), -1)


class TestSampleShipping:
    def test_budget_formula(self):
        # ceil((8/4) * (10/0.1) * ln 10) = ceil(460.517)
        assert shipping_sample_size(10, 0.1, 4) == 461

    def test_agnostic_scales_inverse_eps_squared(self):
        # same formula with one extra 1/eps factor: ceil(2 * 1000 * ln 10)
        assert shipping_sample_size(10, 0.1, 4, agnostic=True) == 4606

    def test_one_round_and_all_examples_charged(self):
        n, k = 8, 3
        f = Conjunction(n, frozenset({0, 5}))
        res = sample_shipping([UniformBoolean(n)] * k, f, 0.1, 0.05,
                              lambda s: smallest_consistent(s, "conjunction"),
                              n, 0)
        m_i = res.meta["m_per_player"]
        assert res.ledger.rounds == 1
        assert res.ledger.examples == k * m_i
        assert res.ledger.bits == k * m_i * (n + 1)
        assert res.errors["mixture"] <= 0.1


class TestEqDriver:
    def test_conjunction_elimination_under_mistake_bound(self):
        n = 12
        f = Conjunction(n, frozenset({1, 4, 7}))
        samples = [boolean_sample(n, f, 150, s) for s in (0, 1, 2)]
        res = eq_mistake_bound(samples, ConjunctionElimination(n))
        assert res.ledger.examples <= n + 1
        # one slot per counterexample plus the final quiet slot
        assert res.ledger.rounds == res.ledger.examples + 1
        h = res.hypotheses[channel.CENTER]
        assert all(sample_error(h, s) == 0.0 for s in samples)

    def test_halving_under_log_bound(self):
        grid = threshold_grid(64)
        target = grid[40]
        rng = stream(5, "eq_halving")
        X = rng.random((120, 1))
        s = Sample(X, target.predict(X))
        res = eq_mistake_bound([s], HalvingLearner(grid))
        assert res.ledger.examples <= 7  # floor(log2 128)

    def test_counterexamples_broadcast_only(self):
        n = 6
        f = Conjunction(n, frozenset({2}))
        samples = [boolean_sample(n, f, 80, 9)]
        res = eq_mistake_bound(samples, ConjunctionElimination(n))
        assert res.ledger.bits == res.ledger.examples * (n + 1)
        assert set(res.ledger.per_player) <= {"p1"}

    def test_mistake_cap_trips_on_broken_learner(self):
        class Stubborn(ConjunctionElimination):
            def update(self, x, label):
                pass

        n = 5
        f = Conjunction(n, frozenset({0}))
        samples = [boolean_sample(n, f, 60, 3)]
        with pytest.raises(ProtocolError):
            eq_mistake_bound(samples, Stubborn(n), mistake_cap=4)
