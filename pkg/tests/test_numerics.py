import numpy as np
import pytest

from trustsup.errors import NumericError
from trustsup.numerics import AdamState, adam_step, dirichlet, finite_diff_grad, seeded_rng


def reference_adam(params, grads, lr=0.01, beta1=0.9, beta2=0.999, eps=1e-8, steps=1):
    """Independent textbook adam evaluation used as the oracle."""
    p = np.array(params, dtype=float)
    m = np.zeros_like(p)
    v = np.zeros_like(p)
    for t in range(1, steps + 1):
        m = beta1 * m + (1 - beta1) * grads
        v = beta2 * v + (1 - beta2) * grads ** 2
        m_hat = m / (1 - beta1 ** t)
        v_hat = v / (1 - beta2 ** t)
        p = p - lr * m_hat / (np.sqrt(v_hat) + eps)
    return p


class TestAdam:
    def test_zero_gradient_is_fixed_point(self):
        params = np.array([1.0, -2.0, 0.5])
        state = AdamState.for_size(3)
        adam_step(params, np.zeros(3), state)
        assert np.array_equal(params, [1.0, -2.0, 0.5])
        assert state.step == 1

    def test_single_step_matches_hand_evaluation(self):
        params = np.array([1.0])
        state = AdamState.for_size(1, lr=0.01)
        adam_step(params, np.array([1.0]), state)
        expected = reference_adam([1.0], np.array([1.0]), steps=1)
        assert params[0] < 1.0
        assert params[0] == pytest.approx(expected[0], abs=1e-15)
        # after bias correction the very first update has magnitude ~ lr
        assert abs(1.0 - params[0]) == pytest.approx(0.01, rel=1e-6)

    def test_consecutive_steps_move_against_gradient_sign(self):
        params = np.array([1.0, -1.0])
        grads = np.array([2.0, -3.0])
        state = AdamState.for_size(2, lr=0.01)
        previous = params.copy()
        for _ in range(2):
            adam_step(params, grads, state)
            assert params[0] < previous[0]
            assert params[1] > previous[1]
            previous = params.copy()
        assert np.allclose(params, reference_adam([1.0, -1.0], grads, steps=2))

    def test_shape_mismatch_rejected(self):
        state = AdamState.for_size(2)
        with pytest.raises(NumericError):
            adam_step(np.zeros(2), np.zeros(3), state)
        with pytest.raises(NumericError):
            adam_step(np.zeros(3), np.zeros(3), state)

    def test_non_finite_gradient_names_index(self):
        state = AdamState.for_size(3)
        grads = np.array([0.0, np.nan, 1.0])
        with pytest.raises(NumericError, match="index 1"):
            adam_step(np.zeros(3), grads, state)


class TestFiniteDiff:
    def test_quadratic(self):
        grad = finite_diff_grad(lambda x: float(x[0] ** 2), np.array([3.0]), h=1e-5)
        assert grad[0] == pytest.approx(6.0, abs=1e-6)

    def test_constant_function(self):
        grad = finite_diff_grad(lambda x: 4.2, np.array([1.0, -2.0, 7.0]), h=1e-5)
        assert np.array_equal(grad, np.zeros(3))

    def test_sum_of_squares(self):
        grad = finite_diff_grad(lambda x: float(np.sum(x ** 2)), np.array([1.0, 2.0]), h=1e-5)
        assert grad == pytest.approx([2.0, 4.0], abs=1e-6)

    def test_non_finite_value_rejected(self):
        with pytest.raises(NumericError):
            finite_diff_grad(lambda x: float("inf"), np.array([0.0]), h=1e-5)

    def test_bad_step_rejected(self):
        with pytest.raises(NumericError):
            finite_diff_grad(lambda x: 0.0, np.array([0.0]), h=0.0)


class TestSeededRng:
    def test_same_seed_same_stream(self):
        a = seeded_rng(123).uniform(size=100)
        b = seeded_rng(123).uniform(size=100)
        assert np.array_equal(a, b)

    def test_sequence_seed_derives_distinct_stream(self):
        a = seeded_rng([5, 0]).uniform(size=10)
        b = seeded_rng([5, 1]).uniform(size=10)
        assert not np.array_equal(a, b)

    def test_dirichlet_on_simplex(self):
        draw = dirichlet(seeded_rng(0), np.ones(3))
        assert (draw >= 0).all()
        assert abs(draw.sum() - 1.0) <= 1e-12

    def test_dirichlet_rejects_nonpositive_alpha(self):
        with pytest.raises(NumericError):
            dirichlet(seeded_rng(0), [1.0, 0.0, 1.0])
        with pytest.raises(NumericError):
            dirichlet(seeded_rng(0), [1.0, -0.5])

    def test_integer_range_frequencies(self):
        draws = seeded_rng(42).integers(0, 6, size=100_000)
        freqs = np.bincount(draws, minlength=6) / draws.size
        assert np.abs(freqs - 1.0 / 6.0).max() <= 0.01
