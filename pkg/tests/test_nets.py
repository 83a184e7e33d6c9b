"""Dense-net machinery: initialization, manual gradients vs central finite
differences, the moment optimizer, norm clipping, and running normalization."""

import numpy as np
import pytest
from conftest import fd_gradient

from latticeworm.nets import (
    MLP,
    Adam,
    RunningNorm,
    clip_by_global_norm,
    global_norm,
    orthogonal,
)


class TestOrthogonalInit:
    def test_tall_matrix_has_orthonormal_columns(self):
        w = orthogonal(np.random.default_rng(0), 8, 3, gain=1.0)
        assert w.shape == (8, 3)
        np.testing.assert_allclose(w.T @ w, np.eye(3), atol=1e-12)

    def test_wide_matrix_has_orthonormal_rows(self):
        w = orthogonal(np.random.default_rng(0), 3, 8, gain=1.0)
        assert w.shape == (3, 8)
        np.testing.assert_allclose(w @ w.T, np.eye(3), atol=1e-12)

    def test_gain_scales_linearly(self):
        rng1 = np.random.default_rng(7)
        rng2 = np.random.default_rng(7)
        w1 = orthogonal(rng1, 5, 5, gain=1.0)
        w2 = orthogonal(rng2, 5, 5, gain=0.01)
        np.testing.assert_allclose(w2, 0.01 * w1, rtol=1e-15)

    def test_same_seed_reproduces(self):
        w1 = orthogonal(np.random.default_rng(3), 6, 4, gain=2.0)
        w2 = orthogonal(np.random.default_rng(3), 6, 4, gain=2.0)
        np.testing.assert_array_equal(w1, w2)


class TestMLPForward:
    def test_zero_parameters_give_zero_output(self):
        net = MLP([4, 8, 8, 3], np.random.default_rng(0))
        for w in net.weights:
            w[:] = 0.0
        out = net.forward(np.random.default_rng(1).standard_normal((5, 4)))
        np.testing.assert_array_equal(out, np.zeros((5, 3)))

    def test_identical_inputs_identical_outputs(self):
        net = MLP([4, 8, 3], np.random.default_rng(0))
        x = np.random.default_rng(1).standard_normal(4)
        np.testing.assert_array_equal(net.forward(x), net.forward(x))

    def test_single_observation_promoted_to_batch(self):
        net = MLP([4, 8, 3], np.random.default_rng(0))
        row = np.random.default_rng(1).standard_normal(4)
        single = net.forward(row)
        batch = net.forward(np.stack([row, row]))
        assert single.shape == (1, 3)
        np.testing.assert_allclose(batch[0], single[0], rtol=1e-13)

    def test_output_layer_gain_scales_initial_outputs(self):
        rng1 = np.random.default_rng(0)
        rng2 = np.random.default_rng(0)
        small = MLP([4, 8, 3], rng1, output_gain=0.01)
        big = MLP([4, 8, 3], rng2, output_gain=1.0)
        x = np.random.default_rng(1).standard_normal((6, 4))
        np.testing.assert_allclose(small.forward(x), 0.01 * big.forward(x), rtol=1e-12)


class TestMLPBackward:
    def test_gradients_match_central_differences(self):
        net = MLP([4, 6, 5, 3], np.random.default_rng(2))
        rng = np.random.default_rng(3)
        x = rng.standard_normal((7, 4))
        target = rng.standard_normal((7, 3))

        def loss():
            return 0.5 * float(np.sum((net.forward(x) - target) ** 2))

        out = net.forward(x)
        analytic = net.backward(out - target)
        numeric = fd_gradient(loss, net.params)
        for a, n in zip(analytic, numeric):
            np.testing.assert_allclose(a, n, rtol=1e-4, atol=1e-8)

    def test_gradient_of_single_layer_is_exact(self):
        # linear net: d(sum WX)/dW has a closed form
        net = MLP([3, 2], np.random.default_rng(0))
        x = np.random.default_rng(1).standard_normal((5, 3))
        net.forward(x)
        dw, db = net.backward(np.ones((5, 2)))
        np.testing.assert_allclose(dw, x.T @ np.ones((5, 2)), rtol=1e-14)
        np.testing.assert_allclose(db, np.full(2, 5.0), rtol=1e-14)

    def test_batch_gradient_is_sum_of_per_row_gradients(self):
        net = MLP([3, 6, 2], np.random.default_rng(4))
        rng = np.random.default_rng(5)
        x = rng.standard_normal((4, 3))
        g_out = rng.standard_normal((4, 2))
        net.forward(x)
        whole = net.backward(g_out)
        parts = None
        for i in range(4):
            net.forward(x[i])
            row = net.backward(g_out[i])
            parts = row if parts is None else [p + r for p, r in zip(parts, row)]
        for w, p in zip(whole, parts):
            np.testing.assert_allclose(w, p, rtol=1e-12, atol=1e-15)


class TestAdam:
    def test_first_step_is_signed_unit_step(self):
        p = np.array([1.0])
        opt = Adam([(1,)], learning_rate=0.1)
        opt.step([p], [np.array([4.0])])
        # bias correction makes the first step lr * g / (|g| + eps)
        expected = 1.0 - 0.1 * 4.0 / (4.0 + 1e-5)
        np.testing.assert_allclose(p, [expected], rtol=1e-14)

    def test_zero_gradient_leaves_parameter_unchanged(self):
        p = np.array([2.5, -1.0])
        before = p.copy()
        opt = Adam([(2,)], learning_rate=0.1)
        opt.step([p], [np.zeros(2)])
        np.testing.assert_array_equal(p, before)

    def test_constant_gradient_descends_monotonically(self):
        p = np.array([1.0])
        opt = Adam([(1,)], learning_rate=0.01)
        values = [p[0]]
        for _ in range(50):
            opt.step([p], [np.array([1.0])])
            values.append(p[0])
        assert all(b < a for a, b in zip(values, values[1:]))

    def test_step_counter_and_moments_accumulate(self):
        p = np.array([0.0])
        opt = Adam([(1,)], learning_rate=0.1)
        opt.step([p], [np.array([1.0])])
        opt.step([p], [np.array([1.0])])
        assert opt.t == 2
        np.testing.assert_allclose(opt.m[0], [1.0 - 0.9**2], rtol=1e-12)
        np.testing.assert_allclose(opt.v[0], [1.0 - 0.999**2], rtol=1e-12)

    def test_updates_happen_in_place(self):
        p = np.array([1.0, 2.0])
        alias = p
        opt = Adam([(2,)], learning_rate=0.1)
        opt.step([p], [np.ones(2)])
        assert alias is p and alias[0] != 1.0


class TestGlobalNormClip:
    def test_norm_of_known_vectors(self):
        assert global_norm([np.array([3.0]), np.array([4.0])]) == pytest.approx(5.0)

    def test_clip_scales_jointly_when_over(self):
        grads = [np.array([3.0]), np.array([4.0])]
        pre = clip_by_global_norm(grads, 0.5)
        assert pre == pytest.approx(5.0)
        scale = 0.5 / (5.0 + 1e-6)
        np.testing.assert_allclose(grads[0], [3.0 * scale], rtol=1e-12)
        np.testing.assert_allclose(grads[1], [4.0 * scale], rtol=1e-12)
        assert global_norm(grads) <= 0.5

    def test_under_norm_is_untouched(self):
        grads = [np.array([0.1, 0.2])]
        before = grads[0].copy()
        pre = clip_by_global_norm(grads, 0.5)
        np.testing.assert_array_equal(grads[0], before)
        assert pre == pytest.approx(np.sqrt(0.05))


class TestRunningNorm:
    def test_streamed_stats_match_batch_stats(self):
        rng = np.random.default_rng(0)
        data = rng.normal(loc=[2.0, -1.0, 0.5], scale=[3.0, 0.1, 1.0], size=(10000, 3))
        norm = RunningNorm(3)
        for chunk in np.array_split(data, 37):
            norm.update(chunk)
        np.testing.assert_allclose(norm.mean, data.mean(axis=0), rtol=1e-6, atol=1e-6)
        np.testing.assert_allclose(norm.var, data.var(axis=0), rtol=1e-3)
        assert norm.count == pytest.approx(10000, abs=1e-3)

    def test_single_rows_equal_chunked_updates(self):
        rng = np.random.default_rng(1)
        data = rng.standard_normal((50, 2))
        one = RunningNorm(2)
        for row in data:
            one.update(row)
        many = RunningNorm(2)
        many.update(data)
        np.testing.assert_allclose(one.mean, many.mean, rtol=1e-10)
        np.testing.assert_allclose(one.var, many.var, rtol=1e-9)

    def test_normalized_stream_is_standardized(self):
        rng = np.random.default_rng(2)
        data = rng.normal(5.0, 2.0, size=(5000, 1))
        norm = RunningNorm(1)
        norm.update(data)
        z = norm.normalize(data)
        assert abs(z.mean()) < 1e-2
        assert abs(z.std() - 1.0) < 1e-2

    def test_outliers_clip_to_ten(self):
        norm = RunningNorm(1)
        norm.update(np.zeros((100, 1)))
        z = norm.normalize(np.array([1e6]))
        np.testing.assert_array_equal(z, [10.0])
        z = norm.normalize(np.array([-1e6]))
        np.testing.assert_array_equal(z, [-10.0])

    def test_state_roundtrip_is_bit_identical(self):
        rng = np.random.default_rng(3)
        norm = RunningNorm(4)
        norm.update(rng.standard_normal((20, 4)))
        copy = RunningNorm(4)
        copy.load_state(norm.state())
        probe = rng.standard_normal(4)
        np.testing.assert_array_equal(copy.normalize(probe), norm.normalize(probe))
        copy.update(probe)
        norm.update(probe)
        np.testing.assert_array_equal(copy.mean, norm.mean)
        np.testing.assert_array_equal(copy.var, norm.var)
