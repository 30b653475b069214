import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from vqclab.circuits import CircuitLayout, EncodingSpec, Gate, build_hea, z_observable
from vqclab.ensembles import CircuitEnsemble
from vqclab.gradients import (
    finite_difference_gradient,
    generator_observable,
    gradient_statistics,
    parameter_shift_gradient,
)
from vqclab.numeric import DenseCapError, Observable

SINGLE = CircuitLayout(1, (Gate.rot("Y", 0, 0),), 1)
ENC1 = EncodingSpec.angle(1)


def cos_circuit_grad(fn, theta, **kw):
    return fn(SINGLE, [theta], ENC1, [0.0], z_observable(1), 0, **kw)


class TestParameterShift:
    def test_stationary_point(self):
        assert abs(cos_circuit_grad(parameter_shift_gradient, 0.0)) <= 1e-15

    def test_quarter_turn(self):
        # f(theta) = cos(theta) so f'(pi/2) = -1
        assert cos_circuit_grad(parameter_shift_gradient, np.pi / 2) == pytest.approx(-1.0, abs=1e-14)

    def test_matches_finite_difference_all_slots(self, rng):
        layout = build_hea(3, 2)
        theta = rng.uniform(-np.pi, np.pi, layout.param_count)
        x = rng.uniform(-np.pi, np.pi, 3)
        enc, obs = EncodingSpec.angle(3), z_observable(3)
        for k in range(layout.param_count):
            ps = parameter_shift_gradient(layout, theta, enc, x, obs, k)
            fd = finite_difference_gradient(layout, theta, enc, x, obs, k, h=1e-4)
            assert abs(ps - fd) <= 1e-6

    def test_shared_slot_rejected(self):
        layout = CircuitLayout(1, (Gate.rot("Y", 0, 0), Gate.rot("Z", 0, 0)), 1)
        with pytest.raises(ValueError):
            parameter_shift_gradient(layout, [0.1], ENC1, [0.0], z_observable(1), 0)

    def test_batched(self, rng):
        layout = build_hea(2, 2)
        thetas = rng.uniform(-np.pi, np.pi, (6, layout.param_count))
        enc, obs, x = EncodingSpec.angle(2), z_observable(2), np.array([0.3, -0.2])
        batch = parameter_shift_gradient(layout, thetas, enc, x, obs, 3)
        for t, g in zip(thetas, batch):
            assert abs(g - parameter_shift_gradient(layout, t, enc, x, obs, 3)) <= 1e-13


class TestFiniteDifference:
    def test_constant_output(self, rng):
        layout = build_hea(2, 1)
        g = finite_difference_gradient(layout, rng.uniform(-3, 3, 4), EncodingSpec.angle(2), [0.1, 0.2],
                                       Observable.identity(2), 1)
        assert abs(g) <= 1e-9

    def test_analytic_derivative(self):
        assert cos_circuit_grad(finite_difference_gradient, np.pi / 2, h=1e-4) == pytest.approx(-1.0, abs=1e-7)

    @pytest.mark.parametrize("h", [1e-7, 0.1])
    def test_step_range(self, h):
        with pytest.raises(ValueError):
            cos_circuit_grad(finite_difference_gradient, 0.0, h=h)


class TestGenerator:
    def test_trace_vanishes(self, rng):
        layout = build_hea(3, 2)
        theta = rng.uniform(-np.pi, np.pi, layout.param_count)
        for k in range(layout.param_count):
            assert abs(generator_observable(layout, theta, z_observable(3), k).trace()) <= 1e-9

    def test_frame_reproduces_gradient(self, rng):
        layout = build_hea(3, 2)
        theta = rng.uniform(-np.pi, np.pi, layout.param_count)
        x = rng.uniform(-np.pi, np.pi, 3)
        enc, obs = EncodingSpec.angle(3), z_observable(3)
        for k in range(layout.param_count):
            frame = generator_observable(layout, theta, obs, k, enc, x)
            assert abs(frame.gradient() - parameter_shift_gradient(layout, theta, enc, x, obs, k)) <= 1e-9

    def test_identity_observable_gives_zero(self, rng):
        layout = build_hea(2, 2)
        g = generator_observable(layout, rng.uniform(-3, 3, 8), Observable.identity(2), 5)
        assert np.max(np.abs(g.matrix)) <= 1e-12

    @given(st.integers(2, 4), st.integers(0, 2**32 - 1))
    def test_norm_bound(self, n, seed):
        rng = np.random.default_rng(seed)
        layout = build_hea(n, 2)
        k = int(rng.integers(layout.param_count))
        g = generator_observable(layout, rng.uniform(-np.pi, np.pi, layout.param_count), z_observable(n), k)
        assert np.max(np.abs(np.linalg.eigvalsh(g.matrix))) <= 1 + 1e-9
        assert abs(g.trace()) <= 1e-9

    def test_dense_cap(self):
        with pytest.raises(DenseCapError):
            generator_observable(build_hea(8, 1), np.zeros(16), z_observable(8), 0)


class TestGradientStatistics:
    def test_random_configurations_agree_with_finite_differences(self):
        rng = np.random.default_rng(11)
        worst = 0.0
        for _ in range(100):
            n = int(rng.integers(1, 5))
            layout = SINGLE if n == 1 else build_hea(n, int(rng.integers(1, 4)))
            theta = rng.uniform(-np.pi, np.pi, layout.param_count)
            x = rng.uniform(-np.pi, np.pi, n)
            k = int(rng.integers(layout.param_count))
            args = (layout, theta, EncodingSpec.angle(n), x, z_observable(n), k)
            worst = max(worst, abs(parameter_shift_gradient(*args) - finite_difference_gradient(*args)))
        assert worst <= 1e-6

    def test_zero_depth_variance(self):
        stats = gradient_statistics(CircuitEnsemble(build_hea(3, 0)), np.zeros(3), z_observable(3), 0, 50, 1)
        assert stats.variance.value == 0 and stats.mean.value == 0

    def test_min_trials(self):
        with pytest.raises(ValueError):
            gradient_statistics(CircuitEnsemble(build_hea(2, 1)), np.zeros(2), z_observable(2), 0, 10, 1)

    def test_deep_hea_mean_zero_and_bound(self):
        n = 5
        layout = build_hea(n, 4 * n)
        stats = gradient_statistics(CircuitEnsemble(layout), np.full(n, 0.3), z_observable(n), 0, 400, 2)
        assert abs(stats.mean.value) <= 4 * stats.mean.stderr
        # Var <= 3 ||G||^2 / (d + 1) with ||G|| <= 1
        assert stats.variance.value <= 3 / (2**n + 1)
        assert stats.variance.stderr > 0

    def test_deterministic(self):
        args = (CircuitEnsemble(build_hea(3, 2)), np.zeros(3), z_observable(3), 1, 40, 9)
        np.testing.assert_array_equal(gradient_statistics(*args).samples, gradient_statistics(*args).samples)
