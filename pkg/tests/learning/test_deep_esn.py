import math

import numpy as np
import pytest

from uavpathsim.learning.deep_esn import (DeepEsn, EsnLayer, init_esn, readout, readout_all, spectral_radius,
                                          step_states, td_error, td_update)


def scalar_esn(leak, state=0.0, n_actions=2):
    layer = EsnLayer(w_in=np.array([[1.0]]), w=np.array([[0.5]]), leak=leak, state=np.array([state]))
    return DeepEsn([layer], np.zeros((n_actions, 2)))


@pytest.fixture
def esn():
    return init_esn(7, 50, [12, 6], [0.99, 0.99], np.random.default_rng(0))


class TestInitialization(object):
    """Tests for the reservoir initialization
    """

    def test_spectral_radius_target(self, esn):
        for layer in esn.layers:
            assert abs(np.max(np.abs(np.linalg.eigvals(layer.w))) - 0.9) < 1e-6

    def test_shapes(self, esn):
        assert esn.layer_sizes == [12, 6]
        assert esn.layers[0].w_in.shape == (12, 7)
        assert esn.layers[1].w_in.shape == (6, 12)
        assert esn.w_out.shape == (50, 7 + 18)
        assert esn.feature_size == 25

    def test_zero_readout(self, esn):
        v = np.random.default_rng(1).uniform(size=7)
        step_states(esn, v)
        assert np.all(readout_all(esn, esn.features()) == 0.0)
        assert readout(esn, v, 3) == 0.0

    def test_inconsistent_layers(self):
        with pytest.raises(ValueError):
            init_esn(7, 50, [12, 6], [0.99], np.random.default_rng(0))

    def test_wrong_readout_width(self):
        layer = EsnLayer(w_in=np.ones((2, 3)), w=np.zeros((2, 2)), leak=1.0, state=np.zeros(2))
        with pytest.raises(ValueError):
            DeepEsn([layer], np.zeros((4, 4)))


class TestSpectralRadius(object):
    """Tests for the power iteration with eigenvalue fallback
    """

    def test_real_dominant_eigenvalue(self):
        assert spectral_radius(np.diag([2.0, -3.0, 0.5])) == pytest.approx(3.0, rel=1e-8)

    def test_complex_pair(self):
        rotation = 0.5 * np.array([[0.0, -1.0], [1.0, 0.0]])
        assert spectral_radius(rotation) == pytest.approx(0.5, rel=1e-12)

    def test_zero_matrix(self):
        assert spectral_radius(np.zeros((3, 3))) == 0.0

    def test_random_matrix(self):
        matrix = np.random.default_rng(3).uniform(-1.0, 1.0, size=(10, 10))
        expected = np.max(np.abs(np.linalg.eigvals(matrix)))
        assert spectral_radius(matrix) == pytest.approx(expected, rel=1e-6)


class TestStateUpdate(object):
    """Tests for the leaky-integrator state update
    """

    def test_leak_off(self):
        esn = scalar_esn(leak=0.0, state=0.3)
        step_states(esn, [1.0])
        assert esn.layers[0].state[0] == 0.3

    def test_scalar_layer(self):
        esn = scalar_esn(leak=1.0)
        step_states(esn, [1.0])
        assert esn.layers[0].state[0] == pytest.approx(0.76159, abs=1e-5)
        assert esn.layers[0].state[0] == pytest.approx(math.tanh(1.0))

    def test_zero_input(self, esn):
        step_states(esn, np.zeros(7))
        assert all(np.all(layer.state == 0.0) for layer in esn.layers)

    def test_dimension_mismatch(self, esn):
        with pytest.raises(ValueError):
            step_states(esn, np.zeros(6))

    def test_deep_layer_driven_by_fresh_state(self, esn):
        v = np.linspace(0.0, 1.0, 7)
        first, second = [layer for layer in esn.layers]
        previous = second.state.copy()
        step_states(esn, v)
        expected = (1.0 - second.leak) * previous + second.leak * np.tanh(second.w_in @ first.state
                                                                          + second.w @ previous)
        np.testing.assert_allclose(second.state, expected, rtol=1e-12)

    def test_states_bounded(self):
        esn = init_esn(3, 5, [12, 6], [1.0, 1.0], np.random.default_rng(2), input_scale=5.0)
        rng = np.random.default_rng(4)
        for _ in range(50):
            step_states(esn, rng.uniform(-10.0, 10.0, size=3))
            assert all(np.all(np.abs(layer.state) <= 1.0) for layer in esn.layers)

    def test_echo_state_contraction(self):
        """Two trajectories driven by the same inputs from different initial states converge
        """
        first = init_esn(4, 5, [12, 6], [1.0, 1.0], np.random.default_rng(5))
        second = init_esn(4, 5, [12, 6], [1.0, 1.0], np.random.default_rng(5))
        rng = np.random.default_rng(6)
        for layer in second.layers:
            layer.state = rng.uniform(-1.0, 1.0, size=layer.size)
        initial = np.linalg.norm(first.features(np.zeros(4)) - second.features(np.zeros(4)))
        for v in rng.uniform(-1.0, 1.0, size=(200, 4)):
            step_states(first, v)
            step_states(second, v)
        final = np.linalg.norm(first.features() - second.features())
        assert final < 1e-6 * initial

    def test_reset(self, esn):
        step_states(esn, np.ones(7))
        esn.reset_states()
        assert np.all(esn.features() == 0.0)


class TestReadout(object):
    """Tests for the linear readout and its TD update
    """

    def test_selector_row(self, esn):
        v = np.random.default_rng(7).uniform(size=7)
        step_states(esn, v)
        esn.w_out[4, 0] = 1.0
        assert readout(esn, v, 4) == pytest.approx(v[0])

    def test_matches_dot_product(self):
        rng = np.random.default_rng(8)
        esn = init_esn(3, 4, [5, 2], [0.5, 0.5], rng)
        esn.w_out[:] = rng.normal(size=esn.w_out.shape)
        v = rng.uniform(size=3)
        step_states(esn, v)
        features = np.concatenate([v, esn.layers[0].state, esn.layers[1].state])
        for action in range(4):
            assert readout(esn, v, action) == pytest.approx(sum(esn.w_out[action] * features))

    def test_linear_in_readout(self, esn):
        rng = np.random.default_rng(9)
        esn.w_out[:] = rng.normal(size=esn.w_out.shape)
        step_states(esn, rng.uniform(size=7))
        values = readout_all(esn, esn.features())
        esn.w_out *= 3.0
        np.testing.assert_allclose(readout_all(esn, esn.features()), 3.0 * values)

    def test_single_step(self):
        esn = scalar_esn(leak=0.0)
        td_update(esn, 0, reward=1.0, estimate=0.0, learn_rate=0.01, features=np.array([1.0, 0.0]))
        np.testing.assert_allclose(esn.w_out[0], [0.01, 0.0])
        np.testing.assert_array_equal(esn.w_out[1], [0.0, 0.0])

    def test_zero_error(self, esn):
        esn.w_out[2] = 0.5
        before = esn.w_out.copy()
        features = esn.features(np.ones(7))
        estimate = float(esn.w_out[2] @ features)
        td_update(esn, 2, reward=estimate, estimate=estimate, learn_rate=0.1, features=features)
        np.testing.assert_array_equal(esn.w_out, before)

    def test_touches_one_row(self, esn):
        before = esn.w_out.copy()
        step_states(esn, np.ones(7))
        td_update(esn, 7, reward=2.0, estimate=0.0, learn_rate=0.01)
        changed = np.any(esn.w_out != before, axis=1)
        assert list(np.flatnonzero(changed)) == [7]

    def test_geometric_error_decay(self):
        """Repeating one (features, reward) pair shrinks the error by 1 - lr * |features|^2 per step
        """
        esn = init_esn(3, 2, [4], [0.5], np.random.default_rng(10))
        features = np.array([0.3, -0.2, 0.5, 0.1, 0.0, 0.4, -0.1])
        learn_rate, reward = 0.05, 1.5
        factor = 1.0 - learn_rate * features @ features
        error = reward
        for _ in range(30):
            estimate = float(esn.w_out[1] @ features)
            assert reward - estimate == pytest.approx(error, abs=1e-9)
            td_update(esn, 1, reward, estimate, learn_rate, features=features)
            error *= factor

    def test_non_finite(self, esn):
        with pytest.raises(ValueError):
            td_update(esn, 0, reward=float('nan'), estimate=0.0, learn_rate=0.01)

    def test_td_error(self):
        assert td_error(1.0, 0.0) == 1.0
        assert td_error(0.5, 0.5) == 0.0
        assert td_error(-1.0, 1.0) == 2.0
