"""
Deep echo state network (ESN) with leaky-integrator reservoirs and one linear readout row per action.

Only the readout ``w_out`` is trained, with a temporal-difference step on the row of the chosen action. The
readout features are the input vector followed by the states of all layers.
"""

from __future__ import annotations
import logging
from dataclasses import dataclass

import numpy as np

logger = logging.getLogger(__name__)

POWER_ITERATION_TOL = 1e-8
POWER_ITERATION_MAX_ITER = 10_000
MAX_REDRAWS = 100


@dataclass
class EsnLayer:
    w_in: np.ndarray        # (N_R, N_U) for the first layer, (N_R, N_R of the previous layer) otherwise
    w: np.ndarray           # (N_R, N_R)
    leak: float
    state: np.ndarray       # (N_R,)

    @property
    def size(self) -> int:
        return self.w.shape[0]


class DeepEsn:
    """Stack of reservoirs plus the readout matrix (|Z| x (N_U + sum N_R))"""

    def __init__(self, layers: list[EsnLayer], w_out: np.ndarray, spectral_radius_target: float = 0.9,
                 input_scale: float = 0.5):
        self.layers = layers
        self.w_out = w_out
        self.spectral_radius_target = spectral_radius_target
        self.input_scale = input_scale
        self.last_input = np.zeros(self.n_inputs)
        if w_out.shape[1] != self.feature_size:
            raise ValueError('readout has {} columns, expected {}'.format(w_out.shape[1], self.feature_size))

    @property
    def n_inputs(self) -> int:
        return self.layers[0].w_in.shape[1]

    @property
    def n_actions(self) -> int:
        return self.w_out.shape[0]

    @property
    def layer_sizes(self) -> list[int]:
        return [layer.size for layer in self.layers]

    @property
    def leak_rates(self) -> list[float]:
        return [layer.leak for layer in self.layers]

    @property
    def feature_size(self) -> int:
        return self.n_inputs + sum(self.layer_sizes)

    def features(self, v=None) -> np.ndarray:
        """Concatenation of the input and all layer states"""
        v = self.last_input if v is None else np.asarray(v, dtype=float)
        return np.concatenate([v] + [layer.state for layer in self.layers])

    def reset_states(self):
        for layer in self.layers:
            layer.state = np.zeros(layer.size)
        self.last_input = np.zeros(self.n_inputs)


def spectral_radius(matrix: np.ndarray, tol: float = POWER_ITERATION_TOL,
                    max_iter: int = POWER_ITERATION_MAX_ITER) -> float:
    """Largest eigenvalue magnitude of a square matrix

    Power iteration stopped once the normalized iterate is an eigenvector up to ``tol``. Matrices whose
    dominant eigenvalues form a complex pair (or a +/- pair) never settle, those fall back to a full eigenvalue
    solve after ``max_iter`` steps.
    """
    n = matrix.shape[0]
    if n == 0:
        return 0.0
    x = np.ones(n) / np.sqrt(n)
    for _ in range(max_iter):
        y = matrix @ x
        norm = np.linalg.norm(y)
        if norm == 0.0:
            break
        y /= norm
        residual = min(np.linalg.norm(y - x), np.linalg.norm(y + x))
        if residual <= tol:
            return float(norm)
        x = y
    logger.debug('power iteration did not settle for a %dx%d matrix, using eigenvalues', n, n)
    return float(np.max(np.abs(np.linalg.eigvals(matrix))))


def init_esn(n_inputs: int, n_actions: int, layer_sizes, leak_rates, rng: np.random.Generator,
             spectral_radius_target: float = 0.9, input_scale: float = 0.5) -> DeepEsn:
    """Random reservoirs scaled to the target spectral radius; zero readout and zero states

    Raises:
        ValueError: inconsistent layer definition
    """
    if len(layer_sizes) != len(leak_rates) or not layer_sizes:
        raise ValueError('need one leak rate per layer')
    layers = []
    fan_in = n_inputs
    for size, leak in zip(layer_sizes, leak_rates):
        w_in = rng.uniform(-input_scale, input_scale, size=(size, fan_in))
        for _ in range(MAX_REDRAWS):
            w = rng.uniform(-1.0, 1.0, size=(size, size))
            radius = spectral_radius(w)
            if radius > 0.0:
                break
            logger.warning('degenerate reservoir draw with zero spectral radius, drawing again')
        else:
            raise RuntimeError('could not draw a reservoir with nonzero spectral radius')
        layers.append(EsnLayer(w_in=w_in, w=w * (spectral_radius_target / radius), leak=float(leak),
                               state=np.zeros(size)))
        fan_in = size
    w_out = np.zeros((n_actions, n_inputs + sum(layer_sizes)))
    return DeepEsn(layers, w_out, spectral_radius_target=spectral_radius_target, input_scale=input_scale)


def step_states(esn: DeepEsn, v) -> list[np.ndarray]:
    """Advance all layers by one leaky-integrator update; layer n > 1 is driven by the fresh state of n - 1"""
    v = np.asarray(v, dtype=float)
    if v.shape != (esn.n_inputs,):
        raise ValueError('input has shape {}, expected ({},)'.format(v.shape, esn.n_inputs))
    drive = v
    for layer in esn.layers:
        layer.state = (1.0 - layer.leak) * layer.state + layer.leak * np.tanh(layer.w_in @ drive + layer.w @ layer.state)
        drive = layer.state
    esn.last_input = v
    return [layer.state for layer in esn.layers]


def readout_all(esn: DeepEsn, features) -> np.ndarray:
    """Estimated reward of every action"""
    return esn.w_out @ np.asarray(features, dtype=float)


def readout(esn: DeepEsn, v, action: int) -> float:
    """Estimated reward of one action for input ``v`` and the current states"""
    return float(esn.w_out[action] @ esn.features(v))


def td_error(reward: float, estimate: float) -> float:
    return abs(reward - estimate)


def td_update(esn: DeepEsn, action: int, reward: float, estimate: float, learn_rate: float, features=None):
    """Gradient step of the readout row of ``action`` towards ``reward``

    Args:
        estimate: readout of ``action`` computed from ``features``
        features: feature vector the estimate was computed from, the current one by default

    Raises:
        ValueError: non-finite reward or estimate
    """
    if not (np.isfinite(reward) and np.isfinite(estimate)):
        raise ValueError('non-finite reward {} or estimate {}'.format(reward, estimate))
    features = esn.features() if features is None else np.asarray(features, dtype=float)
    esn.w_out[action] += learn_rate * (reward - estimate) * features
    return esn.w_out
