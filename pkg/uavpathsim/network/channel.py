"""
Radio link model: path loss, small-scale fading, SINR, data rates, interference sums and the M/D/1 latency of a
UAV uplink.

All internal math is done in linear units (watt, power ratios). The world level functions read a
:class:`~uavpathsim.network.scenario.World` and cache their per-stage results in ``world.cache``.
"""

from __future__ import annotations
from dataclasses import dataclass

import numpy as np

from uavpathsim.utilities import UnstableQueueError

# free space constant for distance in m and frequency in Hz: 20*log10(4*pi/c)
FREE_SPACE_CONSTANT_DB = -147.55
MIN_LINK_DISTANCE_M = 1.0


def uav_path_loss_db(d_m, f_hz):
    """Free space path loss of a UAV to base station link

    Args:
        d_m: 3D link distance in m, > 0
        f_hz: carrier frequency in Hz, > 0

    Returns:
        path loss in dB
    """
    d_m = np.asarray(d_m, dtype=float)
    if np.any(d_m <= 0) or f_hz <= 0:
        raise ValueError('distance and frequency must be positive')
    return 20.0 * np.log10(d_m) + 20.0 * np.log10(f_hz) + FREE_SPACE_CONSTANT_DB


def ue_path_loss_db(d_m):
    """Path loss of a ground UE to base station link, 2D distance in m"""
    d_m = np.asarray(d_m, dtype=float)
    if np.any(d_m <= 0):
        raise ValueError('distance must be positive')
    return 15.3 + 37.6 * np.log10(d_m)


def path_gain(path_loss_db):
    return np.power(10.0, -np.asarray(path_loss_db, dtype=float) / 10.0)


@dataclass(frozen=True)
class FadingDraw:
    gain: float
    kind: str


def draw_fading_gains(kind: str, k_factor: float, rng: np.random.Generator, size=None):
    """Unit-mean small-scale fading power gains

    The complex amplitude is ``sqrt(K/(K+1))`` line of sight plus ``sqrt(1/(K+1))`` circularly symmetric
    Gaussian scatter; the power gain is its squared magnitude. Rayleigh fading is the case K = 0.

    Args:
        kind: 'rician' or 'rayleigh'
        k_factor: Rician K-factor (linear), >= 0, may be ``inf``
        rng: random generator owned by the caller
        size: output shape

    Returns:
        array (or float for ``size=None``) of power gains
    """
    if kind == 'rayleigh':
        k_factor = 0.0
    elif kind != 'rician':
        raise ValueError("fading kind must be 'rician' or 'rayleigh', got {!r}".format(kind))
    if k_factor < 0:
        raise ValueError('Rician K-factor must not be negative, got {}'.format(k_factor))
    if np.isinf(k_factor):
        return np.ones(size) if size is not None else 1.0

    los = np.sqrt(k_factor / (k_factor + 1.0))
    scatter = np.sqrt(1.0 / (k_factor + 1.0))
    real = rng.standard_normal(size) / np.sqrt(2.0)
    imag = rng.standard_normal(size) / np.sqrt(2.0)
    return (los + scatter * real) ** 2 + (scatter * imag) ** 2


def sample_fading(kind: str, k_factor: float, rng: np.random.Generator) -> FadingDraw:
    """Single fading draw"""
    return FadingDraw(gain=float(draw_fading_gains(kind, k_factor, rng)), kind=kind)


@dataclass(frozen=True)
class LinkBudget:
    tx_power_per_rb_w: float
    channel_gain: float
    interference_w: float
    noise_w: float

    @property
    def sinr(self) -> float:
        return sinr(self)


def sinr(link: LinkBudget) -> float:
    """Signal to interference plus noise ratio of one RB"""
    if link.noise_w <= 0:
        raise ValueError('noise power must be positive')
    return link.tx_power_per_rb_w * link.channel_gain / (link.interference_w + link.noise_w)


def uav_rate_bps(sinrs, rb_bandwidth_hz: float) -> float:
    """Shannon rate summed over the RBs of a link"""
    sinrs = np.asarray(sinrs, dtype=float)
    if np.any(sinrs < 0):
        raise ValueError('SINR values must not be negative')
    return float(np.sum(rb_bandwidth_hz * np.log2(1.0 + sinrs)))


def mdd1_delay_s(arrival_rate: float, rate_bps: float, packet_bits: float) -> float:
    """Mean sojourn time of an M/D/1 queue served at ``rate_bps / packet_bits`` packets/s

    Raises:
        UnstableQueueError: service rate not above the arrival rate
    """
    if arrival_rate < 0:
        raise ValueError('arrival rate must not be negative')
    mu = rate_bps / packet_bits
    if mu <= arrival_rate:
        raise UnstableQueueError('service rate {:.6g}/s does not exceed arrival rate {:.6g}/s'.format(
            mu, arrival_rate))
    return arrival_rate / (2.0 * mu * (mu - arrival_rate)) + 1.0 / mu


# ---------------------------------------------------------------------------- world level
def uav_gains(world) -> np.ndarray:
    """Channel gains (J, S, RB) of every UAV towards every base station"""
    if 'uav_gain' not in world.cache:
        cfg = world.config
        if world.uavs:
            positions = np.array([world.uav_position(uav.id) for uav in world.uavs])
            horizontal = positions[:, None, :2] - world.bs_positions[None, :, :]
            distance = np.sqrt(np.sum(horizontal ** 2, axis=-1) + positions[:, None, 2] ** 2)
            large_scale = path_gain(uav_path_loss_db(np.maximum(distance, MIN_LINK_DISTANCE_M), cfg.carrier_hz))
            world.cache['uav_gain'] = world.uav_fading * large_scale[:, :, None]
        else:
            world.cache['uav_gain'] = np.zeros((0, world.bs_count, cfg.rb_count))
    return world.cache['uav_gain']


def ue_gains(world) -> np.ndarray:
    """Channel gains (Q, S, RB) of every ground UE towards every base station"""
    if 'ue_gain' not in world.cache:
        horizontal = world.ue_positions[:, None, :] - world.bs_positions[None, :, :]
        distance = np.sqrt(np.sum(horizontal ** 2, axis=-1))
        large_scale = path_gain(ue_path_loss_db(np.maximum(distance, MIN_LINK_DISTANCE_M)))
        world.cache['ue_gain'] = world.ue_fading * large_scale[:, :, None]
    return world.cache['ue_gain']


def _transmitters(world):
    for ue in world.ues:
        if ue.rbs:
            yield ue.device, ue.serving_bs, ue.rbs, ue.power_per_rb_w, ue_gains(world)[ue.id]
    for uav in world.uavs:
        if uav.rbs and not uav.silenced:
            yield uav.device, uav.serving_bs, uav.rbs, uav.power_per_rb_w, uav_gains(world)[uav.id]


def interference_map(world) -> np.ndarray:
    """Interference (S, RB) received at each base station from devices attached to other base stations"""
    if 'interference' not in world.cache:
        total = np.zeros((world.bs_count, world.rb_count))
        for _, serving, rbs, power, gains in _transmitters(world):
            rbs = list(rbs)
            contribution = power * gains[:, rbs]
            contribution[serving, :] = 0.0
            total[:, rbs] += contribution
        world.cache['interference'] = total
    return world.cache['interference']


def interference_at_bs(world, bs: int, rb: int, exclude=None) -> float:
    """Co-channel interference at base station ``bs`` on RB ``rb``

    Args:
        exclude: device (kind, id) left out of the sum, e.g. the evaluated link itself
    """
    if not 0 <= rb < world.rb_count:
        raise IndexError('resource block {} does not exist'.format(rb))
    total = interference_map(world)[bs, rb]
    if exclude is not None:
        for device, serving, rbs, power, gains in _transmitters(world):
            if device == tuple(exclude) and serving != bs and rb in rbs:
                total -= power * gains[bs, rb]
    return float(max(total, 0.0))


def uav_sinrs(world, uav_id: int) -> np.ndarray:
    """SINR on each RB of a UAV at its serving base station"""
    uav = world.uavs[uav_id]
    if not uav.rbs or uav.silenced:
        return np.zeros(0)
    rbs = list(uav.rbs)
    signal = uav.power_per_rb_w * uav_gains(world)[uav_id, uav.serving_bs, rbs]
    return signal / (interference_map(world)[uav.serving_bs, rbs] + world.config.noise_w)


def uav_rate(world, uav_id: int) -> float:
    return uav_rate_bps(uav_sinrs(world, uav_id), world.config.rb_bandwidth_hz)


def ue_sinrs(world, ue_id: int) -> np.ndarray:
    ue = world.ues[ue_id]
    if not ue.rbs:
        return np.zeros(0)
    rbs = list(ue.rbs)
    signal = ue.power_per_rb_w * ue_gains(world)[ue_id, ue.serving_bs, rbs]
    return signal / (interference_map(world)[ue.serving_bs, rbs] + world.config.noise_w)


def ue_rate_bps(world, ue_id: int) -> float:
    """Uplink rate of a ground UE at its serving base station"""
    return uav_rate_bps(ue_sinrs(world, ue_id), world.config.rb_bandwidth_hz)


def ue_rates(world) -> np.ndarray:
    return np.array([ue_rate_bps(world, ue.id) for ue in world.ues])


def caused_interference_w(world, uav_id: int) -> float:
    """Interference a UAV causes on its RBs at all non-serving base stations"""
    uav = world.uavs[uav_id]
    if not uav.rbs or uav.silenced:
        return 0.0
    gains = uav_gains(world)[uav_id][:, list(uav.rbs)]
    mask = np.ones(world.bs_count, dtype=bool)
    mask[uav.serving_bs] = False
    return float(uav.power_per_rb_w * np.sum(gains[mask]))
