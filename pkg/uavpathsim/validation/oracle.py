"""
Brute-force validators.

Everything in here is written independently of the network, game and learning modules: the oracles only read
raw topology and state from a world (positions, RB sets, fading draws, configuration numbers) and re-evaluate the
physics with their own plain loops.
"""

from __future__ import annotations
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
import simpy

logger = logging.getLogger(__name__)

MAX_SEQUENCES = 10 ** 7
MIN_PACKETS = 100_000
MAX_DEVICES = 20

# (dcol, drow) in action order: left, right, forward, backward, stay
_MOVES = ((-1, 0), (1, 0), (0, 1), (0, -1), (0, 0))


def _uav_loss_db(d, f):
    return 20.0 * math.log10(d) + 20.0 * math.log10(f) - 147.55


def _ue_loss_db(d):
    return 15.3 + 37.6 * math.log10(d)


def _db_gain(loss_db):
    return 10.0 ** (-loss_db / 10.0)


# ---------------------------------------------------------------------------- interference
def brute_force_interference(world, bs: int, rb: int) -> float:
    """Interference at base station ``bs`` on RB ``rb`` by a double loop over base stations and devices"""
    n_devices = len(world.ues) + len(world.uavs)
    if n_devices > MAX_DEVICES:
        raise ValueError('brute force interference is limited to {} devices, world has {}'.format(
            MAX_DEVICES, n_devices))
    bx, by = world.base_stations[bs].position
    total = 0.0
    for other in world.base_stations:
        if other.id == bs:
            continue
        for ue in world.ues:
            if ue.serving_bs != other.id or rb not in ue.rbs:
                continue
            d = max(math.hypot(ue.position[0] - bx, ue.position[1] - by), 1.0)
            total += ue.power_w / len(ue.rbs) * world.ue_fading[ue.id, bs, rb] * _db_gain(_ue_loss_db(d))
        for uav in world.uavs:
            if uav.silenced or uav.serving_bs != other.id or rb not in uav.rbs:
                continue
            col, row = uav.cell % world.grid.n_cols, uav.cell // world.grid.n_cols
            x, y = (col + 0.5) * world.grid.step_m, (row + 0.5) * world.grid.step_m
            d = max(math.sqrt((x - bx) ** 2 + (y - by) ** 2 + uav.altitude_m ** 2), 1.0)
            total += (uav.power_w / len(uav.rbs) * world.uav_fading[uav.id, bs, rb]
                      * _db_gain(_uav_loss_db(d, world.config.carrier_hz)))
    return total


# ---------------------------------------------------------------------------- M/D/1
def mdd1_sim(arrival_rate: float, service_rate: float, n_packets: int, rng: np.random.Generator) -> float:
    """Mean sojourn time of Poisson arrivals served one at a time in ``1/service_rate`` seconds"""
    if not 0 < arrival_rate < service_rate:
        raise ValueError('need 0 < arrival rate < service rate')
    if n_packets < MIN_PACKETS:
        raise ValueError('at least {} packets are needed, got {}'.format(MIN_PACKETS, n_packets))

    env = simpy.Environment()
    server = simpy.Resource(env, capacity=1)
    sojourn = []

    def packet(env):
        arrival = env.now
        with server.request() as request:
            yield request
            yield env.timeout(1.0 / service_rate)
        sojourn.append(env.now - arrival)

    def source(env):
        for gap in rng.exponential(1.0 / arrival_rate, size=n_packets):
            yield env.timeout(gap)
            env.process(packet(env))

    env.process(source(env))
    env.run()
    return float(np.mean(sojourn))


# ---------------------------------------------------------------------------- exhaustive search
@dataclass
class OracleResult:
    actions: list[int]          # action indices in move-major, power, association order
    value: float                # discounted return of the sequence


@dataclass
class _SearchModel:
    """Plain data copy of a single-UAV world with unit fading"""
    n_cols: int
    n_rows: int
    step: float
    bs_xy: list
    ue_xy: list
    ue_bs: list
    carrier_hz: float
    noise_w: float
    rb_bandwidth_hz: float
    rbs_per_ue: int
    rbs_per_uav: int
    ue_power_w: float
    origin: int
    destination: int
    altitude_m: float
    max_power_w: float
    packet_rate: float
    packet_bits: float
    power_levels: int
    nearest_count: int
    sinr_threshold: float
    saturation_delay_s: float
    forbid_revisits: bool
    w_interference: float
    w_delay: float
    w_penalty: float
    bonus: float
    discount: float


def _search_model(world, uav_id, discount, weights) -> _SearchModel:
    cfg = world.config
    weights = weights or cfg.weights
    uav = world.uavs[uav_id]
    return _SearchModel(
        n_cols=world.grid.n_cols, n_rows=world.grid.n_rows, step=world.grid.step_m,
        bs_xy=[tuple(map(float, bs.position)) for bs in world.base_stations],
        ue_xy=[tuple(map(float, ue.position)) for ue in world.ues], ue_bs=[ue.serving_bs for ue in world.ues],
        carrier_hz=cfg.carrier_hz, noise_w=cfg.rb_bandwidth_hz * cfg.noise_psd_w_per_hz,
        rb_bandwidth_hz=cfg.rb_bandwidth_hz, rbs_per_ue=cfg.rbs_per_ue, rbs_per_uav=cfg.rbs_per_uav,
        ue_power_w=cfg.ue_power_w, origin=uav.origin, destination=uav.destination, altitude_m=uav.altitude_m,
        max_power_w=uav.max_power_w, packet_rate=uav.packet_rate, packet_bits=uav.packet_size_bits,
        power_levels=cfg.power_levels, nearest_count=cfg.nearest_bs_count, sinr_threshold=cfg.sinr_threshold,
        saturation_delay_s=cfg.saturation_delay_s, forbid_revisits=cfg.forbid_revisits,
        w_interference=weights.interference, w_delay=weights.delay, w_penalty=weights.penalty,
        bonus=weights.progress_bonus, discount=cfg.discount if discount is None else discount)


class _Search:
    def __init__(self, model: _SearchModel):
        self.m = model
        self.actions = [(move, level, assoc)
                        for move in _MOVES
                        for level in range(1, model.power_levels + 1)
                        for assoc in range(1, model.nearest_count + 1)]
        self._phi = {}

    def center(self, cell):
        return ((cell % self.m.n_cols) + 0.5) * self.m.step, ((cell // self.m.n_cols) + 0.5) * self.m.step

    def dist2(self, a, b):
        ca, ra = a % self.m.n_cols, a // self.m.n_cols
        cb, rb = b % self.m.n_cols, b // self.m.n_cols
        return (ca - cb) ** 2 + (ra - rb) ** 2

    def nearest(self, cell):
        x, y = self.center(cell)
        ranked = sorted(range(len(self.m.bs_xy)),
                        key=lambda s: (math.hypot(self.m.bs_xy[s][0] - x, self.m.bs_xy[s][1] - y), s))
        return ranked[:self.m.nearest_count]

    def ue_rbs(self, q):
        position = [k for k in range(len(self.m.ue_bs)) if self.m.ue_bs[k] == self.m.ue_bs[q]].index(q)
        first = position * self.m.rbs_per_ue
        return list(range(first, first + self.m.rbs_per_ue))

    def phi(self, cell, level, serving):
        key = (cell, level, serving)
        if key in self._phi:
            return self._phi[key]
        m = self.m
        power = level * m.max_power_w / m.power_levels
        n_ues_here = sum(1 for s in m.ue_bs if s == serving)
        rbs = list(range(n_ues_here * m.rbs_per_ue, n_ues_here * m.rbs_per_ue + m.rbs_per_uav))
        x, y = self.center(cell)
        sbx, sby = m.bs_xy[serving]

        sinr_sum, rate = 0.0, 0.0
        for rb in rbs:
            interference = 0.0
            for q, (ux, uy) in enumerate(m.ue_xy):
                if m.ue_bs[q] != serving and rb in self.ue_rbs(q):
                    d = max(math.hypot(ux - sbx, uy - sby), 1.0)
                    interference += m.ue_power_w / m.rbs_per_ue * _db_gain(_ue_loss_db(d))
            d = math.sqrt((x - sbx) ** 2 + (y - sby) ** 2 + m.altitude_m ** 2)
            sinr = power / len(rbs) * _db_gain(_uav_loss_db(d, m.carrier_hz)) / (interference + m.noise_w)
            sinr_sum += sinr
            rate += m.rb_bandwidth_hz * math.log2(1.0 + sinr)

        mu = rate / m.packet_bits
        if mu > m.packet_rate:
            delay = min(m.packet_rate / (2.0 * mu * (mu - m.packet_rate)) + 1.0 / mu, m.saturation_delay_s)
        else:
            delay = m.saturation_delay_s

        caused = 0.0
        for r, (bx, by) in enumerate(m.bs_xy):
            if r == serving:
                continue
            d = math.sqrt((x - bx) ** 2 + (y - by) ** 2 + m.altitude_m ** 2)
            caused += len(rbs) * power / len(rbs) * _db_gain(_uav_loss_db(d, m.carrier_hz))

        shortfall = min(0.0, sinr_sum - m.sinr_threshold)
        value = -m.w_interference * caused - m.w_delay * delay - m.w_penalty * shortfall ** 2
        self._phi[key] = value
        return value

    def step(self, cell, visited, action_index):
        """(new cell, utility, arrived) of one action"""
        (dcol, drow), level, assoc = self.actions[action_index]
        col, row = cell % self.m.n_cols + dcol, cell // self.m.n_cols + drow
        target = cell
        if 0 <= col < self.m.n_cols and 0 <= row < self.m.n_rows:
            target = row * self.m.n_cols + col
            if self.m.forbid_revisits and target != cell and target in visited:
                target = cell
        serving = self.nearest(target)[assoc - 1]
        value = self.phi(target, level, serving)
        before, after = self.dist2(cell, self.m.destination), self.dist2(target, self.m.destination)
        if after < before:
            value += self.m.bonus
        elif after > before:
            value -= self.m.bonus
        return target, value, target == self.m.destination

    def best(self, cell, visited, depth, horizon, prefix_first=None):
        """Best (value, sequence) from ``cell`` with ``horizon - depth`` stages left"""
        best_value, best_sequence = -math.inf, []
        choices = range(len(self.actions)) if prefix_first is None else [prefix_first]
        for index in choices:
            target, value, arrived = self.step(cell, visited, index)
            total = value
            sequence = [index]
            if not arrived and depth + 1 < horizon:
                tail_value, tail = self.best(target, visited | {target}, depth + 1, horizon)
                total += self.m.discount * tail_value
                sequence += tail
            if total > best_value:
                best_value, best_sequence = total, sequence
        return best_value, best_sequence


def _search_first(args):
    model, first, horizon = args
    search = _Search(model)
    return search.best(model.origin, frozenset({model.origin}), 0, horizon, prefix_first=first)


def exhaustive_best_return(world, horizon: int, discount: float | None = None, weights=None, uav_id: int = 0,
                           workers: int = 1) -> OracleResult:
    """Optimal discounted return of a single UAV by enumerating all action sequences up to ``horizon``

    Fading is frozen to unit gains. Sequences end early when the destination is reached. Among equal returns
    the first sequence in enumeration order is kept.

    Raises:
        ValueError: more than one UAV, or more than 10**7 sequences
    """
    if len(world.uavs) != 1:
        raise ValueError('exhaustive search covers a single UAV, world has {}'.format(len(world.uavs)))
    model = _search_model(world, uav_id, discount, weights)
    n_actions = 5 * model.power_levels * model.nearest_count
    if horizon < 1:
        raise ValueError('horizon must be at least 1')
    if n_actions ** horizon > MAX_SEQUENCES:
        raise ValueError('{}^{} action sequences exceed the limit of {}'.format(n_actions, horizon, MAX_SEQUENCES))
    if model.origin == model.destination:
        return OracleResult(actions=[], value=0.0)

    jobs = [(model, first, horizon) for first in range(n_actions)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            partial = list(pool.map(_search_first, jobs))
    else:
        partial = [_search_first(job) for job in jobs]

    best_value, best_sequence = -math.inf, []
    for value, sequence in partial:
        if value > best_value:
            best_value, best_sequence = value, sequence
    logger.debug('exhaustive search over %d^%d sequences: best return %.6g', n_actions, horizon, best_value)
    return OracleResult(actions=best_sequence, value=float(best_value))
