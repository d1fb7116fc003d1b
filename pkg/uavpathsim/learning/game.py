"""
Game played by the UAVs: observation encoding, action space, utility and the checks a finished trajectory has
to pass, plus analytic altitude bounds for a given link.

A stage of the game is evaluated on a world snapshot after all UAV actions have been applied at the barrier.
"""

from __future__ import annotations
import enum
import logging
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from uavpathsim.network import channel
from uavpathsim.network.scenario import Grid, nearest_bs_list
from uavpathsim.settings.config import ScenarioConfig, UavMission, UtilityWeights, diagonal_m
from uavpathsim.utilities import UnstableQueueError

logger = logging.getLogger(__name__)

SPEED_OF_LIGHT_M_S = 3e8


class Move(enum.Enum):
    LEFT = (-1, 0)
    RIGHT = (1, 0)
    FORWARD = (0, 1)
    BACKWARD = (0, -1)
    NONE = (0, 0)

    @property
    def dcol(self) -> int:
        return self.value[0]

    @property
    def drow(self) -> int:
        return self.value[1]


class Action(NamedTuple):
    move: Move
    power_level: int        # 1..O
    assoc: int              # 1..L, position in the nearest base station list


def enumerate_actions(config: ScenarioConfig) -> list[Action]:
    """All actions of a UAV ordered move-major, then power level, then association"""
    return [Action(move, level, assoc)
            for move in Move
            for level in range(1, config.power_levels + 1)
            for assoc in range(1, config.nearest_bs_count + 1)]


# ---------------------------------------------------------------------------- observation
@dataclass
class Observation:
    """Discretized network state seen by one UAV"""
    distance_bins: np.ndarray       # (L,) towards the L nearest base stations
    orientation_bins: np.ndarray    # (L,)
    destination_bin: int
    coordinates: np.ndarray         # (J, 2) column/row of all UAVs in id order

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.distance_bins, self.orientation_bins, [self.destination_bin],
                               self.coordinates.ravel()]).astype(int)

    def __len__(self):
        return 2 * len(self.distance_bins) + 1 + self.coordinates.size


def orientation(dx: float, dy: float) -> float:
    """Four-quadrant angle in [-pi, pi)"""
    angle = math.atan2(dy, dx)
    return -math.pi if angle >= math.pi else angle


def orientation_bin(angle: float, n_bins: int) -> int:
    width = 2.0 * math.pi / n_bins
    return int((angle + math.pi) // width) % n_bins


def distance_bin_count(config: ScenarioConfig) -> int:
    return max(1, math.ceil(diagonal_m(config) / config.distance_bin_m))


def distance_bin(distance_m: float, config: ScenarioConfig) -> int:
    return min(int(distance_m // config.distance_bin_m), distance_bin_count(config) - 1)


def observe(world, uav_id: int) -> Observation:
    """Observation of a UAV: binned distances and orientations towards its L nearest base stations and its
    destination, followed by the grid coordinates of all UAVs
    """
    cfg = world.config
    uav = world.uavs[uav_id]
    here = world.grid.center(uav.cell)
    nearest = nearest_bs_list(world, here, cfg.nearest_bs_count)

    distances, orientations = [], []
    for s in nearest:
        dx, dy = world.bs_positions[s] - here
        distances.append(distance_bin(math.hypot(dx, dy), cfg))
        orientations.append(orientation_bin(orientation(dx, dy), cfg.orientation_bins))

    dx, dy = world.grid.center(uav.destination) - here
    destination = 0 if uav.cell == uav.destination else orientation_bin(orientation(dx, dy), cfg.orientation_bins)
    coordinates = np.array([world.grid.col_row(other.cell) for other in world.uavs], dtype=int).reshape(-1, 2)
    return Observation(np.array(distances, dtype=int), np.array(orientations, dtype=int), destination, coordinates)


def encode_observation(observation: Observation, config: ScenarioConfig) -> np.ndarray:
    """Numerical ESN input: every bin index scaled to [0, 1] by its range

    Raises:
        ValueError: the observation does not match the configured number of base stations and UAVs
    """
    if len(observation) != config.observation_length:
        raise ValueError('observation has {} entries, the configuration expects {}'.format(
            len(observation), config.observation_length))

    def scaled(values, n):
        values = np.asarray(values, dtype=float)
        return values / (n - 1) if n > 1 else np.zeros_like(values)

    return np.concatenate([
        scaled(observation.distance_bins, distance_bin_count(config)),
        scaled(observation.orientation_bins, config.orientation_bins),
        scaled([observation.destination_bin], config.orientation_bins),
        scaled(observation.coordinates[:, 0], config.n_cols),
        scaled(observation.coordinates[:, 1], config.n_rows),
    ])


# ---------------------------------------------------------------------------- actions
def apply_action(world, uav_id: int, action: Action):
    """Move a UAV one cell, set its power level and serving base station

    Moves leaving the grid, and with ``forbid_revisits`` moves into an already visited cell, are executed as
    no-movement. The serving base station is picked from the nearest list at the new cell.

    Raises:
        ValueError: the UAV is already at its destination, or the action is out of range
    """
    cfg = world.config
    uav = world.uavs[uav_id]
    if uav.done:
        raise ValueError('UAV {} has reached its destination and takes no further actions'.format(uav_id))
    if not 1 <= action.power_level <= cfg.power_levels:
        raise ValueError('power level must be in [1, {}], got {}'.format(cfg.power_levels, action.power_level))
    if not 1 <= action.assoc <= cfg.nearest_bs_count:
        raise ValueError('association must be in [1, {}], got {}'.format(cfg.nearest_bs_count, action.assoc))

    target = world.grid.offset(uav.cell, action.move.dcol, action.move.drow)
    if target is None or (cfg.forbid_revisits and target != uav.cell and target in uav.visited):
        target = uav.cell
    uav.cell = target
    uav.visited.add(target)
    uav.power_level = action.power_level
    uav.power_w = action.power_level * uav.max_power_w / cfg.power_levels
    uav.serving_bs = nearest_bs_list(world, world.grid.center(target), cfg.nearest_bs_count)[action.assoc - 1]
    if target == uav.destination:
        uav.done = True
    world.invalidate()
    return uav


def blocked_moves(world, uav_id: int) -> set[Move]:
    """Moves that :func:`apply_action` would execute as no-movement from the current cell"""
    cfg = world.config
    uav = world.uavs[uav_id]
    blocked = set()
    for move in Move:
        if move is Move.NONE:
            continue
        target = world.grid.offset(uav.cell, move.dcol, move.drow)
        if target is None or (cfg.forbid_revisits and target in uav.visited):
            blocked.add(move)
    return blocked


def admissible_actions(world, uav_id: int, allow_hover: bool = True) -> np.ndarray:
    """Boolean mask over :func:`enumerate_actions` without the blocked moves

    ``allow_hover=False`` also drops no-movement, unless every move is blocked.
    """
    blocked = blocked_moves(world, uav_id)
    if not allow_hover and len(blocked) < len(Move) - 1:
        blocked.add(Move.NONE)
    return np.array([action.move not in blocked for action in enumerate_actions(world.config)])


# ---------------------------------------------------------------------------- utility
@dataclass(frozen=True)
class LinkState:
    """Radio state of a UAV after the barrier"""
    rate_bps: float
    sinr_sum: float
    delay_s: float
    caused_interference_w: float
    saturated: bool


def link_state(world, uav_id: int) -> LinkState:
    """Rate, summed SINR, M/D/1 delay and caused interference of a UAV

    An unstable queue saturates the delay at ``saturation_delay_s``.
    """
    cfg = world.config
    uav = world.uavs[uav_id]
    sinrs = channel.uav_sinrs(world, uav_id)
    rate = channel.uav_rate_bps(sinrs, cfg.rb_bandwidth_hz)
    try:
        delay = channel.mdd1_delay_s(uav.packet_rate, rate, uav.packet_size_bits)
        saturated = False
    except UnstableQueueError:
        delay = cfg.saturation_delay_s
        saturated = True
    return LinkState(rate_bps=rate, sinr_sum=float(np.sum(sinrs)), delay_s=min(delay, cfg.saturation_delay_s),
                     caused_interference_w=channel.caused_interference_w(world, uav_id), saturated=saturated)


def sinr_penalty(sinr_sum: float, threshold: float) -> float:
    """Squared shortfall of the summed SINR below the threshold"""
    return min(0.0, sinr_sum - threshold) ** 2


def phi_from_terms(state: LinkState, weights: UtilityWeights, threshold: float) -> float:
    return (-weights.interference * state.caused_interference_w
            - weights.delay * state.delay_s
            - weights.penalty * sinr_penalty(state.sinr_sum, threshold))


def phi(world, uav_id: int, weights: UtilityWeights | None = None) -> float:
    """Stage payoff of a UAV without the progress term: weighted caused interference, delay and SINR penalty"""
    cfg = world.config
    return phi_from_terms(link_state(world, uav_id), weights or cfg.weights, cfg.sinr_threshold)


def progress_utility(phi_value: float, distance_m: float, prev_distance_m: float, bonus: float) -> float:
    """Add the progress bonus when the destination got strictly closer, subtract it when it got farther"""
    if math.isclose(distance_m, prev_distance_m, rel_tol=1e-12, abs_tol=1e-9):
        return phi_value
    return phi_value + bonus if distance_m < prev_distance_m else phi_value - bonus


def utility(world, uav_id: int, prev_distance_m: float, phi_value: float | None = None,
            weights: UtilityWeights | None = None) -> float:
    """Utility of a UAV for the stage just played

    Args:
        prev_distance_m: distance to the destination before the move
        phi_value: precomputed payoff, evaluated from the world when ``None``
    """
    weights = weights or world.config.weights
    if phi_value is None:
        phi_value = phi(world, uav_id, weights)
    return progress_utility(phi_value, world.distance_to_destination(uav_id), prev_distance_m,
                            weights.progress_bonus)


# ---------------------------------------------------------------------------- altitude bounds
@dataclass(frozen=True)
class AltitudeBounds:
    h_min_m: float
    h_max_m: float
    chi_m: float


def _free_space_factor(carrier_hz: float) -> float:
    return (4.0 * math.pi * carrier_hz / SPEED_OF_LIGHT_M_S) ** 2


def max_altitude(power_w: float, n_rbs: int, fading, interference_w, noise_w: float, sinr_threshold: float,
                 carrier_hz: float, dx: float, dy: float, min_altitude_m: float) -> float:
    """Highest altitude at which the summed SINR at the serving base station still reaches the threshold

    A negative radicand gives the minimum altitude.
    """
    fading = np.atleast_1d(np.asarray(fading, dtype=float))
    interference_w = np.broadcast_to(np.asarray(interference_w, dtype=float), fading.shape)
    radicand = (power_w / (n_rbs * sinr_threshold * _free_space_factor(carrier_hz))
                * np.sum(fading / (interference_w + noise_w)) - dx ** 2 - dy ** 2)
    h_max = math.sqrt(radicand) if radicand > 0 else 0.0
    return max(min_altitude_m, h_max)


def min_altitude(power_w: float, n_rbs: int, fading, interference_cap_sum_w: float, carrier_hz: float,
                 offsets, min_altitude_m: float) -> float:
    """Lowest altitude at which the interference caused at each neighboring base station stays below its cap

    Args:
        fading: (R, C) fading gains towards each neighbor r on the UAV's RBs
        interference_cap_sum_w: cap summed over the UAV's RBs
        offsets: (R, 2) horizontal offsets towards each neighbor
    """
    fading = np.atleast_2d(np.asarray(fading, dtype=float))
    offsets = np.atleast_2d(np.asarray(offsets, dtype=float))
    h_min = min_altitude_m
    if fading.size == 0 or interference_cap_sum_w <= 0:
        return h_min
    scale = power_w / (n_rbs * _free_space_factor(carrier_hz) * interference_cap_sum_w)
    for gains, (dx, dy) in zip(fading, offsets):
        radicand = scale * np.sum(gains) - dx ** 2 - dy ** 2
        if radicand > 0:
            h_min = max(h_min, math.sqrt(radicand))
    return h_min


def _bound_inputs(world, uav_id: int, action: Action | None):
    cfg = world.config
    uav = world.uavs[uav_id]
    power, serving = uav.power_w, uav.serving_bs
    if action is not None:
        power = action.power_level * uav.max_power_w / cfg.power_levels
        serving = nearest_bs_list(world, world.grid.center(uav.cell), cfg.nearest_bs_count)[action.assoc - 1]
    rbs = list(uav.rbs) if uav.rbs else list(range(cfg.rbs_per_uav))
    return power, serving, rbs


def altitude_upper(world, uav_id: int, action: Action | None = None) -> float:
    """Upper altitude bound of a UAV at its current cell (optionally for a candidate action)"""
    cfg = world.config
    power, serving, rbs = _bound_inputs(world, uav_id, action)
    dx, dy = world.bs_positions[serving] - world.grid.center(world.uavs[uav_id].cell)
    return max_altitude(power, len(rbs), world.uav_fading[uav_id, serving, rbs],
                        channel.interference_map(world)[serving, rbs], cfg.noise_w, cfg.sinr_threshold,
                        cfg.carrier_hz, dx, dy, cfg.min_altitude_m)


def altitude_lower(world, uav_id: int, action: Action | None = None) -> float:
    """Lower altitude bound of a UAV over all non-serving base stations"""
    cfg = world.config
    power, serving, rbs = _bound_inputs(world, uav_id, action)
    neighbors = [s for s in range(world.bs_count) if s != serving]
    offsets = world.bs_positions[neighbors] - world.grid.center(world.uavs[uav_id].cell)
    fading = world.uav_fading[uav_id][np.ix_(neighbors, rbs)]
    return min_altitude(power, len(rbs), fading, len(rbs) * cfg.interference_cap_w, cfg.carrier_hz, offsets,
                        cfg.min_altitude_m)


def altitude_bounds(world, uav_id: int, action: Action | None = None) -> AltitudeBounds:
    return AltitudeBounds(h_min_m=altitude_lower(world, uav_id, action), h_max_m=altitude_upper(world, uav_id, action),
                          chi_m=world.config.min_altitude_m)


def adjust_altitude(world, uav_id: int) -> float:
    """Clamp the altitude of a UAV into its bounds when they are consistent"""
    bounds = altitude_bounds(world, uav_id)
    uav = world.uavs[uav_id]
    if bounds.h_min_m <= bounds.h_max_m:
        altitude = min(max(uav.altitude_m, bounds.h_min_m), bounds.h_max_m)
        if altitude != uav.altitude_m:
            logger.debug('UAV %d altitude %.1f m -> %.1f m', uav_id, uav.altitude_m, altitude)
            uav.altitude_m = altitude
            world.invalidate()
    return uav.altitude_m


# ---------------------------------------------------------------------------- trajectory checks
class Constraint(enum.Enum):
    VISIT_ONCE = 'each cell is visited at most once'
    ENDPOINTS = 'the path starts at the origin and ends at the destination'
    FLOW = 'consecutive cells are neighbors'
    POWER_ON_VISIT = 'power is only assigned to visited cells'
    SINGLE_ASSOCIATION = 'one serving base station per visited cell'
    SINR_THRESHOLD = 'summed SINR reaches the threshold'
    POWER_BOUNDS = 'power within [0, maximum power]'
    FEASIBILITY = 'cells and base stations are valid indices'


SOFT_CONSTRAINTS = frozenset({Constraint.SINR_THRESHOLD})


@dataclass(frozen=True)
class Violation:
    constraint: Constraint
    step: int | None
    detail: str


@dataclass
class ValidityReport:
    violations: list[Violation] = field(default_factory=list)

    @property
    def valid(self) -> bool:
        """No hard constraint is violated; SINR shortfalls are only reported"""
        return not any(v.constraint not in SOFT_CONSTRAINTS for v in self.violations)

    def __iter__(self):
        yield self.valid
        yield self.violations


def trajectory_valid(path, assoc, power, mission: UavMission, grid: Grid, sinr=None,
                     sinr_threshold: float | None = None) -> ValidityReport:
    """Check a finished trajectory

    Args:
        path: visited cells including the origin, one entry per stage
        assoc: serving base station per entry of ``path``
        power: transmit power in W per entry of ``path``
        mission: resolved mission (``max_power_w`` set)
        grid: the grid of the world
        sinr: optional summed SINR per entry, ``None`` entries are skipped
        sinr_threshold: threshold for the soft SINR check

    Returns:
        report, unpacks to ``(valid, violations)``
    """
    report = ValidityReport()

    def violate(constraint, step, detail):
        report.violations.append(Violation(constraint, step, detail))

    path = [int(c) for c in path]
    for step, cell in enumerate(path):
        if not 0 <= cell < grid.size:
            violate(Constraint.FEASIBILITY, step, 'cell {} is outside the grid'.format(cell))
    if any(v.constraint is Constraint.FEASIBILITY for v in report.violations) or not path:
        if not path:
            violate(Constraint.ENDPOINTS, None, 'empty path')
        return report

    compressed = [cell for k, cell in enumerate(path) if k == 0 or cell != path[k - 1]]
    seen = set()
    for cell in compressed:
        if cell in seen:
            violate(Constraint.VISIT_ONCE, path.index(cell), 'cell {} is visited twice'.format(cell))
        seen.add(cell)

    if path[0] != mission.origin:
        violate(Constraint.ENDPOINTS, 0, 'path starts at {} instead of {}'.format(path[0], mission.origin))
    if path[-1] != mission.destination:
        violate(Constraint.ENDPOINTS, len(path) - 1,
                'path ends at {} instead of {}'.format(path[-1], mission.destination))

    for step in range(1, len(path)):
        if grid.manhattan(path[step - 1], path[step]) > 1:
            violate(Constraint.FLOW, step, 'jump from {} to {}'.format(path[step - 1], path[step]))

    if len(power) != len(path):
        violate(Constraint.POWER_ON_VISIT, None, '{} power entries for {} visited cells'.format(len(power), len(path)))
    if len(assoc) != len(path):
        violate(Constraint.SINGLE_ASSOCIATION, None,
                '{} associations for {} visited cells'.format(len(assoc), len(path)))
    for step, bs in enumerate(assoc):
        if not isinstance(bs, (int, np.integer)):
            violate(Constraint.SINGLE_ASSOCIATION, step, 'association {!r} is not a single base station'.format(bs))
        elif bs < 0:
            violate(Constraint.FEASIBILITY, step, 'base station {} does not exist'.format(bs))

    for step, value in enumerate(power):
        if not 0.0 <= value <= mission.max_power_w * (1.0 + 1e-12):
            violate(Constraint.POWER_BOUNDS, step, 'power {:.6g} W outside [0, {:.6g}] W'.format(
                value, mission.max_power_w))

    if sinr is not None and sinr_threshold is not None:
        for step, value in enumerate(sinr):
            if value is not None and value < sinr_threshold:
                violate(Constraint.SINR_THRESHOLD, step, 'summed SINR {:.4g} below {:.4g}'.format(
                    value, sinr_threshold))
    return report
