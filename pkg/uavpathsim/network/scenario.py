"""
This module contains the static world of a simulation: grid geometry, base stations, ground UEs, UAV missions
and the resource block (RB) plan, together with the per-stage dynamic part (UAV states and fading draws).

Cells are indexed row-major, ``index = row * n_cols + col``. Moving "right" increases the column, moving
"forward" increases the row.
"""

from __future__ import annotations
import logging
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from uavpathsim.network.channel import draw_fading_gains
from uavpathsim.settings.config import ScenarioConfig, UavMission
from uavpathsim.utilities import CapacityError

logger = logging.getLogger(__name__)


class Device(NamedTuple):
    """Identifier of a transmitter; ``kind`` is 'ue' or 'uav'"""
    kind: str
    id: int


@dataclass(frozen=True)
class Grid:
    """Discretization of the area into square cells of side ``step_m``"""
    n_cols: int
    n_rows: int
    step_m: float

    @property
    def size(self) -> int:
        return self.n_cols * self.n_rows

    def col_row(self, index: int) -> tuple[int, int]:
        self._check(index)
        return index % self.n_cols, index // self.n_cols

    def index(self, col: int, row: int) -> int:
        if not (0 <= col < self.n_cols and 0 <= row < self.n_rows):
            raise IndexError('cell ({}, {}) is outside the {}x{} grid'.format(col, row, self.n_cols, self.n_rows))
        return row * self.n_cols + col

    def center(self, index: int) -> np.ndarray:
        col, row = self.col_row(index)
        return np.array([(col + 0.5) * self.step_m, (row + 0.5) * self.step_m])

    def offset(self, index: int, dcol: int, drow: int) -> int | None:
        """Index of the cell shifted by (dcol, drow), ``None`` if that leaves the grid"""
        col, row = self.col_row(index)
        col, row = col + dcol, row + drow
        if 0 <= col < self.n_cols and 0 <= row < self.n_rows:
            return row * self.n_cols + col
        return None

    def manhattan(self, first: int, second: int) -> int:
        c1, r1 = self.col_row(first)
        c2, r2 = self.col_row(second)
        return abs(c1 - c2) + abs(r1 - r2)

    def _check(self, index):
        if not 0 <= index < self.size:
            raise IndexError('cell index {} is outside the grid with {} cells'.format(index, self.size))


def make_grid(config: ScenarioConfig) -> Grid:
    return Grid(n_cols=config.n_cols, n_rows=config.n_rows, step_m=config.grid_step_m)


def cell_center(grid: Grid, index: int) -> tuple[float, float]:
    """Center (x, y) of a cell in meters

    Raises:
        IndexError: index outside the grid
    """
    x, y = grid.center(index)
    return float(x), float(y)


@dataclass
class BaseStation:
    id: int
    position: np.ndarray                # (x, y), altitude 0
    ue_ids: list[int] = field(default_factory=list)
    uav_ids: list[int] = field(default_factory=list)
    rb_map: dict[int, Device] = field(default_factory=dict)


@dataclass
class GroundUE:
    id: int
    position: np.ndarray
    serving_bs: int
    power_w: float
    rbs: tuple[int, ...] = ()

    @property
    def device(self) -> Device:
        return Device('ue', self.id)

    @property
    def power_per_rb_w(self) -> float:
        return self.power_w / len(self.rbs) if self.rbs else 0.0


@dataclass
class UavState:
    id: int
    origin: int
    destination: int
    cell: int
    altitude_m: float
    max_power_w: float
    packet_rate: float
    packet_size_bits: float
    serving_bs: int
    power_level: int
    power_w: float
    rbs: tuple[int, ...] = ()
    done: bool = False
    silenced: bool = False
    prev_distance_m: float = 0.0
    visited: set[int] = field(default_factory=set)

    @property
    def device(self) -> Device:
        return Device('uav', self.id)

    @property
    def power_per_rb_w(self) -> float:
        if self.silenced or not self.rbs:
            return 0.0
        return self.power_w / len(self.rbs)

    @property
    def mission(self) -> UavMission:
        return UavMission(origin=self.origin, destination=self.destination, altitude_m=self.altitude_m,
                          max_power_w=self.max_power_w, packet_rate=self.packet_rate,
                          packet_size_bits=self.packet_size_bits)


def allocate_rbs(bs: BaseStation, requests: list[tuple[Device, int]], rb_count: int) -> dict[Device, tuple]:
    """Assign resource blocks of one base station, lowest index first in request order

    Args:
        bs: the base station; its ``rb_map`` is replaced
        requests: (device, number of RBs) in allocation order
        rb_count: RBs available at the base station

    Returns:
        device -> tuple of RB indices, pairwise disjoint

    Raises:
        CapacityError: more RBs requested than available
    """
    total = sum(n for _, n in requests)
    if total > rb_count:
        raise CapacityError('base station {} needs {} resource blocks but only {} are available'.format(
            bs.id, total, rb_count))
    assignment = {}
    next_rb = 0
    for device, n in requests:
        assignment[device] = tuple(range(next_rb, next_rb + n))
        next_rb += n
    bs.rb_map = {rb: device for device, rbs in assignment.items() for rb in rbs}
    assert len(bs.rb_map) == total
    return assignment


def nearest_bs_list(world: 'World', position, count: int) -> list[int]:
    """Ids of the ``count`` base stations closest (2D) to ``position``, ties broken by lower id"""
    if not 1 <= count <= len(world.base_stations):
        raise ValueError('count must be in [1, {}], got {}'.format(len(world.base_stations), count))
    distances = np.hypot(*(world.bs_positions - np.asarray(position, dtype=float)[:2]).T)
    order = np.argsort(distances, kind='stable')
    return [int(s) for s in order[:count]]


def random_missions(config: ScenarioConfig, rng: np.random.Generator, count: int) -> list[UavMission]:
    """Missions with distinct random origin and destination cells"""
    missions = []
    for _ in range(count):
        origin, destination = rng.choice(config.cell_count, size=2, replace=False)
        missions.append(UavMission(origin=int(origin), destination=int(destination)))
    return missions


class World:
    """Network snapshot: immutable topology plus the per-stage dynamic state of the UAVs

    The dynamic part (UAV states, RB plan, fading draws) is mutated through :meth:`advance_stage`,
    :meth:`reset_uavs` and :meth:`silence_uav` only. Derived channel quantities are cached per stage in
    ``cache`` and dropped by :meth:`invalidate`.
    """

    def __init__(self, config: ScenarioConfig, grid: Grid, base_stations: list[BaseStation], ues: list[GroundUE],
                 missions: list[UavMission], mission_rng: np.random.Generator, fading_seed: np.random.SeedSequence):
        self.config = config
        self.grid = grid
        self.base_stations = base_stations
        self.ues = ues
        self.bs_positions = np.array([bs.position for bs in base_stations], dtype=float).reshape(-1, 2)
        self.ue_positions = np.array([ue.position for ue in ues], dtype=float).reshape(-1, 2)
        self.mission_rng = mission_rng
        self.fading_seed = fading_seed
        self.fading_rng = np.random.default_rng(fading_seed)
        self.uavs: list[UavState] = []
        self.missions: list[UavMission] = []
        self.stage = 0
        self.uav_fading = np.ones((0, len(base_stations), config.rb_count))
        self.ue_fading = np.ones((len(ues), len(base_stations), config.rb_count))
        self.cache = {}
        self.reset_uavs(missions)

    @property
    def rb_count(self) -> int:
        return self.config.rb_count

    @property
    def bs_count(self) -> int:
        return len(self.base_stations)

    def uav_position(self, uav_id: int) -> np.ndarray:
        """(x, y, h) of a UAV in meters"""
        uav = self.uavs[uav_id]
        x, y = self.grid.center(uav.cell)
        return np.array([x, y, uav.altitude_m])

    def distance_to_destination(self, uav_id: int) -> float:
        uav = self.uavs[uav_id]
        return float(np.hypot(*(self.grid.center(uav.cell) - self.grid.center(uav.destination))))

    def live_uavs(self) -> list[int]:
        return [uav.id for uav in self.uavs if not uav.done]

    # ------------------------------------------------------------------ dynamic state
    def reset_uavs(self, missions: list[UavMission] | None = None, fading_seed=None):
        """Place the UAVs at their mission origins, restart the stage counter and the fading stream

        Args:
            missions: new missions, kept for later resets. ``None`` reuses the current ones.
            fading_seed: entropy for the fading stream, default is the stream of the world seed
        """
        if missions is not None:
            self.missions = [self._resolve(m) for m in missions]
        cfg = self.config
        self.uavs = []
        for uav_id, mission in enumerate(self.missions):
            origin_xy = self.grid.center(mission.origin)
            uav = UavState(id=uav_id, origin=mission.origin, destination=mission.destination, cell=mission.origin,
                           altitude_m=mission.altitude_m, max_power_w=mission.max_power_w,
                           packet_rate=mission.packet_rate, packet_size_bits=mission.packet_size_bits,
                           serving_bs=nearest_bs_list(self, origin_xy, 1)[0], power_level=cfg.power_levels,
                           power_w=mission.max_power_w, visited={mission.origin})
            uav.prev_distance_m = float(np.hypot(*(origin_xy - self.grid.center(mission.destination))))
            if mission.origin == mission.destination:
                uav.done = True
                uav.silenced = cfg.silence_on_arrival
                if uav.silenced:
                    uav.power_w = 0.0
            self.uavs.append(uav)

        if fading_seed is None:
            self.fading_rng = np.random.default_rng(self.fading_seed)
        else:
            self.fading_rng = np.random.default_rng(np.random.SeedSequence(fading_seed))
        self.stage = 0
        self.reallocate_rbs()
        self.redraw_fading()

    def _resolve(self, mission: UavMission) -> UavMission:
        cfg = self.config
        return UavMission(
            origin=int(mission.origin), destination=int(mission.destination),
            altitude_m=cfg.uav_altitude_m if mission.altitude_m is None else float(mission.altitude_m),
            max_power_w=cfg.max_power_w if mission.max_power_w is None else float(mission.max_power_w),
            packet_rate=(1.0 - self.mission_rng.random()) if mission.packet_rate is None else float(mission.packet_rate),
            packet_size_bits=(cfg.packet_size_bits if mission.packet_size_bits is None
                              else float(mission.packet_size_bits)))

    def reallocate_rbs(self):
        """Recompute the RB plan: per base station UEs first, then transmitting UAVs, both in id order"""
        cfg = self.config
        for bs in self.base_stations:
            bs.uav_ids = [uav.id for uav in self.uavs if uav.serving_bs == bs.id and not uav.silenced]
            requests = [(Device('ue', q), cfg.rbs_per_ue) for q in bs.ue_ids]
            requests += [(Device('uav', j), cfg.rbs_per_uav) for j in bs.uav_ids]
            assignment = allocate_rbs(bs, requests, cfg.rb_count)
            for q in bs.ue_ids:
                self.ues[q].rbs = assignment[Device('ue', q)]
            for j in bs.uav_ids:
                self.uavs[j].rbs = assignment[Device('uav', j)]
        for uav in self.uavs:
            if uav.silenced:
                uav.rbs = ()
        self.invalidate()

    def redraw_fading(self):
        """Draw i.i.d. unit-mean power gains for every (device, base station, RB)"""
        cfg = self.config
        uav_shape = (len(self.uavs), self.bs_count, cfg.rb_count)
        ue_shape = (len(self.ues), self.bs_count, cfg.rb_count)
        if cfg.fading_mode == 'unit':
            self.uav_fading = np.ones(uav_shape)
            self.ue_fading = np.ones(ue_shape)
        else:
            self.uav_fading = draw_fading_gains('rician', cfg.rician_k, self.fading_rng, uav_shape)
            self.ue_fading = draw_fading_gains('rayleigh', 0.0, self.fading_rng, ue_shape)
        self.invalidate()

    def advance_stage(self):
        """Stage barrier: re-plan RBs at the (new) serving base stations and redraw fading"""
        self.reallocate_rbs()
        self.redraw_fading()
        self.stage += 1

    def silence_uav(self, uav_id: int):
        """Stop a UAV from transmitting; its RBs are released"""
        uav = self.uavs[uav_id]
        uav.silenced = True
        uav.power_w = 0.0
        bs = self.base_stations[uav.serving_bs]
        bs.rb_map = {rb: dev for rb, dev in bs.rb_map.items() if dev != uav.device}
        if uav_id in bs.uav_ids:
            bs.uav_ids.remove(uav_id)
        uav.rbs = ()
        self.invalidate()

    def invalidate(self):
        self.cache.clear()


def build_world(config: ScenarioConfig, seed: int | None = None) -> World:
    """Build the world of a scenario

    Base stations and UEs are placed uniformly at random in the area, every UE attaches to its nearest base
    station, UAVs start at their mission origins attached to their nearest base station at the highest power
    level. The result is a pure function of ``(config, seed)``.

    Args:
        config: validated scenario configuration
        seed: overrides ``config.rng_seed``

    Raises:
        ConfigurationError: a base station has fewer RBs than its attached devices need
    """
    seed = config.rng_seed if seed is None else seed
    placement_seed, mission_seed, fading_seed = np.random.SeedSequence(seed).spawn(3)
    placement_rng = np.random.default_rng(placement_seed)
    mission_rng = np.random.default_rng(mission_seed)

    area = np.array([config.area_width_m, config.area_height_m])
    bs_xy = placement_rng.uniform(0.0, area, size=(config.bs_count, 2))
    ue_xy = placement_rng.uniform(0.0, area, size=(config.ue_count, 2))

    base_stations = [BaseStation(id=s, position=bs_xy[s]) for s in range(config.bs_count)]
    ues = []
    for q in range(config.ue_count):
        serving = int(np.argmin(np.hypot(*(bs_xy - ue_xy[q]).T)))
        ues.append(GroundUE(id=q, position=ue_xy[q], serving_bs=serving, power_w=config.ue_power_w))
        base_stations[serving].ue_ids.append(q)

    missions = config.uav_missions or random_missions(config, mission_rng, config.uav_count)
    world = World(config, make_grid(config), base_stations, ues, missions, mission_rng, fading_seed)
    logger.debug('Built world (seed %s): %d cells, %d base stations, %d UEs, %d UAVs',
                 seed, world.grid.size, world.bs_count, len(ues), len(world.uavs))
    return world
