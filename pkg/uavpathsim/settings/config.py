"""
Configuration of a UAVPathSim scenario.

All quantities are stored in linear SI units (watt, hertz, meter, second). The defaults reproduce the system
parameters of the reference cellular scenario: 800 m x 800 m area, 40 m grid, 15 base stations, 2 GHz carrier,
180 kHz resource blocks in 20 MHz and a two layer deep echo state network per UAV.

A configuration file is a YAML mapping whose keys are the field names of :class:`ScenarioConfig` (nested
mappings for ``weights`` and ``esn``, a list of mappings for ``uav_missions``). Unknown keys are rejected.
Quantities which are usually quoted in dB can alternatively be given with the keys listed in ``DECIBEL_ALIASES``.
"""

from __future__ import annotations
import dataclasses
import logging
import math
import os
from dataclasses import dataclass, field

import yaml

from uavpathsim.utilities import ConfigurationError, db_to_linear, dbm_to_watt, stable_hash

logger = logging.getLogger(__name__)


# yaml key -> (field name, conversion)
DECIBEL_ALIASES = {
    'noise_psd_dbm_per_hz': ('noise_psd_w_per_hz', dbm_to_watt),
    'sinr_threshold_db': ('sinr_threshold', db_to_linear),
    'max_power_dbm': ('max_power_w', dbm_to_watt),
    'ue_power_dbm': ('ue_power_w', dbm_to_watt),
}

FADING_MODES = ('random', 'unit')
ALTITUDE_MODES = ('fixed', 'bounded')


@dataclass
class UavMission:
    """Mission of a single UAV

    Fields left at ``None`` are resolved from the scenario wide defaults when the world is built. A ``None``
    packet rate is drawn once from uniform(0, 1) packets/s with the mission random stream.
    """
    origin: int
    destination: int
    altitude_m: float | None = None
    max_power_w: float | None = None
    packet_rate: float | None = None
    packet_size_bits: float | None = None


@dataclass
class UtilityWeights:
    """Weights of the per-stage utility of a UAV"""
    interference: float = 1.0       # weight of the interference caused at non-serving base stations
    delay: float = 1.0              # weight of the M/D/1 transmission delay
    penalty: float = 10.0           # coefficient of the squared SINR threshold shortfall
    progress_bonus: float = 1.0     # added/subtracted when moving closer to/farther from the destination


@dataclass
class EsnParams:
    """Hyper parameters of the deep echo state network of one UAV

    ``layer_sizes`` of ``None`` selects the reservoir sizes from the number of UAVs (see
    :meth:`ScenarioConfig.reservoir_sizes`).
    """
    layer_sizes: list[int] | None = None
    leak_rates: list[float] = field(default_factory=lambda: [0.99, 0.99])
    spectral_radius_target: float = 0.9
    input_scale: float = 0.5

    @property
    def n_layers(self) -> int:
        return len(self.leak_rates)


@dataclass
class ScenarioConfig:
    """Complete description of a simulated scenario and of the learner running in it"""
    # geometry
    area_width_m: float = 800.0
    area_height_m: float = 800.0
    grid_step_m: float = 40.0
    bs_count: int = 15
    ue_count: int = 30

    # UAVs
    uav_missions: list[UavMission] = field(default_factory=list)
    uav_count: int = 1                      # used when no explicit missions are configured
    uav_altitude_m: float = 120.0
    max_power_w: float = 0.1                # 20 dBm
    packet_size_bits: float = 2000.0
    uav_speed_m_s: float = 10.0
    min_altitude_m: float = 50.0
    altitude_mode: str = 'fixed'

    # radio
    carrier_hz: float = 2e9
    noise_psd_w_per_hz: float = float(dbm_to_watt(-174.0))
    rb_bandwidth_hz: float = 180e3
    total_bandwidth_hz: float = 20e6
    rbs_per_uav: int = 3
    rbs_per_ue: int = 3
    ue_power_w: float = 0.1                 # 20 dBm
    rician_k: float = 1.59
    fading_mode: str = 'random'
    interference_cap_w: float = 1e-12       # per base station and resource block
    sinr_threshold: float = float(db_to_linear(-3.0))
    saturation_delay_s: float = 1.0

    # game
    nearest_bs_count: int = 2
    power_levels: int = 5
    weights: UtilityWeights = field(default_factory=UtilityWeights)
    distance_bin_m: float = 100.0
    orientation_bins: int = 8
    silence_on_arrival: bool = True
    forbid_revisits: bool = True
    mask_blocked_moves: bool = True

    # learning
    discount: float = 0.7
    epsilon: float = 0.3
    learn_rate: float = 0.01
    esn: EsnParams = field(default_factory=EsnParams)
    training_iterations: int = 2000
    randomize_training_missions: bool = False
    max_episode_steps: int | None = None

    rng_seed: int = 0

    # ------------------------------------------------------------------ derived quantities
    @property
    def n_cols(self) -> int:
        return int(round(self.area_width_m / self.grid_step_m))

    @property
    def n_rows(self) -> int:
        return int(round(self.area_height_m / self.grid_step_m))

    @property
    def cell_count(self) -> int:
        return self.n_cols * self.n_rows

    @property
    def rb_count(self) -> int:
        """Number of resource blocks available at every base station"""
        return int(self.total_bandwidth_hz // self.rb_bandwidth_hz)

    @property
    def noise_w(self) -> float:
        """Noise power in one resource block"""
        return self.rb_bandwidth_hz * self.noise_psd_w_per_hz

    @property
    def stage_duration_s(self) -> float:
        """Time a UAV needs to travel from one cell center to the next"""
        return self.grid_step_m / self.uav_speed_m_s

    @property
    def episode_step_cap(self) -> int:
        if self.max_episode_steps is not None:
            return self.max_episode_steps
        return 4 * (self.n_cols + self.n_rows)

    @property
    def n_uavs(self) -> int:
        return len(self.uav_missions) if self.uav_missions else self.uav_count

    @property
    def n_actions(self) -> int:
        return 5 * self.power_levels * self.nearest_bs_count

    @property
    def observation_length(self) -> int:
        return 2 * self.nearest_bs_count + 1 + 2 * self.n_uavs

    def reservoir_sizes(self) -> list[int]:
        """Reservoir sizes per layer: configured ones, or (12, 6) for up to two UAVs and (20, 10) above"""
        if self.esn.layer_sizes is not None:
            return list(self.esn.layer_sizes)
        small, large = [12, 6], [20, 10]
        sizes = small if self.n_uavs <= 2 else large
        if self.esn.n_layers <= len(sizes):
            return sizes[:self.esn.n_layers]
        return sizes + [sizes[-1]] * (self.esn.n_layers - len(sizes))

    # ------------------------------------------------------------------ validation / serialization
    def validate(self):
        """Check all invariants of the configuration

        Raises:
            ConfigurationError: naming the offending field
        """
        for name in ('area_width_m', 'area_height_m', 'grid_step_m', 'carrier_hz', 'noise_psd_w_per_hz',
                     'rb_bandwidth_hz', 'total_bandwidth_hz', 'uav_speed_m_s', 'packet_size_bits',
                     'uav_altitude_m', 'distance_bin_m', 'saturation_delay_s'):
            if not getattr(self, name) > 0:
                raise ConfigurationError('{} must be positive, got {}'.format(name, getattr(self, name)))
        for name in ('area_width_m', 'area_height_m'):
            ratio = getattr(self, name) / self.grid_step_m
            if abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 1:
                raise ConfigurationError('grid_step_m={} does not divide {}={}'.format(
                    self.grid_step_m, name, getattr(self, name)))
        for name in ('bs_count', 'power_levels', 'orientation_bins', 'rbs_per_uav', 'uav_count'):
            if getattr(self, name) < 1:
                raise ConfigurationError('{} must be at least 1, got {}'.format(name, getattr(self, name)))
        for name in ('ue_count', 'rbs_per_ue', 'training_iterations'):
            if getattr(self, name) < 0:
                raise ConfigurationError('{} must not be negative, got {}'.format(name, getattr(self, name)))
        for name in ('max_power_w', 'ue_power_w', 'rician_k', 'interference_cap_w', 'sinr_threshold',
                     'min_altitude_m', 'learn_rate'):
            if getattr(self, name) < 0:
                raise ConfigurationError('{} must not be negative, got {}'.format(name, getattr(self, name)))
        if self.rb_count < 1:
            raise ConfigurationError('total_bandwidth_hz must hold at least one resource block')
        if not 1 <= self.nearest_bs_count <= self.bs_count:
            raise ConfigurationError('nearest_bs_count must be in [1, bs_count={}], got {}'.format(
                self.bs_count, self.nearest_bs_count))
        if not 0.0 < self.discount < 1.0:
            raise ConfigurationError('discount must be in (0, 1), got {}'.format(self.discount))
        if not 0.0 <= self.epsilon <= 1.0:
            raise ConfigurationError('epsilon must be in [0, 1], got {}'.format(self.epsilon))
        if self.max_episode_steps is not None and self.max_episode_steps < 1:
            raise ConfigurationError('max_episode_steps must be at least 1, got {}'.format(self.max_episode_steps))
        if self.fading_mode not in FADING_MODES:
            raise ConfigurationError('fading_mode must be one of {}, got {!r}'.format(FADING_MODES, self.fading_mode))
        if self.altitude_mode not in ALTITUDE_MODES:
            raise ConfigurationError('altitude_mode must be one of {}, got {!r}'.format(
                ALTITUDE_MODES, self.altitude_mode))

        for name, value in dataclasses.asdict(self.weights).items():
            if value < 0:
                raise ConfigurationError('weights.{} must not be negative, got {}'.format(name, value))

        if self.esn.n_layers < 1:
            raise ConfigurationError('esn.leak_rates must define at least one layer')
        for leak in self.esn.leak_rates:
            if not 0.0 <= leak <= 1.0:
                raise ConfigurationError('esn.leak_rates entries must be in [0, 1], got {}'.format(leak))
        if self.esn.layer_sizes is not None:
            if len(self.esn.layer_sizes) != self.esn.n_layers:
                raise ConfigurationError('esn.layer_sizes has {} entries but esn.leak_rates has {}'.format(
                    len(self.esn.layer_sizes), self.esn.n_layers))
            if min(self.esn.layer_sizes) < 1:
                raise ConfigurationError('esn.layer_sizes entries must be at least 1')
        if not 0.0 < self.esn.spectral_radius_target < 1.0:
            raise ConfigurationError('esn.spectral_radius_target must be in (0, 1), got {}'.format(
                self.esn.spectral_radius_target))
        if not self.esn.input_scale > 0:
            raise ConfigurationError('esn.input_scale must be positive')

        for idx, mission in enumerate(self.uav_missions):
            for name in ('origin', 'destination'):
                cell = getattr(mission, name)
                if not 0 <= cell < self.cell_count:
                    raise ConfigurationError('uav_missions[{}].{}={} is not a cell of the {}x{} grid'.format(
                        idx, name, cell, self.n_cols, self.n_rows))
            if mission.origin == mission.destination:
                raise ConfigurationError('uav_missions[{}]: origin and destination must differ'.format(idx))
            if mission.packet_rate is not None and not 0.0 < mission.packet_rate < 1.0:
                raise ConfigurationError('uav_missions[{}].packet_rate must be in (0, 1), got {}'.format(
                    idx, mission.packet_rate))
            if mission.max_power_w is not None and mission.max_power_w < 0:
                raise ConfigurationError('uav_missions[{}].max_power_w must not be negative'.format(idx))
            if mission.altitude_m is not None and mission.altitude_m <= 0:
                raise ConfigurationError('uav_missions[{}].altitude_m must be positive'.format(idx))
            if mission.packet_size_bits is not None and mission.packet_size_bits <= 0:
                raise ConfigurationError('uav_missions[{}].packet_size_bits must be positive'.format(idx))
        if not self.uav_missions and self.cell_count < 2:
            raise ConfigurationError('random missions need at least two grid cells')
        return self

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def config_hash(self) -> str:
        """SHA-256 of the canonical serialization, stored in manifests and checkpoints"""
        return stable_hash(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict | None) -> 'ScenarioConfig':
        """Build and validate a configuration from a (parsed YAML) mapping

        Raises:
            ConfigurationError: unknown keys or violated invariants
        """
        data = dict(data or {})
        for alias, (target, convert) in DECIBEL_ALIASES.items():
            if alias in data:
                if target in data:
                    raise ConfigurationError('both {} and {} given'.format(alias, target))
                data[target] = float(convert(data.pop(alias)))

        kwargs = _check_keys(cls, data, '')
        if 'weights' in kwargs:
            kwargs['weights'] = UtilityWeights(**_check_keys(UtilityWeights, kwargs['weights'], 'weights.'))
        if 'esn' in kwargs:
            kwargs['esn'] = EsnParams(**_check_keys(EsnParams, kwargs['esn'], 'esn.'))
        if 'uav_missions' in kwargs:
            missions = []
            for idx, entry in enumerate(kwargs['uav_missions'] or []):
                prefix = 'uav_missions[{}].'.format(idx)
                entry = _check_keys(UavMission, entry, prefix)
                for required in ('origin', 'destination'):
                    if required not in entry:
                        raise ConfigurationError('{}{} is required'.format(prefix, required))
                missions.append(UavMission(**entry))
            kwargs['uav_missions'] = missions
        return cls(**kwargs).validate()


def _check_keys(klass, data, prefix: str) -> dict:
    if not isinstance(data, dict):
        raise ConfigurationError('{} must be a mapping, got {}'.format(prefix.rstrip('.') or 'configuration',
                                                                       type(data).__name__))
    known = {f.name for f in dataclasses.fields(klass)}
    for key in data:
        if key not in known:
            raise ConfigurationError('unknown configuration key: {}{}'.format(prefix, key))
    return dict(data)


def load_config(path: str | os.PathLike | None = None) -> ScenarioConfig:
    """Read a scenario configuration file

    Args:
        path: YAML file. ``None`` gives the default configuration.

    Returns:
        validated ScenarioConfig

    Raises:
        FileNotFoundError: the file does not exist
        ConfigurationError: unknown keys or violated invariants
    """
    if path is None:
        return ScenarioConfig().validate()
    if not os.path.exists(path):
        raise FileNotFoundError('Configuration file {} was not found'.format(path))
    with open(path, 'r') as fin:
        data = yaml.safe_load(fin)
    logger.debug('Loaded configuration from %s', path)
    return ScenarioConfig.from_dict(data)


def with_overrides(config: ScenarioConfig, **changes) -> ScenarioConfig:
    """Copy of ``config`` with top-level fields replaced, validated again"""
    return dataclasses.replace(config, **changes).validate()


def diagonal_m(config: ScenarioConfig) -> float:
    return math.hypot(config.area_width_m, config.area_height_m)
