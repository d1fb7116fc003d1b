import pytest

from uavpathsim.network.scenario import build_world
from uavpathsim.settings.config import ScenarioConfig, UavMission, UtilityWeights


@pytest.fixture
def small_config():
    """4x4 grid, three base stations, a few UEs and one UAV flying corner to corner with unit fading"""
    return ScenarioConfig(area_width_m=160.0, area_height_m=160.0, grid_step_m=40.0, bs_count=3, ue_count=4,
                          uav_missions=[UavMission(origin=0, destination=15, packet_rate=0.5)],
                          fading_mode='unit', training_iterations=10).validate()


@pytest.fixture
def small_world(small_config):
    return build_world(small_config, seed=3)


@pytest.fixture
def two_uav_config():
    return ScenarioConfig(area_width_m=160.0, area_height_m=160.0, grid_step_m=40.0, bs_count=3, ue_count=4,
                          uav_missions=[UavMission(origin=0, destination=15, packet_rate=0.5),
                                        UavMission(origin=12, destination=3, packet_rate=0.5)],
                          training_iterations=10).validate()


@pytest.fixture
def oracle_config():
    """Single-UAV 4x4 world with one power level and one association choice"""
    return ScenarioConfig(area_width_m=160.0, area_height_m=160.0, grid_step_m=40.0, bs_count=3, ue_count=3,
                          uav_missions=[UavMission(origin=0, destination=15, packet_rate=0.5)],
                          power_levels=1, nearest_bs_count=1, fading_mode='unit').validate()


@pytest.fixture
def progress_only_weights():
    return UtilityWeights(interference=0.0, delay=0.0, penalty=0.0, progress_bonus=1.0)


@pytest.fixture
def config_file(tmp_path):
    """YAML file of a small single-UAV scenario"""
    fname = tmp_path / 'scenario.yaml'
    fname.write_text(
        'area_width_m: 160.0\n'
        'area_height_m: 160.0\n'
        'bs_count: 3\n'
        'ue_count: 4\n'
        'fading_mode: unit\n'
        'training_iterations: 4\n'
        'uav_missions:\n'
        '  - origin: 0\n'
        '    destination: 15\n'
        '    packet_rate: 0.5\n')
    return fname
