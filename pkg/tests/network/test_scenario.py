import numpy as np
import pytest

from uavpathsim.network.scenario import (BaseStation, Device, allocate_rbs, build_world, cell_center, make_grid,
                                         nearest_bs_list)
from uavpathsim.settings.config import ScenarioConfig, UavMission, with_overrides
from uavpathsim.utilities import CapacityError, ConfigurationError


class TestGrid(object):
    """Tests for the grid geometry
    """

    def test_reference_grid(self):
        """800 m x 800 m with a 40 m step gives 20 x 20 cells
        """
        grid = make_grid(ScenarioConfig())
        assert (grid.n_cols, grid.n_rows, grid.size) == (20, 20, 400)

    def test_cell_center(self):
        grid = make_grid(ScenarioConfig())
        assert cell_center(grid, 0) == (20.0, 20.0)
        assert cell_center(grid, 399) == (780.0, 780.0)
        assert cell_center(grid, 20) == (20.0, 60.0)
        with pytest.raises(IndexError):
            cell_center(grid, 400)

    def test_offset_and_distance(self):
        grid = make_grid(ScenarioConfig(area_width_m=160.0, area_height_m=160.0))
        assert grid.offset(0, 1, 0) == 1
        assert grid.offset(0, 0, 1) == 4
        assert grid.offset(0, -1, 0) is None
        assert grid.offset(15, 0, 1) is None
        assert grid.manhattan(0, 15) == 6


class TestWorldConstruction(object):
    """Tests for the seeded placement of base stations and UEs
    """

    def test_same_seed_same_world(self):
        config = ScenarioConfig()
        first, second = build_world(config, seed=11), build_world(config, seed=11)
        np.testing.assert_array_equal(first.bs_positions, second.bs_positions)
        np.testing.assert_array_equal(first.ue_positions, second.ue_positions)
        assert first.missions == second.missions
        other = build_world(config, seed=12)
        assert not np.array_equal(first.bs_positions, other.bs_positions)

    def test_positions_inside_area(self):
        world = build_world(ScenarioConfig(bs_count=15), seed=7)
        assert world.bs_positions.shape == (15, 2)
        assert np.all((world.bs_positions >= 0.0) & (world.bs_positions <= 800.0))
        assert np.all((world.ue_positions >= 0.0) & (world.ue_positions <= 800.0))

    def test_ues_attach_to_nearest_bs(self):
        world = build_world(ScenarioConfig(), seed=2)
        for ue in world.ues:
            distances = np.hypot(*(world.bs_positions - ue.position).T)
            assert ue.serving_bs == int(np.argmin(distances))
            assert ue.id in world.base_stations[ue.serving_bs].ue_ids

    def test_uavs_start_at_origin(self, small_world):
        uav = small_world.uavs[0]
        assert uav.cell == 0
        assert uav.power_w == pytest.approx(0.1)
        assert uav.power_level == 5
        assert uav.packet_rate == 0.5
        assert uav.altitude_m == 120.0
        assert len(uav.rbs) == 3
        assert not uav.done

    def test_random_missions(self):
        world = build_world(ScenarioConfig(uav_count=3), seed=5)
        assert len(world.uavs) == 3
        for uav in world.uavs:
            assert uav.origin != uav.destination
            assert 0.0 < uav.packet_rate <= 1.0

    def test_rb_shortage(self):
        """Too many devices at one base station is a configuration error naming the base station
        """
        config = ScenarioConfig(bs_count=1, ue_count=38, rbs_per_ue=3)
        with pytest.raises(ConfigurationError, match='base station 0'):
            build_world(config, seed=0)


class TestNearestBaseStations(object):
    """Tests for the nearest base station lists
    """

    def test_all_base_stations(self, small_world):
        assert sorted(nearest_bs_list(small_world, (10.0, 10.0), 3)) == [0, 1, 2]

    def test_position_at_base_station(self, small_world):
        for s, position in enumerate(small_world.bs_positions):
            assert nearest_bs_list(small_world, position, 1) == [s]

    def test_matches_exhaustive_sort(self):
        world = build_world(ScenarioConfig(), seed=4)
        position = np.array([333.0, 121.0])
        expected = sorted(range(world.bs_count), key=lambda s: (np.hypot(*(world.bs_positions[s] - position)), s))
        assert nearest_bs_list(world, position, 2) == expected[:2]

    def test_invalid_count(self, small_world):
        with pytest.raises(ValueError):
            nearest_bs_list(small_world, (0.0, 0.0), 4)


class TestResourceBlocks(object):
    """Tests for the resource block allocation
    """

    def test_single_request(self):
        bs = BaseStation(id=0, position=np.zeros(2))
        assignment = allocate_rbs(bs, [(Device('uav', 0), 3)], 100)
        assert assignment[Device('uav', 0)] == (0, 1, 2)

    def test_disjoint_requests(self):
        bs = BaseStation(id=0, position=np.zeros(2))
        assignment = allocate_rbs(bs, [(Device('ue', 0), 2), (Device('uav', 0), 2)], 100)
        assert assignment[Device('ue', 0)] == (0, 1)
        assert assignment[Device('uav', 0)] == (2, 3)
        assert len(bs.rb_map) == 4

    def test_capacity(self):
        bs = BaseStation(id=4, position=np.zeros(2))
        with pytest.raises(CapacityError, match='base station 4'):
            allocate_rbs(bs, [(Device('uav', 0), 101)], 100)

    def test_world_plan_is_disjoint(self):
        world = build_world(ScenarioConfig(uav_count=3), seed=1)
        for bs in world.base_stations:
            used = [rb for ue in bs.ue_ids for rb in world.ues[ue].rbs]
            used += [rb for j in bs.uav_ids for rb in world.uavs[j].rbs]
            assert len(used) == len(set(used))
            assert set(used) == set(bs.rb_map)


class TestWorldDynamics(object):
    """Tests for resets, stage barriers and silencing
    """

    def test_reset_restores_origin(self, small_world):
        uav = small_world.uavs[0]
        uav.cell = 5
        small_world.stage = 3
        small_world.reset_uavs()
        assert small_world.uavs[0].cell == 0
        assert small_world.stage == 0

    def test_start_at_destination(self, small_world):
        small_world.reset_uavs([UavMission(origin=5, destination=5, packet_rate=0.5)])
        uav = small_world.uavs[0]
        assert uav.done
        assert uav.power_w == 0.0
        assert uav.rbs == ()

    def test_advance_stage_redraws_fading(self, small_config):
        world = build_world(with_overrides(small_config, fading_mode='random'), seed=3)
        before = world.uav_fading.copy()
        world.advance_stage()
        assert world.stage == 1
        assert world.uav_fading.shape == before.shape
        assert not np.array_equal(world.uav_fading, before)

    def test_fading_seed_replays(self, small_config):
        world = build_world(with_overrides(small_config, fading_mode='random'), seed=3)
        world.reset_uavs(fading_seed=[3, 5, 0])
        first = world.ue_fading.copy()
        world.advance_stage()
        world.reset_uavs(fading_seed=[3, 5, 0])
        np.testing.assert_array_equal(world.ue_fading, first)

    def test_silence_releases_rbs(self, small_world):
        serving = small_world.uavs[0].serving_bs
        small_world.silence_uav(0)
        uav = small_world.uavs[0]
        assert uav.rbs == ()
        assert uav.power_w == 0.0
        assert Device('uav', 0) not in small_world.base_stations[serving].rb_map.values()
