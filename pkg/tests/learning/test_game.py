import math

import numpy as np
import pytest

from uavpathsim.learning.game import (Action, Constraint, LinkState, Move, admissible_actions, altitude_bounds,
                                      altitude_lower, altitude_upper, adjust_altitude, apply_action, blocked_moves,
                                      encode_observation,
                                      enumerate_actions, max_altitude, min_altitude, observe, orientation,
                                      orientation_bin, phi, phi_from_terms, progress_utility, sinr_penalty,
                                      trajectory_valid, utility)
from uavpathsim.network.scenario import build_world, make_grid
from uavpathsim.settings.config import ScenarioConfig, UavMission, UtilityWeights, with_overrides

NOISE_W = 7.166e-16
GAMMA = 10 ** -0.3


class TestActions(object):
    """Tests for the action space and its application
    """

    def test_enumeration(self):
        actions = enumerate_actions(ScenarioConfig())
        assert len(actions) == 50
        assert actions[0] == Action(Move.LEFT, 1, 1)
        assert actions[1] == Action(Move.LEFT, 1, 2)
        assert actions[-1] == Action(Move.NONE, 5, 2)
        assert len(enumerate_actions(ScenarioConfig(power_levels=1, nearest_bs_count=1))) == 5

    def test_stay_at_max_power(self, small_world):
        uav = apply_action(small_world, 0, Action(Move.NONE, 5, 1))
        assert uav.cell == 0
        assert uav.power_w == pytest.approx(0.1)

    def test_power_level(self, small_world):
        uav = apply_action(small_world, 0, Action(Move.RIGHT, 2, 1))
        assert uav.cell == 1
        assert uav.power_w == pytest.approx(0.04)

    def test_boundary_is_no_movement(self, small_world):
        assert apply_action(small_world, 0, Action(Move.LEFT, 5, 1)).cell == 0
        assert apply_action(small_world, 0, Action(Move.BACKWARD, 5, 1)).cell == 0

    def test_revisit_is_no_movement(self, small_world):
        apply_action(small_world, 0, Action(Move.RIGHT, 5, 1))
        assert apply_action(small_world, 0, Action(Move.LEFT, 5, 1)).cell == 1

    def test_revisit_allowed(self, small_config):
        world = build_world(with_overrides(small_config, forbid_revisits=False), seed=3)
        apply_action(world, 0, Action(Move.RIGHT, 5, 1))
        assert apply_action(world, 0, Action(Move.LEFT, 5, 1)).cell == 0

    def test_association(self, small_config):
        world = build_world(with_overrides(small_config, nearest_bs_count=2), seed=3)
        uav = apply_action(world, 0, Action(Move.FORWARD, 5, 2))
        ranked = sorted(range(3), key=lambda s: np.hypot(*(world.bs_positions[s] - world.grid.center(4))))
        assert uav.cell == 4
        assert uav.serving_bs == ranked[1]

    def test_arrival(self, small_world):
        for move in (Move.RIGHT, Move.RIGHT, Move.RIGHT, Move.FORWARD, Move.FORWARD, Move.FORWARD):
            apply_action(small_world, 0, Action(move, 5, 1))
        assert small_world.uavs[0].cell == 15
        assert small_world.uavs[0].done
        with pytest.raises(ValueError):
            apply_action(small_world, 0, Action(Move.NONE, 5, 1))

    def test_out_of_range(self, small_world):
        with pytest.raises(ValueError):
            apply_action(small_world, 0, Action(Move.NONE, 6, 1))
        with pytest.raises(ValueError):
            apply_action(small_world, 0, Action(Move.NONE, 5, 3))

    def test_blocked_moves(self, small_world):
        assert blocked_moves(small_world, 0) == {Move.LEFT, Move.BACKWARD}
        apply_action(small_world, 0, Action(Move.RIGHT, 5, 1))
        assert blocked_moves(small_world, 0) == {Move.LEFT, Move.BACKWARD}
        apply_action(small_world, 0, Action(Move.FORWARD, 5, 1))
        assert blocked_moves(small_world, 0) == {Move.BACKWARD}

    def test_admissible_actions(self, small_world):
        actions = enumerate_actions(small_world.config)
        allowed = admissible_actions(small_world, 0)
        assert allowed.shape == (50,)
        assert {a.move for a, ok in zip(actions, allowed) if ok} == {Move.RIGHT, Move.FORWARD, Move.NONE}
        assert allowed.sum() == 30
        without_hover = admissible_actions(small_world, 0, allow_hover=False)
        assert {a.move for a, ok in zip(actions, without_hover) if ok} == {Move.RIGHT, Move.FORWARD}

    def test_hover_when_boxed_in(self, small_world):
        """No-movement stays admissible when every move is blocked
        """
        small_world.uavs[0].visited.update({1, 4})
        actions = enumerate_actions(small_world.config)
        allowed = admissible_actions(small_world, 0, allow_hover=False)
        assert {a.move for a, ok in zip(actions, allowed) if ok} == {Move.NONE}

    def test_blocked_moves_without_revisit_rule(self, small_config):
        world = build_world(with_overrides(small_config, forbid_revisits=False), seed=3)
        apply_action(world, 0, Action(Move.RIGHT, 5, 1))
        assert blocked_moves(world, 0) == {Move.BACKWARD}


class TestObservation(object):
    """Tests for the observation of a UAV
    """

    def test_orientation(self):
        assert orientation(40.0, 40.0) == pytest.approx(math.pi / 4)
        assert orientation(-1.0, 0.0) == -math.pi
        assert orientation_bin(-math.pi, 8) == 0
        assert orientation_bin(math.pi / 4 + 0.1, 8) == 5

    def test_length(self, small_config):
        world = build_world(with_overrides(small_config, nearest_bs_count=2), seed=3)
        observation = observe(world, 0)
        assert len(observation) == 7
        encoded = encode_observation(observation, world.config)
        assert encoded.shape == (7,)
        assert np.all((encoded >= 0.0) & (encoded <= 1.0))

    def test_encoding_checks_length(self, small_config):
        world = build_world(with_overrides(small_config, nearest_bs_count=2), seed=3)
        with pytest.raises(ValueError):
            encode_observation(observe(world, 0), with_overrides(small_config, nearest_bs_count=1))

    def test_coordinates_of_all_uavs(self, two_uav_config):
        world = build_world(two_uav_config, seed=0)
        observation = observe(world, 1)
        np.testing.assert_array_equal(observation.coordinates, [[0, 0], [0, 3]])

    def test_destination_bin_at_destination(self, small_world):
        small_world.uavs[0].cell = 15
        assert observe(small_world, 0).destination_bin == 0


class TestUtility(object):
    """Tests for the stage payoff and the utility
    """

    def test_delay_only(self):
        state = LinkState(rate_bps=1e6, sinr_sum=0.0, delay_s=0.0065, caused_interference_w=1e-9, saturated=False)
        weights = UtilityWeights(interference=0.0, delay=1.0, penalty=0.0)
        assert phi_from_terms(state, weights, GAMMA) == pytest.approx(-0.0065)

    def test_penalty_clamped(self):
        assert sinr_penalty(2.0, GAMMA) == 0.0
        assert sinr_penalty(0.2, 0.5) == pytest.approx(0.09)

    def test_all_terms(self):
        state = LinkState(rate_bps=1e5, sinr_sum=0.2, delay_s=0.01, caused_interference_w=2e-9, saturated=False)
        weights = UtilityWeights(interference=1e6, delay=1.0, penalty=10.0)
        assert phi_from_terms(state, weights, 0.5) == pytest.approx(-2e-3 - 0.01 - 0.9)

    def test_progress(self):
        assert progress_utility(0.0, 40.0, 80.0, 1.0) == 1.0
        assert progress_utility(-0.0065, 80.0, 80.0, 1.0) == -0.0065
        assert progress_utility(-0.0065, 120.0, 80.0, 1.0) == pytest.approx(-1.0065)

    def test_no_movement_gives_phi(self, small_world):
        prev = small_world.distance_to_destination(0)
        apply_action(small_world, 0, Action(Move.NONE, 5, 1))
        assert utility(small_world, 0, prev) == phi(small_world, 0)

    def test_moving_closer(self, small_world):
        prev = small_world.distance_to_destination(0)
        apply_action(small_world, 0, Action(Move.RIGHT, 5, 1))
        assert utility(small_world, 0, prev) == pytest.approx(phi(small_world, 0) + 1.0)


class TestAltitudeBounds(object):
    """Tests for the analytic altitude bounds
    """

    def test_upper_bound_above_bs(self):
        h_max = max_altitude(0.1, 1, [1.0], [0.0], NOISE_W, GAMMA, 2e9, 0.0, 0.0, 50.0)
        assert h_max == pytest.approx(1.99e5, rel=5e-3)

    def test_upper_bound_negative_radicand(self):
        assert max_altitude(0.1, 1, [1.0], [0.0], NOISE_W, GAMMA, 2e9, 1e7, 0.0, 50.0) == 50.0

    def test_upper_bound_monotone(self):
        values = [max_altitude(0.1, 3, np.ones(3), np.full(3, 1e-13), NOISE_W, gamma, 2e9, 300.0, 200.0, 50.0)
                  for gamma in 10 ** (np.linspace(-3, 7, 11) / 10)]
        assert all(a >= b for a, b in zip(values, values[1:]))

    def test_lower_bound_above_neighbor(self):
        assert min_altitude(0.1, 1, [[1.0]], 1e-12, 2e9, [[0.0, 0.0]], 50.0) == pytest.approx(3774.7, rel=1e-3)
        assert min_altitude(0.1, 1, [[1.0]], 1e-9, 2e9, [[0.0, 0.0]], 50.0) == pytest.approx(119.37, rel=1e-3)

    def test_lower_bound_is_max_over_neighbors(self):
        offsets = [[100.0, 0.0], [2000.0, 500.0]]
        both = min_altitude(0.1, 1, [[1.0], [1.0]], 1e-12, 2e9, offsets, 50.0)
        single = [min_altitude(0.1, 1, [[1.0]], 1e-12, 2e9, [offset], 50.0) for offset in offsets]
        assert both == max(single)

    def test_lower_bound_monotone_in_cap(self):
        values = [min_altitude(0.1, 3, np.ones((2, 3)), cap, 2e9, [[50.0, 0.0], [0.0, 80.0]], 50.0)
                  for cap in np.logspace(-12, -9, 10)]
        assert all(a >= b for a, b in zip(values, values[1:]))

    def test_world_bounds(self, small_world):
        bounds = altitude_bounds(small_world, 0)
        assert bounds.chi_m == 50.0
        assert bounds.h_min_m >= 50.0
        assert bounds.h_max_m >= 50.0
        assert altitude_upper(small_world, 0, Action(Move.NONE, 5, 1)) >= altitude_upper(
            small_world, 0, Action(Move.NONE, 1, 1))
        assert altitude_lower(small_world, 0, Action(Move.NONE, 5, 1)) >= altitude_lower(
            small_world, 0, Action(Move.NONE, 1, 1))

    def test_adjust_altitude(self, small_config):
        world = build_world(with_overrides(small_config, altitude_mode='bounded'), seed=3)
        bounds = altitude_bounds(world, 0)
        altitude = adjust_altitude(world, 0)
        if bounds.h_min_m <= bounds.h_max_m:
            assert bounds.h_min_m <= altitude <= bounds.h_max_m
        else:
            assert altitude == 120.0


class TestTrajectoryValid(object):
    """Tests for the trajectory constraint checks
    """

    @pytest.fixture
    def grid(self):
        return make_grid(ScenarioConfig(area_width_m=160.0, area_height_m=160.0))

    @pytest.fixture
    def mission(self):
        return UavMission(origin=0, destination=2, max_power_w=0.1)

    def test_straight_path(self, grid, mission):
        valid, violations = trajectory_valid([0, 1, 2], [0, 0, 0], [0.1, 0.1, 0.1], mission, grid)
        assert valid
        assert violations == []

    def test_hover_is_allowed(self, grid, mission):
        valid, _ = trajectory_valid([0, 1, 1, 2], [0, 0, 1, 1], [0.1] * 4, mission, grid)
        assert valid

    def test_revisit(self, grid, mission):
        valid, violations = trajectory_valid([0, 1, 0, 1, 2], [0] * 5, [0.1] * 5, mission, grid)
        assert not valid
        assert Constraint.VISIT_ONCE in {v.constraint for v in violations}

    def test_power_above_maximum(self, grid, mission):
        valid, violations = trajectory_valid([0, 1, 2], [0, 0, 0], [0.1, 0.2, 0.1], mission, grid)
        assert not valid
        assert [v.constraint for v in violations] == [Constraint.POWER_BOUNDS]
        assert violations[0].step == 1

    def test_endpoints_and_flow(self, grid, mission):
        _, violations = trajectory_valid([1, 3], [0, 0], [0.1, 0.1], mission, grid)
        constraints = {v.constraint for v in violations}
        assert Constraint.ENDPOINTS in constraints
        assert Constraint.FLOW in constraints

    def test_outside_grid(self, grid, mission):
        valid, violations = trajectory_valid([0, 16], [0, 0], [0.1, 0.1], mission, grid)
        assert not valid
        assert violations[0].constraint is Constraint.FEASIBILITY

    def test_sinr_shortfall_is_reported_only(self, grid, mission):
        valid, violations = trajectory_valid([0, 1, 2], [0, 0, 0], [0.1] * 3, mission, grid,
                                             sinr=[None, 0.1, 5.0], sinr_threshold=GAMMA)
        assert valid
        assert [(v.constraint, v.step) for v in violations] == [(Constraint.SINR_THRESHOLD, 1)]
