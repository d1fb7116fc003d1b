"""
Shortest-path comparison scheme: each UAV heads straight for its destination at maximum power, attached to the
nearest base station.
"""

from __future__ import annotations

from uavpathsim.learning.agent import (EpisodeResult, extend_trajectories, initial_trajectories,
                                       metrics_from_records, play_barrier, record_stage)
from uavpathsim.learning.game import Action, Move
from uavpathsim.network.scenario import World


def shortest_path_policy(world: World, uav_id: int) -> Action:
    """One greedy Manhattan step towards the destination

    The axis with the larger remaining offset is reduced first, ties go to the x axis (columns).
    """
    uav = world.uavs[uav_id]
    col, row = world.grid.col_row(uav.cell)
    dest_col, dest_row = world.grid.col_row(uav.destination)
    dcol, drow = dest_col - col, dest_row - row
    if dcol == 0 and drow == 0:
        move = Move.NONE
    elif abs(dcol) >= abs(drow):
        move = Move.RIGHT if dcol > 0 else Move.LEFT
    else:
        move = Move.FORWARD if drow > 0 else Move.BACKWARD
    return Action(move=move, power_level=world.config.power_levels, assoc=1)


def run_baseline(world: World, fading_seed=None, episode: int = 0, seed: int = 0,
                 scheme: str = 'shortest-path') -> EpisodeResult:
    """Episode of the shortest-path scheme from the mission origins"""
    world.reset_uavs(fading_seed=fading_seed)
    trajectories = initial_trajectories(world)
    missions = [uav.mission for uav in world.uavs]
    records = []
    while world.live_uavs() and len(records) < world.config.episode_step_cap:
        actions = {j: shortest_path_policy(world, j) for j in world.live_uavs()}
        outcomes = play_barrier(world, actions)
        record = record_stage(world, outcomes, {})
        extend_trajectories(trajectories, record)
        records.append(record)
    metrics = metrics_from_records(records, world.config, len(world.uavs), len(world.ues), episode=episode,
                                   seed=seed, scheme=scheme)
    return EpisodeResult(records=records, trajectories=trajectories, missions=missions, metrics=metrics)
