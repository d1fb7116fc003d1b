"""
Multi-agent training and testing loops.

Every stage follows the same order for all live UAVs: each UAV picks an action from its own reservoir features
of the pre-stage world, all actions are applied together at the barrier (RBs re-planned, fading redrawn), the
utilities are evaluated on the post-stage world, the reservoirs advance with the new observation and, in training,
the readout row of the chosen action is moved towards the reward.
"""

from __future__ import annotations
import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from uavpathsim.data_storage.data_template import EpisodeMetrics, LearningCurve
from uavpathsim.learning.deep_esn import DeepEsn, init_esn, readout_all, step_states, td_error, td_update
from uavpathsim.learning.game import (Action, Move, Observation, adjust_altitude, admissible_actions, apply_action,
                                      encode_observation, enumerate_actions, link_state, observe, phi_from_terms,
                                      progress_utility, sinr_penalty, trajectory_valid)
from uavpathsim.network import channel
from uavpathsim.network.scenario import World, build_world, random_missions
from uavpathsim.settings.config import ScenarioConfig, UavMission
from uavpathsim.utilities import DivergenceError

logger = logging.getLogger(__name__)

TRAIN, TEST = 'train', 'test'
PROGRESS_BLOCK = 20


@dataclass
class AgentRuntime:
    uav_id: int
    esn: DeepEsn | None
    observation: Observation | None = None
    features: np.ndarray | None = None
    last_action: int | None = None
    done: bool = False
    steps: int = 0


@dataclass
class UavStageRecord:
    """What one UAV did and experienced in one stage; ``active`` is False once it has arrived"""
    active: bool
    cell: int
    serving_bs: int
    power_w: float = 0.0
    observation: np.ndarray | None = None
    action: int | None = None
    probability: float = 1.0
    reward: float = 0.0
    readout: float = 0.0
    td_error: float = 0.0
    utility: float = 0.0
    phi: float = 0.0
    penalty: float = 0.0
    rate_bps: float = 0.0
    delay_s: float = 0.0
    sinr_sum: float = 0.0
    caused_interference_w: float = 0.0
    arrived: bool = False


@dataclass
class StageRecord:
    stage: int
    uavs: list[UavStageRecord]
    ue_rates_bps: np.ndarray
    bs_interference_w: np.ndarray       # per base station, summed over RBs


@dataclass
class Trajectory:
    """Visited cells with the association, power and summed SINR of each entry; the first entry is the origin"""
    cells: list[int] = field(default_factory=list)
    serving_bs: list[int] = field(default_factory=list)
    power_w: list[float] = field(default_factory=list)
    sinr_sum: list[float | None] = field(default_factory=list)

    def append(self, cell, serving_bs, power_w, sinr_sum):
        self.cells.append(int(cell))
        self.serving_bs.append(int(serving_bs))
        self.power_w.append(float(power_w))
        self.sinr_sum.append(sinr_sum)

    def validate(self, mission: UavMission, grid, sinr_threshold: float | None = None):
        return trajectory_valid(self.cells, self.serving_bs, self.power_w, mission, grid, self.sinr_sum,
                                sinr_threshold)


@dataclass
class EpisodeResult:
    records: list[StageRecord]
    trajectories: list[Trajectory]
    missions: list[UavMission]
    metrics: EpisodeMetrics | None = None


@dataclass
class TrainingResult:
    models: list[DeepEsn]
    curve: LearningCurve

    def block_means(self, block: int = PROGRESS_BLOCK) -> np.ndarray:
        return self.curve.block_means('td_error', block)


def action_list(config: ScenarioConfig) -> tuple[Action, ...]:
    return tuple(enumerate_actions(config))


# ---------------------------------------------------------------------------- selection and reward
def greedy_probability(epsilon: float, n_actions: int) -> float:
    return 1.0 - epsilon + epsilon / n_actions


def select_action_train(esn: DeepEsn, features, epsilon: float, rng: np.random.Generator,
                        allowed: np.ndarray | None = None) -> tuple[int, float]:
    """Epsilon-greedy action index and the probability the policy assigns to it

    The argmax (lowest index on ties) has probability ``1 - eps + eps/|Z|``, every other action ``eps/|Z|``.
    With an ``allowed`` mask, both the argmax and the exploration draw are restricted to the allowed actions and
    ``|Z|`` counts only those.
    """
    values = _checked_values(esn, features)
    candidates = _candidates(values.size, allowed)
    greedy = int(candidates[np.argmax(values[candidates])])
    choice = int(candidates[rng.integers(candidates.size)]) if rng.random() < epsilon else greedy
    probability = greedy_probability(epsilon, candidates.size) if choice == greedy else epsilon / candidates.size
    return choice, probability


def select_action_test(esn: DeepEsn, features, allowed: np.ndarray | None = None) -> int:
    values = _checked_values(esn, features)
    candidates = _candidates(values.size, allowed)
    return int(candidates[np.argmax(values[candidates])])


def _candidates(n_actions, allowed):
    if allowed is None:
        return np.arange(n_actions)
    candidates = np.flatnonzero(allowed)
    if len(allowed) != n_actions or candidates.size == 0:
        raise ValueError('the action mask must have {} entries with at least one allowed'.format(n_actions))
    return candidates


def _checked_values(esn, features):
    values = readout_all(esn, features)
    if not np.all(np.isfinite(values)):
        raise DivergenceError('non-finite readout')
    return values


def compute_reward(utility: float, strategy_probs, discount: float, next_values=None, terminal: bool = False) -> float:
    """Reward of a UAV: expected utility under the joint strategy plus the discounted best next estimate

    Args:
        utility: utility of the stage
        strategy_probs: probabilities the UAVs' strategies assigned to their chosen actions
        next_values: readouts of all actions for the next features, required unless ``terminal``

    Raises:
        ValueError: ``next_values`` missing for a non-terminal stage
    """
    expected = utility * float(np.prod(strategy_probs))
    if terminal:
        return expected
    if next_values is None or len(next_values) == 0:
        raise ValueError('next-state readouts are required for a non-terminal stage')
    return expected + discount * float(np.max(next_values))


# ---------------------------------------------------------------------------- stage
def play_barrier(world: World, actions: dict[int, Action]) -> dict[int, tuple]:
    """Apply all actions at once, re-plan the network and evaluate each acting UAV

    Returns:
        uav id -> (LinkState, phi, utility)
    """
    cfg = world.config
    prev_distance = {j: world.distance_to_destination(j) for j in actions}
    for j, action in actions.items():
        apply_action(world, j, action)
    world.advance_stage()
    if cfg.altitude_mode == 'bounded':
        for j in actions:
            adjust_altitude(world, j)

    outcomes = {}
    for j in actions:
        state = link_state(world, j)
        phi_value = phi_from_terms(state, cfg.weights, cfg.sinr_threshold)
        value = progress_utility(phi_value, world.distance_to_destination(j), prev_distance[j],
                                 cfg.weights.progress_bonus)
        outcomes[j] = (state, phi_value, value)
    return outcomes


def record_stage(world: World, outcomes: dict[int, tuple], extras: dict[int, dict]) -> StageRecord:
    """Capture the post-barrier metrics of a stage, then silence UAVs that just arrived"""
    cfg = world.config
    uav_records = []
    for uav in world.uavs:
        if uav.id not in outcomes:
            uav_records.append(UavStageRecord(active=False, cell=uav.cell, serving_bs=uav.serving_bs))
            continue
        state, phi_value, value = outcomes[uav.id]
        uav_records.append(UavStageRecord(
            active=True, cell=uav.cell, serving_bs=uav.serving_bs, power_w=uav.power_w, utility=value,
            phi=phi_value, penalty=sinr_penalty(state.sinr_sum, cfg.sinr_threshold), rate_bps=state.rate_bps,
            delay_s=state.delay_s, sinr_sum=state.sinr_sum, caused_interference_w=state.caused_interference_w,
            arrived=uav.done, **extras.get(uav.id, {})))
    record = StageRecord(stage=world.stage, uavs=uav_records, ue_rates_bps=channel.ue_rates(world),
                         bs_interference_w=channel.interference_map(world).sum(axis=1))
    if cfg.silence_on_arrival:
        for uav in world.uavs:
            if uav.id in outcomes and uav.done:
                world.silence_uav(uav.id)
    return record


def run_stage(world: World, agents: list[AgentRuntime], mode: str, rng: np.random.Generator | None = None) -> StageRecord:
    """Play one stage for all live agents

    Raises:
        RuntimeError: every agent is already done
        DivergenceError: a readout became non-finite
    """
    cfg = world.config
    live = [agent for agent in agents if not agent.done]
    if not live:
        raise RuntimeError('all UAVs have reached their destinations, no stage left to play')
    actions = action_list(cfg)

    # selection reads only the pre-stage features of each agent
    chosen = {}
    for agent in live:
        allowed = None
        if cfg.mask_blocked_moves:
            # a greedy UAV that hovered last stage has to move now
            hovered = agent.last_action is not None and actions[agent.last_action].move is Move.NONE
            allow_hover = mode == TRAIN or not hovered
            allowed = admissible_actions(world, agent.uav_id, allow_hover)
        if mode == TRAIN:
            index, probability = select_action_train(agent.esn, agent.features, cfg.epsilon, rng, allowed)
        else:
            index, probability = select_action_test(agent.esn, agent.features, allowed), 1.0
        estimate = float(agent.esn.w_out[index] @ agent.features)
        chosen[agent.uav_id] = (index, probability, estimate, agent.features)

    outcomes = play_barrier(world, {j: actions[index] for j, (index, _, _, _) in chosen.items()})
    joint = [probability for _, probability, _, _ in chosen.values()]

    extras = {}
    for agent in live:
        j = agent.uav_id
        index, probability, estimate, features = chosen[j]
        _, _, value = outcomes[j]
        terminal = world.uavs[j].done
        observed = agent.observation.as_array() if agent.observation is not None else None
        if terminal:
            reward = compute_reward(value, joint, cfg.discount, terminal=True)
        else:
            agent.observation = observe(world, j)
            step_states(agent.esn, encode_observation(agent.observation, cfg))
            agent.features = agent.esn.features()
            next_values = _checked_values(agent.esn, agent.features)
            if cfg.mask_blocked_moves:
                next_values = next_values[admissible_actions(world, j)]
            reward = compute_reward(value, joint, cfg.discount, next_values)
        if not math.isfinite(reward):
            raise DivergenceError('non-finite reward for UAV {}'.format(j))
        if mode == TRAIN:
            td_update(agent.esn, index, reward, estimate, cfg.learn_rate, features=features)
        agent.done = terminal
        agent.last_action = index
        agent.steps += 1
        extras[j] = dict(observation=observed, action=index, probability=probability, reward=reward,
                         readout=estimate, td_error=td_error(reward, estimate))
    return record_stage(world, outcomes, extras)


# ---------------------------------------------------------------------------- episodes
def start_agents(world: World, models: list[DeepEsn]) -> list[AgentRuntime]:
    """Fresh reservoir states and the first observation of every UAV"""
    if len(models) != len(world.uavs):
        raise ValueError('{} models for {} UAVs'.format(len(models), len(world.uavs)))
    agents = []
    for uav, esn in zip(world.uavs, models):
        esn.reset_states()
        observation = observe(world, uav.id)
        step_states(esn, encode_observation(observation, world.config))
        agents.append(AgentRuntime(uav_id=uav.id, esn=esn, observation=observation, features=esn.features(),
                                   done=uav.done))
    return agents


def initial_trajectories(world: World) -> list[Trajectory]:
    trajectories = []
    for uav in world.uavs:
        trajectory = Trajectory()
        trajectory.append(uav.cell, uav.serving_bs, uav.power_w, None)
        trajectories.append(trajectory)
    return trajectories


def extend_trajectories(trajectories: list[Trajectory], record: StageRecord):
    for trajectory, entry in zip(trajectories, record.uavs):
        if entry.active:
            trajectory.append(entry.cell, entry.serving_bs, entry.power_w, entry.sinr_sum)


def run_episode(world: World, agents: list[AgentRuntime], mode: str,
                rng: np.random.Generator | None = None) -> EpisodeResult:
    """Play stages until every UAV arrived or the episode step cap is reached"""
    cap = world.config.episode_step_cap
    trajectories = initial_trajectories(world)
    missions = [uav.mission for uav in world.uavs]
    records = []
    while any(not agent.done for agent in agents) and len(records) < cap:
        record = run_stage(world, agents, mode, rng)
        extend_trajectories(trajectories, record)
        records.append(record)
    return EpisodeResult(records=records, trajectories=trajectories, missions=missions)


def metrics_from_records(records: list[StageRecord], config: ScenarioConfig, n_uavs: int, n_ues: int,
                         episode: int = 0, seed: int = 0, scheme: str = '') -> EpisodeMetrics:
    """Episode metrics recomputed from the stage records

    Energy is transmit power times stage duration summed over the stages a UAV was active, efficiency is
    delivered bits per joule over all UAVs.
    """
    dt = config.stage_duration_s
    steps, delay, energy, arrived, power, bits = [], [], [], [], [], []
    caused = []
    for j in range(n_uavs):
        active = [record.uavs[j] for record in records if record.uavs[j].active]
        steps.append(len(active))
        delay.append(float(np.mean([e.delay_s for e in active])) if active else 0.0)
        energy.append(float(sum(e.power_w * dt for e in active)))
        arrived.append(any(e.arrived for e in active))
        power.append(float(np.mean([e.power_w for e in active])) if active else 0.0)
        bits.append(float(sum(e.rate_bps * dt for e in active)))
        caused.extend(e.caused_interference_w for e in active)
    if records:
        ue_rates = np.mean([record.ue_rates_bps for record in records], axis=0)
    else:
        ue_rates = np.zeros(n_ues)
    return EpisodeMetrics(steps=steps, mean_delay_s=delay, energy_j=energy, arrived=arrived, mean_power_w=power,
                          delivered_bits=bits, mean_rate_bps=ue_rates,
                          mean_interference_w=float(np.mean(caused)) if caused else 0.0,
                          episode=episode, seed=seed, scheme=scheme)


def discounted_return(records: list[StageRecord], uav_id: int, discount: float) -> float:
    """Sum of discounted utilities of one UAV over the stages it was active"""
    utilities = [record.uavs[uav_id].utility for record in records if record.uavs[uav_id].active]
    return float(sum(discount ** t * value for t, value in enumerate(utilities)))


# ---------------------------------------------------------------------------- training / testing
def new_models(config: ScenarioConfig, rng: np.random.Generator) -> list[DeepEsn]:
    sizes = config.reservoir_sizes()
    return [init_esn(config.observation_length, config.n_actions, sizes, config.esn.leak_rates, rng,
                     spectral_radius_target=config.esn.spectral_radius_target, input_scale=config.esn.input_scale)
            for _ in range(config.n_uavs)]


def training_worlds(config: ScenarioConfig, seed: int | None = None) -> Callable[[int], World]:
    """World factory for training: the placement and missions of the seed with fresh fading per iteration

    With ``randomize_training_missions`` every iteration draws new origins and destinations instead.
    """
    seed = config.rng_seed if seed is None else seed
    world = build_world(config, seed)
    base_missions = list(world.missions)
    mission_rng = np.random.default_rng(np.random.SeedSequence([seed, 1]))

    def factory(iteration: int) -> World:
        missions = base_missions
        if config.randomize_training_missions:
            drawn = random_missions(config, mission_rng, len(base_missions))
            missions = [UavMission(origin=m.origin, destination=m.destination, altitude_m=b.altitude_m,
                                   max_power_w=b.max_power_w, packet_rate=b.packet_rate,
                                   packet_size_bits=b.packet_size_bits) for m, b in zip(drawn, base_missions)]
        world.reset_uavs(missions, fading_seed=[seed, 2, iteration])
        return world

    return factory


def train(world_factory: Callable[[int], World], config: ScenarioConfig, seed: int | None = None,
          models: list[DeepEsn] | None = None, iterations: int | None = None) -> TrainingResult:
    """Train one deep ESN per UAV

    Args:
        world_factory: returns the world of a training iteration
        config: scenario configuration (learning rate, epsilon, discount, iterations)
        seed: seed of the reservoir initialization and the exploration stream
        models: continue training these models instead of fresh ones
        iterations: overrides ``config.training_iterations``

    Returns:
        models and the per-iteration learning curve

    Raises:
        DivergenceError: naming the iteration and the learning rate
    """
    seed = config.rng_seed if seed is None else seed
    iterations = config.training_iterations if iterations is None else iterations
    init_rng = np.random.default_rng(np.random.SeedSequence([seed, 3]))
    action_rng = np.random.default_rng(np.random.SeedSequence([seed, 4]))
    models = models if models is not None else new_models(config, init_rng)

    errors, penalties, lengths = [], [], []
    for iteration in range(iterations):
        world = world_factory(iteration)
        agents = start_agents(world, models)
        try:
            result = run_episode(world, agents, TRAIN, action_rng)
        except DivergenceError as err:
            raise DivergenceError('training diverged at iteration {} with learning rate {}: {}'.format(
                iteration, config.learn_rate, err)) from err
        entries = [e for record in result.records for e in record.uavs if e.active]
        errors.append(float(np.mean([e.td_error for e in entries])) if entries else 0.0)
        penalties.append(float(np.mean([e.penalty for e in entries])) if entries else 0.0)
        lengths.append(float(np.mean([len(t.cells) - 1 for t in result.trajectories])))
        if (iteration + 1) % PROGRESS_BLOCK == 0:
            logger.info('iteration %d/%d: mean TD error %.4g over the last %d iterations', iteration + 1, iterations,
                        np.mean(errors[-PROGRESS_BLOCK:]), PROGRESS_BLOCK)
    curve = LearningCurve(td_error=errors, penalty=penalties, steps=lengths, learn_rate=config.learn_rate)
    return TrainingResult(models=models, curve=curve)


def test(world: World, models: list[DeepEsn], fading_seed=None, episode: int = 0, seed: int = 0,
         scheme: str = 'proposed') -> EpisodeResult:
    """Greedy episode of trained models from the mission origins; readouts are not updated"""
    world.reset_uavs(fading_seed=fading_seed)
    agents = start_agents(world, models)
    result = run_episode(world, agents, TEST)
    result.metrics = metrics_from_records(result.records, world.config, len(world.uavs), len(world.ues),
                                          episode=episode, seed=seed, scheme=scheme)
    return result


# not a test case
test.__test__ = False
