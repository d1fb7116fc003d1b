"""
Experiment orchestration: metric tables over seeds and episodes, run manifests, parameter sweeps, altitude-bound
tables and plot-ready figure data.

Every output file written here has a manifest next to it (``<stem>_manifest.json``) holding the configuration
hash, the seeds, the code version, the subcommand and the timestamps; the CSV files carry the matching ``run_id``
so reruns with the same manifest give identical bytes.
"""

from __future__ import annotations
import dataclasses
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime

import numpy as np
import pandas as pd

from uavpathsim import __version__
from uavpathsim.data_storage.data import ResultDataWrapper
from uavpathsim.interfaces.checkpoint import save_models
from uavpathsim.learning import agent
from uavpathsim.learning.baseline import run_baseline
from uavpathsim.learning.game import enumerate_actions, max_altitude, min_altitude
from uavpathsim.network import channel
from uavpathsim.network.scenario import build_world
from uavpathsim.settings.config import ScenarioConfig, UtilityWeights, with_overrides
from uavpathsim.utilities import ConfigurationError, db_to_linear, stable_hash, watt_to_dbm
from uavpathsim.validation.oracle import exhaustive_best_return

logger = logging.getLogger(__name__)

PROPOSED, SHORTEST_PATH = 'proposed', 'shortest-path'
DEFAULT_SEED_COUNT = 20

UTILITY_PRESETS = {
    'latency': UtilityWeights(interference=0.0, delay=1.0, penalty=10.0, progress_bonus=1.0),
    'interference': UtilityWeights(interference=1e9, delay=0.0, penalty=10.0, progress_bonus=1.0),
    'balanced': UtilityWeights(),
}

METRIC_COLUMNS = ('steps', 'mean_delay_s', 'energy_j', 'arrived', 'mean_power_w', 'ue_rate_bps',
                  'mean_interference_w', 'efficiency_bits_per_j')

# figure kind -> (config field swept, default values, schemes, {panel: metric column})
SWEEPS = {
    'uav-count': ('uav_count', [1, 2, 3, 4, 5], (PROPOSED, SHORTEST_PATH),
                  {'latency': 'mean_delay_s', 'ue-rate': 'ue_rate_bps', 'steps': 'steps'}),
    'altitude': ('uav_altitude_m', [120.0, 180.0, 240.0], (PROPOSED, SHORTEST_PATH),
                 {'latency': 'mean_delay_s', 'ue-rate': 'ue_rate_bps'}),
    'density': ('bs_count', [10, 20, 30], (PROPOSED, SHORTEST_PATH),
                {'latency': 'mean_delay_s', 'ue-rate': 'ue_rate_bps'}),
    'power-density': ('bs_count', [10, 20, 30], (PROPOSED, SHORTEST_PATH), {'power': 'mean_power_w'}),
    'interferers': ('nearest_bs_count', [1, 2, 3], (PROPOSED,), {'ue-rate': 'ue_rate_bps'}),
    'learning-rate': ('learn_rate', [0.0001, 0.01, 0.1], (PROPOSED,), {'td-error': 'td_error'}),
}
FIGURES = ('altitude-bounds',) + tuple(SWEEPS)
# what distinguishes the curves of a sweep
SERIES = ('scheme', 'preset', 'altitude')
SERIES_ALTITUDES = [120.0, 180.0, 240.0]

TRAJECTORY_COLUMNS = ('scheme', 'uav', 'step', 'cell', 'col', 'row', 'x_m', 'y_m', 'serving_bs', 'power_w',
                      'sinr_sum')


@dataclass
class RunManifest:
    config_hash: str
    seeds: list[int]
    subcommand: str
    code_version: str = __version__
    started: str = field(default_factory=lambda: datetime.now().isoformat(timespec='seconds'))
    finished: str | None = None

    @property
    def run_id(self) -> str:
        """Deterministic id of the run: hash of configuration, subcommand, seeds and code version"""
        return stable_hash({'config': self.config_hash, 'subcommand': self.subcommand, 'seeds': list(self.seeds),
                            'version': self.code_version})[:16]

    def finish(self):
        self.finished = datetime.now().isoformat(timespec='seconds')

    def write(self, fname, outputs=()):
        payload = dataclasses.asdict(self)
        payload['run_id'] = self.run_id
        payload['outputs'] = [os.path.basename(o) for o in outputs]
        with open(fname, 'w') as fout:
            json.dump(payload, fout, indent=2, sort_keys=True)
        return fname


def default_seeds(config: ScenarioConfig, count: int = DEFAULT_SEED_COUNT) -> list[int]:
    return list(range(config.rng_seed, config.rng_seed + count))


def _sibling(path, suffix):
    stem, _ = os.path.splitext(os.fspath(path))
    return stem + suffix


def _prepare_output(path):
    directory = os.path.dirname(os.path.abspath(os.fspath(path)))
    os.makedirs(directory, exist_ok=True)
    if not os.access(directory, os.W_OK):
        raise PermissionError('output directory {} is not writable'.format(directory))


# ---------------------------------------------------------------------------- per-seed evaluation
def episode_fading_seed(seed: int, episode: int):
    return [seed, 5, episode]


def evaluate_seed(config: ScenarioConfig, seed: int, schemes=(PROPOSED,), episodes: int = 1, models=None,
                  iterations: int | None = None):
    """Episode metrics of the requested schemes on the world of one seed

    The proposed scheme trains fresh models on the seed's placement unless ``models`` are given.

    Returns:
        list of (scheme, EpisodeMetrics), and the learning curve (or None)
    """
    results, curve = [], None
    for scheme in schemes:
        world = build_world(config, seed)
        if scheme == PROPOSED:
            trained = models
            if trained is None:
                training = agent.train(agent.training_worlds(config, seed), config, seed=seed, iterations=iterations)
                trained, curve = training.models, training.curve
            for episode in range(episodes):
                outcome = agent.test(world, trained, fading_seed=episode_fading_seed(seed, episode),
                                     episode=episode, seed=seed, scheme=scheme)
                results.append((scheme, outcome.metrics))
        elif scheme == SHORTEST_PATH:
            for episode in range(episodes):
                outcome = run_baseline(world, fading_seed=episode_fading_seed(seed, episode), episode=episode,
                                       seed=seed, scheme=scheme)
                results.append((scheme, outcome.metrics))
        else:
            raise ValueError('unknown scheme {!r}'.format(scheme))
    return results, curve


def _evaluate_job(args):
    config, seed, schemes, episodes, models, iterations = args
    return evaluate_seed(config, seed, schemes, episodes, models, iterations)


def _map_seeds(config, seeds, schemes, episodes, models, iterations, workers):
    jobs = [(config, seed, schemes, episodes, models, iterations) for seed in seeds]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_evaluate_job, jobs))
    return [_evaluate_job(job) for job in jobs]


# ---------------------------------------------------------------------------- experiments
SUBCOMMAND_SCHEMES = {'test': (PROPOSED,), 'proposed': (PROPOSED,), 'baseline': (SHORTEST_PATH,),
                      'compare': (PROPOSED, SHORTEST_PATH)}


def run_experiment(subcommand: str, config: ScenarioConfig, seeds, out, episodes: int = 1, models=None,
                   iterations: int | None = None, workers: int = 1) -> dict:
    """Metric rows per (seed, episode) plus a mean/std summary

    Args:
        subcommand: 'test' (given models), 'proposed' (train then test per seed), 'baseline' or 'compare'
        out: metrics CSV; the summary, manifest and netCDF results are written next to it

    Returns:
        dict with the written file names under 'metrics', 'summary', 'results', 'manifest'
    """
    if subcommand not in SUBCOMMAND_SCHEMES:
        raise ValueError('unknown experiment {!r}'.format(subcommand))
    if subcommand == 'test' and models is None:
        raise ValueError('the test experiment needs trained models')
    seeds = list(seeds)
    _prepare_output(out)
    manifest = RunManifest(config_hash=config.config_hash(), seeds=seeds, subcommand=subcommand)
    logger.info('Running %s over %d seeds x %d episodes (run %s)', subcommand, len(seeds), episodes, manifest.run_id)

    per_seed = _map_seeds(config, seeds, SUBCOMMAND_SCHEMES[subcommand], episodes, models, iterations, workers)
    database = ResultDataWrapper()
    rows = []
    for results, _ in per_seed:
        for scheme, metrics in results:
            row = {'run_id': manifest.run_id, 'scheme': scheme, 'seed': int(metrics.ds.attrs['seed']),
                   'episode': int(metrics.ds.attrs['episode'])}
            row.update(metrics.summary_row())
            rows.append(row)
            database.add_data(scheme, 'seed{}_episode{}'.format(row['seed'], row['episode']), metrics)

    frame = pd.DataFrame(rows, columns=['run_id', 'scheme', 'seed', 'episode'] + list(METRIC_COLUMNS))
    summary = summarize(frame)
    outputs = {'metrics': os.fspath(out), 'summary': _sibling(out, '_summary.csv'),
               'results': _sibling(out, '_results.nc'), 'manifest': _sibling(out, '_manifest.json')}
    frame.to_csv(outputs['metrics'], index=False)
    summary.to_csv(outputs['summary'], index=False)
    database.save(outputs['results'])
    manifest.finish()
    manifest.write(outputs['manifest'], [outputs['metrics'], outputs['summary'], outputs['results']])
    logger.info('Wrote %d metric rows to %s', len(frame), outputs['metrics'])
    return outputs


def summarize(frame: pd.DataFrame) -> pd.DataFrame:
    """One row per scheme with the mean and (population) standard deviation of every metric"""
    rows = []
    for scheme, group in frame.groupby('scheme', sort=True):
        row = {'run_id': group['run_id'].iloc[0], 'scheme': scheme, 'rows': len(group)}
        for column in METRIC_COLUMNS:
            row[column + '_mean'] = float(group[column].mean())
            row[column + '_std'] = float(group[column].std(ddof=0))
        rows.append(row)
    return pd.DataFrame(rows)


# ---------------------------------------------------------------------------- training
def train_models(config: ScenarioConfig, seed: int | None, out, iterations: int | None = None) -> dict:
    """Train one model per UAV on the seeded world and write the checkpoint and learning curve to ``out``

    Returns:
        dict with the written file names under 'models', 'curve', 'manifest'
    """
    seed = config.rng_seed if seed is None else seed
    os.makedirs(out, exist_ok=True)
    manifest = RunManifest(config_hash=config.config_hash(), seeds=[seed], subcommand='train')
    logger.info('Training %d UAV model(s) with seed %d (run %s)', config.n_uavs, seed, manifest.run_id)
    training = agent.train(agent.training_worlds(config, seed), config, seed=seed, iterations=iterations)
    outputs = {'models': save_models(training.models, out, config.config_hash()),
               'curve': os.path.join(out, 'learning_curve.nc'), 'manifest': os.path.join(out, 'manifest.json')}
    database = ResultDataWrapper()
    database.add_data(PROPOSED, 'seed{}'.format(seed), training.curve)
    database.save(outputs['curve'])
    manifest.finish()
    manifest.write(outputs['manifest'], [outputs['models'], outputs['curve']])
    return outputs


# ---------------------------------------------------------------------------- altitude bounds
def bounds_sweep(config: ScenarioConfig, seed: int | None = None, gamma_db=None, interference_caps=None) -> pd.DataFrame:
    """Altitude bounds of UAV 0 over paired SINR thresholds and interference caps at three power levels

    The reference geometry is the first UAV of the seeded world at its origin, with unit fading.

    Returns:
        columns gamma_db, i_cap_w, power_w, h_max_m, h_min_m
    """
    gamma_db = np.linspace(-3.0, 7.0, 11) if gamma_db is None else np.asarray(gamma_db, dtype=float)
    if interference_caps is None:
        start = np.log10(config.interference_cap_w)
        interference_caps = np.logspace(start, start + 3.0, gamma_db.size)
    interference_caps = np.asarray(interference_caps, dtype=float)
    if interference_caps.size != gamma_db.size:
        raise ConfigurationError('SINR thresholds and interference caps must have the same length')

    world = build_world(with_overrides(config, fading_mode='unit'), seed)
    uav = world.uavs[0]
    here = world.grid.center(uav.cell)
    rbs = list(uav.rbs) or list(range(config.rbs_per_uav))
    interference = channel.interference_map(world)[uav.serving_bs, rbs]
    dx, dy = world.bs_positions[uav.serving_bs] - here
    neighbors = [s for s in range(world.bs_count) if s != uav.serving_bs]
    offsets = world.bs_positions[neighbors] - here
    levels = sorted({1, (config.power_levels + 1) // 2, config.power_levels})

    rows = []
    for level in levels:
        power = level * uav.max_power_w / config.power_levels
        for gamma, cap in zip(gamma_db, interference_caps):
            rows.append({
                'gamma_db': float(gamma), 'i_cap_w': float(cap), 'power_w': power,
                'h_max_m': max_altitude(power, len(rbs), np.ones(len(rbs)), interference, config.noise_w,
                                        float(db_to_linear(gamma)), config.carrier_hz, dx, dy, config.min_altitude_m),
                'h_min_m': min_altitude(power, len(rbs), np.ones((len(neighbors), len(rbs))), len(rbs) * cap,
                                        config.carrier_hz, offsets, config.min_altitude_m),
            })
    return pd.DataFrame(rows, columns=['gamma_db', 'i_cap_w', 'power_w', 'h_max_m', 'h_min_m'])


def write_bounds(config: ScenarioConfig, seed: int | None, out) -> dict:
    _prepare_output(out)
    seed = config.rng_seed if seed is None else seed
    manifest = RunManifest(config_hash=config.config_hash(), seeds=[seed], subcommand='bounds')
    table = bounds_sweep(config, seed)
    table.to_csv(out, index=False)
    manifest.finish()
    manifest_file = manifest.write(_sibling(out, '_manifest.json'), [out])
    return {'bounds': os.fspath(out), 'manifest': manifest_file}


# ---------------------------------------------------------------------------- oracle
def run_oracle(config: ScenarioConfig, horizon: int, seed: int | None, out, workers: int = 1) -> dict:
    """Exhaustive optimum of the first UAV on the seeded world with unit fading, written as JSON"""
    _prepare_output(out)
    seed = config.rng_seed if seed is None else seed
    if config.n_uavs != 1:
        raise ConfigurationError('the oracle needs a single-UAV configuration, got {} UAVs'.format(config.n_uavs))
    world = build_world(with_overrides(config, fading_mode='unit'), seed)
    manifest = RunManifest(config_hash=config.config_hash(), seeds=[seed], subcommand='oracle')
    result = exhaustive_best_return(world, horizon, workers=workers)
    actions = enumerate_actions(config)
    payload = {
        'run_id': manifest.run_id,
        'horizon': horizon,
        'discounted_return': result.value,
        'actions': result.actions,
        'action_labels': [{'move': actions[i].move.name.lower(), 'power_level': actions[i].power_level,
                           'assoc': actions[i].assoc} for i in result.actions],
        'origin': world.uavs[0].origin,
        'destination': world.uavs[0].destination,
    }
    with open(out, 'w') as fout:
        json.dump(payload, fout, indent=2)
    manifest.finish()
    manifest_file = manifest.write(_sibling(out, '_manifest.json'), [out])
    return {'oracle': os.fspath(out), 'manifest': manifest_file}


def _oracle_gap_job(args):
    config, seed, horizon, iterations = args
    world = build_world(config, seed)
    training = agent.train(agent.training_worlds(config, seed), config, seed=seed, iterations=iterations)
    outcome = agent.test(world, training.models, seed=seed)
    greedy = agent.discounted_return(outcome.records[:horizon], 0, config.discount)
    optimum = exhaustive_best_return(world, horizon).value
    logger.info('seed %d: greedy return %.4g, optimum %.4g', seed, greedy, optimum)
    return {'seed': seed, 'greedy_return': greedy, 'optimum': optimum,
            'ratio': greedy / optimum if optimum > 0 else float('nan')}


def compare_with_oracle(config: ScenarioConfig, seeds, horizon: int, iterations: int | None = None,
                        workers: int = 1) -> pd.DataFrame:
    """Discounted return of the trained greedy policy against the exhaustive optimum, one row per seed

    Each seed trains on its own world, then both returns are taken over the first ``horizon`` stages of the single
    UAV with unit fading. The ratio is NaN for a non-positive optimum.

    Returns:
        columns seed, greedy_return, optimum, ratio
    """
    if config.n_uavs != 1:
        raise ConfigurationError('the oracle needs a single-UAV configuration, got {} UAVs'.format(config.n_uavs))
    config = with_overrides(config, fading_mode='unit')
    jobs = [(config, seed, horizon, iterations) for seed in seeds]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_oracle_gap_job, jobs))
    else:
        rows = [_oracle_gap_job(job) for job in jobs]
    return pd.DataFrame(rows, columns=['seed', 'greedy_return', 'optimum', 'ratio'])


def write_oracle_comparison(config: ScenarioConfig, seeds, horizon: int, out, iterations: int | None = None,
                            workers: int = 1) -> dict:
    _prepare_output(out)
    seeds = list(seeds)
    manifest = RunManifest(config_hash=config.config_hash(), seeds=seeds, subcommand='oracle')
    table = compare_with_oracle(config, seeds, horizon, iterations, workers)
    table.insert(0, 'run_id', manifest.run_id)
    table.to_csv(out, index=False)
    manifest.finish()
    manifest_file = manifest.write(_sibling(out, '_manifest.json'), [out])
    return {'comparison': os.fspath(out), 'manifest': manifest_file}


# ---------------------------------------------------------------------------- trajectories
def trajectory_table(config: ScenarioConfig, seed: int | None = None, iterations: int | None = None, models=None,
                     episode: int = 0) -> pd.DataFrame:
    """Paths of both schemes on the seeded world, one row per visited cell

    The first row of every UAV (step 0) is its origin, where ``sinr_sum`` is NaN. The proposed scheme trains
    fresh models unless ``models`` are given.
    """
    seed = config.rng_seed if seed is None else seed
    if models is None:
        models = agent.train(agent.training_worlds(config, seed), config, seed=seed, iterations=iterations).models
    world = build_world(config, seed)
    outcomes = {
        PROPOSED: agent.test(world, models, fading_seed=episode_fading_seed(seed, episode), episode=episode,
                             seed=seed),
        SHORTEST_PATH: run_baseline(build_world(config, seed), fading_seed=episode_fading_seed(seed, episode),
                                    episode=episode, seed=seed, scheme=SHORTEST_PATH),
    }
    rows = []
    for scheme, outcome in outcomes.items():
        for j, trajectory in enumerate(outcome.trajectories):
            for step, cell in enumerate(trajectory.cells):
                col, row = world.grid.col_row(cell)
                x, y = world.grid.center(cell)
                sinr_sum = trajectory.sinr_sum[step]
                rows.append({'scheme': scheme, 'uav': j, 'step': step, 'cell': cell, 'col': col, 'row': row,
                             'x_m': float(x), 'y_m': float(y), 'serving_bs': trajectory.serving_bs[step],
                             'power_w': trajectory.power_w[step],
                             'sinr_sum': float('nan') if sinr_sum is None else float(sinr_sum)})
    return pd.DataFrame(rows, columns=list(TRAJECTORY_COLUMNS))


def export_trajectories(config: ScenarioConfig, seed: int | None, out, iterations: int | None = None,
                        models=None) -> dict:
    """Write :func:`trajectory_table` as CSV with its manifest"""
    _prepare_output(out)
    seed = config.rng_seed if seed is None else seed
    manifest = RunManifest(config_hash=config.config_hash(), seeds=[seed], subcommand='export')
    table = trajectory_table(config, seed, iterations=iterations, models=models)
    table.to_csv(out, index=False)
    manifest.finish()
    manifest_file = manifest.write(_sibling(out, '_manifest.json'), [out])
    logger.info('Wrote %d trajectory points to %s', len(table), out)
    return {'trajectories': os.fspath(out), 'manifest': manifest_file}


# ---------------------------------------------------------------------------- sweeps and figures
def sweep_series(config: ScenarioConfig, series: str, schemes, series_values=None) -> list[tuple]:
    """(label, configuration, schemes) of every curve family of a sweep

    ``scheme`` keeps one family labelled by scheme, ``preset`` trains the proposed scheme once per utility preset,
    ``altitude`` repeats the schemes at every fixed UAV altitude.
    """
    if series == 'scheme':
        return [(None, config, schemes)]
    if series == 'preset':
        names = list(UTILITY_PRESETS) if series_values is None else [str(v) for v in series_values]
        unknown = [name for name in names if name not in UTILITY_PRESETS]
        if unknown:
            raise ConfigurationError('unknown utility preset(s) {}, choose from {}'.format(
                ', '.join(unknown), ', '.join(UTILITY_PRESETS)))
        return [(name, with_overrides(config, weights=UTILITY_PRESETS[name]), (PROPOSED,)) for name in names]
    if series == 'altitude':
        altitudes = SERIES_ALTITUDES if series_values is None else [float(v) for v in series_values]
        return [('{:g} m'.format(altitude), with_overrides(config, uav_altitude_m=altitude), schemes)
                for altitude in altitudes]
    raise ConfigurationError('unknown series {!r}, choose from {}'.format(series, ', '.join(SERIES)))


def _series_label(series, tag, scheme):
    if tag is None:
        return scheme
    return tag if series == 'preset' else '{} {}'.format(scheme, tag)


def run_sweep(kind: str, config: ScenarioConfig, seeds, values=None, episodes: int = 1,
              iterations: int | None = None, workers: int = 1, series: str = 'scheme',
              series_values=None) -> pd.DataFrame:
    """Long table (figure, x, series, panel, seed, value) for one figure kind

    Args:
        series: what separates the curves, 'scheme' by default (see :func:`sweep_series`)
        series_values: presets or altitudes of the series, all presets or :data:`SERIES_ALTITUDES` by default
    """
    seeds = list(seeds)
    if series != 'scheme' and kind in ('altitude-bounds', 'learning-rate', 'altitude'):
        raise ConfigurationError('the {} figure has no {} series'.format(kind, series))
    if kind == 'altitude-bounds':
        frames = []
        for seed in seeds:
            table = bounds_sweep(config, seed)
            labels = table['power_w'].map(lambda p: '{:.1f} dBm'.format(float(watt_to_dbm(p))))
            frames.append(pd.DataFrame({'figure': kind, 'x': table['gamma_db'], 'series': labels,
                                        'panel': 'h_max', 'seed': seed, 'value': table['h_max_m']}))
            frames.append(pd.DataFrame({'figure': kind, 'x': table['i_cap_w'], 'series': labels,
                                        'panel': 'h_min', 'seed': seed, 'value': table['h_min_m']}))
        return pd.concat(frames, ignore_index=True)
    if kind not in SWEEPS:
        raise ValueError('unknown figure {!r}, choose from {}'.format(kind, ', '.join(FIGURES)))

    name, default_values, schemes, panels = SWEEPS[kind]
    values = default_values if values is None else values
    rows = []
    for tag, base, family_schemes in sweep_series(config, series, schemes, series_values):
        for value in values:
            changes = {name: value}
            if name == 'uav_count':
                changes['uav_missions'] = []
            swept = with_overrides(base, **changes)
            logger.info('%s sweep: %s = %s%s', kind, name, value, '' if tag is None else ' ({})'.format(tag))
            if kind == 'learning-rate':
                for seed in seeds:
                    training = agent.train(agent.training_worlds(swept, seed), swept, seed=seed,
                                           iterations=iterations)
                    for block, error in enumerate(training.block_means()):
                        rows.append({'figure': kind, 'x': (block + 1) * agent.PROGRESS_BLOCK, 'series': value,
                                     'panel': 'td-error', 'seed': seed, 'value': float(error)})
                continue
            for results, _ in _map_seeds(swept, seeds, family_schemes, episodes, None, iterations, workers):
                for scheme, metrics in results:
                    summary = metrics.summary_row()
                    for panel, column in panels.items():
                        rows.append({'figure': kind, 'x': value, 'series': _series_label(series, tag, scheme),
                                     'panel': panel, 'seed': int(metrics.ds.attrs['seed']),
                                     'value': summary[column]})
    return pd.DataFrame(rows, columns=['figure', 'x', 'series', 'panel', 'seed', 'value'])


def figure_table(results: pd.DataFrame, figure: str) -> pd.DataFrame:
    """Mean and (population) standard deviation per (x, series, panel)"""
    if results is None or results.empty or 'figure' not in results:
        raise ValueError('no results to export')
    selected = results[results['figure'] == figure]
    if selected.empty:
        raise ValueError('no results for figure {!r}'.format(figure))
    grouped = selected.groupby(['x', 'series', 'panel'], sort=True)['value']
    table = grouped.agg(mean='mean', std=lambda v: float(np.std(v, ddof=0))).reset_index()
    return table[['x', 'series', 'panel', 'mean', 'std']]


def export_figure_data(results: pd.DataFrame, figure: str, out) -> str:
    """Write the plot-ready columns (x, series, panel, mean, std) of a figure

    Raises:
        ValueError: no matching results; nothing is written
    """
    table = figure_table(results, figure)
    _prepare_output(out)
    table.to_csv(out, index=False)
    logger.info('Wrote %s figure data (%d rows) to %s', figure, len(table), out)
    return os.fspath(out)
