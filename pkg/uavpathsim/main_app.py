"""
Disclaimer
-----------------------------------------------------------------

Command line front end of UAVPathSim, the interference-aware UAV path planning simulator.

Purposes:
- Train the deep ESN agents of a scenario
- Test trained agents and the shortest-path comparison scheme
- Altitude bound tables, exhaustive optima of small worlds
- Plot-ready figure data of parameter sweeps

.. note::
    UAVPathSim is free software.

    There is NO warranty; not even for MERCHANTABILITY or FITNESS FOR A PARTICULAR
    PURPOSE.

"""

from __future__ import annotations
import argparse
import json
import logging
import sys

import yaml

from uavpathsim import harness
from uavpathsim.interfaces.checkpoint import load_models
from uavpathsim.settings.config import load_config, with_overrides
from uavpathsim.utilities import CheckpointMismatchError, ConfigurationError, configure_logging

logger = logging.getLogger(__name__)

EXIT_RUNTIME, EXIT_USAGE = 1, 2


class UsageError(ValueError):
    """Raised for malformed command lines."""


class _ArgumentParser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def process_cl_args(argv=None):
    """
    Process the command line arguments

    Args:
        argv: argument list, ``sys.argv[1:]`` by default

    Returns:
        argparse Namespace with the subcommand under ``command``
    """
    parser = _ArgumentParser(prog='uavpathsim', description='Interference-aware UAV path planning simulator')
    parser.add_argument('-v', '--verbose', action='store_true', help='debug logging')
    subparsers = parser.add_subparsers(dest='command', required=True)

    def add_command(name, help_text, seeds=True, preset=True):
        sub = subparsers.add_parser(name, help=help_text)
        sub.add_argument('--config', help='YAML scenario file, defaults when omitted')
        sub.add_argument('--seed', type=int, help='overrides the seed of the configuration file')
        if seeds:
            sub.add_argument('--seeds', type=int, nargs='+', help='evaluation seeds, {} consecutive seeds from '
                             'the configuration seed by default'.format(harness.DEFAULT_SEED_COUNT))
        if preset:
            sub.add_argument('--preset', choices=sorted(harness.UTILITY_PRESETS),
                             help='utility weights preset, the configured weights by default')
        return sub

    train = add_command('train', 'train one deep ESN per UAV', seeds=False)
    train.add_argument('--iterations', type=int, help='overrides training_iterations')
    train.add_argument('--out', required=True, help='model directory')

    test = add_command('test', 'greedy episodes of trained models')
    test.add_argument('--models', required=True, help='model directory or checkpoint file')
    test.add_argument('--episodes', type=int, default=1)
    test.add_argument('--out', required=True, help='metrics CSV')
    test.add_argument('--allow-hash-mismatch', action='store_true',
                      help='load models trained with a different configuration')
    test.add_argument('--workers', type=int, default=1)

    baseline = add_command('baseline', 'episodes of the shortest-path scheme')
    baseline.add_argument('--episodes', type=int, default=1)
    baseline.add_argument('--out', required=True, help='metrics CSV')
    baseline.add_argument('--workers', type=int, default=1)

    compare = add_command('compare', 'train per seed, then test against the shortest-path scheme')
    compare.add_argument('--episodes', type=int, default=1)
    compare.add_argument('--iterations', type=int, help='overrides training_iterations')
    compare.add_argument('--out', required=True, help='metrics CSV')
    compare.add_argument('--workers', type=int, default=1)

    bounds = add_command('bounds', 'altitude bounds over SINR thresholds and interference caps',
                         seeds=False, preset=False)
    bounds.add_argument('--out', required=True, help='bounds CSV')

    oracle = add_command('oracle', 'exhaustive best discounted return of a single-UAV world', preset=False)
    oracle.add_argument('--horizon', type=int, required=True)
    oracle.add_argument('--compare', action='store_true',
                        help='train per seed and compare the greedy return with the optimum')
    oracle.add_argument('--iterations', type=int, help='overrides training_iterations with --compare')
    oracle.add_argument('--out', required=True, help='result JSON, comparison CSV with --compare')
    oracle.add_argument('--workers', type=int, default=1)

    export = add_command('export', 'run a parameter sweep and write plot-ready figure data')
    export.add_argument('--figure', required=True, choices=harness.FIGURES + ('trajectories',),
                        help='figure data, or the paths of both schemes on the world of --seed')
    export.add_argument('--values', type=float, nargs='+', help='swept values, the figure defaults otherwise')
    export.add_argument('--series', choices=harness.SERIES, default='scheme', help='what separates the curves')
    export.add_argument('--series-values', nargs='+', help='presets or altitudes of the series')
    export.add_argument('--episodes', type=int, default=1)
    export.add_argument('--iterations', type=int, help='overrides training_iterations')
    export.add_argument('--out', required=True, help='figure data CSV')
    export.add_argument('--workers', type=int, default=1)

    args = parser.parse_args(argv)
    for name in ('episodes', 'iterations', 'horizon', 'workers'):
        value = getattr(args, name, None)
        if value is not None and value < (0 if name == 'iterations' else 1):
            raise UsageError('--{} must be positive, got {}'.format(name, value))
    return args


def scenario_from_args(args):
    """Configuration file plus the command line overrides"""
    config = load_config(args.config)
    changes = {}
    if args.seed is not None:
        changes['rng_seed'] = args.seed
    preset = getattr(args, 'preset', None)
    if preset is not None and preset != 'balanced':
        changes['weights'] = harness.UTILITY_PRESETS[preset]
    return with_overrides(config, **changes) if changes else config


def _sweep_values(figure, values):
    if values is None or figure == 'altitude-bounds':
        return None
    field_name = harness.SWEEPS[figure][0]
    if field_name in ('uav_count', 'bs_count', 'nearest_bs_count'):
        return [int(v) for v in values]
    return values


def run_command(args) -> dict:
    """Execute a parsed command line and return the written files"""
    config = scenario_from_args(args)
    seeds = getattr(args, 'seeds', None) or harness.default_seeds(config)

    if args.command == 'train':
        return harness.train_models(config, config.rng_seed, args.out, iterations=args.iterations)
    if args.command == 'test':
        models = load_models(args.models, config.config_hash(), allow_mismatch=args.allow_hash_mismatch)
        if len(models) != config.n_uavs:
            raise ConfigurationError('checkpoint holds {} models for {} UAVs'.format(len(models), config.n_uavs))
        return harness.run_experiment('test', config, seeds, args.out, episodes=args.episodes, models=models,
                                      workers=args.workers)
    if args.command == 'baseline':
        return harness.run_experiment('baseline', config, seeds, args.out, episodes=args.episodes,
                                      workers=args.workers)
    if args.command == 'compare':
        return harness.run_experiment('compare', config, seeds, args.out, episodes=args.episodes,
                                      iterations=args.iterations, workers=args.workers)
    if args.command == 'bounds':
        return harness.write_bounds(config, config.rng_seed, args.out)
    if args.command == 'oracle':
        if args.compare:
            return harness.write_oracle_comparison(config, seeds, args.horizon, args.out, iterations=args.iterations,
                                                   workers=args.workers)
        return harness.run_oracle(config, args.horizon, config.rng_seed, args.out, workers=args.workers)
    if args.command == 'export':
        if args.figure == 'trajectories':
            return harness.export_trajectories(config, config.rng_seed, args.out, iterations=args.iterations)
        results = harness.run_sweep(args.figure, config, seeds, values=_sweep_values(args.figure, args.values),
                                    episodes=args.episodes, iterations=args.iterations, workers=args.workers,
                                    series=args.series, series_values=args.series_values)
        return {'figure': harness.export_figure_data(results, args.figure, args.out)}
    raise UsageError('unknown command {!r}'.format(args.command))


def _report(err, status):
    json.dump({'error': type(err).__name__, 'message': str(err)}, sys.stderr)
    sys.stderr.write('\n')
    return status


def main(argv=None) -> int:
    """Main function to execute UAVPathSim.

    Returns:
        exit status: 0 on success, 2 for usage and configuration errors, 1 for failures while running
    """
    try:
        args = process_cl_args(argv)
    except UsageError as err:
        return _report(err, EXIT_USAGE)
    configure_logging(args.verbose)

    try:
        outputs = run_command(args)
    except (UsageError, ConfigurationError, CheckpointMismatchError, FileNotFoundError, yaml.YAMLError) as err:
        return _report(err, EXIT_USAGE)
    except Exception as err:
        logger.debug('command failed', exc_info=True)
        return _report(err, EXIT_RUNTIME)
    json.dump(outputs, sys.stdout, indent=2)
    sys.stdout.write('\n')
    return 0


if __name__ == '__main__':
    sys.exit(main())
