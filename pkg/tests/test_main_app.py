import json

import pandas as pd
import pytest

from uavpathsim import main_app


@pytest.fixture(autouse=True)
def keep_test_logging(monkeypatch):
    monkeypatch.setattr(main_app, 'configure_logging', lambda verbose=False: None)


def error_of(capsys):
    return json.loads(capsys.readouterr().err.strip().splitlines()[-1])


class TestArguments(object):
    """Tests for the command line parsing
    """

    def test_scenario_overrides(self, config_file):
        args = main_app.process_cl_args(['baseline', '--config', str(config_file), '--seed', '4',
                                         '--preset', 'latency', '--out', 'metrics.csv'])
        config = main_app.scenario_from_args(args)
        assert config.rng_seed == 4
        assert config.weights.interference == 0.0
        assert config.bs_count == 3

    def test_sweep_values(self):
        assert main_app._sweep_values('uav-count', [1.0, 2.0]) == [1, 2]
        assert main_app._sweep_values('learning-rate', [0.01]) == [0.01]
        assert main_app._sweep_values('altitude-bounds', [1.0]) is None

    @pytest.mark.parametrize('argv', [
        ['fly'],
        [],
        ['bounds'],
        ['baseline', '--out', 'x.csv', '--episodes', '0'],
        ['oracle', '--out', 'x.json', '--horizon', '-1'],
        ['export', '--figure', 'heatmap', '--out', 'x.csv'],
        ['export', '--figure', 'density', '--series', 'colour', '--out', 'x.csv'],
    ])
    def test_usage_errors(self, argv, capsys):
        assert main_app.main(argv) == 2
        assert error_of(capsys)['error'] == 'UsageError'


class TestCommands(object):
    """Tests for running the subcommands end to end
    """

    def test_bounds(self, config_file, tmp_path, capsys):
        out = tmp_path / 'bounds.csv'
        assert main_app.main(['bounds', '--config', str(config_file), '--out', str(out)]) == 0
        outputs = json.loads(capsys.readouterr().out)
        assert outputs['bounds'] == str(out)
        assert len(pd.read_csv(out)) == 33

    def test_missing_config(self, tmp_path, capsys):
        argv = ['bounds', '--config', str(tmp_path / 'missing.yaml'), '--out', str(tmp_path / 'bounds.csv')]
        assert main_app.main(argv) == 2
        assert error_of(capsys)['error'] == 'FileNotFoundError'

    def test_unknown_config_key(self, tmp_path, capsys):
        fname = tmp_path / 'scenario.yaml'
        fname.write_text('bs_count: 3\nwarp_drive: true\n')
        assert main_app.main(['bounds', '--config', str(fname), '--out', str(tmp_path / 'bounds.csv')]) == 2
        error = error_of(capsys)
        assert error['error'] == 'ConfigurationError'
        assert 'warp_drive' in error['message']

    def test_baseline(self, config_file, tmp_path):
        out = tmp_path / 'metrics.csv'
        argv = ['baseline', '--config', str(config_file), '--seeds', '0', '1', '--episodes', '2', '--out', str(out)]
        assert main_app.main(argv) == 0
        assert len(pd.read_csv(out)) == 4

    def test_train_and_test(self, config_file, tmp_path, capsys):
        models = tmp_path / 'models'
        assert main_app.main(['train', '--config', str(config_file), '--iterations', '2', '--out', str(models)]) == 0
        assert (models / 'models.nc').is_file()
        capsys.readouterr()

        out = tmp_path / 'metrics.csv'
        argv = ['test', '--config', str(config_file), '--models', str(models), '--seeds', '0', '--out', str(out)]
        assert main_app.main(argv) == 0
        assert list(pd.read_csv(out)['scheme']) == ['proposed']
        capsys.readouterr()

        assert main_app.main(argv + ['--preset', 'latency']) == 2
        assert error_of(capsys)['error'] == 'CheckpointMismatchError'
        assert main_app.main(argv + ['--preset', 'latency', '--allow-hash-mismatch']) == 0

    def test_oracle(self, config_file, tmp_path):
        out = tmp_path / 'oracle.json'
        assert main_app.main(['oracle', '--config', str(config_file), '--horizon', '2', '--out', str(out)]) == 0
        with open(out) as fin:
            assert json.load(fin)['horizon'] == 2

    def test_runtime_failure(self, config_file, tmp_path, capsys):
        """Failures while running, here an unwritable output location, exit with status 1"""
        blocker = tmp_path / 'blocker'
        blocker.write_text('')
        argv = ['bounds', '--config', str(config_file), '--out', str(blocker / 'bounds.csv')]
        assert main_app.main(argv) == 1
        assert error_of(capsys)['error'] == 'FileExistsError'

    def test_oracle_comparison(self, config_file, tmp_path):
        out = tmp_path / 'gap.csv'
        argv = ['oracle', '--config', str(config_file), '--horizon', '2', '--compare', '--seeds', '0', '1',
                '--iterations', '1', '--out', str(out)]
        assert main_app.main(argv) == 0
        assert list(pd.read_csv(out)['seed']) == [0, 1]

    def test_export_trajectories(self, config_file, tmp_path, capsys):
        out = tmp_path / 'paths.csv'
        argv = ['export', '--config', str(config_file), '--figure', 'trajectories', '--iterations', '1',
                '--out', str(out)]
        assert main_app.main(argv) == 0
        assert json.loads(capsys.readouterr().out)['trajectories'] == str(out)
        assert set(pd.read_csv(out)['scheme']) == {'proposed', 'shortest-path'}

    def test_export_preset_series(self, config_file, tmp_path):
        out = tmp_path / 'density.csv'
        argv = ['export', '--config', str(config_file), '--figure', 'density', '--values', '3', '--seeds', '0',
                '--iterations', '1', '--series', 'preset', '--series-values', 'latency', 'balanced',
                '--out', str(out)]
        assert main_app.main(argv) == 0
        assert set(pd.read_csv(out)['series']) == {'latency', 'balanced'}

    def test_export_series_mismatch(self, config_file, tmp_path, capsys):
        argv = ['export', '--config', str(config_file), '--figure', 'learning-rate', '--series', 'preset',
                '--out', str(tmp_path / 'rates.csv')]
        assert main_app.main(argv) == 2
        assert error_of(capsys)['error'] == 'ConfigurationError'
