import json
import pathlib

from click.testing import CliRunner
import pytest

from kpzlab import __version__
from kpzlab.cmdline import _parse_selection, cli
from kpzlab.errors import ArgumentError


def _run(*args):
    return CliRunner().invoke(cli, ['--workers', '1', *args])


def test_version():
    result = CliRunner().invoke(cli, ['--version'])
    assert result.exit_code == 0
    assert __version__ in result.output


def test_exact_writes_one_row_per_grid_point():
    with CliRunner().isolated_filesystem():
        result = _run('exact', '--t', '10', '--s-min', '-1', '--s-max', '1',
                      '--s-step', '0.5', '-m', '20')
        assert result.exit_code == 0, result.output
        lines = pathlib.Path('output/exact.csv').read_text().splitlines()
        assert lines[0] == 's,t,det,doubling_gap'
        assert len(lines) == 6
        values = [float(line.split(',')[2]) for line in lines[1:]]
        assert all(0 < v <= 1 for v in values)
        assert pathlib.Path('output/exact.schema.json').exists()


def test_exact_rejects_non_positive_time():
    with CliRunner().isolated_filesystem():
        result = _run('exact', '--t', '0')
        assert result.exit_code == 2
        assert '"error": "ArgumentError"' in result.output
        assert not pathlib.Path('output/exact.csv').exists()


def test_tw_rejects_empty_grid():
    with CliRunner().isolated_filesystem():
        result = _run('tw', '--sigma-min', '1', '--sigma-max', '0')
        assert result.exit_code == 2


def test_tw_json_output():
    with CliRunner().isolated_filesystem():
        result = _run('--format', 'json', 'tw', '--sigma-min', '-2',
                      '--sigma-max', '0', '--sigma-step', '1')
        assert result.exit_code == 0, result.output
        document = json.loads(pathlib.Path('output/tw.json').read_text())
        assert document['columns'] == ['sigma', 'cdf', 'doubling_gap']
        cdf = [row[1] for row in document['rows']]
        assert cdf == sorted(cdf)
        assert document['provenance']['version'] == __version__


def test_asep_requires_trajectories():
    with CliRunner().isolated_filesystem():
        result = _run('asep', '-n', '0', '-t', '5')
        assert result.exit_code == 2
        assert 'ArgumentError' in result.output


def test_asep_table_and_compare():
    with CliRunner().isolated_filesystem():
        result = _run('--seed', '3', 'asep', '-n', '20', '-t', '5', '-t',
                      '10', '--tag', '1')
        assert result.exit_code == 0, result.output
        lines = pathlib.Path('output/asep.csv').read_text().splitlines()
        assert lines[0] == 'trajectory,time,current,height,x_1'
        assert len(lines) == 41

        result = _run('compare', 'output/asep.csv', '-r', 'output/asep.csv',
                      '-c', 'current', '--select', 'time=10',
                      '--resamples', '200')
        assert result.exit_code == 0, result.output
        report = json.loads(pathlib.Path('output/compare.json').read_text())
        assert report['result']['ks_distance'] == 0.0
        assert report['result']['count'] == 20


def test_runs_are_reproducible():
    with CliRunner().isolated_filesystem():
        args = ('--seed', '11', 'asep', '-n', '10', '-t', '8', '--tag', '2')
        assert _run(*args).exit_code == 0
        first = pathlib.Path('output/asep.csv').read_bytes()
        provenance = pathlib.Path('output/asep.provenance.json').read_bytes()
        assert _run(*args).exit_code == 0
        assert pathlib.Path('output/asep.csv').read_bytes() == first
        assert pathlib.Path('output/asep.provenance.json').read_bytes() \
            == provenance


def test_replica():
    with CliRunner().isolated_filesystem():
        result = _run('replica', '--n', '1', '--t', '1')
        assert result.exit_code == 0, result.output
        document = json.loads(pathlib.Path('output/replica.json').read_text())
        assert abs(document['result']['value'] - 0.39894) < 1e-3


def test_she_semidiscrete():
    with CliRunner().isolated_filesystem():
        result = _run('she', '--solver', 'semidiscrete', '--t', '1',
                      '--dt', '0.01', '-n', '20')
        assert result.exit_code == 0, result.output
        lines = pathlib.Path('output/she.csv').read_text().splitlines()
        assert lines[0] == 'trajectory,z,height'
        assert len(lines) == 21
        assert not pathlib.Path('output/she_moments.json').exists()


def test_configuration_file_is_used():
    with CliRunner().isolated_filesystem():
        pathlib.Path('kpzlab.yaml').write_text('replica:\n  dx: 0.1\n')
        result = _run('replica', '--t', '0.5')
        assert result.exit_code == 0, result.output
        document = json.loads(pathlib.Path('output/replica.json').read_text())
        assert document['result']['dx'] == 0.1
        configuration = document['provenance']['configuration']
        assert configuration['replica.dx'] == 0.1
        assert configuration['replica.t'] == 0.5


def test_node_budget_comes_from_configuration():
    with CliRunner().isolated_filesystem():
        pathlib.Path('kpzlab.yaml').write_text('fredholm:\n  max_nodes: 60\n')
        result = _run('exact', '--t', '10', '--s-min', '0', '--s-max', '0',
                      '-m', '40')
        assert result.exit_code == 4
        assert '"budget": 60' in result.output


def test_invalid_configuration_file():
    with CliRunner().isolated_filesystem():
        pathlib.Path('kpzlab.yaml').write_text('seed: many\n')
        result = _run('replica')
        assert result.exit_code == 2
        assert 'ConfigurationError' in result.output


def test_create_config():
    with CliRunner().isolated_filesystem():
        result = CliRunner().invoke(cli, ['create-config'])
        assert result.exit_code == 0
        assert 'seed: 20240101' in result.output

        result = CliRunner().invoke(cli, ['create-config', '-o',
                                          'kpzlab.yaml'])
        assert result.exit_code == 0
        assert 'trajectories: 1000' in \
            pathlib.Path('kpzlab.yaml').read_text()


def test_cache_inspect():
    result = CliRunner().invoke(cli, ['cache', 'inspect'])
    assert result.exit_code == 0
    assert 'In-Memory' in result.output


def test_parse_selection():
    assert _parse_selection(()) is None
    assert _parse_selection(('time=10', ' t = 2.5')) == \
        {'time': 10.0, 't': 2.5}
    with pytest.raises(ArgumentError):
        _parse_selection(('time',))
    with pytest.raises(ArgumentError):
        _parse_selection(('time=soon',))
