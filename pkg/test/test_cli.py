import json

import pytest

import cuspma
from cuspma.cli import EXIT_CONFIG, EXIT_OK, main
from cuspma.config import RunConfig, loads_config, parse_schedule
from cuspma.errors import ConfigError

'''
End-to-end runs of the command line entry point in a temporary directory.
'''


def _write_config(tmp_path, d, name='run.json'):
    path = tmp_path / name
    path.write_text(json.dumps(d))
    return str(path)


def _zero_config(out, grid=16):
    return {'geometry': {'n': 1, 'k': 1, 'grid': grid}, 'forcing': {'name': 'zero'}, 'out': str(out)}


def test_config_errors_exit_4(tmp_path):
    bad_kappa = _write_config(tmp_path, {'geometry': {'kappa': 1.5}, 'out': str(tmp_path / 'a')})
    assert main(['sweep', '--config', bad_kappa]) == EXIT_CONFIG
    malformed = tmp_path / 'broken.json'
    malformed.write_text('{"geometry": {"n": 2,')
    assert main(['sweep', '--config', str(malformed)]) == EXIT_CONFIG
    cfg = _write_config(tmp_path, _zero_config(tmp_path / 'b'), 'zero.json')
    assert main(['frobnicate', '--config', cfg]) == EXIT_CONFIG
    assert main(['sweep', '--config', cfg, '--eps-schedule', '0.5,1']) == EXIT_CONFIG
    assert main(['sweep', '--config', str(tmp_path / 'missing.json')]) == EXIT_CONFIG
    # the uncompensated bump violates the compatibility requirement by default
    bump = _zero_config(tmp_path / 'c')
    bump['forcing'] = {'name': 'bump'}
    assert main(['sweep', '--config', _write_config(tmp_path, bump, 'bump.json')]) == EXIT_CONFIG
    cube = _zero_config(tmp_path / 'd')
    cube['geometry'].update(n=3, k=3)
    assert main(['sweep', '--config', _write_config(tmp_path, cube, 'cube.json')]) == EXIT_CONFIG


def test_wrongly_typed_fields_exit_4(tmp_path):
    for block, entry in (('geometry', {'grid': 'abc'}), ('geometry', {'n': 'two'}),
                         ('solver', {'epsilon': 'x'}), ('solver', {'max_iter': 'many'}),
                         ('probes', {'samples': 'x'}), ('probes', {'gaffney_p': 3}),
                         ('forcing', {'name': 'zero', 'p0': 'six'})):
        d = _zero_config(tmp_path / 'typed')
        d.setdefault(block, {}).update(entry)
        cfg = _write_config(tmp_path, d, 'typed.json')
        assert main(['sweep', '--config', cfg]) == EXIT_CONFIG, entry
    with pytest.raises(ConfigError) as err:
        loads_config('{"geometry": {"grid": "abc"}}')
    assert err.value.field == 'geometry.grid'
    with pytest.raises(ConfigError) as err:
        loads_config('{"solver": {"epsilon": "x"}}')
    assert err.value.field == 'solver'
    with pytest.raises(ConfigError) as err:
        loads_config('{"probes": {"samples": "x"}}')
    assert err.value.field == 'probes'


def test_usage_errors_exit_4(tmp_path):
    cfg = _write_config(tmp_path, _zero_config(tmp_path / 'u'))
    assert main([]) == EXIT_CONFIG
    assert main(['sweep', '--config', cfg, '--grid', 'many']) == EXIT_CONFIG
    assert main(['sweep', '--config', cfg, '--no-such-flag']) == EXIT_CONFIG


def test_config_parsing():
    with pytest.raises(ConfigError) as err:
        loads_config('{"geometry": {"kappa": 1.5}}')
    assert err.value.field == 'geometry.kappa'
    with pytest.raises(ConfigError) as err:
        loads_config('{"solver": {"tolerance": 1}}')
    assert err.value.field == 'solver'
    with pytest.raises(ConfigError):
        loads_config('{"probes": {"suites": ["gaffney", "astrology"]}}')
    assert parse_schedule('1,0.5,0.25') == (1., 0.5, 0.25)
    cfg = RunConfig().override(grid=32, schedule=(1., 0.5))
    assert cfg.grid == 32 and cfg.solver.grid == 32
    assert cfg.schedule == (1., 0.5)
    assert RunConfig.from_dict(cfg.to_dict()) == cfg


def test_sweep_writes_artifacts(tmp_path):
    out = tmp_path / 'out'
    cfg = _write_config(tmp_path, _zero_config(out))
    assert main(['sweep', '--config', cfg, '--eps-schedule', '1,0.5,0.25']) == EXIT_OK
    verdicts = json.loads((out / 'verdicts.json').read_text())
    assert verdicts
    assert all(v in ('pass', 'flagged') for v in verdicts.values())
    manifest = json.loads((out / 'manifest.json').read_text())
    assert manifest['command'] == 'sweep'
    assert manifest['grid'] == 16
    assert manifest['config']['solver']['schedule'] == [1., 0.5, 0.25]
    assert 'report.csv' in manifest['artifacts']
    assert 'zero_0.25_16.csv' in manifest['artifacts']
    for name in manifest['artifacts']:
        assert (out / name).exists()
    header = (out / 'report.csv').read_text().splitlines()[0]
    assert header.startswith('eps,sup_phi')


def test_runs_are_deterministic(tmp_path):
    outputs = []
    for tag in ('first', 'second'):
        out = tmp_path / tag
        cfg = _write_config(tmp_path, _zero_config(out), '%s.json' % tag)
        assert main(['sweep', '--config', cfg, '--eps-schedule', '1,0.5']) == EXIT_OK
        outputs.append(out)
    for name in ('verdicts.json', 'report.csv', 'zero_0.5_16.csv'):
        assert (outputs[0] / name).read_bytes() == (outputs[1] / name).read_bytes()


def test_estimates_report_on_zero_forcing(tmp_path):
    out = tmp_path / 'est'
    cfg = _write_config(tmp_path, _zero_config(out))
    assert main(['estimates-report', '--config', cfg, '--eps-schedule', '1,0.5']) == EXIT_OK
    verdicts = json.loads((out / 'verdicts.json').read_text())
    for name in ('moser_dmu', 'inequality_grad', 'gaffney_p1', 'gaffney_control_grad_rho',
                 'gaffney_control_grad_log_rho'):
        assert verdicts[name] == 'pass', name
    # n = 1: no weighted functional, no Laplacian inequalities
    assert 'I_finite' not in verdicts and 'inequality_lap' not in verdicts
    assert (out / 'estimates.csv').exists()


def test_lab_factory(tmp_path):
    config = RunConfig().override(out=str(tmp_path / 'geo'))
    lab = cuspma.Lab(config, log_file=None)
    verdicts = lab.kernel('geometry-report')
    assert verdicts['curvature_constant'] == 'pass'
    assert verdicts['curvature_fd_oracle'] == 'pass'
    assert verdicts['volume_closed_form'] == 'pass'
    assert json.loads((tmp_path / 'geo' / 'verdicts.json').read_text()) == verdicts
    assert lab.exit_code({'a': 'pass', 'b': 'flagged'}) == 0
    assert lab.exit_code({'a': 'pass', 'b': 'fail'}) == 2
    with pytest.raises(ConfigError):
        lab.kernel('frobnicate')


def test_verify_charts_reports_chart_residuals(tmp_path):
    out = tmp_path / 'charts'
    cfg = _write_config(tmp_path, _zero_config(out))
    main(['verify-charts', '--config', cfg, '--eps-schedule', '1,0.5'])
    verdicts = json.loads((out / 'verdicts.json').read_text())
    assert verdicts['chart_residual_budget'] == 'pass'
    assert verdicts['chart_residual_uniform'] == 'pass'
    rows = (out / 'charts.csv').read_text().splitlines()
    assert sum(row.startswith('chart_residual,') for row in rows) == 2
