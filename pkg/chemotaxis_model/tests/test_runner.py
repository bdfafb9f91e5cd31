import math
from dataclasses import replace

import numpy as np
import pandas as pd
import pytest

from src.config import load_scenario
from src.diagnostics import RECORD_COLUMNS, read_history_csv, window_sequence
from src.errors import InvariantViolation
from src.grid import read_snapshot
from src.runner import SUMMARY_COLUMNS, run_scenario, sweep


class TestRunScenario:

    def test_records_every_cadence_steps(self, small_config):
        result = run_scenario(small_config)
        history = result.history
        assert list(history.columns) == RECORD_COLUMNS
        assert len(history) == 11
        np.testing.assert_allclose(history['t'], np.linspace(0.0, 0.05, 11), atol=1e-12)
        assert result.summary.status == 'ok'
        assert result.summary.steps == 50

    def test_last_output_at_t_end(self, make_config):
        history = run_scenario(make_config(t_end=0.047)).history
        assert len(history) == 11
        assert history['t'].iloc[-1] == pytest.approx(0.047)
        assert history['t'].iloc[-2] == pytest.approx(0.045)

    def test_last_step_is_shortened(self, make_config):
        result = run_scenario(make_config(tau=0.3, t_end=1.0, cadence=1))
        assert result.summary.steps == 4
        np.testing.assert_allclose(result.history['t'], [0.0, 0.3, 0.6, 0.9, 1.0], atol=1e-12)

    def test_invariants_along_run(self, small_config):
        result = run_scenario(small_config)
        history, s = result.history, result.summary
        assert (history['massMean'] - s.M).abs().max() <= 1e-10 * s.M
        assert history['uMin'].min() >= -1e-12
        assert history['vMin'].min() >= -1e-12
        assert history['vLinf'].max() <= s.V + 1e-12
        assert s.linf_monotone
        assert s.liapunov_monotone
        assert s.dissipation_ok
        assert history['gradPBoundSlack'].max() <= 1e-10

    def test_summary_fields(self, small_config):
        s = run_scenario(small_config).summary
        assert set(s.to_row()) == set(SUMMARY_COLUMNS)
        assert s.gamma == 'exp:1'
        assert s.cells == '32'
        assert s.rng == 'numpy.random.PCG64'
        assert s.n3_holds
        assert s.c1 == pytest.approx(1.0 / math.pi, rel=1e-2)
        assert math.isfinite(s.vl1_rate)

    def test_writes_outputs(self, tmp_path, small_config):
        run_scenario(small_config, tmp_path)
        history = read_history_csv(tmp_path / 'diagnostics.csv')
        assert len(history) == 11

        summary = (tmp_path / 'summary.txt').read_text()
        assert 'status = ok' in summary
        assert 'seed = 1' in summary

        u_files = sorted((tmp_path / 'snapshots' / 'u').glob('t_*.field'))
        v_files = sorted((tmp_path / 'snapshots' / 'v').glob('t_*.field'))
        assert len(u_files) == len(v_files) == 2
        field, t = read_snapshot(u_files[-1])
        assert t == pytest.approx(0.05)
        assert field.values.size == 32

    def test_snapshot_cadence(self, tmp_path, make_config):
        run_scenario(make_config(snapshot_every=2), tmp_path)
        # t = 0, every second output, and the final state
        assert len(list((tmp_path / 'snapshots' / 'u').glob('t_*.field'))) == 6

    def test_plot(self, tmp_path, small_config):
        run_scenario(small_config, tmp_path, plot=True)
        assert (tmp_path / 'trajectory.png').stat().st_size > 0
        assert (tmp_path / 'profiles.png').stat().st_size > 0

    def test_deterministic(self, tmp_path, small_config):
        run_scenario(small_config, tmp_path / 'a')
        run_scenario(small_config, tmp_path / 'b')
        assert (tmp_path / 'a' / 'diagnostics.csv').read_bytes() == (tmp_path / 'b' / 'diagnostics.csv').read_bytes()

    def test_steady_scenario_has_no_slack(self, scenario_dir):
        history = run_scenario(load_scenario(scenario_dir / 'steady.ini')).history
        assert len(history) == 11
        for column in ['energyIdentityResidual', 'dualityIdentityResidual', 'prop6Slack', 'lemma7Slack',
                       'g1Slack', 'g3Slack', 'gradPGronwallSlack', 'uMinusM_L2', 'vLinf']:
            assert history[column].abs().max() <= 1e-12, column
        np.testing.assert_allclose(history['massMean'], 2.0, rtol=1e-14)

    def test_uniform_density_absorbs_at_rate_M(self, make_config):
        cfg = make_config(gamma='constant:1', u_init='constant:1.5', v_init='cosine:0.5,0.25', t_end=2.0,
                          cadence=50)
        s = run_scenario(cfg).summary
        # the implicit step decays the mean of v by 1 / (1 + tau M)
        assert s.vl1_rate == pytest.approx(1.5, rel=0.02)
        assert s.vl1_rate_goodness == pytest.approx(1.0, abs=1e-6)

    def test_free_mode_runs_degenerate_motility(self, make_config):
        result = run_scenario(make_config(gamma='power:2', mode='free', v_init='cosine:0.5,0.25'))
        assert not result.summary.n3_holds
        assert result.summary.c2 == 0.0
        assert result.summary.status == 'ok'

    def test_violation_dumps_state(self, tmp_path, small_config, monkeypatch):
        def fail(state):
            if state.t > 0.0225:
                raise InvariantViolation('maximum principle', 'forced', state.t)

        monkeypatch.setattr('src.runner.check_invariants', fail)
        with pytest.raises(InvariantViolation):
            run_scenario(small_config, tmp_path)
        assert list((tmp_path / 'snapshots' / 'u').glob('violation_t_*.field'))
        assert len(read_history_csv(tmp_path / 'diagnostics.csv')) == 5


class TestTrajectoryEstimates:

    def test_gronwall_slack_is_first_order(self, make_config):
        coarse, fine = (run_scenario(make_config(t_end=2.0, tau=tau)).history for tau in (2e-3, 1e-3))
        g3_coarse = max(coarse['g3Slack'].max(), 0.0)
        g3_fine = max(fine['g3Slack'].max(), 0.0)
        assert g3_coarse > 0.0
        assert g3_coarse / max(g3_fine, 1e-300) >= 1.8
        g1_coarse = max(coarse['g1Slack'].max(), 0.0)
        g1_fine = max(fine['g1Slack'].max(), 0.0)
        assert g1_fine <= g1_coarse / 1.8 + 1e-14

    def test_window_integrals_decrease(self, make_config):
        history = run_scenario(make_config(t_end=4.0, tau=2e-3)).history
        windows = window_sequence(history)
        assert len(windows) == 4
        for column in ('u_dev_integral', 'v_h2_integral', 'v_linf_integral'):
            values = np.array([getattr(w, column) for w in windows])
            assert np.all(np.diff(values) < 0), column

    def test_liapunov_slack_at_default_step(self, make_config):
        history = run_scenario(make_config(tau=None, cadence=1)).history
        assert history['prop6Slack'].iloc[1:].max() <= 1e-6 * history['liapunov'].iloc[0]


class TestSweep:

    def test_identical_configs_give_identical_rows(self, small_config):
        table = sweep([small_config, small_config])
        assert len(table) == 2
        pd.testing.assert_series_equal(table.iloc[0], table.iloc[1], check_names=False)

    def test_failures_are_recorded(self, tmp_path, small_config):
        strict_degenerate = replace(small_config, gamma='power:2', name='degenerate')
        table = sweep([small_config, strict_degenerate, tmp_path / 'missing.ini'], tmp_path / 'out')
        assert list(table['status']) == ['ok', 'ConfigError', 'ConfigError']
        assert list(table['name']) == ['small', 'degenerate', 'missing']
        assert (tmp_path / 'out' / 'sweep_summary.csv').exists()
        assert (tmp_path / 'out' / '000_small' / 'diagnostics.csv').exists()

    def test_negative_seed_is_recorded(self, small_config):
        table = sweep([small_config, replace(small_config, seed=-1, name='negative')])
        assert list(table['status']) == ['ok', 'ConfigError']
        assert 'seed' in table['message'].iloc[1]

    def test_parallel_matches_serial(self, make_config):
        configs = [make_config(seed=s) for s in (1, 2)]
        serial = sweep(configs)
        parallel = sweep(configs, workers=2)
        pd.testing.assert_frame_equal(serial, parallel)

    def test_database(self, tmp_path, small_config):
        from src.results_db import init_db, load_runs

        db_path = tmp_path / 'sweep.db'
        sweep([small_config, replace(small_config, seed=2)], db_path=db_path)
        engine, session = init_db(db_path)
        runs = load_runs(session)
        session.close()
        engine.dispose()
        assert len(runs) == 2
        assert list(runs['seed']) == [1, 2]

    def test_empty(self):
        assert sweep([]).empty


@pytest.mark.slow
def test_default_scenario_homogenizes(scenario_dir):
    cfg = load_scenario(scenario_dir / 'default.ini')
    result = run_scenario(cfg)
    history, s = result.history, result.summary

    assert s.max_mass_drift <= 1e-10
    assert s.final_u_dev_l2 <= 1e-3 * s.M
    # ||v_in||_H1 = 1 for v_in = 1 on the unit interval
    assert s.final_v_h1 <= 1e-3
    assert s.liapunov_monotone
    assert s.linf_monotone
    assert s.max_dissipation_defect <= 1e-10
    assert s.vl1_rate >= 0.9 * s.M
    assert history['g1Slack'].clip(lower=0).max() <= 5e-3
    assert history['g3Slack'].clip(lower=0).max() <= 5e-3
    assert s.last_window_u_dev <= 1e-6 * s.first_window_u_dev

    late = history[history['t'] >= 5.0 / s.M]
    assert np.all(np.diff(late['uMinusM_L2']) <= 1e-12)
    assert np.all(np.diff(late['vH1']) <= 1e-12)


@pytest.mark.slow
@pytest.mark.parametrize("gamma", ['constant:1', 'exp:1', 'rational:2'])
@pytest.mark.parametrize("seed", [1, 2, 3])
def test_suite_is_liapunov_monotone(scenario_dir, gamma, seed):
    kind = gamma.split(':')[0]
    cfg = load_scenario(scenario_dir / 'suite' / f'{kind}_seed{seed}.ini')
    cfg = replace(cfg, t_end=1.0)
    s = run_scenario(cfg).summary
    assert s.liapunov_monotone
    assert s.linf_monotone
    assert s.max_mass_drift <= 1e-10
