import numpy as np
import pytest

from specfisher import (CalibrationError, McConfig, Measurement, ParamVector,
                        add_homodyne_noise, bounds_sweep, calibrate_scale,
                        coherent_state_floor, load_traces, normalized_eps,
                        ou_model, run_trials, save_trace, synth_process)
from specfisher.harness import _run_single_trial

from conftest import DESK_BAND, DESK_DT, DESK_T, DESK_THETA


def desk_config(C=23.5, trials=100, seed=1, kind="homodyne", workers=1):
    flux = C * DESK_THETA.theta2 / (8.0 * DESK_THETA.theta1)
    meas = Measurement.homodyne(flux) if kind == "homodyne" else Measurement.spc(flux)
    return McConfig(theta_true=DESK_THETA, measurement=meas, T=DESK_T, dt=DESK_DT,
                    trials=trials, seed=seed, workers=workers)


class TestConfigValidation:
    def test_requires_two_trials(self):
        with pytest.raises(ValueError, match="2 trials"):
            desk_config(trials=1)

    def test_measurement_kinds(self):
        with pytest.raises(ValueError):
            Measurement(kind="heterodyne")
        with pytest.raises(ValueError):
            Measurement.homodyne(0.0)
        with pytest.raises(ValueError):
            Measurement.spc(-1.0)

    def test_default_band(self):
        cfg = desk_config()
        lo, hi = cfg.resolved_band()
        assert lo == 0.0
        assert hi == pytest.approx(10.15 * DESK_THETA.theta2)

    def test_desk_scale_defaults(self):
        from specfisher import desk_scale_config, snr_C
        cfg = desk_scale_config()
        assert cfg.theta_true == DESK_THETA
        assert (cfg.T, cfg.dt, cfg.trials) == (0.01, 5e-6, 100)
        assert snr_C(cfg.theta_true, cfg.measurement.s_i) == pytest.approx(23.5)


class TestRunTrials:
    def test_desk_scale_homodyne_errors_bracket_the_limits(self):
        cfg = desk_config(trials=100, seed=1)
        stats = run_trials(cfg)
        assert stats.valid and stats.n_excluded == 0
        eps_n = normalized_eps(stats.eps_bar, cfg.theta_true, cfg.T)
        # experimental range at C = 23.5: homodyne limit ~2.4, measured 4.0+-1.2
        assert 1.6 < eps_n[0] < 6.0
        # statistical containment: never significantly below the quantum bound
        from specfisher import invert_info, normalized_error_matrix, ou_quantum_closed
        Sq = normalized_error_matrix(
            invert_info(ou_quantum_closed(cfg.theta_true, cfg.measurement.s_i, cfg.T)),
            cfg.theta_true, cfg.T)
        se_n = normalized_eps(stats.se, cfg.theta_true, cfg.T)
        assert eps_n[0] >= Sq[0, 0] - 3.0 * se_n[0]
        assert eps_n[1] >= Sq[1, 1] - 3.0 * se_n[1]

    def test_error_scales_inversely_with_horizon(self):
        # horizons deep in the asymptotic regime, where the mean squared
        # error tracks the inverse information and halves when T doubles
        theta = ParamVector(1.0, 1.0)
        flux = 1e4 * theta.theta2 / (8.0 * theta.theta1)  # near-noiseless floor
        out = {}
        for T in (1200.0, 2400.0):
            cfg = McConfig(theta_true=theta, measurement=Measurement.homodyne(flux),
                           T=T, dt=0.25, trials=120, seed=7)
            stats = run_trials(cfg)
            out[T] = stats
        r = out[1200.0].eps_bar / out[2400.0].eps_bar
        se_r = r * np.sqrt((out[1200.0].se / out[1200.0].eps_bar) ** 2
                           + (out[2400.0].se / out[2400.0].eps_bar) ** 2)
        assert np.all(np.abs(r - 2.0) < 3.0 * se_r), (r, se_r)

    def test_exclusion_policy(self, monkeypatch):
        theta = DESK_THETA.as_array()

        def fake_trial(cfg, m):
            # trials 0-2 fail to converge; the rest land on the truth
            return theta * (1.0 + 0.01 * m), m > 2, False

        monkeypatch.setattr("specfisher.harness._run_single_trial", fake_trial)
        cfg = desk_config(trials=20)
        stats = run_trials(cfg)
        assert stats.n_excluded == 3
        assert stats.M == 17
        assert not stats.valid  # 3/20 = 15% > 10%
        cfg = desk_config(trials=40)
        stats = run_trials(cfg)
        assert stats.n_excluded == 3 and stats.valid

    def test_worker_count_does_not_change_results(self):
        cfg1 = desk_config(trials=8, seed=3, workers=1)
        cfg2 = desk_config(trials=8, seed=3, workers=2)
        a, b = run_trials(cfg1), run_trials(cfg2)
        np.testing.assert_array_equal(a.theta_hats, b.theta_hats)
        np.testing.assert_array_equal(a.eps_bar, b.eps_bar)

    def test_spc_trial_path(self):
        cfg = desk_config(trials=4, seed=2, kind="spc")
        hat, converged, at_bound = _run_single_trial(cfg, 0)
        assert hat.shape == (2,)
        stats = run_trials(cfg)
        assert stats.M + stats.n_excluded == 4


class TestBoundsSweep:
    def test_desk_snr_row(self):
        rows = bounds_sweep(DESK_THETA, DESK_T, [23.5])
        r = rows[0]
        assert 1.5 < r["sigma11_quantum"] < 2.5
        assert 1.5 < r["sigma11_homodyne"] < 2.5
        assert r["sigma11_homodyne"] >= r["sigma11_quantum"]
        assert r["sigma22_homodyne"] >= r["sigma22_quantum"]

    def test_low_snr_ratio(self):
        rows = bounds_sweep(DESK_THETA, DESK_T, [1e-3])
        r = rows[0]
        assert r["sigma11_homodyne"] / r["sigma11_quantum"] == pytest.approx(2e3, rel=0.05)

    def test_high_snr_convergence_of_sigma11(self):
        # the sigma11 bounds coincide to well below 1% at C = 1e4; the
        # sigma22 entries converge more slowly (see the acceptance suite)
        rows = bounds_sweep(DESK_THETA, DESK_T, [1e4])
        r = rows[0]
        gap = abs(r["sigma11_homodyne"] - r["sigma11_quantum"]) / r["sigma11_quantum"]
        assert gap < 0.01

    def test_monotone_quantum_sigma11(self):
        grid = [10.0 ** e for e in np.linspace(-3, 4, 29)]
        rows = bounds_sweep(DESK_THETA, DESK_T, grid)
        s11 = [r["sigma11_quantum"] for r in rows]
        assert all(b <= a * (1 + 1e-12) for a, b in zip(s11, s11[1:]))

    def test_rejects_unsorted_or_nonpositive(self):
        with pytest.raises(ValueError):
            bounds_sweep(DESK_THETA, DESK_T, [2.0, 1.0])
        with pytest.raises(ValueError):
            bounds_sweep(DESK_THETA, DESK_T, [0.0, 1.0])


def make_calibration_traces(distortion=1.0, n_traces=24, seed=211,
                            T=0.01, dt=5e-7, C=23.5):
    """X traces plus Y = (X + noise)/distortion pairs at the vacuum floor."""
    model = ou_model()
    s_i = C * DESK_THETA.theta2 / (8.0 * DESK_THETA.theta1)
    s_eta = coherent_state_floor(s_i)
    xs, ys = [], []
    for k in range(n_traces):
        x = synth_process(model, DESK_THETA, T, dt, (seed, k, 0))
        y = add_homodyne_noise(x, s_eta, (seed, k, 1))
        xs.append(x)
        ys.append(type(y)(dt=y.dt, samples=y.samples / distortion))
    return xs, ys


class TestCalibrateScale:
    def test_undistorted_recovers_unity(self):
        xs, ys = make_calibration_traces(distortion=1.0)
        c = calibrate_scale(xs, ys, band=DESK_BAND)
        assert c == pytest.approx(1.0, abs=0.01)

    def test_injected_distortion_recovered(self):
        xs, ys = make_calibration_traces(distortion=1.0 / 1.25)
        c = calibrate_scale(xs, ys, band=DESK_BAND)
        assert c == pytest.approx(0.8, abs=0.008)

    def test_bracket_failure_raises(self):
        xs, ys = make_calibration_traces(distortion=0.1, n_traces=5,
                                         T=0.002, dt=2.5e-7)
        with pytest.raises(CalibrationError, match="sign change"):
            calibrate_scale(xs, ys, band=DESK_BAND)

    def test_requires_five_traces(self):
        xs, ys = make_calibration_traces(n_traces=5, T=0.002, dt=2.5e-7)
        with pytest.raises(ValueError, match="5 traces"):
            calibrate_scale(xs[:4], ys, band=DESK_BAND)


class TestLoadTraces:
    def test_directory_loading_sorted(self, tmp_path):
        traces = [synth_process(ou_model(), ParamVector(1.0, 1.0), 16.0, 0.25, (5, k))
                  for k in range(3)]
        for k, t in enumerate(traces):
            save_trace(t, tmp_path / f"trace_{k}.csv")
        loaded = load_traces(tmp_path)
        assert len(loaded) == 3
        for orig, back in zip(traces, loaded):
            np.testing.assert_array_equal(orig.samples, back.samples)

    def test_single_file(self, tmp_path):
        t = synth_process(ou_model(), ParamVector(1.0, 1.0), 16.0, 0.25, (6,))
        save_trace(t, tmp_path / "one.csv")
        assert len(load_traces(tmp_path / "one.csv")) == 1

    def test_missing_path(self, tmp_path):
        with pytest.raises(ValueError, match="no such file"):
            load_traces(tmp_path / "absent.csv")

    def test_empty_directory(self, tmp_path):
        with pytest.raises(ValueError, match="no .csv"):
            load_traces(tmp_path)
