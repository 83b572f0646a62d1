import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import sedlab as sl
from sedlab.rng import derive_seed

from oracles import correlation_quad


def small_mode_set(total_time=50.0, omega_cut=20.0, scales=None):
    return sl.build_mode_set(scales or sl.REF, omega_cut=omega_cut, total_time=total_time)


class TestModeSet:
    def test_ref_comb_arithmetic(self):
        ms = sl.build_mode_set(sl.REF, omega_cut=20.0, total_time=2000.0, oversample=1.0)
        assert ms.delta_omega == pytest.approx(2 * np.pi / 2000.0, rel=1e-15)
        assert ms.n_modes == 6366
        assert ms.omegas[0] == pytest.approx(ms.delta_omega)
        assert ms.omegas[-1] <= 20.0

    def test_amplitudes_satisfy_spectral_rule(self):
        ms = small_mode_set()
        target = 2.0 * sl.REF.force_psd_coeff * ms.omegas**3 * ms.delta_omega
        np.testing.assert_allclose(ms.amplitudes**2, target, rtol=1e-13)
        # spot value at omega = 1 for the reference spacing 2*pi/2000
        ms_ref = sl.build_mode_set(sl.REF, omega_cut=20.0, total_time=2000.0)
        a_at_1 = np.interp(1.0, ms_ref.omegas, ms_ref.amplitudes)
        assert a_at_1 == pytest.approx(4.472e-3, rel=2e-3)

    def test_tau_zero_decouples(self):
        scales = sl.PhysicalScales(tau=0.0)
        ms = sl.build_mode_set(scales, omega_cut=20.0, total_time=100.0)
        assert np.all(ms.amplitudes == 0.0)
        r = sl.sample_realization(ms, 3)
        t = 0.01 * np.arange(1000)
        assert np.all(sl.eval_field_grid(r, t) == 0.0)

    def test_cutoff_below_omega0_rejected(self):
        with pytest.raises(sl.ConfigurationError):
            sl.build_mode_set(sl.REF, omega_cut=0.5, total_time=100.0)

    def test_mode_limit(self):
        with pytest.raises(sl.ResourceLimitError):
            sl.build_mode_set(sl.REF, omega_cut=20.0, total_time=2000.0, max_modes=100)

    def test_discretized_spectrum_consistency(self):
        # running sum of A^2/2 up to W tracks coeff*W^4/4 within one
        # trapezoid correction, exactly (W^3 dw/2 + W^2 dw^2/4 at comb points)
        ms = small_mode_set(total_time=80.0)
        coeff = sl.REF.force_psd_coeff
        csum = np.cumsum(ms.amplitudes**2 / 2.0)
        for k in (10, 100, ms.n_modes - 1):
            w = ms.omegas[k]
            dw = ms.delta_omega
            correction = coeff * (w**3 * dw / 2.0 + w**2 * dw**2 / 4.0)
            assert abs(csum[k] - coeff * w**4 / 4.0) <= correction * (1 + 1e-9)

    @given(tau=st.floats(1e-4, 0.04), omega_cut=st.floats(2.0, 50.0),
           total_time=st.floats(10.0, 500.0))
    @settings(max_examples=25, deadline=None)
    def test_invariants_random_configs(self, tau, omega_cut, total_time):
        scales = sl.PhysicalScales(tau=tau)
        ms = sl.build_mode_set(scales, omega_cut=omega_cut, total_time=total_time)
        assert np.all(np.diff(ms.omegas) > 0)
        assert ms.omegas[-1] <= omega_cut * (1 + 1e-12)
        assert np.all(ms.amplitudes > 0)
        np.testing.assert_allclose(
            ms.amplitudes**2 / 2.0,
            scales.force_psd_coeff * ms.omegas**3 * ms.delta_omega,
            rtol=1e-12,
        )


class TestRealization:
    def test_seed_determinism(self):
        ms = small_mode_set()
        r1 = sl.sample_realization(ms, 12345)
        r2 = sl.sample_realization(ms, 12345)
        assert np.array_equal(r1.phases, r2.phases)
        r3 = sl.sample_realization(ms, 12346)
        assert not np.array_equal(r1.phases, r3.phases)

    @given(seed=st.integers(0, 2**64 - 1))
    @settings(max_examples=50, deadline=None)
    def test_phases_in_half_open_interval(self, seed):
        ms = small_mode_set(total_time=10.0)
        r = sl.sample_realization(ms, seed)
        assert np.all(r.phases > -np.pi)
        assert np.all(r.phases <= np.pi)

    def test_phase_moments_over_many_realizations(self):
        ms = small_mode_set(total_time=3.0)  # few modes, many draws
        n_real = 10_000
        phases = np.stack(
            [sl.sample_realization(ms, derive_seed(77, i)).phases for i in range(n_real)]
        )
        se = np.pi / np.sqrt(3.0 * n_real)
        assert np.all(np.abs(phases.mean(axis=0)) < 4.0 * se)
        # uniform variance pi^2/3
        np.testing.assert_allclose(phases.var(axis=0), np.pi**2 / 3.0, rtol=0.05)

    def test_distinct_seeds_uncorrelated(self):
        ms = small_mode_set(total_time=400.0)  # ~1273 modes
        a = sl.sample_realization(ms, 1).phases
        b = sl.sample_realization(ms, 2).phases
        r = np.corrcoef(a, b)[0, 1]
        assert abs(r) < 3.0 / np.sqrt(a.size)

    def test_serialization_roundtrip(self):
        ms = small_mode_set()
        r = sl.sample_realization(ms, 99)
        doc = r.to_json()
        r2 = sl.ZpfRealization.from_json(doc)
        assert np.array_equal(r.phases, r2.phases)
        assert json.loads(doc)["seed"] == 99
        assert "phases" not in json.loads(doc)


def _manual_mode_set(omegas, amplitudes, delta_omega, scales=None):
    omegas = np.asarray(omegas, dtype=float)
    amplitudes = np.asarray(amplitudes, dtype=float)
    return sl.ModeSet(
        scales=scales or sl.REF,
        omega_cut=float(omegas.max()) if omegas.size else 1.0,
        delta_omega=delta_omega,
        oversample=1.0,
        omegas=omegas,
        amplitudes=amplitudes,
    )


class TestFieldEvaluation:
    def test_single_mode_cosine(self):
        ms = _manual_mode_set([1.0], [2.0], 1.0)
        r = sl.ZpfRealization(mode_set=ms, seed=0, phases=np.array([0.0]))
        t = np.array([0.0, np.pi / 2, np.pi])
        out = sl.eval_field_grid(r, t)
        np.testing.assert_allclose(out, [2.0, 0.0, -2.0], atol=1e-12)

    def test_empty_mode_set(self):
        ms = _manual_mode_set([], [], 1.0)
        r = sl.ZpfRealization(mode_set=ms, seed=0, phases=np.empty(0))
        assert np.all(sl.eval_field_grid(r, 0.1 * np.arange(64)) == 0.0)

    def test_nyquist_guard(self):
        ms = small_mode_set()
        r = sl.sample_realization(ms, 1)
        bad = (np.pi / ms.omega_cut) * 1.5 * np.arange(100)
        with pytest.raises(sl.ConfigurationError):
            sl.eval_field_grid(r, bad)

    def test_fast_synthesis_matches_direct_summation(self):
        # misaligned grid step exercises the chirp path
        ms = small_mode_set(total_time=200.0)  # 636 modes
        r = sl.sample_realization(ms, 41)
        t = 1.7 + 0.0137 * np.arange(6000)
        fast = sl.eval_field_grid(r, t)
        direct = sl.eval_field_direct(r, t)
        assert np.max(np.abs(fast - direct)) <= 1e-10 * np.max(np.abs(direct))

    def test_grid_variance_matches_mode_sum(self):
        # over one full recurrence period the sampled variance equals
        # sum A^2/2 exactly (comb frequencies are grid harmonics)
        ms = small_mode_set(total_time=100.0)
        r = sl.sample_realization(ms, 5)
        m_samples = 10_000
        t = (100.0 / m_samples) * np.arange(m_samples)
        e = sl.eval_field_grid(r, t)
        expected = np.sum(ms.amplitudes**2) / 2.0
        assert np.var(e) == pytest.approx(expected, rel=1e-9)
        # and the mode sum itself sits near coeff*W^4/4 = 127.32
        assert expected == pytest.approx(127.32, rel=0.01)


class TestTheoreticalCorrelation:
    def test_zero_lag_closed_form(self):
        val = sl.theoretical_force_correlation(0.0, sl.REF, 20.0)
        assert val == pytest.approx((1e-2 / np.pi) * 20.0**4 / 4.0, rel=1e-14)
        assert val == pytest.approx(127.32, abs=5e-3)

    def test_tau_zero(self):
        scales = sl.PhysicalScales(tau=0.0)
        lags = np.linspace(0, 5, 11)
        assert np.all(sl.theoretical_force_correlation(lags, scales, 20.0) == 0.0)

    def test_matches_adaptive_quadrature(self):
        for lag in (0.3, 1.0, 2.7, 5.0):
            closed = sl.theoretical_force_correlation(lag, sl.REF, 20.0)
            quad_val = correlation_quad(lag, sl.REF, 20.0)
            assert closed == pytest.approx(quad_val, rel=1e-8)


class TestEmpiricalCorrelation:
    def test_refuses_single_realization(self):
        ms = small_mode_set()
        r = sl.sample_realization(ms, 1)
        with pytest.raises(sl.StatisticsError):
            sl.empirical_correlation([r], [0.0])

    def test_tau_zero_exactly_zero(self):
        scales = sl.PhysicalScales(tau=0.0)
        ms = sl.build_mode_set(scales, omega_cut=20.0, total_time=50.0)
        reals = [sl.sample_realization(ms, s) for s in (1, 2, 3)]
        lags, est, se = sl.empirical_correlation(reals, [0.0, 1.0])
        assert np.all(est == 0.0)

    def test_matches_theory_at_zero_lag(self):
        ms = sl.build_mode_set(sl.REF, omega_cut=20.0, total_time=100.0, oversample=4.0)
        reals = [sl.sample_realization(ms, derive_seed(11, i)) for i in range(150)]
        lags, est, se = sl.empirical_correlation(reals, [0.0], sample_dt=0.05)
        theory = sl.theoretical_force_correlation(lags[0], sl.REF, 20.0)
        assert abs(est[0] - theory) < 4.0 * se[0]

    def test_stationarity_between_window_halves(self):
        ms = sl.build_mode_set(sl.REF, omega_cut=20.0, total_time=200.0)
        reals = [sl.sample_realization(ms, derive_seed(13, i)) for i in range(60)]
        t_rec = ms.recurrence_time
        lags = [0.0, 1.0, 3.0]
        l1, e1, s1 = sl.empirical_correlation(reals, lags, sample_dt=0.05,
                                              window=(0.0, t_rec / 2))
        l2, e2, s2 = sl.empirical_correlation(reals, lags, sample_dt=0.05,
                                              window=(t_rec / 2, t_rec))
        assert np.all(np.abs(e1 - e2) <= 3.0 * np.hypot(s1, s2))

    def test_gaussianity_excess_kurtosis(self):
        # many-mode limit: field values across independent realizations
        ms = sl.build_mode_set(sl.REF, omega_cut=40.0, total_time=200.0)  # ~1273 modes
        n_real, n_t = 1500, 4
        t = np.array([3.0, 40.0, 90.0, 150.0])
        samples = np.empty((n_real, n_t))
        for i in range(n_real):
            r = sl.sample_realization(ms, derive_seed(21, i))
            samples[i] = sl.eval_field_direct(r, t)
        flat = samples.ravel()
        z = (flat - flat.mean()) / flat.std()
        excess = np.mean(z**4) - 3.0
        se = np.sqrt(24.0 / flat.size)
        assert abs(excess) < 3.0 * se
