import numpy as np
import pytest
from scipy import stats

import sedlab as sl
from sedlab.rng import derive_seed, splitmix64

from oracles import dpx_raw_quad, stationary_oracle, switch_on_energy


def small_config(**overrides):
    base = dict(
        scales=sl.REF,
        force=sl.harmonic(1.0),
        omega_cut=20.0,
        n_traj=6,
        master_seed=42,
        t_span=200.0,
        dt=0.016,
        burn_in=20.0,
        chunk_size=4,
    )
    base.update(overrides)
    return sl.EnsembleConfig(**base)


class TestSeedDerivation:
    def test_reference_implementation(self):
        # bit-exact contract: seed_i = splitmix64(master XOR i) with the
        # published finalizer constants
        def reference(z):
            mask = (1 << 64) - 1
            z = (z + 0x9E3779B97F4A7C15) & mask
            z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & mask
            z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & mask
            return z ^ (z >> 31)

        for master, idx in [(0, 0), (1, 0), (12345, 17), (2**63, 255), (42, 10**6)]:
            assert derive_seed(master, idx) == reference(master ^ idx)

    def test_vectorized_matches_scalar(self):
        zs = np.arange(100, dtype=np.uint64)
        vec = splitmix64(zs)
        for i, z in enumerate(zs):
            assert int(splitmix64(np.uint64(z))[0]) == int(vec[i])


class TestRunEnsemble:
    def test_deterministic_rerun(self):
        cfg = small_config()
        a = sl.run_ensemble(cfg)
        b = sl.run_ensemble(cfg)
        assert np.array_equal(a.x, b.x)
        assert np.array_equal(a.p, b.p)
        assert np.array_equal(a.drive, b.drive)

    def test_bit_identical_across_worker_counts(self):
        cfg = small_config(n_traj=10, chunk_size=3)
        a = sl.run_ensemble(cfg, n_workers=1)
        b = sl.run_ensemble(cfg, n_workers=4)
        assert np.array_equal(a.x, b.x)
        assert np.array_equal(a.p, b.p)
        for name in a.moments:
            assert np.array_equal(a.moments[name][0], b.moments[name][0])

    def test_chunking_invariance(self):
        # chunk size is a config field, but lanes are independent:
        # per-trajectory series do not depend on the chunking
        a = sl.run_ensemble(small_config(chunk_size=2))
        b = sl.run_ensemble(small_config(chunk_size=6))
        assert np.array_equal(a.x, b.x)

    def test_worker_count_env_override(self, monkeypatch):
        from sedlab.ensemble import WORKERS_ENV

        cfg = small_config(n_traj=4)
        ref = sl.run_ensemble(cfg, n_workers=1)
        monkeypatch.setenv(WORKERS_ENV, "3")
        via_env = sl.run_ensemble(cfg)
        assert np.array_equal(ref.x, via_env.x)

    def test_paired_members_share_field(self):
        cfg = small_config(initial_conditions=sl.PairedIC(1.0, -1.0), n_traj=3)
        rep = sl.run_ensemble(cfg)
        assert rep.n_members == 6
        assert np.array_equal(rep.drive[0], rep.drive[1])
        assert np.array_equal(rep.drive[2], rep.drive[3])
        assert not np.array_equal(rep.drive[0], rep.drive[2])
        assert rep.x[0, 0] == 1.0 and rep.x[1, 0] == -1.0

    def test_divergent_member_fraction_guard(self):
        # an anti-confining force diverges every member -> run fails
        cfg = small_config(force=sl.polynomial([0.0, 25.0]), n_traj=4,
                           t_span=200.0, burn_in=10.0)
        with pytest.raises(sl.IntegrationDivergedError):
            sl.run_ensemble(cfg)

    def test_n_traj_validation(self):
        with pytest.raises(sl.ConfigurationError):
            small_config(n_traj=0)

    def test_gaussian_initial_conditions(self):
        cfg = small_config(
            initial_conditions=sl.GaussianIC(x0_mean=0.0, x0_sd=1.0, p0_sd=1.0),
            n_traj=64,
        )
        rep = sl.run_ensemble(cfg)
        assert np.std(rep.x[:, 0]) == pytest.approx(1.0, rel=0.35)
        assert len(set(np.round(rep.x[:, 0], 12))) > 32  # actually random draws


class TestMomentsAgainstOracle:
    def test_mean_position_is_zero(self, ref_ensemble_report):
        rep = ref_ensemble_report
        sl_win = rep.t >= rep.config.burn_in
        mean, se = rep.moments["x"]
        z = np.abs(mean[sl_win]) / se[sl_win]
        # pointwise z-scores behave like |N(0,1)|: allow the rare 3-sigma tail
        assert np.mean(z > 3.0) < 0.01

    def test_stationary_moments_match_linear_response(self, ref_ensemble_report):
        oracle = stationary_oracle(sl.REF, 20.0)
        mom = sl.stationary_moments(ref_ensemble_report)
        for key in ("x2", "p2", "H", "dxdp"):
            val, se = mom[key]
            assert abs(val - oracle[key]) < 3.0 * se, (
                f"{key}: measured {val:.4f} +- {se:.4f}, oracle {oracle[key]:.4f}"
            )

    def test_oracle_frozen_values(self):
        # guards the oracle itself against drift
        oracle = stationary_oracle(sl.REF, 20.0)
        assert oracle["x2"] == pytest.approx(0.507917, abs=2e-6)
        assert oracle["p2"] == pytest.approx(1.153993, abs=2e-6)
        assert oracle["H"] == pytest.approx(0.830955, abs=2e-6)
        assert oracle["dxdp"] == pytest.approx(0.765593, abs=2e-6)

    def test_window_validation(self, ref_ensemble_report):
        with pytest.raises(sl.ConfigurationError):
            sl.stationary_moments(ref_ensemble_report, window=(0.0, 2000.0))
        with pytest.raises(sl.StatisticsError):
            sl.stationary_moments(ref_ensemble_report, window=(500.0, 1100.0))

    def test_tau_to_zero_refused(self):
        # correlation time diverges as tau -> 0: no window long enough
        scales = sl.PhysicalScales(tau=0.0)
        cfg = sl.EnsembleConfig(
            scales=scales, force=sl.harmonic(1.0), omega_cut=20.0,
            n_traj=2, master_seed=1, t_span=60.0, dt=0.016, burn_in=0.0,
        )
        rep = sl.run_ensemble(cfg)
        with pytest.raises(sl.StatisticsError):
            sl.stationary_moments(rep)

    def test_ground_state_gaussianity(self, ref_ensemble_report):
        # thin to near-independent samples: the x autocorrelation is
        # exp(-gamma u/2) cos(w1 u), so pick a lag with a decayed envelope
        # AND a cosine near zero (multiples of ~2 pi keep phase coherence)
        rep = ref_ensemble_report
        sl_win = rep.t >= rep.config.burn_in
        x = rep.x[:, sl_win]
        dts = rep.t[1] - rep.t[0]
        gamma = sl.REF.tau * sl.REF.omega0**2
        w1 = sl.REF.omega0 * np.sqrt(1 - (gamma / 2) ** 2)
        candidates = np.arange(int(300 / dts), int(500 / dts))
        rho = np.exp(-gamma * candidates * dts / 2) * np.abs(np.cos(w1 * candidates * dts))
        thin = int(candidates[np.argmin(rho)])
        samples = x[:, ::thin].ravel()
        stat, pvalue = stats.normaltest(samples)
        assert pvalue > 0.01
        oracle = stationary_oracle(sl.REF, 20.0)["x2"]
        se = np.sqrt(2.0 / samples.size) * oracle
        assert abs(samples.var() - oracle) < 4.0 * se


class TestMemoryLoss:
    def test_rate_matches_homogeneous_decay(self, memory_report):
        res = sl.memory_loss(memory_report)
        assert res.expected_rate == pytest.approx(5e-3, rel=1e-12)
        assert res.fitted_rate == pytest.approx(res.expected_rate, rel=0.02)

    def test_equal_starts_no_divergence(self):
        cfg = small_config(initial_conditions=sl.PairedIC(0.7, 0.7), n_traj=2,
                           t_span=300.0)
        rep = sl.run_ensemble(cfg)
        res = sl.memory_loss(rep)
        assert np.max(res.delta) < 1e-12
        assert res.fitted_rate == 0.0

    def test_requires_pairing(self, ref_ensemble_report):
        with pytest.raises(sl.ConfigurationError):
            sl.memory_loss(ref_ensemble_report)


class TestDiffusionEstimates:
    def test_zero_at_start(self, ref_ensemble_report):
        d = sl.estimate_diffusion(ref_ensemble_report)
        assert d["dpx"][0] == 0.0
        assert d["dpp"][0] == 0.0

    def test_stationary_dpp_matches_linear_response(self, ref_ensemble_report):
        rep = ref_ensemble_report
        d = sl.estimate_diffusion(rep)
        sl_win = rep.t >= rep.config.burn_in
        per_traj = (rep.p[:, sl_win] * rep.drive[:, sl_win]).mean(axis=1)
        val = per_traj.mean()
        se = per_traj.std(ddof=1) / np.sqrt(per_traj.size)
        gamma = sl.REF.tau * sl.REF.omega0**2
        oracle = gamma * stationary_oracle(sl.REF, 20.0)["p2"] / sl.REF.m
        assert abs(val - oracle) < 3.0 * se
        # the time-resolved curve window-averages to the same number
        assert d["dpp"][sl_win].mean() == pytest.approx(val, rel=1e-12)

    def test_stationary_dpx_matches_response_correlator(self, ref_ensemble_report):
        rep = ref_ensemble_report
        sl_win = rep.t >= rep.config.burn_in
        per_traj = (rep.x[:, sl_win] * rep.drive[:, sl_win]).mean(axis=1)
        val = per_traj.mean()
        se = per_traj.std(ddof=1) / np.sqrt(per_traj.size)
        oracle = dpx_raw_quad(sl.REF, 20.0)
        assert abs(val - oracle) < 3.0 * se

    def test_buildup_from_zero_to_plateau(self, ref_ensemble_report):
        # the pointwise D_pp(t) curve is noise-dominated at any feasible
        # ensemble size; the build-up is resolved through the mean energy it
        # feeds. The broadband part of <H> arrives within ~1/omega0 and the
        # resonant quarter relaxes at the energy rate gamma; the measured
        # curve must track the exact switch-on oracle into the plateau.
        rep = ref_ensemble_report
        d = sl.estimate_diffusion(rep)
        t = d["t"]
        assert d["dpx"][0] == 0.0
        assert d["dpp"][0] == 0.0
        h_mean, _ = rep.moments["H"]
        windows = [(0.5, 10.0), (40.0, 60.0), (280.0, 320.0), (900.0, 1100.0)]
        h_inf = stationary_oracle(sl.REF, 20.0)["H"]
        theory = []
        for lo, hi in windows:
            m = (t >= lo) & (t <= hi)
            tq = t[m][:: max(1, m.sum() // 16)]
            th = switch_on_energy(sl.REF, 20.0, rep.config.t_span, tq).mean()
            measured = h_mean[m].mean()
            per_traj = (rep.p[:, m] ** 2 / 2 + rep.x[:, m] ** 2 / 2).mean(axis=1)
            se = per_traj.std(ddof=1) / np.sqrt(per_traj.size)
            assert abs(measured - th) < 4.0 * se
            theory.append(th)
        # the oracle curve itself rises from below and plateaus
        assert theory[0] < 0.85 * h_inf
        assert theory[2] > 0.97 * h_inf
        assert theory[3] == pytest.approx(h_inf, rel=5e-3)
        # windowed D_pp has settled by the burn-in: compare two late windows
        mid = (t >= 600.0) & (t <= 1000.0)
        late = (t >= 1500.0)
        per_mid = (rep.p[:, mid] * rep.drive[:, mid]).mean(axis=1)
        per_late = (rep.p[:, late] * rep.drive[:, late]).mean(axis=1)
        diff = per_mid - per_late
        se = diff.std(ddof=1) / np.sqrt(diff.size)
        assert abs(diff.mean()) < 3.0 * se

    def test_requires_drive(self):
        cfg = small_config(retain_drive=False)
        rep = sl.run_ensemble(cfg)
        with pytest.raises(sl.ConfigurationError):
            sl.estimate_diffusion(rep)


class TestPowerSpectrum:
    def test_peak_fwhm_and_parseval(self, ref_ensemble_report):
        spec = sl.power_spectrum(ref_ensemble_report)
        assert abs(spec.peak_omega - 1.0) <= spec.resolution
        # linewidth of the damped response: tau*omega0^2 within 20%
        assert spec.fwhm == pytest.approx(1e-2, rel=0.2)
        mom = sl.stationary_moments(ref_ensemble_report)
        assert spec.integral == pytest.approx(mom["x2"][0], rel=1e-9)

    def test_raw_halfmax_is_window_broadened(self, ref_ensemble_report):
        spec = sl.power_spectrum(ref_ensemble_report)
        assert spec.fwhm_halfmax >= spec.fwhm  # finite record broadens the line

    def test_short_window_refused(self, ref_ensemble_report):
        with pytest.raises(sl.StatisticsError):
            sl.power_spectrum(ref_ensemble_report, window=(500.0, 1050.0))


@pytest.mark.slow
class TestErrorBarCalibration:
    def test_two_sigma_coverage(self):
        # over 20 independent master seeds the oracle lies inside the 2-sigma
        # interval of <x^2> in at least 18 cases
        scales = sl.PhysicalScales(tau=0.025)
        oracle = stationary_oracle(scales, 10.0)["x2"]
        hits = 0
        for seed in range(20):
            # masters far apart: nearby masters share member-seed blocks
            cfg = sl.EnsembleConfig(
                scales=scales, force=sl.harmonic(1.0), omega_cut=10.0,
                n_traj=24, master_seed=1000 + 1_000_003 * seed, t_span=700.0, dt=0.03,
                burn_in=200.0, chunk_size=24,
            )
            rep = sl.run_ensemble(cfg)
            val, se = sl.stationary_moments(rep)["x2"]
            hits += abs(val - oracle) <= 2.0 * se
        assert hits >= 18
