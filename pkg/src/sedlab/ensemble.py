"""Reproducible parallel ensembles and the statistics of the transition.

Trajectory i draws its field phases from seed splitmix64(master_seed XOR i)
(pairs share a seed under common-noise pairing), work is distributed over
fixed chunks of trajectory indices, and every reduction runs in index order
after the workers finish -- reports are bit-identical for any worker count.

Error bars: the ensemble members are independent by construction, so every
stationary estimate is formed per trajectory first (a window time-average)
and then averaged across the ensemble; the quoted standard error is the
i.i.d. standard error of that mean.  Windows shorter than 20 correlation
times of the squared-amplitude observables (T_corr = 1/(2 tau omega0^2))
are refused: the per-trajectory averages would not be meaningful.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .dynamics import rk4_core, synthesize_drive
from .errors import (
    ConfigurationError,
    EscapeError,
    IntegrationDivergedError,
    StatisticsError,
)
from .forces import ForceModel
from .rng import derive_seed, gaussian_pair
from .zpf import ModeSet, PhysicalScales, build_mode_set, sample_realization

__all__ = [
    "FixedIC",
    "PairedIC",
    "GaussianIC",
    "EnsembleConfig",
    "EnsembleReport",
    "run_ensemble",
    "stationary_moments",
    "memory_loss",
    "estimate_diffusion",
    "power_spectrum",
]

WORKERS_ENV = "SEDLAB_WORKERS"


@dataclass(frozen=True)
class FixedIC:
    x0: float = 0.0
    p0: float = 0.0


@dataclass(frozen=True)
class PairedIC:
    """Common-noise pairing: members 2i and 2i+1 share the field realization
    of pair i and start from x0a and x0b respectively (p0 = 0)."""

    x0a: float = 1.0
    x0b: float = -1.0


@dataclass(frozen=True)
class GaussianIC:
    x0_mean: float = 0.0
    x0_sd: float = 0.0
    p0_mean: float = 0.0
    p0_sd: float = 0.0


@dataclass(frozen=True)
class EnsembleConfig:
    scales: PhysicalScales
    force: ForceModel
    omega_cut: float
    n_traj: int
    master_seed: int
    t_span: float
    dt: float
    burn_in: float
    oversample: float = 1.0
    initial_conditions: object = field(default_factory=FixedIC)
    retain_drive: bool = True
    chunk_size: int = 64

    def __post_init__(self):
        if self.n_traj < 2:
            raise ConfigurationError("n_traj must be >= 2")
        if self.burn_in < 0 or self.burn_in >= self.t_span:
            raise ConfigurationError("burn_in must lie inside [0, t_span)")
        if self.chunk_size < 1:
            raise ConfigurationError("chunk_size must be >= 1")

    @property
    def decimate_stride(self) -> int:
        """Moments stored every ceil(0.1/omega0 / dt) steps to bound report size."""
        return max(1, int(np.ceil(0.1 / (self.scales.omega0 * self.dt))))

    @property
    def energy_decay_time(self) -> float:
        return 1.0 / (self.scales.tau * self.scales.omega0**2) if self.scales.tau else np.inf

    @property
    def correlation_time(self) -> float:
        """Integrated autocorrelation time of squared-amplitude observables."""
        return 0.5 * self.energy_decay_time

    @property
    def n_members(self) -> int:
        """Number of integrations (2 per pair under common-noise pairing)."""
        return 2 * self.n_traj if isinstance(self.initial_conditions, PairedIC) else self.n_traj

    def mode_set(self) -> ModeSet:
        return build_mode_set(
            self.scales, self.omega_cut, total_time=self.t_span, oversample=self.oversample
        )

    def to_dict(self) -> dict:
        ic = self.initial_conditions
        ic_d = {"kind": type(ic).__name__, **ic.__dict__}
        return {
            "scales": self.scales.to_dict(),
            "force": self.force.to_dict(),
            "omega_cut": self.omega_cut,
            "n_traj": self.n_traj,
            "master_seed": self.master_seed,
            "t_span": self.t_span,
            "dt": self.dt,
            "burn_in": self.burn_in,
            "oversample": self.oversample,
            "initial_conditions": ic_d,
            "retain_drive": self.retain_drive,
            "chunk_size": self.chunk_size,
        }


@dataclass
class EnsembleReport:
    """Decimated per-trajectory series plus ensemble moment curves."""

    config: EnsembleConfig
    t: np.ndarray
    x: np.ndarray  # (n_members, n_times)
    p: np.ndarray
    drive: np.ndarray | None
    diverged: list
    moments: dict  # name -> (mean over ensemble, standard error), arrays over t

    @property
    def n_members(self) -> int:
        return self.x.shape[0]

    def window_slice(self, window: tuple[float, float]) -> np.ndarray:
        lo, hi = window
        return (self.t >= lo - 1e-12) & (self.t <= hi + 1e-12)

    def summary_dict(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "n_members": int(self.n_members),
            "n_diverged": len(self.diverged),
            "t_first": float(self.t[0]),
            "t_last": float(self.t[-1]),
            "decimate_dt": float(self.t[1] - self.t[0]),
        }


def _member_seed(config: EnsembleConfig, member: int) -> int:
    """Field seed for ensemble member `member` (pairs share the pair seed)."""
    if isinstance(config.initial_conditions, PairedIC):
        return derive_seed(config.master_seed, member // 2)
    return derive_seed(config.master_seed, member)


def _member_ic(config: EnsembleConfig, member: int) -> tuple[float, float]:
    ic = config.initial_conditions
    if isinstance(ic, FixedIC):
        return ic.x0, ic.p0
    if isinstance(ic, PairedIC):
        return (ic.x0a, 0.0) if member % 2 == 0 else (ic.x0b, 0.0)
    if isinstance(ic, GaussianIC):
        g1, g2 = gaussian_pair(derive_seed(config.master_seed, 1 << 32), member)
        return ic.x0_mean + ic.x0_sd * g1, ic.p0_mean + ic.p0_sd * g2
    raise ConfigurationError(f"unknown initial-condition spec {type(ic).__name__}")


def _run_chunk(config: EnsembleConfig, mode_set: ModeSet, members: range):
    n_steps = int(round(config.t_span / config.dt))
    stride = config.decimate_stride
    drive = np.empty((len(members), 2 * n_steps + 1))
    x0 = np.empty(len(members))
    p0 = np.empty(len(members))
    for row, member in enumerate(members):
        realization = sample_realization(mode_set, _member_seed(config, member))
        drive[row] = synthesize_drive(realization, 0.0, config.dt, n_steps)
        x0[row], p0[row] = _member_ic(config, member)
    diverged: list[tuple[int, float]] = []
    try:
        xs, ps, es = rk4_core(
            config.scales, config.force, drive, x0, p0, config.dt, n_steps, stride
        )
    except (IntegrationDivergedError, EscapeError):
        # fall back to per-member integration so only the bad members are lost
        n_out = n_steps // stride + 1
        xs = np.full((len(members), n_out), np.nan)
        ps = np.full((len(members), n_out), np.nan)
        es = np.full((len(members), n_out), np.nan)
        for row, member in enumerate(members):
            try:
                xr, pr, er = rk4_core(
                    config.scales, config.force, drive[row : row + 1],
                    x0[row : row + 1], p0[row : row + 1], config.dt, n_steps, stride,
                )
                xs[row], ps[row], es[row] = xr[0], pr[0], er[0]
            except (IntegrationDivergedError, EscapeError) as exc:
                diverged.append((member, exc.t_fail if exc.t_fail is not None else np.nan))
    return xs, ps, es, diverged


def run_ensemble(config: EnsembleConfig, n_workers: int | None = None) -> EnsembleReport:
    """Run the configured ensemble; bit-identical for any worker count.

    Chunks of trajectory indices are fixed by the config (never by the pool),
    and per-chunk results are assembled in index order, so the report depends
    only on (config, master_seed).  Diverged members are excluded and counted;
    more than 1% divergence fails the run.
    """
    if n_workers is None:
        n_workers = int(os.environ.get(WORKERS_ENV, "1"))
    n_workers = max(1, n_workers)
    mode_set = config.mode_set()
    n_mem = config.n_members
    chunks = [range(lo, min(lo + config.chunk_size, n_mem))
              for lo in range(0, n_mem, config.chunk_size)]

    if n_workers == 1:
        results = [_run_chunk(config, mode_set, c) for c in chunks]
    else:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            futures = [pool.submit(_run_chunk, config, mode_set, c) for c in chunks]
            results = [f.result() for f in futures]  # index order, not completion order

    n_steps = int(round(config.t_span / config.dt))
    stride = config.decimate_stride
    t = config.dt * stride * np.arange(n_steps // stride + 1)
    x = np.vstack([r[0] for r in results])
    p = np.vstack([r[1] for r in results])
    drive = np.vstack([r[2] for r in results]) if config.retain_drive else None
    diverged = [d for r in results for d in r[3]]
    if len(diverged) > 0.01 * n_mem:
        raise IntegrationDivergedError(
            f"{len(diverged)} of {n_mem} members diverged (> 1%)"
        )
    ok = np.all(np.isfinite(x), axis=1)
    xm, pm = x[ok], p[ok]
    n = xm.shape[0]
    h_series = pm**2 / (2 * config.scales.m) + config.force.potential(xm)

    def mom(series):
        mean = series.mean(axis=0)
        se = series.std(axis=0, ddof=1) / np.sqrt(n)
        return mean, se

    moments = {
        "x": mom(xm),
        "p": mom(pm),
        "x2": mom(xm**2),
        "p2": mom(pm**2),
        "H": mom(h_series),
    }
    return EnsembleReport(
        config=config, t=t, x=x, p=p, drive=drive, diverged=diverged, moments=moments
    )


def _finite_members(report: EnsembleReport) -> np.ndarray:
    return np.all(np.isfinite(report.x), axis=1)


def _require_window(report: EnsembleReport, window: tuple[float, float] | None,
                    min_corr_times: float = 20.0) -> tuple[float, float]:
    cfg = report.config
    if window is None:
        window = (cfg.burn_in, cfg.t_span)
    lo, hi = window
    if lo < cfg.burn_in - 1e-9:
        raise ConfigurationError(
            f"window start {lo:g} precedes the burn-in {cfg.burn_in:g}"
        )
    if hi > cfg.t_span + 1e-9 or hi <= lo:
        raise ConfigurationError("window must lie inside the simulated span")
    settle = 5.0 * cfg.energy_decay_time
    if lo < settle * (1 - 1e-9):
        raise StatisticsError(
            f"stationary window must start after 5 energy-decay times "
            f"({settle:g}); got {lo:g}"
        )
    needed = min_corr_times * cfg.correlation_time
    if hi - lo < needed:
        raise StatisticsError(
            f"window of length {hi - lo:g} is shorter than {min_corr_times:g} "
            f"correlation times ({needed:g}); estimate refused"
        )
    return lo, hi


def stationary_moments(report: EnsembleReport, window: tuple[float, float] | None = None) -> dict:
    """Window time-averages per trajectory, then ensemble mean +/- standard error.

    Returns {'x2', 'p2', 'H', 'dxdp', 'x', 'p'} -> (value, stderr).  The
    uncertainty product uses per-trajectory centered variances.
    """
    lo, hi = _require_window(report, window)
    sl = report.window_slice((lo, hi))
    ok = _finite_members(report)
    cfg = report.config
    x = report.x[ok][:, sl]
    p = report.p[ok][:, sl]
    n = x.shape[0]
    h_i = (p**2 / (2 * cfg.scales.m) + cfg.force.potential(x)).mean(axis=1)
    per = {
        "x": x.mean(axis=1),
        "p": p.mean(axis=1),
        "x2": (x**2).mean(axis=1),
        "p2": (p**2).mean(axis=1),
        "H": h_i,
        "dxdp": np.sqrt(x.var(axis=1) * p.var(axis=1)),
    }
    return {k: (float(v.mean()), float(v.std(ddof=1) / np.sqrt(n))) for k, v in per.items()}


@dataclass(frozen=True)
class MemoryLossResult:
    t: np.ndarray
    delta: np.ndarray
    fitted_rate: float
    fitted_amplitude: float
    expected_rate: float

    def envelope(self, t) -> np.ndarray:
        return self.fitted_amplitude * np.exp(-self.fitted_rate * np.asarray(t))


def memory_loss(report: EnsembleReport) -> MemoryLossResult:
    """Divergence of common-noise paired sub-ensembles, Delta(t) = |<x>_A - <x>_B|.

    Under common noise the drive cancels in the difference, so the envelope
    decays at the homogeneous amplitude rate tau*omega0^2/2.  The rate is
    fitted by linear regression of log of the |Delta| peaks.
    """
    cfg = report.config
    if not isinstance(cfg.initial_conditions, PairedIC):
        raise ConfigurationError("memory_loss requires common-noise paired initial conditions")
    xa = report.x[0::2]
    xb = report.x[1::2]
    ok = np.all(np.isfinite(xa), axis=1) & np.all(np.isfinite(xb), axis=1)
    delta = np.abs(xa[ok].mean(axis=0) - xb[ok].mean(axis=0))
    t = report.t
    expected = 0.5 * cfg.scales.tau * cfg.scales.omega0**2
    # peaks of |Delta|, skipping the first quarter period
    interior = (delta[1:-1] > delta[:-2]) & (delta[1:-1] >= delta[2:])
    idx = np.where(interior)[0] + 1
    idx = idx[(t[idx] > 0.5 * np.pi / cfg.scales.omega0) & (delta[idx] > 0)]
    if idx.size < 4 or delta.max() < 1e-12:
        return MemoryLossResult(t=t, delta=delta, fitted_rate=0.0,
                                fitted_amplitude=0.0, expected_rate=expected)
    slope, intercept = np.polyfit(t[idx], np.log(delta[idx]), 1)
    return MemoryLossResult(t=t, delta=delta, fitted_rate=float(-slope),
                            fitted_amplitude=float(np.exp(intercept)),
                            expected_rate=expected)


def estimate_diffusion(report: EnsembleReport) -> dict:
    """Field-particle correlators D_px(t) = e<x E> and D_pp(t) = e<p E>.

    Pure ensemble averages at each stored time, with i.i.d. standard errors.
    Requires the drive series to have been retained.
    """
    if report.drive is None:
        raise ConfigurationError("drive series were not retained; re-run with retain_drive")
    ok = _finite_members(report)
    x = report.x[ok]
    p = report.p[ok]
    e = report.drive[ok]
    n = x.shape[0]

    def avg(prod):
        return prod.mean(axis=0), prod.std(axis=0, ddof=1) / np.sqrt(n)

    dpx, dpx_se = avg(x * e)
    dpp, dpp_se = avg(p * e)
    return {"t": report.t, "dpx": dpx, "dpx_se": dpx_se, "dpp": dpp, "dpp_se": dpp_se}


@dataclass(frozen=True)
class SpectrumResult:
    omega: np.ndarray
    psd: np.ndarray
    psd_se: np.ndarray
    peak_omega: float
    fwhm: float
    fwhm_halfmax: float
    integral: float
    resolution: float


def power_spectrum(report: EnsembleReport, window: tuple[float, float] | None = None) -> SpectrumResult:
    """Averaged-periodogram PSD of x over the stationary window.

    The PSD is one-sided in angular frequency and normalized so the bin sum
    times the bin width equals the window-averaged <x^2> (Parseval).  Two
    linewidth figures are reported: `fwhm_halfmax` is the raw half-maximum
    crossing of the averaged periodogram, which carries the spectral-window
    broadening of the finite record; `fwhm` is the window-bias-free estimate
    from the decay rate of the ensemble-averaged autocorrelation envelope
    (twice the fitted envelope rate), which is the figure to compare with a
    predicted line width.
    """
    lo, hi = _require_window(report, window)
    sl = report.window_slice((lo, hi))
    ok = _finite_members(report)
    x = report.x[ok][:, sl]
    n, L = x.shape
    if L < 64:
        raise StatisticsError("window too short for the requested spectral resolution")
    dts = report.t[1] - report.t[0]
    spec = np.fft.rfft(x, axis=1)
    per = (np.abs(spec) ** 2) * (dts / (2 * np.pi * L))
    per[:, 1:] *= 2.0  # one-sided (DC bin unique; drop Nyquist doubling subtlety for odd L)
    if L % 2 == 0:
        per[:, -1] /= 2.0
    omega = 2 * np.pi * np.fft.rfftfreq(L, d=dts)
    psd = per.mean(axis=0)
    psd_se = per.std(axis=0, ddof=1) / np.sqrt(n)
    d_omega = omega[1] - omega[0]
    k = int(np.argmax(psd))
    # parabolic interpolation of the peak position
    if 0 < k < psd.size - 1:
        y0, y1, y2 = np.log(psd[k - 1 : k + 2])
        denom = y0 - 2 * y1 + y2
        shift = 0.5 * (y0 - y2) / denom if denom != 0 else 0.0
        peak = omega[k] + shift * d_omega
    else:
        peak = omega[k]
    # raw half-max crossings, linear interpolation
    half = psd[k] / 2.0
    i = k
    while i > 0 and psd[i] > half:
        i -= 1
    left = omega[i] + (half - psd[i]) * d_omega / (psd[i + 1] - psd[i])
    j = k
    while j < psd.size - 1 and psd[j] > half:
        j += 1
    right = omega[j - 1] + (half - psd[j - 1]) * d_omega / (psd[j] - psd[j - 1])
    fwhm_raw = right - left

    fwhm_fit = 2.0 * _envelope_rate(x, dts, report.config)
    integral = float(psd.sum() * d_omega)
    return SpectrumResult(
        omega=omega, psd=psd, psd_se=psd_se, peak_omega=float(peak),
        fwhm=float(fwhm_fit), fwhm_halfmax=float(fwhm_raw),
        integral=integral, resolution=float(d_omega),
    )


def _envelope_rate(x: np.ndarray, dts: float, cfg: EnsembleConfig) -> float:
    """Amplitude decay rate of the ensemble-averaged autocorrelation of x.

    For the stationary driven oscillator the autocorrelation envelope decays
    as exp(-rate*u); the fitted rate equals half the Lorentzian FWHM.
    """
    n, L = x.shape
    nfft = 1 << int(np.ceil(np.log2(2 * L)))
    spec = np.fft.rfft(x, nfft, axis=1)
    ac = np.fft.irfft((np.abs(spec) ** 2).mean(axis=0), nfft)[:L] / L
    u = dts * np.arange(L)
    # remove the triangular bias of the fixed-denominator autocovariance,
    # (L-k)/L, which would otherwise inflate the fitted decay rate by ~1/T
    ac = ac / (1.0 - np.arange(L) / L)
    # fit over lags covering a few decay times, away from the lag-0 broadband spike
    omega0 = cfg.scales.omega0
    u_lo = 2 * np.pi / omega0
    u_hi = min(4.0 * cfg.energy_decay_time, 0.8 * u[-1])
    absac = np.abs(ac)
    interior = (absac[1:-1] > absac[:-2]) & (absac[1:-1] >= absac[2:])
    idx = np.where(interior)[0] + 1
    idx = idx[(u[idx] >= u_lo) & (u[idx] <= u_hi) & (absac[idx] > 0)]
    if idx.size < 4:
        raise StatisticsError("window too short to fit the autocorrelation envelope")
    slope, _ = np.polyfit(u[idx], np.log(absac[idx]), 1)
    return float(-slope)
