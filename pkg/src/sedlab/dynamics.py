"""Equation-of-motion integration and the perturbative response hierarchy.

The equation integrated is the order-reduced form

    m x'' = f(x) + tau f'(x) x' + eE(t),

where the third-derivative radiation-reaction term has been replaced by
tau df/dt; this removes runaway solutions while keeping the damping rate
gamma = tau f'(x*)/(-m) about a stable equilibrium x*.

The integrator is a fixed-step classical 4th-order Runge-Kutta scheme.  The
drive is pre-synthesized on a half-step grid so the midpoint stages use exact
field samples; no interpolation error enters and runs are reproducible
bit-for-bit from (config, seed).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.signal import fftconvolve

from .errors import ConfigurationError, EscapeError, IntegrationDivergedError
from .forces import ForceModel
from .zpf import PhysicalScales, ZpfRealization, eval_field_grid

__all__ = [
    "Trajectory",
    "GreensFunction",
    "integrate_trajectory",
    "zeroth_order",
    "greens_function",
    "first_order_response",
    "second_order_response",
    "hierarchy_terms",
]

_MAX_DT_OMEGA_CUT = 0.35  # >= 18 steps per period of the fastest mode
_MAX_DT_OMEGA0 = 0.05
_CHECK_EVERY = 256  # finiteness / escape check cadence (vector path)


@dataclass(frozen=True)
class Trajectory:
    """Sampled (t, x, p, eE) series from one integration."""

    t0: float
    dt: float
    x: np.ndarray = field(repr=False)
    p: np.ndarray = field(repr=False)
    drive: np.ndarray | None = field(repr=False, default=None)
    meta: dict = field(default_factory=dict)

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.x.size)

    def energy(self, force: ForceModel, m: float) -> np.ndarray:
        return self.p**2 / (2 * m) + force.potential(self.x)


def _validate_step(scales: PhysicalScales, dt: float, omega_cut: float | None):
    if dt <= 0:
        raise ConfigurationError("dt must be positive")
    if dt * scales.omega0 > _MAX_DT_OMEGA0 * (1 + 1e-12):
        raise ConfigurationError(
            f"dt*omega0 = {dt * scales.omega0:g} exceeds {_MAX_DT_OMEGA0}"
        )
    if omega_cut is not None and dt * omega_cut > _MAX_DT_OMEGA_CUT * (1 + 1e-12):
        raise ConfigurationError(
            f"dt*omega_cut = {dt * omega_cut:g} exceeds {_MAX_DT_OMEGA_CUT}"
        )


def synthesize_drive(
    realization: ZpfRealization | None, t0: float, dt: float, n_steps: int
) -> np.ndarray:
    """Drive samples on the half-step grid t0 + k*dt/2, k = 0..2*n_steps."""
    if realization is None:
        return np.zeros(2 * n_steps + 1)
    grid = t0 + 0.5 * dt * np.arange(2 * n_steps + 1)
    return eval_field_grid(realization, grid)


def rk4_core(
    scales: PhysicalScales,
    force: ForceModel,
    drive_half: np.ndarray,
    x0: np.ndarray,
    p0: np.ndarray,
    dt: float,
    n_steps: int,
    store_stride: int = 1,
    t0: float = 0.0,
):
    """Vectorized RK4 over a batch of trajectories sharing (force, dt).

    drive_half has shape (batch, 2*n_steps+1).  Returns decimated (x, p,
    drive) arrays of shape (batch, n_steps//store_stride + 1).  Raises on
    non-finite states or escape beyond the force model's bound.
    """
    m = scales.m
    tau = scales.tau
    fm = force
    bound = force.escape_bound
    x = np.array(x0, dtype=np.float64, copy=True)
    p = np.array(p0, dtype=np.float64, copy=True)
    n_out = n_steps // store_stride + 1
    xs = np.empty((x.size, n_out))
    ps = np.empty((x.size, n_out))
    es = np.empty((x.size, n_out))
    xs[:, 0], ps[:, 0], es[:, 0] = x, p, drive_half[:, 0]
    k_out = 1
    # overflow in a diverging run is reported via IntegrationDivergedError,
    # not as a numpy warning
    with np.errstate(over="ignore", invalid="ignore"):
        for j in range(n_steps):
            e0 = drive_half[:, 2 * j]
            e1 = drive_half[:, 2 * j + 1]
            e2 = drive_half[:, 2 * j + 2]
            k1x = p / m
            k1p = fm.f(x) + tau * fm.fp(x) * (p / m) + e0
            xa = x + 0.5 * dt * k1x
            pa = p + 0.5 * dt * k1p
            k2x = pa / m
            k2p = fm.f(xa) + tau * fm.fp(xa) * (pa / m) + e1
            xb = x + 0.5 * dt * k2x
            pb = p + 0.5 * dt * k2p
            k3x = pb / m
            k3p = fm.f(xb) + tau * fm.fp(xb) * (pb / m) + e1
            xc = x + dt * k3x
            pc = p + dt * k3p
            k4x = pc / m
            k4p = fm.f(xc) + tau * fm.fp(xc) * (pc / m) + e2
            x = x + (dt / 6.0) * (k1x + 2 * k2x + 2 * k3x + k4x)
            p = p + (dt / 6.0) * (k1p + 2 * k2p + 2 * k3p + k4p)
            if bound is not None and np.any(~(np.abs(x) <= bound)):
                worst = float(np.nanmax(np.abs(x)))
                raise EscapeError(
                    f"|x| = {worst:g} beyond the confinement bound {bound:g} "
                    f"near t = {t0 + (j + 1) * dt:g}",
                    t_fail=t0 + (j + 1) * dt,
                    x=worst,
                )
            if (j + 1) % _CHECK_EVERY == 0 or j == n_steps - 1:
                if not (np.all(np.isfinite(x)) and np.all(np.isfinite(p))):
                    raise IntegrationDivergedError(
                        f"non-finite state near t = {t0 + (j + 1) * dt:g}",
                        t_fail=t0 + (j + 1) * dt,
                    )
            if (j + 1) % store_stride == 0:
                xs[:, k_out], ps[:, k_out], es[:, k_out] = x, p, drive_half[:, 2 * (j + 1)]
                k_out += 1
    return xs, ps, es


def integrate_trajectory(
    scales: PhysicalScales,
    force: ForceModel,
    realization: ZpfRealization | None,
    x0: float,
    p0: float,
    t_span: float,
    dt: float,
    store_stride: int = 1,
    t0: float = 0.0,
) -> Trajectory:
    """Integrate m x'' = f(x) + tau f'(x) x' + eE(t) with classical RK4.

    With realization None the drive term is zero.  The field is synthesized
    once on the dt/2 grid, so midpoint stages are exact.
    """
    omega_cut = realization.mode_set.omega_cut if realization is not None else None
    _validate_step(scales, dt, omega_cut)
    n_steps = int(round(t_span / dt))
    if n_steps < 1 or abs(n_steps * dt - t_span) > 1e-9 * max(1.0, t_span):
        raise ConfigurationError("t_span must be a whole number of steps")
    drive = synthesize_drive(realization, t0, dt, n_steps)
    xs, ps, es = rk4_core(
        scales, force, drive[None, :], np.array([x0]), np.array([p0]),
        dt, n_steps, store_stride, t0,
    )
    meta = {
        "scales": scales.to_dict(),
        "force": force.to_dict(),
        "seed": None if realization is None else realization.seed,
        "x0": x0,
        "p0": p0,
    }
    return Trajectory(t0=t0, dt=dt * store_stride, x=xs[0], p=ps[0],
                      drive=es[0], meta=meta)


def zeroth_order(
    scales: PhysicalScales,
    force: ForceModel,
    x0: float,
    p0: float,
    t_span: float,
    dt: float,
    store_stride: int = 1,
) -> Trajectory:
    """Deterministic motion with the drive off; decays on the dissipation time."""
    return integrate_trajectory(
        scales, force, None, x0, p0, t_span, dt, store_stride=store_stride
    )


# ---------------------------------------------------------------------------
# linear-response kernels
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GreensFunction:
    """Response kernel of the motion linearized about the stable equilibrium.

    bare:   g(u) = sin(Omega u) / (m Omega)               (no damping)
    damped: g(u) = exp(-gamma u/2) sin(w1 u) / (m w1),    w1 = sqrt(Omega^2 - gamma^2/4)

    Both satisfy g(0) = 0 and g'(0+) = 1/m.  The bare kernel is only accurate
    for times well below the dissipation time 2/gamma; the damped kernel is
    uniformly valid for the linearized motion.
    """

    kind: str
    m: float
    omega: float  # linearization (curvature) frequency Omega
    gamma: float  # amplitude damping rate tau*Omega^2 (0 for bare)

    @property
    def omega1(self) -> float:
        return float(np.sqrt(self.omega**2 - (self.gamma / 2.0) ** 2))

    def g(self, u):
        u = np.asarray(u, dtype=np.float64)
        w1 = self.omega1
        out = np.sin(w1 * u) / (self.m * w1)
        if self.gamma:
            out = out * np.exp(-0.5 * self.gamma * u)
        return np.where(u >= 0, out, 0.0)

    def gdot(self, u):
        u = np.asarray(u, dtype=np.float64)
        w1 = self.omega1
        if self.gamma:
            env = np.exp(-0.5 * self.gamma * u)
            out = env * (np.cos(w1 * u) / self.m
                         - 0.5 * self.gamma * np.sin(w1 * u) / (self.m * w1))
        else:
            out = np.cos(w1 * u) / self.m
        return np.where(u >= 0, out, 0.0)


def greens_function(
    scales: PhysicalScales, force: ForceModel, kind: str = "damped"
) -> GreensFunction:
    """Kernel for the motion linearized about the unique stable equilibrium.

    Rejects force models without a unique stable equilibrium.  For harmonic
    forces Omega = omega0 and the textbook forms are recovered exactly.
    """
    if kind not in ("bare", "damped"):
        raise ConfigurationError(f"unknown kernel kind '{kind}'")
    omega = force.curvature_frequency(scales.m)  # raises if not unique/stable
    gamma = scales.tau * omega**2 if kind == "damped" else 0.0
    if gamma >= 2 * omega:
        raise ConfigurationError("overdamped linearization is out of scope")
    return GreensFunction(kind=kind, m=scales.m, omega=omega, gamma=gamma)


def _causal_convolution(kernel: np.ndarray, src: np.ndarray, h: float) -> np.ndarray:
    """Trapezoid-rule causal convolution int_0^t k(t-s) src(s) ds on a uniform grid."""
    full = fftconvolve(kernel, src)[: src.size]
    return h * (full - 0.5 * kernel * src[0] - 0.5 * kernel[0] * src)


def first_order_response(
    greens: GreensFunction,
    realization: ZpfRealization,
    t_grid: np.ndarray,
):
    """Field-driven response x1(t) = int_t0^t g(t-s) eE(s) ds and p1 = m dx1/dt.

    The convolution lower limit is the first grid point (finite-past
    truncation); start from a quiescent state and discard a burn-in before
    using the output for stationary statistics.  Computed by the trapezoid
    rule on the field grid via FFT convolution.
    """
    t_grid = np.asarray(t_grid, dtype=np.float64)
    if t_grid.size < 2:
        raise ConfigurationError("t_grid must contain at least two points")
    steps = np.diff(t_grid)
    h = steps[0]
    if not np.allclose(steps, h, rtol=1e-9, atol=0.0):
        raise ConfigurationError("t_grid must be uniform")
    if t_grid[-1] - t_grid[0] > realization.mode_set.recurrence_time * (1 + 1e-9):
        raise ConfigurationError("t_grid exceeds the realization's non-recurrence window")
    e = eval_field_grid(realization, t_grid)
    u = h * np.arange(t_grid.size)
    x1 = _causal_convolution(greens.g(u), e, h)
    p1 = greens.m * _causal_convolution(greens.gdot(u), e, h)
    return x1, p1


def second_order_response(
    greens: GreensFunction,
    force: ForceModel,
    x_zero: np.ndarray,
    x_one: np.ndarray,
    t_grid: np.ndarray,
) -> np.ndarray:
    """Second-order term: x2(t) = int g(t-s) * (1/2) f''(x0(s)) x1(s)^2 ds.

    The quadratic source is propagated by the same linearized kernel. For
    forces with f'' = 0 everywhere (harmonic) the result is identically zero.
    """
    t_grid = np.asarray(t_grid, dtype=np.float64)
    x_zero = np.asarray(x_zero, dtype=np.float64)
    x_one = np.asarray(x_one, dtype=np.float64)
    if not (t_grid.size == x_zero.size == x_one.size):
        raise ConfigurationError("t_grid, x_zero and x_one must share one grid")
    steps = np.diff(t_grid)
    h = steps[0]
    if not np.allclose(steps, h, rtol=1e-9, atol=0.0):
        raise ConfigurationError("t_grid must be uniform")
    src = 0.5 * force.fpp(x_zero) * x_one**2
    u = h * np.arange(t_grid.size)
    return _causal_convolution(greens.g(u), src, h)


# ---------------------------------------------------------------------------
# exact variational hierarchy
# ---------------------------------------------------------------------------


def hierarchy_terms(
    scales: PhysicalScales,
    force: ForceModel,
    realization: ZpfRealization,
    x0: float,
    p0: float,
    t_span: float,
    dt: float,
    store_stride: int = 1,
):
    """Exact drive-amplitude expansion of the order-reduced equation.

    Integrates the zeroth-order motion together with its first and second
    variations with respect to the drive amplitude (linearization is about
    the instantaneous x0(t), damping terms included), so that

        x_full(eps) = x0 + eps*x1 + eps^2*x2 + O(eps^3)

    holds exactly for the integrated equation.  Returns a dict of decimated
    series x0, p0, x1, p1, x2, p2 plus the time grid.  Used to verify the
    cubic scaling of the hierarchy residual for anharmonic forces.
    """
    omega_cut = realization.mode_set.omega_cut
    _validate_step(scales, dt, omega_cut)
    n_steps = int(round(t_span / dt))
    drive = synthesize_drive(realization, 0.0, dt, n_steps)
    m, tau = scales.m, scales.tau
    fm = force

    def deriv(state, e):
        x, p, x1, p1, x2, p2 = state
        fpx = fm.fp(x)
        fppx = fm.fpp(x)
        a0 = (fm.f(x) + tau * fpx * (p / m)) / m
        a1 = (fpx * x1 + tau * (fppx * x1 * (p / m) + fpx * (p1 / m)) + e) / m
        a2 = (
            fpx * x2
            + 0.5 * fppx * x1**2
            + tau * (
                fppx * x2 * (p / m)
                + fpx * (p2 / m)
                + fppx * x1 * (p1 / m)
                + 0.5 * fm.fppp(x) * x1**2 * (p / m)
            )
        ) / m
        return np.array([p / m, m * a0, p1 / m, m * a1, p2 / m, m * a2])

    state = np.array([x0, p0, 0.0, 0.0, 0.0, 0.0])
    n_out = n_steps // store_stride + 1
    out = np.empty((6, n_out))
    out[:, 0] = state
    k_out = 1
    for j in range(n_steps):
        e0, e1, e2 = drive[2 * j], drive[2 * j + 1], drive[2 * j + 2]
        k1 = deriv(state, e0)
        k2 = deriv(state + 0.5 * dt * k1, e1)
        k3 = deriv(state + 0.5 * dt * k2, e1)
        k4 = deriv(state + dt * k3, e2)
        state = state + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if (j + 1) % store_stride == 0:
            out[:, k_out] = state
            k_out += 1
        if (j + 1) % _CHECK_EVERY == 0 and not np.all(np.isfinite(state)):
            raise IntegrationDivergedError(
                f"non-finite hierarchy state near t = {(j + 1) * dt:g}",
                t_fail=(j + 1) * dt,
            )
    t = dt * store_stride * np.arange(n_out)
    return {
        "t": t,
        "x0": out[0], "p0": out[1],
        "x1": out[2], "p1": out[3],
        "x2": out[4], "p2": out[5],
    }
