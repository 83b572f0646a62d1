"""Deterministic, counter-based random number plumbing.

Everything stochastic in sedlab flows through two functions:

* ``derive_seed(master_seed, index)`` -- the per-trajectory (or per-pair)
  seed stream used by the ensemble runner.  Defined bit-exactly as
  ``splitmix64(master_seed XOR index)`` so any implementation of the same
  mixing constants reproduces the streams.

* ``mode_phases(seed, n)`` -- phases of field modes.  Phase ``alpha``
  (1-based) depends only on ``(seed, alpha)``, never on evaluation order,
  so parallel construction is order-independent.

splitmix64 mixing constants (Steele, Lea & Flood's finalizer):
    gamma  = 0x9E3779B97F4A7C15
    mul1   = 0xBF58476D1CE4E5B9
    mul2   = 0x94D049BB133111EB
    shifts = 30, 27, 31
"""

from __future__ import annotations

import numpy as np

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_MUL1 = np.uint64(0xBF58476D1CE4E5B9)
_MUL2 = np.uint64(0x94D049BB133111EB)
_MASK = np.uint64(0xFFFFFFFFFFFFFFFF)

# Domain tags keep the phase stream and the seed-derivation stream disjoint
# even when the same integer is used for both purposes.
_PHASE_TAG = np.uint64(0xA5F152ED90C4FB3D)


def splitmix64(z) -> np.ndarray:
    """Vectorized splitmix64 finalizer on uint64 input (wrapping arithmetic)."""
    z = np.atleast_1d(np.asarray(z, dtype=np.uint64))
    z = (z + _GAMMA) & _MASK
    z = (z ^ (z >> np.uint64(30))) * _MUL1
    z = (z ^ (z >> np.uint64(27))) * _MUL2
    z = z ^ (z >> np.uint64(31))
    return z


def derive_seed(master_seed: int, index: int) -> int:
    """Per-trajectory seed: splitmix64(master_seed XOR index).

    Note the XOR: masters that differ only in their low bits address
    overlapping blocks of member seeds, so replicate studies wanting
    independent ensembles should pick masters that differ in high bits
    (anything >= 2*n_traj apart is disjoint; far apart is best).
    """
    z = np.uint64(master_seed & 0xFFFFFFFFFFFFFFFF) ^ np.uint64(index & 0xFFFFFFFFFFFFFFFF)
    return int(splitmix64(z)[0])


def uniform01(seed: int, counters: np.ndarray) -> np.ndarray:
    """Counter-based uniforms on [0, 1): value i depends only on (seed, counters[i])."""
    base = splitmix64(np.uint64(seed & 0xFFFFFFFFFFFFFFFF) ^ _PHASE_TAG)[0]
    ctr = np.asarray(counters, dtype=np.uint64)
    keyed = (base + ctr * _GAMMA) & _MASK
    bits = splitmix64(keyed)
    # top 53 bits -> double in [0, 1)
    return (bits >> np.uint64(11)).astype(np.float64) * (2.0 ** -53)


def mode_phases(seed: int, n_modes: int) -> np.ndarray:
    """Phases for modes alpha = 1..n_modes, i.i.d. uniform on (-pi, pi].

    u in [0,1) maps to pi*(1 - 2u) so the right endpoint +pi is attainable
    and -pi is excluded, matching the open-closed interval convention.
    """
    if n_modes == 0:
        return np.empty(0)
    u = uniform01(seed, np.arange(1, n_modes + 1, dtype=np.uint64))
    return np.pi * (1.0 - 2.0 * u)


def gaussian_pair(seed: int, index: int) -> tuple[float, float]:
    """Two independent standard normals keyed by (seed, index); Box-Muller."""
    u = uniform01(seed, np.uint64(index) * np.uint64(2) + np.arange(2, dtype=np.uint64))
    u1 = max(u[0], 2.0 ** -53)
    r = np.sqrt(-2.0 * np.log(u1))
    return float(r * np.cos(2 * np.pi * u[1])), float(r * np.sin(2 * np.pi * u[1]))
