"""Closed-form reference solutions and initial-condition samplers.

The BKW solutions are the explicit self-similar solutions for Maxwell
molecules (gamma = 0) in 2D (Lambda = 1/8) and 3D (Lambda = 1/12); both are
two-component Gaussian mixtures, which gives an exact sampler. The
bi-Maxwellian is the anisotropic 2D initial condition of the singular-kernel
runs, and the perturbed Maxwellian drives the Landau-damping experiment.
"""

import math

import numpy as np

from .errors import InvalidTime
from .streams import RngStream

BKW_LAMBDA = {2: 1.0 / 8.0, 3: 1.0 / 12.0}

BIMAX_U1 = np.array([-2.0, 1.0])
BIMAX_U2 = np.array([1.0, -1.0])

DAMPING_LENGTH = 4.0 * np.pi
DAMPING_WAVENUMBER = 0.5


def bkw_t_min(dim):
    """Earliest time at which both BKW mixture weights are nonnegative."""
    return 0.0 if dim == 2 else -6.0 * math.log(0.4)


def bkw_scale(dim, t):
    """The variance-like scale K(t) of the BKW solution."""
    t = np.asarray(t, dtype=float)
    if np.any(t < bkw_t_min(dim) - 1e-12):
        raise InvalidTime(f"BKW in {dim}D needs t >= {bkw_t_min(dim)}")
    if dim == 2:
        return 1.0 - 0.5 * np.exp(-t / 8.0)
    return 1.0 - np.exp(-t / 6.0)


def _bkw_coeffs(dim, k):
    # f = (c0 + c2 |v|^2) (2 pi K)^(-d/2) exp(-|v|^2 / (2K))
    c2 = (1.0 - k) / (2.0 * k * k)
    c0 = 2.0 - 1.0 / k if dim == 2 else 2.5 - 1.5 / k
    return c0, c2


def bkw_density(dim, t, v):
    """BKW density at time t, evaluated at velocities v of shape (..., dim)."""
    k = float(bkw_scale(dim, t))
    v = np.asarray(v, dtype=float)
    r2 = np.sum(v * v, axis=-1)
    c0, c2 = _bkw_coeffs(dim, k)
    return (c0 + c2 * r2) * np.exp(-r2 / (2.0 * k)) / (2.0 * np.pi * k) ** (dim / 2.0)


def bkw_mollified_density(dim, t, eps, v):
    """BKW density convolved with the Gaussian mollifier of variance eps.

    The convolution stays in the quadratic-times-Gaussian family: the scale
    becomes K + eps while the quadratic coefficient keeps its 1-K numerator.
    Used as the smoothing-consistent reference for KDE-based diagnostics.
    """
    k = float(bkw_scale(dim, t))
    kt = k + eps
    v = np.asarray(v, dtype=float)
    r2 = np.sum(v * v, axis=-1)
    c2 = (1.0 - k) / (2.0 * kt * kt)
    c0 = 1.0 - dim * kt * c2
    return (c0 + c2 * r2) * np.exp(-r2 / (2.0 * kt)) / (2.0 * np.pi * kt) ** (dim / 2.0)


def _uniform_directions(gen, n, dim):
    v = gen.standard_normal((n, dim))
    return v / np.linalg.norm(v, axis=1)[:, None]


def sample_bkw(dim, t, n, rng: RngStream):
    """Exact BKW sample: Gaussian component with probability 2 - 1/K
    (2.5 - 1.5/K in 3D), else the |v|^2-weighted Gaussian whose squared
    radius is Gamma(d/2 + 1, 2K)."""
    k = float(bkw_scale(dim, t))
    w1 = 2.0 - 1.0 / k if dim == 2 else 2.5 - 1.5 / k
    gen = rng.generator()
    pick = gen.random(n) < w1
    out = np.empty((n, dim))
    n1 = int(np.count_nonzero(pick))
    if n1:
        out[pick] = gen.standard_normal((n1, dim)) * math.sqrt(k)
    n2 = n - n1
    if n2:
        r = np.sqrt(gen.gamma(dim / 2.0 + 1.0, 2.0 * k, size=n2))
        out[~pick] = r[:, None] * _uniform_directions(gen, n2, dim)
    return out


def bimaxwellian_density(v):
    """Anisotropic 2D initial condition: (0.4, 1.6)/(4 pi) Gaussian mixture."""
    v = np.asarray(v, dtype=float)
    d1 = np.sum((v - BIMAX_U1) ** 2, axis=-1)
    d2 = np.sum((v - BIMAX_U2) ** 2, axis=-1)
    return (0.4 * np.exp(-d1 / 2.0) + 1.6 * np.exp(-d2 / 2.0)) / (4.0 * np.pi)


def sample_bimaxwellian(n, rng: RngStream):
    gen = rng.generator()
    pick = gen.random(n) < 0.2
    out = gen.standard_normal((n, 2))
    out[pick] += BIMAX_U1
    out[~pick] += BIMAX_U2
    return out


def landau_damping_density(x, v, alpha):
    """Perturbed Maxwellian f(x, v) = (1 + alpha cos(x/2)) N(0, I_2) on [0, 4 pi]."""
    if not 0 <= alpha < 1:
        raise ValueError("alpha must lie in [0, 1)")
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    r2 = np.sum(v * v, axis=-1)
    return (1.0 + alpha * np.cos(DAMPING_WAVENUMBER * x)) / (2.0 * np.pi) * np.exp(-r2 / 2.0)


def sample_landau_damping(n, alpha, rng: RngStream):
    """Positions by inverse CDF of 1 + alpha cos(x/2) (bisection to 1e-12),
    velocities standard 2D Gaussian. Returns (x, v)."""
    if not 0 <= alpha < 1:
        raise ValueError("alpha must lie in [0, 1)")
    gen = rng.generator()
    u = gen.random(n) * DAMPING_LENGTH  # target of x + 2 alpha sin(x/2)
    lo = np.zeros(n)
    hi = np.full(n, DAMPING_LENGTH)
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        val = mid + 2.0 * alpha * np.sin(DAMPING_WAVENUMBER * mid)
        high = val > u
        hi = np.where(high, mid, hi)
        lo = np.where(high, lo, mid)
        if np.max(hi - lo) < 1e-12:
            break
    x = 0.5 * (lo + hi)
    v = gen.standard_normal((n, 2))
    return x, v
