"""Finite-blocklength normal approximations.

Point-to-point AWGN channel and the binary-input AWGN channel observed
modulo 2 (the effective channel seen by a compute-and-forward receiver).
Rates and blocklengths are real-valued here; callers enforce integrality.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.special import logsumexp, ndtri

LOG2E = math.log2(math.e)
_LN2 = math.log(2.0)
_SQRT2 = math.sqrt(2.0)


class NumericError(ArithmeticError):
    """Quadrature failed to reach the requested tolerance."""


@dataclass(frozen=True)
class ChannelStats:
    capacity: float  # bits per channel use
    dispersion: float  # bits^2 per channel use

    def __post_init__(self):
        if not (self.capacity >= 0 and self.dispersion >= 0):
            raise ValueError(f"invalid channel stats {self}")


def q_func(x: float) -> float:
    """Gaussian tail probability Pr[N(0,1) > x]."""
    return 0.5 * math.erfc(x / _SQRT2)


def q_inv(p: float) -> float:
    """Inverse of :func:`q_func` on (0, 1)."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"q_inv needs 0 < p < 1, got {p!r}")
    x = -float(ndtri(p))
    # Newton polish on log Q keeps relative accuracy in both tails.
    for _ in range(3):
        q = q_func(x)
        if q <= 0.0:
            break
        pdf = math.exp(-0.5 * x * x) / math.sqrt(2 * math.pi)
        step = (math.log(q) - math.log(p)) * q / pdf
        x += step
        if abs(step) < 1e-15 * max(1.0, abs(x)):
            break
    return x


def _check_snr(P: float) -> None:
    if not P > 0 or not math.isfinite(P):
        raise ValueError(f"SNR must be positive and finite, got {P!r}")


def awgn_stats(P: float) -> ChannelStats:
    _check_snr(P)
    cap = 0.5 * math.log2(1.0 + P)
    disp = (P / 2.0) * (P + 2.0) / (P + 1.0) ** 2 * LOG2E**2
    return ChannelStats(cap, disp)


def error_prob(stats: ChannelStats, n: float, rate: float) -> float:
    """Normal-approximation block error probability Q((C - R) sqrt(n / V))."""
    if not n > 0:
        raise ValueError(f"blocklength must be positive, got {n!r}")
    gap = stats.capacity - rate
    if stats.dispersion <= 0.0:
        # Noiseless limit: decoding succeeds iff the rate is below capacity.
        return 0.0 if gap > 0 else (0.5 if gap == 0 else 1.0)
    return q_func(gap * math.sqrt(n / stats.dispersion))


def awgn_error_prob(P: float, n: float, rate: float) -> float:
    return error_prob(awgn_stats(P), n, rate)


def _n_wrap_terms(sigma2: float) -> int:
    # Images out to ~8.5 sigma: the dropped tail is below 1e-15 of the sum.
    return max(3, math.ceil(8.5 * math.sqrt(sigma2) / 2.0) + 1)


def wrapped_gauss_logpdf(z, sigma2: float) -> np.ndarray:
    """Log density of N(0, sigma2) wrapped onto [0, 2)."""
    if not sigma2 > 0:
        raise ValueError(f"sigma2 must be positive, got {sigma2!r}")
    z = np.asarray(z, dtype=float)
    m = np.arange(-_n_wrap_terms(sigma2), _n_wrap_terms(sigma2) + 1)
    shifted = z[..., None] + 2.0 * m
    return logsumexp(-(shifted**2) / (2.0 * sigma2), axis=-1) - 0.5 * math.log(
        2.0 * math.pi * sigma2
    )


def wrapped_gauss_pdf(z, sigma2: float):
    """Density of N(0, sigma2) wrapped onto [0, 2).

    Sums the Gaussian over the images z + 2m, |m| <= max(3, ceil(8.5 sigma / 2) + 1).
    Accepts scalars or arrays.
    """
    z_arr = np.asarray(z, dtype=float)
    if np.any((z_arr < 0) | (z_arr >= 2)):
        raise ValueError("wrapped_gauss_pdf is defined on [0, 2)")
    out = np.exp(wrapped_gauss_logpdf(z_arr, sigma2))
    return float(out) if out.ndim == 0 else out


def _wrapped_sum(z: np.ndarray, sigma2: float) -> np.ndarray:
    # Unnormalized wrapped density; the constant cancels in the density ratio.
    m = _n_wrap_terms(sigma2)
    acc = np.zeros_like(z)
    for k in range(-m, m + 1):
        acc += np.exp(-((z + 2.0 * k) ** 2) / (2.0 * sigma2))
    return acc


def _mod2_moments(P: float, panels: int) -> tuple[float, float]:
    sigma2 = 1.0 / (4.0 * P)
    h = 2.0 / panels
    # Periodic integrand: the midpoint rule converges geometrically.
    z = (np.arange(panels) + 0.5) * h
    fa = _wrapped_sum(z, sigma2)
    fb = _wrapped_sum(np.mod(z - 1.0, 2.0), sigma2)
    keep = fa > 0
    fa, fb = fa[keep], fb[keep]
    w = fa * (h / math.sqrt(2.0 * math.pi * sigma2))
    dens = 1.0 - (np.log2(fa + fb) - np.log2(fa))
    mean = float(np.dot(w, dens))
    var = float(np.dot(w, (dens - mean) ** 2))
    return mean, var


def mod2_stats(P: float, panels: int = 2**14, tol: float = 1e-8) -> ChannelStats:
    """Capacity and dispersion of the bi-AWGN mod-2 channel at effective SNR ``P``.

    The noise variance is 1/(4P). The information density of a wrapped noise
    sample is log2 p(z) - log2((p(z) + p(z - 1 mod 2)) / 2); its mean and
    variance are integrated over [0, 2) and checked against a half-resolution
    pass (doubling the panel count until the two agree within ``tol``).
    """
    _check_snr(P)
    coarse = _mod2_moments(P, panels // 2)
    for _ in range(6):
        fine = _mod2_moments(P, panels)
        if abs(fine[0] - coarse[0]) <= tol and abs(fine[1] - coarse[1]) <= tol:
            cap = min(1.0, max(0.0, fine[0]))
            return ChannelStats(cap, max(0.0, fine[1]))
        coarse, panels = fine, panels * 2
    raise NumericError(f"mod2_stats did not converge at P={P}")


def mod2_error_prob(P: float, n: float, rate: float) -> float:
    return error_prob(mod2_stats(P), n, rate)


class Mod2Table:
    """Tabulated mod-2 capacity/dispersion for fast repeated evaluation.

    Cubic spline in log P over a log-spaced grid. Outside the grid the end
    values are returned: below it the capacity is already ~1e-16 and above
    it the channel is saturated.
    """

    def __init__(self, lo: float = 1e-3, hi: float = 1e4, points: int = 481):
        log_p = np.linspace(math.log(lo), math.log(hi), points)
        stats = [mod2_stats(math.exp(lp)) for lp in log_p]
        self._cap = CubicSpline(log_p, [s.capacity for s in stats]).c.T.tolist()
        self._disp = CubicSpline(log_p, [s.dispersion for s in stats]).c.T.tolist()
        self._lo = float(log_p[0])
        self._step = float(log_p[1] - log_p[0])
        self._n = points

    def __call__(self, P: float) -> ChannelStats:
        _check_snr(P)
        x = (math.log(P) - self._lo) / self._step
        i = int(x)
        if x < 0:
            i, x = 0, 0.0
        elif i >= self._n - 1:
            i, x = self._n - 2, float(self._n - 1)
        dx = (x - i) * self._step
        a, b, c, d = self._cap[i]
        cap = ((a * dx + b) * dx + c) * dx + d
        a, b, c, d = self._disp[i]
        disp = ((a * dx + b) * dx + c) * dx + d
        return ChannelStats(min(1.0, max(0.0, cap)), max(0.0, disp))
