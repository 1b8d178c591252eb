"""Closed-form per-user error terms and their union-bound total.

All functions accept real-valued blocklengths and V so the optimizer can use
them in its relaxation. The integer rounding of k_f happens only when V and
n_p are integers (see :func:`feedback_size`).
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from fractions import Fraction
from typing import Callable

from . import fbl
from .feedback import feedback_bits, feedback_bits_relaxed
from .params import SchemeParams, SessionConfig

StatsFn = Callable[[float], fbl.ChannelStats]


def _log_binom(n: float, t: float) -> float:
    return math.lgamma(n + 1) - math.lgamma(t + 1) - math.lgamma(n - t + 1)


def binomial_cdf_below(Ka: int, p: float, T: int) -> float:
    """Pr[Bin(Ka - 1, p) <= T - 1]."""
    n = Ka - 1
    if T > n:
        return 1.0
    if p <= 0:
        return 1.0
    if p >= 1:
        return 0.0
    lp, lq = math.log(p), math.log1p(-p)
    return sum(math.exp(_log_binom(n, t) + t * lp + (n - t) * lq) for t in range(T))


def p_vstar(V: float, n_p: float) -> float:
    """Probability of the most likely sub-block under OMT."""
    M = V * n_p
    if M < 2:
        raise ValueError("need V * n_p >= 2")
    k1 = math.floor(math.log2(M))
    a = math.floor(2 * (M - 2**k1) / V)
    return (n_p - a) / 2**k1 + a / 2 ** (k1 + 1)


def omt_mass_function(V: int, n_p: int) -> list[list[Fraction]]:
    """Exact Pr[(v, u)] under OMT with a uniform prefix; rows v, columns u."""
    M = V * n_p
    k1 = M.bit_length() - 1
    dup = M - 2**k1
    mass = [[Fraction(0)] * n_p for _ in range(V)]
    for s1 in range(1, 2**k1 + 1):
        targets = (s1, s1 + 2**k1) if s1 <= dup else (s1,)
        for s in targets:
            v, u = (s - 1) % V, (s - 1) // V
            mass[v][u] += Fraction(1, 2**k1 * len(targets))
    return mass


def eps1(params: SchemeParams, Ka: int, omt: bool | None = None) -> float:
    """More than T users share the sub-block of a given user."""
    omt = params.omt if omt is None else omt
    if params.T < 1:
        raise ValueError("eps1 needs T >= 1")
    p = p_vstar(params.V, params.n_p) if omt else 1.0 / params.V
    return max(0.0, 1.0 - binomial_cdf_below(Ka, p, params.T))


def eps2(params: SchemeParams, icr: bool | None = None, stats: StatsFn = fbl.mod2_stats) -> float:
    """Failure to decode the inner code over the mod-2 channel."""
    icr = params.icr if icr is None else icr
    levels = int(math.floor(math.log2(params.T))) + 1 if (icr and params.T >= 1) else 1
    rate = params.m_p / params.n_c1
    total = 0.0
    for ell in range(1, levels + 1):
        P = 2 ** (ell - 1) * params.P1 * params.V
        total += fbl.error_prob(stats(P), params.n_c1, rate)
    return min(1.0, total)


def eps3(params: SchemeParams, Ka: int, variant: str) -> float:
    """Undetected index collision with another user."""
    M = params.V * params.n_p
    if variant == "op":
        T = params.T
        return T * (T - 1) / (2 * params.n_p)
    if variant == "icr":
        return -math.expm1((Ka - 1) * math.log1p(-1.0 / M))
    if variant == "omt":
        k1 = math.floor(math.log2(M))
        lo = 2.0**k1
        w_dup = (M - lo) / lo
        w_one = (2 * lo - M) / lo
        c_dup = -math.expm1((Ka - 1) * math.log1p(-1.0 / (2 * lo)))
        c_one = -math.expm1((Ka - 1) * math.log1p(-1.0 / lo))
        return w_dup * c_dup + w_one * c_one
    raise ValueError(f"unknown eps3 variant {variant!r}")


def feedback_size(params: SchemeParams, Ka: int) -> float:
    V, n_p = params.V, params.n_p
    if float(V) == int(V):
        return float(feedback_bits(int(V), int(n_p), Ka))
    return feedback_bits_relaxed(V, n_p, Ka)


def eps_f(params: SchemeParams, config: SessionConfig) -> float:
    k_f = feedback_size(params, config.Ka)
    if k_f <= 0:
        return 0.0
    if params.N_f <= 0:
        return 1.0
    return fbl.awgn_error_prob(params.P_f, params.N_f, k_f / params.N_f)


def eps4(params: SchemeParams, config: SessionConfig, omt: bool | None = None) -> float:
    omt = params.omt if omt is None else omt
    bits = config.k - (params.k1 if omt else 0)
    if bits <= 0:
        return 0.0
    return fbl.awgn_error_prob(params.P2 * config.Ka, params.n_c2, bits / params.n_c2)


def eps_f2(ef: float) -> float:
    return ef


@dataclass(frozen=True)
class ErrorBudget:
    eps1: float
    eps2: float
    eps3: float
    eps4: float
    eps_f: float
    eps_f2: float
    total: float
    excluded: str = "eps_G and eps_e are not modeled"

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def budget(
    params: SchemeParams,
    config: SessionConfig,
    icr: bool | None = None,
    omt: bool | None = None,
    stats: StatsFn = fbl.mod2_stats,
) -> ErrorBudget:
    icr = params.icr if icr is None else icr
    omt = params.omt if omt is None else omt
    e3_variant = "omt" if omt else ("icr" if icr else "op")
    terms = dict(
        eps1=eps1(params, config.Ka, omt),
        eps2=eps2(params, icr, stats),
        eps3=eps3(params, config.Ka, e3_variant),
        eps4=eps4(params, config, omt),
        eps_f=eps_f(params, config),
    )
    terms["eps_f2"] = eps_f2(terms["eps_f"])
    return ErrorBudget(**terms, total=min(1.0, sum(terms.values())))
