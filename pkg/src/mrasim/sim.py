"""Monte Carlo evaluation of complete sessions.

Phase 1 is simulated sample by sample. Feedback and data decoding are drawn
as independent failures with the probabilities of the finite-blocklength
approximation, which is also how the design analysis treats them.

Every session draws from its own generator seeded by (seed, session index),
so a session's outcome does not depend on how many sessions ran before it.
"""

from __future__ import annotations

import json
import math
import sys
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import error_model
from .op_phase import Scheme, build_occupancy_estimate, decode_session, draw_identities
from .params import SessionConfig

CAUSES = (
    "overload",  # more than T users in the sub-block
    "collision",  # identity shared with another user
    "decode",  # the true user count did not decode to the user
    "misselection",  # it did, but another hypothesis had a smaller residual
    "erasure",  # decoded, then removed to bring the estimate down to Ka
    "feedback",
    "interference",  # another user transmitted in the same data slot
    "data",
)
FEEDBACK_MODELS = ("pessimistic", "silent")


@dataclass(frozen=True)
class SimOptions:
    feedback_model: str = "pessimistic"
    phase23: bool = True  # False: feedback and data never fail
    phase1_noise: bool = True
    error_policy: str = "empty"
    eps_f: float | None = None  # overrides for the phase 2/3 failure rates
    eps4: float | None = None

    def __post_init__(self):
        if self.feedback_model not in FEEDBACK_MODELS:
            raise ValueError(f"feedback_model must be one of {FEEDBACK_MODELS}")


@dataclass
class SessionOutcome:
    success: np.ndarray  # per user
    clean: np.ndarray  # reached phase 3 alone in its slot
    u_data: np.ndarray  # uniform draw deciding the data decode
    causes: dict
    false_alarms: int
    padded: int


def phase23_rates(scheme: Scheme, config: SessionConfig, options: SimOptions) -> tuple[float, float]:
    if not options.phase23:
        return 0.0, 0.0
    ef = error_model.eps_f(scheme.params, config) if options.eps_f is None else options.eps_f
    e4 = error_model.eps4(scheme.params, config) if options.eps4 is None else options.eps4
    return ef, e4


def session_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, index]))


def run_session(
    scheme: Scheme,
    config: SessionConfig,
    rng: np.random.Generator,
    options: SimOptions = SimOptions(),
    rates: tuple[float, float] | None = None,
) -> SessionOutcome:
    p = scheme.params
    Ka = config.Ka
    V, n_p, n = int(p.V), p.n_p, int(p.n_c1)
    eps_f, eps4 = rates if rates is not None else phase23_rates(scheme, config, options)

    v, u, _ = draw_identities(Ka, V, n_p, p.omt, rng)
    Y = rng.standard_normal((V, n))
    if not options.phase1_noise:
        Y[:] = 0.0
    np.add.at(Y, v, scheme.signals[u])
    dec = decode_session(Y, scheme, error_policy=options.error_policy)
    est = build_occupancy_estimate(dec, Ka, rng)

    occ = np.zeros((V, n_p), dtype=np.int64)
    np.add.at(occ, (v, u), 1)
    t_true = occ.sum(axis=1)[v]
    overload = t_true > scheme.T
    collision = occ[v, u] > 1
    found = dec.singles[v, u]
    listed = est.S_hat[v, u] == 1
    erased = found & ~listed
    missed = ~found & ~overload & ~collision
    t_ok = np.minimum(t_true, scheme.T)
    right_hyp = dec.candidates[t_ok, v, u]
    misselection = missed & right_hyp
    decode_fail = missed & ~right_hyp

    # Data slots follow increasing s; flat index of (v, u) is v + V u.
    flat = est.S_hat.ravel(order="F")
    slot_of = np.cumsum(flat, dtype=np.int64) - 1
    pos = v + V * u
    u_fb = rng.random(Ka)
    u_data = rng.random(Ka)
    random_slot = rng.integers(Ka, size=Ka)
    fb_fail = u_fb < eps_f
    slot = np.where(listed, slot_of[pos], -1)
    if options.feedback_model == "pessimistic":
        slot = np.where(fb_fail, random_slot, slot)
    else:
        slot = np.where(fb_fail, -1, slot)
    sending = slot >= 0
    load = np.bincount(slot[sending], minlength=Ka)
    alone = np.zeros(Ka, dtype=bool)
    alone[sending] = load[slot[sending]] == 1
    clean = listed & ~fb_fail & alone
    success = clean & (u_data >= eps4)

    causes = {
        "overload": int(overload.sum()),
        "collision": int(collision.sum()),
        "decode": int(decode_fail.sum()),
        "misselection": int(misselection.sum()),
        "erasure": int(erased.sum()),
        "feedback": int((fb_fail & listed).sum()),
        "interference": int((listed & ~fb_fail & ~alone).sum()),
        "data": int((clean & ~success).sum()),
    }
    false_alarms = int((dec.singles & (occ == 0)).sum())
    return SessionOutcome(success, clean, u_data, causes, false_alarms, len(est.padded))


@dataclass
class SessionReport:
    trials: int
    Ka: int
    user_errors: int
    pupe: float
    ci95: float
    tallies: dict
    false_alarms: int
    padded: int
    eps_f: float
    eps4: float
    options: dict = field(default_factory=dict)
    scheme: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)

    @property
    def std(self) -> float:
        return self.ci95 / 1.96

    def rate(self, cause: str) -> float:
        return self.tallies[cause] / (self.trials * self.Ka)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _accumulate(scheme, config, trials, seed, options, progress):
    if trials < 1:
        raise ValueError("trials must be positive")
    rates = phase23_rates(scheme, config, options)
    tallies = dict.fromkeys(CAUSES, 0)
    per_session = np.empty(trials)
    clean, u_data = [], []
    fa = pad = 0
    t0 = time.monotonic()
    for i in range(trials):
        out = run_session(scheme, config, session_rng(seed, i), options, rates)
        per_session[i] = config.Ka - out.success.sum()
        clean.append(out.clean)
        u_data.append(out.u_data)
        for key, val in out.causes.items():
            tallies[key] += val
        fa += out.false_alarms
        pad += out.padded
        if progress and (i + 1) % max(1, trials // 20) == 0:
            print(f"  {i + 1}/{trials} sessions, {time.monotonic() - t0:.0f}s", file=sys.stderr)
    return rates, tallies, per_session, np.concatenate(clean), np.concatenate(u_data), fa, pad


def _report(scheme, config, options, rates, tallies, per_session, fa, pad) -> SessionReport:
    trials = per_session.size
    errors = int(per_session.sum())
    frac = per_session / config.Ka
    # Users of one session are dependent, so the spread is taken over sessions.
    sd = float(frac.std(ddof=1)) if trials > 1 else 0.0
    return SessionReport(
        trials=trials,
        Ka=config.Ka,
        user_errors=errors,
        pupe=errors / (trials * config.Ka),
        ci95=1.96 * sd / math.sqrt(trials),
        tallies=tallies,
        false_alarms=fa,
        padded=pad,
        eps_f=rates[0],
        eps4=rates[1],
        options=asdict(options),
        scheme=scheme.to_dict(),
        config=config.to_dict(),
    )


def estimate_pupe(
    scheme: Scheme,
    config: SessionConfig,
    trials: int,
    seed: int = 0,
    options: SimOptions = SimOptions(),
    progress: bool = False,
) -> SessionReport:
    rates, tallies, per_session, _, _, fa, pad = _accumulate(
        scheme, config, trials, seed, options, progress
    )
    return _report(scheme, config, options, rates, tallies, per_session, fa, pad)


@dataclass(frozen=True)
class Calibration:
    P2: float
    pupe: float
    ci95: float
    iterations: int


def calibrate_p2(
    scheme: Scheme,
    config: SessionConfig,
    target: float,
    seed: int = 0,
    trials: int = 2000,
    options: SimOptions = SimOptions(),
    max_iter: int = 60,
) -> Calibration:
    """Tune the data-phase power so the simulated error rate meets target.

    Phase 1 and 2 are simulated once. Changing P2 only moves the data-decoding
    threshold, and the same uniform draws are reused for every P2 (common
    random numbers), so the error rate is monotone in P2.
    """
    _, _, _, clean, u_data, _, _ = _accumulate(scheme, config, trials, seed, options, False)
    n_users = clean.size
    p = scheme.params

    def measure(P2: float) -> tuple[float, float]:
        e4 = error_model.eps4(p.__class__(**{**p.to_dict(), "P2": P2}), config)
        ok = clean & (u_data >= e4)
        err = 1.0 - ok.mean()
        return err, 1.96 * math.sqrt(max(err * (1 - err), 1e-12) / n_users)

    P2 = p.P2
    err, ci = measure(P2)
    if abs(err - target) <= ci:
        return Calibration(P2, err, ci, 0)
    floor_err, _ = measure(1e6)
    if floor_err > target:
        raise ValueError("target unreachable: errors before the data phase exceed it")
    lo, hi = P2, P2
    while measure(lo)[0] < target and lo > 1e-12:
        lo /= 2
    while measure(hi)[0] > target:
        hi *= 2
    it = 0
    for it in range(1, max_iter + 1):
        mid = math.sqrt(lo * hi)
        err, ci = measure(mid)
        if abs(err - target) <= ci:
            return Calibration(mid, err, ci, it)
        if err > target:
            lo = mid
        else:
            hi = mid
    return Calibration(mid, err, ci, it)
