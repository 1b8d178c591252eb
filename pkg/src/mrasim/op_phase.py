"""Scheduling-request phase, from identity choice to the occupancy estimate.

Sub-blocks are decoded with index collision resolution.

Identities are 1-based pairs (v, u), flattened as s = v + V(u - 1).

Two decoders are provided. :func:`decode_subblock` works on a single
observation and follows the textbook recursion step by step; it is the
reference. :func:`decode_session` decodes all V sub-blocks of a session in
vectorized batches and is what the simulator uses. Tests check that they
agree.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import gf2
from .codes import (
    AuxCode,
    DetectedFailure,
    InnerCode,
    bit_llr,
    bounded_distance_decode,
    encode_inner,
    ml_decode_batch,
)
from .params import SchemeParams

ERROR_POLICIES = ("empty", "exclude")


class DetectedError(DetectedFailure):
    """A decoding step noticed that its hypothesis is inconsistent."""


# ---------------------------------------------------------------- identities


@dataclass(frozen=True)
class Identity:
    v: int
    u: int
    V: int

    def __post_init__(self):
        if not (1 <= self.v <= self.V and self.u >= 1):
            raise ValueError(f"invalid identity {self}")

    @property
    def s(self) -> int:
        return self.v + self.V * (self.u - 1)

    @classmethod
    def from_s(cls, s: int, V: int) -> Identity:
        if s < 1:
            raise ValueError("s must be >= 1")
        return cls((s - 1) % V + 1, (s - 1) // V + 1, V)


def select_identity_uniform(V: int, n_p: int, rng: np.random.Generator) -> Identity:
    return Identity(int(rng.integers(V)) + 1, int(rng.integers(n_p)) + 1, V)


def omt_k1(V: int, n_p: int) -> int:
    return (V * n_p).bit_length() - 1


def select_identity_omt(prefix, V: int, n_p: int, rng: np.random.Generator) -> Identity:
    """Map k1 payload bits (MSB first) to an identity."""
    k1 = omt_k1(V, n_p)
    prefix = gf2.as_bits(prefix)
    if prefix.shape != (k1,):
        raise ValueError(f"prefix must have k1 = {k1} bits")
    s1 = gf2.bits_to_int(prefix) + 1
    s = s1
    if s1 <= V * n_p - 2**k1 and rng.integers(2):
        s = s1 + 2**k1
    return Identity.from_s(s, V)


def omt_prefix(identity: Identity, n_p: int) -> np.ndarray:
    """Inverse of :func:`select_identity_omt`."""
    k1 = omt_k1(identity.V, n_p)
    s = identity.s
    s1 = s - 2**k1 if s > 2**k1 else s
    return gf2.int_to_bits(s1 - 1, k1)


def draw_identities(Ka: int, V: int, n_p: int, omt: bool, rng: np.random.Generator):
    """Vectorized identity draws: returns 0-based (v, u) arrays and OMT prefixes."""
    if omt:
        k1 = omt_k1(V, n_p)
        s1 = rng.integers(2**k1, size=Ka)  # 0-based prefix value
        dup = (s1 < V * n_p - 2**k1) & (rng.integers(2, size=Ka) == 1)
        s0 = s1 + np.where(dup, 2**k1, 0)
        return s0 % V, s0 // V, s1
    v = rng.integers(V, size=Ka)
    u = rng.integers(n_p, size=Ka)
    return v, u, None


# ------------------------------------------------------------------- scheme


@dataclass(frozen=True, eq=False)
class Scheme:
    """Scheme parameters bound to concrete inner and auxiliary codes."""

    params: SchemeParams
    inner: InnerCode
    aux: AuxCode
    seed: int | None = None
    signals: np.ndarray = field(init=False, repr=False)
    support_ind: np.ndarray = field(init=False, repr=False)
    support_size: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        p = self.params
        if self.inner.m_p != self.aux.m_p or self.aux.n_p != p.n_p:
            raise ValueError("codes do not match the scheme parameters")
        if self.inner.n_c1 != p.n_c1:
            raise ValueError("inner code length differs from n_c1")
        if self.aux.d < p.d:
            raise ValueError(f"auxiliary code has d={self.aux.d} < {p.d}")
        A = self.amplitude
        words = np.array(
            [encode_inner(self.inner, self.aux.parity_check[:, j]) for j in range(p.n_p)]
        )
        object.__setattr__(self, "signals", A * (2.0 * words - 1.0))
        table = self.aux.table
        ind = np.zeros((len(table.supports), p.n_p), dtype=np.uint8)
        for i, sup in enumerate(table.supports):
            ind[i, list(sup)] = 1
        object.__setattr__(self, "support_ind", ind)
        object.__setattr__(self, "support_size", ind.sum(axis=1).astype(np.int64))

    @property
    def amplitude(self) -> float:
        return math.sqrt(self.params.P1 * self.params.V)

    @property
    def T(self) -> int:
        return self.aux.T

    @classmethod
    def build(cls, params: SchemeParams, seed: int = 0) -> Scheme:
        """Catalog auxiliary code plus a seeded random full-rank inner code."""
        aux = AuxCode.from_catalog(params.n_p, params.k_p)
        rng = np.random.default_rng(np.random.SeedSequence([seed, 0x1C0DE]))
        inner = InnerCode.random(aux.m_p, int(params.n_c1), rng)
        return cls(params, inner, aux, seed)

    def to_dict(self) -> dict:
        def hexrows(M):
            return [format(gf2.bits_to_int(r), "x") for r in M]

        return {
            "params": self.params.to_dict(),
            "inner_generator": hexrows(self.inner.generator),
            "aux_parity_check": hexrows(self.aux.parity_check),
            "aux_d": self.aux.d,
            "seed": self.seed,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, data: dict) -> Scheme:
        params = SchemeParams.from_dict(data["params"])

        def unhex(rows, n):
            return np.array([gf2.int_to_bits(int(r, 16), n) for r in rows], dtype=np.uint8)

        inner = InnerCode(unhex(data["inner_generator"], int(params.n_c1)))
        aux = AuxCode(unhex(data["aux_parity_check"], params.n_p), int(data["aux_d"]))
        return cls(params, inner, aux, data.get("seed"))

    @classmethod
    def from_json(cls, text: str) -> Scheme:
        return cls.from_dict(json.loads(text))


def modulate(u: int, scheme: Scheme) -> np.ndarray:
    """Antipodal signal of index u (1-based); every entry is +-sqrt(P1 V)."""
    if not 1 <= u <= scheme.params.n_p:
        raise ValueError(f"index {u} out of range")
    return scheme.signals[u - 1].copy()


@dataclass(frozen=True)
class SubBlockObservation:
    y: np.ndarray
    users: tuple = ()  # transmitted indices (simulation truth)
    z: np.ndarray | None = None


def subblock_channel(
    signals, n_c1: int, rng: np.random.Generator, noise_var: float = 1.0, users=()
) -> SubBlockObservation:
    z = rng.standard_normal(n_c1) * math.sqrt(noise_var)
    y = z.copy()
    for x in signals:
        x = np.asarray(x, dtype=float)
        if x.shape != (n_c1,):
            raise ValueError("signal length differs from n_c1")
        y += x
    return SubBlockObservation(y, tuple(users), z)


# ------------------------------------------------------ reference decoding


def _dithered(y: np.ndarray, t_hat, A: float) -> np.ndarray:
    out = np.mod(y / (2.0 * A) + np.asarray(t_hat, dtype=float) / 2.0, 2.0)
    out[out >= 2.0] = 0.0  # mod can round up to the modulus
    return out


def _level_variance(A: float, level: int) -> float:
    return 1.0 / (4.0 * A * A * 4.0 ** (level - 1))


def _indicator(indices, n_p: int) -> np.ndarray:
    ind = np.zeros(n_p)
    ind[[u - 1 for u in indices]] = 1.0
    return ind


def op_decode_single(y, t_hat: int, scheme: Scheme, level: int = 1) -> frozenset:
    """Decode one dithered observation to a set of 1-based indices."""
    if t_hat < 0:
        raise ValueError("t_hat must be nonnegative")
    y = np.asarray(y, dtype=float)
    A = scheme.amplitude
    llr = bit_llr(_dithered(y, t_hat, A), _level_variance(A, level))
    msg = int(ml_decode_batch(scheme.inner, llr[None, :])[0])
    try:
        support = bounded_distance_decode(scheme.aux.table, msg)
    except DetectedFailure as exc:
        raise DetectedError(str(exc)) from None
    return frozenset(j + 1 for j in support)


def icr_decode(y, t_hat: int, scheme: Scheme) -> list[frozenset]:
    """Index collision resolution; returns the lists L^(1), ..., L^(tau).

    t_hat may exceed T: each individual list still has to be decodable.
    """
    y_l = np.asarray(y, dtype=float)
    t = int(t_hat)
    lists = []
    level = 1
    while True:
        L = op_decode_single(y_l, t, scheme, level)
        lists.append(L)
        if len(L) == t:
            return lists
        if len(L) > t or (t - len(L)) % 2:
            raise DetectedError(f"list of size {len(L)} inconsistent with t_hat={t}")
        y_l = (y_l - _indicator(L, scheme.params.n_p) @ scheme.signals) / 2.0
        t = (t - len(L)) // 2
        level += 1


def finalize_lists(lists, y, scheme: Scheme) -> tuple[frozenset, np.ndarray]:
    """Singly-transmitted indices and the noise estimate for a set of lists."""
    later = frozenset().union(*lists[1:]) if len(lists) > 1 else frozenset()
    singles = frozenset(lists[0]) - later if lists else frozenset()
    n_p = scheme.params.n_p
    recon = sum(
        (2.0 ** (ell) * (_indicator(L, n_p) @ scheme.signals) for ell, L in enumerate(lists)),
        np.zeros(scheme.signals.shape[1]),
    )
    return singles, np.asarray(y, dtype=float) - recon


@dataclass(frozen=True)
class SubblockDecision:
    singles: frozenset
    collided: frozenset
    t_star: int  # -1 when no candidate survived
    residual_norm: float
    errored: tuple = ()


def decode_subblock(
    y, scheme: Scheme, icr: bool | None = None, error_policy: str = "empty"
) -> SubblockDecision:
    """Try every user count 0..T and keep the smallest residual.

    ``error_policy`` says what a candidate whose decoding failed contributes:
    ``"empty"`` keeps it as the empty list (residual y), ``"exclude"`` drops
    it from the comparison.
    """
    if error_policy not in ERROR_POLICIES:
        raise ValueError(f"error_policy must be one of {ERROR_POLICIES}")
    icr = scheme.params.icr if icr is None else icr
    y = np.asarray(y, dtype=float)
    best = None
    errored = []
    for t_hat in range(scheme.T + 1):
        try:
            if icr:
                lists = icr_decode(y, t_hat, scheme)
            else:
                lists = [op_decode_single(y, t_hat, scheme)]
            singles, resid = finalize_lists(lists, y, scheme)
            collided = frozenset().union(*lists[1:]) if len(lists) > 1 else frozenset()
        except DetectedError:
            errored.append(t_hat)
            if error_policy == "exclude":
                continue
            singles, collided, resid = frozenset(), frozenset(), y
        norm = float(resid @ resid)
        if best is None or norm < best[0]:
            best = (norm, t_hat, singles, collided)
    if best is None:
        return SubblockDecision(frozenset(), frozenset(), -1, math.inf, tuple(errored))
    norm, t_star, singles, collided = best
    return SubblockDecision(singles, collided, t_star, norm, tuple(errored))


# -------------------------------------------------------- batched decoding


@dataclass(frozen=True)
class SessionDecode:
    singles: np.ndarray  # V x n_p bool
    collided: np.ndarray  # V x n_p bool
    t_star: np.ndarray  # V, -1 when nothing survived
    candidates: np.ndarray | None = None  # (T+1) x V x n_p singles per hypothesis

    @classmethod
    def from_decisions(cls, decisions, n_p: int) -> SessionDecode:
        V = len(decisions)
        singles = np.zeros((V, n_p), dtype=bool)
        collided = np.zeros((V, n_p), dtype=bool)
        for v, dec in enumerate(decisions):
            singles[v, [u - 1 for u in dec.singles]] = True
            collided[v, [u - 1 for u in dec.collided]] = True
        return cls(singles, collided, np.array([d.t_star for d in decisions]))


def _decode_rows(scheme: Scheme, Y: np.ndarray, t: np.ndarray, level: int) -> np.ndarray:
    A = scheme.amplitude
    llr = bit_llr(_dithered(Y, t[:, None], A), _level_variance(A, level))
    msgs = ml_decode_batch(scheme.inner, llr)
    return scheme.aux.table.slots[msgs]


def decode_session(
    Y: np.ndarray, scheme: Scheme, icr: bool | None = None, error_policy: str = "empty"
) -> SessionDecode:
    """Vectorized :func:`decode_subblock` over the rows of Y (V x n_c1)."""
    if error_policy not in ERROR_POLICIES:
        raise ValueError(f"error_policy must be one of {ERROR_POLICIES}")
    icr = scheme.params.icr if icr is None else icr
    Y = np.asarray(Y, dtype=float)
    V = Y.shape[0]
    n_p = scheme.params.n_p
    T = scheme.T
    y_norm = np.einsum("ij,ij->i", Y, Y)
    norms = np.empty((T + 1, V))
    singles_all = np.zeros((T + 1, V, n_p), dtype=bool)
    collided_all = np.zeros((T + 1, V, n_p), dtype=bool)
    signals = scheme.signals

    for t_hat in range(T + 1):
        recon = np.zeros_like(Y)
        first = np.zeros((V, n_p), dtype=bool)
        later = np.zeros((V, n_p), dtype=bool)
        err = np.zeros(V, dtype=bool)
        rows = np.arange(V)
        Ycur = Y
        tcur = np.full(V, t_hat, dtype=np.int64)
        level = 1
        while rows.size:
            slots = _decode_rows(scheme, Ycur, tcur, level)
            bad = slots < 0
            err[rows[bad]] = True
            keep = ~bad
            rows, Ycur, tcur, slots = rows[keep], Ycur[keep], tcur[keep], slots[keep]
            ind = scheme.support_ind[slots]
            size = scheme.support_size[slots]
            sig = ind.astype(float) @ signals
            recon[rows] += 2.0 ** (level - 1) * sig
            if level == 1:
                first[rows] = ind.astype(bool)
            else:
                later[rows] |= ind.astype(bool)
            if not icr:
                break
            over = size > tcur
            odd = (tcur - size) % 2 == 1
            err[rows[over | (odd & ~over)]] = True
            go = (size < tcur) & ~odd
            rows = rows[go]
            Ycur = (Ycur[go] - sig[go]) / 2.0
            tcur = (tcur[go] - size[go]) // 2
            level += 1
        resid = Y - recon
        norm = np.einsum("ij,ij->i", resid, resid)
        singles = first & ~later
        if error_policy == "exclude":
            norm[err] = np.inf
        else:
            norm[err] = y_norm[err]
        singles[err] = False
        later[err] = False
        norms[t_hat] = norm
        singles_all[t_hat] = singles
        collided_all[t_hat] = later

    t_star = np.argmin(norms, axis=0)
    dead = np.isinf(norms[t_star, np.arange(V)])
    idx = np.arange(V)
    singles = singles_all[t_star, idx]
    collided = collided_all[t_star, idx]
    singles[dead] = False
    collided[dead] = False
    return SessionDecode(singles, collided, np.where(dead, -1, t_star), singles_all)


# ------------------------------------------------------ occupancy estimate


@dataclass(frozen=True)
class OccupancyEstimate:
    S_hat: np.ndarray  # V x n_p uint8 with exactly Ka ones
    collided: np.ndarray  # V x n_p bool
    padded: tuple  # (v, u) 1-based
    erased: tuple
    assignment: tuple  # (v, u) 1-based, increasing s

    def slot_of(self, v: int, u: int) -> int | None:
        """1-based slot of (v, u) or None when not listed."""
        if not self.S_hat[v - 1, u - 1]:
            return None
        return self.assignment.index((v, u)) + 1


def _flat_to_pairs(flat_idx, V: int) -> tuple:
    return tuple((int(i) % V + 1, int(i) // V + 1) for i in flat_idx)


def build_occupancy_estimate(
    decoded: SessionDecode, Ka: int, rng: np.random.Generator
) -> OccupancyEstimate:
    """Pad or erase the decoder output to exactly Ka ones."""
    V, n_p = decoded.singles.shape
    if V * n_p < Ka:
        raise ValueError("fewer identities than users")
    flat = decoded.singles.ravel(order="F").copy()
    coll = decoded.collided.ravel(order="F")
    ones = int(flat.sum())
    padded = erased = np.array([], dtype=np.int64)
    if ones < Ka:
        need = Ka - ones
        pool = np.flatnonzero(~flat & ~coll)
        if pool.size >= need:
            padded = np.sort(rng.choice(pool, size=need, replace=False))
        else:
            # Only reachable when almost every identity is flagged as collided.
            rest = np.flatnonzero(~flat & coll)
            extra = rng.choice(rest, size=need - pool.size, replace=False)
            padded = np.sort(np.concatenate([pool, extra]))
        flat[padded] = True
    elif ones > Ka:
        erased = np.sort(rng.choice(np.flatnonzero(flat), size=ones - Ka, replace=False))
        flat[erased] = False
    S_hat = flat.reshape((V, n_p), order="F").astype(np.uint8)
    return OccupancyEstimate(
        S_hat,
        decoded.collided.copy(),
        _flat_to_pairs(padded, V),
        _flat_to_pairs(erased, V),
        _flat_to_pairs(np.flatnonzero(flat), V),
    )
