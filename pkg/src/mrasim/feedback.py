"""Resource-distribution phase: enumerative coding of the occupancy estimate.

A binary sequence of length n = V * n_p and weight Ka (the flattened
estimate, position s = v + V(u - 1) first) is sent as its lexicographic rank
among all such sequences. The first position is the most significant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class NotListed(LookupError):
    """The user's identity is not marked in the broadcast estimate."""


@dataclass(frozen=True)
class ConstantWeightMessage:
    bits: tuple  # 0/1 per position

    def __post_init__(self):
        object.__setattr__(self, "bits", tuple(int(b) for b in self.bits))
        if any(b not in (0, 1) for b in self.bits):
            raise ValueError("bits must be 0/1")

    @property
    def n(self) -> int:
        return len(self.bits)

    @property
    def w(self) -> int:
        return sum(self.bits)


def rank(msg: ConstantWeightMessage, w: int | None = None) -> int:
    """Lexicographic rank in [0, C(n, w))."""
    n = msg.n
    if w is not None and msg.w != w:
        raise ValueError(f"weight {msg.w} != {w}")
    r = msg.w
    out = 0
    for i, b in enumerate(msg.bits):
        if b:
            # Sequences with this prefix and a 0 here come first.
            out += math.comb(n - 1 - i, r)
            r -= 1
            if r == 0:
                break
    return out


def unrank(n: int, w: int, r: int) -> ConstantWeightMessage:
    """Inverse of :func:`rank`."""
    total = math.comb(n, w)
    if not 0 <= r < total:
        raise ValueError(f"rank {r} outside [0, C({n},{w}))")
    bits = [0] * n
    left = w
    # c tracks C(n - 1 - i, left) as i advances.
    c = total * (n - w) // n if n else 0
    for i in range(n):
        if left == 0:
            break
        m = n - 1 - i  # remaining positions after i
        if r >= c:
            bits[i] = 1
            r -= c
            # C(m, left) -> C(m - 1, left - 1) = C(m, left) * left / (m - left + 1) ... via exact ratio
            c = c * left // (m - left + 1) if m - left + 1 > 0 else 0
            left -= 1
            c = c * (m - left) // m if m > 0 else 0
        else:
            c = c * (m - left) // m if m > 0 else 0
    return ConstantWeightMessage(bits)


def feedback_bits(V: int, n_p: int, Ka: int) -> int:
    """ceil(log2 C(V n_p, Ka)), exact."""
    n = V * n_p
    if not 0 <= Ka <= n:
        raise ValueError("need 0 <= Ka <= V * n_p")
    count = math.comb(n, Ka)
    return (count - 1).bit_length()


def feedback_bits_relaxed(V: float, n_p: float, Ka: int) -> float:
    """log2 C(V n_p, Ka) through log-gamma, for real V (no ceiling)."""
    n = V * n_p
    return (math.lgamma(n + 1) - math.lgamma(Ka + 1) - math.lgamma(n - Ka + 1)) / math.log(2)


def encode_payload(S_hat: np.ndarray) -> bytes:
    """Big-endian k_f-bit payload (zero-padded to whole bytes)."""
    V, n_p = S_hat.shape
    flat = np.asarray(S_hat, dtype=np.uint8).ravel(order="F")
    w = int(flat.sum())
    k_f = feedback_bits(V, n_p, w)
    return rank(ConstantWeightMessage(flat)).to_bytes((k_f + 7) // 8, "big")


def decode_payload(payload: bytes, V: int, n_p: int, Ka: int) -> np.ndarray:
    msg = unrank(V * n_p, Ka, int.from_bytes(payload, "big"))
    return np.array(msg.bits, dtype=np.uint8).reshape((V, n_p), order="F")


def user_find_slot(S_hat: np.ndarray, v: int, u: int) -> int:
    """1-based data slot of identity (v, u) in increasing order of s = v + V(u - 1)."""
    V = S_hat.shape[0]
    flat = np.asarray(S_hat).ravel(order="F")
    pos = (v - 1) + V * (u - 1)
    if not flat[pos]:
        raise NotListed(f"identity ({v}, {u}) has no slot")
    return int(flat[:pos].sum()) + 1
