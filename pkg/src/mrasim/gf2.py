"""Small dense GF(2) linear algebra on uint8 numpy matrices."""

from __future__ import annotations

import numpy as np


def as_bits(a) -> np.ndarray:
    arr = np.asarray(a, dtype=np.uint8)
    if np.any(arr > 1):
        raise ValueError("expected a binary array")
    return arr


def rref(mat) -> tuple[np.ndarray, list[int]]:
    """Reduced row echelon form and pivot columns."""
    m = as_bits(mat).copy()
    rows, cols = m.shape
    pivots = []
    r = 0
    for c in range(cols):
        if r == rows:
            break
        nz = np.nonzero(m[r:, c])[0]
        if nz.size == 0:
            continue
        p = r + nz[0]
        if p != r:
            m[[r, p]] = m[[p, r]]
        hit = np.nonzero(m[:, c])[0]
        hit = hit[hit != r]
        m[hit] ^= m[r]
        pivots.append(c)
        r += 1
    return m, pivots


def rank(mat) -> int:
    return len(rref(mat)[1])


def nullspace(mat) -> np.ndarray:
    """Basis (as rows) of {x : mat @ x = 0 mod 2}."""
    m = as_bits(mat)
    cols = m.shape[1]
    red, pivots = rref(m)
    free = [c for c in range(cols) if c not in pivots]
    basis = np.zeros((len(free), cols), dtype=np.uint8)
    for i, f in enumerate(free):
        basis[i, f] = 1
        for r, p in enumerate(pivots):
            basis[i, p] = red[r, f]
    return basis


def pack_rows(mat) -> np.ndarray:
    """Rows as uint64 integers, column 0 in the most significant used bit."""
    m = as_bits(mat)
    n = m.shape[1]
    if n > 64:
        raise ValueError("rows longer than 64 bits cannot be packed")
    weights = np.array([1 << (n - 1 - j) for j in range(n)], dtype=np.uint64)
    return (m.astype(np.uint64) * weights).sum(axis=1, dtype=np.uint64)


def bits_to_int(bits) -> int:
    out = 0
    for b in np.asarray(bits).ravel():
        out = (out << 1) | int(b)
    return out


def int_to_bits(value: int, width: int) -> np.ndarray:
    return np.array([(value >> (width - 1 - j)) & 1 for j in range(width)], dtype=np.uint8)


def span(generator) -> np.ndarray:
    """All 2^k codewords, packed; entry i is the codeword of message int i."""
    rows = pack_rows(generator)
    words = np.zeros(1, dtype=np.uint64)
    # Message bit 0 is the most significant, so the first row is added last.
    for g in rows[::-1]:
        words = np.concatenate([words, words ^ g])
    return words


def min_distance(generator) -> int:
    """Exact minimum distance by enumeration of all codewords."""
    g = as_bits(generator)
    if g.shape[0] > 24:
        raise ValueError("exhaustive minimum distance limited to k <= 24")
    weights = np.bitwise_count(span(g)[1:])
    return int(weights.min()) if weights.size else g.shape[1] + 1
