"""Inner code C and auxiliary index code C_aux.

Users encode a column of the auxiliary parity-check matrix with the inner
code; the receiver ML-decodes the modulo-2 sum of codewords and treats the
result as a syndrome of C_aux, which a bounded-distance table decoder maps
back to the set of transmitted columns.

Column indices in this module are 0-based code coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import comb
from itertools import combinations

import numpy as np

from . import catalog, gf2
from .catalog import NotInCatalog, best_min_distance  # noqa: F401  (re-export)
from .fbl import _n_wrap_terms

# Score matrix entries held in memory at once by the batched ML decoder.
_ML_CHUNK = 1 << 22


class DetectedFailure(Exception):
    """The bounded-distance decoder found no support of weight <= T."""


@dataclass(frozen=True, eq=False)
class InnerCode:
    generator: np.ndarray

    def __post_init__(self):
        G = gf2.as_bits(self.generator)
        if G.ndim != 2 or G.shape[0] > G.shape[1]:
            raise ValueError("generator must be m_p x n_c1 with m_p <= n_c1")
        if gf2.rank(G) != G.shape[0]:
            raise ValueError("generator is not full rank")
        object.__setattr__(self, "generator", G)

    @property
    def m_p(self) -> int:
        return self.generator.shape[0]

    @property
    def n_c1(self) -> int:
        return self.generator.shape[1]

    @property
    def is_identity(self) -> bool:
        flag = self.__dict__.get("_identity")
        if flag is None:
            G = self.generator
            flag = G.shape[0] == G.shape[1] and bool(np.array_equal(G, np.eye(G.shape[0], dtype=np.uint8)))
            object.__setattr__(self, "_identity", flag)
        return flag

    @classmethod
    def identity(cls, m_p: int) -> InnerCode:
        return cls(np.eye(m_p, dtype=np.uint8))

    @classmethod
    def random(cls, m_p: int, n_c1: int, rng: np.random.Generator) -> InnerCode:
        """Uniformly random full-rank generator (rejection sampling)."""
        if m_p > n_c1:
            raise ValueError("m_p must not exceed n_c1")
        while True:
            G = rng.integers(0, 2, size=(m_p, n_c1), dtype=np.uint8)
            if gf2.rank(G) == m_p:
                return cls(G)

    def codebook(self) -> np.ndarray:
        """All 2^m_p codewords (rows), indexed by message integer."""
        cached = self.__dict__.get("_codebook")
        if cached is None:
            words = gf2.span(self.generator)
            n = self.n_c1
            shifts = np.arange(n - 1, -1, -1, dtype=np.uint64)
            cached = ((words[:, None] >> shifts) & np.uint64(1)).astype(np.float64)
            object.__setattr__(self, "_codebook", cached)
        return cached


def encode_inner(code: InnerCode, msg) -> np.ndarray:
    msg = gf2.as_bits(msg)
    if msg.shape != (code.m_p,):
        raise ValueError(f"message must have {code.m_p} bits, got shape {msg.shape}")
    return (msg.astype(np.int64) @ code.generator % 2).astype(np.uint8)


def bit_llr(y, sigma2: float) -> np.ndarray:
    """log p(y | bit 1) - log p(y | bit 0) for the wrapped-Gaussian mod-2 channel."""
    y = np.asarray(y, dtype=float)
    terms = np.arange(-_n_wrap_terms(sigma2), _n_wrap_terms(sigma2) + 1) * 2.0
    d0 = y[..., None] + terms
    d1 = np.mod(y - 1.0, 2.0)[..., None] + terms
    scale = -1.0 / (2.0 * sigma2)
    a0 = d0 * d0 * scale
    a1 = d1 * d1 * scale
    m = np.maximum(a0.max(axis=-1), a1.max(axis=-1))[..., None]
    return np.log(np.exp(a1 - m).sum(axis=-1)) - np.log(np.exp(a0 - m).sum(axis=-1))


def ml_decode_batch(code: InnerCode, llr: np.ndarray) -> np.ndarray:
    """Most likely message integer for each row of bit LLRs (ties -> smallest)."""
    llr = np.atleast_2d(llr)
    if code.is_identity:
        # Uncoded bits are independent, so ML is the per-bit hard decision.
        weights = np.left_shift(1, np.arange(code.n_c1 - 1, -1, -1, dtype=np.int64))
        return (llr > 0).astype(np.int64) @ weights
    book = code.codebook()
    out = np.empty(llr.shape[0], dtype=np.int64)
    step = max(1, _ML_CHUNK // book.shape[0])
    for start in range(0, llr.shape[0], step):
        scores = llr[start : start + step] @ book.T
        out[start : start + step] = np.argmax(scores, axis=1)
    return out


def ml_decode_mod2(code: InnerCode, y, sigma2: float) -> np.ndarray:
    """Exhaustive ML decoding of y in [0, 2)^n_c1; returns the message bits."""
    y = np.asarray(y, dtype=float)
    if y.shape != (code.n_c1,):
        raise ValueError("observation length does not match the code")
    if np.any((y < 0) | (y >= 2)):
        raise ValueError("observation must lie in [0, 2)")
    msg = int(ml_decode_batch(code, bit_llr(y, sigma2)[None, :])[0])
    return gf2.int_to_bits(msg, code.m_p)


@dataclass(frozen=True, eq=False)
class SyndromeTable:
    """Syndrome (as integer) -> unique error support of weight <= T."""

    slots: np.ndarray  # int32, 2^m_p entries, -1 where absent
    supports: tuple
    T: int

    def __len__(self) -> int:
        return len(self.supports)


@dataclass(frozen=True, eq=False)
class AuxCode:
    parity_check: np.ndarray
    d: int
    table: SyndromeTable = field(init=False, repr=False)

    def __post_init__(self):
        H = gf2.as_bits(self.parity_check)
        object.__setattr__(self, "parity_check", H)
        cols = gf2.pack_rows(H.T)
        if np.any(cols == 0) or np.unique(cols).size != cols.size:
            raise ValueError("parity-check columns must be distinct and nonzero")
        if gf2.rank(H) != H.shape[0]:
            raise ValueError("parity-check matrix must have full row rank")
        object.__setattr__(self, "table", build_syndrome_table(self))

    @property
    def n_p(self) -> int:
        return self.parity_check.shape[1]

    @property
    def m_p(self) -> int:
        return self.parity_check.shape[0]

    @property
    def k_p(self) -> int:
        return self.n_p - self.m_p

    @property
    def T(self) -> int:
        return (self.d - 1) // 2

    def column_ints(self) -> np.ndarray:
        return gf2.pack_rows(self.parity_check.T).astype(np.int64)

    @classmethod
    def from_catalog(cls, n_p: int, k_p: int) -> AuxCode:
        return cls(catalog.parity_check_matrix(n_p, k_p), catalog.best_min_distance(n_p, k_p))


def build_syndrome_table(aux: AuxCode) -> SyndromeTable:
    cols = [int(c) for c in aux.column_ints()]
    slots = np.full(1 << aux.m_p, -1, dtype=np.int32)
    supports = []
    for w in range(aux.T + 1):
        for support in combinations(range(aux.n_p), w):
            s = 0
            for j in support:
                s ^= cols[j]
            if slots[s] != -1:
                raise ValueError(f"syndrome collision: d={aux.d} is not achieved by this matrix")
            slots[s] = len(supports)
            supports.append(support)
    expected = sum(comb(aux.n_p, w) for w in range(aux.T + 1))
    assert len(supports) == expected
    return SyndromeTable(slots, tuple(supports), aux.T)


def syndrome_of(aux: AuxCode, indicator) -> np.ndarray:
    ind = gf2.as_bits(indicator)
    if ind.shape != (aux.n_p,):
        raise ValueError(f"indicator must have {aux.n_p} bits")
    return (aux.parity_check.astype(np.int64) @ ind % 2).astype(np.uint8)


def bounded_distance_decode(table: SyndromeTable, syndrome) -> frozenset:
    """Unique support of weight <= T with the given syndrome (bits or int)."""
    s = syndrome if isinstance(syndrome, (int, np.integer)) else gf2.bits_to_int(syndrome)
    slot = int(table.slots[int(s)])
    if slot < 0:
        raise DetectedFailure(f"syndrome {int(s):#x} has no support of weight <= {table.T}")
    return frozenset(table.supports[slot])
