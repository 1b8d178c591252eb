"""Scheme and session parameters, plus the reference designs."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass


@dataclass(frozen=True)
class SessionConfig:
    Ka: int  # active users
    k: int = 100  # payload bits
    N: int = 30000  # channel uses per session
    eps_target: float = 0.05

    def __post_init__(self):
        if self.Ka < 1 or self.N < 1 or self.k < 1:
            raise ValueError(f"invalid session config {self}")
        if not 0 < self.eps_target < 1:
            raise ValueError("eps_target must lie in (0, 1)")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass(frozen=True)
class SchemeParams:
    """Tunable parameters of the three-phase scheme.

    Blocklengths and V may be real during relaxed optimization; simulation
    requires integers. Powers are linear SNRs with unit noise variance.
    """

    k_p: int
    n_p: int
    d: int
    n_c1: float
    n_c2: float
    V: float
    N_f: float
    P1: float
    P2: float
    P_f: float
    icr: bool = True
    omt: bool = True

    @property
    def T(self) -> int:
        return (self.d - 1) // 2

    @property
    def m_p(self) -> int:
        return self.n_p - self.k_p

    @property
    def N1(self) -> float:
        return self.V * self.n_c1

    def channel_uses(self, Ka: int) -> float:
        return self.V * self.n_c1 + self.N_f + Ka * self.n_c2

    @property
    def k1(self) -> int:
        """Payload bits carried by the identity choice when OMT is on."""
        return int(math.floor(math.log2(self.V * self.n_p)))

    def with_power(self, P: float, Ka: int) -> SchemeParams:
        """Equal-power operating point P1 = P2 = P_f / Ka = P."""
        return dataclasses.replace(self, P1=P, P2=P, P_f=P * Ka)

    def validate(self, config: SessionConfig) -> None:
        ints = (self.k_p, self.n_p, self.d, self.n_c1, self.n_c2, self.V, self.N_f)
        if any(float(x) != int(x) for x in ints):
            raise ValueError("integer parameters expected")
        if not 1 <= self.k_p < self.n_p:
            raise ValueError("need 1 <= k_p < n_p")
        if self.n_c1 < 1 or self.n_c2 < 1 or self.V < 1 or self.N_f < 0:
            raise ValueError("blocklengths must be positive")
        if min(self.P1, self.P2, self.P_f) <= 0:
            raise ValueError("powers must be positive")
        if self.channel_uses(config.Ka) != config.N:
            raise ValueError(
                f"V*n_c1 + N_f + Ka*n_c2 = {self.channel_uses(config.Ka)} != N = {config.N}"
            )
        if self.V * self.n_p < config.Ka:
            raise ValueError("fewer identities than active users")
        if self.omt and self.k1 > config.k:
            raise ValueError("OMT prefix longer than the payload")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> SchemeParams:
        fields = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - fields
        if unknown:
            raise ValueError(f"unknown scheme parameters: {sorted(unknown)}")
        return cls(**data)


# Optimized designs for k = 100, N = 30000, eps = 0.05 with ICR and OMT:
# Ka -> (k_p, n_p, d, n_c1, n_c2, V, N_f, P)
REFERENCE_TABLE = {
    50: (5, 15, 7, 18, 402, 448, 1836, 0.009936),
    100: (5, 15, 7, 17, 210, 420, 1860, 0.01137),
    150: (5, 15, 7, 14, 142, 488, 1868, 0.01320),
    200: (5, 15, 7, 13, 109, 518, 1466, 0.01532),
    250: (5, 15, 7, 12, 88, 548, 1424, 0.01837),
    300: (13, 31, 9, 21, 70, 362, 1398, 0.02434),
}


def reference_design(Ka: int, icr: bool = True, omt: bool = True) -> SchemeParams:
    k_p, n_p, d, n_c1, n_c2, V, N_f, P = REFERENCE_TABLE[Ka]
    return SchemeParams(k_p, n_p, d, n_c1, n_c2, V, N_f, P, P, P * Ka, icr, omt)
