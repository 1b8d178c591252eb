"""Shared builders for tests."""

import dataclasses

import numpy as np

from mrasim.codes import AuxCode, InnerCode
from mrasim.op_phase import Scheme
from mrasim.params import SchemeParams, reference_design


def dyadic_scheme(n_p=15, k_p=5, n_c1=18, V=448, seed=0, icr=True):
    """Scheme with amplitude 1/2, so noiseless arithmetic is exact."""
    aux = AuxCode.from_catalog(n_p, k_p)
    P1 = 1.0 / (4 * V)
    params = SchemeParams(k_p, n_p, aux.d, n_c1, 100, V, 1000, P1, 0.01, 0.5, icr, True)
    inner = InnerCode.random(aux.m_p, n_c1, np.random.default_rng(seed))
    return Scheme(params, inner, aux, seed)


def table_scheme(Ka=50, seed=0, **changes):
    params = dataclasses.replace(reference_design(Ka), **changes)
    return Scheme.build(params, seed)
