"""Catalog of binary linear codes used as auxiliary (index) codes.

Each catalog row is ``n k d recipe``. A recipe is a base code followed by
``/``-separated operations, replayed by :func:`construct`:

    cyc<n>:<hex>   cyclic code of length n, generator polynomial bits (bit i = x^i)
    spc<n>         single parity-check code [n, n-1, 2]
    s              shorten on the last coordinate
    p              puncture the last coordinate
    e              append an overall parity bit
    z              append an all-zero coordinate
    d              drop the last generator row (subcode)
    x:<hex>,...    explicit generator matrix, one packed row per entry

Every distance in the shipped catalog was obtained by exhaustive enumeration
of the constructed code (see ``tools/build_catalog.py``).
"""

from __future__ import annotations

import functools
from dataclasses import dataclass
from importlib import resources

import numpy as np

from . import gf2

MAX_N = 63
MAX_K = 16


class NotInCatalog(LookupError):
    """No catalog entry (or no construction) for the requested parameters."""


@dataclass(frozen=True)
class CatalogEntry:
    n: int
    k: int
    d: int
    recipe: str | None


def cyclic_generator(n: int, poly: int) -> np.ndarray:
    deg = poly.bit_length() - 1
    k = n - deg
    coeffs = np.array([(poly >> i) & 1 for i in range(deg + 1)], dtype=np.uint8)
    G = np.zeros((k, n), dtype=np.uint8)
    for i in range(k):
        G[i, i : i + deg + 1] = coeffs
    return G


def shorten(G: np.ndarray) -> np.ndarray:
    G = G.copy()
    hot = np.nonzero(G[:, -1])[0]
    if hot.size:
        pivot = hot[-1]
        for r in hot[:-1]:
            G[r] ^= G[pivot]
        G = np.delete(G, pivot, axis=0)
    else:
        G = G[:-1]
    return G[:, :-1]


def puncture(G: np.ndarray) -> np.ndarray:
    out = G[:, :-1]
    if gf2.rank(out) < out.shape[0]:
        raise ValueError("puncturing reduced the dimension")
    return out


def extend(G: np.ndarray) -> np.ndarray:
    return np.hstack([G, (G.sum(axis=1) % 2).astype(np.uint8)[:, None]])


def _base(token: str) -> np.ndarray:
    if token.startswith("cyc"):
        n, poly = token[3:].split(":")
        return cyclic_generator(int(n), int(poly, 16))
    if token.startswith("spc"):
        n = int(token[3:])
        return np.hstack([np.eye(n - 1, dtype=np.uint8), np.ones((n - 1, 1), np.uint8)])
    if token.startswith("x"):
        n_str, rows = token[1:].split(":")
        n = int(n_str)
        return np.array([gf2.int_to_bits(int(r, 16), n) for r in rows.split(",")], dtype=np.uint8)
    raise ValueError(f"unknown base code {token!r}")


_OPS = {
    "s": shorten,
    "p": puncture,
    "e": extend,
    "z": lambda G: np.hstack([G, np.zeros((G.shape[0], 1), np.uint8)]),
    "d": lambda G: G[:-1],
}


def construct(recipe: str) -> np.ndarray:
    """Generator matrix for a recipe string."""
    base, *ops = recipe.split("/")
    G = _base(base)
    for op in ops:
        G = _OPS[op](G)
    return G


def explicit_recipe(G: np.ndarray) -> str:
    rows = ",".join(format(gf2.bits_to_int(r), "x") for r in G)
    return f"x{G.shape[1]}:{rows}"


@functools.lru_cache(maxsize=1)
def load_catalog() -> dict[tuple[int, int], CatalogEntry]:
    text = resources.files("mrasim.data").joinpath("catalog.txt").read_text()
    table = {}
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        n, k, d = map(int, parts[:3])
        table[(n, k)] = CatalogEntry(n, k, d, parts[3] if len(parts) > 3 else None)
    return table


def lookup(n_p: int, k_p: int) -> CatalogEntry:
    if not 1 <= k_p < n_p:
        raise ValueError(f"need 1 <= k_p < n_p, got ({n_p}, {k_p})")
    if k_p == n_p - 1:
        return CatalogEntry(n_p, k_p, 2, f"spc{n_p}")
    entry = load_catalog().get((n_p, k_p))
    if entry is None:
        raise NotInCatalog(f"no catalog entry for (n={n_p}, k={k_p})")
    return entry


def best_min_distance(n_p: int, k_p: int) -> int:
    """Largest catalogued minimum distance of an [n_p, k_p] binary code."""
    return lookup(n_p, k_p).d


def parity_check_matrix(n_p: int, k_p: int) -> np.ndarray:
    """An (n_p - k_p) x n_p parity-check matrix achieving the catalogued distance."""
    entry = lookup(n_p, k_p)
    if entry.recipe is None:
        raise NotInCatalog(f"(n={n_p}, k={k_p}) has a distance but no construction")
    G = construct(entry.recipe)
    return gf2.nullspace(G)
