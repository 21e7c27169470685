"""Symbolic dynamics of ``E(z) = lam * exp(z)`` for ``0 < lam < 1/e``.

Points whose orbits stay in the rectangles

    R_j = {1 < Re z < c, (2j-1) pi < Im z < (2j+1) pi},  |j| <= N,

are coded by the sequence of rectangle indices. Endpoints with a prescribed
code are built by pulling back through the logarithm branches that map into
the chosen rectangles; the branches contract, so longer codes pin the point
down more tightly.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

TWO_PI = 2 * np.pi


class LambdaOutOfRange(ValueError):
    pass


class BranchMiss(RuntimeError):
    """A pulled-back point fell outside its rectangle (c too small)."""


class SymbolOutOfRange(ValueError):
    pass


@dataclass(frozen=True)
class BouquetConfig:
    lam: float
    N: int
    c: float
    q: float

    def E(self, z):
        return self.lam * np.exp(z)

    def rectangle(self, j: int) -> tuple[float, float, float, float]:
        return (1.0, self.c, (2 * j - 1) * np.pi, (2 * j + 1) * np.pi)

    def to_dict(self) -> dict:
        return {"lambda": self.lam, "N": self.N, "c": self.c, "q": self.q}


@dataclass(frozen=True)
class StripExit:
    """The orbit left the union of rectangles at ``step``."""

    step: int
    point: complex


def _fixed_point(lam: float) -> float:
    """Attracting real fixed point of lam*e^x, by bisection on (0, 1)."""
    lo, hi = 0.0, 1.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if lam * np.exp(mid) - mid > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def rectangle_condition(lam: float, N: int, c: float) -> bool:
    return lam * np.exp(c) > c + (2 * N + 1) * np.pi


def configure(lam: float, N: int) -> BouquetConfig:
    lam = float(lam)
    if not 0 < lam < np.exp(-1):
        raise LambdaOutOfRange(f"lambda={lam} not in (0, 1/e)")
    if N < 1:
        raise ValueError("N must be >= 1")
    c = 2
    while not rectangle_condition(lam, N, c):
        c += 1
    return BouquetConfig(lam, int(N), float(c), _fixed_point(lam))


def _check_symbols(config: BouquetConfig, s: Sequence[int]) -> tuple[int, ...]:
    s = tuple(int(v) for v in s)
    bad = [v for v in s if abs(v) > config.N]
    if bad:
        raise SymbolOutOfRange(f"symbols {bad} exceed N={config.N}")
    return s


def strip_index(config: BouquetConfig, z: complex) -> int | None:
    """Index j with z in R_j, or None."""
    if not (1.0 < z.real < config.c):
        return None
    j = int(np.floor((z.imag + np.pi) / TWO_PI))
    return j if abs(j) <= config.N else None


def itinerary(config: BouquetConfig, z, k: int) -> tuple[int, ...] | StripExit:
    """Symbols of z, E(z), ..., E^{k-1}(z), or the first step outside the rectangles."""
    if k < 1:
        raise ValueError("k must be >= 1")
    z = complex(z)
    out = []
    for step in range(k):
        j = strip_index(config, z) if np.isfinite(z) else None
        if j is None:
            return StripExit(step, z)
        out.append(j)
        z = complex(config.E(z))
    return tuple(out)


def _pull_back(config: BouquetConfig, w: complex, j: int) -> complex:
    return complex(np.log(w / config.lam)) + 2j * np.pi * j


def endpoint_from_itinerary(config: BouquetConfig, s: Sequence[int], start: complex | None = None) -> complex:
    """Point whose first ``len(s)`` symbols are ``s``.

    Starts at the center of R_{s[-1]} (or at ``start``) and pulls back through
    the logarithm branch into R_{s[j]} for j = k-2, ..., 0.
    """
    s = _check_symbols(config, s)
    if not s:
        raise ValueError("empty itinerary")
    if start is None:
        z = complex(0.5 * (1.0 + config.c), TWO_PI * s[-1])
    else:
        z = complex(start)
    for j in reversed(range(len(s) - 1)):
        z = _pull_back(config, z, s[j])
        if strip_index(config, z) != s[j]:
            raise BranchMiss(f"pull-back to symbol {s[j]} landed at {z}")
    return z


def verify_conjugacy(config: BouquetConfig, s: Sequence[int], k: int) -> bool:
    """Does E map the endpoint of s to a point coded by the shift of s (k symbols)?"""
    s = _check_symbols(config, s)
    if len(s) < k + 1:
        raise ValueError(f"need at least k+1={k + 1} symbols, got {len(s)}")
    z = endpoint_from_itinerary(config, s)
    it = itinerary(config, complex(config.E(z)), k)
    return isinstance(it, tuple) and it == s[1 : k + 1]


def escape_probe(config: BouquetConfig, s: Sequence[int], steps: int = 60, radius: float = 1e8):
    """Follow the same branches as the endpoint of ``s``, but from Re = c + 0.5.

    The resulting point sits on the hair beyond the endpoint; its orbit
    should escape. Returns ``(escaped, step)`` with the first step beyond
    ``radius``.
    """
    s = _check_symbols(config, s)
    z = endpoint_from_itinerary(config, s, start=complex(config.c + 0.5, TWO_PI * s[-1]))
    with np.errstate(all="ignore"):
        for n in range(steps):
            if not np.isfinite(z) or abs(z) > radius:
                return True, n
            z = complex(config.E(z))
    return False, steps


def random_itineraries(config: BouquetConfig, count: int, depth: int, seed: int = 42) -> list[tuple[int, ...]]:
    rng = np.random.default_rng(seed)
    return [tuple(int(v) for v in rng.integers(-config.N, config.N + 1, depth)) for _ in range(count)]


def report(config: BouquetConfig, itineraries, k: int) -> str:
    rows = []
    for s in itineraries:
        z = endpoint_from_itinerary(config, s)
        rows.append({"itinerary": list(s), "endpoint": [z.real, z.imag], "conjugacy": verify_conjugacy(config, s, k)})
    return json.dumps({"config": config.to_dict(), "k": k, "endpoints": rows}, sort_keys=True)
