"""Periodic points: search, minimality, multipliers and stability labels."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import fnkit
from ._solve import check_box, damped_newton, dedup_points, in_box, lattice, polish
from .fnkit import FINITE, MeroFn
from .orbit import CONV_TOL, DEDUP_TOL, _cjson, _cycle_representative

MINIMALITY_MARGIN = 1e-4
INDIFF_BAND = 1e-6
ZERO_BAND = 1e-9
RATIONAL_TOL = 1e-9
Q_MAX = 64

SUPERATTRACTING = "Superattracting"
ATTRACTING = "Attracting"
RATIONALLY_INDIFFERENT = "RationallyIndifferent"
IRRATIONALLY_INDIFFERENT = "IrrationallyIndifferent"
REPELLING = "Repelling"


@dataclass(frozen=True)
class Stability:
    kind: str
    q: int | None = None  # rotation denominator for rationally indifferent multipliers

    def __str__(self):
        return f"{self.kind}({self.q})" if self.q is not None else self.kind


@dataclass(frozen=True)
class PeriodicPoint:
    location: complex
    minimal_period: int
    multiplier: complex
    stability: Stability
    residual: float
    cycle: tuple = field(default=(), compare=False, repr=False)

    def to_dict(self) -> dict:
        return {
            "location": _cjson(self.location),
            "minimal_period": self.minimal_period,
            "multiplier": _cjson(self.multiplier),
            "stability": str(self.stability),
            "residual": self.residual,
        }


@dataclass
class PeriodicSearch:
    points: list[PeriodicPoint]
    failures: dict

    def __iter__(self):
        return iter(self.points)

    def __len__(self):
        return len(self.points)

    def to_json(self) -> str:
        return json.dumps([p.to_dict() for p in self.points], sort_keys=True)


def rotation_denominator(lam: complex, tol: float = RATIONAL_TOL, q_max: int = Q_MAX) -> int | None:
    """Denominator q if arg(lam)/2pi is within ``tol`` of some p/q with q <= q_max."""
    theta = (np.angle(lam) / (2 * np.pi)) % 1.0
    frac = Fraction(theta).limit_denominator(q_max)
    if abs(theta - float(frac)) < tol or abs(theta - 1.0) < tol:
        return 1 if abs(theta - 1.0) < tol else frac.denominator
    return None


def classify_multiplier(lam) -> Stability:
    lam = complex(lam)
    r = abs(lam)
    if r < ZERO_BAND:
        return Stability(SUPERATTRACTING)
    if abs(r - 1.0) < INDIFF_BAND:
        q = rotation_denominator(lam)
        if q is not None:
            return Stability(RATIONALLY_INDIFFERENT, q)
        return Stability(IRRATIONALLY_INDIFFERENT)
    if r < 1.0:
        return Stability(ATTRACTING)
    return Stability(REPELLING)


def orbit_segment(f: MeroFn, z, n: int):
    """``[z, f(z), ..., f^n(z)]`` and the chain-rule product of ``f'`` along the first n."""
    fp = f.derivative
    z = np.asarray(z, dtype=complex)
    pts = [z]
    d = np.ones_like(z)
    bad = np.zeros(z.shape, bool)
    w = z
    with np.errstate(all="ignore"):
        for _ in range(n):
            fw, st = f.evaluate(w)
            dw, st2 = fp.evaluate(w)
            d = d * dw
            bad |= (st != FINITE) | (st2 != FINITE)
            w = fw
            pts.append(w)
    return pts, d, bad


def cycle_multiplier(f: MeroFn, z, n: int) -> complex:
    _, d, _ = orbit_segment(f, complex(z), n)
    return complex(d)


def _divisors(n: int) -> list[int]:
    return [m for m in range(1, n) if n % m == 0]


def find_periodic(
    f: MeroFn,
    n: int,
    box,
    grid_n: int = 100,
    *,
    conv_tol: float = CONV_TOL,
    minimality_margin: float = MINIMALITY_MARGIN,
    dedup_tol: float = DEDUP_TOL,
    max_steps: int = 200,
) -> PeriodicSearch:
    """Cycles of minimal period ``n`` with a member in ``box``.

    Damped Newton on ``f^n(z) - z`` from a ``grid_n x grid_n`` lattice. One
    representative per cycle is returned (smallest |Im|, then smallest Re),
    sorted by (Re, Im). Seed failures are counted, never raised.
    """
    f = fnkit.as_fn(f)
    if n < 1:
        raise ValueError("period must be >= 1")
    box = check_box(box)

    def func(z, idx):
        pts, d, bad = orbit_segment(f, z, n)
        return pts[-1] - z, d - 1.0, bad

    res = damped_newton(func, lattice(box, grid_n), max_steps=max_steps, accept_tol=conv_tol)
    failures = res.failure_counts()
    cand = res.z[res.ok]
    cand = cand[np.isfinite(cand)]
    if cand.size == 0:
        return PeriodicSearch([], failures)

    # Minimality against every proper divisor, and cycle membership.
    pts, d, bad = orbit_segment(f, cand, n)
    scale = np.maximum(1.0, np.abs(cand))
    resid = np.abs(pts[-1] - cand)
    keep = ~bad & (resid < conv_tol * scale)
    for m in _divisors(n):
        keep &= np.abs(pts[m] - cand) >= minimality_margin
    members = np.stack(pts[:n])  # shape (n, k)
    inside = np.zeros(cand.shape, bool)
    for j in range(n):
        inside |= in_box(members[j], box)
    keep &= inside
    failures_min = int(np.count_nonzero(~keep))
    if failures_min:
        failures["rejected"] = failures_min
    reps = np.array([_cycle_representative(members[:, i]) for i in np.nonzero(keep)[0]], dtype=complex)
    reps = polish(func, reps)
    # polishing can move a point across a tie, so pick representatives again
    if reps.size:
        again = np.stack(orbit_segment(f, reps, n)[0][:n])
        reps = np.array([_cycle_representative(again[:, i]) for i in range(reps.size)], dtype=complex)
    reps = dedup_points(reps, dedup_tol)

    out = []
    for rep in reps:
        cyc, lam, _ = orbit_segment(f, rep, n)
        lam = complex(lam)
        out.append(
            PeriodicPoint(
                location=complex(rep),
                minimal_period=n,
                multiplier=lam,
                stability=classify_multiplier(lam),
                residual=float(abs(complex(cyc[-1]) - rep)),
                cycle=tuple(complex(c) for c in cyc[:n]),
            )
        )
    return PeriodicSearch(out, failures)
