"""Fate of a seed's Fatou component, and escape-rate checks for escaping orbits.

The classifier is a decision procedure over one long orbit plus a few
auxiliary Newton solves. Every label it returns is numerical evidence, not a
proof: "Candidate" labels mean the orbit behaves like an orbit in such a
component at the tested scale.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import fnkit
from ._solve import damped_newton
from .fnkit import FINITE, INFINITY, MeroFn
from .orbit import CONVERGED, CYCLE, ESCAPED, Fate, OrbitRecord, _cjson, iterate
from .periodic import INDIFF_BAND, Q_MAX, classify_multiplier, cycle_multiplier, orbit_segment

ATTRACTING_BASIN = "AttractingBasin"
LEAU = "LeauCandidate"
ROTATION = "RotationCandidate"
BAKER = "BakerCandidate"
WANDERING = "WanderingCandidate"
UNDECIDED = "JuliaOrUndecided"

LOG_ABS = "log_abs"
LOGLOG_ABS = "loglog_abs"

BUDGET = 2000
CLASSIFY_RADIUS = 1e2  # escape radius used while classifying
DRIFT_SEP = 1.0
DRIFT_TOL = 1e-6
RATE_RESID_TOL = 0.5
MIN_TAIL = 20
PERIOD_MAX = 4
PROBE_SCALE = 1e-2
ROTATION_MATCH = 0.01


class TooShortOrbit(ValueError):
    """The record does not contain an escaping tail long enough to fit."""


@dataclass(frozen=True)
class FateLabel:
    kind: str
    value: complex | None = None  # cycle representative, limit point or center
    period: int | None = None
    evidence: dict = field(default_factory=dict, compare=False)

    def to_dict(self) -> dict:
        value = self.value
        if value is INFINITY:
            value = "inf"
        elif value is not None:
            value = _cjson(value)
        return {"kind": self.kind, "value": value, "period": self.period, "evidence": self.evidence}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    def summary(self) -> str:
        parts = [self.kind]
        if self.value is not None:
            parts.append(f"at {self.value}")
        if self.period is not None:
            parts.append(f"period {self.period}")
        return " ".join(parts)


@dataclass(frozen=True)
class RateCheck:
    sequence_name: str
    fitted_slope: float
    intercept: float
    max_residual: float
    n_points: int
    passed: bool

    @property
    def verdict(self) -> str:
        return "pass" if self.passed else "fail"

    def to_dict(self) -> dict:
        return {
            "sequence_name": self.sequence_name,
            "fitted_slope": self.fitted_slope,
            "intercept": self.intercept,
            "max_residual": self.max_residual,
            "n_points": self.n_points,
            "verdict": self.verdict,
        }


# ---------------------------------------------------------------------------
# Escape-rate bounds


def _escaping_tail(points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Indices and moduli of the final run of finite points with |z| > e."""
    a = np.abs(points)
    ok = np.isfinite(a) & (a > np.e)
    if not ok.any():
        return np.array([], int), np.array([])
    last = np.nonzero(ok)[0][-1]
    start = last
    while start > 0 and ok[start - 1]:
        start -= 1
    idx = np.arange(start, last + 1)
    return idx, a[idx]


def escape_rate_check(
    record: OrbitRecord, simply_connected_hint: bool, *, rate_resid_tol: float = RATE_RESID_TOL
) -> RateCheck:
    """Fit ``log|z_n|`` (hint) or ``log log|z_n|`` against n over the escaping tail.

    The check asks whether the sequence is eventually bounded by a line: the
    least-squares slope must be finite and, over the final quarter of the
    tail, the sequence may exceed the line by at most ``rate_resid_tol``.
    Super-exponential escape (typical of escaping points in J) bends upward
    away from any line and fails.
    """
    if record.fate.kind != ESCAPED:
        raise TooShortOrbit(f"orbit fate is {record.fate.kind!r}, not escaped")
    idx, a = _escaping_tail(np.asarray(record.points))
    if idx.size < MIN_TAIL:
        raise TooShortOrbit(f"only {idx.size} steps with |z| > e (need {MIN_TAIL})")
    name = LOG_ABS if simply_connected_hint else LOGLOG_ABS
    seq = np.log(a) if simply_connected_hint else np.log(np.log(a))
    n = idx.astype(float)
    slope, intercept = np.polyfit(n, seq, 1)
    resid = seq - (slope * n + intercept)
    tail = resid[-max(1, idx.size // 4) :]
    max_res = float(np.max(tail))
    passed = bool(np.isfinite(slope) and max_res <= rate_resid_tol)
    return RateCheck(name, float(slope), float(intercept), max_res, int(idx.size), passed)


def linear_growth_ratio(points, n0: int, n1: int) -> float:
    """Least-squares slope of ``|z_n|`` against n for ``n0 <= n <= n1``."""
    pts = np.asarray(points)[n0 : n1 + 1]
    n = np.arange(n0, n0 + pts.size, dtype=float)
    return float(np.polyfit(n, np.abs(pts), 1)[0])


def growth_exponent(f: MeroFn, points) -> float:
    """Smallest A with ``|z|^(1/A) <= |f(z)| <= |z|^A`` along the given points.

    Only points with |z| > e and |f(z)| > e take part; returns nan if none do.
    """
    f = fnkit.as_fn(f)
    z = np.asarray(points, dtype=complex)
    z = z[np.isfinite(z) & (np.abs(z) > np.e)]
    w, st = f.evaluate(z)
    ok = (st == FINITE) & (np.abs(w) > np.e)
    if not ok.any():
        return float("nan")
    r = np.log(np.abs(w[ok])) / np.log(np.abs(z[ok]))
    return float(np.max(np.maximum(r, 1.0 / r)))


# ---------------------------------------------------------------------------
# Helpers


def _solve_near(func, z0) -> complex | None:
    res = damped_newton(func, [complex(z0)])
    return complex(res.z[0]) if res.ok[0] else None


def _periodic_near(f: MeroFn, p: int, z0) -> complex | None:
    """A zero of ``f^p(z) - z`` reached by Newton from ``z0``."""

    def func(z, idx):
        pts, d, bad = orbit_segment(f, z, p)
        return pts[-1] - z, d - 1.0, bad

    return _solve_near(func, z0)


def _root_of_unity_q(lam: complex, band: float = INDIFF_BAND, q_max: int = Q_MAX) -> int | None:
    """Smallest q <= q_max with |lam - exp(2 pi i k/q)| < band for some k."""
    if abs(abs(lam) - 1.0) >= band:
        return None
    theta = np.angle(lam) / (2 * np.pi)
    for q in range(1, q_max + 1):
        k = np.round(theta * q)
        if abs(lam - np.exp(2j * np.pi * k / q)) < band:
            return q
    return None


def _loglog_slope(dist: np.ndarray) -> float:
    n = np.arange(1, dist.size + 1, dtype=float)
    half = dist.size // 2
    n, d = n[half:], dist[half:]
    good = d > 0
    if good.sum() < 3:
        return float("nan")
    return float(np.polyfit(np.log(n[good]), np.log(d[good]), 1)[0])


def _finite_points(record: OrbitRecord) -> np.ndarray:
    pts = np.asarray(record.points)
    return pts[np.isfinite(pts)]


def _sub_escape(points: np.ndarray, p: int, r: int, radius: float) -> OrbitRecord | None:
    """The residue-r sub-orbit under f^p, as an escaped record, if it escapes."""
    sub = points[r::p]
    if sub.size < 3:
        return None
    big = ~(np.abs(sub) <= radius)
    if not big[-1]:
        return None
    first = sub.size - 1
    while first > 0 and big[first - 1]:
        first -= 1
    return OrbitRecord(complex(sub[0]), sub, Fate(ESCAPED, step=int(first)))


# ---------------------------------------------------------------------------
# Individual detectors


def _attracting(f, record) -> FateLabel | None:
    fate = record.fate
    if fate.kind not in (CONVERGED, CYCLE):
        return None
    p = fate.period or 1
    lam = cycle_multiplier(f, fate.value, p)
    if abs(lam) < 1.0 and classify_multiplier(lam).kind != "RationallyIndifferent":
        ev = {"multiplier": _cjson(lam), "stability": str(classify_multiplier(lam)), "step": fate.step}
        return FateLabel(ATTRACTING_BASIN, complex(fate.value), p, ev)
    return None


def _leau(f, record) -> FateLabel | None:
    pts = _finite_points(record)
    if pts.size < 50 or record.fate.kind == ESCAPED:
        return None
    last = pts[-1]
    for p in range(1, PERIOD_MAX + 1):
        c = _periodic_near(f, p, last)
        if c is None or abs(c - last) > 0.5 * max(1.0, abs(c)):
            continue
        lam = cycle_multiplier(f, c, p)
        q = _root_of_unity_q(lam)
        if q is None:
            continue
        # distance of the sub-orbit that ends at `last` to c
        sub = pts[(pts.size - 1) % p :: p]
        slope = _loglog_slope(np.abs(sub - c))
        if -1.5 / q <= slope <= -0.5 / q:
            ev = {"multiplier": _cjson(lam), "q": q, "decay_slope": slope}
            return FateLabel(LEAU, c, p, ev)
    return None


def _rotation(f, record, radius) -> FateLabel | None:
    pts = _finite_points(record)
    if record.fate.kind in (CONVERGED, CYCLE, ESCAPED) or pts.size < 100:
        return None
    if np.max(np.abs(pts)) > radius:
        return None
    c = _periodic_near(f, 1, np.mean(pts))
    if c is None:
        return None
    lam = cycle_multiplier(f, c, 1)
    if abs(abs(lam) - 1.0) >= INDIFF_BAND or _root_of_unity_q(lam) is not None:
        return None
    u = pts - c
    if np.min(np.abs(u)) < 1e-12:
        return None
    steps = np.angle(u[1:] / u[:-1])
    if not (np.all(steps > 0) or np.all(steps < 0)):
        return None
    rho = float(np.mean(steps) / (2 * np.pi)) % 1.0
    target = float(np.angle(lam) / (2 * np.pi)) % 1.0
    gap = min(abs(rho - target), 1.0 - abs(rho - target))
    if gap > ROTATION_MATCH:
        return None
    ev = {"multiplier": _cjson(lam), "rotation_estimate": rho, "note": "Siegel-like evidence"}
    return FateLabel(ROTATION, c, 1, ev)


def _wandering(f, record, drift_sep) -> FateLabel | None:
    pts = _finite_points(record)
    if pts.size < 12:
        return None
    tail = pts[-10:]
    inc = np.diff(tail)
    T = complex(np.mean(inc))
    if abs(T) <= drift_sep or np.max(np.abs(inc - T)) > DRIFT_TOL * max(1.0, abs(T)):
        return None
    fp = f.derivative

    def func(z, idx):
        w, st = f.evaluate(z)
        d, st2 = fp.evaluate(z)
        return w - z - T, d - 1.0, (st != FINITE) | (st2 != FINITE)

    res = damped_newton(func, tail)
    if not res.ok.all():
        return None
    targets = res.z
    if np.max(np.abs(targets - tail)) > DRIFT_TOL * max(1.0, float(np.max(np.abs(tail)))):
        return None
    gaps = np.abs(np.diff(targets))
    mult, _ = fp.evaluate(targets)
    if np.min(gaps) <= drift_sep or np.max(np.abs(mult)) >= 1.0:
        return None
    ev = {
        "translation": _cjson(T),
        "targets": [_cjson(t) for t in targets[:3]],
        "target_multiplier_max": float(np.max(np.abs(mult))),
    }
    return FateLabel(WANDERING, None, None, ev)


def _baker_evidence(f, record, radius, hint):
    """(period, rate check) for an escaping orbit or a period-locked sub-orbit."""
    if record.fate.kind == ESCAPED:
        try:
            rc = escape_rate_check(record, hint)
        except TooShortOrbit:
            return None
        return (1, rc) if rc.passed else None
    if record.fate.kind != "undecided":
        return None
    pts = np.asarray(record.points)
    for p in range(2, PERIOD_MAX + 1):
        for r in range(p):
            sub = _sub_escape(pts, p, r, radius)
            if sub is None:
                continue
            try:
                rc = escape_rate_check(sub, hint)
            except TooShortOrbit:
                continue
            if rc.passed:
                return p, rc
    return None


def _probe_seeds(seed: complex) -> list[complex]:
    d = PROBE_SCALE * max(1.0, abs(seed))
    return [seed + d * np.exp(1j * np.pi * k / 4) for k in range(8)]


# ---------------------------------------------------------------------------


def classify_seed(
    f: MeroFn,
    seed,
    budget: int = BUDGET,
    *,
    escape_radius: float = CLASSIFY_RADIUS,
    drift_sep: float = DRIFT_SEP,
    simply_connected_hint: bool = False,
    probes: bool = True,
) -> FateLabel:
    """Label the Fatou component containing ``seed``.

    Checks run in this order: attracting cycle, parabolic (Leau) limit,
    rotation about an irrationally indifferent fixed point, wandering drift,
    Baker escape. Wandering runs before Baker because a wandering orbit also
    escapes at a tame rate. A Baker label needs the escape (or the escape of
    a sub-orbit along an arithmetic progression, which gives the period) to
    pass the rate check at the seed and at 8 surrounding probe points.
    """
    f = fnkit.as_fn(f)
    seed = complex(seed)
    if f.eval(seed).kind == "pole":
        raise ValueError(f"seed {seed} is at a pole")
    record = iterate(f, seed, budget, escape_radius=escape_radius)

    if record.fate.kind == "hit_pole":
        return FateLabel(UNDECIDED, evidence={"fate": "hit_pole", "step": record.fate.step})
    label = _attracting(f, record) or _leau(f, record) or _rotation(f, record, escape_radius)
    if label is not None:
        return label

    if record.fate.kind == ESCAPED and f.fn_class == fnkit.RATIONAL:
        coeffs = fnkit.poly_coeffs(f.ast)
        if coeffs is not None and len(coeffs) >= 3:
            return FateLabel(ATTRACTING_BASIN, INFINITY, 1, {"note": "polynomial escape"})
        return FateLabel(UNDECIDED, evidence={"fate": ESCAPED, "step": record.fate.step})

    label = _wandering(f, record, drift_sep)
    if label is not None:
        return label

    found = _baker_evidence(f, record, escape_radius, simply_connected_hint)
    if found is not None:
        period, rc = found
        ok = 0
        if probes:
            for s in _probe_seeds(seed):
                if f.eval(s).kind == "pole":
                    continue
                rec = iterate(f, s, budget, escape_radius=escape_radius)
                other = _baker_evidence(f, rec, escape_radius, simply_connected_hint)
                if other is not None and other[0] == period:
                    ok += 1
        if not probes or ok == 8:
            ev = {"rate_check": rc.to_dict(), "probes_agreeing": ok if probes else None}
            return FateLabel(BAKER, INFINITY, period, ev)

    ev = {"fate": record.fate.kind}
    if record.fate.step is not None:
        ev["step"] = record.fate.step
    return FateLabel(UNDECIDED, evidence=ev)
