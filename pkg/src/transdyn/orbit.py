"""Forward orbits with fate detection, and backward orbits by numerical preimages."""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import fnkit
from ._solve import check_box, damped_newton, dedup_points, in_box, lattice
from .fnkit import INFINITY, POLE, FINITE, MeroFn

ESCAPE_RADIUS = 1e8
CONV_TOL = 1e-10
SETTLE_WINDOW = 5
CYCLE_TOL = 1e-8
CYCLE_SCAN_MAX = 64
DEDUP_TOL = 1e-6
GRACE = 10

CONVERGED = "converged"
CYCLE = "cycle"
ESCAPED = "escaped"
HIT_POLE = "hit_pole"
UNDECIDED = "undecided"


class TargetExceptional(ValueError):
    """The target is an omitted value of the map, so it has no preimages."""


@dataclass(frozen=True)
class Fate:
    kind: str
    value: complex | None = None  # limit point or cycle representative
    period: int | None = None
    step: int | None = None

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        if self.value is not None:
            d["value"] = _cjson(self.value)
        if self.period is not None:
            d["period"] = self.period
        if self.step is not None:
            d["step"] = self.step
        return d


@dataclass
class OrbitRecord:
    seed: complex
    points: np.ndarray
    fate: Fate

    def to_dict(self) -> dict:
        return {
            "seed": _cjson(self.seed),
            "points": [_cjson(p) for p in self.points],
            "fate": self.fate.to_dict(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


@dataclass
class PreimageSet:
    target: object
    depth: int
    points: np.ndarray
    failures: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "target": "inf" if self.target is INFINITY else _cjson(self.target),
            "depth": self.depth,
            "points": [_cjson(p) for p in self.points],
            "failures": dict(sorted(self.failures.items())),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _cjson(z):
    z = complex(z)
    if not (np.isfinite(z.real) and np.isfinite(z.imag)):
        return None
    return [z.real + 0.0, z.imag + 0.0]  # no negative zeros in reports


def _cycle_representative(members) -> complex:
    """Member with smallest |Im|; ties (within 1e-9) broken by smallest Re, then smallest Im."""
    members = np.asarray(members, dtype=complex)
    aim = np.abs(members.imag)
    cand = members[aim <= aim.min() + 1e-9]
    cand = cand[cand.real <= cand.real.min() + 1e-9]
    return complex(cand[np.argmin(cand.imag)])


def iterate(
    f: MeroFn,
    seed,
    max_iters: int = 1000,
    *,
    escape_radius: float = ESCAPE_RADIUS,
    conv_tol: float = CONV_TOL,
    settle_window: int = SETTLE_WINDOW,
    cycle_tol: float = CYCLE_TOL,
    cycle_scan_max: int = CYCLE_SCAN_MAX,
    grace: int = GRACE,
) -> OrbitRecord:
    """Iterate ``f`` from ``seed`` for at most ``max_iters`` steps.

    Fates are decided in order: pole hit, escape (beyond ``escape_radius``
    and not back within ``grace`` steps), convergence (successive steps
    closer than ``conv_tol`` for ``settle_window`` steps), cycle (lag-p
    revisit within ``cycle_tol``, p >= 2, confirmed on two consecutive
    steps). Anything else is ``undecided``. ``points[0]`` is the seed.
    """
    f = fnkit.as_fn(f)
    z = complex(seed)
    pts = [z]
    first_exceed = None
    settle = 0
    prev_match = np.zeros(cycle_scan_max + 1, dtype=bool)
    fate = None
    for n in range(max_iters):
        out = f.eval(z)
        if out.kind == "pole":
            fate = Fate(HIT_POLE, step=n)
            break
        if out.kind == "overflow":
            pts.append(complex(np.inf, 0))
            fate = Fate(ESCAPED, step=first_exceed if first_exceed is not None else n + 1)
            break
        w = out.value
        pts.append(w)
        if abs(w) > escape_radius:
            if first_exceed is None:
                first_exceed = n + 1
            if n + 1 - first_exceed >= grace:
                fate = Fate(ESCAPED, step=first_exceed)
                break
            z = w
            continue
        first_exceed = None
        settle = settle + 1 if abs(w - z) < conv_tol else 0
        if settle >= settle_window:
            fate = Fate(CONVERGED, value=w, period=1, step=n + 1)
            break
        m = len(pts)
        if m >= 3:
            lags = min(cycle_scan_max, m - 1)
            window = np.asarray(pts[-(lags + 1):], dtype=complex)
            d = np.abs(window[-1] - window[-1 - np.arange(1, lags + 1)])
            match = np.zeros(cycle_scan_max + 1, dtype=bool)
            match[1 : lags + 1] = d < cycle_tol
            both = match & prev_match
            prev_match = match
            hits = np.nonzero(both)[0]
            if hits.size and hits[0] >= 2 and not match[1]:
                p = int(hits[0])
                rep = _cycle_representative(window[-p:])
                fate = Fate(CYCLE, value=rep, period=p, step=n + 1)
                break
        z = w
    if fate is None:
        # an unfinished grace window proves nothing
        fate = Fate(UNDECIDED)
    return OrbitRecord(complex(seed), np.asarray(pts, dtype=complex), fate)


# ---------------------------------------------------------------------------
# Vectorized iteration for rasters and basin counts

GRID_UNDECIDED = 0
GRID_ESCAPED = 1
GRID_CONVERGED = 2
GRID_POLE = 3


@dataclass
class GridOrbits:
    kind: np.ndarray  # uint8 GRID_* codes
    step: np.ndarray  # escape step, pole step or settle step; -1 when undecided
    limit: np.ndarray  # limit point / cycle representative for converged cells
    period: np.ndarray  # cycle period for converged cells, else 0


def iterate_many(
    f: MeroFn,
    seeds,
    max_iters: int = 500,
    *,
    escape_radius: float = ESCAPE_RADIUS,
    conv_tol: float = CONV_TOL,
    settle_window: int = SETTLE_WINDOW,
    cycle_tol: float = CYCLE_TOL,
    period_max: int = 8,
    grace: int = GRACE,
) -> GridOrbits:
    """Array version of :func:`iterate`, with cycle detection up to ``period_max``.

    Each seed is processed independently; the result does not depend on how
    the seeds are batched.
    """
    seeds = np.asarray(seeds, dtype=complex)
    shape = seeds.shape
    z = seeds.ravel().copy()
    n = z.size
    kind = np.zeros(n, np.uint8)
    step = np.full(n, -1, np.int64)
    limit = np.full(n, np.nan + 0j, complex)
    period = np.zeros(n, np.int16)

    P = period_max
    idx = np.arange(n)
    hist = np.full((P + 1, n), np.nan + 0j, complex)
    hist[0] = z
    first = np.full(n, -1, np.int64)
    counts = np.zeros((P + 1, n), np.int16)

    def retire(mask, k, code, stp, lim=None, per=None):
        nonlocal idx, z, hist, first, counts
        ids = idx[mask]
        kind[ids] = code
        step[ids] = stp[mask] if isinstance(stp, np.ndarray) else stp
        if lim is not None:
            limit[ids] = lim[mask]
        if per is not None:
            period[ids] = per[mask]
        keep = ~mask
        idx, z, hist, first, counts = idx[keep], z[keep], hist[:, keep], first[keep], counts[:, keep]

    with np.errstate(all="ignore"):
        for k in range(max_iters):
            if idx.size == 0:
                break
            w, st = f.evaluate(z)
            pole = st == POLE
            if pole.any():
                retire(pole, k, GRID_POLE, k)
                w, st = w[~pole], st[~pole]
            over = st != FINITE
            if over.any():
                stp = np.where(first >= 0, first, k + 1)
                retire(over, k, GRID_ESCAPED, stp)
                w = w[~over]
            big = np.abs(w) > escape_radius
            first = np.where(big, np.where(first >= 0, first, k + 1), -1)
            esc = big & (k + 1 - first >= grace)
            slot = (k + 1) % (P + 1)
            if esc.any():
                retire(esc, k, GRID_ESCAPED, first.copy())
                w, big = w[~esc], big[~esc]
            # lag comparisons against history
            match = np.zeros((P + 1, w.size), bool)
            for p in range(1, min(P, k + 1) + 1):
                prev = hist[(k + 1 - p) % (P + 1)]
                tol = conv_tol if p == 1 else cycle_tol
                match[p] = np.abs(w - prev) < tol
            need = np.where(np.arange(P + 1) == 1, settle_window, 2)[:, None]
            counts = np.where(match, counts + 1, 0).astype(np.int16)
            counts[:, big] = 0
            hist[slot] = w
            z = w
            settled = counts >= need
            settled[0] = False
            # a lag-p match with lag-1 also matching means slow convergence to a fixed point
            lag1_close = np.abs(w - hist[k % (P + 1)]) < cycle_tol
            settled[2:, lag1_close] = False
            any_settled = settled.any(axis=0)
            if any_settled.any():
                per = np.argmax(settled, axis=0).astype(np.int16)
                lim = w.copy()
                for p in np.unique(per[any_settled]):
                    if p <= 1:
                        continue
                    sel = any_settled & (per == p)
                    members = np.stack([hist[(k + 1 - j) % (P + 1)][sel] for j in range(p)])
                    aim = np.abs(members.imag)
                    tie = aim <= aim.min(axis=0) + 1e-9
                    re = np.where(tie, members.real, np.inf)
                    lim[sel] = members[np.argmin(re, axis=0), np.arange(members.shape[1])]
                retire(any_settled, k, GRID_CONVERGED, k + 1, lim, per)

    return GridOrbits(kind.reshape(shape), step.reshape(shape), limit.reshape(shape), period.reshape(shape))


# ---------------------------------------------------------------------------
# Preimages


def _pole_func(f: MeroFn):
    fp = f.derivative

    def func(z, idx):
        w, st = f.evaluate(z)
        dw, st2 = fp.evaluate(z)
        pole = st == POLE
        with np.errstate(all="ignore"):
            R = np.where(pole, 0, 1.0 / w)
            dR = np.where(pole, 1.0, -dw / (w * w))
        bad = ~pole & ((st != FINITE) | (st2 != FINITE) | ~np.isfinite(R) | ~np.isfinite(dR))
        return R, dR, bad

    return func


def _target_func(f: MeroFn, targets: np.ndarray):
    fp = f.derivative

    def func(z, idx):
        w, st = f.evaluate(z)
        dw, st2 = fp.evaluate(z)
        bad = (st != FINITE) | (st2 != FINITE)
        return w - targets[idx], dw, bad

    return func


def _merge_failures(acc: dict, new: dict):
    for k, v in new.items():
        acc[k] = acc.get(k, 0) + v


def find_poles(f: MeroFn, box, grid_n: int, *, dedup_tol: float = DEDUP_TOL, failures=None):
    """Poles of ``f`` inside ``box`` by Newton on ``1/f`` from a lattice."""
    box = check_box(box)
    seeds = lattice(box, grid_n)
    res = damped_newton(_pole_func(f), seeds)
    if failures is not None:
        _merge_failures(failures, res.failure_counts())
    cand = res.z[res.ok & in_box(res.z, box)]
    if cand.size:
        w, st = f.evaluate(cand)
        with np.errstate(all="ignore"):
            near = (st == POLE) | (np.abs(1.0 / w) < fnkit.POLE_TOL)
        cand = cand[near]
    return dedup_points(cand, dedup_tol)


def _solve_level(f: MeroFn, targets, box, grid_n, *, conv_tol, dedup_tol, failures, chunk=400_000):
    seeds = lattice(box, grid_n)
    targets = np.asarray(targets, dtype=complex)
    if targets.size == 0:
        return targets
    found = []
    per_chunk = max(1, chunk // seeds.size)
    for start in range(0, targets.size, per_chunk):
        tg = targets[start : start + per_chunk]
        pair_t = np.repeat(tg, seeds.size)
        pair_z = np.tile(seeds, tg.size)
        res = damped_newton(_target_func(f, pair_t), pair_z)
        _merge_failures(failures, res.failure_counts())
        ok = res.ok & in_box(res.z, box)
        z = res.z[ok]
        t = pair_t[ok]
        w, st = f.evaluate(z)
        good = (st == FINITE) & (np.abs(w - t) < conv_tol * np.maximum(1.0, np.abs(t)))
        found.append(z[good])
    return dedup_points(np.concatenate(found), dedup_tol)


def _check_target(f: MeroFn, target):
    if target is INFINITY:
        if fnkit.is_entire(f.ast):
            raise TargetExceptional("infinity has no finite preimages under an entire map")
        return
    for om in f.omitted:
        if abs(complex(target) - om) <= 1e-12 * max(1.0, abs(om)):
            raise TargetExceptional(f"{complex(target)} is an omitted value of {f.text}")


def backward_levels(
    f: MeroFn,
    target,
    depth: int,
    box,
    grid_n: int = 64,
    *,
    conv_tol: float = CONV_TOL,
    dedup_tol: float = DEDUP_TOL,
    max_points: int | None = None,
    failures: dict | None = None,
) -> list[np.ndarray]:
    """Levels ``f^{-1}(target), f^{-2}(target), ...`` restricted to ``box``.

    Each level is solved from the previous one, so intermediate preimages
    must also lie in ``box``. ``max_points`` thins a level (keeping a
    deterministic, evenly spaced subset of the sorted points) before it is
    used as the next set of targets.
    """
    f = fnkit.as_fn(f)
    if depth < 1:
        raise ValueError("depth must be >= 1")
    box = check_box(box)
    _check_target(f, target)
    failures = {} if failures is None else failures
    levels = []
    if target is INFINITY:
        level = find_poles(f, box, grid_n, dedup_tol=dedup_tol, failures=failures)
    else:
        level = _solve_level(f, [complex(target)], box, grid_n, conv_tol=conv_tol, dedup_tol=dedup_tol, failures=failures)
    levels.append(level)
    for _ in range(depth - 1):
        if max_points is not None and level.size > max_points:
            level = level[np.linspace(0, level.size - 1, max_points).astype(int)]
        level = _solve_level(f, level, box, grid_n, conv_tol=conv_tol, dedup_tol=dedup_tol, failures=failures)
        levels.append(level)
    return levels


def preimages(f: MeroFn, target, depth: int, box, grid_n: int = 64, **kw) -> PreimageSet:
    """Solutions of ``f^depth(z) = target`` in ``box`` reachable from a ``grid_n``-lattice.

    Completeness holds only relative to the seed lattice. Raises
    :class:`TargetExceptional` for detected omitted values (and for infinity
    under entire maps).
    """
    failures: dict = {}
    levels = backward_levels(f, target, depth, box, grid_n, failures=failures, **kw)
    return PreimageSet(target, depth, levels[-1], failures)


def write_jsonl(records, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for r in records:
            fh.write(r.to_json() + "\n")
