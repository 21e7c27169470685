"""Vectorized damped Newton refinement and point deduplication."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# failure reasons
OK = 0
DERIVATIVE_VANISHES = 1
POLE_CROSSING = 2
STALLED = 3
MAX_STEPS = 4

REASONS = {
    DERIVATIVE_VANISHES: "derivative_vanishes",
    POLE_CROSSING: "pole_crossing",
    STALLED: "stalled",
    MAX_STEPS: "max_steps",
}


@dataclass
class NewtonResult:
    z: np.ndarray
    residual: np.ndarray
    ok: np.ndarray
    reason: np.ndarray

    def failure_counts(self) -> dict[str, int]:
        counts = {}
        for code, name in REASONS.items():
            n = int(np.count_nonzero(self.reason == code))
            if n:
                counts[name] = n
        return counts


_NOISE = 4 * np.finfo(float).eps
COND_TOL = 1e-3


def _correction(F, dF, scale):
    """Newton correction, or inf where ``F'`` is lost in rounding noise."""
    adf = np.abs(dF)
    return np.where(_NOISE * scale < COND_TOL * adf, np.abs(F) / adf, np.inf)


def damped_newton(
    func, seeds, *, max_steps=200, tol=1e-12, accept_tol=1e-10, step_tol=1e-8, max_halvings=40
):
    """Solve ``F(z) = 0`` from every seed at once.

    ``func(z, idx)`` returns ``(F, dF, bad)``; ``idx`` indexes the seeds being
    evaluated, so per-seed data (e.g. targets) can be looked up. A step is
    halved until the residual decreases (at most ``max_halvings`` times).

    A seed converges when the residual is below ``tol`` *and* the Newton
    correction ``|F/F'|`` is below ``step_tol``; the second test rejects
    points where ``F`` is merely tiny (e.g. ``exp(z)`` far to the left).
    ``F'`` must also clear the rounding noise of ``F`` by a factor
    ``1/cond_tol``, so cancellation to an exact zero cannot fake a root. Stalled seeds are
    accepted under the same correction test with the looser ``accept_tol``
    residual. All tolerances scale with ``max(1, |z|)``.
    """
    z = np.array(seeds, dtype=complex).ravel()
    n = z.size
    F, dF, bad = func(z, np.arange(n))
    res = np.abs(F)
    reason = np.full(n, MAX_STEPS, dtype=np.int8)
    ok = np.zeros(n, dtype=bool)
    reason[bad] = POLE_CROSSING
    active = ~bad
    scale = np.maximum(1.0, np.abs(z))
    with np.errstate(all="ignore"):
        corr = _correction(F, dF, scale)
    done = active & (res < tol * scale) & (corr < step_tol * scale)
    ok[done] = True
    reason[done] = OK
    active &= ~done

    with np.errstate(all="ignore"):
        for _ in range(max_steps):
            idx = np.nonzero(active)[0]
            if idx.size == 0:
                break
            zi, Fi, dFi, ri = z[idx], F[idx], dF[idx], res[idx]
            small = ~(np.abs(dFi) > 1e-300) | ~np.isfinite(dFi)
            if small.any():
                dead = idx[small]
                reason[dead] = DERIVATIVE_VANISHES
                active[dead] = False
                keep = ~small
                idx, zi, Fi, dFi, ri = idx[keep], zi[keep], Fi[keep], dFi[keep], ri[keep]
                if idx.size == 0:
                    continue
            step = -Fi / dFi
            lam = np.ones(idx.size)
            zt = zi + step
            Ft, dFt, badt = func(zt, idx)
            rt = np.abs(Ft)
            worse = badt | ~(rt < ri)
            for _h in range(max_halvings):
                if not worse.any():
                    break
                w = np.nonzero(worse)[0]
                lam[w] *= 0.5
                zt_w = zi[w] + lam[w] * step[w]
                Fw, dFw, badw = func(zt_w, idx[w])
                zt[w], Ft[w], dFt[w], badt[w] = zt_w, Fw, dFw, badw
                rt[w] = np.abs(Fw)
                worse[w] = badw | ~(rt[w] < ri[w])
            # accept improved seeds
            good = ~worse
            gi = idx[good]
            z[gi], F[gi], dF[gi], res[gi] = zt[good], Ft[good], dFt[good], rt[good]
            sc = np.maximum(1.0, np.abs(z[gi]))
            corr = _correction(F[gi], dF[gi], sc)
            conv = ((res[gi] < tol * sc) & (corr < step_tol * sc)) | (
                np.abs(lam[good] * step[good]) < 1e-15 * sc
            )
            cidx = gi[conv]
            ok[cidx] = (res[cidx] < accept_tol * sc[conv]) & (corr[conv] < step_tol * sc[conv])
            reason[cidx] = np.where(ok[cidx], OK, STALLED)
            active[cidx] = False
            # stalled seeds: no decrease possible
            si = idx[worse]
            ssc = np.maximum(1.0, np.abs(z[si]))
            near = (res[si] < accept_tol * ssc) & (_correction(F[si], dF[si], ssc) < step_tol * ssc)
            ok[si[near]] = True
            reason[si] = np.where(near, OK, STALLED)
            active[si] = False

    return NewtonResult(z, res, ok, reason)


def polish(func, z, steps: int = 3):
    """A few undamped Newton steps, each kept only if the residual drops."""
    z = np.array(z, dtype=complex).ravel()
    idx = np.arange(z.size)
    with np.errstate(all="ignore"):
        F, dF, bad = func(z, idx)
        for _ in range(steps):
            zt = z - F / dF
            Ft, dFt, badt = func(zt, idx)
            better = ~bad & ~badt & (np.abs(Ft) < np.abs(F))
            z = np.where(better, zt, z)
            F = np.where(better, Ft, F)
            dF = np.where(better, dFt, dF)
    return z


def dedup_points(points, tol: float) -> np.ndarray:
    """Deterministic greedy clustering: sort lexicographically, keep first of each cluster."""
    pts = np.asarray(points, dtype=complex).ravel()
    if pts.size == 0:
        return pts
    order = np.lexsort((pts.imag, pts.real))
    pts = pts[order]
    kept: list[complex] = []
    buckets: dict[tuple[int, int], list[complex]] = {}
    for p in pts:
        key = (int(np.floor(p.real / tol)), int(np.floor(p.imag / tol)))
        clash = False
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                for q in buckets.get((key[0] + dx, key[1] + dy), ()):
                    if abs(p - q) < tol:
                        clash = True
                        break
                if clash:
                    break
            if clash:
                break
        if not clash:
            kept.append(p)
            buckets.setdefault(key, []).append(p)
    return np.array(kept, dtype=complex)


def lattice(box, n: int) -> np.ndarray:
    """Center-of-cell ``n x n`` seed lattice over ``box = (x0, x1, y0, y1)``."""
    x0, x1, y0, y1 = box
    xs = x0 + (np.arange(n) + 0.5) * (x1 - x0) / n
    ys = y0 + (np.arange(n) + 0.5) * (y1 - y0) / n
    X, Y = np.meshgrid(xs, ys)
    return (X + 1j * Y).ravel()


def in_box(z, box, pad: float = 0.0) -> np.ndarray:
    x0, x1, y0, y1 = box
    z = np.asarray(z)
    return (z.real >= x0 - pad) & (z.real <= x1 + pad) & (z.imag >= y0 - pad) & (z.imag <= y1 + pad)


def check_box(box) -> tuple[float, float, float, float]:
    x0, x1, y0, y1 = (float(v) for v in box)
    if not (x1 > x0 and y1 > y0):
        raise ValueError(f"degenerate box {box!r}")
    return x0, x1, y0, y1
