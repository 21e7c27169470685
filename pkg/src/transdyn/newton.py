"""Newton and relaxed Newton maps, the singular-orbit test, and the Newton flow."""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import fnkit
from ._solve import check_box, damped_newton, dedup_points, in_box, lattice, polish
from .fnkit import FINITE, MeroFn, Z
from .julia import CONVERGED as CELL_CONVERGED
from .julia import RasterGrid, grid_centers
from .orbit import CONVERGED, CYCLE, GRID_CONVERGED, UNDECIDED, Fate, OrbitRecord, _cjson, iterate, iterate_many
from .periodic import ZERO_BAND, cycle_multiplier

ROOT_BOX = (-3.0, 3.0, -3.0, 3.0)
ROOT_GRID = 40
ROOT_MATCH = 1e-3  # a terminal point counts for a root only within this distance
CIRCLE_RADIUS = 1e-3
CIRCLE_POINTS = 32

FLOW_TOL = 1e-8
FLOW_DT = 1e-2
FLOW_DT_MIN = 1e-8
FLOW_T_MAX = 100.0
FLOW_MAX_MOVE = 0.1  # largest displacement of any RK stage before the step is halved
FLOW_VARY = 0.5  # largest relative change of the velocity across one step

GUARANTEED = "GUARANTEED"
OBSTRUCTED = "OBSTRUCTED"

FLOW_ROOT = "root"
FLOW_DIVERGED = "diverged"
FLOW_UNDERFLOW = "step_underflow"


class NoRootsFound(UserWarning):
    pass


class StepUnderflow(RuntimeError):
    pass


@dataclass(frozen=True)
class Root:
    location: complex
    multiplicity: int
    multiplier: complex  # f_h'(root), taken as a circle mean since f_h' is 0/0 at multiple roots

    def to_dict(self) -> dict:
        return {"location": _cjson(self.location), "multiplicity": self.multiplicity, "multiplier": _cjson(self.multiplier)}


@dataclass
class NewtonSetup:
    g: MeroFn
    h: complex
    f_h: MeroFn
    roots: list[Root]
    box: tuple

    @property
    def root_locations(self) -> np.ndarray:
        return np.array([r.location for r in self.roots], dtype=complex)

    def to_dict(self) -> dict:
        return {
            "g": self.g.text,
            "h": _cjson(self.h),
            "f_h": self.f_h.text,
            "roots": [r.to_dict() for r in self.roots],
            "box": list(self.box),
        }


def newton_ast(g: MeroFn, h=1.0) -> fnkit.Node:
    """``z - h*g/g'`` as an expression tree."""
    step = fnkit.div(g.ast, g.derivative.ast)
    return fnkit.sub(Z, fnkit.mul(fnkit.Const(complex(h)), step))


def newton_map(g, h=1.0) -> MeroFn:
    return MeroFn(newton_ast(fnkit.as_fn(g), h))


def circle_mean(fn: MeroFn, center: complex, radius: float = CIRCLE_RADIUS, k: int = CIRCLE_POINTS) -> complex:
    """Mean of ``fn`` on a small circle: its value at ``center`` if holomorphic there."""
    pts = center + radius * np.exp(2j * np.pi * (np.arange(k) + 0.5) / k)
    w, st = fn.evaluate(pts)
    if np.any(st != FINITE):
        return complex("nan")
    return complex(np.mean(w))


def locate_roots(g: MeroFn, box=ROOT_BOX, grid_n: int = ROOT_GRID) -> np.ndarray:
    """Zeros of ``g`` in ``box`` via Newton on ``g/g'``, whose zeros are all simple."""
    g1 = g.derivative
    g2 = g1.derivative

    def func(z, idx):
        a, s0 = g.evaluate(z)
        b, s1 = g1.evaluate(z)
        c, s2 = g2.evaluate(z)
        exact = a == 0
        with np.errstate(all="ignore"):
            u = np.where(exact, 0, a / b)
            du = np.where(exact, 1, 1 - a * c / (b * b))
        bad = ~exact & ((s0 != FINITE) | (s1 != FINITE) | (s2 != FINITE) | ~np.isfinite(u) | ~np.isfinite(du))
        return u, du, bad

    res = damped_newton(func, lattice(box, grid_n))
    z = res.z[res.ok & in_box(res.z, box)]
    if z.size:
        z = dedup_points(polish(func, z), 1e-6)
        a, st = g.evaluate(z)
        z = z[(st == FINITE) & (np.abs(a) < 1e-8 * np.maximum(1.0, np.abs(z)))]
    return dedup_points(z, 1e-6)


def make_relaxed(g, h=1.0, box=ROOT_BOX, grid_n: int = ROOT_GRID) -> NewtonSetup:
    """Relaxed Newton iterator ``z - h g/g'`` with the roots of ``g`` in ``box``.

    Multiplicities come from ``f_h'(root) = 1 - h/m``.
    """
    g = fnkit.as_fn(g)
    h = complex(h)
    if not (h == 1 or abs(h - 1) < 1):
        raise ValueError(f"relaxation h={h} outside |h-1| < 1")
    if not fnkit.depends_on_z(g.ast):
        raise ValueError("g must be nonconstant")
    box = check_box(box)
    f_h = newton_map(g, h)
    roots = []
    for z in locate_roots(g, box, grid_n):
        lam = circle_mean(f_h.derivative, z, CIRCLE_RADIUS * max(1.0, abs(z)))
        m = h / (1 - lam) if abs(1 - lam) > 1e-12 else np.inf
        mult = int(round(abs(m))) if np.isfinite(m) else 0
        roots.append(Root(complex(z), max(mult, 1), lam))
    if not roots:
        warnings.warn(f"no roots of {g.text} found in {box}", NoRootsFound, stacklevel=2)
    return NewtonSetup(g, h, f_h, roots, box)


def relaxed_multiplier(setup: NewtonSetup, root: complex) -> complex:
    return circle_mean(setup.f_h.derivative, complex(root), CIRCLE_RADIUS * max(1.0, abs(root)))


# ---------------------------------------------------------------------------
# Singular orbits


@dataclass
class SingularFate:
    point: complex
    record: OrbitRecord
    root: complex | None

    def to_dict(self) -> dict:
        return {
            "point": _cjson(self.point),
            "fate": self.record.fate.to_dict(),
            "root": None if self.root is None else _cjson(self.root),
        }


@dataclass
class SmaleReport:
    singular_points: list[complex]
    fates: list[SingularFate]
    verdict: str

    def obstructions(self) -> list[SingularFate]:
        return [s for s in self.fates if s.root is None]

    def to_dict(self) -> dict:
        return {
            "singular_points": [_cjson(z) for z in self.singular_points],
            "fates": [s.to_dict() for s in self.fates],
            "verdict": self.verdict,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def singular_points(g: MeroFn, box=ROOT_BOX, grid_n: int = ROOT_GRID) -> np.ndarray:
    """Zeros of ``g''`` that are not zeros of ``g'``.

    Exact polynomial roots when ``g`` is a polynomial, else a Newton search
    on ``g''`` over ``box``.
    """
    g1 = g.derivative
    g2 = g1.derivative
    coeffs = fnkit.poly_coeffs(g.ast)
    if coeffs is not None:
        c2 = np.polynomial.polynomial.polyder(coeffs, 2)
        c2 = np.trim_zeros(c2, "b")
        if c2.size <= 1:
            return np.array([], complex)
        pts = np.polynomial.polynomial.polyroots(c2).astype(complex)
    else:
        g3 = g2.derivative

        def func(z, idx):
            a, s0 = g2.evaluate(z)
            b, s1 = g3.evaluate(z)
            return a, b, (s0 != FINITE) | (s1 != FINITE)

        res = damped_newton(func, lattice(check_box(box), grid_n))
        pts = res.z[res.ok & in_box(res.z, box)]
    pts = dedup_points(pts, 1e-8)
    d1, _ = g1.evaluate(pts)
    return pts[np.abs(d1) > 1e-10] + 0.0


def smale_test(setup: NewtonSetup, box=None, max_iters: int = 500) -> SmaleReport:
    """Iterate every singular point under the h=1 Newton map.

    GUARANTEED when each converges to a root of g, OBSTRUCTED otherwise. The
    guarantee is a theorem only for polynomial g (and the integral family);
    for other maps it is just the outcome of the test.
    """
    box = setup.box if box is None else check_box(box)
    g = setup.g
    f1 = setup.f_h if setup.h == 1 else newton_map(g, 1.0)
    pts = singular_points(g, box)
    fates = []
    for z in pts:
        rec = iterate(f1, z, max_iters)
        root = None
        if rec.fate.kind in (CONVERGED, CYCLE) and (rec.fate.period or 1) == 1:
            w = complex(rec.fate.value)
            val = g.eval(w)
            if val.kind == "finite" and abs(val.value) < 1e-8 * max(1.0, abs(w)):
                root = w
        fates.append(SingularFate(complex(z), rec, root))
    verdict = GUARANTEED if all(s.root is not None for s in fates) else OBSTRUCTED
    return SmaleReport([complex(z) for z in pts], fates, verdict)


# ---------------------------------------------------------------------------
# Integral targets  g(z) = int_0^z p(t) exp(q(t)) dt + c


def _simpson(fun, a: complex, b: complex, tol: float, depth: int = 40) -> complex:
    """Adaptive Simpson along the segment [a, b]."""

    def simp(fa, fm, fb, a, b):
        return (b - a) / 6 * (fa + 4 * fm + fb)

    def rec(a, b, fa, fm, fb, whole, tol, depth):
        m = (a + b) / 2
        lm, rm = (a + m) / 2, (m + b) / 2
        flm, frm = fun(lm), fun(rm)
        left, right = simp(fa, flm, fm, a, m), simp(fm, frm, fb, m, b)
        if depth <= 0 or abs(left + right - whole) <= 15 * tol:
            return left + right + (left + right - whole) / 15
        return rec(a, m, fa, flm, fm, left, tol / 2, depth - 1) + rec(m, b, fm, frm, fb, right, tol / 2, depth - 1)

    fa, fb, fm = fun(a), fun(b), fun((a + b) / 2)
    return rec(a, b, fa, fm, fb, simp(fa, fm, fb, a, b), tol, depth)


@dataclass
class IntegralTarget:
    """``g(z) = int_0^z p(t) exp(q(t)) dt + c`` for polynomials p and q."""

    p: MeroFn
    q: MeroFn
    c: complex = 0j
    quad_tol: float = 1e-12
    integrand: MeroFn = field(init=False)

    def __post_init__(self):
        self.p, self.q = fnkit.as_fn(self.p), fnkit.as_fn(self.q)
        if not (self.p.is_polynomial and self.q.is_polynomial):
            raise ValueError("p and q must be polynomials")
        self.integrand = MeroFn(fnkit.mul(self.p.ast, fnkit.func("exp", self.q.ast)))

    def _scalar(self, t: complex) -> complex:
        return complex(self.integrand.evaluate(np.array([t]))[0][0])

    def g(self, z) -> np.ndarray:
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        out = np.array([_simpson(self._scalar, 0j, complex(v), self.quad_tol) for v in z.ravel()])
        return (out + self.c).reshape(z.shape)

    def dg(self, z) -> np.ndarray:
        return self.integrand.evaluate(np.asarray(z, dtype=complex))[0]

    def newton(self, z) -> np.ndarray:
        return np.asarray(z) - self.g(z) / self.dg(z)

    def singular_points(self) -> np.ndarray:
        # g'' = (p' + p q') e^q
        cp = fnkit.poly_coeffs(self.p.ast)
        cq = fnkit.poly_coeffs(self.q.ast)
        P = np.polynomial.Polynomial
        poly = P(cp).deriv() + P(cp) * P(cq).deriv()
        coef = np.trim_zeros(poly.coef, "b")
        if coef.size <= 1:
            return np.array([], complex)
        pts = P(coef).roots().astype(complex)
        return pts[np.abs(self.dg(pts)) > 1e-10]

    def smale_test(self, max_iters: int = 200, tol: float = 1e-10) -> SmaleReport:
        fates = []
        pts = self.singular_points()
        for z0 in pts:
            z = complex(z0)
            orbit = [z]
            root = None
            for _ in range(max_iters):
                w = complex(self.newton(np.array([z]))[0])
                orbit.append(w)
                if not np.isfinite(w):
                    break
                if abs(w - z) < tol * max(1.0, abs(w)) and abs(self.g([w])[0]) < 1e-8:
                    root = w
                    break
                z = w
            fate = Fate(CONVERGED, value=root, period=1) if root is not None else Fate(UNDECIDED)
            fates.append(SingularFate(complex(z0), OrbitRecord(complex(z0), np.array(orbit), fate), root))
        verdict = GUARANTEED if all(s.root is not None for s in fates) else OBSTRUCTED
        return SmaleReport([complex(z) for z in pts], fates, verdict)


# ---------------------------------------------------------------------------
# Newton flow  dz/dt = -g/g'


@dataclass(frozen=True)
class FlowResult:
    kind: str  # FLOW_ROOT, FLOW_DIVERGED or FLOW_UNDERFLOW
    root: complex | None
    root_index: int
    t: float
    end: complex

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "root": None if self.root is None else _cjson(self.root),
            "t": self.t,
            "end": _cjson(self.end),
        }


def _velocity(g: MeroFn, g1: MeroFn, z):
    a, s0 = g.evaluate(z)
    b, s1 = g1.evaluate(z)
    with np.errstate(all="ignore"):
        v = -a / b
    bad = (s0 != FINITE) | (s1 != FINITE) | ~np.isfinite(v)
    return v, a, bad


def flow_many(
    setup: NewtonSetup,
    seeds,
    t_max: float = FLOW_T_MAX,
    dt: float = FLOW_DT,
    *,
    flow_tol: float = FLOW_TOL,
    dt_min: float = FLOW_DT_MIN,
    max_move: float = FLOW_MAX_MOVE,
):
    """Integrate the Newton flow from every seed with classical RK4.

    A step is halved (and retried) when a stage is undefined, moves more
    than ``max_move`` or sees the velocity change by more than half, which
    happens near zeros of ``g'``; after a success the step grows back toward
    ``dt``. Returns ``(kind, root_index, t, end)``
    arrays; kind codes are 0 root, 1 diverged, 2 step underflow.
    """
    g = setup.g
    g1 = g.derivative
    z = np.asarray(seeds, dtype=complex).ravel().copy()
    n = z.size
    t = np.zeros(n)
    step = np.full(n, dt)
    kind = np.full(n, 1, np.int8)
    done = np.zeros(n, bool)
    roots = setup.root_locations

    _, a, bad0 = _velocity(g, g1, z)
    hit = ~bad0 & (np.abs(a) < flow_tol)
    done |= hit
    kind[hit] = 0
    with np.errstate(all="ignore"):
        while True:
            act = np.nonzero(~done)[0]
            if act.size == 0:
                break
            zi, hi = z[act], np.minimum(step[act], t_max - t[act])
            k1, _, b1 = _velocity(g, g1, zi)
            k2, _, b2 = _velocity(g, g1, zi + 0.5 * hi * k1)
            k3, _, b3 = _velocity(g, g1, zi + 0.5 * hi * k2)
            k4, _, b4 = _velocity(g, g1, zi + hi * k3)
            move = hi * np.maximum.reduce([np.abs(k1), np.abs(k2), np.abs(k3), np.abs(k4)])
            # the field must stay roughly constant across the step, which fails
            # (and forces halving) on the approach to a zero of g'
            vary = np.maximum.reduce([np.abs(k2 - k1), np.abs(k3 - k1), np.abs(k4 - k1)])
            reject = b1 | b2 | b3 | b4 | ~(move <= max_move) | ~(vary <= FLOW_VARY * np.abs(k1))
            # rejected: halve
            rj = act[reject]
            step[rj] *= 0.5
            under = rj[step[rj] < dt_min]
            kind[under] = 2
            done[under] = True
            # accepted
            ok = ~reject
            ai = act[ok]
            z[ai] = zi[ok] + hi[ok] / 6 * (k1[ok] + 2 * k2[ok] + 2 * k3[ok] + k4[ok])
            t[ai] += hi[ok]
            step[ai] = np.minimum(step[ai] * 2, dt)
            _, a, bad = _velocity(g, g1, z[ai])
            arrived = ~bad & (np.abs(a) < flow_tol)
            kind[ai[arrived]] = 0
            timeout = ~arrived & (t[ai] >= t_max - 1e-12)
            lost = ~arrived & bad
            done[ai[arrived | timeout | lost]] = True
    idx = np.full(n, -1, np.int64)
    if roots.size:
        d = np.abs(z[:, None] - roots[None, :])
        near = np.argmin(d, axis=1)
        close = d[np.arange(n), near] <= ROOT_MATCH
        at_root = (kind == 0) & close
        idx[at_root] = near[at_root]
        kind[(kind == 0) & ~close] = 1
    else:
        kind[kind == 0] = 1
    return kind, idx, t, z


def flow_basin(
    setup: NewtonSetup,
    seed,
    t_max: float = FLOW_T_MAX,
    dt: float = FLOW_DT,
    *,
    flow_tol: float = FLOW_TOL,
    dt_min: float = FLOW_DT_MIN,
    raise_underflow: bool = False,
) -> FlowResult:
    """Follow the Newton flow from ``seed`` to a root, or report divergence."""
    seed = complex(seed)
    _, b, bad = _velocity(setup.g, setup.g.derivative, np.array([seed]))
    if bad[0]:
        raise ValueError(f"seed {seed} is at a zero of g' or a pole")
    kind, idx, t, end = flow_many(setup, [seed], t_max, dt, flow_tol=flow_tol, dt_min=dt_min)
    k = int(kind[0])
    if k == 2:
        if raise_underflow:
            raise StepUnderflow(f"step fell below {dt_min} near {complex(end[0])}")
        return FlowResult(FLOW_UNDERFLOW, None, -1, float(t[0]), complex(end[0]))
    if k == 0:
        i = int(idx[0])
        return FlowResult(FLOW_ROOT, complex(setup.roots[i].location), i, float(t[0]), complex(end[0]))
    return FlowResult(FLOW_DIVERGED, None, -1, float(t[0]), complex(end[0]))


# ---------------------------------------------------------------------------
# Basin measures


@dataclass
class BasinReport:
    h: complex
    box: tuple
    width: int
    height: int
    max_iters: int
    roots: list[complex]
    fractions: list[float]  # per root, under iteration of f_h
    nonconvergent: float
    flow_fractions: list[float] | None = None
    flow_nonconvergent: float | None = None
    flow_px: int | None = None
    off_root_cycles: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "h": _cjson(self.h),
            "box": list(self.box),
            "width": self.width,
            "height": self.height,
            "max_iters": self.max_iters,
            "roots": [_cjson(r) for r in self.roots],
            "fractions": self.fractions,
            "nonconvergent": self.nonconvergent,
            "flow_fractions": self.flow_fractions,
            "flow_nonconvergent": self.flow_nonconvergent,
            "flow_px": self.flow_px,
            "off_root_cycles": self.off_root_cycles,
        }


def root_labels(setup: NewtonSetup, seeds, max_iters: int = 200):
    """Index of the root each seed converges to under ``f_h`` (-1 if none), and the raw grid orbits."""
    seeds = np.asarray(seeds, dtype=complex)
    res = iterate_many(setup.f_h, seeds, max_iters, period_max=8)
    labels = np.full(seeds.shape, -1, np.int64)
    roots = setup.root_locations
    if roots.size == 0:
        return labels, res
    conv = (res.kind == GRID_CONVERGED) & (res.period == 1)
    d = np.abs(res.limit[..., None] - roots)
    near = np.argmin(np.where(np.isfinite(d), d, np.inf), axis=-1)
    close = np.take_along_axis(d, near[..., None], axis=-1)[..., 0] <= ROOT_MATCH
    sel = conv & close
    labels[sel] = near[sel]
    return labels, res


def basin_measures(
    setups,
    box,
    w: int,
    h_px: int,
    max_iters: int = 500,
    *,
    flow: bool = True,
    flow_px: int | None = None,
    t_max: float = FLOW_T_MAX,
) -> list[BasinReport]:
    """Per-root basin fractions on a ``w x h_px`` grid, one report per setup.

    The flow baseline is computed once (it does not depend on h) on a
    ``flow_px``-square grid, by default ``min(w, 64)``.
    """
    setups = list(setups)
    if not setups:
        return []
    g_text = setups[0].g.text
    if any(s.g.text != g_text for s in setups):
        raise ValueError("all setups must share g")
    box = check_box(box)
    centers = grid_centers(box, w, h_px)
    total = centers.size
    flow_res = None
    if flow:
        fp = flow_px or min(w, 64)
        fk, fi, _, _ = flow_many(setups[0], grid_centers(box, fp, fp).ravel(), t_max)
        nr = len(setups[0].roots)
        ffrac = [float(np.count_nonzero(fi == r)) / fi.size for r in range(nr)]
        flow_res = (ffrac, 1.0 - sum(ffrac), fp)

    reports = []
    for s in setups:
        labels, res = root_labels(s, centers, max_iters)
        nr = len(s.roots)
        frac = [float(np.count_nonzero(labels == r)) / total for r in range(nr)]
        cycles = []
        other = (res.kind == GRID_CONVERGED) & (labels < 0)
        if other.any():
            for c in dedup_points(res.limit[other], 1e-4):
                per = int(res.period[other][np.argmin(np.abs(res.limit[other] - c))])
                lam = cycle_multiplier(s.f_h, c, per)
                if abs(lam) < 1:
                    share = float(np.count_nonzero(other & (np.abs(res.limit - c) < 1e-4))) / total
                    cycles.append({"representative": _cjson(c), "period": per, "multiplier": _cjson(lam), "fraction": share})
        rep = BasinReport(
            s.h, box, w, h_px, max_iters, [r.location for r in s.roots], frac, 1.0 - sum(frac), off_root_cycles=cycles
        )
        if flow_res is not None:
            rep.flow_fractions, rep.flow_nonconvergent, rep.flow_px = flow_res
        reports.append(rep)
    return reports


def basin_grid(setup: NewtonSetup, box, w: int, h_px: int, max_iters: int = 500):
    """RasterGrid whose Converged cells carry the root index as cycle id."""
    box = check_box(box)
    labels, _ = root_labels(setup, grid_centers(box, w, h_px), max_iters)
    kind = np.where(labels >= 0, CELL_CONVERGED, 0).astype(np.uint8)
    data = labels.astype(np.int32)
    params = {"g": setup.g.text, "h": _cjson(setup.h), "max_iters": max_iters}
    cycles = [(r.location, 1) for r in setup.roots]
    return RasterGrid(box, w, h_px, kind, data, "newton", params, cycles)
