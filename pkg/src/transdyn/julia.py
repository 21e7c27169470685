"""Julia-set rasters: escape time, backward-orbit accumulation, escape boundary.

Grids are stored top row first (row 0 has the largest imaginary part), the
same order in which the PGM writer emits rows.
"""
from __future__ import annotations

import json
import re
import struct
import warnings
import zlib
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import fnkit
from ._solve import check_box, dedup_points
from .fnkit import INFINITY, MeroFn
from .orbit import (
    CONV_TOL,
    DEDUP_TOL,
    ESCAPE_RADIUS,
    GRID_CONVERGED,
    GRID_ESCAPED,
    GRID_POLE,
    _solve_level,
    backward_levels,
    iterate_many,
)

# cell codes
UNDECIDED = 0
ESCAPE = 1
CONVERGED = 2
POLE = 3
JNEAR = 4

CODE_NAMES = {UNDECIDED: "Undecided", ESCAPE: "EscapeStep", CONVERGED: "Converged", POLE: "PoleHit", JNEAR: "JNear"}

# gray levels
GRAY_UNDECIDED = 0
GRAY_POLE = 40
GRAY_CONVERGED = (64, 72, 80, 88)
GRAY_ESCAPE = (96, 254)
GRAY_JNEAR = 255

LEVEL_CAP = 50_000


@dataclass
class RasterGrid:
    box: tuple[float, float, float, float]
    width: int
    height: int
    kind: np.ndarray  # uint8 (height, width), one of the cell codes
    data: np.ndarray  # int32: escape step, cycle id or pole step; -1 otherwise
    method: str = ""
    params: dict = field(default_factory=dict)
    cycles: list = field(default_factory=list)  # (limit, period) per cycle id
    rep: np.ndarray | None = None  # complex point that marked a JNear cell (nan if none)

    @property
    def cell_size(self) -> tuple[float, float]:
        x0, x1, y0, y1 = self.box
        return (x1 - x0) / self.width, (y1 - y0) / self.height

    def centers(self) -> np.ndarray:
        return grid_centers(self.box, self.width, self.height)

    def cell_index(self, z):
        """(row, col, inside) for points z; row/col are clipped where outside."""
        x0, x1, y0, y1 = self.box
        dx, dy = self.cell_size
        z = np.asarray(z, dtype=complex)
        col = np.floor((z.real - x0) / dx)
        row = np.floor((y1 - z.imag) / dy)
        inside = np.isfinite(z) & (col >= 0) & (col < self.width) & (row >= 0) & (row < self.height)
        col = np.clip(np.nan_to_num(col), 0, self.width - 1).astype(int)
        row = np.clip(np.nan_to_num(row), 0, self.height - 1).astype(int)
        return row, col, inside

    @property
    def jnear(self) -> np.ndarray:
        return self.kind == JNEAR

    def counts(self) -> dict[str, int]:
        return {CODE_NAMES[c]: int(np.count_nonzero(self.kind == c)) for c in CODE_NAMES}

    def metadata(self) -> dict:
        return {
            "box": list(self.box),
            "width": self.width,
            "height": self.height,
            "method": self.method,
            "params": self.params,
            "counts": self.counts(),
            "cycles": [{"limit": [c.real, c.imag], "period": int(p)} for c, p in self.cycles],
            "legend": legend(),
            "layout": "row-major, top row = max Im, cell-center sampling",
        }


def legend() -> dict:
    return {
        "Undecided": GRAY_UNDECIDED,
        "PoleHit": GRAY_POLE,
        "Converged": f"{GRAY_CONVERGED[0]}-{GRAY_CONVERGED[-1]} by cycle id mod {len(GRAY_CONVERGED)}",
        "EscapeStep": f"{GRAY_ESCAPE[0]}-{GRAY_ESCAPE[1]} histogram-equalized (earlier escape = darker)",
        "JNear": GRAY_JNEAR,
    }


def grid_centers(box, w: int, h: int) -> np.ndarray:
    """Cell centers, shape (h, w), row 0 at the top."""
    x0, x1, y0, y1 = box
    xs = x0 + (np.arange(w) + 0.5) * (x1 - x0) / w
    ys = y1 - (np.arange(h) + 0.5) * (y1 - y0) / h
    return xs[None, :] + 1j * ys[:, None]


def _cycle_ids(limit: np.ndarray, period: np.ndarray, mask: np.ndarray):
    """Assign deterministic ids to distinct limit cycles (sorted by Re, Im)."""
    ids = np.full(limit.shape, -1, np.int32)
    if not mask.any():
        return ids, []
    reps = dedup_points(limit[mask], 1e-4)
    cycles = []
    for k, c in enumerate(reps):
        sel = mask & (np.abs(limit - c) < 1e-4) & (ids < 0)
        ids[sel] = k
        cycles.append((complex(c), int(period[sel][0]) if sel.any() else 0))
    return ids, cycles


def raster_escape(
    f: MeroFn,
    box,
    w: int,
    h: int,
    max_iters: int = 200,
    *,
    escape_radius: float = ESCAPE_RADIUS,
    period_max: int = 8,
) -> RasterGrid:
    """Escape-time raster. Cells record the first step beyond ``escape_radius``.

    The boundary of the escaping region is the Julia set for entire maps;
    for maps with poles the picture is only a heuristic, and a warning is
    issued.
    """
    f = fnkit.as_fn(f)
    box = check_box(box)
    if f.fn_class != fnkit.CLASS_E:
        warnings.warn(f"escape-time raster of a class {f.fn_class} map is heuristic", stacklevel=2)
    g = iterate_many(f, grid_centers(box, w, h), max_iters, escape_radius=escape_radius, period_max=period_max)
    kind = np.zeros((h, w), np.uint8)
    data = np.full((h, w), -1, np.int32)
    esc = g.kind == GRID_ESCAPED
    kind[esc] = ESCAPE
    data[esc] = g.step[esc]
    pole = g.kind == GRID_POLE
    kind[pole] = POLE
    data[pole] = g.step[pole]
    conv = g.kind == GRID_CONVERGED
    ids, cycles = _cycle_ids(g.limit, g.period, conv)
    kind[conv] = CONVERGED
    data[conv] = ids[conv]
    params = {"fn": f.text, "max_iters": max_iters, "escape_radius": escape_radius, "period_max": period_max}
    return RasterGrid(box, w, h, kind, data, "escape", params, cycles)


def _thin(points: np.ndarray, box, cap: int, w: int, h: int) -> np.ndarray:
    """Stratified subset of at most ``cap`` points: evenly spaced in cell order."""
    if points.size <= cap:
        return points
    x0, x1, y0, y1 = box
    col = np.floor((points.real - x0) / (x1 - x0) * w)
    row = np.floor((y1 - points.imag) / (y1 - y0) * h)
    order = np.lexsort((points.imag, points.real, col, row))
    pick = np.linspace(0, points.size - 1, cap).astype(int)
    return points[order[pick]]


def raster_preimage(
    f: MeroFn,
    box,
    w: int,
    h: int,
    depth: int,
    *,
    target=INFINITY,
    grid_n: int = 48,
    pad: float = 0.5,
    level_cap: int = LEVEL_CAP,
    conv_tol: float = CONV_TOL,
) -> RasterGrid:
    """Mark cells containing points of the backward orbit of ``target`` up to ``depth``.

    Levels are solved in ``box`` enlarged by ``pad`` times its size on each
    side, so that preimages routed through points just outside the view are
    found. Each level is capped at ``level_cap`` points by stratified thinning.
    The point that marked a cell is kept in ``rep``.
    """
    f = fnkit.as_fn(f)
    box = check_box(box)
    x0, x1, y0, y1 = box
    px, py = pad * (x1 - x0), pad * (y1 - y0)
    search = (x0 - px, x1 + px, y0 - py, y1 + py)
    failures: dict = {}
    levels = _levels_capped(f, target, depth, search, grid_n, conv_tol, level_cap, w, h, failures)
    kind = np.zeros((h, w), np.uint8)
    data = np.full((h, w), -1, np.int32)
    rep = np.full((h, w), np.nan + 0j, complex)
    grid = RasterGrid(box, w, h, kind, data, "preimage", {}, [], rep)
    for d, level in enumerate(levels, start=1):
        row, col, inside = grid.cell_index(level)
        row, col, pts = row[inside], col[inside], level[inside]
        # first point in sorted order wins, so the result is order independent
        fresh = kind[row, col] != JNEAR
        for r, c, p in zip(row[fresh], col[fresh], pts[fresh]):
            if kind[r, c] != JNEAR:
                kind[r, c] = JNEAR
                data[r, c] = d
                rep[r, c] = p
    grid.params = {
        "fn": f.text,
        "depth": depth,
        "target": "inf" if target is INFINITY else [complex(target).real, complex(target).imag],
        "grid_n": grid_n,
        "pad": pad,
        "level_sizes": [int(lv.size) for lv in levels],
        "failures": dict(sorted(failures.items())),
    }
    return grid


def _levels_capped(f, target, depth, search, grid_n, conv_tol, cap, w, h, failures):
    levels = []
    for d in range(1, depth + 1):
        if d == 1:
            lv = backward_levels(f, target, 1, search, grid_n, conv_tol=conv_tol, failures=failures)[0]
        else:
            prev = _thin(levels[-1], search, cap, w, h)
            lv = _next_level(f, prev, search, grid_n, conv_tol, failures)
        levels.append(_thin(lv, search, cap, w, h))
    return levels


def _next_level(f, targets, search, grid_n, conv_tol, failures):
    return _solve_level(f, targets, search, grid_n, conv_tol=conv_tol, dedup_tol=DEDUP_TOL, failures=failures)


def boundary_extract(grid: RasterGrid) -> RasterGrid:
    """Mark JNear where a cell and its 4 neighbours mix escaping and non-escaping codes."""
    esc = grid.kind == ESCAPE
    pad = np.pad(esc, 1, mode="edge")
    stack = np.stack([pad[1:-1, 1:-1], pad[:-2, 1:-1], pad[2:, 1:-1], pad[1:-1, :-2], pad[1:-1, 2:]])
    mixed = stack.any(axis=0) & ~stack.all(axis=0)
    kind = grid.kind.copy()
    kind[mixed] = JNEAR
    params = dict(grid.params, boundary_of=grid.method)
    return replace(grid, kind=kind, data=grid.data.copy(), method="boundary", params=params)


def real_axis_transitions(grid: RasterGrid) -> list[tuple[int, float, float]]:
    """Code changes to or from EscapeStep along the row(s) closest to Im = 0.

    Returns ``(row, x_left, x_right)`` for each pair of adjacent cell centers
    whose escape status differs.
    """
    cen = grid.centers()
    dist = np.abs(cen[:, 0].imag)
    rows = np.nonzero(np.isclose(dist, dist.min(), rtol=0, atol=1e-12))[0]
    out = []
    xs = cen[0].real
    for r in rows:
        esc = grid.kind[r] == ESCAPE
        for j in np.nonzero(esc[1:] != esc[:-1])[0]:
            out.append((int(r), float(xs[j]), float(xs[j + 1])))
    return out


# ---------------------------------------------------------------------------
# Images


def gray_levels(grid: RasterGrid) -> np.ndarray:
    """uint8 image of the grid per :func:`legend`."""
    img = np.full(grid.kind.shape, GRAY_UNDECIDED, np.uint8)
    img[grid.kind == POLE] = GRAY_POLE
    conv = grid.kind == CONVERGED
    shades = np.asarray(GRAY_CONVERGED, np.uint8)
    img[conv] = shades[grid.data[conv] % len(shades)]
    esc = grid.kind == ESCAPE
    if esc.any():
        steps = grid.data[esc]
        values, counts = np.unique(steps, return_counts=True)
        cdf = np.cumsum(counts) / steps.size
        lo, hi = GRAY_ESCAPE
        level = lo + np.round((hi - lo) * cdf).astype(int)
        img[esc] = level[np.searchsorted(values, steps)].astype(np.uint8)
    img[grid.kind == JNEAR] = GRAY_JNEAR
    return img


def pgm_bytes(img: np.ndarray) -> bytes:
    img = np.ascontiguousarray(img, dtype=np.uint8)
    h, w = img.shape
    return f"P5\n{w} {h}\n255\n".encode("ascii") + img.tobytes()


def png_bytes(img: np.ndarray) -> bytes:
    """8-bit grayscale PNG, no filtering."""
    img = np.ascontiguousarray(img, dtype=np.uint8)
    h, w = img.shape

    def chunk(tag: bytes, body: bytes) -> bytes:
        return struct.pack(">I", len(body)) + tag + body + struct.pack(">I", zlib.crc32(tag + body) & 0xFFFFFFFF)

    raw = b"".join(b"\x00" + img[r].tobytes() for r in range(h))
    ihdr = struct.pack(">IIBBBBB", w, h, 8, 0, 0, 0, 0)
    return b"\x89PNG\r\n\x1a\n" + chunk(b"IHDR", ihdr) + chunk(b"IDAT", zlib.compress(raw, 9)) + chunk(b"IEND", b"")


def read_pgm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    m = re.match(rb"P5\s+(\d+)\s+(\d+)\s+255\s", data)
    if m is None:
        raise ValueError("not an 8-bit P5 file")
    w, h = int(m.group(1)), int(m.group(2))
    return np.frombuffer(data[m.end() :], np.uint8).reshape(h, w)


def save_grid(grid: RasterGrid, path, *, png: bool = False) -> list[Path]:
    """Write ``<path>.pgm`` plus a ``<path>.json`` sidecar (and ``.png`` if asked)."""
    base = Path(path)
    if base.suffix in (".pgm", ".png", ".json"):
        base = base.with_suffix("")
    img = gray_levels(grid)
    written = [base.with_suffix(".pgm"), base.with_suffix(".json")]
    written[0].write_bytes(pgm_bytes(img))
    written[1].write_text(json.dumps(grid.metadata(), sort_keys=True, indent=2) + "\n", encoding="utf-8")
    if png:
        p = base.with_suffix(".png")
        p.write_bytes(png_bytes(img))
        written.append(p)
    return written
