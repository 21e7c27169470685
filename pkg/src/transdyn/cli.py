"""Command-line driver: ``transdyn <subcommand> [options]``.

Exit status 0 on success, 1 on configuration errors, 2 on runtime errors;
errors are reported as one JSON object on stderr. Reports are JSON with
sorted keys, so identical configurations give identical files.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import warnings
from pathlib import Path

import numpy as np

from . import bouquet, catalog, fatou, fnkit, julia, newton, orbit, periodic

DEFAULT_BOX = (-4.0, 4.0, -4.0, 4.0)


class ConfigError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _common(p: argparse.ArgumentParser, fn: bool = True):
    if fn:
        src = p.add_mutually_exclusive_group()
        src.add_argument("--fn", help="expression in z, e.g. 'z + 1 + exp(-z)'")
        src.add_argument("--catalog", help="catalog key: " + ", ".join(sorted(catalog.CATALOG)))
    p.add_argument("--out", help="report path (default: stdout)")
    p.add_argument("--config", help="JSON file with option values")
    p.add_argument("--threads", type=int, help="worker cap (default: $TD_THREADS)")
    p.add_argument("--seed", type=int, default=42, help="random seed (default 42)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="transdyn", description="Iteration of entire and meromorphic functions.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("orbit", help="forward orbit with fate")
    _common(p)
    p.add_argument("--z0", type=float, nargs=2, default=(0.0, 0.0), metavar=("RE", "IM"))
    p.add_argument("--iters", type=int, default=1000)
    p.add_argument("--escape-radius", type=float, default=orbit.ESCAPE_RADIUS)

    p = sub.add_parser("periodic", help="periodic points of a given period")
    _common(p)
    p.add_argument("--period", type=int, default=1)
    p.add_argument("--box", type=float, nargs=4, default=DEFAULT_BOX, metavar=("X0", "X1", "Y0", "Y1"))
    p.add_argument("--grid", type=int, default=100)

    p = sub.add_parser("classify", help="Fatou component fate of a seed")
    _common(p)
    p.add_argument("--z0", type=float, nargs=2, default=(0.0, 0.0), metavar=("RE", "IM"))
    p.add_argument("--iters", type=int, default=fatou.BUDGET)

    p = sub.add_parser("julia", help="Julia set raster (PGM + JSON sidecar)")
    _common(p)
    p.add_argument("--box", type=float, nargs=4, default=DEFAULT_BOX, metavar=("X0", "X1", "Y0", "Y1"))
    p.add_argument("--px", type=int, default=400, help="width in pixels")
    p.add_argument("--py", type=int, help="height in pixels (default: same as --px)")
    p.add_argument("--method", choices=("escape", "preimage", "boundary"), default="escape")
    p.add_argument("--depth", type=int, default=2)
    p.add_argument("--iters", type=int, default=200)
    p.add_argument("--png", action="store_true", help="also write a PNG")

    p = sub.add_parser("newton", help="Newton maps: singular orbits, basins, flow")
    _common(p, fn=False)
    p.add_argument("mode", choices=("smale", "basins", "flow"))
    p.add_argument("--g", required=True, help="target function g")
    p.add_argument("--h", type=float, nargs="+", default=[1.0], help="relaxation value(s)")
    p.add_argument("--box", type=float, nargs=4, default=(-2.0, 2.0, -2.0, 2.0), metavar=("X0", "X1", "Y0", "Y1"))
    p.add_argument("--px", type=int, default=200)
    p.add_argument("--iters", type=int, default=500)
    p.add_argument("--z0", type=float, nargs=2, default=(1.0, 0.0), metavar=("RE", "IM"))
    p.add_argument("--no-flow", action="store_true", help="skip the flow baseline in basins mode")

    p = sub.add_parser("bouquet", help="Cantor bouquet itineraries of lambda*exp(z)")
    _common(p, fn=False)
    p.add_argument("--lambda", dest="lam", type=float, default=0.3)
    p.add_argument("--N", type=int, default=1)
    p.add_argument("--itinerary", help="comma-separated symbols, e.g. '1,0,-1,0'")
    p.add_argument("--depth", type=int, default=10)
    p.add_argument("--k", type=int, default=8)
    p.add_argument("--count", type=int, default=10, help="random itineraries when --itinerary is absent")
    parser.commands = sub.choices
    return parser


# ---------------------------------------------------------------------------


def _load_config(argv):
    """Pull option values from ``--config`` (if any) before the real parse."""
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return {}
    try:
        cfg = json.loads(Path(known.config).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {known.config}: {exc}") from None
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    return {k.replace("-", "_"): v for k, v in cfg.items()}


def parse_args(argv=None) -> argparse.Namespace:
    """Parse flags; values from ``--config`` act as defaults that flags override."""
    argv = list(sys.argv[1:] if argv is None else argv)
    cfg = _load_config(argv)
    parser = build_parser()
    commands = parser.commands
    command = cfg.pop("command", None)
    if command is not None and not any(a in commands for a in argv):
        argv = [str(command)] + argv
    for sp in commands.values():
        known = {a.dest for a in sp._actions}
        sp.set_defaults(**{k: v for k, v in cfg.items() if k in known})
    args = parser.parse_args(argv)
    if args.command is None:
        raise ConfigError("missing subcommand")
    unknown = set(cfg) - {a.dest for a in commands[args.command]._actions}
    if unknown:
        raise ConfigError(f"unknown config keys for {args.command}: {sorted(unknown)}")
    if args.threads is None:
        env = os.environ.get("TD_THREADS", "")
        args.threads = int(env) if env.isdigit() else 1
    if args.threads < 1:
        raise ConfigError("--threads must be >= 1")
    return args


def _function(args) -> fnkit.MeroFn:
    if getattr(args, "catalog", None):
        try:
            return catalog.iteration_map(args.catalog)
        except KeyError as exc:
            raise ConfigError(str(exc.args[0])) from None
    if getattr(args, "fn", None):
        try:
            return fnkit.parse(args.fn)
        except SyntaxError as exc:
            raise ConfigError(str(exc)) from None
    raise ConfigError("one of --fn or --catalog is required")


def _box(args):
    try:
        return tuple(float(v) for v in orbit.check_box(args.box))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _emit(args, report, summary: str):
    text = json.dumps(report, sort_keys=True, indent=1) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
        print(summary)
    else:
        sys.stdout.write(text)


def _z0(args) -> complex:
    return complex(args.z0[0], args.z0[1])


# ---------------------------------------------------------------------------


def cmd_orbit(args):
    f = _function(args)
    rec = orbit.iterate(f, _z0(args), args.iters, escape_radius=args.escape_radius)
    d = rec.to_dict()
    d["fn"] = f.text
    _emit(args, d, f"orbit of {f.text} from {_z0(args)}: {rec.fate.kind} after {len(rec.points) - 1} steps")


def cmd_periodic(args):
    f = _function(args)
    if args.period < 1 or args.grid < 1:
        raise ConfigError("period and grid must be positive")
    res = periodic.find_periodic(f, args.period, _box(args), args.grid)
    report = {
        "fn": f.text,
        "period": args.period,
        "box": list(args.box),
        "grid": args.grid,
        "points": [p.to_dict() for p in res],
        "failures": dict(sorted(res.failures.items())),
    }
    kinds: dict[str, int] = {}
    for p in res:
        kinds[str(p.stability)] = kinds.get(str(p.stability), 0) + 1
    _emit(args, report, f"{len(res)} cycles of period {args.period} for {f.text}: {kinds}")


def cmd_classify(args):
    f = _function(args)
    label = fatou.classify_seed(f, _z0(args), args.iters)
    d = label.to_dict()
    d["fn"] = f.text
    d["seed"] = orbit._cjson(_z0(args))
    _emit(args, d, f"{f.text} from {_z0(args)}: {label.summary()}")


def cmd_julia(args):
    f = _function(args)
    box = _box(args)
    w = args.px
    h = args.py or args.px
    if w < 1 or h < 1:
        raise ConfigError("pixel counts must be positive")
    if args.method == "preimage":
        grid = julia.raster_preimage(f, box, w, h, args.depth)
    else:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            grid = julia.raster_escape(f, box, w, h, args.iters)
        if args.method == "boundary":
            grid = julia.boundary_extract(grid)
    stem = args.out or "julia"
    files = julia.save_grid(grid, stem, png=args.png)
    print(f"{args.method} raster of {f.text}: {grid.counts()} -> {', '.join(str(p) for p in files)}")


def cmd_newton(args):
    try:
        g = fnkit.parse(args.g)
    except SyntaxError as exc:
        raise ConfigError(str(exc)) from None
    box = _box(args)
    try:
        setups = [newton.make_relaxed(g, h, box=box) for h in args.h]
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if args.mode == "smale":
        rep = newton.smale_test(setups[0], box)
        d = rep.to_dict()
        d["g"] = g.text
        d["roots"] = [r.to_dict() for r in setups[0].roots]
        cycles = [
            f"{s.point}: period-{s.record.fate.period} cycle at {s.record.fate.value}"
            for s in rep.obstructions()
            if s.record.fate.kind == orbit.CYCLE
        ]
        _emit(args, d, f"{rep.verdict} for {g.text}" + ("; " + "; ".join(cycles) if cycles else ""))
    elif args.mode == "basins":
        reps = newton.basin_measures(setups, box, args.px, args.px, args.iters, flow=not args.no_flow)
        trend = [r.nonconvergent for r in reps]
        _emit(args, {"g": g.text, "reports": [r.to_dict() for r in reps]}, f"nonconvergent fraction by h {args.h}: {trend}")
    else:
        res = newton.flow_basin(setups[0], _z0(args))
        d = res.to_dict()
        d["g"] = g.text
        _emit(args, d, f"flow from {_z0(args)}: {res.kind} {res.root if res.root is not None else ''}")


def cmd_bouquet(args):
    try:
        cfg = bouquet.configure(args.lam, args.N)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if args.itinerary:
        try:
            its = [tuple(int(v) for v in args.itinerary.split(","))]
        except ValueError:
            raise ConfigError(f"bad itinerary {args.itinerary!r}") from None
    else:
        its = bouquet.random_itineraries(cfg, args.count, args.depth, args.seed)
    for s in its:
        if any(abs(v) > cfg.N for v in s):
            raise ConfigError(f"itinerary {s} has symbols beyond N={cfg.N}")
        if len(s) < args.k + 1:
            raise ConfigError(f"itinerary {s} shorter than k+1={args.k + 1}")
    report = json.loads(bouquet.report(cfg, its, args.k))
    passed = sum(r["conjugacy"] for r in report["endpoints"])
    _emit(args, report, f"lambda={cfg.lam} N={cfg.N} c={cfg.c}: conjugacy {passed}/{len(its)}")


COMMANDS = {
    "orbit": cmd_orbit,
    "periodic": cmd_periodic,
    "classify": cmd_classify,
    "julia": cmd_julia,
    "newton": cmd_newton,
    "bouquet": cmd_bouquet,
}


def _fail(code: int, kind: str, message: str) -> int:
    sys.stderr.write(json.dumps({"error": kind, "message": message}, sort_keys=True) + "\n")
    return code


def main(argv=None) -> int:
    try:
        args = parse_args(argv)
    except ConfigError as exc:
        return _fail(1, "config", str(exc))
    try:
        with np.errstate(all="ignore"):
            COMMANDS[args.command](args)
    except ConfigError as exc:
        return _fail(1, "config", str(exc))
    except Exception as exc:  # noqa: BLE001 - every runtime failure maps to exit 2
        return _fail(2, type(exc).__name__, str(exc))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
