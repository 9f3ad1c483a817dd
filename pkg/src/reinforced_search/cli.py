"""Command-line entry point.

Subcommands: ``single-run``, ``sweep-noise``, ``sweep-r``, ``scaling`` and
``selftest``. Every data-producing command writes CSV files plus a JSON
manifest with SHA-256 checksums into the output directory (``--out``, else
``$REINFORCED_SEARCH_OUT``, else the working directory).

Exit codes: 0 success, 2 configuration error, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import datetime as dt
import hashlib
import io
import json
import logging
import os
import sys
from decimal import Decimal, InvalidOperation
from pathlib import Path

from . import __version__
from .greedy import GreedySettings
from .harness import ExperimentConfig, run_scaling, run_sweep, scaling_fits
from .noise import MECHANISMS, NoiseSpec
from .problem import ScheduleSpec, build_instance
from .engine import run_schedule

log = logging.getLogger("reinforced_search")

OUT_ENV = "REINFORCED_SEARCH_OUT"
EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3


class ConfigError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: config error: {message}\n")


# --- value parsing ----------------------------------------------------------

def parse_grid(text: str) -> tuple:
    """'0:5:0.25' (inclusive range) or '0,1,2' -> tuple of floats."""
    text = str(text).strip()
    try:
        if ":" in text:
            start, stop, step = (Decimal(p) for p in text.split(":"))
            if step <= 0 or stop < start:
                raise ConfigError(f"bad range {text!r}")
            n = int((stop - start) / step)
            return tuple(float(start + k * step) for k in range(n + 1))
        return tuple(float(Decimal(p)) for p in text.split(",") if p.strip())
    except (InvalidOperation, ValueError) as exc:
        raise ConfigError(f"cannot parse grid {text!r}") from exc


def parse_sizes(text: str) -> tuple:
    values = parse_grid(text)
    if any(v != int(v) for v in values):
        raise ConfigError(f"sizes must be integers: {text!r}")
    return tuple(int(v) for v in values)


def fmt(x) -> str:
    """Fixed CSV number format: 17 significant digits, scientific."""
    if x is None:
        return "nan"
    if isinstance(x, bool):
        return str(int(x))
    if isinstance(x, int):
        return str(x)
    return f"{float(x):.16e}"


def _csv_bytes(header, rows) -> bytes:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow(row)
    return buf.getvalue().encode()


class OutputDir:
    def __init__(self, path: Path):
        self.path = path
        self.files = {}
        try:
            path.mkdir(parents=True, exist_ok=True)
            probe = path / ".write-probe"
            probe.write_bytes(b"")
            probe.unlink()
        except OSError as exc:
            raise ConfigError(f"output path not writable: {path} ({exc.strerror})") from exc

    def write(self, name: str, data: bytes):
        (self.path / name).write_bytes(data)
        self.files[name] = hashlib.sha256(data).hexdigest()

    def manifest(self, command: str, config: dict, seed, started: str):
        doc = {
            "tool": "reinforced-search",
            "version": __version__,
            "command": command,
            "config": config,
            "master_seed": seed,
            "files": dict(sorted(self.files.items())),
            "started": started,
            "finished": dt.datetime.now(dt.timezone.utc).isoformat(),
        }
        (self.path / "manifest.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


# --- configuration ----------------------------------------------------------

_GRID_KEYS = {"r_grid", "eps_grid"}


def _load_config_file(path):
    if path is None:
        return {}
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a JSON object")
    known = {f.name for f in dataclasses.fields(ExperimentConfig)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    return data


def _coerce(key, value):
    if key in _GRID_KEYS:
        return parse_grid(value) if isinstance(value, str) else tuple(float(v) for v in value)
    if key == "sizes":
        return parse_sizes(value) if isinstance(value, str) else tuple(int(v) for v in value)
    if key == "greedy":
        return value if isinstance(value, GreedySettings) else GreedySettings(**value)
    return value


def resolve_config(args, defaults: dict) -> ExperimentConfig:
    """Flags override config-file values, which override command defaults."""
    merged = dict(defaults)
    merged.update(_load_config_file(getattr(args, "config", None)))
    n_sizes, d_sizes = getattr(args, "n_sizes", None), getattr(args, "d_sizes", None)
    if n_sizes and d_sizes:
        raise ConfigError("give either --n or --d, not both")
    if n_sizes or d_sizes:
        merged["sizes"] = n_sizes or d_sizes
        merged.setdefault("encoding", "qubit" if n_sizes else "qudit")
    for key in ("encoding", "schedule", "layers", "delta", "realizations", "master_seed",
                "workers", "weights", "max_layers", "density", "engine", "mechanism",
                "sizes", "r_grid", "eps_grid"):
        val = getattr(args, key, None)
        if val is not None:
            merged[key] = val
    if "greedy" not in merged and getattr(args, "grid", None):
        merged["greedy"] = GreedySettings(grid=args.grid)
    try:
        cfg = ExperimentConfig(**{k: _coerce(k, v) for k, v in merged.items()})
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    if cfg.layers is not None and cfg.layers < 2 and cfg.delta is None:
        raise ConfigError("layers must be >= 2")
    return cfg


# --- commands ---------------------------------------------------------------

def _sweep(args, defaults, out: OutputDir):
    cfg = resolve_config(args, defaults)
    result = run_sweep(cfg)
    out.write("sweep.csv", _csv_bytes(
        ["point_key", "eps", "r", "realization", "seed", "p_success"],
        [[r.point_key, fmt(r.eps), fmt(r.r), r.realization, r.seed, fmt(r.p_success)]
         for r in result.rows]))
    out.write("aggregate.csv", _csv_bytes(
        ["point_key", "eps", "r", "n", "mean_p", "stderr"],
        [[a.point_key, fmt(a.eps), fmt(a.r), a.stats.n if a.stats else 0,
          fmt(a.stats.mean if a.stats else None), fmt(a.stats.stderr if a.stats else None)]
         for a in result.aggregates]))
    failed = sum(a.failed for a in result.aggregates)
    for a in result.aggregates:
        if a.stats:
            se = "n/a" if a.stats.stderr is None else f"{a.stats.stderr:.4f}"
            print(f"{a.point_key}: mean P = {a.stats.mean:.6f}  stderr = {se}  n = {a.stats.n}")
    if failed:
        log.warning("%d runs failed and were left out of the aggregates", failed)
    return cfg


def cmd_sweep_noise(args, out):
    defaults = dict(r_grid=(0.0, 1.0), eps_grid=(0.0, 1.0, 2.0, 3.0), layers=50)
    return _sweep(args, defaults, out)


def cmd_sweep_r(args, out):
    defaults = dict(r_grid=parse_grid("0:5:0.25"), eps_grid=(0.0,), layers=10)
    return _sweep(args, defaults, out)


def cmd_scaling(args, out):
    defaults = dict(layers=None, delta=0.5, realizations=1)
    cfg = resolve_config(args, defaults)
    rows = run_scaling(cfg)
    out.write("scaling.csv", _csv_bytes(
        ["dim", "eps", "r", "delta", "L", "status"],
        [[r.dim, fmt(r.eps), fmt(r.r), fmt(r.delta), "" if r.layers is None else r.layers, r.status]
         for r in rows]))
    fits = scaling_fits(rows)
    out.write("fits.csv", _csv_bytes(
        ["eps", "r", "delta", "model", "slope", "intercept", "r2", "n_points"],
        [[fmt(e), fmt(r), fmt(d), f.model, fmt(f.slope), fmt(f.intercept), fmt(f.r2), f.domain[2]]
         for e, r, d, f in fits]))
    for r in rows:
        print(f"dim={r.dim} eps={r.eps:g} r={r.r:g}: L={r.layers} ({r.status})")
    for e, r, d, f in fits:
        print(f"fit eps={e:g} r={r:g} delta={d:g} {f.model}: slope={f.slope:.4f} R2={f.r2:.4f}")
    return cfg


def cmd_single_run(args, out):
    defaults = dict(layers=10, realizations=1)
    cfg = resolve_config(args, defaults)
    if len(cfg.sizes) != 1 or len(cfg.r_grid) != 1 or len(cfg.eps_grid) != 1:
        raise ConfigError("single-run takes exactly one size, one r and one eps")
    inst = build_instance(cfg.encoding, cfg.sizes[0])
    noise = NoiseSpec(cfg.mechanism, cfg.eps_grid[0], cfg.master_seed, cfg.weights)
    if cfg.schedule == "grover":
        schedule = ScheduleSpec.grover_spec(cfg.layers)
    else:
        schedule = ScheduleSpec.greedy_spec(cfg.layers, cfg.greedy)
    try:
        trace = run_schedule(inst, schedule, cfg.r_grid[0], noise, cfg.density)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    out.write("trace.csv", _csv_bytes(
        ["layer", "A", "B", "r", "p_success", "diagnostic"],
        [[rec.layer, fmt(rec.A), fmt(rec.B), fmt(rec.r), fmt(rec.p_success), fmt(rec.diagnostic)]
         for rec in trace.records]))
    print(f"final P_success = {trace.final_p:.12f}")
    return cfg


def cmd_selftest(args, out):
    from .selftest import run_selftest

    ok = run_selftest(seed=args.master_seed or 0, count=args.count)
    if not ok:
        raise RuntimeError("self-test failed")
    return None


def _add_common(p, sizes_required=True):
    p.add_argument("--config", help="JSON file with experiment configuration keys")
    p.add_argument("--encoding", choices=["qubit", "qudit"])
    p.add_argument("--n", dest="n_sizes", type=parse_sizes, help="qubit counts, e.g. 8 or 6:20:2")
    p.add_argument("--d", dest="d_sizes", type=parse_sizes, help="qudit dimensions, e.g. 100 or 50,100")
    p.add_argument("--schedule", choices=["grover", "greedy"])
    p.add_argument("--layers", type=int)
    p.add_argument("--noise", dest="mechanism", choices=list(MECHANISMS))
    p.add_argument("--weights", choices=["uniform", "dirichlet"], help="Pauli channel weight law")
    p.add_argument("--seed", dest="master_seed", type=int)
    p.add_argument("--realizations", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--density", choices=["auto", "dense", "factored"])
    p.add_argument("--grid", type=int, help="coarse greedy grid points per axis")
    p.add_argument("--out", help=f"output directory (default ${OUT_ENV} or .)")


def _add_r_eps(p, single=False):
    if single:
        p.add_argument("--r", dest="r_grid", type=parse_grid)
        p.add_argument("--eps", dest="eps_grid", type=parse_grid)
    else:
        p.add_argument("--r", "--r-grid", dest="r_grid", type=parse_grid)
        p.add_argument("--eps", "--eps-grid", dest="eps_grid", type=parse_grid)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="reinforced-search", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("single-run", help="one run, per-layer trace")
    _add_common(p)
    _add_r_eps(p, single=True)
    p.set_defaults(func=cmd_single_run)

    for name, func, helptext in (
        ("sweep-noise", cmd_sweep_noise, "final P_success over a noise-strength grid"),
        ("sweep-r", cmd_sweep_r, "final P_success over a reinforcement grid"),
    ):
        p = sub.add_parser(name, help=helptext)
        _add_common(p)
        _add_r_eps(p)
        p.set_defaults(func=func)

    p = sub.add_parser("scaling", help="computation time L(delta, eps) against size")
    _add_common(p)
    _add_r_eps(p)
    p.add_argument("--delta", type=float)
    p.add_argument("--lmax", dest="max_layers", type=int)
    p.add_argument("--engine", choices=["auto", "full", "two-level"])
    p.set_defaults(func=cmd_scaling)

    p = sub.add_parser("selftest", help="randomized invariant checks")
    p.add_argument("--seed", dest="master_seed", type=int)
    p.add_argument("--count", type=int, default=20, help="random configurations per check")
    p.add_argument("--out", help="unused; accepted for symmetry")
    p.set_defaults(func=cmd_selftest)
    return parser


def execute(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    started = dt.datetime.now(dt.timezone.utc).isoformat()
    try:
        out = None
        if args.command != "selftest":
            out = OutputDir(Path(args.out or os.environ.get(OUT_ENV) or "."))
        cfg = args.func(args, out)
        if out is not None:
            out.manifest(args.command, cfg.to_dict() if cfg else {},
                         cfg.master_seed if cfg else None, started)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (RuntimeError, ArithmeticError, ValueError, OSError) as exc:
        print(f"runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def main():
    sys.exit(execute())


if __name__ == "__main__":
    main()
