"""Seeded parameter sweeps, realization statistics and scaling fits."""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .engine import computation_time, run_schedule
from .greedy import GreedySettings
from .noise import MECHANISMS, NoiseSpec
from .problem import ScheduleSpec, build_instance
from .twolevel import computation_time_two_level

_MASK = 2 ** 64 - 1


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK
    return x ^ (x >> 31)


def derive_seed(master: int, point: int, realization: int) -> int:
    """Per-run seed; depends only on indices, never on execution order."""
    return splitmix64(splitmix64(splitmix64(master & _MASK) ^ point) ^ realization)


@dataclass(frozen=True)
class ExperimentConfig:
    encoding: str = "qubit"
    sizes: Tuple[int, ...] = (8,)
    schedule: str = "grover"
    r_grid: Tuple[float, ...] = (0.0,)
    eps_grid: Tuple[float, ...] = (0.0,)
    layers: Optional[int] = 50
    delta: Optional[float] = None
    mechanism: str = "none"
    realizations: int = 20
    master_seed: int = 0
    workers: int = 1
    weights: str = "uniform"
    max_layers: Optional[int] = None
    density: str = "auto"
    engine: str = "auto"  # scaling only: "auto", "full" or "two-level"
    greedy: GreedySettings = field(default_factory=GreedySettings)

    def __post_init__(self):
        if not self.sizes or not self.r_grid or not self.eps_grid:
            raise ValueError("sweep grids must be non-empty")
        if self.realizations < 1:
            raise ValueError("need at least one realization")
        if self.mechanism not in MECHANISMS:
            raise ValueError(f"unknown noise mechanism {self.mechanism!r}")
        if self.schedule not in ("grover", "greedy"):
            raise ValueError(f"unknown schedule {self.schedule!r}")
        if self.engine not in ("auto", "full", "two-level"):
            raise ValueError(f"unknown engine {self.engine!r}")

    def points(self):
        return list(itertools.product(self.sizes, self.eps_grid, self.r_grid))

    def to_dict(self) -> dict:
        d = asdict(self)
        for k in ("sizes", "r_grid", "eps_grid"):
            d[k] = list(d[k])
        return d


@dataclass(frozen=True)
class SummaryStatistics:
    mean: float
    stderr: Optional[float]  # None when n == 1
    n: int
    min: float
    max: float


def aggregate(samples: Sequence[float]) -> SummaryStatistics:
    x = np.asarray(list(samples), dtype=float)
    if x.size == 0:
        raise ValueError("cannot aggregate an empty sample")
    # sorted so the result does not depend on realization order
    x = np.sort(x)
    n = x.size
    mean = math.fsum(x) / n
    stderr = None
    if n > 1:
        var = math.fsum((x - mean) ** 2) / (n - 1)
        stderr = math.sqrt(var / n)
    return SummaryStatistics(mean, stderr, n, float(x[0]), float(x[-1]))


@dataclass(frozen=True)
class ScalingFit:
    slope: float
    intercept: float
    r2: float
    model: str  # "log-log" or "linear"
    domain: Tuple[float, float, int]  # (x min, x max, number of points)


def fit_scaling(points: Sequence[Tuple[float, float]], model: str = "log-log") -> ScalingFit:
    """Ordinary least squares of y on x, after taking logs for ``log-log``."""
    if len(points) < 3:
        raise ValueError("need at least 3 points to fit")
    x = np.array([p[0] for p in points], dtype=float)
    y = np.array([p[1] for p in points], dtype=float)
    if model == "log-log":
        if np.any(x <= 0) or np.any(y <= 0):
            raise ValueError("log-log fit needs positive values")
        X, Y = np.log(x), np.log(y)
    elif model == "linear":
        X, Y = x, y
    else:
        raise ValueError(f"unknown model {model!r}")
    if np.ptp(X) == 0:
        raise ValueError("degenerate fit: all x values are equal")
    xm, ym = X.mean(), Y.mean()
    slope = float(np.sum((X - xm) * (Y - ym)) / np.sum((X - xm) ** 2))
    intercept = float(ym - slope * xm)
    ss_tot = float(np.sum((Y - ym) ** 2))
    ss_res = float(np.sum((Y - (intercept + slope * X)) ** 2))
    r2 = 1.0 if ss_tot == 0 else min(1.0, max(0.0, 1.0 - ss_res / ss_tot))
    return ScalingFit(slope, intercept, r2, model, (float(x.min()), float(x.max()), len(x)))


# --- sweeps -----------------------------------------------------------------

@dataclass(frozen=True)
class SweepRow:
    point_key: str
    size: int
    eps: float
    r: float
    realization: int
    seed: int
    p_success: float
    error: str = ""


@dataclass(frozen=True)
class AggregateRow:
    point_key: str
    size: int
    eps: float
    r: float
    stats: Optional[SummaryStatistics]
    failed: int


@dataclass(frozen=True)
class SweepResult:
    rows: List[SweepRow]
    aggregates: List[AggregateRow]


def point_key(encoding: str, size: int, eps: float, r: float) -> str:
    label = "n" if encoding == "qubit" else "d"
    return f"{label}{size}/eps{eps:g}/r{r:g}"


def _final_p(cfg: ExperimentConfig, size: int, eps: float, r: float, seed: int) -> float:
    inst = build_instance(cfg.encoding, size)
    noise = NoiseSpec(cfg.mechanism, eps, seed, cfg.weights)
    if cfg.schedule == "grover":
        schedule = ScheduleSpec.grover_spec(cfg.layers)
    else:
        schedule = ScheduleSpec.greedy_spec(cfg.layers, cfg.greedy)
    return run_schedule(inst, schedule, r, noise, cfg.density).final_p


def _run_task(args):
    cfg, size, eps, r, seed = args
    try:
        return _final_p(cfg, size, eps, r, seed), ""
    except (ValueError, ArithmeticError, RuntimeError) as exc:
        return float("nan"), f"{type(exc).__name__}: {exc}"


def _map(fn, tasks, workers):
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, tasks))
    return [fn(t) for t in tasks]


def run_sweep(cfg: ExperimentConfig) -> SweepResult:
    """Final success probability for every (point, realization).

    Realizations of deterministic noise are computed once and replicated.
    """
    if cfg.layers is None or cfg.layers < 2:
        raise ValueError("sweeps need a layer count >= 2")
    plan = []  # (point index, size, eps, r, realization, seed, task index)
    tasks = []
    for pi, (size, eps, r) in enumerate(cfg.points()):
        random_noise = NoiseSpec(cfg.mechanism, eps).is_random
        for k in range(cfg.realizations):
            seed = derive_seed(cfg.master_seed, pi, k)
            if random_noise or k == 0:
                tasks.append((cfg, size, eps, r, seed))
            plan.append((pi, size, eps, r, k, seed, len(tasks) - 1))
    results = _map(_run_task, tasks, cfg.workers)
    rows = []
    for pi, size, eps, r, k, seed, ti in plan:
        p, err = results[ti]
        rows.append(SweepRow(point_key(cfg.encoding, size, eps, r), size, eps, r, k, seed, p, err))
    aggregates = []
    for pi, (size, eps, r) in enumerate(cfg.points()):
        mine = [row for row in rows if row.point_key == point_key(cfg.encoding, size, eps, r)]
        ok = [row.p_success for row in mine if not row.error]
        stats = aggregate(ok) if ok else None
        aggregates.append(
            AggregateRow(point_key(cfg.encoding, size, eps, r), size, eps, r, stats, len(mine) - len(ok))
        )
    return SweepResult(rows, aggregates)


@dataclass(frozen=True)
class ScalingRow:
    size: int
    dim: int
    eps: float
    r: float
    delta: float
    layers: Optional[int]
    best_p: float
    status: str  # "ok", "not_reached" or "error: ..."


def _scaling_task(args):
    cfg, size, eps, r = args
    inst = build_instance(cfg.encoding, size)
    noise = NoiseSpec(cfg.mechanism, eps, 0, cfg.weights)
    try:
        use_two_level = cfg.engine == "two-level" or (cfg.engine == "auto" and not noise.active)
        if use_two_level:
            if noise.active:
                raise ValueError("the two-level engine is noise-free")
            ct = computation_time_two_level(inst, r, cfg.delta, cfg.max_layers, cfg.greedy)
        else:
            ct = computation_time(inst, r, cfg.delta, noise, cfg.max_layers, cfg.greedy, cfg.density)
    except (ValueError, ArithmeticError, RuntimeError) as exc:
        return ScalingRow(size, inst.dim, eps, r, cfg.delta, None, float("nan"),
                          f"error: {type(exc).__name__}: {exc}")
    status = "ok" if ct.reached else "not_reached"
    return ScalingRow(size, inst.dim, eps, r, cfg.delta, ct.layers, ct.best_p, status)


def run_scaling(cfg: ExperimentConfig) -> List[ScalingRow]:
    """Computation time L(delta, eps) for every (size, eps, r)."""
    if cfg.delta is None:
        raise ValueError("scaling runs need delta")
    tasks = [(cfg, size, eps, r) for size, eps, r in cfg.points()]
    return _map(_scaling_task, tasks, cfg.workers)


def scaling_fits(rows: Sequence[ScalingRow]) -> List[Tuple[float, float, float, ScalingFit]]:
    """Log-log fit of L against dimension and linear fit against size, per (eps, r, delta)."""
    groups = {}
    for row in rows:
        if row.status == "ok" and row.layers and row.layers > 0:
            groups.setdefault((row.eps, row.r, row.delta), []).append(row)
    out = []
    for key in sorted(groups):
        pts = groups[key]
        if len({p.size for p in pts}) < 3:
            continue
        out.append(key + (fit_scaling([(p.dim, p.layers) for p in pts], "log-log"),))
        out.append(key + (fit_scaling([(p.size, p.layers) for p in pts], "linear"),))
    return out
