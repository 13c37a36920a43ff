"""Time-discretized rank-2 martingales dZ = P(n) dW with radial barriers.

Paths are advanced by Euler steps confined to the plane orthogonal to the
strategy's kernel direction, optionally re-projected onto the strategy's
surface after every step.  Two stepping modes:

* ``fixed``:  dt constant.  Default dt = 1e-4 * e^{2L}, matching the
  homothety covariance of the crossing statistics.
* ``radial``: dt = h * r^2 with h = dt / e^{2L}, i.e. a constant increment
  of the logarithmic-radius clock.  Barrier and crossing probabilities are
  invariant under this time change, and absorption experiments that a fixed
  step cannot finish (null-recurrent radial parts have log-tailed absorption
  times) become tractable.  Default dt = 1e-3 * e^{2L}.

Stopping at the inner barrier r = e^L resolves the crossing time by linear
interpolation of the barrier coordinate within the step (configurable off by
``interpolate_crossing=False``, which then charges the full step).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import _engine_py
from ._engine import get_engine
from .errors import DomainError
from .geometry import projection, radial

__all__ = [
    "StopReason",
    "SimConfig",
    "PathRecord",
    "BatchResult",
    "euler_step",
    "simulate_path",
    "simulate_paths",
    "drift_residual_check",
]


class StopReason(Enum):
    TIME_CAP = "time_cap"
    INNER_BARRIER = "inner_barrier"
    OUTER_BARRIER = "outer_barrier"
    STEP_CAP = "step_cap"
    RANGE_CAP = "range_cap"


_REASONS = {
    _engine_py.TIME_CAP: StopReason.TIME_CAP,
    _engine_py.INNER_BARRIER: StopReason.INNER_BARRIER,
    _engine_py.OUTER_BARRIER: StopReason.OUTER_BARRIER,
    _engine_py.STEP_CAP: StopReason.STEP_CAP,
    _engine_py.RANGE_CAP: StopReason.RANGE_CAP,
}


@dataclass(frozen=True)
class SimConfig:
    """Numerical configuration for a batch of paths.

    ``dt`` is the time step at the floor radius e^L; ``None`` picks the mode
    default (1e-4 e^{2L} fixed, 1e-3 e^{2L} radial).  ``stop_at_level``
    turns the given level into a second absorbing barrier (exit-time runs);
    ``watch_levels`` only record first hits and arrival counts.
    """

    inner_level: int
    dt: float | None = None
    step_mode: str = "fixed"
    max_time: float = math.inf
    max_steps: int = 10_000_000
    retraction: str = "project"
    stop_at_level: int | None = None
    watch_levels: tuple[int, ...] = ()
    rho_grid: tuple[float, ...] = ()
    track_walk: bool = False
    dom_levels: int = 512
    surface_tol: float = 1e-6
    interpolate_crossing: bool = True
    ceiling_level: int = 340

    def __post_init__(self):
        if self.inner_level < 0:
            raise DomainError("inner barrier level must be a non-negative integer")
        if self.step_mode not in ("fixed", "radial"):
            raise DomainError("step_mode must be 'fixed' or 'radial'")
        if self.retraction not in ("project", "none"):
            raise DomainError("retraction must be 'project' or 'none'")
        if self.dt is not None and self.dt <= 0:
            raise DomainError("dt must be positive")
        if self.max_time <= 0:
            raise DomainError("max_time must be positive")
        if self.max_steps < 1:
            raise DomainError("max_steps must be >= 1")
        if self.stop_at_level is not None and self.stop_at_level <= self.inner_level:
            raise DomainError("outer stop level must exceed the inner level")
        if any(w <= self.inner_level for w in self.watch_levels):
            raise DomainError("watch levels must exceed the inner level")
        high_marks = (self.stop_at_level or 0, *self.watch_levels)
        if any(h >= self.ceiling_level for h in high_marks):
            raise DomainError("ceiling_level must exceed all tracked levels")

    def resolved_dt(self) -> float:
        if self.dt is not None:
            return self.dt
        base = 1e-4 if self.step_mode == "fixed" else 1e-3
        return base * math.exp(2.0 * self.inner_level)

    def hclock(self) -> float:
        return self.resolved_dt() / math.exp(2.0 * self.inner_level)

    def as_dict(self) -> dict:
        return {
            "inner_level": self.inner_level,
            "dt": self.resolved_dt(),
            "step_mode": self.step_mode,
            "max_time": self.max_time,
            "max_steps": self.max_steps,
            "retraction": self.retraction,
            "stop_at_level": self.stop_at_level,
            "watch_levels": list(self.watch_levels),
            "rho_grid": list(self.rho_grid),
            "track_walk": self.track_walk,
        }


@dataclass
class PathRecord:
    """One sampled trajectory with positions and summary accumulators."""

    times: np.ndarray
    positions: np.ndarray
    stop_reason: StopReason
    t_end: float
    steps: int
    int_alpha: float
    int_beta: float
    int_gamma: float
    occupation: np.ndarray
    arrivals: np.ndarray
    config: SimConfig
    seed: tuple

    @property
    def final_point(self) -> np.ndarray:
        return self.positions[-1]

    def log_r(self) -> np.ndarray:
        return np.log(radial(self.positions))


@dataclass
class BatchResult:
    """Summary arrays for n independent replications (no stored samples)."""

    stop_reason: np.ndarray
    t_end: np.ndarray
    steps: np.ndarray
    end: np.ndarray
    int_alpha: np.ndarray
    int_beta: np.ndarray
    int_gamma: np.ndarray
    occupation: np.ndarray
    arrivals: np.ndarray
    dom_up: np.ndarray
    dom_down: np.ndarray
    start: np.ndarray
    config: SimConfig
    master_seed: int
    engine: str

    @property
    def n_paths(self) -> int:
        return self.stop_reason.size

    @property
    def absorbed(self) -> np.ndarray:
        return self.stop_reason == _engine_py.INNER_BARRIER

    @property
    def absorbed_fraction(self) -> float:
        return float(self.absorbed.mean())

    def hit_before_floor(self, level: int) -> np.ndarray:
        """Whether each path reached ``level`` (a watch level) at least once."""
        w = list(self.config.watch_levels).index(level)
        return self.arrivals[:, w] >= 1

    def upcrossings(self, level: int) -> np.ndarray:
        """U_{level-1}: arrivals at ``level`` after the first one."""
        w = list(self.config.watch_levels).index(level)
        return np.maximum(self.arrivals[:, w] - 1, 0)

    def residuals(self) -> dict[str, np.ndarray]:
        """Martingale residuals r^2 - int alpha, x3^2 - int gamma,
        log r - int beta, one value per path."""
        r2_start = float(self.start[0] ** 2 + self.start[1] ** 2)
        x3_start = float(self.start[2])
        r2_end = self.end[:, 0] ** 2 + self.end[:, 1] ** 2
        return {
            "r2": r2_end - r2_start - self.int_alpha,
            "x3_sq": self.end[:, 2] ** 2 - x3_start**2 - self.int_gamma,
            "log_r": 0.5 * np.log(r2_end) - 0.5 * math.log(r2_start) - self.int_beta,
        }


def euler_step(p: np.ndarray, n: np.ndarray, dt: float, gauss: np.ndarray) -> np.ndarray:
    """One projected Euler increment: p + P(n) (sqrt(dt) gauss)."""
    if dt <= 0:
        raise DomainError("dt must be positive")
    p = np.asarray(p, dtype=float)
    g = np.asarray(gauss, dtype=float)
    return p + math.sqrt(dt) * (projection(n) @ g)


def _validate_start(strategy, start: np.ndarray, cfg: SimConfig) -> None:
    r = float(radial(start))
    floor_r = math.exp(cfg.inner_level)
    if r < floor_r * (1.0 - 1e-12):
        raise DomainError("start must satisfy r >= e^L")
    resid = strategy.surface_residual(start)
    scale = getattr(strategy, "a", getattr(strategy, "pitch", 1.0))
    if abs(resid) > cfg.surface_tol * max(1.0, scale) + 1e-9 * r:
        raise DomainError("start point is not on the strategy surface")
    if strategy.barrier_coord == "axial":
        if floor_r < strategy.a * (1.0 - 1e-12):
            raise DomainError("inner barrier lies below the catenoid waist")
        if start[2] <= 0.0:
            raise DomainError("catenoid runs start on the upper end (x3 > 0)")


def _run(strategy, start, cfg: SimConfig, n_paths, master_seed, engine, store, seed_offset=0):
    start = np.asarray(start, dtype=float)
    _validate_start(strategy, start, cfg)
    axial = 1 if strategy.barrier_coord == "axial" else 0
    custom = strategy.kernel_kind is None
    eng_name = engine
    if engine == "auto" and (custom or store):
        eng_name = "python"
    eng = get_engine(eng_name)
    if getattr(eng, "compiled", False) and (custom or store):
        raise DomainError("custom strategies and stored runs need the python engine")

    common = dict(
        kind=-1 if custom else strategy.kernel_kind,
        params=tuple(getattr(strategy, "kernel_params", ())),
        start=(float(start[0]), float(start[1]), float(start[2])),
        n_paths=n_paths,
        master_seed=master_seed,
        dt_base=cfg.resolved_dt(),
        step_mode=0 if cfg.step_mode == "fixed" else 1,
        hclock=cfg.hclock(),
        floor_level=cfg.inner_level,
        axial=axial,
        max_time=cfg.max_time,
        max_steps=cfg.max_steps,
        retract=1 if cfg.retraction == "project" else 0,
        surface_tol=cfg.surface_tol,
        stop_high=-1 if cfg.stop_at_level is None else cfg.stop_at_level,
        watch_levels=np.asarray(cfg.watch_levels, dtype=np.int64),
        rho_grid=np.asarray(cfg.rho_grid, dtype=float),
        dom_levels=cfg.dom_levels,
        track_walk=1 if cfg.track_walk else 0,
        interpolate=1 if cfg.interpolate_crossing else 0,
        seed_offset=seed_offset,
        ceiling_level=cfg.ceiling_level,
    )
    if eng is _engine_py:
        out = eng.path_batch(
            store=store,
            normal_fn=(lambda p: strategy.normal(np.asarray(p))) if custom else None,
            retract_fn=(lambda p: strategy.retract(np.asarray(p))) if custom else None,
            residual_fn=(lambda p: strategy.surface_residual(np.asarray(p)))
            if custom
            else None,
            **common,
        )
    else:
        out = eng.path_batch(**common)
    return out, start, getattr(eng, "name", eng_name)


def simulate_paths(
    strategy,
    start,
    cfg: SimConfig,
    n_paths: int,
    master_seed: int,
    engine: str = "auto",
) -> BatchResult:
    """n independent paths; replication i draws from stream (master_seed, i).

    Aggregation order is replication order, so results are identical however
    the replications are scheduled.
    """
    out, start_arr, eng_name = _run(
        strategy, start, cfg, n_paths, master_seed, engine, store=False
    )
    return BatchResult(
        stop_reason=out["stop_reason"],
        t_end=out["t_end"],
        steps=out["steps"],
        end=out["end"],
        int_alpha=out["int_alpha"],
        int_beta=out["int_beta"],
        int_gamma=out["int_gamma"],
        occupation=out["occupation"],
        arrivals=out["arrivals"],
        dom_up=out["dom_up"],
        dom_down=out["dom_down"],
        start=start_arr,
        config=cfg,
        master_seed=master_seed,
        engine=eng_name,
    )


def simulate_path(
    strategy,
    start,
    cfg: SimConfig,
    master_seed: int,
    replication: int = 0,
) -> PathRecord:
    """One stored path (python engine), deterministic in (seed, replication).

    Uses the same per-replication stream as path ``replication`` of a batch
    with the same master seed, so a stored rerun reproduces a batch member.
    """
    out, start_arr, _ = _run(
        strategy, start, cfg, 1, master_seed, engine="python", store=True,
        seed_offset=replication,
    )
    times, points = out["stored"][0]
    return PathRecord(
        times=times,
        positions=points,
        stop_reason=_REASONS[int(out["stop_reason"][0])],
        t_end=float(out["t_end"][0]),
        steps=int(out["steps"][0]),
        int_alpha=float(out["int_alpha"][0]),
        int_beta=float(out["int_beta"][0]),
        int_gamma=float(out["int_gamma"][0]),
        occupation=out["occupation"][0],
        arrivals=out["arrivals"][0],
        config=cfg,
        seed=(master_seed, replication),
    )


def drift_residual_check(batch: BatchResult):
    """Mean martingale residuals with standard errors, one per tracked drift.

    For a faithful discretization each mean lies within a few standard
    errors of zero.
    """
    from .pathstats import EstimateWithCI

    res = batch.residuals()
    return {key: EstimateWithCI.from_samples(vals) for key, vals in res.items()}
