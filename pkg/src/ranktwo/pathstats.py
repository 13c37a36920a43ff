"""Radial discretization, hitting/upcrossing statistics, occupation times.

The discretizer turns a stored path into the embedded nearest-neighbor walk
X_n = log r at the successive +-1 crossing times of log r, anchored at the
start level L+1.  Hitting and upcrossing counters follow the alternating
first-hit scheme: after the walk first reaches k+1, each later arrival at
k+1 (necessarily from k) counts as one upcrossing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from statistics import NormalDist

import numpy as np

from . import _engine_py
from .errors import DomainError, EstimationError
from .geometry import radial

__all__ = [
    "WalkEnd",
    "DiscretizedWalk",
    "EstimateWithCI",
    "discretize_radial",
    "hitting_and_upcrossings",
    "occupation_time",
    "first_passage_time_bound_check",
    "mc_estimate",
]


class WalkEnd(Enum):
    FLOOR_HIT = "floor_hit"
    PATH_ENDED_MID_INTERVAL = "path_ended_mid_interval"


@dataclass
class DiscretizedWalk:
    """Level sequence X_0, X_1, ... with the sample indices of each crossing."""

    levels: np.ndarray
    crossing_indices: np.ndarray
    terminated_by: WalkEnd
    floor: int


@dataclass(frozen=True)
class EstimateWithCI:
    """Monte Carlo mean with standard error and a normal-approximation CI."""

    mean: float
    std_error: float
    count: int
    confidence: float = 0.95

    @classmethod
    def from_samples(cls, samples, confidence: float = 0.95) -> "EstimateWithCI":
        arr = np.asarray(samples, dtype=float)
        if arr.size < 2:
            raise EstimationError("need at least 2 replications for a CI")
        se = float(arr.std(ddof=1) / math.sqrt(arr.size))
        return cls(mean=float(arr.mean()), std_error=se, count=int(arr.size),
                   confidence=confidence)

    @property
    def half_width(self) -> float:
        z = NormalDist().inv_cdf(0.5 + self.confidence / 2.0)
        return z * self.std_error

    @property
    def interval(self) -> tuple[float, float]:
        return (self.mean - self.half_width, self.mean + self.half_width)


def discretize_radial(path, floor: int, start_tol: float = 1e-6) -> DiscretizedWalk:
    """Anchored +-1 crossing sequence of log r along a stored path.

    The path must start at r = e^{floor+1}.  Crossings are detected on the
    sampled log-radius with ties at exact levels counting as crossings; a
    path that ends without the next crossing yields a partial walk marked
    ``path_ended_mid_interval``.
    """
    lr = np.log(radial(path.positions))
    start_level = floor + 1
    if abs(lr[0] - start_level) > start_tol:
        raise DomainError(
            f"discretization requires r(Z_0) = e^{start_level}, got log r = {lr[0]:.6f}"
        )
    levels = [start_level]
    crossings = [0]
    anchor = start_level
    ended = WalkEnd.PATH_ENDED_MID_INTERVAL
    for i in range(1, lr.size):
        y = lr[i]
        moved = True
        while moved and anchor > floor:
            if y >= anchor + 1:
                anchor += 1
                levels.append(anchor)
                crossings.append(i)
            elif y <= anchor - 1:
                anchor -= 1
                levels.append(anchor)
                crossings.append(i)
            else:
                moved = False
        if anchor == floor:
            ended = WalkEnd.FLOOR_HIT
            break
    return DiscretizedWalk(
        levels=np.asarray(levels, dtype=np.int64),
        crossing_indices=np.asarray(crossings, dtype=np.int64),
        terminated_by=ended,
        floor=floor,
    )


def hitting_and_upcrossings(walk: DiscretizedWalk, k: int) -> tuple[str, int]:
    """First-hit order between levels {floor, k+1} and the upcrossing count.

    Returns ("floor" | "upper" | "neither", U_k) where U_k counts the
    k -> k+1 passages strictly after the first arrival at k+1.
    """
    if k <= walk.floor + 1:
        raise DomainError("k must exceed floor+1")
    target = k + 1
    arrivals = int(np.count_nonzero(walk.levels[1:] == target))
    # the walk stops at the floor, so any arrival at k+1 precedes a floor hit
    if arrivals >= 1:
        order = "upper"
    elif walk.terminated_by is WalkEnd.FLOOR_HIT:
        order = "floor"
    else:
        order = "neither"
    return order, max(0, arrivals - 1)


def occupation_time(path, rho: float) -> float:
    """Time the stored path spends in {r <= rho}.

    Trapezoidal rule on the indicator: segments with both endpoints on one
    side contribute all or nothing, boundary segments are split by linear
    interpolation of r.
    """
    if rho <= 0:
        raise DomainError("rho must be positive")
    r = radial(path.positions)
    t = np.asarray(path.times, dtype=float)
    if r.size < 2:
        return 0.0
    dt = np.diff(t)
    r0, r1 = r[:-1], r[1:]
    below0 = r0 <= rho
    below1 = r1 <= rho
    with np.errstate(divide="ignore", invalid="ignore"):
        frac = np.where(r1 != r0, (rho - r0) / (r1 - r0), 0.5)
    weight = np.where(
        below0 & below1,
        1.0,
        np.where(below0, frac, np.where(below1, 1.0 - frac, 0.0)),
    )
    return float(np.sum(dt * weight))


def first_passage_time_bound_check(batch, floor: int, k: int):
    """Mean two-sided exit time against the ceiling e^{2(k+1)} - e^{2(L+1)}.

    ``batch`` must come from runs started at r = e^{L+1} with the outer stop
    at level k+1.  Paths that hit a time or step cap do not carry an exit
    time; fewer than 2 completed paths is an estimation error.
    """
    if batch.config.stop_at_level != k + 1:
        raise DomainError("batch was not run with the outer stop at k+1")
    completed = np.isin(
        batch.stop_reason, (_engine_py.INNER_BARRIER, _engine_py.OUTER_BARRIER)
    )
    if completed.sum() < 2:
        raise EstimationError("not enough completed exits to estimate the mean")
    est = EstimateWithCI.from_samples(batch.t_end[completed])
    bound = math.exp(2.0 * (k + 1)) - math.exp(2.0 * (floor + 1))
    ok = est.mean + 3.0 * est.std_error <= bound and completed.all()
    return est, bound, bool(ok)


def mc_estimate(runner, n: int, master_seed: int) -> EstimateWithCI:
    """Mean and CI over n replications of ``runner(rng)``.

    Replication i draws from the stream seeded by (master_seed, i); results
    are aggregated in replication order, so the estimate is reproducible and
    independent of scheduling.
    """
    if n < 2:
        raise DomainError("need n >= 2 replications")
    values = np.empty(n)
    for i in range(n):
        rng = np.random.Generator(
            np.random.PCG64(np.random.SeedSequence(master_seed, spawn_key=(i,)))
        )
        try:
            values[i] = float(runner(rng))
        except Exception as exc:
            raise EstimationError(f"replication {i} failed: {exc}") from exc
    return EstimateWithCI.from_samples(values)
