"""Exact analytics and simulation for nearest-neighbor walks on {L, L+1, ...}.

The walk moves from level m to m+1 with probability p_m and to m-1 with
probability q_m = 1 - p_m, and is absorbed at the floor L.  All products and
sums of probability ratios are evaluated in log-space so that long chains do
not underflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

import numpy as np

from .errors import DomainError

__all__ = [
    "ChainSpec",
    "ChainTrajectory",
    "Verdict",
    "constant_chain",
    "harmonic_borderline_chain",
    "table_chain",
    "ratio_product",
    "a_value",
    "a_values_upto",
    "a_value_extrapolated",
    "hit_up_before_floor",
    "is_parabolic",
    "expected_upcrossings",
    "simulate_chain",
    "simulate_chain_batch",
    "hitting_probability_linear_system",
]


class Verdict(Enum):
    PARABOLIC = "parabolic"
    TRANSIENT = "transient"
    INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class ChainSpec:
    """Floor level plus up-probabilities for levels above the floor.

    ``up_prob`` must return p_m in (0, 1) for every integer m >= floor + 1.
    Table-backed specs set ``max_level``; queries beyond it raise DomainError
    instead of extrapolating.
    """

    floor: int
    up_prob: Callable[[np.ndarray], np.ndarray]
    description: str = ""
    max_level: int | None = None
    kind: str = "custom"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.floor < 0:
            raise DomainError(f"floor must be >= 0, got {self.floor}")

    def _check_levels(self, m: np.ndarray) -> None:
        if np.any(m < self.floor + 1):
            raise DomainError(f"level below floor+1={self.floor + 1}")
        if self.max_level is not None and np.any(m > self.max_level):
            raise DomainError(
                f"table-backed spec only covers levels up to {self.max_level}"
            )

    def p(self, m) -> np.ndarray | float:
        """Up-probability p_m; accepts a scalar or an integer array."""
        scalar = np.isscalar(m)
        marr = np.atleast_1d(np.asarray(m, dtype=np.int64))
        self._check_levels(marr)
        vals = np.asarray(self.up_prob(marr), dtype=float)
        if np.any(vals <= 0.0) or np.any(vals >= 1.0):
            raise DomainError("up-probabilities must lie strictly in (0, 1)")
        return float(vals[0]) if scalar else vals

    def q(self, m) -> np.ndarray | float:
        return 1.0 - self.p(m)

    def log_qp(self, m) -> np.ndarray:
        """log(q_m / p_m) for an array of levels, the basic log-space brick."""
        p = self.p(m)
        return np.log1p(-p) - np.log(p)

    def p_table(self, top: int) -> np.ndarray:
        """Dense p_m for m = floor+1 .. top, used by the compiled kernels."""
        if top < self.floor + 1:
            raise DomainError("table top below floor+1")
        return np.asarray(self.p(np.arange(self.floor + 1, top + 1)), dtype=float)


@dataclass
class ChainTrajectory:
    """One realization of the walk.

    ``states`` starts at the requested level; consecutive states differ by
    exactly one and the floor, if reached, is the final state.
    """

    states: np.ndarray
    absorbed: bool
    steps_used: int


def constant_chain(p: float, floor: int = 0) -> ChainSpec:
    if not 0.0 < p < 1.0:
        raise DomainError(f"constant chain needs p in (0,1), got {p}")
    return ChainSpec(
        floor=floor,
        up_prob=lambda m: np.full(m.shape, p, dtype=float),
        description=f"constant p={p}",
        kind="constant",
        params={"p": p},
    )


def harmonic_borderline_chain(floor: int = 0) -> ChainSpec:
    """The borderline chain p_m = (m+1)/(2m+1), q_m = m/(2m+1)."""
    return ChainSpec(
        floor=floor,
        up_prob=lambda m: (m + 1.0) / (2.0 * m + 1.0),
        description="harmonic borderline",
        kind="harmonic_borderline",
    )


def table_chain(values, floor: int = 0) -> ChainSpec:
    """Table-backed spec: values[i] is p_{floor+1+i}."""
    vals = np.asarray(values, dtype=float)
    if vals.ndim != 1 or vals.size == 0:
        raise DomainError("table must be a non-empty 1-d sequence")
    if np.any(vals <= 0.0) or np.any(vals >= 1.0):
        raise DomainError("table probabilities must lie strictly in (0, 1)")
    top = floor + vals.size

    def lookup(m: np.ndarray) -> np.ndarray:
        return vals[m - (floor + 1)]

    return ChainSpec(
        floor=floor,
        up_prob=lookup,
        description=f"table on levels {floor + 1}..{top}",
        max_level=top,
        kind="table",
        params={"values": vals.tolist()},
    )


def ratio_product(spec: ChainSpec, m: int) -> float:
    """prod_{j=L+1}^{m} q_j/p_j, evaluated as exp of a sum of logs."""
    if m < spec.floor + 1:
        raise DomainError(f"m must be >= floor+1, got {m}")
    levels = np.arange(spec.floor + 1, m + 1)
    return float(np.exp(np.sum(spec.log_qp(levels))))


def a_values_upto(spec: ChainSpec, m_max: int) -> np.ndarray:
    """A_m for m = floor+1 .. m_max as one vectorized pass.

    A_m = 1 + sum_{j=L+1}^{m} prod_{i=L+1}^{j} q_i/p_i.
    """
    if m_max < spec.floor + 1:
        raise DomainError(f"m_max must be >= floor+1, got {m_max}")
    levels = np.arange(spec.floor + 1, m_max + 1)
    log_terms = np.cumsum(spec.log_qp(levels))
    return 1.0 + np.cumsum(np.exp(log_terms))


def a_value(spec: ChainSpec, m: int) -> float:
    """A_m, the reciprocal hitting probability from L+1 of m+1 before L."""
    return float(a_values_upto(spec, m)[-1])


def a_value_extrapolated(spec: ChainSpec, m: int) -> float:
    """A_m plus a geometric tail estimate using the last ratio q_m/p_m.

    Only meaningful when the term ratio is below 1 (transient-looking tails);
    otherwise the raw A_m is returned.
    """
    values = a_values_upto(spec, m)
    a_m = float(values[-1])
    last_term = a_m - (float(values[-2]) if values.size > 1 else 1.0)
    rho = float(spec.q(m) / spec.p(m))
    if rho >= 1.0:
        return a_m
    return a_m + last_term * rho / (1.0 - rho)


def hit_up_before_floor(spec: ChainSpec, m: int) -> float:
    """P(hit m+1 before the floor | start at floor+1) = 1/A_m."""
    return 1.0 / a_value(spec, m)


def is_parabolic(
    spec: ChainSpec,
    horizon: int = 10_000,
    blowup_threshold: float = 1e6,
    ratio_margin: float = 0.99,
) -> Verdict:
    """Numeric surrogate verdict for divergence of A_m (never a proof).

    ``parabolic`` when the borderline-domination test p_m <= (m+1)/(2m+1)
    holds on a tail of the checked range, or when A_horizon exceeds the
    blow-up threshold.  ``transient`` when the term ratios q_m/p_m on the
    checked tail stay below ``ratio_margin``, so the remaining sum is
    dominated by a convergent geometric series.
    """
    if horizon < spec.floor + 2:
        raise DomainError("horizon must be >= floor+2")
    top = horizon if spec.max_level is None else min(horizon, spec.max_level)
    levels = np.arange(spec.floor + 1, top + 1)
    p = np.asarray(spec.p(levels), dtype=float)

    borderline = (levels + 1.0) / (2.0 * levels + 1.0)
    ok = p <= borderline + 1e-15
    # A tail [m0, top] on which the borderline bound holds, with m0 at most
    # halfway through the range, counts as "holds for large m".
    tail_start = spec.floor + 1 + (top - spec.floor) // 2
    if ok[levels >= tail_start].all() and ok[levels >= tail_start].size > 0:
        return Verdict.PARABOLIC
    if a_value(spec, top) > blowup_threshold:
        return Verdict.PARABOLIC

    tail = levels >= tail_start
    ratios = (1.0 - p[tail]) / p[tail]
    if ratios.size and float(ratios.max()) < ratio_margin:
        return Verdict.TRANSIENT
    return Verdict.INCONCLUSIVE


def expected_upcrossings(spec: ChainSpec, m: int) -> float:
    """Expected number of upcrossings from m to m+1 for the walk started at m.

    1 + p_m/q_m + (p_m p_{m-1})/(q_m q_{m-1}) + ... down to level L+1,
    evaluated term-by-term in log-space.
    """
    if m < spec.floor + 1:
        raise DomainError(f"m must be >= floor+1, got {m}")
    levels = np.arange(m, spec.floor, -1)  # m, m-1, ..., L+1
    log_terms = np.cumsum(-spec.log_qp(levels))  # log(p/q) cumulated
    return 1.0 + float(np.sum(np.exp(log_terms)))


def simulate_chain(
    spec: ChainSpec,
    start: int,
    max_steps: int,
    rng: np.random.Generator,
    stop_level_high: int | None = None,
) -> ChainTrajectory:
    """Run one trajectory until absorption at the floor (or, optionally, at
    ``stop_level_high``) or until ``max_steps``.  Deterministic given ``rng``.
    """
    if start < spec.floor:
        raise DomainError("start below floor")
    if max_steps < 1:
        raise DomainError("max_steps must be >= 1")
    states = [start]
    level = start
    steps = 0
    while level > spec.floor and steps < max_steps:
        if stop_level_high is not None and level == stop_level_high:
            break
        u = rng.random()
        level = level + 1 if u <= spec.p(level) else level - 1
        states.append(level)
        steps += 1
    return ChainTrajectory(
        states=np.asarray(states, dtype=np.int64),
        absorbed=(level == spec.floor),
        steps_used=steps,
    )


def simulate_chain_batch(
    spec: ChainSpec,
    start: int,
    max_steps: int,
    n_runs: int,
    master_seed: int,
    stop_level_high: int | None = None,
    count_up_level: int | None = None,
    engine: str = "auto",
) -> dict:
    """Many independent trajectories, summary statistics only.

    Each run i draws from a stream seeded by (master_seed, i).  Returns a dict
    with per-run arrays ``absorbed``, ``hit_high``, ``final_level``, ``steps``
    and ``up_count`` (transitions count_up_level -> count_up_level+1).
    """
    from ._engine import get_engine

    if start < spec.floor:
        raise DomainError("start below floor")
    top_needed = min(start + max_steps + 1, spec.max_level or (start + max_steps + 1))
    if stop_level_high is not None:
        top_needed = min(top_needed, stop_level_high)
    p_table = spec.p_table(max(top_needed, spec.floor + 1))
    eng = get_engine(engine)
    return eng.chain_batch(
        p_table=p_table,
        floor=spec.floor,
        start=start,
        max_steps=max_steps,
        n_runs=n_runs,
        master_seed=master_seed,
        stop_high=-1 if stop_level_high is None else stop_level_high,
        count_up_level=-1 if count_up_level is None else count_up_level,
    )


def hitting_probability_linear_system(spec: ChainSpec, m: int) -> float:
    """Brute-force oracle for hit_up_before_floor via first-step equations.

    Solves h(j) = p_j h(j+1) + q_j h(j-1) on j = L+1..m with h(L)=0 and
    h(m+1)=1, then returns h(L+1).  Independent of the A_m code path.
    """
    if m < spec.floor + 1:
        raise DomainError(f"m must be >= floor+1, got {m}")
    levels = np.arange(spec.floor + 1, m + 1)
    n = levels.size
    p = np.asarray(spec.p(levels), dtype=float)
    q = 1.0 - p
    mat = np.eye(n)
    rhs = np.zeros(n)
    for i in range(n):
        if i + 1 < n:
            mat[i, i + 1] = -p[i]
        else:
            rhs[i] += p[i]
        if i - 1 >= 0:
            mat[i, i - 1] = -q[i]
    return float(np.linalg.solve(mat, rhs)[0])
