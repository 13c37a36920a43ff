"""Region profiles f(r), admissibility, and the comparison-chain bounds.

A region {|x3| <= f(r), r >= e^L} confines the radial process; the envelope
turns into transition ceilings p_m = 1/2 + f(e^{m+1})^2 / (4 e^{2m-2}) for the
comparison chain.  The two built-in profiles are

    f1(r) = c r / sqrt(log r * log log r)      (parabolicity regime)
    f2(r) = c r / (sqrt(log r) * log log r)    (area-growth regime)

Everything involving f(e^{m+1}) is evaluated through log f so that large
levels do not overflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .chain import ChainSpec
from .errors import AdmissibilityError, DomainError, SearchExhaustedError

__all__ = [
    "Envelope",
    "Ordering",
    "eval_f",
    "condition_lhs",
    "condition_holds",
    "min_valid_floor",
    "pm_from_envelope",
    "closed_form_pm",
    "chain_spec_from_envelope",
    "borderline_compare",
    "crossover_index",
    "log_ratio_sum_bound",
    "taylor_radius_min_level",
    "occupation_bound",
]

E4 = math.exp(4.0)
TAYLOR_RADIUS = 1.0 / 6.0  # |x| range on which |log(1/2 + x) - log(1/2)| <= 3|x|


class Ordering(Enum):
    BELOW_OR_EQUAL = "below_or_equal"
    ABOVE = "above"


@dataclass(frozen=True)
class Envelope:
    """A profile f(r) with scale constant c and floor level L.

    ``kind`` is one of "f1", "f2", "custom".  Custom profiles interpolate
    ``table`` (pairs (r, f(r))) piecewise-linearly in log r and must be
    non-negative and monotone non-decreasing; they only answer queries inside
    their tabulated range.
    """

    kind: str
    c: float = 1.0
    floor: int = 0
    table: tuple[tuple[float, float], ...] | None = None

    def __post_init__(self):
        if self.kind not in ("f1", "f2", "custom"):
            raise DomainError(f"unknown envelope kind {self.kind!r}")
        if self.kind != "custom":
            if self.c <= 0:
                raise DomainError("scale constant c must be positive")
            if self.table is not None:
                raise DomainError("table only allowed for custom envelopes")
        else:
            if not self.table or len(self.table) < 2:
                raise DomainError("custom envelope needs >= 2 table nodes")
            rs = np.array([p[0] for p in self.table], dtype=float)
            fs = np.array([p[1] for p in self.table], dtype=float)
            if np.any(rs[1:] <= rs[:-1]):
                raise DomainError("table radii must be strictly increasing")
            if np.any(fs < 0.0):
                raise DomainError("profile must be non-negative")
            if np.any(fs[1:] < fs[:-1] - 1e-12):
                raise DomainError("profile must be monotone non-decreasing")
        if self.floor < 0:
            raise DomainError("floor must be a non-negative integer")

    def log_f(self, log_r) -> np.ndarray:
        """log f at log r; -inf where f vanishes.  Vector-friendly."""
        y = np.asarray(log_r, dtype=float)
        if self.kind == "custom":
            ys = np.log([p[0] for p in self.table])
            fs = np.array([p[1] for p in self.table], dtype=float)
            if np.any(y < ys[0] - 1e-12) or np.any(y > ys[-1] + 1e-12):
                raise DomainError("query outside the tabulated radius range")
            with np.errstate(divide="ignore"):
                return np.log(np.interp(y, ys, fs))
        if np.any(y <= 1.0):
            raise DomainError("profile undefined where log log r <= 0")
        if self.kind == "f1":
            return math.log(self.c) + y - 0.5 * (np.log(y) + np.log(np.log(y)))
        return math.log(self.c) + y - 0.5 * np.log(y) - np.log(np.log(y))


def eval_f(env: Envelope, r) -> np.ndarray | float:
    """f(r) for radii whose logarithms are in the profile's domain."""
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr <= 0.0):
        raise DomainError("radius must be positive")
    out = np.exp(env.log_f(np.log(r_arr)))
    return float(out) if np.isscalar(r) else out


def condition_lhs(env: Envelope, m) -> np.ndarray | float:
    """f(e^{m+1})^2 / (4 e^{2m-2}), the admissibility left-hand side."""
    marr = np.asarray(m, dtype=float)
    logf = env.log_f(marr + 1.0)
    with np.errstate(over="ignore"):
        out = np.exp(2.0 * logf - math.log(4.0) - (2.0 * marr - 2.0))
    return float(out) if np.isscalar(m) else out


def condition_holds(env: Envelope) -> bool:
    """Whether the left-hand side stays below 1/2 for every m >= floor+1.

    For f1/f2 the left side is c^2 e^4 / (4 g(m+1)) with g(x) = x log x or
    x (log x)^2, both strictly increasing for x >= 2, so checking a short
    initial range plus the decreasing-tail certificate covers all levels.
    Custom tables are checked on every tabulated level.
    """
    lo = env.floor + 1
    if env.kind == "custom":
        log_r_max = math.log(env.table[-1][0])
        hi = int(math.floor(log_r_max - 1.0))
        if hi < lo:
            return True
        ms = np.arange(lo, hi + 1)
        return bool(np.all(condition_lhs(env, ms) < 0.5))
    ms = np.arange(lo, lo + 16)
    vals = condition_lhs(env, ms)
    if np.any(vals >= 0.5):
        return False
    # certificate: beyond the checked range the sequence keeps decreasing
    return bool(np.all(np.diff(vals) < 0.0))


def min_valid_floor(kind: str, c: float, search_bound: int = 10_000) -> int:
    """Smallest floor L <= search_bound making the profile admissible."""
    if kind not in ("f1", "f2"):
        raise DomainError("min_valid_floor only applies to f1/f2 profiles")
    for floor in range(search_bound + 1):
        if condition_holds(Envelope(kind=kind, c=c, floor=floor)):
            return floor
    raise SearchExhaustedError(
        f"no admissible floor below {search_bound} for {kind}, c={c}"
    )


def pm_from_envelope(env: Envelope, m) -> np.ndarray | float:
    """Comparison-chain up-probability p_m = 1/2 + condition_lhs(m).

    Requires an admissible envelope and m >= floor+1.  This is the generic
    code path; ``closed_form_pm`` provides the independent simplified form
    for f1/f2.
    """
    if not condition_holds(env):
        raise AdmissibilityError(
            "envelope violates the transition-bound condition; raise the floor"
        )
    marr = np.atleast_1d(np.asarray(m))
    if np.any(marr < env.floor + 1):
        raise DomainError(f"m must be >= floor+1={env.floor + 1}")
    return 0.5 + condition_lhs(env, m)


def closed_form_pm(kind: str, c: float, m) -> np.ndarray | float:
    """The simplified p_m displays for the two built-in profiles.

    f1: 1/2 + (c^2 e^4 / 4) / ((m+1) log(m+1))
    f2: 1/2 + (c^2 e^4 / 4) / ((m+1) (log(m+1))^2)
    """
    marr = np.asarray(m, dtype=float)
    lg = np.log(marr + 1.0)
    if kind == "f1":
        out = 0.5 + (c * c * E4 / 4.0) / ((marr + 1.0) * lg)
    elif kind == "f2":
        out = 0.5 + (c * c * E4 / 4.0) / ((marr + 1.0) * lg * lg)
    else:
        raise DomainError("closed form only exists for f1/f2")
    return float(out) if np.isscalar(m) else out


def chain_spec_from_envelope(env: Envelope) -> ChainSpec:
    """The comparison ChainSpec generated by an admissible envelope."""
    if not condition_holds(env):
        raise AdmissibilityError(
            "envelope violates the transition-bound condition; raise the floor"
        )
    max_level = None
    if env.kind == "custom":
        max_level = int(math.floor(math.log(env.table[-1][0]) - 1.0))
    return ChainSpec(
        floor=env.floor,
        up_prob=lambda marr: 0.5 + condition_lhs(env, marr),
        description=f"envelope {env.kind} c={env.c} L={env.floor}",
        max_level=max_level,
        kind=f"envelope_{env.kind}",
        params={"c": env.c},
    )


def borderline_compare(c: float, m: int) -> Ordering:
    """Order p_m(f1, c) against the borderline value (m+1)/(2m+1).

    Uses the equivalent inequality: p_m <= (m+1)/(2m+1) iff
    (4/(c^2 e^4)) (m+1) log(m+1) >= 4m + 2.
    """
    if m < 2:
        raise DomainError("borderline comparison needs m >= 2")
    lhs = (4.0 / (c * c * E4)) * (m + 1.0) * math.log(m + 1.0)
    return Ordering.BELOW_OR_EQUAL if lhs >= 4.0 * m + 2.0 else Ordering.ABOVE


def crossover_index(c: float) -> int:
    """Smallest m >= 2 with p_m(f1, c) <= (m+1)/(2m+1).

    Beyond log(m+1) >= c^2 e^4 - 1 the defining gap is increasing in m, so
    the inequality holds for every level past the returned index.  For c of
    order 1 the crossover sits near exp(c^2 e^4), far beyond any simulation
    range; the value is exact integer arithmetic on the search bracket.
    """

    def gap(m: int) -> float:
        return (4.0 / (c * c * E4)) * (m + 1.0) * math.log(m + 1.0) - (4.0 * m + 2.0)

    if gap(2) >= 0.0:
        return 2
    lo, hi = 2, 4
    while gap(hi) < 0.0:
        lo, hi = hi, hi * 8
        if hi > 10**40:
            raise SearchExhaustedError("crossover search bracket exhausted")
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if gap(mid) >= 0.0:
            hi = mid
        else:
            lo = mid
    return hi


def taylor_radius_min_level(c: float) -> int:
    """Smallest m where the f2 excess x_m drops inside the Taylor radius 1/6."""
    m = 1
    while (c * c * E4 / 4.0) / ((m + 1.0) * math.log(m + 1.0) ** 2) > TAYLOR_RADIUS:
        m += 1
    return m


def log_ratio_sum_bound(
    c: float, m_lo: int, m_hi: int
) -> tuple[float, bool]:
    """Sum of log(p_m/q_m) for the f2 chain plus the per-term bound check.

    Returns the partial sum over m = m_lo..m_hi and whether every term with
    x_m <= 1/6 satisfies log(p_m/q_m) <= (3 c^2 e^4 / 2) / ((m+1) log^2(m+1)).
    """
    if m_lo < 2:
        raise DomainError("m_lo must be >= 2")
    if m_hi < m_lo:
        raise DomainError("empty range")
    tilde_c = 1.5 * c * c * E4
    total = 0.0
    ok = True
    for block_lo in range(m_lo, m_hi + 1, 2_000_000):
        block_hi = min(block_lo + 2_000_000 - 1, m_hi)
        m = np.arange(block_lo, block_hi + 1, dtype=float)
        lg = np.log(m + 1.0)
        x = (c * c * E4 / 4.0) / ((m + 1.0) * lg * lg)
        terms = np.log1p(2.0 * x) - np.log1p(-2.0 * x)
        total += float(terms.sum())
        applicable = x <= TAYLOR_RADIUS
        bound = tilde_c / ((m + 1.0) * lg * lg)
        if not np.all(terms[applicable] <= bound[applicable] + 1e-15):
            ok = False
    return total, ok


def occupation_bound(L: int, k: int, hit_prob: float, exp_upcrossings: float) -> float:
    """Ceiling for the expected occupation time of {r <= e^k}.

    e^{2(k+1)} - e^{2(L+1)} + P(theta_{k+1} < theta_L) (e^{2(k+1)} - e^{2k})
    E[U_k | theta_{k+1} < theta_L].
    """
    if k <= L + 1:
        raise DomainError("k must exceed L+1")
    if not 0.0 <= hit_prob <= 1.0:
        raise DomainError("hit_prob must be a probability")
    if exp_upcrossings < 0.0:
        raise DomainError("expected upcrossings must be non-negative")
    base = math.exp(2.0 * (k + 1)) - math.exp(2.0 * (L + 1))
    per_up = math.exp(2.0 * (k + 1)) - math.exp(2.0 * k)
    return base + hit_prob * per_up * exp_upcrossings
