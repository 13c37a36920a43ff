"""Dominating-chain coupling: build Y from X outcomes plus i.i.d. uniforms.

The construction consumes one uniform per step.  With Y at m strictly above
X (or X finished), Y steps up when U <= p_m.  With Y = X = m, Y copies an
up-move of X and otherwise steps up when U <= (p_m - phi_m)/(1 - phi_m),
where phi_m is X's true conditional up-probability at this step.  The
resulting Y is a Markov chain with transition probabilities p_m and
dominates X pathwise.

Exact coupling needs phi, so it is only available for synthetic oracles;
for SDE-driven walks phi is unobservable and the module falls back to the
one-sided statistical dominance test on per-level departure counts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ._engine import get_engine
from .chain import ChainSpec
from .errors import CapabilityError, DomainError

__all__ = [
    "SyntheticChainOracle",
    "WalkOutcomeOracle",
    "build_dominating_chain",
    "verify_domination",
    "run_coupled_batch",
    "statistical_dominance_test",
]


@dataclass
class SyntheticChainOracle:
    """X-walk source with known per-step up-probabilities phi.

    ``phi`` maps a level to the up-probability; ``phi_late`` (active from
    step ``switch_step`` on) makes the chain step-inhomogeneous.  Moves are
    realized from ``rng``, independent of the Y-side uniforms.
    """

    floor: int
    phi: Callable[[int], float]
    rng: np.random.Generator
    phi_late: Callable[[int], float] | None = None
    switch_step: int | None = None
    has_phi: bool = field(default=True, init=False)

    def phi_at(self, level: int, step: int) -> float:
        if self.phi_late is not None and self.switch_step is not None and step >= self.switch_step:
            value = self.phi_late(level)
        else:
            value = self.phi(level)
        if not 0.0 <= value < 1.0:
            raise DomainError(f"phi({level}) = {value} outside [0, 1)")
        return value

    def step(self, level: int, step: int) -> tuple[int, float]:
        """Realize X's move from ``level``; returns (new level, phi used)."""
        value = self.phi_at(level, step)
        up = self.rng.random() <= value
        return (level + 1 if up else level - 1), value


@dataclass
class WalkOutcomeOracle:
    """Move-only oracle (e.g. a discretized SDE walk): no phi available."""

    floor: int
    moves: np.ndarray  # +1 / -1 per step; exhausted = walk ended
    has_phi: bool = field(default=False, init=False)
    _cursor: int = field(default=0, init=False)

    def step(self, level: int, step: int) -> tuple[int | None, None]:
        if self._cursor >= len(self.moves):
            return None, None
        move = int(self.moves[self._cursor])
        self._cursor += 1
        return level + move, None


def build_dominating_chain(
    oracle, spec: ChainSpec, uniforms
) -> tuple[np.ndarray, list, bool]:
    """One coupled run driven by an explicit uniform sequence.

    Returns (Y levels, X levels, domination_held).  X entries are None once
    the walk has ended; the half-completed step is excluded from the
    domination check.  Ends when Y hits the floor or the uniforms run out.
    """
    floor = spec.floor
    y_levels = [floor + 1]
    x_levels: list = [floor + 1]
    held = True
    y = floor + 1
    x: int | None = floor + 1
    for n, u in enumerate(uniforms, start=1):
        if y == floor:
            break
        x_old = x
        x_new: int | None = x
        phi = None
        if x_old is not None and x_old > floor:
            if y == x_old and not oracle.has_phi:
                raise CapabilityError(
                    "equal-levels branch needs the oracle's phi; "
                    "use statistical_dominance_test for SDE outcomes"
                )
            x_new, phi = oracle.step(x_old, n)
        if x_old is not None and x_old == y and x_old > floor and phi is not None:
            pm = spec.p(y)
            if phi > pm + 1e-12:
                raise DomainError(
                    f"oracle phi={phi} exceeds the chain ceiling p_{y}={pm}"
                )
        # Y update per the three-branch rule; one uniform per step
        pm = spec.p(y)
        if x_old is None or y > x_old:
            y = y + 1 if u <= pm else y - 1
        elif y == x_old:
            if x_new == y + 1:
                y = y + 1
            else:
                boost = (pm - phi) / (1.0 - phi)
                y = y + 1 if u <= boost else y - 1
        else:  # y < x_old: domination already broken, step independently
            held = False
            y = y + 1 if u <= pm else y - 1
        x = x_new
        y_levels.append(y)
        x_levels.append(x)
        if x is not None and x > y:
            held = False
    return np.asarray(y_levels, dtype=np.int64), x_levels, held


def verify_domination(x_levels, y_levels) -> bool:
    """True iff Y_n >= X_n wherever both are defined."""
    for xv, yv in zip(x_levels, y_levels):
        if xv is None:
            continue
        if yv < xv:
            return False
    return True


def run_coupled_batch(
    spec: ChainSpec,
    phi_table: np.ndarray,
    n_runs: int,
    master_seed: int,
    max_steps: int = 10_000,
    phi_table_late: np.ndarray | None = None,
    switch_step: int | None = None,
    dom_levels: int | None = None,
    engine: str = "auto",
) -> dict:
    """Many coupled runs via the engine kernels; aggregate statistics only.

    ``phi_table[i]`` is phi at level floor+1+i and must not exceed the
    chain's p at the same level (validated here).  Returns per-run
    domination flags plus per-level up/down counts for X and Y.
    """
    top = spec.floor + 1 + max_steps + 1
    p_tab = spec.p_table(top)
    phi_a = np.asarray(phi_table, dtype=float)
    if phi_a.size < p_tab.size:
        raise DomainError("phi table must cover every reachable level")
    phi_a = phi_a[: p_tab.size]
    phi_b = phi_a if phi_table_late is None else np.asarray(
        phi_table_late, dtype=float
    )[: p_tab.size]
    for tab, tag in ((phi_a, "phi"), (phi_b, "phi_late")):
        if np.any(tab > p_tab + 1e-12):
            raise DomainError(f"{tag} exceeds the chain ceiling at some level")
        if np.any((tab < 0.0) | (tab >= 1.0)):
            raise DomainError(f"{tag} values must lie in [0, 1)")
    eng = get_engine(engine)
    if dom_levels is None:
        dom_levels = min(p_tab.size, 4096)
    return eng.coupled_batch(
        p_table=p_tab,
        phi_table=phi_a,
        phi_table_late=phi_b,
        switch_step=-1 if switch_step is None else switch_step,
        floor=spec.floor,
        max_steps=max_steps,
        n_runs=n_runs,
        master_seed=master_seed,
        dom_levels=dom_levels,
    )


def statistical_dominance_test(
    up_counts: np.ndarray,
    down_counts: np.ndarray,
    spec: ChainSpec,
    min_departures: int = 500,
) -> list[dict]:
    """One-sided binomial check of per-level up-rates against the p_m ceiling.

    For each level with at least ``min_departures`` departures, flags
    failure when the empirical up-rate exceeds p_m by more than three
    binomial standard deviations.  Index i of the count arrays is level
    floor+1+i, the convention of the engine departure counters.
    """
    up = np.asarray(up_counts, dtype=np.int64)
    down = np.asarray(down_counts, dtype=np.int64)
    report = []
    for i in range(up.size):
        n = int(up[i] + down[i])
        if n < min_departures:
            continue
        level = spec.floor + 1 + i
        if spec.max_level is not None and level > spec.max_level:
            break
        pm = float(spec.p(level))
        rate = up[i] / n
        sigma = math.sqrt(pm * (1.0 - pm) / n)
        report.append(
            {
                "level": level,
                "departures": n,
                "up_rate": float(rate),
                "ceiling": pm,
                "z": float((rate - pm) / sigma),
                "passed": bool(rate <= pm + 3.0 * sigma),
            }
        )
    return report
