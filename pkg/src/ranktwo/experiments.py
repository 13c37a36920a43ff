"""Experiment recipes: chain analytics, parabolicity, area growth, coupling.

Each recipe returns a plain report dict embedding its resolved configuration
and master seed, so a run can be reproduced bit-for-bit from its own report.
The CLI wraps these; the acceptance suite calls them directly.
"""

from __future__ import annotations

import math

import numpy as np

from . import chain as chain_mod
from . import envelope as env_mod
from .chain import ChainSpec, Verdict
from .coupling import run_coupled_batch, statistical_dominance_test
from .errors import DomainError
from .geometry import Catenoid, Helicoid, HorizontalPlane, VerticalPlane, catenoid_area
from .martingale import SimConfig, simulate_paths
from .pathstats import EstimateWithCI, first_passage_time_bound_check

__all__ = [
    "spec_from_kind",
    "make_strategy",
    "chain_report",
    "parabolicity_experiment",
    "area_growth_experiment",
    "residual_experiment",
    "coupling_experiment",
]


def make_strategy(kind: str, a: float = 1.0, pitch: float = 1.0, height: float = 0.0):
    """Strategy factory for the config-file kinds."""
    if kind == "catenoid":
        return Catenoid(a=a)
    if kind == "helicoid":
        return Helicoid(pitch=pitch)
    if kind == "horizontal_plane":
        return HorizontalPlane(height=height)
    if kind == "vertical_plane":
        return VerticalPlane()
    raise DomainError(f"unknown strategy kind {kind!r}")


def _start_at_radius(strategy, radius: float):
    if isinstance(strategy, Catenoid):
        return strategy.point_at_radius(radius)
    if isinstance(strategy, Helicoid):
        return strategy.point_at(radius, 0.0)
    return np.array([radius, 0.0, strategy.base[2]])


def spec_from_kind(kind: str, **params) -> ChainSpec:
    """Chain spec factory for the config-file kinds."""
    if kind == "constant":
        return chain_mod.constant_chain(params["p"], params.get("L", 0))
    if kind in ("harmonic", "harmonic_borderline"):
        return chain_mod.harmonic_borderline_chain(params.get("L", 0))
    if kind in ("envelope_f1", "envelope_f2"):
        profile = kind.split("_")[1]
        c = params["c"]
        floor = params.get("L")
        if floor is None:
            floor = env_mod.min_valid_floor(profile, c)
        env = env_mod.Envelope(kind=profile, c=c, floor=floor)
        return env_mod.chain_spec_from_envelope(env)
    if kind == "table":
        return chain_mod.table_chain(params["values"], params.get("L", 0))
    raise DomainError(f"unknown chain kind {kind!r}")


def chain_report(
    spec: ChainSpec,
    m_max: int,
    horizon: int | None = None,
    blowup_threshold: float = 1e6,
) -> dict:
    """Level table (p_m, A_m, hitting, upcrossings) plus the verdict."""
    top = m_max if spec.max_level is None else min(m_max, spec.max_level)
    levels = np.arange(spec.floor + 1, top + 1)
    p = np.asarray(spec.p(levels), dtype=float)
    log_pq = -spec.log_qp(levels)
    s = np.cumsum(log_pq)  # S_m = log prod_{i<=m} p_i/q_i, S at the floor = 0
    a_vals = chain_mod.a_values_upto(spec, top)
    # E[u_m] = 1 + exp(S_m) * sum_{j=floor}^{m-1} exp(-S_j)
    c_cum = np.cumsum(np.exp(-np.concatenate(([0.0], s[:-1]))))
    with np.errstate(over="ignore"):
        e_up = 1.0 + np.exp(s) * c_cum
    verdict = chain_mod.is_parabolic(
        spec,
        horizon=horizon or max(top, spec.floor + 2),
        blowup_threshold=blowup_threshold,
    )
    report = {
        "config": {
            "kind": spec.kind,
            "floor": spec.floor,
            "params": spec.params,
            "m_max": m_max,
            "blowup_threshold": blowup_threshold,
        },
        "description": spec.description,
        "verdict": verdict.value,
        "a_final": float(a_vals[-1]),
        "a_extrapolated": chain_mod.a_value_extrapolated(spec, top),
        "table": {
            "m": levels.tolist(),
            "p": p.tolist(),
            "A": a_vals.tolist(),
            "hit_up_before_floor": (1.0 / a_vals).tolist(),
            "expected_upcrossings": e_up.tolist(),
        },
    }
    if spec.kind == "envelope_f1":
        crossover = env_mod.crossover_index(spec.params["c"])
        report["borderline_crossover"] = crossover
        report["borderline_holds_at_m_max"] = (
            env_mod.borderline_compare(spec.params["c"], top)
            is env_mod.Ordering.BELOW_OR_EQUAL
        )
    return report


def parabolicity_experiment(
    c: float = 1.0,
    a: float = 1.0,
    floor: int | None = None,
    n_paths: int = 10_000,
    master_seed: int = 0,
    dt: float | None = None,
    max_steps: int = 13_000_000,
    k_offsets: tuple[int, ...] = (2, 3, 4, 5),
    min_departures: int = 500,
    strategy_kind: str = "catenoid",
    pitch: float = 1.0,
    height: float = 0.0,
    engine: str = "auto",
) -> dict:
    """Absorption experiment against the f2 comparison chain.

    Runs paths from r = e^{L+1} under the radial clock until they hit the
    floor r = e^L or exhaust the step budget, then reports the absorbed
    fraction, the empirical P(theta_{k+1} < theta_L) against the chain
    ceiling 1/A_k, and the per-level dominance table.  The default strategy
    is the catenoid (contained in the envelope for c of order one); the
    horizontal plane is the classical recurrent sanity case, and the
    helicoid leaves every envelope.
    """
    floor = env_mod.min_valid_floor("f2", c) if floor is None else floor
    env = env_mod.Envelope(kind="f2", c=c, floor=floor)
    spec = env_mod.chain_spec_from_envelope(env)
    strategy = make_strategy(strategy_kind, a=a, pitch=pitch, height=height)
    ks = tuple(floor + off for off in k_offsets)
    cfg = SimConfig(
        inner_level=floor,
        step_mode="radial",
        dt=dt,
        max_steps=max_steps,
        track_walk=True,
        watch_levels=tuple(k + 1 for k in ks),
    )
    start = _start_at_radius(strategy, math.exp(floor + 1))
    batch = simulate_paths(strategy, start, cfg, n_paths, master_seed, engine=engine)

    hit_checks = []
    for k in ks:
        hits = batch.hit_before_floor(k + 1).astype(float)
        est = EstimateWithCI.from_samples(hits)
        ceiling = chain_mod.hit_up_before_floor(spec, k)
        hit_checks.append(
            {
                "k": k,
                "p_hat": est.mean,
                "std_error": est.std_error,
                "chain_ceiling": ceiling,
                "passed": bool(est.mean <= ceiling + 3.0 * est.std_error),
            }
        )
    dominance = statistical_dominance_test(
        batch.dom_up, batch.dom_down, spec, min_departures=min_departures
    )
    return {
        "config": {
            "experiment": "parabolicity",
            "c": c,
            "a": a,
            "floor": floor,
            "n_paths": n_paths,
            "master_seed": master_seed,
            "k_offsets": list(k_offsets),
            "min_departures": min_departures,
            "strategy_kind": strategy_kind,
            "pitch": pitch,
            "height": height,
            "sim": cfg.as_dict(),
        },
        "engine": batch.engine,
        "absorbed_fraction": batch.absorbed_fraction,
        "capped_fraction": 1.0 - batch.absorbed_fraction,
        "mean_steps": float(batch.steps.mean()),
        "hit_probability_checks": hit_checks,
        "dominance": dominance,
        "dominance_all_passed": bool(all(row["passed"] for row in dominance)),
    }


def area_growth_experiment(
    a: float = 1.0,
    floor: int = 0,
    rho_exponents: tuple[int, ...] = (3, 4, 5),
    exit_ks: tuple[int, ...] = (2, 3, 4),
    n_paths: int = 1_000,
    n_exit_paths: int = 1_000,
    master_seed: int = 0,
    dt: float | None = None,
    max_steps: int = 36_000_000,
    envelope_c: float | None = None,
    engine: str = "auto",
) -> dict:
    """Occupation-time growth of catenoid Brownian motion.

    One long-run batch measures occupation of {r <= e^j} for the given
    exponents (log-log slope and occupation/area ratios against the closed
    form), with first-arrival and upcrossing counters feeding the
    occupation-time ceiling.  Short exit runs check the two-barrier mean
    exit time against e^{2(k+1)} - e^{2(L+1)} per k.  When ``envelope_c``
    yields an admissible comparison chain at this floor, the ceiling is also
    evaluated with chain-oracle inputs.
    """
    strategy = Catenoid(a=a)
    rhos = tuple(math.exp(j) for j in rho_exponents)
    watch = tuple(j + 1 for j in rho_exponents)
    cfg = SimConfig(
        inner_level=floor,
        step_mode="radial",
        dt=dt,
        max_steps=max_steps,
        track_walk=True,
        watch_levels=watch,
        rho_grid=rhos,
    )
    start = strategy.point_at_radius(math.exp(floor + 1))
    batch = simulate_paths(strategy, start, cfg, n_paths, master_seed, engine=engine)

    occ = batch.occupation
    means = occ.mean(axis=0)
    ses = occ.std(axis=0, ddof=1) / math.sqrt(n_paths)
    areas = np.array([catenoid_area(r, a) for r in rhos])
    ratios = means / areas
    slope, intercept = np.polyfit(np.asarray(rho_exponents, dtype=float), np.log(means), 1)
    spread = float((ratios.max() - ratios.min()) / ratios.mean())

    spec = None
    if envelope_c is not None:
        env = env_mod.Envelope(kind="f2", c=envelope_c, floor=floor)
        if env_mod.condition_holds(env):
            spec = env_mod.chain_spec_from_envelope(env)

    bounds = []
    for j in rho_exponents:
        hit = batch.hit_before_floor(j + 1)
        ups = batch.upcrossings(j + 1)
        hit_prob = float(hit.mean())
        exp_up = float(ups[hit].mean()) if hit.any() else 0.0
        bound_measured = env_mod.occupation_bound(floor, j, hit_prob, exp_up)
        occ_mean = float(means[list(rho_exponents).index(j)])
        occ_se = float(ses[list(rho_exponents).index(j)])
        row = {
            "k": j,
            "occ_mean": occ_mean,
            "occ_se": occ_se,
            "hit_prob": hit_prob,
            "exp_upcrossings_given_hit": exp_up,
            "bound_measured_inputs": bound_measured,
            "passed_measured": bool(occ_mean + 3.0 * occ_se <= bound_measured),
        }
        if spec is not None:
            row["bound_chain_inputs"] = env_mod.occupation_bound(
                floor,
                j,
                chain_mod.hit_up_before_floor(spec, j),
                chain_mod.expected_upcrossings(spec, j),
            )
            row["passed_chain"] = bool(
                occ_mean + 3.0 * occ_se <= row["bound_chain_inputs"]
            )
        bounds.append(row)

    exit_checks = []
    for k in exit_ks:
        cfg_exit = SimConfig(
            inner_level=floor,
            step_mode="radial",
            dt=dt,
            max_steps=2_000_000,
            stop_at_level=k + 1,
        )
        bexit = simulate_paths(
            strategy, start, cfg_exit, n_exit_paths, master_seed + 1 + k, engine=engine
        )
        est, bound, ok = first_passage_time_bound_check(bexit, floor, k)
        exit_checks.append(
            {
                "k": k,
                "mean_exit_time": est.mean,
                "std_error": est.std_error,
                "bound": bound,
                "passed": ok,
            }
        )

    area_ratio_100 = catenoid_area(100.0, 1.0) / (math.pi * 100.0**2)
    return {
        "config": {
            "experiment": "area_growth",
            "a": a,
            "floor": floor,
            "rho_exponents": list(rho_exponents),
            "exit_ks": list(exit_ks),
            "n_paths": n_paths,
            "n_exit_paths": n_exit_paths,
            "master_seed": master_seed,
            "envelope_c": envelope_c,
            "sim": cfg.as_dict(),
        },
        "engine": batch.engine,
        "absorbed_fraction": batch.absorbed_fraction,
        "occupation_means": means.tolist(),
        "occupation_std_errors": ses.tolist(),
        "analytic_areas": areas.tolist(),
        "occupation_area_ratios": ratios.tolist(),
        "ratio_relative_spread": spread,
        "loglog_slope": float(slope),
        "growth_constant": float(math.exp(intercept)),
        "growth_constant_general_rho": float(math.exp(intercept) * math.e**2),
        "occupation_bounds": bounds,
        "exit_time_checks": exit_checks,
        "catenoid_area_ratio_rho100": area_ratio_100,
    }


def residual_experiment(
    a: float = 1.0,
    start_radius_exponent: float = 2.0,
    n_paths: int = 10_000,
    dt: float = 1e-4,
    max_time: float = 1.0,
    master_seed: int = 0,
    engine: str = "auto",
) -> dict:
    """Martingale residual test for the drift trio along catenoid paths."""
    strategy = Catenoid(a=a)
    cfg = SimConfig(
        inner_level=0,
        step_mode="fixed",
        dt=dt,
        max_time=max_time,
        max_steps=int(max_time / dt) + 8,
    )
    start = strategy.point_at_radius(math.exp(start_radius_exponent))
    batch = simulate_paths(strategy, start, cfg, n_paths, master_seed, engine=engine)
    rows = {}
    for key, vals in batch.residuals().items():
        est = EstimateWithCI.from_samples(vals)
        rows[key] = {
            "mean": est.mean,
            "std_error": est.std_error,
            "z": est.mean / est.std_error,
            "passed": bool(abs(est.mean) <= 3.0 * est.std_error),
        }
    return {
        "config": {
            "experiment": "residuals",
            "a": a,
            "start_radius_exponent": start_radius_exponent,
            "n_paths": n_paths,
            "dt": dt,
            "max_time": max_time,
            "master_seed": master_seed,
        },
        "engine": batch.engine,
        "residuals": rows,
        "all_passed": bool(all(r["passed"] for r in rows.values())),
    }


def coupling_experiment(
    n_runs: int = 100_000,
    master_seed: int = 0,
    floor: int = 0,
    p: float = 0.5,
    phi_low: float = 0.4,
    phi_high: float = 0.45,
    switch_level: int = 10,
    max_steps: int = 10_000,
    min_departures: int = 500,
    engine: str = "auto",
) -> dict:
    """Coupled synthetic runs: domination rate and Y's marginal law.

    X is the two-regime chain (phi_low below ``switch_level``, phi_high at
    and above); Y is the constant-p comparison chain.  Domination must hold
    pathwise in every run, and Y's per-level up-frequency must match p
    within three binomial standard errors wherever the level has at least
    ``min_departures`` departures.
    """
    spec = chain_mod.constant_chain(p, floor)
    levels = np.arange(floor + 1, floor + max_steps + 3)
    phi_table = np.where(levels < switch_level, phi_low, phi_high)
    out = run_coupled_batch(
        spec,
        phi_table,
        n_runs=n_runs,
        master_seed=master_seed,
        max_steps=max_steps,
        engine=engine,
    )
    tot = out["y_up"] + out["y_down"]
    marginals = []
    for i in np.nonzero(tot >= min_departures)[0]:
        n = int(tot[i])
        rate = float(out["y_up"][i] / n)
        sigma = math.sqrt(p * (1.0 - p) / n)
        marginals.append(
            {
                "level": int(floor + 1 + i),
                "departures": n,
                "up_rate": rate,
                "expected": p,
                "z": (rate - p) / sigma,
                "passed": bool(abs(rate - p) <= 3.0 * sigma),
            }
        )
    return {
        "config": {
            "experiment": "couple",
            "n_runs": n_runs,
            "master_seed": master_seed,
            "floor": floor,
            "p": p,
            "phi_low": phi_low,
            "phi_high": phi_high,
            "switch_level": switch_level,
            "max_steps": max_steps,
            "min_departures": min_departures,
        },
        "domination_rate": float(out["domination"].mean()),
        "y_absorbed_fraction": float(out["y_absorbed"].mean()),
        "x_absorbed_fraction": float(out["x_absorbed"].mean()),
        "marginals": marginals,
        "marginals_all_passed": bool(all(m["passed"] for m in marginals)),
    }
