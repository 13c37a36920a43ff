"""Experiment driver: config parsing, dispatch, machine-readable reports.

Config files are INI-style text with sections named after the modules they
configure ([chain], [envelope], [strategy], [sim], [coupling], [output]).
Unknown sections or keys are rejected.  Every run writes ``report.json``
embedding the fully resolved configuration and master seed; re-running the
same configuration reproduces the report byte-for-byte.  A report file can
itself be passed back via --config to repeat the run.

Exit codes: 0 success, 2 configuration or validation error, 3 simulation or
estimation error, 4 at least one experiment check failed.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import json
import math
import sys
from dataclasses import replace
from pathlib import Path

from . import envelope as env_mod
from . import experiments as exp
from .errors import (
    AdmissibilityError,
    CapabilityError,
    DomainError,
    EstimationError,
    SearchExhaustedError,
    SimulationError,
)
from .martingale import SimConfig, simulate_path

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SIM = 3
EXIT_CHECK = 4

_ALLOWED_KEYS = {
    "chain": {"kind", "p", "c", "l", "values", "m_max", "horizon", "blowup_threshold"},
    "envelope": {"kind", "c", "l", "m_max", "m_lo", "m_hi", "search_bound"},
    "strategy": {"kind", "a", "pitch", "height"},
    "sim": {
        "paths",
        "seed",
        "dt",
        "max_steps",
        "max_time",
        "k_offsets",
        "rho_exponents",
        "exit_ks",
        "exit_paths",
        "floor",
        "envelope_c",
        "min_departures",
    },
    "coupling": {
        "runs",
        "p",
        "phi_low",
        "phi_high",
        "switch_level",
        "max_steps",
        "floor",
        "min_departures",
        "seed",
    },
    "output": {"dir"},
}


def _parse_value(raw: str):
    text = raw.strip()
    if "," in text:
        return [_parse_value(part) for part in text.split(",") if part.strip()]
    lowered = text.lower()
    if lowered in ("true", "yes", "on"):
        return True
    if lowered in ("false", "no", "off"):
        return False
    if lowered in ("inf", "infinity"):
        return math.inf
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        pass
    return text


def load_config(path: str | None) -> dict:
    """Read an INI config (or a previously emitted report.json)."""
    if path is None:
        return {}
    text = Path(path).read_text()
    if text.lstrip().startswith("{"):
        report = json.loads(text)
        if "config" not in report:
            raise DomainError("JSON config must be an emitted report with a 'config' key")
        return {"_rerun": report["config"]}
    parser = configparser.ConfigParser()
    parser.read_string(text)
    out: dict = {}
    for section in parser.sections():
        if section not in _ALLOWED_KEYS:
            raise DomainError(f"unknown config section [{section}]")
        out[section] = {}
        for key, raw in parser.items(section):
            if key not in _ALLOWED_KEYS[section]:
                raise DomainError(f"unknown key {key!r} in section [{section}]")
            out[section][key] = _parse_value(raw)
    return out


def _write_report(outdir: Path, report: dict) -> None:
    outdir.mkdir(parents=True, exist_ok=True)
    (outdir / "report.json").write_text(
        json.dumps(report, indent=2, sort_keys=True) + "\n"
    )


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _section(cfg: dict, name: str) -> dict:
    return dict(cfg.get(name, {}))


def _as_tuple(value, default):
    if value is None:
        return default
    if isinstance(value, (int, float)):
        return (int(value),)
    return tuple(int(v) for v in value)


def _dump_traces(args, cfg_sim: SimConfig, strategy, start, outdir: Path) -> None:
    capped = replace(cfg_sim, max_steps=min(cfg_sim.max_steps, 200_000))
    for i in range(args.trace):
        record = simulate_path(strategy, start, capped, args.seed, replication=i)
        rows = [
            (t, p[0], p[1], p[2])
            for t, p in zip(record.times.tolist(), record.positions.tolist())
        ]
        _write_csv(outdir / f"trace_{i:03d}.csv", ["t", "x1", "x2", "x3"], rows)


def cmd_chain(args, cfg) -> int:
    if "_rerun" in cfg:
        section = cfg["_rerun"]
        spec = exp.spec_from_kind(section["kind"], **section["params"],
                                  L=section["floor"])
        m_max = section["m_max"]
        blowup = section.get("blowup_threshold", 1e6)
    else:
        section = _section(cfg, "chain")
        kind = section.get("kind", "harmonic")
        params = {}
        if "p" in section:
            params["p"] = float(section["p"])
        if "c" in section:
            params["c"] = float(section["c"])
        if "l" in section:
            params["L"] = int(section["l"])
        if "values" in section:
            params["values"] = [float(v) for v in section["values"]]
        spec = exp.spec_from_kind(kind, **params)
        m_max = int(section.get("m_max", 100))
        blowup = float(section.get("blowup_threshold", 1e6))
    report = exp.chain_report(spec, m_max, blowup_threshold=blowup)
    outdir = Path(args.out)
    _write_report(outdir, report)
    table = report["table"]
    _write_csv(
        outdir / "chain_table.csv",
        ["m", "p", "A", "hit_up_before_floor", "expected_upcrossings"],
        zip(table["m"], table["p"], table["A"], table["hit_up_before_floor"],
            table["expected_upcrossings"]),
    )
    print(f"verdict: {report['verdict']}  A_final={report['a_final']:.6g}")
    return EXIT_OK


def cmd_envelope(args, cfg) -> int:
    section = cfg["_rerun"] if "_rerun" in cfg else _section(cfg, "envelope")
    kind = section.get("kind", "f2")
    c = float(section.get("c", 1.0))
    m_max = int(section.get("m_max", 1000))
    floor = section.get("l", section.get("floor"))
    floor = env_mod.min_valid_floor(kind, c) if floor is None else int(floor)
    env = env_mod.Envelope(kind=kind, c=c, floor=floor)
    holds = env_mod.condition_holds(env)
    report = {
        "config": {"experiment": "envelope", "kind": kind, "c": c, "floor": floor,
                   "m_max": m_max},
        "condition_holds": holds,
        "min_valid_floor": env_mod.min_valid_floor(kind, c),
    }
    if holds:
        import numpy as np

        ms = np.arange(floor + 1, m_max + 1)
        pm = env_mod.pm_from_envelope(env, ms)
        closed = env_mod.closed_form_pm(kind, c, ms)
        report["max_closed_form_error"] = float(np.max(np.abs(pm - closed)))
        outdir = Path(args.out)
        outdir.mkdir(parents=True, exist_ok=True)
        _write_csv(outdir / "pm_table.csv", ["m", "pm", "pm_closed_form"],
                   zip(ms.tolist(), pm.tolist(), closed.tolist()))
    if kind == "f2":
        m_lo = int(section.get("m_lo", max(2, env_mod.taylor_radius_min_level(c))))
        m_hi = int(section.get("m_hi", 10**6))
        total, ok = env_mod.log_ratio_sum_bound(c, m_lo, m_hi)
        report["log_ratio_sum"] = {"m_lo": m_lo, "m_hi": m_hi, "sum": total,
                                   "taylor_bound_ok": ok}
    if kind == "f1":
        report["borderline_crossover"] = env_mod.crossover_index(c)
    _write_report(Path(args.out), report)
    print(f"condition_holds={holds}  min_valid_floor={report['min_valid_floor']}")
    return EXIT_OK


def cmd_parabolicity(args, cfg) -> int:
    if "_rerun" in cfg:
        s = cfg["_rerun"]
        kwargs = dict(
            c=s["c"], a=s["a"], floor=s["floor"], n_paths=s["n_paths"],
            master_seed=s["master_seed"], k_offsets=tuple(s["k_offsets"]),
            min_departures=s["min_departures"], strategy_kind=s["strategy_kind"],
            pitch=s["pitch"], height=s["height"], dt=s["sim"]["dt"],
            max_steps=s["sim"]["max_steps"],
        )
    else:
        env_cfg = _section(cfg, "envelope")
        strat = _section(cfg, "strategy")
        sim = _section(cfg, "sim")
        kwargs = dict(
            c=float(env_cfg.get("c", 1.0)),
            a=float(strat.get("a", 1.0)),
            floor=(int(sim["floor"]) if "floor" in sim else
                   (int(env_cfg["l"]) if "l" in env_cfg else None)),
            n_paths=int(args.paths or sim.get("paths", 10_000)),
            master_seed=int(args.seed if args.seed is not None else sim.get("seed", 0)),
            k_offsets=_as_tuple(sim.get("k_offsets"), (2, 3, 4, 5)),
            min_departures=int(sim.get("min_departures", 500)),
            strategy_kind=strat.get("kind", "catenoid"),
            pitch=float(strat.get("pitch", 1.0)),
            height=float(strat.get("height", 0.0)),
            dt=float(args.dt) if args.dt is not None else sim.get("dt"),
            max_steps=int(sim.get("max_steps", 13_000_000)),
        )
    report = exp.parabolicity_experiment(engine=args.engine, **kwargs)
    outdir = Path(args.out)
    _write_report(outdir, report)
    _write_csv(
        outdir / "hit_checks.csv",
        ["k", "p_hat", "std_error", "chain_ceiling", "passed"],
        [(r["k"], r["p_hat"], r["std_error"], r["chain_ceiling"], r["passed"])
         for r in report["hit_probability_checks"]],
    )
    _write_csv(
        outdir / "dominance.csv",
        ["level", "departures", "up_rate", "ceiling", "z", "passed"],
        [(r["level"], r["departures"], r["up_rate"], r["ceiling"], r["z"], r["passed"])
         for r in report["dominance"]],
    )
    if args.trace:
        strategy = exp.make_strategy(report["config"]["strategy_kind"],
                                     a=report["config"]["a"],
                                     pitch=report["config"]["pitch"],
                                     height=report["config"]["height"])
        cfg_sim = SimConfig(inner_level=report["config"]["floor"], step_mode="radial",
                            dt=report["config"]["sim"]["dt"], track_walk=False)
        start = exp._start_at_radius(strategy, math.exp(report["config"]["floor"] + 1))
        _dump_traces(args, cfg_sim, strategy, start, outdir)
    ok = (
        all(r["passed"] for r in report["hit_probability_checks"])
        and report["dominance_all_passed"]
    )
    print(f"absorbed_fraction={report['absorbed_fraction']:.4f}  checks_ok={ok}")
    return EXIT_OK if ok else EXIT_CHECK


def cmd_area_growth(args, cfg) -> int:
    if "_rerun" in cfg:
        s = cfg["_rerun"]
        kwargs = dict(
            a=s["a"], floor=s["floor"], rho_exponents=tuple(s["rho_exponents"]),
            exit_ks=tuple(s["exit_ks"]), n_paths=s["n_paths"],
            n_exit_paths=s["n_exit_paths"], master_seed=s["master_seed"],
            envelope_c=s["envelope_c"], dt=s["sim"]["dt"],
            max_steps=s["sim"]["max_steps"],
        )
    else:
        strat = _section(cfg, "strategy")
        sim = _section(cfg, "sim")
        kwargs = dict(
            a=float(strat.get("a", 1.0)),
            floor=int(sim.get("floor", 0)),
            rho_exponents=_as_tuple(sim.get("rho_exponents"), (3, 4, 5)),
            exit_ks=_as_tuple(sim.get("exit_ks"), (2, 3, 4)),
            n_paths=int(args.paths or sim.get("paths", 1000)),
            n_exit_paths=int(sim.get("exit_paths", 1000)),
            master_seed=int(args.seed if args.seed is not None else sim.get("seed", 0)),
            envelope_c=(float(sim["envelope_c"]) if "envelope_c" in sim else None),
            dt=float(args.dt) if args.dt is not None else sim.get("dt"),
            max_steps=int(sim.get("max_steps", 36_000_000)),
        )
    report = exp.area_growth_experiment(engine=args.engine, **kwargs)
    outdir = Path(args.out)
    _write_report(outdir, report)
    _write_csv(
        outdir / "occupation.csv",
        ["rho_exponent", "occ_mean", "occ_se", "analytic_area", "ratio"],
        zip(report["config"]["rho_exponents"], report["occupation_means"],
            report["occupation_std_errors"], report["analytic_areas"],
            report["occupation_area_ratios"]),
    )
    _write_csv(
        outdir / "exit_checks.csv",
        ["k", "mean_exit_time", "std_error", "bound", "passed"],
        [(r["k"], r["mean_exit_time"], r["std_error"], r["bound"], r["passed"])
         for r in report["exit_time_checks"]],
    )
    _write_csv(
        outdir / "occupation_bounds.csv",
        ["k", "occ_mean", "bound_measured_inputs", "passed_measured"],
        [(r["k"], r["occ_mean"], r["bound_measured_inputs"], r["passed_measured"])
         for r in report["occupation_bounds"]],
    )
    if args.trace:
        strategy = exp.make_strategy("catenoid", a=report["config"]["a"])
        cfg_sim = SimConfig(inner_level=report["config"]["floor"], step_mode="radial",
                            dt=report["config"]["sim"]["dt"], track_walk=False)
        start = exp._start_at_radius(strategy, math.exp(report["config"]["floor"] + 1))
        _dump_traces(args, cfg_sim, strategy, start, outdir)
    ok = (
        all(r["passed"] for r in report["exit_time_checks"])
        and all(r["passed_measured"] for r in report["occupation_bounds"])
    )
    print(
        f"slope={report['loglog_slope']:.3f}  "
        f"ratio_spread={report['ratio_relative_spread']:.3f}  checks_ok={ok}"
    )
    return EXIT_OK if ok else EXIT_CHECK


def cmd_couple(args, cfg) -> int:
    if "_rerun" in cfg:
        s = cfg["_rerun"]
        kwargs = dict(
            n_runs=s["n_runs"], master_seed=s["master_seed"], floor=s["floor"],
            p=s["p"], phi_low=s["phi_low"], phi_high=s["phi_high"],
            switch_level=s["switch_level"], max_steps=s["max_steps"],
            min_departures=s["min_departures"],
        )
    else:
        section = _section(cfg, "coupling")
        kwargs = dict(
            n_runs=int(args.paths or section.get("runs", 100_000)),
            master_seed=int(args.seed if args.seed is not None else section.get("seed", 0)),
            floor=int(section.get("floor", 0)),
            p=float(section.get("p", 0.5)),
            phi_low=float(section.get("phi_low", 0.4)),
            phi_high=float(section.get("phi_high", 0.45)),
            switch_level=int(section.get("switch_level", 10)),
            max_steps=int(section.get("max_steps", 10_000)),
            min_departures=int(section.get("min_departures", 500)),
        )
    report = exp.coupling_experiment(engine=args.engine, **kwargs)
    outdir = Path(args.out)
    _write_report(outdir, report)
    _write_csv(
        outdir / "marginals.csv",
        ["level", "departures", "up_rate", "expected", "z", "passed"],
        [(r["level"], r["departures"], r["up_rate"], r["expected"], r["z"], r["passed"])
         for r in report["marginals"]],
    )
    ok = report["domination_rate"] == 1.0 and report["marginals_all_passed"]
    print(f"domination_rate={report['domination_rate']:.6f}  checks_ok={ok}")
    return EXIT_OK if ok else EXIT_CHECK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ranktwo",
        description="birth-death chain analytics and rank-2 martingale experiments",
    )
    parser.add_argument("--config", help="INI config or an emitted report.json")
    parser.add_argument("--seed", type=int, default=None, help="master seed override")
    parser.add_argument("--paths", type=int, default=None, help="replication count override")
    parser.add_argument("--dt", type=float, default=None, help="time-step override")
    parser.add_argument("--out", default="ranktwo-out", help="output directory")
    parser.add_argument("--trace", type=int, default=0, metavar="N",
                        help="dump N per-path trace CSVs (large)")
    parser.add_argument("--engine", default="auto",
                        choices=["auto", "compiled", "python"])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("chain", "envelope", "parabolicity", "area-growth", "couple"):
        sub.add_parser(name)
    return parser


_COMMANDS = {
    "chain": cmd_chain,
    "envelope": cmd_envelope,
    "parabolicity": cmd_parabolicity,
    "area-growth": cmd_area_growth,
    "couple": cmd_couple,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
    except (OSError, DomainError, configparser.Error, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return _COMMANDS[args.command](args, cfg)
    except (DomainError, AdmissibilityError, SearchExhaustedError, KeyError,
            ValueError, TypeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SimulationError, EstimationError, CapabilityError, RuntimeError) as exc:
        print(f"simulation error: {exc}", file=sys.stderr)
        return EXIT_SIM


if __name__ == "__main__":
    sys.exit(main())
