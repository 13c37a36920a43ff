"""Pure-Python engine: reference implementation of the simulation kernels.

Every hot loop here has a compiled twin in ``_kernels.pyx``.  The two are
kept statement-for-statement parallel (same draw order, same floating-point
expression shapes, libm transcendentals on both sides) so that a run with the
same master seed produces bit-identical output on either backend.  This
module is the semantic reference; the compiled module is the fast path.
"""

from __future__ import annotations

import math

import numpy as np
from numpy.random import Generator, PCG64, SeedSequence

from .errors import SimulationError

LOG2 = math.log(2.0)

# stop reasons
TIME_CAP = 0
INNER_BARRIER = 1
OUTER_BARRIER = 2
STEP_CAP = 3
RANGE_CAP = 4

name = "python"
compiled = False


def _rng_for(master_seed: int, index: int, lane: int | None = None) -> Generator:
    key = (index,) if lane is None else (index, lane)
    return Generator(PCG64(SeedSequence(master_seed, spawn_key=key)))


def axial_threshold(level: int, a: float) -> float:
    """acosh(e^level / a), computed stably for any level."""
    t = level - math.log(a)
    if t < 0.0:
        t = 0.0
    if t > 30.0:
        return t + LOG2
    return math.acosh(math.exp(t))


def path_batch(
    kind: int,
    params: tuple,
    start: tuple,
    n_paths: int,
    master_seed: int,
    dt_base: float,
    step_mode: int,
    hclock: float,
    floor_level: int,
    axial: int,
    max_time: float,
    max_steps: int,
    retract: int,
    surface_tol: float,
    stop_high: int,
    watch_levels: np.ndarray,
    rho_grid: np.ndarray,
    dom_levels: int,
    track_walk: int,
    interpolate: int = 1,
    seed_offset: int = 0,
    ceiling_level: int = 340,
    store: bool = False,
    normal_fn=None,
    retract_fn=None,
    residual_fn=None,
) -> dict:
    """Batch of independent projection-martingale paths.

    kind: 0 fixed plane (params n1,n2,n3,b1,b2,b3), 1 catenoid (params a,),
    2 helicoid (params pitch,), -1 custom callables.  The barrier coordinate
    is the axial parameter x3/a for the catenoid and log r otherwise.
    """
    watch = np.asarray(watch_levels, dtype=np.int64)
    rhos = np.asarray(rho_grid, dtype=float)
    n_watch = watch.size
    n_rho = rhos.size

    stop_reason = np.zeros(n_paths, dtype=np.int8)
    t_end = np.zeros(n_paths)
    steps_used = np.zeros(n_paths, dtype=np.int64)
    end_points = np.zeros((n_paths, 3))
    int_alpha = np.zeros(n_paths)
    int_beta = np.zeros(n_paths)
    int_gamma = np.zeros(n_paths)
    occ = np.zeros((n_paths, n_rho))
    arrivals = np.zeros((n_paths, n_watch), dtype=np.int64)
    dom_up = np.zeros(dom_levels, dtype=np.int64)
    dom_down = np.zeros(dom_levels, dtype=np.int64)
    stored = [] if store else None

    cat_a = params[0] if kind == 1 else 1.0
    pitch = params[0] if kind == 2 else 1.0
    pn1 = pn2 = pn3 = pb1 = pb2 = pb3 = 0.0
    if kind == 0:
        pn1, pn2, pn3, pb1, pb2, pb3 = params

    # the ceiling keeps r^2 inside double range on extreme excursions;
    # paths reaching it are reported as capped, never as absorbed
    if axial:
        psi_floor = axial_threshold(floor_level, cat_a)
        psi_high = axial_threshold(stop_high, cat_a) if stop_high >= 0 else math.inf
        psi_ceiling = axial_threshold(ceiling_level, cat_a)
    else:
        psi_floor = float(floor_level)
        psi_high = float(stop_high) if stop_high >= 0 else math.inf
        psi_ceiling = float(ceiling_level)

    for ipath in range(n_paths):
        rng = _rng_for(master_seed, seed_offset + ipath)
        x1, x2, x3 = float(start[0]), float(start[1]), float(start[2])
        t = 0.0
        nstep = 0
        reason = TIME_CAP

        # carried axial state for the retracted catenoid (kind 1): the
        # hyperbolics of the last retraction double as the next normal
        if kind == 1 and retract:
            s_c = x3 / cat_a
            ee = math.exp(s_c)
            ch_c = 0.5 * (ee + 1.0 / ee)
            sh_c = 0.5 * (ee - 1.0 / ee)
        else:
            ch_c = sh_c = 0.0

        r2 = x1 * x1 + x2 * x2
        psi = x3 / cat_a if axial else 0.5 * math.log(r2)
        anchor = floor_level + 1
        if track_walk:
            thr0 = axial_threshold(anchor, cat_a) if axial else float(anchor)
            if abs(psi - thr0) > 1e-9 * (1.0 + abs(thr0)):
                raise SimulationError(
                    f"walk tracking needs start at level {anchor}", step=0
                )
            # targets of the current anchor; psi_mid is the anchor's own
            # threshold so the pair can be shifted on each crossing
            psi_up = axial_threshold(anchor + 1, cat_a) if axial else anchor + 1.0
            psi_mid = thr0
            psi_dn = axial_threshold(anchor - 1, cat_a) if axial else anchor - 1.0
        else:
            psi_up = psi_mid = psi_dn = 0.0

        times = [0.0] if store else None
        points = [(x1, x2, x3)] if store else None

        while True:
            if nstep >= max_steps:
                reason = STEP_CAP
                break
            r2 = x1 * x1 + x2 * x2
            dt = dt_base if step_mode == 0 else hclock * r2
            if t + dt > max_time:
                reason = TIME_CAP
                break

            # kernel direction at the step start
            if kind == 0:
                n1, n2, n3 = pn1, pn2, pn3
            elif kind == 1:
                if retract:
                    ch = ch_c
                    sh = sh_c
                else:
                    s = x3 / cat_a
                    ch = math.cosh(s)
                    sh = math.sinh(s)
                r = math.sqrt(r2)
                n1 = x1 / (r * ch)
                n2 = x2 / (r * ch)
                n3 = -sh / ch
            elif kind == 2:
                v = x3 / pitch
                sv = math.sin(v)
                cv = math.cos(v)
                u = x1 * cv + x2 * sv
                den = math.sqrt(pitch * pitch + u * u)
                n1 = pitch * sv / den
                n2 = -pitch * cv / den
                n3 = u / den
            else:
                nvec = normal_fn((x1, x2, x3))
                n1, n2, n3 = float(nvec[0]), float(nvec[1]), float(nvec[2])

            alpha = 1.0 + n3 * n3
            gamma = 1.0 - n3 * n3
            r4 = r2 * r2
            beta = 2.0 * x1 * x2 * n1 * n2 / r4 + (
                (1.0 - 2.0 * x1 * x1 / r2) * (1.0 - n1 * n1)
                + (1.0 - 2.0 * x2 * x2 / r2) * (1.0 - n2 * n2)
            ) / (2.0 * r2)

            g1 = rng.standard_normal()
            g2 = rng.standard_normal()
            g3 = rng.standard_normal()
            dot = n1 * g1 + n2 * g2 + n3 * g3
            sq = math.sqrt(dt)
            y1 = x1 + sq * (g1 - dot * n1)
            y2 = x2 + sq * (g2 - dot * n2)
            y3 = x3 + sq * (g3 - dot * n3)

            if retract:
                if kind == 0:
                    d = (y1 - pb1) * pn1 + (y2 - pb2) * pn2 + (y3 - pb3) * pn3
                    y1 -= d * pn1
                    y2 -= d * pn2
                    y3 -= d * pn3
                elif kind == 1:
                    # Newton on the closest-point condition; three updates
                    # land at round-off from the excellent y3/a start
                    ry = math.sqrt(y1 * y1 + y2 * y2)
                    sy = y3 / cat_a
                    for _ in range(3):
                        ee = math.exp(sy)
                        chy = 0.5 * (ee + 1.0 / ee)
                        shy = 0.5 * (ee - 1.0 / ee)
                        g = (ry - cat_a * chy) * shy + (y3 - cat_a * sy)
                        dg = (ry - cat_a * chy) * chy - cat_a * shy * shy - cat_a
                        if dg == 0.0:
                            break
                        sy = sy - g / dg
                    ee = math.exp(sy)
                    chy = 0.5 * (ee + 1.0 / ee)
                    shy = 0.5 * (ee - 1.0 / ee)
                    scale = cat_a * chy / ry
                    y1 = y1 * scale
                    y2 = y2 * scale
                    y3 = cat_a * sy
                    ch_c = chy
                    sh_c = shy
                elif kind == 2:
                    vy = y3 / pitch
                    for _ in range(12):
                        svy = math.sin(vy)
                        cvy = math.cos(vy)
                        uy = y1 * cvy + y2 * svy
                        wy = -y1 * svy + y2 * cvy
                        g = -wy * uy + pitch * (pitch * vy - y3)
                        dg = uy * uy - wy * wy + pitch * pitch
                        if dg == 0.0:
                            break
                        step = g / dg
                        vy = vy - step
                        if abs(step) <= 1e-15 * (1.0 + abs(vy)):
                            break
                    svy = math.sin(vy)
                    cvy = math.cos(vy)
                    uy = y1 * cvy + y2 * svy
                    y1 = uy * cvy
                    y2 = uy * svy
                    y3 = pitch * vy
                elif retract_fn is not None:
                    yy = retract_fn((y1, y2, y3))
                    y1, y2, y3 = float(yy[0]), float(yy[1]), float(yy[2])
            elif kind != 0:
                resid = (
                    math.sqrt(y1 * y1 + y2 * y2) - cat_a * math.cosh(y3 / cat_a)
                    if kind == 1
                    else (
                        -y1 * math.sin(y3 / pitch) + y2 * math.cos(y3 / pitch)
                        if kind == 2
                        else (residual_fn((y1, y2, y3)) if residual_fn else 0.0)
                    )
                )
                if abs(resid) > surface_tol:
                    raise SimulationError(
                        "path left the surface with retraction disabled",
                        step=nstep,
                    )

            r2y = y1 * y1 + y2 * y2
            psi_new = y3 / cat_a if axial else 0.5 * math.log(r2y)

            # barrier crossings, resolved on the interpolated coordinate
            dt_eff = dt
            theta = 1.0
            stopping = 0
            if psi_new <= psi_floor:
                theta = (psi_floor - psi) / (psi_new - psi)
                stopping = INNER_BARRIER
            elif psi_new >= psi_high:
                theta = (psi_high - psi) / (psi_new - psi)
                stopping = OUTER_BARRIER
            if stopping and interpolate:
                dt_eff = dt * theta
                y1 = x1 + theta * (y1 - x1)
                y2 = x2 + theta * (y2 - x2)
                y3 = x3 + theta * (y3 - x3)
                r2y = y1 * y1 + y2 * y2
                psi_new = psi_floor if stopping == INNER_BARRIER else psi_high

            if track_walk:
                while psi_new >= psi_up:
                    idx = anchor - floor_level - 1
                    if 0 <= idx < dom_levels:
                        dom_up[idx] += 1
                    anchor += 1
                    for w in range(n_watch):
                        if watch[w] == anchor:
                            arrivals[ipath, w] += 1
                    psi_dn = psi_mid
                    psi_mid = psi_up
                    psi_up = axial_threshold(anchor + 1, cat_a) if axial else anchor + 1.0
                while psi_new <= psi_dn and anchor > floor_level:
                    idx = anchor - floor_level - 1
                    if 0 <= idx < dom_levels:
                        dom_down[idx] += 1
                    anchor -= 1
                    for w in range(n_watch):
                        if watch[w] == anchor:
                            arrivals[ipath, w] += 1
                    if anchor == floor_level:
                        break
                    psi_up = psi_mid
                    psi_mid = psi_dn
                    psi_dn = axial_threshold(anchor - 1, cat_a) if axial else anchor - 1.0

            int_alpha[ipath] += alpha * dt_eff
            int_beta[ipath] += beta * dt_eff
            int_gamma[ipath] += gamma * dt_eff

            if n_rho:
                r_old = math.sqrt(r2)
                r_new = math.sqrt(r2y)
                for j in range(n_rho):
                    rho = rhos[j]
                    below_old = r_old <= rho
                    below_new = r_new <= rho
                    if below_old and below_new:
                        occ[ipath, j] += dt_eff
                    elif below_old or below_new:
                        frac = (rho - r_old) / (r_new - r_old)
                        occ[ipath, j] += dt_eff * (frac if below_old else 1.0 - frac)

            x1, x2, x3 = y1, y2, y3
            psi = psi_new
            t += dt_eff
            nstep += 1
            if store:
                times.append(t)
                points.append((x1, x2, x3))
            if stopping:
                reason = stopping
                break
            if psi >= psi_ceiling:
                reason = RANGE_CAP
                break

        stop_reason[ipath] = reason
        t_end[ipath] = t
        steps_used[ipath] = nstep
        end_points[ipath, 0] = x1
        end_points[ipath, 1] = x2
        end_points[ipath, 2] = x3
        if store:
            stored.append((np.asarray(times), np.asarray(points)))

    out = {
        "stop_reason": stop_reason,
        "t_end": t_end,
        "steps": steps_used,
        "end": end_points,
        "int_alpha": int_alpha,
        "int_beta": int_beta,
        "int_gamma": int_gamma,
        "occupation": occ,
        "arrivals": arrivals,
        "dom_up": dom_up,
        "dom_down": dom_down,
    }
    if store:
        out["stored"] = stored
    return out


def chain_batch(
    p_table: np.ndarray,
    floor: int,
    start: int,
    max_steps: int,
    n_runs: int,
    master_seed: int,
    stop_high: int,
    count_up_level: int,
) -> dict:
    """Batch of nearest-neighbor walks; one uniform consumed per step."""
    p_tab = np.asarray(p_table, dtype=float)
    top = floor + p_tab.size
    absorbed = np.zeros(n_runs, dtype=np.uint8)
    hit_high = np.zeros(n_runs, dtype=np.uint8)
    final_level = np.zeros(n_runs, dtype=np.int64)
    steps_used = np.zeros(n_runs, dtype=np.int64)
    up_count = np.zeros(n_runs, dtype=np.int64)
    max_level = np.zeros(n_runs, dtype=np.int64)

    for irun in range(n_runs):
        rng = _rng_for(master_seed, irun)
        level = start
        mx = level
        nstep = 0
        while level > floor and nstep < max_steps:
            if stop_high >= 0 and level == stop_high:
                break
            if level > top:
                raise SimulationError("chain walked past its table", step=nstep)
            u = rng.random()
            if u <= p_tab[level - floor - 1]:
                if level == count_up_level:
                    up_count[irun] += 1
                level += 1
            else:
                level -= 1
            if level > mx:
                mx = level
            nstep += 1
        absorbed[irun] = level == floor
        hit_high[irun] = stop_high >= 0 and level == stop_high
        final_level[irun] = level
        steps_used[irun] = nstep
        max_level[irun] = mx

    return {
        "absorbed": absorbed,
        "hit_high": hit_high,
        "final_level": final_level,
        "steps": steps_used,
        "up_count": up_count,
        "max_level": max_level,
    }


def coupled_batch(
    p_table: np.ndarray,
    phi_table: np.ndarray,
    phi_table_late: np.ndarray,
    switch_step: int,
    floor: int,
    max_steps: int,
    n_runs: int,
    master_seed: int,
    dom_levels: int,
) -> dict:
    """Coupled (X, Y) runs implementing the three-branch domination rule.

    X is the synthetic inhomogeneous chain (up-probability phi per level,
    optionally switching to a second table from ``switch_step`` on); Y is the
    homogeneous chain with table p.  Y consumes exactly one uniform per step;
    X draws from an independent stream.
    """
    p_tab = np.asarray(p_table, dtype=float)
    phi_a = np.asarray(phi_table, dtype=float)
    phi_b = np.asarray(phi_table_late, dtype=float)
    top = floor + p_tab.size

    domination = np.ones(n_runs, dtype=np.uint8)
    y_absorbed = np.zeros(n_runs, dtype=np.uint8)
    x_absorbed = np.zeros(n_runs, dtype=np.uint8)
    steps_used = np.zeros(n_runs, dtype=np.int64)
    y_up = np.zeros(dom_levels, dtype=np.int64)
    y_down = np.zeros(dom_levels, dtype=np.int64)
    x_up = np.zeros(dom_levels, dtype=np.int64)
    x_down = np.zeros(dom_levels, dtype=np.int64)

    for irun in range(n_runs):
        rng_x = _rng_for(master_seed, irun, 0)
        rng_u = _rng_for(master_seed, irun, 1)
        xlev = floor + 1
        ylev = floor + 1
        nstep = 0
        while ylev > floor and nstep < max_steps:
            nstep += 1
            x_old = xlev
            x_moved_up = False
            if xlev > floor:
                ux = rng_x.random()
                phi = (
                    phi_b[xlev - floor - 1]
                    if (switch_step >= 0 and nstep >= switch_step)
                    else phi_a[xlev - floor - 1]
                )
                x_moved_up = ux <= phi
                idx = xlev - floor - 1
                if 0 <= idx < dom_levels:
                    if x_moved_up:
                        x_up[idx] += 1
                    else:
                        x_down[idx] += 1
                xlev = xlev + 1 if x_moved_up else xlev - 1
                if xlev > top:
                    raise SimulationError("X walked past its table", step=nstep)

            u = rng_u.random()
            m = ylev
            pm = p_tab[m - floor - 1]
            if m > x_old:
                y_moves_up = u <= pm
            elif m == x_old:
                if x_moved_up:
                    y_moves_up = True
                else:
                    phi = (
                        phi_b[m - floor - 1]
                        if (switch_step >= 0 and nstep >= switch_step)
                        else phi_a[m - floor - 1]
                    )
                    y_moves_up = u <= (pm - phi) / (1.0 - phi)
            else:
                domination[irun] = 0
                y_moves_up = u <= pm
            idx = m - floor - 1
            if 0 <= idx < dom_levels:
                if y_moves_up:
                    y_up[idx] += 1
                else:
                    y_down[idx] += 1
            ylev = m + 1 if y_moves_up else m - 1
            if ylev > top:
                raise SimulationError("Y walked past its table", step=nstep)
            if xlev > ylev:
                domination[irun] = 0

        y_absorbed[irun] = ylev == floor
        x_absorbed[irun] = xlev == floor
        steps_used[irun] = nstep

    return {
        "domination": domination,
        "y_absorbed": y_absorbed,
        "x_absorbed": x_absorbed,
        "steps": steps_used,
        "y_up": y_up,
        "y_down": y_down,
        "x_up": x_up,
        "x_down": x_down,
    }
