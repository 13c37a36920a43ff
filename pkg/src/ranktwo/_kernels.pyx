# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled engine: statement-for-statement twin of ``_engine_py``.

Draw order, expression shapes, and libm calls match the pure-Python
reference exactly, so identical seeds give bit-identical results on either
backend (the extension is built with -ffp-contract=off to keep it that way).
"""

import numpy as np

from numpy.random import PCG64, SeedSequence

from cpython.pycapsule cimport PyCapsule_GetPointer
from numpy.random cimport bitgen_t
from numpy.random.c_distributions cimport (
    random_standard_normal,
    random_standard_uniform,
)
from libc.math cimport (
    INFINITY,
    acosh,
    cos,
    cosh,
    exp,
    fabs,
    log,
    sin,
    sinh,
    sqrt,
)

from .errors import SimulationError

cdef double LOG2 = log(2.0)

cdef int TIME_CAP = 0
cdef int INNER_BARRIER = 1
cdef int OUTER_BARRIER = 2
cdef int STEP_CAP = 3
cdef int RANGE_CAP = 4

name = "compiled"
compiled = True


cdef inline bitgen_t *_capsule(object bit_generator):
    return <bitgen_t *> PyCapsule_GetPointer(bit_generator.capsule, "BitGenerator")


def _rng_for(master_seed, index, lane=None):
    key = (index,) if lane is None else (index, lane)
    return PCG64(SeedSequence(master_seed, spawn_key=key))


cdef inline double axial_threshold(long level, double a):
    cdef double t = level - log(a)
    if t < 0.0:
        t = 0.0
    if t > 30.0:
        return t + LOG2
    return acosh(exp(t))


def path_batch(
    int kind,
    tuple params,
    tuple start,
    long n_paths,
    object master_seed,
    double dt_base,
    int step_mode,
    double hclock,
    long floor_level,
    int axial,
    double max_time,
    long max_steps,
    int retract,
    double surface_tol,
    long stop_high,
    object watch_levels,
    object rho_grid,
    long dom_levels,
    int track_walk,
    int interpolate=1,
    long seed_offset=0,
    long ceiling_level=340,
):
    cdef long[::1] watch = np.ascontiguousarray(watch_levels, dtype=np.int64)
    cdef double[::1] rhos = np.ascontiguousarray(rho_grid, dtype=np.float64)
    cdef long n_watch = watch.shape[0]
    cdef long n_rho = rhos.shape[0]

    stop_reason_arr = np.zeros(n_paths, dtype=np.int8)
    t_end_arr = np.zeros(n_paths)
    steps_arr = np.zeros(n_paths, dtype=np.int64)
    end_arr = np.zeros((n_paths, 3))
    int_alpha_arr = np.zeros(n_paths)
    int_beta_arr = np.zeros(n_paths)
    int_gamma_arr = np.zeros(n_paths)
    occ_arr = np.zeros((n_paths, max(n_rho, 1)))
    arrivals_arr = np.zeros((n_paths, max(n_watch, 1)), dtype=np.int64)
    dom_up_arr = np.zeros(max(dom_levels, 1), dtype=np.int64)
    dom_down_arr = np.zeros(max(dom_levels, 1), dtype=np.int64)

    cdef signed char[::1] stop_reason = stop_reason_arr
    cdef double[::1] t_end = t_end_arr
    cdef long[::1] steps_used = steps_arr
    cdef double[:, ::1] end_points = end_arr
    cdef double[::1] int_alpha = int_alpha_arr
    cdef double[::1] int_beta = int_beta_arr
    cdef double[::1] int_gamma = int_gamma_arr
    cdef double[:, ::1] occ = occ_arr
    cdef long[:, ::1] arrivals = arrivals_arr
    cdef long[::1] dom_up = dom_up_arr
    cdef long[::1] dom_down = dom_down_arr

    cdef double cat_a = 1.0
    cdef double pitch = 1.0
    cdef double pn1 = 0.0, pn2 = 0.0, pn3 = 0.0, pb1 = 0.0, pb2 = 0.0, pb3 = 0.0
    if kind == 1:
        cat_a = params[0]
    elif kind == 2:
        pitch = params[0]
    elif kind == 0:
        pn1 = params[0]
        pn2 = params[1]
        pn3 = params[2]
        pb1 = params[3]
        pb2 = params[4]
        pb3 = params[5]

    # the ceiling keeps r^2 inside double range on extreme excursions;
    # paths reaching it are reported as capped, never as absorbed
    cdef double psi_floor, psi_high, psi_ceiling
    if axial:
        psi_floor = axial_threshold(floor_level, cat_a)
        psi_high = axial_threshold(stop_high, cat_a) if stop_high >= 0 else INFINITY
        psi_ceiling = axial_threshold(ceiling_level, cat_a)
    else:
        psi_floor = <double> floor_level
        psi_high = <double> stop_high if stop_high >= 0 else INFINITY
        psi_ceiling = <double> ceiling_level

    cdef double sx1 = start[0], sx2 = start[1], sx3 = start[2]

    cdef bitgen_t *rng
    cdef long ipath, nstep, anchor, idx, w, j
    cdef int reason, stopping, it
    cdef double x1, x2, x3, y1, y2, y3, t, r2, r2y, psi, psi_new
    cdef double psi_up, psi_mid, psi_dn, thr0, dt, dt_eff, theta, sq, dot
    cdef double n1, n2, n3, s, ch, sh, r, v, sv, cv, u, den
    cdef double alpha, beta, gamma, r4, g1, g2, g3, d
    cdef double ry, sy, chy, shy, g, dg, newton_step, scale
    cdef double vy, svy, cvy, uy, wy, resid
    cdef double r_old, r_new, rho, frac
    cdef double s_c, ch_c, sh_c, ee
    cdef bint below_old, below_new

    for ipath in range(n_paths):
        bg = _rng_for(master_seed, seed_offset + ipath)
        rng = _capsule(bg)
        x1 = sx1
        x2 = sx2
        x3 = sx3
        t = 0.0
        nstep = 0
        reason = TIME_CAP

        # carried axial state for the retracted catenoid (kind 1): the
        # hyperbolics of the last retraction double as the next normal
        ch_c = 0.0
        sh_c = 0.0
        if kind == 1 and retract:
            s_c = x3 / cat_a
            ee = exp(s_c)
            ch_c = 0.5 * (ee + 1.0 / ee)
            sh_c = 0.5 * (ee - 1.0 / ee)

        r2 = x1 * x1 + x2 * x2
        psi = x3 / cat_a if axial else 0.5 * log(r2)
        anchor = floor_level + 1
        psi_up = 0.0
        psi_mid = 0.0
        psi_dn = 0.0
        if track_walk:
            thr0 = axial_threshold(anchor, cat_a) if axial else <double> anchor
            if fabs(psi - thr0) > 1e-9 * (1.0 + fabs(thr0)):
                raise SimulationError(
                    f"walk tracking needs start at level {anchor}", step=0
                )
            # targets of the current anchor; psi_mid is the anchor's own
            # threshold so the pair can be shifted on each crossing
            psi_up = axial_threshold(anchor + 1, cat_a) if axial else anchor + 1.0
            psi_mid = thr0
            psi_dn = axial_threshold(anchor - 1, cat_a) if axial else anchor - 1.0

        while True:
            if nstep >= max_steps:
                reason = STEP_CAP
                break
            r2 = x1 * x1 + x2 * x2
            dt = dt_base if step_mode == 0 else hclock * r2
            if t + dt > max_time:
                reason = TIME_CAP
                break

            if kind == 0:
                n1 = pn1
                n2 = pn2
                n3 = pn3
            elif kind == 1:
                if retract:
                    ch = ch_c
                    sh = sh_c
                else:
                    s = x3 / cat_a
                    ch = cosh(s)
                    sh = sinh(s)
                r = sqrt(r2)
                n1 = x1 / (r * ch)
                n2 = x2 / (r * ch)
                n3 = -sh / ch
            else:
                v = x3 / pitch
                sv = sin(v)
                cv = cos(v)
                u = x1 * cv + x2 * sv
                den = sqrt(pitch * pitch + u * u)
                n1 = pitch * sv / den
                n2 = -pitch * cv / den
                n3 = u / den

            alpha = 1.0 + n3 * n3
            gamma = 1.0 - n3 * n3
            r4 = r2 * r2
            beta = 2.0 * x1 * x2 * n1 * n2 / r4 + (
                (1.0 - 2.0 * x1 * x1 / r2) * (1.0 - n1 * n1)
                + (1.0 - 2.0 * x2 * x2 / r2) * (1.0 - n2 * n2)
            ) / (2.0 * r2)

            g1 = random_standard_normal(rng)
            g2 = random_standard_normal(rng)
            g3 = random_standard_normal(rng)
            dot = n1 * g1 + n2 * g2 + n3 * g3
            sq = sqrt(dt)
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
                    ry = sqrt(y1 * y1 + y2 * y2)
                    sy = y3 / cat_a
                    for it in range(3):
                        ee = exp(sy)
                        chy = 0.5 * (ee + 1.0 / ee)
                        shy = 0.5 * (ee - 1.0 / ee)
                        g = (ry - cat_a * chy) * shy + (y3 - cat_a * sy)
                        dg = (ry - cat_a * chy) * chy - cat_a * shy * shy - cat_a
                        if dg == 0.0:
                            break
                        sy = sy - g / dg
                    ee = exp(sy)
                    chy = 0.5 * (ee + 1.0 / ee)
                    shy = 0.5 * (ee - 1.0 / ee)
                    scale = cat_a * chy / ry
                    y1 = y1 * scale
                    y2 = y2 * scale
                    y3 = cat_a * sy
                    ch_c = chy
                    sh_c = shy
                else:
                    vy = y3 / pitch
                    for it in range(12):
                        svy = sin(vy)
                        cvy = cos(vy)
                        uy = y1 * cvy + y2 * svy
                        wy = -y1 * svy + y2 * cvy
                        g = -wy * uy + pitch * (pitch * vy - y3)
                        dg = uy * uy - wy * wy + pitch * pitch
                        if dg == 0.0:
                            break
                        newton_step = g / dg
                        vy = vy - newton_step
                        if fabs(newton_step) <= 1e-15 * (1.0 + fabs(vy)):
                            break
                    svy = sin(vy)
                    cvy = cos(vy)
                    uy = y1 * cvy + y2 * svy
                    y1 = uy * cvy
                    y2 = uy * svy
                    y3 = pitch * vy
            elif kind != 0:
                if kind == 1:
                    resid = sqrt(y1 * y1 + y2 * y2) - cat_a * cosh(y3 / cat_a)
                else:
                    resid = -y1 * sin(y3 / pitch) + y2 * cos(y3 / pitch)
                if fabs(resid) > surface_tol:
                    raise SimulationError(
                        "path left the surface with retraction disabled",
                        step=nstep,
                    )

            r2y = y1 * y1 + y2 * y2
            psi_new = y3 / cat_a if axial else 0.5 * log(r2y)

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
                r_old = sqrt(r2)
                r_new = sqrt(r2y)
                for j in range(n_rho):
                    rho = rhos[j]
                    below_old = r_old <= rho
                    below_new = r_new <= rho
                    if below_old and below_new:
                        occ[ipath, j] += dt_eff
                    elif below_old or below_new:
                        frac = (rho - r_old) / (r_new - r_old)
                        occ[ipath, j] += dt_eff * (frac if below_old else 1.0 - frac)

            x1 = y1
            x2 = y2
            x3 = y3
            psi = psi_new
            t += dt_eff
            nstep += 1
            if stopping:
                reason = stopping
                break
            if psi >= psi_ceiling:
                reason = RANGE_CAP
                break

        stop_reason[ipath] = <signed char> reason
        t_end[ipath] = t
        steps_used[ipath] = nstep
        end_points[ipath, 0] = x1
        end_points[ipath, 1] = x2
        end_points[ipath, 2] = x3

    return {
        "stop_reason": stop_reason_arr,
        "t_end": t_end_arr,
        "steps": steps_arr,
        "end": end_arr,
        "int_alpha": int_alpha_arr,
        "int_beta": int_beta_arr,
        "int_gamma": int_gamma_arr,
        "occupation": occ_arr[:, :n_rho],
        "arrivals": arrivals_arr[:, :n_watch],
        "dom_up": dom_up_arr[:dom_levels],
        "dom_down": dom_down_arr[:dom_levels],
    }


def chain_batch(
    object p_table,
    long floor,
    long start,
    long max_steps,
    long n_runs,
    object master_seed,
    long stop_high,
    long count_up_level,
):
    cdef double[::1] p_tab = np.ascontiguousarray(p_table, dtype=np.float64)
    cdef long top = floor + p_tab.shape[0]

    absorbed_arr = np.zeros(n_runs, dtype=np.uint8)
    hit_high_arr = np.zeros(n_runs, dtype=np.uint8)
    final_arr = np.zeros(n_runs, dtype=np.int64)
    steps_arr = np.zeros(n_runs, dtype=np.int64)
    up_count_arr = np.zeros(n_runs, dtype=np.int64)
    max_level_arr = np.zeros(n_runs, dtype=np.int64)

    cdef unsigned char[::1] absorbed = absorbed_arr
    cdef unsigned char[::1] hit_high = hit_high_arr
    cdef long[::1] final_level = final_arr
    cdef long[::1] steps_used = steps_arr
    cdef long[::1] up_count = up_count_arr
    cdef long[::1] max_level = max_level_arr

    cdef bitgen_t *rng
    cdef long irun, level, mx, nstep
    cdef double u

    for irun in range(n_runs):
        bg = _rng_for(master_seed, irun)
        rng = _capsule(bg)
        level = start
        mx = level
        nstep = 0
        while level > floor and nstep < max_steps:
            if stop_high >= 0 and level == stop_high:
                break
            if level > top:
                raise SimulationError("chain walked past its table", step=nstep)
            u = random_standard_uniform(rng)
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
        "absorbed": absorbed_arr,
        "hit_high": hit_high_arr,
        "final_level": final_arr,
        "steps": steps_arr,
        "up_count": up_count_arr,
        "max_level": max_level_arr,
    }


def coupled_batch(
    object p_table,
    object phi_table,
    object phi_table_late,
    long switch_step,
    long floor,
    long max_steps,
    long n_runs,
    object master_seed,
    long dom_levels,
):
    cdef double[::1] p_tab = np.ascontiguousarray(p_table, dtype=np.float64)
    cdef double[::1] phi_a = np.ascontiguousarray(phi_table, dtype=np.float64)
    cdef double[::1] phi_b = np.ascontiguousarray(phi_table_late, dtype=np.float64)
    cdef long top = floor + p_tab.shape[0]

    domination_arr = np.ones(n_runs, dtype=np.uint8)
    y_absorbed_arr = np.zeros(n_runs, dtype=np.uint8)
    x_absorbed_arr = np.zeros(n_runs, dtype=np.uint8)
    steps_arr = np.zeros(n_runs, dtype=np.int64)
    y_up_arr = np.zeros(dom_levels, dtype=np.int64)
    y_down_arr = np.zeros(dom_levels, dtype=np.int64)
    x_up_arr = np.zeros(dom_levels, dtype=np.int64)
    x_down_arr = np.zeros(dom_levels, dtype=np.int64)

    cdef unsigned char[::1] domination = domination_arr
    cdef unsigned char[::1] y_absorbed = y_absorbed_arr
    cdef unsigned char[::1] x_absorbed = x_absorbed_arr
    cdef long[::1] steps_used = steps_arr
    cdef long[::1] y_up = y_up_arr
    cdef long[::1] y_down = y_down_arr
    cdef long[::1] x_up = x_up_arr
    cdef long[::1] x_down = x_down_arr

    cdef bitgen_t *rng_x
    cdef bitgen_t *rng_u
    cdef long irun, xlev, ylev, nstep, x_old, m, idx
    cdef double ux, u, phi, pm
    cdef bint x_moved_up, y_moves_up

    for irun in range(n_runs):
        bgx = _rng_for(master_seed, irun, 0)
        bgu = _rng_for(master_seed, irun, 1)
        rng_x = _capsule(bgx)
        rng_u = _capsule(bgu)
        xlev = floor + 1
        ylev = floor + 1
        nstep = 0
        while ylev > floor and nstep < max_steps:
            nstep += 1
            x_old = xlev
            x_moved_up = False
            if xlev > floor:
                ux = random_standard_uniform(rng_x)
                if switch_step >= 0 and nstep >= switch_step:
                    phi = phi_b[xlev - floor - 1]
                else:
                    phi = phi_a[xlev - floor - 1]
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

            u = random_standard_uniform(rng_u)
            m = ylev
            pm = p_tab[m - floor - 1]
            if m > x_old:
                y_moves_up = u <= pm
            elif m == x_old:
                if x_moved_up:
                    y_moves_up = True
                else:
                    if switch_step >= 0 and nstep >= switch_step:
                        phi = phi_b[m - floor - 1]
                    else:
                        phi = phi_a[m - floor - 1]
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
        "domination": domination_arr,
        "y_absorbed": y_absorbed_arr,
        "x_absorbed": x_absorbed_arr,
        "steps": steps_arr,
        "y_up": y_up_arr,
        "y_down": y_down_arr,
        "x_up": x_up_arr,
        "x_down": x_down_arr,
    }
