import math

import numpy as np
import pytest

from ranktwo.envelope import Envelope, eval_f
from ranktwo.errors import DomainError, SimulationError
from ranktwo.geometry import Catenoid, HorizontalPlane, VerticalPlane, projection
from ranktwo.martingale import (
    SimConfig,
    StopReason,
    drift_residual_check,
    euler_step,
    simulate_path,
    simulate_paths,
)


def test_euler_step_zero_noise():
    p = np.array([1.0, 2.0, 3.0])
    out = euler_step(p, (0.0, 0.0, 1.0), 0.01, np.zeros(3))
    np.testing.assert_allclose(out, p)


def test_euler_step_kills_normal_component():
    rng = np.random.default_rng(0)
    for _ in range(100):
        n = rng.standard_normal(3)
        n /= np.linalg.norm(n)
        g = rng.standard_normal(3)
        inc = euler_step(np.zeros(3), n, 0.5, g)
        assert abs(np.dot(inc, n)) < 1e-12
    # horizontal plane leaves x3 untouched
    out = euler_step(np.array([1.0, 0.0, 5.0]), (0.0, 0.0, 1.0), 0.1, rng.standard_normal(3))
    assert out[2] == pytest.approx(5.0)


def test_euler_step_increment_covariance():
    # sample covariance of increments matches dt * P(n) within 5% entrywise
    rng = np.random.default_rng(1)
    n = np.array([0.6, 0.0, 0.8])
    dt = 0.3
    g = rng.standard_normal((100_000, 3))
    inc = math.sqrt(dt) * (g - (g @ n)[:, None] * n)
    cov = inc.T @ inc / g.shape[0]
    target = dt * projection(n)
    assert np.max(np.abs(cov - target)) < 0.05 * dt


def test_simconfig_validation():
    with pytest.raises(DomainError):
        SimConfig(inner_level=-1)
    with pytest.raises(DomainError):
        SimConfig(inner_level=0, dt=0.0)
    with pytest.raises(DomainError):
        SimConfig(inner_level=2, stop_at_level=2)
    with pytest.raises(DomainError):
        SimConfig(inner_level=0, step_mode="magic")
    with pytest.raises(DomainError):
        SimConfig(inner_level=0, watch_levels=(0,))
    with pytest.raises(DomainError):
        SimConfig(inner_level=0, stop_at_level=400)


def test_default_dt_scales_with_floor():
    assert SimConfig(inner_level=0).resolved_dt() == pytest.approx(1e-4)
    assert SimConfig(inner_level=2).resolved_dt() == pytest.approx(1e-4 * math.e**4)
    radial = SimConfig(inner_level=2, step_mode="radial")
    assert radial.resolved_dt() == pytest.approx(1e-3 * math.e**4)
    assert radial.hclock() == pytest.approx(1e-3)


def test_time_cap_yields_trivial_path():
    plane = HorizontalPlane()
    cfg = SimConfig(inner_level=0, dt=0.1, max_time=1e-9, max_steps=10)
    rec = simulate_path(plane, (math.e, 0.0, 0.0), cfg, master_seed=1)
    assert rec.stop_reason is StopReason.TIME_CAP
    assert rec.positions.shape == (1, 3)
    assert rec.steps == 0


def test_bit_reproducibility():
    cat = Catenoid(a=1.0)
    cfg = SimConfig(inner_level=1, step_mode="radial", dt=1e-3 * math.e**2,
                    max_steps=3000)
    start = cat.point_at_radius(math.e**2)
    a = simulate_path(cat, start, cfg, master_seed=5, replication=2)
    b = simulate_path(cat, start, cfg, master_seed=5, replication=2)
    np.testing.assert_array_equal(a.positions, b.positions)
    np.testing.assert_array_equal(a.times, b.times)
    assert a.stop_reason == b.stop_reason


def test_single_path_matches_batch_member():
    cat = Catenoid(a=1.0)
    cfg = SimConfig(inner_level=1, step_mode="radial", dt=1e-3 * math.e**2,
                    max_steps=2000)
    start = cat.point_at_radius(math.e**2)
    batch = simulate_paths(cat, start, cfg, 3, master_seed=11, engine="python")
    rec = simulate_path(cat, start, cfg, master_seed=11, replication=2)
    np.testing.assert_array_equal(rec.final_point, batch.end[2])
    assert rec.t_end == batch.t_end[2]
    assert rec.steps == batch.steps[2]


def test_plane_r2_drift_slope():
    # alpha = 2 for the horizontal plane: regression slope of E[r^2] on t
    plane = HorizontalPlane()
    cfg = SimConfig(inner_level=0, dt=1e-3, max_time=0.5, max_steps=10**6)
    batch = simulate_paths(plane, (math.e, 0.0, 0.0), cfg, 4000, master_seed=17)
    r2_end = batch.end[:, 0] ** 2 + batch.end[:, 1] ** 2
    slope = (r2_end - math.e**2).mean() / batch.t_end.mean()
    assert 1.9 <= slope <= 2.1


def test_catenoid_alpha_average_in_range():
    cat = Catenoid(a=1.0)
    cfg = SimConfig(inner_level=0, dt=1e-3, max_time=0.5, max_steps=10**6)
    batch = simulate_paths(cat, cat.point_at_radius(math.e**2), cfg, 500, master_seed=3)
    avg_alpha = batch.int_alpha / batch.t_end
    assert np.all((avg_alpha >= 1.0) & (avg_alpha <= 2.0))


def test_residual_means_within_three_se():
    cat = Catenoid(a=1.0)
    cfg = SimConfig(inner_level=0, dt=1e-4, max_time=1.0, max_steps=10_200)
    batch = simulate_paths(cat, cat.point_at_radius(math.e**2), cfg, 2000, master_seed=4242)
    for key, est in drift_residual_check(batch).items():
        assert abs(est.mean) <= 3.0 * est.std_error, key


def test_envelope_containment_with_retraction():
    # paths stay on the catenoid (tolerance 1e-6 a) and inside f2, c=1
    cat = Catenoid(a=1.0)
    cfg = SimConfig(inner_level=6, step_mode="radial", max_steps=5_000)
    start = cat.point_at_radius(math.exp(7.0))
    rec = simulate_path(cat, start, cfg, master_seed=9)
    resid = np.abs(cat.a * np.cosh(rec.positions[:, 2] / cat.a)
                   - np.hypot(rec.positions[:, 0], rec.positions[:, 1]))
    interior = rec.positions[:-1] if rec.stop_reason is StopReason.INNER_BARRIER else rec.positions
    assert np.max(np.abs(resid[: interior.shape[0]])) <= 1e-6 * cat.a
    env = Envelope(kind="f2", c=1.0, floor=6)
    r = np.hypot(rec.positions[:, 0], rec.positions[:, 1])
    assert np.all(np.abs(rec.positions[:, 2]) <= eval_f(env, r))


def test_no_retraction_raises_simulation_error():
    cat = Catenoid(a=1.0)
    cfg = SimConfig(inner_level=0, dt=1e-3, max_time=50.0, max_steps=10**6,
                    retraction="none", surface_tol=1e-3)
    with pytest.raises(SimulationError) as info:
        simulate_paths(cat, cat.point_at_radius(math.e**2), cfg, 4, master_seed=1)
    assert info.value.step is not None


def test_step_size_robustness():
    # halving dt moves P(inner before outer) by less than the 95% CI width
    cat = Catenoid(a=1.0)
    start = cat.point_at_radius(math.e**2)

    def estimate(dt_scale):
        cfg = SimConfig(inner_level=1, step_mode="radial",
                        dt=dt_scale * math.e**2, max_steps=400_000, stop_at_level=3)
        batch = simulate_paths(cat, start, cfg, 3000, master_seed=77)
        hit_inner = batch.stop_reason == 1
        p = hit_inner.mean()
        return p, 1.96 * math.sqrt(p * (1 - p) / hit_inner.size)

    p1, w1 = estimate(1e-3)
    p2, w2 = estimate(5e-4)
    assert abs(p1 - p2) < max(w1, w2)


def test_range_cap_stops_gracefully():
    plane = HorizontalPlane()
    cfg = SimConfig(inner_level=0, step_mode="radial", max_steps=10**6,
                    ceiling_level=3)
    batch = simulate_paths(plane, (math.e, 0.0, 0.0), cfg, 50, master_seed=8)
    assert set(np.unique(batch.stop_reason)) <= {1, 4}
    capped = batch.stop_reason == 4
    if capped.any():
        r = np.hypot(batch.end[capped, 0], batch.end[capped, 1])
        assert np.all(r >= math.e**3 * 0.9)


def test_start_validation():
    cat = Catenoid(a=1.0)
    cfg = SimConfig(inner_level=2)
    with pytest.raises(DomainError):
        simulate_paths(cat, cat.point_at_radius(2.0), cfg, 2, 0)  # r < e^2
    with pytest.raises(DomainError):
        simulate_paths(cat, (math.e**3, 0.0, 0.0), cfg, 2, 0)  # off-surface
    with pytest.raises(DomainError):
        # floor below the waist
        simulate_paths(Catenoid(a=20.0), Catenoid(a=20.0).point_at_radius(25.0),
                       SimConfig(inner_level=0), 2, 0)


def test_vertical_plane_log_r_drifts_down():
    # beta < 0 for the vertical plane: absorbed faster than symmetric
    vert = VerticalPlane()
    cfg = SimConfig(inner_level=0, step_mode="radial", max_steps=100_000,
                    stop_at_level=2)
    batch = simulate_paths(vert, (math.e, 0.0, 0.0), cfg, 2000, master_seed=21)
    p_inner = (batch.stop_reason == 1).mean()
    # symmetric exit would give 1/2; downward drift pushes it well above
    assert p_inner > 0.55
