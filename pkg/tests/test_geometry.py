import math

import numpy as np
import pytest

from ranktwo.envelope import Envelope, eval_f
from ranktwo.errors import DomainError
from ranktwo.geometry import (
    Catenoid,
    CustomStrategy,
    FixedPlane,
    Helicoid,
    HorizontalPlane,
    VerticalPlane,
    beta_gamma_inequality_gap,
    catenoid_area,
    catenoid_normal,
    catenoid_retract,
    drift_log_r,
    drift_r2,
    drift_x3_sq,
    helicoid_retract,
    hessian_log_r,
    hessian_r2,
    hessian_x3_sq,
    projection,
    radial,
    rotate_z,
)


def random_units(n, seed):
    rng = np.random.default_rng(seed)
    v = rng.standard_normal((n, 3))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def random_points(n, seed):
    rng = np.random.default_rng(seed)
    p = rng.standard_normal((n, 3)) * np.array([3.0, 3.0, 2.0])
    r = radial(p)
    return p[r > 1e-3]


def half_trace(P, H):
    return 0.5 * np.einsum("...ij,...jk,...ki->...", P, H, P)


def test_projection_axis_cases():
    np.testing.assert_allclose(projection((0.0, 0.0, 1.0)), np.diag([1.0, 1.0, 0.0]))
    np.testing.assert_allclose(projection((1.0, 0.0, 0.0)), np.diag([0.0, 1.0, 1.0]))


def test_projection_idempotent_rank2():
    n = random_units(500, 1)
    P = projection(n)
    np.testing.assert_allclose(np.einsum("nij,njk->nik", P, P), P, atol=1e-12)
    np.testing.assert_allclose(np.einsum("nii->n", P), 2.0, atol=1e-12)
    np.testing.assert_allclose(np.einsum("nij,nj->ni", P, n), 0.0, atol=1e-12)


def test_projection_rejects_non_unit():
    with pytest.raises(DomainError):
        projection((1.0, 1.0, 0.0))


def test_drift_r2_values_and_range():
    assert drift_r2((0.0, 0.0, 1.0)) == pytest.approx(2.0)
    assert drift_r2((0.0, 1.0, 0.0)) == pytest.approx(1.0)
    n = random_units(10_000, 2)
    alpha = drift_r2(n)
    assert np.all((alpha >= 1.0) & (alpha <= 2.0))


def test_drift_r2_equals_half_trace():
    n = random_units(5_000, 3)
    P = projection(n)
    H = np.broadcast_to(hessian_r2(), P.shape)
    np.testing.assert_allclose(drift_r2(n), half_trace(P, H), atol=1e-12)


def test_hessian_log_r_values():
    h = hessian_log_r((1.0, 0.0, 0.0))
    assert h[0, 0] == pytest.approx(-1.0)
    assert h[1, 1] == pytest.approx(1.0)
    assert np.count_nonzero(h) == 2
    h2 = hessian_log_r((0.0, 2.0, 0.0))
    assert h2[0, 0] == pytest.approx(0.25)
    assert h2[1, 1] == pytest.approx(-0.25)


def test_hessian_log_r_planar_trace_free():
    p = random_points(2_000, 4)
    h = hessian_log_r(p)
    np.testing.assert_allclose(h[:, 0, 0] + h[:, 1, 1], 0.0, atol=1e-12)
    with pytest.raises(DomainError):
        hessian_log_r((0.0, 0.0, 1.0))


def test_drift_log_r_simplified_form():
    # at (r, 0, z) the drift reduces to (n1^2 - n2^2) / (2 r^2)
    rng = np.random.default_rng(5)
    for _ in range(200):
        r = rng.uniform(0.2, 5.0)
        z = rng.uniform(-2.0, 2.0)
        n = random_units(1, rng.integers(1 << 30))[0]
        expected = (n[0] ** 2 - n[1] ** 2) / (2.0 * r * r)
        assert drift_log_r((r, 0.0, z), n) == pytest.approx(expected, abs=1e-14)
    assert drift_log_r((1.0, 0.0, 0.0), (0.0, 0.0, 1.0)) == pytest.approx(0.0)
    assert drift_log_r((1.0, 0.0, 0.0), (0.0, 1.0, 0.0)) == pytest.approx(-0.5)


def test_drift_log_r_equals_half_trace():
    p = random_points(5_000, 6)
    n = random_units(p.shape[0], 7)
    P = projection(n)
    H = hessian_log_r(p)
    np.testing.assert_allclose(drift_log_r(p, n), half_trace(P, H), atol=1e-12)


def test_drift_log_r_rotation_invariant():
    p = random_points(2_000, 8)
    n = random_units(p.shape[0], 9)
    base = drift_log_r(p, n)
    rng = np.random.default_rng(10)
    for _ in range(5):
        ang = rng.uniform(0.0, 2.0 * math.pi)
        rotated = drift_log_r(rotate_z(p, ang), rotate_z(n, ang))
        np.testing.assert_allclose(rotated, base, atol=1e-10)


def test_drift_x3_sq():
    assert drift_x3_sq((0.0, 0.0, 1.0)) == pytest.approx(0.0)
    assert drift_x3_sq((0.0, 1.0, 0.0)) == pytest.approx(1.0)
    n = random_units(5_000, 11)
    np.testing.assert_allclose(
        drift_x3_sq(n), n[:, 0] ** 2 + n[:, 1] ** 2, atol=1e-12
    )
    P = projection(n)
    H = np.broadcast_to(hessian_x3_sq(), P.shape)
    np.testing.assert_allclose(drift_x3_sq(n), half_trace(P, H), atol=1e-12)


def test_beta_gamma_gap():
    assert beta_gamma_inequality_gap((1.0, 0.0, 0.0), (0.0, 1.0, 0.0)) == pytest.approx(
        0.0, abs=1e-15
    )
    assert beta_gamma_inequality_gap((1.0, 0.0, 0.0), (0.0, 0.0, 1.0)) == pytest.approx(
        0.0, abs=1e-15
    )
    p = random_points(100_000, 12)
    n = random_units(p.shape[0], 13)
    assert np.min(beta_gamma_inequality_gap(p, n)) >= -1e-12


def test_catenoid_normal_values():
    np.testing.assert_allclose(
        catenoid_normal((1.0, 0.0, 0.0), 1.0), [1.0, 0.0, 0.0], atol=1e-14
    )
    p = (math.cosh(1.0), 0.0, 1.0)
    n = catenoid_normal(p, 1.0)
    assert n[2] ** 2 == pytest.approx(math.tanh(1.0) ** 2, rel=1e-12)
    assert n[2] ** 2 == pytest.approx(0.58002, abs=1e-4)
    expected = np.array([1.0, 0.0, -math.sinh(1.0)]) / math.cosh(1.0)
    np.testing.assert_allclose(n, expected, atol=1e-14)


def test_catenoid_normal_gamma_identity():
    # gamma = 1 - n3^2 = a^2 / r^2 on the surface
    a = 1.7
    ss = np.linspace(-2.0, 2.5, 41)
    for s in ss:
        p = (a * math.cosh(s) * 0.6, a * math.cosh(s) * 0.8, a * s)
        n = catenoid_normal(p, a)
        r2 = p[0] ** 2 + p[1] ** 2
        assert 1.0 - n[2] ** 2 == pytest.approx(a * a / r2, rel=1e-12)


def test_catenoid_normal_rejects_off_surface():
    with pytest.raises(DomainError):
        catenoid_normal((2.0, 0.0, 0.0), 1.0)


def test_catenoid_retract_lands_on_surface():
    rng = np.random.default_rng(14)
    for a in (1.0, 0.5, 2.3):
        for _ in range(50):
            s = rng.uniform(-2.0, 2.0)
            phi = rng.uniform(0.0, 2.0 * math.pi)
            on = np.array(
                [a * math.cosh(s) * math.cos(phi), a * math.cosh(s) * math.sin(phi), a * s]
            )
            off = on + 0.01 * rng.standard_normal(3)
            x, y, z = catenoid_retract(off[0], off[1], off[2], a)
            resid = math.hypot(x, y) - a * math.cosh(z / a)
            assert abs(resid) < 1e-10
            assert np.linalg.norm(np.array([x, y, z]) - off) < 0.05


def test_catenoid_area():
    assert catenoid_area(1.0, 1.0) == 0.0
    ratio = catenoid_area(100.0, 1.0) / (math.pi * 100.0**2)
    assert ratio == pytest.approx(1.000480, abs=1e-5)
    big = catenoid_area(1e6, 1.0) / (math.pi * 1e12)
    assert big == pytest.approx(1.0, abs=1e-4)
    with pytest.raises(DomainError):
        catenoid_area(0.5, 1.0)


def test_catenoid_inside_f2_envelope():
    # the unit catenoid end with r >= e^2 fits inside |x3| <= f2(r), c=1
    env = Envelope(kind="f2", c=1.0, floor=6)
    r = np.exp(np.linspace(2.0, 30.0, 500))
    x3 = np.arccosh(r)
    assert np.all(x3 <= eval_f(env, r))


def test_helicoid_normal_and_retract():
    heli = Helicoid(pitch=1.0)
    p = heli.point_at(2.0, 0.7)
    n = heli.normal(p)
    assert np.linalg.norm(n) == pytest.approx(1.0, abs=1e-12)
    rng = np.random.default_rng(15)
    for _ in range(50):
        u = rng.uniform(-3.0, 3.0)
        v = rng.uniform(-2.0, 2.0)
        off = heli.point_at(u, v) + 0.01 * rng.standard_normal(3)
        x, y, z = helicoid_retract(off[0], off[1], off[2], 1.0)
        w = -x * math.sin(z) + y * math.cos(z)
        assert abs(w) < 1e-10


def test_strategy_construction_grid_checks():
    Catenoid(a=1.0)
    Catenoid(a=0.25)
    Helicoid(pitch=2.0)
    with pytest.raises(DomainError):
        Catenoid(a=-1.0)
    with pytest.raises(DomainError):
        Helicoid(pitch=0.0)


def test_fixed_plane_strategies():
    plane = HorizontalPlane(height=2.0)
    p = np.array([1.0, 1.0, 2.5])
    np.testing.assert_allclose(plane.retract(p), [1.0, 1.0, 2.0])
    assert plane.surface_residual(p) == pytest.approx(0.5)
    vert = VerticalPlane()
    np.testing.assert_allclose(vert.normal(p), [0.0, 1.0, 0.0])
    tilted = FixedPlane(nvec=(0.6, 0.0, 0.8))
    q = tilted.retract(np.array([1.0, 0.0, 1.0]))
    assert tilted.surface_residual(q) == pytest.approx(0.0, abs=1e-14)


def test_custom_strategy_validates_unit():
    bad = CustomStrategy(rule=lambda p: np.array([1.0, 1.0, 0.0]))
    with pytest.raises(DomainError):
        bad.normal(np.array([1.0, 0.0, 0.0]))
