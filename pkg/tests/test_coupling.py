import math

import numpy as np
import pytest

from ranktwo.chain import constant_chain
from ranktwo.coupling import (
    SyntheticChainOracle,
    WalkOutcomeOracle,
    build_dominating_chain,
    run_coupled_batch,
    statistical_dominance_test,
    verify_domination,
)
from ranktwo.envelope import Envelope, chain_spec_from_envelope
from ranktwo.errors import CapabilityError, DomainError
from ranktwo.geometry import Catenoid, Helicoid
from ranktwo.martingale import SimConfig, simulate_paths


def test_phi_equal_p_copies_x():
    # boost probability is zero, so Y tracks X until X is absorbed
    spec = constant_chain(0.55)
    oracle = SyntheticChainOracle(
        floor=0, phi=lambda m: 0.55, rng=np.random.default_rng(3)
    )
    uniforms = np.random.default_rng(4).random(500)
    y, x, held = build_dominating_chain(oracle, spec, uniforms)
    assert held
    k = next(i for i, xv in enumerate(x) if xv == 0)
    assert y[: k + 1].tolist() == x[: k + 1]


def test_phi_zero_trivial_domination():
    spec = constant_chain(0.5)
    oracle = SyntheticChainOracle(floor=0, phi=lambda m: 0.0,
                                  rng=np.random.default_rng(1))
    uniforms = np.random.default_rng(2).random(400)
    y, x, held = build_dominating_chain(oracle, spec, uniforms)
    assert held
    assert x[1] == 0  # X steps straight down and is absorbed


def test_one_uniform_per_step():
    spec = constant_chain(0.5)
    oracle = SyntheticChainOracle(floor=0, phi=lambda m: 0.3,
                                  rng=np.random.default_rng(5))
    uniforms = np.random.default_rng(6).random(50)
    y, x, held = build_dominating_chain(oracle, spec, uniforms)
    if 0 not in y.tolist():
        assert len(y) == len(uniforms) + 1


def test_verify_domination():
    assert verify_domination([5, 6], [5, 6])
    assert not verify_domination([5, 6], [5, 4])
    assert verify_domination([5, None, 3], [5, 5, 5])


def test_capability_error_without_phi():
    spec = constant_chain(0.5)
    oracle = WalkOutcomeOracle(floor=0, moves=np.array([1, -1, -1]))
    with pytest.raises(CapabilityError):
        build_dominating_chain(oracle, spec, np.random.default_rng(0).random(10))


def test_phi_above_p_rejected():
    spec = constant_chain(0.5)
    oracle = SyntheticChainOracle(floor=0, phi=lambda m: 0.9,
                                  rng=np.random.default_rng(0))
    with pytest.raises(DomainError):
        build_dominating_chain(oracle, spec, np.random.default_rng(1).random(10))
    with pytest.raises(DomainError):
        run_coupled_batch(spec, np.full(200, 0.9), 10, 0, max_steps=100)


def test_coupled_batch_domination_and_marginals():
    # two-regime synthetic chain under the symmetric comparison chain
    spec = constant_chain(0.5)
    levels = np.arange(1, 10_003)
    phi = np.where(levels < 10, 0.4, 0.45)
    out = run_coupled_batch(spec, phi, 20_000, master_seed=1602, max_steps=10_000)
    assert out["domination"].mean() == 1.0
    tot = out["y_up"] + out["y_down"]
    tested = 0
    for i in np.nonzero(tot >= 500)[0]:
        rate = out["y_up"][i] / tot[i]
        sigma = math.sqrt(0.25 / tot[i])
        assert abs(rate - 0.5) <= 3.0 * sigma, f"level {i + 1}"
        tested += 1
    assert tested >= 20


def test_marginals_valid_under_different_oracles_same_uniforms():
    # the same master seed reuses the same uniform streams; Y's law is p_m
    # regardless of which synthetic oracle is coupled to it
    spec = constant_chain(0.5)
    for phi_val in (0.1, 0.45):
        out = run_coupled_batch(spec, np.full(5003, phi_val), 5_000,
                                master_seed=88, max_steps=5_000)
        tot = out["y_up"] + out["y_down"]
        mask = tot >= 2_000
        assert mask.sum() >= 10
        rates = out["y_up"][mask] / tot[mask]
        sigmas = np.sqrt(0.25 / tot[mask])
        assert np.all(np.abs(rates - 0.5) <= 3.0 * sigmas)
        assert out["domination"].mean() == 1.0


def test_dominance_negative_control_small_c():
    # catenoid up-rates at the first level beat the p_m ceiling once the
    # envelope is too small to contain the surface
    env = Envelope(kind="f2", c=0.05, floor=0)
    spec = chain_spec_from_envelope(env)
    cat = Catenoid(a=1.0)
    cfg = SimConfig(inner_level=0, step_mode="radial", max_steps=100_000,
                    track_walk=True)
    batch = simulate_paths(cat, cat.point_at_radius(math.e), cfg, 2_000,
                           master_seed=2025)
    report = statistical_dominance_test(batch.dom_up, batch.dom_down, spec)
    assert any(not row["passed"] for row in report)
    level1 = next(r for r in report if r["level"] == 1)
    assert not level1["passed"]
    assert level1["up_rate"] > level1["ceiling"]


def test_helicoid_escapes_every_envelope():
    # at any fixed radius the helicoid reaches arbitrarily large |x3|, so no
    # profile |x3| <= f(r) contains it
    heli = Helicoid(pitch=1.0)
    env = Envelope(kind="f1", c=5.0, floor=10)
    r = math.e**4
    p = heli.point_at(r, 100.0 * math.pi)
    assert math.hypot(p[0], p[1]) == pytest.approx(r)
    from ranktwo.envelope import eval_f

    assert abs(p[2]) > eval_f(env, r)


def test_statistical_dominance_boundary_case():
    # synthetic chain with phi = p sits at the ceiling and passes at 3 sigma
    spec = constant_chain(0.5)
    out = run_coupled_batch(spec, np.full(5003, 0.5), 5_000, master_seed=12,
                            max_steps=5_000)
    report = statistical_dominance_test(out["x_up"], out["x_down"], spec)
    assert report and all(row["passed"] for row in report)
