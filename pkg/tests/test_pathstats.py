import math
from types import SimpleNamespace

import numpy as np
import pytest

from ranktwo.chain import constant_chain, expected_upcrossings, simulate_chain_batch
from ranktwo.errors import DomainError, EstimationError
from ranktwo.geometry import Catenoid, HorizontalPlane
from ranktwo.martingale import SimConfig, simulate_path, simulate_paths
from ranktwo.pathstats import (
    EstimateWithCI,
    WalkEnd,
    discretize_radial,
    first_passage_time_bound_check,
    hitting_and_upcrossings,
    mc_estimate,
    occupation_time,
)


def path_from_log_r(levels, n_between=5):
    """Synthetic stored path whose log r moves monotonically between the
    given integer levels (x3 = 0, azimuth fixed)."""
    lr = [float(levels[0])]
    for a, b in zip(levels[:-1], levels[1:]):
        lr.extend(np.linspace(a, b, n_between + 1)[1:])
    lr = np.asarray(lr)
    r = np.exp(lr)
    positions = np.column_stack([r, np.zeros_like(r), np.zeros_like(r)])
    times = np.linspace(0.0, 1.0, r.size)
    return SimpleNamespace(positions=positions, times=times)


def test_discretize_recovers_level_sequence():
    seq = [1, 2, 1, 2, 3, 2, 1, 0]
    walk = discretize_radial(path_from_log_r(seq), floor=0)
    assert walk.levels.tolist() == seq
    assert walk.terminated_by is WalkEnd.FLOOR_HIT


def test_discretize_mid_interval_end():
    lr = np.array([1.0, 1.4, 0.7, 1.3, 0.6, 1.1])
    r = np.exp(lr)
    path = SimpleNamespace(
        positions=np.column_stack([r, np.zeros_like(r), np.zeros_like(r)]),
        times=np.linspace(0, 1, r.size),
    )
    walk = discretize_radial(path, floor=0)
    assert walk.levels.tolist() == [1]
    assert walk.terminated_by is WalkEnd.PATH_ENDED_MID_INTERVAL


def test_discretize_requires_anchored_start():
    with pytest.raises(DomainError):
        discretize_radial(path_from_log_r([2, 3]), floor=0)


def test_planar_first_step_is_symmetric():
    # exit of log r from (L, L+2) for planar BM splits 1/2 each way
    plane = HorizontalPlane()
    cfg = SimConfig(inner_level=0, step_mode="radial", max_steps=300_000,
                    stop_at_level=2)
    batch = simulate_paths(plane, (math.e, 0.0, 0.0), cfg, 20_000, master_seed=314)
    p_up = (batch.stop_reason == 2).mean()
    se = math.sqrt(0.25 / 20_000)
    assert abs(p_up - 0.5) <= 3.0 * se


def test_hitting_and_upcrossings_hand_walks():
    walk = discretize_radial(path_from_log_r([1, 0]), floor=0)
    assert hitting_and_upcrossings(walk, 3) == ("floor", 0)
    seq = [1, 2, 3, 4, 3, 4, 3, 4, 3, 2, 1, 0]
    walk = discretize_radial(path_from_log_r(seq), floor=0)
    order, u = hitting_and_upcrossings(walk, 3)
    assert order == "upper" and u == 2
    unfinished = discretize_radial(path_from_log_r([1, 2]), floor=0)
    assert hitting_and_upcrossings(unfinished, 3) == ("neither", 0)
    with pytest.raises(DomainError):
        hitting_and_upcrossings(walk, 1)


def test_conditional_upcrossings_match_chain_oracle():
    # E[U_k | theta_{k+1} < theta_L] equals the attempt-count sum minus one
    spec = constant_chain(0.5)
    k = 3
    out = simulate_chain_batch(spec, 1, 1_000_000, 40_000, master_seed=555,
                               count_up_level=k)
    hit = out["up_count"] >= 1
    u = (out["up_count"][hit] - 1).astype(float)
    se = u.std(ddof=1) / math.sqrt(u.size)
    assert abs(u.mean() - (expected_upcrossings(spec, k) - 1.0)) <= 3.0 * se


def test_occupation_time_bounds_and_split():
    path = path_from_log_r([1, 2, 1, 0])
    total = path.times[-1] - path.times[0]
    assert occupation_time(path, 0.5 * math.exp(0.0)) == 0.0
    assert occupation_time(path, math.exp(3.0)) == pytest.approx(total, rel=1e-12)
    # linear-in-r split on a two-sample segment
    seg = SimpleNamespace(
        positions=np.array([[1.0, 0.0, 0.0], [3.0, 0.0, 0.0]]),
        times=np.array([0.0, 1.0]),
    )
    assert occupation_time(seg, 2.0) == pytest.approx(0.5)
    assert occupation_time(seg, 1.5) == pytest.approx(0.25)
    with pytest.raises(DomainError):
        occupation_time(seg, -1.0)


def test_first_passage_bound_plane():
    plane = HorizontalPlane()
    cfg = SimConfig(inner_level=0, step_mode="radial", max_steps=400_000,
                    stop_at_level=3)
    batch = simulate_paths(plane, (math.e, 0.0, 0.0), cfg, 2_000, master_seed=2718)
    est, bound, ok = first_passage_time_bound_check(batch, 0, 2)
    assert bound == pytest.approx(math.exp(6.0) - math.exp(2.0), rel=1e-12)
    assert ok
    # exact mean for the time-changed planar exit is ~63.9, far below 396
    assert est.mean == pytest.approx(63.9, rel=0.15)


def test_first_passage_bound_validates_batch():
    plane = HorizontalPlane()
    cfg = SimConfig(inner_level=0, step_mode="radial", max_steps=50_000)
    batch = simulate_paths(plane, (math.e, 0.0, 0.0), cfg, 10, master_seed=1)
    with pytest.raises(DomainError):
        first_passage_time_bound_check(batch, 0, 2)


def test_walk_counters_match_kernel_bookkeeping():
    # the engine's arrival counters agree with the offline discretizer
    cat = Catenoid(a=1.0)
    cfg = SimConfig(inner_level=1, step_mode="radial", dt=1e-3 * math.e**2,
                    max_steps=100_000, track_walk=True, watch_levels=(4, 5))
    start = cat.point_at_radius(math.e**2)
    for rep in range(5):
        rec = simulate_path(cat, start, cfg, master_seed=88, replication=rep)
        walk = discretize_radial(rec, floor=1)
        for idx, level in enumerate((4, 5)):
            arrivals = int(np.count_nonzero(walk.levels[1:] == level))
            assert arrivals == int(rec.arrivals[idx])
            order, u = hitting_and_upcrossings(walk, level - 1)
            assert u == max(0, int(rec.arrivals[idx]) - 1)
            if arrivals:
                assert order == "upper"
            else:
                assert order == (
                    "floor" if walk.terminated_by is WalkEnd.FLOOR_HIT else "neither"
                )


def test_mc_estimate():
    const = mc_estimate(lambda rng: 1.5, 100, master_seed=0)
    assert const.mean == 1.5 and const.std_error == 0.0
    bern = mc_estimate(lambda rng: float(rng.random() < 0.2), 100_000, master_seed=7)
    assert abs(bern.mean - 0.2) <= 3.0 * bern.std_error
    lo, hi = bern.interval
    assert lo < 0.2 < hi
    with pytest.raises(DomainError):
        mc_estimate(lambda rng: 0.0, 1, master_seed=0)


def test_mc_estimate_propagates_failures():
    def bad(rng):
        raise ValueError("boom")

    with pytest.raises(EstimationError):
        mc_estimate(bad, 5, master_seed=0)


def test_estimate_with_ci_needs_two():
    with pytest.raises(EstimationError):
        EstimateWithCI.from_samples([1.0])
