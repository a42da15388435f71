from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from approachability import (
    AssumptionViolated,
    Box,
    ControllerParams,
    Cover,
    ModelError,
    ReturnTimeController,
    RunConfig,
    StationaryStrategy,
    TwoTimeScaleController,
    compute_hold_time,
    compute_rho,
    next_switch_step,
    run,
)
from approachability.controller import INSIDE
from approachability.geometry import RewardGeometry
from approachability.instances import constant_reward


def naive_switch(start: int, hold: float) -> int:
    """First m whose exact partial sum from ``start`` to ``m - 1`` exceeds ``hold``."""
    m = start
    while math.fsum(1.0 / i for i in range(start, m)) <= hold:
        m += 1
    return m


def test_hold_time_examples():
    assert compute_hold_time(0.12, RewardGeometry(1.0)) == pytest.approx(0.035)
    assert compute_hold_time(0.24, RewardGeometry(2.0)) == pytest.approx(0.035)
    assert compute_hold_time(1e-12, RewardGeometry(1.0)) < 1e-12


def test_hold_time_degenerate():
    with pytest.raises(ModelError):
        compute_hold_time(0.1, RewardGeometry(0.0))
    with pytest.raises(ModelError):
        compute_hold_time(0.0, RewardGeometry(1.0))


@given(st.floats(1e-9, 10), st.floats(1e-3, 10))
def test_hold_time_strictly_inside_interval(rho, v_max):
    hold = compute_hold_time(rho, RewardGeometry(v_max))
    assert rho / (4 * v_max) < hold < rho / (3 * v_max)


def test_rho_examples(orthant):
    far = Box([-np.inf, -np.inf], [0, 0])
    # distance 0.2, huge margin: the distance term binds
    assert compute_rho(orthant, RewardGeometry(1.0), [0.2, -1], 1e6) == pytest.approx(0.1)
    # margin 0.06 with diam 1 gives 0.06 / 6
    assert compute_rho(far, RewardGeometry(1.0), [50, 50], 0.06) == pytest.approx(0.01)
    assert compute_rho(orthant, RewardGeometry(1.0), [1e-9, 0], 1e6) == pytest.approx(0.5e-9)


def test_rho_rejects_nonpositive_margin(orthant):
    with pytest.raises(ModelError):
        compute_rho(orthant, RewardGeometry(1.0), [1, 1], 0.0)


def test_switch_step_examples():
    assert next_switch_step(10, 0.3) == 14
    assert next_switch_step(10, 0.05) == 11  # a single term already exceeds
    assert next_switch_step(1, 1.0) == 3  # 1 + 1/2 > 1, strict
    with pytest.raises(ModelError):
        next_switch_step(0, 0.1)


@given(st.integers(1, 10**6), st.floats(0, 3))
def test_switch_step_matches_naive_sum(start, hold):
    m = next_switch_step(start, hold)
    if m - start < 5000:
        assert m == naive_switch(start, hold)


@given(st.integers(1, 10**5), st.floats(1e-6, 2))
def test_switch_step_minimality(start, hold):
    m = next_switch_step(start, hold)
    assert math.fsum(1.0 / i for i in range(start, m)) > hold
    assert math.fsum(1.0 / i for i in range(start, m - 1)) <= hold
    # the rescaled hold overshoots the hold time by at most one term
    assert math.fsum(1.0 / i for i in range(start, m)) <= hold + 1.0 / start


@given(st.integers(0, 2**32 - 1), st.integers(1, 300))
def test_cover_lookup_matches_linear_scan(seed, n_anchors):
    rng = np.random.default_rng(seed)
    target = Box([-np.inf, -np.inf], [0, 0])
    cover = Cover(2)
    # anchors at many distance scales, some with tiny margin-limited radii
    scales = 10.0 ** rng.uniform(-6, 0, size=n_anchors)
    qs = rng.uniform(-0.2, 1, size=(n_anchors, 2)) * scales[:, None]
    for q in qs:
        dist = target.distance(q)
        if dist == 0:
            continue
        rho = min(0.5 * dist, dist * rng.choice([0.5, 0.05, 0.001]))
        cover.add(q, rho, 1.0, None, 1.0, dist)
    cover.add([5.0, 5.0], 20.0, 1.0, None, 1.0)  # no distance: scanned linearly
    probes = np.vstack([qs + rng.normal(size=qs.shape) * scales[:, None] * 0.05,
                        rng.uniform(-1, 1, size=(50, 2))])
    for x in probes:
        dist = target.distance(x)
        fast = cover.lookup(x, dist)
        slow = cover.lookup_linear(x)
        assert (fast is None and slow is None) or fast.index == slow.index
        assert cover.lookup(x) is slow


def make_controller(model, target, **params):
    return TwoTimeScaleController(model, target, ControllerParams(**params))


def test_first_lookup_creates_anchor(game, orthant):
    ctrl = make_controller(game, orthant)
    entry = ctrl.lookup_or_create_anchor([1.0, 1.0])
    assert entry.index == 0 and np.array_equal(entry.q, [1.0, 1.0])
    again = ctrl.lookup_or_create_anchor([1.0, 1.0])
    assert again is entry and len(ctrl.anchors) == 1


def test_lookup_prefers_lower_index(game, orthant):
    ctrl = make_controller(game, orthant)
    first = ctrl.lookup_or_create_anchor([1.0, 1.0])
    # a second anchor outside the first ball whose own ball reaches back
    second = ctrl.lookup_or_create_anchor([1.0 + first.rho, 1.0])
    probe = np.array([1.0 + 0.45 * first.rho, 1.0])
    covering = [a.index for a in ctrl.anchors if np.linalg.norm(probe - a.q) < a.rho / 2]
    assert ctrl.lookup_or_create_anchor(probe).index == min(covering) == first.index
    assert second.index == 1


def test_anchor_invariants(chain, orthant, rng):
    ctrl = make_controller(chain, orthant)
    v_max = ctrl.geometry.v_max
    for x in rng.uniform(-0.5, 1.5, size=(200, 2)):
        if orthant.distance(x) == 0:
            continue
        entry = ctrl.lookup_or_create_anchor(x)
        assert np.linalg.norm(x - entry.q) < entry.rho / 2
    for a in ctrl.anchors:
        assert a.rho <= orthant.distance(a.q)
        assert a.rho / (4 * v_max) < a.hold_time < a.rho / (3 * v_max)
        assert a.margin > 0
        assert a.hold_time <= 7 / 24 * 0.5 * orthant.distance(a.q) / v_max


def test_on_step_schedule(game, orthant):
    ctrl = make_controller(game, orthant)
    pi = ctrl.on_step(10, np.array([1.0, 1.0]))
    entry = ctrl.active
    assert pi is entry.strategy
    assert ctrl.next_switch_step == naive_switch(10, entry.hold_time)
    for n in range(11, ctrl.next_switch_step):
        assert ctrl.on_step(n, np.array([-5.0, 7.0])) is pi  # held between switches
    assert ctrl.switch_log.steps == [10]


def test_on_step_inside_target(game, orthant):
    ctrl = make_controller(game, orthant)
    ctrl.next_switch_step = 100
    pi = ctrl.on_step(100, np.array([-1.0, -1.0]))
    assert pi == StationaryStrategy.uniform(1, 2)
    assert ctrl.next_switch_step == 101
    assert ctrl.active is None and ctrl.switch_log.anchors == [INSIDE]


def test_on_step_assumption_violation(orthant):
    ctrl = make_controller(constant_reward(), orthant)
    with pytest.raises(AssumptionViolated) as err:
        ctrl.on_step(1, np.array([1.0, 1.0]))
    assert err.value.margin < 0


def test_params_validation():
    with pytest.raises(ModelError):
        ControllerParams(beta=1.0)
    with pytest.raises(ModelError):
        ControllerParams(scheme="greedy")
    with pytest.raises(ModelError):
        ControllerParams.from_dict({"beta": 0.5, "gamma": 1})


def test_return_time_single_state_switches_every_step(game, orthant):
    trace = run(RunConfig(game, orthant, {"kind": "uniform-random"}, 500,
                          ControllerParams(scheme="return-time"), seed=3))
    assert trace.status == "ok"
    assert np.array_equal(trace.switch_steps, np.arange(1, 500))


def test_return_time_switches_at_visits(chain, orthant):
    trace = run(RunConfig(chain, orthant, {"kind": "uniform-random"}, 3000,
                          ControllerParams(scheme="return-time"), seed=4, record_stride=1))
    states = trace.rows["state"]
    visits = np.flatnonzero(states == 0)
    assert np.array_equal(trace.switch_steps, visits[visits >= 1])


def test_return_time_holds_without_visits(chain, orthant):
    ctrl = ReturnTimeController(chain, orthant, ControllerParams(scheme="return-time", reference_state=1))
    first = ctrl.current
    for n in range(1, 50):
        assert ctrl.on_step(n, np.array([1.0, 1.0]), theta=0) is first
    assert ctrl.switch_log.steps == []


def test_return_time_bad_reference(chain, orthant):
    with pytest.raises(ModelError):
        ReturnTimeController(chain, orthant, ControllerParams(scheme="return-time", reference_state=5))


def test_switch_log_is_deterministic(chain, orthant):
    logs = []
    for _ in range(2):
        trace = run(RunConfig(chain, orthant, {"kind": "best-response"}, 20_000, seed=9, stream=2))
        logs.append((trace.switch_steps.tobytes(), trace.switch_anchor.tobytes()))
    assert logs[0] == logs[1]


def test_run_switch_windows_respect_hold_times(chain, orthant):
    trace = run(RunConfig(chain, orthant, {"kind": "uniform-random"}, 20_000, seed=5))
    anchors = trace.anchors
    steps, ids = trace.switch_steps, trace.switch_anchor
    assert np.all(np.diff(steps) > 0)
    for s, s_next, a in zip(steps[:-1], steps[1:], ids[:-1]):
        if a == INSIDE:
            assert s_next == s + 1
        else:
            assert s_next == next_switch_step(int(s), anchors[a].hold_time)
            x = trace.xs[s]
            assert np.linalg.norm(x - anchors[a].q) < anchors[a].rho / 2
