import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hemtsim.cluster import (BURSTABLE, CreditState, NodeSpec, WorkFunction, advance_credits,
                             build_work_function, effective_speed)


def small(credits=4.0, rho=0.2, **kw):
    return NodeSpec("t2.small", BURSTABLE, baseline=rho, initial_credits=credits, **kw)


def test_effective_speed_static_fraction():
    node = NodeSpec("c", capacity=0.4)
    for t in (0.0, 17.0, 1e6):
        assert effective_speed(node, CreditState(), t) == 0.4


def test_effective_speed_burstable_depleted_drops_to_baseline():
    assert effective_speed(small(0.0), CreditState(0.0), 5.0) == 0.2
    assert effective_speed(small(), CreditState(1.0), 5.0) == 1.0


def test_effective_speed_interference_multiplier():
    node = NodeSpec("c", capacity=1.0, interference=((10.0, 0.5),))
    assert effective_speed(node, CreditState(), 9.99) == 1.0
    assert effective_speed(node, CreditState(), 10.0) == 0.5


def test_advance_credits_depletes_in_five_minutes():
    out = advance_credits(small(), CreditState(4.0), 1.0, 300.0)
    assert out.credits == pytest.approx(0.0, abs=1e-12)
    assert out.last_update == 300.0


def test_advance_credits_zero_dt_is_identity():
    assert advance_credits(small(), CreditState(4.0, 7.0), 0.0, 0.0) == CreditState(4.0, 7.0)


def test_advance_credits_idle_minute_earns_baseline():
    assert advance_credits(small(0.0), CreditState(0.0), 0.0, 60.0).credits == pytest.approx(0.2)


def test_advance_credits_rejects_negative_dt():
    with pytest.raises(ValueError):
        advance_credits(small(), CreditState(4.0), 1.0, -1.0)


def test_advance_credits_clamps_at_cap():
    node = small(1.0, credit_cap=1.0)
    assert advance_credits(node, CreditState(1.0), 0.0, 3600.0).credits == 1.0


@settings(max_examples=200, deadline=None)
@given(c0=st.floats(0, 50), busy=st.floats(0, 1), dt1=st.floats(0, 600),
       dt2=st.floats(0, 600))
def test_advance_credits_splits_consistently_without_clamp(c0, busy, dt1, dt2):
    node = small(0.0, credit_cap=1e9)
    one = advance_credits(node, CreditState(c0), busy, dt1 + dt2)
    two = advance_credits(node, advance_credits(node, CreditState(c0), busy, dt1), busy, dt2)
    mid = c0 + (node.earn_rate - busy) * dt1 / 60
    end = c0 + (node.earn_rate - busy) * (dt1 + dt2) / 60
    if mid >= 0 and end >= 0:
        assert two.credits == pytest.approx(one.credits, abs=1e-12, rel=1e-12)


def test_nodespec_validation():
    with pytest.raises(ValueError):
        NodeSpec("x", capacity=0.0)
    with pytest.raises(ValueError):
        NodeSpec("x", capacity=1.5)
    with pytest.raises(ValueError):
        NodeSpec("x", interference=((5.0, 0.5), (5.0, 0.4)))
    with pytest.raises(ValueError):
        NodeSpec("x", interference=((5.0, 0.0),))
    with pytest.raises(ValueError):
        NodeSpec("x", kind="gpu")


def test_default_credit_cap_is_a_days_earnings():
    assert small().credit_cap == pytest.approx(24 * 60 * 0.2)
    assert small().earn_rate == 0.2


def test_work_at_ten_minutes_for_four_credits():
    wf = build_work_function(small(), 4.0, horizon=1200.0)
    # 6 credit-minutes of full-CPU work
    assert wf(600.0) / 60.0 == 6.0


def test_work_with_no_credits_is_baseline_line():
    wf = build_work_function(small(0.0), 0.0, horizon=1200.0)
    assert wf(600.0) / 60.0 == pytest.approx(2.0)


def test_static_work_function_is_one_segment():
    wf = build_work_function(NodeSpec("c", capacity=0.4), 0.0, horizon=50.0)
    assert wf(100.0) == pytest.approx(40.0)
    assert len(wf.breakpoints) == 2


def test_build_work_function_rejects_bad_horizon():
    with pytest.raises(ValueError):
        build_work_function(small(), 4.0, 0.0)


def _stepped_work(node, credits, t_end, dt=0.01):
    """Independent oracle: integrate speed with small credit steps."""
    state, w, t = CreditState(credits), 0.0, 0.0
    while t < t_end - 1e-9:
        h = min(dt, t_end - t)
        w += effective_speed(node, state, t) * h
        state = advance_credits(node, state, 1.0, h)
        t += h
    return w


@pytest.mark.parametrize("credits,rho", [(4.0, 0.2), (1.0, 0.4), (0.0, 0.2), (10.0, 0.4)])
def test_work_function_matches_time_stepping(credits, rho):
    node = small(credits, rho)
    wf = build_work_function(node, credits, horizon=2000.0)
    for t in (30.0, 299.0, 777.0, 1500.0):
        assert wf(t) == pytest.approx(_stepped_work(node, credits, t), abs=0.02)


@settings(max_examples=100, deadline=None)
@given(credits=st.floats(0, 30), rho=st.floats(0.05, 1.0), horizon=st.floats(1, 5000))
def test_burstable_work_function_shape(credits, rho, horizon):
    wf = build_work_function(small(credits, rho), credits, horizon)
    assert wf(0.0) == 0.0
    assert wf.is_concave()
    assert all(s <= 1.0 + 1e-12 for s in wf.slopes)
    vals = [wf(t) for t in (0, horizon / 3, horizon / 2, horizon, 2 * horizon)]
    assert vals == sorted(vals)


def test_work_function_inverse_and_superpose():
    a = WorkFunction(((0, 0), (10, 10)), tail_slope=0.5)
    b = WorkFunction(((0, 0), (4, 2)), tail_slope=0.5)
    s = WorkFunction.superpose([a, b])
    assert s(10) == pytest.approx(10 + 2 + 3)
    assert s.inverse(s(7.5)) == pytest.approx(7.5)
    assert a.inverse(12.5) == pytest.approx(15.0)


def test_work_function_validation():
    with pytest.raises(ValueError):
        WorkFunction(((1, 0), (2, 1)))
    with pytest.raises(ValueError):
        WorkFunction(((0, 0), (2, 1), (1, 2)))
    with pytest.raises(ValueError):
        WorkFunction(((0, 0), (1, 2), (2, 1)))


def test_infinite_credits_never_deplete():
    wf = build_work_function(small(0.0, credit_cap=math.inf), math.inf, 100.0)
    assert wf(420.0) == pytest.approx(420.0)
