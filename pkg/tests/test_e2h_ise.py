import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats as sps

from hierlab.e2h_ise import CController, InitSpace, c_next, record_eval_success, record_train_outcome, sample_initial

TOL = 1e-12


def fill(ctl, flags):
    for f in flags:
        record_train_outcome(ctl, f)


def test_self_paced_increase():
    ctl = CController("self_paced", c=0.3, delta=0.05, psi_high=0.8, window=10)
    fill(ctl, [1] * 9 + [0])  # rate 0.9
    assert abs(c_next(ctl, 0, 100, 11) - 0.35) <= TOL
    assert len(ctl.train_window) == 0


def test_self_paced_clips_at_one_and_holds_between_thresholds():
    ctl = CController("self_paced", c=1.0, window=4)
    fill(ctl, [1, 1, 1, 1])
    assert c_next(ctl, 0, 100, 5) == 1.0
    ctl = CController("self_paced", c=0.4, psi_high=0.8, psi_low=0.2, window=4)
    fill(ctl, [1, 0, 1, 0])
    assert ctl.train_rate == 0.5
    assert c_next(ctl, 0, 100, 5) == 0.4
    assert len(ctl.train_window) == 4


def test_self_paced_decrease_and_window_gate():
    ctl = CController("self_paced", c=0.5, delta=0.1, psi_low=0.3, window=5)
    fill(ctl, [0, 0, 0, 0])
    assert c_next(ctl, 0, 100, 4) == 0.5  # window not full yet
    fill(ctl, [1])
    assert abs(c_next(ctl, 0, 100, 5) - 0.4) <= TOL
    fill(ctl, [0] * 4)
    assert abs(c_next(ctl, 0, 100, 9) - 0.4) <= TOL  # emptied window must refill


def test_control_rule():
    ctl = CController("control", c=0.5, delta=0.1, psi=0.6, window=5)
    fill(ctl, [1, 0, 0, 0, 0])
    assert c_next(ctl, 0, 100, 5) == 0.5  # j <= w
    assert abs(c_next(ctl, 0, 100, 6) - 0.4) <= TOL
    fill(ctl, [1] * 5)
    assert abs(c_next(ctl, 0, 100, 7) - 0.5) <= TOL
    assert len(ctl.train_window) == 5  # control never empties


def test_control_adaptive_target():
    ctl = CController("control_adaptive", c=0.5, delta=0.1, shift=0.2, psi_max=0.9, window=3)
    for r in (0.4, 0.5, 0.6):
        record_eval_success(ctl, r)
    assert abs(ctl.target - 0.7) <= TOL
    fill(ctl, [1, 1, 0])  # rate 2/3 < 0.7
    assert abs(c_next(ctl, 0, 100, 4) - 0.4) <= TOL
    for r in (1.0, 1.0, 1.0):
        record_eval_success(ctl, r)
    assert ctl.target == 0.9
    with pytest.raises(ValueError):
        record_eval_success(ctl, 1.2)


def test_predefined_profile():
    ctl = CController("predefined", z_sat=0.5)
    assert c_next(ctl, 0, 1000, 1) == 0.0
    assert abs(c_next(ctl, 250, 1000, 2) - 0.5) <= TOL
    assert c_next(ctl, 500, 1000, 3) == 1.0
    assert c_next(ctl, 900, 1000, 4) == 1.0
    with pytest.raises(ValueError):
        c_next(CController("predefined"), 1, 0, 1)


def test_train_rate_examples():
    ctl = CController(window=4)
    fill(ctl, [1, 1, 1, 1])
    assert ctl.train_rate == 1.0
    ctl = CController(window=4)
    fill(ctl, [1, 0, 1, 0])
    assert ctl.train_rate == 0.5


@settings(max_examples=300, deadline=None)
@given(st.sampled_from(["self_paced", "control", "control_adaptive"]), st.floats(0, 1),
       st.floats(0, 1), st.integers(1, 10), st.lists(st.booleans(), max_size=80))
def test_c_stays_in_unit_interval(mode, c0, delta, w, flags):
    ctl = CController(mode, c=c0, delta=delta, window=w)
    for j, f in enumerate(flags, start=1):
        record_train_outcome(ctl, f)
        if j % 5 == 0:
            record_eval_success(ctl, float(f))
        c = c_next(ctl, j, 100, j)
        assert 0.0 <= c <= 1.0
        assert len(ctl.train_window) <= w and len(ctl.eval_window) <= w


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 10**5), st.floats(0.01, 1), st.data())
def test_predefined_monotone(total, z, data):
    ctl = CController("predefined", z_sat=z)
    ts = sorted(data.draw(st.lists(st.integers(0, total), min_size=2, max_size=20)))
    cs = [c_next(ctl, t, total, 1) for t in ts]
    assert all(a <= b for a, b in zip(cs, cs[1:]))


def test_sample_initial_center_and_bounds(rng):
    space = InitSpace(np.zeros(3), np.full(3, 4.0))
    state = rng.bit_generator.state
    assert sample_initial(space, 0.0, rng).tolist() == [2.0, 2.0, 2.0]
    assert rng.bit_generator.state == state
    xs = np.array([sample_initial(space, 0.5, rng) for _ in range(10_000)])
    assert xs.min() >= 1.0 and xs.max() <= 3.0
    assert np.all(xs.min(axis=0) <= 1.05) and np.all(xs.max(axis=0) >= 2.95)
    with pytest.raises(ValueError):
        sample_initial(space, 1.1, rng)
    with pytest.raises(ValueError):
        InitSpace(np.ones(2), np.ones(2))


def test_sample_initial_uniform_at_one(rng):
    space = InitSpace(np.array([-1.0, 0.0]), np.array([1.0, 5.0]))
    xs = np.array([sample_initial(space, 1.0, rng) for _ in range(10_000)])
    for k in range(2):
        lo, hi = space.lower[k], space.upper[k]
        assert sps.kstest(xs[:, k], sps.uniform(lo, hi - lo).cdf).pvalue > 0.01


@settings(max_examples=300, deadline=None)
@given(st.floats(0, 1), st.floats(0, 1))
def test_support_shrinks_with_c(a, b):
    c1, c2 = sorted((a, b))
    space = InitSpace(np.array([-2.0, 1.0]), np.array([3.0, 2.0]))
    lo1, hi1 = space.bounds(c1)
    lo2, hi2 = space.bounds(c2)
    assert np.all(lo2 <= lo1 + TOL) and np.all(hi1 <= hi2 + TOL)
