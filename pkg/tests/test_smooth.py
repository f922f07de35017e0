"""Smooth surrogate building blocks: values, brackets, gradients."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from diffsim import Tape, Vec
from diffsim import smooth as sm

from conftest import assert_grad_matches_fd


def test_logistic_values():
    assert sm.logistic(0.0, 0.0, 32.0) == pytest.approx(0.5)
    assert sm.logistic(1.0, 0.0, 32.0) == pytest.approx(1.0, abs=1e-10)
    assert sm.logistic(-1.0, 0.0, 32.0) == pytest.approx(0.0, abs=1e-10)
    # no overflow far in either tail
    assert sm.logistic(-1e6) == 0.0
    assert sm.logistic(1e6) == 1.0
    arr = sm.logistic(np.array([-1.0, 0.0, 1.0]), 0.0, 32.0)
    assert arr.shape == (3,)
    assert arr[1] == pytest.approx(0.5)


def test_logistic_gradient():
    t = Tape()
    x = t.input(0.1)
    z = sm.logistic(x, 0.0, 8.0)
    g = t.backward(z)
    s = 1.0 / (1.0 + math.exp(-0.8))
    assert z.value == pytest.approx(s)
    assert g.wrt(x) == pytest.approx(8.0 * s * (1.0 - s), rel=1e-12)


def test_logistic_vec_matches_float():
    t = Tape()
    xs = np.linspace(-0.5, 0.5, 11)
    v = t.input_vector(xs)
    z = sm.logistic(v, 0.1, 32.0)
    assert np.allclose(z.values, sm.logistic(xs, 0.1, 32.0))


def test_smooth_config_validation():
    cfg = sm.SmoothConfig(k=32.0, eps=0.5)
    assert cfg.match_k == pytest.approx(16.0)
    with pytest.raises(ValueError):
        sm.SmoothConfig(k=-1.0)
    with pytest.raises(ValueError):
        sm.SmoothConfig(eps=0.0)
    with pytest.raises(ValueError):
        sm.SmoothConfig(eps=0.5, match_k=1.0)   # window would not plateau


def test_smooth_branch():
    t = Tape()
    c = t.input(0.25)
    a = t.input(10.0)
    b = t.input(20.0)
    z = sm.smooth_branch(c, a, b)
    assert z.value == pytest.approx(0.25 * 10 + 0.75 * 20)
    g = t.backward(z)
    assert g.wrt(c) == pytest.approx(-10.0)
    assert g.wrt(a) == pytest.approx(0.25)
    assert g.wrt(b) == pytest.approx(0.75)
    assert sm.smooth_branch(0.25, 10.0, 20.0) == pytest.approx(17.5)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-100.0, 100.0), min_size=1, max_size=20))
def test_smooth_min_bracket(xs):
    t = Tape()
    v = t.input_vector(xs)
    z = sm.smooth_min(v)
    lo, hi = min(xs) - math.log(len(xs)), min(xs)
    assert lo - 1e-9 <= z.value <= hi + 1e-9


def test_smooth_min_max_gradients():
    t = Tape()
    xs = np.array([3.0, 1.0, 4.0, 1.5])
    v = t.input_vector(xs)
    z = sm.smooth_min(v)
    g = t.backward(z).wrt(v)
    w = np.exp(-(xs - xs.min()))
    assert np.allclose(g, w / w.sum(), rtol=1e-12)
    t2 = Tape()
    v2 = t2.input_vector(xs)
    m = sm.smooth_max(v2)
    assert xs.max() <= m.value <= xs.max() + math.log(len(xs))


def test_smooth_min_empty():
    t = Tape()
    with pytest.raises(ValueError):
        sm.smooth_min(Vec(t, np.empty(0, dtype=np.int64)))


def test_in_range():
    t = Tape()
    x = t.input(0.0)
    z = sm.in_range(x, -0.5, 0.5, 32.0)
    assert z.value == pytest.approx(1.0, abs=1e-6)
    y = t.input(2.0)
    assert sm.in_range(y, -0.5, 0.5, 32.0).value == pytest.approx(0.0,
                                                                  abs=1e-10)
    with pytest.raises(ValueError):
        sm.in_range(x, 1.0, -1.0)


def test_masked_accumulate():
    t = Tape()
    v = t.input_vector([1.0, 2.0, 3.0])
    m = t.constant_vector([1.0, 0.0, 1.0])
    assert sm.masked_accumulate(v, m).value == pytest.approx(4.0)
    with pytest.raises(ValueError):
        sm.masked_accumulate(v, t.constant_vector([1.0]))


def test_select_by_attribute_single_key():
    t = Tape()
    refs = t.input_vector([1.0, 2.0, 3.0])
    targets = t.input_vector([10.0, 20.0, 30.0])
    cfg = sm.SmoothConfig(k=32.0, eps=1e-3)
    z = sm.select_by_attribute(refs, t.constant(2.0), targets, cfg)
    # plateau height is sigmoid(match_k * eps)^2 ~ 0.9993
    assert z.value == pytest.approx(20.0, rel=2e-3)
    g = t.backward(z).wrt(targets)
    assert g[1] == pytest.approx(1.0, rel=2e-3)
    assert abs(g[0]) < 1e-9 and abs(g[2]) < 1e-9


def test_select_by_attribute_multi_key():
    t = Tape()
    pos = t.input_vector([5.0, 5.0, 9.0])
    lane = t.input_vector([0.0, 1.0, 0.0])
    targets = t.input_vector([10.0, 20.0, 30.0])
    cfgs = [sm.SmoothConfig(k=32.0, eps=0.5),
            sm.SmoothConfig(k=32.0, eps=0.5)]
    z = sm.select_by_attribute([pos, lane],
                               [t.constant(5.0), t.constant(1.0)],
                               targets, cfgs)
    assert z.value == pytest.approx(20.0, rel=5e-3)


def test_periodic_step_values_and_gradient():
    # ~1 on the first half-period, ~0 on the second
    assert sm.periodic_step(1.0, 5.0, 32.0) == pytest.approx(1.0, abs=1e-6)
    assert sm.periodic_step(6.0, 5.0, 32.0) == pytest.approx(0.0, abs=1e-6)
    t = Tape()
    off = t.input(0.3)
    z = sm.periodic_step(off + 1.0, 5.0, 32.0)

    def f(x):
        return sm.periodic_step(x[0] + 1.0, 5.0, 32.0)

    g = t.backward(z)
    assert_grad_matches_fd(f, [g.wrt(off)], np.array([0.3]), h=1e-6)
    with pytest.raises(ValueError):
        sm.periodic_step(1.0, -5.0)


def test_periodic_step_var_period():
    t = Tape()
    p = t.input(5.0)
    z = sm.periodic_step(t.constant(1.0), p, 32.0)
    assert z.value == pytest.approx(1.0, abs=1e-6)


def test_timers():
    t = Tape()
    v = sm.timer_init(t.input(2.5))
    assert sm.timer_expired(v, 32.0).value == pytest.approx(0.0, abs=1e-10)
    for _ in range(3):
        v = sm.timer_tick(v, 1.0)
    assert sm.timer_expired(v, 32.0).value == pytest.approx(1.0, abs=1e-6)
    assert sm.timer_sentinel(10.0) == 11.0
    assert sm.timer_expired(-1.0) == pytest.approx(1.0, abs=1e-10)


def test_building_block_gradients_match_fd():
    """Composite of every block, differentiated w.r.t. a shared input."""
    def f(x):
        a = sm.logistic(x[0], 0.2, 16.0)
        b = sm.smooth_branch(a, x[0] * 2.0, -x[0])
        c = sm.in_range(x[0], -1.0, 1.0, 16.0)
        d = sm.periodic_step(x[0] + 0.7, 3.0, 16.0)
        return b * c + d

    x0 = np.array([0.37])
    t = Tape()
    xv = t.input(x0[0])
    a = sm.logistic(xv, 0.2, 16.0)
    b = sm.smooth_branch(a, xv * 2.0, -xv)
    c = sm.in_range(xv, -1.0, 1.0, 16.0)
    d = sm.periodic_step(xv + 0.7, 3.0, 16.0)
    z = b * c + d
    assert z.value == pytest.approx(f(x0), rel=1e-12)
    g = t.backward(z)
    assert_grad_matches_fd(f, [g.wrt(xv)], x0, h=1e-6)
