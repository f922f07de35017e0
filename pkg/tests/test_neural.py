"""Network spec, coefficient layout and forward/backward consistency."""

import numpy as np
import pytest

from diffsim import Tape, neural

from conftest import assert_grad_matches_fd


def test_coefficient_count_formula():
    assert neural.coefficient_count(25, 60) == 91585
    assert neural.coefficient_count(4, 2) == 494
    assert neural.coefficient_count(1, 2) == (60 + 1) * 2 + 3
    with pytest.raises(ValueError):
        neural.coefficient_count(0, 2)


def test_spec_for_grid_matches_formula():
    for i, h in ((1, 2), (4, 2), (25, 60)):
        spec = neural.spec_for_grid(i, h)
        assert spec.coefficient_count == neural.coefficient_count(i, h)
        assert spec.n_in == 60 * i
        assert spec.n_out == i


def test_spec_validation():
    with pytest.raises(ValueError):
        neural.NetSpec(0, 1, 1)


def test_slices_partition():
    spec = neural.NetSpec(3, 4, 2)
    w1, b1, w2, b2 = spec.slices()
    idx = np.arange(spec.coefficient_count)
    parts = np.concatenate([idx[w1], idx[b1], idx[w2], idx[b2]])
    assert np.array_equal(parts, idx)


def test_init_deterministic():
    spec = neural.NetSpec(3, 4, 2)
    a = neural.init_standard_normal(spec, 5)
    b = neural.init_standard_normal(spec, 5)
    c = neural.init_standard_normal(spec, 6)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    assert a.shape == (spec.coefficient_count,)


def test_forward_matches_reference():
    spec = neural.NetSpec(5, 3, 2)
    coeffs = neural.init_standard_normal(spec, 0) * 0.3
    x = np.linspace(-1.0, 1.0, spec.n_in)
    t = Tape()
    out = neural.forward(spec, t.input_vector(coeffs), t.constant_vector(x))
    ref = neural.forward_ref(spec, coeffs, x)
    assert np.allclose(out.values, ref, rtol=1e-12)
    assert (np.abs(out.values) < 1.0).all()


def test_forward_shape_errors():
    spec = neural.NetSpec(5, 3, 2)
    t = Tape()
    coeffs = t.input_vector(np.zeros(spec.coefficient_count))
    with pytest.raises(ValueError):
        neural.forward(spec, coeffs, t.constant_vector(np.zeros(4)))
    with pytest.raises(ValueError):
        neural.forward(spec, t.input_vector(np.zeros(3)),
                       t.constant_vector(np.zeros(5)))
    with pytest.raises(ValueError):
        neural.forward_ref(spec, np.zeros(3), np.zeros(5))


def test_backprop_matches_fd():
    spec = neural.NetSpec(4, 3, 2)
    coeffs = neural.init_standard_normal(spec, 1) * 0.5
    x = np.array([0.2, -0.4, 0.9, 0.1])

    def f(c):
        return float(neural.forward_ref(spec, c, x).sum())

    t = Tape()
    cv = t.input_vector(coeffs)
    out = neural.forward(spec, cv, t.constant_vector(x))
    g = t.backward(out.sum()).wrt(cv)
    assert_grad_matches_fd(f, g, coeffs, h=1e-6, rtol=1e-6,
                           min_checked=spec.coefficient_count // 2)


def test_params_roundtrip(tmp_path):
    spec = neural.NetSpec(3, 2, 1)
    values = neural.init_standard_normal(spec, 9)
    path = tmp_path / "net.txt"
    neural.save_params(path, spec, values)
    spec2, values2 = neural.load_params(path)
    assert spec2 == spec
    assert np.array_equal(values, values2)
    with pytest.raises(ValueError):
        neural.save_params(path, spec, values[:-1])
