"""Tape and reverse-mode AD tests, run against every available backend."""

import math

import numpy as np
import pytest

from diffsim import Tape, TapeDomainError, Vec, available_backends, detach
from diffsim import ad

BACKENDS = available_backends()


@pytest.fixture(params=BACKENDS)
def tape(request):
    return Tape(backend=request.param)


def test_backend_selection():
    for b in BACKENDS:
        assert Tape(backend=b).backend == b
    with pytest.raises(ValueError):
        Tape(backend="fortran")


def test_scalar_arithmetic(tape):
    x = tape.input(3.0)
    y = tape.input(4.0)
    z = (x + y) * (x - y) / y + 2.0 * x - y ** 2
    assert z.value == pytest.approx((3 + 4) * (3 - 4) / 4 + 6 - 16)
    g = tape.backward(z)
    # d/dx = 2x/y + 2, d/dy = -x^2/y^2 - 1 - 2y
    assert g.wrt(x) == pytest.approx(2 * 3 / 4 + 2)
    assert g.wrt(y) == pytest.approx(-9 / 16 - 1 - 8)


def test_reverse_constant_ops(tape):
    x = tape.input(2.0)
    z = 5.0 - x
    w = 10.0 / x
    g = tape.backward(z + w)
    assert z.value == 3.0 and w.value == 5.0
    assert g.wrt(x) == pytest.approx(-1.0 - 10.0 / 4.0)


def test_unary_functions(tape):
    x = tape.input(0.7)
    z = ad.sin(x) * ad.cos(x) + ad.exp(x) - ad.log(x) + ad.sqrt(x) \
        + ad.tanh(x)
    g = tape.backward(z)
    expect = (math.cos(0.7) ** 2 - math.sin(0.7) ** 2 + math.exp(0.7)
              - 1 / 0.7 + 0.5 / math.sqrt(0.7) + 1 - math.tanh(0.7) ** 2)
    assert g.wrt(x) == pytest.approx(expect, rel=1e-12)


def test_unary_functions_plain_values():
    assert ad.sin(0.5) == math.sin(0.5)
    assert np.allclose(ad.exp(np.array([0.0, 1.0])), [1.0, math.e])


def test_pow_constant_exponent(tape):
    x = tape.input(1.5)
    z = x ** 3
    g = tape.backward(z)
    assert z.value == pytest.approx(1.5 ** 3)
    assert g.wrt(x) == pytest.approx(3 * 1.5 ** 2)
    with pytest.raises(TypeError):
        x ** x


def test_vector_ops(tape):
    v = tape.input_vector([1.0, 2.0, 3.0])
    w = tape.input_vector([4.0, 5.0, 6.0])
    z = ((v * w + v) / 2.0 - w).sum()
    assert z.value == pytest.approx(sum((a * b + a) / 2 - b
                                        for a, b in [(1, 4), (2, 5), (3, 6)]))
    g = tape.backward(z)
    assert np.allclose(g.wrt(v), (np.array([4.0, 5.0, 6.0]) + 1) / 2)
    assert np.allclose(g.wrt(w), np.array([1.0, 2.0, 3.0]) / 2 - 1)


def test_vec_scalar_broadcast(tape):
    v = tape.input_vector([1.0, 2.0])
    s = tape.input(3.0)
    z = (v * s + s).sum()
    g = tape.backward(z)
    assert np.allclose(g.wrt(v), [3.0, 3.0])
    assert g.wrt(s) == pytest.approx(1 + 2 + 2)


def test_gather_and_segment_sum(tape):
    v = tape.input_vector([1.0, 2.0, 3.0])
    gathered = v.gather([2, 0, 0, 1])
    assert np.allclose(gathered.values, [3.0, 1.0, 1.0, 2.0])
    seg = gathered.segment_sum([0, 0, 1, 1], 2)
    assert np.allclose(seg.values, [4.0, 3.0])
    g = tape.backward(seg.sum())
    # index 0 appears twice in the gather
    assert np.allclose(g.wrt(v), [2.0, 1.0, 1.0])


def test_fan_out_accumulates(tape):
    x = tape.input(2.0)
    z = x * x + x * x * x
    g = tape.backward(z)
    assert g.wrt(x) == pytest.approx(2 * 2 + 3 * 4)


def test_detach_cuts_gradient(tape):
    x = tape.input(2.0)
    y = x * 3.0
    c = tape.constant(detach(y))
    z = x + c
    g = tape.backward(z)
    assert g.wrt(x) == pytest.approx(1.0)
    assert detach(y) == 6.0
    assert detach(1.25) == 1.25


def test_backward_wrong_tape(tape):
    other = Tape()
    x = other.input(1.0)
    with pytest.raises(ValueError):
        tape.backward(x)


def test_gradient_container(tape):
    x = tape.input(1.0)
    v = tape.input_vector([2.0, 3.0])
    z = x * v.sum()
    g = tape.backward(z)
    assert len(g) == 3
    assert g[x.idx] == pytest.approx(5.0)
    assert g.as_dict()[int(v.handles[0])] == pytest.approx(1.0)
    with pytest.raises(TypeError):
        g.wrt(1.0)


def test_domain_errors(tape):
    x = tape.input(-1.0)
    with pytest.raises(TapeDomainError):
        ad.log(x)
    with pytest.raises(TapeDomainError):
        ad.sqrt(x)


def test_capacity_growth():
    tape = Tape(capacity=4)
    x = tape.input(1.0)
    z = x
    for _ in range(100):
        z = z * x + 1.0
    g = tape.backward(z)
    # z_n = z_{n-1} x + 1 from z_0 = x at x=1: z' = 1 + sum_{k=1}^{100} k
    assert g.wrt(x) == pytest.approx(5051.0)
    assert tape.n_nodes > 100


def test_reset(tape):
    x = tape.input(1.0)
    _ = x * 2.0
    tape.reset()
    assert tape.n_nodes == 0
    y = tape.input(5.0)
    g = tape.backward(y * y)
    assert g.wrt(y) == pytest.approx(10.0)


def test_vec_from_vars_and_indexing(tape):
    a, b = tape.input(1.0), tape.input(2.0)
    v = Vec.from_vars([a, b])
    assert v[0].value == 1.0
    assert len(v[0:2]) == 2
    with pytest.raises(ValueError):
        Vec.from_vars([])


def test_backends_agree():
    if len(BACKENDS) < 2:
        pytest.skip("single backend build")
    results = []
    for b in BACKENDS:
        t = Tape(backend=b)
        x = t.input_vector(np.linspace(0.1, 2.0, 16))
        z = (ad.sin(x * x) * ad.exp(-x) + ad.sqrt(x)).sum()
        g = t.backward(z)
        results.append((z.value, g.wrt(x)))
    assert results[0][0] == pytest.approx(results[1][0], rel=1e-14)
    assert np.allclose(results[0][1], results[1][1], rtol=1e-14)
