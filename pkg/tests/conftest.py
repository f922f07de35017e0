"""Shared helpers: central finite differences and the discontinuity
detector used to exclude non-smooth points from gradient comparisons."""

import numpy as np
import pytest


def central_fd(f, x, i, h=1e-6):
    """Central finite difference of scalar ``f`` along coordinate ``i``."""
    x = np.asarray(x, dtype=np.float64)
    xp, xm = x.copy(), x.copy()
    xp[i] += h
    xm[i] -= h
    return (f(xp) - f(xm)) / (2.0 * h)


def fd_is_smooth(f, x, i, h=1e-4, rtol=0.05, atol=1e-7):
    """Discontinuity detector: the point is treated as smooth when the
    central difference is stable under halving the step,

        |FD(h) - FD(h/2)| <= rtol * (|FD(h)| + |FD(h/2)|) + atol.

    Near a kink or a saturated logistic edge the two estimates diverge
    and the point is excluded from gradient comparisons.
    """
    d1 = central_fd(f, x, i, h)
    d2 = central_fd(f, x, i, h / 2.0)
    return abs(d1 - d2) <= rtol * (abs(d1) + abs(d2)) + atol, d2


def assert_grad_matches_fd(f, grad, x, h=1e-4, rtol=1e-3, atol=1e-8,
                           indices=None, min_checked=1):
    """Compare an AD gradient against central finite differences at every
    smooth coordinate; non-smooth coordinates are skipped."""
    x = np.asarray(x, dtype=np.float64)
    checked = 0
    idx = range(len(x)) if indices is None else indices
    for i in idx:
        smooth, fd = fd_is_smooth(f, x, i, h)
        if not smooth:
            continue
        checked += 1
        assert grad[i] == pytest.approx(fd, rel=rtol, abs=atol), (
            f"coordinate {i}: ad={grad[i]!r} fd={fd!r}")
    assert checked >= min_checked, "detector excluded every coordinate"
