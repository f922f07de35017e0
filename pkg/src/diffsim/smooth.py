"""Differentiable surrogate building blocks.

Each helper replaces a discrete model element (comparison, branch, min,
gather, periodic switch, one-shot timer) with a smooth counterpart whose
gradient is well defined everywhere.  All of them accept :class:`Var` or
:class:`Vec` arguments and record onto the owning tape; most also work on
plain floats for reference-model code.
"""

import math
from dataclasses import dataclass

import numpy as np

from .ad import Var, Vec, detach, exp, log, sin

DEFAULT_K = 32.0


@dataclass(frozen=True)
class SmoothConfig:
    """Shared steepness configuration.

    k:        logistic steepness used by thresholds, branches and timers.
    eps:      half-width for attribute matching, in the reference
              attribute's units.
    match_k:  steepness used inside attribute-match windows; must satisfy
              match_k * eps >= 8 so the window plateau stays near 1 at an
              exact match.
    """

    k: float = DEFAULT_K
    eps: float = 1e-3
    match_k: float = None

    def __post_init__(self):
        if self.k <= 0:
            raise ValueError("steepness k must be positive")
        if self.eps <= 0:
            raise ValueError("half-width eps must be positive")
        if self.match_k is None:
            object.__setattr__(self, "match_k", 8.0 / self.eps)
        if self.match_k * self.eps < 8.0:
            raise ValueError("match_k * eps must be >= 8 "
                             "(attribute window would not plateau)")


def _logistic_float(x, x0, k):
    xa = np.asarray(x, dtype=np.float64)
    z = np.atleast_1d(k * (xa - x0))
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    e = np.exp(z[~pos])
    out[~pos] = e / (1.0 + e)
    if xa.ndim == 0:
        return float(out[0])
    return out


def logistic(x, x0=0.0, k=DEFAULT_K):
    """Smooth threshold for ``x >= x0``: 1 / (1 + exp(-k (x - x0)))."""
    if isinstance(x, Var):
        h = x.tape.core.logistic(np.array([x.idx], dtype=np.int64),
                                 float(x0), float(k))
        return Var(x.tape, int(h[0]))
    if isinstance(x, Vec):
        return Vec(x.tape, x.tape.core.logistic(x.handles, float(x0),
                                                float(k)))
    return _logistic_float(x, x0, k)


def smooth_branch(cond, a, b):
    """Convex blend ``cond * a + (1 - cond) * b`` for cond in [0, 1].

    Gradients flow through both branches.
    """
    if not isinstance(a, (Var, Vec)) and not isinstance(b, (Var, Vec)):
        return cond * (a - b) + b
    return cond * a + (1.0 - cond) * b


def _as_vec(xs):
    if isinstance(xs, Vec):
        return xs
    return Vec.from_vars(list(xs))


def masked_accumulate(values, masks):
    """Sum of ``masks[i] * values[i]``; masks near 0 hide absent agents."""
    values = _as_vec(values)
    masks = _as_vec(masks)
    if len(values) != len(masks):
        raise ValueError("values/masks length mismatch")
    return (masks * values).sum()


def smooth_min(xs):
    """-log sum exp(-x_i); bracketed by [min - log n, min].

    The max-shift is detached, so it changes nothing analytically while
    keeping the exponentials in range.
    """
    xs = _as_vec(xs)
    if len(xs) == 0:
        raise ValueError("smooth_min of empty sequence")
    m = float(np.min(detach(xs)))
    s = exp(-(xs - m)).sum()
    return m - log(s)


def smooth_max(xs):
    return -smooth_min(-_as_vec(xs))


def in_range(x, lo, hi, k=DEFAULT_K):
    """~1 well inside (lo, hi), ~0 well outside; product of two thresholds."""
    if lo >= hi:
        raise ValueError("in_range requires lo < hi")
    return logistic(x, lo, k) * (1.0 - logistic(x, hi, k))


def select_by_attribute(refs, ref_value, targets, cfg=SmoothConfig()):
    """Differentiable gather: sum of targets masked by near-equality of
    reference attributes.

    ``refs``/``ref_value`` may be a single Vec/value or parallel lists of
    them (multi-key match); the model must guarantee at most one element
    matches all keys within ``cfg.eps``.  ``cfg`` may be one SmoothConfig
    or a list with one entry per key (attributes in different units need
    different match windows).
    """
    if isinstance(refs, (list, tuple)) and refs and isinstance(
            refs[0], (Vec, list, tuple)):
        keys = [(_as_vec(r), v) for r, v in zip(refs, ref_value)]
    else:
        keys = [(_as_vec(refs), ref_value)]
    cfgs = list(cfg) if isinstance(cfg, (list, tuple)) else [cfg] * len(keys)
    targets = _as_vec(targets)
    mask = None
    for (r, v), c in zip(keys, cfgs):
        if len(r) != len(targets):
            raise ValueError("refs/targets length mismatch")
        m = in_range(r - v, -c.eps, c.eps, c.match_k)
        mask = m if mask is None else mask * m
    return (targets * mask).sum()


def periodic_step(t, p, k=DEFAULT_K):
    """Smooth square wave l_k(sin(pi t / p)): period 2p, ~1 on the first
    half-period, ~0 on the second."""
    if isinstance(p, (Var, Vec)):
        arg = (t * math.pi) / p
    elif isinstance(t, (Var, Vec)):
        if p <= 0:
            raise ValueError("period must be positive")
        arg = t * (math.pi / p)
    else:
        if p <= 0:
            raise ValueError("period must be positive")
        return _logistic_float(np.sin(math.pi * t / p), 0.0, k)
    return logistic(sin(arg), 0.0, k)


# -- smooth timers --------------------------------------------------------

def timer_init(delay):
    """A timer is just its remaining delay; kept for symmetry."""
    return delay


def timer_sentinel(end_time):
    """Value for 'timer not needed': expiry stays ~0 for the whole run."""
    return float(end_time) + 1.0


def timer_tick(v_t, tau):
    return v_t - tau


def timer_expired(v_t, k=DEFAULT_K):
    """l_k(-v_t): ~1 once the timer has run out."""
    if isinstance(v_t, Var):
        h = v_t.tape.core.logistic(np.array([v_t.idx], dtype=np.int64),
                                   0.0, -float(k))
        return Var(v_t.tape, int(h[0]))
    if isinstance(v_t, Vec):
        return Vec(v_t.tape, v_t.tape.core.logistic(v_t.handles, 0.0,
                                                    -float(k)))
    return _logistic_float(-np.asarray(v_t, dtype=np.float64), 0.0, k)
