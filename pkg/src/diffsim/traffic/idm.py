"""Intelligent Driver Model car-following law.

The acceleration expression is written once with plain operators, so the
same function serves the tape-recorded (Var/Vec) models and the numpy
reference twins.
"""

import math
from dataclasses import dataclass

import numpy as np

from ..ad import detach


@dataclass(frozen=True)
class IdmParams:
    """a0/b0 are max acceleration/deceleration in m/s^2.  The source
    scenario prints the bound as "2m/s"; dimensionally it is m/s^2 and is
    treated as such here."""

    v_d: float            # desired velocity, m/s
    a0: float = 2.0
    b0: float = 2.0
    s0: float = 2.0       # minimum gap, m
    T: float = 1.0        # time headway, s
    delta: float = 4.0

    def __post_init__(self):
        for name in ("v_d", "a0", "b0", "s0", "T", "delta"):
            if getattr(self, name) <= 0:
                raise ValueError(f"IdmParams.{name} must be positive")


def idm_acceleration(v, dp, dv, p):
    """dv/dt = a0 (1 - (v/v_d)^delta - ((s0 + vT + v dv c) / dp)^2)
    with c = 1/(2 sqrt(a0 b0)).

    dp is the (positive) gap to the leader, dv = v - v_leader.
    """
    gap = detach(dp)
    if np.any(np.asarray(gap) <= 0.0):
        raise ValueError("IDM gap must be positive (vehicle overlap)")
    c = 1.0 / (2.0 * math.sqrt(p.a0 * p.b0))
    s_star = p.s0 + v * p.T + (v * dv) * c
    return p.a0 * (1.0 - (v * (1.0 / p.v_d)) ** p.delta
                   - (s_star / dp) ** 2)
