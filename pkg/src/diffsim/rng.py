"""Counter-based pseudo-random streams.

Every draw is a pure function of its integer keys (seed, stream tag,
per-event counters), so a differentiable run and its discrete reference
twin see exactly the same numbers regardless of evaluation order, and
re-running a simulation is bit-reproducible.

The mixing function is the splitmix64 finalizer applied per key,
vectorized over numpy uint64 arrays.
"""

import numpy as np

# stream tags
TURN = 1
INIT_LOC = 2
MOVE = 3
INIT_INFECT = 4
CONTACT = 5
RECOVERY = 6

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)


def _mix(z):
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


def hash_u64(*keys):
    """Deterministic 64-bit hash of integer keys (scalars or arrays)."""
    with np.errstate(over="ignore"):
        h = np.uint64(0)
        for k in keys:
            k = np.asarray(k).astype(np.uint64)
            h = _mix((h + _GAMMA) ^ k)
        return h


def uniform(*keys):
    """Uniform in the open interval (0, 1), keyed deterministically."""
    h = hash_u64(*keys)
    return ((h >> _S11).astype(np.float64) + 0.5) / 9007199254740992.0
