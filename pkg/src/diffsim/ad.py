"""Tape-based reverse-mode automatic differentiation over scalar reals.

A :class:`Tape` records every primitive operation applied to :class:`Var`
(scalar) or :class:`Vec` (element-wise batch of scalars) handles.
:meth:`Tape.backward` replays the record in reverse and returns the partial
derivatives of one output with respect to every registered input in a
single pass.

Two interchangeable cores exist: a Cython extension and a pure-Python
numpy fallback.  The compiled core is picked automatically when present;
set ``DIFFSIM_BACKEND=python`` or ``=compiled`` to force one.
"""

import math
import os

import numpy as np

from . import _kinds as K

TapeDomainError = K.TapeDomainError


def _load_core(backend):
    if backend in (None, "auto"):
        backend = os.environ.get("DIFFSIM_BACKEND", "auto")
    if backend in ("auto", "compiled"):
        try:
            from ._corecy import TapeCore
            return TapeCore, "compiled"
        except ImportError:
            if backend == "compiled":
                raise
    if backend in ("auto", "python"):
        from ._corepy import TapeCore
        return TapeCore, "python"
    raise ValueError(f"unknown backend {backend!r}")


_default_core_cls, BACKEND = _load_core(None)


def available_backends():
    out = ["python"]
    try:
        from . import _corecy  # noqa: F401
        out.insert(0, "compiled")
    except ImportError:
        pass
    return out


class Tape:
    """Append-only operation record plus the set of registered inputs."""

    def __init__(self, capacity=1024, backend=None):
        if backend is None:
            self.core = _default_core_cls(capacity)
        else:
            cls, _ = _load_core(backend)
            self.core = cls(capacity)
        self._input_handles = []

    @property
    def backend(self):
        return self.core.backend

    @property
    def n_nodes(self):
        return self.core.n_nodes

    @property
    def nbytes(self):
        return self.core.nbytes

    def reset(self):
        self.core.reset()
        self._input_handles.clear()

    # -- construction -----------------------------------------------------

    def input(self, value):
        h = int(self.core.input(np.array([value], dtype=np.float64))[0])
        self._input_handles.append(np.array([h], dtype=np.int64))
        return Var(self, h)

    def input_vector(self, values):
        hs = self.core.input(np.asarray(values, dtype=np.float64))
        self._input_handles.append(hs)
        return Vec(self, hs)

    def constant(self, value):
        return Var(self, int(self.core.const(
            np.array([value], dtype=np.float64))[0]))

    def constant_vector(self, values):
        return Vec(self, self.core.const(np.asarray(values, dtype=np.float64)))

    @property
    def input_handles(self):
        if self._input_handles:
            return np.concatenate(self._input_handles)
        return np.empty(0, dtype=np.int64)

    # -- differentiation --------------------------------------------------

    def backward(self, output):
        """Reverse pass from ``output``; one entry per registered input."""
        if output.tape is not self:
            raise ValueError("output does not live on this tape")
        adj = self.core.backward(output.idx)
        handles = self.input_handles
        return Gradient(handles, adj[handles])


class Gradient:
    """Partial derivatives of one output w.r.t. every registered input."""

    def __init__(self, handles, adjoints):
        self.handles = np.asarray(handles, dtype=np.int64)
        self.adjoints = np.asarray(adjoints, dtype=np.float64)
        self._lookup = None

    def _index(self):
        if self._lookup is None:
            self._lookup = {int(h): i for i, h in enumerate(self.handles)}
        return self._lookup

    def __len__(self):
        return len(self.handles)

    def __getitem__(self, handle):
        return float(self.adjoints[self._index()[int(handle)]])

    def wrt(self, x):
        """Adjoint of a registered input Var, or array of adjoints for a Vec."""
        idx = self._index()
        if isinstance(x, Var):
            return float(self.adjoints[idx[x.idx]])
        if isinstance(x, Vec):
            return np.array([self.adjoints[idx[int(h)]] for h in x.handles])
        raise TypeError(f"cannot take gradient w.r.t. {type(x).__name__}")

    def as_dict(self):
        return {int(h): float(a) for h, a in zip(self.handles, self.adjoints)}


def _h1(idx):
    return np.array([idx], dtype=np.int64)


class Var:
    """Scalar value handle on a tape."""

    __slots__ = ("tape", "idx")

    def __init__(self, tape, idx):
        self.tape = tape
        self.idx = idx

    @property
    def value(self):
        return self.tape.core.value(self.idx)

    def __repr__(self):
        return f"Var({self.value!r})"

    def _wrap(self, handles):
        return Var(self.tape, int(handles[0]))

    def _bin(self, other, kind):
        return self._wrap(self.tape.core.binop(kind, _h1(self.idx),
                                               _h1(other.idx)))

    def _uc(self, kind, c):
        return self._wrap(self.tape.core.unop_const(kind, _h1(self.idx),
                                                    float(c)))

    def __add__(self, other):
        if isinstance(other, Var):
            return self._bin(other, K.ADD)
        if isinstance(other, Vec):
            return NotImplemented
        return self._uc(K.ADDC, other)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, Var):
            return self._bin(other, K.SUB)
        if isinstance(other, Vec):
            return NotImplemented
        return self._uc(K.ADDC, -other)

    def __rsub__(self, other):
        return self._uc(K.RSUBC, other)

    def __mul__(self, other):
        if isinstance(other, Var):
            return self._bin(other, K.MUL)
        if isinstance(other, Vec):
            return NotImplemented
        return self._uc(K.MULC, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Var):
            return self._bin(other, K.DIV)
        if isinstance(other, Vec):
            return NotImplemented
        return self._uc(K.MULC, 1.0 / other)

    def __rtruediv__(self, other):
        return self._uc(K.RDIVC, other)

    def __neg__(self):
        return self._wrap(self.tape.core.unop(K.NEG, _h1(self.idx)))

    def __pow__(self, exponent):
        if isinstance(exponent, (Var, Vec)):
            raise TypeError("pow supports constant exponents only")
        return self._uc(K.POWC, exponent)


class Vec:
    """Batch of scalar handles; operations apply element-wise."""

    __slots__ = ("tape", "handles")

    def __init__(self, tape, handles):
        self.tape = tape
        self.handles = np.asarray(handles, dtype=np.int64)

    def __len__(self):
        return len(self.handles)

    @property
    def values(self):
        return self.tape.core.values(self.handles)

    def __repr__(self):
        return f"Vec({self.values!r})"

    def __getitem__(self, i):
        if isinstance(i, (int, np.integer)):
            return Var(self.tape, int(self.handles[i]))
        return Vec(self.tape, self.handles[i])

    def gather(self, indices):
        """Reindex by a detached integer array; records no operations."""
        return Vec(self.tape, self.handles[np.asarray(indices)])

    @staticmethod
    def from_vars(items):
        if not items:
            raise ValueError("cannot build Vec from empty sequence")
        tape = items[0].tape
        return Vec(tape, np.array([v.idx for v in items], dtype=np.int64))

    def _other_handles(self, other):
        if isinstance(other, Vec):
            if len(other) != len(self):
                raise ValueError("Vec length mismatch")
            return other.handles
        # broadcast a scalar Var
        return np.full(len(self), other.idx, dtype=np.int64)

    def _bin(self, other, kind):
        return Vec(self.tape, self.tape.core.binop(
            kind, self.handles, self._other_handles(other)))

    def _uc(self, kind, c):
        if isinstance(c, np.ndarray):
            return Vec(self.tape, self.tape.core.unop_carr(
                kind, self.handles, np.asarray(c, dtype=np.float64)))
        return Vec(self.tape, self.tape.core.unop_const(
            kind, self.handles, float(c)))

    def __add__(self, other):
        if isinstance(other, (Vec, Var)):
            return self._bin(other, K.ADD)
        return self._uc(K.ADDC, other)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, (Vec, Var)):
            return self._bin(other, K.SUB)
        if isinstance(other, np.ndarray):
            return self._uc(K.ADDC, -other)
        return self._uc(K.ADDC, -float(other))

    def __rsub__(self, other):
        if isinstance(other, Var):
            return Vec(self.tape, self.tape.core.binop(
                K.SUB, self._other_handles(other), self.handles))
        return self._uc(K.RSUBC, other)

    def __mul__(self, other):
        if isinstance(other, (Vec, Var)):
            return self._bin(other, K.MUL)
        return self._uc(K.MULC, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, (Vec, Var)):
            return self._bin(other, K.DIV)
        if isinstance(other, np.ndarray):
            return self._uc(K.MULC, 1.0 / other)
        return self._uc(K.MULC, 1.0 / float(other))

    def __rtruediv__(self, other):
        if isinstance(other, Var):
            return Vec(self.tape, self.tape.core.binop(
                K.DIV, self._other_handles(other), self.handles))
        return self._uc(K.RDIVC, other)

    def __neg__(self):
        return Vec(self.tape, self.tape.core.unop(K.NEG, self.handles))

    def __pow__(self, exponent):
        if isinstance(exponent, (Var, Vec)):
            raise TypeError("pow supports constant exponents only")
        return self._uc(K.POWC, exponent)

    def sum(self):
        return Var(self.tape, self.tape.core.sum_reduce(self.handles))

    def segment_sum(self, segment_ids, n_segments):
        return Vec(self.tape, self.tape.core.segment_sum(
            self.handles, np.asarray(segment_ids, dtype=np.int64),
            int(n_segments)))


def _unary(kind, mathfn, npfn):
    def fn(x):
        if isinstance(x, Var):
            return x._wrap(x.tape.core.unop(kind, _h1(x.idx)))
        if isinstance(x, Vec):
            return Vec(x.tape, x.tape.core.unop(kind, x.handles))
        if isinstance(x, np.ndarray):
            return npfn(x)
        return mathfn(x)
    return fn


sin = _unary(K.SIN, math.sin, np.sin)
cos = _unary(K.COS, math.cos, np.cos)
exp = _unary(K.EXP, math.exp, np.exp)
log = _unary(K.LOG, math.log, np.log)
sqrt = _unary(K.SQRT, math.sqrt, np.sqrt)
tanh = _unary(K.TANH, math.tanh, np.tanh)


def detach(x):
    """Primal value(s) of ``x`` as plain floats.

    Anything computed from the returned value contributes nothing to
    gradients; this is the hook for deliberately non-differentiable model
    decisions (sorting, lane changes, turns).
    """
    if isinstance(x, Var):
        return x.value
    if isinstance(x, Vec):
        return x.values
    return x
