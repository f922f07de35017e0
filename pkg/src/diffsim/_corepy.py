"""Pure-Python tape core.

Fallback used when the compiled extension is unavailable.  Nodes are stored
in growable numpy arrays; every recording call appends one block of nodes,
and the backward pass walks the blocks in reverse.  Blocks never contain
intra-block parent references, so adjoint propagation within a block can be
vectorized with ``np.add.at``.
"""

import numpy as np

from . import _kinds as K


class TapeCore:
    backend = "python"

    def __init__(self, capacity=1024):
        self._cap = max(int(capacity), 16)
        self._val = np.empty(self._cap, dtype=np.float64)
        self._kind = np.empty(self._cap, dtype=np.int8)
        self._pa = np.empty(self._cap, dtype=np.int64)
        self._pb = np.empty(self._cap, dtype=np.int64)
        self._da = np.empty(self._cap, dtype=np.float64)
        self._db = np.empty(self._cap, dtype=np.float64)
        self._n = 0
        # (start, count, special); special is None or ("segsum", elems, seg_ids)
        self._blocks = []

    # -- bookkeeping ------------------------------------------------------

    @property
    def n_nodes(self):
        return self._n

    @property
    def nbytes(self):
        per_node = 8 + 1 + 8 + 8 + 8 + 8
        return self._n * per_node

    def reset(self):
        """Clear all nodes but keep allocated capacity."""
        self._n = 0
        self._blocks.clear()

    def _ensure(self, extra):
        need = self._n + extra
        if need <= self._cap:
            return
        cap = self._cap
        while cap < need:
            cap = cap + cap // 2 + 16
        for name in ("_val", "_kind", "_pa", "_pb", "_da", "_db"):
            old = getattr(self, name)
            new = np.empty(cap, dtype=old.dtype)
            new[: self._n] = old[: self._n]
            setattr(self, name, new)
        self._cap = cap

    def _append(self, kind, vals, pa, pb, da, db, special=None):
        m = len(vals)
        start = self._n
        self._ensure(m)
        end = start + m
        self._val[start:end] = vals
        self._kind[start:end] = kind
        self._pa[start:end] = pa
        self._pb[start:end] = pb
        self._da[start:end] = da
        self._db[start:end] = db
        self._n = end
        self._blocks.append((start, m, special))
        return np.arange(start, end, dtype=np.int64)

    # -- recording --------------------------------------------------------

    def input(self, vals):
        vals = np.asarray(vals, dtype=np.float64)
        return self._append(K.INPUT, vals, -1, -1, 0.0, 0.0)

    def const(self, vals):
        vals = np.asarray(vals, dtype=np.float64)
        return self._append(K.CONST, vals, -1, -1, 0.0, 0.0)

    def binop(self, kind, a, b):
        x = self._val[a]
        y = self._val[b]
        if kind == K.ADD:
            v, da, db = x + y, 1.0, 1.0
        elif kind == K.SUB:
            v, da, db = x - y, 1.0, -1.0
        elif kind == K.MUL:
            v, da, db = x * y, y, x
        elif kind == K.DIV:
            if np.any(y == 0.0):
                raise K.TapeDomainError(K.DIV, 0.0)
            v = x / y
            da = 1.0 / y
            db = -v / y
        else:
            raise ValueError(f"unknown binary kind {kind}")
        return self._append(kind, v, a, b, da, db)

    def unop(self, kind, a):
        x = self._val[a]
        if kind == K.NEG:
            v, d = -x, -1.0
        elif kind == K.SIN:
            v, d = np.sin(x), np.cos(x)
        elif kind == K.COS:
            v, d = np.cos(x), -np.sin(x)
        elif kind == K.EXP:
            v = np.exp(x)
            d = v
        elif kind == K.LOG:
            if np.any(x <= 0.0):
                raise K.TapeDomainError(K.LOG, float(np.min(x)))
            v = np.log(x)
            d = 1.0 / x
        elif kind == K.SQRT:
            if np.any(x <= 0.0):
                raise K.TapeDomainError(K.SQRT, float(np.min(x)))
            v = np.sqrt(x)
            d = 0.5 / v
        elif kind == K.TANH:
            v = np.tanh(x)
            d = 1.0 - v * v
        else:
            raise ValueError(f"unknown unary kind {kind}")
        return self._append(kind, v, a, -1, d, 0.0)

    def unop_const(self, kind, a, c):
        x = self._val[a]
        c = np.asarray(c, dtype=np.float64)
        if kind == K.ADDC:
            v, d = x + c, np.broadcast_to(np.float64(1.0), x.shape)
        elif kind == K.MULC:
            v, d = x * c, np.broadcast_to(c, x.shape)
        elif kind == K.RSUBC:
            v, d = c - x, np.broadcast_to(np.float64(-1.0), x.shape)
        elif kind == K.RDIVC:
            if np.any(x == 0.0):
                raise K.TapeDomainError(K.RDIVC, 0.0)
            v = c / x
            d = -v / x
        elif kind == K.POWC:
            v = x ** c
            d = c * x ** (c - 1.0)
        else:
            raise ValueError(f"unknown unary-const kind {kind}")
        return self._append(kind, v, a, -1, d, 0.0)

    # per-element constants take the same path as scalar constants here
    unop_carr = unop_const

    def logistic(self, a, x0, k):
        x = self._val[a]
        z = k * (x - x0)
        v = np.empty_like(z)
        pos = z >= 0.0
        v[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
        e = np.exp(z[~pos])
        v[~pos] = e / (1.0 + e)
        d = k * v * (1.0 - v)
        return self._append(K.LOGISTIC, v, a, -1, d, 0.0)

    def sum_reduce(self, a):
        """Sum of all handles, recorded as a balanced tree of adds."""
        if len(a) == 0:
            raise ValueError("sum_reduce of empty sequence")
        while len(a) > 1:
            n2 = len(a) // 2
            s = self.binop(K.ADD, a[: 2 * n2 : 2], a[1 : 2 * n2 : 2])
            if len(a) % 2:
                s = np.concatenate([s, a[-1:]])
            a = s
        return int(a[0])

    def segment_sum(self, a, seg, n_seg):
        """Per-segment sums; empty segments yield constant-zero nodes."""
        if len(a) != len(seg):
            raise ValueError("segment_sum length mismatch")
        vals = np.bincount(seg, weights=self._val[a], minlength=n_seg)
        elems = np.asarray(a, dtype=np.int64).copy()
        seg = np.asarray(seg, dtype=np.int64).copy()
        return self._append(K.ADD, vals, -1, -1, 0.0, 0.0,
                            special=("segsum", elems, seg))

    # -- replay -----------------------------------------------------------

    def value(self, h):
        return float(self._val[h])

    def values(self, a):
        return self._val[a].copy()

    def backward(self, out):
        """Reverse sweep from node ``out``; returns adjoints for all nodes."""
        n = self._n
        adj = np.zeros(n, dtype=np.float64)
        adj[out] = 1.0
        for start, count, special in reversed(self._blocks):
            if start > out:
                continue
            end = start + count
            a = adj[start:end]
            if not a.any():
                continue
            if special is not None:
                tag, elems, seg = special
                np.add.at(adj, elems, adj[start + seg])
                continue
            pa = self._pa[start:end]
            m = pa >= 0
            if m.any():
                np.add.at(adj, pa[m], (a * self._da[start:end])[m])
            pb = self._pb[start:end]
            m = pb >= 0
            if m.any():
                np.add.at(adj, pb[m], (a * self._db[start:end])[m])
        return adj
