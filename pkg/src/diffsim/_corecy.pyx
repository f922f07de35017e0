# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled tape core.

Same interface as ``diffsim._corepy.TapeCore``; node storage lives in raw C
buffers and both the recording loops and the reverse sweep run at C speed.
"""

from libc.stdlib cimport malloc, realloc, free
from libc.math cimport sin, cos, exp, log, sqrt, tanh, pow

import numpy as np
cimport numpy as cnp

from . import _kinds as K

cnp.import_array()

cdef int INPUT = K.INPUT
cdef int CONST = K.CONST
cdef int ADD = K.ADD
cdef int SUB = K.SUB
cdef int MUL = K.MUL
cdef int DIV = K.DIV
cdef int NEG = K.NEG
cdef int SIN = K.SIN
cdef int COS = K.COS
cdef int EXP = K.EXP
cdef int LOG = K.LOG
cdef int SQRT = K.SQRT
cdef int TANH = K.TANH
cdef int POWC = K.POWC
cdef int ADDC = K.ADDC
cdef int MULC = K.MULC
cdef int RSUBC = K.RSUBC
cdef int RDIVC = K.RDIVC
cdef int LOGISTIC = K.LOGISTIC

_DomainError = K.TapeDomainError


cdef class TapeCore:
    cdef double* _val
    cdef signed char* _kind
    cdef long long* _pa
    cdef long long* _pb
    cdef double* _da
    cdef double* _db
    cdef Py_ssize_t _n
    cdef Py_ssize_t _cap

    backend = "compiled"

    def __cinit__(self, capacity=1024):
        cdef Py_ssize_t cap = max(int(capacity), 16)
        self._cap = cap
        self._n = 0
        self._val = <double*>malloc(cap * sizeof(double))
        self._kind = <signed char*>malloc(cap * sizeof(signed char))
        self._pa = <long long*>malloc(cap * sizeof(long long))
        self._pb = <long long*>malloc(cap * sizeof(long long))
        self._da = <double*>malloc(cap * sizeof(double))
        self._db = <double*>malloc(cap * sizeof(double))
        if (self._val == NULL or self._kind == NULL or self._pa == NULL
                or self._pb == NULL or self._da == NULL or self._db == NULL):
            raise MemoryError()

    def __dealloc__(self):
        free(self._val)
        free(self._kind)
        free(self._pa)
        free(self._pb)
        free(self._da)
        free(self._db)

    @property
    def n_nodes(self):
        return self._n

    @property
    def nbytes(self):
        return self._n * (8 + 1 + 8 + 8 + 8 + 8)

    def reset(self):
        """Clear all nodes but keep allocated capacity."""
        self._n = 0

    cdef int _ensure(self, Py_ssize_t extra) except -1:
        cdef Py_ssize_t need = self._n + extra
        cdef Py_ssize_t cap = self._cap
        if need <= cap:
            return 0
        while cap < need:
            cap = cap + cap // 2 + 16
        self._val = <double*>realloc(self._val, cap * sizeof(double))
        self._kind = <signed char*>realloc(self._kind, cap * sizeof(signed char))
        self._pa = <long long*>realloc(self._pa, cap * sizeof(long long))
        self._pb = <long long*>realloc(self._pb, cap * sizeof(long long))
        self._da = <double*>realloc(self._da, cap * sizeof(double))
        self._db = <double*>realloc(self._db, cap * sizeof(double))
        if (self._val == NULL or self._kind == NULL or self._pa == NULL
                or self._pb == NULL or self._da == NULL or self._db == NULL):
            raise MemoryError()
        self._cap = cap
        return 0

    cdef long long _push(self, int kind, double v, long long pa, long long pb,
                         double da, double db):
        cdef Py_ssize_t i = self._n
        self._val[i] = v
        self._kind[i] = <signed char>kind
        self._pa[i] = pa
        self._pb[i] = pb
        self._da[i] = da
        self._db[i] = db
        self._n = i + 1
        return i

    cdef cnp.ndarray _handles(self, Py_ssize_t start, Py_ssize_t m):
        return np.arange(start, start + m, dtype=np.int64)

    # -- recording --------------------------------------------------------

    def input(self, vals):
        cdef double[::1] v = np.ascontiguousarray(vals, dtype=np.float64)
        cdef Py_ssize_t m = v.shape[0], i
        self._ensure(m)
        cdef Py_ssize_t start = self._n
        for i in range(m):
            self._push(INPUT, v[i], -1, -1, 0.0, 0.0)
        return self._handles(start, m)

    def const(self, vals):
        cdef double[::1] v = np.ascontiguousarray(vals, dtype=np.float64)
        cdef Py_ssize_t m = v.shape[0], i
        self._ensure(m)
        cdef Py_ssize_t start = self._n
        for i in range(m):
            self._push(CONST, v[i], -1, -1, 0.0, 0.0)
        return self._handles(start, m)

    def binop(self, int kind, a, b):
        cdef long long[::1] ha = np.ascontiguousarray(a, dtype=np.int64)
        cdef long long[::1] hb = np.ascontiguousarray(b, dtype=np.int64)
        cdef Py_ssize_t m = ha.shape[0], i
        if hb.shape[0] != m:
            raise ValueError("binop operand length mismatch")
        self._ensure(m)
        cdef Py_ssize_t start = self._n
        cdef double x, y, v
        for i in range(m):
            x = self._val[ha[i]]
            y = self._val[hb[i]]
            if kind == ADD:
                self._push(ADD, x + y, ha[i], hb[i], 1.0, 1.0)
            elif kind == SUB:
                self._push(SUB, x - y, ha[i], hb[i], 1.0, -1.0)
            elif kind == MUL:
                self._push(MUL, x * y, ha[i], hb[i], y, x)
            elif kind == DIV:
                if y == 0.0:
                    raise _DomainError(DIV, 0.0)
                v = x / y
                self._push(DIV, v, ha[i], hb[i], 1.0 / y, -v / y)
            else:
                raise ValueError(f"unknown binary kind {kind}")
        return self._handles(start, m)

    def unop(self, int kind, a):
        cdef long long[::1] ha = np.ascontiguousarray(a, dtype=np.int64)
        cdef Py_ssize_t m = ha.shape[0], i
        self._ensure(m)
        cdef Py_ssize_t start = self._n
        cdef double x, v
        for i in range(m):
            x = self._val[ha[i]]
            if kind == NEG:
                self._push(NEG, -x, ha[i], -1, -1.0, 0.0)
            elif kind == SIN:
                self._push(SIN, sin(x), ha[i], -1, cos(x), 0.0)
            elif kind == COS:
                self._push(COS, cos(x), ha[i], -1, -sin(x), 0.0)
            elif kind == EXP:
                v = exp(x)
                self._push(EXP, v, ha[i], -1, v, 0.0)
            elif kind == LOG:
                if x <= 0.0:
                    raise _DomainError(LOG, x)
                self._push(LOG, log(x), ha[i], -1, 1.0 / x, 0.0)
            elif kind == SQRT:
                if x <= 0.0:
                    raise _DomainError(SQRT, x)
                v = sqrt(x)
                self._push(SQRT, v, ha[i], -1, 0.5 / v, 0.0)
            elif kind == TANH:
                v = tanh(x)
                self._push(TANH, v, ha[i], -1, 1.0 - v * v, 0.0)
            else:
                raise ValueError(f"unknown unary kind {kind}")
        return self._handles(start, m)

    def unop_const(self, int kind, a, double c):
        cdef long long[::1] ha = np.ascontiguousarray(a, dtype=np.int64)
        cdef Py_ssize_t m = ha.shape[0], i
        self._ensure(m)
        cdef Py_ssize_t start = self._n
        cdef double x, v
        for i in range(m):
            x = self._val[ha[i]]
            if kind == ADDC:
                self._push(ADDC, x + c, ha[i], -1, 1.0, 0.0)
            elif kind == MULC:
                self._push(MULC, x * c, ha[i], -1, c, 0.0)
            elif kind == RSUBC:
                self._push(RSUBC, c - x, ha[i], -1, -1.0, 0.0)
            elif kind == RDIVC:
                if x == 0.0:
                    raise _DomainError(RDIVC, 0.0)
                v = c / x
                self._push(RDIVC, v, ha[i], -1, -v / x, 0.0)
            elif kind == POWC:
                self._push(POWC, pow(x, c), ha[i], -1, c * pow(x, c - 1.0), 0.0)
            else:
                raise ValueError(f"unknown unary-const kind {kind}")
        return self._handles(start, m)

    def unop_carr(self, int kind, a, c):
        cdef long long[::1] ha = np.ascontiguousarray(a, dtype=np.int64)
        cdef double[::1] cc = np.ascontiguousarray(c, dtype=np.float64)
        cdef Py_ssize_t m = ha.shape[0], i
        if cc.shape[0] != m:
            raise ValueError("unop_carr constant length mismatch")
        self._ensure(m)
        cdef Py_ssize_t start = self._n
        cdef double x, v, ci
        for i in range(m):
            x = self._val[ha[i]]
            ci = cc[i]
            if kind == ADDC:
                self._push(ADDC, x + ci, ha[i], -1, 1.0, 0.0)
            elif kind == MULC:
                self._push(MULC, x * ci, ha[i], -1, ci, 0.0)
            elif kind == RSUBC:
                self._push(RSUBC, ci - x, ha[i], -1, -1.0, 0.0)
            elif kind == RDIVC:
                if x == 0.0:
                    raise _DomainError(RDIVC, 0.0)
                v = ci / x
                self._push(RDIVC, v, ha[i], -1, -v / x, 0.0)
            elif kind == POWC:
                self._push(POWC, pow(x, ci), ha[i], -1,
                           ci * pow(x, ci - 1.0), 0.0)
            else:
                raise ValueError(f"unknown unary-const kind {kind}")
        return self._handles(start, m)

    def logistic(self, a, double x0, double k):
        cdef long long[::1] ha = np.ascontiguousarray(a, dtype=np.int64)
        cdef Py_ssize_t m = ha.shape[0], i
        self._ensure(m)
        cdef Py_ssize_t start = self._n
        cdef double z, e, v
        for i in range(m):
            z = k * (self._val[ha[i]] - x0)
            if z >= 0.0:
                v = 1.0 / (1.0 + exp(-z))
            else:
                e = exp(z)
                v = e / (1.0 + e)
            self._push(LOGISTIC, v, ha[i], -1, k * v * (1.0 - v), 0.0)
        return self._handles(start, m)

    def sum_reduce(self, a):
        """Sum of all handles, recorded as a chain of adds."""
        cdef long long[::1] ha = np.ascontiguousarray(a, dtype=np.int64)
        cdef Py_ssize_t m = ha.shape[0], i
        if m == 0:
            raise ValueError("sum_reduce of empty sequence")
        self._ensure(m - 1)
        cdef long long r = ha[0]
        for i in range(1, m):
            r = self._push(ADD, self._val[r] + self._val[ha[i]],
                           r, ha[i], 1.0, 1.0)
        return int(r)

    def segment_sum(self, a, seg, n_seg):
        """Per-segment sums; empty segments yield constant-zero nodes."""
        cdef long long[::1] ha = np.ascontiguousarray(a, dtype=np.int64)
        cdef long long[::1] hs = np.ascontiguousarray(seg, dtype=np.int64)
        cdef Py_ssize_t m = ha.shape[0], i
        cdef Py_ssize_t ns = int(n_seg)
        if hs.shape[0] != m:
            raise ValueError("segment_sum length mismatch")
        self._ensure(m + ns)
        out = np.full(ns, -1, dtype=np.int64)
        cdef long long[::1] run = out
        cdef long long s, e
        for i in range(m):
            s = hs[i]
            e = ha[i]
            if run[s] < 0:
                run[s] = e
            else:
                run[s] = self._push(ADD, self._val[run[s]] + self._val[e],
                                    run[s], e, 1.0, 1.0)
        for i in range(ns):
            if run[i] < 0:
                run[i] = self._push(CONST, 0.0, -1, -1, 0.0, 0.0)
        return out

    # -- replay -----------------------------------------------------------

    def value(self, h):
        return self._val[<Py_ssize_t>h]

    def values(self, a):
        cdef long long[::1] ha = np.ascontiguousarray(a, dtype=np.int64)
        cdef Py_ssize_t m = ha.shape[0], i
        out = np.empty(m, dtype=np.float64)
        cdef double[::1] ov = out
        for i in range(m):
            ov[i] = self._val[ha[i]]
        return out

    def backward(self, out):
        """Reverse sweep from node ``out``; returns adjoints for all nodes."""
        cdef Py_ssize_t o = int(out)
        cdef Py_ssize_t n = self._n
        adj_arr = np.zeros(n, dtype=np.float64)
        cdef double[::1] adj = adj_arr
        adj[o] = 1.0
        cdef Py_ssize_t i
        cdef double a
        for i in range(o, -1, -1):
            a = adj[i]
            if a == 0.0:
                continue
            if self._pa[i] >= 0:
                adj[self._pa[i]] += a * self._da[i]
            if self._pb[i] >= 0:
                adj[self._pb[i]] += a * self._db[i]
        return adj_arr
