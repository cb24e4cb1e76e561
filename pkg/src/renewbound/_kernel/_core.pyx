# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernel backend.

Bit-identical mirror of _pure.py: same draw order, same floating-point
operations, same libm calls.  Any semantic change here must be applied to
_pure.py as well; the parity test suite compares the two word for word.
"""

import numpy as np

from libc.math cimport ceil, exp, fabs, log, sqrt
from libc.stdint cimport int8_t, int32_t, int64_t, uint64_t
from scipy.special.cython_special cimport ndtri

from .errors import CapExceededError, DensityFloorError

name = "compiled"

cdef enum:
    KIND_EXPONENTIAL = 0
    KIND_UNIFORM = 1
    KIND_FOLDED_GAUSSIAN = 2
    KIND_TABLE = 3

cdef enum:
    ERR_NONE = 0
    ERR_DENSITY_FLOOR = 1
    ERR_STEP_CAP = 2
    ERR_ITER_CAP = 3
    ERR_REJECT_CAP = 4
    ERR_TRACE_CAP = 5

cdef uint64_t GOLDEN = 0x9E3779B97F4A7C15ULL
cdef uint64_t MUL1 = 0xBF58476D1CE4E5B9ULL
cdef uint64_t MUL2 = 0x94D049BB133111EBULL
cdef double INV53 = 2.0 ** -53

cdef int64_t REJECT_CAP = 10000000


cdef inline uint64_t _mix64(uint64_t z) nogil:
    z = (z ^ (z >> 30)) * MUL1
    z = (z ^ (z >> 27)) * MUL2
    return z ^ (z >> 31)


cdef inline uint64_t _stream_key(uint64_t seed, uint64_t stream_id) nogil:
    return _mix64(seed * MUL1 + stream_id * MUL2 + GOLDEN)


cdef inline double _unif(uint64_t key, uint64_t* ctr) nogil:
    ctr[0] += 1
    cdef uint64_t u64 = _mix64(key + ctr[0] * GOLDEN)
    return (<double>(u64 >> 11) + 0.5) * INV53


cdef struct MDesc:
    int ncomp
    int32_t* kinds
    double* shifts
    double* p0
    double* p1
    double* weights
    double* wcum
    int32_t* tab_off
    int32_t* tab_len
    double* tab_t
    double* tab_f
    double* tab_c


cdef class CModel:
    """Owns the descriptor arrays and exposes them as a C struct."""
    cdef MDesc d
    cdef object _arrays

    def __cinit__(self, kinds, shifts, p0, p1, weights, wcum,
                  tab_off, tab_len, tab_t, tab_f, tab_c):
        self._arrays = (kinds, shifts, p0, p1, weights, wcum,
                        tab_off, tab_len, tab_t, tab_f, tab_c)
        cdef int32_t[::1] kv = kinds
        cdef double[::1] sv = shifts
        cdef double[::1] p0v = p0
        cdef double[::1] p1v = p1
        cdef double[::1] wv = weights
        cdef double[::1] wcv = wcum
        cdef int32_t[::1] tov = tab_off
        cdef int32_t[::1] tlv = tab_len
        self.d.ncomp = kv.shape[0]
        self.d.kinds = &kv[0]
        self.d.shifts = &sv[0]
        self.d.p0 = &p0v[0]
        self.d.p1 = &p1v[0]
        self.d.weights = &wv[0]
        self.d.wcum = &wcv[0]
        self.d.tab_off = &tov[0]
        self.d.tab_len = &tlv[0]
        cdef double[::1] ttv
        cdef double[::1] tfv
        cdef double[::1] tcv
        if tab_t.shape[0] > 0:
            ttv = tab_t
            tfv = tab_f
            tcv = tab_c
            self.d.tab_t = &ttv[0]
            self.d.tab_f = &tfv[0]
            self.d.tab_c = &tcv[0]
        else:
            self.d.tab_t = NULL
            self.d.tab_f = NULL
            self.d.tab_c = NULL


def make_model(desc):
    return CModel(
        np.ascontiguousarray(desc.kinds, dtype=np.int32),
        np.ascontiguousarray(desc.shifts, dtype=np.float64),
        np.ascontiguousarray(desc.p0, dtype=np.float64),
        np.ascontiguousarray(desc.p1, dtype=np.float64),
        np.ascontiguousarray(desc.weights, dtype=np.float64),
        np.ascontiguousarray(desc.wcum, dtype=np.float64),
        np.ascontiguousarray(desc.tab_off, dtype=np.int32),
        np.ascontiguousarray(desc.tab_len, dtype=np.int32),
        np.ascontiguousarray(desc.tab_t, dtype=np.float64),
        np.ascontiguousarray(desc.tab_f, dtype=np.float64),
        np.ascontiguousarray(desc.tab_c, dtype=np.float64),
    )


cdef inline double _comp_density(MDesc* h, int j, double t) nogil:
    cdef int kind = h.kinds[j]
    cdef double a, b, rate, dt, w
    cdef int off, m, lo, hi, mid
    if kind == KIND_EXPONENTIAL:
        if t < 0.0:
            return 0.0
        rate = h.p0[j]
        return rate * exp(-rate * t)
    if kind == KIND_UNIFORM:
        a = h.p0[j]
        b = h.p1[j]
        if a <= t <= b:
            return 1.0 / (b - a)
        return 0.0
    if kind == KIND_FOLDED_GAUSSIAN:
        if t < 0.0:
            return 0.0
        return 0.7978845608028654 * exp(-0.5 * t * t)
    off = h.tab_off[j]
    m = h.tab_len[j]
    if t < h.tab_t[off] or t > h.tab_t[off + m - 1]:
        return 0.0
    lo = off
    hi = off + m - 1
    while lo + 1 < hi:
        mid = (lo + hi) >> 1
        if h.tab_t[mid] <= t:
            lo = mid
        else:
            hi = mid
    dt = h.tab_t[lo + 1] - h.tab_t[lo]
    w = (t - h.tab_t[lo]) / dt
    return h.tab_f[lo] * (1.0 - w) + h.tab_f[lo + 1] * w


cdef inline double _density(MDesc* h, double t) nogil:
    cdef double total = 0.0
    cdef int j
    for j in range(h.ncomp):
        total += h.weights[j] * _comp_density(h, j, t - h.shifts[j])
    return total


cdef inline double _comp_invert(MDesc* h, int j, double u) nogil:
    cdef int kind = h.kinds[j]
    cdef int off, m, lo, hi, mid, i
    cdef double dt, f0, slope, rem, disc, y
    if kind == KIND_EXPONENTIAL:
        return -log(u) / h.p0[j]
    if kind == KIND_UNIFORM:
        return h.p0[j] + (h.p1[j] - h.p0[j]) * u
    if kind == KIND_FOLDED_GAUSSIAN:
        return ndtri(0.5 + 0.5 * u)
    off = h.tab_off[j]
    m = h.tab_len[j]
    lo = 0
    hi = m - 2
    while lo < hi:
        mid = (lo + hi + 1) >> 1
        if h.tab_c[off + mid] <= u:
            lo = mid
        else:
            hi = mid - 1
    i = off + lo
    dt = h.tab_t[i + 1] - h.tab_t[i]
    f0 = h.tab_f[i]
    slope = (h.tab_f[i + 1] - f0) / dt
    rem = u - h.tab_c[i]
    if slope == 0.0:
        y = dt if f0 == 0.0 else rem / f0
    else:
        disc = f0 * f0 + 2.0 * slope * rem
        if disc < 0.0:
            disc = 0.0
        y = (sqrt(disc) - f0) / slope
    if y < 0.0:
        y = 0.0
    elif y > dt:
        y = dt
    return h.tab_t[i] + y


cdef inline double _sample(MDesc* h, uint64_t key, uint64_t* ctr) nogil:
    cdef int j = 0
    cdef double u
    if h.ncomp > 1:
        u = _unif(key, ctr)
        while j < h.ncomp - 1 and u >= h.wcum[j]:
            j += 1
    u = _unif(key, ctr)
    return _comp_invert(h, j, u) + h.shifts[j]


cdef inline double _residual(MDesc* h, double c, double L, double eta, double s,
                             uint64_t key, uint64_t* ctr, int* err) nogil:
    cdef double floor_v = eta / L
    cdef double hi = c + L
    cdef double x, t, f, u
    cdef int64_t rounds = 0
    while rounds < REJECT_CAP:
        x = _sample(h, key, ctr)
        t = x + s
        if t < c or t > hi:
            return t
        f = _density(h, t - s)
        if f <= 0.0:
            err[0] = ERR_DENSITY_FLOOR
            return 0.0
        u = _unif(key, ctr)
        if u * f >= floor_v:
            return t
        rounds += 1
    err[0] = ERR_REJECT_CAP
    return 0.0


cdef inline int _step1(MDesc* h, double x, double R, int64_t step_cap,
                       uint64_t key, uint64_t* ctr,
                       double* t_out, double* tbar_out, double* d_out,
                       int64_t* steps_out) nogil:
    cdef double y = x
    cdef double s = 0.0
    cdef double xv, t
    cdef int64_t steps = 0
    while fabs(y) > R:
        if steps >= step_cap:
            return ERR_STEP_CAP
        xv = _sample(h, key, ctr)
        if y >= 0.0:
            s += xv
            y -= xv
        else:
            y += xv
        steps += 1
    t = s + (y if y < 0.0 else 0.0)
    if steps == 0:
        t = 0.0
    t_out[0] = t
    tbar_out[0] = s + fabs(y)
    d_out[0] = fabs(y)
    steps_out[0] = steps
    return ERR_NONE


cdef inline int _step2(MDesc* h, double c, double L, double eta, double z,
                       uint64_t key, uint64_t* ctr,
                       int* succ_out, double* hi_out, double* lo_out,
                       int64_t* trials_out, int64_t* k_out) nogil:
    cdef int64_t k, i
    cdef double sum_p = 0.0
    cdef double sum_pp = 0.0
    cdef double shift, u, xp, xhat, upper
    cdef int err = ERR_NONE
    if z <= 0.0:
        succ_out[0] = 1
        hi_out[0] = 0.0
        lo_out[0] = 0.0
        trials_out[0] = 0
        k_out[0] = 0
        return ERR_NONE
    k = <int64_t>ceil(z / L)
    for i in range(1, k + 1):
        shift = L if i < k else z - (k - 1) * L
        u = _unif(key, ctr)
        if u < eta:
            u = _unif(key, ctr)
            xp = c + L * u
            sum_p += xp
            sum_pp += xp - shift
        else:
            xp = _residual(h, c, L, eta, 0.0, key, ctr, &err)
            if err != ERR_NONE:
                return err
            xhat = _residual(h, c, L, eta, shift, key, ctr, &err)
            if err != ERR_NONE:
                return err
            sum_p += xp
            sum_pp += xhat - shift
            upper = z + sum_pp
            succ_out[0] = 0
            if upper >= sum_p:
                hi_out[0] = upper
                lo_out[0] = sum_p
            else:
                hi_out[0] = sum_p
                lo_out[0] = upper
            trials_out[0] = i
            k_out[0] = k
            return ERR_NONE
    succ_out[0] = 1
    hi_out[0] = sum_p
    lo_out[0] = sum_p
    trials_out[0] = k
    k_out[0] = k
    return ERR_NONE


cdef inline int _couple(MDesc* h, double c, double L, double eta, double R,
                        double x, double t, double hwin, int want_counts,
                        int64_t step_cap, int64_t iter_cap,
                        uint64_t key, uint64_t* ctr,
                        double* tstar_out, int64_t* iters_out,
                        int64_t* c0_out, int64_t* cx_out,
                        double* trace, int64_t trace_rows) nogil:
    cdef double e0 = 0.0
    cdef double ex = x
    cdef int64_t cnt0 = 0
    cdef int64_t cntx = 0
    cdef double thi = t + hwin
    cdef int64_t iters = 0
    cdef int64_t steps = 0
    cdef double xv, z, b, a, common, shift, u, xp, xhat
    cdef double walk_s, walk_y, walk_t, sum_p, sum_pp, upper, hi, lo
    cdef int64_t walk_nst, trials
    cdef double* row
    cdef int zero_behind, success
    cdef int64_t k, i
    cdef int err = ERR_NONE
    if want_counts and t < ex <= thi:
        cntx += 1
    while True:
        iters += 1
        if iters > iter_cap:
            return ERR_ITER_CAP
        if trace != NULL and iters - 1 >= trace_rows:
            return ERR_TRACE_CAP
        walk_s = 0.0
        walk_y = fabs(ex - e0)
        walk_nst = 0
        while fabs(ex - e0) > R:
            if steps >= step_cap:
                return ERR_STEP_CAP
            xv = _sample(h, key, ctr)
            if ex - e0 >= 0.0:
                e0 += xv
                if want_counts and t < e0 <= thi:
                    cnt0 += 1
            else:
                ex += xv
                if want_counts and t < ex <= thi:
                    cntx += 1
            if walk_y >= 0.0:
                walk_s += xv
                walk_y -= xv
            else:
                walk_y += xv
            steps += 1
            walk_nst += 1
        z = fabs(ex - e0)
        zero_behind = e0 <= ex
        if trace != NULL:
            walk_t = walk_s + (walk_y if walk_y < 0.0 else 0.0)
            if walk_nst == 0:
                walk_t = 0.0
            row = trace + 9 * (iters - 1)
            row[0] = walk_t
            row[1] = walk_s + fabs(walk_y)
            row[2] = fabs(walk_y)
            row[3] = <double>walk_nst
        if z <= 0.0:
            if trace != NULL:
                row = trace + 9 * (iters - 1)
                row[4] = 1.0
                row[5] = 0.0
                row[6] = 0.0
                row[7] = 0.0
                row[8] = 0.0
            common = e0
            break
        k = <int64_t>ceil(z / L)
        b = e0 if zero_behind else ex
        a = ex if zero_behind else e0
        sum_p = 0.0
        sum_pp = 0.0
        trials = 0
        success = 1
        for i in range(1, k + 1):
            shift = L if i < k else z - (k - 1) * L
            trials = i
            u = _unif(key, ctr)
            if u < eta:
                u = _unif(key, ctr)
                xp = c + L * u
                b += xp
                if i < k:
                    a += xp - shift
                else:
                    a = b
                sum_p += xp
                sum_pp += xp - shift
            else:
                xp = _residual(h, c, L, eta, 0.0, key, ctr, &err)
                if err != ERR_NONE:
                    return err
                xhat = _residual(h, c, L, eta, shift, key, ctr, &err)
                if err != ERR_NONE:
                    return err
                b += xp
                a += xhat - shift
                sum_p += xp
                sum_pp += xhat - shift
                success = 0
            if want_counts:
                if zero_behind:
                    if t < b <= thi:
                        cnt0 += 1
                    if t < a <= thi:
                        cntx += 1
                else:
                    if t < b <= thi:
                        cntx += 1
                    if t < a <= thi:
                        cnt0 += 1
            if not success:
                break
        if trace != NULL:
            if success:
                hi = sum_p
                lo = sum_p
            else:
                upper = z + sum_pp
                if upper >= sum_p:
                    hi = upper
                    lo = sum_p
                else:
                    hi = sum_p
                    lo = upper
            row = trace + 9 * (iters - 1)
            row[4] = 1.0 if success else 0.0
            row[5] = hi
            row[6] = lo
            row[7] = <double>trials
            row[8] = <double>k
        if zero_behind:
            e0 = b
            ex = a
        else:
            ex = b
            e0 = a
        if success:
            common = b
            break
    tstar_out[0] = common
    iters_out[0] = iters
    if want_counts:
        xv = common
        while xv <= thi:
            if steps >= step_cap:
                return ERR_STEP_CAP
            xv += _sample(h, key, ctr)
            steps += 1
            if t < xv <= thi:
                cnt0 += 1
                cntx += 1
    c0_out[0] = cnt0
    cx_out[0] = cntx
    return ERR_NONE


cdef _raise(int err):
    if err == ERR_DENSITY_FLOOR:
        raise DensityFloorError(
            "density vanishes inside the component window; "
            "the uniform component is not valid for this model"
        )
    if err == ERR_STEP_CAP:
        raise CapExceededError("walk step cap exceeded")
    if err == ERR_ITER_CAP:
        raise CapExceededError("coupling cycle cap exceeded")
    if err == ERR_REJECT_CAP:
        raise CapExceededError("residual rejection loop exceeded its cap")
    if err == ERR_TRACE_CAP:
        raise CapExceededError("trace buffer exhausted")


# ---------------------------------------------------------------------------
# scalar entry points (same signatures as the pure backend)

def density(CModel h, double t):
    return _density(&h.d, t)


def sample(CModel h, key, ctr):
    cdef uint64_t k = key
    cdef uint64_t n = ctr
    cdef double x = _sample(&h.d, k, &n)
    return x, n


def sample_residual(CModel h, double c, double L, double eta, double s, key, ctr):
    cdef uint64_t k = key
    cdef uint64_t n = ctr
    cdef int err = ERR_NONE
    cdef double x = _residual(&h.d, c, L, eta, s, k, &n, &err)
    if err != ERR_NONE:
        _raise(err)
    return x, n


def split_pair(CModel h, double c, double L, double eta, double s, key, ctr):
    cdef uint64_t k = key
    cdef uint64_t n = ctr
    cdef int err = ERR_NONE
    cdef double u = _unif(k, &n)
    cdef double xp = 0.0
    cdef double xhat = 0.0
    if u < eta:
        u = _unif(k, &n)
        xp = c + L * u
        return xp, xp - s, 1, n
    xp = _residual(&h.d, c, L, eta, 0.0, k, &n, &err)
    if err == ERR_NONE:
        xhat = _residual(&h.d, c, L, eta, s, k, &n, &err)
    if err != ERR_NONE:
        _raise(err)
    return xp, xhat - s, 0, n


def step1_walk(CModel h, double x, double R, step_cap, key, ctr):
    cdef uint64_t k = key
    cdef uint64_t n = ctr
    cdef int64_t cap = step_cap
    cdef double t = 0.0, tbar = 0.0, d = 0.0
    cdef int64_t steps = 0
    cdef int err = _step1(&h.d, x, R, cap, k, &n, &t, &tbar, &d, &steps)
    if err != ERR_NONE:
        _raise(err)
    return t, tbar, d, steps, n


def step2_attempt(CModel h, double c, double L, double eta, double z, key, ctr):
    cdef uint64_t k = key
    cdef uint64_t n = ctr
    cdef int succ = 0
    cdef double hi = 0.0, lo = 0.0
    cdef int64_t trials = 0, kk = 0
    cdef int err = _step2(&h.d, c, L, eta, z, k, &n, &succ, &hi, &lo, &trials, &kk)
    if err != ERR_NONE:
        _raise(err)
    return succ, hi, lo, trials, kk, n


def coupling_time(CModel h, double c, double L, double eta, double R, double x,
                  step_cap, iter_cap, key, ctr):
    cdef uint64_t k = key
    cdef uint64_t n = ctr
    cdef double tstar = 0.0
    cdef int64_t iters = 0, c0 = 0, cx = 0
    cdef int err = _couple(&h.d, c, L, eta, R, x, 0.0, 0.0, 0,
                           step_cap, iter_cap, k, &n, &tstar, &iters, &c0, &cx,
                           NULL, 0)
    if err != ERR_NONE:
        _raise(err)
    return tstar, iters, n


def coupling_trace(CModel h, double c, double L, double eta, double R, double x,
                   step_cap, iter_cap, key, ctr, double[:, ::1] out_trace):
    """Coupling run recording per-cycle walk and split outcomes.

    out_trace is a (max_cycles, 9) float64 array; row i holds cycle i's
    (walk time, walk time upper, walk gap, walk steps, success, hi, lo,
    trials, k).  Identical draws and epoch arithmetic to coupling_time, so
    the returned t_star matches it bit for bit on the same stream.
    """
    cdef uint64_t k = key
    cdef uint64_t n = ctr
    cdef double tstar = 0.0
    cdef int64_t iters = 0, c0 = 0, cx = 0
    if out_trace.shape[1] != 9:
        raise ValueError("trace buffer must have 9 columns")
    cdef int err = _couple(&h.d, c, L, eta, R, x, 0.0, 0.0, 0,
                           step_cap, iter_cap, k, &n, &tstar, &iters, &c0, &cx,
                           &out_trace[0, 0], out_trace.shape[0])
    if err != ERR_NONE:
        _raise(err)
    return tstar, iters, n


def coupled_counts(CModel h, double c, double L, double eta, double R, double x,
                   double t, double hwin, step_cap, iter_cap, key, ctr):
    cdef uint64_t k = key
    cdef uint64_t n = ctr
    cdef double tstar = 0.0
    cdef int64_t iters = 0, c0 = 0, cx = 0
    cdef int err = _couple(&h.d, c, L, eta, R, x, t, hwin, 1,
                           step_cap, iter_cap, k, &n, &tstar, &iters, &c0, &cx,
                           NULL, 0)
    if err != ERR_NONE:
        _raise(err)
    return tstar, c0, cx, n


def renewal_count(CModel h, double delay, double t, double hwin, step_cap, key, ctr):
    cdef uint64_t k = key
    cdef uint64_t n = ctr
    cdef int64_t cap = step_cap
    cdef double thi = t + hwin
    cdef double e = delay
    cdef int64_t cnt = 1 if t < e <= thi else 0
    cdef int64_t steps = 0
    while e <= thi:
        if steps >= cap:
            _raise(ERR_STEP_CAP)
        e += _sample(&h.d, k, &n)
        steps += 1
        if t < e <= thi:
            cnt += 1
    return cnt, n


def residual_life(CModel h, double delay, double t, step_cap, key, ctr):
    cdef uint64_t k = key
    cdef uint64_t n = ctr
    cdef int64_t cap = step_cap
    cdef double e = delay
    cdef int64_t steps = 0
    while e <= t:
        if steps >= cap:
            _raise(ERR_STEP_CAP)
        e += _sample(&h.d, k, &n)
        steps += 1
    return e - t, n


def walk_record(CModel h, double x, nsteps, key, ctr, out_x, out_side):
    cdef uint64_t k = key
    cdef uint64_t n = ctr
    cdef double[::1] xv = out_x
    cdef int8_t[::1] sv = out_side
    cdef double y = x
    cdef double draw
    cdef Py_ssize_t i, m = nsteps
    for i in range(m):
        draw = _sample(&h.d, k, &n)
        xv[i] = draw
        if y >= 0.0:
            sv[i] = 1
            y -= draw
        else:
            sv[i] = 0
            y += draw
    return n


def step1_prefix(CModel h, double x, double R, nmax, key, ctr, out_y, out_s):
    cdef uint64_t k = key
    cdef uint64_t n = ctr
    cdef double[::1] yv = out_y
    cdef double[::1] sv = out_s
    cdef Py_ssize_t m = nmax
    cdef double y = x
    cdef double s = 0.0
    cdef double xv
    cdef Py_ssize_t i
    cdef int64_t tau = 0 if fabs(x) <= R else m + 1
    yv[0] = y
    sv[0] = 0.0
    for i in range(1, m + 1):
        if tau <= i - 1:
            yv[i] = y
            sv[i] = s
            continue
        xv = _sample(&h.d, k, &n)
        if y >= 0.0:
            s += xv
            y -= xv
        else:
            y += xv
        yv[i] = y
        sv[i] = s
        if fabs(y) <= R and tau > m:
            tau = i
    return tau, n


# ---------------------------------------------------------------------------
# batch drivers: one stream per replica, stream_id = stream_base + index

def sample_batch(CModel h, seed, stream_id, n, out):
    cdef uint64_t key = _stream_key(seed, stream_id)
    cdef uint64_t ctr = 0
    cdef double[::1] ov = out
    cdef Py_ssize_t i, m = n
    with nogil:
        for i in range(m):
            ov[i] = _sample(&h.d, key, &ctr)


def residual_batch(CModel h, double c, double L, double eta, double s,
                   seed, stream_base, n, out):
    cdef uint64_t sd = seed
    cdef uint64_t base = stream_base
    cdef double[::1] ov = out
    cdef Py_ssize_t i, m = n
    cdef uint64_t key, ctr
    cdef int err = ERR_NONE
    with nogil:
        for i in range(m):
            key = _stream_key(sd, base + i)
            ctr = 0
            ov[i] = _residual(&h.d, c, L, eta, s, key, &ctr, &err)
            if err != ERR_NONE:
                break
    if err != ERR_NONE:
        _raise(err)


def split_batch(CModel h, double c, double L, double eta, double s,
                seed, stream_base, n, out_p, out_pp, out_xi):
    cdef uint64_t sd = seed
    cdef uint64_t base = stream_base
    cdef double[::1] pv = out_p
    cdef double[::1] ppv = out_pp
    cdef int8_t[::1] xiv = out_xi
    cdef Py_ssize_t i, m = n
    cdef uint64_t key, ctr
    cdef int err = ERR_NONE
    cdef double u, xp, xhat
    with nogil:
        for i in range(m):
            key = _stream_key(sd, base + i)
            ctr = 0
            u = _unif(key, &ctr)
            if u < eta:
                u = _unif(key, &ctr)
                xp = c + L * u
                pv[i] = xp
                ppv[i] = xp - s
                xiv[i] = 1
            else:
                xp = _residual(&h.d, c, L, eta, 0.0, key, &ctr, &err)
                if err != ERR_NONE:
                    break
                xhat = _residual(&h.d, c, L, eta, s, key, &ctr, &err)
                if err != ERR_NONE:
                    break
                pv[i] = xp
                ppv[i] = xhat - s
                xiv[i] = 0
    if err != ERR_NONE:
        _raise(err)


def step1_batch(CModel h, double x, double R, step_cap, seed, stream_base, n,
                out_t, out_tbar, out_d, out_steps):
    cdef uint64_t sd = seed
    cdef uint64_t base = stream_base
    cdef int64_t cap = step_cap
    cdef double[::1] tv = out_t
    cdef double[::1] tbv = out_tbar
    cdef double[::1] dv = out_d
    cdef int64_t[::1] stv = out_steps
    cdef Py_ssize_t i, m = n
    cdef uint64_t key, ctr
    cdef int err = ERR_NONE
    with nogil:
        for i in range(m):
            key = _stream_key(sd, base + i)
            ctr = 0
            err = _step1(&h.d, x, R, cap, key, &ctr,
                         &tv[i], &tbv[i], &dv[i], &stv[i])
            if err != ERR_NONE:
                break
    if err != ERR_NONE:
        _raise(err)


def step2_batch(CModel h, double c, double L, double eta, double z,
                seed, stream_base, n, out_succ, out_hi, out_lo, out_trials):
    cdef uint64_t sd = seed
    cdef uint64_t base = stream_base
    cdef int8_t[::1] sv = out_succ
    cdef double[::1] hv = out_hi
    cdef double[::1] lv = out_lo
    cdef int64_t[::1] trv = out_trials
    cdef Py_ssize_t i, m = n
    cdef uint64_t key, ctr
    cdef int err = ERR_NONE
    cdef int succ
    cdef int64_t trials, kk
    with nogil:
        for i in range(m):
            key = _stream_key(sd, base + i)
            ctr = 0
            err = _step2(&h.d, c, L, eta, z, key, &ctr,
                         &succ, &hv[i], &lv[i], &trials, &kk)
            if err != ERR_NONE:
                break
            sv[i] = <int8_t>succ
            trv[i] = trials
    if err != ERR_NONE:
        _raise(err)


def coupling_batch(CModel h, double c, double L, double eta, double R, double x,
                   step_cap, iter_cap, seed, stream_base, n, out_t, out_iters):
    cdef uint64_t sd = seed
    cdef uint64_t base = stream_base
    cdef int64_t scap = step_cap
    cdef int64_t icap = iter_cap
    cdef double[::1] tv = out_t
    cdef int64_t[::1] iv = out_iters
    cdef Py_ssize_t i, m = n
    cdef uint64_t key, ctr
    cdef int err = ERR_NONE
    cdef int64_t c0, cx
    with nogil:
        for i in range(m):
            key = _stream_key(sd, base + i)
            ctr = 0
            err = _couple(&h.d, c, L, eta, R, x, 0.0, 0.0, 0, scap, icap,
                          key, &ctr, &tv[i], &iv[i], &c0, &cx, NULL, 0)
            if err != ERR_NONE:
                break
    if err != ERR_NONE:
        _raise(err)


def coupled_counts_batch(CModel h, double c, double L, double eta, double R,
                         double x, double t, double hwin, step_cap, iter_cap,
                         seed, stream_base, n, out_t, out_c0, out_cx):
    cdef uint64_t sd = seed
    cdef uint64_t base = stream_base
    cdef int64_t scap = step_cap
    cdef int64_t icap = iter_cap
    cdef double[::1] tv = out_t
    cdef int64_t[::1] c0v = out_c0
    cdef int64_t[::1] cxv = out_cx
    cdef Py_ssize_t i, m = n
    cdef uint64_t key, ctr
    cdef int err = ERR_NONE
    cdef int64_t iters
    with nogil:
        for i in range(m):
            key = _stream_key(sd, base + i)
            ctr = 0
            err = _couple(&h.d, c, L, eta, R, x, t, hwin, 1, scap, icap,
                          key, &ctr, &tv[i], &iters, &c0v[i], &cxv[i], NULL, 0)
            if err != ERR_NONE:
                break
    if err != ERR_NONE:
        _raise(err)


def renewal_grid_batch(CModel h, delay_h, double delay, t_grid, double hwin,
                       step_cap, seed, stream_base, n, out_counts):
    cdef uint64_t sd = seed
    cdef uint64_t base = stream_base
    cdef int64_t cap = step_cap
    cdef double[::1] tg = np.ascontiguousarray(t_grid, dtype=np.float64)
    cdef int32_t[:, ::1] cnt = out_counts
    cdef Py_ssize_t i, j, m = n, nt = tg.shape[0]
    cdef uint64_t key, ctr
    cdef int err = ERR_NONE
    cdef double e, tmax, thi_all
    cdef int64_t steps
    cdef MDesc* dh = NULL
    if delay_h is not None:
        dh = &(<CModel>delay_h).d
    tmax = 0.0
    for j in range(nt):
        if tg[j] > tmax:
            tmax = tg[j]
    thi_all = tmax + hwin
    with nogil:
        for i in range(m):
            key = _stream_key(sd, base + i)
            ctr = 0
            if dh != NULL:
                e = _sample(dh, key, &ctr)
            else:
                e = delay
            steps = 0
            while True:
                for j in range(nt):
                    if tg[j] < e <= tg[j] + hwin:
                        cnt[i, j] += 1
                if e > thi_all:
                    break
                if steps >= cap:
                    err = ERR_STEP_CAP
                    break
                e += _sample(&h.d, key, &ctr)
                steps += 1
            if err != ERR_NONE:
                break
    if err != ERR_NONE:
        _raise(err)


def residual_life_batch(CModel h, delay_h, double delay, double t, step_cap,
                        seed, stream_base, n, out_b):
    cdef uint64_t sd = seed
    cdef uint64_t base = stream_base
    cdef int64_t cap = step_cap
    cdef double[::1] bv = out_b
    cdef Py_ssize_t i, m = n
    cdef uint64_t key, ctr
    cdef int err = ERR_NONE
    cdef double e
    cdef int64_t steps
    cdef MDesc* dh = NULL
    if delay_h is not None:
        dh = &(<CModel>delay_h).d
    with nogil:
        for i in range(m):
            key = _stream_key(sd, base + i)
            ctr = 0
            if dh != NULL:
                e = _sample(dh, key, &ctr)
            else:
                e = delay
            steps = 0
            while e <= t:
                if steps >= cap:
                    err = ERR_STEP_CAP
                    break
                e += _sample(&h.d, key, &ctr)
                steps += 1
            if err != ERR_NONE:
                break
            bv[i] = e - t
    if err != ERR_NONE:
        _raise(err)


def step1_prefix_batch(CModel h, double x, double R, nmax, seed, stream_base, n,
                       out_y, out_s, out_tau):
    cdef uint64_t sd = seed
    cdef uint64_t base = stream_base
    cdef Py_ssize_t nm = nmax
    cdef double[:, ::1] yv = out_y
    cdef double[:, ::1] sv = out_s
    cdef int64_t[::1] tauv = out_tau
    cdef Py_ssize_t i, r, m = n
    cdef uint64_t key, ctr
    cdef double y, s, xv
    cdef int64_t tau
    with nogil:
        for r in range(m):
            key = _stream_key(sd, base + r)
            ctr = 0
            y = x
            s = 0.0
            tau = 0 if fabs(x) <= R else nm + 1
            yv[r, 0] = y
            sv[r, 0] = 0.0
            for i in range(1, nm + 1):
                if tau <= i - 1:
                    yv[r, i] = y
                    sv[r, i] = s
                    continue
                xv = _sample(&h.d, key, &ctr)
                if y >= 0.0:
                    s += xv
                    y -= xv
                else:
                    y += xv
                yv[r, i] = y
                sv[r, i] = s
                if fabs(y) <= R and tau > nm:
                    tau = i
            tauv[r] = tau
