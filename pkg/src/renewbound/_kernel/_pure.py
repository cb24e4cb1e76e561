"""Pure-Python kernel backend.

This module is the reference semantics for the compiled backend in _core.pyx:
both interpret the same flattened model description with the same draw order
and the same floating-point operations, so their outputs are bit-identical.

Draw-order contract (any change must be mirrored in _core.pyx):

  uniform        counter += 1; u64 = mix64(key + counter*GOLDEN);
                 u = ((u64 >> 11) + 0.5) * 2**-53
  sample         one uniform to select the mixture component (skipped when the
                 model has a single component), then one uniform inverted
                 through the component's quantile map
  residual       rejection loop: propose sample()+shift, one extra uniform
                 when the proposal lands in the component window
  split pair     one uniform for the coin, then either one uniform (common
                 uniform leg) or two rejection-sampled residuals
"""

from __future__ import annotations

import math

from scipy.special import ndtri as _ndtri_u

from .descriptor import (
    KIND_EXPONENTIAL,
    KIND_FOLDED_GAUSSIAN,
    KIND_TABLE,
    KIND_UNIFORM,
    ModelDesc,
)
from .errors import CapExceededError, DensityFloorError

name = "pure"

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MUL1 = 0xBF58476D1CE4E5B9
_MUL2 = 0x94D049BB133111EB
_INV53 = 2.0 ** -53

_REJECT_CAP = 10_000_000


def _ndtri(p: float) -> float:
    return float(_ndtri_u(p))


def _mix64(z: int) -> int:
    z &= _MASK
    z = ((z ^ (z >> 30)) * _MUL1) & _MASK
    z = ((z ^ (z >> 27)) * _MUL2) & _MASK
    return z ^ (z >> 31)


def _stream_key(seed: int, stream_id: int) -> int:
    return _mix64((seed * _MUL1 + stream_id * _MUL2 + _GOLDEN) & _MASK)


class Model:
    """Descriptor unpacked into plain Python scalars and lists."""

    __slots__ = (
        "ncomp", "kinds", "shifts", "p0", "p1", "weights", "wcum",
        "tab_off", "tab_len", "tab_t", "tab_f", "tab_c",
    )

    def __init__(self, desc: ModelDesc):
        self.ncomp = desc.ncomp
        self.kinds = [int(v) for v in desc.kinds]
        self.shifts = [float(v) for v in desc.shifts]
        self.p0 = [float(v) for v in desc.p0]
        self.p1 = [float(v) for v in desc.p1]
        self.weights = [float(v) for v in desc.weights]
        self.wcum = [float(v) for v in desc.wcum]
        self.tab_off = [int(v) for v in desc.tab_off]
        self.tab_len = [int(v) for v in desc.tab_len]
        self.tab_t = [float(v) for v in desc.tab_t]
        self.tab_f = [float(v) for v in desc.tab_f]
        self.tab_c = [float(v) for v in desc.tab_c]


def make_model(desc: ModelDesc) -> Model:
    return Model(desc)


def _comp_density(h: Model, j: int, t: float) -> float:
    kind = h.kinds[j]
    if kind == KIND_EXPONENTIAL:
        if t < 0.0:
            return 0.0
        rate = h.p0[j]
        return rate * math.exp(-rate * t)
    if kind == KIND_UNIFORM:
        a, b = h.p0[j], h.p1[j]
        if a <= t <= b:
            return 1.0 / (b - a)
        return 0.0
    if kind == KIND_FOLDED_GAUSSIAN:
        if t < 0.0:
            return 0.0
        return 0.7978845608028654 * math.exp(-0.5 * t * t)
    # KIND_TABLE: linear interpolation, zero outside the knot range
    off, m = h.tab_off[j], h.tab_len[j]
    tt = h.tab_t
    if t < tt[off] or t > tt[off + m - 1]:
        return 0.0
    lo, hi = off, off + m - 1
    while lo + 1 < hi:
        mid = (lo + hi) >> 1
        if tt[mid] <= t:
            lo = mid
        else:
            hi = mid
    dt = tt[lo + 1] - tt[lo]
    w = (t - tt[lo]) / dt
    return h.tab_f[lo] * (1.0 - w) + h.tab_f[lo + 1] * w


def density(h: Model, t: float) -> float:
    total = 0.0
    for j in range(h.ncomp):
        total += h.weights[j] * _comp_density(h, j, t - h.shifts[j])
    return total


def _unif(key: int, ctr: int) -> tuple[float, int]:
    ctr += 1
    u64 = _mix64((key + ctr * _GOLDEN) & _MASK)
    return ((u64 >> 11) + 0.5) * _INV53, ctr


def _comp_invert(h: Model, j: int, u: float) -> float:
    kind = h.kinds[j]
    if kind == KIND_EXPONENTIAL:
        return -math.log(u) / h.p0[j]
    if kind == KIND_UNIFORM:
        return h.p0[j] + (h.p1[j] - h.p0[j]) * u
    if kind == KIND_FOLDED_GAUSSIAN:
        return _ndtri(0.5 + 0.5 * u)
    # KIND_TABLE: locate the segment holding mass u, then solve the
    # quadratic piece of the cumulative for the offset inside it
    off, m = h.tab_off[j], h.tab_len[j]
    cc = h.tab_c
    lo, hi = 0, m - 2
    while lo < hi:
        mid = (lo + hi + 1) >> 1
        if cc[off + mid] <= u:
            lo = mid
        else:
            hi = mid - 1
    i = off + lo
    dt = h.tab_t[i + 1] - h.tab_t[i]
    f0 = h.tab_f[i]
    slope = (h.tab_f[i + 1] - f0) / dt
    rem = u - cc[i]
    if slope == 0.0:
        y = dt if f0 == 0.0 else rem / f0
    else:
        disc = f0 * f0 + 2.0 * slope * rem
        if disc < 0.0:
            disc = 0.0
        y = (math.sqrt(disc) - f0) / slope
    if y < 0.0:
        y = 0.0
    elif y > dt:
        y = dt
    return h.tab_t[i] + y


def sample(h: Model, key: int, ctr: int) -> tuple[float, int]:
    j = 0
    if h.ncomp > 1:
        u, ctr = _unif(key, ctr)
        while j < h.ncomp - 1 and u >= h.wcum[j]:
            j += 1
    u, ctr = _unif(key, ctr)
    return _comp_invert(h, j, u) + h.shifts[j], ctr


def sample_residual(
    h: Model, c: float, L: float, eta: float, s: float, key: int, ctr: int
) -> tuple[float, int]:
    """Draw from the shifted law with the uniform component removed.

    Target density: (f(t - s) - (eta/L) 1[c, c+L](t)) / (1 - eta).
    Proposals from f(. - s); one acceptance uniform inside the window.
    """
    floor = eta / L
    hi = c + L
    for _ in range(_REJECT_CAP):
        x, ctr = sample(h, key, ctr)
        t = x + s
        if t < c or t > hi:
            return t, ctr
        f = density(h, t - s)
        if f <= 0.0:
            raise DensityFloorError(
                "density vanishes inside the component window; "
                "the uniform component is not valid for this model"
            )
        u, ctr = _unif(key, ctr)
        if u * f >= floor:
            return t, ctr
    raise CapExceededError("residual rejection loop exceeded its cap")


def split_pair(
    h: Model, c: float, L: float, eta: float, s: float, key: int, ctr: int
) -> tuple[float, float, int, int]:
    """One splitting trial for copies offset by s.

    Returns (x_first, x_second, xi, ctr): on xi == 1 both coordinates came
    from the shared uniform leg and x_first - x_second == s exactly.
    """
    u, ctr = _unif(key, ctr)
    if u < eta:
        u, ctr = _unif(key, ctr)
        xp = c + L * u
        return xp, xp - s, 1, ctr
    xp, ctr = sample_residual(h, c, L, eta, 0.0, key, ctr)
    xhat, ctr = sample_residual(h, c, L, eta, s, key, ctr)
    return xp, xhat - s, 0, ctr


def step1_walk(
    h: Model, x: float, R: float, step_cap: int, key: int, ctr: int
) -> tuple[float, float, float, int, int]:
    """Run the biased difference walk until it enters [-R, R].

    Returns (t_entry, t_entry_bar, gap, steps, ctr): t_entry is the elapsed
    time credited to the walk (lower copy's progress, with the negative
    overshoot correction), t_entry_bar its crude upper version, gap the
    residual separation |Y| handed to the splitting stage.
    """
    y = x
    s = 0.0
    steps = 0
    while abs(y) > R:
        if steps >= step_cap:
            raise CapExceededError("walk step cap exceeded")
        xv, ctr = sample(h, key, ctr)
        if y >= 0.0:
            s += xv
            y -= xv
        else:
            y += xv
        steps += 1
    t = s + (y if y < 0.0 else 0.0)
    if steps == 0:
        t = 0.0
    return t, s + abs(y), abs(y), steps, ctr


def step2_attempt(
    h: Model, c: float, L: float, eta: float, z: float, key: int, ctr: int
) -> tuple[int, float, float, int, int, int]:
    """One splitting cascade over a gap z.

    Returns (success, hi, lo, trials, k, ctr): hi/lo are the extreme epochs
    of the two copies at the end of the cascade, measured from the lower
    copy's start.  On success hi == lo exactly (the shared uniform leg makes
    the final epochs equal by construction, so the common value is assigned
    rather than recomputed).
    """
    if z <= 0.0:
        return 1, 0.0, 0.0, 0, 0, ctr
    k = int(math.ceil(z / L))
    sum_p = 0.0
    sum_pp = 0.0
    for i in range(1, k + 1):
        shift = L if i < k else z - (k - 1) * L
        u, ctr = _unif(key, ctr)
        if u < eta:
            u, ctr = _unif(key, ctr)
            xp = c + L * u
            sum_p += xp
            sum_pp += xp - shift
        else:
            xp, ctr = sample_residual(h, c, L, eta, 0.0, key, ctr)
            xhat, ctr = sample_residual(h, c, L, eta, shift, key, ctr)
            sum_p += xp
            sum_pp += xhat - shift
            upper = z + sum_pp
            if upper >= sum_p:
                return 0, upper, sum_p, i, k, ctr
            return 0, sum_p, upper, i, k, ctr
    return 1, sum_p, sum_p, k, k, ctr


def _couple(
    h: Model,
    c: float,
    L: float,
    eta: float,
    R: float,
    x: float,
    t: float,
    hwin: float,
    want_counts: int,
    step_cap: int,
    iter_cap: int,
    key: int,
    ctr: int,
    out_trace=None,
) -> tuple[float, int, int, int, int]:
    """Shared coupling driver.

    Runs the walk/split cycle until the two renewal copies (delays 0 and x)
    share an epoch; with want_counts, additionally counts each copy's epochs
    inside (t, t+hwin], continuing past coalescence.  The step-2 cascade is
    inlined (same draw order as step2_attempt) because the counting needs the
    individual epoch increments.

    With out_trace (rows of 9: walk time, walk time upper, walk gap, walk
    steps, split success, split hi, split lo, split trials, split k), row
    iters-1 records each cycle.  The recorded values are accumulated fresh
    per cycle, exactly as the scalar step1_walk / step2_attempt would
    compute them on the same draws; the copies' physical epochs, which drive
    every decision and the returned t_star, are untouched by recording.

    Returns (t_star, iters, cnt0, cntx, ctr).
    """
    e0 = 0.0
    ex = x
    cnt0 = 0
    cntx = 0
    thi = t + hwin
    if want_counts and t < ex <= thi:
        cntx += 1
    iters = 0
    steps = 0
    while True:
        iters += 1
        if iters > iter_cap:
            raise CapExceededError("coupling cycle cap exceeded")
        if out_trace is not None and iters - 1 >= len(out_trace):
            raise CapExceededError("trace buffer exhausted")
        # walk phase: the lower copy renews until the gap is at most R
        walk_s = 0.0
        walk_y = abs(ex - e0)
        walk_nst = 0
        while abs(ex - e0) > R:
            if steps >= step_cap:
                raise CapExceededError("walk step cap exceeded")
            xv, ctr = sample(h, key, ctr)
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
        z = abs(ex - e0)
        zero_behind = e0 <= ex
        if out_trace is not None:
            walk_t = walk_s + (walk_y if walk_y < 0.0 else 0.0)
            if walk_nst == 0:
                walk_t = 0.0
            row = out_trace[iters - 1]
            row[0] = walk_t
            row[1] = walk_s + abs(walk_y)
            row[2] = abs(walk_y)
            row[3] = walk_nst
        if z <= 0.0:
            if out_trace is not None:
                row = out_trace[iters - 1]
                row[4] = 1.0
                row[5] = 0.0
                row[6] = 0.0
                row[7] = 0.0
                row[8] = 0.0
            common = e0
            break
        # splitting phase, draw order identical to step2_attempt
        k = int(math.ceil(z / L))
        b = e0 if zero_behind else ex
        a = ex if zero_behind else e0
        sum_p = 0.0
        sum_pp = 0.0
        trials = 0
        success = 1
        for i in range(1, k + 1):
            shift = L if i < k else z - (k - 1) * L
            trials = i
            u, ctr = _unif(key, ctr)
            if u < eta:
                u, ctr = _unif(key, ctr)
                xp = c + L * u
                b += xp
                if i < k:
                    a += xp - shift
                else:
                    a = b
                sum_p += xp
                sum_pp += xp - shift
            else:
                xp, ctr = sample_residual(h, c, L, eta, 0.0, key, ctr)
                xhat, ctr = sample_residual(h, c, L, eta, shift, key, ctr)
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
        if out_trace is not None:
            if success:
                hi = sum_p
                lo = sum_p
            else:
                upper = z + sum_pp
                if upper >= sum_p:
                    hi, lo = upper, sum_p
                else:
                    hi, lo = sum_p, upper
            row = out_trace[iters - 1]
            row[4] = 1.0 if success else 0.0
            row[5] = hi
            row[6] = lo
            row[7] = trials
            row[8] = k
        if zero_behind:
            e0, ex = b, a
        else:
            ex, e0 = b, a
        if success:
            common = b
            break
    t_star = common
    if want_counts:
        e = common
        while e <= thi:
            if steps >= step_cap:
                raise CapExceededError("walk step cap exceeded")
            xv, ctr = sample(h, key, ctr)
            e += xv
            steps += 1
            if t < e <= thi:
                cnt0 += 1
                cntx += 1
    return t_star, iters, cnt0, cntx, ctr


def coupling_time(
    h: Model, c: float, L: float, eta: float, R: float, x: float,
    step_cap: int, iter_cap: int, key: int, ctr: int,
) -> tuple[float, int, int]:
    t_star, iters, _, _, ctr = _couple(
        h, c, L, eta, R, x, 0.0, 0.0, 0, step_cap, iter_cap, key, ctr
    )
    return t_star, iters, ctr


def coupling_trace(
    h: Model, c: float, L: float, eta: float, R: float, x: float,
    step_cap: int, iter_cap: int, key: int, ctr: int, out_trace,
) -> tuple[float, int, int]:
    """Coupling run recording per-cycle walk and split outcomes.

    out_trace is a (max_cycles, 9) float64 array; row i holds cycle i's
    (walk time, walk time upper, walk gap, walk steps, success, hi, lo,
    trials, k).  Identical draws and epoch arithmetic to coupling_time, so
    the returned t_star matches it bit for bit on the same stream.
    """
    t_star, iters, _, _, ctr = _couple(
        h, c, L, eta, R, x, 0.0, 0.0, 0, step_cap, iter_cap, key, ctr,
        out_trace=out_trace,
    )
    return t_star, iters, ctr


def coupled_counts(
    h: Model, c: float, L: float, eta: float, R: float, x: float,
    t: float, hwin: float, step_cap: int, iter_cap: int, key: int, ctr: int,
) -> tuple[float, int, int, int]:
    t_star, _, cnt0, cntx, ctr = _couple(
        h, c, L, eta, R, x, t, hwin, 1, step_cap, iter_cap, key, ctr
    )
    return t_star, cnt0, cntx, ctr


def renewal_count(
    h: Model, delay: float, t: float, hwin: float, step_cap: int,
    key: int, ctr: int,
) -> tuple[int, int]:
    """Number of renewal epochs in (t, t+hwin] for a given initial delay."""
    thi = t + hwin
    e = delay
    cnt = 1 if t < e <= thi else 0
    steps = 0
    while e <= thi:
        if steps >= step_cap:
            raise CapExceededError("walk step cap exceeded")
        xv, ctr = sample(h, key, ctr)
        e += xv
        steps += 1
        if t < e <= thi:
            cnt += 1
    return cnt, ctr


def residual_life(
    h: Model, delay: float, t: float, step_cap: int, key: int, ctr: int
) -> tuple[float, int]:
    """Forward recurrence time at t of the delayed renewal process."""
    e = delay
    steps = 0
    while e <= t:
        if steps >= step_cap:
            raise CapExceededError("walk step cap exceeded")
        xv, ctr = sample(h, key, ctr)
        e += xv
        steps += 1
    return e - t, ctr


def walk_record(h: Model, x: float, nsteps: int, key: int, ctr: int, out_x, out_side):
    """Record nsteps of the unstopped difference walk.

    out_side[i] is 1 when the draw advanced the zero-delay copy (walk value
    was nonnegative), else 0.  Used for marginal-law checks, so the walk is
    deliberately not stopped at the band.
    """
    y = x
    for i in range(nsteps):
        xv, ctr = sample(h, key, ctr)
        if y >= 0.0:
            out_x[i] = xv
            out_side[i] = 1
            y -= xv
        else:
            out_x[i] = xv
            out_side[i] = 0
            y += xv
    return ctr


def step1_prefix(h: Model, x: float, R: float, nmax: int, key: int, ctr: int, out_y, out_s):
    """Walk prefix frozen at the band-entry time, for drift diagnostics.

    out_y[i], out_s[i] hold the walk position and the accumulated lower-copy
    time after i steps, with both frozen once |Y| <= R.  Returns (tau, ctr)
    where tau is the entry step (nmax + 1 when the band is not reached).
    """
    y = x
    s = 0.0
    tau = 0 if abs(x) <= R else nmax + 1
    out_y[0] = y
    out_s[0] = 0.0
    for i in range(1, nmax + 1):
        if tau <= i - 1:
            out_y[i] = y
            out_s[i] = s
            continue
        xv, ctr = sample(h, key, ctr)
        if y >= 0.0:
            s += xv
            y -= xv
        else:
            y += xv
        out_y[i] = y
        out_s[i] = s
        if abs(y) <= R and tau > nmax:
            tau = i
    return tau, ctr


# ---------------------------------------------------------------------------
# batch drivers: one stream per replica, stream_id = stream_base + index

def sample_batch(h: Model, seed: int, stream_id: int, n: int, out):
    key = _stream_key(seed, stream_id)
    ctr = 0
    for i in range(n):
        out[i], ctr = sample(h, key, ctr)


def residual_batch(h: Model, c, L, eta, s, seed, stream_base, n, out):
    for i in range(n):
        key = _stream_key(seed, stream_base + i)
        out[i], _ = sample_residual(h, c, L, eta, s, key, 0)


def split_batch(h: Model, c, L, eta, s, seed, stream_base, n, out_p, out_pp, out_xi):
    for i in range(n):
        key = _stream_key(seed, stream_base + i)
        out_p[i], out_pp[i], out_xi[i], _ = split_pair(h, c, L, eta, s, key, 0)


def step1_batch(h: Model, x, R, step_cap, seed, stream_base, n,
                out_t, out_tbar, out_d, out_steps):
    for i in range(n):
        key = _stream_key(seed, stream_base + i)
        out_t[i], out_tbar[i], out_d[i], out_steps[i], _ = step1_walk(
            h, x, R, step_cap, key, 0
        )


def step2_batch(h: Model, c, L, eta, z, seed, stream_base, n,
                out_succ, out_hi, out_lo, out_trials):
    for i in range(n):
        key = _stream_key(seed, stream_base + i)
        out_succ[i], out_hi[i], out_lo[i], out_trials[i], _, _ = step2_attempt(
            h, c, L, eta, z, key, 0
        )


def coupling_batch(h: Model, c, L, eta, R, x, step_cap, iter_cap,
                   seed, stream_base, n, out_t, out_iters):
    for i in range(n):
        key = _stream_key(seed, stream_base + i)
        out_t[i], out_iters[i], _ = coupling_time(
            h, c, L, eta, R, x, step_cap, iter_cap, key, 0
        )


def coupled_counts_batch(h: Model, c, L, eta, R, x, t, hwin, step_cap, iter_cap,
                         seed, stream_base, n, out_t, out_c0, out_cx):
    for i in range(n):
        key = _stream_key(seed, stream_base + i)
        out_t[i], out_c0[i], out_cx[i], _ = coupled_counts(
            h, c, L, eta, R, x, t, hwin, step_cap, iter_cap, key, 0
        )


def renewal_grid_batch(h: Model, delay_h, delay, t_grid, hwin, step_cap,
                       seed, stream_base, n, out_counts):
    """Counts per replica and grid time; the delay is drawn from delay_h
    when that handle is given, else the scalar delay is used."""
    nt = len(t_grid)
    tmax = 0.0
    for j in range(nt):
        if t_grid[j] > tmax:
            tmax = t_grid[j]
    thi_all = tmax + hwin
    for i in range(n):
        key = _stream_key(seed, stream_base + i)
        ctr = 0
        if delay_h is not None:
            e, ctr = sample(delay_h, key, ctr)
        else:
            e = delay
        steps = 0
        while True:
            for j in range(nt):
                if t_grid[j] < e <= t_grid[j] + hwin:
                    out_counts[i, j] += 1
            if e > thi_all:
                break
            if steps >= step_cap:
                raise CapExceededError("walk step cap exceeded")
            xv, ctr = sample(h, key, ctr)
            e += xv
            steps += 1


def residual_life_batch(h: Model, delay_h, delay, t, step_cap,
                        seed, stream_base, n, out_b):
    for i in range(n):
        key = _stream_key(seed, stream_base + i)
        ctr = 0
        if delay_h is not None:
            e, ctr = sample(delay_h, key, ctr)
        else:
            e = delay
        steps = 0
        while e <= t:
            if steps >= step_cap:
                raise CapExceededError("walk step cap exceeded")
            xv, ctr = sample(h, key, ctr)
            e += xv
            steps += 1
        out_b[i] = e - t


def step1_prefix_batch(h: Model, x, R, nmax, seed, stream_base, n,
                       out_y, out_s, out_tau):
    for i in range(n):
        key = _stream_key(seed, stream_base + i)
        out_tau[i], _ = step1_prefix(h, x, R, nmax, key, 0, out_y[i], out_s[i])
