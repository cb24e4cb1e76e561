"""Simulation of renewal processes and the two-stage coupling.

Everything here is the empirical side of the package: the gap walk, the
splitting cascade, the assembled coupling with its coalescence time, and the
estimators used to validate every certified bound.

Determinism contract: every estimator is a pure function of its inputs and
seed.  Replica i always uses the counter stream with stream_id =
stream_base + i; threads only partition replicas into disjoint index ranges
whose outputs land in disjoint slices of preallocated arrays, and all
reductions happen serially afterwards, so results are independent of the
thread count and of scheduling.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np
from scipy.optimize import curve_fit

from . import _kernel
from ._kernel.errors import CapExceededError
from .bounds import BoundCertificate, BoundParams, assemble_certificate, drift_factor
from .dist import InterArrivalModel, InvalidInputError, UniformComponent
from .rng import SeedableRngStream

__all__ = [
    "CouplingTrace",
    "CountInequalityResult",
    "DriftCheckResult",
    "RateFit",
    "Step1Outcome",
    "Step2Outcome",
    "TailEstimate",
    "TvEstimate",
    "DEFAULT_ITER_CAP",
    "DEFAULT_STEP_CAP",
    "check_count_inequality",
    "check_supermartingale",
    "coupling_times",
    "default_time_grid",
    "estimate_renewal_measure",
    "estimate_tail",
    "estimate_tv",
    "fit_exponential_rate",
    "renewal_measure_curve",
    "residual_life_samples",
    "run_coupling",
    "simulate_renewal",
    "split_attempts",
    "step1_walk",
    "step2_attempt",
    "walk_hit_times",
]

DEFAULT_STEP_CAP = 10**9
DEFAULT_ITER_CAP = 10**6


# ---------------------------------------------------------------------------
# outcome records


@dataclass(frozen=True)
class Step1Outcome:
    """One run of the gap walk.

    time is the elapsed time credited to the walk (with the negative
    overshoot correction), time_upper the cruder monotone version used by
    the drift argument, gap the terminal separation handed to the splitting
    stage.  time == 0 whenever the start gap is already inside the band.
    """

    time: float
    time_upper: float
    gap: float
    steps: int


@dataclass(frozen=True)
class Step2Outcome:
    """One splitting cascade over a gap z.

    epoch_max and epoch_min are the extreme accumulated epochs of the two
    copies at the index where the cascade stopped, measured from the lower
    copy's start; on success they coincide exactly.  trials is the number of
    cascade slots actually consumed, k the total number needed (ceil(z/L)).
    """

    success: bool
    epoch_max: float
    epoch_min: float
    trials: int
    k: int


@dataclass(frozen=True)
class CouplingTrace:
    """Full record of one coupling run: alternating walk/split outcomes.

    t_star is the common epoch at which the two copies coalesce; it equals
    the accumulated walk times plus the cascades' epoch gains, up to float
    reassociation.  The final iteration's split outcome always has
    success == True.
    """

    x0: float
    iterations: tuple
    t_star: float

    @property
    def n_cycles(self) -> int:
        return len(self.iterations)

    def to_dict(self) -> dict:
        return {
            "x0": self.x0,
            "t_star": self.t_star,
            "iterations": [
                {
                    "walk": {
                        "time": w.time,
                        "time_upper": w.time_upper,
                        "gap": w.gap,
                        "steps": w.steps,
                    },
                    "split": {
                        "success": s.success,
                        "epoch_max": s.epoch_max,
                        "epoch_min": s.epoch_min,
                        "trials": s.trials,
                        "k": s.k,
                    },
                }
                for w, s in self.iterations
            ],
        }


@dataclass(frozen=True)
class TailEstimate:
    """Empirical survival curve of the coupling time over a fixed grid."""

    t_grid: np.ndarray
    survival: np.ndarray
    stderr: np.ndarray
    n: int
    seed: int

    def to_dict(self) -> dict:
        return {
            "t_grid": [float(v) for v in self.t_grid],
            "survival": [float(v) for v in self.survival],
            "stderr": [float(v) for v in self.stderr],
            "n": self.n,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class TvEstimate:
    """Sandwich for the total-variation distance of two residual-life laws.

    lower is the binned half-L1 distance between independent samples (a
    consistent underestimate of the true distance), upper the empirical
    coupling-tail probability; the true distance lies between them up to
    sampling error.  lower_stderr is a conservative multinomial proxy.
    """

    lower: float
    lower_stderr: float
    upper: float
    upper_stderr: float
    n: int
    bins: int

    def to_dict(self) -> dict:
        return {
            "lower": self.lower,
            "lower_stderr": self.lower_stderr,
            "upper": self.upper,
            "upper_stderr": self.upper_stderr,
            "n": self.n,
            "bins": self.bins,
        }


@dataclass(frozen=True)
class CountInequalityResult:
    """Both sides of the uncoupled-count inequality for the two copies.

    lhs_zero / lhs_x are E[1{T* > t} N(t, t+h]] for the zero-delay and the
    x-delay copy; rhs is P(T* > t) (u0 + 1) with u0 the zero-delay expected
    epoch count of a width-h interval.  holds requires both comparisons.
    """

    t: float
    h: float
    lhs_zero: float
    lhs_zero_stderr: float
    lhs_x: float
    lhs_x_stderr: float
    rhs: float
    rhs_stderr: float
    u0: float
    holds: bool

    def to_dict(self) -> dict:
        return {
            "t": self.t,
            "h": self.h,
            "lhs_zero": self.lhs_zero,
            "lhs_zero_stderr": self.lhs_zero_stderr,
            "lhs_x": self.lhs_x,
            "lhs_x_stderr": self.lhs_x_stderr,
            "rhs": self.rhs,
            "rhs_stderr": self.rhs_stderr,
            "u0": self.u0,
            "holds": self.holds,
        }


@dataclass(frozen=True)
class DriftCheckResult:
    """Empirical means of the stopped walk supermartingale at test horizons."""

    horizons: tuple
    means: tuple
    stderrs: tuple
    m0: float
    rho: float
    holds: bool

    def to_dict(self) -> dict:
        return {
            "horizons": list(self.horizons),
            "means": list(self.means),
            "stderrs": list(self.stderrs),
            "m0": self.m0,
            "rho": self.rho,
            "holds": self.holds,
        }


@dataclass(frozen=True)
class RateFit:
    """Least-squares fit of amplitude * exp(-rate * t)."""

    amplitude: float
    rate: float
    residual: float
    n_used: int


# ---------------------------------------------------------------------------
# scalar drivers


def step1_walk(
    model: InterArrivalModel,
    x: float,
    r: float,
    rng: SeedableRngStream,
    step_cap: int = DEFAULT_STEP_CAP,
) -> Step1Outcome:
    """Run the gap walk from gap x until it enters [-r, r].

    Returns immediately with time 0 when |x| <= r (the walk is not needed).
    """
    if not r > 0:
        raise InvalidInputError("walk needs a band radius r > 0")
    k = _kernel.active
    t, tbar, gap, steps, ctr = k.step1_walk(
        model.kernel_handle(), float(x), float(r), int(step_cap), rng.key, rng.counter
    )
    rng.counter = ctr
    return Step1Outcome(t, tbar, gap, steps)


def step2_attempt(
    model: InterArrivalModel,
    comp: UniformComponent,
    z: float,
    rng: SeedableRngStream,
) -> Step2Outcome:
    """One splitting cascade over a gap z >= 0; z = 0 succeeds immediately."""
    if z < 0:
        raise InvalidInputError("split attempt needs z >= 0")
    k = _kernel.active
    succ, hi, lo, trials, kk, ctr = k.step2_attempt(
        model.kernel_handle(), comp.c, comp.L, comp.eta, float(z), rng.key, rng.counter
    )
    rng.counter = ctr
    return Step2Outcome(bool(succ), hi, lo, trials, kk)


def _certificate(model, comp, params) -> BoundCertificate:
    if isinstance(params, BoundCertificate):
        return params
    return assemble_certificate(model, comp, params)


def run_coupling(
    model: InterArrivalModel,
    comp: UniformComponent,
    params: Union[BoundParams, BoundCertificate],
    x: float,
    rng: SeedableRngStream,
    step_cap: int = DEFAULT_STEP_CAP,
    iter_cap: int = DEFAULT_ITER_CAP,
) -> CouplingTrace:
    """Alternate walk and split until the two copies share an epoch.

    Runs the kernel's tracing driver, which uses the same draws and the same
    epoch arithmetic as the batch coupling, so t_star matches the kernel's
    coupling time bit for bit on the same stream.  Each cycle's walk outcome
    is accumulated fresh inside the driver, matching a standalone step1_walk
    on the same draws; the split outcome reproduces step2_attempt exactly.
    """
    cert = _certificate(model, comp, params)
    cert.require_valid()
    if x < 0:
        raise InvalidInputError("coupling needs a start gap x >= 0")
    k = _kernel.active
    h = model.kernel_handle()
    max_rec = 8192
    while True:
        buf = np.zeros((max_rec, 9))
        try:
            t_star, iters, ctr = k.coupling_trace(
                h, comp.c, comp.L, comp.eta, cert.r, float(x),
                int(step_cap), int(iter_cap), rng.key, rng.counter, buf,
            )
            break
        except CapExceededError as exc:
            # grow and rerun: draws are a pure function of (key, counter),
            # so the retry replays the identical run with more room
            if "trace" not in str(exc) or max_rec >= int(iter_cap):
                raise
            max_rec = min(2 * max_rec, int(iter_cap))
    rng.counter = ctr
    iterations = []
    for row in buf[:iters]:
        walk = Step1Outcome(
            float(row[0]), float(row[1]), float(row[2]), int(row[3])
        )
        split = Step2Outcome(
            bool(row[4]), float(row[5]), float(row[6]), int(row[7]), int(row[8])
        )
        iterations.append((walk, split))
    return CouplingTrace(x0=float(x), iterations=tuple(iterations), t_star=t_star)


# ---------------------------------------------------------------------------
# replica-parallel drivers


def _replica_ranges(n: int, threads: int):
    m = max(1, min(int(threads), int(n)))
    cuts = [i * n // m for i in range(m + 1)]
    return [(lo, hi) for lo, hi in zip(cuts[:-1], cuts[1:]) if hi > lo]


def _run_slices(work, n: int, threads: int) -> None:
    """Run work(lo, hi) over a disjoint partition of range(n).

    Each slice writes to its own output rows and owns its own RNG streams,
    so neither the partition nor the thread count can change any result.
    """
    ranges = _replica_ranges(n, threads)
    if len(ranges) == 1:
        work(*ranges[0])
        return
    with ThreadPoolExecutor(max_workers=len(ranges)) as pool:
        futures = [pool.submit(work, lo, hi) for lo, hi in ranges]
        for fut in futures:
            fut.result()


def coupling_times(
    model: InterArrivalModel,
    comp: UniformComponent,
    params: Union[BoundParams, BoundCertificate],
    x: float,
    n: int,
    seed: int,
    stream_base: int = 0,
    threads: int = 1,
    step_cap: int = DEFAULT_STEP_CAP,
    iter_cap: int = DEFAULT_ITER_CAP,
) -> np.ndarray:
    """Coalescence times over n replicas, one RNG stream per replica."""
    cert = _certificate(model, comp, params)
    cert.require_valid()
    if x < 0:
        raise InvalidInputError("coupling needs a start gap x >= 0")
    n = int(n)
    if n < 1:
        raise InvalidInputError("needs at least one replica")
    k = _kernel.active
    h = model.kernel_handle()
    times = np.empty(n)
    iters = np.empty(n, dtype=np.int64)

    def work(lo, hi):
        k.coupling_batch(
            h, comp.c, comp.L, comp.eta, cert.r, float(x),
            int(step_cap), int(iter_cap), int(seed), int(stream_base) + lo,
            hi - lo, times[lo:hi], iters[lo:hi],
        )

    _run_slices(work, n, threads)
    return times


def walk_hit_times(
    model: InterArrivalModel,
    x: float,
    r: float,
    n: int,
    seed: int,
    stream_base: int = 0,
    threads: int = 1,
    step_cap: int = DEFAULT_STEP_CAP,
):
    """Band-entry outcomes of the gap walk over n replicas.

    Returns (time, time_upper, gap, steps) arrays, one RNG stream per
    replica; time is the one-sided elapsed time actually accrued, the
    quantity whose exponential moments the hitting-time bound controls.
    """
    if not r > 0:
        raise InvalidInputError("walk needs a band radius r > 0")
    n = int(n)
    if n < 1:
        raise InvalidInputError("needs at least one replica")
    k = _kernel.active
    h = model.kernel_handle()
    t = np.empty(n)
    tbar = np.empty(n)
    gap = np.empty(n)
    steps = np.empty(n, dtype=np.int64)

    def work(lo, hi):
        k.step1_batch(
            h, float(x), float(r), int(step_cap), int(seed),
            int(stream_base) + lo, hi - lo,
            t[lo:hi], tbar[lo:hi], gap[lo:hi], steps[lo:hi],
        )

    _run_slices(work, n, threads)
    return t, tbar, gap, steps


def split_attempts(
    model: InterArrivalModel,
    comp: UniformComponent,
    z: float,
    n: int,
    seed: int,
    stream_base: int = 0,
    threads: int = 1,
):
    """Splitting-cascade outcomes over n replicas at a fixed gap z >= 0.

    Returns (success, epoch_max, epoch_min, trials) arrays, one RNG stream
    per replica; success is an int8 0/1 array.
    """
    if z < 0:
        raise InvalidInputError("split attempt needs z >= 0")
    n = int(n)
    if n < 1:
        raise InvalidInputError("needs at least one replica")
    k = _kernel.active
    h = model.kernel_handle()
    succ = np.empty(n, dtype=np.int8)
    hi_t = np.empty(n)
    lo_t = np.empty(n)
    trials = np.empty(n, dtype=np.int64)

    def work(lo, hi):
        k.step2_batch(
            h, comp.c, comp.L, comp.eta, float(z), int(seed),
            int(stream_base) + lo, hi - lo,
            succ[lo:hi], hi_t[lo:hi], lo_t[lo:hi], trials[lo:hi],
        )

    _run_slices(work, n, threads)
    return succ, hi_t, lo_t, trials


def default_time_grid(x: float, rate: float, n: int = 32) -> np.ndarray:
    """Grid of n points from x, log-spaced over the decay scale 20/rate."""
    if not (math.isfinite(rate) and rate > 0):
        raise InvalidInputError("grid needs a positive finite rate")
    if n < 2:
        raise InvalidInputError("grid needs at least two points")
    span = 20.0 / rate
    offsets = np.geomspace(span * 1e-3, span, n - 1)
    return np.concatenate(([float(x)], float(x) + offsets))


def estimate_tail(
    model: InterArrivalModel,
    comp: UniformComponent,
    params: Union[BoundParams, BoundCertificate],
    x: float,
    t_grid: Optional[Sequence] = None,
    n: int = 1000,
    seed: int = 0,
    stream_base: int = 0,
    threads: int = 1,
    step_cap: int = DEFAULT_STEP_CAP,
    iter_cap: int = DEFAULT_ITER_CAP,
) -> TailEstimate:
    """Empirical survival curve of the coupling time over a time grid.

    All grid points are evaluated on the same replicas, so the curve is
    exactly nonincreasing along an increasing grid.  The default grid is
    default_time_grid at the certificate's rate.
    """
    cert = _certificate(model, comp, params)
    n = int(n)
    if n < 100:
        raise InvalidInputError("tail estimation needs n >= 100 replicas")
    if t_grid is None:
        cert.require_valid()
        grid = default_time_grid(x, cert.rate)
    else:
        grid = np.asarray(t_grid, dtype=float)
        if grid.ndim != 1 or grid.size == 0:
            raise InvalidInputError("t_grid must be a nonempty 1-d array")
    times = coupling_times(
        model, comp, cert, x, n, seed,
        stream_base=stream_base, threads=threads,
        step_cap=step_cap, iter_cap=iter_cap,
    )
    survival = (times[None, :] > grid[:, None]).mean(axis=1)
    stderr = np.sqrt(survival * (1.0 - survival) / n)
    return TailEstimate(
        t_grid=grid, survival=survival, stderr=stderr, n=n, seed=int(seed)
    )


def simulate_renewal(
    model: InterArrivalModel,
    delay: float,
    horizon: float,
    rng: SeedableRngStream,
    step_cap: int = DEFAULT_STEP_CAP,
):
    """Epochs up to the horizon of a delayed renewal process, plus residual.

    The delay itself is the first epoch when positive; a zero delay starts
    the process fresh at the origin with no epoch at 0.  The residual life
    is the gap from the horizon to the first strictly later epoch; when the
    delay already exceeds the horizon it is delay - horizon with no epochs.
    """
    if delay < 0:
        raise InvalidInputError("delay must be nonnegative")
    if not math.isfinite(horizon):
        raise InvalidInputError("horizon must be finite")
    k = _kernel.active
    h = model.kernel_handle()
    key = rng.key
    ctr = rng.counter
    epochs = []
    e = float(delay)
    if 0.0 < e <= horizon:
        epochs.append(e)
    steps = 0
    try:
        while e <= horizon:
            if steps >= step_cap:
                raise CapExceededError("walk step cap exceeded")
            xv, ctr = k.sample(h, key, ctr)
            e += xv
            steps += 1
            if e <= horizon:
                epochs.append(e)
    finally:
        rng.counter = ctr
    return np.asarray(epochs, dtype=float), e - horizon


def renewal_measure_curve(
    model: InterArrivalModel,
    delay: float,
    t_grid,
    window: float,
    n: int,
    seed: int,
    delay_model: Optional[InterArrivalModel] = None,
    stream_base: int = 0,
    threads: int = 1,
    step_cap: int = DEFAULT_STEP_CAP,
):
    """Mean epoch counts in (t, t+window] per grid time, with stderrs.

    With delay_model given, each replica draws its own initial delay from it
    (that draw is the replica's first epoch); otherwise the scalar delay is
    shared by all replicas.  Returns (means, stderrs) over the grid.
    """
    if not (math.isfinite(window) and window > 0):
        raise InvalidInputError("window must be positive and finite")
    if delay < 0:
        raise InvalidInputError("delay must be nonnegative")
    n = int(n)
    if n < 2:
        raise InvalidInputError("needs at least two replicas")
    grid = np.ascontiguousarray(t_grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise InvalidInputError("t_grid must be a nonempty 1-d array")
    k = _kernel.active
    h = model.kernel_handle()
    dh = delay_model.kernel_handle() if delay_model is not None else None
    counts = np.zeros((n, grid.size), dtype=np.int32)

    def work(lo, hi):
        k.renewal_grid_batch(
            h, dh, float(delay), grid, float(window), int(step_cap),
            int(seed), int(stream_base) + lo, hi - lo, counts[lo:hi],
        )

    _run_slices(work, n, threads)
    means = counts.mean(axis=0)
    stderrs = counts.std(axis=0, ddof=1) / math.sqrt(n)
    return means, stderrs


def estimate_renewal_measure(
    model: InterArrivalModel,
    delay: float,
    t: float,
    window: float,
    n: int,
    seed: int,
    delay_model: Optional[InterArrivalModel] = None,
    stream_base: int = 0,
    threads: int = 1,
    step_cap: int = DEFAULT_STEP_CAP,
):
    """Replica-average count of epochs in (t, t+window], with its stderr."""
    means, stderrs = renewal_measure_curve(
        model, delay, [float(t)], window, n, seed,
        delay_model=delay_model, stream_base=stream_base,
        threads=threads, step_cap=step_cap,
    )
    return float(means[0]), float(stderrs[0])


def residual_life_samples(
    model: InterArrivalModel,
    delay: float,
    t: float,
    n: int,
    seed: int,
    delay_model: Optional[InterArrivalModel] = None,
    stream_base: int = 0,
    threads: int = 1,
    step_cap: int = DEFAULT_STEP_CAP,
) -> np.ndarray:
    """Forward recurrence times at t over n replicas, one stream each."""
    if delay < 0:
        raise InvalidInputError("delay must be nonnegative")
    n = int(n)
    if n < 1:
        raise InvalidInputError("needs at least one replica")
    k = _kernel.active
    h = model.kernel_handle()
    dh = delay_model.kernel_handle() if delay_model is not None else None
    out = np.empty(n)

    def work(lo, hi):
        k.residual_life_batch(
            h, dh, float(delay), float(t), int(step_cap),
            int(seed), int(stream_base) + lo, hi - lo, out[lo:hi],
        )

    _run_slices(work, n, threads)
    return out


def estimate_tv(
    model: InterArrivalModel,
    comp: UniformComponent,
    params: Union[BoundParams, BoundCertificate],
    x: float,
    t: float,
    n: int,
    bins: Optional[int] = None,
    seed: int = 0,
    stream_base: int = 0,
    threads: int = 1,
    step_cap: int = DEFAULT_STEP_CAP,
    iter_cap: int = DEFAULT_ITER_CAP,
) -> TvEstimate:
    """Sandwich the total-variation gap of the residual-life laws at t.

    The lower estimate is the binned half-L1 distance between independent
    samples of the zero-delay and x-delay laws (an underestimate of the true
    distance for any binning); the upper estimate is the empirical survival
    of the coupling time at t.  The default bin count n^(1/3) grows slowly
    enough to keep the lower estimate consistent from below.  The three
    sample sets use disjoint stream ranges of the same seed.
    """
    cert = _certificate(model, comp, params)
    cert.require_valid()
    if x < 0:
        raise InvalidInputError("coupling needs a start gap x >= 0")
    n = int(n)
    if n < 2:
        raise InvalidInputError("needs at least two replicas")
    if bins is None:
        bins = max(2, int(math.ceil(n ** (1.0 / 3.0))))
    bins = int(bins)
    if bins < 2:
        raise InvalidInputError("needs at least two bins")
    base = int(stream_base)
    b0 = residual_life_samples(
        model, 0.0, t, n, seed,
        stream_base=base, threads=threads, step_cap=step_cap,
    )
    bx = residual_life_samples(
        model, float(x), t, n, seed,
        stream_base=base + n, threads=threads, step_cap=step_cap,
    )
    top = max(float(b0.max()), float(bx.max())) * (1.0 + 1e-12)
    if top <= 0.0:
        top = 1.0
    edges = np.linspace(0.0, top, bins + 1)
    h0, _ = np.histogram(b0, bins=edges)
    hx, _ = np.histogram(bx, bins=edges)
    lower = 0.5 * float(np.abs(h0 - hx).sum()) / n
    lower_se = math.sqrt(bins / (4.0 * n))
    times = coupling_times(
        model, comp, cert, x, n, seed,
        stream_base=base + 2 * n, threads=threads,
        step_cap=step_cap, iter_cap=iter_cap,
    )
    upper = float((times > t).mean())
    upper_se = math.sqrt(upper * (1.0 - upper) / n)
    return TvEstimate(
        lower=lower, lower_stderr=lower_se,
        upper=upper, upper_stderr=upper_se, n=n, bins=bins,
    )


def check_count_inequality(
    model: InterArrivalModel,
    comp: UniformComponent,
    params: Union[BoundParams, BoundCertificate],
    x: float,
    t: float,
    window: float,
    n: int,
    seed: int,
    u0: Optional[float] = None,
    stream_base: int = 0,
    threads: int = 1,
    step_cap: int = DEFAULT_STEP_CAP,
    iter_cap: int = DEFAULT_ITER_CAP,
) -> CountInequalityResult:
    """Monte-Carlo check of the uncoupled-count inequality at (t, window).

    Couples the zero-delay and x-delay copies, counts each copy's epochs in
    (t, t+window], and compares E[1{T* > t} N(t, t+window]] for both copies
    against P(T* > t) (u0 + 1), with u0 the zero-delay mean epoch count of
    a width-window interval at the origin (estimated on extra streams when
    not supplied).  holds allows three combined standard errors of slack.
    """
    cert = _certificate(model, comp, params)
    cert.require_valid()
    if x < 0:
        raise InvalidInputError("coupling needs a start gap x >= 0")
    if not (math.isfinite(window) and window > 0):
        raise InvalidInputError("window must be positive and finite")
    n = int(n)
    if n < 2:
        raise InvalidInputError("needs at least two replicas")
    k = _kernel.active
    h = model.kernel_handle()
    base = int(stream_base)
    tstar = np.empty(n)
    c0 = np.empty(n, dtype=np.int64)
    cx = np.empty(n, dtype=np.int64)

    def work(lo, hi):
        k.coupled_counts_batch(
            h, comp.c, comp.L, comp.eta, cert.r, float(x), float(t),
            float(window), int(step_cap), int(iter_cap),
            int(seed), base + lo, hi - lo,
            tstar[lo:hi], c0[lo:hi], cx[lo:hi],
        )

    _run_slices(work, n, threads)
    alive = tstar > t
    term0 = np.where(alive, c0.astype(float), 0.0)
    termx = np.where(alive, cx.astype(float), 0.0)
    lhs_zero = float(term0.mean())
    lhs_zero_se = float(term0.std(ddof=1) / math.sqrt(n))
    lhs_x = float(termx.mean())
    lhs_x_se = float(termx.std(ddof=1) / math.sqrt(n))
    p_alive = float(alive.mean())
    p_se = math.sqrt(p_alive * (1.0 - p_alive) / n)
    if u0 is None:
        u0_val, u0_se = estimate_renewal_measure(
            model, 0.0, 0.0, window, n, seed,
            stream_base=base + n, threads=threads, step_cap=step_cap,
        )
    else:
        u0_val, u0_se = float(u0), 0.0
    rhs = p_alive * (u0_val + 1.0)
    rhs_se = math.sqrt(((u0_val + 1.0) * p_se) ** 2 + (p_alive * u0_se) ** 2)
    tol0 = 3.0 * math.sqrt(lhs_zero_se**2 + rhs_se**2)
    tolx = 3.0 * math.sqrt(lhs_x_se**2 + rhs_se**2)
    holds = (lhs_zero <= rhs + tol0) and (lhs_x <= rhs + tolx)
    return CountInequalityResult(
        t=float(t), h=float(window),
        lhs_zero=lhs_zero, lhs_zero_stderr=lhs_zero_se,
        lhs_x=lhs_x, lhs_x_stderr=lhs_x_se,
        rhs=rhs, rhs_stderr=rhs_se, u0=float(u0_val), holds=bool(holds),
    )


def check_supermartingale(
    model: InterArrivalModel,
    beta: float,
    lam: float,
    r: float,
    x: float,
    horizons=(1, 2, 5, 10, 20),
    n: int = 20000,
    seed: int = 0,
    stream_base: int = 0,
    threads: int = 1,
) -> DriftCheckResult:
    """Empirical test that the stopped walk functional never drifts up.

    The functional after i steps is exp(beta |Y_i| + lam S_i) rho^(-i) with
    the walk stopped at band entry, S_i the elapsed lower-copy time, and rho
    the one-step drift factor; its mean at every horizon must stay at or
    below the initial value exp(beta |x|), within three standard errors.
    Requires parameters with rho <= 1 (the contracting regime).
    """
    rho = float(drift_factor(model, beta, lam, r))
    if rho > 1.0 + 1e-12:
        raise InvalidInputError("the walk drift does not contract at this radius")
    horizons = tuple(int(m) for m in horizons)
    if not horizons or any(m < 0 for m in horizons):
        raise InvalidInputError("horizons must be nonnegative integers")
    n = int(n)
    if n < 2:
        raise InvalidInputError("needs at least two replicas")
    nmax = max(horizons)
    k = _kernel.active
    h = model.kernel_handle()
    ys = np.empty((n, nmax + 1))
    ss = np.empty((n, nmax + 1))
    taus = np.empty(n, dtype=np.int64)

    def work(lo, hi):
        k.step1_prefix_batch(
            h, float(x), float(r), nmax,
            int(seed), int(stream_base) + lo, hi - lo,
            ys[lo:hi], ss[lo:hi], taus[lo:hi],
        )

    _run_slices(work, n, threads)
    m0 = math.exp(beta * abs(x))
    means = []
    stderrs = []
    for m in horizons:
        stop = np.minimum(taus, m).astype(float)
        vals = np.exp(beta * np.abs(ys[:, m]) + lam * ss[:, m]) * rho ** (-stop)
        means.append(float(vals.mean()))
        stderrs.append(float(vals.std(ddof=1) / math.sqrt(n)))
    holds = all(mu <= m0 + 3.0 * se for mu, se in zip(means, stderrs))
    return DriftCheckResult(
        horizons=horizons, means=tuple(means), stderrs=tuple(stderrs),
        m0=m0, rho=rho, holds=bool(holds),
    )


def fit_exponential_rate(t_grid, values, weights=None) -> RateFit:
    """Fit amplitude * exp(-rate * t) to positive values.

    A weighted log-linear regression initializes the pair, then nonlinear
    least squares polishes it (falling back to the initializer when the
    refinement fails to converge).  Weights scale inverse-variance style:
    sigma_i = 1/sqrt(w_i).  Nonpositive or non-finite points are dropped
    with a warning; fewer than 3 surviving points is an error.
    """
    t = np.asarray(t_grid, dtype=float)
    v = np.asarray(values, dtype=float)
    if t.ndim != 1 or t.shape != v.shape:
        raise InvalidInputError(
            "t_grid and values must be 1-d arrays of equal length"
        )
    if weights is None:
        w = np.ones_like(v)
    else:
        w = np.asarray(weights, dtype=float)
        if w.shape != v.shape:
            raise InvalidInputError("weights must match values")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise InvalidInputError("weights must be finite and nonnegative")
    keep = (v > 0) & np.isfinite(v) & np.isfinite(t) & (w > 0)
    if not keep.all():
        warnings.warn(
            "dropping nonpositive or non-finite points from the rate fit",
            stacklevel=2,
        )
    t, v, w = t[keep], v[keep], w[keep]
    n_used = int(t.size)
    if n_used < 3:
        raise InvalidInputError("rate fit needs at least 3 positive points")
    # log-linear start; polyfit weights are 1/sigma of log(v), i.e. sqrt(w)*v
    slope, intercept = np.polyfit(t, np.log(v), 1, w=np.sqrt(w) * v)
    a0, r0 = math.exp(intercept), -slope
    sigma = 1.0 / np.sqrt(w)

    def decay(tt, a, r):
        return a * np.exp(-r * tt)

    try:
        popt, _ = curve_fit(decay, t, v, p0=(a0, r0), sigma=sigma, maxfev=10000)
        a1, r1 = float(popt[0]), float(popt[1])
    except (RuntimeError, ValueError):
        a1, r1 = a0, r0
    residual = float(np.sqrt(np.mean(((v - decay(t, a1, r1)) / sigma) ** 2)))
    return RateFit(amplitude=a1, rate=r1, residual=residual, n_used=n_used)
