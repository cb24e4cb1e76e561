"""Inter-arrival laws, their transforms, and splitting-construction sampling.

A model carries a flattened kernel description for simulation plus Python
hooks for the analytic side: cdf/sf, an upper quantile, and optional closed
forms for the exponential-moment transform and for the conditional-max
transform.  When a closed form is missing, both transforms fall back to a
segmented adaptive quadrature that distinguishes a genuinely divergent
integral (returns +inf) from a failure to converge (raises QuadratureError).
"""

from __future__ import annotations

import json
import math
import sys
import warnings
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import integrate
from scipy.special import erf, erfc, ndtr, ndtri

from . import _kernel
from ._kernel import descriptor
from ._kernel.errors import CapExceededError, DensityFloorError

__all__ = [
    "InterArrivalModel",
    "UniformComponent",
    "InvalidInputError",
    "QuadratureError",
    "DensityFloorError",
    "CapExceededError",
    "exponential",
    "uniform",
    "folded_gaussian",
    "shifted",
    "mixture",
    "from_table",
    "from_spec",
    "from_json",
    "laplace",
    "conditional_max_laplace",
    "verify_uniform_component",
    "divergence_abscissa",
    "sample",
    "sample_residual",
    "split_pair",
    "stationary_delay_model",
]


class InvalidInputError(ValueError):
    """Arguments outside an operation's domain."""


class QuadratureError(RuntimeError):
    """Numerical integration failed to converge (the integral itself may be
    finite; contrast with a divergent transform, which returns +inf)."""


@dataclass(frozen=True)
class UniformComponent:
    """Uniform minorant of the density on the window [c - L, c + L].

    eta_tilde is the total mass assigned to the window; the per-copy
    splitting probability is eta = eta_tilde / 2, spread as the constant
    density eta_tilde / (2 L) over a width-L subinterval.
    """

    c: float
    L: float
    eta_tilde: float

    def __post_init__(self):
        if not self.L > 0:
            raise InvalidInputError("component needs L > 0")
        if self.c < self.L:
            raise InvalidInputError("component needs c >= L so the window stays in [0, inf)")
        if not 0 < self.eta_tilde < 1:
            raise InvalidInputError("component needs 0 < eta_tilde < 1")

    @property
    def eta(self) -> float:
        return self.eta_tilde / 2.0

    def to_dict(self) -> dict:
        return {"c": self.c, "L": self.L, "eta_tilde": self.eta_tilde}

    @classmethod
    def from_dict(cls, d: dict) -> "UniformComponent":
        try:
            return cls(float(d["c"]), float(d["L"]), float(d["eta_tilde"]))
        except KeyError as exc:
            raise InvalidInputError(f"component spec missing field {exc}") from exc


@dataclass(frozen=True, eq=False)
class InterArrivalModel:
    """Positive inter-arrival law with analytic hooks.

    support_upper is the essential supremum (inf for unbounded laws).
    upper_quantile(p) returns a point t with P(X > t) <= 1 - p; for mixtures
    it is conservative (may overshoot), which is all the integration and
    truncation logic needs.  alpha is a positive abscissa with a finite
    exponential moment, used as the default search cap.
    """

    label: str
    desc: descriptor.ModelDesc
    mean: float
    second_moment: Optional[float]
    alpha: float
    support_upper: float
    cdf: Callable[[float], float]
    sf: Callable[[float], float]
    upper_quantile: Callable[[float], float]
    laplace_closed: Optional[Callable[[float], float]] = None
    cond_max_laplace_closed: Optional[Callable[[float, float], float]] = None

    def kernel_handle(self, backend=None):
        backend = backend if backend is not None else _kernel.active
        cache = self.__dict__.setdefault("_handles", {})
        handle = cache.get(backend.name)
        if handle is None:
            handle = backend.make_model(self.desc)
            cache[backend.name] = handle
        return handle

    def density(self, t: float) -> float:
        return _kernel.active.density(self.kernel_handle(), float(t))

    def to_spec(self) -> dict:
        return json.loads(json.dumps(self.__dict__.get("_spec", {"label": self.label})))


def _attach_spec(model: InterArrivalModel, spec: dict) -> InterArrivalModel:
    model.__dict__["_spec"] = spec
    return model


# ---------------------------------------------------------------------------
# model catalog

def exponential(rate: float) -> InterArrivalModel:
    if rate <= 0:
        raise InvalidInputError("exponential rate must be positive")
    r = float(rate)

    def lap(beta: float) -> float:
        if beta >= r:
            return math.inf
        return r / (r - beta)

    def cml(a: float, gamma: float) -> float:
        if gamma >= r:
            return math.inf
        a = max(a, 0.0)
        return math.exp(gamma * a) * 2.0 * r * r / ((r - gamma) * (2.0 * r - gamma))

    desc = descriptor.make_desc([{"kind": descriptor.KIND_EXPONENTIAL, "rate": r}])
    model = InterArrivalModel(
        label=f"exponential(rate={r!r})",
        desc=desc,
        mean=1.0 / r,
        second_moment=2.0 / (r * r),
        alpha=r / 2.0,
        support_upper=math.inf,
        cdf=lambda t: -math.expm1(-r * t) if t > 0 else 0.0,
        sf=lambda t: math.exp(-r * t) if t > 0 else 1.0,
        upper_quantile=lambda p: -math.log1p(-p) / r,
        laplace_closed=lap,
        cond_max_laplace_closed=cml,
    )
    return _attach_spec(model, {"kind": "exponential", "rate": r})


def _expm1_moment(u: float) -> float:
    """(e^u (u - 1) + 1) / u^2, the second exponential moment factor."""
    if abs(u) < 1e-3:
        # series: 1/2 + u/3 + u^2/8 + u^3/30 + u^4/144
        return 0.5 + u * (1.0 / 3.0 + u * (0.125 + u * (1.0 / 30.0 + u / 144.0)))
    return (math.exp(u) * (u - 1.0) + 1.0) / (u * u)


def uniform(a: float, b: float) -> InterArrivalModel:
    if not 0 <= a < b:
        raise InvalidInputError("uniform support needs 0 <= a < b")
    a, b = float(a), float(b)
    width = b - a

    def lap(beta: float) -> float:
        if beta == 0.0:
            return 1.0
        return (math.exp(beta * b) - math.exp(beta * a)) / (beta * width)

    def cml(thr: float, gamma: float) -> float:
        m = max(thr, a)
        w = b - m
        if w <= 0:
            return math.exp(gamma * b)
        if gamma == 0.0:
            return 1.0
        u = gamma * w
        return 2.0 * math.exp(gamma * m) * _expm1_moment(u)

    def cdf(t: float) -> float:
        if t <= a:
            return 0.0
        if t >= b:
            return 1.0
        return (t - a) / width

    desc = descriptor.make_desc([{"kind": descriptor.KIND_UNIFORM, "a": a, "b": b}])
    mean = 0.5 * (a + b)
    model = InterArrivalModel(
        label=f"uniform(a={a!r}, b={b!r})",
        desc=desc,
        mean=mean,
        second_moment=(a * a + a * b + b * b) / 3.0,
        alpha=2.0 / mean,
        support_upper=b,
        cdf=cdf,
        sf=lambda t: 1.0 - cdf(t),
        upper_quantile=lambda p: a + width * p,
        laplace_closed=lap,
        cond_max_laplace_closed=cml,
    )
    return _attach_spec(model, {"kind": "uniform", "a": a, "b": b})


_GL_NODES, _GL_WEIGHTS = leggauss(96)
_SQRT1_2 = 1.0 / math.sqrt(2.0)
_EXP_ARG_MAX = math.log(sys.float_info.max)
_TWO_PI = 2.0 * math.pi


def _bvn_cdf(h: float, k: float, rho: float) -> float:
    """Standard bivariate normal P(Z1 <= h, Z2 <= k) at correlation rho.

    Single-integral representation evaluated with a fixed Gauss-Legendre
    rule; smooth integrand, so 96 nodes reach close to machine precision.
    """
    base = float(ndtr(h)) * float(ndtr(k))
    if rho == 0.0:
        return base
    half = 0.5 * rho
    acc = 0.0
    for i in range(len(_GL_NODES)):
        r = half * (_GL_NODES[i] + 1.0)
        omr = 1.0 - r * r
        acc += _GL_WEIGHTS[i] * math.exp(
            -(h * h - 2.0 * h * k * r + k * k) / (2.0 * omr)
        ) / math.sqrt(omr)
    return base + half * acc / _TWO_PI


def folded_gaussian() -> InterArrivalModel:
    """|Z| for a standard Gaussian Z: density sqrt(2/pi) e^{-t^2/2} on [0, inf)."""

    def lap(beta: float) -> float:
        arg = 0.5 * beta * beta
        if arg > _EXP_ARG_MAX:
            return math.inf
        return 2.0 * math.exp(arg) * float(ndtr(beta))

    def cml(thr: float, gamma: float) -> float:
        a = max(thr, 0.0)
        q = float(erfc(a * _SQRT1_2))
        if q <= 0.0:
            return math.exp(gamma * a)
        i1 = float(ndtr(gamma * _SQRT1_2)) - _bvn_cdf(a - gamma, gamma * _SQRT1_2, -_SQRT1_2)
        i2 = float(ndtr(a)) * float(ndtr(-(a - gamma)))
        return (8.0 / (q * q)) * math.exp(0.5 * gamma * gamma) * (i1 - i2)

    desc = descriptor.make_desc([{"kind": descriptor.KIND_FOLDED_GAUSSIAN}])
    mean = math.sqrt(2.0 / math.pi)
    model = InterArrivalModel(
        label="folded_gaussian",
        desc=desc,
        mean=mean,
        second_moment=1.0,
        alpha=2.0 / mean,
        support_upper=math.inf,
        cdf=lambda t: float(erf(t * _SQRT1_2)) if t > 0 else 0.0,
        sf=lambda t: float(erfc(t * _SQRT1_2)) if t > 0 else 1.0,
        upper_quantile=lambda p: float(ndtri(0.5 + 0.5 * p)),
        laplace_closed=lap,
        cond_max_laplace_closed=cml,
    )
    return _attach_spec(model, {"kind": "folded_gaussian"})


def shifted(base: InterArrivalModel, shift: float) -> InterArrivalModel:
    if shift < 0:
        raise InvalidInputError("shift must be nonnegative")
    s = float(shift)
    if s == 0.0:
        return base

    lap = None
    if base.laplace_closed is not None:
        blap = base.laplace_closed
        lap = lambda beta: math.exp(beta * s) * blap(beta)
    cml = None
    if base.cond_max_laplace_closed is not None:
        bcml = base.cond_max_laplace_closed
        cml = lambda a, gamma: math.exp(gamma * s) * bcml(a - s, gamma)

    bcdf, bsf, buq = base.cdf, base.sf, base.upper_quantile
    model = InterArrivalModel(
        label=f"shifted({base.label}, {s!r})",
        desc=descriptor.shift_desc(base.desc, s),
        mean=base.mean + s,
        second_moment=(
            None if base.second_moment is None
            else base.second_moment + 2.0 * s * base.mean + s * s
        ),
        alpha=base.alpha,
        support_upper=base.support_upper + s,
        cdf=lambda t: bcdf(t - s),
        sf=lambda t: bsf(t - s),
        upper_quantile=lambda p: buq(p) + s,
        laplace_closed=lap,
        cond_max_laplace_closed=cml,
    )
    return _attach_spec(model, {"kind": "shifted", "shift": s, "base": base.to_spec()})


def mixture(pairs: list[tuple[float, InterArrivalModel]]) -> InterArrivalModel:
    if not pairs:
        raise InvalidInputError("mixture needs at least one component")
    total = sum(w for w, _ in pairs)
    if total <= 0:
        raise InvalidInputError("mixture weights must be positive")
    ws = [w / total for w, _ in pairs]
    models = [m for _, m in pairs]

    lap = None
    if all(m.laplace_closed is not None for m in models):
        laps = [m.laplace_closed for m in models]

        def lap(beta: float) -> float:
            acc = 0.0
            for w, f in zip(ws, laps):
                v = f(beta)
                if math.isinf(v):
                    return math.inf
                acc += w * v
            return acc

    cdfs = [m.cdf for m in models]
    sfs = [m.sf for m in models]
    uqs = [m.upper_quantile for m in models]
    m2 = None
    if all(m.second_moment is not None for m in models):
        m2 = sum(w * m.second_moment for w, m in zip(ws, models))
    model = InterArrivalModel(
        label="mixture(" + ", ".join(f"{w!r}*{m.label}" for w, m in zip(ws, models)) + ")",
        desc=descriptor.mixture_desc([(w, m.desc) for w, m in zip(ws, models)]),
        mean=sum(w * m.mean for w, m in zip(ws, models)),
        second_moment=m2,
        alpha=min(m.alpha for m in models),
        support_upper=max(m.support_upper for m in models),
        cdf=lambda t: sum(w * f(t) for w, f in zip(ws, cdfs)),
        sf=lambda t: sum(w * f(t) for w, f in zip(ws, sfs)),
        upper_quantile=lambda p: max(f(p) for f in uqs),
        laplace_closed=lap,
        cond_max_laplace_closed=None,
    )
    return _attach_spec(
        model,
        {
            "kind": "mixture",
            "components": [
                dict(m.to_spec(), weight=w) for w, m in zip(ws, models)
            ],
        },
    )


def from_table(t, f) -> InterArrivalModel:
    """Piecewise-linear density through the knots (t, f), normalized."""
    desc = descriptor.make_desc([
        {"kind": descriptor.KIND_TABLE, "t": np.asarray(t, float), "f": np.asarray(f, float)}
    ])
    tt = desc.tab_t
    ff = desc.tab_f
    cc = desc.tab_c
    dt = np.diff(tt)
    f0, f1 = ff[:-1], ff[1:]
    seg_mass = 0.5 * (f0 + f1) * dt
    seg_t = tt[:-1] * seg_mass + dt * dt * (f0 / 6.0 + f1 / 3.0)
    seg_tt = (
        tt[:-1] ** 2 * seg_mass
        + 2.0 * tt[:-1] * dt * dt * (f0 / 6.0 + f1 / 3.0)
        + dt ** 3 * (f0 / 12.0 + f1 / 4.0)
    )
    mean = float(seg_t.sum())

    def cdf(x: float) -> float:
        if x <= tt[0]:
            return 0.0
        if x >= tt[-1]:
            return 1.0
        i = int(np.searchsorted(tt, x, side="right")) - 1
        y = x - tt[i]
        slope = (ff[i + 1] - ff[i]) / dt[i]
        return min(1.0, float(cc[i] + ff[i] * y + 0.5 * slope * y * y))

    def uq(p: float) -> float:
        if p >= 1.0:
            return float(tt[-1])
        i = int(np.searchsorted(cc, p, side="right")) - 1
        i = min(max(i, 0), len(tt) - 2)
        rem = p - cc[i]
        slope = (ff[i + 1] - ff[i]) / dt[i]
        if slope == 0.0:
            y = dt[i] if ff[i] == 0.0 else rem / ff[i]
        else:
            disc = max(ff[i] * ff[i] + 2.0 * slope * rem, 0.0)
            y = (math.sqrt(disc) - ff[i]) / slope
        return float(tt[i] + min(max(y, 0.0), dt[i]))

    model = InterArrivalModel(
        label=f"table({len(tt)} knots on [{tt[0]!r}, {tt[-1]!r}])",
        desc=desc,
        mean=mean,
        second_moment=float(seg_tt.sum()),
        alpha=2.0 / mean,
        support_upper=float(tt[-1]),
        cdf=cdf,
        sf=lambda x: 1.0 - cdf(x),
        upper_quantile=uq,
        laplace_closed=None,
        cond_max_laplace_closed=None,
    )
    return _attach_spec(
        model,
        {"kind": "table", "points": [[float(a), float(b)] for a, b in zip(t, f)]},
    )


_KINDS = {"exponential", "uniform", "folded_gaussian", "mixture", "table"}


def from_spec(spec: dict) -> InterArrivalModel:
    """Build a model from its JSON-style description."""
    if not isinstance(spec, dict):
        raise InvalidInputError("model spec must be an object")
    kind = spec.get("kind")
    if kind == "shifted":
        if "base" not in spec:
            raise InvalidInputError("shifted spec needs a base model")
        return shifted(from_spec(spec["base"]), float(spec.get("shift", 0.0)))
    if kind not in _KINDS:
        raise InvalidInputError(
            f"model kind must be one of {sorted(_KINDS | {'shifted'})}, got {kind!r}"
        )
    if kind == "exponential":
        model = exponential(float(spec["rate"]))
    elif kind == "uniform":
        model = uniform(float(spec["a"]), float(spec["b"]))
    elif kind == "folded_gaussian":
        model = folded_gaussian()
    elif kind == "table":
        pts = spec.get("points")
        if not pts:
            raise InvalidInputError("table spec needs points [[t, f], ...]")
        arr = np.asarray(pts, dtype=float)
        if arr.ndim != 2 or arr.shape[1] != 2:
            raise InvalidInputError("table points must be [t, f] pairs")
        model = from_table(arr[:, 0], arr[:, 1])
    else:
        comps = spec.get("components")
        if not comps:
            raise InvalidInputError("mixture spec needs components")
        pairs = []
        for sub in comps:
            w = float(sub.get("weight", 1.0))
            pairs.append((w, from_spec({k: v for k, v in sub.items() if k != "weight"})))
        model = mixture(pairs)
    s = float(spec.get("shift", 0.0))
    if s > 0 and kind != "shifted":
        model = shifted(model, s)
    return model


def from_json(text: str) -> InterArrivalModel:
    return from_spec(json.loads(text))


# ---------------------------------------------------------------------------
# transforms

_EPSREL = 1e-11
_MAX_SEGMENTS = 64
_TAIL_RTOL = 1e-13


def _quad_piece(g, a: float, b: float) -> float:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        out = integrate.quad(g, a, b, epsabs=0.0, epsrel=_EPSREL, limit=200, full_output=1)
    val, abserr = out[0], out[1]
    if len(out) > 3:  # quad attached a warning message: retry harder
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            out = integrate.quad(g, a, b, epsabs=1e-300, epsrel=1e-9, limit=500, full_output=1)
        val, abserr = out[0], out[1]
        if len(out) > 3 and abserr > 1e-6 * max(abs(val), 1.0):
            raise QuadratureError(f"integration failed on [{a}, {b}]: {out[3]}")
    return val


def _segmented_integral(g, lo: float, hi: float, unit: float) -> float:
    """Integral of a nonnegative g over [lo, hi] (hi may be inf) by
    geometrically growing segments.

    Divergence surfaces as overflowing segment values (g returns +inf once
    its log-space exponent passes the double range) and yields +inf; a
    convergent integral ends once two consecutive segments contribute
    negligibly.  Exhausting the segment budget raises QuadratureError.
    """
    unit = max(unit, 1e-12)
    total = 0.0
    small = 0
    a = lo
    width = unit
    for seg in range(_MAX_SEGMENTS):
        b = min(a + width, hi)
        ga = g(a)
        gb = g(b)
        if not math.isfinite(ga) or not math.isfinite(gb):
            return math.inf
        if seg > 0 and math.isinf(hi) and gb > ga > 0.0:
            # past the bulk (the first segment ends beyond the 1 - 1e-12
            # quantile) a growing integrand means a divergent tail
            return math.inf
        piece = _quad_piece(g, a, b)
        if math.isnan(piece) or math.isinf(piece):
            return math.inf
        total += piece
        if total > 1e290:
            return math.inf
        if b >= hi:
            return total
        if piece <= _TAIL_RTOL * max(abs(total), 1e-300):
            small += 1
            if small >= 2:
                return total
        else:
            small = 0
        a = b
        width *= 2.0
    raise QuadratureError("segment budget exhausted before the tail settled")


def _exp_weighted(rate: float, factor: Callable[[float], float]):
    """exp(rate * t) * factor(t) evaluated in log space so that neither side
    overflows alone; a log-integrand beyond the double range maps to +inf."""

    def g(t: float) -> float:
        d = factor(t)
        if d <= 0.0:
            return 0.0
        e = rate * t + math.log(d)
        if e > 709.0:
            return math.inf
        return math.exp(e)

    return g


def laplace(model: InterArrivalModel, beta: float) -> float:
    """E e^{beta X}; +inf when the transform diverges.

    The quadrature route resolves the transform to ~1e-10 relative accuracy
    away from the divergence abscissa; within about 0.02/mean of it, double
    precision underflow of the density tail limits what any sampler-backed
    density can resolve.
    """
    beta = float(beta)
    if beta == 0.0:
        return 1.0
    if model.laplace_closed is not None:
        return model.laplace_closed(beta)
    handle = model.kernel_handle()
    dens = _kernel.active.density
    g = _exp_weighted(beta, lambda t: dens(handle, t))
    t0 = max(model.upper_quantile(1.0 - 1e-12), 1e-9)
    return _segmented_integral(g, 0.0, model.support_upper, t0)


def conditional_max_laplace(model: InterArrivalModel, a: float, gamma: float) -> float:
    """E e^{gamma max(X1, X2)} for two independent copies conditioned > a.

    At the essential supremum the conditional law degenerates to the point
    mass at a, giving e^{gamma a}; beyond it the conditioning event is null
    and the call is invalid.
    """
    a = float(a)
    gamma = float(gamma)
    sfa = model.sf(a)
    if sfa <= 0.0:
        up = model.support_upper
        if math.isfinite(up) and a > up * (1.0 + 1e-12) + 1e-12:
            raise InvalidInputError(
                f"threshold {a} lies beyond the support (ess sup {up})"
            )
        return math.exp(gamma * a)
    if gamma == 0.0:
        return 1.0
    if model.cond_max_laplace_closed is not None:
        return model.cond_max_laplace_closed(a, gamma)
    handle = model.kernel_handle()
    dens = _kernel.active.density
    sf = model.sf

    def factor(s: float) -> float:
        cond_cdf = 1.0 - sf(s) / sfa
        if cond_cdf < 0.0:
            cond_cdf = 0.0
        elif cond_cdf > 1.0:
            cond_cdf = 1.0
        return 2.0 * cond_cdf * dens(handle, s) / sfa

    g = _exp_weighted(gamma, factor)
    t0 = max(model.upper_quantile(1.0 - 1e-12), a + 1e-9)
    return _segmented_integral(g, a, model.support_upper, max(t0 - a, 1e-9))


def divergence_abscissa(model: InterArrivalModel, hi: float = 64.0, tol: float = 1e-6) -> float:
    """sup{beta >= 0 : E e^{beta X} < inf}, or +inf if finite up to hi.

    Resolution near the boundary is limited by the same underflow horizon as
    the quadrature route, roughly 0.02/mean for sampler-backed densities.
    A beta whose integral cannot be resolved counts as not provably finite,
    so the result is a safe lower bound on the true abscissa.
    """

    def finite(beta: float) -> bool:
        try:
            return math.isfinite(laplace(model, beta))
        except QuadratureError:
            return False

    if math.isfinite(model.support_upper):
        return math.inf
    if finite(hi):
        return math.inf
    lo = 0.0
    high = hi
    while high - lo > tol * max(1.0, lo):
        mid = 0.5 * (lo + high)
        if finite(mid):
            lo = mid
        else:
            high = mid
    return lo


# ---------------------------------------------------------------------------
# uniform component checks and splitting samplers

def verify_uniform_component(
    model: InterArrivalModel, comp: UniformComponent, grid: int = 2049
) -> float:
    """Worst-case slack of the density over the component window.

    Returns min density - eta_tilde/(2L) over a grid of the window
    [c - L, c + L]; nonnegative means the component is admissible (up to
    grid resolution).
    """
    if grid < 2:
        raise InvalidInputError("grid must have at least 2 points")
    handle = model.kernel_handle()
    dens = _kernel.active.density
    lo = comp.c - comp.L
    hi = comp.c + comp.L
    ts = np.linspace(lo, hi, int(grid))
    dmin = min(dens(handle, float(t)) for t in ts)
    return dmin - comp.eta_tilde / (2.0 * comp.L)


def sample(model: InterArrivalModel, rng) -> float:
    x, rng.counter = _kernel.active.sample(model.kernel_handle(), rng.key, rng.counter)
    return x


def sample_residual(
    model: InterArrivalModel, comp: UniformComponent, shift: float, rng
) -> float:
    """Draw from the shift-s law with the uniform component removed."""
    x, rng.counter = _kernel.active.sample_residual(
        model.kernel_handle(), comp.c, comp.L, comp.eta, float(shift), rng.key, rng.counter
    )
    return x


def split_pair(
    model: InterArrivalModel, comp: UniformComponent, shift: float, rng
) -> tuple[float, float, int]:
    """One splitting trial for two copies offset by shift.

    Returns (x_first, x_second, xi); xi == 1 marks the shared uniform leg,
    in which case x_first - x_second == shift exactly.
    """
    xp, xpp, xi, rng.counter = _kernel.active.split_pair(
        model.kernel_handle(), comp.c, comp.L, comp.eta, float(shift), rng.key, rng.counter
    )
    return xp, xpp, xi


def stationary_delay_model(model: InterArrivalModel, knots: int = 4097) -> InterArrivalModel:
    """Law of the stationary residual life: density sf(t) / mean.

    Exponential laws are their own stationary delay; other laws are
    tabulated on a dense grid up to the 1 - 1e-10 quantile.
    """
    d = model.desc
    if d.ncomp == 1 and int(d.kinds[0]) == descriptor.KIND_EXPONENTIAL and d.shifts[0] == 0.0:
        return model
    hi = model.upper_quantile(1.0 - 1e-10)
    ts = np.linspace(0.0, hi, int(knots))
    fs = np.array([model.sf(float(t)) / model.mean for t in ts])
    return from_table(ts, fs)
