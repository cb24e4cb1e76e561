"""Explicit tail certificates for the two-copy renewal coupling.

Everything here is exact formula evaluation, no simulation: the band radius
of the gap walk, the per-step drift factor of its Lyapunov function, the
validity product q of the walk/split cycle, and the resulting exponential
tail bound on the coupling time, together with the total-variation and
renewal-measure bounds it implies.

All functions are pure in (model, comp, params).  A certificate is an
immutable value object whose bound evaluations depend only on stored fields,
so a certificate deserialized from JSON reproduces its bounds bit for bit.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Optional

from . import dist
from .dist import (
    InterArrivalModel,
    InvalidInputError,
    QuadratureError,
    UniformComponent,
)

__all__ = [
    "BoundParams",
    "BoundCertificate",
    "GeomSumSpec",
    "InvalidCertificateError",
    "assemble_certificate",
    "band_radius",
    "drift_factor",
    "geometric_sum_bound",
    "renewal_count_bound",
    "renewal_gap_bound",
    "tail_bound",
    "tv_bound",
    "validity_product",
]


class InvalidCertificateError(ValueError):
    """The validity product reached 1, so no tail decay is certified."""


def _exp(v: float) -> float:
    try:
        return math.exp(v)
    except OverflowError:
        return math.inf


@dataclass(frozen=True)
class BoundParams:
    """Free parameters of the coupling bound.

    beta scales the Lyapunov function e^{beta |y|} of the gap walk, delta
    splits the drift budget between the two walk directions, and theta
    discounts the certified exponent to pay for the splitting stage.  The
    certified decay rate is the product theta * delta * beta.
    """

    beta: float
    delta: float
    theta: float

    def __post_init__(self):
        if not (math.isfinite(self.beta) and self.beta > 0):
            raise InvalidInputError("params need beta > 0")
        if not (0 <= self.delta < 1):
            raise InvalidInputError("params need 0 <= delta < 1")
        if not (0 < self.theta <= 1):
            raise InvalidInputError("params need 0 < theta <= 1")

    @property
    def lam(self) -> float:
        """Exponent weight on elapsed walk time, delta * beta."""
        return self.delta * self.beta

    @property
    def rate(self) -> float:
        return self.theta * self.delta * self.beta

    def to_dict(self) -> dict:
        return {"beta": self.beta, "delta": self.delta, "theta": self.theta}

    @classmethod
    def from_dict(cls, d: dict) -> "BoundParams":
        try:
            return cls(float(d["beta"]), float(d["delta"]), float(d["theta"]))
        except KeyError as exc:
            raise InvalidInputError(f"params spec missing field {exc}") from exc


@dataclass(frozen=True)
class GeomSumSpec:
    """A geometric number of cost terms, each with log-Laplace value psi.

    Models a random sum stopped at the first success of a trial with
    success probability at least p, where every term's conditional Laplace
    transform is bounded by e^psi.
    """

    p: float
    psi: float

    def __post_init__(self):
        if not 0 < self.p < 1:
            raise InvalidInputError("geometric sum needs 0 < p < 1")
        if not math.isfinite(self.psi):
            raise InvalidInputError("geometric sum needs finite psi")


def geometric_sum_bound(spec: GeomSumSpec) -> float:
    """Laplace bound p e^psi / (1 - e^psi (1 - p)) for the geometric sum.

    Finite exactly when psi < -log(1 - p); returns +inf otherwise (the
    transform of the dominating compound diverges).
    """
    e_psi = _exp(spec.psi)
    rem = 1.0 - e_psi * (1.0 - spec.p)
    if rem <= 0.0:
        return math.inf
    return spec.p * e_psi / rem


def _radius_parts(model: InterArrivalModel, beta: float, delta: float):
    """Raw and clamped band radius plus the transform values behind them."""
    lap_hi = dist.laplace(model, (1.0 + delta) * beta)
    if not math.isfinite(lap_hi):
        raise InvalidInputError(
            "exponential moment at (1 + delta) * beta is infinite; shrink beta or delta"
        )
    lap_lo = dist.laplace(model, -(1.0 - delta) * beta)
    den = 1.0 - lap_lo
    if not den > 0.0:
        raise InvalidInputError("downward transform reached 1; beta * (1 - delta) must be > 0")
    raw = math.log(lap_hi / den) / (2.0 * beta)
    return max(raw, 0.0), raw


def band_radius(model: InterArrivalModel, params: BoundParams) -> float:
    """Band radius R = log[L((1+d)b) / (1 - L(-(1-d)b))] / (2b).

    The gap walk stops once the copies are within R of each other.  The
    formula can go negative for very light tails and small beta; a negative
    value is clamped to 0 (the walk is then never needed) and flagged on the
    assembled certificate.
    """
    r, _ = _radius_parts(model, params.beta, params.delta)
    return r


def drift_factor(model: InterArrivalModel, beta: float, lam: float, r: float) -> float:
    """One-step factor L(-(beta-lam)) + e^{-2 beta r} L(lam+beta) of the walk.

    The Lyapunov function e^{beta |y|} e^{lam * elapsed} contracts by this
    factor per step while the walk is outside the band of radius r; it is
    at most 1 exactly when r is at least the band radius at delta = lam/beta.
    """
    if not (math.isfinite(beta) and beta > 0):
        raise InvalidInputError("drift factor needs beta > 0")
    if not 0 <= lam < beta:
        raise InvalidInputError("drift factor needs 0 <= lam < beta")
    if not (math.isfinite(r) and r >= 0):
        raise InvalidInputError("drift factor needs a finite radius r >= 0")
    lap_up = dist.laplace(model, lam + beta)
    if not math.isfinite(lap_up):
        raise InvalidInputError("exponential moment at lam + beta is infinite")
    return dist.laplace(model, -(beta - lam)) + math.exp(-2.0 * beta * r) * lap_up


def _validity_parts(
    model: InterArrivalModel,
    comp: UniformComponent,
    params: BoundParams,
    r: float,
    transform=None,
):
    """Cycle transform e_q, validity product q, and the band/width counts.

    A transform evaluation that diverges, or that the quadrature cannot
    resolve, yields e_q = +inf and hence an invalid certificate; numerical
    failure is mapped to the conservative side, never to a certified bound.
    transform replaces the conditional-max transform evaluation (same
    (model, width, gamma) signature); callers may pass a memoized version.
    """
    k_ceil = math.ceil(r / comp.L)
    k_floor = math.floor(r / comp.L)
    gamma = params.theta * params.beta
    fn = dist.conditional_max_laplace if transform is None else transform
    try:
        lbar = fn(model, comp.c + comp.L, gamma)
    except QuadratureError:
        lbar = math.inf
    e_q = _exp(params.theta * params.beta * (r + k_floor * comp.c)) * lbar
    fail_mass = 1.0 - comp.eta**k_ceil
    q = 0.0 if fail_mass == 0.0 else e_q * fail_mass
    return e_q, q, k_ceil, k_floor


def validity_product(
    model: InterArrivalModel,
    comp: UniformComponent,
    params: BoundParams,
    r: Optional[float] = None,
    transform=None,
) -> float:
    """Validity product q = e^{tb(R + floor(R/L) c)} Lbar_{c+L}(tb) (1 - eta^{ceil(R/L)}).

    The product of the worst-case cycle cost transform and the chance the
    splitting stage fails; the certificate is valid exactly when q < 1.
    Divergent transforms give q = +inf (invalid, not an error).  Pass a
    precomputed band radius r to skip recomputing it, and a transform
    callable to memoize the conditional-max transform across evaluations.
    """
    if r is None:
        r = band_radius(model, params)
    _, q, _, _ = _validity_parts(model, comp, params, r, transform=transform)
    return q


@dataclass(frozen=True)
class BoundCertificate:
    """Immutable record of one evaluated bound.

    Stores the inputs (model spec, component, params) and every derived
    quantity, so all bound evaluations are functions of the fields alone.
    q is the validity product; prefactor is the tail-bound constant; the
    certified tail is e^{theta beta x 1(x > r)} * prefactor * e^{-rate t}.
    """

    model_label: str
    model_spec: dict
    component: UniformComponent
    params: BoundParams
    r: float
    r_raw: float
    r_clamped: bool
    k_ceil: int
    k_floor: int
    e_q: float
    q: float
    prefactor: float
    rate: float
    gamma: float
    tv_constant: float
    valid: bool
    degenerate: bool

    def require_valid(self):
        if not self.valid:
            raise InvalidCertificateError(
                f"validity product q = {self.q} is not < 1; no bound is certified"
            )

    def tail_bound(self, x: float, t: float) -> float:
        """Certified bound on P(coupling time > t) for a start gap x, t >= x."""
        self.require_valid()
        if x < 0:
            raise InvalidInputError("tail bound needs x >= 0")
        if t < x:
            raise InvalidInputError("tail bound applies for t >= x")
        arg = self.params.theta * self.params.beta * x if x > self.r else 0.0
        return math.exp(arg) * self.prefactor * math.exp(-self.rate * t)

    def tv_bound(self, x: float, t: float, gamma: Optional[float] = None) -> float:
        """Bound e^{theta beta x} C e^{-gamma t} on the residual-law TV gap.

        Valid for every t >= 0: C = max(1, prefactor) covers t < x because
        the exponent theta beta x - gamma t stays nonnegative there, and any
        total-variation distance is at most 1.
        """
        self.require_valid()
        if gamma is None:
            gamma = self.gamma
        if not 0 < gamma < self.rate:
            raise InvalidInputError("tv bound needs 0 < gamma < rate")
        if x < 0 or t < 0:
            raise InvalidInputError("tv bound needs x >= 0 and t >= 0")
        arg = self.params.theta * self.params.beta * x
        return math.exp(arg) * self.tv_constant * math.exp(-gamma * t)

    def renewal_gap_bound(
        self, x: float, t: float, u0_mass: float, gamma: Optional[float] = None
    ) -> float:
        """Bound 2 e^{theta beta x} C e^{-gamma t} (u0_mass + 1) on the
        difference of interval renewal masses between start gaps x and 0.

        u0_mass must upper-bound the expected number of zero-delay epochs in
        an interval of the compared width (see renewal_count_bound).
        """
        if u0_mass < 0:
            raise InvalidInputError("renewal gap bound needs u0_mass >= 0")
        return 2.0 * self.tv_bound(x, t, gamma) * (u0_mass + 1.0)

    def to_dict(self) -> dict:
        return {
            "model_label": self.model_label,
            "model": self.model_spec,
            "component": self.component.to_dict(),
            "params": self.params.to_dict(),
            "r": self.r,
            "r_raw": self.r_raw,
            "r_clamped": self.r_clamped,
            "k_ceil": self.k_ceil,
            "k_floor": self.k_floor,
            "e_q": self.e_q,
            "q": self.q,
            "prefactor": self.prefactor,
            "rate": self.rate,
            "gamma": self.gamma,
            "tv_constant": self.tv_constant,
            "valid": self.valid,
            "degenerate": self.degenerate,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    @classmethod
    def from_dict(cls, d: dict) -> "BoundCertificate":
        try:
            return cls(
                model_label=str(d["model_label"]),
                model_spec=dict(d["model"]),
                component=UniformComponent.from_dict(d["component"]),
                params=BoundParams.from_dict(d["params"]),
                r=float(d["r"]),
                r_raw=float(d["r_raw"]),
                r_clamped=bool(d["r_clamped"]),
                k_ceil=int(d["k_ceil"]),
                k_floor=int(d["k_floor"]),
                e_q=float(d["e_q"]),
                q=float(d["q"]),
                prefactor=float(d["prefactor"]),
                rate=float(d["rate"]),
                gamma=float(d["gamma"]),
                tv_constant=float(d["tv_constant"]),
                valid=bool(d["valid"]),
                degenerate=bool(d["degenerate"]),
            )
        except KeyError as exc:
            raise InvalidInputError(f"certificate spec missing field {exc}") from exc

    @classmethod
    def from_json(cls, text: str) -> "BoundCertificate":
        return cls.from_dict(json.loads(text))


def assemble_certificate(
    model: InterArrivalModel,
    comp: UniformComponent,
    params: BoundParams,
    gamma: Optional[float] = None,
) -> BoundCertificate:
    """Evaluate the full bound in one pass and freeze it as a certificate.

    gamma defaults to 0.99 * rate (it must be strictly below the certified
    rate for the all-t bounds).  delta = 0 is accepted but yields rate 0 and
    a certificate flagged degenerate.  q >= 1 yields a certificate flagged
    invalid (with prefactor +inf); assembling it is not an error, using its
    bounds is.
    """
    r, raw = _radius_parts(model, params.beta, params.delta)
    r, raw = float(r), float(raw)
    e_q, q, k_ceil, k_floor = _validity_parts(model, comp, params, r)
    e_q, q = float(e_q), float(q)
    valid = math.isfinite(e_q) and q < 1.0
    if valid:
        prefactor = float(comp.eta**k_ceil * e_q / (1.0 - q))
    else:
        prefactor = math.inf
    rate = params.rate
    degenerate = params.delta == 0.0
    if gamma is None:
        gamma = 0.99 * rate
    elif not 0 < gamma < rate:
        raise InvalidInputError("certificate gamma must satisfy 0 < gamma < rate")
    return BoundCertificate(
        model_label=model.label,
        model_spec=model.to_spec(),
        component=comp,
        params=params,
        r=r,
        r_raw=raw,
        r_clamped=raw < 0.0,
        k_ceil=int(k_ceil),
        k_floor=int(k_floor),
        e_q=e_q,
        q=q,
        prefactor=prefactor,
        rate=rate,
        gamma=gamma,
        tv_constant=max(1.0, prefactor),
        valid=valid,
        degenerate=degenerate,
    )


def tail_bound(
    model: InterArrivalModel,
    comp: UniformComponent,
    params: BoundParams,
    x: float,
    t: float,
) -> float:
    """Certified coupling-tail bound e^{tb x 1(x>R)} A e^{-rate t}, t >= x."""
    return assemble_certificate(model, comp, params).tail_bound(x, t)


def tv_bound(
    model: InterArrivalModel,
    comp: UniformComponent,
    params: BoundParams,
    gamma: float,
    x: float,
    t: float,
) -> float:
    """Residual-law TV bound e^{tb x} max(1, A) e^{-gamma t}, any t >= 0."""
    return assemble_certificate(model, comp, params).tv_bound(x, t, gamma)


def renewal_gap_bound(
    model: InterArrivalModel,
    comp: UniformComponent,
    params: BoundParams,
    gamma: float,
    x: float,
    t: float,
    window: float,
    u0_mass: float,
) -> float:
    """Bound on |U^x - U^0| mass over (t, t + window], via the TV bound.

    window is the interval width the masses refer to; u0_mass must bound the
    zero-delay expected epoch count of such an interval.
    """
    if not window > 0:
        raise InvalidInputError("renewal gap bound needs window > 0")
    cert = assemble_certificate(model, comp, params)
    return cert.renewal_gap_bound(x, t, u0_mass, gamma)


def renewal_count_bound(model: InterArrivalModel, h: float) -> float:
    """Analytic bound h / mean + m2 / mean^2 on the expected number of
    zero-delay renewal epochs in any interval of width h.

    A conservative stand-in for simulating the renewal measure; needs the
    model's second moment.
    """
    if not h > 0:
        raise InvalidInputError("renewal count bound needs h > 0")
    if model.second_moment is None:
        raise InvalidInputError("renewal count bound needs a known second moment")
    return h / model.mean + model.second_moment / model.mean**2
