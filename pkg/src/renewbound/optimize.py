"""Certified-rate search over bound parameters and component choices.

The certified rate theta * delta * beta is maximized over a box of (beta,
delta, theta) and a finite set of uniform-component candidates.  The
landscape is not convex: the failure budget eta^ceil(R/L) jumps wherever
the band radius crosses an integer multiple of the component width, so the
search is a dense deterministic grid, a feasibility-boundary push of theta
at every grid pair (the validity product is nondecreasing in theta, so the
boundary carries the best rate at fixed beta, delta), and a simplex
refinement of the leading candidates.  No randomness anywhere: identical
inputs give bit-identical results.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import minimize

from . import dist
from .bounds import (
    BoundCertificate,
    BoundParams,
    _radius_parts,
    assemble_certificate,
    validity_product,
)
from .dist import (
    InterArrivalModel,
    InvalidInputError,
    QuadratureError,
    UniformComponent,
)

__all__ = [
    "EVAL_FIELDS",
    "OptimizeResult",
    "SearchSpace",
    "component_candidates",
    "optimize_rate",
    "rate_objective",
]

EVAL_FIELDS = ("beta", "delta", "theta", "c", "L", "eta_tilde", "q", "rate")

_BISECT_ITERS = 64
_N_STARTS = 8


def rate_objective(
    model: InterArrivalModel, comp: UniformComponent, params: BoundParams
) -> float:
    """Certified rate of (model, comp, params), or -inf when infeasible.

    Infeasible means the validity product is not below 1, a transform
    diverges, or the radius is out of domain; every such case is encoded
    as -inf so maximization sees a total landscape.
    """
    try:
        q = validity_product(model, comp, params)
    except (InvalidInputError, QuadratureError):
        return -math.inf
    if not q < 1.0:
        return -math.inf
    return params.rate


@dataclass(frozen=True)
class SearchSpace:
    """Box of bound parameters plus component candidates to search.

    The grid is log-spaced in beta and linear in delta and theta; theta's
    lower edge stays strictly positive since the rate vanishes at 0.  A
    beta_range of None defers to (1e-3, model.alpha) at optimization time.
    """

    components: tuple
    beta_range: Optional[tuple] = None
    delta_range: tuple = (0.05, 0.95)
    theta_range: tuple = (1e-3, 1.0)
    n_beta: int = 24
    n_delta: int = 16
    n_theta: int = 16

    def __post_init__(self):
        object.__setattr__(self, "components", tuple(self.components))
        for comp in self.components:
            if not isinstance(comp, UniformComponent):
                raise InvalidInputError(
                    "components must be UniformComponent instances"
                )
        if self.beta_range is not None:
            lo, hi = self.beta_range
            if not (0 < lo <= hi and math.isfinite(hi)):
                raise InvalidInputError("beta_range needs 0 < lo <= hi < inf")
            object.__setattr__(self, "beta_range", (float(lo), float(hi)))
        lo, hi = self.delta_range
        if not 0 <= lo <= hi < 1:
            raise InvalidInputError("delta_range must lie inside [0, 1)")
        object.__setattr__(self, "delta_range", (float(lo), float(hi)))
        lo, hi = self.theta_range
        if not 0 < lo <= hi <= 1:
            raise InvalidInputError("theta_range must lie inside (0, 1]")
        object.__setattr__(self, "theta_range", (float(lo), float(hi)))
        if min(self.n_beta, self.n_delta, self.n_theta) < 1:
            raise InvalidInputError("grid sizes must be at least 1")


def component_candidates(
    model: InterArrivalModel,
    windows,
    eta_tilde_fractions=None,
    eta_tilde_values=None,
    grid: int = 2049,
) -> tuple:
    """Admissible uniform components over the given (c, L) windows.

    With fractions, each window contributes its largest admissible mass
    scaled by every fraction; windows where the density touches zero are
    dropped.  With explicit masses, every (window, mass) pair must verify
    with nonnegative margin.  Exactly one of the two modes must be given.
    """
    if (eta_tilde_fractions is None) == (eta_tilde_values is None):
        raise InvalidInputError(
            "pass exactly one of eta_tilde_fractions or eta_tilde_values"
        )
    out = []
    for win in windows:
        c, width = float(win[0]), float(win[1])
        probe = UniformComponent(c, width, 0.5)
        margin = dist.verify_uniform_component(model, probe, grid=grid)
        # margin = min density - mass/(2L), so the admissible mass ceiling is
        eta_max = 2.0 * width * margin + 0.5
        if eta_tilde_fractions is not None:
            if eta_max <= 0.0:
                continue
            for frac in eta_tilde_fractions:
                if not 0 < frac < 1:
                    raise InvalidInputError("fractions must lie in (0, 1)")
                out.append(UniformComponent(c, width, float(frac) * eta_max))
        else:
            for val in eta_tilde_values:
                comp = UniformComponent(c, width, float(val))
                if dist.verify_uniform_component(model, comp, grid=grid) < 0.0:
                    raise InvalidInputError(
                        f"component (c={c}, L={width}, eta_tilde={val}) "
                        "is not dominated by the density"
                    )
                out.append(comp)
    if not out:
        raise InvalidInputError("no admissible component candidates")
    return tuple(out)


@dataclass(frozen=True)
class OptimizeResult:
    """Outcome of a certified-rate search.

    With feasible False, params/component/certificate are None, rate is
    -inf, and best_q records how close the search came to validity (the
    smallest product seen).  evaluations holds one row per coarse-grid
    point in EVAL_FIELDS order; they are meant for CSV export and are left
    out of to_dict.
    """

    feasible: bool
    rate: float
    params: Optional[BoundParams]
    component: Optional[UniformComponent]
    certificate: Optional[BoundCertificate]
    best_q: float
    evaluations: tuple

    def to_dict(self) -> dict:
        return {
            "feasible": self.feasible,
            "rate": self.rate,
            "params": self.params.to_dict() if self.params else None,
            "component": self.component.to_dict() if self.component else None,
            "certificate": (
                self.certificate.to_dict() if self.certificate else None
            ),
            "best_q": self.best_q,
        }


class _QEval:
    """Memoized validity evaluation for one (model, component) pair.

    The conditional-max transform depends only on (window width, theta *
    beta), so one cache spans the whole grid; a failed quadrature is cached
    as +inf (the conservative side).  Tracks the smallest product seen and
    the number of evaluations.
    """

    def __init__(self, model: InterArrivalModel, comp: UniformComponent):
        self.model = model
        self.comp = comp
        self.min_q = math.inf
        self.n_evals = 0
        self._cache = {}

    def _transform(self, model, width, gamma):
        key = (width, gamma)
        val = self._cache.get(key)
        if val is None:
            try:
                val = dist.conditional_max_laplace(model, width, gamma)
            except QuadratureError:
                val = math.inf
            self._cache[key] = val
        return val

    def radius(self, beta: float, delta: float) -> Optional[float]:
        try:
            r, _ = _radius_parts(self.model, beta, delta)
        except InvalidInputError:
            return None
        return r

    def q(self, beta: float, delta: float, theta: float, r=None) -> float:
        if r is None:
            r = self.radius(beta, delta)
            if r is None:
                return math.inf
        params = BoundParams(beta, delta, theta)
        val = validity_product(
            self.model, self.comp, params, r=r, transform=self._transform
        )
        self.n_evals += 1
        if val < self.min_q:
            self.min_q = val
        return val


def _theta_boundary(ev: _QEval, beta, delta, r, tlo, thi):
    """Largest feasible theta in [tlo, thi] at fixed (beta, delta).

    The validity product is nondecreasing in theta, so bisection against
    the q < 1 boundary applies; returns (theta, q) of the best feasible
    point found, or None when even tlo is infeasible.
    """
    q_lo = ev.q(beta, delta, tlo, r=r)
    if not q_lo < 1.0:
        return None
    q_hi = ev.q(beta, delta, thi, r=r)
    if q_hi < 1.0:
        return thi, q_hi
    lo, q_best = tlo, q_lo
    hi = thi
    for _ in range(_BISECT_ITERS):
        mid = 0.5 * (lo + hi)
        if not lo < mid < hi:
            break
        q_mid = ev.q(beta, delta, mid, r=r)
        if q_mid < 1.0:
            lo, q_best = mid, q_mid
        else:
            hi = mid
    return lo, q_best


def optimize_rate(
    model: InterArrivalModel, space: SearchSpace, budget: int = 2000
) -> OptimizeResult:
    """Maximize the certified rate over the search space.

    Three deterministic stages per component candidate: the coarse grid, a
    theta feasibility-boundary push at every grid (beta, delta) pair, and a
    simplex refinement of the leading candidates (budget caps its objective
    evaluations, split across starts) whose refined pairs are pushed again.
    Refinement never replaces a candidate with something worse.  Final ties
    prefer smaller beta, then smaller delta, theta, and earlier component.
    """
    if not space.components:
        raise InvalidInputError("search space has no component candidates")
    if budget < 0:
        raise InvalidInputError("budget must be nonnegative")
    for comp in space.components:
        if dist.verify_uniform_component(model, comp) < 0.0:
            raise InvalidInputError(
                f"component {comp.to_dict()} is not dominated by the density"
            )
    beta_range = space.beta_range
    if beta_range is None:
        beta_range = (1e-3, float(model.alpha))
    blo, bhi = beta_range
    dlo, dhi = space.delta_range
    tlo, thi = space.theta_range
    betas = [float(b) for b in np.geomspace(blo, bhi, space.n_beta)]
    deltas = [float(d) for d in np.linspace(dlo, dhi, space.n_delta)]
    thetas = [float(t) for t in np.linspace(tlo, thi, space.n_theta)]

    rows = []
    candidates = []
    evaluators = []
    for ci, comp in enumerate(space.components):
        ev = _QEval(model, comp)
        evaluators.append(ev)
        for b in betas:
            for d in deltas:
                r = ev.radius(b, d)
                for th in thetas:
                    if r is None:
                        q, rate = math.inf, -math.inf
                    else:
                        q = ev.q(b, d, th, r=r)
                        rate = BoundParams(b, d, th).rate if q < 1.0 else -math.inf
                    rows.append(
                        (b, d, th, comp.c, comp.L, comp.eta_tilde, q, rate)
                    )
                if r is None:
                    continue
                pushed = _theta_boundary(ev, b, d, r, tlo, thi)
                if pushed is not None:
                    th_b, q_b = pushed
                    candidates.append(
                        (BoundParams(b, d, th_b).rate, b, d, th_b, ci, q_b)
                    )

    # simplex refinement of the leading candidates; with none feasible,
    # start instead from the grid points closest to validity
    if candidates:
        starts = sorted(candidates, key=lambda s: (-s[0], s[1], s[2], s[3], s[4]))
    else:
        near = sorted(
            (row for row in rows if math.isfinite(row[6])),
            key=lambda row: (row[6], row[0], row[1], row[2]),
        )
        index = {
            (comp.c, comp.L, comp.eta_tilde): i
            for i, comp in enumerate(space.components)
        }
        starts = [
            (-math.inf, row[0], row[1], row[2], index[(row[3], row[4], row[5])], row[6])
            for row in near
        ]
    starts = starts[:_N_STARTS]
    degenerate_box = blo == bhi and dlo == dhi and tlo == thi
    per_start = budget // _N_STARTS if starts else 0
    if starts and not degenerate_box and per_start > 0:
        bounds = [(blo, bhi), (dlo, dhi), (tlo, thi)]
        for rate0, b0, d0, th0, ci, q0 in starts:
            ev = evaluators[ci]

            def neg_rate(v, _ev=ev):
                b = min(max(float(v[0]), blo), bhi)
                d = min(max(float(v[1]), dlo), dhi)
                th = min(max(float(v[2]), tlo), thi)
                q = _ev.q(b, d, th)
                if q < 1.0:
                    return -BoundParams(b, d, th).rate
                return 1e6 + min(q, 10.0)

            res = minimize(
                neg_rate,
                np.array([b0, d0, th0]),
                method="Nelder-Mead",
                bounds=bounds,
                options={"maxfev": per_start, "xatol": 1e-12, "fatol": 1e-15},
            )
            b1 = min(max(float(res.x[0]), blo), bhi)
            d1 = min(max(float(res.x[1]), dlo), dhi)
            r1 = ev.radius(b1, d1)
            if r1 is None:
                continue
            pushed = _theta_boundary(ev, b1, d1, r1, tlo, thi)
            if pushed is None:
                continue
            th1, q1 = pushed
            rate1 = BoundParams(b1, d1, th1).rate
            if rate1 > rate0:
                candidates.append((rate1, b1, d1, th1, ci, q1))

    evaluations = tuple(rows)
    min_q = min((ev.min_q for ev in evaluators), default=math.inf)
    if not candidates:
        return OptimizeResult(
            feasible=False, rate=-math.inf, params=None, component=None,
            certificate=None, best_q=min_q, evaluations=evaluations,
        )
    rate, b, d, th, ci, q = min(
        candidates, key=lambda s: (-s[0], s[1], s[2], s[3], s[4])
    )
    params = BoundParams(b, d, th)
    comp = space.components[ci]
    cert = assemble_certificate(model, comp, params)
    return OptimizeResult(
        feasible=True, rate=cert.rate, params=params, component=comp,
        certificate=cert, best_q=cert.q, evaluations=evaluations,
    )
