"""Exponential convergence-rate certificates for renewal processes.

The library certifies how fast a renewal process forgets its initial delay:
given an inter-arrival law and a uniform density component, it produces an
explicit exponential bound on the coupling tail of two delayed copies,
optimizes the bound's free parameters, and checks every certified
inequality against direct simulation of the underlying two-step coupling.

Modules: dist (inter-arrival models, transforms, sampling), bounds
(certificates and their closed-form ingredients), optimize (rate search),
sim (coupling simulation and empirical checks), cli (batch pipeline).
"""

from . import bounds, dist, optimize, sim
from ._kernel import backend_name as kernel_backend
from .bounds import (
    BoundCertificate,
    BoundParams,
    InvalidCertificateError,
    assemble_certificate,
)
from .dist import (
    CapExceededError,
    InterArrivalModel,
    InvalidInputError,
    QuadratureError,
    UniformComponent,
)
from .optimize import OptimizeResult, SearchSpace, optimize_rate
from .rng import SeedableRngStream

__all__ = [
    "BoundCertificate",
    "BoundParams",
    "CapExceededError",
    "InterArrivalModel",
    "InvalidCertificateError",
    "InvalidInputError",
    "OptimizeResult",
    "QuadratureError",
    "SearchSpace",
    "SeedableRngStream",
    "UniformComponent",
    "assemble_certificate",
    "bounds",
    "dist",
    "kernel_backend",
    "optimize",
    "optimize_rate",
    "sim",
    "__version__",
]

__version__ = "0.1.0"
