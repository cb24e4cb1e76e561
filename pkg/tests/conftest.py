"""Shared fixtures: the three reference models with calibrated bound parameters.

Each case bundles an inter-arrival model, a uniform component that its
density genuinely dominates, and a parameter triple known to produce a
valid certificate.  The numbers are frozen so tests are reproducible;
they were found with the optimizer and rounded by hand.
"""

import pytest

from renewbound import dist
from renewbound.bounds import BoundParams, assemble_certificate
from renewbound.dist import UniformComponent


def exp_case():
    model = dist.exponential(1.0)
    comp = UniformComponent(c=1.0, L=1.0, eta_tilde=2e-2)
    params = BoundParams(beta=0.5, delta=0.5, theta=1.2e-7)
    return model, comp, params, (1.0, 3.0, 6.0)


def uniform_case():
    model = dist.uniform(1.0, 2.0)
    comp = UniformComponent(c=1.5, L=0.5, eta_tilde=0.9)
    params = BoundParams(beta=1.0, delta=0.5, theta=7e-3)
    return model, comp, params, (0.5, 2.0, 4.0)


def folded_case():
    model = dist.folded_gaussian()
    comp = UniformComponent(c=0.5, L=0.5, eta_tilde=0.435546)
    params = BoundParams(beta=1.0, delta=0.5, theta=1.2e-3)
    return model, comp, params, (0.5, 2.0, 4.0)


CASE_FACTORIES = {
    "exponential": exp_case,
    "uniform": uniform_case,
    "folded_gaussian": folded_case,
}


@pytest.fixture(scope="session", params=sorted(CASE_FACTORIES))
def case(request):
    """(name, model, component, params, x values) for each reference model."""
    name = request.param
    model, comp, params, xs = CASE_FACTORIES[name]()
    return name, model, comp, params, xs


@pytest.fixture(scope="session")
def exp_model():
    return dist.exponential(1.0)


@pytest.fixture(scope="session")
def uniform_model():
    return dist.uniform(1.0, 2.0)


@pytest.fixture(scope="session")
def folded_model():
    return dist.folded_gaussian()


@pytest.fixture(scope="session")
def uniform_cert():
    model, comp, params, _ = uniform_case()
    return assemble_certificate(model, comp, params)


@pytest.fixture(scope="session")
def exp_cert():
    model, comp, params, _ = exp_case()
    return assemble_certificate(model, comp, params)


@pytest.fixture(scope="session")
def folded_cert():
    model, comp, params, _ = folded_case()
    return assemble_certificate(model, comp, params)
