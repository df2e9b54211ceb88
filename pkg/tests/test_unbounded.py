import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bremermann import (
    BarrierCertificate,
    DomainSpec,
    GrowthProfile,
    boundary_family,
    build_exhaustion,
    build_grid,
    continuity_certificate,
    continuous_solution,
    envelope_sup_over_extensions,
    exhaustion_grid,
    growth_profile,
    normalize_domain,
)
from bremermann.errors import CapEscalationDiverged, EmptyPrefix, InsufficientTail, RegionContainmentFailed
from bremermann.unbounded import SURFACE, _barrier_constant, _laplacian_z1, barrier_value


@pytest.fixture(scope="module")
def par():
    return normalize_domain(DomainSpec("paraboloid", 1, {"scale": 1.0}))


@pytest.fixture(scope="module")
def strip():
    return normalize_domain(DomainSpec("strip_convex", 1, {}))


def bump(X):
    X = np.atleast_2d(X)
    return 1.0 / (1.0 + np.sum(X**2, axis=1))


def _params(kind, eps, z0, **kw):
    p = dict(kw)
    p["k"] = _barrier_constant(kind, eps, z0, p)
    return p


@settings(max_examples=50, deadline=None)
@given(st.floats(1e-3, 10), st.floats(0.1, 50), st.floats(-5, 5))
def test_linear_anchor(eps, xi, zeta):
    p = _params("linear", eps, [xi, zeta])
    assert barrier_value("linear", p, eps, np.array([[xi, zeta]]))[0] == pytest.approx(-eps, rel=1e-14)


@settings(max_examples=50, deadline=None)
@given(st.floats(1e-3, 10), st.floats(0.0, 5), st.floats(-1, 1), st.integers(1, 3))
def test_polynomial_anchor(eps, xi, t, m):
    a, alpha = 1.0, 2.0
    X0 = xi + alpha + a
    zeta = 0.9 * t * X0 / np.sqrt(m * (2 * m - 1))
    p = _params("polynomial", eps, [xi, zeta], m=m, a=a, alpha=alpha, beta=0.0)
    r = barrier_value("polynomial", p, eps, np.array([[xi, zeta]]))[0]
    assert abs(r + eps) <= 1e-10 * eps


@settings(max_examples=50, deadline=None)
@given(st.floats(1e-3, 10), st.floats(0, 5), st.floats(-1, 1), st.floats(0.1, 0.99))
def test_exponential_anchor_and_sign(eps, xi, zeta, alpha):
    p = _params("exponential", eps, [xi, zeta], a=1.0, alpha=alpha)
    assert p["k"] > 0
    r = barrier_value("exponential", p, eps, np.array([[xi, zeta]]))[0]
    assert abs(r + eps) <= 1e-12 * max(1.0, eps)


def test_laplacian_matches_closed_forms():
    rng = np.random.default_rng(3)
    P = np.column_stack([rng.uniform(0.5, 3, 40), rng.uniform(-0.5, 0.5, 40)])
    pp = _params("polynomial", 0.1, [1.0, 0.0], m=2, a=1.0, alpha=2.0, beta=0.0)
    # Delta[k (3 Y^2 X^2 - X^4)] = 12 k Y^2 for m = 2
    np.testing.assert_allclose(_laplacian_z1("polynomial", pp, 0.1, P), 12 * pp["k"] * P[:, 1] ** 2,
                               atol=1e-8)
    pe = _params("exponential", 0.1, [1.0, 0.0], a=1.0, alpha=0.9)
    want = pe["k"] * 0.9**4 * P[:, 1] ** 2 * np.exp(0.9 * P[:, 0])
    np.testing.assert_allclose(_laplacian_z1("exponential", pe, 0.1, P), want, atol=1e-8)


def test_linear_certificate_for_bounded_profile(par):
    xs = np.linspace(0.5, 1000.0, 64)
    cert = continuity_certificate(par, GrowthProfile(xs, np.ones_like(xs)), "linear", 0.1, [1.0, 0.0])
    assert cert.granted
    back = BarrierCertificate.from_dict(json.loads(cert.to_json()))
    checks, same = back.replay()
    assert same and checks == cert.checks


def test_exponential_rejected_for_fast_growth(strip):
    xs = np.linspace(1.0, 200.0, 64)
    cert = continuity_certificate(strip, GrowthProfile.from_function(xs, lambda x: np.exp(2 * x)),
                                  "exponential", 0.1, [1.0, 0.0], {"a": 1.0, "alpha": 0.9})
    assert not cert.granted and not cert.checks["growth_domination_ok"]
    assert cert.checks["value_at_z0_ok"] and cert.checks["psh_ok"]
    assert any("R(z0)=0.0" in n for n in cert.notes)


def test_exponential_granted_for_slow_growth(strip):
    xs = np.linspace(1.0, 60.0, 64)
    cert = continuity_certificate(strip, GrowthProfile.from_function(xs, lambda x: np.exp(0.5 * x)),
                                  "exponential", 0.1, [1.0, 0.0], {"a": 1.0, "alpha": 0.9})
    assert cert.granted, cert.details


def test_certificate_input_errors(par, strip):
    short = GrowthProfile(np.arange(1.0, 5.0), np.ones(4))
    with pytest.raises(InsufficientTail):
        continuity_certificate(par, short, "linear", 0.1, [1.0, 0.0])
    xs = np.geomspace(1, 1e3, 16)
    with pytest.raises(RegionContainmentFailed):
        continuity_certificate(par, GrowthProfile(xs, xs**2), "polynomial", 0.1, [1.0, 0.0],
                               {"m": 2, "a": 1.0, "alpha": 0.0})
    with pytest.raises(ValueError):
        continuity_certificate(par, GrowthProfile(xs, xs), "linear", -1.0, [1.0, 0.0])


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-100, 100), min_size=2, max_size=30))
def test_growth_profile_from_function_is_nondecreasing(vals):
    xs = np.arange(len(vals), dtype=float)
    prof = GrowthProfile.from_function(xs, lambda x: np.asarray(vals))
    assert np.all(np.diff(prof.g) >= 0)
    assert prof.g[-1] == max(vals)


def test_growth_profile_on_grid(par):
    g = build_grid(par, [[-0.25, 3.0], [-2.0, 2.0]], 0.125)
    xs = np.array([0.0, 1.0, 2.0])
    prof = growth_profile(g, lambda X: np.atleast_2d(X)[:, 0], xs)
    surf = g.boundary_points[g.boundary_part == SURFACE]
    for x, v in zip(xs, prof.g):
        assert v == surf[surf[:, 0] <= x, 0].max()
    with pytest.raises(EmptyPrefix):
        growth_profile(g, bump, np.array([-1.0]))


def test_boundary_family_is_monotone_in_cap(par):
    plan = build_exhaustion(par, nu_max=2, slab_step=1.0)
    g = exhaustion_grid(par, plan, 1, 0.25)
    lo = boundary_family(plan, 1, g, bump, 2.0, 0.5)
    hi = boundary_family(plan, 1, g, bump, 5.0, 0.5)
    assert np.all(lo.values <= hi.values)
    surf = g.boundary_part == SURFACE
    np.testing.assert_array_equal(lo.values[surf], bump(g.boundary_points[surf]))
    exact = boundary_family(plan, 1, g, bump, 5.0, 0.0)
    assert np.all(exact.values[~surf] == 5.0)


def test_caps_diverge_in_one_variable(par):
    # a positive harmonic function vanishing on the parabola absorbs any cap
    plan = build_exhaustion(par, nu_max=2, slab_step=1.0)
    with pytest.raises(CapEscalationDiverged):
        envelope_sup_over_extensions(plan, 1, bump, domain=par, spacing=0.25, max_caps=5)


def test_continuous_solution_on_disc():
    g = build_grid(DomainSpec("ball", 1, {"radius": 1.0}), [[-1.2, 1.2]] * 2, 0.1)
    u = continuous_solution(g, lambda X: 1.0 + np.atleast_2d(X)[:, 0])
    assert u.meta["boundary_residual"] <= 1e-12
    assert u.meta["psh_ok"]
