import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bremermann import (
    BoundaryTrace,
    DomainSpec,
    EnvelopeConfig,
    ScalarField,
    build_grid,
    circle_mean,
    harmonic_solution,
    max_glue,
    psh_envelope,
    psh_test,
    psuperh_envelope,
    q_psh_envelope,
    read_field_csv,
)
from bremermann.envelope import psh_defect
from bremermann.errors import GlueHypothesisFailed, InvalidQ, NegativeTrace


@pytest.fixture(scope="module")
def disc():
    return build_grid(DomainSpec("ball", 1, {"radius": 1.0}), [[-1.2, 1.2]] * 2, 0.1)


@pytest.fixture(scope="module")
def coarse():
    return build_grid(DomainSpec("ball", 1, {"radius": 1.0}), [[-1.2, 1.2]] * 2, 0.25)


def x1(X):
    return np.atleast_2d(X)[:, 0]


def test_linear_trace_reproduced(disc):
    f = psh_envelope(disc, lambda X: 2.0 + x1(X))
    assert np.max(np.abs(f.values - (2.0 + x1(disc.node_points)))) < 1e-10


def test_constant_boundary_gives_constant_envelope(disc):
    # |z|^2 = 1 on the unit circle
    f = psh_envelope(disc, lambda X: np.sum(np.atleast_2d(X) ** 2, axis=1))
    assert np.max(np.abs(f.values - 1.0)) < 1e-9


def test_envelope_passes_its_own_test(disc):
    f = psh_envelope(disc, lambda X: np.abs(np.atleast_2d(X)[:, 1]))
    assert psh_test(f)["pass"]


def test_concave_field_fails_psh_test(disc):
    f = ScalarField.from_function(disc, lambda X: 1.0 - np.sum(np.atleast_2d(X) ** 2, axis=1))
    rep = psh_test(f)
    assert not rep["pass"] and rep["worst_defect"] > 1e-3


def test_sub_harmonic_super_ordering(disc):
    h = lambda X: np.abs(np.atleast_2d(X)[:, 1]) + 0.3 * np.atleast_2d(X)[:, 0] ** 2
    lo = psh_envelope(disc, h)
    mid = harmonic_solution(disc, h)
    hi = psuperh_envelope(disc, h)
    assert np.all(lo.values <= mid.values + 1e-8)
    assert np.all(mid.values <= hi.values + 1e-8)


@settings(max_examples=8, deadline=None)
@given(st.floats(0.0, 1.0), st.floats(0.0, 2.0), st.floats(0.0, 3.0))
def test_monotone_and_translation_equivariant(coarse, a, b, c):
    base = lambda X: a * np.abs(np.atleast_2d(X)[:, 0]) + b * np.atleast_2d(X)[:, 1] ** 2
    f = psh_envelope(coarse, base)
    g = psh_envelope(coarse, lambda X: base(X) + c)
    tol = 1e-6 * (1 + a + b + c)
    np.testing.assert_allclose(g.values, f.values + c, atol=tol)
    bigger = psh_envelope(coarse, lambda X: base(X) + np.abs(np.atleast_2d(X)[:, 1]))
    assert np.all(f.values <= bigger.values + tol)


def test_circle_mean_of_linear_field(disc):
    f = ScalarField.from_function(disc, lambda X: 1.0 + 3.0 * x1(X) - np.atleast_2d(X)[:, 1])
    assert circle_mean(f, [0.3, -0.2], [1.0]) == pytest.approx(1.0 + 0.9 + 0.2, abs=1e-12)


def test_negative_trace_on_truncated_grid():
    hp = DomainSpec("halfspace", 1, {"normal": [1.0, 0.0]})
    g = build_grid(hp, [[-0.1, 1.0], [-1.0, 1.0]], 0.25)
    with pytest.raises(NegativeTrace):
        psh_envelope(g, -1.0)


def test_invalid_q(disc):
    with pytest.raises(InvalidQ):
        q_psh_envelope(disc, 1.0, 1)


def test_max_glue_rejects_bad_boundary(disc):
    u = psh_envelope(disc, 1.0)
    v = ScalarField(disc, np.full(u.values.size, 2.0))
    mask = np.linalg.norm(disc.node_points, axis=1) < 0.5
    with pytest.raises(GlueHypothesisFailed):
        max_glue(u, v, mask)
    low = ScalarField(disc, np.full(u.values.size, 0.5))
    out = max_glue(u, low, mask)
    assert out.meta["glue_psh"]["pass"]


def test_config_validation():
    with pytest.raises(ValueError):
        EnvelopeConfig(quad_points=7).validate(1)
    with pytest.raises(ValueError):
        EnvelopeConfig(delta=5.0).validate(1)
    assert EnvelopeConfig.from_dict(EnvelopeConfig().to_dict()) == EnvelopeConfig()
    assert EnvelopeConfig().tolerance([0.0, 3.0]) == pytest.approx(4e-8)


def test_field_csv_round_trip(disc, tmp_path):
    f = psh_envelope(disc, lambda X: 1.0 + x1(X))
    path = tmp_path / "phi.csv"
    f.to_csv(path)
    flat, classes, coords, values = read_field_csv(path)
    order = np.argsort(disc.node_flat, kind="stable")
    np.testing.assert_array_equal(flat, disc.node_flat[order])
    np.testing.assert_array_equal(values, f.values[order])
    np.testing.assert_array_equal(coords, disc.node_points[order])
    assert set(classes) == {"Interior", "Boundary"}
    assert f.to_csv() == path.read_text()


def test_trace_size_checked(disc):
    with pytest.raises(ValueError):
        BoundaryTrace(disc, np.zeros(3))
