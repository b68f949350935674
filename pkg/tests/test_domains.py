import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lagflow.checks import all_passed, verify_domain
from lagflow.domains import ConvexDomain, DomainKind


def test_disc_normalization():
    d = ConvexDomain.disc()
    assert d.kind is DomainKind.DISC
    assert d.scale == 0.5
    assert d.theta == 1.0
    assert d.grad_bounds == (1.0, 1.0)
    assert d.h_eval([0.0, 0.0]) == 0.5
    assert d.h_eval([1.0, 0.0]) == 0.0
    pts = np.array([p.position for p in d.sample_boundary(64)])
    assert np.allclose(np.hypot(*d.h_grad(pts).T), 1.0, rtol=0, atol=1e-14)


def test_scaled_disc():
    d = ConvexDomain.disc((1.0, -2.0), 3.0)
    assert d.scale == 1.5
    assert d.theta == pytest.approx(1.0 / 3.0)
    assert d.contains([1.0, -2.0]) and not d.contains([4.5, -2.0])
    assert d.h_eval([4.0, -2.0]) == pytest.approx(0.0, abs=1e-15)


def test_ellipse_constants():
    e = ConvexDomain.ellipse((0.0, 0.0), (2.0, 1.0))
    k0 = 0.5 * math.sqrt(2.0)
    assert e.scale == pytest.approx(k0)
    assert e.theta == pytest.approx(2 * k0 / 4.0)
    assert e.grad_bounds == pytest.approx((k0, 2 * k0))
    assert np.allclose(e.h_hess(), np.diag([-2 * k0 / 4, -2 * k0]))
    assert e.bounding_box == ((-2.0, 2.0), (-1.0, 1.0))
    assert e.diameter == 4.0


def test_invalid_domains():
    with pytest.raises(ValueError):
        ConvexDomain.disc(radius=0.0)
    with pytest.raises(ValueError):
        ConvexDomain.ellipse(semi_axes=(1.0, -1.0))
    with pytest.raises(ValueError):
        ConvexDomain(DomainKind.DISC, (0.0, 0.0), (1.0, 2.0))
    with pytest.raises(ValueError):
        ConvexDomain.disc().sample_boundary(2)


def test_boundary_points_and_normals():
    e = ConvexDomain.ellipse((0.5, 0.0), (2.0, 1.0))
    bp = e.boundary_at(math.pi / 2)
    assert np.allclose(bp.position, [0.5, 1.0])
    assert np.allclose(bp.inward_normal, [0.0, -1.0])
    assert bp.arc_parameter == pytest.approx(math.pi / 2)


@pytest.mark.parametrize("point,expected", [
    ((2.0, 0.0), (1.0, 0.0)),
    ((0.3, 0.4), (0.6, 0.8)),
    ((0.0, -5.0), (0.0, -1.0)),
])
def test_disc_projection(point, expected):
    assert np.allclose(ConvexDomain.disc().project_to_boundary(point).position, expected, atol=1e-15)


def test_ellipse_projection_on_axis():
    e = ConvexDomain.ellipse(semi_axes=(2.0, 1.0))
    assert np.allclose(e.project_to_boundary([3.0, 0.0]).position, [2.0, 0.0], atol=1e-12)
    assert np.allclose(e.project_to_boundary([0.0, 0.5]).position, [0.0, 1.0], atol=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3))
def test_ellipse_projection_is_stationary(x, y):
    e = ConvexDomain.ellipse((0.2, -0.1), (2.0, 1.0))
    p = np.array([x, y])
    bp = e.project_to_boundary(p)
    assert abs(e.h_eval(bp.position)) < 1e-12
    r = p - bp.position
    # the residual is normal to the boundary
    tangent = np.array([-bp.inward_normal[1], bp.inward_normal[0]])
    assert abs(r @ tangent) < 1e-9 * (1.0 + np.hypot(*r))


@pytest.mark.parametrize("domain", [
    ConvexDomain.disc(),
    ConvexDomain.disc((0.5, 0.5), 2.0),
    ConvexDomain.ellipse((0.0, 0.0), (2.0, 1.0)),
    ConvexDomain.ellipse((1.0, -1.0), (0.5, 1.5)),
], ids=["unit-disc", "disc", "ellipse", "tall-ellipse"])
def test_verify_domain(domain):
    rows = verify_domain(domain, samples=90)
    assert all_passed(rows), "\n".join(r.line() for r in rows)
