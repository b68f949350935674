import math

import numpy as np
import pytest

from lagflow.domains import ConvexDomain
from lagflow.errors import (ConvexityLost, GridTooCoarse, NotConverged, UnsupportedDomainPair)
from lagflow.flow import (FlowProblem, ForcingFunction, NodeKind, QuadraticInitial, build_grid,
                          discrete_hessian, enforce_boundary, full_neighborhood, grid_derivatives,
                          quadratic_initial, step)
from lagflow.operators import SpectralOperator

from conftest import TAU_IDS, TAUS, bump, radial

PURE = SpectralOperator(math.pi / 2)


@pytest.mark.parametrize("spacing,interior,boundary", [
    (0.5, 1, 8),
    (1.0 / 32, 2957, 248),
    (1.0 / 64, 12345, 504),
])
def test_disc_grid_counts(spacing, interior, boundary):
    c = build_grid(ConvexDomain.disc(), spacing).counts()
    assert (c["interior"], c["boundary"]) == (interior, boundary)


def test_ellipse_grid_counts():
    g = build_grid(ConvexDomain.ellipse(semi_axes=(2.0, 1.0)), 0.1)
    assert g.counts() == {"exterior": 372, "boundary": 112, "interior": 505}
    assert g.shape == (43, 23)


def test_grid_layout(disc_grid16):
    g = disc_grid16
    kind = g.kind
    # every interior node has its full 3x3 block active
    assert np.all(full_neighborhood(g.active)[kind == NodeKind.INTERIOR])
    # boundary points lie on the circle, ordered by arc parameter
    assert np.allclose(np.hypot(*g.boundary_points.T), 1.0)
    assert np.all(np.diff(g.boundary_arc) >= 0)
    # the lattice is centred on the domain
    centre = g.coords(g.nx // 2, g.ny // 2)
    assert np.allclose(centre, [0.0, 0.0])


def test_grid_too_coarse():
    with pytest.raises(GridTooCoarse):
        build_grid(ConvexDomain.disc(), 0.9)
    with pytest.raises(GridTooCoarse):
        build_grid(ConvexDomain.disc(), 0.1, min_interior=10 ** 6)
    with pytest.raises(ValueError):
        build_grid(ConvexDomain.disc(), 0.0)


def test_quadratic_initial_maps_boundary_to_boundary():
    om = ConvexDomain.ellipse((1.0, 0.0), (2.0, 1.0))
    ot = ConvexDomain.disc((0.0, 0.5), 1.5)
    q = quadratic_initial(om, ot)
    assert q.diag == (0.75, 1.5)
    pts = np.array([p.position for p in om.sample_boundary(50)])
    assert np.allclose(ot.h_eval(q.gradient(pts)), 0.0, atol=1e-14)
    assert np.allclose(q.hessian, np.diag([0.75, 1.5]))
    assert q(np.array([1.0, 0.0])) == pytest.approx(0.0)


def test_quadratic_initial_unsupported():
    class Other:
        kind = "polygon"
    with pytest.raises(UnsupportedDomainPair):
        quadratic_initial(Other(), ConvexDomain.disc())


def test_forcing():
    f = ForcingFunction.linear((0.3, -0.4))
    assert f(np.array([1.0, 1.0])) == pytest.approx(-0.1)
    assert f.grad_norm() == pytest.approx(0.5)
    assert f.extremes(ConvexDomain.disc()) == pytest.approx((-0.5, 0.5))
    assert f.oscillation(ConvexDomain.ellipse(semi_axes=(2.0, 1.0))) == pytest.approx(2 * math.hypot(0.6, 0.4))
    assert ForcingFunction.linear((0, 0)) == ForcingFunction.zero()


def test_discrete_hessian_quartic(disc):
    grid = build_grid(disc, 0.1)
    prob = FlowProblem(grid, disc, PURE)
    state = prob.initial_state(lambda x: x[..., 0] ** 4 + radial(x), enforce=False)
    i, j = np.argwhere(np.all(np.isclose(grid.positions, [0.5, 0.0]), axis=-1))[0]
    H = discrete_hessian(state, grid, (i, j))
    # (x+h)^4 - 2x^4 + (x-h)^4 = 12 x^2 h^2 + 2 h^4
    assert H.a11 == pytest.approx(3.0 + 0.02 + 1.0, rel=1e-10)
    assert H.a12 == pytest.approx(0.0, abs=1e-10)
    assert H.a22 == pytest.approx(1.0, rel=1e-10)
    with pytest.raises(ValueError):
        discrete_hessian(state, grid, tuple(divmod(int(grid.boundary[0]), grid.ny)))


def test_grid_derivatives_exact_on_quadratics():
    h = 0.1
    x = np.arange(-5, 6) * h
    X, Y = np.meshgrid(x, x, indexing="ij")
    u = 0.5 * X ** 2 + 0.3 * X * Y + 2 * Y ** 2 + X - Y
    d = grid_derivatives(u, h)
    assert np.all(np.isnan(d[:, 0, :]))
    c = (slice(1, -1), slice(1, -1))
    assert np.allclose(d[0][c], (X + 0.3 * Y + 1)[c])
    assert np.allclose(d[1][c], (0.3 * X + 4 * Y - 1)[c])
    assert np.allclose([d[2][c], d[3][c], d[4][c]], [[[1.0]], [[0.3]], [[4.0]]])


@pytest.mark.parametrize("coef", [0.6, 1.0, 1.7])
def test_enforce_boundary_radial(disc, disc_grid16, coef):
    prob = FlowProblem(disc_grid16, disc, PURE, tol_bc=1e-12)
    state = prob.initial_state(lambda x: coef * radial(x), enforce=False)
    if coef != 1.0:
        assert prob.boundary_residual(state.values) > 1e-3
    fixed, res = enforce_boundary(state, prob)
    assert res <= 1e-12
    du, _ = prob.boundary_derivatives(fixed.values)
    assert np.allclose(np.hypot(*du.T), 1.0, atol=1e-11)
    # interior values untouched
    g = disc_grid16
    assert np.array_equal(fixed.values.ravel()[g.interior], state.values.ravel()[g.interior])


def test_boundary_reconstruction_exact_on_quadratics(disc):
    om = ConvexDomain.ellipse((0.2, 0.1), (1.5, 1.0))
    grid = build_grid(om, 0.1)
    prob = FlowProblem(grid, disc, PURE)
    u = lambda x: 0.7 * x[..., 0] ** 2 - 0.2 * x[..., 0] * x[..., 1] + 1.1 * x[..., 1] ** 2 + x[..., 0]
    vals = grid.sample(u)
    du, hess = prob.boundary_derivatives(vals)
    p = grid.boundary_points
    assert np.allclose(du[:, 0], 1.4 * p[:, 0] - 0.2 * p[:, 1] + 1.0, atol=1e-11)
    assert np.allclose(du[:, 1], -0.2 * p[:, 0] + 2.2 * p[:, 1], atol=1e-11)
    assert np.allclose(hess, [1.4, -0.2, 2.2], atol=1e-9)


@pytest.mark.parametrize("tau", TAUS, ids=TAU_IDS)
def test_quadratic_is_stationary(disc, disc_grid16, tau):
    op = SpectralOperator(tau)
    prob = FlowProblem(disc_grid16, disc, op)
    state = prob.initial_state(radial)
    assert np.allclose(state.udot, op.eval([1.0, 1.0]), atol=1e-12)
    new, rep = step(state, prob)
    assert rep.dt_used > 0
    assert np.max(np.abs(new.values - state.values)) < 1e-13
    assert new.t == rep.t == rep.dt_used
    assert new.offset - state.offset == pytest.approx(rep.dt_used * op.eval([1.0, 1.0]), rel=1e-12)
    assert rep.min_obliqueness == pytest.approx(1.0, abs=1e-12)


def test_ellipse_target_is_stationary(disc):
    ot = ConvexDomain.ellipse(semi_axes=(2.0, 1.0))
    grid = build_grid(disc, 1.0 / 16)
    prob = FlowProblem(grid, ot, PURE)
    res = prob.run(prob.initial_state(quadratic_initial(disc, ot)), tol_c=1e-10)
    assert res.converged and res.steps == 0
    assert res.c_infinity == pytest.approx(math.atan(2.0) + math.atan(1.0), abs=1e-12)


def test_inverse_branch_speed(disc, disc_grid16):
    prob = FlowProblem(disc_grid16, disc, SpectralOperator(math.pi / 4))
    res = prob.run(prob.initial_state(bump(0.01)), tol_c=1e-9, t_max=50.0)
    assert res.converged
    assert res.c_infinity == pytest.approx(-math.sqrt(2), abs=1e-8)


def test_run_records_reports(disc, disc_grid16):
    prob = FlowProblem(disc_grid16, disc, PURE)
    seen = []
    res = prob.run(prob.initial_state(bump(0.01)), tol_c=1e-6, record_every=10,
                   monitor=lambda s, r: seen.append(r.t))
    assert res.converged
    assert len(seen) == len(res.reports)
    assert seen[0] == 0.0 and seen[-1] == res.state.t
    assert res.reports[-1].osc_udot < 1e-6
    osc = [r.osc_udot for r in res.reports]
    assert all(b <= a + 1e-12 for a, b in zip(osc, osc[1:]))


def test_gauge_invariance(disc, disc_grid16):
    prob = FlowProblem(disc_grid16, disc, PURE, ForcingFunction.linear((0.05, 0.0)))
    a = prob.run(prob.initial_state(bump(0.01)), tol_c=1e-10)
    b = prob.run(prob.initial_state(lambda x: bump(0.01)(x) + 1.0), tol_c=1e-10)
    assert a.converged and b.converged
    assert abs(a.c_infinity - b.c_infinity) < 1e-10
    act = disc_grid16.active
    diff = (b.state.u - a.state.u)[act]
    # the shift survives up to time-grid rounding
    assert np.max(np.abs(diff - 1.0)) < 1e-9


def test_convexity_lost(disc, disc_grid16):
    prob = FlowProblem(disc_grid16, disc, PURE)
    state = prob.initial_state(bump(0.05))
    assert not state.healthy
    with pytest.raises(ConvexityLost):
        prob.run(state)
    with pytest.raises(ConvexityLost):
        prob.step(state)


def test_not_converged_strict(disc, disc_grid16):
    prob = FlowProblem(disc_grid16, disc, PURE)
    state = prob.initial_state(bump(0.01))
    res = prob.run(state, t_max=1e-3)
    assert not res.converged and res.state.t > 1e-3
    with pytest.raises(NotConverged) as info:
        prob.run(state, t_max=1e-3, strict=True)
    assert info.value.result.steps == res.steps
    assert prob.run(state, max_steps=3).steps == 3


def test_invalid_cfl(disc, disc_grid16):
    prob = FlowProblem(disc_grid16, disc, PURE)
    with pytest.raises(ValueError):
        prob.step(prob.initial_state(radial), cfl=1.5)


@pytest.mark.slow
def test_refinement_error_decreases(disc):
    errs = []
    for h in (0.1, 0.05):
        grid = build_grid(disc, h)
        prob = FlowProblem(grid, disc, PURE)
        res = prob.run(prob.initial_state(bump(0.015)), tol_c=1e-10)
        assert res.converged
        errs.append(abs(res.c_infinity - math.pi / 2))
    # the limit is exact on the discrete quadratic; what remains is stopping noise
    floor = 1e-8
    assert errs[1] <= max(errs[0], floor)


def test_forced_speed_at_start(disc, disc_grid16):
    f = ForcingFunction.linear((0.01, 0.0))
    prob = FlowProblem(disc_grid16, disc, PURE, f)
    state = prob.initial_state(radial)
    x = disc_grid16.flat_positions(disc_grid16.interior)
    _, rep = prob.step(state)
    assert prob.report(state).c_estimate == pytest.approx(math.pi / 2 - float(np.mean(f(x))), abs=1e-14)
    assert rep.c_estimate == pytest.approx(math.pi / 2 - float(np.mean(f(x))), abs=1e-6)


def test_constant_does_not_change_boundary_residual(disc, disc_grid16):
    prob = FlowProblem(disc_grid16, disc, PURE)
    a = disc_grid16.sample(radial)
    b = disc_grid16.sample(lambda x: radial(x) + 0.01)
    assert prob.boundary_residual(a) < 1e-10
    assert prob.boundary_residual(b) == pytest.approx(prob.boundary_residual(a), abs=1e-13)


def test_gauge_leaves_reports_unchanged(disc, disc_grid16):
    prob = FlowProblem(disc_grid16, disc, PURE, ForcingFunction.linear((0.05, 0.0)))
    a = prob.run(prob.initial_state(bump(0.01)), max_steps=100)
    b = prob.run(prob.initial_state(lambda x: bump(0.01)(x) + 1.0), max_steps=100)
    assert len(a.reports) == len(b.reports)
    for ra, rb in zip(a.reports, b.reports):
        # sampling u0 + 1 already rounds at the 1e-16 level, so equality is to roundoff
        for name, va in vars(ra).items():
            assert va == pytest.approx(getattr(rb, name), rel=1e-12, abs=1e-12), name
