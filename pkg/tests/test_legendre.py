import math

import numpy as np
import pytest

from lagflow.checks import INVOLUTION_C, ProbeField, all_passed, verify_legendre
from lagflow.domains import ConvexDomain
from lagflow.errors import NonConvexDual
from lagflow.flow import FlowProblem, ForcingFunction, build_grid
from lagflow.legendre import (collar_mask, dual_flow_residual, gradient_inversion_error,
                              involution_error, legendre_transform, reciprocity_residual)
from lagflow.nodefile import DUAL_TAG, read_nodes
from lagflow.operators import SpectralOperator

from conftest import TAU_IDS, TAUS

H = 1.0 / 32


@pytest.fixture(scope="module")
def setting():
    omega = ConvexDomain.disc()
    return omega, build_grid(omega, H)


def _dual(field, omega, grid):
    tgrid = build_grid(field.image_domain(omega), H)
    vals = grid.sample(field)
    return vals, legendre_transform(vals, grid, tgrid)


def test_quadratic_conjugate_is_exact(setting):
    omega, grid = setting
    field = ProbeField.parse("quadratic:2,0.5")
    vals, dual = _dual(field, omega, grid)
    y = dual.grid.positions[dual.valid]
    exact = 0.5 * (y[:, 0] ** 2 / 2.0 + y[:, 1] ** 2 / 0.5)
    assert dual.valid.sum() > 100
    assert np.max(np.abs(dual.values[dual.valid] - exact)) < 1e-12
    assert involution_error(vals, grid, dual) < 1e-12
    assert reciprocity_residual(vals, grid, dual) < 1e-9
    assert gradient_inversion_error(vals, grid, dual) < 1e-10


@pytest.mark.parametrize("field", ["quartic:0.1", "exp:1,0.5"])
def test_second_order_involution(setting, field):
    omega, grid = setting
    vals, dual = _dual(ProbeField.parse(field), omega, grid)
    assert involution_error(vals, grid, dual) <= INVOLUTION_C * H * H
    assert reciprocity_residual(vals, grid, dual) <= 10 * H
    assert gradient_inversion_error(vals, grid, dual) <= 10 * H


def test_invalid_nodes_outside_gradient_image(setting):
    omega, grid = setting
    field = ProbeField.parse("quadratic:1,1")
    big = build_grid(ConvexDomain.disc(radius=1.5), H)
    dual = legendre_transform(grid.sample(field), grid, big)
    r = np.hypot(*big.positions.T).T
    assert not np.any(dual.valid & (r > 1.0 + 1e-9))
    assert np.all(np.isnan(dual.values[~dual.valid & big.active]))
    assert np.all(dual.argmax[~dual.valid] == -1)


def test_collar_mask(setting):
    _, grid = setting
    m = collar_mask(grid)
    assert m.sum() < grid.counts()["interior"]
    assert not np.any(m & (grid.kind != 2))


def test_non_convex_dual_detected(setting):
    omega, grid = setting
    vals, dual = _dual(ProbeField.parse("quadratic:1,1"), omega, grid)
    flipped = type(dual)(dual.grid, -dual.values, dual.valid, dual.argmax)
    with pytest.raises(NonConvexDual):
        reciprocity_residual(vals, grid, flipped)


@pytest.mark.parametrize("tau", TAUS, ids=TAU_IDS)
def test_dual_flow_residual_quadratic(setting, tau):
    omega, grid = setting
    op = SpectralOperator(tau)
    field = ProbeField.parse("quadratic:1.5,0.75")
    vals, dual = _dual(field, omega, grid)
    for f in (ForcingFunction.zero(), ForcingFunction.linear((0.02, 0.01))):
        prob = FlowProblem(grid, dual.grid.domain, op, f)
        state = prob.initial_state(vals, enforce=False)
        # udot is read at the nearest source node x*, f(Du~) at the exact preimage
        bound = 1e-9 + f.grad_norm() * H / math.sqrt(2)
        assert dual_flow_residual(state, dual, op, f, grid) < bound


def test_dual_save(setting, tmp_path):
    omega, grid = setting
    _, dual = _dual(ProbeField.parse("exp:1,0"), omega, grid)
    dual.save(tmp_path / "dual.txt", t=2.0)
    vals, mask, spacing, t = read_nodes(tmp_path / "dual.txt", tag=DUAL_TAG)
    assert np.array_equal(mask, dual.valid)
    assert np.array_equal(vals[mask], dual.values[mask])
    assert (spacing, t) == (H, 2.0)


def test_probe_field_parse():
    assert ProbeField.parse("quartic:0.2") == ProbeField("quartic", (0.2,))
    for bad in ("cubic:1", "quadratic:1", "quadratic:1,-1", "exp:"):
        with pytest.raises(ValueError):
            ProbeField.parse(bad)
    f = ProbeField.parse("exp:1,2")
    x = np.array([0.3, -0.2])
    g = np.array([(f(x + e) - f(x - e)) / 2e-6 for e in np.eye(2) * 1e-6])
    assert np.allclose(f.gradient(x), g, atol=1e-8)


@pytest.mark.parametrize("field", ["quadratic:1,1", "quadratic:2,0.5", "quartic:0.1", "exp:1,0.5"])
@pytest.mark.parametrize("tau", [math.pi / 8, math.pi / 2], ids=["log", "pure"])
def test_verify_legendre(field, tau):
    rows = verify_legendre(ProbeField.parse(field), H, tau)
    assert all_passed(rows), "\n".join(r.line() for r in rows)
