import numpy as np
import pytest

from lagflow import kernels
from lagflow.domains import ConvexDomain
from lagflow.flow import FlowProblem, ForcingFunction, build_grid
from lagflow.operators import SpectralOperator

from conftest import TAU_IDS, TAUS, bump

compiled = pytest.mark.skipif("compiled" not in kernels.BACKENDS, reason="extension not built")


def test_backend_selection():
    assert kernels.get("python") is kernels.BACKENDS["python"]
    assert kernels.get() is kernels.BACKENDS[kernels.DEFAULT]
    with pytest.raises(ValueError):
        kernels.get("fortran")


def _problem(tau, backend, threads=1, target=None):
    disc = ConvexDomain.disc()
    grid = build_grid(disc, 1.0 / 24)
    return FlowProblem(grid, target or disc, SpectralOperator(tau), ForcingFunction.linear((0.02, -0.01)),
                       backend=backend, threads=threads)


@compiled
@pytest.mark.parametrize("tau", TAUS, ids=TAU_IDS)
def test_rhs_parity(tau):
    a, b = _problem(tau, "compiled"), _problem(tau, "python")
    vals = a.grid.sample(bump(0.01))
    flat = np.ascontiguousarray(vals.ravel())
    for x, y in zip(a._rhs(flat), b._rhs(flat)):
        assert np.allclose(x, y, rtol=1e-14, atol=1e-14)


@compiled
def test_sweep_parity():
    target = ConvexDomain.ellipse(semi_axes=(1.3, 0.8))
    a, b = _problem(1.0, "compiled", target=target), _problem(1.0, "python", target=target)
    vals = a.grid.sample(bump(0.01)).ravel()
    fa, fb = vals.copy(), vals.copy()
    ra, _ = a._sweep(fa)
    rb, _ = b._sweep(fb)
    assert ra < 1e-10 and rb < 1e-10
    assert np.allclose(fa, fb, rtol=0, atol=1e-12)


@compiled
def test_run_parity():
    a, b = _problem(3 * np.pi / 8, "compiled"), _problem(3 * np.pi / 8, "python")
    ra = a.run(a.initial_state(bump(0.01)), max_steps=40)
    rb = b.run(b.initial_state(bump(0.01)), max_steps=40)
    assert np.allclose(ra.state.u, rb.state.u, rtol=0, atol=1e-12)


@compiled
@pytest.mark.parametrize("threads", [2, 4])
def test_thread_count_is_bitwise_invariant(threads):
    a, b = _problem(np.pi / 2, "compiled"), _problem(np.pi / 2, "compiled", threads)
    ra = a.run(a.initial_state(bump(0.01)), max_steps=30)
    rb = b.run(b.initial_state(bump(0.01)), max_steps=30)
    assert np.array_equal(ra.state.values, rb.state.values)
    assert ra.state.offset == rb.state.offset
    assert ra.c_infinity == rb.c_infinity
