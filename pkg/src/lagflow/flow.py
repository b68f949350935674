"""Explicit time stepping of ``u_t = F(lambda(D^2 u)) - f`` with ``h(Du) = 0`` on the boundary.

The state is stored as ``values + offset``: every step moves the interior by
``dt * (udot - c)`` and adds ``dt * c`` to the scalar offset, ``c`` being the
interior mean of ``udot``. The translation part therefore never touches the
node values, which keeps them O(1) over long runs and leaves the boundary
sweep with a warm start.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels
from .boundary import BoundaryStencil, build_stencil
from .domains import ConvexDomain, DomainKind
from .errors import (ConvexityLost, GridTooCoarse, NewtonDiverged, NotConverged,
                     ObliquenessLost, UnsupportedDomainPair)
from .operators import Branch, SpectralOperator
from .spectral import SymMatrix2

MIN_INTERIOR = 1
MIN_NEWTON_DERIV = 1e-10

_BRANCH_CODE = {Branch.LOG: 0, Branch.INVERSE: 1, Branch.ARCTAN: 2, Branch.PURE_ARCTAN: 3}


class NodeKind(enum.IntEnum):
    EXTERIOR = 0
    BOUNDARY = 1
    INTERIOR = 2


# --------------------------------------------------------------------------
# grid


@dataclass(frozen=True, eq=False)
class FlowGrid:
    domain: ConvexDomain
    spacing: float
    origin: tuple[float, float]
    kind: np.ndarray  # (nx, ny) int8 NodeKind
    interior: np.ndarray  # flat indices, row-major
    boundary: np.ndarray  # flat indices, ascending arc parameter
    boundary_points: np.ndarray  # (nb, 2) nearest points on the domain boundary
    boundary_normals: np.ndarray  # (nb, 2) unit inward normals there
    boundary_arc: np.ndarray
    stencil: BoundaryStencil

    @property
    def shape(self):
        return self.kind.shape

    @property
    def nx(self):
        return self.kind.shape[0]

    @property
    def ny(self):
        return self.kind.shape[1]

    @property
    def active(self) -> np.ndarray:
        return self.kind != NodeKind.EXTERIOR

    def coords(self, i, j):
        i = np.asarray(i)
        j = np.asarray(j)
        return np.stack([self.origin[0] + i * self.spacing,
                         self.origin[1] + j * self.spacing], axis=-1)

    @property
    def positions(self) -> np.ndarray:
        ii, jj = np.meshgrid(np.arange(self.nx), np.arange(self.ny), indexing="ij")
        return self.coords(ii, jj)

    def flat_positions(self, flat_idx) -> np.ndarray:
        i, j = np.divmod(np.asarray(flat_idx), self.ny)
        return self.coords(i, j)

    def sample(self, func) -> np.ndarray:
        """Evaluate ``func(points)`` on the active nodes; exterior entries are 0."""
        out = np.zeros(self.shape)
        act = self.active
        out[act] = func(self.positions[act])
        return out

    def counts(self) -> dict:
        return {k.name.lower(): int(np.count_nonzero(self.kind == k)) for k in NodeKind}


def build_grid(omega: ConvexDomain, spacing: float, *, min_interior: int = MIN_INTERIOR) -> FlowGrid:
    """Lattice aligned with the domain center; classify nodes, project the boundary layer."""
    if not spacing > 0:
        raise ValueError("spacing must be positive")
    h = float(spacing)
    (c1, c2), (a1, a2) = omega.center, omega.semi_axes
    k1 = int(math.ceil(a1 / h)) + 1
    k2 = int(math.ceil(a2 / h)) + 1
    nx, ny = 2 * k1 + 1, 2 * k2 + 1
    origin = (c1 - k1 * h, c2 - k2 * h)
    ii, jj = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
    pos = np.stack([origin[0] + ii * h, origin[1] + jj * h], axis=-1)
    inside = omega.h_eval(pos) > 0.0

    padded = np.zeros((nx + 2, ny + 2), dtype=bool)
    padded[1:-1, 1:-1] = inside
    all_nb = np.ones_like(inside)
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            all_nb &= padded[1 + di:1 + di + nx, 1 + dj:1 + dj + ny]
    kind = np.zeros((nx, ny), dtype=np.int8)
    kind[inside] = NodeKind.BOUNDARY
    kind[inside & all_nb] = NodeKind.INTERIOR

    n_int = int(np.count_nonzero(kind == NodeKind.INTERIOR))
    if n_int < min_interior:
        raise GridTooCoarse(f"GridTooCoarse: spacing {h} leaves {n_int} interior nodes")

    if not _separating_layer(kind):
        raise GridTooCoarse(f"GridTooCoarse: boundary layer at spacing {h} does not enclose the interior")

    interior = np.flatnonzero(kind.ravel() == NodeKind.INTERIOR).astype(np.int64)
    bnodes = np.flatnonzero(kind.ravel() == NodeKind.BOUNDARY).astype(np.int64)
    bpos = pos.reshape(-1, 2)[bnodes]
    projections = [omega.project_to_boundary(p) for p in bpos]
    arc = np.array([bp.arc_parameter for bp in projections])
    order = np.lexsort((bnodes, arc))
    bnodes = bnodes[order]
    points = np.array([projections[k].position for k in order]).reshape(-1, 2)
    normals = np.array([projections[k].inward_normal for k in order]).reshape(-1, 2)
    arc = arc[order]

    def coords(i, j):
        return np.stack([origin[0] + np.asarray(i) * h, origin[1] + np.asarray(j) * h], axis=-1)

    stencil = build_stencil(kind, coords, bnodes, points, h)
    return FlowGrid(omega, h, origin, kind, interior, bnodes, points, normals, arc, stencil)


def _separating_layer(kind) -> bool:
    """Flood fill from the interior through 4-neighbors must stay off exterior nodes,
    and the boundary layer must be one 8-connected piece."""
    from scipy import ndimage

    blocked = kind == NodeKind.EXTERIOR
    reach, _ = ndimage.label(~blocked)
    interior_labels = np.unique(reach[kind == NodeKind.INTERIOR])
    ext_labels = np.unique(reach[blocked])  # always 0
    if np.intersect1d(interior_labels, ext_labels).size:
        return False
    _, n_pieces = ndimage.label(kind == NodeKind.BOUNDARY, structure=np.ones((3, 3)))
    return n_pieces == 1


# --------------------------------------------------------------------------
# forcing and initial data


class ForcingKind(enum.Enum):
    ZERO = "zero"
    LINEAR = "linear"


@dataclass(frozen=True)
class ForcingFunction:
    kind: ForcingKind = ForcingKind.ZERO
    kappa: tuple[float, float] = (0.0, 0.0)

    @classmethod
    def zero(cls):
        return cls()

    @classmethod
    def linear(cls, kappa):
        k = (float(kappa[0]), float(kappa[1]))
        return cls(ForcingKind.LINEAR if k != (0.0, 0.0) else ForcingKind.ZERO, k)

    def __call__(self, points):
        points = np.asarray(points, dtype=float)
        return points[..., 0] * self.kappa[0] + points[..., 1] * self.kappa[1]

    def grad_norm(self) -> float:
        """``max |Df|``; constant for linear forcing."""
        return math.hypot(*self.kappa)

    def extremes(self, domain: ConvexDomain) -> tuple[float, float]:
        """Exact ``(min, max)`` of ``kappa . x`` over the closed domain."""
        (c1, c2), (a1, a2) = domain.center, domain.semi_axes
        mid = self.kappa[0] * c1 + self.kappa[1] * c2
        half = math.hypot(self.kappa[0] * a1, self.kappa[1] * a2)
        return mid - half, mid + half

    def oscillation(self, domain: ConvexDomain) -> float:
        lo, hi = self.extremes(domain)
        return hi - lo

    @property
    def is_concave(self) -> bool:
        return True


@dataclass(frozen=True)
class QuadraticInitial:
    """``u0(x) = o~ . x + 1/2 sum (b_i / a_i) (x_i - o_i)^2``; maps Omega onto Omega~."""

    center: tuple[float, float]
    target_center: tuple[float, float]
    diag: tuple[float, float]

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        d1 = x[..., 0] - self.center[0]
        d2 = x[..., 1] - self.center[1]
        return (self.target_center[0] * x[..., 0] + self.target_center[1] * x[..., 1]
                + 0.5 * (self.diag[0] * d1 * d1 + self.diag[1] * d2 * d2))

    def gradient(self, x):
        x = np.asarray(x, dtype=float)
        return np.stack([self.target_center[0] + self.diag[0] * (x[..., 0] - self.center[0]),
                         self.target_center[1] + self.diag[1] * (x[..., 1] - self.center[1])],
                        axis=-1)

    @property
    def hessian(self) -> np.ndarray:
        return np.diag(self.diag)


def quadratic_initial(omega: ConvexDomain, omega_tilde: ConvexDomain) -> QuadraticInitial:
    kinds = {DomainKind.DISC, DomainKind.ELLIPSE}
    if omega.kind not in kinds or omega_tilde.kind not in kinds:
        raise UnsupportedDomainPair(
            f"no closed-form initial data for {omega.kind} -> {omega_tilde.kind}; supply a node file")
    diag = tuple(bt / a for a, bt in zip(omega.semi_axes, omega_tilde.semi_axes))
    return QuadraticInitial(omega.center, omega_tilde.center, diag)


# --------------------------------------------------------------------------
# state


@dataclass(frozen=True, eq=False)
class FlowState:
    values: np.ndarray  # (nx, ny); exterior entries unused
    offset: float
    t: float
    udot: np.ndarray  # per interior node
    lam_lo: np.ndarray
    lam_hi: np.ndarray
    dmax: np.ndarray  # largest eigenvalue of F^{ij} per interior node

    @property
    def u(self) -> np.ndarray:
        """Absolute field; NaN at exterior nodes is left to the caller to mask."""
        return self.values + self.offset

    @property
    def healthy(self) -> bool:
        return bool(np.all(self.lam_lo > 0.0))

    def shifted(self, c: float) -> "FlowState":
        return replace(self, offset=self.offset + c)


@dataclass(frozen=True)
class StepReport:
    t: float
    dt_used: float
    c_estimate: float
    osc_udot: float
    udot_min: float
    udot_max: float
    min_eig: float
    max_eig: float
    max_min_eig: float  # max over nodes of the smaller eigenvalue
    min_max_eig: float  # min over nodes of the larger eigenvalue
    min_obliqueness: float
    min_obliqueness_raw: float
    boundary_residual: float
    sweeps: int


# --------------------------------------------------------------------------
# the discrete problem


class FlowProblem:
    """Grid, target domain, operator and forcing bound to a kernel backend.

    Parameters
    ----------
    backend : str, optional
        ``"compiled"`` or ``"python"``; defaults to the best available.
    threads : int
        Worker count for the interior map (compiled backend only). Results
        do not depend on it.
    """

    def __init__(self, grid: FlowGrid, omega_tilde: ConvexDomain, op: SpectralOperator,
                 forcing: ForcingFunction | None = None, *, tol_bc: float = 1e-10,
                 max_sweeps: int = 20, backend: str | None = None, threads: int = 1):
        self.grid = grid
        self.omega_tilde = omega_tilde
        self.op = op
        self.forcing = forcing or ForcingFunction.zero()
        self.tol_bc = float(tol_bc)
        self.max_sweeps = int(max_sweeps)
        self.kernels = kernels.get(backend)
        self.threads = int(threads)

        self._op_params = (_BRANCH_CODE[op.branch], op.a, op.b, op._amb, op._scale)
        self._hc = omega_tilde.h_coefficients
        self._inv_h2 = 1.0 / grid.spacing ** 2
        self.f_interior = np.ascontiguousarray(self.forcing(grid.flat_positions(grid.interior)))
        st = grid.stencil
        self._gw1 = np.ascontiguousarray(st.grad_w[0])
        self._gw2 = np.ascontiguousarray(st.grad_w[1])
        (self.G1, self.G2), self.H = st.operators(grid.nx * grid.ny)
        self._newton_tol = max(1e-3 * self.tol_bc, 16 * np.finfo(float).eps * self._hc[0])

    # -- pieces ------------------------------------------------------------

    def _rhs(self, flat):
        n = len(self.grid.interior)
        udot, lo, hi, dmax = (np.empty(n) for _ in range(4))
        self.kernels.interior_rhs(flat, self.grid.interior, self.grid.ny, self._inv_h2,
                                  self.f_interior, self._op_params, udot, lo, hi, dmax,
                                  self.threads)
        return udot, lo, hi, dmax

    def _sweep(self, flat):
        st = self.grid.stencil
        res, sweeps, status, row = self.kernels.boundary_sweep(
            flat, st.ptr, st.idx, self._gw1, self._gw2, self._hc, self.tol_bc,
            self.max_sweeps, self._newton_tol, MIN_NEWTON_DERIV)
        if status == 1:
            node = divmod(int(self.grid.boundary[row]), self.grid.ny)
            raise ObliquenessLost(f"ObliquenessLost: Newton derivative vanished at boundary node {node}")
        if status == 2:
            node = divmod(int(self.grid.boundary[row]), self.grid.ny)
            raise NewtonDiverged(f"NewtonDiverged: boundary node {node} after 50 iterations")
        return res, sweeps

    def boundary_derivatives(self, values):
        """``Du`` and ``(u11, u12, u22)`` reconstructed at every boundary point."""
        flat = np.asarray(values, dtype=float).ravel()
        du = np.stack([self.G1 @ flat, self.G2 @ flat], axis=-1)
        hess = np.stack([H @ flat for H in self.H], axis=-1)
        return du, hess

    def boundary_residual(self, values) -> float:
        du, _ = self.boundary_derivatives(values)
        return float(np.max(np.abs(self.omega_tilde.h_eval(du)))) if len(du) else 0.0

    def obliqueness_values(self, values):
        """Per boundary point: raw ``<beta, nu>`` and ``<beta, nu> / |beta|``."""
        du, _ = self.boundary_derivatives(values)
        beta = self.omega_tilde.h_grad(du)
        raw = np.einsum("ij,ij->i", beta, self.grid.boundary_normals)
        return raw, raw / np.hypot(beta[:, 0], beta[:, 1])

    # -- public operations -------------------------------------------------

    def initial_state(self, u0, *, enforce: bool = True) -> FlowState:
        """State from a callable or an ``(nx, ny)`` array of node values."""
        grid = self.grid
        vals = grid.sample(u0) if callable(u0) else np.array(u0, dtype=float, copy=True)
        vals[~grid.active] = 0.0
        offset = float(vals.flat[grid.interior[0]])
        vals[grid.active] -= offset
        flat = np.ascontiguousarray(vals.ravel())
        if enforce:
            self._sweep(flat)
        return self._assemble(flat.reshape(grid.shape), offset, 0.0)

    def _assemble(self, values, offset, t):
        udot, lo, hi, dmax = self._rhs(np.ascontiguousarray(values.ravel()))
        return FlowState(values, offset, t, udot, lo, hi, dmax)

    def enforce_boundary(self, state: FlowState) -> tuple[FlowState, float]:
        flat = np.ascontiguousarray(state.values.ravel()).copy()
        res, _ = self._sweep(flat)
        return self._assemble(flat.reshape(self.grid.shape), state.offset, state.t), res

    def _advance(self, state: FlowState, cfl: float):
        if not (0.0 < cfl <= 1.0):
            raise ValueError(f"cfl must lie in (0, 1], got {cfl!r}")
        if not state.healthy:
            raise ConvexityLost(
                f"ConvexityLost: discrete Hessian not positive definite at t={state.t!r}")
        dt = cfl * self.grid.spacing ** 2 / (4.0 * float(np.max(state.dmax)))
        c = float(np.mean(state.udot))
        flat = np.ascontiguousarray(state.values.ravel()).copy()
        flat[self.grid.interior] += dt * (state.udot - c)
        res, sweeps = self._sweep(flat)
        new = self._assemble(flat.reshape(self.grid.shape), state.offset + dt * c, state.t + dt)
        if not new.healthy:
            raise ConvexityLost(
                f"ConvexityLost: min Hessian eigenvalue {float(np.nanmin(new.lam_lo))!r} "
                f"at t={new.t!r}; refine the grid or lower cfl")
        return new, dt, res, sweeps

    def report(self, state: FlowState, dt: float = 0.0, residual: float | None = None,
               sweeps: int = 0) -> StepReport:
        if residual is None:
            residual = self.boundary_residual(state.values)
        raw, normed = self.obliqueness_values(state.values)
        udot = state.udot
        return StepReport(
            t=state.t, dt_used=dt, c_estimate=float(np.mean(udot)),
            osc_udot=float(np.max(udot) - np.min(udot)),
            udot_min=float(np.min(udot)), udot_max=float(np.max(udot)),
            min_eig=float(np.min(state.lam_lo)), max_eig=float(np.max(state.lam_hi)),
            max_min_eig=float(np.max(state.lam_lo)), min_max_eig=float(np.min(state.lam_hi)),
            min_obliqueness=float(np.min(normed)) if len(normed) else math.nan,
            min_obliqueness_raw=float(np.min(raw)) if len(raw) else math.nan,
            boundary_residual=float(residual), sweeps=int(sweeps))

    def step(self, state: FlowState, cfl: float = 0.5) -> tuple[FlowState, StepReport]:
        new, dt, res, sweeps = self._advance(state, cfl)
        return new, self.report(new, dt, res, sweeps)

    def run(self, state: FlowState, *, cfl: float = 0.5, tol_c: float = 1e-8,
            t_max: float = 100.0, record_every: int = 1, max_steps: int | None = None,
            monitor=None, strict: bool = False) -> "RunResult":
        """Step until ``osc(udot) < tol_c`` or ``t > t_max``.

        ``monitor(state, report)`` is called on every recorded report. With
        ``strict=True`` a non-converged run raises :class:`NotConverged`
        carrying the partial result.
        """
        if not state.healthy:
            raise ConvexityLost("ConvexityLost: initial data is not discretely convex")
        record_every = max(1, int(record_every))
        reports = [self.report(state)]
        if monitor is not None:
            monitor(state, reports[-1])
        steps = 0
        last = reports[-1]
        osc = last.osc_udot
        while not osc < tol_c and state.t <= t_max:
            if max_steps is not None and steps >= max_steps:
                break
            state, dt, res, sweeps = self._advance(state, cfl)
            steps += 1
            osc = float(np.max(state.udot) - np.min(state.udot))
            if steps % record_every == 0 or osc < tol_c or state.t > t_max:
                last = self.report(state, dt, res, sweeps)
                reports.append(last)
                if monitor is not None:
                    monitor(state, last)
        converged = osc < tol_c
        result = RunResult(state, reports, float(np.mean(state.udot)), converged, steps)
        if strict and not converged:
            raise NotConverged(f"NotConverged: osc(udot)={osc!r} at t={state.t!r}", result)
        return result


@dataclass
class RunResult:
    state: FlowState
    reports: list = field(default_factory=list)
    c_infinity: float = math.nan
    converged: bool = False
    steps: int = 0


# --------------------------------------------------------------------------
# functional spellings


def discrete_hessian(state: FlowState, grid: FlowGrid, node) -> SymMatrix2:
    """Nine-point second differences at an interior node ``(i, j)``."""
    i, j = node
    if grid.kind[i, j] != NodeKind.INTERIOR:
        raise ValueError(f"node {node!r} is not interior")
    return hessian_at(state.values, grid.spacing, i, j)


def grid_derivatives(values, spacing):
    """Central ``(u1, u2, u11, u12, u22)`` at every node; NaN on the array rim.

    Callers mask out nodes whose 3x3 neighborhood is not fully valid.
    """
    u = np.asarray(values, dtype=float)
    out = np.full((5,) + u.shape, np.nan)
    c = u[1:-1, 1:-1]
    inv = 1.0 / spacing
    out[0, 1:-1, 1:-1] = (u[2:, 1:-1] - u[:-2, 1:-1]) * (0.5 * inv)
    out[1, 1:-1, 1:-1] = (u[1:-1, 2:] - u[1:-1, :-2]) * (0.5 * inv)
    out[2, 1:-1, 1:-1] = (u[2:, 1:-1] - 2.0 * c + u[:-2, 1:-1]) * inv * inv
    out[3, 1:-1, 1:-1] = (u[2:, 2:] - u[2:, :-2] - u[:-2, 2:] + u[:-2, :-2]) * (0.25 * inv * inv)
    out[4, 1:-1, 1:-1] = (u[1:-1, 2:] - 2.0 * c + u[1:-1, :-2]) * inv * inv
    return out


def full_neighborhood(mask) -> np.ndarray:
    """Nodes whose whole 3x3 block lies in ``mask``."""
    mask = np.asarray(mask, dtype=bool)
    out = np.zeros_like(mask)
    core = np.ones((mask.shape[0] - 2, mask.shape[1] - 2), dtype=bool)
    for di in (0, 1, 2):
        for dj in (0, 1, 2):
            core &= mask[di:di + core.shape[0], dj:dj + core.shape[1]]
    out[1:-1, 1:-1] = core
    return out


def hessian_at(values, spacing, i, j) -> SymMatrix2:
    u = values
    inv = 1.0 / spacing ** 2
    u11 = (u[i + 1, j] - 2.0 * u[i, j] + u[i - 1, j]) * inv
    u22 = (u[i, j + 1] - 2.0 * u[i, j] + u[i, j - 1]) * inv
    u12 = (u[i + 1, j + 1] - u[i + 1, j - 1] - u[i - 1, j + 1] + u[i - 1, j - 1]) * 0.25 * inv
    return SymMatrix2(float(u11), float(u12), float(u22))


def step(state, problem: FlowProblem, cfl: float = 0.5):
    return problem.step(state, cfl)


def enforce_boundary(state, problem: FlowProblem):
    return problem.enforce_boundary(state)
