"""A priori estimates of the flow evaluated as runtime monitors.

Every monitor here is a pure function of a state snapshot plus the fixed
problem data, so replaying a saved state reproduces the same numbers.
Interior quantities get additive slack ``10 h^2`` (the interior stencil is
second order); boundary-adjacent ones get ``10 h``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import LevelOutOfRange, SingularHessian
from .flow import FlowGrid, FlowProblem, FlowState, ForcingFunction, StepReport
from .operators import SpectralOperator
from .spectral import eigenvalues

LEDGER_COLUMNS = ("t", "dt", "c_estimate", "osc_udot", "min_eig", "max_eig", "mu", "omega",
                  "obliq_min", "obliq_identity_residual", "bc_residual")

# roundoff floor for comparisons between two computed oscillations
OSC_FLOOR = 1e-12


def _field(u0, grid: FlowGrid) -> np.ndarray:
    return grid.sample(u0) if callable(u0) else np.asarray(u0, dtype=float)


def interior_spectra(values, grid: FlowGrid):
    """``(lam_lo, lam_hi)`` of the nine-point Hessian at each interior node."""
    u = np.asarray(values, dtype=float).ravel()
    k, ny, inv = grid.interior, grid.ny, 1.0 / grid.spacing ** 2
    u11 = (u[k + ny] - 2.0 * u[k] + u[k - ny]) * inv
    u22 = (u[k + 1] - 2.0 * u[k] + u[k - 1]) * inv
    u12 = (u[k + ny + 1] - u[k + ny - 1] - u[k - ny + 1] + u[k - ny - 1]) * (0.25 * inv)
    return eigenvalues(u11, u12, u22)


def _operator_range(values, grid, op):
    """Extremes of ``F[D^2 u]`` over interior nodes, or None off the convex cone."""
    lo, hi = interior_spectra(values, grid)
    if not np.all(lo > 0.0):
        return None
    vals = op.eval(np.stack([lo, hi], axis=-1))
    return float(np.min(vals)), float(np.max(vals))


# --------------------------------------------------------------------------
# admissibility


@dataclass(frozen=True)
class AdmissibilityReport:
    delta_max: float
    osc_f: float
    df_max: float
    df_threshold: float
    concave_ok: bool
    initial_bc_residual: float
    spacing: float
    convex_ok: bool = True

    @property
    def admissible(self) -> bool:
        return bool(self.convex_ok and self.osc_f < self.delta_max
                    and self.df_max < self.df_threshold and self.concave_ok
                    and self.initial_bc_residual < 10.0 * self.spacing)

    def failures(self) -> list[str]:
        out = []
        if not self.convex_ok:
            # F[D^2 u0] is undefined, so neither margin can be computed
            out.append("initial data not discretely convex")
        else:
            if not self.osc_f < self.delta_max:
                out.append(f"osc_f={self.osc_f!r} >= delta_max={self.delta_max!r}")
            if not self.df_max < self.df_threshold:
                out.append(f"df_max={self.df_max!r} >= df_threshold={self.df_threshold!r}")
        if not self.concave_ok:
            out.append("forcing is not concave")
        if not self.initial_bc_residual < 10.0 * self.spacing:
            out.append(f"initial_bc_residual={self.initial_bc_residual!r} >= 10*spacing")
        return out

    def as_dict(self) -> dict:
        return {"admissible": self.admissible, "delta_max": self.delta_max,
                "osc_f": self.osc_f, "df_max": self.df_max,
                "df_threshold": self.df_threshold, "concave_ok": self.concave_ok,
                "convex_ok": self.convex_ok, "initial_bc_residual": self.initial_bc_residual}


def check_admissibility(f: ForcingFunction, u0, op: SpectralOperator, omega, omega_tilde,
                        grid: FlowGrid, problem: FlowProblem | None = None) -> AdmissibilityReport:
    """Hypotheses of the convergence theorem, checked on the grid.

    ``delta_max`` is the gap between the operator's range endpoints and the
    values ``F[D^2 u0]`` takes on the grid; ``df_threshold`` is the |Df|
    smallness bound ``theta~ Lambda_1 / (2 max |Dh~|)`` with ``Lambda_1`` from
    the trace window at ``s1 = max_x lambda_min(D^2 u0)``.
    """
    vals = _field(u0, grid)
    if problem is None:
        problem = FlowProblem(grid, omega_tilde, op, f)
    residual = problem.boundary_residual(vals)
    osc_f = f.oscillation(omega)
    df_max = f.grad_norm()
    lo, hi = interior_spectra(vals, grid)
    if not np.all(lo > 0.0):
        return AdmissibilityReport(math.nan, osc_f, df_max, math.nan, f.is_concave, residual,
                                   grid.spacing, convex_ok=False)
    F_lo, F_hi = _operator_range(vals, grid, op)
    e0, e1 = op.endpoints(2)
    delta_max = min(e1 - F_hi, F_lo - e0)
    win1, _ = op.structure_window(float(np.max(lo)), float(np.min(hi)), 2)
    df_threshold = omega_tilde.theta * win1.lambda1 / (2.0 * omega_tilde.grad_bounds[1])
    return AdmissibilityReport(delta_max, osc_f, df_max, df_threshold, f.is_concave, residual,
                               grid.spacing)


# --------------------------------------------------------------------------
# estimates


def udot_bounds(u0_field, f: ForcingFunction, op: SpectralOperator, grid: FlowGrid):
    """Maximum-principle bounds ``min F[D^2u0] - max f <= udot <= max F[D^2u0] - min f``.

    The forcing extremes are exact over the closed domain.
    """
    rng = _operator_range(_field(u0_field, grid), grid, op)
    if rng is None:
        raise ValueError("initial data is not discretely convex")
    f_lo, f_hi = f.extremes(grid.domain)
    return rng[0] - f_hi, rng[1] - f_lo


def eigenvalue_window(udot_lo, udot_hi, f_extremes, op: SpectralOperator, n: int = 2):
    """``(mu, omega)`` with ``F(mu,..,mu) = udot_hi + max f`` and ``F(omega,..,omega) = udot_lo + min f``.

    At every point some eigenvalue is ``<= mu`` and some is ``>= omega``.
    """
    f_lo, f_hi = f_extremes
    mu = op.level_inverse(udot_hi + f_hi, n)
    om = op.level_inverse(udot_lo + f_lo, n)
    return mu, om


def obliqueness(values, problem: FlowProblem):
    """Normalized minimum of ``<beta, nu>`` and the residual of the obliqueness identity.

    ``beta = Dh~(Du)`` and ``nu`` is the inward normal at each boundary point.
    The identity ``<beta, nu> = sqrt(nu^T (D^2u)^-1 nu * beta^T D^2u beta)`` is
    evaluated with the reconstructed boundary Hessian.
    """
    du, hess = problem.boundary_derivatives(values)
    if len(du) == 0:
        return math.nan, math.nan
    beta = problem.omega_tilde.h_grad(du)
    nu = problem.grid.boundary_normals
    raw = np.einsum("ij,ij->i", beta, nu)
    normed = raw / np.hypot(beta[:, 0], beta[:, 1])
    a11, a12, a22 = hess[:, 0], hess[:, 1], hess[:, 2]
    det = a11 * a22 - a12 * a12
    lo, _ = eigenvalues(a11, a12, a22)
    if not np.all(lo > 0.0):
        r = int(np.argmin(lo))
        node = divmod(int(problem.grid.boundary[r]), problem.grid.ny)
        raise SingularHessian(
            f"SingularHessian: boundary Hessian at node {node} has eigenvalue {float(lo[r])!r}")
    inv_nn = (a22 * nu[:, 0] ** 2 - 2.0 * a12 * nu[:, 0] * nu[:, 1] + a11 * nu[:, 1] ** 2) / det
    b_hb = a11 * beta[:, 0] ** 2 + 2.0 * a12 * beta[:, 0] * beta[:, 1] + a22 * beta[:, 1] ** 2
    resid = np.abs(raw - np.sqrt(inv_nn * b_hb))
    return float(np.min(normed)), float(np.max(resid))


def c2_pinch(state: FlowState, grid: FlowGrid | None = None):
    """Global extremes of the interior Hessian eigenvalues."""
    return float(np.min(state.lam_lo)), float(np.max(state.lam_hi))


# --------------------------------------------------------------------------
# ledger


@dataclass(frozen=True)
class Violation:
    t: float
    which: str
    margin: float  # how far past the bound, positive


@dataclass
class LedgerRow:
    t: float
    dt: float
    c_estimate: float
    osc_udot: float
    min_eig: float
    max_eig: float
    mu: float
    omega: float
    obliq_min: float
    obliq_identity_residual: float
    bc_residual: float
    udot_min: float = math.nan
    udot_max: float = math.nan
    hessian_cond: float = math.nan

    def csv_fields(self) -> list[str]:
        return [repr(float(getattr(self, c))) for c in LEDGER_COLUMNS]


@dataclass
class EstimateLedger:
    """Per-report estimate checks for one run.

    Bounds come from the initial state and stay fixed for the whole run.
    """

    problem: FlowProblem
    udot_lo: float
    udot_hi: float
    mu: float
    omega: float
    rows: list = field(default_factory=list)
    violations: list = field(default_factory=list)
    c2_constant: float = 1.0

    @classmethod
    def for_run(cls, problem: FlowProblem, initial: FlowState) -> "EstimateLedger":
        lo, hi = udot_bounds(initial.values, problem.forcing, problem.op, problem.grid)
        f_ext = problem.forcing.extremes(problem.grid.domain)
        try:
            mu, om = eigenvalue_window(lo, hi, f_ext, problem.op)
        except LevelOutOfRange:
            mu, om = math.nan, math.nan
        return cls(problem, lo, hi, mu, om)

    @property
    def spacing(self) -> float:
        return self.problem.grid.spacing

    def _flag(self, t, which, margin):
        if margin > 0.0:
            self.violations.append(Violation(float(t), which, float(margin)))

    def record(self, state: FlowState, rep: StepReport) -> LedgerRow:
        h = self.spacing
        slack2, slack1 = 10.0 * h * h, 10.0 * h
        obl_min, identity = obliqueness(state.values, self.problem)
        row = LedgerRow(rep.t, rep.dt_used, rep.c_estimate, rep.osc_udot, rep.min_eig,
                        rep.max_eig, self.mu, self.omega, obl_min, identity,
                        rep.boundary_residual, rep.udot_min, rep.udot_max,
                        rep.max_eig / rep.min_eig)
        t = rep.t
        self._flag(t, "udot_lower", (self.udot_lo - slack2) - rep.udot_min)
        self._flag(t, "udot_upper", rep.udot_max - (self.udot_hi + slack2))
        if not math.isnan(self.mu):
            self._flag(t, "eigen_mu", rep.max_min_eig - (self.mu + slack2))
            self._flag(t, "eigen_omega", (self.omega - slack2) - rep.min_max_eig)
        if self.rows:
            prev = self.rows[-1]
            allowed = prev.osc_udot + slack2 * (t - prev.t) + OSC_FLOOR
            self._flag(t, "osc_increase", rep.osc_udot - allowed)
        self._flag(t, "obliqueness", -obl_min)
        self._flag(t, "obliqueness_identity", identity - slack1)
        self._flag(t, "bc_residual", rep.boundary_residual - slack1)
        self.c2_constant = max(self.c2_constant, rep.max_eig, 1.0 / rep.min_eig)
        self.rows.append(row)
        return row

    def __call__(self, state, rep):
        self.record(state, rep)

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(LEDGER_COLUMNS)
            for row in self.rows:
                w.writerow(row.csv_fields())

