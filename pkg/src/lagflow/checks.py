"""Invariant checks behind the ``check-*`` and ``legendre-verify`` subcommands.

Each function returns a list of :class:`Check` rows; a row with
``passed=None`` is informational.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .domains import ConvexDomain
from .flow import FlowProblem, ForcingFunction, build_grid
from .legendre import (dual_boundary_residual, dual_flow_residual, gradient_inversion_error,
                       involution_error, legendre_transform, reciprocity_residual)
from .operators import SpectralOperator

WINDOW_PAIRS = ((1.0, 2.0), (0.5, 3.0))
INVOLUTION_C = 1.0


@dataclass(frozen=True)
class Check:
    name: str
    value: float
    bound: float | None = None
    passed: bool | None = None

    def line(self) -> str:
        status = {True: "PASS", False: "FAIL", None: "info"}[self.passed]
        bound = "" if self.bound is None else f"{self.bound:.3e}"
        return f"{self.name:<34} {self.value:>14.6e} {bound:>11} {status}"


def _upper(name, value, bound):
    value = float(value)
    return Check(name, value, bound, bool(value <= bound))


def format_table(rows) -> str:
    head = f"{'check':<34} {'value':>14} {'bound':>11} status"
    return "\n".join([head, "-" * len(head)] + [r.line() for r in rows])


def all_passed(rows) -> bool:
    return all(r.passed is not False for r in rows)


# --------------------------------------------------------------------------
# operator


def _window_samples(rng, s1, s2, m, top=1e3):
    """Points of the truncated cone: smaller entry in (0, s1], larger in [s2, top)."""
    lo = rng.uniform(0.0, s1, m)
    lo[lo == 0.0] = s1
    hi = rng.uniform(s2, top, m)
    return np.stack([lo, hi], axis=-1)


def verify_operator(op: SpectralOperator, samples: int = 1000, seed: int = 0, n: int = 2):
    rng = np.random.default_rng(seed)
    lam = np.exp(rng.uniform(math.log(1e-2), math.log(1e2), (samples, n)))
    rows = []

    e0, e1 = op.endpoints(n)
    rows.append(Check("endpoints ordered F(0) < F(inf)", e1 - e0, None, bool(e0 < e1)))
    vals = op.eval(lam)
    rows.append(Check("values inside (F(0), F(inf))", float(np.min(np.minimum(vals - e0, e1 - vals))),
                      None, bool(np.all((vals > e0) & (vals < e1)))))
    g = op.grad(lam)
    rows.append(Check("monotone: min dF/dl_i", float(np.min(g)), None, bool(np.all(g > 0.0))))

    # finite-difference oracles, relative step
    eps = 1e-6
    fd_g = np.empty_like(lam)
    fd_h = np.empty_like(lam)
    for i in range(n):
        step = eps * lam[:, i]
        up, dn = lam.copy(), lam.copy()
        up[:, i] += step
        dn[:, i] -= step
        fd_g[:, i] = (op.eval(up) - op.eval(dn)) / (2.0 * step)
        gu, gd = op.grad(up)[:, i], op.grad(dn)[:, i]
        fd_h[:, i] = (gu - gd) / (2.0 * step)
    hd = np.diagonal(op.hess(lam), axis1=-2, axis2=-1)
    rows.append(_upper("grad vs FD, rel err", np.max(np.abs(fd_g - g) / np.abs(g)), 1e-6))
    rows.append(_upper("hess vs FD, rel err", np.max(np.abs(fd_h - hd) / np.abs(hd)), 1e-6))
    rows.append(_upper("concavity: max hess eigenvalue", np.max(hd), 1e-10))

    mu = 1.0 / lam
    dg = op.dual_grad(mu)
    ident = np.max(np.abs(dg - lam * lam * g) / np.abs(dg))
    rows.append(_upper("dual identity, rel err", ident, 1e-10))
    fd_dh = np.empty_like(mu)
    for i in range(n):
        step = 1e-4 * mu[:, i]
        up, dn = mu.copy(), mu.copy()
        up[:, i] += step
        dn[:, i] -= step
        fd_dh[:, i] = (op.dual_eval(up) - 2.0 * op.dual_eval(mu) + op.dual_eval(dn)) / step ** 2
    rows.append(_upper("dual concavity: max FD hess", np.max(fd_dh), 1e-6))

    for s1, s2 in WINDOW_PAIRS:
        w1, w2 = op.structure_window(s1, s2, n)
        pts = _window_samples(rng, s1, s2, samples)
        gp = op.grad(pts)
        t1 = gp.sum(axis=-1)
        t2 = (gp * pts * pts).sum(axis=-1)
        ok = bool(np.all(w1.contains(t1, 1e-12)) and np.all(w2.contains(t2, 1e-12)))
        margin = min(np.min(t1 - w1.lambda1), np.min(w1.lambda2 - t1),
                     np.min(t2 - w2.lambda1), np.min(w2.lambda2 - t2))
        rows.append(Check(f"windows contain sums, s=({s1:g},{s2:g})", float(margin), None, ok))
    return rows


# --------------------------------------------------------------------------
# domain


def verify_domain(domain: ConvexDomain, samples: int = 360, seed: int = 0):
    rng = np.random.default_rng(seed)
    rows = [Check("theta (concavity constant)", domain.theta),
            Check("min |Dh| on boundary (bound)", domain.grad_bounds[0]),
            Check("max |Dh| on boundary (bound)", domain.grad_bounds[1])]
    pts = domain.sample_boundary(samples)
    pos = np.array([p.position for p in pts])
    k0 = domain.scale
    rows.append(_upper("|h| on boundary samples", np.max(np.abs(domain.h_eval(pos))), 1e-12 * max(1.0, k0)))
    gn = np.hypot(*domain.h_grad(pos).T)
    lo, hi = domain.grad_bounds
    rows.append(Check("|Dh| on boundary within bounds", float(np.max(gn)), None,
                      bool(np.all((gn >= lo * (1 - 1e-12)) & (gn <= hi * (1 + 1e-12))))))
    top = float(np.max(np.linalg.eigvalsh(domain.h_hess())))
    rows.append(_upper("D^2h + theta I, max eigenvalue", top + domain.theta, 1e-12))
    nrm = np.array([p.inward_normal for p in pts])
    inward = np.einsum("ij,ij->i", nrm, np.asarray(domain.center) - pos)
    rows.append(Check("normals unit and inward", float(np.max(np.abs(np.hypot(*nrm.T) - 1.0))),
                      None, bool(np.all(inward > 0.0) and np.allclose(np.hypot(*nrm.T), 1.0))))
    # projection against a dense boundary scan
    dense = np.array([p.position for p in domain.sample_boundary(20000)])
    (c1, c2), (a1, a2) = domain.center, domain.semi_axes
    q = np.stack([rng.uniform(c1 - 1.5 * a1, c1 + 1.5 * a1, 50),
                  rng.uniform(c2 - 1.5 * a2, c2 + 1.5 * a2, 50)], axis=-1)
    worst = 0.0
    for p in q:
        d_proj = float(np.hypot(*(domain.project_to_boundary(p).position - p)))
        d_scan = float(np.min(np.hypot(*(dense - p).T)))
        worst = max(worst, d_proj - d_scan)
    rows.append(_upper("projection vs dense scan (excess)", worst, 1e-6 * domain.diameter))
    back = max(float(np.hypot(*(domain.project_to_boundary(x).position - x))) for x in pos[::10])
    rows.append(_upper("projection fixes boundary points", back, 1e-10 * domain.diameter))
    return rows


# --------------------------------------------------------------------------
# Legendre


@dataclass(frozen=True)
class ProbeField:
    """Convex test fields on a disc with closed-form gradients."""

    kind: str
    params: tuple

    @classmethod
    def parse(cls, text: str) -> "ProbeField":
        kind, _, rest = text.partition(":")
        params = tuple(float(v) for v in rest.split(",")) if rest else ()
        need = {"quadratic": 2, "quartic": 1, "exp": 2}
        if kind not in need or len(params) != need[kind]:
            raise ValueError(f"field must be quadratic:m1,m2 | quartic:eps | exp:k1,k2; got {text!r}")
        if kind == "quadratic" and min(params) <= 0.0:
            raise ValueError("quadratic coefficients must be positive")
        return cls(kind, params)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        x1, x2 = x[..., 0], x[..., 1]
        if self.kind == "quadratic":
            m1, m2 = self.params
            return 0.5 * (m1 * x1 * x1 + m2 * x2 * x2)
        if self.kind == "quartic":
            return 0.5 * (x1 * x1 + x2 * x2) + self.params[0] * x1 ** 4
        k1, k2 = self.params
        return 0.5 * (x1 * x1 + x2 * x2) + 0.1 * np.exp(k1 * x1 + k2 * x2)

    def gradient(self, x):
        x = np.asarray(x, dtype=float)
        x1, x2 = x[..., 0], x[..., 1]
        if self.kind == "quadratic":
            m1, m2 = self.params
            return np.stack([m1 * x1, m2 * x2], axis=-1)
        if self.kind == "quartic":
            return np.stack([x1 + 4.0 * self.params[0] * x1 ** 3, x2], axis=-1)
        k1, k2 = self.params
        e = 0.1 * np.exp(k1 * x1 + k2 * x2)
        return np.stack([x1 + k1 * e, x2 + k2 * e], axis=-1)

    def image_domain(self, omega: ConvexDomain) -> ConvexDomain:
        """Axis-aligned ellipse spanning the bounding box of ``Du(boundary)``."""
        g = self.gradient(np.array([p.position for p in omega.sample_boundary(720)]))
        lo, hi = g.min(axis=0), g.max(axis=0)
        return ConvexDomain.ellipse(tuple(0.5 * (lo + hi)), tuple(0.5 * (hi - lo)))


def verify_legendre(field: ProbeField, spacing: float = 1.0 / 32, tau: float = math.pi / 2,
                    omega: ConvexDomain | None = None):
    omega = omega or ConvexDomain.disc()
    grid = build_grid(omega, spacing)
    target = field.image_domain(omega)
    tgrid = build_grid(target, spacing)
    vals = grid.sample(field)
    dual = legendre_transform(vals, grid, tgrid)
    h = spacing
    op = SpectralOperator(tau)
    problem = FlowProblem(grid, target, op)
    state = problem.initial_state(vals, enforce=False)
    rows = [
        Check("valid dual nodes", float(np.count_nonzero(dual.valid))),
        _upper("involution error", involution_error(vals, grid, dual), INVOLUTION_C * h * h),
        _upper("Hessian reciprocity residual", reciprocity_residual(vals, grid, dual), 10 * h),
        _upper("gradient inversion error", gradient_inversion_error(vals, grid, dual), 10 * h),
        _upper("dual flow residual at t=0",
               dual_flow_residual(state, dual, op, ForcingFunction.zero(), grid), 10 * h),
        Check("dual boundary residual", dual_boundary_residual(dual, omega)),
    ]
    return rows
