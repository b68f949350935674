"""Discrete Legendre transform and checks of the dual flow structure.

The transform is the brute-force discrete supremum
``u~(y) = max_x (x . y - u(x))`` over source nodes. At the maximizing node
``x*`` the value is refined with the local quadratic model of ``u``,

    u~(y) ~ x*.y - u(x*) + 1/2 (y - g)^T H^-1 (y - g),    g = Du(x*), H = D^2u(x*),

which is the exact conjugate of the quadratic Taylor model. This makes the
transform exact on quadratic fields and second-order accurate otherwise.
Target nodes whose maximizer is not a node with a full stencil lie outside
the discrete gradient image and are marked invalid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NonConvexDual
from .flow import FlowGrid, FlowState, ForcingFunction, NodeKind, full_neighborhood, grid_derivatives
from .nodefile import DUAL_TAG, write_nodes
from .operators import SpectralOperator
from .spectral import eigenvalues

CHUNK = 256


@dataclass(frozen=True, eq=False)
class DualField:
    """Conjugate values on a grid over the target domain."""

    grid: FlowGrid
    values: np.ndarray  # (nx, ny); NaN where invalid
    valid: np.ndarray  # (nx, ny) bool
    argmax: np.ndarray  # (nx, ny) flat source node index, -1 where invalid

    @property
    def refinable(self) -> np.ndarray:
        """Valid nodes whose 3x3 block is valid too (central differences apply)."""
        return full_neighborhood(self.valid)

    def derivatives(self) -> np.ndarray:
        return grid_derivatives(np.where(self.valid, self.values, 0.0), self.grid.spacing)

    def save(self, path, t=0.0):
        write_nodes(path, np.where(self.valid, self.values, 0.0), self.valid,
                    self.grid.spacing, t, tag=DUAL_TAG)


def _conjugate(src_pos, src_val, refine, deriv, tgt_pos):
    """Discrete sup with quadratic refinement.

    ``src_pos`` (N, 2), ``src_val`` (N,), ``refine`` (N,) bool, ``deriv`` (5, N);
    returns values and argmax (source index, -1 when the maximizer cannot be refined).
    """
    m = len(tgt_pos)
    vals = np.full(m, np.nan)
    arg = np.full(m, -1, dtype=np.int64)
    for lo in range(0, m, CHUNK):
        y = tgt_pos[lo:lo + CHUNK]
        scores = y @ src_pos.T - src_val[None, :]
        k = np.argmax(scores, axis=1)
        ok = refine[k]
        kk = k[ok]
        g1, g2, a11, a12, a22 = deriv[:, kk]
        det = a11 * a22 - a12 * a12
        ok_idx = np.flatnonzero(ok)
        good = (a11 > 0.0) & (det > 0.0)
        kk, ok_idx = kk[good], ok_idx[good]
        g1, g2, a11, a12, a22, det = (v[good] for v in (g1, g2, a11, a12, a22, det))
        d1 = y[ok_idx, 0] - g1
        d2 = y[ok_idx, 1] - g2
        quad = (a22 * d1 * d1 - 2.0 * a12 * d1 * d2 + a11 * d2 * d2) / det
        vals[lo + ok_idx] = scores[ok_idx, kk] + 0.5 * quad
        arg[lo + ok_idx] = kk
    return vals, arg


def _transform(src_grid: FlowGrid, src_values, src_mask, target_grid: FlowGrid) -> DualField:
    refine_grid = full_neighborhood(src_mask)
    deriv = grid_derivatives(np.where(src_mask, src_values, 0.0), src_grid.spacing)
    flat_src = np.flatnonzero(src_mask.ravel())
    src_pos = src_grid.flat_positions(flat_src)
    tgt_flat = np.flatnonzero(target_grid.active.ravel())
    vals, arg = _conjugate(src_pos, np.asarray(src_values, dtype=float).ravel()[flat_src],
                           refine_grid.ravel()[flat_src], deriv.reshape(5, -1)[:, flat_src],
                           target_grid.flat_positions(tgt_flat))
    out = np.full(target_grid.shape, np.nan)
    am = np.full(target_grid.shape, -1, dtype=np.int64)
    out.ravel()[tgt_flat] = vals
    am.ravel()[tgt_flat] = np.where(arg >= 0, flat_src[np.maximum(arg, 0)], -1)
    valid = am >= 0
    return DualField(target_grid, out, valid, am)


def legendre_transform(state, source_grid: FlowGrid, target_grid: FlowGrid) -> DualField:
    """Conjugate of a flow state (or an ``(nx, ny)`` value array) onto ``target_grid``."""
    values = state.u if isinstance(state, FlowState) else np.asarray(state, dtype=float)
    return _transform(source_grid, values, source_grid.active, target_grid)


def inverse_transform(dual: DualField, source_grid: FlowGrid) -> DualField:
    """Transform a dual field back onto the original grid."""
    return _transform(dual.grid, dual.values, dual.valid, source_grid)


# --------------------------------------------------------------------------
# verification


def collar_mask(grid: FlowGrid, valid=None) -> np.ndarray:
    """Interior nodes at least one cell away from non-interior (and invalid) nodes."""
    ok = grid.kind == NodeKind.INTERIOR
    if valid is not None:
        ok = ok & valid
    return full_neighborhood(ok)


def involution_error(values, grid: FlowGrid, dual: DualField) -> float:
    """Max ``|u** - u|`` over collar-excluded interior nodes where both transforms are valid."""
    back = inverse_transform(dual, grid)
    mask = collar_mask(grid, back.valid)
    if not mask.any():
        return math.nan
    return float(np.max(np.abs(back.values[mask] - np.asarray(values)[mask])))


def _dual_spectra(dual: DualField):
    """Dual Hessian eigenvalues at refinable interior nodes, with their source argmax."""
    mask = dual.refinable & (dual.grid.kind == NodeKind.INTERIOR)
    d = dual.derivatives()
    lo, hi = eigenvalues(d[2][mask], d[3][mask], d[4][mask])
    if np.any(lo <= 0.0):
        raise NonConvexDual(f"NonConvexDual: dual Hessian eigenvalue {float(np.min(lo))!r}")
    return mask, d, lo, hi


def reciprocity_residual(values, grid: FlowGrid, dual: DualField) -> float:
    """Max over matched pairs of ``|lambda(D^2 u~) - 1/lambda(D^2 u)|`` (ordered reciprocally)."""
    mask, _, mu_lo, mu_hi = _dual_spectra(dual)
    src = dual.argmax[mask]
    d = grid_derivatives(values, grid.spacing).reshape(5, -1)[:, src]
    lam_lo, lam_hi = eigenvalues(d[2], d[3], d[4])
    ok = np.isfinite(lam_lo)
    if not ok.any():
        return math.nan
    return float(max(np.max(np.abs(mu_lo - 1.0 / lam_hi)[ok]),
                     np.max(np.abs(mu_hi - 1.0 / lam_lo)[ok])))


def gradient_inversion_error(values, grid: FlowGrid, dual: DualField) -> float:
    """Max ``|Du~(y) - x(y)|`` at refinable interior dual nodes.

    ``x(y) = x* + (D^2u)^-1 (y - Du(x*))`` is the maximizer of the local
    quadratic model, i.e. the point whose gradient is ``y``.
    """
    mask, d, _, _ = _dual_spectra(dual)
    src = dual.argmax[mask]
    xs = grid.flat_positions(src)
    g1, g2, a11, a12, a22 = grid_derivatives(values, grid.spacing).reshape(5, -1)[:, src]
    ys = dual.grid.positions[mask]
    d1, d2 = ys[:, 0] - g1, ys[:, 1] - g2
    det = a11 * a22 - a12 * a12
    x1 = xs[:, 0] + (a22 * d1 - a12 * d2) / det
    x2 = xs[:, 1] + (a11 * d2 - a12 * d1) / det
    return float(np.max(np.hypot(d[0][mask] - x1, d[1][mask] - x2)))


def dual_flow_residual(state: FlowState, dual: DualField, op: SpectralOperator,
                       f: ForcingFunction, source_grid: FlowGrid) -> float:
    """Max over dual interior nodes of ``|u~_t - (F~(lambda(D^2 u~)) + f(Du~))|``.

    ``u~_t(y) = -udot(x*)`` at the maximizer; only maximizers that are
    interior source nodes carry a ``udot``.
    """
    mask, d, mu_lo, mu_hi = _dual_spectra(dual)
    udot = np.full(source_grid.nx * source_grid.ny, np.nan)
    udot[source_grid.interior] = state.udot
    ut = -udot[dual.argmax[mask]]
    rhs = op.dual_eval(np.stack([mu_lo, mu_hi], axis=-1)) + f(np.stack([d[0][mask], d[1][mask]], axis=-1))
    ok = np.isfinite(ut)
    if not ok.any():
        return math.nan
    return float(np.max(np.abs(ut - rhs)[ok]))


def dual_boundary_residual(dual: DualField, omega) -> float:
    """Max ``|h(Du~)|`` at target boundary points whose reconstruction rows are all valid.

    ``h`` is the defining function of the source domain. Reported only;
    collar effects dominate and no tolerance is attached.
    """
    st = dual.grid.stencil
    (G1, G2), _ = st.operators(dual.grid.nx * dual.grid.ny)
    bad = (~dual.valid.ravel()).astype(float)
    rows_ok = (abs(G1).astype(bool).astype(float) @ bad) == 0.0
    if not rows_ok.any():
        return math.nan
    flat = np.where(dual.valid, dual.values, 0.0).ravel()
    du = np.stack([G1 @ flat, G2 @ flat], axis=-1)[rows_ok]
    return float(np.max(np.abs(omega.h_eval(du))))
