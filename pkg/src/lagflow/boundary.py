"""Boundary reconstruction stencils.

Each boundary node ``b`` is paired with its nearest point ``p`` on the domain
boundary. Around ``b`` a quadratic ``u(b) + g.(x - b) + 1/2 (x - b)^T H (x - b)``
is fitted by weighted least squares to the *interior* nodes of the
surrounding patch, with the value at ``b`` held fixed. That yields linear
weights for ``Du(p) = g + H (p - b)`` and ``D^2u(p) = H`` which are exact on
quadratic polynomials and which involve no other boundary node. The oblique
condition ``h(Du(p)) = 0`` is therefore a scalar equation in ``u(b)`` alone,
and its derivative is the discrete obliqueness.

Rows are stored CSR-style with the node itself always in the first slot of
its row, which is what the sweep kernels rely on.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import GridTooCoarse



@dataclass(frozen=True)
class BoundaryStencil:
    ptr: np.ndarray  # int64, len nb+1
    idx: np.ndarray  # flat node indices; idx[ptr[r]] is the row's own node
    grad_w: np.ndarray  # (2, nnz) weights for Du(p)
    hess_w: np.ndarray  # (3, nnz) weights for (u11, u12, u22) at p

    @property
    def self_weights(self) -> np.ndarray:
        """(nb, 2) weights of each node's own value in its reconstructed gradient."""
        return self.grad_w[:, self.ptr[:-1]].T

    def operators(self, n_nodes: int):
        """Sparse matrices mapping the flat field to boundary-point derivatives."""
        nb = len(self.ptr) - 1
        rows = np.repeat(np.arange(nb), np.diff(self.ptr))
        mk = lambda w: sp.csr_matrix((w, (rows, self.idx)), shape=(nb, n_nodes))
        return tuple(mk(w) for w in self.grad_w), tuple(mk(w) for w in self.hess_w)


def node_reconstruction(kind, node, offset, h, interior_code=2):
    """Weights for ``(u_1, u_2)`` and ``(u_11, u_12, u_22)`` at ``b + offset``.

    Returns ``(keys, grad_w, hess_w)`` with the node itself first in ``keys``,
    or ``None`` when the patch cannot pin a quadratic. Only on very coarse
    grids, where the interior nodes alone are too few, does the fit fall back
    to other non-exterior nodes (which re-couples the boundary equations).
    """
    nx, ny = kind.shape
    i, j = node
    attempts = [(2, (interior_code,)), (3, (interior_code,)), (2, (1, interior_code))]
    for patch, codes in attempts:
        cand = [(i + di, j + dj)
                for di in range(-patch, patch + 1) for dj in range(-patch, patch + 1)
                if (di, dj) != (0, 0) and 0 <= i + di < nx and 0 <= j + dj < ny
                and kind[i + di, j + dj] in codes]
        if len(cand) < 5:
            continue
        d = np.array([(ci - i, cj - j) for ci, cj in cand], dtype=float)
        basis = np.column_stack([d[:, 0], d[:, 1], 0.5 * d[:, 0] ** 2, d[:, 0] * d[:, 1],
                                 0.5 * d[:, 1] ** 2])
        wts = np.exp(-0.25 * (d ** 2).sum(axis=1))
        A = basis * wts[:, None]
        if np.linalg.matrix_rank(A, tol=1e-8) < 5:
            continue
        rows = np.linalg.pinv(A) * wts[None, :]  # (5, m) in grid units
        g = rows[0:2] / h
        H = rows[2:5] / h ** 2  # (u11, u12, u22)
        off = np.asarray(offset, dtype=float)
        grad_p = np.stack([g[0] + H[0] * off[0] + H[1] * off[1],
                           g[1] + H[1] * off[0] + H[2] * off[1]])
        # the fit sees u - u(b); the node's own weight balances the rest
        grad_w = np.column_stack([-grad_p.sum(axis=1), grad_p])
        hess_w = np.column_stack([-H.sum(axis=1), H])
        return [node] + cand, grad_w, hess_w
    return None


def build_stencil(kind: np.ndarray, coords, boundary_nodes, boundary_points, spacing):
    """Quadratic-exact reconstruction weights at each boundary point.

    Parameters
    ----------
    kind : (nx, ny) int array of node kinds; 2 marks interior nodes.
    coords : callable mapping (i, j) arrays to physical positions.
    boundary_nodes : flat indices of boundary nodes in sweep order.
    boundary_points : (nb, 2) projections of those nodes onto the boundary.
    """
    nx, ny = kind.shape
    ptr = [0]
    idx, gw, hw = [], [], []
    for node, p in zip(boundary_nodes, boundary_points):
        ij = divmod(int(node), ny)
        rec = node_reconstruction(kind, ij, np.asarray(p) - coords(*ij), spacing)
        if rec is None:
            raise GridTooCoarse(f"boundary node {ij} has too few interior neighbors")
        keys, grad_w, hess_w = rec
        idx.extend(a * ny + b for a, b in keys)
        gw.append(grad_w)
        hw.append(hess_w)
        ptr.append(ptr[-1] + len(keys))
    return BoundaryStencil(
        np.asarray(ptr, dtype=np.int64),
        np.asarray(idx, dtype=np.int64),
        np.ascontiguousarray(np.concatenate(gw, axis=1)),
        np.ascontiguousarray(np.concatenate(hw, axis=1)),
    )
