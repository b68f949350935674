"""Uniformly convex planar domains described by concave quadratic defining functions.

Both shipped kinds use ``h(p) = k0 * (1 - sum(((p_i - c_i) / a_i)**2))``.
For a disc ``a_1 = a_2 = R`` and ``k0 = R/2``, which gives ``|Dh| = 1`` on the
boundary. For an ellipse ``k0 = sqrt(a_1 a_2)/2``; ``|Dh|`` on the boundary
then varies in ``[2 k0 / max a, 2 k0 / min a]`` and callers that need the
unit-gradient normalization divide by ``|Dh|`` themselves.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import ProjectionDiverged


class DomainKind(enum.Enum):
    DISC = "disc"
    ELLIPSE = "ellipse"


@dataclass(frozen=True)
class BoundaryPoint:
    position: np.ndarray
    inward_normal: np.ndarray
    arc_parameter: float


@dataclass(frozen=True)
class ConvexDomain:
    kind: DomainKind
    center: tuple[float, float]
    semi_axes: tuple[float, float]

    def __post_init__(self):
        if min(self.semi_axes) <= 0:
            raise ValueError(f"semi-axes must be positive, got {self.semi_axes!r}")
        if self.kind is DomainKind.DISC and self.semi_axes[0] != self.semi_axes[1]:
            raise ValueError("a disc needs equal semi-axes")

    @classmethod
    def disc(cls, center=(0.0, 0.0), radius=1.0):
        r = float(radius)
        return cls(DomainKind.DISC, (float(center[0]), float(center[1])), (r, r))

    @classmethod
    def ellipse(cls, center=(0.0, 0.0), semi_axes=(1.0, 1.0)):
        return cls(DomainKind.ELLIPSE, (float(center[0]), float(center[1])),
                   (float(semi_axes[0]), float(semi_axes[1])))

    # -- defining function -------------------------------------------------

    @property
    def scale(self) -> float:
        """The constant k0 multiplying ``1 - q(p)``."""
        a1, a2 = self.semi_axes
        return 0.5 * math.sqrt(a1 * a2)

    @property
    def theta(self) -> float:
        """Uniform concavity constant: ``D^2 h <= -theta I``."""
        return 2.0 * self.scale / max(self.semi_axes) ** 2

    @property
    def grad_bounds(self) -> tuple[float, float]:
        a_lo, a_hi = min(self.semi_axes), max(self.semi_axes)
        return 2.0 * self.scale / a_hi, 2.0 * self.scale / a_lo

    @property
    def diameter(self) -> float:
        return 2.0 * max(self.semi_axes)

    @property
    def bounding_box(self) -> tuple[tuple[float, float], tuple[float, float]]:
        (c1, c2), (a1, a2) = self.center, self.semi_axes
        return (c1 - a1, c1 + a1), (c2 - a2, c2 + a2)

    @property
    def h_coefficients(self) -> tuple[float, float, float, float, float]:
        """``(k0, c1, c2, 1/a1^2, 1/a2^2)``; the flat form used by the kernels."""
        (c1, c2), (a1, a2) = self.center, self.semi_axes
        return self.scale, c1, c2, 1.0 / (a1 * a1), 1.0 / (a2 * a2)

    def h_eval(self, p):
        p = np.asarray(p, dtype=float)
        k0, c1, c2, w1, w2 = self.h_coefficients
        d1 = p[..., 0] - c1
        d2 = p[..., 1] - c2
        return (k0 * (1.0 - (w1 * d1 * d1 + w2 * d2 * d2)))[()]

    def h_grad(self, p):
        p = np.asarray(p, dtype=float)
        k0, c1, c2, w1, w2 = self.h_coefficients
        return np.stack([-2.0 * k0 * w1 * (p[..., 0] - c1),
                         -2.0 * k0 * w2 * (p[..., 1] - c2)], axis=-1)

    def h_hess(self, p=None):
        """Constant Hessian ``-2 k0 diag(1/a_i^2)``; ``p`` is accepted for symmetry."""
        k0, _, _, w1, w2 = self.h_coefficients
        return np.array([[-2.0 * k0 * w1, 0.0], [0.0, -2.0 * k0 * w2]])

    def contains(self, p):
        return self.h_eval(p) > 0.0

    # -- boundary geometry -------------------------------------------------

    def boundary_at(self, t: float) -> BoundaryPoint:
        (c1, c2), (a1, a2) = self.center, self.semi_axes
        pos = np.array([c1 + a1 * math.cos(t), c2 + a2 * math.sin(t)])
        g = self.h_grad(pos)
        return BoundaryPoint(pos, g / np.hypot(g[0], g[1]), float(t) % (2.0 * math.pi))

    def sample_boundary(self, m: int) -> list[BoundaryPoint]:
        if m < 3:
            raise ValueError("need at least 3 boundary samples")
        return [self.boundary_at(2.0 * math.pi * k / m) for k in range(m)]

    def project_to_boundary(self, p, *, max_iter: int = 50) -> BoundaryPoint:
        """Nearest boundary point to ``p`` (inside or outside the domain)."""
        p = np.asarray(p, dtype=float)
        (c1, c2), (a1, a2) = self.center, self.semi_axes
        x, y = p[0] - c1, p[1] - c2
        if self.kind is DomainKind.DISC:
            t = math.atan2(y, x) if (x, y) != (0.0, 0.0) else 0.0
            return self.boundary_at(t)

        # distance^2 stationarity along t: g(t) = (X(t) - p) . X'(t) = 0
        def g_and_dg(t):
            ct, st = math.cos(t), math.sin(t)
            ex, ey = a1 * ct - x, a2 * st - y
            dx, dy = -a1 * st, a2 * ct
            return ex * dx + ey * dy, dx * dx + dy * dy + ex * (-a1 * ct) + ey * (-a2 * st)

        ts = np.linspace(0.0, 2.0 * math.pi, 73)[:-1]
        d2 = (a1 * np.cos(ts) - x) ** 2 + (a2 * np.sin(ts) - y) ** 2
        t = float(ts[int(np.argmin(d2))])
        step_cap = 2.0 * math.pi / 72
        for _ in range(max_iter):
            g, dg = g_and_dg(t)
            if dg <= 0.0:
                # not locally convex in t; fall back to a gradient step
                delta = -math.copysign(min(step_cap, abs(g) / (a1 * a1 + a2 * a2)), g)
            else:
                delta = max(-step_cap, min(step_cap, -g / dg))
            t += delta
            if abs(delta) < 1e-15 * (1.0 + abs(t)):
                return self.boundary_at(t)
        g, _ = g_and_dg(t)
        if abs(g) < 1e-13 * max(a1, a2) ** 2:
            return self.boundary_at(t)
        raise ProjectionDiverged(f"projection of {p!r} did not converge in {max_iter} steps")
