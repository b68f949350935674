"""The Lagrangian-angle operator family F_tau acting on positive spectra.

For ``tau`` in (0, pi/2] the operator is a sum of one-dimensional profiles
``phi(lambda_i)``; ``a = cot(tau)`` and ``b = sqrt(|cot(tau)^2 - 1|)``:

* log branch (0 < tau < pi/4):
  ``sqrt(a^2+1)/(2b) * ln((l + a - b) / (l + a + b))``
* inverse branch (tau = pi/4): ``-sqrt(2) / (1 + l)``
* arctan branch (pi/4 < tau < pi/2):
  ``sqrt(a^2+1)/b * arctan((l + a - b) / (l + a + b))``
* pure arctan (tau = pi/2): ``arctan(l)``

All array arguments are spectra of shape ``(..., n)``; the reduction runs
over the last axis so that many spectra can be evaluated at once.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidTau, InvalidWindow, NonPositiveEigenvalue, TauZeroUnsupported

BRANCH_TOL = 1e-12
SQRT2 = math.sqrt(2.0)


class Branch(enum.Enum):
    LOG = "log"
    INVERSE = "inverse"
    ARCTAN = "arctan"
    PURE_ARCTAN = "pure_arctan"


@dataclass(frozen=True)
class StructureWindow:
    """Closed interval ``[lambda1, lambda2]`` valid on the truncated cone
    ``{min l_i <= s1, max l_i >= s2}``."""

    s1: float
    s2: float
    lambda1: float
    lambda2: float

    def contains(self, value, slack=0.0):
        value = np.asarray(value)
        return (value >= self.lambda1 - slack) & (value <= self.lambda2 + slack)


def as_spectrum(lam) -> np.ndarray:
    """Validate membership in the positive cone and return a float array."""
    arr = np.asarray(lam, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if not np.all(arr > 0.0):
        raise NonPositiveEigenvalue(f"spectrum must be strictly positive, got {arr!r}")
    return arr


@dataclass(frozen=True)
class SpectralOperator:
    """F_tau together with its derivatives, range endpoints and dual.

    Parameters
    ----------
    tau : float
        Lagrangian angle in (0, pi/2]. Values within ``1e-12`` of pi/4 or
        pi/2 snap to the exact closed-form branch.
    """

    tau: float
    a: float = field(init=False)
    b: float = field(init=False)
    branch: Branch = field(init=False)
    # a - b for the log branch, computed as 1/(a+b) to avoid cancellation
    _amb: float = field(init=False, repr=False)
    _scale: float = field(init=False, repr=False)

    def __post_init__(self):
        tau = float(self.tau)
        if tau == 0.0:
            raise TauZeroUnsupported(
                "TauZeroUnsupported: tau=0 gives an operator with F(+inf)=+inf")
        if not math.isfinite(tau) or tau < 0.0 or tau > math.pi / 2 + BRANCH_TOL:
            raise InvalidTau(f"tau must lie in (0, pi/2], got {tau!r}")

        if abs(tau - math.pi / 2) <= BRANCH_TOL:
            branch, tau = Branch.PURE_ARCTAN, math.pi / 2
            a, b = 0.0, 1.0
        elif abs(tau - math.pi / 4) <= BRANCH_TOL:
            branch, tau = Branch.INVERSE, math.pi / 4
            a, b = 1.0, 0.0
        else:
            a = math.cos(tau) / math.sin(tau)
            b = math.sqrt(abs(a * a - 1.0))
            branch = Branch.LOG if tau < math.pi / 4 else Branch.ARCTAN

        object.__setattr__(self, "tau", tau)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "branch", branch)
        object.__setattr__(self, "_amb", 1.0 / (a + b) if branch is Branch.LOG else a - b)
        object.__setattr__(self, "_scale", math.sqrt(a * a + 1.0))

    # -- one-dimensional profile and its derivatives (elementwise) ---------

    def profile(self, lam):
        """phi(l), so that ``F(l_1..l_n) = sum phi(l_i)``. No validation."""
        lam = np.asarray(lam, dtype=float)
        br = self.branch
        if br is Branch.PURE_ARCTAN:
            return np.arctan(lam)
        if br is Branch.INVERSE:
            return -SQRT2 / (1.0 + lam)
        a, b, s = self.a, self.b, self._scale
        if br is Branch.ARCTAN:
            return (s / b) * np.arctan((lam + a - b) / (lam + a + b))
        lo = lam + self._amb
        hi = lam + a + b
        ratio = 2.0 * b / hi
        with np.errstate(divide="ignore", invalid="ignore"):
            near_one = np.log1p(-ratio)
            far = np.log(lo) - np.log(hi)
        return (s / (2.0 * b)) * np.where(ratio < 0.5, near_one, far)

    def profile_d1(self, lam):
        lam = np.asarray(lam, dtype=float)
        br = self.branch
        if br is Branch.PURE_ARCTAN:
            return 1.0 / (1.0 + lam * lam)
        if br is Branch.INVERSE:
            return SQRT2 / (1.0 + lam) ** 2
        a, b, s = self.a, self.b, self._scale
        if br is Branch.ARCTAN:
            return s / ((lam + a) ** 2 + b * b)
        return s / ((lam + self._amb) * (lam + a + b))

    def profile_d2(self, lam):
        lam = np.asarray(lam, dtype=float)
        br = self.branch
        if br is Branch.PURE_ARCTAN:
            return -2.0 * lam / (1.0 + lam * lam) ** 2
        if br is Branch.INVERSE:
            return -2.0 * SQRT2 / (1.0 + lam) ** 3
        a, b, s = self.a, self.b, self._scale
        if br is Branch.ARCTAN:
            return -2.0 * s * (lam + a) / ((lam + a) ** 2 + b * b) ** 2
        return -2.0 * s * (lam + a) / ((lam + self._amb) * (lam + a + b)) ** 2

    # -- spectral operations ----------------------------------------------

    def eval(self, lam):
        """F_tau(lambda); strictly increasing in every component."""
        return np.sum(self.profile(as_spectrum(lam)), axis=-1)[()]

    def grad(self, lam):
        return self.profile_d1(as_spectrum(lam))

    def hess(self, lam):
        """Diagonal Hessian matrix (or stack of them)."""
        d2 = self.profile_d2(as_spectrum(lam))
        return d2[..., :, None] * np.eye(d2.shape[-1])

    def endpoints(self, n: int) -> tuple[float, float]:
        """``(F(0,...,0), F(+inf,...,+inf))``."""
        if n < 1:
            raise ValueError("n must be >= 1")
        a, b, s = self.a, self.b, self._scale
        br = self.branch
        if br is Branch.PURE_ARCTAN:
            return 0.0, n * math.pi / 2
        if br is Branch.INVERSE:
            return -SQRT2 * n, 0.0
        if br is Branch.ARCTAN:
            return n * s / b * math.atan((a - b) / (a + b)), n * math.pi * s / (4.0 * b)
        return n * s / (2.0 * b) * (math.log(self._amb) - math.log(a + b)), 0.0

    def dual_eval(self, mu):
        """F~(mu) = -F(1/mu)."""
        mu = as_spectrum(mu)
        return -self.eval(1.0 / mu)

    def dual_grad(self, mu):
        mu = as_spectrum(mu)
        lam = 1.0 / mu
        return lam * lam * self.profile_d1(lam)

    def dual_hess(self, mu):
        """Closed-form diagonal Hessian of the dual operator."""
        mu = as_spectrum(mu)
        lam = 1.0 / mu
        d2 = -lam ** 3 * (lam * self.profile_d2(lam) + 2.0 * self.profile_d1(lam))
        return d2[..., :, None] * np.eye(d2.shape[-1])

    def level_inverse(self, level: float, n: int, *, tol: float = 1e-14) -> float:
        """Solve ``F(s, ..., s) = level`` for s > 0 by bisection."""
        from .errors import LevelOutOfRange

        lo_val, hi_val = self.endpoints(n)
        if not lo_val < level < hi_val:
            raise LevelOutOfRange(
                f"level {level!r} outside ({lo_val!r}, {hi_val!r}) for tau={self.tau!r}")
        per = level / n
        lo, hi = 1.0, 1.0
        while float(self.profile(lo)) > per:
            lo *= 0.5
        while float(self.profile(hi)) < per:
            hi *= 2.0
        for _ in range(400):
            mid = 0.5 * (lo + hi)
            if float(self.profile(mid)) < per:
                lo = mid
            else:
                hi = mid
            if hi - lo <= tol * hi:
                break
        return 0.5 * (lo + hi)

    def structure_window(self, s1: float, s2: float, n: int):
        """Trace windows for ``sum dF/dl_i`` and ``sum dF/dl_i * l_i^2``."""
        if not (s1 > 0.0 and s2 > 0.0):
            raise InvalidWindow(f"s1 and s2 must be positive, got {s1!r}, {s2!r}")
        if n < 1:
            raise InvalidWindow("n must be >= 1")
        a, b, s = self.a, self.b, self._scale
        br = self.branch
        if br is Branch.PURE_ARCTAN:
            w1 = (1.0 / (1.0 + s1 * s1), float(n))
            w2 = (s2 * s2 / (1.0 + s2 * s2), float(n))
        elif br is Branch.INVERSE:
            w1 = (SQRT2 / (1.0 + s1) ** 2, n * SQRT2)
            w2 = (s2 * s2 * SQRT2 / (1.0 + s2) ** 2, n * SQRT2)
        elif br is Branch.ARCTAN:
            w1 = (s / ((s1 + a) ** 2 + b * b), n * s / (a * a + b * b))
            w2 = (s2 * s2 * s / ((s2 + a) ** 2 + b * b), n * s)
        else:
            w1 = (s / ((s1 + self._amb) * (s1 + a + b)), n * s / (self._amb * (a + b)))
            w2 = (s2 * s2 * s / ((s2 + self._amb) * (s2 + a + b)), n * s)
        return StructureWindow(s1, s2, *w1), StructureWindow(s1, s2, *w2)


Tau = SpectralOperator
