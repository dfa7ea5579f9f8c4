"""Double-well potentials, boundary energy densities and the optimal profile.

The quartic well ``W(u) = (1 - u**2)**2 / 2`` is the default.  Every other
object in the package only talks to a :class:`DoubleWell` through its
callables, so user supplied wells work as long as they pass
:func:`validate_well`.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.interpolate import CubicHermiteSpline

ScalarFn = Callable[[np.ndarray], np.ndarray]

# Gauss-Legendre rule on [0, 1] used for every antiderivative of sqrt(2W).
_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)
_GL_X = 0.5 * (_GL_X + 1.0)
_GL_W = 0.5 * _GL_W


class ValidationError(ValueError):
    """Raised when a potential or boundary density violates its assumptions."""


@dataclass(frozen=True)
class DoubleWell:
    """Double-well potential with a convex/concave splitting.

    ``convex_split`` holds ``((W1, W1'), (W2, W2'))`` with ``W = W1 + W2``,
    ``W1`` convex and ``W2''`` bounded; ``convex_second`` is ``W1''``.
    """

    eval: ScalarFn
    deriv: ScalarFn
    second_deriv: ScalarFn
    convex_split: tuple[tuple[ScalarFn, ScalarFn], tuple[ScalarFn, ScalarFn]]
    convex_second: ScalarFn
    growth_exponent: float = 4.0
    name: str = "custom"

    def sqrt2w(self, u: np.ndarray) -> np.ndarray:
        return np.sqrt(2.0 * np.maximum(self.eval(u), 0.0))


def make_quartic_well() -> DoubleWell:
    """Return ``W(u) = (1 - u^2)^2 / 2`` split as ``(u^4 + 1)/2`` plus ``-u^2``."""

    def w(u):
        u = np.asarray(u, dtype=float)
        return 0.5 * (1.0 - u * u) ** 2

    def dw(u):
        u = np.asarray(u, dtype=float)
        return -2.0 * u * (1.0 - u * u)

    def d2w(u):
        u = np.asarray(u, dtype=float)
        return 6.0 * u * u - 2.0

    def w1(u):
        u = np.asarray(u, dtype=float)
        return 0.5 * (u**4 + 1.0)

    def dw1(u):
        u = np.asarray(u, dtype=float)
        return 2.0 * u**3

    def d2w1(u):
        u = np.asarray(u, dtype=float)
        return 6.0 * u * u

    def w2(u):
        u = np.asarray(u, dtype=float)
        return -u * u

    def dw2(u):
        u = np.asarray(u, dtype=float)
        return -2.0 * u

    well = DoubleWell(
        eval=w,
        deriv=dw,
        second_deriv=d2w,
        convex_split=((w1, dw1), (w2, dw2)),
        convex_second=d2w1,
        growth_exponent=4.0,
        name="quartic W(u)=(1-u^2)^2/2",
    )
    validate_well(well)
    return well


def validate_well(well: DoubleWell, n_samples: int = 4001, u_max: float = 3.0) -> None:
    """Sample the double-well assumptions and raise :class:`ValidationError`."""
    for root in (-1.0, 1.0):
        if abs(well.eval(root)) > 1e-12 or abs(well.deriv(root)) > 1e-12:
            raise ValidationError(f"W or W' does not vanish at u={root}")
        if well.second_deriv(root) <= 0.0:
            raise ValidationError(f"W''({root}) must be positive")
    u = np.linspace(-u_max, u_max, n_samples)
    wu = well.eval(u)
    away = np.abs(np.abs(u) - 1.0) > 1e-9
    if np.any(wu[away] <= 0.0):
        bad = u[away][np.argmin(wu[away])]
        raise ValidationError(f"W must be positive away from +-1 (fails at u={bad:.6g})")
    (w1, _), (w2, _) = well.convex_split
    if np.max(np.abs(w1(u) + w2(u) - wu)) > 1e-10 * (1.0 + np.max(np.abs(wu))):
        raise ValidationError("convex split does not sum to W")
    h = u[1] - u[0]
    second = (w1(u[2:]) - 2.0 * w1(u[1:-1]) + w1(u[:-2])) / h**2
    if np.any(second < -1e-8 * (1.0 + np.abs(second).max())):
        raise ValidationError("W1 is not convex on the sample grid")
    w2_second = (w2(u[2:]) - 2.0 * w2(u[1:-1]) + w2(u[:-2])) / h**2
    if np.max(np.abs(w2_second)) > 1e3:
        raise ValidationError("W2'' is not bounded on the sample grid")


@dataclass(frozen=True)
class ProfileTable:
    """Tabulated optimal profile ``theta0`` with ``theta0' = sqrt(2 W(theta0))``."""

    r: np.ndarray
    theta: np.ndarray
    dtheta: np.ndarray
    c0: float
    well: DoubleWell
    _panel_edges: np.ndarray = field(repr=False)
    _panel_cumsum: np.ndarray = field(repr=False)
    _interp: CubicHermiteSpline = field(repr=False)

    @property
    def R_prof(self) -> float:
        return float(self.r[-1])

    def theta0(self, r: np.ndarray) -> np.ndarray:
        """Profile value; clamped to +-1 outside the tabulated window."""
        r = np.asarray(r, dtype=float)
        inside = np.abs(r) <= self.R_prof
        out = np.where(r > 0, 1.0, -1.0)
        return np.where(inside, self._interp(np.clip(r, -self.R_prof, self.R_prof)), out)

    def dtheta0(self, r: np.ndarray) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        inside = np.abs(r) <= self.R_prof
        vals = self._interp(np.clip(r, -self.R_prof, self.R_prof), 1)
        return np.where(inside, vals, 0.0)

    def psi(self, u: np.ndarray) -> np.ndarray:
        """Antiderivative of ``sqrt(2W)`` from -1, constant outside [-1, 1]."""
        u = np.clip(np.asarray(u, dtype=float), -1.0, 1.0)
        edges = self._panel_edges
        k = np.clip(np.searchsorted(edges, u, side="right") - 1, 0, len(edges) - 2)
        a = edges[k]
        length = u - a
        pts = a[..., None] + length[..., None] * _GL_X
        partial = length * (self.well.sqrt2w(pts) @ _GL_W)
        return self._panel_cumsum[k] + partial

    def dpsi(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        return np.where(np.abs(u) <= 1.0, self.well.sqrt2w(np.clip(u, -1.0, 1.0)), 0.0)


def build_profile(well: DoubleWell, R_prof: float = 12.0, h_ode: float = 1e-3,
                  n_panels: int = 256) -> ProfileTable:
    """Integrate the profile ODE by classical RK4 in both directions from 0."""
    if R_prof <= 0 or h_ode <= 0:
        raise ValueError("R_prof and h_ode must be positive")
    validate_well(well)

    def rhs(th):
        return well.sqrt2w(th)

    n = int(np.ceil(R_prof / h_ode))
    h = R_prof / n
    # Forward and backward branches advance together as one 2-vector.
    direction = np.array([1.0, -1.0])
    th = np.zeros(2)
    vals = np.empty((n + 1, 2))
    vals[0] = th
    for i in range(n):
        k1 = direction * rhs(th)
        k2 = direction * rhs(th + 0.5 * h * k1)
        k3 = direction * rhs(th + 0.5 * h * k2)
        k4 = direction * rhs(th + h * k3)
        th = np.clip(th + h * (k1 + 2 * k2 + 2 * k3 + k4) / 6.0, -1.0, 1.0)
        vals[i + 1] = th
    pos, neg = vals[:, 0], vals[:, 1]
    r = np.concatenate([-h * np.arange(n, 0, -1), h * np.arange(n + 1)])
    theta = np.concatenate([neg[:0:-1], pos])
    dtheta = rhs(theta)

    edges = np.linspace(-1.0, 1.0, n_panels + 1)
    widths = np.diff(edges)
    pts = edges[:-1, None] + widths[:, None] * _GL_X
    panel = widths * (well.sqrt2w(pts) @ _GL_W)
    cumsum = np.concatenate([[0.0], np.cumsum(panel)])
    c0 = float(cumsum[-1])

    interp = CubicHermiteSpline(r, theta, dtheta)
    return ProfileTable(r=r, theta=theta, dtheta=dtheta, c0=c0, well=well,
                        _panel_edges=edges, _panel_cumsum=cumsum, _interp=interp)


@dataclass(frozen=True)
class BoundaryDensity:
    """Boundary energy density ``sigma`` with its first two derivatives."""

    eval: ScalarFn
    deriv: ScalarFn
    second_deriv: ScalarFn
    alpha: float
    kind: str
    kappa: float = 0.0

    @property
    def cos_alpha(self) -> float:
        return float(np.cos(self.alpha))


def _dsqrt2w(well: DoubleWell, u: np.ndarray) -> np.ndarray:
    """Derivative of sqrt(2W) on [-1, 1], with the one-sided limits at +-1."""
    u = np.asarray(u, dtype=float)
    s = well.sqrt2w(u)
    safe = s > 1e-10
    with np.errstate(divide="ignore", invalid="ignore"):
        val = np.where(safe, well.deriv(u) / np.where(safe, s, 1.0), 0.0)
    limit_p = -np.sqrt(well.second_deriv(1.0))
    limit_m = np.sqrt(well.second_deriv(-1.0))
    val = np.where(~safe & (u > 0), limit_p, val)
    return np.where(~safe & (u <= 0), limit_m, val)


def make_special_sigma(profile: ProfileTable, alpha: float) -> BoundaryDensity:
    """``sigma = cos(alpha) * psi`` clipped to [-1, 1]; no boundary layer for profiles."""
    if not 0.0 < alpha <= np.pi / 2 + 1e-15:
        raise ValueError("contact angle must lie in (0, pi/2]")
    ca = 0.0 if abs(alpha - np.pi / 2) < 1e-15 else float(np.cos(alpha))

    def ev(u):
        return ca * profile.psi(u)

    def d1(u):
        return ca * profile.dpsi(u)

    def d2(u):
        u = np.asarray(u, dtype=float)
        return np.where(np.abs(u) <= 1.0, ca * _dsqrt2w(profile.well, np.clip(u, -1, 1)), 0.0)

    sigma = BoundaryDensity(eval=ev, deriv=d1, second_deriv=d2, alpha=alpha, kind="special")
    validate_boundary_density(sigma, profile)
    return sigma


def make_bump_sigma(profile: ProfileTable, alpha: float, kappa: float) -> BoundaryDensity:
    """``sigma = cos(alpha) psi + kappa (1 - u^2)^2`` on [-1, 1]."""
    if not 0.0 < alpha <= np.pi / 2 + 1e-15:
        raise ValueError("contact angle must lie in (0, pi/2]")
    if kappa < 0.0:
        raise ValueError("kappa must be nonnegative")
    ca = 0.0 if abs(alpha - np.pi / 2) < 1e-15 else float(np.cos(alpha))

    def ev(u):
        u = np.asarray(u, dtype=float)
        uc = np.clip(u, -1.0, 1.0)
        return ca * profile.psi(uc) + kappa * (1.0 - uc * uc) ** 2

    def d1(u):
        u = np.asarray(u, dtype=float)
        inside = np.abs(u) <= 1.0
        uc = np.clip(u, -1.0, 1.0)
        return np.where(inside, ca * profile.dpsi(uc) - 4.0 * kappa * uc * (1.0 - uc * uc), 0.0)

    def d2(u):
        u = np.asarray(u, dtype=float)
        inside = np.abs(u) <= 1.0
        uc = np.clip(u, -1.0, 1.0)
        val = ca * _dsqrt2w(profile.well, uc) - 4.0 * kappa * (1.0 - 3.0 * uc * uc)
        return np.where(inside, val, 0.0)

    sigma = BoundaryDensity(eval=ev, deriv=d1, second_deriv=d2, alpha=alpha,
                            kind="bump", kappa=kappa)
    validate_boundary_density(sigma, profile)
    return sigma


def validate_boundary_density(sigma: BoundaryDensity, profile: ProfileTable,
                              n_samples: int = 20001) -> None:
    """Check monotonicity, support of ``sigma'``, endpoint values and the lower bound."""
    r = np.linspace(-1.5, 1.5, n_samples)
    d = sigma.deriv(r)
    tol = 1e-12
    if np.any(d < -tol):
        bad = r[np.argmin(d)]
        raise ValidationError(f"sigma' < 0 at r={bad:.6f} (sigma'={d.min():.3e})")
    outside = np.abs(r) > 1.0
    if np.any(np.abs(d[outside]) > tol):
        raise ValidationError("sigma' must vanish outside [-1, 1]")
    c0 = profile.c0
    ca = sigma.cos_alpha
    if abs(sigma.eval(-1.0)) > tol:
        raise ValidationError("sigma(-1) must be 0")
    if abs(sigma.eval(1.0) - c0 * ca) > tol:
        raise ValidationError("sigma(1) must equal c0 cos(alpha)")
    inside = ~outside
    gap = sigma.eval(r[inside]) - profile.psi(r[inside]) * ca
    if np.any(gap < -tol):
        bad = r[inside][np.argmin(gap)]
        raise ValidationError(f"sigma < psi cos(alpha) at r={bad:.6f}")
