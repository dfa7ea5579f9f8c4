"""Domain boundary and interface curves: frames, projections, signed distances.

Conventions used throughout the package:

* ``J`` is the counter-clockwise rotation by 90 degrees and every tangent
  is ``tau = J^T n`` for its unit normal ``n``.
* The boundary normal points into the domain and the boundary curvature is
  measured against it, so the unit circle has curvature ``+1``.
* The interface normal points into the phase ``A``; the signed distance to
  the interface is positive on that side and its curvature ``H = -lap s``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
from numpy.polynomial import chebyshev as cheb
from scipy.linalg import null_space
from scipy.spatial import cKDTree

from .potentials import _GL_W, _GL_X


class ProjectionError(RuntimeError):
    """Newton projection failed to converge."""


class CurveError(ValueError):
    """Invalid interface curve (endpoints off the boundary, self-intersections, ...)."""


def rot_ccw(v: np.ndarray) -> np.ndarray:
    """Apply ``J`` (counter-clockwise quarter turn) along the last axis."""
    v = np.asarray(v, dtype=float)
    return np.stack([-v[..., 1], v[..., 0]], axis=-1)


def tangent_from_normal(n: np.ndarray) -> np.ndarray:
    """``tau = J^T n``."""
    n = np.asarray(n, dtype=float)
    return np.stack([n[..., 1], -n[..., 0]], axis=-1)


@dataclass(frozen=True)
class Frame:
    """Point, unit normal, unit tangent ``J^T n`` and curvature (arrays broadcast)."""

    point: np.ndarray
    normal: np.ndarray
    tangent: np.ndarray
    curvature: np.ndarray


# ----------------------------------------------------------------------------
# Domain boundary
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class DomainBoundary:
    """Axis-aligned ellipse centred at the origin, traversed counter-clockwise.

    ``a = b = 1`` is the unit disk used by every experiment.
    """

    a: float = 1.0
    b: float = 1.0

    @property
    def is_circle(self) -> bool:
        return self.a == self.b

    @property
    def tube_radius(self) -> float:
        """Half the smallest radius of curvature."""
        return 0.5 * min(self.b**2 / self.a, self.a**2 / self.b)

    @property
    def perimeter(self) -> float:
        th = np.linspace(0.0, 2 * np.pi, 4097)[:-1]
        return float(np.mean(np.linalg.norm(self.d1(th), axis=-1)) * 2 * np.pi)

    def position(self, theta):
        theta = np.asarray(theta, dtype=float)
        return np.stack([self.a * np.cos(theta), self.b * np.sin(theta)], axis=-1)

    def d1(self, theta):
        theta = np.asarray(theta, dtype=float)
        return np.stack([-self.a * np.sin(theta), self.b * np.cos(theta)], axis=-1)

    def d2(self, theta):
        theta = np.asarray(theta, dtype=float)
        return np.stack([-self.a * np.cos(theta), -self.b * np.sin(theta)], axis=-1)

    def d3(self, theta):
        theta = np.asarray(theta, dtype=float)
        return np.stack([self.a * np.sin(theta), -self.b * np.cos(theta)], axis=-1)

    def frame(self, theta) -> Frame:
        p1 = self.d1(theta)
        p2 = self.d2(theta)
        speed = np.linalg.norm(p1, axis=-1)
        t = p1 / speed[..., None]
        n = rot_ccw(t)
        k = (p1[..., 0] * p2[..., 1] - p1[..., 1] * p2[..., 0]) / speed**3
        return Frame(point=self.position(theta), normal=n, tangent=tangent_from_normal(n),
                     curvature=k)

    def curvature_derivative(self, theta):
        """Arclength derivative of the curvature along the counter-clockwise tangent."""
        p1, p2, p3 = self.d1(theta), self.d2(theta), self.d3(theta)
        speed2 = np.sum(p1 * p1, axis=-1)
        c = p1[..., 0] * p2[..., 1] - p1[..., 1] * p2[..., 0]
        dc = p1[..., 0] * p3[..., 1] - p1[..., 1] * p3[..., 0]
        dk = dc / speed2**1.5 - 1.5 * c * 2 * np.sum(p1 * p2, axis=-1) / speed2**2.5
        return dk / np.sqrt(speed2)

    def contains(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return (x[..., 0] / self.a) ** 2 + (x[..., 1] / self.b) ** 2 < 1.0

    def project(self, x, max_iter: int = 50, tol: float = 1e-14):
        """Closest boundary parameter and signed distance (positive inside)."""
        x = np.asarray(x, dtype=float)
        shape = x.shape[:-1]
        pts = x.reshape(-1, 2)
        if self.is_circle:
            theta = np.arctan2(pts[:, 1], pts[:, 0])
            s = self.a - np.linalg.norm(pts, axis=1)
            return theta.reshape(shape), s.reshape(shape)
        scan = np.linspace(0.0, 2 * np.pi, 65)[:-1]
        cand = self.position(scan)
        d2 = np.sum((pts[:, None, :] - cand[None, :, :]) ** 2, axis=-1)
        theta = scan[np.argmin(d2, axis=1)]
        converged = np.zeros(len(pts), dtype=bool)
        for _ in range(max_iter):
            diff = self.position(theta) - pts
            p1 = self.d1(theta)
            f = np.sum(diff * p1, axis=1)
            fp = np.sum(p1 * p1, axis=1) + np.sum(diff * self.d2(theta), axis=1)
            fp = np.where(fp > 1e-12, fp, np.sum(p1 * p1, axis=1))
            step = np.clip(f / fp, -0.5, 0.5)
            theta = theta - step
            converged = np.abs(step) < tol
            if np.all(converged):
                break
        else:
            if not np.all(np.abs(step) < 1e-10):
                worst = int(np.argmax(np.abs(step)))
                raise ProjectionError(
                    f"boundary projection did not converge for x={pts[worst]} "
                    f"(last step {step[worst]:.3e})")
        theta = np.mod(theta, 2 * np.pi)
        fr = self.frame(theta)
        s = np.sum((pts - fr.point) * fr.normal, axis=1)
        return theta.reshape(shape), s.reshape(shape)

    def signed_distance(self, x) -> np.ndarray:
        return self.project(x)[1]


def boundary_frame(domain: DomainBoundary, theta) -> Frame:
    """Frame of the domain boundary at parameter ``theta`` (inward normal)."""
    return domain.frame(theta)


def project_to_boundary(domain: DomainBoundary, x):
    """Return ``(theta*, s)`` with ``s`` the signed distance, positive inside."""
    return domain.project(x)


# ----------------------------------------------------------------------------
# Smooth parametric representation of an open curve
# ----------------------------------------------------------------------------

_TAYLOR_ORDER = 4


class SmoothCurve:
    """Chebyshev least-squares fit ``X(u)``, ``u in [-1, 1]``, of an open polyline.

    Endpoint positions are interpolated exactly and, when given, the end
    tangent directions too.  Outside ``[-1, 1]`` the curve continues by its
    fourth-order Taylor polynomial, which keeps four derivatives continuous
    across the endpoints.
    """

    def __init__(self, nodes: np.ndarray, degree: int | None = None,
                 end_tangents: tuple[np.ndarray, np.ndarray] | None = None,
                 extension: float = 0.5):
        nodes = np.asarray(nodes, dtype=float)
        n = len(nodes)
        if n < 2:
            raise CurveError("need at least two nodes")
        if degree is None:
            degree = default_degree(n)
        degree = int(min(degree, n - 1 + (2 if end_tangents is not None else 0)))
        degree = max(degree, 1)
        chord = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(nodes, axis=0), axis=1))])
        u = -1.0 + 2.0 * chord / chord[-1]
        self.degree = degree
        self.coef = self._fit(u, nodes, degree, end_tangents)
        self._finish(extension)

    @classmethod
    def from_coefficients(cls, coef: np.ndarray, extension: float = 0.5) -> "SmoothCurve":
        """Curve with prescribed Chebyshev coefficients (shape ``(degree + 1, 2)``)."""
        obj = cls.__new__(cls)
        obj.coef = np.array(coef, dtype=float)
        obj.degree = len(obj.coef) - 1
        obj._finish(extension)
        return obj

    def _finish(self, extension: float) -> None:
        degree = self.degree
        self._derivs = [self.coef]
        for _ in range(_TAYLOR_ORDER + 1):
            self._derivs.append(cheb.chebder(self._derivs[-1], axis=0)
                                if len(self._derivs[-1]) > 1 else np.zeros((1, 2)))
        self._end_taylor = {}
        for end in (-1.0, 1.0):
            self._end_taylor[end] = np.array(
                [cheb.chebval(end, c).T for c in self._derivs[: _TAYLOR_ORDER + 1]])
        # Arclength on [-1, 1] via a Chebyshev interpolant of the speed.
        m = 4 * degree + 16
        cn = np.cos(np.pi * (np.arange(m) + 0.5) / m)
        speed = np.linalg.norm(self._raw(cn, 1), axis=-1)
        sc = cheb.chebfit(cn, speed, m - 1)
        self._arc_coef = cheb.chebint(sc, lbnd=-1.0)
        self.length = float(cheb.chebval(1.0, self._arc_coef))
        sp = np.linalg.norm(self.derivative(np.array([-1.0, 1.0]), 1), axis=-1)
        self.u_lo = -1.0 - extension / sp[0]
        self.u_hi = 1.0 + extension / sp[1]

    @staticmethod
    def _fit(u, nodes, degree, end_tangents):
        V = cheb.chebvander(u, degree)
        nb = degree + 1
        A = np.zeros((2 * len(u), 2 * nb))
        A[: len(u), :nb] = V
        A[len(u):, nb:] = V
        b = np.concatenate([nodes[:, 0], nodes[:, 1]])
        rows = []
        rhs = []
        v_lo = cheb.chebvander(np.array([-1.0]), degree)[0]
        v_hi = cheb.chebvander(np.array([1.0]), degree)[0]
        for vv, pt in ((v_lo, nodes[0]), (v_hi, nodes[-1])):
            for comp in range(2):
                row = np.zeros(2 * nb)
                row[comp * nb:(comp + 1) * nb] = vv
                rows.append(row)
                rhs.append(pt[comp])
        if end_tangents is not None:
            k = np.arange(nb, dtype=float)
            dv_hi = k**2
            dv_lo = (-1.0) ** (k + 1) * k**2
            for dv, t in ((dv_lo, end_tangents[0]), (dv_hi, end_tangents[1])):
                row = np.zeros(2 * nb)
                row[:nb] = dv * t[1]
                row[nb:] = -dv * t[0]
                rows.append(row)
                rhs.append(0.0)
        C = np.array(rows)
        e = np.array(rhs)
        cp = np.linalg.lstsq(C, e, rcond=None)[0]
        Z = null_space(C)
        if Z.shape[1] == 0:
            c = cp
        else:
            z = np.linalg.lstsq(A @ Z, b - A @ cp, rcond=None)[0]
            c = cp + Z @ z
        return np.stack([c[:nb], c[nb:]], axis=1)

    def _raw(self, u, order):
        c = self._derivs[order]
        return cheb.chebval(u, c).T

    def derivative(self, u, order: int = 0) -> np.ndarray:
        """``d^order X / du^order`` including the Taylor continuation."""
        u = np.asarray(u, dtype=float)
        shape = u.shape
        u = u.ravel()
        out = np.atleast_2d(self._raw(np.clip(u, -1.0, 1.0), order))
        for end, mask in ((-1.0, u < -1.0), (1.0, u > 1.0)):
            if np.any(mask):
                du = (u[mask] - end)[:, None]
                tay = self._end_taylor[end]
                val = np.zeros((int(mask.sum()), 2))
                fact = 1.0
                for j in range(order, _TAYLOR_ORDER + 1):
                    val += tay[j] * du ** (j - order) / fact
                    fact *= (j - order + 1)
                out[mask] = val
        return out.reshape(shape + (2,))

    def arclength(self, u) -> np.ndarray:
        """Arclength measured from ``u = -1`` (negative before it)."""
        u = np.asarray(u, dtype=float)
        uc = np.clip(u, -1.0, 1.0)
        s = cheb.chebval(uc, self._arc_coef)
        ext = u != uc
        if np.any(ext):
            a = uc[ext]
            d = u[ext] - a
            pts = a[:, None] + d[:, None] * _GL_X[None, :]
            sp = np.linalg.norm(self.derivative(pts.ravel(), 1), axis=-1).reshape(pts.shape)
            s = s.copy()
            s[ext] += d * (sp @ _GL_W)
        return s

    def param_of_arclength(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        u = -1.0 + 2.0 * s / self.length
        for _ in range(30):
            sp = np.linalg.norm(self.derivative(u, 1), axis=-1)
            du = (self.arclength(u) - s) / sp
            u = u - du
            if np.max(np.abs(du), initial=0.0) < 1e-15:
                break
        return u

    def geometry(self, u) -> dict:
        """Point, unit tangent, left normal, signed curvature ``k`` and ``dk/ds``."""
        u = np.asarray(u, dtype=float)
        x0 = self.derivative(u, 0)
        x1 = self.derivative(u, 1)
        x2 = self.derivative(u, 2)
        x3 = self.derivative(u, 3)
        sp2 = np.sum(x1 * x1, axis=-1)
        sp = np.sqrt(sp2)
        t = x1 / sp[..., None]
        c = x1[..., 0] * x2[..., 1] - x1[..., 1] * x2[..., 0]
        dc = x1[..., 0] * x3[..., 1] - x1[..., 1] * x3[..., 0]
        k = c / sp**3
        dk_du = dc / sp**3 - 3.0 * c * np.sum(x1 * x2, axis=-1) / sp**5
        return {"point": x0, "tangent": t, "left": rot_ccw(t), "k": k, "dk": dk_du / sp,
                "speed": sp}

    def dense(self, n: int = 2001, extended: bool = True):
        lo, hi = (self.u_lo, self.u_hi) if extended else (-1.0, 1.0)
        u = np.linspace(lo, hi, n)
        return u, self.derivative(u, 0)


def default_degree(n_nodes: int) -> int:
    """Polynomial degree used for an ``n_nodes`` polyline (well-conditioned LSQ)."""
    return int(max(1, min(n_nodes - 1, max(4, int(2.0 * np.sqrt(n_nodes))), 36)))


# ----------------------------------------------------------------------------
# Interface curves
# ----------------------------------------------------------------------------

class InterfaceCurve:
    """Open polyline from one contact point to the other.

    ``orientation = +1`` means that the phase ``A`` lies to the left of the
    node ordering, so ``n_I = J T`` and ``tau_I = T`` for the unit tangent
    ``T`` of the parametrisation; ``-1`` flips both.
    """

    def __init__(self, nodes, t: float = 0.0, orientation: int = 1,
                 domain: DomainBoundary | None = None, enforce_tangents: bool = False,
                 end_tangents: tuple[np.ndarray, np.ndarray] | None = None,
                 degree: int | None = None):
        self.nodes = np.array(nodes, dtype=float)
        self.nodes.setflags(write=False)
        self.t = float(t)
        if orientation not in (1, -1):
            raise ValueError("orientation must be +1 or -1")
        self.orientation = int(orientation)
        self.domain = domain
        self._enforce_tangents = enforce_tangents
        self._end_tangents = end_tangents
        self._degree = degree

    @classmethod
    def from_smooth(cls, smooth: SmoothCurve, t: float = 0.0, orientation: int = 1,
                    domain: DomainBoundary | None = None, n_nodes: int = 129) -> "InterfaceCurve":
        """Wrap an existing smooth representation; nodes are arclength-uniform samples of it."""
        u = smooth.param_of_arclength(np.linspace(0.0, smooth.length, n_nodes))
        u[0], u[-1] = -1.0, 1.0
        obj = cls(smooth.derivative(u, 0), t=t, orientation=orientation, domain=domain,
                  degree=smooth.degree)
        obj.__dict__["smooth"] = smooth
        return obj

    # -- smooth representation ---------------------------------------------
    @cached_property
    def smooth(self) -> SmoothCurve:
        tangents = self._end_tangents
        if tangents is None and self._enforce_tangents and len(self.nodes) >= 3:
            tangents = (one_sided_tangent(self.nodes, 0), -one_sided_tangent(self.nodes, -1))
        ext = 0.5 * min(1.0, float(np.linalg.norm(self.nodes[-1] - self.nodes[0])))
        return SmoothCurve(self.nodes, degree=self._degree, end_tangents=tangents,
                           extension=ext)

    @property
    def length(self) -> float:
        return self.smooth.length

    @property
    def endpoints(self) -> np.ndarray:
        return np.array([self.nodes[0], self.nodes[-1]])

    def frame_at_param(self, u) -> dict:
        g = self.smooth.geometry(u)
        o = self.orientation
        return {"point": g["point"], "normal": o * g["left"], "tangent": o * g["tangent"],
                "H": o * g["k"], "dH": g["dk"], "speed": g["speed"]}

    def frame(self, s_arc) -> Frame:
        u = self.smooth.param_of_arclength(s_arc)
        f = self.frame_at_param(u)
        return Frame(point=f["point"], normal=f["normal"], tangent=f["tangent"], curvature=f["H"])

    @cached_property
    def max_curvature(self) -> float:
        u = np.linspace(self.smooth.u_lo, self.smooth.u_hi, 4001)
        return float(np.max(np.abs(self.smooth.geometry(u)["k"])))

    @cached_property
    def tube_radius(self) -> float:
        r = 0.5 / max(self.max_curvature, 1e-12)
        r = min(r, 0.5 * float(np.linalg.norm(self.nodes[-1] - self.nodes[0])))
        return r

    @cached_property
    def _tree(self):
        u, pts = self.smooth.dense(4001)
        return u, cKDTree(pts)

    def project(self, x, max_iter: int = 40):
        """Foot parameter, signed distance, foot point and an in-tube flag.

        The foot parameter may lie on the Taylor continuation beyond the
        endpoints; ``in_tube`` is False beyond the continuation or when the
        distance exceeds the tube radius.
        """
        x = np.asarray(x, dtype=float)
        shape = x.shape[:-1]
        pts = x.reshape(-1, 2)
        udense, tree = self._tree
        _, idx = tree.query(pts)
        u = udense[idx]
        sm = self.smooth
        work = np.arange(len(u))
        for _ in range(max_iter):
            uw, xw = u[work], pts[work]
            p0 = sm.derivative(uw, 0)
            p1 = sm.derivative(uw, 1)
            p2 = sm.derivative(uw, 2)
            diff = p0 - xw
            f = np.sum(diff * p1, axis=1)
            speed2 = np.sum(p1 * p1, axis=1)
            fp = speed2 + np.sum(diff * p2, axis=1)
            fp = np.where(fp > 0.1 * speed2, fp, speed2)
            u_new = np.clip(uw - f / fp, sm.u_lo, sm.u_hi)
            u[work] = u_new
            work = work[np.abs(u_new - uw) >= 1e-15]
            if len(work) == 0:
                break
        g = self.frame_at_param(u)
        s = np.sum((pts - g["point"]) * g["normal"], axis=1)
        resid = np.abs(np.sum((pts - g["point"]) * g["tangent"], axis=1))
        in_tube = (np.abs(s) < self.tube_radius) & (u > sm.u_lo) & (u < sm.u_hi) & (resid < 1e-8)
        return {"u": u.reshape(shape), "s": s.reshape(shape),
                "foot": g["point"].reshape(shape + (2,)), "in_tube": in_tube.reshape(shape),
                "normal": g["normal"].reshape(shape + (2,)),
                "tangent": g["tangent"].reshape(shape + (2,)),
                "H": g["H"].reshape(shape), "dH": g["dH"].reshape(shape)}

    def distance(self, x) -> np.ndarray:
        """Unsigned distance to the curve itself (no continuation)."""
        x = np.asarray(x, dtype=float)
        pr = self.project(x)
        u = pr["u"]
        d = np.abs(pr["s"])
        inside = (u >= -1.0) & (u <= 1.0) & pr["in_tube"]
        d_end = np.minimum(np.linalg.norm(x - self.nodes[0], axis=-1),
                           np.linalg.norm(x - self.nodes[-1], axis=-1))
        if np.any(~inside):
            # fall back to the dense polyline for points far from the curve
            _, dense = self.smooth.dense(4001, extended=False)
            tree = cKDTree(dense)
            dd, _ = tree.query(x.reshape(-1, 2))
            dd = dd.reshape(d.shape)
            far = np.minimum(dd, d_end)
        else:
            far = d_end
        return np.where(inside, d, far)

    # -- validity ----------------------------------------------------------
    def validate(self, domain: DomainBoundary | None = None, tol: float = 1e-8) -> None:
        domain = domain or self.domain
        if domain is not None:
            _, s = domain.project(self.endpoints)
            if np.max(np.abs(s)) > tol:
                raise CurveError(f"contact points are off the boundary by {np.max(np.abs(s)):.3e}")
        if self_intersects(self.nodes):
            raise CurveError("interface polyline self-intersects")

    # -- phase region --------------------------------------------------------
    def region_polygon(self, domain: DomainBoundary | None = None, n_arc: int = 2048,
                       pad: float = 0.0, n_curve: int = 2001) -> np.ndarray:
        """Closed polygon around ``A``: the curve, then the boundary arc on the ``A`` side.

        With ``pad > 0`` the closing arc runs on the dilated boundary
        ``(1 + pad) * position``, so that points of the domain never lie
        close to the polygon's artificial edges.
        """
        domain = domain or self.domain
        _, pts = self.smooth.dense(n_curve, extended=False)
        th0, _ = domain.project(pts[0])
        th1, _ = domain.project(pts[-1])
        th0, th1 = float(th0), float(th1)
        if self.orientation == 1:
            # A lies left of the curve: close counter-clockwise from the last point.
            arc = th1 + np.linspace(0.0, (th0 - th1) % (2 * np.pi), n_arc)
        else:
            arc = th1 - np.linspace(0.0, (th1 - th0) % (2 * np.pi), n_arc)
        ring = (1.0 + pad) * domain.position(arc)
        if pad == 0.0:
            ring = ring[1:-1]
        return np.concatenate([pts, ring])

    @cached_property
    def _region_paths(self):
        """Fine and coarse region polygons, and the band where only the fine one is trusted."""
        from matplotlib.path import Path as MplPath
        fine = self.region_polygon(self.domain, pad=0.05)
        m = 41
        coarse = self.region_polygon(self.domain, pad=0.05, n_curve=m, n_arc=96)
        _, dense = self.smooth.dense(2001, extended=False)
        spacing = float(np.max(np.linalg.norm(np.diff(dense, axis=0), axis=1)))
        # the coarse curve is a chordal subset of the dense one: bound its deviation
        a, b = coarse[:m - 1], coarse[1:m]
        k = np.clip(np.searchsorted(np.linspace(0, 1, m), np.linspace(0, 1, 2001), "right") - 1,
                    0, m - 2)
        ab = b[k] - a[k]
        s = np.clip(np.sum((dense - a[k]) * ab, axis=1) / np.sum(ab * ab, axis=1), 0.0, 1.0)
        sag = float(np.max(np.linalg.norm(dense - a[k] - s[:, None] * ab, axis=1)))
        return MplPath(fine), MplPath(coarse), cKDTree(dense), 2.0 * (sag + spacing) + 1e-9

    def in_region(self, x) -> np.ndarray:
        """True for points of the domain that belong to ``A`` (curve side test).

        A coarse polygon decides points away from the curve; points within
        its deviation band are re-tested against the fine polygon.
        """
        if self.domain is None:
            raise CurveError("in_region needs the curve's domain")
        x = np.asarray(x, dtype=float)
        shape = x.shape[:-1]
        pts = x.reshape(-1, 2)
        fine, coarse, tree, band = self._region_paths
        out = coarse.contains_points(pts)
        d, _ = tree.query(pts, distance_upper_bound=band)
        near = np.isfinite(d)
        if np.any(near):
            out[near] = fine.contains_points(pts[near])
        return out.reshape(shape)

    # -- I/O ---------------------------------------------------------------
    def write(self, path) -> None:
        path = Path(path)
        lines = [f"# t={self.t!r}"] + [f"{float(p[0])!r} {float(p[1])!r}" for p in self.nodes]
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")

    @classmethod
    def read(cls, path, orientation: int = 1, domain: DomainBoundary | None = None):
        t = 0.0
        pts = []
        for line in Path(path).read_text(encoding="utf-8").splitlines():
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                if line[1:].strip().startswith("t="):
                    t = float(line[1:].strip()[2:])
                continue
            x, y = line.split()
            pts.append((float(x), float(y)))
        return cls(np.array(pts), t=t, orientation=orientation, domain=domain)

    def with_nodes(self, nodes, t=None, **kw) -> "InterfaceCurve":
        return InterfaceCurve(nodes, t=self.t if t is None else t, orientation=self.orientation,
                              domain=self.domain, **kw)


def fd_weights(x0: float, xs: np.ndarray, order: int) -> np.ndarray:
    """Finite-difference weights for the ``order``-th derivative at ``x0`` (Fornberg)."""
    xs = np.asarray(xs, dtype=float)
    n = len(xs)
    c = np.zeros((n, order + 1))
    c1 = 1.0
    c4 = xs[0] - x0
    c[0, 0] = 1.0
    for i in range(1, n):
        mn = min(i, order)
        c2 = 1.0
        c5 = c4
        c4 = xs[i] - x0
        for j in range(i):
            c3 = xs[i] - xs[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c[:, order]


def one_sided_tangent(nodes: np.ndarray, end: int, n_points: int = 5) -> np.ndarray:
    """One-sided unit tangent at ``end`` (0 or -1) pointing into the curve.

    Uses ``n_points`` nodes, i.e. order ``n_points - 1`` in the node spacing.
    """
    m = min(n_points, len(nodes))
    pts = nodes[:m] if end == 0 else nodes[::-1][:m]
    arc = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(pts, axis=0), axis=1))])
    w = fd_weights(0.0, arc, 1)
    t = w @ pts
    return t / np.linalg.norm(t)


def self_intersects(nodes: np.ndarray) -> bool:
    """Segment-pair intersection test for non-adjacent segments.

    Only pairs whose midpoints are within one maximal segment length can
    meet, so candidates come from a k-d tree of the midpoints.
    """
    a = nodes[:-1]
    b = nodes[1:]
    m = len(a)
    if m < 3:
        return False
    d = b - a
    lengths = np.linalg.norm(d, axis=1)
    pairs = cKDTree(0.5 * (a + b)).query_pairs(float(lengths.max()) * (1 + 1e-9),
                                               output_type="ndarray")
    if len(pairs) == 0:
        return False
    i, j = np.sort(pairs, axis=1).T
    far = j - i >= 2
    i, j = i[far], j[far]

    def cross(u, v):
        return u[..., 0] * v[..., 1] - u[..., 1] * v[..., 0]

    r, s = d[i], d[j]
    qp = a[j] - a[i]
    den = cross(r, s)
    ok = np.abs(den) > 1e-300
    with np.errstate(divide="ignore", invalid="ignore"):
        t1 = cross(qp, s) / den
        t2 = cross(qp, r) / den
    hit = ok & (t1 > 0) & (t1 < 1) & (t2 > 0) & (t2 < 1)
    return bool(np.any(hit))


def interface_frame(curve: InterfaceCurve, s_arc) -> Frame:
    """Frame of the interface at arclength ``s_arc`` from the first node."""
    return curve.frame(s_arc)


def project_to_interface(curve: InterfaceCurve, x):
    """Return ``(s_arc*, s_I, in_tube)`` for query points ``x``."""
    pr = curve.project(x)
    return curve.smooth.arclength(pr["u"]), pr["s"], pr["in_tube"]


def interface_derivatives(curve: InterfaceCurve, s_arc) -> np.ndarray:
    """``tau_I . grad H_I`` at arclength ``s_arc``."""
    u = curve.smooth.param_of_arclength(s_arc)
    return curve.frame_at_param(u)["dH"]


# ----------------------------------------------------------------------------
# Standard test curves
# ----------------------------------------------------------------------------

def diameter_curve(n_nodes: int = 65, t: float = 0.0) -> InterfaceCurve:
    """Horizontal diameter of the unit disk from (1, 0) to (-1, 0); ``A`` is the upper half."""
    x = np.linspace(1.0, -1.0, n_nodes)
    nodes = np.stack([x, np.zeros_like(x)], axis=1)
    # Traversed right to left, the upper half lies to the right, hence -1.
    return InterfaceCurve(nodes, t=t, orientation=-1, domain=DomainBoundary())


def orthogonal_arc(center_x: float, alpha: float, n_nodes: int = 129,
                   t: float = 0.0) -> InterfaceCurve:
    """Circular arc centred at ``(center_x, 0)`` meeting the unit circle at angle ``alpha``.

    ``A`` is the part of the disk inside the arc's circle and the angle
    satisfies ``n_I . n_dOmega = cos(alpha)``.  Nodes run from the upper
    contact point to the lower one.
    """
    c = float(center_x)
    ca = np.cos(alpha)
    # From |p| = 1, |p - C| = R and n_I . n_dOmega = (1 - p.C) / R = cos(alpha).
    R = ca + np.sqrt(ca**2 + c**2 - 1.0)
    px = (1.0 + c**2 - R**2) / (2.0 * c)
    py = np.sqrt(max(1.0 - px**2, 0.0))
    phi_top = np.arctan2(py, px - c)
    phis = np.linspace(phi_top, 2 * np.pi - phi_top, n_nodes)
    nodes = np.stack([c + R * np.cos(phis), R * np.sin(phis)], axis=1)
    nodes[0] = [px, py]
    nodes[-1] = [px, -py]
    # Counter-clockwise around the centre, so A lies on the left.
    return InterfaceCurve(nodes, t=t, orientation=1, domain=DomainBoundary())
