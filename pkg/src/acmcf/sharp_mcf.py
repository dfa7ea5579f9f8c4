"""Front tracking for curve shortening flow with a constant contact angle.

The interface is a polyline whose interior nodes move with normal velocity
equal to the curvature.  Its two endpoints slide along the domain boundary;
after each step the nodes are redistributed to uniform arclength and each
endpoint is nudged along the boundary until the discrete end tangent meets
the boundary at the prescribed angle.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np
from numpy.polynomial import chebyshev as cheb
from scipy.interpolate import CubicSpline

from .geometry import DomainBoundary, InterfaceCurve, SmoothCurve, one_sided_tangent, rot_ccw, self_intersects


class EvolutionError(RuntimeError):
    """The polyline degenerated (collapsed spacing or self-intersection)."""


class DegenerateAngleError(ValueError):
    """Interface tangent to the boundary at a contact point."""


def _end_index(endpoint_id: int) -> int:
    if endpoint_id not in (0, 1):
        raise ValueError("endpoint_id must be 0 (first node) or 1 (last node)")
    return 0 if endpoint_id == 0 else -1


def _end_normal(nodes: np.ndarray, orientation: int, end: int) -> np.ndarray:
    """Interface normal at an endpoint from the one-sided tangent."""
    t_in = one_sided_tangent(nodes, end)
    t_param = t_in if end == 0 else -t_in
    return orientation * rot_ccw(t_param)


def angle_residual(curve: InterfaceCurve, domain: DomainBoundary, alpha: float) -> np.ndarray:
    """``n_I . n_dOmega - cos(alpha)`` at both endpoints, from the discrete tangents."""
    out = []
    for end in (0, -1):
        n_i = _end_normal(curve.nodes, curve.orientation, end)
        th, _ = domain.project(curve.nodes[end])
        out.append(float(n_i @ domain.frame(th).normal) - np.cos(alpha))
    return np.array(out)


def contact_velocity(curve: InterfaceCurve, domain: DomainBoundary, alpha: float,
                     endpoint_id: int) -> np.ndarray:
    """Boundary-tangential contact-point velocity with normal part equal to the curvature."""
    u = -1.0 if endpoint_id == 0 else 1.0
    _end_index(endpoint_id)
    f = curve.frame_at_param(np.array([u]))
    th, _ = domain.project(f["point"][0])
    bf = domain.frame(th)
    denom = float(bf.tangent @ f["normal"][0])
    if abs(denom) < 1e-6:
        raise DegenerateAngleError(f"|tau_dOmega . n_I| = {abs(denom):.2e} at endpoint {endpoint_id}")
    return float(f["H"][0]) / denom * bf.tangent


def check_third_order_compat(curve: InterfaceCurve, domain: DomainBoundary, alpha: float,
                             endpoint_id: int) -> float:
    """Residual of the third-order compatibility condition at a contact point."""
    _end_index(endpoint_id)
    u = -1.0 if endpoint_id == 0 else 1.0
    f = curve.frame_at_param(np.array([u]))
    th, _ = domain.project(f["point"][0])
    bf = domain.frame(th)
    H = float(f["H"][0])
    tau_i = f["tangent"][0]
    grad_h = float(f["dH"][0]) * tau_i
    res = -H * float(bf.curvature) + H**2 * float(tau_i @ bf.tangent) - float(bf.normal @ grad_h)
    return abs(res)


def _interior_velocity(nodes: np.ndarray, orientation: int) -> tuple[np.ndarray, np.ndarray]:
    d_minus = nodes[1:-1] - nodes[:-2]
    d_plus = nodes[2:] - nodes[1:-1]
    h_m = np.linalg.norm(d_minus, axis=1)
    h_p = np.linalg.norm(d_plus, axis=1)
    xss = 2.0 * (d_plus / h_p[:, None] - d_minus / h_m[:, None]) / (h_m + h_p)[:, None]
    t = nodes[2:] - nodes[:-2]
    t /= np.linalg.norm(t, axis=1)[:, None]
    n = orientation * rot_ccw(t)
    H = np.sum(xss * n, axis=1)
    return H[:, None] * n, H


def redistribute(nodes: np.ndarray, n_nodes: int | None = None) -> np.ndarray:
    """Resample a polyline to uniform arclength along its cubic-spline interpolant."""
    n_nodes = len(nodes) if n_nodes is None else n_nodes
    chord = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(nodes, axis=0), axis=1))])
    spline = CubicSpline(chord, nodes, axis=0)
    fine = np.linspace(0.0, chord[-1], 8 * len(nodes) + 1)
    speed = np.linalg.norm(spline(fine, 1), axis=1)
    # Composite Simpson on pairs of fine intervals gives the arclength table.
    h = fine[1] - fine[0]
    seg = h / 3.0 * (speed[:-2:2] + 4 * speed[1:-1:2] + speed[2::2])
    arc_even = np.concatenate([[0.0], np.cumsum(seg)])
    param_even = fine[::2]
    targets = np.linspace(0.0, arc_even[-1], n_nodes)
    param = np.interp(targets, arc_even, param_even)
    # One Newton polish per node on the exact spline arclength.
    for _ in range(2):
        arc_at = np.interp(param, param_even, arc_even)
        sp = np.linalg.norm(spline(param, 1), axis=1)
        param = param - (arc_at - targets) / sp
    out = spline(param)
    out[0] = nodes[0]
    out[-1] = nodes[-1]
    return out


def _correct_angle(nodes: np.ndarray, orientation: int, domain: DomainBoundary, alpha: float,
                   end: int, tol: float, max_iter: int = 10) -> np.ndarray:
    """Slide one endpoint along the boundary until the discrete angle condition holds."""
    ca = np.cos(alpha)
    theta0, _ = domain.project(nodes[end])

    def resid(theta):
        trial = nodes.copy()
        trial[end] = domain.position(theta)
        n_i = _end_normal(trial, orientation, end)
        return float(n_i @ domain.frame(theta).normal) - ca, trial

    f0, trial0 = resid(theta0)
    if abs(f0) <= 1e-3 * tol:
        return trial0
    h = np.linalg.norm(nodes[1] - nodes[0]) if end == 0 else np.linalg.norm(nodes[-1] - nodes[-2])
    speed = np.linalg.norm(domain.d1(theta0))
    theta1 = theta0 + 1e-3 * h / speed
    f1, trial1 = resid(theta1)
    for _ in range(max_iter):
        if f1 == f0:
            break
        theta2 = theta1 - f1 * (theta1 - theta0) / (f1 - f0)
        theta0, f0 = theta1, f1
        theta1 = theta2
        f1, trial1 = resid(theta1)
        if abs(f1) <= 1e-3 * tol:
            break
    return trial1


def mcf_step(curve: InterfaceCurve, domain: DomainBoundary, alpha: float, dt: float,
             tol_angle: float = 1e-6) -> InterfaceCurve:
    """One explicit Euler step of the flow (see module docstring)."""
    nodes = np.array(curve.nodes)
    spacing = np.linalg.norm(np.diff(nodes, axis=0), axis=1)
    h_min = float(spacing.min())
    if dt > 0.4 * h_min**2 * (1 + 1e-12):
        raise ValueError(f"dt={dt:.3e} exceeds the explicit limit 0.4 h_min^2={0.4 * h_min**2:.3e}")
    o = curve.orientation
    vel, H = _interior_velocity(nodes, o)
    new = nodes.copy()
    new[1:-1] += dt * vel
    # Predictor for the endpoints: slide with the contact-point velocity.
    for end, h_ext in ((0, 3 * H[0] - 3 * H[1] + H[2]), (-1, 3 * H[-1] - 3 * H[-2] + H[-3])):
        n_i = _end_normal(nodes, o, end)
        th, _ = domain.project(nodes[end])
        bf = domain.frame(th)
        denom = float(bf.tangent @ n_i)
        if abs(denom) < 1e-6:
            raise DegenerateAngleError("interface tangent to the boundary")
        v_tan = h_ext / denom
        th_new = th + dt * v_tan / np.linalg.norm(domain.d1(th))
        new[end] = domain.position(th_new)
    new = redistribute(new)
    for end in (0, -1):
        new = _correct_angle(new, o, domain, alpha, end, tol_angle)
    spacing = np.linalg.norm(np.diff(new, axis=0), axis=1)
    if spacing.min() < 0.2 * spacing.mean() or self_intersects(new):
        raise EvolutionError("polyline degenerated during the step")
    return InterfaceCurve(new, t=curve.t + dt, orientation=o, domain=domain)


def stable_dt(curve: InterfaceCurve, safety: float = 0.4) -> float:
    spacing = np.linalg.norm(np.diff(curve.nodes, axis=0), axis=1)
    # The angle correction may shorten the first spacing slightly.
    return safety * 0.9 * float(spacing.min()) ** 2


def evolve(curve: InterfaceCurve, domain: DomainBoundary, alpha: float, T: float,
           dt: float | None = None, snapshot_times=None) -> list[InterfaceCurve]:
    """Integrate to ``t = curve.t + T``; returns the curves at ``snapshot_times`` (absolute).

    The final state is always the last entry.  A failing step is retried once
    with half the step size.
    """
    t_end = curve.t + T
    dt = stable_dt(curve) if dt is None else dt
    snaps = sorted(float(s) for s in (() if snapshot_times is None else snapshot_times))
    out = []
    cur = curve
    while cur.t < t_end - 1e-14:
        nxt_target = t_end
        if snaps and snaps[0] < t_end:
            nxt_target = min(nxt_target, snaps[0])
        step = min(dt, nxt_target - cur.t)
        try:
            cur = mcf_step(cur, domain, alpha, step)
        except EvolutionError:
            cur = mcf_step(mcf_step(cur, domain, alpha, step / 2), domain, alpha, step / 2)
        if snaps and abs(cur.t - snaps[0]) < 1e-13:
            out.append(cur)
            snaps.pop(0)
    out.append(cur)
    return out


def advance_smooth(curve: InterfaceCurve, domain: DomainBoundary, alpha: float,
                   dt: float) -> InterfaceCurve:
    """Move the smooth representation by ``dt`` (possibly negative) with the flow velocity.

    Used to build snapshots for time differences.  The velocity ``H n_I``
    plus a tangential field interpolating the contact velocities is fitted
    in the Chebyshev basis of the curve and added to its coefficients, so
    the snapshot depends smoothly on ``dt`` with no refit of node data.  A
    correction linear in the parameter puts the endpoints back on the
    boundary.
    """
    sm = curve.smooth
    m = 4 * (sm.degree + 1)
    u = -np.cos(np.pi * np.arange(m) / (m - 1))
    g = sm.geometry(u)
    v_lo = contact_velocity(curve, domain, alpha, 0)
    v_hi = contact_velocity(curve, domain, alpha, 1)
    g_lo = float(v_lo @ g["tangent"][0])
    g_hi = float(v_hi @ g["tangent"][-1])
    tangential = g_lo + (g_hi - g_lo) * (u + 1.0) / 2.0
    vel = g["k"][:, None] * g["left"] + tangential[:, None] * g["tangent"]
    vcoef = cheb.chebfit(u, vel, sm.degree)
    coef = sm.coef + dt * vcoef
    ends = cheb.chebval(np.array([-1.0, 1.0]), coef).T
    th, _ = domain.project(ends)
    err = domain.position(th) - ends
    coef[0] += 0.5 * (err[0] + err[1])
    coef[1] += 0.5 * (err[1] - err[0])
    ext = 0.5 * min(1.0, float(np.linalg.norm(ends[1] - ends[0])))
    new = SmoothCurve.from_coefficients(coef, extension=ext)
    return InterfaceCurve.from_smooth(new, t=curve.t + dt, orientation=curve.orientation,
                                      domain=domain, n_nodes=len(curve.nodes))


def write_trajectory(directory, curves: list[InterfaceCurve]) -> Path:
    """Write one curve file per snapshot plus ``index.txt`` with ``t filename`` lines."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    lines = []
    for k, c in enumerate(curves):
        name = f"curve_{k:05d}.txt"
        c.write(directory / name)
        lines.append(f"{c.t!r} {name}")
    index = directory / "index.txt"
    index.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return index


def read_trajectory(directory, orientation: int = 1,
                    domain: DomainBoundary | None = None) -> list[InterfaceCurve]:
    directory = Path(directory)
    curves = []
    for line in (directory / "index.txt").read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        _, name = line.split()
        curves.append(InterfaceCurve.read(directory / name, orientation=orientation, domain=domain))
    return curves


def enclosed_area(curve: InterfaceCurve, domain: DomainBoundary, n_arc: int = 4000) -> float:
    """Area of ``A`` by the shoelace formula on the curve closed along the boundary."""
    poly = curve.region_polygon(domain, n_arc=n_arc)
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * abs(float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y)))
