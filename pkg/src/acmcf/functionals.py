"""Relative energy, bulk error and related diagnostics of a phase field against a calibration."""
from __future__ import annotations

from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .phase_field import PhaseState, triangle_rule
from .potentials import BoundaryDensity, DoubleWell, ProfileTable

_GRAD_ZERO = 1e-14
_FALLBACK_NORMAL = np.array([1.0, 0.0])
# Points where the phase field is flat and within this of +-1 contribute O(tol^2).
_ACTIVE_TOL = 1e-8


class TimeMismatchError(ValueError):
    pass


@dataclass
class QuadratureSample:
    """Values and gradients of a phase field at weighted quadrature points.

    ``H`` (the diffuse curvature) is optional.  Points come in consecutive
    groups of ``group`` per mesh cell; the divergence of the calibration in
    the dissipation terms is evaluated once per cell, at the group's mean.
    """

    points: np.ndarray
    weights: np.ndarray
    u: np.ndarray
    grad: np.ndarray
    b_points: np.ndarray
    b_weights: np.ndarray
    b_u: np.ndarray
    eps: float
    t: float
    H: np.ndarray | None = None
    group: int = 1


def discrete_laplacian(state: PhaseState, sigma: BoundaryDensity) -> np.ndarray:
    """Nodal Laplacian including the Robin flux: ``-M_lump^-1 (K u + M_bd sigma'(u) / eps)``."""
    ops, u = state.ops, state.u
    b = ops.bnodes
    flux = np.zeros_like(u)
    flux[b] = ops.mb_lump[b] * sigma.deriv(u[b]) / state.eps
    return -(ops.K @ u + flux) / ops.m_lump


def sample_state(state: PhaseState, well: DoubleWell | None = None,
                 sigma: BoundaryDensity | None = None, order: int = 2) -> QuadratureSample:
    """Quadrature data of a P1 state; includes ``H`` when ``well`` and ``sigma`` are given."""
    mesh, ops = state.mesh, state.ops
    bary, w = triangle_rule(order)
    tri = mesh.triangles
    ut = state.u[tri]
    pts = np.einsum("qk,tkd->tqd", bary, mesh.nodes[tri]).reshape(-1, 2)
    u = (ut @ bary.T).ravel()
    grad_t = np.einsum("tk,tkd->td", ut, ops.grads)
    grad = np.repeat(grad_t, len(w), axis=0)
    wts = (ops.areas[:, None] * w[None, :]).ravel()
    H = None
    if well is not None and sigma is not None:
        Hn = -state.eps * discrete_laplacian(state, sigma) + well.deriv(state.u) / state.eps
        H = (Hn[tri] @ bary.T).ravel()
    e = mesh.boundary_edges
    s = np.array([0.5 - 0.5 / np.sqrt(3.0), 0.5 + 0.5 / np.sqrt(3.0)])
    a, b = mesh.nodes[e[:, 0]], mesh.nodes[e[:, 1]]
    bp = (a[:, None, :] * (1 - s)[None, :, None] + b[:, None, :] * s[None, :, None]).reshape(-1, 2)
    bu = (state.u[e[:, 0], None] * (1 - s) + state.u[e[:, 1], None] * s).ravel()
    bw = np.repeat(0.5 * mesh.edge_lengths, 2)
    return QuadratureSample(points=pts, weights=wts, u=u, grad=grad, b_points=bp, b_weights=bw,
                            b_u=bu, eps=state.eps, t=state.t, H=H, group=len(w))


@dataclass
class PhaseDescriptors:
    psi: np.ndarray
    grad_psi: np.ndarray
    normal: np.ndarray
    grad_norm: np.ndarray
    H: np.ndarray | None


def phase_descriptors(sample: QuadratureSample, profile: ProfileTable) -> PhaseDescriptors:
    """``psi(u)``, its gradient, the diffuse normal (``(1, 0)`` where ``grad u = 0``) and ``H``."""
    g = sample.grad
    gn = np.linalg.norm(g, axis=1)
    flat = gn < _GRAD_ZERO
    normal = np.where(flat[:, None], _FALLBACK_NORMAL, g / np.where(flat, 1.0, gn)[:, None])
    sq = profile.dpsi(sample.u)
    return PhaseDescriptors(psi=profile.psi(sample.u), grad_psi=sq[:, None] * g, normal=normal,
                            grad_norm=gn, H=sample.H)


def _active(sample: QuadratureSample, pd: PhaseDescriptors, chi: np.ndarray, c0: float):
    return (pd.grad_norm > _ACTIVE_TOL) | (np.abs(pd.psi - c0 * chi) > 1e-14) | (
        1.0 - np.abs(sample.u) > _ACTIVE_TOL)


@dataclass
class FunctionalReport:
    t: float
    E_eps: float
    E_relEn: float
    E_relEn_alt: float
    E_bulk: float
    l1: float
    D1: float
    D2: float
    r0: float
    r1: float
    r2: float
    r3: float
    r4: float
    r5: float
    r6: float
    c: float
    bulk_ratio: float
    E_boundary: float

    # upper bounds for r0..r6 given the length constant c
    def bounds(self) -> tuple[float, ...]:
        return (1.0, 1.0, 1.0, 1.0 / self.c, 2.0, 12.0, 1.0 + 2.0 / self.c)

    def coercivity_ok(self, rtol: float = 1e-10) -> bool:
        r = (self.r0, self.r1, self.r2, self.r3, self.r4, self.r5, self.r6)
        return all(v <= b * (1 + rtol) + 1e-14 for v, b in zip(r, self.bounds()))


CSV_COLUMNS = ("t", "E_eps", "E_relEn", "E_bulk", "l1", "D1", "D2",
               "r0", "r1", "r2", "r3", "r4", "r5", "r6")


def _ratio(num: float, den: float) -> float:
    if den > 0:
        return num / den
    return 0.0 if num <= 0 else float("inf")


def evaluate_functionals(sample: QuadratureSample, field, sigma: BoundaryDensity,
                         profile: ProfileTable, well: DoubleWell, curve=None,
                         time_tol: float = 1e-9) -> FunctionalReport:
    """All functionals of one phase-field sample against a calibration at the same time.

    ``curve`` defaults to the calibration's curve; it provides the phase
    indicator and the distance to the interface.
    """
    if abs(sample.t - field.t) > time_tol:
        raise TimeMismatchError(f"phase field at t={sample.t} but calibration at t={field.t}")
    curve = curve if curve is not None else field.curve
    eps, c0 = sample.eps, profile.c0
    pd = phase_descriptors(sample, profile)
    chi = curve.in_region(sample.points).astype(float)
    act = _active(sample, pd, chi, c0)
    wq = sample.weights[act]
    u = sample.u[act]
    gn = pd.grad_norm[act]
    gpsi = pd.grad_psi[act]
    n = pd.normal[act]
    X = sample.points[act]
    ev = field.evaluate(X)
    xi, B, theta = ev["xi"], ev["B"], ev["theta"]
    sq = profile.dpsi(u)
    Wu = well.eval(u)
    gpsi_norm = sq * gn

    dirichlet = 0.5 * eps * gn**2
    potential = Wu / eps
    ca = sigma.cos_alpha
    bdens = sigma.eval(sample.b_u) - profile.psi(sample.b_u) * ca
    boundary = float(sample.b_weights @ bdens)
    E_eps = float(wq @ (dirichlet + potential)) + float(sample.b_weights @ sigma.eval(sample.b_u))
    E_rel = float(wq @ (dirichlet + potential - np.sum(gpsi * xi, axis=1))) + boundary

    equi = float(wq @ (0.5 * (np.sqrt(eps) * gn - np.sqrt(2 * Wu) / np.sqrt(eps)) ** 2))
    tilt = float(wq @ ((1.0 - np.sum(n * xi, axis=1)) * gpsi_norm))
    E_alt = equi + tilt + boundary

    d = curve.distance(X)
    md2 = np.minimum(1.0, d**2)
    xi_norm = np.linalg.norm(xi, axis=1)
    ok = d > 1e-4
    c_quad = float(np.min((1.0 - xi_norm[ok]) / md2[ok])) if np.any(ok) else np.inf
    c_field = field.fitted_c if getattr(field, "fitted_c", None) else np.inf
    c = min(c_quad, c_field, 1.0)
    if not c > 0:
        raise ValueError(f"length constraint violated at the quadrature points (c={c:.3e})")
    dn2 = np.sum((n - xi) ** 2, axis=1)
    lhs = (boundary, equi, tilt, float(wq @ (md2 * gpsi_norm)), float(wq @ (dn2 * gpsi_norm)),
           float(wq @ (dn2 * eps * gn**2)), float(wq @ (md2 * eps * gn**2)))
    r = [_ratio(v, E_rel) for v in lhs]

    diff_act = profile.psi(u) - c0 * chi[act]
    E_bulk = float(wq @ (diff_act * theta))
    l1 = float(wq @ np.abs(diff_act))

    D1 = D2 = float("nan")
    if sample.H is not None:
        H = sample.H[act]
        div = _cell_divergence(field, sample, act)
        D1 = float(wq @ ((H + div * np.sqrt(2 * Wu)) ** 2)) / eps
        D2 = float(wq @ ((H - np.sum(B * xi, axis=1) * eps * gn) ** 2)) / eps
    return FunctionalReport(t=sample.t, E_eps=E_eps, E_relEn=E_rel, E_relEn_alt=E_alt,
                            E_bulk=E_bulk, l1=l1, D1=D1, D2=D2, r0=r[0], r1=r[1], r2=r[2],
                            r3=r[3], r4=r[4], r5=r[5], r6=r[6], c=c,
                            bulk_ratio=_ratio(l1**2, E_bulk), E_boundary=boundary)


def _cell_divergence(field, sample: QuadratureSample, act: np.ndarray) -> np.ndarray:
    """``div xi`` at the active points, one evaluation per cell of ``sample.group`` points."""
    g = sample.group
    if g == 1:
        return _divergence(field, sample.points[act])
    cells = act.reshape(-1, g).any(axis=1)
    centre = sample.points.reshape(-1, g, 2)[cells].mean(axis=1)
    div = np.zeros(len(cells))
    div[cells] = _divergence(field, centre)
    return np.repeat(div, g)[act]


def _divergence(field, X, h: float = 1e-5) -> np.ndarray:
    div = np.zeros(len(X))
    for k in range(2):
        e = np.zeros(2)
        e[k] = h
        div += (field.xi(X + e)[:, k] - field.xi(X - e)[:, k]) / (2 * h)
    return div


def relative_energy(sample, field, sigma, profile, well, curve=None):
    """``(E_relEn, E_relEn_alt, (r0, ..., r6))``."""
    rep = evaluate_functionals(sample, field, sigma, profile, well, curve)
    return rep.E_relEn, rep.E_relEn_alt, (rep.r0, rep.r1, rep.r2, rep.r3, rep.r4, rep.r5, rep.r6)


def bulk_error(sample, field, sigma, profile, well, curve=None):
    """``(E_bulk, l1, l1^2 / E_bulk)``."""
    rep = evaluate_functionals(sample, field, sigma, profile, well, curve)
    return rep.E_bulk, rep.l1, rep.bulk_ratio


def dissipation_diagnostics(sample, field, sigma, profile, well, curve=None):
    """``(D1, D2)``; needs a sample carrying ``H``."""
    if sample.H is None:
        raise ValueError("the sample carries no diffuse curvature")
    rep = evaluate_functionals(sample, field, sigma, profile, well, curve)
    return rep.D1, rep.D2


def gronwall_constant(times, values, floor: float = 1e-12) -> float:
    """Smallest ``C >= 0`` with ``v(t) <= (v(0) + floor) exp(C t)`` at all logged times."""
    times = np.asarray(times, dtype=float) - times[0]
    values = np.asarray(values, dtype=float)
    base = values[0] + floor
    pos = times > 0
    if not np.any(pos):
        return 0.0
    rates = np.log(np.maximum(values[pos], floor) / base) / times[pos]
    return float(max(0.0, rates.max()))


def write_report_csv(reports, path, header_lines=()) -> None:
    lines = [f"# {h}" for h in header_lines] + [",".join(CSV_COLUMNS)]
    for rep in reports:
        lines.append(",".join(repr(float(getattr(rep, name))) for name in CSV_COLUMNS))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def report_dict(rep: FunctionalReport) -> dict:
    return {f.name: float(getattr(rep, f.name)) for f in fields(rep)}
