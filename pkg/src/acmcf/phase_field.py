"""P1 finite elements for the Allen-Cahn equation with a nonlinear Robin condition.

Time stepping is by minimizing movements: each step minimises

    E_k(u) = E(u) + eps / (2 tau) * (u - u_old)^T M (u - u_old)

over nodal vectors with values in [-1, 1], where ``E`` is the discrete
energy with lumped quadrature for the potential terms.  The factor ``eps``
on the movement term makes ``t`` the physical time of

    eps d_t u = eps lap u - W'(u) / eps,    eps d_n u = sigma'(u)  on the boundary.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator, cg

from .geometry import DomainBoundary
from .potentials import BoundaryDensity, DoubleWell

log = logging.getLogger(__name__)


class MeshError(RuntimeError):
    pass


class StepError(RuntimeError):
    """The minimizing-movement step did not converge; retry with a smaller time step."""


# ----------------------------------------------------------------------------
# Mesh
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class DiskMesh:
    nodes: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray
    n_rings: int

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def areas(self) -> np.ndarray:
        p = self.nodes[self.triangles]
        d1, d2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    @property
    def edge_lengths(self) -> np.ndarray:
        e = self.nodes[self.boundary_edges]
        return np.linalg.norm(e[:, 1] - e[:, 0], axis=1)

    @property
    def h_max(self) -> float:
        p = self.nodes[self.triangles]
        lengths = [np.linalg.norm(p[:, (i + 1) % 3] - p[:, i], axis=1) for i in range(3)]
        return float(np.max(lengths))

    def angles(self) -> np.ndarray:
        """Interior angles in degrees, shape ``(n_triangles, 3)``."""
        p = self.nodes[self.triangles]
        out = []
        for i in range(3):
            a = p[:, (i + 1) % 3] - p[:, i]
            b = p[:, (i + 2) % 3] - p[:, i]
            c = np.sum(a * b, axis=1) / (np.linalg.norm(a, axis=1) * np.linalg.norm(b, axis=1))
            out.append(np.degrees(np.arccos(np.clip(c, -1, 1))))
        return np.stack(out, axis=1)

    def n_edges(self) -> int:
        t = self.triangles
        e = np.sort(np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]]), axis=1)
        return len(np.unique(e, axis=0))


def build_disk_mesh(domain: DomainBoundary, n_r: int) -> DiskMesh:
    """Ring triangulation: ``6k`` nodes on ring ``k = 1..n_r`` plus the centre.

    Rings are scaled copies of the boundary parametrisation, so the outer
    ring lies exactly on the boundary.
    """
    if n_r < 4:
        raise ValueError("n_r must be at least 4")
    nodes = [np.zeros((1, 2))]
    ring_start = [0]
    ring_theta = [np.zeros(1)]
    count = 1
    for k in range(1, n_r + 1):
        m = 6 * k
        th = 2 * np.pi * np.arange(m) / m
        nodes.append(domain.position(th) * (k / n_r))
        ring_start.append(count)
        ring_theta.append(th)
        count += m
    nodes = np.concatenate(nodes)
    tris = []
    # innermost fan
    s1 = ring_start[1]
    for j in range(6):
        tris.append((0, s1 + j, s1 + (j + 1) % 6))
    for k in range(2, n_r + 1):
        a_th, b_th = ring_theta[k - 1], ring_theta[k]
        sa, sb = ring_start[k - 1], ring_start[k]
        na, nb = len(a_th), len(b_th)
        i = j = 0
        while i < na or j < nb:
            # advance along the ring whose next node has the smaller angle
            next_a = a_th[i + 1] if i + 1 < na else 2 * np.pi
            next_b = b_th[j + 1] if j + 1 < nb else 2 * np.pi
            if j < nb and (i >= na or next_b <= next_a):
                tris.append((sa + i % na, sb + j % nb, sb + (j + 1) % nb))
                j += 1
            else:
                tris.append((sa + i % na, sb + j % nb, sa + (i + 1) % na))
                i += 1
    tris = np.array(tris, dtype=np.int64)
    p = nodes[tris]
    d1, d2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
    area = 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])
    flip = area < 0
    tris[flip] = tris[flip][:, [0, 2, 1]]
    area = np.abs(area)
    if np.any(area <= 1e-14):
        raise MeshError("degenerate triangle in ring mesh")
    so = ring_start[n_r]
    m = 6 * n_r
    edges = np.stack([so + np.arange(m), so + (np.arange(m) + 1) % m], axis=1)
    return DiskMesh(nodes=nodes, triangles=tris, boundary_edges=edges, n_rings=n_r)


# ----------------------------------------------------------------------------
# Quadrature
# ----------------------------------------------------------------------------

def triangle_rule(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Barycentric points and weights (summing to 1) exact for polynomials of degree ``order``.

    ``order = 2`` gives the classical 3-point rule; higher orders use a
    collapsed Gauss-Legendre product rule.
    """
    if order <= 2:
        b = np.array([[2 / 3, 1 / 6, 1 / 6], [1 / 6, 2 / 3, 1 / 6], [1 / 6, 1 / 6, 2 / 3]])
        return b, np.full(3, 1 / 3)
    n = (order + 2) // 2
    x, w = np.polynomial.legendre.leggauss(n)
    x, w = 0.5 * (x + 1), 0.5 * w
    X, Y = np.meshgrid(x, x, indexing="ij")
    WX, WY = np.meshgrid(w, w, indexing="ij")
    s = X.ravel()
    t = (Y * (1 - X)).ravel()
    wt = (WX * WY * (1 - X)).ravel() * 2.0
    bary = np.stack([1 - s - t, s, t], axis=1)
    return bary, wt / wt.sum()


_EDGE_GAUSS = (np.array([0.5 - 0.5 / np.sqrt(3.0), 0.5 + 0.5 / np.sqrt(3.0)]), np.array([0.5, 0.5]))


# ----------------------------------------------------------------------------
# Operators
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class Operators:
    mesh: DiskMesh
    M: sp.csr_matrix
    K: sp.csr_matrix
    Mb: sp.csr_matrix
    m_lump: np.ndarray
    mb_lump: np.ndarray
    areas: np.ndarray
    grads: np.ndarray  # (n_tri, 3, 2) gradients of the barycentric basis
    bnodes: np.ndarray  # indices of boundary nodes


def assemble(mesh: DiskMesh) -> Operators:
    """Consistent and lumped mass, stiffness and boundary mass matrices."""
    t = mesh.triangles
    p = mesh.nodes[t]
    d1, d2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
    det = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    area = 0.5 * det
    # gradients of barycentric coordinates
    g1 = np.stack([d2[:, 1], -d2[:, 0]], axis=1) / det[:, None]
    g2 = np.stack([-d1[:, 1], d1[:, 0]], axis=1) / det[:, None]
    grads = np.stack([-g1 - g2, g1, g2], axis=1)
    n = mesh.n_nodes
    rows = np.repeat(t, 3, axis=1).ravel()
    cols = np.tile(t, (1, 3)).ravel()
    kloc = np.einsum("tia,tja->tij", grads, grads) * area[:, None, None]
    K = sp.csr_matrix((kloc.ravel(), (rows, cols)), shape=(n, n))
    mloc = (np.ones((3, 3)) + np.eye(3)) / 12.0
    M = sp.csr_matrix(((area[:, None, None] * mloc).ravel(), (rows, cols)), shape=(n, n))
    e = mesh.boundary_edges
    le = mesh.edge_lengths
    bloc = np.array([[2.0, 1.0], [1.0, 2.0]]) / 6.0
    brow = np.repeat(e, 2, axis=1).ravel()
    bcol = np.tile(e, (1, 2)).ravel()
    Mb = sp.csr_matrix(((le[:, None, None] * bloc).ravel(), (brow, bcol)), shape=(n, n))
    m_lump = np.bincount(t.ravel(), weights=np.repeat(area / 3.0, 3), minlength=n)
    mb_lump = np.bincount(e.ravel(), weights=np.repeat(le / 2.0, 2), minlength=n)
    return Operators(mesh=mesh, M=M, K=K, Mb=Mb, m_lump=m_lump, mb_lump=mb_lump, areas=area,
                     grads=grads, bnodes=np.unique(e))


@dataclass(frozen=True)
class PhaseState:
    u: np.ndarray
    t: float
    eps: float
    ops: Operators = field(repr=False)

    @property
    def mesh(self) -> DiskMesh:
        return self.ops.mesh


def discrete_energy(state: PhaseState, well: DoubleWell, sigma: BoundaryDensity,
                    quadrature: str = "gauss") -> float:
    """``(eps/2) |grad u|^2 + W(u)/eps`` over the mesh plus ``sigma(u)`` over the boundary.

    ``quadrature="lumped"`` uses nodal quadrature for the potential terms
    (the energy minimised by the time stepper); ``"gauss"`` uses the
    3-point triangle rule and 2-point Gauss on boundary edges.
    """
    ops, u, eps = state.ops, state.u, state.eps
    dirichlet = 0.5 * eps * float(u @ (ops.K @ u))
    if quadrature == "lumped":
        bulk = float(ops.m_lump @ well.eval(u)) / eps
        b = ops.bnodes
        bdry = float(ops.mb_lump[b] @ sigma.eval(u[b]))
        return dirichlet + bulk + bdry
    if quadrature != "gauss":
        raise ValueError("quadrature must be 'gauss' or 'lumped'")
    bary, w = triangle_rule(2)
    uq = u[ops.mesh.triangles] @ bary.T
    bulk = float(np.sum(ops.areas[:, None] * w[None, :] * well.eval(uq))) / eps
    e = ops.mesh.boundary_edges
    s, ws = _EDGE_GAUSS
    ue = u[e[:, 0], None] * (1 - s) + u[e[:, 1], None] * s
    bdry = float(np.sum(ops.mesh.edge_lengths[:, None] * ws * sigma.eval(ue)))
    return dirichlet + bulk + bdry


# ----------------------------------------------------------------------------
# Minimizing movements
# ----------------------------------------------------------------------------

@dataclass
class StepInfo:
    iterations: int = 0
    grad_norms: list = field(default_factory=list)
    halvings: int = 0


class MovementFunctional:
    """``E_k`` together with its gradient and Hessian for one time step."""

    def __init__(self, ops: Operators, u_old: np.ndarray, eps: float, tau: float,
                 well: DoubleWell, sigma: BoundaryDensity):
        self.ops, self.u_old, self.eps, self.tau = ops, u_old, eps, tau
        self.well, self.sigma = well, sigma
        self.mov = eps / tau
        self.b = ops.bnodes
        self.mb = ops.mb_lump[self.b]

    def value(self, u) -> float:
        o, eps = self.ops, self.eps
        d = u - self.u_old
        return (0.5 * eps * float(u @ (o.K @ u)) + float(o.m_lump @ self.well.eval(u)) / eps
                + float(self.mb @ self.sigma.eval(u[self.b])) + 0.5 * self.mov * float(d @ (o.M @ d)))

    def gradient(self, u) -> np.ndarray:
        o, eps = self.ops, self.eps
        g = self.mov * (o.M @ (u - self.u_old)) + eps * (o.K @ u) + o.m_lump * self.well.deriv(u) / eps
        g[self.b] += self.mb * self.sigma.deriv(u[self.b])
        return g

    def hessian(self, u, mode: str = "full") -> sp.csr_matrix:
        o, eps = self.ops, self.eps
        if mode == "split":
            wpp = self.well.convex_second(u)
            spp = np.maximum(self.sigma.second_deriv(u[self.b]), 0.0)
        else:
            wpp = self.well.second_deriv(u)
            spp = self.sigma.second_deriv(u[self.b])
            if mode == "clipped":
                wpp, spp = np.maximum(wpp, 0.0), np.maximum(spp, 0.0)
        diag = o.m_lump * wpp / eps
        diag[self.b] += self.mb * spp
        return (self.mov * o.M + eps * o.K + sp.diags(diag)).tocsr()


def _solve_spd(A: sp.csr_matrix, b: np.ndarray) -> np.ndarray:
    d = A.diagonal()
    d = np.where(d > 0, d, 1.0)
    pre = LinearOperator(A.shape, matvec=lambda x: x / d)
    x, info = cg(A, b, rtol=1e-10, atol=0.0, maxiter=10 * A.shape[0], M=pre)
    if info != 0:
        raise StepError(f"inner linear solve did not converge (info={info})")
    return x


def _active(u, g):
    return ((u <= -1.0) & (g > 0)) | ((u >= 1.0) & (g < 0))


def minimizing_movement_step(state: PhaseState, well: DoubleWell, sigma: BoundaryDensity,
                             tau: float, tol: float | None = None, max_iter: int = 50,
                             info: StepInfo | None = None, guess=None) -> PhaseState:
    """One step of the implicit scheme by projected Newton with backtracking.

    The first direction uses the convex-split Hessian; later ones the true
    Hessian, or its clipped version when it fails to give a descent
    direction.  Iterates are projected onto ``[-1, 1]`` and accepted only if
    they decrease ``E_k`` (Armijo).  Iteration starts at the old state, or
    at ``guess`` when that has a smaller ``E_k``; either way
    ``E_k(u_new) <= E(u_old)``.
    """
    if tau <= 0:
        raise ValueError("tau must be positive")
    u_old = np.clip(state.u, -1.0, 1.0)
    F = MovementFunctional(state.ops, u_old, state.eps, tau, well, sigma)
    info = info if info is not None else StepInfo()
    u = u_old.copy()
    E = F.value(u)
    if tol is None:
        tol = 1e-9 * (1.0 + abs(E))
    if guess is not None:
        g_u = np.clip(guess, -1.0, 1.0)
        E_g = F.value(g_u)
        if E_g < E:
            u, E = g_u, E_g
    m_inv = 1.0 / state.ops.m_lump
    for it in range(max_iter):
        g = F.gradient(u)
        act = _active(u, g)
        gf = np.where(act, 0.0, g)
        gnorm = float(np.sqrt(gf @ (m_inv * gf)))
        info.grad_norms.append(gnorm)
        if gnorm <= tol:
            break
        free = ~act
        d = np.zeros_like(u)
        for mode in (("split",) if it == 0 else ("full", "clipped")):
            H = F.hessian(u, mode)[free][:, free]
            d_f = _solve_spd(H, -g[free])
            if mode == "full" and (d_f @ g[free] >= 0 or d_f @ (H @ d_f) <= 0):
                continue
            d[free] = d_f
            break
        if -float(g @ d) <= 1e-14 * (1.0 + abs(E)):
            # no decrease left above roundoff
            break
        step = 1.0
        for halving in range(41):
            if halving == 40:
                if gnorm <= 1e3 * tol:
                    # roundoff floor reached
                    info.iterations = it + 1
                    return replace(state, u=u, t=state.t + tau)
                raise StepError("line search failed after 40 halvings")
            cand = np.clip(u + step * d, -1.0, 1.0)
            Ec = F.value(cand)
            if Ec <= E + 1e-4 * float(g @ (cand - u)):
                break
            step *= 0.5
            info.halvings += 1
        u, E = cand, Ec
    else:
        raise StepError(f"Newton did not converge in {max_iter} iterations")
    info.iterations = it
    return replace(state, u=u, t=state.t + tau)


def default_tau(eps: float, mesh: DiskMesh) -> float:
    return eps * mesh.h_max


@dataclass
class Trajectory:
    snapshots: list[PhaseState]
    energy_log: list[tuple[float, float, float]]

    @property
    def final(self) -> PhaseState:
        return self.snapshots[-1]


def run_allen_cahn(u0: np.ndarray, eps: float, tau: float, T: float, well: DoubleWell,
                   sigma: BoundaryDensity, ops: Operators, snapshot_times=None,
                   t0: float = 0.0, quadrature: str = "lumped") -> Trajectory:
    """Integrate from ``t0`` to ``t0 + T``; snapshots at the requested absolute times and at the end.

    The energy log holds ``(t, E, cumulative dissipation)`` after every
    step, where the dissipation increment is ``eps/(2 tau) |u^k - u^{k-1}|_M^2``.
    """
    u0 = np.asarray(u0, dtype=float)
    if np.any(u0 < -1 - 1e-12) or np.any(u0 > 1 + 1e-12):
        raise ValueError("initial data must lie in [-1, 1]")
    if ops.mesh.h_max > eps / 4:
        log.warning("mesh does not resolve eps: h_max=%.4g > eps/4=%.4g", ops.mesh.h_max, eps / 4)
    state = PhaseState(u=np.clip(u0, -1, 1), t=t0, eps=eps, ops=ops)
    t_end = t0 + T
    pending = sorted(float(s) for s in (() if snapshot_times is None else snapshot_times)
                     if t0 <= s <= t_end)
    snaps = []
    if pending and abs(pending[0] - t0) < 1e-14:
        snaps.append(state)
        pending.pop(0)
    E = discrete_energy(state, well, sigma, quadrature)
    energy_log = [(t0, E, 0.0)]
    dissipated = 0.0
    prev, prev_dt = None, tau
    while state.t < t_end - 1e-14:
        target = min([t_end] + [s for s in pending if s > state.t + 1e-14])
        dt = min(tau, target - state.t)
        guess = None if prev is None else state.u + (dt / prev_dt) * (state.u - prev.u)
        try:
            new = minimizing_movement_step(state, well, sigma, dt, guess=guess)
        except StepError:
            half = minimizing_movement_step(state, well, sigma, dt / 2)
            new = minimizing_movement_step(half, well, sigma, dt / 2)
        du = new.u - state.u
        dissipated += 0.5 * eps / dt * float(du @ (ops.M @ du))
        prev, prev_dt = state, dt
        state = new
        energy_log.append((state.t, discrete_energy(state, well, sigma, quadrature), dissipated))
        if pending and abs(state.t - pending[0]) < 1e-12:
            snaps.append(state)
            pending.pop(0)
    if not snaps or snaps[-1] is not state:
        snaps.append(state)
    return Trajectory(snapshots=snaps, energy_log=energy_log)


# ----------------------------------------------------------------------------
# Export
# ----------------------------------------------------------------------------

def write_snapshot(state: PhaseState, path) -> None:
    path = Path(path)
    data = np.column_stack([state.mesh.nodes, state.u])
    np.savetxt(path, data, fmt="%.17g", header=f"t={state.t!r} eps={state.eps!r}", comments="# ")


def read_snapshot(path) -> tuple[np.ndarray, np.ndarray, float, float]:
    """Return ``(nodes, u, t, eps)``."""
    path = Path(path)
    with path.open(encoding="utf-8") as fh:
        header = fh.readline().lstrip("#").split()
    meta = dict(item.split("=") for item in header)
    data = np.loadtxt(path, comments="#", ndmin=2)
    return data[:, :2], data[:, 2], float(meta["t"]), float(meta["eps"])


def write_energy_log(log_rows, path, header_lines=()) -> None:
    path = Path(path)
    lines = [f"# {h}" for h in header_lines] + ["t,E,dissipation"]
    lines += [f"{t!r},{E!r},{d!r}" for t, E, d in log_rows]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
