import numpy as np
import pytest

from acmcf.geometry import (CurveError, DomainBoundary, InterfaceCurve, boundary_frame,
                            diameter_curve, interface_derivatives, interface_frame,
                            orthogonal_arc, project_to_boundary, project_to_interface,
                            self_intersects)


def test_circle_frame_at_zero(disk):
    f = boundary_frame(disk, 0.0)
    assert np.allclose(f.point, [1.0, 0.0], atol=1e-15)
    assert np.allclose(f.normal, [-1.0, 0.0], atol=1e-15)
    # curvature of the circle from -laplace(1 - |x|) = 1/|x| at |x| = 1
    assert f.curvature == pytest.approx(1.0, abs=1e-14)


def test_circle_frame_orthonormal(disk):
    th = np.linspace(0, 2 * np.pi, 37)
    f = boundary_frame(disk, th)
    assert np.allclose(np.linalg.norm(f.normal, axis=1), 1.0, atol=1e-14)
    assert np.allclose(np.sum(f.normal * f.tangent, axis=1), 0.0, atol=1e-14)


def test_ellipse_curvature_matches_classical_formula():
    a, b = 1.2, 1.0
    dom = DomainBoundary(a, b)
    th = np.linspace(0, 2 * np.pi, 25)
    k = boundary_frame(dom, th).curvature
    exact = a * b / (a**2 * np.sin(th) ** 2 + b**2 * np.cos(th) ** 2) ** 1.5
    assert np.allclose(k, exact, rtol=1e-12)
    assert boundary_frame(dom, 0.0).curvature == pytest.approx(a / b**2, rel=1e-12)


def test_boundary_projection_circle(disk):
    th, s = project_to_boundary(disk, np.array([0.5, 0.0]))
    assert th == pytest.approx(0.0, abs=1e-15) and s == pytest.approx(0.5, abs=1e-15)
    _, s = project_to_boundary(disk, np.array([0.0, 0.9]))
    assert s == pytest.approx(0.1, abs=1e-15)


def test_boundary_projection_ellipse_optimality(rng):
    dom = DomainBoundary(1.2, 1.0)
    th0 = rng.uniform(0, 2 * np.pi, 200)
    f0 = dom.frame(th0)
    x = f0.point + rng.uniform(-0.1, 0.1, (200, 1)) * f0.normal
    th, s = project_to_boundary(dom, x)
    f = dom.frame(th)
    assert np.max(np.abs(np.sum((x - f.point) * f.tangent, axis=1))) < 1e-10
    assert np.allclose(np.abs(s), np.linalg.norm(x - f.point, axis=1), atol=1e-12)


def test_diameter_frame_and_distance():
    c = diameter_curve(65)
    f = interface_frame(c, np.linspace(0.1, 1.9, 7))
    assert np.max(np.abs(f.curvature)) < 1e-12
    _, s, _ = project_to_interface(c, np.array([[0.3, 0.2]]))
    assert s[0] == pytest.approx(0.2, abs=1e-12)
    assert c.in_region(np.array([[0.3, 0.2]]))[0]


def test_arc_curvature():
    c = orthogonal_arc(1.5, np.pi / 2, n_nodes=200)
    R = np.sqrt(1.5**2 - 1.0)
    s = np.linspace(0.05, 0.95, 11) * c.length
    H = interface_frame(c, s).curvature
    assert np.max(np.abs(np.abs(H) - 1.0 / R)) < 1e-4
    # the disk of the arc is the phase; the normal points into it, so H > 0
    assert np.all(H > 0)


def test_curvature_derivative_line_and_arc():
    assert np.max(np.abs(interface_derivatives(diameter_curve(65), np.linspace(0.1, 1.9, 9)))) < 1e-10
    c = orthogonal_arc(1.5, np.pi / 2, n_nodes=200)
    s = np.linspace(0.05, 0.95, 11) * c.length
    assert np.max(np.abs(interface_derivatives(c, s))) < 5e-3


def test_curvature_derivative_matches_finite_differences():
    x = np.linspace(-1.0, 1.0, 201)
    c = InterfaceCurve(np.stack([x, 0.1 * np.sin(np.pi * x)], axis=1))
    s = np.linspace(0.3, 0.7, 9) * c.length
    h = 1e-3
    Hs = [interface_frame(c, s + k * h).curvature for k in (-2, -1, 1, 2)]
    fd = (Hs[0] - 8 * Hs[1] + 8 * Hs[2] - Hs[3]) / (12 * h)
    assert np.max(np.abs(fd - interface_derivatives(c, s))) < 1e-3


def test_curve_validation(disk):
    orthogonal_arc(1.5, np.pi / 3).validate(disk)
    nodes = np.array(diameter_curve(9).nodes)
    nodes[0] = [0.9, 0.0]
    with pytest.raises(CurveError):
        InterfaceCurve(nodes, orientation=-1).validate(disk)


def test_self_intersection():
    assert self_intersects(np.array([[0, 0], [1, 0], [1, 1], [0.5, -1.0]]))
    t = np.linspace(0.0, 4 * np.pi, 400)
    spiral = np.stack([t * np.cos(t), t * np.sin(t)], axis=1)
    assert not self_intersects(spiral)
    loop = np.concatenate([spiral, [[0.5, 13.0], [0.5, -20.0]]])
    assert self_intersects(loop)
