import numpy as np
import pytest

from acmcf.calibration import (CalibrationConfig, CalibrationScaleError, PointGeometry,
                               SamplePlan, angle_consistent_curve,
                               build_contact_frame, build_global_field, candidate_fields,
                               check_calibration, contact_derivative_check,
                               gamma_I_along_interface, interp_lambda, local_contact_fields,
                               smoothstep)
from acmcf.geometry import diameter_curve, orthogonal_arc
from acmcf.sharp_mcf import check_third_order_compat, evolve


@pytest.fixture(scope="module")
def chord60(disk):
    alpha = np.pi / 3
    c = evolve(orthogonal_arc(1.5, alpha), disk, alpha, 0.03)[-1]
    return build_global_field(c, disk, alpha)


@pytest.fixture(scope="module")
def diameter_field(disk):
    return build_global_field(diameter_curve(), disk, np.pi / 2)


def test_smoothstep_endpoints():
    assert smoothstep(0.0) == 0.0 and smoothstep(1.0) == 1.0
    s = np.linspace(0, 1, 101)
    assert np.all(np.diff(smoothstep(s)) >= 0)


def test_diameter_contact_frame(disk):
    f = build_contact_frame(diameter_curve(), disk, np.pi / 2, 0)
    assert np.allclose(f.p, [1.0, 0.0], atol=1e-14)
    assert f.beta_I == pytest.approx(-1.0, abs=1e-9)
    assert abs(f.beta_b) < 1e-9
    for v in (f.gamma_b, f.gamma_I0, f.rho_I0, f.rho_b0):
        assert abs(v) < 1e-8
    assert np.allclose(f.dpdt, 0.0, atol=1e-9)


def test_rotation_aligns_frames(disk, chord60):
    for c, alpha in ((diameter_curve(), np.pi / 2), (chord60.curve, np.pi / 3)):
        for e in (0, 1):
            f = build_contact_frame(c, disk, alpha, e)
            assert np.allclose(f.R @ f.n_b, f.n_I, atol=1e-10)
            assert np.allclose(f.R @ f.tau_b, f.tau_I, atol=1e-10)


def test_compatibility_gap_matches_residual(disk, chord60):
    alpha = np.pi / 3
    c = angle_consistent_curve(chord60.curve, disk, alpha)
    for e in (0, 1):
        f = build_contact_frame(c, disk, alpha, e)
        res = check_third_order_compat(c, disk, alpha, e)
        assert abs(f.compat_gap * float(f.n_b @ f.tau_I)) == pytest.approx(res, rel=1e-8)


def test_gamma_on_circle_arc(disk):
    alpha = np.pi / 2
    c = angle_consistent_curve(orthogonal_arc(1.5, alpha, n_nodes=257), disk, alpha)
    R = np.sqrt(1.5**2 - 1)
    f = build_contact_frame(c, disk, alpha, 0)
    g = gamma_I_along_interface(c, f)
    s = np.linspace(0.0, 0.5, 11)
    assert np.allclose(np.abs(g(s) - g.gamma0), s / R**2, atol=1e-5)


def test_gamma_vanishes_on_diameter(disk):
    c = diameter_curve()
    g = gamma_I_along_interface(c, build_contact_frame(c, disk, np.pi / 2, 0))
    assert np.max(np.abs(g(np.linspace(0, 1.5, 7)))) < 1e-8


def test_interpolation_weight(disk, chord60):
    w = chord60.wedges[0]
    p, d = w.p, w.d_I
    rot = lambda a: np.array([[np.cos(a), -np.sin(a)], [np.sin(a), np.cos(a)]])
    edge = p + 0.05 * (rot(w.orient * w.gap_plus / 4) @ d)
    lam, grad, dlam = interp_lambda(w, edge[None])
    assert lam[0] == pytest.approx(1.0, abs=1e-12)
    assert np.linalg.norm(grad[0]) < 1e-9
    assert dlam[0] == 0.0
    # |grad lambda| r stays bounded as r -> 0
    dirs = rot(w.orient * w.gap_plus / 2) @ d
    C = [np.linalg.norm(w.interp_lambda((p + r * dirs)[None])[1][0]) * r for r in 0.1 / 2.0 ** np.arange(4)]
    assert np.ptp(C) < 1e-8 * max(C)
    assert max(C) > 0


def test_local_fields_on_interface(disk, chord60):
    snap = chord60.now
    fr, wd, gm = snap.frames[0], snap.wedges[0], snap.gammas[0]
    u = np.linspace(-0.98, -0.9, 5)
    X = snap.curve.smooth.derivative(u, 0)
    geo = PointGeometry.of(snap.curve, disk, X)
    xi, B, _, _ = local_contact_fields(fr, wd, geo, gm)
    assert np.allclose(xi, geo.n_I, atol=1e-8)
    assert np.allclose(np.sum(candidate_fields(fr, gm, geo)["B_I"] * geo.n_I, axis=1), geo.H_I,
                       atol=1e-10)


def test_interface_candidate_length(disk, chord60):
    snap = chord60.now
    fr, gm = snap.frames[0], snap.gammas[0]
    pts = fr.p + 0.05 * (np.random.default_rng(3).random((50, 2)) - 0.5)
    geo = PointGeometry.of(snap.curve, disk, pts)
    xi_I = candidate_fields(fr, gm, geo)["xi_I"]
    expected = 1.0 - 0.25 * (fr.beta_I * geo.s_I) ** 4
    assert np.allclose(np.sum(xi_I**2, axis=1), expected, atol=1e-12)


def test_global_field_consistency_and_boundary(disk, chord60):
    c = chord60.curve
    X = c.smooth.derivative(np.linspace(-0.95, 0.95, 41), 0)
    ev = chord60.evaluate(X)
    assert np.allclose(ev["xi"], c.project(X)["normal"], atol=1e-8)
    assert np.max(np.abs(ev["theta"])) < 1e-12
    th = np.linspace(0, 2 * np.pi, 200, endpoint=False)
    evb = chord60.evaluate(disk.position(th))
    nb = disk.frame(th).normal
    assert np.max(np.abs(np.sum(evb["xi"] * nb, axis=1) - 0.5)) < 1e-8
    assert np.max(np.abs(np.sum(evb["B"] * nb, axis=1))) < 1e-8


def test_field_bounds(disk, chord60, rng):
    r = np.sqrt(rng.random(4000)) * 0.999
    a = rng.random(4000) * 2 * np.pi
    X = np.stack([r * np.cos(a), r * np.sin(a)], axis=1)
    ev = chord60.evaluate(X)
    assert np.all(np.linalg.norm(ev["xi"], axis=1) <= 1 + 1e-12)
    th = ev["theta"]
    assert np.all(np.abs(th) <= 1)
    inA = chord60.curve.in_region(X)
    far = chord60.curve.distance(X) > 1e-6
    assert np.all(th[inA & far] < 0) and np.all(th[~inA & far] > 0)


def test_diameter_weight_profile(diameter_field):
    w = diameter_field.scales.width
    d = np.array([0.25, 0.5, 1.0, 1.5]) * w
    up = diameter_field.theta(np.stack([np.zeros_like(d), d], axis=1))
    down = diameter_field.theta(np.stack([np.zeros_like(d), -d], axis=1))
    assert np.all(up < 0) and np.all(down > 0)
    assert np.allclose(up, -down, atol=1e-12)
    assert np.all(np.diff(np.abs(up)) >= 0)
    assert abs(up[-1]) == pytest.approx(1.0, abs=1e-12)


def test_diameter_field_is_static(diameter_field):
    X = np.array([[0.1, 0.05], [-0.3, -0.2], [0.5, 0.4]])
    assert np.allclose(diameter_field.B(X), 0.0, atol=1e-8)
    assert np.allclose(diameter_field.xi(np.array([[0.2, 0.0]])), [[0.0, 1.0]], atol=1e-12)


def test_contact_derivative_formulas(chord60):
    dev = contact_derivative_check(chord60)
    assert max(dev.values()) < 1e-4


def test_requested_scale_too_large(disk, chord60):
    with pytest.raises(CalibrationScaleError):
        build_global_field(chord60.curve, disk, np.pi / 3, CalibrationConfig(delta=0.9))


def test_checker_on_diameter(diameter_field):
    rep = check_calibration(diameter_field, SamplePlan(n_samples=2000, refine_rounds=2))
    assert rep["boundary_xi"]["max_ratio"] < 1e-6
    assert rep["boundary_B"]["max_ratio"] < 1e-6
    assert rep["consistency_normal"]["max_ratio"] < 1e-8
    for name in ("calibration_transport", "calibration_length_transport",
                 "calibration_normal_stretch", "skew_symmetry", "weight_evolution"):
        assert rep[name]["max_ratio"] < 1e-4, name
    assert 0 < diameter_field.fitted_c <= 1 + 1e-3
