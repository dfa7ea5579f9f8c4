"""Acceptance criteria 1-9, each at its stated tolerance.

Every test records a PASS/FAIL line (printed in the terminal summary) before
asserting, so failures still report the measured numbers.
"""
import math
import time
from pathlib import Path

import numpy as np
import pytest

from acmcf.calibration import SamplePlan, build_global_field, check_calibration, contact_derivative_check
from acmcf.functionals import evaluate_functionals, sample_state
from acmcf.geometry import DomainBoundary, diameter_curve, orthogonal_arc
from acmcf.harness import (_run_cases, build_setup, calibration_fields, converge_summary,
                           load_config, parse_config, sharp_curves)
from acmcf.initial_data import verify_preparedness, well_prepared_field
from acmcf.phase_field import (MovementFunctional, PhaseState, assemble, build_disk_mesh,
                               discrete_energy, minimizing_movement_step)
from acmcf.potentials import build_profile, make_bump_sigma, make_quartic_well, make_special_sigma
from acmcf.sharp_mcf import angle_residual, evolve, mcf_step, stable_dt

EQUALITY_CONDITIONS = ("boundary_xi", "boundary_B", "consistency_normal", "consistency_gradient",
                       "weight_on_interface", "weight_sign_violation", "weight_range_excess",
                       "xi_norm_excess", "grad_vel_xi_xi", "grad_vel_tangent")
RATIO_CONDITIONS = ("calibration_transport", "calibration_length_transport", "mean_curvature",
                    "calibration_normal_stretch", "skew_symmetry", "weight_coercivity",
                    "weight_evolution")
CONFIGS = Path(__file__).resolve().parents[1] / "configs"
CHORDS = {"pi/2": (np.pi / 2, 0.02), "pi/3": (np.pi / 3, 0.03)}


def chord_config(kind: str, alpha_deg: float, t0: float, **experiment) -> str:
    extra = "".join(f"{k} = {v}\n" for k, v in experiment.items())
    return (f"[sigma]\nkind = {kind}\nalpha_deg = {alpha_deg}\n"
            f"[interface]\nkind = arc\ncenter_x = 1.5\nt0 = {t0}\n"
            f"[experiment]\n{extra}")


@pytest.fixture(scope="module")
def disk():
    return DomainBoundary()


# ----------------------------------------------------------------------------

def test_criterion_1_profile_constants(verdict):
    verdict(1, False, "did not complete")
    start = time.perf_counter()
    profile = build_profile(make_quartic_well())
    r = np.linspace(-12.0, 12.0, 4801)
    c0_err = abs(profile.c0 - 4.0 / 3.0)
    tanh_err = float(np.max(np.abs(profile.theta0(r) - np.tanh(r))))
    elapsed = time.perf_counter() - start
    ok = verdict(1, c0_err <= 1e-10 and tanh_err <= 1e-8 and elapsed < 1.0,
                 f"|c0-4/3|={c0_err:.1e} max|theta0-tanh|={tanh_err:.1e} time={elapsed:.2f}s")
    assert ok


def test_criterion_2_stationary_diameter(verdict, disk):
    verdict(2, False, "did not complete")
    start = time.perf_counter()
    field = build_global_field(diameter_curve(), disk, np.pi / 2)
    rep = check_calibration(field, SamplePlan(n_samples=10_000))
    elapsed = time.perf_counter() - start
    eq_worst = max(rep[n]["max_ratio"] for n in EQUALITY_CONDITIONS)
    over = {n: rep[n]["max_ratio"] for n in RATIO_CONDITIONS if not rep[n]["max_ratio"] < 1e-4}
    ok = verdict(2, eq_worst <= 1e-6 and not over and elapsed < 10.0,
                 f"equalities max={eq_worst:.1e}; ratios >= 1e-4: "
                 + (", ".join(f"{k}={v:.3g}" for k, v in over.items()) or "none")
                 + f"; time={elapsed:.1f}s")
    assert ok


@pytest.fixture(scope="module")
def chord_fields(disk):
    """Calibrations of the pre-evolved chords, with build times."""
    out = {}
    for name, (alpha, t0) in CHORDS.items():
        start = time.perf_counter()
        curve = evolve(orthogonal_arc(1.5, alpha), disk, alpha, t0)[-1]
        out[name] = (build_global_field(curve, disk, alpha), time.perf_counter() - start)
    return out


def test_criterion_3_moving_chords(verdict, chord_fields):
    verdict(3, False, "did not complete")
    details, ok = [], True
    for name, (field, t_build) in chord_fields.items():
        start = time.perf_counter()
        a = check_calibration(field, SamplePlan(n_samples=10_000))
        b = check_calibration(field, SamplePlan(n_samples=20_000))
        elapsed = t_build + time.perf_counter() - start
        names = RATIO_CONDITIONS + ("length_constant",)
        finite = all(np.isfinite(a[n]["max_ratio"]) and np.isfinite(b[n]["max_ratio"]) for n in names)
        change = max(abs(b[n]["max_ratio"] - a[n]["max_ratio"]) / max(a[n]["max_ratio"], 1e-300)
                     for n in names)
        bc = max(r[n]["max_ratio"] for r in (a, b) for n in ("boundary_xi", "boundary_B"))
        ok &= finite and change < 0.10 and bc <= 1e-6 and elapsed < 60.0
        details.append(f"{name}: finite={finite} change={change:.1%} bc={bc:.1e} "
                       f"time={elapsed:.0f}s")
    assert verdict(3, ok, "; ".join(details))


def test_criterion_4_derivative_formulas(verdict, chord_fields):
    verdict(4, False, "did not complete")
    worst = {name: max(contact_derivative_check(f).values()) for name, (f, _) in chord_fields.items()}
    ok = verdict(4, max(worst.values()) <= 1e-4,
                 "; ".join(f"{k}: max dev={v:.1e}" for k, v in worst.items()))
    assert ok


# ----------------------------------------------------------------------------

class ShortRun:
    """A short Allen-Cahn run from profile data on a chord at n_r = 64, stepped by hand."""

    def __init__(self, kind: str, alpha_deg: float, t0: float, eps: float = 0.1, n_r: int = 64,
                 n_log: int = 3, T: float = 0.01):
        self.setup = build_setup(parse_config(chord_config(kind, alpha_deg, t0)))
        s = self.setup
        self.times = [t0 + T * k / (n_log - 1) for k in range(n_log)]
        curves = sharp_curves(s, self.times)
        self.fields = calibration_fields(s, curves)
        mesh = build_disk_mesh(s.domain, n_r)
        self.ops = assemble(mesh)
        self.eps = eps
        u0 = well_prepared_field(curves[0], s.domain, eps, s.profile, mesh=mesh)
        self.states = [PhaseState(u0, t0, eps, self.ops)]
        self.logged = [self.states[0]]
        tau = eps * mesh.h_max
        for a, b in zip(self.times[:-1], self.times[1:]):
            n = math.ceil((b - a) / tau - 1e-9)
            for k in range(n):
                st = minimizing_movement_step(self.states[-1], s.well, s.sigma, (b - a) / n)
                self.states.append(st)
            self.logged.append(self.states[-1])


@pytest.fixture(scope="module")
def trajectories():
    start = time.perf_counter()
    runs = [ShortRun("special", 90, 0.02), ShortRun("bump", 60, 0.03)]
    return runs, time.perf_counter() - start


def test_criterion_5_solver_structure(verdict, trajectories):
    verdict(5, False, "did not complete")
    runs, elapsed = trajectories
    rng = np.random.default_rng(5)
    mono = movement = in_range = True
    grad_err = 0.0
    for run in runs:
        s = run.setup
        E = [discrete_energy(st, s.well, s.sigma) for st in run.states]
        for k in range(1, len(run.states)):
            old, new = run.states[k - 1], run.states[k]
            tau = new.t - old.t
            du = new.u - old.u
            move = 0.5 * run.eps / tau * float(du @ (run.ops.M @ du))
            mono &= E[k] <= E[k - 1]
            movement &= E[k] + move <= E[k - 1]
            in_range &= bool(new.u.min() >= -1.0 and new.u.max() <= 1.0)
        # analytic gradient of the movement functional against central differences
        st = run.states[len(run.states) // 2]
        F = MovementFunctional(run.ops, run.states[0].u, run.eps, 1e-3, s.well, s.sigma)
        u = np.clip(st.u, -0.999, 0.999)
        g = F.gradient(u)
        for _ in range(10):
            d = rng.standard_normal(len(u))
            d /= np.linalg.norm(d)
            # |F| ~ 2 against directional slopes ~ 3e-4: smaller h is lost to cancellation
            h = 1e-4
            fd = (F.value(u + h * d) - F.value(u - h * d)) / (2 * h)
            grad_err = max(grad_err, abs(fd - g @ d) / max(abs(g @ d), 1e-300))
    ok = verdict(5, mono and movement and in_range and grad_err <= 1e-6 and elapsed < 30.0,
                 f"monotone={mono} movement_ineq={movement} range={in_range} "
                 f"grad_rel_err={grad_err:.1e} time={elapsed:.1f}s")
    assert ok


def test_criterion_6_coercivity(verdict, trajectories):
    verdict(6, False, "did not complete")
    runs, _ = trajectories
    coercive, identity, count = True, 0.0, 0
    for run in runs:
        s = run.setup
        for st, fld in zip(run.logged, run.fields):
            rep = evaluate_functionals(sample_state(st, s.well, s.sigma), fld, s.sigma,
                                       s.profile, s.well)
            coercive &= rep.coercivity_ok()
            identity = max(identity, abs(rep.E_relEn - rep.E_relEn_alt) / abs(rep.E_relEn))
            count += 1
    ok = verdict(6, coercive and identity <= 1e-8,
                 f"{count} logged states: bounds hold={coercive} identity rel={identity:.1e}")
    assert ok


# ----------------------------------------------------------------------------

def test_criterion_7_preparedness(verdict, disk):
    verdict(7, False, "did not complete")
    well = make_quartic_well()
    profile = build_profile(well)
    eps, n_r = (0.08, 0.04, 0.02), (64, 128, 256)
    start = time.perf_counter()
    special = verify_preparedness(diameter_curve(), disk, make_special_sigma(profile, np.pi / 2),
                                  profile, well, eps, n_r)
    alpha = np.pi / 3
    chord = evolve(orthogonal_arc(1.5, alpha), disk, alpha, 0.03)[-1]
    bump = verify_preparedness(chord, disk, make_bump_sigma(profile, alpha, 0.1), profile, well,
                               eps, n_r)
    elapsed = time.perf_counter() - start
    total, boundary = special["slopes"]["total"], bump["slopes"]["boundary"]
    ok = verdict(7, 1.7 <= total <= 2.3 and 0.8 <= boundary <= 1.2 and elapsed < 300.0,
                 f"special total slope={total:.3f} (band [1.7, 2.3]); bump boundary slope="
                 f"{boundary:.3f} (band [0.8, 1.2]); time={elapsed:.0f}s")
    assert ok


@pytest.mark.slow
def test_criterion_8_convergence_rates(verdict):
    verdict(8, False, "did not complete")
    start = time.perf_counter()
    details, ok = [], True
    for kind in ("special", "bump"):
        cfg = load_config(str(CONFIGS / f"chord_{kind}.ini"))
        setup = build_setup(cfg)
        summary = converge_summary(setup, _run_cases(setup, 1, None))
        ok &= summary["rate_ok"] and summary["gronwall_ok"]
        details.append(f"{kind}: L1 rate={summary['l1_rate']['rate']:.3f} "
                       f"band={summary['rate_band']} Gronwall C="
                       f"{[round(c, 4) for c in summary['gronwall_constants']]} "
                       f"spread={summary['gronwall_spread']:.2f}")
    elapsed = time.perf_counter() - start
    ok &= elapsed < 1800.0
    assert verdict(8, ok, "; ".join(details) + f"; time={elapsed / 60:.1f} min")


def test_criterion_9_sharp_solver(verdict, disk):
    verdict(9, False, "did not complete")
    c = diameter_curve()
    drift = 0.0
    for _ in range(20):
        nxt = mcf_step(c, disk, np.pi / 2, stable_dt(c))
        drift = max(drift, float(np.abs(nxt.nodes - c.nodes).max()))
        c = nxt
    angle = 0.0
    for alpha in (np.pi / 2, np.pi / 3):
        for cur in evolve(orthogonal_arc(1.5, alpha), disk, alpha, 0.02,
                          snapshot_times=[0.005, 0.01, 0.015]):
            angle = max(angle, float(np.max(np.abs(angle_residual(cur, disk, alpha)))))
    orders = []
    for alpha in (np.pi / 2, np.pi / 3):
        # start from a compatible state: the raw arc violates third-order compatibility
        c0 = evolve(orthogonal_arc(1.5, alpha, n_nodes=65), disk, alpha, 0.01)[-1]
        dt = stable_dt(c0)
        ends = [evolve(c0, disk, alpha, 0.005, dt=dt / m)[-1].nodes for m in (1, 2, 4)]
        e1 = np.abs(ends[0] - ends[1]).max()
        e2 = np.abs(ends[1] - ends[2]).max()
        orders.append(math.log2(e1 / e2))
    ok = verdict(9, drift <= 1e-10 and angle <= 1e-6 and min(orders) >= 1.0,
                 f"diameter drift/step={drift:.1e} angle={angle:.1e} "
                 f"self-convergence orders=" + ", ".join(f"{o:.4f}" for o in orders))
    assert ok
