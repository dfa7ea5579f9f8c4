"""Command-line experiments: configuration, orchestration, rate fits and reports.

Configuration is a flat INI file with the sections ``[well]``, ``[sigma]``,
``[domain]``, ``[interface]``, ``[solver]`` and ``[experiment]``.  Every
subcommand writes its artefacts under ``--out`` and exits with status 0
only when all of its checks pass.
"""
from __future__ import annotations

import argparse
import configparser
import json
import logging
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from types import SimpleNamespace

import numpy as np

from . import __version__
from .calibration import (CalibrationConfig, CalibrationScaleError, SamplePlan,
                          angle_consistent_curve, build_global_field, check_calibration,
                          select_scales, write_report)
from .functionals import (FunctionalReport, evaluate_functionals, gronwall_constant,
                          report_dict, sample_state, write_report_csv)
from .geometry import DomainBoundary, InterfaceCurve, diameter_curve, orthogonal_arc
from .initial_data import verify_preparedness, well_prepared_field
from .phase_field import (assemble, build_disk_mesh, run_allen_cahn,
                          write_energy_log, write_snapshot)
from .potentials import (ValidationError, build_profile, make_bump_sigma, make_quartic_well,
                         make_special_sigma, validate_boundary_density, validate_well)
from .sharp_mcf import angle_residual, evolve, stable_dt

log = logging.getLogger("acmcf")

# Acceptance bands for the fitted exponents.
PREPARE_TOTAL_BAND = (1.7, 2.3)
PREPARE_BOUNDARY_BAND = (0.8, 1.2)
RATE_BANDS = {"special": (0.8, 1.2), "bump": (0.4, 0.8)}
GRONWALL_SPREAD = 2.0


# ----------------------------------------------------------------------------
# Configuration
# ----------------------------------------------------------------------------

class ConfigError(ValueError):
    pass


REQUIRED = object()


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.replace(",", " ").split())


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in text.replace(",", " ").split())


def _bool(text: str) -> bool:
    v = text.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


SCHEMA: dict[str, dict[str, tuple]] = {
    "well": {"kind": (str, "quartic")},
    "sigma": {"kind": (str, REQUIRED), "alpha_deg": (float, REQUIRED), "kappa": (float, 0.1)},
    "domain": {"a": (float, 1.0), "b": (float, 1.0)},
    "interface": {"kind": (str, REQUIRED), "center_x": (float, 1.5), "t0": (float, 0.0),
                  "n_nodes": (int, 129)},
    "solver": {"n_r": (str, "auto"), "h_factor": (float, 0.25), "tau_factor": (float, 1.0),
               "ref_dt_divisor": (int, 16), "ref_node_factor": (int, 4)},
    "experiment": {"eps": (_floats, "0.08 0.04 0.02"), "T": (float, 0.02), "n_log": (int, 3),
                   "seed": (int, 0), "samples": (int, 10000), "quad_order": (int, 4),
                   "n_r_prepare": (_ints, "64 128 256"), "calib_times": (_floats, ""),
                   "equality_tol": (float, 1e-6), "ratio_tol": (float, math.inf),
                   "force": (_bool, "false")},
}

DEFAULT_CONFIG = """\
[sigma]
kind = special
alpha_deg = 90

[interface]
kind = diameter
"""


def _line_of(text: str, section: str, key: str | None = None) -> int | None:
    current = None
    for i, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1].strip()
            if key is None and current == section:
                return i
            continue
        if key is not None and current == section and "=" in line:
            if line.split("=", 1)[0].strip() == key:
                return i
    return None


def parse_config(text: str, source: str = "<config>") -> SimpleNamespace:
    """Parse and type-check a configuration; errors name the offending line or key."""
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc
    for sec in cp.sections():
        if sec not in SCHEMA:
            raise ConfigError(f"{source}:{_line_of(text, sec)}: unknown section [{sec}]")
        for key in cp[sec]:
            if key not in SCHEMA[sec]:
                raise ConfigError(f"{source}:{_line_of(text, sec, key)}: unknown key "
                                  f"'{key}' in [{sec}]")
    out = {}
    for sec, keys in SCHEMA.items():
        vals = {}
        for key, (conv, default) in keys.items():
            if cp.has_option(sec, key):
                raw = cp.get(sec, key)
                try:
                    vals[key] = conv(raw)
                except ValueError as exc:
                    raise ConfigError(f"{source}:{_line_of(text, sec, key)}: bad value for "
                                      f"{sec}.{key}: {exc}") from exc
            elif default is REQUIRED:
                raise ConfigError(f"{source}: missing required key '{key}' in [{sec}]")
            else:
                vals[key] = conv(default) if isinstance(default, str) else default
        out[sec] = SimpleNamespace(**vals)
    cfg = SimpleNamespace(**out)
    if cfg.sigma.kind not in ("special", "bump"):
        raise ConfigError(f"{source}:{_line_of(text, 'sigma', 'kind')}: sigma.kind must be "
                          "'special' or 'bump'")
    if cfg.interface.kind not in ("diameter", "arc"):
        raise ConfigError(f"{source}:{_line_of(text, 'interface', 'kind')}: interface.kind "
                          "must be 'diameter' or 'arc'")
    if cfg.well.kind != "quartic":
        raise ConfigError(f"{source}:{_line_of(text, 'well', 'kind')}: only the quartic "
                          "well is available")
    return cfg


def load_config(path: str | None) -> SimpleNamespace:
    if path is None:
        return parse_config(DEFAULT_CONFIG, "<default>")
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    return parse_config(text, str(p))


# ----------------------------------------------------------------------------
# Problem setup
# ----------------------------------------------------------------------------

@dataclass
class Setup:
    cfg: SimpleNamespace
    well: object
    profile: object
    sigma: object
    domain: DomainBoundary
    alpha: float

    def metadata(self, **extra) -> list[str]:
        s = self.cfg.sigma
        lines = [f"acmcf {__version__}",
                 f"well={self.cfg.well.kind} sigma={s.kind} alpha={self.alpha!r}"
                 + (f" kappa={s.kappa!r}" if s.kind == "bump" else ""),
                 f"domain a={self.domain.a!r} b={self.domain.b!r}",
                 f"interface={self.cfg.interface.kind} center_x={self.cfg.interface.center_x!r} "
                 f"t0={self.cfg.interface.t0!r}"]
        if extra:
            lines.append(" ".join(f"{k}={v!r}" for k, v in extra.items()))
        return lines


def make_sigma(kind: str, profile, alpha: float, kappa: float):
    if kind == "special":
        return make_special_sigma(profile, alpha)
    return make_bump_sigma(profile, alpha, kappa)


def build_setup(cfg: SimpleNamespace) -> Setup:
    well = make_quartic_well()
    profile = _profile()
    alpha = math.radians(cfg.sigma.alpha_deg)
    if abs(cfg.sigma.alpha_deg - 90.0) < 1e-12:
        alpha = math.pi / 2
    sigma = make_sigma(cfg.sigma.kind, profile, alpha, cfg.sigma.kappa)
    domain = DomainBoundary(cfg.domain.a, cfg.domain.b)
    return Setup(cfg=cfg, well=well, profile=profile, sigma=sigma, domain=domain, alpha=alpha)


@lru_cache(maxsize=1)
def _profile():
    return build_profile(make_quartic_well())


def initial_curve(cfg: SimpleNamespace, alpha: float, node_factor: int = 1) -> InterfaceCurve:
    n = cfg.interface.n_nodes * node_factor
    if (cfg.domain.a, cfg.domain.b) != (1.0, 1.0):
        raise ConfigError("the built-in interfaces live in the unit disk (a = b = 1)")
    if cfg.interface.kind == "diameter":
        if abs(alpha - math.pi / 2) > 1e-12:
            raise ConfigError("the diameter is only stationary for a 90 degree angle")
        return diameter_curve(n_nodes=n)
    return orthogonal_arc(cfg.interface.center_x, alpha, n_nodes=n)


@lru_cache(maxsize=8)
def _sharp_trajectory(kind, center_x, alpha, n_nodes, dt, times):
    """Sharp curves at the absolute ``times`` (sorted), starting from ``t = 0``."""
    cfg = SimpleNamespace(interface=SimpleNamespace(kind=kind, center_x=center_x, n_nodes=n_nodes),
                          domain=SimpleNamespace(a=1.0, b=1.0))
    curve = initial_curve(cfg, alpha)
    domain = DomainBoundary()
    if kind == "diameter":
        return tuple(InterfaceCurve(curve.nodes, t=t, orientation=curve.orientation,
                                    domain=domain) for t in times)
    dt = min(dt, stable_dt(curve))
    snaps = evolve(curve, domain, alpha, times[-1], dt=dt, snapshot_times=[t for t in times if t > 0])
    out = [curve] if times[0] == 0 else []
    out += snaps[: len(times) - len(out)]
    return tuple(out)


def sharp_curves(setup: Setup, times, dt: float | None = None, node_factor: int = 1):
    cfg = setup.cfg
    if dt is None:
        dt = 1e9
    return list(_sharp_trajectory(cfg.interface.kind, cfg.interface.center_x, setup.alpha,
                                  cfg.interface.n_nodes * node_factor, float(dt),
                                  tuple(float(t) for t in times)))


@lru_cache(maxsize=32)
def _field_cached(curves_key, alpha):
    curves, domain = curves_key.curves, curves_key.domain
    config = CalibrationConfig()
    scales = select_scales([angle_consistent_curve(c, domain, alpha) for c in curves], domain,
                           alpha, config)
    return tuple(build_global_field(c, domain, alpha, config, scales=scales) for c in curves)


class _CurvesKey:
    """Hashable by identity of the curve tuple (curves come from a cached trajectory)."""

    def __init__(self, curves, domain):
        self.curves, self.domain = tuple(curves), domain

    def __hash__(self):
        return hash(tuple(id(c) for c in self.curves))

    def __eq__(self, other):
        return all(a is b for a, b in zip(self.curves, other.curves)) and len(
            self.curves) == len(other.curves)


def calibration_fields(setup: Setup, curves):
    """Calibrations for several snapshots with common scales."""
    return list(_field_cached(_CurvesKey(curves, setup.domain), setup.alpha))


def rings_for(eps: float, domain: DomainBoundary, h_factor: float) -> int:
    """Smallest ring count whose mesh has ``h_max <= h_factor * eps``."""
    n = max(4, int(math.ceil(1.73 * max(domain.a, domain.b) / (h_factor * eps))) - 1)
    while _mesh(domain, n).h_max > h_factor * eps:
        n += 1
    return n


@lru_cache(maxsize=4)
def _mesh(domain: DomainBoundary, n_r: int):
    return build_disk_mesh(domain, n_r)


# ----------------------------------------------------------------------------
# Rate fits
# ----------------------------------------------------------------------------

def fit_rate(eps, err, guard: float = 3.0) -> dict:
    """Log-log least squares with the pre-asymptotic guard on the largest ``eps``.

    The largest ``eps`` is dropped (and the drop reported) when, measured
    against the fit through the other points, its residual exceeds ``guard``
    times their RMS residual.  At least three points must remain.  The point
    is left out of its own yardstick because an outlier pulls the joint fit
    towards itself: in a joint fit of n points no residual can exceed
    sqrt(n) times the RMS, so a 3x test would never fire below ten points.
    """
    eps = np.asarray(eps, dtype=float)
    err = np.asarray(err, dtype=float)
    if np.any(err <= 0) or len(eps) < 2:
        return {"rate": float("nan"), "intercept": float("nan"), "excluded": None,
                "residuals": []}
    x, y = np.log(eps), np.log(err)
    p = np.polyfit(x, y, 1)
    res = y - np.polyval(p, x)
    excluded = None
    k = int(np.argmax(eps))
    if len(eps) >= 4:
        keep = np.arange(len(eps)) != k
        q = np.polyfit(x[keep], y[keep], 1)
        rms = max(float(np.sqrt(np.mean((y[keep] - np.polyval(q, x[keep]))**2))), 1e-8)
        gap = float(y[k] - np.polyval(q, x[k]))
        if abs(gap) > guard * rms:
            p = q
            res = y - np.polyval(p, x)
            excluded = float(eps[k])
            log.info("rate fit: excluded eps=%g (residual %.3g > %g x RMS %.3g)", eps[k], gap,
                     guard, rms)
    return {"rate": float(p[0]), "intercept": float(p[1]), "excluded": excluded,
            "residuals": [float(r) for r in res]}


# ----------------------------------------------------------------------------
# One Allen-Cahn run against the sharp evolution
# ----------------------------------------------------------------------------

@dataclass
class CaseResult:
    eps: float
    n_r: int
    h_max: float
    tau: float
    reports: list[FunctionalReport] = field(default_factory=list)
    energy_log: list = field(default_factory=list)
    min_u: float = 0.0
    max_u: float = 0.0
    resolved: bool = True

    @property
    def l1_final(self) -> float:
        return self.reports[-1].l1

    @property
    def gronwall(self) -> float:
        return gronwall_constant([r.t for r in self.reports],
                                 [r.E_relEn + r.E_bulk for r in self.reports])


def log_times(cfg) -> list[float]:
    t0, T, n = cfg.interface.t0, cfg.experiment.T, max(2, cfg.experiment.n_log)
    return [t0 + T * k / (n - 1) for k in range(n)]


def coarse_tau(setup: Setup) -> float:
    cfg = setup.cfg
    eps = max(cfg.experiment.eps)
    n_r = _rings(setup, eps)
    return cfg.solver.tau_factor * eps * _mesh(setup.domain, n_r).h_max


def _rings(setup: Setup, eps: float) -> int:
    if setup.cfg.solver.n_r == "auto":
        return rings_for(eps, setup.domain, setup.cfg.solver.h_factor)
    return int(setup.cfg.solver.n_r)


def reference_curves(setup: Setup) -> list[InterfaceCurve]:
    """Sharp curves at the logged times from the refined front-tracking run."""
    cfg = setup.cfg
    dt = coarse_tau(setup) / cfg.solver.ref_dt_divisor
    return sharp_curves(setup, log_times(cfg), dt=dt, node_factor=cfg.solver.ref_node_factor)


def run_case(setup: Setup, eps: float, out_dir: Path | None = None,
             curves: list[InterfaceCurve] | None = None) -> CaseResult:
    cfg = setup.cfg
    n_r = _rings(setup, eps)
    mesh = _mesh(setup.domain, n_r)
    ops = assemble(mesh)
    tau = cfg.solver.tau_factor * eps * mesh.h_max
    curves = curves if curves is not None else reference_curves(setup)
    times = [c.t for c in curves]
    fields = calibration_fields(setup, curves)
    u0 = well_prepared_field(fields[0].curve, setup.domain, eps, setup.profile, mesh=mesh)
    res = CaseResult(eps=eps, n_r=n_r, h_max=mesh.h_max, tau=tau,
                     resolved=mesh.h_max <= eps / 4 * (1 + 1e-12))
    traj = run_allen_cahn(u0, eps, tau, cfg.experiment.T, setup.well, setup.sigma, ops,
                          snapshot_times=times, t0=times[0])
    res.energy_log = traj.energy_log
    res.min_u = float(min(s.u.min() for s in traj.snapshots))
    res.max_u = float(max(s.u.max() for s in traj.snapshots))
    for state, fld in zip(traj.snapshots, fields):
        sample = sample_state(state, setup.well, setup.sigma)
        res.reports.append(evaluate_functionals(sample, fld, setup.sigma, setup.profile,
                                                setup.well))
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        meta = setup.metadata(eps=eps, n_r=n_r, h_max=mesh.h_max, tau=tau)
        write_report_csv(res.reports, out_dir / "functionals.csv", meta)
        write_energy_log(traj.energy_log, out_dir / "energy.csv", meta)
        for k, state in enumerate(traj.snapshots):
            write_snapshot(state, out_dir / f"snapshot_{k:03d}.txt")
    return res


def _run_cases(setup: Setup, threads: int, out: Path | None):
    cfg = setup.cfg
    curves = reference_curves(setup)
    calibration_fields(setup, curves)

    def job(eps):
        sub = None if out is None else out / f"eps_{eps:g}"
        return run_case(setup, eps, sub, curves)

    eps_list = list(cfg.experiment.eps)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(job, eps_list))
    return [job(e) for e in eps_list]


def converge_summary(setup: Setup, results: list[CaseResult]) -> dict:
    cfg = setup.cfg
    used = [r for r in results if r.resolved or cfg.experiment.force]
    for r in results:
        if not r.resolved:
            log.warning("eps=%g: mesh not resolved (h_max=%.4g > eps/4)%s", r.eps, r.h_max,
                        "" if cfg.experiment.force else ", excluded from the fit")
    eps = [r.eps for r in used]
    l1_fit = fit_rate(eps, [r.l1_final for r in used])
    rhs_fit = fit_rate(eps, [math.sqrt(max(r.reports[0].E_relEn + r.reports[0].E_bulk, 0.0))
                             for r in used])
    consts = [r.gronwall for r in used]
    positive = [c for c in consts if c > 0]
    if len(consts) < 2:
        spread = math.inf
    elif not positive:
        spread = 1.0
    elif len(positive) < len(consts):
        spread = math.inf
    else:
        spread = max(positive) / min(positive)
    band = RATE_BANDS[setup.sigma.kind]
    coercive = all(rep.coercivity_ok() for r in results for rep in r.reports)
    identity = max(abs(rep.E_relEn - rep.E_relEn_alt) / max(abs(rep.E_relEn), 1e-300)
                   for r in results for rep in r.reports)
    return {
        "sigma": setup.sigma.kind, "alpha": setup.alpha, "eps": eps,
        "l1_rate": l1_fit, "rhs_rate": rhs_fit, "gronwall_constants": consts,
        "gronwall_spread": spread, "rate_band": list(band),
        "rate_ok": bool(band[0] <= l1_fit["rate"] <= band[1]),
        "gronwall_ok": bool(spread <= GRONWALL_SPREAD),
        "coercivity_ok": bool(coercive), "identity_max_rel": float(identity),
        "range_ok": bool(all(-1.0 <= r.min_u and r.max_u <= 1.0 for r in results)),
    }


def _write_rates_csv(setup: Setup, results: list[CaseResult], path: Path) -> None:
    lines = [f"# {h}" for h in setup.metadata(T=setup.cfg.experiment.T)]
    lines.append("eps,n_r,h_max,tau,l1_T,E_relEn_0,E_bulk_0,E_relEn_T,E_bulk_T,C_hat")
    for r in results:
        a, b = r.reports[0], r.reports[-1]
        lines.append(",".join(repr(float(v)) if not isinstance(v, int) else str(v) for v in (
            r.eps, r.n_r, r.h_max, r.tau, r.l1_final, a.E_relEn, a.E_bulk, b.E_relEn, b.E_bulk,
            r.gronwall)))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _write_json(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n",
                    encoding="utf-8")


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o).__name__)


# ----------------------------------------------------------------------------
# Subcommands
# ----------------------------------------------------------------------------

def _check(results: list, name: str, value: float, tol: float, ok: bool | None = None) -> None:
    passed = bool(value <= tol) if ok is None else bool(ok)
    results.append({"check": name, "value": float(value), "tol": float(tol), "passed": passed})


def cmd_validate(cfg, out: Path, threads: int = 1) -> int:
    checks: list[dict] = []
    well = make_quartic_well()
    try:
        validate_well(well)
        _check(checks, "well", 0.0, 0.0)
    except ValidationError as exc:
        checks.append({"check": "well", "passed": False, "error": str(exc)})
    prof = _profile()
    _check(checks, "surface_tension", abs(prof.c0 - 4.0 / 3.0), 1e-10)
    r = np.array([0.5, 1.0, 2.0])
    _check(checks, "profile_tanh", float(np.max(np.abs(prof.theta0(r) - np.tanh(r)))), 1e-8)
    eq = np.abs(0.5 * prof.dtheta**2 - well.eval(prof.theta))
    _check(checks, "equipartition", float(eq.max()), 1e-8)
    alpha = math.radians(cfg.sigma.alpha_deg)
    if abs(cfg.sigma.alpha_deg - 90.0) < 1e-12:
        alpha = math.pi / 2
    try:
        sigma = make_sigma(cfg.sigma.kind, prof, alpha, cfg.sigma.kappa)
        validate_boundary_density(sigma, prof)
        _check(checks, "boundary_density", 0.0, 0.0)
    except (ValidationError, ValueError) as exc:
        checks.append({"check": "boundary_density", "passed": False, "error": str(exc)})
    domain = DomainBoundary(cfg.domain.a, cfg.domain.b)
    n_r = 64 if cfg.solver.n_r == "auto" else int(cfg.solver.n_r)
    try:
        mesh = build_disk_mesh(domain, n_r)
        _check(checks, "mesh_min_area", float(mesh.areas.min()), 0.0, ok=bool(mesh.areas.min() > 0))
        _, sb = domain.project(mesh.nodes[mesh.boundary_edges[:, 0]])
        _check(checks, "mesh_boundary_nodes", float(np.max(np.abs(sb))), 1e-12)
        ang = mesh.angles()
        _check(checks, "mesh_angles", 0.0, 0.0, ok=bool(ang.min() >= 20 and ang.max() <= 130))
        euler = mesh.n_nodes - mesh.n_edges() + len(mesh.triangles)
        _check(checks, "mesh_euler", abs(euler - 1), 0.0)
    except Exception as exc:  # mesh errors are reported, not raised
        checks.append({"check": "mesh", "passed": False, "error": str(exc)})
    try:
        curve = initial_curve(cfg, alpha)
        curve.validate(domain)
        if cfg.interface.kind == "diameter" or cfg.interface.t0 == 0:
            res = float(np.max(np.abs(angle_residual(curve, domain, alpha))))
            _check(checks, "interface_angle", res, 1e-6)
        else:
            _check(checks, "interface", 0.0, 0.0)
    except Exception as exc:
        checks.append({"check": "interface", "passed": False, "error": str(exc)})
    ok = all(c["passed"] for c in checks)
    out.mkdir(parents=True, exist_ok=True)
    _write_json({"passed": ok, "checks": checks}, out / "validate.json")
    for c in checks:
        print(f"{'PASS' if c['passed'] else 'FAIL'}  {c['check']}"
              + (f"  {c['error']}" if "error" in c else f"  value={c['value']:.3e}"))
    return 0 if ok else 1


def cmd_calibrate(cfg, out: Path, threads: int = 1) -> int:
    setup = build_setup(cfg)
    times = list(cfg.experiment.calib_times) or [cfg.interface.t0]
    try:
        curves = sharp_curves(setup, sorted(times))
        fields = calibration_fields(setup, curves)
    except CalibrationScaleError as exc:
        print(f"calibration scale error: {exc}", file=sys.stderr)
        return 2
    out.mkdir(parents=True, exist_ok=True)
    plan = SamplePlan(n_samples=cfg.experiment.samples, seed=cfg.experiment.seed)
    ok_all = True
    summary = []
    for fld in fields:
        rep = check_calibration(fld, plan)
        write_report(rep, out / f"calibration_t{fld.t:.6f}.json")
        eq_names = ("boundary_xi", "boundary_B")
        eq_ok = all(rep[n]["max_ratio"] <= cfg.experiment.equality_tol for n in eq_names)
        ratios = {n: rep[n]["max_ratio"] for n in rep if n not in eq_names}
        finite = all(np.isfinite(v) for v in ratios.values())
        within = all(v <= cfg.experiment.ratio_tol for k, v in ratios.items()
                     if k != "length_constant")
        ok = eq_ok and finite and within
        ok_all &= ok
        summary.append({"t": fld.t, "passed": ok, "equality_ok": eq_ok, "finite": finite,
                        "within_ratio_tol": within, "length_constant": rep["length_constant"]["max_ratio"]})
        print(f"{'PASS' if ok else 'FAIL'}  t={fld.t:g}  "
              + "  ".join(f"{k}={v:.3e}" for k, v in sorted(ratios.items())))
    _write_json({"passed": ok_all, "snapshots": summary}, out / "calibrate.json")
    return 0 if ok_all else 1


def cmd_simulate(cfg, out: Path, threads: int = 1) -> int:
    setup = build_setup(cfg)
    results = _run_cases(setup, threads, out)
    ok = True
    for r in results:
        E = np.array([row[1] for row in r.energy_log])
        mono = bool(np.all(np.diff(E) <= 1e-12 * max(1.0, abs(E[0]))))
        rng = -1.0 <= r.min_u and r.max_u <= 1.0
        coer = all(rep.coercivity_ok() for rep in r.reports)
        ok &= mono and rng and coer
        print(f"{'PASS' if mono and rng and coer else 'FAIL'}  eps={r.eps:g} n_r={r.n_r} "
              f"energy_monotone={mono} range={rng} coercivity={coer} l1(T)={r.l1_final:.4e}")
    return 0 if ok else 1


def cmd_prepare(cfg, out: Path, threads: int = 1) -> int:
    setup = build_setup(cfg)
    t0 = cfg.interface.t0
    curve = sharp_curves(setup, [t0])[0]
    fld = calibration_fields(setup, [curve])[0]
    n_r = cfg.experiment.n_r_prepare
    if len(n_r) != len(cfg.experiment.eps):
        raise ConfigError("experiment.n_r_prepare needs one ring count per eps")
    rep = verify_preparedness(curve, setup.domain, setup.sigma, setup.profile, setup.well,
                              cfg.experiment.eps, n_r, field=fld,
                              order=cfg.experiment.quad_order)
    sl = rep["slopes"]
    lo, hi = PREPARE_TOTAL_BAND
    if setup.sigma.kind == "special":
        ok = lo <= sl["total"] <= hi
    else:
        ok = PREPARE_BOUNDARY_BAND[0] <= sl["boundary"] <= PREPARE_BOUNDARY_BAND[1]
    rep["passed"] = bool(ok)
    out.mkdir(parents=True, exist_ok=True)
    lines = [f"# {h}" for h in setup.metadata()]
    lines.append("eps,n_r,E_relEn,E_bulk,boundary,l1")
    for r in rep["rows"]:
        lines.append(f"{r['eps']!r},{r['n_r']},{r['E_relEn']!r},{r['E_bulk']!r},"
                     f"{r['boundary']!r},{r['l1']!r}")
    (out / "prepare.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    _write_json(rep, out / "prepare.json")
    print(f"{'PASS' if ok else 'FAIL'}  slopes: " + "  ".join(f"{k}={v:.3f}" for k, v in sl.items()))
    return 0 if ok else 1


def cmd_converge(cfg, out: Path, threads: int = 1) -> int:
    setup = build_setup(cfg)
    results = _run_cases(setup, threads, out)
    summary = converge_summary(setup, results)
    out.mkdir(parents=True, exist_ok=True)
    _write_rates_csv(setup, results, out / "rates.csv")
    summary["cases"] = [{"eps": r.eps, "n_r": r.n_r, "tau": r.tau, "l1_T": r.l1_final,
                         "reports": [report_dict(x) for x in r.reports]} for r in results]
    ok = summary["rate_ok"] and summary["gronwall_ok"] and summary["coercivity_ok"]
    summary["passed"] = bool(ok)
    _write_json(summary, out / "converge.json")
    print(f"{'PASS' if summary['rate_ok'] else 'FAIL'}  l1 rate={summary['l1_rate']['rate']:.3f} "
          f"band={summary['rate_band']}  (rhs rate {summary['rhs_rate']['rate']:.3f})")
    print(f"{'PASS' if summary['gronwall_ok'] else 'FAIL'}  Gronwall constants "
          f"{[round(c, 3) for c in summary['gronwall_constants']]} spread={summary['gronwall_spread']:.3f}")
    return 0 if ok else 1


COMMANDS = {"validate": cmd_validate, "calibrate": cmd_calibrate, "simulate": cmd_simulate,
            "prepare": cmd_prepare, "converge": cmd_converge}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="acmcf", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"acmcf {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        sp = sub.add_parser(name, help=(fn.__doc__ or name).strip().splitlines()[0])
        sp.add_argument("--config", help="INI configuration file (defaults to the stationary diameter)")
        sp.add_argument("--out", default=f"out/{name}", help="output directory")
        sp.add_argument("--threads", type=int, default=1, help="concurrent eps runs")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    if args.threads < 1:
        print("--threads must be at least 1", file=sys.stderr)
        return 2
    os.environ.setdefault("OMP_NUM_THREADS", str(args.threads))
    try:
        cfg = load_config(args.config)
        return COMMANDS[args.command](cfg, Path(args.out), args.threads)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


cmd_validate.__doc__ = "Check the potentials, boundary density, mesh and interface."
cmd_calibrate.__doc__ = "Build calibrations and report every sampled condition."
cmd_simulate.__doc__ = "Run Allen-Cahn for each eps and log energies and functionals."
cmd_prepare.__doc__ = "Measure the eps-scaling of well-prepared initial data."
cmd_converge.__doc__ = "Fit convergence rates of the L1 error against the sharp evolution."
