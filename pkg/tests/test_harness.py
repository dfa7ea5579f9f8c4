import json
import math

import numpy as np
import pytest

from acmcf.harness import (ConfigError, fit_rate, load_config, log_times, main, parse_config,
                           rings_for)
from acmcf.phase_field import build_disk_mesh

TINY = """\
[sigma]
kind = special
alpha_deg = 90

[interface]
kind = arc
center_x = 1.5
t0 = 0.02

[solver]
h_factor = 0.6

[experiment]
eps = 0.25 0.2
T = 0.004
n_log = 2
samples = 1000
"""


def test_default_config():
    cfg = load_config(None)
    assert cfg.sigma.kind == "special" and cfg.interface.kind == "diameter"
    assert cfg.experiment.eps == (0.08, 0.04, 0.02)
    assert cfg.experiment.ratio_tol == math.inf


def test_missing_key_is_named():
    with pytest.raises(ConfigError, match="missing required key 'alpha_deg' in \\[sigma\\]"):
        parse_config("[sigma]\nkind = special\n[interface]\nkind = diameter\n")


def test_unknown_key_has_line_number():
    text = "[sigma]\nkind = special\nalpha_deg = 90\n[interface]\nkind = diameter\nradius = 2\n"
    with pytest.raises(ConfigError, match=r"cfg\.ini:6: unknown key 'radius'"):
        parse_config(text, "cfg.ini")


def test_bad_value_has_line_number():
    text = "[sigma]\nkind = special\nalpha_deg = ninety\n[interface]\nkind = diameter\n"
    with pytest.raises(ConfigError, match=r"cfg\.ini:3: bad value for sigma\.alpha_deg"):
        parse_config(text, "cfg.ini")


def test_unknown_choice_rejected():
    with pytest.raises(ConfigError, match="sigma.kind"):
        parse_config("[sigma]\nkind = cubic\nalpha_deg = 90\n[interface]\nkind = diameter\n")


def test_log_times():
    cfg = parse_config(TINY)
    assert log_times(cfg) == pytest.approx([0.02, 0.024])


def test_rings_meet_resolution(disk):
    for eps in (0.2, 0.08):
        n = rings_for(eps, disk, 0.25)
        assert build_disk_mesh(disk, n).h_max <= 0.25 * eps
        assert build_disk_mesh(disk, n - 1).h_max > 0.25 * eps


def test_fit_rate_recovers_power():
    eps = np.array([0.08, 0.04, 0.02])
    fit = fit_rate(eps, 0.3 * eps**1.5)
    assert fit["rate"] == pytest.approx(1.5) and fit["excluded"] is None


def test_fit_rate_guard_drops_outlier():
    eps = np.array([0.16, 0.08, 0.04, 0.02, 0.01])
    err = eps.copy()
    err[0] *= 20.0
    fit = fit_rate(eps, err)
    assert fit["excluded"] == 0.16
    assert fit["rate"] == pytest.approx(1.0)
    # three points are too few to drop one
    assert fit_rate(eps[:3], err[:3])["excluded"] is None
    noisy = eps * np.array([1.1, 0.9, 1.1, 0.9, 1.1])
    assert fit_rate(eps, noisy)["excluded"] is None


def test_fit_rate_nonpositive():
    assert math.isnan(fit_rate([0.1, 0.05], [0.0, 1.0])["rate"])


def test_validate_default(tmp_path, capsys):
    assert main(["validate", "--out", str(tmp_path)]) == 0
    rep = json.loads((tmp_path / "validate.json").read_text())
    assert rep["passed"]
    assert "PASS" in capsys.readouterr().out


def test_validate_rejects_monotone_boundary_density(tmp_path):
    # kappa = cos(alpha) violates the monotonicity of the bump density
    cfg = tmp_path / "bad.ini"
    cfg.write_text("[sigma]\nkind = bump\nalpha_deg = 60\nkappa = 0.5\n"
                   "[interface]\nkind = arc\n")
    assert main(["validate", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 1
    rep = json.loads((tmp_path / "o" / "validate.json").read_text())
    bad = [c for c in rep["checks"] if not c["passed"]]
    assert [c["check"] for c in bad] == ["boundary_density"]
    assert "sigma'" in bad[0]["error"]


def test_config_error_exit_code(tmp_path, capsys):
    cfg = tmp_path / "bad.ini"
    cfg.write_text("[sigma]\nkind = special\n")
    assert main(["validate", "--config", str(cfg), "--out", str(tmp_path)]) == 2
    assert "alpha_deg" in capsys.readouterr().err


def test_threads_must_be_positive(tmp_path):
    assert main(["validate", "--threads", "0", "--out", str(tmp_path)]) == 2


@pytest.mark.slow
def test_simulate_is_deterministic(tmp_path):
    cfg = tmp_path / "tiny.ini"
    cfg.write_text(TINY)
    outs = []
    for name in ("a", "b"):
        code = main(["simulate", "--config", str(cfg), "--out", str(tmp_path / name)])
        assert code == 0
        outs.append(tmp_path / name)
    for eps in ("0.25", "0.2"):
        files = [o / f"eps_{eps}" / "functionals.csv" for o in outs]
        assert files[0].read_bytes() == files[1].read_bytes()
        lines = files[0].read_text().splitlines()
        assert lines[0].startswith("# acmcf")
        assert any(line.startswith("t,E_eps,E_relEn") for line in lines)
