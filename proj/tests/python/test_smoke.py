import math
from pathlib import Path

import numpy as np
import pytest

import owe

SCENARIOS = Path(__file__).resolve().parents[2] / "scenarios"


def test_design_angles():
    assert math.degrees(owe.half_power_angle_for_grid(1.25, 1.75)) == pytest.approx(19.65, abs=0.01)
    assert owe.lambertian_order(owe.deg2rad(60.0)) == pytest.approx(1.0)


def test_noise_budget_table_values():
    nb = owe.noise_budget()
    assert nb.pd_a == pytest.approx(13.0e-9, rel=0.03)
    assert nb.tia_a == pytest.approx(18.1e-9, rel=0.03)
    assert nb.dcdc_a == pytest.approx(0.42e-3, rel=0.10)


def test_two_ea_stability_flip():
    c = 1e-5
    h = np.array([[0.0, c], [c, 0.0]])
    assert owe.spectral_radius(h, np.full(2, 5e4)) == pytest.approx(0.5)
    assert owe.is_stable(h, np.full(2, 0.99e5))
    assert not owe.is_stable(h, np.full(2, 1.01e5))
    assert owe.max_equal_gain(h, 0.0) == pytest.approx(1e5, rel=1e-8)
    with pytest.raises(owe.InstabilityError):
        owe.snr(h, np.full(2, 2e5), entry=0, ap=1)


def test_probe_recovers_line():
    h = np.array([[6e-6, 3e-6, 0.0], [3e-6, 6e-6, 3e-6], [0.0, 3e-6, 6e-6]])
    est, layers, emissions = owe.probe_from_scratch(h, ap=2)
    assert layers == [2, 1, 0]
    assert emissions >= 3
    np.testing.assert_allclose(est[:, 2], h[:, 2], rtol=1e-12)
    assert est[0, 1] == pytest.approx(h[0, 1], rel=1e-9)


def test_single_bss_improves_on_baseline():
    s = owe.Scenario.load(str(SCENARIOS / "single_bss_3x3.yaml"))
    h = s.channel_matrix()
    assert h.shape == (9, 9)
    r = owe.optimize_single_bss(h, entry=0, ap=8, restarts=2, max_iter=3000)
    assert r["snr"] > r["baseline_snr"]
    assert r["gains"][8] < 1e-2 * 2e5


def test_scenario_roundtrip_and_run():
    s = owe.Scenario.load(str(SCENARIOS / "coverage_line.yaml"))
    again = owe.Scenario.parse(s.emit())
    assert again.digest() == s.digest()
    report = s.run()
    assert report["exit_code"] == 0
    assert "coverage" in report["tables"]


def test_validation_error():
    with pytest.raises(owe.ValidationError, match="missing required fields"):
        owe.Scenario.parse("name: x\n")
