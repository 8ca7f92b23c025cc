import csv
import io
import json
import logging
import math

import numpy as np
import pytest

from cavbell import protocol as pr
from cavbell import sweep as sw


def test_spec_validation():
    with pytest.raises(ValueError):
        sw.SweepSpec("x", 0, 1, 1)
    with pytest.raises(ValueError):
        sw.SweepSpec("x", 1, 0, 5)
    with pytest.raises(ValueError):
        sw.SweepSpec("tau", 0, 1, 5)
    with pytest.raises(ValueError):
        sw.SweepSpec("x", 0, math.inf, 5)


def test_fidelity_sweep():
    rows = sw.sweep_fidelity(sw.SweepSpec("x", 0, 1, 101))
    assert len(rows) == 101 and list(rows[0]) == ["x", "fidelity"]
    assert rows[0]["fidelity"] == 1.0
    assert rows[50]["fidelity"] == pytest.approx(0.995767, abs=1e-6)
    assert rows[100]["fidelity"] == pytest.approx(0.918214, abs=1e-6)
    f = [r["fidelity"] for r in sw.sweep_fidelity(sw.SweepSpec("x", 0, math.pi / 2, 200))]
    assert all(a >= b for a, b in zip(f, f[1:]))


def test_success_sweep():
    rows = sw.sweep_success(sw.SweepSpec("x", 0, 1, 101))
    assert rows[0]["success_prob"] == 0.0
    assert rows[50]["success_prob"] == pytest.approx(0.40687, abs=1e-5)
    assert rows[90]["success_prob"] == pytest.approx(0.850696, abs=1e-6)
    p = [r["success_prob"] for r in sw.sweep_success(sw.SweepSpec("x", 0, math.pi / 2, 200))]
    assert all(a < b for a, b in zip(p, p[1:]))
    with_d = sw.sweep_success(sw.SweepSpec("x", 0, 1, 11, {"D": 0.4}))
    assert with_d[0]["detection_prob"] == 0.0
    assert with_d[5]["detection_prob"] == pytest.approx(pr.detection_all_works_probability(0.4, 0.5))


def test_epsilon_sweep():
    rows = sw.sweep_epsilon(sw.SweepSpec("epsilon", -0.5, 0.5, 101, {"x": 0.5}))
    mid = rows[50]
    assert mid["epsilon"] == pytest.approx(0, abs=1e-15)
    assert mid["fidelity"] == pytest.approx(0.995767, abs=1e-6)
    best = max(rows, key=lambda r: r["fidelity"])
    assert best["epsilon"] < 0
    assert sw.epsilon_argmax(0.5) < 0
    at08 = sw.sweep_epsilon(sw.SweepSpec("epsilon", 0, 0.2, 3, {"x": 0.8}))
    assert at08[-1]["fidelity"] == pytest.approx(0.934, abs=1e-4)


def test_log_epsilon_sweep(caplog):
    rows = sw.sweep_epsilon(sw.SweepSpec("log_one_minus_epsilon", -2, 1, 31, {"x": 0.5}))
    for r in rows:
        assert math.log1p(-r["epsilon"]) == pytest.approx(r["log_one_minus_epsilon"], abs=1e-12)
    with caplog.at_level(logging.WARNING):
        kept = sw.sweep_epsilon(sw.SweepSpec("epsilon", 0, 1.5, 16, {"x": 0.5, "log_abscissa": True}))
    assert all(r["epsilon"] < 1 for r in kept) and len(kept) == 10
    assert "dropped" in caplog.text


def test_photon_sweep():
    rows = sw.sweep_photons(sw.SweepSpec("n_photons", 0, 4, 5, {"x": 0.5, "cutoff": 6}))
    assert [r["n_photons"] for r in rows] == [0, 1, 2, 3, 4]
    f = [r["fidelity"] for r in rows[1:]]
    assert all(a > b for a, b in zip(f, f[1:]))
    assert rows[0]["null_run_overlap"] == pytest.approx(1, abs=1e-12)
    assert all(r["null_run_overlap"] < 1 for r in rows[1:])


def dense_window(f_floor, p_floor, step=1e-4):
    xs = np.arange(0, math.pi / 2 + step, step)
    ok = [x for x in xs if pr.ideal_fidelity(x) >= f_floor and pr.success_probability(x) >= p_floor]
    return (ok[0], ok[-1]) if ok else None


@pytest.mark.parametrize("floors", [(0.95, 0.5), (0.999, 0.0), (0.99, 0.2), (0.9, 0.7)])
def test_window_matches_dense_scan(floors):
    w = sw.sweep_operating_window(*floors)
    d = dense_window(*floors)
    assert abs(w[0] - d[0]) < 2e-4 and abs(w[1] - d[1]) < 2e-4


def test_window_values():
    lo, hi = sw.sweep_operating_window(0.95, 0.5)
    assert lo == pytest.approx(0.57186, abs=1e-5) and hi == pytest.approx(0.89337, abs=1e-5)
    lo, hi = sw.sweep_operating_window(0.999, 0.0)
    assert lo == 0.0 and hi == pytest.approx(0.35, abs=0.01)


def test_window_empty():
    assert sw.sweep_operating_window(0.5, 1.0 + 1e-9) is None
    assert sw.sweep_operating_window(0.999, 0.5) is None


def test_montecarlo_sweep():
    spec = sw.SweepSpec("D", 0.4, 1.0, 2, {"x": 0.5})
    rows = sw.sweep_montecarlo(spec, 20_000, seed=3)
    assert rows[-1]["mean_runs"] == pytest.approx(2.458, abs=3 * rows[-1]["mean_runs_se"] + 1e-9)
    assert rows[0]["mean_elapsed"] < 1.0
    assert rows[0]["failure_free_fraction"] == pytest.approx(rows[0]["failure_free_exact"], abs=3 * rows[0]["failure_free_se"])
    assert rows == sw.sweep_montecarlo(spec, 20_000, seed=3, workers=2)
    with pytest.raises(ValueError):
        sw.sweep_montecarlo(spec, 0, seed=3)


def test_paris_preset():
    p = sw.preset_paris()
    assert p.detector_eff == 0.40
    assert p.tau_central == pytest.approx(21.2e-6, abs=0.1e-6)
    assert p.pulse_area == pytest.approx(3.13, abs=0.02)
    assert p.to_dict()["lifetime_over_traversal"] == pytest.approx(47.25, abs=0.1)
    scaled = sw.preset_paris(4.0)
    assert scaled.pulse_area == pytest.approx(p.pulse_area / 8)
    with pytest.raises(ValueError):
        sw.preset_paris(0)
    with pytest.raises(Exception):
        p.g0 = 1.0


def test_csv_format():
    rows = sw.sweep_fidelity(sw.SweepSpec("x", 0, 1, 3))
    text = sw.to_csv(rows)
    assert "\r" not in text and text.endswith("\n")
    parsed = list(csv.DictReader(io.StringIO(text)))
    assert [float(r["fidelity"]) for r in parsed] == [r["fidelity"] for r in rows]
    assert text.splitlines()[0] == "x,fidelity"


def test_json_format():
    rows = sw.sweep_success(sw.SweepSpec("x", 0, 1, 5))
    assert json.loads(sw.to_json(rows)) == rows


def test_analytic_sweeps_repeatable():
    spec = sw.SweepSpec("x", 0, 1, 57)
    assert sw.to_csv(sw.sweep_fidelity(spec)) == sw.to_csv(sw.sweep_fidelity(spec))
