import dataclasses
import json

import numpy as np
import pytest

from bearing_slam.cli import main
from bearing_slam.errors import ScenarioError
from bearing_slam.harness import compare, empty_record, export, read_csv, run, summary
from bearing_slam.scenario import Scenario, scenario_ie, scenario_pe


def short(sc, horizon=0.5):
    return dataclasses.replace(sc, horizon=horizon)


def test_run_is_deterministic():
    a = run(short(scenario_ie(noise=True, seed=3)))
    b = run(short(scenario_ie(noise=True, seed=3)))
    for f in ("l_hat", "cQ_hat", "x_hat", "kf_mean", "y"):
        assert np.array_equal(getattr(a, f), getattr(b, f))
    c = run(short(scenario_ie(noise=True, seed=4)))
    assert not np.array_equal(a.y, c.y)


def test_tick_order_matters():
    sc = short(scenario_pe())
    a, b = run(sc), run(sc, order="loc-first")
    # mapping never reads the localization state, the pose update does read l_hat_v
    assert np.array_equal(a.l_hat_v, b.l_hat_v)
    assert not np.array_equal(a.x_hat, b.x_hat)
    with pytest.raises(ValueError):
        run(sc, order="sideways")


def test_empty_record_export(tmp_path):
    rec = empty_record(scenario_pe())
    paths = export(rec, tmp_path)
    s = json.loads((tmp_path / "summary.json").read_text())
    assert s["n_samples"] == 0 and "final" not in s
    for p in paths[:-1]:
        names, data = read_csv(p)
        assert names[0] == "t" and data.shape == (0, len(names))


def test_csv_round_trip(tmp_path):
    rec = run(short(scenario_pe(), 0.2))
    export(rec, tmp_path)
    files = sorted(p.name for p in tmp_path.glob("*.csv"))
    assert files
    for f in files:
        names, data = read_csv(tmp_path / f)
        assert np.array_equal(data[:, 0], rec.t)
        assert len(set(names)) == len(names)
    s = json.loads((tmp_path / "summary.json").read_text())
    assert s["final"]["x_err"] == pytest.approx(float(rec.x_err[-1]), rel=0, abs=0)


def test_summary_reports_rate_bound(pe_run):
    s = summary(pe_run)
    assert len(s["rate_bound"]) == 6
    for rb in s["rate_bound"]:
        assert {"gamma_star", "bound_holds"} <= set(rb)
    assert all(c["PE"]["kind"] == "PE" for c in s["certificates"])


def test_compare_keys(pe_run):
    c = compare(pe_run.scenario, record=pe_run)
    assert {"t_split", "pebo_final", "baseline_final", "pebo_better_final"} <= set(c)
    assert c["t_split"] == pe_run.scenario.horizon / 2


def test_scenario_json_round_trip(tmp_path):
    sc = scenario_ie(noise=True, seed=7)
    p = tmp_path / "sc.json"
    sc.save(p)
    back = Scenario.load(p)
    assert back.to_dict() == sc.to_dict()
    d = sc.to_dict()
    d["dt"] = -1.0
    with pytest.raises(ScenarioError):
        Scenario.from_dict(d).validate()


def test_errors_carry_time_context():
    sc = short(scenario_pe(), 0.1)
    # a landmark on the camera centre has no bearing
    pos = sc.landmarks.positions.copy()
    pos[1] = sc.profile.initial_pose.translation
    sc = dataclasses.replace(sc, landmarks=dataclasses.replace(sc.landmarks, positions=pos))
    with pytest.raises(Exception) as e:
        run(sc)
    assert "t=0.000000" in str(e.value)


def test_cli_run_and_certify(tmp_path, capsys):
    assert main(["run", "--scenario", "pe", "--horizon", "0.3", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "summary.json").exists()
    assert main(["certify", "--scenario", "ie", "--horizon", "0.3"]) == 0
    out = capsys.readouterr().out
    assert "IE" in out
    assert main(["compare", "--scenario", "ie", "--horizon", "0.3", "--noise", "on"]) == 0
    assert main(["run", "--scenario", str(tmp_path / "missing.json")]) == 2
