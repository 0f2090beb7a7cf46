import json

import numpy as np
import pytest

from fibersieve import io as fio
from fibersieve.cli import EXIT_CONFIG, EXIT_NUMERIC, EXIT_OK, main
from fibersieve.transport import Kymograph

# short, sparse simulations keep the CLI tests fast
QUICK_SIM = ["sim.duration_s=6", "sim.burn_in_s=4", "sim.injection_rate_per_s=0.3"]


def _run(tmp_path, name, *args):
    out = tmp_path / name
    return main([*args, "--out", str(out)]), out


def _sets(items):
    return [a for item in items for a in ("--set", item)]


def test_modes_default_has_both_wavelength_columns(tmp_path):
    rc, out = _run(tmp_path, "m", "modes")
    assert rc == EXIT_OK
    columns, data, comments = fio.read_csv(out / "surface_intensity.csv")
    assert columns == ["diameter_nm", "I_640_per_W", "I_785_per_W"]
    assert np.all(data[:, 1:] > 0)
    assert comments["truncated_below_cutoff"] == "no"
    assert float(comments["crossover_nm"]) == pytest.approx(722.72, abs=0.05)
    assert fio.verify_manifest(out)


def test_modes_below_cutoff_is_truncated_with_marker(tmp_path):
    rc, out = _run(tmp_path, "m", "modes", *_sets(["modes.d_min_nm=200", "modes.d_max_nm=400"]))
    assert rc == EXIT_OK
    _, data, comments = fio.read_csv(out / "surface_intensity.csv")
    assert comments["truncated_below_cutoff"] == "yes"
    assert float(comments["cutoff_785_nm"]) > float(comments["cutoff_640_nm"]) > 200.0
    assert np.all(np.isnan(data[data[:, 0] < float(comments["cutoff_640_nm"]), 1]))


def test_modes_identical_wavelengths_give_identical_columns(tmp_path):
    rc, out = _run(tmp_path, "m", "modes", *_sets(["beams.wavelength2_nm=640"]))
    assert rc == EXIT_OK
    columns, data, comments = fio.read_csv(out / "surface_intensity.csv")
    assert columns[1:] == ["I_640_per_W", "I_640_per_W_b"]
    np.testing.assert_array_equal(data[:, 1], data[:, 2])
    assert "crossover_nm" not in comments


def test_forces_table_ratio_column(tmp_path):
    rc, out = _run(tmp_path, "f", "forces")
    assert rc == EXIT_OK
    _, data, _ = fio.read_csv(out / "forces.csv")
    np.testing.assert_allclose(data[:, 3], data[:, 1] / data[:, 2], rtol=1e-12)


def _trap_report(tmp_path, name, *overrides):
    rc, out = _run(tmp_path, name, "trap", *_sets(overrides))
    assert rc == EXIT_OK
    return json.loads((out / "trap_report.json").read_text()), out


def test_trap_at_balance_reports_inflection(tmp_path):
    report, _ = _trap_report(tmp_path, "t", "beams.p1_balance_factor=1.0")
    assert report["status"] == "inflection"
    assert report["minima_z_positive_um"] == []
    assert report["inflection_intervals_um"]


def test_trap_above_balance_has_trap_and_anti_trap(tmp_path):
    report, out = _trap_report(tmp_path, "t", "beams.p1_balance_factor=1.18")
    assert report["status"] == "trap"
    kinds = {(c["kind"], np.sign(c["z_um"])) for c in report["crossings"]}
    assert kinds == {("trap", 1.0), ("anti-trap", -1.0)}
    columns, data, _ = fio.read_csv(out / "trap_profile.csv")
    assert columns == ["z_um", "d_nm", "F640_pN", "F785_pN", "dF_pN", "U_kBT"]
    np.testing.assert_allclose(data[:, 4], data[:, 2] - data[:, 3], atol=1e-12)


def test_trap_without_light_is_empty(tmp_path):
    report, _ = _trap_report(tmp_path, "t", "beams.p1_mW=0", "beams.p2_mW=0")
    assert report["status"] == "none"
    assert report["crossings"] == [] and report["z_trap_um"] is None


def test_simulate_then_analyze_trapped_file(tmp_path):
    rc, sim_out = _run(tmp_path, "s", "simulate", "--seed", "5",
                       *_sets(["beams.p1_mW=8", "sim.duration_s=10", "sim.burn_in_s=10"]))
    assert rc == EXIT_OK
    thetas = []
    for name in ("kymograph.csv", "kymograph.pgm"):
        rc, out = _run(tmp_path, f"a_{name}", "analyze", str(sim_out / name))
        assert rc == EXIT_OK
        thetas.append(json.loads((out / "analysis.json").read_text())["theta_deg"])
        inputs = json.loads((out / "manifest.json").read_text())["inputs"]
        assert inputs == {str(sim_out / name): fio.sha256(sim_out / name)}
    assert all(abs(t - 90.0) <= 2.0 for t in thetas)


def test_analyze_noise_only_file_gives_no_trajectories(tmp_path):
    rng = np.random.default_rng(0)
    path = tmp_path / "noise.csv"
    fio.write_kymograph_csv(path, Kymograph(np.clip(rng.normal(20.0, 2.0, (200, 300)), 0, None), 0.5, 0.05))
    rc, out = _run(tmp_path, "a", "analyze", str(path))
    assert rc == EXIT_OK
    assert json.loads((out / "trajectories.json").read_text()) == []


def test_analyze_malformed_csv_exits_with_config_code(tmp_path, capsys):
    path = tmp_path / "bad.csv"
    path.write_text("1,2\n3,x\n")
    rc, _ = _run(tmp_path, "a", "analyze", str(path))
    assert rc == EXIT_CONFIG
    assert "bad.csv:2" in capsys.readouterr().err


@pytest.mark.parametrize(
    "args",
    [
        ["trap", "--set", "nonsense.key=1"],
        ["trap", "--seed", "-1"],
        ["trap", "--seed", str(2**64)],
        ["sweep", "--set", "sweep.p1_mW=[]"],
        ["sweep", "--workers", "0"],
        ["analyze", "does-not-exist.csv"],
    ],
)
def test_config_errors_exit_two(tmp_path, args):
    assert main([*args, "--out", str(tmp_path / "o")]) == EXIT_CONFIG


def test_numerical_failure_exits_three(tmp_path):
    rc, _ = _run(tmp_path, "t", "trap", "--set", "fiber.waist_diameter_nm=200")
    assert rc == EXIT_NUMERIC


def test_usage_error_exits_two():
    with pytest.raises(SystemExit) as info:
        main(["no-such-command"])
    assert info.value.code == 2


def test_sweep_is_identical_for_any_worker_count(tmp_path):
    args = ["sweep", "--seed", "11", *_sets([*QUICK_SIM, "sweep.p1_mW=[0, 8]"])]
    _, serial = _run(tmp_path, "w1", *args, "--workers", "1")
    _, parallel = _run(tmp_path, "w2", *args, "--workers", "2")
    files = [json.loads((d / "manifest.json").read_text())["files"] for d in (serial, parallel)]
    assert files[0] == files[1]
    assert {"sweep_summary.csv", "point_00_p1_0mW/kymograph.pgm", "point_01_p1_8mW/lines.csv"} <= set(files[0])
    _, data, comments = fio.read_csv(serial / "sweep_summary.csv")
    assert comments["scenario"] == "150-only"
    np.testing.assert_array_equal(data[:, 0], [0.0, 8.0])


def test_identical_manifest_reproduces_digests(tmp_path):
    args = ["simulate", "--seed", "3", *_sets(QUICK_SIM)]
    _, first = _run(tmp_path, "r1", *args)
    _, second = _run(tmp_path, "r2", *args)
    a, b = (json.loads((d / "manifest.json").read_text()) for d in (first, second))
    assert a == b
    _, third = _run(tmp_path, "r3", "simulate", "--seed", "4", *_sets(QUICK_SIM))
    c = json.loads((third / "manifest.json").read_text())
    assert c["files"]["kymograph.csv"] != a["files"]["kymograph.csv"]


def test_config_file_and_plot_flag(tmp_path):
    cfg = tmp_path / "run.yaml"
    cfg.write_text("particle:\n  diameter_nm: 150\nbeams:\n  p1_mW: 8.0\n")
    rc, out = _run(tmp_path, "p", "trap", "--config", str(cfg), "--plot")
    assert rc == EXIT_OK
    assert (out / "trap.png").read_bytes().startswith(b"\x89PNG")
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["config"]["particle.diameter_nm"] == 150.0
    assert "trap.png" in manifest["files"]
