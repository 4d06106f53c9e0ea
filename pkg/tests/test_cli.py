import csv
import json
import math
import time

import numpy as np
import pytest

from curved_larmor.cli import main
from curved_larmor.config import ConfigError, SweepAxis, build, load_raw, parse_lines
from curved_larmor.output import CSV_COLUMNS, read_csv, stable_view

HEADER = "t,r,phi,z,vr,vphi,vz,epsilon,I,A,C,u0,u1,u2,u3"
R0_HALF = "0.881373587019543"


def run(tmp_path, command, *sets, name="run", config=None, extra=()):
    out = tmp_path / name
    argv = [command, "--out", str(out)]
    if config is not None:
        argv += ["--config", str(config)]
    for s in sets:
        argv += ["--set", s]
    argv += list(extra)
    return main(argv), out


def manifest(out):
    return json.loads((out / "manifest.json").read_text())


def sweep_table(out):
    with open(out / "sweep.csv", newline="") as fh:
        return list(csv.DictReader(fh))


class TestConfig:
    def test_parse_lines(self):
        raw = parse_lines(["# comment", "", "chart.rho = 2  # trailing", "initial.vr=0.3"])
        assert raw == {"chart.rho": "2", "initial.vr": "0.3"}

    def test_overrides_apply_after_file(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("chart.rho = 2\nintegration.T = 5\n")
        raw = load_raw(str(path), ["chart.rho=3"])
        assert raw["chart.rho"] == "3" and raw["integration.T"] == "5"

    @pytest.mark.parametrize("raw,key", [
        ({"chart.rhoo": "1"}, "chart.rhoo"),
        ({"chart.rho": "abc"}, "chart.rho"),
        ({"chart.rho": "-1"}, "chart"),
        ({"integration.h": "0"}, "integration.h"),
        ({"output.stride": "1.5"}, "output.stride"),
        ({"initial.vz": "1.2"}, "initial"),
        ({"initial.mode": "constants"}, "constants.epsilon"),
        ({"initial.mode": "magic"}, "initial.mode"),
    ])
    def test_errors_name_the_key(self, raw, key):
        with pytest.raises(ConfigError) as info:
            build(load_raw(None, [f"{k}={v}" for k, v in raw.items()]))
        assert info.value.key == key

    def test_sweep_axis_exact_endpoints(self):
        axis = SweepAxis.parse("sweep.constants.A", "0.5:1.5:11")
        assert axis.values[0] == 0.5 and axis.values[-1] == 1.5 and len(axis.values) == 11
        assert axis.values[5] == 1.0
        with pytest.raises(ConfigError):
            SweepAxis.parse("sweep.initial.mode", "0:1:2")
        with pytest.raises(ConfigError):
            SweepAxis.parse("sweep.chart.rho", "1:2")

    def test_field_omega_sets_field(self):
        cfg = build(load_raw(None, ["field.omega=0.8", "initial.vz=0.5"]))
        from curved_larmor import cyclotron_omega, squared_speed

        eps = squared_speed(cfg.chart, cfg.initial)
        assert cyclotron_omega(cfg.particle, cfg.field, cfg.chart, eps) == pytest.approx(0.8, rel=1e-14)


class TestSimulate:
    def test_uniform_axial_motion(self, tmp_path):
        code, out = run(tmp_path, "simulate", "initial.vr=0", "initial.vphi=0", "initial.vz=0.5",
                        "initial.z=0", "integration.T=4")
        assert code == 0
        text = (out / "trajectory.csv").read_text()
        assert text.splitlines()[0] == HEADER
        table = read_csv(out / "trajectory.csv")
        np.testing.assert_allclose(table["z"], 0.5 * table["t"], rtol=0, atol=1e-12)
        m = manifest(out)
        assert m["classification"]["z_regime"] == "Crossing"
        assert m["classification"]["orbit_class"] == "BoundedCircle"
        assert m["status"] == "ok" and m["halted"] is False

    def test_defaults_and_stride(self, tmp_path):
        code, out = run(tmp_path, "simulate")
        assert code == 0
        m = manifest(out)
        assert m["samples"] == 20001 and m["rows"] == 2001
        assert m["config"]["integration.h"] == 1e-3 and m["config"]["output.stride"] == 10
        table = read_csv(out / "trajectory.csv")
        assert list(table) == list(CSV_COLUMNS)
        assert table["t"][-1] == 20.0

    def test_cylinder(self, tmp_path):
        code, out = run(tmp_path, "simulate", "initial.mode=onaxis", f"onaxis.r0={R0_HALF}",
                        "field.omega=1", "constants.epsilon=0.9", "initial.z=-0.3")
        assert code == 0
        check = manifest(out)["checks"]["onaxis"]
        assert check["r0"] == pytest.approx(float(R0_HALF), rel=1e-12)
        assert check["max_abs_r_minus_r0"] <= 1e-8

    def test_forbidden_region(self, tmp_path):
        code, out = run(tmp_path, "simulate", "initial.z=0.3", "initial.vr=0.2", "initial.vphi=0.3",
                        "initial.vz=-0.05", "field.omega=1")
        assert code == 0
        m = manifest(out)
        assert m["classification"]["z_regime"] == "Reflected"
        fr = m["checks"]["forbidden_region"]
        assert fr["holds"] and fr["min_abs_sinh_z"] >= fr["bound"] - 1e-8

    def test_embedding_rows(self, tmp_path):
        code, out = run(tmp_path, "simulate", "chart.rho=1.7")
        table = read_csv(out / "trajectory.csv")
        quad = table["u0"] ** 2 - table["u1"] ** 2 - table["u2"] ** 2 - table["u3"] ** 2
        assert np.max(np.abs(quad - 1.7 ** 2)) / 1.7 ** 2 <= 1e-10
        assert manifest(out)["checks"]["embedding_max_rel_residual"] <= 1e-10

    def test_halt_keeps_partial_output(self, tmp_path, capsys):
        code, out = run(tmp_path, "simulate", "chart.kappa=1", "initial.z=1.4", "initial.vz=0.5",
                        "initial.vr=0", "initial.vphi=0", "integration.T=2")
        assert code == 2
        m = manifest(out)
        assert m["halted"] is True and m["status"] == "domain exit"
        table = read_csv(out / "trajectory.csv")
        assert 1 < len(table["t"]) < 201
        assert "halted" in capsys.readouterr().err

    def test_json_format(self, tmp_path):
        code, out = run(tmp_path, "simulate", "integration.T=1", extra=["--format", "json"])
        assert code == 0
        records = json.loads((out / "trajectory.json").read_text())
        assert list(records[0]) == list(CSV_COLUMNS) and len(records) == 101
        assert manifest(out)["outputs"]["trajectory"] == "trajectory.json"

    def test_bad_key_exit_code(self, tmp_path, capsys):
        code, _ = run(tmp_path, "simulate", "initial.speed=3")
        assert code == 1
        assert "initial.speed" in capsys.readouterr().err

    def test_unreadable_config(self, tmp_path, capsys):
        code, _ = run(tmp_path, "simulate", config=tmp_path / "missing.cfg")
        assert code == 1
        assert "--config" in capsys.readouterr().err

    def test_config_file(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("# cylinder run\nintegration.T = 2\noutput.stride = 100\n")
        code, out = run(tmp_path, "simulate", config=path)
        assert code == 0 and manifest(out)["rows"] == 21

    def test_usage_error(self):
        with pytest.raises(SystemExit) as info:
            main(["simulate", "--jobs", "many"])
        assert info.value.code == 1


class TestDeterminism:
    def test_byte_identical_outputs(self, tmp_path):
        sets = ("integration.T=5", "output.stride=3")
        _, a = run(tmp_path, "simulate", *sets, name="a")
        _, b = run(tmp_path, "simulate", *sets, name="b")
        assert (a / "trajectory.csv").read_bytes() == (b / "trajectory.csv").read_bytes()
        ma, mb = manifest(a), manifest(b)
        assert stable_view(ma) == stable_view(mb)
        assert set(ma) - set(stable_view(ma)) == {"volatile"}

    def test_verify_round_trip(self, tmp_path, capsys):
        _, out = run(tmp_path, "simulate", "integration.T=5")
        capsys.readouterr()
        assert main(["verify", "--out", str(out)]) == 0
        gaps = json.loads(capsys.readouterr().out)
        assert gaps["invariant_column_gap"] <= 1e-12 and gaps["drift_gap"] <= 1e-12

    def test_verify_detects_tampering(self, tmp_path):
        _, out = run(tmp_path, "simulate", "integration.T=2")
        path = out / "trajectory.csv"
        lines = path.read_text().splitlines()
        cells = lines[5].split(",")
        cells[CSV_COLUMNS.index("A")] = repr(float(cells[CSV_COLUMNS.index("A")]) * 1.001)
        lines[5] = ",".join(cells)
        path.write_text("\n".join(lines) + "\n")
        assert main(["verify", "--out", str(out)]) == 3

    def test_verify_missing_directory(self, tmp_path):
        assert main(["verify", "--out", str(tmp_path / "nothing")]) == 1


class TestCompare:
    def test_uniform_axial_motion(self, tmp_path):
        code, out = run(tmp_path, "compare", "initial.vr=0", "initial.vphi=0", "initial.vz=0.5",
                        "initial.z=0", "integration.T=4")
        assert code == 0
        report = json.loads((out / "compare.json").read_text())
        assert report["deviations"]["z"] <= 1e-12

    def test_cylinder_with_phi(self, tmp_path):
        code, out = run(tmp_path, "compare", "initial.mode=onaxis", f"onaxis.r0={R0_HALF}",
                        "field.omega=1", "constants.epsilon=0.9", "initial.z=-0.4", "compare.phi=true")
        assert code == 0
        dev = json.loads((out / "compare.json").read_text())["deviations"]
        assert set(dev) == {"z", "vz", "r", "phi", "vphi"}
        assert max(dev.values()) <= 1e-6

    def test_generic_orbit(self, tmp_path):
        code, out = run(tmp_path, "compare", "field.omega=1")
        assert code == 0
        dev = json.loads((out / "compare.json").read_text())["deviations"]
        assert dev["orbit"] <= 1e-7 and dev["z"] <= 1e-6

    def test_phi_requires_cylinder(self, tmp_path, capsys):
        code, _ = run(tmp_path, "compare", "compare.phi=1")
        assert code == 1
        assert "C = 0" in capsys.readouterr().err

    def test_tolerance_failure(self, tmp_path):
        code, _ = run(tmp_path, "compare", "integration.h=0.1", "compare.tol_z=1e-15")
        assert code == 3

    def test_spherical_rejected(self, tmp_path):
        code, _ = run(tmp_path, "compare", "chart.kappa=1")
        assert code == 1


class TestSweep:
    BASE = ("initial.mode=constants", "field.omega=1", "constants.epsilon=0.9", "constants.I=0.2",
            "constants.A=0.5", "initial.r=0.8", "initial.z=1.0", "integration.T=2")

    def test_orbit_class_flips_at_boundary(self, tmp_path):
        code, out = run(tmp_path, "sweep", *self.BASE, "sweep.constants.A=0.5:1.5:5")
        assert code == 0
        rows = sweep_table(out)
        assert [r["orbit_class"] for r in rows] == [
            "BoundedCircle", "BoundedCircle", "MarginalHorocyclic", "Unbounded", "Unbounded"]
        assert rows[0]["r0"] and not rows[3]["r0"]
        assert all(r["status"] == "ok" for r in rows)

    def test_z_regime_flips_at_boundary(self, tmp_path):
        code, out = run(tmp_path, "sweep", *self.BASE, "sweep.constants.epsilon=0.3:0.7:5")
        assert code == 0
        regimes = [r["z_regime"] for r in sweep_table(out)]
        assert regimes == ["Reflected", "Reflected", "Marginal", "Crossing", "Crossing"]

    def test_failures_recorded_in_row(self, tmp_path):
        code, out = run(tmp_path, "sweep", *self.BASE, "initial.z=0", "sweep.constants.A=0.5:1.5:3")
        assert code == 0
        status = [r["status"] for r in sweep_table(out)]
        assert status[0] == "ok" and all(s.startswith("failed") for s in status[1:])

    def test_two_axes_parallel_matches_serial(self, tmp_path):
        sets = (*self.BASE, "sweep.constants.A=0.4:0.8:3", "sweep.constants.I=0.1:0.3:2")
        _, serial = run(tmp_path, "sweep", *sets, name="serial")
        _, par = run(tmp_path, "sweep", *sets, name="par", extra=["--jobs", "2"])
        assert (serial / "sweep.csv").read_bytes() == (par / "sweep.csv").read_bytes()
        rows = sweep_table(serial)
        assert [(r["constants.A"], r["constants.I"]) for r in rows][:2] == [("0.40000000000000002", "0.10000000000000001"),
                                                                            ("0.40000000000000002", "0.29999999999999999")]

    def test_requires_axis(self, tmp_path):
        code, _ = run(tmp_path, "sweep", *self.BASE)
        assert code == 1

    def test_grid_runtime(self, tmp_path):
        start = time.perf_counter()
        code, out = run(tmp_path, "sweep", "sweep.initial.vr=0.05:0.3:10", "sweep.initial.vz=0.0:0.5:10")
        elapsed = time.perf_counter() - start
        assert code == 0 and len(sweep_table(out)) == 100
        assert elapsed < 60.0


class TestClassifyAndMaxwell:
    def test_classify(self, tmp_path, capsys):
        code, _ = run(tmp_path, "classify", "initial.mode=constants", "field.omega=1",
                      "constants.epsilon=0.6", "constants.A=0.5", "constants.I=0", "initial.r=0.9",
                      "initial.z=0")
        assert code == 0
        summary = json.loads(capsys.readouterr().out)
        assert summary["orbit_class"] == "BoundedCircle" and summary["z_regime"] == "Crossing"
        assert summary["circle"]["R"] == pytest.approx(summary["circle"]["r0"], rel=1e-12)
        assert summary["turning_points"][0] == pytest.approx(0.0, abs=1e-7)
        assert summary["turning_points"][1] == pytest.approx(math.acosh(3.0), rel=1e-12)

    def test_classify_spherical(self, tmp_path, capsys):
        code, _ = run(tmp_path, "classify", "chart.kappa=1")
        assert code == 0
        assert "H3 only" in json.loads(capsys.readouterr().out)["note"]

    def test_maxwell_pass(self, tmp_path):
        assert run(tmp_path, "maxwell-check")[0] == 0

    def test_maxwell_perturbed(self, tmp_path, capsys):
        code, _ = run(tmp_path, "maxwell-check", "maxwell.perturb=0.01")
        assert code == 3
        residual = float(capsys.readouterr().out.split()[2])
        assert residual > 1e-4

    def test_maxwell_bad_grid(self, tmp_path):
        assert run(tmp_path, "maxwell-check", "maxwell.r_min=0")[0] == 1
