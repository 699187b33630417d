import csv
import json
import subprocess
import sys

import pytest

from surfphase.cli import ConfigError, export_plotdata, main, parse_config

POTENTIAL = {"kind": "PrototypeP", "a": [1.0, 0.0], "p": 2, "d": 2, "N": 2}
RECOVERY = {
    "epsilons": [0.0074, 0.0037, 0.00185],
    "n_cell": 128,
    "delta": 0.4,
    "tilde_delta": 1.0,
    "laminate": {"a": [1.0, 0.0], "heights": [0.0]},
    "measure": {"patches": [{"interface": 0, "lo": [-0.5], "hi": [0.5], "density": 1.0}]},
}


def write(tmp_path, name, obj):
    path = tmp_path / name
    path.write_text(json.dumps(obj))
    return path


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


@pytest.fixture(scope="module")
def sweep_runs(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("sweep")
    cfg = write(tmp, "sweep.json", {"task": "sweep", "potential": POTENTIAL,
                                    "gammas": [0.0, 0.5, 1.0, 1.5, 2.5], "n": 128, "seed": 0})
    codes = [main(["run", str(cfg), "--out", str(tmp / f"o{k}")]) for k in (1, 2)]
    return tmp, codes


def test_sweep_writes_curve_and_manifest(sweep_runs):
    tmp, codes = sweep_runs
    assert codes == [0, 0]
    rows = read_rows(tmp / "o1" / "phi_curve.csv")
    assert len(rows) == 5
    assert list(rows[0]) == ["gamma", "phi", "lambda", "L", "iterations", "grad_norm"]
    manifest = json.loads((tmp / "o1" / "manifest.json").read_text())
    assert manifest["config"]["potential"] == POTENTIAL
    assert manifest["config"]["gammas"] == [0.0, 0.5, 1.0, 1.5, 2.5]
    assert "solver" in manifest["config"] and manifest["version"]
    assert set(manifest["outputs"]) == {"phi_curve.csv", "phi_curve.json"}
    assert manifest["flags"] == []


def test_sweep_is_deterministic(sweep_runs):
    tmp, _ = sweep_runs
    for name in ("phi_curve.csv", "phi_curve.json"):
        assert (tmp / "o1" / name).read_bytes() == (tmp / "o2" / name).read_bytes()


def test_outputs_are_finite(sweep_runs):
    tmp, _ = sweep_runs
    for row in read_rows(tmp / "o1" / "phi_curve.csv"):
        for v in row.values():
            assert v.lower() not in ("nan", "inf", "-inf")


def test_recovery_table_one_row_per_eps(tmp_path):
    cfg = write(tmp_path, "rec.json", {"task": "recovery", "potential": POTENTIAL, "recovery": RECOVERY})
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "out"), "--strict"]) == 0
    rows = read_rows(tmp_path / "out" / "recovery_table.csv")
    assert len(rows) == 3
    assert all(0.9 <= float(r["ratio"]) <= 1.05 for r in rows)
    report = json.loads((tmp_path / "out" / "recovery_report.json").read_text())
    assert 0.4 <= report["report"]["mass_slope"] <= 0.6


def test_liminf_probe_task(tmp_path):
    cfg = write(tmp_path, "lim.json", {"task": "liminf-probe", "potential": POTENTIAL, "recovery": RECOVERY,
                                       "liminf": {"trials": 10}})
    assert main(["run", str(cfg), "--out", str(tmp_path / "out")]) == 0
    assert len(read_rows(tmp_path / "out" / "liminf_trials.csv")) == 10
    assert json.loads((tmp_path / "out" / "liminf_report.json").read_text())["report"]["passed"]


def test_check_potential_task(tmp_path):
    cfg = write(tmp_path, "pot.json", {"task": "check-potential", "potential": POTENTIAL, "samples": 100})
    assert main(["run", str(cfg), "--out", str(tmp_path / "out"), "--strict"]) == 0
    rows = read_rows(tmp_path / "out" / "assumptions.csv")
    assert {r["hypothesis"] for r in rows} >= {"H1", "H2", "H4", "H5", "H1d"}


def test_phi_1d_task(tmp_path):
    cfg = write(tmp_path, "phi.json", {"task": "phi-1d", "potential": POTENTIAL, "gamma": 0.0, "n": 128})
    assert main(["run", str(cfg), "--out", str(tmp_path / "out")]) == 0
    rows = read_rows(tmp_path / "out" / "phi.csv")
    assert len(rows) == 1 and float(rows[0]["phi"]) == pytest.approx(2 * 2**0.5, rel=1e-6)
    assert (tmp_path / "out" / "profile.csv").exists()


def test_missing_potential_field_exits_1(tmp_path, capsys):
    pot = {k: v for k, v in POTENTIAL.items() if k != "N"}
    cfg = write(tmp_path, "bad.json", {"task": "sweep", "potential": pot, "gammas": [0.0]})
    assert main(["run", str(cfg), "--out", str(tmp_path / "out")]) == 1
    assert "N" in capsys.readouterr().err


def test_malformed_json_reports_position(tmp_path, capsys):
    path = tmp_path / "broken.json"
    path.write_text('{"task": "sweep",\n "potential": }')
    assert main(["run", str(path)]) == 1
    assert "line 2" in capsys.readouterr().err


@pytest.mark.parametrize(
    "raw,needle",
    [
        ({"task": "sweep", "potential": POTENTIAL, "gammas": [0.0], "colour": 1}, "colour"),
        ({"task": "fly", "potential": POTENTIAL}, "task"),
        ({"task": "sweep", "potential": POTENTIAL}, "gammas"),
        ({"task": "sweep", "potential": POTENTIAL, "gammas": [0.5, 0.1]}, "increasing"),
        ({"task": "phi-1d", "potential": POTENTIAL, "gamma": -1}, "gamma"),
        ({"task": "phi-2d", "potential": POTENTIAL, "gamma": 0.5, "grid": {"n_prime": 8}}, "grid.n_last"),
        ({"task": "recovery", "potential": POTENTIAL, "recovery": {"epsilons": [0.01]}}, "recovery.laminate"),
        ({"task": "sweep", "potential": POTENTIAL, "gammas": [0.0], "solver": {"tol": 1}}, "tol"),
    ],
)
def test_config_errors_name_the_field(raw, needle):
    with pytest.raises(ConfigError, match=needle):
        parse_config(raw)


def test_seed_override():
    cfg = parse_config({"task": "sweep", "potential": POTENTIAL, "gammas": [0.0], "seed": 3}, seed=9)
    assert cfg.seed == 9 and cfg.solver.seed == 9


def test_export_phi_sorted(tmp_path):
    src = tmp_path / "c.csv"
    src.write_text("gamma,phi,lambda\n1.0,2.1,-1\n0.0,2.8,-3\n0.5,2.4,-2\n")
    assert export_plotdata(src, "phi", tmp_path / "p.csv") == 0
    assert (tmp_path / "p.csv").read_text() == "gamma,phi\n0.0,2.8\n0.5,2.4\n1.0,2.1\n"


def test_export_recovery_columns(tmp_path):
    src = tmp_path / "r.csv"
    src.write_text("epsilon,energy,target,ratio\n0.002,2.0,2.0,1.0\n0.001,2.1,2.0,1.05\n")
    assert export_plotdata(src, "recovery", tmp_path / "p.csv") == 0
    assert (tmp_path / "p.csv").read_text().splitlines()[0] == "epsilon,energy,target"
    assert (tmp_path / "p.csv").read_text().splitlines()[1].startswith("0.001")


def test_export_empty_artifact(tmp_path):
    src = tmp_path / "e.csv"
    src.write_text("")
    assert export_plotdata(src, "phi", tmp_path / "p.csv") == 0
    assert (tmp_path / "p.csv").read_text() == "gamma,phi\n"


def test_export_unknown_kind(tmp_path):
    src = tmp_path / "e.csv"
    src.write_text("gamma,phi\n")
    assert main(["export-plotdata", str(src), "--kind", "histogram"]) == 1


def test_export_missing_column(tmp_path):
    src = tmp_path / "e.csv"
    src.write_text("gamma,value\n0.1,2\n")
    assert export_plotdata(src, "phi") == 1


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "surfphase", "--help"], capture_output=True, text=True)
    assert res.returncode == 0 and "run" in res.stdout
