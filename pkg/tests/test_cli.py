import json
import shutil

import pytest

from src.config import Config
from src.core import anisotropy
from src.main import assemble_run, build_parser, main, prepare_run


@pytest.fixture
def case_copy(cases_dir, tmp_path):
    """Bundled case files copied next to each other in a scratch directory"""
    for name in ("kawakami2014.json", "ud_t2.json"):
        shutil.copy(cases_dir / name, tmp_path / name)
    return tmp_path


def test_validate_device_config(cases_dir, capsys):
    assert main(["validate-config", str(cases_dir / "kawakami2014.json")]) == 0
    assert "valid device config" in capsys.readouterr().out


def test_validate_run_config(cases_dir):
    assert main(["validate-config", str(cases_dir / "ud_t2.json")]) == 0


def test_validate_reports_unknown_key(tmp_path, capsys):
    path = tmp_path / "device.json"
    path.write_text(json.dumps({"d_nm": 137, "colour": "gold"}))
    assert main(["validate-config", str(path)]) == 1
    out = capsys.readouterr().out
    assert "colour" in out
    assert "l_nm" in out


def test_calibrate_writes_report(case_copy, capsys):
    out = case_copy / "out"
    code = main(["calibrate", "--config", str(case_copy / "ud_t2.json"), "--out", str(out)])
    assert code == 0
    report = json.loads((out / "calibration.json").read_text())
    (record,) = report["records"]
    assert record["parameter"] == "rho_v_per_cm3"
    assert record["fitted_value"] == pytest.approx(2.504e13, rel=0.01)
    assert report["reference_t2_check_s"] == pytest.approx(840e-9, rel=1e-6)
    assert "rho_v_per_cm3" in capsys.readouterr().out


def test_map_then_critical_points(case_copy, capsys):
    out = case_copy / "out"
    args = [
        "map", "--config", str(case_copy / "ud_t2.json"),
        "--resolution", "37x72", "--format", "csv,json", "--out", str(out),
    ]
    assert main(args) == 0
    csv_bytes = (out / "t2_map.csv").read_bytes()
    assert main(args) == 0
    assert (out / "t2_map.csv").read_bytes() == csv_bytes

    capsys.readouterr()
    assert main(["critical-points", str(out / "t2_map.csv")]) == 0
    text = capsys.readouterr().out
    assert "N_max = 2, N_min = 2, N_s = 2" in text
    assert "holds" in text


def test_infeasible_calibration_fails(case_copy, capsys):
    code = main([
        "calibrate", "--config", str(case_copy / "ud_t2.json"),
        "--reference-t2", "5e-6", "--out", str(case_copy / "out"),
    ])
    assert code == 1
    assert "❌" in capsys.readouterr().out


def test_bad_map_file(tmp_path, capsys):
    path = tmp_path / "map.csv"
    path.write_text("nonsense\n")
    assert main(["critical-points", str(path)]) == 1
    assert "header" in capsys.readouterr().out


def test_resolution_flag_is_validated():
    with pytest.raises(SystemExit):
        build_parser().parse_args(["map", "--resolution", "big"])


def test_flags_override_the_config_file(case_copy):
    args = build_parser().parse_args([
        "map", "--config", str(case_copy / "ud_t2.json"),
        "--tau", "2e-5", "--sigma", "2e6", "--quantity", "t1", "--resolution", "19x36",
    ])
    run, _ = assemble_run(args)
    assert run.tau_s == 2e-5
    assert run.sigma_S_per_m == 2e6
    assert run.quantity.value == "t1"
    assert str(run.resolution) == "19x36"
    # untouched keys come from the file
    assert run.reference.t2_s == pytest.approx(840e-9)


def test_tau_override_reaches_charge_models(case_copy):
    args = build_parser().parse_args(["map", "--config", str(case_copy / "ud_t2.json"), "--tau", "3e-6"])
    run, path = assemble_run(args)
    _, models = prepare_run(run, path, Config())
    assert models[0].tau_s == 3e-6


def test_environment_default_tau(case_copy, monkeypatch):
    models_path = case_copy / "models.json"
    models_path.write_text(json.dumps([{"type": "UD", "rho_v_per_cm3": 1e13}]))
    monkeypatch.setenv("DEFAULT_TAU_S", "4e-6")
    args = build_parser().parse_args([
        "map", "--device", str(case_copy / "kawakami2014.json"), "--models", str(models_path),
    ])
    run, path = assemble_run(args)
    _, models = prepare_run(run, path, Config())
    assert models[0].tau_s == 4e-6


def test_fit_without_reference_is_rejected(case_copy, capsys):
    models_path = case_copy / "models.json"
    models_path.write_text(json.dumps([{"type": "UD", "fit": True}]))
    code = main([
        "calibrate", "--device", str(case_copy / "kawakami2014.json"), "--models", str(models_path),
    ])
    assert code == 1
    assert "reference" in capsys.readouterr().out


def test_census_filter_flags():
    args = build_parser().parse_args(
        ["critical-points", "map.csv", "--persistence", "0", "--merge-radius", "2.5"]
    )
    assert args.persistence == 0.0
    assert args.merge_radius == 2.5
    defaults = build_parser().parse_args(["critical-points", "map.csv"])
    assert defaults.merge_radius == anisotropy.DEFAULT_MERGE_RADIUS
