import csv
import json
import subprocess
import sys

import pytest

from rtemvdr.cli import _merged, build_parser, experiment_config, main

SMALL = ["--n-trials", "100", "--n-cal", "200", "--n-reps", "160", "--nn-trials", "200"]


def run_json(capsys, argv):
    assert main(argv) == 0
    return json.loads(capsys.readouterr().out)


def test_solve_rte(capsys, tmp_path):
    out = run_json(capsys, ["solve-rte", "--n", "40", "--rho", "0.65", "--seed", "1",
                            "--output", str(tmp_path / "r.json")])
    assert out["N"] == 4 and out["residual"] <= 1e-10
    assert out["snr"] <= out["oracle_snr"]
    assert len(out["matrix"]) == 4
    assert json.loads((tmp_path / "r.json").read_text()) == out


def test_solve_rte_invalid_rho(capsys):
    assert main(["solve-rte", "--n", "2", "--rho", "0.1"]) == 1
    assert "error" in capsys.readouterr().err


def test_asymptotics(capsys, regression):
    out = run_json(capsys, ["asymptotics", "--rho", "0.65", "--skip-sigma-n", "--n", "40",
                            "--n-trials", "200"])
    assert out["gamma"] == pytest.approx(regression["gamma_rho065"], rel=1e-12)
    assert out["alpha"] == pytest.approx(regression["alpha_rho065_n40"], rel=1e-12)
    assert out["snr0"] == pytest.approx(regression["snr0_rho065"], rel=1e-10)
    assert "sigma_n" not in out


def test_asymptotics_rho_one(capsys):
    out = run_json(capsys, ["asymptotics", "--rho", "1", "--skip-sigma-n"])
    assert out["sigma0_eigenvalues"] == [1.0] * 4
    assert "gamma" not in out


def test_clt_writes_samples(capsys, tmp_path):
    assert main(["clt", "--regime", "both", "--rho", "0.5", "--n", "20",
                 "--output-dir", str(tmp_path)] + SMALL) == 0
    text = capsys.readouterr().out
    assert "large_n:" in text and "large_nn:" in text
    rows = list(csv.DictReader((tmp_path / "samples_rho0.5_n20.csv").open()))
    assert len(rows) == 200


def test_clt_single_regime(capsys, tmp_path):
    assert main(["clt", "--regime", "large_nn", "--rho", "0.5", "--n", "20",
                 "--output-dir", str(tmp_path)] + SMALL) == 0
    rows = list(csv.DictReader((tmp_path / "samples_rho0.5_n20.csv").open()))
    assert {r["regime"] for r in rows} == {"large_nn"}


def test_sweep_and_render(capsys, tmp_path):
    csv_path = tmp_path / "sweep.csv"
    assert main(["sweep", "--rho-list", "0.5", "--n-list", "20,40", "--output",
                 str(csv_path)] + SMALL) == 0
    rows = list(csv.DictReader(csv_path.open()))
    assert len(rows) == 4
    assert main(["render", "--input", str(csv_path), "--output-dir", str(tmp_path / "f")]) == 0
    assert (tmp_path / "f" / "distances_rho0.5.svg").exists()


def test_sweep_cell_error_exit_code(capsys, tmp_path):
    code = main(["sweep", "--rho-list", "0.5", "--n-list", "20", "--max-iter", "1",
                 "--output", str(tmp_path / "s.csv")] + SMALL)
    assert code == 2
    rows = list(csv.DictReader((tmp_path / "s.csv").open()))
    assert all(r["error"] for r in rows)


def test_render_missing_file(capsys, tmp_path):
    assert main(["render", "--input", str(tmp_path / "nope.csv")]) == 1


def test_yaml_config_and_flag_precedence(tmp_path):
    cfg_path = tmp_path / "exp.yaml"
    cfg_path.write_text(
        "n_sensors: 6\n"
        "rho_list: [0.7, 0.9]\n"
        "n_list: [30]\n"
        "n_trials: 300\n"
        "seed: 12\n"
        "texture.kind: exponential\n"
    )
    args = build_parser().parse_args(["sweep", "--config", str(cfg_path), "--seed", "5"])
    merged = _merged(args)
    exp = experiment_config(merged)
    assert exp.scenario.n_sensors == 6
    assert exp.scenario.texture.kind == "exponential"
    assert exp.rho_list == (0.7, 0.9) and exp.n_list == (30,)
    assert exp.n_trials == 300 and exp.seed == 5


def test_bad_yaml(tmp_path):
    p = tmp_path / "bad.yaml"
    p.write_text("- 1\n- 2\n")
    assert main(["sweep", "--config", str(p)]) == 1


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "rtemvdr", "--help"], capture_output=True,
                         text=True, check=True)
    for cmd in ("solve-rte", "asymptotics", "clt", "sweep", "render"):
        assert cmd in res.stdout
