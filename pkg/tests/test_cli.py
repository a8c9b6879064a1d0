"""
Tests de la ligne de commande loop-lab (codes de sortie et fichiers produits)
"""
import json
import logging

import pytest

from app import cli
from app.database import SessionLocal
from app.schemas import VerificationCheck, VerificationReport
from app.services.archive import list_runs
from app.services.writer import read_csv_rows
from app.utils.logger import _handlers, set_console_level


def _load(path):
    with open(path, encoding="utf-8") as f:
        return json.load(f)


@pytest.fixture
def out(tmp_path):
    return str(tmp_path)


# ---------- sous-commandes ----------

def test_bounds_command(out, capsys):
    assert cli.main(["bounds", "--output-dir", out, "--S-grid", "7,8,40"]) == cli.EXIT_OK
    document = _load(f"{out}/bounds.json")
    assert document["threshold_S"] == pytest.approx(39.2, abs=0.1)
    assert [r["series_convergent"] for r in document["reports"]] == [False, True, True]

    rows = read_csv_rows(f"{out}/bounds.csv")
    assert rows[0]["peierls_bound"] == ""
    assert float(rows[2]["peierls_bound"]) == pytest.approx(0.47355, abs=1e-5)
    assert f"{out}/bounds.json" in capsys.readouterr().out


def test_enumerate_command(out):
    argv = ["enumerate", "--output-dir", out, "--twice-S", "1", "--ell", "1", "--beta", "1", "-n", "4", "--pairs", "0:1"]
    assert cli.main(argv) == cli.EXIT_OK
    document = _load(f"{out}/enumerate.json")
    assert document["Z_fraction"] == "127277/16384"
    assert document["transfer_matrix"]["Z"] == pytest.approx(127277 / 16384, rel=1e-10)
    assert document["provenance"]["config"]["n"] == 4

    rows = read_csv_rows(f"{out}/enumerate.csv")
    assert [r["event"] for r in rows] == ["Z", "empty", "0<->1"]


def test_ed_command_uses_twice_beta(out):
    assert cli.main(["ed", "--output-dir", out, "--twice-S", "1", "--ell", "2", "--formats", "json"]) == cli.EXIT_OK
    document = _load(f"{out}/ed.json")
    assert document["beta_q"] == 2.0
    assert document["ground_energy"] == pytest.approx(-2.3660254, abs=1e-7)
    assert set(document["spin_correlation"]) == {"-1,0", "-1,1", "-1,2"}


def test_contours_from_bar_file(out, tmp_path):
    bars = tmp_path / "bars.txt"
    bars.write_text("# contour a cinq barres\n-1,-2\n-1,3\n1,-1\n1,2\n0,1\n", encoding="utf-8")
    argv = ["contours", "--output-dir", out, "--ell", "2", "--beta", "1", "-n", "4", "--bars", str(bars)]
    assert cli.main(argv) == cli.EXIT_OK

    rows = read_csv_rows(f"{out}/contours.csv")
    assert rows == [{
        "sample": "0", "loop_id": "0", "n_bars": "5", "length_L": "4.0",
        "int1": "8", "int2": "0", "external": "1", "encloses_origin": "1",
    }]
    assert _load(f"{out}/contours.json")["n_external"] == 1


def test_contours_by_sampling(out):
    argv = ["contours", "--output-dir", out, "--ell", "2", "-n", "4", "--sweeps", "300", "--burnin", "30"]
    assert cli.main(argv) == cli.EXIT_OK
    assert _load(f"{out}/contours.json")["n_samples"] == 270


def test_simulate_is_reproducible(tmp_path):
    first, second = tmp_path / "a", tmp_path / "b"
    first.mkdir()
    second.mkdir()
    argv = ["simulate", "--ell", "1", "-n", "2", "--sweeps", "300", "--burnin", "30", "--seed", "17", "--pairs", "0:1"]
    assert cli.main(argv + ["--output-dir", str(first)]) == cli.EXIT_OK
    assert cli.main(argv + ["--output-dir", str(second)]) == cli.EXIT_OK

    a, b = _load(first / "simulate.json"), _load(second / "simulate.json")
    assert a["estimates"] == b["estimates"]
    assert a["provenance"]["params"]["seed"] == 17
    assert read_csv_rows(str(first / "estimates.csv")) == read_csv_rows(str(second / "estimates.csv"))
    traces = read_csv_rows(str(first / "traces.csv"))
    assert traces[0]["sweep"] == "30"


def test_config_file_with_flag_override(out, tmp_path):
    config = tmp_path / "run.cfg"
    config.write_text("twice_S = 2\nell = 2\nbeta = 1\n", encoding="utf-8")
    argv = ["ed", "--config", str(config), "--ell", "1", "--output-dir", out, "--formats", "json"]
    assert cli.main(argv) == cli.EXIT_OK
    document = _load(f"{out}/ed.json")
    assert document["ell"] == 1
    assert document["q"] == 3


# ---------- codes de sortie ----------

def test_invalid_parameter_exit_code(out, capsys):
    assert cli.main(["simulate", "--beta", "0", "--output-dir", out]) == cli.EXIT_USAGE
    assert "beta" in capsys.readouterr().err


def test_unknown_command_exit_code():
    assert cli.main(["dance"]) == cli.EXIT_USAGE


def test_invalid_bar_file_exit_code(out, tmp_path):
    bars = tmp_path / "bars.txt"
    bars.write_text("0,0\n", encoding="utf-8")
    argv = ["contours", "--output-dir", out, "--ell", "2", "--bars", str(bars)]
    assert cli.main(argv) == cli.EXIT_USAGE


def test_divergent_bounds_are_reported_not_fatal(out):
    assert cli.main(["bounds", "--output-dir", out, "--S-grid", "1,2"]) == cli.EXIT_OK


def test_too_large_enumeration_exit_code(out):
    argv = ["enumerate", "--output-dir", out, "--ell", "8", "-n", "64", "--beta", "8"]
    assert cli.main(argv) == cli.EXIT_USAGE


def test_missing_output_directory_exit_code(tmp_path):
    assert cli.main(["bounds", "--output-dir", str(tmp_path / "absent")]) == cli.EXIT_RUNTIME


def test_failed_verification_exit_code(out, monkeypatch):
    def fake_verify(**kwargs):
        check = VerificationCheck(name="polynomial-identity-S=1/2", passed=False, value=0.1)
        return VerificationReport(passed=False, checks=[check], failures=[check.name])

    monkeypatch.setattr(cli, "run_verify", fake_verify)
    argv = ["verify", "--output-dir", out, "--mutation", "singlet-projector"]
    assert cli.main(argv) == cli.EXIT_VERIFICATION_FAILED
    assert _load(f"{out}/verify.json")["failures"] == ["polynomial-identity-S=1/2"]


def test_unknown_mutation_is_a_usage_error(out):
    assert cli.main(["verify", "--output-dir", out, "--mutation", "hamiltonian"]) == cli.EXIT_USAGE


# ---------- archive ----------

def test_archive_flag(out):
    assert cli.main(["bounds", "--output-dir", out, "--S-grid", "40", "--archive"]) == cli.EXIT_OK
    db = SessionLocal()
    try:
        runs = list_runs(db, command="bounds")
    finally:
        db.close()
    assert runs
    assert runs[0].config["S_grid"] == [40.0]
    assert runs[0].result["threshold_S"] == pytest.approx(39.2, abs=0.1)


# ---------- verbosité ----------

def test_quiet_flag_lowers_console_output(out):
    try:
        assert cli.main(["bounds", "--output-dir", out, "--S-grid", "40", "-q"]) == cli.EXIT_OK
        assert _handlers()[1].level == logging.ERROR
    finally:
        set_console_level(logging.INFO)


def test_verbose_and_quiet_are_exclusive(out):
    assert cli.main(["bounds", "--output-dir", out, "-v", "-q"]) == cli.EXIT_USAGE
