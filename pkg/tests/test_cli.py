import csv
import json
import subprocess
import sys

import pytest

from centeq.cli import EXIT_CONFIG, EXIT_FAIL, EXIT_OK, EXIT_USAGE, SCHEMA_VERSION, main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr().out
    return code, (json.loads(out) if out.strip() else None)


def test_weyl_check(capsys):
    code, payload = run(capsys, "weyl-check", "--root-system", "G2")
    assert code == EXIT_OK
    assert payload["schema_version"] == SCHEMA_VERSION
    assert payload["result"]["rank"] == 2 and payload["status"] == "PASS"
    code, payload = run(capsys, "weyl-check", "--root-system", "single")
    assert code == EXIT_FAIL and payload["result"]["rank"] == 1


def test_config_errors(capsys, tmp_path):
    assert main(["weyl-check", "--root-system", "E8"]) == EXIT_CONFIG
    assert main(["net", "--system", str(tmp_path / "missing.txt"), "--n", "2"]) == EXIT_CONFIG
    assert main(["bridge-defect", "--expr", "__import__('os')"]) == EXIT_CONFIG
    assert main(["entropy", "--nmin", "4", "--nmax", "5"]) == EXIT_CONFIG
    assert main(["selftest", "--only", "one"]) == EXIT_CONFIG


def test_usage_errors(capsys):
    assert main([]) == EXIT_USAGE
    with pytest.raises(SystemExit) as exc:
        main(["net"])
    assert exc.value.code == EXIT_USAGE


def test_bad_seed_environment(capsys, monkeypatch):
    monkeypatch.setenv("CENTEQ_SEED", "abc")
    assert main(["weyl-check"]) == EXIT_CONFIG
    monkeypatch.setenv("CENTEQ_SEED", "7")
    _, payload = run(capsys, "weyl-check")
    assert payload["config"]["seed"] == 7


def test_net_with_csv(capsys, tmp_path):
    out = tmp_path / "net.csv"
    code, payload = run(capsys, "net", "--n", "3", "--eps", "0.1", "--validate", "--csv", str(out))
    assert code == EXIT_OK and payload["result"]["separated"]
    rows = list(csv.reader(out.open()))
    assert rows[0] == ["x1", "x2"] and len(rows) - 1 == payload["result"]["size"]


def test_qp_counts(capsys):
    code, payload = run(capsys, "qp", "--system", "builtin:t3", "--nmin", "3", "--nmax", "5", "--validate")
    assert code == EXIT_OK
    assert payload["result"]["counts"] == {"3": 13, "4": 38, "5": 101}


def test_pressure_with_potential_file(capsys, tmp_path):
    pot = tmp_path / "phi.txt"
    pot.write_text("1 0 0.2 0\n")
    code, payload = run(capsys, "pressure", "--potential", str(pot), "--const", "0.3", "--eps", "0.1",
                        "--nmin", "3", "--nmax", "7")
    assert code == EXIT_OK
    assert 1.2 < payload["result"]["P"] < 1.35


def test_bridge_homogenize_and_haar(capsys):
    code, payload = run(capsys, "bridge-defect", "--samples", "5000", "--box", "200")
    assert code == EXIT_OK and payload["result"]["K"] == 2.0
    code, payload = run(capsys, "bridge-defect", "--rotation", "1.0", "--samples", "5000", "--box", "200")
    assert code == EXIT_OK and payload["result"]["measured"] < 1e-9
    code, payload = run(capsys, "homogenize", "--probe", "2")
    assert code == EXIT_OK and abs(payload["result"]["values"]["2"] - 2 * 2**0.5) < 1e-6
    code, payload = run(capsys, "haar-h", "--expr", "n", "--a", "0.37")
    assert code == EXIT_OK and abs(payload["result"]["H"][0] - 0.37) < 1e-6
    assert main(["haar-h", "--rotation", "1.0"]) == EXIT_CONFIG


def test_replay_reproduces_result(capsys, tmp_path):
    first = tmp_path / "first.json"
    second = tmp_path / "second.json"
    assert main(["net", "--n", "4", "--eps", "0.1", "--seed", "5", "--json", str(first)]) == EXIT_OK
    assert main(["--replay", str(first), "--json", str(second)]) == EXIT_OK
    a, b = json.loads(first.read_text()), json.loads(second.read_text())
    assert a["config"] == b["config"] and a["result"] == b["result"]
    (tmp_path / "broken.json").write_text("{}")
    assert main(["--replay", str(tmp_path / "broken.json")]) == EXIT_CONFIG


def test_selftest_single_criterion(capsys):
    code, payload = run(capsys, "selftest", "--only", "9")
    assert code == EXIT_OK
    assert payload["result"]["passed"] == payload["result"]["total"] == 1


def test_console_script_runs():
    proc = subprocess.run([sys.executable, "-m", "centeq.cli", "weyl-check", "--root-system", "B2"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["result"]["name"] == "B2"
