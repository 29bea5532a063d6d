import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from crnlyap.cli import EXIT_FAIL, EXIT_INCONCLUSIVE, EXIT_INPUT, EXIT_OK, main
from helpers import corpus_path

MAXMIN_ROWS = [[1, -1, 0], [0, 1, -1], [-1, 0, 1]]


def up_to_sign(rows):
    out = set()
    for r in rows:
        r = tuple(int(x) for x in r)
        out.add(max(r, tuple(-x for x in r)))
    return out


def crn(name):
    return corpus_path(f"{name}.crn")


def cert(name):
    return corpus_path(f"{name}.json")


def analyze(tmp_path, name, *flags):
    out = tmp_path / f"{name}.json"
    code = main(["analyze", crn(name), "--json", str(out), *flags])
    return code, json.loads(out.read_text())


def test_analyze_network1(tmp_path):
    code, doc = analyze(tmp_path, "network1")
    assert code == EXIT_OK
    assert doc["classification"]["status"] == "CertifiedStable"
    assert doc["classification"]["scope"] == "interior"
    code, doc = analyze(tmp_path, "network1", "--assume-isolated")
    assert doc["classification"]["scope"] == "global"
    assert doc["classification"]["unique_equilibrium"] is True


def test_analyze_example2_refuted(tmp_path):
    code, doc = analyze(tmp_path, "example2_corrected")
    assert code == EXIT_FAIL
    assert doc["classification"]["status"] == "RefutedPWLR"


def test_analyze_lasalle_counterexample_inconclusive(tmp_path):
    code, doc = analyze(tmp_path, "lasalle_counterexample")
    assert code == EXIT_INCONCLUSIVE
    assert doc["classification"]["status"] == "Inconclusive"


def test_analyze_futile_cycle_with_supplied_certificate(tmp_path):
    code, doc = analyze(tmp_path, "futile_cycle", "--certificate", cert("futile_cycle_l1"), "--assume-isolated")
    assert code == EXIT_OK
    assert doc["certificate"]["method"] == "supplied"
    assert len(doc["network"]["conservation_laws"]) == 5


def test_analyze_is_deterministic(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for path in (a, b):
        assert main(["analyze", crn("example5"), "--json", str(path)]) == EXIT_OK
    assert a.read_bytes() == b.read_bytes()
    assert json.loads(a.read_text())["seed"] == 0


def test_empty_file_is_input_error(tmp_path, capsys):
    empty = tmp_path / "empty.crn"
    empty.write_text("")
    assert main(["analyze", str(empty)]) == EXIT_INPUT
    assert "error" in capsys.readouterr().err


def test_ag1_violation_reports_line(capsys):
    assert main(["parse", crn("example2_printed")]) == EXIT_INPUT
    err = capsys.readouterr().err
    assert "example2_printed.crn:4:" in err and "AG1" in err


def test_missing_file_is_input_error():
    assert main(["parse", "/nonexistent/file.crn"]) == EXIT_INPUT


def test_check_commands(capsys):
    assert main(["check", crn("network1"), "--certificate", cert("network1_maxmin")]) == EXIT_OK
    assert main(["check", crn("example6"), "--certificate", cert("network1_maxmin")]) == EXIT_FAIL
    assert main(["check", crn("futile_cycle"), "--certificate", cert("futile_cycle_l1")]) == EXIT_OK
    assert main(["check", crn("chain_n1"), "--certificate", cert("network1_maxmin")]) == EXIT_INPUT


def test_check_rejects_schema_violation(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"schema_version": 1, "kind": "certificate", "form": "convex"}))
    assert main(["check", crn("network1"), "--certificate", str(bad)]) == EXIT_INPUT
    assert "schema violation" in capsys.readouterr().err


def test_construct_round_trip(tmp_path):
    out = tmp_path / "cert.json"
    assert main(["construct", crn("network1"), "--method", "maxmin", "--out", str(out)]) == EXIT_OK
    doc = json.loads(out.read_text())
    # max-min differences of (1,1,1)-scaled rates: all pairs, equal to the cyclic rows up to sign
    assert up_to_sign(doc["C"]) == up_to_sign(MAXMIN_ROWS)
    assert main(["check", crn("network1"), "--certificate", str(out)]) == EXIT_OK


@pytest.mark.parametrize("method", ["lp", "iter", "maxmin-rev", "auto"])
def test_constructed_certificates_are_accepted(tmp_path, method):
    name = "chain_n1" if method == "maxmin-rev" else "network1"
    out = tmp_path / "cert.json"
    assert main(["construct", crn(name), "--method", method, "--out", str(out)]) == EXIT_OK
    assert main(["check", crn(name), "--certificate", str(out)]) == EXIT_OK


def test_construct_general_form_round_trip(tmp_path):
    out = tmp_path / "cert.json"
    assert main(["construct", crn("network1"), "--method", "lp", "--general", "--out", str(out)]) == EXIT_OK
    assert json.loads(out.read_text())["form"] == "general"
    assert main(["check", crn("network1"), "--certificate", str(out)]) == EXIT_OK


def test_construct_iterative_nontermination(tmp_path, capsys):
    out = tmp_path / "cert.json"
    assert main(["construct", crn("example6"), "--method", "iter", "--max-iter", "20", "--out", str(out)]) == EXIT_INCONCLUSIVE
    assert "did not terminate in 20 iterations" in capsys.readouterr().out


def test_construct_lp_with_hhat(tmp_path):
    out = tmp_path / "cert.json"
    assert main(["construct", crn("example5"), "--method", "lp", "--hhat", cert("example5_hhat"), "--out", str(out)]) == EXIT_OK
    assert main(["construct", crn("example5"), "--method", "lp", "--out", str(out)]) == EXIT_INCONCLUSIVE


def test_necessary_command():
    assert main(["necessary", crn("example2_corrected")]) == EXIT_FAIL
    assert main(["necessary", crn("network1")]) == EXIT_OK


def test_simulate_hill_writes_monotone_v(tmp_path, capsys):
    out = tmp_path / "run.csv"
    code = main(
        ["simulate", crn("network1"), "--kinetics", "hill", "--k", "1,0.5,0.25", "--x0", "1,2,7,2",
         "--t-end", "100", "--certificate", cert("network1_maxmin"), "--out", str(out)]
    )
    assert code == EXIT_OK
    summary = json.loads(capsys.readouterr().out)
    assert summary["monitor"]["passed"]
    rows = list(csv.DictReader(out.open()))
    V = np.array([float(r["V"]) for r in rows])
    assert np.all(np.diff(V) <= 1e-7 * max(1.0, V[0]))


def test_simulate_rejects_bad_kinetics():
    code = main(["simulate", crn("network1"), "--kinetics", "expr", "--rates", "1/(1+X1);X2;X3*X4", "--x0", "1,2,7,2", "--t-end", "1"])
    assert code == EXIT_INPUT


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "crnlyap", "parse", crn("network1")], capture_output=True, text=True)
    assert res.returncode == 0
    assert json.loads(res.stdout)["species"] == ["X1", "X2", "X3", "X4"]
