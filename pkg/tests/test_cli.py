import json
import subprocess
import sys

import pytest

from ipdecomp.cli import CSV_EXTRA, CSV_FIELDS, EXIT_BUDGET, EXIT_IO, EXIT_OK, EXIT_VALIDATION, main, read_rows
from ipdecomp.generators import GenSpec, generate
from ipdecomp.problem import SeparableProblem


@pytest.fixture
def qfile(tmp_path):
    path = tmp_path / "q.json"
    assert main(["gen", "--family", "quadratic", "--m1", "2", "--n1", "5", "--N", "2", "--seed", "3", "--out", str(path)]) == EXIT_OK
    return path


def test_gen_round_trip(qfile):
    loaded = SeparableProblem.load(qfile)
    assert loaded.dumps() == generate(GenSpec("quadratic", 2, 5, 2, seed=3)).dumps()


def test_gen_rejects_bad_shape(tmp_path, capsys):
    rc = main(["gen", "--family", "network", "--m1", "5", "--n1", "5", "--N", "2", "--out", str(tmp_path / "x.json")])
    assert rc == EXIT_VALIDATION
    assert "error" in capsys.readouterr().err


def test_usage_error():
    with pytest.raises(SystemExit) as info:
        main(["solve"])
    assert info.value.code == 2


@pytest.mark.parametrize("method", ["dip", "oracle", "adi"])
def test_solve_methods(qfile, tmp_path, capsys, method):
    report, table = tmp_path / "r.json", tmp_path / "rows.csv"
    rc = main(["solve", str(qfile), "--method", method, "--report", str(report), "--csv", str(table)])
    assert rc in (EXIT_OK, EXIT_BUDGET)
    out = capsys.readouterr().out
    assert f"method          {method}" in out
    data = json.loads(report.read_text())
    assert data["method"] == method
    rows = read_rows(table)
    assert list(rows[0]) == CSV_FIELDS + CSV_EXTRA
    assert rows[0]["m1"] == "2" and rows[0]["n1"] == "5" and rows[0]["N"] == "2"


def test_csv_appends(qfile, tmp_path):
    table = tmp_path / "rows.csv"
    for _ in range(2):
        main(["solve", str(qfile), "--csv", str(table)])
    assert len(read_rows(table)) == 2
    assert table.read_text().count("m1,n1,N") == 1


def test_short_mode_prints_tau(qfile, capsys):
    assert main(["solve", str(qfile), "--mode", "short", "--eps", "1e-2"]) == EXIT_OK
    assert "tau" in capsys.readouterr().out


def test_budget_exit(qfile):
    assert main(["solve", str(qfile), "--max-outer", "2"]) == EXIT_BUDGET


def test_missing_file():
    assert main(["solve", "/nonexistent/problem.json"]) == EXIT_IO


def test_malformed_file(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["solve", str(bad)]) == EXIT_IO


def test_verify(qfile, capsys):
    assert main(["verify", str(qfile)]) == EXIT_OK
    out = capsys.readouterr().out
    assert "gap certificate     PASS" in out


def test_bench(tmp_path):
    table = tmp_path / "bench.csv"
    rc = main(["bench", "--family", "quadratic", "network", "--shapes", "2,4,2", "--methods", "dip", "adi", "--csv", str(table)])
    assert rc == EXIT_OK
    rows = read_rows(table)
    assert len(rows) == 4
    assert {(r["family"], r["method"]) for r in rows} == {
        (f, m) for f in ("quadratic", "network") for m in ("dip", "adi")
    }
    assert all(int(r["fct_evals"]) > 0 for r in rows)


def test_bench_bad_shape():
    with pytest.raises(SystemExit):
        main(["bench", "--shapes", "1,2", "--csv", "x.csv"])


def test_threads_do_not_change_output(qfile, tmp_path):
    reports = []
    for threads in ("1", "3"):
        path = tmp_path / f"r{threads}.json"
        main(["solve", str(qfile), "--threads", threads, "--report", str(path)])
        data = json.loads(path.read_text())
        data.pop("wall_time")
        reports.append(data)
    assert reports[0] == reports[1]


def test_module_entry_point(qfile):
    proc = subprocess.run([sys.executable, "-m", "ipdecomp", "solve", str(qfile), "--method", "oracle"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert "objective" in proc.stdout
