from __future__ import annotations

import csv
import io
import json

import jsonschema
import pytest

from degtrees import cli
from degtrees.census import build_free

SCHEMA = cli.load_schema()


def run(argv, capsys):
    code = cli.main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def rows(text):
    return list(csv.reader(line for line in io.StringIO(text) if not line.startswith("#")))


def test_schema_is_valid():
    jsonschema.Draft202012Validator.check_schema(SCHEMA)


def test_census_csv(capsys):
    code, out, _ = run(["census", "--delta", "3", "--n", "5"], capsys)
    assert code == 0
    table = rows(out)
    assert table[0] == ["n", "p_n", "r_n", "t_n"]
    assert table[-1][0] == "5" and table[-1][3] == "2"
    code, out, _ = run(["census", "--delta", "4", "--n", "5"], capsys)
    assert rows(out)[-1][3] == "3"


def test_census_json_big_counts(capsys):
    code, out, _ = run(["census", "--delta", "4", "--n", "400", "--format", "json"], capsys)
    assert code == 0
    doc = json.loads(out)
    jsonschema.validate(doc, SCHEMA)
    last = doc["rows"][-1]
    assert last["n"] == 400 and int(last["t"]) == build_free(4, 400).t[400]
    assert int(last["t"]) > 2 ** 64
    code, again, _ = run(["census", "--delta", "4", "--n", "400", "--format", "json"], capsys)
    assert again == out


def test_distribution_csv_examples(capsys):
    code, out, _ = run(["distribution", "--delta", "3", "--mark", "degree:1", "--n", "4"], capsys)
    assert code == 0
    assert rows(out)[1:] == [["4", "2", "1"], ["4", "3", "1"]]
    assert "# mean=5/2" in out and "# variance=1/4" in out
    assert out.startswith("# precision:")
    code, out, _ = run(["distribution", "--delta", "3", "--mark", "edge:1,2", "--n", "4"], capsys)
    assert rows(out)[1:] == [["4", "0", "1"], ["4", "2", "1"]]


def test_distribution_total_matches_census(capsys):
    _, out, _ = run(["distribution", "--delta", "4", "--mark", "degree:2", "--n", "100"], capsys)
    total = sum(int(r[2]) for r in rows(out)[1:])
    _, cen, _ = run(["census", "--delta", "4", "--n", "100"], capsys)
    assert total == int(rows(cen)[-1][3])


def test_distribution_json(capsys):
    code, out, _ = run(["distribution", "--delta", "4", "--mark", "edge:2,2", "--n", "30",
                        "--format", "json"], capsys)
    doc = json.loads(out)
    jsonschema.validate(doc, SCHEMA)
    assert sum(int(c["count"]) for c in doc["counts"]) == int(doc["total"])


def test_constants(capsys):
    code, out, _ = run(["constants", "--delta", "4", "--mark", "degree:9"], capsys)
    assert code == 0
    doc = json.loads(out)
    jsonschema.validate(doc, SCHEMA)
    assert float(doc["mu"]) == 0 and float(doc["sigma"]) == 0
    assert doc["notes"]
    code, out, _ = run(["constants", "--delta", "4", "--mark", "degree:1"], capsys)
    doc = json.loads(out)
    assert abs(float(doc["x0"]) - 0.3551817) < 1e-6
    assert "e" not in doc["x0"].lower()
    code, out, _ = run(["constants", "--delta", "3", "--mark", "edge:1,2"], capsys)
    doc = json.loads(out)
    jsonschema.validate(doc, SCHEMA)
    assert abs(float(doc["mu"]) - float(doc["mu_nullvector"])) < 1e-6


def test_constants_precision_exit(capsys):
    code, out, _ = run(["constants", "--delta", "4", "--mark", "degree:1", "--prec", "30",
                        "--h", "0.05"], capsys)
    assert code == cli.EXIT_PRECISION
    doc = json.loads(out)
    jsonschema.validate(doc, SCHEMA)
    assert "f1_error_estimate" in doc["diagnostics"]


def test_precision_env(monkeypatch, capsys):
    monkeypatch.setenv(cli.PREC_ENV, "40")
    code, out, _ = run(["distribution", "--delta", "3", "--mark", "degree:1", "--n", "6"], capsys)
    assert "# precision: 40" in out
    monkeypatch.setenv(cli.PREC_ENV, "lots")
    code, _, err = run(["distribution", "--delta", "3", "--mark", "degree:1", "--n", "6"], capsys)
    assert code == cli.EXIT_USAGE


def test_indices(capsys):
    code, out, _ = run(["indices", "--delta", "4", "--alpha", "0", "1", "--beta", "-0.5",
                        "--n", "40", "80", "120"], capsys)
    assert code == 0
    doc = json.loads(out)
    jsonschema.validate(doc, SCHEMA)
    z0, z1, r = doc["reports"]
    assert abs(float(z0["constant"]) - 1) < 1e-8
    assert abs(float(z1["constant"]) - 2) < 1e-8
    gaps = [float(f["gap"]) for f in r["finite_n"]]
    assert gaps[0] > gaps[1] > gaps[2]


def test_indices_needs_exponent(capsys):
    code, _, err = run(["indices", "--delta", "3"], capsys)
    assert code == cli.EXIT_USAGE


@pytest.mark.parametrize("argv", [
    ["certify", "--delta", "3", "--n", "8", "--marks", "all"],
    ["certify", "--delta", "5", "--n", "10", "--marks", "degree:1,edge:2,2"],
    ["certify", "--delta", "3", "--n", "1"],
])
def test_certify_pass(argv, capsys):
    code, out, _ = run(argv, capsys)
    doc = json.loads(out)
    jsonschema.validate(doc, SCHEMA)
    assert code == 0 and doc["status"] == "pass"


def test_certify_reports_mismatch(monkeypatch, capsys):
    real = cli.oracle.aggregate_all

    def corrupted(n, delta, marks):
        out = real(n, delta, marks)
        if n == 6:
            first = next(iter(out))
            out[first] = {k: c + 1 for k, c in out[first].items()}
        return out

    monkeypatch.setattr(cli.oracle, "aggregate_all", corrupted)
    code, out, _ = run(["certify", "--delta", "3", "--n", "7", "--marks", "degree:1"], capsys)
    doc = json.loads(out)
    assert code == cli.EXIT_MISMATCH
    assert doc["mismatches"][0]["n"] == 6
    assert doc["mismatches"][0]["k"] == min(real(6, 3, [cli.Marking.degree(1)])[cli.Marking.degree(1)])


def test_parse_marks():
    assert [str(m) for m in cli.parse_marks("degree:1,edge:2,2", 4)] == ["degree:1", "edge:2,2"]
    assert len(cli.parse_marks("all", 4)) == 4 + 10
    with pytest.raises(cli.UsageError):
        cli.parse_marks("degree:1,vertex:2", 4)


def test_tau(capsys):
    code, out, _ = run(["tau", "--delta", "4", "--n", "400"], capsys)
    assert code == 0
    lines = out.strip().splitlines()
    footer = json.loads(lines[-1].lstrip("# "))
    assert float(footer["tau_hat"]) > 0
    table = rows(out)
    assert table[0] == ["n", "s_n", "extrapolant"]
    s = {int(r[0]): float(r[1]) for r in table[1:]}
    assert all(v > 0 for v in s.values())
    assert abs(s[400] / s[300] - 1) < 1e-2
    _, again, _ = run(["tau", "--delta", "4", "--n", "400"], capsys)
    assert again == out


@pytest.mark.parametrize("argv,code", [
    (["census", "--delta", "2", "--n", "5"], cli.EXIT_USAGE),
    (["census", "--delta", "3", "--n", "0"], cli.EXIT_USAGE),
    (["distribution", "--delta", "3", "--mark", "edge:0,1", "--n", "5"], cli.EXIT_USAGE),
    (["distribution", "--delta", "3", "--mark", "none", "--n", "5"], cli.EXIT_USAGE),
    (["tau", "--delta", "3", "--n", "50"], cli.EXIT_USAGE),
    (["certify", "--delta", "3", "--n", "21"], cli.EXIT_RESOURCE),
    (["census", "--delta", "3", "--n", "100000"], cli.EXIT_RESOURCE),
    (["distribution", "--delta", "3", "--mark", "degree:1", "--n", "5000"], cli.EXIT_RESOURCE),
])
def test_exit_codes(argv, code, capsys):
    assert run(argv, capsys)[0] == code


def test_argparse_usage_exit(capsys):
    with pytest.raises(SystemExit) as info:
        cli.main(["census", "--n", "5"])
    assert info.value.code == cli.EXIT_USAGE


def test_output_file(tmp_path, capsys):
    target = tmp_path / "t.csv"
    code, out, _ = run(["--output", str(target), "census", "--delta", "3", "--n", "6"], capsys)
    assert code == 0 and out == ""
    tab = build_free(3, 6)
    assert target.read_text().splitlines()[-1] == f"6,{tab.p[6]},{tab.r[6]},{tab.t[6]}"
