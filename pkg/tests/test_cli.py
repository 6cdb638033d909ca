import json

import pytest

from obsdiam import cli, mmspace


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_parse_ns():
    assert cli.parse_ns("16,64") == [16, 64]
    assert cli.parse_ns("2..5") == [2, 3, 4, 5]
    assert cli.parse_ns("16..4096:geometric") == [16 * 2**i for i in range(9)]
    assert cli.parse_ns("1..100:geometric:10") == [1, 10, 100]


def test_gen_and_invariant(capsys, tmp_path):
    path = tmp_path / "t.json"
    assert run(capsys, "gen", "--gen", "two_point:1", "--out", str(path))[0] == 0
    assert mmspace.load(path) == mmspace.generate("k_regular", 2)
    code, out, _ = run(capsys, "invariant", "--space", str(path), "--kappa", "0.4", "--sep-kappas", "0.6,0.6")
    assert code == 0
    rep = json.loads(out)
    b = rep["obs_diam"][0]
    assert b["lower"] <= 1.0 <= b["upper"]
    assert rep["sep"][0]["value"] == 0 and "infeasible" in rep["sep"][0]["note"]
    assert rep["config"]["kappas"] == [0.4]


def test_validation_exit_code(capsys):
    code, out, err = run(capsys, "invariant", "--gen", "k_regular:2", "--kappa", "1.5")
    assert code == 2 and out == ""
    assert json.loads(err)["error"] == "KappaOutOfRange"
    code, _, err = run(capsys, "invariant")
    assert code == 2 and json.loads(err)["error"] == "BadParam"
    code, _, err = run(capsys, "invariant", "--space", "/nonexistent.json")
    assert code == 2


def test_scaling_csv(capsys):
    code, out, _ = run(capsys, "scaling", "--gen", "k_regular:2", "--p", "1", "--n", "16..4096:geometric",
                       "--samples", "0", "--scale-exponent", "0.5")
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "schema=1"
    assert lines[1].startswith("n,p,kappa,witness_lower,mc_lower,upper_thm11,asymptotic_coeff,elapsed_ms")
    rows = [l.split(",") for l in lines[2 : lines.index("# summary")]]
    assert len(rows) == 9
    for r in rows:
        assert float(r[3]) <= float(r[5])
        assert r[7] == ""
    summary = {l.split(",")[2]: float(l.split(",")[3]) for l in lines[lines.index("# summary") + 2 :]}
    assert summary["upper_thm11"] == pytest.approx(0.5, abs=1e-12)
    assert summary["witness_lower"] == pytest.approx(0.5, abs=0.02)


def test_scaling_insufficient(capsys):
    code, _, err = run(capsys, "scaling", "--gen", "k_regular:2", "--n", "2")
    assert code == 2 and json.loads(err)["error"] == "InsufficientSweep"


def test_box(capsys):
    code, out, _ = run(capsys, "box", "--gen", "k_regular:2", "--gen2", "k_regular:2", "--scale2", "1.2",
                       "--n", "2", "--p", "1")
    rep = json.loads(out)
    assert code == 0 and rep["box"]["value"] == pytest.approx(0.2)
    prod = rep["products"][0]
    assert prod["lemma_bound"] == pytest.approx(0.8) and prod["direct"] <= 0.8 + 1e-9
    code, out, _ = run(capsys, "box", "--gen", "random:4", "--gen2", "random:4")
    assert json.loads(out)["box"]["value"] == pytest.approx(0, abs=1e-12)
    code, _, err = run(capsys, "box", "--gen", "k_regular:2", "--gen2", "k_regular:3", "--mode", "exact")
    assert code == 2 and json.loads(err)["error"] == "Unsupported"


def test_product(capsys, tmp_path):
    code, out, _ = run(capsys, "product", "--gen", "k_regular:2", "--n", "4", "--p", "1,2", "--kappa", "0.2")
    rows = json.loads(out)["rows"]
    assert [r["witness_lower"] for r in rows] == [2.0, 1.0]
    path = tmp_path / "p.json"
    run(capsys, "product", "--gen", "k_regular:2", "--n", "2", "--p", "2", "--explicit", "--out", str(path))
    assert mmspace.load(path).k == 4


def test_selftest_and_fault_injection(capsys, tmp_path):
    code, out, _ = run(capsys, "selftest")
    assert code == 0 and "FAIL" not in out
    verdicts = [l.split(":")[0] for l in out.splitlines()]
    code2, out2, _ = run(capsys, "selftest", "--seed", "17")
    assert code2 == 0 and [l.split(":")[0] for l in out2.splitlines()] == verdicts
    dump = tmp_path / "dump"
    code, out, _ = run(capsys, "selftest", "--tolerance", "-1", "--dump-dir", str(dump))
    assert code == 1 and "[FAIL]" in out
    assert any(dump.glob("sandwich-*.space.json"))
    case = json.loads(next(dump.glob("sandwich-*.case.json")).read_text())
    mmspace.load(dump / case["space_file"])
