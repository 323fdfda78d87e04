import csv
import io
import json
from pathlib import Path

import pytest

from cadlag_rough import fixtures
from cadlag_rough.cli import main

FIX = Path(__file__).resolve().parents[1] / "fixtures"


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_ito_example(capsys, tmp_path):
    rep = tmp_path / "r.json"
    code, out, err = run(capsys, "ito", "--path", str(FIX / "levy_jump.json"), "--functional", "levy-area",
                         "--level", "1", "--t", "1.0", "--report", str(rep))
    assert code == 0
    assert out.splitlines()[0] == "mesh,integral,richardson,residual"
    assert "PASS" in err
    data = json.loads(rep.read_text())
    assert abs(data["residual"]) < 1e-6


def test_taylor_example(capsys):
    code, out, err = run(capsys, "taylor", "--functional", "linear-sig", "--u", "(1,2)", "--K", "4")
    assert code == 0
    rem = float(err.split()[1])
    assert abs(rem) < 1e-12


def test_sig_example(capsys):
    code, out, _ = run(capsys, "sig", "--path", str(FIX / "two_segment.json"), "--N", "3")
    assert code == 0
    rows = {r[1]: float(r[2]) for r in list(csv.reader(io.StringIO(out)))[1:]}
    assert rows["(0)"] == 1.0 and rows["(1)"] == 1.0
    assert rows["(0,1)"] == pytest.approx(1.0) and rows["(1,0)"] == pytest.approx(0.0)
    assert rows["(0,0)"] == pytest.approx(0.5) and rows["(1,1)"] == pytest.approx(0.5)


def test_deterministic_csv(capsys, tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for target in (a, b):
        assert main(["integrate", "--path", "two_jumps", "--functional", "compose", "--f", "sin", "--u", "(1,2)",
                     "--levels", "8", "--out", str(target)]) == 0
    assert a.read_bytes() == b.read_bytes()
    capsys.readouterr()


def test_fixtures_regenerate(capsys, tmp_path):
    code, out, _ = run(capsys, "fixtures", "--out-dir", str(tmp_path))
    assert code == 0 and len(out.splitlines()) == len(fixtures.NAMED)
    for name in fixtures.NAMED:
        assert (tmp_path / f"{name}.json").read_text() == (FIX / f"{name}.json").read_text()


def test_bad_input_exit_2(capsys):
    code, _, err = run(capsys, "ito", "--path", "/nonexistent.json")
    assert code == 2 and "usage" in err
    code, _, err = run(capsys, "taylor", "--u", "(1,2")
    assert code == 2
    code, _, _ = run(capsys, "taylor", "--K", "1", "--level", "2")
    assert code == 2
    with pytest.raises(SystemExit) as exc:
        main(["nope"])
    assert exc.value.code == 2


def test_tolerance_breach_exit_1(capsys):
    code, _, err = run(capsys, "qv", "--path", "levy_jump", "--functional", "levy-area")
    assert code == 1 and "refused" in err
    code, _, _ = run(capsys, "ito", "--path", "two_jumps", "--functional", "compose", "--f", "sin", "--u", "(1)",
                     "--levels", "3", "--tol", "1e-12")
    assert code == 1


def test_other_commands(capsys):
    code, out, _ = run(capsys, "qv", "--path", "step_path", "--functional", "linear-sig", "--u", "(0,0)")
    assert code == 0
    code, out, _ = run(capsys, "derive", "--path", "levy_jump", "--functional", "levy-area", "--k", "2", "--t", "0.5")
    assert code == 0 and len(out.splitlines()) == 5
    code, out, _ = run(capsys, "rie", "--path", "dyadic_steps")
    assert code == 0
    code, out, _ = run(capsys, "integrate", "--kind", "rough", "--functional", "linear-sig", "--u", "(1,2)",
                       "--levels", "8")
    assert code == 0
