import json
import shutil
import subprocess

import numpy as np
import pytest

from shiftalg import cli
from shiftalg import fuzzy as fz

GOLDEN_PLUS = [[0, 0, 0], [2, 0, 0], [0, 2, 0]]
GOLDEN_MINUS = [[0, 2, 0], [0, 0, 2], [0, 0, 0]]


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def run_json(capsys, *argv):
    code, out, err = run(capsys, *argv)
    assert code == 0, err
    return json.loads(out)


def dense(op):
    m = np.zeros((op["dim"], op["dim"]), dtype=complex)
    for r, c, re_, im in op["triplets"]:
        m[r, c] = re_ + 1j * im
    return m


class TestLatticeCommands:
    def test_classify_diagonal(self, capsys):
        d = run_json(capsys, "classify", "--R", "2 0; 0 3", "--delta", "0 0")
        assert d["H"] == [[2, 0], [0, 3]]
        assert d["delta0"] == ["0", "0"]
        assert d["N_R"] == 6
        assert len(d["coset_representatives"]) == 6

    def test_classify_fractional_part(self, capsys):
        d = run_json(capsys, "classify", "--R", "1", "--delta", "7/5")
        assert d["H"] == [[1]] and d["delta0"] == ["2/5"]

    def test_singular_R_is_input_error(self, capsys):
        code, _, err = run(capsys, "classify", "--R", "1 2; 2 4", "--delta", "0 0")
        assert code == 2 and "error" in err

    @pytest.mark.parametrize("R2, d2, expected", [
        ("0 3; 2 0", "0 0", True),
        ("2 0; 0 3", "1/2 0", True),
        ("2 0; 0 3", "1/4 0", False),
        ("6 0; 0 1", "0 0", False),
    ])
    def test_iso(self, capsys, R2, d2, expected):
        d = run_json(capsys, "iso", "--R1", "2 0; 0 3", "--delta1", "0 0", "--R2", R2, "--delta2", d2)
        assert d["isomorphic"] is expected
        assert d["criteria"] is expected

    def test_hnf(self, capsys):
        d = run_json(capsys, "hnf", "--M", "2 4; 1 3")
        assert d["H"] == [[1, 1], [0, 2]]
        assert d["det"] == 2
        assert d["smith_diagonal"] == [1, 2]
        assert (np.array(d["U"]) @ np.array(d["H"])).tolist() == [[2, 4], [1, 3]]

    def test_non_integer_matrix_rejected(self, capsys):
        assert run(capsys, "hnf", "--M", "1/2 0; 0 1")[0] == 2


class TestFuzzyCommands:
    def test_golden(self, capsys):
        d = run_json(capsys, "fuzzy1d", "--f", "9/4 - u1^2", "--hbar", "1", "--delta", "0")
        assert d["dim"] == 3
        assert dense(d["operators"]["A+"]).real.tolist() == GOLDEN_PLUS
        assert dense(d["operators"]["A-"]).real.tolist() == GOLDEN_MINUS
        assert all(r["passed"] for r in d["report"])

    def test_sequence(self, capsys):
        d = run_json(capsys, "fuzzy1d", "--f", "9/4 - u1^2", "--u1", "-3/2", "--u2", "3/2",
                     "--sequence", "3,5,7")
        assert [r["dim"] for r in d["sequence"]] == [3, 5, 7]

    def test_window_not_found(self, capsys):
        assert run(capsys, "fuzzy1d", "--f", "u1^2 + 1", "--hbar", "1", "--n-max", "5")[0] == 3

    def test_bad_expression(self, capsys):
        assert run(capsys, "fuzzy1d", "--f", "9/4 - u1^^2", "--hbar", "1")[0] == 2

    def test_sphere(self, capsys):
        d = run_json(capsys, "sphere", "--radius", "1", "--k", "2")
        assert d["dim"] == 5
        assert all(r["passed"] or r["informational"] for r in d["report"])

    def test_catenoid_and_plane(self, capsys):
        d = run_json(capsys, "catenoid", "--radius", "1", "--hbar", "1/2", "--cutoff", "6")
        assert all(r["passed"] for r in d["report"])
        d = run_json(capsys, "plane", "--c", "1/3", "--hbar", "1", "--cutoff", "8")
        assert all(r["passed"] for r in d["report"])

    def test_fuzzy2d_simplex(self, capsys):
        d = run_json(capsys, "fuzzy2d", "simplex", "--N", "4")
        assert d["dim"] == 15

    def test_lie_su2(self, capsys):
        d = run_json(capsys, "lie", "--preset", "su2", "--level", "3")
        assert d["dim"] == 4
        assert d["irreducible"] is True
        assert all(r["passed"] for r in d["report"] if not r["informational"])

    def test_lie_from_files(self, capsys, tmp_path):
        from shiftalg import liealg as la
        rm = la.su2_pauli()
        (tmp_path / "f.json").write_text(json.dumps(rm.sc.to_json()))
        (tmp_path / "x.json").write_text(json.dumps(rm.to_json()))
        d = run_json(capsys, "lie", "--structure", str(tmp_path / "f.json"),
                     "--matrices", str(tmp_path / "x.json"), "--level", "2")
        assert d["dim"] == 3

    def test_lie_bad_structure_file(self, capsys, tmp_path):
        (tmp_path / "f.json").write_text("{not json")
        assert run(capsys, "lie", "--structure", str(tmp_path / "f.json"), "--level", "2")[0] == 2


class TestVerify:
    def test_round_trip_through_file(self, capsys, tmp_path):
        path = tmp_path / "rep.json"
        assert run(capsys, "fuzzy2d", "quadrant", "--cutoff", "5", "--hbar", "1/2", "--out", str(path))[0] == 0
        rep = fz.FuzzyRep.from_json(json.loads(path.read_text()))
        assert rep.dim == 36
        d = run_json(capsys, "verify", "--rep", str(path))
        assert d["dim"] == 36 and all(r["passed"] for r in d["report"])

    def test_extra_relation_failure(self, capsys, tmp_path):
        path = tmp_path / "rep.json"
        run(capsys, "fuzzy1d", "--f", "9/4 - u1^2", "--hbar", "1", "--out", str(path))
        code, out, err = run(capsys, "verify", "--rep", str(path), "--relation", "[A+,A-] = 0")
        assert code == 3 and "extra1" in err
        code, _, _ = run(capsys, "verify", "--rep", str(path), "--relation", "[u,A+] = hbar*A+")
        assert code == 0

    def test_irreducible_flag(self, capsys, tmp_path):
        path = tmp_path / "rep.json"
        run(capsys, "sphere", "--radius", "1", "--k", "3", "--out", str(path))
        d = run_json(capsys, "verify", "--rep", str(path), "--irreducible")
        assert d["commutant_dim"] == 1

    def test_missing_file(self, capsys, tmp_path):
        assert run(capsys, "verify", "--rep", str(tmp_path / "nope.json"))[0] == 2


class TestLevelset:
    def test_csv_file(self, capsys, tmp_path):
        path = tmp_path / "spindle.csv"
        code, _, _ = run(capsys, "levelset", "--f", "9/4 - u1^2", "--u1", "-3/2", "--u2", "3/2",
                         "--nu", "60", "--nphi", "60", "--out", str(path))
        assert code == 0
        rows = path.read_text().splitlines()
        assert rows[0] == "x,y,z"
        pts = np.array([[float(v) for v in r.split(",")] for r in rows[1:]])
        f = 9 / 4 - pts[:, 2] ** 2
        assert np.max(np.abs(pts[:, 0] ** 2 + pts[:, 1] ** 2 - f ** 2)) < 1e-9

    def test_json_format(self, capsys):
        d = run_json(capsys, "--format", "json", "levelset", "--f", "1", "--u1", "0", "--u2", "1",
                     "--nu", "2", "--nphi", "3")
        assert len(d["points"]) == 6


class TestGlobals:
    def test_flags_after_subcommand(self, capsys):
        a = run(capsys, "--seed", "3", "sphere", "--radius", "1", "--k", "1")
        b = run(capsys, "sphere", "--radius", "1", "--k", "1", "--seed", "3")
        assert a == b

    def test_deterministic_output(self, capsys):
        argv = ("--seed", "7", "lie", "--preset", "su3", "--level", "2")
        assert run(capsys, *argv)[1] == run(capsys, *argv)[1]

    def test_csv_export(self, capsys):
        code, out, _ = run(capsys, "--format", "csv", "fuzzy1d", "--f", "9/4 - u1^2", "--hbar", "1")
        assert code == 0
        lines = out.splitlines()
        assert lines[0] == "rep,operator,row,col,re,im"
        assert "0,A+,1,0,2,0" in lines

    def test_env_tolerance(self, capsys, monkeypatch):
        # the sphere check carries float rounding, so an absurdly tight tolerance fails it
        monkeypatch.setenv("SHIFTALG_TOL", "1e-30")
        assert run(capsys, "sphere", "--radius", "1", "--k", "5")[0] == 3
        monkeypatch.setenv("SHIFTALG_TOL", "abc")
        assert run(capsys, "sphere", "--radius", "1", "--k", "1")[0] == 2

    def test_tol_flag_overrides_env(self, capsys, monkeypatch):
        monkeypatch.setenv("SHIFTALG_TOL", "1e-30")
        assert run(capsys, "sphere", "--radius", "1", "--k", "5", "--tol", "1e-9")[0] == 0

    @pytest.mark.parametrize("argv", [[], ["bogus"], ["classify", "--R", "1"], ["sphere", "--radius", "x", "--k", "1"]])
    def test_usage_errors(self, capsys, argv):
        assert run(capsys, *argv)[0] == 2

    def test_help(self, capsys):
        assert run(capsys, "--help")[0] == 0


@pytest.mark.skipif(shutil.which("shiftalg") is None, reason="console script not installed")
def test_console_script():
    res = subprocess.run(["shiftalg", "classify", "--R", "2 0; 0 3", "--delta", "0 0"],
                         capture_output=True, text=True)
    assert res.returncode == 0
    assert json.loads(res.stdout)["N_R"] == 6
