import json
import subprocess
import sys

import pytest

from qfikit.cli import dumps, main

H_EXPR = "(+ (* 1/2 (+ (^ vx 2) (^ vy 2) (^ vz 2))) (* -1 (^ (+ (^ x 2) (^ y 2) (^ z 2)) -1/2)))"
H_BAD = "(+ (* 1/2 (+ (^ vx 2) (^ vy 2) (^ vz 2))) (* -1001/1000 (^ (+ (^ x 2) (^ y 2) (^ z 2)) -1/2)))"


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr().out
    return code, out


@pytest.fixture
def files(tmp_path):
    def write(name, data):
        p = tmp_path / name
        p.write_text(json.dumps(data))
        return str(p)
    return write


def test_kt_basis_rank_and_determinism(tmp_path, capsys):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    code, out = run(["kt-basis", "--out", str(a)], capsys)
    assert code == 0 and json.loads(out)["rank"] == 20
    run(["kt-basis", "--out", str(b)], capsys)
    assert a.read_bytes() == b.read_bytes()


def test_kt_basis_plane(capsys):
    code, out = run(["kt-basis", "--dim", "2"], capsys)
    assert code == 0 and json.loads(out)["rank"] == 6


def test_kt_basis_bad_path(capsys):
    code, _ = run(["kt-basis", "--out", "/nonexistent-dir/report.json"], capsys)
    assert code == 2


def test_check_pass_and_fail(files, capsys):
    sysf = files("sys.json", {"nu": "1", "omega": "1"})
    code, out = run(["check", sysf, files("h.json", {"expr": H_EXPR})], capsys)
    assert code == 0 and json.loads(out)["all_zero"]
    code, out = run(["check", sysf, files("bad.json", {"expr": H_BAD})], capsys)
    rep = json.loads(out)
    assert code == 1
    assert rep["conditions"]["vector_balance"]["zero"] is False
    assert "witness" in rep["conditions"]["vector_balance"]


def test_check_input_errors(files, capsys):
    cand = files("h.json", {"expr": H_EXPR})
    assert run(["check", files("zero.json", {"nu": "1", "omega": "0"}), cand], capsys)[0] == 2
    assert run(["check", files("nosys.json", {"Q": ["x"]}), cand], capsys)[0] == 2
    assert run(["check", "/no/such/file.json", cand], capsys)[0] == 2
    assert run(["check", files("sys.json", {"nu": "1", "omega": "1"}), files("c.json", {"Kab": 1})], capsys)[0] == 2


def test_catalog_verify_kepler_suites(capsys):
    code, out = run(["catalog-verify", "--nu", "1"], capsys)
    rep = json.loads(out)
    assert code == 0 and rep["ok"]
    keys = {e["key"] for e in rep["entries"]}
    assert {"E2,A_i", "E3"} <= keys
    assert all(s["ok"] for s in rep["suites"])


def test_catalog_verify_unknown_key(capsys):
    assert run(["catalog-verify", "--key", "nope"], capsys)[0] == 2


def test_orbit_conic_report(tmp_path, capsys):
    csv_path = tmp_path / "orbit.csv"
    code, out = run(["orbit", "--b1", "0", "--csv", str(csv_path)], capsys)
    rep = json.loads(out)
    assert code == 0 and rep["orbit"] == "conic" and "alpha" in rep
    assert csv_path.read_text().splitlines()[0] == "t,x,y,z,vx,vy,vz"


def test_orbit_usage_errors(capsys):
    assert run(["orbit", "--interval", "5:1"], capsys)[0] == 2
    assert run(["orbit", "--vx0", "1", "--vy0", "0"], capsys)[0] == 2
    assert run(["orbit", "--tol-rel", "-1"], capsys)[0] == 2


def test_lane_emden_case5(capsys):
    code, out = run(["lane-emden", "--k", "1", "--mu", "5", "--c", "1,0,0"], capsys)
    rep = json.loads(out)
    assert code == 0 and rep["label"] == "Case 5" and rep["drift"]["max_rel"] <= 1e-8


def test_lane_emden_json_input(files, capsys):
    code, out = run(["lane-emden", "--json", files("le.json", {"k": 2, "mu": 3, "c": [0, 0, 1]})], capsys)
    assert code == 0 and json.loads(out)["label"] == "Case 4"


def test_lane_emden_singular_start_fails(capsys):
    # log t vanishes at t = 1, where omega of this case is singular
    code, _ = run(["lane-emden", "--k", "1", "--mu", "2", "--c", "0,1,0"], capsys)
    assert code == 1
    code, _ = run(["lane-emden", "--k", "1", "--mu", "2", "--c", "0,1,0", "--interval", "2:5"], capsys)
    assert code == 0


def test_drift_subcommand_is_order_stable(tmp_path, capsys):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    code, _ = run(["drift", "--key", "H_nu", "--key", "Lewis", "--jobs", "2", "--out", str(a)], capsys)
    assert code == 0
    run(["drift", "--key", "H_nu", "--key", "Lewis", "--out", str(b)], capsys)
    assert a.read_bytes() == b.read_bytes()


def test_usage_errors(capsys):
    assert main([]) == 2
    assert main(["no-such-command"]) == 2
    assert main(["drift", "--jobs", "0"]) == 2
    capsys.readouterr()


def test_floats_have_17_digits():
    assert dumps({"a": 0.1}) == '{\n  "a": 0.10000000000000001\n}'
    assert dumps([1, 2.5, "x", None]) == '[1, 2.5, "x", null]'


def test_console_entry_point():
    out = subprocess.run([sys.executable, "-m", "qfikit.cli", "kt-basis", "--dim", "2"], capture_output=True, text=True)
    assert out.returncode == 0 and '"rank": 6' in out.stdout
