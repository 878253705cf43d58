import json
import subprocess
import sys

import pytest

from metsob.cli import main
from metsob.space import load_field, load_space, save_field


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    return tmp_path_factory.mktemp("cli")


def test_gen_and_whitney(capsys, workdir):
    sp = workdir / "sq.msp"
    code, out, _ = run(capsys, "gen", "--domain", "square", "--res", 16, "--out", sp, "--fields", 3)
    assert code == 0
    info = json.loads(out)
    assert info["interior"] == 256 and info["boundary"] == 128
    assert (workdir / "sq_corpus" / "manifest.json").exists()
    code, out, _ = run(capsys, "whitney", "--space", sp, "--out", workdir / "cover.json", "--check")
    assert code == 0 and json.loads(out)["check"]["passed"]


def test_gen_is_deterministic(capsys, workdir):
    a, b = workdir / "a.msp", workdir / "b.msp"
    run(capsys, "gen", "--domain", "cusp", "--res", 32, "--out", a)
    run(capsys, "gen", "--domain", "cusp", "--res", 32, "--out", b)
    assert a.read_bytes() == b.read_bytes()


def test_extend_both_modes(capsys, workdir):
    sp = workdir / "sq.msp"
    f = workdir / "sq_corpus" / "field_0000.fld"
    for mode in ("besov", "lp"):
        out_json = workdir / f"ext_{mode}.json"
        field_out = workdir / f"F_{mode}.fld"
        code, _, _ = run(capsys, "extend", "--mode", mode, "--space", sp, "--cover", workdir / "cover.json",
                         "--bfield", f, "--p", 2, "--k-max", 6, "--vartheta", 1, "--out", out_json,
                         "--field-out", field_out)
        assert code == 0
        doc = json.loads(out_json.read_text())
        assert doc["mode"] == mode and doc["schema"] == 1
        F = load_field(load_space(sp), field_out)
        assert F.region.value == "mu"
    lp = json.loads((workdir / "ext_lp.json").read_text())
    assert all(lp["invariants"].values()) and lp["layer_table"]


def test_trace_command(capsys, workdir):
    sp = workdir / "sq.msp"
    space = load_space(sp)
    fld = workdir / "u.fld"
    save_field(space, space.field("mu", lambda X: X[:, 0]), fld)
    code, _, _ = run(capsys, "trace", "--space", sp, "--field", fld, "--k-max", 6, "--alpha", 0.3,
                     "--out", workdir / "tr.json", "--trace-out", workdir / "tr.fld")
    assert code == 0
    doc = json.loads((workdir / "tr.json").read_text())
    assert len(doc["radii"]) == len(doc["cauchy_gaps"]) + 1
    assert "0.3" in doc["besov_seminorms"]


def test_run_writes_outputs(capsys, workdir):
    out = workdir / "res"
    code, stdout, _ = run(capsys, "run", "--experiment", "E2", "--res", 32, 64, "--out", out)
    assert json.loads(stdout) == {"E2_WeightedSquare": code == 0}
    assert (out / "report.json").exists() and (out / "tables.csv").exists()


def test_freeze_and_check(capsys, workdir):
    k1, k2 = workdir / "k1.json", workdir / "k2.json"
    only = ["whitney_overlap.square"]
    assert run(capsys, "freeze", "--out", k1, "--only", *only)[0] == 0
    assert run(capsys, "freeze", "--out", k2, "--only", *only)[0] == 0
    assert k1.read_bytes() == k2.read_bytes()
    code, out, _ = run(capsys, "check", "--constants", k1, "--only", *only)
    assert code == 0 and json.loads(out)["passed"]


def test_errors_exit_with_code_two(capsys, workdir):
    code, _, err = run(capsys, "whitney", "--space", workdir / "missing.msp", "--out", workdir / "x.json")
    assert code == 2
    assert json.loads(err)["error"] in ("FileNotFoundError", "OSError")
    code, _, err = run(capsys, "run", "--experiment", "E9", "--out", workdir / "r")
    assert code == 2 and "unknown experiment" in json.loads(err)["message"]


def test_usage_errors():
    with pytest.raises(SystemExit) as e:
        main(["gen", "--domain", "torus", "--res", "8", "--out", "x"])
    assert e.value.code == 2


def test_console_script_entry_point():
    r = subprocess.run([sys.executable, "-m", "metsob.cli", "--help"], capture_output=True, text=True)
    assert r.returncode == 0 and "whitney" in r.stdout
