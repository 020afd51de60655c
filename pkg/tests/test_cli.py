import json

import pytest

from nlsplice.cli import ConfigError, DEFAULTS, main, resolve_config


def _write(path, text):
    path.write_text(text)
    return str(path)


def test_resolve_config_defaults_and_override(tmp_path):
    assert resolve_config("jump1d") == DEFAULTS["jump1d"]
    cfg = resolve_config("jump1d", _write(tmp_path / "c.toml",
                                          "schema_version = 1\n[jump1d]\ndelta = 0.2\n"))
    assert cfg["delta"] == 0.2 and cfg["spaces"] == ["P1", "P0"]


@pytest.mark.parametrize("text", [
    "[jump1d]\ndelta = 0.2\n",
    "schema_version = 2\n",
    "schema_version = 1\n[jump]\ndelta = 0.2\n",
    "schema_version = 1\n[jump1d]\nhorizon = 0.2\n",
    "schema_version = 1\n[jump1d]\nspaces = \"P1\"\n",
    "schema_version = 1\n[patch]\nwith_opt = 1\n",
])
def test_resolve_config_rejects(tmp_path, text):
    cmd = "patch" if "[patch]" in text else "jump1d"
    with pytest.raises(ConfigError):
        resolve_config(cmd, _write(tmp_path / "c.toml", text))


def test_main_returns_2_on_bad_config(tmp_path, capsys):
    path = _write(tmp_path / "c.toml", "schema_version = 1\n[patch]\nfoo = 1\n")
    assert main(["patch", "--config", path, "--out", str(tmp_path / "o")]) == 2
    assert main(["patch", "--threads", "0", "--out", str(tmp_path / "o")]) == 2
    assert main(["patch", "--config", str(tmp_path / "missing.toml"),
                 "--out", str(tmp_path / "o")]) == 2


def test_dump_matrix_outputs_are_reproducible(tmp_path, capsys):
    cfg = _write(tmp_path / "c.toml",
                 "schema_version = 1\n[dump-matrix]\nh = 0.25\ndelta = 0.5\ns = 0.4\n")
    for name in ("a", "b"):
        assert main(["dump-matrix", "--config", cfg, "--out", str(tmp_path / name),
                     "--spy", "--threads", "1"]) == 0
    stem = "nonlocal_fractional_1d_P1"
    for f in (stem + ".mtx", stem + "_spy.csv", "config.resolved.toml"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
    summary = [json.loads(line) for line in open(tmp_path / "a" / "summary.jsonl")]
    assert summary[0]["command"] == "dump-matrix"
    assert summary[0]["matrix"]["shape"] == [13, 13]
    printed = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert stem + ".mtx" in printed["files"]


def test_patch_1d_csv_is_reproducible(tmp_path, capsys):
    cfg = _write(tmp_path / "c.toml",
                 "schema_version = 1\n[patch]\nh = 0.1\ndelta = 0.2\nwith_opt = false\n")
    for name in ("a", "b"):
        assert main(["patch", "--config", cfg, "--out", str(tmp_path / name)]) == 0
    a = (tmp_path / "a" / "patch_1d.csv").read_bytes()
    assert a == (tmp_path / "b" / "patch_1d.csv").read_bytes()
    header = a.decode().splitlines()[0]
    assert header == ("case,space,kernel,max_nodal_error,fully_nonlocal_max_error,splice_L2,"
                      "fully_nonlocal_L2,identity_error,residual,n")
    sol = (tmp_path / "a" / "splice_patch_linear_1d_P1P1_solution.csv").read_text()
    assert sol.splitlines()[0] == "dof,side,x,h_S,u"


def test_verify_cases_and_jump(tmp_path, capsys):
    cfg = _write(tmp_path / "c.toml", "schema_version = 1\n[verify-cases]\n"
                 "cases = [\"jump_1d\", \"patch_linear_1d\"]\nn_points = 5\n")
    assert main(["verify-cases", "--config", cfg, "--out", str(tmp_path / "v")]) == 0
    rep = json.loads(open(tmp_path / "v" / "summary.jsonl").readline())
    assert rep["cases"]["jump_1d"]["pass"] and rep["cases"]["patch_linear_1d"]["pass"]
    assert main(["jump1d", "--out", str(tmp_path / "j")]) == 0
    lines = (tmp_path / "j" / "jump_1d.csv").read_text().splitlines()
    assert lines[0] == "space,splice_L2,fully_nonlocal_L2,identity_error,residual,n"
    assert [l.split(",")[0] for l in lines[1:]] == ["P1-P1", "P0-P1"]


def test_unknown_case_is_reported(tmp_path):
    cfg = _write(tmp_path / "c.toml", "schema_version = 1\n[verify-cases]\ncases = [\"x\"]\n")
    with pytest.raises(RuntimeError, match="unknown case"):
        main(["verify-cases", "--config", cfg, "--out", str(tmp_path / "v")])
