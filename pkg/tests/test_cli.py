import json

import pytest

from rpchain import cli

L1 = """\
model.ell = 1
model.g = 0.3
model.t = 0.01
interaction.kind = power_law
interaction.alpha = 1.5
phonon.n_max = 2
run.beta = 0.1, 0.5, 2
run.samples = 40
run.fields = 5
"""


def _cfg(tmp_path, text, name="run.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def _run(tmp_path, command, text, *extra):
    out = tmp_path / f"{command}.json"
    code = cli.main([command, "--config", _cfg(tmp_path, text), "--out", str(out), *extra])
    return code, json.loads(out.read_text())


def test_spectrum_free_fermions(tmp_path):
    code, rep = _run(tmp_path, "spectrum", "model.ell=3\nmodel.t=0.5\nphonon.n_max=0\n")
    assert code == 0
    assert rep["results"]["E0"] == pytest.approx(-2.0, abs=1e-10)
    assert rep["config"]["model"]["ell"] == 3
    assert "timings_s" in rep["meta"]


def test_check_conditions_nearest(tmp_path):
    code, rep = _run(tmp_path, "check-conditions", "model.ell=3\ninteraction.kind=nearest\ninteraction.U=1\n")
    res = rep["results"]
    assert res["B1"] and not res["B2"]
    assert not res["C2"] and res["C2_value"] == "inf"
    assert code == 1 and rep["passed"] is False


def test_irbound_report_and_csv(tmp_path):
    code, rep = _run(tmp_path, "irbound", L1, "--csv-dir", str(tmp_path / "csv"))
    assert code == 0
    res = rep["results"]
    assert res["sigma"] > 0 and res["t_star"] > 0.01
    assert (tmp_path / "csv" / "irbound_integrand.csv").exists()


@pytest.mark.parametrize("text,needle", [
    ("model.ell=1\nmodel.bogus=1\n", "line 2"),
    ("model.ell=one\n", "line 1"),
    ("model.ell=1\njust words\n", "line 2"),
    ("model.ell=1\ninteraction.kind=magic\n", "interaction.kind"),
    ("model.ell=0\n", "invalid model"),
    ("run.beta=-1\n", "run.beta"),
])
def test_config_errors_exit_two(tmp_path, capsys, text, needle):
    code = cli.main(["spectrum", "--config", _cfg(tmp_path, text)])
    assert code == 2
    assert needle in capsys.readouterr().err


def test_missing_config_file(tmp_path):
    assert cli.main(["spectrum", "--config", str(tmp_path / "nope.cfg")]) == 2


def test_odd_commands_reject_even_ell(tmp_path):
    assert cli.main(["paths", "--config", _cfg(tmp_path, "model.ell=2\nphonon.n_max=0\n")]) == 2


def test_seed_override_and_env_threads(tmp_path, monkeypatch):
    monkeypatch.setenv("RPCHAIN_THREADS", "2")
    code, rep = _run(tmp_path, "inequalities", L1, "--seed", "7")
    assert code == 0 and rep["config"]["seed"] == 7


def test_all_is_deterministic(tmp_path):
    path = _cfg(tmp_path, L1)
    cfg = cli.load_config(path)
    a = cli.run("all", cfg, threads=1)
    b = cli.run("all", cli.load_config(path), threads=3)
    assert a["passed"]
    assert cli.deterministic_part(a) == cli.deterministic_part(b)
    assert "positivity-background" in a["results"]


def test_json_cleaning():
    text = cli.to_json({"x": float("inf"), "z": 1 + 2j, "n": [1.5]})
    assert json.loads(text) == {"n": [1.5], "x": "inf", "z": [1.0, 2.0]}
