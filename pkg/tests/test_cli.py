import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from wbiharm import cli
from wbiharm.exponents import ProblemParams
from wbiharm.radial_ode import DEFAULT_RTOL
from wbiharm.transform import RadialProfile
from wbiharm.variational import ConvergenceError


def run(tmp_path, cfg, *extra, name="cfg.json", out="out"):
    path = tmp_path / name
    path.write_text(cfg if isinstance(cfg, str) else json.dumps(cfg))
    return cli.main(["--config", str(path), "--out", str(tmp_path / out), "--quiet", *extra])


def summary(tmp_path, out="out"):
    return json.loads((tmp_path / out / "summary.json").read_text())


def test_parse_minimal_shoot_defaults():
    cfg = cli.parse_config('{"command": "shoot", "N": 5, "alpha": 0, "l": 0, "p": 3, "R": 1}')
    assert cfg.command == "shoot"
    assert cfg.params == ProblemParams(5, 0, 0, 3)
    assert cfg.options["tol"] == DEFAULT_RTOL and cfg.options["n_nodes"] == 4096
    eff = cfg.effective()
    assert eff["tol"] == DEFAULT_RTOL and eff["R"] == 1


def test_parse_rejects_small_p(tmp_path, capsys):
    assert run(tmp_path, {"command": "shoot", "N": 5, "alpha": 0, "l": 0, "p": 0.5}) == cli.EXIT_VALIDATION
    assert "p > 1" in capsys.readouterr().err


def test_parse_rejects_unknown_key(tmp_path, capsys):
    with pytest.raises(cli.ConfigError, match="alpha2"):
        cli.parse_config('{"command": "shoot", "N": 5, "alpha": 0, "alpha2": 1, "l": 0, "p": 3}')
    assert run(tmp_path, {"command": "eigen", "N": 5, "alpha": 0, "alpha2": 0, "l": 0, "p": 3}) == cli.EXIT_VALIDATION
    assert "alpha2" in capsys.readouterr().err


@pytest.mark.parametrize(
    "text",
    ['{"command": "shoot", "N": 5', "[1, 2]", '{"command": "plot"}', '{"command": "shoot", "N": 5, "alpha": 0, "l": 0}', '{"command": "pohozaev", "N": 5, "alpha": 0, "l": 0, "p": 3}'],
)
def test_parse_malformed_or_incomplete(text):
    with pytest.raises(cli.ConfigError):
        cli.parse_config(text)


def test_exponents_exact_critical(tmp_path):
    assert run(tmp_path, {"command": "exponents", "N": 5, "alpha": 2, "l": 0}) == 0
    s = summary(tmp_path)
    assert s["results"]["exact"]["p_s"] == "7/3"
    assert s["inputs"]["p"] == "p_s"
    assert s["schema_version"] == cli.SCHEMA_VERSION


def test_scan_no_positive_rows(tmp_path):
    cfg = {"command": "scan", "N": 5, "alpha": 0, "l": 0, "p_grid": [2, 3, 4, 5, 6, 7, 8]}
    assert run(tmp_path, cfg) == 0
    rows = list(csv.DictReader((tmp_path / "out" / "scan.csv").open()))
    assert len(rows) == 7 * 40
    assert not any("PositiveOnWindow" in ",".join(r.values()) for r in rows)
    assert summary(tmp_path)["results"]["positive_on_window"] == 0


def test_shoot_then_pohozaev_and_asymptotics(tmp_path):
    base = {"N": 5, "alpha": 0, "l": 0, "p": 3}
    assert run(tmp_path, {"command": "shoot", **base}, out="s") == 0
    prof = str(tmp_path / "s" / "profile.csv")
    assert run(tmp_path, {"command": "pohozaev", "profile": prof, **base}, name="p.json", out="p") == 0
    rep = json.loads((tmp_path / "p" / "pohozaev.json").read_text())
    assert rep["relative_residual"] < 1e-4
    assert run(tmp_path, {"command": "asymptotics", "profile": prof, **base}, name="a.json", out="a") == 0
    res = summary(tmp_path, "a")["results"]
    assert res["fits"]["w"]["rate"] == pytest.approx(0.5, rel=0.05)
    assert (tmp_path / "a" / "bounds.csv").exists()


def test_profile_round_trip_precision(tmp_path):
    assert run(tmp_path, {"command": "shoot", "N": 5, "alpha": 0, "l": 0, "p": 3, "n_nodes": 256}) == 0
    text = (tmp_path / "out" / "profile.csv").read_text()
    P = ProblemParams(5, 0, 0, 3).as_float()
    prof = RadialProfile.from_csv(text, P)
    assert RadialProfile.from_csv(prof.to_csv(), P).to_csv() == prof.to_csv()
    raw = np.loadtxt((tmp_path / "out" / "profile.csv"), delimiter=",", skiprows=1)
    assert np.array_equal(raw[:, 1], prof.u)


def test_determinism(tmp_path):
    for cfg in ({"command": "shoot", "N": 5, "alpha": 0, "l": 0, "p": 3, "n_nodes": 512}, {"command": "eigen", "N": 5, "alpha": 0, "l": 0, "p": 3, "n": 400}):
        assert run(tmp_path, cfg, out="a") == 0
        assert run(tmp_path, cfg, out="b") == 0
        for f in (tmp_path / "a").iterdir():
            assert f.read_bytes() == (tmp_path / "b" / f.name).read_bytes()


def test_minimize_and_eigen(tmp_path):
    base = {"N": 5, "alpha": 0, "l": 0, "p": 3, "n": 800}
    assert run(tmp_path, {"command": "eigen", **base}, out="e") == 0
    lam = summary(tmp_path, "e")["results"]["lambda1"]
    assert lam == pytest.approx(407.66, rel=2e-3)
    assert run(tmp_path, {"command": "minimize", "q": 2, **base}, out="m") == 0
    assert summary(tmp_path, "m")["results"]["value"] == pytest.approx(lam, rel=1e-8)


def test_exit_codes_io(tmp_path):
    assert cli.main(["--config", str(tmp_path / "missing.json"), "--quiet"]) == cli.EXIT_IO
    blocker = tmp_path / "file"
    blocker.write_text("x")
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"command": "exponents", "N": 5, "alpha": 0, "l": 0}))
    assert cli.main(["--config", str(cfg), "--out", str(blocker / "sub"), "--quiet"]) == cli.EXIT_IO
    bad = {"command": "pohozaev", "N": 5, "alpha": 0, "l": 0, "p": 3, "profile": str(tmp_path / "nope.csv")}
    assert run(tmp_path, bad) == cli.EXIT_IO


def test_exit_code_convergence(tmp_path, monkeypatch):
    def fail(cfg, out, jobs):
        raise ConvergenceError("iteration cap reached", None)

    monkeypatch.setitem(cli.RUNNERS, "eigen", fail)
    assert run(tmp_path, {"command": "eigen", "N": 5, "alpha": 0, "l": 0, "p": 3}) == cli.EXIT_CONVERGENCE
    assert not (tmp_path / "out" / "summary.json").exists()


def test_tol_flag(tmp_path):
    cfg = {"command": "exponents", "N": 5, "alpha": 0, "l": 0}
    assert run(tmp_path, cfg, "--tol", "1e-9") == cli.EXIT_VALIDATION


def test_module_entry_point(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"command": "exponents", "N": 5, "alpha": 0, "l": 0, "p": 2}))
    proc = subprocess.run([sys.executable, "-m", "wbiharm", "--config", str(cfg), "--out", str(tmp_path)], capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["derived"]["p_s"] == pytest.approx(9.0)
