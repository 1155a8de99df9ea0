import csv
import json

import pytest

from vlasov_spectral import __version__
from vlasov_spectral.cli import main, read_csv, resolve, run

LANDAU = {
    "equilibrium": {"family": "maxwellian"},
    "wave": {"k_perp": 0.0, "k_par": 0.5},
    "numerics": {"n_par": 64, "n_perp": 12, "v_cut": 7.0},
}


def scenario(command, **kw):
    return {**LANDAU, "command": {"name": command, **kw}}


def load(path):
    return json.loads(path.read_text())


def data_rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(line for line in fh if not line.startswith("#")))


def test_resolve_fills_defaults():
    cfg = resolve(scenario("find-roots"))
    assert cfg["numerics"]["m_max"] == 0
    assert isinstance(cfg["numerics"]["n_max"], int)
    assert cfg["command"]["region"] == [-4.0, 4.0, 0.05, 2.0]
    assert cfg["wave"]["omega_p"] == 1.0


def test_dispersion_scan(tmp_path):
    assert run(scenario("dispersion-scan", re_range=[0.5, 2.0], im=0.3, n_points=7), tmp_path) == 0
    rows = data_rows(tmp_path / "scan.csv")
    assert rows[0] == ["re_z", "im_z", "re_eps", "im_eps"]
    assert len(rows) == 8
    assert float(rows[1][0]) == 0.5 and float(rows[1][1]) == 0.3


def test_find_roots_without_plasma_is_empty(tmp_path):
    cfg = scenario("find-roots")
    cfg["wave"] = {"k_perp": 0.0, "k_par": 0.5, "omega_p": 0.0}
    assert run(cfg, tmp_path) == 0
    rows = data_rows(tmp_path / "roots.csv")
    assert rows == [["re_z", "im_z", "residual", "count_check"]]


def test_find_roots_two_stream(tmp_path):
    cfg = {"equilibrium": {"family": "two-stream", "params": {"drift": 2.0, "vt": 0.3}},
           "wave": {"k_perp": 0.0, "k_par": 0.3}, "numerics": {"n_par": 128, "n_perp": 8},
           "command": {"name": "find-roots", "region": [-3, 3, 0.02, 2]}}
    assert run(cfg, tmp_path) == 0
    rows = data_rows(tmp_path / "roots.csv")[1:]
    assert len(rows) == 1
    assert float(rows[0][1]) == pytest.approx(0.3431728701833328, abs=1e-6)
    assert rows[0][3] == "ok"


def test_evolve_at_zero_reproduces_initial_field(tmp_path):
    assert run(scenario("evolve", times=[0.0]), tmp_path) == 0
    report = load(tmp_path / "evolve_report.json")
    assert report["t0_field_error"] < 1e-6


def test_outputs_are_byte_identical(tmp_path):
    cfg = scenario("evolve", times=[0.0, 2.0])
    assert run(cfg, tmp_path / "a") == 0
    assert run(cfg, tmp_path / "b") == 0
    for name in ("evolve.csv", "evolve_report.json", "report.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_config_and_version_embedded(tmp_path):
    run(scenario("dispersion-scan", n_points=3), tmp_path)
    header = [line for line in (tmp_path / "scan.csv").read_text().splitlines()
              if line.startswith("#")]
    assert header[0] == f"# vlasov_spectral {__version__}"
    embedded = json.loads(header[1][len("# config "):])
    assert embedded["numerics"]["n_par"] == 64
    assert embedded["command"]["n_points"] == 3
    meta = load(tmp_path / "report.json")["meta"]
    assert meta["version"] == __version__ and meta["config"] == embedded
    _, rows = read_csv(tmp_path / "scan.csv")
    assert len(rows) == 3


@pytest.mark.parametrize("bad", [
    {"wave": {"k_perp": -1.0, "k_par": 0.5}},
    {"numerics": {"n_par": 2}},
    {"numerics": {"bogus": 1}},
    {"command": {"name": "no-such-command"}},
])
def test_schema_errors_exit_2(tmp_path, bad):
    cfg = {**scenario("find-roots"), **bad}
    assert run(cfg, tmp_path) == 2
    err = load(tmp_path / "error.json")
    assert err["kind"] == "config" and err["problems"]
    assert not (tmp_path / "report.json").exists()


def test_unknown_initial_family_exit_2(tmp_path):
    assert run(scenario("evolve", initial_field={"family": "maxwellian-bump", "width": 2}), tmp_path) == 2


def test_numerical_failure_exit_1(tmp_path):
    cfg = scenario("evolve", times=[1.0], contour={"tol": 1e-30, "n_nodes": 2})
    assert run(cfg, tmp_path) == 1
    assert load(tmp_path / "error.json")["kind"] != "config"


def test_main_threads_and_command_override(tmp_path, monkeypatch):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(scenario("find-roots", n_points=4)))
    monkeypatch.setenv("VLASOV_THREADS", "1")
    assert main(["--config", str(path), "--out", str(tmp_path / "o"), "--threads", "1",
                 "--command", "dispersion-scan"]) == 0
    assert (tmp_path / "o" / "scan.csv").exists()
    assert main(["--config", str(path), "--out", str(tmp_path / "p"), "--threads", "0",
                 "--command", "dispersion-scan"]) == 0
    assert main(["--config", str(tmp_path / "missing.json"), "--out", str(tmp_path)]) == 2


def test_compare_landau(tmp_path):
    assert run(scenario("compare", times=[0.0, 5.0, 10.0]), tmp_path) == 0
    report = load(tmp_path / "compare.json")
    assert report["max_rel_deviation"] < 1e-3
    assert report["within_tolerance"] is True


@pytest.mark.slow
def test_mode_audit(tmp_path):
    cfg = {"equilibrium": {"family": "two-stream", "params": {"drift": 2.0, "vt": 0.3}},
           "wave": {"k_perp": 0.3, "k_par": 0.4, "omega_0": 1.0},
           "numerics": {"n_par": 96, "n_perp": 24, "v_cut": 5.0},
           "command": {"name": "mode-audit", "region": [-3, 3, 0.02, 2], "real_mu": [0.7],
                       "refinement": [32, 64, 128]}}
    assert run(cfg, tmp_path) == 0
    audit = load(tmp_path / "mode_audit.json")
    assert len(audit["complex"]) == 2
    for entry in audit["complex"]:
        res = [r["residual"] for r in entry["residuals"]]
        assert res[0] > res[1] > res[2]
    assert max(max(row) for row in audit["orthogonality"]) < 1e-6
