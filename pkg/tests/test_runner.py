import csv
import io
import json
import math

import pytest

from maxwellfem.cli import build_config, main
from maxwellfem.runner import ADAPTIVE_HEADER, CSV_HEADER, ExperimentConfig, run_experiment
from maxwellfem.system import ResidualTooLarge


def rows(text):
    return list(csv.reader(io.StringIO(text)))


def test_cavity_csv(tmp_path):
    out = tmp_path / "c.csv"
    text = run_experiment(ExperimentConfig("cavity", p=1, n0=4, nmax=16, out=str(out)))
    assert out.read_text() == text
    r = rows(text)
    assert r[0] == CSV_HEADER
    assert [int(x[1]) for x in r[1:]] == [88, 368, 1504]
    for row in r[1:]:
        assert float(row[7]) == pytest.approx(float(row[3]) / float(row[2]), rel=1e-10)
        assert float(row[6]) == 0


def test_byte_identical_reruns():
    cfg = ExperimentConfig("pml", p=1, n0=10, nmax=20)
    assert run_experiment(cfg) == run_experiment(cfg)


def test_scattering_csv():
    r = rows(run_experiment(ExperimentConfig("scattering", n0=10, iters=2)))
    assert r[0] == ADAPTIVE_HEADER
    assert [x[0] for x in r[1:]] == ["0", "1"]
    assert int(r[2][1]) > int(r[1][1])
    assert math.isnan(float(r[1][-1]))


def test_error_trailer(tmp_path, monkeypatch):
    import maxwellfem.runner as runner

    calls = {"n": 0}
    real = runner.solve

    def flaky(system):
        calls["n"] += 1
        if calls["n"] == 2:
            raise ResidualTooLarge("residual 1e-3 above tolerance")
        return real(system)

    monkeypatch.setattr(runner, "solve", flaky)
    out = tmp_path / "e.csv"
    with pytest.raises(ResidualTooLarge):
        run_experiment(ExperimentConfig("cavity", n0=4, nmax=16, out=str(out)))
    r = rows(out.read_text())
    assert len(r) == 3 and r[-1][0] == "error" and "ResidualTooLarge" in r[-1][1]


def test_config_validation():
    with pytest.raises(ValueError):
        ExperimentConfig("cavity", omega=1.0, delta=0.5)
    with pytest.raises(ValueError):
        ExperimentConfig("pml", ell=1)
    with pytest.raises(ValueError):
        ExperimentConfig("waveguide")
    with pytest.raises(ValueError):
        ExperimentConfig.from_dict({"kind": "cavity", "bogus": 1})
    cfg = ExperimentConfig("cavity", delta=0.25)
    assert cfg.resolved_omega == pytest.approx(1.5 * math.pi + 0.125 * math.pi)
    assert ExperimentConfig.from_dict(cfg.to_dict()) == cfg


def test_cli_json_config_and_flags(tmp_path, capsys):
    conf = tmp_path / "c.json"
    conf.write_text(json.dumps({"p": 2, "n0": 4, "nmax": 8, "ell": 1}))
    cfg = build_config(["cavity", "--config", str(conf), "--nmax", "4"])
    assert (cfg.p, cfg.nmax, cfg.ell) == (2, 4, 1)
    assert main(["cavity", "--config", str(conf), "--nmax", "4"]) == 0
    out = rows(capsys.readouterr().out)
    assert out[0] == CSV_HEADER and len(out) == 2


def test_cli_rejects_bad_config(tmp_path, capsys):
    conf = tmp_path / "c.json"
    conf.write_text(json.dumps({"mesh_size": 3}))
    assert main(["pml", "--config", str(conf)]) == 2
    assert "unknown config keys" in capsys.readouterr().err
