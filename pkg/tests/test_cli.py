import json
import shutil
import subprocess

import pytest

from renkf import esn
from renkf.cli import cell_seed, main
from renkf.esn import ReservoirConfig

TINY = """\
[model]
name = vdp
t_spinup = 0.1

[filter]
m = 4
t_start_da = 0.15
t_stop_da = 0.2
t_post = 0.02
t_err = 0.01

[esn]
n_r = 30
grid_size = 1
sigma_in = 0.1
rho = 0.9
n_wash = 10

[training]
l_sets = 3
t_train = 0.1
"""


@pytest.fixture
def tiny_ini(tmp_path):
    p = tmp_path / "tiny.ini"
    p.write_text(TINY)
    return p


def _sweep_ini(tmp_path):
    p = tmp_path / "sweep.ini"
    p.write_text(TINY + "\n[sweep]\nl_values = 2, 3\ngamma_values = 0, 5\n")
    return p


def test_dry_run(tiny_ini, capsys):
    assert main(["run", "--config", str(tiny_ini), "--dry-run"]) == 0
    assert "config ok" in capsys.readouterr().out


def test_invalid_config_exit_code(tmp_path, capsys):
    p = tmp_path / "bad.ini"
    p.write_text("[filter]\nm = 3\n")
    assert main(["run", "--config", str(p)]) == 2
    assert "missing required key 'name' in section [model]" in capsys.readouterr().err
    assert main(["train", "--config", str(tmp_path / "missing.ini")]) == 2


def test_bad_jobs(tiny_ini):
    assert main(["sweep", "--config", str(tiny_ini), "--jobs", "0"]) == 2


def test_sweep_without_grid(tiny_ini):
    assert main(["sweep", "--config", str(tiny_ini), "--dry-run"]) == 2


def test_dimension_mismatch_exit_code(tiny_ini, tmp_path, capsys):
    cfg = ReservoirConfig(n_reservoir=30)
    import numpy as np
    net = esn.train(esn.generate_reservoir(cfg, 2),
                    [np.random.default_rng(0).standard_normal((40, 2))], cfg)
    esn.save_esn(tmp_path / "net.npz", net)
    code = main(["run", "--config", str(tiny_ini), "--network", str(tmp_path / "net.npz"),
                 "--dry-run"])
    assert code == 3
    assert "dimension mismatch" in capsys.readouterr().err


def test_train_then_run(tiny_ini, tmp_path):
    assert main(["train", "--config", str(tiny_ini), "--out", str(tmp_path / "tr")]) == 0
    net = tmp_path / "tr" / "network.npz"
    assert net.exists()
    assert main(["run", "--config", str(tiny_ini), "--out", str(tmp_path / "run"),
                 "--network", str(net)]) == 0
    for name in ("record.csv", "analyses.csv", "metrics.csv", "timeseries.svg",
                 "innovation.svg", "manifest.json"):
        assert (tmp_path / "run" / name).exists()
    manifest = json.loads((tmp_path / "run" / "manifest.json").read_text())
    assert manifest["command"] == "run" and manifest["config"]["model"]["name"] == "vdp"


def test_out_dir_from_environment(tiny_ini, tmp_path, monkeypatch):
    monkeypatch.setenv("RENKF_OUT_DIR", str(tmp_path / "env"))
    assert main(["run", "--config", str(tiny_ini)]) == 0
    assert (tmp_path / "env" / "record.csv").exists()


def test_rerun_from_manifest_is_byte_identical(tiny_ini, tmp_path):
    assert main(["run", "--config", str(tiny_ini), "--seed", "5", "--out", str(tmp_path / "a")]) == 0
    assert main(["run", "--config", str(tmp_path / "a" / "manifest.json"),
                 "--out", str(tmp_path / "b")]) == 0
    for name in ("record.csv", "analyses.csv", "metrics.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_sweep_independent_of_jobs(tmp_path):
    ini = _sweep_ini(tmp_path)
    assert main(["sweep", "--config", str(ini), "--jobs", "1", "--out", str(tmp_path / "j1")]) == 0
    assert main(["sweep", "--config", str(ini), "--jobs", "2", "--out", str(tmp_path / "j2")]) == 0
    a = (tmp_path / "j1" / "sweep.csv").read_bytes()
    assert a == (tmp_path / "j2" / "sweep.csv").read_bytes()
    assert a.count(b"\r\n") == 5
    manifest = json.loads((tmp_path / "j1" / "manifest.json").read_text())
    assert manifest["cell_seeds"] == [cell_seed(0, i) for i in range(4)]


def test_cell_seeds_distinct():
    assert len({cell_seed(0, i) for i in range(100)}) == 100
    assert cell_seed(1, 0) != cell_seed(0, 0)


@pytest.mark.skipif(shutil.which("renkf") is None, reason="console script not installed")
def test_console_script(tiny_ini):
    out = subprocess.run(["renkf", "train", "--config", str(tiny_ini), "--dry-run"],
                         capture_output=True, text=True)
    assert out.returncode == 0 and "config ok" in out.stdout
