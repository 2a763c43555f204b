import csv
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from tmres.cli import fmt, main, parse_grid
from tmres.model import ConfigError, config_to_dict, load_config, paper_config


def write_cfg(tmp_path, n=1, eps=0.0, omega=0.002, K=4, name="cfg.json"):
    doc = config_to_dict(paper_config(n, eps, K=K, omega=omega))
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


def read_csv(path):
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# config sha256 ")
    rows = list(csv.DictReader(lines[1:]))
    return lines[0].split()[-1], rows


def test_fmt_and_grid():
    assert fmt(0.1) == "0.10000000000000001"
    assert fmt(-0.0) == "0"
    assert fmt(float("nan")) == "nan"
    assert fmt(None) == ""
    assert fmt(np.True_) == "1"
    assert parse_grid("0:1:3") == [0.0, 0.5, 1.0]
    assert parse_grid("0.1, 0.2") == [0.1, 0.2]
    with pytest.raises(ConfigError):
        parse_grid("1:2")


def test_quasifreq_byte_identical(tmp_path):
    cfg = write_cfg(tmp_path, 2, 0.4)
    outs = []
    for d in ("a", "b"):
        assert main(["quasifreq", "--config", cfg, "--method", "all", "--axis", "eps",
                     "--grid", "0:0.6:3", "--out", str(tmp_path / d)]) == 0
        outs.append((tmp_path / d / "quasifreq.csv").read_bytes())
    assert outs[0] == outs[1]


def test_quasifreq_csv_content(tmp_path):
    cfg = write_cfg(tmp_path, 1, 0.0)
    assert main(["quasifreq", "--config", cfg, "--method", "all", "--out", str(tmp_path)]) == 0
    digest, rows = read_csv(tmp_path / "quasifreq.csv")
    assert digest == load_config(cfg).digest()
    assert {r["method"] for r in rows} == {"floquet", "closed", "detroot"}
    assert len(rows) == 6
    dev = {r["max_dev"] for r in rows}
    assert len(dev) == 1 and float(dev.pop()) < 1e-8
    manifest = json.loads((tmp_path / "quasifreq_manifest.json").read_text())
    assert manifest["outputs"] == ["quasifreq.csv"]
    assert manifest["config_sha256"] == digest
    assert manifest["exit_code"] == 0
    assert set(manifest["wall_clock_s"]) >= {"load", "solve", "write"}


def test_quasifreq_length_sweep_slope(tmp_path):
    cfg = write_cfg(tmp_path, 1, 0.0)
    assert main(["quasifreq", "--config", cfg, "--axis", "length", "--grid", "1,2,5,10,50,100",
                 "--out", str(tmp_path)]) == 0
    _, rows = read_csv(tmp_path / "quasifreq.csv")
    pts = {}
    for r in rows:
        v, im = float(r["value"]), abs(float(r["im_omega"]))
        pts[v] = max(pts.get(v, 0.0), im)
    ls = sorted(pts)
    slope = np.polyfit(np.log(ls), np.log([pts[l] for l in ls]), 1)[0]
    assert abs(slope + 1) < 0.01


def test_quasifreq_eps_sweep_matches_closed_form(tmp_path):
    cfg = write_cfg(tmp_path, 1, 0.0)
    assert main(["quasifreq", "--config", cfg, "--axis", "eps", "--grid", "0:0.9:10",
                 "--out", str(tmp_path)]) == 0
    _, rows = read_csv(tmp_path / "quasifreq.csv")
    for r in rows:
        im = float(r["im_omega"])
        if abs(im) < 1e-12:
            continue
        eps = float(r["value"])
        ref = -1e-4 / math.sqrt(1 - eps**2)
        assert abs(im - ref) < 1e-3 * abs(ref)


def test_partial_sweep_exit_code(tmp_path):
    cfg = write_cfg(tmp_path, 1, 0.0)
    assert main(["quasifreq", "--config", cfg, "--axis", "eps", "--grid", "0.2,1.5",
                 "--out", str(tmp_path)]) == 3
    _, rows = read_csv(tmp_path / "quasifreq.csv")
    assert rows[-1]["error"]
    assert main(["energy", "--config", cfg, "--axis", "eps", "--grid", "0.2,1.5",
                 "--out", str(tmp_path)]) == 3


def test_config_error_exit_code(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"physical": {}}))
    assert main(["energy", "--config", str(bad), "--out", str(tmp_path)]) == 1
    assert main(["energy", "--config", str(tmp_path / "missing.json"), "--out", str(tmp_path)]) == 1
    cfg = write_cfg(tmp_path)
    assert main(["converge", "--config", cfg, "--klist", "4,2", "--out", str(tmp_path)]) == 1
    assert main(["quasifreq", "--config", cfg, "--axis", "eps", "--out", str(tmp_path)]) == 1


def test_singular_scatter_exit_code(tmp_path):
    cfg = write_cfg(tmp_path, 1, 0.0, omega=0.0)
    assert main(["scatter", "--config", cfg, "--out", str(tmp_path)]) == 2
    assert not (tmp_path / "scatter_manifest.json").exists()


def test_scatter_static_energy(tmp_path):
    cfg = write_cfg(tmp_path, 6, 0.0, omega=0.0043)
    assert main(["scatter", "--config", cfg, "--times", "0,50", "--grid=-20:80:11",
                 "--out", str(tmp_path)]) == 0
    doc = json.loads((tmp_path / "scatter.json").read_text())
    assert abs(doc["E"] - 1) < 1e-8
    assert doc["modes"] == list(range(-4, 5))
    _, rows = read_csv(tmp_path / "scatter_field.csv")
    assert len(rows) == 22
    assert [float(r["t"]) for r in rows[::11]] == [0.0, 50.0]


def test_scatter_pole_pencil(tmp_path):
    cfg = write_cfg(tmp_path, 2, 0.4, omega="0.0042302-2.7262e-05j")
    assert main(["scatter", "--config", cfg, "--pole-pencil", "--grid", "24,30,40",
                 "--out", str(tmp_path)]) == 0
    _, rows = read_csv(tmp_path / "scatter_field.csv")
    assert {"re_u_pole", "im_u_pole", "rel_diff"} <= set(rows[0])
    assert all(float(r["rel_diff"]) < 0.2 for r in rows)
    doc = json.loads((tmp_path / "scatter.json").read_text())
    assert len(doc["poles"]) == 4
    assert all(p["residual_right"] < 1e-8 for p in doc["poles"])


def test_energy_mode_spectrum(tmp_path):
    cfg = write_cfg(tmp_path, 6, 0.9, omega=0.0067023)
    assert main(["energy", "--config", cfg, "--out", str(tmp_path)]) == 0
    _, rows = read_csv(tmp_path / "energy_modes.csv")
    assert [int(r["n"]) for r in rows] == list(range(-4, 5))
    doc = json.loads((tmp_path / "energy.json").read_text())
    cs = [float(r["cross_section"]) for r in rows]
    assert doc["E"] == pytest.approx(sum(cs), rel=1e-14)


def test_energy_omega_sweep_deterministic(tmp_path, monkeypatch):
    cfg = write_cfg(tmp_path, 2, 0.6)
    blobs = []
    for threads, d in (("1", "a"), ("2", "b")):
        monkeypatch.setenv("TMRES_THREADS", threads)
        assert main(["energy", "--config", cfg, "--axis", "omega", "--grid", "0.001:0.006:6",
                     "--out", str(tmp_path / d)]) == 0
        blobs.append((tmp_path / d / "energy.csv").read_bytes())
    assert blobs[0] == blobs[1]
    _, rows = read_csv(tmp_path / "a" / "energy.csv")
    assert all(r["nearest_re_marker"] for r in rows)
    assert list(rows[0])[:4] == ["value", "E", "regime", "nearest_re_marker"]


def test_converge_static_is_k_independent(tmp_path):
    cfg = write_cfg(tmp_path, 2, 0.0, omega=0.0031)
    assert main(["converge", "--config", cfg, "--klist", "1,2,4,6", "--out", str(tmp_path)]) == 0
    _, rows = read_csv(tmp_path / "converge.csv")
    assert [int(r["K"]) for r in rows] == [1, 2, 4, 6]
    for r in rows[1:]:
        assert float(r["d_E"]) < 1e-10
        assert float(r["d_omega1"]) < 1e-10


def test_converge_differences_shrink(tmp_path):
    cfg = write_cfg(tmp_path, 6, 0.3, omega=0.004425)
    assert main(["converge", "--config", cfg, "--klist", "2,4,6,8", "--out", str(tmp_path)]) == 0
    _, rows = read_csv(tmp_path / "converge.csv")
    dE = [float(r["d_E"]) for r in rows[1:]]
    assert dE[0] > dE[1] > dE[2]


def test_every_output_in_one_manifest(tmp_path):
    cfg = write_cfg(tmp_path, 1, 0.3, omega=0.001)
    for cmd in (["quasifreq"], ["scatter", "--grid=-5:5:3"], ["energy"], ["converge", "--klist", "1,2"]):
        assert main([cmd[0], "--config", cfg, "--out", str(tmp_path), *cmd[1:]]) == 0
    owners = {}
    for m in tmp_path.glob("*_manifest.json"):
        for name in json.loads(m.read_text())["outputs"]:
            owners.setdefault(name, []).append(m.name)
    data = {p.name for p in tmp_path.iterdir() if p.suffix in (".csv",) or p.name in ("scatter.json", "energy.json")}
    assert data == set(owners)
    assert all(len(v) == 1 for v in owners.values())


def test_console_script(tmp_path):
    cfg = write_cfg(tmp_path)
    res = subprocess.run([sys.executable, "-m", "tmres.cli", "quasifreq", "--config", cfg,
                          "--out", str(tmp_path)], capture_output=True, text=True)
    assert res.returncode == 0, res.stderr
