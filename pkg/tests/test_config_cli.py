import dataclasses
import json
import math

import numpy as np
import pytest

from topobohm import cli
from topobohm.config import ConfigError, load_config, parse_config, shipped_scenarios
from topobohm.evolution import assemble_hamiltonian, wave_packet
from topobohm.formats import (
    TrajectoryWriter,
    read_checkpoint,
    read_keyvalue,
    read_trajectories,
    read_wave_csv,
    wave_from_checkpoint,
    write_checkpoint,
    write_keyvalue,
    write_wave_csv,
)

RING = """
[geometry]
kind = "ring"
grid = [128]

[factor]
beta = 1.0
"""


def test_minimal_ring_defaults():
    cfg = parse_config(RING)
    assert cfg.numerics.dt == 1e-3 and cfg.seed == 0
    assert cfg.factor.kind == "character" and cfg.potential.kind == "none"
    h = cfg.hamiltonian()
    assert h.gamma[0, 0] == pytest.approx(np.exp(1j))


def test_unknown_key_named():
    with pytest.raises(ConfigError, match=r"factor\.betaa"):
        parse_config(RING.replace("beta = 1.0", "betaa = 1.0"))


@pytest.mark.parametrize("drop, key", [("beta = 1.0", "factor.beta"), ("grid = [128]", "geometry.grid")])
def test_missing_physics_key(drop, key):
    with pytest.raises(ConfigError, match=key.replace(".", r"\.")):
        parse_config(RING.replace(drop, ""))


def test_parse_error_has_line():
    with pytest.raises(ConfigError, match=r"parse error.*line 3"):
        parse_config('[geometry]\nkind = "ring"\ngrid = = [128]\n')


def test_noncommuting_potential_rejected():
    text = """
[geometry]
kind = "spin_annulus"
grid = [16, 32]
r_in = 1.0
r_out = 2.0

[factor]
kind = "su2"
alpha = 1.5707963267948966
axis = [0.0, 0.0, 1.0]

[potential]
kind = "radial"
field = [1.0, 0.0, 0.0]
"""
    with pytest.raises(ConfigError, match="commut") as info:
        parse_config(text)
    # [sigma_x, Gamma] for Gamma = -i sigma_z has max entry 2
    assert "2" in str(info.value)
    parse_config(text.replace("[1.0, 0.0, 0.0]", "[0.0, 0.0, 1.0]"))


def test_su2_needs_spin_fiber():
    text = RING.replace("beta = 1.0", 'kind = "su2"\nalpha = 1.0\naxis = [0.0, 0.0, 1.0]')
    with pytest.raises(ConfigError, match="2-dimensional"):
        parse_config(text)


def test_algebra_config_validation():
    with pytest.raises(ConfigError, match="unknown check"):
        parse_config('[algebra]\nchecks = ["nope"]\n')
    with pytest.raises(ConfigError):
        parse_config('[algebra]\nchecks = ["characters"]\ngroups = ["Q8"]\n')


def test_shipped_scenarios_load():
    names = shipped_scenarios()
    assert len(names) == 16
    for name in names:
        load_config(name)


def run(tmp_path, *argv):
    return cli.main([*argv, "--out", str(tmp_path)])


def test_algebra_check_s3(tmp_path, capsys):
    assert run(tmp_path, "algebra-check", "--config", "algebra_S3") == 0
    text = (tmp_path / "algebra.txt").read_text()
    assert "S3.character_count=2 pass" in text
    rows = read_keyvalue(tmp_path / "algebra.txt")
    assert rows["S3.homomorphism"]["pass"] and rows["S3.homomorphism"]["threshold"] == 1e-12
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["pass"] and report["subcommand"] == "algebra-check"


def test_spectrum_ring_pi(tmp_path):
    assert run(tmp_path, "spectrum", "--config", "ring_beta_pi") == 0
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["results"]["lowest_energy"] == pytest.approx(0.125, rel=1e-5)
    lines = (tmp_path / "spectrum.csv").read_text().splitlines()
    assert lines[0] == "index,energy,exact,error" and len(lines) == 7


def test_config_error_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.toml"
    bad.write_text(RING.replace("beta", "betaa"))
    assert run(tmp_path / "o", "spectrum", "--config", str(bad)) == 2
    assert "factor.betaa" in json.loads(capsys.readouterr().err)["error"]
    assert run(tmp_path / "o", "evolve", "--config", "algebra_S3") == 2


def test_evolve_outputs(tmp_path):
    cfg = tmp_path / "short.toml"
    cfg.write_text(RING + "\n[numerics]\ndt = 0.01\nt_final = 0.2\nrecord_every = 10\n")
    assert run(tmp_path / "o", "evolve", "--config", str(cfg)) == 0
    out = tmp_path / "o"
    snaps = sorted((out / "snapshots").iterdir())
    assert [p.name for p in snaps] == ["wave_0000000.csv", "wave_0000010.csv", "wave_0000020.csv"]
    header, coords, values = read_wave_csv(snaps[-1])
    assert float(header["time"]) == pytest.approx(0.2) and header["kind"] == "ring"
    desc, vals = read_checkpoint(out / "final.cwave")
    assert desc["n_r"] == 1 and desc["n_theta"] == 128
    np.testing.assert_allclose(vals.reshape(-1), values[:, 0], rtol=0, atol=1e-15)


def test_trajectories_csv(tmp_path):
    cfg = tmp_path / "short.toml"
    cfg.write_text(RING + "\n[numerics]\ndt = 0.01\nt_final = 0.1\nrecord_every = 5\n")
    assert run(tmp_path / "o", "trajectories", "--config", str(cfg), "--n", "4") == 0
    rows = read_trajectories(tmp_path / "o" / "trajectories.csv")
    assert list(rows[0]) == ["traj_id", "t", "coord1", "coord2", "winding", "status"]
    assert {r["traj_id"] for r in rows} == {"0", "1", "2", "3"}
    assert all(r["coord2"] == "" for r in rows)
    assert [r["status"] for r in rows if float(r["t"]) == pytest.approx(0.1)] == ["Finished"] * 4


def test_wave_csv_roundtrip(tmp_path, spin_small):
    gam = np.diag([np.exp(-0.5j), np.exp(0.5j)])
    psi = wave_packet(spin_small, gam, 1.0, 0.7, 2.0, spinor=[1, 1j])
    write_wave_csv(tmp_path / "w.csv", psi, "su2")
    header, coords, values = read_wave_csv(tmp_path / "w.csv")
    assert header["factor"] == "su2" and float(header["norm"]) == pytest.approx(1.0)
    np.testing.assert_array_equal(values, psi.values.reshape(-1, 2))


def test_checkpoint_roundtrip(tmp_path, annulus_small):
    h = assemble_hamiltonian(annulus_small, None, np.exp(0.3j))
    psi = dataclasses.replace(wave_packet(annulus_small, h.gamma, 2.0, 0.5, 1.0), time=0.75)
    write_checkpoint(tmp_path / "c.cwave", psi)
    raw = (tmp_path / "c.cwave").read_bytes()
    assert raw[:8] == b"CWAVE01\0" and len(raw) == 64 + 16 * psi.values.size
    back = wave_from_checkpoint(tmp_path / "c.cwave", annulus_small, h.gamma)
    assert back.time == 0.75
    assert back.values.tobytes() == psi.values.tobytes()


def test_keyvalue_roundtrip(tmp_path):
    rows = [
        {"name": "a", "value": 3, "pass": True, "residual": 1e-13, "threshold": 1e-12},
        {"name": "b", "value": 1, "pass": None, "residual": 0.0, "threshold": 0.0},
    ]
    write_keyvalue(tmp_path / "k.txt", rows)
    back = read_keyvalue(tmp_path / "k.txt")
    assert back["a"] == {"value": "3", "pass": True, "max_residual": 1e-13, "threshold": 1e-12}
    assert back["b"]["pass"] is None


def test_trajectory_writer_two_coords(tmp_path):
    with TrajectoryWriter(tmp_path / "t.csv") as w:
        w.write([0, 1], 0.5, np.array([[1.5, 0.25], [1.2, math.pi]]), np.array([0, -1]), ["Running", "LeftDomain"])
    rows = read_trajectories(tmp_path / "t.csv")
    assert rows[1] == {"traj_id": "1", "t": "0.5", "coord1": "1.2", "coord2": f"{math.pi:.17g}", "winding": "-1", "status": "LeftDomain"}
