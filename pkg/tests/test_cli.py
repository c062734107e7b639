import json

import numpy as np
import pytest

from eigshape.cli import ConfigError, main, parse_config, parse_field
from eigshape.velocity import VelocityField

MINI_CONFIG = """\
# smallest useful study
[study]
domain = square
bc = dirichlet
min_level = 1
max_level = 3
gamma = 1
"""


def run_cli(*argv):
    return main(list(argv))


def test_solve_square_dirichlet(capsys):
    assert run_cli("solve", "--domain", "square", "--bc", "dirichlet",
                   "--level", "5", "--k", "1") == 0
    out = capsys.readouterr().out
    row = out.strip().splitlines()[-1].split()
    lam, exact, rel = float(row[1]), float(row[3]), float(row[4])
    assert lam == pytest.approx(19.74, abs=0.02)
    assert exact == pytest.approx(2 * np.pi ** 2, rel=1e-12)
    assert rel < 1e-3


def test_solve_disk_dirichlet(capsys):
    assert run_cli("solve", "--domain", "disk", "--bc", "dirichlet",
                   "--level", "5", "--k", "1") == 0
    lam = float(capsys.readouterr().out.strip().splitlines()[-1].split()[1])
    assert lam == pytest.approx(5.7832, rel=5e-3)


def test_solve_neumann_flags_zero_mode(capsys):
    assert run_cli("solve", "--domain", "square", "--bc", "neumann",
                   "--level", "3", "--k", "2") == 0
    out = capsys.readouterr().out
    assert "(zero mode)" in out


def test_invalid_domain_is_usage_error():
    with pytest.raises(SystemExit) as exc:
        run_cli("solve", "--domain", "hexagon", "--bc", "dirichlet", "--level", "1")
    assert exc.value.code == 2


def test_gradient_identity_volume(capsys):
    assert run_cli("gradient", "--domain", "square", "--bc", "dirichlet", "--level", "3",
                   "--field", "identity", "--formula", "volume") == 0
    lines = dict(line.split(" = ") for line in capsys.readouterr().out.strip().splitlines())
    lam, value = float(lines["lambda_h"]), float(lines["value"])
    assert value == pytest.approx(-2.0 * lam, rel=1e-12)


def test_gradient_constant_volume_is_zero(capsys):
    assert run_cli("gradient", "--domain", "lshape", "--bc", "dirichlet", "--level", "2",
                   "--field", "const:1,0", "--formula", "volume") == 0
    lines = dict(line.split(" = ") for line in capsys.readouterr().out.strip().splitlines())
    assert float(lines["value"]) == 0.0


def test_gradient_rotation_boundary_disk_decays(capsys):
    values = []
    for level in (2, 3):
        assert run_cli("gradient", "--domain", "disk", "--bc", "dirichlet",
                       "--level", str(level), "--field", "rot",
                       "--formula", "boundary") == 0
        lines = dict(line.split(" = ")
                     for line in capsys.readouterr().out.strip().splitlines())
        values.append(abs(float(lines["value"])))
    assert values[0] <= 1e-10 and values[1] <= 1e-10


def test_gradient_bad_field_spec(capsys):
    assert run_cli("gradient", "--domain", "square", "--bc", "dirichlet", "--level", "1",
                   "--field", "spiral", "--formula", "volume") == 2


def test_parse_field_specs():
    f = parse_field("const:2,-1")
    assert isinstance(f, VelocityField)
    assert np.allclose(f.evaluate(np.array([[0.5, 0.5]])), [[2.0, -1.0]])
    g = parse_field("mono:1,2,1")
    assert np.allclose(g.evaluate(np.array([[2.0, 3.0]])), [[0.0, 18.0]])
    with pytest.raises(ValueError):
        parse_field("mono:1,2")


def test_study_command_outputs(tmp_path, capsys):
    cfg = tmp_path / "mini.cfg"
    cfg.write_text(MINI_CONFIG)
    out = tmp_path / "results"
    assert run_cli("study", str(cfg), "--out", str(out)) == 0
    csv_path = out / "mini.csv"
    svg_path = out / "mini.svg"
    manifest_path = out / "mini.manifest.json"
    assert csv_path.exists() and svg_path.exists() and manifest_path.exists()
    first = csv_path.read_bytes()
    assert first.decode().splitlines()[0] == "level,h,dof,lambda_h,E_volume,E_boundary"
    manifest = json.loads(manifest_path.read_text())
    assert manifest["config"]["domain"] == "square"
    assert str(csv_path) in manifest["outputs"]
    assert manifest["version"]
    # deterministic bytes on rerun
    assert run_cli("study", str(cfg), "--out", str(out)) == 0
    assert csv_path.read_bytes() == first


def test_study_missing_config(tmp_path, capsys):
    assert run_cli("study", str(tmp_path / "nope.cfg")) == 2


def test_manifest_snapshot_round_trips(tmp_path, capsys):
    cfg = tmp_path / "mini.cfg"
    cfg.write_text(MINI_CONFIG)
    out = tmp_path / "a"
    assert run_cli("study", str(cfg), "--out", str(out)) == 0
    manifest = json.loads((out / "mini.manifest.json").read_text())
    rebuilt = tmp_path / "mini2.cfg"
    lines = ["[study]"] + [f"{k} = {v}" for k, v in manifest["config"].items()
                           if v is not None]
    rebuilt.write_text("\n".join(lines) + "\n")
    out2 = tmp_path / "b"
    assert run_cli("study", str(rebuilt), "--out", str(out2)) == 0
    assert (out / "mini.csv").read_bytes() == (out2 / "mini2.csv").read_bytes()


def test_shipped_configs_parse():
    from pathlib import Path
    config_dir = Path(__file__).resolve().parent.parent / "configs"
    stems = sorted(p.stem for p in config_dir.glob("*.cfg"))
    assert stems == ["disk_dirichlet", "disk_neumann", "lshape_dirichlet",
                     "lshape_neumann", "square_dirichlet", "square_neumann"]
    for path in config_dir.glob("*.cfg"):
        cfg, snapshot = parse_config(path)
        assert cfg.max_level >= cfg.min_level
        assert snapshot["domain"] == cfg.domain.value


def test_config_error_names_key_and_line(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("[study]\ndomain = square\nbc = dirichlet\nmin_level = one\nmax_level = 3\n")
    assert run_cli("study", str(cfg)) == 2
    err = capsys.readouterr().err
    assert "min_level" in err and "line 4" in err


def test_config_error_unknown_key(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("[study]\ndomain = square\nbc = dirichlet\nmin_level = 1\n"
                   "max_level = 2\nwibble = 3\n")
    with pytest.raises(ConfigError, match="wibble"):
        parse_config(cfg)


def test_config_parse_full(tmp_path):
    cfg = tmp_path / "full.cfg"
    cfg.write_text("[study]\ndomain = lshape\nbc = dirichlet\nmin_level = 2\n"
                   "max_level = 5\ngamma = 2\ntarget = first\n"
                   "reference = finemesh:7\nfit_window = 3\n")
    parsed, snapshot = parse_config(cfg)
    assert parsed.domain.value == "lshape"
    assert parsed.reference_level == 7
    assert parsed.fit_window == 3
    assert snapshot["reference"] == "finemesh:7"


def test_golden_command(tmp_path, capsys):
    out = tmp_path / "golden.txt"
    assert run_cli("golden", "--out", str(out)) == 0
    text = out.read_text()
    assert "bessel.j0_zero1 = 2.40482555769577" in text
    assert "square.dirichlet.lambda = " in text
    for line in text.strip().splitlines():
        key, value = line.split(" = ")
        float(value)


def test_mesh_export_command(capsys):
    assert run_cli("mesh-export", "--domain", "square", "--level", "0") == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0] == "vertices 9 triangles 8"
    assert len(lines) == 1 + 9 + 8
