import csv
import json
import subprocess
import sys

import pytest

from grushinlab import cli

from oracles import lr_closed_forms


def _run(tmp_path, *argv):
    rc = cli.main([*argv, "--outdir", str(tmp_path)])
    runs = sorted((tmp_path / argv[0]).glob("*"))
    return rc, runs


def _rows(run):
    with open(run / "data.csv") as fh:
        return list(csv.reader(fh))


def test_parse_ladder_forms():
    assert cli.parse_ladder("1:100", 3) == pytest.approx([1, 10, 100])
    assert cli.parse_ladder("2:32:5") == pytest.approx([2, 4, 8, 16, 32])
    assert cli.parse_ladder("1, 2.5,4") == [1.0, 2.5, 4.0]
    assert cli.parse_ladder([3, 4]) == [3.0, 4.0]
    for bad in ("5:1", "0:3", "1:2:3:4"):
        with pytest.raises(cli.ConfigError):
            cli.parse_ladder(bad)


@pytest.mark.parametrize("spec", ["annulus:0.5,1", "sector:0.5,1,0,1.5", "arc:0,1", "boundary", "ball"])
def test_parse_region_accepts(spec):
    assert cli.parse_region(spec, 2, 1.0) is not None


@pytest.mark.parametrize("spec", ["annulus:0.5", "disk", "ball:1", "annulus:0.9,0.5"])
def test_parse_region_rejects(spec):
    with pytest.raises(cli.ConfigError):
        cli.parse_region(spec, 2, 1.0)


def test_config_validation():
    for kw in (dict(d=4), dict(R=0.0), dict(threads=0), dict(tier="FAST"), dict(experiment="nope")):
        cfg = cli.ExperimentConfig(**{"experiment": "spectrum", **kw})
        with pytest.raises(cli.ConfigError):
            cfg.validate()
    a = cli.ExperimentConfig("spectrum", params={"mu": 1.0})
    b = cli.ExperimentConfig("spectrum", params={"mu": 1.0}, outdir="elsewhere")
    assert a.hash() == b.hash()
    assert a.hash() != cli.ExperimentConfig("spectrum", params={"mu": 2.0}).hash()


def test_spectrum_run_and_artifacts(tmp_path):
    rc, runs = _run(tmp_path, "spectrum", "--mu", "10", "--kmax", "5")
    assert rc == 0 and len(runs) == 1
    rows = _rows(runs[0])
    assert rows[0] == ["m", "k", "nu", "multiplicity"]
    assert 20 < float(rows[1][2]) < 20.05
    assert [float(r[2]) for r in rows[1:]] == sorted(float(r[2]) for r in rows[1:])
    man = json.loads((runs[0] / "manifest.json").read_text())
    for key in ("config_hash", "config", "versions", "wall_time_s", "constants", "status"):
        assert key in man
    assert man["status"] == "ok"
    assert man["config"]["params"] == {"mu": 10, "kmax": 5}
    assert "numpy" in man["versions"]
    assert (runs[0] / "plot.svg").read_text().lstrip().startswith("<?xml")


def test_rerun_is_byte_identical(tmp_path):
    _run(tmp_path, "spectrum", "--mu", "2", "--kmax", "3")
    _, runs = _run(tmp_path, "spectrum", "--mu", "2", "--kmax", "3")
    assert len(runs) == 2
    for name in ("data.csv", "plot.svg"):
        assert (runs[0] / name).read_bytes() == (runs[1] / name).read_bytes()
    m0, m1 = (json.loads((r / "manifest.json").read_text()) for r in runs)
    assert m0["config_hash"] == m1["config_hash"]


def test_lr_constants_values(tmp_path):
    rc, runs = _run(tmp_path, "lr-constants", "--kappa", "0.1")
    assert rc == 0
    vals = {r[0]: float(r[1]) for r in _rows(runs[0])[1:]}
    s2, s1, q, s = lr_closed_forms(1, 1, 1, 2, 0.1, 1)
    assert vals["s2"] == pytest.approx(s2, rel=1e-12)
    assert vals["s1"] == pytest.approx(s1, rel=1e-12)
    assert vals["s"] == pytest.approx(s, rel=1e-12)
    assert vals["shift_passed"] == 1.0


def test_toml_config_and_flag_override(tmp_path):
    cfg = tmp_path / "run.toml"
    cfg.write_text('d = 3\n[spectrum]\nmu = 4.0\nkmax = 2\n')
    rc, runs = _run(tmp_path, "spectrum", "--config", str(cfg), "--kmax", "3")
    assert rc == 0
    man = json.loads((runs[0] / "manifest.json").read_text())
    assert man["config"]["d"] == 3
    assert man["config"]["params"] == {"mu": 4.0, "kmax": 3}
    assert len(_rows(runs[0])) == 4


def test_bad_config_exits_2(tmp_path, capsys):
    assert cli.main(["spectrum", "--d", "5", "--outdir", str(tmp_path)]) == 2
    assert "d must be 2 or 3" in capsys.readouterr().err
    assert cli.main(["cost-sweep", "--region", "disk", "--outdir", str(tmp_path)]) == 2
    assert cli.main(["lr-constants", "--kappa", "abc", "--outdir", str(tmp_path)]) == 2
    assert not (tmp_path / "spectrum").exists()


def test_unwritable_outdir_exits_2(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert cli.main(["spectrum", "--outdir", str(blocker / "sub")]) == 2


def test_env_cache_dir(tmp_path, monkeypatch):
    monkeypatch.setenv("GRLB_CACHE_DIR", str(tmp_path / "cache"))
    args = cli.build_parser().parse_args(["spectrum"])
    assert cli.config_from_args(args).cache_dir == str(tmp_path / "cache")


def test_module_entry_point(tmp_path):
    out = subprocess.run(
        [sys.executable, "-m", "grushinlab", "spectrum", "--kmax", "2", "--outdir", str(tmp_path)],
        capture_output=True, text=True, timeout=300,
    )
    assert out.returncode == 0, out.stderr
    assert out.stdout.strip().startswith(str(tmp_path))
