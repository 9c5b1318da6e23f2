import json

import pytest

from qdscreen.cli import main
from qdscreen.curated import shipped_table1_dir

DATA = shipped_table1_dir()


def ingest_table1(store):
    files = sorted(str(p) for p in (DATA / "records").glob("*.json"))
    return main(["ingest", "--store", str(store), "--host", str(DATA / "host.json"),
                 "--chempots", str(DATA / "chempots.json"), *files])


def test_help_for_every_subcommand(capsys):
    for cmd in (["ingest"], ["screen"], ["report"], ["thermo"], ["thermo", "diagram"], ["lineshape"], ["model"], ["model", "gen"]):
        assert main([*cmd, "--help"]) == 0
        assert "usage" in capsys.readouterr().out


def test_usage_errors():
    assert main([]) == 1
    assert main(["screen", "--store", "x", "--bogus"]) == 1
    assert main(["frobnicate"]) == 1
    assert main(["lineshape", "--out", "x.csv"]) == 1


def test_screen_table1(tmp_path, capsys):
    assert ingest_table1(tmp_path / "st") == 0
    assert main(["screen", "--store", str(tmp_path / "st"), "--out", str(tmp_path / "out"), "--jobs", "1"]) == 0
    finalists = (tmp_path / "out" / "finalists.txt").read_text().split()
    assert finalists == ["Ti:tet_interstitial:q+1", "Fe:tet_interstitial:q0", "Ru:tet_interstitial:q0"]
    assert "Finalists (3)" in capsys.readouterr().out
    for name in ("summary.txt", "report.json", "scatter.csv", "histogram.csv", "isolines.csv"):
        assert (tmp_path / "out" / name).exists()


def test_outputs_byte_identical(tmp_path):
    ingest_table1(tmp_path / "st")
    main(["screen", "--store", str(tmp_path / "st"), "--out", str(tmp_path / "a"), "--jobs", "1"])
    main(["screen", "--store", str(tmp_path / "st"), "--out", str(tmp_path / "b"), "--jobs", "2"])
    for p in sorted((tmp_path / "a").iterdir()):
        assert p.read_bytes() == (tmp_path / "b" / p.name).read_bytes()


def test_zero_finalists_exit_3(tmp_path):
    ingest_table1(tmp_path / "st")
    (tmp_path / "c.toml").write_text("min_tdm = 100.0\n")
    assert main(["screen", "--store", str(tmp_path / "st"), "--config", str(tmp_path / "c.toml"),
                 "--out", str(tmp_path / "o")]) == 3
    (tmp_path / "c.json").write_text(json.dumps({"min_zpl": 0.92}))
    assert main(["screen", "--store", str(tmp_path / "st"), "--config", str(tmp_path / "c.json"),
                 "--out", str(tmp_path / "o2")]) == 0
    assert len((tmp_path / "o2" / "finalists.txt").read_text().split()) == 1


def test_bad_config_is_validation_error(tmp_path):
    ingest_table1(tmp_path / "st")
    (tmp_path / "c.json").write_text(json.dumps({"min_tdm": -1}))
    assert main(["screen", "--store", str(tmp_path / "st"), "--config", str(tmp_path / "c.json")]) == 2


def test_malformed_record(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({
        "schema": 1, "element": "X", "site": "substitutional", "charge": 0, "total_energy": 1.0,
        "level_sets": {"base": {"up": {"eigenvalues": [0.1, 0.2]}}}, "occupations": {"up": [1.0]},
    }))
    assert main(["ingest", "--store", str(tmp_path / "st"), str(bad)]) == 2
    err = capsys.readouterr().err
    assert "occupations" in err and "shape mismatch" in err


def test_io_errors(tmp_path):
    assert main(["screen", "--store", str(tmp_path / "missing")]) == 4
    assert main(["ingest", "--store", str(tmp_path / "st"), str(tmp_path / "nofile.json")]) == 4


def test_thermo_diagram(tmp_path, capsys):
    ingest_table1(tmp_path / "st")
    out = tmp_path / "fe.csv"
    assert main(["thermo", "diagram", "--store", str(tmp_path / "st"), "--element", "Fe",
                 "--site", "tet_interstitial", "--samples", "5", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "fermi_eV,eform_q+2_eV,eform_q0_eV"
    assert len(lines) == 6
    assert "CTL (+2/0) = 0.2910 eV" in capsys.readouterr().out


def test_report_reemit(tmp_path, capsys):
    ingest_table1(tmp_path / "st")
    main(["screen", "--store", str(tmp_path / "st"), "--out", str(tmp_path / "o"), "--format", "json"])
    capsys.readouterr()
    assert main(["report", "--input", str(tmp_path / "o" / "report.json"), "--format", "csv",
                 "--out", str(tmp_path / "csv")]) == 0
    assert (tmp_path / "csv" / "scatter.csv").read_text().count("\n") == 8
    assert main(["report", "--input", str(tmp_path / "o" / "report.json"), "--format", "text"]) == 0
    assert "Finalists (3)" in capsys.readouterr().out


def test_model_gen_ingest_screen_lineshape(tmp_path):
    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps({"phonons": True, "defects": [
        {"element": "Xm", "charge": 0, "spring_k": 10.0, "coupling": 1.0, "companion": True}]}))
    gen = tmp_path / "gen"
    assert main(["model", "gen", "--spec", str(spec), "--out", str(gen)]) == 0
    files = sorted(str(p) for p in (gen / "records").glob("*.json"))
    assert len(files) == 2
    assert main(["ingest", "--store", str(tmp_path / "st"), "--host", str(gen / "host.json"),
                 "--chempots", str(gen / "chempots.json"), *files]) == 0
    assert main(["screen", "--store", str(tmp_path / "st"), "--out", str(tmp_path / "o")]) == 0
    assert (tmp_path / "o" / "finalists.txt").read_text() == "Xm:tet_interstitial:q0\n"
    out = tmp_path / "pl.csv"
    assert main(["lineshape", "--store", str(tmp_path / "st"), "--id", "Xm:tet_interstitial:q0",
                 "--out", str(out)]) == 0
    assert out.read_text().startswith("energy_eV,intensity,sideband\n")
    summary = json.loads((tmp_path / "pl.summary.json").read_text())
    assert summary["huang_rhys"] > 0 and summary["zpl_weight"] == pytest.approx(2.718281828459045 ** -summary["huang_rhys"])
    # records without phonon data are a validation error
    assert main(["lineshape", "--store", str(tmp_path / "st"), "--id", "Xm:tet_interstitial:q+1",
                 "--out", str(tmp_path / "x.csv")]) == 2


def test_model_gen_bad_spec(tmp_path):
    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps({"defects": [{"element": "Xm", "well": {"basis_cutoff": 2}}]}))
    assert main(["model", "gen", "--spec", str(spec), "--out", str(tmp_path / "g")]) == 2
    spec.write_text(json.dumps({"wells": []}))
    assert main(["model", "gen", "--spec", str(spec), "--out", str(tmp_path / "g")]) == 2


def test_model_gen_random_deterministic(tmp_path):
    spec = tmp_path / "spec.toml"
    spec.write_text("[random]\ncount = 3\nseed = 4\n")
    main(["model", "gen", "--spec", str(spec), "--out", str(tmp_path / "a")])
    main(["model", "gen", "--spec", str(spec), "--out", str(tmp_path / "b")])
    a = sorted((tmp_path / "a" / "records").iterdir())
    assert len(a) == 3
    for p in a:
        assert p.read_bytes() == (tmp_path / "b" / "records" / p.name).read_bytes()
