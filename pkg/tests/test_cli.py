"""Command-line interface: exit codes, diagnostics, determinism, CSV layout."""
import csv
import json
import shutil
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from spincavity.cli import EXIT_CONFIG, EXIT_NUMERIC, EXIT_OK, main

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

HEADERS = {
    "spectrum": ["omega", "re_chi", "im_chi", "abs_chi_sq", "phase"],
    "spectrogram": ["omega_c", "omega", "re_chi", "im_chi"],
    "eigen": ["omega_c", "re_E", "im_E", "photon_fraction", "class"],
    "poles": ["re_E", "im_E", "sheet", "re_residue", "im_residue", "iterations", "converged"],
    "sweep": ["Omega", "re_E_plus", "im_E_plus", "re_E_minus", "im_E_minus", "regime", "sheet"],
    "timedomain": ["t", "re_G", "im_G", "abs_G"],
    "pexc": ["omega", "p"],
    "leakage": ["t", "re_G", "im_G", "abs_G"],
    "invert": ["omega", "re_K", "im_K", "rho", "flags"],
    "sample": ["frequency", "decay", "re_g", "im_g"],
}


def _write(tmp_path, doc, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc, indent=2))
    return p


def _manifest(out: Path, prefix: str) -> dict:
    return json.loads((out / f"{prefix}_manifest.json").read_text())


def _spectrum_doc(**system):
    sysd = {"cavity": {"frequency": 0.3, "loss": 0.05}}
    sysd.update(system)
    return {"task": "spectrum", "system": sysd, "params": {"grid": {"start": -1, "stop": 1, "num": 201}},
            "output": {"prefix": "s"}}


def test_empty_cavity_peak_at_cavity(tmp_path):
    cfg = _write(tmp_path, _spectrum_doc())
    assert main(["run", str(cfg), "--output-dir", str(tmp_path / "o")]) == EXIT_OK
    with open(tmp_path / "o" / "s_spectrum.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == HEADERS["spectrum"]
    data = np.array(rows[1:], dtype=float)
    assert data[np.argmax(data[:, 3]), 0] == pytest.approx(0.3)
    m = _manifest(tmp_path / "o", "s")
    assert m["status"] == "ok" and m["exit_code"] == 0
    assert {"versions", "wall_time_s", "config", "units", "warnings", "outputs"} <= set(m)
    assert m["outputs"][0]["sha256"]


@pytest.mark.parametrize("name", sorted(p.name for p in CONFIGS.glob("*.json")))
def test_shipped_configs_validate(name, capsys):
    assert main(["validate", str(CONFIGS / name)]) == EXIT_OK
    assert "ok" in capsys.readouterr().out


@pytest.mark.parametrize(
    "name,task",
    [
        ("empty_cavity_spectrum.json", "spectrum"),
        ("fig2_eigen.json", "eigen"),
        ("gaussian_poles.json", "poles"),
        ("fig4_lorentzian_sweep.json", "sweep"),
        ("lorentzian_timedomain.json", "timedomain"),
        ("pexc_weisskopf_wigner.json", "pexc"),
        ("leakage_resonant.json", "leakage"),
        ("invert_chi.json", "invert"),
        ("sample_gaussian.json", "sample"),
        ("fig2_spectrogram.json", "spectrogram"),
    ],
)
def test_headers_and_determinism(tmp_path, name, task):
    # configs that read files are run from a copy of the config directory
    shutil.copytree(CONFIGS, tmp_path / "cfg")
    cfg = tmp_path / "cfg" / name
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["run", str(cfg), "--output-dir", str(a)]) == EXIT_OK
    assert main(["run", str(cfg), "--output-dir", str(b), "--threads", "4"]) == EXIT_OK
    csvs = sorted(a.glob("*.csv"))
    assert csvs
    for f in csvs:
        assert f.read_bytes() == (b / f.name).read_bytes()
        assert f.read_text().splitlines()[0].split(",") == HEADERS[task]
    ma = json.loads(next(a.glob("*_manifest.json")).read_text())
    mb = json.loads(next(b.glob("*_manifest.json")).read_text())
    for m in (ma, mb):
        for key in ("wall_time_s", "timestamp", "threads"):
            m.pop(key)
    assert ma == mb


def test_seed_override(tmp_path):
    cfg = CONFIGS / "sample_gaussian.json"
    main(["run", str(cfg), "--output-dir", str(tmp_path / "a")])
    main(["run", str(cfg), "--output-dir", str(tmp_path / "b"), "--seed", "12"])
    main(["run", str(cfg), "--output-dir", str(tmp_path / "c"), "--seed", "11"])
    fa, fb, fc = (tmp_path / d / "sample_ensemble.csv" for d in "abc")
    assert fa.read_bytes() != fb.read_bytes()
    assert fa.read_bytes() == fc.read_bytes()
    assert _manifest(tmp_path / "b", "sample")["seed"] == 12


def test_invalid_json_reports_line_and_column(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text('{\n  "task": "spectrum",\n  "system": {,\n}')
    assert main(["validate", str(p)]) == EXIT_CONFIG
    err = capsys.readouterr().err
    assert f"{p}:3:14" in err  # the stray comma


def test_schema_errors_name_fields(tmp_path, capsys):
    doc = _spectrum_doc()
    doc["system"]["cavity"]["loss"] = -1
    doc["params"]["grid"] = {"start": 0}
    assert main(["validate", str(_write(tmp_path, doc))]) == EXIT_CONFIG
    err = capsys.readouterr().err
    assert "system.cavity.loss" in err and "params.grid" in err


def test_pexc_requires_lossless_spins(tmp_path, capsys):
    doc = json.loads((CONFIGS / "pexc_weisskopf_wigner.json").read_text())
    doc["system"]["density"]["gamma_hom"] = 0.1
    cfg = _write(tmp_path, doc)
    assert main(["validate", str(cfg)]) == EXIT_CONFIG
    assert "gamma_hom = 0" in capsys.readouterr().err
    assert main(["run", str(cfg)]) == EXIT_CONFIG


def test_missing_tabulated_file(tmp_path, capsys):
    doc = _spectrum_doc(density={"type": "tabulated", "path": "nowhere/rho.csv"})
    cfg = _write(tmp_path, doc)
    assert main(["validate", str(cfg)]) == EXIT_CONFIG
    assert str(tmp_path / "nowhere" / "rho.csv") in capsys.readouterr().err


def test_tabulated_file_runs(tmp_path):
    (tmp_path / "rho.csv").write_text("omega,rho\n-1,0\n0,1\n1,0\n")
    doc = _spectrum_doc(density={"type": "tabulated", "path": "rho.csv"})
    assert main(["run", str(_write(tmp_path, doc))]) == EXIT_OK


def test_cross_field_rules(tmp_path, capsys):
    doc = _spectrum_doc(density={"type": "gaussian", "sigma": 1.0, "strength": 1.0},
                        ensemble={"spins": [{"frequency": 0.0, "coupling": 0.1}]})
    assert main(["validate", str(_write(tmp_path, doc))]) == EXIT_CONFIG
    assert "at most one" in capsys.readouterr().err
    doc = {"task": "eigen", "system": {"cavity": {"frequency": 0.0}, "density": {"type": "gaussian", "sigma": 1.0, "strength": 1.0}},
           "params": {"cavity_grid": [0.0]}}
    assert main(["validate", str(_write(tmp_path, doc))]) == EXIT_CONFIG
    assert "discrete" in capsys.readouterr().err


def test_numerical_failure_exit_code(tmp_path):
    # a lossless spin probed exactly at its frequency makes the level shift singular
    doc = _spectrum_doc(ensemble={"spins": [{"frequency": 0.0, "coupling": 0.2}]})
    doc["system"]["cavity"] = {"frequency": 0.0, "loss": 0.0}
    doc["params"]["grid"] = [-0.1, 0.0, 0.1]
    out = tmp_path / "o"
    assert main(["run", str(_write(tmp_path, doc)), "--output-dir", str(out)]) == EXIT_NUMERIC
    m = _manifest(out, "s")
    assert m["status"] == "numerical_failure" and "SingularPoint" in m["error"]


def test_bad_threads(tmp_path):
    assert main(["run", str(_write(tmp_path, _spectrum_doc())), "--threads", "0"]) == EXIT_CONFIG


def test_module_entry_point(tmp_path):
    cfg = _write(tmp_path, _spectrum_doc())
    r = subprocess.run([sys.executable, "-m", "spincavity", "validate", str(cfg)], capture_output=True, text=True)
    assert r.returncode == 0
    r = subprocess.run([sys.executable, "-m", "spincavity", "validate", str(tmp_path / "none.json")], capture_output=True, text=True)
    assert r.returncode == 2 and "cannot read" in r.stderr
