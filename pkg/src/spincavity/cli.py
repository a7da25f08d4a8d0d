"""Command-line front end.

``spincavity run config.json`` executes one task and writes CSV files plus a
JSON manifest; ``spincavity validate config.json`` only checks the
configuration. Exit status: 0 on success, 2 for configuration errors, 3 for
numerical failures (partial outputs and manifest are still written).
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import platform
import sys
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np
import scipy

from . import __version__, _backend
from .errors import ConvergenceError, InvalidInput, NoSteadyState, SingularPoint
from .inversion import MeasuredSpectrum, density_from_levelshift, levelshift_from_chi, levelshift_from_transmissivity
from .levelshift import LevelShift
from .model import CavitySpec, Discrete, Ensemble, density_from_dict, ensemble_from_arrays, ensemble_from_dict, sample_ensemble
from .poles import classify_regime, find_poles, track_poles
from .response import dressed_leakage, excitation_distribution, green_time, spectrogram, spectrum
from .spectral import classify_mode, eigenmodes

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3

NUMERICAL_ERRORS = (SingularPoint, ConvergenceError, NoSteadyState, FloatingPointError, np.linalg.LinAlgError)


class ConfigError(Exception):
    """Configuration problem; ``diagnostics`` lists one message per issue."""

    def __init__(self, diagnostics):
        super().__init__("; ".join(diagnostics))
        self.diagnostics = list(diagnostics)


@dataclass
class Outcome:
    files: list = field(default_factory=list)
    warnings: list = field(default_factory=list)
    flags: dict = field(default_factory=dict)
    summary: dict = field(default_factory=dict)
    failed: bool = False


# --------------------------------------------------------------------------
# configuration
# --------------------------------------------------------------------------


def load_schema() -> dict:
    text = resources.files("spincavity").joinpath("data/config_schema.json").read_text()
    return json.loads(text)


def _field_path(err: jsonschema.ValidationError) -> str:
    parts = [str(p) for p in err.absolute_path]
    return ".".join(parts) if parts else "<root>"


def _read_config(path: Path) -> dict:
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError([f"{path}: cannot read config ({exc.strerror})"]) from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError([f"{path}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}"]) from None
    if not isinstance(doc, dict):
        raise ConfigError([f"{path}: the config must be a JSON object"])
    return doc


def _check_file(p: str, base: Path, what: str, diags: list) -> None:
    q = Path(p)
    q = q if q.is_absolute() else base / q
    if not q.is_file():
        diags.append(f"{what}: file not found: {q}")


def validate_config(doc: dict, base: Path) -> list[str]:
    """Schema and cross-field validation; returns a list of diagnostics."""
    validator = jsonschema.Draft202012Validator(load_schema())
    diags = []
    for err in sorted(validator.iter_errors(doc), key=lambda e: (list(e.absolute_path), e.message)):
        diags.append(f"{_field_path(err)}: {err.message}")
    if diags:
        return diags
    task = doc["task"]
    system = doc["system"]
    params = doc.get("params", {})
    sources = [k for k in ("density", "ensemble", "sample") if k in system]
    if len(sources) > 1:
        diags.append(f"system: give at most one of density, ensemble, sample (got {', '.join(sources)})")
    for key, dens in (("system.density", system.get("density")), ("system.sample.profile", system.get("sample", {}).get("profile"))):
        if dens and dens.get("type") == "tabulated" and "path" in dens:
            _check_file(dens["path"], base, key + ".path", diags)
    if task == "sample" and "density" not in system:
        diags.append("system.density: the sample task draws spins from a continuous density")
    discrete = "ensemble" in system or "sample" in system
    if task in ("eigen", "leakage") and not discrete:
        diags.append(f"system: task {task!r} needs a discrete ensemble (ensemble or sample)")
    if task == "pexc":
        if discrete:
            diags.append("system: the excitation distribution needs a continuous density")
        dens = system.get("density")
        if dens is None:
            diags.append("system.density: the excitation distribution needs a continuous density")
        elif dens.get("gamma_hom", 0.0) != 0.0:
            diags.append("system.density.gamma_hom: the excitation distribution requires lossless spins (gamma_hom = 0)")
        if system["cavity"].get("loss", 0.0) <= 0.0:
            diags.append("system.cavity.loss: the excitation distribution needs kappa > 0")
    if task == "timedomain":
        method = params.get("method", "eigen")
        if method == "eigen" and not discrete:
            diags.append("params.method: the eigen method needs a discrete ensemble")
        if method == "quadrature" and params.get("channel", "cc") != "cc":
            diags.append("params.channel: the quadrature method provides the cc channel only")
        if method == "kernel" and params.get("channel", "cc") not in ("cc", "sc"):
            diags.append("params.channel: the kernel method provides the cc and sc channels")
    if task == "invert":
        _check_file(params["input"], base, "params.input", diags)
    if task == "sweep" and "density" not in system and not discrete:
        diags.append("system: the sweep task needs a spin system")
    if task in ("spectrogram", "eigen") and "strengths" in params and not (discrete or "density" in system):
        diags.append("params.strengths: a strength sweep needs a spin system")
    return diags


def _grid(spec) -> np.ndarray:
    if isinstance(spec, dict):
        return np.linspace(float(spec["start"]), float(spec["stop"]), int(spec["num"]))
    return np.asarray(spec, dtype=float)


def _standardize(ens: Ensemble) -> Ensemble:
    # shift and rescale so that the coupling-weighted mean is 0 and the width 1
    w = ens.frequencies
    p = ens.couplings**2 / np.sum(ens.couplings**2)
    mu = float(np.sum(p * w))
    sd = float(np.sqrt(np.sum(p * (w - mu) ** 2)))
    if sd == 0:
        raise InvalidInput("cannot standardize an ensemble without spread")
    return ensemble_from_arrays((w - mu) / sd, ens.original_couplings, ens.decays)


def build_system(doc: dict, base: Path, seed: int):
    """Return ``(source, cavity)``; the source is an Ensemble, a density or None."""
    system = doc["system"]
    cav = system["cavity"]
    cavity = CavitySpec(float(cav["frequency"]), float(cav.get("loss", 0.0)))
    if "density" in system:
        return density_from_dict(system["density"], base), cavity
    if "ensemble" in system:
        spins = system["ensemble"]["spins"]
        return (ensemble_from_dict(system["ensemble"]) if spins else None), cavity
    if "sample" in system:
        s = system["sample"]
        prof = density_from_dict(s["profile"], base)
        ens = sample_ensemble(prof, int(s["n"]), seed=seed, scheme=s.get("scheme", "quantile"))
        if s.get("standardize", False):
            ens = _standardize(ens)
        return ens, cavity
    return None, cavity


# --------------------------------------------------------------------------
# output
# --------------------------------------------------------------------------


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path: Path, header, rows) -> dict:
    """Write one header row plus data rows; floats use the shortest round-trip form."""
    n = 0
    h = hashlib.sha256()
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(header)
        for r in rows:
            wr.writerow([_fmt(v) for v in r])
            n += 1
    h.update(path.read_bytes())
    return {"file": path.name, "rows": n, "sha256": h.hexdigest()}


def _pmap(fn, items, threads: int):
    # results come back in input order whatever the completion order
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items))


# --------------------------------------------------------------------------
# tasks
# --------------------------------------------------------------------------


def _levelshift(source) -> LevelShift:
    if source is None:
        return LevelShift(None)
    return LevelShift(Discrete(source) if isinstance(source, Ensemble) else source)


def _with_strength(source, s: float):
    if source is None:
        raise InvalidInput("a strength sweep needs a spin system")
    return source.with_strength(s)


def task_spectrum(source, cavity, params, out: Path, prefix: str, threads: int, res: Outcome):
    grid = _grid(params["grid"])
    r = spectrum(_levelshift(source), cavity, grid)
    rows = zip(grid, r.chi_cc.real, r.chi_cc.imag, r.transmissivity, r.phase)
    res.files.append(write_csv(out / f"{prefix}_spectrum.csv", ["omega", "re_chi", "im_chi", "abs_chi_sq", "phase"], rows))
    res.summary["peak_omega"] = float(grid[int(np.argmax(r.transmissivity))])


def task_spectrogram(source, cavity, params, out, prefix, threads, res):
    wg = _grid(params["omega_grid"])
    cg = _grid(params["cavity_grid"])
    strengths = params.get("strengths")
    cases = [(None, source)] if strengths is None else [(s, _with_strength(source, s)) for s in strengths]

    def one(case):
        return spectrogram(_levelshift(case[1]), cavity.loss, wg, cg)

    maps = _pmap(one, cases, threads)
    for k, ((s, _), chi) in enumerate(zip(cases, maps)):
        name = f"{prefix}_spectrogram.csv" if s is None else f"{prefix}_spectrogram_{k}.csv"
        rows = ((cg[a], wg[b], chi[a, b].real, chi[a, b].imag) for a in range(cg.size) for b in range(wg.size))
        info = write_csv(out / name, ["omega_c", "omega", "re_chi", "im_chi"], rows)
        if s is not None:
            info["strength"] = float(s)
        res.files.append(info)


def task_eigen(source, cavity, params, out, prefix, threads, res):
    method = params.get("method", "auto")
    thr = float(params.get("threshold", 0.4))
    cg = _grid(params["cavity_grid"]) if "cavity_grid" in params else np.array([cavity.frequency])
    strengths = params.get("strengths")
    cases = [(None, source)] if strengths is None else [(s, _with_strength(source, s)) for s in strengths]
    for k, (s, ens) in enumerate(cases):

        def one(wc, ens=ens):
            return eigenmodes(ens, CavitySpec(float(wc), cavity.loss), method)

        modes = _pmap(one, list(cg), threads)
        rows = []
        counts = []
        for wc, ms in zip(cg, modes):
            counts.append(sum(classify_mode(m, thr) == "photonlike" for m in ms))
            rows.extend((wc, m.energy.real, m.energy.imag, m.photon_fraction, classify_mode(m, thr)) for m in ms)
        name = f"{prefix}_eigen.csv" if s is None else f"{prefix}_eigen_{k}.csv"
        info = write_csv(out / name, ["omega_c", "re_E", "im_E", "photon_fraction", "class"], rows)
        if s is not None:
            info["strength"] = float(s)
        info["photonlike_counts"] = [int(c) for c in counts]
        res.files.append(info)


def task_poles(source, cavity, params, out, prefix, threads, res):
    seeds = params.get("seeds")
    if seeds is not None:
        seeds = [complex(*v) if isinstance(v, list) else complex(v) for v in seeds]
    poles = find_poles(_levelshift(source), cavity, seeds=seeds, max_iter=int(params.get("max_iter", 200)),
                       depth=params.get("depth"))
    rows = ((p.location.real, p.location.imag, p.sheet, p.residue.real, p.residue.imag, p.iterations, p.converged)
            for p in poles)
    res.files.append(write_csv(out / f"{prefix}_poles.csv",
                               ["re_E", "im_E", "sheet", "re_residue", "im_residue", "iterations", "converged"], rows))
    bad = sum(not p.converged for p in poles)
    if bad:
        res.flags["unconverged_poles"] = bad
        res.failed = True


def task_sweep(source, cavity, params, out, prefix, threads, res):
    S = _grid(params["strengths"])
    tol = float(params.get("tol", 1e-6))
    profile = Discrete(source) if isinstance(source, Ensemble) else source
    tr = track_poles(profile, cavity, S)
    rows = []
    for i, O in enumerate(S):
        rep = classify_regime((tr.plus[i], tr.minus[i]), tol)
        sheet = "/".join(tr.sheets[i])
        rows.append((O, tr.plus[i].real, tr.plus[i].imag, tr.minus[i].real, tr.minus[i].imag, rep.regime, sheet))
    res.files.append(write_csv(out / f"{prefix}_sweep.csv",
                               ["Omega", "re_E_plus", "im_E_plus", "re_E_minus", "im_E_minus", "regime", "sheet"], rows))
    if tr.collision.any():
        res.warnings.append(f"pole tracks re-seeded at {int(tr.collision.sum())} sweep points")
    if not tr.converged.all():
        res.flags["unconverged_points"] = int((~tr.converged).sum())
        res.failed = True


def task_timedomain(source, cavity, params, out, prefix, threads, res):
    t = _grid(params["times"])
    system = source if isinstance(source, Ensemble) else _levelshift(source)
    tr = green_time(system, cavity, t, params.get("channel", "cc"), params.get("method", "eigen"),
                    params.get("j"), params.get("k"), params.get("step"))
    rows = zip(t, tr.values.real, tr.values.imag, np.abs(tr.values))
    res.files.append(write_csv(out / f"{prefix}_green.csv", ["t", "re_G", "im_G", "abs_G"], rows))
    res.summary.update({k: float(v) for k, v in tr.info.items()})


def task_pexc(source, cavity, params, out, prefix, threads, res):
    ed = excitation_distribution(_levelshift(source), cavity, tol=float(params.get("tol", 0.003)),
                                 max_nodes=int(params.get("max_nodes", 400000)))
    res.files.append(write_csv(out / f"{prefix}_pexc.csv", ["omega", "p"], zip(ed.omega, ed.p)))
    res.summary.update({"converted": ed.converted, "leak": ed.leak, "tail": ed.tail, "total": ed.total})


def task_leakage(source, cavity, params, out, prefix, threads, res):
    t = _grid(params["times"])
    rep = dressed_leakage(source, cavity, t)
    v = rep.trace.values
    res.files.append(write_csv(out / f"{prefix}_leakage.csv", ["t", "re_G", "im_G", "abs_G"], zip(t, v.real, v.imag, np.abs(v))))
    res.summary.update({"bound": rep.bound, "min_abs": rep.min_abs, "phi_plus_sq": abs(rep.phi_plus) ** 2})


def _read_table(path: Path, ncol: int) -> np.ndarray:
    rows = []
    with open(path, newline="") as fh:
        for k, row in enumerate(csv.reader(fh)):
            if not row or row[0].lstrip().startswith("#"):
                continue
            try:
                vals = [float(x) for x in row[:ncol]]
            except ValueError:
                if k == 0:
                    continue  # header
                raise InvalidInput(f"{path}:{k + 1}: expected {ncol} numeric columns") from None
            if len(vals) != ncol:
                raise InvalidInput(f"{path}:{k + 1}: expected {ncol} numeric columns")
            rows.append(vals)
    if not rows:
        raise InvalidInput(f"{path}: no data rows")
    return np.array(rows)


def task_invert(source, cavity, params, out, prefix, threads, res, base: Path):
    p = Path(params["input"])
    p = p if p.is_absolute() else base / p
    gh = float(params.get("gamma_hom", 0.0))
    if params["format"] == "chi":
        a = _read_table(p, 3)
        ms = MeasuredSpectrum(a[:, 0], a[:, 1] + 1j * a[:, 2], cavity.loss, omega_c=cavity.frequency, gamma_hom=gh)
        tab = levelshift_from_chi(ms, floor=float(params.get("floor", 1e-12)), rel_noise=params.get("rel_noise"))
    else:
        a = _read_table(p, 3)
        w = np.unique(a[:, 0])
        wc = np.unique(a[:, 1])
        if w.size * wc.size != a.shape[0]:
            raise InvalidInput(f"{p}: long-format data must cover the full (omega, omega_c) product grid")
        T = np.full((wc.size, w.size), np.nan)
        T[np.searchsorted(wc, a[:, 1]), np.searchsorted(w, a[:, 0])] = a[:, 2]
        ms = MeasuredSpectrum(w, T, cavity.loss, cavity_grid=wc, gamma_hom=gh)
        tab = levelshift_from_transmissivity(ms, max_residual=float(params.get("max_residual", 1e-3)))
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        de = density_from_levelshift(tab, gh)
    res.warnings.extend(str(c.message) for c in caught)
    flags = np.where(~tab.valid, "excluded", np.where(de.negative, "negative", "ok"))
    rows = zip(tab.grid, tab.values.real, tab.values.imag, de.rho, flags)
    res.files.append(write_csv(out / f"{prefix}_inversion.csv", ["omega", "re_K", "im_K", "rho", "flags"], rows))
    res.summary["strength_squared"] = de.strength_squared
    res.flags["excluded_points"] = int((~tab.valid).sum())
    res.flags["negative_points"] = int(de.negative.sum())


def task_sample(source, cavity, params, out, prefix, threads, res, seed: int):
    ens = sample_ensemble(source, int(params["n"]), seed=seed, scheme=params.get("scheme", "quantile"))
    if params.get("standardize", False):
        ens = _standardize(ens)
    g = ens.original_couplings
    rows = zip(ens.frequencies, ens.decays, g.real, g.imag)
    res.files.append(write_csv(out / f"{prefix}_ensemble.csv", ["frequency", "decay", "re_g", "im_g"], rows))


TASKS = {
    "spectrum": task_spectrum,
    "spectrogram": task_spectrogram,
    "eigen": task_eigen,
    "poles": task_poles,
    "sweep": task_sweep,
    "timedomain": task_timedomain,
    "pexc": task_pexc,
    "leakage": task_leakage,
    "invert": task_invert,
    "sample": task_sample,
}


# --------------------------------------------------------------------------
# entry points
# --------------------------------------------------------------------------


def _versions() -> dict:
    return {
        "spincavity": __version__,
        "backend": _backend.name,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "python": platform.python_version(),
    }


def run(config_path, output_dir=None, threads: int = 1, seed: int | None = None) -> int:
    """Execute a config file; return the exit status."""
    path = Path(config_path)
    base = path.parent
    try:
        doc = _read_config(path)
        diags = validate_config(doc, base)
        if diags:
            raise ConfigError(diags)
    except ConfigError as exc:
        for d in exc.diagnostics:
            print(f"error: {d}", file=sys.stderr)
        return EXIT_CONFIG
    if seed is not None:
        doc["seed"] = int(seed)
    use_seed = int(doc.get("seed", 0))
    out = Path(output_dir) if output_dir is not None else base
    out.mkdir(parents=True, exist_ok=True)
    prefix = doc.get("output", {}).get("prefix", doc["task"])
    res = Outcome()
    status = EXIT_OK
    error = None
    t0 = time.perf_counter()
    try:
        source, cavity = build_system(doc, base, use_seed)
    except InvalidInput as exc:
        print(f"error: system: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    task = doc["task"]
    params = doc.get("params", {})
    fn = TASKS[task]
    try:
        with np.errstate(over="ignore", under="ignore"):
            if task == "invert":
                fn(source, cavity, params, out, prefix, threads, res, base)
            elif task == "sample":
                fn(source, cavity, params, out, prefix, threads, res, use_seed)
            else:
                fn(source, cavity, params, out, prefix, threads, res)
        if res.failed:
            status = EXIT_NUMERIC
    except NUMERICAL_ERRORS as exc:
        status = EXIT_NUMERIC
        error = f"{type(exc).__name__}: {exc}"
    except InvalidInput as exc:
        status = EXIT_CONFIG
        error = f"InvalidInput: {exc}"
    wall = time.perf_counter() - t0
    manifest = {
        "task": task,
        "status": {EXIT_OK: "ok", EXIT_CONFIG: "config_error", EXIT_NUMERIC: "numerical_failure"}[status],
        "exit_code": status,
        "config": doc,
        "seed": use_seed,
        "units": doc.get("units", "reference frequency units"),
        "threads": int(threads),
        "versions": _versions(),
        "outputs": res.files,
        "summary": res.summary,
        "warnings": res.warnings,
        "flags": res.flags,
        "error": error,
        "wall_time_s": wall,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
    }
    (out / f"{prefix}_manifest.json").write_text(json.dumps(manifest, indent=2, default=_json_default) + "\n")
    if error is not None:
        print(f"error: {error}", file=sys.stderr)
    return status


def _json_default(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, complex):
        return [v.real, v.imag]
    if isinstance(v, float) and not math.isfinite(v):
        return str(v)
    raise TypeError(f"cannot serialize {type(v).__name__}")


def validate(config_path) -> int:
    """Check a config file without running it; return the exit status."""
    path = Path(config_path)
    try:
        doc = _read_config(path)
    except ConfigError as exc:
        for d in exc.diagnostics:
            print(f"error: {d}", file=sys.stderr)
        return EXIT_CONFIG
    diags = validate_config(doc, path.parent)
    for d in diags:
        print(f"error: {d}", file=sys.stderr)
    if diags:
        return EXIT_CONFIG
    print(f"{path}: ok")
    return EXIT_OK


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="spincavity", description="Spin-ensemble cavity spectroscopy")
    sub = ap.add_subparsers(dest="command", required=True)
    pr = sub.add_parser("run", help="execute a JSON config")
    pr.add_argument("config")
    pr.add_argument("--output-dir", default=None, help="directory for CSV and manifest files (default: next to the config)")
    pr.add_argument("--threads", type=int, default=1, help="worker threads for sweeps")
    pr.add_argument("--seed", type=int, default=None, help="override the config seed")
    pv = sub.add_parser("validate", help="check a JSON config without running it")
    pv.add_argument("config")
    args = ap.parse_args(argv)
    if args.command == "run":
        if args.threads < 1:
            print("error: --threads must be >= 1", file=sys.stderr)
            return EXIT_CONFIG
        return run(args.config, args.output_dir, args.threads, args.seed)
    return validate(args.config)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
