"""Config-driven pipeline: generate data, fit models, extract poles, report.

One TOML file drives the whole chain; every stage writes plain CSV/JSON
artifacts into the output directory so a run is reproducible from the
config alone.  Exit codes: 0 success, 2 config error, 3 numerical failure,
4 fit did not converge.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

import numpy as np

from . import fitting
from .errors import ConfigError, NumericsError
from .fitting import FitProblem, minimize, multistart, pole_scan
from .jostmodel import PolyBasis, sigma_model
from .oracle import (
    PotentialSpec,
    cross_sections_exact,
    dataset_from_csv,
    dataset_to_csv,
    generate_dataset,
)
from .poles import SearchRegion, find_resonances, resonances_to_csv, resonances_to_json_dicts
from .rmatrix import RParams
from .specfun import SheetSelector

__all__ = ["main", "load_config", "cmd_generate", "cmd_fit", "cmd_poles", "cmd_report"]

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICS = 3
EXIT_NOT_CONVERGED = 4

# Reproduces the benchmark analysis of the 7.5 r^2 e^(-r) - 1/r potential:
# 40 cross-section points on (1.7, 5) with a few samples concentrated across
# the narrow l=0 peak, a 3-term pole-product basis per partial wave, and a
# pole search below the real axis on the nearest unphysical sheet.
DEFAULTS: dict = {
    "potential": {"strength": 7.5, "coulomb_z": -1.0, "mu": 1.0, "hbar": 1.0},
    "dataset": {
        "e_min": 1.7,
        "e_max": 5.0,
        "n_points": 40,
        "l_max": 2,
        "delta_policy": "unit",
        "window": [1.7803, 1.7809],
        "window_points": 4,
        "file": "dataset.csv",
    },
    "fit": {
        "model": "jost",
        "n_starts": 8,
        "seed": 1,
        "maxiter": 6000,
        "cycles": 3,
        "basis": [
            {"l": 0, "energies": [1.78, 4.0, 0.0], "labels": ["resonance", "resonance", "background"]},
            {"l": 1, "energies": [3.85, 4.75, 0.0], "labels": ["resonance", "resonance", "background"]},
            {"l": 2, "energies": [4.9, 20.0, 0.0], "labels": ["resonance", "background", "background"]},
        ],
        "rlevels": [
            {"l": 0, "energies": [0.0, 1.78, 4.0, 20.0], "gammas": [0.36862, 0.0059070, 0.44958, 0.88622], "a": 0.53, "B_R": 0.0},
            {"l": 1, "energies": [0.0, 3.85, 10.0, 20.0], "gammas": [1.4806, 0.19240, 0.00010105, 3.0343], "a": 1.31, "B_R": 0.0},
            {"l": 2, "energies": [0.0, 4.9, 20.0], "gammas": [1.2198, 0.3462, 1.5640], "a": 0.94, "B_R": 0.0},
        ],
        "scan": {
            "enable": True,
            "sweeps": 2,
            "n_starts": 3,
            "pin": [
                {"l": 0, "near": 1.78, "radius": 0.01, "gamma_max": 0.01, "fallback": [1.7805, 1e-4]},
                {"l": 1, "near": 3.85, "radius": 0.2, "gamma_min": 0.05, "gamma_max": 1.0, "fallback": [3.85, 0.28]},
            ],
            "sweep": [
                {"l": 0, "start": [4.1, 1.2], "e_grid": [3.9, 4.0, 4.1, 4.2, 4.3], "gamma_grid": [0.8, 1.0, 1.2, 1.5]},
                {"l": 2, "start": [4.9, 1.6], "e_grid": [4.6, 4.8, 4.9, 5.0, 5.2], "gamma_grid": [1.2, 1.5, 1.8]},
            ],
        },
    },
    "poles": {
        "re_range": [1.0, 5.6],
        "im_range": [-3.1, -1e-8],
        "k_branch": -1,
        "log_branch": 0,
    },
    "report": {
        "n_curve": 120,
        "insert": [1.780, 1.781],
        "insert_points": 40,
        "reference": [],
    },
    "output": {"dir": "out"},
}


def _merge(base: dict, override: dict, path: str = "") -> dict:
    out = dict(base)
    for key, val in override.items():
        here = f"{path}.{key}" if path else key
        if key not in base:
            raise ConfigError(f"unknown config key {here!r}")
        if isinstance(base[key], dict) and isinstance(val, dict):
            out[key] = _merge(base[key], val, here)
        else:
            out[key] = val
    return out


def load_config(path: str | None) -> dict:
    """DEFAULTS deep-merged with the TOML file at path (if given)."""
    if path is None:
        return json.loads(json.dumps(DEFAULTS))
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        with open(p, "rb") as fh:
            user = tomllib.load(fh)
    except tomllib.TOMLDecodeError as err:
        raise ConfigError(f"invalid TOML in {path}: {err}") from None
    return _merge(DEFAULTS, user)


def _spec(cfg: dict) -> PotentialSpec:
    p = cfg["potential"]
    return PotentialSpec(strength=p["strength"], coulomb_z=p["coulomb_z"], mu=p["mu"], hbar=p["hbar"])


def _kin_constants(cfg: dict) -> tuple[float, float]:
    """(mu, wave-equation Coulomb strength 2*z) for the model modules."""
    p = cfg["potential"]
    return float(p["mu"]), 2.0 * float(p["coulomb_z"]) * float(p["mu"]) / float(p["hbar"]) ** 2


def _configs(cfg: dict, model: str):
    fit = cfg["fit"]
    l_max = int(cfg["dataset"]["l_max"])
    if model in ("jost", "jost_taylor"):
        entries = {int(b["l"]): b for b in fit["basis"]}
        missing = [l for l in range(l_max + 1) if l not in entries]
        if missing:
            raise ConfigError(f"fit.basis missing l = {missing}")
        return tuple(
            PolyBasis(tuple(entries[l]["energies"]), tuple(entries[l]["labels"]))
            for l in range(l_max + 1)
        )
    entries = {int(r["l"]): r for r in fit["rlevels"]}
    missing = [l for l in range(l_max + 1) if l not in entries]
    if missing:
        raise ConfigError(f"fit.rlevels missing l = {missing}")
    return tuple(
        RParams(
            l=l,
            energies=tuple(entries[l]["energies"]),
            gammas=tuple(entries[l]["gammas"]),
            a=float(entries[l]["a"]),
            B_R=float(entries[l].get("B_R", 0.0)),
        )
        for l in range(l_max + 1)
    )


def _region(cfg: dict) -> SearchRegion:
    p = cfg["poles"]
    sheet = SheetSelector(int(p["k_branch"]), int(p["log_branch"]))
    return SearchRegion(tuple(p["re_range"]), tuple(p["im_range"]), sheet)


def _out_dir(cfg: dict, override: str | None) -> Path:
    d = Path(override or cfg["output"]["dir"])
    d.mkdir(parents=True, exist_ok=True)
    return d


def _fit_paths(out: Path, model: str) -> dict:
    return {
        "result": out / f"fit_{model}.json",
        "table_txt": out / f"params_{model}.txt",
        "table_csv": out / f"params_{model}.csv",
    }


# -- stages ----------------------------------------------------------------


def cmd_generate(cfg: dict, out: Path) -> int:
    d = cfg["dataset"]
    window = tuple(d["window"]) if d.get("window") else None
    ds = generate_dataset(
        _spec(cfg),
        float(d["e_min"]),
        float(d["e_max"]),
        int(d["n_points"]),
        int(d["l_max"]),
        delta_policy=d["delta_policy"],
        window=window,
        window_points=int(d["window_points"]) if window else 0,
    )
    path = out / d["file"]
    dataset_to_csv(ds, path)
    print(f"wrote {path} ({len(ds.points)} points)")
    return EXIT_OK


def _min_options(fit_cfg: dict) -> dict:
    maxiter = int(fit_cfg["maxiter"])
    # a zero iteration budget must not converge through the polish stage
    return {"maxiter": maxiter, "cycles": int(fit_cfg["cycles"]), "polish": maxiter > 0}


def _fit_jost(problem: FitProblem, fit_cfg: dict, region: SearchRegion, seed: int):
    """Multistart, then pole-pinned scan and release; best chi-square wins."""
    opts = _min_options(fit_cfg)
    best = multistart(problem, int(fit_cfg["n_starts"]), seed=seed, options=opts)
    scan = fit_cfg.get("scan") or {}
    if not scan.get("enable") or problem.model != "jost":
        return best

    found: dict = {}
    for entry in scan.get("pin", []):
        l = int(entry["l"])
        if l not in found:
            try:
                found[l] = find_resonances(best.params[l], l, region, mu=problem.mu, z=problem.z)
            except NumericsError:
                found[l] = []
    pinned = []
    for entry in scan.get("pin", []):
        l = int(entry["l"])
        near, radius = float(entry["near"]), float(entry.get("radius", 0.1))
        g_lo, g_hi = float(entry.get("gamma_min", 0.0)), float(entry.get("gamma_max", np.inf))
        hit = [r for r in found[l] if abs(r.E_r - near) < radius and g_lo < r.Gamma < g_hi]
        if hit:
            pinned.append((l, hit[0].E_complex))
        else:
            E, G = entry["fallback"]
            pinned.append((l, complex(E, -0.5 * G)))
    grids = [
        (
            int(s["l"]),
            complex(s["start"][0], -0.5 * s["start"][1]),
            [complex(E, -0.5 * G) for E in s["e_grid"] for G in s["gamma_grid"]],
        )
        for s in scan.get("sweep", [])
    ]
    scanned, _ = pole_scan(
        problem,
        pinned,
        grids,
        sweeps=int(scan.get("sweeps", 2)),
        n_starts=int(scan.get("n_starts", 3)),
        seed=seed,
    )
    released = minimize(problem, scanned.params, options=dict(opts))
    for cand in (scanned, released):
        if cand.chi2 < best.chi2:
            best = cand
    return best


def cmd_fit(cfg: dict, out: Path, model: str | None, seed: int | None) -> int:
    fit_cfg = cfg["fit"]
    model = model or fit_cfg["model"]
    if model not in ("jost", "rmatrix", "jost_taylor"):
        raise ConfigError(f"unknown model {model!r}")
    ds_path = out / cfg["dataset"]["file"]
    if not ds_path.is_file():
        raise ConfigError(f"missing dataset {ds_path}; run the generate stage first")
    ds = dataset_from_csv(ds_path)
    mu, z = _kin_constants(cfg)
    problem = FitProblem(dataset=ds, model=model, configs=_configs(cfg, model), mu=mu, z=z)
    seed = int(fit_cfg["seed"] if seed is None else seed)
    if model == "jost":
        result = _fit_jost(problem, fit_cfg, _region(cfg), seed)
    else:
        result = multistart(problem, int(fit_cfg["n_starts"]), seed=seed, options=_min_options(fit_cfg))
    paths = _fit_paths(out, model)
    paths["result"].write_text(fitting.fit_result_to_json(result, problem))
    header, rows = fitting.param_report(result, problem)
    paths["table_txt"].write_text(fitting.report_text(header, rows))
    paths["table_csv"].write_text(fitting.report_csv(header, rows))
    print(f"wrote {paths['result']} (model={model}, chi2={result.chi2:.6e}, converged={result.converged})")
    if not result.converged:
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def cmd_poles(cfg: dict, out: Path, model: str | None) -> int:
    model = model or cfg["fit"]["model"]
    paths = _fit_paths(out, model)
    if not paths["result"].is_file():
        raise ConfigError(f"missing fit result {paths['result']}; run the fit stage first")
    stored_model, result = fitting.fit_result_from_json(paths["result"].read_text())
    if stored_model == "jost_taylor":
        stored_model = "jost"  # same pole machinery
    region = _region(cfg)
    mu, z = _kin_constants(cfg)
    resonances = []
    for l, params in enumerate(result.params):
        if stored_model == "rmatrix":
            from .rmatrix import rmatrix_pole_search
            from .specfun import Kinematics

            kin_template = Kinematics(1.0, mu=mu, z=z)
            resonances.extend(rmatrix_pole_search(params, kin_template, region))
        else:
            resonances.extend(find_resonances(params, l, region, mu=mu, z=z))
    csv_path = out / f"resonances_{model}.csv"
    resonances_to_csv(resonances, csv_path)
    (out / f"resonances_{model}.json").write_text(
        json.dumps(resonances_to_json_dicts(resonances), indent=2)
    )
    print(f"wrote {csv_path} ({len(resonances)} resonances)")
    return EXIT_OK


def _curve_files(cfg: dict, out: Path, result, model: str) -> None:
    spec = _spec(cfg)
    mu, z = _kin_constants(cfg)
    l_max = int(cfg["dataset"]["l_max"])
    rep = cfg["report"]
    e_lo, e_hi = float(cfg["dataset"]["e_min"]), float(cfg["dataset"]["e_max"])
    grids = {
        "curve": np.linspace(e_lo, e_hi, int(rep["n_curve"])),
        "insert": np.linspace(rep["insert"][0], rep["insert"][1], int(rep["insert_points"])),
    }
    for tag, grid in grids.items():
        exact_rows = []
        fit_rows = []
        for E in grid:
            sig_ex, tot_ex = cross_sections_exact(spec, float(E), l_max)
            sig_fit, tot_fit = sigma_model(result.params, float(E), l_max, mu=mu, z=z)
            exact_rows.append((sig_ex, tot_ex))
            fit_rows.append((sig_fit, tot_fit))
        for l in range(l_max + 1):
            lines = ["E,sigma_exact,sigma_fit"]
            for E, ex, ft in zip(grid, exact_rows, fit_rows):
                lines.append(f"{float(E)!r},{ex[0][l]!r},{ft[0][l]!r}")
            (out / f"{tag}_sigma_l{l}_{model}.csv").write_text("\n".join(lines) + "\n")
        lines = ["E,sigma_exact,sigma_fit"]
        for E, ex, ft in zip(grid, exact_rows, fit_rows):
            lines.append(f"{float(E)!r},{ex[1]!r},{ft[1]!r}")
        (out / f"{tag}_sigma_total_{model}.csv").write_text("\n".join(lines) + "\n")


def cmd_report(cfg: dict, out: Path, model: str | None) -> int:
    model = model or cfg["fit"]["model"]
    paths = _fit_paths(out, model)
    for stage, path in (("fit", paths["result"]), ("poles", out / f"resonances_{model}.json")):
        if not path.is_file():
            raise ConfigError(f"missing artifact {path}; run the {stage} stage first")
    stored_model, result = fitting.fit_result_from_json(paths["result"].read_text())
    if stored_model == "rmatrix":
        raise ConfigError("report curves need a jost-type fit result")
    _curve_files(cfg, out, result, model)
    found = json.loads((out / f"resonances_{model}.json").read_text())
    lines = ["l,E_ref,Gamma_ref,E_found,Gamma_found,dE,dGamma_rel,status"]
    n_fail = 0
    for ref in cfg["report"]["reference"]:
        l, E_ref, G_ref, tol_E, tol_G = int(ref[0]), *(float(x) for x in ref[1:5])
        cand = [r for r in found if r["l"] == l]
        best = min(cand, key=lambda r: abs(r["E_r"] - E_ref), default=None)
        if best is None:
            lines.append(f"{l},{E_ref!r},{G_ref!r},,,,,MISSING")
            n_fail += 1
            continue
        dE = best["E_r"] - E_ref
        dG = best["Gamma"] / G_ref - 1.0
        ok = abs(dE) < tol_E and abs(dG) < tol_G
        n_fail += 0 if ok else 1
        lines.append(
            f"{l},{E_ref!r},{G_ref!r},{best['E_r']!r},{best['Gamma']!r},{dE!r},{dG!r},{'PASS' if ok else 'FAIL'}"
        )
    (out / f"summary_{model}.csv").write_text("\n".join(lines) + "\n")
    print(f"wrote report files for model={model} into {out}")
    if cfg["report"]["reference"]:
        print(f"reference comparison: {len(cfg['report']['reference']) - n_fail} pass, {n_fail} fail")
    return EXIT_OK


def cmd_all(cfg: dict, out: Path, model: str | None, seed: int | None) -> int:
    rc = cmd_generate(cfg, out)
    rc = max(rc, cmd_fit(cfg, out, model, seed))
    rc = max(rc, cmd_poles(cfg, out, model))
    rc = max(rc, cmd_report(cfg, out, model))
    return rc


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="jostfit",
        description="cross-section pipeline: generate, fit, poles, report",
    )
    parser.add_argument("command", choices=["generate", "fit", "rfit", "poles", "report", "all"])
    parser.add_argument("--config", metavar="PATH", help="TOML run configuration")
    parser.add_argument("--seed", type=int, help="override the fit seed")
    parser.add_argument("--out", metavar="DIR", help="override the output directory")
    parser.add_argument("--model", choices=["jost", "rmatrix", "jost_taylor"])
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
        out = _out_dir(cfg, args.out)
        model = "rmatrix" if args.command == "rfit" else args.model
        if args.command == "generate":
            return cmd_generate(cfg, out)
        if args.command in ("fit", "rfit"):
            return cmd_fit(cfg, out, model, args.seed)
        if args.command == "poles":
            return cmd_poles(cfg, out, model)
        if args.command == "report":
            return cmd_report(cfg, out, model)
        return cmd_all(cfg, out, model, args.seed)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericsError, ValueError, ArithmeticError) as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return EXIT_NUMERICS


if __name__ == "__main__":
    sys.exit(main())
