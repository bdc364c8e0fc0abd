"""Command-line front end.

Subcommands ``evolve``, ``gibbs``, ``diagonalize`` and ``modes`` each read a
YAML (or JSON) config, validate it against the schemas shipped in
``bosehfb/schemas`` and write CSV/JSON/NPZ outputs to ``--out``.

Units: lengths in torus units (the box is ``[-L, L)^d``), energies in units
where the one-body operator is ``-Laplacian + V``.

Exit codes: 0 success, 2 config error, 3 numerical abort, 4 admissibility
rejection.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
import warnings
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np
import yaml

from . import kernels
from .bogoliubov import (GAPLESS, STABLE, UNSTABLE, bogoliubov_modes, default_constants,
                         modes_to_csv, normalization_defect)
from .dynamics import IntegratorConfig, NumericalAbortError, evolve
from .gibbs import GibbsParams, critical_density, thermodynamic_sweep
from .grid import GridField, make_grid, plane_wave
from .meanfield import PotentialPair
from .states import (InadmissibleStateError, QuasifreeState, check_admissible, load_state,
                     sample_random_state, save_state, squeezed_state)
from .symplectic import diagonalize_gamma

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_INADMISSIBLE = 4


class ConfigError(ValueError):
    """Malformed config; the message names the offending field path."""


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def load_schema(name: str) -> dict:
    text = resources.files("bosehfb").joinpath("schemas", f"{name}.json").read_text()
    return json.loads(text)


def load_config(path, schema: str) -> dict:
    try:
        with open(path) as fh:
            cfg = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from exc
    validate(cfg, schema)
    return cfg


def validate(doc, schema: str) -> None:
    validator = jsonschema.Draft202012Validator(load_schema(schema))
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        where = "/".join(str(p) for p in err.absolute_path) or "<root>"
        raise ConfigError(f"config field {where}: {err.message}")


# --- config interpretation ---------------------------------------------------

def build_grid(spec: dict):
    return make_grid(int(spec["d"]), int(spec["N"]), float(spec["L"]))


def _site_values(grid, value, field: str) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        return np.full(grid.n_sites, float(arr))
    if arr.size != grid.n_sites:
        raise ConfigError(f"config field {field}: expected {grid.n_sites} site values, got {arr.size}")
    return arr.reshape(-1)


def build_potential(grid, spec: dict) -> PotentialPair:
    V = _site_values(grid, spec.get("external", 0.0), "potential/external")
    if "contact" in spec:
        return PotentialPair.contact(grid, float(spec["contact"]), V)
    if "pair_values" in spec:
        v = _site_values(grid, spec["pair_values"], "potential/pair_values")
    else:
        gs = spec["gaussian"]
        r2 = np.sum(grid.positions ** 2, axis=1)
        v = gs["strength"] * np.exp(-r2 / (2.0 * gs["width"] ** 2))
    return PotentialPair.grid_function(grid, v, V)


def build_state(spec: dict, grid=None, seed: int | None = None) -> QuasifreeState:
    """Initial state from a snapshot file or a named preset.

    ``seed`` overrides the ``random`` preset's seed.
    """
    if "file" in spec:
        try:
            rho = load_state(spec["file"])
        except (OSError, KeyError, ValueError) as exc:
            raise ConfigError(f"config field initial_state/file: cannot load snapshot: {exc}") from exc
        if grid is not None and rho.grid != grid:
            raise ConfigError(f"initial_state/file: snapshot grid {rho.grid} differs from {grid}")
        return rho
    if grid is None:
        raise ConfigError("config field grid: required for preset states")
    preset = spec["preset"]
    if preset == "vacuum":
        return QuasifreeState.vacuum(grid)
    if preset == "plane_wave":
        m = spec.get("mode", [0] * grid.dim)
        if len(m) != grid.dim:
            raise ConfigError(f"config field initial_state/mode: expected {grid.dim} integers")
        amp = float(spec.get("amplitude", 1.0))
        phi = GridField(grid, amp * plane_wave(grid, m).values)
        empty = QuasifreeState.vacuum(grid)
        return QuasifreeState(phi, empty.gamma, empty.sigma)
    if preset == "squeezed":
        return squeezed_state(grid, float(spec.get("r", 0.5)))
    s = int(spec.get("seed", 0)) if seed is None else int(seed)
    return sample_random_state(grid, s, float(spec.get("scale", 0.1)), spec.get("cutoff", 2))


def _require_admissible(rho: QuasifreeState) -> None:
    report = check_admissible(rho)
    if not report.admissible:
        raise InadmissibleStateError(f"state is not admissible: {report}")


# --- subcommands ---------------------------------------------------------------

def run_evolve(cfg: dict, out: Path, seed: int | None = None, log=print) -> int:
    grid = build_grid(cfg["grid"])
    pot = build_potential(grid, cfg["potential"])
    rho0 = build_state(cfg["initial_state"], grid, seed)
    icfg = cfg["integrator"]
    try:
        integ = IntegratorConfig(float(icfg["dt"]), icfg.get("scheme", "rk4"),
                                 float(icfg["t_final"]), int(icfg.get("output_stride", 1)),
                                 bool(icfg.get("repair_drift", False)))
    except ValueError as exc:
        raise ConfigError(f"config field integrator: {exc}") from exc
    _require_admissible(rho0)
    traj = evolve(rho0, pot, None, integ)
    traj.to_csv(out / "trajectory.csv")
    save_state(out / "final_state.npz", traj.final)
    if cfg.get("write_snapshots", False):
        for i, t in enumerate(traj.snapshot_times):
            save_state(out / f"snapshot_{i:05d}.npz", traj.state(i))
    summary = {
        "steps": integ.n_steps,
        "t_final": traj.times[-1],
        "scheme": integ.scheme,
        "number_drift": _abs_drift(traj.number),
        "energy_drift": _abs_drift(traj.energy),
        "min_eig_Gamma": float(min(traj.min_eig)),
        "backend": kernels.BACKEND,
    }
    _write_json(out / "summary.json", summary, "evolve_summary")
    log(f"evolve: {integ.n_steps} steps, N drift {_fmt(summary['number_drift'])}, "
        f"E drift {_fmt(summary['energy_drift'])}")
    return EXIT_OK


def _abs_drift(series) -> float:
    vals = np.asarray(series, dtype=float)
    return float(np.max(np.abs(vals - vals[0])))


def gibbs_params(cfg: dict) -> GibbsParams:
    d = int(cfg["d"])
    beta = float(cfg["beta"])
    if "n" in cfg:
        n = float(cfg["n"])
    else:
        if d < 3:
            raise ConfigError("config field n_over_nc: needs d >= 3 (no critical density below)")
        n = float(cfg["n_over_nc"]) * critical_density(beta, d)
    L0 = float(cfg["L_list"][0])
    return GibbsParams(beta, n, float(cfg["g"]), make_grid(d, 2, L0))


def run_gibbs(cfg: dict, out: Path, log=print) -> int:
    params = gibbs_params(cfg)
    if params.grid.dim < 3:
        warnings.warn(f"d={params.grid.dim} < 3: condensate quantities are not defined; "
                      "solving finite-L chemical potentials only", stacklevel=2)
    try:
        result = thermodynamic_sweep(params, cfg["L_list"], float(cfg.get("tol", 1e-12)),
                                     cfg.get("points_per_side"),
                                     float(cfg.get("beta_k2_max", 40.0)))
    except ValueError as exc:
        raise ConfigError(f"config field L_list: {exc}") from exc
    result.to_csv(out / "sweep.csv")
    summary = result.summary()
    validate(summary, "gibbs_summary")
    result.to_json(out / "summary.json")
    if result.n_c is not None:
        log(f"gibbs: n_c {_fmt(result.n_c)}, predicted fraction "
            f"{_fmt(result.condensate_fraction_predicted)}, measured at L={result.rows[-1].L:g} "
            f"{_fmt(result.rows[-1].zero_mode_fraction)}")
    else:
        log(f"gibbs: {len(result.rows)} finite-L solves")
    return EXIT_OK


def decay_fit(times, norms, floor: float) -> tuple[float | None, float | None]:
    """Least-squares slope and R^2 of ``log ||sigma_t||`` against ``t`` above ``floor``."""
    t = np.asarray(times)
    y = np.asarray(norms)
    keep = y > floor
    if np.count_nonzero(keep) < 3:
        return None, None
    t, ly = t[keep], np.log(y[keep])
    slope, icpt = np.polyfit(t, ly, 1)
    var = np.var(ly)
    r2 = 1.0 - np.var(ly - (slope * t + icpt)) / var if var > 0 else 1.0
    return float(slope), float(r2)


def run_diagonalize(cfg: dict, out: Path, seed: int | None = None, log=print) -> int:
    grid = build_grid(cfg["grid"]) if "grid" in cfg else None
    rho = build_state(cfg["state"], grid, seed)
    _require_admissible(rho)
    tol = float(cfg.get("tol", 1e-8))
    _, G, S = rho.matrices()
    try:
        res = diagonalize_gamma(G, S, tol, float(cfg.get("dt", 0.05)))
    except RuntimeError as exc:
        raise NumericalAbortError(str(exc)) from exc
    spec = np.sort(res.spectrum())
    with open(out / "spectrum.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "gamma_prime_eigenvalue"])
        for i, x in enumerate(spec):
            w.writerow([i, _fmt(x)])
    with open(out / "sigma_decay.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "sigma_hs_norm"])
        for t, s in zip(res.times, res.sigma_norms):
            w.writerow([_fmt(t), _fmt(s)])
    slope, r2 = decay_fit(res.times, res.sigma_norms, 10.0 * tol)
    summary = {
        "tol": tol,
        "residual": res.residual,
        "clipped": res.clipped,
        "converged_time": float(res.converged_time),
        "sigma_initial": float(res.sigma_norms[0]),
        "decay_slope": slope,
        "decay_r2": r2,
        "spectrum_max": float(spec[-1]) if spec.size else 0.0,
    }
    _write_json(out / "summary.json", summary, "diagonalize_summary")
    log(f"diagonalize: residual {_fmt(res.residual)}, t={res.converged_time:g}")
    return EXIT_OK


def run_modes(cfg: dict, out: Path, log=print) -> int:
    grid = build_grid(cfg["grid"])
    g, n_total, n0 = float(cfg["g"]), float(cfg["n_total"]), float(cfg["n0"])
    dh, dk = default_constants(n_total, n0, g)
    c_h = float(cfg.get("c_h", dh))
    c_k = float(cfg.get("c_k", dk))
    modes = bogoliubov_modes(n_total, n0, g, grid, c_h, c_k)
    modes_to_csv(modes, out / "modes.csv")
    stable = [m for m in modes if m.status == STABLE]
    summary = {
        "c_h": c_h,
        "c_k": c_k,
        "n_modes": len(modes),
        "n_stable": len(stable),
        "n_gapless": sum(m.status == GAPLESS for m in modes),
        "n_unstable": sum(m.status == UNSTABLE for m in modes),
        "max_normalization_defect": max((normalization_defect(m) for m in stable), default=0.0),
    }
    _write_json(out / "summary.json", summary, "modes_summary")
    log(f"modes: {summary['n_stable']} stable, {summary['n_gapless']} gapless, "
        f"{summary['n_unstable']} unstable")
    return EXIT_OK


def _write_json(path: Path, doc: dict, schema: str) -> None:
    validate(doc, schema)
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


# --- entry point ---------------------------------------------------------------

_SCHEMAS = {"evolve": "evolve_config", "gibbs": "gibbs_config",
            "diagonalize": "diagonalize_config", "modes": "modes_config"}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bosehfb", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _SCHEMAS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, type=Path, help="YAML or JSON config file")
        p.add_argument("--out", type=Path, default=Path("."), help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override the random preset seed")
        p.add_argument("--quiet", action="store_true", help="suppress progress messages")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)

    def log(msg):
        if not args.quiet:
            print(msg)

    try:
        cfg = load_config(args.config, _SCHEMAS[args.command])
        args.out.mkdir(parents=True, exist_ok=True)
        if args.command == "evolve":
            return run_evolve(cfg, args.out, args.seed, log)
        if args.command == "gibbs":
            return run_gibbs(cfg, args.out, log)
        if args.command == "diagonalize":
            return run_diagonalize(cfg, args.out, args.seed, log)
        return run_modes(cfg, args.out, log)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InadmissibleStateError as exc:
        print(f"admissibility rejection: {exc}", file=sys.stderr)
        return EXIT_INADMISSIBLE
    except NumericalAbortError as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
