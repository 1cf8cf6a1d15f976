"""Command-line experiment harness.

Subcommands mirror the library pipelines: split, norm, heat, mild-solve,
energy-solve, compose, uniqueness, stability, verify.  A run is configured
by a JSON file plus flag overrides; outputs are CSV traces, JSON
certificates, and binary field dumps, deterministic for a fixed seed.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np


DEFAULTS = {
    "box_length": 2 * math.pi,
    "points_per_axis": 64,
    "p": 4.0,
    "T": 0.5,
    "N": 4.0,
    "seed": 0,
    "norm": 1.0,
    "eps3": None,
    "tol": 1e-9,
    "max_iter": 25,
    "n_nodes": 48,
    "n_steps": 192,
    "out": "out",
}


class ConfigError(ValueError):
    pass


def load_config(args) -> dict:
    cfg = dict(DEFAULTS)
    if getattr(args, "config", None):
        path = Path(args.config)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        try:
            user = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        unknown = set(user) - set(DEFAULTS)
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        cfg.update(user)
    for key in DEFAULTS:
        flag = key.replace("_", "-")
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    for key in ("tol",):
        if cfg[key] is not None and cfg[key] <= 0:
            raise ConfigError(f"tolerance field {key!r} must be positive")
    return cfg


def _grid_part(cfg):
    from .littlewood_paley import build_partition
    from .spectral_core import FrequencyGrid

    grid = FrequencyGrid(cfg["box_length"], int(cfg["points_per_axis"]))
    return grid, build_partition(grid)


def _input_field(cfg, grid, part):
    from .fields import random_heavy_tailed
    from .spectral_core import load_field

    if cfg.get("input"):
        return load_field(cfg["input"])
    return random_heavy_tailed(grid, part, p=cfg["p"], seed=int(cfg["seed"]),
                               norm=cfg["norm"])


def _outdir(cfg) -> Path:
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def write_csv(path: Path, rows: list[dict]):
    if not rows:
        raise ConfigError("refusing to write an empty report")
    cols = list(rows[0])
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=cols)
        w.writeheader()
        for r in rows:
            w.writerow({c: _fmt(r[c]) for c in cols})


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.12g}"
    return v


def write_certificate(path: Path, payload: dict, cfg: dict):
    payload = dict(payload)
    payload["config"] = {k: cfg[k] for k in sorted(cfg) if k != "out"}
    path.write_text(json.dumps(payload, indent=2, sort_keys=True, default=_json_default)
                    + "\n")


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON-serializable: {type(o)}")


# --- subcommands ------------------------------------------------------------

def cmd_split(cfg) -> int:
    from .besov_split import compose_split, derive_exponents

    grid, part = _grid_part(cfg)
    g = _input_field(cfg, grid, part)
    ledger = derive_exponents(cfg["p"])
    sweep = cfg.get("N_sweep") or [cfg["N"]]
    rows = []
    for N in sweep:
        res = compose_split(g, float(N), ledger, part)
        rows.append({"N": float(N), "seed": int(cfg["seed"]), **res.norm_table})
    out = _outdir(cfg)
    write_csv(out / "split.csv", rows)
    write_certificate(out / "split.json",
                      {"ledger": ledger.as_dict(), "rows": rows}, cfg)
    print(f"split: {len(rows)} rows -> {out/'split.csv'}")
    return 0


def cmd_norm(cfg) -> int:
    from .littlewood_paley import BesovIndex, besov_report_dyadic, besov_report_heatflow

    grid, part = _grid_part(cfg)
    g = _input_field(cfg, grid, part)
    s, p = -1.0 + 3.0 / cfg["p"], cfg["p"]
    dy = besov_report_dyadic(g, BesovIndex(s, p, math.inf), part,
                             field_id=f"seed{cfg['seed']}")
    hf = besov_report_heatflow(g, s, p, math.inf, field_id=f"seed{cfg['seed']}")
    out = _outdir(cfg)
    write_certificate(out / "norm.json",
                      {"dyadic": dy.as_dict(), "heatflow": hf.as_dict(),
                       "ratio": hf.value / dy.value if dy.value else 0.0}, cfg)
    print(f"norm: dyadic={dy.value:.6g} heatflow={hf.value:.6g}")
    return 0


def cmd_heat(cfg) -> int:
    from .fourier_calculus import dyadic_times, semigroup_derivative_bound_check
    from .littlewood_paley import BesovIndex, besov_norm_dyadic

    grid, part = _grid_part(cfg)
    g = _input_field(cfg, grid, part)
    ref = besov_norm_dyadic(g, BesovIndex(-0.25, 4.0, math.inf), part)
    ts = dyadic_times(grid)
    rows = []
    for (m, k, r) in [(0, 0, 4.0), (0, 1, 6.0), (1, 0, 4.0), (0, 2, 8.0)]:
        rep = semigroup_derivative_bound_check(g, m, k, r, ts, ref)
        rows.append({"m": m, "k": k, "r": r, "worst_ratio": rep.worst_ratio,
                     "worst_t": rep.worst_t})
    out = _outdir(cfg)
    write_csv(out / "heat.csv", rows)
    print(f"heat: worst ratios {[round(r['worst_ratio'],3) for r in rows]}")
    return 0


def cmd_mild_solve(cfg) -> int:
    from .mild_solver import GateError, picard_solve
    from .spectral_core import save_field

    grid, part = _grid_part(cfg)
    g = _input_field(cfg, grid, part)
    try:
        st = picard_solve(g, cfg["T"], tol=cfg["tol"],
                          max_iter=int(cfg["max_iter"]),
                          n_nodes=int(cfg["n_nodes"]), eps3=cfg["eps3"])
    except GateError as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return 2
    out = _outdir(cfg)
    rows = [{"k": i + 1, "residual": r} for i, r in enumerate(st.residuals)]
    write_csv(out / "mild_iterations.csv", rows)
    write_certificate(out / "mild.json",
                      {"converged": st.converged, "iterations": st.k,
                       "x4_norm": st.x4, **st.certificates}, cfg)
    save_field(out / "mild_final.field", st.v.field(len(st.v) - 1))
    print(f"mild-solve: converged={st.converged} after {st.k} iterations,"
          f" |v|_X4={st.x4:.6g}")
    return 0


def cmd_energy_solve(cfg) -> int:
    from .energy_solver import EnergySlackError, solve_perturbed
    from .mild_solver import CaloricTrajectory, TimeGrid
    from .spectral_core import dealias, save_field, zero_field

    grid, part = _grid_part(cfg)
    g = _input_field(cfg, grid, part)
    V = CaloricTrajectory(dealias(g), TimeGrid(cfg["T"], int(cfg["n_steps"])))
    try:
        traj, trace = solve_perturbed(V, zero_field(grid), cfg["T"],
                                      n_steps=int(cfg["n_steps"]),
                                      subtract_W=False)
    except EnergySlackError as exc:
        print(f"rejected: {exc}", file=sys.stderr)
        return 2
    out = _outdir(cfg)
    write_csv(out / "energy_trace.csv", list(trace.rows()))
    write_certificate(out / "energy.json",
                      {"min_slack": trace.min_slack(), "form": trace.form}, cfg)
    save_field(out / "energy_final.field", traj.field(len(traj) - 1))
    print(f"energy-solve: min slack {trace.min_slack():.3e}")
    return 0


def cmd_compose(cfg) -> int:
    from .energy_solver import GateSweepError, build_composed_solution

    grid, part = _grid_part(cfg)
    g = _input_field(cfg, grid, part)
    try:
        comp = build_composed_solution(g, cfg["T"], p=cfg["p"],
                                       n_steps=int(cfg["n_steps"]),
                                       mild_nodes=int(cfg["n_nodes"]))
    except GateSweepError as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return 2
    out = _outdir(cfg)
    write_csv(out / "compose_trace.csv", list(comp.trace.rows()))
    write_certificate(out / "compose.json",
                      {"ledger": comp.ledger.as_dict(), **comp.certificates},
                      cfg)
    print(f"compose: N={comp.N} gate={comp.certificates['gate_value']:.4g}"
          f" min slack {comp.certificates['energy_min_slack']:.3e}")
    return 0


def cmd_uniqueness(cfg) -> int:
    from .energy_solver import uniqueness_compare
    from .mild_solver import GateError

    grid, part = _grid_part(cfg)
    g = _input_field(cfg, grid, part)
    try:
        rep = uniqueness_compare(g, cfg["T"], n_steps=int(cfg["n_steps"]),
                                 mild_nodes=int(cfg["n_nodes"]))
    except GateError as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return 2
    out = _outdir(cfg)
    write_certificate(out / "uniqueness.json",
                      {"sup_relative_distance": rep.sup_relative_distance,
                       "gate_norm": rep.gate_norm,
                       "sample_times": rep.sample_times}, cfg)
    print(f"uniqueness: sup relative distance {rep.sup_relative_distance:.3e}")
    return 0


def cmd_stability(cfg) -> int:
    from .energy_solver import stability_demo

    grid, part = _grid_part(cfg)
    g = _input_field(cfg, grid, part)
    rep = stability_demo(g, [2, 4, 8], cfg["T"], n_steps=int(cfg["n_steps"]))
    out = _outdir(cfg)
    rows = [{"k": k, "window_distance": d}
            for k, d in zip(rep.ks, rep.window_distances)]
    write_csv(out / "stability.csv", rows)
    write_certificate(out / "stability.json",
                      {"ks": rep.ks, "window_distances": rep.window_distances,
                       "pairings": {str(k): v for k, v in rep.pairings.items()},
                       "failures": {str(k): v for k, v in rep.failures.items()}},
                      cfg)
    print(f"stability: distances {[f'{d:.3e}' for d in rep.window_distances]}")
    return 0


def cmd_verify(cfg) -> int:
    """Fast invariant sweep on a small grid; exit 0 iff everything holds."""
    from .besov_split import compose_split, derive_exponents
    from .fields import random_divergence_free, taylor_green
    from .fourier_calculus import leray_project, riesz_pressure
    from .littlewood_paley import block_range, block_symbol, build_partition
    from .spectral_core import (FrequencyGrid, divergence_linf, l2_norm,
                                scalar_to_physical, to_physical, to_spectral)

    grid = FrequencyGrid(cfg["box_length"], min(int(cfg["points_per_axis"]), 16))
    part = build_partition(grid)
    failures = []

    tot = np.zeros_like(grid.k_mag)
    for j in block_range(grid):
        tot += block_symbol(grid, j, part)
    err = float(np.abs(tot[grid.k_mag > 0] - 1).max())
    if err > 1e-12:
        failures.append(f"telescoping: {err:.3e}")

    rng = np.random.default_rng(int(cfg["seed"]))
    s = rng.standard_normal((3, grid.n, grid.n, grid.n))
    f = to_spectral(s, grid)
    rt = float(np.abs(to_physical(f) - s).max())
    if rt > 1e-12 * max(1.0, float(np.abs(s).max())):
        failures.append(f"roundtrip: {rt:.3e}")

    g = random_divergence_free(grid, part, p=cfg["p"], seed=int(cfg["seed"]))
    if divergence_linf(g) > 1e-10:
        failures.append("divergence of generator output")
    pp = leray_project(g)
    if float(np.abs(pp.coeffs - g.coeffs).max()) > 1e-12:
        failures.append("Leray idempotence on divergence-free field")

    led = derive_exponents(cfg["p"])
    res = compose_split(g, cfg["N"], led, part)
    if res.norm_table["reconstruction_error"] > 1e-10:
        failures.append(f"split reconstruction: {res.norm_table['reconstruction_error']:.3e}")

    tg = taylor_green(grid)
    x = grid.x_vectors
    exact = -(np.cos(2 * x[0]) + np.cos(2 * x[1])) / 4
    perr = float(np.abs(scalar_to_physical(riesz_pressure(tg, tg)) - exact).max())
    if perr > 1e-10:
        failures.append(f"pressure closed form: {perr:.3e}")

    for msg in failures:
        print(f"FAIL {msg}", file=sys.stderr)
    if not failures:
        print("verify: all invariant checks passed")
    return 1 if failures else 0


COMMANDS = {
    "split": cmd_split,
    "norm": cmd_norm,
    "heat": cmd_heat,
    "mild-solve": cmd_mild_solve,
    "energy-solve": cmd_energy_solve,
    "compose": cmd_compose,
    "uniqueness": cmd_uniqueness,
    "stability": cmd_stability,
    "verify": cmd_verify,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="besovflow",
                                 description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="JSON config file")
        sp.add_argument("--box-length", dest="box_length", type=float)
        sp.add_argument("--points-per-axis", dest="points_per_axis", type=int)
        sp.add_argument("--p", type=float)
        sp.add_argument("--T", type=float)
        sp.add_argument("--N", type=float)
        sp.add_argument("--N-sweep", dest="N_sweep",
                        help="lo:hi:steps geometric sweep", default=None)
        sp.add_argument("--seed", type=int)
        sp.add_argument("--norm", type=float)
        sp.add_argument("--eps3", type=float)
        sp.add_argument("--tol", type=float)
        sp.add_argument("--max-iter", dest="max_iter", type=int)
        sp.add_argument("--n-nodes", dest="n_nodes", type=int)
        sp.add_argument("--n-steps", dest="n_steps", type=int)
        sp.add_argument("--input", help="binary field dump to load")
        sp.add_argument("--out", help="output directory")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args)
        if getattr(args, "N_sweep", None):
            lo, hi, steps = args.N_sweep.split(":")
            cfg["N_sweep"] = list(np.geomspace(float(lo), float(hi), int(steps)))
        if getattr(args, "input", None):
            cfg["input"] = args.input
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    return COMMANDS[args.command](cfg)


if __name__ == "__main__":
    sys.exit(main())
