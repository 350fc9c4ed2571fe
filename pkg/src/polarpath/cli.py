"""Experiment runner and reproducibility harness.

Subcommands:

  run               execute one experiment from a JSON config (flags override)
  compare           fieldwise comparison of two output files
  list-experiments  enumerate the available experiment ids

Exit codes: 0 ok, 1 tolerance breach, 2 config error, 3 numeric error.
Outputs are written as <experiment>_<timestamp>.{csv,json} plus a manifest
recording the config hash and software version; payload contents carry no
timestamps, so reruns with the same config and seed compare bit-identical.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from ._pool import resolve_threads
from .generators import Hamiltonian, PseudoHamiltonian
from .geometry import Point2, chart_from_id, default_scaling, measure_density, unit_scaling
from .grids import GaussianRing, polar_grid, sample
from .kernel import (
    GridQuadrature,
    SliceConfig,
    delta_limit_check,
    iterate_kernel,
    stp_action,
    write_kernel_binary,
    write_kernel_csv,
)
from .operators import extract_effective_potential, extrapolate_inverse_square
from .oracle import ExactKernelSpec, free_polar_kernel, standard_point_battery
from .scaling import apply_scaled_stp_to_probe, scaled_kernel_grid, scaled_ring_action
from .schrod import effective_generator, effective_generator_convergence, sum_odd, sum_odd_squares

EXIT_OK = 0
EXIT_TOLERANCE = 1
EXIT_CONFIG = 2
EXIT_NUMERIC = 3

_EXPERIMENTS = {}


class ConfigError(ValueError):
    pass


class NumericError(RuntimeError):
    pass


_KNOWN_FIELDS = {
    "experiment",
    "chart",
    "hbar",
    "m",
    "seed",
    "output_dir",
    "threads",
    "n_slices",
    "eps",
    "eps_values",
    "tau",
    "N_values",
    "N_max",
    "grid",
    "dump_kernels",
}
_GRID_FIELDS = {"n_q1", "n_q2", "q1_lo", "q1_hi"}

_DEFAULTS = {
    "chart": "polar2d",
    "hbar": 1.0,
    "m": 1.0,
    "seed": 20260809,
    "output_dir": ".",
    "threads": None,
    "dump_kernels": False,
}


def validate_config(config: dict) -> dict:
    unknown = set(config) - _KNOWN_FIELDS
    if unknown:
        raise ConfigError(f"unknown config field(s): {', '.join(sorted(unknown))}")
    merged = dict(_DEFAULTS)
    merged.update(config)
    if merged.get("experiment") not in _EXPERIMENTS:
        raise ConfigError(
            f"field 'experiment' must be one of {sorted(_EXPERIMENTS)}; got {merged.get('experiment')!r}"
        )
    for field in ("hbar", "m", "eps", "tau"):
        if field in merged and merged[field] is not None and merged[field] <= 0:
            raise ConfigError(f"field '{field}' must be positive; got {merged[field]}")
    if "n_slices" in merged and merged["n_slices"] is not None and int(merged["n_slices"]) < 1:
        raise ConfigError(f"field 'n_slices' must be >= 1; got {merged['n_slices']}")
    if "N_values" in merged:
        if any(int(n) < 1 for n in merged["N_values"]):
            raise ConfigError("field 'N_values' entries must be >= 1")
    if "N_max" in merged and int(merged["N_max"]) < 1:
        raise ConfigError(f"field 'N_max' must be >= 1; got {merged['N_max']}")
    if "eps_values" in merged:
        if any(e <= 0 for e in merged["eps_values"]):
            raise ConfigError("field 'eps_values' entries must be positive")
    if "grid" in merged:
        bad = set(merged["grid"]) - _GRID_FIELDS
        if bad:
            raise ConfigError(f"unknown grid field(s): {', '.join(sorted(bad))}")
        if merged["grid"].get("n_q1", 8) < 8 or merged["grid"].get("n_q2", 8) < 8:
            raise ConfigError("grid sizes must be at least 8")
    chart_from_id(merged["chart"])  # raises ValueError on bad ids
    return merged


def config_hash(config: dict) -> str:
    """Hash of the scientific content: execution details are excluded."""
    hashed = {k: v for k, v in config.items() if k not in ("output_dir", "threads")}
    payload = json.dumps(hashed, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(payload.encode()).hexdigest()[:16]


def _write_json(path: Path, payload: dict, chash: str) -> None:
    payload = dict(payload)
    payload["config_hash"] = chash
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_csv(path: Path, header: list, rows: list, chash: str) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# config_hash={chash}\n")
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _experiment(name):
    def register(fn):
        _EXPERIMENTS[name] = fn
        return fn

    return register


# ---------------------------------------------------------------------------
# experiments
# ---------------------------------------------------------------------------


@_experiment("identities")
def _run_identities(config, outdir, chash, stamp):
    n_max = int(config.get("N_max", 10_000))
    mismatches = 0
    rows = []
    for N in range(1, n_max + 1):
        odd = sum_odd(N)
        odd_sq = sum_odd_squares(N)
        brute = N * N
        brute_sq = N * (2 * N - 1) * (2 * N + 1) // 3
        ok = odd == brute and odd_sq == brute_sq
        mismatches += 0 if ok else 1
        if N <= 20 or N % max(1, n_max // 20) == 0:
            rows.append([N, odd, odd_sq, int(ok)])
    from scipy.integrate import quad

    from .schrod import beta_moment

    worst_rel = 0.0
    for n in range(7):
        for r in (0.5, 1.0, 2.0):
            for N in (1, 10, 100):
                upper = 60.0 / (2.0 * r * N)
                ref, _ = quad(
                    lambda b: b ** n * math.exp(-2 * b * r * N), 0, upper, epsabs=0, epsrel=1e-13
                )
                worst_rel = max(worst_rel, abs(beta_moment(n, r, N) - ref) / ref)
    csv_path = outdir / f"identities_{stamp}.csv"
    _write_csv(csv_path, ["N", "sum_odd", "sum_odd_squares", "match"], rows, chash)
    payload = {
        "N_max": n_max,
        "mismatches": mismatches,
        "beta_moment_worst_rel_error": worst_rel,
    }
    _write_json(outdir / f"identities_{stamp}.json", payload, chash)
    ok = mismatches == 0 and worst_rel < 1e-10
    return ok, payload, [csv_path.name, f"identities_{stamp}.json"]


@_experiment("effective_generator")
def _run_effective_generator(config, outdir, chash, stamp):
    n_values = [int(n) for n in config.get("N_values", [16, 32, 64, 128, 256])]
    grid = polar_grid(0.8, 3.4, 520, 256)
    psi = sample(grid, GaussianRing(s=1.0, r_bar=2.0, l=1))
    study = effective_generator_convergence(n_values, psi, m=config["m"], hbar=config["hbar"])
    rows = [[N, repr(res)] for N, res in zip(study.N_values, study.residuals_l2)]
    csv_path = outdir / f"effective_generator_{stamp}.csv"
    _write_csv(csv_path, ["N", "residual_L2"], rows, chash)
    report = effective_generator(n_values[-1], psi, m=config["m"], hbar=config["hbar"])
    payload = {
        "N_values": study.N_values,
        "residuals_L2": study.residuals_l2,
        "fitted_order": study.fitted_order,
        "largest_N_residual_max": report.residual_max,
    }
    _write_json(outdir / f"effective_generator_{stamp}.json", payload, chash)
    ok = 1.5 <= study.fitted_order <= 2.5 and study.residuals_l2[-1] < 1e-3
    if math.isnan(study.fitted_order):
        raise NumericError("fitted order is NaN")
    return ok, payload, [csv_path.name, f"effective_generator_{stamp}.json"]


@_experiment("kernel_convergence")
def _run_kernel_convergence(config, outdir, chash, stamp):
    from .oracle import heat_kernel_cartesian

    chart = chart_from_id("cartesian2d")
    h = PseudoHamiltonian(Hamiltonian(chart, config["m"], config["hbar"]), unit_scaling(chart), 0.0)
    tau = float(config.get("tau", 0.5))
    n_slices = int(config.get("n_slices", 8))
    sizes = [int(n) for n in config.get("N_values", [32, 64])]
    rows = []
    errors = []
    for n in sizes:
        cfg = SliceConfig(n_slices, tau / n_slices, GridQuadrature(n, n, -6.0, 6.0))
        kernel = iterate_kernel(cfg, chart, h, threads=config["threads"])
        grid = kernel.grid
        i0, j0 = grid.node_index(0.0, 0.0)
        col = np.ravel_multi_index((i0, j0), grid.shape)
        q1, q2 = kernel.node_coordinates()
        exact = heat_kernel_cartesian(
            np.stack([q1, q2], axis=-1), np.array([grid.q1[i0], grid.q2[j0]]), tau,
            config["m"], config["hbar"],
        )
        central = (np.abs(q1) <= 3.0) & (np.abs(q2) <= 3.0)
        err = float(np.max(np.abs(kernel.values[:, col] - exact)[central] / exact[central]))
        errors.append(err)
        rows.append([n, repr(err)])
        if config.get("dump_kernels") and n <= 32:
            write_kernel_binary(outdir / f"kernel_convergence_{stamp}_grid{n}.bin", kernel)
    if any(math.isnan(e) for e in errors):
        raise NumericError("kernel error is NaN")
    csv_path = outdir / f"kernel_convergence_{stamp}.csv"
    _write_csv(csv_path, ["grid_points_per_axis", "max_rel_error_central"], rows, chash)
    payload = {"grid_sizes": sizes, "max_rel_errors": errors, "tau": tau, "n_slices": n_slices}
    _write_json(outdir / f"kernel_convergence_{stamp}.json", payload, chash)
    ok = errors[-1] <= 0.02 and all(b <= a for a, b in zip(errors, errors[1:]))
    return ok, payload, [csv_path.name, f"kernel_convergence_{stamp}.json"]


@_experiment("scaled_vs_unscaled")
def _run_scaled_vs_unscaled(config, outdir, chash, stamp):
    chart = chart_from_id("polar2d")
    H = Hamiltonian(chart, config["m"], config["hbar"])
    tau = float(config.get("tau", 0.2))
    grid_cfg = config.get("grid", {})
    quad_spec = GridQuadrature(
        int(grid_cfg.get("n_q1", 24)),
        int(grid_cfg.get("n_q2", 16)),
        float(grid_cfg.get("q1_lo", 0.8)),
        float(grid_cfg.get("q1_hi", 3.2)),
    )
    cfg = SliceConfig(int(config.get("n_slices", 1)), tau, quad_spec)
    coincide = scaled_kernel_grid(cfg, chart, H, unit_scaling(chart))
    unscaled = iterate_kernel(cfg, chart, PseudoHamiltonian(H, unit_scaling(chart), 0.0))
    coincidence_diff = float(np.max(np.abs(coincide.values - unscaled.values)))
    sqrtg = scaled_kernel_grid(SliceConfig(1, tau, quad_spec), chart, H, default_scaling(chart))
    scheme_gap = float(np.max(np.abs(sqrtg.values - unscaled.values)))

    eps_values = [float(e) for e in config.get("eps_values", [1e-3, 5e-4])]
    probes = [
        GaussianRing(s=0.25, l=0),
        GaussianRing(s=0.25, l=1),
        GaussianRing(s=1.0 / 6.0, l=2),
        GaussianRing(s=0.5, l=0),
        GaussianRing(s=0.5, l=1),
        GaussianRing(s=1.0, l=1),
    ]
    points = [Point2(r, th) for r in (1.6, 2.0, 2.4) for th in (0.3, 2.0, 4.2)]
    h_unscaled = PseudoHamiltonian(H, unit_scaling(chart), 0.0)
    fit_unscaled = extract_effective_potential(
        stp_action(chart, h_unscaled), eps_values, probes, points, config["m"], config["hbar"]
    )
    ladder = [1, 2, 3]
    fits = [
        extract_effective_potential(
            scaled_ring_action(N, config["m"], config["hbar"]), eps_values, probes, points,
            config["m"], config["hbar"],
        )
        for N in ladder
    ]
    limit = extrapolate_inverse_square(ladder, [f.c for f in fits], [f.ci_halfwidth for f in fits])
    payload = {
        "alpha_unit_coincidence_max_diff": coincidence_diff,
        "sqrtg_vs_unscaled_max_diff": scheme_gap,
        "c_unscaled": fit_unscaled.c,
        "c_unscaled_ci": fit_unscaled.ci_halfwidth,
        "c_unscaled_significant": fit_unscaled.significantly_nonzero(),
        "c_by_slices": {str(N): [f.c, f.ci_halfwidth] for N, f in zip(ladder, fits)},
        "c_scaled_limit": limit.c_inf,
        "c_scaled_limit_ci": limit.ci_halfwidth,
        "c_scaled_consistent_with_zero": limit.consistent_with_zero(),
        "slice_defect_slope": limit.slope,
    }
    _write_json(outdir / f"scaled_vs_unscaled_{stamp}.json", payload, chash)
    outputs = [f"scaled_vs_unscaled_{stamp}.json"]
    if config.get("dump_kernels"):
        for tag, k in (("scaled_unit", coincide), ("unscaled", unscaled), ("scaled_sqrtg", sqrtg)):
            name = f"scaled_vs_unscaled_{stamp}_{tag}.bin"
            write_kernel_binary(outdir / name, k)
            outputs.append(name)
    ok = (
        coincidence_diff <= 1e-12
        and scheme_gap > 1e-6
        and fit_unscaled.significantly_nonzero()
        and abs(limit.c_inf) <= 0.005
        and limit.consistent_with_zero()
    )
    return ok, payload, outputs


@_experiment("oracle_crosscheck")
def _run_oracle_crosscheck(config, outdir, chash, stamp):
    battery = standard_point_battery(seed=int(config["seed"]))
    reps = ("cartesian_closed_form", "polar_transform", "bessel_series", "image_sum")
    rows = []
    worst = 0.0
    for tau in (0.25, 0.5):
        specs = [ExactKernelSpec(tau=tau, representation=r) for r in reps]
        for (r, th, r0, th0) in battery:
            vals = [s.evaluate(r, th, r0, th0) for s in specs]
            spread = float(np.max(vals) - np.min(vals))
            worst = max(worst, spread)
            rows.append([tau, r, th, r0, th0] + [repr(v) for v in vals] + [repr(spread)])
    csv_path = outdir / f"oracle_crosscheck_{stamp}.csv"
    _write_csv(
        csv_path,
        ["tau", "r", "theta", "r0", "theta0"] + list(reps) + ["spread"],
        rows,
        chash,
    )
    payload = {"worst_pairwise_spread": worst, "n_pairs": len(battery)}
    _write_json(outdir / f"oracle_crosscheck_{stamp}.json", payload, chash)
    return worst < 1e-4, payload, [csv_path.name, f"oracle_crosscheck_{stamp}.json"]


@_experiment("delta_limit")
def _run_delta_limit(config, outdir, chash, stamp):
    chart = chart_from_id("polar2d")
    H = Hamiltonian(chart, config["m"], config["hbar"])
    alpha = default_scaling(chart)
    eps_values = [float(e) for e in config.get("eps_values", [4e-3, 2e-3, 1e-3])]
    probes = {
        "ring_l0": GaussianRing(s=0.25, l=0),
        "ring_l1": GaussianRing(s=0.25, l=1),
        "ring_l2": GaussianRing(s=1.0 / 6.0, l=2),
    }
    q = Point2(2.0, 0.7)
    rows = []
    worst_at_target = 0.0
    for eps in eps_values:
        for label, probe in probes.items():
            val = apply_scaled_stp_to_probe(chart, H, alpha, q, eps, probe)
            ref = float(probe(q.q1, q.q2))
            rel = abs(val - ref) / abs(ref)
            rows.append([eps, label, repr(rel)])
            if eps == min(eps_values):
                worst_at_target = max(worst_at_target, rel)
    h_unscaled = PseudoHamiltonian(H, unit_scaling(chart), 0.0)
    report = delta_limit_check(chart, h_unscaled, eps_values, probes=probes, point=q)
    csv_path = outdir / f"delta_limit_{stamp}.csv"
    _write_csv(csv_path, ["eps", "probe", "rel_error_scaled"], rows, chash)
    payload = {
        "eps_values": eps_values,
        "worst_scaled_probe_error_at_smallest_eps": worst_at_target,
        "unscaled_probe_rates": report.probe_rates,
        "unscaled_mass_rate": report.mass_rate,
    }
    _write_json(outdir / f"delta_limit_{stamp}.json", payload, chash)
    return worst_at_target <= 1e-3, payload, [csv_path.name, f"delta_limit_{stamp}.json"]


# ---------------------------------------------------------------------------
# compare
# ---------------------------------------------------------------------------


def _load_table(path: Path):
    if path.suffix == ".bin":
        from .kernel import read_kernel_binary

        kernel = read_kernel_binary(path)
        # the scaled flag and alpha id are payload metadata, not schema:
        # scaled and unscaled dumps of the same layout stay comparable
        schema = (
            "kernel",
            kernel.grid.chart.kind,
            kernel.grid.shape,
            kernel.n_slices,
        )
        return schema, {"values": kernel.values.ravel()}, None
    if path.suffix == ".json":
        with open(path) as fh:
            payload = json.load(fh)
        chash = payload.pop("config_hash", None)
        flat = {}

        def flatten(prefix, obj):
            if isinstance(obj, dict):
                for k, v in sorted(obj.items()):
                    flatten(f"{prefix}.{k}" if prefix else k, v)
            elif isinstance(obj, (list, tuple)):
                vals = [v for v in obj if isinstance(v, (int, float))]
                if len(vals) == len(obj):
                    flat[prefix] = np.asarray(obj, dtype=float)
                else:
                    for i, v in enumerate(obj):
                        flatten(f"{prefix}[{i}]", v)
            elif isinstance(obj, bool):
                flat[prefix] = np.asarray([float(obj)])
            elif isinstance(obj, (int, float)):
                flat[prefix] = np.asarray([float(obj)])

        flatten("", payload)
        return ("json", tuple(sorted(flat))), flat, chash
    if path.suffix == ".csv":
        chash = None
        with open(path) as fh:
            first = fh.readline()
            if first.startswith("# config_hash="):
                chash = first.strip().split("=", 1)[1]
            else:
                fh.seek(0)
            reader = csv.reader(fh)
            header = next(reader)
            rows = list(reader)
        cols = {}
        for j, name in enumerate(header):
            try:
                cols[name] = np.asarray([float(row[j]) for row in rows])
            except ValueError:
                continue
        return ("csv", tuple(header)), cols, chash
    raise ConfigError(f"unsupported file type: {path.suffix}")


def run_compare(file_a: str, file_b: str, tolerance: float, force: bool = False) -> tuple[int, dict]:
    schema_a, data_a, hash_a = _load_table(Path(file_a))
    schema_b, data_b, hash_b = _load_table(Path(file_b))
    if schema_a != schema_b:
        return EXIT_CONFIG, {"error": "schema mismatch", "a": str(schema_a), "b": str(schema_b)}
    if hash_a and hash_b and hash_a != hash_b and not force:
        return EXIT_CONFIG, {
            "error": "config hash mismatch (use --force to compare anyway)",
            "a": hash_a,
            "b": hash_b,
        }
    report = {}
    worst = 0.0
    for key in data_a:
        a = data_a[key]
        b = data_b[key]
        if a.shape != b.shape:
            return EXIT_CONFIG, {"error": f"shape mismatch in field {key}"}
        diff = np.abs(a - b)
        report[key] = {
            "max_diff": float(np.max(diff)) if diff.size else 0.0,
            "l2_diff": float(np.linalg.norm(diff)),
        }
        worst = max(worst, report[key]["max_diff"])
    status = EXIT_OK if worst <= tolerance else EXIT_TOLERANCE
    return status, {"fields": report, "worst_max_diff": worst, "tolerance": tolerance}


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def run_experiment(config: dict) -> tuple[int, dict]:
    config = validate_config(config)
    chash = config_hash(config)
    outdir = Path(config["output_dir"])
    outdir.mkdir(parents=True, exist_ok=True)
    stamp = time.strftime("%Y%m%dT%H%M%S")
    if config["threads"] is not None:
        resolve_threads(int(config["threads"]))
    np.seterr(all="raise", under="ignore")
    try:
        ok, payload, outputs = _EXPERIMENTS[config["experiment"]](config, outdir, chash, stamp)
    finally:
        np.seterr(all="warn")
    payload = dict(payload)
    payload.setdefault("config_hash", chash)
    manifest = {
        "experiment": config["experiment"],
        "config_hash": chash,
        "version": __version__,
        "config": {k: v for k, v in config.items() if k not in ("output_dir", "threads")},
        "outputs": sorted(outputs),
        "passed": bool(ok),
    }
    with open(outdir / f"{config['experiment']}_{stamp}_manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return (EXIT_OK if ok else EXIT_TOLERANCE), payload


def _parse_overrides(args) -> dict:
    overrides = {}
    if args.experiment:
        overrides["experiment"] = args.experiment
    if args.chart:
        overrides["chart"] = args.chart
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.output_dir:
        overrides["output_dir"] = args.output_dir
    if args.threads is not None:
        overrides["threads"] = args.threads
    if args.n_max is not None:
        overrides["N_max"] = args.n_max
    if args.n_values:
        overrides["N_values"] = [int(x) for x in args.n_values.split(",")]
    if args.eps_values:
        overrides["eps_values"] = [float(x) for x in args.eps_values.split(",")]
    return overrides


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="polarpath",
        description="Path-integral kernel experiments in plane polar coordinates",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment")
    p_run.add_argument("experiment", nargs="?", help="experiment id (or take it from --config)")
    p_run.add_argument("--config", help="JSON config file; flags override its fields")
    p_run.add_argument("--chart", help="chart id (cartesian2d or polar2d)")
    p_run.add_argument("--seed", type=int)
    p_run.add_argument("--output-dir", dest="output_dir")
    p_run.add_argument("--threads", type=int, help="worker count (default: POLARPATH_THREADS or hardware)")
    p_run.add_argument("--N-max", dest="n_max", type=int)
    p_run.add_argument("--N", dest="n_values", help="comma-separated slice/grid counts")
    p_run.add_argument("--eps", dest="eps_values", help="comma-separated step sizes")

    p_cmp = sub.add_parser("compare", help="compare two output files")
    p_cmp.add_argument("file_a")
    p_cmp.add_argument("file_b")
    p_cmp.add_argument("--tolerance", type=float, default=0.0)
    p_cmp.add_argument("--force", action="store_true", help="ignore config-hash mismatch")

    sub.add_parser("list-experiments", help="list available experiment ids")

    args = parser.parse_args(argv)

    if args.command == "list-experiments":
        for name in sorted(_EXPERIMENTS):
            print(name)
        return EXIT_OK

    if args.command == "compare":
        try:
            status, report = run_compare(args.file_a, args.file_b, args.tolerance, args.force)
        except (OSError, ConfigError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        print(json.dumps(report, indent=2, sort_keys=True))
        return status

    config = {}
    if args.config:
        try:
            with open(args.config) as fh:
                config = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            print(f"error: cannot read config: {exc}", file=sys.stderr)
            return EXIT_CONFIG
    config.update(_parse_overrides(args))
    try:
        status, payload = run_experiment(config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    print(json.dumps(payload, indent=2, sort_keys=True, default=float))
    return status


if __name__ == "__main__":
    sys.exit(main())
