"""Batch experiment runner: YAML configs in, CSV reports and plot data out.

Exit codes: 0 all verdicts pass, 2 any bound violation, 3 any failed
theorem hypothesis (with no outright violations), 1 usage or selftest error.
"""

from __future__ import annotations

import argparse
import hashlib
import itertools
import json
import math
import sys
import time
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .bounds import CSV_HEADER, run_theorem
from .disorder import (SeedSpec, gauss_hermite_nodes, gaussian_expectation,
                       hermite_eval, hermite_ibp_residual,
                       hermite_second_moment, sample_coupled)
from .gibbs import (McmcConfig, enumerate_configs, exact_moments,
                    factor_matrix, mcmc_moments, overlap_from_tables)
from .models import couple, make_ea
from .topology import lattice_graph

EXIT_OK = 0
EXIT_VIOLATION = 2
EXIT_HYPOTHESIS = 3


# --- run -------------------------------------------------------------------

def _load_config(path: Path) -> dict:
    try:
        with open(path) as fh:
            cfg = yaml.safe_load(fh)
    except yaml.YAMLError as exc:
        raise SystemExit(f"config parse error in {path}: {exc}")
    if not isinstance(cfg, dict) or "experiments" not in cfg:
        raise SystemExit(f"config {path}: top-level 'experiments' list required")
    if not isinstance(cfg["experiments"], list):
        raise SystemExit(f"config {path}: 'experiments' must be a list")
    return cfg


def _expand_grid(exp: dict):
    """Yield (model_params, grid_point) for the cartesian grid of an experiment."""
    base = dict(exp.get("model", {}))
    grid = exp.get("grid", {})
    if not grid:
        yield base, {}
        return
    keys = sorted(grid)
    for key in keys:
        if not isinstance(grid[key], list) or not grid[key]:
            raise SystemExit(f"grid entry {key!r} must be a non-empty list")
    for combo in itertools.product(*(grid[k] for k in keys)):
        point = dict(zip(keys, combo))
        yield {**base, **point}, point


def _experiment_reports(exp: dict, idx: int, master_seed: int):
    theorem_id = exp.get("theorem_id")
    if not theorem_id:
        raise SystemExit(f"experiment {idx}: missing 'theorem_id'")
    engine = exp.get("engine", "exact")
    n_disorder = int(exp.get("n_disorder", 100))
    seed_val = int(exp.get("master_seed", master_seed))
    mcmc_cfg = None
    if "mcmc" in exp:
        mcmc_cfg = McmcConfig(**exp["mcmc"])
    reports = []
    for j, (params, point) in enumerate(_expand_grid(exp)):
        seed = SeedSpec(master_seed=seed_val, stream_id=0, path=(idx, j))
        try:
            rep = run_theorem(theorem_id, params, engine, n_disorder, seed,
                              mcmc_cfg)
        except (KeyError, ValueError) as exc:
            raise SystemExit(f"experiment {idx} ({theorem_id}): {exc}")
        reports.append((rep, point))
    return reports, seed_val


def cmd_run(config_path: str, out_dir: str, seed_override=None) -> int:
    cfg = _load_config(Path(config_path))
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    master_seed = (int(seed_override) if seed_override is not None
                   else int(cfg.get("master_seed", 0)))

    t0 = time.time()
    rows = []
    plot_data = {}
    exp_seeds = []
    status = EXIT_OK
    try:
        for idx, exp in enumerate(cfg["experiments"]):
            reports, seed_val = _experiment_reports(exp, idx, master_seed)
            exp_seeds.append(seed_val)
            for rep, point in reports:
                rows.append(rep.to_csv_row())
                if rep.verdict == "fail":
                    status = EXIT_VIOLATION
                elif rep.verdict == "hypothesis_failed" and status == EXIT_OK:
                    status = EXIT_HYPOTHESIS
                if point:
                    x_key = sorted(point)[0]
                    key = (idx, rep.theorem_id, x_key)
                    plot_data.setdefault(key, []).append(
                        (point[x_key], rep.lhs.value, rep.rhs))
    except KeyboardInterrupt:
        print("interrupted; flushing partial results", file=sys.stderr)
        status = 1
    finally:
        _write_outputs(out, cfg, rows, plot_data, exp_seeds, master_seed,
                       time.time() - t0, config_path)
    return status


def _write_outputs(out, cfg, rows, plot_data, exp_seeds, master_seed,
                   wall_clock, config_path):
    results = out / "results.csv"
    with open(results, "w") as fh:
        fh.write(CSV_HEADER + "\n")
        for row in rows:
            fh.write(row + "\n")
    for (idx, theorem_id, x_key), pts in plot_data.items():
        for kind, col in (("lhs", 1), ("rhs", 2)):
            path = out / f"plot_{idx:02d}_{theorem_id}_{x_key}_{kind}.dat"
            with open(path, "w") as fh:
                for pt in pts:
                    fh.write(f"{pt[0]:.12g} {pt[col]:.12g}\n")
    digest = hashlib.sha256(Path(config_path).read_bytes()).hexdigest()
    manifest = {
        "tool_version": __version__,
        "config_sha256": digest,
        "master_seed": master_seed,
        "experiment_seeds": exp_seeds,
        "wall_clock_seconds": round(wall_clock, 3),
        "row_count": len(rows),
    }
    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


# --- selftest --------------------------------------------------------------

def _check_hermite_ibp(fault=None):
    funcs = [
        (lambda x: x**2, lambda x: 2 * x),
        (lambda x: x**3, lambda x: 3 * x**2),
        (np.tanh, lambda x: 1.0 / np.cosh(x)**2),
        (lambda x: np.exp(x / 4), lambda x: np.exp(x / 4) / 4),
    ]
    worst = 0.0
    for k in (1, 2, 3, 4):
        for f, df in funcs:
            worst = max(worst, hermite_ibp_residual(k, f, df, 80))
    if fault == "hermite":
        worst += 1e-3
    return worst <= 1e-8, f"max residual {worst:.3e}"


def _check_hermite_norm(fault=None):
    worst = 0.0
    for k in range(7):
        est = gaussian_expectation(lambda x: hermite_eval(k, x)**2, 80)
        worst = max(worst, abs(est / hermite_second_moment(k) - 1.0))
    return worst <= 1e-8, f"max relative error {worst:.3e}"


def _check_coupled_correlation(fault=None):
    n, t = 10**6, 0.5
    d = sample_coupled(n, t, SeedSpec(13, 0))
    corr = float(np.mean(d.g1 * d.g2))
    tol = 3.0 / math.sqrt(n)
    return abs(corr - t) <= tol, f"corr {corr:.5f} vs {t} (tol {tol:.5f})"


def _check_mcmc_vs_exact(fault=None):
    graph = lattice_graph([2, 2])
    system = make_ea(graph, 0.5)
    g = SeedSpec(7, 0).rng().standard_normal(system.index_count)
    exact = exact_moments(system, g)
    est = mcmc_moments(system, g, config=McmcConfig(sweeps=40_000,
                                                    burn_in=4_000),
                       seed=SeedSpec(7, 1))
    dev = np.abs(est.first - exact.first) / np.maximum(est.stderr_first, 1e-12)
    return float(dev.max()) <= 6.0, f"max deviation {dev.max():.2f} stderr"


def _check_factorization(fault=None):
    graph = lattice_graph([3])
    pair = couple(make_ea(graph, 1.0), make_ea(graph, 0.7), 0.5, SeedSpec(3))
    d = pair.disorder
    t1 = exact_moments(pair.system1, d.g1)
    t2 = exact_moments(pair.system2, d.g2)
    q_mean, q_sq = overlap_from_tables(t1, t2)
    # independent brute-force product-measure enumeration
    c = enumerate_configs(pair.system1)
    f = factor_matrix(pair.system1, pair.system1.chaos, c)
    w1 = np.exp(pair.gamma1 * f @ d.g1)
    w2 = np.exp(pair.gamma2 * f @ d.g2)
    w1, w2 = w1 / w1.sum(), w2 / w2.sum()
    q = (f @ f.T) / pair.system1.index_count
    ref_mean = float(w1 @ q @ w2)
    ref_sq = float(w1 @ (q**2) @ w2)
    err = max(abs(q_mean - ref_mean), abs(q_sq - ref_sq))
    return err <= 1e-10, f"max assembly error {err:.3e}"


SELFTEST_CHECKS = (
    ("hermite_ibp_residual", _check_hermite_ibp),
    ("hermite_second_moment_quadrature", _check_hermite_norm),
    ("coupled_gaussian_correlation", _check_coupled_correlation),
    ("mcmc_vs_exact_moments", _check_mcmc_vs_exact),
    ("replica_factorization", _check_factorization),
)


def cmd_selftest(fault=None) -> int:
    failures = 0
    print(f"{'check':40s} {'status':6s} detail")
    for name, check in SELFTEST_CHECKS:
        ok, detail = check(fault=fault)
        print(f"{name:40s} {'pass' if ok else 'FAIL':6s} {detail}")
        if not ok:
            failures += 1
            print(f"selftest failure: {name}", file=sys.stderr)
    return EXIT_OK if failures == 0 else 1


# --- report ----------------------------------------------------------------

def cmd_report(results_csv: str) -> int:
    path = Path(results_csv)
    lines = path.read_text().splitlines()
    if not lines or lines[0] != CSV_HEADER:
        raise SystemExit(f"{results_csv}: unexpected CSV schema")
    header = lines[0].split(",")
    rows = [dict(zip(header, line.split(","))) for line in lines[1:] if line]

    by_theorem = {}
    failures = []
    for row in rows:
        by_theorem.setdefault(row["theorem_id"], []).append(row)
        if row["verdict"] == "fail":
            failures.append(row)

    for theorem_id, trows in sorted(by_theorem.items()):
        slacks = [float(r["slack"]) for r in trows if r["slack"]]
        min_slack = min(slacks) if slacks else float("nan")
        print(f"{theorem_id:16s} rows={len(trows):4d} min_slack={min_slack:.6g}")
        pts = [(float(r["E_size"]), float(r["lhs"])) for r in trows
               if r["E_size"] and float(r["lhs"]) > 0]
        sizes = sorted({p[0] for p in pts})
        if len(sizes) >= 2:
            x = np.log([p[0] for p in pts])
            y = np.log([p[1] for p in pts])
            slope = float(np.polyfit(x, y, 1)[0])
            print(f"{'':16s} lhs scaling exponent in |E|: {slope:+.3f} "
                  f"(rhs scales as -0.5)")

    if failures:
        print(f"{len(failures)} violations:")
        for row in failures:
            print("  " + ",".join(row.values()))
        return EXIT_VIOLATION
    print("0 violations")
    return EXIT_OK


# --- entry point -----------------------------------------------------------

def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="chaoslab",
        description="Spin-glass variance-bound verification harness")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute a config of theorem sweeps")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--out", required=True)
    p_run.add_argument("--seed", type=int, default=None,
                       help="override the config master seed")

    p_self = sub.add_parser("selftest", help="run the math-stack self checks")
    p_self.add_argument("--inject-fault", default=None,
                        help="fault injection hook (testing only)")

    p_rep = sub.add_parser("report", help="summarize a results.csv")
    p_rep.add_argument("results_csv")

    args = parser.parse_args(argv)
    if args.command == "run":
        return cmd_run(args.config, args.out, args.seed)
    if args.command == "selftest":
        return cmd_selftest(fault=args.inject_fault)
    return cmd_report(args.results_csv)


if __name__ == "__main__":
    sys.exit(main())
