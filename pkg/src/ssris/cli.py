"""Command-line entry point: ``ssris <subcommand> --config PATH [options]``."""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

from . import experiments
from .config import ConfigError, ScenarioConfig, bundled_config
from .geometry import InvalidLayoutError, feasible_tile_counts
from .io import format_value, manifest, write_manifest, write_table
from .optimizer import SystemModel, grid_search, verify_solution
from .rectifier import (NumericalError, bundled_measurements, fit, load_measurements, resolve_model,
                        save_fit)
from .schemes import ALL_SCHEMES, Scheme
from .timing import OverheadError

logger = logging.getLogger("ssris")

EXIT_OK, EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_NUMERICAL = 0, 1, 2, 3
MC_TOLERANCE = 5e-3


def load_config(spec: str) -> ScenarioConfig:
    """A TOML path, or ``bundled:<name>`` for a shipped example."""
    if spec.startswith("bundled:"):
        return bundled_config(spec.split(":", 1)[1])
    return ScenarioConfig.load(spec)


def _schemes(value: str):
    return ALL_SCHEMES if value == "all" else (Scheme.parse(value),)


def _out(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_solve(args, scenario) -> int:
    model = resolve_model(scenario.rectifier_fit, scenario.p_thr_fraction)
    delta = args.delta or scenario.grid_step
    system = SystemModel(scenario, args.n_tl, model)
    status = EXIT_OK
    report = []
    for scheme in _schemes(args.scheme):
        sol = grid_search(system, scheme, delta)
        if not sol.feasible:
            print(f"{scheme.value}: N_tl={args.n_tl} infeasible ({sol.n_samples} ratios sampled)")
            report.append({"scheme": scheme.value, "n_tl": args.n_tl, "feasible": False})
            status = EXIT_INFEASIBLE
            continue
        problems = verify_solution(system, sol)
        alloc = sol.allocation
        binding = {stage: {tag: tags.count(tag) for tag in sorted(set(tags))}
                   for stage, tags in sol.diagnostics.items()}
        print(f"{scheme.value}: N_tl={args.n_tl} rho={sol.rho:.4f} "
              f"P_bs,min={alloc.objective:.6g} W ({10 * math.log10(alloc.objective):.2f} dBW)")
        print(f"    RIS consumption {sol.consumption:.6g} W, random-rho benchmark {sol.benchmark:.6g} W, "
              f"{sol.n_feasible}/{sol.n_samples} ratios feasible")
        print(f"    binding constraints: {binding}")
        if problems:
            for p in problems:
                print(f"    check failed: {p}")
            status = EXIT_NUMERICAL
        report.append({
            "scheme": scheme.value, "n_tl": args.n_tl, "feasible": True, "rho": sol.rho,
            "p_bs_min_w": alloc.objective, "ris_consumption_w": sol.consumption,
            "benchmark_w": sol.benchmark, "n_uc_r": sol.spec.n_uc_r,
            "mean_p_eh_w": float(alloc.p_eh.mean()) if alloc.p_eh is not None else None,
            "mean_p_bt_w": float(alloc.p_bt.mean()), "mean_p_dt_w": float(alloc.p_dt.mean()),
            "upper_w": alloc.upper, "binding": binding, "checks_failed": problems,
        })
    if args.out:
        out = _out(args)
        path = out / "solution.json"
        path.write_text(json.dumps(report, indent=2, sort_keys=True, default=format_value) + "\n")
        write_manifest(out, manifest("solve", scenario, model, [path], delta=delta))
    return status


def cmd_sweep_tiles(args, scenario) -> int:
    model = resolve_model(scenario.rectifier_fit, scenario.p_thr_fraction)
    delta = args.delta or scenario.grid_step
    rows = experiments.sweep_tiles(scenario, _schemes(args.scheme), delta, model, args.workers)
    out = _out(args)
    path = write_table(out / "sweep_tiles.csv", experiments.SWEEP_HEADER, [r.as_row() for r in rows])
    write_manifest(out, manifest("sweep-tiles", scenario, model, [path], delta=delta))
    for r in rows:
        power = f"{r.power:.4g} W at rho={r.rho:.3f}" if r.feasible else "infeasible"
        print(f"{r.scheme.value:>2} N_tl={r.n_tl:<4d} {power}")
    return EXIT_OK


def cmd_tradeoff(args, scenario) -> int:
    model = resolve_model(scenario.rectifier_fit, scenario.p_thr_fraction)
    delta = args.delta or scenario.grid_step
    rows = experiments.tradeoff(scenario, args.n_tl, _schemes(args.scheme), delta, model)
    out = _out(args)
    path = write_table(out / f"tradeoff_ntl{args.n_tl}.csv", experiments.TRADEOFF_HEADER, rows)
    write_manifest(out, manifest("tradeoff", scenario, model, [path], delta=delta, n_tl=args.n_tl))
    print(f"wrote {len(rows)} rows to {path}")
    return EXIT_OK


def cmd_quantization_study(args, scenario) -> int:
    rows = experiments.quantization_table(scenario)
    out = _out(args)
    path = write_table(out / "quantization_study.csv", experiments.QUANTIZATION_HEADER, rows)
    write_manifest(out, manifest("quantization-study", scenario, None, [path],
                                 aoa_grid_step_deg=scenario.aoa_grid_step_deg))
    for n_bits, n_tl, lo, q10 in rows:
        print(f"N_B={n_bits} N_tl={n_tl:<4d} min={lo:.4f} q10={q10:.4f}")
    return EXIT_OK


def cmd_insertion_loss_study(args, scenario) -> int:
    model = resolve_model(scenario.rectifier_fit, scenario.p_thr_fraction)
    delta = args.delta or scenario.grid_step
    header, rows = experiments.insertion_loss_study(scenario, delta=delta, model=model, workers=args.workers)
    out = _out(args)
    path = write_table(out / "insertion_loss_study.csv", header, rows)
    write_manifest(out, manifest("insertion-loss-study", scenario, model, [path], delta=delta))
    print(f"wrote {len(rows)} rows to {path}")
    return EXIT_OK


def cmd_shape_decomposition(args, scenario) -> int:
    model = resolve_model(scenario.rectifier_fit, scenario.p_thr_fraction)
    rows = experiments.shape_table(scenario, args.rho, model)
    out = _out(args)
    path = write_table(out / "shape_decomposition.csv", experiments.SHAPE_HEADER, rows)
    write_manifest(out, manifest("shape-decomposition", scenario, model, [path], rho=args.rho))
    for n_tl, inv, lin, prod, _ in rows:
        print(f"N_tl={n_tl:<4d} inverse={inv:.4g} W linear={lin:.4g} product={prod:.4g} W")
    return EXIT_OK


def cmd_fit_rectifier(args, scenario) -> int:
    data = load_measurements(args.measurements) if args.measurements else bundled_measurements()
    result = fit(data, scenario.p_thr_fraction if scenario else 0.99)
    out = _out(args)
    path = out / "rectifier_fit.json"
    save_fit(result, path, source=Path(args.measurements).name if args.measurements else "bundled")
    m = result.model
    print(f"c={m.c:.6g} 1/W d={m.d:.6g} W P_sat={m.p_sat:.6g} W rms={result.rms:.3g} W -> {path}")
    return EXIT_OK


def cmd_validate_rectifier(args, scenario) -> int:
    model = resolve_model(scenario.rectifier_fit, scenario.p_thr_fraction)
    rows = experiments.validate_rectifier(model, args.samples, args.seed)
    out = _out(args)
    path = write_table(out / "rectifier_validation.csv", experiments.VALIDATION_HEADER, rows)
    write_manifest(out, manifest("validate-rectifier", scenario, model, [path],
                                 samples=args.samples, seed=args.seed))
    worst = max(r[3] for r in rows)
    print(f"max relative error {worst:.3e} over {len(rows)} averages ({args.samples} samples each)")
    return EXIT_OK if worst <= MC_TOLERANCE else EXIT_NUMERICAL


COMMANDS = {
    "solve": cmd_solve,
    "sweep-tiles": cmd_sweep_tiles,
    "tradeoff": cmd_tradeoff,
    "quantization-study": cmd_quantization_study,
    "insertion-loss-study": cmd_insertion_loss_study,
    "shape-decomposition": cmd_shape_decomposition,
    "fit-rectifier": cmd_fit_rectifier,
    "validate-rectifier": cmd_validate_rectifier,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ssris", description=__doc__)
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=name != "fit-rectifier",
                       help="scenario TOML file, or bundled:scenario1..3")
        p.add_argument("--out", default=None if name == "solve" else ".", help="output directory")
        if name in ("solve", "sweep-tiles", "tradeoff"):
            p.add_argument("--scheme", default="all", choices=["ps", "es", "ts", "all"])
        if name in ("solve", "tradeoff"):
            p.add_argument("--n-tl", type=int, default=36)
        if name in ("solve", "sweep-tiles", "tradeoff", "insertion-loss-study"):
            p.add_argument("--delta", type=float, default=None, help="rho grid step (default: config)")
        if name in ("sweep-tiles", "insertion-loss-study"):
            p.add_argument("--workers", type=int, default=1)
        if name == "validate-rectifier":
            p.add_argument("--seed", type=int, default=0)
            p.add_argument("--samples", type=int, default=1_000_000)
        if name == "shape-decomposition":
            p.add_argument("--rho", type=float, default=0.5)
        if name == "fit-rectifier":
            p.add_argument("--measurements", default=None, help="CSV with unit-tagged header")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        scenario = load_config(args.config) if args.config else None
        if getattr(args, "delta", None) is not None and not 0 < args.delta < 1:
            raise ConfigError([f"--delta must lie in (0, 1), got {args.delta}"])
        if getattr(args, "n_tl", None) is not None and args.n_tl not in feasible_tile_counts(scenario.n_uc):
            raise ConfigError([f"--n-tl {args.n_tl} is not one of {feasible_tile_counts(scenario.n_uc)}"])
        return COMMANDS[args.command](args, scenario)
    except ConfigError as exc:
        for problem in exc.problems:
            print(f"config error: {problem}", file=sys.stderr)
        return EXIT_CONFIG
    except (InvalidLayoutError, OverheadError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
