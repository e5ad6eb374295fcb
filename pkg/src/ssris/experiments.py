"""Sweeps and studies behind the CLI subcommands; each returns plain row records."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .config import ScenarioConfig, db_to_linear
from .gains import quantization_study
from .geometry import feasible_tile_counts
from .optimizer import SchemeSolution, SystemModel, grid_search, scan, shape_decomposition
from .rectifier import RectifierModel, monte_carlo_average, resolve_model
from .schemes import ALL_SCHEMES, Scheme

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SweepRow:
    scheme: Scheme
    n_tl: int
    feasible: bool
    rho: float
    power: float
    consumption: float
    benchmark: float

    @classmethod
    def from_solution(cls, sol: SchemeSolution) -> "SweepRow":
        if not sol.feasible:
            return cls(sol.scheme, sol.n_tl, False, math.nan, math.nan, math.nan, math.nan)
        return cls(sol.scheme, sol.n_tl, True, sol.rho, sol.objective, sol.consumption, sol.benchmark)

    def as_row(self) -> list:
        return [self.scheme, self.n_tl, self.feasible, self.rho, self.power, self.consumption, self.benchmark]


SWEEP_HEADER = ["scheme", "n_tl", "feasible", "rho", "p_bs_min_w", "ris_consumption_w", "benchmark_w"]


def _sweep_point(args, aperture_cache: dict | None = None) -> list[SchemeSolution]:
    scenario, model, n_tl, schemes, delta = args
    system = SystemModel(scenario, n_tl, model, aperture_cache=aperture_cache)
    return [grid_search(system, s, delta) for s in schemes]


def _run(jobs: list, workers: int) -> list:
    """Map the sweep worker over jobs, keeping job order regardless of completion order."""
    if workers <= 1 or len(jobs) <= 1:
        # apertures depend on the scenario only, so serial runs share them across tile counts
        cache: dict = {}
        return [_sweep_point(job, cache) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_sweep_point, jobs))


def solve_all(scenario: ScenarioConfig, schemes=ALL_SCHEMES, delta: float | None = None,
              model: RectifierModel | None = None, workers: int = 1,
              n_tl_values=None) -> dict[tuple[Scheme, int], SchemeSolution]:
    """Grid-search solutions for every scheme and tile count, keyed by (scheme, N_tl)."""
    model = model or resolve_model(scenario.rectifier_fit, scenario.p_thr_fraction)
    delta = delta or scenario.grid_step
    schemes = tuple(Scheme.parse(s) for s in schemes)
    counts = list(n_tl_values or feasible_tile_counts(scenario.n_uc))
    jobs = [(scenario, model, n, schemes, delta) for n in counts]
    out = {}
    for n, sols in zip(counts, _run(jobs, workers)):
        for sol in sols:
            out[(sol.scheme, n)] = sol
    return out


def sweep_tiles(scenario: ScenarioConfig, schemes=ALL_SCHEMES, delta: float | None = None,
                model: RectifierModel | None = None, workers: int = 1) -> list[SweepRow]:
    sols = solve_all(scenario, schemes, delta, model, workers)
    order = [Scheme.parse(s) for s in schemes]
    return [SweepRow.from_solution(sols[key]) for key in sorted(sols, key=lambda k: (order.index(k[0]), k[1]))]


TRADEOFF_COLUMNS = ("harvest_eh", "harvest_bt", "harvest_dt", "snr_bt", "snr_dt",
                    "upper_eh", "upper_bt", "upper_dt")
TRADEOFF_HEADER = ["scheme", "rho", "feasible", *(f"{c}_w" for c in TRADEOFF_COLUMNS)]


def tradeoff(scenario: ScenarioConfig, n_tl: int, schemes=ALL_SCHEMES, delta: float | None = None,
             model: RectifierModel | None = None) -> list[list]:
    """Codeword-averaged lower bounds and the upper bounds on the rho grid, per scheme."""
    delta = delta or scenario.grid_step
    system = SystemModel(scenario, n_tl, model)
    rows = []
    for scheme in schemes:
        scheme = Scheme.parse(scheme)
        result = scan(system, scheme, system.candidate_rhos(scheme, delta))
        for i, rho in enumerate(result.rho):
            cols = [float(result.columns[c][i]) for c in TRADEOFF_COLUMNS]
            rows.append([scheme, float(rho), bool(result.feasible[i]), *cols])
    return rows


QUANTIZATION_HEADER = ["n_bits", "n_tl", "min_ratio", "q10_ratio"]


def quantization_table(scenario: ScenarioConfig, bit_depths=(2, 3, 4)) -> list[list]:
    rows = []
    for n_bits in bit_depths:
        for rec in quantization_study(scenario.n_uc, n_bits, scenario.beta0, scenario.wavelength,
                                      scenario.aoa_grid_step_deg):
            rows.append([rec["n_bits"], rec["n_tl"], rec["min"], rec["q10"]])
    return rows


INSERTION_LOSSES_DB = (0.0, -0.3, -0.5, -0.7, -0.9)


def insertion_loss_study(scenario: ScenarioConfig, losses_db=INSERTION_LOSSES_DB,
                         delta: float | None = None, model: RectifierModel | None = None,
                         workers: int = 1) -> tuple[list[str], list[list]]:
    """TS minimum BS power per tile count, one column per insertion loss."""
    header = ["n_tl"] + [f"p_bs_min_w_beta0_{loss:+.1f}db" for loss in losses_db]
    counts = feasible_tile_counts(scenario.n_uc)
    columns = []
    for loss in losses_db:
        variant = scenario.replace(beta0=db_to_linear(loss))
        sols = solve_all(variant, (Scheme.TS,), delta, model, workers)
        columns.append([sols[(Scheme.TS, n)].objective for n in counts])
    rows = [[n, *(col[i] for col in columns)] for i, n in enumerate(counts)]
    return header, rows


SHAPE_HEADER = ["n_tl", "inverse_term_w", "linear_term", "product_w", "ts_harvest_bound_w"]


def shape_table(scenario: ScenarioConfig, rho: float, model: RectifierModel | None = None) -> list[list]:
    return [[r.n_tl, r.inverse_term, r.linear_term, r.product, r.bound]
            for r in shape_decomposition(scenario, rho, model)]


VALIDATION_HEADER = ["p_avg_w", "quadrature_w", "monte_carlo_w", "relative_error"]


def validation_grid(model: RectifierModel, points: int = 20) -> np.ndarray:
    """Log-spaced average input powers from d/100 to 100 d."""
    return np.logspace(math.log10(model.d / 100), math.log10(model.d * 100), points)


def validate_rectifier(model: RectifierModel, samples: int = 1_000_000, seed: int = 0,
                       points: int = 20) -> list[list]:
    """Quadrature versus Monte-Carlo for the data-stage characteristic."""
    rng = np.random.default_rng(seed)
    rows = []
    for p in validation_grid(model, points):
        quad = model.psi_bar_dt(float(p))
        mc = monte_carlo_average(model.psi, float(p), samples, rng)
        rows.append([float(p), quad, mc, abs(quad - mc) / abs(mc)])
    return rows
