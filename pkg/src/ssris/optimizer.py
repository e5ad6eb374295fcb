"""Per-scheme transmit-power bounds and the grid search over the splitting ratio.

Everything that does not depend on rho (gains, codebooks, consumption per
codeword) is computed once per tile count in :class:`SystemModel`; the bound
assembly is then vectorized over a whole array of rho samples.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .config import ScenarioConfig
from .consumption import PowerModelParams, inactive_surcharge, n_on, stage_tile_sets, tile_powers
from .gains import free_space_gain, incident_phases_for, tile_gains, worst_case_subarea_gains
from .geometry import CodebookPlan, CoverageArea, RisLayout, es_ratios, plan_codebook
from .rectifier import RectifierModel, resolve_model
from .schemes import Scheme, Stage
from .timing import FrameTiming, effective_data_duration, frame_timing, min_data_snr

logger = logging.getLogger(__name__)

FEASIBILITY_ATOL = 1e-12


@dataclass(frozen=True, eq=False)
class Aperture:
    """Codebook and rho-independent per-codeword quantities of one reflecting block."""

    side_cells: int
    cells: np.ndarray = field(repr=False)
    plan: CodebookPlan = field(repr=False)
    worst_gains: np.ndarray = field(repr=False)
    reflect_power: np.ndarray = field(repr=False)  # summed over all reflecting cells, per codeword
    timing: FrameTiming = field(repr=False)

    @property
    def size(self) -> int:
        return self.plan.size


@dataclass(frozen=True)
class SchemeSpec:
    """Splitting scheme at one ratio, with its stage tile sets."""

    scheme: Scheme
    rho: float
    n_tl: int
    n_uc_r: int
    tile_sets: dict = field(repr=False, compare=False)  # Stage -> (reflecting, harvesting)


@dataclass(frozen=True)
class PowerAllocation:
    p_eh: np.ndarray | None
    p_bt: np.ndarray
    p_dt: np.ndarray
    upper: dict
    objective: float


@dataclass(frozen=True)
class SchemeSolution:
    scheme: Scheme
    n_tl: int
    feasible: bool
    spec: SchemeSpec | None = None
    allocation: PowerAllocation | None = None
    consumption: float = math.nan
    benchmark: float = math.nan
    n_samples: int = 0
    n_feasible: int = 0
    diagnostics: dict = field(default_factory=dict, repr=False)

    @property
    def rho(self) -> float:
        return self.spec.rho if self.spec is not None else math.nan

    @property
    def objective(self) -> float:
        return self.allocation.objective if self.allocation is not None else math.nan


@dataclass(frozen=True, eq=False)
class BoundSet:
    """Bounds for a batch of rho samples sharing one aperture.

    Per-codeword arrays have shape (R, B); per-sample arrays have shape (R,).
    Branches that do not exist for a scheme hold zeros (harvest) or inf (upper).
    """

    scheme: Scheme
    rho: np.ndarray
    codebook_size: int
    t_fr: float
    t_bt: float
    t_s: float
    t_eh: np.ndarray
    t_dt: np.ndarray
    t_dt_eff: np.ndarray
    harvest_eh: np.ndarray
    harvest_bt: np.ndarray
    harvest_dt: np.ndarray
    snr_bt: np.ndarray
    snr_dt: np.ndarray
    upper_eh: np.ndarray
    upper_bt: np.ndarray
    upper_dt: np.ndarray
    consumption: np.ndarray

    @property
    def lower_eh(self) -> np.ndarray:
        return self.harvest_eh

    @property
    def lower_bt(self) -> np.ndarray:
        return np.maximum(self.harvest_bt, self.snr_bt)

    @property
    def lower_dt(self) -> np.ndarray:
        return np.maximum(self.harvest_dt, self.snr_dt)

    @property
    def feasible(self) -> np.ndarray:
        ok = (self.t_dt_eff > 0) & (self.t_eh >= 0)
        for low, up in ((self.lower_eh, self.upper_eh), (self.lower_bt, self.upper_bt),
                        (self.lower_dt, self.upper_dt)):
            ok &= np.all(np.isfinite(low) & (low <= up[:, None] + FEASIBILITY_ATOL), axis=1)
        return ok

    @property
    def objective(self) -> np.ndarray:
        return objective(self.lower_eh, self.lower_bt, self.lower_dt,
                         self.t_eh, self.t_dt, self.t_s, self.t_fr)

    def mean(self, name: str) -> np.ndarray:
        return getattr(self, name).mean(axis=1)


def objective(p_eh, p_bt, p_dt, t_eh, t_dt, t_s: float, t_fr: float):
    """Average BS power over a frame with the given per-codeword powers (last axis = codewords)."""
    p_eh, p_bt, p_dt = (np.asarray(p, dtype=float) for p in (p_eh, p_bt, p_dt))
    size = p_bt.shape[-1]
    t_eh = np.asarray(t_eh, dtype=float)[..., None]
    t_dt = np.asarray(t_dt, dtype=float)[..., None]
    with np.errstate(invalid="ignore"):
        # zero-duration stages contribute nothing even when their bound is infinite
        eh = np.where(t_eh > 0, t_eh / t_fr * p_eh, 0.0)
        terms = eh + size * (t_s / t_fr) * p_bt + t_dt / t_fr * p_dt
    return terms.mean(axis=-1)


class SystemModel:
    """Rho-independent model of one scenario at one tile count.

    Args:
        ideal_tiles: Replace the combining gains by the lossless value
            |C_m| for every tile (used by the tile-count shape analysis).
        aperture_cache: Optional dict shared between models of the same
            scenario; ES apertures depend only on the block side in cells.
    """

    def __init__(self, scenario: ScenarioConfig, n_tl: int, model: RectifierModel | None = None,
                 *, ideal_tiles: bool = False, aperture_cache: dict | None = None):
        self.scenario = scenario
        self.model = model or resolve_model(scenario.rectifier_fit, scenario.p_thr_fraction)
        self.layout = RisLayout(scenario.n_uc, n_tl, scenario.wavelength)
        self.area = CoverageArea(scenario.area_center, scenario.area_width_y, scenario.area_height_z)
        self.direction = scenario.bs_direction
        self.psi_inc = incident_phases_for(self.layout, self.direction)
        self.g_inc = free_space_gain(scenario.d_inc, scenario.wavelength)
        if ideal_tiles:
            self.tile_gains = np.full(n_tl, float(self.layout.cells_per_tile))
        else:
            self.tile_gains = tile_gains(self.layout, self.psi_inc, scenario.beta0, scenario.n_bits)
        self.params = PowerModelParams(scenario.p_sta, scenario.p_uc, scenario.p_sh, scenario.n_bits)
        self.harvest_per_tile = (self.layout.cells_per_tile - 1) * scenario.n_bits * scenario.p_sh
        self._apertures = aperture_cache if aperture_cache is not None else {}

    @property
    def n_tl(self) -> int:
        return self.layout.n_tl

    @property
    def link_gain(self) -> float:
        """BS-to-RIS gain including the BS antenna, G_inc * G_tx."""
        return self.g_inc * self.scenario.g_tx

    def block_tiles(self, n: int) -> np.ndarray:
        return self.layout.es_reflecting_tiles(n * n / self.n_tl)

    def aperture(self, side_cells: int) -> Aperture:
        """Reflecting block of side_cells x side_cells cells at the RIS corner."""
        if side_cells in self._apertures:
            return self._apertures[side_cells]
        sc = self.scenario
        rows, cols = self.layout.cell_row_col()
        cells = np.flatnonzero((rows < side_cells) & (cols < side_cells))
        plan = plan_codebook(self.area, len(cells), sc.wavelength, self.direction, sc.n_bits,
                             cell_positions=self.layout.cell_positions[cells],
                             samples_per_side=sc.subarea_samples)
        worst = worst_case_subarea_gains(plan, self.psi_inc[cells], sc.wavelength,
                                         quantized=not sc.ideal_codeword_phases)
        reflect = sc.p_uc * n_on(plan.phase_indices, sc.n_bits).sum(axis=1).astype(float)
        timing = frame_timing(plan.size, plan.subarea_y, plan.subarea_z, kappa=sc.kappa,
                              velocity=sc.velocity, t_s=sc.t_symbol, t_resp=sc.t_resp,
                              t_delay=sc.t_delay, n_est=sc.n_est, wavelength=sc.wavelength)
        for arr in (cells, worst, reflect):
            arr.setflags(write=False)
        ap = Aperture(side_cells, cells, plan, worst, reflect, timing)
        self._apertures[side_cells] = ap
        logger.debug("aperture %d cells: |B|=%d t_fr=%.4g s", len(cells), plan.size, timing.t_fr)
        return ap

    def full_aperture(self) -> Aperture:
        return self.aperture(self.layout.side)

    def reflect_tile_powers(self, ap: Aperture) -> np.ndarray:
        """(B, n_tl) reflection power per codeword and tile for an aperture of this layout."""
        tiles = self.layout.tile_of_cell[ap.cells]
        reflect, _ = tile_powers(ap.plan.phase_indices, tiles, self.n_tl,
                                 self.layout.cells_per_tile, self.params)
        return reflect

    def spec(self, scheme: Scheme, rho: float) -> SchemeSpec:
        scheme = Scheme.parse(scheme)
        block = None
        n_uc_r = self.scenario.n_uc
        if scheme is Scheme.ES:
            block = self.layout.es_reflecting_tiles(rho)
            n_uc_r = len(block) * self.layout.cells_per_tile
        sets = {stage: stage_tile_sets(scheme, stage, self.n_tl, block) for stage in Stage}
        return SchemeSpec(scheme, float(rho), self.n_tl, n_uc_r, sets)

    def candidate_rhos(self, scheme: Scheme, delta: float) -> np.ndarray:
        grid = rho_grid(delta)
        if Scheme.parse(scheme) is not Scheme.ES:
            return grid
        ratios = np.array(es_ratios(self.n_tl))
        # a ratio is sampled when a grid point lies within half a step of it
        near = np.abs(grid[None, :] - ratios[:, None]).min(axis=1) <= delta / 2 + 1e-12
        return ratios[near]

    def upper_bound(self, g_tile_max, harvest_fraction):
        """min(P_max, P_thr / (G_inc G_tx G_tl,max)) with the PS (1 - rho) factor folded in."""
        with np.errstate(divide="ignore"):
            sat = self.model.p_thr / (self.link_gain * g_tile_max * np.asarray(harvest_fraction, dtype=float))
        return np.minimum(self.scenario.p_max, sat)

    def bounds(self, scheme: Scheme, rhos) -> BoundSet:
        scheme = Scheme.parse(scheme)
        rhos = np.atleast_1d(np.asarray(rhos, dtype=float))
        if np.any((rhos < 0) | (rhos > 1)):
            raise ValueError("rho must lie in [0, 1]")
        if scheme is Scheme.PS:
            return self._bounds_ps(rhos)
        if scheme is Scheme.TS:
            return self._bounds_ts(rhos)
        parts = [self._bounds_es(float(r)) for r in rhos]
        if len(parts) == 1:
            return parts[0]
        raise ValueError("ES bounds differ in codebook size per rho; evaluate one rho at a time")

    def _snr_bt(self, ap: Aperture, reflect_fraction) -> np.ndarray:
        sc = self.scenario
        gain = sc.g_rx * self.link_gain * np.asarray(reflect_fraction)[:, None] * ap.worst_gains[None, :]
        with np.errstate(divide="ignore"):
            return sc.snr_bt_min * sc.noise_power / gain

    def _snr_dt(self, ap: Aperture, reflect_fraction, t_dt_eff, t_fr) -> np.ndarray:
        sc = self.scenario
        target = min_data_snr(sc.r_min, t_dt_eff, t_fr)
        gain = sc.g_rx * self.link_gain * np.asarray(reflect_fraction)[:, None] * ap.worst_gains[None, :]
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.atleast_1d(target)[:, None] * sc.noise_power / gain
        return np.where(np.isnan(out), np.inf, out)

    def _harvest_inputs(self, demand_det, demand_dt, n_h, g_min):
        """Per-tile RF inputs meeting the DC demands, as BS powers before splitting factors."""
        g_dc = float(n_h) ** (-self.scenario.gamma)
        x_bt = self.model.psi_inverse_det(np.asarray(demand_det) / (g_dc * n_h))
        x_dt = self.model.psi_inverse_dt(np.asarray(demand_dt) / (g_dc * n_h))
        scale = self.link_gain * g_min
        return np.asarray(x_bt) / scale, np.asarray(x_dt) / scale

    def _bounds_ps(self, rhos: np.ndarray) -> BoundSet:
        sc = self.scenario
        ap = self.full_aperture()
        tm = ap.timing
        size = ap.size
        n_h = self.n_tl
        cons = sc.p_sta + n_h * self.harvest_per_tile + ap.reflect_power
        if tm.t_dt_eff > 0:
            cons = cons + inactive_surcharge(sc.p_sta, size, sc.t_resp, sc.t_delay, sc.t_symbol, tm.t_dt)
        base_bt, base_dt = self._harvest_inputs(cons, cons, n_h, self.tile_gains.min())
        keep = 1.0 - rhos
        with np.errstate(divide="ignore", invalid="ignore"):
            h_bt = np.where(base_bt[None, :] == 0, 0.0, base_bt[None, :] / keep[:, None])
            h_dt = np.where(base_dt[None, :] == 0, 0.0, base_dt[None, :] / keep[:, None])
        ones = np.ones_like(rhos)
        up_bt = self.upper_bound(self.tile_gains.max(), keep)
        return BoundSet(
            scheme=Scheme.PS, rho=rhos, codebook_size=size, t_fr=tm.t_fr, t_bt=tm.t_bt,
            t_s=sc.t_symbol, t_eh=0 * ones, t_dt=tm.t_dt * ones, t_dt_eff=tm.t_dt_eff * ones,
            harvest_eh=np.zeros((len(rhos), size)), harvest_bt=h_bt, harvest_dt=h_dt,
            snr_bt=self._snr_bt(ap, rhos), snr_dt=self._snr_dt(ap, rhos, tm.t_dt_eff * ones, tm.t_fr),
            upper_eh=np.full(len(rhos), np.inf), upper_bt=up_bt,
            upper_dt=up_bt / math.log(1.0 / (1.0 - sc.epsilon)),
            consumption=self._average_consumption(ap, n_h, tm.t_dt, tm.t_fr) * ones,
        )

    def _bounds_es(self, rho: float) -> BoundSet:
        sc = self.scenario
        block = self.layout.es_reflecting_tiles(rho)
        n = math.isqrt(len(block))
        ap = self.aperture(n * self.layout.cells_per_tile_side)
        tm = ap.timing
        size = ap.size
        harvest_tiles = np.setdiff1d(np.arange(self.n_tl), block)
        n_h = len(harvest_tiles)
        cons = sc.p_sta + n_h * self.harvest_per_tile + ap.reflect_power
        if tm.t_dt_eff > 0:
            cons = cons + inactive_surcharge(sc.p_sta, size, sc.t_resp, sc.t_delay, sc.t_symbol, tm.t_dt)
        if n_h == 0:
            blocked = np.where(cons > 0, np.inf, 0.0)
            h_bt = h_dt = blocked
            upper = sc.p_max
        else:
            g = self.tile_gains[harvest_tiles]
            h_bt, h_dt = self._harvest_inputs(cons, cons, n_h, g.min())
            upper = float(self.upper_bound(g.max(), 1.0))
        one = np.ones(1)
        return BoundSet(
            scheme=Scheme.ES, rho=np.array([rho]), codebook_size=size, t_fr=tm.t_fr, t_bt=tm.t_bt,
            t_s=sc.t_symbol, t_eh=0 * one, t_dt=tm.t_dt * one, t_dt_eff=tm.t_dt_eff * one,
            harvest_eh=np.zeros((1, size)), harvest_bt=h_bt[None, :], harvest_dt=h_dt[None, :],
            snr_bt=self._snr_bt(ap, one), snr_dt=self._snr_dt(ap, one, tm.t_dt_eff * one, tm.t_fr),
            upper_eh=np.full(1, np.inf), upper_bt=upper * one,
            upper_dt=upper / math.log(1.0 / (1.0 - sc.epsilon)) * one,
            consumption=self._average_consumption(ap, n_h, tm.t_dt, tm.t_fr) * one,
        )

    def ts_frame_energy(self, ap: Aperture, t_eh, t_dt, t_fr: float) -> np.ndarray:
        """Consumed frame energy per selected codeword, broadcast over leading rho axes."""
        sc = self.scenario
        t_eh = np.asarray(t_eh, dtype=float)[..., None]
        t_dt = np.asarray(t_dt, dtype=float)[..., None]
        training = sc.t_symbol * ap.reflect_power.sum()
        return (t_fr * sc.p_sta + t_eh * self.n_tl * self.harvest_per_tile + training
                + t_dt * ap.reflect_power)

    def _bounds_ts(self, rhos: np.ndarray) -> BoundSet:
        sc = self.scenario
        ap = self.full_aperture()
        base = ap.timing
        t_fr, t_bt = base.t_fr, base.t_bt
        t_eh = (1.0 - rhos) * t_fr
        t_dt = rhos * t_fr - t_bt
        t_dt_eff, _ = effective_data_duration(t_dt, sc.t_symbol, sc.n_est, sc.wavelength, sc.velocity)
        energy = self.ts_frame_energy(ap, t_eh, t_dt, t_fr)
        n_h = self.n_tl
        g_dc = float(n_h) ** (-sc.gamma)
        with np.errstate(divide="ignore", invalid="ignore"):
            demand = energy / (t_eh[:, None] * g_dc * n_h)
        demand = np.where(energy <= 0, 0.0, np.where(t_eh[:, None] > 0, demand, np.inf))
        h_eh = self.model.psi_inverse_det(demand) / (self.link_gain * self.tile_gains.min())
        ones = np.ones_like(rhos)
        up_eh = float(self.upper_bound(self.tile_gains.max(), 1.0))
        zeros = np.zeros((len(rhos), ap.size))
        return BoundSet(
            scheme=Scheme.TS, rho=rhos, codebook_size=ap.size, t_fr=t_fr, t_bt=t_bt,
            t_s=sc.t_symbol, t_eh=t_eh, t_dt=t_dt, t_dt_eff=np.asarray(t_dt_eff, dtype=float),
            harvest_eh=np.atleast_2d(h_eh), harvest_bt=zeros, harvest_dt=zeros,
            snr_bt=self._snr_bt(ap, ones), snr_dt=self._snr_dt(ap, ones, t_dt_eff, t_fr),
            upper_eh=up_eh * ones, upper_bt=sc.p_max * ones,
            upper_dt=sc.p_max / math.log(1.0 / (1.0 - sc.epsilon)) * ones,
            consumption=energy.mean(axis=1) / t_fr,
        )

    def _average_consumption(self, ap: Aperture, n_h: int, t_dt: float, t_fr: float) -> float:
        """Time-averaged RIS power over a frame for ES/PS with a random selected codeword."""
        sc = self.scenario
        harvest = n_h * self.harvest_per_tile
        active = sc.t_symbol * (ap.size * harvest + ap.reflect_power.sum())
        active += max(t_dt, 0.0) * (harvest + ap.reflect_power.mean())
        return sc.p_sta + active / t_fr


def rho_grid(delta: float) -> np.ndarray:
    """Samples {0, delta, 2 delta, ...} of [0, 1]; includes 1 when 1/delta is an integer."""
    if not 0 < delta < 1:
        raise ValueError("grid step must lie in (0, 1)")
    count = math.floor(1.0 / delta + 1e-9)
    grid = np.arange(count + 1) * delta
    if abs(count * delta - 1.0) < 1e-9:
        grid[-1] = 1.0
    return grid


@dataclass(frozen=True, eq=False)
class Scan:
    """Codeword-averaged bounds, objective and feasibility over the sampled ratios."""

    scheme: Scheme
    n_tl: int
    rho: np.ndarray
    feasible: np.ndarray
    objective: np.ndarray
    consumption: np.ndarray
    columns: dict = field(repr=False)


_SCAN_COLUMNS = ("harvest_eh", "harvest_bt", "harvest_dt", "snr_bt", "snr_dt")


def scan(system: SystemModel, scheme: Scheme, rhos) -> Scan:
    scheme = Scheme.parse(scheme)
    rhos = np.atleast_1d(np.asarray(rhos, dtype=float))
    if scheme is Scheme.ES:
        sets = [system.bounds(scheme, [r]) for r in rhos]
    else:
        sets = [system.bounds(scheme, rhos)] if len(rhos) else []
    if not sets:
        empty = np.array([])
        return Scan(scheme, system.n_tl, empty, empty.astype(bool), empty, empty, {})

    def cat(fn):
        return np.concatenate([fn(s) for s in sets])

    columns = {name: cat(lambda s, n=name: s.mean(n)) for name in _SCAN_COLUMNS}
    for name in ("upper_eh", "upper_bt", "upper_dt"):
        columns[name] = cat(lambda s, n=name: getattr(s, n))
    return Scan(scheme, system.n_tl, rhos, cat(lambda s: s.feasible), cat(lambda s: s.objective),
                cat(lambda s: s.consumption), columns)


def _tags(harvest: np.ndarray, snr: np.ndarray) -> tuple[str, ...]:
    return tuple(np.where(harvest >= snr, "harvest", "snr").tolist())


def grid_search(system: SystemModel, scheme: Scheme, delta: float) -> SchemeSolution:
    """Minimize the average BS power over the sampled splitting ratios."""
    scheme = Scheme.parse(scheme)
    rhos = system.candidate_rhos(scheme, delta)
    result = scan(system, scheme, rhos)
    ok = result.feasible
    if not np.any(ok):
        logger.info("%s N_tl=%d: no feasible ratio among %d samples", scheme.value, system.n_tl, len(rhos))
        return SchemeSolution(scheme, system.n_tl, False, n_samples=len(rhos))
    masked = np.where(ok, result.objective, np.inf)
    best = int(np.argmin(masked))  # first minimum = smallest rho
    rho = float(result.rho[best])
    bs = system.bounds(scheme, [rho])
    upper = {"eh": float(bs.upper_eh[0]), "bt": float(bs.upper_bt[0]), "dt": float(bs.upper_dt[0])}
    alloc = PowerAllocation(
        p_eh=bs.lower_eh[0] if scheme is Scheme.TS else None,
        p_bt=bs.lower_bt[0],
        p_dt=bs.lower_dt[0],
        upper=upper,
        objective=float(bs.objective[0]),
    )
    diagnostics = {
        "bt": _tags(bs.harvest_bt[0], bs.snr_bt[0]),
        "dt": _tags(bs.harvest_dt[0], bs.snr_dt[0]),
    }
    return SchemeSolution(
        scheme=scheme,
        n_tl=system.n_tl,
        feasible=True,
        spec=system.spec(scheme, rho),
        allocation=alloc,
        consumption=float(bs.consumption[0]),
        benchmark=float(result.objective[ok].mean()),
        n_samples=len(rhos),
        n_feasible=int(ok.sum()),
        diagnostics=diagnostics,
    )


def random_rho_benchmark(system: SystemModel, scheme: Scheme, delta: float) -> float | None:
    """Mean objective over the feasible samples; None when nothing is feasible."""
    result = scan(system, scheme, system.candidate_rhos(scheme, delta))
    if not np.any(result.feasible):
        return None
    return float(result.objective[result.feasible].mean())


def verify_solution(system: SystemModel, solution: SchemeSolution, rtol: float = 1e-9) -> list[str]:
    """Re-check every constraint at the returned allocation using the forward models.

    Returns human-readable violations; an empty list means the solution holds.
    """
    if not solution.feasible:
        return []
    sc = system.scenario
    scheme = solution.scheme
    rho = solution.rho
    alloc = solution.allocation
    spec = solution.spec
    problems: list[str] = []

    def check(name, lhs, rhs):
        lhs, rhs = np.asarray(lhs, dtype=float), np.asarray(rhs, dtype=float)
        bad = lhs < rhs - rtol * np.abs(rhs) - FEASIBILITY_ATOL
        if np.any(bad):
            worst = int(np.argmax(rhs - lhs))
            problems.append(f"{name}: codeword {worst} short by {float((rhs - lhs).flat[worst]):.3g}")

    if scheme is Scheme.ES:
        n = math.isqrt(len(spec.tile_sets[Stage.BT][0]))
        ap = system.aperture(n * system.layout.cells_per_tile_side)
    else:
        ap = system.full_aperture()
    tm = ap.timing
    t_fr, t_eh, t_dt = tm.t_fr, 0.0, tm.t_dt
    if scheme is Scheme.TS:
        t_eh = (1 - rho) * t_fr
        t_dt = rho * t_fr - tm.t_bt
    t_dt_eff, _ = effective_data_duration(t_dt, sc.t_symbol, sc.n_est, sc.wavelength, sc.velocity)
    reflect_fraction = rho if scheme is Scheme.PS else 1.0
    harvest_fraction = 1 - rho if scheme is Scheme.PS else 1.0

    link = sc.g_rx * system.link_gain * reflect_fraction * ap.worst_gains
    check("beam-training SNR", link * alloc.p_bt / sc.noise_power, sc.snr_bt_min)
    snr_dt = link * alloc.p_dt / sc.noise_power
    rate = t_dt_eff / t_fr * np.log2(1 + snr_dt)
    check("effective rate", rate, np.full_like(rate, sc.r_min))

    model = system.model
    reflect_tiles = system.reflect_tile_powers(ap)
    _, harvest_tiles = tile_powers(ap.plan.phase_indices[:1], system.layout.tile_of_cell[ap.cells],
                                   system.n_tl, system.layout.cells_per_tile, system.params)
    if scheme is Scheme.TS:
        h_set = spec.tile_sets[Stage.EH][1]
        g_min = system.tile_gains[h_set].min()
        g_dc = len(h_set) ** (-sc.gamma)
        got = t_eh * g_dc * len(h_set) * model.psi(system.link_gain * g_min * alloc.p_eh)
        frame = (t_fr * sc.p_sta + t_eh * harvest_tiles[h_set].sum()
                 + sc.t_symbol * reflect_tiles.sum() + t_dt * reflect_tiles.sum(axis=1))
        check("frame energy balance", got, frame)
        check("harvest upper bound", alloc.upper["eh"], alloc.p_eh)
    else:
        r_set, h_set = spec.tile_sets[Stage.BT]
        if len(h_set) == 0:
            problems.append("no harvesting tiles")
        else:
            g = system.tile_gains[h_set] * harvest_fraction
            g_dc = len(h_set) ** (-sc.gamma)
            need = (sc.p_sta + harvest_tiles[h_set].sum() + reflect_tiles[:, r_set].sum(axis=1)
                    + inactive_surcharge(sc.p_sta, ap.size, sc.t_resp, sc.t_delay, sc.t_symbol, t_dt))
            for stage, power, fn in (("bt", alloc.p_bt, model.psi), ("dt", alloc.p_dt, model.psi_bar_dt)):
                got = g_dc * len(h_set) * fn(system.link_gain * g.min() * power)
                check(f"{stage} self-sustainability", got, need)
    check("bt upper bound", np.full_like(alloc.p_bt, alloc.upper["bt"]), alloc.p_bt)
    check("dt upper bound", np.full_like(alloc.p_dt, alloc.upper["dt"]), alloc.p_dt)

    size = ap.size
    total = 0.0
    for b in range(size):
        eh = alloc.p_eh[b] * t_eh / t_fr if alloc.p_eh is not None and t_eh > 0 else 0.0
        total += eh + size * sc.t_symbol / t_fr * alloc.p_bt[b] + t_dt / t_fr * alloc.p_dt[b]
    total /= size
    if not math.isclose(total, alloc.objective, rel_tol=rtol):
        problems.append(f"objective mismatch {total:.6g} vs {alloc.objective:.6g}")
    return problems


@dataclass(frozen=True)
class ShapeRow:
    n_tl: int
    inverse_term: float
    linear_term: float
    product: float
    bound: float


def shape_decomposition(scenario: ScenarioConfig, rho: float, model: RectifierModel | None = None,
                        n_tl_values=None) -> list[ShapeRow]:
    """Split the TS harvesting bound into its rectifier-inverse and linear factors.

    Runs on a simplified copy of the scenario: no diode or shifter power, lossless
    DC combining and ideal tile gains, so the bound separates exactly.
    """
    from .geometry import feasible_tile_counts

    simple = scenario.replace(p_uc=0.0, p_sh=0.0, gamma=0.0)
    model = model or resolve_model(scenario.rectifier_fit, scenario.p_thr_fraction)
    cache: dict = {}
    rows = []
    for n_tl in n_tl_values or feasible_tile_counts(scenario.n_uc):
        system = SystemModel(simple, n_tl, model, ideal_tiles=True, aperture_cache=cache)
        demand = simple.p_sta / (1.0 - rho)
        aperture_gain = system.link_gain * simple.n_uc
        inv = model.psi_inverse_det(demand / n_tl)
        linear = n_tl / aperture_gain
        bound = float(system.bounds(Scheme.TS, [rho]).lower_eh.mean())
        rows.append(ShapeRow(n_tl, float(inv), linear, float(inv) * linear, bound))
    return rows
