import math
from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ssris.geometry import feasible_tile_counts
from ssris.optimizer import (BoundSet, SystemModel, grid_search, objective, random_rho_benchmark, rho_grid,
                             scan, shape_decomposition, verify_solution)
from ssris.schemes import ALL_SCHEMES, Scheme


@pytest.fixture(scope="module")
def small_systems(small_scenario, rectifier):
    cache = {}
    return {n: SystemModel(small_scenario, n, rectifier, aperture_cache=cache)
            for n in feasible_tile_counts(small_scenario.n_uc)}


@pytest.fixture(scope="module")
def system36(scenario1, rectifier):
    return SystemModel(scenario1, 36, rectifier)


@pytest.mark.parametrize("delta, expected", [
    (0.25, [0.0, 0.25, 0.5, 0.75, 1.0]),
    (0.3, [0.0, 0.3, 0.6, 0.9]),
    (0.1, list(np.linspace(0, 1, 11))),
])
def test_rho_grid(delta, expected):
    grid = rho_grid(delta)
    assert np.allclose(grid, expected)
    assert grid[0] == 0.0


@pytest.mark.parametrize("delta", [0.0, 1.0, -0.1])
def test_rho_grid_rejects_bad_steps(delta):
    with pytest.raises(ValueError):
        rho_grid(delta)


def test_objective_constant_bounds_pull_out():
    t_eh, t_dt, t_s, t_fr, size = 0.2, 0.38, 1e-5, 0.7, 40
    p = 3.5
    flat = np.full(size, p)
    assert objective(flat, flat, flat, t_eh, t_dt, t_s, t_fr) == pytest.approx(p * (t_eh + size * t_s + t_dt) / t_fr)


def test_objective_skips_empty_harvest_stage():
    out = objective(np.full(3, np.inf), np.ones(3), np.ones(3), 0.0, 0.5, 1e-3, 1.0)
    assert out == pytest.approx(3e-3 + 0.5)


@settings(max_examples=40)
@given(st.integers(1, 12), st.floats(0.0, 0.3), st.floats(0.1, 0.6), st.integers(0, 99))
def test_objective_matches_double_loop(size, t_eh, t_dt, seed):
    rng = np.random.default_rng(seed)
    p_eh, p_bt, p_dt = rng.uniform(0, 5, (3, size))
    t_s, t_fr = 1e-3, 1.0
    total = 0.0
    for b in range(size):
        frame = t_eh * p_eh[b]
        for _ in range(size):  # every codeword is swept once during training
            frame += t_s * p_bt[b]
        frame += t_dt * p_dt[b]
        total += frame / t_fr
    assert objective(p_eh, p_bt, p_dt, t_eh, t_dt, t_s, t_fr) == pytest.approx(total / size, rel=1e-12)


def test_upper_bounds(system36):
    sc = system36.scenario
    ts = system36.bounds(Scheme.TS, [0.5, 0.9])
    assert np.all(ts.upper_bt == sc.p_max)
    assert np.allclose(ts.upper_dt, sc.p_max / math.log(2))
    expected = min(sc.p_max, system36.model.p_thr / (system36.link_gain * system36.tile_gains.max()))
    assert ts.upper_eh == pytest.approx([expected, expected])
    ps = system36.bounds(Scheme.PS, [0.5])
    assert ps.upper_dt[0] == pytest.approx(ps.upper_bt[0] / math.log(2))
    assert float(system36.upper_bound(1e300, 1.0)) < 1e-250


def test_es_single_tile_is_infeasible(small_systems):
    system = small_systems[1]
    assert list(system.candidate_rhos(Scheme.ES, 0.01)) == [1.0]
    sol = grid_search(system, Scheme.ES, 0.01)
    assert not sol.feasible and sol.allocation is None
    assert random_rho_benchmark(system, Scheme.ES, 0.01) is None


def test_ts_without_harvest_time_is_infeasible(system36):
    b = system36.bounds(Scheme.TS, [1.0])
    assert np.isinf(b.harvest_eh).all()
    assert not b.feasible[0]


def test_ts_zero_consumption_needs_no_harvest(small_scenario, rectifier):
    free = small_scenario.replace(p_sta=0.0, p_uc=0.0, p_sh=0.0)
    b = SystemModel(free, 4, rectifier).bounds(Scheme.TS, [0.5, 1.0])
    assert np.all(b.harvest_eh == 0.0)


def test_ts_training_bound_does_not_depend_on_rho(system36):
    b = system36.bounds(Scheme.TS, [0.3, 0.7, 0.95])
    assert np.array_equal(b.snr_bt[0], b.snr_bt[1]) and np.array_equal(b.snr_bt[0], b.snr_bt[2])


def test_dominant_rho_scalings(system36):
    rhos = np.array([0.1, 0.2, 0.4, 0.8])
    ps = system36.bounds(Scheme.PS, rhos)
    assert np.allclose(ps.snr_bt * rhos[:, None], ps.snr_bt[-1] * rhos[-1], rtol=1e-12)
    assert np.allclose(ps.snr_dt * rhos[:, None], ps.snr_dt[-1] * rhos[-1], rtol=1e-12)
    ts = system36.bounds(Scheme.TS, [0.5, 0.8, 0.95])
    target = 2.0 ** (system36.scenario.r_min * ts.t_fr / ts.t_dt_eff) - 1.0
    ratio = ts.snr_dt / target[:, None]
    assert np.allclose(ratio, ratio[0], rtol=1e-12)
    # ES changes the codebook with the block, so the square law holds only approximately
    es = [system36.bounds(Scheme.ES, [r]) for r in system36.candidate_rhos(Scheme.ES, 0.01)]
    scaled = np.array([b.mean("snr_bt")[0] * b.rho[0] ** 2 for b in es])
    assert scaled.max() / scaled.min() < 1.05


def test_ps_harvest_bound_scales_with_inverse_share(system36):
    rhos = np.array([0.0, 0.3, 0.6])
    b = system36.bounds(Scheme.PS, rhos)
    assert np.allclose(b.harvest_bt * (1 - rhos[:, None]), b.harvest_bt[0], rtol=1e-12)


def test_es_rejects_batched_ratios(system36):
    with pytest.raises(ValueError):
        system36.bounds(Scheme.ES, [0.25, 1.0])
    with pytest.raises(ValueError):
        system36.bounds(Scheme.PS, [1.2])


def _nondecreasing(values):
    """Ordered with +inf as the largest value; equal infinities count as a tie."""
    values = np.asarray(values, dtype=float)
    lo, hi = values[:-1], values[1:]
    with np.errstate(invalid="ignore"):
        floor = np.where(np.isfinite(lo), lo - 1e-12 * np.abs(lo), lo)
    return bool(np.all((hi >= floor) | np.isposinf(hi)))


@pytest.mark.parametrize("scheme", ALL_SCHEMES)
def test_bound_monotonicity(system36, scheme):
    result = scan(system36, scheme, system36.candidate_rhos(scheme, 0.02))
    cols = result.columns
    harvest = ("harvest_eh",) if scheme is Scheme.TS else ("harvest_bt", "harvest_dt")
    for name in harvest:
        assert _nondecreasing(cols[name]), name
    for name in ("snr_bt", "snr_dt"):
        assert _nondecreasing(cols[name][::-1]), name


@pytest.mark.parametrize("scheme", ALL_SCHEMES)
def test_grid_search_is_minimum_over_feasible_samples(small_systems, scheme):
    for system in small_systems.values():
        sol = grid_search(system, scheme, 0.01)
        result = scan(system, scheme, system.candidate_rhos(scheme, 0.01))
        if not sol.feasible:
            assert not result.feasible.any()
            continue
        assert np.all(sol.objective <= result.objective[result.feasible])
        assert sol.objective <= sol.benchmark
        assert sol.benchmark == pytest.approx(random_rho_benchmark(system, scheme, 0.01))
        assert verify_solution(system, sol) == []
        assert sol.n_feasible == int(result.feasible.sum())


def test_grid_search_solution_passes_self_check(system36):
    for scheme in ALL_SCHEMES:
        sol = grid_search(system36, scheme, 0.05)
        if sol.feasible:
            assert verify_solution(system36, sol) == []
            assert set(sol.diagnostics) == {"bt", "dt"}


def test_verify_solution_detects_tampering(system36):
    sol = grid_search(system36, Scheme.TS, 0.05)
    assert sol.feasible
    sol.allocation.p_dt[0] *= 0.5
    assert any("rate" in p for p in verify_solution(system36, sol))


class _SyntheticSystem:
    """Objective |rho - 0.5| with every sample feasible."""

    n_tl = 1

    def candidate_rhos(self, scheme, delta):
        return rho_grid(delta)

    def spec(self, scheme, rho):
        return SimpleNamespace(rho=rho)

    def bounds(self, scheme, rhos):
        rhos = np.atleast_1d(np.asarray(rhos, dtype=float))
        n = len(rhos)
        zeros, ones = np.zeros((n, 1)), np.ones(n)
        return BoundSet(
            scheme=Scheme.PS, rho=rhos, codebook_size=1, t_fr=1.0, t_bt=0.0, t_s=0.0,
            t_eh=0 * ones, t_dt=ones, t_dt_eff=ones, harvest_eh=zeros, harvest_bt=zeros,
            harvest_dt=np.abs(rhos - 0.5)[:, None], snr_bt=zeros, snr_dt=zeros,
            upper_eh=np.inf * ones, upper_bt=np.inf * ones, upper_dt=np.inf * ones, consumption=0 * ones,
        )


def test_grid_search_synthetic_objective():
    sol = grid_search(_SyntheticSystem(), Scheme.PS, 0.001)
    assert sol.rho == pytest.approx(0.5, abs=1e-12)
    assert sol.objective == pytest.approx(0.0, abs=1e-12)
    assert sol.benchmark == pytest.approx(np.abs(rho_grid(0.001) - 0.5).mean())


def test_grid_search_ties_go_to_smallest_ratio():
    system = _SyntheticSystem()
    assert grid_search(system, Scheme.PS, 0.25).rho == 0.5
    # a flat objective ties every sample
    system.bounds = lambda scheme, rhos, base=system.bounds: _flat(base(scheme, rhos))
    assert grid_search(system, Scheme.PS, 0.25).rho == 0.0


def _flat(bounds):
    return BoundSet(**{**bounds.__dict__, "harvest_dt": np.ones_like(bounds.harvest_dt)})


@pytest.mark.parametrize("rho", [0.3, 0.5, 0.9])
def test_shape_decomposition_identity(small_scenario, rectifier, rho):
    rows = shape_decomposition(small_scenario, rho, rectifier)
    assert [r.n_tl for r in rows] == feasible_tile_counts(small_scenario.n_uc)
    for r in rows:
        assert r.product == pytest.approx(r.bound, rel=1e-9)
    inverse = [r.inverse_term for r in rows]
    assert all(a >= b for a, b in zip(inverse, inverse[1:]))
    slopes = [r.linear_term / r.n_tl for r in rows]
    assert np.allclose(slopes, slopes[0], rtol=1e-12)
