"""Deterministic line-of-sight gains: free-space loss, RIS beam gain and tile combining gain."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .geometry import CodebookPlan, RisLayout, feasible_tile_counts
from .phases import incident_phases, quantize, reflected_phases
from .schemes import Scheme

logger = logging.getLogger(__name__)

# Bound on the number of complex terms materialized at once.
_CHUNK_TERMS = 4_000_000


def free_space_gain(distance, wavelength: float):
    """Friis free-space gain lambda^2 / (4 pi d)^2."""
    distance = np.asarray(distance, dtype=float)
    if np.any(distance <= 0) or wavelength <= 0:
        raise ValueError("distance and wavelength must be positive")
    gain = wavelength**2 / (16 * np.pi**2 * distance**2)
    return float(gain) if gain.ndim == 0 else gain


def _scheme_factor(scheme: Scheme, rho: float, reflect: bool) -> float:
    if Scheme.parse(scheme) is not Scheme.PS:
        return 1.0
    if not 0.0 <= rho <= 1.0:
        raise ValueError("rho must lie in [0, 1]")
    return rho if reflect else 1.0 - rho


def array_gain(psi_inc: np.ndarray, psi_ref: np.ndarray, omega: np.ndarray) -> np.ndarray:
    """|sum_n exp(j(psi_inc + psi_ref + omega))|^2 along the last axis."""
    total = psi_inc + psi_ref + omega
    s = np.exp(1j * total).sum(axis=-1)
    return s.real**2 + s.imag**2


def ris_gain(
    plan: CodebookPlan,
    psi_inc: np.ndarray,
    locations: np.ndarray,
    codeword: int,
    wavelength: float,
    scheme: Scheme = Scheme.TS,
    rho: float = 1.0,
    quantized: bool = True,
) -> np.ndarray:
    """Reflection gain of the codeword's aperture toward each location.

    ``psi_inc`` holds the incident phases of the plan's reflecting cells. For PS
    the geometric gain is scaled by rho.
    """
    locations = np.atleast_2d(np.asarray(locations, dtype=float))
    omega = plan.codeword_phases(quantized)[codeword]
    psi_ref = reflected_phases(plan.cell_positions, locations, wavelength)
    return _scheme_factor(scheme, rho, reflect=True) * array_gain(psi_inc[None, :], psi_ref, omega[None, :])


def worst_case_subarea_gains(
    plan: CodebookPlan, psi_inc: np.ndarray, wavelength: float, quantized: bool = True
) -> np.ndarray:
    """Per codeword, min over its subarea samples of path gain times RIS gain.

    The PS splitting factor is not applied here; callers multiply by rho.
    """
    omega_all = plan.codeword_phases(quantized)
    n_samples = plan.samples.shape[1]
    per_chunk = max(1, _CHUNK_TERMS // (n_samples * plan.n_uc_r))
    out = np.empty(plan.size)
    for start in range(0, plan.size, per_chunk):
        stop = min(plan.size, start + per_chunk)
        pts = plan.samples[start:stop]
        psi_ref = reflected_phases(plan.cell_positions, pts, wavelength)
        g_ris = array_gain(psi_inc, psi_ref, omega_all[start:stop, None, :])
        g_ref = free_space_gain(np.linalg.norm(pts, axis=-1), wavelength)
        out[start:stop] = (g_ref * g_ris).min(axis=1)
    return out


def insertion_losses(cells_per_tile: int, beta0: float, n_bits: int) -> np.ndarray:
    """Power loss per combiner branch: the reference cell has none, the others beta0^n_bits."""
    beta = np.full(cells_per_tile, beta0**n_bits)
    beta[0] = 1.0
    return beta


def tile_gains(layout: RisLayout, psi_inc: np.ndarray, beta0: float, n_bits: int) -> np.ndarray:
    """Geometric combining gain of every tile, without any splitting factor.

    The combiner of each cell applies the quantized shift that cancels the
    incident phase measured against a single RIS-wide reference.
    """
    delta_hat = quantize(-psi_inc, n_bits)
    phasor = np.exp(1j * (delta_hat + psi_inc))
    order = np.argsort(layout.tile_of_cell, kind="stable")
    grouped = phasor[order].reshape(layout.n_tl, layout.cells_per_tile)
    amp = np.sqrt(insertion_losses(layout.cells_per_tile, beta0, n_bits))
    s = grouped @ amp
    return (s.real**2 + s.imag**2) / layout.cells_per_tile


def tile_gain(layout, psi_inc, tile, scheme, rho, beta0, n_bits) -> float:
    """Gain of one tile, including the PS (1 - rho) factor."""
    return _scheme_factor(scheme, rho, reflect=False) * float(tile_gains(layout, psi_inc, beta0, n_bits)[tile])


def dc_combining_gain(n_harvesting_tiles: int, gamma: float) -> float:
    if n_harvesting_tiles < 1:
        raise ValueError("DC combining gain is undefined without harvesting tiles")
    if gamma < 0:
        raise ValueError("gamma must be non-negative")
    return float(n_harvesting_tiles) ** (-gamma)


@dataclass(frozen=True)
class GainBundle:
    """Link-budget gains for one aperture, with splitting factors applied on access."""

    g_inc: float
    g_tx: float
    g_rx: float
    tile_gains: np.ndarray
    worst_gains: np.ndarray
    scheme: Scheme = Scheme.TS
    rho: float = 1.0

    def harvest_tile_gains(self, tiles: np.ndarray | None = None) -> np.ndarray:
        g = self.tile_gains if tiles is None else self.tile_gains[tiles]
        return _scheme_factor(self.scheme, self.rho, reflect=False) * g

    def g_tile_min(self, tiles=None) -> float:
        return float(self.harvest_tile_gains(tiles).min())

    def g_tile_max(self, tiles=None) -> float:
        return float(self.harvest_tile_gains(tiles).max())

    @property
    def g_worst(self) -> np.ndarray:
        return _scheme_factor(self.scheme, self.rho, reflect=True) * self.worst_gains

    def g_dc(self, n_harvesting_tiles: int, gamma: float) -> float:
        return dc_combining_gain(n_harvesting_tiles, gamma)


def aoa_grid(step_deg: float = 1.0, limit_deg: float = 89.0) -> np.ndarray:
    """Unit arrival directions on an azimuth/elevation grid over the front hemisphere."""
    count = int(round(2 * limit_deg / step_deg)) + 1
    ang = np.deg2rad(np.linspace(-limit_deg, limit_deg, count))
    az, el = np.meshgrid(ang, ang, indexing="ij")
    az, el = az.ravel(), el.ravel()
    return np.column_stack([np.cos(el) * np.cos(az), np.cos(el) * np.sin(az), np.sin(el)])


def normalized_min_tile_gain(
    layout: RisLayout, directions: np.ndarray, beta0: float, n_bits: int, chunk: int = 2048
) -> np.ndarray:
    """min over tiles / max over tiles of the combining gain, per arrival direction."""
    out = np.empty(len(directions))
    order = np.argsort(layout.tile_of_cell, kind="stable")
    amp = np.sqrt(insertion_losses(layout.cells_per_tile, beta0, n_bits))
    pos = layout.cell_positions[order]
    for start in range(0, len(directions), chunk):
        dirs = directions[start : start + chunk]
        psi = (2 * np.pi / layout.wavelength) * (pos @ dirs[:, 1:].T).T
        phasor = np.exp(1j * (quantize(-psi, n_bits) + psi))
        s = phasor.reshape(len(dirs), layout.n_tl, layout.cells_per_tile) @ amp
        g = s.real**2 + s.imag**2
        out[start : start + len(dirs)] = g.min(axis=1) / g.max(axis=1)
    return out


def quantization_study(
    n_uc: int, n_bits: int, beta0: float, wavelength: float, step_deg: float = 1.0
) -> list[dict]:
    """Minimum and 0.1-quantile of the normalized minimum tile gain, per tile count."""
    directions = aoa_grid(step_deg)
    rows = []
    for n_tl in feasible_tile_counts(n_uc):
        layout = RisLayout(n_uc, n_tl, wavelength)
        ratio = normalized_min_tile_gain(layout, directions, beta0, n_bits)
        rows.append({
            "n_bits": n_bits,
            "n_tl": n_tl,
            "min": float(ratio.min()),
            "q10": float(np.quantile(ratio, 0.1)),
        })
        logger.debug("quantization n_bits=%d n_tl=%d min=%.4f", n_bits, n_tl, rows[-1]["min"])
    return rows


def incident_phases_for(layout: RisLayout, direction: np.ndarray) -> np.ndarray:
    return incident_phases(layout.cell_positions, direction, layout.wavelength)


def coherent_peak(n_cells: int) -> float:
    return float(n_cells) ** 2


def quantization_loss_bound(n_bits: int) -> float:
    """Uniform-error array gain loss factor (sinc^2 of half a step)."""
    x = math.pi / (1 << n_bits)
    return (math.sin(x) / x) ** 2
