"""RIS layout, coverage-area partitioning and codebook sizing."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .phases import incident_phases, quantize_indices, reflected_phases

logger = logging.getLogger(__name__)

# Half-power constant of the uniform-aperture array factor.
HPBW_CONSTANT = 2.782


class InvalidLayoutError(ValueError):
    pass


class FeasibilityError(ValueError):
    pass


def feasible_tile_counts(n_uc: int) -> list[int]:
    """Tile counts that split a square RIS into equal square tiles, ascending."""
    side = math.isqrt(n_uc) if n_uc > 0 else 0
    if n_uc < 1 or side * side != n_uc:
        raise InvalidLayoutError(f"number of unit cells must be a positive perfect square, got {n_uc}")
    return [n * n for n in range(1, side + 1) if side % n == 0]


@dataclass(frozen=True)
class CoverageArea:
    """Rectangle in the plane x = center[0], spanning width_y along y and height_z along z."""

    center: tuple[float, float, float]
    width_y: float
    height_z: float

    def __post_init__(self):
        if len(self.center) != 3:
            raise ValueError("center must have three coordinates")
        if self.width_y < 0 or self.height_z < 0:
            raise ValueError("coverage area sides must be non-negative")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))

    @property
    def y_range(self) -> tuple[float, float]:
        yc = self.center[1]
        return yc - self.width_y / 2, yc + self.width_y / 2

    @property
    def z_range(self) -> tuple[float, float]:
        zc = self.center[2]
        return zc - self.height_z / 2, zc + self.height_z / 2

    def corners(self) -> np.ndarray:
        (y0, y1), (z0, z1) = self.y_range, self.z_range
        x = self.center[0]
        return np.array([[x, y0, z0], [x, y1, z0], [x, y0, z1], [x, y1, z1]])


def min_ref_distance(area: CoverageArea) -> float:
    """Distance from the RIS origin to the closest point of the coverage area."""
    (y0, y1), (z0, z1) = area.y_range, area.z_range
    y = min(max(0.0, y0), y1)
    z = min(max(0.0, z0), z1)
    return math.sqrt(area.center[0] ** 2 + y * y + z * z)


def beam_width(n_uc_r: int) -> float:
    """Broadside 3 dB beam width in radians of a square aperture with n_uc_r cells."""
    if n_uc_r < 1:
        raise ValueError("need at least one reflecting cell")
    u = HPBW_CONSTANT / (math.pi * math.sqrt(n_uc_r))
    if u > 1.0:
        raise ValueError(f"beam width undefined for {n_uc_r} cells (arccos argument {u:.3f} > 1)")
    return abs(math.pi / 2 - math.acos(u)) + abs(math.pi / 2 - math.acos(-u))


def beam_width_simplified(n_uc_r: int) -> float:
    return 2.0 * HPBW_CONSTANT / (math.pi * math.sqrt(n_uc_r))


def codebook_dimensions(n_uc_r: int, width_y: float, height_z: float, d_ref_min: float) -> tuple[int, int]:
    """Number of subareas along y and z for a given reflecting aperture."""
    scale = math.pi * math.sqrt(0.5 * n_uc_r) / (HPBW_CONSTANT * d_ref_min)
    n_y = max(1, math.ceil(scale * width_y))
    n_z = max(1, math.ceil(scale * height_z))
    return n_y, n_z


@dataclass(frozen=True, eq=False)
class RisLayout:
    """Square grid of unit cells at pitch lambda/2, partitioned into square tiles.

    Cells are indexed row-major with rows along z and columns along y; the grid is
    centered at the origin of the x = 0 plane.
    """

    n_uc: int
    n_tl: int
    wavelength: float
    side: int = field(init=False)
    tiles_per_side: int = field(init=False)
    cells_per_tile_side: int = field(init=False)
    cell_positions: np.ndarray = field(init=False, repr=False)
    tile_of_cell: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        allowed = feasible_tile_counts(self.n_uc)
        if self.n_tl not in allowed:
            raise InvalidLayoutError(f"N_tl={self.n_tl} is not feasible for N_uc={self.n_uc}; allowed {allowed}")
        side = math.isqrt(self.n_uc)
        tps = math.isqrt(self.n_tl)
        cpt = side // tps
        idx = np.arange(side)
        rows, cols = np.meshgrid(idx, idx, indexing="ij")
        rows, cols = rows.ravel(), cols.ravel()
        pitch = self.wavelength / 2
        positions = np.column_stack([(cols - (side - 1) / 2) * pitch, (rows - (side - 1) / 2) * pitch])
        tile = (rows // cpt) * tps + cols // cpt
        positions.setflags(write=False)
        tile.setflags(write=False)
        object.__setattr__(self, "side", side)
        object.__setattr__(self, "tiles_per_side", tps)
        object.__setattr__(self, "cells_per_tile_side", cpt)
        object.__setattr__(self, "cell_positions", positions)
        object.__setattr__(self, "tile_of_cell", tile)

    @property
    def cell_pitch(self) -> float:
        return self.wavelength / 2

    @property
    def cells_per_tile(self) -> int:
        return self.n_uc // self.n_tl

    def cells_of_tile(self, tile: int) -> np.ndarray:
        return np.flatnonzero(self.tile_of_cell == tile)

    def cell_row_col(self) -> tuple[np.ndarray, np.ndarray]:
        n = np.arange(self.n_uc)
        return n // self.side, n % self.side

    def es_reflecting_tiles(self, rho_es: float) -> np.ndarray:
        """Tiles of the n x n reflecting block anchored at the lowest (y, z) corner."""
        n = math.isqrt(max(0, round(rho_es * self.n_tl)))
        if n < 1 or not math.isclose(n * n / self.n_tl, rho_es, rel_tol=0, abs_tol=1e-9):
            raise FeasibilityError(f"rho={rho_es} is not of the form n^2/{self.n_tl}")
        t = np.arange(self.n_tl)
        mask = (t // self.tiles_per_side < n) & (t % self.tiles_per_side < n)
        return t[mask]

    def cells_in_tiles(self, tiles: np.ndarray) -> np.ndarray:
        return np.flatnonzero(np.isin(self.tile_of_cell, tiles))


def es_reflecting_tiles(layout: RisLayout, rho_es: float) -> np.ndarray:
    return layout.es_reflecting_tiles(rho_es)


def es_ratios(n_tl: int) -> list[float]:
    root = math.isqrt(n_tl)
    return [n * n / n_tl for n in range(1, root + 1)]


def square_grid(side: int, wavelength: float) -> np.ndarray:
    """In-plane positions of a side x side cell grid centered at the origin."""
    idx = np.arange(side)
    rows, cols = np.meshgrid(idx, idx, indexing="ij")
    pitch = wavelength / 2
    return np.column_stack([(cols.ravel() - (side - 1) / 2) * pitch, (rows.ravel() - (side - 1) / 2) * pitch])


@dataclass(frozen=True, eq=False)
class CodebookPlan:
    """Subarea grid and per-codeword phase profiles for one reflecting aperture.

    Codeword ``b`` illuminates subarea ``(b // n_y, b % n_y)`` in (z, y) order.
    """

    n_y: int
    n_z: int
    subarea_y: float
    subarea_z: float
    d_ref_min: float
    beam_width: float
    centers: np.ndarray = field(repr=False)
    samples: np.ndarray = field(repr=False)
    cell_positions: np.ndarray = field(repr=False)
    ideal_phases: np.ndarray = field(repr=False)
    phase_indices: np.ndarray = field(repr=False)
    n_bits: int = 3

    @property
    def size(self) -> int:
        return self.n_y * self.n_z

    @property
    def n_uc_r(self) -> int:
        return len(self.cell_positions)

    @property
    def diagonal(self) -> float:
        return math.hypot(self.subarea_y, self.subarea_z)

    def codeword_phases(self, quantized: bool = True) -> np.ndarray:
        if quantized:
            return self.phase_indices * (2 * np.pi / (1 << self.n_bits))
        return self.ideal_phases


def subarea_grid(area: CoverageArea, n_y: int, n_z: int, samples_per_side: int):
    """Centers (B, 3) and sample points (B, S, 3) of a uniform n_y x n_z partition."""
    (y0, _), (z0, _) = area.y_range, area.z_range
    c_y, c_z = area.width_y / n_y, area.height_z / n_z
    iz, iy = np.divmod(np.arange(n_y * n_z), n_y)
    x = area.center[0]
    centers = np.column_stack([np.full(n_y * n_z, x), y0 + (iy + 0.5) * c_y, z0 + (iz + 0.5) * c_z])
    frac = np.linspace(0.0, 1.0, samples_per_side) if samples_per_side > 1 else np.array([0.5])
    fy, fz = np.meshgrid(frac, frac, indexing="ij")
    offs_y, offs_z = fy.ravel(), fz.ravel()
    samples = np.empty((n_y * n_z, offs_y.size, 3))
    samples[..., 0] = x
    samples[..., 1] = (y0 + iy * c_y)[:, None] + offs_y[None, :] * c_y
    samples[..., 2] = (z0 + iz * c_z)[:, None] + offs_z[None, :] * c_z
    return centers, samples


def plan_codebook(
    area: CoverageArea,
    n_uc_r: int,
    wavelength: float,
    bs_direction: np.ndarray,
    n_bits: int,
    cell_positions: np.ndarray | None = None,
    samples_per_side: int = 5,
) -> CodebookPlan:
    """Size the codebook for an aperture of n_uc_r cells and design its codewords.

    Each codeword cancels the incident and reflected phases at its subarea center
    and is then quantized to ``n_bits``.

    Args:
        cell_positions: (n_uc_r, 2) in-plane positions of the reflecting cells.
            Defaults to a square grid centered at the origin.
    """
    side = math.isqrt(n_uc_r)
    if n_uc_r < 1 or side * side != n_uc_r:
        raise InvalidLayoutError(f"reflecting aperture must be a square number of cells, got {n_uc_r}")
    if cell_positions is None:
        cell_positions = square_grid(side, wavelength)
    cell_positions = np.asarray(cell_positions, dtype=float)
    if len(cell_positions) != n_uc_r:
        raise ValueError("cell_positions does not match n_uc_r")

    d_min = min_ref_distance(area)
    n_y, n_z = codebook_dimensions(n_uc_r, area.width_y, area.height_z, d_min)
    centers, samples = subarea_grid(area, n_y, n_z, samples_per_side)

    aperture = side * wavelength / 2 * math.sqrt(2)
    fraunhofer = 2 * aperture**2 / wavelength
    if d_min < fraunhofer:
        logger.warning("closest user %.2f m is inside the Fraunhofer distance %.2f m", d_min, fraunhofer)

    psi_inc = incident_phases(cell_positions, bs_direction, wavelength)
    psi_ref = reflected_phases(cell_positions, centers, wavelength)
    ideal = np.mod(-(psi_inc[None, :] + psi_ref), 2 * np.pi)
    indices = quantize_indices(ideal, n_bits)
    for arr in (centers, samples, cell_positions, ideal, indices):
        arr.setflags(write=False)
    return CodebookPlan(
        n_y=n_y,
        n_z=n_z,
        subarea_y=area.width_y / n_y,
        subarea_z=area.height_z / n_z,
        d_ref_min=d_min,
        beam_width=beam_width(n_uc_r),
        centers=centers,
        samples=samples,
        cell_positions=cell_positions,
        ideal_phases=ideal,
        phase_indices=indices,
        n_bits=n_bits,
    )
