"""RIS power consumption: PIN diodes, RF phase shifters and static load."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .schemes import Scheme, Stage


def n_on(i, n_b: int):
    """Active PIN diodes for phase index ``i`` of an ``n_b``-bit cell."""
    arr = np.asarray(i)
    if np.any(arr < 0) or np.any(arr >= (1 << n_b)):
        raise ValueError(f"phase index out of range for {n_b} bits")
    arr = arr.astype(np.int64)
    total = arr.copy()
    for k in range(1, n_b + 1):
        total -= arr >> k
    return int(total) if total.ndim == 0 else total


@dataclass(frozen=True)
class PowerModelParams:
    p_sta: float
    p_uc: float
    p_sh: float
    n_b: int

    def __post_init__(self):
        if min(self.p_sta, self.p_uc, self.p_sh) < 0 or self.n_b < 1:
            raise ValueError("power model parameters must be non-negative")


def tile_powers(phase_indices: np.ndarray, tile_of_cell: np.ndarray, n_tiles: int,
                cells_per_tile: int, params: PowerModelParams):
    """Per-tile reflection power for every codeword and per-tile harvesting power.

    Args:
        phase_indices: (B, N_r) phase indices of the reflecting cells.
        tile_of_cell: (N_r,) tile index of each reflecting cell.

    Returns:
        ``reflect`` of shape (B, n_tiles) and ``harvest`` of shape (n_tiles,).
    """
    active = n_on(phase_indices, params.n_b).astype(float) * params.p_uc
    reflect = np.zeros((active.shape[0], n_tiles))
    for t in np.unique(tile_of_cell):
        reflect[:, t] = active[:, tile_of_cell == t].sum(axis=1)
    harvest = np.full(n_tiles, (cells_per_tile - 1) * params.n_b * params.p_sh)
    return reflect, harvest


def total_consumption(p_sta: float, reflect_b: np.ndarray, harvest: np.ndarray,
                      reflect_tiles, harvest_tiles):
    """Static power plus harvesting and reflection sums over the stage's tile sets.

    ``reflect_b`` may be (n_tiles,) for one codeword or (B, n_tiles) for many.
    """
    h = float(np.sum(harvest[np.asarray(harvest_tiles, dtype=int)]))
    r = np.asarray(reflect_b)[..., np.asarray(reflect_tiles, dtype=int)].sum(axis=-1)
    return p_sta + h + r


def stage_tile_sets(scheme: Scheme, stage: Stage, n_tiles: int, block=None):
    """Reflecting and harvesting tile index arrays for a scheme and stage."""
    all_tiles = np.arange(n_tiles)
    none = np.array([], dtype=int)
    scheme = Scheme.parse(scheme)
    if scheme is Scheme.TS:
        return (none, all_tiles) if stage is Stage.EH else (all_tiles, none)
    if stage is Stage.EH:
        return none, none
    if scheme is Scheme.PS:
        return all_tiles, all_tiles
    if block is None:
        raise ValueError("ES needs the reflecting block")
    block = np.asarray(block)
    return block, np.setdiff1d(all_tiles, block)


def inactive_surcharge(p_sta: float, codebook_size: int, t_resp: float, t_delay: float,
                       t_s: float, t_dt: float) -> float:
    """Static power spread over active time to cover response gaps and feedback delay."""
    active = t_s * codebook_size + t_dt
    if active <= 0:
        raise ValueError("no active transmission time to spread the surcharge over")
    energy = p_sta * (t_resp * (codebook_size + 1) + t_delay)
    return energy / active


def harvested_power(p_tx_avg, g_inc: float, g_tx: float, g_tile_min: float, g_dc: float,
                    n_harvesting: int, characteristic) -> np.ndarray:
    """DC power from ``n_harvesting`` tiles, each treated as the weakest tile."""
    if n_harvesting < 1:
        raise ValueError("no harvesting tiles in this stage")
    return g_dc * n_harvesting * characteristic(g_inc * g_tx * g_tile_min * np.asarray(p_tx_avg))


def ts_frame_energy(reflect: np.ndarray, harvest: np.ndarray, p_sta: float,
                    t_fr, t_eh, t_s: float, t_dt):
    """Energy consumed in a TS frame for each selected codeword.

    Args:
        reflect: (B, n_tiles) reflection power per codeword and tile.
        harvest: (n_tiles,) harvesting power per tile.
        t_fr, t_eh, t_dt: scalars or arrays broadcastable against (B,).
    """
    per_codeword = reflect.sum(axis=1)
    return (np.asarray(t_fr) * p_sta + np.asarray(t_eh) * harvest.sum()
            + t_s * per_codeword.sum() + np.asarray(t_dt) * per_codeword)
