"""Plane-wave and spherical-wave phase profiles and N-bit phase quantization."""

from __future__ import annotations

import numpy as np

TWO_PI = 2.0 * np.pi


def _as_positions3(positions: np.ndarray) -> np.ndarray:
    positions = np.asarray(positions, dtype=float)
    if positions.shape[-1] == 2:  # (y, z) in the RIS plane x = 0
        positions = np.concatenate([np.zeros(positions.shape[:-1] + (1,)), positions], axis=-1)
    return positions


def incident_phases(positions: np.ndarray, direction: np.ndarray, wavelength: float) -> np.ndarray:
    """Phase of a far-field plane wave at each cell, relative to the RIS origin.

    Args:
        positions: (N, 2) in-plane (y, z) coordinates or (N, 3) points, meters.
        direction: Unit vector from the RIS toward the source; must have x > 0.
        wavelength: Carrier wavelength in meters.
    """
    direction = np.asarray(direction, dtype=float)
    if not np.isclose(np.linalg.norm(direction), 1.0, atol=1e-9):
        raise ValueError("arrival direction must be a unit vector")
    if direction[0] <= 0:
        raise ValueError("arrival direction must point into the front half-space (x > 0)")
    return (TWO_PI / wavelength) * (_as_positions3(positions) @ direction)


def reflected_phases(positions: np.ndarray, locations: np.ndarray, wavelength: float) -> np.ndarray:
    """Exact spherical-wave phase from each cell to each location.

    Returns an array of shape ``locations.shape[:-1] + (N,)`` holding
    ``-(2 pi / lambda) * (|l - r_n| - |l|)``, so the origin has phase zero.
    """
    cells = _as_positions3(positions)
    locations = np.asarray(locations, dtype=float)
    diff = locations[..., None, :] - cells
    dist = np.sqrt(np.einsum("...k,...k->...", diff, diff))
    ref = np.linalg.norm(locations, axis=-1)[..., None]
    return -(TWO_PI / wavelength) * (dist - ref)


def quantize_indices(phase: np.ndarray, n_bits: int) -> np.ndarray:
    """Nearest level index of ``2 pi k / 2**n_bits``; exact ties go to the smaller index."""
    levels = 1 << n_bits
    step = TWO_PI / levels
    wrapped = np.mod(phase, TWO_PI)
    k = np.ceil(wrapped / step - 0.5)
    return (k.astype(np.int64) % levels).astype(np.int16)


def indices_to_phase(indices: np.ndarray, n_bits: int) -> np.ndarray:
    return np.asarray(indices, dtype=float) * (TWO_PI / (1 << n_bits))


def quantize(phase: np.ndarray, n_bits: int) -> np.ndarray:
    return indices_to_phase(quantize_indices(phase, n_bits), n_bits)
