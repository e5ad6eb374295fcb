"""Frame-structure durations and rate/SNR targets."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class OverheadError(ValueError):
    """Pilot overhead leaves no time for data."""


def beam_training_duration(codebook_size: int, t_s: float, t_resp: float, t_delay: float) -> float:
    """Exhaustive sweep with one pilot per codeword, response gaps and feedback delay."""
    if min(codebook_size, t_s, t_resp, t_delay) < 0:
        raise ValueError("durations and codebook size must be non-negative")
    return (t_s + t_resp) * codebook_size + t_delay + t_resp


def frame_duration(kappa: float, velocity: float, c_y: float, c_z: float) -> float:
    """Time a user moving at ``velocity`` needs to cross kappa subarea diagonals."""
    if velocity <= 0 or kappa <= 0:
        raise ValueError("velocity and kappa must be positive")
    return kappa / velocity * math.hypot(c_y, c_z)


def subframe_duration(wavelength: float, velocity: float) -> float:
    """Channel coherence time used as the subframe length."""
    return 3.0 * wavelength / (4.0 * math.sqrt(math.pi) * velocity)


def effective_data_duration(t_dt, t_s: float, n_est: int, wavelength: float, velocity: float):
    """Data time left after per-subframe pilots. Returns ``(t_dt_eff, t_sf)``."""
    t_sf = subframe_duration(wavelength, velocity)
    keep = 1.0 - n_est * t_s / t_sf
    if keep <= 0:
        raise OverheadError(f"pilot overhead {n_est * t_s:.3g} s fills the subframe {t_sf:.3g} s")
    return t_dt * keep, t_sf


def min_data_snr(r_min: float, t_dt_eff, t_fr: float):
    """SNR needed so that the effective rate reaches ``r_min``; inf when no data time is left."""
    t = np.asarray(t_dt_eff, dtype=float)
    with np.errstate(divide="ignore", over="ignore"):
        snr = np.where(t > 0, np.exp2(r_min * t_fr / np.where(t > 0, t, 1.0)) - 1.0, np.inf)
    return float(snr) if snr.ndim == 0 else snr


def effective_rate(snr, t_dt_eff, t_fr: float):
    return np.asarray(t_dt_eff) / t_fr * np.log2(1.0 + np.asarray(snr))


@dataclass(frozen=True)
class FrameTiming:
    t_bt: float
    t_fr: float
    t_eh: float
    t_dt: float
    t_sf: float
    t_dt_eff: float

    @property
    def n_sf(self) -> float:
        return self.t_dt / self.t_sf

    @property
    def feasible(self) -> bool:
        return self.t_dt > 0 and self.t_eh >= 0


def frame_timing(
    codebook_size: int,
    c_y: float,
    c_z: float,
    *,
    kappa: float,
    velocity: float,
    t_s: float,
    t_resp: float,
    t_delay: float,
    n_est: int,
    wavelength: float,
    harvest_fraction: float = 0.0,
) -> FrameTiming:
    """Stage durations; ``harvest_fraction`` is 1 - rho for TS and 0 otherwise."""
    t_fr = frame_duration(kappa, velocity, c_y, c_z)
    t_bt = beam_training_duration(codebook_size, t_s, t_resp, t_delay)
    t_eh = harvest_fraction * t_fr
    t_dt = t_fr - t_eh - t_bt
    t_dt_eff, t_sf = effective_data_duration(t_dt, t_s, n_est, wavelength, velocity)
    return FrameTiming(t_bt, t_fr, t_eh, t_dt, t_sf, t_dt_eff)
