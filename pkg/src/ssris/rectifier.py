"""Logistic rectifier model: RF-to-DC characteristics, their inverses, and fitting."""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Callable

import numpy as np
from scipy import integrate, optimize

logger = logging.getLogger(__name__)

LAGUERRE_NODES = 96
INVERSE_RTOL = 1e-10
BRACKET_LIMIT = 1e3  # bracket growth stops at this multiple of d

UNIT_SCALE = {"w": 1.0, "mw": 1e-3, "uw": 1e-6, "nw": 1e-9}


class NumericalError(RuntimeError):
    """Quadrature or root finding failed to meet its tolerance."""


class UnreachableDemandError(ValueError):
    """Requested DC output is at or above what the characteristic can deliver."""


class FitError(ValueError):
    pass


@lru_cache(maxsize=4)
def _laguerre(n: int) -> tuple[np.ndarray, np.ndarray]:
    return np.polynomial.laguerre.laggauss(n)


def exponential_average(func: Callable[[np.ndarray], np.ndarray], p_avg, nodes: int = LAGUERRE_NODES):
    """E[func(X)] for X exponential with mean p_avg, by Gauss-Laguerre quadrature."""
    t, w = _laguerre(nodes)
    p = np.asarray(p_avg, dtype=float)
    if np.any(p < 0):
        raise ValueError("average power must be non-negative")
    vals = func(p[..., None] * t) @ w
    return float(vals) if vals.ndim == 0 else vals


@dataclass(frozen=True)
class RectifierModel:
    """Shifted logistic characteristic with Psi(0) = 0 and sup Psi = p_sat.

    Attributes:
        c: Slope parameter in 1/W.
        d: Inflection input power in W.
        p_sat: Saturation output power in W.
        thr_fraction: p_thr is the input that yields this fraction of p_sat.
    """

    c: float
    d: float
    p_sat: float
    thr_fraction: float = 0.99

    def __post_init__(self):
        if not (self.c > 0 and self.d > 0 and self.p_sat > 0):
            raise ValueError("rectifier parameters c, d, p_sat must be positive")

    @property
    def omega(self) -> float:
        tail = math.exp(-self.c * self.d)
        return tail / (1.0 + tail)

    @property
    def p_thr(self) -> float:
        return self.psi_inverse_det(self.thr_fraction * self.p_sat)

    def psi(self, p_rf):
        """Deterministic characteristic: DC output for a constant RF input."""
        x = np.asarray(p_rf, dtype=float)
        if np.any(x < 0):
            raise ValueError("RF input power must be non-negative")
        om = self.omega
        cx = self.c * x
        a, b = 0.5 * (cx - self.c * self.d), -0.5 * self.c * self.d
        with np.errstate(over="ignore", invalid="ignore"):
            # sigma(2a) - sigma(2b) without cancellation for small inputs
            small = np.sinh(0.5 * cx) / (2.0 * np.cosh(a) * np.cosh(b))
        large = 0.5 * (1.0 + np.tanh(a)) - om
        out = self.p_sat * np.where(cx < 1.0, small, large) / (1.0 - om)
        return float(out) if out.ndim == 0 else out

    def psi_bar_dt(self, p_avg, nodes: int = LAGUERRE_NODES):
        """Mean DC output when the RF input is exponential with mean p_avg.

        For p_avg above 1/c the knee falls below the first Laguerre node, so the
        shortfall P_sat - Psi, which decays like exp(-c x), is integrated instead
        with that decay folded into the weight.
        """
        p = np.asarray(p_avg, dtype=float)
        if np.any(p < 0):
            raise ValueError("average power must be non-negative")
        t, w = _laguerre(nodes)
        direct = self.psi(p[..., None] * t) @ w
        with np.errstate(divide="ignore", invalid="ignore"):
            rate = 1.0 / p + self.c
            x = t / rate[..., None]
            e_cd = math.exp(-self.c * self.d)
            # (P_sat - Psi(x)) * exp(c x), a bounded logistic in x
            lifted = self.p_sat * (1.0 + e_cd) / (e_cd + np.exp(-self.c * x))
            shortfall = (lifted @ w) / (p * rate)
        out = np.where(p * self.c <= 1.0, direct, self.p_sat - shortfall)
        out = np.where(p > 0, out, 0.0)
        return float(out) if out.ndim == 0 else out

    def characteristic(self, random_input: bool) -> Callable:
        return self.psi_bar_dt if random_input else self.psi

    def psi_inverse_det(self, p_dc):
        """Closed-form inverse of the deterministic characteristic; inf where unreachable."""
        y = np.asarray(p_dc, dtype=float)
        om = self.omega
        u = np.clip(y, 0.0, self.p_sat) * (1.0 - om) / self.p_sat
        with np.errstate(divide="ignore", invalid="ignore"):
            # logit(omega + u) - logit(omega), written to stay accurate for small u
            x = (np.log1p(u / om) - np.log1p(-u / (1.0 - om))) / self.c
        x = np.where(y <= 0, 0.0, np.where(y >= self.p_sat, np.inf, x))
        return float(x) if x.ndim == 0 else x

    def psi_inverse_dt(self, p_dc):
        """Inverse of psi_bar_dt by vectorized bisection; inf where unreachable."""
        y = np.atleast_1d(np.asarray(p_dc, dtype=float))
        out = np.zeros_like(y)
        todo = y > 0
        if not np.any(todo):
            return float(out[0]) if np.ndim(p_dc) == 0 else out
        target = y[todo]
        hi = np.maximum(self.d, self.psi_inverse_det(np.minimum(target, 0.5 * self.p_sat)))
        limit = BRACKET_LIMIT * self.d
        reach = self.psi_bar_dt(hi) >= target
        while not np.all(reach | (hi >= limit)):
            grow = ~reach & (hi < limit)
            hi[grow] = np.minimum(2 * hi[grow], limit)
            reach[grow] = self.psi_bar_dt(hi[grow]) >= target[grow]
        lo = np.zeros_like(hi)
        res = np.full_like(hi, np.inf)
        if np.any(reach):
            a, b, t = lo[reach], hi[reach], target[reach]
            for _ in range(200):
                mid = 0.5 * (a + b)
                below = self.psi_bar_dt(mid) < t
                a = np.where(below, mid, a)
                b = np.where(below, b, mid)
                if np.all(b - a <= INVERSE_RTOL * b):
                    break
            else:
                raise NumericalError("bisection did not converge")
            res[reach] = 0.5 * (a + b)
        out[todo] = res
        return float(out[0]) if np.ndim(p_dc) == 0 else out

    def psi_inverse(self, p_dc: float, characteristic: str = "det") -> float:
        """Input power giving ``p_dc`` on the chosen characteristic (``det`` or ``dt``).

        Raises:
            UnreachableDemandError: if ``p_dc`` is not attainable.
        """
        if p_dc < 0:
            raise ValueError("DC power must be non-negative")
        if characteristic == "det":
            x = self.psi_inverse_det(p_dc)
        elif characteristic == "dt":
            x = self.psi_inverse_dt(p_dc)
        else:
            raise ValueError(f"unknown characteristic {characteristic!r}")
        if not math.isfinite(x):
            raise UnreachableDemandError(
                f"DC demand {p_dc:.4g} W exceeds the {characteristic} characteristic's reach"
            )
        return x

    def cross_check(self, p_avg: float, atol_fraction: float = 1e-8) -> float:
        """Absolute gap between Gauss-Laguerre and adaptive quadrature at one point."""
        if p_avg == 0:
            return 0.0
        # in u = x / p_avg the weight is exp(-u); break at the knee as well
        knee = self.d / p_avg
        edges = sorted({0.0, 1.0, 10.0, 50.0} | {k for k in (knee, 20 * knee) if k < 50.0})
        val = err = 0.0
        for lo, hi in zip(edges, edges[1:]):
            part, part_err = integrate.quad(
                lambda u: math.exp(-u) * self.psi(p_avg * u),
                lo, hi, epsabs=atol_fraction * self.p_sat * 0.01, epsrel=1e-12, limit=400,
            )
            val += part
            err += part_err
        gap = abs(val - self.psi_bar_dt(p_avg))
        if gap > atol_fraction * self.p_sat:
            raise NumericalError(
                f"quadrature mismatch at p_avg={p_avg:.3g} W: gap {gap:.3g} W (adaptive err {err:.2g})"
            )
        return gap

    def to_dict(self) -> dict:
        return {"c_per_w": self.c, "d_w": self.d, "p_sat_w": self.p_sat}

    @classmethod
    def from_dict(cls, data: dict, thr_fraction: float = 0.99) -> "RectifierModel":
        return cls(float(data["c_per_w"]), float(data["d_w"]), float(data["p_sat_w"]), thr_fraction)


def monte_carlo_average(func: Callable, p_avg: float, samples: int, rng: np.random.Generator) -> float:
    """Sample mean of func(X), X exponential with mean p_avg."""
    if p_avg == 0:
        return float(func(np.zeros(1))[0])
    draws = rng.exponential(p_avg, size=samples)
    return float(np.mean(func(draws)))


@dataclass(frozen=True)
class MeasurementSet:
    rf_input: np.ndarray
    dc_output: np.ndarray

    def __post_init__(self):
        if self.rf_input.shape != self.dc_output.shape or self.rf_input.ndim != 1:
            raise ValueError("measurement columns must be 1-D and equally long")
        if np.any(self.rf_input <= 0) or np.any(np.diff(self.rf_input) <= 0):
            raise ValueError("RF inputs must be positive and strictly ascending")
        if np.any(self.dc_output < 0):
            raise ValueError("DC outputs must be non-negative")

    def __len__(self):
        return len(self.rf_input)


def _column_scale(header: str, quantity: str) -> float:
    prefix = f"{quantity}_"
    if not header.startswith(prefix):
        raise ValueError(f"expected a '{quantity}_<unit>' column, got {header!r}")
    unit = header[len(prefix):].lower()
    if unit not in UNIT_SCALE:
        raise ValueError(f"unknown unit {unit!r} in column {header!r}")
    return UNIT_SCALE[unit]


def load_measurements(path: str | Path) -> MeasurementSet:
    """Read a two-column CSV whose header names units, e.g. ``rf_input_mw,dc_output_uw``."""
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].lstrip().startswith("#")]
    if len(rows) < 2 or len(rows[0]) != 2:
        raise ValueError(f"{path}: need a two-column header and at least one data row")
    sx = _column_scale(rows[0][0].strip(), "rf_input")
    sy = _column_scale(rows[0][1].strip(), "dc_output")
    data = np.array([[float(a), float(b)] for a, b in rows[1:]])
    return MeasurementSet(data[:, 0] * sx, data[:, 1] * sy)


@dataclass(frozen=True)
class FitResult:
    model: RectifierModel
    rms: float
    starts: int


def fit(measurements: MeasurementSet, thr_fraction: float = 0.99) -> FitResult:
    """Least-squares logistic fit with multi-start refinement in log-parameter space."""
    x, y = measurements.rf_input, measurements.dc_output
    if len(x) < 4:
        raise FitError("need at least four measurement points")
    if not np.any(y > 0):
        raise FitError("all DC outputs are zero")
    ymax = float(y.max())

    def residual(theta):
        c, d, p_sat = np.exp(theta)
        return (RectifierModel(c, d, p_sat, thr_fraction).psi(x) - y) / ymax

    best = None
    starts = 0
    for d0 in np.quantile(x, [0.25, 0.5, 0.75]):
        for cd in (1.0, 3.0, 8.0):
            for sat in (1.0, 1.5, 3.0):
                theta0 = np.log([cd / d0, d0, sat * ymax])
                try:
                    sol = optimize.least_squares(residual, theta0, method="lm", xtol=1e-14, ftol=1e-14, gtol=1e-14)
                except (ValueError, FloatingPointError, OverflowError):
                    continue
                starts += 1
                if best is None or sol.cost < best.cost:
                    best = sol
    if best is None:
        raise FitError("no start converged")
    c, d, p_sat = np.exp(best.x)
    model = RectifierModel(float(c), float(d), float(p_sat), thr_fraction)
    rms = float(np.sqrt(np.mean((model.psi(x) - y) ** 2)))
    logger.info("rectifier fit c=%.4g /W d=%.4g W p_sat=%.4g W rms=%.3g W", c, d, p_sat, rms)
    return FitResult(model, rms, starts)


def save_fit(result: FitResult, path: str | Path, source: str = "") -> None:
    payload = {**result.model.to_dict(), "rms_w": result.rms, "source": source}
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def load_fit(path: str | Path, thr_fraction: float = 0.99) -> RectifierModel:
    return RectifierModel.from_dict(json.loads(Path(path).read_text()), thr_fraction)


def bundled_model(thr_fraction: float = 0.99) -> RectifierModel:
    ref = resources.files("ssris") / "data" / "rectifier_fit.json"
    return RectifierModel.from_dict(json.loads(ref.read_text()), thr_fraction)


def bundled_measurements() -> MeasurementSet:
    ref = resources.files("ssris") / "data" / "rectifier_measurements.csv"
    with resources.as_file(ref) as path:
        return load_measurements(path)


def resolve_model(spec: str, thr_fraction: float = 0.99) -> RectifierModel:
    """Model named by a config value: ``bundled`` or a path to a fit JSON."""
    if spec == "bundled":
        return bundled_model(thr_fraction)
    return load_fit(spec, thr_fraction)
