"""Static susceptibility of the uniform spin-1/2 chain and the
susceptibility-based entanglement witness.

The chain susceptibility is carried as a [2/3] rational approximant in
x = J / (k_B T) multiplying the Curie prefactor N g^2 mu_B^2 / (k_B T).
The coefficient set is a module constant and can be swapped behind the
same interface.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from . import fitter
from .core import DEFAULT_UNITS, ChainParameters, UnitSystem, _frozen_array, _require_strictly_increasing
from .errors import NonPositiveTemperature, NoInteriorMaximum

__all__ = [
    "SusceptibilityCurve",
    "WitnessSeries",
    "PADE_NUMERATOR",
    "PADE_DENOMINATOR",
    "TMAX_OVER_J",
    "chi_bonner_fisher",
    "chi_full",
    "fit_susceptibility",
    "find_tmax",
    "find_tmax_model",
    "j_from_tmax",
    "witness_mwse",
]

# Rational approximant for the uniform-chain susceptibility,
# chi = (N g^2 mu_B^2 / k_B T) * N(x)/D(x) with x = J / (k_B T).
# Numerator fixed at 0.25 + 0.074975 x + 0.075235 x^2 (exact Curie limit);
# the cubic denominator coefficient is calibrated so the curve's maximum
# sits at k_B T / J = 0.640851 (the high-temperature-series peak position),
# which the historical 0.757825 value misses by ~1%.
PADE_NUMERATOR = (0.25, 0.074975, 0.075235)
PADE_DENOMINATOR = (1.0, 0.9931, 0.172135, 0.748472545171346)

# Peak position of the chain susceptibility: T_max = 0.640851 * J / k_B.
TMAX_OVER_J = 0.640851


@dataclass(frozen=True)
class SusceptibilityCurve:
    """Molar susceptibility samples chi(T) with 1-sigma uncertainties."""

    temperatures: np.ndarray
    chi: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        t = _frozen_array(self.temperatures, "temperatures")
        c = _frozen_array(self.chi, "chi")
        s = _frozen_array(self.sigma, "sigma")
        _require_strictly_increasing(t, "temperatures")
        if np.any(t <= 0):
            raise NonPositiveTemperature("curve temperatures must be positive")
        if c.shape != t.shape or s.shape != t.shape:
            raise ValueError("temperatures, chi, sigma must have equal length")
        if np.any(s < 0):
            raise ValueError("sigma must be nonnegative")
        object.__setattr__(self, "temperatures", t)
        object.__setattr__(self, "chi", c)
        object.__setattr__(self, "sigma", s)

    def __len__(self):
        return self.temperatures.size


@dataclass(frozen=True)
class WitnessSeries:
    """Entanglement-witness values per temperature; ``t_se`` is the first
    negative-to-positive crossing (None when the series never crosses)."""

    temperatures: np.ndarray
    mw_se: np.ndarray
    t_se: float | None


def _pade(x):
    a0, a1, a2 = PADE_NUMERATOR
    b0, b1, b2, b3 = PADE_DENOMINATOR
    return (a0 + x * (a1 + x * a2)) / (b0 + x * (b1 + x * (b2 + x * b3)))


def _as_temperature_array(t):
    arr = np.asarray(t, dtype=float)
    if np.any(arr <= 0) or not np.all(np.isfinite(arr)):
        raise NonPositiveTemperature("temperature must be positive and finite")
    return arr


def chi_bonner_fisher(t, params: ChainParameters, units: UnitSystem = DEFAULT_UNITS):
    """Uniform-chain susceptibility (emu/mole) at temperature ``t`` (K).

    Positive everywhere, Curie-like at high temperature, with a single
    maximum at T = 0.640851 J/k_B.
    """
    arr = _as_temperature_array(t)
    x = params.j_over_kb / arr
    curie = (
        units.avogadro
        * (params.g_factor * units.bohr_magneton) ** 2
        / (units.boltzmann_erg_per_kelvin * arr)
    )
    out = curie * _pade(x)
    return float(out) if out.ndim == 0 else out


def chi_full(
    t,
    params: ChainParameters,
    units: UnitSystem = DEFAULT_UNITS,
    impurity_curie: bool = False,
):
    """Chain susceptibility plus the impurity and diamagnetic constants.

    With ``impurity_curie=False`` (default) the impurity term is the
    literal constant ``c0``; with True it is read as a Curie coefficient
    and contributes ``c0 / t`` (c0 then in emu K/mole).
    """
    arr = _as_temperature_array(t)
    impurity = params.c0 / arr if impurity_curie else params.c0
    out = impurity + params.c1 + chi_bonner_fisher(arr, params, units)
    return float(out) if out.ndim == 0 else out


def fit_susceptibility(
    curve: SusceptibilityCurve,
    initial: ChainParameters,
    frozen: Iterable[str] = ("c1",),
    units: UnitSystem = DEFAULT_UNITS,
    impurity_curie: bool = False,
) -> fitter.FitResult:
    """Weighted least-squares fit of chi_full to a measured curve.

    Free parameters come from {j_over_kb, g_factor, c0, c1} minus the
    frozen set. ``c1`` is frozen by default: with the literal constant
    impurity term, c0 and c1 are exactly degenerate (only their sum is
    identifiable), matching the usual practice of fixing the diamagnetic
    correction from tabulated increments. Points with sigma = 0 enter with
    unit weight.
    """
    if len(curve) < 4:
        raise ValueError("need at least 4 points to fit the susceptibility")
    weights = 1.0 / np.where(curve.sigma > 0, curve.sigma, 1.0)
    t = curve.temperatures

    def residuals(p):
        x = p["j_over_kb"] / t
        curie = (
            units.avogadro
            * (p["g_factor"] * units.bohr_magneton) ** 2
            / (units.boltzmann_erg_per_kelvin * t)
        )
        impurity = p["c0"] / t if impurity_curie else p["c0"]
        model = impurity + p["c1"] + curie * _pade(x)
        return (model - curve.chi) * weights

    start = {
        "j_over_kb": initial.j_over_kb,
        "g_factor": initial.g_factor,
        "c0": initial.c0,
        "c1": initial.c1,
    }
    bounds = {
        "j_over_kb": (0.0, None),
        "g_factor": (0.0, None),
        "c1": (None, 0.0),
    }
    frozen = set(frozen)
    # the one-sided transform cannot represent an endpoint start; nudge off 0
    if "c1" not in frozen and start["c1"] == 0.0:
        start["c1"] = -1e-12
    return fitter.least_squares(residuals, start, frozen=frozen, bounds=bounds)


def find_tmax(temperatures, chi_values) -> tuple[float, float]:
    """Locate the susceptibility maximum of a sampled curve.

    Fits a parabola through the three samples bracketing the discrete
    maximum and returns (vertex, half the local grid spacing). Raises
    :class:`NoInteriorMaximum` when the maximum sits on the boundary.
    """
    t = np.asarray(temperatures, dtype=float)
    y = np.asarray(chi_values, dtype=float)
    if t.size != y.size or t.size < 3:
        raise ValueError("need at least 3 samples of equal length")
    i = int(np.argmax(y))
    if i == 0 or i == t.size - 1:
        raise NoInteriorMaximum("susceptibility maximum is not bracketed by the grid")
    t0, t1, t2 = t[i - 1], t[i], t[i + 1]
    y0, y1, y2 = y[i - 1], y[i], y[i + 1]
    denom = (t1 - t0) * (y1 - y2) - (t1 - t2) * (y1 - y0)
    if denom == 0:
        raise NoInteriorMaximum("degenerate parabola through the bracketing samples")
    vertex = t1 - 0.5 * ((t1 - t0) ** 2 * (y1 - y2) - (t1 - t2) ** 2 * (y1 - y0)) / denom
    uncertainty = 0.25 * (t2 - t0)
    return float(vertex), float(uncertainty)


def find_tmax_model(
    params: ChainParameters,
    step: float = 0.01,
    t_min: float | None = None,
    t_max: float | None = None,
    units: UnitSystem = DEFAULT_UNITS,
) -> tuple[float, float]:
    """find_tmax applied to the chain model sampled at ``step`` K."""
    lo = t_min if t_min is not None else 0.2 * params.j_over_kb
    hi = t_max if t_max is not None else 2.0 * params.j_over_kb
    t = np.arange(lo, hi + 0.5 * step, step)
    return find_tmax(t, chi_bonner_fisher(t, params, units))


def j_from_tmax(t_max: float) -> float:
    """Exchange coupling J/k_B (K) from the susceptibility peak position."""
    if not (t_max > 0):
        raise ValueError(f"t_max must be positive, got {t_max}")
    return t_max / TMAX_OVER_J


def witness_mwse(
    curve: SusceptibilityCurve,
    params: ChainParameters,
    units: UnitSystem = DEFAULT_UNITS,
) -> WitnessSeries:
    """Macroscopic spin-entanglement witness from the averaged susceptibility.

    MW_SE(T) = 3 k_B T chi(T) / ((g mu_B)^2 N S) - 1, with the input curve
    taken as the three-axis average. Negative values witness entanglement;
    ``t_se`` is the linearly interpolated first crossing from negative to
    nonnegative values.
    """
    t = curve.temperatures
    denom = (params.g_factor * units.bohr_magneton) ** 2 * units.avogadro * params.spin
    mw = 3.0 * units.boltzmann_erg_per_kelvin * t * curve.chi / denom - 1.0

    t_se = None
    for i in range(mw.size - 1):
        if mw[i] < 0.0 <= mw[i + 1]:
            t_se = float(t[i] + (0.0 - mw[i]) * (t[i + 1] - t[i]) / (mw[i + 1] - mw[i]))
            break
    frozen_mw = np.array(mw, copy=True)
    frozen_mw.flags.writeable = False
    return WitnessSeries(temperatures=t, mw_se=frozen_mw, t_se=t_se)
