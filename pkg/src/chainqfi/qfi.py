"""Quantum Fisher information from the dynamic susceptibility, and the
power-law scaling fit of its temperature dependence.

F_Q(T) = (4/pi) * Integral_0^omega_max tanh(omega / 2 k_B T) chi''(omega, T) d omega

Tabulated cuts are integrated with the trapezoid rule on their native
grid (no resampling is invented); model closures go through adaptive
quadrature. F_Q inherits the arbitrary intensity scale of the input.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .core import DEFAULT_UNITS, EnergyCut, UnitSystem
from .errors import GridTooCoarse, NegativeChiImagWarning, NonPositiveValue, TruncationWarning

__all__ = ["QfiPoint", "ScalingFit", "qfi_integrand", "compute_qfi", "fit_scaling"]

# fraction of the upper end of the omega interval counted as "near the cutoff"
_TAIL_FRACTION_OF_RANGE = 0.1
_TAIL_REPORT_THRESHOLD = 0.01


@dataclass(frozen=True)
class QfiPoint:
    """One F_Q(T) evaluation. ``clipped_count`` is the number of negative
    chi'' bins set to zero before integration; ``tail_fraction`` is the
    share of F_Q collected in the top 10% of the omega range (a value
    above 1% flags possible truncation)."""

    temperature: float
    f_q: float
    quadrature_error_estimate: float
    clipped_count: int = 0
    tail_fraction: float = 0.0


@dataclass(frozen=True)
class ScalingFit:
    """Power-law fit F_Q = amplitude * T^(-delta_q_over_z)."""

    delta_q_over_z: float
    delta_q: float
    amplitude: float
    covariance: np.ndarray
    r_squared: float
    z: float


def qfi_integrand(omega, t: float, chi_imag, units: UnitSystem = DEFAULT_UNITS):
    """tanh(omega / 2 k_B T) * chi''; omega in meV, T in K."""
    if not (t > 0):
        raise ValueError(f"temperature must be positive, got {t}")
    omega_arr = np.asarray(omega, dtype=float)
    out = np.tanh(omega_arr / (2.0 * units.boltzmann_mev_per_kelvin * t)) * np.asarray(
        chi_imag, dtype=float
    )
    return float(out) if out.ndim == 0 else out


def _trapezoid_tail_fraction(e: np.ndarray, integrand: np.ndarray, omega_max: float) -> float:
    total = np.trapezoid(integrand, e)
    if total <= 0:
        return 0.0
    cut = (1.0 - _TAIL_FRACTION_OF_RANGE) * omega_max
    mask = e >= cut
    if np.count_nonzero(mask) < 2:
        return 0.0
    return float(np.trapezoid(integrand[mask], e[mask]) / total)


def _qfi_tabulated(cut: EnergyCut, omega_max: float, units: UnitSystem) -> QfiPoint:
    if cut.e_axis[-1] < omega_max:
        raise GridTooCoarse(
            f"energy grid ends at {cut.e_axis[-1]:g} meV, below omega_max = "
            f"{omega_max:g} meV; extend the data or lower --omega-max"
        )
    mask = (cut.e_axis >= 0.0) & (cut.e_axis <= omega_max)
    e = cut.e_axis[mask]
    chi = np.array(cut.values[mask])
    if e.size < 8:
        raise GridTooCoarse(
            f"only {e.size} energy bins in [0, {omega_max:g}] meV; need at least 8; "
            "supply a finer energy grid"
        )
    negative = chi < 0
    clipped = int(np.count_nonzero(negative))
    if clipped:
        warnings.warn(
            f"clipped {clipped} negative chi'' bins to zero",
            NegativeChiImagWarning,
            stacklevel=3,
        )
        chi[negative] = 0.0
    if e[0] > 0.0:
        # the integrand vanishes at omega = 0 for any finite chi''
        e = np.concatenate(([0.0], e))
        chi = np.concatenate(([0.0], chi))
    integrand = qfi_integrand(e, cut.temperature, chi, units)
    f_q = (4.0 / math.pi) * float(np.trapezoid(integrand, e))
    # error estimate: compare against the half-resolution trapezoid
    coarse_idx = np.arange(0, e.size, 2)
    if coarse_idx[-1] != e.size - 1:
        coarse_idx = np.concatenate((coarse_idx, [e.size - 1]))
    f_half = (4.0 / math.pi) * float(np.trapezoid(integrand[coarse_idx], e[coarse_idx]))
    tail = _trapezoid_tail_fraction(e, integrand, omega_max)
    if tail > _TAIL_REPORT_THRESHOLD:
        warnings.warn(
            f"{100 * tail:.1f}% of F_Q mass lies in the top 10% of the omega range; "
            "the integral may be truncated",
            TruncationWarning,
            stacklevel=3,
        )
    return QfiPoint(
        temperature=cut.temperature,
        f_q=f_q,
        quadrature_error_estimate=abs(f_q - f_half),
        clipped_count=clipped,
        tail_fraction=tail,
    )


def _qfi_model(
    chi_fn: Callable[[float], float], t: float, omega_max: float, units: UnitSystem
) -> QfiPoint:
    from scipy.integrate import quad

    def integrand(w):
        return math.tanh(w / (2.0 * units.boltzmann_mev_per_kelvin * t)) * chi_fn(w)

    value, abserr = quad(integrand, 0.0, omega_max, epsrel=1e-8, epsabs=0.0, limit=200)
    cut = (1.0 - _TAIL_FRACTION_OF_RANGE) * omega_max
    tail_value, _ = quad(integrand, cut, omega_max, epsrel=1e-8, epsabs=0.0, limit=200)
    tail = tail_value / value if value > 0 else 0.0
    if tail > _TAIL_REPORT_THRESHOLD:
        warnings.warn(
            f"{100 * tail:.1f}% of F_Q mass lies in the top 10% of the omega range; "
            "the integral may be truncated",
            TruncationWarning,
            stacklevel=3,
        )
    scale = 4.0 / math.pi
    return QfiPoint(
        temperature=t,
        f_q=scale * value,
        quadrature_error_estimate=scale * abserr,
        clipped_count=0,
        tail_fraction=float(tail),
    )


def compute_qfi(
    source: EnergyCut | Callable[[float], float],
    t: float | None = None,
    omega_max: float | None = None,
    units: UnitSystem = DEFAULT_UNITS,
) -> QfiPoint:
    """Evaluate F_Q(T) from a tabulated chi'' cut or a model closure.

    For an :class:`EnergyCut` the temperature is taken from the cut (an
    explicit ``t`` must agree) and negative bins are clipped to zero with
    a warning and a count on the returned point. A callable source is
    integrated adaptively to 1e-8 relative and requires ``t``.
    ``omega_max`` (meV) is mandatory; pi*J is the conventional choice.
    """
    if omega_max is None or not (omega_max > 0):
        raise ValueError("omega_max (meV) must be positive")
    if isinstance(source, EnergyCut):
        if t is not None and abs(t - source.temperature) > 1e-9 * max(1.0, abs(t)):
            raise ValueError(
                f"explicit t = {t} disagrees with cut temperature {source.temperature}"
            )
        return _qfi_tabulated(source, omega_max, units)
    if t is None or not (t > 0):
        raise ValueError("model closures require a positive temperature t")
    return _qfi_model(source, t, omega_max, units)


def fit_scaling(points: Sequence[QfiPoint], z: float = 1.0) -> ScalingFit:
    """Ordinary least squares of ln F_Q on ln T.

    Returns the exponent delta_q_over_z = -slope (and delta_q = -slope*z),
    the amplitude exp(intercept), the 2x2 covariance of (slope, intercept)
    and R^2. Uniform rescaling of all F_Q values moves only the amplitude.
    """
    if len(points) < 3:
        raise ValueError(f"need at least 3 points for the scaling fit, got {len(points)}")
    if not (z > 0):
        raise ValueError(f"dynamic critical exponent z must be positive, got {z}")
    temps = np.array([p.temperature for p in points], dtype=float)
    values = np.array([p.f_q for p in points], dtype=float)
    if np.any(values <= 0):
        raise NonPositiveValue("all F_Q values must be positive for the log-log fit")
    if np.any(temps <= 0):
        raise NonPositiveValue("all temperatures must be positive for the log-log fit")

    x = np.log(temps)
    y = np.log(values)
    design = np.column_stack((x, np.ones_like(x)))
    coeffs, *_ = np.linalg.lstsq(design, y, rcond=None)
    slope, intercept = float(coeffs[0]), float(coeffs[1])
    resid = y - design @ coeffs
    rss = float(resid @ resid)
    tss = float(np.sum((y - y.mean()) ** 2))
    dof = len(points) - 2
    sigma2 = rss / dof if dof > 0 else 0.0
    covariance = sigma2 * np.linalg.inv(design.T @ design)
    r_squared = 1.0 if tss == 0 else max(0.0, 1.0 - rss / tss)
    return ScalingFit(
        delta_q_over_z=-slope,
        delta_q=-slope * z,
        amplitude=math.exp(intercept),
        covariance=covariance,
        r_squared=r_squared,
        z=z,
    )
