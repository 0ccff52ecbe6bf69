"""Complex log-gamma and the gamma-ratio imaginary part.

The finite-temperature line shape needs Im(Gamma^2(d - ix) / Gamma^2(1 - d - ix))
evaluated stably for x up to ~1e3. The squared gamma factors overflow or
underflow individually at large |x|, so the ratio is formed in log space
and exponentiated once.
"""
from __future__ import annotations

import cmath
import math

from .core import DEFAULT_UNITS, UnitSystem
from .errors import DomainError, NonPositiveTemperature, PoleAtNonPositiveInteger

__all__ = ["log_gamma_complex", "gamma_ratio_im"]

# Lanczos approximation, g = 7, 9 coefficients.
_LANCZOS_G = 7.0
_LANCZOS_COEFFS = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)

_HALF_LOG_TWO_PI = 0.5 * math.log(2.0 * math.pi)


def _log_sin(w: complex) -> complex:
    """log sin(w), safe for large |Im w| where sin itself overflows."""
    if abs(w.imag) < 30.0:
        return cmath.log(cmath.sin(w))
    if w.imag < 0:
        # sin w = e^{iw} (1 - e^{-2iw}) / (2i), |e^{-2iw}| = e^{2 Im w} << 1
        return 1j * w + cmath.log((1.0 - cmath.exp(-2j * w)) / 2j)
    return -1j * w + cmath.log((cmath.exp(2j * w) - 1.0) / 2j)


def log_gamma_complex(z: complex) -> complex:
    """Principal-branch log Gamma(z) via the Lanczos approximation.

    For Re z < 0.5 the reflection formula is used; the result there may
    differ from the principal branch by a multiple of 2*pi*i, which is
    immaterial once exponentiated (the only use made of that region).
    """
    z = complex(z)
    if z.imag == 0.0 and z.real <= 0.0 and z.real == math.floor(z.real):
        raise PoleAtNonPositiveInteger(f"log-gamma pole at z = {z.real:g}")
    if z.real < 0.5:
        # reflection: log Gamma(z) = log(pi / sin(pi z)) - log Gamma(1 - z)
        return cmath.log(math.pi) - _log_sin(math.pi * z) - log_gamma_complex(1.0 - z)
    w = z - 1.0
    series = _LANCZOS_COEFFS[0]
    for i, coeff in enumerate(_LANCZOS_COEFFS[1:], start=1):
        series += coeff / (w + i)
    t = w + _LANCZOS_G + 0.5
    return _HALF_LOG_TWO_PI + (w + 0.5) * cmath.log(t) - t + cmath.log(series)


def gamma_ratio_im(
    delta: float,
    omega: float,
    temperature: float,
    units: UnitSystem = DEFAULT_UNITS,
) -> float:
    """Im of Gamma^2(delta - ix) / Gamma^2(1 - delta - ix), x = omega / (4 pi k_B T).

    ``omega`` is in meV, ``temperature`` in K. Odd in omega and zero at
    omega = 0. Requires 0 < delta < 1/2 so both gamma arguments stay off
    the poles for every real x.
    """
    if not (0.0 < delta < 0.5):
        raise DomainError(f"delta must lie in (0, 1/2), got {delta}")
    if not (temperature > 0):
        raise NonPositiveTemperature(f"temperature must be positive, got {temperature}")
    x = omega / (4.0 * math.pi * units.boltzmann_mev_per_kelvin * temperature)
    if x == 0.0:
        return 0.0
    log_ratio = 2.0 * (
        log_gamma_complex(complex(delta, -x))
        - log_gamma_complex(complex(1.0 - delta, -x))
    )
    return cmath.exp(log_ratio).imag
