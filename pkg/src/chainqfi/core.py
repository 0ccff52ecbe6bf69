"""Units, physical constants, and the shared immutable domain types.

Two fixed unit conventions are used throughout: energies in meV with
temperatures in K (spectroscopy side), and CGS-emu for molar
susceptibility. All conversions happen explicitly at formula boundaries.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    AxisNotMonotone,
    NonPositiveTemperature,
    ShapeMismatch,
)

__all__ = [
    "UnitSystem",
    "DEFAULT_UNITS",
    "ChainParameters",
    "SpectrumGrid",
    "EnergyCut",
    "kelvin_to_mev",
    "mev_to_kelvin",
    "make_grid",
]


@dataclass(frozen=True)
class UnitSystem:
    """Physical constants in the two conventions used by the package.

    ``boltzmann_mev_per_kelvin`` converts temperature to energy on the
    spectroscopy side; ``bohr_magneton`` (erg/G) and ``avogadro`` feed the
    CGS-emu molar susceptibility formulas.
    """

    boltzmann_mev_per_kelvin: float = 0.08617333
    bohr_magneton: float = 9.2740100783e-21
    avogadro: float = 6.02214076e23
    erg_per_mev: float = 1.602176634e-15

    @property
    def boltzmann_erg_per_kelvin(self) -> float:
        return self.boltzmann_mev_per_kelvin * self.erg_per_mev


DEFAULT_UNITS = UnitSystem()


def kelvin_to_mev(t, units: UnitSystem = DEFAULT_UNITS):
    """Convert temperature (K) to the equivalent thermal energy (meV)."""
    t = np.asarray(t, dtype=float)
    if not np.all(np.isfinite(t)):
        raise ValueError("temperature must be finite")
    out = t * units.boltzmann_mev_per_kelvin
    return float(out) if out.ndim == 0 else out


def mev_to_kelvin(e, units: UnitSystem = DEFAULT_UNITS):
    """Convert an energy (meV) to the equivalent temperature (K)."""
    e = np.asarray(e, dtype=float)
    if not np.all(np.isfinite(e)):
        raise ValueError("energy must be finite")
    out = e / units.boltzmann_mev_per_kelvin
    return float(out) if out.ndim == 0 else out


def _frozen_array(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    arr = np.array(arr, copy=True)
    arr.flags.writeable = False
    return arr


def _require_strictly_increasing(axis: np.ndarray, name: str) -> None:
    if axis.ndim != 1 or axis.size < 1:
        raise AxisNotMonotone(f"{name} must be a non-empty 1-d array")
    if axis.size > 1 and not np.all(np.diff(axis) > 0):
        raise AxisNotMonotone(f"{name} must be strictly increasing")


@dataclass(frozen=True)
class ChainParameters:
    """Model parameters of the uniform antiferromagnetic spin-1/2 chain.

    ``j_over_kb`` is the exchange coupling expressed as a temperature (K),
    positive for antiferromagnetic coupling. ``c0`` is a lumped impurity
    constant and ``c1`` the diamagnetic correction, both in emu/mole.
    ``lattice_c`` is the chain-axis lattice parameter in Angstrom, optional
    because susceptibility work does not need it.
    """

    j_over_kb: float
    g_factor: float
    spin: float = 0.5
    c0: float = 0.0
    c1: float = 0.0
    lattice_c: float | None = None

    def __post_init__(self):
        if not (self.j_over_kb > 0):
            raise ValueError("j_over_kb must be positive (antiferromagnetic)")
        if not (self.g_factor > 0):
            raise ValueError("g_factor must be positive")
        if self.spin != 0.5:
            raise ValueError("only spin 1/2 is supported")
        if self.c1 > 0:
            raise ValueError("c1 is a diamagnetic constant and must be <= 0")
        if self.lattice_c is not None and not (self.lattice_c > 0):
            raise ValueError("lattice_c must be positive when given")


@dataclass(frozen=True)
class SpectrumGrid:
    """2-d intensity map over momentum transfer Q and energy transfer E.

    ``intensity`` and ``errors`` have shape (len(e_axis), len(q_axis)):
    one row per energy. All arrays are read-only after construction.
    """

    q_axis: np.ndarray
    e_axis: np.ndarray
    intensity: np.ndarray
    errors: np.ndarray
    temperature: float

    def __post_init__(self):
        q = _frozen_array(self.q_axis, "q_axis")
        e = _frozen_array(self.e_axis, "e_axis")
        inten = _frozen_array(self.intensity, "intensity")
        err = _frozen_array(self.errors, "errors")
        _require_strictly_increasing(q, "q_axis")
        _require_strictly_increasing(e, "e_axis")
        expected = (e.size, q.size)
        if inten.shape != expected:
            raise ShapeMismatch(
                f"intensity shape {inten.shape} does not match (n_e, n_q) = {expected}"
            )
        if err.shape != expected:
            raise ShapeMismatch(
                f"errors shape {err.shape} does not match (n_e, n_q) = {expected}"
            )
        if np.any(np.isnan(inten)):
            raise ValueError("intensity contains NaN")
        if np.any(err < 0) or np.any(np.isnan(err)):
            raise ValueError("errors must be nonnegative")
        if not (np.isfinite(self.temperature) and self.temperature > 0):
            raise NonPositiveTemperature(
                f"temperature must be positive, got {self.temperature}"
            )
        object.__setattr__(self, "q_axis", q)
        object.__setattr__(self, "e_axis", e)
        object.__setattr__(self, "intensity", inten)
        object.__setattr__(self, "errors", err)
        object.__setattr__(self, "temperature", float(self.temperature))


def make_grid(q_axis, e_axis, intensity, errors, temperature) -> SpectrumGrid:
    """Validating constructor for :class:`SpectrumGrid`."""
    return SpectrumGrid(q_axis, e_axis, intensity, errors, temperature)


@dataclass(frozen=True)
class EnergyCut:
    """1-d intensity versus energy at a fixed temperature."""

    e_axis: np.ndarray
    values: np.ndarray
    errors: np.ndarray
    temperature: float

    def __post_init__(self):
        e = _frozen_array(self.e_axis, "e_axis")
        v = _frozen_array(self.values, "values")
        s = _frozen_array(self.errors, "errors")
        _require_strictly_increasing(e, "e_axis")
        if v.shape != e.shape:
            raise ShapeMismatch("values shape does not match e_axis")
        if s.shape != e.shape:
            raise ShapeMismatch("errors shape does not match e_axis")
        if np.any(np.isnan(v)):
            raise ValueError("values contain NaN")
        if np.any(s < 0) or np.any(np.isnan(s)):
            raise ValueError("errors must be nonnegative")
        if not (np.isfinite(self.temperature) and self.temperature > 0):
            raise NonPositiveTemperature(
                f"temperature must be positive, got {self.temperature}"
            )
        object.__setattr__(self, "e_axis", e)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "errors", s)
        object.__setattr__(self, "temperature", float(self.temperature))
