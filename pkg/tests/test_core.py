import dataclasses

import numpy as np
import pytest
from hypothesis import given, strategies as st

from chainqfi.core import (
    DEFAULT_UNITS,
    ChainParameters,
    EnergyCut,
    kelvin_to_mev,
    make_grid,
    mev_to_kelvin,
)
from chainqfi.errors import AxisNotMonotone, NonPositiveTemperature, ShapeMismatch


class TestConversions:
    def test_zero(self):
        assert kelvin_to_mev(0.0) == 0.0

    def test_one_kelvin_is_the_constant(self):
        assert kelvin_to_mev(1.0) == DEFAULT_UNITS.boltzmann_mev_per_kelvin == 0.08617333

    def test_exchange_scale(self):
        # 3.1 * 0.08617333, hand multiplication
        assert kelvin_to_mev(3.1) == pytest.approx(0.267137323, rel=1e-12)
        assert kelvin_to_mev(3.1) == pytest.approx(0.26714, abs=1e-5)

    @given(st.floats(min_value=1e-6, max_value=1e6))
    def test_round_trip_identity(self, t):
        assert mev_to_kelvin(kelvin_to_mev(t)) == pytest.approx(t, rel=1e-12)

    def test_vectorized(self):
        t = np.array([1.0, 2.0, 4.0])
        np.testing.assert_allclose(mev_to_kelvin(kelvin_to_mev(t)), t, rtol=1e-15)

    def test_nonfinite_rejected(self):
        with pytest.raises(ValueError):
            kelvin_to_mev(float("nan"))

    def test_units_are_immutable(self):
        with pytest.raises(dataclasses.FrozenInstanceError):
            DEFAULT_UNITS.avogadro = 1.0

    def test_boltzmann_cgs_consistency(self):
        # k_B in erg/K derived from the meV value must match CODATA
        assert DEFAULT_UNITS.boltzmann_erg_per_kelvin == pytest.approx(1.380649e-16, rel=1e-6)


class TestChainParameters:
    def test_accepts_reference_values(self):
        p = ChainParameters(j_over_kb=3.1, g_factor=2.1, c0=2e-5, c1=-16.7e-5)
        assert p.spin == 0.5

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"j_over_kb": -1.0, "g_factor": 2.0},
            {"j_over_kb": 3.1, "g_factor": 0.0},
            {"j_over_kb": 3.1, "g_factor": 2.0, "spin": 1.0},
            {"j_over_kb": 3.1, "g_factor": 2.0, "c1": 1e-5},
            {"j_over_kb": 3.1, "g_factor": 2.0, "lattice_c": -2.0},
        ],
    )
    def test_invariants_enforced(self, kwargs):
        with pytest.raises(ValueError):
            ChainParameters(**kwargs)


class TestSpectrumGrid:
    def test_valid_2x2(self):
        g = make_grid([0.4, 0.6], [0.1, 0.2], [[1.0, 2.0], [3.0, 4.0]],
                      [[0.1, 0.1], [0.1, 0.1]], 1.5)
        assert g.intensity.shape == (2, 2)
        assert g.temperature == 1.5

    def test_degenerate_axis(self):
        with pytest.raises(AxisNotMonotone):
            make_grid([0.5, 0.5], [0.1, 0.2], np.ones((2, 2)), np.zeros((2, 2)), 1.0)

    def test_decreasing_axis(self):
        with pytest.raises(AxisNotMonotone):
            make_grid([0.6, 0.4], [0.1, 0.2], np.ones((2, 2)), np.zeros((2, 2)), 1.0)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatch):
            make_grid([0.4, 0.6], [0.1, 0.2], np.ones((2, 3)), np.zeros((2, 3)), 1.0)

    def test_nonpositive_temperature(self):
        with pytest.raises(NonPositiveTemperature):
            make_grid([0.4, 0.6], [0.1, 0.2], np.ones((2, 2)), np.zeros((2, 2)), 0.0)

    def test_nan_intensity_rejected(self):
        bad = np.ones((2, 2))
        bad[0, 0] = np.nan
        with pytest.raises(ValueError):
            make_grid([0.4, 0.6], [0.1, 0.2], bad, np.zeros((2, 2)), 1.0)

    def test_negative_errors_rejected(self):
        with pytest.raises(ValueError):
            make_grid([0.4, 0.6], [0.1, 0.2], np.ones((2, 2)), -np.ones((2, 2)), 1.0)

    def test_arrays_read_only(self):
        g = make_grid([0.4, 0.6], [0.1, 0.2], np.ones((2, 2)), np.zeros((2, 2)), 1.0)
        with pytest.raises(ValueError):
            g.intensity[0, 0] = 5.0


class TestEnergyCut:
    def test_valid(self):
        c = EnergyCut([0.1, 0.2, 0.3], [1.0, 2.0, 3.0], [0.1, 0.1, 0.1], 0.5)
        assert len(c.e_axis) == 3

    def test_axis_must_increase(self):
        with pytest.raises(AxisNotMonotone):
            EnergyCut([0.3, 0.2], [1.0, 2.0], [0.0, 0.0], 0.5)

    def test_negative_errors_rejected(self):
        with pytest.raises(ValueError):
            EnergyCut([0.1, 0.2], [1.0, 2.0], [-0.1, 0.0], 0.5)
