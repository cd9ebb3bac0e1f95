import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from whinit.serialize import (
    realization_from_document,
    realization_to_document,
    spec_from_document,
    spec_to_document,
)
from whinit.signals import (
    FrequencyGrid,
    PeakAbs,
    Rms,
    SignalKind,
    design_multisine,
    realize,
    shift_time_origin,
)


class TestDesign:
    def test_reference_odd_coupled_design(self):
        # 8192-sample odd coupled design with d=10, c_shift=24: 224 lines
        # from ~47.7 Hz to ~12941 Hz
        grid = FrequencyGrid(8192, 78125.0)
        spec = design_multisine(SignalKind.ODD_COUPLED, grid, d=10, c_shift=24, i_max=111)
        assert spec.coupling.s == 242
        assert spec.coupling.i_max == 111
        assert len(spec.excited_lines) == 224
        m = spec.m_lines
        assert m[0] == 5
        assert 47.0 < grid.freq_hz(m[0]) < 48.0
        top = m[-1] + spec.coupling.s
        assert top == 1357
        assert 12941.0 < grid.freq_hz(top) < 12942.0

    def test_default_i_max_keeps_cubic_products_on_grid(self):
        grid = FrequencyGrid(8192, 78125.0)
        spec = design_multisine(SignalKind.ODD_COUPLED, grid, d=10, c_shift=24)
        assert spec.coupling.i_max == 111
        assert 3 * max(spec.excited_lines) <= grid.nyquist_line

    def test_full_coupled_pattern_and_free_collection_lines(self):
        spec = design_multisine(
            SignalKind.FULL_COUPLED, FrequencyGrid(64), d=4, c_shift=1, i_max=2
        )
        assert spec.coupling.s == 5
        assert set(spec.excited_lines) == {2, 7, 6, 11, 10, 15}
        # exhaustive check: no excitation at any m - s or m + 2s
        m = spec.m_lines
        assert set(m - spec.coupling.s) == {-3, 1, 5}
        assert set(m + 2 * spec.coupling.s) == {12, 16, 20}
        assert not (set(spec.excited_lines) & set((m - spec.coupling.s).tolist()))
        assert not (set(spec.excited_lines) & set((m + 2 * spec.coupling.s).tolist()))

    def test_random_phase_explicit_line_set(self):
        grid = FrequencyGrid(8192, 78125.0)
        lines = np.unique(np.round(np.linspace(2, 1447, 682)).astype(int))
        spec = design_multisine(SignalKind.RANDOM_PHASE, grid, lines=lines)
        assert len(spec.excited_lines) == 682
        assert spec.excited_lines[0] == 2
        assert spec.excited_lines[-1] == 1447

    def test_random_phase_band(self):
        grid = FrequencyGrid(64, 64.0)  # 1 Hz per line
        spec = design_multisine(SignalKind.RANDOM_PHASE, grid, band=(3.0, 9.0))
        assert spec.excited_lines == tuple(range(3, 10))

    def test_rejects_bad_coupling(self):
        grid = FrequencyGrid(512)
        with pytest.raises(ValueError, match="d/2 odd"):
            design_multisine(SignalKind.ODD_COUPLED, grid, d=8, c_shift=2)
        with pytest.raises(ValueError, match="d >= 4"):
            design_multisine(SignalKind.FULL_COUPLED, grid, d=2, c_shift=2)
        with pytest.raises(ValueError, match="even"):
            design_multisine(SignalKind.FULL_COUPLED, grid, d=5, c_shift=2)

    def test_rejects_designs_off_grid(self):
        # s so large that no couple leaves room for m + 3s
        with pytest.raises(ValueError, match="no phase couple fits"):
            design_multisine(SignalKind.ODD_COUPLED, FrequencyGrid(256), d=10, c_shift=10)
        with pytest.raises(ValueError, match="does not fit"):
            design_multisine(
                SignalKind.ODD_COUPLED, FrequencyGrid(512), d=10, c_shift=4, i_max=100
            )

    def test_rejects_empty_band(self):
        grid = FrequencyGrid(64, 64.0)
        with pytest.raises(ValueError, match="no grid lines"):
            design_multisine(SignalKind.RANDOM_PHASE, grid, band=(30.2, 30.8))

    def test_spec_document_round_trip(self, toy_coupled_spec):
        doc = spec_to_document(toy_coupled_spec)
        back = spec_from_document(doc)
        assert back == toy_coupled_spec


class TestRealize:
    def test_single_line_is_a_cosine(self):
        grid = FrequencyGrid(128)
        spec = design_multisine(SignalKind.RANDOM_PHASE, grid, lines=[5], amplitude_profile=0.7)
        real = realize(spec, seed=3)
        phi = real.phases[5]
        t = np.arange(128)
        expected = 2 * 0.7 * np.cos(2 * np.pi * 5 * t / 128 + phi)
        np.testing.assert_allclose(real.time_series, expected, atol=1e-12)

    def test_couple_phases_equal_exactly(self, toy_coupled_spec):
        real = realize(toy_coupled_spec, seed=11)
        s = toy_coupled_spec.coupling.s
        for m in toy_coupled_spec.m_lines:
            assert real.phases[int(m)] == real.phases[int(m) + s]
        # and on the synthesized spectrum itself
        n = toy_coupled_spec.grid.n_samples
        spec_u = np.fft.fft(real.period) / np.sqrt(n)
        for m in toy_coupled_spec.m_lines:
            dphi = np.angle(spec_u[m + s]) - np.angle(spec_u[m])
            assert abs((dphi + np.pi) % (2 * np.pi) - np.pi) < 1e-10

    def test_energy_only_at_excited_lines(self, toy_coupled_spec):
        real = realize(toy_coupled_spec, seed=4)
        n = toy_coupled_spec.grid.n_samples
        spec_u = np.abs(np.fft.fft(real.period))
        mask = np.zeros(n, dtype=bool)
        lines = np.asarray(toy_coupled_spec.excited_lines)
        mask[lines] = True
        mask[(-lines) % n] = True
        assert np.max(spec_u[~mask]) < 1e-10 * np.max(spec_u)

    def test_peak_scaling(self):
        grid = FrequencyGrid(8192, 78125.0)
        spec = design_multisine(SignalKind.ODD_COUPLED, grid, d=10, c_shift=24, i_max=111)
        real = realize(spec, seed=7, scaling=PeakAbs(2.0))
        assert abs(np.max(np.abs(real.time_series)) - 2.0) < 1e-12

    def test_rms_scaling_gain_is_phase_independent(self, toy_coupled_spec):
        r1 = realize(toy_coupled_spec, seed=1, scaling=Rms(0.38))
        r2 = realize(toy_coupled_spec, seed=2, scaling=Rms(0.38))
        assert abs(np.sqrt(np.mean(r1.time_series**2)) - 0.38) < 1e-12
        assert abs(r1.amplitude_scale - r2.amplitude_scale) < 1e-12

    def test_determinism_and_seed_sensitivity(self, toy_coupled_spec):
        a = realize(toy_coupled_spec, seed=42, n_periods=2)
        b = realize(toy_coupled_spec, seed=42, n_periods=2)
        c = realize(toy_coupled_spec, seed=43, n_periods=2)
        np.testing.assert_array_equal(a.time_series, b.time_series)
        assert not np.array_equal(a.time_series, c.time_series)

    def test_periodicity(self, toy_coupled_spec):
        real = realize(toy_coupled_spec, seed=9, n_periods=3)
        n = toy_coupled_spec.grid.n_samples
        periods = real.time_series.reshape(3, n)
        np.testing.assert_array_equal(periods[0], periods[1])
        np.testing.assert_array_equal(periods[0], periods[2])

    def test_phase_population_mean(self):
        # empirical mean of e^{j phi} over >= 1e4 draws is close to zero
        grid = FrequencyGrid(4096)
        spec = design_multisine(SignalKind.RANDOM_PHASE, grid, lines=np.arange(1, 1401))
        draws = []
        for seed in range(8):
            real = realize(spec, seed=seed)
            draws.extend(real.phases.values())
        draws = np.asarray(draws)
        assert draws.size >= 10**4
        assert np.abs(np.mean(np.exp(1j * draws))) < 0.05

    def test_realization_document_round_trip(self, toy_coupled_spec):
        real = realize(toy_coupled_spec, seed=5, n_periods=2, scaling=Rms(1.0))
        doc = realization_to_document(real, scaling=Rms(1.0))
        back = realization_from_document(doc)
        np.testing.assert_array_equal(back.time_series, real.time_series)


class TestShiftTimeOrigin:
    def test_zero_shift_is_identity(self):
        rng = np.random.default_rng(0)
        x = rng.standard_normal(256)
        np.testing.assert_allclose(shift_time_origin(x, 0.0), x, atol=1e-14)

    def test_full_period_shift(self):
        rng = np.random.default_rng(1)
        x = rng.standard_normal(256)
        np.testing.assert_allclose(shift_time_origin(x, 256.0), x, atol=1e-10)

    def test_fractional_delay_of_cosine(self):
        n = 128
        t = np.arange(n)
        x = np.cos(2 * np.pi * t / n)
        shifted = shift_time_origin(x, 3.5)
        np.testing.assert_allclose(shifted, np.cos(2 * np.pi * (t - 3.5) / n), atol=1e-10)

    def test_integer_shift_equals_roll(self):
        rng = np.random.default_rng(2)
        x = rng.standard_normal(64)
        np.testing.assert_allclose(shift_time_origin(x, 5), np.roll(x, 5), atol=1e-10)

    @settings(deadline=None, max_examples=25)
    @given(
        delta=st.floats(min_value=-40.0, max_value=40.0, allow_nan=False),
        seed=st.integers(min_value=0, max_value=2**31),
    )
    def test_round_trip_band_limited(self, delta, seed):
        # Nyquist-free content so fractional delays are invertible
        rng = np.random.default_rng(seed)
        n = 128
        spec = np.zeros(n // 2 + 1, dtype=complex)
        spec[1 : n // 4] = rng.standard_normal(n // 4 - 1) + 1j * rng.standard_normal(n // 4 - 1)
        x = np.fft.irfft(spec, n=n)
        back = shift_time_origin(shift_time_origin(x, delta), -delta)
        np.testing.assert_allclose(back, x, atol=1e-10)
