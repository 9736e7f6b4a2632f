import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from photonmem import (
    ControlField,
    FieldMode,
    GridError,
    MediumParams,
    SpaceGrid,
    SpinWave,
    TimeGrid,
    flip,
    mode_norm2,
    nondimensionalize_doc,
    normalized_mode,
    resample_spinwave,
    spinwave_norm2,
    time_reverse,
)

finite_complex = st.complex_numbers(
    min_magnitude=0.0, max_magnitude=1e6, allow_nan=False, allow_infinity=False
)


def complex_samples(n):
    return arrays(np.complex128, (n,), elements=finite_complex)


class TestMediumParams:
    def test_valid(self):
        p = MediumParams(d=10.0, delta=-3.5)
        assert p.d == 10.0 and p.delta == -3.5

    @pytest.mark.parametrize("d", [0.0, -1.0, np.inf, np.nan])
    def test_bad_depth(self, d):
        with pytest.raises(ValueError):
            MediumParams(d=d)

    def test_bad_detuning(self):
        with pytest.raises(ValueError):
            MediumParams(d=1.0, delta=np.inf)


class TestGrids:
    def test_time_grid(self):
        g = TimeGrid.linspace(0.0, 10.0, 101)
        assert g.n == 101
        assert g.duration == pytest.approx(10.0)
        assert np.allclose(np.diff(g.times), g.dtau)

    def test_time_grid_invalid(self):
        with pytest.raises(GridError):
            TimeGrid(tau0=0.0, dtau=-0.1, n=10)
        with pytest.raises(GridError):
            TimeGrid(tau0=0.0, dtau=0.1, n=1)

    @pytest.mark.parametrize("factory", [SpaceGrid.gauss_legendre, SpaceGrid.uniform_midpoint])
    def test_space_grid_invariants(self, factory):
        g = factory(128)
        assert np.all(np.diff(g.nodes) > 0)
        assert g.nodes[0] >= 0.0 and g.nodes[-1] <= 1.0
        assert np.all(g.weights > 0)
        assert abs(g.weights.sum() - 1.0) < 1e-12
        assert g.is_symmetric

    def test_space_grid_rejects_bad_weights(self):
        with pytest.raises(GridError):
            SpaceGrid(nodes=[0.2, 0.8], weights=[0.7, 0.7])
        with pytest.raises(GridError):
            SpaceGrid(nodes=[0.8, 0.2], weights=[0.5, 0.5])


class TestNorms:
    def test_zero_mode(self):
        g = TimeGrid.linspace(0.0, 1.0, 50)
        assert mode_norm2(FieldMode(grid=g, samples=np.zeros(50))) == 0.0

    def test_reference_input_normalized(self, reference_input):
        assert mode_norm2(reference_input) == pytest.approx(1.0, abs=1e-10)

    def test_spinwave_constant_is_one(self, gauss_grid):
        s = SpinWave(grid=gauss_grid, samples=np.ones(gauss_grid.n))
        assert spinwave_norm2(s) == pytest.approx(1.0, abs=1e-12)
        z = SpinWave(grid=gauss_grid, samples=np.zeros(gauss_grid.n))
        assert spinwave_norm2(z) == 0.0

    def test_optimal_mode_unit_norm(self, optimal_modes):
        s, _ = optimal_modes[10.0]
        assert spinwave_norm2(s) == pytest.approx(1.0, abs=1e-8)

    @given(samples=complex_samples(33), a=st.complex_numbers(max_magnitude=1e3, allow_nan=False, allow_infinity=False))
    def test_mode_norm_quadratic_scaling(self, samples, a):
        g = TimeGrid.linspace(0.0, 2.0, 33)
        base = mode_norm2(FieldMode(grid=g, samples=samples))
        scaled = mode_norm2(FieldMode(grid=g, samples=a * samples))
        assert scaled == pytest.approx(abs(a) ** 2 * base, rel=1e-9, abs=1e-12)

    def test_grid_refinement_convergence(self):
        def make(n):
            g = TimeGrid.linspace(0.0, 10.0, n)
            t = g.times
            return FieldMode(grid=g, samples=np.exp(-((t - 5) ** 2)) * np.exp(1j * t))

        coarse = mode_norm2(make(2001))
        fine = mode_norm2(make(4001))
        assert abs(coarse - fine) < 1e-8


class TestFlip:
    def test_constant_unchanged(self, gauss_grid):
        s = SpinWave(grid=gauss_grid, samples=np.full(gauss_grid.n, 0.7 + 0.1j))
        assert np.allclose(flip(s).samples, s.samples)

    @given(samples=complex_samples(64))
    def test_involution_and_norm(self, samples):
        g = SpaceGrid.uniform_midpoint(64)
        s = SpinWave(grid=g, samples=samples)
        assert np.array_equal(flip(flip(s)).samples, s.samples)
        assert spinwave_norm2(flip(s)) == pytest.approx(spinwave_norm2(s), rel=1e-12, abs=1e-300)

    def test_flip_matches_point_evaluation(self, optimal_modes):
        s, _ = optimal_modes[10.0]
        flipped = flip(s)
        # the flipped samples are the original mode evaluated at 1 - zeta
        assert np.allclose(flipped.samples, s.samples[::-1])

    def test_asymmetric_grid_rejected(self):
        g = SpaceGrid(nodes=[0.1, 0.3, 0.9], weights=[0.3, 0.4, 0.3])
        s = SpinWave(grid=g, samples=np.ones(3))
        with pytest.raises(GridError):
            flip(s)


class TestTimeReverse:
    def test_real_symmetric_fixed_point(self, reference_input):
        rev = time_reverse(reference_input)
        assert np.allclose(rev.samples, reference_input.samples, atol=1e-12)

    @given(samples=complex_samples(40))
    def test_involution_and_norm(self, samples):
        g = TimeGrid.linspace(0.0, 4.0, 40)
        m = FieldMode(grid=g, samples=samples)
        assert np.array_equal(time_reverse(time_reverse(m)).samples, m.samples)
        assert mode_norm2(time_reverse(m)) == pytest.approx(mode_norm2(m), rel=1e-12, abs=1e-300)

    def test_control_field_supported(self):
        g = TimeGrid.linspace(0.0, 1.0, 11)
        c = ControlField(grid=g, samples=np.linspace(0, 1, 11) * (1 + 2j))
        rc = time_reverse(c)
        assert isinstance(rc, ControlField)
        assert np.allclose(rc.samples, np.conj(c.samples[::-1]))

    def test_rejects_other_types(self):
        with pytest.raises(TypeError):
            time_reverse(np.ones(4))


class TestResample:
    def test_gauss_to_uniform_roundtrip(self, gauss_grid, uniform_grid, optimal_modes):
        s, _ = optimal_modes[10.0]
        on_uniform = resample_spinwave(s, uniform_grid)
        back = resample_spinwave(on_uniform, gauss_grid)
        diff = np.abs(back.samples - s.samples)
        # extreme Gauss nodes sit outside the midpoint span, so pointwise
        # error there is spline extrapolation; the weighted norm is what
        # downstream quadratures see
        wl2 = np.sqrt(np.dot(gauss_grid.weights, diff**2))
        assert wl2 < 1e-6
        assert np.max(diff[5:-5]) < 1e-5

    def test_norm_preserved_for_smooth_wave(self, gauss_grid, uniform_grid):
        z = gauss_grid.nodes
        s = SpinWave(grid=gauss_grid, samples=np.sin(np.pi * z) + 0.5)
        s2 = resample_spinwave(s, uniform_grid)
        assert spinwave_norm2(s2) == pytest.approx(spinwave_norm2(s), abs=1e-5)


def test_normalized_mode_rejects_zero():
    g = TimeGrid.linspace(0.0, 1.0, 16)
    with pytest.raises(ValueError):
        normalized_mode(FieldMode(grid=g, samples=np.zeros(16)))


def test_nondimensionalize_doc_states_the_system():
    text = nondimensionalize_doc()
    for fragment in (
        "dE/dzeta = i sqrt(d) P",
        "-(1 + i delta) P",
        "i conj(omega(tau)) P",
        "photon-number fraction",
        "P decays at unit rate",
    ):
        assert fragment in text
