import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from thcs.spectral import (
    LAMBDA1,
    GridMismatchError,
    HermitianSymmetryError,
    PhysicalField,
    SpectralField,
    WaveGrid,
    forward_transform,
    fractional_operator_norm,
    h1_norm,
    h2_norm,
    inverse_laplacian,
    inverse_transform,
    jacobian,
    laplacian,
    lp_norm,
    partial_derivative,
    random_field,
    sobolev_norm,
)

PI = np.pi
G32 = WaveGrid(32)
G64 = WaveGrid(64)


def phys(grid, fn):
    return forward_transform(PhysicalField.from_function(grid, fn))


def sinsin(grid):
    return phys(grid, lambda x, z: np.sin(2 * PI * x) * np.sin(2 * PI * z))


def rand_field(seed, grid=G32, band=None):
    rng = np.random.default_rng(seed)
    return random_field(grid, rng, band=band, slope=rng.uniform(0, 3))


seeds = st.integers(min_value=0, max_value=2**32 - 1)


class TestWaveGrid:
    @pytest.mark.parametrize("n", [8, 14, 48, 15])
    def test_rejects_bad_resolution(self, n):
        with pytest.raises(ValueError):
            WaveGrid(n)

    def test_mask_is_two_thirds_rule(self):
        g = WaveGrid(64)
        assert g.dealias_cutoff == 21
        kinf = np.maximum(abs(g.kx), abs(g.kz))
        expected = (kinf <= 21) & (kinf > 0)
        np.testing.assert_array_equal(g.mask, expected)

    def test_smallest_retained_eigenvalue_is_lambda1(self):
        g = WaveGrid(16)
        assert np.min(-g.laplacian_symbol[g.mask]) == pytest.approx(LAMBDA1, rel=1e-15)


class TestTransforms:
    def test_sine_has_two_half_amplitude_modes(self):
        s = phys(G32, lambda x, z: np.sin(2 * PI * x))
        nz = np.argwhere(np.abs(s.coefficients) > 1e-14)
        got = {(int(G32.kx[i, j]), int(G32.kz[i, j])) for i, j in nz}
        assert got == {(1, 0), (-1, 0)}
        np.testing.assert_allclose(np.abs(s.coefficients[np.abs(s.coefficients) > 1e-14]), 0.5)

    def test_constant_projects_to_zero(self):
        s = phys(G32, lambda x, z: np.ones_like(x))
        assert np.all(s.coefficients == 0)

    def test_inverse_of_single_mode_is_sine(self):
        c = np.zeros((32, 32), complex)
        c[0, 1] = 1 / 2j
        c[0, -1] = -1 / 2j
        v = inverse_transform(SpectralField(G32, c)).values
        x, _ = G32.coordinates
        np.testing.assert_allclose(v, np.sin(2 * PI * x), atol=1e-12)

    def test_zero_field(self):
        assert np.all(inverse_transform(SpectralField.zeros(G32)).values == 0)

    def test_symmetry_violation_raises(self):
        c = np.zeros((32, 32), complex)
        c[0, 1] = 1.0
        with pytest.raises(HermitianSymmetryError):
            inverse_transform(SpectralField(G32, c))

    @given(seeds)
    @settings(max_examples=100, deadline=None)
    def test_round_trip(self, seed):
        s = rand_field(seed)
        p = inverse_transform(s)
        back = forward_transform(p)
        scale = np.max(np.abs(s.coefficients))
        assert np.max(np.abs(back.coefficients - s.coefficients)) <= 1e-12 * scale
        p2 = inverse_transform(back)
        assert np.max(np.abs(p2.values - p.values)) <= 1e-12 * np.max(np.abs(p.values))

    def test_round_trip_from_physical_side(self):
        s = rand_field(3)
        p = inverse_transform(s)
        again = inverse_transform(forward_transform(p))
        np.testing.assert_allclose(again.values, p.values, rtol=0, atol=1e-12 * np.max(abs(p.values)))

    def test_mask_and_zero_mean_enforced(self):
        c = np.ones((32, 32), complex)
        s = SpectralField(G32, c)
        assert s.coefficients[0, 0] == 0
        assert np.all(s.coefficients[~G32.mask] == 0)

    def test_fields_are_immutable(self):
        s = sinsin(G32)
        with pytest.raises(ValueError):
            s.coefficients[1, 1] = 3.0


class TestCalculus:
    def test_dx_sine(self):
        d = partial_derivative(phys(G32, lambda x, z: np.sin(2 * PI * x)), "x", 1)
        expected = phys(G32, lambda x, z: 2 * PI * np.cos(2 * PI * x))
        assert d.allclose(expected, atol=1e-12)

    def test_dz_of_x_only_field_vanishes(self):
        d = partial_derivative(phys(G32, lambda x, z: np.cos(4 * PI * x)), "z", 1)
        assert np.max(np.abs(d.coefficients)) < 1e-14

    def test_twice_equals_order_two(self):
        s = rand_field(1)
        a = partial_derivative(partial_derivative(s, "x"), "x")
        b = partial_derivative(s, "x", 2)
        assert a.allclose(b, atol=1e-10 * np.max(np.abs(b.coefficients)))

    def test_bad_axis(self):
        with pytest.raises(ValueError):
            partial_derivative(sinsin(G32), "y")

    def test_laplacian_eigenfunction(self):
        u = sinsin(G32)
        assert laplacian(u).allclose(u * (-8 * PI**2), atol=1e-12)

    def test_inverse_laplacian_of_sine(self):
        u = phys(G32, lambda x, z: np.sin(2 * PI * x))
        assert inverse_laplacian(u).allclose(u * (-1 / (4 * PI**2)), atol=1e-15)

    @given(seeds)
    @settings(max_examples=30, deadline=None)
    def test_inverse_laplacian_round_trip(self, seed):
        u = rand_field(seed)
        back = inverse_laplacian(laplacian(u))
        assert np.max(np.abs(back.coefficients - u.coefficients)) <= 1e-12 * np.max(np.abs(u.coefficients))
        assert back.coefficients[0, 0] == 0


class TestJacobian:
    def test_self_jacobian_vanishes(self):
        u = rand_field(5)
        assert np.max(np.abs(jacobian(u, u).coefficients)) < 1e-12

    def test_analytic_value(self):
        a = phys(G32, lambda x, z: np.sin(2 * PI * x))
        b = phys(G32, lambda x, z: np.sin(2 * PI * z))
        expected = phys(G32, lambda x, z: 4 * PI**2 * np.cos(2 * PI * x) * np.cos(2 * PI * z))
        assert jacobian(a, b).allclose(expected, atol=1e-12)

    def test_grid_mismatch(self):
        with pytest.raises(GridMismatchError):
            jacobian(sinsin(G32), sinsin(G64))

    @given(seeds)
    @settings(max_examples=100, deadline=None)
    def test_integral_identities(self, seed):
        f, g, h = (rand_field(seed + i) for i in range(3))
        fg = jacobian(f, g)
        hf, hg, hh = h1_norm(f), h1_norm(g), h1_norm(h)
        assert abs(fg.inner(g)) <= 1e-12 * hf * hg**2
        anti = fg.inner(h) + jacobian(f, h).inner(g)
        assert abs(anti) <= 1e-11 * hf * (hg + hh) ** 2


class TestNorms:
    def test_sinsin_sobolev(self):
        u = sinsin(G32)
        assert sobolev_norm(u, 0) == pytest.approx(0.5, rel=1e-13)
        assert sobolev_norm(u, 1) == pytest.approx(PI * np.sqrt(2), rel=1e-13)
        assert sobolev_norm(u, 2) == pytest.approx(4 * PI**2, rel=1e-13)

    def test_zero_field_norms(self):
        z = SpectralField.zeros(G32)
        for r in (0, 0.5, 1, 2, 3):
            assert sobolev_norm(z, r) == 0
        assert lp_norm(z, 4) == 0
        assert lp_norm(z, 2) == 0

    def test_negative_order(self):
        with pytest.raises(ValueError):
            sobolev_norm(sinsin(G32), -1)

    def test_l4_of_sinsin(self):
        assert lp_norm(sinsin(G32), 4) == pytest.approx((9 / 64) ** 0.25, rel=1e-13)

    def test_l4_exact_for_band_limited_fields(self):
        u = rand_field(11, G32)
        x = np.arange(256) / 256
        X, Z = np.meshgrid(x, x, indexing="xy")
        # direct trigonometric synthesis on a fine grid as an independent quadrature
        vals = np.zeros_like(X)
        for (i, j) in np.argwhere(G32.mask):
            c = u.coefficients[i, j]
            vals += (c * np.exp(2j * PI * (G32.kx[i, j] * X + G32.kz[i, j] * Z))).real
        assert lp_norm(u, 4) == pytest.approx(np.mean(vals**4) ** 0.25, rel=1e-10)

    def test_unsupported_p(self):
        with pytest.raises(ValueError):
            lp_norm(sinsin(G32), 3)

    @given(seeds)
    @settings(max_examples=50, deadline=None)
    def test_parseval(self, seed):
        u = rand_field(seed)
        assert abs(lp_norm(u, 2) - sobolev_norm(u, 0)) <= 1e-10 * sobolev_norm(u, 0)

    @given(seeds)
    @settings(max_examples=100, deadline=None)
    def test_poincare(self, seed):
        u = rand_field(seed)
        assert sobolev_norm(u, 0) <= sobolev_norm(u, 1) / np.sqrt(LAMBDA1) * (1 + 1e-14)

    @given(seeds)
    @settings(max_examples=100, deadline=None)
    def test_h2_bound(self, seed):
        u = rand_field(seed)
        a1 = np.sqrt(1 + LAMBDA1 + LAMBDA1**2)
        assert h2_norm(u) <= a1 * sobolev_norm(u, 2)

    @given(seeds)
    @settings(max_examples=100, deadline=None)
    def test_l4_bound(self, seed):
        u = rand_field(seed)
        a2 = (1 / (4 * PI**2) + np.sqrt(2) / PI + 2) ** 0.25
        assert lp_norm(u, 4) <= a2 * np.sqrt(sobolev_norm(u, 0) * sobolev_norm(u, 1))

    def test_fractional_norms(self):
        u = sinsin(G32)
        assert fractional_operator_norm(u, 0, 3.0) == pytest.approx(sobolev_norm(u, 0), rel=1e-14)
        assert fractional_operator_norm(u, 0.5, 1.0) == pytest.approx(PI * np.sqrt(2), rel=1e-13)
        s = phys(G32, lambda x, z: np.sin(2 * PI * x))
        assert fractional_operator_norm(s, 1.0, 2.0) == pytest.approx(2 * 4 * PI**2 / np.sqrt(2), rel=1e-13)
        assert fractional_operator_norm(s, 1.0, 2.0) == pytest.approx(55.83, abs=0.01)

    @pytest.mark.parametrize("gamma", [-0.1, 1.6])
    def test_fractional_range(self, gamma):
        with pytest.raises(ValueError):
            fractional_operator_norm(sinsin(G32), gamma, 1.0)

    @given(seeds, st.floats(0.01, 10.0))
    @settings(max_examples=30, deadline=None)
    def test_half_power_is_scaled_gradient(self, seed, nu):
        u = rand_field(seed)
        assert fractional_operator_norm(u, 0.5, nu) == pytest.approx(np.sqrt(nu) * sobolev_norm(u, 1), rel=1e-12)
