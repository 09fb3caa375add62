"""Transforms, operators, products and norms of the modal representation."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from apes.spectral import (
    Grid,
    HorizontalField,
    ParityError,
    SolvabilityError,
    SpectralField3D,
    curl_h,
    dealias,
    div_h,
    dx,
    dy,
    dz,
    dzz,
    enforce_hermitian,
    forward,
    inner,
    integrate_z_from_bottom,
    inverse,
    l2,
    l2_sq,
    laplacian_h,
    linf_norm,
    lq_norm,
    multiply,
    solve_poisson_2d,
    symmetrize,
    transform,
    vertical_mean,
)


def random_field(grid, parity, rng, slope=2.0):
    c = rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)
    c = c * (1.0 + grid.KX**2 + grid.KY**2 + grid.m[None, None, :] ** 2) ** (-slope / 2)
    c = enforce_hermitian(c)
    if parity == "odd":
        c[:, :, 0] = 0
    return dealias(SpectralField3D(grid, parity, c))


class TestGrid:
    def test_rejects_odd_or_small(self):
        with pytest.raises(ValueError):
            Grid(15, 16, 8)
        with pytest.raises(ValueError):
            Grid(16, 16, 2)
        with pytest.raises(ValueError):
            Grid(16, 16, 8, h=0.0)

    def test_z_grid_spans_column(self, grid):
        z = grid.z
        assert z.size == 2 * grid.nz
        assert z[0] == pytest.approx(-grid.h)
        assert z[grid.nz] == pytest.approx(0.0, abs=1e-15)

    def test_dealias_keeps_two_thirds(self, grid):
        mask = grid.dealias_mask[:, :, 0]
        kept = np.abs(grid.kx)[mask[:, 0] > 0]
        assert kept.max() == (grid.nx - 1) // 3


class TestTransforms:
    @pytest.mark.parametrize("parity", ["even", "odd"])
    def test_roundtrip_on_physical_data(self, grid, rng, parity):
        f = random_field(grid, parity, rng)
        back = forward(inverse(f), grid, parity)
        assert np.max(np.abs(back.coeffs - f.coeffs)) < 1e-13

    def test_known_mode_values(self, grid):
        X, Y, Z = grid.mesh()
        vals = np.cos(2 * np.pi * X) * np.cos(np.pi * Z / grid.h)
        f = forward(vals, grid, "even")
        # cos(2 pi x) splits evenly between kx = +1 and kx = -1
        assert f.coeffs[1, 0, 1] == pytest.approx(0.5)
        assert f.coeffs[-1, 0, 1] == pytest.approx(0.5)
        assert np.sum(np.abs(f.coeffs)) == pytest.approx(1.0)

    def test_parity_violation_raises(self, grid):
        X, Y, Z = grid.mesh()
        with pytest.raises(ParityError):
            forward(np.sin(np.pi * Z / grid.h), grid, "even")
        with pytest.raises(ParityError):
            forward(np.cos(np.pi * Z / grid.h) + 1.0, grid, "odd")

    def test_wrong_shape_raises(self, grid):
        with pytest.raises(ValueError):
            forward(np.zeros((4, 4, 4)), grid, "even")

    def test_transform_dispatch(self, grid, rng):
        f = random_field(grid, "odd", rng)
        vals = transform(f, "inverse")
        g = transform(vals, "forward", grid=grid, parity="odd")
        assert np.allclose(g.coeffs, f.coeffs, atol=1e-13)
        with pytest.raises(ValueError):
            transform(vals, "sideways")

    def test_symmetrize_projects(self, grid, rng):
        vals = rng.standard_normal((grid.nx, grid.ny, 2 * grid.nz))
        even = symmetrize(vals, "even")
        odd = symmetrize(vals, "odd")
        assert np.allclose(even + odd, vals)
        forward(even, grid, "even")
        forward(odd, grid, "odd")

    @settings(max_examples=20, deadline=None)
    @given(seed=st.integers(0, 2**31 - 1), a=st.floats(-3, 3), b=st.floats(-3, 3))
    def test_linearity(self, seed, a, b):
        grid = Grid(8, 8, 4)
        rng = np.random.default_rng(seed)
        f, g = random_field(grid, "even", rng), random_field(grid, "even", rng)
        lhs = inverse(f * a + g * b)
        rhs = a * inverse(f) + b * inverse(g)
        assert np.max(np.abs(lhs - rhs)) < 1e-12 * (1 + abs(a) + abs(b))


class TestOperators:
    def test_derivatives_of_known_function(self, grid):
        X, Y, Z = grid.mesh()
        k = np.pi / grid.h
        f = forward(np.sin(2 * np.pi * X) * np.cos(4 * np.pi * Y) * np.cos(k * Z), grid, "even")
        expect_x = 2 * np.pi * np.cos(2 * np.pi * X) * np.cos(4 * np.pi * Y) * np.cos(k * Z)
        expect_y = -4 * np.pi * np.sin(2 * np.pi * X) * np.sin(4 * np.pi * Y) * np.cos(k * Z)
        expect_z = -k * np.sin(2 * np.pi * X) * np.cos(4 * np.pi * Y) * np.sin(k * Z)
        assert np.allclose(inverse(dx(f)), expect_x, atol=1e-12)
        assert np.allclose(inverse(dy(f)), expect_y, atol=1e-12)
        dzf = dz(f)
        assert dzf.parity == "odd"
        assert np.allclose(inverse(dzf), expect_z, atol=1e-12)
        assert np.allclose(inverse(dzz(f)), -k**2 * inverse(f), atol=1e-11)
        lap = -(4 * np.pi**2) * (1 + 4) * inverse(f)
        assert np.allclose(inverse(laplacian_h(f)), lap, atol=1e-10)

    def test_div_of_curl_free_and_curl_of_gradient(self, grid, rng):
        phi = random_field(grid, "even", rng)
        assert l2(curl_h(dx(phi), dy(phi))) < 1e-12
        assert l2(div_h(dy(phi), -dx(phi))) < 1e-12

    def test_integrate_from_bottom(self, grid):
        X, Y, Z = grid.mesh()
        k = np.pi / grid.h
        f = forward(np.cos(2 * np.pi * X) * np.sin(k * Z), grid, "odd")
        g = integrate_z_from_bottom(f)
        expect = np.cos(2 * np.pi * X) * (-(np.cos(k * Z) - np.cos(k * grid.h)) / k)
        assert g.parity == "even"
        assert np.allclose(inverse(g), expect, atol=1e-12)
        assert np.allclose(dz(g).coeffs, f.coeffs, atol=1e-13)

    def test_integrate_even_with_mean_raises(self, grid):
        f = SpectralField3D.zeros(grid, "even")
        f.coeffs[1, 0, 0] = 1.0
        with pytest.raises(ValueError):
            integrate_z_from_bottom(f)

    def test_poisson(self, grid, rng):
        u = random_field(grid, "even", rng)
        u.coeffs[0, 0, :] = 0
        rhs = laplacian_h(u) * -1.0
        sol = solve_poisson_2d(rhs)
        assert np.allclose(sol.coeffs, u.coeffs, atol=1e-13)
        hf = HorizontalField(grid, np.zeros((grid.nx, grid.ny), complex))
        hf.coeffs[0, 0] = 1.0
        with pytest.raises(SolvabilityError):
            solve_poisson_2d(hf)

    def test_vertical_mean(self, grid):
        X, Y, Z = grid.mesh()
        f = forward(2.0 + np.cos(np.pi * Z / grid.h) + np.cos(2 * np.pi * X), grid, "even")
        vm = vertical_mean(f).values()
        assert np.allclose(vm, 2.0 + np.cos(2 * np.pi * X[:, :, 0]), atol=1e-13)


class TestProducts:
    def test_product_matches_pointwise_for_low_modes(self, grid):
        X, Y, Z = grid.mesh()
        k = np.pi / grid.h
        a = forward(np.sin(2 * np.pi * X) * np.cos(k * Z), grid, "even")
        b = forward(np.cos(2 * np.pi * Y) * np.sin(2 * k * Z), grid, "odd")
        p = multiply(a, b)
        expect = np.sin(2 * np.pi * X) * np.cos(2 * np.pi * Y) * np.cos(k * Z) * np.sin(2 * k * Z)
        assert p.parity == "odd"
        assert np.allclose(inverse(p), expect, atol=1e-13)

    def test_product_is_exact_projection(self, rng):
        """Against a brute-force evaluation on a 4x finer grid."""
        grid = Grid(8, 8, 4)
        fine = Grid(32, 32, 16)
        a = random_field(grid, "even", rng)
        b = random_field(grid, "odd", rng)

        def lift(f):
            c = np.zeros(fine.shape, complex)
            ix = np.r_[0:4, -4:0]
            c[np.ix_(ix % fine.nx, ix % fine.ny, np.arange(grid.nz))] = f.coeffs
            return SpectralField3D(fine, f.parity, c)

        ref = forward(inverse(lift(a)) * inverse(lift(b)), fine, "odd")
        ix = np.r_[0:4, -4:0]
        ref_c = ref.coeffs[np.ix_(ix % fine.nx, ix % fine.ny, np.arange(grid.nz))]
        got = multiply(a, b)
        assert np.max(np.abs(got.coeffs - ref_c * grid.dealias_mask)) < 1e-14

    def test_operator_dispatch(self, grid, rng):
        a = random_field(grid, "even", rng)
        assert np.allclose((a * a).coeffs, multiply(a, a).coeffs)
        with pytest.raises(ValueError):
            multiply(a)


class TestNorms:
    @pytest.mark.parametrize("parity", ["even", "odd"])
    def test_parseval_matches_grid_quadrature(self, grid, rng, parity):
        f = random_field(grid, parity, rng)
        vals = inverse(f)
        # trapezoid on the periodic full grid is exact for these polynomials
        quad = np.mean(vals**2) * 2 * grid.h
        assert l2_sq(f) == pytest.approx(quad, rel=1e-12)

    def test_inner_opposite_parity_zero(self, grid, rng):
        assert inner(random_field(grid, "even", rng), random_field(grid, "odd", rng)) == 0.0

    def test_lq_norm_of_constant(self, grid):
        f = SpectralField3D.zeros(grid, "even")
        f.coeffs[0, 0, 0] = 3.0
        vol = 2 * grid.h
        assert lq_norm(f, q=4) == pytest.approx(3.0 * vol**0.25)
        assert linf_norm(f) == pytest.approx(3.0)

    def test_lq_monotone_in_q_after_normalising(self, grid, rng):
        f = random_field(grid, "even", rng)
        vol = 2 * grid.h
        vals = [lq_norm(f, q=q) / vol ** (1 / q) for q in (2, 4, 8, 16)]
        assert all(a <= b * (1 + 1e-12) for a, b in zip(vals, vals[1:]))
        assert vals[-1] <= linf_norm(f) * (1 + 1e-12)
