import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hcma.grid import (DegenerateLatticeError, DimensionTooSmallError,
                       ScalarField, interpolate, make_grid, wirtinger_jet)


def field_from(grid, fn):
    return ScalarField.from_function(grid, fn)


class TestMakeGrid:
    def test_small_grid_counts(self):
        g = make_grid(3, 4, 4, 1j)
        assert g.n_nodes == 48
        assert g.ht == 0.5

    def test_mid_grid_counts(self):
        g = make_grid(17, 32, 32, 1j)
        assert g.n_nodes == 17408

    def test_too_small(self):
        with pytest.raises(DimensionTooSmallError):
            make_grid(2, 4, 4, 1j)
        with pytest.raises(DimensionTooSmallError):
            make_grid(3, 3, 4, 1j)

    def test_degenerate_lattice(self):
        with pytest.raises(DegenerateLatticeError):
            make_grid(3, 4, 4, 2.0 + 0j)

    def test_square_lattice_wirtinger_coefficients(self):
        c1, c2 = make_grid(3, 4, 4, 1j).lattice.dz_coefficients
        # d/dz = (d/dx - i d/dy)/2 on the square lattice
        assert c1 == pytest.approx(0.5)
        assert c2 == pytest.approx(-0.5j)


class TestWirtingerJet:
    def test_constant_field(self):
        g = make_grid(5, 8, 8)
        jet = wirtinger_jet(field_from(g, lambda t, x, y: 0 * t + 5.0), (2, 3, 3))
        for name in ("d_t", "d_tt", "d_z", "a", "b", "d_tz", "d_tzb"):
            assert np.allclose(getattr(jet, name), 0.0)

    def test_quadratic_radial(self):
        # x^2 + y^2 away from the periodic seam: a = 1, b = 0
        g = make_grid(5, 16, 16)
        fld = field_from(g, lambda t, x, y: x**2 + y**2 + 0 * t)
        jet = wirtinger_jet(fld, (2, 8, 8))
        assert jet.a == pytest.approx(1.0)
        assert jet.b == pytest.approx(0.0, abs=1e-12)

    def test_quadratic_mixed(self):
        g = make_grid(5, 16, 16)
        fld = field_from(g, lambda t, x, y: x * y + 0 * t)
        jet = wirtinger_jet(fld, (2, 8, 8))
        assert jet.a == pytest.approx(0.0, abs=1e-12)
        assert jet.b == pytest.approx(-0.5j)

    def test_cosine_against_analytic(self):
        g = make_grid(5, 64, 64)
        fld = field_from(g, lambda t, x, y: np.cos(2 * np.pi * x) + 0 * t)
        jet = wirtinger_jet(fld, (2, 5, 0))
        exact = -np.pi**2 * np.cos(2 * np.pi * g.x_values[5])
        assert jet.a == pytest.approx(exact, abs=5e-2)
        assert jet.b == pytest.approx(exact, abs=5e-2)

    def test_boundary_jets_flagged_one_sided(self):
        g = make_grid(5, 8, 8)
        fld = field_from(g, lambda t, x, y: t**2 + 0 * x)
        assert wirtinger_jet(fld, (0, 0, 0)).one_sided_t
        assert wirtinger_jet(fld, (4, 0, 0)).one_sided_t
        assert not wirtinger_jet(fld, (2, 0, 0)).one_sided_t
        # one-sided stencils are still exact on quadratics in t
        assert wirtinger_jet(fld, (0, 0, 0)).d_tt == pytest.approx(2.0)

    def test_out_of_range_node(self):
        g = make_grid(5, 8, 8)
        fld = ScalarField.zeros(g)
        with pytest.raises(Exception):
            wirtinger_jet(fld, (5, 0, 0))

    def test_stencil_convergence_order(self):
        # trig polynomial, every second-order jet entry decays at order >= 1.9
        def f(t, x, y):
            return (np.sin(2 * np.pi * t) * np.cos(2 * np.pi * x)
                    + np.sin(2 * np.pi * (x + y)))

        errs = []
        for n in (8, 16, 32):
            g = make_grid(2 * n + 1, 2 * n, 2 * n)
            fld = field_from(g, f)
            node = (n, n // 2, n // 4)
            t0, x0, y0 = (g.t_values[node[0]], g.x_values[node[1]],
                          g.y_values[node[2]])
            jet = wirtinger_jet(fld, node)
            c = np.cos(2 * np.pi * t0) * np.cos(2 * np.pi * x0)
            s = np.sin(2 * np.pi * t0) * np.sin(2 * np.pi * x0)
            sxy = np.sin(2 * np.pi * (x0 + y0))
            d_t = 2 * np.pi * c
            d_tt = -(2 * np.pi) ** 2 * np.sin(2 * np.pi * t0) * np.cos(2 * np.pi * x0)
            # Wirtinger combinations of the analytic x, y derivatives
            fx = -2 * np.pi * s * 0 - 2 * np.pi * np.sin(2 * np.pi * x0) * np.sin(2 * np.pi * t0) + 2 * np.pi * np.cos(2 * np.pi * (x0 + y0))
            fy = 2 * np.pi * np.cos(2 * np.pi * (x0 + y0))
            fxx = -(2 * np.pi) ** 2 * (np.cos(2 * np.pi * x0) * np.sin(2 * np.pi * t0) + sxy)
            fyy = -(2 * np.pi) ** 2 * sxy
            fxy = -(2 * np.pi) ** 2 * sxy
            a_ex = 0.25 * (fxx + fyy)
            b_ex = 0.25 * (fxx - fyy - 2j * fxy)
            z_ex = 0.5 * (fx - 1j * fy)
            err = max(abs(jet.d_t - d_t), abs(jet.d_tt - d_tt),
                      abs(jet.a - a_ex), abs(jet.b - b_ex),
                      abs(jet.d_z - z_ex))
            errs.append(err)
        slopes = [np.log2(errs[i] / errs[i + 1]) for i in range(len(errs) - 1)]
        assert min(slopes) >= 1.9

    @given(st.integers(0, 7), st.integers(0, 7), st.integers(1, 3))
    @settings(max_examples=25, deadline=None)
    def test_reality_and_conjugacy(self, ix, iy, it):
        g = make_grid(5, 8, 8)
        rng = np.random.default_rng(ix * 64 + iy * 8 + it)
        vals = rng.standard_normal(g.shape)
        jet = wirtinger_jet(ScalarField(g, vals), (it, ix, iy))
        assert np.isreal(jet.a)
        assert jet.d_tzb == pytest.approx(np.conj(jet.d_tz))

    def test_periodicity_bitwise(self):
        g = make_grid(5, 8, 8)
        fld = field_from(g, lambda t, x, y: np.sin(2 * np.pi * x) * np.cos(
            2 * np.pi * y) + t)
        shifted = field_from(g, lambda t, x, y: np.sin(2 * np.pi * (x + 1.0))
                             * np.cos(2 * np.pi * (y + 1.0)) + t)
        j0 = wirtinger_jet(fld, (2, 3, 5))
        j1 = wirtinger_jet(shifted, (2, 3, 5))
        assert j0.a == pytest.approx(j1.a, abs=1e-12)
        assert j0.b == pytest.approx(j1.b, abs=1e-12)


class TestInterpolate:
    def test_constant(self):
        g = make_grid(5, 8, 8)
        fld = field_from(g, lambda t, x, y: 0 * t + 5.0)
        assert interpolate(fld, 0.3, 0.7, 0.2) == pytest.approx(5.0)

    def test_linear_in_t_midpoint(self):
        g = make_grid(5, 8, 8)
        fld = field_from(g, lambda t, x, y: 3.0 * t + 0 * x)
        tm = g.t_values[1] + g.ht / 2
        assert interpolate(fld, tm, 0.0, 0.0) == pytest.approx(3.0 * tm)

    def test_cosine_accuracy(self):
        g = make_grid(5, 64, 8)
        fld = field_from(g, lambda t, x, y: np.cos(2 * np.pi * x) + 0 * t)
        rng = np.random.default_rng(7)
        for _ in range(20):
            t, x, y = rng.uniform(0, 1, 3)
            err = abs(interpolate(fld, t, x, y) - np.cos(2 * np.pi * x))
            assert err < 5 * g.hx**2 * (2 * np.pi) ** 2

    def test_periodic_wrap(self):
        g = make_grid(5, 8, 8)
        fld = field_from(g, lambda t, x, y: np.sin(2 * np.pi * x) + 0 * t)
        assert interpolate(fld, 0.5, 1.25, 0.0) == pytest.approx(
            interpolate(fld, 0.5, 0.25, 0.0))

    def test_t_out_of_range(self):
        g = make_grid(5, 8, 8)
        fld = ScalarField.zeros(g)
        with pytest.raises(Exception):
            interpolate(fld, 1.5, 0.0, 0.0)

    @given(st.floats(0, 1), st.floats(0, 1), st.floats(0, 1))
    @settings(max_examples=40, deadline=None)
    def test_exact_on_trilinear(self, t, x, y):
        # trilinear in (t, x, y) within one periodic cell pattern:
        # use a field linear in t only, which trilinear interp reproduces
        g = make_grid(5, 8, 8)
        fld = field_from(g, lambda tt, xx, yy: 2.0 * tt + 1.0 + 0 * xx)
        assert interpolate(fld, t, x, y) == pytest.approx(2.0 * t + 1.0)
