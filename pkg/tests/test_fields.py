import math

import numpy as np
import numpy.testing as npt
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nsaudit.errors import FieldError
from nsaudit.fields import (
    CLAMPED,
    PERIODIC,
    GridSpec,
    ScalarField,
    VectorField,
    check_laplacian_identity,
    curl,
    divergence,
    gradient,
    interpolate,
    observed_orders,
    read_field,
    vector_laplacian,
    write_field,
)

from oracles import band_limited

TWO_PI = 2 * math.pi


def unit_square(n=16):
    return GridSpec.box((n, n), (0.0, 0.0), (1.0, 1.0), CLAMPED)


def periodic_box(n):
    return GridSpec.box((n, n), (0.0, 0.0), (TWO_PI, TWO_PI), PERIODIC)


class TestGridSpec:
    def test_too_few_nodes(self):
        with pytest.raises(FieldError):
            GridSpec((3, 8), (0.1, 0.1))

    def test_nonpositive_spacing(self):
        with pytest.raises(FieldError):
            GridSpec((8, 8), (0.1, 0.0))

    def test_box_spacing(self):
        g = GridSpec.box((16, 64), (0, 0), (1, TWO_PI), (CLAMPED, PERIODIC))
        assert g.spacing == pytest.approx((1 / 15, TWO_PI / 64))
        assert g.axis_coords(0)[-1] == pytest.approx(1.0)

    def test_refined_keeps_domain(self):
        g = GridSpec.box((17, 16), (0, 0), (2, 1), (CLAMPED, PERIODIC)).refined()
        assert g.dims == (33, 32)
        assert g.upper(0) == pytest.approx(2.0)
        assert g.upper(1) == pytest.approx(1.0)


class TestFieldValidation:
    def test_nan_rejected_with_location(self):
        vals = np.zeros((4, 5))
        vals[2, 3] = np.nan
        g = GridSpec((4, 5), (1.0, 1.0))
        with pytest.raises(FieldError, match=r"\(2, 3\)"):
            ScalarField(g, vals)

    def test_inf_in_vector(self):
        vals = np.zeros((2, 4, 4))
        vals[1, 0, 1] = np.inf
        with pytest.raises(FieldError, match="non-finite"):
            VectorField(GridSpec((4, 4), (1.0, 1.0)), vals)

    def test_wrong_count(self):
        with pytest.raises(FieldError):
            ScalarField(GridSpec((4, 4), (1.0, 1.0)), np.zeros(15))

    def test_values_are_read_only(self):
        s = ScalarField(GridSpec((4, 4), (1.0, 1.0)), np.zeros(16))
        with pytest.raises(ValueError):
            s.values[0, 0] = 1.0


class TestGradient:
    def test_constant(self):
        g = unit_square()
        s = ScalarField.from_function(g, lambda x, y: 3.5 + 0 * x)
        npt.assert_allclose(gradient(s).values, 0.0, atol=1e-12)

    def test_linear_exact(self):
        g = unit_square(16)
        s = ScalarField.from_function(g, lambda x, y: x)
        gr = gradient(s).values
        assert np.max(np.abs(gr[0] - 1.0)) < 1e-12
        assert np.max(np.abs(gr[1])) < 1e-12

    def test_periodic_sine(self):
        g = GridSpec.box((64, 8), (0, 0), (TWO_PI, 1.0), (PERIODIC, CLAMPED))
        s = ScalarField.from_function(g, lambda x, y: np.sin(x))
        x, _ = g.coords()
        gr = gradient(s).values
        assert np.max(np.abs(gr[0] - np.cos(x))) < (TWO_PI / 64) ** 2
        assert np.max(np.abs(gr[1])) < 1e-12

    def test_clamped_boundary_second_order(self):
        errs = []
        for n in (17, 33, 65):
            g = GridSpec.box((n, n), (0, 0), (1, 1), CLAMPED)
            s = ScalarField.from_function(g, lambda x, y: np.exp(x) * np.cos(y))
            x, y = g.coords()
            errs.append(np.max(np.abs(gradient(s).values[0] - np.exp(x) * np.cos(y))))
        assert min(observed_orders(errs)) > 1.8


class TestDivergence:
    def test_hyperbolic_is_free(self):
        v = VectorField.from_function(unit_square(), lambda x, y: (x, -y))
        assert np.max(np.abs(divergence(v).values)) < 1e-12

    def test_radial_linear(self):
        v = VectorField.from_function(unit_square(), lambda x, y: (x, y))
        assert np.max(np.abs(divergence(v).values - 2.0)) < 1e-12

    def test_taylor_green(self):
        for n in (16, 32, 64):
            g = periodic_box(n)
            v = VectorField.from_function(
                g, lambda x, y: (np.sin(x) * np.cos(y), -np.cos(x) * np.sin(y))
            )
            h = TWO_PI / n
            assert np.max(np.abs(divergence(v).values)) < h**2


class TestCurl:
    def test_shear(self):
        v = VectorField.from_function(unit_square(), lambda x, y: (y, 0 * x, 0 * x))
        npt.assert_allclose(curl(v).values[2], -1.0, atol=1e-12)
        npt.assert_allclose(curl(v).values[:2], 0.0, atol=1e-12)

    def test_out_of_plane(self):
        v = VectorField.from_function(unit_square(), lambda x, y: (0 * x, 0 * x, -2 * y))
        c = curl(v).values
        npt.assert_allclose(c[0], -2.0, atol=1e-12)
        npt.assert_allclose(c[1:], 0.0, atol=1e-12)

    def test_2d_field_is_lifted(self):
        v = VectorField.from_function(unit_square(), lambda x, y: (y, 0 * x))
        assert curl(v).ncomp == 3

    def test_3d(self):
        g = GridSpec.box((8, 8, 8), (0, 0, 0), (1, 1, 1), CLAMPED)
        v = VectorField.from_function(g, lambda x, y, z: (z, x, y))
        npt.assert_allclose(curl(v).values, 1.0, atol=1e-12)

    @pytest.mark.parametrize("boundary", [PERIODIC, CLAMPED])
    def test_curl_grad_vanishes(self, boundary):
        # discrete axis derivatives commute, so the residual sits at round-off
        for n in (32, 64, 128):
            g = GridSpec.box((n, n), (0, 0), (TWO_PI, TWO_PI), boundary)
            s = ScalarField.from_function(g, lambda x, y: np.sin(2 * x) * np.cos(y) + np.cos(x))
            assert np.max(np.abs(curl(gradient(s)).values)) < 1e-11

    def test_div_curl_vanishes(self):
        for n in (32, 64, 128):
            v = band_limited(periodic_box(n), seed=3)
            assert np.max(np.abs(divergence(curl(v)).values)) < 1e-10


class TestVectorLaplacian:
    def test_linear(self):
        v = VectorField.from_function(unit_square(), lambda x, y: (2 * x - y, 3 * y + 1))
        assert np.max(np.abs(vector_laplacian(v).values)) < 1e-10

    def test_quadratic_including_boundary(self):
        v = VectorField.from_function(unit_square(), lambda x, y: (y**2, 0 * x))
        lap = vector_laplacian(v).values
        assert np.max(np.abs(lap[0] - 2.0)) < 1e-10
        assert np.max(np.abs(lap[1])) < 1e-10

    def test_eigenfunction(self):
        for n in (32, 64):
            g = periodic_box(n)
            v = VectorField.from_function(
                g, lambda x, y: (np.sin(x) * np.sin(y), np.cos(x) * np.sin(y))
            )
            lap = vector_laplacian(v).values
            rel = np.max(np.abs(lap + 2 * v.values)) / np.max(np.abs(2 * v.values))
            h = TWO_PI / n
            # symbol error of the 3-point stencil is h^2/12 per axis
            assert rel < h**2 / 6


class TestLaplacianIdentity:
    def test_quadratic_shear(self):
        v = VectorField.from_function(unit_square(), lambda x, y: (y**2, 0 * x, 0 * x))
        assert check_laplacian_identity(v).max < 1e-9

    def test_linear(self):
        v = VectorField.from_function(unit_square(), lambda x, y: (x + y, x - 2 * y, 3 * x))
        assert check_laplacian_identity(v).max < 1e-12

    def test_second_order_convergence(self):
        res = [check_laplacian_identity(band_limited(periodic_box(n))).max for n in (32, 64, 128)]
        ratios = [res[0] / res[1], res[1] / res[2]]
        assert all(3.2 <= r <= 4.8 for r in ratios), ratios
        assert min(observed_orders(res)) >= 1.9


@st.composite
def coefficient_pairs(draw):
    f = st.floats(-10, 10, allow_nan=False)
    return draw(f), draw(f), draw(st.integers(0, 2**16))


class TestLinearity:
    @settings(max_examples=25, deadline=None)
    @given(coefficient_pairs())
    def test_all_operators_linear(self, args):
        a, b, seed = args
        g = GridSpec.box((12, 10), (0, 0), (1, 2), (CLAMPED, PERIODIC))
        rng = np.random.default_rng(seed)
        f = VectorField(g, rng.normal(size=(3,) + g.dims))
        h = VectorField(g, rng.normal(size=(3,) + g.dims))
        s1 = ScalarField(g, rng.normal(size=g.dims))
        s2 = ScalarField(g, rng.normal(size=g.dims))
        combo = a * f + b * h
        scale = 1.0 + abs(a) + abs(b)
        for op in (divergence, curl, vector_laplacian):
            lhs = op(combo).values
            rhs = (a * op(f) + b * op(h)).values
            tol = 1e-12 * scale * max(1.0, np.max(np.abs(op(f).values)))
            assert np.max(np.abs(lhs - rhs)) <= 1e2 * tol
        lhs = gradient(a * s1 + b * s2).values
        rhs = (a * gradient(s1) + b * gradient(s2)).values
        assert np.max(np.abs(lhs - rhs)) <= 1e-10 * scale * np.max(np.abs(gradient(s1).values))


class TestInterpolate:
    def test_linear_field_exact(self):
        g = GridSpec.box((9, 9), (0, 0), (1, 1), CLAMPED)
        s = ScalarField.from_function(g, lambda x, y: 2 * x - 3 * y + 1)
        pts = np.array([[0.31, 0.77], [0.5, 0.5], [1.0, 0.0]])
        npt.assert_allclose(interpolate(s, pts), 2 * pts[:, 0] - 3 * pts[:, 1] + 1, atol=1e-13)

    def test_periodic_wrap(self):
        g = periodic_box(32)
        v = VectorField.from_function(g, lambda x, y: (np.cos(x), np.sin(y)))
        a = interpolate(v, [[0.1, 0.2]])
        b = interpolate(v, [[0.1 + TWO_PI, 0.2 - TWO_PI]])
        npt.assert_allclose(a, b, atol=1e-13)
        # last cell interpolates between node n-1 and node 0
        x = TWO_PI - 0.5 * g.spacing[0]
        expected = 0.5 * (np.cos(g.axis_coords(0)[-1]) + 1.0)
        npt.assert_allclose(interpolate(v, [[x, 0.0]])[0, 0], expected, atol=1e-13)

    def test_mixed_boundaries(self):
        g = GridSpec.box((16, 9), (0, 0), (TWO_PI, 1), (PERIODIC, CLAMPED))
        s = ScalarField.from_function(g, lambda x, y: y + 0 * x)
        npt.assert_allclose(interpolate(s, [[TWO_PI - 0.01, 0.4]]), [0.4], atol=1e-13)


class TestSnapshotFiles:
    def test_vector_round_trip_bit_identical(self, tmp_path):
        g = GridSpec.box((6, 5), (-1, 0.3), (2.7, 1.1), (PERIODIC, CLAMPED))
        rng = np.random.default_rng(11)
        v = VectorField(g, rng.normal(size=(3,) + g.dims) * 10.0 ** rng.integers(-30, 30, size=(3,) + g.dims))
        write_field(v, tmp_path / "v.txt")
        w = read_field(tmp_path / "v.txt")
        assert w.grid == g
        assert w.unit == "m/s"
        assert np.array_equal(w.values, v.values)

    def test_scalar_round_trip(self, tmp_path):
        g = GridSpec((4, 4, 5), (0.1, 0.2, 0.3), (1, 2, 3), (CLAMPED, PERIODIC, CLAMPED))
        s = ScalarField(g, np.random.default_rng(2).uniform(-1, 1, g.dims), "Pa")
        write_field(s, tmp_path / "p.txt")
        t = read_field(tmp_path / "p.txt")
        assert t.unit == "Pa" and t.grid == g
        assert np.array_equal(t.values, s.values)

    def test_header_is_plain_text(self, tmp_path):
        s = ScalarField(GridSpec((4, 4), (1.0, 1.0)), np.arange(16.0))
        write_field(s, tmp_path / "s.txt")
        lines = (tmp_path / "s.txt").read_text().splitlines()
        assert lines[1] == "kind scalar"
        assert lines[3] == "dims 4 4"
        data = lines[lines.index("data") + 1 :]
        assert len(data) == 16 and data[5] == "5"

    def test_rejects_garbage(self, tmp_path):
        (tmp_path / "x.txt").write_text("hello\n")
        with pytest.raises(FieldError):
            read_field(tmp_path / "x.txt")
