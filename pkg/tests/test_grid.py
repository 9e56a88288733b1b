"""Grids, fields and second-order stencils."""

import csv
import io

import numpy as np
import pytest

from scforge.errors import GridMismatch, GridTooSmall, NonFiniteField
from scforge.grid import (Field, Grid2, complex_diff, diff, diff_array, mixed_symmetry_defect,
                          residual_stats)

CASES = {
    "u": (lambda U, V: np.exp(U) * np.sin(V), lambda U, V: np.exp(U) * np.sin(V)),
    "v": (lambda U, V: np.exp(U) * np.sin(V), lambda U, V: np.exp(U) * np.cos(V)),
    "uu": (lambda U, V: np.sin(2 * U) * V, lambda U, V: -4 * np.sin(2 * U) * V),
    "vv": (lambda U, V: np.cos(U * V), lambda U, V: -U * U * np.cos(U * V)),
    "uv": (lambda U, V: np.exp(U * V), lambda U, V: (1 + U * V) * np.exp(U * V)),
}


def max_error(n, which):
    g = Grid2.square(n)
    U, V = g.mesh()
    f, df = CASES[which]
    return float(np.max(np.abs(diff_array(f(U, V), g, which) - df(U, V))))


class TestGrid:
    """Construction, spacing and interior views."""

    def test_spacing_and_mesh(self):
        g = Grid2(0.0, 2.0, -1.0, 1.0, 21, 11)
        assert g.hu == pytest.approx(0.1)
        assert g.hv == pytest.approx(0.2)
        assert g.h == pytest.approx(0.2)
        U, V = g.mesh()
        assert U.shape == (21, 11)
        assert U[3, 0] == pytest.approx(0.3) and V[0, 4] == pytest.approx(-0.2)

    @pytest.mark.parametrize("nu, nv", [(8, 20), (20, 3)])
    def test_too_small(self, nu, nv):
        with pytest.raises(GridTooSmall):
            Grid2(0, 1, 0, 1, nu, nv)

    def test_bad_bounds(self):
        with pytest.raises(GridTooSmall):
            Grid2(1, 0, 0, 1, 10, 10)

    def test_interior(self):
        g = Grid2.square(9)
        a = np.arange(81.0).reshape(9, 9)
        assert g.interior(a).shape == (5, 5)
        assert g.interior_mask().sum() == 25


class TestField:
    """Fields are immutable, finite and tied to their grid."""

    def test_immutable(self):
        g = Grid2.square(9)
        f = Field(g, np.zeros(g.shape))
        with pytest.raises(ValueError):
            f.data[0, 0] = 1.0

    def test_copy_on_construction(self):
        g = Grid2.square(9)
        a = np.zeros(g.shape)
        f = Field(g, a)
        a[0, 0] = 5.0
        assert f.data[0, 0] == 0.0

    def test_non_finite(self):
        g = Grid2.square(9)
        a = np.zeros(g.shape)
        a[2, 3] = np.nan
        with pytest.raises(NonFiniteField):
            Field(g, a)

    def test_mismatch(self):
        with pytest.raises(GridMismatch):
            Field(Grid2.square(9), np.zeros((10, 9)))
        a, b = Field(Grid2.square(9), np.ones((9, 9))), Field(Grid2.square(10), np.ones((10, 10)))
        with pytest.raises(GridMismatch):
            a + b

    def test_kinds_and_norm(self):
        g = Grid2.square(9)
        vec = Field(g, np.ones(g.shape + (4,)))
        assert vec.kind == "vector"
        assert Field(g, np.ones(g.shape + (2, 2))).kind == "matrix"
        assert Field(g, np.ones(g.shape, dtype=complex)).kind == "complex"
        np.testing.assert_allclose(vec.norm().data, 2.0)
        assert vec.max_abs() == pytest.approx(2.0)

    def test_csv(self):
        g = Grid2.square(9)
        U, V = g.mesh()
        rows = list(csv.reader(io.StringIO(Field(g, U + 2 * V).to_csv("phi"))))
        assert rows[0] == ["u", "v", "phi"]
        assert len(rows) == 82
        u, v, val = map(float, rows[10])
        assert val == pytest.approx(u + 2 * v)


class TestStencils:
    """All stencils are second order, including the boundary rows."""

    @pytest.mark.parametrize("which", CASES)
    def test_order_two(self, which):
        errs = [max_error(n, which) for n in (33, 65, 129)]
        orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
        assert np.all(np.abs(orders - 2) < 0.3), orders

    @pytest.mark.parametrize("which", ["u", "v", "uu", "vv", "uv"])
    def test_exact_on_quadratics(self, which):
        g = Grid2.square(9)
        U, V = g.mesh()
        f = 1 + 2 * U - V + 3 * U * U + U * V - 2 * V * V
        expected = {"u": 2 + 6 * U + V, "v": -1 + U - 4 * V, "uu": 6 + 0 * U, "vv": -4 + 0 * U, "uv": 1 + 0 * U}
        np.testing.assert_allclose(diff_array(f, g, which), expected[which], atol=1e-10)

    def test_vector_fields_differentiate_componentwise(self):
        g = Grid2.square(17)
        U, V = g.mesh()
        a = np.stack([np.sin(U), U * V], axis=-1)
        d = diff(Field(g, a), "u").data
        np.testing.assert_allclose(d[..., 0], diff_array(np.sin(U), g, "u"))
        np.testing.assert_allclose(d[..., 1], V, atol=1e-12)

    def test_wirtinger(self):
        g = Grid2.square(65)
        U, V = g.mesh()
        f = Field(g, U * U - V * V)          # Re z^2, so f_z = z
        fz = complex_diff(f, "z").data
        assert np.max(np.abs(fz - (U + 1j * V))) < 1e-10
        fzb = complex_diff(Field(g, U * U + V * V), "zbar").data   # |z|^2, so f_zbar = z
        assert np.max(np.abs(fzb - (U + 1j * V))) < 1e-10

    def test_mixed_symmetry(self):
        g = Grid2.square(33)
        U, V = g.mesh()
        assert mixed_symmetry_defect(Field(g, np.exp(U) * np.cos(V))) < 1e-12

    def test_too_few_nodes_for_stencil(self):
        with pytest.raises(GridTooSmall):
            diff_array(np.zeros((4, 9)), Grid2.square(9), "u")

    def test_unknown_derivative(self):
        with pytest.raises(ValueError):
            diff_array(np.zeros((9, 9)), Grid2.square(9), "uvw")


class TestResidualStats:
    """Residual statistics separate the boundary band from the interior."""

    def test_boundary_spike_excluded_from_interior(self):
        g = Grid2.square(9)
        a = np.full(g.shape, 1e-3)
        a[0, 0] = 1.0
        s = residual_stats(a, g)
        assert s["max"] == 1.0
        assert s["interior_max"] == pytest.approx(1e-3)

    def test_vector_norm(self):
        g = Grid2.square(9)
        s = residual_stats(np.full(g.shape + (2,), 3.0), g)
        assert s["max"] == pytest.approx(np.hypot(3, 3))
        assert s["rms"] == pytest.approx(np.hypot(3, 3))
