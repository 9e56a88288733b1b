"""The Gauss-parametrized hypersurface, its shape operator and splitting tensor."""

import numpy as np
import pytest

from scforge import hyper as hy
from scforge.errors import AllProportionalToIdentity, SingularPoint
from scforge.grid import diff_array

from conftest import chain

NAMES = ["SEED-H1", "SEED-E1"]


def order(vals):
    return np.log2(np.array(vals[:-1]) / np.array(vals[1:]))


@pytest.mark.parametrize("name", NAMES)
class TestNormalFrame:
    """The fiber frame xi spans the normal bundle of g in the sphere."""

    def test_orthonormal_and_normal(self, name):
        H = chain(name, 65, "hyper").H
        gj = H.pair.g_jet
        xi = H.xi
        k = H.n - 2
        np.testing.assert_allclose(np.swapaxes(xi, -1, -2) @ xi, np.broadcast_to(np.eye(k), xi.shape[:2] + (k, k)),
                                   atol=1e-12)
        for v in (gj.val, gj.du, gj.dv):
            assert np.max(np.abs(np.einsum("...a,...ak->...k", v, xi))) < 1e-12

    def test_exact_derivatives_match_stencils(self, name):
        errs = []
        for n in (65, 129, 257):
            H = chain(name, n, "hyper").H
            g = H.grid
            errs.append(max(np.max(np.abs(g.interior(diff_array(H.xi, g, "u") - H.xiu))),
                            np.max(np.abs(g.interior(diff_array(H.xi, g, "v") - H.xiv)))))
        assert np.all(np.abs(order(errs) - 2) < 0.3), errs

    def test_straight_fibers(self, name):
        H = chain(name, 33, "hyper").H
        assert hy.straightness_residual(H, np.full(H.n - 2, 0.1)) < 1e-14


@pytest.mark.parametrize("name", NAMES)
class TestGaussParametrization:
    """The normal of psi is h, and psi lies on the envelope of the seed hyperplanes."""

    def test_gauss_map_jet_route(self, name):
        assert hy.gauss_map_residual(chain(name, 65, "hyper").H, "jet") < 1e-12

    def test_gauss_map_grid_route_order_two(self, name):
        r = [hy.gauss_map_residual(chain(name, n, "hyper").H, "grid") for n in (65, 129, 257)]
        assert np.all(np.abs(order(r) - 2) < 0.3), r

    def test_envelope(self, name):
        ns = chain(name, 129, "hyper")
        assert hy.envelope_check(ns.H, ns.seed, "jet")["max"] < 1e-12
        assert hy.envelope_check(ns.H, ns.seed, "grid")["max"] < 50 * ns.grid.h**2

    def test_mostly_regular(self, name):
        H = chain(name, 65, "hyper").H
        assert hy.require_regular(H) > 0.95

    def test_require_regular_raises(self, name):
        H = chain(name, 33, "hyper").H
        with pytest.raises(SingularPoint):
            hy.require_regular(H, fraction=1.01)


@pytest.mark.parametrize("name", NAMES)
class TestShapeOperator:
    """Rank two shape operator whose kernel is the fiber direction."""

    def test_kernel_is_fiber(self, name):
        info = chain(name, 65, "hyper").H.shape_info
        assert info["kernel_dim"] == 1
        assert info["null_direction_res"] < 1e-12
        assert info["lowered_asymmetry"] < 1e-12

    def test_conjugate_coordinates_transfer(self, name):
        assert chain(name, 65, "hyper").H.shape_info["conjugacy_transfer"] < 1e-12

    def test_curvature_sign(self, name):
        info = chain(name, 65, "hyper").H.shape_info
        expected = "negative" if name == "SEED-E1" else "mixed"
        assert info["curvature_product_sign"] == expected


@pytest.mark.parametrize("name, kind", [("SEED-H1", "hyperbolic"), ("SEED-E1", "elliptic")])
class TestSplitting:
    """C_xi = a I + b J with J of the seed type and canonical in (d_u, d_v)."""

    def test_type_and_span(self, name, kind):
        s = chain(name, 129, "hyper").split
        assert s.type_tag == kind
        assert s.span_res < 1e-12
        assert s.canonical_dev < 1e-10

    def test_j_squares(self, name, kind):
        ns = chain(name, 65, "hyper")
        JJ = (ns.split.J @ ns.split.J)[ns.H.regular]
        sign = 1.0 if kind == "hyperbolic" else -1.0
        np.testing.assert_allclose(JJ, np.broadcast_to(sign * np.eye(2), JJ.shape), atol=1e-10)

    def test_grid_route_converges(self, name, kind):
        d = [chain(name, n, "hyper").split.fd_route_dev for n in (65, 129, 257)]
        assert np.all(np.abs(order(d) - 2) < 0.3), d


class TestFitSpan:
    """Span fits on synthetic tensors."""

    def test_recovers_elliptic(self):
        Jm = np.array([[0.0, -1.0], [1.0, 0.0]])
        C = np.stack([2.0 * np.eye(2) + 0.5 * Jm, -np.eye(2) + 3.0 * Jm])
        C = np.broadcast_to(C, (4, 4, 2, 2, 2))
        J, a, b, tag, span = hy.fit_span(C)
        assert tag == "elliptic" and span < 1e-14
        np.testing.assert_allclose(J, np.broadcast_to(Jm, (4, 4, 2, 2)))
        np.testing.assert_allclose(b[0, 0], [0.5, 3.0])
        np.testing.assert_allclose(a[0, 0], [2.0, -1.0])

    def test_recovers_hyperbolic_with_misfit(self):
        Jm = np.diag([1.0, -1.0])
        C = np.stack([np.eye(2) + Jm, np.array([[0.0, 0.1], [0.0, 0.0]])])
        J, _, _, tag, span = hy.fit_span(np.broadcast_to(C, (3, 3, 2, 2, 2)))
        assert tag == "hyperbolic"
        assert span > 0.01

    def test_identity_only(self):
        C = np.broadcast_to(np.stack([np.eye(2), 2 * np.eye(2)]), (3, 3, 2, 2, 2))
        with pytest.raises(AllProportionalToIdentity):
            hy.fit_span(C)
