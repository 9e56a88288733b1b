"""Christoffel symbols, the pair equations and the second fundamental form of g."""

import numpy as np
import pytest

from scforge import seed as sd
from scforge import surfgeo as sg
from scforge.errors import DegenerateMetric
from scforge.grid import Grid2

from conftest import chain


def sphere(n):
    g = Grid2(0.0, 1.0, -0.5, 0.5, n, n)
    U, V = g.mesh()
    c, s, cu, su = np.cos(V), np.sin(V), np.cos(U), np.sin(U)
    h = np.stack([cu * c, su * c, s], axis=-1)
    hu = np.stack([-su * c, cu * c, 0 * U], axis=-1)
    hv = np.stack([-cu * s, -su * s, c], axis=-1)
    huu = np.stack([-cu * c, -su * c, 0 * U], axis=-1)
    huv = np.stack([su * s, -cu * s, 0 * U], axis=-1)
    hvv = np.stack([-cu * c, -su * c, -s], axis=-1)
    return g, U, V, (h, hu, hv, huu, huv, hvv)


class TestLeviCivita:
    """Symbols of the round sphere in longitude/latitude coordinates."""

    def test_sphere_symbols(self):
        _, _, V, (h, hu, hv, huu, huv, hvv) = sphere(17)
        G = sg.levi_civita(hu, hv, huu, huv, hvv)
        np.testing.assert_allclose(G[..., 0, 0, 1], -np.tan(V), atol=1e-13)
        np.testing.assert_allclose(G[..., 1, 0, 0], np.sin(V) * np.cos(V), atol=1e-13)
        np.testing.assert_allclose(G[..., 1, 1, 1], 0.0, atol=1e-13)
        np.testing.assert_allclose(G[..., 0, 0, 1], G[..., 0, 1, 0])

    def test_metric(self):
        _, _, V, (h, hu, hv, *_rest) = sphere(9)
        E, F, G, det = sg.metric(hu, hv)
        np.testing.assert_allclose(E, np.cos(V) ** 2, atol=1e-15)
        np.testing.assert_allclose(F, 0.0, atol=1e-15)
        np.testing.assert_allclose(det, np.cos(V) ** 2, atol=1e-15)

    def test_degenerate(self):
        hu = np.ones((9, 9, 3))
        with pytest.raises(DegenerateMetric):
            sg.metric(hu, 2 * hu)


@pytest.mark.parametrize("name", ["SEED-H1", "SEED-E1"])
class TestPairEquations:
    """g and gamma solve the same conjugate-net equation."""

    def test_jet_route_exact(self, name):
        p = chain(name, 65, "pair").pair
        c = sg.christoffel(p, "jet")
        assert sg.conjugate_residual(p, "jet", c)["max"] < 1e-12
        assert sg.gamma_residual(p, "jet", c)["max"] < 1e-12

    def test_grid_route_order_two(self, name):
        vals = []
        for n in (65, 129, 257):
            p = chain(name, n, "pair").pair
            vals.append(sg.conjugate_residual(p, "grid")["interior"])
        assert 3.2 <= vals[0] / vals[1] <= 4.8 and 3.2 <= vals[1] / vals[2] <= 4.8

    def test_routes_agree(self, name):
        p = chain(name, 129, "pair").pair
        cj, cg = sg.christoffel(p, "jet"), sg.christoffel(p, "grid")
        g = p.grid
        if hasattr(cj, "G1"):
            d = max(np.max(np.abs(g.interior(cj.G1 - cg.G1))), np.max(np.abs(g.interior(cj.G2 - cg.G2))))
            ref = max(np.max(np.abs(cj.G1)), np.max(np.abs(cj.G2)))
        else:
            d, ref = np.max(np.abs(g.interior(cj.Gamma - cg.Gamma))), np.max(np.abs(cj.Gamma))
        assert d / ref < 50 * g.h**2

    def test_conjugacy_defect_small(self, name):
        p = chain(name, 65, "pair").pair
        assert sg.conjugacy_defect(p, "jet") < 1e-10

    def test_corrupted_support_detected(self, name):
        base = chain(name, 129, "pair")
        p = sd.extract_pair(base.seed, perturb_support="0.01*u*v")
        assert sg.gamma_residual(p, "grid")["interior"] > 50 * base.grid.h**2


class TestSecondFundamentalForm:
    """Normal parts of the second derivatives and the minimality diagnostic."""

    def test_totally_geodesic_sphere(self):
        # the unit sphere has alpha = 0 as a surface of S^2 (normal space of dimension 0)
        _, _, _, d = sphere(9)
        P = sg.normal_frame_projector(d[0], d[1], d[2])
        assert np.max(np.abs(P)) < 1e-12

    def test_projector_properties(self):
        p = chain("SEED-H1", 33, "pair").pair
        h, hu, hv, *_ = sg.derivatives(p, "jet")
        P = sg.normal_frame_projector(h, hu, hv)
        np.testing.assert_allclose(P @ P, P, atol=1e-12)
        np.testing.assert_allclose(np.einsum("...ij,...j->...i", P, hu), 0.0, atol=1e-12)
        assert np.allclose(np.trace(P, axis1=-2, axis2=-1), p.n - 2)

    def test_e1_not_minimal_in_interior(self):
        p = chain("SEED-E1", 129, "pair").pair
        assert sg.minimality_ratio(p, "jet") > 1e-3

    def test_unknown_route(self):
        with pytest.raises(ValueError):
            sg.derivatives(chain("SEED-H1", 33, "pair").pair, "spline")
