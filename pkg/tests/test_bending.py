"""The scalar sigma, the Codazzi tensor B and the integrated bending field."""

import numpy as np
import pytest

from scforge import bending as bn
from scforge.errors import ContractViolation, NotSpecialPair
from scforge.grid import Grid2
from scforge.surfgeo import ChristoffelReal
from scforge.thresholds import DEFAULT

from conftest import chain

NAMES = ["SEED-H1", "SEED-E1"]


class TestIntegrateClosed:
    """Closed forms integrate to their potential along either sweep."""

    @pytest.mark.parametrize("order", ["v-first", "u-first"])
    def test_potential_recovered(self, order):
        g = Grid2.square(65)
        U, V = g.mesh()
        F = bn.integrate_closed(np.cos(U) * np.cos(V), -np.sin(U) * np.sin(V), g, order)
        assert np.max(np.abs(F - np.sin(U) * np.cos(V))) < 1e-8

    def test_fourth_order(self):
        errs = []
        for n in (17, 33, 65):
            g = Grid2.square(n)
            U, V = g.mesh()
            F = bn.integrate_closed(V * np.exp(U * V), U * np.exp(U * V), g)
            errs.append(np.max(np.abs(F - np.exp(U * V) + 1)))
        assert np.all(np.log2(np.array(errs[:-1]) / np.array(errs[1:])) > 3.5), errs

    def test_sweeps_disagree_on_non_closed_form(self):
        g = Grid2.square(33)
        U, V = g.mesh()
        a = bn.integrate_closed(V, 0 * U, g, "v-first")
        b = bn.integrate_closed(V, 0 * U, g, "u-first")
        assert np.max(np.abs(a - b)) > 0.5

    def test_unknown_order(self):
        g = Grid2.square(9)
        with pytest.raises(ValueError):
            bn.integrate_closed(np.zeros(g.shape), np.zeros(g.shape), g, "diagonal")


@pytest.mark.parametrize("name", NAMES)
class TestSigma:
    """sigma is positive, normalized at the origin and path independent."""

    def test_normalized_positive(self, name):
        sig = chain(name, 65).sig
        assert sig.sigma[0, 0] == pytest.approx(1.0, abs=1e-15)
        assert np.min(sig.sigma) > 0

    def test_log_derivatives(self, name):
        ns = chain(name, 65)
        wu, wv = bn.log_derivatives(ns.c)
        np.testing.assert_allclose(ns.sig.sigma_u, wu * ns.sig.sigma, rtol=1e-14)
        np.testing.assert_allclose(ns.sig.sigma_v, wv * ns.sig.sigma, rtol=1e-14)

    def test_path_independent(self, name):
        assert chain(name, 129).sig.path_mismatch < 1e-6


class TestSigmaRequiresSpecialPair:
    """Outside the special class the 1-form is not closed and sigma is refused."""

    def test_refused(self):
        g = Grid2.square(33)
        U, V = g.mesh()
        one = np.ones(g.shape)
        # G1_u = 2u differs from G2_v = 0
        with pytest.raises(NotSpecialPair):
            bn.sigma_field(ChristoffelReal(g, U**2, 0 * one, 0 * one, one, one))


@pytest.mark.parametrize("name", NAMES)
class TestCodazziTensor:
    """B = sigma sym(A J~) meets its contracts."""

    def test_contracts(self, name):
        ns = chain(name, 129)
        r = ns.bd.residuals
        assert r["symmetry"] <= DEFAULT.exact_tol
        assert r["kernel"] <= DEFAULT.exact_tol
        assert r["wedge"] <= 1e-12
        assert r["codazzi"] <= DEFAULT.ceiling(ns.grid.h)
        assert r["pushforward"] <= 1e-10

    def test_wrong_sigma_breaks_codazzi(self, name):
        ns = chain(name, 65)
        sig = bn.sigma_field(ns.c, perturb="0.3*u*v")
        with pytest.raises(ContractViolation) as info:
            bn.build_B(ns.H, ns.split, sig)
        assert info.value.context["contract"] == "codazzi"

    def test_algebraic_contracts_survive_wrong_sigma(self, name):
        ns = chain(name, 65)
        bd = bn.build_B(ns.H, ns.split, bn.sigma_field(ns.c, perturb="0.3*u*v"), check=False)
        assert bd.residuals["wedge"] < 1e-12 and bd.residuals["symmetry"] < 1e-12


@pytest.mark.parametrize("name", NAMES)
class TestBendingField:
    """Omega is skew, T satisfies the bending condition and returns B."""

    def test_skew_and_bending_condition(self, name):
        r = chain(name, 129).bf.residuals
        assert r["skewness"] == 0.0
        assert r["bending_condition"] <= 1e-12
        assert r["path_mismatch"] <= 1e-6

    def test_grid_residuals_second_order(self, name):
        keys = ("bending_condition_grid", "consistency", "round_trip")
        vals = {k: [chain(name, n).bf.residuals[k] for n in (65, 129, 257)] for k in keys}
        for k, v in vals.items():
            orders = np.log2(np.array(v[:-1]) / np.array(v[1:]))
            assert np.all(orders > 1.6), (k, v)

    def test_omega_jet_matches(self, name):
        ns = chain(name, 65)
        Wu, Wv = bn.omega_jet(ns.H, ns.sig)
        reg = ns.H.regular
        scale = np.max(np.abs(ns.bf.dOmega[0]))
        assert np.max(np.abs(Wu.val - ns.bf.dOmega[0])[reg]) < 1e-10 * scale
        assert np.max(np.abs(Wv.val - ns.bf.dOmega[1])[reg]) < 1e-10 * scale

    def test_fibers(self, name):
        ns = chain(name, 129)
        _, r = bn.extend_fibers(ns.H, ns.bf, np.full(ns.H.n - 2, 0.1))
        assert r["bending_condition_grid"] <= DEFAULT.ceiling(ns.grid.h)
        assert r["bending_condition_grid_w0"] <= DEFAULT.ceiling(ns.grid.h)

    def test_summary_keys(self, name):
        ns = chain(name, 65)
        s = bn.bending_summary(ns.bf)
        for key in ("B_wedge", "B_codazzi", "sigma_path_mismatch", "special_pair_res", "round_trip"):
            assert key in s


class TestUniqueness:
    """Two bendings with the same B differ by a trivial bending D f + w."""

    def test_initial_state_adds_trivial_bending(self):
        ns = chain("SEED-H1", 65)
        n1 = ns.H.N.shape[-1]
        D = np.zeros((n1, n1))
        D[0, 1], D[1, 0], D[2, 3], D[3, 2] = 0.3, -0.3, -0.2, 0.2
        w = np.arange(n1, dtype=float)
        other = bn.integrate_bending(ns.H, ns.bd, initial=(D, w))
        Dfit, wfit, misfit = bn.fit_trivial(ns.H.f0, other.T - ns.bf.T)
        assert misfit < 1e-6
        np.testing.assert_allclose(Dfit, D, atol=1e-6)
        np.testing.assert_allclose(wfit, w - D @ ns.H.f0[0, 0], atol=1e-6)

    def test_zero_B_only_in_test_mode(self):
        ns = chain("SEED-E1", 33)
        zero = bn.BData(0 * ns.bd.B, 0 * ns.bd.beta, 0 * ns.bd.b, ns.bd.Jm, ns.sig)
        with pytest.raises(ContractViolation):
            bn.integrate_bending(ns.H, zero)
        bf = bn.integrate_bending(ns.H, zero, test_mode=True)
        assert np.max(np.abs(bf.T)) == 0.0
