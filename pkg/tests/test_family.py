"""Deformations f_t = f + t T and the certificate rows."""

from types import SimpleNamespace

import numpy as np
import pytest

from scforge import family as fm
from scforge.classify import SECOND, SPECIAL
from scforge.errors import CertificateFailure, NotImmersedAt

from conftest import chain

NAMES = ["SEED-H1", "SEED-E1"]


@pytest.mark.parametrize("name", NAMES)
class TestDeform:
    """Isometry identities of the pair f_t, f_{-t}."""

    def test_t_zero_is_identity(self, name):
        ns = chain(name, 65)
        d = fm.deform(ns.H, ns.bf, 0.0)
        np.testing.assert_array_equal(d.frame, ns.H.frame)
        assert d.metric_pair == 0.0 and d.first_order == 0.0

    def test_metric_pair_and_second_order(self, name):
        ns = chain(name, 65)
        tm = fm.t_max(ns.H, ns.bf)
        for t in (0.05 * tm, -0.1 * tm):
            d = fm.deform(ns.H, ns.bf, t, tm)
            assert d.metric_pair <= 1e-10
            # f_t* = f_* + t P with P skew against f_*, so only the t^2 term remains
            assert d.first_order <= 1e-10
            assert d.margin > 1e-3

    def test_opposite_t_share_metric(self, name):
        ns = chain(name, 65)
        t = 0.1 * fm.t_max(ns.H, ns.bf)
        a, b = fm.deform(ns.H, ns.bf, t), fm.deform(ns.H, ns.bf, -t)
        Ga = np.swapaxes(a.frame, -1, -2) @ a.frame
        Gb = np.swapaxes(b.frame, -1, -2) @ b.frame
        assert np.max(np.abs(Ga - Gb)) <= 1e-10 * np.max(np.abs(Ga))

    def test_scale_guard(self, name):
        ns = chain(name, 65)
        tm = fm.t_max(ns.H, ns.bf)
        assert 0 < tm < np.inf
        with pytest.raises(NotImmersedAt):
            fm.deform(ns.H, ns.bf, 1.5 * tm, tm)


@pytest.mark.parametrize("name", NAMES)
class TestNullity:
    """The fiber direction stays in the nullity of f_t."""

    def test_inclusion(self, name):
        ns = chain(name, 129)
        t = 0.05 * fm.t_max(ns.H, ns.bf)
        r = fm.nullity_inclusion(ns.H, ns.bf, t)
        assert r["inclusion"] <= ns.ceiling
        assert r["decomposition"] <= ns.ceiling

    def test_gauss_surface_at_zero(self, name):
        ns = chain(name, 65)
        gp = fm.gauss_surface_t(ns.H, ns.bf, 0.0)
        assert np.max(np.abs(gp.g - ns.H.N)) < 1e-12

    def test_structure_type_kept(self, name):
        ns = chain(name, 65)
        t = 0.1 * fm.t_max(ns.H, ns.bf)
        _, info = fm.J_t_extraction(ns.H, ns.bf, t, ns.H.kind)
        assert info["type"] == ns.H.kind


@pytest.fixture(scope="module")
def cert():
    ns = chain("SEED-H1", 65)
    return fm.certify(ns.H, ns.bf, (0.1,), ns.report0, workers=1)


class TestCertificate:
    """Rows, clause names and the hypothesis gate."""

    def test_h1_certified(self, cert):
        assert cert.verdict == fm.VERDICT_OK
        assert cert.first_failure() is None
        cert.raise_on_failure()

    def test_rows(self, cert):
        zero, row = cert.rows
        assert zero.t == 0.0 and zero.values["species_verdict"] == SPECIAL
        assert row.t == pytest.approx(0.1 * cert.t_max)
        assert row.values["species_verdict"] == SECOND

    def test_clause_names(self, cert):
        common = {"a_first_species", "e_metric_pair", "nullity_inclusion", "decomposition", "type_constant",
                  "orientation"}
        assert set(cert.rows[0].clauses) == common | {"c_special_at_zero"}
        assert set(cert.rows[1].clauses) == common | {"b_second_species", "c_not_special", "d_congruence"}

    def test_elliptic_rows_carry_minimality_guard(self):
        ns = chain("SEED-E1", 65)
        cert = fm.certify(ns.H, ns.bf, (), ns.report0, workers=1)
        assert cert.rows[0].clauses["minimality_guard"]

    def test_workers_do_not_change_rows(self, cert):
        ns = chain("SEED-H1", 65)
        other = fm.certify(ns.H, ns.bf, (0.1,), ns.report0, workers=2)
        assert other.to_dict() == cert.to_dict()

    def test_hypothesis_gate_blocks(self):
        ns = chain("SEED-H1", 65)
        report = SimpleNamespace(first_species_res=1e-5, verdict="first-species")
        cert = fm.certify(ns.H, ns.bf, (0.1,), report, workers=1)
        assert cert.rows == []
        assert cert.first_failure() == ("hypothesis", None)
        with pytest.raises(CertificateFailure):
            cert.raise_on_failure()
