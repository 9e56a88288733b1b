"""The deformations f_t = f + t T and the discrete-class certificate.

For each t the module forms f_t and its pushforward (I + t Omega) f_*,
checks the isometry of the pair f_t, f_{-t}, the inclusion of the nullity
of f in that of f_t, extracts the Gauss surface g_t with its splitting
structure J_t and unit frames, and classifies g_t by the frame route.
"""

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import jet as J
from .classify import (FIRST, SECOND, SPECIAL, elliptic_frames, frame_lambdas, frame_species,
                       hyperbolic_frames)
from .errors import (CertificateFailure, EigenDegeneracy, LeafConstancyViolation, MinimalSurfaceGuard,
                     NotImmersedAt, TypeFlip)
from .bending import omega_jet
from .grid import diff_array
from .hyper import fit_span, masked_solve, splitting_grid_route
from .seed import GaussPair
from .surfgeo import NORM_FLOOR, levi_civita, minimality_ratio
from .thresholds import DEFAULT

VERDICT_OK = "discrete-class pair certified"
VERDICT_FAIL = "certificate failed"


def t_max(H, bf):
    """Scale guard: t_max |T|_inf = 0.1 diam(f), diam = bounding-box diagonal of the cross-section."""
    pts = H.f0.reshape(-1, H.f0.shape[-1])
    diam = float(np.linalg.norm(np.ptp(pts, axis=0)))
    tnorm = float(np.max(np.linalg.norm(bf.T, axis=-1)))
    return 0.1 * diam / max(tnorm, NORM_FLOOR)


@dataclass
class Deformed:
    t: float
    f: np.ndarray            # (nu, nv, n+1) cross-section of f_t
    frame: np.ndarray        # (nu, nv, n+1, n) pushforward of E
    margin: float
    metric_pair: float
    first_order: float


def deform(H, bf, t, tmax=None, th=DEFAULT):
    """Sample f_t = f + t T and f_{t*} = (I + t Omega) f_* with the algebraic identity checks."""
    if tmax is not None and abs(t) > tmax * (1 + 1e-12):
        raise NotImmersedAt(f"|t| = {abs(t):.4g} exceeds the scale guard t_max = {tmax:.4g}", t=t)
    I = np.eye(H.f0.shape[-1])
    Fp = (I + t * bf.Omega) @ H.frame
    Fm = (I - t * bf.Omega) @ H.frame
    reg = H.regular
    s = np.linalg.svd(Fp, compute_uv=False)
    rel = s[..., -1] / s[..., 0]
    margin = float(np.min(rel[reg]))
    if margin <= NORM_FLOOR:
        raise NotImmersedAt(f"f_t loses rank at t = {t:.4g}", t=t, margin=margin)
    Gp = np.swapaxes(Fp, -1, -2) @ Fp
    Gn = np.swapaxes(Fm, -1, -2) @ Fm
    G0 = H.metric()
    PtP = np.swapaxes(bf.P, -1, -2) @ bf.P
    scale = np.maximum(np.sqrt(np.sum(Gp**2, axis=(-1, -2))), NORM_FLOOR)
    pair = float(np.max(np.sqrt(np.sum((Gp - Gn) ** 2, axis=(-1, -2))) / scale))
    first = float(np.max(np.sqrt(np.sum((Gp - G0 - t * t * PtP) ** 2, axis=(-1, -2))) / scale))
    return Deformed(t, H.f0 + t * bf.T, Fp, margin, pair, first)


# -- nullity of f_t ------------------------------------------------------------------

def _kernel_normal(D, ref):
    """Unit vector spanning the left kernel of D (n+1 x n), oriented along ``ref``."""
    U, _, _ = np.linalg.svd(D, full_matrices=True)
    N = U[..., :, -1]
    sgn = np.sign(np.einsum("...i,...i", N, ref))
    return N * np.where(sgn == 0, 1.0, sgn)[..., None]


def normal_t_slice(H, bf, t, w, xi_derivs=None):
    """N_t at psi(x, w): unit left-kernel vector of the pushforward of f_t on the frame.

    On the slice w the pushforward is (I + t Omega)(f0_* + xi_* w) + t Omega_*(xi w)
    on d_u, d_v and (I + t Omega) xi on the fiber; xi_* is exact.
    """
    g = H.grid
    w = np.asarray(w, dtype=float)
    xiu, xiv = xi_derivs if xi_derivs is not None else (H.xiu, H.xiv)
    lift = np.einsum("...ik,k->...i", H.xi, w)
    I = np.eye(H.f0.shape[-1])
    Mt = I + t * bf.Omega
    Ou, Ov = bf.dOmega
    cols = []
    for base, dxi, dO in ((H.f0u, xiu, Ou), (H.f0v, xiv, Ov)):
        y = base + np.einsum("...ik,k->...i", dxi, w)
        cols.append(np.einsum("...ij,...j->...i", Mt, y) + t * np.einsum("...ij,...j->...i", dO, lift))
    D = np.concatenate([cols[0][..., None], cols[1][..., None], Mt @ H.xi], axis=-1)
    return _kernel_normal(D, H.N)


def nullity_inclusion(H, bf, t, th=DEFAULT):
    """max |dN_t(xi_k)| / max |dN_t| with N_t from stencil differentials on w-slices.

    N_t comes from the pushforward on each slice (see normal_t_slice); the fiber
    derivative is the central difference between the slices w = +-delta e_k
    (delta = w_max / 2) and dN_t(d_u), dN_t(d_v) use grid stencils.  Also returns the decomposition check
    (I - t L0) Z_t = t b Y with N_t = f_* Z_t + b N.
    """
    g = H.grid
    k = H.n - 2
    delta = 0.5 * H.w_max
    xd = (H.xiu, H.xiv)
    N0 = normal_t_slice(H, bf, t, np.zeros(k), xd)
    mask = g.interior_mask() & H.regular
    dNu, dNv = diff_array(N0, g, "u"), diff_array(N0, g, "v")
    ref = np.maximum(np.linalg.norm(dNu, axis=-1), np.linalg.norm(dNv, axis=-1))
    worst = 0.0
    for s in range(k):
        e = np.zeros(k)
        e[s] = delta
        dxi = (normal_t_slice(H, bf, t, e, xd) - normal_t_slice(H, bf, t, -e, xd)) / (2 * delta)
        worst = max(worst, float(np.max(np.linalg.norm(dxi, axis=-1)[mask])))
    inclusion = worst / max(float(np.max(ref[mask])), NORM_FLOOR)
    # decomposition N_t = f_* Z + b N and (I - t L0) Z = t b Y
    N = H.N
    b = np.einsum("...i,...i", N0, N)
    Gm = H.metric()
    Fm = H.frame
    Z = masked_solve(Gm, np.einsum("...ai,...a->...i", Fm, N0 - b[..., None] * N)[..., None], H.regular)[..., 0]
    L0 = masked_solve(Gm, np.swapaxes(Fm, -1, -2) @ bf.P, H.regular)
    lhs = Z - t * np.einsum("...ij,...j->...i", L0, Z)
    rhs = t * b[..., None] * bf.Y
    gn = lambda x: np.sqrt(np.abs(np.einsum("...i,...ij,...j", x, Gm, x)))
    # at t = 0 both sides vanish and N_t = N, so Z is measured absolutely (N is a unit field)
    scale = max(float(np.max(gn(rhs)[mask])), abs(t) * float(np.max(gn(bf.Y)[mask]))) if t != 0 else 1.0
    scale = max(scale, NORM_FLOOR)
    decomposition = float(np.max(gn(lhs - rhs)[mask])) / scale
    return {"inclusion": inclusion, "decomposition": decomposition,
            "b_min": float(np.min(b)), "N_t": N0}


# -- the Gauss surface g_t ------------------------------------------------------------------

def omega_two_jet(H, bf):
    """Second-order jet of Omega: value integrated, derivatives from the bending 1-forms."""
    Wu, Wv = omega_jet(H, bf.sigma)
    return J.Jet(bf.Omega, Wu.val, Wv.val, Wu.du, 0.5 * (Wu.dv + Wv.du), Wv.dv)


def gauss_surface_t(H, bf, t, Oj=None):
    """g_t = normalize((I - t Omega)^{-1} h) as a second-order jet, packaged as a pair."""
    Oj = omega_two_jet(H, bf) if Oj is None else Oj
    n1 = H.f0.shape[-1]
    M = J.Jet.constant(np.broadcast_to(np.eye(n1), Oj.val.shape)) - J.scale(J.Jet.constant(np.full(H.grid.shape, t)), Oj)
    q = J.matvec(J.inv(M), H.pair.g_jet)
    gj = J.normalize(q)
    hu, hv = gj.du, gj.dv
    E = np.einsum("...i,...i", hu, hu)
    F = np.einsum("...i,...i", hu, hv)
    G = np.einsum("...i,...i", hv, hv)
    gamma = np.einsum("...i,...i", H.f0 + t * bf.T, gj.val)
    return GaussPair(H.kind, H.grid, gj.val, gamma, E, F, G, gj, None)


def J_t_extraction(H, bf, t, kind0):
    """Splitting tensor of the nullity in the metric of f_t, fitted to span{I, J_t}."""
    I = np.eye(H.f0.shape[-1])
    k = H.n - 2
    Mt = I + t * bf.Omega
    Ou, Ov = bf.dOmega
    frames = []
    for s in range(k):
        x = H.xi[..., s]
        frames.append(tuple(t * np.einsum("...ij,...j->...i", dO, x) + np.einsum("...ij,...j->...i", Mt, dx[..., s])
                            for dO, dx in ((Ou, H.xiu), (Ov, H.xiv))))
    Fp = (I + t * bf.Omega) @ H.frame
    C = splitting_grid_route(H, frame=frames, metric_frame=Fp)
    Jt, a, b, tag, span = fit_span(C, H.regular)
    if tag != kind0:
        raise TypeFlip(f"J_t changed type from {kind0} to {tag} at t = {t:.4g}", t=t)
    Jsq = np.einsum("...ij,...jk->...ik", Jt, Jt)
    sgn = 1.0 if tag == "hyperbolic" else -1.0
    sq_dev = float(np.max(np.abs(Jsq - sgn * np.eye(2))[H.regular]))
    return Jt, {"type": tag, "span_res": span, "square_dev": sq_dev}


def unit_frames_t(kind, Jt, pair_t, th=DEFAULT):
    E, F, G = pair_t.E, pair_t.F, pair_t.G
    info = {}
    if kind == "hyperbolic":
        off = np.abs(Jt - np.eye(2)).max(axis=(-1, -2)) * np.abs(Jt + np.eye(2)).max(axis=(-1, -2))
        if np.min(off) <= th.guard:
            raise EigenDegeneracy("J_t is +-I at some node")
        U, V = hyperbolic_frames(Jt, E, F, G)
    else:
        mr = minimality_ratio(pair_t, "jet")
        info["minimality_ratio"] = mr
        if mr < th.minimality:
            raise MinimalSurfaceGuard(f"g_t is (nearly) minimal: ratio {mr:.3e}", ratio=mr)
        U, V, q = elliptic_frames(Jt, E, F, G)
        info["discriminant_min"] = q["discriminant_min"]
        info["quadratic_res"] = q["quadratic_res"]
    return U, V, info


# -- congruence --------------------------------------------------------------------------------

def second_form_t(H, frame_t, N_t_jet):
    """Lowered second fundamental form of f_t in the frame E: -<f_t* X, dN_t(Y)>."""
    dN = np.zeros_like(frame_t)
    dN[..., 0], dN[..., 1] = N_t_jet.du, N_t_jet.dv
    II = -np.swapaxes(frame_t, -1, -2) @ dN
    return 0.5 * (II + np.swapaxes(II, -1, -2))


def congruence(H, bf, t, gp, gm):
    """Separation of f_t and f_{-t}: min over signs of max |II_t - s II_{-t}|, over t |beta|.

    The two immersions share the first fundamental form exactly, so
    congruence would force II_t = +-II_{-t}.  Lowered forms are used; they
    stay smooth through singular curves of the hypersurface.
    """
    I = np.eye(H.f0.shape[-1])
    IIp = second_form_t(H, (I + t * bf.Omega) @ H.frame, gp.g_jet)
    IIm = second_form_t(H, (I - t * bf.Omega) @ H.frame, gm.g_jet)
    mask = H.grid.interior_mask()
    fro = lambda x: np.sqrt(np.sum(x**2, axis=(-1, -2)))[mask]
    minus = float(np.max(fro(IIp - IIm)))
    plus = float(np.max(fro(IIp + IIm)))
    bnorm = float(np.max(fro(bf.B.beta)))
    sep = min(minus, plus)
    return {"separation": sep, "minus": minus, "plus": plus,
            "c_obs": sep / max(abs(t) * bnorm, NORM_FLOOR) if t != 0 else 0.0}


# -- certificate -------------------------------------------------------------------------------

@dataclass
class CertificateRow:
    t: float
    fraction: float
    values: dict
    clauses: dict
    verdict: str

    def to_dict(self):
        return {"t": self.t, "fraction": self.fraction, "values": self.values,
                "clauses": self.clauses, "verdict": self.verdict}


@dataclass
class DeformationCertificate:
    kind: str
    h: float
    t_max: float
    thresholds: dict
    hypothesis: dict
    rows: list = field(default_factory=list)
    verdict: str = VERDICT_FAIL

    def first_failure(self):
        if not self.hypothesis.get("passed", False):
            return ("hypothesis", None)
        for row in self.rows:
            for name, ok in row.clauses.items():
                if not ok:
                    return (name, row.t)
        return None

    def to_dict(self):
        return {"kind": self.kind, "h": self.h, "t_max": self.t_max, "thresholds": self.thresholds,
                "hypothesis": self.hypothesis, "rows": [r.to_dict() for r in self.rows],
                "verdict": self.verdict}

    def raise_on_failure(self):
        fail = self.first_failure()
        if fail is not None:
            clause, t = fail
            raise CertificateFailure(f"clause {clause} failed at t = {t}", clause=clause, t=t)


def _row(H, bf, t, frac, tmax, kind0, Oj, th):
    g = H.grid
    ceiling = th.ceiling(g.h)
    d = deform(H, bf, t, tmax, th)
    ni = nullity_inclusion(H, bf, t, th)
    gp = gauss_surface_t(H, bf, t, Oj)
    gm = gauss_surface_t(H, bf, -t, Oj)
    if ni["inclusion"] > ceiling:
        raise LeafConstancyViolation(f"dN_t(xi) residual {ni['inclusion']:.3e} above ceiling", t=t)
    orient = float(np.min(np.einsum("...i,...i", gp.g, H.N)))
    Jt, jinfo = J_t_extraction(H, bf, t, kind0)
    Jt_f = np.where(H.regular[..., None, None], Jt, Jt[tuple(np.argwhere(H.regular)[0])])
    U, V, finfo = unit_frames_t(kind0, Jt_f, gp, th)
    chris = levi_civita(gp.g_jet.du, gp.g_jet.dv, gp.g_jet.duu, gp.g_jet.duv, gp.g_jet.dvv)
    fd = frame_lambdas(kind0, g, chris, gp.E, gp.F, gp.G, U, V, th)
    rep = frame_species(fd, th)
    cong = congruence(H, bf, t, gp, gm)
    values = {
        "immersion_margin": d.margin,
        "metric_pair": d.metric_pair,
        "first_order_isometry": d.first_order,
        "nullity_inclusion": ni["inclusion"],
        "decomposition": ni["decomposition"],
        "orientation_min": orient,
        "g_t_distance": float(np.max(np.linalg.norm(gp.g - H.N, axis=-1))),
        "J_t_type": jinfo["type"],
        "J_t_span_res": jinfo["span_res"],
        "J_t_square_dev": jinfo["square_dev"],
        "special_pair_res": rep.special_pair_res,
        "first_species_res": rep.first_species_res,
        "coverage": rep.guarded_coverage,
        "system_res": max(rep.system_res),
        "frame_structure_res": fd.structure_res,
        "frame_unit_dev": fd.unit_dev,
        "congruence_separation": cong["separation"],
        "congruence_c": cong["c_obs"],
        "species_verdict": rep.verdict,
        "ceiling": ceiling,
    }
    values.update({k: v for k, v in rep.stats.items() if not isinstance(v, np.ndarray)})
    values.update(finfo)
    clauses = {
        "a_first_species": rep.first_species_res >= th.floor,
        "e_metric_pair": d.metric_pair <= th.metric_pair_tol,
        "nullity_inclusion": ni["inclusion"] <= ceiling,
        "decomposition": ni["decomposition"] <= ceiling if t != 0 else True,
        "type_constant": jinfo["type"] == kind0,
        "orientation": orient > 0,
    }
    if kind0 == "hyperbolic":
        second = (values.get("tau_min", -1) > 0 and values.get("tau_margin_fraction", 0) >= th.coverage
                  and values["system_res"] <= ceiling)
    else:
        second = (values.get("rho_unit_dev", 1) <= th.unit_tol and values.get("rho_im_min", 0) >= th.rho_margin
                  and values["system_res"] <= ceiling)
    if t == 0:
        clauses["c_special_at_zero"] = rep.special_pair_res <= ceiling
    else:
        clauses["b_second_species"] = bool(second)
        clauses["c_not_special"] = rep.special_pair_res >= th.floor
        clauses["d_congruence"] = cong["c_obs"] >= th.congruence_c
    if kind0 == "elliptic":
        clauses["minimality_guard"] = finfo["minimality_ratio"] >= th.minimality
    verdict = "pass" if all(clauses.values()) else "fail"
    return CertificateRow(float(t), float(frac), values, {k: bool(v) for k, v in clauses.items()}, verdict)


def hypothesis_gate(report, th=DEFAULT):
    """The deformation result needs f outside the continuous class: first-species residual of g at t = 0 >= floor."""
    return {"first_species_res": report.first_species_res, "verdict_t0": report.verdict,
            "passed": bool(report.first_species_res >= th.floor)}


def workers_default():
    env = os.environ.get("SCFORGE_WORKERS")
    if env:
        return max(1, int(env))
    return max(1, os.cpu_count() or 1)


def certify(H, bf, fractions, report0, th=DEFAULT, workers=None, include_zero=True):
    """Certificate rows for t = fraction * t_max (and t = 0); rows run concurrently."""
    tm = t_max(H, bf)
    hyp = hypothesis_gate(report0, th)
    cert = DeformationCertificate(H.kind, H.grid.h, tm, th.as_dict(), hyp)
    if not hyp["passed"]:
        return cert
    Oj = omega_two_jet(H, bf)
    fr = ([0.0] if include_zero else []) + [float(f) for f in fractions]
    workers = workers_default() if workers is None else workers
    job = lambda f: _row(H, bf, f * tm, f, tm, H.kind, Oj, th)
    if workers > 1 and len(fr) > 1:
        with ThreadPoolExecutor(max_workers=min(workers, len(fr))) as pool:
            cert.rows = list(pool.map(job, fr))
    else:
        cert.rows = [job(f) for f in fr]
    cert.verdict = VERDICT_OK if cert.first_failure() is None else VERDICT_FAIL
    return cert


__all__ = ["t_max", "deform", "nullity_inclusion", "gauss_surface_t", "J_t_extraction", "unit_frames_t",
           "congruence", "certify", "hypothesis_gate", "DeformationCertificate", "CertificateRow",
           "VERDICT_OK", "VERDICT_FAIL", "FIRST", "SECOND", "SPECIAL"]
