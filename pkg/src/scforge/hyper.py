"""The hypersurface of a Gauss pair and its extrinsic data.

The Gauss parametrization is psi(x, w) = gamma h + h_* grad gamma + sum_k w_k xi_k
with h = g viewed in R^{n+1} and xi_1, ..., xi_{n-2} an orthonormal frame of
the normal bundle of g in the sphere.  All extrinsic analysis happens on the
cross-section f0 = psi(., 0); the frame E = {d_u, d_v, xi_1, ...} of the
hypersurface is represented by the (n+1) x n matrix Fm = [f0_u, f0_v, xi].
"""

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from . import jet as J
from .errors import AllProportionalToIdentity, FrameDiscontinuity, RankDeviation, SingularPoint, SpanViolation
from .grid import diff_array, residual_stats
from .surfgeo import NORM_FLOOR

CANONICAL_J = {
    "hyperbolic": np.array([[1.0, 0.0], [0.0, -1.0]]),
    "elliptic": np.array([[0.0, -1.0], [1.0, 0.0]]),
}


@dataclass
class Hypersurface:
    pair: object
    n: int
    f0: np.ndarray          # (nu, nv, n+1)
    f0u: np.ndarray
    f0v: np.ndarray
    xi: np.ndarray          # (nu, nv, n+1, n-2), orthonormal columns
    frame: np.ndarray       # Fm = [f0_u, f0_v, xi] : (nu, nv, n+1, n)
    dN: np.ndarray          # [h_u, h_v, 0, ...] : (nu, nv, n+1, n)
    w_max: float
    regular: np.ndarray     # bool mask of regular nodes
    A: np.ndarray = field(default=None, repr=False)        # (nu, nv, n, n)
    II: np.ndarray = field(default=None, repr=False)       # lowered, symmetric
    shape_info: dict = field(default_factory=dict)
    xiu: np.ndarray = field(default=None, repr=False)      # exact d xi / du
    xiv: np.ndarray = field(default=None, repr=False)

    @property
    def grid(self):
        return self.pair.grid

    @property
    def kind(self):
        return self.pair.kind

    @property
    def N(self):
        return self.pair.g

    def metric(self):
        Fm = self.frame
        return np.swapaxes(Fm, -1, -2) @ Fm

    def psi(self, w):
        """Points psi(x, w) for a fiber coordinate vector w of length n - 2."""
        return self.f0 + np.einsum("...ik,k->...i", self.xi, np.asarray(w, dtype=float))


@dataclass
class SplitData:
    C: np.ndarray            # (nu, nv, n-2, 2, 2): C_{xi_k} on (d_u, d_v), columns are images
    J: np.ndarray            # (nu, nv, 2, 2)
    a: np.ndarray            # (nu, nv, n-2)
    b: np.ndarray
    type_tag: str            # "hyperbolic" (J^2 = I) or "elliptic" (J^2 = -I)
    span_res: float
    canonical_dev: float
    fd_route_dev: float = float("nan")


def masked_solve(M, b, mask):
    """Solve M x = b nodewise; nodes outside ``mask`` use the pseudo-inverse."""
    eye = np.eye(M.shape[-1])
    safe = np.where(mask[..., None, None], M, eye)
    x = np.linalg.solve(safe, b)
    if np.all(mask):
        return x
    return np.where(mask[..., None, None], x, np.linalg.pinv(M) @ b)


def _projector_jet(gj):
    """Projector onto span{h, h_u, h_v}^perp with its exact first derivatives."""
    h = gj.truncate(1)
    hu, hv = gj.shift("u"), gj.shift("v")
    basis = []
    for x in (h, hu, hv):
        for e in basis:
            x = x - J.scale(J.dot(x, e), e)
        basis.append(J.normalize(x))
    n1 = h.val.shape[-1]
    P = [np.broadcast_to(np.eye(n1), h.val.shape + (n1,)).copy(), 0.0, 0.0]
    for e in basis:
        P[0] -= e.val[..., :, None] * e.val[..., None, :]
        P[1] -= e.du[..., :, None] * e.val[..., None, :] + e.val[..., :, None] * e.du[..., None, :]
        P[2] -= e.dv[..., :, None] * e.val[..., None, :] + e.val[..., :, None] * e.dv[..., None, :]
    return P


def _unit_normal_frame(gj):
    """Orthonormal frame of span{h, h_u, h_v}^perp, smooth across the grid.

    Returns the frame and its exact u and v derivatives.
    """
    P, Pu, Pv = _projector_jet(gj)
    n1 = P.shape[-1]
    k = n1 - 3
    # choose the k standard vectors whose projections stay best conditioned everywhere
    best, best_sel = -1.0, None
    for sel in combinations(range(n1), k):
        s = np.linalg.svd(P[..., list(sel)], compute_uv=False)[..., -1]
        score = float(np.min(s))
        if score > best:
            best, best_sel = score, sel
    if best < 1e-3:
        raise FrameDiscontinuity("no fixed reference frame projects regularly onto the normal bundle",
                                 min_singular_value=best)
    sel = list(best_sel)
    X = P[..., sel]
    # symmetric orthonormalization X (X^T X)^{-1/2} is smooth in the data
    G = np.swapaxes(X, -1, -2) @ X
    wv, V = np.linalg.eigh(G)
    Vt = np.swapaxes(V, -1, -2)
    s = 1.0 / np.sqrt(wv)
    S = V @ (Vt * s[..., :, None])
    Ginv = V @ (Vt / wv[..., :, None])
    out = [X @ S]
    for dP in (Pu, Pv):
        dX = dP[..., sel]
        dG = np.swapaxes(dX, -1, -2) @ X + np.swapaxes(X, -1, -2) @ dX
        # S^2 = G^{-1}: S dS + dS S = -G^{-1} dG G^{-1}, diagonal in the eigenbasis of G
        rhs = Vt @ (-Ginv @ dG @ Ginv) @ V
        dS = V @ (rhs / (s[..., :, None] + s[..., None, :])) @ Vt
        out.append(dX @ S + X @ dS)
    return tuple(out)


def cross_section_jet(pair):
    """First-order jet of f0 = gamma h + h_* grad gamma."""
    g, y = pair.g_jet, pair.gamma_jet
    h = g.truncate(1)
    hu, hv = g.shift("u"), g.shift("v")
    yu, yv = y.shift("u"), y.shift("v")
    E, F, G = J.dot(hu, hu), J.dot(hu, hv), J.dot(hv, hv)
    inv_det = J.reciprocal(E * G - F * F)
    a = (G * yu - F * yv) * inv_det
    b = (E * yv - F * yu) * inv_det
    return J.scale(y.truncate(1), h) + J.scale(a, hu) + J.scale(b, hv)


def build(pair, w_max=0.2, margin=1e-3):
    """Sample the Gauss parametrization and its frame; flag singular nodes.

    A node is regular when the smallest singular value of d psi exceeds
    ``margin`` times the largest one at w = 0 and at the fiber box corners.
    """
    n = pair.n
    gj = pair.g_jet
    f0 = cross_section_jet(pair)
    xi, xiu, xiv = _unit_normal_frame(gj)
    Fm = np.concatenate([f0.du[..., None], f0.dv[..., None], xi], axis=-1)
    dN = np.zeros_like(Fm)
    dN[..., 0], dN[..., 1] = gj.du, gj.dv
    regular = _regular_nodes(Fm, xiu, xiv, w_max, margin)
    H = Hypersurface(pair, n, f0.val, f0.du, f0.dv, xi, Fm, dN, float(w_max), regular, xiu=xiu, xiv=xiv)
    shape_operator(H)
    return H


def _regular_nodes(Fm, xiu, xiv, w_max, margin):
    k = xiu.shape[-1]
    ok = np.ones(Fm.shape[:-2], dtype=bool)
    samples = [np.zeros(k)]
    for s in range(k):
        for sign in (-1.0, 1.0):
            w = np.zeros(k)
            w[s] = sign * w_max
            samples.append(w)
    for w in samples:
        D = Fm.copy()
        D[..., 0] = Fm[..., 0] + xiu @ w
        D[..., 1] = Fm[..., 1] + xiv @ w
        s = np.linalg.svd(D, compute_uv=False)
        ok &= s[..., -1] > margin * s[..., 0]
    return ok


def require_regular(H, fraction=0.95):
    frac = float(np.mean(H.regular))
    if frac < fraction:
        bad = np.argwhere(~H.regular)[:10]
        raise SingularPoint(f"only {frac:.1%} of nodes are regular for w_max = {H.w_max}",
                            nodes=[tuple(int(x) for x in b) for b in bad])
    return frac


def shape_operator(H, kernel_guard=1e-8):
    """A in the frame E from f_*(A X) = -dN(X), symmetrized in the induced metric."""
    Fm = H.frame
    Gm = np.swapaxes(Fm, -1, -2) @ Fm
    raw = -np.swapaxes(Fm, -1, -2) @ H.dN            # lowered second fundamental form
    asym = 0.5 * (raw - np.swapaxes(raw, -1, -2))
    II = 0.5 * (raw + np.swapaxes(raw, -1, -2))
    # singular nodes of the cross-section get the pseudo-inverse and stay out of statistics
    reg = H.regular
    eye = np.eye(H.n)
    Gsafe = np.where(reg[..., None, None], Gm, eye)
    A = np.where(reg[..., None, None], np.linalg.solve(Gsafe, II), np.linalg.pinv(Gm) @ II)
    # principal curvatures from the symmetric pencil (II, Gm)
    Li = np.linalg.inv(np.linalg.cholesky(Gsafe))
    S = Li @ II @ np.swapaxes(Li, -1, -2)
    lam = np.linalg.eigvalsh(S)
    scale = np.max(np.abs(lam), axis=-1)
    null_count = np.sum(np.abs(lam) <= kernel_guard * scale[..., None], axis=-1)
    if np.any((null_count != H.n - 2) & reg):
        bad = np.argwhere((null_count != H.n - 2) & reg)[:10]
        raise RankDeviation("shape operator kernel dimension differs from n - 2",
                            nodes=[tuple(int(x) for x in b) for b in bad])
    order = np.argsort(np.abs(lam), axis=-1)
    top = np.take_along_axis(lam, order[..., -2:], axis=-1)[reg]
    product = top[..., 0] * top[..., 1]
    Axi = np.einsum("...ij,...jk->...ik", A, eye[:, 2:])[reg]
    norm_A = np.sqrt(np.sum(A[reg] ** 2, axis=(-1, -2)))
    nonzero = lam[reg]
    if H.kind == "hyperbolic":
        conj = np.abs(II[..., 0, 1]) / np.sqrt(np.abs(II[..., 0, 0] * II[..., 1, 1]) + NORM_FLOOR)
    else:
        conj = np.abs(II[..., 0, 0] + II[..., 1, 1]) / (np.abs(II[..., 0, 0]) + np.abs(II[..., 1, 1]) + NORM_FLOOR)
    H.A, H.II = A, II
    H.shape_info = {
        "kernel_dim": int(H.n - 2),
        "null_direction_res": float(np.max(np.sqrt(np.sum(Axi**2, axis=(-1, -2))) / norm_A)),
        "lowered_asymmetry": float(np.max(np.abs(asym)) / np.max(np.abs(II))),
        "curvature_product_sign": _sign_summary(product),
        "min_principal_ratio": float(np.min(np.abs(top[..., 0]) / scale[reg])),
        "conjugacy_transfer": float(np.nanmax(H.grid.interior(np.where(reg, conj, np.nan)))),
        "eigenvalues_extreme": [float(np.min(nonzero)), float(np.max(nonzero))],
        "singular_nodes": [tuple(int(x) for x in b) for b in np.argwhere(~reg)[:10]],
    }
    return A


def _sign_summary(x):
    pos, neg = int(np.sum(x > 0)), int(np.sum(x < 0))
    if neg == 0:
        return "positive"
    if pos == 0:
        return "negative"
    return "mixed"


def gauss_map_residual(H, route="grid"):
    """max |<h, d psi(X)>| over frame X, normalized by |d psi|; w = 0 and the box corners."""
    g = H.grid
    h = H.N
    if route == "grid":
        f0u, f0v = diff_array(H.f0, g, "u"), diff_array(H.f0, g, "v")
        xiu, xiv = diff_array(H.xi, g, "u"), diff_array(H.xi, g, "v")
    else:
        f0u, f0v = H.f0u, H.f0v
        xiu, xiv = H.xiu, H.xiv
    k = H.n - 2
    worst = 0.0
    for w in [np.zeros(k), np.full(k, H.w_max), np.full(k, -H.w_max)]:
        pu = f0u + xiu @ w
        pv = f0v + xiv @ w
        scale = max(float(np.max(np.linalg.norm(pu, axis=-1))), float(np.max(np.linalg.norm(pv, axis=-1))))
        r = np.maximum(np.abs(np.einsum("...i,...i", h, pu)), np.abs(np.einsum("...i,...i", h, pv)))
        worst = max(worst, float(np.max(g.interior(r))) / scale)
    return worst


def envelope_check(H, seed, route="grid", samples=2, rng_seed=7):
    """Residuals of G = G_u = G_v = 0 with G = <phi, x> - phi_0, at w = 0 and random w.

    The grid route rebuilds f0 from the sampled h and gamma with stencils and
    differentiates phi with stencils; the jet route uses the exact data.
    """
    g = H.grid
    phi = seed.phi[..., 1:]
    p0 = seed.phi[..., 0]
    if route == "grid":
        f0 = _f0_from_samples(H.pair)
        pu, pv = diff_array(phi, g, "u"), diff_array(phi, g, "v")
        p0u, p0v = diff_array(p0, g, "u"), diff_array(p0, g, "v")
    else:
        f0 = H.f0
        mj = seed.map_jet
        pu, pv, p0u, p0v = mj.du, mj.dv, seed.support_jet.du, seed.support_jet.dv
    rng = np.random.default_rng(rng_seed)
    k = H.n - 2
    ws = [np.zeros(k)] + [rng.uniform(-H.w_max, H.w_max, size=k) for _ in range(samples)]
    out = {"G": 0.0, "G_u": 0.0, "G_v": 0.0}
    for w in ws:
        x = f0 + np.einsum("...ik,k->...i", H.xi, w)
        for key, a, b in (("G", phi, p0), ("G_u", pu, p0u), ("G_v", pv, p0v)):
            r = np.einsum("...i,...i", a, x) - b
            scale = max(float(np.max(np.abs(b))), float(np.max(np.linalg.norm(a, axis=-1)
                                                                 * np.linalg.norm(x, axis=-1))))
            out[key] = max(out[key], float(np.max(g.interior(np.abs(r)))) / scale)
    out["max"] = max(out["G"], out["G_u"], out["G_v"])
    return out


def _f0_from_samples(pair):
    g = pair.grid
    h, y = pair.g, pair.gamma
    hu, hv = diff_array(h, g, "u"), diff_array(h, g, "v")
    yu, yv = diff_array(y, g, "u"), diff_array(y, g, "v")
    E = np.einsum("...i,...i", hu, hu)
    F = np.einsum("...i,...i", hu, hv)
    G = np.einsum("...i,...i", hv, hv)
    det = E * G - F * F
    a = (G * yu - F * yv) / det
    b = (E * yv - F * yu) / det
    return y[..., None] * h + a[..., None] * hu + b[..., None] * hv


def splitting(H, ceiling=None):
    """Splitting tensor C_{xi_k} on (d_u, d_v), the tensor J and the span fit.

    C_{xi} d_j = Mfh^{-1} (<xi, h_uj>, <xi, h_vj>) with Mfh_{im} = <h_i, f0_m>;
    the grid route (stencil derivatives of xi) is reported as a cross-check.
    """
    gj = H.pair.g_jet
    g = H.grid
    hij = {(0, 0): gj.duu, (0, 1): gj.duv, (1, 0): gj.duv, (1, 1): gj.dvv}
    hi = (gj.du, gj.dv)
    fj = (H.f0u, H.f0v)
    Mfh = np.empty(g.shape + (2, 2))
    for i in range(2):
        for m in range(2):
            Mfh[..., i, m] = np.einsum("...a,...a", hi[i], fj[m])
    k = H.n - 2
    C = np.empty(g.shape + (k, 2, 2))
    for s in range(k):
        x = H.xi[..., s]
        R = np.empty(g.shape + (2, 2))
        for i in range(2):
            for j in range(2):
                R[..., i, j] = np.einsum("...a,...a", x, hij[(i, j)])
        C[..., s, :, :] = masked_solve(Mfh, R, H.regular)
    Jm, a, b, tag, span = fit_span(C, H.regular)
    inner = g.interior(H.regular)
    Cfd = splitting_grid_route(H)
    fd_dev = float(np.max(g.interior(np.abs(Cfd - C))[inner]) / np.max(np.abs(g.interior(C)[inner])))
    canonical_dev = float(np.max(np.abs(Jm - CANONICAL_J[tag])[H.regular]))
    if ceiling is not None and span > ceiling:
        raise SpanViolation(f"splitting tensor leaves span(I, J): residual {span:.3e}", residual=span)
    return SplitData(C, Jm, a, b, tag, span, canonical_dev, fd_dev)


def splitting_grid_route(H, frame=None, metric_frame=None):
    """C_{xi} d_j = -(tangential part of d_j xi) in (d_u, d_v) coordinates, by stencils.

    ``metric_frame`` (the pushforward frame of a deformed immersion) and
    ``frame`` (the matching images of d_j xi) allow the same computation
    for f_t.
    """
    g = H.grid
    Fm = H.frame if metric_frame is None else metric_frame
    Gm = np.swapaxes(Fm, -1, -2) @ Fm
    k = H.n - 2
    C = np.empty(g.shape + (k, 2, 2))
    for s in range(k):
        for j, w in enumerate(("u", "v")):
            d = diff_array(H.xi[..., s], g, w) if frame is None else frame[s][j]
            c = masked_solve(Gm, np.einsum("...ai,...a->...i", Fm, d)[..., None], H.regular)[..., 0]
            C[..., s, :, j] = -c[..., :2]
    return C


def fit_span(C, mask=None):
    """Fit C_k = a_k I + b_k J with J^2 = +-I normalized; returns (J, a, b, tag, residual).

    The span residual is the largest nodewise misfit relative to the nodewise
    size of the splitting tensors, over the nodes in ``mask``.
    """
    mask = np.ones(C.shape[:2], dtype=bool) if mask is None else mask
    tr = 0.5 * (C[..., 0, 0] + C[..., 1, 1])
    C0 = C - tr[..., None, None] * np.eye(2)
    norms = np.sqrt(np.sum(C0**2, axis=(-1, -2)))
    cnorm = np.sqrt(np.sum(C**2, axis=(-1, -2, -3)))
    dom = np.argmax(np.max(norms[mask], axis=0))
    D = C0[..., dom, :, :]
    if np.max(norms[mask]) <= NORM_FLOOR * max(1.0, float(np.max(cnorm[mask]))):
        raise AllProportionalToIdentity("every splitting tensor is a multiple of the identity")
    det = D[..., 0, 0] * D[..., 1, 1] - D[..., 0, 1] * D[..., 1, 0]
    neg = np.mean(det[mask] < 0)
    tag = "hyperbolic" if neg >= 0.5 else "elliptic"
    Jm = D / np.sqrt(np.maximum(np.abs(det), NORM_FLOOR))[..., None, None]
    if tag == "hyperbolic":
        # the +1 eigendirection closest to d_u: J d_u has a positive d_u component
        flip = Jm[..., 0, 0] < 0
    else:
        # (d_u, J d_u) positively oriented
        flip = Jm[..., 1, 0] < 0
    Jm = np.where(flip[..., None, None], -Jm, Jm)
    bk = np.einsum("...kij,...ij->...k", C0, Jm) / 2.0
    fit = C0 - bk[..., None, None] * Jm[..., None, :, :]
    misfit = np.sqrt(np.sum(fit**2, axis=(-1, -2, -3))) / np.maximum(cnorm, NORM_FLOOR)
    span = float(np.max(misfit[mask]))
    if float(np.max(np.abs(bk[mask]))) <= 1e-8 * float(np.max(cnorm[mask])):
        raise AllProportionalToIdentity("splitting tensors are proportional to the identity")
    return Jm, tr, bk, tag, span


def shape_summary(H):
    return dict(H.shape_info, regular_fraction=float(np.mean(H.regular)))


def straightness_residual(H, w):
    """psi(x, w) - psi(x, 0) - sum w_k xi_k (zero by construction)."""
    d = H.psi(w) - H.f0 - np.einsum("...ik,k->...i", H.xi, np.asarray(w, dtype=float))
    return float(np.max(np.abs(d)))


def stats(values, grid):
    return residual_stats(values, grid)
