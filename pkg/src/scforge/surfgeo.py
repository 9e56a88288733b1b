"""Geometry of the spherical surface g: metric, Christoffel data, conjugacy.

Two routes are offered for every quantity.  The ``"jet"`` route uses the
exact second-order jets carried by the pair (exact to rounding for analytic
seeds); the ``"grid"`` route recomputes everything from the sampled fields
with finite differences.  Construction uses jets; verification residuals use
the grid route so that they expose the O(h^2) discretization error.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateMetric
from .grid import complex_diff_array, diff_array, residual_stats

NORM_FLOOR = 1e-12


@dataclass
class ChristoffelReal:
    """Mixed symbols of a hyperbolic pair: nabla_{d_u} d_v = G1 d_u + G2 d_v."""
    grid: object
    G1: np.ndarray
    G2: np.ndarray
    F: np.ndarray
    E: np.ndarray
    G: np.ndarray


@dataclass
class ChristoffelComplex:
    """Complex symbol of an elliptic pair: nabla_{d_z} d_zbar = Gamma d_z + conj(Gamma) d_zbar."""
    grid: object
    Gamma: np.ndarray
    Fz: np.ndarray


def _dot(a, b):
    return np.einsum("...i,...i->...", a, b)


def derivatives(pair, route="jet"):
    """(h, h_u, h_v, h_uu, h_uv, h_vv) for the chosen route."""
    if route == "jet":
        j = pair.g_jet
        return j.val, j.du, j.dv, j.duu, j.duv, j.dvv
    if route == "grid":
        h = pair.g
        return (h,) + tuple(diff_array(h, pair.grid, w) for w in ("u", "v", "uu", "uv", "vv"))
    raise ValueError(f"unknown route {route!r}")


def support_derivatives(pair, route="jet"):
    if route == "jet":
        j = pair.gamma_jet
        return j.val, j.du, j.dv, j.duu, j.duv, j.dvv
    y = pair.gamma
    return (y,) + tuple(diff_array(y, pair.grid, w) for w in ("u", "v", "uu", "uv", "vv"))


def metric(hu, hv):
    E, F, G = _dot(hu, hu), _dot(hu, hv), _dot(hv, hv)
    det = E * G - F * F
    if np.any(det <= NORM_FLOOR * (E + G) ** 2):
        raise DegenerateMetric("metric of g is degenerate at some node",
                               nodes=int(np.count_nonzero(det <= 0)))
    return E, F, G, det


def _solve_gram(E, F, G, det, a, b):
    """Solve [[E, F], [F, G]] x = (a, b) nodewise."""
    return (G * a - F * b) / det, (E * b - F * a) / det


def levi_civita(hu, hv, huu, huv, hvv):
    """All symbols Gamma[k, i, j] (shape (..., 2, 2, 2)) from ambient derivatives."""
    E, F, G, det = metric(hu, hv)
    first = {(0, 0): huu, (0, 1): huv, (1, 0): huv, (1, 1): hvv}
    out = np.empty(E.shape + (2, 2, 2))
    for (i, j), hij in first.items():
        a, b = _solve_gram(E, F, G, det, _dot(hij, hu), _dot(hij, hv))
        out[..., 0, i, j] = a
        out[..., 1, i, j] = b
    return out


def christoffel_real(pair, route="jet"):
    """Gamma^1, Gamma^2 from the metric by the Levi-Civita formulas.

    For the mixed pair, Gamma^k_{uv} = g^{kl} (d_u g_{lv} + d_v g_{lu} - d_l g_{uv}) / 2
    reduces to (Gamma^1, Gamma^2) = Gram^{-1} (E_v, G_u) / 2.
    """
    h, hu, hv, huu, huv, hvv = derivatives(pair, route)
    E, F, G, det = metric(hu, hv)
    if route == "jet":
        Ev, Gu = 2 * _dot(huv, hu), 2 * _dot(huv, hv)
    else:
        Ev, Gu = diff_array(E, pair.grid, "v"), diff_array(G, pair.grid, "u")
    G1, G2 = _solve_gram(E, F, G, det, 0.5 * Ev, 0.5 * Gu)
    return ChristoffelReal(pair.grid, G1, G2, F, E, G)


def christoffel_complex(pair, route="jet"):
    """Gamma = (P + iQ)/4 where P d_u + Q d_v = nabla_{d_u} d_u + nabla_{d_v} d_v."""
    h, hu, hv, huu, huv, hvv = derivatives(pair, route)
    E, F, G, det = metric(hu, hv)
    if route == "jet":
        a = _dot(huu + hvv, hu)
        b = _dot(huu + hvv, hv)
    else:
        g = pair.grid
        Eu, Ev = diff_array(E, g, "u"), diff_array(E, g, "v")
        Fu, Fv = diff_array(F, g, "u"), diff_array(F, g, "v")
        Gu, Gv = diff_array(G, g, "u"), diff_array(G, g, "v")
        # <h_uu, h_u> = E_u/2, <h_uu, h_v> = F_u - E_v/2, <h_vv, h_u> = F_v - G_u/2, <h_vv, h_v> = G_v/2
        a = 0.5 * Eu + Fv - 0.5 * Gu
        b = Fu - 0.5 * Ev + 0.5 * Gv
    P, Q = _solve_gram(E, F, G, det, a, b)
    return ChristoffelComplex(pair.grid, (P + 1j * Q) / 4.0, (E + G) / 4.0 + 0j)


def christoffel(pair, route="jet"):
    if pair.kind == "hyperbolic":
        return christoffel_real(pair, route)
    return christoffel_complex(pair, route)


def _pair_equation(X, Xu, Xv, Xuu, Xuv, Xvv, c, kind, grid):
    """Residual and reference scale of the pair equation (conjugacy in u, v, resp. z) applied to X (scalar or vector field)."""
    if kind == "hyperbolic":
        ex = (lambda a: a[..., None]) if X.ndim == 3 else (lambda a: a)
        res = Xuv - ex(c.G1) * Xu - ex(c.G2) * Xv + ex(c.F) * X
        ref = np.maximum(_norm(Xuv), _norm(ex(c.F) * X))
        return res, ref
    ex = (lambda a: a[..., None]) if X.ndim == 3 else (lambda a: a)
    Xz = 0.5 * (Xu - 1j * Xv)
    Xzb = 0.5 * (Xu + 1j * Xv)
    Xzzb = 0.25 * (Xuu + Xvv)
    res = Xzzb - ex(c.Gamma) * Xz - ex(np.conj(c.Gamma)) * Xzb + ex(c.Fz) * X
    ref = np.maximum(_norm(Xzzb), _norm(ex(c.Fz) * X))
    return res, ref


def _norm(a):
    a = np.abs(a)
    return np.sqrt(np.sum(a**2, axis=-1)) if a.ndim == 3 else a


def conjugate_residual(pair, route="grid", c=None):
    """Normalized max of the pair-equation residual applied to h = g."""
    c = c if c is not None else christoffel(pair, route)
    res, ref = _pair_equation(*derivatives(pair, route), c, pair.kind, pair.grid)
    return _normalized(res, ref, pair.grid)


def gamma_residual(pair, route="grid", c=None):
    """Normalized max of the pair-equation residual applied to the support function."""
    c = c if c is not None else christoffel(pair, route)
    res, ref = _pair_equation(*support_derivatives(pair, route), c, pair.kind, pair.grid)
    return _normalized(res, ref, pair.grid)


def _normalized(res, ref, grid):
    scale = max(float(np.max(ref)), NORM_FLOOR)
    stats = residual_stats(_norm(res) / scale, grid)
    return {"max": stats["max"], "interior": stats["interior_max"], "scale": scale}


def normal_frame_projector(h, hu, hv):
    """Orthogonal projector onto span{h, h_u, h_v}^perp at every node (QR based)."""
    B = np.stack([h, hu, hv], axis=-1)
    Q, _ = np.linalg.qr(B)
    n1 = h.shape[-1]
    return np.eye(n1) - Q @ np.swapaxes(Q, -1, -2)


def second_fundamental_form(pair, route="jet"):
    """Normal parts of h_uu, h_uv, h_vv and the mean-curvature diagnostic."""
    h, hu, hv, huu, huv, hvv = derivatives(pair, route)
    Pn = normal_frame_projector(h, hu, hv)
    a_uu = np.einsum("...ij,...j->...i", Pn, huu)
    a_uv = np.einsum("...ij,...j->...i", Pn, huv)
    a_vv = np.einsum("...ij,...j->...i", Pn, hvv)
    E, F, G, det = metric(hu, hv)
    gi_uu, gi_uv, gi_vv = G / det, -F / det, E / det
    H = gi_uu[..., None] * a_uu + 2 * gi_uv[..., None] * a_uv + gi_vv[..., None] * a_vv
    # |alpha|_g^2 = g^{ik} g^{jl} <a_ij, a_kl>
    comps = {(0, 0): a_uu, (0, 1): a_uv, (1, 0): a_uv, (1, 1): a_vv}
    ginv = {(0, 0): gi_uu, (0, 1): gi_uv, (1, 0): gi_uv, (1, 1): gi_vv}
    total = np.zeros(E.shape)
    for (i, j), aij in comps.items():
        for (k, l), akl in comps.items():
            total += ginv[(i, k)] * ginv[(j, l)] * _dot(aij, akl)
    alpha_norm = np.sqrt(np.maximum(total, 0.0))
    return {"uu": a_uu, "uv": a_uv, "vv": a_vv, "mean": H,
            "mean_norm": _norm(H), "alpha_norm": alpha_norm}


def minimality_ratio(pair, route="jet"):
    """Min over interior nodes of |trace alpha| / |alpha| (0 for minimal surfaces)."""
    sff = second_fundamental_form(pair, route)
    ratio = sff["mean_norm"] / np.maximum(sff["alpha_norm"], NORM_FLOOR)
    return float(np.min(pair.grid.interior(ratio)))


def conjugacy_defect(pair, route="jet"):
    """|alpha(d_u, d_v)| (hyperbolic) or |alpha(d_u,d_u) + alpha(d_v,d_v)| (elliptic), normalized."""
    sff = second_fundamental_form(pair, route)
    if pair.kind == "hyperbolic":
        d = _norm(sff["uv"])
    else:
        d = _norm(sff["uu"] + sff["vv"])
    scale = max(float(np.max(sff["alpha_norm"] * np.sqrt(pair.E * pair.G))), NORM_FLOOR)
    return float(np.max(pair.grid.interior(d))) / scale


def complex_symbol_derivative(c, which="z"):
    return complex_diff_array(c.Gamma, c.grid, which)
