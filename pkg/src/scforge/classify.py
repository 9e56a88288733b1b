"""Species of hyperbolic and elliptic pairs.

Two routes decide whether a pair is of the first species (continuous class)
or of the second species (discrete class):

* the coordinate route works with the Christoffel symbols of a conjugate
  chart (Gamma^1, Gamma^2, resp. the complex Gamma) and the functions tau
  and rho built from them;
* the frame route works with unit frames (U, V), resp. Z = (U - iV)/2, and
  the functions Lambda_1, Lambda_2 of their covariant derivatives.

Derivatives of symbols (third derivatives of g) are always taken with grid
stencils.  All scalar residuals are evaluated on the interior subgrid.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DenominatorDegenerate, FrameDegenerate
from .grid import diff_array
from .surfgeo import NORM_FLOOR
from .thresholds import DEFAULT

FIRST = "first-species (continuous class)"
SECOND = "second-species (discrete class)"
SPECIAL = "special-pair (infinitesimally bendable; species test degenerate)"
SURFACE_LIKE = "ruled/surface-like-warning"
UNDETERMINED = "undetermined"


def _imax(a, grid):
    return float(np.max(np.abs(grid.interior(a))))


def _ratio(num, scale, grid):
    return _imax(num, grid) / max(_imax(scale, grid), NORM_FLOOR)


def _du(a, grid):
    return diff_array(a, grid, "u")


def _dv(a, grid):
    return diff_array(a, grid, "v")


def _dz(a, grid):
    return 0.5 * (_du(a, grid) - 1j * _dv(a, grid))


def _dzb(a, grid):
    return 0.5 * (_du(a, grid) + 1j * _dv(a, grid))


@dataclass
class SpeciesReport:
    kind: str
    route: str
    special_pair_res: float
    first_species_res: float
    guarded_coverage: float
    system_res: tuple
    verdict: str
    thresholds: dict
    h: float
    ceiling: float
    tau: np.ndarray = field(default=None, repr=False)
    rho: np.ndarray = field(default=None, repr=False)
    stats: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "kind": self.kind,
            "route": self.route,
            "special_pair_res": self.special_pair_res,
            "first_species_res": self.first_species_res,
            "guarded_coverage": self.guarded_coverage,
            "system_res": list(self.system_res),
            "verdict": self.verdict,
            "h": self.h,
            "ceiling": self.ceiling,
            "stats": self.stats,
        }


# -- coordinate route --------------------------------------------------------------

def special_pair_residual(c):
    """Special-pair defect |Gamma^1_u - Gamma^2_v|, resp. |Im Gamma_z|, normalized."""
    g = c.grid
    if hasattr(c, "G1"):
        a, b = _du(c.G1, g), _dv(c.G2, g)
        return _ratio(a - b, np.abs(a) + np.abs(b), g)
    Gz = _dz(c.Gamma, g)
    return _ratio(Gz.imag, np.abs(Gz), g)


def first_species_residual(c):
    """First-species defect Gamma^1_u = Gamma^2_v = 2 Gamma^1 Gamma^2 (resp. Gamma_z = 2|Gamma|^2).

    Normalized by the size of its terms.
    """
    g = c.grid
    if hasattr(c, "G1"):
        a, b = _du(c.G1, g), _dv(c.G2, g)
        p = 2 * c.G1 * c.G2
        return _ratio(np.abs(a - p) + np.abs(b - p), np.abs(a) + np.abs(b) + 2 * np.abs(p), g)
    Gz = _dz(c.Gamma, g)
    p = 2 * np.abs(c.Gamma) ** 2
    return _ratio(Gz - p, np.abs(Gz) + p, g)


def _guard(den, scale, th):
    mask = np.abs(den) >= th.guard * max(float(np.max(np.abs(scale))), NORM_FLOOR)
    return mask


def tau_coordinate(c, th=DEFAULT):
    """tau = (G1_u - 2 G1 G2)/(G2_v - 2 G1 G2) and the residuals of its system."""
    g = c.grid
    a, b = _du(c.G1, g), _dv(c.G2, g)
    p = 2 * c.G1 * c.G2
    num, den = a - p, b - p
    mask = _guard(den, np.abs(b) + np.abs(p), th)
    inner = g.interior(mask)
    if not np.any(inner):
        raise DenominatorDegenerate("tau denominator vanishes on the whole interior")
    tau = np.where(mask, num / np.where(mask, den, 1.0), np.nan)
    tau_f = np.where(mask, tau, 1.0)
    ru = _du(tau_f, g) - 2 * c.G2 * tau_f * (1 - tau_f)
    rv = _dv(tau_f, g) - 2 * c.G1 * (1 - tau_f)
    res = _tau_system_norm(ru, rv, c.G1, c.G2, tau_f, mask, g)
    return tau, mask, res


def _tau_system_norm(ru, rv, L1, L2, tau, mask, grid):
    ok = grid.interior(mask & _neighbors_ok(mask))
    scale = max(_imax(np.abs(L1) + np.abs(L2), grid) * max(1.0, _imax(tau, grid)), NORM_FLOOR)
    if not np.any(ok):
        return (np.inf, np.inf)
    return (float(np.max(np.abs(grid.interior(ru))[ok])) / scale,
            float(np.max(np.abs(grid.interior(rv))[ok])) / scale)


def _neighbors_ok(mask):
    """Nodes whose stencil neighbours are all guarded (derivatives are meaningful)."""
    m = mask.copy()
    m[1:, :] &= mask[:-1, :]
    m[:-1, :] &= mask[1:, :]
    m[:, 1:] &= mask[:, :-1]
    m[:, :-1] &= mask[:, 1:]
    return m


def rho_coordinate(c, th=DEFAULT):
    """rho = w/|w| with w = Gamma_z - 2|Gamma|^2 and the residual of rho_zbar + Gamma(rho - conj rho)."""
    g = c.grid
    Gz = _dz(c.Gamma, g)
    w = Gz - 2 * np.abs(c.Gamma) ** 2
    mask = _guard(w, np.abs(Gz) + 2 * np.abs(c.Gamma) ** 2, th)
    if not np.any(g.interior(mask)):
        raise DenominatorDegenerate("w = Gamma_z - 2|Gamma|^2 vanishes on the whole interior")
    rho = np.where(mask, w / np.where(mask, np.abs(w), 1.0), 1.0 + 0j)
    res = _dzb(rho, g) + c.Gamma * (rho - np.conj(rho))
    ok = g.interior(mask & _neighbors_ok(mask))
    scale = max(_imax(np.abs(c.Gamma), g), NORM_FLOOR)
    r = float(np.max(np.abs(g.interior(res))[ok])) / scale if np.any(ok) else np.inf
    return np.where(mask, rho, np.nan), mask, r


def classify_coordinates(c, th=DEFAULT):
    """Species report of a pair from its Christoffel symbols."""
    g = c.grid
    kind = "hyperbolic" if hasattr(c, "G1") else "elliptic"
    special = special_pair_residual(c)
    first = first_species_residual(c)
    ceiling = th.ceiling(g.h)
    stats = {}
    tau = rho = None
    try:
        if kind == "hyperbolic":
            tau, mask, sysres = tau_coordinate(c, th)
            stats.update(_tau_stats(tau, mask, g, th))
        else:
            rho, mask, r = rho_coordinate(c, th)
            sysres = (r,)
            stats.update(_rho_stats(rho, mask, g, th))
        coverage = float(np.mean(g.interior(mask)))
    except DenominatorDegenerate:
        sysres, coverage = (np.inf,), 0.0
    verdict = decide(kind, special, first, coverage, sysres, stats, ceiling, th)
    return SpeciesReport(kind, "coordinate", special, first, coverage, tuple(sysres), verdict,
                         th.as_dict(), g.h, ceiling, tau, rho, stats)


def _tau_stats(tau, mask, grid, th):
    t = grid.interior(tau)[grid.interior(mask)]
    dev = np.abs(t - 1)
    return {
        "tau_min": float(np.min(t)),
        "tau_max": float(np.max(t)),
        "tau_margin_fraction": float(np.mean(dev >= th.tau_margin)),
        "tau_dev_median": float(np.median(dev)),
        "theta_min": float(np.sqrt(max(np.min(t), 0.0))),
        "theta_max": float(np.sqrt(max(np.max(t), 0.0))),
    }


def _rho_stats(rho, mask, grid, th):
    r = grid.interior(rho)[grid.interior(mask)]
    im = np.abs(r.imag)
    return {
        "rho_unit_dev": float(np.max(np.abs(np.abs(r) - 1))),
        "rho_im_min": float(np.min(im)),
        "rho_im_max": float(np.max(im)),
        "rho_margin_fraction": float(np.mean(im >= th.rho_margin)),
        "theta_min": float(np.min(np.abs(np.angle(r)))),
        "theta_max": float(np.max(np.abs(np.angle(r)))),
    }


def decide(kind, special, first, coverage, sysres, stats, ceiling, th):
    """Verdict from residuals; see the module docstring for the meaning."""
    if first < th.floor:
        return FIRST
    if coverage < th.coverage:
        return UNDETERMINED
    if special <= ceiling:
        return SPECIAL
    if max(sysres) > ceiling:
        return UNDETERMINED
    if kind == "hyperbolic":
        if stats.get("tau_min", -1) > 0 and stats.get("tau_margin_fraction", 0) >= th.coverage:
            return SECOND
    else:
        if (stats.get("rho_unit_dev", 1) <= th.unit_tol and stats.get("rho_im_min", 0) >= th.rho_margin):
            return SECOND
    return UNDETERMINED


# -- frame route ---------------------------------------------------------------------

@dataclass
class FrameData:
    kind: str
    grid: object
    U: np.ndarray          # (..., 2) coefficients in (d_u, d_v)
    V: np.ndarray
    F: np.ndarray          # <U, V>
    L1: np.ndarray
    L2: np.ndarray
    structure_res: float
    unit_dev: float
    extra: dict = field(default_factory=dict)


def directional(X, f, grid):
    """X(f) for a (possibly complex) vector field X given by coefficients."""
    return X[..., 0] * _du(f, grid) + X[..., 1] * _dv(f, grid)


def covariant(X, Y, chris, grid):
    """(nabla_X Y)^k = X^i d_i Y^k + Gamma^k_ij X^i Y^j."""
    dY = np.stack([directional(X, Y[..., k], grid) for k in range(2)], axis=-1)
    return dY + np.einsum("...kij,...i,...j->...k", chris, X, Y)


def _inner(X, Y, E, F, G):
    return E * X[..., 0] * Y[..., 0] + F * (X[..., 0] * Y[..., 1] + X[..., 1] * Y[..., 0]) \
        + G * X[..., 1] * Y[..., 1]


def _solve2(P, Q, W):
    """Coefficients (x, y) with x P + y Q = W nodewise (P, Q, W are 2-vectors)."""
    det = P[..., 0] * Q[..., 1] - P[..., 1] * Q[..., 0]
    x = (W[..., 0] * Q[..., 1] - W[..., 1] * Q[..., 0]) / det
    y = (P[..., 0] * W[..., 1] - P[..., 1] * W[..., 0]) / det
    return x, y, det


def frame_lambdas(kind, grid, chris, E, F, G, U, V, th=DEFAULT):
    """Lambda_1, Lambda_2 of the frame system (hyperbolic or elliptic form)."""
    det = U[..., 0] * V[..., 1] - U[..., 1] * V[..., 0]
    scale = np.sqrt(np.abs(_inner(U, U, E, F, G) * _inner(V, V, E, F, G)))
    if np.any(np.abs(det) * np.sqrt(np.abs(E * G - F * F)) < th.guard * np.max(scale)):
        raise FrameDegenerate("frame vectors are (nearly) parallel at some node")
    unit_dev = float(max(np.max(np.abs(_inner(U, U, E, F, G) - 1)),
                         np.max(np.abs(_inner(V, V, E, F, G) - 1))))
    Fuv = _inner(U, V, E, F, G)
    if kind == "hyperbolic":
        x, y, _ = _solve2(U, V, covariant(U, V, chris, grid))      # nabla_U V = L1 U - L1 F V
        x2, y2, _ = _solve2(U, V, covariant(V, U, chris, grid))    # nabla_V U = -L2 F U + L2 V
        L1, L2 = x, y2
        s = _imax(np.abs(L1) + np.abs(L2), grid)
        structure = max(_imax(y + L1 * Fuv, grid), _imax(x2 + L2 * Fuv, grid)) / max(s, NORM_FLOOR)
    else:
        Z = 0.5 * (U - 1j * V)
        Zb = np.conj(Z)
        L1, L2, _ = _solve2(Z, Zb, covariant(Z, Zb, chris, grid))  # nabla_Z Zbar = L1 Z + L2 Zbar
        structure = 0.0
    return FrameData(kind, grid, U, V, Fuv, L1, L2, structure, unit_dev)


def frame_species(fd, th=DEFAULT):
    """Species decision from frame data, mirroring the coordinate route."""
    g = fd.grid
    ceiling = th.ceiling(g.h)
    F, L1, L2 = fd.F, fd.L1, fd.L2
    stats = {"frame_unit_dev": fd.unit_dev, "frame_structure_res": fd.structure_res}
    tau = rho = None
    if fd.kind == "hyperbolic":
        a1 = directional(fd.U, L1, g)
        a2 = directional(fd.V, L2, g)
        num = a1 - L1 * L2 + F * L1**2
        den = a2 - L1 * L2 + F * L2**2
        scale = np.abs(a1) + np.abs(a2) + 2 * np.abs(L1 * L2) + np.abs(F) * (L1**2 + L2**2)
        special = _ratio(a1 + F * L1**2 - a2 - F * L2**2, scale, g)
        first = _ratio(np.abs(num) + np.abs(den), scale, g)
        mask = _guard(den, scale, th)
        coverage = float(np.mean(g.interior(mask)))
        if coverage == 0:
            sysres = (np.inf, np.inf)
        else:
            tau = np.where(mask, num / np.where(mask, den, 1.0), np.nan)
            tf = np.where(mask, tau, 1.0)
            ru = directional(fd.U, tf, g) - 2 * L2 * tf * (1 - tf)
            rv = directional(fd.V, tf, g) - 2 * L1 * (1 - tf)
            sysres = _tau_system_norm(ru, rv, L1, L2, tf, mask, g)
            stats.update(_tau_stats(tau, mask, g, th))
    else:
        Z = 0.5 * (fd.U - 1j * fd.V)
        a = directional(Z, L1, g)
        W = a - L1 * np.conj(L1) - L1 * L2
        scale = np.abs(a) + np.abs(L1) ** 2 + np.abs(L1 * L2)
        special = _ratio((a - L1 * L2).imag, scale, g)
        first = _ratio(W, scale, g)
        mask = _guard(W, scale, th)
        coverage = float(np.mean(g.interior(mask)))
        if coverage == 0:
            sysres = (np.inf,)
        else:
            rho = np.where(mask, W / np.where(mask, np.abs(W), 1.0), 1.0 + 0j)
            res = directional(Z, np.conj(rho), g) - np.conj(L1) * (rho - np.conj(rho))
            ok = g.interior(mask & _neighbors_ok(mask))
            s = max(_imax(np.abs(L1), g), NORM_FLOOR)
            sysres = (float(np.max(np.abs(g.interior(res))[ok])) / s if np.any(ok) else np.inf,)
            rho = np.where(mask, rho, np.nan)
            stats.update(_rho_stats(rho, mask, g, th))
    verdict = decide(fd.kind, special, first, coverage, sysres, stats, ceiling, th)
    return SpeciesReport(fd.kind, "frame", special, first, coverage, tuple(sysres), verdict,
                         th.as_dict(), g.h, ceiling, tau, rho, stats)


# -- frames ---------------------------------------------------------------------------------

def hyperbolic_frames(Jbar, E, F, G):
    """Unit eigenvectors of Jbar for +1 (U) and -1 (V) in the metric (E, F, G)."""
    a, b, c, d = Jbar[..., 0, 0], Jbar[..., 0, 1], Jbar[..., 1, 0], Jbar[..., 1, 1]

    def null(p, q, r, s):
        # null vector of [[p, q], [r, s]], choosing the better conditioned row
        v1 = np.stack([q, -p], axis=-1)
        v2 = np.stack([s, -r], axis=-1)
        use1 = (np.abs(p) + np.abs(q)) >= (np.abs(r) + np.abs(s))
        return np.where(use1[..., None], v1, v2)

    U = null(a - 1, b, c, d - 1)
    V = null(a + 1, b, c, d + 1)
    # orientation: U along +d_u, V along +d_v as far as possible
    U = np.where((U[..., 0] < 0)[..., None], -U, U)
    V = np.where((V[..., 1] < 0)[..., None], -V, V)
    U = U / np.sqrt(_inner(U, U, E, F, G))[..., None]
    V = V / np.sqrt(_inner(V, V, E, F, G))[..., None]
    return U, V


def elliptic_frames(Jbar, E, F, G):
    """Unit frame (U, V = Jbar U) by the normalizing quadratic.

    Starting from U0 = d_u, V0 = Jbar d_u, the frame U = d U0 + e V0 has
    |U| = |Jbar U| = 1 when x = d/e solves x^2 a + 4 x c - a = 0 with
    a = |U0|^2 - |V0|^2, c = <U0, V0> (e = 0 when a = 0 and c = 0).
    Returns the frame and the discriminant 16 c^2 + 4 a^2 (never negative).
    """
    U0 = np.zeros(E.shape + (2,))
    U0[..., 0] = 1.0
    V0 = np.einsum("...ij,...j->...i", Jbar, U0)
    a = _inner(U0, U0, E, F, G) - _inner(V0, V0, E, F, G)
    c = _inner(U0, V0, E, F, G)
    disc = 16 * c**2 + 4 * a**2
    # angle form (d, e) = (cos s, sin s): the quadratic reads a cos 2s + 2c sin 2s = 0;
    # of the two roots modulo pi we keep the one closest to U0
    s = 0.5 * np.arctan2(-a, 2 * c)
    s = np.where(np.abs(s) > np.pi / 4, s - np.sign(s) * np.pi / 2, s)
    d, e = np.cos(s), np.sin(s)
    U = d[..., None] * U0 + e[..., None] * V0
    V = np.einsum("...ij,...j->...i", Jbar, U)
    k = np.sqrt(2.0 / ((d**2 + e**2) * (_inner(U0, U0, E, F, G) + _inner(V0, V0, E, F, G))))
    U, V = U * k[..., None], V * k[..., None]
    quad = np.abs((d**2 - e**2) * a + 4 * d * e * c) / np.maximum(np.abs(a) + np.abs(c), NORM_FLOOR)
    return U, V, {"discriminant_min": float(np.min(disc)), "quadratic_res": float(np.max(quad)),
                  "d": d * k, "e": e * k}
