"""Infinitesimal bending of the hypersurface of a special pair.

The bending is carried by three objects:

* the scalar sigma, the unique positive solution (sigma(origin) = 1) of the
  linearized species system, obtained by integrating a closed 1-form;
* the Codazzi tensor B = sigma sym(A J~), stored in the frame E and, lowered,
  as the 2 x 2 block beta = sigma II J on span{d_u, d_v};
* the ambient field T, integrated through the skew field Omega with
  dOmega(X) = N ^ f_*(B X) and dT = Omega f_*.  The derivative data of T
  are then P = Omega f_* (so the bending condition holds by skewness) and the tangent
  field Y with f_* Y = Omega N.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import expr as ex
from . import jet as J
from .classify import special_pair_residual
from .errors import ContractViolation, NotSpecialPair, PathDependence
from .grid import diff_array
from .hyper import CANONICAL_J, masked_solve
from .kernels import cumquad4
from .surfgeo import NORM_FLOOR
from .thresholds import DEFAULT

RANK_TOL = 1e-8


@dataclass
class SigmaField:
    grid: object
    sigma: np.ndarray
    sigma_u: np.ndarray
    sigma_v: np.ndarray
    path_mismatch: float
    special_res: float

    def jet(self):
        return J.Jet(self.sigma, self.sigma_u, self.sigma_v)


@dataclass
class BData:
    """Codazzi tensor B with its contract residuals."""
    B: np.ndarray            # (nu, nv, n, n) in the frame E
    beta: np.ndarray         # (nu, nv, 2, 2) lowered block on span{d_u, d_v}
    b: np.ndarray            # (nu, nv, n+1, 2): ambient f_*(B d_u), f_*(B d_v)
    Jm: np.ndarray           # J actually used (canonical on singular nodes)
    sigma: SigmaField
    residuals: dict = field(default_factory=dict)


@dataclass
class BendingField:
    sigma: SigmaField
    B: BData
    Omega: np.ndarray        # (nu, nv, n+1, n+1) skew
    T: np.ndarray            # (nu, nv, n+1)
    P: np.ndarray            # (nu, nv, n+1, n): Omega f_* on the frame E
    Y: np.ndarray            # (nu, nv, n): frame coordinates of the tangent field Y
    dOmega: tuple            # (Omega_u, Omega_v)
    residuals: dict = field(default_factory=dict)


# -- integration of closed forms -------------------------------------------------

def integrate_closed(fu, fv, grid, order="v-first"):
    """F with F(origin) = 0, dF = fu du + fv dv, by two-stage fourth-order quadrature.

    ``order="v-first"`` integrates along the v-axis at u = u0 and then along
    u-lines; ``"u-first"`` is the transposed sweep.
    """
    fu, fv = np.asarray(fu), np.asarray(fv)
    if order == "v-first":
        base = cumquad4(fv[0], grid.hv)
        return base[None] + cumquad4(fu, grid.hu)
    if order == "u-first":
        base = cumquad4(fu[:, 0], grid.hu)
        lines = np.swapaxes(cumquad4(np.swapaxes(fv, 0, 1), grid.hv), 0, 1)
        return base[:, None] + lines
    raise ValueError(f"unknown sweep order {order!r}")


def _relative_mismatch(a, b):
    scale = max(float(np.max(np.abs(a))), NORM_FLOOR)
    return float(np.max(np.abs(a - b))) / scale


def log_derivatives(c):
    """(omega_u, omega_v) with d log sigma = omega_u du + omega_v dv."""
    if hasattr(c, "G1"):
        return -2.0 * c.G2, -2.0 * c.G1
    return -4.0 * c.Gamma.real, -4.0 * c.Gamma.imag


def sigma_field(c, th=DEFAULT, perturb=None, check=True):
    """Integrate sigma from the closed form d log sigma; sigma(origin) = 1.

    ``perturb`` (an expression in u, v) multiplies sigma by 1 + perturb; it
    exists to exercise the downstream contracts on a wrong sigma.
    """
    grid = c.grid
    special = special_pair_residual(c)
    if check and special > th.ceiling(grid.h):
        raise NotSpecialPair(f"special-pair residual {special:.3e} exceeds ceiling "
                             f"{th.ceiling(grid.h):.3e}", residual=special)
    wu, wv = log_derivatives(c)
    s1 = np.exp(integrate_closed(wu, wv, grid, "v-first"))
    s2 = np.exp(integrate_closed(wu, wv, grid, "u-first"))
    mismatch = _relative_mismatch(s1, s2)
    sig = J.Jet(s1, wu * s1, wv * s1)
    if perturb is not None:
        U, V = grid.mesh()
        pj = ex.eval_jet(perturb, U, V)
        sig = sig * (pj.truncate(1) + 1.0)
    return SigmaField(grid, sig.val, sig.du, sig.dv, mismatch, special)


# -- the Codazzi tensor -------------------------------------------------------------

def _wedge(p, q):
    return p[..., :, None] * q[..., None, :] - q[..., :, None] * p[..., None, :]


def _frob(a, axes=(-1, -2)):
    return np.sqrt(np.sum(np.abs(a) ** 2, axis=axes))


def _lift(block, n):
    out = np.zeros(block.shape[:-2] + (n, n))
    out[..., :2, :2] = block
    return out


def build_B(H, split, sig, th=DEFAULT, Jm=None, check=True):
    """B = sigma sym(A J~) with its contracts: symmetry, kernel, wedge identity, Codazzi."""
    g = H.grid
    n = H.n
    reg = H.regular
    Jm = split.J if Jm is None else Jm
    Jm = np.where(reg[..., None, None], Jm, CANONICAL_J[H.kind])
    s = sig.sigma
    if np.max(np.abs(s)) <= NORM_FLOOR:
        raise ContractViolation("sigma vanishes identically: the bending is trivial", residual=0.0)
    II2 = H.II[..., :2, :2]
    raw = s[..., None, None] * (II2 @ Jm)
    beta = 0.5 * (raw + np.swapaxes(raw, -1, -2))
    asym = float(np.max(_frob(raw - beta))) / max(float(np.max(_frob(raw))), NORM_FLOOR)
    Gm = H.metric()
    B = masked_solve(Gm, _lift(beta, n), reg)
    # ambient images: f_* B d_i; on singular nodes use -sigma dN(J d_i) (equal elsewhere)
    formula = -s[..., None, None] * (H.dN[..., :2] @ Jm)
    pushed = H.frame @ B[..., :2]
    b = np.where(reg[..., None, None], pushed, formula)
    if np.max(_frob(beta)) <= NORM_FLOOR:
        raise ContractViolation("B vanishes identically: the bending is trivial", residual=0.0)
    res = {
        "symmetry": asym,
        "kernel": kernel_residual(H, B),
        "wedge": wedge_residual(H, B),
        "codazzi": codazzi_residual(H, b),
        "pushforward": _masked_rel(pushed - formula, formula, g.interior_mask() & reg),
    }
    bd = BData(B, beta, b, Jm, sig, res)
    if check:
        check_contracts(bd, g, th)
    return bd


def check_contracts(bd, grid, th=DEFAULT):
    ceiling = th.ceiling(grid.h)
    for key in ("wedge", "codazzi"):
        if bd.residuals[key] > ceiling:
            raise ContractViolation(f"{key} residual {bd.residuals[key]:.3e} exceeds ceiling {ceiling:.3e}",
                                    residual=bd.residuals[key], contract=key)
    for key in ("symmetry", "kernel"):
        if bd.residuals[key] > th.exact_tol:
            raise ContractViolation(f"{key} residual {bd.residuals[key]:.3e} exceeds {th.exact_tol:.1e}",
                                    residual=bd.residuals[key], contract=key)


def _masked_rel(num, ref, mask):
    a = _frob(num)[mask]
    r = _frob(ref)[mask]
    return float(np.max(a)) / max(float(np.max(r)), NORM_FLOOR)


def kernel_residual(H, B):
    """max |B xi_k| / |B| over regular nodes."""
    reg = H.regular
    Bxi = B[..., :, 2:]
    return float(np.max(_frob(Bxi)[reg] / np.maximum(_frob(B)[reg], NORM_FLOOR)))


def wedge_residual(H, B):
    """f_*BX ^ f_*AY - f_*BY ^ f_*AX over frame pairs, relative to |f_*B| |f_*A| (regular interior)."""
    FB = H.frame @ B
    FA = H.frame @ H.A
    n = H.n
    total = np.zeros(H.grid.shape)
    for i in range(n):
        for j in range(i + 1, n):
            r = _wedge(FB[..., i], FA[..., j]) - _wedge(FB[..., j], FA[..., i])
            total = np.maximum(total, _frob(r))
    scale = _frob(FB) * _frob(FA)
    mask = H.grid.interior_mask() & H.regular
    return float(np.max(total[mask] / np.maximum(scale[mask], NORM_FLOOR)))


def codazzi_residual(H, b):
    """|pi_T (d_u b_v - d_v b_u)| by stencils, relative to |d_u b_v| + |d_v b_u|.

    With b_i = f_*(B d_i) this is |(nabla_u B) d_v - (nabla_v B) d_u|; pairs
    involving nullity directions vanish because B xi = 0 and B is constant
    along the leaves by construction.
    """
    g = H.grid
    buv = diff_array(b[..., 1], g, "u")
    bvu = diff_array(b[..., 0], g, "v")
    d = buv - bvu
    N = H.N
    d = d - np.einsum("...i,...i", d, N)[..., None] * N
    ref = np.linalg.norm(buv, axis=-1) + np.linalg.norm(bvu, axis=-1)
    return float(np.max(g.interior(np.linalg.norm(d, axis=-1)))) / max(float(np.max(g.interior(ref))), NORM_FLOOR)


# -- independent oracle -------------------------------------------------------------

def _one_sided_matrix(n, h, direction):
    """Sparse second-order one-sided first-derivative stencil (forward: +1, backward: -1).

    Centered stencils annihilate odd-even modes, which a least-squares fit
    would happily pick up; the forward and backward stencils share only the
    constants in their kernels, so stacking both removes spurious modes.
    """
    rows, cols, vals = [], [], []
    for i in range(n):
        d = direction if 0 <= i + 2 * direction < n else -direction
        rows += [i, i, i]
        cols += [i, i + d, i + 2 * d]
        vals += [-1.5 * d / h, 2.0 * d / h, -0.5 * d / h]
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))


def pointwise_nullspace(H):
    """Per-node 2-dimensional solution space of {symmetric, B xi = 0, wedge identity}.

    Symmetry together with B xi = 0 puts f_*(B d_i) in {N, xi}^perp, which is
    spanned by (h_u, h_v) by the definition of xi.  The unknowns are therefore
    x with f_*(B d_u) = x0 h_u + x1 h_v and f_*(B d_v) = x2 h_u + x3 h_v; the
    remaining constraints are <f_*B d_u, f_* d_v> = <f_*B d_v, f_* d_u> and
    wedge identity over all frame pairs.  No inverse of the induced metric enters,
    so the basis stays smooth through singular curves of the hypersurface.

    Returns the canonicalized basis K (nu, nv, 4, 2), the ambient images of the
    two basis elements, the rank gap (third singular value over the first) and
    the mask of nodes where the space is exactly 2-dimensional.
    """
    hu, hv = H.dN[..., 0], H.dN[..., 1]
    basis_u = (hu, hv, 0 * hu, 0 * hu)
    basis_v = (0 * hu, 0 * hu, hu, hv)
    FA = -H.dN          # f_* A on the frame (zero on xi)
    Fm = H.frame
    n = H.n
    cols = []
    for k in range(4):
        bu, bv = basis_u[k], basis_v[k]
        sym = np.einsum("...a,...a", bu, Fm[..., 1]) - np.einsum("...a,...a", bv, Fm[..., 0])
        FB = [bu, bv] + [0 * hu] * (n - 2)
        parts = [sym[..., None]]
        for i in range(n):
            for j in range(i + 1, n):
                r = _wedge(FB[i], FA[..., j]) - _wedge(FB[j], FA[..., i])
                parts.append(r.reshape(r.shape[:2] + (-1,)))
        cols.append(np.concatenate(parts, axis=-1))
    Mx = np.stack(cols, axis=-1)
    Mx = Mx / np.maximum(_frob(Mx), NORM_FLOOR)[..., None, None]
    _, s, Vt = np.linalg.svd(Mx, full_matrices=True)
    K = np.swapaxes(Vt[..., 2:, :], -1, -2)            # (nu, nv, 4, 2)
    gap = s[..., 2] / np.maximum(s[..., 0], NORM_FLOOR)
    # where the constraints lose rank (e.g. at a singular point) the space is not 2-dimensional
    ok = s[..., 1] > RANK_TOL * s[..., 0]
    best, pq = -1.0, (0, 1)
    for i in range(4):
        for j in range(i + 1, 4):
            score = float(np.min(np.abs(np.linalg.det(K[..., [i, j], :]))[ok]))
            if score > best:
                best, pq = score, (i, j)
    minor = np.where(ok[..., None, None], K[..., list(pq), :], np.eye(2))
    K = np.where(ok[..., None, None], K @ np.linalg.inv(minor), 0.0)
    Wu = [sum(K[..., k, m, None] * basis_u[k] for k in range(4)) for m in range(2)]
    Wv = [sum(K[..., k, m, None] * basis_v[k] for k in range(4)) for m in range(2)]
    return K, Wu, Wv, gap, ok


def nullspace_oracle(H, bd):
    """Fit coefficient fields of the pointwise solution space to the stencil Codazzi equations.

    Returns the relative deviation between the oracle's f_*B and the
    sigma-route f_*B after one global scale, and the fitted scale.
    """
    g = H.grid
    nu, nv = g.shape
    N = nu * nv
    K, Wu, Wv, gap, ok = pointwise_nullspace(H)
    h = H.N.reshape(N, -1)
    n1 = h.shape[1]
    okf = ok.reshape(N)
    rows = []
    used = np.ones(N, dtype=bool)
    for direction in (1, -1):
        Du = sp.kron(_one_sided_matrix(nu, g.hu, direction), sp.identity(nv), format="csr")
        Dv = sp.kron(sp.identity(nu), _one_sided_matrix(nv, g.hv, direction), format="csr")
        # component a of d_u b_v - d_v b_u; the projection then removes the N part
        blocks = [sp.hstack([Du @ sp.diags(Wv[m][..., a].reshape(N)) - Dv @ sp.diags(Wu[m][..., a].reshape(N))
                             for m in range(2)], format="csr") for a in range(n1)]
        # equations whose stencil touches a rank-deficient node are dropped
        keep = ((abs(Du) + abs(Dv)) @ (~okf).astype(float)) == 0
        used &= keep
        for a in range(n1):
            R = blocks[a]
            for c in range(n1):
                R = R - sp.diags(h[:, a] * h[:, c]) @ blocks[c]
            rows.append(sp.diags(keep.astype(float)) @ R)
    R = sp.vstack(rows, format="csr")
    weight = float(abs(R).max())
    # coefficients at rank-deficient nodes are pinned to zero (they enter no equation)
    bad = np.flatnonzero(~okf)
    pin = sp.csr_matrix((np.full(2 * bad.size, weight), (np.arange(2 * bad.size), np.concatenate([bad, bad + N]))),
                        shape=(2 * bad.size, 2 * N))
    gauge = int(np.flatnonzero(okf & used)[0])
    best = None
    # gauge: fix one coefficient at the first usable node; keep the better conditioned choice
    for m in range(2):
        con = sp.csr_matrix(([weight], ([0], [gauge + m * N])), shape=(1, 2 * N))
        A = sp.vstack([R, pin, con], format="csr")
        rhs = np.zeros(A.shape[0])
        rhs[-1] = weight
        c = spla.spsolve((A.T @ A).tocsc(), A.T @ rhs)
        size = float(np.max(np.abs(c)))
        if best is None or size < best[0]:
            best = (size, c)
    c = best[1]
    c1, c2 = c[:N].reshape(nu, nv), c[N:].reshape(nu, nv)
    bo = np.stack([Wu[0] * c1[..., None] + Wu[1] * c2[..., None],
                   Wv[0] * c1[..., None] + Wv[1] * c2[..., None]], axis=-1)
    mask = g.interior_mask() & used.reshape(nu, nv)
    x, y = bo[mask].reshape(-1), bd.b[mask].reshape(-1)
    scale = float(np.dot(x, y) / np.dot(x, x))
    dev = float(np.max(_frob(bd.b - scale * bo)[mask]) / np.max(_frob(bd.b)[mask]))
    return {"deviation": dev, "scale": scale, "rank_gap_max": float(np.max(gap)),
            "excluded_nodes": int(np.sum(~okf))}


# -- the ambient field ----------------------------------------------------------------

def integrate_bending(H, bd, th=DEFAULT, initial=None, path_tol=None, test_mode=False):
    """Integrate Omega and T from zero initial state at the origin node.

    ``initial`` = (Omega0, T0) replaces the zero state (Omega0 skew); it is
    used to check uniqueness up to trivial bendings.
    """
    g = H.grid
    if not test_mode and np.max(np.abs(bd.beta)) <= NORM_FLOOR:
        raise ContractViolation("B = 0 is admitted only in test mode", residual=0.0)
    N = H.N
    Ou = _wedge(N, bd.b[..., 0])
    Ov = _wedge(N, bd.b[..., 1])
    n1 = N.shape[-1]
    O0, T0 = (np.zeros((n1, n1)), np.zeros(n1)) if initial is None else initial
    O0 = np.asarray(O0, dtype=float)
    Om1 = O0 + integrate_closed(Ou, Ov, g, "v-first")
    Om2 = O0 + integrate_closed(Ou, Ov, g, "u-first")
    Tu, Tv = Om1 @ H.f0u[..., None], Om1 @ H.f0v[..., None]
    T1 = np.asarray(T0, dtype=float) + integrate_closed(Tu[..., 0], Tv[..., 0], g, "v-first")
    Tu2, Tv2 = Om2 @ H.f0u[..., None], Om2 @ H.f0v[..., None]
    T2 = np.asarray(T0, dtype=float) + integrate_closed(Tu2[..., 0], Tv2[..., 0], g, "u-first")
    mismatch = max(_relative_mismatch(Om1, Om2), _relative_mismatch(T1, T2))
    tol = th.exact_tol if path_tol is None else path_tol
    if mismatch > tol:
        raise PathDependence(f"transposed sweep disagrees by {mismatch:.3e} (tolerance {tol:.1e})",
                             residual=mismatch)
    Omega = Om1
    P = Omega @ H.frame
    ON = np.einsum("...ij,...j->...i", Omega, N)
    Y = masked_solve(H.metric(), np.einsum("...ai,...a->...i", H.frame, ON)[..., None], H.regular)[..., 0]
    bf = BendingField(bd.sigma, bd, Omega, T1, P, Y, (Ou, Ov))
    bf.residuals = {
        "path_mismatch": mismatch,
        "bending_condition": bending_condition_residual(H.frame, P),
        "bending_condition_grid": bending_condition_grid_residual(H, T1, H.f0),
        "consistency": consistency_residual(H, T1, P),
        "round_trip": round_trip_residual(H, bd, T1, Omega),
        "skewness": float(np.max(np.abs(Omega + np.swapaxes(Omega, -1, -2)))),
    }
    return bf


def bending_condition_residual(Fm, P):
    """max |<PX, f_*Y> + <f_*X, PY>| over frame pairs, relative to |P| |f_*|."""
    S = np.swapaxes(P, -1, -2) @ Fm
    S = S + np.swapaxes(S, -1, -2)
    scale = max(float(np.max(_frob(P) * _frob(Fm))), NORM_FLOOR)
    return float(np.max(_frob(S))) / scale


def bending_condition_grid_residual(H, T, f, extra=None):
    """Bending condition <T_*X, f_*Y> + <f_*X, T_*Y> = 0 on (d_u, d_v).

    Both T_* and f_* come from grid stencils, so the residual is O(h^2).
    """
    g = H.grid
    P = np.stack([diff_array(T, g, "u"), diff_array(T, g, "v")], axis=-1)
    F = np.stack([diff_array(f, g, "u"), diff_array(f, g, "v")], axis=-1)
    if extra is not None:
        P = np.concatenate([P, extra[0]], axis=-1)
        F = np.concatenate([F, extra[1]], axis=-1)
    S = np.swapaxes(P, -1, -2) @ F
    S = S + np.swapaxes(S, -1, -2)
    scale = max(float(np.max(g.interior(_frob(P) * _frob(F)))), NORM_FLOOR)
    return float(np.max(g.interior(_frob(S)))) / scale


def consistency_residual(H, T, P):
    """Stencil derivative of T against P on d_u, d_v (interior, relative)."""
    g = H.grid
    d = np.stack([diff_array(T, g, "u"), diff_array(T, g, "v")], axis=-1) - P[..., :2]
    return float(np.max(g.interior(_frob(d)))) / max(float(np.max(_frob(P[..., :2]))), NORM_FLOOR)


def extract_beta(H, T, Omega):
    """<B X, Y> = <d_X(T_* Y) - T_*(nabla_X Y), N> with stencil second derivatives.

    T_*(nabla_X Y) = Omega (tangential part of f_XY); its N-component equals
    <Omega f_XY, N> because <Omega N, N> = 0.
    """
    g = H.grid
    N = H.N
    out = np.empty(g.shape + (2, 2))
    for (i, j), w in {(0, 0): "uu", (0, 1): "uv", (1, 1): "vv"}.items():
        Tij = diff_array(T, g, w)
        fij = diff_array(H.f0, g, w)
        val = np.einsum("...a,...a", Tij - np.einsum("...ab,...b->...a", Omega, fij), N)
        out[..., i, j] = out[..., j, i] = val
    return out


def round_trip_residual(H, bd, T, Omega):
    beta = extract_beta(H, T, Omega)
    g = H.grid
    return float(np.max(g.interior(_frob(beta - bd.beta)))) / max(float(np.max(_frob(bd.beta))), NORM_FLOOR)


def extend_fibers(H, bf, w):
    """T at psi(x, w): T(x, 0) + Omega(x) (sum w_k xi_k), and the bending condition re-verified there."""
    w = np.asarray(w, dtype=float)
    lift = np.einsum("...ik,k->...i", H.xi, w)
    Tw = bf.T + np.einsum("...ij,...j->...i", bf.Omega, lift)
    psi = H.f0 + lift
    extra = (bf.Omega @ H.xi, H.xi)
    return Tw, {
        "bending_condition_grid": bending_condition_grid_residual(H, Tw, psi, extra),
        "bending_condition_grid_w0": bending_condition_grid_residual(H, bf.T, H.f0, (bf.Omega @ H.xi, H.xi)),
    }


def fit_trivial(f, dT, grid=None):
    """Least-squares fit dT = D f + w with D skew; returns (D, w, relative misfit)."""
    pts = f.reshape(-1, f.shape[-1])
    vals = dT.reshape(-1, dT.shape[-1])
    n1 = pts.shape[1]
    pairs = [(i, j) for i in range(n1) for j in range(i + 1, n1)]
    cols = []
    for i, j in pairs:
        E = np.zeros((n1, n1))
        E[i, j], E[j, i] = 1.0, -1.0
        cols.append((pts @ E.T).reshape(-1))
    for k in range(n1):
        e = np.zeros((pts.shape[0], n1))
        e[:, k] = 1.0
        cols.append(e.reshape(-1))
    A = np.stack(cols, axis=1)
    coef, *_ = np.linalg.lstsq(A, vals.reshape(-1), rcond=None)
    D = np.zeros((n1, n1))
    for c, (i, j) in zip(coef, pairs):
        D[i, j], D[j, i] = c, -c
    w = coef[len(pairs):]
    misfit = float(np.max(np.abs(A @ coef - vals.reshape(-1)))) / max(float(np.max(np.abs(vals))), NORM_FLOOR)
    return D, w, misfit


def omega_jet(H, sig):
    """Second-order jet of Omega built from b_i = -sigma dN(J d_i) with the canonical J."""
    gj = H.pair.g_jet
    h = gj.truncate(1)
    hu, hv = gj.shift("u"), gj.shift("v")
    s = sig.jet()
    if H.kind == "hyperbolic":
        bu, bv = J.scale(s, hu) * -1.0, J.scale(s, hv)
    else:
        bu, bv = J.scale(s, hv) * -1.0, J.scale(s, hu)
    Wu, Wv = J.wedge(h, bu), J.wedge(h, bv)
    return Wu, Wv


def bending_summary(bf, bd=None):
    out = dict(bf.residuals)
    out.update({f"B_{k}": v for k, v in bf.B.residuals.items()})
    out["sigma_path_mismatch"] = bf.sigma.path_mismatch
    out["special_pair_res"] = bf.sigma.special_res
    return out
