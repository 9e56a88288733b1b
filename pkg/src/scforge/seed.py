"""Envelope seeds: solutions of phi_{z1 z2} + M phi = 0 and their Gauss pair.

A seed consists of n + 2 real solutions phi_0, ..., phi_{n+1} of the same
linear equation.  In the hyperbolic case the equation is
``phi_uv + M phi = 0``; in the elliptic case it is
``phi_{z zbar} + M phi = 0`` with ``d/dz = (d/du - i d/dv)/2``, i.e.
``(phi_uu + phi_vv)/4 + M phi = 0``.  The map phi = (phi_1, ..., phi_{n+1})
normalized to the unit sphere is the spherical surface g, and
gamma = phi_0 / |phi| is its support function.

Each component is either a closed-form expression (exact jets), a Goursat
solve from characteristic data, or a Dirichlet solve on the rectangle.  In
the latter two cases the derivative jets are built by finite differences.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import expr as ex
from . import jet as J
from .errors import ConfigError, GridTooSmall, IncompatibleCorner, NotImmersed, SingularOperator
from .grid import Field, diff_array, residual_stats
from .kernels import goursat_march

KINDS = ("hyperbolic", "elliptic")
IMMERSION_TOL = 1e-8


@dataclass
class EnvelopeSeed:
    kind: str
    n: int
    grid: object
    M: np.ndarray
    phi: np.ndarray                 # (nu, nv, n + 2); index 0 is the support component
    provenance: list
    jets: J.Jet                     # second-order jet of phi, same layout
    sources: list = field(default_factory=list)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"seed kind must be one of {KINDS}, got {self.kind!r}")
        if self.n < 3:
            raise ConfigError(f"ambient dimension n must be at least 3, got {self.n}")
        if self.phi.shape != self.grid.shape + (self.n + 2,):
            raise ConfigError(f"expected {self.n + 2} seed functions on the grid, "
                              f"got array of shape {self.phi.shape}")

    @property
    def map_jet(self):
        return self.jets[1:]

    @property
    def support_jet(self):
        return self.jets[0]


@dataclass
class GaussPair:
    kind: str
    grid: object
    g: np.ndarray          # (nu, nv, n + 1), unit vectors
    gamma: np.ndarray      # (nu, nv)
    E: np.ndarray
    F: np.ndarray
    G: np.ndarray
    g_jet: J.Jet
    gamma_jet: J.Jet

    @property
    def n(self):
        return self.g.shape[-1] - 1

    @property
    def h(self):
        return self.g


# -- solvers -----------------------------------------------------------------

def _as_expr(e):
    return ex.parse(e) if isinstance(e, str) else e


def _sample(e, grid):
    U, V = grid.mesh()
    return ex.evaluate(_as_expr(e), U, V) * np.ones(grid.shape)


def goursat_solve(M, a, b, grid):
    """Solve phi_uv + M phi = 0 with phi(u, v0) = a(u) and phi(u0, v) = b(v)."""
    if grid.nu < 5 or grid.nv < 5:
        raise GridTooSmall("Goursat marching needs at least 5 nodes per axis")
    a, b = _as_expr(a), _as_expr(b)
    av = ex.evaluate(a, grid.u, np.full(grid.nu, grid.v0))
    bv = ex.evaluate(b, np.full(grid.nv, grid.u0), grid.v)
    av, bv = np.broadcast_to(av, (grid.nu,)), np.broadcast_to(bv, (grid.nv,))
    if abs(av[0] - bv[0]) > 1e-12 * max(1.0, abs(av[0])):
        raise IncompatibleCorner(f"a(u0) = {av[0]!r} differs from b(v0) = {bv[0]!r}")
    M = np.broadcast_to(np.asarray(M, dtype=float), grid.shape)
    return Field(grid, goursat_march(M, av, bv, grid.hu, grid.hv), "real")


def helmholtz_operator(M, grid):
    """Sparse matrix of the 5-point Laplacian plus 4M on interior nodes."""
    mu, mv = grid.nu - 2, grid.nv - 2

    def lap1(m, h):
        return sp.diags([np.ones(m - 1), -2 * np.ones(m), np.ones(m - 1)], [-1, 0, 1]) / h**2

    L = sp.kron(lap1(mu, grid.hu), sp.identity(mv)) + sp.kron(sp.identity(mu), lap1(mv, grid.hv))
    M = np.broadcast_to(np.asarray(M, dtype=float), grid.shape)
    return (L + sp.diags(4.0 * M[1:-1, 1:-1].ravel())).tocsc()


def _smallest_singular_value(A, lu, iters=30):
    rng = np.random.default_rng(0)
    x = rng.standard_normal(A.shape[0])
    x /= np.linalg.norm(x)
    est = np.inf
    for _ in range(iters):
        y = lu.solve(lu.solve(x, trans="T"))
        ny = np.linalg.norm(y)
        if not np.isfinite(ny) or ny == 0:
            return 0.0
        est = 1.0 / np.sqrt(ny)
        x = y / ny
    return est


def helmholtz_solve(M, boundary, grid):
    """Solve (phi_uu + phi_vv) + 4 M phi = 0 with Dirichlet data ``boundary``.

    Returns the solution field and the smallest singular value estimate of
    the discrete operator.
    """
    if grid.nu < 5 or grid.nv < 5:
        raise GridTooSmall("Dirichlet solve needs at least 5 nodes per axis")
    full = _sample(boundary, grid)
    phi = np.zeros(grid.shape)
    phi[0, :], phi[-1, :], phi[:, 0], phi[:, -1] = full[0, :], full[-1, :], full[:, 0], full[:, -1]
    A = helmholtz_operator(M, grid)
    # boundary contributions moved to the right-hand side
    rhs = np.zeros((grid.nu - 2, grid.nv - 2))
    rhs[0, :] -= phi[0, 1:-1] / grid.hu**2
    rhs[-1, :] -= phi[-1, 1:-1] / grid.hu**2
    rhs[:, 0] -= phi[1:-1, 0] / grid.hv**2
    rhs[:, -1] -= phi[1:-1, -1] / grid.hv**2
    rhs = rhs.ravel()
    try:
        lu = spla.splu(A)
    except RuntimeError as err:
        raise SingularOperator(f"discrete Helmholtz operator is singular ({err})", 0.0) from err
    smin = _smallest_singular_value(A, lu)
    scale = spla.norm(A, 1)
    if smin <= 1e-12 * scale:
        raise SingularOperator("M is at an eigenvalue of the discrete operator", smin)
    x = lu.solve(rhs)
    res = np.linalg.norm(A @ x - rhs) / max(np.linalg.norm(rhs), scale * np.linalg.norm(x), 1e-300)
    if not np.isfinite(res) or res > 1e-10:
        raise SingularOperator(f"Dirichlet solve residual {res:.3e} exceeds 1e-10", smin)
    phi[1:-1, 1:-1] = x.reshape(grid.nu - 2, grid.nv - 2)
    out = Field(grid, phi, "real")
    out.smallest_singular_value = smin
    return out


# -- seed assembly -------------------------------------------------------------

def fd_jet(values, grid):
    """Second-order jet of sampled values built with grid stencils."""
    return J.Jet(values, *(diff_array(values, grid, w) for w in ("u", "v", "uu", "uv", "vv")))


def _component(spec, kind, M, grid, M_expr):
    """Return (values, jet, provenance) for one seed function."""
    if isinstance(spec, str):
        spec = {"expr": spec}
    if "expr" in spec:
        e = _as_expr(spec["expr"])
        U, V = grid.mesh()
        jt = ex.eval_jet(e, U, V)
        return jt.val, jt, "analytic", ex.to_string(e)
    if "goursat" in spec:
        if kind != "hyperbolic":
            raise ConfigError("characteristic data is only meaningful for hyperbolic seeds")
        data = spec["goursat"]
        vals = goursat_solve(M, data["a"], data["b"], grid).data
        return vals, fd_jet(vals, grid), "goursat", f"a={data['a']}; b={data['b']}"
    if "dirichlet" in spec:
        if kind != "elliptic":
            raise ConfigError("Dirichlet data is only meaningful for elliptic seeds")
        vals = helmholtz_solve(M, spec["dirichlet"], grid).data
        return vals, fd_jet(vals, grid), "dirichlet", str(spec["dirichlet"])
    raise ConfigError(f"seed function needs one of expr/goursat/dirichlet: {spec!r}")


def build_seed(kind, n, grid, M, phi_specs, perturb_map=None):
    """Assemble an :class:`EnvelopeSeed` from per-function specifications.

    ``M`` is an expression (string) or a number.  ``perturb_map`` is an
    optional expression added to phi_1; it exists for negative controls.
    """
    if len(phi_specs) != n + 2:
        raise ConfigError(f"{kind} seed with n={n} needs {n + 2} functions, got {len(phi_specs)}")
    M_expr = _as_expr(str(M))
    Mv = _sample(M_expr, grid)
    vals, jets, prov, srcs = [], [], [], []
    for spec in phi_specs:
        v, jt, p, s = _component(spec, kind, Mv, grid, M_expr)
        vals.append(v)
        jets.append(jt)
        prov.append(p)
        srcs.append(s)
    if perturb_map is not None:
        U, V = grid.mesh()
        pj = ex.eval_jet(_as_expr(perturb_map), U, V)
        jets[1] = jets[1] + pj
        vals[1] = jets[1].val
        srcs[1] = srcs[1] + f" + [{perturb_map}]"
    phi = np.stack(vals, axis=-1)
    return EnvelopeSeed(kind, int(n), grid, Mv, phi, prov, J.Jet.stack(jets), srcs)


# -- diagnostics -------------------------------------------------------------------

def seed_operator(values, M, grid, kind):
    """Apply the seed operator with grid stencils."""
    if kind == "hyperbolic":
        lhs = diff_array(values, grid, "uv")
    else:
        lhs = 0.25 * (diff_array(values, grid, "uu") + diff_array(values, grid, "vv"))
    Mb = M if values.ndim == 2 else M[..., None]
    return lhs + Mb * values


def jet_operator(seed):
    """The seed operator applied to the stored jets (exact for analytic components)."""
    p = seed.jets
    lhs = p.duv if seed.kind == "hyperbolic" else 0.25 * (p.duu + p.dvv)
    return lhs + seed.M[..., None] * p.val


def pde_residual(seed):
    """Per-function residual statistics of the seed equation, normalized by max|phi_j|.

    ``normalized`` uses grid stencils (the gated value); ``jet`` applies the
    operator to the exact jets and is reported for analytic components only.
    """
    res = seed_operator(seed.phi, seed.M, seed.grid, seed.kind)
    jres = jet_operator(seed)
    out = []
    for j in range(seed.n + 2):
        scale = max(float(np.max(np.abs(seed.phi[..., j]))), 1e-300)
        stats = residual_stats(res[..., j] / scale, seed.grid)
        exact = float(np.max(np.abs(jres[..., j]))) / scale if seed.provenance[j] == "analytic" else None
        out.append({"index": j, "provenance": seed.provenance[j], "normalized": stats["max"],
                    "interior": stats["interior_max"], "jet": exact, "scale": scale})
    return out


def max_pde_residual(seed):
    return max(r["normalized"] for r in pde_residual(seed))


def continuous_class_test(seed):
    """Normalized size of (|phi|^2)_{z1 z2}; zero exactly for the continuous class."""
    p = seed.map_jet
    if seed.kind == "hyperbolic":
        mixed = 2 * (np.einsum("...i,...i", p.duv, p.val) + np.einsum("...i,...i", p.du, p.dv))
    else:
        lap = (2 * (np.einsum("...i,...i", p.duu + p.dvv, p.val)
                    + np.einsum("...i,...i", p.du, p.du) + np.einsum("...i,...i", p.dv, p.dv)))
        mixed = 0.25 * lap
    r2 = np.einsum("...i,...i", p.val, p.val)
    return float(np.max(np.abs(mixed)) / np.max(r2))


def extract_pair(seed, perturb_support=None):
    """Gauss pair g = phi/|phi|, gamma = phi_0/|phi| with immersion check.

    ``perturb_support`` is an optional expression added to gamma (negative
    controls only).
    """
    p = seed.map_jet
    r2 = np.einsum("...i,...i", p.val, p.val)
    if np.any(r2 <= 0):
        raise NotImmersed("phi vanishes at some node", nodes=_nodes(r2 <= 0))
    inv_r = J.reciprocal(J.sqrt(J.dot(p, p)))
    g = J.scale(inv_r, p)
    gamma = seed.support_jet * inv_r
    if perturb_support is not None:
        U, V = seed.grid.mesh()
        gamma = gamma + ex.eval_jet(_as_expr(perturb_support), U, V)
    E = np.einsum("...i,...i", g.du, g.du)
    F = np.einsum("...i,...i", g.du, g.dv)
    G = np.einsum("...i,...i", g.dv, g.dv)
    bad = E * G - F * F <= IMMERSION_TOL * (E + G) ** 2
    if np.any(bad):
        raise NotImmersed(f"g fails to be an immersion at {int(bad.sum())} nodes",
                          nodes=_nodes(bad))
    return GaussPair(seed.kind, seed.grid, g.val, gamma.val, E, F, G, g, gamma)


def _nodes(mask, limit=10):
    idx = np.argwhere(mask)
    return [tuple(int(k) for k in i) for i in idx[:limit]]
