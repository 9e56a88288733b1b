"""Uniform rectangular grids in (u, v) and finite-difference calculus on them.

Node arrays are indexed ``[i, j]`` with ``i`` along u and ``j`` along v;
component axes of vector or matrix fields trail the two grid axes.  All
stencils are second order: centered in the interior and one-sided at the
boundary (three points for first derivatives, four for second).
"""

import csv
import io
from dataclasses import dataclass

import numpy as np

from .errors import GridMismatch, GridTooSmall, NonFiniteField

MIN_NODES = 9
MIN_DIFF_NODES = 5
INTERIOR_MARGIN = 2

KINDS = ("real", "complex", "vector", "matrix")


@dataclass(frozen=True)
class Grid2:
    u0: float
    u1: float
    v0: float
    v1: float
    nu: int
    nv: int

    def __post_init__(self):
        if self.nu < MIN_NODES or self.nv < MIN_NODES:
            raise GridTooSmall(f"grid needs at least {MIN_NODES} nodes per axis, "
                               f"got {self.nu}x{self.nv}")
        if not (self.u1 > self.u0 and self.v1 > self.v0):
            raise GridTooSmall("grid bounds must satisfy u1 > u0 and v1 > v0")

    @classmethod
    def square(cls, n, bounds=(0.0, 1.0, 0.0, 1.0)):
        u0, u1, v0, v1 = bounds
        return cls(float(u0), float(u1), float(v0), float(v1), int(n), int(n))

    @property
    def hu(self):
        return (self.u1 - self.u0) / (self.nu - 1)

    @property
    def hv(self):
        return (self.v1 - self.v0) / (self.nv - 1)

    @property
    def h(self):
        return max(self.hu, self.hv)

    @property
    def shape(self):
        return (self.nu, self.nv)

    @property
    def u(self):
        return np.linspace(self.u0, self.u1, self.nu)

    @property
    def v(self):
        return np.linspace(self.v0, self.v1, self.nv)

    def mesh(self):
        return np.meshgrid(self.u, self.v, indexing="ij")

    def interior_mask(self, margin=INTERIOR_MARGIN):
        mask = np.zeros(self.shape, dtype=bool)
        mask[margin:self.nu - margin, margin:self.nv - margin] = True
        return mask

    def interior(self, data, margin=INTERIOR_MARGIN):
        """View of ``data`` without a boundary band of ``margin`` nodes."""
        return np.asarray(data)[margin:self.nu - margin, margin:self.nv - margin]

    def with_nodes(self, nu, nv=None):
        return Grid2(self.u0, self.u1, self.v0, self.v1, int(nu), int(nv or nu))


class Field:
    """Sampled values on a :class:`Grid2`; immutable after construction."""

    def __init__(self, grid, data, kind=None):
        data = np.array(data, copy=True)
        if data.shape[:2] != grid.shape:
            raise GridMismatch(f"field shape {data.shape[:2]} does not match grid {grid.shape}")
        if kind is None:
            kind = _infer_kind(data)
        if kind not in KINDS:
            raise ValueError(f"unknown field kind {kind!r}")
        if not np.all(np.isfinite(data)):
            bad = int(np.count_nonzero(~np.isfinite(data)))
            raise NonFiniteField(f"field has {bad} non-finite entries", count=bad)
        data.setflags(write=False)
        self.grid = grid
        self.data = data
        self.kind = kind

    def __repr__(self):
        return f"Field(kind={self.kind}, shape={self.data.shape})"

    def _same_grid(self, other):
        if isinstance(other, Field):
            if other.grid != self.grid:
                raise GridMismatch("fields live on different grids")
            return other.data
        return other

    def __add__(self, other):
        return Field(self.grid, self.data + self._same_grid(other))

    def __sub__(self, other):
        return Field(self.grid, self.data - self._same_grid(other))

    def __mul__(self, other):
        return Field(self.grid, self.data * self._same_grid(other))

    __radd__ = __add__
    __rmul__ = __mul__

    def norm(self):
        """Pointwise Euclidean norm over component axes."""
        d = np.abs(self.data)
        if d.ndim > 2:
            d = np.sqrt(np.sum(d.reshape(self.grid.shape + (-1,)) ** 2, axis=-1))
        return Field(self.grid, d, "real")

    def max_abs(self, interior=False):
        d = self.norm().data
        if interior:
            d = self.grid.interior(d)
        return float(np.max(d))

    def to_csv(self, name="f"):
        return field_to_csv(self, name)


def _infer_kind(data):
    if np.iscomplexobj(data):
        return "complex"
    return {2: "real", 3: "vector", 4: "matrix"}.get(data.ndim, "matrix")


# -- stencils on raw arrays ---------------------------------------------------

def _check(n):
    if n < MIN_DIFF_NODES:
        raise GridTooSmall(f"differentiation needs at least {MIN_DIFF_NODES} nodes per axis")


def d1(a, h, axis):
    """Second-order first derivative along ``axis``."""
    a = np.moveaxis(np.asarray(a), axis, 0)
    _check(a.shape[0])
    out = np.empty_like(a)
    out[1:-1] = (a[2:] - a[:-2]) / (2 * h)
    out[0] = (-3 * a[0] + 4 * a[1] - a[2]) / (2 * h)
    out[-1] = (3 * a[-1] - 4 * a[-2] + a[-3]) / (2 * h)
    return np.moveaxis(out, 0, axis)


def d2(a, h, axis):
    """Second-order second derivative along ``axis``."""
    a = np.moveaxis(np.asarray(a), axis, 0)
    _check(a.shape[0])
    out = np.empty_like(a)
    out[1:-1] = (a[2:] - 2 * a[1:-1] + a[:-2]) / h**2
    out[0] = (2 * a[0] - 5 * a[1] + 4 * a[2] - a[3]) / h**2
    out[-1] = (2 * a[-1] - 5 * a[-2] + 4 * a[-3] - a[-4]) / h**2
    return np.moveaxis(out, 0, axis)


def diff_array(a, grid, which):
    if which == "u":
        return d1(a, grid.hu, 0)
    if which == "v":
        return d1(a, grid.hv, 1)
    if which == "uu":
        return d2(a, grid.hu, 0)
    if which == "vv":
        return d2(a, grid.hv, 1)
    if which == "uv":
        return d1(d1(a, grid.hu, 0), grid.hv, 1)
    raise ValueError(f"unknown derivative {which!r}")


def diff(f, which):
    """Partial derivative of a field: ``which`` in {'u', 'v', 'uu', 'vv', 'uv'}."""
    return Field(f.grid, diff_array(f.data, f.grid, which), f.kind)


def complex_diff_array(a, grid, which):
    fu = d1(a, grid.hu, 0).astype(complex)
    fv = d1(a, grid.hv, 1).astype(complex)
    if which == "z":
        return 0.5 * (fu - 1j * fv)
    if which == "zbar":
        return 0.5 * (fu + 1j * fv)
    raise ValueError(f"unknown complex derivative {which!r}")


def complex_diff(f, which):
    """Wirtinger derivative ``which`` in {'z', 'zbar'}, with f promoted to complex."""
    kind = "complex" if f.kind in ("real", "complex") else f.kind
    return Field(f.grid, complex_diff_array(f.data, f.grid, which), kind)


def mixed_symmetry_defect(f):
    """max |(f_u)_v - f_uv| over the interior, reported as a diagnostic."""
    a = d1(d1(f.data, f.grid.hv, 1), f.grid.hu, 0)
    b = diff_array(f.data, f.grid, "uv")
    return float(np.max(np.abs(f.grid.interior(a - b))))


# -- statistics and export ------------------------------------------------------

def residual_stats(values, grid, margin=INTERIOR_MARGIN):
    """Max and RMS of ``|values|`` over all nodes and over the interior subgrid."""
    a = np.abs(np.asarray(values))
    if a.ndim > 2:
        a = np.sqrt(np.sum(a.reshape(grid.shape + (-1,)) ** 2, axis=-1))
    inner = grid.interior(a, margin)
    return {
        "max": float(np.max(a)),
        "rms": float(np.sqrt(np.mean(a**2))),
        "interior_max": float(np.max(inner)),
        "interior_rms": float(np.sqrt(np.mean(inner**2))),
    }


def field_to_csv(f, name="f"):
    """Node-major CSV text: columns u, v, then one column per component."""
    g = f.grid
    flat = f.data.reshape(g.nu * g.nv, -1)
    if f.data.ndim == 2:
        labels = [name]
    else:
        idx = np.ndindex(*f.data.shape[2:])
        labels = [name + "_" + "_".join(str(k) for k in i) for i in idx]
    cols = []
    if np.iscomplexobj(flat):
        for lab in labels:
            cols += [lab + "_re", lab + "_im"]
    else:
        cols = labels
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["u", "v"] + cols)
    U, V = g.mesh()
    for k, (uu, vv) in enumerate(zip(U.ravel(), V.ravel())):
        row = flat[k]
        if np.iscomplexobj(row):
            vals = [x for z in row for x in (z.real, z.imag)]
        else:
            vals = list(row)
        w.writerow([repr(float(uu)), repr(float(vv))] + [repr(float(x)) for x in vals[: len(cols)]])
    return buf.getvalue()
