"""Second-order jets over the (u, v) parameter plane.

A :class:`Jet` stores a field value together with its partial derivatives
up to first or second order.  Values may be Python floats or numpy arrays of
any shape; the grid axes come first and component axes (vectors, matrices)
trail.  Products are expanded with the Leibniz rule, so any polynomial or
rational combination of jets is differentiated exactly to rounding.

The first-order form is what remains after taking one derivative of a
second-order jet (see :meth:`Jet.shift`), which is how quantities such as
``grad gamma`` are carried through the hypersurface construction.
"""

import numpy as np

from .errors import DomainError

_SLOTS = ("val", "du", "dv", "duu", "duv", "dvv")


class Jet:
    __slots__ = _SLOTS

    def __init__(self, val, du, dv, duu=None, duv=None, dvv=None):
        self.val = val
        self.du = du
        self.dv = dv
        self.duu = duu
        self.duv = duv
        self.dvv = dvv

    # -- construction -----------------------------------------------------
    @classmethod
    def constant(cls, value, order=2):
        value = np.asarray(value, dtype=float)
        z = np.zeros_like(value)
        if order == 2:
            return cls(value, z, z, z, z, z)
        return cls(value, z, z)

    @classmethod
    def coordinate_u(cls, u):
        u = np.asarray(u, dtype=float)
        one, z = np.ones_like(u), np.zeros_like(u)
        return cls(u, one, z, z, z, z)

    @classmethod
    def coordinate_v(cls, v):
        v = np.asarray(v, dtype=float)
        one, z = np.ones_like(v), np.zeros_like(v)
        return cls(v, z, one, z, z, z)

    @classmethod
    def stack(cls, jets, axis=-1):
        """Stack scalar jets into a vector jet (new trailing axis)."""
        order = min(j.order for j in jets)
        parts = _SLOTS[: 3 if order == 1 else 6]
        return cls(*[np.stack([np.asarray(getattr(j, p), dtype=float) for j in jets], axis=axis)
                     for p in parts])

    # -- structure --------------------------------------------------------
    @property
    def order(self):
        return 1 if self.duu is None else 2

    def parts(self):
        return [getattr(self, p) for p in _SLOTS[: 3 if self.order == 1 else 6]]

    def _map(self, fn):
        return Jet(*[fn(p) for p in self.parts()])

    def truncate(self, order=1):
        if order >= self.order:
            return self
        return Jet(self.val, self.du, self.dv)

    def shift(self, which):
        """First-order jet of the partial derivative ``which`` ('u' or 'v')."""
        if self.order < 2:
            raise ValueError("shift needs a second-order jet")
        if which == "u":
            return Jet(self.du, self.duu, self.duv)
        if which == "v":
            return Jet(self.dv, self.duv, self.dvv)
        raise ValueError(f"unknown direction {which!r}")

    def expand(self, count=1):
        """Append ``count`` singleton axes, for broadcasting against components."""
        idx = (Ellipsis,) + (None,) * count
        return self._map(lambda p: np.asarray(p)[idx])

    def __getitem__(self, index):
        if not isinstance(index, tuple):
            index = (index,)
        idx = (Ellipsis,) + index
        return self._map(lambda p: np.asarray(p)[idx])

    def real(self):
        return self._map(np.real)

    def imag(self):
        return self._map(np.imag)

    def conj(self):
        return self._map(np.conj)

    # -- arithmetic -------------------------------------------------------
    def __add__(self, other):
        if isinstance(other, Jet):
            order = min(self.order, other.order)
            a, b = self.truncate(order), other.truncate(order)
            return Jet(*[x + y for x, y in zip(a.parts(), b.parts())])
        out = self.parts()
        out[0] = out[0] + other
        return Jet(*out)

    __radd__ = __add__

    def __neg__(self):
        return self._map(lambda p: -p)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Jet):
            return bilinear(self, other, np.multiply)
        return self._map(lambda p: p * other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Jet):
            return self * reciprocal(other)
        return self._map(lambda p: p / other)

    def __rtruediv__(self, other):
        return reciprocal(self) * other

    def __pow__(self, exponent):
        if isinstance(exponent, Jet):
            return exp(exponent * log(self))
        return power(self, float(exponent))

    def __repr__(self):
        names = _SLOTS[: 3 if self.order == 1 else 6]
        body = ", ".join(f"{n}={getattr(self, n)!r}" for n in names)
        return f"Jet({body})"


def bilinear(a, b, op):
    """Leibniz expansion of ``op(a, b)`` for an operation linear in each slot."""
    order = min(a.order, b.order)
    val = op(a.val, b.val)
    du = op(a.du, b.val) + op(a.val, b.du)
    dv = op(a.dv, b.val) + op(a.val, b.dv)
    if order == 1:
        return Jet(val, du, dv)
    duu = op(a.duu, b.val) + 2 * op(a.du, b.du) + op(a.val, b.duu)
    duv = op(a.duv, b.val) + op(a.du, b.dv) + op(a.dv, b.du) + op(a.val, b.duv)
    dvv = op(a.dvv, b.val) + 2 * op(a.dv, b.dv) + op(a.val, b.dvv)
    return Jet(val, du, dv, duu, duv, dvv)


def chain(a, f0, f1, f2):
    """Apply a scalar function given its value and first two derivatives."""
    x = a.val
    d1 = f1(x)
    val = f0(x)
    du, dv = d1 * a.du, d1 * a.dv
    if a.order == 1:
        return Jet(val, du, dv)
    d2 = f2(x)
    return Jet(val, du, dv,
               d2 * a.du * a.du + d1 * a.duu,
               d2 * a.du * a.dv + d1 * a.duv,
               d2 * a.dv * a.dv + d1 * a.dvv)


def _require(cond, message):
    if not np.all(cond):
        raise DomainError(message)


def reciprocal(a):
    _require(np.asarray(a.val) != 0, "division by zero")
    return chain(a, lambda x: 1.0 / x, lambda x: -1.0 / x**2, lambda x: 2.0 / x**3)


def sin(a):
    return chain(a, np.sin, np.cos, lambda x: -np.sin(x))


def cos(a):
    return chain(a, np.cos, lambda x: -np.sin(x), lambda x: -np.cos(x))


def exp(a):
    return chain(a, np.exp, np.exp, np.exp)


def log(a):
    _require(np.asarray(a.val) > 0, "log of non-positive argument")
    return chain(a, np.log, lambda x: 1.0 / x, lambda x: -1.0 / x**2)


def sqrt(a):
    _require(np.asarray(a.val) > 0, "sqrt of non-positive argument")
    return chain(a, np.sqrt, lambda x: 0.5 / np.sqrt(x), lambda x: -0.25 * x**-1.5)


def power(a, p):
    x = np.asarray(a.val)
    integral = float(p).is_integer()
    if not integral:
        _require(x > 0 if p < 2 else x >= 0, "non-integer power of non-positive base")
    elif p < 0:
        _require(x != 0, "division by zero")
    c1 = p
    c2 = p * (p - 1)
    return chain(a,
                 lambda s: np.power(s, p),
                 lambda s: c1 * np.power(s, p - 1) if c1 != 0 else np.zeros_like(s),
                 lambda s: c2 * np.power(s, p - 2) if c2 != 0 else np.zeros_like(s))


# -- vector / matrix algebra ------------------------------------------------

def dot(a, b):
    return bilinear(a, b, lambda x, y: np.einsum("...i,...i->...", x, y))


def matvec(m, x):
    return bilinear(m, x, lambda p, q: np.einsum("...ij,...j->...i", p, q))


def matmul(m, n):
    return bilinear(m, n, np.matmul)


def scale(s, x):
    """Scalar jet times vector jet."""
    return bilinear(s.expand(x.val.ndim - np.ndim(s.val)), x, np.multiply)


def norm(x):
    return sqrt(dot(x, x))


def normalize(x):
    return scale(reciprocal(norm(x)), x)


def wedge(x, y):
    """x y^T - y x^T for vector jets (skew matrix jet)."""
    return bilinear(x, y, _wedge)


def _wedge(p, q):
    return p[..., :, None] * q[..., None, :] - q[..., :, None] * p[..., None, :]


def inv(m):
    """Inverse of a matrix-valued jet."""
    mi = np.linalg.inv(m.val)
    du = -mi @ m.du @ mi
    dv = -mi @ m.dv @ mi
    if m.order == 1:
        return Jet(mi, du, dv)
    duu = -mi @ m.duu @ mi + 2 * mi @ m.du @ mi @ m.du @ mi
    dvv = -mi @ m.dvv @ mi + 2 * mi @ m.dv @ mi @ m.dv @ mi
    duv = -mi @ m.duv @ mi + mi @ m.du @ mi @ m.dv @ mi + mi @ m.dv @ mi @ m.du @ mi
    return Jet(mi, du, dv, duu, duv, dvv)
