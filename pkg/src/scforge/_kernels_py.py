"""Pure-numpy implementations of the hot loops.

These are the reference versions; the compiled module ``_kernels`` performs
the same floating-point operations in the same order.
"""

import numpy as np


def goursat_march(M, a, b, hu, hv):
    """Solve phi_uv + M phi = 0 from data on the lines v = v0 and u = u0.

    The trapezoidal cell update is applied along anti-diagonals, which are
    mutually independent, so each diagonal is one vectorized step.
    """
    M = np.ascontiguousarray(M, dtype=float)
    nu, nv = M.shape
    phi = np.zeros((nu, nv))
    phi[:, 0] = a
    phi[0, :] = b
    k = 0.25 * hu * hv
    for s in range(2, nu + nv - 1):
        i = np.arange(max(1, s - nv + 1), min(nu - 1, s - 1) + 1)
        j = s - i
        west, south, sw = phi[i - 1, j], phi[i, j - 1], phi[i - 1, j - 1]
        rhs = south + west - sw - k * (M[i - 1, j - 1] * sw + M[i, j - 1] * south
                                       + M[i - 1, j] * west)
        phi[i, j] = rhs / (1.0 + k * M[i, j])
    return phi


def quad_increments(f, h):
    """Fourth-order interval integrals of samples ``f`` along axis 0."""
    f = np.asarray(f, dtype=float)
    inc = np.empty((f.shape[0] - 1,) + f.shape[1:])
    inc[1:-1] = (-f[:-3] + 13.0 * f[1:-2] + 13.0 * f[2:-1] - f[3:]) * (h / 24.0)
    inc[0] = (9.0 * f[0] + 19.0 * f[1] - 5.0 * f[2] + f[3]) * (h / 24.0)
    inc[-1] = (9.0 * f[-1] + 19.0 * f[-2] - 5.0 * f[-3] + f[-4]) * (h / 24.0)
    return inc


def cumquad4(f, h):
    """Cumulative integral along axis 0 starting from zero at index 0."""
    f = np.asarray(f, dtype=float)
    out = np.zeros_like(f)
    out[1:] = np.cumsum(quad_increments(f, h), axis=0)
    return out
