"""Compiled kernels and their numpy reference implementations."""

import os
import subprocess
import sys

import numpy as np
import pytest

from scforge import _kernels_py as ref
from scforge import kernels

try:
    from scforge import _kernels as compiled
except ImportError:          # the package runs without the extension
    compiled = None

needs_compiled = pytest.mark.skipif(compiled is None, reason="compiled extension not built")


def data(seed=3, nu=41, nv=29):
    rng = np.random.default_rng(seed)
    return rng.normal(size=(nu, nv)), rng.normal(size=nu), rng.normal(size=nv)


class TestReference:
    """Properties of the numpy kernels."""

    def test_goursat_keeps_boundary(self):
        M, a, b = data()
        b[0] = a[0]
        phi = ref.goursat_march(M, a, b, 0.1, 0.2)
        np.testing.assert_array_equal(phi[:, 0], a)
        np.testing.assert_array_equal(phi[0, :], b)

    def test_goursat_zero_potential_is_separable(self):
        _, a, b = data()
        b[0] = a[0]
        phi = ref.goursat_march(np.zeros((41, 29)), a, b, 0.1, 0.1)
        np.testing.assert_allclose(phi, a[:, None] + b[None, :] - a[0], atol=1e-12)

    def test_cumquad4_exact_on_cubics(self):
        x = np.linspace(0, 2, 11)
        out = ref.cumquad4(x**3 - x, x[1] - x[0])
        np.testing.assert_allclose(out, x**4 / 4 - x**2 / 2, atol=1e-13)

    def test_cumquad4_vector_shape(self):
        f = np.ones((9, 3, 2))
        assert ref.cumquad4(f, 0.5).shape == (9, 3, 2)
        np.testing.assert_allclose(ref.cumquad4(f, 0.5)[:, 1, 1], 0.5 * np.arange(9))


@needs_compiled
class TestCompiledAgreement:
    """The extension performs the same operations in the same order."""

    def test_goursat_bitwise(self):
        M, a, b = data()
        b[0] = a[0]
        np.testing.assert_array_equal(compiled.goursat_march(M, a, b, 0.05, 0.07),
                                      ref.goursat_march(M, a, b, 0.05, 0.07))

    @pytest.mark.parametrize("shape", [(33,), (33, 4), (17, 5, 3)])
    def test_cumquad4(self, shape):
        f = np.random.default_rng(1).normal(size=shape)
        np.testing.assert_allclose(compiled.cumquad4(f, 0.1), ref.cumquad4(f, 0.1), rtol=1e-14, atol=1e-14)


class TestDispatch:
    """The backend is chosen at import and can be forced to numpy."""

    def test_backend_name(self):
        assert kernels.BACKEND in ("compiled", "python")
        if compiled is not None and os.environ.get("SCFORGE_PURE_PYTHON") is None:
            assert kernels.BACKEND == "compiled"

    def test_pure_python_override(self):
        env = dict(os.environ, SCFORGE_PURE_PYTHON="1")
        res = subprocess.run([sys.executable, "-c", "from scforge import kernels; print(kernels.BACKEND)"],
                             capture_output=True, text=True, env=env)
        assert res.stdout.strip() == "python"
