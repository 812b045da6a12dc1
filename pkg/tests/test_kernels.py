import os
import subprocess
import sys

import numpy as np
import pytest

from imtreg import _kernels
from imtreg.spline import _index_arrays


@pytest.mark.skipif(not _kernels.HAVE_NUMBA, reason="numba not importable")
class TestBackendEquivalence:
    def test_locate_agrees(self, mesh32):
        rng = np.random.default_rng(0)
        pts = rng.uniform(-0.2, 1.2, size=(3000, 2))
        idx_nb, lam_nb = _kernels._locate_points_numba(mesh32._inv_maps, pts, 1e-12)
        idx_np, lam_np = _kernels._locate_points_numpy(mesh32._inv_maps, pts, 1e-12)
        assert np.array_equal(idx_nb, idx_np)
        inside = idx_nb >= 0
        assert np.allclose(lam_nb[inside], lam_np[inside], atol=1e-14)

    def test_bernstein_agrees(self):
        rng = np.random.default_rng(1)
        lam = rng.dirichlet(np.ones(3), size=500)
        for d in (1, 3, 5):
            ijk, coef = _index_arrays(d)
            a = _kernels._bernstein_matrix_numba(ijk, coef, lam)
            b = _kernels._bernstein_matrix_numpy(ijk, coef, lam)
            assert np.allclose(a, b, rtol=1e-13, atol=1e-15)


class TestEnvFlag:
    def test_disable_numba_selects_numpy_backend(self):
        code = (
            "import imtreg._kernels as k; "
            "print(k.ACTIVE_BACKEND, k.HAVE_NUMBA)"
        )
        env = dict(os.environ, IMTREG_DISABLE_NUMBA="1")
        out = subprocess.run(
            [sys.executable, "-c", code], env=env, capture_output=True, text=True
        )
        assert out.returncode == 0
        assert out.stdout.split() == ["numpy", "False"]

    def test_default_backend_reports_itself(self):
        assert _kernels.ACTIVE_BACKEND in ("numba", "numpy")

    def test_numpy_pipeline_matches_default(self):
        # full fit through the numpy fallback must match the default backend
        script = r"""
import numpy as np
from imtreg import SimConfig, generate, build_triangulation, build_space, fit
cfg = SimConfig(n=40, seed=3, grid_shape=(20, 20))
data, _ = generate(cfg)
mesh = build_triangulation([(0, 0), (1, 0), (1, 1), (0, 1)], 8)
model = fit(data, build_space(mesh, 5, 1), selection="pve")
print(repr(float(model.alpha1[0])), repr(float(model.gamma1[0])))
"""
        runs = {}
        for flag in ("0", "1"):
            env = dict(os.environ, IMTREG_DISABLE_NUMBA=flag)
            out = subprocess.run(
                [sys.executable, "-c", script], env=env, capture_output=True, text=True
            )
            assert out.returncode == 0, out.stderr
            runs[flag] = out.stdout.strip().split()
        a = [float(v) for v in runs["0"]]
        b = [float(v) for v in runs["1"]]
        assert np.allclose(a, b, rtol=1e-10)
