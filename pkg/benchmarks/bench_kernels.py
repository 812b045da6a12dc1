"""Benchmark the numba kernels against the pure-numpy fallback.

Runs both implementations of point location and Bernstein evaluation on a
realistic workload (a 128-triangle mesh queried on a 300 x 300 grid) and
prints a timing table. The package-level dispatch is controlled by the
IMTREG_DISABLE_NUMBA environment variable; this script calls both paths
directly so one process covers both.
"""

import time

import numpy as np

from imtreg._kernels import (
    HAVE_NUMBA,
    _bernstein_matrix_numpy,
    _locate_points_numpy,
)
from imtreg.geometry import build_triangulation
from imtreg.spline import _index_arrays

if HAVE_NUMBA:
    from imtreg._kernels import _bernstein_matrix_numba, _locate_points_numba


def timeit(fn, *args, repeat=5):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    mesh = build_triangulation([(0, 0), (1, 0), (1, 1), (0, 1)], 128)
    g = (np.arange(300) + 0.5) / 300
    pts = np.array([(x, y) for x in g for y in g])
    ijk, coef = _index_arrays(5)
    print(f"mesh: {mesh.n_triangles} triangles, {pts.shape[0]} query points, degree 5")
    print(f"numba available: {HAVE_NUMBA}")

    t_np, (idx_np, lam_np) = timeit(_locate_points_numpy, mesh._inv_maps, pts, 1e-12)
    t_bp = timeit(_bernstein_matrix_numpy, ijk, coef, lam_np)[0]
    rows = [("locate/numpy", t_np), ("bernstein/numpy", t_bp)]

    if HAVE_NUMBA:
        _locate_points_numba(mesh._inv_maps, pts[:4], 1e-12)  # JIT warmup
        _bernstein_matrix_numba(ijk, coef, lam_np[:4])
        t_nb, (idx_nb, lam_nb) = timeit(_locate_points_numba, mesh._inv_maps, pts, 1e-12)
        t_bb = timeit(_bernstein_matrix_numba, ijk, coef, lam_nb)[0]
        assert np.array_equal(idx_np, idx_nb)
        assert np.allclose(lam_np, lam_nb, atol=1e-14)
        rows += [("locate/numba", t_nb), ("bernstein/numba", t_bb)]

    print(f"{'kernel':<20}{'best (ms)':>12}")
    for name, t in rows:
        print(f"{name:<20}{1e3 * t:>12.2f}")
    if HAVE_NUMBA:
        print(f"locate speedup:    {t_np / t_nb:5.1f}x")
        print(f"bernstein speedup: {t_bp / t_bb:5.1f}x")


if __name__ == "__main__":
    main()
