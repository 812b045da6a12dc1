"""Hot numeric kernels: point location and Bernstein basis evaluation.

Both kernels exist in two interchangeable implementations:

* a numba ``@njit`` version (default when numba imports cleanly), and
* a pure-numpy version.

Set the environment variable ``IMTREG_DISABLE_NUMBA=1`` before import to
force the numpy path (useful for debugging and for benchmarking the two
paths against each other; see ``benchmarks/bench_kernels.py``).
"""

import os

import numpy as np

_DISABLE = os.environ.get("IMTREG_DISABLE_NUMBA", "").strip().lower() in (
    "1",
    "true",
    "yes",
)

try:
    if _DISABLE:
        raise ImportError("numba disabled by IMTREG_DISABLE_NUMBA")
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised via subprocess in tests
    HAVE_NUMBA = False


def _locate_points_numpy(inv_maps, pts, tol):
    """Vectorized point location.

    inv_maps : (T, 3, 3) per-triangle matrices mapping (x, y, 1) to
        barycentric coordinates.
    pts : (N, 2) query points.

    Returns (idx, lam): idx[i] is the lowest triangle id containing pts[i]
    (-1 if outside every triangle), lam[i] its barycentric coordinates.
    """
    n = pts.shape[0]
    aug = np.empty((n, 3))
    aug[:, :2] = pts
    aug[:, 2] = 1.0
    # (T, N, 3) barycentric coordinates of every point in every triangle
    lam_all = np.einsum("tij,nj->tni", inv_maps, aug)
    inside = (lam_all >= -tol).all(axis=2)  # (T, N)
    any_inside = inside.any(axis=0)
    first = np.argmax(inside, axis=0)  # lowest triangle id, ties broken by order
    idx = np.where(any_inside, first, -1)
    lam = np.zeros((n, 3))
    hit = idx >= 0
    lam[hit] = lam_all[idx[hit], np.nonzero(hit)[0], :]
    return idx.astype(np.int64), lam


def _bernstein_matrix_numpy(ijk, coef, lam):
    """Evaluate all Bernstein polynomials of one degree at many points.

    ijk : (m, 3) integer exponent triples with i+j+k = d.
    coef : (m,) multinomial coefficients d!/(i! j! k!).
    lam : (N, 3) barycentric coordinates.

    Returns (N, m).
    """
    # lam ** exponent broadcast: (N, m) per barycentric component
    out = coef[None, :] * (
        lam[:, 0:1] ** ijk[None, :, 0]
        * lam[:, 1:2] ** ijk[None, :, 1]
        * lam[:, 2:3] ** ijk[None, :, 2]
    )
    return out


if HAVE_NUMBA:

    @njit(cache=True)
    def _locate_points_numba(inv_maps, pts, tol):
        n = pts.shape[0]
        t = inv_maps.shape[0]
        idx = np.full(n, -1, dtype=np.int64)
        lam = np.zeros((n, 3))
        for p in range(n):
            x = pts[p, 0]
            y = pts[p, 1]
            for tri in range(t):
                l0 = inv_maps[tri, 0, 0] * x + inv_maps[tri, 0, 1] * y + inv_maps[tri, 0, 2]
                if l0 < -tol:
                    continue
                l1 = inv_maps[tri, 1, 0] * x + inv_maps[tri, 1, 1] * y + inv_maps[tri, 1, 2]
                if l1 < -tol:
                    continue
                l2 = inv_maps[tri, 2, 0] * x + inv_maps[tri, 2, 1] * y + inv_maps[tri, 2, 2]
                if l2 < -tol:
                    continue
                idx[p] = tri
                lam[p, 0] = l0
                lam[p, 1] = l1
                lam[p, 2] = l2
                break
        return idx, lam

    @njit(cache=True)
    def _bernstein_matrix_numba(ijk, coef, lam):
        n = lam.shape[0]
        m = ijk.shape[0]
        out = np.empty((n, m))
        for p in range(n):
            l1 = lam[p, 0]
            l2 = lam[p, 1]
            l3 = lam[p, 2]
            for b in range(m):
                v = coef[b]
                for _ in range(ijk[b, 0]):
                    v *= l1
                for _ in range(ijk[b, 1]):
                    v *= l2
                for _ in range(ijk[b, 2]):
                    v *= l3
                out[p, b] = v
        return out

    locate_points = _locate_points_numba
    bernstein_matrix = _bernstein_matrix_numba
else:
    locate_points = _locate_points_numpy
    bernstein_matrix = _bernstein_matrix_numpy

ACTIVE_BACKEND = "numba" if HAVE_NUMBA else "numpy"
