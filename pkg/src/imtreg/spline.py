"""Bivariate polynomial splines over triangulations.

Piecewise degree-``d`` polynomials in Bernstein form with cross-edge
smoothness of order ``r`` (0 <= r < d). The raw coefficient vector
concatenates per-triangle Bernstein blocks; the smoothness constraints are
encoded as a sparse matrix ``A`` whose null space (columns of ``Q``) is the
working coordinate system for all fitted functions.
"""

import hashlib
import json
from dataclasses import dataclass
from math import comb, factorial

import numpy as np
import scipy.sparse as sp

from . import _kernels
from .errors import RankDeficientSpace, SpaceMismatch, UnderdeterminedFit
from .geometry import Triangulation

_NULLSPACE_RTOL = 1e-10


def bernstein_indices(degree):
    """Exponent triples (i, j, k), i+j+k = degree, in lexicographic order."""
    return [
        (i, j, degree - i - j) for i in range(degree + 1) for j in range(degree - i + 1)
    ]


def _index_arrays(degree):
    ijk = np.array(bernstein_indices(degree), dtype=np.int64)
    coef = np.array(
        [factorial(degree) / (factorial(i) * factorial(j) * factorial(k)) for i, j, k in ijk],
        dtype=np.float64,
    )
    return ijk, coef


def n_bernstein(degree):
    """Dimension of the degree-``degree`` polynomial space on one triangle."""
    return (degree + 1) * (degree + 2) // 2


def bernstein_eval(degree, lam):
    """All Bernstein basis values at one barycentric point.

    Returns a vector of length (degree+1)(degree+2)/2 in the fixed
    lexicographic (i, j, k) order of :func:`bernstein_indices`.
    """
    ijk, coef = _index_arrays(degree)
    lam = np.asarray(lam, dtype=float)[None, :]
    return _kernels.bernstein_matrix(ijk, coef, lam)[0]


def bernstein_matrix(degree, lam):
    """Bernstein basis values at many barycentric points: (N, m_d)."""
    ijk, coef = _index_arrays(degree)
    return _kernels.bernstein_matrix(ijk, coef, np.ascontiguousarray(lam, dtype=np.float64))


def directional_derivative_matrix(degree, a):
    """Coefficient map of the directional derivative in Bernstein form.

    Maps degree-``degree`` coefficients to degree-``degree - 1`` coefficients
    for a direction whose barycentric coordinates are ``a`` (summing to 0 for
    a genuine direction vector).
    """
    src = {t: p for p, t in enumerate(bernstein_indices(degree))}
    rows = bernstein_indices(degree - 1)
    out = np.zeros((len(rows), len(src)))
    for rpos, (i, j, k) in enumerate(rows):
        out[rpos, src[(i + 1, j, k)]] += degree * a[0]
        out[rpos, src[(i, j + 1, k)]] += degree * a[1]
        out[rpos, src[(i, j, k + 1)]] += degree * a[2]
    return out


def unit_mass_block(degree):
    """Bernstein product integrals over a unit-area triangle.

    ``M[ab] = C(i+i',i) C(j+j',j) C(k+k',k) / (C(2d,d) (2d+1) (d+1))`` times
    the triangle area (here 1).
    """
    ijk = bernstein_indices(degree)
    m = len(ijk)
    denom = comb(2 * degree, degree) * (2 * degree + 1) * (degree + 1)
    out = np.empty((m, m))
    for a, (i1, j1, k1) in enumerate(ijk):
        for b, (i2, j2, k2) in enumerate(ijk):
            out[a, b] = comb(i1 + i2, i1) * comb(j1 + j2, j1) * comb(k1 + k2, k1) / denom
    return out


def _direction_coords(mesh, tri_id, w):
    """Barycentric coordinates of direction vector ``w`` in triangle ``tri_id``."""
    return mesh._inv_maps[tri_id][:, :2] @ np.asarray(w, dtype=float)


def smoothness_constraints(mesh, degree, smoothness):
    """Sparse matrix ``A`` with ``A c = 0`` iff the piecewise polynomial with
    raw Bernstein coefficients ``c`` is C^smoothness across every interior edge.

    For each interior edge and each derivative order ``rho`` in 0..smoothness,
    the cross-edge jump of the rho-th normal derivative restricted to the edge
    is a univariate polynomial of degree ``degree - rho``; forcing it to vanish
    at ``degree - rho + 1`` distinct edge points characterizes it exactly.
    """
    if not 0 <= smoothness < degree:
        raise ValueError("smoothness must satisfy 0 <= r < degree")
    md = n_bernstein(degree)
    rows, cols, vals = [], [], []
    row = 0
    for (va, vb), tris in mesh.interior_edges():
        pa, pb = mesh.vertices[va], mesh.vertices[vb]
        edge = pb - pa
        normal = np.array([-edge[1], edge[0]]) / np.linalg.norm(edge)
        t1, t2 = tris
        deriv_ops = {}
        for t in (t1, t2):
            a = _direction_coords(mesh, t, normal)
            ops = [np.eye(md)]
            for rho in range(1, smoothness + 1):
                ops.append(directional_derivative_matrix(degree - rho + 1, a) @ ops[-1])
            deriv_ops[t] = ops
        for rho in range(smoothness + 1):
            npts = degree - rho + 1
            ts = np.linspace(0.0, 1.0, npts)
            for s in ts:
                p = pa + s * edge
                entries = np.zeros(2 * md)
                for sign, t in ((1.0, t1), (-1.0, t2)):
                    lam = mesh.barycentric(t, p)
                    brow = bernstein_eval(degree - rho, lam)
                    entries_t = sign * (brow @ deriv_ops[t][rho])
                    if t == t1:
                        entries[:md] = entries_t
                    else:
                        entries[md:] = entries_t
                scale = np.abs(entries).max()
                if scale == 0:
                    continue
                entries /= scale
                for pos, v in enumerate(entries[:md]):
                    if v != 0.0:
                        rows.append(row)
                        cols.append(t1 * md + pos)
                        vals.append(v)
                for pos, v in enumerate(entries[md:]):
                    if v != 0.0:
                        rows.append(row)
                        cols.append(t2 * md + pos)
                        vals.append(v)
                row += 1
    raw_dim = mesh.n_triangles * md
    return sp.csr_matrix((vals, (rows, cols)), shape=(row, raw_dim))


def _nullspace(a_dense, rtol=_NULLSPACE_RTOL):
    """Orthonormal basis of the null space via SVD with relative tolerance."""
    if a_dense.shape[0] == 0:
        return np.eye(a_dense.shape[1])
    _, s, vt = np.linalg.svd(a_dense, full_matrices=True)
    tol = rtol * (s[0] if s.size else 1.0)
    rank = int(np.sum(s > tol))
    q = vt[rank:].T
    if q.shape[1] == 0:
        raise RankDeficientSpace("smoothness constraints leave an empty spline space")
    return np.ascontiguousarray(q)


class SplineSpace:
    """Constrained spline space S^r_d over a triangulation.

    Attributes
    ----------
    mesh : Triangulation
    degree, smoothness : int
    Q : (raw_dim, m) orthonormal null-space basis of the constraint matrix
    M : raw Bernstein mass matrix (sparse block diagonal)
    H : (m, m) Gram matrix of the constrained basis, symmetric positive definite
    space_hash : short fingerprint of (mesh, degree, smoothness)
    """

    def __init__(self, mesh, degree, smoothness, constraints, q):
        self.mesh = mesh
        self.degree = int(degree)
        self.smoothness = int(smoothness)
        self.constraints = constraints
        self.Q = q
        md = n_bernstein(degree)
        base = unit_mass_block(degree)
        areas = mesh.triangle_areas()
        self.M = sp.block_diag([base * a for a in areas], format="csr")
        h = q.T @ (self.M @ q)
        self.H = 0.5 * (h + h.T)
        self.raw_dim = mesh.n_triangles * md
        self.dim = q.shape[1]
        self.space_hash = self._fingerprint()
        self._h_sqrt = None
        self._h_inv_sqrt = None
        self._energy = None
        self._const_coeffs = None
        self._grid_cache = {}

    def _fingerprint(self):
        h = hashlib.sha256()
        h.update(self.mesh.vertices.tobytes())
        h.update(self.mesh.triangles.tobytes())
        h.update(np.int64(self.degree).tobytes())
        h.update(np.int64(self.smoothness).tobytes())
        return h.hexdigest()[:16]

    def _h_roots(self):
        if self._h_sqrt is None:
            w, u = np.linalg.eigh(self.H)
            if w[0] <= 0:
                raise RankDeficientSpace("Gram matrix is not positive definite")
            self._h_sqrt = (u * np.sqrt(w)) @ u.T
            self._h_inv_sqrt = (u / np.sqrt(w)) @ u.T
        return self._h_sqrt, self._h_inv_sqrt

    @property
    def H_sqrt(self):
        return self._h_roots()[0]

    @property
    def H_inv_sqrt(self):
        return self._h_roots()[1]

    def constant_coeffs(self):
        """Coordinates of the constant function 1 (exact: 1 is C^infinity)."""
        if self._const_coeffs is None:
            self._const_coeffs = self.Q.T @ np.ones(self.raw_dim)
        return self._const_coeffs

    def inner(self, c1, c2):
        """L2 inner product of two functions given in constrained coordinates."""
        return float(c1 @ self.H @ c2)

    def energy_matrix(self):
        """Thin-plate roughness matrix P with c' P c = integral of
        f_xx^2 + 2 f_xy^2 + f_yy^2, in constrained coordinates."""
        if self._energy is not None:
            return self._energy
        d = self.degree
        if d < 2:
            self._energy = np.zeros((self.dim, self.dim))
            return self._energy
        md = n_bernstein(d)
        base2 = unit_mass_block(d - 2)
        areas = self.mesh.triangle_areas()
        blocks = []
        ex, ey = np.array([1.0, 0.0]), np.array([0.0, 1.0])
        for t in range(self.mesh.n_triangles):
            ax = _direction_coords(self.mesh, t, ex)
            ay = _direction_coords(self.mesh, t, ey)
            dx1 = directional_derivative_matrix(d, ax)
            dy1 = directional_derivative_matrix(d, ay)
            dxx = directional_derivative_matrix(d - 1, ax) @ dx1
            dxy = directional_derivative_matrix(d - 1, ax) @ dy1
            dyy = directional_derivative_matrix(d - 1, ay) @ dy1
            m2 = base2 * areas[t]
            e = dxx.T @ m2 @ dxx + 2.0 * dxy.T @ m2 @ dxy + dyy.T @ m2 @ dyy
            blocks.append(e)
        e_raw = sp.block_diag(blocks, format="csr")
        p = self.Q.T @ (e_raw @ self.Q)
        self._energy = 0.5 * (p + p.T)
        return self._energy

    def raw_basis_rows(self, points):
        """(tri ids, Bernstein rows) for many points; id -1 marks outside."""
        idx, lam = self.mesh.locate_many(points)
        rows = bernstein_matrix(self.degree, lam)
        rows[idx < 0] = 0.0
        return idx, rows

    def design_matrix(self, points):
        """Constrained-basis design matrix (N, dim); zero rows outside the domain."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        idx, rows = self.raw_basis_rows(pts)
        md = n_bernstein(self.degree)
        n = pts.shape[0]
        inside = np.nonzero(idx >= 0)[0]
        data = rows[inside].ravel()
        indices = (
            idx[inside][:, None] * md + np.arange(md)[None, :]
        ).ravel()
        indptr = np.zeros(n + 1, dtype=np.int64)
        indptr[inside + 1] = md
        indptr = np.cumsum(indptr)
        d_raw = sp.csr_matrix((data, indices, indptr), shape=(n, self.raw_dim))
        return d_raw @ self.Q

    def grid_design(self, points, penalty=0.0):
        """Cached least-squares projector for a fixed evaluation grid."""
        pts = np.ascontiguousarray(np.atleast_2d(points), dtype=np.float64)
        key = (hashlib.sha256(pts.tobytes()).hexdigest(), float(penalty))
        if key not in self._grid_cache:
            self._grid_cache[key] = GridDesign(self, pts, float(penalty))
        return self._grid_cache[key]


class GridDesign:
    """Precomputed least-squares smoother for images sampled on one grid.

    Points outside the domain are ignored. With zero penalty the fit is plain
    least squares (SVD-based); with positive penalty the normal equations are
    augmented with the thin-plate roughness matrix.
    """

    def __init__(self, space, points, penalty):
        self.space = space
        self.points = points
        self.penalty = penalty
        idx, _ = space.mesh.locate_many(points)
        self.inside = idx >= 0
        d_full = space.design_matrix(points)
        self.design = np.asarray(d_full[self.inside])
        n_in, m = self.design.shape
        if penalty == 0.0:
            u, s, vt = np.linalg.svd(self.design, full_matrices=False)
            tol = max(n_in, m) * np.finfo(float).eps * (s[0] if s.size else 0.0)
            self.rank = int(np.sum(s > tol))
            if self.rank < m:
                raise UnderdeterminedFit(
                    f"design rank {self.rank} < space dimension {m}; "
                    "add grid points or a positive penalty"
                )
            self._solver = (u, s, vt)
        else:
            gram = self.design.T @ self.design + penalty * space.energy_matrix()
            self._chol = np.linalg.cholesky(gram)
            self.rank = m

    def fit(self, values):
        """Smooth one image (1d) or a stack of images (n, N_s) into the space."""
        v = np.asarray(values, dtype=float)
        single = v.ndim == 1
        v2 = np.atleast_2d(v)[:, self.inside]
        if self.penalty == 0.0:
            u, s, vt = self._solver
            coeffs = (v2 @ u) / s @ vt
        else:
            rhs = v2 @ self.design
            y = np.linalg.solve(self._chol, rhs.T)
            coeffs = np.linalg.solve(self._chol.T, y).T
        return coeffs[0] if single else coeffs


def build_space(mesh, degree=5, smoothness=1):
    """Assemble the constrained spline space S^smoothness_degree over ``mesh``.

    The null-space basis comes from a rank-revealing SVD of the constraint
    matrix (singular values below 1e-10 of the largest treated as zero); the
    Gram matrix uses the closed-form Bernstein product integral per triangle.
    """
    if not isinstance(mesh, Triangulation):
        raise TypeError("mesh must be a Triangulation")
    a = smoothness_constraints(mesh, degree, smoothness)
    q = _nullspace(a.toarray())
    return SplineSpace(mesh, degree, smoothness, a, q)


@dataclass
class SplineFunction:
    """A member of a spline space: constrained coordinates plus the space.

    Evaluates to 0 outside the mesh by convention.
    """

    space: SplineSpace
    coeffs: np.ndarray

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=float)
        if self.coeffs.shape != (self.space.dim,):
            raise SpaceMismatch("coefficient length does not match space dimension")

    def evaluate(self, points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        idx, rows = self.space.raw_basis_rows(pts)
        md = n_bernstein(self.space.degree)
        raw = (self.space.Q @ self.coeffs).reshape(self.space.mesh.n_triangles, md)
        vals = np.zeros(pts.shape[0])
        hit = idx >= 0
        vals[hit] = np.einsum("ij,ij->i", rows[hit], raw[idx[hit]])
        return vals if np.asarray(points).ndim > 1 else float(vals[0])

    def integral(self):
        """Integral of the function over the domain."""
        return self.space.inner(self.coeffs, self.space.constant_coeffs())

    def to_json(self):
        return json.dumps(
            {"space_hash": self.space.space_hash, "coeffs": self.coeffs.tolist()}
        )

    @classmethod
    def from_json(cls, text, space):
        doc = json.loads(text)
        if doc["space_hash"] != space.space_hash:
            raise SpaceMismatch("serialized coefficients belong to a different space")
        return cls(space, np.array(doc["coeffs"], dtype=float))


def fit_image(space, grid_points, values, penalty=0.0):
    """Least-squares smooth of one gridded image into the spline space.

    Minimizes sum of squared residuals at the grid points plus
    ``penalty`` times the thin-plate roughness of the fit.
    """
    gd = space.grid_design(grid_points, penalty)
    return SplineFunction(space, gd.fit(np.asarray(values, dtype=float)))


def fit_images(space, grid_points, values, penalty=0.0):
    """Smooth a stack of images (n, N_s) sharing one grid; returns (n, dim)."""
    gd = space.grid_design(grid_points, penalty)
    return gd.fit(np.asarray(values, dtype=float))
