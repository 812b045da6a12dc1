"""Data-driven orthonormal bases for image ensembles.

The ensemble of spline-smoothed images defines an empirical covariance in the
spline space; transforming by the Gram square root turns its eigenproblem
into a plain symmetric one. Eigenvectors map back to orthonormal functions
(orthonormal in the L2 inner product, computed exactly through the Gram
matrix), and per-subject scores are the exact L2 inner products of subjects
with those functions.
"""

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import AllZeroSpectrum, NonFiniteCovariance, SpaceMismatch, ZeroAssociation
from .spline import SplineFunction, SplineSpace, fit_images

_EIG_CLIP = 1e-10


@dataclass
class SmoothedEnsemble:
    """Spline coefficients of n subject images sharing one space.

    coeffs : (n, dim) rows of constrained-basis coordinates
    centered : True when column means have been removed
    mean_coeffs : the removed column means (zeros when centered is False)
    """

    space: SplineSpace
    coeffs: np.ndarray
    centered: bool
    mean_coeffs: np.ndarray = field(default=None)

    def __post_init__(self):
        self.coeffs = np.atleast_2d(np.asarray(self.coeffs, dtype=float))
        if self.mean_coeffs is None:
            self.mean_coeffs = np.zeros(self.space.dim)

    @property
    def n(self):
        return self.coeffs.shape[0]


def smooth_ensemble(images, grid_points, space, penalty=0.0, center=True):
    """Smooth each subject image into the space, optionally removing the mean.

    images : (n, N_s) pixel values on the shared grid ``grid_points``.
    """
    coeffs = np.atleast_2d(fit_images(space, grid_points, images, penalty))
    if center:
        mean = coeffs.mean(axis=0)
        return SmoothedEnsemble(space, coeffs - mean, True, mean)
    return SmoothedEnsemble(space, coeffs, False)


@dataclass
class FpcBasis:
    """Eigenpairs of the smoothed-ensemble covariance.

    eigvals : nonincreasing, clipped at zero
    eigvecs : (dim, dim) columns in Gram-sqrt coordinates; the function for
        column k has constrained coordinates ``H^{-1/2} eigvecs[:, k]``
    k_selected : number of leading bases chosen by a selection rule (or None)
    """

    space: SplineSpace
    eigvals: np.ndarray
    eigvecs: np.ndarray
    k_selected: Optional[int] = None

    def coeff_vector(self, k):
        """Constrained-basis coordinates of the k-th eigenfunction."""
        return self.space.H_inv_sqrt @ self.eigvecs[:, k]

    def eigenfunction(self, k):
        return SplineFunction(self.space, self.coeff_vector(k))

    def to_json(self):
        return json.dumps(
            {
                "space_hash": self.space.space_hash,
                "eigvals": self.eigvals.tolist(),
                "eigvecs": self.eigvecs.tolist(),
                "k_selected": self.k_selected,
            }
        )

    @classmethod
    def from_json(cls, text, space):
        doc = json.loads(text)
        if doc["space_hash"] != space.space_hash:
            raise SpaceMismatch("basis belongs to a different spline space")
        return cls(
            space,
            np.array(doc["eigvals"], dtype=float),
            np.array(doc["eigvecs"], dtype=float),
            doc["k_selected"],
        )

    def raster(self, points, k):
        """Eigenfunction k sampled at arbitrary points (for contour export)."""
        return self.eigenfunction(k).evaluate(points)


@dataclass
class ScoreMatrix:
    """Per-subject inner products with the leading eigenfunctions."""

    scores: np.ndarray
    basis: FpcBasis
    channel: int = 1


def eig_from_transformed(t_centered, n, space):
    """Eigendecomposition of (1/n) T'T for centered Gram-sqrt coordinates T.

    Eigenvalues always span the full space dimension (zero-padded); at most
    min(dim, n) eigenvectors exist, so only those are returned as columns.
    For n below the space dimension the n x n inner-product route is used,
    which is algebraically identical and much cheaper. Eigenvector signs are
    fixed so the entry of largest magnitude is positive.
    """
    if not np.all(np.isfinite(t_centered)):
        raise NonFiniteCovariance("coordinates contain non-finite values")
    m = t_centered.shape[1]
    if n < m:
        g = (t_centered @ t_centered.T) / n
        g = 0.5 * (g + g.T)
        w, u = np.linalg.eigh(g)
        w = w[::-1]
        u = u[:, ::-1]
        if np.any(w < -_EIG_CLIP * max(1.0, abs(w[0]))):
            raise NonFiniteCovariance("covariance has a significantly negative eigenvalue")
        w = np.clip(w, 0.0, None)
        pos = w > 0
        v = np.zeros((m, n))
        if pos.any():
            v[:, pos] = (t_centered.T @ u[:, pos]) / np.sqrt(n * w[pos])
        eigvals = np.concatenate([w, np.zeros(m - n)])
    else:
        k = (t_centered.T @ t_centered) / n
        k = 0.5 * (k + k.T)
        w, v = np.linalg.eigh(k)
        w = w[::-1]
        v = np.ascontiguousarray(v[:, ::-1])
        if np.any(w < -_EIG_CLIP * max(1.0, abs(w[0]))):
            raise NonFiniteCovariance("covariance has a significantly negative eigenvalue")
        eigvals = np.clip(w, 0.0, None)
    # sign convention: largest-magnitude entry of each eigenvector is positive
    flip = v[np.abs(v).argmax(axis=0), np.arange(v.shape[1])] < 0
    v[:, flip] *= -1.0
    return FpcBasis(space, eigvals, v)


def compute_fpc(ensemble):
    """Eigendecompose the ensemble covariance in Gram-sqrt coordinates.

    With per-subject coefficient rows c_i, the covariance in the spline space
    is C = coeffs' coeffs / n, and the symmetric matrix eigendecomposed is
    ``H^{1/2} C H^{1/2}``. Its eigenvalues are the variances of the subject
    scores along each eigenfunction.
    """
    if not ensemble.centered:
        raise ValueError("ensemble must be centered before computing the basis")
    c = ensemble.coeffs
    if not np.all(np.isfinite(c)):
        raise NonFiniteCovariance("ensemble coefficients contain non-finite values")
    t = c @ ensemble.space.H_sqrt
    return eig_from_transformed(t, ensemble.n, ensemble.space)


def scores(ensemble, basis, k, channel=1):
    """Score matrix of an ensemble against the leading ``k`` eigenfunctions.

    The score of subject i on eigenfunction phi_k is the exact L2 inner
    product, which in coordinates is ``eigvec_k' H^{1/2} c_i``. The ensemble
    is used as given; the caller controls centering.
    """
    if ensemble.space.space_hash != basis.space.space_hash:
        raise SpaceMismatch("ensemble and basis use different spline spaces")
    if k > basis.eigvecs.shape[1]:
        raise ValueError("requested more scores than available eigenfunctions")
    u = ensemble.coeffs @ basis.space.H_sqrt @ basis.eigvecs[:, :k]
    return ScoreMatrix(u, basis, channel)


def score_images(images, grid_points, basis, k, penalty=0.0, mean_coeffs=None):
    """Scores for raw images: smooth (without centering), optionally recenter
    with supplied mean coefficients, then project."""
    coeffs = np.atleast_2d(fit_images(basis.space, grid_points, images, penalty))
    if mean_coeffs is not None:
        coeffs = coeffs - mean_coeffs
    ens = SmoothedEnsemble(basis.space, coeffs, mean_coeffs is not None)
    return scores(ens, basis, k)


def select_k_pve(eigvals, alpha):
    """Smallest K whose cumulative eigenvalue share reaches ``alpha``.

    The denominator is the sum of all computed eigenvalues; the spline
    representation truncates the spectrum exactly, so no tail correction is
    needed.
    """
    if not 0 < alpha <= 1:
        raise ValueError("alpha must be in (0, 1]")
    lam = np.clip(np.asarray(eigvals, dtype=float), 0.0, None)
    total = lam.sum()
    if total <= 0:
        raise AllZeroSpectrum("eigenvalue sequence is identically zero")
    share = np.cumsum(lam) / total
    return int(np.searchsorted(share, alpha - 1e-12) + 1)


def select_k_pave(eigvals, gamma_hat, alpha):
    """Smallest K whose cumulative association share reaches ``alpha``.

    Association weights are eigenvalue times squared pre-fit coefficient; the
    denominator runs over the pre-fit truncation (the length of gamma_hat).
    """
    if not 0 < alpha <= 1:
        raise ValueError("alpha must be in (0, 1]")
    gamma = np.asarray(gamma_hat, dtype=float)
    lam = np.clip(np.asarray(eigvals, dtype=float)[: gamma.size], 0.0, None)
    weights = lam * gamma**2
    total = weights.sum()
    if total <= 0:
        raise ZeroAssociation("all association weights are zero")
    share = np.cumsum(weights) / total
    return int(np.searchsorted(share, alpha - 1e-12) + 1)
