"""Outcome regression on image scores and the induced treatment rule.

The fitted model regresses the outcome on scalar covariates, their treatment
interactions, and the leading data-driven image scores of two channels: the
images themselves and the treatment-masked images. The treatment
recommendation is the sign of the fitted treatment contrast.
"""

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import (
    PositivityViolation,
    SelectionFailure,
    SingularDesign,
    SpaceMismatch,
)
from .fpc import FpcBasis, eig_from_transformed, select_k_pave, select_k_pve
from .geometry import Triangulation
from .spline import SplineFunction, SplineSpace, build_space, fit_images

_COND_LIMIT = 1e12


@dataclass
class Dataset:
    """Observed sample: scalar covariates, treatment, outcome, images.

    X : (n, q) covariate matrix; include an explicit intercept column of 1s
        when the working model should carry one (the fit uses X verbatim).
    A : (n,) treatment indicators in {0, 1}; both arms must be present.
    Y : (n,) outcomes.
    images : (n, N_s) pixel values on the shared ``grid`` ((N_s, 2) coords).
    """

    X: np.ndarray
    A: np.ndarray
    Y: np.ndarray
    images: np.ndarray
    grid: np.ndarray
    ids: Optional[np.ndarray] = None

    def __post_init__(self):
        self.X = np.atleast_2d(np.asarray(self.X, dtype=float))
        self.A = np.asarray(self.A, dtype=float).ravel()
        self.Y = np.asarray(self.Y, dtype=float).ravel()
        self.images = np.atleast_2d(np.asarray(self.images, dtype=float))
        self.grid = np.atleast_2d(np.asarray(self.grid, dtype=float))
        n = self.X.shape[0]
        if self.X.shape[1] < 1:
            raise ValueError("X needs at least one column")
        if not (self.A.shape[0] == self.Y.shape[0] == self.images.shape[0] == n):
            raise ValueError("X, A, Y, images disagree on sample size")
        if self.images.shape[1] != self.grid.shape[0]:
            raise ValueError("images and grid disagree on pixel count")
        for name, arr in (("X", self.X), ("Y", self.Y), ("images", self.images)):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} contains missing or non-finite values")
        if not np.all(np.isin(self.A, (0.0, 1.0))):
            raise ValueError("A must be coded {0, 1}")
        if len(np.unique(self.A)) < 2:
            raise PositivityViolation(
                "only one treatment arm present; positivity cannot hold"
            )

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def q(self):
        return self.X.shape[1]


@dataclass
class Recommendation:
    """Treatment recommendation for one subject."""

    action: int
    contrast: float
    q_values: tuple


@dataclass
class FittedModel:
    """Everything needed to evaluate fitted outcomes and recommend treatment."""

    space: SplineSpace
    alpha1: np.ndarray
    alpha2: np.ndarray
    gamma1: np.ndarray
    gamma2: np.ndarray
    basis1: FpcBasis
    basis2: FpcBasis
    mean_coeffs1: np.ndarray
    mean_coeffs2: np.ndarray
    grid: np.ndarray
    penalty: float
    selection: str
    diagnostics: dict = field(default_factory=dict)

    @property
    def k1(self):
        return self.gamma1.shape[0]

    @property
    def k2(self):
        return self.gamma2.shape[0]

    def _subject_scores(self, images, grid):
        grid_pts = self.grid if grid is None else np.asarray(grid, dtype=float)
        coeffs = np.atleast_2d(fit_images(self.space, grid_pts, images, self.penalty))
        t1 = (coeffs - self.mean_coeffs1) @ self.space.H_sqrt
        t2 = (coeffs - self.mean_coeffs2) @ self.space.H_sqrt
        u1 = t1 @ self.basis1.eigvecs[:, : self.k1]
        u2 = t2 @ self.basis2.eigvecs[:, : self.k2]
        return u1, u2

    def q_values_batch(self, x, images, grid=None):
        """Fitted outcomes (Q0, Q1) for a batch of subjects."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        u1, u2 = self._subject_scores(images, grid)
        q0 = x @ self.alpha1 + u1 @ self.gamma1
        contrast = x @ self.alpha2 + u2 @ self.gamma2
        return q0, q0 + contrast, contrast

    def recommend_batch(self, x, images, grid=None):
        """Actions and contrasts for a batch; action 1 iff contrast > 0."""
        _, _, contrast = self.q_values_batch(x, images, grid)
        return (contrast > 0).astype(int), contrast

    def policy(self):
        """Adapter for value evaluation: Dataset -> actions."""

        def _policy(data):
            actions, _ = self.recommend_batch(data.X, data.images, data.grid)
            return actions

        return _policy

    def to_json(self):
        doc = {
            "mesh": {
                "vertices": self.space.mesh.vertices.tolist(),
                "triangles": self.space.mesh.triangles.tolist(),
            },
            "degree": self.space.degree,
            "smoothness": self.space.smoothness,
            "space_hash": self.space.space_hash,
            "alpha1": self.alpha1.tolist(),
            "alpha2": self.alpha2.tolist(),
            "gamma1": self.gamma1.tolist(),
            "gamma2": self.gamma2.tolist(),
            "basis1": json.loads(self.basis1.to_json()),
            "basis2": json.loads(self.basis2.to_json()),
            "mean_coeffs1": self.mean_coeffs1.tolist(),
            "mean_coeffs2": self.mean_coeffs2.tolist(),
            "grid": self.grid.tolist(),
            "penalty": self.penalty,
            "selection": self.selection,
            "diagnostics": self.diagnostics,
        }
        return json.dumps(doc, sort_keys=True)

    @classmethod
    def from_json(cls, text):
        doc = json.loads(text)
        mesh = Triangulation(
            np.array(doc["mesh"]["vertices"], dtype=float),
            np.array(doc["mesh"]["triangles"], dtype=int),
        )
        space = build_space(mesh, doc["degree"], doc["smoothness"])
        if space.space_hash != doc["space_hash"]:
            raise SpaceMismatch("rebuilt space does not match the stored fingerprint")
        basis1 = FpcBasis.from_json(json.dumps(doc["basis1"]), space)
        basis2 = FpcBasis.from_json(json.dumps(doc["basis2"]), space)
        return cls(
            space=space,
            alpha1=np.array(doc["alpha1"], dtype=float),
            alpha2=np.array(doc["alpha2"], dtype=float),
            gamma1=np.array(doc["gamma1"], dtype=float),
            gamma2=np.array(doc["gamma2"], dtype=float),
            basis1=basis1,
            basis2=basis2,
            mean_coeffs1=np.array(doc["mean_coeffs1"], dtype=float),
            mean_coeffs2=np.array(doc["mean_coeffs2"], dtype=float),
            grid=np.array(doc["grid"], dtype=float),
            penalty=float(doc["penalty"]),
            selection=doc["selection"],
            diagnostics=doc["diagnostics"],
        )




def _ols(design, y):
    theta, _, rank, sv = np.linalg.lstsq(design, y, rcond=None)
    if rank < design.shape[1] or sv[0] / sv[-1] > _COND_LIMIT:
        raise SingularDesign(
            f"design condition number {sv[0] / max(sv[-1], 1e-300):.3e} exceeds limit"
        )
    return theta, sv[0] / sv[-1]


def _fit_from_transformed(x, a, y, t_raw, space, selection, alpha):
    """Core estimation given Gram-sqrt coordinates of the smoothed images.

    Rebuilds both channel bases from the (sub)sample, selects the basis
    counts, and solves the least-squares problem on the score design.
    """
    n, q = x.shape
    t1 = t_raw - t_raw.mean(axis=0)
    t2_raw = a[:, None] * t_raw
    t2 = t2_raw - t2_raw.mean(axis=0)
    basis1 = eig_from_transformed(t1, n, space)
    basis2 = eig_from_transformed(t2, n, space)

    def _design(k1, k2):
        u1 = t1 @ basis1.eigvecs[:, :k1]
        u2 = t2 @ basis2.eigvecs[:, :k2]
        return np.hstack([x, a[:, None] * x, u1, a[:, None] * u2]), u1, u2

    if isinstance(selection, tuple):
        k1, k2 = int(selection[0]), int(selection[1])
        if min(k1, k2) < 1:
            raise SelectionFailure("basis counts must be at least 1")
        label = "FIXED"
    elif selection == "pve":
        k1 = select_k_pve(basis1.eigvals, alpha)
        k2 = select_k_pve(basis2.eigvals, alpha)
        label = "PVE"
    elif selection == "pave":
        k1_pre = select_k_pve(basis1.eigvals, 0.99)
        k2_pre = select_k_pve(basis2.eigvals, 0.99)
        design_pre, _, _ = _design(k1_pre, k2_pre)
        if n <= design_pre.shape[1]:
            raise SelectionFailure("sample too small for the association pre-fit")
        theta_pre, _ = _ols(design_pre, y)
        g1 = theta_pre[2 * q : 2 * q + k1_pre]
        g2 = theta_pre[2 * q + k1_pre :]
        k1 = select_k_pave(basis1.eigvals, g1, alpha)
        k2 = select_k_pave(basis2.eigvals, g2, alpha)
        label = "PAVE"
    else:
        raise SelectionFailure(f"unknown selection rule: {selection!r}")

    design, _, _ = _design(k1, k2)
    p = design.shape[1]
    if n <= p:
        raise SelectionFailure(f"sample size {n} too small for {p} parameters")
    theta, cond = _ols(design, y)
    resid = y - design @ theta
    basis1.k_selected = k1
    basis2.k_selected = k2
    return {
        "alpha1": theta[:q],
        "alpha2": theta[q : 2 * q],
        "gamma1": theta[2 * q : 2 * q + k1],
        "gamma2": theta[2 * q + k1 :],
        "basis1": basis1,
        "basis2": basis2,
        "t_mean1": t_raw.mean(axis=0),
        "t_mean2": t2_raw.mean(axis=0),
        "label": label,
        "residual_variance": float(resid @ resid / max(n - p, 1)),
        "condition_number": float(cond),
    }


def fit(data, space, selection="pve", alpha=0.99, penalty=0.0):
    """Fit the outcome model on a dataset.

    Parameters
    ----------
    data : Dataset
    space : SplineSpace over the image domain
    selection : "pve", "pave", or a fixed pair (K1, K2)
    alpha : threshold for the selection criteria
    penalty : roughness penalty passed to the image smoother

    Returns
    -------
    FittedModel
    """
    coeffs = fit_images(space, data.grid, data.images, penalty)
    t_raw = coeffs @ space.H_sqrt
    core = _fit_from_transformed(data.X, data.A, data.Y, t_raw, space, selection, alpha)
    h_inv = space.H_inv_sqrt
    return FittedModel(
        space=space,
        alpha1=core["alpha1"],
        alpha2=core["alpha2"],
        gamma1=core["gamma1"],
        gamma2=core["gamma2"],
        basis1=core["basis1"],
        basis2=core["basis2"],
        mean_coeffs1=h_inv @ core["t_mean1"],
        mean_coeffs2=h_inv @ core["t_mean2"],
        grid=np.asarray(data.grid, dtype=float),
        penalty=penalty,
        selection=core["label"],
        diagnostics={
            "residual_variance": core["residual_variance"],
            "condition_number": core["condition_number"],
            "n": data.n,
            "q": data.q,
            "k1": int(core["basis1"].k_selected),
            "k2": int(core["basis2"].k_selected),
        },
    )


def reconstruct_beta(model, channel):
    """Fitted coefficient surface of one channel as a spline function."""
    if channel == 1:
        basis, gamma = model.basis1, model.gamma1
    elif channel == 2:
        basis, gamma = model.basis2, model.gamma2
    else:
        raise ValueError("channel must be 1 or 2")
    coeffs = sum(
        (g * basis.coeff_vector(k) for k, g in enumerate(gamma)),
        np.zeros(model.space.dim),
    )
    return SplineFunction(model.space, coeffs)


def recommend(model, x, image, grid=None):
    """Treatment recommendation for a single subject.

    ``x`` must match the training covariate layout (including the intercept
    slot when the training X carried one). A contrast of exactly zero maps to
    action 0.
    """
    q0, q1, contrast = model.q_values_batch(
        np.asarray(x, dtype=float)[None, :], np.asarray(image, dtype=float)[None, :], grid
    )
    return Recommendation(
        action=int(contrast[0] > 0),
        contrast=float(contrast[0]),
        q_values=(float(q0[0]), float(q1[0])),
    )


@dataclass
class BootstrapResult:
    """Percentile intervals for the linear coefficients."""

    estimates_alpha1: np.ndarray
    estimates_alpha2: np.ndarray
    lower_alpha1: np.ndarray
    upper_alpha1: np.ndarray
    lower_alpha2: np.ndarray
    upper_alpha2: np.ndarray
    level: float
    n_replicates: int
    n_failed: int

    def to_json(self):
        return json.dumps(
            {
                "level": self.level,
                "n_replicates": self.n_replicates,
                "n_failed": self.n_failed,
                "alpha1": {
                    "estimate": self.estimates_alpha1.tolist(),
                    "lower": self.lower_alpha1.tolist(),
                    "upper": self.upper_alpha1.tolist(),
                },
                "alpha2": {
                    "estimate": self.estimates_alpha2.tolist(),
                    "lower": self.lower_alpha2.tolist(),
                    "upper": self.upper_alpha2.tolist(),
                },
            },
            sort_keys=True,
        )


def bootstrap_ci(
    data,
    space,
    n_replicates=1000,
    level=0.95,
    seed=None,
    selection="pve",
    alpha=0.99,
    penalty=0.0,
):
    """Case-resampling bootstrap intervals for the linear coefficients.

    Each replicate resamples subjects with replacement and re-runs the whole
    estimation, including both channel basis constructions. Smoothed subject
    coefficients are reused across replicates (smoothing is a per-subject
    deterministic preprocessing step, so resampled rows are identical).
    Percentile intervals at (1 +/- level)/2; deterministic under a fixed seed.
    """
    if n_replicates < 100:
        raise ValueError("use at least 100 bootstrap replicates")
    coeffs = fit_images(space, data.grid, data.images, penalty)
    t_raw = coeffs @ space.H_sqrt
    base = _fit_from_transformed(
        data.X, data.A, data.Y, t_raw, space, selection, alpha
    )
    n = data.n
    seeds = np.random.SeedSequence(seed).spawn(n_replicates)
    a1, a2 = [], []
    failed = 0
    for child in seeds:
        rng = np.random.default_rng(child)
        idx = rng.integers(0, n, size=n)
        try:
            if len(np.unique(data.A[idx])) < 2:
                raise PositivityViolation("resample lost a treatment arm")
            rep = _fit_from_transformed(
                data.X[idx], data.A[idx], data.Y[idx], t_raw[idx], space, selection, alpha
            )
        except Exception:
            failed += 1
            if failed > 0.1 * n_replicates:
                raise RuntimeError(
                    f"more than 10% of bootstrap replicates failed ({failed})"
                )
            continue
        a1.append(rep["alpha1"])
        a2.append(rep["alpha2"])
    a1 = np.array(a1)
    a2 = np.array(a2)
    lo, hi = 100 * (1 - level) / 2, 100 * (1 + level) / 2
    return BootstrapResult(
        estimates_alpha1=base["alpha1"],
        estimates_alpha2=base["alpha2"],
        lower_alpha1=np.percentile(a1, lo, axis=0),
        upper_alpha1=np.percentile(a1, hi, axis=0),
        lower_alpha2=np.percentile(a2, lo, axis=0),
        upper_alpha2=np.percentile(a2, hi, axis=0),
        level=level,
        n_replicates=n_replicates,
        n_failed=failed,
    )
