"""Classical RANSAC baselines sharing the closed-form solvers.

Hypothesize-and-verify with minimal samples (2 vector pairs for rotation,
3 point pairs for registration), consensus counting at a fixed residual
threshold, the standard adaptive iteration bound from a confidence level, and
a final re-solve on the best consensus set. The default threshold matches the
5.2 sigma gate used by the invariant-compatibility solvers so accuracy
comparisons isolate the search strategy, not the gate.
"""

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from . import consensus
from ._validation import (
    check_count,
    check_nonzero_rows,
    check_pair_set,
    check_positive,
)
from .exceptions import DegenerateInput, InvalidParam
from .geometry import RANK_TOL, solve_rotation_svd, solve_sim_transform


def _adaptive_bound(inlier_ratio, confidence, sample_size):
    """Iterations needed so an all-inlier sample appears with `confidence`."""
    w = min(max(inlier_ratio, 0.0), 1.0)
    p_good = w ** sample_size
    if p_good <= 0.0:
        return np.inf
    if p_good >= 1.0:
        return 1
    return int(np.ceil(np.log(1.0 - confidence) / np.log(1.0 - p_good)))


class _RansacBase(BaseEstimator):
    """Shared loop; subclasses provide sampling arity, solving and residuals."""

    def _search(self, n, rng, sigma):
        confidence = self.confidence
        if not 0.0 < confidence < 1.0:
            raise InvalidParam("confidence must be in (0, 1)")
        max_iterations = check_count(self.max_iterations, "max_iterations")
        threshold = self.inlier_threshold
        if threshold is None:
            threshold = consensus.RESIDUAL_GATE * sigma
        else:
            threshold = check_positive(threshold, "inlier_threshold")

        best_count = -1
        best_model = None
        best_resid = None
        bound = np.inf
        iterations = 0
        while iterations < max_iterations:
            iterations += 1
            sample = _draw_distinct(rng, n, self._sample_size)
            model = self._solve_sample(sample)
            if model is None:  # degenerate draw still consumes an iteration
                continue
            resid = self._residuals(model)
            count = int(np.count_nonzero(resid <= threshold))
            if count > best_count:
                best_count = count
                best_model = model
                best_resid = resid
                bound = _adaptive_bound(count / n, confidence, self._sample_size)
            if iterations >= bound:
                break
        terminated = iterations >= bound

        if best_model is None:
            return None, np.array([], dtype=np.int64), iterations, terminated, None
        inliers = np.flatnonzero(best_resid <= threshold)
        refined = self._refine(inliers, best_model)
        final_resid = self._residuals(refined)
        inliers = np.flatnonzero(final_resid <= threshold)
        return refined, inliers, iterations, terminated, final_resid


def _draw_distinct(rng, n, size):
    """size distinct indices from [0, n); uniform, fixed two-draw layout."""
    i = int(rng.integers(0, n))
    j = int(rng.integers(0, n - 1))
    if j >= i:
        j += 1
    if size == 2:
        return np.array([i, j])
    k = int(rng.integers(0, n - 2))
    lo, hi = (i, j) if i < j else (j, i)
    if k >= lo:
        k += 1
    if k >= hi:
        k += 1
    return np.array([i, j, k])


class RansacRotationSearch(_RansacBase):
    """RANSAC rotation estimator over matched 3D vector sets.

    Parameters
    ----------
    confidence : float, default=0.995
        Target probability that at least one all-inlier sample was drawn;
        drives the adaptive iteration bound.
    max_iterations : int, default=1000
        Hard cap on hypotheses.
    inlier_threshold : float or None, default=None
        Residual threshold on unit-normalized vectors; None means 5.2 sigma.
    sigma : float, default=0.01
        Noise scale used only for the default threshold.
    random_state : int, Generator or None, default=None

    Attributes
    ----------
    rotation_ : ndarray of shape (3, 3)
    inlier_indices_, inlier_mask_, residuals_ : see RansicRotationSearch
    iterations_ : int
        Hypotheses actually evaluated.
    terminated_ : bool
        True when the adaptive bound was reached inside the cap; False when
        the cap cut the search short (best-effort fit).
    """

    _sample_size = 2

    def __init__(self, confidence=0.995, max_iterations=1000,
                 inlier_threshold=None, sigma=0.01, random_state=None):
        self.confidence = confidence
        self.max_iterations = max_iterations
        self.inlier_threshold = inlier_threshold
        self.sigma = sigma
        self.random_state = random_state

    def fit(self, X, y):
        X, y = check_pair_set(X, y, 2, "RansacRotationSearch")
        sigma = check_positive(self.sigma, "sigma")
        na = check_nonzero_rows(X, "X")
        nb = check_nonzero_rows(y, "y")
        self._a = X / na[:, None]
        self._b = y / nb[:, None]
        rng = np.random.default_rng(self.random_state)

        out = self._search(len(X), rng, sigma)
        model, inliers, iterations, terminated = out[0], out[1], out[2], out[3]
        if model is None:
            self.rotation_ = np.eye(3)
            self.residuals_ = np.full(len(X), np.inf)
        else:
            self.rotation_ = model
            self.residuals_ = out[4]
        self.inlier_indices_ = inliers
        mask = np.zeros(len(X), dtype=bool)
        mask[inliers] = True
        self.inlier_mask_ = mask
        self.iterations_ = iterations
        self.terminated_ = terminated
        self.n_features_in_ = 3
        del self._a, self._b
        return self

    def _solve_sample(self, sample):
        a, b = self._a[sample], self._b[sample]
        if np.linalg.norm(np.cross(a[0], a[1])) < RANK_TOL:
            return None
        return solve_rotation_svd(a, b)

    def _residuals(self, rot):
        return np.linalg.norm(self._b - self._a @ rot.T, axis=1)

    def _refine(self, inliers, fallback):
        try:
            return solve_rotation_svd(self._a[inliers], self._b[inliers])
        except DegenerateInput:
            return fallback  # keep the raw hypothesis on a degenerate consensus

    def transform(self, X):
        check_is_fitted(self, "rotation_")
        return np.asarray(X, dtype=float) @ self.rotation_.T

    def predict(self, X):
        return self.transform(X)


class RansacRegistration(_RansacBase):
    """RANSAC similarity-transform estimator over matched 3D point sets.

    Same loop as :class:`RansacRotationSearch` with 3-point samples and the
    similarity solver; `known_scale` fixes the scale in every hypothesis.

    Attributes
    ----------
    scale_ : float
    rotation_ : ndarray of shape (3, 3)
    translation_ : ndarray of shape (3,)
    inlier_indices_, inlier_mask_, residuals_, iterations_, terminated_ :
        as in :class:`RansacRotationSearch`.
    """

    _sample_size = 3

    def __init__(self, confidence=0.995, max_iterations=1000,
                 inlier_threshold=None, sigma=0.01, known_scale=None,
                 random_state=None):
        self.confidence = confidence
        self.max_iterations = max_iterations
        self.inlier_threshold = inlier_threshold
        self.sigma = sigma
        self.known_scale = known_scale
        self.random_state = random_state

    def fit(self, X, y):
        X, y = check_pair_set(X, y, 3, "RansacRegistration")
        sigma = check_positive(self.sigma, "sigma")
        known = self.known_scale
        if known is not None:
            known = check_positive(known, "known_scale")
        self._p = X
        self._q = y
        self._known = known
        rng = np.random.default_rng(self.random_state)

        out = self._search(len(X), rng, sigma)
        model, inliers, iterations, terminated = out[0], out[1], out[2], out[3]
        if model is None:
            self.scale_ = 1.0 if known is None else known
            self.rotation_ = np.eye(3)
            self.translation_ = np.zeros(3)
            self.residuals_ = np.full(len(X), np.inf)
        else:
            self.scale_, self.rotation_, self.translation_ = model
            self.residuals_ = out[4]
        self.inlier_indices_ = inliers
        mask = np.zeros(len(X), dtype=bool)
        mask[inliers] = True
        self.inlier_mask_ = mask
        self.iterations_ = iterations
        self.terminated_ = terminated
        self.n_features_in_ = 3
        del self._p, self._q
        return self

    def _solve_sample(self, sample):
        p, q = self._p[sample], self._q[sample]
        try:
            return solve_sim_transform(p, q, self._known)
        except DegenerateInput:
            return None

    def _residuals(self, model):
        s, rot, t = model
        return np.linalg.norm(s * (self._p @ rot.T) + t - self._q, axis=1)

    def _refine(self, inliers, fallback):
        try:
            return solve_sim_transform(
                self._p[inliers], self._q[inliers], self._known
            )
        except DegenerateInput:
            return fallback

    def transform(self, X):
        check_is_fitted(self, "rotation_")
        return self.scale_ * (np.asarray(X, dtype=float) @ self.rotation_.T) + self.translation_

    def predict(self, X):
        return self.transform(X)
