"""Deterministic synthetic problem generators with ground truth.

Both generators take an integer seed and consume a fixed, documented stream of
draws from numpy's default generator (PCG64), so outputs are bit-identical
across repeated calls and across platforms:

rotation problems
    1. source directions: (n, 3) standard normals, rows normalized
    2. truth rotation: 4 standard normals (quaternion, normalized)
    3. noise: (n, 3) standard normals (drawn even when sigma = 0)
    4. outlier placement: one permutation of n
    5. outlier targets: (n_outliers, 3) standard normals, rows normalized

registration problems
    1. source cloud: (n, 3) uniforms (skipped when a cloud is supplied)
    2. truth scale: 1 uniform on (1, 5) (skipped in known-scale mode)
    3. truth rotation: 4 standard normals
    4. truth translation: 3 standard normals (direction) + 1 uniform (radius)
    5. noise: (n, 3) standard normals
    6. outlier placement: one permutation of n
    7. outlier targets: (n_outliers, 3) standard normals + (n_outliers,)
       uniforms (directions and radii inside the clutter sphere)

Noise is additive: noisy target vectors are not re-normalized. Outlier counts
use Python round() on n * (1 - outlier_ratio), so exactly that many inliers
survive.
"""

from dataclasses import dataclass

import numpy as np

from .exceptions import InvalidParam
from .geometry import random_rotation

SCALE_MODES = ("unknown", "known")


@dataclass(frozen=True)
class RotationProblem:
    """A rotation-search instance with its generating truth.

    ``src`` rows are unit vectors; ``dst`` rows are rotated sources plus
    Gaussian noise for inliers, fresh unit vectors for outliers.
    """

    src: np.ndarray
    dst: np.ndarray
    rotation: np.ndarray
    inlier_mask: np.ndarray
    sigma: float
    outlier_ratio: float

    @property
    def n(self):
        return len(self.src)


@dataclass(frozen=True)
class RegistrationProblem:
    """A registration instance with its generating truth.

    The source cloud fits the [-0.5, 0.5]^3 box; targets are the transformed
    sources plus noise for inliers, clutter points inside a sphere of diameter
    scale * sqrt(3) around the transformed centroid for outliers.
    """

    src: np.ndarray
    dst: np.ndarray
    scale: float
    rotation: np.ndarray
    translation: np.ndarray
    inlier_mask: np.ndarray
    sigma: float
    outlier_ratio: float
    cloud_kind: str

    @property
    def n(self):
        return len(self.src)


def _split_counts(n, outlier_ratio):
    n_inliers = round(n * (1.0 - outlier_ratio))
    return n_inliers, n - n_inliers


def _check_common(n, n_min, outlier_ratio, sigma):
    if not isinstance(n, (int, np.integer)) or n < n_min:
        raise InvalidParam(f"n must be an integer >= {n_min}, got {n!r}")
    if not 0.0 <= outlier_ratio < 1.0:
        raise InvalidParam("outlier_ratio must lie in [0, 1)")
    if sigma < 0:
        raise InvalidParam("sigma must be >= 0")


def gen_rotation_problem(n, outlier_ratio, sigma, seed):
    """Generate a rotation-search instance.

    Parameters
    ----------
    n : int
        Number of correspondences, >= 2.
    outlier_ratio : float
        Fraction of targets replaced by random unit vectors, in [0, 1).
    sigma : float
        Per-component Gaussian noise std added to inlier targets.
    seed : int
        RNG seed; identical arguments give bit-identical output.
    """
    _check_common(n, 2, outlier_ratio, sigma)
    rng = np.random.default_rng(seed)
    src = rng.normal(size=(n, 3))
    src /= np.linalg.norm(src, axis=1, keepdims=True)
    rot = random_rotation(rng)
    dst = src @ rot.T + sigma * rng.normal(size=(n, 3))
    _, n_out = _split_counts(n, outlier_ratio)
    mask = np.ones(n, dtype=bool)
    out_idx = rng.permutation(n)[:n_out]
    mask[out_idx] = False
    if n_out:
        fresh = rng.normal(size=(n_out, 3))
        dst[out_idx] = fresh / np.linalg.norm(fresh, axis=1, keepdims=True)
    dst.setflags(write=False)
    src.setflags(write=False)
    mask.setflags(write=False)
    return RotationProblem(src, dst, rot, mask, float(sigma), float(outlier_ratio))


def fit_unit_box(points):
    """Recentre and uniformly rescale a cloud to fit the [-0.5, 0.5]^3 box.

    The widest axis of the bounding box maps onto [-0.5, 0.5] exactly.
    """
    points = np.asarray(points, dtype=float)
    lo = points.min(axis=0)
    hi = points.max(axis=0)
    center = (lo + hi) / 2.0
    half = float(np.max((hi - lo) / 2.0))
    if half <= 0.0:
        raise InvalidParam("cloud has zero extent; cannot rescale")
    return (points - center) / (2.0 * half)


def gen_registration_problem(n, outlier_ratio, sigma, scale_mode, seed, cloud=None):
    """Generate a registration instance.

    Parameters
    ----------
    n : int
        Number of correspondences, >= 3. Ignored when `cloud` is given
        (its row count wins).
    outlier_ratio : float
        Fraction of targets replaced by clutter points, in [0, 1).
    sigma : float
        Per-component Gaussian noise std added to inlier targets.
    scale_mode : {"unknown", "known"}
        "unknown" draws the truth scale uniformly from (1, 5); "known" fixes
        it at exactly 1.
    seed : int
        RNG seed.
    cloud : array-like of shape (m, 3), optional
        Externally supplied source cloud (for example a loaded PLY); it is
        recentred and rescaled into the unit box. Default is a procedural
        uniform cloud.
    """
    if scale_mode not in SCALE_MODES:
        raise InvalidParam(f"scale_mode must be one of {SCALE_MODES}, got {scale_mode!r}")
    rng = np.random.default_rng(seed)
    if cloud is None:
        _check_common(n, 3, outlier_ratio, sigma)
        src = fit_unit_box(rng.uniform(size=(n, 3)))
        cloud_kind = "procedural"
    else:
        src = fit_unit_box(cloud)
        n = len(src)
        _check_common(n, 3, outlier_ratio, sigma)
        cloud_kind = "loaded"

    if scale_mode == "known":
        s = 1.0
    else:
        s = float(rng.uniform(1.0, 5.0))
    rot = random_rotation(rng)
    direction = rng.normal(size=3)
    direction /= np.linalg.norm(direction)
    t = direction * 3.0 * float(rng.uniform()) ** (1.0 / 3.0)

    clean = s * (src @ rot.T) + t
    dst = clean + sigma * rng.normal(size=(n, 3))
    _, n_out = _split_counts(n, outlier_ratio)
    mask = np.ones(n, dtype=bool)
    out_idx = rng.permutation(n)[:n_out]
    mask[out_idx] = False
    if n_out:
        dirs = rng.normal(size=(n_out, 3))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        radii = (s * np.sqrt(3.0) / 2.0) * rng.uniform(size=n_out) ** (1.0 / 3.0)
        dst[out_idx] = clean.mean(axis=0) + dirs * radii[:, None]
    src.setflags(write=False)
    dst.setflags(write=False)
    mask.setflags(write=False)
    return RegistrationProblem(
        src, dst, s, rot, t, mask, float(sigma), float(outlier_ratio), cloud_kind
    )
