"""Fixed-size 3D rotation and alignment primitives.

Everything here is a deterministic pure function of its inputs. Rotations are
plain (3, 3) float arrays with R.T @ R = I and det(R) = +1.
"""

import numpy as np

from .exceptions import DegenerateInput, InvalidParam

# Relative tolerance below which two source directions count as parallel and
# an alignment problem becomes rank deficient.
RANK_TOL = 1e-6


def geodesic_distance(r1, r2):
    """Angle of the relative rotation between two rotation matrices.

    Parameters
    ----------
    r1, r2 : ndarray of shape (3, 3)
        Rotation matrices.

    Returns
    -------
    float
        |acos((trace(r1.T @ r2) - 1) / 2)| in [0, pi]. The trace argument is
        clamped to [-1, 1]; rounding can push it ~1e-16 outside the domain.
    """
    c = (np.trace(np.asarray(r1).T @ np.asarray(r2)) - 1.0) / 2.0
    return abs(np.arccos(np.clip(c, -1.0, 1.0)))


def solve_rotation_svd(src, dst):
    """Best-fit rotation minimizing sum ||R @ src_i - dst_i||^2.

    The classic SVD alignment: decompose the 3x3 cross-covariance and flip the
    smallest-singular-value axis when the raw solution is a reflection.

    Parameters
    ----------
    src, dst : ndarray of shape (n, 3)
        Paired source and destination vectors, n >= 2.

    Returns
    -------
    ndarray of shape (3, 3)
        Rotation matrix.

    Raises
    ------
    DegenerateInput
        Fewer than 2 pairs, or all source vectors mutually parallel within
        relative tolerance 1e-6 (the covariance is rank < 2).
    """
    src = np.asarray(src, dtype=float)
    dst = np.asarray(dst, dtype=float)
    if src.ndim != 2 or src.shape != dst.shape or src.shape[1] != 3:
        raise InvalidParam("src and dst must be matching (n, 3) arrays")
    if len(src) < 2:
        raise DegenerateInput("need at least 2 pairs to solve a rotation")
    if _max_pairwise_cross(src) < RANK_TOL:
        raise DegenerateInput("source vectors are mutually parallel; rank < 2")
    h = src.T @ dst
    u, _, vt = np.linalg.svd(h)
    d = np.sign(np.linalg.det(vt.T @ u.T))
    if d == 0:  # fully degenerate covariance; treat as rank failure
        raise DegenerateInput("cross-covariance is singular")
    return vt.T @ np.diag([1.0, 1.0, d]) @ u.T


def _max_pairwise_cross(vecs):
    """Largest ||v_i x v_j|| / (||v_i|| ||v_j||) over pairs; 0 when all parallel.

    Returns early once any pair clears RANK_TOL, since callers only need a
    rank-2 witness.
    """
    norms = np.linalg.norm(vecs, axis=1)
    best = 0.0
    for i in range(len(vecs) - 1):
        if norms[i] == 0.0:
            continue
        rest = norms[i + 1:]
        ok = rest > 0.0
        if not np.any(ok):
            continue
        c = np.linalg.norm(np.cross(vecs[i], vecs[i + 1:][ok]), axis=1)
        m = float(np.max(c / (norms[i] * rest[ok])))
        if m > best:
            best = m
        if best >= RANK_TOL:
            return best
    return best


def weighted_scale(src_norms, dst_norms):
    """Least-squares scale from demeaned-vector norms.

    Each pair votes s_i = ||q_i|| / ||p_i|| with weight ||p_i||^2 / alpha^2;
    alpha cancels, leaving sum(||p_i|| ||q_i||) / sum(||p_i||^2).
    """
    src_norms = np.asarray(src_norms, dtype=float)
    dst_norms = np.asarray(dst_norms, dtype=float)
    denom = np.sum(src_norms ** 2)
    if denom <= 0.0:
        raise DegenerateInput("all source norms are zero")
    return float(np.sum(src_norms * dst_norms) / denom)


def solve_sim_transform(src, dst, known_scale=None):
    """Best-fit similarity transform (s, R, t) with dst_i ~ s R src_i + t.

    Centroids are removed to decouple translation, scale comes from the
    weighted norm-ratio estimator, rotation from the SVD alignment of the
    demeaned pairs, and t = mean(dst) - s R mean(src).

    Parameters
    ----------
    src, dst : ndarray of shape (n, 3)
        Paired points, n >= 3, sources not colinear.
    known_scale : float, optional
        Fixed scale; when given it is returned verbatim and the estimator is
        skipped.

    Returns
    -------
    (float, ndarray of shape (3, 3), ndarray of shape (3,))
        Scale, rotation, translation.

    Raises
    ------
    DegenerateInput
        Fewer than 3 pairs, or colinear sources: the cross product of the two
        shortest demeaned source vectors is below 1e-6 times the product of
        their norms.
    """
    src = np.asarray(src, dtype=float)
    dst = np.asarray(dst, dtype=float)
    if src.ndim != 2 or src.shape != dst.shape or src.shape[1] != 3:
        raise InvalidParam("src and dst must be matching (n, 3) arrays")
    if len(src) < 3:
        raise DegenerateInput("need at least 3 pairs to solve a similarity transform")
    p_bar = src.mean(axis=0)
    q_bar = dst.mean(axis=0)
    p_t = src - p_bar
    q_t = dst - q_bar
    p_n = np.linalg.norm(p_t, axis=1)
    order = np.argsort(p_n)
    a, b = p_t[order[0]], p_t[order[1]]
    if np.linalg.norm(np.cross(a, b)) < RANK_TOL * p_n[order[0]] * p_n[order[1]]:
        raise DegenerateInput("source points are colinear")
    if known_scale is not None:
        if known_scale <= 0:
            raise InvalidParam("known_scale must be positive")
        s = float(known_scale)
    else:
        s = weighted_scale(p_n, np.linalg.norm(q_t, axis=1))
    rot = solve_rotation_svd(s * p_t, q_t)
    t = q_bar - s * (rot @ p_bar)
    return s, rot, t


def quaternion_to_matrix(q):
    """Rotation matrix of a unit quaternion (w, x, y, z)."""
    w, x, y, z = np.asarray(q, dtype=float)
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
        [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
        [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
    ])


def random_rotation(rng):
    """Uniform random rotation from a normalized 4-Gaussian quaternion.

    Exact in distribution: an isotropic Gaussian on R^4 projects to the
    uniform (Haar) measure on the unit quaternions.
    """
    q = rng.normal(size=4)
    return quaternion_to_matrix(q / np.linalg.norm(q))
