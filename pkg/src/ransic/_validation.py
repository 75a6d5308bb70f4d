"""Input validation helpers shared by the estimators."""

import numbers

import numpy as np
from sklearn.utils.validation import check_array

from .exceptions import InvalidParam, ZeroVector

# Norms at or below this count as numerically zero vectors.
ZERO_TOL = 1e-12


def check_pair_set(X, y, min_rows, caller):
    """Validate matched (n, 3) source/target arrays.

    Returns float64 copies with finiteness enforced.
    """
    X = check_array(X, dtype=np.float64, ensure_all_finite=True, ensure_2d=True)
    y = check_array(y, dtype=np.float64, ensure_all_finite=True, ensure_2d=True)
    if X.shape[1] != 3 or y.shape[1] != 3:
        raise InvalidParam(f"{caller} expects 3D vectors, got shapes {X.shape} and {y.shape}")
    if X.shape[0] != y.shape[0]:
        raise InvalidParam(f"{caller}: X and y must pair up row for row")
    if X.shape[0] < min_rows:
        raise InvalidParam(f"{caller} needs at least {min_rows} correspondences")
    return X, y


def check_nonzero_rows(X, name):
    """Reject rows with (numerically) zero norm; returns the row norms."""
    norms = np.linalg.norm(X, axis=1)
    if np.any(norms <= ZERO_TOL):
        bad = int(np.flatnonzero(norms <= ZERO_TOL)[0])
        raise ZeroVector(f"{name}[{bad}] has zero norm")
    return norms


def check_positive(value, name):
    if not (isinstance(value, numbers.Real) and value > 0):
        raise InvalidParam(f"{name} must be a positive number, got {value!r}")
    return float(value)


def check_angle(value, name):
    """An angle parameter must lie strictly inside (0, pi)."""
    if not (isinstance(value, numbers.Real) and 0 < value < np.pi):
        raise InvalidParam(f"{name} must be an angle in (0, pi) radians, got {value!r}")
    return float(value)


def check_count(value, name, minimum=1):
    if not (isinstance(value, numbers.Integral) and value >= minimum):
        raise InvalidParam(f"{name} must be an integer >= {minimum}, got {value!r}")
    return int(value)
