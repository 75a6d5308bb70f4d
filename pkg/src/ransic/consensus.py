"""Shared consensus machinery: vertex store, degree queries, termination.

The residual gate constant 5.2 is fixed, not configuration: the termination
condition and the final inlier extraction both use r_i <= 5.2 sigma, and the
two must stay in lockstep for the extracted set to be the set that passed
termination.
"""

from dataclasses import dataclass, field

import numpy as np

from .exceptions import InvalidParam

# Multiple of sigma below which a residual counts as an inlier residual.
RESIDUAL_GATE = 5.2


@dataclass(frozen=True)
class Vertex:
    """A sampled subset that passed its intra-sample compatibility tests.

    Attributes
    ----------
    indices : tuple of int
        Sorted distinct correspondence indices (2 for rotation search,
        3 for registration).
    estimate : object
        Cached local model: a (3, 3) rotation, or an (s, R, t) triple.
    cache : dict
        Per-correspondence quantities edge tests may want (demeaned norms,
        scale ratios, translation votes).
    """

    indices: tuple
    estimate: object
    cache: dict = field(default_factory=dict, compare=False)


class CompatGraph:
    """Append-only vertex store with duplicate rejection.

    Edges are never stored; they are evaluated lazily against the newest
    vertex only, which keeps per-sample cost linear in the store size.
    Single-threaded mutation only.
    """

    def __init__(self):
        self.vertices = []
        self._seen = set()

    def __len__(self):
        return len(self.vertices)

    def __iter__(self):
        return iter(self.vertices)

    def insert(self, vertex):
        """Append a vertex; return False (and store nothing) on duplicate indices."""
        key = tuple(vertex.indices)
        if key in self._seen:
            return False
        self._seen.add(key)
        self.vertices.append(vertex)
        return True

    def __contains__(self, indices):
        return tuple(indices) in self._seen


def neighbors(graph, vertex, edge_test):
    """All stored vertices compatible with `vertex`, plus the vertex itself.

    Parameters
    ----------
    graph : CompatGraph
        Store already containing `vertex`.
    vertex : Vertex
        The newly inserted vertex.
    edge_test : callable(Vertex, Vertex) -> bool
        Pairwise compatibility predicate.

    Returns
    -------
    list of Vertex
        The set Y; degree(vertex) = len(Y) - 1 since Y includes the vertex.
    """
    out = [vertex]
    for other in graph.vertices:
        if other is vertex:
            continue
        if edge_test(vertex, other):
            out.append(other)
    return out


def termination_check(residuals, upsilon, tau, sigma):
    """Residual-distribution stopping rule.

    Let r* be the residuals at or below 5.2 sigma. Passes iff r* is non-empty,
    mean(r*) <= upsilon * sigma, and |r*| >= tau.

    Parameters
    ----------
    residuals : ndarray of shape (n,)
        Non-negative residuals for every correspondence.
    upsilon : float
        Mean-residual multiplier, > 0.
    tau : int
        Minimum size of r*, >= 1.
    sigma : float
        Noise standard deviation, > 0.
    """
    _check_termination_params(upsilon, tau, sigma)
    residuals = np.asarray(residuals, dtype=float)
    kept = residuals[residuals <= RESIDUAL_GATE * sigma]
    if kept.size == 0:
        return False
    return kept.size >= tau and kept.mean() <= upsilon * sigma


def extract_inliers(residuals, sigma):
    """Indices whose residuals are at or below the 5.2 sigma gate, ascending.

    Boundary inclusive: a residual of exactly 5.2 sigma is an inlier.
    """
    residuals = np.asarray(residuals, dtype=float)
    return np.flatnonzero(residuals <= RESIDUAL_GATE * sigma)


def _check_termination_params(upsilon, tau, sigma):
    if not upsilon > 0:
        raise InvalidParam("upsilon must be > 0")
    if not (isinstance(tau, (int, np.integer)) and tau >= 1):
        raise InvalidParam("tau must be an integer >= 1")
    if not sigma > 0:
        raise InvalidParam("sigma must be > 0")
