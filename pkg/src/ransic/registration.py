"""Point cloud registration: 3-point sampling with invariant compatibility.

A sampled triple must pass two model-free gates before it becomes a graph
vertex: the pairwise scale votes of its demeaned points must agree within a
noise bound (scale is invariant to R and t), and the per-point translation
votes under the triple's own rough (s, R) must agree within a noise bound.
Edges between vertices add a rotation-agreement gate plus a re-check of both
conditions on the merged six points. Sampling runs at most two rounds: when
the graph grows large or K climbs without termination, the second round
restarts with stricter bounds.
"""

from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from . import consensus
from ._validation import (
    ZERO_TOL,
    check_angle,
    check_count,
    check_nonzero_rows,
    check_pair_set,
    check_positive,
)
from .exceptions import DegenerateInput, InvalidParam, ZeroVector
from .geometry import solve_rotation_svd, solve_sim_transform, weighted_scale

DEFAULT_GAMMA = float(np.radians(10.0))
DEFAULT_UPSILON = 3.2
DEFAULT_TAU = 9
DEFAULT_ALPHA_MULTS = (3.6, 3.2)
DEFAULT_BETA_MULTS = (5.4, 4.8)

# Relative cross-product tolerance below which a sampled triple is colinear.
TRIPLE_COLINEAR_TOL = 1e-3

# Fixed sampling block size; part of the documented RNG stream layout.
_BATCH = 4096
_SOLVE_CHUNK = 128


@dataclass
class TriSample:
    """A 3-point sample with its demeaned geometry and cached local model.

    Attributes
    ----------
    indices : tuple of int
        The three distinct correspondence indices, sorted.
    src, dst : ndarray of shape (3, 3)
        Raw source and target points, rows ordered like ``indices``.
    src_demeaned, dst_demeaned : ndarray of shape (3, 3)
        Points minus their triple centroid.
    src_norms, dst_norms : ndarray of shape (3,)
        Norms of the demeaned vectors.
    scale_ratios : ndarray of shape (3,)
        Per-point scale votes ||q~_i|| / ||p~_i||.
    scale, rotation, translation :
        Cached local model (s*, R*, t*).
    t_votes : ndarray of shape (3, 3)
        Per-point translation votes q_i - s* R* p_i.
    """

    indices: tuple
    src: np.ndarray
    dst: np.ndarray
    src_demeaned: np.ndarray = field(init=False)
    dst_demeaned: np.ndarray = field(init=False)
    src_norms: np.ndarray = field(init=False)
    dst_norms: np.ndarray = field(init=False)
    scale_ratios: np.ndarray = field(init=False)
    scale: float = None
    rotation: np.ndarray = None
    translation: np.ndarray = None
    t_votes: np.ndarray = None

    def __post_init__(self):
        self.src = np.asarray(self.src, dtype=float)
        self.dst = np.asarray(self.dst, dtype=float)
        self.src_demeaned = self.src - self.src.mean(axis=0)
        self.dst_demeaned = self.dst - self.dst.mean(axis=0)
        self.src_norms = np.linalg.norm(self.src_demeaned, axis=1)
        self.dst_norms = np.linalg.norm(self.dst_demeaned, axis=1)
        if np.any(self.src_norms <= ZERO_TOL):
            raise ZeroVector("triple has a source point at its own centroid")
        order = np.argsort(self.src_norms)
        a, b = self.src_demeaned[order[2]], self.src_demeaned[order[1]]
        lim = TRIPLE_COLINEAR_TOL * self.src_norms[order[2]] * self.src_norms[order[1]]
        if np.linalg.norm(np.cross(a, b)) < lim:
            raise DegenerateInput("triple sources are colinear")
        self.scale_ratios = self.dst_norms / self.src_norms

    def estimate_model(self, known_scale=None):
        """Fill in (s*, R*, t*) and the translation votes; returns self."""
        if known_scale is not None:
            s = float(known_scale)
        else:
            s = weighted_scale(self.src_norms, self.dst_norms)
        rot = solve_rotation_svd(s * self.src_demeaned, self.dst_demeaned)
        self.scale = s
        self.rotation = rot
        self.translation = self.dst.mean(axis=0) - s * (rot @ self.src.mean(axis=0))
        self.t_votes = self.dst - s * (self.src @ rot.T)
        return self


def build_tri_sample(src, dst, indices=(0, 1, 2), known_scale=None):
    """Construct a TriSample from three point pairs, including its model.

    Raises DegenerateInput on colinear sources and ZeroVector when a source
    sits exactly at the triple centroid.
    """
    tri = TriSample(tuple(sorted(indices)), np.asarray(src), np.asarray(dst))
    return tri.estimate_model(known_scale)


def scale_compat(tri, alpha, known_scale=None):
    """Pairwise scale-vote agreement for a triple.

    Checks |s_i - s_j| <= alpha (1/||p~_i|| + 1/||p~_j||) for the three index
    pairs. With a known scale, additionally requires each vote to sit within
    alpha/||p~_i|| of it. Boundary inclusive.
    """
    if alpha <= 0:
        raise InvalidParam("alpha must be > 0")
    s = tri.scale_ratios
    inv = 1.0 / tri.src_norms
    for i, j in ((0, 1), (0, 2), (1, 2)):
        if abs(s[i] - s[j]) > alpha * (inv[i] + inv[j]):
            return False
    if known_scale is not None:
        for i in range(3):
            if abs(s[i] - known_scale) > alpha * inv[i]:
                return False
    return True


def translation_compat(tri, beta):
    """Pairwise translation-vote agreement for a triple.

    Requires the cached model: votes t_i = q_i - s* R* p_i must satisfy
    ||t_i - t_j|| <= 2 beta for the three pairs. Distances are compared in
    the squared domain so the 2 beta boundary is exact.
    """
    if beta <= 0:
        raise InvalidParam("beta must be > 0")
    if tri.t_votes is None:
        raise InvalidParam("translation_compat needs an estimated model; "
                           "call estimate_model first")
    t = tri.t_votes
    lim = (2.0 * beta) ** 2
    for i, j in ((0, 1), (0, 2), (1, 2)):
        d = t[i] - t[j]
        if d @ d > lim:
            return False
    return True


def six_point_edge(v1, v2, alpha, beta, gamma, known_scale=None):
    """Edge test between two triple vertices.

    Three conjunctive checks: (i) the cached rotations agree within geodesic
    gamma (cosine-domain comparison); (ii) on the six merged points, demeaned
    against the merged centroid, every one of the 15 index pairs passes the
    scale condition; (iii) with a common (s*, R*) re-estimated from the merged
    set, every pair of translation votes is within 2 beta. Re-estimating from
    the merged set makes the predicate symmetric in its two arguments. The
    merged points are treated as a multiset: overlapping indices contribute
    twice. A degenerate merged set rejects the edge instead of raising.
    """
    c = (np.trace(np.asarray(v1.rotation).T @ np.asarray(v2.rotation)) - 1.0) / 2.0
    if c < np.cos(gamma):
        return False
    order = np.argsort(np.concatenate([v1.indices, v2.indices]), kind="stable")
    src = np.concatenate([v1.src, v2.src])[order]
    dst = np.concatenate([v1.dst, v2.dst])[order]
    return _merged_compat(src, dst, alpha, beta, known_scale)


def _merged_compat(src, dst, alpha, beta, known_scale):
    """Scale and translation conditions over all pairs of a merged point set."""
    p_t = src - src.mean(axis=0)
    q_t = dst - dst.mean(axis=0)
    p_n = np.linalg.norm(p_t, axis=1)
    if np.any(p_n <= ZERO_TOL):
        return False
    ratios = np.linalg.norm(q_t, axis=1) / p_n
    inv = 1.0 / p_n
    diff = np.abs(ratios[:, None] - ratios[None, :])
    bound = alpha * (inv[:, None] + inv[None, :])
    iu = np.triu_indices(len(src), k=1)
    if np.any(diff[iu] > bound[iu]):
        return False
    try:
        s, rot, t = solve_sim_transform(src, dst, known_scale)
    except (DegenerateInput, ZeroVector):
        return False
    votes = dst - s * (src @ rot.T)
    d = votes[:, None, :] - votes[None, :, :]
    dist2 = np.einsum("abk,abk->ab", d, d)
    return not np.any(dist2[iu] > (2.0 * beta) ** 2)


class RansicRegistration(BaseEstimator):
    """Robust similarity-transform estimator for matched 3D point sets.

    Estimates (s, R, t) with dst ~ s R src + t under heavy outlier
    contamination, optionally with the scale fixed in advance. Defaults follow
    the reference benchmark setup for N = 1000 points at noise sigma = 0.01.

    Parameters
    ----------
    alpha_mult1, alpha_mult2 : float, default=(3.6, 3.2)
        Scale-test bound alpha = alpha_mult * sigma for sampling rounds 1
        and 2 (round 2 is stricter).
    beta_mult1, beta_mult2 : float, default=(5.4, 4.8)
        Translation-test bound beta = beta_mult * sigma per round.
    gamma : float, default=radians(10)
        Geodesic bound (radians) for the edge rotation gate.
    upsilon : float, default=3.2
        Termination: mean of gated residuals must be <= upsilon * sigma.
    tau : int, default=9
        Termination: at least tau residuals within the 5.2 sigma gate.
    sigma : float, default=0.01
        Assumed noise standard deviation.
    known_scale : float or None, default=None
        When given, the scale is fixed to this value everywhere (the classic
        rigid case is known_scale=1) and an extra per-point scale check
        applies.
    k_init : int, default=1
        Initial required vertex degree K (reset when round 2 starts).
    itr1_k_break : int, default=3
        Round 1 escalates to round 2 once K reaches this value at a failed
        termination check.
    itr1_graph_break : int, default=500
        Round 1 escalates once the vertex store reaches this size at a failed
        termination check.
    max_samples : int, default=10_000_000
        Sample cap per round.
    random_state : int, Generator or None, default=None
        Seed for the sampling stream.

    Attributes
    ----------
    scale_ : float
    rotation_ : ndarray of shape (3, 3)
    translation_ : ndarray of shape (3,)
    inlier_indices_ : ndarray of int
    inlier_mask_ : ndarray of bool
    residuals_ : ndarray of shape (n,)
        ||s R p_i + t - q_i|| under the fitted transform.
    samples_drawn_ : tuple of int
        Samples consumed per sampling round actually run.
    vertices_created_ : tuple of int
        Vertices admitted per round.
    iteration_used_ : int
        1 or 2; the round active when fitting stopped.
    terminated_ : bool
        False when both rounds exhausted their budgets (best-effort fit).
    """

    def __init__(
        self,
        alpha_mult1=DEFAULT_ALPHA_MULTS[0],
        alpha_mult2=DEFAULT_ALPHA_MULTS[1],
        beta_mult1=DEFAULT_BETA_MULTS[0],
        beta_mult2=DEFAULT_BETA_MULTS[1],
        gamma=DEFAULT_GAMMA,
        upsilon=DEFAULT_UPSILON,
        tau=DEFAULT_TAU,
        sigma=0.01,
        known_scale=None,
        k_init=1,
        itr1_k_break=3,
        itr1_graph_break=500,
        max_samples=10_000_000,
        random_state=None,
    ):
        self.alpha_mult1 = alpha_mult1
        self.alpha_mult2 = alpha_mult2
        self.beta_mult1 = beta_mult1
        self.beta_mult2 = beta_mult2
        self.gamma = gamma
        self.upsilon = upsilon
        self.tau = tau
        self.sigma = sigma
        self.known_scale = known_scale
        self.k_init = k_init
        self.itr1_k_break = itr1_k_break
        self.itr1_graph_break = itr1_graph_break
        self.max_samples = max_samples
        self.random_state = random_state

    def fit(self, X, y):
        """Estimate the similarity transform taking X onto y.

        Parameters
        ----------
        X : array-like of shape (n, 3)
            Source points.
        y : array-like of shape (n, 3)
            Matched target points.
        """
        X, y = check_pair_set(X, y, 3, "RansicRegistration")
        for name in ("alpha_mult1", "alpha_mult2", "beta_mult1", "beta_mult2"):
            check_positive(getattr(self, name), name)
        gamma = check_angle(self.gamma, "gamma")
        upsilon = check_positive(self.upsilon, "upsilon")
        tau = check_count(self.tau, "tau")
        sigma = check_positive(self.sigma, "sigma")
        known = self.known_scale
        if known is not None:
            known = check_positive(known, "known_scale")
        k_init = check_count(self.k_init, "k_init")
        k_break = check_count(self.itr1_k_break, "itr1_k_break")
        graph_break = check_count(self.itr1_graph_break, "itr1_graph_break")
        max_samples = check_count(self.max_samples, "max_samples")

        rng = np.random.default_rng(self.random_state)
        engine = _RegistrationEngine(
            X, y,
            alpha_mults=(float(self.alpha_mult1), float(self.alpha_mult2)),
            beta_mults=(float(self.beta_mult1), float(self.beta_mult2)),
            gamma=gamma, upsilon=upsilon, tau=tau, sigma=sigma,
            known_scale=known, k_init=k_init, k_break=k_break,
            graph_break=graph_break, max_samples=max_samples, rng=rng,
        )
        engine.run()

        self.scale_ = engine.scale
        self.rotation_ = engine.rotation
        self.translation_ = engine.translation
        self.residuals_ = engine.residuals
        self.inlier_indices_ = consensus.extract_inliers(engine.residuals, sigma)
        mask = np.zeros(len(X), dtype=bool)
        mask[self.inlier_indices_] = True
        self.inlier_mask_ = mask
        self.samples_drawn_ = tuple(engine.samples_per_itr)
        self.vertices_created_ = tuple(engine.vertices_per_itr)
        self.iteration_used_ = engine.iteration_used
        self.terminated_ = engine.terminated
        self.n_features_in_ = 3
        return self

    def transform(self, X):
        """Apply the fitted similarity transform to rows of X."""
        self._check_fitted()
        X = np.asarray(X, dtype=float)
        return self.scale_ * (X @ self.rotation_.T) + self.translation_

    def predict(self, X):
        """Alias of :meth:`transform`."""
        return self.transform(X)

    def _check_fitted(self):
        check_is_fitted(self, "rotation_")


class _RegistrationEngine:
    """Two-round batched sampling loop with sequential semantics."""

    def __init__(self, p, q, alpha_mults, beta_mults, gamma, upsilon, tau,
                 sigma, known_scale, k_init, k_break, graph_break,
                 max_samples, rng):
        self.p = p
        self.q = q
        self.n = len(p)
        self.alpha_mults = alpha_mults
        self.beta_mults = beta_mults
        self.cos_gamma = np.cos(gamma)
        self.upsilon = upsilon
        self.tau = tau
        self.sigma = sigma
        self.gate = consensus.RESIDUAL_GATE * sigma
        self.known = known_scale
        self.k_init = k_init
        self.k_break = k_break
        self.graph_break = graph_break
        self.max_samples = max_samples
        self.rng = rng

        self.samples_per_itr = []
        self.vertices_per_itr = []
        self.iteration_used = 1
        self.terminated = False
        self.best_count = -1
        self.best_model = None
        self.best_resid = None
        self.last_vertex_model = None

        self.scale = 1.0 if known_scale is None else float(known_scale)
        self.rotation = np.eye(3)
        self.translation = np.zeros(3)
        self.residuals = np.full(self.n, np.inf)

    def run(self):
        for itr in (1, 2):
            self.iteration_used = itr
            done = self._run_iteration(itr)
            if done:
                return
        self._fallback()

    # one sampling round; True when termination concluded the whole fit
    def _run_iteration(self, itr):
        self.alpha = self.alpha_mults[itr - 1] * self.sigma
        self.beta = self.beta_mults[itr - 1] * self.sigma
        self.k = self.k_init
        # round 2 starts from a clean graph: everything stored under the
        # looser round-1 bounds is discarded
        cap = 256
        self.vert_idx = np.empty((cap, 3), dtype=np.int64)
        self.vert_rot = np.empty((cap, 3, 3))
        self.vert_scale = np.empty(cap)
        self.vert_trans = np.empty((cap, 3))
        self.n_vert = 0
        self.seen = set()
        samples = 0

        while samples < self.max_samples:
            block = min(_BATCH, self.max_samples - samples)
            consumed = self._run_block(block, itr)
            if consumed is not None:  # terminated or escalated mid-block
                samples += consumed
                break
            samples += block
        self.samples_per_itr.append(samples)
        self.vertices_per_itr.append(self.n_vert)
        return self.terminated

    def _run_block(self, block, itr):
        """Draw and process one block; returns samples consumed when the block
        ends early (termination or escalation), else None."""
        n = self.n
        i = self.rng.integers(0, n, size=block)
        j = self.rng.integers(0, n - 1, size=block)
        j = j + (j >= i)
        k = self.rng.integers(0, n - 2, size=block)
        lo = np.minimum(i, j)
        hi = np.maximum(i, j)
        k = k + (k >= lo)
        k = k + (k >= hi)
        idx = np.stack([i, j, k], axis=1)

        ps = self.p[idx]  # (block, 3, 3)
        qs = self.q[idx]
        p_t = ps - ps.mean(axis=1, keepdims=True)
        q_t = qs - qs.mean(axis=1, keepdims=True)
        p_n = np.linalg.norm(p_t, axis=2)
        q_n = np.linalg.norm(q_t, axis=2)

        ok = np.all(p_n > ZERO_TOL, axis=1)
        # colinearity gate on the two longest demeaned sources
        order = np.argsort(p_n, axis=1)
        rows = np.arange(block)
        va = p_t[rows, order[:, 2]]
        vb = p_t[rows, order[:, 1]]
        cross = np.linalg.norm(np.cross(va, vb), axis=1)
        ok &= cross >= TRIPLE_COLINEAR_TOL * p_n[rows, order[:, 2]] * p_n[rows, order[:, 1]]

        # max() keeps excluded zero-norm rows finite instead of NaN-ing the block
        safe_n = np.maximum(p_n, ZERO_TOL)
        sv = q_n / safe_n
        inv = 1.0 / safe_n
        for a, b in ((0, 1), (0, 2), (1, 2)):
            ok &= np.abs(sv[:, a] - sv[:, b]) <= self.alpha * (inv[:, a] + inv[:, b])
        if self.known is not None:
            for a in range(3):
                ok &= np.abs(sv[:, a] - self.known) <= self.alpha * inv[:, a]
        if not np.any(ok):
            return None

        pos = np.flatnonzero(ok)
        lim = (2.0 * self.beta) ** 2
        # solve lazily in chunks: at low outlier ratios nearly the whole
        # block passes the filter while termination lands within the first
        # few admissions
        for c in range(0, len(pos), _SOLVE_CHUNK):
            sub = pos[c:c + _SOLVE_CHUNK]
            s_star, rots, t_star, votes = _solve_triples(
                p_t[sub], q_t[sub], p_n[sub], q_n[sub],
                ps[sub], qs[sub], self.known,
            )
            d01 = votes[:, 0] - votes[:, 1]
            d02 = votes[:, 0] - votes[:, 2]
            d12 = votes[:, 1] - votes[:, 2]
            t_ok = (
                (np.einsum("bk,bk->b", d01, d01) <= lim)
                & (np.einsum("bk,bk->b", d02, d02) <= lim)
                & (np.einsum("bk,bk->b", d12, d12) <= lim)
            )
            for m in np.flatnonzero(t_ok):
                stop = self._admit(
                    idx[sub[m]], s_star[m], rots[m], t_star[m], itr,
                )
                if stop:
                    return int(sub[m]) + 1
        return None

    def _admit(self, triple, s, rot, t, itr):
        """Insert a passed triple; returns True when the block must stop
        (termination or escalation)."""
        key = tuple(sorted(triple.tolist()))
        if key in self.seen:
            return False
        self.seen.add(key)
        if self.n_vert == len(self.vert_idx):
            self._grow()
        self.vert_idx[self.n_vert] = key
        self.vert_rot[self.n_vert] = rot
        self.vert_scale[self.n_vert] = s
        self.vert_trans[self.n_vert] = t
        self.n_vert += 1
        self.last_vertex_model = (s, rot.copy(), t.copy())

        m = self.n_vert - 1
        degree = 0
        neighbor_rows = []
        if m:
            tr = np.einsum("mij,ij->m", self.vert_rot[:m], rot)
            for row in np.flatnonzero((tr - 1.0) / 2.0 >= self.cos_gamma):
                if self._merged_rows(key, self.vert_idx[row]):
                    degree += 1
                    neighbor_rows.append(row)
        if degree < self.k:
            return False

        union = np.unique(np.concatenate(
            [np.asarray(key)] + [self.vert_idx[r] for r in neighbor_rows]
        ))
        try:
            s_u, r_u, t_u = solve_sim_transform(self.p[union], self.q[union], self.known)
        except DegenerateInput:
            # a freak colinear union: treat as if the degree event never fired
            return False
        resid = np.linalg.norm(
            s_u * (self.p @ r_u.T) + t_u - self.q, axis=1
        )
        kept = resid <= self.gate
        count = int(np.count_nonzero(kept))
        if count > self.best_count:
            self.best_count = count
            self.best_model = (s_u, r_u, t_u)
            self.best_resid = resid
        if count >= self.tau and resid[kept].mean() <= self.upsilon * self.sigma:
            self.terminated = True
            self._conclude(resid)
            return True
        if itr == 1 and (self.k >= self.k_break or self.n_vert >= self.graph_break):
            return True  # escalate: restart sampling under the round-2 bounds
        self.k += 1
        return False

    def _merged_rows(self, key, other):
        # sorted index order keeps the predicate bit-identical no matter which
        # vertex is the newer one, matching six_point_edge
        merged = np.sort(np.concatenate([np.asarray(key), other]), kind="stable")
        return _merged_compat(
            self.p[merged], self.q[merged], self.alpha, self.beta, self.known
        )

    def _conclude(self, resid):
        c_star = np.flatnonzero(resid <= self.gate)
        s, rot, t = solve_sim_transform(self.p[c_star], self.q[c_star], self.known)
        self.scale = s
        self.rotation = rot
        self.translation = t
        self.residuals = np.linalg.norm(s * (self.p @ rot.T) + t - self.q, axis=1)

    def _fallback(self):
        if self.best_model is not None:
            self.scale, self.rotation, self.translation = self.best_model
            self.residuals = self.best_resid
        elif self.last_vertex_model is not None:
            s, rot, t = self.last_vertex_model
            self.scale, self.rotation, self.translation = s, rot, t
            self.residuals = np.linalg.norm(
                s * (self.p @ rot.T) + t - self.q, axis=1
            )
        # else: identity transform and +inf residuals from __init__

    def _grow(self):
        cap = 2 * len(self.vert_idx)
        idx = np.empty((cap, 3), dtype=np.int64)
        rot = np.empty((cap, 3, 3))
        sc = np.empty(cap)
        tr = np.empty((cap, 3))
        idx[: self.n_vert] = self.vert_idx[: self.n_vert]
        rot[: self.n_vert] = self.vert_rot[: self.n_vert]
        sc[: self.n_vert] = self.vert_scale[: self.n_vert]
        tr[: self.n_vert] = self.vert_trans[: self.n_vert]
        self.vert_idx, self.vert_rot = idx, rot
        self.vert_scale, self.vert_trans = sc, tr


def _solve_triples(p_t, q_t, p_n, q_n, ps, qs, known_scale):
    """Batched local models for triples: scale, rotation, translation, votes."""
    if known_scale is not None:
        s = np.full(len(p_t), float(known_scale))
    else:
        s = np.einsum("bi,bi->b", p_n, q_n) / np.einsum("bi,bi->b", p_n, p_n)
    h = np.einsum("bij,bik->bjk", s[:, None, None] * p_t, q_t)
    u, _, vt = np.linalg.svd(h)
    v = np.transpose(vt, (0, 2, 1))
    d = np.linalg.det(u) * np.linalg.det(v)
    v[:, :, 2] *= np.where(d < 0, -1.0, 1.0)[:, None]
    rots = v @ np.transpose(u, (0, 2, 1))
    pred = s[:, None, None] * np.einsum("bij,bkj->bki", rots, ps)
    votes = qs - pred
    t = qs.mean(axis=1) - s[:, None] * np.einsum(
        "bij,bj->bi", rots, ps.mean(axis=1)
    )
    return s, rots, t, votes
