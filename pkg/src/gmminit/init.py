"""Initialization strategies for EM on Gaussian mixtures.

Three plain mean selectors (uniform, K-means++, Gonzalez) are completed to a
full mixture by :func:`means2gmm`. The mixture-aware variants grow the model
one component at a time, picking the next mean from the minimum Mahalanobis
distance ``m1`` of the current model. All randomness flows through a
``numpy.random.Generator`` passed in by the caller.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .core import (
    GaussianComponent,
    GmmParams,
    min_mahalanobis_batch,
    normalized_weights,
    scatter_covariance,
    single_gaussian_params,
)


class MethodKind(str, enum.Enum):
    UNIFORM = "Uniform"
    KMEANSPP = "KmeansPP"
    GONZALEZ = "Gonzalez"
    ADAPTIVE = "Adaptive"
    GONZALEZ_FOR_GMM = "GonzalezForGMM"
    KWEDLOS_GONZALEZ = "KwedlosGonzalez"
    AGGLOMERATIVE = "Agglomerative"


_SAMPLED = {MethodKind.GONZALEZ_FOR_GMM, MethodKind.KWEDLOS_GONZALEZ, MethodKind.AGGLOMERATIVE}

_DISPLAY = {
    MethodKind.UNIFORM: "Uniform",
    MethodKind.KMEANSPP: "Kmeans++",
    MethodKind.GONZALEZ: "Gonzalez",
    MethodKind.ADAPTIVE: "Adaptive",
    MethodKind.GONZALEZ_FOR_GMM: "GonzalezForGMM",
    MethodKind.KWEDLOS_GONZALEZ: "KwedlosGonzalez",
    MethodKind.AGGLOMERATIVE: "Agglomerative",
}


@dataclass(frozen=True)
class MethodSpec:
    """An initialization method plus its hyperparameter, if it has one."""

    kind: MethodKind
    alpha: float | None = None
    s: float | None = None

    def __post_init__(self):
        kind = MethodKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if (self.alpha is not None) != (kind is MethodKind.ADAPTIVE):
            raise ValueError(f"alpha must be given iff kind is Adaptive (kind={kind.value})")
        if (self.s is not None) != (kind in _SAMPLED):
            raise ValueError(f"s must be given iff kind samples a subset (kind={kind.value})")
        if self.alpha is not None:
            if not 0.0 <= self.alpha <= 1.0:
                raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")
            object.__setattr__(self, "alpha", float(self.alpha))
        if self.s is not None:
            if not 0.0 < self.s <= 1.0:
                raise ValueError(f"s must lie in (0, 1], got {self.s}")
            object.__setattr__(self, "s", float(self.s))

    @property
    def label(self) -> str:
        name = _DISPLAY[self.kind]
        param = self.alpha if self.alpha is not None else self.s
        if param is None:
            return name
        return f"{name}({param:g})"

    @classmethod
    def parse(cls, label: str) -> "MethodSpec":
        """Inverse of :attr:`label`, e.g. ``"Adaptive(0.5)"`` or ``"Kmeans++"``."""
        label = label.strip()
        param = None
        if label.endswith(")") and "(" in label:
            label, _, rest = label.partition("(")
            param = float(rest[:-1])
        for kind, name in _DISPLAY.items():
            if label in (name, kind.value):
                break
        else:
            raise ValueError(f"unknown method {label!r}")
        if kind is MethodKind.ADAPTIVE:
            return cls(kind, alpha=param)
        if kind in _SAMPLED:
            return cls(kind, s=param)
        if param is not None:
            raise ValueError(f"method {label!r} takes no parameter")
        return cls(kind)


STANDARD_METHODS: tuple[MethodSpec, ...] = (
    MethodSpec(MethodKind.UNIFORM),
    MethodSpec(MethodKind.KMEANSPP),
    MethodSpec(MethodKind.ADAPTIVE, alpha=1.0),
    MethodSpec(MethodKind.ADAPTIVE, alpha=0.5),
    MethodSpec(MethodKind.AGGLOMERATIVE, s=0.1),
    MethodSpec(MethodKind.GONZALEZ),
    MethodSpec(MethodKind.GONZALEZ_FOR_GMM, s=0.1),
    MethodSpec(MethodKind.KWEDLOS_GONZALEZ, s=0.1),
)


# ---------------------------------------------------------------------------
# helpers


def _check_k(n: int, k: int) -> None:
    if k < 1:
        raise ValueError(f"K must be >= 1, got {k}")
    if k > n:
        raise ValueError(f"K={k} exceeds the number of available points ({n})")


def sample_size(n: int, s: float) -> int:
    """``ceil(s * n)`` with float noise removed (0.1 * 30 is 3, not 4)."""
    return max(1, math.ceil(round(s * n, 9)))


def draw_index(weights: np.ndarray, rng: np.random.Generator) -> int:
    """Draw an index with probability proportional to nonnegative ``weights``.

    Zero-weight entries are never returned.
    """
    cum = np.cumsum(weights)
    u = rng.random() * cum[-1]
    idx = int(np.searchsorted(cum, u, side="right"))
    return min(idx, len(cum) - 1)


def _sq_dists_to(X: np.ndarray, p: np.ndarray) -> np.ndarray:
    diff = X - p
    return np.einsum("ij,ij->i", diff, diff)


def nearest_mean(X: np.ndarray, means: np.ndarray) -> np.ndarray:
    """Index of the closest mean for every row (lowest index on ties)."""
    out = np.zeros(X.shape[0], dtype=np.intp)
    best = _sq_dists_to(X, means[0])
    for k in range(1, means.shape[0]):
        d = _sq_dists_to(X, means[k])
        closer = d < best
        out[closer] = k
        best = np.where(closer, d, best)
    return out


# ---------------------------------------------------------------------------
# completion of a set of means


def means2gmm(X: np.ndarray, means) -> GmmParams:
    """Turn ``K`` candidate means into a mixture by hard partitioning ``X``.

    Each cluster gets its centroid, its biased scatter matrix and weight
    ``|C_k| / N``. A non-PD scatter drops to a spherical covariance and then
    to the identity. An empty cluster keeps its seed mean with identity
    covariance and weight ``1 / (2N)`` before all weights are renormalized.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    means = np.atleast_2d(np.asarray(means, dtype=np.float64))
    n, d = X.shape
    if means.shape[1] != d:
        raise ValueError(f"means have dimension {means.shape[1]}, data has {d}")
    if means.shape[0] < 1:
        raise ValueError("need at least one mean")
    labels = nearest_mean(X, means)
    counts = np.bincount(labels, minlength=means.shape[0])
    new_means, covs, raw = [], [], []
    for k in range(means.shape[0]):
        if counts[k] == 0:
            new_means.append(means[k])
            covs.append(np.eye(d))
            raw.append(1.0 / (2 * n))
            continue
        pts = X[labels == k]
        mu = pts.mean(axis=0)
        new_means.append(mu)
        covs.append(scatter_covariance(pts, mu))
        raw.append(counts[k] / n)
    if np.all(counts > 0):
        weights = np.asarray(raw)
    else:
        weights = normalized_weights(raw)
    return GmmParams(tuple(
        GaussianComponent(w, m, c) for w, m, c in zip(weights, new_means, covs)
    ))


# ---------------------------------------------------------------------------
# plain mean selectors


def uniform_means(X: np.ndarray, K: int, rng: np.random.Generator) -> np.ndarray:
    """``K`` distinct rows drawn uniformly without replacement."""
    X = np.atleast_2d(X)
    _check_k(X.shape[0], K)
    idx = rng.choice(X.shape[0], size=K, replace=False)
    return X[idx].copy()


def kmeanspp_indices(X: np.ndarray, K: int, rng: np.random.Generator,
                     first: int | None = None) -> list[int]:
    n = X.shape[0]
    _check_k(n, K)
    chosen = [int(rng.integers(n)) if first is None else int(first)]
    cost = _sq_dists_to(X, X[chosen[0]])
    for _ in range(1, K):
        total = float(cost.sum())
        if total > 0.0:
            idx = draw_index(cost, rng)
        else:
            free = np.setdiff1d(np.arange(n), chosen)
            idx = int(free[rng.integers(free.size)])
        chosen.append(idx)
        np.minimum(cost, _sq_dists_to(X, X[idx]), out=cost)
    return chosen


def kmeanspp_means(X: np.ndarray, K: int, rng: np.random.Generator,
                   first: int | None = None) -> np.ndarray:
    """K-means++ seeding: each new mean drawn with probability proportional to D^2.

    When every point already coincides with a chosen mean the draw falls back
    to uniform over the rows not yet chosen. ``first`` pins the first index.
    """
    X = np.atleast_2d(X)
    return X[kmeanspp_indices(X, K, rng, first)].copy()


def gonzalez_indices(X: np.ndarray, K: int, rng: np.random.Generator,
                     first: int | None = None) -> list[int]:
    n = X.shape[0]
    _check_k(n, K)
    chosen = [int(rng.integers(n)) if first is None else int(first)]
    dist = _sq_dists_to(X, X[chosen[0]])
    for _ in range(1, K):
        idx = int(np.argmax(dist))
        chosen.append(idx)
        np.minimum(dist, _sq_dists_to(X, X[idx]), out=dist)
    return chosen


def gonzalez_means(X: np.ndarray, K: int, rng: np.random.Generator,
                   first: int | None = None) -> np.ndarray:
    """Farthest-first traversal with a uniform first pick; ties go to the lowest row."""
    X = np.atleast_2d(X)
    return X[gonzalez_indices(X, K, rng, first)].copy()


# ---------------------------------------------------------------------------
# mixture-aware variants


def sample_density(S: np.ndarray, theta: GmmParams, alpha: float) -> np.ndarray:
    """Probability vector ``alpha * m1 / sum(m1) + (1 - alpha) / |S|`` over ``S``.

    If all ``m1`` values vanish the result is uniform.
    """
    S = np.atleast_2d(S)
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    m = S.shape[0]
    m1 = min_mahalanobis_batch(S, theta)
    total = math.fsum(m1)
    if total <= 0.0:
        return np.full(m, 1.0 / m)
    return alpha * (m1 / total) + (1.0 - alpha) / m


def _contains_row(means: np.ndarray, p: np.ndarray) -> bool:
    return bool(np.any(np.all(means == p, axis=1)))


def adaptive_init(X: np.ndarray, K: int, alpha: float,
                  rng: np.random.Generator) -> GmmParams:
    """Grow a mixture from the single-Gaussian MLE, sampling new means from ``m_alpha``.

    A draw that hits an existing mean is repeated up to ``N`` times; after that
    the duplicate is accepted and :func:`means2gmm` absorbs the empty cluster.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    n = X.shape[0]
    _check_k(n, K)
    theta = single_gaussian_params(X)
    for _ in range(1, K):
        probs = sample_density(X, theta, alpha)
        current = theta.means
        for _attempt in range(n):
            p = X[draw_index(probs, rng)]
            if not _contains_row(current, p):
                break
        theta = means2gmm(X, np.vstack([current, p]))
    return theta


def _farthest(S: np.ndarray, theta: GmmParams, farthest: bool) -> np.ndarray:
    m1 = min_mahalanobis_batch(S, theta)
    idx = int(np.argmax(m1)) if farthest else int(np.argmin(m1))
    return S[idx]


def _subsample(X: np.ndarray, K: int, s: float, rng: np.random.Generator) -> np.ndarray:
    n = X.shape[0]
    m = sample_size(n, s)
    if m < K:
        raise ValueError(f"sample of size ceil(s*N)={m} is smaller than K={K}")
    return X[rng.choice(n, size=m, replace=False)]


def gonzalez_for_gmm(X: np.ndarray, K: int, s: float, rng: np.random.Generator,
                     farthest: bool = True) -> GmmParams:
    """Gonzalez-style growth: the next mean is the sample point of largest ``m1``.

    ``farthest=False`` picks the smallest ``m1`` instead, for replication
    studies of the alternative reading.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    _check_k(X.shape[0], K)
    S = _subsample(X, K, s, rng)
    theta = single_gaussian_params(X)
    for _ in range(1, K):
        p = _farthest(S, theta, farthest)
        theta = means2gmm(X, np.vstack([theta.means, p]))
    return theta


def data_covariance_trace(X: np.ndarray) -> float:
    return float(np.sum(X.var(axis=0)))


def random_orthonormal(d: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed orthonormal matrix from the QR of a Gaussian matrix."""
    q, r = np.linalg.qr(rng.standard_normal((d, d)))
    return q * np.sign(np.diag(r))


def rand_covar(X: np.ndarray, K: int, rng: np.random.Generator,
               trace_x: float | None = None) -> tuple[np.ndarray, bool]:
    """Random covariance with trace ``trace(Sigma_X) / (10 D K)`` and spread <= 10.

    Returns ``(matrix, degenerate)``. When the data have zero spread the
    matrix is ``1e-6 * I`` and ``degenerate`` is True.
    """
    X = np.atleast_2d(X)
    d = X.shape[1]
    if K < 1:
        raise ValueError(f"K must be >= 1, got {K}")
    tr = data_covariance_trace(X) if trace_x is None else trace_x
    if not tr > 0.0:
        return 1e-6 * np.eye(d), True
    lam = rng.uniform(1.0, 10.0, size=d)
    lam *= (tr / (10.0 * d * K)) / lam.sum()
    q = random_orthonormal(d, rng)
    cov = q.T @ np.diag(lam) @ q
    return 0.5 * (cov + cov.T), False


def kwedlos_gonzalez(X: np.ndarray, K: int, s: float, rng: np.random.Generator,
                     farthest: bool = True) -> GmmParams:
    """Gonzalez growth on a subsample with random covariances and random weights."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    _check_k(X.shape[0], K)
    S = _subsample(X, K, s, rng)
    tr = data_covariance_trace(X)
    means = [S[rng.integers(S.shape[0])]]
    covs = [rand_covar(X, K, rng, trace_x=tr)[0]]
    for _ in range(1, K):
        # m1 ignores weights, so a placeholder uniform weighting is enough here
        theta = GmmParams.from_arrays(normalized_weights(np.ones(len(means))), means, covs)
        means.append(_farthest(S, theta, farthest))
        covs.append(rand_covar(X, K, rng, trace_x=tr)[0])
    weights = normalized_weights(rng.uniform(0.0, 1.0, size=K))
    return GmmParams.from_arrays(weights, means, covs)


# ---------------------------------------------------------------------------
# average-linkage HAC


def average_linkage(points: np.ndarray, K: int) -> list[list[int]]:
    """Average-linkage agglomeration on squared Euclidean distances down to ``K`` clusters.

    Distances between merged clusters follow the Lance-Williams update
    ``d(i+j, l) = (n_i d(i,l) + n_j d(j,l)) / (n_i + n_j)``. The closest pair
    is merged first; ties go to the lexicographically smallest pair.
    Returns the member indices of every remaining cluster.
    """
    points = np.atleast_2d(points)
    m = points.shape[0]
    _check_k(m, K)
    dist = cdist(points, points, "sqeuclidean")
    np.fill_diagonal(dist, np.inf)
    members: list[list[int] | None] = [[i] for i in range(m)]
    sizes = np.ones(m)
    for _ in range(m - K):
        flat = int(np.argmin(dist))
        i, j = divmod(flat, m)
        if i > j:
            i, j = j, i
        merged = (sizes[i] * dist[i] + sizes[j] * dist[j]) / (sizes[i] + sizes[j])
        dist[i, :] = merged
        dist[:, i] = merged
        dist[i, i] = np.inf
        dist[j, :] = np.inf
        dist[:, j] = np.inf
        sizes[i] += sizes[j]
        members[i] = members[i] + members[j]
        members[j] = None
    return [sorted(c) for c in members if c is not None]


def hac_init(X: np.ndarray, K: int, s: float, rng: np.random.Generator) -> GmmParams:
    """Average-linkage HAC on a uniform subsample; centroids go through :func:`means2gmm`."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    _check_k(X.shape[0], K)
    S = _subsample(X, K, s, rng)
    clusters = average_linkage(S, K)
    centroids = np.stack([S[c].mean(axis=0) for c in clusters])
    return means2gmm(X, centroids)


# ---------------------------------------------------------------------------
# dispatch


def run_method(X: np.ndarray, K: int, spec: MethodSpec, rng: np.random.Generator) -> GmmParams:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    kind = spec.kind
    if kind is MethodKind.UNIFORM:
        return means2gmm(X, uniform_means(X, K, rng))
    if kind is MethodKind.KMEANSPP:
        return means2gmm(X, kmeanspp_means(X, K, rng))
    if kind is MethodKind.GONZALEZ:
        return means2gmm(X, gonzalez_means(X, K, rng))
    if kind is MethodKind.ADAPTIVE:
        return adaptive_init(X, K, spec.alpha, rng)
    if kind is MethodKind.GONZALEZ_FOR_GMM:
        return gonzalez_for_gmm(X, K, spec.s, rng)
    if kind is MethodKind.KWEDLOS_GONZALEZ:
        return kwedlos_gonzalez(X, K, spec.s, rng)
    if kind is MethodKind.AGGLOMERATIVE:
        return hac_init(X, K, spec.s, rng)
    raise ValueError(f"unhandled method kind {kind}")
