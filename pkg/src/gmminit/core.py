"""Gaussian primitives and mixture likelihoods.

Components cache the lower Cholesky factor of their covariance, so every
density evaluation is a triangular solve rather than an inverse.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import logsumexp

LOG_2PI = math.log(2.0 * math.pi)

# relative pivot threshold for declaring a matrix positive definite
PD_PIVOT_TOL = 1e-12
SYMMETRY_TOL = 1e-12


def as_data_matrix(X) -> np.ndarray:
    """Validate and return ``X`` as a C-contiguous float64 array of shape (N, D)."""
    arr = np.array(X, dtype=np.float64, copy=True)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2:
        raise ValueError(f"data must be 2-D (N x D), got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"data must have N >= 1 and D >= 1, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("data contains NaN or infinite entries")
    arr.setflags(write=False)
    return arr


def _check_symmetric(matrix: np.ndarray) -> None:
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {matrix.shape}")
    scale = max(float(np.max(np.abs(matrix))), 1.0) if matrix.size else 1.0
    if np.max(np.abs(matrix - matrix.T), initial=0.0) > SYMMETRY_TOL * scale:
        raise ValueError("matrix is not symmetric")


def cholesky(matrix) -> np.ndarray | None:
    """Lower Cholesky factor of a symmetric matrix, or ``None`` if it is not PD.

    A matrix counts as positive definite only if every squared pivot exceeds
    ``PD_PIVOT_TOL * max(diag)``. Asymmetric input raises ``ValueError``.
    """
    m = np.asarray(matrix, dtype=np.float64)
    _check_symmetric(m)
    if not np.all(np.isfinite(m)):
        return None
    diag_max = float(np.max(np.diag(m)))
    if diag_max <= 0.0:
        return None
    try:
        L = np.linalg.cholesky(m)
    except np.linalg.LinAlgError:
        return None
    pivots = np.diag(L) ** 2
    if not np.all(pivots > PD_PIVOT_TOL * diag_max):
        return None
    return L


def is_pd(matrix) -> bool:
    return cholesky(matrix) is not None


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float64, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class GaussianComponent:
    """One weighted Gaussian ``(w, mu, Sigma)`` with its Cholesky factor cached.

    Construct through the normal constructor; the factor is derived and a
    non-PD covariance raises ``ValueError``. Arrays are read-only, so a new
    component is needed for any change of covariance.
    """

    weight: float
    mean: np.ndarray
    covariance: np.ndarray
    chol: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        mean = _frozen(np.ravel(self.mean))
        cov = np.array(self.covariance, dtype=np.float64)
        if cov.ndim == 0:
            cov = cov.reshape(1, 1)
        if cov.shape != (mean.size, mean.size):
            raise ValueError(
                f"covariance shape {cov.shape} does not match mean dimension {mean.size}"
            )
        if not (0.0 <= float(self.weight) <= 1.0):
            raise ValueError(f"weight must lie in [0, 1], got {self.weight}")
        L = cholesky(cov)
        if L is None:
            raise ValueError("covariance is not positive definite")
        object.__setattr__(self, "weight", float(self.weight))
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", _frozen(cov))
        object.__setattr__(self, "chol", _frozen(L))

    @property
    def dim(self) -> int:
        return self.mean.size

    @property
    def log_det(self) -> float:
        return 2.0 * float(np.sum(np.log(np.diag(self.chol))))

    def with_weight(self, weight: float) -> "GaussianComponent":
        return GaussianComponent(weight, self.mean, self.covariance)

    def __eq__(self, other):
        if not isinstance(other, GaussianComponent):
            return NotImplemented
        return (
            self.weight == other.weight
            and np.array_equal(self.mean, other.mean)
            and np.array_equal(self.covariance, other.covariance)
        )


@dataclass(frozen=True, eq=False)
class GmmParams:
    """An ordered tuple of ``K >= 1`` components whose weights sum to one."""

    components: tuple[GaussianComponent, ...]

    WEIGHT_TOL = 1e-12

    def __post_init__(self):
        comps = tuple(self.components)
        if not comps:
            raise ValueError("a mixture needs at least one component")
        dims = {c.dim for c in comps}
        if len(dims) != 1:
            raise ValueError(f"components have mixed dimensions {sorted(dims)}")
        total = math.fsum(c.weight for c in comps)
        if abs(total - 1.0) > self.WEIGHT_TOL:
            raise ValueError(f"weights sum to {total!r}, not 1")
        object.__setattr__(self, "components", comps)

    @classmethod
    def from_arrays(cls, weights, means, covariances) -> "GmmParams":
        weights = np.asarray(weights, dtype=np.float64)
        means = np.atleast_2d(np.asarray(means, dtype=np.float64))
        covariances = np.asarray(covariances, dtype=np.float64)
        if covariances.ndim == 2 and means.shape[1] == 1:
            covariances = covariances.reshape(-1, 1, 1)
        return cls(tuple(
            GaussianComponent(w, m, c) for w, m, c in zip(weights, means, covariances)
        ))

    def __len__(self) -> int:
        return len(self.components)

    def __iter__(self):
        return iter(self.components)

    def __getitem__(self, k: int) -> GaussianComponent:
        return self.components[k]

    def __eq__(self, other):
        if not isinstance(other, GmmParams):
            return NotImplemented
        return len(self) == len(other) and all(a == b for a, b in zip(self, other))

    @property
    def k(self) -> int:
        return len(self.components)

    @property
    def dim(self) -> int:
        return self.components[0].dim

    @property
    def weights(self) -> np.ndarray:
        return np.array([c.weight for c in self.components])

    @property
    def means(self) -> np.ndarray:
        return np.stack([c.mean for c in self.components])

    @property
    def covariances(self) -> np.ndarray:
        return np.stack([c.covariance for c in self.components])


def normalized_weights(raw: Sequence[float]) -> np.ndarray:
    """Nonnegative weights divided by their sum, nudged so ``fsum`` is exactly 1."""
    w = np.asarray(raw, dtype=np.float64)
    w = w / math.fsum(w)
    # fold the residual rounding error into the largest entry
    w[int(np.argmax(w))] += 1.0 - math.fsum(w)
    return np.clip(w, 0.0, 1.0)


def _check_dim(x: np.ndarray, d: int) -> None:
    if x.shape[-1] != d:
        raise ValueError(f"dimension mismatch: point has {x.shape[-1]}, model has {d}")


def mahalanobis_sq_batch(X: np.ndarray, comp: GaussianComponent) -> np.ndarray:
    """Squared Mahalanobis distances of the rows of ``X`` to ``comp``."""
    X = np.atleast_2d(X)
    _check_dim(X, comp.dim)
    z = solve_triangular(comp.chol, (X - comp.mean).T, lower=True, check_finite=False)
    return np.einsum("ij,ij->j", z, z)


def mahalanobis_sq(x, comp: GaussianComponent) -> float:
    x = np.asarray(x, dtype=np.float64).ravel()
    return float(mahalanobis_sq_batch(x[None, :], comp)[0])


def min_mahalanobis_batch(X: np.ndarray, theta: GmmParams) -> np.ndarray:
    """Row-wise minimum squared Mahalanobis distance over the components."""
    X = np.atleast_2d(X)
    out = mahalanobis_sq_batch(X, theta[0])
    for comp in theta.components[1:]:
        np.minimum(out, mahalanobis_sq_batch(X, comp), out=out)
    return out


def min_mahalanobis(x, theta: GmmParams) -> float:
    x = np.asarray(x, dtype=np.float64).ravel()
    return float(min_mahalanobis_batch(x[None, :], theta)[0])


def gaussian_log_pdf_batch(X: np.ndarray, comp: GaussianComponent) -> np.ndarray:
    X = np.atleast_2d(X)
    maha = mahalanobis_sq_batch(X, comp)
    return -0.5 * comp.dim * LOG_2PI - 0.5 * comp.log_det - 0.5 * maha


def gaussian_log_pdf(x, comp: GaussianComponent) -> float:
    """``log N(x | mu, Sigma)`` of a single point."""
    x = np.asarray(x, dtype=np.float64).ravel()
    return float(gaussian_log_pdf_batch(x[None, :], comp)[0])


def weighted_log_densities(X: np.ndarray, theta: GmmParams) -> np.ndarray:
    """Matrix of ``log w_k + log N(x_n | mu_k, Sigma_k)``, shape (N, K)."""
    X = np.atleast_2d(X)
    _check_dim(X, theta.dim)
    out = np.empty((X.shape[0], theta.k))
    with np.errstate(divide="ignore"):
        for k, comp in enumerate(theta):
            out[:, k] = np.log(comp.weight) + gaussian_log_pdf_batch(X, comp)
    return out


def mixture_log_pdf_batch(X: np.ndarray, theta: GmmParams) -> np.ndarray:
    return logsumexp(weighted_log_densities(X, theta), axis=1)


def mixture_log_pdf(x, theta: GmmParams) -> float:
    """Log density of the mixture at one point, via log-sum-exp."""
    x = np.asarray(x, dtype=np.float64).ravel()
    return float(mixture_log_pdf_batch(x[None, :], theta)[0])


def log_likelihood(X, theta: GmmParams) -> float:
    """Sum over rows of the mixture log density."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    return math.fsum(mixture_log_pdf_batch(X, theta))


def spherical_fallback(points: np.ndarray, center: np.ndarray) -> np.ndarray:
    """Covariance for a cluster whose scatter matrix is not PD.

    Tries ``(1 / (D |C|)) * sum ||x - center||^2 * I`` first and drops to the
    identity when that is still degenerate.
    """
    n, d = points.shape
    scale = float(np.sum((points - center) ** 2)) / (d * n)
    sph = scale * np.eye(d)
    if cholesky(sph) is not None:
        return sph
    return np.eye(d)


def scatter_covariance(points: np.ndarray, center: np.ndarray) -> np.ndarray:
    """Biased (1/N) scatter matrix about ``center``, with PD fallbacks applied."""
    diff = points - center
    cov = diff.T @ diff / points.shape[0]
    cov = 0.5 * (cov + cov.T)
    if cholesky(cov) is not None:
        return cov
    return spherical_fallback(points, center)


def mle_single_gaussian(X) -> GaussianComponent:
    """Closed-form maximum-likelihood Gaussian for ``X`` (weight 1)."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    mean = X.mean(axis=0)
    return GaussianComponent(1.0, mean, scatter_covariance(X, mean))


def single_gaussian_params(X) -> GmmParams:
    return GmmParams((mle_single_gaussian(X),))


def stack_components(components: Iterable[GaussianComponent]) -> GmmParams:
    return GmmParams(tuple(components))
