"""Synthetic Gaussian mixtures with controlled separation, shape and weights.

A mixture is described by a :class:`GeneratorSpec`. Means start uniform in a
cube and are finally rescaled so that the separation

    c = min_{l != k} ||mu_l - mu_k|| / sqrt(max(tr Sigma_l, tr Sigma_k))

hits the requested value exactly. Eccentricity is the ratio of the largest to
the smallest axis standard deviation (square roots of covariance eigenvalues).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, replace

import numpy as np

from .core import GaussianComponent, GmmParams, as_data_matrix

NOISE_LABEL = -1
NOISE_BOX_FACTOR = 1.2


@dataclass(frozen=True)
class GeneratorSpec:
    """Recipe for one synthetic dataset.

    ``eccentricity`` is either a fixed ratio ``e >= 1`` or a ``(lo, hi)`` range
    from which every component draws its own ratio. ``size_mode="different"``
    gives component ``k`` (0-based) a minimum axis scale of ``2**k``.
    ``side`` is the edge of the cube the raw means are drawn from; it only
    matters through rounding because the means are rescaled afterwards.
    """

    k: int
    d: int
    separation: float
    weight_exponent: float = 0.0
    eccentricity: float | tuple[float, float] = 1.0
    size_mode: str = "constant"
    side: float | None = None
    n_points: int = 10_000
    noise_fraction: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.k < 1 or self.d < 1 or self.n_points < 1:
            raise ValueError("k, d and n_points must all be >= 1")
        if not self.separation > 0:
            raise ValueError(f"separation must be positive, got {self.separation}")
        if not 0.0 <= self.noise_fraction < 1.0:
            raise ValueError(f"noise_fraction must lie in [0, 1), got {self.noise_fraction}")
        if self.size_mode not in ("constant", "different"):
            raise ValueError(f"size_mode must be 'constant' or 'different', got {self.size_mode!r}")
        if isinstance(self.eccentricity, tuple):
            lo, hi = self.eccentricity
            if not 1.0 <= lo <= hi:
                raise ValueError(f"eccentricity range must satisfy 1 <= lo <= hi, got {self.eccentricity}")
        elif not self.eccentricity >= 1.0:
            raise ValueError(f"eccentricity must be >= 1, got {self.eccentricity}")
        if self.side is not None and not self.side > 0:
            raise ValueError("side must be positive")

    @property
    def cube_side(self) -> float:
        return self.side if self.side is not None else 100.0 * self.k ** (1.0 / self.d)


@dataclass
class LabeledDataset:
    data: np.ndarray
    labels: np.ndarray  # component index per row, NOISE_LABEL for noise
    truth: GmmParams

    def __post_init__(self):
        if len(self.labels) != self.data.shape[0]:
            raise ValueError("one label per row required")
        if np.any(self.labels >= self.truth.k):
            raise ValueError("label out of range")

    @property
    def n_noise(self) -> int:
        return int(np.sum(self.labels == NOISE_LABEL))


def weight_schedule(K: int, c_w: float) -> np.ndarray:
    """Weights proportional to ``2**(c_w * i)`` for ``i = 1..K``."""
    if K < 1:
        raise ValueError("K must be >= 1")
    # shift the exponent so large c_w * K cannot overflow
    expo = c_w * np.arange(1, K + 1, dtype=np.float64)
    raw = np.exp2(expo - expo.max())
    return raw / raw.sum()


def random_rotation(d: int, rng: np.random.Generator) -> np.ndarray:
    """Orthonormal matrix from the QR decomposition of a uniform random matrix."""
    q, r = np.linalg.qr(rng.uniform(-1.0, 1.0, size=(d, d)))
    return q * np.sign(np.diag(r))


def axis_scales(d: int, lambda_min: float, eccentricity: float,
                rng: np.random.Generator) -> np.ndarray:
    """Axis standard deviations: min ``lambda_min``, max ``e * lambda_min``, rest uniform between."""
    if d == 1:
        return np.array([lambda_min])
    lam = np.empty(d)
    lam[0] = lambda_min
    lam[1] = eccentricity * lambda_min
    lam[2:] = rng.uniform(lambda_min, eccentricity * lambda_min, size=d - 2)
    return lam


def random_covariance(d: int, lambda_min: float, eccentricity: float,
                      rng: np.random.Generator) -> np.ndarray:
    """``Q^T diag(lambda^2) Q`` with the requested smallest scale and eccentricity."""
    if not lambda_min > 0:
        raise ValueError("lambda_min must be positive")
    if not eccentricity >= 1.0:
        raise ValueError("eccentricity must be >= 1")
    lam = axis_scales(d, lambda_min, eccentricity, rng)
    q = random_rotation(d, rng)
    cov = q.T @ np.diag(lam ** 2) @ q
    return 0.5 * (cov + cov.T)


def separation(theta: GmmParams) -> float:
    """Minimum over pairs of mean distance over the root of the larger trace."""
    if theta.k < 2:
        raise ValueError("separation needs at least two components")
    means = theta.means
    traces = np.trace(theta.covariances, axis1=1, axis2=2)
    best = math.inf
    for l, k in itertools.combinations(range(theta.k), 2):
        dist = float(np.linalg.norm(means[l] - means[k]))
        best = min(best, dist / math.sqrt(max(traces[l], traces[k])))
    return best


def eigenvalue_ratio(cov) -> float:
    """Largest over smallest covariance eigenvalue."""
    ev = np.linalg.eigvalsh(np.asarray(cov, dtype=np.float64))
    return float(ev[-1] / ev[0])


def eccentricity(cov) -> float:
    """Ratio of largest to smallest axis standard deviation."""
    return math.sqrt(eigenvalue_ratio(cov))


def _component_scales(spec: GeneratorSpec, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    if spec.size_mode == "constant":
        lam_min = np.ones(spec.k)
    else:
        lam_min = 2.0 ** np.arange(spec.k)
    if isinstance(spec.eccentricity, tuple):
        ecc = rng.uniform(*spec.eccentricity, size=spec.k)
    else:
        ecc = np.full(spec.k, float(spec.eccentricity))
    if spec.d == 1:
        ecc[:] = 1.0
    return lam_min, ecc


def generate_gmm(spec: GeneratorSpec, rng: np.random.Generator | None = None) -> GmmParams:
    """Draw a random mixture and rescale its means to the target separation.

    Everything except the final scale factor is independent of
    ``spec.separation``, so specs differing only there share covariances and
    mean directions.
    """
    if rng is None:
        rng = np.random.default_rng(spec.seed)
    side = spec.cube_side
    while True:
        means = rng.uniform(0.0, side, size=(spec.k, spec.d))
        if len(np.unique(means, axis=0)) == spec.k:
            break
    weights = weight_schedule(spec.k, spec.weight_exponent)
    lam_min, ecc = _component_scales(spec, rng)
    covs = [random_covariance(spec.d, lam_min[k], ecc[k], rng) for k in range(spec.k)]
    if spec.k >= 2:
        unscaled = GmmParams.from_arrays(weights, means, covs)
        means = means * (spec.separation / separation(unscaled))
    return GmmParams.from_arrays(weights, means, covs)


def sample_dataset(theta: GmmParams, spec: GeneratorSpec,
                   rng: np.random.Generator | None = None) -> LabeledDataset:
    """Draw signal points from ``theta`` and pad with uniform noise.

    Noise fills the bounding box of the signal points, stretched by 1.2 about
    its center along every axis.
    """
    if rng is None:
        rng = np.random.default_rng(spec.seed)
    n_signal = int(round((1.0 - spec.noise_fraction) * spec.n_points))
    if n_signal < 1:
        raise ValueError("noise fraction leaves no signal points")
    n_noise = spec.n_points - n_signal
    labels = rng.choice(theta.k, size=n_signal, p=theta.weights)
    z = rng.standard_normal((n_signal, theta.dim))
    chols = np.stack([c.chol for c in theta])
    signal = theta.means[labels] + np.einsum("nij,nj->ni", chols[labels], z)
    parts, all_labels = [signal], [labels]
    if n_noise:
        lo, hi = signal.min(axis=0), signal.max(axis=0)
        center, half = 0.5 * (lo + hi), 0.5 * NOISE_BOX_FACTOR * (hi - lo)
        parts.append(rng.uniform(center - half, center + half, size=(n_noise, theta.dim)))
        all_labels.append(np.full(n_noise, NOISE_LABEL))
    data = as_data_matrix(np.vstack(parts))
    return LabeledDataset(data, np.concatenate(all_labels).astype(np.int64), theta)


def generate_dataset(spec: GeneratorSpec) -> LabeledDataset:
    """Mixture plus sample from one stream seeded by ``spec.seed``."""
    rng = np.random.default_rng(spec.seed)
    theta = generate_gmm(spec, rng)
    return sample_dataset(theta, spec, rng)


# weight exponent used for the "different weights" rows
DIFFERENT_WEIGHT_EXPONENT = 0.5

# (name, different weights?, size mode, eccentricity values)
TABLE_ROWS: tuple[tuple[str, bool, str, tuple], ...] = (
    ("spherical", False, "constant", (1.0,)),
    ("spherical", True, "constant", (1.0,)),
    ("spherical", False, "different", (1.0,)),
    ("spherical", True, "different", (1.0,)),
    ("elliptical", False, "constant", (2.0, 5.0, 10.0)),
    ("elliptical-difficult", False, "different", (5.0,)),
    ("elliptical-difficult", True, "constant", (5.0,)),
    ("elliptical-difficult", False, "different", ((1.0, 10.0),)),
)

SEPARATIONS = (0.5, 1.0, 2.0)


def table_specs(k: int = 10, d: int = 2, n_points: int = 10_000, noise_fraction: float = 0.0,
                seed: int = 0) -> list[tuple[str, GeneratorSpec]]:
    """The full grid of test-set configurations: 8 rows, 30 cells with separations."""
    out = []
    for name, diff_w, size, eccs in TABLE_ROWS:
        for ecc in eccs:
            for sep in SEPARATIONS:
                spec = GeneratorSpec(
                    k=k, d=d, separation=sep,
                    weight_exponent=DIFFERENT_WEIGHT_EXPONENT if diff_w else 0.0,
                    eccentricity=ecc, size_mode=size, n_points=n_points,
                    noise_fraction=noise_fraction, seed=seed,
                )
                ecc_tag = f"{ecc[0]:g}-{ecc[1]:g}" if isinstance(ecc, tuple) else f"{ecc:g}"
                tag = (f"{name}_w{'diff' if diff_w else 'unif'}_{size}"
                       f"_e{ecc_tag}_sep{sep:g}")
                out.append((tag, spec))
    return out


def with_seed(spec: GeneratorSpec, seed: int) -> GeneratorSpec:
    return replace(spec, seed=seed)
