"""EM for Gaussian mixtures with a fixed number of rounds.

Degenerate components are repaired in place rather than aborting the run:

* a component whose expected point count drops below ``min_effective_count``
  is replaced by a fresh one (mean drawn uniformly from the data, covariance
  from :func:`gmminit.init.rand_covar`);
* a re-estimated covariance that is not PD is blended with the previous one,
  ``(1 - beta) * new + beta * old`` for increasing ``beta``;
* if no blend is PD the previous covariance is kept.

Each repair is counted so callers can tell clean EM steps from patched ones.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .core import GaussianComponent, GmmParams, cholesky, normalized_weights, weighted_log_densities
from .init import data_covariance_trace, rand_covar

MIX_BETAS = (0.5, 0.75, 0.9)


@dataclass(frozen=True)
class EmConfig:
    rounds: int = 50
    # None means D + 1, resolved against the data at run time
    min_effective_count: float | None = None
    seed: int = 0

    def __post_init__(self):
        if self.rounds < 1:
            raise ValueError(f"rounds must be >= 1, got {self.rounds}")
        if self.min_effective_count is not None and not self.min_effective_count > 0:
            raise ValueError("min_effective_count must be positive")

    def threshold(self, d: int) -> float:
        return float(d + 1) if self.min_effective_count is None else float(self.min_effective_count)


@dataclass
class StepReport:
    log_likelihood: float  # of the parameters going into the step
    resamples: int = 0
    mixes: int = 0
    keeps: int = 0

    @property
    def clean(self) -> bool:
        return self.resamples == self.mixes == self.keeps == 0


@dataclass
class EmTrace:
    initial_log_likelihood: float
    log_likelihoods: list[float] = field(default_factory=list)
    resample_events: int = 0
    covariance_mix_events: int = 0
    covariance_keep_events: int = 0
    clean_rounds: list[bool] = field(default_factory=list)

    @property
    def rounds(self) -> int:
        return len(self.log_likelihoods)

    @property
    def degeneracy_events(self) -> int:
        return self.resample_events + self.covariance_mix_events + self.covariance_keep_events


def e_step(X: np.ndarray, theta: GmmParams) -> tuple[np.ndarray, float]:
    """Responsibilities (N, K) and the log-likelihood of ``theta``."""
    lp = weighted_log_densities(X, theta)
    lse = logsumexp(lp, axis=1)
    resp = np.exp(lp - lse[:, None])
    return resp, math.fsum(lse)


def m_step(X: np.ndarray, theta: GmmParams, resp: np.ndarray, cfg: EmConfig,
           rng: np.random.Generator, report: StepReport) -> GmmParams:
    n, d = X.shape
    K = theta.k
    threshold = cfg.threshold(d)
    nk = resp.sum(axis=0)
    raw_weights = nk / n
    means, covs = [], []
    trace_x = None
    for k, old in enumerate(theta):
        if nk[k] < threshold:
            if trace_x is None:
                trace_x = data_covariance_trace(X)
            means.append(X[rng.integers(n)].copy())
            covs.append(rand_covar(X, K, rng, trace_x=trace_x)[0])
            raw_weights[k] = 1.0 / K
            report.resamples += 1
            continue
        r = resp[:, k]
        mu = r @ X / nk[k]
        diff = X - mu
        cov = (diff * r[:, None]).T @ diff / nk[k]
        cov = 0.5 * (cov + cov.T)
        if cholesky(cov) is None:
            for beta in MIX_BETAS:
                blended = (1.0 - beta) * cov + beta * old.covariance
                if cholesky(blended) is not None:
                    cov = blended
                    report.mixes += 1
                    break
            else:
                cov = np.array(old.covariance)
                report.keeps += 1
        means.append(mu)
        covs.append(cov)
    weights = normalized_weights(raw_weights)
    return GmmParams(tuple(GaussianComponent(w, m, c) for w, m, c in zip(weights, means, covs)))


def em_step(X, theta: GmmParams, cfg: EmConfig,
            rng: np.random.Generator) -> tuple[GmmParams, StepReport]:
    """One E-step plus M-step. The report carries the log-likelihood of the input."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    resp, ll = e_step(X, theta)
    report = StepReport(ll)
    return m_step(X, theta, resp, cfg, rng, report), report


def em_run(X, theta0: GmmParams, cfg: EmConfig = EmConfig(),
           rng: np.random.Generator | None = None) -> tuple[GmmParams, EmTrace]:
    """Run ``cfg.rounds`` EM steps; the trace logs the likelihood after each step."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    theta = theta0
    resp, ll = e_step(X, theta)
    trace = EmTrace(initial_log_likelihood=ll)
    for _ in range(cfg.rounds):
        report = StepReport(ll)
        theta = m_step(X, theta, resp, cfg, rng, report)
        resp, ll = e_step(X, theta)
        trace.log_likelihoods.append(ll)
        trace.resample_events += report.resamples
        trace.covariance_mix_events += report.mixes
        trace.covariance_keep_events += report.keeps
        trace.clean_rounds.append(report.clean)
    return theta, trace
