"""Predicted distribution of the cumulative LLR and derived error rates.

All log-likelihoods are in nats.  The cumulative LLR after ``N`` samples is
asymptotically normal with mean ``mu`` and variance ``sigma_sq``, both linear
in ``N``; its probability of being positive (``alpha`` favoured) is
``Phi(mu / sigma)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .covariance import DetectabilityMatrix
from .errors import DomainError, NumericalError, StructuralError
from .linalg import inv_pd, logdet_pd, sqrtm_psd, symmetrize
from .model import as_weights


@dataclass(frozen=True)
class LlrMoments:
    mu: float
    sigma_sq: float
    n_obs: int

    @property
    def z(self) -> float:
        """Standardized mean ``mu / sigma`` (signed infinity when degenerate)."""
        if self.sigma_sq > 0:
            return self.mu / math.sqrt(self.sigma_sq)
        if self.mu == 0:
            return 0.0
        return math.copysign(math.inf, self.mu)

    @property
    def rate(self) -> float:
        """Coefficient ``c`` such that ``mu / sigma = c * sqrt(N)``."""
        return self.z / math.sqrt(self.n_obs)

    def scaled(self, n_obs: int) -> "LlrMoments":
        """Moments at a different sample count (both scale linearly in N)."""
        f = n_obs / self.n_obs
        return LlrMoments(self.mu * f, self.sigma_sq * f, n_obs)


def norm_cdf(x):
    """Standard normal CDF via ``erfc``; vectorized over arrays."""
    if np.ndim(x) == 0:
        return 0.5 * math.erfc(-float(x) / math.sqrt(2.0))
    from scipy.special import erfc

    return 0.5 * erfc(-np.asarray(x, dtype=float) / math.sqrt(2.0))


def _check_n(n_obs) -> int:
    if int(n_obs) != n_obs or n_obs < 1:
        raise DomainError(f"n_obs must be a positive integer, got {n_obs!r}")
    return int(n_obs)


def exact_llr_moments(sigma_a, sigma_b, sigma_g, n_obs: int) -> LlrMoments:
    """Mean and variance of the cumulative LLR for i.i.d. ``y ~ N(0, sigma_g)``."""
    n_obs = _check_n(n_obs)
    inv_a = inv_pd(sigma_a, "sigma_alpha")
    inv_b = inv_pd(sigma_b, "sigma_beta")
    logdet_ratio = logdet_pd(sigma_b, "sigma_beta") - logdet_pd(sigma_a, "sigma_alpha")
    sigma_g = symmetrize(np.asarray(sigma_g, dtype=float))
    logdet_pd(sigma_g, "sigma_gamma")
    m = (inv_b - inv_a) @ sigma_g
    mu = 0.5 * n_obs * (logdet_ratio + float(np.trace(m)))
    sigma_sq = 0.5 * n_obs * float(np.sum(m * m.T))
    return LlrMoments(mu, max(sigma_sq, 0.0), n_obs)


def positive_probability(m: LlrMoments) -> float:
    """``P(LLR > 0) = Phi(mu / sigma)``; degenerate variance gives 0, 1/2 or 1."""
    if m.sigma_sq <= 0:
        return 0.5 if m.mu == 0 else (1.0 if m.mu > 0 else 0.0)
    return norm_cdf(m.z)


def _quad_terms(lam: DetectabilityMatrix | np.ndarray, alpha, beta, gamma):
    L = lam.lambda_ if isinstance(lam, DetectabilityMatrix) else np.asarray(lam, dtype=float)
    k = L.shape[0]
    a = as_weights(alpha, k, "alpha")
    b = as_weights(beta, k, "beta")
    g = as_weights(gamma, k, "gamma")
    diff = a - b
    return float((a + b - 2 * g) @ L @ diff), float(diff @ L @ diff), bool(np.any(diff))


def quadratic_llr_moments(lam, alpha, beta, gamma, n_obs: int) -> LlrMoments:
    """Second-order moments around the nominal covariance.

    ``mu = -(N/4) (a + b - 2g)^T L (a - b)`` and ``sigma^2 = (N/2) (a - b)^T L (a - b)``.

    Raises:
        NumericalError: ``(a - b)^T L (a - b) <= 0`` although ``a != b``.
    """
    n_obs = _check_n(n_obs)
    cross, quad, distinct = _quad_terms(lam, alpha, beta, gamma)
    if distinct and quad <= 0:
        raise NumericalError(
            f"detectability matrix is not positive along alpha - beta (quadratic form {quad:.3g})"
        )
    return LlrMoments(-0.25 * n_obs * cross, 0.5 * n_obs * quad if distinct else 0.0, n_obs)


def misclassification_probability(lam, alpha, beta, gamma, n_obs: int) -> float:
    """Probability that ``alpha`` is favoured over ``beta`` after ``n_obs`` samples."""
    return positive_probability(quadratic_llr_moments(lam, alpha, beta, gamma, n_obs))


def _check_lam(lam: float) -> float:
    if not (0.0 <= lam < 1.0):
        raise DomainError(f"correlation decay must lie in [0, 1), got {lam!r}")
    return float(lam)


def corr_variance_factor(lam: float) -> float:
    """Variance inflation ``(1 + lam^2) / (1 - lam^2)`` for geometrically correlated samples."""
    lam = _check_lam(lam)
    return (1.0 + lam * lam) / (1.0 - lam * lam)


def corrected_positive_probability(m: LlrMoments, lam_max: float) -> float:
    """``Phi(mu/sigma * sqrt((1 - lam^2)/(1 + lam^2)))``, i.e. variance inflated."""
    factor = corr_variance_factor(lam_max)
    if m.sigma_sq <= 0:
        return positive_probability(m)
    return norm_cdf(m.z / math.sqrt(factor))


def corrected_moments(m: LlrMoments, lam_max: float) -> LlrMoments:
    return LlrMoments(m.mu, m.sigma_sq * corr_variance_factor(lam_max), m.n_obs)


def f_matrix_eigvals(sigma_a, sigma_b, sigma_g) -> np.ndarray:
    """Eigenvalues (ascending) of ``G^{1/2} (Sb^-1 - Sa^-1) G^{1/2}``."""
    inv_a = inv_pd(sigma_a, "sigma_alpha")
    inv_b = inv_pd(sigma_b, "sigma_beta")
    root = sqrtm_psd(sigma_g)
    F = symmetrize(root @ (inv_b - inv_a) @ root)
    return np.linalg.eigvalsh(F)


def kl_divergence(sigma_a, sigma_b) -> float:
    """``KL(N(0, Sa) || N(0, Sb))`` in nats."""
    sigma_a = np.asarray(sigma_a, dtype=float)
    sigma_b = np.asarray(sigma_b, dtype=float)
    if sigma_a.shape != sigma_b.shape:
        raise StructuralError(f"shape mismatch {sigma_a.shape} vs {sigma_b.shape}")
    p = sigma_a.shape[0]
    inv_b = inv_pd(sigma_b, "sigma_b")
    val = 0.5 * (
        float(np.sum(inv_b * sigma_a.T)) - p + logdet_pd(sigma_b, "sigma_b") - logdet_pd(sigma_a, "sigma_a")
    )
    return max(val, 0.0)
