"""Random instances and independent reference computations for the tests."""

import numpy as np

from llrdetect.model import ModelDeviation, StateSpaceModel


def random_pd(rng, p, floor=0.2):
    B = rng.standard_normal((p, p))
    return B @ B.T / p + floor * np.eye(p)


def random_sym(rng, n, scale=1.0):
    B = rng.standard_normal((n, n)) * scale
    return (B + B.T) / 2


def random_stable(rng, n, rho=0.8):
    A = rng.standard_normal((n, n))
    return A * (rho / np.max(np.abs(np.linalg.eigvals(A))))


def random_model(rng, n=3, p=2, rho=0.8):
    return StateSpaceModel(random_stable(rng, n, rho), rng.standard_normal((p, n)), random_pd(rng, n), random_pd(rng, p))


def random_deviation(rng, model, scale=0.05, blocks="ACQR"):
    n, p = model.n, model.p
    kw = {}
    if "A" in blocks:
        kw["dA"] = scale * rng.standard_normal((n, n))
    if "C" in blocks:
        kw["dC"] = scale * rng.standard_normal((p, n))
    if "Q" in blocks:
        kw["dQ"] = random_sym(rng, n, scale)
    if "R" in blocks:
        kw["dR"] = random_sym(rng, p, scale)
    return ModelDeviation.for_model(model, **kw)


def dlyap_series(A, M, tol=1e-15, max_terms=100_000):
    """Sum of ``A^k M A^kT`` until the terms vanish."""
    X = np.zeros_like(M, dtype=float)
    term = np.array(M, dtype=float)
    for _ in range(max_terms):
        X += term
        if np.max(np.abs(term)) <= tol * max(1.0, np.max(np.abs(X))):
            return X
        term = A @ term @ A.T
    raise RuntimeError("series did not converge")


def output_cov_reference(model):
    """Output covariance from the series solution."""
    return model.C @ dlyap_series(model.A, model.Q) @ model.C.T + model.R
