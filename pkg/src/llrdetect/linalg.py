"""Small dense linear-algebra helpers: PD factorizations and Lyapunov solves."""

from __future__ import annotations

import numpy as np
import scipy.linalg as sla

from .errors import ConditioningError, DomainError, NotPositiveDefiniteError, StructuralError

PD_REL_TOL = 1e-12
KRON_MAX_N = 64
CLAMP_TOL = 1e-10


def symmetrize(m: np.ndarray) -> np.ndarray:
    return (m + m.T) / 2


def check_pd(m: np.ndarray, name: str = "matrix") -> None:
    """Raise unless min eig >= 1e-12 * trace (and trace > 0)."""
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise StructuralError(f"{name} must be square, got {m.shape}")
    tr = float(np.trace(m))
    lo = float(np.linalg.eigvalsh(symmetrize(m))[0])
    if not (tr > 0 and lo >= PD_REL_TOL * tr):
        raise NotPositiveDefiniteError(
            f"{name} is not positive definite (min eig {lo:.3g}, trace {tr:.3g})"
        )


def cholesky(m, name: str = "matrix") -> np.ndarray:
    """Lower Cholesky factor after the relative-eigenvalue PD check."""
    m = symmetrize(np.asarray(m, dtype=float))
    check_pd(m, name)
    try:
        return np.linalg.cholesky(m)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError(f"{name}: Cholesky factorization failed") from exc


def logdet_pd(m, name: str = "matrix") -> float:
    L = cholesky(m, name)
    return float(2.0 * np.sum(np.log(np.diag(L))))


def inv_pd(m, name: str = "matrix") -> np.ndarray:
    L = cholesky(m, name)
    inv = sla.cho_solve((L, True), np.eye(L.shape[0]))
    return symmetrize(inv)


def psd_factor(m, name: str = "covariance") -> np.ndarray:
    """Return F with F F^T = m, tolerating PSD-singular m.

    Uses a symmetric eigendecomposition; eigenvalues down to -1e-10 (relative
    to 1 + trace) are clamped to zero.
    """
    m = symmetrize(np.asarray(m, dtype=float))
    if m.size == 0:
        return m.copy()
    vals, vecs = np.linalg.eigh(m)
    tol = CLAMP_TOL * (1.0 + abs(float(np.trace(m))))
    if vals[0] < -tol:
        raise NotPositiveDefiniteError(f"{name} is not PSD (min eig {vals[0]:.3g})")
    return vecs * np.sqrt(np.clip(vals, 0.0, None))


def sqrtm_psd(m) -> np.ndarray:
    """Symmetric square root; eigenvalues within -1e-12 clamp to zero."""
    m = symmetrize(np.asarray(m, dtype=float))
    vals, vecs = np.linalg.eigh(m)
    if vals[0] < -1e-12 * max(1.0, abs(vals[-1])):
        raise NotPositiveDefiniteError(f"square root of an indefinite matrix (min eig {vals[0]:.3g})")
    return symmetrize((vecs * np.sqrt(np.clip(vals, 0.0, None))) @ vecs.T)


def solve_dlyap(A, M) -> np.ndarray:
    """Solve ``X = A X A^T + M`` for stable ``A``.

    Direct Kronecker solve of ``(I - A kron A) vec X = vec M`` up to n = 64,
    squared-Smith doubling above that. The result is symmetrized.

    Raises:
        DomainError: spectral radius of A is >= 1.
        ConditioningError: the Kronecker system is numerically singular.
    """
    A = np.asarray(A, dtype=float)
    M = np.asarray(M, dtype=float)
    n = A.shape[0]
    if A.shape != (n, n) or M.shape != (n, n):
        raise StructuralError(f"solve_dlyap shapes disagree: A {A.shape}, M {M.shape}")
    if np.max(np.abs(M - M.T), initial=0.0) > 1e-10 * (1.0 + np.max(np.abs(M), initial=0.0)):
        raise StructuralError("solve_dlyap forcing term must be symmetric")
    eig = np.abs(np.linalg.eigvals(A)) if n else np.zeros(0)
    rho = float(eig.max(initial=0.0))
    if rho >= 1.0:
        raise DomainError(f"Lyapunov equation needs a stable A (spectral radius {rho:.6g})")
    if n <= KRON_MAX_N:
        K = np.eye(n * n) - np.kron(A, A)
        try:
            lu, piv = sla.lu_factor(K, check_finite=False)
        except (ValueError, np.linalg.LinAlgError) as exc:
            raise ConditioningError("Lyapunov system is singular") from exc
        diag = np.abs(np.diag(lu))
        if diag.min(initial=1.0) <= 1e-14 * diag.max(initial=1.0):
            raise ConditioningError(
                f"Lyapunov system is numerically singular (spectral radius {rho:.12g})"
            )
        x = sla.lu_solve((lu, piv), M.reshape(-1), check_finite=False)
        X = x.reshape(n, n)
    else:
        X = _dlyap_doubling(A, M)
    return symmetrize(X)


def _dlyap_doubling(A, M, max_iter=100):
    X = M.copy()
    Ak = A.copy()
    for _ in range(max_iter):
        step = Ak @ X @ Ak.T
        X = X + step
        Ak = Ak @ Ak
        if np.max(np.abs(step)) <= 1e-16 * (1.0 + np.max(np.abs(X))):
            return X
    raise ConditioningError("Lyapunov doubling iteration did not converge")
