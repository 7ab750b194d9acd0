"""Steady-state output covariances, their sensitivities, and the Fisher matrix."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import LinearizationError, StructuralError
from .linalg import check_pd, inv_pd, solve_dlyap, symmetrize
from .model import ModelDeviation, StateSpaceModel, as_weights, check_deviation, compose

__all__ = [
    "OutputCovarianceBasis",
    "DetectabilityMatrix",
    "solve_dlyap",
    "nominal_output_cov",
    "deviation_state_cov",
    "deviation_output_cov",
    "output_covariance_basis",
    "approx_output_cov",
    "exact_output_cov",
    "fisher_matrix",
    "detectability",
]


@dataclass(frozen=True)
class OutputCovarianceBasis:
    """Nominal covariances plus one first-order sensitivity per deviation."""

    sigma_x_nom: np.ndarray
    sigma_y_nom: np.ndarray
    sigma_x_dev: tuple
    sigma_y_dev: tuple

    @property
    def size(self) -> int:
        return len(self.sigma_y_dev)


@dataclass(frozen=True)
class DetectabilityMatrix:
    """``lambda_ = D^{1/2} r D^{1/2}`` with ``d`` diagonal and ``r`` unit-diagonal."""

    lambda_: np.ndarray
    d: np.ndarray
    r: np.ndarray

    @property
    def size(self) -> int:
        return self.lambda_.shape[0]


def nominal_output_cov(model: StateSpaceModel):
    """Return ``(sigma_x, sigma_y)`` of the stationary plant."""
    sigma_x = solve_dlyap(model.A, model.Q)
    sigma_y = symmetrize(model.C @ sigma_x @ model.C.T + model.R)
    return sigma_x, sigma_y


def deviation_state_cov(model: StateSpaceModel, sigma_x_nom, dev: ModelDeviation) -> np.ndarray:
    """First-order change of the state covariance along ``dev``."""
    check_deviation(model, dev)
    A = model.A
    cross = dev.dA @ sigma_x_nom @ A.T
    forcing = symmetrize(cross + cross.T + dev.dQ)
    return solve_dlyap(A, forcing)


def deviation_output_cov(model: StateSpaceModel, sigma_x_nom, sigma_x_dev, dev: ModelDeviation):
    """First-order change of the output covariance along ``dev``."""
    check_deviation(model, dev)
    C = model.C
    if np.shape(sigma_x_dev) != (model.n, model.n):
        raise StructuralError(f"sigma_x_dev must be {model.n} x {model.n}")
    cross = C @ sigma_x_nom @ dev.dC.T
    return symmetrize(C @ sigma_x_dev @ C.T + cross + cross.T + dev.dR)


def output_covariance_basis(
    model: StateSpaceModel, basis: Sequence[ModelDeviation]
) -> OutputCovarianceBasis:
    sx, sy = nominal_output_cov(model)
    sx_dev, sy_dev = [], []
    for dev in basis:
        x = deviation_state_cov(model, sx, dev)
        sx_dev.append(x)
        sy_dev.append(deviation_output_cov(model, sx, x, dev))
    return OutputCovarianceBasis(sx, sy, tuple(sx_dev), tuple(sy_dev))


def approx_output_cov(basis_cov: OutputCovarianceBasis, w) -> np.ndarray:
    """Linearized output covariance at weights ``w``.

    Raises:
        LinearizationError: the result is not positive definite.
    """
    w = as_weights(w, basis_cov.size)
    sigma = basis_cov.sigma_y_nom.copy()
    for wi, s in zip(w, basis_cov.sigma_y_dev):
        if wi:
            sigma = sigma + wi * s
    sigma = symmetrize(sigma)
    lo = float(np.linalg.eigvalsh(sigma)[0])
    if lo <= 1e-12 * float(np.trace(sigma)):
        raise LinearizationError(
            f"weights outside linearization region: approximate covariance has min eig {lo:.3g}"
        )
    return sigma


def exact_output_cov(model: StateSpaceModel, basis=None, w=None) -> np.ndarray:
    """Output covariance with no linearization.

    With ``basis`` and ``w`` the model is composed first.
    """
    if basis is not None:
        model = compose(model, basis, w)
    return nominal_output_cov(model)[1]


def fisher_matrix(sigma_nom, sigma_devs) -> DetectabilityMatrix:
    """``Lambda_ij = tr(S^-1 S_i S^-1 S_j)`` and its correlation normalization."""
    sigma_nom = np.asarray(sigma_nom, dtype=float)
    check_pd(sigma_nom, "nominal output covariance")
    inv = inv_pd(sigma_nom, "nominal output covariance")
    # W_i = S^-1 S_i; Lambda_ij = sum(W_i * W_j^T)
    ws = [inv @ np.asarray(s, dtype=float) for s in sigma_devs]
    k = len(ws)
    lam = np.empty((k, k))
    for i in range(k):
        for j in range(i, k):
            lam[i, j] = lam[j, i] = float(np.sum(ws[i] * ws[j].T))
    diag = np.clip(np.diag(lam).copy(), 0.0, None)
    d = np.diag(diag)
    r = np.zeros((k, k))
    scale = np.sqrt(diag)
    live = scale > 0
    r[np.ix_(live, live)] = lam[np.ix_(live, live)] / np.outer(scale[live], scale[live])
    np.fill_diagonal(r, 1.0)
    return DetectabilityMatrix(lam, d, r)


def detectability(model: StateSpaceModel, basis: Sequence[ModelDeviation]) -> DetectabilityMatrix:
    """Fisher matrix of a plant's output distribution along ``basis``."""
    bc = output_covariance_basis(model, basis)
    return fisher_matrix(bc.sigma_y_nom, bc.sigma_y_dev)
