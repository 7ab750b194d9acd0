"""Observer augmentation, steady-state Kalman gain, and detectability sweeps.

The augmented state is ``[x; xhat; v]`` where ``v`` carries the measurement
noise as a state, so the monitored output is the innovation
``C x - Chat xhat + v`` and the augmented measurement noise is zero.
"""

from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum

import numpy as np
import scipy.linalg as sla

from .covariance import detectability, nominal_output_cov
from .errors import NumericalError, StructuralError
from .linalg import symmetrize
from .model import ModelDeviation, StateSpaceModel, check_deviation, spectral_radius

STABILITY_MARGIN = 1e-9


class ObserverMode(str, Enum):
    LUENBERGER = "luenberger"
    LITERAL = "literal"


@dataclass(frozen=True)
class ObserverConfig:
    gain: np.ndarray
    c_hat: np.ndarray | None = None
    mode: ObserverMode = ObserverMode.LUENBERGER

    def __post_init__(self):
        object.__setattr__(self, "mode", ObserverMode(self.mode))
        object.__setattr__(self, "gain", np.atleast_2d(np.asarray(self.gain, dtype=float)))
        if self.c_hat is not None:
            object.__setattr__(self, "c_hat", np.atleast_2d(np.asarray(self.c_hat, dtype=float)))

    def resolved(self, plant: StateSpaceModel):
        n, p = plant.n, plant.p
        L = self.gain
        if L.shape == (p, n) and L.shape != (n, p):
            L = L.T
        if L.shape != (n, p):
            raise StructuralError(f"observer gain must be {n} x {p}, got {self.gain.shape}")
        c_hat = plant.C if self.c_hat is None else self.c_hat
        if c_hat.shape != (p, n):
            raise StructuralError(f"c_hat must be {p} x {n}, got {c_hat.shape}")
        return L, c_hat


def augment(plant: StateSpaceModel, obs: ObserverConfig) -> StateSpaceModel:
    """Plant plus observer with the innovation as output (dimension 2n + p)."""
    n, p = plant.n, plant.p
    L, c_hat = obs.resolved(plant)
    A = np.zeros((2 * n + p, 2 * n + p))
    A[:n, :n] = plant.A
    if obs.mode is ObserverMode.LUENBERGER:
        A[n:2 * n, :n] = L @ plant.C
        A[n:2 * n, n:2 * n] = plant.A - L @ c_hat
        A[n:2 * n, 2 * n:] = L
    else:
        A[n:2 * n, :n] = -L @ c_hat
        A[n:2 * n, n:2 * n] = L @ c_hat
        A[n:2 * n, 2 * n:] = np.eye(n, p)
    C = np.hstack([plant.C, -c_hat, np.eye(p)])
    Q = sla.block_diag(plant.Q, np.zeros((n, n)), plant.R)
    return StateSpaceModel(A, C, Q, np.zeros((p, p)), name=f"{plant.name}+observer".lstrip("+"))


def lift_deviation(plant: StateSpaceModel, obs: ObserverConfig, dev: ModelDeviation) -> ModelDeviation:
    """Map a plant deviation into augmented coordinates.

    Only the true plant moves; the observer keeps its nominal internal model.
    """
    check_deviation(plant, dev)
    n, p = plant.n, plant.p
    L, _ = obs.resolved(plant)
    m = 2 * n + p
    dA = np.zeros((m, m))
    dA[:n, :n] = dev.dA
    if obs.mode is ObserverMode.LUENBERGER:
        dA[n:2 * n, :n] = L @ dev.dC
    dC = np.zeros((p, m))
    dC[:, :n] = dev.dC
    dQ = sla.block_diag(dev.dQ, np.zeros((n, n)), dev.dR)
    return ModelDeviation(dA, dC, dQ, np.zeros((p, p)), name=dev.name)


def kalman_gain(plant: StateSpaceModel, tol: float = 1e-12, max_iter: int = 100_000, return_cov: bool = False):
    """Steady-state predictor gain ``L = A P C^T (C P C^T + R)^-1``.

    ``P`` (prior error covariance) comes from fixed-point iteration of the
    Riccati recursion starting at ``Q``.  This is the gain that minimizes the
    innovation covariance of the Luenberger-mode augmentation.
    """
    A, C, Q, R = plant.A, plant.C, plant.Q, plant.R
    P = Q.copy()
    for _ in range(max_iter):
        S = C @ P @ C.T + R
        try:
            cS = sla.cho_factor(symmetrize(S))
        except np.linalg.LinAlgError as exc:
            raise NumericalError("innovation covariance became singular in the Riccati recursion") from exc
        APC = A @ P @ C.T
        P_next = symmetrize(A @ P @ A.T + Q - APC @ sla.cho_solve(cS, APC.T))
        if np.max(np.abs(P_next - P)) <= tol * (1.0 + np.max(np.abs(P))):
            P = P_next
            break
        P = P_next
    else:
        raise NumericalError(f"Riccati recursion did not converge within {max_iter} iterations")
    S = symmetrize(C @ P @ C.T + R)
    gain = sla.solve(S, (A @ P @ C.T).T, assume_a="pos").T
    return (gain, P) if return_cov else gain


@dataclass(frozen=True)
class GainEvaluation:
    stable: bool
    spectral_radius: float
    trace_sigma_y: float | None
    lambda_scalar: float | None


def evaluate_gain(plant, deviation, gain, mode=ObserverMode.LUENBERGER, c_hat=None) -> GainEvaluation:
    """Innovation-covariance trace and detectability for one observer gain."""
    obs = ObserverConfig(gain, c_hat, mode)
    aug = augment(plant, obs)
    rho = spectral_radius(aug.A)
    if not rho <= 1.0 - STABILITY_MARGIN:
        return GainEvaluation(False, rho, None, None)
    sigma_y = nominal_output_cov(aug)[1]
    lam = detectability(aug, [lift_deviation(plant, obs, deviation)]).lambda_
    return GainEvaluation(True, rho, float(np.trace(sigma_y)), float(lam[0, 0]))


@dataclass(frozen=True)
class SweepTable:
    """Rows ordered with ``l1`` outer and ``l2`` inner; NaN where unstable."""

    l1: np.ndarray
    l2: np.ndarray
    stable: np.ndarray
    trace_sigma_y: np.ndarray
    lambda_scalar: np.ndarray
    shape: tuple

    def __len__(self):
        return self.l1.size

    def argmax_lambda(self) -> int:
        if not self.stable.any():
            raise ValueError("no stable rows in sweep")
        return int(np.nanargmax(np.where(self.stable, self.lambda_scalar, np.nan)))

    def argmin_trace(self) -> int:
        if not self.stable.any():
            raise ValueError("no stable rows in sweep")
        return int(np.nanargmin(np.where(self.stable, self.trace_sigma_y, np.nan)))

    def grid(self, values: np.ndarray) -> np.ndarray:
        return values.reshape(self.shape)

    HEADER = ("l1", "l2", "stable", "trace_sigma_y", "lambda")

    def rows(self):
        for a, b, s, t, lam in zip(self.l1, self.l2, self.stable, self.trace_sigma_y, self.lambda_scalar):
            if s:
                yield [f"{a:.17g}", f"{b:.17g}", "true", f"{t:.17g}", f"{lam:.17g}"]
            else:
                yield [f"{a:.17g}", f"{b:.17g}", "false", "", ""]

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self.HEADER)
            w.writerows(self.rows())


def gain_sweep(
    plant: StateSpaceModel,
    deviation: ModelDeviation,
    grid_l1,
    grid_l2,
    obs_mode=ObserverMode.LUENBERGER,
    c_hat=None,
    threads: int = 1,
) -> SweepTable:
    """Evaluate every gain ``[l1, l2]`` of a 2-state, 1-output plant."""
    if (plant.n, plant.p) != (2, 1):
        raise StructuralError("grid sweeps need n = 2, p = 1; use gain_list_sweep otherwise")
    g1 = np.asarray(grid_l1, dtype=float).reshape(-1)
    g2 = np.asarray(grid_l2, dtype=float).reshape(-1)
    L1, L2 = np.meshgrid(g1, g2, indexing="ij")
    gains = [np.array([[a], [b]]) for a, b in zip(L1.ravel(), L2.ravel())]
    evals = gain_list_sweep(plant, deviation, gains, obs_mode, c_hat, threads)
    return SweepTable(
        l1=L1.ravel(),
        l2=L2.ravel(),
        stable=np.array([e.stable for e in evals]),
        trace_sigma_y=np.array([np.nan if e.trace_sigma_y is None else e.trace_sigma_y for e in evals]),
        lambda_scalar=np.array([np.nan if e.lambda_scalar is None else e.lambda_scalar for e in evals]),
        shape=(g1.size, g2.size),
    )


def gain_list_sweep(plant, deviation, gains, obs_mode=ObserverMode.LUENBERGER, c_hat=None, threads: int = 1):
    """Evaluate an explicit list of gain matrices; order of results follows ``gains``."""
    job = lambda g: evaluate_gain(plant, deviation, g, obs_mode, c_hat)  # noqa: E731
    if threads <= 1:
        return [job(g) for g in gains]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(job, gains))
