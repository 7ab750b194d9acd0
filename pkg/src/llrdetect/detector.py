"""Streaming cumulative LLR between two zero-mean Gaussian output hypotheses.

A positive total favours ``alpha`` (the anomalous hypothesis), anything else
selects ``beta`` (the near-nominal one); ties go to ``beta``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

from . import kernels
from .covariance import approx_output_cov, output_covariance_basis
from .errors import NotPositiveDefiniteError, StructuralError
from .linalg import inv_pd, logdet_pd, symmetrize
from .model import ModelDeviation, StateSpaceModel, as_weights


class Decision(str, Enum):
    ALPHA = "Alpha"
    BETA = "Beta"


@dataclass(frozen=True)
class HypothesisPair:
    sigma_a_inv: np.ndarray
    sigma_b_inv: np.ndarray
    log_det_ratio: float
    diff: np.ndarray

    @property
    def p(self) -> int:
        return self.diff.shape[0]

    def increments(self, y) -> np.ndarray:
        """Per-sample LLR terms for rows of ``y`` (N x p)."""
        y = np.atleast_2d(np.asarray(y, dtype=float))
        if y.shape[1] != self.p:
            raise StructuralError(f"samples must have {self.p} columns, got {y.shape[1]}")
        return 0.5 * (self.log_det_ratio + np.einsum("ki,ij,kj->k", y, self.diff, y))

    def swapped(self) -> "HypothesisPair":
        return HypothesisPair(self.sigma_b_inv, self.sigma_a_inv, -self.log_det_ratio, -self.diff)


def prepare_hypotheses(sigma_a, sigma_b) -> HypothesisPair:
    """Factor both hypothesis covariances once.

    Raises:
        NotPositiveDefiniteError: naming the hypothesis that failed.
    """
    sigma_a = symmetrize(np.asarray(sigma_a, dtype=float))
    sigma_b = symmetrize(np.asarray(sigma_b, dtype=float))
    if sigma_a.shape != sigma_b.shape or sigma_a.ndim != 2:
        raise StructuralError(f"hypothesis shapes differ: {sigma_a.shape} vs {sigma_b.shape}")
    inv_a = inv_pd(sigma_a, "hypothesis alpha covariance")
    inv_b = inv_pd(sigma_b, "hypothesis beta covariance")
    for name, s, inv in (("alpha", sigma_a, inv_a), ("beta", sigma_b, inv_b)):
        if np.max(np.abs(s @ inv - np.eye(s.shape[0]))) > 1e-9:
            raise NotPositiveDefiniteError(f"hypothesis {name} covariance is too ill-conditioned to invert")
    ldr = logdet_pd(sigma_b, "hypothesis beta covariance") - logdet_pd(sigma_a, "hypothesis alpha covariance")
    for arr in (inv_a, inv_b):
        arr.setflags(write=False)
    diff = symmetrize(inv_b - inv_a)
    diff.setflags(write=False)
    return HypothesisPair(inv_a, inv_b, float(ldr), diff)


@dataclass
class LlrAccumulator:
    """Running LLR for one trajectory (single writer).

    ``compensated=True`` switches to Neumaier summation, useful beyond ~1e7 samples.
    """

    pair: HypothesisPair
    compensated: bool = False
    total: float = 0.0
    n_obs: int = 0
    _comp: float = field(default=0.0, repr=False)

    def _add(self, inc: float) -> None:
        if not self.compensated:
            self.total += inc
            return
        t = self.total + inc
        if abs(self.total) >= abs(inc):
            self._comp += (self.total - t) + inc
        else:
            self._comp += (inc - t) + self.total
        self.total = t

    @property
    def value(self) -> float:
        return self.total + self._comp

    def update(self, y) -> "LlrAccumulator":
        y = np.asarray(y, dtype=float).reshape(-1)
        if y.shape[0] != self.pair.p:
            raise StructuralError(f"sample must have length {self.pair.p}, got {y.shape[0]}")
        self._add(0.5 * (self.pair.log_det_ratio + float(y @ (self.pair.diff @ y))))
        self.n_obs += 1
        return self

    def extend(self, ys) -> np.ndarray:
        """Feed rows of ``ys``; returns the running totals after each one."""
        incs = self.pair.increments(ys)
        path = np.empty(incs.shape[0])
        for i, inc in enumerate(incs):
            self._add(float(inc))
            path[i] = self.value
        self.n_obs += incs.shape[0]
        return path

    def merge(self, other: "LlrAccumulator") -> "LlrAccumulator":
        """Accumulator for the concatenation of both sample streams."""
        out = LlrAccumulator(self.pair, self.compensated)
        out._add(self.value)
        out._add(other.value)
        out.n_obs = self.n_obs + other.n_obs
        return out

    def decide(self) -> Decision:
        return decide(self)


def update(acc: LlrAccumulator, y) -> LlrAccumulator:
    return acc.update(y)


def decide(acc: LlrAccumulator) -> Decision:
    if acc.n_obs < 1:
        raise StructuralError("no observations accumulated yet")
    return Decision.ALPHA if acc.value > 0 else Decision.BETA


@dataclass(frozen=True)
class DetectionTrace:
    llr: np.ndarray
    decision: Decision
    pair: HypothesisPair
    sigma_alpha: np.ndarray
    sigma_beta: np.ndarray

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["k", "llr"])
            for k, v in enumerate(self.llr, start=1):
                w.writerow([k, f"{v:.17g}"])
            w.writerow(["decision", self.decision.value])


def hypothesis_covariances(nominal: StateSpaceModel, basis: Sequence[ModelDeviation], alpha, beta):
    """Linearized output covariances of both hypotheses."""
    alpha = as_weights(alpha, len(basis), "alpha")
    beta = as_weights(beta, len(basis), "beta")
    bc = output_covariance_basis(nominal, basis)
    return approx_output_cov(bc, alpha), approx_output_cov(bc, beta)


def detect_anomaly(
    nominal: StateSpaceModel,
    basis: Sequence[ModelDeviation],
    alpha,
    beta,
    traj,
    backend=None,
) -> DetectionTrace:
    """Run the full pipeline on one trajectory.

    Nominal covariances and sensitivities, linearized hypothesis covariances,
    then the cumulative LLR over every sample.
    """
    sigma_a, sigma_b = hypothesis_covariances(nominal, basis, alpha, beta)
    pair = prepare_hypotheses(sigma_a, sigma_b)
    y = traj.y if hasattr(traj, "y") else np.asarray(traj, dtype=float)
    if y.ndim != 2 or y.shape[1] != pair.p:
        raise StructuralError(f"trajectory must be N x {pair.p}, got {y.shape}")
    total = np.zeros(1)
    path = kernels.accumulate_llr(y[None], pair.diff, pair.log_det_ratio, total, backend)[0]
    if path.size and np.isnan(path[-1]):
        raise StructuralError("LLR path contains NaN")
    decision = Decision.ALPHA if path.size and path[-1] > 0 else Decision.BETA
    return DetectionTrace(path, decision, pair, sigma_a, sigma_b)
