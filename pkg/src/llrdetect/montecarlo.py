"""Empirical error-rate curves over many simulated trajectories."""

from __future__ import annotations

import csv
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import kernels
from .covariance import nominal_output_cov
from .detector import hypothesis_covariances, prepare_hypotheses
from .errors import DomainError
from .model import ModelDeviation, StateSpaceModel, spectral_radius
from .simulate import CHUNK, SimConfig, advance_batch, start_batch, trial_seed
from .theory import (
    corrected_positive_probability,
    exact_llr_moments,
    positive_probability,
)

THREADS_ENV = "LLRDETECT_THREADS"


def default_threads() -> int:
    env = os.environ.get(THREADS_ENV)
    if env:
        return max(1, int(env))
    return max(1, min(8, os.cpu_count() or 1))


def default_checkpoints(n_steps: int, count: int = 50) -> np.ndarray:
    """Up to ``count`` log-spaced distinct integers in ``[10, n_steps]``."""
    lo = min(10, n_steps)
    pts = np.unique(np.round(np.geomspace(lo, n_steps, count)).astype(np.int64))
    pts[-1] = n_steps
    return pts


@dataclass(frozen=True)
class ErrorRateCurve:
    checkpoints: np.ndarray
    empirical: np.ndarray
    theoretical: np.ndarray
    corrected: np.ndarray
    n_trials: int
    lam_max: float
    rate: float
    sample_paths: np.ndarray = field(default=None, repr=False)

    @property
    def stderr(self) -> np.ndarray:
        p = self.empirical
        return np.sqrt(p * (1 - p) / self.n_trials)

    def band(self):
        """Elementwise ``(lower, upper)`` between the theoretical and corrected curves."""
        return np.minimum(self.corrected, self.theoretical), np.maximum(self.corrected, self.theoretical)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["k", "empirical", "stderr", "theoretical", "corrected"])
            for row in zip(self.checkpoints, self.empirical, self.stderr, self.theoretical, self.corrected):
                w.writerow([int(row[0])] + [f"{v:.17g}" for v in row[1:]])

    def write_paths_csv(self, path) -> None:
        if self.sample_paths is None:
            raise ValueError("curve was computed without sample paths")
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["k"] + [f"trial{i}" for i in range(self.sample_paths.shape[0])])
            for j, k in enumerate(self.checkpoints):
                w.writerow([int(k)] + [f"{v:.17g}" for v in self.sample_paths[:, j]])


def theoretical_curves(sigma_a, sigma_b, sigma_g, checkpoints, lam_max):
    """Uncorrected and correlation-corrected ``P(LLR > 0)`` at each checkpoint."""
    base = exact_llr_moments(sigma_a, sigma_b, sigma_g, 1)
    theo = np.array([positive_probability(base.scaled(int(k))) for k in checkpoints])
    corr = np.array([corrected_positive_probability(base.scaled(int(k)), lam_max) for k in checkpoints])
    return base, theo, corr


def _run_batch(truth, pair, trials, cfg, checkpoints, master_seed, keep, backend):
    seeds = [trial_seed(master_seed, i) for i in trials]
    streams, x = start_batch(truth, seeds, cfg, backend)
    total = np.zeros(len(trials))
    counts = np.zeros(len(checkpoints), dtype=np.int64)
    keep_rows = [j for j, i in enumerate(trials) if i < keep]
    kept = np.zeros((len(keep_rows), len(checkpoints)))
    done = 0
    ci = 0
    while done < cfg.n_steps:
        k = min(CHUNK, cfg.n_steps - done)
        y = advance_batch(truth, streams, x, k, backend)
        path = kernels.accumulate_llr(y, pair.diff, pair.log_det_ratio, total, backend)
        while ci < len(checkpoints) and checkpoints[ci] <= done + k:
            col = path[:, checkpoints[ci] - done - 1]
            counts[ci] = int(np.count_nonzero(col > 0))
            if keep_rows:
                kept[:, ci] = col[keep_rows]
            ci += 1
        done += k
    return counts, [trials[j] for j in keep_rows], kept


def error_rate_curve(
    truth: StateSpaceModel,
    nominal: StateSpaceModel,
    basis: Sequence[ModelDeviation],
    alpha,
    beta,
    n_trials: int,
    n_steps: int,
    checkpoints=None,
    master_seed: int = 0,
    *,
    lam_max: float | None = None,
    keep_paths: int = 0,
    threads: int | None = None,
    batch_size: int = 50,
    backend=None,
) -> ErrorRateCurve:
    """Fraction of trajectories of ``truth`` with positive LLR at each checkpoint.

    Hypothesis covariances come from ``nominal`` and ``basis`` (linearized);
    the theoretical curves use the exact steady-state covariance of ``truth``
    and, for the correction, ``lam_max`` (default: spectral radius of
    ``truth.A``).  Deterministic in ``master_seed`` regardless of ``threads``.
    """
    if n_trials < 1:
        raise DomainError("n_trials must be >= 1")
    cfg = SimConfig(n_steps=n_steps, seed=0)
    cps = default_checkpoints(n_steps) if checkpoints is None else np.asarray(checkpoints, dtype=np.int64)
    if cps.ndim != 1 or cps.size == 0 or np.any(np.diff(cps) <= 0) or cps[0] < 1 or cps[-1] > n_steps:
        raise DomainError("checkpoints must be strictly increasing integers within [1, n_steps]")
    sigma_a, sigma_b = hypothesis_covariances(nominal, basis, alpha, beta)
    pair = prepare_hypotheses(sigma_a, sigma_b)
    sigma_g = nominal_output_cov(truth)[1]
    if lam_max is None:
        lam_max = spectral_radius(truth.A)
    base, theo, corr = theoretical_curves(sigma_a, sigma_b, sigma_g, cps, lam_max)

    batches = [list(range(i, min(i + batch_size, n_trials))) for i in range(0, n_trials, batch_size)]
    threads = default_threads() if threads is None else max(1, threads)
    job = lambda trials: _run_batch(truth, pair, trials, cfg, cps, master_seed, keep_paths, backend)  # noqa: E731
    if threads == 1 or len(batches) == 1:
        results = [job(b) for b in batches]
    else:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            results = list(ex.map(job, batches))

    counts = np.sum([r[0] for r in results], axis=0)
    paths = None
    if keep_paths:
        rows = {i: row for r in results for i, row in zip(r[1], r[2])}
        paths = np.array([rows[i] for i in sorted(rows)])
    return ErrorRateCurve(
        checkpoints=cps,
        empirical=counts / n_trials,
        theoretical=theo,
        corrected=corr,
        n_trials=n_trials,
        lam_max=float(lam_max),
        rate=base.rate,
        sample_paths=paths,
    )
