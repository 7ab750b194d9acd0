"""Reproducible simulation of stationary output trajectories.

Every trajectory draws from three independent PCG64 streams spawned from one
seed (initial state, process noise, measurement noise).  Noise is consumed
sequentially per stream, so results do not depend on the chunk size used
internally, and a Monte Carlo trial ``i`` under master seed ``s`` is exactly
``simulate_outputs(model, SimConfig(n_steps, seed=trial_seed(s, i)))``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import kernels
from .errors import DomainError, StructuralError
from .linalg import psd_factor, solve_dlyap
from .model import StateSpaceModel, spectral_radius

CHUNK = 4096


class InitMode(str, Enum):
    STEADY_STATE_DRAW = "steady_state_draw"
    ZERO_STATE_WITH_BURN_IN = "zero_state_with_burn_in"


@dataclass(frozen=True)
class SimConfig:
    n_steps: int
    seed: int = 0
    init_mode: InitMode = InitMode.STEADY_STATE_DRAW
    burn_in: int = 0

    def __post_init__(self):
        object.__setattr__(self, "init_mode", InitMode(self.init_mode))
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise DomainError(f"n_steps must be a positive integer, got {self.n_steps!r}")
        if self.burn_in < 0:
            raise DomainError("burn_in must be nonnegative")
        if not (0 <= int(self.seed) < 2**64):
            raise DomainError("seed must be a 64-bit unsigned integer")


@dataclass(frozen=True)
class Trajectory:
    y: np.ndarray
    seed_used: int
    model_digest: str

    @property
    def n_steps(self) -> int:
        return self.y.shape[0]

    @property
    def p(self) -> int:
        return self.y.shape[1]


def trial_seed(master_seed: int, trial_index: int) -> int:
    """Derive an independent 64-bit seed for one trial."""
    ss = np.random.SeedSequence([int(master_seed), int(trial_index)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


class _Streams:
    """Initial state and noise streams of one trajectory."""

    def __init__(self, model: StateSpaceModel, seed: int, sigma_x=None):
        init_ss, proc_ss, meas_ss = np.random.SeedSequence(int(seed)).spawn(3)
        self._init = np.random.Generator(np.random.PCG64(init_ss))
        self._proc = np.random.Generator(np.random.PCG64(proc_ss))
        self._meas = np.random.Generator(np.random.PCG64(meas_ss))
        self._fq = psd_factor(model.Q, "Q")
        self._fr = psd_factor(model.R, "R")
        self._sigma_x = sigma_x
        self.n, self.p = model.n, model.p

    def initial_state(self, mode: InitMode) -> np.ndarray:
        if mode is InitMode.ZERO_STATE_WITH_BURN_IN:
            return np.zeros(self.n)
        f = psd_factor(self._sigma_x, "steady-state covariance")
        return f @ self._init.standard_normal(self.n)

    def noise(self, k: int):
        w = self._proc.standard_normal((k, self.n)) @ self._fq.T
        v = self._meas.standard_normal((k, self.p)) @ self._fr.T
        return w, v


def _require_stable(model: StateSpaceModel) -> None:
    rho = spectral_radius(model.A)
    if rho >= 1.0:
        raise DomainError(f"cannot simulate an unstable model (spectral radius {rho:.6g})")


def start_batch(model: StateSpaceModel, seeds, cfg: SimConfig, backend=None):
    """Return ``(streams, x)`` for a batch of trajectories, burn-in already applied."""
    _require_stable(model)
    sigma_x = None
    if cfg.init_mode is InitMode.STEADY_STATE_DRAW:
        sigma_x = solve_dlyap(model.A, model.Q)
    streams = [_Streams(model, s, sigma_x) for s in seeds]
    x = np.array([s.initial_state(cfg.init_mode) for s in streams]).reshape(len(streams), model.n)
    if cfg.init_mode is InitMode.ZERO_STATE_WITH_BURN_IN:
        left = cfg.burn_in
        while left > 0:
            k = min(CHUNK, left)
            advance_batch(model, streams, x, k, backend)
            left -= k
    return streams, x


def advance_batch(model: StateSpaceModel, streams, x, k: int, backend=None) -> np.ndarray:
    """Advance every trajectory ``k`` steps; returns outputs (B x k x p)."""
    ws, vs = zip(*(s.noise(k) for s in streams))
    return kernels.propagate(model.A, model.C, x, np.stack(ws), np.stack(vs), backend)


def simulate_outputs(model: StateSpaceModel, cfg: SimConfig, backend=None) -> Trajectory:
    """Simulate ``cfg.n_steps`` outputs; identical inputs give identical bytes."""
    streams, x = start_batch(model, [cfg.seed], cfg, backend)
    out = np.empty((cfg.n_steps, model.p))
    done = 0
    while done < cfg.n_steps:
        k = min(CHUNK, cfg.n_steps - done)
        out[done:done + k] = advance_batch(model, streams, x, k, backend)[0]
        done += k
    out.setflags(write=False)
    return Trajectory(out, int(cfg.seed), model.digest())


def _as_y(traj) -> np.ndarray:
    y = traj.y if isinstance(traj, Trajectory) else np.asarray(traj, dtype=float)
    if y.ndim != 2:
        raise StructuralError(f"trajectory must be N x p, got {y.shape}")
    return y


def empirical_cov(traj) -> np.ndarray:
    """``(1/N) sum y_k y_k^T``; the outputs are zero-mean so there is no centering."""
    y = _as_y(traj)
    return y.T @ y / y.shape[0]


def empirical_autocorr(traj, lag: int) -> np.ndarray:
    """``E[y_{k+lag} y_k^T]`` estimated with divisor ``N - lag``."""
    y = _as_y(traj)
    n = y.shape[0]
    if lag < 0 or lag >= n:
        raise DomainError(f"lag must lie in [0, {n}), got {lag}")
    return y[lag:].T @ y[: n - lag] / (n - lag)


def write_trajectory_csv(traj: Trajectory, path) -> None:
    y = _as_y(traj)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["k"] + [f"y{i + 1}" for i in range(y.shape[1])])
        for k, row in enumerate(y, start=1):
            w.writerow([k] + [f"{v:.17g}" for v in row])


def read_trajectory_csv(path) -> np.ndarray:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return data[:, 1:]
