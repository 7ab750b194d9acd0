"""Nominal plants, deviation directions and their composition.

A plant is the autonomous closed loop

    x[k+1] = A x[k] + w[k],   w ~ N(0, Q)
    y[k]   = C x[k] + v[k],   v ~ N(0, R)

and a deviation is an entrywise perturbation direction of ``(A, C, Q, R)``.
The actual plant is modelled as the nominal one plus a weighted sum of
deviations.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DeviationTooLargeError, NumericalError, StructuralError

SYM_TOL = 1e-10
PSD_TOL = 1e-10
COMPOSE_PSD_TOL = 1e-8


def _frozen(a, name, ndim=2) -> np.ndarray:
    arr = np.array(a, dtype=float, copy=True)
    if arr.ndim == 0 and ndim == 2:
        arr = arr.reshape(1, 1)
    if arr.ndim != ndim:
        raise StructuralError(f"{name} must be a {ndim}-D array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise StructuralError(f"{name} contains non-finite entries")
    arr.setflags(write=False)
    return arr


def _check_symmetric(m: np.ndarray, name: str) -> None:
    if m.shape[0] != m.shape[1]:
        raise StructuralError(f"{name} must be square, got {m.shape}")
    if m.size and np.max(np.abs(m - m.T)) > SYM_TOL:
        raise StructuralError(f"{name} is not symmetric (defect {np.max(np.abs(m - m.T)):.3g})")


def min_eig(m: np.ndarray) -> float:
    """Smallest eigenvalue of the symmetric part of ``m``."""
    if m.size == 0:
        return 0.0
    return float(np.linalg.eigvalsh((m + m.T) / 2)[0])


@dataclass(frozen=True)
class StateSpaceModel:
    """Immutable ``(A, C, Q, R)`` tuple with consistent dimensions."""

    A: np.ndarray
    C: np.ndarray
    Q: np.ndarray
    R: np.ndarray
    name: str = field(default="", compare=False)

    def __post_init__(self):
        A = _frozen(self.A, "A")
        C = _frozen(self.C, "C")
        Q = _frozen(self.Q, "Q")
        R = _frozen(self.R, "R")
        n = A.shape[0]
        if A.shape != (n, n) or n == 0:
            raise StructuralError(f"A must be square and non-empty, got {A.shape}")
        if C.ndim != 2 or C.shape[1] != n or C.shape[0] == 0:
            raise StructuralError(f"C must be p x {n}, got {C.shape}")
        p = C.shape[0]
        if Q.shape != (n, n):
            raise StructuralError(f"Q must be {n} x {n}, got {Q.shape}")
        if R.shape != (p, p):
            raise StructuralError(f"R must be {p} x {p}, got {R.shape}")
        _check_symmetric(Q, "Q")
        _check_symmetric(R, "R")
        for nm, m in (("Q", Q), ("R", R)):
            if min_eig(m) < -PSD_TOL * (1.0 + abs(np.trace(m))):
                raise StructuralError(f"{nm} is not positive semidefinite (min eig {min_eig(m):.3g})")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "R", R)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def p(self) -> int:
        return self.C.shape[0]

    def digest(self) -> str:
        """Short content hash identifying the matrices (not the name)."""
        h = hashlib.sha256()
        for m in (self.A, self.C, self.Q, self.R):
            h.update(np.asarray(m.shape, dtype=np.int64).tobytes())
            h.update(np.ascontiguousarray(m).tobytes())
        return h.hexdigest()[:16]

    def to_dict(self) -> dict:
        return {k: getattr(self, k).tolist() for k in ("A", "C", "Q", "R")}

    def __eq__(self, other):
        if not isinstance(other, StateSpaceModel):
            return NotImplemented
        return all(
            np.array_equal(getattr(self, k), getattr(other, k)) for k in ("A", "C", "Q", "R")
        )

    __hash__ = None


@dataclass(frozen=True)
class ModelDeviation:
    """One perturbation direction; missing blocks are zero.

    ``dQ`` and ``dR`` must be symmetric but may be indefinite.
    """

    dA: np.ndarray
    dC: np.ndarray
    dQ: np.ndarray
    dR: np.ndarray
    name: str = field(default="", compare=False)

    def __post_init__(self):
        for k in ("dA", "dC", "dQ", "dR"):
            object.__setattr__(self, k, _frozen(getattr(self, k), k))
        _check_symmetric(self.dQ, "dQ")
        _check_symmetric(self.dR, "dR")

    @classmethod
    def zeros_like(cls, model: StateSpaceModel, name: str = "") -> "ModelDeviation":
        n, p = model.n, model.p
        return cls(np.zeros((n, n)), np.zeros((p, n)), np.zeros((n, n)), np.zeros((p, p)), name)

    @classmethod
    def for_model(cls, model: StateSpaceModel, dA=None, dC=None, dQ=None, dR=None, name=""):
        """Build a deviation shaped like ``model`` from the non-zero blocks given."""
        n, p = model.n, model.p
        dev = cls(
            np.zeros((n, n)) if dA is None else dA,
            np.zeros((p, n)) if dC is None else dC,
            np.zeros((n, n)) if dQ is None else dQ,
            np.zeros((p, p)) if dR is None else dR,
            name,
        )
        check_deviation(model, dev)
        return dev

    def is_zero(self) -> bool:
        return not any(np.any(getattr(self, k)) for k in ("dA", "dC", "dQ", "dR"))

    def to_dict(self) -> dict:
        return {k: getattr(self, k).tolist() for k in ("dA", "dC", "dQ", "dR")}


def check_deviation(model: StateSpaceModel, dev: ModelDeviation, index=None) -> None:
    n, p = model.n, model.p
    label = "deviation" if index is None else f"deviation {index}"
    for k, shape in (("dA", (n, n)), ("dC", (p, n)), ("dQ", (n, n)), ("dR", (p, p))):
        got = getattr(dev, k).shape
        if got != shape:
            raise StructuralError(f"{label}: {k} must have shape {shape}, got {got}")


def as_weights(w, size: int, name: str = "weights") -> np.ndarray:
    """Validate a weight vector against the basis size."""
    arr = np.atleast_1d(np.asarray(w, dtype=float))
    if arr.ndim != 1 or arr.shape[0] != size:
        raise StructuralError(f"{name} must have length {size}, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise StructuralError(f"{name} contains non-finite entries")
    return arr


def compose(
    nominal: StateSpaceModel, basis: Sequence[ModelDeviation], w
) -> StateSpaceModel:
    """Return ``nominal + sum_i w_i * basis[i]`` blockwise.

    Raises:
        StructuralError: basis/weight length or block shapes disagree.
        DeviationTooLargeError: the composed Q or R has an eigenvalue below -1e-8.
    """
    w = as_weights(w, len(basis))
    for i, dev in enumerate(basis):
        check_deviation(nominal, dev, i)
    if not np.any(w):
        return nominal
    blocks = {}
    for k in ("A", "C", "Q", "R"):
        m = getattr(nominal, k).copy()
        for wi, dev in zip(w, basis):
            if wi:
                m += wi * getattr(dev, "d" + k)
        blocks[k] = m
    for k in ("Q", "R"):
        m = (blocks[k] + blocks[k].T) / 2
        lo = min_eig(m)
        if lo < -COMPOSE_PSD_TOL:
            raise DeviationTooLargeError(
                f"deviation too large: composed {k} has minimum eigenvalue {lo:.3g}"
            )
        blocks[k] = m
    try:
        return StateSpaceModel(name=nominal.name, **blocks)
    except StructuralError as exc:
        raise DeviationTooLargeError(f"deviation too large: {exc}") from exc


def spectral_radius(A) -> float:
    """Largest eigenvalue magnitude of a square matrix."""
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise StructuralError(f"spectral radius needs a square matrix, got {A.shape}")
    if A.size == 0:
        return 0.0
    try:
        eig = np.linalg.eigvals(A)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigenvalue iteration failed for {A.shape} matrix: {exc}") from exc
    return float(np.max(np.abs(eig)))


@dataclass(frozen=True)
class ValidationReport:
    spectral_radius: float
    stable: bool
    q_symmetry_defect: float
    r_symmetry_defect: float
    q_min_eig: float
    r_min_eig: float

    @property
    def ok(self) -> bool:
        return self.stable and self.noise_ok

    @property
    def noise_ok(self) -> bool:
        return (
            self.q_symmetry_defect <= SYM_TOL
            and self.r_symmetry_defect <= SYM_TOL
            and self.q_min_eig >= -PSD_TOL
            and self.r_min_eig >= -PSD_TOL
        )

    def lines(self) -> list[str]:
        flag = "ok" if self.stable else "UNSTABLE"
        return [
            f"spectral_radius = {self.spectral_radius:.6g} ({flag})",
            f"Q symmetry defect = {self.q_symmetry_defect:.3g}, min eig = {self.q_min_eig:.6g}",
            f"R symmetry defect = {self.r_symmetry_defect:.3g}, min eig = {self.r_min_eig:.6g}",
        ]


def validate(model: StateSpaceModel) -> ValidationReport:
    """Check stability and noise-covariance structure without raising."""
    rho = spectral_radius(model.A)
    return ValidationReport(
        spectral_radius=rho,
        stable=rho < 1.0,
        q_symmetry_defect=float(np.max(np.abs(model.Q - model.Q.T))),
        r_symmetry_defect=float(np.max(np.abs(model.R - model.R.T))),
        q_min_eig=min_eig(model.Q),
        r_min_eig=min_eig(model.R),
    )
