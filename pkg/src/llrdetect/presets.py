"""Built-in plants: stabilized inverted double pendulum and PI-controlled friction system."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import ModelDeviation, StateSpaceModel


@dataclass(frozen=True)
class Preset:
    model: StateSpaceModel
    basis: tuple
    notes: str = ""
    defaults: dict = field(default_factory=dict)


# double pendulum: masses (kg), joint friction (N m s), gravity, arm lengths (m), sample time (s)
PENDULUM_PARAMS = dict(m1=1.0, m2=1.2, d1=0.3, d2=0.3, g=9.8, l1=0.5, l2=0.2, ts=0.2)
PENDULUM_GAIN = np.array([[33.04, 6.76, 1.33, 0.99], [4.72, 1.52, 3.54, 0.2]])


def pendulum_open_loop(m1, m2, d1, d2, g, l1, l2, ts):
    """Forward-Euler linearization around upright; state (th1, dth1, th2, dth2)."""
    mt = m1 + m2
    A = np.array(
        [
            [1.0, ts, 0.0, 0.0],
            [ts * mt * g / (m1 * l1), 1 - ts * d1 / (m1 * l1**2), -ts * m2 * g / (m1 * l1), ts * d2 / (m1 * l1 * l2)],
            [0.0, 0.0, 1.0, ts],
            [-ts * mt * g / (m1 * l2), ts * d1 / (m1 * l1 * l2), ts * mt * g / (m1 * l2), 1 - ts * mt * d2 / (m1 * m2 * l2**2)],
        ]
    )
    B = ts * np.array(
        [
            [0.0, 0.0],
            [1 / (m1 * l1**2), -1 / (m1 * l1 * l2)],
            [0.0, 0.0],
            [-1 / (m1 * l1 * l2), mt / (m1 * m2 * l2**2)],
        ]
    )
    return A, B


def pendulum_friction_derivatives(m1, m2, d1, d2, g, l1, l2, ts):
    """Exact partial derivatives of the open-loop A w.r.t. d1 and d2 (A is affine in both)."""
    mt = m1 + m2
    dA1 = np.zeros((4, 4))
    dA1[1, 1] = -ts / (m1 * l1**2)
    dA1[3, 1] = ts / (m1 * l1 * l2)
    dA2 = np.zeros((4, 4))
    dA2[1, 3] = ts / (m1 * l1 * l2)
    dA2[3, 3] = -ts * mt / (m1 * m2 * l2**2)
    return dA1, dA2


def pendulum() -> Preset:
    A_o, B = pendulum_open_loop(**PENDULUM_PARAMS)
    model = StateSpaceModel(
        A=A_o - B @ PENDULUM_GAIN,
        C=np.array([[1.0, 0, 0, 0], [0, 0, 1.0, 0]]),
        Q=np.diag([0.0, 0.5, 0.0, 0.6]),
        R=0.1 * np.eye(2),
        name="pendulum",
    )
    dA1, dA2 = pendulum_friction_derivatives(**PENDULUM_PARAMS)
    basis = (
        ModelDeviation.for_model(model, dA=dA1, name="friction joint 1"),
        ModelDeviation.for_model(model, dA=dA2, name="friction joint 2"),
        ModelDeviation.for_model(model, dQ=np.diag([0.0, 0.5, 0.0, 0.0]), name="torque noise joint 1"),
    )
    return Preset(
        model,
        basis,
        notes="closed loop A_o - B K with K as printed (2 decimals)",
        defaults=dict(gamma=[0.03, 0.0, 0.01], alpha=[0.0, 0.0, 0.0], beta=[0.04, 0.0, 0.0],
                      trials=2000, steps=50000, lam_max=0.6),
    )


FRICTION_PARAMS = dict(ts=0.2, fv=2.0, kp=5.0, ki=2.5)


def friction_A(ts, fv, kp, ki, literal=False):
    """Closed-loop friction system; ``literal`` drops the ``1 +`` of the Euler step."""
    a11 = ts * (-fv - kp) if literal else 1.0 + ts * (-fv - kp)
    return np.array([[a11, -ts * ki], [ts, 1.0]])


def friction(literal: bool = False) -> Preset:
    ts = FRICTION_PARAMS["ts"]
    model = StateSpaceModel(
        A=friction_A(**FRICTION_PARAMS, literal=literal),
        C=np.array([[1.0, 0.0]]),
        Q=np.array([[0.1, 0.0], [0.0, 0.0]]),
        R=np.array([[0.5]]),
        name="friction-literal" if literal else "friction",
    )
    dev = ModelDeviation.for_model(model, dA=np.array([[-ts, 0.0], [0.0, 0.0]]), name="viscous friction")
    note = (
        "A[0,0] as printed, Ts(-fv-Kp) = -1.4: unstable (spectral radius ~1.36)"
        if literal
        else "A[0,0] = 1 + Ts(-fv-Kp) = -0.4 (forward Euler); the printed -1.4 is unstable"
    )
    return Preset(
        model,
        (dev,),
        notes=note,
        defaults=dict(gamma=[0.5], alpha=[0.0], beta=[0.5], trials=2000, steps=20000,
                      reference_gain=[0.35, 0.05]),
    )


PRESETS = {
    "pendulum": pendulum,
    "friction": lambda: friction(False),
    "friction-literal": lambda: friction(True),
}


def get_preset(name: str) -> Preset:
    try:
        return PRESETS[name]()
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
