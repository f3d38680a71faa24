"""Fixed-step RK4 integration of ``(xdot, ydot)`` vector fields with observers."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Mapping, Optional

import numpy as np

from .errors import BlowUpError
from .mechanics import State

VectorField = Callable[[State], tuple]


@dataclass
class Trajectory:
    states: List[State]
    step: float
    observers: Dict[str, List[float]] = field(default_factory=dict)

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.states])

    @property
    def xs(self) -> np.ndarray:
        return np.array([s.x for s in self.states])

    @property
    def ys(self) -> np.ndarray:
        return np.array([s.y for s in self.states])

    def __len__(self):
        return len(self.states)


def _finite(*arrays) -> bool:
    return all(np.all(np.isfinite(a)) for a in arrays)


def rk4_step(vf: VectorField, s: State, h: float) -> State:
    """One classical Runge-Kutta step of size ``h`` (negative ``h`` runs backwards)."""
    x, y, t = s.x, s.y, s.t

    def stage(xs, ys, ts):
        dx, dy = vf(State(xs, ys, ts))
        dx = np.asarray(dx, dtype=float)
        dy = np.asarray(dy, dtype=float)
        if not _finite(dx, dy):
            raise BlowUpError(f"non-finite vector field near t={ts}", t=t)
        return dx, dy

    k1x, k1y = stage(x, y, t)
    k2x, k2y = stage(x + 0.5 * h * k1x, y + 0.5 * h * k1y, t + 0.5 * h)
    k3x, k3y = stage(x + 0.5 * h * k2x, y + 0.5 * h * k2y, t + 0.5 * h)
    k4x, k4y = stage(x + h * k3x, y + h * k3y, t + h)
    xn = x + (h / 6.0) * (k1x + 2 * k2x + 2 * k3x + k4x)
    yn = y + (h / 6.0) * (k1y + 2 * k2y + 2 * k3y + k4y)
    if not _finite(xn, yn):
        raise BlowUpError(f"integration blew up at t={t + h}", t=t + h)
    return State(xn, yn, t + h)


def n_steps(h: float, T: float) -> int:
    """``floor(T / h)``, robust to ``T`` being an exact multiple of ``h`` in decimal."""
    return int(math.floor(T / h + 1e-9))


def integrate(
    vf: VectorField,
    s0: State,
    h: float,
    T: float,
    observers: Optional[Mapping[str, Callable[[State], float]]] = None,
) -> Trajectory:
    """Integrate ``floor(T/h)`` RK4 steps from ``s0``, recording observers at every state.

    ``h`` may be negative for backward integration, with ``T`` the (positive)
    duration. ``T = 0`` returns the initial state alone.
    """
    if h == 0 or not np.isfinite(h):
        raise ValueError("step h must be finite and nonzero")
    if T < 0 or not np.isfinite(T):
        raise ValueError("horizon T must be finite and non-negative")
    observers = dict(observers or {})
    traj = Trajectory([s0], float(h), {name: [float(f(s0))] for name, f in observers.items()})
    s = s0
    steps = n_steps(abs(h), T)
    for k in range(steps):
        try:
            s = rk4_step(vf, s, h)
        except BlowUpError as exc:
            exc.trajectory = traj
            raise
        # uniform grid without accumulated rounding in t
        s = State(s.x, s.y, s0.t + (k + 1) * h)
        traj.states.append(s)
        for name, f in observers.items():
            traj.observers[name].append(float(f(s)))
    return traj


def drift_report(traj: Trajectory, invariants: Optional[Mapping[str, Callable[[State], float]]] = None) -> Dict[str, float]:
    """Max ``|value - value_0|`` per named quantity.

    With ``invariants`` given they are evaluated on the stored states;
    otherwise the trajectory's recorded observers are used.
    """
    out = {}
    if invariants is None:
        series = {name: np.asarray(vals) for name, vals in traj.observers.items()}
    else:
        series = {name: np.array([f(s) for s in traj.states]) for name, f in invariants.items()}
    for name, vals in series.items():
        out[name] = float(np.max(np.abs(vals - vals[0]))) if vals.size else 0.0
    return out


def negated(vf: VectorField) -> VectorField:
    """The field ``-vf``, for time-reversal checks."""
    def field_(s):
        dx, dy = vf(s)
        return -np.asarray(dx), -np.asarray(dy)
    return field_
