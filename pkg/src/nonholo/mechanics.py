"""Mechanical Lagrangians and unconstrained Euler-Lagrange dynamics on algebroids.

For ``L(x, y) = 1/2 y^T G(x) y - V(x)`` the Euler-Lagrange equations on an
algebroid read::

    dx^i/dt = rho^i_c y^c
    d/dt (G y)_b = C^c_ab y^a (G y)_c + sigma^i_b dL/dx^i

The second line is implicit in ``dy/dt``; it is resolved by expanding the
time derivative of ``G(x) y`` and solving with a Cholesky factorization.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve

from .algebroid import Algebroid, FiberFunction, eval_structure
from .errors import DimensionError, NonFiniteStateError, SingularMetricError
from .smooth import SmoothMap, as_point

SPD_PIVOT_TOL = 1e-12
SYMMETRY_TOL = 1e-12


@dataclass(frozen=True)
class State:
    """A point ``(x, y)`` of the bundle at time ``t``."""

    x: np.ndarray
    y: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "x", np.asarray(self.x, dtype=float).reshape(-1))
        object.__setattr__(self, "y", np.asarray(self.y, dtype=float).reshape(-1))
        object.__setattr__(self, "t", float(self.t))

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.x)) and np.all(np.isfinite(self.y)) and np.isfinite(self.t))


@dataclass(frozen=True)
class PhasePoint:
    """Image of the Tulczyjew differential: ``(x, xi, xdot, xidot)``."""

    x: np.ndarray
    xi: np.ndarray
    xdot: np.ndarray
    xidot: np.ndarray


def cholesky_spd(G: np.ndarray):
    """Lower Cholesky factor of ``G``; raises if ``G`` is not SPD.

    A pivot ``L_ii**2`` below ``1e-12 * max(diag(G))`` counts as singular.
    """
    G = np.asarray(G, dtype=float)
    if G.ndim != 2 or G.shape[0] != G.shape[1]:
        raise DimensionError(f"metric must be square, got {G.shape}")
    if G.size == 0:
        return G.copy()
    scale = max(float(np.max(np.abs(np.diag(G)))), np.finfo(float).tiny)
    if np.max(np.abs(G - G.T)) > SYMMETRY_TOL * max(1.0, scale):
        raise SingularMetricError("metric is not symmetric")
    try:
        factor = np.linalg.cholesky(G)
    except np.linalg.LinAlgError as exc:
        raise SingularMetricError("metric is not positive definite") from exc
    if np.min(np.diag(factor)) ** 2 < SPD_PIVOT_TOL * scale:
        raise SingularMetricError("metric is numerically singular")
    return factor


def spd_solve(G, rhs) -> np.ndarray:
    factor = cholesky_spd(G)
    if factor.size == 0:
        return np.zeros_like(np.asarray(rhs, dtype=float))
    return cho_solve((factor, True), rhs)


class MechanicalLagrangian:
    """``L(x, y) = 1/2 y^T G(x) y - V(x)`` with ``G`` SPD.

    Parameters
    ----------
    metric : SmoothMap
        ``x -> (m, m)`` symmetric positive-definite matrix.
    potential : SmoothMap, optional
        ``x -> ()`` scalar; zero when omitted.
    """

    def __init__(self, metric: SmoothMap, potential: SmoothMap | None = None):
        n = metric.domain_dim
        if len(metric.shape) != 2 or metric.shape[0] != metric.shape[1]:
            raise DimensionError(f"metric must be square matrix valued, got {metric.shape}")
        if potential is None:
            potential = SmoothMap.constant(0.0, n)
        if potential.domain_dim != n or potential.shape != ():
            raise DimensionError("potential must be a scalar map on the same base as the metric")
        self.metric = metric
        self.potential = potential

    @property
    def base_dim(self) -> int:
        return self.metric.domain_dim

    @property
    def rank(self) -> int:
        return self.metric.shape[0]

    def __repr__(self):
        return f"MechanicalLagrangian(base_dim={self.base_dim}, rank={self.rank})"

    def G(self, x) -> np.ndarray:
        return self.metric.value(x)

    def V(self, x) -> float:
        return float(self.potential.value(x))

    def __call__(self, x, y) -> float:
        y = np.asarray(y, dtype=float)
        return 0.5 * float(y @ self.G(x) @ y) - self.V(x)

    def dG(self, x) -> np.ndarray:
        """Metric partials, shape ``(n, m, m)``."""
        return self.metric.jacobian(x)

    def dV(self, x) -> np.ndarray:
        return self.potential.jacobian(x).reshape(self.base_dim)

    def dL_dx(self, x, y) -> np.ndarray:
        """``dL/dx^i = 1/2 y^T dG/dx^i y - dV/dx^i``."""
        y = np.asarray(y, dtype=float)
        if self.base_dim == 0:
            return np.zeros(0)
        return 0.5 * np.einsum("iab,a,b->i", self.dG(x), y, y) - self.dV(x)

    def as_fiber_function(self) -> FiberFunction:
        def grad(x, y):
            return self.dL_dx(x, y), self.G(x) @ y

        return FiberFunction(self, self.base_dim, self.rank, gradient=grad)


def _unpack(A: Algebroid | None, L: MechanicalLagrangian, s: State):
    if not isinstance(s, State):
        raise TypeError("expected a State")
    if not s.is_finite():
        raise NonFiniteStateError(f"non-finite state at t={s.t}")
    x = as_point(s.x, L.base_dim)
    y = as_point(s.y, L.rank)
    if A is not None and (A.base_dim != L.base_dim or A.rank != L.rank):
        raise DimensionError(
            f"Lagrangian (n={L.base_dim}, m={L.rank}) does not match algebroid (n={A.base_dim}, m={A.rank})"
        )
    return x, y


def legendre(L: MechanicalLagrangian, s: State) -> np.ndarray:
    """Fiber derivative ``xi = G(x) y``."""
    x, y = _unpack(None, L, s)
    G = L.G(x)
    cholesky_spd(G)
    return G @ y


def tulczyjew_differential(A: Algebroid, L: MechanicalLagrangian, s: State) -> PhasePoint:
    """``(x, dL/dy, rho y, C^c_ab y^a dL/dy^c + sigma^i_b dL/dx^i)``."""
    x, y = _unpack(A, L, s)
    rho, sigma, C = eval_structure(A, x)
    xi = legendre(L, s)
    xidot = np.einsum("cab,a,c->b", C, y, xi)
    if A.base_dim:
        xidot = xidot + sigma.T @ L.dL_dx(x, y)
    return PhasePoint(x, xi, rho @ y, xidot)


def el_vector_field(A: Algebroid, L: MechanicalLagrangian, s: State):
    """Explicit Euler-Lagrange field ``(xdot, ydot)`` at ``s``."""
    x, y = _unpack(A, L, s)
    rho, sigma, C = eval_structure(A, x)
    G = L.G(x)
    xi = G @ y
    rhs = np.einsum("cab,a,c->b", C, y, xi)
    xdot = rho @ y
    if A.base_dim:
        dG = L.dG(x)
        dLdx = 0.5 * np.einsum("iab,a,b->i", dG, y, y) - L.dV(x)
        rhs = rhs + sigma.T @ dLdx - np.einsum("i,iab,b->a", xdot, dG, y)
    return xdot, spd_solve(G, rhs)


def el_field(A: Algebroid, L: MechanicalLagrangian):
    """``el_vector_field`` bound to ``(A, L)`` for use with the integrator."""
    return lambda s: el_vector_field(A, L, s)


def energy(L: MechanicalLagrangian, s: State) -> float:
    """``1/2 y^T G(x) y + V(x)``."""
    x, y = _unpack(None, L, s)
    return 0.5 * float(y @ L.G(x) @ y) + L.V(x)
