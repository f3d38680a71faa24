"""Noether machinery on a reduced algebroid.

A pair ``(X, f)`` of a section of ``D`` and a base function is a symmetry
when the complete lift of ``X`` applied to the restricted Lagrangian equals
the lift of ``f``. The charge ``X^a (G_D y)_a - f`` is then a first
integral. For any ``X`` the charge obeys the momentum equation
``d/dt charge_X = d_T(X)(l)`` along solutions.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence

import numpy as np
from scipy.stats import qmc

from .algebroid import Algebroid, Section, complete_lift_apply, lift_function
from .errors import DimensionError
from .integrator import Trajectory
from .mechanics import MechanicalLagrangian, State
from .smooth import SmoothMap, as_point


@dataclass
class SymmetryCandidate:
    X: Section
    f: SmoothMap

    @classmethod
    def constant(cls, coeffs, base_dim, f=0.0) -> "SymmetryCandidate":
        return cls(Section.constant(coeffs, base_dim), SmoothMap.constant(float(f), base_dim))


def _check(D_red: Algebroid, l: MechanicalLagrangian, cand: SymmetryCandidate):
    if cand.X.rank != D_red.rank or cand.X.base_dim != D_red.base_dim:
        raise DimensionError("symmetry section does not match the reduced bundle")
    if cand.f.shape != () or cand.f.domain_dim != D_red.base_dim:
        raise DimensionError("gauge function must be a scalar map on the base")
    if l.rank != D_red.rank:
        raise DimensionError("restricted Lagrangian does not match the reduced bundle")


def symmetry_defect(D_red: Algebroid, l: MechanicalLagrangian, cand: SymmetryCandidate, s: State) -> float:
    """``d_T(X)(l) - d_T(f)`` at ``s``."""
    _check(D_red, l, cand)
    lifted = complete_lift_apply(D_red, cand.X, l.as_fiber_function())
    return lifted(s.x, s.y) - lift_function(D_red, cand.f)(s.x, s.y)


def halton_states(base_low, base_high, fiber_low, fiber_high, count=200) -> List[State]:
    """Deterministic low-discrepancy states in a box (unscrambled Halton)."""
    lo = np.concatenate([np.atleast_1d(base_low), np.atleast_1d(fiber_low)]).astype(float)
    hi = np.concatenate([np.atleast_1d(base_high), np.atleast_1d(fiber_high)]).astype(float)
    n = np.atleast_1d(base_low).size
    pts = qmc.Halton(d=lo.size, scramble=False).random(count + 1)[1:]
    pts = qmc.scale(pts, lo, hi)
    return [State(p[:n], p[n:]) for p in pts]


def default_symmetry_samples(D_red: Algebroid, count=200, base_box=1.0, fiber_box=2.0) -> List[State]:
    n, k = D_red.base_dim, D_red.rank
    return halton_states(-base_box * np.ones(n), base_box * np.ones(n), -fiber_box * np.ones(k), fiber_box * np.ones(k), count)


def is_symmetry(D_red, l, cand, samples=None, tol=1e-9) -> bool:
    """True iff ``|symmetry_defect| <= tol`` at every sample state."""
    samples = default_symmetry_samples(D_red) if samples is None else samples
    return all(abs(symmetry_defect(D_red, l, cand, s)) <= tol for s in samples)


def noether_charge(l: MechanicalLagrangian, cand: SymmetryCandidate) -> Callable[[State], float]:
    """``s -> X^a(x) (G_D(x) y)_a - f(x)``."""

    def charge(s: State) -> float:
        x = as_point(s.x, l.base_dim)
        return float(cand.X(x) @ (l.G(x) @ s.y)) - float(cand.f.value(x))

    return charge


@dataclass
class MomentumReport:
    max_residual: float
    passed: bool
    charge_variation: float


def momentum_rate_check(D_red, l, X: Section, traj: Trajectory, tol=1e-6) -> MomentumReport:
    """Compare ``d/dt`` of the charge of ``X`` with ``d_T(X)(l)`` along ``traj``.

    The time derivative uses the fourth-order central stencil on interior
    points. ``charge_variation`` is ``max |charge - charge_0|``, reported so
    callers can tell the momentum equation apart from conservation.
    """
    if len(traj.states) < 5:
        raise ValueError("trajectory needs at least 5 states for the derivative stencil")
    cand = SymmetryCandidate(X, SmoothMap.constant(0.0, D_red.base_dim))
    charge = noether_charge(l, cand)
    q = np.array([charge(s) for s in traj.states])
    h = traj.step
    dq = (-q[4:] + 8 * q[3:-1] - 8 * q[1:-3] + q[:-4]) / (12.0 * h)
    lifted = complete_lift_apply(D_red, X, l.as_fiber_function())
    rhs = np.array([lifted(s.x, s.y) for s in traj.states[2:-2]])
    resid = float(np.max(np.abs(dq - rhs)))
    return MomentumReport(resid, resid <= tol, float(np.max(np.abs(q - q[0]))))


def _row_reduce(Z: np.ndarray, tol=1e-10) -> np.ndarray:
    """Reduced row echelon form of the rows of ``Z`` (partial pivoting)."""
    R = Z.copy()
    rows, cols = R.shape
    r = 0
    for c in range(cols):
        if r == rows:
            break
        p = r + int(np.argmax(np.abs(R[r:, c])))
        if abs(R[p, c]) <= tol:
            continue
        R[[r, p]] = R[[p, r]]
        R[r] /= R[r, c]
        for i in range(rows):
            if i != r:
                R[i] -= R[i, c] * R[r]
        r += 1
    R[np.abs(R) < tol] = 0.0
    return R[:r]


def search_symmetries(
    D_red: Algebroid,
    l: MechanicalLagrangian,
    ansatz: Optional[Sequence[SmoothMap]] = None,
    gauge_ansatz: Sequence[SmoothMap] = (),
    samples: Optional[List[State]] = None,
    tol=1e-8,
) -> List[SymmetryCandidate]:
    """Heuristic search for symmetry pairs in a finite ansatz.

    Candidates are ``X = sum_j sum_a alpha_ja phi_j(x) e_a`` and
    ``f = sum_k beta_k psi_k(x)`` with ``phi_j`` from ``ansatz`` (default:
    the constant 1) and ``psi_k`` from ``gauge_ansatz``. The defect is linear
    in ``(alpha, beta)``, so the null space of the sampled defect matrix
    (singular values below ``tol`` times the largest) gives the symmetries
    inside the ansatz, returned in reduced row echelon form. Findings only
    hold on the sampled set.
    """
    n, k = D_red.base_dim, D_red.rank
    ansatz = list(ansatz) if ansatz is not None else [SmoothMap.constant(1.0, n)]
    samples = default_symmetry_samples(D_red) if samples is None else samples
    zero = SmoothMap.constant(0.0, n)
    columns = []
    for phi in ansatz:
        for a in range(k):
            e = np.zeros(k)
            e[a] = 1.0
            X = _scaled_section(phi, e)
            columns.append(SymmetryCandidate(X, zero))
    for psi in gauge_ansatz:
        columns.append(SymmetryCandidate(Section.constant(np.zeros(k), n), psi))
    M = np.array([[symmetry_defect(D_red, l, c, s) for c in columns] for s in samples])
    _, sv, Vt = np.linalg.svd(M, full_matrices=True)
    scale = max(float(sv[0]) if sv.size else 0.0, 1.0)
    rank = int(np.sum(sv > tol * scale))
    null = Vt[rank:]
    if null.shape[0] == 0:
        return []
    found = []
    n_x = len(ansatz) * k
    for row in _row_reduce(null):
        alpha = row[:n_x].reshape(len(ansatz), k)
        beta = row[n_x:]
        X = _combined_section(ansatz, alpha, n, k)
        f = _combined_function(list(gauge_ansatz), beta, n)
        found.append(SymmetryCandidate(X, f))
    return found


def _scaled_section(phi: SmoothMap, e: np.ndarray) -> Section:
    partial = (lambda x, i: float(phi.partial(x, i)) * e) if phi.has_partials else None
    return Section(SmoothMap(lambda x: float(phi.value(x)) * e, phi.domain_dim, e.shape, partial=partial))


def _combined_section(ansatz, alpha, n, k) -> Section:
    def value(x):
        return sum(float(phi.value(x)) * alpha[j] for j, phi in enumerate(ansatz))

    partial = None
    if all(phi.has_partials for phi in ansatz):
        def partial(x, i):
            return sum(float(phi.partial(x, i)) * alpha[j] for j, phi in enumerate(ansatz))

    return Section(SmoothMap(lambda x: np.asarray(value(x), dtype=float).reshape(k), n, (k,), partial=partial))


def _combined_function(gauge, beta, n) -> SmoothMap:
    if not gauge:
        return SmoothMap.constant(0.0, n)

    def value(x):
        return sum(float(psi.value(x)) * beta[j] for j, psi in enumerate(gauge))

    partial = None
    if all(psi.has_partials for psi in gauge):
        def partial(x, i):
            return sum(float(psi.partial(x, i)) * beta[j] for j, psi in enumerate(gauge))

    return SmoothMap(value, n, (), partial=partial)
