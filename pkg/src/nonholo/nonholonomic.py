"""Linear nonholonomic constraints and the reduction of the algebroid structure.

A constraint is a subbundle ``D`` spanned by the columns of ``B(x)`` (an
``m x k`` matrix in the ambient frame), defined over the whole base. Given
a complement and its projector ``P`` onto ``D``, sections of ``D`` carry
the bracket ``[X, Y]_P = P [X, Y]`` with the restricted anchors. For a
mechanical Lagrangian and the metric-orthogonal complement, nonholonomic
Euler-Lagrange dynamics equals ordinary Euler-Lagrange dynamics of the
restricted Lagrangian on this reduced algebroid; :func:`verify_theorem_5_1`
checks that numerically by computing both sides independently.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg import cho_solve

from .algebroid import Algebroid, Section, bracket_from_jets, eval_structure
from .errors import DegenerateConstraintError, DimensionError, SingularMetricError
from .mechanics import MechanicalLagrangian, State, cholesky_spd, el_vector_field
from .smooth import SmoothMap, as_point

RANK_TOL = 1e-10


class Subbundle:
    """Constraint subbundle ``D`` spanned by the columns of ``basis(x)``."""

    def __init__(self, ambient: Algebroid, basis: SmoothMap):
        if basis.domain_dim != ambient.base_dim:
            raise DimensionError("basis must live on the ambient base")
        if len(basis.shape) != 2 or basis.shape[0] != ambient.rank:
            raise DimensionError(f"basis must be ({ambient.rank}, k), got {basis.shape}")
        if basis.shape[1] > ambient.rank or basis.shape[1] == 0:
            raise DimensionError("constraint rank must satisfy 0 < k <= m")
        self.ambient = ambient
        self.basis = basis
        self._checked = None

    @property
    def k(self) -> int:
        return self.basis.shape[1]

    @property
    def base_dim(self) -> int:
        return self.ambient.base_dim

    @classmethod
    def constant(cls, ambient: Algebroid, B) -> "Subbundle":
        return cls(ambient, SmoothMap.constant(np.asarray(B, dtype=float), ambient.base_dim))

    def B(self, x) -> np.ndarray:
        """Basis at ``x``, checked for full column rank."""
        B = self.basis.value(x)
        if B is self._checked:
            return B
        s = np.linalg.svd(B, compute_uv=False)
        if s[-1] <= RANK_TOL * s[0]:
            raise DegenerateConstraintError(f"constraint basis is rank deficient (sv ratio {s[-1] / s[0]:.2e})")
        self._checked = B
        return B

    def dB(self, x) -> np.ndarray:
        """Basis partials, shape ``(n, m, k)``."""
        return self.basis.jacobian(x)


def _gram_factor(B, G):
    try:
        return cholesky_spd(B.T @ G @ B)
    except SingularMetricError as exc:
        raise DegenerateConstraintError(str(exc)) from exc


class Projector:
    """Projection ``P(x)`` of the ambient bundle onto ``D``.

    ``coefficients(x, w)`` returns the components of ``P(x) w`` in the basis
    ``B(x)``. ``metric`` is set for the metric-orthogonal projector.
    """

    def __init__(self, subbundle: Subbundle, matrix: SmoothMap, coefficients, metric: Optional[SmoothMap] = None):
        self.subbundle = subbundle
        self.P = matrix
        self._coefficients = coefficients
        self.metric = metric

    @property
    def orthogonal(self) -> bool:
        return self.metric is not None

    def __call__(self, x) -> np.ndarray:
        return self.P.value(x)

    def coefficients(self, x, w) -> np.ndarray:
        return self._coefficients(as_point(x, self.subbundle.base_dim), np.asarray(w, dtype=float))


def orthogonal_projector(G: SmoothMap, D: Subbundle) -> Projector:
    """``P = B (B^T G B)^{-1} B^T G``, the G-orthogonal projector onto ``D``."""
    m = D.ambient.rank
    if G.shape != (m, m) or G.domain_dim != D.base_dim:
        raise DimensionError("metric does not match the ambient bundle")

    def coefficients(x, w):
        B = D.B(x)
        Gx = G.value(x)
        factor = _gram_factor(B, Gx)
        return cho_solve((factor, True), B.T @ (Gx @ w))

    def matrix(x):
        B = D.B(x)
        Gx = G.value(x)
        factor = _gram_factor(B, Gx)
        return B @ cho_solve((factor, True), B.T @ Gx)

    return Projector(D, SmoothMap(matrix, D.base_dim, (m, m)), coefficients, metric=G)


def oblique_projector(D: Subbundle, complement: SmoothMap) -> Projector:
    """Projector onto ``D`` along the span of the columns of ``complement(x)``."""
    m, k = D.ambient.rank, D.k
    if complement.shape != (m, m - k):
        raise DimensionError(f"complement must be ({m}, {m - k})")

    def frame(x):
        F = np.hstack([D.B(x), complement.value(x)])
        if np.linalg.cond(F) > 1.0 / RANK_TOL:
            raise DegenerateConstraintError("complement is not transverse to D")
        return F

    def coefficients(x, w):
        return np.linalg.solve(frame(x), w)[:k]

    def matrix(x):
        F = frame(x)
        return D.B(x) @ np.linalg.solve(F, np.eye(m))[:k]

    return Projector(D, SmoothMap(matrix, D.base_dim, (m, m)), coefficients)


def complete_frame(G: SmoothMap, D: Subbundle, x) -> np.ndarray:
    """G-orthonormal basis ``N`` of the G-orthogonal complement of ``D`` at ``x``.

    Gram-Schmidt in the G inner product, seeded by the ambient frame
    vectors: at each step the candidate with the largest residual G-norm is
    taken, ties going to the lowest index.
    """
    x = as_point(x, D.base_dim)
    B = D.B(x)
    Gx = G.value(x)
    m, k = B.shape
    factor = _gram_factor(B, Gx)
    Q = np.linalg.solve(factor, B.T).T  # G-orthonormal span of B
    cols = []
    cand = np.eye(m)
    for _ in range(m - k):
        R = cand.copy()
        for _ in range(2):
            R = R - Q @ (Q.T @ (Gx @ R))
        norms = np.sqrt(np.maximum(np.einsum("ij,ij->j", R, Gx @ R), 0.0))
        j = int(np.argmax(norms))
        if norms[j] <= RANK_TOL:
            raise DegenerateConstraintError("could not complete the frame")
        v = R[:, j] / norms[j]
        v = v - Q @ (Q.T @ (Gx @ v))
        v = v / np.sqrt(v @ Gx @ v)
        Q = np.hstack([Q, v[:, None]])
        cols.append(v)
    return np.array(cols).T.reshape(m, m - k)


class ReducedAlgebroid(Algebroid):
    """Algebroid structure on ``D`` obtained by projecting the ambient bracket."""

    def __init__(self, ambient, subbundle, projector, rho, sigma, C, is_quasi_lie):
        self.ambient = ambient
        self.subbundle = subbundle
        self.projector = projector
        name = f"{ambient.name}/D" if ambient.name else None
        super().__init__(ambient.base_dim, subbundle.k, rho, sigma, C, is_quasi_lie=is_quasi_lie, name=name)


def _restricted_anchor(anchor: SmoothMap, D: Subbundle) -> SmoothMap:
    partial = None
    if anchor.has_partials and D.basis.has_partials:
        def partial(x, i):
            return anchor.partial(x, i) @ D.basis.value(x) + anchor.value(x) @ D.basis.partial(x, i)
    return SmoothMap(lambda x: anchor.value(x) @ D.B(x), D.base_dim, (D.base_dim, D.k), partial=partial)


def ambient_brackets_of_basis(A: Algebroid, D: Subbundle, x) -> np.ndarray:
    """``w[c, a, b]``: ambient-frame components of ``[B_a, B_b]`` at ``x``."""
    rho, sigma, C = eval_structure(A, x)
    B = D.B(x)
    w = np.einsum("cpq,pa,qb->cab", C, B, B)
    if A.base_dim:
        dB = D.dB(x)
        w = w + np.einsum("ia,icb->cab", rho @ B, dB) - np.einsum("ib,ica->cab", sigma @ B, dB)
    return w


def reduce_algebroid(A: Algebroid, D: Subbundle, P: Projector) -> ReducedAlgebroid:
    """Nonholonomic restriction of ``A`` to ``D`` along ``P``.

    Anchors are ``rho B`` and ``sigma B``; ``C_D[c, a, b]`` is the ``c``-th
    coefficient of ``P [B_a, B_b]`` in the basis ``B``.
    """
    if D.ambient is not A:
        if D.ambient.rank != A.rank or D.ambient.base_dim != A.base_dim:
            raise DimensionError("subbundle belongs to a different bundle")
    k = D.k

    def structure(x):
        w = ambient_brackets_of_basis(A, D, x).reshape(A.rank, k * k)
        return P.coefficients(x, w).reshape(k, k, k)

    C_D = SmoothMap(structure, A.base_dim, (k, k, k), fd_step=D.basis.fd_step)
    return ReducedAlgebroid(
        A, D, P, _restricted_anchor(A.rho, D), _restricted_anchor(A.sigma, D), C_D, A.is_quasi_lie,
    )


def restricted_lagrangian(L: MechanicalLagrangian, D: Subbundle) -> MechanicalLagrangian:
    """``l = L|_D``: metric ``B^T G B`` and the same potential."""
    if L.rank != D.ambient.rank or L.base_dim != D.base_dim:
        raise DimensionError("Lagrangian does not match the constraint's ambient bundle")

    def metric(x):
        B = D.B(x)
        GD = B.T @ L.G(x) @ B
        _gram_factor(B, L.G(x))
        return 0.5 * (GD + GD.T)

    partial = None
    if L.metric.has_partials and D.basis.has_partials:
        def partial(x, i):
            B, dB = D.basis.value(x), D.basis.partial(x, i)
            G = L.G(x)
            sym = dB.T @ G @ B
            return sym + sym.T + B.T @ L.metric.partial(x, i) @ B

    return MechanicalLagrangian(
        SmoothMap(metric, D.base_dim, (D.k, D.k), partial=partial, fd_step=D.basis.fd_step),
        L.potential,
    )


def basis_sections(D: Subbundle):
    """The columns of ``B`` as ambient sections."""
    def column(a):
        partial = None
        if D.basis.has_partials:
            def partial(x, i):
                return D.basis.partial(x, i)[:, a]
        return Section(SmoothMap(lambda x: D.basis.value(x)[:, a], D.base_dim, (D.ambient.rank,),
                                 partial=partial, fd_step=D.basis.fd_step))
    return [column(a) for a in range(D.k)]


def nonholonomic_el_vector_field(A: Algebroid, L: MechanicalLagrangian, D: Subbundle, s: State):
    """Nonholonomic Euler-Lagrange field computed directly in an adapted frame.

    The ambient frame is replaced by ``F = (B | N)`` with ``N`` from
    :func:`complete_frame`; the state is embedded as ``(x, y, 0)``; the
    ``D``-indexed equations of the constrained Tulczyjew differential are
    assembled from the ambient structure data expressed in ``F`` and solved
    for ``ydot`` with the adapted mass matrix.
    """
    x = as_point(s.x, A.base_dim)
    y = as_point(s.y, D.k)
    k, n = D.k, A.base_dim
    rho, sigma, _ = eval_structure(A, x)
    B = D.B(x)
    G = L.G(x)
    N = complete_frame(L.metric, D, x)
    F = np.hstack([B, N])
    y_full = np.concatenate([y, np.zeros(A.rank - k)])
    # adapted-frame structure functions C~[C, d, b] for d, b in D
    _, _, C = eval_structure(A, x)
    jets = [(col(x), col.coeffs.jacobian(x)) for col in basis_sections(D)]
    w = np.empty((A.rank, k, k))
    for d in range(k):
        for b in range(k):
            w[:, d, b] = bracket_from_jets(rho, sigma, C, *jets[d], *jets[b])
    C_adapted = np.linalg.solve(F, w.reshape(A.rank, k * k)).reshape(A.rank, k, k)
    G_adapted = F.T @ G @ F
    momenta = G_adapted @ y_full
    rhs = np.einsum("cdb,d,c->b", C_adapted, y, momenta)
    xdot = rho @ (F @ y_full)
    mass = G_adapted[:k, :k]
    if n:
        dB = D.dB(x)
        dG = L.dG(x)
        dmass = np.einsum("iab,ac,bd->icd", dG, B, B)
        sym = np.einsum("iac,ab,bd->icd", dB, G, B)
        dmass = dmass + sym + np.swapaxes(sym, 1, 2)
        dLdx = 0.5 * np.einsum("icd,c,d->i", dmass, y, y) - L.dV(x)
        rhs = rhs + (sigma @ B).T @ dLdx - np.einsum("i,icd,d->c", xdot, dmass, y)
    return xdot, np.linalg.solve(mass, rhs)


@dataclass
class Theorem51Report:
    max_gap: float
    passed: bool
    n_samples: int
    worst_state: Optional[State] = None


def reduced_system(A: Algebroid, L: MechanicalLagrangian, D: Subbundle):
    """``(reduced algebroid, restricted Lagrangian, projector)`` along the G-orthogonal complement."""
    P = orthogonal_projector(L.metric, D)
    return reduce_algebroid(A, D, P), restricted_lagrangian(L, D), P


def verify_theorem_5_1(A, L, D, samples, tol) -> Theorem51Report:
    """Compare the direct nonholonomic field with the reduced-algebroid field.

    The gap at a state is ``||direct - reduced|| / max(1, ||reduced||)`` over
    the stacked ``(xdot, ydot)``.
    """
    red, l, _ = reduced_system(A, L, D)
    worst, worst_state = 0.0, None
    samples = list(samples)
    for s in samples:
        direct = np.concatenate(nonholonomic_el_vector_field(A, L, D, s))
        reduced = np.concatenate(el_vector_field(red, l, s))
        gap = float(np.linalg.norm(direct - reduced)) / max(1.0, float(np.linalg.norm(reduced)))
        if gap > worst:
            worst, worst_state = gap, s
    return Theorem51Report(worst, worst <= tol, len(samples), worst_state)


@dataclass
class NilpotentDouble:
    """Lie algebra ``E`` realizing a skew bracket as a nonholonomic reduction.

    ``embed`` and ``complement`` hold the spanning vectors of ``D`` and of
    its complement as rows (``k x 2k``); ``P`` is the projector onto ``D``.
    """

    E: Algebroid
    embed: np.ndarray
    complement: np.ndarray
    P: np.ndarray
    subbundle: Subbundle
    projector: Projector
    metric: SmoothMap

    def reduce(self) -> ReducedAlgebroid:
        return reduce_algebroid(self.E, self.subbundle, self.projector)


def nilpotent_double(c) -> NilpotentDouble:
    """Build the 2-step nilpotent double of skew structure constants ``c[k, i, j]``.

    ``E`` has basis ``(e_1..e_k, f_1..f_k)`` with ``f`` central and
    ``[e_i, e_j] = 2 c^l_ij f_l``. ``D`` is spanned by ``e_i + f_i`` and the
    complement by ``e_i - f_i``; they are orthogonal for the identity metric,
    and the orthogonal projection sends ``f_l`` to ``(e_l + f_l) / 2``, so the
    reduced bracket reproduces ``c`` exactly.
    """
    c = np.asarray(c, dtype=float)
    k = c.shape[0]
    if c.shape != (k, k, k):
        raise DimensionError(f"structure constants must be (k, k, k), got {c.shape}")
    if not np.allclose(c, -np.swapaxes(c, 1, 2), atol=1e-14, rtol=0):
        raise DimensionError("structure constants must be skew in the lower indices")
    C = np.zeros((2 * k, 2 * k, 2 * k))
    C[k:, :k, :k] = 2.0 * c
    E = Algebroid.lie_algebra(C, name="nilpotent_double")
    eye = np.eye(k)
    embed = np.hstack([eye, eye])
    complement = np.hstack([eye, -eye])
    P = 0.5 * np.block([[eye, eye], [eye, eye]])
    D = Subbundle.constant(E, embed.T)
    metric = SmoothMap.constant(np.eye(2 * k), 0)
    return NilpotentDouble(E, embed, complement, P, D, orthogonal_projector(metric, D), metric)
