"""General algebroids in bracket/anchor form.

An algebroid on a rank-``m`` bundle over an ``n``-dimensional base is given
by a left anchor ``rho``, a right anchor ``sigma`` (both ``n x m``) and
structure functions ``C`` with ``C[c, a, b]`` the ``e_c`` coefficient of
``[e_a, e_b]``. For sections ``X = X^a e_a`` and ``Y = Y^b e_b``::

    [X, Y]^c = rho^i_a X^a d_i Y^c - sigma^i_b Y^b d_i X^c + C^c_ab X^a Y^b

No skewness or Jacobi identity is assumed. Quasi-Lie data (skew ``C`` and
``rho == sigma``) is what nonholonomic reduction produces.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import Callable, Iterable, Optional

import numpy as np

from .errors import DimensionError, NotQuasiLieError
from .smooth import SmoothMap, as_point


class Algebroid:
    """Bracket/anchor data of a general algebroid.

    Parameters
    ----------
    base_dim : int
        Dimension ``n`` of the base; 0 means the base is a point.
    rank : int
        Fiber rank ``m``.
    rho, sigma : SmoothMap
        ``x -> (n, m)`` anchor and co-anchor.
    C : SmoothMap
        ``x -> (m, m, m)`` structure functions, ``C[c, a, b]``.
    is_quasi_lie : bool
        Claim skew ``C`` and ``rho == sigma``; verified at sample points.
    """

    def __init__(self, base_dim, rank, rho, sigma, C, is_quasi_lie=False, name=None):
        self.base_dim = int(base_dim)
        self.rank = int(rank)
        self.rho = rho
        self.sigma = sigma
        self.C = C
        self.name = name
        n, m = self.base_dim, self.rank
        for label, smap, shape in (("rho", rho, (n, m)), ("sigma", sigma, (n, m)), ("C", C, (m, m, m))):
            if not isinstance(smap, SmoothMap):
                raise TypeError(f"{label} must be a SmoothMap")
            if smap.domain_dim != n or smap.shape != shape:
                raise DimensionError(
                    f"{label} must map R^{n} -> {shape}, got R^{smap.domain_dim} -> {smap.shape}"
                )
        self.is_quasi_lie = bool(is_quasi_lie)
        if self.is_quasi_lie:
            report = check_skew(self, default_samples(self.base_dim, 5, seed=0), tol=1e-10)
            if not report.is_skew:
                raise NotQuasiLieError(
                    f"claimed quasi-Lie but skew violation is {report.max_violation:.3e}"
                )

    def __repr__(self):
        label = f"{self.name!r}, " if self.name else ""
        return f"Algebroid({label}base_dim={self.base_dim}, rank={self.rank}, quasi_lie={self.is_quasi_lie})"

    @classmethod
    def lie_algebra(cls, C, name=None) -> "Algebroid":
        """Constant structure constants over a point base."""
        C = np.asarray(C, dtype=float)
        m = C.shape[0]
        if C.shape != (m, m, m):
            raise DimensionError(f"structure constants must be (m, m, m), got {C.shape}")
        empty = np.zeros((0, m))
        skew = bool(np.allclose(C, -np.swapaxes(C, 1, 2), atol=1e-14, rtol=0))
        return cls(
            0, m, SmoothMap.constant(empty, 0), SmoothMap.constant(empty, 0),
            SmoothMap.constant(C, 0), is_quasi_lie=skew, name=name,
        )

    @classmethod
    def tangent_bundle(cls, n, name=None) -> "Algebroid":
        """``TM`` on ``R^n`` in the coordinate frame: ``rho = sigma = I``, ``C = 0``."""
        eye = SmoothMap.constant(np.eye(n), n)
        return cls(n, n, eye, eye, SmoothMap.constant(np.zeros((n, n, n)), n), is_quasi_lie=True, name=name)


def default_samples(base_dim, count, seed=0, scale=1.0):
    """Deterministic sample points in the base (one empty point for a point base)."""
    if base_dim == 0:
        return [np.zeros(0)]
    rng = np.random.default_rng(seed)
    return list(rng.uniform(-scale, scale, size=(count, base_dim)))


def eval_structure(A: Algebroid, x):
    """Return ``(rho, sigma, C)`` evaluated at ``x``."""
    x = as_point(x, A.base_dim)
    return A.rho.value(x), A.sigma.value(x), A.C.value(x)


class Section:
    """A section ``X^a(x) e_a`` of the bundle, in the ambient frame."""

    def __init__(self, coeffs: SmoothMap):
        if len(coeffs.shape) != 1:
            raise DimensionError("section coefficients must be vector valued")
        self.coeffs = coeffs

    @property
    def rank(self) -> int:
        return self.coeffs.shape[0]

    @property
    def base_dim(self) -> int:
        return self.coeffs.domain_dim

    def __call__(self, x) -> np.ndarray:
        return self.coeffs.value(x)

    @classmethod
    def constant(cls, vec, base_dim) -> "Section":
        return cls(SmoothMap.constant(np.asarray(vec, dtype=float), base_dim))

    @classmethod
    def frame(cls, a, rank, base_dim) -> "Section":
        e = np.zeros(rank)
        e[a] = 1.0
        return cls.constant(e, base_dim)

    @classmethod
    def coordinate_times_frame(cls, i, a, rank, base_dim) -> "Section":
        """The section ``x^i e_a``."""
        e = np.zeros(rank)
        e[a] = 1.0

        def partial(x, j):
            return e if j == i else np.zeros(rank)

        return cls(SmoothMap(lambda x: x[i] * e, base_dim, (rank,), partial=partial))

    @classmethod
    def from_function(cls, func, rank, base_dim, partial=None, fd_step=None) -> "Section":
        return cls(SmoothMap(func, base_dim, (rank,), partial=partial, fd_step=fd_step))


def _check_section(A: Algebroid, X: Section):
    if X.rank != A.rank or X.base_dim != A.base_dim:
        raise DimensionError(
            f"section of rank {X.rank} over R^{X.base_dim} does not fit algebroid "
            f"of rank {A.rank} over R^{A.base_dim}"
        )


def bracket_from_jets(rho, sigma, C, Xv, dX, Yv, dY) -> np.ndarray:
    """Bracket components from values and first partials of two sections.

    ``dX`` and ``dY`` have shape ``(n, m)``, row ``i`` holding ``d_i``.
    """
    out = np.einsum("cab,a,b->c", C, Xv, Yv)
    if rho.shape[0]:
        out = out + (rho @ Xv) @ dY - (sigma @ Yv) @ dX
    return out


def bracket_sections(A: Algebroid, X: Section, Y: Section, x) -> np.ndarray:
    """Components of ``[X, Y]`` at ``x`` in the ambient frame."""
    _check_section(A, X)
    _check_section(A, Y)
    x = as_point(x, A.base_dim)
    rho, sigma, C = eval_structure(A, x)
    return bracket_from_jets(rho, sigma, C, X(x), X.coeffs.jacobian(x), Y(x), Y.coeffs.jacobian(x))


def bracket_section(A: Algebroid, X: Section, Y: Section, fd_step=None) -> Section:
    """``[X, Y]`` as a section; its partials are taken by finite differences."""
    return Section(SmoothMap(lambda x: bracket_sections(A, X, Y, x), A.base_dim, (A.rank,), fd_step=fd_step))


@dataclass
class SkewReport:
    is_skew: bool
    max_violation: float
    max_bracket_violation: float = 0.0
    max_anchor_violation: float = 0.0


def check_skew(A: Algebroid, sample_points, tol=1e-12) -> SkewReport:
    """Check ``C^c_ab = -C^c_ba`` and ``rho = sigma`` at the sample points."""
    pts = list(sample_points)
    if A.base_dim == 0 and not pts:
        pts = [np.zeros(0)]
    worst_c = worst_a = 0.0
    for x in pts:
        rho, sigma, C = eval_structure(A, x)
        if C.size:
            worst_c = max(worst_c, float(np.max(np.abs(C + np.swapaxes(C, 1, 2)))))
        if rho.size:
            worst_a = max(worst_a, float(np.max(np.abs(rho - sigma))))
    worst = max(worst_c, worst_a)
    return SkewReport(worst <= tol, worst, worst_c, worst_a)


def _require_skew(A: Algebroid, x, tol=1e-9):
    rho, sigma, C = eval_structure(A, x)
    scale = 1.0 + float(np.max(np.abs(C), initial=0.0))
    report = check_skew(A, [x], tol=tol * scale)
    if not report.is_skew:
        raise NotQuasiLieError(
            f"Jacobi identity is only checked for quasi-Lie data; skew violation {report.max_violation:.3e}"
        )


def jacobiator(A: Algebroid, X: Section, Y: Section, Z: Section, x, check=True) -> np.ndarray:
    """``[X,[Y,Z]] + [Y,[Z,X]] + [Z,[X,Y]]`` at ``x``."""
    x = as_point(x, A.base_dim)
    if check:
        _require_skew(A, x)
    total = np.zeros(A.rank)
    for P, Q, R in ((X, Y, Z), (Y, Z, X), (Z, X, Y)):
        total = total + bracket_sections(A, P, bracket_section(A, Q, R), x)
    return total


def vector_field_bracket(U: SmoothMap, V: SmoothMap, x) -> np.ndarray:
    """Commutator of vector fields ``U, V`` on ``R^n``: ``U.grad V - V.grad U``."""
    return U.value(x) @ V.jacobian(x) - V.value(x) @ U.jacobian(x)


def anchored(A: Algebroid, X: Section, which="rho") -> SmoothMap:
    """The vector field ``rho(X)`` (or ``sigma(X)``), with product-rule partials when available."""
    anchor = A.rho if which == "rho" else A.sigma
    partial = None
    if anchor.has_partials and X.coeffs.has_partials:
        def partial(x, i):
            return anchor.partial(x, i) @ X(x) + anchor.value(x) @ X.coeffs.partial(x, i)
    return SmoothMap(lambda x: anchor.value(x) @ X(x), A.base_dim, (A.base_dim,), partial=partial)


@dataclass
class LieReport:
    is_lie: bool
    max_jacobiator: float
    max_anchor_defect: float
    skew: SkewReport
    worst_triple: Optional[tuple] = None
    details: list = field(default_factory=list)


def check_sections(A: Algebroid):
    """The deterministic section family used by :func:`check_lie`.

    Returns ``(constant_frame, linear)`` where ``linear[(i, a)]`` is ``x^i e_a``.
    """
    frame = [Section.frame(a, A.rank, A.base_dim) for a in range(A.rank)]
    linear = {
        (i, a): Section.coordinate_times_frame(i, a, A.rank, A.base_dim)
        for i in range(A.base_dim)
        for a in range(A.rank)
    }
    return frame, linear


def check_lie(A: Algebroid, samples, tol=1e-9) -> LieReport:
    """Sampled check of the Lie algebroid axioms on quasi-Lie data.

    Evaluates the Jacobiator on frame triples ``(e_a, e_b, e_c)`` with
    ``a < b < c`` and on ``(x^i e_a, e_b, e_c)`` with ``b < c``, plus the
    anchor-morphism defect ``rho[e_a, e_b] - [rho e_a, rho e_b]`` for
    ``a < b``. The Jacobiator is alternating for skew brackets, so these
    triples detect every violation of the structure-function identities.
    """
    pts = list(samples) or [np.zeros(0)]
    skew = check_skew(A, pts, tol=tol)
    if not skew.is_skew:
        raise NotQuasiLieError(f"check_lie needs quasi-Lie data; skew violation {skew.max_violation:.3e}")
    frame, linear = check_sections(A)
    m = A.rank
    triples = [((("e", a), frame[a]), (("e", b), frame[b]), (("e", c), frame[c]))
               for a, b, c in combinations(range(m), 3)]
    for (i, a), sec in linear.items():
        for b, c in combinations(range(m), 2):
            triples.append(((("x", i, a), sec), (("e", b), frame[b]), (("e", c), frame[c])))
    worst_jac = 0.0
    worst_triple = None
    worst_anchor = 0.0
    for x in pts:
        x = as_point(x, A.base_dim)
        for (la, X), (lb, Y), (lc, Z) in triples:
            val = float(np.linalg.norm(jacobiator(A, X, Y, Z, x, check=False)))
            if val > worst_jac:
                worst_jac, worst_triple = val, (la, lb, lc, tuple(x))
        if A.base_dim:
            rho = A.rho.value(x)
            fields = [anchored(A, e) for e in frame]
            for a, b in combinations(range(m), 2):
                lhs = rho @ bracket_sections(A, frame[a], frame[b], x)
                rhs = vector_field_bracket(fields[a], fields[b], x)
                worst_anchor = max(worst_anchor, float(np.linalg.norm(lhs - rhs)))
    ok = worst_jac <= tol and worst_anchor <= tol
    return LieReport(ok, worst_jac, worst_anchor, skew, worst_triple)


class FiberFunction:
    """A function ``F(x, y)`` on the total space with optional analytic gradient.

    ``gradient(x, y)`` returns ``(dF/dx, dF/dy)``; without an analytic
    gradient, central differences with relative step ``fd_step`` are used.
    """

    def __init__(self, func, base_dim, rank, gradient=None, fd_step=1e-6):
        self._func = func
        self._grad = gradient
        self.base_dim = base_dim
        self.rank = rank
        self.fd_step = fd_step

    def __call__(self, x, y) -> float:
        return float(self._func(as_point(x, self.base_dim), as_point(y, self.rank)))

    def gradient(self, x, y):
        x = as_point(x, self.base_dim)
        y = as_point(y, self.rank)
        if self._grad is not None:
            gx, gy = self._grad(x, y)
            return np.asarray(gx, dtype=float), np.asarray(gy, dtype=float)
        z = np.concatenate([x, y])
        g = np.zeros_like(z)
        n = self.base_dim
        for k in range(z.size):
            h = self.fd_step * (1.0 + abs(z[k]))
            zp, zm = z.copy(), z.copy()
            zp[k] += h
            zm[k] -= h
            g[k] = (self._func(zp[:n], zp[n:]) - self._func(zm[:n], zm[n:])) / (2 * h)
        return g[:n], g[n:]


def complete_lift(A: Algebroid, X: Section, x, y):
    """Components ``(base, fiber)`` of the complete lift of ``X`` at ``(x, y)``.

    base^i = X^a sigma^i_a,  fiber^c = y^a rho^i_a d_i X^c + C^c_ab y^a X^b.
    """
    _check_section(A, X)
    x = as_point(x, A.base_dim)
    y = as_point(y, A.rank)
    rho, sigma, C = eval_structure(A, x)
    Xv = X(x)
    base = sigma @ Xv
    fiber = np.einsum("cab,a,b->c", C, y, Xv)
    if A.base_dim:
        fiber = fiber + (rho @ y) @ X.coeffs.jacobian(x)
    return base, fiber


def complete_lift_apply(A: Algebroid, X: Section, F: FiberFunction) -> Callable:
    """The function ``d_T(X)(F)`` obtained by applying the complete lift of ``X`` to ``F``."""

    def lifted(x, y) -> float:
        base, fiber = complete_lift(A, X, x, y)
        gx, gy = F.gradient(x, y)
        return float(base @ gx + fiber @ gy)

    return lifted


def lift_function(A: Algebroid, f: SmoothMap) -> Callable:
    """Complete lift of a base function: ``(x, y) -> y^a rho^i_a d_i f``."""

    def lifted(x, y) -> float:
        x = as_point(x, A.base_dim)
        y = as_point(y, A.rank)
        if A.base_dim == 0:
            return 0.0
        grad = np.array([float(f.partial(x, i)) for i in range(A.base_dim)])
        return float((A.rho.value(x) @ y) @ grad)

    return lifted
