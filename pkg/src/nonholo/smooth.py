"""Evaluable smooth maps of base coordinates with optional analytic partials.

Every x-dependent coefficient in the package (anchors, structure functions,
metrics, potentials, constraint frames, section components) is a
:class:`SmoothMap`. When no analytic partial is supplied, derivatives fall
back to central differences with a per-coordinate step
``fd_step * (1 + |x_i|)``.
"""
from __future__ import annotations

import os
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import DimensionError

DEFAULT_FD_STEP = 1e-6
FD_STEP_ENV = "NONHOLO_FD_STEP"


def default_fd_step() -> float:
    """Return the default relative FD step, honouring ``NONHOLO_FD_STEP``."""
    raw = os.environ.get(FD_STEP_ENV)
    if raw is None or raw.strip() == "":
        return DEFAULT_FD_STEP
    step = float(raw)
    if not np.isfinite(step) or step <= 0:
        raise ValueError(f"{FD_STEP_ENV} must be a positive number, got {raw!r}")
    return step


def as_point(x, dim: int) -> np.ndarray:
    """Coerce ``x`` to a float vector of length ``dim``."""
    arr = np.asarray(x, dtype=float).reshape(-1)
    if arr.shape[0] != dim:
        raise DimensionError(f"expected a base point of length {dim}, got {arr.shape[0]}")
    return arr


class SmoothMap:
    """A smooth array-valued map ``x -> value`` on an ``n``-dimensional base.

    Parameters
    ----------
    func : callable
        ``func(x)`` returns an array of shape ``shape``.
    domain_dim : int
        Length of the base point ``x`` (0 means the base is a point).
    shape : tuple of int
        Codomain shape; ``()`` for scalars.
    partial : callable, optional
        ``partial(x, i)`` returns the analytic derivative in ``x[i]``.
    fd_step : float, optional
        Relative central-difference step used when ``partial`` is absent.
    """

    def __init__(
        self,
        func: Callable[[np.ndarray], np.ndarray],
        domain_dim: int,
        shape: Sequence[int] = (),
        partial: Optional[Callable[[np.ndarray, int], np.ndarray]] = None,
        fd_step: Optional[float] = None,
    ):
        if domain_dim < 0:
            raise DimensionError("domain_dim must be non-negative")
        self._func = func
        self._partial = partial
        self.domain_dim = int(domain_dim)
        self.shape = tuple(int(s) for s in shape)
        self.fd_step = default_fd_step() if fd_step is None else float(fd_step)
        if self.fd_step <= 0:
            raise ValueError("fd_step must be positive")
        # last (x bytes, value); one tuple so concurrent readers see a consistent pair
        self._memo = None

    @classmethod
    def constant(cls, value, domain_dim: int) -> "SmoothMap":
        """Map returning ``value`` everywhere, with exact zero partials."""
        val = np.array(value, dtype=float)
        val.setflags(write=False)
        zero = np.zeros_like(val)
        zero.setflags(write=False)
        return cls(lambda x: val, domain_dim, val.shape, partial=lambda x, i: zero)

    @property
    def has_partials(self) -> bool:
        return self._partial is not None

    def __repr__(self):
        kind = "analytic" if self.has_partials else f"fd(step={self.fd_step:g})"
        return f"SmoothMap(domain_dim={self.domain_dim}, shape={self.shape}, partials={kind})"

    def _check_out(self, out) -> np.ndarray:
        arr = np.asarray(out, dtype=float)
        if arr.shape != self.shape:
            raise DimensionError(f"SmoothMap returned shape {arr.shape}, expected {self.shape}")
        return arr

    def __call__(self, x) -> np.ndarray:
        return self.value(x)

    def value(self, x) -> np.ndarray:
        """``func(x)`` as a read-only array; the last evaluation is memoized."""
        x = as_point(x, self.domain_dim)
        key = x.tobytes()
        memo = self._memo
        if memo is not None and memo[0] == key:
            return memo[1]
        out = self._check_out(self._func(x))
        if out.flags.writeable:
            out = out.copy()
            out.setflags(write=False)
        self._memo = (key, out)
        return out

    def step_for(self, x, i: int) -> float:
        return self.fd_step * (1.0 + abs(float(x[i])))

    def fd_partial(self, x, i: int) -> np.ndarray:
        """Central finite-difference derivative in ``x[i]``."""
        x = as_point(x, self.domain_dim)
        h = self.step_for(x, i)
        xp = x.copy()
        xm = x.copy()
        xp[i] += h
        xm[i] -= h
        return (self.value(xp) - self.value(xm)) / (2.0 * h)

    def partial(self, x, i: int) -> np.ndarray:
        if not 0 <= i < self.domain_dim:
            raise DimensionError(f"partial index {i} out of range for domain_dim {self.domain_dim}")
        if self._partial is None:
            return self.fd_partial(x, i)
        return self._check_out(self._partial(as_point(x, self.domain_dim), i))

    def jacobian(self, x) -> np.ndarray:
        """All partials stacked on a leading axis: shape ``(n, *shape)``."""
        x = as_point(x, self.domain_dim)
        if self.domain_dim == 0:
            return np.zeros((0,) + self.shape)
        return np.stack([self.partial(x, i) for i in range(self.domain_dim)])

    def without_partials(self, fd_step: Optional[float] = None) -> "SmoothMap":
        """Same values, derivatives by finite differences only."""
        return SmoothMap(self._func, self.domain_dim, self.shape, None, fd_step or self.fd_step)


def gradient_check(smap: SmoothMap, points) -> float:
    """Largest ratio of analytic-vs-FD partial error to its allowed bound.

    The bound at a point is ``10 * h_i**2 * (1 + ||value||)`` with ``h_i`` the
    FD step used for coordinate ``i``; a return value <= 1 means the
    analytic partials pass.
    """
    if not smap.has_partials:
        raise ValueError("map has no analytic partials to check")
    worst = 0.0
    for x in points:
        x = as_point(x, smap.domain_dim)
        scale = 1.0 + float(np.linalg.norm(smap.value(x)))
        for i in range(smap.domain_dim):
            h = smap.step_for(x, i)
            err = float(np.linalg.norm(smap.partial(x, i) - smap.fd_partial(x, i)))
            worst = max(worst, err / (10.0 * h * h * scale))
    return worst
