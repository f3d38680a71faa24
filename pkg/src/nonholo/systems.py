"""Registry of built-in nonholonomic systems.

Each system bundles an ambient algebroid, a mechanical Lagrangian and a
constraint subbundle. The Chaplygin sleigh lives on the Lie algebra se(2)
(base = point); the snakeboard on the tangent bundle of SE(2) x T^2 with
coordinates ``(x, y, theta, psi, phi)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Dict, Optional

import numpy as np

from .algebroid import Algebroid, check_skew
from .errors import InvalidParameterError
from .mechanics import MechanicalLagrangian, State, cholesky_spd, energy
from .nonholonomic import Subbundle, reduced_system
from .smooth import SmoothMap


@dataclass
class Param:
    default: Optional[float]
    low: float = -np.inf
    high: float = np.inf
    kind: type = float
    doc: str = ""


@dataclass
class System:
    name: str
    params: Dict[str, float]
    algebroid: Algebroid
    lagrangian: MechanicalLagrangian
    subbundle: Subbundle
    base_names: list
    default_x: np.ndarray
    default_y: np.ndarray
    base_box: tuple = (-1.0, 1.0)
    observers: Dict[str, Callable[[State], float]] = field(default_factory=dict)

    @cached_property
    def reduction(self):
        """``(reduced algebroid, restricted Lagrangian, orthogonal projector)``."""
        return reduced_system(self.algebroid, self.lagrangian, self.subbundle)

    @property
    def reduced(self):
        return self.reduction[0]

    @property
    def restricted(self):
        return self.reduction[1]

    @property
    def projector(self):
        return self.reduction[2]

    def base_samples(self, count, seed=0):
        n = self.algebroid.base_dim
        if n == 0:
            return [np.zeros(0)] * count
        rng = np.random.default_rng(seed)
        lo, hi = (np.broadcast_to(np.asarray(b, dtype=float), (n,)) for b in self.base_box)
        return list(rng.uniform(lo, hi, size=(count, n)))

    def sample_states(self, count, seed=0, radius=2.0):
        """Random states on ``D``: base uniform in ``base_box``, ``y`` uniform in a ball."""
        rng = np.random.default_rng(seed)
        k = self.subbundle.k
        xs = self.base_samples(count, seed=seed + 1)
        out = []
        for x in xs:
            d = rng.normal(size=k)
            d /= np.linalg.norm(d)
            out.append(State(x, radius * rng.uniform() ** (1.0 / k) * d))
        return out

    def energy(self, s: State) -> float:
        return energy(self.restricted, s)


@dataclass
class SystemDescriptor:
    name: str
    parameters: Dict[str, Param]
    build_fn: Callable[..., System]
    doc: str = ""

    def resolve(self, overrides=None) -> Dict[str, float]:
        overrides = dict(overrides or {})
        unknown = set(overrides) - set(self.parameters)
        if unknown:
            raise InvalidParameterError(f"unknown parameter(s) for {self.name}: {sorted(unknown)}")
        values = {}
        for pname, p in self.parameters.items():
            v = overrides.get(pname, p.default)
            if v is not None:
                v = p.kind(v)
                if not (p.low <= v <= p.high):
                    raise InvalidParameterError(f"{self.name}: {pname}={v} outside [{p.low}, {p.high}]")
            values[pname] = v
        return values

    def build(self, **overrides) -> System:
        system = self.build_fn(**self.resolve(overrides))
        validate_system(system)
        return system


def validate_system(system: System, count=20):
    """Check SPD metric, full-rank constraint basis and any quasi-Lie claim at sample points."""
    A = system.algebroid
    pts = system.base_samples(count, seed=123)
    for x in pts:
        cholesky_spd(system.lagrangian.G(x))
        system.subbundle.B(x)
    if A.is_quasi_lie and not check_skew(A, pts, tol=1e-10).is_skew:
        raise InvalidParameterError(f"{system.name}: claimed quasi-Lie ambient is not skew")


# -- Chaplygin sleigh ---------------------------------------------------------

SE2_BRACKETS = {(2, 0): (1, 1.0), (1, 2): (0, 1.0)}  # [E3,E1]=E2, [E2,E3]=E1 (0-based)


def se2_structure_constants() -> np.ndarray:
    """``C[c, a, b]`` for se(2) in the basis (E1, E2, E3)."""
    C = np.zeros((3, 3, 3))
    for (a, b), (c, val) in SE2_BRACKETS.items():
        C[c, a, b] = val
        C[c, b, a] = -val
    return C


def sleigh_metric(m, J, a, b) -> np.ndarray:
    """Mass matrix in (v1, v2, omega) for contact point at the origin, CoM at ``(a, b)``.

    Kinetic energy ``1/2 m |(v1 - b w, v2 + a w)|^2 + 1/2 J w^2``.
    """
    return np.array([
        [m, 0.0, -b * m],
        [0.0, m, a * m],
        [-b * m, a * m, J + m * (a * a + b * b)],
    ])


def chaplygin_sleigh(m=1.0, J=1.0, a=1.0, b=0.0) -> System:
    """Chaplygin sleigh on se(2) with the knife-edge constraint ``v2 = 0``.

    ``D`` has basis ``(e1, e2) = (E3, E1)``; reduced coordinates are
    ``(y1, y2) = (omega, v1)``.
    """
    if m <= 0 or J <= 0:
        raise InvalidParameterError("chaplygin_sleigh needs m > 0 and J > 0")
    A = Algebroid.lie_algebra(se2_structure_constants(), name="se2")
    L = MechanicalLagrangian(SmoothMap.constant(sleigh_metric(m, J, a, b), 0))
    B = np.array([[0.0, 1.0], [0.0, 0.0], [1.0, 0.0]])
    return System(
        "chaplygin_sleigh", dict(m=m, J=J, a=a, b=b), A, L, Subbundle.constant(A, B),
        base_names=[], default_x=np.zeros(0), default_y=np.array([1.0, 1.0]),
    )


def sleigh_closed_form(m, J, a, b, y) -> np.ndarray:
    """Reduced sleigh field from the 2x2 system ``G_D ydot = (-m a y1 y2, m a y1^2)``."""
    y1, y2 = y
    K = J + m * a * a
    return np.array([
        m * a / K * y1 * (b * y1 - y2),
        a / K * y1 * ((J + m * (a * a + b * b)) * y1 - b * m * y2),
    ])


# -- snakeboard ---------------------------------------------------------------

SNAKEBOARD_COORDS = ["x", "y", "theta", "psi", "phi"]


def snakeboard_J(m, J0, J1, r) -> float:
    """Board inertia ``J`` solving ``J + J0 + 2 J1 = m r^2``."""
    return m * r * r - J0 - 2.0 * J1


def snakeboard_metric(m, J0, J1, r) -> np.ndarray:
    G = np.diag([m, m, m * r * r, J0, 2.0 * J1])
    G[2, 3] = G[3, 2] = J0
    return G


def snakeboard_basis(r) -> SmoothMap:
    """Constraint frame ``(d_psi, d_phi, a d_x + b d_y + c d_theta)`` with analytic partials."""

    def value(q):
        th, ph = q[2], q[4]
        cc = np.cos(ph) ** 2
        B = np.zeros((5, 3))
        B[3, 0] = 1.0
        B[4, 1] = 1.0
        B[:3, 2] = (-2 * r * cc * np.cos(th), -2 * r * cc * np.sin(th), np.sin(2 * ph))
        return B

    def partial(q, i):
        th, ph = q[2], q[4]
        B = np.zeros((5, 3))
        if i == 2:
            cc = np.cos(ph) ** 2
            B[:2, 2] = (2 * r * cc * np.sin(th), -2 * r * cc * np.cos(th))
        elif i == 4:
            s2 = np.sin(2 * ph)
            B[:3, 2] = (2 * r * s2 * np.cos(th), 2 * r * s2 * np.sin(th), 2 * np.cos(2 * ph))
        return B

    return SmoothMap(value, 5, (5, 3), partial=partial)


def snakeboard(m=1.0, J=None, J0=0.3, J1=0.1, r=1.0, analytic=True) -> System:
    """Snakeboard with the inertia relation ``J + J0 + 2 J1 = m r^2`` enforced.

    ``J=None`` solves the relation for ``J``. With ``analytic=False`` the
    constraint frame is differentiated by finite differences.
    """
    if J is None:
        J = snakeboard_J(m, J0, J1, r)
    for pname, v in dict(m=m, J=J, J0=J0, J1=J1, r=r).items():
        if not v > 0:
            raise InvalidParameterError(f"snakeboard needs {pname} > 0, got {v}")
    mismatch = J + J0 + 2 * J1 - m * r * r
    if abs(mismatch) > 1e-12 * max(1.0, m * r * r):
        raise InvalidParameterError(
            f"snakeboard needs J + J0 + 2*J1 = m*r**2; got {J} + {J0} + 2*{J1} - {m}*{r}**2 = {mismatch:.3e}"
        )
    A = Algebroid.tangent_bundle(5, name="T(SE2xT2)")
    L = MechanicalLagrangian(SmoothMap.constant(snakeboard_metric(m, J0, J1, r), 5))
    basis = snakeboard_basis(r)
    if not analytic:
        basis = basis.without_partials()
    observers = {
        "y2": lambda s: float(s.y[1]),
        "y1_plus_c_y3": lambda s: float(s.y[0] + np.sin(2 * s.x[4]) * s.y[2]),
    }
    return System(
        "snakeboard", dict(m=m, J=J, J0=J0, J1=J1, r=r), A, L, Subbundle(A, basis),
        base_names=list(SNAKEBOARD_COORDS),
        default_x=np.array([0.0, 0.0, 0.0, 0.0, 0.3]),
        default_y=np.array([0.5, 0.05, 1.0]),
        base_box=([-3.0, -3.0, -3.0, -3.0, -1.2], [3.0, 3.0, 3.0, 3.0, 1.2]),
        observers=observers,
    )


def snakeboard_structure_variant(m, J0, r, phi):
    """``(C^1_23, C^3_23)`` variant without ``J0`` on ``cos 2 phi``, kept for comparison."""
    mr2 = m * r * r
    den = mr2 - J0 * np.sin(phi) ** 2
    return 2 * mr2 * np.cos(phi) ** 2 / den, -(mr2 + np.cos(2 * phi)) * np.tan(phi) / den


def snakeboard_structure_closed_form(m, J0, r, phi):
    """``(C^1_23, C^3_23)`` from solving the projection by hand (``J0`` multiplies ``cos 2 phi``)."""
    mr2 = m * r * r
    den = mr2 - J0 * np.sin(phi) ** 2
    return 2 * mr2 * np.cos(phi) ** 2 / den, -(mr2 + J0 * np.cos(2 * phi)) * np.tan(phi) / den


# -- extras for tests ---------------------------------------------------------

def free_particle(n=2) -> System:
    """Unit-mass particle on ``R^n``; ``D`` is the whole tangent bundle."""
    n = int(n)
    A = Algebroid.tangent_bundle(n, name=f"TR{n}")
    L = MechanicalLagrangian(SmoothMap.constant(np.eye(n), n))
    return System("free_particle", dict(n=n), A, L, Subbundle.constant(A, np.eye(n)),
                  base_names=[f"q{i + 1}" for i in range(n)],
                  default_x=np.zeros(n), default_y=np.ones(n))


def quadratic_potential(n) -> SmoothMap:
    return SmoothMap(lambda x: 0.5 * float(x @ x), n, (), partial=lambda x, i: x[i])


def harmonic_oscillator(n=1) -> System:
    """``L = 1/2 |v|^2 - 1/2 |x|^2`` on ``R^n``; period ``2 pi``."""
    n = int(n)
    A = Algebroid.tangent_bundle(n, name=f"TR{n}")
    L = MechanicalLagrangian(SmoothMap.constant(np.eye(n), n), quadratic_potential(n))
    return System("harmonic_oscillator", dict(n=n), A, L, Subbundle.constant(A, np.eye(n)),
                  base_names=[f"q{i + 1}" for i in range(n)],
                  default_x=np.ones(n), default_y=np.zeros(n))


def _skew(T):
    return T - np.swapaxes(T, -1, -2)


def random_quasi_lie(dim=5, rank_D=2, seed=0, base_dim=2, analytic=True) -> System:
    """Seeded random quasi-Lie system with analytic partials.

    Over ``R^n`` (``n = base_dim``) with bundle rank ``m = dim``:

    * ``rho = sigma = R0 + sum_i x_i R_i``
    * ``C = C0 + sum_i sin(x_i) C_i`` with every ``C`` skew in ``(a, b)``
    * ``G = G0 + sum_i sin(x_i)^2 S_i``, ``G0 = M M^T / m + I``, ``S_i`` PSD
    * ``V = sum_i k_i (1 - cos x_i)``
    * ``B = B0 + sum_i sin(x_i) B_i`` (``m x k``), ``B0`` with orthonormal
      columns (Q factor of a normal draw) so ``B`` stays well conditioned

    All draws are standard normal (perturbations scaled by 0.3 or 0.2) from
    ``numpy.random.default_rng(seed)``; ``k_i`` is uniform in ``[0.5, 2]``.
    The Jacobi identity generally fails, so this is a quasi-Lie algebroid.
    ``analytic=False`` drops every partial so finite differences are used.
    """
    m, k, n = int(dim), int(rank_D), int(base_dim)
    if not 0 < k <= m:
        raise InvalidParameterError("random_quasi_lie needs 0 < rank_D <= dim")
    rng = np.random.default_rng(int(seed))
    R0 = rng.normal(size=(n, m))
    R = 0.3 * rng.normal(size=(n, n, m))
    C0 = _skew(rng.normal(size=(m, m, m))) / 2
    Cs = 0.3 * _skew(rng.normal(size=(n, m, m, m))) / 2 if n else np.zeros((0, m, m, m))
    M = rng.normal(size=(m, m))
    G0 = M @ M.T / m + np.eye(m)
    Ns = rng.normal(size=(n, m, m))
    S = 0.2 * np.einsum("iab,icb->iac", Ns, Ns) / m
    kappa = rng.uniform(0.5, 2.0, size=n)
    B0 = np.linalg.qr(rng.normal(size=(m, k)))[0]
    Bs = 0.2 * rng.normal(size=(n, m, k))

    rho = SmoothMap(lambda x: R0 + np.einsum("i,iam->am", x, R), n, (n, m), partial=lambda x, i: R[i])
    C = SmoothMap(lambda x: C0 + np.einsum("i,icab->cab", np.sin(x), Cs), n, (m, m, m),
                  partial=lambda x, i: np.cos(x[i]) * Cs[i])
    G = SmoothMap(lambda x: G0 + np.einsum("i,iab->ab", np.sin(x) ** 2, S), n, (m, m),
                  partial=lambda x, i: np.sin(2 * x[i]) * S[i])
    V = SmoothMap(lambda x: float(kappa @ (1 - np.cos(x))), n, (), partial=lambda x, i: kappa[i] * np.sin(x[i]))
    B = SmoothMap(lambda x: B0 + np.einsum("i,iak->ak", np.sin(x), Bs), n, (m, k),
                  partial=lambda x, i: np.cos(x[i]) * Bs[i])
    if not analytic:
        rho, C, G, V, B = (f.without_partials() for f in (rho, C, G, V, B))
    A = Algebroid(n, m, rho, rho, C, is_quasi_lie=True, name=f"random{m}")
    rng_state = np.random.default_rng(int(seed) + 7919)
    return System(
        "random_quasi_lie", dict(dim=m, rank_D=k, seed=int(seed), base_dim=n, analytic=bool(analytic)), A,
        MechanicalLagrangian(G, V), Subbundle(A, B),
        base_names=[f"q{i + 1}" for i in range(n)],
        default_x=np.zeros(n), default_y=rng_state.normal(size=k),
    )


REGISTRY: Dict[str, SystemDescriptor] = {}


def register(descriptor: SystemDescriptor):
    REGISTRY[descriptor.name] = descriptor
    return descriptor


register(SystemDescriptor(
    "chaplygin_sleigh",
    {"m": Param(1.0, 1e-12, np.inf, doc="mass"),
     "J": Param(1.0, 1e-12, np.inf, doc="inertia about the contact point"),
     "a": Param(1.0, doc="CoM offset along the knife edge"),
     "b": Param(0.0, doc="CoM offset across the knife edge")},
    chaplygin_sleigh,
    "rigid body on a plane with a knife edge; Lie algebra se(2)",
))
register(SystemDescriptor(
    "snakeboard",
    {"m": Param(1.0, 1e-12, np.inf, doc="board mass"),
     "J": Param(None, 1e-12, np.inf, doc="board inertia (default: m r^2 - J0 - 2 J1)"),
     "J0": Param(0.3, 1e-12, np.inf, doc="rotor inertia"),
     "J1": Param(0.1, 1e-12, np.inf, doc="wheel-axle inertia"),
     "r": Param(1.0, 1e-12, np.inf, doc="half length of the board"),
     "analytic": Param(1, 0, 1, int, doc="1 = analytic frame partials, 0 = finite differences")},
    snakeboard,
    "snakeboard on SE(2) x T^2 with two wheel constraints",
))
register(SystemDescriptor(
    "free_particle", {"n": Param(2, 1, 64, int)}, free_particle, "unconstrained unit mass",
))
register(SystemDescriptor(
    "harmonic_oscillator", {"n": Param(1, 1, 64, int)}, harmonic_oscillator, "unit oscillator, no constraint",
))
register(SystemDescriptor(
    "random_quasi_lie",
    {"dim": Param(5, 1, 12, int), "rank_D": Param(2, 1, 12, int),
     "seed": Param(0, 0, 2**31 - 1, int), "base_dim": Param(2, 0, 6, int),
     "analytic": Param(1, 0, 1, int, doc="1 = analytic partials, 0 = finite differences")},
    random_quasi_lie,
    "seeded random quasi-Lie algebroid with metric, potential and constraint",
))


def get_system(name, **overrides) -> System:
    try:
        descriptor = REGISTRY[name]
    except KeyError:
        raise KeyError(f"unknown system {name!r}; known: {sorted(REGISTRY)}") from None
    return descriptor.build(**overrides)
