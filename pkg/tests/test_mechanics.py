import numpy as np
import pytest

from nonholo.algebroid import Algebroid
from nonholo.errors import DimensionError, NonFiniteStateError, SingularMetricError
from nonholo.mechanics import (
    MechanicalLagrangian,
    State,
    cholesky_spd,
    el_vector_field,
    energy,
    legendre,
    tulczyjew_differential,
)
from nonholo.nonholonomic import Subbundle, reduced_system
from nonholo.smooth import SmoothMap
from nonholo.systems import chaplygin_sleigh, get_system, se2_structure_constants, sleigh_metric


def flat(n, metric=None, potential=None):
    G = metric if metric is not None else SmoothMap.constant(np.eye(n), n)
    return MechanicalLagrangian(G, potential)


def test_legendre_examples():
    L = flat(2)
    assert np.allclose(legendre(L, State([0, 0], [2, -1])), [2, -1])
    assert np.allclose(legendre(L, State([0, 0], [0, 0])), 0)
    l = chaplygin_sleigh().restricted
    assert np.allclose(l.G([]), np.diag([2.0, 1.0]))
    assert np.allclose(legendre(l, State([], [1, 1])), [2, 1])


def test_singular_metric_rejected():
    L = flat(2, SmoothMap.constant(np.diag([1.0, 0.0]), 2))
    with pytest.raises(SingularMetricError):
        legendre(L, State([0, 0], [1, 1]))
    with pytest.raises(SingularMetricError):
        cholesky_spd(np.array([[1.0, 2.0], [0.0, 1.0]]))


def test_bad_states_rejected():
    A = Algebroid.tangent_bundle(2)
    with pytest.raises(DimensionError):
        el_vector_field(A, flat(2), State([0, 0, 0], [1, 1]))
    with pytest.raises(NonFiniteStateError):
        el_vector_field(A, flat(2), State([0, np.nan], [1, 1]))


def test_tulczyjew_force_free():
    n = 2
    z = SmoothMap.constant(np.zeros((n, n)), n)
    rho = SmoothMap(lambda x: np.array([[1.0, x[0]], [0.0, 1.0]]), n, (n, n))
    A = Algebroid(n, n, rho, z, SmoothMap.constant(np.zeros((n, n, n)), n))
    x, y = np.array([0.5, 1.0]), np.array([2.0, -3.0])
    pp = tulczyjew_differential(A, flat(n), State(x, y))
    assert np.allclose(pp.xi, y)
    assert np.allclose(pp.xdot, rho.value(x) @ y)
    assert np.allclose(pp.xidot, 0)


def test_tulczyjew_se2_brute_force():
    A = Algebroid.lie_algebra(se2_structure_constants())
    L = MechanicalLagrangian(SmoothMap.constant(sleigh_metric(1.0, 1.0, 0.0, 0.0), 0))
    y = np.array([1.0, 0.0, 1.0])
    pp = tulczyjew_differential(A, L, State([], y))
    C = se2_structure_constants()
    xi = y.copy()
    ref = np.zeros(3)
    for b in range(3):
        for a in range(3):
            for c in range(3):
                ref[b] += C[c, a, b] * y[a] * xi[c]
    assert np.allclose(pp.xidot, ref)
    assert np.allclose(pp.xidot, [0.0, -1.0, 0.0])


def test_oscillator_field():
    A = Algebroid.tangent_bundle(2)
    V = SmoothMap(lambda x: 0.5 * float(x @ x), 2, (), partial=lambda x, i: x[i])
    x, y = np.array([0.3, -0.7]), np.array([1.5, 0.2])
    xdot, ydot = el_vector_field(A, flat(2, potential=V), State(x, y))
    assert np.allclose(xdot, y) and np.allclose(ydot, -x)


def test_zero_algebroid_is_static():
    z = SmoothMap.constant(np.zeros((2, 2)), 2)
    A = Algebroid(2, 2, z, z, SmoothMap.constant(np.zeros((2, 2, 2)), 2))
    V = SmoothMap(lambda x: float(np.sin(x[0])), 2, ())
    xdot, ydot = el_vector_field(A, flat(2, potential=V), State([0.1, 0.2], [1.0, 2.0]))
    assert np.allclose(xdot, 0) and np.allclose(ydot, 0)


def test_sleigh_reduced_field():
    red, l, _ = chaplygin_sleigh().reduction
    xdot, ydot = el_vector_field(red, l, State([], [1.0, 1.0]))
    assert xdot.size == 0
    assert np.allclose(ydot, [-0.5, 1.0], atol=1e-12)


def test_energy_examples():
    assert energy(flat(2), State([0, 0], [3, 4])) == pytest.approx(12.5)
    V = SmoothMap(lambda x: 1.0 + x[0], 2, ())
    assert energy(flat(2, potential=V), State([2.0, 0.0], [0, 0])) == pytest.approx(3.0)
    assert energy(chaplygin_sleigh().restricted, State([], [1, 1])) == pytest.approx(1.5)


def _classical_ydot(Lfun, x, v, h=1e-4):
    """Classical Euler-Lagrange acceleration from finite-difference Hessians of L(x, v)."""
    n = x.size
    z = np.concatenate([x, v])

    def grad(zz):
        g = np.zeros(2 * n)
        for k in range(2 * n):
            e = np.zeros(2 * n)
            e[k] = h
            g[k] = (Lfun(zz + e) - Lfun(zz - e)) / (2 * h)
        return g

    H = np.zeros((2 * n, 2 * n))
    for k in range(2 * n):
        e = np.zeros(2 * n)
        e[k] = h
        H[:, k] = (grad(z + e) - grad(z - e)) / (2 * h)
    Mvv = H[n:, n:]
    Mvx = H[n:, :n]
    return np.linalg.solve(Mvv, grad(z)[:n] - Mvx @ v)


def test_flat_case_matches_classical_euler_lagrange():
    n = 2
    G = SmoothMap(lambda x: np.array([[2.0 + np.sin(x[0]), 0.3 * x[1]], [0.3 * x[1], 1.5 + x[0] ** 2]]), n, (n, n))
    V = SmoothMap(lambda x: float(np.cos(x[0]) + 0.5 * x[1] ** 2), n, ())
    L = MechanicalLagrangian(G, V)
    A = Algebroid.tangent_bundle(n)
    x, v = np.array([0.4, -0.6]), np.array([1.1, 0.3])
    _, ydot = el_vector_field(A, L, State(x, v))
    ref = _classical_ydot(lambda z: L(z[:n], z[n:]), x, v)
    assert np.allclose(ydot, ref, atol=1e-5)


def _energy_rate(A, L, s):
    xdot, ydot = el_vector_field(A, L, s)
    x, y = s.x, s.y
    dE_dy = L.G(x) @ y
    dE_dx = 0.5 * np.einsum("iab,a,b->i", L.dG(x), y, y) + L.dV(x) if x.size else np.zeros(0)
    return float(dE_dx @ xdot + dE_dy @ ydot)


@pytest.mark.parametrize("name", ["chaplygin_sleigh", "snakeboard"])
def test_reduced_energy_conservation(name):
    system = get_system(name)
    red, l, _ = system.reduction
    for s in system.sample_states(200, seed=5):
        rate = _energy_rate(red, l, s)
        assert abs(rate) <= 1e-9 * (1 + abs(energy(l, s)))


def test_reduced_energy_conservation_random_lie_algebra(rng):
    m, k = 5, 2
    c = rng.normal(size=(m, m, m))
    c = c - np.swapaxes(c, 1, 2)
    A = Algebroid.lie_algebra(c)
    M = rng.normal(size=(m, m))
    L = MechanicalLagrangian(SmoothMap.constant(M @ M.T + np.eye(m), 0))
    D = Subbundle.constant(A, rng.normal(size=(m, k)))
    red, l, _ = reduced_system(A, L, D)
    for _ in range(200):
        s = State([], rng.normal(size=k))
        assert abs(_energy_rate(red, l, s)) <= 1e-9 * (1 + abs(energy(l, s)))
