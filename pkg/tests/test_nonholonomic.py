import numpy as np
import pytest
from scipy.linalg import null_space, subspace_angles

from nonholo.algebroid import Algebroid, check_lie, check_skew, eval_structure
from nonholo.errors import DegenerateConstraintError, DimensionError
from nonholo.mechanics import MechanicalLagrangian, State, el_vector_field
from nonholo.nonholonomic import (
    Subbundle,
    complete_frame,
    nilpotent_double,
    nonholonomic_el_vector_field,
    oblique_projector,
    orthogonal_projector,
    reduce_algebroid,
    restricted_lagrangian,
    verify_theorem_5_1,
)
from nonholo.smooth import SmoothMap
from nonholo.systems import REGISTRY, chaplygin_sleigh, get_system, random_quasi_lie, snakeboard


@pytest.mark.parametrize("name", sorted(REGISTRY))
def test_projector_invariants(name):
    system = get_system(name)
    P = system.projector
    G = system.lagrangian.metric
    D = system.subbundle
    for x in system.base_samples(100, seed=3):
        Px, Gx, B = P(x), G.value(x), D.B(x)
        assert np.allclose(Px @ Px, Px, atol=1e-10)
        assert np.allclose(Px @ B, B, atol=1e-10)
        assert np.allclose(Gx @ Px, Px.T @ Gx, atol=1e-10)


def test_projector_trivial_cases():
    A = Algebroid.tangent_bundle(3)
    I3 = SmoothMap.constant(np.eye(3), 3)
    P = orthogonal_projector(I3, Subbundle.constant(A, np.eye(3)[:, :2]))
    assert np.allclose(P(np.zeros(3)), np.diag([1, 1, 0]))
    P = orthogonal_projector(I3, Subbundle.constant(A, np.eye(3)))
    assert np.allclose(P(np.zeros(3)), np.eye(3))


def test_sleigh_projector_kills_complement():
    m, J, a, b = 1.0, 1.0, 1.0, 1.0
    system = chaplygin_sleigh(m, J, a, b)
    K = J + m * a * a
    e3 = np.array([-m * a * b, K, -m * a])  # components on (E1, E2, E3)
    assert np.allclose(system.projector([]) @ e3, 0, atol=1e-12)


def test_sleigh_restricted_metric():
    l = chaplygin_sleigh(1.0, 1.0, 1.0, 1.0).restricted
    assert np.allclose(l.G([]), [[3.0, -1.0], [-1.0, 1.0]])


def test_restricted_metric_trivial_cases(rng):
    A = Algebroid.tangent_bundle(3)
    M = rng.normal(size=(3, 3))
    G = M @ M.T + np.eye(3)
    L = MechanicalLagrangian(SmoothMap.constant(G, 3))
    assert np.allclose(restricted_lagrangian(L, Subbundle.constant(A, np.eye(3))).G(np.zeros(3)), G)
    B = np.linalg.inv(np.linalg.cholesky(G)).T[:, :2]  # G-orthonormal columns
    assert np.allclose(restricted_lagrangian(L, Subbundle.constant(A, B)).G(np.zeros(3)), np.eye(2))


def test_degenerate_constraint_rejected():
    A = Algebroid.tangent_bundle(3)
    D = Subbundle.constant(A, np.array([[1.0, 2.0], [0.0, 0.0], [1.0, 2.0]]))
    with pytest.raises(DegenerateConstraintError):
        D.B(np.zeros(3))


def test_complete_frame_examples():
    A = Algebroid.tangent_bundle(2)
    N = complete_frame(SmoothMap.constant(np.eye(2), 2), Subbundle.constant(A, np.eye(2)[:, :1]), np.zeros(2))
    assert np.allclose(N, [[0.0], [1.0]])


@pytest.mark.parametrize("name", ["chaplygin_sleigh", "snakeboard", "random_quasi_lie"])
def test_complete_frame_orthonormal(name):
    system = get_system(name)
    G = system.lagrangian.metric
    for x in system.base_samples(10, seed=1):
        B, Gx = system.subbundle.B(x), G.value(x)
        N = complete_frame(G, system.subbundle, x)
        assert np.allclose(B.T @ Gx @ N, 0, atol=1e-10)
        assert np.allclose(N.T @ Gx @ N, np.eye(N.shape[1]), atol=1e-10)
        ref = null_space((Gx @ B).T)
        assert np.max(subspace_angles(N, ref)) < 1e-8


def test_sleigh_reduced_structure():
    red = chaplygin_sleigh().reduced
    C = red.C.value([])
    assert C[0, 0, 1] == pytest.approx(0.5, abs=1e-12)
    assert C[1, 0, 1] == pytest.approx(0.0, abs=1e-12)


def test_snakeboard_structure_at_zero_angle():
    red = snakeboard().reduced
    C = red.C.value(np.zeros(5))
    nz = {tuple(i) for i in np.argwhere(np.abs(C) > 1e-12)}
    assert nz <= {(0, 1, 2), (0, 2, 1)}
    assert C[0, 1, 2] == pytest.approx(2.0, abs=1e-9)
    x = np.array([0.1, -0.2, 0.5, 0.3, 0.7])
    nz = {tuple(i) for i in np.argwhere(np.abs(red.C.value(x)) > 1e-12)}
    assert nz <= {(0, 1, 2), (0, 2, 1), (2, 1, 2), (2, 2, 1)}


def test_snakeboard_reduced_anchor():
    red = snakeboard(r=1.0).reduced
    x = np.array([0.0, 0.0, 0.4, 0.0, 0.3])
    th, ph = x[2], x[4]
    a = -2 * np.cos(ph) ** 2 * np.cos(th)
    b = -2 * np.cos(ph) ** 2 * np.sin(th)
    c = np.sin(2 * ph)
    y = np.array([0.3, -1.1, 0.7])
    assert np.allclose(red.rho.value(x) @ y, [a * y[2], b * y[2], c * y[2], y[0], y[1]])


def test_unconstrained_direct_route_is_plain_el(rng):
    system = get_system("random_quasi_lie", dim=4, rank_D=4, seed=2)
    A, L = system.algebroid, system.lagrangian
    D = Subbundle.constant(A, np.eye(4))
    for s in system.sample_states(10):
        x = s.x
        direct = np.concatenate(nonholonomic_el_vector_field(A, L, D, s))
        plain = np.concatenate(el_vector_field(A, L, State(x, s.y)))
        assert np.allclose(direct, plain, atol=1e-9)


def test_direct_route_sleigh_spot_value():
    system = chaplygin_sleigh()
    xdot, ydot = nonholonomic_el_vector_field(system.algebroid, system.lagrangian, system.subbundle,
                                              State([], [1.0, 1.0]))
    assert np.allclose(ydot, [-0.5, 1.0], atol=1e-12)


def test_direct_route_snakeboard_first_integrals():
    system = snakeboard()
    A, L, D = system.algebroid, system.lagrangian, system.subbundle
    rng = np.random.default_rng(11)
    for _ in range(20):
        x = np.array([*rng.uniform(-2, 2, size=4), 0.2])
        y = rng.normal(size=3)
        _, ydot = nonholonomic_el_vector_field(A, L, D, State(x, y))
        ph = x[4]
        assert abs(ydot[1]) <= 1e-9
        rate = ydot[0] + 2 * np.cos(2 * ph) * y[1] * y[2] + np.sin(2 * ph) * ydot[2]
        assert abs(rate) <= 1e-9


def test_theorem_5_1_sleigh():
    s = chaplygin_sleigh(1.3, 0.7, 0.4, -0.6)
    rep = verify_theorem_5_1(s.algebroid, s.lagrangian, s.subbundle, s.sample_states(500), 1e-10)
    assert rep.passed and rep.n_samples == 500


def test_theorem_5_1_snakeboard_fd():
    s = snakeboard(analytic=False)
    rep = verify_theorem_5_1(s.algebroid, s.lagrangian, s.subbundle, s.sample_states(500, seed=4), 1e-5)
    assert rep.passed


def test_theorem_5_1_random_lie_algebra(rng):
    m, k = 5, 2
    c = rng.normal(size=(m, m, m))
    A = Algebroid.lie_algebra(c - np.swapaxes(c, 1, 2))
    M = rng.normal(size=(m, m))
    L = MechanicalLagrangian(SmoothMap.constant(M @ M.T + np.eye(m), 0))
    D = Subbundle.constant(A, rng.normal(size=(m, k)))
    samples = [State([], rng.normal(size=k)) for _ in range(200)]
    assert verify_theorem_5_1(A, L, D, samples, 1e-8).passed


def test_skew_preserved_by_reduction():
    for seed in range(5):
        s = random_quasi_lie(5, 3, seed)
        pts = s.base_samples(10)
        rep = check_skew(s.reduced, pts, tol=1e-10)
        assert rep.is_skew and rep.max_anchor_violation == 0.0


def _closed_subbundle():
    # columns d1 and x3 d1 + d2 commute, so D is bracket-closed
    A = Algebroid.tangent_bundle(3)
    B = SmoothMap(lambda x: np.array([[1.0, x[2]], [0.0, 1.0], [0.0, 0.0]]), 3, (3, 2))
    return A, Subbundle(A, B)


def test_holonomic_independence():
    A, D = _closed_subbundle()
    G = SmoothMap(lambda x: np.diag([1.0 + x[0] ** 2, 2.0, 1.0 + np.sin(x[1]) ** 2]), 3, (3, 3))
    P1 = orthogonal_projector(G, D)
    comp = SmoothMap(lambda x: np.array([[0.3 + 0.1 * x[1]], [-0.7], [1.0]]), 3, (3, 1))
    P2 = oblique_projector(D, comp)
    r1, r2 = reduce_algebroid(A, D, P1), reduce_algebroid(A, D, P2)
    for x in np.random.default_rng(0).uniform(-1, 1, size=(20, 3)):
        assert np.allclose(r1.C.value(x), r2.C.value(x), atol=1e-8)


def test_oblique_projector_rejects_tangent_complement():
    A, D = _closed_subbundle()
    P = oblique_projector(D, SmoothMap.constant(np.array([[1.0], [0.0], [0.0]]), 3))
    with pytest.raises(DegenerateConstraintError):
        P(np.zeros(3))
    with pytest.raises(DimensionError):
        oblique_projector(D, SmoothMap.constant(np.zeros((3, 2)), 3))


def _so3():
    eps = np.zeros((3, 3, 3))
    for (i, j, k) in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
        eps[k, i, j], eps[k, j, i] = 1.0, -1.0
    return eps


@pytest.mark.parametrize("which", ["zero", "two", "so3"])
def test_nilpotent_double_examples(which):
    if which == "zero":
        c = np.zeros((3, 3, 3))
    elif which == "two":
        c = np.zeros((2, 2, 2))
        c[0, 0, 1], c[0, 1, 0] = 1.0, -1.0
    else:
        c = _so3()
    nd = nilpotent_double(c)
    assert check_lie(nd.E, []).max_jacobiator <= 1e-12
    assert np.allclose(nd.P, nd.projector([]), atol=1e-14)
    assert np.allclose(nd.reduce().C.value([]), c, atol=1e-12)


def test_nilpotent_double_rejects_non_skew():
    with pytest.raises(DimensionError):
        nilpotent_double(np.ones((2, 2, 2)))
