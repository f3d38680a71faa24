import numpy as np
import pytest

from nonholo.errors import InvalidParameterError
from nonholo.integrator import drift_report, integrate
from nonholo.mechanics import State, el_field, el_vector_field
from nonholo.nonholonomic import verify_theorem_5_1
from nonholo.systems import (
    REGISTRY,
    chaplygin_sleigh,
    free_particle,
    get_system,
    harmonic_oscillator,
    random_quasi_lie,
    sleigh_closed_form,
    snakeboard,
    snakeboard_J,
)


def test_registry_contents():
    assert {"chaplygin_sleigh", "snakeboard"} <= set(REGISTRY)
    for name in REGISTRY:
        s = get_system(name)
        assert s.subbundle.k == s.default_y.size
        assert s.algebroid.base_dim == s.default_x.size


def test_sleigh_a_zero_is_free_drift():
    s = chaplygin_sleigh(2.0, 1.5, 0.0, 0.7)
    assert np.allclose(s.reduced.C.value([]), 0)
    _, ydot = el_vector_field(s.reduced, s.restricted, State([], [1.3, -0.4]))
    assert np.allclose(ydot, 0)


def test_sleigh_relative_equilibrium():
    # pure rotation about the contact point with b = 0 is stationary only when y1 = 0
    s = chaplygin_sleigh(1.0, 1.0, 1.0, 0.0)
    _, ydot = el_vector_field(s.reduced, s.restricted, State([], [0.0, 2.0]))
    assert np.allclose(ydot, 0)
    assert np.allclose(sleigh_closed_form(1, 1, 1, 0, [0.0, 2.0]), 0)


def test_sleigh_converges_to_straight_motion():
    s = chaplygin_sleigh()
    traj = integrate(el_field(s.reduced, s.restricted), State([], [1.0, 0.0]), 1e-2, 30.0)
    end = traj.states[-1].y
    assert abs(end[0]) < 1e-3 and end[1] > 0
    assert end[1] == pytest.approx(np.sqrt(2 * s.energy(traj.states[0])), rel=1e-6)


@pytest.mark.parametrize("kwargs", [dict(m=-1.0), dict(J=0.0)])
def test_sleigh_rejects_bad_masses(kwargs):
    with pytest.raises(InvalidParameterError):
        chaplygin_sleigh(**kwargs)


def test_snakeboard_inertia_relation():
    assert snakeboard_J(1.0, 0.3, 0.1, 1.0) == pytest.approx(0.5)
    s = snakeboard(J=0.5)
    assert s.params["J"] == 0.5
    with pytest.raises(InvalidParameterError, match=r"J \+ J0 \+ 2\*J1 = m\*r\*\*2"):
        snakeboard(J=0.6)
    with pytest.raises(InvalidParameterError):
        snakeboard(J0=-0.3)


def test_snakeboard_conservation():
    s = snakeboard()
    traj = integrate(el_field(s.reduced, s.restricted), State(s.default_x, s.default_y), 1e-2, 5.0, s.observers)
    drift = drift_report(traj)
    assert drift["y2"] <= 1e-9
    assert drift["y1_plus_c_y3"] <= 1e-7


def test_free_particle_and_oscillator():
    p = free_particle(3)
    xdot, ydot = el_vector_field(p.reduced, p.restricted, State([1, 2, 3], [0.5, -1, 2]))
    assert np.allclose(xdot, [0.5, -1, 2]) and np.allclose(ydot, 0)
    o = harmonic_oscillator(1)
    n = 2000
    traj = integrate(el_field(o.reduced, o.restricted), State([1.0], [0.0]), 2 * np.pi / n, 2 * np.pi)
    assert abs(traj.states[-1].x[0] - 1.0) < 1e-10


def test_random_system_is_deterministic_and_passes_theorem():
    a, b = random_quasi_lie(4, 2, 7), random_quasi_lie(4, 2, 7)
    x = np.array([0.3, -0.2])
    assert np.array_equal(a.reduced.C.value(x), b.reduced.C.value(x))
    rep = verify_theorem_5_1(a.algebroid, a.lagrangian, a.subbundle, a.sample_states(50), 1e-9)
    assert rep.passed


def test_unknown_parameter_and_range():
    with pytest.raises(InvalidParameterError):
        get_system("chaplygin_sleigh", q=1.0)
    with pytest.raises(InvalidParameterError):
        get_system("random_quasi_lie", rank_D=20)
    with pytest.raises(KeyError):
        get_system("pendulum")
