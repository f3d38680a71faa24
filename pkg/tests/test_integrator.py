import numpy as np
import pytest
from scipy.integrate import solve_ivp

from nonholo.errors import BlowUpError
from nonholo.integrator import drift_report, integrate, negated, rk4_step
from nonholo.mechanics import State, el_field
from nonholo.systems import chaplygin_sleigh, harmonic_oscillator, sleigh_closed_form


def zero_field(s):
    return np.zeros_like(s.x), np.zeros_like(s.y)


def oscillator_field():
    s = harmonic_oscillator(1)
    return el_field(s.reduced, s.restricted)


def test_zero_field_leaves_state():
    s0 = State([1.0, 2.0], [3.0])
    s1 = rk4_step(zero_field, s0, 0.1)
    assert np.array_equal(s1.x, s0.x) and np.array_equal(s1.y, s0.y) and s1.t == pytest.approx(0.1)


def test_oscillator_period():
    traj = integrate(oscillator_field(), State([1.0], [0.0]), 2 * np.pi / 6284, 2 * np.pi)
    end = traj.states[-1]
    assert len(traj) == 6285
    assert abs(end.x[0] - 1.0) <= 1e-10 and abs(end.y[0]) <= 1e-10


def test_fourth_order_convergence():
    vf = oscillator_field()
    errs = []
    for n in (50, 100):
        end = integrate(vf, State([1.0], [0.0]), 1.0 / n, 1.0).states[-1]
        errs.append(np.hypot(end.x[0] - np.cos(1.0), end.y[0] + np.sin(1.0)))
    assert 14 <= errs[0] / errs[1] <= 18


def test_sleigh_single_step_against_reference():
    s = chaplygin_sleigh()
    h = 1e-3
    s1 = rk4_step(el_field(s.reduced, s.restricted), State([], [1.0, 1.0]), h)
    ref = solve_ivp(lambda t, y: sleigh_closed_form(1, 1, 1, 0, y), (0, h), [1.0, 1.0], method="DOP853",
                    rtol=1e-13, atol=1e-16).y[:, -1]
    assert np.allclose(s1.y, ref, atol=1e-14)


def test_time_reversal():
    s = chaplygin_sleigh()
    vf = el_field(s.reduced, s.restricted)
    fwd = integrate(vf, State([], [1.0, 1.0]), 1e-3, 2.0).states[-1]
    back = integrate(negated(vf), State([], fwd.y), 1e-3, 2.0).states[-1]
    assert np.allclose(back.y, [1.0, 1.0], atol=1e-7)


def test_negative_step_runs_backwards():
    vf = oscillator_field()
    traj = integrate(vf, State([1.0], [0.0]), -1e-2, 1.0)
    assert traj.states[-1].t == pytest.approx(-1.0)
    assert traj.states[-1].y[0] == pytest.approx(np.sin(1.0), abs=1e-8)


def test_zero_horizon_and_grid():
    traj = integrate(zero_field, State([0.0], [0.0], t=2.0), 0.1, 0.0)
    assert len(traj) == 1
    traj = integrate(zero_field, State([0.0], [0.0], t=2.0), 0.1, 1.0)
    assert len(traj) == 11 and traj.times[-1] == 2.0 + 10 * 0.1


def test_invalid_arguments():
    with pytest.raises(ValueError):
        integrate(zero_field, State([0.0], [0.0]), 0.0, 1.0)
    with pytest.raises(ValueError):
        integrate(zero_field, State([0.0], [0.0]), 0.1, -1.0)


def test_blow_up_reports_time_and_partial_trajectory():
    def vf(s):
        with np.errstate(over="ignore"):
            return np.zeros(0), s.y ** 2

    with pytest.raises(BlowUpError) as exc:
        integrate(vf, State([], [1.0]), 0.01, 2.0)
    assert 0.9 < exc.value.t < 1.1
    assert exc.value.trajectory is not None and len(exc.value.trajectory) > 50


def test_drift_of_constant_observer_is_zero():
    traj = integrate(zero_field, State([0.0], [1.0]), 0.1, 1.0, observers={"one": lambda s: 1.0})
    assert drift_report(traj) == {"one": 0.0}


def test_sleigh_energy_drift():
    s = chaplygin_sleigh()
    traj = integrate(el_field(s.reduced, s.restricted), State([], [1.0, 1.0]), 1e-3, 10.0, {"E": s.energy})
    assert drift_report(traj)["E"] <= 1e-8
    assert drift_report(traj, {"E2": s.energy})["E2"] == pytest.approx(drift_report(traj)["E"])
