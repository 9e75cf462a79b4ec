"""Tests for the constrained integrator: conservation, contacts, aborts."""

import numpy as np
import pytest

from telemanip.dynamics import bias_forces, mass_matrix
from telemanip.kinematics import compute_kinematics, frame_jacobian, frame_pose
from telemanip.model import neutral_state
from telemanip.sim import SimError, kinetic_energy, step, system_momentum


def foot_anchors(model, state):
    anchors = {}
    for info in model.legs.values():
        p, _ = frame_pose(model, state, info.foot)
        anchors[info.foot] = np.array([p[0], p[1], 0.0])
    return anchors


def stand_controller(model, state):
    """Static feedforward torque plus inertia-scaled joint PD around home.

    The feedforward solves the base force balance for minimum-norm contact
    forces and back-substitutes the actuated rows, so home is an equilibrium.
    """
    kin = compute_kinematics(model, state)
    h = bias_forces(model, state, kin=kin)
    feet = [info.foot for info in model.legs.values()]
    J = np.vstack([frame_jacobian(model, state, f, kin=kin)[0][0:3] for f in feet])
    lam0, *_ = np.linalg.lstsq(J[:, 0:6].T, h[0:6], rcond=None)
    tau0 = h[6:] - J[:, 6:].T @ lam0
    inertia = np.diag(mass_matrix(model, state))[6:]
    kp = (120.0**2) * inertia
    kd = 2.0 * 0.7 * 120.0 * inertia

    def torque(s):
        return tau0 + kp * (model.home - s.q_a) - kd * s.qd_a

    return torque


def test_free_fall_matches_closed_form(model):
    state = neutral_state(model, base_height=1.0)
    tau = np.zeros(model.actuated_count)
    s = state
    for _ in range(500):
        s = step(model, s, tau, {}, 1e-3).state
    expect = 1.0 - 0.5 * 9.81 * 0.5**2
    assert abs(s.base_pos[2] - expect) < 1e-5
    # a uniform field accelerates every link equally, joints never move
    assert np.abs(s.q_a - state.q_a).max() < 1e-12


def test_momentum_conserved_without_forces(model):
    state = neutral_state(model, base_height=1.0)
    state.base_vel = np.array([0.1, -0.05, 0.08])
    state.base_angvel = np.array([0.05, 0.02, -0.04])
    state.qd_a = 0.02 * np.sin(np.arange(model.actuated_count))
    tau = np.zeros(model.actuated_count)
    zero_g = np.zeros(3)
    s = state
    prev = system_momentum(model, s)
    worst = 0.0
    for _ in range(200):
        s = step(model, s, tau, {}, 1e-3, gravity=zero_g).state
        cur = system_momentum(model, s)
        worst = max(worst, float(np.abs(cur - prev).max()))
        prev = cur
    assert worst < 1e-9


def test_energy_constant_in_free_motion(model):
    state = neutral_state(model, base_height=1.0)
    state.base_vel = np.array([0.1, -0.05, 0.08])
    state.base_angvel = np.array([0.05, 0.02, -0.04])
    state.qd_a = 0.02 * np.cos(np.arange(model.actuated_count))
    tau = np.zeros(model.actuated_count)
    zero_g = np.zeros(3)
    e0 = kinetic_energy(model, state)
    s = state
    for _ in range(1000):
        s = step(model, s, tau, {}, 1e-3, gravity=zero_g).state
    assert abs(kinetic_energy(model, s) - e0) / e0 < 1e-6


def test_quaternion_stays_normalized(model):
    state = neutral_state(model, base_height=1.0)
    state.base_angvel = np.array([1.5, -2.0, 1.0])
    tau = np.zeros(model.actuated_count)
    s = state
    for _ in range(300):
        s = step(model, s, tau, {}, 1e-3, gravity=np.zeros(3)).state
        assert abs(np.linalg.norm(s.base_quat) - 1.0) < 1e-12


def test_standing_supports_weight(model):
    state = neutral_state(model)
    anchors = foot_anchors(model, state)
    torque = stand_controller(model, state)
    s = state
    worst_z = 0.0
    fz = []
    for _ in range(1000):
        res = step(model, s, torque(s), anchors, 1e-3)
        s = res.state
        worst_z = max(
            worst_z, max(abs(frame_pose(model, s, f)[0][2]) for f in anchors)
        )
        fz.append(sum(v[2] for v in res.forces.values()))
    mg = model.total_mass * 9.81
    assert worst_z < 2e-3
    assert abs(np.mean(fz) - mg) / mg < 0.01
    assert abs(s.base_pos[2] - 0.4) < 1e-3


def test_stabilization_recovers_offset_feet(model):
    nominal = neutral_state(model)
    anchors = foot_anchors(model, nominal)
    torque = stand_controller(model, nominal)
    s = neutral_state(model, base_height=0.405)  # feet start 5 mm above ground
    for _ in range(500):
        s = step(model, s, torque(s), anchors, 1e-3).state
    assert max(abs(frame_pose(model, s, f)[0][2]) for f in anchors) < 1e-3


def test_pulling_contacts_release(model):
    state = neutral_state(model)
    state.base_vel = np.array([0.0, 0.0, 0.8])
    anchors = foot_anchors(model, state)
    res = step(
        model, state, np.zeros(model.actuated_count), anchors, 1e-3,
        gravity=np.zeros(3),
    )
    assert sorted(res.released) == sorted(anchors)
    assert not res.forces


def test_singular_contact_geometry_names_contacts(model):
    state = neutral_state(model)
    pe, _ = frame_pose(model, state, "ee")
    pg, _ = frame_pose(model, state, "gripper_link")
    contacts = {"ee": pe + np.array([0.1, 0.0, 0.0]), "gripper_link": pg}
    with pytest.raises(SimError, match="ee"):
        step(model, state, np.zeros(model.actuated_count), contacts, 1e-3)


def test_nan_abort_keeps_last_good_state(model):
    state = neutral_state(model)
    tau = np.zeros(model.actuated_count)
    tau[0] = np.nan
    with pytest.raises(SimError) as info:
        step(model, state, tau, {}, 1e-3)
    assert info.value.last_good is state


def test_substep_bounds(model):
    state = neutral_state(model)
    tau = np.zeros(model.actuated_count)
    with pytest.raises(SimError):
        step(model, state, tau, {}, 0.0)
    with pytest.raises(SimError):
        step(model, state, tau, {}, 0.02)


def test_step_is_deterministic(model):
    def run():
        s = neutral_state(model)
        anchors = foot_anchors(model, s)
        torque = stand_controller(model, s)
        for _ in range(100):
            s = step(model, s, torque(s), anchors, 1e-3).state
        return s

    a, b = run(), run()
    assert np.array_equal(a.base_pos, b.base_pos)
    assert np.array_equal(a.base_quat, b.base_quat)
    assert np.array_equal(a.q_a, b.q_a)
    assert np.array_equal(a.qd_a, b.qd_a)
