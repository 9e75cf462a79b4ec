"""End-to-end acceptance checks, one test per contract criterion.

Every test enforces its stated tolerance at the stated sample size and
prints a one-line summary of the measured numbers (visible with -s).
The whole suite runs headless against the scripted operator.
"""

import time

import numpy as np
import pytest

import test_control
import test_protocol
import test_qp
import test_teleop
from conftest import advance_state, random_state

from telemanip.control import ControlInputs, TrotController
from telemanip.dynamics import inverse_dynamics, mass_matrix
from telemanip.kinematics import compute_kinematics, frame_jacobian, frame_pose
from telemanip.model import neutral_state
from telemanip.protocol import (
    PointCloud,
    ProtocolError,
    RobotStateMessage,
    crop_cloud,
    decode,
    encode,
    write_log,
)
from telemanip.qp import OPTIMAL, solve_qp
from telemanip.scenario import ReplaySource, load_scenario, run_scenario
from telemanip.teleop import ScaleGains, TeleopSession, WalkCommand
from telemanip.wbc import solve_wbc
from test_wbc import standing_setup


def test_dynamics_correctness(model):
    """Jacobian FD suite plus mass-matrix and inverse-dynamics oracles."""
    start = time.perf_counter()
    rng = np.random.default_rng(7)
    n_states = 1000
    eps = 1e-6
    frames = list(model.contact_names) + [model.end_effector]
    worst_jac = 0.0
    worst_sym = 0.0
    min_eig = np.inf
    worst_id = 0.0
    for k in range(n_states):
        state = random_state(model, rng)
        M = mass_matrix(model, state)
        worst_sym = max(worst_sym, float(np.abs(M - M.T).max()))
        min_eig = min(min_eig, float(np.linalg.eigvalsh(0.5 * (M + M.T)).min()))

        # inverse dynamics at zero velocity isolates one matrix column
        still = state.copy()
        still.base_vel = np.zeros(3)
        still.base_angvel = np.zeros(3)
        still.qd_a = np.zeros(model.actuated_count)
        h = inverse_dynamics(model, still, np.zeros(model.nv))
        col = rng.integers(0, model.nv)
        e = np.zeros(model.nv)
        e[col] = 1.0
        lhs = inverse_dynamics(model, still, e) - h
        denom = max(1.0, float(np.abs(M[:, col]).max()))
        worst_id = max(worst_id, float(np.abs(lhs - M[:, col]).max()) / denom)

        # every column of one frame Jacobian per state, frames in rotation
        frame = frames[k % len(frames)]
        kin = compute_kinematics(model, state)
        J, _ = frame_jacobian(model, state, frame, kin=kin)
        for direction in range(model.nv):
            du = np.zeros(model.nv)
            du[direction] = 1.0
            p_plus, _ = frame_pose(model, advance_state(state, du, eps), frame)
            p_minus, _ = frame_pose(model, advance_state(state, du, -eps), frame)
            fd = (p_plus - p_minus) / (2 * eps)
            denom = max(1.0, float(np.abs(fd).max()))
            worst_jac = max(
                worst_jac, float(np.abs(J[0:3, direction] - fd).max()) / denom
            )
    elapsed = time.perf_counter() - start
    assert worst_jac < 1e-5
    assert worst_sym < 1e-9
    assert min_eig > 0
    assert worst_id < 1e-8
    assert elapsed < 60.0
    print(
        f"PASS dynamics: {n_states} states, jac FD {worst_jac:.2e}, "
        f"sym {worst_sym:.2e}, min eig {min_eig:.2e}, ID col {worst_id:.2e}, {elapsed:.1f}s"
    )


def test_qp_optimality():
    """Random instances against enumeration, equalities against KKT."""
    start = time.perf_counter()
    rng = np.random.default_rng(101)
    worst_rel = 0.0
    for _ in range(100):
        H, g, A_eq, b_eq, A_in, b_in = test_qp.random_feasible_instance(rng)
        res = solve_qp(H, g, A_eq, b_eq, A_in, b_in)
        assert res.status == OPTIMAL
        obj_ref, _ = test_qp.enumerate_optimum(H, g, A_eq, b_eq, A_in, b_in)
        worst_rel = max(
            worst_rel, abs(res.objective - obj_ref) / max(1.0, abs(obj_ref))
        )
    assert worst_rel <= 1e-6

    worst_kkt = 0.0
    for _ in range(50):
        n = int(rng.integers(3, 12))
        m = int(rng.integers(1, n))
        H = test_qp.random_psd(rng, n)
        g = rng.standard_normal(n)
        A = rng.standard_normal((m, n))
        b = rng.standard_normal(m)
        res = solve_qp(H, g, A_eq=A, b_eq=b)
        assert res.status == OPTIMAL
        K = np.block([[H, A.T], [A, np.zeros((m, m))]])
        sol = np.linalg.solve(K, np.r_[-g, b])
        worst_kkt = max(worst_kkt, float(np.abs(res.x - sol[:n]).max()))
    elapsed = time.perf_counter() - start
    assert worst_kkt < 1e-8
    assert elapsed < 60.0
    print(
        f"PASS qp: 100 enumerated rel {worst_rel:.2e}, "
        f"50 KKT {worst_kkt:.2e}, {elapsed:.1f}s"
    )


def test_standing_force_balance(model):
    """Weight support, pyramid feasibility, and equilibrium accelerations."""
    _, _, tasks, cons = standing_setup(model)
    sol = solve_wbc(tasks, cons)
    assert sol.ok
    weight = model.total_mass * 9.81
    fz = sol.forces[:, 2]
    rel = abs(float(fz.sum()) - weight) / weight
    assert rel <= 1e-6
    c = 0.6 / np.sqrt(2.0)
    assert np.all(fz >= 1.0)
    assert np.all(np.abs(sol.forces[:, 0]) <= c * fz)
    assert np.all(np.abs(sol.forces[:, 1]) <= c * fz)
    qdd_max = float(np.abs(sol.qdd).max())
    assert qdd_max < 1e-6
    print(
        f"PASS standing balance: sum fz {fz.sum():.2f} N (rel {rel:.1e}), "
        f"max |qdd| {qdd_max:.1e}"
    )


def test_trot_tracking(model):
    """10 s of trot at vx = 0.2 m/s: velocity, slip, and height budget."""
    start = time.perf_counter()
    controller = TrotController(model)
    state = neutral_state(model)
    walk = ControlInputs(walk=WalkCommand(vx=0.2), walking_active=True)
    stand = ControlInputs()
    lead = 250
    ticks = lead + 5000  # 0.5 s settle + 10 s walking
    log = test_control.run_loop(
        model, controller, state, ticks, lambda i: walk if i >= lead else stand
    )
    vx = np.array([v[0] for v in log["base_vel"]])[lead:]
    mean = float(np.mean(vx))
    z = np.array([p[2] for p in log["base_pos"]])[lead:]
    drift = float(np.max(np.abs(z - 0.4)))
    elapsed = time.perf_counter() - start
    assert 0.8 * 0.2 <= mean <= 1.2 * 0.2
    assert log["slip"] <= 0.002
    assert drift < 0.02
    assert elapsed < 300.0
    print(
        f"PASS trot: mean vx {mean:.4f} m/s (0.2 ±20%), "
        f"max slip {log['slip'] * 1000:.2f} mm, height drift {drift * 100:.2f} cm, "
        f"{elapsed:.0f}s"
    )


def test_teleop_retargeting(model):
    """Anchor identity, scaling slope, drift immunity, one-tick stop,
    and the full trigger truth table."""
    # anchor identity: the first active command equals the robot pose exactly
    maker = lambda t: test_teleop.make_frame(
        t, right_closure=1.0, right_wrist_offset=(0.35, 0.05, -0.35)
    )
    _, outputs = test_teleop.run_session(model, test_teleop.settle(maker))
    first = next(o for o in outputs if o.arm is not None)
    assert np.array_equal(first.arm.pose, test_teleop.ARM_POSE)

    # scaling linearity: command delta = gain * operator delta to 1e-12
    mu = np.array([2.0, 3.0, 0.5, 1.5, 4.0])
    session = TeleopSession(model, gains=ScaleGains(mu_arm=mu, mu_walk=np.ones(3)))
    base_off = np.array([0.35, 0.05, -0.35])
    for k in range(5):
        session.process(
            test_teleop.make_frame(k * 0.01, right_closure=1.0, right_wrist_offset=base_off),
            test_teleop.ARM_POSE,
        )
    moved = test_teleop.make_frame(
        0.06,
        right_closure=1.0,
        right_wrist_offset=base_off + np.array([0.1, 0.0, 0.04]),
        right_wrist_rpy=(0.05, -0.08, 0.12),
    )
    delta = session.process(moved, test_teleop.ARM_POSE).arm.pose - test_teleop.ARM_POSE
    slope_err = float(
        np.abs(delta - mu * np.array([0.1, 0.04, 0.05, -0.08, 0.12])).max()
    )
    assert slope_err < 1e-12

    # drift immunity: a rigid sensor-world offset changes nothing
    def script(t):
        off = (0.35, 0.05, -0.35) if t < 0.05 else (0.42, 0.02, -0.3)
        return test_teleop.make_frame(
            t, right_closure=1.0, left_closure=1.0,
            right_wrist_offset=off, left_hand_dz=-0.3,
        )

    times = [k * 0.01 for k in range(12)]
    _, clean = test_teleop.run_session(model, [script(t) for t in times])
    _, shifted = test_teleop.run_session(
        model, [test_teleop.drifted(script(t), (1.7, -2.3, 0.4), 0.9) for t in times]
    )
    drift_err = 0.0
    for a, b in zip(clean, shifted):
        assert (a.arm is None) == (b.arm is None)
        if a.arm is not None:
            drift_err = max(drift_err, float(np.abs(a.arm.pose - b.arm.pose).max()))
        drift_err = max(
            drift_err, float(np.abs(a.walk.to_array() - b.walk.to_array()).max())
        )
    assert drift_err < 1e-12

    # stop on release: the tick that commits the release already carries a
    # zero walk command, with nothing left over from the moving one
    session = TeleopSession(model)
    for frame in test_teleop.settle(
        lambda t: test_teleop.make_frame(t, left_closure=1.0, left_hand_dz=-0.3)
    ):
        session.process(frame, test_teleop.ARM_POSE)
    moving = session.process(
        test_teleop.make_frame(0.06, pelvis_pos=(0.3, 0.1, 0.9), left_closure=1.0, left_hand_dz=-0.3),
        test_teleop.ARM_POSE,
    )
    assert np.any(moving.walk.to_array() != 0.0)
    released = None
    for k in range(6):
        out = session.process(
            test_teleop.make_frame(0.07 + k * 0.01, pelvis_pos=(0.3, 0.1, 0.9), left_closure=0.0, left_hand_dz=-0.3),
            test_teleop.ARM_POSE,
        )
        if ("walking", "released") in out.events:
            released = out
            break
    assert released is not None
    assert not released.walking_active
    assert np.all(released.walk.to_array() == 0.0)

    # trigger truth table: every hand-closure/height combination
    table = {
        ("above", "open"): {"gripper"},
        ("below", "open"): {"walking"},
        ("open", "above"): {"arm"},
        ("open", "below"): {"homing"},
        ("above", "above"): {"gripper", "arm"},
        ("above", "below"): {"gripper", "homing"},
        ("below", "above"): {"walking", "arm"},
        ("below", "below"): {"walking", "homing"},
    }
    for (left, right), expect in table.items():
        def combo(t):
            return test_teleop.make_frame(
                t,
                left_closure=0.0 if left == "open" else 1.0,
                right_closure=0.0 if right == "open" else 1.0,
                left_hand_dz=0.2 if left == "above" else -0.2,
                right_wrist_offset=(0.35, 0.05, -0.35 if right == "above" else -0.75),
            )

        session, _ = test_teleop.run_session(model, test_teleop.settle(combo))
        active = {
            name
            for name in ("gripper", "walking", "arm", "homing")
            if session.state.record(name).active
        }
        assert active == expect, f"{left}/{right}: {active} != {expect}"
    print(
        f"PASS teleop: anchor exact, slope err {slope_err:.1e}, "
        f"drift err {drift_err:.1e}, stop in one tick, 8/8 trigger combos"
    )


def test_eod_scripted_scenario(model, tmp_path):
    """Scripted box scenario: events, final accuracy, bit-identical replay."""
    start = time.perf_counter()
    scenario = load_scenario("eod")
    log1, metrics1, frames = run_scenario(scenario, model=model)
    events = [name for _, name in log1.events]
    assert "walking_activated" in events and "trot_started" in events
    assert "lid_open" in events
    assert "wire_pulled" in events
    assert metrics1.completion
    assert metrics1.final_ee_error < 0.05
    assert metrics1.violations == 0

    skel = tmp_path / "eod.skel"
    write_log(skel, frames)
    log2, metrics2, _ = run_scenario(
        scenario, model=model, source=ReplaySource.from_file(skel)
    )
    assert log1.to_bytes() == log2.to_bytes()
    assert metrics2 == metrics1
    elapsed = time.perf_counter() - start
    print(
        f"PASS eod: lid_open + wire_pulled, ee error "
        f"{metrics1.final_ee_error * 100:.2f} cm, replay bit-identical, {elapsed:.0f}s"
    )


def test_protocol_round_trip_and_crop():
    """Fuzzed round-trip identity at full volume plus the crop oracle."""
    start = time.perf_counter()
    rng = np.random.default_rng(321)
    count = 0
    while count < 100_000:
        for msg in test_protocol.sample_messages(rng):
            test_protocol.assert_same(decode(encode(msg)), msg)
            count += 1
        n = int(rng.integers(0, 50))
        state = RobotStateMessage(
            timestamp=float(rng.uniform(0, 1e6)),
            base_pos=test_protocol.f32(rng.normal(size=3)),
            base_quat=test_protocol.f32(rng.normal(size=4)),
            q=test_protocol.f32(rng.normal(size=n)),
            qd=test_protocol.f32(rng.normal(size=n)),
            tau=test_protocol.f32(rng.normal(size=n)),
            contact_forces=test_protocol.f32(rng.normal(size=(int(rng.integers(0, 8)), 3))),
            trigger_mask=int(rng.integers(0, 256)),
            status=int(rng.integers(0, 3)),
        )
        test_protocol.assert_same(decode(encode(state)), state)
        cloud = test_protocol.random_cloud(rng, int(rng.integers(0, 64)))
        test_protocol.assert_same(decode(encode(cloud)), cloud)
        count += 2

    # decoder never crashes on garbage: framing errors only
    for _ in range(2000):
        blob = rng.integers(0, 256, size=int(rng.integers(0, 64)), dtype=np.uint8).tobytes()
        try:
            decode(blob)
        except ProtocolError:
            pass

    # crop against the brute-force distance filter, default radius 2 m
    worst = 0
    for _ in range(200):
        cloud = test_protocol.random_cloud(rng, int(rng.integers(0, 300)))
        kept = crop_cloud(cloud)
        mask = np.linalg.norm(cloud.points.astype(float), axis=1) <= 2.0
        assert np.array_equal(kept.points, cloud.points[mask])
        assert np.array_equal(kept.colors, cloud.colors[mask])
        worst = max(worst, int(mask.sum()))
    elapsed = time.perf_counter() - start
    assert elapsed < 120.0
    print(
        f"PASS protocol: {count} fuzzed round-trips, 2000 garbage blobs survived, "
        f"crop matches brute force, {elapsed:.1f}s"
    )
