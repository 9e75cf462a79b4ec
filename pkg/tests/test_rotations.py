import numpy as np

from telemanip.rotations import (
    matrix_to_quat,
    matrix_to_rpy,
    orientation_error,
    quat_conjugate,
    quat_from_axis_angle,
    quat_integrate,
    quat_multiply,
    quat_normalize,
    quat_to_matrix,
    quat_to_rotvec,
    rotvec_to_quat,
    rpy_to_matrix,
    skew,
    wrap_angle,
    yaw_of_quat,
)


def random_quat(rng):
    return quat_normalize(rng.standard_normal(4))


def test_quat_matrix_round_trip():
    rng = np.random.default_rng(11)
    for _ in range(200):
        q = random_quat(rng)
        R = quat_to_matrix(q)
        assert np.allclose(R @ R.T, np.eye(3), atol=1e-12)
        assert np.isclose(np.linalg.det(R), 1.0, atol=1e-12)
        q2 = matrix_to_quat(R)
        # same rotation up to sign, and matrix_to_quat fixes w >= 0
        assert np.allclose(quat_to_matrix(q2), R, atol=1e-12)
        assert q2[0] >= 0.0


def test_multiply_matches_matrix_product():
    rng = np.random.default_rng(12)
    for _ in range(100):
        qa, qb = random_quat(rng), random_quat(rng)
        lhs = quat_to_matrix(quat_multiply(qa, qb))
        rhs = quat_to_matrix(qa) @ quat_to_matrix(qb)
        assert np.allclose(lhs, rhs, atol=1e-12)


def test_rotvec_round_trip_and_small_angles():
    rng = np.random.default_rng(13)
    for _ in range(100):
        v = rng.uniform(-np.pi + 1e-3, np.pi - 1e-3) * quat_normalize(
            np.r_[0.0, rng.standard_normal(3)]
        )[1:]
        q = rotvec_to_quat(v)
        assert np.allclose(quat_to_rotvec(q), v, atol=1e-10)
    tiny = np.array([1e-12, -3e-13, 2e-12])
    assert np.allclose(quat_to_rotvec(rotvec_to_quat(tiny)), tiny, atol=1e-18)


def test_orientation_error_properties():
    rng = np.random.default_rng(14)
    q = random_quat(rng)
    assert np.allclose(orientation_error(q, q), np.zeros(3), atol=1e-12)
    for _ in range(50):
        q_des, q_cur = random_quat(rng), random_quat(rng)
        e = orientation_error(q_des, q_cur)
        # applying the error rotation in the world frame reaches the target
        q_new = quat_multiply(rotvec_to_quat(e), q_cur)
        assert np.allclose(quat_to_matrix(q_new), quat_to_matrix(q_des), atol=1e-9)


def test_quat_integrate_matches_axis_angle():
    rng = np.random.default_rng(15)
    for _ in range(50):
        q = random_quat(rng)
        w = rng.standard_normal(3)
        dt = 0.01
        expected = quat_multiply(rotvec_to_quat(w * dt), q)
        got = quat_integrate(q, w, dt)
        assert np.allclose(quat_to_matrix(got), quat_to_matrix(expected), atol=1e-12)
        assert np.isclose(np.linalg.norm(got), 1.0, atol=1e-12)


def test_rpy_round_trip():
    rng = np.random.default_rng(16)
    for _ in range(100):
        rpy = rng.uniform([-np.pi, -np.pi / 2 + 0.02, -np.pi], [np.pi, np.pi / 2 - 0.02, np.pi])
        R = rpy_to_matrix(*rpy)
        assert np.allclose(matrix_to_rpy(R), rpy, atol=1e-10)


def test_yaw_of_quat():
    q = quat_from_axis_angle(np.array([0.0, 0.0, 1.0]), 0.8)
    assert np.isclose(yaw_of_quat(q), 0.8, atol=1e-12)
    # yaw survives composition with a pure roll
    q2 = quat_multiply(q, quat_from_axis_angle(np.array([1.0, 0.0, 0.0]), 0.3))
    assert np.isclose(yaw_of_quat(q2), 0.8, atol=1e-12)


def test_skew_and_wrap():
    v = np.array([1.0, -2.0, 3.0])
    w = np.array([0.4, 0.5, -0.6])
    assert np.allclose(skew(v) @ w, np.cross(v, w), atol=1e-15)
    assert np.allclose(skew(v).T, -skew(v), atol=1e-15)
    assert np.isclose(wrap_angle(np.pi + 0.1), -np.pi + 0.1, atol=1e-12)
    assert np.isclose(wrap_angle(-np.pi), np.pi, atol=1e-12)
    assert np.isclose(wrap_angle(3.0), 3.0, atol=1e-15)


def test_conjugate_inverts():
    rng = np.random.default_rng(17)
    q = random_quat(rng)
    ident = quat_multiply(q, quat_conjugate(q))
    assert np.allclose(ident, np.array([1.0, 0.0, 0.0, 0.0]), atol=1e-12)
