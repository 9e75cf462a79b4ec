import numpy as np
import pytest

from telemanip.model import GeneralizedState, default_model, neutral_state
from telemanip.rotations import quat_integrate, quat_normalize


@pytest.fixture(scope="session")
def model():
    return default_model()


def random_state(model, rng, vel_scale=1.0):
    """Random state with joints inside limits and a unit base quaternion."""
    q_a = np.zeros(model.actuated_count)
    for slot, ji in enumerate(model.actuated_joints):
        lo, hi = model.joints[ji].position_limits
        mid, span = 0.5 * (lo + hi), 0.5 * (hi - lo)
        q_a[slot] = mid + 0.8 * span * rng.uniform(-1.0, 1.0)
    quat = quat_normalize(rng.standard_normal(4))
    return GeneralizedState(
        base_pos=rng.uniform(-0.5, 0.5, 3) + np.array([0.0, 0.0, 0.5]),
        base_quat=quat,
        q_a=q_a,
        base_vel=vel_scale * rng.uniform(-1.0, 1.0, 3),
        base_angvel=vel_scale * rng.uniform(-1.0, 1.0, 3),
        qd_a=vel_scale * rng.uniform(-2.0, 2.0, model.actuated_count),
    )


def advance_state(state, u, h):
    """Integrate the configuration along constant velocity u for time h."""
    out = state.copy()
    out.base_pos = state.base_pos + u[0:3] * h
    out.base_quat = quat_integrate(state.base_quat, u[3:6], h)
    out.q_a = state.q_a + u[6:] * h
    out.base_vel = u[0:3].copy()
    out.base_angvel = u[3:6].copy()
    out.qd_a = u[6:].copy()
    return out


@pytest.fixture(scope="session")
def standing(model):
    return neutral_state(model)
