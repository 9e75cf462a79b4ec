"""Real-time control loop fed by the transport session.

The loop ticks the controller at 500 Hz (paced to the wall clock, never
spiraling when it falls behind), pulls the freshest control input from
the session at tick boundaries, and publishes a robot state message at
100 Hz to every connected peer and sink. A persistent controller fault
parks the loop in a FAULT state instead of killing the service.
"""

from __future__ import annotations

import asyncio
import time

import numpy as np

from ..control import CONTROL_DT, SIM_DT, ControlError, ControlInputs, TrotController
from ..model import RobotModel, neutral_state
from ..protocol import (
    STATUS_DEGRADED,
    STATUS_FAULT,
    STATUS_OK,
    GamepadSnapshot,
    RobotStateMessage,
    SkeletonFrame,
    encode,
)
from ..scenario import Scenario, trigger_mask
from ..session import TcpSession
from ..sim import step
from ..teleop import TeleopError, TeleopSession, map_gamepad

PUBLISH_EVERY = 5  # 500 Hz loop, 100 Hz state stream
CHUNK_TICKS = 5  # ticks per scheduling slice


class LiveLoop:
    """Owns controller, simulator state, and the state publication stream."""

    def __init__(
        self,
        model: RobotModel,
        session: TcpSession,
        scenario: Scenario | None = None,
        log_path=None,
        pace: float = 1.0,
    ):
        self.model = model
        self.session = session
        self.scenario = scenario
        self.pace = pace
        params = scenario.gait_params(model) if scenario is not None else None
        self.controller = TrotController(model, params=params)
        self.teleop = TeleopSession(model, gait_params=params)
        self.state = (
            scenario.initial_state(model) if scenario is not None else neutral_state(model)
        )
        self.tick = 0
        self.sim_time = 0.0
        self.status = STATUS_OK
        self.running = False
        self.sinks: list = []  # callables taking one wire message
        self._stop = asyncio.Event()
        self._log_handle = open(log_path, "wb") if log_path else None
        self._held = None
        self._homing_was_down = False

    @property
    def mode(self) -> str:
        return getattr(self.controller, "mode", "stand")

    def request_stop(self) -> None:
        self._stop.set()

    def close_log(self) -> None:
        if self._log_handle is not None:
            self._log_handle.flush()
            self._log_handle.close()
            self._log_handle = None

    def _inputs_from(self, message) -> ControlInputs | None:
        if isinstance(message, SkeletonFrame):
            try:
                self._held = self.teleop.process(message, self.controller.arm_pose)
            except TeleopError:
                # out-of-order or malformed frame: drop it, keep the loop alive
                return None
            return ControlInputs.from_teleop(self._held)
        if isinstance(message, GamepadSnapshot):
            cmds = map_gamepad(message, self.controller.params)
            edge = cmds.homing and not self._homing_was_down
            self._homing_was_down = cmds.homing
            return ControlInputs.from_gamepad(cmds, self.controller.arm_pose, edge)
        return None

    def _publish(self, message) -> None:
        self.session.publish(message)
        for sink in self.sinks:
            sink(message)
        if self._log_handle is not None:
            self._log_handle.write(encode(message))

    def _state_message(self, out) -> RobotStateMessage:
        ok = out is not None and out.solution.ok
        forces = out.solution.forces if ok else np.zeros((0, 3))
        tau = out.tau if out is not None else np.zeros(self.model.actuated_count)
        return RobotStateMessage(
            timestamp=self.sim_time,
            base_pos=self.state.base_pos.copy(),
            base_quat=self.state.base_quat.copy(),
            q=self.state.q_a.copy(),
            qd=self.state.qd_a.copy(),
            tau=np.asarray(tau, dtype=float).copy(),
            contact_forces=np.asarray(forces, dtype=float).reshape(-1, 3),
            trigger_mask=trigger_mask(self._held),
            status=self.status,
        )

    def _one_tick(self) -> None:
        inputs = None
        if self.tick % PUBLISH_EVERY == 0:
            message = self.session.take_control()
            if message is not None:
                inputs = self._inputs_from(message)
        out = self.controller.tick(self.sim_time, self.state, inputs)
        self.status = STATUS_OK if out.solution.ok else STATUS_DEGRADED
        for _ in range(int(round(CONTROL_DT / SIM_DT))):
            self.state = step(self.model, self.state, out.tau, out.contacts, SIM_DT).state
        self.tick += 1
        self.sim_time = self.tick * CONTROL_DT
        if self.tick % PUBLISH_EVERY == 0:
            self._publish(self._state_message(out))

    async def run(self) -> None:
        self.running = True
        deadline = time.monotonic()
        try:
            while not self._stop.is_set():
                for _ in range(CHUNK_TICKS):
                    self._one_tick()
                deadline += CHUNK_TICKS * CONTROL_DT / max(self.pace, 1e-6)
                now = time.monotonic()
                delay = deadline - now
                if delay > 0:
                    await asyncio.sleep(delay)
                else:
                    deadline = now
                    await asyncio.sleep(0)
        except ControlError:
            self.status = STATUS_FAULT
            self._publish(self._state_message(None))
        except asyncio.CancelledError:
            pass
        finally:
            self.running = False
            self.close_log()
