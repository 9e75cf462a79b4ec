"""Binary wire protocol: framed little-endian messages plus log file IO.

Every message is a 6-byte header (version byte, type byte, u32 payload
length) followed by a packed payload. Floats travel as 32-bit; timestamps
as 64-bit. Log files (.tlog, .skel) are plain concatenations of messages.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .teleop import BODY_SEGMENTS, HAND_SEGMENTS, GamepadSnapshot, SkeletonFrame

PROTOCOL_VERSION = 1

MSG_SKELETON = 1
MSG_COMMAND = 2
MSG_ROBOT_STATE = 3
MSG_POINT_CLOUD = 4
MSG_IMAGE_META = 5
MSG_GAMEPAD = 6
MSG_ACK = 7

_KNOWN_TYPES = range(MSG_SKELETON, MSG_ACK + 1)

_HEADER = struct.Struct("<BBI")

# status byte in RobotState
STATUS_OK = 0
STATUS_DEGRADED = 1
STATUS_FAULT = 2


class ProtocolError(ValueError):
    pass


class TruncatedMessage(ProtocolError):
    pass


class BadVersion(ProtocolError):
    pass


class BadType(ProtocolError):
    pass


class LengthMismatch(ProtocolError):
    pass


@dataclass
class CommandMessage:
    """Operator command set produced by the teleop layer or the console."""

    timestamp: float
    arm_active: bool = False
    walk_active: bool = False
    gripper_closed: bool = False
    homing_active: bool = False
    arm_pose: np.ndarray = field(default_factory=lambda: np.zeros(5))
    walk: np.ndarray = field(default_factory=lambda: np.zeros(3))


@dataclass
class RobotStateMessage:
    """Telemetry snapshot: base pose, joint state, contact forces, status."""

    timestamp: float
    base_pos: np.ndarray
    base_quat: np.ndarray
    q: np.ndarray
    qd: np.ndarray
    tau: np.ndarray
    contact_forces: np.ndarray  # (n_c, 3)
    trigger_mask: int = 0
    status: int = STATUS_OK


@dataclass
class PointCloud:
    """Colored points around the sensor origin."""

    points: np.ndarray  # (n, 3) float32
    colors: np.ndarray  # (n, 3) uint8

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float32).reshape(-1, 3)
        self.colors = np.asarray(self.colors, dtype=np.uint8).reshape(-1, 3)
        if len(self.points) != len(self.colors):
            raise ProtocolError("point cloud needs one color per point")

    def __len__(self) -> int:
        return len(self.points)


@dataclass
class ImageMeta:
    """Camera frame descriptor with opaque (possibly compressed) bytes."""

    timestamp: float
    width: int
    height: int
    compressed: bool
    data: bytes = b""


@dataclass
class Ack:
    timestamp: float
    code: int = 0


def _f32(block: np.ndarray) -> bytes:
    return np.ascontiguousarray(block, dtype="<f4").tobytes()


def _read_f32(payload: bytes, offset: int, count: int) -> tuple[np.ndarray, int]:
    end = offset + 4 * count
    if end > len(payload):
        raise LengthMismatch("payload shorter than its declared contents")
    out = np.frombuffer(payload, dtype="<f4", count=count, offset=offset)
    return out.astype(float), end


def _encode_skeleton(m: SkeletonFrame) -> bytes:
    m.validate()
    parts = [struct.pack("<d", m.timestamp)]
    for pos, quat in (
        (m.body_pos, m.body_quat),
        (m.left_hand_pos, m.left_hand_quat),
        (m.right_hand_pos, m.right_hand_quat),
    ):
        seg = np.hstack([pos, quat])  # (n, 7) rows of position + quaternion
        parts.append(_f32(seg))
    return b"".join(parts)


def _decode_skeleton(payload: bytes) -> SkeletonFrame:
    total = BODY_SEGMENTS + 2 * HAND_SEGMENTS
    want = 8 + total * 7 * 4
    if len(payload) != want:
        raise LengthMismatch(f"skeleton payload is {len(payload)} bytes, expected {want}")
    (ts,) = struct.unpack_from("<d", payload, 0)
    blocks = []
    offset = 8
    for count in (BODY_SEGMENTS, HAND_SEGMENTS, HAND_SEGMENTS):
        seg, offset = _read_f32(payload, offset, count * 7)
        seg = seg.reshape(count, 7)
        blocks.append((seg[:, 0:3].copy(), seg[:, 3:7].copy()))
    return SkeletonFrame(
        timestamp=ts,
        body_pos=blocks[0][0],
        body_quat=blocks[0][1],
        left_hand_pos=blocks[1][0],
        left_hand_quat=blocks[1][1],
        right_hand_pos=blocks[2][0],
        right_hand_quat=blocks[2][1],
    )


def _encode_command(m: CommandMessage) -> bytes:
    flags = (
        (1 if m.arm_active else 0)
        | (2 if m.walk_active else 0)
        | (4 if m.gripper_closed else 0)
        | (8 if m.homing_active else 0)
    )
    return (
        struct.pack("<dB", m.timestamp, flags)
        + _f32(np.asarray(m.arm_pose).reshape(5))
        + _f32(np.asarray(m.walk).reshape(3))
    )


def _decode_command(payload: bytes) -> CommandMessage:
    if len(payload) != 9 + 4 * 8:
        raise LengthMismatch(f"command payload is {len(payload)} bytes, expected 41")
    ts, flags = struct.unpack_from("<dB", payload, 0)
    arm, offset = _read_f32(payload, 9, 5)
    walk, _ = _read_f32(payload, offset, 3)
    return CommandMessage(
        timestamp=ts,
        arm_active=bool(flags & 1),
        walk_active=bool(flags & 2),
        gripper_closed=bool(flags & 4),
        homing_active=bool(flags & 8),
        arm_pose=arm,
        walk=walk,
    )


def _encode_robot_state(m: RobotStateMessage) -> bytes:
    q = np.asarray(m.q, dtype=float)
    forces = np.asarray(m.contact_forces, dtype=float).reshape(-1, 3)
    n = len(q)
    if len(m.qd) != n or len(m.tau) != n:
        raise ProtocolError("joint arrays must share one length")
    return b"".join(
        [
            struct.pack("<d", m.timestamp),
            _f32(np.asarray(m.base_pos).reshape(3)),
            _f32(np.asarray(m.base_quat).reshape(4)),
            struct.pack("<H", n),
            _f32(q),
            _f32(np.asarray(m.qd)),
            _f32(np.asarray(m.tau)),
            struct.pack("<B", len(forces)),
            _f32(forces),
            struct.pack("<BB", m.trigger_mask & 0xFF, m.status & 0xFF),
        ]
    )


def _decode_robot_state(payload: bytes) -> RobotStateMessage:
    try:
        (ts,) = struct.unpack_from("<d", payload, 0)
        base_pos, offset = _read_f32(payload, 8, 3)
        base_quat, offset = _read_f32(payload, offset, 4)
        (n,) = struct.unpack_from("<H", payload, offset)
        offset += 2
        q, offset = _read_f32(payload, offset, n)
        qd, offset = _read_f32(payload, offset, n)
        tau, offset = _read_f32(payload, offset, n)
        (n_c,) = struct.unpack_from("<B", payload, offset)
        offset += 1
        forces, offset = _read_f32(payload, offset, n_c * 3)
        mask, status = struct.unpack_from("<BB", payload, offset)
        offset += 2
    except struct.error as exc:
        raise LengthMismatch(f"robot state payload too short: {exc}") from exc
    if offset != len(payload):
        raise LengthMismatch("robot state payload has trailing bytes")
    return RobotStateMessage(
        timestamp=ts,
        base_pos=base_pos,
        base_quat=base_quat,
        q=q,
        qd=qd,
        tau=tau,
        contact_forces=forces.reshape(-1, 3),
        trigger_mask=mask,
        status=status,
    )


def _encode_cloud(m: PointCloud) -> bytes:
    n = len(m)
    body = np.zeros(n, dtype=[("xyz", "<f4", 3), ("rgb", "u1", 3)])
    body["xyz"] = m.points
    body["rgb"] = m.colors
    return struct.pack("<I", n) + body.tobytes()


def _decode_cloud(payload: bytes) -> PointCloud:
    if len(payload) < 4:
        raise LengthMismatch("point cloud payload shorter than its count field")
    (n,) = struct.unpack_from("<I", payload, 0)
    want = 4 + 15 * n
    if len(payload) != want:
        raise LengthMismatch(f"point cloud payload is {len(payload)} bytes, expected {want}")
    body = np.frombuffer(payload, dtype=[("xyz", "<f4", 3), ("rgb", "u1", 3)], count=n, offset=4)
    return PointCloud(points=body["xyz"].copy(), colors=body["rgb"].copy())


def _encode_image_meta(m: ImageMeta) -> bytes:
    return (
        struct.pack("<dHHBI", m.timestamp, m.width, m.height, 1 if m.compressed else 0, len(m.data))
        + m.data
    )


def _decode_image_meta(payload: bytes) -> ImageMeta:
    head = struct.calcsize("<dHHBI")
    if len(payload) < head:
        raise LengthMismatch("image meta payload shorter than its header")
    ts, w, h, comp, nbytes = struct.unpack_from("<dHHBI", payload, 0)
    if len(payload) != head + nbytes:
        raise LengthMismatch("image meta byte count disagrees with payload length")
    return ImageMeta(
        timestamp=ts, width=w, height=h, compressed=bool(comp), data=payload[head:]
    )


def _encode_gamepad(m: GamepadSnapshot) -> bytes:
    axes = np.concatenate(
        [np.asarray(m.left_stick), np.asarray(m.right_stick), np.asarray(m.shoulders)]
    ).reshape(6)
    return struct.pack("<d", m.timestamp) + _f32(axes) + struct.pack("<I", m.buttons)


def _decode_gamepad(payload: bytes) -> GamepadSnapshot:
    if len(payload) != 8 + 24 + 4:
        raise LengthMismatch(f"gamepad payload is {len(payload)} bytes, expected 36")
    (ts,) = struct.unpack_from("<d", payload, 0)
    axes, offset = _read_f32(payload, 8, 6)
    (buttons,) = struct.unpack_from("<I", payload, offset)
    return GamepadSnapshot(
        timestamp=ts,
        left_stick=axes[0:2],
        right_stick=axes[2:4],
        shoulders=axes[4:6],
        buttons=buttons,
    )


def _encode_ack(m: Ack) -> bytes:
    return struct.pack("<dI", m.timestamp, m.code)


def _decode_ack(payload: bytes) -> Ack:
    if len(payload) != 12:
        raise LengthMismatch(f"ack payload is {len(payload)} bytes, expected 12")
    ts, code = struct.unpack("<dI", payload)
    return Ack(timestamp=ts, code=code)


_ENCODERS = {
    SkeletonFrame: (MSG_SKELETON, _encode_skeleton),
    CommandMessage: (MSG_COMMAND, _encode_command),
    RobotStateMessage: (MSG_ROBOT_STATE, _encode_robot_state),
    PointCloud: (MSG_POINT_CLOUD, _encode_cloud),
    ImageMeta: (MSG_IMAGE_META, _encode_image_meta),
    GamepadSnapshot: (MSG_GAMEPAD, _encode_gamepad),
    Ack: (MSG_ACK, _encode_ack),
}

_DECODERS = {
    MSG_SKELETON: _decode_skeleton,
    MSG_COMMAND: _decode_command,
    MSG_ROBOT_STATE: _decode_robot_state,
    MSG_POINT_CLOUD: _decode_cloud,
    MSG_IMAGE_META: _decode_image_meta,
    MSG_GAMEPAD: _decode_gamepad,
    MSG_ACK: _decode_ack,
}


def message_type(message) -> int:
    try:
        return _ENCODERS[type(message)][0]
    except KeyError:
        raise BadType(f"cannot encode objects of type {type(message).__name__}") from None


def encode(message) -> bytes:
    """Serialize one message with its framing header."""
    kind, enc = _ENCODERS.get(type(message), (None, None))
    if enc is None:
        raise BadType(f"cannot encode objects of type {type(message).__name__}")
    payload = enc(message)
    return _HEADER.pack(PROTOCOL_VERSION, kind, len(payload)) + payload


def _check_header(buffer: bytes) -> tuple[int, int]:
    if len(buffer) < _HEADER.size:
        raise TruncatedMessage(f"buffer holds {len(buffer)} bytes, header needs {_HEADER.size}")
    version, kind, length = _HEADER.unpack_from(buffer, 0)
    if version != PROTOCOL_VERSION:
        raise BadVersion(f"protocol version {version}, expected {PROTOCOL_VERSION}")
    if kind not in _KNOWN_TYPES:
        raise BadType(f"unknown message type byte {kind}")
    return kind, length


def decode(buffer: bytes):
    """Deserialize exactly one message; trailing bytes are an error."""
    kind, length = _check_header(buffer)
    end = _HEADER.size + length
    if len(buffer) < end:
        raise TruncatedMessage(
            f"payload truncated: have {len(buffer) - _HEADER.size} of {length} bytes"
        )
    if len(buffer) > end:
        raise LengthMismatch(f"{len(buffer) - end} trailing bytes after one message")
    return _DECODERS[kind](bytes(buffer[_HEADER.size : end]))


class FrameDecoder:
    """Incremental splitter for a byte stream of concatenated messages."""

    def __init__(self):
        self._buffer = bytearray()

    @property
    def pending(self) -> int:
        return len(self._buffer)

    def feed(self, data: bytes) -> list:
        """Absorb bytes and return every complete message now available."""
        self._buffer.extend(data)
        out = []
        while True:
            try:
                kind, length = _check_header(self._buffer)
            except TruncatedMessage:
                break
            end = _HEADER.size + length
            if len(self._buffer) < end:
                break
            payload = bytes(self._buffer[_HEADER.size : end])
            del self._buffer[:end]
            out.append(_DECODERS[kind](payload))
        return out


def crop_cloud(cloud: PointCloud, radius: float = 2.0) -> PointCloud:
    """Keep exactly the points within the radius of the origin, in order."""
    if radius <= 0:
        raise ProtocolError("crop radius must be positive")
    d2 = np.einsum("ij,ij->i", cloud.points, cloud.points)
    keep = d2 <= np.float32(radius) ** 2
    return PointCloud(points=cloud.points[keep], colors=cloud.colors[keep])


def write_log(path, messages) -> int:
    """Append-free write of messages to a .tlog/.skel file; returns a count."""
    n = 0
    with open(path, "wb") as fh:
        for m in messages:
            fh.write(encode(m))
            n += 1
    return n


def read_log(path) -> list:
    """Read every message from a concatenated log file."""
    decoder = FrameDecoder()
    with open(path, "rb") as fh:
        out = decoder.feed(fh.read())
    if decoder.pending:
        raise TruncatedMessage(f"log ends mid-message with {decoder.pending} stray bytes")
    return out
