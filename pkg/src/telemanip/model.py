"""Robot model: kinematic tree description, validation and JSON loading.

The model file is a single JSON document (schema: docs/model.schema.json)
with keys ``links[]``, ``joints[]``, ``contacts[]`` plus optional named
``frames[]``, a ``home`` joint map, per-leg metadata and the arm
end-effector frame name. SI units, angles in radians.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .rotations import quat_normalize, rpy_to_matrix, matrix_to_quat

FLOATING = "floating"
REVOLUTE = "revolute"
WORLD = "world"

LEG_ORDER = ("LF", "RF", "LH", "RH")
# diagonal virtual-leg pairing for the trot
DIAGONAL_PAIRS = {"A": ("LF", "RH"), "B": ("RF", "LH")}


class ModelError(ValueError):
    """Raised when a model file is malformed or violates a model invariant."""


@dataclass(frozen=True)
class Link:
    name: str
    mass: float
    inertia: np.ndarray  # 3x3 about the link COM, link frame
    com: np.ndarray  # COM offset in the link frame


@dataclass(frozen=True)
class Joint:
    name: str
    kind: str  # FLOATING | REVOLUTE
    parent: str
    child: str
    axis: np.ndarray  # unit vector, child frame
    origin_pos: np.ndarray  # fixed transform from parent frame
    origin_quat: np.ndarray
    position_limits: tuple[float, float]
    torque_limits: tuple[float, float]


@dataclass(frozen=True)
class FrameDef:
    """Named frame rigidly attached to a link."""

    name: str
    link: str
    offset: np.ndarray
    quat: np.ndarray


@dataclass(frozen=True)
class LegInfo:
    hip_frame: str
    foot: str


@dataclass(frozen=True, eq=False)
class RobotModel:
    name: str
    links: tuple[Link, ...]
    joints: tuple[Joint, ...]
    frames: tuple[FrameDef, ...]
    contact_names: tuple[str, ...]
    home: np.ndarray  # actuated home configuration
    legs: dict[str, LegInfo]
    end_effector: str
    gripper_joint: str
    # derived structure, filled in by load()/build()
    link_index: dict[str, int] = field(default_factory=dict, compare=False)
    joint_index: dict[str, int] = field(default_factory=dict, compare=False)
    frame_map: dict[str, FrameDef] = field(default_factory=dict, compare=False)
    parent_joint: tuple[int, ...] = field(default=(), compare=False)  # per link, -1 for root
    topological: tuple[int, ...] = field(default=(), compare=False)  # link indices, root first
    actuated_joints: tuple[int, ...] = field(default=(), compare=False)  # joint idx per q_a slot

    @property
    def actuated_count(self) -> int:
        return len(self.actuated_joints)

    @property
    def nv(self) -> int:
        """Generalized velocity dimension: 6 floating + actuated."""
        return 6 + self.actuated_count

    @property
    def total_mass(self) -> float:
        return float(sum(l.mass for l in self.links))

    def torque_limit_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        lo = np.array([self.joints[j].torque_limits[0] for j in self.actuated_joints])
        hi = np.array([self.joints[j].torque_limits[1] for j in self.actuated_joints])
        return lo, hi

    def actuated_names(self) -> list[str]:
        return [self.joints[j].name for j in self.actuated_joints]


@dataclass
class GeneralizedState:
    """Floating-base pose/twist plus actuated positions/velocities.

    base_quat is [w, x, y, z]; base_vel is the world-frame linear velocity of
    the base origin and base_angvel the world-frame angular velocity.
    """

    base_pos: np.ndarray
    base_quat: np.ndarray
    q_a: np.ndarray
    base_vel: np.ndarray
    base_angvel: np.ndarray
    qd_a: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        self.base_pos = np.asarray(self.base_pos, dtype=float)
        self.base_quat = np.asarray(self.base_quat, dtype=float)
        self.q_a = np.asarray(self.q_a, dtype=float)
        self.base_vel = np.asarray(self.base_vel, dtype=float)
        self.base_angvel = np.asarray(self.base_angvel, dtype=float)
        self.qd_a = np.asarray(self.qd_a, dtype=float)

    def validate(self, model: RobotModel) -> None:
        n = model.actuated_count
        if self.q_a.shape != (n,) or self.qd_a.shape != (n,):
            raise ModelError(
                f"state dimension mismatch: expected {n} actuated joints, "
                f"got q_a {self.q_a.shape} qd_a {self.qd_a.shape}"
            )
        if abs(np.linalg.norm(self.base_quat) - 1.0) > 1e-9:
            raise ModelError("base quaternion is not unit norm")

    @property
    def u(self) -> np.ndarray:
        """Stacked generalized velocity [v_base, w_base, qd_a]."""
        return np.concatenate([self.base_vel, self.base_angvel, self.qd_a])

    def copy(self) -> "GeneralizedState":
        return GeneralizedState(
            self.base_pos.copy(),
            self.base_quat.copy(),
            self.q_a.copy(),
            self.base_vel.copy(),
            self.base_angvel.copy(),
            self.qd_a.copy(),
            self.time,
        )


def neutral_state(model: RobotModel, base_height: float | None = None) -> GeneralizedState:
    """Home configuration at rest. Base height defaults to the model home pose."""
    n = model.actuated_count
    z = 0.4 if base_height is None else base_height
    return GeneralizedState(
        base_pos=np.array([0.0, 0.0, z]),
        base_quat=np.array([1.0, 0.0, 0.0, 0.0]),
        q_a=model.home.copy(),
        base_vel=np.zeros(3),
        base_angvel=np.zeros(3),
        qd_a=np.zeros(n),
        time=0.0,
    )


def _check_inertia(name: str, inertia: np.ndarray) -> None:
    if not np.allclose(inertia, inertia.T, atol=1e-12):
        raise ModelError(f"link '{name}': inertia matrix is not symmetric")
    eig = np.linalg.eigvalsh(inertia)
    if eig[0] <= 0:
        raise ModelError(f"link '{name}': inertia is not positive definite (min eig {eig[0]:.3g})")
    a, b, c = np.sort(eig)
    if a + b < c - 1e-12:
        raise ModelError(f"link '{name}': principal moments violate the triangle inequality")


def _validate(model: RobotModel) -> None:
    for link in model.links:
        if link.mass <= 0:
            raise ModelError(f"link '{link.name}': mass must be positive, got {link.mass}")
        _check_inertia(link.name, link.inertia)

    floating = [j for j in model.joints if j.kind == FLOATING]
    if len(floating) != 1:
        raise ModelError(f"expected exactly one floating joint, found {len(floating)}")
    if floating[0].parent != WORLD:
        raise ModelError(f"floating joint '{floating[0].name}' must attach to '{WORLD}'")

    for joint in model.joints:
        if joint.kind not in (FLOATING, REVOLUTE):
            raise ModelError(f"joint '{joint.name}': unknown kind '{joint.kind}'")
        if joint.parent != WORLD and joint.parent not in model.link_index:
            raise ModelError(f"joint '{joint.name}': unknown parent link '{joint.parent}'")
        if joint.child not in model.link_index:
            raise ModelError(f"joint '{joint.name}': unknown child link '{joint.child}'")
        if joint.kind == REVOLUTE:
            lo, hi = joint.torque_limits
            if not lo < hi:
                raise ModelError(f"joint '{joint.name}': torque limits must satisfy min < max")
            if abs(np.linalg.norm(joint.axis) - 1.0) > 1e-6:
                raise ModelError(f"joint '{joint.name}': rotation axis must be a unit vector")

    children: dict[str, list[str]] = {}
    child_counts: dict[str, int] = {}
    for joint in model.joints:
        children.setdefault(joint.parent, []).append(joint.child)
        child_counts[joint.child] = child_counts.get(joint.child, 0) + 1
    for name, count in child_counts.items():
        if count > 1:
            raise ModelError(f"link '{name}' has multiple parent joints (cycle or reconvergence)")

    # reachability from world == no cycles for a connected model
    seen: set[str] = set()
    stack = [WORLD]
    while stack:
        node = stack.pop()
        for child in children.get(node, []):
            if child in seen:
                raise ModelError(f"cycle detected at link '{child}'")
            seen.add(child)
            stack.append(child)
    unreachable = set(model.link_index) - seen
    if unreachable:
        raise ModelError(f"links not connected to the tree root: {sorted(unreachable)}")

    for fr in model.frames:
        if fr.link not in model.link_index:
            raise ModelError(f"frame '{fr.name}': unknown link '{fr.link}'")
    for cname in model.contact_names:
        if cname not in model.frame_map:
            raise ModelError(f"contact '{cname}' has no frame definition")


def _derive_structure(
    name: str,
    links: list[Link],
    joints: list[Joint],
    frames: list[FrameDef],
    contacts: list[str],
    home_map: dict[str, float],
    legs: dict[str, LegInfo],
    end_effector: str,
    gripper_joint: str,
) -> RobotModel:
    link_index = {l.name: i for i, l in enumerate(links)}
    joint_index = {j.name: i for i, j in enumerate(joints)}
    if len(link_index) != len(links):
        raise ModelError("duplicate link names")
    if len(joint_index) != len(joints):
        raise ModelError("duplicate joint names")

    parent_joint = [-1] * len(links)
    for ji, joint in enumerate(joints):
        if joint.parent != WORLD and joint.parent not in link_index:
            raise ModelError(f"joint '{joint.name}': unknown parent link '{joint.parent}'")
        if joint.child in link_index:
            li = link_index[joint.child]
            if parent_joint[li] != -1:
                raise ModelError(f"link '{joint.child}' has multiple parent joints")
            parent_joint[li] = ji

    # topological order: repeatedly emit links whose parent is world or already emitted
    emitted: list[int] = []
    emitted_set: set[str] = set()
    pending = set(range(len(links)))
    while pending:
        progress = False
        for li in sorted(pending):
            ji = parent_joint[li]
            if ji == -1:
                raise ModelError(f"link '{links[li].name}' has no parent joint")
            parent = joints[ji].parent
            if parent == WORLD or parent in emitted_set:
                emitted.append(li)
                emitted_set.add(links[li].name)
                pending.discard(li)
                progress = True
        if not progress:
            stuck = sorted(links[li].name for li in pending)
            raise ModelError(f"joint graph is not a tree (cycle through {stuck})")

    actuated = tuple(ji for ji, j in enumerate(joints) if j.kind == REVOLUTE)

    frame_map = {f.name: f for f in frames}
    # link origins are addressable as frames too
    for link in links:
        if link.name not in frame_map:
            frame_map[link.name] = FrameDef(
                link.name, link.name, np.zeros(3), np.array([1.0, 0.0, 0.0, 0.0])
            )

    home = np.zeros(len(actuated))
    for slot, ji in enumerate(actuated):
        home[slot] = home_map.get(joints[ji].name, 0.0)

    model = RobotModel(
        name=name,
        links=tuple(links),
        joints=tuple(joints),
        frames=tuple(frames),
        contact_names=tuple(contacts),
        home=home,
        legs=legs,
        end_effector=end_effector,
        gripper_joint=gripper_joint,
        link_index=link_index,
        joint_index=joint_index,
        frame_map=frame_map,
        parent_joint=tuple(parent_joint),
        topological=tuple(emitted),
        actuated_joints=actuated,
    )
    _validate(model)
    return model


def _parse_origin(spec: dict) -> tuple[np.ndarray, np.ndarray]:
    pos = np.asarray(spec.get("xyz", [0.0, 0.0, 0.0]), dtype=float)
    rpy = spec.get("rpy", [0.0, 0.0, 0.0])
    quat = matrix_to_quat(rpy_to_matrix(*rpy))
    return pos, quat


def load_model_dict(doc: dict) -> RobotModel:
    """Build and validate a RobotModel from a parsed JSON document."""
    try:
        links = [
            Link(
                name=str(entry["name"]),
                mass=float(entry["mass"]),
                inertia=np.asarray(entry["inertia"], dtype=float).reshape(3, 3),
                com=np.asarray(entry.get("com", [0, 0, 0]), dtype=float),
            )
            for entry in doc["links"]
        ]
        joints = []
        for entry in doc["joints"]:
            kind = str(entry["kind"])
            pos, quat = _parse_origin(entry.get("origin", {}))
            axis = np.asarray(entry.get("axis", [0, 0, 1]), dtype=float)
            joints.append(
                Joint(
                    name=str(entry["name"]),
                    kind=kind,
                    parent=str(entry["parent"]),
                    child=str(entry["child"]),
                    axis=axis,
                    origin_pos=pos,
                    origin_quat=quat_normalize(quat),
                    position_limits=tuple(entry.get("position_limits", (-3.2, 3.2))),
                    torque_limits=tuple(entry.get("torque_limits", (-30.0, 30.0))),
                )
            )
        frames = []
        for entry in doc.get("frames", []) + doc.get("contacts", []):
            fpos = np.asarray(entry.get("offset", [0, 0, 0]), dtype=float)
            rpy = entry.get("rpy", [0.0, 0.0, 0.0])
            frames.append(
                FrameDef(
                    name=str(entry["name"]),
                    link=str(entry["link"]),
                    offset=fpos,
                    quat=matrix_to_quat(rpy_to_matrix(*rpy)),
                )
            )
        contacts = [str(entry["name"]) for entry in doc.get("contacts", [])]
        legs = {
            leg: LegInfo(hip_frame=str(spec["hip_frame"]), foot=str(spec["foot"]))
            for leg, spec in doc.get("legs", {}).items()
        }
        home_map = {str(k): float(v) for k, v in doc.get("home", {}).items()}
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ModelError):
            raise
        raise ModelError(f"malformed model document: {exc}") from exc

    return _derive_structure(
        name=str(doc.get("name", "robot")),
        links=links,
        joints=joints,
        frames=frames,
        contacts=contacts,
        home_map=home_map,
        legs=legs,
        end_effector=str(doc.get("end_effector", "")),
        gripper_joint=str(doc.get("gripper_joint", "")),
    )


def load_model(source: str | Path) -> RobotModel:
    """Load a model from a JSON file path, or the shipped default for 'default'."""
    if str(source) == "default":
        return default_model()
    path = Path(source)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ModelError(f"cannot read model file '{path}': {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelError(f"model file '{path}' is not valid JSON: {exc}") from exc
    return load_model_dict(doc)


_DEFAULT_CACHE: RobotModel | None = None


def default_model() -> RobotModel:
    """The shipped desk-scale quadruped-manipulator model."""
    global _DEFAULT_CACHE
    if _DEFAULT_CACHE is None:
        text = resources.files("telemanip.data.models").joinpath("default.json").read_text()
        _DEFAULT_CACHE = load_model_dict(json.loads(text))
    return _DEFAULT_CACHE
