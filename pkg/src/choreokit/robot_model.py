"""Robot description, forward kinematics, and trajectory safety checks.

The arm is a fixed-base serial chain of six revolute joints. Everything
numeric about a specific robot (axes, link offsets, limits, control rate,
collision clearance) lives in a profile file; this module never hardcodes
geometry. The shipped default profile describes a UR5e.

Profile file schema (YAML)::

    name: ur5e
    control_rate_hz: 500.0
    collision_clearance_m: 0.10
    joints:                      # exactly six, base to tool
      - name: shoulder_pan
        axis: [0.0, 0.0, 1.0]    # rotation axis, local frame
        offset_m: [x, y, z]      # fixed link translation after the rotation
        rpy_rad: [r, p, y]       # fixed link rotation after the translation
        position_limits_rad: [lo, hi]
        velocity_limit_rad_s: v
        acceleration_limit_rad_s2: a

Joint i contributes the transform Rot(axis, q_i) * Trans(offset) * Rpy(rpy),
composed left to right from the base. The chain points returned by
forward_kinematics are the base origin plus the frame origin after each
joint, seven points in all, so consecutive point distances equal the link
offset lengths and the last point is the tool.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from importlib import resources

import numpy as np
import yaml

from .errors import IngestError, InputError
from .trajectory import N_JOINTS, Trajectory

DEFAULT_CLEARANCE_M = 0.10
DEFAULT_CONTROL_RATE_HZ = 500.0


@dataclass(frozen=True)
class JointDef:
    name: str
    axis: tuple[float, float, float]
    offset_m: tuple[float, float, float]
    rpy_rad: tuple[float, float, float]
    position_limits_rad: tuple[float, float]
    velocity_limit_rad_s: float
    acceleration_limit_rad_s2: float

    def __post_init__(self) -> None:
        lo, hi = self.position_limits_rad
        if not lo < hi:
            raise InputError(f"joint {self.name}: position limits not ordered")
        if self.velocity_limit_rad_s <= 0 or self.acceleration_limit_rad_s2 <= 0:
            raise InputError(f"joint {self.name}: rate limits must be positive")
        norm = math.sqrt(sum(c * c for c in self.axis))
        if norm < 1e-9:
            raise InputError(f"joint {self.name}: zero rotation axis")
        # Store the axis normalized so profiles may write e.g. [0, 0, 2].
        object.__setattr__(
            self, "axis", tuple(float(c) / norm for c in self.axis)
        )


@dataclass(frozen=True)
class RobotProfile:
    name: str
    joints: tuple[JointDef, ...]
    control_rate_hz: float = DEFAULT_CONTROL_RATE_HZ
    collision_clearance_m: float = DEFAULT_CLEARANCE_M

    def __post_init__(self) -> None:
        if len(self.joints) != N_JOINTS:
            raise InputError(f"profile needs {N_JOINTS} joints, got {len(self.joints)}")
        names = [j.name for j in self.joints]
        if len(set(names)) != N_JOINTS:
            raise InputError("joint names must be unique")
        if self.control_rate_hz <= 0:
            raise InputError("control_rate_hz must be positive")
        if self.collision_clearance_m <= 0:
            raise InputError("collision_clearance_m must be positive")

    def joint_names(self) -> tuple[str, ...]:
        return tuple(j.name for j in self.joints)

    def neutral_q(self) -> np.ndarray:
        """Midpoint of every joint's position limits; the reroute waypoint."""
        return np.array(
            [(j.position_limits_rad[0] + j.position_limits_rad[1]) / 2.0 for j in self.joints]
        )


def load_profile(path) -> RobotProfile:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = yaml.safe_load(fh)
    except OSError as exc:
        raise IngestError(f"cannot read profile {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise IngestError(f"profile {path} is not valid YAML: {exc}") from exc
    if not isinstance(doc, dict) or "joints" not in doc:
        raise IngestError(f"profile {path}: expected a mapping with a joints list")
    try:
        joints = tuple(
            JointDef(
                name=str(j["name"]),
                axis=tuple(float(v) for v in j["axis"]),
                offset_m=tuple(float(v) for v in j["offset_m"]),
                rpy_rad=tuple(float(v) for v in j["rpy_rad"]),
                position_limits_rad=tuple(float(v) for v in j["position_limits_rad"]),
                velocity_limit_rad_s=float(j["velocity_limit_rad_s"]),
                acceleration_limit_rad_s2=float(j["acceleration_limit_rad_s2"]),
            )
            for j in doc["joints"]
        )
        return RobotProfile(
            name=str(doc.get("name", "unnamed")),
            joints=joints,
            control_rate_hz=float(doc.get("control_rate_hz", DEFAULT_CONTROL_RATE_HZ)),
            collision_clearance_m=float(doc.get("collision_clearance_m", DEFAULT_CLEARANCE_M)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise IngestError(f"profile {path}: {exc}") from exc


def default_profile() -> RobotProfile:
    """The packaged UR5e profile."""
    ref = resources.files("choreokit").joinpath("data/ur5e.profile")
    with resources.as_file(ref) as path:
        return load_profile(path)


def axis_rotation(axis: tuple[float, float, float], angle: float) -> np.ndarray:
    """Rodrigues rotation about a unit axis."""
    x, y, z = axis
    c = math.cos(angle)
    s = math.sin(angle)
    cc = 1.0 - c
    return np.array(
        [
            [c + x * x * cc, x * y * cc - z * s, x * z * cc + y * s],
            [y * x * cc + z * s, c + y * y * cc, y * z * cc - x * s],
            [z * x * cc - y * s, z * y * cc + x * s, c + z * z * cc],
        ]
    )


def rpy_rotation(rpy: tuple[float, float, float]) -> np.ndarray:
    r, p, y = rpy
    return (
        axis_rotation((0.0, 0.0, 1.0), y)
        @ axis_rotation((0.0, 1.0, 0.0), p)
        @ axis_rotation((1.0, 0.0, 0.0), r)
    )


@dataclass(frozen=True)
class LinkPoints:
    """Chain points in the base frame: base origin, then the frame origin
    after each of the six joints. The last point is the tool."""

    p: np.ndarray  # shape (7, 3)

    def wrist_segments(self) -> list[tuple[np.ndarray, np.ndarray]]:
        return [(self.p[4], self.p[5]), (self.p[5], self.p[6])]

    def proximal_segments(self) -> list[tuple[np.ndarray, np.ndarray]]:
        return [(self.p[0], self.p[1]), (self.p[1], self.p[2])]


def forward_kinematics(profile: RobotProfile, q) -> LinkPoints:
    q = np.asarray(q, dtype=float)
    if q.shape != (N_JOINTS,):
        raise InputError(f"expected {N_JOINTS} joint angles, got shape {q.shape}")
    if not np.all(np.isfinite(q)):
        raise InputError("joint angles must be finite")
    pts = np.zeros((N_JOINTS + 1, 3))
    rot = np.eye(3)
    pos = np.zeros(3)
    for i, joint in enumerate(profile.joints):
        rot = rot @ axis_rotation(joint.axis, float(q[i]))
        pos = pos + rot @ np.asarray(joint.offset_m)
        rot = rot @ rpy_rotation(joint.rpy_rad)
        pts[i + 1] = pos
    return LinkPoints(p=pts)


def segment_distance(a0, a1, b0, b1) -> float:
    """Minimum distance between segments [a0,a1] and [b0,b1].

    Scalar arithmetic on purpose: this runs once per sample pair inside
    trajectory validation and small-array numpy overhead dominates there.
    """
    a0x, a0y, a0z = float(a0[0]), float(a0[1]), float(a0[2])
    a1x, a1y, a1z = float(a1[0]), float(a1[1]), float(a1[2])
    b0x, b0y, b0z = float(b0[0]), float(b0[1]), float(b0[2])
    b1x, b1y, b1z = float(b1[0]), float(b1[1]), float(b1[2])
    d1x, d1y, d1z = a1x - a0x, a1y - a0y, a1z - a0z
    d2x, d2y, d2z = b1x - b0x, b1y - b0y, b1z - b0z
    rx, ry, rz = a0x - b0x, a0y - b0y, a0z - b0z
    aa = d1x * d1x + d1y * d1y + d1z * d1z
    ee = d2x * d2x + d2y * d2y + d2z * d2z
    ff = d2x * rx + d2y * ry + d2z * rz
    eps = 1e-15
    if aa <= eps and ee <= eps:
        return math.sqrt(rx * rx + ry * ry + rz * rz)
    if aa <= eps:
        s = 0.0
        t = min(1.0, max(0.0, ff / ee))
    else:
        cc = d1x * rx + d1y * ry + d1z * rz
        if ee <= eps:
            t = 0.0
            s = min(1.0, max(0.0, -cc / aa))
        else:
            bb = d1x * d2x + d1y * d2y + d1z * d2z
            denom = aa * ee - bb * bb
            s = min(1.0, max(0.0, (bb * ff - cc * ee) / denom)) if denom > eps else 0.0
            t = (bb * s + ff) / ee
            if t < 0.0:
                t = 0.0
                s = min(1.0, max(0.0, -cc / aa))
            elif t > 1.0:
                t = 1.0
                s = min(1.0, max(0.0, (bb - cc) / aa))
    px = a0x + s * d1x - (b0x + t * d2x)
    py = a0y + s * d1y - (b0y + t * d2y)
    pz = a0z + s * d1z - (b0z + t * d2z)
    return math.sqrt(px * px + py * py + pz * pz)


@dataclass(frozen=True)
class CollisionCheck:
    risk: bool
    min_distance_m: float


def self_collision_risk(
    profile: RobotProfile, q, clearance_m: float | None = None
) -> CollisionCheck:
    """Wrist-versus-body proximity heuristic.

    Takes the minimum distance between the two wrist-side segments of the
    chain (points 4-5-6, wrist links and tool) and the two proximal
    segments (points 0-1-2, base and upper arm). Risk means that distance
    fell below the clearance. Adjacent links are excluded by construction,
    so a straight arm reports a comfortably large distance.
    """
    if clearance_m is None:
        clearance_m = profile.collision_clearance_m
    pts = forward_kinematics(profile, q)
    dmin = math.inf
    for a0, a1 in pts.wrist_segments():
        for b0, b1 in pts.proximal_segments():
            dmin = min(dmin, segment_distance(a0, a1, b0, b1))
    return CollisionCheck(risk=dmin < clearance_m, min_distance_m=dmin)


@dataclass(frozen=True)
class Violation:
    kind: str  # position | velocity | acceleration | collision
    sample: int
    joint: int | None
    value: float
    limit: float

    def describe(self, profile: RobotProfile) -> str:
        where = "chain" if self.joint is None else profile.joints[self.joint].name
        return (
            f"sample {self.sample}: {self.kind} on {where}: "
            f"{self.value:.6g} vs limit {self.limit:.6g}"
        )


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...]

    @property
    def ok(self) -> bool:
        return not self.violations

    def lines(self, profile: RobotProfile) -> list[str]:
        return [v.describe(profile) for v in self.violations]


def validate_trajectory(profile: RobotProfile, traj: Trajectory) -> ValidationReport:
    """Check a trajectory against position, velocity, acceleration, and
    self-collision constraints.

    Velocities are central finite differences with one-sided stencils at the
    endpoints; accelerations use the central second difference (one-sided at
    the ends, skipped entirely for two-sample trajectories). Every offending
    sample index is reported, not just the first.
    """
    n = len(traj)
    if n < 2:
        raise InputError("validate_trajectory needs at least 2 samples")
    qs = traj.qs
    rate = traj.rate
    out: list[Violation] = []

    for j, joint in enumerate(profile.joints):
        lo, hi = joint.position_limits_rad
        col = qs[:, j]
        for i in np.nonzero((col < lo) | (col > hi))[0]:
            out.append(Violation("position", int(i), j, float(col[i]), hi if col[i] > hi else lo))

    vel = np.empty_like(qs)
    vel[0] = (qs[1] - qs[0]) * rate
    vel[-1] = (qs[-1] - qs[-2]) * rate
    if n > 2:
        vel[1:-1] = (qs[2:] - qs[:-2]) * (rate / 2.0)
    for j, joint in enumerate(profile.joints):
        vlim = joint.velocity_limit_rad_s
        col = np.abs(vel[:, j])
        for i in np.nonzero(col > vlim)[0]:
            out.append(Violation("velocity", int(i), j, float(col[i]), vlim))

    if n > 2:
        acc = np.empty_like(qs)
        acc[1:-1] = (qs[2:] - 2.0 * qs[1:-1] + qs[:-2]) * rate * rate
        acc[0] = (qs[2] - 2.0 * qs[1] + qs[0]) * rate * rate
        acc[-1] = (qs[-1] - 2.0 * qs[-2] + qs[-3]) * rate * rate
        for j, joint in enumerate(profile.joints):
            alim = joint.acceleration_limit_rad_s2
            col = np.abs(acc[:, j])
            for i in np.nonzero(col > alim)[0]:
                out.append(Violation("acceleration", int(i), j, float(col[i]), alim))

    clearance = profile.collision_clearance_m
    for i in range(n):
        check = self_collision_risk(profile, qs[i])
        if check.risk:
            out.append(Violation("collision", i, None, check.min_distance_m, clearance))

    out.sort(key=lambda v: (v.sample, v.kind, -1 if v.joint is None else v.joint))
    return ValidationReport(violations=tuple(out))
