"""Sinusoidal motion motifs and minimum-jerk transitions.

Every motif joint follows

    q(t) = env(t) * A * cos(omega * t + phi) + gamma

with an optional exponential-decay envelope env(t) = e^(-B t), t counted
from the start of the motif. gamma doubles as the stage-facing offset on
the base joint: quarter-turn steps point the arm upstage, at the dancer,
at the audience, or stage left.

Motif file schema (YAML)::

    id: stirring
    label: human readable name
    duration_s: 6.0
    joints:              # one block per joint, keyed by joint name
      shoulder_pan:
        A_rad: 0.0
        freq_hz: 0.0     # exactly one of freq_hz / omega_rad_s
        phi_rad: 0.0
        gamma_rad: 1.5707963267948966
        envelope: {kind: constant}            # or {kind: exp_decay, B_per_s: 0.2}
      ...

Transitions between poses are quintic minimum-jerk curves, which start and
end with zero velocity and acceleration so chained playback never steps.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import yaml

from .errors import IngestError, InputError, PlanningError
from .robot_model import RobotProfile, ValidationReport, validate_trajectory
from .trajectory import JOINT_NAMES, N_JOINTS, Trajectory, uniform_times

# Stage facings for the base joint, quarter turns starting upstage.
FACING_GAMMA_RAD = {
    "upstage": 0.0,
    "dancer": math.pi / 2.0,
    "audience": math.pi,
    "stage_left": 3.0 * math.pi / 2.0,
}

# Amplitudes are expected inside this band; outside is unusual, not illegal.
AMPLITUDE_SOFT_MAX_RAD = math.pi / 2.0


class AmplitudeWarning(UserWarning):
    pass


@dataclass(frozen=True)
class Envelope:
    kind: str = "constant"  # constant | exp_decay
    B_per_s: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in ("constant", "exp_decay"):
            raise InputError(f"unknown envelope kind {self.kind!r}")
        if self.kind == "exp_decay" and self.B_per_s < 0:
            raise InputError("exp_decay envelope needs B_per_s >= 0")

    def value(self, t: float) -> float:
        if self.kind == "constant":
            return 1.0
        return math.exp(-self.B_per_s * t)


@dataclass(frozen=True)
class SinusoidSpec:
    A_rad: float = 0.0
    omega_rad_s: float = 0.0
    phi_rad: float = 0.0
    gamma_rad: float = 0.0
    envelope: Envelope = field(default_factory=Envelope)

    def __post_init__(self) -> None:
        if not all(
            math.isfinite(v)
            for v in (self.A_rad, self.omega_rad_s, self.phi_rad, self.gamma_rad)
        ):
            raise InputError("sinusoid parameters must be finite")
        if not 0.0 <= self.A_rad <= AMPLITUDE_SOFT_MAX_RAD:
            warnings.warn(
                f"amplitude {self.A_rad:.4g} rad is outside the usual 0..pi/2 band",
                AmplitudeWarning,
                stacklevel=2,
            )

    @classmethod
    def from_freq(cls, A_rad: float, freq_hz: float, phi_rad: float = 0.0,
                  gamma_rad: float = 0.0, envelope: Envelope | None = None) -> SinusoidSpec:
        return cls(
            A_rad=A_rad,
            omega_rad_s=2.0 * math.pi * freq_hz,
            phi_rad=phi_rad,
            gamma_rad=gamma_rad,
            envelope=envelope if envelope is not None else Envelope(),
        )


def eval_joint(spec: SinusoidSpec, t: float) -> float:
    """The motif law: env(t) * A * cos(omega t + phi) + gamma."""
    return (
        spec.envelope.value(t) * spec.A_rad * math.cos(spec.omega_rad_s * t + spec.phi_rad)
        + spec.gamma_rad
    )


def facing_gamma(facing: str) -> float:
    try:
        return FACING_GAMMA_RAD[facing]
    except KeyError:
        raise InputError(
            f"unknown facing {facing!r}; expected one of {sorted(FACING_GAMMA_RAD)}"
        ) from None


@dataclass(frozen=True)
class MotifSpec:
    id: str
    label: str
    duration_s: float
    joints: tuple[SinusoidSpec, ...]  # canonical joint order

    def __post_init__(self) -> None:
        if self.duration_s <= 0:
            raise InputError("motif duration_s must be positive")
        if len(self.joints) != N_JOINTS:
            raise InputError(f"motif needs {N_JOINTS} joint specs")


def _envelope_from_doc(doc) -> Envelope:
    if doc is None:
        return Envelope()
    if not isinstance(doc, dict) or "kind" not in doc:
        raise InputError("envelope block needs a 'kind'")
    if doc["kind"] == "exp_decay" and "B_per_s" not in doc:
        raise InputError("exp_decay envelope needs B_per_s")
    return Envelope(kind=doc["kind"], B_per_s=float(doc.get("B_per_s", 0.0)))


def _sinusoid_from_doc(name: str, doc) -> SinusoidSpec:
    if not isinstance(doc, dict):
        raise InputError(f"joint {name}: expected a parameter block")
    has_freq = "freq_hz" in doc
    has_omega = "omega_rad_s" in doc
    if has_freq == has_omega:
        raise InputError(f"joint {name}: give exactly one of freq_hz / omega_rad_s")
    omega = 2.0 * math.pi * float(doc["freq_hz"]) if has_freq else float(doc["omega_rad_s"])
    return SinusoidSpec(
        A_rad=float(doc.get("A_rad", 0.0)),
        omega_rad_s=omega,
        phi_rad=float(doc.get("phi_rad", 0.0)),
        gamma_rad=float(doc.get("gamma_rad", 0.0)),
        envelope=_envelope_from_doc(doc.get("envelope")),
    )


def load_motif(path) -> MotifSpec:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = yaml.safe_load(fh)
    except OSError as exc:
        raise IngestError(f"cannot read motif {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise IngestError(f"motif {path} is not valid YAML: {exc}") from exc
    if not isinstance(doc, dict):
        raise IngestError(f"motif {path}: expected a mapping")
    try:
        blocks = doc["joints"]
        missing = [n for n in JOINT_NAMES if n not in blocks]
        if missing:
            raise InputError(f"missing joint blocks: {', '.join(missing)}")
        unknown = [n for n in blocks if n not in JOINT_NAMES]
        if unknown:
            raise InputError(f"unknown joint names: {', '.join(unknown)}")
        return MotifSpec(
            id=str(doc["id"]),
            label=str(doc.get("label", doc["id"])),
            duration_s=float(doc["duration_s"]),
            joints=tuple(_sinusoid_from_doc(n, blocks[n]) for n in JOINT_NAMES),
        )
    except KeyError as exc:
        raise IngestError(f"motif {path}: missing field {exc}") from exc
    except InputError as exc:
        raise IngestError(f"motif {path}: {exc}") from exc


def sample_motif(motif: MotifSpec, rate: float) -> Trajectory:
    """Sample every joint at t = k/rate, k = 0..floor(duration*rate)."""
    if rate <= 0:
        raise InputError("rate must be positive")
    n = int(math.floor(motif.duration_s * rate)) + 1
    ts = uniform_times(n, rate)
    qs = np.empty((n, N_JOINTS))
    for j, spec in enumerate(motif.joints):
        env = (
            np.exp(-spec.envelope.B_per_s * ts)
            if spec.envelope.kind == "exp_decay"
            else 1.0
        )
        qs[:, j] = env * spec.A_rad * np.cos(spec.omega_rad_s * ts + spec.phi_rad) + spec.gamma_rad
    return Trajectory(rate=rate, ts=ts, qs=qs, source="motif")


def _quintic_s(u: np.ndarray) -> np.ndarray:
    # 10u^3 - 15u^4 + 6u^5: zero velocity and acceleration at both ends.
    return u * u * u * (10.0 + u * (-15.0 + 6.0 * u))


def make_transition(q_from, q_to, duration_s: float, rate: float) -> Trajectory:
    """Quintic minimum-jerk move between two poses.

    The curve completes at the last sample time floor(duration*rate)/rate so
    the final sample lands exactly on q_to; for integer duration*rate that
    is the requested duration itself.
    """
    if duration_s <= 0:
        raise InputError("transition duration must be positive")
    if rate <= 0:
        raise InputError("rate must be positive")
    q_from = np.asarray(q_from, dtype=float)
    q_to = np.asarray(q_to, dtype=float)
    if q_from.shape != (N_JOINTS,) or q_to.shape != (N_JOINTS,):
        raise InputError("transition endpoints must be 6-joint vectors")
    n_steps = int(math.floor(duration_s * rate))
    if n_steps < 1:
        raise InputError("duration too short to sample at this rate")
    ts = uniform_times(n_steps + 1, rate)
    s = _quintic_s(ts / ts[-1])
    qs = q_from[None, :] + np.outer(s, q_to - q_from)
    return Trajectory(rate=rate, ts=ts, qs=qs, source="transition")


def plan_safe_transition(
    profile: RobotProfile,
    q_from,
    q_to,
    duration_s: float = 2.0,
    rate: float | None = None,
) -> Trajectory:
    """Validated transition between poses.

    Tries the direct quintic first. If validation rejects it, reroutes
    through the profile's neutral waypoint (all joints at limit midpoints)
    with two chained quintics, each over the full requested duration so the
    reroute never moves faster than the direct attempt would have. If both
    plans fail, raises PlanningError carrying both validation reports.
    """
    if rate is None:
        rate = profile.control_rate_hz
    direct = make_transition(q_from, q_to, duration_s, rate)
    report = validate_trajectory(profile, direct)
    if report.ok:
        return direct

    neutral = profile.neutral_q()
    leg1 = make_transition(q_from, neutral, duration_s, rate)
    leg2 = make_transition(neutral, q_to, duration_s, rate)
    n = len(leg1) + len(leg2) - 1  # waypoint sample shared
    via = Trajectory(
        rate=rate,
        ts=uniform_times(n, rate),
        qs=np.vstack([leg1.qs, leg2.qs[1:]]),
        source="transition",
    )
    via_report = validate_trajectory(profile, via)
    if via_report.ok:
        return via
    raise PlanningError(
        "direct and rerouted transitions both failed validation",
        [report, via_report],
    )


def transition_reports(
    profile: RobotProfile, q_from, q_to, duration_s: float, rate: float | None = None
) -> tuple[Trajectory | None, ValidationReport, bool]:
    """plan_safe_transition plus bookkeeping for playlist reports.

    Returns (trajectory or None, report of the chosen or last attempt,
    rerouted flag).
    """
    if rate is None:
        rate = profile.control_rate_hz
    direct = make_transition(q_from, q_to, duration_s, rate)
    report = validate_trajectory(profile, direct)
    if report.ok:
        return direct, report, False
    try:
        via = plan_safe_transition(profile, q_from, q_to, duration_s, rate)
    except PlanningError as exc:
        return None, exc.reports[-1], True
    return via, validate_trajectory(profile, via), True
