"""Physical human-robot interaction: control modes, teach recordings, and
the force-tap trigger.

The arm is either tracking commands (position), fully compliant so a person
can move it by hand (teach), easing back to stiffness through a damped
buffer after teach (force_damped), or holding still waiting for a physical
tap (waiting_for_tap). The one non-negotiable rule is that leaving teach
always passes through the damped buffer: snapping straight back to position
control under human contact is how people get hurt. The abort event is the
operator's emergency override and is the only thing allowed to shortcut
that path.

Force taps use a 10-slot running window that starts zeroed, so the average
always divides by 10 regardless of how many readings have arrived; a
sustained push therefore takes several readings to cross the threshold and
a single noisy spike cannot fire it.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InputError, ModeTransitionError
from .trajectory import N_JOINTS, Trajectory, uniform_times

# Compliance used while easing out of teach. 1 would be a hard brake,
# 0 free motion; this keeps the arm leaning gently toward stillness.
DAMPED_EXIT_VALUE = 0.2

# External force below which the damped buffer may settle into position.
FORCE_EXIT_THRESHOLD_N = 5.0

TRIGGER_WINDOW = 10
TRIGGER_THRESHOLD_N = 20.0

MODE_KINDS = ("position", "teach", "force_damped", "waiting_for_tap")


@dataclass(frozen=True)
class ControlMode:
    kind: str
    damping: float | None = None

    def __post_init__(self) -> None:
        if self.kind not in MODE_KINDS:
            raise InputError(f"unknown mode kind {self.kind!r}")
        if self.kind == "force_damped":
            if self.damping is None or not 0.0 <= self.damping <= 1.0:
                raise InputError("force_damped needs damping in [0, 1]")
        elif self.damping is not None:
            raise InputError(f"{self.kind} mode takes no damping value")

    def describe(self) -> str:
        if self.kind == "force_damped":
            return f"force_damped({self.damping:g})"
        return self.kind


POSITION = ControlMode("position")
TEACH = ControlMode("teach")
WAITING_FOR_TAP = ControlMode("waiting_for_tap")


def force_damped(damping: float = DAMPED_EXIT_VALUE) -> ControlMode:
    return ControlMode("force_damped", damping=damping)


MODE_EVENTS = ("enter_teach", "begin_exit", "settle", "abort")


def mode_step(
    mode: ControlMode,
    event: str,
    external_force_n: float | None = None,
    force_exit_threshold_n: float = FORCE_EXIT_THRESHOLD_N,
) -> ControlMode:
    """Apply one event to the mode machine.

    position --enter_teach--> teach
    teach --begin_exit--> force_damped(0.2)
    force_damped --settle(F)--> position when F < threshold, else unchanged
    any --abort--> position (operator override)

    Everything else is a ModeTransitionError naming mode and event; in
    particular there is no direct teach -> position edge.
    """
    if event not in MODE_EVENTS:
        raise InputError(f"unknown mode event {event!r}")
    if event == "abort":
        return POSITION
    if mode.kind == "position" and event == "enter_teach":
        return TEACH
    if mode.kind == "teach" and event == "begin_exit":
        return force_damped(DAMPED_EXIT_VALUE)
    if mode.kind == "force_damped" and event == "settle":
        if external_force_n is None:
            raise InputError("settle needs the measured external force")
        if external_force_n < force_exit_threshold_n:
            return POSITION
        return mode
    raise ModeTransitionError(
        f"event {event!r} is illegal in mode {mode.describe()}"
    )


@dataclass
class Recording:
    """Joint states captured on the control clock during teach."""

    rate: float = 500.0
    qs: list = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.rate <= 0:
            raise InputError("recording rate must be positive")

    def __len__(self) -> int:
        return len(self.qs)

    @property
    def timestamps(self) -> np.ndarray:
        return uniform_times(len(self.qs), self.rate)


def record_step(rec: Recording, q) -> Recording:
    """Append a joint vector at the next uniform timestamp.

    The recording is the log of a live session; it is mutated in place and
    returned for chaining.
    """
    q = np.asarray(q, dtype=float)
    if q.shape != (N_JOINTS,):
        raise InputError(f"recorded sample must have {N_JOINTS} joints")
    rec.qs.append(q.copy())
    return rec


def replay(rec: Recording) -> Trajectory:
    """A recording played back verbatim: same rate, identical values."""
    if not rec.qs:
        raise InputError("cannot replay an empty recording")
    return Trajectory(
        rate=rec.rate,
        ts=rec.timestamps,
        qs=np.stack(rec.qs),
        source="recording",
    )


@dataclass(frozen=True)
class ForceTriggerState:
    """Latched tap detector over a rolling force window.

    window holds the most recent readings, oldest first, capped at
    TRIGGER_WINDOW entries. Slots not yet filled count as zero, so the
    average is always sum(window) / 10.
    """

    threshold_n: float = TRIGGER_THRESHOLD_N
    window: tuple[float, ...] = ()
    triggered: bool = False

    def __post_init__(self) -> None:
        if len(self.window) > TRIGGER_WINDOW:
            raise InputError("window longer than the trigger keeps")

    @property
    def running_average(self) -> float:
        return sum(self.window) / float(TRIGGER_WINDOW)


def trigger_update(state: ForceTriggerState, reading_n: float) -> ForceTriggerState:
    """Push one force reading; the trigger latches once the running
    average strictly exceeds the threshold."""
    reading = float(reading_n)
    window = (state.window + (reading,))[-TRIGGER_WINDOW:]
    avg = sum(window) / float(TRIGGER_WINDOW)
    return replace(
        state,
        window=window,
        triggered=state.triggered or avg > state.threshold_n,
    )
