"""Deterministic performance simulator.

SimRobot is an ideal position servo with one safety reflex: a commanded
step that exceeds a joint's velocity limit latches a protective stop,
exactly the condition a real controller faults on. In teach and damped
modes the arm drifts under the scripted contact force instead of
tracking commands.

Force scripts replace the dancer. Each script is a list of timed
pushes, optionally with gaussian noise on the magnitude; noise is drawn
from a generator seeded per (seed, tick), so a run is bitwise
reproducible for a given seed no matter how it is stepped.

SimSession holds one arm playing one show and is stepped tick by tick;
run_performance drives a session to the end and summarizes it, and the
server wraps a session to stream it live.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

import numpy as np

from .errors import IngestError, InputError
from .interaction import (
    ForceTriggerState,
    Recording,
    record_step,
    replay,
    trigger_update,
)
from .robot_model import RobotProfile
from .sequencer import (
    AdvanceResult,
    CueSheet,
    Event,
    TrajectoryStore,
    advance,
    initial_state,
    tick,
)
from .trajectory import N_JOINTS

FORCE_COLUMNS = ("t_start", "t_end", "force_n", "j0", "j1", "j2", "j3", "j4", "j5")


@dataclass(frozen=True)
class SimParams:
    # How fast the arm yields to a push while teaching, before damping.
    teach_gain_rad_per_n_s: float = 0.01
    teach_damping: float = 0.0

    def __post_init__(self) -> None:
        if self.teach_gain_rad_per_n_s < 0:
            raise InputError("teach gain must be >= 0")
        if not 0.0 <= self.teach_damping <= 1.0:
            raise InputError("teach_damping must be within [0, 1]")


class SimRobot:
    """Ideal servo with a velocity-jump fault latch."""

    def __init__(self, profile: RobotProfile, q0, params: SimParams | None = None):
        q = np.asarray(q0, dtype=float)
        if q.shape != (N_JOINTS,):
            raise InputError(f"q0 must have shape ({N_JOINTS},)")
        self.profile = profile
        self.params = params or SimParams()
        self.q = q.copy()
        self.stopped = False
        self.stop_reason: str | None = None

    def command(self, q_cmd) -> bool:
        """Track a position command; returns False once faulted."""
        if self.stopped:
            return False
        q_cmd = np.asarray(q_cmd, dtype=float)
        rate = self.profile.control_rate_hz
        for j, joint in enumerate(self.profile.joints):
            step_vel = abs(q_cmd[j] - self.q[j]) * rate
            if step_vel > joint.velocity_limit_rad_s * (1.0 + 1e-9):
                self.stopped = True
                self.stop_reason = (
                    f"{joint.name}: commanded step implies {step_vel:.3g} rad/s, "
                    f"limit {joint.velocity_limit_rad_s:.3g}"
                )
                return False
        self.q = q_cmd.copy()
        return True

    def drift(self, force_n: float, direction, damping: float, dt: float) -> None:
        """Yield to a contact push while in teach or damped exit."""
        if self.stopped or force_n <= 0.0:
            return
        direction = np.asarray(direction, dtype=float)
        qd = direction * force_n * self.params.teach_gain_rad_per_n_s * (1.0 - damping)
        q_new = self.q + qd * dt
        lo = np.array([j.position_limits_rad[0] for j in self.profile.joints])
        hi = np.array([j.position_limits_rad[1] for j in self.profile.joints])
        self.q = np.clip(q_new, lo, hi)


@dataclass(frozen=True)
class ForcePhase:
    t_start: float
    t_end: float
    force_n: float
    direction: tuple[float, ...]

    def __post_init__(self) -> None:
        if self.t_end <= self.t_start:
            raise InputError("force phase must have t_end > t_start")
        if self.force_n < 0:
            raise InputError("force must be >= 0")
        if len(self.direction) != N_JOINTS:
            raise InputError(f"direction needs {N_JOINTS} components")


@dataclass(frozen=True)
class ForceScript:
    phases: tuple[ForcePhase, ...] = ()
    noise_std: float = 0.0
    seed: int = 0

    def sample(self, t: float, tick_k: int) -> tuple[float, np.ndarray]:
        """Contact force and push direction at cue-local time t."""
        force = 0.0
        direction = np.zeros(N_JOINTS)
        for phase in self.phases:
            if phase.t_start <= t < phase.t_end:
                force = phase.force_n
                direction = np.asarray(phase.direction)
                break
        if self.noise_std > 0.0:
            rng = np.random.default_rng([self.seed, tick_k])
            force = max(0.0, force + rng.normal(0.0, self.noise_std))
        return force, direction


def read_force(path: str | Path, seed: int = 0) -> ForceScript:
    """Parse a force script CSV.

    Leading comment lines may carry ``# noise_std=... seed=...``; a seed
    given there overrides the argument. Columns:
    t_start,t_end,force_n,j0..j5, times in seconds since the cue began.
    """
    path = Path(path)
    try:
        raw = path.read_text()
    except OSError as exc:
        raise InputError(f"cannot read force script {path}: {exc}") from exc

    noise_std = 0.0
    body: list[tuple[int, str]] = []
    for lineno, line in enumerate(raw.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            fields = dict(
                part.split("=", 1) for part in line[1:].split() if "=" in part
            )
            try:
                if "noise_std" in fields:
                    noise_std = float(fields["noise_std"])
                if "seed" in fields:
                    seed = int(fields["seed"])
            except ValueError as exc:
                raise IngestError(f"{path} line {lineno}: bad header field") from exc
            continue
        body.append((lineno, line))

    if not body:
        raise IngestError(f"{path}: no rows")
    header_line, header = body[0]
    if tuple(col.strip() for col in header.split(",")) != FORCE_COLUMNS:
        raise IngestError(
            f"{path} line {header_line}: header must be {','.join(FORCE_COLUMNS)}"
        )
    phases = []
    for lineno, line in body[1:]:
        cells = line.split(",")
        if len(cells) != len(FORCE_COLUMNS):
            raise IngestError(
                f"{path} line {lineno}: expected {len(FORCE_COLUMNS)} columns"
            )
        try:
            values = [float(c) for c in cells]
        except ValueError as exc:
            raise IngestError(f"{path} line {lineno}: non-numeric cell") from exc
        try:
            phases.append(
                ForcePhase(values[0], values[1], values[2], tuple(values[3:]))
            )
        except InputError as exc:
            raise IngestError(f"{path} line {lineno}: {exc}") from exc
    if noise_std < 0:
        raise IngestError(f"{path}: noise_std must be >= 0")
    return ForceScript(phases=tuple(phases), noise_std=noise_std, seed=seed)


class SimSession:
    """One simulated arm playing one cue sheet, stepped tick by tick.

    Keeps the running tallies (log, emission counts, taps, recordings)
    that RunReport summarizes. Callers may interleave apply() for
    operator events with tick_once() exactly as a live service does.
    """

    def __init__(
        self,
        sheet: CueSheet,
        store: TrajectoryStore,
        profile: RobotProfile,
        *,
        initial_q=None,
        force_scripts: Mapping[int, ForceScript] | None = None,
        seed: int = 0,
        params: SimParams | None = None,
        keep_recordings: bool = True,
        auto_start: bool = False,
    ):
        self.sheet = sheet
        self.store = store
        self.profile = profile
        self.seed = seed
        # The run seed governs all noise so "same seed, same show" holds
        # regardless of what the script files carry.
        self.force_scripts = {
            idx: ForceScript(s.phases, s.noise_std, seed)
            for idx, s in (force_scripts or {}).items()
        }
        self.rate = profile.control_rate_hz
        self.dt = 1.0 / self.rate
        q0 = (
            profile.neutral_q()
            if initial_q is None
            else tuple(float(v) for v in initial_q)
        )
        self.sim = SimRobot(profile, q0, params)
        self.state = initial_state(q0)
        self.keep_recordings = keep_recordings

        self.k = 0
        self.log: list[str] = []
        self.emitted_by_source: dict[str, int] = {}
        self.cue_spans: dict[int, dict[str, int]] = {}
        self.taps: list[dict] = []
        self.teach_recordings: dict[int, int] = {}
        self.stop_reasons: list[str] = []
        self.stop_count = 0
        self._trig = ForceTriggerState()
        self._trig_updates = 0
        self._recording: Recording | None = None
        self._anchor_k = 0
        if auto_start:
            self.apply(Event("operator_next"))

    @property
    def t(self) -> float:
        return self.k * self.dt

    @property
    def done(self) -> bool:
        return self.state.finished or self.state.phase == "protective_stop"

    @property
    def force_average(self) -> float:
        return self._trig.running_average

    @property
    def triggered(self) -> bool:
        return self._trig.triggered

    def _stamp(self, entries) -> None:
        for entry in entries:
            self.log.append(f"[{self.t:.3f}] {entry}")

    def apply(self, event: Event) -> AdvanceResult:
        """Feed one event through the machine and book the outcome."""
        prev = self.state
        res = advance(prev, self.sheet, self.store, self.profile, event)
        self.state = res.state
        state = self.state
        self._stamp(res.log)
        if res.rejected is not None:
            self.log.append(f"[{self.t:.3f}] rejected: {res.rejected}")
        if res.emitted and prev.stream is not None:
            src = prev.stream.source
            self.emitted_by_source[src] = self.emitted_by_source.get(src, 0) + len(
                res.emitted
            )
            for q_cmd in res.emitted:
                if not self.sim.command(q_cmd):
                    break
        if (state.phase, state.cue_pos) != (prev.phase, prev.cue_pos):
            self._anchor_k = self.k
            entered_show = prev.phase == "idle" and state.phase not in (
                "idle",
                "protective_stop",
            )
            if state.cue_pos != prev.cue_pos or entered_show:
                self.cue_spans.setdefault(state.cue_pos, {})["enter_tick"] = self.k
            if prev.cue_pos in self.cue_spans and state.cue_pos != prev.cue_pos:
                self.cue_spans[prev.cue_pos]["exit_tick"] = self.k
        if state.phase == "awaiting_tap" and prev.phase != "awaiting_tap":
            self._trig = ForceTriggerState()
            self._trig_updates = 0
        if state.phase == "in_teach" and prev.phase != "in_teach":
            self._recording = Recording(rate=self.rate) if self.keep_recordings else None
        if prev.phase == "in_teach" and state.phase != "in_teach":
            if self._recording is not None and len(self._recording.qs) > 0:
                traj = replay(self._recording)
                name = f"taught_cue_{prev.cue_pos}"
                self.store.register(name, traj)
                self.teach_recordings[prev.cue_pos] = len(traj)
                self.log.append(
                    f"[{self.t:.3f}] recorded {len(traj)} samples as {name}"
                )
            self._recording = None
        if state.phase == "protective_stop" and prev.phase != "protective_stop":
            self.stop_count += 1
        return res

    def tick_once(self) -> None:
        """Advance the show and the arm by one control period."""
        # Script time runs from the tick on which the cue's interactive
        # phase was entered.
        script = self.force_scripts.get(self.state.cue_pos)
        force = 0.0
        direction = np.zeros(N_JOINTS)
        if script is not None and self.state.phase in ("in_teach", "awaiting_tap"):
            force, direction = script.sample((self.k - self._anchor_k) * self.dt, self.k)

        was_awaiting = self.state.phase == "awaiting_tap"
        in_teach_before = self.state.phase == "in_teach"
        mode_before = self.state.mode
        self.apply(tick(self.dt, external_force_n=force, measured_q=tuple(self.sim.q)))
        self.k += 1

        if self.sim.stopped and self.state.phase != "protective_stop":
            self.stop_reasons.append(self.sim.stop_reason or "simulated fault")
            self.log.append(f"[{self.t:.3f}] sim fault: {self.sim.stop_reason}")
            self.apply(Event("stop"))

        if in_teach_before and mode_before.kind in ("teach", "force_damped"):
            damping = (
                self.sim.params.teach_damping
                if mode_before.kind == "teach"
                else mode_before.damping
            )
            self.sim.drift(force, direction, damping, self.dt)
            if mode_before.kind == "teach" and self._recording is not None:
                record_step(self._recording, self.sim.q)

        if was_awaiting and self.state.phase == "awaiting_tap":
            self._trig = trigger_update(self._trig, force)
            self._trig_updates += 1
            if self._trig.triggered:
                self.taps.append(
                    {
                        "cue": self.state.cue_pos,
                        "update": self._trig_updates,
                        "tick": self.k,
                        "average_n": round(self._trig.running_average, 9),
                    }
                )
                self.apply(Event("tap_detected"))


@dataclass
class RunReport:
    ok: bool
    seed: int
    rate_hz: float
    ticks: int
    sim_seconds: float
    stop_count: int
    stop_reasons: list[str]
    emitted_by_source: dict[str, int]
    emitted_total: int
    cue_spans: dict[int, dict[str, int]]
    taps: list[dict]
    teach_recordings: dict[int, int]
    final_phase: str
    finished: bool
    log: list[str]

    def to_json(self) -> str:
        doc = {
            "ok": self.ok,
            "seed": self.seed,
            "rate_hz": self.rate_hz,
            "ticks": self.ticks,
            "sim_seconds": round(self.sim_seconds, 9),
            "stop_count": self.stop_count,
            "stop_reasons": self.stop_reasons,
            "emitted_by_source": self.emitted_by_source,
            "emitted_total": self.emitted_total,
            "cue_spans": {str(k): v for k, v in sorted(self.cue_spans.items())},
            "taps": self.taps,
            "teach_recordings": {
                str(k): v for k, v in sorted(self.teach_recordings.items())
            },
            "final_phase": self.final_phase,
            "finished": self.finished,
            "log": self.log,
        }
        return json.dumps(doc, indent=2, sort_keys=True)


def run_performance(
    sheet: CueSheet,
    store: TrajectoryStore,
    profile: RobotProfile,
    *,
    initial_q=None,
    force_scripts: Mapping[int, ForceScript] | None = None,
    seed: int = 0,
    params: SimParams | None = None,
    max_sim_s: float = 300.0,
    keep_recordings: bool = True,
) -> RunReport:
    """Play a cue sheet end to end against the simulated arm.

    The first cue is started automatically; teach windows and force
    taps are driven by the per-cue force scripts. Runs until the sheet
    finishes, a protective stop latches, or max_sim_s elapses.
    """
    session = SimSession(
        sheet,
        store,
        profile,
        initial_q=initial_q,
        force_scripts=force_scripts,
        seed=seed,
        params=params,
        keep_recordings=keep_recordings,
        auto_start=True,
    )
    max_ticks = int(max_sim_s * session.rate)
    while session.k < max_ticks and not session.done:
        session.tick_once()

    state = session.state
    if state.cue_pos in session.cue_spans and "exit_tick" not in session.cue_spans[state.cue_pos]:
        session.cue_spans[state.cue_pos]["exit_tick"] = session.k
    ok = state.finished and session.stop_count == 0
    if not state.finished and session.k >= max_ticks:
        session.log.append(
            f"[{session.t:.3f}] timed out after {max_sim_s:g} sim seconds"
        )
    return RunReport(
        ok=ok,
        seed=session.seed,
        rate_hz=session.rate,
        ticks=session.k,
        sim_seconds=session.t,
        stop_count=session.stop_count,
        stop_reasons=session.stop_reasons,
        emitted_by_source=dict(sorted(session.emitted_by_source.items())),
        emitted_total=sum(session.emitted_by_source.values()),
        cue_spans=session.cue_spans,
        taps=session.taps,
        teach_recordings=session.teach_recordings,
        final_phase=state.phase,
        finished=state.finished,
        log=session.log,
    )


def demo_paths() -> dict[str, Path]:
    """Locations of the bundled demo show."""
    from importlib.resources import files

    data = files("choreokit") / "data"
    return {
        "cuesheet": Path(str(data / "demo" / "cuesheet.csv")),
        "motifs": Path(str(data / "motifs")),
        "teach_push": Path(str(data / "demo" / "teach_push.force")),
        "tap": Path(str(data / "demo" / "tap.force")),
    }
