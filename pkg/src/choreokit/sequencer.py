"""Cue sheets and the performance state machine.

A show is a numbered list of cues. Each cue either plays a stored
trajectory (``prerecorded``), opens a hands-on teaching window
(``teach``), or arms a force trigger and waits for the dancer's tap
(``wait_force``). Between streamed cues the engine inserts minimum-jerk
transitions so the arm never jumps.

All run-time evolution goes through :func:`advance`, a pure function
from (state, event) to (state, emitted samples, log). The caller owns
the clock: real deployments tick it from the robot control loop, the
simulator ticks it as fast as it likes, and tests can replay any event
sequence and get identical states back.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import CueSheetError, InputError, PlanningError
from .interaction import POSITION, WAITING_FOR_TAP, ControlMode, mode_step
from .motion import load_motif, plan_safe_transition, sample_motif, transition_reports
from .robot_model import RobotProfile, validate_trajectory
from .trajectory import N_JOINTS, Trajectory, read_csv

CUE_KINDS = ("prerecorded", "teach", "wait_force")
CUE_COLUMNS = ("index", "kind", "ref", "music_track", "transition_s", "notes")
DEFAULT_TRANSITION_S = 2.0

# Endpoints closer than this are treated as already in place and the
# transition is skipped instead of planned.
TRIVIAL_TRANSITION_RAD = 1e-12


@dataclass(frozen=True)
class Cue:
    index: int
    kind: str
    ref: str | None
    music_track: str
    transition_s: float
    notes: str
    teach_duration_s: float | None = None

    def __post_init__(self) -> None:
        if self.kind not in CUE_KINDS:
            raise CueSheetError(f"cue {self.index}: unknown kind {self.kind!r}")
        if self.index < 1:
            raise CueSheetError(f"cue index must be >= 1, got {self.index}")
        if not self.transition_s > 0.0:
            raise CueSheetError(
                f"cue {self.index}: transition_s must be positive, got {self.transition_s}"
            )
        if self.kind == "teach":
            if self.teach_duration_s is None or not self.teach_duration_s > 0.0:
                raise CueSheetError(
                    f"cue {self.index}: teach cue needs a positive duration"
                )
        elif not self.ref:
            raise CueSheetError(f"cue {self.index}: {self.kind} cue needs a ref")

    def card(self) -> dict:
        return {
            "index": self.index,
            "kind": self.kind,
            "ref": self.ref,
            "music_track": self.music_track,
            "transition_s": self.transition_s,
            "notes": self.notes,
            "teach_duration_s": self.teach_duration_s,
        }


@dataclass(frozen=True)
class CueSheet:
    title: str
    cues: tuple[Cue, ...]

    def __post_init__(self) -> None:
        for pos, cue in enumerate(self.cues, start=1):
            if cue.index != pos:
                raise CueSheetError(
                    f"cue indices must run 1..{len(self.cues)} without gaps; "
                    f"position {pos} holds index {cue.index}"
                )

    def __len__(self) -> int:
        return len(self.cues)

    def cue(self, index: int) -> Cue:
        if not 1 <= index <= len(self.cues):
            raise InputError(f"no cue {index}; sheet has {len(self.cues)}")
        return self.cues[index - 1]


def load_cue_sheet(path: str | Path, store: "TrajectoryStore | None" = None) -> CueSheet:
    """Parse a cue sheet CSV.

    Columns: index,kind,ref,music_track,transition_s,notes. For teach
    cues the ref column carries the window length in seconds. When a
    store is given, every trajectory ref must resolve in it.
    """
    path = Path(path)
    try:
        raw = path.read_text()
    except OSError as exc:
        raise InputError(f"cannot read cue sheet {path}: {exc}") from exc

    rows = list(csv.reader(raw.splitlines()))
    body: list[tuple[int, list[str]]] = []
    for lineno, row in enumerate(rows, start=1):
        if not row or (row[0].startswith("#")):
            continue
        body.append((lineno, row))
    if not body:
        raise CueSheetError(f"{path}: no rows")

    header_line, header = body[0]
    if tuple(col.strip() for col in header) != CUE_COLUMNS:
        raise CueSheetError(
            f"{path} line {header_line}: header must be {','.join(CUE_COLUMNS)}"
        )

    cues = []
    seen: set[int] = set()
    for lineno, row in body[1:]:
        if len(row) != len(CUE_COLUMNS):
            raise CueSheetError(
                f"{path} line {lineno}: expected {len(CUE_COLUMNS)} columns, got {len(row)}"
            )
        index_s, kind, ref, track, transition_s, notes = (cell.strip() for cell in row)
        try:
            index = int(index_s)
        except ValueError as exc:
            raise CueSheetError(f"{path} line {lineno}: bad index {index_s!r}") from exc
        if index in seen:
            raise CueSheetError(f"{path} line {lineno}: duplicate index {index}")
        seen.add(index)

        teach_duration = None
        cue_ref: str | None = ref
        if kind == "teach":
            try:
                teach_duration = float(ref)
            except ValueError as exc:
                raise CueSheetError(
                    f"{path} line {lineno}: teach duration must be a number, got {ref!r}"
                ) from exc
            cue_ref = None
        try:
            transition = float(transition_s) if transition_s else DEFAULT_TRANSITION_S
            cue = Cue(
                index=index,
                kind=kind,
                ref=cue_ref,
                music_track=track,
                transition_s=transition,
                notes=notes,
                teach_duration_s=teach_duration,
            )
        except (ValueError, CueSheetError) as exc:
            raise CueSheetError(f"{path} line {lineno}: {exc}") from exc
        if store is not None and cue.ref is not None and cue.ref not in store:
            raise CueSheetError(
                f"{path} line {lineno}: ref {cue.ref!r} not found in trajectory store"
            )
        cues.append(cue)

    cues.sort(key=lambda c: c.index)
    return CueSheet(title=path.stem, cues=tuple(cues))


def render_cue_cards(sheet: CueSheet) -> dict:
    """Cue sheet as a plain document for displays and the wire."""
    return {
        "kind": "cue_cards",
        "version": 1,
        "title": sheet.title,
        "cards": [cue.card() for cue in sheet.cues],
    }


def cards_json(sheet: CueSheet) -> str:
    """Canonical serialization of the cue card document."""
    return json.dumps(render_cue_cards(sheet), indent=2, sort_keys=True)


class TrajectoryStore:
    """Named trajectories a cue sheet can reference.

    Motif files are sampled at the given control rate when the store is
    built from a directory; CSV files load as-is.
    """

    def __init__(self) -> None:
        self._trajectories: dict[str, Trajectory] = {}

    @classmethod
    def from_dir(cls, path: str | Path, rate_hz: float) -> "TrajectoryStore":
        path = Path(path)
        if not path.is_dir():
            raise InputError(f"trajectory directory not found: {path}")
        store = cls()
        for motif_path in sorted(path.glob("*.motif")):
            motif = load_motif(motif_path)
            store.register(motif_path.stem, sample_motif(motif, rate_hz))
        for csv_path in sorted(path.glob("*.csv")):
            store.register(csv_path.stem, read_csv(csv_path))
        return store

    def register(self, name: str, traj: Trajectory) -> None:
        if not name:
            raise InputError("trajectory name must be non-empty")
        self._trajectories[name] = traj

    def get(self, name: str) -> Trajectory:
        try:
            return self._trajectories[name]
        except KeyError:
            raise InputError(f"no trajectory named {name!r} in store") from None

    def names(self) -> tuple[str, ...]:
        return tuple(sorted(self._trajectories))

    def __contains__(self, name: object) -> bool:
        return name in self._trajectories

    def __len__(self) -> int:
        return len(self._trajectories)


@dataclass(frozen=True)
class TransitionCheck:
    from_index: int
    to_index: int
    ok: bool
    rerouted: bool
    detail: str


@dataclass(frozen=True)
class CueCheck:
    index: int
    ref: str
    ok: bool
    detail: str


@dataclass(frozen=True)
class PlaylistReport:
    cue_checks: tuple[CueCheck, ...]
    transition_checks: tuple[TransitionCheck, ...]

    @property
    def ok(self) -> bool:
        return all(c.ok for c in self.cue_checks) and all(
            t.ok for t in self.transition_checks
        )

    def lines(self) -> list[str]:
        out = []
        for check in self.cue_checks:
            status = "ok" if check.ok else "FAIL"
            out.append(f"cue {check.index} [{check.ref}]: {status} {check.detail}".rstrip())
        for t in self.transition_checks:
            if not t.ok:
                status = "FAIL"
            elif t.rerouted:
                status = "ok (rerouted via neutral)"
            else:
                status = "ok"
            out.append(f"transition {t.from_index} -> {t.to_index}: {status} {t.detail}".rstrip())
        return out


def validate_playlist(
    sheet: CueSheet, profile: RobotProfile, store: TrajectoryStore
) -> PlaylistReport:
    """Dry-run every referenced trajectory and every cue-to-cue seam.

    Teach cues break the chain: the arm ends wherever the human left
    it, so there is nothing to pre-check across them.
    """
    cue_checks = []
    transition_checks = []
    prev_streamed: Cue | None = None
    for cue in sheet.cues:
        if cue.kind == "teach":
            prev_streamed = None
            continue
        assert cue.ref is not None
        traj = store.get(cue.ref)
        report = validate_trajectory(profile, traj)
        detail = "" if report.ok else "; ".join(report.lines()[:3])
        cue_checks.append(CueCheck(cue.index, cue.ref, report.ok, detail))

        if prev_streamed is not None:
            prev_traj = store.get(prev_streamed.ref)
            gap = float(np.max(np.abs(prev_traj.q_last() - traj.q_first())))
            if gap < TRIVIAL_TRANSITION_RAD:
                transition_checks.append(
                    TransitionCheck(prev_streamed.index, cue.index, True, False, "contiguous")
                )
            else:
                _, report, rerouted = transition_reports(
                    profile,
                    prev_traj.q_last(),
                    traj.q_first(),
                    cue.transition_s,
                    profile.control_rate_hz,
                )
                detail = "" if report.ok else "; ".join(report.lines()[:3])
                transition_checks.append(
                    TransitionCheck(
                        prev_streamed.index, cue.index, report.ok, rerouted, detail
                    )
                )
        prev_streamed = cue
    return PlaylistReport(tuple(cue_checks), tuple(transition_checks))


# --- performance state machine ---

PHASES = (
    "idle",
    "running",
    "transitioning",
    "in_teach",
    "awaiting_tap",
    "protective_stop",
)

EVENT_KINDS = (
    "tick",
    "operator_next",
    "operator_pause",
    "operator_enter_teach",
    "operator_exit_teach",
    "tap_detected",
    "stop",
    "reset",
)


@dataclass(frozen=True)
class Event:
    kind: str
    dt: float = 0.0
    external_force_n: float = 0.0
    measured_q: tuple[float, ...] | None = None

    def __post_init__(self) -> None:
        if self.kind not in EVENT_KINDS:
            raise InputError(f"unknown event kind {self.kind!r}")
        if self.dt < 0.0:
            raise InputError("event dt must be >= 0")
        if self.measured_q is not None and len(self.measured_q) != N_JOINTS:
            raise InputError(f"measured_q must have {N_JOINTS} entries")


def tick(dt: float, external_force_n: float = 0.0, measured_q=None) -> Event:
    if measured_q is not None:
        measured_q = tuple(float(v) for v in measured_q)
    return Event("tick", dt=dt, external_force_n=external_force_n, measured_q=measured_q)


def operator(kind: str) -> Event:
    return Event(kind)


@dataclass(frozen=True)
class PerformanceState:
    """Everything the engine needs to resume after any event.

    stream holds the trajectory currently being emitted (a cue's frames
    or a planned transition); cursor counts samples already emitted
    from it and elapsed_s is stream-local (phase-local for teach).
    """

    phase: str = "idle"
    cue_pos: int = 1
    mode: ControlMode = POSITION
    elapsed_s: float = 0.0
    cursor: int = 0
    stream: Trajectory | None = None
    pending_cue: int | None = None
    current_q: tuple[float, ...] | None = None
    paused: bool = False
    finished: bool = False
    # teach bookkeeping: window length for cue-driven teach, None for an
    # operator-initiated session that only ends on operator_exit_teach
    teach_seconds: float | None = None
    teach_is_cue: bool = False

    def fingerprint(self) -> tuple:
        """Value identity for replay tests; streams compare by content."""
        stream_key = None
        if self.stream is not None:
            stream_key = (
                self.stream.source,
                len(self.stream),
                hash(self.stream.qs.tobytes()),
            )
        return (
            self.phase,
            self.cue_pos,
            self.mode.kind,
            self.mode.damping,
            round(self.elapsed_s, 12),
            self.cursor,
            stream_key,
            self.pending_cue,
            self.current_q,
            self.paused,
            self.finished,
            self.teach_seconds,
            self.teach_is_cue,
        )


def initial_state(q0=None) -> PerformanceState:
    current = None if q0 is None else tuple(float(v) for v in q0)
    return PerformanceState(current_q=current)


@dataclass(frozen=True)
class AdvanceResult:
    state: PerformanceState
    emitted: tuple[np.ndarray, ...] = ()
    log: tuple[str, ...] = ()
    rejected: str | None = None


def _reject(state: PerformanceState, reason: str) -> AdvanceResult:
    return AdvanceResult(state=state, rejected=reason)


def _plan_entry(
    state: PerformanceState,
    profile: RobotProfile,
    target_q: np.ndarray,
    duration_s: float,
    log: list[str],
) -> tuple[Trajectory | None, PerformanceState | None]:
    """Transition from the current pose to target_q, or None if trivial.

    Returns (trajectory, None) on success and (None, stopped_state) when
    planning fails; a seam we cannot cross safely latches the stop.
    """
    assert state.current_q is not None
    q_from = np.asarray(state.current_q, dtype=float)
    if float(np.max(np.abs(q_from - target_q))) < TRIVIAL_TRANSITION_RAD:
        return None, None
    try:
        traj = plan_safe_transition(
            profile, q_from, target_q, duration_s, profile.control_rate_hz
        )
    except PlanningError as exc:
        log.append(f"transition planning failed: {exc}; protective stop")
        stopped = replace(
            state,
            phase="protective_stop",
            mode=POSITION,
            stream=None,
            pending_cue=None,
            elapsed_s=0.0,
            cursor=0,
            paused=False,
        )
        return None, stopped
    return traj, None


def _start_cue(
    state: PerformanceState,
    sheet: CueSheet,
    store: TrajectoryStore,
    profile: RobotProfile,
    target: int,
    log: list[str],
    fire: bool = False,
) -> PerformanceState:
    """Enter cue `target`, planning a transition when the arm must move.

    fire=True jumps a wait_force cue straight to playback (the tap
    already happened); otherwise wait_force cues arm the trigger first.
    """
    if target > len(sheet):
        log.append("sheet complete")
        return replace(
            state,
            phase="idle",
            mode=POSITION,
            stream=None,
            pending_cue=None,
            elapsed_s=0.0,
            cursor=0,
            finished=True,
            teach_seconds=None,
            teach_is_cue=False,
        )
    cue = sheet.cue(target)
    base = replace(
        state,
        cue_pos=target,
        elapsed_s=0.0,
        cursor=0,
        pending_cue=None,
        teach_seconds=None,
        teach_is_cue=False,
    )

    if cue.kind == "teach":
        log.append(f"cue {target}: hands-on teaching for {cue.teach_duration_s:g} s")
        return replace(
            base,
            phase="in_teach",
            mode=mode_step(POSITION, "enter_teach"),
            stream=None,
            teach_seconds=cue.teach_duration_s,
            teach_is_cue=True,
        )

    if cue.kind == "wait_force" and not fire:
        log.append(f"cue {target}: armed, waiting for tap")
        return replace(base, phase="awaiting_tap", mode=WAITING_FOR_TAP, stream=None)

    traj = store.get(cue.ref)
    if state.current_q is None:
        raise InputError("cannot start streaming with unknown arm pose")
    transition, stopped = _plan_entry(state, profile, traj.q_first(), cue.transition_s, log)
    if stopped is not None:
        return stopped
    if transition is None:
        log.append(f"cue {target}: playing {cue.ref}")
        return replace(base, phase="running", mode=POSITION, stream=traj)
    log.append(f"cue {target}: transition {transition.duration:.3g} s then {cue.ref}")
    return replace(
        base, phase="transitioning", mode=POSITION, stream=transition, pending_cue=target
    )


def _emit_due(state: PerformanceState, new_elapsed: float) -> tuple[int, list[np.ndarray]]:
    """Samples whose times k/rate fall inside [0, new_elapsed)."""
    assert state.stream is not None
    stream = state.stream
    due = int(math.floor(new_elapsed * stream.rate - 1e-9)) + 1
    due = max(state.cursor, min(due, len(stream)))
    emitted = [stream.qs[k].copy() for k in range(state.cursor, due)]
    return due, emitted


def advance(
    state: PerformanceState,
    sheet: CueSheet,
    store: TrajectoryStore,
    profile: RobotProfile,
    event: Event,
) -> AdvanceResult:
    """Apply one event. Pure: same inputs give the same outputs.

    Ticks drive streaming and teach timing; operator events steer the
    phase machine. Illegal requests come back in `rejected` with the
    state unchanged rather than raising, so a console can surface them
    as nacks.
    """
    log: list[str] = []

    if event.kind == "stop":
        if state.phase == "protective_stop":
            return _reject(state, "already in protective stop")
        log.append(f"protective stop latched (was {state.phase})")
        stopped = replace(
            state,
            phase="protective_stop",
            mode=POSITION,
            stream=None,
            pending_cue=None,
            elapsed_s=0.0,
            cursor=0,
            paused=False,
            teach_seconds=None,
            teach_is_cue=False,
        )
        return AdvanceResult(stopped, log=tuple(log))

    if event.kind == "reset":
        if state.phase != "protective_stop":
            return _reject(state, f"reset only applies in protective_stop, not {state.phase}")
        log.append("protective stop cleared; idle")
        cleared = replace(state, phase="idle", mode=POSITION, elapsed_s=0.0, cursor=0)
        return AdvanceResult(cleared, log=tuple(log))

    if state.phase == "protective_stop":
        if event.kind == "tick":
            new_q = event.measured_q if event.measured_q is not None else state.current_q
            return AdvanceResult(replace(state, current_q=new_q))
        return _reject(state, "stopped; reset required")

    if event.kind == "operator_pause":
        if state.phase not in ("running", "transitioning", "awaiting_tap"):
            return _reject(state, f"cannot pause in {state.phase}")
        log.append("resumed" if state.paused else "paused")
        return AdvanceResult(replace(state, paused=not state.paused), log=tuple(log))

    if event.kind == "operator_next":
        if state.phase == "in_teach":
            log.append("teach abandoned by operator")
            aborted = replace(state, mode=mode_step(state.mode, "abort"))
            nxt = _start_cue(aborted, sheet, store, profile, state.cue_pos + 1, log)
            return AdvanceResult(nxt, log=tuple(log))
        if state.phase == "idle":
            if state.finished or state.cue_pos > len(sheet):
                return _reject(state, "sheet complete")
            if state.current_q is None:
                return _reject(state, "arm pose unknown; wait for a tick")
            nxt = _start_cue(state, sheet, store, profile, state.cue_pos, log)
            return AdvanceResult(nxt, log=tuple(log))
        if state.phase in ("running", "transitioning", "awaiting_tap"):
            active = state.pending_cue if state.phase == "transitioning" else state.cue_pos
            log.append(f"cue {active} skipped")
            nxt = _start_cue(state, sheet, store, profile, active + 1, log)
            return AdvanceResult(nxt, log=tuple(log))
        return _reject(state, f"cannot skip in {state.phase}")

    if event.kind == "operator_enter_teach":
        if state.phase not in ("idle", "running"):
            return _reject(state, f"cannot enter teach from {state.phase}")
        if state.current_q is None:
            return _reject(state, "arm pose unknown; wait for a tick")
        log.append("operator opened a teach session")
        return AdvanceResult(
            replace(
                state,
                phase="in_teach",
                mode=mode_step(POSITION, "enter_teach"),
                stream=None,
                pending_cue=None,
                elapsed_s=0.0,
                cursor=0,
                paused=False,
                teach_seconds=None,
                teach_is_cue=False,
            ),
            log=tuple(log),
        )

    if event.kind == "operator_exit_teach":
        if state.phase != "in_teach":
            return _reject(state, f"not in teach (phase {state.phase})")
        if state.mode.kind != "teach":
            return _reject(state, "already easing out")
        log.append("easing out of teach")
        return AdvanceResult(
            replace(state, mode=mode_step(state.mode, "begin_exit")), log=tuple(log)
        )

    if event.kind == "tap_detected":
        if state.phase != "awaiting_tap":
            return _reject(state, f"no trigger armed in {state.phase}")
        log.append(f"tap on cue {state.cue_pos}")
        nxt = _start_cue(state, sheet, store, profile, state.cue_pos, log, fire=True)
        return AdvanceResult(nxt, log=tuple(log))

    # tick
    if event.dt <= 0.0:
        return AdvanceResult(state)
    if state.paused:
        return AdvanceResult(state)

    if state.phase in ("idle", "awaiting_tap"):
        new_q = event.measured_q if event.measured_q is not None else state.current_q
        return AdvanceResult(replace(state, current_q=new_q))

    if state.phase == "in_teach":
        new_elapsed = state.elapsed_s + event.dt
        new_q = event.measured_q if event.measured_q is not None else state.current_q
        st = replace(state, elapsed_s=new_elapsed, current_q=new_q)
        if st.mode.kind == "teach":
            if st.teach_seconds is not None and new_elapsed >= st.teach_seconds:
                log.append("teach window over; easing out")
                st = replace(st, mode=mode_step(st.mode, "begin_exit"))
            return AdvanceResult(st, log=tuple(log))
        # easing out: stay damped until contact force dies down
        new_mode = mode_step(st.mode, "settle", external_force_n=event.external_force_n)
        if new_mode.kind != "position":
            return AdvanceResult(st)
        log.append(f"settled at {event.external_force_n:.3g} N; teach done")
        st = replace(st, mode=new_mode)
        if st.current_q is None:
            raise InputError("teach ended with unknown arm pose")
        target = st.cue_pos + 1 if st.teach_is_cue else st.cue_pos
        if st.teach_is_cue:
            nxt = _start_cue(st, sheet, store, profile, target, log)
        else:
            log.append("teach session closed; idle")
            nxt = replace(
                st,
                phase="idle",
                stream=None,
                elapsed_s=0.0,
                cursor=0,
                teach_seconds=None,
                teach_is_cue=False,
            )
        return AdvanceResult(nxt, log=tuple(log))

    # running / transitioning: stream samples
    assert state.stream is not None
    new_elapsed = state.elapsed_s + event.dt
    due, emitted = _emit_due(state, new_elapsed)
    st = replace(state, elapsed_s=new_elapsed, cursor=due)
    if emitted:
        st = replace(st, current_q=tuple(float(v) for v in emitted[-1]))

    if due == len(state.stream):
        if state.phase == "transitioning":
            assert st.pending_cue is not None
            cue = sheet.cue(st.pending_cue)
            log.append(f"cue {cue.index}: playing {cue.ref}")
            st = replace(
                st,
                phase="running",
                cue_pos=cue.index,
                stream=store.get(cue.ref),
                pending_cue=None,
                elapsed_s=0.0,
                cursor=0,
            )
        else:
            log.append(f"cue {st.cue_pos} finished")
            st = _start_cue(st, sheet, store, profile, st.cue_pos + 1, log)
    return AdvanceResult(st, emitted=tuple(emitted), log=tuple(log))
