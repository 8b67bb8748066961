"""Choreography engine for a six-joint collaborative robot arm.

Sinusoidal movement motifs, camera-pose-derived motion, teach-mode
interaction with force-tap triggers, a cue-sheet sequencer, an offline
simulator, and an operator-console server.
"""

from __future__ import annotations

__version__ = "0.1.0"

from .errors import (
    ChoreoError,
    CueSheetError,
    IngestError,
    InputError,
    ModeTransitionError,
    PlanningError,
    ProtocolError,
)
from .trajectory import JOINT_NAMES, N_JOINTS, Trajectory, read_csv, write_csv
from .robot_model import (
    CollisionCheck,
    JointDef,
    LinkPoints,
    RobotProfile,
    ValidationReport,
    Violation,
    default_profile,
    forward_kinematics,
    load_profile,
    segment_distance,
    self_collision_risk,
    validate_trajectory,
)
from .motion import (
    FACING_GAMMA_RAD,
    AmplitudeWarning,
    Envelope,
    MotifSpec,
    SinusoidSpec,
    eval_joint,
    facing_gamma,
    load_motif,
    make_transition,
    plan_safe_transition,
    sample_motif,
)
from .pose import FilterConfig, ImportMeta, box_blur, dft, idft, import_pose_video
from .interaction import (
    ControlMode,
    ForceTriggerState,
    Recording,
    force_damped,
    mode_step,
    record_step,
    replay,
    trigger_update,
)
from .sequencer import (
    Cue,
    CueSheet,
    Event,
    PerformanceState,
    TrajectoryStore,
    advance,
    cards_json,
    initial_state,
    load_cue_sheet,
    render_cue_cards,
    tick,
    validate_playlist,
)
from .sim import (
    ForceScript,
    RunReport,
    SimRobot,
    SimSession,
    demo_paths,
    read_force,
    run_performance,
)
