"""Uniformly sampled joint trajectories and their CSV form.

A trajectory is the unit of playback everywhere in this package: a sequence
of 6-joint command vectors sampled on a fixed clock. Timestamps are always
k/rate with k starting at 0, so a file only needs the rate to reconstruct
them exactly.

CSV layout::

    # rate_hz=500 source=motif
    t,q0,q1,q2,q3,q4,q5
    0,0.785398163,...

Values are written with 9 significant digits. The timestamp column is for
humans and external tools; the loader rebuilds t = k/rate from the header
(9 digits cannot carry the uniform-spacing guarantee at large t) and only
cross-checks the stored column loosely.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import IngestError, InputError

N_JOINTS = 6

# Canonical joint order used by motif files, trajectories, and the shipped
# robot profile, base to tool.
JOINT_NAMES = (
    "shoulder_pan",
    "shoulder_lift",
    "elbow",
    "wrist_1",
    "wrist_2",
    "wrist_3",
)

SOURCES = ("motif", "pose", "recording", "transition")

# Max deviation from perfectly uniform k/rate spacing.
SPACING_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Timed joint commands on a uniform clock.

    ts is shape (n,), qs is shape (n, 6). Arrays are treated as immutable
    after construction. Instances compare by identity; compare contents
    with numpy if you need value equality.
    """

    rate: float
    ts: np.ndarray = field(repr=False)
    qs: np.ndarray = field(repr=False)
    source: str = "motif"

    def __post_init__(self) -> None:
        ts = np.asarray(self.ts, dtype=float)
        qs = np.asarray(self.qs, dtype=float)
        object.__setattr__(self, "ts", ts)
        object.__setattr__(self, "qs", qs)
        if self.rate <= 0:
            raise InputError(f"rate must be positive, got {self.rate}")
        if ts.ndim != 1 or qs.ndim != 2 or qs.shape != (ts.size, N_JOINTS):
            raise InputError(
                f"bad trajectory shape: ts {ts.shape}, qs {qs.shape}"
            )
        if ts.size == 0:
            raise InputError("trajectory needs at least one sample")
        if self.source not in SOURCES:
            raise InputError(f"unknown trajectory source {self.source!r}")
        expected = np.arange(ts.size) / self.rate
        if np.max(np.abs(ts - expected), initial=0.0) > SPACING_TOL:
            raise InputError("timestamps must be k/rate, uniformly spaced")

    def __len__(self) -> int:
        return self.ts.size

    @property
    def duration(self) -> float:
        return float(self.ts[-1])

    def q_first(self) -> np.ndarray:
        return self.qs[0].copy()

    def q_last(self) -> np.ndarray:
        return self.qs[-1].copy()


def uniform_times(n: int, rate: float) -> np.ndarray:
    return np.arange(n) / rate


def _fmt(x: float) -> str:
    return format(x, ".9g")


def csv_text(traj: Trajectory) -> str:
    lines = [f"# rate_hz={_fmt(traj.rate)} source={traj.source}"]
    lines.append("t," + ",".join(f"q{j}" for j in range(N_JOINTS)))
    for t, q in zip(traj.ts, traj.qs):
        lines.append(",".join([_fmt(t)] + [_fmt(v) for v in q]))
    return "\n".join(lines) + "\n"


def write_csv(traj: Trajectory, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(csv_text(traj))


def read_csv(path) -> Trajectory:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = fh.read().splitlines()
    except OSError as exc:
        raise IngestError(f"cannot read trajectory file {path}: {exc}") from exc
    if not raw or not raw[0].startswith("#"):
        raise IngestError(f"{path}: missing '# rate_hz=... source=...' header")
    fields = dict(
        part.split("=", 1) for part in raw[0].lstrip("# ").split() if "=" in part
    )
    try:
        rate = float(fields["rate_hz"])
    except (KeyError, ValueError) as exc:
        raise IngestError(f"{path}: bad rate_hz header") from exc
    source = fields.get("source", "motif")
    body = [ln for ln in raw[1:] if ln.strip() and not ln.startswith("#")]
    if not body or body[0].split(",")[0] != "t":
        raise IngestError(f"{path}: missing column header row")
    rows = []
    for lineno, ln in enumerate(body[1:], start=3):
        parts = ln.split(",")
        if len(parts) != N_JOINTS + 1:
            raise IngestError(f"{path}:{lineno}: expected {N_JOINTS + 1} columns")
        try:
            rows.append([float(p) for p in parts])
        except ValueError as exc:
            raise IngestError(f"{path}:{lineno}: non-numeric value") from exc
    if not rows:
        raise IngestError(f"{path}: no samples")
    arr = np.asarray(rows, dtype=float)
    ts = uniform_times(arr.shape[0], rate)
    # The stored t column is informational; tolerate its 9-digit rounding.
    if np.max(np.abs(arr[:, 0] - ts)) > 1e-6:
        raise IngestError(f"{path}: timestamp column disagrees with rate header")
    return Trajectory(rate=rate, ts=ts, qs=arr[:, 1:], source=source)
