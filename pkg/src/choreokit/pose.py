"""Camera-pose ingest: keypoint files to robot joint trajectories.

The pipeline turns a directory of per-frame pose-estimator JSON files into
a playable trajectory:

    load -> gap-fill -> arm angles -> arm selection -> box blur
         -> spectral filter -> joint mapping

Angles are extracted from the 2-D keypoints of one arm as a chain of
absolute atan2 headings (chest, shoulder, elbow, wrist, hand), converted to
relative angles by the descending update H_j <- H_j - H_{j-1} for j = 3, 2,
1, in exactly that order. A fifth angle tracks wrist roll via the thumb.
Image y grows downward, so y is negated before every atan2.

The keypoint files are one JSON document per frame, lexicographically
ordered by filename, each holding `people[0]` with flat `[x, y, c, ...]`
triples under `pose_keypoints_2d`, `hand_left_keypoints_2d`, and
`hand_right_keypoints_2d`. Frames with nobody in view are legal and get
gap-filled from their neighbours.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import IngestError, InputError
from .motion import SinusoidSpec, eval_joint
from .trajectory import N_JOINTS, Trajectory, uniform_times

BLUR_SIZE_DEFAULT = 15
MAGNITUDE_THRESHOLD_DEFAULT = 20.0

N_ANGLES = 5  # four chain headings plus the thumb-based wrist roll


@dataclass(frozen=True)
class LandmarkMap:
    """Which keypoint indices feed the angle chain.

    Defaults follow the 25-point body model (1 = neck used as chest,
    right arm 2/3/4, left arm 5/6/7) and the 21-point hand model (the four
    non-thumb fingertips 8/12/16/20 averaged into a hand point, thumb tip 4).
    """

    body_chest: int = 1
    body_shoulder_right: int = 2
    body_elbow_right: int = 3
    body_wrist_right: int = 4
    body_shoulder_left: int = 5
    body_elbow_left: int = 6
    body_wrist_left: int = 7
    hand_fingertips: tuple[int, ...] = (8, 12, 16, 20)
    hand_thumb_tip: int = 4

    def body_chain(self, side: str) -> tuple[int, int, int, int]:
        if side == "left":
            return (
                self.body_chest,
                self.body_shoulder_left,
                self.body_elbow_left,
                self.body_wrist_left,
            )
        if side == "right":
            return (
                self.body_chest,
                self.body_shoulder_right,
                self.body_elbow_right,
                self.body_wrist_right,
            )
        raise InputError(f"side must be 'left' or 'right', got {side!r}")

    def slots(self, side: str) -> list[tuple[str, int]]:
        """Every (source array, index) the pipeline reads for one side."""
        hand = f"{side}_hand"
        out = [("body", i) for i in self.body_chain(side)]
        out += [(hand, i) for i in self.hand_fingertips]
        out.append((hand, self.hand_thumb_tip))
        return out

    def to_dict(self) -> dict:
        return {
            "body_chest": self.body_chest,
            "body_shoulder_right": self.body_shoulder_right,
            "body_elbow_right": self.body_elbow_right,
            "body_wrist_right": self.body_wrist_right,
            "body_shoulder_left": self.body_shoulder_left,
            "body_elbow_left": self.body_elbow_left,
            "body_wrist_left": self.body_wrist_left,
            "hand_fingertips": list(self.hand_fingertips),
            "hand_thumb_tip": self.hand_thumb_tip,
        }


@dataclass(frozen=True)
class KeypointFrame:
    """One frame of (x, y, confidence) keypoints. Empty arrays mean the
    estimator saw nobody."""

    frame_index: int
    body: np.ndarray = field(repr=False)
    left_hand: np.ndarray = field(repr=False)
    right_hand: np.ndarray = field(repr=False)

    def array(self, source: str) -> np.ndarray:
        return {"body": self.body, "left_hand": self.left_hand, "right_hand": self.right_hand}[
            source
        ]

    @property
    def empty(self) -> bool:
        return self.body.size == 0


def _triples(doc: dict, key: str, path, min_len: int = 0) -> np.ndarray:
    flat = doc.get(key) or []
    if len(flat) % 3 != 0:
        raise IngestError(f"{path}: {key} length {len(flat)} is not a multiple of 3")
    arr = np.asarray(flat, dtype=float).reshape(-1, 3)
    if arr.size and not np.all(np.isfinite(arr[arr[:, 2] > 0.0, :2])):
        raise IngestError(f"{path}: {key} has non-finite coordinates at positive confidence")
    return arr


def load_openpose_frames(frames_dir) -> list[KeypointFrame]:
    """Read every *.json file in a directory, lexicographic filename order."""
    d = Path(frames_dir)
    if not d.is_dir():
        raise InputError(f"{frames_dir} is not a directory")
    paths = sorted(d.glob("*.json"), key=lambda p: p.name)
    if not paths:
        raise InputError(f"no keypoint files in {frames_dir}")
    frames = []
    empty = np.zeros((0, 3))
    for i, path in enumerate(paths):
        try:
            doc = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise IngestError(f"cannot parse keypoint file {path}: {exc}") from exc
        people = doc.get("people") if isinstance(doc, dict) else None
        if people is None:
            raise IngestError(f"{path}: missing 'people' list")
        if not people:
            frames.append(
                KeypointFrame(frame_index=i, body=empty, left_hand=empty, right_hand=empty)
            )
            continue
        person = people[0]  # closest-to-camera convention: first person only
        frames.append(
            KeypointFrame(
                frame_index=i,
                body=_triples(person, "pose_keypoints_2d", path),
                left_hand=_triples(person, "hand_left_keypoints_2d", path),
                right_hand=_triples(person, "hand_right_keypoints_2d", path),
            )
        )
    return frames


def _slot_value(frame: KeypointFrame, source: str, idx: int) -> np.ndarray | None:
    arr = frame.array(source)
    if idx < arr.shape[0] and arr[idx, 2] > 0.0:
        return arr[idx, :2]
    return None


def gap_fill(
    frames: list[KeypointFrame], landmark_map: LandmarkMap | None = None
) -> list[KeypointFrame]:
    """Fill missing landmarks so every frame is usable.

    Missing means zero confidence, an absent index, or an empty frame.
    Interior and trailing gaps hold the last seen value; leading gaps copy
    the nearest (first) detection. A landmark never seen in any frame is an
    input error naming the slot.
    """
    if landmark_map is None:
        landmark_map = LandmarkMap()
    if not frames:
        raise InputError("no frames to gap-fill")
    slots = sorted(set(landmark_map.slots("left") + landmark_map.slots("right")))
    filled: dict[tuple[str, int], np.ndarray] = {}
    for source, idx in slots:
        series = [_slot_value(f, source, idx) for f in frames]
        known = [i for i, v in enumerate(series) if v is not None]
        if not known:
            raise InputError(f"landmark {source}[{idx}] never detected in any frame")
        coords = np.empty((len(frames), 2))
        last = series[known[0]]  # leading gaps use the nearest detection
        for i, v in enumerate(series):
            if v is not None:
                last = v
            coords[i] = last
        filled[(source, idx)] = coords

    sizes = {"body": 0, "left_hand": 0, "right_hand": 0}
    for source, idx in slots:
        sizes[source] = max(sizes[source], idx + 1)

    out = []
    for i, frame in enumerate(frames):
        arrays = {}
        for source, min_rows in sizes.items():
            arr = frame.array(source)
            rows = max(arr.shape[0], min_rows)
            new = np.zeros((rows, 3))
            new[: arr.shape[0]] = arr
            arrays[source] = new
        for (source, idx), coords in filled.items():
            if arrays[source][idx, 2] <= 0.0:
                arrays[source][idx, :2] = coords[i]
        out.append(
            KeypointFrame(
                frame_index=frame.frame_index,
                body=arrays["body"],
                left_hand=arrays["left_hand"],
                right_hand=arrays["right_hand"],
            )
        )
    return out


@dataclass(frozen=True)
class HumanAngleTrack:
    side: str
    angles: np.ndarray = field(repr=False)  # shape (n_frames, 5)
    frame_rate: float = 30.0

    def __post_init__(self) -> None:
        a = np.asarray(self.angles, dtype=float)
        object.__setattr__(self, "angles", a)
        if a.ndim != 2 or a.shape[1] != N_ANGLES:
            raise InputError(f"angle track must be (n, {N_ANGLES}), got {a.shape}")
        if self.side not in ("left", "right"):
            raise InputError(f"bad side {self.side!r}")
        if self.frame_rate <= 0:
            raise InputError("frame_rate must be positive")


def _point(frame: KeypointFrame, source: str, idx: int, side: str) -> np.ndarray:
    arr = frame.array(source)
    if idx >= arr.shape[0]:
        raise InputError(
            f"frame {frame.frame_index}: {source}[{idx}] missing; gap-fill first"
        )
    return arr[idx, :2]


def extract_arm_angles(
    frames: list[KeypointFrame],
    side: str,
    landmark_map: LandmarkMap | None = None,
    frame_rate: float = 30.0,
) -> HumanAngleTrack:
    """Absolute chain headings turned into relative joint angles.

    Per frame, with image y negated into math convention:
      H_j = atan2 along chest -> shoulder -> elbow -> wrist -> hand, j = 0..3
      H_4 = atan2 of thumb tip relative to the wrist
    then H_j -= H_{j-1} for j = 3, 2, 1 descending, so each relative angle
    is taken against the absolute heading one link up the chain.
    """
    if landmark_map is None:
        landmark_map = LandmarkMap()
    if not frames:
        raise InputError("no frames")
    chain = landmark_map.body_chain(side)
    hand_src = f"{side}_hand"
    out = np.empty((len(frames), N_ANGLES))
    for i, frame in enumerate(frames):
        pts = [_point(frame, "body", idx, side) for idx in chain]
        tips = np.stack(
            [_point(frame, hand_src, idx, side) for idx in landmark_map.hand_fingertips]
        )
        pts.append(tips.mean(axis=0))
        h = np.empty(N_ANGLES)
        for j in range(4):
            dx = pts[j + 1][0] - pts[j][0]
            dy = -(pts[j + 1][1] - pts[j][1])  # image y points down
            h[j] = math.atan2(dy, dx)
        thumb = _point(frame, hand_src, landmark_map.hand_thumb_tip, side)
        wrist = pts[3]
        h[4] = math.atan2(-(thumb[1] - wrist[1]), thumb[0] - wrist[0])
        for j in (3, 2, 1):
            h[j] = h[j] - h[j - 1]
        out[i] = h
    return HumanAngleTrack(side=side, angles=out, frame_rate=frame_rate)


def activity_score(track: HumanAngleTrack) -> float:
    """Total frame-to-frame variation across all five angle channels."""
    return float(np.sum(np.abs(np.diff(track.angles, axis=0))))


def select_arm(
    left: HumanAngleTrack, right: HumanAngleTrack
) -> tuple[str, HumanAngleTrack]:
    """Pick the arm that moved more; ties go to the left arm."""
    if left.angles.shape != right.angles.shape:
        raise InputError("tracks must cover the same frames")
    s_l = activity_score(left)
    s_r = activity_score(right)
    return ("left", left) if s_l >= s_r else ("right", right)


def box_blur(signal, size: int = BLUR_SIZE_DEFAULT) -> np.ndarray:
    """Moving mean with replicate-edge padding; output length == input."""
    x = np.asarray(signal, dtype=float)
    if x.ndim != 1:
        raise InputError("box_blur takes a 1-D signal")
    if size < 1 or size % 2 == 0:
        raise InputError(f"blur size must be odd and positive, got {size}")
    if size > x.size:
        raise InputError(f"blur size {size} exceeds signal length {x.size}")
    half = size // 2
    padded = np.pad(x, (half, half), mode="edge")
    out = np.empty_like(x)
    for i in range(x.size):
        out[i] = padded[i : i + size].mean()
    return out


@dataclass(frozen=True)
class Spectrum:
    bins: np.ndarray = field(repr=False)  # complex, length n

    def __len__(self) -> int:
        return self.bins.size

    def magnitudes(self) -> np.ndarray:
        return np.abs(self.bins)


def _dft_sum(x: np.ndarray, sign: float) -> np.ndarray:
    """Direct summation sum_k x_k * e^(sign * 2 pi i j k / n).

    Evaluated as chunked root-table products, which keeps the O(n^2)
    definition bit-for-bit while staying inside the runtime budget at
    n = 4096 and beyond.
    """
    n = x.size
    roots = np.exp(sign * 2j * np.pi * np.arange(n) / n)
    ks = np.arange(n, dtype=np.int64)
    out = np.empty(n, dtype=complex)
    block = max(1, (1 << 22) // n)
    for start in range(0, n, block):
        idx = (ks[start : start + block, None] * ks[None, :]) % n
        out[start : start + block] = roots[idx] @ x
    return out


def dft(signal) -> Spectrum:
    x = np.asarray(signal, dtype=complex)
    if x.ndim != 1 or x.size == 0:
        raise InputError("dft takes a non-empty 1-D signal")
    return Spectrum(bins=_dft_sum(x, -1.0))


def idft(spectrum: Spectrum) -> np.ndarray:
    f = np.asarray(spectrum.bins, dtype=complex)
    if f.ndim != 1 or f.size == 0:
        raise InputError("idft takes a non-empty spectrum")
    return _dft_sum(f, +1.0) / f.size


@dataclass(frozen=True)
class FilterConfig:
    """Spectral cleanup settings.

    magnitude mode zeroes every bin whose |f_k| falls below the threshold
    (keeps dominant peaks regardless of frequency). lowpass_bins zeroes
    every bin at symmetric index min(k, n-k) >= threshold (keeps the lowest
    frequencies regardless of strength).
    """

    mode: str = "magnitude"
    threshold: float = MAGNITUDE_THRESHOLD_DEFAULT

    def __post_init__(self) -> None:
        if self.mode not in ("magnitude", "lowpass_bins"):
            raise InputError(f"unknown filter mode {self.mode!r}")


def frequency_filter(signal, config: FilterConfig | None = None) -> np.ndarray:
    if config is None:
        config = FilterConfig()
    x = np.asarray(signal, dtype=float)
    spec = dft(x)
    f = spec.bins.copy()
    n = f.size
    if config.mode == "magnitude":
        f[np.abs(f) < config.threshold] = 0.0
    else:
        k = np.arange(n)
        f[np.minimum(k, n - k) >= config.threshold] = 0.0
    y = idft(Spectrum(bins=f))
    residue = float(np.abs(y.imag).max(initial=0.0))
    if residue > 1e-6:
        raise InputError(f"filter output has imaginary residue {residue:g}")
    return y.real


def map_to_robot(
    track: HumanAngleTrack,
    pan_spec: SinusoidSpec,
    wrist2_spec: SinusoidSpec,
) -> Trajectory:
    """Per frame i at t = i/frame_rate:
    [pan(t), H0, H1, H2, wrist2(t), H3]. The thumb angle H4 is carried in
    the track but does not drive a joint."""
    n = track.angles.shape[0]
    ts = uniform_times(n, track.frame_rate)
    qs = np.empty((n, N_JOINTS))
    qs[:, 0] = [eval_joint(pan_spec, float(t)) for t in ts]
    qs[:, 1] = track.angles[:, 0]
    qs[:, 2] = track.angles[:, 1]
    qs[:, 3] = track.angles[:, 2]
    qs[:, 4] = [eval_joint(wrist2_spec, float(t)) for t in ts]
    qs[:, 5] = track.angles[:, 3]
    return Trajectory(rate=track.frame_rate, ts=ts, qs=qs, source="pose")


@dataclass(frozen=True)
class ImportMeta:
    """Sidecar record of how a pose import was produced."""

    frames: int
    frame_rate: float
    side_requested: str
    side_selected: str
    score_left: float
    score_right: float
    blur_size: int
    filter_mode: str
    filter_threshold: float
    landmark_map: dict

    def to_json(self) -> str:
        return json.dumps(
            {
                "frames": self.frames,
                "frame_rate": self.frame_rate,
                "side_requested": self.side_requested,
                "side_selected": self.side_selected,
                "score_left": self.score_left,
                "score_right": self.score_right,
                "blur_size": self.blur_size,
                "filter_mode": self.filter_mode,
                "filter_threshold": self.filter_threshold,
                "landmark_map": self.landmark_map,
            },
            indent=2,
            sort_keys=True,
        )


def import_pose_video(
    frames_dir,
    side: str = "auto",
    config: FilterConfig | None = None,
    blur_size: int = BLUR_SIZE_DEFAULT,
    pan_spec: SinusoidSpec | None = None,
    wrist2_spec: SinusoidSpec | None = None,
    frame_rate: float = 30.0,
    landmark_map: LandmarkMap | None = None,
) -> tuple[Trajectory, ImportMeta]:
    """Full pipeline from a keypoint directory to a pose trajectory."""
    if side not in ("auto", "left", "right"):
        raise InputError(f"side must be auto/left/right, got {side!r}")
    if config is None:
        config = FilterConfig()
    if pan_spec is None:
        pan_spec = SinusoidSpec()
    if wrist2_spec is None:
        wrist2_spec = SinusoidSpec()
    if landmark_map is None:
        landmark_map = LandmarkMap()

    frames = gap_fill(load_openpose_frames(frames_dir), landmark_map)
    left = extract_arm_angles(frames, "left", landmark_map, frame_rate)
    right = extract_arm_angles(frames, "right", landmark_map, frame_rate)
    score_left = activity_score(left)
    score_right = activity_score(right)
    if side == "auto":
        selected, track = select_arm(left, right)
    else:
        selected, track = side, (left if side == "left" else right)

    smoothed = np.column_stack(
        [box_blur(track.angles[:, j], blur_size) for j in range(N_ANGLES)]
    )
    cleaned = np.column_stack(
        [frequency_filter(smoothed[:, j], config) for j in range(N_ANGLES)]
    )
    track = replace(track, angles=cleaned)

    traj = map_to_robot(track, pan_spec, wrist2_spec)
    meta = ImportMeta(
        frames=len(frames),
        frame_rate=frame_rate,
        side_requested=side,
        side_selected=selected,
        score_left=score_left,
        score_right=score_right,
        blur_size=blur_size,
        filter_mode=config.mode,
        filter_threshold=config.threshold,
        landmark_map=landmark_map.to_dict(),
    )
    return traj, meta
