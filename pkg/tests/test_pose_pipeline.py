from __future__ import annotations

import json
import math

import numpy as np
import pytest

from choreokit import IngestError, InputError, SinusoidSpec
from choreokit.pose import (
    FilterConfig,
    HumanAngleTrack,
    LandmarkMap,
    Spectrum,
    box_blur,
    dft,
    extract_arm_angles,
    frequency_filter,
    gap_fill,
    idft,
    import_pose_video,
    load_openpose_frames,
    map_to_robot,
    select_arm,
)
from choreokit.trajectory import write_csv

from oracles import (
    arm_activity_score,
    dft_oracle,
    signal_energy,
    spectrum_energy,
    window_mean_blur,
)

BODY_ROWS = 25
HAND_ROWS = 21


def _heading_point(origin, length, theta):
    """Image-coordinate point at math heading theta from origin."""
    return (origin[0] + length * math.cos(theta), origin[1] - length * math.sin(theta))


def _person(left_elbow_theta=0.0, right_elbow_theta=math.pi):
    """Synthetic keypoints: chest at center, arms out to either side.

    The upper-arm heading (chest->shoulder) is 0 for the left arm and pi
    for the right; forearm/hand extend along the given elbow heading, so
    the relative elbow angle is theta - 0 (left) or theta - pi (right).
    """
    body = np.zeros((BODY_ROWS, 3))
    left_hand = np.zeros((HAND_ROWS, 3))
    right_hand = np.zeros((HAND_ROWS, 3))
    chest = (400.0, 400.0)

    def put(arr, idx, pt):
        arr[idx] = [pt[0], pt[1], 0.9]

    put(body, 1, chest)
    for side, hand, sh_idx, el_idx, wr_idx, theta0, theta in (
        ("left", left_hand, 5, 6, 7, 0.0, left_elbow_theta),
        ("right", right_hand, 2, 3, 4, math.pi, right_elbow_theta),
    ):
        shoulder = _heading_point(chest, 50.0, theta0)
        elbow = _heading_point(shoulder, 60.0, theta)
        wrist = _heading_point(elbow, 60.0, theta)
        put(body, sh_idx, shoulder)
        put(body, el_idx, elbow)
        put(body, wr_idx, wrist)
        for tip in (8, 12, 16, 20):
            put(hand, tip, _heading_point(wrist, 40.0, theta))
        put(hand, 4, _heading_point(wrist, 12.0, theta + math.pi / 4))
    return body, left_hand, right_hand


def _frame_doc(body, left_hand, right_hand):
    return {
        "version": 1.3,
        "people": [
            {
                "pose_keypoints_2d": [float(v) for v in body.ravel()],
                "hand_left_keypoints_2d": [float(v) for v in left_hand.ravel()],
                "hand_right_keypoints_2d": [float(v) for v in right_hand.ravel()],
            }
        ],
    }


def write_pose_dir(dirpath, n_frames, left_theta=None, right_theta=None, empty=()):
    dirpath.mkdir(parents=True, exist_ok=True)
    for i in range(n_frames):
        name = dirpath / f"frame_{i:06d}_keypoints.json"
        if i in empty:
            name.write_text(json.dumps({"version": 1.3, "people": []}))
            continue
        lt = left_theta(i) if left_theta else 0.0
        rt = right_theta(i) if right_theta else math.pi
        body, lh, rh = _person(lt, rt)
        name.write_text(json.dumps(_frame_doc(body, lh, rh)))
    return dirpath


def test_load_frames_lexicographic_order(tmp_path):
    d = write_pose_dir(tmp_path / "seq", 12)
    frames = load_openpose_frames(d)
    assert len(frames) == 12
    assert [f.frame_index for f in frames] == list(range(12))
    assert frames[0].body.shape == (BODY_ROWS, 3)
    assert frames[0].left_hand.shape == (HAND_ROWS, 3)


def test_load_rejects_unparseable_file(tmp_path):
    d = write_pose_dir(tmp_path / "seq", 3)
    bad = d / "frame_000001_keypoints.json"
    bad.write_text("{not json")
    with pytest.raises(IngestError) as exc:
        load_openpose_frames(d)
    assert bad.name in str(exc.value)


def test_load_rejects_non_triple_array(tmp_path):
    d = tmp_path / "seq"
    d.mkdir()
    doc = {"people": [{"pose_keypoints_2d": [1.0, 2.0, 0.9, 4.0]}]}
    (d / "a.json").write_text(json.dumps(doc))
    with pytest.raises(IngestError):
        load_openpose_frames(d)


def test_load_requires_frames(tmp_path):
    d = tmp_path / "seq"
    d.mkdir()
    with pytest.raises(InputError):
        load_openpose_frames(d)
    with pytest.raises(InputError):
        load_openpose_frames(tmp_path / "missing")


def test_empty_people_frame_is_placeholder(tmp_path):
    d = write_pose_dir(tmp_path / "seq", 5, empty={2})
    frames = load_openpose_frames(d)
    assert frames[2].empty
    assert not frames[1].empty


def test_gap_fill_holds_last_value(tmp_path):
    thetas = [0.1 * i for i in range(10)]
    d = write_pose_dir(tmp_path / "seq", 10, left_theta=lambda i: thetas[i], empty={4, 5})
    frames = gap_fill(load_openpose_frames(d))
    lm = LandmarkMap()
    # frames 4 and 5 replay frame 3's landmarks
    for idx in lm.body_chain("left"):
        np.testing.assert_array_equal(frames[4].body[idx, :2], frames[3].body[idx, :2])
        np.testing.assert_array_equal(frames[5].body[idx, :2], frames[3].body[idx, :2])
    assert not np.array_equal(frames[6].body[6, :2], frames[3].body[6, :2])


def test_gap_fill_leading_gap_uses_nearest(tmp_path):
    d = write_pose_dir(tmp_path / "seq", 8, left_theta=lambda i: 0.2 * i, empty={0, 1})
    frames = gap_fill(load_openpose_frames(d))
    for idx in LandmarkMap().body_chain("left"):
        np.testing.assert_array_equal(frames[0].body[idx, :2], frames[2].body[idx, :2])
        np.testing.assert_array_equal(frames[1].body[idx, :2], frames[2].body[idx, :2])


def test_gap_fill_never_seen_landmark_raises(tmp_path):
    d = tmp_path / "seq"
    d.mkdir()
    for i in range(3):
        (d / f"f{i}.json").write_text(json.dumps({"people": []}))
    with pytest.raises(InputError):
        gap_fill(load_openpose_frames(d))


def test_extract_angles_worked_elbow_bend(tmp_path):
    # chest (0,0), shoulder (1,0), elbow (2,0), wrist straight up from the
    # elbow: absolute headings 0, 0, pi/2 so the relative elbow-to-wrist
    # angle is pi/2 and everything else cancels.
    d = tmp_path / "seq"
    d.mkdir()
    body = np.zeros((8, 3))
    lh = np.zeros((HAND_ROWS, 3))
    body[1] = [0.0, 0.0, 1.0]
    body[5] = [1.0, 0.0, 1.0]
    body[6] = [2.0, 0.0, 1.0]
    body[7] = [2.0, -1.0, 1.0]  # image y up means negative
    for tip in (8, 12, 16, 20):
        lh[tip] = [2.0, -2.0, 1.0]
    lh[4] = [3.0, -1.0, 1.0]
    doc = {
        "people": [
            {
                "pose_keypoints_2d": [float(v) for v in body.ravel()],
                "hand_left_keypoints_2d": [float(v) for v in lh.ravel()],
                "hand_right_keypoints_2d": [0.0] * (HAND_ROWS * 3),
            }
        ]
    }
    (d / "only.json").write_text(json.dumps(doc))
    track = extract_arm_angles(load_openpose_frames(d), "left")
    np.testing.assert_allclose(track.angles[0], [0.0, 0.0, math.pi / 2, 0.0, 0.0], atol=1e-15)


def test_extract_angles_descending_update_order(tmp_path):
    # distinct headings per link; the relative pass must subtract the
    # absolute heading one link up, not an already-relativized one
    abs_headings = [0.1, 0.5, 1.0, 2.0]
    d = tmp_path / "seq"
    d.mkdir()
    body = np.zeros((8, 3))
    lh = np.zeros((HAND_ROWS, 3))
    pt = (100.0, 100.0)
    body[1] = [pt[0], pt[1], 1.0]
    chain_idx = [5, 6, 7]
    for idx, theta in zip(chain_idx, abs_headings[:3]):
        pt = _heading_point(pt, 10.0, theta)
        body[idx] = [pt[0], pt[1], 1.0]
    wrist = pt
    hand = _heading_point(wrist, 10.0, abs_headings[3])
    for tip in (8, 12, 16, 20):
        lh[tip] = [hand[0], hand[1], 1.0]
    thumb = _heading_point(wrist, 5.0, 0.7)
    lh[4] = [thumb[0], thumb[1], 1.0]
    doc = {
        "people": [
            {
                "pose_keypoints_2d": [float(v) for v in body.ravel()],
                "hand_left_keypoints_2d": [float(v) for v in lh.ravel()],
                "hand_right_keypoints_2d": [0.0] * (HAND_ROWS * 3),
            }
        ]
    }
    (d / "only.json").write_text(json.dumps(doc))
    track = extract_arm_angles(load_openpose_frames(d), "left")
    expected = [0.1, 0.5 - 0.1, 1.0 - 0.5, 2.0 - 1.0, 0.7]
    np.testing.assert_allclose(track.angles[0], expected, atol=1e-12)


def _track(side, rows):
    return HumanAngleTrack(side=side, angles=np.asarray(rows, dtype=float), frame_rate=30.0)


def test_select_arm_prefers_more_motion():
    still = _track("right", [[0.0] * 5] * 4)
    moving = _track("left", [[0, 0, 0, 0, 0], [1, 0, 0, 0, 0], [0, 0, 0, 0, 0], [1, 0, 0, 0, 0]])
    side, chosen = select_arm(moving, still)
    assert side == "left" and chosen is moving
    side, chosen = select_arm(_track("left", [[0.0] * 5] * 4), moving_right := _track(
        "right", [[0, 0, 0, 0, 0], [0, 2, 0, 0, 0], [0, 0, 0, 0, 0], [0, 2, 0, 0, 0]]
    ))
    assert side == "right" and chosen is moving_right


def test_select_arm_tie_goes_left():
    rows = [[0, 0, 0, 0, 0], [0.5, 0, 0, 0.5, 0], [0, 0, 0, 0, 0]]
    side, _ = select_arm(_track("left", rows), _track("right", rows))
    assert side == "left"


def test_select_arm_matches_bruteforce_oracle():
    rng = np.random.default_rng(13)
    for _ in range(200):
        n = int(rng.integers(2, 9))
        left = rng.uniform(-3, 3, size=(n, 5))
        right = rng.uniform(-3, 3, size=(n, 5))
        s_l = arm_activity_score(left)
        s_r = arm_activity_score(right)
        side, _ = select_arm(_track("left", left), _track("right", right))
        assert side == ("left" if s_l >= s_r else "right")


def test_box_blur_matches_window_mean_oracle_exactly():
    rng = np.random.default_rng(21)
    for _ in range(100):
        n = int(rng.integers(15, 200))
        x = rng.uniform(-10, 10, size=n)
        out = box_blur(x, 15)
        ref = window_mean_blur(x, 15)
        assert np.array_equal(out, ref)  # bitwise, same summation route


def test_box_blur_constant_signal():
    x = np.full(40, 1.2345)
    out = box_blur(x, 15)
    np.testing.assert_allclose(out, x, atol=1e-12)


def test_box_blur_stays_inside_range():
    rng = np.random.default_rng(22)
    x = rng.uniform(-5, 5, size=100)
    out = box_blur(x, 15)
    assert out.min() >= x.min() - 1e-12
    assert out.max() <= x.max() + 1e-12


def test_box_blur_size_one_is_identity():
    x = np.arange(10.0)
    assert np.array_equal(box_blur(x, 1), x)


def test_box_blur_errors():
    x = np.arange(10.0)
    with pytest.raises(InputError):
        box_blur(x, 4)
    with pytest.raises(InputError):
        box_blur(x, -3)
    with pytest.raises(InputError):
        box_blur(x, 11)
    with pytest.raises(InputError):
        box_blur(np.zeros((3, 3)), 3)


def test_dft_roundtrip():
    rng = np.random.default_rng(31)
    for n in (8, 57, 256):
        x = rng.uniform(-1, 1, size=n)
        back = idft(dft(x))
        assert np.abs(back - x).max() < 1e-9


def test_dft_matches_library_fft():
    rng = np.random.default_rng(32)
    for n in (16, 100, 501):
        x = rng.uniform(-2, 2, size=n)
        assert np.abs(dft(x).bins - dft_oracle(x)).max() < 1e-9


def test_pure_cosine_bin_magnitudes():
    n, m, amp = 64, 5, 0.7
    k = np.arange(n)
    x = amp * np.cos(2 * np.pi * m * k / n)
    mags = dft(x).magnitudes()
    assert mags[m] == pytest.approx(n * amp / 2, abs=1e-6)
    assert mags[n - m] == pytest.approx(n * amp / 2, abs=1e-6)
    others = np.delete(mags, [m, n - m])
    assert others.max() < 1e-6


def test_dft_conjugate_symmetry_for_real_input():
    rng = np.random.default_rng(33)
    x = rng.uniform(-1, 1, size=121)
    bins = dft(x).bins
    sym = np.conj(bins[(-np.arange(121)) % 121])
    assert np.abs(bins - sym).max() < 1e-9


def test_dft_rejects_empty():
    with pytest.raises(InputError):
        dft([])
    with pytest.raises(InputError):
        idft(Spectrum(bins=np.array([], dtype=complex)))


def test_frequency_filter_magnitude_drops_weak_bins():
    n = 64
    k = np.arange(n)
    strong = 0.7 * np.cos(2 * np.pi * 3 * k / n)  # bin magnitude 22.4
    weak = 0.3 * np.cos(2 * np.pi * 9 * k / n)  # bin magnitude 9.6
    out = frequency_filter(strong + weak, FilterConfig(mode="magnitude", threshold=20.0))
    assert np.abs(out - strong).max() < 1e-9


def test_frequency_filter_lowpass_bins():
    n = 64
    k = np.arange(n)
    low = 0.5 * np.cos(2 * np.pi * 2 * k / n)
    high = 0.5 * np.cos(2 * np.pi * 10 * k / n)
    out = frequency_filter(low + high, FilterConfig(mode="lowpass_bins", threshold=5))
    assert np.abs(out - low).max() < 1e-9
    # threshold at the bin keeps everything strictly below it
    kept = frequency_filter(low + high, FilterConfig(mode="lowpass_bins", threshold=11))
    assert np.abs(kept - (low + high)).max() < 1e-9


def test_frequency_filter_never_adds_energy():
    rng = np.random.default_rng(41)
    for _ in range(50):
        x = rng.uniform(-3, 3, size=64)
        for cfg in (
            FilterConfig(mode="magnitude", threshold=float(rng.uniform(0, 40))),
            FilterConfig(mode="lowpass_bins", threshold=int(rng.integers(0, 33))),
        ):
            y = frequency_filter(x, cfg)
            assert signal_energy(y) <= signal_energy(x) + 1e-9


def test_spectrum_energy_matches_signal_energy():
    rng = np.random.default_rng(42)
    x = rng.uniform(-1, 1, size=100)
    assert signal_energy(x) == pytest.approx(spectrum_energy(dft(x).bins), rel=1e-12)


def test_filter_unknown_mode_rejected():
    with pytest.raises(InputError):
        FilterConfig(mode="bandpass")


def test_map_to_robot_layout():
    rng = np.random.default_rng(51)
    angles = rng.uniform(-1, 1, size=(40, 5))
    track = HumanAngleTrack(side="left", angles=angles, frame_rate=30.0)
    pan = SinusoidSpec(A_rad=0.2, omega_rad_s=1.0, gamma_rad=math.pi / 2)
    wrist2 = SinusoidSpec(A_rad=0.1, omega_rad_s=0.5, gamma_rad=-0.3)
    traj = map_to_robot(track, pan, wrist2)
    assert traj.source == "pose"
    assert traj.rate == 30.0
    assert len(traj) == 40
    from choreokit import eval_joint

    for i in (0, 7, 39):
        t = i / 30.0
        assert traj.qs[i, 0] == pytest.approx(eval_joint(pan, t), abs=1e-12)
        assert traj.qs[i, 4] == pytest.approx(eval_joint(wrist2, t), abs=1e-12)
    np.testing.assert_array_equal(traj.qs[:, 1], angles[:, 0])
    np.testing.assert_array_equal(traj.qs[:, 2], angles[:, 1])
    np.testing.assert_array_equal(traj.qs[:, 3], angles[:, 2])
    np.testing.assert_array_equal(traj.qs[:, 5], angles[:, 3])


def test_import_constant_pose_yields_constant_trajectory(tmp_path):
    d = write_pose_dir(tmp_path / "seq", 64, left_theta=lambda i: 0.6)
    traj, meta = import_pose_video(d, frame_rate=32.0)
    dev = np.abs(traj.qs - traj.qs[0][None, :]).max()
    assert dev < 1e-9
    assert meta.side_selected in ("left", "right")
    assert meta.frames == 64
    assert len(traj) == 64


def test_import_elbow_oscillation_peak_bin(tmp_path):
    n, fps, f_hz = 256, 32.0, 0.5
    d = write_pose_dir(
        tmp_path / "seq",
        n,
        left_theta=lambda i: 0.8 * math.sin(2 * math.pi * f_hz * i / fps),
    )
    traj, meta = import_pose_video(d, frame_rate=fps)
    assert meta.side_selected == "left"
    elbow = traj.qs[:, 2]
    mags = np.abs(dft_oracle(elbow))
    peak = int(np.argmax(mags[1 : n // 2])) + 1
    expected_bin = f_hz * n / fps  # = 4
    assert abs(peak - expected_bin) <= 1
    peak_hz = peak * fps / n
    assert peak_hz == pytest.approx(f_hz, abs=fps / n)


def test_import_forced_side(tmp_path):
    d = write_pose_dir(
        tmp_path / "seq", 32, left_theta=lambda i: 0.5 * math.sin(0.3 * i)
    )
    traj_r, meta_r = import_pose_video(d, side="right", frame_rate=32.0)
    assert meta_r.side_requested == "right"
    assert meta_r.side_selected == "right"
    assert np.abs(traj_r.qs[:, 2] - traj_r.qs[0, 2]).max() < 1e-9  # right arm is still


def test_import_is_deterministic(tmp_path):
    d = write_pose_dir(
        tmp_path / "seq", 64, left_theta=lambda i: 0.4 * math.sin(0.2 * i)
    )
    t1, m1 = import_pose_video(d, frame_rate=32.0)
    t2, m2 = import_pose_video(d, frame_rate=32.0)
    assert np.array_equal(t1.qs, t2.qs)
    assert m1.to_json() == m2.to_json()
    f1, f2 = tmp_path / "a.csv", tmp_path / "b.csv"
    write_csv(t1, f1)
    write_csv(t2, f2)
    assert f1.read_bytes() == f2.read_bytes()


def test_import_gap_filled_ends_match_materialized_fixture(tmp_path):
    n = 40

    def theta(i):
        return 0.5 * math.sin(0.4 * i)

    gappy = write_pose_dir(tmp_path / "gappy", n, left_theta=theta, empty={0, 1, n - 1})
    # same sequence with the gaps materialized from the nearest real frame
    def nearest_theta(i):
        if i in (0, 1):
            return theta(2)
        if i == n - 1:
            return theta(n - 2)
        return theta(i)

    solid = write_pose_dir(tmp_path / "solid", n, left_theta=nearest_theta)
    t_gappy, _ = import_pose_video(gappy, frame_rate=32.0)
    t_solid, _ = import_pose_video(solid, frame_rate=32.0)
    np.testing.assert_allclose(t_gappy.qs, t_solid.qs, atol=1e-12)


def test_import_rejects_bad_side(tmp_path):
    d = write_pose_dir(tmp_path / "seq", 20)
    with pytest.raises(InputError):
        import_pose_video(d, side="both")
