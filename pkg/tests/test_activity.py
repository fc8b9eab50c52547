import math

import numpy as np
import pytest

from hbpt import activity as act
from hbpt import synthgen as sg
from hbpt import tracker as tr
from hbpt.blobmodel import GaussianBlob
from hbpt.imageio import DepthRaster

from conftest import frame_from_rgb


def scene_with_box(box_color=(220, 200, 40), rect=(30, 20, 16, 12), w=120, h=90):
    rgb = np.full((h, w, 3), (120, 130, 115), np.uint8)
    x, y, bw, bh = rect
    rgb[y : y + bh, x : x + bw] = box_color
    return frame_from_rgb(rgb), rect


def stub_model(torso_mu=(60.0, 60.0), hand=(40, 30), arm="armR"):
    """Minimal body model with a torso blob and one arm pixel set."""
    torso = GaussianBlob(mu=torso_mu, K=((4.0, 0.0), (0.0, 4.0)), color_mean=(0, 0, 0), area=50, label="torso")
    blobs = {"torso": torso}
    part_pixels = {}
    if hand is not None:
        arm_blob = GaussianBlob(
            mu=(float(hand[0]), float(hand[1])),
            K=((1.0, 0.0), (0.0, 1.0)),
            color_mean=(0, 0, 0),
            area=9,
            label=arm,
        )
        blobs[arm] = arm_blob
        px = [(hand[0] - dx, hand[1]) for dx in range(3)]
        part_pixels[arm] = np.array(px, dtype=int)
    from hbpt.bodyparts import BodyPartModel

    return BodyPartModel(blobs=blobs, frame_index=0, part_pixels=part_pixels)


def flat_depth(z, w=120, h=90):
    return DepthRaster(width=w, height=h, z=np.full((h, w), z, np.int32))


# ---------------------------------------------------------------------------
# histograms

def test_hist16_uniform_rect_single_bin():
    frame, rect = scene_with_box()
    hist = tr.color_hist16(frame, rect)
    assert np.count_nonzero(hist) == 1
    assert hist.max() == pytest.approx(1.0)


def test_hist16_matches_counting_oracle():
    rng = np.random.default_rng(0)
    rgb = rng.integers(0, 256, size=(40, 50, 3)).astype(np.uint8)
    frame = frame_from_rgb(rgb)
    for _ in range(100):
        w, h = rng.integers(1, 20, 2)
        x = rng.integers(0, 50 - w)
        y = rng.integers(0, 40 - h)
        hist = tr.color_hist16(frame, (int(x), int(y), int(w), int(h)))
        counts = np.zeros(16)
        for yy in range(y, y + h):
            for xx in range(x, x + w):
                u = frame.yuv[yy, xx, 1] // 64
                v = frame.yuv[yy, xx, 2] // 64
                counts[u * 4 + v] += 1
        assert np.array_equal(hist, counts / counts.sum())
        assert hist.sum() == pytest.approx(1.0, abs=1e-12)


def test_hist_distance_examples():
    h1 = np.zeros(16)
    h1[0] = 1.0
    assert act.hist_distance(h1, h1) == 0.0
    h2 = np.zeros(16)
    h2[1] = 1.0
    assert act.hist_distance(h1, h2) == 1.0
    h3 = np.zeros(16)
    h3[0] = 0.5
    h3[1] = 0.5
    assert act.hist_distance(h1, h3) == pytest.approx(math.sqrt(1 - math.sqrt(0.5)), abs=1e-4)
    assert act.hist_distance(h1, h3) == pytest.approx(0.5412, abs=1e-4)


def test_hist_distance_properties():
    rng = np.random.default_rng(1)
    for _ in range(50):
        a = rng.random(16)
        b = rng.random(16)
        a /= a.sum()
        b /= b.sum()
        dab = act.hist_distance(a, b)
        assert 0.0 <= dab <= 1.0
        assert dab == pytest.approx(act.hist_distance(b, a))
    a = rng.random(16)
    a /= a.sum()
    assert act.hist_distance(a, a) == pytest.approx(0.0, abs=1e-7)
    with pytest.raises(ValueError):
        act.hist_distance(np.full(16, 0.2), a)


# ---------------------------------------------------------------------------
# box region tracking

def test_static_box_tracking_is_stable():
    frame, rect = scene_with_box()
    box = act.make_box_region(frame, rect)
    rng = np.random.default_rng(2)
    for _ in range(50):
        noisy = np.clip(frame.rgb + rng.normal(0, 2, frame.rgb.shape), 0, 255).astype(np.uint8)
        box = act.track_box_region(box, frame_from_rgb(noisy))
    assert abs(box.tracked_rect[0] - rect[0]) <= 1
    assert abs(box.tracked_rect[1] - rect[1]) <= 1


def test_moving_box_is_followed():
    rect0 = (10, 30, 16, 12)
    frames = []
    for step in range(12):
        rgb = np.full((90, 140, 3), (120, 130, 115), np.uint8)
        x = rect0[0] + 4 * step
        rgb[rect0[1] : rect0[1] + 12, x : x + 16] = (220, 200, 40)
        frames.append(frame_from_rgb(rgb))
    box = act.make_box_region(frames[0], rect0)
    for i, frame in enumerate(frames[1:], 1):
        box = act.track_box_region(box, frame)
        assert abs(box.tracked_rect[0] - (rect0[0] + 4 * i)) <= 2
        assert abs(box.tracked_rect[1] - rect0[1]) <= 2


def test_boxless_scene_flags_lost():
    frame, rect = scene_with_box()
    box = act.make_box_region(frame, rect)
    plain = frame_from_rgb(np.full((90, 120, 3), (120, 130, 115), np.uint8))
    tracked0 = box.tracked_rect
    box = act.track_box_region(box, plain)
    assert box.lost
    assert box.tracked_rect == tracked0


# ---------------------------------------------------------------------------
# approach

def test_approach_fires_after_sustained_contact():
    frame, rect = scene_with_box()
    box = act.make_box_region(frame, rect)
    model = stub_model(hand=(rect[0] - 5, rect[1] + 4))
    state = act.ActivityState()
    events = []
    for i in range(4):
        ev = act.detect_approach(model, box, None, state, frame_index=i)
        if ev:
            events.append(ev)
    assert [e.frame_index for e in events] == [2]  # third consecutive frame
    assert state.phase == "Approached"
    assert events[0].payload["depth_used"] is False


def test_approach_depth_gate_blocks_distant_hand():
    frame, rect = scene_with_box()
    box = act.make_box_region(frame, rect)
    hand = (rect[0] + 4, rect[1] + 4)  # overlapping in 2D
    model = stub_model(hand=hand)
    z = np.full((90, 120), 2000, np.int32)
    x, y, w, h = rect
    z[y : y + h, x : x + w] = 2000
    # person plane 1500 mm behind the box
    z[hand[1] - 4 : hand[1] + 5, hand[0] - 6 : hand[0] + 3] = 3500
    depth = DepthRaster(width=120, height=90, z=z)
    state = act.ActivityState()
    for i in range(10):
        assert act.detect_approach(model, box, depth, state, frame_index=i) is None
    assert state.phase == "Idle"


def test_approach_depth_gate_passes_same_plane():
    frame, rect = scene_with_box()
    box = act.make_box_region(frame, rect)
    model = stub_model(hand=(rect[0] - 5, rect[1] + 4))
    depth = flat_depth(2000)
    state = act.ActivityState()
    events = [
        act.detect_approach(model, box, depth, state, frame_index=i) for i in range(3)
    ]
    fired = [e for e in events if e]
    assert len(fired) == 1
    assert fired[0].payload["depth_used"] is True
    assert fired[0].payload["z_hand_mm"] == 2000
    assert fired[0].payload["distance_mm"] == 0


def test_approach_streak_resets_on_gap():
    frame, rect = scene_with_box()
    box = act.make_box_region(frame, rect)
    near = stub_model(hand=(rect[0] - 5, rect[1] + 4))
    far = stub_model(hand=(rect[0] - 80, rect[1] + 4))
    state = act.ActivityState()
    assert act.detect_approach(near, box, None, state, frame_index=0) is None
    assert act.detect_approach(near, box, None, state, frame_index=1) is None
    assert act.detect_approach(far, box, None, state, frame_index=2) is None  # resets
    assert state.approach_streak == 0
    assert act.detect_approach(near, box, None, state, frame_index=3) is None
    assert act.detect_approach(near, box, None, state, frame_index=4) is None
    ev = act.detect_approach(near, box, None, state, frame_index=5)
    assert ev is not None and ev.kind == "Approach"


# ---------------------------------------------------------------------------
# open

def _opened_frame(rect):
    frame, _ = scene_with_box(box_color=(150, 40, 180), rect=rect)
    return frame


def test_open_requires_prior_approach():
    frame, rect = scene_with_box()
    box = act.make_box_region(frame, rect)
    state = act.ActivityState()
    changed = _opened_frame(rect)
    for i in range(20):
        assert act.detect_open(box, changed, state, frame_index=i) is None
    assert state.phase == "Idle"


def test_open_fires_after_sustained_change():
    frame, rect = scene_with_box()
    box = act.make_box_region(frame, rect)
    state = act.ActivityState()
    state.advance("Approached")
    changed = _opened_frame(rect)
    events = [act.detect_open(box, changed, state, frame_index=i) for i in range(6)]
    fired = [e for e in events if e]
    assert len(fired) == 1
    assert fired[0].frame_index == 4  # fifth consecutive frame
    assert state.phase == "Opened"
    # no re-fire afterwards
    assert act.detect_open(box, changed, state, frame_index=9) is None


def test_open_ignores_unchanged_box():
    frame, rect = scene_with_box()
    box = act.make_box_region(frame, rect)
    state = act.ActivityState()
    state.advance("Approached")
    for i in range(50):
        assert act.detect_open(box, frame, state, frame_index=i) is None


# ---------------------------------------------------------------------------
# Lucas-Kanade flow

def _textured_frame(rng, w=90, h=70):
    base = rng.integers(40, 220, size=(h // 3 + 1, w // 3 + 1)).astype(np.uint8)
    gray = np.repeat(np.repeat(base, 3, axis=0), 3, axis=1)[:h, :w]
    rgb = np.stack([gray, gray, gray], axis=2)
    return rgb


def test_lk_identical_frames_zero_flow():
    rng = np.random.default_rng(3)
    rgb = _textured_frame(rng)
    f = frame_from_rgb(rgb)
    pts = [(30.0, 30.0), (45.0, 25.0), (60.0, 40.0)]
    out, status = act.lk_flow(f, f, pts)
    assert status.all()
    assert np.allclose(out, pts, atol=1e-3)


def test_lk_recovers_integer_shift_vs_ssd():
    rng = np.random.default_rng(4)
    rgb = _textured_frame(rng)
    shift = (3, -2)
    moved = np.roll(rgb, (shift[1], shift[0]), axis=(0, 1))
    f0 = frame_from_rgb(rgb)
    f1 = frame_from_rgb(moved)
    pts = [(30.0, 35.0), (50.0, 30.0), (40.0, 45.0)]
    out, status = act.lk_flow(f0, f1, pts)
    assert status.all()
    g0 = rgb[:, :, 0].astype(float)
    g1 = moved[:, :, 0].astype(float)
    for (x0, y0), (x1, y1) in zip(pts, out):
        xi, yi = int(x0), int(y0)
        patch = g0[yi - 7 : yi + 8, xi - 7 : xi + 8]
        best = min(
            ((dx, dy) for dx in range(-6, 7) for dy in range(-6, 7)),
            key=lambda d: (
                (g1[yi + d[1] - 7 : yi + d[1] + 8, xi + d[0] - 7 : xi + d[0] + 8] - patch) ** 2
            ).sum(),
        )
        assert best == shift  # SSD oracle confirms the scripted shift
        assert abs((x1 - x0) - best[0]) <= 0.25
        assert abs((y1 - y0) - best[1]) <= 0.25


def test_lk_flat_region_is_lost():
    rgb = np.full((60, 60, 3), 128, np.uint8)
    f = frame_from_rgb(rgb)
    out, status = act.lk_flow(f, f, [(30.0, 30.0)])
    assert not status.any()


# ---------------------------------------------------------------------------
# carry

def _advance_track(track, dx, dy):
    prev = track.centroid
    track.points = track.points + np.array([dx, dy])
    track.prev_centroid = prev
    return track


def test_carry_fires_on_sustained_joint_motion():
    state = act.ActivityState()
    state.advance("Approached")
    track = act.seed_object_points((40, 40, 12, 10))
    model = stub_model(torso_mu=(70.0, 60.0), hand=(48, 44))
    events = []
    for i in range(7):
        _advance_track(track, 3.0, 0.0)
        model = stub_model(torso_mu=(70.0 + 3 * i, 60.0), hand=(48 + 3 * (i + 1), 44))
        ev = act.detect_carry(model, track, None, state, frame_index=i)
        if ev:
            events.append(ev)
    assert [e.frame_index for e in events] == [4]
    assert state.phase == "Carrying"


def test_carry_requires_motion():
    state = act.ActivityState()
    state.advance("Approached")
    track = act.seed_object_points((40, 40, 12, 10))
    model = stub_model(hand=(48, 44))
    for i in range(20):
        track.prev_centroid = track.centroid  # static object
        assert act.detect_carry(model, track, None, state, frame_index=i) is None


def test_carry_requires_hand_nearby():
    state = act.ActivityState()
    state.advance("Approached")
    track = act.seed_object_points((40, 40, 12, 10))
    model = stub_model(hand=(110, 5))  # permanently > 30 px from the object row
    for i in range(20):
        _advance_track(track, 3.0, 0.0)
        assert act.detect_carry(model, track, None, state, frame_index=i) is None


def test_carry_gated_without_approach():
    state = act.ActivityState()
    track = act.seed_object_points((40, 40, 12, 10))
    model = stub_model(hand=(48, 44))
    for i in range(10):
        _advance_track(track, 3.0, 0.0)
        assert act.detect_carry(model, track, None, state, frame_index=i) is None
    assert state.phase == "Idle"


def test_carry_depth_rate_gate():
    state = act.ActivityState()
    state.advance("Approached")
    track = act.seed_object_points((40, 40, 12, 10))
    # object depth jumps 600 mm/frame while the hand depth stays: rejected
    zs = [2000, 2600, 3200, 3800, 4400, 5000, 5600, 6200]
    for i in range(8):
        _advance_track(track, 3.0, 0.0)
        cx, cy = track.centroid
        # hand 15 px right of the object; torso farther right so the inward
        # depth nudge moves the sample away from the object's depth patch
        hand = (int(cx) + 15, int(cy))
        model = stub_model(torso_mu=(cx + 45.0, cy), hand=hand)
        z = np.full((90, 160), 2000, np.int32)
        z[int(cy) - 2 : int(cy) + 3, int(cx) - 2 : int(cx) + 3] = zs[i]
        depth = DepthRaster(width=160, height=90, z=z)
        assert act.detect_carry(model, track, depth, state, frame_index=i) is None
    assert state.phase == "Approached"


# ---------------------------------------------------------------------------
# state machine

def test_phase_order_is_monotone():
    state = act.ActivityState()
    assert not state.reached("Approached")
    state.advance("Approached")
    state.advance("Opened")
    assert state.reached("Approached") and state.reached("Opened")
    state.advance("Approached")  # never regresses
    assert state.phase == "Opened"


def test_monitor_without_box_is_inert():
    mon = act.ActivityMonitor(box_rect=None)
    frame, _ = scene_with_box()
    assert mon.process(0, frame, stub_model()) == []
    assert mon.events == []
