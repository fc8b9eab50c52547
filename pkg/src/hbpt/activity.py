"""Activity recognizers: approach (proximity + depth gate), open (reference
histogram divergence under mean-shift region tracking) and carry (point-
tracked object moving with the hand), sequenced by an explicit state machine.

Every sustained condition is debounced: its counter resets on a single
non-qualifying frame. Open and Carry are gated on a prior Approach.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .tracker import back_project, color_hist16, mean_shift

DEFAULT_D_XY = 30.0  # px
DEFAULT_Z_GATE = 300.0  # mm between hand and box
DEFAULT_APPROACH_FRAMES = 3
DEFAULT_THETA_OPEN = 0.4
DEFAULT_OPEN_FRAMES = 5
DEFAULT_CARRY_FRAMES = 5
DEFAULT_CARRY_MIN_DISP = 1.0  # px per frame
DEFAULT_CARRY_Z_RATE = 200.0  # mm per frame

_PHASES = {"Idle": 0, "Approached": 1, "Opened": 2, "Carrying": 3}


@dataclass
class BoxRegion:
    rect: tuple  # user-configured reference rectangle
    ref_hist: np.ndarray  # 16-bin normalized UV histogram of rect
    tracked_rect: tuple  # current mean-shift-tracked rectangle
    lost: bool = False  # set when backprojection under the rect vanished


@dataclass
class ObjectTrack:
    points: np.ndarray  # (n, 2) float
    alive: np.ndarray  # (n,) bool
    prev_centroid: tuple | None = None

    @property
    def centroid(self):
        if not self.alive.any():
            return None
        pts = self.points[self.alive]
        return (float(pts[:, 0].mean()), float(pts[:, 1].mean()))


@dataclass
class ActivityEvent:
    kind: str  # Approach | Open | Carry
    frame_index: int
    confidence: float
    payload: dict

    def to_dict(self):
        return {
            "kind": self.kind,
            "frame_index": self.frame_index,
            "confidence": self.confidence,
            "payload": self.payload,
        }


@dataclass
class ActivityState:
    phase: str = "Idle"
    approach_streak: int = 0
    open_streak: int = 0
    carry_streak: int = 0
    prev_z_hand: float | None = None
    prev_z_obj: float | None = None

    def reached(self, phase):
        return _PHASES[self.phase] >= _PHASES[phase]

    def advance(self, phase):
        if _PHASES[phase] > _PHASES[self.phase]:
            self.phase = phase


def make_box_region(frame, rect):
    """Build the reference histogram from the configured rectangle."""
    return BoxRegion(
        rect=tuple(rect), ref_hist=color_hist16(frame, rect), tracked_rect=tuple(rect)
    )


def hist_distance(h1, h2):
    """Bhattacharyya distance sqrt(1 - sum(sqrt(p*q))), in [0, 1]."""
    h1 = np.asarray(h1, dtype=np.float64)
    h2 = np.asarray(h2, dtype=np.float64)
    if abs(h1.sum() - 1.0) > 1e-6 or abs(h2.sum() - 1.0) > 1e-6:
        raise ValueError("histograms must be normalized")
    coef = float(np.sqrt(h1 * h2).sum())
    return math.sqrt(max(0.0, 1.0 - coef))


def track_box_region(box, frame):
    """Move the tracked rectangle by mean shift over the backprojection."""
    weights = back_project(frame, box.ref_hist)
    rect, _, converged = mean_shift(weights, box.tracked_rect)
    if not converged and _window_total(weights, rect) == 0.0:
        box.lost = True
        return box
    box.tracked_rect = rect
    box.lost = False
    return box


def _window_total(weights, rect):
    x, y, w, h = rect
    return float(weights[y : y + h, x : x + w].sum())


def hand_point(model):
    """Arm pixel farthest from the torso center, or None without arms."""
    torso = model.blobs.get("torso")
    if torso is None:
        return None
    tx, ty = torso.mu
    best, best_d = None, -1.0
    for label in ("armL", "armR"):
        pts = model.part_pixels.get(label)
        if pts is None or len(pts) == 0:
            continue
        d2 = (pts[:, 0] - tx) ** 2 + (pts[:, 1] - ty) ** 2
        i = int(np.argmax(d2))
        if d2[i] > best_d:
            best_d = float(d2[i])
            best = (int(pts[i, 0]), int(pts[i, 1]))
    return best


def _point_rect_distance(p, rect):
    x, y, w, h = rect
    dx = max(x - p[0], 0.0, p[0] - (x + w - 1))
    dy = max(y - p[1], 0.0, p[1] - (y + h - 1))
    return math.hypot(dx, dy)


def _hand_depth_sample(model, hand, inset=3.0):
    """Sample point for hand depth, nudged toward the torso so the silhouette
    edge (where depth returns flicker between person and background) is
    avoided."""
    torso = model.blobs.get("torso")
    if torso is None:
        return hand
    dx = torso.mu[0] - hand[0]
    dy = torso.mu[1] - hand[1]
    norm = math.hypot(dx, dy)
    if norm < 1e-9:
        return hand
    return (hand[0] + inset * dx / norm, hand[1] + inset * dy / norm)


def depth_at(depth, point, win=5):
    """Median of the valid depths in a win x win window; None when all invalid."""
    if depth is None:
        return None
    half = win // 2
    x, y = int(round(point[0])), int(round(point[1]))
    x0, x1 = max(0, x - half), min(depth.width, x + half + 1)
    y0, y1 = max(0, y - half), min(depth.height, y + half + 1)
    vals = depth.z[y0:y1, x0:x1]
    vals = vals[vals > 0]
    if vals.size == 0:
        return None
    return float(np.median(vals))


def detect_approach(
    model,
    box,
    depth,
    state,
    frame_index=0,
    d_xy=DEFAULT_D_XY,
    z_gate=DEFAULT_Z_GATE,
    frames_required=DEFAULT_APPROACH_FRAMES,
):
    """Fire Approach after a sustained hand-near-box condition.

    The hand must stay within ``d_xy`` of the tracked rectangle for
    ``frames_required`` consecutive frames; with depth available, the hand
    and box must also sit within ``z_gate`` millimeters of each other.
    """
    if state.reached("Approached"):
        return None
    hand = hand_point(model)
    if hand is None:
        state.approach_streak = 0
        return None
    dist = _point_rect_distance(hand, box.tracked_rect)
    ok = dist <= d_xy
    z_hand = z_box = None
    depth_used = False
    if ok and depth is not None:
        bx, by, bw, bh = box.tracked_rect
        z_hand = depth_at(depth, _hand_depth_sample(model, hand))
        z_box = depth_at(depth, (bx + bw / 2.0, by + bh / 2.0))
        depth_used = True
        ok = z_hand is not None and z_box is not None and abs(z_hand - z_box) <= z_gate
    state.approach_streak = state.approach_streak + 1 if ok else 0
    if state.approach_streak < frames_required:
        return None
    state.advance("Approached")
    payload = {
        "distance_px": dist,
        "depth_used": depth_used,
        "z_hand_mm": z_hand,
        "z_box_mm": z_box,
        "distance_mm": abs(z_hand - z_box) if depth_used and z_hand is not None else None,
    }
    return ActivityEvent(
        kind="Approach",
        frame_index=frame_index,
        confidence=max(0.0, 1.0 - dist / (d_xy + 1.0)),
        payload=payload,
    )


def detect_open(
    box,
    frame,
    state,
    frame_index=0,
    theta_open=DEFAULT_THETA_OPEN,
    frames_required=DEFAULT_OPEN_FRAMES,
):
    """Fire Open after a sustained histogram divergence inside the box rect."""
    if not state.reached("Approached") or state.reached("Opened"):
        return None
    d = hist_distance(color_hist16(frame, box.tracked_rect), box.ref_hist)
    state.open_streak = state.open_streak + 1 if d > theta_open else 0
    if state.open_streak < frames_required:
        return None
    state.advance("Opened")
    return ActivityEvent(
        kind="Open",
        frame_index=frame_index,
        confidence=min(1.0, d),
        payload={"hist_distance": d, "threshold": theta_open},
    )


def detect_carry(
    model,
    track,
    depth,
    state,
    frame_index=0,
    d_xy=DEFAULT_D_XY,
    min_disp=DEFAULT_CARRY_MIN_DISP,
    z_rate=DEFAULT_CARRY_Z_RATE,
    frames_required=DEFAULT_CARRY_FRAMES,
):
    """Fire Carry when the tracked object keeps moving with the hand.

    Needs a sustained run of frames where the object centroid moved more than
    ``min_disp`` pixels, the hand stayed within ``d_xy`` of it, and (with
    depth) hand and object depth changed together within ``z_rate`` mm/frame.
    """
    if not state.reached("Approached") or state.phase == "Carrying":
        return None
    centroid = track.centroid if track is not None else None
    hand = hand_point(model)
    z_hand = (
        depth_at(depth, _hand_depth_sample(model, hand))
        if depth is not None and hand
        else None
    )
    z_obj = depth_at(depth, centroid) if depth is not None and centroid else None
    ok = False
    disp = 0.0
    hand_dist = None
    if centroid is not None and track.prev_centroid is not None and hand is not None:
        disp = math.hypot(
            centroid[0] - track.prev_centroid[0], centroid[1] - track.prev_centroid[1]
        )
        hand_dist = math.hypot(hand[0] - centroid[0], hand[1] - centroid[1])
        ok = disp > min_disp and hand_dist <= d_xy
        if ok and depth is not None:
            have_all = None not in (z_hand, z_obj, state.prev_z_hand, state.prev_z_obj)
            if have_all:
                dz = (z_obj - state.prev_z_obj) - (z_hand - state.prev_z_hand)
                ok = abs(dz) <= z_rate
    state.prev_z_hand = z_hand
    state.prev_z_obj = z_obj
    state.carry_streak = state.carry_streak + 1 if ok else 0
    if state.carry_streak < frames_required:
        return None
    state.advance("Carrying")
    return ActivityEvent(
        kind="Carry",
        frame_index=frame_index,
        confidence=min(1.0, disp / (min_disp + 1.0)),
        payload={"displacement_px": disp, "hand_distance_px": hand_dist},
    )


# ---------------------------------------------------------------------------
# pyramidal Lucas-Kanade point tracking

def _blur_decimate(img):
    p = np.pad(img, 1, mode="edge")
    rows = 0.25 * p[:-2, 1:-1] + 0.5 * p[1:-1, 1:-1] + 0.25 * p[2:, 1:-1]
    p2 = np.pad(rows, ((0, 0), (1, 1)), mode="edge")
    full = 0.25 * p2[:, :-2] + 0.5 * p2[:, 1:-1] + 0.25 * p2[:, 2:]
    return full[::2, ::2]


def _pyramid(gray, levels):
    pyr = [gray]
    for _ in range(levels - 1):
        if min(pyr[-1].shape) < 8:
            break
        pyr.append(_blur_decimate(pyr[-1]))
    return pyr


def _sample(img, gx, gy):
    h, w = img.shape
    gx = np.clip(gx, 0.0, w - 1.001)
    gy = np.clip(gy, 0.0, h - 1.001)
    x0 = np.floor(gx).astype(int)
    y0 = np.floor(gy).astype(int)
    fx = gx - x0
    fy = gy - y0
    top = (1 - fx) * img[y0, x0] + fx * img[y0, x0 + 1]
    bot = (1 - fx) * img[y0 + 1, x0] + fx * img[y0 + 1, x0 + 1]
    return (1 - fy) * top + fy * bot


def lk_flow(prev_frame, frame, points, window=15, levels=3, iters=20, min_eig=1e-3):
    """Track points between frames with pyramidal iterative least squares.

    Works on the Y channel normalized to [0, 1]. Each point's flow is solved
    coarse to fine inside a ``window`` x ``window`` patch. A point is lost
    when its structure tensor is too flat (minimum eigenvalue per pixel below
    ``min_eig``) at the finest level, the solution diverges, or it leaves the
    frame.
    """
    g0 = prev_frame.yuv[:, :, 0].astype(np.float64) / 255.0
    g1 = frame.yuv[:, :, 0].astype(np.float64) / 255.0
    pyr0 = _pyramid(g0, levels)
    pyr1 = _pyramid(g1, levels)
    half = window // 2
    offs = np.arange(-half, half + 1, dtype=np.float64)
    oy, ox = np.meshgrid(offs, offs, indexing="ij")
    npx = window * window
    out = np.array(points, dtype=np.float64).reshape(-1, 2).copy()
    status = np.ones(len(out), dtype=bool)

    for pi in range(len(out)):
        px, py = out[pi]
        flow = np.zeros(2)
        lost = False
        for lvl in range(len(pyr0) - 1, -1, -1):
            scale = 2.0**lvl
            lx, ly = px / scale, py / scale
            i0, i1 = pyr0[lvl], pyr1[lvl]
            gxs = lx + ox
            gys = ly + oy
            ix = (_sample(i0, gxs + 1, gys) - _sample(i0, gxs - 1, gys)) / 2.0
            iy = (_sample(i0, gxs, gys + 1) - _sample(i0, gxs, gys - 1)) / 2.0
            t0 = _sample(i0, gxs, gys)
            gxx = float((ix * ix).sum())
            gxy = float((ix * iy).sum())
            gyy = float((iy * iy).sum())
            tr2 = (gxx + gyy) / 2.0
            det = gxx * gyy - gxy * gxy
            lam_min = tr2 - math.sqrt(max(tr2 * tr2 - det, 0.0))
            if lam_min / npx < min_eig:
                if lvl == 0:
                    lost = True
                    break
                flow *= 2.0
                continue
            v = np.zeros(2)
            for _ in range(iters):
                t1 = _sample(i1, gxs + flow[0] + v[0], gys + flow[1] + v[1])
                r = t0 - t1
                bx = float((r * ix).sum())
                by = float((r * iy).sum())
                dvx = (gyy * bx - gxy * by) / det
                dvy = (gxx * by - gxy * bx) / det
                v += (dvx, dvy)
                if dvx * dvx + dvy * dvy < 1e-4:
                    break
            if np.hypot(v[0], v[1]) > window:
                lost = True
                break
            flow = (flow + v) * 2.0 if lvl > 0 else flow + v
        nx, ny = px + flow[0], py + flow[1]
        h, w = g1.shape
        if lost or not (half <= nx < w - half and half <= ny < h - half):
            status[pi] = False
        else:
            out[pi] = (nx, ny)
    return out, status


def seed_object_points(rect, spacing=4, margin=2):
    """Grid of trackable points inside a rectangle."""
    x, y, w, h = rect
    xs = np.arange(x + margin, x + w - margin, spacing, dtype=np.float64)
    ys = np.arange(y + margin, y + h - margin, spacing, dtype=np.float64)
    if xs.size == 0 or ys.size == 0:
        xs = np.array([x + w / 2.0])
        ys = np.array([y + h / 2.0])
    gx, gy = np.meshgrid(xs, ys)
    pts = np.column_stack([gx.ravel(), gy.ravel()])
    return ObjectTrack(points=pts, alive=np.ones(len(pts), dtype=bool))


class ActivityMonitor:
    """Per-frame driver for the three recognizers against one box region."""

    def __init__(
        self,
        box_rect=None,
        ref_frame=0,
        d_xy=DEFAULT_D_XY,
        z_gate=DEFAULT_Z_GATE,
        approach_frames=DEFAULT_APPROACH_FRAMES,
        theta_open=DEFAULT_THETA_OPEN,
        open_frames=DEFAULT_OPEN_FRAMES,
        carry_frames=DEFAULT_CARRY_FRAMES,
        carry_min_disp=DEFAULT_CARRY_MIN_DISP,
        carry_z_rate=DEFAULT_CARRY_Z_RATE,
    ):
        self.box_rect = tuple(box_rect) if box_rect else None
        self.ref_frame = ref_frame
        self.box = None
        self.track = None
        self.state = ActivityState()
        self.events = []
        self.prev_frame = None
        self.d_xy = d_xy
        self.z_gate = z_gate
        self.approach_frames = approach_frames
        self.theta_open = theta_open
        self.open_frames = open_frames
        self.carry_frames = carry_frames
        self.carry_min_disp = carry_min_disp
        self.carry_z_rate = carry_z_rate

    def process(self, frame_index, frame, model, depth=None):
        """Run the recognizers for one frame; returns newly fired events."""
        fired = []
        if self.box_rect is None:
            self.prev_frame = frame
            return fired
        if self.box is None:
            if frame_index < self.ref_frame:
                self.prev_frame = frame
                return fired
            self.box = make_box_region(frame, self.box_rect)
        self.box = track_box_region(self.box, frame)

        if self.track is not None and self.prev_frame is not None:
            prev_centroid = self.track.centroid
            pts, alive = lk_flow(self.prev_frame, frame, self.track.points)
            self.track.points = pts
            self.track.alive &= alive
            self.track.prev_centroid = prev_centroid

        if model is not None and model.torso is not None:
            ev = detect_approach(
                model,
                self.box,
                depth,
                self.state,
                frame_index=frame_index,
                d_xy=self.d_xy,
                z_gate=self.z_gate,
                frames_required=self.approach_frames,
            )
            if ev:
                fired.append(ev)
                self.track = seed_object_points(self.box.tracked_rect)
            ev = detect_open(
                self.box,
                frame,
                self.state,
                frame_index=frame_index,
                theta_open=self.theta_open,
                frames_required=self.open_frames,
            )
            if ev:
                fired.append(ev)
            ev = detect_carry(
                model,
                self.track,
                depth,
                self.state,
                frame_index=frame_index,
                d_xy=self.d_xy,
                min_disp=self.carry_min_disp,
                z_rate=self.carry_z_rate,
                frames_required=self.carry_frames,
            )
            if ev:
                fired.append(ev)
        else:
            self.state.approach_streak = 0
            self.state.open_streak = 0
            self.state.carry_streak = 0
        self.events.extend(fired)
        self.prev_frame = frame
        return fired
