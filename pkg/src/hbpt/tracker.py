"""Person blob detection and tracking.

The tracker combines a particle filter weighted by UV-histogram similarity
with a mean-shift refinement over the backprojected reference histogram,
fused with the largest foreground component. The torso disc is seeded from
the tracked person blob.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .maskops import connected_components

N_BINS = 16  # joint 4x4 quantization of (U, V)


@dataclass
class PersonBlob:
    bbox: tuple  # (x, y, w, h)
    centroid: tuple  # (x, y)
    area: int
    ref_hist: np.ndarray  # (16,) normalized UV histogram
    confidence: float = 1.0
    velocity: tuple = (0.0, 0.0)


@dataclass
class TorsoDisc:
    center: tuple  # (x, y)
    radius: float


@dataclass
class ParticleSet:
    states: np.ndarray  # (n, 3): x, y, scale
    weights: np.ndarray  # (n,)
    rng: np.random.Generator
    seed: int
    ref_size: tuple  # (w, h) of the person bbox at init


# ---------------------------------------------------------------------------
# histograms

def uv_bin_plane(frame):
    """Per-pixel joint UV bin index in 0..15 (bin edges at 0,64,128,192,256)."""
    u = frame.yuv[:, :, 1] >> 6
    v = frame.yuv[:, :, 2] >> 6
    return (u.astype(np.intp) << 2) | v.astype(np.intp)


def hist16_of_bins(bins):
    """Normalized 16-bin histogram of a flat array of bin indices."""
    counts = np.bincount(bins.ravel(), minlength=N_BINS)[:N_BINS]
    total = counts.sum()
    if total == 0:
        raise ValueError("histogram over an empty pixel set")
    return counts.astype(np.float64) / total


def color_hist16(frame, rect):
    """Normalized 16-bin joint UV histogram of the pixels inside rect."""
    x, y, w, h = (int(v) for v in rect)
    if w <= 0 or h <= 0:
        raise ValueError("histogram rect is empty")
    if x < 0 or y < 0 or x + w > frame.width or y + h > frame.height:
        raise ValueError("histogram rect is outside the frame")
    return hist16_of_bins(uv_bin_plane(frame)[y : y + h, x : x + w])


def bhattacharyya_similarity(h1, h2):
    """Bhattacharyya coefficient sum(sqrt(p*q)), 1 for identical histograms."""
    return float(np.sqrt(np.asarray(h1) * np.asarray(h2)).sum())


def back_project(frame, hist):
    """Weight image: each pixel takes its UV bin's histogram value."""
    hist = np.asarray(hist, dtype=np.float64)
    if hist.shape != (N_BINS,) or abs(hist.sum() - 1.0) > 1e-6:
        raise ValueError("backprojection needs a normalized 16-bin histogram")
    return hist[uv_bin_plane(frame)]


# ---------------------------------------------------------------------------
# detection

def detect_person(components, frame, min_area):
    """Promote the largest component of sufficient area to the person blob."""
    best = None
    for i in range(components.count):
        s = components.stats[i]
        if s.area >= min_area and (best is None or s.area > components.stats[best].area):
            best = i
    if best is None:
        return None
    s = components.stats[best]
    bins = uv_bin_plane(frame)[components.labels == best + 1]
    return PersonBlob(
        bbox=s.bbox,
        centroid=s.centroid,
        area=s.area,
        ref_hist=hist16_of_bins(bins),
        confidence=1.0,
        velocity=(0.0, 0.0),
    )


# ---------------------------------------------------------------------------
# mean shift

def _clip_rect(rect, width, height):
    x, y, w, h = rect
    w = min(w, width)
    h = min(h, height)
    x = min(max(x, 0), width - w)
    y = min(max(y, 0), height - h)
    return (int(x), int(y), int(w), int(h))


def _window_sum(weights, rect):
    x, y, w, h = rect
    return float(weights[y : y + h, x : x + w].sum())


def mean_shift(weights, window, max_iter=20, eps=1.0, trace=None):
    """Recenter the window on the weighted centroid of its contents.

    Moves that would lower the window's weight sum are halved until they gain
    weight or vanish, so the weight sum never decreases across iterations.
    Returns (window, iterations, converged); an all-zero window is returned
    unchanged with converged False.
    """
    hgt, wid = weights.shape
    rect = _clip_rect(window, wid, hgt)
    x, y, w, h = rect
    cur = _window_sum(weights, rect)
    if cur <= 0.0:
        return rect, 0, False
    if trace is not None:
        trace.append(cur)
    xs = np.arange(wid)
    ys = np.arange(hgt)
    converged = False
    it = 0
    while it < max_iter:
        it += 1
        sub = weights[y : y + h, x : x + w]
        total = sub.sum()
        cx = float((sub.sum(axis=0) * xs[x : x + w]).sum() / total)
        cy = float((sub.sum(axis=1) * ys[y : y + h]).sum() / total)
        nx = int(round(cx - (w - 1) / 2.0))
        ny = int(round(cy - (h - 1) / 2.0))
        nx, ny, _, _ = _clip_rect((nx, ny, w, h), wid, hgt)
        if (nx, ny) == (x, y):
            converged = True
            break
        cand = _window_sum(weights, (nx, ny, w, h))
        while cand < cur:  # halve the displacement rather than lose weight
            nx = x + int((nx - x) / 2.0)
            ny = y + int((ny - y) / 2.0)
            if (nx, ny) == (x, y):
                break
            cand = _window_sum(weights, (nx, ny, w, h))
        if (nx, ny) == (x, y):
            converged = True
            break
        disp = math.hypot(nx - x, ny - y)
        x, y = nx, ny
        cur = cand
        if trace is not None:
            trace.append(cur)
        if disp < eps:
            converged = True
            break
    return (x, y, w, h), it, converged


# ---------------------------------------------------------------------------
# particle filter + mean shift

def init_particles(person, n=100, seed=0):
    """Seed n particles at the person centroid with unit scale."""
    states = np.zeros((n, 3), dtype=np.float64)
    states[:, 0] = person.centroid[0]
    states[:, 1] = person.centroid[1]
    states[:, 2] = 1.0
    return ParticleSet(
        states=states,
        weights=np.full(n, 1.0 / n),
        rng=np.random.default_rng(seed),
        seed=seed,
        ref_size=(person.bbox[2], person.bbox[3]),
    )


def _state_rect(state, ref_size, width, height):
    w = max(2, int(round(ref_size[0] * state[2])))
    h = max(2, int(round(ref_size[1] * state[2])))
    x = int(round(state[0] - (w - 1) / 2.0))
    y = int(round(state[1] - (h - 1) / 2.0))
    return _clip_rect((x, y, w, h), width, height)


def _rect_iou(a, b):
    ax0, ay0, aw, ah = a
    bx0, by0, bw, bh = b
    ix = max(0, min(ax0 + aw, bx0 + bw) - max(ax0, bx0))
    iy = max(0, min(ay0 + ah, by0 + bh) - max(ay0, by0))
    inter = ix * iy
    union = aw * ah + bw * bh - inter
    return inter / union if union > 0 else 0.0


def _shift_blob(prev, width, height):
    """Coast one frame at the last velocity with decayed confidence."""
    vx, vy = prev.velocity
    cx, cy = prev.centroid[0] + vx, prev.centroid[1] + vy
    x, y, w, h = prev.bbox
    bbox = _clip_rect((int(round(x + vx)), int(round(y + vy)), w, h), width, height)
    return PersonBlob(
        bbox=bbox,
        centroid=(cx, cy),
        area=prev.area,
        ref_hist=prev.ref_hist,
        confidence=prev.confidence * 0.8,
        velocity=(vx, vy),
    )


def mspf_track(
    prev,
    particles,
    frame,
    fg,
    sigma_xy=5.0,
    sigma_scale=0.02,
    iou_gate=0.3,
    components=None,
):
    """One tracking step: propagate, weight, resample, refine, fuse.

    Particle windows are scored by Bhattacharyya similarity between their
    foreground-masked UV histogram and the reference histogram. The best
    particle is refined by mean shift over the foreground-masked
    backprojection, then fused with the largest foreground component when
    their boxes overlap enough. An empty foreground coasts the previous state
    at its last velocity and decays confidence by 0.8 per frame.
    """
    if fg.bits.shape != (frame.height, frame.width):
        raise ValueError("foreground mask does not match frame dimensions")
    if not fg.bits.any():
        return _shift_blob(prev, frame.width, frame.height), particles

    n = particles.states.shape[0]
    rng = particles.rng
    states = particles.states
    states[:, 0] += rng.normal(0.0, sigma_xy, n) if sigma_xy > 0 else 0.0
    states[:, 1] += rng.normal(0.0, sigma_xy, n) if sigma_xy > 0 else 0.0
    states[:, 2] += rng.normal(0.0, sigma_scale, n) if sigma_scale > 0 else 0.0
    np.clip(states[:, 0], 0, frame.width - 1, out=states[:, 0])
    np.clip(states[:, 1], 0, frame.height - 1, out=states[:, 1])
    np.clip(states[:, 2], 0.2, 3.0, out=states[:, 2])

    plane = uv_bin_plane(frame)
    masked_plane = np.where(fg.bits, plane, N_BINS)  # bin 16 = off-silhouette
    ref = prev.ref_hist
    sqrt_ref = np.sqrt(ref)
    # full-window histograms: background dilution penalizes oversized windows,
    # which keeps the scale random walk in check
    weights = np.zeros(n)
    for i in range(n):
        x, y, w, h = _state_rect(states[i], particles.ref_size, frame.width, frame.height)
        counts = np.bincount(
            plane[y : y + h, x : x + w].ravel(), minlength=N_BINS
        )[:N_BINS]
        total = counts.sum()
        if total:
            weights[i] = float((np.sqrt(counts / total) * sqrt_ref).sum())
    best_state = states[int(np.argmax(weights))].copy()

    wsum = weights.sum()
    probs = weights / wsum if wsum > 0 else np.full(n, 1.0 / n)
    positions = (rng.random() + np.arange(n)) / n
    idx = np.searchsorted(np.cumsum(probs), positions)
    particles.states = states[np.minimum(idx, n - 1)].copy()
    particles.weights = np.full(n, 1.0 / n)

    # mean-shift refinement of the best particle over the masked backprojection;
    # the window takes the tracked person's current size so a wandering scale
    # cannot crop the silhouette and bias the position estimate
    wimg = np.where(fg.bits, ref[plane], 0.0)
    seed = (best_state[0], best_state[1], 1.0)
    win0 = _state_rect(seed, (prev.bbox[2], prev.bbox[3]), frame.width, frame.height)
    win, _, _ = mean_shift(wimg, win0)
    wx, wy, ww, wh = win
    sub = fg.bits[wy : wy + wh, wx : wx + ww]
    total = sub.sum()
    if total > 0:  # evidence centroid inside the converged window
        ex = float((sub.sum(axis=0) * np.arange(wx, wx + ww)).sum() / total)
        ey = float((sub.sum(axis=1) * np.arange(wy, wy + wh)).sum() / total)
    else:
        ex = wx + (ww - 1) / 2.0
        ey = wy + (wh - 1) / 2.0
    est_bbox, est_centroid = win, (ex, ey)

    if components is None:
        components = connected_components(fg.bits)
    largest = max(range(components.count), key=lambda i: components.stats[i].area)
    comp = components.stats[largest]
    if _rect_iou(est_bbox, comp.bbox) > iou_gate:
        centroid = (
            (est_centroid[0] + comp.centroid[0]) / 2.0,
            (est_centroid[1] + comp.centroid[1]) / 2.0,
        )
        bbox = comp.bbox
        area = comp.area
    else:
        centroid = est_centroid
        bbox = est_bbox
        area = comp.area

    counts = np.bincount(
        masked_plane[bbox[1] : bbox[1] + bbox[3], bbox[0] : bbox[0] + bbox[2]].ravel(),
        minlength=N_BINS + 1,
    )[:N_BINS]
    total = counts.sum()
    conf = float((np.sqrt(counts / total) * sqrt_ref).sum()) if total else 0.0

    out = PersonBlob(
        bbox=bbox,
        centroid=centroid,
        area=area,
        ref_hist=prev.ref_hist,
        confidence=conf,
        velocity=(centroid[0] - prev.centroid[0], centroid[1] - prev.centroid[1]),
    )
    return out, particles


def torso_from_person(person):
    """Torso disc at the person centroid, radius = half the blob width."""
    w = person.bbox[2]
    if w < 2:
        raise ValueError(f"person blob width {w} is too narrow for a torso disc")
    return TorsoDisc(center=person.centroid, radius=w / 2.0)
