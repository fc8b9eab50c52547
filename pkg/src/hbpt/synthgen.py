"""Deterministic synthetic scenarios: color frames, depth rasters and ground
truth for an articulated stick figure over a textured static background.

Every scenario is reproducible bit for bit from (name, params, seed). The
figure is drawn from rectangles plus a disc head, with chrominance picked so
person, box and background land in distinct UV histogram bins. Ground-truth
part centroids come from partitioning the clean, noise-free mask with the
true centroid and width, so end-to-end tests measure tracking quality rather
than rendering details.
"""

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .bodyparts import PART_LABELS, partition_regions
from .imageio import DepthRaster, Frame, rgb_to_yuv_image, write_pgm16, write_ppm
from .tracker import TorsoDisc

SCENARIO_NAMES = (
    "background",
    "walker",
    "starfish",
    "occluded_arm",
    "approach_box",
    "open_box",
    "carry_box",
    "null_walk",
)

_DEFAULT_FRAMES = {
    "background": 130,
    "walker": 300,
    "starfish": 60,
    "occluded_arm": 210,
    "approach_box": 140,
    "open_box": 170,
    "carry_box": 160,
    "null_walk": 150,
}

# palette (RGB); chosen for well-separated UV bins
BG_BASE = (120, 130, 115)
SHIRT = (200, 40, 40)
PANTS = (40, 60, 190)
SKIN = (230, 180, 140)
BOX_A = (220, 200, 40)
BOX_B = (190, 170, 30)
BOX_OPEN_A = (150, 40, 180)
BOX_OPEN_B = (120, 30, 150)

BG_DEPTH_MM = 4000
PERSON_DEPTH_MM = 2000
BOX_DEPTH_MM = 2000

BOX_RECT = (230, 112, 24, 20)
BOX_REF_FRAME = 35

# figure primitives in local coordinates (origin at top-center of the head)
_HEAD = ("disc", 0, 7, 7)
_TORSO = ("rect", -15, 14, 15, 69)
_ARM_L_DOWN = ("rect", -21, 16, -15, 51)
_ARM_R_DOWN = ("rect", 15, 16, 21, 51)
_ARM_L_EXT = ("rect", -45, 18, -15, 26)
_ARM_R_EXT = ("rect", 15, 18, 45, 26)
_LEG_L = ("rect", -13, 69, -3, 114)
_LEG_R = ("rect", 3, 69, 13, 114)

_POSES = {
    "down": {"armL": _ARM_L_DOWN, "armR": _ARM_R_DOWN},
    "star": {"armL": _ARM_L_EXT, "armR": _ARM_R_EXT},
    "reach": {"armL": _ARM_L_DOWN, "armR": _ARM_R_EXT},
    "reach_hidden": {"armL": _ARM_L_DOWN, "armR": None},
}


@dataclass
class Scenario:
    name: str
    width: int = 320
    height: int = 240
    frames: int | None = None
    seed: int = 7
    noise_sigma: float = 2.0
    learn_frames: int = 30
    walk_speed: int = 3

    def __post_init__(self):
        if self.name not in SCENARIO_NAMES:
            raise ValueError(f"unknown scenario {self.name!r}")
        if self.frames is None:
            self.frames = _DEFAULT_FRAMES[self.name]
        if self.width < 120 or self.height < 160 or self.frames < 2:
            raise ValueError("scenario dimensions or frame count too small")


def _ping_pong(start, lo, hi, step, t):
    """Position after t steps bouncing between lo and hi."""
    span = hi - lo
    x = (start - lo + step * t) % (2 * span)
    return lo + (x if x <= span else 2 * span - x)


def _person_script(sc, f):
    """Scripted figure placement for frame f, or None when absent."""
    if sc.name == "background" or f < sc.learn_frames:
        return None
    t = f - sc.learn_frames
    if sc.name == "walker":
        return {"ox": _ping_pong(40, 40, 230, sc.walk_speed, t), "oy": 100, "pose": "down"}
    if sc.name == "starfish":
        return {"ox": 160, "oy": 70, "pose": "star"}
    if sc.name == "occluded_arm":
        hidden = 100 <= f < 150
        return {"ox": 140, "oy": 100, "pose": "reach_hidden" if hidden else "reach"}
    if sc.name in ("approach_box", "open_box", "carry_box"):
        ox = min(60 + sc.walk_speed * t, 177)
        if sc.name == "carry_box" and f >= 100:
            ox = max(177 - sc.walk_speed * (f - 100), 87)
        return {"ox": ox, "oy": 100, "pose": "reach"}
    if sc.name == "null_walk":
        return {"ox": _ping_pong(40, 40, 150, sc.walk_speed, t), "oy": 100, "pose": "reach"}
    return None


def _box_script(sc, f):
    """Current box rectangle and appearance, or None when absent."""
    if sc.name not in ("approach_box", "open_box", "carry_box", "null_walk"):
        return None
    if f < sc.learn_frames:
        return None
    x, y, w, h = BOX_RECT
    opened = sc.name == "open_box" and f >= 100
    if sc.name == "carry_box" and f >= 100:
        x = max(BOX_RECT[0] - sc.walk_speed * (f - 100), BOX_RECT[0] - 90)
    return {"rect": (x, y, w, h), "opened": opened}


def _part_primitives(pose):
    prims = {"head": _HEAD, "torso": _TORSO, "legL": _LEG_L, "legR": _LEG_R}
    prims["armL"] = _POSES[pose]["armL"]
    prims["armR"] = _POSES[pose]["armR"]
    return prims


def _stamp(mask_or_img, prim, ox, oy, value):
    kind = prim[0]
    if kind == "rect":
        _, x0, y0, x1, y1 = prim
        sl = np.s_[oy + y0 : oy + y1, ox + x0 : ox + x1]
        mask_or_img[sl] = value
    else:
        _, cx, cy, r = prim
        ys, xs = np.mgrid[-r : r + 1, -r : r + 1]
        disc = xs * xs + ys * ys <= r * r
        sl = np.s_[oy + cy - r : oy + cy + r + 1, ox + cx - r : ox + cx + r + 1]
        region = mask_or_img[sl]
        region[disc] = value
        mask_or_img[sl] = region


def render_person_mask(mask, ox, oy, pose):
    """Stamp the clean figure silhouette for a pose into a boolean mask."""
    for prim in _part_primitives(pose).values():
        if prim is not None:
            _stamp(mask, prim, ox, oy, True)
    return mask


def _render_person(rgb, mask, script):
    ox, oy, pose = script["ox"], script["oy"], script["pose"]
    prims = _part_primitives(pose)
    colors = {
        "legL": PANTS,
        "legR": PANTS,
        "torso": SHIRT,
        "armL": SHIRT,
        "armR": SHIRT,
        "head": SKIN,
    }
    for part in ("legL", "legR", "torso", "armL", "armR", "head"):
        prim = prims[part]
        if prim is None:
            continue
        _stamp(rgb, prim, ox, oy, colors[part])
        _stamp(mask, prim, ox, oy, True)


def _render_box(rgb, box):
    x, y, w, h = box["rect"]
    pal = (BOX_OPEN_A, BOX_OPEN_B) if box["opened"] else (BOX_A, BOX_B)
    ys, xs = np.mgrid[0:h, 0:w]
    checker = ((xs // 3) + (ys // 3)) % 2
    tile = np.where(checker[..., None] == 0, pal[0], pal[1])
    rgb[y : y + h, x : x + w] = tile


def _hand_tip(script):
    prim = _part_primitives(script["pose"])["armR"]
    if prim is None or prim is _ARM_R_DOWN:
        return None
    _, x0, y0, x1, y1 = prim
    return (script["ox"] + x1 - 1, script["oy"] + (y0 + y1) // 2)


def _truth_for_frame(sc, f, mask, script, box):
    entry = {"frame": f, "person_visible": script is not None}
    if box is not None:
        entry["box_rect"] = list(box["rect"])
        entry["box_opened"] = box["opened"]
    if script is None:
        return entry
    ys, xs = np.nonzero(mask)
    cx, cy = float(xs.mean()), float(ys.mean())
    bbox = (
        int(xs.min()),
        int(ys.min()),
        int(xs.max() - xs.min() + 1),
        int(ys.max() - ys.min() + 1),
    )
    entry["person_centroid"] = [cx, cy]
    entry["person_x"] = script["ox"]
    entry["bbox"] = list(bbox)
    tr = _TORSO
    entry["torso_rect"] = [
        script["ox"] + tr[1],
        script["oy"] + tr[2],
        tr[3] - tr[1],
        tr[4] - tr[2],
    ]
    hand = _hand_tip(script)
    entry["hand"] = list(hand) if hand else None
    disc = TorsoDisc(center=(cx, cy), radius=bbox[2] / 2.0)
    partition = partition_regions(mask, disc, bbox)
    parts = {}
    for label in PART_LABELS:
        region = partition.masks[label]
        area = int(region.sum())
        if area >= 15:
            rys, rxs = np.nonzero(region)
            parts[label] = {
                "centroid": [float(rxs.mean()), float(rys.mean())],
                "area": area,
                "visible": True,
            }
        else:
            parts[label] = {"centroid": None, "area": area, "visible": False}
    entry["parts"] = parts
    return entry


def _scripted_events(sc):
    if sc.name == "approach_box":
        return [{"kind": "Approach", "frame_index": 62}]
    if sc.name == "open_box":
        return [{"kind": "Approach", "frame_index": 62}, {"kind": "Open", "frame_index": 100}]
    if sc.name == "carry_box":
        return [{"kind": "Approach", "frame_index": 62}, {"kind": "Carry", "frame_index": 100}]
    return []


def generate_scenario(scenario):
    """Render all frames, depth rasters and ground truth for a scenario.

    Returns (frames, depths, truth); depths is None for scenarios without a
    box. The same (name, params, seed) always produces identical output.
    """
    sc = scenario if isinstance(scenario, Scenario) else Scenario(name=str(scenario))
    w, h = sc.width, sc.height
    rng = np.random.default_rng(sc.seed)
    blocks = rng.integers(-12, 13, size=(h // 8 + 1, w // 8 + 1, 3))
    texture = np.repeat(np.repeat(blocks, 8, axis=0), 8, axis=1)[:h, :w]
    background = np.clip(np.array(BG_BASE) + texture, 0, 255).astype(np.float64)

    with_depth = sc.name in ("approach_box", "open_box", "carry_box", "null_walk")
    frames, depths, per_frame = [], [] if with_depth else None, []
    for f in range(sc.frames):
        rgb = background.copy()
        mask = np.zeros((h, w), dtype=bool)
        box = _box_script(sc, f)
        if box is not None:
            _render_box(rgb, box)
        script = _person_script(sc, f)
        if script is not None:
            _render_person(rgb, mask, script)
        noisy = rgb + rng.normal(0.0, sc.noise_sigma, size=rgb.shape)
        out = np.clip(np.rint(noisy), 0, 255).astype(np.uint8)
        frames.append(
            Frame(index=f, width=w, height=h, yuv=rgb_to_yuv_image(out), rgb=out)
        )
        if with_depth:
            z = np.full((h, w), BG_DEPTH_MM, dtype=np.int32)
            if box is not None:
                bx, by, bw, bh = box["rect"]
                z[by : by + bh, bx : bx + bw] = BOX_DEPTH_MM
            if script is not None:
                z[mask] = PERSON_DEPTH_MM
            depths.append(DepthRaster(width=w, height=h, z=z))
        per_frame.append(_truth_for_frame(sc, f, mask, script, box))

    truth = {
        "scenario": sc.name,
        "width": w,
        "height": h,
        "frames": sc.frames,
        "seed": sc.seed,
        "noise_sigma": sc.noise_sigma,
        "learn_frames": sc.learn_frames,
        "box": {"rect": list(BOX_RECT), "ref_frame": BOX_REF_FRAME} if with_depth else None,
        "events": _scripted_events(sc),
        "per_frame": per_frame,
    }
    return frames, depths, truth


def write_scenario(scenario, outdir):
    """Generate and write frame_%06d.ppm, depth_%06d.pgm and truth.json."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    frames, depths, truth = generate_scenario(scenario)
    for f in frames:
        write_ppm(outdir / f"frame_{f.index:06d}.ppm", f.rgb)
    if depths is not None:
        for i, d in enumerate(depths):
            write_pgm16(outdir / f"depth_{i:06d}.pgm", d.z)
    with open(outdir / "truth.json", "w") as fh:
        json.dump(truth, fh)
    return truth
