"""Torso-relative partitioning of the silhouette and the per-frame body model.

The torso disc splits the silhouette into a central region, a head band above
it, arm bands at its sides, and a legs region below it that is divided into a
2x2 grid. Each populated region contributes one Gaussian blob, capped at
eight blobs per frame; emptied regions lose their blob and regain a fresh one
when pixels return.
"""

from dataclasses import dataclass, field

import numpy as np

from .blobmodel import GaussianBlob, fit_blob
from .maskops import connected_components, fill_holes

PART_LABELS = ("head", "torso", "armL", "armR", "leg1", "leg2", "leg3", "leg4")
DEFAULT_MIN_PART_AREA = 15


@dataclass
class RegionPartition:
    masks: dict  # label -> (h, w) bool, pairwise disjoint, within silhouette
    bbox: tuple  # silhouette bounding box (x, y, w, h)


@dataclass
class BodyPartModel:
    blobs: dict  # label -> GaussianBlob, at most 8
    frame_index: int = 0
    part_pixels: dict = field(default_factory=dict)  # label -> (n, 2) int array

    @property
    def torso(self):
        return self.blobs.get("torso")


def partition_regions(silhouette, torso, bbox=None):
    """Split the silhouette into the 8 torso-relative part regions.

    central: inside the disc. head: above the disc top, within the disc's
    x-extent. armL/armR: beyond the disc sides, between disc top and bottom.
    legs: below the disc bottom within the disc's x-extent down to the
    bounding-box bottom, split into a 2x2 grid at the disc center x and the
    vertical midpoint.
    """
    sil = silhouette.bits if hasattr(silhouette, "bits") else np.asarray(silhouette)
    sil = sil.astype(bool)
    if not sil.any():
        raise ValueError("cannot partition an empty silhouette")
    if bbox is None:
        ys, xs = np.nonzero(sil)
        bbox = (
            int(xs.min()),
            int(ys.min()),
            int(xs.max() - xs.min() + 1),
            int(ys.max() - ys.min() + 1),
        )
    h, w = sil.shape
    cx, cy = torso.center
    r = torso.radius
    xs = np.arange(w)[None, :]
    ys = np.arange(h)[:, None]
    inside_disc = (xs - cx) ** 2 + (ys - cy) ** 2 <= r * r
    above = ys < cy - r
    below = ys > cy + r
    band_y = ~above & ~below
    in_x = np.abs(xs - cx) <= r
    left = (xs - cx) < -r
    right = (xs - cx) > r
    bbox_bottom = bbox[1] + bbox[3] - 1
    legs_mid = (cy + r + bbox_bottom) / 2.0

    masks = {
        "torso": sil & inside_disc,
        "head": sil & above & in_x,
        "armL": sil & band_y & left,
        "armR": sil & band_y & right,
        "leg1": sil & below & in_x & (xs < cx) & (ys <= legs_mid),
        "leg2": sil & below & in_x & (xs >= cx) & (ys <= legs_mid),
        "leg3": sil & below & in_x & (xs < cx) & (ys > legs_mid),
        "leg4": sil & below & in_x & (xs >= cx) & (ys > legs_mid),
    }
    for label in masks:
        masks[label] &= ys <= bbox_bottom
    return RegionPartition(masks=masks, bbox=bbox)


def _largest_filled_component(mask):
    """Pixels of the region's largest component with its holes filled."""
    comps = connected_components(mask)
    if comps.count == 0:
        return None
    best = max(range(comps.count), key=lambda i: comps.stats[i].area)
    x, y, w, h = comps.stats[best].bbox
    sub = fill_holes(comps.labels[y : y + h, x : x + w] == best + 1)
    sy, sx = np.nonzero(sub)
    return np.column_stack([sx + x, sy + y])


def build_part_model(
    partition, frame, prev=None, min_part_area=DEFAULT_MIN_PART_AREA, frame_index=None
):
    """Fit one blob per populated region; starved regions lose their blob.

    A region whose silhouette pixels fall below ``min_part_area`` contributes
    nothing this frame; when it refills, a fresh blob is fitted. The torso is
    refitted every frame from the central region.
    """
    blobs = {}
    part_pixels = {}
    for label in PART_LABELS:
        mask = partition.masks[label]
        if int(mask.sum()) < min_part_area:
            continue
        pixels = _largest_filled_component(mask)
        if pixels is None or pixels.shape[0] < min_part_area:
            continue
        blobs[label] = fit_blob(pixels, frame, label=label)
        part_pixels[label] = pixels
    if frame_index is None:
        frame_index = prev.frame_index + 1 if prev is not None else 0
    return BodyPartModel(blobs=blobs, frame_index=frame_index, part_pixels=part_pixels)


def detect_starfish(model, torso):
    """True for the frontal both-arms-extended pose.

    Requires head, armL and armR blobs, the head mean above the disc top, and
    each arm mean displaced laterally from the disc center by at least half a
    radius on its own side. (Arm regions already live beyond the disc sides,
    so the lateral test guards against degenerate slivers hugging the rim.)
    """
    head = model.blobs.get("head")
    arm_l = model.blobs.get("armL")
    arm_r = model.blobs.get("armR")
    if head is None or arm_l is None or arm_r is None:
        return False
    cx, cy = torso.center
    r = torso.radius
    if head.mu[1] >= cy - r:
        return False
    if arm_l.mu[0] > cx - 0.5 * r:
        return False
    if arm_r.mu[0] < cx + 0.5 * r:
        return False
    return True
