import numpy as np
import pytest

from hbpt import bodyparts as bp
from hbpt.synthgen import render_person_mask
from hbpt.tracker import TorsoDisc

from conftest import frame_from_rgb


def person_mask(pose, ox=160, oy=60, shape=(240, 320)):
    return render_person_mask(np.zeros(shape, dtype=bool), ox, oy, pose)


def shoulder_disc(mask):
    """Disc centered at the silhouette centroid reaching the shoulder band."""
    ys, xs = np.nonzero(mask)
    cy = ys.mean()
    top = ys.min()
    return TorsoDisc(center=(xs.mean(), cy), radius=(cy - top) * 0.75)


def flat_frame_like(mask):
    rgb = np.zeros(mask.shape + (3,), np.uint8)
    rgb[mask] = (180, 60, 60)
    return frame_from_rgb(rgb)


def test_partition_rejects_empty():
    with pytest.raises(ValueError, match="empty"):
        bp.partition_regions(np.zeros((10, 10), bool), TorsoDisc((5, 5), 2.0))


def test_starfish_all_regions_nonempty_and_disjoint():
    mask = person_mask("star")
    partition = bp.partition_regions(mask, shoulder_disc(mask))
    total = np.zeros_like(mask)
    for label in bp.PART_LABELS:
        region = partition.masks[label]
        assert region.sum() >= 15, label
        assert not (total & region).any(), label  # pairwise disjoint
        total |= region
    assert (total <= mask).all()  # union within silhouette


def test_leg_grid_boundaries():
    mask = person_mask("down")
    disc = shoulder_disc(mask)
    partition = bp.partition_regions(mask, disc)
    cx, cy = disc.center
    r = disc.radius
    ys, xs = np.nonzero(mask)
    bottom = ys.max()
    mid = (cy + r + bottom) / 2.0
    for label, want_left, want_upper in (
        ("leg1", True, True),
        ("leg2", False, True),
        ("leg3", True, False),
        ("leg4", False, False),
    ):
        rys, rxs = np.nonzero(partition.masks[label])
        assert rys.size
        assert ((rxs < cx) == want_left).all(), label
        assert ((rys <= mid) == want_upper).all(), label
        assert (rys > cy + r).all(), label


def test_build_part_model_starfish_eight_blobs():
    mask = person_mask("star")
    frame = flat_frame_like(mask)
    partition = bp.partition_regions(mask, shoulder_disc(mask))
    model = bp.build_part_model(partition, frame)
    assert sorted(model.blobs) == sorted(bp.PART_LABELS)
    assert len(model.blobs) == 8


def test_build_part_model_arm_deletion_and_recreation():
    frame = flat_frame_like(person_mask("reach"))
    disc = shoulder_disc(person_mask("reach"))
    present = bp.build_part_model(
        bp.partition_regions(person_mask("reach"), disc), frame
    )
    assert "armR" in present.blobs
    hidden = bp.build_part_model(
        bp.partition_regions(person_mask("reach_hidden"), disc), frame, prev=present
    )
    assert "armR" not in hidden.blobs
    back = bp.build_part_model(
        bp.partition_regions(person_mask("reach"), disc), frame, prev=hidden
    )
    assert "armR" in back.blobs


def test_central_only_pixels_give_torso_alone():
    mask = np.zeros((60, 60), bool)
    mask[25:36, 25:36] = True
    disc = TorsoDisc(center=(30.0, 30.0), radius=10.0)
    partition = bp.partition_regions(mask, disc)
    model = bp.build_part_model(partition, flat_frame_like(mask))
    assert list(model.blobs) == ["torso"]


def test_blobs_meet_min_area_and_live_in_disc():
    mask = person_mask("star")
    disc = shoulder_disc(mask)
    model = bp.build_part_model(
        bp.partition_regions(mask, disc), flat_frame_like(mask), min_part_area=15
    )
    for label, blob in model.blobs.items():
        assert blob.area >= 15
    torso = model.blobs["torso"]
    dx = torso.mu[0] - disc.center[0]
    dy = torso.mu[1] - disc.center[1]
    assert dx * dx + dy * dy <= disc.radius**2


def test_detect_starfish_true_on_star_pose():
    mask = person_mask("star")
    disc = shoulder_disc(mask)
    model = bp.build_part_model(bp.partition_regions(mask, disc), flat_frame_like(mask))
    assert bp.detect_starfish(model, disc)


def test_detect_starfish_false_with_arms_down():
    mask = person_mask("down")
    disc = shoulder_disc(mask)
    model = bp.build_part_model(bp.partition_regions(mask, disc), flat_frame_like(mask))
    assert not bp.detect_starfish(model, disc)


def test_detect_starfish_false_without_head():
    mask = person_mask("star")
    disc = shoulder_disc(mask)
    model = bp.build_part_model(bp.partition_regions(mask, disc), flat_frame_like(mask))
    model.blobs.pop("head")
    assert not bp.detect_starfish(model, disc)
