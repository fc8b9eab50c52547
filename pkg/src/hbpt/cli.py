"""Command line front end: synth, learn, track, baseline and eval.

``track`` wires the full pipeline: scene learning, foreground detection and
refinement, person tracking, torso-relative part modeling, scene adaptation
and activity recognition, writing blobs.jsonl, events.json and metrics.json.
"""

import argparse
import json
import math
import sys
import time
from collections import defaultdict
from pathlib import Path

import numpy as np

from . import activity as act
from . import baseline as bl
from . import bodyparts as bp
from . import imageio as iio
from . import maskops as mo
from . import scene as sm
from . import synthgen as sg
from . import tracker as tr
from .blobmodel import blob_ellipse
from .config import PipelineConfig, load_config
from .scene import ForegroundMask


def _load_depths(directory, n_frames):
    paths = sorted(Path(directory).glob("depth_*.pgm"))
    if not paths:
        return None
    depths = [iio.load_depth_raster(p) for p in paths]
    if len(depths) != n_frames:
        raise ValueError(
            f"{len(depths)} depth rasters for {n_frames} frames in {directory}"
        )
    return depths


def _overlays_for_frame(person, disc, model, monitor):
    items = []
    if person is not None:
        items.append(
            iio.OverlayItem("rectangle", tuple(person.bbox), label="P", color=(0, 200, 255))
        )
    if disc is not None:
        items.append(
            iio.OverlayItem(
                "ellipse", (disc.center, (disc.radius, disc.radius), 0.0), color=(255, 255, 0)
            )
        )
    if model is not None:
        for label, blob in model.blobs.items():
            center, axes, angle = blob_ellipse(blob)
            items.append(iio.OverlayItem("ellipse", (center, axes, angle), label=label))
    if monitor is not None and monitor.box is not None:
        items.append(iio.OverlayItem("rectangle", monitor.box.rect, color=(255, 220, 0)))
        items.append(
            iio.OverlayItem("rectangle", monitor.box.tracked_rect, color=(255, 60, 60))
        )
    return items


def _part_record(model):
    return {label: blob.to_dict() for label, blob in model.blobs.items()}


def _label_silhouette(sil):
    """Contour-vertex part labels for one silhouette mask, or None."""
    centroid, _, _ = bl.silhouette_geometry(sil)
    contour = next(c for c in mo.extract_contours(sil) if c.level == "outer")
    if len(contour.points) < 3:
        return None
    vertices = bl.hull_vertices(contour)
    return bl.label_parts_by_distance(vertices, centroid, sil).to_dict()


def run_pipeline(cfg):
    """Run the full tracking pipeline; returns the path of the output dir."""
    outdir = Path(cfg.output)
    outdir.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    frames = iio.load_frame_sequence(cfg.input, cfg.pattern)
    n = len(frames)
    depths = _load_depths(cfg.input, n) if cfg.use_depth else None
    frame_area = frames[0].width * frames[0].height
    refine_min_area = max(1, int(round(cfg.mask_min_area_frac * frame_area)))
    person_min_area = max(1, int(round(cfg.person_min_area_frac * frame_area)))

    stage_ms = defaultdict(float)

    def timed(stage, fn, *args, **kwargs):
        t = time.perf_counter()
        out = fn(*args, **kwargs)
        stage_ms[stage] += (time.perf_counter() - t) * 1e3
        return out

    if cfg.scene_file:
        model = sm.load_scene(cfg.scene_file)
    else:
        model = timed(
            "learn", sm.learn_scene, frames[: min(cfg.learn_frames, n)], cfg.var_floor
        )

    monitor = act.ActivityMonitor(
        box_rect=cfg.box_rect or None,
        ref_frame=cfg.box_ref_frame,
        d_xy=cfg.d_xy,
        z_gate=cfg.z_gate_mm,
        approach_frames=cfg.approach_frames,
        theta_open=cfg.theta_open,
        open_frames=cfg.open_frames,
        carry_frames=cfg.carry_frames,
        carry_min_disp=cfg.carry_min_disp,
        carry_z_rate=cfg.carry_z_rate_mm,
    )

    person = None
    particles = None
    part_model = None
    se = (cfg.mask_se, cfg.mask_se)
    records = []
    baseline_records = []

    for fi, frame in enumerate(frames):
        depth = depths[fi] if depths is not None else None
        fg = timed("foreground", sm.detect_foreground, model, frame, cfg.tau)
        refined = timed(
            "refine", mo.refine_mask, fg.bits, refine_min_area, se, cfg.mask_iterations
        )
        comps = timed("components", mo.connected_components, refined)
        refined_mask = ForegroundMask(frame.width, frame.height, refined)

        t = time.perf_counter()
        if person is None:
            person = tr.detect_person(comps, frame, person_min_area)
            if person is not None:
                particles = tr.init_particles(person, cfg.particles_n, cfg.seed)
        else:
            person, particles = tr.mspf_track(
                person,
                particles,
                frame,
                refined_mask,
                sigma_xy=cfg.sigma_xy,
                sigma_scale=cfg.sigma_scale,
                iou_gate=cfg.iou_gate,
                components=comps if comps.count else None,
            )
        stage_ms["track"] += (time.perf_counter() - t) * 1e3

        disc = None
        silhouette = None
        t = time.perf_counter()
        if person is not None and comps.count:
            largest = max(range(comps.count), key=lambda i: comps.stats[i].area)
            silhouette = comps.labels == largest + 1
            if person.bbox[2] >= 2:
                disc = tr.torso_from_person(person)
        if disc is not None and silhouette is not None and silhouette.any():
            partition = bp.partition_regions(
                silhouette, disc, comps.stats[largest].bbox
            )
            part_model = bp.build_part_model(
                partition, frame, part_model, cfg.min_part_area, frame_index=fi
            )
        else:
            part_model = None
        stage_ms["parts"] += (time.perf_counter() - t) * 1e3

        t = time.perf_counter()
        if person is not None and silhouette is not None:
            update_mask = ForegroundMask(frame.width, frame.height, silhouette)
        else:
            update_mask = refined_mask
        sm.update_scene(model, frame, update_mask, cfg.alpha)
        stage_ms["scene_update"] += (time.perf_counter() - t) * 1e3

        t = time.perf_counter()
        monitor.process(fi, frame, part_model, depth)
        stage_ms["activity"] += (time.perf_counter() - t) * 1e3

        starfish = (
            bp.detect_starfish(part_model, disc)
            if part_model is not None and disc is not None
            else False
        )
        rec = {
            "frame": fi,
            "tracked": person is not None,
            "person": None
            if person is None
            else {
                "bbox": [int(v) for v in person.bbox],
                "centroid": [float(person.centroid[0]), float(person.centroid[1])],
                "area": int(person.area),
                "confidence": float(person.confidence),
            },
            "torso_disc": None
            if disc is None
            else {
                "center": [float(disc.center[0]), float(disc.center[1])],
                "radius": float(disc.radius),
            },
            "parts": {} if part_model is None else _part_record(part_model),
            "starfish": bool(starfish),
        }
        records.append(rec)

        if cfg.baseline_mode:
            labels = (
                _label_silhouette(silhouette)
                if silhouette is not None and silhouette.any()
                else None
            )
            baseline_records.append({"frame": fi, "labels": labels})

        if cfg.emit_overlays:
            t = time.perf_counter()
            items = _overlays_for_frame(person, disc, part_model, monitor)
            iio.write_annotated_frame(frame, items, outdir / f"out_{fi:06d}.ppm")
            stage_ms["overlays"] += (time.perf_counter() - t) * 1e3

    wall = time.perf_counter() - t0
    with open(outdir / "blobs.jsonl", "w") as fh:
        for rec in records:
            fh.write(json.dumps(rec, separators=(",", ":")) + "\n")
    if cfg.baseline_mode:
        with open(outdir / "baseline.jsonl", "w") as fh:
            for rec in baseline_records:
                fh.write(json.dumps(rec, separators=(",", ":")) + "\n")
    with open(outdir / "events.json", "w") as fh:
        json.dump([e.to_dict() for e in monitor.events], fh, indent=1)
    metrics = {
        "frames": n,
        "wall_time_s": wall,
        "fps": n / wall,
        "stage_ms": {k: v / n for k, v in sorted(stage_ms.items())},
    }
    with open(outdir / "metrics.json", "w") as fh:
        json.dump(metrics, fh, indent=1)
    return outdir


# ---------------------------------------------------------------------------
# baseline labeler

def run_baseline(cfg):
    outdir = Path(cfg.output)
    outdir.mkdir(parents=True, exist_ok=True)
    frames = iio.load_frame_sequence(cfg.input, cfg.pattern)
    frame_area = frames[0].width * frames[0].height
    refine_min_area = max(1, int(round(cfg.mask_min_area_frac * frame_area)))
    model = sm.learn_scene(frames[: min(cfg.learn_frames, len(frames))], cfg.var_floor)
    out_path = outdir / "baseline.jsonl"
    with open(out_path, "w") as fh:
        for fi, frame in enumerate(frames):
            fg = sm.detect_foreground(model, frame, cfg.tau)
            refined = mo.refine_mask(fg.bits, refine_min_area)
            entry = {"frame": fi, "labels": None}
            comps = mo.connected_components(refined)
            if comps.count:
                largest = max(range(comps.count), key=lambda i: comps.stats[i].area)
                entry["labels"] = _label_silhouette(comps.labels == largest + 1)
            fh.write(json.dumps(entry, separators=(",", ":")) + "\n")
            sm.update_scene(model, frame, fg, cfg.alpha)
    return out_path


# ---------------------------------------------------------------------------
# evaluation against ground truth

def _read_jsonl(path):
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]


def evaluate(output_dir, truth_path):
    """Compare pipeline outputs with scenario ground truth."""
    output_dir = Path(output_dir)
    with open(truth_path) as fh:
        truth = json.load(fh)
    records = _read_jsonl(output_dir / "blobs.jsonl")
    with open(output_dir / "events.json") as fh:
        events = json.load(fh)
    by_frame = {r["frame"]: r for r in records}

    sq_err, n_err = 0.0, 0
    torso_in_rect, torso_frames = 0, 0
    part_hits = defaultdict(int)
    part_totals = defaultdict(int)
    arm_match, arm_total = 0, 0
    part_checks = ("head", "torso", "leg1", "leg2", "leg3", "leg4")

    for entry in truth["per_frame"]:
        if not entry.get("person_visible"):
            continue
        rec = by_frame.get(entry["frame"])
        if rec is None:
            continue
        tw = entry["torso_rect"][2] if entry.get("torso_rect") else 30
        tol = 0.15 * tw
        if rec.get("tracked") and rec.get("person"):
            gx, gy = entry["person_centroid"]
            px, py = rec["person"]["centroid"]
            sq_err += (px - gx) ** 2 + (py - gy) ** 2
            n_err += 1
        if rec.get("torso_disc") and entry.get("torso_rect"):
            cx, cy = rec["torso_disc"]["center"]
            x, y, w, h = entry["torso_rect"]
            torso_frames += 1
            if x <= cx <= x + w - 1 and y <= cy <= y + h - 1:
                torso_in_rect += 1
        parts = rec.get("parts", {})
        for label in part_checks:
            gt = entry.get("parts", {}).get(label)
            if not gt or not gt.get("visible"):
                continue
            part_totals[label] += 1
            blob = parts.get(label)
            if blob:
                bx, by = blob["mu"]
                gx, gy = gt["centroid"]
                if math.hypot(bx - gx, by - gy) <= tol:
                    part_hits[label] += 1
        gt_arm = entry.get("parts", {}).get("armR")
        if gt_arm is not None:
            arm_total += 1
            if (gt_arm["visible"]) == ("armR" in parts):
                arm_match += 1

    event_matches = []
    for gt_ev in truth.get("events", []):
        found = [
            e
            for e in events
            if e["kind"] == gt_ev["kind"]
            and abs(e["frame_index"] - gt_ev["frame_index"]) <= 5
        ]
        event_matches.append(
            {
                "kind": gt_ev["kind"],
                "scripted_frame": gt_ev["frame_index"],
                "fired_frame": found[0]["frame_index"] if found else None,
                "matched": bool(found),
            }
        )
    approach_frames = [e["frame_index"] for e in events if e["kind"] == "Approach"]
    gate_ok = all(
        e["kind"] == "Approach"
        or (approach_frames and e["frame_index"] >= min(approach_frames))
        for e in events
    )

    summary = {
        "scenario": truth.get("scenario"),
        "frames_compared": n_err,
        "centroid_rms_px": math.sqrt(sq_err / n_err) if n_err else None,
        "torso_center_in_rect": torso_in_rect / torso_frames if torso_frames else None,
        "part_agreement": {
            label: (part_hits[label] / part_totals[label])
            for label in part_checks
            if part_totals[label]
        },
        "armR_presence_accuracy": arm_match / arm_total if arm_total else None,
        "events_fired": len(events),
        "event_matches": event_matches,
        "extra_events": len(events) - sum(m["matched"] for m in event_matches),
        "state_gate_ok": gate_ok,
    }
    with open(output_dir / "eval.json", "w") as fh:
        json.dump(summary, fh, indent=1)
    return summary


# ---------------------------------------------------------------------------
# argument parsing

def _add_common(p):
    p.add_argument("--config", help="flat key=value config file")
    p.add_argument("--input", help="input frame directory")
    p.add_argument("--output", help="output directory")
    p.add_argument("--seed", type=int, help="random seed")
    p.add_argument("--overlays", action="store_true", help="write annotated frames")


def _build_config(args):
    cfg = PipelineConfig()
    if getattr(args, "config", None):
        cfg = load_config(args.config, base=cfg)
    if getattr(args, "input", None):
        cfg.input = args.input
    if getattr(args, "output", None):
        cfg.output = args.output
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if getattr(args, "overlays", False):
        cfg.emit_overlays = True
    return cfg


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="hbpt",
        description="Body-parts tracking pipeline over recorded frame sequences",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_synth = sub.add_parser("synth", help="generate a synthetic scenario")
    _add_common(p_synth)
    p_synth.add_argument("--scenario", required=True, choices=sg.SCENARIO_NAMES)
    p_synth.add_argument("--frames", type=int, help="frame count override")
    p_synth.add_argument("--width", type=int, default=320)
    p_synth.add_argument("--height", type=int, default=240)

    p_learn = sub.add_parser("learn", help="learn and persist a scene model")
    _add_common(p_learn)
    p_learn.add_argument("--scene-out", default="scene.bin", help="scene file name")

    p_track = sub.add_parser("track", help="run the full tracking pipeline")
    _add_common(p_track)

    p_base = sub.add_parser("baseline", help="contour-vertex part labeler")
    _add_common(p_base)

    p_eval = sub.add_parser("eval", help="compare outputs against truth.json")
    _add_common(p_eval)
    p_eval.add_argument("--truth", required=True, help="path to truth.json")

    args = parser.parse_args(argv)
    try:
        if args.command == "synth":
            sc = sg.Scenario(
                name=args.scenario,
                width=args.width,
                height=args.height,
                frames=args.frames,
                seed=args.seed if args.seed is not None else 7,
            )
            truth = sg.write_scenario(sc, args.output or ".")
            print(f"wrote {truth['frames']} frames of {sc.name} to {args.output or '.'}")
        elif args.command == "learn":
            cfg = _build_config(args)
            frames = iio.load_frame_sequence(cfg.input, cfg.pattern)
            model = sm.learn_scene(
                frames[: min(cfg.learn_frames, len(frames))], cfg.var_floor
            )
            out = Path(cfg.output or ".")
            out.mkdir(parents=True, exist_ok=True)
            sm.save_scene(model, out / args.scene_out)
            print(f"learned scene from {model.frames_seen} frames -> {out / args.scene_out}")
        elif args.command == "track":
            cfg = _build_config(args)
            outdir = run_pipeline(cfg)
            with open(outdir / "metrics.json") as fh:
                metrics = json.load(fh)
            print(
                f"tracked {metrics['frames']} frames at {metrics['fps']:.1f} fps -> {outdir}"
            )
        elif args.command == "baseline":
            cfg = _build_config(args)
            out_path = run_baseline(cfg)
            print(f"baseline labels -> {out_path}")
        elif args.command == "eval":
            cfg = _build_config(args)
            summary = evaluate(cfg.output, args.truth)
            for key in (
                "scenario",
                "centroid_rms_px",
                "torso_center_in_rect",
                "armR_presence_accuracy",
                "events_fired",
                "state_gate_ok",
            ):
                print(f"{key}: {summary[key]}")
            for m in summary["event_matches"]:
                print(
                    f"event {m['kind']}: scripted {m['scripted_frame']}, "
                    f"fired {m['fired_frame']}, matched {m['matched']}"
                )
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
