"""Flat key=value pipeline configuration with module-documented defaults.

Config files hold one ``key = value`` pair per line ('#' starts a comment).
Values may be numbers, true/false, quoted strings or [a, b, c] number lists.
Unknown keys are rejected. CLI flags override file values.
"""

from dataclasses import dataclass, field, fields


@dataclass
class PipelineConfig:
    input: str = ""
    output: str = ""
    pattern: str = "frame_*.ppm"
    seed: int = 0
    scene_file: str = ""
    learn_frames: int = 30
    var_floor: float = 4.0
    tau: float = 4.0
    alpha: float = 0.05
    mask_min_area_frac: float = 0.005
    mask_se: int = 3
    mask_iterations: int = 1
    person_min_area_frac: float = 0.01
    particles_n: int = 100
    sigma_xy: float = 5.0
    sigma_scale: float = 0.02
    iou_gate: float = 0.3
    min_part_area: int = 15
    d_xy: float = 30.0
    z_gate_mm: float = 300.0
    approach_frames: int = 3
    theta_open: float = 0.4
    open_frames: int = 5
    carry_frames: int = 5
    carry_min_disp: float = 1.0
    carry_z_rate_mm: float = 200.0
    box_rect: list = field(default_factory=list)  # [x, y, w, h]; empty = no box
    box_ref_frame: int = 0
    emit_overlays: bool = False
    use_depth: bool = True
    baseline_mode: bool = False  # also emit contour-vertex labels during track


_KEY_MAP = {
    "input": "input",
    "output": "output",
    "pattern": "pattern",
    "seed": "seed",
    "scene.file": "scene_file",
    "learn.frames": "learn_frames",
    "scene.var_floor": "var_floor",
    "scene.tau": "tau",
    "scene.alpha": "alpha",
    "mask.min_area_frac": "mask_min_area_frac",
    "mask.se": "mask_se",
    "mask.iterations": "mask_iterations",
    "person.min_area_frac": "person_min_area_frac",
    "particles.n": "particles_n",
    "particles.sigma_xy": "sigma_xy",
    "particles.sigma_scale": "sigma_scale",
    "particles.iou_gate": "iou_gate",
    "parts.min_area": "min_part_area",
    "activity.d_xy": "d_xy",
    "activity.z_gate_mm": "z_gate_mm",
    "activity.approach_frames": "approach_frames",
    "activity.theta_open": "theta_open",
    "activity.open_frames": "open_frames",
    "activity.carry_frames": "carry_frames",
    "activity.carry_min_disp": "carry_min_disp",
    "activity.carry_z_rate_mm": "carry_z_rate_mm",
    "box.rect": "box_rect",
    "box.ref_frame": "box_ref_frame",
    "emit_overlays": "emit_overlays",
    "use_depth": "use_depth",
    "baseline_mode": "baseline_mode",
}

_FIELD_TYPES = {f.name: f.type for f in fields(PipelineConfig)}


def _parse_value(text):
    text = text.strip()
    if text.startswith("[") and text.endswith("]"):
        inner = text[1:-1].strip()
        return [] if not inner else [_parse_value(v) for v in inner.split(",")]
    if text.lower() in ("true", "false"):
        return text.lower() == "true"
    if len(text) >= 2 and text[0] == text[-1] and text[0] in "'\"":
        return text[1:-1]
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def _coerce(attr, value):
    kind = _FIELD_TYPES[attr]
    if kind == "int" and isinstance(value, (int, float)):
        return int(value)
    if kind == "float" and isinstance(value, (int, float)):
        return float(value)
    if kind == "bool" and not isinstance(value, bool):
        raise ValueError(f"{attr} expects true/false, got {value!r}")
    return value


def parse_config_text(text, base=None):
    """Apply key=value lines to a config, rejecting unknown keys."""
    cfg = base if base is not None else PipelineConfig()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in _KEY_MAP:
            raise ValueError(f"line {lineno}: unknown config key {key!r}")
        attr = _KEY_MAP[key]
        setattr(cfg, attr, _coerce(attr, _parse_value(value)))
    return cfg


def load_config(path, base=None):
    with open(path) as fh:
        return parse_config_text(fh.read(), base=base)
