"""Background scene model: per-pixel YUV mean/variance, deviation detection,
and exponential adaptation of pixels not covered by the person."""

import struct
from dataclasses import dataclass

import numpy as np

DEFAULT_LEARN_FRAMES = 30
DEFAULT_VAR_FLOOR = 4.0
DEFAULT_TAU = 4.0
DEFAULT_ALPHA = 0.05

_MAGIC = b"HBPTSCN1"


@dataclass
class SceneModel:
    mean: np.ndarray  # (h, w, 3) float64
    var: np.ndarray  # (h, w, 3) float64, floored at var_floor
    frames_seen: int
    var_floor: float

    @property
    def height(self):
        return self.mean.shape[0]

    @property
    def width(self):
        return self.mean.shape[1]


@dataclass
class ForegroundMask:
    width: int
    height: int
    bits: np.ndarray  # (h, w) bool


def learn_scene(frames, var_floor=DEFAULT_VAR_FLOOR):
    """Accumulate per-pixel mean and population variance over person-free frames."""
    if len(frames) < 2:
        raise ValueError(f"need at least 2 frames to learn a scene, got {len(frames)}")
    w, h = frames[0].width, frames[0].height
    for f in frames:
        if f.width != w or f.height != h:
            raise ValueError(
                f"dimension mismatch in learning set: frame {f.index} is "
                f"{f.width}x{f.height}, expected {w}x{h}"
            )
    acc = np.zeros((h, w, 3), dtype=np.float64)
    acc2 = np.zeros((h, w, 3), dtype=np.float64)
    for f in frames:
        x = f.yuv.astype(np.float64)
        acc += x
        acc2 += x * x
    n = float(len(frames))
    mean = acc / n
    var = np.maximum(acc2 / n - mean * mean, var_floor)
    return SceneModel(mean=mean, var=var, frames_seen=len(frames), var_floor=var_floor)


def detect_foreground(model, frame, tau=DEFAULT_TAU):
    """Flag pixels whose squared Mahalanobis distance over Y,U,V exceeds tau^2."""
    if frame.width != model.width or frame.height != model.height:
        raise ValueError("frame dimensions do not match scene model")
    d = frame.yuv.astype(np.float64) - model.mean
    dist2 = np.sum(d * d / model.var, axis=2)
    return ForegroundMask(width=model.width, height=model.height, bits=dist2 > tau * tau)


def update_scene(model, frame, fg, alpha=DEFAULT_ALPHA):
    """Blend the visible (non-foreground) pixels into the model in place.

    mean <- (1-a)*mean + a*x, var <- (1-a)*var + a*(x-mean)^2, then the
    variance floor is re-applied. Foreground pixels are left untouched.
    """
    if frame.width != model.width or frame.height != model.height:
        raise ValueError("frame dimensions do not match scene model")
    if fg.bits.shape != model.mean.shape[:2]:
        raise ValueError("mask dimensions do not match scene model")
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    vis = ~fg.bits
    if not vis.any():
        return model
    x = frame.yuv.astype(np.float64)
    new_mean = (1.0 - alpha) * model.mean + alpha * x
    d = x - new_mean
    new_var = np.maximum((1.0 - alpha) * model.var + alpha * d * d, model.var_floor)
    keep = vis[:, :, None]
    model.mean = np.where(keep, new_mean, model.mean)
    model.var = np.where(keep, new_var, model.var)
    model.frames_seen += 1
    return model


def save_scene(model, path):
    """Persist as little-endian binary: magic, dims, mean then var as float32."""
    with open(path, "wb") as f:
        f.write(_MAGIC)
        f.write(
            struct.pack(
                "<iiif", model.width, model.height, model.frames_seen, model.var_floor
            )
        )
        f.write(model.mean.astype("<f4").tobytes())
        f.write(model.var.astype("<f4").tobytes())


def load_scene(path):
    with open(path, "rb") as f:
        magic = f.read(8)
        if magic != _MAGIC:
            raise ValueError(f"{path}: not a scene model file")
        w, h, frames_seen, var_floor = struct.unpack("<iiif", f.read(16))
        n = w * h * 3
        mean = np.frombuffer(f.read(4 * n), dtype="<f4").reshape(h, w, 3)
        var = np.frombuffer(f.read(4 * n), dtype="<f4").reshape(h, w, 3)
    return SceneModel(
        mean=mean.astype(np.float64),
        var=var.astype(np.float64),
        frames_seen=frames_seen,
        var_floor=var_floor,
    )
