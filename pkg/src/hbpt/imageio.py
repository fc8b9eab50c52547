"""Frame sequence and depth raster I/O, color conversion, overlay rendering.

Frames are stored as YUV pixel rasters; the original RGB plane is kept
alongside so that unannotated writes are byte-preserving. Depth rasters are
16-bit PGM files holding millimeters, 0 = invalid.
"""

import re
import struct
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

DEPTH_MAX_MM = 10000

# fixed overlay palette, RGB
PALETTE = {
    "ellipse": (0, 255, 0),
    "rectangle": (255, 220, 0),
    "polyline": (0, 200, 255),
    "text": (255, 255, 255),
}


@dataclass
class Frame:
    """One color frame: YUV raster plus the source RGB it was decoded from."""

    index: int
    width: int
    height: int
    yuv: np.ndarray  # (h, w, 3) uint8
    source_path: str = ""
    rgb: np.ndarray | None = None  # kept for byte-preserving writes

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValueError("frame dimensions must be positive")
        if self.yuv.shape != (self.height, self.width, 3):
            raise ValueError("yuv raster does not match frame dimensions")


@dataclass
class DepthRaster:
    """Per-pixel depth in millimeters; 0 marks an invalid return."""

    width: int
    height: int
    z: np.ndarray  # (h, w) int32, millimeters

    def __post_init__(self):
        if self.z.shape != (self.height, self.width):
            raise ValueError("depth raster does not match dimensions")


@dataclass
class OverlayItem:
    """Drawable annotation: ellipse, rectangle, polyline or text."""

    kind: str  # ellipse | rectangle | polyline | text
    geometry: tuple
    label: str = ""
    color: tuple | None = None  # overrides the palette when set


# ---------------------------------------------------------------------------
# color conversion (BT.601 full range)

_YUV_FWD = np.array(
    [
        [0.299, 0.587, 0.114],
        [-0.168736, -0.331264, 0.5],
        [0.5, -0.418688, -0.081312],
    ]
)
_YUV_OFF = np.array([0.0, 128.0, 128.0])


def convert_rgb_to_yuv(r, g, b):
    """Convert one RGB triple (0..255 each) to a rounded, clamped YUV triple."""
    vec = _YUV_FWD @ np.array([r, g, b], dtype=np.float64) + _YUV_OFF
    out = np.clip(np.rint(vec), 0, 255).astype(np.uint8)
    return int(out[0]), int(out[1]), int(out[2])


def rgb_to_yuv_image(rgb):
    """Vectorized RGB -> YUV for an (h, w, 3) uint8 raster."""
    flat = rgb.reshape(-1, 3).astype(np.float64)
    yuv = flat @ _YUV_FWD.T + _YUV_OFF
    return np.clip(np.rint(yuv), 0, 255).astype(np.uint8).reshape(rgb.shape)


def yuv_to_rgb_image(yuv):
    """Inverse transform, rounded and clamped; round trips within +/-2."""
    y = yuv[..., 0].astype(np.float64)
    u = yuv[..., 1].astype(np.float64) - 128.0
    v = yuv[..., 2].astype(np.float64) - 128.0
    r = y + 1.402 * v
    g = y - 0.344136 * u - 0.714136 * v
    b = y + 1.772 * u
    rgb = np.stack([r, g, b], axis=-1)
    return np.clip(np.rint(rgb), 0, 255).astype(np.uint8)


# ---------------------------------------------------------------------------
# PNM codecs

def _read_pnm_header(data, magic):
    if data[:2] != magic:
        raise ValueError(f"expected {magic.decode()} header")
    # header tokens may be separated by whitespace and '#' comments
    pos = 2
    fields = []
    want = 3 if magic in (b"P5", b"P6") else 2
    while len(fields) < want:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        fields.append(int(data[start:pos]))
    return fields, pos + 1  # single whitespace after the last header field


def read_ppm(path):
    """Read a binary PPM (P6, maxval 255) into an (h, w, 3) uint8 array."""
    data = Path(path).read_bytes()
    (w, h, maxval), pos = _read_pnm_header(data, b"P6")
    if maxval != 255:
        raise ValueError(f"{path}: unsupported PPM maxval {maxval}")
    px = np.frombuffer(data, dtype=np.uint8, count=w * h * 3, offset=pos)
    if px.size != w * h * 3:
        raise ValueError(f"{path}: truncated PPM payload")
    return px.reshape(h, w, 3).copy()


def write_ppm(path, rgb):
    """Write an (h, w, 3) uint8 array as binary PPM."""
    h, w = rgb.shape[:2]
    with open(path, "wb") as f:
        f.write(b"P6\n%d %d\n255\n" % (w, h))
        f.write(np.ascontiguousarray(rgb, dtype=np.uint8).tobytes())


def read_pgm16(path):
    """Read a 16-bit big-endian PGM (P5, maxval 65535)."""
    data = Path(path).read_bytes()
    (w, h, maxval), pos = _read_pnm_header(data, b"P5")
    if maxval != 65535:
        raise ValueError(f"{path}: depth PGM must have maxval 65535, got {maxval}")
    px = np.frombuffer(data, dtype=">u2", count=w * h, offset=pos)
    if px.size != w * h:
        raise ValueError(f"{path}: truncated PGM payload")
    return px.reshape(h, w).astype(np.int32)


def write_pgm16(path, z):
    """Write an (h, w) integer array as 16-bit big-endian PGM."""
    h, w = z.shape
    with open(path, "wb") as f:
        f.write(b"P5\n%d %d\n65535\n" % (w, h))
        f.write(np.ascontiguousarray(z, dtype=">u2").tobytes())


# ---------------------------------------------------------------------------
# minimal PNG decoder (8-bit gray/RGB/RGBA, non-interlaced)

def read_png(path):
    data = Path(path).read_bytes()
    if data[:8] != b"\x89PNG\r\n\x1a\n":
        raise ValueError(f"{path}: not a PNG file")
    pos = 8
    width = height = None
    bit_depth = color_type = None
    idat = b""
    while pos < len(data):
        (length,) = struct.unpack(">I", data[pos : pos + 4])
        ctype = data[pos + 4 : pos + 8]
        body = data[pos + 8 : pos + 8 + length]
        pos += 12 + length
        if ctype == b"IHDR":
            width, height, bit_depth, color_type, _, _, interlace = struct.unpack(
                ">IIBBBBB", body
            )
            if bit_depth != 8 or interlace != 0:
                raise ValueError(f"{path}: only 8-bit non-interlaced PNG supported")
            if color_type not in (0, 2, 6):
                raise ValueError(f"{path}: unsupported PNG color type {color_type}")
        elif ctype == b"IDAT":
            idat += body
        elif ctype == b"IEND":
            break
    if width is None:
        raise ValueError(f"{path}: missing IHDR")
    channels = {0: 1, 2: 3, 6: 4}[color_type]
    raw = zlib.decompress(idat)
    stride = width * channels
    out = np.empty((height, stride), dtype=np.uint8)
    prev = np.zeros(stride, dtype=np.uint8)
    off = 0
    for row in range(height):
        ftype = raw[off]
        line = np.frombuffer(raw, np.uint8, stride, off + 1).astype(np.int32)
        off += 1 + stride
        if ftype == 0:
            rec = line
        elif ftype == 2:  # up
            rec = (line + prev) & 0xFF
        else:  # sub, average, paeth need the previous pixel; scan left to right
            rec = np.zeros(stride, dtype=np.int32)
            for i in range(stride):
                a = rec[i - channels] if i >= channels else 0
                b = int(prev[i])
                if ftype == 1:
                    pred = a
                elif ftype == 3:
                    pred = (a + b) // 2
                elif ftype == 4:
                    c = int(prev[i - channels]) if i >= channels else 0
                    p = a + b - c
                    pa, pb, pc = abs(p - a), abs(p - b), abs(p - c)
                    pred = a if pa <= pb and pa <= pc else (b if pb <= pc else c)
                else:
                    raise ValueError(f"{path}: bad PNG filter {ftype}")
                rec[i] = (line[i] + pred) & 0xFF
        prev = rec.astype(np.uint8)
        out[row] = prev
    px = out.reshape(height, width, channels)
    if channels == 1:
        px = np.repeat(px, 3, axis=2)
    elif channels == 4:
        px = px[:, :, :3]
    return px.copy()


# ---------------------------------------------------------------------------
# frame sequence loading

_NUM_RE = re.compile(r"(\d+)")


def _frame_sort_key(path):
    nums = _NUM_RE.findall(path.stem)
    return (int(nums[-1]) if nums else 0, path.name)


def load_frame_sequence(directory, pattern="frame_*.ppm"):
    """Load all frames matching ``pattern``, ordered by numeric filename index.

    Accepts binary PPM and 8-bit PNG. Raises if nothing matches, a file fails
    to decode, or dimensions differ between frames.
    """
    directory = Path(directory)
    if not directory.is_dir():
        raise FileNotFoundError(f"no such directory: {directory}")
    paths = sorted(directory.glob(pattern), key=_frame_sort_key)
    if not paths:
        raise FileNotFoundError(f"no files match {pattern!r} in {directory}")
    frames = []
    for i, path in enumerate(paths):
        try:
            if path.suffix.lower() == ".png":
                rgb = read_png(path)
            else:
                rgb = read_ppm(path)
        except ValueError as exc:
            raise ValueError(f"cannot decode {path}: {exc}") from exc
        h, w = rgb.shape[:2]
        if frames and (w != frames[0].width or h != frames[0].height):
            raise ValueError(
                f"dimension mismatch in {path}: {w}x{h} vs "
                f"{frames[0].width}x{frames[0].height}"
            )
        frames.append(
            Frame(
                index=i,
                width=w,
                height=h,
                yuv=rgb_to_yuv_image(rgb),
                source_path=str(path),
                rgb=rgb,
            )
        )
    return frames


def load_depth_raster(path):
    """Load one 16-bit PGM depth raster; values outside 1..10000 mm become 0."""
    z = read_pgm16(path)
    z[z > DEPTH_MAX_MM] = 0
    h, w = z.shape
    return DepthRaster(width=w, height=h, z=z)


# ---------------------------------------------------------------------------
# overlay rasterization

def _put_pixels(img, xs, ys, color):
    h, w = img.shape[:2]
    keep = (xs >= 0) & (xs < w) & (ys >= 0) & (ys < h)
    img[ys[keep], xs[keep]] = color


def draw_rectangle(img, rect, color):
    """1-px border of rect = (x, y, w, h), clipped to the image."""
    x, y, w, h = (int(round(v)) for v in rect)
    if w <= 0 or h <= 0:
        return
    xs = np.arange(x, x + w)
    ys = np.arange(y, y + h)
    _put_pixels(img, xs, np.full_like(xs, y), color)
    _put_pixels(img, xs, np.full_like(xs, y + h - 1), color)
    _put_pixels(img, np.full_like(ys, x), ys, color)
    _put_pixels(img, np.full_like(ys, x + w - 1), ys, color)


def draw_polyline(img, points, color, closed=False):
    pts = [(int(round(px)), int(round(py))) for px, py in points]
    if closed and len(pts) > 1:
        pts.append(pts[0])
    for (x0, y0), (x1, y1) in zip(pts, pts[1:]):
        n = max(abs(x1 - x0), abs(y1 - y0)) + 1
        xs = np.rint(np.linspace(x0, x1, n)).astype(int)
        ys = np.rint(np.linspace(y0, y1, n)).astype(int)
        _put_pixels(img, xs, ys, color)


def draw_ellipse(img, center, semi_axes, angle, color):
    """Boundary of an ellipse given center, semi axes (a, b) and rotation."""
    cx, cy = center
    a, b = max(semi_axes[0], 0.5), max(semi_axes[1], 0.5)
    n = max(int(8 * (a + b)), 16)
    t = np.linspace(0.0, 2.0 * np.pi, n, endpoint=False)
    ca, sa = np.cos(angle), np.sin(angle)
    ex = a * np.cos(t)
    ey = b * np.sin(t)
    xs = np.rint(cx + ca * ex - sa * ey).astype(int)
    ys = np.rint(cy + sa * ex + ca * ey).astype(int)
    _put_pixels(img, xs, ys, color)


_FONT = {
    # 3x5 bitmap glyphs, rows top to bottom
    "0": ("111", "101", "101", "101", "111"),
    "1": ("010", "110", "010", "010", "111"),
    "2": ("111", "001", "111", "100", "111"),
    "3": ("111", "001", "111", "001", "111"),
    "4": ("101", "101", "111", "001", "001"),
    "5": ("111", "100", "111", "001", "111"),
    "6": ("111", "100", "111", "101", "111"),
    "7": ("111", "001", "010", "010", "010"),
    "8": ("111", "101", "111", "101", "111"),
    "9": ("111", "101", "111", "001", "111"),
    "A": ("010", "101", "111", "101", "101"),
    "B": ("110", "101", "110", "101", "110"),
    "C": ("011", "100", "100", "100", "011"),
    "D": ("110", "101", "101", "101", "110"),
    "E": ("111", "100", "110", "100", "111"),
    "G": ("011", "100", "101", "101", "011"),
    "H": ("101", "101", "111", "101", "101"),
    "L": ("100", "100", "100", "100", "111"),
    "M": ("101", "111", "111", "101", "101"),
    "N": ("101", "111", "111", "111", "101"),
    "O": ("010", "101", "101", "101", "010"),
    "P": ("110", "101", "110", "100", "100"),
    "R": ("110", "101", "110", "101", "101"),
    "S": ("011", "100", "010", "001", "110"),
    "T": ("111", "010", "010", "010", "010"),
    "X": ("101", "101", "010", "101", "101"),
    "Y": ("101", "101", "010", "010", "010"),
    " ": ("000", "000", "000", "000", "000"),
}


def draw_text(img, origin, text, color):
    """Tiny 3x5 uppercase/digit font; unknown glyphs are skipped."""
    x0, y0 = int(round(origin[0])), int(round(origin[1]))
    for ch in text.upper():
        glyph = _FONT.get(ch)
        if glyph is not None:
            for dy, row in enumerate(glyph):
                for dx, bit in enumerate(row):
                    if bit == "1":
                        _put_pixels(
                            img,
                            np.array([x0 + dx]),
                            np.array([y0 + dy]),
                            color,
                        )
        x0 += 4


def render_overlays(rgb, overlays):
    """Rasterize overlays onto a copy of the RGB raster."""
    out = rgb.copy()
    for item in overlays:
        color = item.color if item.color is not None else PALETTE[item.kind]
        if item.kind == "rectangle":
            draw_rectangle(out, item.geometry, color)
        elif item.kind == "ellipse":
            center, axes, angle = item.geometry
            draw_ellipse(out, center, axes, angle, color)
        elif item.kind == "polyline":
            draw_polyline(out, item.geometry, color)
        elif item.kind == "text":
            draw_text(out, item.geometry, item.label, color)
        else:
            raise ValueError(f"unknown overlay kind {item.kind!r}")
        if item.label and item.kind in ("rectangle", "ellipse"):
            if item.kind == "rectangle":
                lx, ly = item.geometry[0], item.geometry[1] - 7
            else:
                lx, ly = item.geometry[0][0] + 3, item.geometry[0][1] - 7
            draw_text(out, (lx, ly), item.label, PALETTE["text"])
    return out


def write_annotated_frame(frame, overlays, path):
    """Write the frame as PPM with overlays burned in.

    With no overlays the pixel payload is identical to the source raster.
    """
    base = frame.rgb if frame.rgb is not None else yuv_to_rgb_image(frame.yuv)
    write_ppm(path, render_overlays(base, overlays) if overlays else base)
