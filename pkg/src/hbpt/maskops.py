"""Binary mask machinery: box morphology, connected components, two-level
contour hierarchy, chain-code polygon compression, convex hulls, and the
dilate/erode/dilate silhouette refinement step."""

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

_STRUCT8 = np.ones((3, 3), dtype=bool)

# Moore neighborhood, clockwise starting east, as (dx, dy)
_MOORE = [(1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1)]
_DIR_CODE = {d: i for i, d in enumerate(_MOORE)}


@dataclass
class ComponentStats:
    area: int
    bbox: tuple  # (x, y, w, h)
    centroid: tuple  # (x, y) float


@dataclass
class LabeledComponents:
    labels: np.ndarray  # (h, w) int32, 0 = background
    count: int
    stats: list  # ComponentStats, index i -> label i+1


@dataclass
class Contour:
    points: list  # [(x, y)] closed 8-connected chain
    level: str  # "outer" | "hole"
    parent: int | None = None  # index of the enclosing outer contour
    component: int = 0  # label in the source component raster


def morph(mask, op, se=(3, 3), iterations=1):
    """Apply box dilation or erosion over the window clipped to the frame.

    Out-of-frame cells are neutral for each op (background for dilation, so
    nothing grows in from outside; foreground for erosion, so the border is
    not eaten just for lying next to the frame edge). This keeps closing
    extensive and idempotent.
    """
    if op not in ("dilate", "erode"):
        raise ValueError(f"unknown morphology op {op!r}")
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    sh, sw = se
    if sh < 1 or sw < 1 or sh % 2 == 0 or sw % 2 == 0:
        raise ValueError("structuring element must have odd positive dimensions")
    ry, rx = sh // 2, sw // 2
    out = mask.astype(bool)
    h, w = out.shape
    for _ in range(iterations):
        padded = np.full((h + 2 * ry, w + 2 * rx), op == "erode", dtype=bool)
        padded[ry : ry + h, rx : rx + w] = out
        windows = [
            padded[dy : dy + h, dx : dx + w] for dy in range(sh) for dx in range(sw)
        ]
        stacked = np.stack(windows)
        out = stacked.any(axis=0) if op == "dilate" else stacked.all(axis=0)
    return out


def connected_components(mask, connectivity=8):
    """Label maximal connected regions and compute per-component stats."""
    structure = _STRUCT8 if connectivity == 8 else None
    labels, count = ndimage.label(mask, structure=structure)
    labels = labels.astype(np.int32)
    stats = []
    if count:
        ys, xs = np.nonzero(labels)
        vals = labels[ys, xs]
        order = np.argsort(vals, kind="stable")
        ys, xs, vals = ys[order], xs[order], vals[order]
        bounds = np.searchsorted(vals, np.arange(1, count + 2))
        for i in range(count):
            sy = ys[bounds[i] : bounds[i + 1]]
            sx = xs[bounds[i] : bounds[i + 1]]
            x0, x1 = int(sx.min()), int(sx.max())
            y0, y1 = int(sy.min()), int(sy.max())
            stats.append(
                ComponentStats(
                    area=int(sx.size),
                    bbox=(x0, y0, x1 - x0 + 1, y1 - y0 + 1),
                    centroid=(float(sx.mean()), float(sy.mean())),
                )
            )
    return LabeledComponents(labels=labels, count=int(count), stats=stats)


def _trace_boundary(region, start):
    """Clockwise Moore boundary trace from the region's topmost-leftmost pixel.

    The walk keeps a backtrack cell (the background cell examined just before
    the current pixel was found). States (pixel, backtrack) are finite and the
    transition is deterministic, so the walk settles in a cycle covering the
    boundary; that cycle is the chain. 1-px-wide limbs are walked on both
    sides, so points may repeat within the chain.
    """
    h, w = region.shape
    sx, sy = start

    def is_fg(x, y):
        return 0 <= x < w and 0 <= y < h and region[y, x]

    px, py = sx, sy
    bx, by = sx - 1, sy  # start was entered from the west by scan order
    seen = {}
    pixels = []
    while True:
        state = (px, py, bx, by)
        if state in seen:
            cycle = pixels[seen[state] :]
            break
        seen[state] = len(pixels)
        pixels.append((px, py))
        bdir = _DIR_CODE[(bx - px, by - py)]
        found = None
        for k in range(1, 9):
            d = (bdir + k) % 8
            dx, dy = _MOORE[d]
            nx, ny = px + dx, py + dy
            if is_fg(nx, ny):
                pdx, pdy = _MOORE[(bdir + k - 1) % 8]
                found = (nx, ny, px + pdx, py + pdy)
                break
        if found is None:
            return [(sx, sy)]  # isolated pixel
        px, py, bx, by = found
    j = min(range(len(cycle)), key=lambda t: (cycle[t][1], cycle[t][0]))
    return cycle[j:] + cycle[:j]


def extract_contours(mask):
    """Outer contour per component plus hole contours in a two-level hierarchy.

    Hole chains run along the enclosed background pixels. A component sitting
    inside another component's hole is a component of its own, so its outer
    contour appears at the top level.
    """
    mask = np.asarray(mask, dtype=bool)
    comps = connected_components(mask, connectivity=8)
    contours = []
    outer_index = {}
    for i in range(comps.count):
        x, y, w, h = comps.stats[i].bbox
        sub = comps.labels[y : y + h, x : x + w] == i + 1
        ys, xs = np.nonzero(sub)
        k = np.lexsort((xs, ys))[0]  # topmost, then leftmost
        chain = _trace_boundary(sub, (int(xs[k]), int(ys[k])))
        points = [(cx + x, cy + y) for cx, cy in chain]
        outer_index[i + 1] = len(contours)
        contours.append(
            Contour(points=points, level="outer", parent=None, component=i + 1)
        )

    # holes: 4-connected background regions that do not reach the border
    bg_labels, bg_count = ndimage.label(~mask)
    if bg_count:
        border = np.zeros(mask.shape, dtype=bool)
        border[0, :] = border[-1, :] = True
        border[:, 0] = border[:, -1] = True
        outside = set(int(v) for v in np.unique(bg_labels[border]) if v != 0)
        for b in range(1, bg_count + 1):
            if b in outside:
                continue
            region = bg_labels == b
            ys, xs = np.nonzero(region)
            k = np.lexsort((xs, ys))[0]
            ty, tx = int(ys[k]), int(xs[k])
            owner = int(comps.labels[ty - 1, tx])  # enclosing pixel sits above
            chain = _trace_boundary(region, (tx, ty))
            contours.append(
                Contour(
                    points=chain,
                    level="hole",
                    parent=outer_index.get(owner),
                    component=owner,
                )
            )
    return contours


def approximate_contour(contour):
    """Collapse straight runs of the chain in the 8 directions to endpoints.

    Re-rasterizing consecutive output points with unit steps reproduces the
    original chain.
    """
    pts = contour.points if isinstance(contour, Contour) else list(contour)
    n = len(pts)
    if n <= 2:
        return list(pts)
    dirs = []
    for i in range(n):
        x0, y0 = pts[i]
        x1, y1 = pts[(i + 1) % n]
        step = (x1 - x0, y1 - y0)
        if step not in _DIR_CODE:
            raise ValueError(f"chain step {step} is not 8-connected")
        dirs.append(step)
    pivot = 0  # rotate so the output starts at a direction change
    for i in range(n):
        if dirs[i - 1] != dirs[i]:
            pivot = i
            break
    out = []
    for k in range(n):
        i = (pivot + k) % n
        if dirs[i - 1] != dirs[i]:
            out.append(pts[i])
    if not out:  # 2-cycle chains degenerate to a single direction pair
        out = [pts[0], pts[1]] if n > 1 else [pts[0]]
    return out


def rasterize_polyline(points, closed=True):
    """Walk unit steps between consecutive points; inverse of approximation."""
    pts = list(points)
    if len(pts) == 1:
        return list(pts)
    pairs = list(zip(pts, pts[1:] + (pts[:1] if closed else [])))
    chain = []
    for (x0, y0), (x1, y1) in pairs:
        dx, dy = x1 - x0, y1 - y0
        steps = max(abs(dx), abs(dy))
        if steps and (abs(dx) not in (0, steps) or abs(dy) not in (0, steps)):
            raise ValueError("polyline segment is not axis-aligned or diagonal")
        sx = (dx > 0) - (dx < 0)
        sy = (dy > 0) - (dy < 0)
        for s in range(steps):
            chain.append((x0 + sx * s, y0 + sy * s))
    if not closed:
        chain.append(pts[-1])
    return chain


def _cross(o, a, b):
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def convex_hull(points):
    """Minimal convex polygon, counter-clockwise, collinear points dropped.

    Output starts at the lowest-y (then lowest-x) vertex. Exact for integer
    inputs. Degenerate inputs return 1 or 2 points.
    """
    pts = sorted(set(tuple(p) for p in points))
    if not pts:
        raise ValueError("convex hull of empty point set")
    if len(pts) == 1:
        return [pts[0]]
    lower = []
    for p in pts:
        while len(lower) >= 2 and _cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper = []
    for p in reversed(pts):
        while len(upper) >= 2 and _cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    hull = lower[:-1] + upper[:-1]
    if not hull:  # all points collinear
        hull = [pts[0], pts[-1]]
    start = min(range(len(hull)), key=lambda i: (hull[i][1], hull[i][0]))
    return hull[start:] + hull[:start]


def hull_contains(hull, p):
    """True when p is inside or on the hull boundary."""
    if len(hull) == 1:
        return tuple(p) == tuple(hull[0])
    if len(hull) == 2:
        a, b = hull
        if _cross(a, b, p) != 0:
            return False
        return min(a[0], b[0]) <= p[0] <= max(a[0], b[0]) and min(
            a[1], b[1]
        ) <= p[1] <= max(a[1], b[1])
    return all(_cross(a, b, p) >= 0 for a, b in zip(hull, hull[1:] + hull[:1]))


def fill_holes(mask):
    """Set enclosed background regions (4-connected, off-border) to foreground."""
    bg_labels, bg_count = ndimage.label(~mask)
    if not bg_count:
        return mask.copy()
    border = np.zeros(mask.shape, dtype=bool)
    border[0, :] = border[-1, :] = True
    border[:, 0] = border[:, -1] = True
    outside = sorted(int(v) for v in np.unique(bg_labels[border]) if v != 0)
    filled = mask.copy()
    filled[(~mask) & ~np.isin(bg_labels, outside)] = True
    return filled


def refine_mask(mask, min_area=None, se=(3, 3), iterations=1):
    """Consolidate a noisy silhouette into few large filled components.

    Dilate, erode, dilate with the box element, then keep the filled interior
    of every outer contour whose area clears ``min_area`` (default 0.5% of
    the frame).
    """
    mask = np.asarray(mask, dtype=bool)
    if min_area is None:
        min_area = int(round(0.005 * mask.size))
    if not mask.any():
        return np.zeros_like(mask)
    m = morph(mask, "dilate", se, iterations)
    m = morph(m, "erode", se, iterations)
    m = morph(m, "dilate", se, iterations)
    comps = connected_components(m, connectivity=8)
    out = np.zeros_like(mask)
    for i in range(comps.count):
        x, y, w, h = comps.stats[i].bbox
        sub = fill_holes(comps.labels[y : y + h, x : x + w] == i + 1)
        if int(sub.sum()) >= min_area:
            out[y : y + h, x : x + w] |= sub
    return out


def save_mask_pbm(path, mask):
    """Write a bool mask as binary PBM (P4); 1 bits are foreground."""
    h, w = mask.shape
    packed = np.packbits(mask.astype(np.uint8), axis=1)
    with open(path, "wb") as f:
        f.write(b"P4\n%d %d\n" % (w, h))
        f.write(packed.tobytes())


def load_mask_pbm(path):
    data = Path(path).read_bytes()
    if data[:2] != b"P4":
        raise ValueError(f"{path}: not a binary PBM file")
    pos = 2
    fields = []
    while len(fields) < 2:
        while data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            while data[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while not data[pos : pos + 1].isspace():
            pos += 1
        fields.append(int(data[start:pos]))
    pos += 1
    w, h = fields
    row_bytes = (w + 7) // 8
    raw = np.frombuffer(data, dtype=np.uint8, count=h * row_bytes, offset=pos)
    bits = np.unpackbits(raw.reshape(h, row_bytes), axis=1)[:, :w]
    return bits.astype(bool)
