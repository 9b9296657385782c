"""Depth image-based rendering: forward-warp a texture+depth pair to a
horizontally shifted virtual viewpoint.

The warp uses a rectified disparity model that is affine in the 8-bit depth
value: ``disparity(d) = baseline_gain * d / 255 + depth_offset`` pixels.
Moving the camera to the right shifts pixels left (near content moves
farther), which unveils background on the right side of foreground objects;
those unhit pixels are the disocclusion holes the rest of the package fills.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class WarpConfig:
    """Disparity model and camera movement direction.

    baseline_gain is the disparity in pixels at maximum depth (255);
    depth_offset is the disparity at depth 0. Both in pixels.
    """

    baseline_gain: float = 8.0
    depth_offset: float = 0.0
    direction: str = "right"

    def __post_init__(self):
        if self.direction not in ("left", "right"):
            raise ValueError(f"direction must be 'left' or 'right', got {self.direction!r}")
        if not math.isfinite(self.baseline_gain) or not math.isfinite(self.depth_offset):
            raise ValueError("baseline-gain and depth-offset must be finite")
        if self.baseline_gain < 0:
            raise ValueError("baseline-gain must be >= 0 (disparity monotone in depth)")

    def disparity(self, depth: np.ndarray) -> np.ndarray:
        """Disparity in pixels for 8-bit depth values (float array out)."""
        return self.baseline_gain * (np.asarray(depth, dtype=np.float64) / 255.0) + self.depth_offset


@dataclass
class WarpResult:
    """Virtual view produced by :func:`forward_warp`.

    known(p) is True exactly where at least one source pixel landed on p;
    at those pixels depth holds the depth of the nearest contributing
    source pixel.
    """

    image: np.ndarray
    depth: np.ndarray
    known: np.ndarray
    cracks_closed: int = field(default=0)


def forward_warp(img: np.ndarray, depth: np.ndarray, cfg: WarpConfig) -> WarpResult:
    """Warp each pixel horizontally by its rounded disparity.

    Collisions resolve nearest-wins (largest depth value), ties broken by
    the leftmost source pixel. Pixels no source maps to are holes.
    """
    img = np.asarray(img)
    depth = np.asarray(depth)
    if img.shape[:2] != depth.shape:
        raise ValueError(
            f"image {img.shape[:2]} and depth {depth.shape} dimensions differ"
        )
    h, w = depth.shape
    disp = np.floor(cfg.disparity(depth) + 0.5).astype(np.int64)
    shift = -disp if cfg.direction == "right" else disp
    xs_dst = np.arange(w, dtype=np.int64)[None, :] + shift

    valid = (xs_dst >= 0) & (xs_dst < w)
    ys, xs_src = np.nonzero(valid)
    xd = xs_dst[ys, xs_src]
    d = depth[ys, xs_src]

    # Scatter in ascending (depth, -src_x) order so the last write per
    # destination is the nearest pixel, ties going to the leftmost source.
    order = np.lexsort((-xs_src, d))
    ys, xs_src, xd, d = ys[order], xs_src[order], xd[order], d[order]

    out_img = np.zeros_like(img)
    out_depth = np.zeros_like(depth)
    known = np.zeros((h, w), dtype=bool)
    out_img[ys, xd] = img[ys, xs_src]
    out_depth[ys, xd] = d
    known[ys, xd] = True
    return WarpResult(image=out_img, depth=out_depth, known=known)


def close_cracks(res: WarpResult) -> int:
    """Fill 1-pixel-wide hole columns whose both horizontal neighbors are known.

    These are rounding artifacts of the integer warp, not disocclusions, and
    would pollute the patch lattice with spurious nodes. Filled pixels take
    the average of their two neighbors and are removed from the hole mask.
    Modifies ``res`` in place and returns the number of pixels closed.
    """
    known = res.known
    crack = np.zeros_like(known)
    crack[:, 1:-1] = ~known[:, 1:-1] & known[:, :-2] & known[:, 2:]
    n = int(crack.sum())
    if n == 0:
        return 0
    ys, xs = np.nonzero(crack)
    left = res.image[ys, xs - 1].astype(np.uint16)
    right = res.image[ys, xs + 1].astype(np.uint16)
    res.image[ys, xs] = ((left + right + 1) // 2).astype(np.uint8)
    dl = res.depth[ys, xs - 1].astype(np.uint16)
    dr = res.depth[ys, xs + 1].astype(np.uint16)
    res.depth[ys, xs] = ((dl + dr + 1) // 2).astype(np.uint8)
    known[ys, xs] = True
    res.cracks_closed += n
    return n


def fill_depth_holes(depth: np.ndarray, known: np.ndarray, cfg: WarpConfig) -> np.ndarray:
    """Extrapolate depth into holes from the background side.

    Disoccluded content is background by construction, so each hole pixel
    takes the depth of the nearest known pixel scanning horizontally toward
    the side the disocclusion opens on (the camera movement side). Rows with
    no known pixel on that side fall back to the other side; rows with no
    known pixel at all take the nearest horizontally-filled row in the same
    column. The output has no undefined pixels.
    """
    depth = np.asarray(depth)
    known = np.asarray(known, dtype=bool)
    if depth.shape != known.shape:
        raise ValueError(f"depth {depth.shape} and mask {known.shape} dimensions differ")
    if known.all():
        return depth.copy()
    if not known.any():
        raise ValueError("cannot fill depth: image is entirely hole")

    h, w = depth.shape
    cols = np.broadcast_to(np.arange(w, dtype=np.int64), (h, w))

    # Nearest known column index to the right (w when none) and left (-1).
    right = np.where(known, cols, w)
    right = np.minimum.accumulate(right[:, ::-1], axis=1)[:, ::-1]
    left = np.where(known, cols, -1)
    left = np.maximum.accumulate(left, axis=1)

    if cfg.direction == "right":
        primary, p_ok, secondary, s_ok = right, right < w, left, left >= 0
    else:
        primary, p_ok, secondary, s_ok = left, left >= 0, right, right < w

    src = np.where(p_ok, primary, secondary)
    row_ok = p_ok | s_ok
    filled = depth[np.arange(h)[:, None], np.clip(src, 0, w - 1)]
    filled = np.where(row_ok, filled, 0).astype(depth.dtype)

    # Vertical fallback for fully-hole rows: nearest defined row, ties upward.
    defined = row_ok[:, 0]
    if not defined.all():
        rows = np.arange(h, dtype=np.int64)
        up = np.maximum.accumulate(np.where(defined, rows, -1))
        down = np.minimum.accumulate(np.where(defined, rows, h)[::-1])[::-1]
        dist_up = np.where(up >= 0, rows - up, h + 1)
        dist_down = np.where(down < h, down - rows, h + 1)
        pick = np.where(dist_up <= dist_down, up, down)
        bad = ~defined
        filled[bad] = filled[pick[bad]]
    return filled
