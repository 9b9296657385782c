"""Patch lattice over the hole region.

The image plane is partitioned into overlapping ``w x h`` patches at spacing
``(gap_x, gap_y)``; MRF nodes sit at the patch positions whose footprint
contains at least one hole pixel, so the retained grid covers the hole plus
a border ring of known content. Candidate labels are hole-free source
patches enumerated on a stride grid. Border nodes lying over foreground
content get their data term switched off so the fill is steered from the
background side.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage


@dataclass(frozen=True)
class LatticeConfig:
    patch_w: int = 14
    patch_h: int = 14
    gap_x: int = 7
    gap_y: int = 7
    label_stride: int = 2

    def __post_init__(self):
        for name in ("patch_w", "patch_h", "gap_x", "gap_y", "label_stride"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.gap_x >= self.patch_w:
            raise ValueError(
                f"gap-x must be smaller than patch width (gap {self.gap_x} >= patch {self.patch_w})"
            )
        if self.gap_y >= self.patch_h:
            raise ValueError(
                f"gap-y must be smaller than patch height (gap {self.gap_y} >= patch {self.patch_h})"
            )
        if self.patch_w % 2 or self.patch_h % 2:
            raise ValueError("patch width and height must be even")

    def footprint(self, cx: int, cy: int) -> tuple[slice, slice]:
        """Half-open pixel extent of the patch centered at (cx, cy)."""
        w2, h2 = self.patch_w // 2, self.patch_h // 2
        return slice(cy - h2, cy + h2), slice(cx - w2, cx + w2)


@dataclass
class Node:
    id: int
    cx: int
    cy: int
    grid_ix: int
    grid_iy: int
    neighbors: list[int] = field(default_factory=list)
    zeroed: bool = False
    ref_depth: float = float("nan")


@dataclass
class LabelSet:
    """Candidate source patches: centers plus mean depth (normalized [0, 1])."""

    xs: np.ndarray
    ys: np.ndarray
    depths: np.ndarray

    def __len__(self) -> int:
        return len(self.xs)


@dataclass
class PatchLattice:
    cfg: LatticeConfig
    width: int
    height: int
    nodes: list[Node]
    edges: list[tuple[int, int]]
    labels: LabelSet | None = None
    per_node_labels: list[np.ndarray] | None = None

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    def neighbors(self, p: int) -> list[int]:
        return self.nodes[p].neighbors


def build_lattice(mask: np.ndarray, cfg: LatticeConfig) -> PatchLattice:
    """Instantiate nodes and 4-connected edges over the hole region.

    The node grid is spaced (gap_x, gap_y) and aligned to the hole bounding
    box origin; positions whose footprint misses the hole entirely are
    dropped. Positions are clamped so every footprint lies inside the image,
    with an extra clamped position at the valid range end when a hole runs
    to the image border (otherwise edge pixels would be uncovered).

    An all-known mask yields an empty lattice.
    """
    mask = np.asarray(mask, dtype=bool)
    h, w = mask.shape
    if w < cfg.patch_w or h < cfg.patch_h:
        raise ValueError(f"image {w}x{h} smaller than patch {cfg.patch_w}x{cfg.patch_h}")

    hole = ~mask
    if not hole.any():
        return PatchLattice(cfg, w, h, nodes=[], edges=[])
    hys, hxs = np.nonzero(hole)
    x0, x1 = int(hxs.min()), int(hxs.max())
    y0, y1 = int(hys.min()), int(hys.max())

    xs = _axis_positions(x0, x1, cfg.gap_x, cfg.patch_w, w)
    ys = _axis_positions(y0, y1, cfg.gap_y, cfg.patch_h, h)

    hole_sat = _sat(hole)
    w2, h2 = cfg.patch_w // 2, cfg.patch_h // 2
    grid: dict[tuple[int, int], int] = {}
    nodes: list[Node] = []
    for iy, cy in enumerate(ys):
        for ix, cx in enumerate(xs):
            if _rect_sum(hole_sat, cy - h2, cy + h2, cx - w2, cx + w2) > 0:
                grid[(ix, iy)] = len(nodes)
                nodes.append(Node(id=len(nodes), cx=cx, cy=cy, grid_ix=ix, grid_iy=iy))

    edges: list[tuple[int, int]] = []
    for (ix, iy), i in grid.items():
        for jx, jy in ((ix + 1, iy), (ix, iy + 1)):
            j = grid.get((jx, jy))
            if j is not None:
                edges.append((min(i, j), max(i, j)))
                nodes[i].neighbors.append(j)
                nodes[j].neighbors.append(i)
    for node in nodes:
        node.neighbors.sort()
    edges.sort()
    return PatchLattice(cfg, w, h, nodes=nodes, edges=edges)


def enumerate_labels(
    img: np.ndarray, mask: np.ndarray, depth: np.ndarray, cfg: LatticeConfig
) -> LabelSet:
    """Enumerate hole-free source patch centers on the label-stride grid.

    mean depth is computed over each footprint from ``depth`` (the pre-filled
    map; footprints are hole-free so the values equal the warped originals)
    and normalized to [0, 1].
    """
    mask = np.asarray(mask, dtype=bool)
    h, w = mask.shape
    if img.shape[:2] != mask.shape or depth.shape != mask.shape:
        raise ValueError("image, mask, and depth dimensions differ")
    w2, h2 = cfg.patch_w // 2, cfg.patch_h // 2
    cxs = np.arange(w2, w - w2 + 1, cfg.label_stride, dtype=np.int64)
    cys = np.arange(h2, h - h2 + 1, cfg.label_stride, dtype=np.int64)

    hole_sat = _sat(~mask)
    depth_sat = _sat(np.asarray(depth, dtype=np.float64))
    area = float(cfg.patch_w * cfg.patch_h)

    gx, gy = np.meshgrid(cxs, cys)  # row-major: y outer, x inner
    gx, gy = gx.ravel(), gy.ravel()
    holes_in = _rect_sum(hole_sat, gy - h2, gy + h2, gx - w2, gx + w2)
    ok = holes_in == 0
    if not ok.any():
        raise ValueError("no admissible source patch: every candidate footprint touches a hole")
    gx, gy = gx[ok], gy[ok]
    mean_depth = _rect_sum(depth_sat, gy - h2, gy + h2, gx - w2, gx + w2) / area / 255.0
    return LabelSet(xs=gx, ys=gy, depths=mean_depth)


def attach_labels(
    lattice: PatchLattice, labels: LabelSet, filled_depth: np.ndarray, mask: np.ndarray
) -> None:
    """Give every node the full label set and its reference depth.

    A node's reference depth is the mean pre-filled depth over the hole part
    of its footprint (normalized [0, 1]): the estimate of the disoccluded
    background it must be filled with. Known pixels are excluded because at
    border nodes they may lie on foreground and would drag the estimate
    toward depths the fill must avoid.
    """
    mask = np.asarray(mask, dtype=bool)
    depth = np.asarray(filled_depth, dtype=np.float64)
    lattice.labels = labels
    all_ids = np.arange(len(labels), dtype=np.int64)
    lattice.per_node_labels = [all_ids] * lattice.n_nodes

    hole = ~mask
    dsum = _sat(np.where(hole, depth, 0.0))
    hsum = _sat(hole)
    for node in lattice.nodes:
        sy, sx = lattice.cfg.footprint(node.cx, node.cy)
        n_hole = _rect_sum(hsum, sy.start, sy.stop, sx.start, sx.stop)
        if n_hole > 0:
            node.ref_depth = (
                _rect_sum(dsum, sy.start, sy.stop, sx.start, sx.stop) / n_hole / 255.0
            )
        else:
            node.ref_depth = float(depth[sy, sx].mean()) / 255.0


def classify_nodes(
    lattice: PatchLattice,
    filled_depth: np.ndarray,
    mask: np.ndarray,
    cfg=None,
) -> PatchLattice:
    """Zero out the data term of border nodes that lie over foreground.

    Per connected hole, a 2-class Otsu split of the depth values in the
    2-pixel known ring around the hole separates foreground from background.
    A border node is zeroed when more than 25% of its known footprint pixels
    fall in the near (foreground) class; it is then scheduled like an
    interior node and filled purely from neighborhood consistency.

    ``cfg`` (the warp configuration) is accepted for interface parity; the
    depth split alone identifies foreground-side nodes regardless of the
    camera direction.
    """
    mask = np.asarray(mask, dtype=bool)
    depth = np.asarray(filled_depth)
    hole = ~mask
    if not hole.any() or lattice.n_nodes == 0:
        return lattice

    comp, n_comp = ndimage.label(hole, structure=np.ones((3, 3), dtype=bool))
    thresholds: dict[int, int | None] = {}
    for k in range(1, n_comp + 1):
        ring = ndimage.binary_dilation(comp == k, structure=np.ones((3, 3), bool), iterations=2)
        ring &= mask
        vals = depth[ring]
        thresholds[k] = _otsu(vals) if vals.size else None

    for node in lattice.nodes:
        sy, sx = lattice.cfg.footprint(node.cx, node.cy)
        known_foot = mask[sy, sx]
        if not known_foot.any():
            node.zeroed = False  # interior: data term is zero via the mask already
            continue
        comps = comp[sy, sx][hole[sy, sx]]
        t = thresholds.get(int(np.bincount(comps).argmax()) if comps.size else 0)
        if t is None:
            node.zeroed = False
            continue
        near_frac = float((depth[sy, sx][known_foot] > t).mean())
        node.zeroed = near_frac > 0.25
    return lattice


def render_node_overlay(img: np.ndarray, lattice: PatchLattice) -> np.ndarray:
    """Debug view: patch outlines, yellow for zeroed nodes, green otherwise."""
    out = np.asarray(img).copy()
    for node in lattice.nodes:
        sy, sx = lattice.cfg.footprint(node.cx, node.cy)
        color = (255, 220, 0) if node.zeroed else (0, 255, 80)
        for c in range(3):
            out[sy.start, sx, c] = (out[sy.start, sx, c] // 2) + color[c] // 2
            out[sy.stop - 1, sx, c] = (out[sy.stop - 1, sx, c] // 2) + color[c] // 2
            out[sy, sx.start, c] = (out[sy, sx.start, c] // 2) + color[c] // 2
            out[sy, sx.stop - 1, c] = (out[sy, sx.stop - 1, c] // 2) + color[c] // 2
    return out


def _axis_positions(lo: int, hi: int, gap: int, patch: int, limit: int) -> list[int]:
    """Grid centers along one axis: spaced ``gap``, aligned to the hole
    bounding box at ``lo``, clamped so footprints stay inside [0, limit)."""
    half = patch // 2
    cmin, cmax = half, limit - half
    positions = []
    k = -((lo - cmin) // gap)  # smallest k with lo + k*gap >= cmin
    while lo + k * gap <= cmax:
        positions.append(lo + k * gap)
        k += 1
    if not positions:
        positions = [min(max(lo, cmin), cmax)]
    # Clamped end positions when the hole runs past the aligned coverage.
    if lo < positions[0] - half:
        positions.insert(0, cmin)
    if hi > positions[-1] + half - 1:
        positions.append(cmax)
    return sorted(set(positions))


def _sat(a: np.ndarray) -> np.ndarray:
    """Summed-area table with a zero border row/column."""
    s = np.zeros((a.shape[0] + 1, a.shape[1] + 1), dtype=np.float64)
    s[1:, 1:] = np.cumsum(np.cumsum(a, axis=0), axis=1)
    return s


def _rect_sum(sat: np.ndarray, y0, y1, x0, x1):
    """Sum over the half-open rectangle [y0, y1) x [x0, x1)."""
    return sat[y1, x1] - sat[y0, x1] - sat[y1, x0] + sat[y0, x0]


def _otsu(vals: np.ndarray) -> int | None:
    """Otsu threshold of 8-bit values; None when there is nothing to split.

    Classes are (<= t) far and (> t) near; t maximizes the between-class
    variance, ties to the lowest t.
    """
    vals = np.asarray(vals).astype(np.int64).ravel()
    hist = np.bincount(vals, minlength=256).astype(np.float64)
    if np.count_nonzero(hist) < 2:
        return None
    total = hist.sum()
    omega0 = np.cumsum(hist) / total
    mu = np.cumsum(hist * np.arange(256)) / total
    mu_total = mu[-1]
    omega1 = 1.0 - omega0
    valid = (omega0 > 0) & (omega1 > 0)
    sigma_b = np.zeros(256)
    sigma_b[valid] = (mu_total * omega0[valid] - mu[valid]) ** 2 / (
        omega0[valid] * omega1[valid]
    )
    return int(sigma_b.argmax())
