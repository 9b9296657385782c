"""Energy terms of the patch MRF.

A node's data cost is the masked SSD between the image content under its
footprint and a candidate source patch, plus the same masked SSD on the
depth map weighted by ``lambda_d``; only known pixels contribute (the mask
annihilates hole pixels). Adjacent nodes pay the SSD over their footprint
overlap, the depth mirror of it, and a fixed ``w0`` incoherence penalty when
their source patches are not spatially adjacent in the same arrangement.

Intensities and depths are normalized to [0, 1] before squaring so the
depth weight keeps its meaning of balancing one depth channel against three
color channels. Scalar functions below are the reference definitions;
:class:`PatchEnergy` evaluates the same quantities vectorized for the
solver.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .lattice import LatticeConfig, Node, PatchLattice


@dataclass(frozen=True)
class EnergyParams:
    """Weights of the energy model.

    ``w0 = None`` resolves to ``0.02 * patch area`` at pipeline setup so the
    incoherence penalty stays commensurate with patch SSD magnitudes.
    ``depth_prune_delta`` is the maximum |node ref depth - label mean depth|
    (normalized units) for a label to stay admissible; ``inf`` disables
    depth pruning.
    """

    lambda_d: float = 3.0
    w0: float | None = None
    depth_prune_delta: float = 0.1

    def __post_init__(self):
        if not math.isfinite(self.lambda_d) or self.lambda_d < 0:
            raise ValueError("lambda-d must be finite and >= 0")
        if self.w0 is not None and (not math.isfinite(self.w0) or self.w0 < 0):
            raise ValueError("w0 must be finite and >= 0")
        if math.isnan(self.depth_prune_delta) or self.depth_prune_delta < 0:
            raise ValueError("depth-delta must be >= 0")

    def resolved(self, cfg: LatticeConfig) -> "EnergyParams":
        if self.w0 is not None:
            return self
        return replace(self, w0=0.02 * cfg.patch_w * cfg.patch_h)


def _as_unit(arr: np.ndarray) -> np.ndarray:
    """uint8 arrays are normalized to [0, 1]; float arrays pass through."""
    arr = np.asarray(arr)
    if arr.dtype == np.uint8:
        return arr.astype(np.float64) / 255.0
    return arr.astype(np.float64)


def _check_footprint(cfg: LatticeConfig, cx: int, cy: int, shape) -> tuple[slice, slice]:
    sy, sx = cfg.footprint(cx, cy)
    if sy.start < 0 or sx.start < 0 or sy.stop > shape[0] or sx.stop > shape[1]:
        raise ValueError(f"footprint of center ({cx}, {cy}) out of bounds for {shape[1]}x{shape[0]}")
    return sy, sx


def node_potential_image(
    img: np.ndarray,
    mask: np.ndarray,
    p: tuple[int, int],
    x_p: tuple[int, int],
    cfg: LatticeConfig,
) -> float:
    """Masked SSD between the patch at node center p and the source patch at
    x_p, summed over all channels; hole pixels contribute nothing."""
    a = _as_unit(img)
    mask = np.asarray(mask, dtype=bool)
    py, px = _check_footprint(cfg, p[0], p[1], mask.shape)
    ly, lx = _check_footprint(cfg, x_p[0], x_p[1], mask.shape)
    if not mask[ly, lx].all():
        raise ValueError(f"label footprint at {x_p} overlaps the hole")
    m = mask[py, px].astype(np.float64)
    diff = a[py, px] - a[ly, lx]
    if diff.ndim == 3:
        return float((diff * diff * m[:, :, None]).sum())
    return float((diff * diff * m).sum())


def node_potential_depth(
    depth: np.ndarray,
    mask: np.ndarray,
    p: tuple[int, int],
    x_p: tuple[int, int],
    cfg: LatticeConfig,
) -> float:
    """Single-channel masked SSD on the (pre-filled) depth map."""
    return node_potential_image(depth, mask, p, x_p, cfg)


def node_potential(
    img: np.ndarray,
    depth: np.ndarray,
    mask: np.ndarray,
    node: Node,
    x_p: tuple[int, int],
    params: EnergyParams,
    cfg: LatticeConfig,
) -> float:
    """Combined data cost ``V_I + lambda_d * V_D``; exactly 0 for zeroed nodes."""
    if node.zeroed:
        return 0.0
    p = (node.cx, node.cy)
    v = node_potential_image(img, mask, p, x_p, cfg)
    if params.lambda_d > 0:
        v += params.lambda_d * node_potential_depth(depth, mask, p, x_p, cfg)
    return v


def _overlap_rect(cfg: LatticeConfig, p, q) -> tuple[int, int, int, int]:
    """Intersection of the two footprints, absolute half-open coords."""
    (py, px), (qy, qx) = cfg.footprint(p[0], p[1]), cfg.footprint(q[0], q[1])
    y0, y1 = max(py.start, qy.start), min(py.stop, qy.stop)
    x0, x1 = max(px.start, qx.start), min(px.stop, qx.stop)
    if y0 >= y1 or x0 >= x1:
        raise ValueError(f"nodes at {p} and {q} have no footprint overlap")
    return y0, y1, x0, x1


def pairwise_potential(
    img: np.ndarray,
    p: tuple[int, int],
    q: tuple[int, int],
    x_p: tuple[int, int],
    x_q: tuple[int, int],
    cfg: LatticeConfig,
) -> float:
    """SSD between the two source patches over the nodes' footprint overlap.

    Each overlap pixel t is read from patch x_p at offset t - p and from
    patch x_q at offset t - q, all channels, normalized intensities.
    """
    a = _as_unit(img)
    y0, y1, x0, x1 = _overlap_rect(cfg, p, q)
    ap = a[y0 - p[1] + x_p[1] : y1 - p[1] + x_p[1], x0 - p[0] + x_p[0] : x1 - p[0] + x_p[0]]
    aq = a[y0 - q[1] + x_q[1] : y1 - q[1] + x_q[1], x0 - q[0] + x_q[0] : x1 - q[0] + x_q[0]]
    diff = ap - aq
    return float((diff * diff).sum())


def coherence_term(
    p: tuple[int, int],
    q: tuple[int, int],
    x_p: tuple[int, int],
    x_q: tuple[int, int],
    params: EnergyParams,
) -> float:
    """w0 unless the source patches sit in the same arrangement as the nodes
    (x_p - x_q == p - q)."""
    if params.w0 is None:
        raise ValueError("w0 is unresolved; call EnergyParams.resolved() first")
    same = (x_p[0] - x_q[0] == p[0] - q[0]) and (x_p[1] - x_q[1] == p[1] - q[1])
    return 0.0 if same else params.w0


def prune_labels_by_depth(lattice: PatchLattice, params: EnergyParams, l_min: int = 3) -> PatchLattice:
    """Keep per node only labels within depth_prune_delta of its ref depth.

    When fewer than ``l_min`` survive, the ``l_min`` depth-closest labels are
    kept instead (ties to the lowest label index), so no node ever ends up
    with an empty set.
    """
    if lattice.labels is None or lattice.per_node_labels is None:
        raise ValueError("lattice has no labels attached")
    depths = lattice.labels.depths
    for node in lattice.nodes:
        ids = lattice.per_node_labels[node.id]
        dist = np.abs(depths[ids] - node.ref_depth)
        keep = ids[dist <= params.depth_prune_delta]
        if len(keep) < min(l_min, len(ids)):
            order = np.lexsort((ids, dist))[: min(l_min, len(ids))]
            keep = np.sort(ids[order])
        lattice.per_node_labels[node.id] = keep
    return lattice


def total_energy(
    assignment: np.ndarray,
    lattice: PatchLattice,
    img: np.ndarray,
    depth: np.ndarray,
    mask: np.ndarray,
    params: EnergyParams,
) -> float:
    """Full MRF energy of an assignment (global label index per node).

    Sum of the node data costs plus, per undirected edge, the overlap SSD,
    its depth mirror weighted by lambda_d, and the incoherence penalty.
    """
    if lattice.labels is None:
        raise ValueError("lattice has no labels attached")
    assignment = np.asarray(assignment)
    if len(assignment) != lattice.n_nodes:
        raise ValueError("assignment length does not match node count")
    labels = lattice.labels
    cfg = lattice.cfg

    def center(i: int) -> tuple[int, int]:
        return int(labels.xs[i]), int(labels.ys[i])

    e = 0.0
    for node in lattice.nodes:
        e += node_potential(img, depth, mask, node, center(assignment[node.id]), params, cfg)
    for i, j in lattice.edges:
        p = (lattice.nodes[i].cx, lattice.nodes[i].cy)
        q = (lattice.nodes[j].cx, lattice.nodes[j].cy)
        xp, xq = center(assignment[i]), center(assignment[j])
        e += pairwise_potential(img, p, q, xp, xq, cfg)
        if params.lambda_d > 0:
            e += params.lambda_d * pairwise_potential(depth, p, q, xp, xq, cfg)
        e += coherence_term(p, q, xp, xq, params)
    return e


class PatchEnergy:
    """Vectorized unary/pairwise tables backed by the image and depth map.

    Exposes the interface the solver consumes: ``labels_of``, ``unary``,
    ``pairwise`` (full edge term including the depth mirror and the
    incoherence penalty), plus graph accessors. Results match the scalar
    reference functions above.

    Construct after label pruning: unary vectors are cached against the
    per-node label sets as they are at first use.
    """

    def __init__(
        self,
        lattice: PatchLattice,
        img: np.ndarray,
        depth: np.ndarray,
        mask: np.ndarray,
        params: EnergyParams,
    ):
        if lattice.labels is None or lattice.per_node_labels is None:
            raise ValueError("lattice has no labels attached")
        self.lattice = lattice
        self.params = params.resolved(lattice.cfg)
        self.img = _as_unit(img)
        self.depth = _as_unit(depth)
        self.mask = np.asarray(mask, dtype=bool)
        self.cfg = lattice.cfg
        labels = lattice.labels
        self._lab_xs = labels.xs
        self._lab_ys = labels.ys
        self._center_to_id = {
            (int(x), int(y)): i for i, (x, y) in enumerate(zip(labels.xs, labels.ys))
        }
        self._unary_cache: dict[int, np.ndarray] = {}

    # -- graph accessors -------------------------------------------------

    @property
    def n_nodes(self) -> int:
        return self.lattice.n_nodes

    @property
    def edges(self) -> list[tuple[int, int]]:
        return self.lattice.edges

    def neighbors(self, p: int) -> list[int]:
        return self.lattice.neighbors(p)

    def labels_of(self, p: int) -> np.ndarray:
        return self.lattice.per_node_labels[p]

    def default_b_conf(self) -> float:
        """Confidence threshold scaled to patch area: -0.15 * w * h * 4
        channel-equivalents (3 color channels plus the weighted depth)."""
        return -0.15 * self.cfg.patch_w * self.cfg.patch_h * 4.0

    # -- energy tables ----------------------------------------------------

    def _gather(self, arr: np.ndarray, ids: np.ndarray, oy0: int, oy1: int, ox0: int, ox1: int):
        """Patch windows [oy0, oy1) x [ox0, ox1) (offsets from center) for
        the given label ids; shape (n, oh, ow[, 3])."""
        ys = self._lab_ys[ids][:, None, None] + np.arange(oy0, oy1)[None, :, None]
        xs = self._lab_xs[ids][:, None, None] + np.arange(ox0, ox1)[None, None, :]
        return arr[ys, xs]

    def unary(self, p: int) -> np.ndarray:
        """Data cost vector over node p's admissible labels."""
        cached = self._unary_cache.get(p)
        if cached is not None:
            return cached
        node = self.lattice.nodes[p]
        ids = self.labels_of(p)
        if node.zeroed:
            v = np.zeros(len(ids))
        else:
            sy, sx = self.cfg.footprint(node.cx, node.cy)
            m = self.mask[sy, sx].astype(np.float64)
            if m.sum() == 0.0:
                v = np.zeros(len(ids))
            else:
                t_img = self.img[sy, sx]
                t_dep = self.depth[sy, sx]
                h2, w2 = self.cfg.patch_h // 2, self.cfg.patch_w // 2
                v = np.empty(len(ids))
                lam = self.params.lambda_d
                for lo in range(0, len(ids), 4096):
                    chunk = ids[lo : lo + 4096]
                    gi = self._gather(self.img, chunk, -h2, h2, -w2, w2)
                    di = gi - t_img[None]
                    vv = np.einsum("nhwc,hw->n", di * di, m)
                    if lam > 0:
                        gd = self._gather(self.depth, chunk, -h2, h2, -w2, w2)
                        dd = gd - t_dep[None]
                        vv = vv + lam * np.einsum("nhw,hw->n", dd * dd, m)
                    v[lo : lo + len(chunk)] = vv
        self._unary_cache[p] = v
        return v

    def pairwise(self, p: int, q: int, ids_p: np.ndarray, ids_q: np.ndarray) -> np.ndarray:
        """Edge cost matrix (len(ids_p), len(ids_q)): overlap SSD on image
        and depth plus the incoherence penalty. ids_q must be sorted."""
        np_, nq = len(ids_p), len(ids_q)
        pn, qn = self.lattice.nodes[p], self.lattice.nodes[q]
        y0, y1, x0, x1 = _overlap_rect(self.cfg, (pn.cx, pn.cy), (qn.cx, qn.cy))

        def blocks(arr, ids, cx, cy):
            g = self._gather(arr, ids, y0 - cy, y1 - cy, x0 - cx, x1 - cx)
            return g.reshape(len(ids), -1)

        ap = blocks(self.img, ids_p, pn.cx, pn.cy)
        aq = blocks(self.img, ids_q, qn.cx, qn.cy)
        v = (
            (ap * ap).sum(axis=1)[:, None]
            + (aq * aq).sum(axis=1)[None, :]
            - 2.0 * (ap @ aq.T)
        )
        if self.params.lambda_d > 0:
            dp_ = blocks(self.depth, ids_p, pn.cx, pn.cy)
            dq = blocks(self.depth, ids_q, qn.cx, qn.cy)
            v += self.params.lambda_d * (
                (dp_ * dp_).sum(axis=1)[:, None]
                + (dq * dq).sum(axis=1)[None, :]
                - 2.0 * (dp_ @ dq.T)
            )
        np.maximum(v, 0.0, out=v)  # clip matmul cancellation noise

        # incoherence penalty: zero only where x_p - x_q == p - q
        w0 = self.params.w0
        pen = np.full((np_, nq), w0)
        dx, dy = pn.cx - qn.cx, pn.cy - qn.cy
        for i, lid in enumerate(ids_p):
            partner = self._center_to_id.get(
                (int(self._lab_xs[lid]) - dx, int(self._lab_ys[lid]) - dy)
            )
            if partner is not None:
                j = np.searchsorted(ids_q, partner)
                if j < nq and ids_q[j] == partner:
                    pen[i, j] = 0.0
        return v + pen

    def energy(self, assignment: np.ndarray) -> float:
        """Energy of a full assignment, via the same vectorized tables."""
        assignment = np.asarray(assignment)
        e = 0.0
        for p in range(self.n_nodes):
            ids = self.labels_of(p)
            pos = int(np.searchsorted(ids, assignment[p]))
            e += float(self.unary(p)[pos])
        one = np.empty(1, dtype=np.int64)
        two = np.empty(1, dtype=np.int64)
        for i, j in self.edges:
            one[0], two[0] = assignment[i], assignment[j]
            e += float(self.pairwise(i, j, one, two)[0, 0])
        return e
