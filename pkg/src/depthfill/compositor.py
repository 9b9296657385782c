"""Render the completed image from a solved assignment.

Each node pastes its chosen source patch into the hole pixels of its
footprint; where footprints overlap, contributions are blended with weights
that sum to one per pixel. Known pixels are never touched.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lattice import PatchLattice


@dataclass(frozen=True)
class CompositeConfig:
    """blend: 'uniform' averages overlapping patches; 'feathered' weights
    them by a tent falling off linearly from the patch center (hides
    seams at patch boundaries)."""

    blend: str = "feathered"

    def __post_init__(self):
        if self.blend not in ("uniform", "feathered"):
            raise ValueError(f"blend must be 'uniform' or 'feathered', got {self.blend!r}")


def _patch_weights(cfg: CompositeConfig, w: int, h: int) -> np.ndarray:
    if cfg.blend == "uniform":
        return np.ones((h, w))
    dx = np.abs(np.arange(-w // 2, w // 2) + 0.5)
    dy = np.abs(np.arange(-h // 2, h // 2) + 0.5)
    wx = (w / 2 + 0.5) - dx
    wy = (h / 2 + 0.5) - dy
    return wy[:, None] * wx[None, :]


def _composite(
    arr: np.ndarray,
    mask: np.ndarray,
    lattice: PatchLattice,
    assignment: np.ndarray,
    cfg: CompositeConfig,
) -> np.ndarray:
    if lattice.labels is None:
        raise ValueError("lattice has no labels attached")
    mask = np.asarray(mask, dtype=bool)
    hole = ~mask
    out = np.asarray(arr).copy()
    if not hole.any():
        return out
    if len(assignment) != lattice.n_nodes:
        raise ValueError("assignment length does not match node count")

    f = arr.astype(np.float64)
    color = f.ndim == 3
    acc = np.zeros(f.shape, dtype=np.float64)
    wacc = np.zeros(mask.shape, dtype=np.float64)
    weights = _patch_weights(cfg, lattice.cfg.patch_w, lattice.cfg.patch_h)
    labels = lattice.labels

    for node in lattice.nodes:  # node-id order keeps accumulation deterministic
        lid = int(assignment[node.id])
        sy, sx = lattice.cfg.footprint(node.cx, node.cy)
        ly, lx = lattice.cfg.footprint(int(labels.xs[lid]), int(labels.ys[lid]))
        sel = hole[sy, sx]
        wsel = weights * sel
        if color:
            acc[sy, sx] += wsel[:, :, None] * f[ly, lx]
        else:
            acc[sy, sx] += wsel * f[ly, lx]
        wacc[sy, sx] += wsel

    uncovered = hole & (wacc == 0.0)
    if uncovered.any():
        ys, xs = np.nonzero(uncovered)
        raise RuntimeError(
            f"hole pixel ({xs[0]}, {ys[0]}) covered by no patch -- lattice construction bug"
        )
    fill = acc[hole] / (wacc[hole][:, None] if color else wacc[hole])
    out[hole] = np.clip(np.floor(fill + 0.5), 0, 255).astype(out.dtype)
    return out


def composite(
    img: np.ndarray,
    mask: np.ndarray,
    lattice: PatchLattice,
    assignment: np.ndarray,
    cfg: CompositeConfig,
) -> np.ndarray:
    """Completed image: known pixels copied, hole pixels blended from the
    assigned source patches (real-valued blend, round half away from zero)."""
    return _composite(img, mask, lattice, assignment, cfg)


def composite_depth(
    depth: np.ndarray,
    mask: np.ndarray,
    lattice: PatchLattice,
    assignment: np.ndarray,
    cfg: CompositeConfig,
) -> np.ndarray:
    """Same pasting rule applied to the depth samples."""
    return _composite(depth, mask, lattice, assignment, cfg)


def render_hole_boundary(img: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Debug view: known pixels adjacent to the hole tinted magenta."""
    mask = np.asarray(mask, dtype=bool)
    hole = ~mask
    grown = np.zeros_like(hole)
    grown[1:, :] |= hole[:-1, :]
    grown[:-1, :] |= hole[1:, :]
    grown[:, 1:] |= hole[:, :-1]
    grown[:, :-1] |= hole[:, 1:]
    boundary = grown & mask
    out = np.asarray(img).copy()
    out[boundary] = (out[boundary] // 2) + np.array([127, 0, 127], dtype=np.uint8)
    return out
