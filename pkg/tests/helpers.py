"""Shared scene builders and synthetic MRF instances for the test suite."""

from __future__ import annotations

import numpy as np

from depthfill.solver import DenseTables, Graph

STRIPE_A = (200, 60, 40)
STRIPE_B = (30, 170, 220)


def stripes(size: int = 64, period: int = 8) -> np.ndarray:
    """Vertical color stripes of the given period."""
    img = np.empty((size, size, 3), dtype=np.uint8)
    phase = (np.arange(size) % period) < (period // 2)
    img[:, phase] = STRIPE_A
    img[:, ~phase] = STRIPE_B
    return img


def checkerboard(size: int = 64, period: int = 8) -> np.ndarray:
    """Checkerboard with tiles of period/2, periodic with the given period."""
    img = np.empty((size, size, 3), dtype=np.uint8)
    half = period // 2
    yy, xx = np.meshgrid(np.arange(size), np.arange(size), indexing="ij")
    tile = ((yy // half) + (xx // half)) % 2 == 0
    img[tile] = STRIPE_A
    img[~tile] = STRIPE_B
    return img


def central_hole_mask(size: int = 64, hole: int = 16) -> np.ndarray:
    known = np.ones((size, size), dtype=bool)
    lo = (size - hole) // 2
    known[lo : lo + hole, lo : lo + hole] = False
    return known


def bleeding_scene(width: int = 96, height: int = 64):
    """Uniform red foreground square at depth 255 over period-8 textured
    background at depth 60; warping this rightward opens a disocclusion on
    the right of the square."""
    img = stripes(size=max(width, height))[:height, :width].copy()
    depth = np.full((height, width), 60, dtype=np.uint8)
    img[24:40, 24:40] = (255, 0, 0)
    depth[24:40, 24:40] = 255
    return img, depth


def red_fraction(img: np.ndarray, region: np.ndarray) -> float:
    """Fraction of region pixels channel-wise within 30 of pure red."""
    if not region.any():
        return 0.0
    px = img[region].astype(np.int64)
    near = (
        (np.abs(px[:, 0] - 255) < 30)
        & (np.abs(px[:, 1]) < 30)
        & (np.abs(px[:, 2]) < 30)
    )
    return float(near.mean())


def random_chain(rng: np.random.Generator, max_nodes: int = 6, max_labels: int = 6):
    """Random chain MRF with dense tables; returns (graph, tables)."""
    n = int(rng.integers(2, max_nodes + 1))
    k = int(rng.integers(2, max_labels + 1))
    edges = [(i, i + 1) for i in range(n - 1)]
    return _random_tables(rng, Graph(n, edges), [k] * n)


def random_grid(rng: np.random.Generator, rows: int, cols: int, max_labels: int = 4):
    """Random loopy grid MRF with dense tables; returns (graph, tables)."""
    n = rows * cols
    edges = []
    for r in range(rows):
        for c in range(cols):
            i = r * cols + c
            if c + 1 < cols:
                edges.append((i, i + 1))
            if r + 1 < rows:
                edges.append((i, i + cols))
    k = int(rng.integers(2, max_labels + 1))
    return _random_tables(rng, Graph(n, edges), [k] * n)


def _random_tables(rng: np.random.Generator, graph: Graph, sizes: list[int]):
    unary = [rng.uniform(0.0, 1.0, size=k) for k in sizes]
    pairwise = {
        (i, j): rng.uniform(0.0, 1.0, size=(sizes[i], sizes[j])) for i, j in graph.edges
    }
    return graph, DenseTables(unary, pairwise)
