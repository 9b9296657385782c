"""End-to-end pipeline: warp (or ingest a precomputed virtual view), build
the patch lattice, solve the MRF, composite, and score.

Every stage is wrapped so failures surface as a single-line diagnostic
naming the stage; I/O stages and compute stages map to different CLI exit
codes. All artifacts land in the output directory:

    virtual.png           virtual view before completion
    hole_mask.pgm         disocclusion mask (0 = hole, 255 = known)
    completed.png         completed virtual view
    completed_depth.pgm   completed depth map
    report.json           parameter echo, energy breakdown, diagnostics,
                          quality metrics when a reference is given
    debug_lattice.png / debug_boundary.png   with debug enabled
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import compositor, dibr, imaging, lattice as lattice_mod, metrics, potentials, solver
from .errors import DepthfillError, PipelineError

_IO_STAGES = ("load", "write")


@dataclass
class RunConfig:
    """Fully resolved inputs and parameters for one pipeline run."""

    out_dir: Path
    texture: Path | None = None
    depth: Path | None = None
    reference: Path | None = None
    skip_warp: bool = False
    virtual: Path | None = None
    virtual_depth: Path | None = None
    mask: Path | None = None
    invert_depth: bool = False
    warp: dibr.WarpConfig = field(default_factory=dibr.WarpConfig)
    lattice: lattice_mod.LatticeConfig = field(default_factory=lattice_mod.LatticeConfig)
    energy: potentials.EnergyParams = field(default_factory=potentials.EnergyParams)
    solver: solver.SolverParams = field(default_factory=solver.SolverParams)
    composite: compositor.CompositeConfig = field(default_factory=compositor.CompositeConfig)
    threads: int | None = None
    seed: int | None = None
    debug: bool = False

    def validate(self) -> None:
        if self.skip_warp:
            needed = {"virtual": self.virtual, "virtual_depth": self.virtual_depth, "mask": self.mask}
        else:
            needed = {"texture": self.texture, "depth": self.depth}
        if self.reference is not None:
            needed["reference"] = self.reference
        for key, path in needed.items():
            if path is None:
                raise ValueError(f"missing required input: --{key.replace('_', '-')}")
            if not Path(path).is_file():
                raise PipelineError(f"load_{key}", f"file not found: {path}", io=True)

    def echo(self) -> dict:
        """Every effective parameter value, for the JSON report."""
        energy = self.energy.resolved(self.lattice)
        return {
            "texture": str(self.texture) if self.texture else None,
            "depth": str(self.depth) if self.depth else None,
            "reference": str(self.reference) if self.reference else None,
            "skip_warp": self.skip_warp,
            "virtual": str(self.virtual) if self.virtual else None,
            "virtual_depth": str(self.virtual_depth) if self.virtual_depth else None,
            "mask": str(self.mask) if self.mask else None,
            "invert_depth": self.invert_depth,
            "baseline_gain": self.warp.baseline_gain,
            "depth_offset": self.warp.depth_offset,
            "direction": self.warp.direction,
            "patch": f"{self.lattice.patch_w}x{self.lattice.patch_h}",
            "gap": f"{self.lattice.gap_x}x{self.lattice.gap_y}",
            "label_stride": self.lattice.label_stride,
            "lambda_d": energy.lambda_d,
            "depth_term_active": energy.lambda_d > 0,
            "w0": energy.w0,
            "depth_delta": energy.depth_prune_delta,
            "bconf": self.solver.b_conf,
            "labels_min": self.solver.l_min,
            "labels_max": self.solver.l_max,
            "iters": self.solver.max_iters,
            "damping": self.solver.damping,
            "blend": self.composite.blend,
            "threads": self.threads,
            "seed": self.seed,
            "out": str(self.out_dir),
        }


def _stage(name: str, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except PipelineError:
        raise
    except (DepthfillError, OSError, ValueError, RuntimeError) as exc:
        io = any(name.startswith(s) for s in _IO_STAGES)
        raise PipelineError(name, str(exc), io=io) from exc


def run_pipeline(cfg: RunConfig) -> dict:
    """Run the full pipeline; returns the report dict (also written to disk)."""
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    report: dict = {"config": cfg.echo()}

    if cfg.skip_warp:
        virtual = _stage("load_virtual", imaging.load_image, cfg.virtual)
        vdepth = _stage("load_virtual_depth", imaging.load_depth, cfg.virtual_depth)
        known = _stage("load_mask", imaging.load_mask, cfg.mask)
        if cfg.invert_depth:
            vdepth = 255 - vdepth
        if virtual.shape[:2] != vdepth.shape or virtual.shape[:2] != known.shape:
            raise PipelineError("load_virtual", "virtual view, depth, and mask dimensions differ")
        warped = dibr.WarpResult(image=virtual, depth=vdepth, known=known)
        report["warp"] = {"skipped": True, "hole_pixels": int((~known).sum())}
    else:
        texture = _stage("load_texture", imaging.load_image, cfg.texture)
        depth = _stage("load_depth", imaging.load_depth, cfg.depth)
        if cfg.invert_depth:
            depth = 255 - depth
        warped = _stage("warp", dibr.forward_warp, texture, depth, cfg.warp)
        cracks = _stage("warp", dibr.close_cracks, warped)
        report["warp"] = {
            "skipped": False,
            "hole_pixels": int((~warped.known).sum()),
            "cracks_closed": cracks,
        }

    reference = None
    if cfg.reference is not None:
        reference = _stage("load_reference", imaging.load_image, cfg.reference)

    _stage("write_outputs", imaging.save_image, warped.image, cfg.out_dir / "virtual.png")
    _stage("write_outputs", imaging.save_mask, warped.known, cfg.out_dir / "hole_mask.pgm")

    known = warped.known
    holes = ~known
    filled_depth = _stage("fill_depth", dibr.fill_depth_holes, warped.depth, known, cfg.warp) \
        if holes.any() else warped.depth

    grid = _stage("build_lattice", lattice_mod.build_lattice, known, cfg.lattice)
    energy_params = cfg.energy.resolved(cfg.lattice)

    if grid.n_nodes == 0:
        completed, completed_depth = warped.image.copy(), warped.depth.copy()
        report["lattice"] = {"nodes": 0, "edges": 0, "labels": 0, "zeroed_nodes": 0}
        report["solver"] = {"skipped": True}
        report["energy"] = {"node_total": 0.0, "pairwise_total": 0.0, "coherence_total": 0.0, "total": 0.0}
    else:
        labels = _stage(
            "enumerate_labels", lattice_mod.enumerate_labels,
            warped.image, known, filled_depth, cfg.lattice,
        )
        _stage("enumerate_labels", lattice_mod.attach_labels, grid, labels, filled_depth, known)
        _stage("classify_nodes", lattice_mod.classify_nodes, grid, filled_depth, known, cfg.warp)
        _stage("prune_labels", potentials.prune_labels_by_depth, grid, energy_params, cfg.solver.l_min)
        report["lattice"] = {
            "nodes": grid.n_nodes,
            "edges": len(grid.edges),
            "labels": len(labels),
            "zeroed_nodes": sum(1 for n in grid.nodes if n.zeroed),
            "mean_labels_per_node": float(
                np.mean([len(ids) for ids in grid.per_node_labels])
            ),
        }

        tables = _stage(
            "energies", potentials.PatchEnergy,
            grid, warped.image, filled_depth, known, energy_params,
        )
        assignment, diag = _stage("solve", solver.run_priority_bp, grid, tables, cfg.solver)
        report["solver"] = {
            "skipped": False,
            "passes": diag.passes,
            "converged": diag.converged,
            "final_energy": diag.final_energy,
            "labels_pruned": diag.labels_pruned,
            "commits": diag.commits,
        }
        report["energy"] = _stage(
            "energies", _energy_breakdown, assignment, grid, warped, filled_depth, energy_params
        )
        completed = _stage(
            "composite", compositor.composite,
            warped.image, known, grid, assignment, cfg.composite,
        )
        completed_depth = _stage(
            "composite", compositor.composite_depth,
            filled_depth, known, grid, assignment, cfg.composite,
        )
        if cfg.debug:
            overlay = lattice_mod.render_node_overlay(warped.image, grid)
            _stage("write_outputs", imaging.save_image, overlay, cfg.out_dir / "debug_lattice.png")
            boundary = compositor.render_hole_boundary(warped.image, known)
            _stage("write_outputs", imaging.save_image, boundary, cfg.out_dir / "debug_boundary.png")

    _stage("write_outputs", imaging.save_image, completed, cfg.out_dir / "completed.png")
    _stage("write_outputs", imaging.save_depth, completed_depth, cfg.out_dir / "completed_depth.pgm")

    if reference is not None:
        if reference.shape != completed.shape:
            raise PipelineError("metrics", "reference and completed image dimensions differ")
        qr = _stage("metrics", metrics.quality_report, reference, completed, holes)
        report["metrics"] = qr.to_dict()

    _stage(
        "write_outputs",
        lambda: (cfg.out_dir / "report.json").write_text(json.dumps(report, indent=2) + "\n"),
    )
    return report


def _energy_breakdown(assignment, grid, warped, filled_depth, params) -> dict:
    labels = grid.labels
    cfg = grid.cfg
    node_total = 0.0
    pair_total = 0.0
    coh_total = 0.0

    def center(i):
        return int(labels.xs[i]), int(labels.ys[i])

    for node in grid.nodes:
        node_total += potentials.node_potential(
            warped.image, filled_depth, warped.known, node, center(assignment[node.id]), params, cfg
        )
    for i, j in grid.edges:
        p = (grid.nodes[i].cx, grid.nodes[i].cy)
        q = (grid.nodes[j].cx, grid.nodes[j].cy)
        xp, xq = center(assignment[i]), center(assignment[j])
        pair_total += potentials.pairwise_potential(warped.image, p, q, xp, xq, cfg)
        if params.lambda_d > 0:
            pair_total += params.lambda_d * potentials.pairwise_potential(
                filled_depth, p, q, xp, xq, cfg
            )
        coh_total += potentials.coherence_term(p, q, xp, xq, params)
    return {
        "node_total": node_total,
        "pairwise_total": pair_total,
        "coherence_total": coh_total,
        "total": node_total + pair_total + coh_total,
    }
