"""Disocclusion filling for synthesized views.

Forward-warps a texture+depth pair to a virtual viewpoint, fills the
resulting disocclusions with a depth-aware patch MRF solved by priority
belief propagation, and scores the result with PSNR-Y/SSIM.
"""

from .compositor import CompositeConfig, composite, composite_depth
from .dibr import WarpConfig, WarpResult, close_cracks, fill_depth_holes, forward_warp
from .errors import (
    CorruptFileError,
    DepthfillError,
    ImageIOError,
    PipelineError,
    UnsupportedFormatError,
)
from .imaging import (
    load_depth,
    load_image,
    load_mask,
    rgb_to_luma,
    save_depth,
    save_image,
    save_mask,
)
from .lattice import LatticeConfig, PatchLattice, attach_labels, build_lattice, classify_nodes, enumerate_labels
from .metrics import QualityReport, psnr_y, quality_report, ssim
from .pipeline import RunConfig, run_pipeline
from .potentials import EnergyParams, PatchEnergy, prune_labels_by_depth, total_energy
from .solver import (
    DenseTables,
    Diagnostics,
    Graph,
    SolverParams,
    brute_force_solve,
    run_priority_bp,
)

__version__ = "0.1.0"
