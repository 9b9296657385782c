"""Command-line interface.

    depthfill run  --texture t.png --depth d.pgm --out DIR [options]
    depthfill run  --skip-warp --virtual v.png --virtual-depth vd.pgm \
                   --mask m.pgm --out DIR [options]
    depthfill warp --texture t.png --depth d.pgm --out DIR [options]
    depthfill eval --reference r.png --test t.png [--mask m.pgm]

Options may also come from a flat key=value config file (`--config FILE`,
one pair per line, `#` comments, keys named like the flags without the
leading dashes); explicit flags override file values. Exit codes: 0 ok,
1 usage, 2 I/O failure, 3 pipeline failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

from . import compositor, dibr, imaging, lattice, metrics, potentials, solver
from .errors import DepthfillError, ImageIOError, PipelineError
from .pipeline import RunConfig, run_pipeline

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_PIPELINE = 0, 1, 2, 3


class UsageError(ValueError):
    pass


def _parse_size(text: str) -> tuple[int, int]:
    try:
        a, b = text.lower().split("x")
        return int(a), int(b)
    except ValueError as exc:
        raise UsageError(f"expected <W>x<H>, got {text!r}") from exc


def _parse_bool(text: str) -> bool:
    if text.lower() in ("1", "true", "yes", "on"):
        return True
    if text.lower() in ("0", "false", "no", "off"):
        return False
    raise UsageError(f"expected a boolean, got {text!r}")


def _parse_float(text: str) -> float:
    try:
        v = float(text)
    except ValueError as exc:
        raise UsageError(f"expected a number, got {text!r}") from exc
    if math.isnan(v):
        raise UsageError("NaN is not a valid value")
    return v


# key -> (converter, default); single source of truth for flags and config files
_OPTIONS: dict[str, tuple] = {
    "texture": (str, None),
    "depth": (str, None),
    "reference": (str, None),
    "skip-warp": (_parse_bool, False),
    "virtual": (str, None),
    "virtual-depth": (str, None),
    "mask": (str, None),
    "invert-depth": (_parse_bool, False),
    "baseline-gain": (_parse_float, 8.0),
    "depth-offset": (_parse_float, 0.0),
    "direction": (str, "right"),
    "patch": (_parse_size, (14, 14)),
    "gap": (_parse_size, (7, 7)),
    "label-stride": (int, 2),
    "lambda-d": (_parse_float, 3.0),
    "w0": (_parse_float, None),
    "depth-delta": (_parse_float, 0.1),
    "bconf": (_parse_float, None),
    "labels-min": (int, 3),
    "labels-max": (int, 50),
    "iters": (int, 2),
    "damping": (_parse_float, 0.0),
    "blend": (str, "feathered"),
    "threads": (int, None),
    "seed": (int, None),
    "out": (str, None),
    "debug": (_parse_bool, False),
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors exit 1, not argparse's 2
        raise UsageError(message)


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("inputs")
    g.add_argument("--texture", help="reference-view texture (PNG/PPM)")
    g.add_argument("--depth", help="reference-view depth map (PGM/PNG gray)")
    g.add_argument("--reference", help="ground-truth virtual view for metrics")
    g.add_argument("--skip-warp", action="store_const", const=True, default=None,
                   help="consume a precomputed virtual view instead of warping")
    g.add_argument("--virtual", help="precomputed virtual view (with --skip-warp)")
    g.add_argument("--virtual-depth", help="precomputed warped depth (with --skip-warp)")
    g.add_argument("--mask", help="precomputed hole mask, 0=hole (with --skip-warp)")
    g.add_argument("--invert-depth", action="store_const", const=True, default=None,
                   help="input depth uses smaller=nearer; invert on load")
    w = p.add_argument_group("warp")
    w.add_argument("--baseline-gain", help="disparity in px at depth 255 (default 8)")
    w.add_argument("--depth-offset", help="disparity in px at depth 0 (default 0)")
    w.add_argument("--direction", choices=["left", "right"], help="camera movement (default right)")
    l = p.add_argument_group("lattice")
    l.add_argument("--patch", help="patch size WxH, even (default 14x14)")
    l.add_argument("--gap", help="node spacing GXxGY, < patch (default 7x7)")
    l.add_argument("--label-stride", help="source-patch grid stride (default 2)")
    e = p.add_argument_group("energy")
    e.add_argument("--lambda-d", help="depth term weight (default 3)")
    e.add_argument("--w0", help="incoherence penalty (default 0.02*patch area)")
    e.add_argument("--depth-delta", help="label depth pruning radius, 'inf' to disable (default 0.1)")
    s = p.add_argument_group("solver")
    s.add_argument("--bconf", help="confidence threshold on relative belief (<= 0)")
    s.add_argument("--labels-min", help="pruning floor (default 3)")
    s.add_argument("--labels-max", help="pruning cap (default 50)")
    s.add_argument("--iters", help="forward/backward passes (default 2)")
    s.add_argument("--damping", help="message damping in [0,1) (default 0)")
    o = p.add_argument_group("output")
    o.add_argument("--blend", choices=["uniform", "feathered"], help="patch blending (default feathered)")
    o.add_argument("--threads", help="worker cap; never changes results")
    o.add_argument("--seed", help="reserved for synthetic test-instance generation")
    o.add_argument("--out", help="output directory")
    o.add_argument("--debug", action="store_const", const=True, default=None,
                   help="write lattice/boundary overlay images")
    p.add_argument("--config", help="key=value config file; flags override it")


def parse_config(path: str | Path) -> dict:
    """Read a flat key=value config file into converted option values."""
    values: dict = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key = value, got {raw!r}")
        key, _, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if key not in _OPTIONS:
            raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
        conv = _OPTIONS[key][0]
        try:
            values[key] = conv(val)
        except (UsageError, ValueError) as exc:
            raise UsageError(f"{path}:{lineno}: bad value for {key!r}: {exc}") from exc
    return values


def _effective(ns: argparse.Namespace, file_values: dict) -> dict:
    """Merge flag values over config-file values over defaults."""
    out = {}
    for key, (conv, default) in _OPTIONS.items():
        flag_val = getattr(ns, key.replace("-", "_"), None)
        if flag_val is not None:
            out[key] = conv(flag_val) if isinstance(flag_val, str) else flag_val
        elif key in file_values:
            out[key] = file_values[key]
        else:
            out[key] = default
    return out


def _build_run_config(opts: dict) -> RunConfig:
    def req(key):
        if opts[key] is None:
            raise UsageError(f"missing required option: --{key}")
        return opts[key]

    try:
        warp = dibr.WarpConfig(
            baseline_gain=opts["baseline-gain"],
            depth_offset=opts["depth-offset"],
            direction=opts["direction"],
        )
        pw, ph = opts["patch"]
        gx, gy = opts["gap"]
        lat = lattice.LatticeConfig(
            patch_w=pw, patch_h=ph, gap_x=gx, gap_y=gy, label_stride=opts["label-stride"]
        )
        energy = potentials.EnergyParams(
            lambda_d=opts["lambda-d"], w0=opts["w0"], depth_prune_delta=opts["depth-delta"]
        )
        solv = solver.SolverParams(
            b_conf=opts["bconf"],
            l_min=opts["labels-min"],
            l_max=opts["labels-max"],
            max_iters=opts["iters"],
            damping=opts["damping"],
        )
        comp = compositor.CompositeConfig(blend=opts["blend"])
    except ValueError as exc:
        raise UsageError(str(exc)) from exc

    cfg = RunConfig(
        out_dir=Path(req("out")),
        texture=Path(opts["texture"]) if opts["texture"] else None,
        depth=Path(opts["depth"]) if opts["depth"] else None,
        reference=Path(opts["reference"]) if opts["reference"] else None,
        skip_warp=opts["skip-warp"],
        virtual=Path(opts["virtual"]) if opts["virtual"] else None,
        virtual_depth=Path(opts["virtual-depth"]) if opts["virtual-depth"] else None,
        mask=Path(opts["mask"]) if opts["mask"] else None,
        invert_depth=opts["invert-depth"],
        warp=warp,
        lattice=lat,
        energy=energy,
        solver=solv,
        composite=comp,
        threads=opts["threads"],
        seed=opts["seed"],
        debug=opts["debug"],
    )
    try:
        cfg.validate()
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    return cfg


def _cmd_run(ns: argparse.Namespace) -> int:
    file_values = parse_config(ns.config) if ns.config else {}
    cfg = _build_run_config(_effective(ns, file_values))
    report = run_pipeline(cfg)
    if "metrics" in report:
        m = report["metrics"]
        print(
            f"psnr_y {m['psnr_y_full']:.2f} dB  (holes {m['psnr_y_holes']:.2f} dB)  "
            f"ssim {m['ssim_full']:.4f}  (holes {m['ssim_holes']:.4f})"
        )
    print(f"wrote {cfg.out_dir / 'completed.png'}")
    return EXIT_OK


def _cmd_warp(ns: argparse.Namespace) -> int:
    file_values = parse_config(ns.config) if ns.config else {}
    opts = _effective(ns, file_values)
    if opts["out"] is None or opts["texture"] is None or opts["depth"] is None:
        raise UsageError("warp requires --texture, --depth, and --out")
    warp_cfg = dibr.WarpConfig(
        baseline_gain=opts["baseline-gain"],
        depth_offset=opts["depth-offset"],
        direction=opts["direction"],
    )
    try:
        texture = imaging.load_image(opts["texture"])
    except (ImageIOError, OSError) as exc:
        raise PipelineError("load_texture", str(exc), io=True) from exc
    try:
        depth = imaging.load_depth(opts["depth"])
    except (ImageIOError, OSError) as exc:
        raise PipelineError("load_depth", str(exc), io=True) from exc
    if opts["invert-depth"]:
        depth = 255 - depth
    res = dibr.forward_warp(texture, depth, warp_cfg)
    dibr.close_cracks(res)
    out = Path(opts["out"])
    out.mkdir(parents=True, exist_ok=True)
    imaging.save_image(res.image, out / "virtual.png")
    imaging.save_depth(res.depth, out / "virtual_depth.pgm")
    imaging.save_mask(res.known, out / "hole_mask.pgm")
    print(f"wrote {out / 'virtual.png'} ({int((~res.known).sum())} hole pixels)")
    return EXIT_OK


def _cmd_eval(ns: argparse.Namespace) -> int:
    try:
        reference = imaging.load_image(ns.reference)
        test = imaging.load_image(ns.test)
        known = imaging.load_mask(ns.mask) if ns.mask else None
    except (ImageIOError, OSError) as exc:
        raise PipelineError("load_reference", str(exc), io=True) from exc
    try:
        if known is not None:
            report = metrics.quality_report(reference, test, ~known).to_dict()
        else:
            report = {
                "psnr_y_full": metrics.psnr_y(reference, test),
                "ssim_full": metrics.ssim(reference, test),
            }
    except ValueError as exc:
        raise PipelineError("metrics", str(exc)) from exc
    print(json.dumps(report, indent=2))
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = _Parser(prog="depthfill", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="full pipeline: warp, complete, score")
    _add_run_flags(p_run)
    p_run.set_defaults(fn=_cmd_run)

    p_warp = sub.add_parser("warp", help="forward-warp only")
    _add_run_flags(p_warp)
    p_warp.set_defaults(fn=_cmd_warp)

    p_eval = sub.add_parser("eval", help="metrics between two images")
    p_eval.add_argument("--reference", required=True)
    p_eval.add_argument("--test", required=True)
    p_eval.add_argument("--mask", help="hole mask: metrics also restricted to holes")
    p_eval.set_defaults(fn=_cmd_eval)

    try:
        ns = parser.parse_args(argv)
        return ns.fn(ns)
    except UsageError as exc:
        print(f"depthfill: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except PipelineError as exc:
        print(f"depthfill: error at stage '{exc.stage}': {exc.message}", file=sys.stderr)
        return EXIT_IO if exc.io else EXIT_PIPELINE
    except (ImageIOError, OSError) as exc:
        print(f"depthfill: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except DepthfillError as exc:
        print(f"depthfill: error: {exc}", file=sys.stderr)
        return EXIT_PIPELINE


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
