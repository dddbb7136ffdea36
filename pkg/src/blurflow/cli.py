"""Command-line entry point.

``blurflow run`` estimates flow for one frame pair; ``blurflow bench`` runs
the synthetic benchmark and writes a results table.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path
from typing import List, Optional

from . import __version__
from .bench import (
    RESULT_FIELDS, compute_aae, compute_aee, filter_ground_truth, run_case, standard_suite,
    sweep_motion_angle, sweep_noise, with_mode, write_results_csv,
)
from .config import ConfigError, load_config
from .imgcore import to_luminance
from .io import FormatError, read_flo, read_image, write_flo, write_image, write_kernel
from .motion import combine_motions, load_motion_channel
from .pipeline import MODES, PipelineConfig, PipelineError, run
from .viz import render_error_map, render_flow_color

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NUMERICAL = 3

log = logging.getLogger("blurflow")


class InputError(Exception):
    pass


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="blurflow", description="Blur-robust optical flow.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="estimate flow between two frames")
    r.add_argument("--frame1", required=True, type=Path)
    r.add_argument("--frame2", required=True, type=Path)
    r.add_argument("--prev", type=Path, help="frame before frame1 (checked, not consumed)")
    r.add_argument("--next", type=Path, help="frame after frame2 (checked, not consumed)")
    src = r.add_mutually_exclusive_group(required=True)
    src.add_argument("--motion", type=Path, help="motion channel CSV (frameIndex,r,theta)")
    src.add_argument("--auto", action="store_true", help="estimate the motion direction from the flow")
    r.add_argument("--motion-index", type=int, default=None,
                   help="frame index j of frame1's interval; rows j and j+1 are used (default: first row)")
    r.add_argument("--mode", choices=MODES, default=None)
    r.add_argument("--config", type=Path)
    r.add_argument("--out-flo", required=True, type=Path)
    r.add_argument("--out-kernel1", type=Path)
    r.add_argument("--out-kernel2", type=Path)
    r.add_argument("--out-vis", type=Path)
    r.add_argument("--out-err", type=Path)
    r.add_argument("--gt", type=Path, help="ground-truth .flo for scoring")
    r.add_argument("--seed", type=int, default=None)
    r.add_argument("--log-level", default="INFO")

    b = sub.add_parser("bench", help="run the synthetic benchmark")
    b.add_argument("--out", required=True, type=Path, help="results CSV")
    b.add_argument("--size", type=int, default=64)
    b.add_argument("--modes", nargs="+", choices=MODES, default=list(MODES))
    b.add_argument("--lambdas", nargs="*", type=float, default=[],
                   help="motion-direction perturbations in degrees (moblur only)")
    b.add_argument("--noise", nargs="*", type=float, default=[],
                   help="salt-and-pepper densities (every mode)")
    b.add_argument("--kernel-size", type=int, default=11, help="finest-level kernel side")
    b.add_argument("--config", type=Path)
    b.add_argument("--log-level", default="WARNING")
    return parser


def _load_config(args) -> PipelineConfig:
    cfg = PipelineConfig()
    if args.config is not None:
        if not args.config.is_file():
            raise InputError(f"config file not found: {args.config}")
        cfg = load_config(args.config, cfg)
    return cfg


def _select_thetas(path: Path, index: Optional[int]) -> List[float]:
    samples = load_motion_channel(path)
    by_index = {s.frame_index: s for s in samples}
    if not samples:
        raise InputError(f"{path}: motion channel is empty")
    j = samples[0].frame_index if index is None else index
    if j not in by_index or j + 1 not in by_index:
        raise InputError(f"{path}: need motion rows for frame indices {j} and {j + 1}")
    m1, m2 = by_index[j], by_index[j + 1]
    return [m1.theta, m2.theta, combine_motions(m1, m2).theta]


def _cmd_run(args) -> int:
    cfg = _load_config(args)
    mode = "auto" if args.auto else (args.mode or (cfg.mode if cfg.mode != "auto" else "moblur"))
    if args.auto and args.mode not in (None, "auto"):
        raise InputError("--auto conflicts with --mode " + args.mode)
    if not args.auto and mode == "auto":
        raise InputError("mode 'auto' requires --auto instead of --motion")
    cfg = dataclasses.replace(cfg, mode=mode)
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, ransac=dataclasses.replace(cfg.ransac, seed=args.seed))
    if args.out_err is not None and args.gt is None:
        raise InputError("--out-err needs --gt")

    for p in (args.frame1, args.frame2, args.prev, args.next, args.motion, args.gt):
        if p is not None and not p.is_file():
            raise InputError(f"file not found: {p}")
    I1 = read_image(args.frame1)
    I2 = read_image(args.frame2)
    if I1.shape[:2] != I2.shape[:2]:
        raise InputError(f"frame sizes differ: {I1.shape[:2]} vs {I2.shape[:2]}")
    for p in (args.prev, args.next):
        if p is not None and read_image(p).shape[:2] != I1.shape[:2]:
            raise InputError(f"{p}: size differs from frame1")
    thetas = None if args.auto else _select_thetas(args.motion, args.motion_index)
    gt = read_flo(args.gt) if args.gt is not None else None
    if gt is not None and gt.shape[:2] != I1.shape[:2]:
        raise InputError("ground-truth flow size differs from the frames")

    result = run(I1, I2, cfg, thetas)

    write_flo(args.out_flo, result.flow)
    if args.out_kernel1:
        write_kernel(args.out_kernel1, result.k1)
    if args.out_kernel2:
        write_kernel(args.out_kernel2, result.k2)
    if args.out_vis:
        write_image(args.out_vis, render_flow_color(result.flow))
    if gt is not None:
        mask = filter_ground_truth(to_luminance(I1), to_luminance(I2), gt, float("inf"))
        aee = compute_aee(result.flow, gt, mask)
        aae = compute_aae(result.flow, gt, mask)
        print(f"AEE {aee:.4f} AAE {aae:.3f}")
        if args.out_err:
            write_image(args.out_err, render_error_map(result.flow, gt, mask))
    return EXIT_OK


def _cmd_bench(args) -> int:
    cfg = _load_config(args)
    cfg = dataclasses.replace(cfg, kernel=dataclasses.replace(cfg.kernel, kernel_size=args.kernel_size))
    rows = []
    for case in standard_suite(args.size):
        for mode in args.modes:
            rows.append(run_case(case, with_mode(cfg, mode)))
        if args.lambdas:
            rows.extend(sweep_motion_angle(case, args.lambdas, with_mode(cfg, "moblur")))
        for mode in args.modes if args.noise else ():
            rows.extend(sweep_noise(case, args.noise, with_mode(cfg, mode)))
    write_results_csv(args.out, rows)
    print(",".join(RESULT_FIELDS))
    for row in rows:
        print(f"{row['case']},{row['mode']},{row['lambda']:g},{row['noiseDensity']:g},"
              f"{row['AEE']:.4f},{row['AAE']:.3f},{row['seconds']:.2f}")
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    args = _build_parser().parse_args(argv)
    level = getattr(logging, str(args.log_level).upper(), None)
    if not isinstance(level, int):
        print(f"blurflow: invalid log level {args.log_level!r}", file=sys.stderr)
        return EXIT_INPUT
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "run":
            return _cmd_run(args)
        return _cmd_bench(args)
    except (InputError, ConfigError, FormatError) as exc:
        print(f"blurflow: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (PipelineError, FloatingPointError, ArithmeticError) as exc:
        print(f"blurflow: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"blurflow: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
