"""Command-line interface: simulate, reconstruct, compensate, sweep, plot."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .compensator import MotionCompensator
from .geometry import ScanGeometry, circular_trajectory, desk_geometry, perturb_trajectory
from .motion import curve_from_csv, curve_to_csv, sample_motion_curve
from .phantom import head_phantom, render_phantom
from .projector import fdk_reconstruct, forward_project
from .sweep import SweepConfig, SweepResult, aggregate, load_records, run_sweep
from .plots import emit_plots
from .volume import load_sinogram, save_sinogram, save_volume

log = logging.getLogger(__name__)


def _load_geometry(path: str | None) -> ScanGeometry:
    if path is None:
        return desk_geometry()
    return ScanGeometry.from_json(Path(path).read_text())


def _parse_stages(text: str) -> tuple:
    """Parse a stage schedule like "32:4.0,64:2.0" into ((32, 4.0), ...)."""
    stages = []
    for part in text.split(","):
        size, spacing = part.split(":")
        stages.append((int(size), float(spacing)))
    return tuple(stages)


def _cmd_simulate(args) -> int:
    geom = _load_geometry(args.geometry)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    volume = render_phantom(
        head_phantom(args.seed), args.phantom_shape, args.phantom_spacing
    )
    circular = circular_trajectory(geom)
    if args.f_c is not None:
        curve = sample_motion_curve(
            args.seed, geom.n_projections, args.f_c, args.amp_mm, args.amp_deg
        )
    else:
        curve = np.zeros((6, geom.n_projections))
    traj = perturb_trajectory(circular, curve)
    sino = forward_project(volume, traj, geom)
    save_sinogram(out / "sinogram.raw", sino)
    save_volume(out / "phantom.raw", volume)
    (out / "geometry.json").write_text(geom.to_json())
    (out / "motion_curve.csv").write_text(curve_to_csv(curve))
    log.info("wrote sinogram %s to %s", sino.shape, out)
    return 0


def _cmd_reconstruct(args) -> int:
    geom = _load_geometry(args.geometry)
    sino = load_sinogram(args.sinogram)
    traj = circular_trajectory(geom)
    if args.curve is not None:
        traj = perturb_trajectory(traj, curve_from_csv(Path(args.curve).read_text()))
    volume = fdk_reconstruct(sino, traj, geom, args.shape, args.spacing)
    save_volume(args.out, volume)
    log.info("wrote volume %s to %s", volume.shape, args.out)
    return 0


def _cmd_compensate(args) -> int:
    geom = _load_geometry(args.geometry)
    sino = load_sinogram(args.sinogram)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    comp = MotionCompensator(
        n_nodes=args.nodes,
        metric=args.metric,
        max_evaluations=args.budget,
        stages=_parse_stages(args.stages),
    )
    comp.fit(sino, geom)
    (out / "result.json").write_text(
        json.dumps(
            {
                "model": json.loads(comp.model_.to_json()),
                "score_trace": comp.score_trace_,
                "n_evaluations": comp.n_evaluations_,
                "initial_score": comp.initial_score_,
                "final_score": comp.final_score_,
                "params": comp.get_params(),
            },
            indent=2,
        )
    )
    (out / "estimated_curve.csv").write_text(curve_to_csv(comp.curve_))
    save_volume(out / "compensated.raw", comp.volume_)
    log.info(
        "compensation: score %.6g -> %.6g in %d evaluations",
        comp.initial_score_,
        comp.final_score_,
        comp.n_evaluations_,
    )
    return 0


def _cmd_sweep(args) -> int:
    if args.config is not None:
        cfg = SweepConfig.from_json(Path(args.config).read_text())
    else:
        cfg = SweepConfig()
    if args.jobs is not None:
        cfg = SweepConfig.from_json(
            json.dumps({**json.loads(cfg.to_json()), "jobs": args.jobs})
        )
    result = run_sweep(cfg, args.out)
    log.info("sweep finished: %d records", len(result.records))
    return 0


def _cmd_plot(args) -> int:
    records, n_projections = load_records(args.records)
    result = SweepResult(tuple(records), tuple(aggregate(records)), n_projections)
    for path in emit_plots(result, args.out):
        log.info("wrote %s", path)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ctmoco",
        description="Rigid motion simulation and autofocus compensation "
        "for cone-beam CT.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="render a phantom and forward project it")
    p.add_argument("--geometry", help="geometry JSON file (default: desk scale)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--f-c", type=float, default=None,
                   help="motion cutoff frequency; omit for a motion-free scan")
    p.add_argument("--amp-mm", type=float, default=5.0)
    p.add_argument("--amp-deg", type=float, default=5.0)
    p.add_argument("--phantom-shape", type=int, default=64)
    p.add_argument("--phantom-spacing", type=float, default=2.0)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("reconstruct", help="FDK reconstruction of a sinogram")
    p.add_argument("--sinogram", required=True)
    p.add_argument("--geometry", help="geometry JSON file (default: desk scale)")
    p.add_argument("--curve", help="CSV motion curve perturbing the trajectory")
    p.add_argument("--shape", type=int, default=64)
    p.add_argument("--spacing", type=float, default=2.0)
    p.add_argument("--out", required=True, help="output volume file")
    p.set_defaults(func=_cmd_reconstruct)

    p = sub.add_parser("compensate", help="autofocus motion compensation")
    p.add_argument("--sinogram", required=True)
    p.add_argument("--geometry", help="geometry JSON file (default: desk scale)")
    p.add_argument("--nodes", type=int, default=10)
    p.add_argument("--metric", default="histogram_entropy",
                   choices=("histogram_entropy", "total_variation", "gradient_l1"))
    p.add_argument("--budget", type=int, default=2000,
                   help="maximum objective evaluations")
    p.add_argument("--stages", default="32:4.0,64:2.0",
                   help="coarse-to-fine schedule, e.g. 32:4.0,64:2.0")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=_cmd_compensate)

    p = sub.add_parser("sweep", help="run the (scan x frequency x nodes) grid")
    p.add_argument("--config", help="SweepConfig JSON file (default config if omitted)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--jobs", type=int, default=None, help="parallel cells")
    p.add_argument("--resume", action="store_true",
                   help="accepted for clarity; resuming is always on")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("plot", help="render SVG charts from a records CSV")
    p.add_argument("--records", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=_cmd_plot)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
