"""Experiment orchestration over the (scan, cutoff frequency, node count) grid.

Every grid cell runs the full pipeline: render a seeded phantom, sample a
band-limited motion curve, perturb the trajectory, forward project,
compensate, and evaluate. Cells are independent, deterministic, and
resumable: existing CSV records are skipped on rerun. The same motion
realization is reused across node counts (same seed), so node-count
comparisons are paired per scan.
"""

from __future__ import annotations

import hashlib
import json
import logging
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, asdict, replace
from pathlib import Path

import numpy as np

from .compensator import MotionCompensator
from .geometry import ScanGeometry, circular_trajectory, desk_geometry, perturb_trajectory
from .metrics import MarkerSet, MetricRecord, evaluate_run
from .motion import cutoff_schedule, sample_motion_curve
from .phantom import head_phantom, render_phantom
from .projector import fdk_reconstruct, forward_project
from .validation import check_condition

__all__ = ["SweepConfig", "SweepResult", "run_sweep", "aggregate",
           "load_records", "RECORD_SCHEMA"]

log = logging.getLogger(__name__)

RECORD_SCHEMA = "ctmoco-records-v1"
RECORD_FIELDS = (
    "scan_seed", "f_c", "n_nodes",
    "rpe_before", "rpe_after", "rpe_before_aligned", "rpe_after_aligned",
    "rpe_ratio", "ssim_before", "ssim_after", "ssim_ratio",
)


@dataclass(frozen=True)
class SweepConfig:
    """Definition of one experiment grid.

    Desk-scale defaults (3 seeds, 8 frequencies, node counts 10 and 30 on a
    180-view scan) are the scaled-down analog of the full study (10 scans,
    15 frequencies, 30 and 100 nodes on 360 views); the full numbers remain
    reachable through this config.
    """

    phantom_seeds: tuple[int, ...] = (0, 1, 2)
    n_frequencies: int = 8
    f_min: float = 0.005
    f_max: float = 0.5
    node_counts: tuple[int, ...] = (10, 30)
    amp_translation_mm: float = 5.0
    amp_rotation_deg: float = 5.0
    geometry: ScanGeometry = field(default_factory=desk_geometry)
    sim_shape: int = 64
    sim_spacing: float = 2.0
    eval_shape: int = 64
    eval_spacing: float = 2.0
    optimizer: dict = field(default_factory=dict)
    jobs: int = 1

    def __post_init__(self):
        check_condition(len(self.phantom_seeds) > 0, "phantom_seeds is empty")
        check_condition(len(self.node_counts) > 0, "node_counts is empty")
        check_condition(self.n_frequencies >= 2, "need at least 2 frequencies")
        object.__setattr__(self, "phantom_seeds", tuple(self.phantom_seeds))
        object.__setattr__(self, "node_counts", tuple(self.node_counts))

    def frequencies(self) -> np.ndarray:
        return cutoff_schedule(self.n_frequencies, self.f_min, self.f_max)

    def to_json(self) -> str:
        doc = asdict(self)
        doc["geometry"] = json.loads(self.geometry.to_json())
        return json.dumps(doc, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "SweepConfig":
        doc = json.loads(text)
        geometry = ScanGeometry.from_json(json.dumps(doc.pop("geometry")))
        return cls(geometry=geometry, **doc)

    def config_hash(self) -> str:
        return hashlib.sha256(self.to_json().encode()).hexdigest()[:16]


@dataclass(frozen=True)
class SweepResult:
    """All per-run records plus the per-(f_c, n_nodes) aggregate table."""

    records: tuple[MetricRecord, ...]
    aggregates: tuple[dict, ...]
    n_projections: int


def run_cell(cfg: SweepConfig, seed: int, freq_index: int, n_nodes: int) -> MetricRecord:
    """Execute one grid cell end to end and return its metric record."""
    geom = cfg.geometry
    f_c = float(cfg.frequencies()[freq_index])
    volume = render_phantom(head_phantom(seed), cfg.sim_shape, cfg.sim_spacing)
    motion_seed = np.random.SeedSequence((seed, freq_index))
    curve = sample_motion_curve(
        motion_seed,
        geom.n_projections,
        f_c,
        cfg.amp_translation_mm,
        cfg.amp_rotation_deg,
    )
    circular = circular_trajectory(geom)
    gt_traj = perturb_trajectory(circular, curve)
    sino = forward_project(volume, gt_traj, geom)

    gt_volume = fdk_reconstruct(sino, gt_traj, geom, cfg.eval_shape, cfg.eval_spacing)
    vol_before = fdk_reconstruct(sino, circular, geom, cfg.eval_shape, cfg.eval_spacing)

    comp = MotionCompensator(n_nodes=n_nodes, **cfg.optimizer)
    comp.fit(sino, geom)
    vol_after = fdk_reconstruct(
        sino, comp.trajectory_, geom, cfg.eval_shape, cfg.eval_spacing
    )
    return evaluate_run(
        gt_traj,
        circular,
        comp.trajectory_,
        gt_volume,
        vol_before,
        vol_after,
        markers=MarkerSet.default(),
        geom=geom,
        scan_seed=seed,
        f_c=f_c,
        n_nodes=n_nodes,
    )


def _record_key(record: dict) -> tuple:
    return (int(record["scan_seed"]), float(record["f_c"]), int(record["n_nodes"]))


def _records_path(out_dir: Path) -> Path:
    return out_dir / "records.csv"


def _write_header(path: Path, n_projections: int) -> None:
    path.write_text(
        f"# {RECORD_SCHEMA} n_projections={n_projections}\n"
        + ",".join(RECORD_FIELDS)
        + "\n"
    )


def _append_record(path: Path, record: MetricRecord) -> None:
    row = record.as_dict()
    with path.open("a") as fh:
        fh.write(",".join(repr(row[k]) for k in RECORD_FIELDS) + "\n")


def load_records(path) -> tuple[list[MetricRecord], int]:
    """Read a records CSV; returns the records and the scan's view count."""
    lines = Path(path).read_text().strip().splitlines()
    if not lines or not lines[0].startswith(f"# {RECORD_SCHEMA}"):
        raise ValueError(f"{path} is not a {RECORD_SCHEMA} file")
    n_projections = int(lines[0].split("n_projections=")[1])
    header = lines[1].split(",")
    records = []
    for line in lines[2:]:
        values = dict(zip(header, line.split(",")))
        records.append(
            MetricRecord(
                scan_seed=int(values["scan_seed"]),
                n_nodes=int(values["n_nodes"]),
                **{
                    k: float(values[k])
                    for k in RECORD_FIELDS
                    if k not in ("scan_seed", "n_nodes")
                },
            )
        )
    return records, n_projections


def aggregate(records, group_keys: tuple[str, ...] = ("f_c", "n_nodes")) -> list[dict]:
    """Mean and 95% confidence half-width of the ratios per group.

    The half-width is the normal approximation 1.96 * sd / sqrt(n); groups
    with a single record get half-width 0 with a warning.
    """
    check_condition(len(records) > 0, "no records to aggregate")
    groups: dict[tuple, list[MetricRecord]] = {}
    for rec in records:
        key = tuple(getattr(rec, k) for k in group_keys)
        groups.setdefault(key, []).append(rec)
    table = []
    for key in sorted(groups):
        members = groups[key]
        row = dict(zip(group_keys, key))
        row["n"] = len(members)
        for name in ("rpe_ratio", "ssim_ratio"):
            values = np.array([getattr(m, name) for m in members], dtype=float)
            row[f"mean_{name}"] = float(np.mean(values))
            if len(values) < 2:
                warnings.warn(
                    f"group {key}: single record, confidence interval is 0"
                )
                row[f"ci_{name}"] = 0.0
            else:
                row[f"ci_{name}"] = float(
                    1.96 * np.std(values, ddof=1) / np.sqrt(len(values))
                )
        table.append(row)
    return table


def run_sweep(cfg: SweepConfig, out_dir) -> SweepResult:
    """Run the full grid, appending records to `<out_dir>/records.csv`.

    Existing records are skipped, so an interrupted sweep resumes where it
    stopped. Individual cell failures are logged to `failures.csv` and
    skipped; the sweep raises only when every cell fails.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    records_path = _records_path(out_dir)
    existing: dict[tuple, MetricRecord] = {}
    if records_path.exists():
        loaded, n_proj = load_records(records_path)
        check_condition(
            n_proj == cfg.geometry.n_projections,
            "existing records were produced with a different geometry",
        )
        existing = {_record_key(r.as_dict()): r for r in loaded}
    else:
        _write_header(records_path, cfg.geometry.n_projections)

    freqs = cfg.frequencies()
    cells = [
        (seed, i_freq, n_nodes)
        for seed in cfg.phantom_seeds
        for i_freq in range(len(freqs))
        for n_nodes in cfg.node_counts
    ]
    pending = [
        c for c in cells
        if (c[0], float(freqs[c[1]]), c[2]) not in existing
    ]
    log.info("sweep: %d cells, %d pending", len(cells), len(pending))

    failures: list[tuple] = []
    results: list[MetricRecord] = []
    if cfg.jobs > 1 and pending:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            futures = {
                pool.submit(run_cell, cfg, *cell): cell for cell in pending
            }
            for future, cell in futures.items():
                try:
                    results.append((cell, future.result()))
                except Exception as exc:  # noqa: BLE001 - cell isolation
                    log.warning("cell %s failed: %s", cell, exc)
                    failures.append((cell, str(exc)))
    else:
        for cell in pending:
            try:
                results.append((cell, run_cell(cfg, *cell)))
            except Exception as exc:  # noqa: BLE001 - cell isolation
                log.warning("cell %s failed: %s", cell, exc)
                failures.append((cell, str(exc)))

    # deterministic CSV order regardless of completion order
    results.sort(key=lambda item: pending.index(item[0]))
    for _, record in results:
        _append_record(records_path, record)

    if failures:
        with (out_dir / "failures.csv").open("a") as fh:
            for cell, message in failures:
                fh.write(f"{cell},{message!r}\n")
    if pending and not results and failures:
        raise RuntimeError("every sweep cell failed; see failures.csv")

    all_records, _ = load_records(records_path)
    table = aggregate(all_records)
    agg_path = out_dir / "aggregates.csv"
    if table:
        keys = list(table[0].keys())
        agg_path.write_text(
            ",".join(keys) + "\n"
            + "\n".join(",".join(repr(row[k]) for k in keys) for row in table)
            + "\n"
        )
    manifest = {
        "schema": RECORD_SCHEMA,
        "config": json.loads(cfg.to_json()),
        "config_hash": cfg.config_hash(),
        "artifacts": sorted(
            p.name for p in out_dir.iterdir() if p.name != "manifest.json"
        ),
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2))
    return SweepResult(
        tuple(all_records), tuple(table), cfg.geometry.n_projections
    )
