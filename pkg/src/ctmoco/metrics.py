"""Quantitative evaluation: reprojection error, volumetric SSIM, ratios.

A constant rigid transform applied to every view shifts the reconstruction's
global pose without changing its quality, so motion estimates are only
identifiable up to that gauge. The reprojection error therefore exists in a
raw and a gauge-aligned variant; headline ratios use the aligned value and
the raw one is kept for audit.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, asdict

import numpy as np
from scipy.ndimage import correlate1d
from scipy.optimize import minimize

from .geometry import ScanGeometry, Trajectory, rigid_matrix
from .validation import check_condition, check_same_shape
from .volume import Volume

__all__ = ["MarkerSet", "MetricRecord", "rpe", "ssim3d", "evaluate_run"]

DEFAULT_MARKER_SEED = 2024
DEFAULT_MARKER_COUNT = 100
DEFAULT_MARKER_RADIUS_MM = 50.0


@dataclass(frozen=True)
class MarkerSet:
    """3D evaluation points (mm) for the reprojection error."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 3 or pts.shape[0] == 0:
            raise ValueError(f"points must have shape (n, 3), n >= 1, got {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise ValueError("marker points must be finite")
        object.__setattr__(self, "points", pts)

    @classmethod
    def default(
        cls,
        seed: int = DEFAULT_MARKER_SEED,
        n_points: int = DEFAULT_MARKER_COUNT,
        radius_mm: float = DEFAULT_MARKER_RADIUS_MM,
    ) -> "MarkerSet":
        """Seeded points drawn uniformly from a head-sized isocentric sphere."""
        rng = np.random.default_rng(seed)
        pts = np.empty((0, 3))
        while pts.shape[0] < n_points:
            cand = rng.uniform(-radius_mm, radius_mm, size=(2 * n_points, 3))
            cand = cand[np.linalg.norm(cand, axis=1) <= radius_mm]
            pts = np.vstack([pts, cand])
        return cls(pts[:n_points])

    def to_json(self) -> str:
        return json.dumps({"points_mm": self.points.tolist()}, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "MarkerSet":
        return cls(np.asarray(json.loads(text)["points_mm"]))


def _detector_distances(
    traj_ref: Trajectory,
    traj_test: Trajectory,
    markers: MarkerSet,
    pixel_spacing: tuple[float, float],
) -> np.ndarray:
    """Per (view, marker) detector-plane distances in mm.

    Markers projecting behind the source plane in either trajectory are
    excluded (NaN) with a warning.
    """
    hom = np.concatenate(
        [markers.points, np.ones((markers.points.shape[0], 1))], axis=1
    )
    pr = np.einsum("nij,mj->nmi", traj_ref.matrices, hom)
    pt = np.einsum("nij,mj->nmi", traj_test.matrices, hom)
    valid = (pr[..., 2] > 1e-9) & (pt[..., 2] > 1e-9)
    if not np.all(valid):
        warnings.warn(
            f"excluding {int(np.sum(~valid))} marker projections behind the "
            "source plane",
            stacklevel=3,
        )
    if not np.any(valid):
        raise ValueError("all marker projections lie behind the source plane")
    with np.errstate(divide="ignore", invalid="ignore"):
        uv_ref = pr[..., :2] / pr[..., 2:3]
        uv_test = pt[..., :2] / pt[..., 2:3]
    delta = (uv_test - uv_ref) * np.asarray(pixel_spacing)
    dist = np.linalg.norm(delta, axis=-1)
    dist[~valid] = np.nan
    return dist


def rpe(
    traj_ref: Trajectory,
    traj_test: Trajectory,
    markers: MarkerSet | None = None,
    geom: ScanGeometry | None = None,
    gauge_align: bool = False,
) -> float:
    """Mean reprojection error between two trajectories, in detector mm.

    Averages the Euclidean detector-plane distance between the projections
    of every marker under both trajectories, over all views. With
    `gauge_align`, a single constant rigid transform (bounded local search
    from identity) is composed onto `traj_test` first, removing the global
    pose offset the autofocus objective cannot observe.
    """
    check_condition(
        len(traj_ref) == len(traj_test), "trajectories must have equal length"
    )
    if markers is None:
        markers = MarkerSet.default()
    spacing = (
        (geom.pixel_spacing_u, geom.pixel_spacing_v)
        if geom is not None
        else (1.0, 1.0)
    )

    def mean_error(params: np.ndarray) -> float:
        if np.any(params):
            t = rigid_matrix(params)
            test = Trajectory(traj_test.matrices @ t)
        else:
            test = traj_test
        d = _detector_distances(traj_ref, test, markers, spacing)
        return float(np.nanmean(d))

    if not gauge_align:
        return mean_error(np.zeros(6))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        result = minimize(
            mean_error,
            np.zeros(6),
            method="Powell",
            bounds=[(-20.0, 20.0)] * 3 + [(-20.0, 20.0)] * 3,
            options={"xtol": 1e-6, "ftol": 1e-9, "maxfev": 20000},
        )
    return float(min(result.fun, mean_error(np.zeros(6))))


# ---------------------------------------------------------------------------
# Volumetric SSIM
# ---------------------------------------------------------------------------

def _gaussian_kernel(size: int, sigma: float) -> np.ndarray:
    half = (size - 1) / 2.0
    x = np.arange(size) - half
    k = np.exp(-(x**2) / (2.0 * sigma**2))
    return k / k.sum()


def _windowed_mean(data: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    out = data
    for axis in range(3):
        out = correlate1d(out, kernel, axis=axis, mode="constant")
    return out


def ssim3d(
    a: Volume | np.ndarray,
    b: Volume | np.ndarray,
    window: int = 7,
    sigma: float = 1.5,
    k1: float = 0.01,
    k2: float = 0.03,
    data_range: float | None = None,
) -> float:
    """Mean structural similarity over Gaussian-weighted 3D windows.

    The dynamic range defaults to max - min of the reference `a`. Windows
    are cubic (default 7^3, sigma 1.5) and only windows fully inside the
    volume enter the mean.
    """
    da = a.data if isinstance(a, Volume) else np.asarray(a, dtype=float)
    db = b.data if isinstance(b, Volume) else np.asarray(b, dtype=float)
    check_same_shape(da, db, "first volume", "second volume")
    if data_range is None:
        data_range = float(da.max() - da.min())
    if data_range == 0.0:
        data_range = 1.0
    c1 = (k1 * data_range) ** 2
    c2 = (k2 * data_range) ** 2
    kernel = _gaussian_kernel(window, sigma)

    mu_a = _windowed_mean(da, kernel)
    mu_b = _windowed_mean(db, kernel)
    var_a = _windowed_mean(da * da, kernel) - mu_a**2
    var_b = _windowed_mean(db * db, kernel) - mu_b**2
    cov = _windowed_mean(da * db, kernel) - mu_a * mu_b

    ssim_map = ((2 * mu_a * mu_b + c1) * (2 * cov + c2)) / (
        (mu_a**2 + mu_b**2 + c1) * (var_a + var_b + c2)
    )
    margin = window // 2
    core = ssim_map[margin:-margin or None, margin:-margin or None, margin:-margin or None]
    check_condition(core.size > 0, "volume smaller than the SSIM window")
    return float(np.mean(core))


# ---------------------------------------------------------------------------
# Run evaluation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MetricRecord:
    """Before/after metrics of one compensation run plus its identifiers."""

    scan_seed: int
    f_c: float
    n_nodes: int
    rpe_before: float
    rpe_after: float
    rpe_before_aligned: float
    rpe_after_aligned: float
    rpe_ratio: float
    ssim_before: float
    ssim_after: float
    ssim_ratio: float

    def as_dict(self) -> dict:
        return asdict(self)


def evaluate_run(
    gt_traj: Trajectory,
    init_traj: Trajectory,
    est_traj: Trajectory,
    gt_volume: Volume,
    vol_before: Volume,
    vol_after: Volume,
    markers: MarkerSet | None = None,
    geom: ScanGeometry | None = None,
    scan_seed: int = 0,
    f_c: float = 0.0,
    n_nodes: int = 0,
) -> MetricRecord:
    """Assemble before/after RPE and SSIM plus their after/before ratios.

    RPE is reported raw and gauge-aligned; the headline `rpe_ratio` uses the
    aligned values. SSIM uses the ground-truth volume's dynamic range for
    both sides so before and after are comparable.
    """
    if markers is None:
        markers = MarkerSet.default()
    rpe_before = rpe(gt_traj, init_traj, markers, geom)
    rpe_after = rpe(gt_traj, est_traj, markers, geom)
    rpe_before_al = rpe(gt_traj, init_traj, markers, geom, gauge_align=True)
    rpe_after_al = rpe(gt_traj, est_traj, markers, geom, gauge_align=True)
    rng = float(gt_volume.data.max() - gt_volume.data.min())
    ssim_before = ssim3d(gt_volume, vol_before, data_range=rng)
    ssim_after = ssim3d(gt_volume, vol_after, data_range=rng)
    return MetricRecord(
        scan_seed=scan_seed,
        f_c=f_c,
        n_nodes=n_nodes,
        rpe_before=rpe_before,
        rpe_after=rpe_after,
        rpe_before_aligned=rpe_before_al,
        rpe_after_aligned=rpe_after_al,
        rpe_ratio=rpe_after_al / rpe_before_al if rpe_before_al != 0 else np.nan,
        ssim_before=ssim_before,
        ssim_after=ssim_after,
        ssim_ratio=ssim_after / ssim_before if ssim_before != 0 else np.nan,
    )
