"""Circular cone-beam scan geometry, projection matrices, and rigid perturbations.

Conventions
-----------
* World coordinates are millimeters; the rotation axis is z and the source
  orbits in the z = 0 plane.
* A projection matrix is 3x4 and maps homogeneous world points (mm) to
  homogeneous detector coordinates (pixels); u runs along detector columns
  (tangent to the orbit), v along rows (parallel to the rotation axis).
* Rigid motion is parameterized by (t_x, t_y, t_z) in mm and Euler angles
  (r_x, r_y, r_z) in degrees, composed extrinsically as R_z @ R_y @ R_x.
* Motion acts on object coordinates: a perturbed matrix is P @ T, i.e. the
  patient moves while the scanner stays fixed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, asdict

import numpy as np

from .validation import check_positive, check_condition

__all__ = [
    "ScanGeometry",
    "Trajectory",
    "RigidParams",
    "default_geometry",
    "desk_geometry",
    "rigid_matrix",
    "circular_trajectory",
    "perturb_trajectory",
]


@dataclass(frozen=True)
class ScanGeometry:
    """Circular cone-beam acquisition geometry.

    Attributes
    ----------
    n_projections : int
        Number of projection images in the scan.
    angular_range : float
        Covered source angle in radians; a full scan is 2*pi.
    source_isocenter_dist : float
        Source-to-isocenter distance (SID) in mm.
    source_detector_dist : float
        Source-to-detector distance (SDD) in mm.
    detector_rows, detector_cols : int
        Detector shape; rows index v (along z), columns index u.
    pixel_spacing_u, pixel_spacing_v : float
        Detector pixel pitch in mm.
    sampling_rate_omega : float
        Projections per second. Frequencies elsewhere are expressed as
        fractions of this rate, so the nominal value 1.0 is fine.
    """

    n_projections: int = 360
    angular_range: float = 2.0 * np.pi
    source_isocenter_dist: float = 785.0
    source_detector_dist: float = 1200.0
    detector_rows: int = 500
    detector_cols: int = 700
    pixel_spacing_u: float = 0.64
    pixel_spacing_v: float = 0.64
    sampling_rate_omega: float = 1.0

    def __post_init__(self):
        check_condition(self.n_projections >= 2, "n_projections must be >= 2")
        check_positive(self.angular_range, "angular_range")
        check_positive(self.source_isocenter_dist, "source_isocenter_dist")
        check_condition(
            self.source_detector_dist > self.source_isocenter_dist,
            "source_detector_dist must exceed source_isocenter_dist",
        )
        check_condition(
            self.detector_rows >= 1 and self.detector_cols >= 1,
            "detector shape must be at least 1x1",
        )
        check_positive(self.pixel_spacing_u, "pixel_spacing_u")
        check_positive(self.pixel_spacing_v, "pixel_spacing_v")
        check_positive(self.sampling_rate_omega, "sampling_rate_omega")

    @property
    def magnification(self) -> float:
        return self.source_detector_dist / self.source_isocenter_dist

    @property
    def principal_point(self) -> tuple[float, float]:
        """Detector center in (u, v) pixel coordinates."""
        return (self.detector_cols - 1) / 2.0, (self.detector_rows - 1) / 2.0

    def projection_angles(self) -> np.ndarray:
        """Source angles in radians, endpoint excluded (no duplicate view)."""
        return np.arange(self.n_projections) * (
            self.angular_range / self.n_projections
        )

    def to_json(self) -> str:
        doc = {
            "n_projections": self.n_projections,
            "angular_range_rad": self.angular_range,
            "sid_mm": self.source_isocenter_dist,
            "sdd_mm": self.source_detector_dist,
            "detector_rows": self.detector_rows,
            "detector_cols": self.detector_cols,
            "pixel_spacing_u_mm": self.pixel_spacing_u,
            "pixel_spacing_v_mm": self.pixel_spacing_v,
            "sampling_rate_proj_per_s": self.sampling_rate_omega,
        }
        return json.dumps(doc, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "ScanGeometry":
        doc = json.loads(text)
        return cls(
            n_projections=int(doc["n_projections"]),
            angular_range=float(doc["angular_range_rad"]),
            source_isocenter_dist=float(doc["sid_mm"]),
            source_detector_dist=float(doc["sdd_mm"]),
            detector_rows=int(doc["detector_rows"]),
            detector_cols=int(doc["detector_cols"]),
            pixel_spacing_u=float(doc["pixel_spacing_u_mm"]),
            pixel_spacing_v=float(doc["pixel_spacing_v_mm"]),
            sampling_rate_omega=float(doc["sampling_rate_proj_per_s"]),
        )


def default_geometry() -> ScanGeometry:
    """Full-size clinical-analog geometry (360 views, 500x700 detector)."""
    return ScanGeometry()


def desk_geometry(n_projections: int = 180) -> ScanGeometry:
    """Small geometry for fast experiments: same SID/SDD, coarse detector."""
    return ScanGeometry(
        n_projections=n_projections,
        detector_rows=96,
        detector_cols=128,
        pixel_spacing_u=2.0,
        pixel_spacing_v=2.0,
    )


@dataclass(frozen=True)
class RigidParams:
    """Six rigid motion parameters: translations in mm, rotations in degrees."""

    t_x: float = 0.0
    t_y: float = 0.0
    t_z: float = 0.0
    r_x: float = 0.0
    r_y: float = 0.0
    r_z: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array(
            [self.t_x, self.t_y, self.t_z, self.r_x, self.r_y, self.r_z]
        )

    @classmethod
    def from_array(cls, a) -> "RigidParams":
        a = np.asarray(a, dtype=float)
        if a.shape != (6,):
            raise ValueError(f"expected 6 rigid parameters, got shape {a.shape}")
        return cls(*a)


@dataclass(frozen=True)
class Trajectory:
    """Ordered stack of 3x4 projection matrices, shape (n_projections, 3, 4)."""

    matrices: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrices, dtype=float)
        if m.ndim != 3 or m.shape[1:] != (3, 4):
            raise ValueError(f"expected (n, 3, 4) matrices, got {m.shape}")
        object.__setattr__(self, "matrices", m)

    def __len__(self) -> int:
        return self.matrices.shape[0]

    def project(self, points: np.ndarray) -> np.ndarray:
        """Project world points (m, 3) through every view.

        Returns (u, v) pixel coordinates with shape (n_views, m, 2).
        """
        pts = np.asarray(points, dtype=float)
        hom = np.concatenate([pts, np.ones((pts.shape[0], 1))], axis=1)
        proj = np.einsum("nij,mj->nmi", self.matrices, hom)
        return proj[..., :2] / proj[..., 2:3]


def rotation_matrix(r_x_deg: float, r_y_deg: float, r_z_deg: float) -> np.ndarray:
    """Right-handed rotation R_z @ R_y @ R_x (extrinsic X, then Y, then Z)."""
    ax, ay, az = np.deg2rad([r_x_deg, r_y_deg, r_z_deg])
    cx, sx = np.cos(ax), np.sin(ax)
    cy, sy = np.cos(ay), np.sin(ay)
    cz, sz = np.cos(az), np.sin(az)
    rx = np.array([[1, 0, 0], [0, cx, -sx], [0, sx, cx]])
    ry = np.array([[cy, 0, sy], [0, 1, 0], [-sy, 0, cy]])
    rz = np.array([[cz, -sz, 0], [sz, cz, 0], [0, 0, 1]])
    return rz @ ry @ rx


def rigid_matrix(params) -> np.ndarray:
    """Homogeneous 4x4 transform Translation(t) @ R_z @ R_y @ R_x.

    `params` is a RigidParams or a length-6 array
    (t_x, t_y, t_z [mm], r_x, r_y, r_z [deg]).
    """
    if isinstance(params, RigidParams):
        p = params.as_array()
    else:
        p = np.asarray(params, dtype=float)
        if p.shape != (6,):
            raise ValueError(f"expected 6 rigid parameters, got shape {p.shape}")
    t = np.eye(4)
    t[:3, :3] = rotation_matrix(p[3], p[4], p[5])
    t[:3, 3] = p[:3]
    return t


def _intrinsics(geom: ScanGeometry) -> np.ndarray:
    cu, cv = geom.principal_point
    return np.array(
        [
            [geom.source_detector_dist / geom.pixel_spacing_u, 0.0, cu],
            [0.0, geom.source_detector_dist / geom.pixel_spacing_v, cv],
            [0.0, 0.0, 1.0],
        ]
    )


def circular_trajectory(geom: ScanGeometry) -> Trajectory:
    """Ideal circular trajectory for `geom`.

    View i sits at angle i * angular_range / n_projections (endpoint
    excluded). The isocenter projects to the detector principal point in
    every view.
    """
    k = _intrinsics(geom)
    sid = geom.source_isocenter_dist
    matrices = np.empty((geom.n_projections, 3, 4))
    for i, alpha in enumerate(geom.projection_angles()):
        ca, sa = np.cos(alpha), np.sin(alpha)
        source = np.array([sid * ca, sid * sa, 0.0])
        u_axis = np.array([-sa, ca, 0.0])
        v_axis = np.array([0.0, 0.0, 1.0])
        principal = -source / sid  # unit vector from source toward isocenter
        r = np.stack([u_axis, v_axis, principal])
        matrices[i] = k @ np.hstack([r, (-r @ source)[:, None]])
    return Trajectory(matrices)


def source_position(matrix: np.ndarray) -> np.ndarray:
    """Camera center of a 3x4 projection matrix (its null space), in mm."""
    m = np.asarray(matrix, dtype=float)
    left = m[:, :3]
    if abs(np.linalg.det(left)) < 1e-12:
        raise ValueError("projection matrix has a singular 3x3 block")
    return -np.linalg.solve(left, m[:, 3])


def perturb_trajectory(traj: Trajectory, curve: np.ndarray) -> Trajectory:
    """Apply a per-view rigid motion curve to a trajectory.

    `curve` has shape (6, n_views): rows (t_x, t_y, t_z) in mm and
    (r_x, r_y, r_z) in degrees. View i becomes P_i @ T_i with
    T_i = rigid_matrix(curve[:, i]) acting on object coordinates.
    """
    curve = np.asarray(curve, dtype=float)
    if curve.shape != (6, len(traj)):
        raise ValueError(
            f"curve shape {curve.shape} does not match trajectory of "
            f"length {len(traj)}"
        )
    if not np.any(curve):
        return Trajectory(traj.matrices.copy())
    out = np.empty_like(traj.matrices)
    for i in range(len(traj)):
        out[i] = traj.matrices[i] @ rigid_matrix(curve[:, i])
    return Trajectory(out)
