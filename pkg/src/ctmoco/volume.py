"""Volume and sinogram containers plus raw-file persistence.

Arrays persist as little-endian 32-bit floats next to a JSON sidecar that
records shape, spacing, origin, units, and axis order. Volumes are stored
x-fastest; sinograms detector-column-fastest with the projection index as
the slowest axis.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .validation import check_condition, check_finite_array

__all__ = [
    "Volume",
    "Sinogram",
    "save_volume",
    "load_volume",
    "save_sinogram",
    "load_sinogram",
]


@dataclass(frozen=True)
class Volume:
    """3D attenuation grid with physical spacing and origin.

    Attributes
    ----------
    data : ndarray, shape (nx, ny, nz)
        Attenuation values in 1/mm (or arbitrary linear units).
    spacing : tuple of 3 floats
        Voxel pitch in mm per axis.
    origin : tuple of 3 floats
        World coordinates (mm) of the center of voxel (0, 0, 0).
    """

    data: np.ndarray
    spacing: tuple[float, float, float]
    origin: tuple[float, float, float]

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 3:
            raise ValueError(f"volume data must be 3D, got shape {data.shape}")
        check_finite_array(data, "volume data")
        spacing = tuple(float(s) for s in self.spacing)
        check_condition(all(s > 0 for s in spacing), "spacing must be positive")
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "spacing", spacing)
        object.__setattr__(self, "origin", tuple(float(o) for o in self.origin))

    @classmethod
    def centered(cls, data: np.ndarray, spacing) -> "Volume":
        """Volume whose grid is centered on the world origin."""
        data = np.asarray(data)
        spacing = tuple(float(s) for s in np.broadcast_to(spacing, (3,)))
        origin = tuple(
            -(n - 1) / 2.0 * s for n, s in zip(data.shape, spacing)
        )
        return cls(data, spacing, origin)

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.data.shape

    def voxel_centers_axis(self, axis: int) -> np.ndarray:
        """World coordinates of voxel centers along one axis."""
        n = self.data.shape[axis]
        return self.origin[axis] + self.spacing[axis] * np.arange(n)


@dataclass(frozen=True)
class Sinogram:
    """Stack of projection images, shape (n_projections, rows, cols)."""

    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 3:
            raise ValueError(f"sinogram data must be 3D, got shape {data.shape}")
        object.__setattr__(self, "data", data)

    @property
    def n_projections(self) -> int:
        return self.data.shape[0]

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.data.shape


def _write_raw(path: Path, data: np.ndarray, sidecar: dict, reverse_axes: bool) -> None:
    path = Path(path)
    if reverse_axes:
        data = data.transpose(range(data.ndim - 1, -1, -1))
    np.ascontiguousarray(data, dtype="<f4").tofile(path)
    path.with_suffix(path.suffix + ".json").write_text(
        json.dumps(sidecar, indent=2)
    )


def _read_raw(path: Path, reverse_axes: bool) -> tuple[np.ndarray, dict]:
    path = Path(path)
    sidecar = json.loads(path.with_suffix(path.suffix + ".json").read_text())
    shape = tuple(sidecar["shape"])
    flat = np.fromfile(path, dtype="<f4")
    if flat.size != int(np.prod(shape)):
        raise ValueError(
            f"{path}: expected {int(np.prod(shape))} samples, found {flat.size}"
        )
    if reverse_axes:
        data = flat.reshape(shape[::-1]).transpose(range(len(shape) - 1, -1, -1))
    else:
        data = flat.reshape(shape)
    return data.astype(np.float64), sidecar


def save_volume(path, vol: Volume) -> None:
    _write_raw(
        Path(path),
        vol.data,
        {
            "kind": "volume",
            "dtype": "float32-le",
            "axis_order": "x-fastest",
            "shape": list(vol.shape),
            "spacing_mm": list(vol.spacing),
            "origin_mm": list(vol.origin),
            "units": "attenuation per mm",
        },
        reverse_axes=True,
    )


def load_volume(path) -> Volume:
    data, sidecar = _read_raw(Path(path), reverse_axes=True)
    return Volume(data, tuple(sidecar["spacing_mm"]), tuple(sidecar["origin_mm"]))


def save_sinogram(path, sino: Sinogram) -> None:
    _write_raw(
        Path(path),
        sino.data,
        {
            "kind": "sinogram",
            "dtype": "float32-le",
            "axis_order": "col-fastest",
            "shape": list(sino.shape),
            "units": "line integral (mm-weighted)",
        },
        reverse_axes=False,
    )


def load_sinogram(path) -> Sinogram:
    data, _ = _read_raw(Path(path), reverse_axes=False)
    return Sinogram(data)
