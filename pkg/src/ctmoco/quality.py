"""Reference-free image-quality scores for autofocus optimization.

All metrics are oriented so that LOWER means BETTER: motion artifacts add
streaks and blur, which raise gradient energy and spread the intensity
histogram. They are analytic stand-ins for a learned quality regressor and
are pluggable behind `evaluate_quality`.
"""

from __future__ import annotations

import numpy as np

from .volume import Volume

__all__ = ["QUALITY_METRICS", "evaluate_quality"]


def _gradient_magnitude(data: np.ndarray) -> np.ndarray:
    gx = np.diff(data, axis=0, append=data[-1:, :, :])
    gy = np.diff(data, axis=1, append=data[:, -1:, :])
    gz = np.diff(data, axis=2, append=data[:, :, -1:])
    return np.sqrt(gx**2 + gy**2 + gz**2)


def total_variation(vol: Volume) -> float:
    """Mean voxelwise gradient magnitude (forward differences)."""
    return float(np.mean(_gradient_magnitude(vol.data)))


def histogram_entropy(vol: Volume, n_bins: int = 128) -> float:
    """Shannon entropy of the intensity histogram over a fixed range.

    The range is the symmetric attenuation window [-0.01, 0.07] 1/mm, wide
    enough for head-like phantoms including streak under/overshoots.
    """
    hist, _ = np.histogram(vol.data, bins=n_bins, range=(-0.01, 0.07))
    p = hist / max(1, vol.data.size)
    p = p[p > 0]
    return float(-np.sum(p * np.log2(p)))


def gradient_l1(vol: Volume) -> float:
    """Mean gradient magnitude inside the inscribed cylindrical field of view."""
    nx, ny, _ = vol.shape
    ix = np.arange(nx) - (nx - 1) / 2.0
    iy = np.arange(ny) - (ny - 1) / 2.0
    r2 = (ix[:, None] / (nx / 2.0)) ** 2 + (iy[None, :] / (ny / 2.0)) ** 2
    mask = r2 <= 1.0
    grad = _gradient_magnitude(vol.data)
    return float(np.mean(grad[mask, :]))


QUALITY_METRICS = {
    "total_variation": total_variation,
    "histogram_entropy": histogram_entropy,
    "gradient_l1": gradient_l1,
}


def evaluate_quality(vol: Volume, kind: str = "total_variation") -> float:
    """Score a reconstruction; lower is better for every metric kind."""
    try:
        metric = QUALITY_METRICS[kind]
    except KeyError:
        raise ValueError(
            f"unknown quality metric {kind!r}; choose from "
            f"{sorted(QUALITY_METRICS)}"
        ) from None
    return metric(vol)
