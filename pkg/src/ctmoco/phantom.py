"""Synthetic ellipsoid phantoms, including a seeded head-like default.

The default phantom stands in for clinical head volumes: a dense skull
shell around soft tissue with a handful of interior structures whose pose
and contrast vary with the seed, so different seeds act like different
patients. Attenuation values are chosen so that line integrals through the
head peak around 2-3 (water-like tissue at 0.018/mm, bone higher).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import rotation_matrix
from .validation import check_condition
from .volume import Volume

__all__ = ["Ellipsoid", "PhantomSpec", "render_phantom", "head_phantom"]


@dataclass(frozen=True)
class Ellipsoid:
    """One additive ellipsoid: center/semi-axes in mm, rotation in degrees."""

    center: tuple[float, float, float]
    semi_axes: tuple[float, float, float]
    rotation_deg: tuple[float, float, float] = (0.0, 0.0, 0.0)
    value: float = 1.0

    def __post_init__(self):
        check_condition(
            all(a > 0 for a in self.semi_axes), "semi-axes must be positive"
        )


@dataclass(frozen=True)
class PhantomSpec:
    """A phantom as a list of additive ellipsoids."""

    ellipsoids: tuple[Ellipsoid, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "ellipsoids", tuple(self.ellipsoids))


def render_phantom(spec: PhantomSpec, shape, spacing) -> Volume:
    """Rasterize a phantom onto a grid centered on the world origin.

    A voxel accumulates the value of every ellipsoid whose interior contains
    the voxel center.
    """
    shape = tuple(int(n) for n in np.broadcast_to(shape, (3,)))
    vol = Volume.centered(np.zeros(shape), spacing)
    xs = vol.voxel_centers_axis(0)
    ys = vol.voxel_centers_axis(1)
    zs = vol.voxel_centers_axis(2)
    gx, gy, gz = np.meshgrid(xs, ys, zs, indexing="ij")
    pts = np.stack([gx, gy, gz], axis=-1)
    data = np.zeros(shape)
    for ell in spec.ellipsoids:
        rot = rotation_matrix(*ell.rotation_deg)
        local = (pts - np.asarray(ell.center)) @ rot  # == R.T applied per point
        scaled = local / np.asarray(ell.semi_axes)
        data[np.einsum("...i,...i->...", scaled, scaled) <= 1.0] += ell.value
    return Volume(data, vol.spacing, vol.origin)


def head_phantom(seed: int = 0) -> PhantomSpec:
    """Seeded head-like phantom: skull shell plus interior structures.

    The skull is a dense ellipsoidal shell (outer ellipsoid minus a
    negative inner one); the interior holds low-contrast "ventricles" and
    "lesions" whose positions, sizes, and orientations jitter with the seed.
    """
    rng = np.random.default_rng(np.random.SeedSequence((0x9EAD, seed)))
    tissue = 0.018
    bone = 0.042
    ellipsoids = [
        Ellipsoid((0.0, 0.0, 0.0), (55.0, 45.0, 50.0), (0.0, 0.0, 0.0), bone),
        Ellipsoid(
            (0.0, 0.0, 0.0), (49.0, 39.5, 44.5), (0.0, 0.0, 0.0), tissue - bone
        ),
    ]
    # two ventricle-like darker pockets, mirrored about x
    for sign in (-1.0, 1.0):
        ellipsoids.append(
            Ellipsoid(
                (
                    sign * (8.0 + rng.uniform(-2, 2)),
                    rng.uniform(-4, 4),
                    6.0 + rng.uniform(-3, 3),
                ),
                (6.0 + rng.uniform(0, 3), 14.0 + rng.uniform(0, 4), 8.0),
                (0.0, 0.0, sign * rng.uniform(0, 25)),
                -0.004,
            )
        )
    # a few brighter lesions at random poses
    for _ in range(3):
        ellipsoids.append(
            Ellipsoid(
                tuple(rng.uniform(-25, 25, size=3) * np.array([1, 0.8, 0.9])),
                tuple(rng.uniform(4, 10, size=3)),
                tuple(rng.uniform(0, 90, size=3)),
                rng.uniform(0.003, 0.006),
            )
        )
    return PhantomSpec(tuple(ellipsoids))
