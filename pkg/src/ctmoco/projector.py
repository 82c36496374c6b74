"""Cone-beam forward projection and FDK-style filtered backprojection.

Both operators work directly on 3x4 projection matrices, so perturbed
trajectories need no special handling. The FDK pipeline decomposes exactly
into `filter_sinogram` (cosine weighting + row-wise Ram-Lak filtering,
trajectory-independent) followed by `backproject` (voxel-driven, with
inverse-square distance weighting and the angular-step scaling). The
autofocus loop relies on that split to filter once and backproject many
times.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from .geometry import ScanGeometry, Trajectory
from .validation import check_condition
from .volume import Sinogram, Volume

__all__ = [
    "forward_project",
    "filter_sinogram",
    "backproject",
    "fdk_reconstruct",
]


def _check_traj(traj: Trajectory, geom: ScanGeometry) -> None:
    check_condition(
        len(traj) == geom.n_projections,
        f"trajectory length {len(traj)} does not match geometry "
        f"({geom.n_projections} projections)",
    )


# ---------------------------------------------------------------------------
# Forward projection
# ---------------------------------------------------------------------------

@njit(cache=True)
def _forward_kernel(vol, nx, ny, nz, ox, oy, oz, sx, sy, sz,
                    minv, sources, rows, cols, step):
    n_views = minv.shape[0]
    out = np.zeros((n_views, rows, cols))
    x1 = ox + (nx - 1) * sx
    y1 = oy + (ny - 1) * sy
    z1 = oz + (nz - 1) * sz
    for view in range(n_views):
        cx = sources[view, 0]
        cy = sources[view, 1]
        cz = sources[view, 2]
        for iv in range(rows):
            for iu in range(cols):
                dx = minv[view, 0, 0] * iu + minv[view, 0, 1] * iv + minv[view, 0, 2]
                dy = minv[view, 1, 0] * iu + minv[view, 1, 1] * iv + minv[view, 1, 2]
                dz = minv[view, 2, 0] * iu + minv[view, 2, 1] * iv + minv[view, 2, 2]
                norm = np.sqrt(dx * dx + dy * dy + dz * dz)
                dx /= norm
                dy /= norm
                dz /= norm
                # orient the ray from the source toward the isocenter side
                if dx * (-cx) + dy * (-cy) + dz * (-cz) < 0.0:
                    dx = -dx
                    dy = -dy
                    dz = -dz
                # slab intersection with the trilinear support box
                tmin = 0.0
                tmax = 1e30
                hit = True
                for axis in range(3):
                    if axis == 0:
                        d, c, lo, hi = dx, cx, ox, x1
                    elif axis == 1:
                        d, c, lo, hi = dy, cy, oy, y1
                    else:
                        d, c, lo, hi = dz, cz, oz, z1
                    if abs(d) < 1e-12:
                        if c < lo or c > hi:
                            hit = False
                            break
                    else:
                        t0 = (lo - c) / d
                        t1 = (hi - c) / d
                        if t0 > t1:
                            t0, t1 = t1, t0
                        if t0 > tmin:
                            tmin = t0
                        if t1 < tmax:
                            tmax = t1
                if not hit or tmax <= tmin:
                    continue
                acc = 0.0
                t = tmin + 0.5 * step
                while t < tmax:
                    px = (cx + t * dx - ox) / sx
                    py = (cy + t * dy - oy) / sy
                    pz = (cz + t * dz - oz) / sz
                    i0 = int(np.floor(px))
                    j0 = int(np.floor(py))
                    k0 = int(np.floor(pz))
                    if 0 <= i0 < nx - 1 and 0 <= j0 < ny - 1 and 0 <= k0 < nz - 1:
                        fx = px - i0
                        fy = py - j0
                        fz = pz - k0
                        c00 = vol[i0, j0, k0] * (1 - fx) + vol[i0 + 1, j0, k0] * fx
                        c10 = vol[i0, j0 + 1, k0] * (1 - fx) + vol[i0 + 1, j0 + 1, k0] * fx
                        c01 = vol[i0, j0, k0 + 1] * (1 - fx) + vol[i0 + 1, j0, k0 + 1] * fx
                        c11 = vol[i0, j0 + 1, k0 + 1] * (1 - fx) + vol[i0 + 1, j0 + 1, k0 + 1] * fx
                        acc += (c00 * (1 - fy) + c10 * fy) * (1 - fz) + (
                            c01 * (1 - fy) + c11 * fy
                        ) * fz
                    t += step
                out[view, iv, iu] = acc * step
    return out


def forward_project(vol: Volume, traj: Trajectory, geom: ScanGeometry) -> Sinogram:
    """Line integrals (mm-weighted) of `vol` along every detector ray.

    Rays are sampled uniformly at step min(spacing) / 2 with trilinear
    interpolation; rays that miss the volume contribute 0.
    """
    _check_traj(traj, geom)
    left = traj.matrices[:, :, :3]
    dets = np.linalg.det(left)
    if np.any(np.abs(dets) < 1e-12):
        raise ValueError("projection matrix has a singular 3x3 block")
    minv = np.linalg.inv(left)
    sources = -np.einsum("nij,nj->ni", minv, traj.matrices[:, :, 3])
    step = min(vol.spacing) / 2.0
    data = _forward_kernel(
        np.ascontiguousarray(vol.data),
        *vol.shape,
        *vol.origin,
        *vol.spacing,
        np.ascontiguousarray(minv),
        np.ascontiguousarray(sources),
        geom.detector_rows,
        geom.detector_cols,
        step,
    )
    return Sinogram(data)


# ---------------------------------------------------------------------------
# Filtering
# ---------------------------------------------------------------------------

def _ramp_kernel(n_pad: int, spacing: float) -> np.ndarray:
    """Discrete Ram-Lak impulse response on a circular buffer of n_pad taps."""
    idx = np.fft.fftfreq(n_pad, d=1.0 / n_pad).astype(np.int64)
    h = np.zeros(n_pad)
    h[0] = 1.0 / (4.0 * spacing**2)
    odd = idx % 2 != 0
    h[odd] = -1.0 / (np.pi * idx[odd] * spacing) ** 2
    return h


def filter_sinogram(sino: Sinogram, geom: ScanGeometry) -> Sinogram:
    """Cosine weighting plus row-wise Ram-Lak ramp filtering.

    Rows are filtered along the detector-u direction on the virtual
    detector at the isocenter (pixel pitch scaled by SID / SDD), zero-padded
    to the next power of two >= 2 * cols to avoid circular-convolution wrap.
    The result is independent of the trajectory perturbation, so it can be
    reused across backprojections.
    """
    check_condition(
        sino.shape[1:] == (geom.detector_rows, geom.detector_cols),
        f"sinogram shape {sino.shape} does not match detector "
        f"({geom.detector_rows}, {geom.detector_cols})",
    )
    cu, cv = geom.principal_point
    sdd = geom.source_detector_dist
    u_off = (np.arange(geom.detector_cols) - cu) * geom.pixel_spacing_u
    v_off = (np.arange(geom.detector_rows) - cv) * geom.pixel_spacing_v
    cosine = sdd / np.sqrt(
        sdd**2 + u_off[None, :] ** 2 + v_off[:, None] ** 2
    )
    weighted = sino.data * cosine[None, :, :]

    d_virtual = geom.pixel_spacing_u * geom.source_isocenter_dist / sdd
    n_pad = 1 << int(np.ceil(np.log2(2 * geom.detector_cols)))
    response = np.fft.fft(_ramp_kernel(n_pad, d_virtual))
    spectra = np.fft.fft(weighted, n=n_pad, axis=-1)
    filtered = np.real(np.fft.ifft(spectra * response, axis=-1))
    return Sinogram(d_virtual * filtered[..., : geom.detector_cols])


# ---------------------------------------------------------------------------
# Backprojection
# ---------------------------------------------------------------------------

@njit(cache=True)
def _backproject_kernel(proj, mats, nx, ny, nz, ox, oy, oz, sx, sy, sz,
                        rows, cols, dist_weight_scale, obliquity, cu, cv,
                        su, sv, sdd):
    n_views = mats.shape[0]
    out = np.zeros((nx, ny, nz))
    for ix in range(nx):
        x = ox + ix * sx
        for iy in range(ny):
            y = oy + iy * sy
            for iz in range(nz):
                z = oz + iz * sz
                acc = 0.0
                for view in range(n_views):
                    w = (
                        mats[view, 2, 0] * x
                        + mats[view, 2, 1] * y
                        + mats[view, 2, 2] * z
                        + mats[view, 2, 3]
                    )
                    if w <= 1e-9:
                        continue
                    u = (
                        mats[view, 0, 0] * x
                        + mats[view, 0, 1] * y
                        + mats[view, 0, 2] * z
                        + mats[view, 0, 3]
                    ) / w
                    v = (
                        mats[view, 1, 0] * x
                        + mats[view, 1, 1] * y
                        + mats[view, 1, 2] * z
                        + mats[view, 1, 3]
                    ) / w
                    iu = int(np.floor(u))
                    iv = int(np.floor(v))
                    if 0 <= iu < cols - 1 and 0 <= iv < rows - 1:
                        fu = u - iu
                        fv = v - iv
                        val = (
                            proj[view, iv, iu] * (1 - fu) * (1 - fv)
                            + proj[view, iv, iu + 1] * fu * (1 - fv)
                            + proj[view, iv + 1, iu] * (1 - fu) * fv
                            + proj[view, iv + 1, iu + 1] * fu * fv
                        )
                        weight = dist_weight_scale / (w * w)
                        if obliquity:
                            u_off = (u - cu) * su
                            v_off = (v - cv) * sv
                            weight *= np.sqrt(
                                sdd * sdd + u_off * u_off + v_off * v_off
                            ) / sdd
                        acc += val * weight
                out[ix, iy, iz] = acc
    return out


def _normalized_matrices(traj: Trajectory) -> np.ndarray:
    """Scale each matrix so the homogeneous coordinate is depth in mm."""
    mats = traj.matrices.copy()
    scale = np.linalg.norm(mats[:, 2, :3], axis=1)
    if np.any(scale < 1e-15):
        raise ValueError("projection matrix has a degenerate third row")
    mats /= scale[:, None, None]
    # sign such that the isocenter lies in front of the source
    flip = mats[:, 2, 3] < 0
    mats[flip] *= -1.0
    return mats


def backproject(
    filtered: Sinogram,
    traj: Trajectory,
    geom: ScanGeometry,
    out_shape,
    out_spacing,
    weighting: str = "fdk",
) -> Volume:
    """Voxel-driven backprojection of (already filtered) projection data.

    With `weighting="fdk"` (the reconstruction mode) each voxel accumulates
    bilinear detector samples weighted by SID^2 / depth^2, scaled by half
    the angular step (full-scan redundancy); `fdk_reconstruct` is exactly
    this applied to `filter_sinogram` output. With `weighting="adjoint"`
    the weights make the operator the adjoint of `forward_project`
    (including its scale), for use in operator-consistency checks.
    The output grid is centered on the world origin.
    """
    _check_traj(traj, geom)
    check_condition(
        filtered.shape[1:] == (geom.detector_rows, geom.detector_cols),
        f"sinogram shape {filtered.shape} does not match detector "
        f"({geom.detector_rows}, {geom.detector_cols})",
    )
    mats = _normalized_matrices(traj)
    out = Volume.centered(
        np.zeros(tuple(int(n) for n in np.broadcast_to(out_shape, (3,)))),
        out_spacing,
    )
    sdd = geom.source_detector_dist
    if weighting == "fdk":
        d_beta = geom.angular_range / geom.n_projections
        scale = 0.5 * d_beta * geom.source_isocenter_dist**2
        obliquity = False
    elif weighting == "adjoint":
        # ray-sample density per unit volume at depth w is
        # SDD^2 / (pixel area * obliquity * w^2); trilinear footprints
        # integrate to the voxel volume
        scale = (
            sdd**2
            * float(np.prod(out.spacing))
            / (geom.pixel_spacing_u * geom.pixel_spacing_v)
        )
        obliquity = True
    else:
        raise ValueError(f"unknown weighting {weighting!r}")
    cu, cv = geom.principal_point
    data = _backproject_kernel(
        np.ascontiguousarray(filtered.data),
        np.ascontiguousarray(mats),
        *out.shape,
        *out.origin,
        *out.spacing,
        geom.detector_rows,
        geom.detector_cols,
        scale,
        obliquity,
        cu,
        cv,
        geom.pixel_spacing_u,
        geom.pixel_spacing_v,
        sdd,
    )
    return Volume(data, out.spacing, out.origin)


def fdk_reconstruct(
    sino: Sinogram,
    traj: Trajectory,
    geom: ScanGeometry,
    out_shape,
    out_spacing,
) -> Volume:
    """Feldkamp-style reconstruction: weight, ramp-filter, backproject."""
    return backproject(filter_sinogram(sino, geom), traj, geom, out_shape, out_spacing)
