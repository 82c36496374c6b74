import json

import numpy as np
import pytest

from ctmoco.volume import (
    Sinogram,
    Volume,
    load_sinogram,
    load_volume,
    save_sinogram,
    save_volume,
)


class TestVolume:
    def test_centered_origin(self):
        vol = Volume.centered(np.zeros((5, 5, 5)), 2.0)
        assert vol.origin == (-4.0, -4.0, -4.0)
        assert vol.voxel_centers_axis(0)[2] == 0.0

    def test_rejects_non_finite(self):
        data = np.zeros((3, 3, 3))
        data[1, 1, 1] = np.nan
        with pytest.raises(ValueError):
            Volume(data, (1, 1, 1), (0, 0, 0))

    def test_rejects_bad_spacing(self):
        with pytest.raises(ValueError):
            Volume(np.zeros((3, 3, 3)), (1, 0, 1), (0, 0, 0))


class TestRawRoundTrip:
    def test_volume_round_trip(self, tmp_path):
        rng = np.random.default_rng(0)
        vol = Volume(rng.random((4, 5, 6)), (1.0, 2.0, 3.0), (-1.0, 0.0, 1.0))
        path = tmp_path / "vol.raw"
        save_volume(path, vol)
        restored = load_volume(path)
        np.testing.assert_allclose(restored.data, vol.data, atol=1e-6)
        assert restored.spacing == vol.spacing
        assert restored.origin == vol.origin

    def test_volume_file_is_x_fastest_float32(self, tmp_path):
        vol = Volume(
            np.arange(24, dtype=float).reshape(2, 3, 4), (1, 1, 1), (0, 0, 0)
        )
        path = tmp_path / "vol.raw"
        save_volume(path, vol)
        flat = np.fromfile(path, dtype="<f4")
        # first two file samples walk the x axis (stride 12 in memory)
        assert flat[0] == vol.data[0, 0, 0]
        assert flat[1] == vol.data[1, 0, 0]
        sidecar = json.loads((tmp_path / "vol.raw.json").read_text())
        assert sidecar["axis_order"] == "x-fastest"
        assert sidecar["shape"] == [2, 3, 4]

    def test_sinogram_round_trip(self, tmp_path):
        rng = np.random.default_rng(1)
        sino = Sinogram(rng.random((3, 4, 5)))
        path = tmp_path / "sino.raw"
        save_sinogram(path, sino)
        np.testing.assert_allclose(load_sinogram(path).data, sino.data, atol=1e-6)

    def test_truncated_file_rejected(self, tmp_path):
        vol = Volume(np.zeros((4, 4, 4)), (1, 1, 1), (0, 0, 0))
        path = tmp_path / "vol.raw"
        save_volume(path, vol)
        path.write_bytes(path.read_bytes()[:-8])
        with pytest.raises(ValueError):
            load_volume(path)
