import numpy as np
import pytest

from ctmoco.phantom import Ellipsoid, PhantomSpec, head_phantom, render_phantom


class TestRenderPhantom:
    def test_empty_spec_is_zero(self):
        vol = render_phantom(PhantomSpec(), 16, 2.0)
        assert not np.any(vol.data)

    def test_covering_ellipsoid_fills_grid(self):
        spec = PhantomSpec((Ellipsoid((0, 0, 0), (1000, 1000, 1000), value=1.0),))
        vol = render_phantom(spec, 8, 2.0)
        np.testing.assert_array_equal(vol.data, 1.0)

    def test_sphere_volume_matches_analytic(self):
        spec = PhantomSpec((Ellipsoid((0, 0, 0), (40, 40, 40), value=0.02),))
        vol = render_phantom(spec, 64, 2.0)
        analytic = 4.0 / 3.0 * np.pi * 40.0**3 * 0.02
        rasterized = vol.data.sum() * 2.0**3
        assert rasterized == pytest.approx(analytic, rel=0.03)

    def test_rotation_moves_off_axis_ellipsoid(self):
        base = Ellipsoid((0, 0, 0), (30, 6, 6), value=1.0)
        rotated = Ellipsoid((0, 0, 0), (30, 6, 6), (0, 0, 90.0), value=1.0)
        vol_a = render_phantom(PhantomSpec((base,)), 32, 2.0)
        vol_b = render_phantom(PhantomSpec((rotated,)), 32, 2.0)
        # the long axis swaps from x to y
        np.testing.assert_array_equal(vol_b.data, vol_a.data.transpose(1, 0, 2))

    def test_invalid_semi_axes(self):
        with pytest.raises(ValueError):
            Ellipsoid((0, 0, 0), (1, -1, 1))


class TestHeadPhantom:
    def test_deterministic_per_seed(self):
        a = render_phantom(head_phantom(3), 32, 4.0)
        b = render_phantom(head_phantom(3), 32, 4.0)
        np.testing.assert_array_equal(a.data, b.data)

    def test_seeds_differ(self):
        a = render_phantom(head_phantom(0), 32, 4.0)
        b = render_phantom(head_phantom(1), 32, 4.0)
        assert not np.array_equal(a.data, b.data)

    def test_skull_denser_than_interior(self):
        vol = render_phantom(head_phantom(0), 64, 2.0)
        center = vol.data[32, 32, 32]
        assert 0.01 < center < 0.03  # soft tissue
        assert vol.data.max() > 0.035  # bone shell

    def test_fits_inside_desk_scale_grid(self):
        vol = render_phantom(head_phantom(0), 64, 2.0)
        assert not np.any(vol.data[0, :, :]) and not np.any(vol.data[-1, :, :])
        assert not np.any(vol.data[:, 0, :]) and not np.any(vol.data[:, -1, :])
