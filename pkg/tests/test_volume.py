import dataclasses

import numpy as np
import pytest

from dichoptic import volume as vol
from dichoptic.geometry import LEFT, RIGHT

from oracles import ball_voxel_count, count_label_voxels

SIZE = (96, 96)


def small_grid(dims=(12, 12, 12), spacing=(1.0, 1.0, 1.0)):
    return vol.VolumeGrid(
        scalars=np.zeros(dims, dtype=np.uint8), spacing=spacing, value_range=(0.0, 255.0)
    )


class TestBrush:
    def test_radius_smaller_than_voxel_gap_changes_nothing(self):
        grid = small_grid()
        mask = vol.MaskVolume.zeros(grid.dims)
        # corner point is sqrt(3)/2 voxels from the nearest center
        vol.brush_erase(mask, center=(6.0, 6.0, 6.0), radius=0.25, grid=grid)
        assert mask.bits.sum() == 0

    def test_set_then_clear_restores(self):
        grid = small_grid()
        mask = vol.MaskVolume.zeros(grid.dims)
        vol.brush_erase(mask, center=(5.0, 5.0, 5.0), radius=3.0, grid=grid, mode="set")
        assert mask.bits.sum() > 0
        vol.brush_erase(mask, center=(5.0, 5.0, 5.0), radius=3.0, grid=grid, mode="clear")
        assert mask.bits.sum() == 0

    def test_set_is_idempotent(self):
        grid = small_grid()
        mask = vol.MaskVolume.zeros(grid.dims)
        vol.brush_erase(mask, center=(4.5, 6.0, 6.5), radius=2.5, grid=grid)
        first = mask.bits.copy()
        vol.brush_erase(mask, center=(4.5, 6.0, 6.5), radius=2.5, grid=grid)
        assert np.array_equal(mask.bits, first)

    def test_ball_volume_matches_brute_force(self):
        grid = small_grid(dims=(16, 16, 16))
        mask = vol.MaskVolume.zeros(grid.dims)
        center, radius = (7.3, 8.1, 6.6), 4.2
        vol.brush_erase(mask, center=center, radius=radius, grid=grid)
        expected = ball_voxel_count(center, radius, grid.dims)
        assert int(mask.bits.sum()) == expected

    def test_out_of_bounds_clips_silently(self):
        grid = small_grid()
        mask = vol.MaskVolume.zeros(grid.dims)
        vol.brush_erase(mask, center=(-5.0, 6.0, 6.0), radius=6.5, grid=grid)
        assert mask.bits.sum() > 0  # the in-bounds cap of the sphere

    def test_parameter_validation(self):
        grid = small_grid()
        mask = vol.MaskVolume.zeros(grid.dims)
        with pytest.raises(ValueError):
            vol.brush_erase(mask, (0, 0, 0), 0.0, grid)
        with pytest.raises(ValueError):
            vol.brush_erase(mask, (0, 0, 0), 1.0, grid, mode="toggle")


class TestSegmentMask:
    def test_uniform_labels_all_set(self):
        labels = np.full((6, 6, 6), 3, dtype=np.int32)
        mask = vol.mask_from_segment(labels, 3)
        assert mask.bits.all()

    def test_absent_id_warns_and_is_empty(self):
        labels = np.zeros((6, 6, 6), dtype=np.int32)
        with pytest.warns(UserWarning, match="not present"):
            mask = vol.mask_from_segment(labels, 7)
        assert not mask.bits.any()

    def test_popcount_matches_linear_scan(self):
        rng = np.random.default_rng(3)
        labels = rng.integers(0, 4, size=(9, 8, 7)).astype(np.int32)
        mask = vol.mask_from_segment(labels, 2)
        assert int(mask.bits.sum()) == count_label_voxels(labels, 2)


class TestRawIO:
    def test_load_valid_8bit(self, tmp_path):
        data = np.arange(64**3, dtype=np.uint8).reshape(64, 64, 64)
        (tmp_path / "vol.raw").write_bytes(data.tobytes())
        header = tmp_path / "vol.hdr"
        header.write_text("dims: 64 64 64\nspacing: 1 1 1\nbits: 8\nvalue_range: 0 255\ndata: vol.raw\n")
        grid = vol.load_raw_volume(header)
        assert grid.dims == (64, 64, 64)
        assert (tmp_path / "vol.raw").stat().st_size == 262144
        assert np.array_equal(grid.scalars, data)

    def test_short_file_rejected(self, tmp_path):
        (tmp_path / "vol.raw").write_bytes(b"\x00" * (64**3 - 1))
        header = tmp_path / "vol.hdr"
        header.write_text("dims: 64 64 64\nbits: 8\ndata: vol.raw\n")
        with pytest.raises(vol.VolumeFormatError, match="bytes"):
            vol.load_raw_volume(header)

    def test_unknown_bit_depth_rejected(self, tmp_path):
        (tmp_path / "vol.raw").write_bytes(b"\x00" * 8)
        header = tmp_path / "vol.hdr"
        header.write_text("dims: 2 2 2\nbits: 12\ndata: vol.raw\n")
        with pytest.raises(vol.VolumeFormatError, match="bit depth"):
            vol.load_raw_volume(header)

    def test_round_trip_16bit(self, tmp_path):
        rng = np.random.default_rng(5)
        grid = vol.VolumeGrid(
            scalars=rng.integers(0, 4000, size=(8, 9, 10)).astype(np.uint16),
            spacing=(0.5, 1.0, 2.0),
            value_range=(0.0, 4000.0),
        )
        header = vol.save_raw_volume(grid, tmp_path / "v.hdr")
        loaded = vol.load_raw_volume(header)
        assert np.array_equal(loaded.scalars, grid.scalars)
        assert loaded.spacing == grid.spacing

    def test_mask_round_trip(self, tmp_path):
        rng = np.random.default_rng(6)
        mask = vol.MaskVolume(bits=rng.random((7, 9, 11)) < 0.3)
        header = vol.save_mask(mask, tmp_path / "m.hdr")
        loaded = vol.load_mask(header)
        assert np.array_equal(loaded.bits, mask.bits)


class TestTransferFunctions:
    def test_text_round_trip(self, tmp_path):
        tf = vol.greyscale_transfer_function()
        path = vol.save_transfer_function(tf, tmp_path / "tf.txt")
        loaded = vol.load_transfer_function(path)
        assert loaded == tf

    def test_unsorted_points_rejected(self):
        with pytest.raises(ValueError):
            vol.TransferFunction(
                control_points=((10.0, (0, 0, 0, 0)), (5.0, (1, 1, 1, 1)))
            )

    def test_opacity_range_enforced(self):
        with pytest.raises(ValueError):
            vol.TransferFunction(
                control_points=((0.0, (0, 0, 0, 0)), (255.0, (1, 1, 1, 1.5)))
            )


class TestPhantoms:
    def test_nested_spheres_labels_match_analytic_radii(self, phantoms):
        grid, labels = phantoms["nested_spheres"]
        dims = grid.dims
        pad = vol.EDGE_RAMP_MM + vol.LABEL_DILATION_MM
        bands = [(label, lo, hi) for label, lo, hi, _ in vol.nested_sphere_bands(dims)]
        rng = np.random.default_rng(9)
        center = np.asarray(dims) / 2.0
        for _ in range(3000):
            i, j, k = (int(rng.integers(0, d)) for d in dims)
            r = np.sqrt(
                (i + 0.5 - center[0]) ** 2 + (j + 0.5 - center[1]) ** 2 + (k + 0.5 - center[2]) ** 2
            )
            expected = 0
            for label, lo, hi in bands:
                if max(lo - pad, 0.0) <= r <= hi + pad:
                    expected = label
            assert labels[i, j, k] == expected

    def test_scalars_only_inside_labels(self, phantoms):
        for kind, (grid, labels) in phantoms.items():
            assert not (grid.scalars[labels == 0] > 0).any(), kind
            assert (grid.scalars > 0).sum() > 0, kind

    def test_segment_ids(self, phantoms):
        for kind, (grid, labels) in phantoms.items():
            ids = set(np.unique(labels)) - {0}
            expected = {1} if kind == "gradient_block" else {1, 2, 3}
            assert ids == expected, kind

    def test_small_dims_rejected(self):
        with pytest.raises(ValueError):
            vol.make_phantom("nested_spheres", (48, 48, 48))

    def test_unknown_kind_rejected(self):
        with pytest.raises(ValueError):
            vol.make_phantom("swiss_cheese", (48, 48, 48))


def render_pair(grid, tf, mask, settings, size=SIZE, eye_separation=63.0, **view_kw):
    lv, rv = vol.orbit_views(grid, size, eye_separation=eye_separation, **view_kw)
    left = vol.raycast(grid, tf, mask, lv, settings, size)
    right = vol.raycast(grid, tf, mask, rv, settings, size)
    return left, right


class TestRaycastMaskSemantics:
    def test_empty_mask_zero_separation_identity(self, phantoms):
        grid, _ = phantoms["nested_spheres"]
        tf = vol.greyscale_transfer_function()
        mask = vol.MaskVolume.zeros(grid.dims)
        settings = vol.RenderSettings(deadeye=RIGHT)
        left, right = render_pair(grid, tf, mask, settings, eye_separation=0.0)
        assert np.array_equal(left.pixels, right.pixels)

    def test_full_mask_suppressed_eye_is_pure_background(self, phantoms):
        grid, _ = phantoms["tube_tangle"]
        tf = vol.greyscale_transfer_function()
        full = vol.MaskVolume(bits=np.ones(grid.dims, dtype=bool))
        settings = vol.RenderSettings(deadeye=RIGHT, background=(0.1, 0.2, 0.3))
        lv, rv = vol.orbit_views(grid, SIZE)
        right = vol.raycast(grid, tf, full, rv, settings, SIZE)
        bg = (np.round(np.array([0.1, 0.2, 0.3]) * 255.0 + 0.5)).astype(np.uint8)
        expected = np.broadcast_to(bg, right.pixels.shape)
        assert np.array_equal(right.pixels, np.minimum(expected, right.pixels))
        assert len(np.unique(right.pixels.reshape(-1, 3), axis=0)) == 1
        # the unsuppressed eye is unchanged
        left_masked = vol.raycast(grid, tf, full, lv, settings, SIZE)
        left_plain = vol.raycast(
            grid, tf, vol.MaskVolume.zeros(grid.dims), lv, settings, SIZE
        )
        assert np.array_equal(left_masked.pixels, left_plain.pixels)

    # visible segments: the outer sphere shell, the block, the third tube
    @pytest.mark.parametrize(
        "kind,segment", [("nested_spheres", 3), ("gradient_block", 1), ("tube_tangle", 3)]
    )
    def test_zero_opacity_substitution_oracle(self, phantoms, kind, segment):
        grid, labels = phantoms[kind]
        tf = vol.greyscale_transfer_function()
        mask = vol.mask_from_segment(labels, segment)
        settings = vol.RenderSettings(deadeye=RIGHT)
        _, rv = vol.orbit_views(grid, SIZE)
        masked = vol.raycast_float(grid, tf, mask, rv, settings, SIZE)
        substituted = vol.VolumeGrid(
            scalars=np.where(mask.bits, 0, grid.scalars).astype(grid.scalars.dtype),
            spacing=grid.spacing,
            value_range=grid.value_range,
        )
        oracle = vol.raycast_float(
            substituted, tf, vol.MaskVolume.zeros(grid.dims), rv, settings, SIZE
        )
        plain = vol.raycast_float(grid, tf, vol.MaskVolume.zeros(grid.dims), rv, settings, SIZE)
        assert np.max(np.abs(masked - plain)) > 0.05  # the suppression is visible
        assert np.max(np.abs(masked - oracle)) < 1e-6

    def test_mask_does_not_touch_unsuppressed_eye(self, phantoms):
        grid, labels = phantoms["nested_spheres"]
        tf = vol.greyscale_transfer_function()
        mask = vol.mask_from_segment(labels, 2)
        settings = vol.RenderSettings(deadeye=RIGHT)
        lv, _ = vol.orbit_views(grid, SIZE)
        masked = vol.raycast(grid, tf, mask, lv, settings, SIZE)
        plain = vol.raycast(grid, tf, vol.MaskVolume.zeros(grid.dims), lv, settings, SIZE)
        assert np.array_equal(masked.pixels, plain.pixels)

    def test_suppression_changes_only_rays_through_mask_region(self, phantoms):
        grid, labels = phantoms["nested_spheres"]
        tf = vol.greyscale_transfer_function()
        mask = vol.mask_from_segment(labels, 3)
        settings = vol.RenderSettings(deadeye=RIGHT)
        _, rv = vol.orbit_views(grid, SIZE)
        suppressed = vol.raycast(grid, tf, mask, rv, settings, SIZE)
        plain = vol.raycast(grid, tf, vol.MaskVolume.zeros(grid.dims), rv, settings, SIZE)
        changed = np.any(suppressed.pixels != plain.pixels, axis=2)
        assert changed.any()
        # project the mask's bounding sphere and require all diffs inside it
        idx = np.argwhere(mask.bits)
        lo = (idx.min(axis=0)) * np.asarray(grid.spacing)
        hi = (idx.max(axis=0) + 1.0) * np.asarray(grid.spacing)
        centre = (lo + hi) / 2.0
        radius = float(np.linalg.norm(hi - lo) / 2.0)
        from dichoptic.rasterizer import ray_grid

        dirs = ray_grid(rv, SIZE)
        oc = rv.origin_vec() - centre
        b = dirs @ oc
        c = float(oc @ oc) - radius * radius
        hits_region = (b * b - c) >= 0.0
        assert not (changed & ~hits_region).any()


class TestRaycastNumerics:
    def test_step_halving_convergence(self, phantoms):
        for kind in vol.PHANTOM_KINDS:
            grid, _ = phantoms[kind]
            tf = vol.greyscale_transfer_function()
            mask = vol.MaskVolume.zeros(grid.dims)
            lv, _ = vol.orbit_views(grid, SIZE)
            # early termination off to isolate compositing convergence
            base = vol.RenderSettings(step_length=0.5, early_termination_alpha=1.0)
            fine = vol.RenderSettings(step_length=0.25, early_termination_alpha=1.0)
            a = vol.raycast(grid, tf, mask, lv, base, SIZE)
            b = vol.raycast(grid, tf, mask, lv, fine, SIZE)
            delta = np.abs(a.pixels.astype(int) - b.pixels.astype(int)).max()
            assert delta <= 2, f"{kind}: max channel delta {delta}"

    def test_early_termination_soundness(self, phantoms):
        for kind in vol.PHANTOM_KINDS:
            grid, _ = phantoms[kind]
            tf = vol.greyscale_transfer_function()
            mask = vol.MaskVolume.zeros(grid.dims)
            lv, _ = vol.orbit_views(grid, SIZE)
            terminated = vol.raycast(grid, tf, mask, lv, vol.RenderSettings(early_termination_alpha=0.99), SIZE)
            exhaustive = vol.raycast(grid, tf, mask, lv, vol.RenderSettings(early_termination_alpha=1.0), SIZE)
            delta = np.abs(terminated.pixels.astype(int) - exhaustive.pixels.astype(int)).max()
            assert delta <= 1, f"{kind}: max channel delta {delta}"

    def test_thread_count_invariance(self, phantoms):
        grid, _ = phantoms["gradient_block"]
        tf = vol.greyscale_transfer_function()
        mask = vol.MaskVolume.zeros(grid.dims)
        lv, _ = vol.orbit_views(grid, SIZE)
        one = vol.raycast(grid, tf, mask, lv, vol.RenderSettings(), SIZE, threads=1)
        many = vol.raycast(grid, tf, mask, lv, vol.RenderSettings(), SIZE, threads=4)
        assert np.array_equal(one.pixels, many.pixels)

    def test_clip_plane_extremes(self, phantoms):
        grid, _ = phantoms["nested_spheres"]
        tf = vol.greyscale_transfer_function()
        mask = vol.MaskVolume.zeros(grid.dims)
        lv, _ = vol.orbit_views(grid, SIZE)
        plain = vol.raycast(grid, tf, mask, lv, vol.RenderSettings(), SIZE)
        keep_all = vol.RenderSettings(clip_plane=((1.0, 0.0, 0.0), 10.0 * float(max(grid.extent))))
        assert np.array_equal(
            vol.raycast(grid, tf, mask, lv, keep_all, SIZE).pixels, plain.pixels
        )
        drop_all = vol.RenderSettings(
            clip_plane=((1.0, 0.0, 0.0), -10.0 * float(max(grid.extent))),
            background=(0.0, 0.0, 0.0),
        )
        clipped = vol.raycast(grid, tf, mask, lv, drop_all, SIZE)
        assert (clipped.pixels == 0).all()

    def test_half_clip_differs(self, phantoms):
        grid, _ = phantoms["nested_spheres"]
        tf = vol.greyscale_transfer_function()
        mask = vol.MaskVolume.zeros(grid.dims)
        lv, _ = vol.orbit_views(grid, SIZE)
        half = vol.RenderSettings(clip_plane=((1.0, 0.0, 0.0), -float(grid.center[0])))
        a = vol.raycast(grid, tf, mask, lv, half, SIZE)
        plain = vol.raycast(grid, tf, mask, lv, vol.RenderSettings(), SIZE)
        assert not np.array_equal(a.pixels, plain.pixels)


class TestRaycastContracts:
    def test_dims_mismatch_rejected(self, phantoms):
        grid, _ = phantoms["gradient_block"]
        tf = vol.greyscale_transfer_function()
        wrong = vol.MaskVolume.zeros((8, 8, 8))
        lv, _ = vol.orbit_views(grid, SIZE)
        with pytest.raises(ValueError, match="dims"):
            vol.raycast(grid, tf, wrong, lv, vol.RenderSettings(), SIZE)

    def test_tf_must_cover_value_range(self, phantoms):
        grid, _ = phantoms["gradient_block"]
        narrow = vol.TransferFunction(
            control_points=((10.0, (0, 0, 0, 0)), (100.0, (1, 1, 1, 0.5)))
        )
        lv, _ = vol.orbit_views(grid, SIZE)
        with pytest.raises(ValueError, match="cover"):
            vol.raycast(grid, narrow, vol.MaskVolume.zeros(grid.dims), lv, vol.RenderSettings(), SIZE)

    def test_settings_validation(self):
        with pytest.raises(ValueError):
            vol.RenderSettings(step_length=0.0)
        with pytest.raises(ValueError):
            vol.RenderSettings(early_termination_alpha=0.0)
        with pytest.raises(ValueError):
            vol.RenderSettings(deadeye="both")
