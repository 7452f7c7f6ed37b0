import math

import numpy as np
import pytest

from dichoptic.geometry import (
    BINOCULAR,
    INVALID_LEFT_ONLY,
    INVALID_RIGHT_ONLY,
    VALID_LEFT_ONLY,
    VALID_RIGHT_ONLY,
    ConfigurationError,
    StereoRig,
    angular_size,
    classify_monocular_zone,
    derive_eye_views,
    extent_for_angle,
    solve_layout_distance,
)
from dichoptic.scenes import SceneGeometry, SetConfig
from dichoptic.solids import Box, Sphere

from oracles import closest_point_between_rays


def geometric_fields(view):
    return (view.origin, view.rotation, view.frustum, view.near)


class TestDeriveEyeViews:
    def test_zero_separation_identity(self):
        rig = StereoRig(eye_separation=0.0)
        left, right = derive_eye_views(rig, (640, 480))
        assert geometric_fields(left) == geometric_fields(right)

    def test_eye_offset_along_right_axis(self):
        rig = StereoRig(eye_separation=0.063)
        left, right = derive_eye_views(rig, (512, 512))
        delta = np.asarray(right.origin) - np.asarray(left.origin)
        assert delta == pytest.approx([0.063, 0.0, 0.0], abs=0.0)
        assert left.rotation == right.rotation
        assert left.frustum == right.frustum

    def test_parallel_frusta_symmetric(self):
        left, right = derive_eye_views(StereoRig(), (512, 512))
        l, r, b, t = left.frustum
        assert l == -r and b == -t

    def test_converged_axes_intersect_at_distance(self):
        rig = StereoRig(
            eye_separation=0.063, convergence_mode="converged", convergence_distance=2.0
        )
        left, right = derive_eye_views(rig, (512, 512))
        o1, d1 = left.axis_ray()
        o2, d2 = right.axis_ray()
        point, gap = closest_point_between_rays(o1, d1, o2, d2)
        assert gap < 1e-12
        assert point == pytest.approx([0.0, 0.0, 2.0], abs=1e-9)

    def test_deterministic_bit_identical(self):
        rig = StereoRig(forward=(0.2, -0.1, 0.97), up=(0.0, 1.0, 0.05))
        a = derive_eye_views(rig, (333, 257), fov_y_deg=38.0)
        b = derive_eye_views(rig, (333, 257), fov_y_deg=38.0)
        assert a == b

    def test_degenerate_forward_up_rejected(self):
        rig = StereoRig(forward=(0.0, 1.0, 0.0), up=(0.0, 1.0, 0.0))
        with pytest.raises(ConfigurationError):
            derive_eye_views(rig, (64, 64))

    def test_bad_image_size_rejected(self):
        with pytest.raises(ConfigurationError):
            derive_eye_views(StereoRig(), (0, 64))


class TestAngularMeasures:
    def test_zero_extent(self):
        assert angular_size(0.0, 1.0) == 0.0

    def test_analytic_ninety_degrees(self):
        assert angular_size(2.0, 1.0) == pytest.approx(90.0, abs=1e-12)

    def test_cube_size_solver_hits_target_angle(self):
        # the scene solver picks the extent; plugging it back must give 1.80 deg
        distance = 1.0
        extent = extent_for_angle(1.8, distance)
        assert angular_size(extent, distance) == pytest.approx(1.8, abs=0.01)
        assert angular_size(extent, distance) == pytest.approx(1.8, abs=1e-12)

    def test_distance_error(self):
        with pytest.raises(ValueError):
            angular_size(1.0, 0.0)

    def test_solve_layout_round_trip_residual(self):
        width = 0.532
        distance = solve_layout_distance(width, 14.93)
        residual = abs(width / 2.0 - distance * math.tan(math.radians(14.93)))
        assert residual / (width / 2.0) < 1e-9

    def test_solve_tan_45(self):
        assert solve_layout_distance(2.0, 45.0) == pytest.approx(1.0, rel=1e-12)

    def test_solve_errors(self):
        with pytest.raises(ValueError):
            solve_layout_distance(0.0, 30.0)
        with pytest.raises(ValueError):
            solve_layout_distance(1.0, 90.0)

    def test_vertical_extent_consistent_with_grid(self):
        # the same layout distance must put the outermost row at the vertical angle
        geom = SceneGeometry.from_config(SetConfig(set_kind="exp1_30"))
        half_h = 2.0 * geom.pitch_y
        v_angle = math.degrees(math.atan(half_h / geom.distance))
        assert v_angle == pytest.approx(12.23, abs=0.05)
        half_w = 2.5 * geom.pitch_x
        h_angle = math.degrees(math.atan(half_w / geom.distance))
        assert h_angle == pytest.approx(14.93, abs=0.05)

    @pytest.mark.parametrize("theta", [0.1, 0.5, 2.0, 10.0, 30.0, 45.0, 60.0, 79.9])
    def test_mutual_inverse_property(self, theta):
        width = 0.73
        distance = solve_layout_distance(width, theta)
        # full visual angle of the grid width equals twice the half angle
        assert angular_size(width, distance) == pytest.approx(2.0 * theta, rel=1e-9)


def fig2b_occluders():
    # near surface centered between the eyes, in front of a far plane
    return [Box(center=(0.0, 0.0, 1.0), half_extents=(0.1, 0.1, 0.01))]


class TestMonocularZones:
    def test_no_occluders_binocular(self):
        rig = StereoRig()
        assert classify_monocular_zone((0.0, 0.0, 2.0), [], rig) == BINOCULAR

    def test_far_plane_left_edge_is_valid_left_only(self):
        rig = StereoRig(eye_separation=0.06)
        zone = classify_monocular_zone((-0.18, 0.0, 2.0), fig2b_occluders(), rig)
        assert zone == VALID_LEFT_ONLY

    def test_far_plane_right_edge_is_valid_right_only(self):
        rig = StereoRig(eye_separation=0.06)
        zone = classify_monocular_zone((0.18, 0.0, 2.0), fig2b_occluders(), rig)
        assert zone == VALID_RIGHT_ONLY

    def test_suppressed_target_without_occluder_is_invalid(self):
        rig = StereoRig()
        point = (0.05, 0.02, 1.5)
        assert classify_monocular_zone(point, [], rig, presented_to="left") == INVALID_LEFT_ONLY
        assert classify_monocular_zone(point, [], rig, presented_to="right") == INVALID_RIGHT_ONLY

    def test_suppression_with_real_occluder_stays_valid(self):
        # geometry alone explains the monocularity, suppression or not
        rig = StereoRig(eye_separation=0.06)
        zone = classify_monocular_zone(
            (-0.18, 0.0, 2.0), fig2b_occluders(), rig, presented_to="left"
        )
        assert zone == VALID_LEFT_ONLY

    def test_hidden_from_both_eyes_raises(self):
        rig = StereoRig(eye_separation=0.06)
        with pytest.raises(ValueError):
            classify_monocular_zone((0.0, 0.0, 2.0), fig2b_occluders(), rig)

    def test_point_inside_occluder_raises(self):
        rig = StereoRig()
        with pytest.raises(ValueError):
            classify_monocular_zone((0.0, 0.0, 1.0), fig2b_occluders(), rig)

    def test_mirror_symmetry_over_random_scenes(self):
        rng = np.random.default_rng(42)
        rig = StereoRig(eye_separation=0.06)
        mirrored = {
            BINOCULAR: BINOCULAR,
            VALID_LEFT_ONLY: VALID_RIGHT_ONLY,
            VALID_RIGHT_ONLY: VALID_LEFT_ONLY,
            INVALID_LEFT_ONLY: INVALID_RIGHT_ONLY,
            INVALID_RIGHT_ONLY: INVALID_LEFT_ONLY,
        }
        checked = 0
        for _ in range(100):
            occluders = []
            for _ in range(rng.integers(1, 4)):
                cx, cy = rng.uniform(-0.25, 0.25, 2)
                cz = rng.uniform(0.6, 1.4)
                if rng.random() < 0.5:
                    occluders.append(Box((cx, cy, cz), tuple(rng.uniform(0.02, 0.12, 3))))
                else:
                    occluders.append(Sphere((cx, cy, cz), float(rng.uniform(0.02, 0.12))))
            point = (float(rng.uniform(-0.4, 0.4)), float(rng.uniform(-0.3, 0.3)), 2.0)
            presented = rng.choice(["both", "left", "right"])
            mirrored_occluders = [
                Box((-o.center[0], o.center[1], o.center[2]), o.half_extents)
                if isinstance(o, Box)
                else Sphere((-o.center[0], o.center[1], o.center[2]), o.radius)
                for o in occluders
            ]
            mirrored_point = (-point[0], point[1], point[2])
            swap = {"both": "both", "left": "right", "right": "left"}
            try:
                zone = classify_monocular_zone(point, occluders, rig, presented_to=presented)
            except ValueError:
                with pytest.raises(ValueError):
                    classify_monocular_zone(
                        mirrored_point, mirrored_occluders, rig, presented_to=swap[presented]
                    )
                continue
            mirror_zone = classify_monocular_zone(
                mirrored_point, mirrored_occluders, rig, presented_to=swap[presented]
            )
            assert mirror_zone == mirrored[zone]
            checked += 1
        assert checked >= 50  # most random scenes must be classifiable


class TestRigValidation:
    def test_negative_separation_rejected(self):
        with pytest.raises(ConfigurationError):
            StereoRig(eye_separation=-0.01)

    def test_converged_needs_distance(self):
        with pytest.raises(ConfigurationError):
            StereoRig(convergence_mode="converged")

    def test_bad_near_plane(self):
        with pytest.raises(ConfigurationError):
            StereoRig(near_plane=0.0)
