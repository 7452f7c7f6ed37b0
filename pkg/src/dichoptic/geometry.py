"""Per-eye camera derivation, angular measures, and monocular-zone classification.

Coordinate conventions: right-handed world frame; a rig looks along its
(orthonormalized) forward vector with ``right = up x forward``. Camera space
has x = right, y = up, z = forward; projection uses an off-axis frustum
given by left/right/bottom/top window bounds on the near plane.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .solids import Solid, contains, first_hit

Vec3 = tuple[float, float, float]

LEFT = "left"
RIGHT = "right"

BINOCULAR = "binocular"
VALID_LEFT_ONLY = "valid_left_only"
VALID_RIGHT_ONLY = "valid_right_only"
INVALID_LEFT_ONLY = "invalid_left_only"
INVALID_RIGHT_ONLY = "invalid_right_only"

ZONE_CLASSES = (
    BINOCULAR,
    VALID_LEFT_ONLY,
    VALID_RIGHT_ONLY,
    INVALID_LEFT_ONLY,
    INVALID_RIGHT_ONLY,
)

DEFAULT_EYE_SEPARATION = 0.063  # meters; population-median interpupillary distance


class ConfigurationError(ValueError):
    """Rig or view parameters are degenerate or inconsistent."""


@dataclass(frozen=True)
class StereoRig:
    """Interpupillary geometry from which both eye cameras derive.

    ``convergence_mode`` is "parallel" (default, HMD-style) or "converged",
    in which case ``convergence_distance`` gives the distance at which the
    two optical axes cross.
    """

    eye_separation: float = DEFAULT_EYE_SEPARATION
    head_position: Vec3 = (0.0, 0.0, 0.0)
    forward: Vec3 = (0.0, 0.0, 1.0)
    up: Vec3 = (0.0, 1.0, 0.0)
    near_plane: float = 0.05
    convergence_mode: str = "parallel"
    convergence_distance: float | None = None

    def __post_init__(self):
        if self.eye_separation < 0.0:
            raise ConfigurationError("eye_separation must be >= 0")
        if self.near_plane <= 0.0:
            raise ConfigurationError("near_plane must be > 0")
        if self.convergence_mode not in ("parallel", "converged"):
            raise ConfigurationError(f"unknown convergence_mode {self.convergence_mode!r}")
        if self.convergence_mode == "converged":
            if self.convergence_distance is None or self.convergence_distance <= 0.0:
                raise ConfigurationError("converged mode needs a positive convergence_distance")

    def basis(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Orthonormal (right, up, forward), raising on parallel forward/up."""
        f = np.asarray(self.forward, dtype=np.float64)
        fn = np.linalg.norm(f)
        if fn == 0.0:
            raise ConfigurationError("forward vector is zero")
        f = f / fn
        u0 = np.asarray(self.up, dtype=np.float64)
        r = np.cross(u0, f)
        rn = np.linalg.norm(r)
        if rn < 1e-12:
            raise ConfigurationError("forward and up are parallel")
        r = r / rn
        u = np.cross(f, r)
        return r, u, f

    def eye_origin(self, eye: str) -> np.ndarray:
        r, _, _ = self.basis()
        sign = -0.5 if eye == LEFT else 0.5
        return np.asarray(self.head_position, dtype=np.float64) + r * (sign * self.eye_separation)


@dataclass(frozen=True)
class EyeView:
    """One eye's camera: rigid transform plus off-axis frustum.

    ``rotation`` rows are the camera's right/up/forward axes expressed in
    world coordinates, so ``p_cam = rotation @ (p_world - origin)``.
    ``frustum`` is (left, right, bottom, top) on the near plane.
    """

    eye: str
    origin: Vec3
    rotation: tuple[Vec3, Vec3, Vec3]
    frustum: tuple[float, float, float, float]
    near: float

    def rotation_matrix(self) -> np.ndarray:
        return np.asarray(self.rotation, dtype=np.float64)

    def origin_vec(self) -> np.ndarray:
        return np.asarray(self.origin, dtype=np.float64)

    def axis_ray(self) -> tuple[np.ndarray, np.ndarray]:
        """Optical axis: the ray through the projection window's center."""
        l, r, b, t = self.frustum
        d_cam = np.array([(l + r) / 2.0, (b + t) / 2.0, self.near])
        d = d_cam @ self.rotation_matrix()
        return self.origin_vec(), d / np.linalg.norm(d)


def derive_eye_views(
    rig: StereoRig,
    image_size: tuple[int, int],
    fov_y_deg: float = 45.0,
) -> tuple[EyeView, EyeView]:
    """Build the left/right cameras for a rig.

    In parallel mode the two views differ only by the +-eye_separation/2
    origin offset along the rig's right axis. In converged mode the frusta
    are additionally skewed so both optical axes cross at the convergence
    distance (no vertical parallax, unlike toe-in).
    """
    w, h = image_size
    if w <= 0 or h <= 0:
        raise ConfigurationError("image_size must be positive")
    if not 0.0 < fov_y_deg < 180.0:
        raise ConfigurationError("fov_y_deg must be in (0, 180)")
    r, u, f = rig.basis()
    n = rig.near_plane
    half_h = n * math.tan(math.radians(fov_y_deg) / 2.0)
    half_w = half_h * (w / h)

    if rig.convergence_mode == "converged":
        shift = n * rig.eye_separation / (2.0 * rig.convergence_distance)
    else:
        shift = 0.0

    head = np.asarray(rig.head_position, dtype=np.float64)
    rot = (tuple(r), tuple(u), tuple(f))
    views = []
    for eye, sign in ((LEFT, -1.0), (RIGHT, 1.0)):
        origin = head + r * (sign * rig.eye_separation / 2.0)
        # the window center leans toward the other eye by `shift`
        s = -sign * shift
        frustum = (-half_w + s, half_w + s, -half_h, half_h)
        views.append(EyeView(eye=eye, origin=tuple(origin), rotation=rot, frustum=frustum, near=n))
    return views[0], views[1]


def angular_size(object_extent: float, distance: float) -> float:
    """Visual angle in degrees subtended by an extent seen at a distance."""
    if distance <= 0.0:
        raise ValueError("distance must be > 0")
    if object_extent < 0.0:
        raise ValueError("object_extent must be >= 0")
    return math.degrees(2.0 * math.atan(object_extent / (2.0 * distance)))


def extent_for_angle(angle_deg: float, distance: float) -> float:
    """Inverse of angular_size: extent that subtends angle_deg at distance."""
    if distance <= 0.0:
        raise ValueError("distance must be > 0")
    if not 0.0 <= angle_deg < 180.0:
        raise ValueError("angle_deg must be in [0, 180)")
    return 2.0 * distance * math.tan(math.radians(angle_deg) / 2.0)


def solve_layout_distance(grid_width: float, target_half_angle_deg: float) -> float:
    """Viewing distance placing the outermost column center at the target angle.

    ``grid_width`` spans the outermost column centers; the half width then
    sits at ``target_half_angle_deg`` from the central focus point.
    """
    if grid_width <= 0.0:
        raise ValueError("grid_width must be > 0")
    if not 0.0 < target_half_angle_deg < 90.0:
        raise ValueError("target_half_angle_deg must be in (0, 90)")
    return (grid_width / 2.0) / math.tan(math.radians(target_half_angle_deg))


def _segment_blocked(origin: np.ndarray, point: np.ndarray, occluders) -> bool:
    d = point - origin
    for solid in occluders:
        t = float(first_hit(solid, origin[None, :], d[None, :])[0])
        if 1e-9 < t < 1.0 - 1e-9:
            return True
    return False


def classify_monocular_zone(
    point,
    occluders: list[Solid] | tuple[Solid, ...],
    rig: StereoRig,
    presented_to: str = "both",
) -> str:
    """Classify a point as binocular or a valid/invalid one-eye-only zone.

    ``presented_to`` models synthetic suppression: "both" for physical
    scenes, "left"/"right" when the point is rendered to that eye only.
    A one-eye-only point is ecologically valid iff the non-seeing eye's
    ray is blocked by an occluder nearer than the point; a suppressed
    point with a free line of sight for the suppressed eye is invalid.
    Raises ValueError for points inside an occluder or hidden from both eyes.
    """
    if presented_to not in ("both", LEFT, RIGHT):
        raise ValueError(f"presented_to must be 'both', 'left' or 'right', got {presented_to!r}")
    p = np.asarray(point, dtype=np.float64)
    for solid in occluders:
        if contains(solid, p):
            raise ValueError("point lies inside an occluder")

    blocked = {}
    visible = {}
    for eye in (LEFT, RIGHT):
        blocked[eye] = _segment_blocked(rig.eye_origin(eye), p, occluders)
        visible[eye] = (presented_to in ("both", eye)) and not blocked[eye]

    if visible[LEFT] and visible[RIGHT]:
        return BINOCULAR
    if not visible[LEFT] and not visible[RIGHT]:
        raise ValueError("point is not visible to either eye; no zone class applies")
    if visible[LEFT]:
        return VALID_LEFT_ONLY if blocked[RIGHT] else INVALID_LEFT_ONLY
    return VALID_RIGHT_ONLY if blocked[LEFT] else INVALID_RIGHT_ONLY
