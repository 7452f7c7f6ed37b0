"""Seed-driven construction of visual-search trial sets.

A set is a list of scenes on a rows x cols grid of floating objects, half
of them containing a highlighted target. All geometry is solved from
angular constraints (object size and grid extents in degrees), so absolute
scale is a free parameter; the layout distance is fixed at 1.0 world unit.

Two independent RNG streams derive from the set seed: one for per-scene
geometry/appearance (sub-streamed by scene index, so generation order is
irrelevant) and one for presentation order.
"""

from __future__ import annotations

import colorsys
import json
import math
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from . import geometry
from .geometry import StereoRig, EyeView, angular_size, extent_for_angle
from .rasterizer import Prim, footprint, id_depth_buffers, screen_bbox
from .solids import Box, Cylinder, Solid, Sphere

FORMAT_VERSION = 1

SET_KINDS = ("exp1_4", "exp1_16", "exp1_30", "depth2", "depth2_color_shape", "depth3_color")
OBJECT_COUNTS = {"exp1_4": 4, "exp1_16": 16, "exp1_30": 30,
                 "depth2": 30, "depth2_color_shape": 30, "depth3_color": 30}
PLANE_COUNTS = {"exp1_4": 1, "exp1_16": 1, "exp1_30": 1,
                "depth2": 2, "depth2_color_shape": 2, "depth3_color": 3}

HIGHLIGHTS = ("deadeye_left", "deadeye_right", "color_popout", "flicker", "none")
SHAPES = ("cube", "sphere", "cylinder")

# 8 evenly spaced hues at fixed saturation/value
PALETTE = tuple(colorsys.hsv_to_rgb(k / 8.0, 0.72, 0.92) for k in range(8))
BASE_COLOR = (0.32, 0.44, 0.86)  # homogeneous-distractor blue

LAYOUT_DISTANCE = 1.0
METERING_SIZE = (320, 320)
RETRY_LIMIT = 1000

_GEOM_STREAM = 0
_ORDER_STREAM = 1
_SEED_MASK = (1 << 64) - 1


class GenerationError(RuntimeError):
    """A scene could not satisfy its constraints within the retry budget."""


class MeasurementError(ValueError):
    """An occlusion measurement has no valid pixel footprint."""


@dataclass(frozen=True)
class SetConfig:
    """Parameters of one trial set; defaults encode the standard apparatus."""

    set_kind: str
    scenes_per_set: int = 48
    training_scenes: int = 20
    target_fraction: float = 0.5
    exposure_ms: float = 250.0
    crosshair_ms: float = 2500.0
    pause_s: float = 30.0
    grid_rows: int = 5
    grid_cols: int = 6
    cube_angular_size_deg: float = 1.8
    grid_half_angle_h_deg: float = 14.93
    grid_half_angle_v_deg: float = 12.23
    depth_plane_count: int | None = None
    plane_separation: float = 2.0  # multiples of the cube side
    max_occlusion: tuple[float, ...] = (0.10, 0.20)  # caps for plane 1, plane 2
    jitter_amplitude: float = 0.2  # fraction of cell pitch, per lateral axis
    depth_jitter_amplitude: float = 0.1  # fraction of plane separation
    rng_seed: int = 0
    highlight: str = "deadeye_right"
    order_seed: int | None = None  # defaults to rng_seed; split out for order-only reshuffles

    def __post_init__(self):
        if self.set_kind not in SET_KINDS:
            raise ValueError(f"unknown set_kind {self.set_kind!r}")
        n_targets = self.scenes_per_set * self.target_fraction
        if abs(n_targets - round(n_targets)) > 1e-9:
            raise ValueError("scenes_per_set * target_fraction must be an integer")
        expected_planes = PLANE_COUNTS[self.set_kind]
        if self.depth_plane_count is None:
            object.__setattr__(self, "depth_plane_count", expected_planes)
        elif self.depth_plane_count != expected_planes:
            raise ValueError(
                f"{self.set_kind} requires depth_plane_count={expected_planes}, "
                f"got {self.depth_plane_count}"
            )
        if any(not 0.0 <= cap < 1.0 for cap in self.max_occlusion):
            raise ValueError("max_occlusion values must be in [0, 1)")
        if self.highlight not in HIGHLIGHTS:
            raise ValueError(f"unknown highlight {self.highlight!r}")
        if not 0.0 <= self.jitter_amplitude < 0.5:
            raise ValueError("jitter_amplitude must keep objects inside their cell")

    @property
    def n_objects(self) -> int:
        return OBJECT_COUNTS[self.set_kind]

    @property
    def n_targets(self) -> int:
        return round(self.scenes_per_set * self.target_fraction)


@dataclass(frozen=True)
class SceneGeometry:
    """World-space layout solved from a config's angular constraints."""

    distance: float
    pitch_x: float
    pitch_y: float
    object_size: float
    plane_zs: tuple[float, ...]

    @classmethod
    def from_config(cls, config: SetConfig) -> "SceneGeometry":
        d = LAYOUT_DISTANCE
        half_w = d * math.tan(math.radians(config.grid_half_angle_h_deg))
        half_h = d * math.tan(math.radians(config.grid_half_angle_v_deg))
        pitch_x = half_w / ((config.grid_cols - 1) / 2.0)
        pitch_y = half_h / ((config.grid_rows - 1) / 2.0)
        size = extent_for_angle(config.cube_angular_size_deg, d)
        sep = config.plane_separation * size
        k = config.depth_plane_count
        plane_zs = tuple(d + (i - (k - 1) / 2.0) * sep for i in range(k))
        return cls(distance=d, pitch_x=pitch_x, pitch_y=pitch_y, object_size=size, plane_zs=plane_zs)

    @property
    def plane_separation_world(self) -> float:
        if len(self.plane_zs) < 2:
            return 0.0
        return self.plane_zs[1] - self.plane_zs[0]


@dataclass(frozen=True)
class SceneObject:
    shape: str
    color: tuple[float, float, float]
    grid_cell: tuple[int, int]  # (row, col), row 0 at top
    jitter_offset: tuple[float, float, float]  # x/y as cell-pitch fractions, z as plane-separation fraction
    depth_plane: int
    position: tuple[float, float, float]
    size: float  # cube side; spheres/cylinders fit this extent


@dataclass(frozen=True)
class TrialScene:
    scene_id: str
    set_kind: str
    objects: tuple[SceneObject, ...]
    target_index: int | None
    highlight: str
    seed: int

    def __post_init__(self):
        if self.highlight not in HIGHLIGHTS:
            raise ValueError(f"unknown highlight {self.highlight!r}")
        if self.target_index is not None and not 0 <= self.target_index < len(self.objects):
            raise ValueError("target_index out of range")
        if self.highlight == "none" and self.target_index is not None:
            raise ValueError("highlight 'none' implies no target")
        if self.highlight != "none" and self.target_index is None:
            raise ValueError("a highlight requires a target_index")

    @property
    def target_present(self) -> bool:
        return self.target_index is not None

    @property
    def target(self) -> SceneObject | None:
        return None if self.target_index is None else self.objects[self.target_index]


def default_rig(eye_separation: float = geometry.DEFAULT_EYE_SEPARATION) -> StereoRig:
    """Canonical rig for scene space: head at origin looking down +z."""
    return StereoRig(eye_separation=eye_separation)


def _rng(seed: int, stream: int, index: int = 0) -> np.random.Generator:
    ss = np.random.SeedSequence((seed & _SEED_MASK, stream, index))
    return np.random.Generator(np.random.PCG64(ss))


def object_solid(obj: SceneObject) -> Solid:
    s = obj.size
    if obj.shape == "cube":
        return Box(obj.position, (s / 2.0, s / 2.0, s / 2.0))
    if obj.shape == "sphere":
        return Sphere(obj.position, s / 2.0)
    if obj.shape == "cylinder":
        # deliberately thinner than the cube footprint
        return Cylinder(obj.position, s / 4.0, s / 2.0)
    raise ValueError(f"unknown shape {obj.shape!r}")


def scene_prims(scene: TrialScene) -> list[Prim]:
    return [Prim(solid=object_solid(o), color=o.color) for o in scene.objects]


def assign_appearance(config: SetConfig, rng: np.random.Generator, count: int | None = None):
    """Draw (shape, color) pairs for a scene's objects.

    Homogeneous kinds use one fixed shape and color; the color-shape kind
    draws both; the three-plane kind keeps cubes but draws colors.
    """
    n = config.n_objects if count is None else count
    kind = config.set_kind
    if kind in ("exp1_4", "exp1_16", "exp1_30", "depth2"):
        return [("cube", BASE_COLOR) for _ in range(n)]
    if kind == "depth2_color_shape":
        shapes = [SHAPES[i] for i in rng.integers(0, len(SHAPES), size=n)]
        colors = [PALETTE[i] for i in rng.integers(0, len(PALETTE), size=n)]
        return list(zip(shapes, colors))
    if kind == "depth3_color":
        colors = [PALETTE[i] for i in rng.integers(0, len(PALETTE), size=n)]
        return [("cube", c) for c in colors]
    raise ValueError(f"unknown set_kind {kind!r}")


def _build_objects(config, geom, cells, planes, jit_xy, jit_z, appearance):
    objs = []
    rows, cols = config.grid_rows, config.grid_cols
    for i in range(len(cells)):
        row, col = divmod(int(cells[i]), cols)
        jx, jy = float(jit_xy[i, 0]), float(jit_xy[i, 1])
        jz = float(jit_z[i])
        x = (col - (cols - 1) / 2.0) * geom.pitch_x + jx * geom.pitch_x
        y = ((rows - 1) / 2.0 - row) * geom.pitch_y + jy * geom.pitch_y
        z = geom.plane_zs[int(planes[i])] + jz * geom.plane_separation_world
        shape, color = appearance[i]
        objs.append(
            SceneObject(
                shape=shape,
                color=tuple(color),
                grid_cell=(row, col),
                jitter_offset=(jx, jy, jz),
                depth_plane=int(planes[i]),
                position=(x, y, z),
                size=geom.object_size,
            )
        )
    return objs


def _metering_views(rig: StereoRig) -> tuple[EyeView, EyeView]:
    return geometry.derive_eye_views(rig, METERING_SIZE)


def _occlusion_candidates(view, size, prims, far_indices):
    """Map far-object index -> True if any other object's screen bbox overlaps it."""
    bboxes = [screen_bbox(view, size, p.solid) for p in prims]
    needs = {}
    for fi in far_indices:
        fb = bboxes[fi]
        overlap = False
        if fb is not None:
            for oi, ob in enumerate(bboxes):
                if oi == fi or ob is None:
                    continue
                if fb[0] <= ob[1] and ob[0] <= fb[1] and fb[2] <= ob[3] and ob[2] <= fb[3]:
                    overlap = True
                    break
        needs[fi] = overlap
    return needs


def _occlusion_fractions(view, size, prims, indices):
    """Occluded pixel fraction for each requested object index."""
    ids, _ = id_depth_buffers(view, size, prims)
    out = {}
    for idx in indices:
        solo = footprint(view, size, prims[idx])
        total = int(solo.sum())
        if total == 0:
            raise MeasurementError(f"object {idx} has no pixel footprint")
        covered = int((solo & (ids != idx)).sum())
        out[idx] = covered / total
    return out


def _scene_occlusion_ok(config, prims, planes, views) -> bool:
    caps = config.max_occlusion
    far = [i for i, p in enumerate(planes) if p >= 1 and caps[int(p) - 1] < 1.0]
    if not far:
        return True
    for view in views:
        needs = _occlusion_candidates(view, METERING_SIZE, prims, far)
        to_measure = [i for i in far if needs[i]]
        if not to_measure:
            continue
        fractions = _occlusion_fractions(view, METERING_SIZE, prims, to_measure)
        for i, frac in fractions.items():
            if frac > caps[int(planes[i]) - 1]:
                return False
    return True


def _generate_scene(config: SetConfig, geom: SceneGeometry, index: int,
                    views: tuple[EyeView, EyeView]) -> TrialScene:
    rng = _rng(config.rng_seed, _GEOM_STREAM, index)
    n = config.n_objects
    k = config.depth_plane_count
    n_cells = config.grid_rows * config.grid_cols
    target_present = index < config.n_targets

    for _ in range(RETRY_LIMIT):
        cells = rng.choice(n_cells, size=n, replace=False)
        planes = rng.integers(0, k, size=n) if k > 1 else np.zeros(n, dtype=int)
        jit_xy = rng.uniform(-config.jitter_amplitude, config.jitter_amplitude, size=(n, 2))
        if k > 1:
            jit_z = rng.uniform(-config.depth_jitter_amplitude, config.depth_jitter_amplitude, size=n)
        else:
            jit_z = np.zeros(n)
        appearance = assign_appearance(config, rng, n)
        objects = _build_objects(config, geom, cells, planes, jit_xy, jit_z, appearance)
        prims = [Prim(solid=object_solid(o), color=o.color) for o in objects]
        if _scene_occlusion_ok(config, prims, planes, views):
            target_index = int(rng.integers(0, n)) if target_present else None
            highlight = config.highlight if target_present else "none"
            return TrialScene(
                scene_id=f"{config.set_kind}-s{config.rng_seed}-{index:03d}",
                set_kind=config.set_kind,
                objects=tuple(objects),
                target_index=target_index,
                highlight=highlight,
                seed=config.rng_seed,
            )
    raise GenerationError(
        f"scene {index}: occlusion constraint unsatisfied after {RETRY_LIMIT} attempts"
    )


def generate_set(config: SetConfig, rig: StereoRig | None = None) -> list[TrialScene]:
    """Generate the full scene list for one set, in presentation order."""
    geom = SceneGeometry.from_config(config)
    views = _metering_views(rig or default_rig())
    pool = [_generate_scene(config, geom, i, views) for i in range(config.scenes_per_set)]
    order_seed = config.rng_seed if config.order_seed is None else config.order_seed
    order = _rng(order_seed, _ORDER_STREAM).permutation(config.scenes_per_set)
    return [pool[i] for i in order]


def occlusion_fraction(
    scene: TrialScene,
    object_index: int,
    view: EyeView,
    resolution: tuple[int, int] = METERING_SIZE,
) -> float:
    """Fraction of one object's solo pixel footprint covered by nearer objects."""
    if not 0 <= object_index < len(scene.objects):
        raise IndexError("object_index out of range")
    prims = scene_prims(scene)
    return _occlusion_fractions(view, resolution, prims, [object_index])[object_index]


@dataclass(frozen=True)
class Violation:
    code: str
    message: str
    value: float | None = None


@dataclass
class ValidationReport:
    scene_id: str
    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def add(self, code: str, message: str, value: float | None = None):
        self.violations.append(Violation(code, message, value))


def validate_scene(
    scene: TrialScene,
    config: SetConfig,
    rig: StereoRig | None = None,
    metering_size: tuple[int, int] = METERING_SIZE,
) -> ValidationReport:
    """Check one scene against the apparatus constraints; violations are data."""
    report = ValidationReport(scene_id=scene.scene_id)
    geom = SceneGeometry.from_config(config)
    rows, cols = config.grid_rows, config.grid_cols

    if len(scene.objects) != config.n_objects:
        report.add("object_count", f"expected {config.n_objects} objects, found {len(scene.objects)}")

    seen_cells = set()
    for i, obj in enumerate(scene.objects):
        row, col = obj.grid_cell
        if not (0 <= row < rows and 0 <= col < cols):
            report.add("grid_cell", f"object {i} cell {obj.grid_cell} outside {rows}x{cols} grid")
        if obj.grid_cell in seen_cells:
            report.add("grid_cell", f"object {i} duplicates cell {obj.grid_cell}")
        seen_cells.add(obj.grid_cell)
        if obj.depth_plane >= config.depth_plane_count:
            report.add(
                "plane_count",
                f"object {i} on plane {obj.depth_plane}, config allows {config.depth_plane_count}",
            )
            continue
        jx, jy, jz = obj.jitter_offset
        if abs(jx) > 0.5 or abs(jy) > 0.5:
            report.add("jitter", f"object {i} jitter moves its center outside the cell")
        measured = angular_size(obj.size, geom.distance)
        if abs(measured - config.cube_angular_size_deg) > 0.01:
            report.add(
                "angular_size",
                f"object {i} subtends {measured:.2f} deg, expected "
                f"{config.cube_angular_size_deg:.2f} +- 0.01",
                value=measured,
            )
        expected_z = geom.plane_zs[obj.depth_plane] + jz * geom.plane_separation_world
        if abs(obj.position[2] - expected_z) > 1e-9:
            report.add("plane_separation", f"object {i} depth inconsistent with its plane")

    # grid extents are a layout property: outermost row/col centers vs the target angles
    half_w = (cols - 1) / 2.0 * geom.pitch_x
    half_h = (rows - 1) / 2.0 * geom.pitch_y
    h_angle = math.degrees(math.atan(half_w / geom.distance))
    v_angle = math.degrees(math.atan(half_h / geom.distance))
    if abs(h_angle - config.grid_half_angle_h_deg) > 0.05:
        report.add("grid_extent", f"horizontal extent {h_angle:.2f} deg", value=h_angle)
    if abs(v_angle - config.grid_half_angle_v_deg) > 0.05:
        report.add("grid_extent", f"vertical extent {v_angle:.2f} deg", value=v_angle)

    if config.depth_plane_count > 1:
        sep = geom.plane_separation_world
        if abs(sep - config.plane_separation * geom.object_size) > 1e-9 * geom.object_size:
            report.add("plane_separation", "plane spacing is not the configured multiple of the cube side")

    if scene.target_index is not None and scene.target_index >= len(scene.objects):
        report.add("target", "target_index out of range")

    # occlusion caps, measured in both eyes
    ok_planes = all(o.depth_plane < config.depth_plane_count for o in scene.objects)
    if config.depth_plane_count > 1 and ok_planes:
        prims = scene_prims(scene)
        planes = [o.depth_plane for o in scene.objects]
        caps = config.max_occlusion
        far = [i for i, p in enumerate(planes) if p >= 1]
        for view in _metering_views(rig or default_rig()):
            if not far:
                break
            needs = _occlusion_candidates(view, metering_size, prims, far)
            to_measure = [i for i in far if needs[i]]
            if not to_measure:
                continue
            try:
                fractions = _occlusion_fractions(view, metering_size, prims, to_measure)
            except MeasurementError as exc:
                report.add("occlusion", str(exc))
                continue
            for i, frac in fractions.items():
                cap = caps[planes[i] - 1]
                solo_px = int(footprint(view, metering_size, prims[i]).sum())
                tol = 1.0 / math.sqrt(max(solo_px, 1))  # one pixel row of the footprint
                if frac > cap + tol:
                    report.add(
                        "occlusion",
                        f"object {i} occluded {frac:.3f} in {view.eye} eye, cap {cap:.2f}",
                        value=frac,
                    )
    return report


# ---------------------------------------------------------------------------
# set serialization

def _scene_to_dict(scene: TrialScene) -> dict:
    return {
        "scene_id": scene.scene_id,
        "set_kind": scene.set_kind,
        "seed": scene.seed,
        "highlight": scene.highlight,
        "target_index": scene.target_index,
        "objects": [
            {
                "shape": o.shape,
                "color": list(o.color),
                "grid_cell": list(o.grid_cell),
                "jitter_offset": list(o.jitter_offset),
                "depth_plane": o.depth_plane,
                "position": list(o.position),
                "size": o.size,
            }
            for o in scene.objects
        ],
    }


def _scene_from_dict(d: dict) -> TrialScene:
    objects = tuple(
        SceneObject(
            shape=o["shape"],
            color=tuple(o["color"]),
            grid_cell=tuple(o["grid_cell"]),
            jitter_offset=tuple(o["jitter_offset"]),
            depth_plane=o["depth_plane"],
            position=tuple(o["position"]),
            size=o["size"],
        )
        for o in d["objects"]
    )
    return TrialScene(
        scene_id=d["scene_id"],
        set_kind=d["set_kind"],
        objects=objects,
        target_index=d["target_index"],
        highlight=d["highlight"],
        seed=d["seed"],
    )


def config_to_dict(config: SetConfig) -> dict:
    d = asdict(config)
    d["max_occlusion"] = list(config.max_occlusion)
    return d


def config_from_dict(d: dict) -> SetConfig:
    d = dict(d)
    d["max_occlusion"] = tuple(d["max_occlusion"])
    return SetConfig(**d)


def save_set(path: str | Path, config: SetConfig, scenes: list[TrialScene]) -> Path:
    """Write one set (config echo plus scene array) as a JSON document."""
    doc = {
        "format_version": FORMAT_VERSION,
        "config": config_to_dict(config),
        "scenes": [_scene_to_dict(s) for s in scenes],
    }
    path = Path(path)
    path.write_text(json.dumps(doc, indent=1, sort_keys=True))
    return path


def load_set(path: str | Path) -> tuple[SetConfig, list[TrialScene]]:
    doc = json.loads(Path(path).read_text())
    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise ValueError(f"unsupported set format_version {version!r}")
    config = config_from_dict(doc["config"])
    scenes = [_scene_from_dict(s) for s in doc["scenes"]]
    return config, scenes
