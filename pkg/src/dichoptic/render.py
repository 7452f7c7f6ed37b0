"""Per-eye rendering of trial scenes with one-eye, color, and flicker highlights.

The one-eye (deadeye) mode is implemented by skipping the target primitive
for the suppressed eye, which makes the suppressed-eye frame bit-identical
to rendering the same scene with the target removed from the object list.
"""

from __future__ import annotations

import base64
import io
from dataclasses import dataclass

import numpy as np
from PIL import Image

from .geometry import LEFT, RIGHT, StereoRig, derive_eye_views, EyeView
from .rasterizer import BACKGROUND, Prim, render_solids
from .scenes import TrialScene, scene_prims

POPOUT_RED = (0.88, 0.12, 0.12)

DEFAULT_FLICKER_HZ = 4.0
DEFAULT_FLICKER_DUTY = 0.5

LAYOUTS = ("side_by_side", "anaglyph_red_cyan", "left_only", "right_only")

# Rec. 601 luma weights, used by the anaglyph composition
_LUMA = np.array([0.299, 0.587, 0.114])


class CompositionError(ValueError):
    """Stereo frames cannot be combined (size mismatch)."""


@dataclass
class RenderedFrame:
    eye: str
    pixels: np.ndarray  # (height, width, 3) uint8, row-major, top-left origin
    width: int
    height: int
    technique: str
    flicker_phase: bool
    scene_id: str

    def __post_init__(self):
        if self.pixels.shape != (self.height, self.width, 3) or self.pixels.dtype != np.uint8:
            raise ValueError("pixels must be (height, width, 3) uint8")


@dataclass(frozen=True)
class HighlightSpec:
    """How (and whether) the target object is made to pop out."""

    mode: str  # "none" | "deadeye" | "color_popout" | "flicker"
    target: int | None = None
    suppressed_eye: str | None = None
    highlight_color: tuple[float, float, float] = POPOUT_RED
    frequency_hz: float = DEFAULT_FLICKER_HZ
    duty: float = DEFAULT_FLICKER_DUTY

    def __post_init__(self):
        if self.mode not in ("none", "deadeye", "color_popout", "flicker"):
            raise ValueError(f"unknown highlight mode {self.mode!r}")
        if self.mode == "deadeye" and self.suppressed_eye not in (LEFT, RIGHT):
            raise ValueError("deadeye mode needs suppressed_eye 'left' or 'right'")
        if self.mode == "flicker" and self.frequency_hz <= 0.0:
            raise ValueError("flicker frequency must be > 0")

    @classmethod
    def none(cls) -> "HighlightSpec":
        return cls(mode="none")

    @classmethod
    def deadeye(cls, suppressed_eye: str, target: int | None) -> "HighlightSpec":
        return cls(mode="deadeye", suppressed_eye=suppressed_eye, target=target)

    @classmethod
    def color_popout(cls, target: int | None, color=POPOUT_RED) -> "HighlightSpec":
        return cls(mode="color_popout", target=target, highlight_color=color)

    @classmethod
    def flicker(cls, target: int | None, frequency_hz=DEFAULT_FLICKER_HZ, duty=DEFAULT_FLICKER_DUTY):
        return cls(mode="flicker", target=target, frequency_hz=frequency_hz, duty=duty)

    @classmethod
    def from_scene(cls, scene: TrialScene) -> "HighlightSpec":
        h = scene.highlight
        if h == "none" or scene.target_index is None:
            return cls.none()
        if h == "deadeye_left":
            return cls.deadeye(LEFT, scene.target_index)
        if h == "deadeye_right":
            return cls.deadeye(RIGHT, scene.target_index)
        if h == "color_popout":
            return cls.color_popout(scene.target_index)
        if h == "flicker":
            return cls.flicker(scene.target_index)
        raise ValueError(f"unknown scene highlight {h!r}")

    def label(self) -> str:
        if self.mode == "deadeye":
            return f"deadeye_{self.suppressed_eye}"
        return self.mode


def flicker_on(spec: HighlightSpec, time_ms: float) -> bool:
    """Square-wave state at a timestamp: True while the target is shown."""
    phase = (time_ms / 1000.0 * spec.frequency_hz) % 1.0
    return phase < spec.duty


def _apply_highlight(prims: list[Prim], spec: HighlightSpec, eye: str, time_ms: float):
    """Primitive list after the highlight rule; also returns the flicker state."""
    shown = True
    if spec.target is None or spec.mode == "none":
        return prims, False
    if spec.mode == "deadeye":
        if eye == spec.suppressed_eye:
            return [p for i, p in enumerate(prims) if i != spec.target], False
        return prims, False
    if spec.mode == "color_popout":
        out = list(prims)
        out[spec.target] = Prim(solid=out[spec.target].solid, color=tuple(spec.highlight_color))
        return out, False
    if spec.mode == "flicker":
        shown = flicker_on(spec, time_ms)
        if not shown:
            return [p for i, p in enumerate(prims) if i != spec.target], False
        return prims, True
    raise AssertionError(spec.mode)


def render_eye(
    scene: TrialScene,
    view: EyeView,
    highlight: HighlightSpec | None = None,
    time_ms: float = 0.0,
    size: tuple[int, int] = (512, 512),
    threads: int = 1,
    background=BACKGROUND,
) -> RenderedFrame:
    """Rasterize one eye's frame of a scene under a highlight rule."""
    w, h = size
    if w <= 0 or h <= 0:
        raise ValueError("image size must be positive")
    spec = HighlightSpec.from_scene(scene) if highlight is None else highlight
    prims, phase = _apply_highlight(scene_prims(scene), spec, view.eye, time_ms)
    pixels = render_solids(view, size, prims, background=background, threads=threads)
    return RenderedFrame(
        eye=view.eye,
        pixels=pixels,
        width=w,
        height=h,
        technique=spec.label(),
        flicker_phase=phase,
        scene_id=scene.scene_id,
    )


def render_stereo_pair(
    scene: TrialScene,
    rig: StereoRig,
    highlight: HighlightSpec | None = None,
    time_ms: float = 0.0,
    size: tuple[int, int] = (512, 512),
    threads: int = 1,
    fov_y_deg: float = 45.0,
) -> tuple[RenderedFrame, RenderedFrame]:
    left_view, right_view = derive_eye_views(rig, size, fov_y_deg=fov_y_deg)
    left = render_eye(scene, left_view, highlight, time_ms, size, threads)
    right = render_eye(scene, right_view, highlight, time_ms, size, threads)
    return left, right


def compose(pair: tuple[RenderedFrame, RenderedFrame], layout: str) -> np.ndarray:
    """Combine a stereo pair into a single uint8 image for flat displays."""
    left, right = pair
    if (left.width, left.height) != (right.width, right.height):
        raise CompositionError("stereo frames differ in size")
    if layout == "side_by_side":
        return np.concatenate([left.pixels, right.pixels], axis=1)
    if layout == "anaglyph_red_cyan":
        luma_l = np.clip(left.pixels.astype(np.float64) @ _LUMA, 0.0, 255.0)
        luma_r = np.clip(right.pixels.astype(np.float64) @ _LUMA, 0.0, 255.0)
        out = np.empty_like(left.pixels)
        out[:, :, 0] = (luma_l + 0.5).astype(np.uint8)
        out[:, :, 1] = (luma_r + 0.5).astype(np.uint8)
        out[:, :, 2] = out[:, :, 1]
        return out
    if layout == "left_only":
        return left.pixels.copy()
    if layout == "right_only":
        return right.pixels.copy()
    raise CompositionError(f"unknown layout {layout!r}")


# ---------------------------------------------------------------------------
# image output

def write_ppm(path, pixels: np.ndarray):
    """Write a binary PPM (P6, 8-bit)."""
    h, w, _ = pixels.shape
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        fh.write(np.ascontiguousarray(pixels).tobytes())


def read_ppm(path) -> np.ndarray:
    with open(path, "rb") as fh:
        data = fh.read()
    if not data.startswith(b"P6"):
        raise ValueError("not a binary PPM file")
    fields: list[bytes] = []
    pos = 2
    while len(fields) < 3:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            while data[pos : pos + 1] not in (b"\n", b""):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        fields.append(data[start:pos])
    pos += 1  # single whitespace after maxval
    w, h, maxval = (int(f) for f in fields)
    if maxval != 255:
        raise ValueError("only 8-bit PPM supported")
    raster = np.frombuffer(data, dtype=np.uint8, count=w * h * 3, offset=pos)
    return raster.reshape(h, w, 3).copy()


def write_png(path, pixels: np.ndarray):
    Image.fromarray(pixels, mode="RGB").save(path, format="PNG")


def png_bytes(pixels: np.ndarray) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(pixels, mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


def png_base64(pixels: np.ndarray) -> str:
    return base64.b64encode(png_bytes(pixels)).decode("ascii")
