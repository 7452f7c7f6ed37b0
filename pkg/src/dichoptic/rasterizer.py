"""Deterministic per-pixel rasterization of analytic solids.

Each pixel's color is a pure function of the view, the ordered primitive
list, and the pixel center ray, so output is bit-identical regardless of
tiling or thread count. Depth resolution uses a strict less-than test;
skipping a primitive is therefore exactly equivalent to removing it from
the list.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .geometry import EyeView
from .solids import Solid, bounding_box, first_hit, surface_normal

# fixed scene lighting: one directional light plus ambient, no shadows
LIGHT_DIR = (-0.30, 0.55, -0.78)
AMBIENT = 0.35
DIFFUSE = 0.65
BACKGROUND = (0.16, 0.16, 0.19)

_TILE_ROWS = 64


@dataclass(frozen=True)
class Prim:
    """A solid plus its base color (linear RGB in [0, 1])."""

    solid: Solid
    color: tuple[float, float, float]


def _unit(v):
    a = np.asarray(v, dtype=np.float64)
    return a / np.linalg.norm(a)


@lru_cache(maxsize=64)
def _ray_grid_cached(view: EyeView, width: int, height: int):
    l, r, b, t = view.frustum
    n = view.near
    xs = l + (np.arange(width, dtype=np.float64) + 0.5) * (r - l) / width
    ys = t - (np.arange(height, dtype=np.float64) + 0.5) * (t - b) / height
    cam = np.empty((height, width, 3), dtype=np.float64)
    cam[:, :, 0] = xs[None, :]
    cam[:, :, 1] = ys[:, None]
    cam[:, :, 2] = n
    world = cam @ view.rotation_matrix()
    world /= np.linalg.norm(world, axis=2, keepdims=True)
    world.flags.writeable = False
    return world


def ray_grid(view: EyeView, size: tuple[int, int]) -> np.ndarray:
    """Unit world-space ray directions through all pixel centers (H, W, 3)."""
    w, h = size
    return _ray_grid_cached(view, w, h)


def screen_bbox(view: EyeView, size: tuple[int, int], solid: Solid, pad: int = 2):
    """Conservative pixel bounds (r0, r1, c0, c1) of a solid, or None if off-screen."""
    w, h = size
    lo, hi = bounding_box(solid)
    corners = np.array(
        [[x, y, z] for x in (lo[0], hi[0]) for y in (lo[1], hi[1]) for z in (lo[2], hi[2])]
    )
    cam = (corners - view.origin_vec()) @ view.rotation_matrix().T
    if np.any(cam[:, 2] <= view.near * 0.25):
        return (0, h - 1, 0, w - 1)
    l, r, b, t = view.frustum
    n = view.near
    px = cam[:, 0] * n / cam[:, 2]
    py = cam[:, 1] * n / cam[:, 2]
    cols = (px - l) * w / (r - l) - 0.5
    rows = (t - py) * h / (t - b) - 0.5
    c0 = max(0, int(math.floor(cols.min())) - pad)
    c1 = min(w - 1, int(math.ceil(cols.max())) + pad)
    r0 = max(0, int(math.floor(rows.min())) - pad)
    r1 = min(h - 1, int(math.ceil(rows.max())) + pad)
    if c0 > c1 or r0 > r1:
        return None
    return (r0, r1, c0, c1)


def _paint_tile(view, size, prims, bboxes, tile, rgb, depth, ids, light, shaded):
    r0, r1 = tile
    dirs = ray_grid(view, size)
    origin = view.origin_vec()
    for idx, prim in enumerate(prims):
        bb = bboxes[idx]
        if bb is None:
            continue
        pr0, pr1, pc0, pc1 = bb
        pr0, pr1 = max(pr0, r0), min(pr1, r1)
        if pr0 > pr1:
            continue
        sub = dirs[pr0 : pr1 + 1, pc0 : pc1 + 1]
        flat = sub.reshape(-1, 3)
        t = first_hit(prim.solid, origin, flat).reshape(sub.shape[:2])
        dsub = depth[pr0 : pr1 + 1, pc0 : pc1 + 1]
        win = t < dsub
        if not win.any():
            continue
        dsub[win] = t[win]
        ids[pr0 : pr1 + 1, pc0 : pc1 + 1][win] = idx
        if shaded:
            pts = origin + flat[win.ravel()] * t[win][:, None]
            nrm = surface_normal(prim.solid, pts)
            lam = AMBIENT + DIFFUSE * np.maximum(0.0, nrm @ light)
            rgb[pr0 : pr1 + 1, pc0 : pc1 + 1][win] = np.asarray(prim.color) * lam[:, None]


def _run_tiles(view, size, prims, rgb, depth, ids, shaded, threads):
    w, h = size
    light = _unit(LIGHT_DIR)
    bboxes = [screen_bbox(view, size, p.solid) for p in prims]
    tiles = [(r0, min(r0 + _TILE_ROWS - 1, h - 1)) for r0 in range(0, h, _TILE_ROWS)]
    if threads <= 1:
        for tile in tiles:
            _paint_tile(view, size, prims, bboxes, tile, rgb, depth, ids, light, shaded)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(
                pool.map(
                    lambda tile: _paint_tile(view, size, prims, bboxes, tile, rgb, depth, ids, light, shaded),
                    tiles,
                )
            )


def render_solids(
    view: EyeView,
    size: tuple[int, int],
    prims: list[Prim],
    background: tuple[float, float, float] = BACKGROUND,
    threads: int = 1,
) -> np.ndarray:
    """Shade the primitive list into an (H, W, 3) uint8 raster."""
    w, h = size
    if w <= 0 or h <= 0:
        raise ValueError("image size must be positive")
    rgb = np.empty((h, w, 3), dtype=np.float64)
    rgb[:, :] = background
    depth = np.full((h, w), np.inf)
    ids = np.full((h, w), -1, dtype=np.int32)
    _run_tiles(view, size, prims, rgb, depth, ids, shaded=True, threads=threads)
    return (np.clip(rgb, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)


def id_depth_buffers(
    view: EyeView, size: tuple[int, int], prims: list[Prim], threads: int = 1
) -> tuple[np.ndarray, np.ndarray]:
    """Unshaded winner-id and depth buffers (ids -1 where no hit)."""
    w, h = size
    depth = np.full((h, w), np.inf)
    ids = np.full((h, w), -1, dtype=np.int32)
    _run_tiles(view, size, prims, None, depth, ids, shaded=False, threads=threads)
    return ids, depth


def footprint(view: EyeView, size: tuple[int, int], prim: Prim) -> np.ndarray:
    """Boolean mask of pixels the primitive covers when rendered alone."""
    ids, _ = id_depth_buffers(view, size, [prim])
    return ids == 0
