"""Analytic convex solids with vectorized ray intersection.

These primitives back both the per-pixel rasterizer and the eye-ray
visibility tests, so silhouettes are exact (no tessellation) and the two
code paths agree by construction. Ray parameters are returned in units of
the direction vector's length; pass unit directions to get metric depth,
or ``point - origin`` to get a [0, 1] segment parameter.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

Vec3 = tuple[float, float, float]

_EPS = 1e-12


@dataclass(frozen=True)
class Sphere:
    center: Vec3
    radius: float


@dataclass(frozen=True)
class Box:
    """Axis-aligned box given by center and half extents."""

    center: Vec3
    half_extents: Vec3


@dataclass(frozen=True)
class Cylinder:
    """Finite capped cylinder with its axis along +y."""

    center: Vec3
    radius: float
    half_height: float


Solid = Sphere | Box | Cylinder


def _as_rays(origins, dirs):
    d = np.atleast_2d(np.asarray(dirs, dtype=np.float64))
    o = np.asarray(origins, dtype=np.float64)
    if o.ndim == 1:
        o = np.broadcast_to(o, d.shape)
    return o, d


def first_hit(solid: Solid, origins, dirs) -> np.ndarray:
    """Smallest positive ray parameter per ray, or inf on a miss."""
    o, d = _as_rays(origins, dirs)
    if isinstance(solid, Sphere):
        t = _hit_sphere(solid, o, d)
    elif isinstance(solid, Box):
        t = _hit_box(solid, o, d)
    elif isinstance(solid, Cylinder):
        t = _hit_cylinder(solid, o, d)
    else:
        raise TypeError(f"not a solid: {solid!r}")
    return t


def _hit_sphere(s: Sphere, o, d):
    oc = o - np.asarray(s.center, dtype=np.float64)
    a = np.einsum("ij,ij->i", d, d)
    b = np.einsum("ij,ij->i", oc, d)
    c = np.einsum("ij,ij->i", oc, oc) - s.radius * s.radius
    disc = b * b - a * c
    hit = disc >= 0.0
    sq = np.sqrt(np.where(hit, disc, 0.0))
    t_near = (-b - sq) / a
    t_far = (-b + sq) / a
    t = np.where(t_near > _EPS, t_near, t_far)
    return np.where(hit & (t > _EPS), t, np.inf)


def _hit_box(bx: Box, o, d):
    c = np.asarray(bx.center, dtype=np.float64)
    he = np.asarray(bx.half_extents, dtype=np.float64)
    lo, hi = c - he, c + he
    d_safe = np.where(np.abs(d) < 1e-300, np.where(d >= 0.0, 1e-300, -1e-300), d)
    t1 = (lo - o) / d_safe
    t2 = (hi - o) / d_safe
    t_near = np.minimum(t1, t2).max(axis=1)
    t_far = np.maximum(t1, t2).min(axis=1)
    hit = (t_far >= t_near) & (t_far > _EPS)
    t = np.where(t_near > _EPS, t_near, t_far)
    return np.where(hit, t, np.inf)


def _hit_cylinder(cy: Cylinder, o, d):
    c = np.asarray(cy.center, dtype=np.float64)
    rel = o - c
    ox, oy, oz = rel[:, 0], rel[:, 1], rel[:, 2]
    dx, dy, dz = d[:, 0], d[:, 1], d[:, 2]
    r2 = cy.radius * cy.radius
    h = cy.half_height

    best = np.full(o.shape[0], np.inf)

    # lateral surface
    a = dx * dx + dz * dz
    b = ox * dx + oz * dz
    cc = ox * ox + oz * oz - r2
    disc = b * b - a * cc
    ok = (disc >= 0.0) & (a > 0.0)
    sq = np.sqrt(np.where(ok, disc, 0.0))
    a_safe = np.where(a > 0.0, a, 1.0)
    for sign in (-1.0, 1.0):
        t = (-b + sign * sq) / a_safe
        y = oy + t * dy
        valid = ok & (t > _EPS) & (np.abs(y) <= h)
        best = np.where(valid & (t < best), t, best)

    # caps
    dy_safe = np.where(np.abs(dy) < 1e-300, np.where(dy >= 0.0, 1e-300, -1e-300), dy)
    for cap_y in (-h, h):
        t = (cap_y - oy) / dy_safe
        x = ox + t * dx
        z = oz + t * dz
        valid = (t > _EPS) & (x * x + z * z <= r2)
        best = np.where(valid & (t < best), t, best)
    return best


def surface_normal(solid: Solid, points) -> np.ndarray:
    """Outward unit normal at each surface point (points shape (N, 3))."""
    p = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if isinstance(solid, Sphere):
        n = (p - np.asarray(solid.center)) / solid.radius
    elif isinstance(solid, Box):
        q = (p - np.asarray(solid.center)) / np.asarray(solid.half_extents)
        axis = np.argmax(np.abs(q), axis=1)
        n = np.zeros_like(p)
        rows = np.arange(p.shape[0])
        n[rows, axis] = np.sign(q[rows, axis])
    elif isinstance(solid, Cylinder):
        rel = p - np.asarray(solid.center)
        on_cap = np.abs(np.abs(rel[:, 1]) - solid.half_height) < 1e-7 * max(1.0, solid.half_height)
        radial = rel.copy()
        radial[:, 1] = 0.0
        norm = np.linalg.norm(radial, axis=1, keepdims=True)
        norm = np.where(norm == 0.0, 1.0, norm)
        n = radial / norm
        n[on_cap] = 0.0
        n[on_cap, 1] = np.sign(rel[on_cap, 1])
    else:
        raise TypeError(f"not a solid: {solid!r}")
    return n


def contains(solid: Solid, point) -> bool:
    """Whether the point lies strictly inside the solid."""
    p = np.asarray(point, dtype=np.float64)
    if isinstance(solid, Sphere):
        return bool(np.dot(p - solid.center, p - solid.center) < solid.radius**2)
    if isinstance(solid, Box):
        rel = np.abs(p - np.asarray(solid.center))
        return bool(np.all(rel < np.asarray(solid.half_extents)))
    if isinstance(solid, Cylinder):
        rel = p - np.asarray(solid.center)
        return bool(
            abs(rel[1]) < solid.half_height
            and rel[0] * rel[0] + rel[2] * rel[2] < solid.radius**2
        )
    raise TypeError(f"not a solid: {solid!r}")


def bounding_box(solid: Solid) -> tuple[np.ndarray, np.ndarray]:
    """World-space AABB as (lo, hi) corners."""
    c = np.asarray(solid.center, dtype=np.float64)
    if isinstance(solid, Sphere):
        r = np.full(3, solid.radius)
    elif isinstance(solid, Box):
        r = np.asarray(solid.half_extents, dtype=np.float64)
    elif isinstance(solid, Cylinder):
        r = np.array([solid.radius, solid.half_height, solid.radius])
    else:
        raise TypeError(f"not a solid: {solid!r}")
    return c - r, c + r
