"""Analytic primitives rendered to normal maps, plus sketch-contour extraction.

Shapes are rendered under orthographic projection looking down +z: pixel x is
the column index, pixel y the row index, and every foreground pixel carries
the exact analytic surface normal of the frontmost surface point. Background
pixels carry the flat normal (0, 0, 1).

A sketch is the silhouette boundary united with the occluding contours
(foreground pixels whose n_z drops below a grazing-angle threshold), thinned
to a 1 px curve. Strokes are 0 on a 255 background.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from skimage.measure import label
from skimage.morphology import binary_erosion, thin

from .codec import decode_normals, encode_normals
from .errors import EmptySketchError, OutOfFrameError

SHAPE_KINDS = ("sphere", "torus", "capsule", "union_of_spheres")

FRAME_MARGIN = 2.0
OCCLUDING_NZ = 0.15

# Background specks smaller than this are swallowed into the foreground when
# tracing contours: pixels whose normal is within the sentinel tolerance of
# (0, 0, 1) (sphere apexes, torus ridges) decode as background and would
# otherwise shred the silhouette.
MIN_HOLE_AREA = 32


@dataclass(frozen=True)
class ShapeSpec:
    """One renderable primitive.

    radius is the sphere radius, the capsule radius, or the torus tube
    radius; ring_radius applies to the torus only. union_of_spheres takes
    per-sphere tuples (cx, cy, cz, r) and ignores the scalar fields.
    """

    kind: str
    size: int = 64
    center: tuple = (0.0, 0.0)
    radius: float = 0.0
    ring_radius: float = 0.0
    p0: tuple = (0.0, 0.0)
    p1: tuple = (0.0, 0.0)
    spheres: tuple = field(default_factory=tuple)

    def validate(self) -> None:
        if self.kind not in SHAPE_KINDS:
            raise OutOfFrameError(f"unknown shape kind {self.kind!r}")
        if self.size < 64:
            raise OutOfFrameError(f"image size must be >= 64, got {self.size}")
        lo = FRAME_MARGIN
        hi = self.size - 1 - FRAME_MARGIN

        def check_box(cx, cy, extent):
            if extent <= 0:
                raise OutOfFrameError(f"{self.kind}: extent must be positive")
            if cx - extent < lo or cx + extent > hi or cy - extent < lo or cy + extent > hi:
                raise OutOfFrameError(
                    f"{self.kind} at ({cx}, {cy}) with extent {extent} does not fit "
                    f"a {self.size}px frame with a {FRAME_MARGIN:.0f}px margin"
                )

        if self.kind == "sphere":
            check_box(*self.center, self.radius)
        elif self.kind == "torus":
            if not 0 < self.radius < self.ring_radius:
                raise OutOfFrameError("torus needs 0 < tube radius < ring radius")
            check_box(*self.center, self.ring_radius + self.radius)
        elif self.kind == "capsule":
            check_box(*self.p0, self.radius)
            check_box(*self.p1, self.radius)
        else:
            if not self.spheres:
                raise OutOfFrameError("union_of_spheres needs at least one sphere")
            for cx, cy, _cz, r in self.spheres:
                check_box(cx, cy, r)


def _pixel_grid(size: int):
    y, x = np.mgrid[0:size, 0:size].astype(np.float64)
    return x, y


def render_primitive(spec: ShapeSpec) -> np.ndarray:
    """Render a ShapeSpec to an encoded H×W×3 normal map."""
    spec.validate()
    x, y = _pixel_grid(spec.size)
    vectors = np.zeros((spec.size, spec.size, 3))
    vectors[..., 2] = 1.0

    if spec.kind == "sphere":
        _paint_sphere(vectors, x, y, *spec.center, 0.0, spec.radius, None)
    elif spec.kind == "torus":
        cx, cy = spec.center
        dx, dy = x - cx, y - cy
        rho = np.hypot(dx, dy)
        q = (rho - spec.ring_radius) / spec.radius
        inside = np.abs(q) < 1.0
        with np.errstate(invalid="ignore"):
            nz = np.sqrt(np.clip(1.0 - q * q, 0.0, 1.0))
            scale = np.where(rho > 0, q / np.maximum(rho, 1e-12), 0.0)
        vectors[inside, 0] = (scale * dx)[inside]
        vectors[inside, 1] = (scale * dy)[inside]
        vectors[inside, 2] = nz[inside]
    elif spec.kind == "capsule":
        p0 = np.asarray(spec.p0, dtype=np.float64)
        p1 = np.asarray(spec.p1, dtype=np.float64)
        seg = p1 - p0
        seg_len2 = max(float(seg @ seg), 1e-12)
        t = np.clip(((x - p0[0]) * seg[0] + (y - p0[1]) * seg[1]) / seg_len2, 0.0, 1.0)
        qx = p0[0] + t * seg[0]
        qy = p0[1] + t * seg[1]
        dx, dy = x - qx, y - qy
        d2 = (dx * dx + dy * dy) / (spec.radius * spec.radius)
        inside = d2 < 1.0
        nz = np.sqrt(np.clip(1.0 - d2, 0.0, 1.0))
        vectors[inside, 0] = (dx / spec.radius)[inside]
        vectors[inside, 1] = (dy / spec.radius)[inside]
        vectors[inside, 2] = nz[inside]
    else:  # union_of_spheres: keep the frontmost surface per pixel
        best_z = np.full((spec.size, spec.size), -np.inf)
        for cx, cy, cz, r in spec.spheres:
            _paint_sphere(vectors, x, y, cx, cy, cz, r, best_z)

    return encode_normals(vectors)


def _paint_sphere(vectors, x, y, cx, cy, cz, r, best_z):
    dx, dy = (x - cx) / r, (y - cy) / r
    d2 = dx * dx + dy * dy
    inside = d2 < 1.0
    nz = np.sqrt(np.clip(1.0 - d2, 0.0, 1.0))
    if best_z is not None:
        inside &= (cz + r * nz) > best_z
        best_z[inside] = (cz + r * nz)[inside]
    vectors[inside, 0] = dx[inside]
    vectors[inside, 1] = dy[inside]
    vectors[inside, 2] = nz[inside]


def extract_contours(nmap: np.ndarray, nz_threshold: float = OCCLUDING_NZ) -> np.ndarray:
    """Sketch image from a normal map: silhouette + occluding contours.

    Returns an H×W uint8 image, 0 = stroke, 255 = blank, with strokes
    thinned to a 1 px curve.
    """
    f = decode_normals(nmap)
    if not f.foreground.any():
        raise EmptySketchError("normal map has no foreground to trace")
    fg = _fill_small_holes(f.foreground)
    boundary = fg & ~binary_erosion(fg)
    occluding = fg & (f.vectors[..., 2] < nz_threshold)
    strokes = thin(boundary | occluding)
    return np.where(strokes, 0, 255).astype(np.uint8)


def _fill_small_holes(fg: np.ndarray) -> np.ndarray:
    labels = label(~fg, connectivity=1)
    filled = fg.copy()
    border = np.zeros_like(fg)
    border[0, :] = border[-1, :] = border[:, 0] = border[:, -1] = True
    for comp in range(1, labels.max() + 1):
        region = labels == comp
        if region.sum() < MIN_HOLE_AREA and not (region & border).any():
            filled |= region
    return filled
