"""Software rasterizer for thematic class images and binned histograms.

Visibility semantics, chosen to be checkable against a per-pixel ray
cast: a pixel shows the triangle with the smallest forward depth at the
pixel center among depths strictly inside (near, far); equal depths
resolve to the lowest triangle index; pixels hitting nothing are sky
(class 0). Sampling is at pixel centers with a top-left fill rule and
no anti-aliasing (blending class ids would be meaningless). All
geometric math runs in float64.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .field import Viewpoint
from .scene import Scene


@dataclass(frozen=True)
class Camera:
    viewpoint: Viewpoint
    width: int = 64
    height: int = 64
    vfov_deg: float = 60.0
    near: float = 0.1
    far: float = 5000.0

    def __post_init__(self):
        if not 0.0 < self.vfov_deg < 180.0:
            raise ValueError("vertical fov must be in (0, 180) degrees")
        if self.width < 1 or self.height < 1:
            raise ValueError("image size must be at least 1x1")
        if not 0.0 < self.near < self.far:
            raise ValueError("need 0 < near < far")


@dataclass
class ClassImage:
    class_id: np.ndarray  # (H, W) int32, 0 = sky
    depth: np.ndarray  # (H, W) float64, +inf at sky
    value: np.ndarray | None  # (H, W) float64, NaN at sky; None without tri_value

    @property
    def width(self) -> int:
        return self.class_id.shape[1]

    @property
    def height(self) -> int:
        return self.class_id.shape[0]


@dataclass(frozen=True)
class CategoricalBins:
    """One bin per thematic class."""

    k: int

    def __post_init__(self):
        if self.k < 2:
            raise ValueError("need at least sky plus one class")

    def to_json(self):
        return {"kind": "categorical", "k": self.k}


@dataclass(frozen=True)
class ScalarBins:
    """Value bins [e0,e1), [e1,e2), ... plus the implicit sky bin 0.

    Out-of-range values clamp into the first or last bin, so edges need
    not cover outliers; the final edge may be inf.
    """

    edges: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "edges", tuple(float(e) for e in self.edges))
        if len(self.edges) < 2:
            raise ValueError("need at least two edges")
        if any(b <= a for a, b in zip(self.edges, self.edges[1:])):
            raise ValueError("edges must be strictly increasing")

    @property
    def k(self) -> int:
        return len(self.edges)  # (len-1) value bins + sky

    def to_json(self):
        return {"kind": "scalar", "edges": list(self.edges)}


BinSpec = CategoricalBins | ScalarBins


def bins_from_json(obj) -> BinSpec:
    if obj["kind"] == "categorical":
        return CategoricalBins(int(obj["k"]))
    if obj["kind"] == "scalar":
        return ScalarBins(tuple(obj["edges"]))
    raise ValueError(f"unknown bin kind {obj.get('kind')!r}")


def camera_basis(vp: Viewpoint):
    """World-up, roll-free camera frame (eye, forward, right, up)."""
    cg = math.cos(vp.gamma)
    if abs(cg) < 1e-12:
        raise ValueError("pitch of +-90 degrees gives a degenerate up vector")
    forward = np.array(
        [cg * math.cos(vp.alpha), cg * math.sin(vp.alpha), math.sin(vp.gamma)]
    )
    right = np.cross(forward, [0.0, 0.0, 1.0])
    right /= np.linalg.norm(right)
    up = np.cross(right, forward)
    eye = np.array([vp.x, vp.y, vp.z])
    return eye, forward, right, up


@njit(cache=True, nogil=True)
def _fill_triangles(us, vs, zinv, tri_cls, tri_val, has_value, near, far,
                    class_img, depth_img, value_img):
    h, w = class_img.shape
    for t in range(us.shape[0]):
        u0, u1, u2 = us[t, 0], us[t, 1], us[t, 2]
        v0, v1, v2 = vs[t, 0], vs[t, 1], vs[t, 2]
        q0, q1, q2 = zinv[t, 0], zinv[t, 1], zinv[t, 2]
        area = (u1 - u0) * (v2 - v0) - (v1 - v0) * (u2 - u0)
        if area == 0.0:
            continue
        if area < 0.0:  # normalize orientation; geometry is double sided
            u1, u2 = u2, u1
            v1, v2 = v2, v1
            q1, q2 = q2, q1
            area = -area

        umin = min(u0, min(u1, u2))
        umax = max(u0, max(u1, u2))
        vmin = min(v0, min(v1, v2))
        vmax = max(v0, max(v1, v2))
        px0 = max(0, int(math.ceil(umin - 0.5)))
        px1 = min(w - 1, int(math.floor(umax - 0.5)))
        py0 = max(0, int(math.ceil(vmin - 0.5)))
        py1 = min(h - 1, int(math.floor(vmax - 0.5)))
        if px0 > px1 or py0 > py1:
            continue

        # top-left acceptance for each edge (screen y points down)
        e0x, e0y = u2 - u1, v2 - v1
        e1x, e1y = u0 - u2, v0 - v2
        e2x, e2y = u1 - u0, v1 - v0
        tl0 = e0y < 0.0 or (e0y == 0.0 and e0x > 0.0)
        tl1 = e1y < 0.0 or (e1y == 0.0 and e1x > 0.0)
        tl2 = e2y < 0.0 or (e2y == 0.0 and e2x > 0.0)

        for py in range(py0, py1 + 1):
            cy = py + 0.5
            for px in range(px0, px1 + 1):
                cx = px + 0.5
                w0 = e0x * (cy - v1) - e0y * (cx - u1)
                w1 = e1x * (cy - v2) - e1y * (cx - u2)
                w2 = e2x * (cy - v0) - e2y * (cx - u0)
                if w0 < 0.0 or w1 < 0.0 or w2 < 0.0:
                    continue
                if (w0 == 0.0 and not tl0) or (w1 == 0.0 and not tl1) or (w2 == 0.0 and not tl2):
                    continue
                zi = (w0 * q0 + w1 * q1 + w2 * q2) / area
                if zi <= 0.0:
                    continue
                depth = 1.0 / zi
                if depth <= near or depth >= far:
                    continue
                if depth < depth_img[py, px]:
                    depth_img[py, px] = depth
                    class_img[py, px] = tri_cls[t]
                    if has_value:
                        value_img[py, px] = tri_val[t]


def _clip_near(tri_cam, near):
    """Sutherland-Hodgman clip of one camera-space triangle at z = near.

    tri_cam is (3, 3) rows of (x_right, y_up, z_forward). Returns a list
    of triangles on the z > near side.
    """
    inside = tri_cam[:, 2] > near
    poly = []
    for i in range(3):
        a, b = tri_cam[i], tri_cam[(i + 1) % 3]
        ina, inb = inside[i], inside[(i + 1) % 3]
        if ina:
            poly.append(a)
        if ina != inb:
            s = (near - a[2]) / (b[2] - a[2])
            poly.append(a + s * (b - a))
    if len(poly) < 3:
        return []
    tris = []
    for i in range(1, len(poly) - 1):
        tris.append(np.stack([poly[0], poly[i], poly[i + 1]]))
    return tris


def render(scene: Scene, camera: Camera) -> ClassImage:
    eye, forward, right, up = camera_basis(camera.viewpoint)
    w, h = camera.width, camera.height
    half_h = math.tan(math.radians(camera.vfov_deg) / 2.0)
    half_w = half_h * w / h

    has_value = scene.tri_value is not None
    class_img = np.zeros((h, w), dtype=np.int32)
    depth_img = np.full((h, w), np.inf)
    value_img = np.full((h, w), np.nan) if has_value else np.zeros((0, 0))

    if len(scene.triangles):
        p = scene.vertices - eye
        cam = np.stack([p @ right, p @ up, p @ forward], axis=1)  # (V, 3)
        tri = cam[scene.triangles]  # (T, 3, 3)
        z = tri[:, :, 2]

        behind_all = np.all(z <= camera.near, axis=1)
        beyond_all = np.all(z >= camera.far, axis=1)
        crossing = (~behind_all) & np.any(z <= camera.near, axis=1)
        plain = ~(behind_all | beyond_all | crossing)

        parts = [(tri[plain], scene.tri_class[plain],
                  scene.tri_value[plain] if has_value else None)]
        for idx in np.nonzero(crossing)[0]:
            for sub in _clip_near(tri[idx], camera.near):
                parts.append(
                    (sub[None], scene.tri_class[idx : idx + 1],
                     scene.tri_value[idx : idx + 1] if has_value else None)
                )
        # clipped pieces render after whole triangles; equal-depth ties across
        # different triangles are resolved by this order, which only matters
        # for exactly coincident surfaces of different classes
        tri_all = np.concatenate([p0 for p0, _, _ in parts])
        cls_all = np.concatenate([c for _, c, _ in parts])
        val_all = (np.concatenate([v for _, _, v in parts])
                   if has_value else np.zeros(0))

        if len(tri_all):
            zc = tri_all[:, :, 2]
            us = (tri_all[:, :, 0] / (zc * half_w) + 1.0) * 0.5 * w
            vs = (1.0 - tri_all[:, :, 1] / (zc * half_h)) * 0.5 * h
            onscreen = ~(
                np.all(us < 0, axis=1) | np.all(us > w, axis=1)
                | np.all(vs < 0, axis=1) | np.all(vs > h, axis=1)
            )
            us, vs = us[onscreen], vs[onscreen]
            zinv = 1.0 / zc[onscreen]
            _fill_triangles(
                np.ascontiguousarray(us), np.ascontiguousarray(vs),
                np.ascontiguousarray(zinv),
                np.ascontiguousarray(cls_all[onscreen]),
                np.ascontiguousarray(val_all[onscreen] if has_value else np.zeros(0)),
                has_value, camera.near, camera.far,
                class_img, depth_img, value_img,
            )

    return ClassImage(class_img, depth_img, value_img if has_value else None)


def histogram(image: ClassImage, bins: BinSpec) -> np.ndarray:
    """Normalized bin occupancy of an image; sums to 1 exactly in
    rational pixel counts."""
    total = image.class_id.size
    if isinstance(bins, CategoricalBins):
        if int(image.class_id.max(initial=0)) >= bins.k:
            raise ValueError("image contains class ids outside the bin range")
        counts = np.bincount(image.class_id.ravel(), minlength=bins.k)
        return counts / total
    if image.value is None:
        raise ValueError("scalar bins require an image with a value channel")
    sky = image.class_id == 0
    vals = image.value[~sky]
    edges = np.asarray(bins.edges)
    idx = np.searchsorted(edges, vals, side="right") - 1
    idx = np.clip(idx, 0, len(edges) - 2)
    counts = np.bincount(idx, minlength=len(edges) - 1)
    return np.concatenate([[sky.sum()], counts]) / total


def render_falsecolor(scene: Scene, camera: Camera) -> bytes:
    """PNG-encoded class colors of a rendered frame."""
    from PIL import Image

    img = render(scene, camera)
    lut = np.array([c.color for c in scene.classes], dtype=np.uint8)
    rgb = lut[img.class_id]
    buf = io.BytesIO()
    Image.fromarray(rgb, mode="RGB").save(buf, format="PNG")
    return buf.getvalue()
