"""Thematically labeled triangle meshes and a procedural city generator.

Geometry lives in a world frame with x east, y north, z up, in meters.
Every triangle carries one thematic class id; class 0 is always "sky",
the background hit when a view ray misses geometry, and is never
assigned to a triangle. Horizontal layers (surface, water, road,
sidewalk) sit at distinct heights so that no two classes are coplanar.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

# z offsets of the flat layers; buildings and trees start above them
SURFACE_Z = 0.0
WATER_Z = 0.01
ROAD_Z = 0.02
SIDEWALK_Z = 0.03
BUILDING_BASE_Z = 0.05
TREE_BASE_Z = 0.04


class SceneError(ValueError):
    pass


class SceneFormatError(SceneError):
    """Malformed scene file (bad JSON or missing/ill-typed fields)."""


class SceneValidationError(SceneError):
    """Structurally valid file describing an inconsistent scene."""


@dataclass(frozen=True)
class ThematicClass:
    id: int
    name: str
    color: tuple[int, int, int]


DEFAULT_CLASSES = [
    ThematicClass(0, "sky", (135, 206, 235)),
    ThematicClass(1, "building", (170, 170, 178)),
    ThematicClass(2, "water", (52, 120, 199)),
    ThematicClass(3, "road", (70, 70, 70)),
    ThematicClass(4, "sidewalk", (200, 195, 185)),
    ThematicClass(5, "surface", (120, 158, 92)),
    ThematicClass(6, "tree", (44, 116, 50)),
]


@dataclass(frozen=True)
class Facade:
    """One vertical wall rectangle: origin + a * e1 + b * e2, a,b in [0,1]."""

    origin: np.ndarray
    e1: np.ndarray  # horizontal edge, length = wall width
    e2: np.ndarray  # vertical edge, length = wall height
    normal: np.ndarray  # outward horizontal unit vector

    @property
    def width(self) -> float:
        return float(np.linalg.norm(self.e1))

    @property
    def height(self) -> float:
        return float(np.linalg.norm(self.e2))

    @property
    def area(self) -> float:
        return self.width * self.height


@dataclass(frozen=True)
class FacadePatch:
    center: np.ndarray
    normal: np.ndarray
    origin: np.ndarray
    e1: np.ndarray
    e2: np.ndarray


@dataclass(frozen=True)
class Building:
    id: int
    tri_start: int
    tri_count: int
    footprint: tuple[float, float, float, float]  # x0, y0, x1, y1
    height: float

    def facades(self) -> list[Facade]:
        x0, y0, x1, y1 = self.footprint
        h = self.height
        up = np.array([0.0, 0.0, h])
        mk = lambda ox, oy, ex, ey, nx, ny: Facade(
            np.array([ox, oy, 0.0]),
            np.array([ex, ey, 0.0]),
            up,
            np.array([float(nx), float(ny), 0.0]),
        )
        return [
            mk(x0, y0, x1 - x0, 0.0, 0, -1),  # south
            mk(x1, y0, 0.0, y1 - y0, 1, 0),  # east
            mk(x1, y1, x0 - x1, 0.0, 0, 1),  # north
            mk(x0, y1, 0.0, y0 - y1, -1, 0),  # west
        ]

    def contains(self, p) -> bool:
        x0, y0, x1, y1 = self.footprint
        x, y, z = p[0], p[1], p[2]
        return x0 < x < x1 and y0 < y < y1 and 0.0 < z < self.height


@dataclass(eq=False)
class Scene:
    classes: list[ThematicClass]
    vertices: np.ndarray  # (V, 3) float64
    triangles: np.ndarray  # (T, 3) int32
    tri_class: np.ndarray  # (T,) int32
    tri_value: np.ndarray | None = None  # (T,) float64
    buildings: list[Building] = field(default_factory=list)
    aabb: np.ndarray = None  # (2, 3), derived

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=np.float64).reshape(-1, 3)
        self.triangles = np.asarray(self.triangles, dtype=np.int32).reshape(-1, 3)
        self.tri_class = np.asarray(self.tri_class, dtype=np.int32).reshape(-1)
        if self.tri_value is not None:
            self.tri_value = np.asarray(self.tri_value, dtype=np.float64).reshape(-1)
        if len(self.vertices):
            self.aabb = np.stack([self.vertices.min(axis=0), self.vertices.max(axis=0)])
        else:
            self.aabb = np.zeros((2, 3))
        self.validate()

    @property
    def k(self) -> int:
        return len(self.classes)

    @property
    def class_names(self) -> list[str]:
        return [c.name for c in self.classes]

    def class_index(self, name: str) -> int:
        for c in self.classes:
            if c.name == name:
                return c.id
        raise KeyError(f"unknown class {name!r}")

    def validate(self):
        ids = [c.id for c in self.classes]
        if ids != list(range(len(ids))):
            raise SceneValidationError("class ids must be contiguous from 0")
        names = [c.name for c in self.classes]
        if len(set(names)) != len(names):
            raise SceneValidationError("class names must be unique")
        if not self.classes or self.classes[0].name != "sky":
            raise SceneValidationError("class 0 must be named 'sky'")
        t = len(self.triangles)
        if len(self.tri_class) != t:
            raise SceneValidationError("tri_class must have one entry per triangle")
        if self.tri_value is not None and len(self.tri_value) != t:
            raise SceneValidationError("tri_value must have one entry per triangle")
        if t:
            if self.triangles.min() < 0 or self.triangles.max() >= len(self.vertices):
                raise SceneValidationError("triangle vertex index out of range")
            if self.tri_class.min() < 1 or self.tri_class.max() >= self.k:
                bad = int(
                    self.tri_class[(self.tri_class < 1) | (self.tri_class >= self.k)][0]
                )
                raise SceneValidationError(
                    f"tri_class {bad} outside geometry class range [1, {self.k})"
                )
        for b in self.buildings:
            if b.tri_start < 0 or b.tri_start + b.tri_count > t:
                raise SceneValidationError(f"building {b.id} triangle range out of bounds")

    def __eq__(self, other) -> bool:
        if not isinstance(other, Scene):
            return NotImplemented
        if self.classes != other.classes or self.buildings != other.buildings:
            return False
        if not (
            np.array_equal(self.vertices, other.vertices)
            and np.array_equal(self.triangles, other.triangles)
            and np.array_equal(self.tri_class, other.tri_class)
        ):
            return False
        if (self.tri_value is None) != (other.tri_value is None):
            return False
        return self.tri_value is None or np.array_equal(self.tri_value, other.tri_value)

    def triangle_vertices(self) -> np.ndarray:
        """(T, 3, 3) corner positions."""
        return self.vertices[self.triangles]


class _MeshBuilder:
    def __init__(self):
        self.vertices: list = []
        self.triangles: list = []
        self.tri_class: list = []

    def add_quad(self, p0, p1, p2, p3, cls: int):
        """Two triangles for corners in winding order p0 p1 p2 p3."""
        base = len(self.vertices)
        self.vertices += [p0, p1, p2, p3]
        self.triangles += [[base, base + 1, base + 2], [base, base + 2, base + 3]]
        self.tri_class += [cls, cls]

    def add_tri(self, p0, p1, p2, cls: int):
        base = len(self.vertices)
        self.vertices += [p0, p1, p2]
        self.triangles.append([base, base + 1, base + 2])
        self.tri_class.append(cls)

    def add_ground_rect(self, x0, y0, x1, y1, z, cls: int):
        self.add_quad([x0, y0, z], [x1, y0, z], [x1, y1, z], [x0, y1, z], cls)

    def add_box(self, x0, y0, x1, y1, z0, z1, cls: int) -> int:
        """Closed box with outward winding; returns the first triangle index."""
        start = len(self.triangles)
        # bottom (normal -z) and top (+z)
        self.add_quad([x0, y0, z0], [x0, y1, z0], [x1, y1, z0], [x1, y0, z0], cls)
        self.add_quad([x0, y0, z1], [x1, y0, z1], [x1, y1, z1], [x0, y1, z1], cls)
        # south, north, west, east walls
        self.add_quad([x0, y0, z0], [x1, y0, z0], [x1, y0, z1], [x0, y0, z1], cls)
        self.add_quad([x1, y1, z0], [x0, y1, z0], [x0, y1, z1], [x1, y1, z1], cls)
        self.add_quad([x0, y1, z0], [x0, y0, z0], [x0, y0, z1], [x0, y1, z1], cls)
        self.add_quad([x1, y0, z0], [x1, y1, z0], [x1, y1, z1], [x1, y0, z1], cls)
        return start

    def add_tree(self, cx, cy, cls: int, trunk_r=0.3, trunk_h=2.2, crown_r=2.6, crown_h=4.5):
        z0 = TREE_BASE_Z
        z1 = z0 + trunk_h
        apex = [cx, cy, z1 + crown_h]
        ang = np.linspace(0.0, 2.0 * math.pi, 7)[:-1]
        tx = cx + trunk_r * np.cos(ang)
        ty = cy + trunk_r * np.sin(ang)
        bx = cx + crown_r * np.cos(ang)
        by = cy + crown_r * np.sin(ang)
        for i in range(6):
            j = (i + 1) % 6
            self.add_quad(
                [tx[i], ty[i], z0], [tx[j], ty[j], z0], [tx[j], ty[j], z1], [tx[i], ty[i], z1], cls
            )
            # crown base ring (facing down) and side
            self.add_tri([cx, cy, z1], [bx[j], by[j], z1], [bx[i], by[i], z1], cls)
            self.add_tri([bx[i], by[i], z1], [bx[j], by[j], z1], apex, cls)


def generate_city(
    seed: int,
    grid: int = 6,
    block_size: float = 80.0,
    street_width: float = 12.0,
    building_density: float = 0.7,
    max_height: float = 60.0,
    tree_density: float = 0.4,
    water_fraction: float = 0.1,
    sidewalk_width: float = 3.0,
) -> Scene:
    """Deterministic synthetic city on a street grid.

    Blocks carry a sidewalk ring, up to four box buildings, and trees
    along the ring; a seeded subset of blocks becomes water. The output
    is a pure function of the arguments.
    """
    if grid < 1:
        raise ValueError("grid must be >= 1")
    if block_size <= 0 or street_width <= 0 or max_height <= 0:
        raise ValueError("dimensions must be positive")
    for name, d in (("building_density", building_density),
                    ("tree_density", tree_density),
                    ("water_fraction", water_fraction)):
        if not 0.0 <= d <= 1.0:
            raise ValueError(f"{name} must lie in [0, 1]")

    rng = np.random.default_rng(seed)
    mesh = _MeshBuilder()
    cls = {c.name: c.id for c in DEFAULT_CLASSES}
    pitch = block_size + street_width
    extent = grid * block_size + (grid + 1) * street_width

    mesh.add_ground_rect(0.0, 0.0, extent, extent, SURFACE_Z, cls["surface"])

    # vertical roads run the full extent; horizontal segments fill between them
    for i in range(grid + 1):
        x = i * pitch
        mesh.add_ground_rect(x, 0.0, x + street_width, extent, ROAD_Z, cls["road"])
    for j in range(grid + 1):
        y = j * pitch
        for i in range(grid):
            x = street_width + i * pitch
            mesh.add_ground_rect(x, y, x + block_size, y + street_width, ROAD_Z, cls["road"])

    n_blocks = grid * grid
    n_water = max(1, round(water_fraction * n_blocks)) if water_fraction > 0 else 0
    water_blocks = set(rng.choice(n_blocks, size=n_water, replace=False).tolist()) if n_water else set()

    buildings: list[Building] = []
    for bj in range(grid):
        for bi in range(grid):
            x0 = street_width + bi * pitch
            y0 = street_width + bj * pitch
            x1, y1 = x0 + block_size, y0 + block_size
            if bj * grid + bi in water_blocks:
                mesh.add_ground_rect(x0, y0, x1, y1, WATER_Z, cls["water"])
                continue

            sw = sidewalk_width
            mesh.add_ground_rect(x0, y0, x1, y0 + sw, SIDEWALK_Z, cls["sidewalk"])
            mesh.add_ground_rect(x0, y1 - sw, x1, y1, SIDEWALK_Z, cls["sidewalk"])
            mesh.add_ground_rect(x0, y0 + sw, x0 + sw, y1 - sw, SIDEWALK_Z, cls["sidewalk"])
            mesh.add_ground_rect(x1 - sw, y0 + sw, x1, y1 - sw, SIDEWALK_Z, cls["sidewalk"])

            # 2x2 parcels inside the sidewalk ring
            lot0 = np.array([x0 + sw, y0 + sw])
            lot_size = (block_size - 2 * sw) / 2.0
            for pj in range(2):
                for pi in range(2):
                    place = rng.random() < building_density
                    u_h = rng.uniform(0.15, 1.0)
                    shrink = rng.uniform(0.55, 0.85, size=2)
                    off = rng.uniform(0.0, 1.0, size=2)
                    margin = 1.5
                    avail = lot_size - 2 * margin
                    if not place or avail <= 1.0:
                        continue
                    w = avail * shrink
                    p0 = lot0 + [pi * lot_size, pj * lot_size] + margin + off * (avail - w)
                    h = u_h * max_height
                    start = mesh.add_box(
                        p0[0], p0[1], p0[0] + w[0], p0[1] + w[1], BUILDING_BASE_Z, h, cls["building"]
                    )
                    buildings.append(
                        Building(
                            id=len(buildings),
                            tri_start=start,
                            tri_count=12,
                            footprint=(float(p0[0]), float(p0[1]), float(p0[0] + w[0]), float(p0[1] + w[1])),
                            height=float(h),
                        )
                    )

            # tree spots along the ring centerline
            ring_mid = sw / 2.0
            spacing = 9.0
            n_side = max(1, int(block_size // spacing))
            for side in range(4):
                for t in range(n_side):
                    keep = rng.random() < tree_density
                    jitter = rng.uniform(-2.0, 2.0)
                    if not keep:
                        continue
                    s = (t + 0.5) / n_side * block_size + jitter
                    s = min(max(s, 2.0), block_size - 2.0)
                    if side == 0:
                        cx, cy = x0 + s, y0 + ring_mid
                    elif side == 1:
                        cx, cy = x0 + s, y1 - ring_mid
                    elif side == 2:
                        cx, cy = x0 + ring_mid, y0 + s
                    else:
                        cx, cy = x1 - ring_mid, y0 + s
                    mesh.add_tree(cx, cy, cls["tree"])

    return Scene(
        classes=list(DEFAULT_CLASSES),
        vertices=np.array(mesh.vertices, dtype=np.float64),
        triangles=np.array(mesh.triangles, dtype=np.int32),
        tri_class=np.array(mesh.tri_class, dtype=np.int32),
        buildings=buildings,
    )


def facade_patches(building: Building, patch_size: float) -> list[FacadePatch]:
    """Tile each facade with patch_size x patch_size rectangles.

    The last row and column of a facade may be smaller. Patches of one
    facade are emitted row-major, facades in south/east/north/west order.
    """
    if patch_size <= 0:
        raise ValueError("patch_size must be positive")
    patches: list[FacadePatch] = []
    for f in building.facades():
        w, h = f.width, f.height
        if w <= 0 or h <= 0:
            continue
        u_dir = f.e1 / w
        v_dir = f.e2 / h
        nu = math.ceil(w / patch_size)
        nv = math.ceil(h / patch_size)
        for j in range(nv):
            v0, v1 = j * patch_size, min((j + 1) * patch_size, h)
            for i in range(nu):
                u0, u1 = i * patch_size, min((i + 1) * patch_size, w)
                origin = f.origin + u0 * u_dir + v0 * v_dir
                e1 = (u1 - u0) * u_dir
                e2 = (v1 - v0) * v_dir
                patches.append(
                    FacadePatch(
                        center=origin + 0.5 * e1 + 0.5 * e2,
                        normal=f.normal,
                        origin=origin,
                        e1=e1,
                        e2=e2,
                    )
                )
    return patches


def _class_from_json(obj, where: str) -> ThematicClass:
    try:
        color = obj["color"]
        return ThematicClass(int(obj["id"]), str(obj["name"]), (int(color[0]), int(color[1]), int(color[2])))
    except (KeyError, TypeError, IndexError) as e:
        raise SceneFormatError(f"bad class entry in {where}: {e}") from e


def save_scene(scene: Scene, path):
    doc = {
        "version": 1,
        "classes": [
            {"id": c.id, "name": c.name, "color": list(c.color)} for c in scene.classes
        ],
        "vertices": scene.vertices.tolist(),
        "triangles": scene.triangles.tolist(),
        "tri_class": scene.tri_class.tolist(),
        "tri_value": None if scene.tri_value is None else scene.tri_value.tolist(),
        "buildings": [
            {
                "id": b.id,
                "tri_start": b.tri_start,
                "tri_count": b.tri_count,
                "footprint": list(b.footprint),
                "height": b.height,
            }
            for b in scene.buildings
        ],
    }
    with open(path, "w") as f:
        json.dump(doc, f, separators=(",", ":"))


def load_scene(path) -> Scene:
    try:
        with open(path) as f:
            doc = json.load(f)
    except json.JSONDecodeError as e:
        raise SceneFormatError(f"invalid JSON at line {e.lineno}, column {e.colno}: {e.msg}") from e

    if not isinstance(doc, dict):
        raise SceneFormatError("scene document must be a JSON object")
    if doc.get("version") != 1:
        raise SceneFormatError(f"unsupported scene version {doc.get('version')!r}")
    for key in ("classes", "vertices", "triangles", "tri_class"):
        if key not in doc:
            raise SceneFormatError(f"missing field {key!r}")

    classes = [_class_from_json(c, "classes") for c in doc["classes"]]
    buildings = []
    for b in doc.get("buildings") or []:
        try:
            buildings.append(
                Building(
                    id=int(b["id"]),
                    tri_start=int(b["tri_start"]),
                    tri_count=int(b["tri_count"]),
                    footprint=tuple(float(v) for v in b["footprint"]),
                    height=float(b["height"]),
                )
            )
        except (KeyError, TypeError, ValueError) as e:
            raise SceneFormatError(f"bad building entry: {e}") from e

    try:
        vertices = np.array(doc["vertices"], dtype=np.float64).reshape(-1, 3)
        triangles = np.array(doc["triangles"], dtype=np.int32).reshape(-1, 3)
        tri_class = np.array(doc["tri_class"], dtype=np.int32)
        tri_value = doc.get("tri_value")
        if tri_value is not None:
            tri_value = np.array(tri_value, dtype=np.float64)
    except (TypeError, ValueError) as e:
        raise SceneFormatError(f"bad geometry arrays: {e}") from e

    return Scene(
        classes=classes,
        vertices=vertices,
        triangles=triangles,
        tri_class=tri_class,
        tri_value=tri_value,
        buildings=buildings,
    )
