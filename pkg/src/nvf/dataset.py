"""Viewpoint sampling strategies and ground-truth dataset construction.

Samples pair a viewpoint with the binned distribution observed by the
rasterization oracle. Sampling is seeded and rejection steps consume
randomness in a fixed order, so every operation here is reproducible.
The on-disk form is a CSV with columns x,y,z,alpha,gamma,m0..m{k-1}
(angles in radians, floats printed with 9 significant digits).
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .field import Viewpoint, wrap_yaw
from .raster import BinSpec, Camera, CategoricalBins, histogram, render
from .scene import Scene

EYE_HEIGHT = 1.7  # pedestrian eye level, meters


@dataclass(frozen=True)
class ViewSample:
    viewpoint: Viewpoint
    m: np.ndarray


class Dataset:
    """Column store of view samples: viewpoints (N, 5) and m (N, k)."""

    def __init__(self, viewpoints: np.ndarray, m: np.ndarray):
        self.viewpoints = np.asarray(viewpoints, dtype=np.float64).reshape(-1, 5)
        self.m = np.asarray(m, dtype=np.float64)
        if self.m.ndim != 2 or len(self.m) != len(self.viewpoints):
            raise ValueError("m must be (N, k) aligned with viewpoints")

    @property
    def k(self) -> int:
        return self.m.shape[1]

    def __len__(self) -> int:
        return len(self.viewpoints)

    def __getitem__(self, i: int) -> ViewSample:
        return ViewSample(Viewpoint.from_array(self.viewpoints[i]), self.m[i])

    def take(self, idx) -> "Dataset":
        return Dataset(self.viewpoints[idx], self.m[idx])


@dataclass(frozen=True)
class UniformSampling:
    """Free-space positions above ground, uniform over the scene box."""

    z_range: tuple[float, float] | None = None  # defaults to (eye level, box top)
    pitch_range_deg: tuple[float, float] = (-90.0, 90.0)
    directions_per_position: int = 1


@dataclass(frozen=True)
class StreetLevelSampling:
    """Positions over road or sidewalk geometry at eye height,
    pedestrian pitch range."""

    eye_height: float = EYE_HEIGHT
    pitch_range_deg: tuple[float, float] = (-10.0, 30.0)
    directions_per_position: int = 1


@dataclass(frozen=True)
class FacadeMountedSampling:
    """Positions on building facades, looking outward along the wall
    normal with bounded jitter (so direction . normal stays positive)."""

    offset: float = 0.05
    yaw_jitter_deg: float = 30.0
    pitch_jitter_deg: float = 15.0
    directions_per_position: int = 1


SamplingStrategy = UniformSampling | StreetLevelSampling | FacadeMountedSampling


def _inside_any_building(scene: Scene, pts: np.ndarray) -> np.ndarray:
    hit = np.zeros(len(pts), dtype=bool)
    for b in scene.buildings:
        x0, y0, x1, y1 = b.footprint
        hit |= (
            (pts[:, 0] > x0) & (pts[:, 0] < x1)
            & (pts[:, 1] > y0) & (pts[:, 1] < y1)
            & (pts[:, 2] > 0.0) & (pts[:, 2] < b.height)
        )
    return hit


def _sample_on_triangles(rng, verts, tris, weights, n):
    idx = rng.choice(len(tris), size=n, p=weights / weights.sum())
    u = rng.random(n)
    v = rng.random(n)
    flip = u + v > 1.0
    u[flip], v[flip] = 1.0 - u[flip], 1.0 - v[flip]
    t = verts[tris[idx]]
    return t[:, 0] + u[:, None] * (t[:, 1] - t[:, 0]) + v[:, None] * (t[:, 2] - t[:, 0])


def sample_viewpoints(scene: Scene, strategy: SamplingStrategy, n: int, seed: int) -> np.ndarray:
    """Exactly n viewpoints as an (n, 5) array, deterministic per seed."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    dpp = strategy.directions_per_position
    if dpp < 1:
        raise ValueError("directions_per_position must be >= 1")
    n_pos = math.ceil(n / dpp)

    if isinstance(strategy, UniformSampling):
        lo, hi = scene.aabb
        z0, z1 = strategy.z_range if strategy.z_range else (min(EYE_HEIGHT, hi[2]), hi[2])
        if not (lo[2] <= z0 <= z1 <= hi[2] and z0 >= 0.0):
            raise ValueError("z_range must lie within the scene box and above ground")
        positions = np.empty((0, 3))
        while len(positions) < n_pos:
            cand = np.column_stack(
                [
                    rng.uniform(lo[0], hi[0], size=2 * n_pos),
                    rng.uniform(lo[1], hi[1], size=2 * n_pos),
                    rng.uniform(z0, z1, size=2 * n_pos),
                ]
            )
            positions = np.concatenate([positions, cand[~_inside_any_building(scene, cand)]])
        positions = positions[:n_pos]
        yaw = rng.uniform(0.0, 2.0 * math.pi, size=(n_pos, dpp))
        p0, p1 = (math.radians(d) for d in strategy.pitch_range_deg)
        pitch = rng.uniform(p0, p1, size=(n_pos, dpp))

    elif isinstance(strategy, StreetLevelSampling):
        ids = [scene.class_index("road"), scene.class_index("sidewalk")]
        mask = np.isin(scene.tri_class, ids)
        if not mask.any():
            raise ValueError("scene has no road or sidewalk geometry to sample")
        tris = scene.triangles[mask]
        t = scene.vertices[tris]
        areas = 0.5 * np.linalg.norm(np.cross(t[:, 1] - t[:, 0], t[:, 2] - t[:, 0]), axis=1)
        positions = _sample_on_triangles(rng, scene.vertices, tris, areas, n_pos)
        positions[:, 2] += strategy.eye_height
        yaw = rng.uniform(0.0, 2.0 * math.pi, size=(n_pos, dpp))
        p0, p1 = (math.radians(d) for d in strategy.pitch_range_deg)
        pitch = rng.uniform(p0, p1, size=(n_pos, dpp))

    elif isinstance(strategy, FacadeMountedSampling):
        facades = [f for b in scene.buildings for f in b.facades() if f.area > 0]
        if not facades:
            raise ValueError("scene has no building facades to sample")
        areas = np.array([f.area for f in facades])
        pick = rng.choice(len(facades), size=n_pos, p=areas / areas.sum())
        a = rng.random(n_pos)
        b = rng.random(n_pos)
        yj = math.radians(strategy.yaw_jitter_deg)
        pj = math.radians(strategy.pitch_jitter_deg)
        dyaw = rng.uniform(-yj, yj, size=(n_pos, dpp))
        pitch = rng.uniform(-pj, pj, size=(n_pos, dpp))
        positions = np.empty((n_pos, 3))
        yaw = np.empty((n_pos, dpp))
        for i, fi in enumerate(pick):
            f = facades[fi]
            positions[i] = f.origin + a[i] * f.e1 + b[i] * f.e2 + strategy.offset * f.normal
            yaw[i] = wrap_yaw(math.atan2(f.normal[1], f.normal[0])) + dyaw[i]
        yaw = np.mod(yaw, 2.0 * math.pi)

    else:
        raise TypeError(f"unknown strategy {type(strategy).__name__}")

    vps = np.empty((n_pos * dpp, 5))
    vps[:, :3] = np.repeat(positions, dpp, axis=0)
    vps[:, 3] = yaw.ravel()
    vps[:, 4] = pitch.ravel()
    return vps[:n]


def build_dataset(scene: Scene, viewpoints: np.ndarray, bins: BinSpec | None = None,
                  camera: Camera | None = None, workers: int = 1) -> Dataset:
    """Render and bin each viewpoint; output order follows input order."""
    viewpoints = np.asarray(viewpoints, dtype=np.float64).reshape(-1, 5)
    if bins is None:
        bins = CategoricalBins(scene.k)
    proto = camera if camera is not None else Camera(Viewpoint(0, 0, 0, 0, 0))

    def one(i):
        vp = Viewpoint.from_array(viewpoints[i])
        cam = Camera(vp, proto.width, proto.height, proto.vfov_deg, proto.near, proto.far)
        try:
            return histogram(render(scene, cam), bins)
        except Exception as e:
            raise RuntimeError(f"rendering viewpoint {i} failed: {e}") from e

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            ms = list(pool.map(one, range(len(viewpoints))))
    else:
        ms = [one(i) for i in range(len(viewpoints))]
    return Dataset(viewpoints, np.stack(ms) if ms else np.zeros((0, bins.k)))


def split(dataset: Dataset, test_fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Disjoint, exhaustive train/test split by seeded permutation."""
    if not 0.0 < test_fraction < 1.0:
        raise ValueError("test_fraction must be in (0, 1)")
    n = len(dataset)
    n_test = round(n * test_fraction)
    if n_test == 0 or n_test == n:
        raise ValueError("split would leave an empty side")
    order = np.random.default_rng(seed).permutation(n)
    return dataset.take(np.sort(order[n_test:])), dataset.take(np.sort(order[:n_test]))


def subset(dataset: Dataset, fraction: float, seed: int) -> Dataset:
    """Seeded nested subsets: for one seed, smaller fractions are
    contained in larger ones, so size sweeps stay comparable."""
    if not 0.0 < fraction <= 1.0:
        raise ValueError("fraction must be in (0, 1]")
    if fraction == 1.0:
        return dataset
    n = len(dataset)
    m = max(1, round(n * fraction))
    order = np.random.default_rng(seed).permutation(n)
    return dataset.take(np.sort(order[:m]))


def save_views_csv(dataset: Dataset, path):
    k = dataset.k
    header = "x,y,z,alpha,gamma," + ",".join(f"m{i}" for i in range(k))
    with open(path, "w") as f:
        f.write(header + "\n")
        for vp, m in zip(dataset.viewpoints, dataset.m):
            f.write(",".join(f"{v:.9g}" for v in (*vp, *m)) + "\n")


def load_views_csv(path) -> Dataset:
    with open(path) as f:
        header = f.readline().strip().split(",")
        if header[:5] != ["x", "y", "z", "alpha", "gamma"]:
            raise ValueError(f"unexpected CSV header in {path}")
        k = len(header) - 5
        rows = np.loadtxt(f, delimiter=",", ndmin=2)
    if rows.size == 0:
        raise ValueError(f"no samples in {path}")
    if rows.shape[1] != 5 + k:
        raise ValueError(f"row width {rows.shape[1]} does not match header in {path}")
    return Dataset(rows[:, :5], rows[:, 5:])
