"""Model inspection and evaluation: latent projections, the nearest
neighbor baseline, a training-size RMSE sweep, and the region-error
protocol that scores a model against the rasterization oracle over a
grid of city-block-sized regions from eight compass directions."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from . import net
from .dataset import EYE_HEIGHT, Dataset, subset
from .field import Normalizer, Viewpoint
from .net import ModelParams
from .raster import Camera, CategoricalBins, histogram, render
from .scene import Scene, ThematicClass
from .train import TrainConfig, evaluate_rmse, train


def latent_codes(params: ModelParams, viewpoints) -> np.ndarray:
    """Second-to-last layer activations, one 128-vector per viewpoint."""
    _, lat = net.forward(params, np.asarray(viewpoints, dtype=np.float64))
    return lat


def _power_iteration(cov: np.ndarray, tol: float = 1e-9, max_iters: int = 1000,
                     orthogonal_to: np.ndarray | None = None):
    """Dominant eigenpair of a symmetric PSD matrix, optionally
    constrained orthogonal to an already-extracted eigenvector."""
    d = cov.shape[0]
    v = np.ones(d) / math.sqrt(d)
    if orthogonal_to is not None:
        v = v - (v @ orthogonal_to) * orthogonal_to
    for _ in range(max_iters):
        w = cov @ v
        if orthogonal_to is not None:
            w = w - (w @ orthogonal_to) * orthogonal_to
        norm = np.linalg.norm(w)
        if norm < 1e-300:
            return 0.0, np.zeros(d)
        w /= norm
        done = np.linalg.norm(w - v) < tol
        v = w
        if done:
            break
    lam = float(v @ cov @ v)
    # deterministic sign: largest-magnitude entry positive
    i = int(np.argmax(np.abs(v)))
    if v[i] < 0:
        v = -v
    return lam, v


def principal_axes_2d(data: np.ndarray, tol: float = 1e-9, max_iters: int = 1000):
    """Top-2 principal axes by power iteration with deflation.

    Eigenvalues below the floating-point noise floor of the total
    variance count as zero, so constant or rank-one data degrades to
    zero axes instead of amplified rounding noise.
    """
    x = np.asarray(data, dtype=np.float64)
    xc = x - x.mean(axis=0)
    cov = xc.T @ xc / max(len(x) - 1, 1)
    total_var = float(np.trace(cov))
    # variance at the noise floor of the centering subtraction is zero
    floor = max(total_var * 1e-12, float(np.mean(x * x)) * 1e-24, 1e-300)
    lam1, v1 = _power_iteration(cov, tol, max_iters)
    if lam1 <= floor:
        return np.zeros((x.shape[1], 2))
    cov2 = cov - lam1 * np.outer(v1, v1)
    lam2, v2 = _power_iteration(cov2, tol, max_iters, orthogonal_to=v1)
    if lam2 <= max(floor, lam1 * 1e-12):
        v2 = np.zeros(x.shape[1])
    return np.stack([v1, v2], axis=1)


def project_2d(latents: np.ndarray, method="pca") -> np.ndarray:
    """2D coordinates of latent vectors.

    method is "pca" (centered projection onto the top-2 principal
    axes) or ("axes", i, j) to pass raw dimensions through. Zero
    variance data projects to the origin.
    """
    x = np.asarray(latents, dtype=np.float64)
    if isinstance(method, (tuple, list)) and method[0] == "axes":
        return x[:, [int(method[1]), int(method[2])]].copy()
    if method != "pca":
        raise ValueError(f"unknown projection method {method!r}")
    if len(x) < 2:
        raise ValueError("principal components need at least 2 points")
    axes = principal_axes_2d(x)
    return (x - x.mean(axis=0)) @ axes


class KnnModel:
    """Brute-force k-nearest-neighbors over normalized viewpoints;
    distance ties resolve to the lower sample index."""

    def __init__(self, dataset: Dataset, normalizer: Normalizer):
        if len(dataset) == 0:
            raise ValueError("empty training set")
        self.normalizer = normalizer
        self.train_norm = normalizer.normalize(dataset.viewpoints)
        self.train_m = dataset.m

    def predict(self, viewpoints, k: int) -> np.ndarray:
        if not 1 <= k <= len(self.train_norm):
            raise ValueError("k must be between 1 and the training size")
        q = self.normalizer.normalize(np.asarray(viewpoints, dtype=np.float64).reshape(-1, 5))
        out = np.empty((len(q), self.train_m.shape[1]))
        chunk = max(1, int(2e7) // max(len(self.train_norm), 1))
        for s in range(0, len(q), chunk):
            block = q[s : s + chunk]
            d2 = ((block[:, None, :] - self.train_norm[None, :, :]) ** 2).sum(axis=2)
            idx = np.argsort(d2, axis=1, kind="stable")[:, :k]
            out[s : s + chunk] = self.train_m[idx].mean(axis=1)
        return out


def knn_predict(dataset: Dataset, normalizer: Normalizer, viewpoint, k: int) -> np.ndarray:
    """Mean distribution of the k nearest training views."""
    return KnnModel(dataset, normalizer).predict(np.asarray(viewpoint).reshape(1, 5), k)[0]


@dataclass
class ComparisonReport:
    fractions: list[float]
    sizes: list[int]
    rmse: dict[str, list[float]]  # model name -> per-fraction test RMSE

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)

    def table(self) -> str:
        cols = [f"{n}" for n in self.sizes]
        w = max(12, *(len(c) for c in cols)) + 2
        names = list(self.rmse)
        name_w = max(len(n) for n in names) + 2
        lines = ["Model".ljust(name_w) + "".join(c.rjust(w) for c in cols)]
        for n in names:
            lines.append(n.ljust(name_w) + "".join(f"{v:.3f}".rjust(w) for v in self.rmse[n]))
        return "\n".join(lines)


def compare_models(train_set: Dataset, test_set: Dataset, normalizer: Normalizer,
                   fractions, knn_ks, config: TrainConfig,
                   subset_seed: int = 0, log_every: int = 0) -> ComparisonReport:
    """Test RMSE of the neural field against KNN baselines across nested
    training subsets of increasing size."""
    fractions = sorted(fractions)
    sizes, neural = [], []
    knn_rows = {k: [] for k in knn_ks}
    for frac in fractions:
        part = subset(train_set, frac, subset_seed)
        sizes.append(len(part))
        model = net.init(config.seed, train_set.k, normalizer)
        fitted, _ = train(part, config, model, log_every=log_every)
        neural.append(evaluate_rmse(fitted, test_set))
        knn = KnnModel(part, normalizer)
        for k in knn_ks:
            pred = knn.predict(test_set.viewpoints, min(k, len(part)))
            err = pred - test_set.m
            knn_rows[k].append(float(np.sqrt(np.mean(err * err))))
    rmse = {f"{k}-neighbors": v for k, v in knn_rows.items()}
    rmse["neural field"] = neural
    return ComparisonReport(list(fractions), sizes, rmse)


@dataclass
class RegionErrorReport:
    region_side: float
    threshold: float
    class_names: list[str]
    centers: list[list[float]]  # region centers (x, y)
    errors: np.ndarray  # (n_regions, k) mean absolute error over directions
    pct_under: dict[str, float]  # per class, % of regions with error < threshold

    def to_json(self) -> str:
        doc = {
            "region_side": self.region_side,
            "threshold": self.threshold,
            "class_names": self.class_names,
            "centers": self.centers,
            "errors": self.errors.tolist(),
            "pct_under_threshold": self.pct_under,
        }
        return json.dumps(doc, indent=2)

    def table(self) -> str:
        w = max(10, *(len(n) for n in self.class_names)) + 2
        head = "".join(n.rjust(w) for n in self.class_names)
        vals = "".join(f"{self.pct_under[n]:.2f}".rjust(w) for n in self.class_names)
        return f"regions under {self.threshold:.0%} error (%), side {self.region_side} m\n{head}\n{vals}"


N_REGION_DIRECTIONS = 8


def region_error(scene: Scene, params: ModelParams, region_side: float = 80.0,
                 threshold: float = 0.10, camera: Camera | None = None,
                 eye_height: float = EYE_HEIGHT) -> RegionErrorReport:
    """Grid the scene footprint into square regions and compare model
    and oracle distributions from 8 uniformly spaced directions.

    Per region and class the error is the mean absolute difference of
    the components over the directions; the report gives the share of
    regions under the threshold per class.
    """
    if region_side <= 0:
        raise ValueError("region_side must be positive")
    proto = camera if camera is not None else Camera(Viewpoint(0, 0, 0, 0, 0))
    lo, hi = scene.aabb
    nx = max(1, int(math.ceil((hi[0] - lo[0]) / region_side)))
    ny = max(1, int(math.ceil((hi[1] - lo[1]) / region_side)))
    yaws = np.arange(N_REGION_DIRECTIONS) * (2.0 * math.pi / N_REGION_DIRECTIONS)
    bins = CategoricalBins(scene.k)

    centers, errors = [], []
    for j in range(ny):
        for i in range(nx):
            cx = min(lo[0] + (i + 0.5) * region_side, hi[0])
            cy = min(lo[1] + (j + 0.5) * region_side, hi[1])
            centers.append([float(cx), float(cy)])
            vps = np.array([[cx, cy, eye_height, a, 0.0] for a in yaws])
            pred, _ = net.forward(params, vps)
            gt = np.stack(
                [
                    histogram(
                        render(scene, Camera(Viewpoint.from_array(vp), proto.width,
                                             proto.height, proto.vfov_deg, proto.near, proto.far)),
                        bins,
                    )
                    for vp in vps
                ]
            )
            errors.append(np.abs(pred.astype(np.float64) - gt).mean(axis=0))
    errors = np.stack(errors)
    pct = {
        name: float(100.0 * np.mean(errors[:, c] < threshold))
        for c, name in enumerate(scene.class_names)
    }
    return RegionErrorReport(
        region_side=region_side,
        threshold=threshold,
        class_names=list(scene.class_names),
        centers=centers,
        errors=errors,
        pct_under=pct,
    )


MATERIAL_CLASSES = [
    ThematicClass(0, "sky", (135, 206, 235)),
    ThematicClass(1, "brick", (158, 74, 54)),
    ThematicClass(2, "glass", (110, 180, 210)),
    ThematicClass(3, "ground", (128, 128, 120)),
]


def make_material_scene(scene: Scene, brick_fraction: float, seed: int) -> Scene:
    """Relabel a city for the material protocol: every building becomes
    brick or glass (seeded, per building, matching the requested ratio
    in expectation); all other geometry becomes ground."""
    if not 0.0 <= brick_fraction <= 1.0:
        raise ValueError("brick_fraction must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    tri_class = np.full(len(scene.triangles), 3, dtype=np.int32)
    for b in scene.buildings:
        material = 1 if rng.random() < brick_fraction else 2
        tri_class[b.tri_start : b.tri_start + b.tri_count] = material
    return Scene(
        classes=list(MATERIAL_CLASSES),
        vertices=scene.vertices.copy(),
        triangles=scene.triangles.copy(),
        tri_class=tri_class,
        tri_value=None,
        buildings=list(scene.buildings),
    )
