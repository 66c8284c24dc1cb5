"""Direct queries: thematic distributions, perception metrics, and
facade visibility summaries from the trained field.

Run 02_train_field.py first; this loads its artifacts.
"""

import time
from pathlib import Path

import numpy as np

from nvf import (
    PerceptionMetric,
    direct_query,
    facade_summary,
    load_checkpoint,
    load_scene,
)

out = Path(__file__).parent / "out"
model = load_checkpoint(out / "model.nvf")
city = load_scene(out / "city_small.json")
names = list(model.meta.class_names)

# one query per street corner at eye height, looking north
lo, hi = model.meta.normalizer.lo, model.meta.normalizer.hi
xs = np.linspace(lo[0] + 10, hi[0] - 10, 5)
vps = np.array([[x, 40.0, 1.7, np.pi / 2, 0.0] for x in xs])
m = direct_query(model, vps)
print("predicted distributions along a west-east walk:")
for x, row in zip(xs, m):
    top = sorted(zip(names, row), key=lambda t: -t[1])[:3]
    print(f"  x={x:6.1f}: " + ", ".join(f"{n} {v:.2f}" for n, v in top))

# the walkability metric is an expression over the components
walkability = PerceptionMetric.compile(
    "walkability", "sidewalk / (sidewalk + road)", names
)
vals = direct_query(model, vps, walkability)
print("walkability along the walk:", np.round(vals, 3))

# facade summary: mean predicted visibility per wall patch
building = city.buildings[0]
t0 = time.perf_counter()
patches, means = facade_summary(model, city, building.id, patch_size=6.0,
                                per_patch_samples=5, seed=0)
dt = time.perf_counter() - t0
sky = means[:, names.index("sky")]
print(f"\nbuilding {building.id}: {len(patches)} patches x 5 samples "
      f"({len(patches) * 5} queries) in {dt:.2f}s")
print(f"sky visibility across patches: min {sky.min():.2f}, "
      f"mean {sky.mean():.2f}, max {sky.max():.2f}")
