"""Project the field's 128-dimensional latent codes to 2D and plot the
map that the browser UI shows: test views in purple, inverse-query
results in green.

Run 02_train_field.py first; this loads its artifacts.
"""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from nvf import (
    InverseConfig,
    inverse_gradient,
    latent_codes,
    load_checkpoint,
    load_views_csv,
    parse_target,
)
from nvf.analysis import principal_axes_2d

out = Path(__file__).parent / "out"
model = load_checkpoint(out / "model.nvf")
dataset = load_views_csv(out / "views.csv")
names = list(model.meta.class_names)

lat = latent_codes(model, dataset.viewpoints)
axes = principal_axes_2d(lat)
coords = (lat - lat.mean(axis=0)) @ axes
print(f"projected {len(coords)} latent codes; "
      f"axis variances {coords.var(axis=0).round(4)}")

target = parse_target("sky:0.3-0.6", names)
results = inverse_gradient(model, target, InverseConfig(seed=0, restarts=16, max_iters=200))
green_lat = latent_codes(model, np.stack([r.viewpoint.as_array() for r in results]))
green = (green_lat - lat.mean(axis=0)) @ axes

fig, ax = plt.subplots(figsize=(7, 6))
sky = dataset.m[:, 0]
sc = ax.scatter(coords[:, 0], coords[:, 1], c=sky, s=8, alpha=0.35, cmap="viridis")
ax.scatter(green[:, 0], green[:, 1], c="limegreen", s=60, edgecolors="black",
           label="inverse-query results")
fig.colorbar(sc, label="sky fraction (ground truth)")
ax.set_title("latent map: second-to-last layer, top-2 principal axes")
ax.legend()
fig.tight_layout()
fig.savefig(out / "latent_map.png", dpi=130)
print(f"wrote {out / 'latent_map.png'}")
