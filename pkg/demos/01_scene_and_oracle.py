"""Generate a synthetic city and inspect the ground-truth oracle.

The rasterizer is the source of truth for everything the field learns:
each viewpoint gets a class image, and the normalized bin counts of
that image are the thematic distribution. This script renders a few
street views, prints their distributions, and writes false-color
frames to demos/out/.
"""

from pathlib import Path

import numpy as np

from nvf import (
    Camera,
    CategoricalBins,
    Viewpoint,
    generate_city,
    histogram,
    render,
    render_falsecolor,
    save_scene,
)

out = Path(__file__).parent / "out"
out.mkdir(exist_ok=True)

city = generate_city(seed=7, grid=3, tree_density=0.25, water_fraction=0.1)
print(f"city: {len(city.triangles)} triangles, {len(city.buildings)} buildings")
print(f"extent: {city.aabb[1] - city.aabb[0]} m")
save_scene(city, out / "city.json")

# a pedestrian view down a street, an aerial view, and a mid-block view
views = {
    "street": Viewpoint(98.0, 16.0, 1.7, np.pi / 2, 0.05),
    "aerial": Viewpoint(140.0, 30.0, 120.0, 2.3, -0.6),
    "block": Viewpoint(140.0, 140.0, 1.7, np.pi / 4, 0.1),
}

bins = CategoricalBins(city.k)
for name, vp in views.items():
    img = render(city, Camera(vp, width=64, height=64))
    m = histogram(img, bins)
    pairs = ", ".join(f"{cls.name} {v:.2f}" for cls, v in zip(city.classes, m) if v > 0.01)
    print(f"{name:>7}: {pairs}")
    png = render_falsecolor(city, Camera(vp, width=512, height=512))
    (out / f"view_{name}.png").write_bytes(png)
    print(f"         wrote {out / f'view_{name}.png'}")
