"""Inverse queries: find viewpoints whose predicted distribution
satisfies a target, by gradient descent and by a random sweep.

Run 02_train_field.py first; this loads its artifacts.
"""

from pathlib import Path

import numpy as np

from nvf import (
    InverseConfig,
    Plane,
    inverse_gradient,
    inverse_sweep,
    load_checkpoint,
    parse_target,
)

out = Path(__file__).parent / "out"
model = load_checkpoint(out / "model.nvf")
names = list(model.meta.class_names)

# brushing "tree between 5 and 30%, sky between 30 and 60%" in the UI
# produces exactly this target string
target = parse_target("tree:0.05-0.3,sky:0.3-0.6", names)

print("gradient-based inverse query (32 restarts)...")
results = inverse_gradient(model, target, InverseConfig(seed=0))
best = results[0]
print(f"best: loss {best.loss:.5f} ({best.status}, {best.iterations} iters) at "
      f"({best.viewpoint.x:.1f}, {best.viewpoint.y:.1f}, {best.viewpoint.z:.1f}), "
      f"yaw {np.degrees(best.viewpoint.alpha):.0f} deg")
converged = sum(r.status == "converged" for r in results)
print(f"{converged}/32 restarts converged")

print("\nsweep-based inverse query (10,000 candidates)...")
cands = inverse_sweep(model, target, None, n=10_000, seed=0, q=5)
for c in cands:
    print(f"  loss {c.loss:.5f} at ({c.viewpoint.x:.1f}, {c.viewpoint.y:.1f}, {c.viewpoint.z:.1f})")
print(f"descent best {best.loss:.5f} vs sweep best {cands[0].loss:.5f}")

# constrain the search to an eye-height plane over the city
lo, hi = model.meta.normalizer.lo, model.meta.normalizer.hi
plane = Plane(np.array([lo[0], lo[1], 1.7]), np.array([1.0, 0, 0]), np.array([0, 1.0, 0]),
              float(hi[0] - lo[0]), float(hi[1] - lo[1]))
planar = inverse_gradient(model, target, InverseConfig(seed=1, region=plane, restarts=8))
print("\nplane-constrained results stay at z = 1.7:")
for r in planar[:3]:
    print(f"  loss {r.loss:.5f} at ({r.viewpoint.x:.1f}, {r.viewpoint.y:.1f}, {r.viewpoint.z:.3f})")
