"""Train the view field on street-level samples and compare it with
nearest-neighbor interpolation.

Produces demos/out/model.nvf and demos/out/views.csv, which the later
demos reuse. Scaled down (grid-2 city, 5,000 views) so it finishes in
about two minutes; the acceptance suite runs the full protocol.
"""

from pathlib import Path

import numpy as np

from nvf import (
    KnnModel,
    Normalizer,
    StreetLevelSampling,
    TrainConfig,
    build_dataset,
    generate_city,
    init,
    sample_viewpoints,
    save_checkpoint,
    save_scene,
    save_views_csv,
    split,
    train,
)

out = Path(__file__).parent / "out"
out.mkdir(exist_ok=True)

city = generate_city(seed=7, grid=2, tree_density=0.25, water_fraction=0.15)
save_scene(city, out / "city_small.json")

print("sampling 5,000 street-level viewpoints and rendering ground truth...")
vps = sample_viewpoints(city, StreetLevelSampling(), 5000, seed=3)
dataset = build_dataset(city, vps)
save_views_csv(dataset, out / "views.csv")
train_set, test_set = split(dataset, 0.2, seed=1)

normalizer = Normalizer.from_aabb(city.aabb)
model = init(seed=0, k=city.k, normalizer=normalizer, class_names=city.class_names,
             provenance={"demo": "02_train_field"})

config = TrainConfig(epochs=100, batch_size=128, seed=0, freq_ramp_epochs=100)
print(f"training {config.epochs} epochs on {len(train_set)} samples...")
fitted, report = train(train_set, config, model, test_dataset=test_set, log_every=20)

print(f"final train loss {report.epoch_losses[-1]:.5f}, "
      f"test RMSE {report.final_test_rmse:.4f} in {report.wall_time_s:.0f}s")

knn = KnnModel(train_set, normalizer)
for k in (2, 5):
    pred = knn.predict(test_set.viewpoints, k)
    rmse = float(np.sqrt(np.mean((pred - test_set.m) ** 2)))
    print(f"{k}-NN baseline RMSE {rmse:.4f}")

save_checkpoint(fitted, out / "model.nvf")
print(f"saved {out / 'model.nvf'} ({(out / 'model.nvf').stat().st_size / 1e6:.2f} MB)")
