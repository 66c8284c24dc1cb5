import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from nvf import net
from nvf.dataset import StreetLevelSampling, UniformSampling, build_dataset, sample_viewpoints
from nvf.field import Normalizer
from nvf.scene import generate_city
from nvf.train import TrainConfig, train


@pytest.fixture(scope="session")
def city():
    return generate_city(seed=7, grid=3)


@pytest.fixture(scope="session")
def dry_city():
    """Small city without water, for infeasible-target tests."""
    return generate_city(seed=11, grid=2, water_fraction=0.0, tree_density=0.5)


@pytest.fixture(scope="session")
def city_normalizer(city):
    return Normalizer.from_aabb(city.aabb)


@pytest.fixture(scope="session")
def city_dataset(city):
    vps = np.concatenate(
        [
            sample_viewpoints(city, UniformSampling(pitch_range_deg=(-40, 40)), 500, seed=5),
            sample_viewpoints(city, StreetLevelSampling(), 200, seed=6),
        ]
    )
    return build_dataset(city, vps)


@pytest.fixture(scope="session")
def city_model(city, city_normalizer, city_dataset):
    """A small but functioning field over the session city (short training)."""
    model = net.init(seed=0, k=city.k, normalizer=city_normalizer,
                     class_names=city.class_names)
    fitted, _ = train(city_dataset, TrainConfig(epochs=25, batch_size=128, seed=0), model)
    return fitted


@pytest.fixture(scope="session")
def dry_model(dry_city):
    """Quickly trained model over the waterless city."""
    normalizer = Normalizer.from_aabb(dry_city.aabb)
    vps = sample_viewpoints(dry_city, UniformSampling(pitch_range_deg=(-40, 40)), 400, seed=2)
    ds = build_dataset(dry_city, vps)
    model = net.init(seed=1, k=dry_city.k, normalizer=normalizer,
                     class_names=dry_city.class_names)
    fitted, _ = train(ds, TrainConfig(epochs=15, batch_size=128, seed=1), model)
    return fitted
