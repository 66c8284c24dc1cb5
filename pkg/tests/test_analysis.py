import numpy as np
import pytest

from nvf import net
from nvf.analysis import (
    KnnModel,
    compare_models,
    knn_predict,
    latent_codes,
    make_material_scene,
    principal_axes_2d,
    project_2d,
    region_error,
)
from nvf.dataset import Dataset
from nvf.field import Normalizer
from nvf.scene import Scene
from nvf.train import TrainConfig

from oracles import eig_symmetric_3x3_brute, knn_scan


class TestLatentCodes:
    def test_shape_and_range(self, city_model):
        rng = np.random.default_rng(0)
        vps = np.column_stack([rng.uniform(10, 200, (20, 2)), rng.uniform(2, 40, 20),
                               rng.uniform(0, 6.28, 20), rng.uniform(-1, 1, 20)])
        lat = latent_codes(city_model, vps)
        assert lat.shape == (20, 128)
        assert np.all(lat > -1) and np.all(lat < 1)

    def test_identical_viewpoints_identical_latents(self, city_model):
        vps = np.tile(np.array([[50.0, 60.0, 5.0, 1.0, 0.1]]), (2, 1))
        lat = latent_codes(city_model, vps)
        assert np.array_equal(lat[0], lat[1])

    def test_order_preserved(self, city_model):
        rng = np.random.default_rng(1)
        vps = np.column_stack([rng.uniform(10, 200, (6, 2)), rng.uniform(2, 40, 6),
                               rng.uniform(0, 6.28, 6), rng.uniform(-1, 1, 6)])
        lat = latent_codes(city_model, vps)
        flipped = latent_codes(city_model, vps[::-1])
        assert np.allclose(lat, flipped[::-1], rtol=1e-5, atol=1e-7)


class TestProject2d:
    def test_rank_one_data_collapses_second_axis(self):
        rng = np.random.default_rng(2)
        direction = rng.standard_normal(128)
        direction /= np.linalg.norm(direction)
        data = rng.standard_normal((60, 1)) * direction
        coords = project_2d(data)
        assert coords[:, 1].var() < 1e-9

    def test_axes_orthonormal(self):
        rng = np.random.default_rng(3)
        data = rng.standard_normal((100, 16))
        axes = principal_axes_2d(data)
        assert abs(axes[:, 0] @ axes[:, 1]) < 1e-8
        assert np.linalg.norm(axes[:, 0]) == pytest.approx(1.0, abs=1e-8)
        assert np.linalg.norm(axes[:, 1]) == pytest.approx(1.0, abs=1e-8)

    def test_matches_characteristic_polynomial_oracle(self):
        rng = np.random.default_rng(4)
        data = rng.standard_normal((10, 3)) @ np.diag([3.0, 1.5, 0.2])
        xc = data - data.mean(axis=0)
        cov = xc.T @ xc / (len(data) - 1)
        roots, vecs = eig_symmetric_3x3_brute(cov)
        axes = principal_axes_2d(data)
        for i in range(2):
            dot = abs(np.dot(axes[:, i], vecs[:, i]))
            assert dot == pytest.approx(1.0, abs=1e-6)

    def test_translation_invariance(self):
        rng = np.random.default_rng(5)
        data = rng.standard_normal((50, 8))
        shifted = data + 37.5
        assert np.allclose(project_2d(data), project_2d(shifted), atol=1e-9)

    def test_zero_variance_projects_to_origin(self):
        data = np.ones((10, 8)) * 4.2
        assert np.array_equal(project_2d(data), np.zeros((10, 2)))

    def test_axis_pair_passthrough(self):
        rng = np.random.default_rng(6)
        data = rng.standard_normal((20, 5))
        coords = project_2d(data, method=("axes", 1, 3))
        assert np.array_equal(coords, data[:, [1, 3]])

    def test_needs_two_points(self):
        with pytest.raises(ValueError):
            project_2d(np.ones((1, 4)))


def _norm():
    return Normalizer(np.zeros(3), np.array([10.0, 10.0, 10.0]))


def random_dataset(n, seed=0, k=4):
    rng = np.random.default_rng(seed)
    vps = np.column_stack([rng.uniform(0, 10, (n, 3)), rng.uniform(0, 6.28, n),
                           rng.uniform(-1.5, 1.5, n)])
    return Dataset(vps, rng.dirichlet(np.ones(k), size=n))


class TestKnn:
    def test_query_at_training_point(self):
        ds = random_dataset(50)
        pred = knn_predict(ds, _norm(), ds.viewpoints[17], 1)
        assert np.array_equal(pred, ds.m[17])

    def test_two_equidistant_average(self):
        vps = np.array([[1.0, 0, 0, 0, 0], [-1.0, 0, 0, 0, 0], [8.0, 8, 8, 0, 0]])
        m = np.array([[1.0, 0], [0, 1.0], [0.5, 0.5]])
        ds = Dataset(vps, m)
        pred = knn_predict(ds, _norm(), np.array([0.0, 0, 0, 0, 0]), 2)
        assert np.allclose(pred, [0.5, 0.5])

    def test_matches_exhaustive_scan(self):
        ds = random_dataset(500, seed=7)
        norm = _norm()
        model = KnnModel(ds, norm)
        rng = np.random.default_rng(8)
        queries = np.column_stack([rng.uniform(0, 10, (25, 3)), rng.uniform(0, 6.28, 25),
                                   rng.uniform(-1.5, 1.5, 25)])
        for k in (1, 5, 20):
            got = model.predict(queries, k)
            for i, q in enumerate(queries):
                expected = knn_scan(norm.normalize(ds.viewpoints), ds.m,
                                    norm.normalize(q[None])[0], k)
                assert np.allclose(got[i], expected, atol=1e-12)

    def test_outputs_on_simplex(self):
        ds = random_dataset(100, seed=9)
        model = KnnModel(ds, _norm())
        pred = model.predict(random_dataset(10, seed=10).viewpoints, 7)
        assert np.all(pred >= 0)
        assert np.allclose(pred.sum(axis=1), 1.0, atol=1e-9)

    def test_k_bounds(self):
        ds = random_dataset(10)
        model = KnnModel(ds, _norm())
        with pytest.raises(ValueError):
            model.predict(ds.viewpoints[:1], 11)


def make_enclosure(cls_id=1, k_classes=None):
    """A closed box around the origin; inside, every ray hits class cls_id."""
    from nvf.scene import ThematicClass

    classes = k_classes or [
        ThematicClass(0, "sky", (0, 0, 0)),
        ThematicClass(1, "brick", (200, 80, 60)),
        ThematicClass(2, "glass", (90, 160, 220)),
        ThematicClass(3, "ground", (120, 120, 120)),
    ]
    from nvf.scene import _MeshBuilder

    mesh = _MeshBuilder()
    mesh.add_box(-200, -200, 200, 200, -1.0, 400.0, cls_id)
    return Scene(
        classes=classes,
        vertices=np.array(mesh.vertices),
        triangles=np.array(mesh.triangles, dtype=np.int32),
        tri_class=np.array(mesh.tri_class, dtype=np.int32),
    )


class TestRegionError:
    def test_uniform_model_on_single_class_enclosure(self):
        scene = make_enclosure(cls_id=1)
        norm = Normalizer.from_aabb(scene.aabb)
        model = net.init(seed=0, k=4, normalizer=norm, class_names=scene.class_names)
        for w in model.weights:
            w[:] = 0  # uniform 1/k output everywhere
        report = region_error(scene, model, region_side=150.0, threshold=0.10)
        errors = report.errors
        # ground truth is pure brick from every direction
        assert np.allclose(errors[:, 1], abs(1 - 0.25), atol=1e-9)
        assert np.allclose(errors[:, 0], 0.25, atol=1e-9)
        assert report.pct_under["brick"] == 0.0

    def test_perfect_oracle_model_scores_100(self, city, city_model, monkeypatch):
        # replaying the rasterized ground truth is exact by construction
        from nvf import analysis

        def fake_forward(params, vps):
            from nvf.field import Viewpoint
            from nvf.raster import Camera, CategoricalBins, histogram, render

            out = np.stack(
                [
                    histogram(render(city, Camera(Viewpoint.from_array(v))), CategoricalBins(city.k))
                    for v in np.atleast_2d(vps)
                ]
            )
            return out, np.zeros((len(out), 128))

        monkeypatch.setattr(analysis.net, "forward", fake_forward)
        report = region_error(city, city_model, region_side=120.0, threshold=0.10)
        assert all(v == 100.0 for v in report.pct_under.values())

    def test_threshold_one_reports_100(self, city, city_model):
        report = region_error(city, city_model, region_side=150.0, threshold=1.0)
        assert all(v == 100.0 for v in report.pct_under.values())

    def test_region_grid_covers_footprint(self, city, city_model):
        report = region_error(city, city_model, region_side=100.0, threshold=0.1)
        lo, hi = city.aabb
        nx = int(np.ceil((hi[0] - lo[0]) / 100.0))
        ny = int(np.ceil((hi[1] - lo[1]) / 100.0))
        assert len(report.centers) == nx * ny

    def test_rejects_bad_region_side(self, city, city_model):
        with pytest.raises(ValueError):
            region_error(city, city_model, region_side=0.0)


class TestMaterialScene:
    def test_relabel_structure(self, city):
        mat = make_material_scene(city, 0.8, seed=3)
        assert mat.class_names == ["sky", "brick", "glass", "ground"]
        building_tris = np.zeros(len(mat.triangles), dtype=bool)
        for b in mat.buildings:
            building_tris[b.tri_start : b.tri_start + b.tri_count] = True
        assert set(mat.tri_class[building_tris]) <= {1, 2}
        assert set(mat.tri_class[~building_tris]) == {3}

    def test_deterministic_and_seed_sensitive(self, city):
        a = make_material_scene(city, 0.8, seed=3)
        b = make_material_scene(city, 0.8, seed=3)
        c = make_material_scene(city, 0.8, seed=4)
        assert np.array_equal(a.tri_class, b.tri_class)
        assert not np.array_equal(a.tri_class, c.tri_class)

    def test_ratio_roughly_respected(self):
        from nvf.scene import generate_city

        big = generate_city(seed=1, grid=5, building_density=0.9, tree_density=0.0)
        mat = make_material_scene(big, 0.8, seed=0)
        per_building = [mat.tri_class[b.tri_start] for b in mat.buildings]
        frac = np.mean(np.array(per_building) == 1)
        assert 0.65 < frac < 0.95

    def test_assignment_is_per_building(self, city):
        mat = make_material_scene(city, 0.5, seed=5)
        for b in mat.buildings:
            cls = mat.tri_class[b.tri_start : b.tri_start + b.tri_count]
            assert len(set(cls.tolist())) == 1


class TestCompareModels:
    def test_single_fraction_structure(self, city_dataset, city_normalizer):
        from nvf.dataset import split

        tr, te = split(city_dataset, 0.3, seed=0)
        report = compare_models(tr, te, city_normalizer, [1.0], [2, 5],
                                TrainConfig(epochs=2, batch_size=128, seed=0))
        assert report.fractions == [1.0]
        assert set(report.rmse) == {"2-neighbors", "5-neighbors", "neural field"}
        assert all(len(v) == 1 for v in report.rmse.values())
        assert report.sizes == [len(tr)]
        assert "neural field" in report.table()

    def test_nested_sizes_increase(self, city_dataset, city_normalizer):
        from nvf.dataset import split

        tr, te = split(city_dataset, 0.3, seed=0)
        report = compare_models(tr, te, city_normalizer, [0.2, 0.5], [2],
                                TrainConfig(epochs=1, batch_size=128, seed=0))
        assert report.sizes[0] < report.sizes[1]
