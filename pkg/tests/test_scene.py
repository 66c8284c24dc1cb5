import json

import numpy as np
import pytest

from nvf.scene import (
    Building,
    DEFAULT_CLASSES,
    Scene,
    SceneFormatError,
    SceneValidationError,
    ThematicClass,
    facade_patches,
    generate_city,
    load_scene,
    save_scene,
)


class TestGenerateCity:
    def test_deterministic_byte_identical(self, tmp_path):
        a = generate_city(seed=7, grid=4, building_density=0.8)
        b = generate_city(seed=7, grid=4, building_density=0.8)
        assert a == b
        pa, pb = tmp_path / "a.json", tmp_path / "b.json"
        save_scene(a, pa)
        save_scene(b, pb)
        assert pa.read_bytes() == pb.read_bytes()

    def test_zero_densities_remove_classes(self):
        s = generate_city(seed=7, grid=3, tree_density=0.0, water_fraction=0.0)
        present = set(s.tri_class.tolist())
        assert s.class_index("tree") not in present
        assert s.class_index("water") not in present

    def test_different_seeds_differ(self):
        a = generate_city(seed=7, grid=4)
        b = generate_city(seed=8, grid=4)
        heights_a = sorted(bld.height for bld in a.buildings)
        heights_b = sorted(bld.height for bld in b.buildings)
        assert heights_a != heights_b

    def test_all_geometry_classes_present(self, city):
        present = set(city.tri_class.tolist())
        for c in DEFAULT_CLASSES[1:]:
            assert c.id in present, f"missing {c.name}"

    def test_building_boxes_closed_outward(self, city):
        tv = city.triangle_vertices()
        for b in city.buildings:
            tris = tv[b.tri_start : b.tri_start + b.tri_count]
            vol = np.einsum("ij,ij->i", tris[:, 0], np.cross(tris[:, 1], tris[:, 2])).sum() / 6.0
            assert vol > 0.0

    def test_rejects_bad_params(self):
        with pytest.raises(ValueError):
            generate_city(seed=1, grid=0)
        with pytest.raises(ValueError):
            generate_city(seed=1, block_size=-5)
        with pytest.raises(ValueError):
            generate_city(seed=1, building_density=1.5)

    def test_facade_normals_point_outward(self, city):
        for b in city.buildings:
            x0, y0, x1, y1 = b.footprint
            centroid = np.array([(x0 + x1) / 2, (y0 + y1) / 2, b.height / 2])
            for f in b.facades():
                mid = f.origin + 0.5 * f.e1 + 0.5 * f.e2
                assert np.dot(mid - centroid, f.normal) > 0
                assert np.linalg.norm(f.normal) == pytest.approx(1.0)
                assert f.normal[2] == 0.0


class TestSceneIO:
    def test_classes_only_round_trip(self, tmp_path):
        s = Scene(
            classes=list(DEFAULT_CLASSES),
            vertices=np.zeros((0, 3)),
            triangles=np.zeros((0, 3), dtype=np.int32),
            tri_class=np.zeros(0, dtype=np.int32),
        )
        p = tmp_path / "empty.json"
        save_scene(s, p)
        assert load_scene(p) == s

    def test_city_round_trips_byte_identically(self, city, tmp_path):
        p1, p2 = tmp_path / "c1.json", tmp_path / "c2.json"
        save_scene(city, p1)
        once = load_scene(p1)
        save_scene(once, p2)
        assert p1.read_bytes() == p2.read_bytes()
        assert load_scene(p2) == city

    def test_tri_value_round_trip(self, tmp_path):
        s = Scene(
            classes=list(DEFAULT_CLASSES),
            vertices=np.array([[0.0, 0, 0], [1, 0, 0], [0, 1, 0]]),
            triangles=np.array([[0, 1, 2]]),
            tri_class=np.array([1]),
            tri_value=np.array([3.25]),
        )
        p = tmp_path / "v.json"
        save_scene(s, p)
        assert load_scene(p) == s

    def test_out_of_range_class_rejected(self, tmp_path, city):
        p = tmp_path / "bad.json"
        save_scene(city, p)
        doc = json.loads(p.read_text())
        doc["tri_class"][0] = 99
        p.write_text(json.dumps(doc))
        with pytest.raises(SceneValidationError, match="99"):
            load_scene(p)

    def test_malformed_json_reports_line(self, tmp_path):
        p = tmp_path / "broken.json"
        p.write_text('{"version": 1,\n "classes": [}')
        with pytest.raises(SceneFormatError, match="line 2"):
            load_scene(p)

    def test_missing_field_reported(self, tmp_path):
        p = tmp_path / "missing.json"
        p.write_text('{"version": 1, "classes": []}')
        with pytest.raises(SceneFormatError, match="vertices"):
            load_scene(p)

    def test_wrong_version(self, tmp_path):
        p = tmp_path / "v2.json"
        p.write_text('{"version": 2}')
        with pytest.raises(SceneFormatError, match="version"):
            load_scene(p)


class TestSceneValidation:
    def test_sky_must_be_class_zero(self):
        with pytest.raises(SceneValidationError):
            Scene(
                classes=[ThematicClass(0, "building", (0, 0, 0))],
                vertices=np.zeros((0, 3)),
                triangles=np.zeros((0, 3), dtype=np.int32),
                tri_class=np.zeros(0, dtype=np.int32),
            )

    def test_geometry_never_sky(self):
        with pytest.raises(SceneValidationError):
            Scene(
                classes=list(DEFAULT_CLASSES),
                vertices=np.array([[0.0, 0, 0], [1, 0, 0], [0, 1, 0]]),
                triangles=np.array([[0, 1, 2]]),
                tri_class=np.array([0]),
            )

    def test_triangle_index_bounds(self):
        with pytest.raises(SceneValidationError):
            Scene(
                classes=list(DEFAULT_CLASSES),
                vertices=np.array([[0.0, 0, 0], [1, 0, 0], [0, 1, 0]]),
                triangles=np.array([[0, 1, 3]]),
                tri_class=np.array([1]),
            )

    def test_aabb_contains_vertices(self, city):
        assert np.all(city.vertices >= city.aabb[0] - 1e-12)
        assert np.all(city.vertices <= city.aabb[1] + 1e-12)


class TestFacadePatches:
    def test_paper_scale_building_has_1000_patches(self):
        # 100 x 100 footprint, height 1000, 20-unit patches:
        # each facade is 5 x 50 patches, four facades -> 1000
        b = Building(id=0, tri_start=0, tri_count=12, footprint=(0, 0, 100, 100), height=1000.0)
        patches = facade_patches(b, 20.0)
        assert len(patches) == 1000

    def test_patch_size_larger_than_facade(self):
        b = Building(id=0, tri_start=0, tri_count=12, footprint=(0, 0, 10, 10), height=8.0)
        patches = facade_patches(b, 50.0)
        assert len(patches) == 4
        for f, patch in zip(b.facades(), patches):
            assert np.allclose(patch.center, f.origin + 0.5 * f.e1 + 0.5 * f.e2)

    def test_10m_facade_3m_patches(self):
        b = Building(id=0, tri_start=0, tri_count=12, footprint=(0, 0, 10, 10), height=10.0)
        patches = facade_patches(b, 3.0)
        assert len(patches) == 4 * 16
        south = patches[:16]
        widths = sorted({round(float(np.linalg.norm(p.e1)), 9) for p in south})
        assert widths == [1.0, 3.0]

    def test_patches_tile_exactly(self):
        b = Building(id=0, tri_start=0, tri_count=12, footprint=(2, 3, 15, 11), height=17.0)
        patches = facade_patches(b, 4.0)
        per_facade_area = {}
        for patch in patches:
            key = tuple(patch.normal)
            a = np.linalg.norm(patch.e1) * np.linalg.norm(patch.e2)
            per_facade_area[key] = per_facade_area.get(key, 0.0) + a
        for f in b.facades():
            assert per_facade_area[tuple(f.normal)] == pytest.approx(f.area)

    def test_patches_do_not_overlap(self):
        b = Building(id=0, tri_start=0, tri_count=12, footprint=(0, 0, 10, 10), height=9.0)
        patches = facade_patches(b, 3.0)
        south = [p for p in patches if np.allclose(p.normal, [0, -1, 0])]
        boxes = []
        for p in south:
            u0 = p.origin[0]
            v0 = p.origin[2]
            boxes.append((u0, u0 + np.linalg.norm(p.e1), v0, v0 + np.linalg.norm(p.e2)))
        for i in range(len(boxes)):
            for j in range(i + 1, len(boxes)):
                a, b_ = boxes[i], boxes[j]
                overlap = max(0, min(a[1], b_[1]) - max(a[0], b_[0])) * max(
                    0, min(a[3], b_[3]) - max(a[2], b_[2])
                )
                assert overlap == pytest.approx(0.0, abs=1e-12)

    def test_rejects_bad_patch_size(self):
        b = Building(id=0, tri_start=0, tri_count=12, footprint=(0, 0, 10, 10), height=9.0)
        with pytest.raises(ValueError):
            facade_patches(b, 0.0)

    def test_centers_on_facade_plane(self, city):
        for b in city.buildings[:3]:
            for patch in facade_patches(b, 5.0):
                # center minus origin has no normal component
                assert abs(np.dot(patch.center - patch.origin, patch.normal)) < 1e-9
