import math
import time

import numpy as np
import pytest

from nvf.field import Viewpoint
from nvf.raster import (
    Camera,
    CategoricalBins,
    ScalarBins,
    camera_basis,
    histogram,
    render,
    render_falsecolor,
)
from nvf.scene import Scene, ThematicClass

from oracles import raycast_class_image

SIMPLE_CLASSES = [
    ThematicClass(0, "sky", (135, 206, 235)),
    ThematicClass(1, "building", (170, 170, 178)),
    ThematicClass(2, "water", (52, 120, 199)),
    ThematicClass(3, "road", (70, 70, 70)),
]


def quad_scene(quads):
    """Scene from a list of (4 corners, class id) quads."""
    vertices, triangles, tri_class = [], [], []
    for corners, cls in quads:
        base = len(vertices)
        vertices.extend(corners)
        triangles += [[base, base + 1, base + 2], [base, base + 2, base + 3]]
        tri_class += [cls, cls]
    return Scene(
        classes=SIMPLE_CLASSES,
        vertices=np.array(vertices, dtype=np.float64),
        triangles=np.array(triangles, dtype=np.int32),
        tri_class=np.array(tri_class, dtype=np.int32),
    )


def empty_scene():
    return Scene(
        classes=SIMPLE_CLASSES,
        vertices=np.zeros((0, 3)),
        triangles=np.zeros((0, 3), dtype=np.int32),
        tri_class=np.zeros(0, dtype=np.int32),
    )


def wall(x, y0, y1, z0, z1):
    return [[x, y0, z0], [x, y1, z0], [x, y1, z1], [x, y0, z1]]


CAM = Camera(Viewpoint(0, 0, 0, 0.0, 0.0), width=32, height=32, near=0.1, far=1000.0)


class TestRender:
    def test_empty_scene_all_sky(self):
        img = render(empty_scene(), CAM)
        assert np.all(img.class_id == 0)
        assert np.all(np.isinf(img.depth))

    def test_fullscreen_quad_single_class(self):
        s = quad_scene([(wall(10.0, -50, 50, -50, 50), 1)])
        img = render(s, CAM)
        assert np.all(img.class_id == 1)
        assert np.allclose(img.depth.min(), 10.0, atol=1e-9)

    def test_partial_occlusion_matches_oracle(self):
        # near quad half-occludes the far one; far class visible only
        # outside the near quad's screen extent
        s = quad_scene(
            [
                (wall(20.0, -30, 30, -30, 30), 2),  # far, fills the frame
                (wall(10.0, -15, 0.0, -15, 15), 1),  # near, covers one side
            ]
        )
        cam = Camera(Viewpoint(0, 0, 0, 0.0, 0.0), width=16, height=16, near=0.1, far=1000.0)
        img = render(s, cam)
        oracle_cls, oracle_depth, _ = raycast_class_image(s, cam)
        assert np.array_equal(img.class_id, oracle_cls)
        assert {1, 2} <= set(img.class_id.ravel().tolist())
        finite = np.isfinite(oracle_depth)
        assert np.allclose(img.depth[finite], oracle_depth[finite], rtol=1e-9)

    def test_matches_oracle_on_random_scenes(self):
        rng = np.random.default_rng(123)
        for _ in range(25):
            ntri = int(rng.integers(1, 25))
            verts = rng.uniform(-8, 8, size=(ntri * 3, 3))
            tris = np.arange(ntri * 3).reshape(-1, 3)
            cls = rng.integers(1, 4, size=ntri)
            s = Scene(classes=SIMPLE_CLASSES, vertices=verts, triangles=tris, tri_class=cls)
            vp = Viewpoint(*rng.uniform(-10, 10, 3), rng.uniform(0, 2 * math.pi), rng.uniform(-1.3, 1.3))
            cam = Camera(vp, width=int(rng.integers(4, 33)), height=int(rng.integers(4, 33)),
                         vfov_deg=float(rng.uniform(30, 110)), near=0.1, far=200.0)
            ocls, _, _ = raycast_class_image(s, cam)
            assert np.array_equal(render(s, cam).class_id, ocls)

    def test_near_plane_clipping_matches_oracle(self, city):
        # camera inside the city close to geometry: the ground plane
        # always crosses the near plane
        cam = Camera(Viewpoint(100.0, 100.0, 1.7, 0.8, -0.3), width=24, height=24)
        ocls, _, _ = raycast_class_image(city, cam)
        assert np.array_equal(render(city, cam).class_id, ocls)

    def test_depth_finite_where_not_sky(self, city):
        cam = Camera(Viewpoint(50, 50, 30, 1.0, -0.4), width=32, height=32)
        img = render(city, cam)
        hit = img.class_id != 0
        assert np.all(np.isfinite(img.depth[hit]))
        assert np.all(np.isinf(img.depth[~hit]))

    def test_gimbal_pitch_rejected(self):
        with pytest.raises(ValueError, match="degenerate"):
            camera_basis(Viewpoint(0, 0, 0, 0.0, math.pi / 2))

    def test_camera_validation(self):
        vp = Viewpoint(0, 0, 0, 0, 0)
        with pytest.raises(ValueError):
            Camera(vp, vfov_deg=0.0)
        with pytest.raises(ValueError):
            Camera(vp, width=0)
        with pytest.raises(ValueError):
            Camera(vp, near=2.0, far=1.0)


class TestHistogram:
    def test_all_sky_one_hot(self):
        img = render(empty_scene(), Camera(Viewpoint(0, 0, 0, 0, 0), width=8, height=8))
        m = histogram(img, CategoricalBins(7))
        assert np.array_equal(m, np.array([1, 0, 0, 0, 0, 0, 0.0]))

    def test_half_frame_quad_is_half(self):
        # quad on the left half of the screen exactly: camera looks +x,
        # screen-left is +y, quad spans y in [0, 60] at x = 10
        s = quad_scene([([[10.0, 0, -30], [10, 60, -30], [10, 60, 30], [10, 0, 30]], 1)])
        cam = Camera(Viewpoint(0, 0, 0, 0.0, 0.0), width=64, height=64, near=0.1, far=100.0)
        img = render(s, cam)
        m = histogram(img, CategoricalBins(4))
        oracle_cls, _, _ = raycast_class_image(s, cam)
        counts = np.bincount(oracle_cls.ravel(), minlength=4)
        assert np.array_equal(m, counts / counts.sum())
        assert m[1] == pytest.approx(0.5)
        assert m[0] == pytest.approx(0.5)

    def test_scalar_bins_sunlight_example(self):
        # surface with uniform thematic value 3.0 filling the frame,
        # hour bins 0-2 / 2-5 / 5+ -> all weight in the middle bin
        s = quad_scene([(wall(10.0, -50, 50, -50, 50), 1)])
        s = Scene(
            classes=s.classes, vertices=s.vertices, triangles=s.triangles,
            tri_class=s.tri_class, tri_value=np.array([3.0, 3.0]),
        )
        img = render(s, Camera(Viewpoint(0, 0, 0, 0, 0), width=16, height=16))
        m = histogram(img, ScalarBins((0.0, 2.0, 5.0, math.inf)))
        assert np.array_equal(m[1:], [0.0, 1.0, 0.0])
        assert m[0] == 0.0

    def test_scalar_values_clamp_to_edge_bins(self):
        s = quad_scene([(wall(10.0, -50, 50, -50, 50), 1)])
        for value, expect_bin in ((-3.0, 1), (99.0, 3)):
            sv = Scene(
                classes=s.classes, vertices=s.vertices, triangles=s.triangles,
                tri_class=s.tri_class, tri_value=np.array([value, value]),
            )
            img = render(sv, Camera(Viewpoint(0, 0, 0, 0, 0), width=8, height=8))
            m = histogram(img, ScalarBins((0.0, 2.0, 5.0, 8.0)))
            assert m[expect_bin] == 1.0

    def test_scalar_bins_need_value_channel(self):
        img = render(empty_scene(), Camera(Viewpoint(0, 0, 0, 0, 0), width=8, height=8))
        with pytest.raises(ValueError, match="value channel"):
            histogram(img, ScalarBins((0.0, 1.0)))

    def test_sums_to_one(self, city):
        rng = np.random.default_rng(5)
        for _ in range(20):
            vp = Viewpoint(*rng.uniform(10, 200, 3), rng.uniform(0, 6.28), rng.uniform(-1.2, 1.2))
            img = render(city, Camera(vp, width=32, height=32))
            m = histogram(img, CategoricalBins(city.k))
            assert abs(m.sum() - 1.0) < 1e-9
            assert np.all(m >= 0)

    def test_permutation_equivariance(self, city):
        cam = Camera(Viewpoint(60, 60, 10, 0.7, -0.2), width=24, height=24)
        m = histogram(render(city, cam), CategoricalBins(city.k))
        # relabel geometry classes by a permutation fixing sky
        perm = np.array([0, 3, 1, 2, 6, 5, 4])
        relabeled = Scene(
            classes=[ThematicClass(i, city.classes[int(np.argwhere(perm == i)[0, 0])].name, (0, 0, 0))
                     for i in range(city.k)],
            vertices=city.vertices,
            triangles=city.triangles,
            tri_class=perm[city.tri_class],
            buildings=city.buildings,
        )
        m2 = histogram(render(relabeled, cam), CategoricalBins(city.k))
        expected = np.zeros_like(m)
        for old, new in enumerate(perm):
            expected[new] = m[old]
        assert np.array_equal(m2, expected)

    def test_bin_edges_must_increase(self):
        with pytest.raises(ValueError):
            ScalarBins((1.0, 1.0, 2.0))


class TestFalseColor:
    def test_sky_frame_solid_color(self):
        png = render_falsecolor(empty_scene(), Camera(Viewpoint(0, 0, 0, 0, 0), width=8, height=8))
        from PIL import Image
        import io

        img = np.asarray(Image.open(io.BytesIO(png)))
        assert img.shape == (8, 8, 3)
        assert np.all(img == np.array(SIMPLE_CLASSES[0].color))

    def test_deterministic_bytes(self, city):
        cam = Camera(Viewpoint(80, 80, 20, 1.1, -0.3), width=48, height=48)
        assert render_falsecolor(city, cam) == render_falsecolor(city, cam)

    def test_city_render_under_100ms(self, city):
        cam = Camera(Viewpoint(100, 100, 25, 0.9, -0.2), width=256, height=256)
        render(city, cam)  # warm the jit
        t0 = time.perf_counter()
        render_falsecolor(city, cam)
        assert time.perf_counter() - t0 < 0.1
