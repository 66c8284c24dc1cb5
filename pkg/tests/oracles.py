"""Independent reference implementations used to cross-check the library.

These deliberately avoid the code paths they verify: visibility is
computed by per-pixel ray casting (Moller-Trumbore) instead of
rasterization, eigenpairs come from the characteristic polynomial, and
nearest neighbors from an exhaustive scan.
"""

import math

import numpy as np


def raycast_class_image(scene, camera):
    """Per-pixel nearest-hit class ids, depths, and values by brute force.

    Semantics mirror the rasterizer's contract: closed-triangle hit
    test, forward depth strictly inside (near, far), ties to the lowest
    triangle index, sky (0) on miss.
    """
    from nvf.raster import camera_basis

    eye, forward, right, up = camera_basis(camera.viewpoint)
    w, h = camera.width, camera.height
    half_h = math.tan(math.radians(camera.vfov_deg) / 2.0)
    half_w = half_h * w / h

    sx = (2.0 * (np.arange(w) + 0.5) / w - 1.0) * half_w
    sy = (1.0 - 2.0 * (np.arange(h) + 0.5) / h) * half_h

    tri = scene.vertices[scene.triangles] if len(scene.triangles) else np.zeros((0, 3, 3))
    v0 = tri[:, 0]
    e1 = tri[:, 1] - v0
    e2 = tri[:, 2] - v0

    class_img = np.zeros((h, w), dtype=np.int32)
    depth_img = np.full((h, w), np.inf)
    value_img = np.full((h, w), np.nan) if scene.tri_value is not None else None

    for py in range(h):
        for px in range(w):
            d = forward + sx[px] * right + sy[py] * up  # unit forward component
            if len(tri) == 0:
                continue
            pvec = np.cross(d, e2)
            det = np.einsum("ij,ij->i", e1, pvec)
            ok = np.abs(det) > 1e-14
            inv = np.where(ok, 1.0 / np.where(ok, det, 1.0), 0.0)
            tvec = eye - v0
            u = np.einsum("ij,ij->i", tvec, pvec) * inv
            qvec = np.cross(tvec, e1)
            v = (qvec @ d) * inv
            t = np.einsum("ij,ij->i", e2, qvec) * inv
            hit = ok & (u >= 0) & (v >= 0) & (u + v <= 1) & (t > camera.near) & (t < camera.far)
            if not hit.any():
                continue
            idx = np.nonzero(hit)[0]
            best = idx[np.argmin(t[idx])]  # argmin keeps the first = lowest index
            class_img[py, px] = scene.tri_class[best]
            depth_img[py, px] = t[best]
            if value_img is not None:
                value_img[py, px] = scene.tri_value[best]
    return class_img, depth_img, value_img


def raycast_histogram(scene, camera, k):
    cls, _, _ = raycast_class_image(scene, camera)
    return np.bincount(cls.ravel(), minlength=k) / cls.size


def eig_symmetric_3x3_brute(C):
    """Eigenvalues/vectors of a symmetric 3x3 via its characteristic
    polynomial, sorted by descending eigenvalue."""
    c2 = -np.trace(C)
    c1 = (
        C[0, 0] * C[1, 1] + C[0, 0] * C[2, 2] + C[1, 1] * C[2, 2]
        - C[0, 1] ** 2 - C[0, 2] ** 2 - C[1, 2] ** 2
    )
    c0 = -np.linalg.det(C)
    roots = np.sort(np.roots([1.0, c2, c1, c0]).real)[::-1]
    vecs = []
    for lam in roots:
        a = C - lam * np.eye(3)
        # null vector from the two most independent rows
        crosses = [np.cross(a[i], a[j]) for i, j in ((0, 1), (0, 2), (1, 2))]
        v = max(crosses, key=lambda c: np.linalg.norm(c))
        n = np.linalg.norm(v)
        vecs.append(v / n if n > 0 else np.zeros(3))
    return roots, np.stack(vecs, axis=1)


def knn_scan(train_vps_norm, train_m, query_norm, k):
    """Exhaustive nearest-neighbor mean, ties by sample index."""
    d2 = ((train_vps_norm - query_norm) ** 2).sum(axis=1)
    order = np.argsort(d2, kind="stable")[:k]
    return train_m[order].mean(axis=0)


def central_difference(f, x, h):
    """Central finite-difference gradient of scalar f at x (per-axis h)."""
    x = np.asarray(x, dtype=np.float64)
    h = np.broadcast_to(np.asarray(h, dtype=np.float64), x.shape)
    g = np.zeros_like(x)
    for i in range(x.size):
        xp = x.copy()
        xm = x.copy()
        xp.flat[i] += h.flat[i]
        xm.flat[i] -= h.flat[i]
        g.flat[i] = (f(xp) - f(xm)) / (2.0 * h.flat[i])
    return g
