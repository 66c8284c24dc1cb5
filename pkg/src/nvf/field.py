"""Input/output domain of the view field: viewpoints, normalization,
frequency features, and the unit-square parametrizations of spatial
subregions (planes, spheres, hemispheres)."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * math.pi

# number of sine/cosine pairs per scalar; feature width is 2 * N_FREQS
N_FREQS = 10
ENC_DIM = 2 * N_FREQS
POS_DIM = 3 * ENC_DIM
DIR_DIM = 2 * ENC_DIM

# frequencies pi * 2^j, j = 0..9
_FREQS = math.pi * (2.0 ** np.arange(N_FREQS))


def wrap_yaw(alpha: float) -> float:
    """Wrap a yaw angle into [0, 2*pi)."""
    a = math.fmod(alpha, TWO_PI)
    return a + TWO_PI if a < 0.0 else a


def clamp_pitch(gamma: float) -> float:
    """Clamp a pitch angle into [-pi/2, pi/2]."""
    return min(max(gamma, -math.pi / 2.0), math.pi / 2.0)


@dataclass(frozen=True)
class Viewpoint:
    """Position plus viewing direction (yaw, pitch); roll is ignored.

    Coordinates are meters in the world frame (x east, y north, z up),
    yaw in [0, 2*pi) measured from east, pitch in [-pi/2, pi/2].
    """

    x: float
    y: float
    z: float
    alpha: float
    gamma: float

    def __post_init__(self):
        object.__setattr__(self, "alpha", wrap_yaw(float(self.alpha)))
        object.__setattr__(self, "gamma", clamp_pitch(float(self.gamma)))

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z, self.alpha, self.gamma], dtype=np.float64)

    @staticmethod
    def from_array(v) -> "Viewpoint":
        x, y, z, a, g = (float(c) for c in v)
        return Viewpoint(x, y, z, a, g)

    def direction(self) -> np.ndarray:
        """Unit view direction (cos g cos a, cos g sin a, sin g)."""
        cg = math.cos(self.gamma)
        return np.array(
            [cg * math.cos(self.alpha), cg * math.sin(self.alpha), math.sin(self.gamma)]
        )


def direction_to_angles(d) -> tuple[float, float]:
    """Invert Viewpoint.direction for a (not necessarily unit) vector."""
    d = np.asarray(d, dtype=np.float64)
    n = np.linalg.norm(d)
    if n == 0.0:
        raise ValueError("zero direction vector")
    d = d / n
    return wrap_yaw(math.atan2(d[1], d[0])), math.asin(np.clip(d[2], -1.0, 1.0))


def check_distribution(m, k: int | None = None, tol: float = 1e-6) -> np.ndarray:
    """Validate a thematic distribution: non-negative, sums to 1 within tol."""
    m = np.asarray(m, dtype=np.float64)
    if k is not None and m.shape[-1] != k:
        raise ValueError(f"expected {k} components, got {m.shape[-1]}")
    if np.any(m < -tol):
        raise ValueError("distribution has negative components")
    s = m.sum(axis=-1)
    if np.any(np.abs(s - 1.0) > tol):
        raise ValueError("distribution does not sum to 1")
    return m


@dataclass(frozen=True)
class Normalizer:
    """Affine map of raw viewpoints onto the network input box.

    Positions map to [-1, 1]^3 from the scene bounding box, yaw via
    alpha/pi - 1, pitch via 2*gamma/pi.
    """

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=np.float64).reshape(3)
        hi = np.asarray(self.hi, dtype=np.float64).reshape(3)
        if np.any(hi <= lo):
            raise ValueError("bounding box must have positive extent on every axis")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @staticmethod
    def from_aabb(aabb) -> "Normalizer":
        aabb = np.asarray(aabb, dtype=np.float64)
        return Normalizer(aabb[0], aabb[1])

    def normalize(self, vps: np.ndarray) -> np.ndarray:
        """Raw (N, 5) viewpoints to normalized coordinates in [-1, 1]^5."""
        vps = np.asarray(vps, dtype=np.float64)
        out = np.empty_like(vps)
        out[..., :3] = 2.0 * (vps[..., :3] - self.lo) / (self.hi - self.lo) - 1.0
        out[..., 3] = vps[..., 3] / math.pi - 1.0
        out[..., 4] = 2.0 * vps[..., 4] / math.pi
        return out

    def denormalize(self, nvps: np.ndarray) -> np.ndarray:
        nvps = np.asarray(nvps, dtype=np.float64)
        out = np.empty_like(nvps)
        out[..., :3] = (nvps[..., :3] + 1.0) * 0.5 * (self.hi - self.lo) + self.lo
        out[..., 3] = (nvps[..., 3] + 1.0) * math.pi
        out[..., 4] = nvps[..., 4] * math.pi / 2.0
        return out

    def scale(self) -> np.ndarray:
        """d(normalized)/d(raw) for the 5 coordinates (diagonal Jacobian)."""
        return np.concatenate([2.0 / (self.hi - self.lo), [1.0 / math.pi, 2.0 / math.pi]])

    def clamp_normalized(self, nvps: np.ndarray) -> np.ndarray:
        """Project normalized coordinates back into the valid box.

        Positions and pitch clamp; yaw wraps (it is periodic).
        """
        out = np.array(nvps, dtype=np.float64)
        out[..., :3] = np.clip(out[..., :3], -1.0, 1.0)
        out[..., 3] = np.mod(out[..., 3] + 1.0, 2.0) - 1.0
        out[..., 4] = np.clip(out[..., 4], -1.0, 1.0)
        return out


def encode(t) -> np.ndarray:
    """Frequency features of a normalized scalar.

    Component 2j is sin(2^j pi t), component 2j+1 is cos(2^j pi t) for
    j = 0..9. The argument is reduced mod 2 first, which makes the
    2-periodicity exact in floating point.
    """
    t = np.asarray(t)
    tr = t - 2.0 * np.floor(t * 0.5)
    arg = tr[..., None] * _FREQS.astype(t.dtype if t.dtype.kind == "f" else np.float64)
    out = np.empty(arg.shape[:-1] + (ENC_DIM,), dtype=arg.dtype)
    out[..., 0::2] = np.sin(arg)
    out[..., 1::2] = np.cos(arg)
    return out


def encode_batch(normalizer: Normalizer, vps: np.ndarray, dtype=np.float32):
    """Encode raw (N, 5) viewpoints into position and direction features.

    Returns (N, 60) position features and (N, 40) direction features.
    """
    vps = np.asarray(vps, dtype=np.float64)
    if vps.ndim == 1:
        vps = vps[None, :]
    if not np.all(np.isfinite(vps)):
        bad = int(np.argwhere(~np.isfinite(vps).all(axis=1))[0, 0])
        raise ValueError(f"non-finite viewpoint at index {bad}")
    n = normalizer.normalize(vps).astype(dtype)
    feats = encode(n)  # (N, 5, 20)
    pos = feats[:, :3, :].reshape(-1, POS_DIM)
    dirs = feats[:, 3:, :].reshape(-1, DIR_DIM)
    return np.ascontiguousarray(pos), np.ascontiguousarray(dirs)


def encode_viewpoint(normalizer: Normalizer, vp: Viewpoint):
    """Single-viewpoint convenience wrapper around encode_batch."""
    pos, dirs = encode_batch(normalizer, vp.as_array()[None, :], dtype=np.float64)
    return pos[0], dirs[0]


def encode_gradient_factors(features: np.ndarray) -> np.ndarray:
    """d(feature)/d(normalized scalar) from the features themselves.

    For one encoded scalar, d sin(2^j pi t)/dt = 2^j pi cos(2^j pi t)
    and d cos(2^j pi t)/dt = -2^j pi sin(2^j pi t), so the derivative
    vector is a rearrangement of the feature vector scaled by 2^j pi.
    """
    f = np.asarray(features)
    out = np.empty_like(f)
    freqs = _FREQS.astype(f.dtype)
    out[..., 0::2] = f[..., 1::2] * freqs
    out[..., 1::2] = -f[..., 0::2] * freqs
    return out


@dataclass(frozen=True)
class Plane:
    """Bounded parallelogram region: zeta(a, b) = p + a*l*v1 + b*L*v2."""

    p: np.ndarray
    v1: np.ndarray
    v2: np.ndarray
    l: float
    L: float

    def __post_init__(self):
        p = np.asarray(self.p, dtype=np.float64).reshape(3)
        v1 = np.asarray(self.v1, dtype=np.float64).reshape(3)
        v2 = np.asarray(self.v2, dtype=np.float64).reshape(3)
        n1, n2 = np.linalg.norm(v1), np.linalg.norm(v2)
        if n1 == 0.0 or n2 == 0.0:
            raise ValueError("plane direction vectors must be non-zero")
        v1, v2 = v1 / n1, v2 / n2
        if np.linalg.norm(np.cross(v1, v2)) < 1e-9:
            raise ValueError("plane direction vectors must not be parallel")
        if self.l <= 0 or self.L <= 0:
            raise ValueError("plane side lengths must be positive")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "v1", v1)
        object.__setattr__(self, "v2", v2)

    def point(self, a, b) -> np.ndarray:
        a = np.clip(np.asarray(a, dtype=np.float64), 0.0, 1.0)
        b = np.clip(np.asarray(b, dtype=np.float64), 0.0, 1.0)
        return (
            self.p
            + a[..., None] * (self.l * self.v1)
            + b[..., None] * (self.L * self.v2)
        )

    def jacobian(self, a, b):
        """(d zeta/da, d zeta/db), constant for a parallelogram."""
        a = np.asarray(a, dtype=np.float64)
        shape = a.shape + (3,)
        return (
            np.broadcast_to(self.l * self.v1, shape),
            np.broadcast_to(self.L * self.v2, shape),
        )


@dataclass(frozen=True)
class Sphere:
    """Spherical region of center c and radius r.

    zeta(a, b) = c + r (cos(2 pi a) sin(pi b), sin(2 pi a) sin(pi b), cos(pi b))
    with (a, b) in the unit square.
    """

    c: np.ndarray
    r: float
    polar_span: float = math.pi

    def __post_init__(self):
        object.__setattr__(self, "c", np.asarray(self.c, dtype=np.float64).reshape(3))
        if self.r <= 0:
            raise ValueError("radius must be positive")

    def _angles(self, a, b):
        a = np.clip(np.asarray(a, dtype=np.float64), 0.0, 1.0)
        b = np.clip(np.asarray(b, dtype=np.float64), 0.0, 1.0)
        return TWO_PI * a, self.polar_span * b

    def point(self, a, b) -> np.ndarray:
        az, pol = self._angles(a, b)
        sp = np.sin(pol)
        return self.c + self.r * np.stack(
            [np.cos(az) * sp, np.sin(az) * sp, np.cos(pol)], axis=-1
        )

    def jacobian(self, a, b):
        az, pol = self._angles(a, b)
        sp, cp = np.sin(pol), np.cos(pol)
        da = self.r * TWO_PI * np.stack([-np.sin(az) * sp, np.cos(az) * sp, np.zeros_like(az)], axis=-1)
        db = self.r * self.polar_span * np.stack([np.cos(az) * cp, np.sin(az) * cp, -sp], axis=-1)
        return da, db


def hemisphere(c, r) -> Sphere:
    """Upper half of a sphere: polar angle spans [0, pi/2]."""
    return Sphere(c, r, polar_span=math.pi / 2.0)


Parametrization = Plane | Sphere


def param_point(region: Parametrization, a, b) -> np.ndarray:
    return region.point(a, b)
