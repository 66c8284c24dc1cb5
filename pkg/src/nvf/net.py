"""The learned view field: a fully-connected network evaluated and
differentiated in plain numpy.

Architecture: position features (60) pass through 10 rectified layers
of width 256 with the raw features concatenated back onto the sixth
layer's input; the trunk output joins the direction features (40) in a
128-wide hyperbolic-tangent layer, and a final linear map with
exponential normalization produces a distribution over the k bins.
Parameters and inference run in float32; building a float64 copy via
ModelParams.astype gives a shadow path for gradient verification.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .field import (
    DIR_DIM,
    POS_DIM,
    Normalizer,
    Viewpoint,
    encode_batch,
    encode_gradient_factors,
)
from .raster import BinSpec, CategoricalBins, bins_from_json

TRUNK_LAYERS = 10
TRUNK_WIDTH = 256
SKIP_LAYER = 5  # sixth layer, 0-indexed: input is trunk activations + raw features
HEAD_WIDTH = 128

MAGIC = b"NVF1"


def layer_shapes(k: int) -> list[tuple[int, int]]:
    shapes = []
    for i in range(TRUNK_LAYERS):
        w_in = POS_DIM if i == 0 else TRUNK_WIDTH
        if i == SKIP_LAYER:
            w_in = TRUNK_WIDTH + POS_DIM
        shapes.append((w_in, TRUNK_WIDTH))
    shapes.append((TRUNK_WIDTH + DIR_DIM, HEAD_WIDTH))
    shapes.append((HEAD_WIDTH, k))
    return shapes


@dataclass(frozen=True)
class ModelMeta:
    k: int
    class_names: tuple[str, ...]
    bins: BinSpec
    normalizer: Normalizer
    n_freqs: int = 10
    provenance: dict = field(default_factory=dict)


@dataclass
class ModelParams:
    weights: list[np.ndarray]  # 12 matrices, each (fan_in, fan_out)
    biases: list[np.ndarray]
    meta: ModelMeta

    @property
    def k(self) -> int:
        return self.meta.k

    @property
    def dtype(self):
        return self.weights[0].dtype

    def n_params(self) -> int:
        return sum(w.size for w in self.weights) + sum(b.size for b in self.biases)

    def astype(self, dtype) -> "ModelParams":
        return ModelParams(
            [w.astype(dtype) for w in self.weights],
            [b.astype(dtype) for b in self.biases],
            self.meta,
        )

    def copy(self) -> "ModelParams":
        return ModelParams([w.copy() for w in self.weights], [b.copy() for b in self.biases], self.meta)


def init(seed: int, k: int, normalizer: Normalizer, class_names=None,
         bins: BinSpec | None = None, provenance: dict | None = None,
         dtype=np.float32) -> ModelParams:
    """Seeded uniform initialization, +-sqrt(6 / (fan_in + fan_out)), zero biases."""
    if k < 2:
        raise ValueError("k must be at least 2")
    if class_names is None:
        class_names = tuple(f"m{i}" for i in range(k))
    class_names = tuple(class_names)
    if len(class_names) != k:
        raise ValueError("class_names length must equal k")
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for w_in, w_out in layer_shapes(k):
        bound = np.sqrt(6.0 / (w_in + w_out))
        weights.append(rng.uniform(-bound, bound, size=(w_in, w_out)).astype(dtype))
        biases.append(np.zeros(w_out, dtype=dtype))
    meta = ModelMeta(
        k=k,
        class_names=class_names,
        bins=bins if bins is not None else CategoricalBins(k),
        normalizer=normalizer,
        provenance=dict(provenance or {}),
    )
    return ModelParams(weights, biases, meta)


def _as_batch(vps) -> np.ndarray:
    if isinstance(vps, Viewpoint):
        vps = vps.as_array()[None, :]
    vps = np.asarray(vps, dtype=np.float64)
    if vps.ndim == 1:
        vps = vps[None, :]
    if vps.ndim != 2 or vps.shape[1] != 5:
        raise ValueError("viewpoint batch must have shape (N, 5)")
    if vps.shape[0] == 0:
        raise ValueError("viewpoint batch is empty")
    return vps


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    np.exp(z, out=z)
    z /= z.sum(axis=1, keepdims=True)
    return z


_CHUNK = 16384


def forward(params: ModelParams, vps) -> tuple[np.ndarray, np.ndarray]:
    """Batched field evaluation.

    Returns (distributions (N, k), latents (N, 128)). Outputs lie on
    the simplex by construction. Accepts a Viewpoint, a 5-vector, or an
    (N, 5) array of raw coordinates.
    """
    vps = _as_batch(vps)
    dt = params.dtype
    n = vps.shape[0]
    if n <= _CHUNK:
        return _forward_fast(params, vps, dt)
    m = np.empty((n, params.k), dtype=dt)
    lat = np.empty((n, HEAD_WIDTH), dtype=dt)
    for s in range(0, n, _CHUNK):
        e = min(s + _CHUNK, n)
        m[s:e], lat[s:e] = _forward_fast(params, vps[s:e], dt)
    return m, lat


def _forward_fast(params: ModelParams, vps: np.ndarray, dt) -> tuple[np.ndarray, np.ndarray]:
    x, d = encode_batch(params.meta.normalizer, vps, dtype=dt)
    w, b = params.weights, params.biases
    n = x.shape[0]
    h = np.empty((n, TRUNK_WIDTH), dtype=dt)
    h2 = np.empty((n, TRUNK_WIDTH), dtype=dt)

    np.matmul(x, w[0], out=h)
    h += b[0]
    np.maximum(h, 0, out=h)
    for i in range(1, TRUNK_LAYERS):
        if i == SKIP_LAYER:
            np.matmul(h, w[i][:TRUNK_WIDTH], out=h2)
            h2 += x @ w[i][TRUNK_WIDTH:]
        else:
            np.matmul(h, w[i], out=h2)
        h2 += b[i]
        np.maximum(h2, 0, out=h2)
        h, h2 = h2, h
    wh, wo = w[TRUNK_LAYERS], w[TRUNK_LAYERS + 1]
    lat = h @ wh[:TRUNK_WIDTH]
    lat += d @ wh[TRUNK_WIDTH:]
    lat += b[TRUNK_LAYERS]
    np.tanh(lat, out=lat)
    logits = lat @ wo
    logits += b[TRUNK_LAYERS + 1]
    return _softmax(logits), lat


@dataclass
class ForwardTrace:
    """Everything backward passes need: per-layer inputs and
    pre-activation signs, the head state, and the output."""

    x: np.ndarray  # (N, 60) position features
    d: np.ndarray  # (N, 40) direction features
    inputs: list  # input matrix of each trunk layer (skip layer holds the concat)
    masks: list  # relu derivative masks per trunk layer
    head_in: np.ndarray  # (N, 296)
    latent: np.ndarray  # (N, 128) tanh activations
    output: np.ndarray  # (N, k) distributions


def forward_trace(params: ModelParams, vps, feature_weights=None) -> ForwardTrace:
    """Traced forward pass.

    feature_weights, when given as a (20,) per-octave-component vector,
    scales every encoded scalar's features; training uses this for the
    coarse-to-fine frequency ramp and it must be all-ones (or None) at
    inference.
    """
    vps = _as_batch(vps)
    dt = params.dtype
    x, d = encode_batch(params.meta.normalizer, vps, dtype=dt)
    if feature_weights is not None:
        fw = np.asarray(feature_weights, dtype=dt)
        x = x * np.tile(fw, 3)
        d = d * np.tile(fw, 2)
    w, b = params.weights, params.biases
    inputs, masks = [], []
    h = x
    for i in range(TRUNK_LAYERS):
        if i == SKIP_LAYER:
            h = np.concatenate([h, x], axis=1)
        inputs.append(h)
        z = h @ w[i] + b[i]
        masks.append(z > 0)
        h = np.maximum(z, 0)
    head_in = np.concatenate([h, d], axis=1)
    lat = np.tanh(head_in @ w[TRUNK_LAYERS] + b[TRUNK_LAYERS])
    logits = lat @ w[TRUNK_LAYERS + 1] + b[TRUNK_LAYERS + 1]
    return ForwardTrace(x, d, inputs, masks, head_in, lat, _softmax(logits))


def _backprop_to_features(params: ModelParams, tr: ForwardTrace, g_m: np.ndarray,
                          want_weight_grads: bool):
    """Shared backward walk. g_m is dLoss/d(output) per sample.

    Returns (gw, gb, gx, gd); weight gradients are None unless requested.
    """
    w = params.weights
    n_layers = TRUNK_LAYERS + 2
    gw = [None] * n_layers if want_weight_grads else None
    gb = [None] * n_layers if want_weight_grads else None

    m = tr.output
    dz = m * (g_m - (g_m * m).sum(axis=1, keepdims=True))  # softmax backward
    if want_weight_grads:
        gw[-1] = tr.latent.T @ dz
        gb[-1] = dz.sum(axis=0)
    dlat = dz @ w[TRUNK_LAYERS + 1].T
    dzh = dlat * (1.0 - tr.latent * tr.latent)
    if want_weight_grads:
        gw[TRUNK_LAYERS] = tr.head_in.T @ dzh
        gb[TRUNK_LAYERS] = dzh.sum(axis=0)
    dhead = dzh @ w[TRUNK_LAYERS].T
    dh = dhead[:, :TRUNK_WIDTH]
    gd = dhead[:, TRUNK_WIDTH:]

    gx = None
    for i in range(TRUNK_LAYERS - 1, -1, -1):
        dzl = dh * tr.masks[i]
        if want_weight_grads:
            gw[i] = tr.inputs[i].T @ dzl
            gb[i] = dzl.sum(axis=0)
        din = dzl @ w[i].T
        if i == SKIP_LAYER:
            gx = din[:, TRUNK_WIDTH:] if gx is None else gx + din[:, TRUNK_WIDTH:]
            dh = din[:, :TRUNK_WIDTH]
        elif i == 0:
            gx = din if gx is None else gx + din
        else:
            dh = din
    return gw, gb, gx, gd


def backward_params(params: ModelParams, vps, targets, feature_weights=None):
    """Mean squared-norm loss over the batch and its parameter gradients.

    loss = (1/N) sum_i ||m_i - t_i||^2. Returns (loss, (gw, gb)) with
    gradient lists parallel to params.weights / params.biases.
    """
    vps = _as_batch(vps)
    targets = np.asarray(targets, dtype=params.dtype)
    if targets.shape != (vps.shape[0], params.k):
        raise ValueError("targets must have shape (N, k)")
    tr = forward_trace(params, vps, feature_weights=feature_weights)
    n = vps.shape[0]
    diff = tr.output - targets
    loss = float((diff * diff).sum() / n)
    g_m = (2.0 / n) * diff
    gw, gb, _, _ = _backprop_to_features(params, tr, g_m, want_weight_grads=True)
    return loss, (gw, gb)


def input_gradients(params: ModelParams, vps, loss_fn):
    """Per-sample losses and gradients with respect to raw coordinates.

    loss_fn maps distributions (N, k) to (losses (N,), dloss/dm (N, k));
    the returned gradient (N, 5) chains through the frequency encoding
    and coordinate normalization down to raw (x, y, z, alpha, gamma).
    """
    vps = _as_batch(vps)
    tr = forward_trace(params, vps)
    losses, g_m = loss_fn(tr.output)
    g_m = np.asarray(g_m, dtype=params.dtype)
    _, _, gx, gd = _backprop_to_features(params, tr, g_m, want_weight_grads=False)

    n = vps.shape[0]
    dpos = (gx.reshape(n, 3, -1) * encode_gradient_factors(tr.x.reshape(n, 3, -1))).sum(axis=2)
    ddir = (gd.reshape(n, 2, -1) * encode_gradient_factors(tr.d.reshape(n, 2, -1))).sum(axis=2)
    g_norm = np.concatenate([dpos, ddir], axis=1).astype(np.float64)
    return np.asarray(losses, dtype=np.float64), g_norm * params.meta.normalizer.scale()


def backward_inputs(params: ModelParams, viewpoint, loss_fn) -> np.ndarray:
    """Gradient of a scalar output loss at one viewpoint, as a 5-vector."""
    if isinstance(viewpoint, Viewpoint):
        viewpoint = viewpoint.as_array()
    _, g = input_gradients(params, np.asarray(viewpoint)[None, :], loss_fn)
    return g[0]


class CheckpointError(ValueError):
    pass


def _meta_to_json(meta: ModelMeta) -> dict:
    return {
        "format": 1,
        "k": meta.k,
        "class_names": list(meta.class_names),
        "bins": meta.bins.to_json(),
        "normalizer": {"lo": meta.normalizer.lo.tolist(), "hi": meta.normalizer.hi.tolist()},
        "n_freqs": meta.n_freqs,
        "provenance": meta.provenance,
    }


def _meta_from_json(obj) -> ModelMeta:
    return ModelMeta(
        k=int(obj["k"]),
        class_names=tuple(obj["class_names"]),
        bins=bins_from_json(obj["bins"]),
        normalizer=Normalizer(np.array(obj["normalizer"]["lo"]), np.array(obj["normalizer"]["hi"])),
        n_freqs=int(obj["n_freqs"]),
        provenance=dict(obj.get("provenance") or {}),
    )


def save_checkpoint(params: ModelParams, path):
    """Binary checkpoint: magic, JSON header, raw little-endian float32
    weights in layer order (matrix then bias)."""
    header = _meta_to_json(params.meta)
    header["layers"] = [list(w.shape) for w in params.weights]
    blob = json.dumps(header, separators=(",", ":")).encode()
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", len(blob)))
        f.write(blob)
        for w, b in zip(params.weights, params.biases):
            f.write(np.ascontiguousarray(w, dtype="<f4").tobytes())
            f.write(np.ascontiguousarray(b, dtype="<f4").tobytes())


def load_checkpoint(path) -> ModelParams:
    with open(path, "rb") as f:
        data = f.read()
    if data[:4] != MAGIC:
        raise CheckpointError(f"bad magic {data[:4]!r}, expected {MAGIC!r}")
    if len(data) < 8:
        raise CheckpointError("truncated checkpoint header")
    (hlen,) = struct.unpack("<I", data[4:8])
    if len(data) < 8 + hlen:
        raise CheckpointError("truncated checkpoint header")
    try:
        header = json.loads(data[8 : 8 + hlen])
    except json.JSONDecodeError as e:
        raise CheckpointError(f"invalid header JSON: {e}") from e
    meta = _meta_from_json(header)
    shapes = [tuple(s) for s in header["layers"]]
    if shapes != layer_shapes(meta.k):
        raise CheckpointError(f"layer shapes {shapes} do not match architecture for k={meta.k}")
    off = 8 + hlen
    weights, biases = [], []
    for w_in, w_out in shapes:
        wn = w_in * w_out * 4
        if off + wn + w_out * 4 > len(data):
            raise CheckpointError("checkpoint truncated inside weight data")
        weights.append(np.frombuffer(data, dtype="<f4", count=w_in * w_out, offset=off).reshape(w_in, w_out).copy())
        off += wn
        biases.append(np.frombuffer(data, dtype="<f4", count=w_out, offset=off).copy())
        off += w_out * 4
    if off != len(data):
        raise CheckpointError("unexpected trailing bytes in checkpoint")
    return ModelParams(weights, biases, meta)
