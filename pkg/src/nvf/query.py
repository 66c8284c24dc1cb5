"""Direct and inverse queries over a trained view field.

Inverse queries search viewpoint space for a target: an exact
distribution, per-component intervals (the brushable form), or a
desired perception-metric value. The gradient strategy runs plain
descent from seeded random restarts, stepping in normalized input
space (one learning rate serves positions and angles) and projecting
back into the feasible box after every step; the sweep strategy ranks a
large seeded batch of candidates by loss. When a spatial
parametrization is supplied, descent runs over its (a, b) unit-square
coordinates and every returned position lies exactly on the region.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from . import net, percept
from .field import Parametrization, Viewpoint, wrap_yaw
from .net import ModelParams
from .scene import Scene, facade_patches


@dataclass(frozen=True)
class ExactVector:
    """Match given components of the distribution exactly."""

    m_star: np.ndarray
    mask: np.ndarray | None = None  # boolean, defaults to all active

    def __post_init__(self):
        m = np.asarray(self.m_star, dtype=np.float64)
        mask = (np.ones(len(m), dtype=bool) if self.mask is None
                else np.asarray(self.mask, dtype=bool))
        if mask.shape != m.shape or not mask.any():
            raise ValueError("mask must match m_star and keep at least one component")
        if np.any(m[mask] < 0) or np.any(m[mask] > 1):
            raise ValueError("target components must lie in [0, 1]")
        object.__setattr__(self, "m_star", m)
        object.__setattr__(self, "mask", mask)


@dataclass(frozen=True)
class IntervalConstraints:
    """Per-component [lo, hi] windows; NaN rows are unconstrained."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=np.float64)
        hi = np.asarray(self.hi, dtype=np.float64)
        active = ~np.isnan(lo)
        if lo.shape != hi.shape or not active.any():
            raise ValueError("need at least one constrained component")
        if np.any(active != ~np.isnan(hi)):
            raise ValueError("lo and hi must be set together")
        if np.any(lo[active] < 0) or np.any(hi[active] > 1) or np.any(lo[active] > hi[active]):
            raise ValueError("intervals must satisfy 0 <= lo <= hi <= 1")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @staticmethod
    def from_dict(k: int, intervals: dict[int, tuple[float, float]]) -> "IntervalConstraints":
        lo = np.full(k, np.nan)
        hi = np.full(k, np.nan)
        for i, (a, b) in intervals.items():
            lo[i], hi[i] = a, b
        return IntervalConstraints(lo, hi)


@dataclass(frozen=True)
class MetricTarget:
    """Drive a perception metric toward a desired scalar value."""

    metric: percept.PerceptionMetric
    value: float


TargetSpec = ExactVector | IntervalConstraints | MetricTarget


def target_loss_fn(target: TargetSpec):
    """Batch loss for a target: m (N, k) -> (losses (N,), dloss/dm (N, k))."""
    if isinstance(target, ExactVector):
        mask = target.mask.astype(np.float64)
        m_star = target.m_star

        def exact(m):
            d = (m - m_star) * mask
            return (d * d).sum(axis=1), 2.0 * d

        return exact
    if isinstance(target, IntervalConstraints):
        lo = np.nan_to_num(target.lo, nan=-np.inf)
        hi = np.nan_to_num(target.hi, nan=np.inf)

        def interval(m):
            under = np.maximum(lo - m, 0.0)
            over = np.maximum(m - hi, 0.0)
            return (under * under + over * over).sum(axis=1), 2.0 * (over - under)

        return interval
    if isinstance(target, MetricTarget):
        def metric(m):
            n = len(m)
            vals = np.empty(n)
            grads = np.empty_like(np.asarray(m, dtype=np.float64))
            for i in range(n):
                v, g = percept.value_and_grad(target.metric.expr, m[i])
                vals[i] = v
                grads[i] = g
            d = vals - target.value
            return d * d, (2.0 * d)[:, None] * grads

        return metric
    raise TypeError(f"unknown target {type(target).__name__}")


@dataclass(frozen=True)
class InverseConfig:
    eta: float = 0.01  # step size in normalized coordinates
    max_iters: int = 500
    tol: float = 1e-3
    restarts: int = 32
    seed: int = 0
    region: Parametrization | None = None
    fixed_direction: tuple[float, float] | None = None  # (alpha, gamma)

    def __post_init__(self):
        if self.eta <= 0 or self.max_iters < 1 or self.tol <= 0 or self.restarts < 1:
            raise ValueError("bad inverse-query configuration")


CONVERGED = "converged"
MAX_ITERATIONS = "max_iterations"


@dataclass(frozen=True)
class InverseResult:
    viewpoint: Viewpoint
    m: np.ndarray
    loss: float
    status: str
    iterations: int
    restart: int


def _init_state(rng, cfg: InverseConfig, n: int):
    """Optimization variables per restart, all in unit-scale boxes."""
    u = rng.random((n, 5))
    state = np.empty((n, 5))
    if cfg.region is not None:
        state[:, 0] = u[:, 0]  # a
        state[:, 1] = u[:, 1]  # b
        state[:, 2] = 0.0
    else:
        state[:, :3] = 2.0 * u[:, :3] - 1.0  # normalized position
    state[:, 3] = 2.0 * u[:, 3] - 1.0  # normalized yaw
    state[:, 4] = 2.0 * u[:, 4] - 1.0  # normalized pitch
    return state


def _state_to_viewpoints(state, cfg: InverseConfig, normalizer) -> np.ndarray:
    n = len(state)
    vps = np.empty((n, 5))
    if cfg.region is not None:
        vps[:, :3] = cfg.region.point(state[:, 0], state[:, 1])
    else:
        nv = np.zeros((n, 5))
        nv[:, :3] = state[:, :3]
        vps[:, :3] = normalizer.denormalize(nv)[:, :3]
    if cfg.fixed_direction is not None:
        vps[:, 3] = wrap_yaw(cfg.fixed_direction[0])
        vps[:, 4] = cfg.fixed_direction[1]
    else:
        vps[:, 3] = (state[:, 3] + 1.0) * math.pi
        vps[:, 4] = state[:, 4] * math.pi / 2.0
    return vps


def inverse_gradient(params: ModelParams, target: TargetSpec,
                     config: InverseConfig | None = None,
                     initial_viewpoints=None) -> list[InverseResult]:
    """Gradient-descent inverse query; returns one result per restart,
    sorted by ascending loss.

    initial_viewpoints, when given as (R, 5) raw coordinates, replaces
    the seeded random restart initialization (free mode only).
    """
    cfg = config or InverseConfig()
    loss_fn = target_loss_fn(target)
    normalizer = params.meta.normalizer
    scale = normalizer.scale()
    rng = np.random.default_rng(cfg.seed)

    if initial_viewpoints is not None:
        if cfg.region is not None:
            raise ValueError("explicit initial viewpoints require free (unparametrized) mode")
        init = np.asarray(initial_viewpoints, dtype=np.float64).reshape(-1, 5)
        state = normalizer.normalize(init)
        if cfg.fixed_direction is not None:
            state[:, 3:] = 0.0
        cfg = replace(cfg, restarts=len(state))
    else:
        state = _init_state(rng, cfg, cfg.restarts)
    r = cfg.restarts
    active = np.ones(r, dtype=bool)
    iterations = np.full(r, cfg.max_iters, dtype=int)
    converged = np.zeros(r, dtype=bool)

    for it in range(cfg.max_iters + 1):
        idx = np.nonzero(active)[0]
        if len(idx) == 0:
            break
        vps = _state_to_viewpoints(state[idx], cfg, normalizer)
        losses, grads_raw = net.input_gradients(params, vps, loss_fn)

        done = losses <= cfg.tol
        iterations[idx[done]] = it
        converged[idx[done]] = True
        active[idx[done]] = False
        if it == cfg.max_iters:
            break
        step_idx = idx[~done]
        if len(step_idx) == 0:
            continue
        g_raw = grads_raw[~done]

        g_state = np.zeros((len(step_idx), 5))
        if cfg.region is not None:
            ja, jb = cfg.region.jacobian(state[step_idx, 0], state[step_idx, 1])
            g_state[:, 0] = (ja * g_raw[:, :3]).sum(axis=1)
            g_state[:, 1] = (jb * g_raw[:, :3]).sum(axis=1)
        else:
            g_state[:, :3] = g_raw[:, :3] / scale[:3]
        if cfg.fixed_direction is None:
            g_state[:, 3:] = g_raw[:, 3:] / scale[3:]

        state[step_idx] -= cfg.eta * g_state
        # project back into the feasible box; yaw wraps, the rest clamp
        if cfg.region is not None:
            state[step_idx, 0:2] = np.clip(state[step_idx, 0:2], 0.0, 1.0)
        else:
            state[step_idx, 0:3] = np.clip(state[step_idx, 0:3], -1.0, 1.0)
        state[step_idx, 3] = np.mod(state[step_idx, 3] + 1.0, 2.0) - 1.0
        state[step_idx, 4] = np.clip(state[step_idx, 4], -1.0, 1.0)

    vps = _state_to_viewpoints(state, cfg, normalizer)
    m_all, _ = net.forward(params, vps)
    m_all = m_all.astype(np.float64)
    final_losses, _ = loss_fn(m_all)
    results = [
        InverseResult(
            viewpoint=Viewpoint.from_array(vps[i]),
            m=m_all[i],
            loss=float(final_losses[i]),
            status=CONVERGED if converged[i] else MAX_ITERATIONS,
            iterations=int(iterations[i]),
            restart=i,
        )
        for i in range(r)
    ]
    results.sort(key=lambda s: s.loss)
    return results


@dataclass(frozen=True)
class SweepCandidate:
    viewpoint: Viewpoint
    m: np.ndarray
    loss: float


def sweep_viewpoints(params: ModelParams, region: Parametrization | None,
                     n: int, seed: int,
                     fixed_direction: tuple[float, float] | None = None) -> np.ndarray:
    """Seeded candidate viewpoints; for one seed, smaller n is a prefix
    of larger n, so enlarging a sweep never loses its best candidate."""
    u = np.random.default_rng(seed).random((n, 5))
    vps = np.empty((n, 5))
    if region is not None:
        vps[:, :3] = region.point(u[:, 0], u[:, 1])
    else:
        lo, hi = params.meta.normalizer.lo, params.meta.normalizer.hi
        vps[:, :3] = lo + u[:, :3] * (hi - lo)
    if fixed_direction is not None:
        vps[:, 3] = wrap_yaw(fixed_direction[0])
        vps[:, 4] = fixed_direction[1]
    else:
        vps[:, 3] = 2.0 * math.pi * u[:, 3]
        vps[:, 4] = math.pi * (u[:, 4] - 0.5)
    return vps


def inverse_sweep(params: ModelParams, target: TargetSpec,
                  region: Parametrization | None, n: int, seed: int,
                  q: int | None = None,
                  fixed_direction: tuple[float, float] | None = None) -> list[SweepCandidate]:
    """Rank n seeded random viewpoints by target loss; return the best q."""
    q = n if q is None else q
    if not 1 <= q <= n:
        raise ValueError("need n >= q >= 1")
    vps = sweep_viewpoints(params, region, n, seed, fixed_direction)
    m, _ = net.forward(params, vps)
    m = m.astype(np.float64)
    losses, _ = target_loss_fn(target)(m)
    order = np.argsort(losses, kind="stable")[:q]
    return [SweepCandidate(Viewpoint.from_array(vps[i]), m[i], float(losses[i])) for i in order]


def direct_query(params: ModelParams, viewpoints,
                 metric: percept.PerceptionMetric | None = None):
    """Batched field evaluation; positions outside the trained box are
    clamped (with a warning). With a metric, returns its scalars."""
    vps = np.asarray(viewpoints, dtype=np.float64)
    if vps.ndim == 1:
        vps = vps[None, :]
    lo, hi = params.meta.normalizer.lo, params.meta.normalizer.hi
    clipped = np.clip(vps[:, :3], lo, hi)
    n_out = int((clipped != vps[:, :3]).any(axis=1).sum())
    if n_out:
        warnings.warn(f"{n_out} viewpoint(s) outside the trained region were clamped")
        vps = vps.copy()
        vps[:, :3] = clipped
    m, _ = net.forward(params, vps)
    m = m.astype(np.float64)
    if metric is None:
        return m
    return np.array([percept.evaluate(metric.expr, row) for row in m])


def facade_summary(params: ModelParams, scene: Scene, building_id: int,
                   patch_size: float, per_patch_samples: int, seed: int):
    """Mean predicted distribution per facade patch of one building.

    For each patch, per_patch_samples points are drawn uniformly on the
    patch and queried along the outward normal; the patch value is the
    component-wise mean (a convex combination, so still a distribution).
    Returns (patches, means (n_patches, k)).
    """
    if per_patch_samples < 1:
        raise ValueError("per_patch_samples must be >= 1")
    matches = [b for b in scene.buildings if b.id == building_id]
    if not matches:
        raise KeyError(f"unknown building id {building_id}")
    patches = facade_patches(matches[0], patch_size)
    if not patches:
        return [], np.zeros((0, params.k))

    p = per_patch_samples
    u = np.random.default_rng(seed).random((len(patches), p, 2))
    vps = np.empty((len(patches) * p, 5))
    for i, patch in enumerate(patches):
        pos = patch.origin + u[i, :, :1] * patch.e1 + u[i, :, 1:] * patch.e2
        alpha = wrap_yaw(math.atan2(patch.normal[1], patch.normal[0]))
        gamma = math.asin(float(np.clip(patch.normal[2], -1.0, 1.0)))
        vps[i * p : (i + 1) * p, :3] = pos
        vps[i * p : (i + 1) * p, 3] = alpha
        vps[i * p : (i + 1) * p, 4] = gamma
    m, _ = net.forward(params, vps)
    means = m.astype(np.float64).reshape(len(patches), p, -1).mean(axis=1)
    return patches, means


class TargetSyntaxError(ValueError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at offset {offset})")
        self.offset = offset


def parse_target(text: str, component_names) -> TargetSpec:
    """Parse the target mini-format.

    Intervals: "tree:0.2-0.4,sky:0.3-0.5". Exact values (masked to the
    listed components): "tree=0.3,sky=0.4". The two forms cannot be
    mixed.
    """
    names = list(component_names)
    index = {n: i for i, n in enumerate(names)}
    if not text.strip():
        raise TargetSyntaxError("empty target", 0)
    intervals: dict[int, tuple[float, float]] = {}
    exact: dict[int, float] = {}
    offset = 0
    for part in text.split(","):
        start = offset
        offset += len(part) + 1
        entry = part.strip()
        if not entry:
            raise TargetSyntaxError("empty target entry", start)
        pos = start + part.index(entry[0])
        if ":" in entry:
            name, _, rng_text = entry.partition(":")
            lo_text, sep, hi_text = rng_text.partition("-")
            if not sep:
                raise TargetSyntaxError("interval must look like name:lo-hi", pos)
            try:
                lo, hi = float(lo_text), float(hi_text)
            except ValueError:
                raise TargetSyntaxError(f"bad interval bounds {rng_text!r}", pos) from None
            key = _component(name.strip(), index, pos)
            intervals[key] = (lo, hi)
        elif "=" in entry:
            name, _, val_text = entry.partition("=")
            try:
                val = float(val_text)
            except ValueError:
                raise TargetSyntaxError(f"bad target value {val_text!r}", pos) from None
            exact[_component(name.strip(), index, pos)] = val
        else:
            raise TargetSyntaxError(f"expected ':' or '=' in {entry!r}", pos)
    if intervals and exact:
        raise TargetSyntaxError("cannot mix interval and exact entries", 0)
    k = len(names)
    if intervals:
        try:
            return IntervalConstraints.from_dict(k, intervals)
        except ValueError as e:
            raise TargetSyntaxError(str(e), 0) from None
    m_star = np.zeros(k)
    mask = np.zeros(k, dtype=bool)
    for i, v in exact.items():
        m_star[i] = v
        mask[i] = True
    try:
        return ExactVector(m_star, mask)
    except ValueError as e:
        raise TargetSyntaxError(str(e), 0) from None


def _component(name: str, index: dict[str, int], offset: int) -> int:
    if name not in index:
        raise TargetSyntaxError(f"unknown component {name!r}", offset)
    return index[name]
