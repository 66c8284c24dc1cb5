"""Optimization of the view field on ground-truth view samples.

The objective is the mean over samples of the squared L2 distance
between predicted and ground-truth distributions. The optimizer is
adaptive moment estimation with bias correction; batches are reshuffled
every epoch from a seeded generator, so a (seed, dataset) pair fixes
the trained weights bit for bit.
"""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import net
from .net import ModelParams


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 100
    batch_size: int = 1024
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    seed: int = 0
    shuffle: bool = True
    # coarse-to-fine: ramp the encoding octaves in over this many epochs
    # (0 disables). With sparse supervision the full 10-octave encoding
    # memorizes the samples without interpolating; opening the octaves
    # gradually fits the smooth structure first. Inference always sees
    # the full encoding.
    freq_ramp_epochs: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.freq_ramp_epochs < 0:
            raise ValueError("freq_ramp_epochs must be >= 0")


def frequency_ramp_weights(progress: float, n_freqs: int = 10) -> np.ndarray:
    """Per-component feature weights for the coarse-to-fine ramp.

    Octave j fades in with a half-cosine as progress sweeps past j /
    n_freqs; at progress >= 1 all weights are 1 and the curriculum has
    no effect.
    """
    a = np.clip(progress, 0.0, 1.0) * n_freqs
    j = np.arange(n_freqs)
    w = np.clip(a - j, 0.0, 1.0)
    w = 0.5 * (1.0 - np.cos(np.pi * w))
    w[0] = 1.0  # the base octave is always on
    return np.repeat(w, 2)


@dataclass
class TrainReport:
    epoch_losses: list[float]
    wall_time_s: float
    n_train: int
    final_test_rmse: float | None = None
    n_test: int | None = None
    config: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)

    def save(self, path):
        with open(path, "w") as f:
            f.write(self.to_json())


def train(dataset, config: TrainConfig, initial: ModelParams,
          test_dataset=None, log_every: int = 0) -> tuple[ModelParams, TrainReport]:
    """Fit a model to (viewpoint, distribution) pairs.

    dataset exposes .viewpoints (N, 5) and .m (N, k); the initial
    parameters are copied, not mutated. Returns the fitted parameters
    and a per-epoch loss report.
    """
    vps = np.asarray(dataset.viewpoints, dtype=np.float64)
    targets = np.asarray(dataset.m)
    n = len(vps)
    if n == 0:
        raise ValueError("dataset is empty")
    params = initial.copy()
    dt = params.dtype
    targets = targets.astype(dt)

    rng = np.random.default_rng(config.seed)
    mom = [np.zeros_like(w) for w in params.weights]
    mom_b = [np.zeros_like(b) for b in params.biases]
    vel = [np.zeros_like(w) for w in params.weights]
    vel_b = [np.zeros_like(b) for b in params.biases]
    step = 0
    losses = []
    t0 = time.perf_counter()

    for epoch in range(config.epochs):
        order = rng.permutation(n) if config.shuffle else np.arange(n)
        total = 0.0
        fw = None
        if config.freq_ramp_epochs > 0:
            fw = frequency_ramp_weights(epoch / config.freq_ramp_epochs)
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            loss, (gw, gb) = net.backward_params(params, vps[idx], targets[idx],
                                                 feature_weights=fw)
            if not np.isfinite(loss):
                raise RuntimeError(
                    f"non-finite loss at epoch {epoch}, batch {start // config.batch_size}"
                )
            total += loss * len(idx)
            step += 1
            c1 = 1.0 - config.beta1**step
            c2 = 1.0 - config.beta2**step
            for p_arr, g, m_arr, v_arr in (
                list(zip(params.weights, gw, mom, vel))
                + list(zip(params.biases, gb, mom_b, vel_b))
            ):
                g = g.astype(dt, copy=False)
                m_arr *= config.beta1
                m_arr += (1.0 - config.beta1) * g
                v_arr *= config.beta2
                v_arr += (1.0 - config.beta2) * np.square(g)
                p_arr -= config.learning_rate * (m_arr / c1) / (np.sqrt(v_arr / c2) + config.epsilon)
        epoch_loss = total / n
        losses.append(float(epoch_loss))
        if log_every and (epoch + 1) % log_every == 0:
            print(f"epoch {epoch + 1}/{config.epochs}  loss {epoch_loss:.6f}", flush=True)

    report = TrainReport(
        epoch_losses=losses,
        wall_time_s=time.perf_counter() - t0,
        n_train=n,
        config=asdict(config),
    )
    if test_dataset is not None:
        report.final_test_rmse = evaluate_rmse(params, test_dataset)
        report.n_test = len(test_dataset.viewpoints)
    return params, report


def evaluate_rmse(params: ModelParams, dataset) -> float:
    """Root mean squared error over all samples and components."""
    vps = np.asarray(dataset.viewpoints, dtype=np.float64)
    if len(vps) == 0:
        raise ValueError("dataset is empty")
    pred, _ = net.forward(params, vps)
    err = pred.astype(np.float64) - np.asarray(dataset.m, dtype=np.float64)
    return float(np.sqrt(np.mean(err * err)))
