"""Toy federated learning driven by over-the-air gradient aggregation.

Synthetic objectives only: a strongly convex quadratic (per-device optima,
global optimum at their mean) and a small two-blob logistic regression. Each
round clips per-coordinate gradients, aggregates them either exactly (genie)
or through the full encode/transmit/estimate/decode pipeline, and takes one
gradient step. Trials and model coordinates are batched through the channel.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import estimation
from .channel import SystemConfig
from .mappings import mapping_from_id

BACKENDS = ("genie", "ncoac")


@dataclass(frozen=True)
class FlConfig:
    """Learning-loop and aggregation parameters for one FL run."""

    K: int
    d_model: int
    gamma: float
    rounds: int
    trials: int
    backend: str = "genie"
    mapping: str = "aa"
    csi: str = "sc"
    estimator: str = "projected"
    clip: tuple = (-2.0, 2.0)
    M: int = 2
    L: int = 4
    P: float = 1.0
    beta: float = 1e4
    seed: int = 0
    rho_scale: tuple | None = None

    def __post_init__(self):
        object.__setattr__(self, "clip", (float(self.clip[0]), float(self.clip[1])))
        if self.backend not in BACKENDS:
            raise ValueError(f"unknown backend {self.backend!r}")
        if self.gamma <= 0 or self.gamma >= 1:
            raise ValueError("step size must lie in (0, 1) for the quadratic task")
        if self.clip[0] >= 0 or self.clip[1] <= 0:
            raise ValueError("clip range must straddle zero")
        if self.rho_scale is not None:
            object.__setattr__(self, "rho_scale", tuple(float(v) for v in self.rho_scale))


@dataclass(frozen=True)
class QuadraticTask:
    """f_k(theta) = 0.5 ||theta - theta_k*||^2; 1-strongly convex, 1-smooth.

    The global optimum is the mean of the per-device optima.
    """

    theta_star: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "theta_star", np.asarray(self.theta_star, dtype=float))

    @property
    def K(self):
        return self.theta_star.shape[0]

    @property
    def d_model(self):
        return self.theta_star.shape[1]

    @property
    def optimum(self):
        return self.theta_star.mean(axis=0)

    def local_gradient(self, k, theta):
        return np.asarray(theta, dtype=float) - self.theta_star[k]

    def gradients(self, theta):
        """All device gradients at once: (..., D) -> (..., K, D)."""
        theta = np.asarray(theta, dtype=float)
        return theta[..., None, :] - self.theta_star


def make_quadratic_task(K, d_model, rng, spread=0.5):
    """Per-device optima drawn N(0, spread^2) per coordinate."""
    return QuadraticTask(theta_star=spread * rng.standard_normal((K, d_model)))


@dataclass(frozen=True)
class LogisticTask:
    """Two-class logistic regression on Gaussian blobs, split across devices."""

    features: np.ndarray
    labels: np.ndarray

    @property
    def K(self):
        return self.features.shape[0]

    @property
    def d_model(self):
        return self.features.shape[-1]

    @property
    def optimum(self):
        theta = np.zeros(self.d_model)
        for _ in range(3000):
            theta = theta - 0.5 * self.gradients(theta).mean(axis=-2)
        return theta

    def gradients(self, theta):
        theta = np.asarray(theta, dtype=float)
        z = np.einsum("knd,...d->...kn", self.features, theta)
        resid = 1.0 / (1.0 + np.exp(-z)) - (self.labels + 1.0) / 2.0
        return np.einsum("...kn,knd->...kd", resid, self.features) / self.features.shape[1]


def make_logistic_task(K, d_model, rng, n_per_device=40, separation=2.0):
    center = separation * np.concatenate([[1.0], np.zeros(d_model - 1)])
    labels = np.where(rng.random((K, n_per_device)) < 0.5, 1.0, -1.0)
    features = rng.standard_normal((K, n_per_device, d_model)) + labels[..., None] * center / 2.0
    return LogisticTask(features=features, labels=labels)


def fl_round(theta, config, task, rng):
    """One synchronous round: clip local gradients, aggregate, step.

    theta may carry leading batch axes (parallel trials).
    """
    grads = np.clip(task.gradients(theta), *config.clip)
    if config.backend == "genie":
        agg = grads.mean(axis=-2)
    else:
        agg = _ncoac_aggregate(grads, config, rng) / config.K
    return theta - config.gamma * agg


def _ncoac_aggregate(grads, config, rng):
    """Pipeline aggregation of each model coordinate; returns sum estimates."""
    batch = grads.shape[:-2]
    K, D = grads.shape[-2], grads.shape[-1]
    sys_conf = SystemConfig(
        K=K, M=config.M, L=config.L, P=config.P, beta=config.beta, csi=config.csi, seed=config.seed
    )
    mapping = mapping_from_id(config.mapping, x_min=config.clip[0], x_max=config.clip[1])
    x = np.moveaxis(grads, -2, -1).reshape(batch + (D, K))
    est = estimation.aggregate(
        sys_conf,
        mapping,
        x,
        rng,
        estimator=config.estimator,
        rho_scale=np.asarray(config.rho_scale) if config.rho_scale is not None else None,
    )
    return np.asarray(est)


@dataclass(frozen=True)
class FlResult:
    trajectory: np.ndarray
    stderr: np.ndarray
    plateau: float
    diverged: bool

    def __post_init__(self):
        object.__setattr__(self, "trajectory", np.asarray(self.trajectory, dtype=float))
        object.__setattr__(self, "stderr", np.asarray(self.stderr, dtype=float))


def run_fl(config, task, theta0=None):
    """Average squared distance to the optimum over rounds.

    Returns the per-round mean trajectory across trials, its standard error,
    the plateau (mean over the last 20% of rounds) and a divergence flag
    (plateau above the initial error).
    """
    rng = np.random.default_rng(np.random.SeedSequence(config.seed))
    opt = task.optimum
    theta = np.zeros((config.trials, task.d_model)) if theta0 is None else np.broadcast_to(
        theta0, (config.trials, task.d_model)
    ).copy()
    traj = np.zeros(config.rounds)
    se = np.zeros(config.rounds)
    for t in range(config.rounds):
        err = ((theta - opt) ** 2).sum(axis=-1)
        traj[t] = err.mean()
        se[t] = err.std(ddof=1) / np.sqrt(len(err)) if len(err) > 1 else np.nan
        theta = fl_round(theta, config, task, rng)
    tail = max(1, int(config.rounds * 0.2))
    plateau = float(traj[-tail:].mean())
    return FlResult(trajectory=traj, stderr=se, plateau=plateau, diverged=bool(plateau > traj[0] > 0))
