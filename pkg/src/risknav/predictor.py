"""Stochastic prediction of human motion over the planning horizon.

A prediction sample assigns every human one displacement per observation
interval. Built-in families: constant velocity with Gaussian step noise,
a heading-mixture variant of the same, and replay of recorded futures.
Sample j is drawn from child stream j of the master seed, so individual
samples are reproducible regardless of how many are requested.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

_KINDS = ("gaussian", "mixture", "replay")
_KIND_ALIASES = {"constant_velocity_gaussian": "gaussian", "multimodal_mixture": "mixture"}


def _default_step_cov() -> np.ndarray:
    return 0.01 * np.eye(2)


@dataclass(frozen=True)
class PredictorConfig:
    """Parameters of the built-in prediction families.

    ``step_cov`` is the covariance of a single observation-interval
    displacement. The mixture kind rotates each human's estimated mean
    velocity by one heading drawn per human and sample. The replay kind
    emits the recorded future displacements for every sample and ignores
    the covariance.
    """

    kind: str = "gaussian"
    step_cov: np.ndarray = field(default_factory=_default_step_cov)
    mixture_weights: tuple = (0.6, 0.2, 0.2)
    mixture_headings: tuple = (0.0, np.pi / 6.0, -np.pi / 6.0)
    replay: np.ndarray | None = None

    def __post_init__(self):
        kind = _KIND_ALIASES.get(self.kind, self.kind)
        if kind not in _KINDS:
            raise ValueError(f"unknown predictor kind {self.kind!r}, expected one of {_KINDS}")
        object.__setattr__(self, "kind", kind)
        cov = np.asarray(self.step_cov, dtype=float)
        if cov.shape != (2, 2):
            raise ValueError(f"step_cov must be 2x2, got {cov.shape}")
        if not np.allclose(cov, cov.T, atol=1e-12):
            raise ValueError("step_cov must be symmetric")
        if np.min(np.linalg.eigvalsh(cov)) < -1e-12:
            raise ValueError("step_cov must be positive semidefinite")
        object.__setattr__(self, "step_cov", cov)
        weights = tuple(float(w) for w in self.mixture_weights)
        headings = tuple(float(h) for h in self.mixture_headings)
        if len(weights) != len(headings) or not weights:
            raise ValueError("mixture_weights and mixture_headings must have equal nonzero length")
        if any(w < 0.0 for w in weights) or abs(sum(weights) - 1.0) > 1e-9:
            raise ValueError("mixture_weights must be nonnegative and sum to 1")
        object.__setattr__(self, "mixture_weights", weights)
        object.__setattr__(self, "mixture_headings", headings)
        if self.replay is not None:
            rep = np.asarray(self.replay, dtype=float)
            if rep.ndim != 3 or rep.shape[2] != 2:
                raise ValueError(f"replay must have shape (N, T, 2), got {rep.shape}")
            object.__setattr__(self, "replay", rep)
        if self.kind == "replay" and self.replay is None:
            raise ValueError("replay predictor requires recorded futures")


@dataclass(frozen=True)
class HumanTransitionSamples:
    """Monte Carlo bundle of human displacement sequences.

    ``displacements`` has shape (M, N, T, 2): sample, human, observation
    interval, planar step. ``sample_keys`` are per-sample stream
    fingerprints derived from the master seed.
    """

    displacements: np.ndarray
    master_seed: int
    sample_keys: tuple

    def __post_init__(self):
        disp = np.asarray(self.displacements, dtype=float)
        if disp.ndim != 4 or disp.shape[3] != 2:
            raise ValueError(f"displacements must have shape (M, N, T, 2), got {disp.shape}")
        if not np.all(np.isfinite(disp)):
            raise ValueError("displacements contain non-finite entries")
        if disp.shape[0] != len(self.sample_keys):
            raise ValueError("one sample key is required per sample")
        object.__setattr__(self, "displacements", disp)

    @property
    def n_samples(self) -> int:
        return self.displacements.shape[0]


def estimate_velocity(history: np.ndarray, dt_observe: float) -> np.ndarray:
    """Backward-difference velocity from the two most recent observations.

    ``history`` is (N, H, 2) with H >= 2, oldest first.
    """
    history = np.asarray(history, dtype=float)
    if history.ndim != 3 or history.shape[2] != 2:
        raise ValueError(f"history must have shape (N, H, 2), got {history.shape}")
    if history.shape[1] < 2:
        raise ValueError("velocity estimation needs at least two observations")
    if dt_observe <= 0.0:
        raise ValueError("dt_observe must be positive")
    return (history[:, -1, :] - history[:, -2, :]) / dt_observe


def _cov_factor(cov: np.ndarray) -> np.ndarray:
    """Symmetric PSD square root; tolerates singular covariances."""
    vals, vecs = np.linalg.eigh(cov)
    return vecs * np.sqrt(np.clip(vals, 0.0, None))


def _rotations(headings) -> np.ndarray:
    out = np.empty((len(headings), 2, 2))
    for k, theta in enumerate(headings):
        c, s = np.cos(theta), np.sin(theta)
        out[k] = [[c, -s], [s, c]]
    return out


def sample_transitions(
    history: np.ndarray,
    n_samples: int,
    horizon_steps: int,
    config: PredictorConfig,
    master_seed: int,
    dt_observe: float,
    conditioning=None,
) -> HumanTransitionSamples:
    """Draw displacement samples for every human over the horizon.

    ``conditioning`` (a candidate robot trajectory) is accepted for
    interface compatibility; the built-in families ignore it, so their
    output depends only on the other arguments.
    """
    del conditioning  # built-ins are unconditional
    if n_samples < 1:
        raise ValueError("n_samples must be at least 1")
    if horizon_steps < 1:
        raise ValueError("horizon_steps must be at least 1")
    history = np.asarray(history, dtype=float)
    if history.ndim != 3 or history.shape[2] != 2:
        raise ValueError(f"history must have shape (N, H, 2), got {history.shape}")
    n_humans = history.shape[0]

    children = np.random.SeedSequence(master_seed).spawn(n_samples)
    keys = tuple(int(c.generate_state(1, np.uint64)[0]) for c in children)

    if config.kind == "replay":
        recorded = config.replay
        if recorded.shape[0] != n_humans:
            raise ValueError(
                f"replay futures cover {recorded.shape[0]} humans, scene has {n_humans}"
            )
        steps = np.zeros((n_humans, horizon_steps, 2))
        avail = min(horizon_steps, recorded.shape[1])
        steps[:, :avail] = recorded[:, :avail]
        disp = np.broadcast_to(steps, (n_samples,) + steps.shape).copy()
        return HumanTransitionSamples(disp, master_seed, keys)

    mean_vel = estimate_velocity(history, dt_observe)
    mean_step = mean_vel * dt_observe
    factor = _cov_factor(config.step_cov)
    disp = np.empty((n_samples, n_humans, horizon_steps, 2))
    if config.kind == "gaussian":
        for j, child in enumerate(children):
            rng = np.random.default_rng(child)
            noise = rng.standard_normal((n_humans, horizon_steps, 2))
            disp[j] = mean_step[:, None, :] + noise @ factor.T
    else:  # mixture: one heading hypothesis per human per sample
        rots = _rotations(config.mixture_headings)
        weights = np.asarray(config.mixture_weights)
        for j, child in enumerate(children):
            rng = np.random.default_rng(child)
            modes = rng.choice(len(rots), size=n_humans, p=weights)
            rotated = np.einsum("nab,nb->na", rots[modes], mean_step)
            noise = rng.standard_normal((n_humans, horizon_steps, 2))
            disp[j] = rotated[:, None, :] + noise @ factor.T
    return HumanTransitionSamples(disp, master_seed, keys)


class TransitionSampler:
    """Prediction model bound to the current human histories.

    Controllers call ``sample`` once per planning cycle (or once per
    nominal candidate when ``robot_future_conditional`` is set; the
    built-in families are unconditional, so the flag is False here).
    """

    robot_future_conditional = False

    def __init__(self, history: np.ndarray, config: PredictorConfig, dt_observe: float):
        self.history = np.asarray(history, dtype=float)
        self.config = config
        self.dt_observe = dt_observe

    @property
    def n_humans(self) -> int:
        return self.history.shape[0]

    def sample(self, n_samples: int, horizon_steps: int, master_seed: int,
               conditioning=None) -> HumanTransitionSamples:
        return sample_transitions(
            self.history, n_samples, horizon_steps, self.config,
            master_seed, self.dt_observe, conditioning,
        )
