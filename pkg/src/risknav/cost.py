"""Tracking-plus-collision objective and its state gradients.

The running cost is a quadratic penalty on the tracking error to a
reference state, a quadratic control penalty, and a sum of Gaussian
collision bumps centred on the humans. The terminal cost is the same
state terms scaled by a terminal weight. Costs along a trajectory are
accumulated by left-endpoint rectangle quadrature on the control grid.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dynamics import ControlSchedule, JointState, Trajectory


def _default_track_weight() -> np.ndarray:
    return np.diag([0.5, 0.5, 0.0, 0.0])


@dataclass(frozen=True)
class CostParams:
    """Weights of the navigation objective.

    track_weight is the 4x4 PSD matrix on the tracking error,
    control_weight scales the isotropic quadratic control penalty,
    collision_peak and collision_bandwidth set the height and squared
    length scale of the Gaussian bump around each human, and
    terminal_weight scales the terminal state cost.
    """

    track_weight: np.ndarray = field(default_factory=_default_track_weight)
    control_weight: float = 0.2
    collision_peak: float = 100.0
    collision_bandwidth: float = 0.2
    terminal_weight: float = 0.1

    def __post_init__(self):
        q = np.asarray(self.track_weight, dtype=float)
        if q.shape != (4, 4):
            raise ValueError(f"track_weight must be 4x4, got {q.shape}")
        if not np.allclose(q, q.T, atol=1e-12):
            raise ValueError("track_weight must be symmetric")
        if np.min(np.linalg.eigvalsh(q)) < -1e-10:
            raise ValueError("track_weight must be positive semidefinite")
        object.__setattr__(self, "track_weight", q)
        if self.control_weight <= 0.0:
            raise ValueError("control_weight must be positive")
        if self.collision_peak < 0.0:
            raise ValueError("collision_peak must be nonnegative")
        if self.collision_bandwidth <= 0.0:
            raise ValueError("collision_bandwidth must be positive")
        if self.terminal_weight < 0.0:
            raise ValueError("terminal_weight must be nonnegative")


@dataclass(frozen=True)
class ReferenceTrajectory:
    """Straight-line reference from a start position to a goal.

    The reference moves at constant speed along the segment starting at
    ``t_start`` and rests at the goal once it arrives. Velocity is the
    constant segment velocity while moving and zero afterwards.
    """

    start: np.ndarray
    goal: np.ndarray
    speed: float
    t_start: float = 0.0

    def __post_init__(self):
        start = np.asarray(self.start, dtype=float).reshape(2)
        goal = np.asarray(self.goal, dtype=float).reshape(2)
        if not (np.all(np.isfinite(start)) and np.all(np.isfinite(goal))):
            raise ValueError("start and goal must be finite")
        if self.speed < 0.0:
            raise ValueError("speed must be nonnegative")
        object.__setattr__(self, "start", start)
        object.__setattr__(self, "goal", goal)

    @property
    def length(self) -> float:
        return float(np.linalg.norm(self.goal - self.start))

    def states_at(self, times) -> np.ndarray:
        """Reference states [px, py, vx, vy] at the given times."""
        times = np.atleast_1d(np.asarray(times, dtype=float))
        length = self.length
        if length == 0.0 or self.speed == 0.0:
            out = np.zeros((times.shape[0], 4))
            out[:, :2] = self.start
            return out
        direction = (self.goal - self.start) / length
        progress = np.clip(self.speed * (times - self.t_start), 0.0, length)
        out = np.zeros((times.shape[0], 4))
        out[:, :2] = self.start + progress[:, None] * direction
        moving = (times >= self.t_start - 1e-12) & (progress < length)
        out[moving, 2:] = self.speed * direction
        return out

    def state_at(self, t: float) -> np.ndarray:
        return self.states_at([t])[0]


def collision_cost(position, humans, params: CostParams) -> float:
    """Sum of Gaussian bumps at the human positions, 0.0 for an empty scene."""
    humans = np.asarray(humans, dtype=float)
    if humans.size == 0:
        return 0.0
    diff = np.asarray(position, dtype=float) - humans
    sq = np.einsum("ij,ij->i", diff, diff)
    return float(params.collision_peak * np.sum(np.exp(-sq / (2.0 * params.collision_bandwidth))))


def collision_cost_gradient(position, humans, params: CostParams) -> np.ndarray:
    """Gradient of collision_cost with respect to the robot position."""
    humans = np.asarray(humans, dtype=float)
    if humans.size == 0:
        return np.zeros(2)
    diff = np.asarray(position, dtype=float) - humans
    sq = np.einsum("ij,ij->i", diff, diff)
    weights = np.exp(-sq / (2.0 * params.collision_bandwidth))
    scale = -params.collision_peak / params.collision_bandwidth
    return scale * (weights @ diff)


def running_cost(state: JointState, u, ref_state, params: CostParams) -> float:
    """Instantaneous cost c(x, u) at one grid node."""
    err = state.robot - np.asarray(ref_state, dtype=float)
    u = np.asarray(u, dtype=float)
    track = 0.5 * err @ params.track_weight @ err
    control = 0.5 * params.control_weight * (u @ u)
    return float(track + control + collision_cost(state.robot[:2], state.humans, params))


def running_cost_state_gradient(state: JointState, u, ref_state, params: CostParams) -> np.ndarray:
    """d(running_cost)/dx. The control does not enter."""
    err = state.robot - np.asarray(ref_state, dtype=float)
    grad = params.track_weight @ err
    grad[:2] += collision_cost_gradient(state.robot[:2], state.humans, params)
    return grad


def terminal_cost(state: JointState, ref_state, params: CostParams) -> float:
    """Terminal penalty h(x): the running state terms scaled by terminal_weight."""
    err = state.robot - np.asarray(ref_state, dtype=float)
    track = 0.5 * err @ params.track_weight @ err
    return float(params.terminal_weight * (track + collision_cost(state.robot[:2], state.humans, params)))


def terminal_cost_state_gradient(state: JointState, ref_state, params: CostParams) -> np.ndarray:
    err = state.robot - np.asarray(ref_state, dtype=float)
    grad = params.track_weight @ err
    grad[:2] += collision_cost_gradient(state.robot[:2], state.humans, params)
    return params.terminal_weight * grad


def total_cost(
    traj: Trajectory,
    schedule: ControlSchedule,
    ref: ReferenceTrajectory,
    params: CostParams,
) -> float:
    """Quadrature of the running cost over a rollout plus the terminal cost.

    Left-endpoint rectangles on the control grid: node g contributes
    c(x_g, u_g) dt for g < G and the terminal cost at g = G.
    """
    n_cells = traj.n_nodes - 1
    if schedule.n_cells < n_cells:
        raise ValueError("schedule shorter than the trajectory")
    dt = traj.grid.dt_control
    ref_states = ref.states_at(traj.times)
    total = 0.0
    for g in range(n_cells):
        total += running_cost(traj.state_at(g), schedule.inputs[g], ref_states[g], params) * dt
    total += terminal_cost(traj.state_at(n_cells), ref_states[n_cells], params)
    return float(total)
