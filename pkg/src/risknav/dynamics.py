"""Joint robot-crowd dynamics.

The robot is a planar double integrator driven by a piecewise-constant
acceleration schedule on a fine control grid and integrated with explicit
Euler. Humans are exogenous: their positions are piecewise constant and
jump by externally supplied displacements at coarser observation instants.
A rollout therefore only needs the robot's initial state, a control
schedule, and one displacement sequence per human.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

ROBOT_DIM = 4
CONTROL_DIM = 2

# Input matrix of the double integrator. It does not depend on the state,
# but input_matrix(x) keeps the affine-control structure explicit.
_INPUT_MATRIX = np.vstack([np.zeros((2, 2)), np.eye(2)])
_INPUT_MATRIX.setflags(write=False)


def _as_float_array(value, shape, name: str) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.shape != shape:
        raise ValueError(f"{name} must have shape {shape}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


@dataclass(frozen=True)
class TimeGrid:
    """Uniform two-scale planning grid.

    Attributes
    ----------
    dt_control : float
        Fine step used for robot integration and cost quadrature.
    dt_observe : float
        Coarse step at which human positions jump; must be an integer
        multiple of ``dt_control``.
    horizon_steps : int
        Number of observation steps in the planning horizon.
    """

    dt_control: float = 0.02
    dt_observe: float = 0.4
    horizon_steps: int = 12

    def __post_init__(self):
        if not (self.dt_control > 0.0 and self.dt_observe > 0.0):
            raise ValueError("time steps must be positive")
        ratio = self.dt_observe / self.dt_control
        if abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 1:
            raise ValueError("dt_observe must be a positive integer multiple of dt_control")
        if self.horizon_steps < 1:
            raise ValueError("horizon_steps must be at least 1")

    @property
    def substeps(self) -> int:
        """Control cells per observation interval."""
        return round(self.dt_observe / self.dt_control)

    @property
    def n_cells(self) -> int:
        """Control cells over the whole horizon."""
        return self.horizon_steps * self.substeps

    @property
    def horizon(self) -> float:
        return self.horizon_steps * self.dt_observe

    def times(self, t0: float) -> np.ndarray:
        """Grid node times t0 .. t0 + horizon, inclusive."""
        return t0 + self.dt_control * np.arange(self.n_cells + 1)

    def interval_of(self, cell: int) -> int:
        """Observation interval containing control cell ``cell``."""
        return cell // self.substeps


@dataclass(frozen=True)
class JointState:
    """Snapshot of the scene: time, robot state and human positions.

    The robot state is ``[px, py, vx, vy]``; humans are an (N, 2) array of
    positions. N may be zero.
    """

    t: float
    robot: np.ndarray
    humans: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "robot", _as_float_array(self.robot, (ROBOT_DIM,), "robot"))
        humans = np.asarray(self.humans, dtype=float)
        if humans.size == 0:
            humans = humans.reshape(0, 2)
        if humans.ndim != 2 or humans.shape[1] != 2:
            raise ValueError(f"humans must have shape (N, 2), got {humans.shape}")
        if not np.all(np.isfinite(humans)):
            raise ValueError("humans contains non-finite entries")
        object.__setattr__(self, "humans", humans)
        if not np.isfinite(self.t):
            raise ValueError("t must be finite")

    @property
    def n_humans(self) -> int:
        return self.humans.shape[0]


@dataclass(frozen=True)
class ControlSchedule:
    """Piecewise-constant acceleration input on a uniform grid.

    Cell ``k`` holds ``inputs[k]`` on the half-open interval
    ``[t0 + k dt, t0 + (k + 1) dt)``. Every input must satisfy the
    norm bound ``u_max``.
    """

    t0: float
    dt: float
    inputs: np.ndarray
    u_max: float

    def __post_init__(self):
        inputs = np.asarray(self.inputs, dtype=float)
        if inputs.ndim != 2 or inputs.shape[1] != CONTROL_DIM or inputs.shape[0] < 1:
            raise ValueError(f"inputs must have shape (K, 2), got {inputs.shape}")
        if not np.all(np.isfinite(inputs)):
            raise ValueError("inputs contains non-finite entries")
        if self.dt <= 0.0 or not np.isfinite(self.dt):
            raise ValueError("dt must be positive and finite")
        if self.u_max <= 0.0:
            raise ValueError("u_max must be positive")
        norms = np.linalg.norm(inputs, axis=1)
        # small slack so that saturated actions survive round-trips
        if np.any(norms > self.u_max * (1.0 + 1e-9)):
            raise ValueError("input norm exceeds u_max")
        object.__setattr__(self, "inputs", inputs)

    @property
    def n_cells(self) -> int:
        return self.inputs.shape[0]

    @property
    def t_end(self) -> float:
        return self.t0 + self.n_cells * self.dt

    def cell_index(self, t: float) -> int:
        """Cell containing time ``t``, clipped to the schedule support."""
        idx = int(np.floor((t - self.t0) / self.dt + 1e-9))
        return min(max(idx, 0), self.n_cells - 1)

    def value_at(self, t: float) -> np.ndarray:
        return self.inputs[self.cell_index(t)]

    def shifted(self, t_new: float) -> "ControlSchedule":
        """Advance the schedule start to ``t_new``, zero-padding the tail.

        ``t_new`` must lie a whole number of cells after ``t0``.
        """
        ratio = (t_new - self.t0) / self.dt
        n = round(ratio)
        if abs(ratio - n) > 1e-6 or n < 0:
            raise ValueError("t_new must be a whole number of cells after t0")
        if n == 0:
            return self
        kept = self.inputs[n:]
        padded = np.vstack([kept, np.zeros((min(n, self.n_cells), CONTROL_DIM))])
        return ControlSchedule(t_new, self.dt, padded, self.u_max)


def zero_schedule(t0: float, grid: TimeGrid, u_max: float) -> ControlSchedule:
    return ControlSchedule(t0, grid.dt_control, np.zeros((grid.n_cells, CONTROL_DIM)), u_max)


def drift(x: np.ndarray) -> np.ndarray:
    """Uncontrolled part of the robot vector field, f(x) = [vx, vy, 0, 0]."""
    x = np.asarray(x, dtype=float)
    return np.array([x[2], x[3], 0.0, 0.0])


def input_matrix(x: np.ndarray) -> np.ndarray:
    """Control Jacobian H(x). Constant for the double integrator."""
    return _INPUT_MATRIX


def euler_step(x: np.ndarray, u: np.ndarray, dt: float) -> np.ndarray:
    """One explicit Euler step of the robot dynamics."""
    x = _as_float_array(x, (ROBOT_DIM,), "x")
    u = _as_float_array(u, (CONTROL_DIM,), "u")
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    return x + dt * (drift(x) + input_matrix(x) @ u)


def integrate_robot(x0: np.ndarray, inputs: np.ndarray, dt: float) -> np.ndarray:
    """Integrate the robot over a whole schedule.

    Returns an (K + 1, 4) array of states at the grid nodes; row 0 is x0.
    Arithmetic matches repeated euler_step application exactly.
    """
    x0 = _as_float_array(x0, (ROBOT_DIM,), "x0")
    inputs = np.asarray(inputs, dtype=float)
    out = np.empty((inputs.shape[0] + 1, ROBOT_DIM))
    out[0] = x0
    pos, vel = x0[:2], x0[2:]
    for k, u in enumerate(inputs):
        pos = pos + dt * vel
        vel = vel + dt * u
        out[k + 1, :2] = pos
        out[k + 1, 2:] = vel
    return out


def apply_human_transitions(state: JointState, displacements: np.ndarray) -> JointState:
    """Jump every human by its displacement; robot and time are untouched."""
    disp = np.asarray(displacements, dtype=float)
    if disp.size == 0:
        disp = disp.reshape(0, 2)
    if disp.shape != state.humans.shape:
        raise ValueError(
            f"displacements shape {disp.shape} does not match humans {state.humans.shape}"
        )
    return JointState(state.t, state.robot, state.humans + disp)


def human_position_table(humans0: np.ndarray, displacements: np.ndarray) -> np.ndarray:
    """Cumulative human positions over the horizon.

    Parameters
    ----------
    humans0 : (N, 2) initial positions.
    displacements : (N, T, 2) per-interval jumps.

    Returns
    -------
    (T + 1, N, 2) positions, row k valid on observation interval k.
    """
    humans0 = np.asarray(humans0, dtype=float)
    disp = np.asarray(displacements, dtype=float)
    n = humans0.shape[0]
    if disp.ndim != 3 or disp.shape[0] != n or disp.shape[2] != 2:
        raise ValueError(f"displacements must have shape (N, T, 2), got {disp.shape}")
    steps = np.swapaxes(disp, 0, 1)  # (T, N, 2)
    table = np.empty((steps.shape[0] + 1, n, 2))
    table[0] = humans0
    np.cumsum(steps, axis=0, out=table[1:])
    table[1:] += humans0
    return table


@dataclass(frozen=True)
class Trajectory:
    """Joint rollout on the planning grid.

    ``robot`` holds grid-node states, ``human_table`` holds per-interval
    human positions (see human_position_table). Node g lives in
    observation interval g // substeps.
    """

    times: np.ndarray
    robot: np.ndarray
    human_table: np.ndarray
    grid: TimeGrid = field(repr=False)

    @property
    def n_nodes(self) -> int:
        return self.robot.shape[0]

    def humans_at(self, node: int) -> np.ndarray:
        interval = min(node // self.grid.substeps, self.human_table.shape[0] - 1)
        return self.human_table[interval]

    def state_at(self, node: int) -> JointState:
        return JointState(self.times[node], self.robot[node], self.humans_at(node))


def rollout(
    state: JointState,
    schedule: ControlSchedule,
    displacements: np.ndarray,
    grid: TimeGrid,
) -> Trajectory:
    """Simulate robot and humans over the planning horizon.

    The schedule must start at ``state.t`` on the grid's control step and
    cover at least the horizon. ``displacements`` is (N, T, 2) with one jump
    per human per observation interval.
    """
    if abs(schedule.t0 - state.t) > 1e-9:
        raise ValueError("schedule must start at the state time")
    if abs(schedule.dt - grid.dt_control) > 1e-12:
        raise ValueError("schedule step does not match the grid")
    if schedule.n_cells < grid.n_cells:
        raise ValueError("schedule does not cover the planning horizon")
    disp = np.asarray(displacements, dtype=float)
    if state.n_humans == 0:
        disp = np.zeros((0, grid.horizon_steps, 2))
    if disp.shape != (state.n_humans, grid.horizon_steps, 2):
        raise ValueError(
            "displacements must have shape "
            f"({state.n_humans}, {grid.horizon_steps}, 2), got {disp.shape}"
        )
    robot = integrate_robot(state.robot, schedule.inputs[: grid.n_cells], grid.dt_control)
    table = human_position_table(state.humans, disp)
    return Trajectory(grid.times(state.t), robot, table, grid)
