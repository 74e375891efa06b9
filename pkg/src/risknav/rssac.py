"""Sampling-based receding-horizon controller with entropic risk weighting.

Each cycle shifts the previous schedule, picks the best of 17 nominal
candidates by Monte Carlo risk evaluation, backward-integrates one
adjoint trajectory per human sample, and descends the mode insertion
gradient of the entropic risk: the risk-weighted adjoint gives an
optimal control value v* and insertion time tau*, and a short duration
epsilon* is chosen by re-simulating the perturbed schedule on the same
samples. The returned schedule never differs from the previous one
before t0 + t_calc, which is the part executed while computing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _kernels
from .cost import CostParams, ReferenceTrajectory, running_cost_state_gradient, terminal_cost_state_gradient
from .dynamics import (
    ControlSchedule,
    JointState,
    TimeGrid,
    Trajectory,
    input_matrix,
    zero_schedule,
)
from .risk import entropic_risk_rows, risk_weights, weighted_adjoint

_DEFAULT_EPSILONS = (0.0, 1e-3, 2e-3, 4e-3, 8e-3, 1.6e-2, 2e-2, 4e-2, 8e-2)


@dataclass(frozen=True)
class RssacConfig:
    """Controller parameters.

    sigma is the risk sensitivity (0 = risk neutral), n_samples the Monte
    Carlo sample count, t_calc the computation budget (the returned
    schedule is frozen on [t0, t0 + t_calc]), replan_interval the cycle
    period, epsilon_set the candidate perturbation durations, and the
    candidate_scales x n_headings grid plus keep-previous forms the
    nominal candidate set.
    """

    sigma: float = 0.0
    n_samples: int = 30
    t_calc: float = 0.1
    replan_interval: float = 0.1
    u_max: float = 5.0
    epsilon_set: tuple = _DEFAULT_EPSILONS
    candidate_scales: tuple = (0.4, 0.8)
    n_headings: int = 8
    perturbation_enabled: bool = True

    def __post_init__(self):
        if not np.isfinite(self.sigma) or self.sigma < 0.0:
            raise ValueError("sigma must be finite and nonnegative")
        if self.n_samples < 1:
            raise ValueError("n_samples must be at least 1")
        if not (0.0 < self.t_calc <= self.replan_interval):
            raise ValueError("need 0 < t_calc <= replan_interval")
        if self.u_max <= 0.0:
            raise ValueError("u_max must be positive")
        eps = tuple(float(e) for e in self.epsilon_set)
        if not eps or eps[0] != 0.0 or any(b <= a for a, b in zip(eps, eps[1:])):
            raise ValueError("epsilon_set must be sorted, start at 0 and be strictly increasing")
        object.__setattr__(self, "epsilon_set", eps)
        scales = tuple(float(s) for s in self.candidate_scales)
        if any(not 0.0 < s <= 1.0 for s in scales):
            raise ValueError("candidate_scales must lie in (0, 1]")
        object.__setattr__(self, "candidate_scales", scales)
        if self.n_headings < 1:
            raise ValueError("n_headings must be at least 1")

    @property
    def n_candidates(self) -> int:
        return 1 + len(self.candidate_scales) * self.n_headings


@dataclass(frozen=True)
class Perturbation:
    """A single schedule edit: insert control v on the window (tau - epsilon, tau]."""

    v: np.ndarray
    tau: float
    epsilon: float

    def __post_init__(self):
        v = np.asarray(self.v, dtype=float).reshape(2)
        object.__setattr__(self, "v", v)
        if self.epsilon < 0.0:
            raise ValueError("epsilon must be nonnegative")


@dataclass
class StepInfo:
    """Diagnostics of one controller cycle."""

    nominal_risks: Optional[np.ndarray] = None
    chosen_candidate: int = 0
    sample_costs: Optional[np.ndarray] = None
    mig: float = 0.0
    perturbation: Optional[Perturbation] = None
    epsilon_risks: Optional[np.ndarray] = None
    fallback: bool = False
    error: Optional[str] = None
    wall_time: float = 0.0


def adjoint_rollout(traj: Trajectory, ref: ReferenceTrajectory, params: CostParams) -> np.ndarray:
    """Backward costate recursion along one joint rollout.

    The boundary value is the terminal cost gradient; stepping backward,
    node g adds dt times the running-cost state gradient at node g plus
    the drift Jacobian applied to the next costate. The result is the
    exact gradient of the discretized total cost with respect to the
    node states, so its velocity components drive the insertion gradient.
    Returns a (G+1, 4) array.
    """
    n_nodes = traj.n_nodes
    dt = traj.grid.dt_control
    ref_states = ref.states_at(traj.times)
    rho = np.empty((n_nodes, 4))
    rho[-1] = terminal_cost_state_gradient(traj.state_at(n_nodes - 1), ref_states[-1], params)
    for g in range(n_nodes - 2, -1, -1):
        grad = running_cost_state_gradient(traj.state_at(g), None, ref_states[g], params)
        nxt = rho[g + 1]
        # (df/dx)^T rho maps position costates into the velocity slots
        rho[g, 0] = nxt[0] + dt * grad[0]
        rho[g, 1] = nxt[1] + dt * grad[1]
        rho[g, 2] = nxt[2] + dt * (grad[2] + nxt[0])
        rho[g, 3] = nxt[3] + dt * (grad[3] + nxt[1])
    return rho


def mode_insertion_gradient(v, u_now, rho_now, x_now, control_weight: float) -> float:
    """Sensitivity of the cost to inserting control v at the costate's time.

    Equals 0.5 r (|v|^2 - |u|^2) + rho^T H(x) (v - u); exactly zero when
    v equals the nominal control.
    """
    v = np.asarray(v, dtype=float)
    u_now = np.asarray(u_now, dtype=float)
    coupling = (np.asarray(rho_now, dtype=float) @ input_matrix(x_now)) @ (v - u_now)
    return float(
        (0.5 * control_weight * (v @ v) - 0.5 * control_weight * (u_now @ u_now)) + coupling
    )


def optimal_action(rho_now, x_now, u_now, control_weight: float, u_max: float):
    """Minimizer of the insertion gradient over the control disk.

    The unconstrained minimizer -H(x)^T rho / r is radially projected
    onto the |v| <= u_max ball. Returns (v*, insertion gradient at v*).
    """
    if control_weight <= 0.0:
        raise ValueError("control_weight must be positive")
    rho_now = np.asarray(rho_now, dtype=float)
    v = -(input_matrix(x_now).T @ rho_now) / control_weight
    norm = float(np.linalg.norm(v))
    if norm > u_max:
        v = v * (u_max / norm)
    return v, mode_insertion_gradient(v, u_now, rho_now, x_now, control_weight)


def optimize_perturbation(
    rho_weighted: np.ndarray,
    schedule: ControlSchedule,
    config: RssacConfig,
    control_weight: float,
):
    """Best (v*, tau*) over all admissible grid insertion times.

    rho_weighted is the risk-weighted adjoint on the schedule's grid
    nodes; for the double integrator the contraction with H(x) selects
    its velocity components, so no states are needed. tau ranges over
    grid nodes in (t0 + t_calc, t0 + horizon); the control in the cell
    ending at tau is the one being replaced. Ties take the smallest tau.
    Returns (v*, tau*, mig*).
    """
    if control_weight <= 0.0:
        raise ValueError("control_weight must be positive")
    rho_weighted = np.asarray(rho_weighted, dtype=float)
    lo, hi = _tau_bounds_for_schedule(config, schedule, rho_weighted.shape[0])
    idx = np.arange(lo, hi + 1)
    coupling_vec = rho_weighted[idx, 2:]
    u_cells = schedule.inputs[idx - 1]
    v = -coupling_vec / control_weight
    norms = np.linalg.norm(v, axis=1)
    over = norms > config.u_max
    if np.any(over):
        v = v.copy()
        v[over] *= (config.u_max / norms[over])[:, None]
    dv = v - u_cells
    migs = (
        0.5 * control_weight * np.einsum("ki,ki->k", v, v)
        - 0.5 * control_weight * np.einsum("ki,ki->k", u_cells, u_cells)
    ) + np.einsum("ki,ki->k", coupling_vec, dv)
    best = int(np.argmin(migs))
    tau = schedule.t0 + idx[best] * schedule.dt
    return v[best], float(tau), float(migs[best])


def _tau_bounds_for_schedule(config: RssacConfig, schedule: ControlSchedule, n_nodes: int):
    lo = int(math.floor(config.t_calc / schedule.dt + 1e-9)) + 1
    hi = min(schedule.n_cells, n_nodes - 1) - 1
    if lo > hi:
        raise ValueError("no admissible insertion times: t_calc too close to the horizon")
    return lo, hi


def perturb_schedule(
    schedule: ControlSchedule,
    v,
    tau: float,
    epsilon: float,
    t_floor: Optional[float] = None,
) -> ControlSchedule:
    """Insert control v on the window (tau - epsilon, tau].

    Whole cells inside the window get v; a leading partial cell is moved
    toward v by the covered fraction, preserving the first-order effect
    of sub-cell durations. Cells before ``t_floor`` are never modified.
    epsilon = 0 returns the schedule unchanged.
    """
    if epsilon == 0.0:
        return schedule
    if epsilon < 0.0:
        raise ValueError("epsilon must be nonnegative")
    v = np.asarray(v, dtype=float).reshape(2)
    if np.linalg.norm(v) > schedule.u_max * (1.0 + 1e-9):
        raise ValueError("perturbation control exceeds u_max")
    dt = schedule.dt
    pos = (tau - schedule.t0) / dt
    g_tau = round(pos)
    if abs(pos - g_tau) > 1e-6 or not 1 <= g_tau <= schedule.n_cells:
        raise ValueError("tau must be a grid node inside the schedule")
    if epsilon > tau - schedule.t0 + 1e-12:
        raise ValueError("epsilon reaches before the schedule start")
    g_lo = 0
    if t_floor is not None:
        g_lo = max(0, int(math.ceil((t_floor - schedule.t0) / dt - 1e-9)))
    ratio = epsilon / dt
    n_full = int(math.floor(ratio + 1e-9))
    fraction = ratio - n_full
    if fraction < 1e-9:
        fraction = 0.0
    inputs = schedule.inputs.copy()
    start = max(g_tau - n_full, g_lo)
    inputs[start:g_tau] = v
    partial = g_tau - n_full - 1
    if fraction > 0.0 and partial >= g_lo:
        inputs[partial] = inputs[partial] + fraction * (v - inputs[partial])
    return ControlSchedule(schedule.t0, dt, inputs, schedule.u_max)


def _ref_states_on_grid(ref: ReferenceTrajectory, t0: float, grid: TimeGrid) -> np.ndarray:
    return ref.states_at(grid.times(t0))


def nominal_candidates(u_shifted: ControlSchedule, config: RssacConfig, grid: TimeGrid) -> np.ndarray:
    """Stack of candidate input arrays: keep-previous plus the constant splices.

    Candidate k > 0 overwrites the window [t_calc, t_calc + dt_observe)
    with a constant acceleration of magnitude scale * u_max; candidate 0
    is the shifted previous schedule unchanged.
    """
    base = u_shifted.inputs[: grid.n_cells]
    w0 = round(config.t_calc / grid.dt_control)
    w1 = min(w0 + grid.substeps, grid.n_cells)
    cands = np.repeat(base[None, :, :], config.n_candidates, axis=0)
    k = 1
    for scale in config.candidate_scales:
        mag = scale * config.u_max
        for h in range(config.n_headings):
            theta = 2.0 * np.pi * h / config.n_headings
            cands[k, w0:w1, 0] = mag * np.cos(theta)
            cands[k, w0:w1, 1] = mag * np.sin(theta)
            k += 1
    return cands


def nominal_search(
    u_shifted: ControlSchedule,
    state: JointState,
    human_table: np.ndarray,
    ref_states: np.ndarray,
    params: CostParams,
    config: RssacConfig,
    grid: TimeGrid,
):
    """Pick the lowest-risk nominal candidate under common random numbers.

    human_table is the (M, T+1, N, 2) cumulative-position table shared by
    all candidates. Returns (schedule, winner's per-sample costs, risks).
    Ties go to the first minimizer, which is the keep-previous candidate
    when it participates in the tie.
    """
    cands = nominal_candidates(u_shifted, config, grid)
    costs = _kernels.batch_schedule_costs(
        state.robot, cands, human_table, ref_states, params.track_weight,
        params.control_weight, params.collision_peak, params.collision_bandwidth,
        params.terminal_weight, grid.dt_control, grid.substeps,
    )
    risks = entropic_risk_rows(costs, config.sigma)
    best = int(np.argmin(risks))
    schedule = ControlSchedule(u_shifted.t0, grid.dt_control, cands[best], u_shifted.u_max)
    return schedule, costs[best], risks, best


def epsilon_search(
    schedule: ControlSchedule,
    v,
    tau: float,
    state: JointState,
    human_table: np.ndarray,
    ref_states: np.ndarray,
    params: CostParams,
    config: RssacConfig,
    grid: TimeGrid,
    t_floor: Optional[float] = None,
    nominal_costs: Optional[np.ndarray] = None,
):
    """Pick the perturbation duration by re-simulating each candidate.

    Every epsilon in the config's set is applied to the schedule and
    evaluated on the same human samples; returns (epsilon*, risks) with
    ties resolved toward the smallest duration. ``nominal_costs``, when
    given, stands in for the epsilon = 0 candidate (the perturbed
    schedule is then the unmodified nominal, so its costs are identical).
    """
    eps_set = config.epsilon_set
    reuse = nominal_costs is not None and eps_set[0] == 0.0
    evaluated = eps_set[1:] if reuse else eps_set
    if not evaluated:
        risks = entropic_risk_rows(np.asarray(nominal_costs, dtype=float)[None, :], config.sigma)
        return 0.0, risks
    stacked = np.stack([
        perturb_schedule(schedule, v, tau, eps, t_floor).inputs[: grid.n_cells]
        for eps in evaluated
    ])
    costs = _kernels.batch_schedule_costs(
        state.robot, stacked, human_table, ref_states, params.track_weight,
        params.control_weight, params.collision_peak, params.collision_bandwidth,
        params.terminal_weight, grid.dt_control, grid.substeps,
    )
    if reuse:
        costs = np.vstack([np.asarray(nominal_costs, dtype=float)[None, :], costs])
    risks = entropic_risk_rows(costs, config.sigma)
    best = int(np.argmin(risks))
    return float(eps_set[best]), risks


def _conditional_nominal_search(
    u_shifted: ControlSchedule,
    state: JointState,
    sampler,
    seed: int,
    ref_states: np.ndarray,
    params: CostParams,
    config: RssacConfig,
    grid: TimeGrid,
):
    """Nominal search for predictors that condition on the robot's future.

    Each candidate is evaluated on samples drawn with that candidate's
    planned trajectory as conditioning; the same seed keeps the draws
    common where the predictor allows it.
    """
    cands = nominal_candidates(u_shifted, config, grid)
    risks = np.empty(cands.shape[0])
    all_costs = []
    tables = []
    for k in range(cands.shape[0]):
        planned = _kernels.robot_rollout(state.robot, cands[k], grid.dt_control)
        samples = sampler.sample(config.n_samples, grid.horizon_steps, seed, conditioning=planned)
        table = human_position_tables(state.humans, samples.displacements)
        costs = _kernels.batch_schedule_costs(
            state.robot, cands[k][None], table, ref_states, params.track_weight,
            params.control_weight, params.collision_peak, params.collision_bandwidth,
            params.terminal_weight, grid.dt_control, grid.substeps,
        )[0]
        risks[k] = entropic_risk_rows(costs[None], config.sigma)[0]
        all_costs.append(costs)
        tables.append(table)
    best = int(np.argmin(risks))
    schedule = ControlSchedule(u_shifted.t0, grid.dt_control, cands[best], u_shifted.u_max)
    return schedule, all_costs[best], risks, best, tables[best]


def human_position_tables(humans0: np.ndarray, displacements: np.ndarray) -> np.ndarray:
    """Batched cumulative human positions: (M, N, T, 2) jumps -> (M, T+1, N, 2)."""
    humans0 = np.asarray(humans0, dtype=float)
    disp = np.asarray(displacements, dtype=float)
    n_samples, n_humans, horizon = disp.shape[:3]
    steps = np.swapaxes(disp, 1, 2)  # (M, T, N, 2)
    table = np.empty((n_samples, horizon + 1, n_humans, 2))
    table[:, 0] = humans0
    np.cumsum(steps, axis=1, out=table[:, 1:])
    table[:, 1:] += humans0
    return table


def rssac_step(
    state: JointState,
    ref: ReferenceTrajectory,
    u_prev: ControlSchedule,
    sampler,
    params: CostParams,
    config: RssacConfig,
    grid: TimeGrid,
    seed: int,
):
    """One full planning cycle; returns (schedule, StepInfo).

    The previous schedule is shifted to the current time and zero-padded,
    M human futures are sampled, the nominal search and the risk-weighted
    perturbation run on those common samples, and the perturbed schedule
    is returned. Any failure after the shift falls back to the shifted
    previous schedule with the error recorded in the info.
    """
    u_shift = u_prev.shifted(state.t)
    info = StepInfo()
    try:
        ref_states = _ref_states_on_grid(ref, state.t, grid)
        if getattr(sampler, "robot_future_conditional", False):
            u_nom, costs, risks, best, human_table = _conditional_nominal_search(
                u_shift, state, sampler, seed, ref_states, params, config, grid)
        else:
            samples = sampler.sample(config.n_samples, grid.horizon_steps, seed)
            human_table = human_position_tables(state.humans, samples.displacements)
            u_nom, costs, risks, best = nominal_search(
                u_shift, state, human_table, ref_states, params, config, grid)
        info.nominal_risks = risks
        info.chosen_candidate = best
        info.sample_costs = costs
        if not config.perturbation_enabled:
            return u_nom, info

        robot = _kernels.robot_rollout(state.robot, u_nom.inputs[: grid.n_cells], grid.dt_control)
        rho = _kernels.batch_adjoint(
            robot, human_table, ref_states, params.track_weight, params.collision_peak,
            params.collision_bandwidth, params.terminal_weight, grid.dt_control, grid.substeps,
        )
        weights = risk_weights(costs, config.sigma)
        rho_weighted = weighted_adjoint(weights, rho)
        v, tau, mig = optimize_perturbation(rho_weighted, u_nom, config, params.control_weight)
        info.mig = mig
        t_floor = state.t + config.t_calc
        if mig < 0.0:
            eps, eps_risks = epsilon_search(
                u_nom, v, tau, state, human_table, ref_states, params, config, grid,
                t_floor, nominal_costs=costs)
            info.epsilon_risks = eps_risks
        else:
            eps = 0.0
        info.perturbation = Perturbation(v, tau, eps)
        return perturb_schedule(u_nom, v, tau, eps, t_floor), info
    except Exception as exc:  # safety default: keep flying the old plan
        info.fallback = True
        info.error = repr(exc)
        return u_shift, info


class RssacController:
    """Stateful wrapper over rssac_step for the episode engine.

    Remembers the previously returned schedule between cycles; reset()
    clears it (the first cycle then shifts a zero schedule).
    """

    def __init__(self, params: CostParams, config: RssacConfig, grid: TimeGrid):
        for name, value in (("t_calc", config.t_calc), ("replan_interval", config.replan_interval)):
            ratio = value / grid.dt_control
            if abs(ratio - round(ratio)) > 1e-9:
                raise ValueError(f"{name} must be a multiple of dt_control")
        self.params = params
        self.config = config
        self.grid = grid
        self._u_prev: Optional[ControlSchedule] = None

    @property
    def replan_interval(self) -> float:
        return self.config.replan_interval

    def reset(self) -> None:
        self._u_prev = None

    def plan(self, state: JointState, ref: ReferenceTrajectory, sampler, seed: int):
        if self._u_prev is None:
            self._u_prev = zero_schedule(state.t, self.grid, self.config.u_max)
        schedule, info = rssac_step(
            state, ref, self._u_prev, sampler, self.params, self.config, self.grid, seed)
        self._u_prev = schedule
        return schedule, info
