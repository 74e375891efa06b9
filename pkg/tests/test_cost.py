import math

import numpy as np
import pytest

from risknav.cost import (
    CostParams,
    ReferenceTrajectory,
    collision_cost,
    collision_cost_gradient,
    running_cost,
    running_cost_state_gradient,
    terminal_cost,
    terminal_cost_state_gradient,
    total_cost,
)
from risknav.dynamics import ControlSchedule, JointState, TimeGrid, rollout


def _state(robot, humans=()):
    return JointState(0.0, robot, list(humans))


def test_params_defaults_and_validation():
    p = CostParams()
    np.testing.assert_array_equal(np.diag(p.track_weight), [0.5, 0.5, 0.0, 0.0])
    assert p.control_weight == 0.2
    assert p.collision_peak == 100.0
    assert p.collision_bandwidth == 0.2
    assert p.terminal_weight == 0.1
    with pytest.raises(ValueError):
        CostParams(track_weight=np.ones((3, 3)))
    with pytest.raises(ValueError):
        CostParams(track_weight=[[0, 1, 0, 0]] + [[0] * 4] * 3)  # asymmetric
    with pytest.raises(ValueError):
        CostParams(track_weight=-np.eye(4))
    with pytest.raises(ValueError):
        CostParams(control_weight=0.0)
    with pytest.raises(ValueError):
        CostParams(collision_bandwidth=0.0)
    with pytest.raises(ValueError):
        CostParams(terminal_weight=-0.1)


def test_collision_cost_point_values():
    p = CostParams()
    assert collision_cost([1.0, 2.0], [[1.0, 2.0]], p) == pytest.approx(100.0)
    # distance sqrt(2*lambda) puts the exponent at exactly -1
    d = math.sqrt(2.0 * p.collision_bandwidth)
    assert collision_cost([0.0, 0.0], [[d, 0.0]], p) == pytest.approx(100.0 * math.exp(-1.0))
    assert collision_cost([0.0, 0.0], [[d, 0.0]], p) == pytest.approx(36.7879441, abs=1e-6)
    assert collision_cost([5.0, 5.0], [], p) == 0.0


def test_collision_cost_sum_matches_scalar_formula():
    p = CostParams(collision_peak=3.5, collision_bandwidth=0.7)
    rng = np.random.default_rng(0)
    pos = rng.normal(size=2)
    humans = rng.normal(size=(6, 2))
    expected = sum(
        3.5 * math.exp(-((pos[0] - h[0]) ** 2 + (pos[1] - h[1]) ** 2) / (2 * 0.7))
        for h in humans
    )
    assert collision_cost(pos, humans, p) == pytest.approx(expected, rel=1e-12)


def test_collision_gradient_symmetry_and_fd():
    p = CostParams()
    np.testing.assert_array_equal(collision_cost_gradient([1.0, 1.0], [[1.0, 1.0]], p), [0.0, 0.0])
    rng = np.random.default_rng(1)
    h = 1e-6
    for _ in range(100):
        pos = rng.uniform(-3, 3, size=2)
        humans = rng.uniform(-3, 3, size=(rng.integers(1, 5), 2))
        grad = collision_cost_gradient(pos, humans, p)
        for ax in range(2):
            dp = np.zeros(2)
            dp[ax] = h
            fd = (collision_cost(pos + dp, humans, p) - collision_cost(pos - dp, humans, p)) / (2 * h)
            assert abs(grad[ax] - fd) <= 1e-6 * max(1.0, abs(fd))


def test_collision_gradient_norm_bound():
    # single-bump gradient peaks at distance sqrt(lambda)
    p = CostParams()
    bound = lambda n: n * p.collision_peak * math.sqrt(1.0 / (p.collision_bandwidth * math.e))
    rng = np.random.default_rng(2)
    for _ in range(200):
        n = int(rng.integers(1, 6))
        pos = rng.uniform(-2, 2, size=2)
        humans = rng.uniform(-2, 2, size=(n, 2))
        assert np.linalg.norm(collision_cost_gradient(pos, humans, p)) <= bound(n) * (1 + 1e-12)


def test_running_cost_point_values():
    p = CostParams()
    r = np.array([1.0, 2.0, 0.5, -0.5])
    assert running_cost(_state(r), [0.0, 0.0], r, p) == 0.0
    assert running_cost(_state(r + [1, 0, 0, 0]), [0, 0], r, p) == pytest.approx(0.25)
    assert running_cost(_state(r), [1.0, 1.0], r, p) == pytest.approx(0.2)


def test_terminal_cost_point_values():
    p = CostParams()
    r = np.zeros(4)
    assert terminal_cost(_state(r), r, p) == 0.0
    assert terminal_cost(_state([1, 0, 0, 0]), r, p) == pytest.approx(0.025)
    p0 = CostParams(terminal_weight=0.0)
    assert terminal_cost(_state([3, -2, 1, 1], [[0.1, 0.2]]), r, p0) == 0.0


def test_state_gradients_match_finite_differences():
    p = CostParams(track_weight=np.diag([0.5, 0.5, 0.1, 0.1]))
    rng = np.random.default_rng(3)
    h = 1e-6
    for _ in range(100):
        x = rng.uniform(-2, 2, size=4)
        ref = rng.uniform(-2, 2, size=4)
        humans = rng.uniform(-2, 2, size=(2, 2))
        u = rng.uniform(-1, 1, size=2)
        grad_r = running_cost_state_gradient(_state(x, humans), u, ref, p)
        grad_t = terminal_cost_state_gradient(_state(x, humans), ref, p)
        for ax in range(4):
            dx = np.zeros(4)
            dx[ax] = h
            fd_r = (running_cost(_state(x + dx, humans), u, ref, p)
                    - running_cost(_state(x - dx, humans), u, ref, p)) / (2 * h)
            fd_t = (terminal_cost(_state(x + dx, humans), ref, p)
                    - terminal_cost(_state(x - dx, humans), ref, p)) / (2 * h)
            assert abs(grad_r[ax] - fd_r) <= 1e-6 * max(1.0, abs(fd_r))
            assert abs(grad_t[ax] - fd_t) <= 1e-6 * max(1.0, abs(fd_t))


def test_gradient_velocity_components_zero_under_default_weights():
    p = CostParams()
    g = running_cost_state_gradient(_state([1, 2, 3, 4], [[0, 0]]), None, np.zeros(4), p)
    np.testing.assert_array_equal(g[2:], [0.0, 0.0])


def _straight_rollout(grid, state, inputs, disp):
    sched = ControlSchedule(state.t, grid.dt_control, inputs, u_max=1e6)
    return rollout(state, sched, disp, grid), sched


def test_total_cost_zero_on_reference():
    grid = TimeGrid()
    ref = ReferenceTrajectory([0.0, 0.0], [0.0, 0.0], 0.0)
    state = JointState(0.0, [0, 0, 0, 0], [])
    traj, sched = _straight_rollout(grid, state, np.zeros((grid.n_cells, 2)),
                                    np.zeros((0, grid.horizon_steps, 2)))
    assert total_cost(traj, sched, ref, CostParams()) == 0.0


def test_total_cost_constant_running_cost():
    # robot at rest 1 m off a resting reference: constant tracking cost 0.25
    grid = TimeGrid()
    ref = ReferenceTrajectory([1.0, 0.0], [1.0, 0.0], 0.0)
    state = JointState(0.0, [0, 0, 0, 0], [])
    traj, sched = _straight_rollout(grid, state, np.zeros((grid.n_cells, 2)),
                                    np.zeros((0, grid.horizon_steps, 2)))
    p = CostParams(terminal_weight=0.0)
    assert total_cost(traj, sched, ref, p) == pytest.approx(4.8 * 0.25, abs=1e-9)


def test_total_cost_matches_independent_quadrature():
    # re-derive J with whole-array numpy expressions, no shared helpers
    grid = TimeGrid(dt_control=0.05, dt_observe=0.25, horizon_steps=6)
    rng = np.random.default_rng(4)
    state = JointState(0.0, rng.normal(size=4), rng.normal(size=(3, 2)) * 2)
    inputs = rng.normal(size=(grid.n_cells, 2))
    disp = rng.normal(size=(3, grid.horizon_steps, 2)) * 0.3
    traj, sched = _straight_rollout(grid, state, inputs, disp)
    ref = ReferenceTrajectory([0.0, 0.0], [2.0, 1.0], 1.3)
    p = CostParams(track_weight=np.diag([0.5, 0.5, 0.05, 0.05]))

    times = traj.times
    refs = ref.states_at(times)
    err = traj.robot - refs
    track = 0.5 * np.einsum("gi,ij,gj->g", err, p.track_weight, err)
    ctrl = 0.5 * p.control_weight * np.einsum("gi,gi->g", inputs, inputs)
    humans = np.stack([traj.humans_at(g) for g in range(traj.n_nodes)])
    diff = traj.robot[:, None, :2] - humans
    col = p.collision_peak * np.exp(
        -np.einsum("gni,gni->gn", diff, diff) / (2 * p.collision_bandwidth)).sum(axis=1)
    expected = grid.dt_control * np.sum(track[:-1] + ctrl + col[:-1])
    expected += p.terminal_weight * (track[-1] + col[-1])
    assert total_cost(traj, sched, ref, p) == pytest.approx(expected, rel=1e-12)


def test_total_cost_refines_with_half_step():
    # halving dt_c changes the quadrature by O(dt_c)
    state = JointState(0.0, [0.0, -1.0, 1.0, 0.5], [[1.0, 0.5]])
    ref = ReferenceTrajectory([0.0, -1.0], [3.0, 1.0], 1.0)
    p = CostParams()
    vals = {}
    for dt in (0.02, 0.01):
        grid = TimeGrid(dt_control=dt, dt_observe=0.4, horizon_steps=4)
        inputs = np.tile([0.3, -0.1], (grid.n_cells, 1))
        disp = np.tile([0.2, 0.0], (1, grid.horizon_steps, 1)).reshape(1, grid.horizon_steps, 2)
        traj, sched = _straight_rollout(grid, state, inputs, disp)
        vals[dt] = total_cost(traj, sched, ref, p)
    assert abs(vals[0.02] - vals[0.01]) < 0.05 * max(1.0, abs(vals[0.01]))


def test_total_cost_human_free_is_sample_invariant():
    grid = TimeGrid(dt_control=0.1, dt_observe=0.4, horizon_steps=3)
    state = JointState(0.0, [0.5, 0.5, 0, 0], [])
    inputs = np.full((grid.n_cells, 2), 0.2)
    ref = ReferenceTrajectory([0, 0], [1, 1], 0.7)
    vals = {total_cost(*_straight_rollout(grid, state, inputs, np.zeros((0, 3, 2))),
                       ref, CostParams()) for _ in range(4)}
    assert len(vals) == 1


def test_reference_trajectory_geometry():
    ref = ReferenceTrajectory([0.0, 0.0], [4.0, 0.0], 2.0, t_start=1.0)
    np.testing.assert_allclose(ref.state_at(1.0), [0, 0, 2, 0])
    np.testing.assert_allclose(ref.state_at(2.0), [2, 0, 2, 0])
    # arrived: parked at the goal with zero velocity
    np.testing.assert_allclose(ref.state_at(3.0), [4, 0, 0, 0])
    np.testing.assert_allclose(ref.state_at(50.0), [4, 0, 0, 0])
    assert ref.length == pytest.approx(4.0)


def test_reference_trajectory_degenerate():
    ref = ReferenceTrajectory([1.0, 1.0], [1.0, 1.0], 1.0)
    np.testing.assert_allclose(ref.state_at(0.3), [1, 1, 0, 0])
    still = ReferenceTrajectory([0.0, 0.0], [5.0, 0.0], 0.0)
    np.testing.assert_allclose(still.state_at(2.0), [0, 0, 0, 0])
    with pytest.raises(ValueError):
        ReferenceTrajectory([0, 0], [1, 0], -1.0)
