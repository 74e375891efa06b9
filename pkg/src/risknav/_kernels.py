"""Compiled batch kernels for the planner hot path.

These duplicate the arithmetic of the reference implementations in
`dynamics`, `cost` and `rssac` (explicit Euler robot integration,
left-endpoint quadrature, backward adjoint recursion) but evaluate many
candidate schedules against many sampled human futures in tight loops.
Consistency with the plain implementations is covered by tests; the
planner uses these, the tests' oracles use the plain paths.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True, fastmath=True)
def batch_schedule_costs(x0, schedules, human_table, ref_states, track_w,
                         control_weight, collision_peak, collision_bandwidth,
                         terminal_weight, dt, substeps):
    """Cost of every (schedule, human sample) pair.

    schedules: (C, G, 2); human_table: (M, T+1, N, 2) cumulative positions,
    interval k valid for grid nodes k*substeps .. (k+1)*substeps - 1;
    ref_states: (G+1, 4). Returns (C, M).
    """
    n_cand = schedules.shape[0]
    n_cells = schedules.shape[1]
    n_samples = human_table.shape[0]
    n_humans = human_table.shape[2]
    inv2bw = 1.0 / (2.0 * collision_bandwidth)
    q00 = track_w[0, 0]; q01 = track_w[0, 1]; q02 = track_w[0, 2]; q03 = track_w[0, 3]
    q10 = track_w[1, 0]; q11 = track_w[1, 1]; q12 = track_w[1, 2]; q13 = track_w[1, 3]
    q20 = track_w[2, 0]; q21 = track_w[2, 1]; q22 = track_w[2, 2]; q23 = track_w[2, 3]
    q30 = track_w[3, 0]; q31 = track_w[3, 1]; q32 = track_w[3, 2]; q33 = track_w[3, 3]
    out = np.empty((n_cand, n_samples))
    for c in range(n_cand):
        px = x0[0]; py = x0[1]; vx = x0[2]; vy = x0[3]
        base = 0.0
        col = np.zeros(n_samples)
        u0 = 0.0
        u1 = 0.0
        for g in range(n_cells + 1):
            e0 = px - ref_states[g, 0]
            e1 = py - ref_states[g, 1]
            e2 = vx - ref_states[g, 2]
            e3 = vy - ref_states[g, 3]
            track = 0.5 * (e0 * (q00 * e0 + q01 * e1 + q02 * e2 + q03 * e3)
                           + e1 * (q10 * e0 + q11 * e1 + q12 * e2 + q13 * e3)
                           + e2 * (q20 * e0 + q21 * e1 + q22 * e2 + q23 * e3)
                           + e3 * (q30 * e0 + q31 * e1 + q32 * e2 + q33 * e3))
            interval = g // substeps
            if g < n_cells:
                u0 = schedules[c, g, 0]
                u1 = schedules[c, g, 1]
                base += dt * (track + 0.5 * control_weight * (u0 * u0 + u1 * u1))
                col_scale = dt * collision_peak
            else:
                base += terminal_weight * track
                col_scale = terminal_weight * collision_peak
            for m in range(n_samples):
                acc = 0.0
                for n in range(n_humans):
                    dx = px - human_table[m, interval, n, 0]
                    dy = py - human_table[m, interval, n, 1]
                    acc += np.exp(-(dx * dx + dy * dy) * inv2bw)
                col[m] += col_scale * acc
            if g < n_cells:
                px += dt * vx
                py += dt * vy
                vx += dt * u0
                vy += dt * u1
        for m in range(n_samples):
            out[c, m] = base + col[m]
    return out


@njit(cache=True, fastmath=True)
def batch_action_sequence_costs(x0, action_table, sequences, human_table,
                                ref_states, track_w, control_weight,
                                collision_peak, collision_bandwidth,
                                terminal_weight, dt, substeps):
    """Cost of every (action sequence, human sample) pair.

    sequences: (S, D) indices into action_table (A, 2); segment d of a
    sequence is held for one observation interval (substeps cells).
    Returns (S, M).
    """
    n_seq = sequences.shape[0]
    depth = sequences.shape[1]
    n_cells = depth * substeps
    n_samples = human_table.shape[0]
    n_humans = human_table.shape[2]
    inv2bw = 1.0 / (2.0 * collision_bandwidth)
    q00 = track_w[0, 0]; q01 = track_w[0, 1]; q02 = track_w[0, 2]; q03 = track_w[0, 3]
    q10 = track_w[1, 0]; q11 = track_w[1, 1]; q12 = track_w[1, 2]; q13 = track_w[1, 3]
    q20 = track_w[2, 0]; q21 = track_w[2, 1]; q22 = track_w[2, 2]; q23 = track_w[2, 3]
    q30 = track_w[3, 0]; q31 = track_w[3, 1]; q32 = track_w[3, 2]; q33 = track_w[3, 3]
    out = np.empty((n_seq, n_samples))
    for s in range(n_seq):
        px = x0[0]; py = x0[1]; vx = x0[2]; vy = x0[3]
        base = 0.0
        col = np.zeros(n_samples)
        u0 = 0.0
        u1 = 0.0
        for g in range(n_cells + 1):
            e0 = px - ref_states[g, 0]
            e1 = py - ref_states[g, 1]
            e2 = vx - ref_states[g, 2]
            e3 = vy - ref_states[g, 3]
            track = 0.5 * (e0 * (q00 * e0 + q01 * e1 + q02 * e2 + q03 * e3)
                           + e1 * (q10 * e0 + q11 * e1 + q12 * e2 + q13 * e3)
                           + e2 * (q20 * e0 + q21 * e1 + q22 * e2 + q23 * e3)
                           + e3 * (q30 * e0 + q31 * e1 + q32 * e2 + q33 * e3))
            interval = g // substeps
            if g < n_cells:
                act = sequences[s, interval]
                u0 = action_table[act, 0]
                u1 = action_table[act, 1]
                base += dt * (track + 0.5 * control_weight * (u0 * u0 + u1 * u1))
                col_scale = dt * collision_peak
            else:
                base += terminal_weight * track
                col_scale = terminal_weight * collision_peak
            for m in range(n_samples):
                acc = 0.0
                for n in range(n_humans):
                    dx = px - human_table[m, interval, n, 0]
                    dy = py - human_table[m, interval, n, 1]
                    acc += np.exp(-(dx * dx + dy * dy) * inv2bw)
                col[m] += col_scale * acc
            if g < n_cells:
                px += dt * vx
                py += dt * vy
                vx += dt * u0
                vy += dt * u1
        for m in range(n_samples):
            out[s, m] = base + col[m]
    return out


@njit(cache=True)
def robot_rollout(x0, inputs, dt):
    """Explicit Euler trajectory (K+1, 4) of the double integrator."""
    n_cells = inputs.shape[0]
    out = np.empty((n_cells + 1, 4))
    out[0, 0] = x0[0]; out[0, 1] = x0[1]; out[0, 2] = x0[2]; out[0, 3] = x0[3]
    px = x0[0]; py = x0[1]; vx = x0[2]; vy = x0[3]
    for k in range(n_cells):
        px += dt * vx
        py += dt * vy
        vx += dt * inputs[k, 0]
        vy += dt * inputs[k, 1]
        out[k + 1, 0] = px; out[k + 1, 1] = py
        out[k + 1, 2] = vx; out[k + 1, 3] = vy
    return out


@njit(cache=True, fastmath=True)
def batch_adjoint(robot, human_table, ref_states, track_w, collision_peak,
                  collision_bandwidth, terminal_weight, dt, substeps):
    """Backward adjoint recursion for every human sample.

    robot: (G+1, 4) forward states; human_table: (M, T+1, N, 2).
    Node g uses the state-cost gradient evaluated at node g, so the
    recursion is the exact gradient of the discretized cost with respect
    to the node states. Returns (M, G+1, 4).
    """
    n_nodes = robot.shape[0]
    n_samples = human_table.shape[0]
    n_humans = human_table.shape[2]
    inv2bw = 1.0 / (2.0 * collision_bandwidth)
    grad_scale = -collision_peak / collision_bandwidth
    q00 = track_w[0, 0]; q01 = track_w[0, 1]; q02 = track_w[0, 2]; q03 = track_w[0, 3]
    q10 = track_w[1, 0]; q11 = track_w[1, 1]; q12 = track_w[1, 2]; q13 = track_w[1, 3]
    q20 = track_w[2, 0]; q21 = track_w[2, 1]; q22 = track_w[2, 2]; q23 = track_w[2, 3]
    q30 = track_w[3, 0]; q31 = track_w[3, 1]; q32 = track_w[3, 2]; q33 = track_w[3, 3]
    rho = np.empty((n_samples, n_nodes, 4))
    for m in range(n_samples):
        for g in range(n_nodes - 1, -1, -1):
            e0 = robot[g, 0] - ref_states[g, 0]
            e1 = robot[g, 1] - ref_states[g, 1]
            e2 = robot[g, 2] - ref_states[g, 2]
            e3 = robot[g, 3] - ref_states[g, 3]
            d0 = q00 * e0 + q01 * e1 + q02 * e2 + q03 * e3
            d1 = q10 * e0 + q11 * e1 + q12 * e2 + q13 * e3
            d2 = q20 * e0 + q21 * e1 + q22 * e2 + q23 * e3
            d3 = q30 * e0 + q31 * e1 + q32 * e2 + q33 * e3
            interval = g // substeps
            c0 = 0.0
            c1 = 0.0
            for n in range(n_humans):
                dx = robot[g, 0] - human_table[m, interval, n, 0]
                dy = robot[g, 1] - human_table[m, interval, n, 1]
                w = np.exp(-(dx * dx + dy * dy) * inv2bw)
                c0 += w * dx
                c1 += w * dy
            g0 = d0 + grad_scale * c0
            g1 = d1 + grad_scale * c1
            g2 = d2
            g3 = d3
            if g == n_nodes - 1:
                rho[m, g, 0] = terminal_weight * g0
                rho[m, g, 1] = terminal_weight * g1
                rho[m, g, 2] = terminal_weight * g2
                rho[m, g, 3] = terminal_weight * g3
            else:
                r0 = rho[m, g + 1, 0]
                r1 = rho[m, g + 1, 1]
                r2 = rho[m, g + 1, 2]
                r3 = rho[m, g + 1, 3]
                rho[m, g, 0] = r0 + dt * g0
                rho[m, g, 1] = r1 + dt * g1
                rho[m, g, 2] = r2 + dt * (g2 + r0)
                rho[m, g, 3] = r3 + dt * (g3 + r1)
    return rho


def warmup() -> None:
    """Trigger JIT compilation of all kernels on tiny inputs."""
    x0 = np.zeros(4)
    ref = np.zeros((3, 4))
    table = np.zeros((1, 2, 1, 2))
    q = np.eye(4)
    batch_schedule_costs(x0, np.zeros((1, 2, 2)), table, ref, q,
                         1.0, 1.0, 1.0, 1.0, 0.5, 2)
    batch_action_sequence_costs(x0, np.zeros((1, 2)), np.zeros((1, 1), dtype=np.int64),
                                table, ref, q, 1.0, 1.0, 1.0, 1.0, 0.5, 2)
    robot = robot_rollout(x0, np.zeros((2, 2)), 0.5)
    batch_adjoint(robot, table, ref, q, 1.0, 1.0, 1.0, 0.5, 2)
