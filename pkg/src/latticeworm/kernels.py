"""Compiled inner loop for rod stepping.

Scalar re-implementation of the load assembly and velocity-Verlet update in
rods.py, batched over whole control windows so per-call overhead vanishes.
The test suite pins this kernel against the vectorized reference step and
against finite-difference energy gradients.

No fastmath: results must be deterministic and IEEE-faithful (instability is
detected through NaN propagation).
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

_SMALL_ANGLE = 1e-6
_NEAR_PI = 1e-6
_DEGENERATE_LENGTH = 1e-9


@njit(cache=True)
def _rotvec_of_product(q0, q1, out):
    """out <- rotation vector of q0 @ q1.T (both row-director matrices)."""
    # P = q0 q1^T
    p00 = q0[0, 0] * q1[0, 0] + q0[0, 1] * q1[0, 1] + q0[0, 2] * q1[0, 2]
    p01 = q0[0, 0] * q1[1, 0] + q0[0, 1] * q1[1, 1] + q0[0, 2] * q1[1, 2]
    p02 = q0[0, 0] * q1[2, 0] + q0[0, 1] * q1[2, 1] + q0[0, 2] * q1[2, 2]
    p10 = q0[1, 0] * q1[0, 0] + q0[1, 1] * q1[0, 1] + q0[1, 2] * q1[0, 2]
    p11 = q0[1, 0] * q1[1, 0] + q0[1, 1] * q1[1, 1] + q0[1, 2] * q1[1, 2]
    p12 = q0[1, 0] * q1[2, 0] + q0[1, 1] * q1[2, 1] + q0[1, 2] * q1[2, 2]
    p20 = q0[2, 0] * q1[0, 0] + q0[2, 1] * q1[0, 1] + q0[2, 2] * q1[0, 2]
    p21 = q0[2, 0] * q1[1, 0] + q0[2, 1] * q1[1, 1] + q0[2, 2] * q1[1, 2]
    p22 = q0[2, 0] * q1[2, 0] + q0[2, 1] * q1[2, 1] + q0[2, 2] * q1[2, 2]

    c = (p00 + p11 + p22 - 1.0) * 0.5
    if c > 1.0:
        c = 1.0
    elif c < -1.0:
        c = -1.0
    theta = math.acos(c)
    w0 = p21 - p12
    w1 = p02 - p20
    w2 = p10 - p01
    if theta < _SMALL_ANGLE:
        t2 = theta * theta
        f = 0.5 + t2 / 12.0 + 7.0 * t2 * t2 / 720.0
        out[0] = f * w0
        out[1] = f * w1
        out[2] = f * w2
    elif theta > np.pi - _NEAR_PI:
        a0 = math.sqrt(max((p00 + 1.0) * 0.5, 0.0))
        a1 = math.sqrt(max((p11 + 1.0) * 0.5, 0.0))
        a2 = math.sqrt(max((p22 + 1.0) * 0.5, 0.0))
        if a0 >= a1 and a0 >= a2:
            if a0 < 1e-12:
                a0, a1, a2 = 1.0, 0.0, 0.0
            else:
                if (p01 + p10) * 0.5 < 0.0:
                    a1 = -a1
                if (p02 + p20) * 0.5 < 0.0:
                    a2 = -a2
        elif a1 >= a2:
            if (p01 + p10) * 0.5 < 0.0:
                a0 = -a0
            if (p12 + p21) * 0.5 < 0.0:
                a2 = -a2
        else:
            if (p02 + p20) * 0.5 < 0.0:
                a0 = -a0
            if (p12 + p21) * 0.5 < 0.0:
                a1 = -a1
        norm = math.sqrt(a0 * a0 + a1 * a1 + a2 * a2)
        out[0] = theta * a0 / norm
        out[1] = theta * a1 / norm
        out[2] = theta * a2 / norm
    else:
        f = theta / (2.0 * math.sin(theta))
        out[0] = f * w0
        out[1] = f * w1
        out[2] = f * w2


@njit(cache=True)
def _assemble_loads(
    positions,
    directors,
    elem_node0,
    elem_node1,
    rest_lengths,
    stretch_rigidity,
    pair_elem0,
    pair_elem1,
    voronoi,
    bend_rigidity,
    rest_phi,
    conn_node_a,
    conn_node_b,
    conn_stiffness,
    contr_node_a,
    contr_node_b,
    contr_mags,
    external_forces,
    node_mass,
    gravity,
    forces,
    torques,
    phi_buf,
):
    n_nodes = positions.shape[0]
    for n in range(n_nodes):
        forces[n, 0] = external_forces[n, 0] + node_mass[n] * gravity[0]
        forces[n, 1] = external_forces[n, 1] + node_mass[n] * gravity[1]
        forces[n, 2] = external_forces[n, 2] + node_mass[n] * gravity[2]

    for e in range(elem_node0.shape[0]):
        i = elem_node0[e]
        j = elem_node1[e]
        ex = positions[j, 0] - positions[i, 0]
        ey = positions[j, 1] - positions[i, 1]
        ez = positions[j, 2] - positions[i, 2]
        q = directors[e]
        m0 = q[0, 0] * ex + q[0, 1] * ey + q[0, 2] * ez
        m1 = q[1, 0] * ex + q[1, 1] * ey + q[1, 2] * ez
        m2 = q[2, 0] * ex + q[2, 1] * ey + q[2, 2] * ez
        inv_l = 1.0 / rest_lengths[e]
        s0 = stretch_rigidity[e, 0] * (m0 * inv_l)
        s1 = stretch_rigidity[e, 1] * (m1 * inv_l)
        s2 = stretch_rigidity[e, 2] * (m2 * inv_l - 1.0)
        fx = q[0, 0] * s0 + q[1, 0] * s1 + q[2, 0] * s2
        fy = q[0, 1] * s0 + q[1, 1] * s1 + q[2, 1] * s2
        fz = q[0, 2] * s0 + q[1, 2] * s1 + q[2, 2] * s2
        forces[i, 0] += fx
        forces[i, 1] += fy
        forces[i, 2] += fz
        forces[j, 0] -= fx
        forces[j, 1] -= fy
        forces[j, 2] -= fz
        torques[e, 0] = m1 * s2 - m2 * s1
        torques[e, 1] = m2 * s0 - m0 * s2
        torques[e, 2] = m0 * s1 - m1 * s0

    for p in range(pair_elem0.shape[0]):
        e0 = pair_elem0[p]
        e1 = pair_elem1[p]
        _rotvec_of_product(directors[e0], directors[e1], phi_buf)
        px = phi_buf[0]
        py = phi_buf[1]
        pz = phi_buf[2]
        inv_d = 1.0 / voronoi[p]
        mx = bend_rigidity[p, 0] * (px - rest_phi[p, 0]) * inv_d
        my = bend_rigidity[p, 1] * (py - rest_phi[p, 1]) * inv_d
        mz = bend_rigidity[p, 2] * (pz - rest_phi[p, 2]) * inv_d
        # J_r^{-1} m = m + (phi x m)/2 + eta (phi (phi.m) - theta^2 m);
        # transposing flips only the cross term
        theta2 = px * px + py * py + pz * pz
        if theta2 < 1e-8:
            eta = 1.0 / 12.0 + theta2 / 720.0
        else:
            theta = math.sqrt(theta2)
            eta = 1.0 / theta2 - 1.0 / (2.0 * theta * math.tan(0.5 * theta))
        dot = px * mx + py * my + pz * mz
        cx = py * mz - pz * my
        cy = pz * mx - px * mz
        cz = px * my - py * mx
        bx = mx + eta * (px * dot - theta2 * mx)
        by = my + eta * (py * dot - theta2 * my)
        bz = mz + eta * (pz * dot - theta2 * mz)
        torques[e0, 0] += bx + 0.5 * cx
        torques[e0, 1] += by + 0.5 * cy
        torques[e0, 2] += bz + 0.5 * cz
        torques[e1, 0] -= bx - 0.5 * cx
        torques[e1, 1] -= by - 0.5 * cy
        torques[e1, 2] -= bz - 0.5 * cz

    for c in range(conn_node_a.shape[0]):
        i = conn_node_a[c]
        j = conn_node_b[c]
        k = conn_stiffness[c]
        fx = k * (positions[j, 0] - positions[i, 0])
        fy = k * (positions[j, 1] - positions[i, 1])
        fz = k * (positions[j, 2] - positions[i, 2])
        forces[i, 0] += fx
        forces[i, 1] += fy
        forces[i, 2] += fz
        forces[j, 0] -= fx
        forces[j, 1] -= fy
        forces[j, 2] -= fz

    for m in range(contr_node_a.shape[0]):
        a = contr_node_a[m]
        b = contr_node_b[m]
        sx = positions[b, 0] - positions[a, 0]
        sy = positions[b, 1] - positions[a, 1]
        sz = positions[b, 2] - positions[a, 2]
        length = math.sqrt(sx * sx + sy * sy + sz * sz)
        if length >= _DEGENERATE_LENGTH:
            scale = contr_mags[m] / length
            forces[a, 0] += scale * sx
            forces[a, 1] += scale * sy
            forces[a, 2] += scale * sz
            forces[b, 0] -= scale * sx
            forces[b, 1] -= scale * sy
            forces[b, 2] -= scale * sz


@njit(cache=True)
def _half_kick(
    velocities,
    omegas,
    forces,
    torques,
    inertia,
    inv_node_mass,
    inv_inertia,
    node_damping_weight,
    elem_damping_weight,
    conn_node_a,
    conn_node_b,
    conn_damping,
    has_conn_damping,
    damping,
    h,
    vel_force_buf,
):
    n_nodes = velocities.shape[0]
    if has_conn_damping:
        for n in range(n_nodes):
            vel_force_buf[n, 0] = 0.0
            vel_force_buf[n, 1] = 0.0
            vel_force_buf[n, 2] = 0.0
        for c in range(conn_node_a.shape[0]):
            i = conn_node_a[c]
            j = conn_node_b[c]
            cd = conn_damping[c]
            fx = cd * (velocities[j, 0] - velocities[i, 0])
            fy = cd * (velocities[j, 1] - velocities[i, 1])
            fz = cd * (velocities[j, 2] - velocities[i, 2])
            vel_force_buf[i, 0] += fx
            vel_force_buf[i, 1] += fy
            vel_force_buf[i, 2] += fz
            vel_force_buf[j, 0] -= fx
            vel_force_buf[j, 1] -= fy
            vel_force_buf[j, 2] -= fz
        for n in range(n_nodes):
            cw = damping * node_damping_weight[n]
            hm = h * inv_node_mass[n]
            velocities[n, 0] += hm * (forces[n, 0] + vel_force_buf[n, 0] - cw * velocities[n, 0])
            velocities[n, 1] += hm * (forces[n, 1] + vel_force_buf[n, 1] - cw * velocities[n, 1])
            velocities[n, 2] += hm * (forces[n, 2] + vel_force_buf[n, 2] - cw * velocities[n, 2])
    else:
        for n in range(n_nodes):
            cw = damping * node_damping_weight[n]
            hm = h * inv_node_mass[n]
            velocities[n, 0] += hm * (forces[n, 0] - cw * velocities[n, 0])
            velocities[n, 1] += hm * (forces[n, 1] - cw * velocities[n, 1])
            velocities[n, 2] += hm * (forces[n, 2] - cw * velocities[n, 2])

    for e in range(omegas.shape[0]):
        w0 = omegas[e, 0]
        w1 = omegas[e, 1]
        w2 = omegas[e, 2]
        j0 = inertia[e, 0] * w0
        j1 = inertia[e, 1] * w1
        j2 = inertia[e, 2] * w2
        gamma = damping * elem_damping_weight[e]
        t0 = torques[e, 0] + (j1 * w2 - j2 * w1) - gamma * j0
        t1 = torques[e, 1] + (j2 * w0 - j0 * w2) - gamma * j1
        t2 = torques[e, 2] + (j0 * w1 - j1 * w0) - gamma * j2
        omegas[e, 0] = w0 + h * inv_inertia[e, 0] * t0
        omegas[e, 1] = w1 + h * inv_inertia[e, 1] * t1
        omegas[e, 2] = w2 + h * inv_inertia[e, 2] * t2


@njit(cache=True)
def _drift(positions, velocities, directors, omegas, dt):
    for n in range(positions.shape[0]):
        positions[n, 0] += dt * velocities[n, 0]
        positions[n, 1] += dt * velocities[n, 1]
        positions[n, 2] += dt * velocities[n, 2]

    for e in range(directors.shape[0]):
        # Q <- exp(-dt w^) Q, then Gram-Schmidt anchored on the tangent row
        rx = -dt * omegas[e, 0]
        ry = -dt * omegas[e, 1]
        rz = -dt * omegas[e, 2]
        theta2 = rx * rx + ry * ry + rz * rz
        if theta2 < _SMALL_ANGLE * _SMALL_ANGLE:
            a = 1.0 - theta2 / 6.0
            b = 0.5 - theta2 / 24.0
        else:
            theta = math.sqrt(theta2)
            a = math.sin(theta) / theta
            b = (1.0 - math.cos(theta)) / theta2
        r00 = 1.0 - b * (ry * ry + rz * rz)
        r01 = b * rx * ry - a * rz
        r02 = b * rx * rz + a * ry
        r10 = b * rx * ry + a * rz
        r11 = 1.0 - b * (rx * rx + rz * rz)
        r12 = b * ry * rz - a * rx
        r20 = b * rx * rz - a * ry
        r21 = b * ry * rz + a * rx
        r22 = 1.0 - b * (rx * rx + ry * ry)

        q = directors[e]
        n00 = r00 * q[0, 0] + r01 * q[1, 0] + r02 * q[2, 0]
        n01 = r00 * q[0, 1] + r01 * q[1, 1] + r02 * q[2, 1]
        n02 = r00 * q[0, 2] + r01 * q[1, 2] + r02 * q[2, 2]
        n20 = r20 * q[0, 0] + r21 * q[1, 0] + r22 * q[2, 0]
        n21 = r20 * q[0, 1] + r21 * q[1, 1] + r22 * q[2, 1]
        n22 = r20 * q[0, 2] + r21 * q[1, 2] + r22 * q[2, 2]

        inv = 1.0 / math.sqrt(n20 * n20 + n21 * n21 + n22 * n22)
        d30 = n20 * inv
        d31 = n21 * inv
        d32 = n22 * inv
        dot = n00 * d30 + n01 * d31 + n02 * d32
        d10 = n00 - dot * d30
        d11 = n01 - dot * d31
        d12 = n02 - dot * d32
        inv = 1.0 / math.sqrt(d10 * d10 + d11 * d11 + d12 * d12)
        d10 *= inv
        d11 *= inv
        d12 *= inv
        q[0, 0] = d10
        q[0, 1] = d11
        q[0, 2] = d12
        q[1, 0] = d31 * d12 - d32 * d11
        q[1, 1] = d32 * d10 - d30 * d12
        q[1, 2] = d30 * d11 - d31 * d10
        q[2, 0] = d30
        q[2, 1] = d31
        q[2, 2] = d32


@njit(cache=True)
def step_window(
    n_substeps,
    dt,
    damping,
    positions,
    velocities,
    directors,
    omegas,
    elem_node0,
    elem_node1,
    rest_lengths,
    stretch_rigidity,
    inertia,
    inv_node_mass,
    inv_inertia,
    node_damping_weight,
    elem_damping_weight,
    pair_elem0,
    pair_elem1,
    voronoi,
    bend_rigidity,
    rest_phi,
    conn_node_a,
    conn_node_b,
    conn_stiffness,
    conn_damping,
    has_conn_damping,
    contr_node_a,
    contr_node_b,
    contr_mags,
    external_forces,
    node_mass,
    gravity,
    forces,
    torques,
    have_cache,
):
    """Advance n_substeps of velocity Verlet; forces/torques carry the cached
    position loads between calls. Returns True (loads are cached on exit)."""
    phi_buf = np.empty(3)
    vel_force_buf = np.empty_like(velocities)
    half = 0.5 * dt
    for _ in range(n_substeps):
        if not have_cache:
            _assemble_loads(
                positions, directors, elem_node0, elem_node1, rest_lengths,
                stretch_rigidity, pair_elem0, pair_elem1, voronoi, bend_rigidity,
                rest_phi, conn_node_a, conn_node_b, conn_stiffness,
                contr_node_a, contr_node_b, contr_mags,
                external_forces, node_mass, gravity, forces, torques, phi_buf,
            )
            have_cache = True
        _half_kick(
            velocities, omegas, forces, torques, inertia, inv_node_mass,
            inv_inertia, node_damping_weight, elem_damping_weight,
            conn_node_a, conn_node_b, conn_damping, has_conn_damping,
            damping, half, vel_force_buf,
        )
        _drift(positions, velocities, directors, omegas, dt)
        _assemble_loads(
            positions, directors, elem_node0, elem_node1, rest_lengths,
            stretch_rigidity, pair_elem0, pair_elem1, voronoi, bend_rigidity,
            rest_phi, conn_node_a, conn_node_b, conn_stiffness,
            contr_node_a, contr_node_b, contr_mags,
            external_forces, node_mass, gravity, forces, torques, phi_buf,
        )
        _half_kick(
            velocities, omegas, forces, torques, inertia, inv_node_mass,
            inv_inertia, node_damping_weight, elem_damping_weight,
            conn_node_a, conn_node_b, conn_damping, has_conn_damping,
            damping, half, vel_force_buf,
        )
    return have_cache
