"""Discrete Cosserat rod assemblies with explicit symplectic time stepping.

State lives in flat mesh arrays (nodes, elements, bend pairs) concatenated
over all rods, so one step costs a fixed number of vectorized operations
regardless of how many rods the assembly contains.

Conventions:
- Director matrices Q (one per element) hold rows (d1, d2, d3) and map lab
  vectors into the material frame; d3 is the tangent at rest.
- Angular velocities are expressed in the material frame.
- SI units throughout (m, kg, s, N, Pa).

Force and torque expressions are the exact gradients of the stored elastic
energy (verified against finite differences in the test suite), which is what
makes the passivity and momentum properties hold at tight tolerances.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .kernels import step_window
from .rotations import (
    cross3,
    inv_right_jacobian,
    matrix_from_rotvec,
    orthonormalize_frames,
    rotvec_from_matrix,
)

logger = logging.getLogger(__name__)

# rods shorter than this are treated as degenerate for actuation purposes
DEGENERATE_LENGTH = 1e-9


@dataclass(frozen=True)
class MaterialParams:
    """Isotropic linear-elastic material of a rod."""

    youngs_modulus: float
    density: float
    poisson_ratio: float = 0.5

    def __post_init__(self) -> None:
        if self.youngs_modulus <= 0.0:
            raise ValueError("youngs_modulus must be positive")
        if self.density <= 0.0:
            raise ValueError("density must be positive")
        if not 0.0 <= self.poisson_ratio <= 0.5:
            raise ValueError("poisson_ratio must lie in [0, 0.5]")

    @property
    def shear_modulus(self) -> float:
        return self.youngs_modulus / (2.0 * (1.0 + self.poisson_ratio))


@dataclass(frozen=True)
class SimConfig:
    """Time-stepping parameters shared by every rod in a system."""

    dt: float
    damping_coefficient: float = 0.035
    substeps_per_control: int = 1
    gravity: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self) -> None:
        if self.dt <= 0.0:
            raise ValueError("dt must be positive")
        if self.damping_coefficient < 0.0:
            raise ValueError("damping_coefficient must be non-negative")
        if self.substeps_per_control < 1:
            raise ValueError("substeps_per_control must be at least 1")


@dataclass(frozen=True)
class Connection:
    """Zero-rest-length point spring joining a node of rod_a to a node of rod_b."""

    rod_a: int
    node_a: int
    rod_b: int
    node_b: int
    stiffness: float
    damping: float = 0.0


@dataclass
class Rod:
    """Geometric and material description of one rod; state lives in RodSystem.

    positions define both the initial and the stress-free rest shape. Clamped
    nodes/elements are held fixed (zero inverse mass and inertia).
    """

    positions: np.ndarray
    radius: float
    material: MaterialParams
    clamped_nodes: tuple[int, ...] = ()
    clamped_elements: tuple[int, ...] = ()


def _frames_from_centerline(positions: np.ndarray) -> np.ndarray:
    """Initial director frames: d3 along each edge, d1 from the lab axis least
    aligned with it, d2 completing the right-handed triad."""
    edges = np.diff(positions, axis=0)
    lengths = np.linalg.norm(edges, axis=-1)
    d3 = edges / lengths[:, None]
    ref = np.eye(3)[np.argmin(np.abs(d3), axis=-1)]
    d1 = ref - np.einsum("ei,ei->e", ref, d3)[:, None] * d3
    d1 /= np.linalg.norm(d1, axis=-1, keepdims=True)
    d2 = np.cross(d3, d1)
    return np.stack([d1, d2, d3], axis=-2)


class RodSystem:
    """Assembly of Cosserat rods plus point-spring connections.

    Public state arrays: positions (n_nodes, 3), velocities (n_nodes, 3),
    directors (n_elements, 3, 3), omegas (n_elements, 3). Direct mutation of
    these is allowed for testing but must be followed by invalidate_loads().
    """

    def __init__(self, rods: Sequence[Rod], connections: Sequence[Connection] = ()) -> None:
        if not rods:
            raise ValueError("a RodSystem needs at least one rod")
        self.rods = list(rods)
        self.connections = list(connections)

        node_counts = []
        for r, rod in enumerate(self.rods):
            pos = np.asarray(rod.positions, dtype=float)
            if pos.ndim != 2 or pos.shape[0] < 2 or pos.shape[1] != 3:
                raise ValueError(f"rod {r}: positions must have shape (n_nodes >= 2, 3)")
            if rod.radius <= 0.0:
                raise ValueError(f"rod {r}: radius must be positive")
            if np.any(np.linalg.norm(np.diff(pos, axis=0), axis=-1) <= 0.0):
                raise ValueError(f"rod {r}: zero-length element")
            node_counts.append(pos.shape[0])

        self.node_offset = np.concatenate(([0], np.cumsum(node_counts))).astype(np.intp)
        self.elem_offset = np.concatenate(([0], np.cumsum([n - 1 for n in node_counts]))).astype(np.intp)
        self.n_rods = len(self.rods)
        self.n_nodes = int(self.node_offset[-1])
        self.n_elements = int(self.elem_offset[-1])

        self.positions = np.vstack([np.asarray(r.positions, dtype=float) for r in self.rods])
        self.velocities = np.zeros_like(self.positions)
        self.directors = np.empty((self.n_elements, 3, 3))
        self.omegas = np.zeros((self.n_elements, 3))

        self.elem_node0 = np.empty(self.n_elements, dtype=np.intp)
        self.elem_node1 = np.empty(self.n_elements, dtype=np.intp)
        self.rest_lengths = np.empty(self.n_elements)
        self.stretch_rigidity = np.empty((self.n_elements, 3))
        self.inertia = np.empty((self.n_elements, 3))
        self.elem_modulus = np.empty(self.n_elements)
        self.elem_density = np.empty(self.n_elements)
        self.elem_damping_weight = np.empty(self.n_elements)
        self.node_mass = np.zeros(self.n_nodes)

        clamped_nodes = np.zeros(self.n_nodes, dtype=bool)
        clamped_elems = np.zeros(self.n_elements, dtype=bool)
        pair0: list[np.ndarray] = []
        pair1: list[np.ndarray] = []
        voronoi: list[np.ndarray] = []
        bend: list[np.ndarray] = []
        first_node, last_node = [], []

        for r, rod in enumerate(self.rods):
            nbase = int(self.node_offset[r])
            ebase = int(self.elem_offset[r])
            n_el = node_counts[r] - 1
            ns = slice(nbase, nbase + n_el + 1)
            es = slice(ebase, ebase + n_el)
            pos = self.positions[ns]
            lhat = np.linalg.norm(np.diff(pos, axis=0), axis=-1)
            mat = rod.material
            area = np.pi * rod.radius**2
            i1 = np.pi * rod.radius**4 / 4.0
            shear = mat.shear_modulus

            self.rest_lengths[es] = lhat
            self.stretch_rigidity[es] = (
                4.0 * shear * area / 3.0,
                4.0 * shear * area / 3.0,
                mat.youngs_modulus * area,
            )
            self.inertia[es] = mat.density * lhat[:, None] * np.array([i1, i1, 2.0 * i1])
            self.elem_modulus[es] = mat.youngs_modulus
            self.elem_density[es] = mat.density
            self.directors[es] = _frames_from_centerline(pos)
            self.elem_node0[es] = nbase + np.arange(n_el)
            self.elem_node1[es] = nbase + np.arange(1, n_el + 1)

            half = 0.5 * mat.density * area * lhat
            nm = self.node_mass[ns]
            nm[:-1] += half
            nm[1:] += half
            total_mass = mat.density * area * float(lhat.sum())
            self.elem_damping_weight[es] = 1.0 / total_mass

            if n_el >= 2:
                eids = ebase + np.arange(n_el)
                pair0.append(eids[:-1])
                pair1.append(eids[1:])
                voronoi.append(0.5 * (lhat[:-1] + lhat[1:]))
                row = np.array([mat.youngs_modulus * i1, mat.youngs_modulus * i1, shear * 2.0 * i1])
                bend.append(np.tile(row, (n_el - 1, 1)))

            for n in rod.clamped_nodes:
                if not 0 <= n <= n_el:
                    raise ValueError(f"rod {r}: clamped node {n} out of range")
                clamped_nodes[nbase + n] = True
            for e in rod.clamped_elements:
                if not 0 <= e < n_el:
                    raise ValueError(f"rod {r}: clamped element {e} out of range")
                clamped_elems[ebase + e] = True
            first_node.append(nbase)
            last_node.append(nbase + n_el)

        if pair0:
            self.pair_elem0 = np.concatenate(pair0).astype(np.intp)
            self.pair_elem1 = np.concatenate(pair1).astype(np.intp)
            self.voronoi = np.concatenate(voronoi)
            self.bend_rigidity = np.vstack(bend)
        else:
            self.pair_elem0 = np.zeros(0, dtype=np.intp)
            self.pair_elem1 = np.zeros(0, dtype=np.intp)
            self.voronoi = np.zeros(0)
            self.bend_rigidity = np.zeros((0, 3))

        if self.pair_elem0.size:
            q0 = self.directors[self.pair_elem0]
            q1 = self.directors[self.pair_elem1]
            self.rest_phi = rotvec_from_matrix(q0 @ q1.transpose(0, 2, 1))
        else:
            self.rest_phi = np.zeros((0, 3))

        # damping weight per node = fraction of the rod's rest length it carries,
        # which equals node_mass / rod_mass for uniform density and radius
        self.node_damping_weight = np.empty(self.n_nodes)
        for r in range(self.n_rods):
            ns = slice(int(self.node_offset[r]), int(self.node_offset[r + 1]))
            self.node_damping_weight[ns] = self.node_mass[ns] / self.node_mass[ns].sum()

        self.clamped_nodes = clamped_nodes
        self.clamped_elements = clamped_elems
        self.inv_node_mass = np.where(clamped_nodes, 0.0, 1.0 / self.node_mass)
        self.inv_inertia = np.where(clamped_elems[:, None], 0.0, 1.0 / self.inertia)
        self.rod_first_node = np.asarray(first_node, dtype=np.intp)
        self.rod_last_node = np.asarray(last_node, dtype=np.intp)
        self.rod_rest_arc = np.add.reduceat(self.rest_lengths, self.elem_offset[:-1])

        conn_a, conn_b, conn_k, conn_c = [], [], [], []
        for c, conn in enumerate(self.connections):
            for rod_id, node_id in ((conn.rod_a, conn.node_a), (conn.rod_b, conn.node_b)):
                if not 0 <= rod_id < self.n_rods:
                    raise ValueError(f"connection {c}: rod {rod_id} does not exist")
                n_nodes_r = int(self.node_offset[rod_id + 1] - self.node_offset[rod_id])
                if not 0 <= node_id < n_nodes_r:
                    raise ValueError(f"connection {c}: node {node_id} outside rod {rod_id}")
            if conn.stiffness <= 0.0:
                raise ValueError(f"connection {c}: stiffness must be positive")
            if conn.damping < 0.0:
                raise ValueError(f"connection {c}: damping must be non-negative")
            conn_a.append(int(self.node_offset[conn.rod_a]) + conn.node_a)
            conn_b.append(int(self.node_offset[conn.rod_b]) + conn.node_b)
            conn_k.append(conn.stiffness)
            conn_c.append(conn.damping)
        self.conn_node_a = np.asarray(conn_a, dtype=np.intp)
        self.conn_node_b = np.asarray(conn_b, dtype=np.intp)
        self.conn_stiffness = np.asarray(conn_k, dtype=float)
        self.conn_damping = np.asarray(conn_c, dtype=float)
        self._has_conn_damping = bool(self.conn_damping.size and np.any(self.conn_damping > 0.0))

        self._contraction_rods = np.zeros(0, dtype=np.intp)
        self._contraction_mags = np.zeros(0)
        self._contr_node_a = np.zeros(0, dtype=np.intp)
        self._contr_node_b = np.zeros(0, dtype=np.intp)
        # constant per-node lab-frame forces (e.g. a tip load); mutate then
        # call invalidate_loads()
        self.external_forces = np.zeros_like(self.positions)
        # position-dependent loads evaluated at the current state, reused for
        # the next step's first half-kick when _have_cache is set
        self._cached_forces = np.zeros_like(self.positions)
        self._cached_torques = np.zeros_like(self.omegas)
        self._have_cache = False
        self._rest_positions = self.positions.copy()
        self._rest_directors = self.directors.copy()

    # ------------------------------------------------------------------ loads

    def compute_internal_loads(self) -> tuple[np.ndarray, np.ndarray]:
        """Elastic nodal forces (lab frame) and element torques (material frame).

        Linear constitutive law: stretch/shear rigidity diag(4GA/3, 4GA/3, EA)
        on the strain sigma = Q e / rest_length - e3, bend/twist rigidity
        diag(EI1, EI2, GI3) on the discrete curvature between element frames.
        """
        edges = self.positions[self.elem_node1] - self.positions[self.elem_node0]
        m_edge = np.einsum("eij,ej->ei", self.directors, edges)
        sigma = m_edge / self.rest_lengths[:, None]
        sigma[:, 2] -= 1.0
        stress = self.stretch_rigidity * sigma
        f_lab = np.einsum("eij,ei->ej", self.directors, stress)
        forces = np.zeros_like(self.positions)
        np.add.at(forces, self.elem_node0, f_lab)
        np.subtract.at(forces, self.elem_node1, f_lab)
        torques = cross3(m_edge, stress)
        if self.pair_elem0.size:
            q0 = self.directors[self.pair_elem0]
            q1 = self.directors[self.pair_elem1]
            phi = rotvec_from_matrix(q0 @ q1.transpose(0, 2, 1))
            moment = self.bend_rigidity * (phi - self.rest_phi) / self.voronoi[:, None]
            jinv = inv_right_jacobian(phi)
            np.add.at(torques, self.pair_elem0, np.einsum("pij,pj->pi", jinv, moment))
            np.subtract.at(torques, self.pair_elem1, np.einsum("pji,pj->pi", jinv, moment))
        return forces, torques

    def internal_moments(self) -> np.ndarray:
        """Material-frame bending/twisting moment at each interior junction."""
        if not self.pair_elem0.size:
            return np.zeros((0, 3))
        q0 = self.directors[self.pair_elem0]
        q1 = self.directors[self.pair_elem1]
        phi = rotvec_from_matrix(q0 @ q1.transpose(0, 2, 1))
        return self.bend_rigidity * (phi - self.rest_phi) / self.voronoi[:, None]

    def apply_connection_loads(self, forces: np.ndarray, velocities: np.ndarray | None = None) -> np.ndarray:
        """Accumulate spring (and, given velocities, damper) connection forces.

        Forces come in equal-and-opposite pairs, so the accumulated sum over
        both endpoints of every connection is exactly zero.
        """
        if not self.conn_node_a.size:
            return forces
        rel = self.positions[self.conn_node_b] - self.positions[self.conn_node_a]
        pair = self.conn_stiffness[:, None] * rel
        if velocities is not None:
            pair = pair + self.conn_damping[:, None] * (
                velocities[self.conn_node_b] - velocities[self.conn_node_a]
            )
        np.add.at(forces, self.conn_node_a, pair)
        np.subtract.at(forces, self.conn_node_b, pair)
        return forces

    def apply_muscle_contraction(self, forces: np.ndarray, rod: int, force_magnitude: float) -> bool:
        """Add a contractile pair at one rod's end nodes, directed toward its center.

        Returns False (and applies nothing) if the rod's end-to-end span is
        degenerate.
        """
        if force_magnitude < 0.0:
            raise ValueError("force_magnitude must be non-negative")
        a = int(self.rod_first_node[rod])
        b = int(self.rod_last_node[rod])
        span = self.positions[b] - self.positions[a]
        length = float(np.linalg.norm(span))
        if not length >= DEGENERATE_LENGTH:
            logger.warning("skipping contraction on degenerate rod %d", rod)
            return False
        pair = (force_magnitude / length) * span
        forces[a] += pair
        forces[b] -= pair
        return True

    def set_contractions(self, rod_ids: np.ndarray, magnitudes: np.ndarray) -> None:
        """Set contractile force magnitudes applied every substep until changed."""
        rod_ids = np.asarray(rod_ids, dtype=np.intp)
        magnitudes = np.asarray(magnitudes, dtype=float)
        if rod_ids.shape != magnitudes.shape:
            raise ValueError("rod_ids and magnitudes must have matching shapes")
        if rod_ids.size and (rod_ids.min() < 0 or rod_ids.max() >= self.n_rods):
            raise ValueError("rod id out of range")
        if np.any(magnitudes < 0.0):
            raise ValueError("contraction magnitudes must be non-negative")
        self._contraction_rods = rod_ids
        self._contraction_mags = magnitudes
        self._contr_node_a = self.rod_first_node[rod_ids]
        self._contr_node_b = self.rod_last_node[rod_ids]
        self._have_cache = False

    def _apply_contractions(self, forces: np.ndarray) -> None:
        a = self.rod_first_node[self._contraction_rods]
        b = self.rod_last_node[self._contraction_rods]
        span = self.positions[b] - self.positions[a]
        length = np.linalg.norm(span, axis=-1)
        ok = length >= DEGENERATE_LENGTH
        degenerate = ~ok & np.isfinite(length)
        if degenerate.any():
            logger.warning(
                "skipping contraction on degenerate rods %s",
                self._contraction_rods[degenerate].tolist(),
            )
        scale = np.where(ok, self._contraction_mags, 0.0) / np.where(ok, length, 1.0)
        pair = scale[:, None] * span
        np.add.at(forces, a, pair)
        np.subtract.at(forces, b, pair)

    def _position_loads(self, config: SimConfig) -> tuple[np.ndarray, np.ndarray]:
        forces, torques = self.compute_internal_loads()
        self.apply_connection_loads(forces)
        if self._contraction_rods.size:
            self._apply_contractions(forces)
        forces += self.external_forces
        if any(config.gravity):
            forces += self.node_mass[:, None] * np.asarray(config.gravity)
        return forces, torques

    # ------------------------------------------------------------ integration

    def step(self, config: SimConfig) -> None:
        """Advance one dt by velocity Verlet (half-kick, drift, half-kick).

        Position-dependent loads are evaluated once per step at the drifted
        positions and reused for the next step's first half-kick; damping and
        gyroscopic terms are evaluated fresh from current velocities in each
        half-kick. Runs in the compiled kernel; step_reference is the
        vectorized numpy equivalent.
        """
        self._advance_window(config, 1)

    def advance(self, config: SimConfig) -> None:
        """Run substeps_per_control steps of dt inside one compiled window."""
        self._advance_window(config, config.substeps_per_control)

    def _advance_window(self, config: SimConfig, n_substeps: int) -> None:
        if self._contraction_mags.size:
            self._warn_degenerate_contractions()
        self._have_cache = bool(
            step_window(
                n_substeps,
                config.dt,
                config.damping_coefficient,
                self.positions,
                self.velocities,
                self.directors,
                self.omegas,
                self.elem_node0,
                self.elem_node1,
                self.rest_lengths,
                self.stretch_rigidity,
                self.inertia,
                self.inv_node_mass,
                self.inv_inertia,
                self.node_damping_weight,
                self.elem_damping_weight,
                self.pair_elem0,
                self.pair_elem1,
                self.voronoi,
                self.bend_rigidity,
                self.rest_phi,
                self.conn_node_a,
                self.conn_node_b,
                self.conn_stiffness,
                self.conn_damping,
                self._has_conn_damping,
                self._contr_node_a,
                self._contr_node_b,
                self._contraction_mags,
                self.external_forces,
                self.node_mass,
                np.asarray(config.gravity, dtype=float),
                self._cached_forces,
                self._cached_torques,
                self._have_cache,
            )
        )

    def _warn_degenerate_contractions(self) -> None:
        # the kernel silently skips degenerate spans; surface them here once
        # per window (warn only while the state is still finite, a NaN state
        # already reports through detect_instability)
        span = self.positions[self._contr_node_b] - self.positions[self._contr_node_a]
        length = np.linalg.norm(span, axis=-1)
        degenerate = (length < DEGENERATE_LENGTH) & np.isfinite(length)
        if degenerate.any():
            logger.warning(
                "skipping contraction on degenerate rods %s",
                self._contraction_rods[degenerate].tolist(),
            )

    def step_reference(self, config: SimConfig) -> None:
        """One step via the vectorized numpy path; numerically matches step().

        Kept as the independent cross-check for the compiled kernel and for
        ad-hoc diagnostics.
        """
        dt = config.dt
        # blow-ups are expected and surface as non-finite state (see
        # detect_instability); keep IEEE warnings quiet on that path
        with np.errstate(over="ignore", invalid="ignore"):
            if not self._have_cache:
                forces, torques = self._position_loads(config)
                self._cached_forces[:] = forces
                self._cached_torques[:] = torques
            self._half_kick(self._cached_forces, self._cached_torques, config, 0.5 * dt)
            self.positions += dt * self.velocities
            spin = matrix_from_rotvec(-dt * self.omegas)
            self.directors[:] = orthonormalize_frames(spin @ self.directors)
            forces, torques = self._position_loads(config)
            self._cached_forces[:] = forces
            self._cached_torques[:] = torques
            self._have_cache = True
            self._half_kick(self._cached_forces, self._cached_torques, config, 0.5 * dt)

    def _half_kick(self, forces: np.ndarray, torques: np.ndarray, config: SimConfig, h: float) -> None:
        c = config.damping_coefficient
        f = forces - (c * self.node_damping_weight)[:, None] * self.velocities
        if self._has_conn_damping:
            rel = self.velocities[self.conn_node_b] - self.velocities[self.conn_node_a]
            pair = self.conn_damping[:, None] * rel
            np.add.at(f, self.conn_node_a, pair)
            np.subtract.at(f, self.conn_node_b, pair)
        self.velocities += (h * self.inv_node_mass)[:, None] * f
        spin_momentum = self.inertia * self.omegas
        t = torques + cross3(spin_momentum, self.omegas)
        t -= (c * self.elem_damping_weight)[:, None] * spin_momentum
        self.omegas += h * self.inv_inertia * t

    def invalidate_loads(self) -> None:
        """Drop cached loads; required after mutating state arrays directly."""
        self._have_cache = False

    def reset_state(self) -> None:
        """Restore the rest configuration, zero velocities, no contractions."""
        self.positions[:] = self._rest_positions
        self.velocities[:] = 0.0
        self.directors[:] = self._rest_directors
        self.omegas[:] = 0.0
        self._contraction_rods = np.zeros(0, dtype=np.intp)
        self._contraction_mags = np.zeros(0)
        self._contr_node_a = np.zeros(0, dtype=np.intp)
        self._contr_node_b = np.zeros(0, dtype=np.intp)
        self.external_forces[:] = 0.0
        self._have_cache = False

    # ------------------------------------------------------------- diagnostics

    def detect_instability(self) -> bool:
        """True iff any position, velocity, director entry, or spin is non-finite."""
        return not (
            np.isfinite(self.positions).all()
            and np.isfinite(self.velocities).all()
            and np.isfinite(self.directors).all()
            and np.isfinite(self.omegas).all()
        )

    def stable_dt_estimate(self) -> float:
        """Conservative explicit timestep: 0.1 * min(rest_length / sqrt(E/rho))."""
        wave_speed = np.sqrt(self.elem_modulus / self.elem_density)
        return float(0.1 * np.min(self.rest_lengths / wave_speed))

    def mechanical_energy(self) -> float:
        """Kinetic + rotational + elastic + connection-spring energy (J)."""
        kin = 0.5 * float(self.node_mass @ np.einsum("ni,ni->n", self.velocities, self.velocities))
        rot = 0.5 * float(np.sum(self.inertia * self.omegas * self.omegas))
        edges = self.positions[self.elem_node1] - self.positions[self.elem_node0]
        sigma = np.einsum("eij,ej->ei", self.directors, edges) / self.rest_lengths[:, None]
        sigma[:, 2] -= 1.0
        stretch = 0.5 * float(
            np.sum(self.rest_lengths * np.einsum("ei,ei->e", sigma, self.stretch_rigidity * sigma))
        )
        bend = 0.0
        if self.pair_elem0.size:
            q0 = self.directors[self.pair_elem0]
            q1 = self.directors[self.pair_elem1]
            dphi = rotvec_from_matrix(q0 @ q1.transpose(0, 2, 1)) - self.rest_phi
            bend = 0.5 * float(np.sum(np.einsum("pi,pi->p", dphi, self.bend_rigidity * dphi) / self.voronoi))
        spring = 0.0
        if self.conn_node_a.size:
            rel = self.positions[self.conn_node_b] - self.positions[self.conn_node_a]
            spring = 0.5 * float(self.conn_stiffness @ np.einsum("ci,ci->c", rel, rel))
        return kin + rot + stretch + bend + spring

    def momentum(self) -> np.ndarray:
        """Total linear momentum (kg m/s)."""
        return self.node_mass @ self.velocities

    def rod_strains(self) -> np.ndarray:
        """Axial arc-length strain per rod: (current arc - rest arc) / rest arc."""
        edges = self.positions[self.elem_node1] - self.positions[self.elem_node0]
        arc = np.add.reduceat(np.linalg.norm(edges, axis=-1), self.elem_offset[:-1])
        return (arc - self.rod_rest_arc) / self.rod_rest_arc

    def rod_node_slice(self, rod: int) -> slice:
        """Flat-node slice owned by one rod."""
        return slice(int(self.node_offset[rod]), int(self.node_offset[rod + 1]))

    def node_id(self, rod: int, node: int) -> int:
        """Flat node index for (rod, local node)."""
        n_nodes_r = int(self.node_offset[rod + 1] - self.node_offset[rod])
        if not 0 <= node < n_nodes_r:
            raise IndexError(f"node {node} outside rod {rod}")
        return int(self.node_offset[rod]) + node
