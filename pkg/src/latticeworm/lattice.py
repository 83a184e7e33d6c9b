"""Parametric lattice-worm construction.

The robot is n_columns vertical structural rods on a circle, anchored at the
base, with n_columns * n_levels contractile muscle rods spanning diagonally
between adjacent columns at consecutive levels. Muscles attach to the
structure through stiff point springs (Connections) whose endpoints coincide
at build time, so the assembled lattice starts in equilibrium.

The terminus is the centroid of the structural top nodes; reaching targets
are the corners of a rectangular prism around it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .rods import Connection, MaterialParams, Rod, RodSystem

# default rubbers for the two rod families (kPa-scale moduli, near-water
# densities, incompressible)
STRUCTURAL_MATERIAL = MaterialParams(youngs_modulus=70e3, density=1070.0)
MUSCLE_MATERIAL = MaterialParams(youngs_modulus=25e3, density=1060.0)


@dataclass(frozen=True)
class LatticeSpec:
    """Geometry and materials of the lattice worm."""

    height: float = 0.100
    diameter: float = 0.075
    n_columns: int = 6
    n_levels: int = 7
    structural_elements: int = 40
    muscle_elements: int = 2
    structural_radius: float = 0.010
    muscle_radius: float = 0.005
    structural_material: MaterialParams = STRUCTURAL_MATERIAL
    muscle_material: MaterialParams = MUSCLE_MATERIAL
    connection_stiffness: float = 100.0

    def __post_init__(self) -> None:
        for name in ("height", "diameter", "structural_radius", "muscle_radius"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive")
        for name in ("n_columns", "n_levels", "structural_elements", "muscle_elements"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be at least 1")
        if self.connection_stiffness <= 0.0:
            raise ValueError("connection_stiffness must be positive")

    @property
    def n_muscles(self) -> int:
        return self.n_columns * self.n_levels


def target_positions(center, half_extents) -> np.ndarray:
    """The 8 prism corners, rows ordered by corner number 1..8.

    Numbering convention: corners 1-4 lie on the far (+y) face, 5-8 on the
    near (-y) face; within each face the order is (+x,+z), (-x,+z), (-x,-z),
    (+x,-z).
    """
    center = np.asarray(center, dtype=float)
    half = np.asarray(half_extents, dtype=float)
    if center.shape != (3,) or half.shape != (3,):
        raise ValueError("center and half_extents must be 3-vectors")
    if np.any(half <= 0.0):
        raise ValueError("half_extents must be componentwise positive")
    signs = np.array(
        [
            [+1, +1, +1],
            [-1, +1, +1],
            [-1, +1, -1],
            [+1, +1, -1],
            [+1, -1, +1],
            [-1, -1, +1],
            [-1, -1, -1],
            [+1, -1, -1],
        ],
        dtype=float,
    )
    return center + signs * half


@dataclass(frozen=True)
class TargetSpec:
    """One corner of the reaching prism."""

    center: tuple[float, float, float]
    half_extents: tuple[float, float, float]
    corner_index: int

    def __post_init__(self) -> None:
        if not 1 <= self.corner_index <= 8:
            raise ValueError("corner_index must be in 1..8")
        # validates half_extents as a side effect
        target_positions(self.center, self.half_extents)

    def position(self) -> np.ndarray:
        return target_positions(self.center, self.half_extents)[self.corner_index - 1]


@dataclass(frozen=True)
class MuscleLayout:
    """Where one muscle lives: lattice coordinates, attachment nodes, and its
    planar coordinate on the unwrapped lattice."""

    muscle_id: int
    column: int
    level: int
    attach_a: tuple[int, int]  # (rod, node) on the column at this level
    attach_b: tuple[int, int]  # (rod, node) on the next column, one level up
    unwrapped_2d: tuple[float, float]  # diagonal midpoint in grid coordinates


@dataclass(frozen=True)
class UnwrappedLattice:
    """Planar rendering description: vertical structure lines at integer x
    (including the wraparound image of column 0 at x = n_columns) and one
    diagonal segment per muscle."""

    n_columns: int
    n_levels: int
    structure_x: tuple[float, ...]
    segments: np.ndarray = field(repr=False)  # (n_muscles, 2, 2) grid coords


def unwrap_2d(layouts: list[MuscleLayout] | tuple[MuscleLayout, ...]) -> UnwrappedLattice:
    """Flatten the cylindrical lattice onto a grid: column -> x, level -> y.

    The seam repeats column 0 at x = n_columns so wraparound muscles draw as
    plain diagonals.
    """
    n_columns = max(layout.column for layout in layouts) + 1
    n_levels = max(layout.level for layout in layouts) + 1
    segments = np.empty((len(layouts), 2, 2))
    for i, layout in enumerate(layouts):
        segments[i, 0] = (layout.column, layout.level)
        segments[i, 1] = (layout.column + 1, layout.level + 1)
    return UnwrappedLattice(
        n_columns=n_columns,
        n_levels=n_levels,
        structure_x=tuple(float(x) for x in range(n_columns + 1)),
        segments=segments,
    )


def level_node(spec: LatticeSpec, level: int) -> int:
    """Structural node index at a level boundary (0..n_levels), rounding
    half-up so the mapping is monotone for any element count."""
    return int(math.floor(spec.structural_elements * level / spec.n_levels + 0.5))


@dataclass(frozen=True, eq=False)
class LatticeSystem:
    """The built robot: rod assembly plus the bookkeeping the environment and
    reporting need (muscle placement, attachment nodes, terminus nodes)."""

    spec: LatticeSpec
    system: RodSystem
    muscles: tuple[MuscleLayout, ...]
    muscle_rod_ids: np.ndarray  # (n_muscles,) rod index of each muscle
    top_nodes: np.ndarray  # global node ids of structural rod tips
    attachment_nodes: np.ndarray  # global node ids, muscle end nodes in order

    def terminus(self) -> np.ndarray:
        return self.system.positions[self.top_nodes].mean(axis=0)


def build_lattice(spec: LatticeSpec) -> LatticeSystem:
    """Assemble the worm from its spec.

    Structural rods stand on a circle of spec.diameter, clamped at the base
    (node and element 0). Muscle m = column + level * n_columns runs from
    (column, level) to (column + 1 mod n_columns, level + 1); both ends are
    tied to the structure by Connections with zero initial stretch.
    """
    radius = 0.5 * spec.diameter
    rods: list[Rod] = []
    z = np.linspace(0.0, spec.height, spec.structural_elements + 1)
    column_base = np.empty((spec.n_columns, 3))
    for c in range(spec.n_columns):
        angle = 2.0 * np.pi * c / spec.n_columns
        column_base[c] = (radius * np.cos(angle), radius * np.sin(angle), 0.0)
        positions = column_base[c] + np.column_stack([np.zeros_like(z), np.zeros_like(z), z])
        rods.append(
            Rod(
                positions=positions,
                radius=spec.structural_radius,
                material=spec.structural_material,
                clamped_nodes=(0,),
                clamped_elements=(0,),
            )
        )

    muscles: list[MuscleLayout] = []
    connections: list[Connection] = []
    muscle_rod_ids = np.empty(spec.n_muscles, dtype=np.intp)
    for level in range(spec.n_levels):
        for column in range(spec.n_columns):
            muscle_id = column + level * spec.n_columns
            col_b = (column + 1) % spec.n_columns
            node_a = level_node(spec, level)
            node_b = level_node(spec, level + 1)
            if col_b == column:
                raise ValueError(
                    f"muscle {muscle_id} (column {column}, level {level}) "
                    "would span a column to itself; need at least 2 columns"
                )
            pos_a = column_base[column] + (0.0, 0.0, z[node_a])
            pos_b = column_base[col_b] + (0.0, 0.0, z[node_b])
            if np.linalg.norm(pos_b - pos_a) < 1e-12:
                raise ValueError(
                    f"muscle {muscle_id} (column {column}, level {level}) "
                    "has coincident attachment points"
                )
            rod_id = len(rods)
            muscle_rod_ids[muscle_id] = rod_id
            rods.append(
                Rod(
                    positions=np.linspace(pos_a, pos_b, spec.muscle_elements + 1),
                    radius=spec.muscle_radius,
                    material=spec.muscle_material,
                )
            )
            connections.append(
                Connection(
                    rod_a=column, node_a=node_a,
                    rod_b=rod_id, node_b=0,
                    stiffness=spec.connection_stiffness,
                )
            )
            connections.append(
                Connection(
                    rod_a=col_b, node_a=node_b,
                    rod_b=rod_id, node_b=spec.muscle_elements,
                    stiffness=spec.connection_stiffness,
                )
            )
            muscles.append(
                MuscleLayout(
                    muscle_id=muscle_id,
                    column=column,
                    level=level,
                    attach_a=(column, node_a),
                    attach_b=(col_b, node_b),
                    unwrapped_2d=(column + 0.5, level + 0.5),
                )
            )

    system = RodSystem(rods, connections)
    top_nodes = np.array(
        [system.node_id(c, spec.structural_elements) for c in range(spec.n_columns)],
        dtype=np.intp,
    )
    attachment_nodes = np.empty(2 * spec.n_muscles, dtype=np.intp)
    for layout in muscles:
        rod_id = int(muscle_rod_ids[layout.muscle_id])
        attachment_nodes[2 * layout.muscle_id] = system.node_id(rod_id, 0)
        attachment_nodes[2 * layout.muscle_id + 1] = system.node_id(rod_id, spec.muscle_elements)
    return LatticeSystem(
        spec=spec,
        system=system,
        muscles=tuple(muscles),
        muscle_rod_ids=muscle_rod_ids,
        top_nodes=top_nodes,
        attachment_nodes=attachment_nodes,
    )
