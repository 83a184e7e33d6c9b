"""Episodic reaching environment around the lattice simulation.

Each control step turns the agent's per-muscle activations into contractile
forces F = A * ceiling, simulates a fixed window of physics, and rewards
closeness of the terminus to the active target corner. Force ceilings adapt
between episodes from recorded use, and persist across resets.

Observation layout (float64, fixed per lattice spec):
  [ node positions (observation points + terminus, flattened xyz),
    node velocities (same points),
    previous actions (n_muscles),
    force ceilings (n_muscles, N),
    target (xyz) ]
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .lattice import LatticeSpec, LatticeSystem, build_lattice, target_positions
from .muscles import AdaptConfig, MuscleState, adapt, record_episode_use
from .rods import SimConfig

DEFAULT_PRISM_HALF_EXTENTS = (0.03, 0.03, 0.02)


@dataclass(frozen=True)
class RewardConfig:
    """Two-tier distance bonus around the target, quadratic penalty outside."""

    bonus_radius_d: float = 0.001
    inner_bonus: float = 2.0
    outer_bonus: float = 0.5
    instability_penalty: float = -2.0

    def __post_init__(self) -> None:
        if self.bonus_radius_d <= 0.0:
            raise ValueError("bonus_radius_d must be positive")


@dataclass(frozen=True)
class EpisodeConfig:
    control_steps_per_episode: int = 10
    control_dt: float = 0.1
    action_hold: bool = True

    def __post_init__(self) -> None:
        if self.control_steps_per_episode < 1:
            raise ValueError("control_steps_per_episode must be at least 1")
        if self.control_dt <= 0.0:
            raise ValueError("control_dt must be positive")


def reward(n: float, config: RewardConfig = RewardConfig()) -> float:
    """R = -n^2 + phi(n) with phi = inner bonus for n <= d, outer bonus for
    d < n <= 2d, else 0. Distances in meters; boundary distances take the
    higher tier."""
    d = config.bonus_radius_d
    if n <= d:
        phi = config.inner_bonus
    elif n <= 2.0 * d:
        phi = config.outer_bonus
    else:
        phi = 0.0
    return -(n * n) + phi


def distance_to_target(terminus, target) -> float:
    """Euclidean distance; non-finite when the state has blown up."""
    diff = np.asarray(terminus, dtype=float) - np.asarray(target, dtype=float)
    return float(np.sqrt(diff @ diff))


@dataclass(frozen=True)
class ObservationLayout:
    """Index map into the flat observation vector."""

    n_points: int  # observation points including the terminus
    node_positions: slice
    node_velocities: slice
    previous_actions: slice
    force_ceilings: slice
    target: slice
    observed_nodes: tuple[int, ...]  # global node ids; terminus appended after

    @property
    def size(self) -> int:
        return self.target.stop


@dataclass
class EpisodeRecord:
    episode: int
    seed: int | None
    target_index: int
    adaptation_enabled: bool
    episode_return: float
    max_step_reward: float
    final_distance: float
    unstable: bool


@dataclass
class AdaptationRecord:
    episode: int
    muscle_id: int
    force_ceiling: float
    episode_force: float
    mean_activation: float


class ReachEnv:
    """Reaching task for one agent; deterministic given actions and target."""

    def __init__(
        self,
        spec: LatticeSpec = LatticeSpec(),
        adapt_config: AdaptConfig = AdaptConfig(),
        reward_config: RewardConfig = RewardConfig(),
        episode_config: EpisodeConfig = EpisodeConfig(),
        prism_center=None,
        prism_half_extents=DEFAULT_PRISM_HALF_EXTENTS,
        damping_coefficient: float = 0.035,
        dt: float | None = None,
        observe_all_nodes: bool = False,
        divergence_radius: float = 1.0,
    ):
        self.spec = spec
        self.adapt_config = adapt_config
        self.reward_config = reward_config
        self.episode_config = episode_config
        # a diverging integration passes through huge-but-finite states on its
        # way to NaN; any terminus further than this is already unphysical
        # (default 10x the lattice height), so treat it as instability while
        # -n^2 is still above the -2 penalty
        self.divergence_radius = float(divergence_radius)
        self.lattice: LatticeSystem = build_lattice(spec)
        self.system = self.lattice.system
        if prism_center is None:
            prism_center = tuple(self.lattice.terminus())
        self.prism_center = tuple(float(v) for v in prism_center)
        self.prism_half_extents = tuple(float(v) for v in prism_half_extents)
        self.targets = target_positions(self.prism_center, self.prism_half_extents)

        # substep so the control window is an exact multiple of dt at or
        # below the stability estimate
        dt_max = self.system.stable_dt_estimate() if dt is None else float(dt)
        n_sub = max(1, math.ceil(episode_config.control_dt / dt_max))
        self.sim_config = SimConfig(
            dt=episode_config.control_dt / n_sub,
            damping_coefficient=damping_coefficient,
            substeps_per_control=n_sub,
        )

        self.n_muscles = spec.n_muscles
        self.muscle_states = [
            MuscleState(muscle_id=m, force_ceiling=adapt_config.lambda_0)
            for m in range(self.n_muscles)
        ]
        if observe_all_nodes:
            observed = tuple(range(self.system.n_nodes))
        else:
            observed = tuple(int(n) for n in self.lattice.attachment_nodes)
        self._layout = self._build_layout(observed)

        self.episode_index = 0
        self.episode_log: list[EpisodeRecord] = []
        self.adaptation_log: list[AdaptationRecord] = []

        self._seed: int | None = None
        self.target_index = 1
        self._target = self.targets[0]
        self._previous_actions = np.zeros(self.n_muscles)
        self._held_action: np.ndarray | None = None
        self._strain_traces: list[list[float]] = [[] for _ in range(self.n_muscles)]
        self._episode_max_force = np.zeros(self.n_muscles)
        self._activation_sums = np.zeros(self.n_muscles)
        self._step_count = 0
        self._episode_rewards: list[float] = []
        self._done = True
        self._unstable = False
        self._last_obs = self._observe()

    # ------------------------------------------------------------ observation

    def _build_layout(self, observed: tuple[int, ...]) -> ObservationLayout:
        n_points = len(observed) + 1  # terminus appended
        pos = 3 * n_points
        cursor = 0
        sl = {}
        for name, width in [
            ("node_positions", pos),
            ("node_velocities", pos),
            ("previous_actions", self.n_muscles),
            ("force_ceilings", self.n_muscles),
            ("target", 3),
        ]:
            sl[name] = slice(cursor, cursor + width)
            cursor += width
        return ObservationLayout(n_points=n_points, observed_nodes=observed, **sl)

    def layout(self) -> ObservationLayout:
        return self._layout

    def force_ceilings(self) -> np.ndarray:
        return np.array([s.force_ceiling for s in self.muscle_states])

    def _observe(self) -> np.ndarray:
        layout = self._layout
        obs = np.empty(layout.size)
        nodes = np.asarray(layout.observed_nodes, dtype=np.intp)
        points = np.vstack([self.system.positions[nodes], self.lattice.terminus()])
        top = self.system.velocities[self.lattice.top_nodes].mean(axis=0)
        speeds = np.vstack([self.system.velocities[nodes], top])
        obs[layout.node_positions] = points.ravel()
        obs[layout.node_velocities] = speeds.ravel()
        obs[layout.previous_actions] = self._previous_actions
        obs[layout.force_ceilings] = self.force_ceilings()
        obs[layout.target] = self._target
        return obs

    # -------------------------------------------------------------- lifecycle

    def reset(self, seed: int | None = None, target_index: int | None = None) -> np.ndarray:
        """Restore the rest configuration and start a fresh episode.

        Force ceilings persist across resets; previous actions clear to zero.
        The seed is recorded for logging (the environment itself is
        deterministic)."""
        if target_index is not None:
            if not 1 <= target_index <= 8:
                raise ValueError("target_index must be in 1..8")
            self.target_index = target_index
        self._seed = seed if seed is not None else self._seed
        self._target = self.targets[self.target_index - 1]
        self.system.reset_state()
        self._previous_actions = np.zeros(self.n_muscles)
        self._held_action = None
        self._strain_traces = [[] for _ in range(self.n_muscles)]
        self._episode_max_force = np.zeros(self.n_muscles)
        self._activation_sums = np.zeros(self.n_muscles)
        self._step_count = 0
        self._episode_rewards = []
        self._done = False
        self._unstable = False
        self._last_obs = self._observe()
        return self._last_obs

    def step(self, action) -> tuple[np.ndarray, float, bool, dict]:
        """Apply activations, simulate one control window, score the result.

        Raw actions are clipped to [0, 1]; with action_hold the first step's
        activations are reused for the rest of the episode. On instability
        the reward is the instability penalty, the episode ends, and the last
        finite observation is returned."""
        if self._done:
            raise RuntimeError("episode is done; call reset() first")
        action = np.asarray(action, dtype=float)
        if action.shape != (self.n_muscles,):
            raise ValueError(f"action must have shape ({self.n_muscles},), got {action.shape}")
        activation = np.clip(action, 0.0, 1.0)
        if self.episode_config.action_hold:
            if self._held_action is None:
                self._held_action = activation
            activation = self._held_action

        ceilings = self.force_ceilings()
        forces = activation * ceilings
        for m, state in enumerate(self.muscle_states):
            state.activation = float(activation[m])
        self._previous_actions = activation.copy()
        self._episode_max_force = np.maximum(self._episode_max_force, forces)
        self._activation_sums += activation

        self.system.set_contractions(self.lattice.muscle_rod_ids, forces)
        self.system.advance(self.sim_config)
        self._step_count += 1

        terminus, n = None, float("nan")
        if not self.system.detect_instability():
            terminus = self.lattice.terminus()
            n = distance_to_target(terminus, self._target)
        if not np.isfinite(n) or n > self.divergence_radius:
            self._done = True
            self._unstable = True
            step_reward = self.reward_config.instability_penalty
            self._episode_rewards.append(step_reward)
            info = {"terminus": None, "distance": float("nan"), "instability": True}
            self._finish_episode()
            return self._last_obs, step_reward, True, info

        strains = self.system.rod_strains()[self.lattice.muscle_rod_ids]
        for m in range(self.n_muscles):
            self._strain_traces[m].append(float(strains[m]))

        step_reward = reward(n, self.reward_config)
        self._episode_rewards.append(step_reward)
        self._done = self._step_count >= self.episode_config.control_steps_per_episode
        self._last_obs = self._observe()
        info = {"terminus": terminus, "distance": n, "instability": False}
        if self._done:
            self._finish_episode()
        return self._last_obs, step_reward, self._done, info

    # ------------------------------------------------------ episode boundary

    def _finish_episode(self) -> None:
        self.end_of_episode_hook()

    def end_of_episode_hook(self) -> None:
        """Record use, adapt every ceiling, and append the episode logs.

        Runs once per episode, after the final reward; the next reset starts
        with the updated ceilings."""
        steps = max(self._step_count, 1)
        for m, state in enumerate(self.muscle_states):
            record_episode_use(state, self._strain_traces[m], float(self._episode_max_force[m]))
            adapt(state, self.adapt_config)
            self.adaptation_log.append(
                AdaptationRecord(
                    episode=self.episode_index,
                    muscle_id=m,
                    force_ceiling=state.force_ceiling,
                    episode_force=state.last_episode_force,
                    mean_activation=float(self._activation_sums[m]) / steps,
                )
            )
        rewards = self._episode_rewards
        final_n = float("nan")
        if not self._unstable:
            final_n = distance_to_target(self.lattice.terminus(), self._target)
        self.episode_log.append(
            EpisodeRecord(
                episode=self.episode_index,
                seed=self._seed,
                target_index=self.target_index,
                adaptation_enabled=self.adapt_config.adaptation_enabled,
                episode_return=float(sum(rewards)),
                max_step_reward=float(max(rewards)) if rewards else float("nan"),
                final_distance=final_n,
                unstable=self._unstable,
            )
        )
        self.episode_index += 1

    # ------------------------------------------------------------ checkpoint

    def get_state(self) -> dict[str, np.ndarray]:
        """Complete mutable state as named arrays, for checkpointing."""
        traces = np.array(self._strain_traces, dtype=float)
        if traces.size == 0:
            traces = traces.reshape(self.n_muscles, 0)
        held = self._held_action
        return {
            "positions": self.system.positions.copy(),
            "velocities": self.system.velocities.copy(),
            "directors": self.system.directors.copy(),
            "omegas": self.system.omegas.copy(),
            "previous_actions": self._previous_actions.copy(),
            "has_held_action": np.array(held is not None),
            "held_action": (held if held is not None else np.zeros(self.n_muscles)).copy(),
            "strain_traces": traces,
            "episode_max_force": self._episode_max_force.copy(),
            "activation_sums": self._activation_sums.copy(),
            "episode_rewards": np.array(self._episode_rewards, dtype=float),
            "step_count": np.array(self._step_count),
            "done": np.array(self._done),
            "unstable": np.array(self._unstable),
            "target_index": np.array(self.target_index),
            "has_seed": np.array(self._seed is not None),
            "seed": np.array(self._seed if self._seed is not None else 0),
            "episode_index": np.array(self.episode_index),
            "force_ceilings": self.force_ceilings(),
            "last_episode_strains": np.array(
                [s.last_episode_strain for s in self.muscle_states]
            ),
            "last_episode_forces": np.array(
                [s.last_episode_force for s in self.muscle_states]
            ),
            "activations": np.array([s.activation for s in self.muscle_states]),
        }

    def set_state(self, state: dict[str, np.ndarray]) -> None:
        """Restore state captured by get_state. Cached loads are recomputed
        from the restored state, so a restored run continues bit-identically."""
        self.system.positions[:] = state["positions"]
        self.system.velocities[:] = state["velocities"]
        self.system.directors[:] = state["directors"]
        self.system.omegas[:] = state["omegas"]
        self.system.invalidate_loads()
        self._previous_actions = np.asarray(state["previous_actions"], dtype=float).copy()
        self._held_action = (
            np.asarray(state["held_action"], dtype=float).copy()
            if bool(state["has_held_action"])
            else None
        )
        traces = np.asarray(state["strain_traces"], dtype=float)
        self._strain_traces = [list(traces[m]) for m in range(self.n_muscles)]
        self._episode_max_force = np.asarray(state["episode_max_force"], dtype=float).copy()
        self._activation_sums = np.asarray(state["activation_sums"], dtype=float).copy()
        self._episode_rewards = [float(r) for r in state["episode_rewards"]]
        self._step_count = int(state["step_count"])
        self._done = bool(state["done"])
        self._unstable = bool(state["unstable"])
        self.target_index = int(state["target_index"])
        self._target = self.targets[self.target_index - 1]
        self._seed = int(state["seed"]) if bool(state["has_seed"]) else None
        self.episode_index = int(state["episode_index"])
        for m, muscle in enumerate(self.muscle_states):
            muscle.force_ceiling = float(state["force_ceilings"][m])
            muscle.last_episode_strain = float(state["last_episode_strains"][m])
            muscle.last_episode_force = float(state["last_episode_forces"][m])
            muscle.activation = float(state["activations"][m])
        self._last_obs = self._observe()
