"""Muscle force ceilings that grow with use.

Each muscle turns an activation in [0, 1] into a contractile force
F = activation * ceiling. Between episodes the ceiling compounds by
alpha = 1 + beta*|strain| + gamma*|force|, capped at twice its starting
value, so heavily used muscles become stronger over training while idle
ones plateau.

Forces are stored in newtons; gamma is specified per millinewton of
produced force, and the single mN conversion lives in adapt().
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

logger = logging.getLogger(__name__)

_MILLINEWTONS_PER_NEWTON = 1000.0


@dataclass(frozen=True)
class AdaptConfig:
    """Adaptation law coefficients.

    beta multiplies the episode's max |axial strain| (dimensionless), gamma
    multiplies the episode's produced force in mN, lambda_0 is the starting
    ceiling in N.
    """

    beta: float = 1e-6
    gamma: float = 4e-8
    lambda_0: float = 2.0
    adaptation_enabled: bool = True

    def __post_init__(self) -> None:
        if self.beta < 0.0:
            raise ValueError("beta must be non-negative")
        if self.gamma < 0.0:
            raise ValueError("gamma must be non-negative")
        if self.lambda_0 <= 0.0:
            raise ValueError("lambda_0 must be positive")

    @property
    def ceiling_cap(self) -> float:
        return 2.0 * self.lambda_0


@dataclass
class MuscleState:
    """One muscle's actuation state and use history."""

    muscle_id: int
    force_ceiling: float
    last_episode_strain: float = 0.0
    last_episode_force: float = 0.0
    activation: float = 0.0


def muscle_force(activation: float, force_ceiling: float) -> float:
    """Contractile force F = activation * ceiling.

    Activations outside [0, 1] are clamped with a warning; the learner's
    output is clipped upstream, so this is a safety net.
    """
    if not 0.0 <= activation <= 1.0:
        logger.warning("activation %g outside [0, 1], clamping", activation)
        activation = min(max(activation, 0.0), 1.0)
    return activation * force_ceiling


def adapt(state: MuscleState, config: AdaptConfig) -> float:
    """Grow the ceiling from the previous episode's use; call once per muscle
    at each episode boundary.

    ceiling <- min(alpha * ceiling, 2 * lambda_0) with
    alpha = 1 + beta*|strain| + gamma*|force in mN|. A no-op when adaptation
    is disabled.
    """
    if not config.adaptation_enabled:
        return state.force_ceiling
    force_mn = abs(state.last_episode_force) * _MILLINEWTONS_PER_NEWTON
    alpha = 1.0 + config.beta * abs(state.last_episode_strain) + config.gamma * force_mn
    state.force_ceiling = min(alpha * state.force_ceiling, config.ceiling_cap)
    return state.force_ceiling


def record_episode_use(state: MuscleState, strain_trace, force_this_episode: float) -> MuscleState:
    """Store the episode's use maxima: max |axial strain| over the trace and
    the force produced. An empty trace (episode ended before any control
    step) records zero use.
    """
    trace = list(strain_trace)
    if not trace:
        state.last_episode_strain = 0.0
        state.last_episode_force = 0.0
        return state
    state.last_episode_strain = max(abs(s) for s in trace)
    state.last_episode_force = force_this_episode
    return state
