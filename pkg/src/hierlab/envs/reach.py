from __future__ import annotations

import numpy as np

from hierlab.core import GoalObservation, RewardSpec
from hierlab.e2h_ise import InitSpace, sample_initial
from hierlab.envs.base import GoalEnv


class PointReach2D(GoalEnv):
    """Kinematic point in ``[-1, 1]^2`` that must reach a goal in the same square.

    The action is a velocity command scaled by ``max_speed`` per step. The
    curriculum space is 4-D, ``[agent_xy | goal_xy]``, so one scale shrinks both.
    """

    name = "point_reach"
    state_dim = 2
    goal_dim = 2
    default_gamma = 0.95

    def __init__(self, max_speed: float = 0.1, tolerance: float = 0.05, horizon: int = 100):
        super().__init__()
        self.max_speed = max_speed
        self.horizon = horizon
        self.reward_spec = RewardSpec(tolerance)
        self.init_space = InitSpace(-np.ones(4), np.ones(4))
        self.pos = np.zeros(2)
        self.goal = np.zeros(2)

    def obs_normalizer(self):
        return np.zeros(self.obs_dim), np.ones(self.obs_dim)

    def observe(self) -> GoalObservation:
        return GoalObservation(self.pos.copy(), self.pos.copy(), self.goal.copy())

    def reset(self, c, rng):
        x = sample_initial(self.init_space, c, rng)
        self.pos = x[:2].copy()
        self.goal = x[2:].copy()
        self._t = 0
        self._active = True
        return self.observe()

    def _advance(self, a):
        self.pos = np.clip(self.pos + a * self.max_speed, -1.0, 1.0)
